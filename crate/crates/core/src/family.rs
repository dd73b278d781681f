//! The three-parameter fold–saddle family.
//!
//! The upper field `X = (1, a(x - lambda))` has a fold at `(lambda, 0)`,
//! invisible for `a = -1` and visible for `a = 1`. The lower field is the
//! linear saddle with eigenvalues `{alpha, 1}` along `(1, 1)` and `(1, -1)`,
//! translated to `S = (0, -beta)`, with `alpha = mu - 1`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{AffineField, NonSmoothSystem, Point};
use crate::sigma::FoldKind;

/// Half-width of the admitted `mu` interval.
pub const MU_RADIUS: f64 = 0.2;

/// `|1 + alpha|` at or below this switches the pseudo-equilibrium formulas to
/// their `alpha = -1` limits.
pub const ALPHA_CRITICAL_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FamilyError {
    #[error("parameter {name} = {value} outside {range}")]
    ParamOutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("the visible upper fold has no return map")]
    VisibleFoldNoReturn,
    #[error("x = {x} outside the map domain ({lo}, {hi})")]
    DomainViolation { x: f64, lo: f64, hi: f64 },
    #[error("unknown fold type {0:?} (expected \"i\" or \"v\")")]
    UnknownTau(String),
}

/// Type of the upper fold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tau {
    #[serde(rename = "i")]
    Invisible,
    #[serde(rename = "v")]
    Visible,
}

impl Tau {
    /// Slope of `X.f` along the line: `-1` for the invisible fold, `+1` for the visible one.
    pub fn fold_slope(self) -> f64 {
        match self {
            Tau::Invisible => -1.0,
            Tau::Visible => 1.0,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            Tau::Invisible => "i",
            Tau::Visible => "v",
        }
    }
}

impl fmt::Display for Tau {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Tau {
    type Err = FamilyError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "i" => Ok(Tau::Invisible),
            "v" => Ok(Tau::Visible),
            other => Err(FamilyError::UnknownTau(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldSaddleParams {
    pub tau: Tau,
    pub lambda: f64,
    pub beta: f64,
    pub mu: f64,
}

impl FoldSaddleParams {
    pub fn new(tau: Tau, lambda: f64, beta: f64, mu: f64) -> Result<Self, FamilyError> {
        let params = Self {
            tau,
            lambda,
            beta,
            mu,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), FamilyError> {
        let check = |name, value: f64, bound: f64, range| {
            if value.is_finite() && value.abs() < bound {
                Ok(())
            } else {
                Err(FamilyError::ParamOutOfRange { name, value, range })
            }
        };
        check("lambda", self.lambda, 1.0, "(-1, 1)")?;
        check("beta", self.beta, 1.0, "(-1, 1)")?;
        check("mu", self.mu, MU_RADIUS, "(-0.2, 0.2)")
    }

    pub fn alpha(&self) -> f64 {
        self.mu - 1.0
    }

    /// Abscissa of the lower fold, `(1 + alpha) beta / (1 - alpha)`.
    pub fn lower_fold_x(&self) -> f64 {
        let alpha = self.alpha();
        (1.0 + alpha) * self.beta / (1.0 - alpha)
    }

    fn alpha_is_critical(&self) -> bool {
        (1.0 + self.alpha()).abs() <= ALPHA_CRITICAL_TOL
    }
}

pub fn upper_field(params: &FoldSaddleParams) -> AffineField {
    let a = params.tau.fold_slope();
    AffineField::new(0.0, 0.0, a, 0.0, 1.0, -a * params.lambda)
}

pub fn lower_field(params: &FoldSaddleParams) -> AffineField {
    let alpha = params.alpha();
    let diag = (1.0 + alpha) / 2.0;
    let off = (alpha - 1.0) / 2.0;
    // constants written as A * (0, beta) so that Y(S) vanishes exactly
    AffineField::new(diag, off, off, diag, off * params.beta, diag * params.beta)
}

pub fn build_system(params: &FoldSaddleParams) -> Result<NonSmoothSystem, FamilyError> {
    params.validate()?;
    Ok(NonSmoothSystem::new(
        upper_field(params),
        lower_field(params),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerFold {
    pub point: Point,
    pub kind: FoldKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Landmarks {
    /// Upper fold `(lambda, 0)`.
    pub d: Point,
    /// Saddle of the lower field.
    pub saddle: Point,
    /// Lower fold; absent when the saddle sits on the line (`beta = 0`).
    pub lower_fold: Option<LowerFold>,
    /// Where the separatrix along `(1, -1)` meets the line.
    pub h: Point,
    /// Where the separatrix along `(1, 1)` meets the line.
    pub j: Point,
}

pub fn landmarks(params: &FoldSaddleParams) -> Landmarks {
    let beta = params.beta;
    let lower_fold = if beta == 0.0 {
        None
    } else {
        let x = params.lower_fold_x();
        let lie2 = lower_field(params).lie2(Point::on_sigma(x));
        Some(LowerFold {
            point: Point::on_sigma(x),
            kind: if lie2 < 0.0 {
                FoldKind::Visible
            } else {
                FoldKind::Invisible
            },
        })
    };
    Landmarks {
        d: Point::on_sigma(params.lambda),
        saddle: Point::new(0.0, -beta),
        lower_fold,
        h: Point::on_sigma(-beta),
        j: Point::on_sigma(beta),
    }
}

fn in_open_unit(x: f64) -> Option<f64> {
    (x.is_finite() && x.abs() < 1.0).then_some(x)
}

/// The pseudo-equilibrium inside `(-1, 1)` predicted in closed form.
///
/// For the invisible fold this is the smaller root `p-` of the direction
/// numerator; for the visible fold it is the root that stays bounded as
/// `mu -> 0` (the other one is [`sigma_saddle_closed_form`]). At `alpha = -1`
/// the limits `lambda beta / (1 + beta)` and `beta lambda / (beta - 1)` are
/// used. The result is a root of the numerator whether or not it lies in a
/// sliding or escaping interval.
pub fn pseudo_eq_closed_form(params: &FoldSaddleParams) -> Option<f64> {
    let (alpha, lambda, beta) = (params.alpha(), params.lambda, params.beta);
    let critical = params.alpha_is_critical();
    let root = match params.tau {
        Tau::Invisible if critical => lambda * beta / (1.0 + beta),
        Tau::Visible if critical => beta * lambda / (beta - 1.0),
        Tau::Invisible => {
            let b = (1.0 - alpha) * (1.0 + beta) + lambda * (1.0 + alpha);
            let disc = b * b - 4.0 * beta * (1.0 + alpha) * (1.0 + alpha + lambda * (1.0 - alpha));
            if disc < 0.0 {
                return None;
            }
            (b - disc.sqrt()) / (2.0 * (1.0 + alpha))
        }
        Tau::Visible => {
            let (b, disc) = visible_quadratic(params);
            if disc < 0.0 {
                return None;
            }
            (b + disc.sqrt()) / (2.0 * (1.0 + alpha))
        }
    };
    in_open_unit(root)
}

/// `(B, B^2 + 4 (1 + alpha) C)` for the visible-fold numerator written as
/// `(1 + alpha) x^2 - B x - C`.
fn visible_quadratic(params: &FoldSaddleParams) -> (f64, f64) {
    let (alpha, lambda, beta) = (params.alpha(), params.lambda, params.beta);
    let b = (alpha - 1.0) * (1.0 - beta) + lambda * (1.0 + alpha);
    let c = beta * (1.0 + alpha + lambda * (alpha - 1.0));
    (b, b * b + 4.0 * (1.0 + alpha) * c)
}

/// The far root of the visible-fold direction numerator, roughly
/// `-2 (1 - beta) / mu`. It lies far outside the unit square and moves to
/// infinity as `mu -> 0`; `None` for `alpha = -1` or the invisible fold.
pub fn sigma_saddle_closed_form(params: &FoldSaddleParams) -> Option<f64> {
    if params.tau != Tau::Visible || params.alpha_is_critical() {
        return None;
    }
    let (b, disc) = visible_quadratic(params);
    if disc < 0.0 {
        return None;
    }
    let root = (b - disc.sqrt()) / (2.0 * (1.0 + params.alpha()));
    root.is_finite().then_some(root)
}

/// The visible-fold roots `(p, q)` exactly as they appear in print: the
/// linear coefficient carries `-lambda (1 + alpha)` and `p` takes the minus
/// branch. Kept only to report how far they are from the true roots.
pub fn printed_visible_roots(params: &FoldSaddleParams) -> Option<(f64, f64)> {
    let alpha = params.alpha();
    if params.alpha_is_critical() {
        return None;
    }
    let (lambda, beta) = (params.lambda, params.beta);
    let b = (alpha - 1.0) * (1.0 - beta) - lambda * (1.0 + alpha);
    let disc = b * b + 4.0 * beta * (1.0 + alpha) * (1.0 + alpha + lambda * (alpha - 1.0));
    if disc < 0.0 {
        return None;
    }
    let denom = 2.0 * (alpha + 1.0);
    Some(((b - disc.sqrt()) / denom, (b + disc.sqrt()) / denom))
}

/// Transition map of the invisible upper fold: `x -> 2 lambda - x`.
pub fn return_map_upper(params: &FoldSaddleParams, x: f64) -> Result<f64, FamilyError> {
    match params.tau {
        Tau::Invisible => Ok(2.0 * params.lambda - x),
        Tau::Visible => Err(FamilyError::VisibleFoldNoReturn),
    }
}

fn saddle_map_domain(params: &FoldSaddleParams, x: f64) -> Result<(f64, f64), FamilyError> {
    let (lo, hi) = (params.lower_fold_x(), params.beta);
    if params.beta > 0.0 && lo < x && x < hi {
        Ok((lo, hi))
    } else {
        Err(FamilyError::DomainViolation { x, lo, hi })
    }
}

/// Affine transition map of the lower field from `(i1, beta)` onto
/// `(-beta, i1)`: fixes the fold `i1` and sends `j` to `h`.
///
/// Exact at `mu = 0`, where it reduces to `x -> -x`.
pub fn saddle_map_affine(params: &FoldSaddleParams, x: f64) -> Result<f64, FamilyError> {
    let (i1, beta) = saddle_map_domain(params, x)?;
    Ok((2.0 * i1 * beta - x * (i1 + beta)) / (beta - i1))
}

/// The lower transition map as printed, `(x (i1 + beta) - 2 i1^2) / (beta - i1)`.
/// It is the identity at `mu = 0` and disagrees with the flow.
pub fn saddle_map_printed(params: &FoldSaddleParams, x: f64) -> Result<f64, FamilyError> {
    let (i1, beta) = saddle_map_domain(params, x)?;
    Ok((x * (i1 + beta) - 2.0 * i1 * i1) / (beta - i1))
}

/// The seed systems written in relay-control form `(u(y), a(tau, y) x)` with
/// `u(y) = 1` above the line and `u(y) = -y` below it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RelayField {
    pub tau: Tau,
}

impl RelayField {
    /// Defined off the line only.
    pub fn eval(&self, p: Point) -> [f64; 2] {
        let phi = if p.y >= 0.0 { -1.0 } else { -p.y };
        let u = -phi * p.y.signum();
        let a = match self.tau {
            Tau::Invisible => -1.0,
            Tau::Visible => p.y.signum(),
        };
        [u, a * p.x]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelayPreset {
    pub params: FoldSaddleParams,
    pub relay: RelayField,
    pub system: NonSmoothSystem,
}

pub fn relay_preset(tau: Tau) -> RelayPreset {
    let params = FoldSaddleParams {
        tau,
        lambda: 0.0,
        beta: 0.0,
        mu: 0.0,
    };
    RelayPreset {
        params,
        relay: RelayField { tau },
        system: NonSmoothSystem::new(upper_field(&params), lower_field(&params)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(tau: Tau, lambda: f64, beta: f64, mu: f64) -> FoldSaddleParams {
        FoldSaddleParams::new(tau, lambda, beta, mu).unwrap()
    }

    #[test]
    fn seed_systems() {
        let z = build_system(&params(Tau::Invisible, 0.0, 0.0, 0.0)).unwrap();
        assert_eq!(z.upper.eval(Point::new(0.3, 0.1)), [1.0, -0.3]);
        assert_eq!(z.lower.eval(Point::new(0.3, -0.2)), [0.2, -0.3]);
        let z = build_system(&params(Tau::Visible, 0.0, 0.0, 0.0)).unwrap();
        assert_eq!(z.upper.eval(Point::new(0.3, 0.1)), [1.0, 0.3]);
    }

    #[test]
    fn lower_field_value() {
        let z = build_system(&params(Tau::Invisible, 0.0, 0.5, 0.1)).unwrap();
        let [u, v] = z.lower.eval(Point::on_sigma(0.2));
        assert!((u + 0.465).abs() < 1e-15);
        assert!((v + 0.165).abs() < 1e-15);
    }

    #[test]
    fn out_of_range() {
        for (l, b, m) in [
            (1.0, 0.0, 0.0),
            (0.0, -1.2, 0.0),
            (0.0, 0.0, 0.2),
            (f64::NAN, 0.0, 0.0),
        ] {
            assert!(matches!(
                FoldSaddleParams::new(Tau::Invisible, l, b, m),
                Err(FamilyError::ParamOutOfRange { .. })
            ));
        }
    }

    #[test]
    fn tau_codes() {
        assert_eq!("i".parse::<Tau>().unwrap(), Tau::Invisible);
        assert_eq!(Tau::Visible.to_string(), "v");
        assert!("x".parse::<Tau>().is_err());
        let p: FoldSaddleParams =
            serde_json::from_str(r#"{"tau":"v","lambda":0.1,"beta":-0.2,"mu":0.05}"#).unwrap();
        assert_eq!(p.tau, Tau::Visible);
    }

    #[test]
    fn landmark_values() {
        let l = landmarks(&params(Tau::Invisible, 0.0, 0.5, 0.1));
        let fold = l.lower_fold.unwrap();
        assert!((fold.point.x - 0.05 / 1.9).abs() < 1e-15);
        assert_eq!(fold.kind, FoldKind::Invisible);
        assert_eq!(l.h, Point::on_sigma(-0.5));
        assert_eq!(l.j, Point::on_sigma(0.5));
        assert_eq!(l.saddle, Point::new(0.0, -0.5));

        let l = landmarks(&params(Tau::Invisible, 0.2, 0.0, 0.1));
        assert!(l.lower_fold.is_none());
        assert_eq!(l.saddle.y, 0.0);
        assert_eq!(l.h.x, l.j.x);

        let l = landmarks(&params(Tau::Visible, 0.2, -0.5, 0.0));
        let fold = l.lower_fold.unwrap();
        assert_eq!(fold.point.x, 0.0);
        assert_eq!(fold.kind, FoldKind::Visible);
        assert_eq!(l.d, Point::on_sigma(0.2));
    }

    #[test]
    fn pseudo_equilibrium_specializations() {
        let p = pseudo_eq_closed_form(&params(Tau::Invisible, -0.3, 0.5, 0.0)).unwrap();
        assert_eq!(p, -0.3 * 0.5 / 1.5);
        let p = pseudo_eq_closed_form(&params(Tau::Visible, 0.3, 0.5, 0.0)).unwrap();
        assert_eq!(p, 0.5 * 0.3 / (0.5 - 1.0));
    }

    #[test]
    fn pseudo_equilibrium_perturbed() {
        let p = pseudo_eq_closed_form(&params(Tau::Invisible, -0.3, 0.5, 0.1)).unwrap();
        assert!((p + 0.0831).abs() < 1e-4, "{p}");
        let q = sigma_saddle_closed_form(&params(Tau::Visible, 0.3, 0.5, 0.1)).unwrap();
        assert!(q < -8.0, "{q}");
        assert!(sigma_saddle_closed_form(&params(Tau::Visible, 0.3, 0.5, 0.0)).is_none());
    }

    #[test]
    fn printed_visible_roots_disagree() {
        let z = params(Tau::Visible, 0.3, 0.5, 0.1);
        let (p, q) = printed_visible_roots(&z).unwrap();
        let true_p = pseudo_eq_closed_form(&z).unwrap();
        let true_q = sigma_saddle_closed_form(&z).unwrap();
        assert!((q - true_p).abs() > 1e-3);
        assert!((p - true_q).abs() > 1e-1);
    }

    #[test]
    fn upper_return_map() {
        let z = params(Tau::Invisible, 0.2, 0.5, 0.0);
        assert!((return_map_upper(&z, 0.5).unwrap() + 0.1).abs() < 1e-15);
        assert_eq!(return_map_upper(&z, 0.2).unwrap(), 0.2);
        let z = params(Tau::Invisible, 0.0, 0.5, 0.1);
        assert_eq!(return_map_upper(&z, -0.5).unwrap(), 0.5);
        assert_eq!(
            return_map_upper(&params(Tau::Visible, 0.0, 0.5, 0.0), 0.1),
            Err(FamilyError::VisibleFoldNoReturn)
        );
    }

    #[test]
    fn affine_saddle_map() {
        let z = params(Tau::Invisible, 0.0, 0.5, 0.1);
        let i1 = z.lower_fold_x();
        assert!((saddle_map_affine(&z, i1 + 1e-12).unwrap() - i1).abs() < 1e-10);
        assert!((saddle_map_affine(&z, 0.5 - 1e-12).unwrap() + 0.5).abs() < 1e-10);
        assert!(matches!(
            saddle_map_affine(&z, 0.6),
            Err(FamilyError::DomainViolation { .. })
        ));

        let z = params(Tau::Invisible, 0.0, 0.5, 0.0);
        assert_eq!(saddle_map_affine(&z, 0.3).unwrap(), -0.3);
        assert_eq!(saddle_map_printed(&z, 0.3).unwrap(), 0.3);
    }

    #[test]
    fn relay_matches_family() {
        let preset = relay_preset(Tau::Invisible);
        assert_eq!(preset.relay.eval(Point::new(0.3, 0.2)), [1.0, -0.3]);
        assert_eq!(preset.relay.eval(Point::new(0.3, -0.2)), [0.2, -0.3]);
        assert_eq!(preset.system.lower.eval(Point::new(0.3, -0.2)), [0.2, -0.3]);
        let preset = relay_preset(Tau::Visible);
        assert_eq!(preset.relay.eval(Point::new(0.3, 0.2))[1], 0.3);
    }

    fn admissible() -> impl Strategy<Value = FoldSaddleParams> {
        (
            prop_oneof![Just(Tau::Invisible), Just(Tau::Visible)],
            -0.99f64..0.99,
            -0.99f64..0.99,
            -0.19f64..0.19,
        )
            .prop_map(|(tau, lambda, beta, mu)| FoldSaddleParams {
                tau,
                lambda,
                beta,
                mu,
            })
    }

    proptest! {
        #[test]
        fn saddle_is_exact_and_hyperbolic(p in admissible()) {
            let y = lower_field(&p);
            let l = landmarks(&p);
            prop_assert_eq!(y.eval(l.saddle), [0.0, 0.0]);
            prop_assert!((y.trace() - (p.alpha() + 1.0)).abs() < 1e-15);
            prop_assert!((y.determinant() - p.alpha()).abs() < 1e-15);
        }

        #[test]
        fn h_and_j_lie_on_separatrices(p in admissible()) {
            let y = lower_field(&p);
            let l = landmarks(&p);
            let [u, v] = y.eval(l.h);
            prop_assert!((u + v).abs() < 1e-15);
            let [u, v] = y.eval(l.j);
            prop_assert!((u - v).abs() < 1e-15);
        }

        #[test]
        fn upper_lie2_is_fold_slope(p in admissible(), x in -1.0f64..1.0) {
            let z = build_system(&p).unwrap();
            prop_assert_eq!(z.upper.lie2(Point::on_sigma(x)), p.tau.fold_slope());
        }

        #[test]
        fn upper_map_is_involution(p in admissible(), x in -1.0f64..1.0) {
            let p = FoldSaddleParams { tau: Tau::Invisible, ..p };
            let once = return_map_upper(&p, x).unwrap();
            prop_assert!((return_map_upper(&p, once).unwrap() - x).abs() < 1e-15);
        }

        #[test]
        fn closed_form_roots_zero_the_numerator(p in admissible()) {
            let z = build_system(&p).unwrap();
            let n = crate::sigma::direction_numerator(&z);
            for r in [pseudo_eq_closed_form(&p), sigma_saddle_closed_form(&p)].into_iter().flatten() {
                let scale = n.c2.abs() * r * r + n.c1.abs() * r.abs() + n.c0.abs();
                prop_assert!(n.eval(r).abs() <= 1e-12 * scale.max(1.0), "N({r}) = {}", n.eval(r));
            }
        }

        #[test]
        fn invisible_root_tends_to_limit(lambda in -0.99f64..0.99, beta in -0.99f64..0.99) {
            for mu in [1e-6, -1e-6] {
                let p = FoldSaddleParams { tau: Tau::Invisible, lambda, beta, mu };
                let limit = lambda * beta / (1.0 + beta);
                if limit.abs() < 0.99 {
                    if let Some(r) = pseudo_eq_closed_form(&p) {
                        prop_assert!((r - limit).abs() <= 1e-5);
                    }
                }
            }
        }
    }
}
