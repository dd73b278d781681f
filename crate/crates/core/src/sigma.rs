//! Classification of the switching line and the Filippov sliding dynamics on it.
//!
//! For a point `q = (x, 0)` write `X(q) = (d1, d2)` and `Y(q) = (e1, e2)`, so
//! `X.f = d2` and `Y.f = e2`. The sign pattern of `(d2, e2)` splits the line
//! into sewing, sliding and escaping intervals, delimited by the zeros of
//! `d2` and `e2` (folds). On sliding and escaping intervals the motion is
//! governed by the convex combination of `X` and `Y` tangent to the line,
//! whose abscissa component is the direction function
//! `H = (e2 d1 - d2 e1) / (e2 - d2)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{NonSmoothSystem, Point, Side};

/// Numerical thresholds used when classifying points of the switching line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaTolerances {
    /// Lie-derivative magnitudes at or below this are treated as zero.
    pub tangency: f64,
    /// Target accuracy of pseudo-equilibrium abscissae.
    pub root: f64,
    /// Two folds closer than this are reported as one coincident tangency.
    pub coincide: f64,
}

impl Default for SigmaTolerances {
    fn default() -> Self {
        Self {
            tangency: 1e-9,
            root: 1e-12,
            coincide: 1e-9,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SigmaError {
    #[error("Filippov combination is undefined at x = {x}: e2 - d2 = {denominator:e}")]
    DegenerateDenominator { x: f64, denominator: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FoldKind {
    Visible,
    Invisible,
    /// Vanishing second Lie derivative, e.g. a saddle sitting on the line.
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SigmaClass {
    Sewing,
    Sliding,
    Escaping,
    Tangency(Side, FoldKind),
    /// Both fields are tangent at the same point.
    DoubleTangency {
        upper: FoldKind,
        lower: FoldKind,
    },
}

impl SigmaClass {
    pub fn is_sliding_or_escaping(&self) -> bool {
        matches!(self, SigmaClass::Sliding | SigmaClass::Escaping)
    }
}

/// A zero of `X.f` and/or `Y.f` on the switching line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tangency {
    pub x: f64,
    pub upper: Option<FoldKind>,
    pub lower: Option<FoldKind>,
}

impl Tangency {
    pub fn is_coincident(&self) -> bool {
        self.upper.is_some() && self.lower.is_some()
    }

    pub fn multiplicity(&self) -> usize {
        usize::from(self.upper.is_some()) + usize::from(self.lower.is_some())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SlidingRegion {
    Sliding,
    Escaping,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PseudoStability {
    SigmaAttractor,
    SigmaRepeller,
    SigmaSaddle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PseudoEquilibrium {
    pub x: f64,
    pub region: SlidingRegion,
    pub stability: PseudoStability,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub lo: f64,
    pub hi: f64,
    pub class: SigmaClass,
}

impl Segment {
    pub fn contains(&self, x: f64) -> bool {
        self.lo < x && x < self.hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaPartition {
    pub interval: (f64, f64),
    pub segments: Vec<Segment>,
    pub tangencies: Vec<Tangency>,
    pub pseudo_equilibria: Vec<PseudoEquilibrium>,
}

impl SigmaPartition {
    pub fn segment_at(&self, x: f64) -> Option<&Segment> {
        self.segments.iter().find(|s| s.contains(x))
    }
}

/// `c0 + c1 x + c2 x^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadratic {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Quadratic {
    pub fn eval(&self, x: f64) -> f64 {
        (self.c2 * x + self.c1) * x + self.c0
    }

    pub fn derivative(&self, x: f64) -> f64 {
        2.0 * self.c2 * x + self.c1
    }

    /// Radius of a disc containing every real root (Cauchy bound).
    pub fn root_bound(&self) -> f64 {
        if self.c2 != 0.0 {
            1.0 + (self.c1 / self.c2).abs().max((self.c0 / self.c2).abs())
        } else if self.c1 != 0.0 {
            1.0 + (self.c0 / self.c1).abs()
        } else {
            1.0
        }
    }
}

fn upper_fold_kind(lie2: f64, tol: f64) -> FoldKind {
    if lie2 > tol {
        FoldKind::Visible
    } else if lie2 < -tol {
        FoldKind::Invisible
    } else {
        FoldKind::Degenerate
    }
}

fn lower_fold_kind(lie2: f64, tol: f64) -> FoldKind {
    // the lower field lives below the line: its visible arcs curve downward
    if lie2 < -tol {
        FoldKind::Visible
    } else if lie2 > tol {
        FoldKind::Invisible
    } else {
        FoldKind::Degenerate
    }
}

/// Fold type of `side`'s field at `(x, 0)`, ignoring whether it is tangent there.
pub fn fold_kind(system: &NonSmoothSystem, side: Side, x: f64, tol: &SigmaTolerances) -> FoldKind {
    let q = Point::on_sigma(x);
    match side {
        Side::Upper => upper_fold_kind(system.upper.lie2(q), tol.tangency),
        Side::Lower => lower_fold_kind(system.lower.lie2(q), tol.tangency),
    }
}

pub fn classify_sigma_point(system: &NonSmoothSystem, x: f64, tol: &SigmaTolerances) -> SigmaClass {
    let q = Point::on_sigma(x);
    let xf = system.upper.lie(q);
    let yf = system.lower.lie(q);
    let x_tangent = xf.abs() <= tol.tangency;
    let y_tangent = yf.abs() <= tol.tangency;
    match (x_tangent, y_tangent) {
        (true, true) => SigmaClass::DoubleTangency {
            upper: fold_kind(system, Side::Upper, x, tol),
            lower: fold_kind(system, Side::Lower, x, tol),
        },
        (true, false) => SigmaClass::Tangency(Side::Upper, fold_kind(system, Side::Upper, x, tol)),
        (false, true) => SigmaClass::Tangency(Side::Lower, fold_kind(system, Side::Lower, x, tol)),
        (false, false) => {
            if xf * yf > 0.0 {
                SigmaClass::Sewing
            } else if xf < 0.0 {
                SigmaClass::Sliding
            } else {
                SigmaClass::Escaping
            }
        }
    }
}

/// The Filippov vector `(Y.f X - X.f Y) / (Y.f - X.f)` at `(x, 0)`.
///
/// Meaningful on sliding and escaping points; on escaping points the same
/// expression equals `-(-Z)^s`. The second component is exactly zero.
pub fn sliding_vector(
    system: &NonSmoothSystem,
    x: f64,
    tol: &SigmaTolerances,
) -> Result<[f64; 2], SigmaError> {
    let q = Point::on_sigma(x);
    let [d1, d2] = system.upper.eval(q);
    let [e1, e2] = system.lower.eval(q);
    let denominator = e2 - d2;
    if denominator.abs() <= tol.tangency {
        return Err(SigmaError::DegenerateDenominator { x, denominator });
    }
    // the second component, (e2 d2 - d2 e2) / denominator, vanishes identically
    Ok([(e2 * d1 - d2 * e1) / denominator, 0.0])
}

/// Same vector obtained as `m - q`, where `m` is the point where the segment
/// from `q + X(q)` to `q + Y(q)` meets the line. Used to cross-check
/// [`sliding_vector`].
pub fn sliding_vector_geometric(
    system: &NonSmoothSystem,
    x: f64,
    tol: &SigmaTolerances,
) -> Result<[f64; 2], SigmaError> {
    let q = Point::on_sigma(x);
    let [d1, d2] = system.upper.eval(q);
    let [e1, e2] = system.lower.eval(q);
    let tip_x = Point::new(q.x + d1, q.y + d2);
    let tip_y = Point::new(q.x + e1, q.y + e2);
    let rise = tip_y.y - tip_x.y;
    if rise.abs() <= tol.tangency {
        return Err(SigmaError::DegenerateDenominator {
            x,
            denominator: rise,
        });
    }
    let s = -tip_x.y / rise;
    let m = Point::new(tip_x.x + s * (tip_y.x - tip_x.x), 0.0);
    Ok([m.x - q.x, m.y - q.y])
}

/// `H(x) = (e2 d1 - d2 e1) / (e2 - d2)`. Positive values move along the line
/// toward increasing `x`.
pub fn direction_function(
    system: &NonSmoothSystem,
    x: f64,
    tol: &SigmaTolerances,
) -> Result<f64, SigmaError> {
    let q = Point::on_sigma(x);
    let [d1, d2] = system.upper.eval(q);
    let [e1, e2] = system.lower.eval(q);
    let denominator = e2 - d2;
    if denominator.abs() <= tol.tangency {
        return Err(SigmaError::DegenerateDenominator { x, denominator });
    }
    Ok((e2 * d1 - d2 * e1) / denominator)
}

/// Numerator `e2 d1 - d2 e1` of the direction function as a polynomial in `x`.
/// All four components are affine in `x` on the line, so it is at most quadratic.
pub fn direction_numerator(system: &NonSmoothSystem) -> Quadratic {
    let (u, l) = (&system.upper, &system.lower);
    // d1 = p1 x + p0, d2 = q1 x + q0, e1 = r1 x + r0, e2 = s1 x + s0
    let (p1, p0) = (u.a11, u.c1);
    let (q1, q0) = (u.a21, u.c2);
    let (r1, r0) = (l.a11, l.c1);
    let (s1, s0) = (l.a21, l.c2);
    Quadratic {
        c2: s1 * p1 - q1 * r1,
        c1: s1 * p0 + s0 * p1 - q1 * r0 - q0 * r1,
        c0: s0 * p0 - q0 * r0,
    }
}

fn affine_zero(slope: f64, offset: f64) -> Option<f64> {
    if slope == 0.0 {
        return None;
    }
    let x = -offset / slope;
    x.is_finite().then_some(x)
}

/// An interval of the line that contains every fold, every real root of the
/// direction numerator and `[-1, 1]`.
pub fn sigma_extent(system: &NonSmoothSystem) -> (f64, f64) {
    let mut radius = direction_numerator(system).root_bound().max(1.0);
    for zero in [
        affine_zero(system.upper.a21, system.upper.c2),
        affine_zero(system.lower.a21, system.lower.c2),
    ]
    .into_iter()
    .flatten()
    {
        radius = radius.max(zero.abs());
    }
    let radius = radius + 1.0;
    (-radius, radius)
}

/// All folds of either field inside `[lo, hi]`, in increasing order.
///
/// Affine fields have at most one fold each; they are located in closed
/// form. Folds closer than `tol.coincide` are merged into one entry.
pub fn find_tangencies(
    system: &NonSmoothSystem,
    interval: (f64, f64),
    tol: &SigmaTolerances,
) -> Vec<Tangency> {
    let (lo, hi) = interval;
    let inside = |x: &f64| lo <= *x && *x <= hi;
    let upper = affine_zero(system.upper.a21, system.upper.c2).filter(inside);
    let lower = affine_zero(system.lower.a21, system.lower.c2).filter(inside);
    let upper_tangency = |x: f64| Tangency {
        x,
        upper: Some(fold_kind(system, Side::Upper, x, tol)),
        lower: None,
    };
    let lower_tangency = |x: f64| Tangency {
        x,
        upper: None,
        lower: Some(fold_kind(system, Side::Lower, x, tol)),
    };
    match (upper, lower) {
        (None, None) => vec![],
        (Some(u), None) => vec![upper_tangency(u)],
        (None, Some(l)) => vec![lower_tangency(l)],
        (Some(u), Some(l)) if (u - l).abs() <= tol.coincide => vec![Tangency {
            x: u,
            upper: Some(fold_kind(system, Side::Upper, u, tol)),
            lower: Some(fold_kind(system, Side::Lower, l, tol)),
        }],
        (Some(u), Some(l)) if u < l => vec![upper_tangency(u), lower_tangency(l)],
        (Some(u), Some(l)) => vec![lower_tangency(l), upper_tangency(u)],
    }
}

/// Bisects `f` on `[a, b]` (with `fa`, `fb` of opposite signs) down to
/// adjacent floating-point numbers.
fn bisect_to_precision(
    f: impl Fn(f64) -> f64,
    mut a: f64,
    mut b: f64,
    mut fa: f64,
    mut fb: f64,
) -> f64 {
    loop {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
            fb = fm;
        }
    }
    if fa.abs() <= fb.abs() {
        a
    } else {
        b
    }
}

fn pseudo_equilibria_in(
    system: &NonSmoothSystem,
    segment: &Segment,
    numerator: &Quadratic,
    tol: &SigmaTolerances,
) -> Vec<PseudoEquilibrium> {
    let region = match segment.class {
        SigmaClass::Sliding => SlidingRegion::Sliding,
        SigmaClass::Escaping => SlidingRegion::Escaping,
        _ => return vec![],
    };
    let (a, b) = (segment.lo, segment.hi);
    // split at the vertex so each piece is monotone and holds at most one root
    let mut cuts = vec![a];
    if numerator.c2 != 0.0 {
        let vertex = -numerator.c1 / (2.0 * numerator.c2);
        if a < vertex && vertex < b {
            cuts.push(vertex);
        }
    }
    cuts.push(b);

    let mut roots = Vec::new();
    for piece in cuts.windows(2) {
        let (u, v) = (piece[0], piece[1]);
        let (nu, nv) = (numerator.eval(u), numerator.eval(v));
        if nu == 0.0 || nv == 0.0 || (nu > 0.0) == (nv > 0.0) {
            continue;
        }
        let root = bisect_to_precision(|x| numerator.eval(x), u, v, nu, nv);
        if root - a <= tol.coincide || b - root <= tol.coincide {
            // endpoints are folds, never pseudo-equilibria
            continue;
        }
        roots.push(root);
    }

    roots
        .into_iter()
        .filter_map(|x| {
            let stability = pseudo_stability(system, x, region, numerator, tol)?;
            Some(PseudoEquilibrium {
                x,
                region,
                stability,
            })
        })
        .collect()
}

fn pseudo_stability(
    system: &NonSmoothSystem,
    x: f64,
    region: SlidingRegion,
    numerator: &Quadratic,
    tol: &SigmaTolerances,
) -> Option<PseudoStability> {
    let probe = 10.0 * tol.root;
    let left = direction_function(system, x - probe, tol).ok()?;
    let right = direction_function(system, x + probe, tol).ok()?;
    let attracting = if left > 0.0 && right < 0.0 {
        true
    } else if left < 0.0 && right > 0.0 {
        false
    } else {
        // probe lost in round-off: fall back to the sign of H' = N'/D at the root
        let q = Point::on_sigma(x);
        let denominator = system.lower.lie(q) - system.upper.lie(q);
        let slope = numerator.derivative(x) / denominator;
        if slope == 0.0 || !slope.is_finite() {
            return None;
        }
        slope < 0.0
    };
    Some(match (region, attracting) {
        (SlidingRegion::Sliding, true) => PseudoStability::SigmaAttractor,
        (SlidingRegion::Escaping, false) => PseudoStability::SigmaRepeller,
        _ => PseudoStability::SigmaSaddle,
    })
}

pub fn find_pseudo_equilibria(
    system: &NonSmoothSystem,
    interval: (f64, f64),
    tol: &SigmaTolerances,
) -> Vec<PseudoEquilibrium> {
    partition_sigma(system, interval, tol).pseudo_equilibria
}

/// Splits `interval` at the folds, classifies each piece at its midpoint and
/// locates the pseudo-equilibria of the sliding and escaping pieces.
pub fn partition_sigma(
    system: &NonSmoothSystem,
    interval: (f64, f64),
    tol: &SigmaTolerances,
) -> SigmaPartition {
    let (lo, hi) = interval;
    let tangencies = find_tangencies(system, interval, tol);
    if lo >= hi {
        return SigmaPartition {
            interval,
            segments: vec![],
            tangencies,
            pseudo_equilibria: vec![],
        };
    }

    let mut cuts = vec![lo];
    cuts.extend(tangencies.iter().map(|t| t.x).filter(|&x| lo < x && x < hi));
    cuts.push(hi);

    let segments: Vec<Segment> = cuts
        .windows(2)
        .filter(|w| w[0] < w[1])
        .map(|w| Segment {
            lo: w[0],
            hi: w[1],
            class: classify_sigma_point(system, 0.5 * (w[0] + w[1]), tol),
        })
        .collect();

    let numerator = direction_numerator(system);
    let pseudo_equilibria = segments
        .iter()
        .flat_map(|s| pseudo_equilibria_in(system, s, &numerator, tol))
        .collect();

    SigmaPartition {
        interval,
        segments,
        tangencies,
        pseudo_equilibria,
    }
}
