//! Cross-checks of closed forms against numerics.
//!
//! Items are PASS or FAIL against a tolerance. Where a printed formula is
//! known to disagree with the flow, the item is DISCREPANCY instead: it is
//! recorded with its residual but never counts as a failure.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::family::{
    build_system, printed_visible_roots, pseudo_eq_closed_form, return_map_upper,
    saddle_map_affine, saddle_map_printed, sigma_saddle_closed_form, FoldSaddleParams, Tau,
};
use crate::integrator::{lower_transition, upper_transition};
use crate::sigma::{direction_function, direction_numerator, Quadratic};

use super::case::event_thresholds;
use super::AtlasConfig;

const ROOT_TOL: f64 = 1e-9;
const MAP_TOL: f64 = 1e-8;
const CONSTANT_H_TOL: f64 = 1e-12;
const ROOT_SCAN: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Pass,
    Fail,
    Discrepancy,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Discrepancy => "DISCREPANCY",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportItem {
    pub check: String,
    pub params: FoldSaddleParams,
    pub status: Status,
    pub residual: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl fmt::Display for ReportItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = &self.params;
        write!(
            f,
            "{:<11} {:<28} tau={} mu={} lambda={} beta={} residual={:.3e} tol={:.0e}",
            self.status.to_string(),
            self.check,
            p.tau,
            p.mu,
            p.lambda,
            p.beta,
            self.residual,
            self.tolerance
        )?;
        if !self.detail.is_empty() {
            write!(f, "  {}", self.detail)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub items: Vec<ReportItem>,
}

impl Report {
    pub fn has_failures(&self) -> bool {
        self.items.iter().any(|i| i.status == Status::Fail)
    }

    pub fn find(&self, check: &str) -> Option<&ReportItem> {
        self.items.iter().find(|i| i.check == check)
    }

    pub fn extend(&mut self, other: Report) {
        self.items.extend(other.items);
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for item in &self.items {
            writeln!(f, "{item}")?;
        }
        Ok(())
    }
}

struct Builder<'a> {
    params: &'a FoldSaddleParams,
    items: Vec<ReportItem>,
}

impl Builder<'_> {
    fn push(&mut self, check: &str, status: Status, residual: f64, tolerance: f64, detail: String) {
        self.items.push(ReportItem {
            check: check.to_string(),
            params: *self.params,
            status,
            residual,
            tolerance,
            detail,
        });
    }

    /// PASS or FAIL by tolerance.
    fn compare(&mut self, check: &str, residual: f64, tolerance: f64, detail: String) {
        let status = if residual <= tolerance {
            Status::Pass
        } else {
            Status::Fail
        };
        self.push(check, status, residual, tolerance, detail);
    }

    /// PASS when a printed formula agrees, DISCREPANCY otherwise.
    fn printed(&mut self, check: &str, residual: f64, tolerance: f64, detail: String) {
        let status = if residual <= tolerance {
            Status::Pass
        } else {
            Status::Discrepancy
        };
        self.push(check, status, residual, tolerance, detail);
    }
}

/// Real zeros of `q` in `(-1, 1)` by sign scan and bisection.
fn bisected_roots(q: &Quadratic) -> Vec<f64> {
    let xs: Vec<f64> = (0..=ROOT_SCAN)
        .map(|k| -1.0 + 2.0 * k as f64 / ROOT_SCAN as f64)
        .collect();
    let mut roots = Vec::new();
    for w in xs.windows(2) {
        let (mut lo, mut hi) = (w[0], w[1]);
        let f_lo = q.eval(lo);
        if f_lo == 0.0 {
            roots.push(lo);
            continue;
        }
        if (f_lo > 0.0) == (q.eval(hi) > 0.0) {
            continue;
        }
        loop {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if (q.eval(mid) > 0.0) == (f_lo > 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        roots.push(0.5 * (lo + hi));
    }
    roots
}

fn nearest(roots: &[f64], x: f64) -> Option<f64> {
    roots
        .iter()
        .copied()
        .min_by(|a, b| (a - x).abs().total_cmp(&(b - x).abs()))
}

fn check_pseudo_equilibria(b: &mut Builder, numerator: &Quadratic) {
    let Some(p) = pseudo_eq_closed_form(b.params) else {
        return;
    };
    let roots = bisected_roots(numerator);
    match nearest(&roots, p) {
        Some(r) => b.compare(
            "pseudo-eq closed form",
            (p - r).abs(),
            ROOT_TOL,
            format!("closed form {p:.12}, bisection {r:.12}"),
        ),
        None => b.compare(
            "pseudo-eq closed form",
            f64::INFINITY,
            ROOT_TOL,
            format!("closed form {p:.12}, no sign change of the numerator"),
        ),
    }
}

fn check_printed_visible_roots(b: &mut Builder, numerator: &Quadratic) {
    let (Some(p), Some(q)) = (
        pseudo_eq_closed_form(b.params),
        sigma_saddle_closed_form(b.params),
    ) else {
        return;
    };
    let Some((printed_p, printed_q)) = printed_visible_roots(b.params) else {
        return;
    };
    let residual = (printed_p - p).abs().max((printed_q - q).abs());
    let off_root = numerator.eval(printed_p).abs();
    b.printed(
        "printed visible-fold roots",
        residual,
        ROOT_TOL,
        format!(
            "printed p={printed_p:.6} q={printed_q:.6}, flow roots p={p:.6} q={q:.6}, |N(printed p)|={off_root:.3e}"
        ),
    );
}

fn check_upper_map(b: &mut Builder, cfg: &AtlasConfig) {
    if b.params.tau != Tau::Invisible {
        return;
    }
    let system = build_system(b.params).expect("validated");
    let lambda = b.params.lambda;
    let mut worst = 0.0_f64;
    let mut used = 0;
    for offset in [0.05, 0.1, 0.2, 0.3] {
        let x = lambda - offset;
        if (lambda + offset).abs() >= 0.95 || x.abs() >= 0.95 {
            continue;
        }
        let analytic = return_map_upper(b.params, x).expect("invisible fold");
        match upper_transition(&system, x, &cfg.flow) {
            Ok(numeric) => worst = worst.max((numeric - analytic).abs()),
            Err(_) => worst = f64::INFINITY,
        }
        used += 1;
    }
    if used > 0 {
        b.compare(
            "upper return map",
            worst,
            MAP_TOL,
            format!("max over {used} points of |numeric - (2 lambda - x)|"),
        );
    }
}

/// Interior points of `(i1, beta)` at `mu = 0`, where `i1 = 0`.
fn lower_map_points(beta: f64) -> Vec<f64> {
    (1..=5).map(|k| beta * k as f64 / 6.0).collect()
}

fn check_lower_maps(b: &mut Builder, cfg: &AtlasConfig) {
    if b.params.beta <= 0.0 {
        return;
    }
    let companion = FoldSaddleParams {
        mu: 0.0,
        ..*b.params
    };
    let system = build_system(&companion).expect("validated");
    let mut affine = 0.0_f64;
    let mut printed = 0.0_f64;
    for x in lower_map_points(companion.beta) {
        let numeric = lower_transition(&system, x, &cfg.flow).unwrap_or(f64::NAN);
        let a = saddle_map_affine(&companion, x).expect("inside the domain");
        let p = saddle_map_printed(&companion, x).expect("inside the domain");
        affine = affine.max((numeric - a).abs());
        printed = printed.max((numeric - p).abs());
    }
    let affine = if affine.is_nan() {
        f64::INFINITY
    } else {
        affine
    };
    b.compare(
        "lower saddle map (mu=0)",
        affine,
        MAP_TOL,
        "numeric lower transition vs x -> -x".to_string(),
    );
    b.printed(
        "printed lower saddle map",
        printed,
        MAP_TOL,
        "printed map is the identity at mu=0, the flow gives -x".to_string(),
    );
}

fn check_constant_h(b: &mut Builder, cfg: &AtlasConfig) {
    let p = b.params;
    if p.tau != Tau::Visible || p.mu.abs() > cfg.tol_eq || p.lambda.abs() > cfg.tol_eq {
        return;
    }
    let system = build_system(p).expect("validated");
    let expected = (1.0 - p.beta) / 2.0;
    let mut worst = 0.0_f64;
    for k in 0..200 {
        let x = -0.995 + 1.99 * k as f64 / 199.0;
        if x.abs() < 1e-3 {
            continue;
        }
        if let Ok(h) = direction_function(&system, x, &cfg.flow.sigma) {
            worst = worst.max((h - expected).abs());
        }
    }
    b.compare(
        "constant direction function",
        worst,
        CONSTANT_H_TOL,
        format!("H = {expected} off the origin"),
    );
}

/// The events at which the upper arc from `h` and the one ending at `j` meet
/// the lower fold, checked on the flow and against the printed values.
fn check_events(b: &mut Builder, cfg: &AtlasConfig) {
    let p = *b.params;
    if p.tau != Tau::Invisible || p.beta <= 0.0 {
        return;
    }
    let alpha = p.alpha();
    let events = event_thresholds(&p, cfg.tol_eq);
    let (from_h, from_j) = (events[1], events[events.len() - 2]);
    let i1 = p.lower_fold_x();

    let at = |lambda: f64| build_system(&FoldSaddleParams { lambda, ..p }).expect("validated");
    let landing_h = upper_transition(&at(from_h), -p.beta, &cfg.flow);
    let landing_i = upper_transition(&at(from_j), i1, &cfg.flow);
    let residual = match (landing_h, landing_i) {
        (Ok(a), Ok(c)) => (a - i1).abs().max((c - p.beta).abs()),
        _ => f64::INFINITY,
    };
    b.compare(
        "event thresholds on the flow",
        residual,
        MAP_TOL,
        format!(
            "lambda={from_h:.6}: arc from h lands on i; lambda={from_j:.6}: arc from i lands on j"
        ),
    );

    let printed_h = -p.beta / (1.0 - alpha);
    let printed_j = alpha * p.beta / (1.0 - alpha);
    let residual = (printed_h - from_h).abs().max((printed_j - from_j).abs());
    b.printed(
        "printed event thresholds",
        residual,
        cfg.tol_eq,
        format!("printed {printed_h:.6}, {printed_j:.6}; from the events {from_h:.6}, {from_j:.6}"),
    );
}

/// Runs every check that applies to `params`.
pub fn verify_params(params: &FoldSaddleParams, cfg: &AtlasConfig) -> Report {
    let system = build_system(params).expect("validated parameters");
    let numerator = direction_numerator(&system);
    let mut b = Builder {
        params,
        items: Vec::new(),
    };
    check_pseudo_equilibria(&mut b, &numerator);
    check_printed_visible_roots(&mut b, &numerator);
    check_upper_map(&mut b, cfg);
    check_lower_maps(&mut b, cfg);
    check_constant_h(&mut b, cfg);
    check_events(&mut b, cfg);
    Report { items: b.items }
}

/// The fixed battery behind `verify --all`.
pub fn battery() -> Vec<FoldSaddleParams> {
    let raw = [
        (Tau::Invisible, 0.1, -0.3, 0.5),
        (Tau::Invisible, 0.0, -0.3, 0.5),
        (Tau::Invisible, 0.0, 0.0, 0.5),
        (Tau::Invisible, -0.1, 0.2, 0.4),
        (Tau::Invisible, 0.1, 0.3, -0.4),
        (Tau::Invisible, -0.1, -0.2, 0.0),
        (Tau::Visible, 0.0, 0.0, 0.5),
        (Tau::Visible, 0.1, 0.2, -0.3),
        (Tau::Visible, -0.1, -0.2, 0.4),
        (Tau::Visible, 0.0, 0.4, 0.6),
        (Tau::Visible, 0.15, 0.0, 0.5),
    ];
    raw.iter()
        .map(|&(tau, mu, lambda, beta)| {
            FoldSaddleParams::new(tau, lambda, beta, mu).expect("battery inside the range")
        })
        .collect()
}

pub fn verify_all(cfg: &AtlasConfig) -> Report {
    let mut report = Report::default();
    for p in battery() {
        report.extend(verify_params(&p, cfg));
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(tau: Tau, mu: f64, lambda: f64, beta: f64) -> Report {
        let p = FoldSaddleParams::new(tau, lambda, beta, mu).unwrap();
        verify_params(&p, &AtlasConfig::default())
    }

    #[test]
    fn pseudo_eq_item_passes() {
        let r = report(Tau::Invisible, 0.1, -0.3, 0.5);
        let item = r.find("pseudo-eq closed form").unwrap();
        assert_eq!(item.status, Status::Pass);
        assert!(item.residual <= 1e-9);
    }

    #[test]
    fn constant_h_item() {
        let r = report(Tau::Visible, 0.0, 0.0, 0.5);
        let item = r.find("constant direction function").unwrap();
        assert_eq!(item.status, Status::Pass, "{item}");
        assert!(!r.has_failures(), "{r}");
    }

    #[test]
    fn printed_lower_map_is_a_discrepancy() {
        let r = report(Tau::Invisible, 0.0, 0.0, 0.5);
        assert_eq!(
            r.find("printed lower saddle map").unwrap().status,
            Status::Discrepancy
        );
        assert_eq!(
            r.find("lower saddle map (mu=0)").unwrap().status,
            Status::Pass
        );
        assert_eq!(
            r.find("printed event thresholds").unwrap().status,
            Status::Discrepancy
        );
        assert_eq!(
            r.find("event thresholds on the flow").unwrap().status,
            Status::Pass
        );
        assert!(!r.has_failures(), "{r}");
    }

    #[test]
    fn printed_visible_roots_are_swapped() {
        let r = report(Tau::Visible, 0.1, 0.2, -0.3);
        let item = r.find("printed visible-fold roots").unwrap();
        assert_eq!(item.status, Status::Discrepancy);
        assert_eq!(
            r.find("pseudo-eq closed form").unwrap().status,
            Status::Pass
        );
    }

    #[test]
    fn battery_has_no_failures() {
        let r = verify_all(&AtlasConfig::default());
        assert!(!r.has_failures(), "{r}");
        assert!(r.items.iter().any(|i| i.status == Status::Discrepancy));
    }

    #[test]
    fn bisection_finds_both_roots() {
        let q = Quadratic {
            c0: -0.06,
            c1: -0.1,
            c2: 1.0,
        };
        let roots = bisected_roots(&q);
        assert_eq!(roots.len(), 2);
        assert!((roots[0] + 0.2).abs() < 1e-15);
        assert!((roots[1] - 0.3).abs() < 1e-15);
    }
}
