use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::family::{build_system, FoldSaddleParams, Tau};
use crate::field::{NonSmoothSystem, Point, Side};
use crate::sigma::{classify_sigma_point, FoldKind, SigmaClass};

use super::flow::flow_to_sigma;
use super::{FlowError, IntegratorConfig};

/// Number of scan points used to bracket fixed points of the return map.
const CANARD_SCAN: usize = 64;

/// Sign changes of `eta(x) - x` smaller than this on both sides are treated
/// as integration noise (a return map equal to the identity).
const RETURN_NOISE: f64 = 1e-8;

const CENTER_SAMPLES: usize = 10;
const CENTER_TOL: f64 = 1e-6;
const SEPARATRIX_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReturnStage {
    Upper,
    Lower,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReturnError {
    #[error("no return: {stage:?} arc failed ({reason})")]
    NoReturn {
        stage: ReturnStage,
        reason: FlowError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CanardKind {
    /// Meets the switching line only at sewing points.
    I,
    /// The switching line itself.
    II,
    /// Passes through a visible fold.
    III,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CycleStability {
    Attracting,
    Repelling,
    Neutral,
}

impl CycleStability {
    pub fn from_multiplier(m: f64, tol: f64) -> Self {
        if m > 1.0 + tol {
            CycleStability::Repelling
        } else if m < 1.0 - tol {
            CycleStability::Attracting
        } else {
            CycleStability::Neutral
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanardCycle {
    pub kind: CanardKind,
    /// Where the cycle leaves the line upward.
    pub anchor: f64,
    pub multiplier: f64,
    pub stability: CycleStability,
    pub hyperbolic: bool,
}

fn transition(
    system: &NonSmoothSystem,
    x: f64,
    side: Side,
    cfg: &IntegratorConfig,
) -> Result<f64, ReturnError> {
    let stage = match side {
        Side::Upper => ReturnStage::Upper,
        Side::Lower => ReturnStage::Lower,
    };
    flow_to_sigma(system.field(side), Point::on_sigma(x), side, cfg)
        .map(|hit| hit.point.x)
        .map_err(|reason| ReturnError::NoReturn { stage, reason })
}

/// Where the upper arc leaving `(x, 0)` comes back to the line.
pub fn upper_transition(
    system: &NonSmoothSystem,
    x: f64,
    cfg: &IntegratorConfig,
) -> Result<f64, ReturnError> {
    transition(system, x, Side::Upper, cfg)
}

/// Where the lower arc leaving `(x, 0)` comes back to the line.
pub fn lower_transition(
    system: &NonSmoothSystem,
    x: f64,
    cfg: &IntegratorConfig,
) -> Result<f64, ReturnError> {
    transition(system, x, Side::Lower, cfg)
}

/// `eta(x0)`: an upper arc from `(x0, 0)` followed by a lower arc.
pub fn first_return(
    system: &NonSmoothSystem,
    x0: f64,
    cfg: &IntegratorConfig,
) -> Result<f64, ReturnError> {
    let x1 = upper_transition(system, x0, cfg)?;
    lower_transition(system, x1, cfg)
}

/// `eta'(x0)` by a central difference.
pub fn return_multiplier(
    system: &NonSmoothSystem,
    x0: f64,
    cfg: &IntegratorConfig,
) -> Result<f64, ReturnError> {
    let step = cfg.fd_step;
    let plus = first_return(system, x0 + step, cfg)?;
    let minus = first_return(system, x0 - step, cfg)?;
    Ok((plus - minus) / (2.0 * step))
}

fn crossing_kind(system: &NonSmoothSystem, xs: &[f64], cfg: &IntegratorConfig) -> CanardKind {
    let visible_fold = xs.iter().any(|&x| {
        matches!(
            classify_sigma_point(system, x, &cfg.sigma),
            SigmaClass::Tangency(_, FoldKind::Visible)
                | SigmaClass::DoubleTangency {
                    upper: FoldKind::Visible,
                    ..
                }
                | SigmaClass::DoubleTangency {
                    lower: FoldKind::Visible,
                    ..
                }
        )
    });
    if visible_fold {
        CanardKind::III
    } else {
        CanardKind::I
    }
}

/// Fixed points of the first-return map inside `bracket`.
///
/// `eta(x) - x` is sampled at 64 points; each sign change is refined by
/// bisection and classified by its multiplier.
pub fn find_canard_cycles(
    system: &NonSmoothSystem,
    bracket: (f64, f64),
    cfg: &IntegratorConfig,
) -> Vec<CanardCycle> {
    let (a, b) = bracket;
    if a.partial_cmp(&b) != Some(Ordering::Less) {
        return vec![];
    }
    let gap = |x: f64| first_return(system, x, cfg).ok().map(|eta| eta - x);
    let samples: Vec<(f64, f64)> = (0..CANARD_SCAN)
        .filter_map(|k| {
            let x = a + (b - a) * k as f64 / (CANARD_SCAN - 1) as f64;
            gap(x).map(|g| (x, g))
        })
        .collect();

    let mut roots = Vec::new();
    for w in samples.windows(2) {
        let ((mut lo, mut g_lo), (mut hi, g_hi)) = (w[0], w[1]);
        if g_lo.abs().max(g_hi.abs()) <= RETURN_NOISE {
            continue;
        }
        if g_lo == 0.0 {
            roots.push(lo);
            continue;
        }
        if (g_lo > 0.0) == (g_hi > 0.0) {
            continue;
        }
        while hi - lo > cfg.sigma.root {
            let mid = 0.5 * (lo + hi);
            let Some(g_mid) = gap(mid) else { break };
            if (g_mid > 0.0) == (g_lo > 0.0) {
                lo = mid;
                g_lo = g_mid;
            } else {
                hi = mid;
            }
        }
        roots.push(0.5 * (lo + hi));
    }

    roots
        .into_iter()
        .filter_map(|anchor| {
            let multiplier = return_multiplier(system, anchor, cfg).ok()?;
            let landing = upper_transition(system, anchor, cfg).ok()?;
            let stability = CycleStability::from_multiplier(multiplier, cfg.tol_mult);
            Some(CanardCycle {
                kind: crossing_kind(system, &[anchor, landing], cfg),
                anchor,
                multiplier,
                stability,
                hyperbolic: (multiplier - 1.0).abs() > cfg.tol_mult,
            })
        })
        .collect()
}

/// True when the first-return map is the identity (to 1e-6) at ten equispaced
/// interior points of `interval`.
pub fn detect_sigma_center(
    system: &NonSmoothSystem,
    interval: (f64, f64),
    cfg: &IntegratorConfig,
) -> bool {
    let (a, b) = interval;
    if a.partial_cmp(&b) != Some(Ordering::Less) {
        return false;
    }
    (1..=CENTER_SAMPLES).all(|k| {
        let x = a + (b - a) * k as f64 / (CENTER_SAMPLES + 1) as f64;
        matches!(first_return(system, x, cfg), Ok(eta) if (eta - x).abs() <= CENTER_TOL)
    })
}

/// True when the upper arc from `h = (-beta, 0)` lands on `j = (beta, 0)`,
/// closing a loop with the two lower separatrices of the saddle.
pub fn detect_separatrix_connection(params: &FoldSaddleParams, cfg: &IntegratorConfig) -> bool {
    if params.tau != Tau::Invisible || params.beta <= 0.0 {
        return false;
    }
    let Ok(system) = build_system(params) else {
        return false;
    };
    matches!(
        upper_transition(&system, -params.beta, cfg),
        Ok(x) if (x - params.beta).abs() <= SEPARATRIX_TOL
    )
}
