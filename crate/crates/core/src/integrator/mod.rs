//! Numerical trajectories of Filippov systems: smooth arcs up to the
//! switching line, hybrid trajectories with sliding, first-return maps and
//! the cycle detectors built on them.

mod flow;
mod hybrid;
mod returns;
mod rk;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{Point, Side};
use crate::sigma::SigmaTolerances;

pub use flow::{flow_to_sigma, SigmaHit};
pub use hybrid::{integrate, write_trajectory_csv, Termination, Trajectory};
pub use returns::{
    detect_separatrix_connection, detect_sigma_center, find_canard_cycles, first_return,
    lower_transition, return_multiplier, upper_transition, CanardCycle, CanardKind, CycleStability,
    ReturnError, ReturnStage,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    /// Largest step; keeps a single step from skipping over a double crossing.
    pub h_max: f64,
    pub h_init: f64,
    pub t_max: f64,
    /// Accuracy of refined switching-line hits, as `|y|`.
    pub tol_event: f64,
    /// Half-width of the square domain `[-r, r]^2`.
    pub domain: f64,
    /// Integration stops this close to an equilibrium of the active field.
    pub saddle_radius: f64,
    /// Central finite-difference step for return-map multipliers.
    pub fd_step: f64,
    /// `|multiplier - 1|` at or below this counts as non-hyperbolic.
    pub tol_mult: f64,
    /// Distance at which a sliding trajectory counts as converged to a pseudo-equilibrium.
    pub pe_capture: f64,
    /// Distance at which a crossing counts as a return to the first crossing.
    pub closed_tol: f64,
    pub sigma: SigmaTolerances,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            h_max: 0.05,
            h_init: 1e-3,
            t_max: 100.0,
            tol_event: 1e-12,
            domain: 1.0,
            saddle_radius: 1e-6,
            fd_step: 1e-6,
            tol_mult: 1e-4,
            pe_capture: 1e-9,
            closed_tol: 1e-7,
            sigma: SigmaTolerances::default(),
        }
    }
}

impl IntegratorConfig {
    pub fn in_domain(&self, p: Point) -> bool {
        p.x.abs() <= self.domain && p.y.abs() <= self.domain
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ArcSide {
    Upper,
    Lower,
    Sliding,
}

impl ArcSide {
    pub fn code(self) -> char {
        match self {
            ArcSide::Upper => 'U',
            ArcSide::Lower => 'L',
            ArcSide::Sliding => 'S',
        }
    }
}

impl From<Side> for ArcSide {
    fn from(side: Side) -> Self {
        match side {
            Side::Upper => ArcSide::Upper,
            Side::Lower => ArcSide::Lower,
        }
    }
}

/// A piece of trajectory governed by one field, sampled at accepted steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub side: ArcSide,
    pub samples: Vec<Point>,
    pub times: Vec<f64>,
}

impl Arc {
    pub(crate) fn start(side: ArcSide, p: Point, t: f64) -> Self {
        Self {
            side,
            samples: vec![p],
            times: vec![t],
        }
    }

    pub(crate) fn push(&mut self, p: Point, t: f64) {
        self.samples.push(p);
        self.times.push(t);
    }

    pub fn t_span(&self) -> (f64, f64) {
        (
            self.times.first().copied().unwrap_or(0.0),
            self.times.last().copied().unwrap_or(0.0),
        )
    }

    pub fn first(&self) -> Point {
        self.samples[0]
    }

    pub fn last(&self) -> Point {
        *self.samples.last().expect("arcs are never empty")
    }
}

/// Why a smooth arc stopped before reaching the switching line. Each variant
/// carries the arc computed so far.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlowError {
    #[error("arc left the domain")]
    LeftDomain(Arc),
    #[error("time budget exhausted")]
    TimeBudget(Arc),
    #[error("arc reached the neighborhood of an equilibrium")]
    SaddleApproach(Arc),
    #[error("field does not leave the switching line into the requested side at x = {x}")]
    NotDeparting { x: f64 },
    #[error("step size underflow")]
    StepUnderflow(Arc),
}

impl FlowError {
    pub fn partial_arc(&self) -> Option<&Arc> {
        match self {
            FlowError::LeftDomain(a)
            | FlowError::TimeBudget(a)
            | FlowError::SaddleApproach(a)
            | FlowError::StepUnderflow(a) => Some(a),
            FlowError::NotDeparting { .. } => None,
        }
    }
}
