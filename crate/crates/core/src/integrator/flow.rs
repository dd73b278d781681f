use crate::field::{AffineField, Point, Side};

use super::rk::{dp_step, StepControl};
use super::{Arc, FlowError, IntegratorConfig};

/// First arrival of a smooth arc on the switching line.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaHit {
    pub point: Point,
    pub time: f64,
    pub arc: Arc,
}

pub(crate) fn step_control(cfg: &IntegratorConfig) -> StepControl {
    StepControl {
        rtol: cfg.rtol,
        atol: cfg.atol,
        h_max: cfg.h_max,
        h_min: 1e-14,
    }
}

/// Whether `field`, started at `(x, 0)`, enters the open half-plane of `side`.
/// A fold point qualifies when the field curves into that side.
pub(crate) fn departs(field: &AffineField, x: f64, side: Side, cfg: &IntegratorConfig) -> bool {
    let q = Point::on_sigma(x);
    let s = side.sign();
    let lie = field.lie(q);
    s * lie > cfg.sigma.tangency || (lie.abs() <= cfg.sigma.tangency && s * field.lie2(q) > 0.0)
}

/// Follows `field` from `p0` inside the closed half-plane of `side` until it
/// returns to `y = 0`. The hit is refined by bisection on the step length,
/// which leaves `|y|` far below `tol_event`, and then snapped onto the line.
pub fn flow_to_sigma(
    field: &AffineField,
    p0: Point,
    side: Side,
    cfg: &IntegratorConfig,
) -> Result<SigmaHit, FlowError> {
    let s = side.sign();
    let mut p = p0;
    if p.y.abs() <= cfg.tol_event {
        if !departs(field, p.x, side, cfg) {
            return Err(FlowError::NotDeparting { x: p.x });
        }
        p.y = 0.0;
    } else if s * p.y < 0.0 {
        return Err(FlowError::NotDeparting { x: p.x });
    }

    let f = |y: [f64; 2]| field.eval(Point::new(y[0], y[1]));
    let ctl = step_control(cfg);
    let equilibrium = field.equilibrium();
    let mut arc = Arc::start(side.into(), p, 0.0);
    let mut t = 0.0;
    let mut h = cfg.h_init;
    let mut inside = s * p.y > 0.0;

    loop {
        if t >= cfg.t_max {
            return Err(FlowError::TimeBudget(arc));
        }
        let Some((y_new, used, next)) = ctl.advance(&f, [p.x, p.y], h.min(cfg.t_max - t)) else {
            return Err(FlowError::StepUnderflow(arc));
        };
        let signed = s * y_new[1];
        if signed < 0.0 || (signed == 0.0 && inside) {
            if !inside {
                // started on the line and overshot into the wrong side: retry shorter
                h = used / 4.0;
                if h < 1e-13 {
                    return Err(FlowError::NotDeparting { x: p0.x });
                }
                continue;
            }
            let (theta, x_hit) = refine_crossing(&f, [p.x, p.y], used, s);
            let hit = Point::on_sigma(x_hit);
            arc.push(hit, t + theta);
            return Ok(SigmaHit {
                point: hit,
                time: t + theta,
                arc,
            });
        }

        p = Point::new(y_new[0], y_new[1]);
        t += used;
        h = next;
        arc.push(p, t);
        inside |= signed > 0.0;

        if !cfg.in_domain(p) {
            return Err(FlowError::LeftDomain(arc));
        }
        if let Some(e) = equilibrium {
            if p.distance(&e) <= cfg.saddle_radius {
                return Err(FlowError::SaddleApproach(arc));
            }
        }
    }
}

/// Bisection on the sub-step length `theta` in `(0, h)` for the sign change of
/// `y`, carried to full precision: near a fold `y` changes slowly and
/// `|y| <= tol` alone would leave a large error in `x`. Returns `theta` and
/// the abscissa at the refined point.
fn refine_crossing(
    f: &impl Fn([f64; 2]) -> [f64; 2],
    start: [f64; 2],
    h: f64,
    s: f64,
) -> (f64, f64) {
    let (mut lo, mut hi) = (0.0, h);
    let (mut theta, mut x) = (h, start[0]);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let (y, _) = dp_step(f, start, mid);
        theta = mid;
        x = y[0];
        if y[1] == 0.0 {
            break;
        }
        if s * y[1] > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * h {
            break;
        }
    }
    (theta, x)
}
