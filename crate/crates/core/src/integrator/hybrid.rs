use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::field::{NonSmoothSystem, Point, Side};
use crate::sigma::{
    classify_sigma_point, direction_function, find_tangencies, partition_sigma, sigma_extent,
    PseudoStability, SigmaClass, SlidingRegion,
};

use super::flow::{departs, flow_to_sigma, step_control};
use super::rk::dp_step;
use super::{Arc, ArcSide, FlowError, IntegratorConfig};

/// Upper bound on arcs per trajectory; guards against chattering loops.
const MAX_ARCS: usize = 10_000;

/// Offset used to step off a fold onto the neighbouring interval.
const FOLD_NUDGE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Termination {
    LeftDomain,
    TimeBudget,
    PseudoEqConvergence(f64),
    /// Returned to its first sewing crossing; carries the period.
    ClosedOrbit(f64),
    SaddleApproach,
    /// Reached a point (such as a double fold) where the forward motion is not determined.
    TangencyStop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub arcs: Vec<Arc>,
    pub termination: Termination,
    /// Started inside an escaping interval and followed the escaping field.
    pub escaping_start: bool,
}

impl Trajectory {
    pub fn end_point(&self) -> Option<Point> {
        self.arcs.last().map(Arc::last)
    }
}

enum State {
    Smooth(Side, Point),
    OnSigma { x: f64, from: Option<Side> },
}

enum Step {
    Next(State),
    Done(Termination),
}

struct Run<'a> {
    system: &'a NonSmoothSystem,
    cfg: &'a IntegratorConfig,
    t: f64,
    arcs: Vec<Arc>,
    /// `(x, departure side, time)` of the first sewing crossing
    first_crossing: Option<(f64, Side, f64)>,
}

/// Integrates the Filippov trajectory through `p0` forward in time.
///
/// Smooth arcs switch sides at sewing points; on sliding (or, at the start
/// only, escaping) intervals the motion follows `x' = H(x)` until it reaches
/// a fold, where it leaves along the field that departs there, or converges
/// to a pseudo-equilibrium.
pub fn integrate(system: &NonSmoothSystem, p0: Point, cfg: &IntegratorConfig) -> Trajectory {
    let on_sigma = p0.y.abs() <= cfg.tol_event;
    let escaping_start =
        on_sigma && classify_sigma_point(system, p0.x, &cfg.sigma) == SigmaClass::Escaping;
    let mut run = Run {
        system,
        cfg,
        t: 0.0,
        arcs: Vec::new(),
        first_crossing: None,
    };
    let mut state = if on_sigma {
        State::OnSigma {
            x: p0.x,
            from: None,
        }
    } else if p0.y > 0.0 {
        State::Smooth(Side::Upper, p0)
    } else {
        State::Smooth(Side::Lower, p0)
    };

    let termination = loop {
        if run.arcs.len() >= MAX_ARCS {
            break Termination::TimeBudget;
        }
        let step = match state {
            State::Smooth(side, p) => run.smooth(side, p),
            State::OnSigma { x, from } => run.on_sigma(x, from),
        };
        match step {
            Step::Next(next) => state = next,
            Step::Done(termination) => break termination,
        }
    };

    Trajectory {
        arcs: run.arcs,
        termination,
        escaping_start,
    }
}

impl Run<'_> {
    fn push_shifted(&mut self, mut arc: Arc) {
        for t in &mut arc.times {
            *t += self.t;
        }
        self.arcs.push(arc);
    }

    fn smooth(&mut self, side: Side, p: Point) -> Step {
        let mut local = *self.cfg;
        local.t_max = self.cfg.t_max - self.t;
        match flow_to_sigma(self.system.field(side), p, side, &local) {
            Ok(hit) => {
                self.push_shifted(hit.arc);
                self.t += hit.time;
                Step::Next(State::OnSigma {
                    x: hit.point.x,
                    from: Some(side),
                })
            }
            Err(err) => {
                let termination = match &err {
                    FlowError::LeftDomain(_) => Termination::LeftDomain,
                    FlowError::SaddleApproach(_) => Termination::SaddleApproach,
                    FlowError::TimeBudget(_) | FlowError::StepUnderflow(_) => {
                        Termination::TimeBudget
                    }
                    FlowError::NotDeparting { .. } => Termination::TangencyStop,
                };
                if let Some(arc) = err.partial_arc() {
                    self.push_shifted(arc.clone());
                }
                Step::Done(termination)
            }
        }
    }

    fn on_sigma(&mut self, x: f64, from: Option<Side>) -> Step {
        if !self.cfg.in_domain(Point::on_sigma(x)) {
            return Step::Done(Termination::LeftDomain);
        }
        match classify_sigma_point(self.system, x, &self.cfg.sigma) {
            SigmaClass::Sewing => {
                let side = if self.system.upper.lie(Point::on_sigma(x)) > 0.0 {
                    Side::Upper
                } else {
                    Side::Lower
                };
                match self.first_crossing {
                    Some((x1, side1, t1))
                        if side1 == side
                            && self.t > t1
                            && (x - x1).abs() <= self.cfg.closed_tol =>
                    {
                        return Step::Done(Termination::ClosedOrbit(self.t - t1));
                    }
                    None => self.first_crossing = Some((x, side, self.t)),
                    _ => {}
                }
                Step::Next(State::Smooth(side, Point::on_sigma(x)))
            }
            SigmaClass::Sliding | SigmaClass::Escaping => self.slide(x),
            SigmaClass::DoubleTangency { .. } => Step::Done(Termination::TangencyStop),
            SigmaClass::Tangency(..) => self.leave_fold(x, from),
        }
    }

    /// At a single fold: continue along a field that departs from the point,
    /// preferring the side the trajectory arrived from (grazing a visible
    /// fold), else step off the fold in the direction of the sliding motion.
    fn leave_fold(&mut self, x: f64, from: Option<Side>) -> Step {
        let order = match from {
            Some(side) => [side, side.opposite()],
            None => [Side::Upper, Side::Lower],
        };
        for side in order {
            if departs(self.system.field(side), x, side, self.cfg) {
                return Step::Next(State::Smooth(side, Point::on_sigma(x)));
            }
        }
        match direction_function(self.system, x, &self.cfg.sigma) {
            Ok(h) if h != 0.0 => Step::Next(State::OnSigma {
                x: x + h.signum() * FOLD_NUDGE,
                from,
            }),
            _ => Step::Done(Termination::TangencyStop),
        }
    }

    fn slide(&mut self, x0: f64) -> Step {
        let (system, cfg) = (self.system, self.cfg);
        let extent = sigma_extent(system);
        let folds = find_tangencies(system, extent, &cfg.sigma);
        let lo = folds
            .iter()
            .map(|t| t.x)
            .filter(|&f| f < x0)
            .fold(extent.0, f64::max);
        let hi = folds
            .iter()
            .map(|t| t.x)
            .filter(|&f| f > x0)
            .fold(extent.1, f64::min);
        // pseudo-equilibria that attract along the line
        let sinks: Vec<f64> = partition_sigma(system, (lo, hi), &cfg.sigma)
            .pseudo_equilibria
            .iter()
            .filter(|pe| {
                matches!(
                    (pe.region, pe.stability),
                    (SlidingRegion::Sliding, PseudoStability::SigmaAttractor)
                        | (SlidingRegion::Escaping, PseudoStability::SigmaSaddle)
                )
            })
            .map(|pe| pe.x)
            .collect();

        let f = |s: [f64; 2]| {
            [
                direction_function(system, s[0], &cfg.sigma).unwrap_or(0.0),
                0.0,
            ]
        };
        let ctl = step_control(cfg);
        let mut arc = Arc::start(ArcSide::Sliding, Point::on_sigma(x0), self.t);
        let mut x = x0;
        let mut h = cfg.h_init;

        let outcome = loop {
            if let Some(&pe) = sinks.iter().find(|&&pe| (x - pe).abs() <= cfg.pe_capture) {
                break Step::Done(Termination::PseudoEqConvergence(pe));
            }
            if self.t >= cfg.t_max {
                break Step::Done(Termination::TimeBudget);
            }
            let Some((y, used, next)) = ctl.advance(&f, [x, 0.0], h.min(cfg.t_max - self.t)) else {
                break Step::Done(Termination::TimeBudget);
            };
            let x_new = y[0];
            let boundary = if x_new <= lo {
                Some(lo)
            } else if x_new >= hi {
                Some(hi)
            } else {
                None
            };
            if let Some(end) = boundary {
                let theta = refine_boundary(&f, x, used, end);
                self.t += theta;
                arc.push(Point::on_sigma(end), self.t);
                let dir = (end - x).signum();
                break self.after_sliding_boundary(end, dir);
            }
            x = x_new;
            self.t += used;
            h = next;
            arc.push(Point::on_sigma(x), self.t);
            if !cfg.in_domain(Point::on_sigma(x)) {
                break Step::Done(Termination::LeftDomain);
            }
        };
        self.arcs.push(arc);
        outcome
    }

    fn after_sliding_boundary(&mut self, end: f64, dir: f64) -> Step {
        if !self.cfg.in_domain(Point::on_sigma(end)) {
            return Step::Done(Termination::LeftDomain);
        }
        match classify_sigma_point(self.system, end, &self.cfg.sigma) {
            SigmaClass::DoubleTangency { .. } => return Step::Done(Termination::TangencyStop),
            SigmaClass::Tangency(..) => {}
            // the boundary was the edge of the search extent, not a fold
            _ => return Step::Done(Termination::LeftDomain),
        }
        let mut nudge = FOLD_NUDGE;
        for _ in 0..8 {
            let x = end + dir * nudge;
            match classify_sigma_point(self.system, x, &self.cfg.sigma) {
                SigmaClass::Tangency(..) => nudge *= 2.0,
                SigmaClass::DoubleTangency { .. } => break,
                _ => return Step::Next(State::OnSigma { x, from: None }),
            }
        }
        Step::Done(Termination::TangencyStop)
    }
}

/// Sub-step length after which the sliding coordinate reaches `end`.
fn refine_boundary(f: &impl Fn([f64; 2]) -> [f64; 2], x: f64, h: f64, end: f64) -> f64 {
    let dir = (end - x).signum();
    let (mut lo, mut hi) = (0.0, h);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let (y, _) = dp_step(f, [x, 0.0], mid);
        let gap = dir * (end - y[0]);
        if gap == 0.0 {
            return mid;
        }
        if gap > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * h {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Writes `arc_index,side,t,x,y` rows, one per sample.
pub fn write_trajectory_csv(trajectory: &Trajectory, mut out: impl Write) -> io::Result<()> {
    writeln!(out, "arc_index,side,t,x,y")?;
    for (i, arc) in trajectory.arcs.iter().enumerate() {
        for (p, t) in arc.samples.iter().zip(&arc.times) {
            writeln!(
                out,
                "{},{},{:.16e},{:.16e},{:.16e}",
                i,
                arc.side.code(),
                t,
                p.x,
                p.y
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{build_system, FoldSaddleParams, Tau};
    use crate::sigma::sliding_vector;

    fn system(tau: Tau, lambda: f64, beta: f64, mu: f64) -> NonSmoothSystem {
        build_system(&FoldSaddleParams::new(tau, lambda, beta, mu).unwrap()).unwrap()
    }

    #[test]
    fn slides_into_pseudo_equilibrium() {
        let z = system(Tau::Invisible, -0.3, 0.5, 0.0);
        let cfg = IntegratorConfig::default();
        let traj = integrate(&z, Point::on_sigma(-0.25), &cfg);
        match traj.termination {
            Termination::PseudoEqConvergence(x) => assert!((x + 0.1).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(traj.arcs.len(), 1);
        let arc = &traj.arcs[0];
        assert_eq!(arc.side, ArcSide::Sliding);
        assert!(arc.samples.windows(2).all(|w| w[0].x <= w[1].x));
    }

    #[test]
    fn sliding_arc_follows_direction_function() {
        // at mu = 0, H(x) = ((1 + beta) x - beta lambda) / lambda is linear, so
        // the sliding coordinate relaxes exponentially onto the pseudo-equilibrium
        let (lambda, beta) = (-0.3, 0.5);
        let z = system(Tau::Invisible, lambda, beta, 0.0);
        let cfg = IntegratorConfig::default();
        let traj = integrate(&z, Point::on_sigma(-0.28), &cfg);
        let arc = &traj.arcs[0];
        let pe = lambda * beta / (1.0 + beta);
        let rate = (1.0 + beta) / lambda;
        for (p, t) in arc.samples.iter().zip(&arc.times) {
            let exact = pe + (-0.28 - pe) * (rate * t).exp();
            assert!((p.x - exact).abs() < 1e-9, "t = {t}");
            let h = sliding_vector(&z, p.x, &cfg.sigma).unwrap()[0];
            assert!((h - rate * (exact - pe)).abs() < 1e-9);
        }
    }

    #[test]
    fn slides_to_visible_fold_and_leaves_upward() {
        let z = system(Tau::Visible, -0.5, -0.5, 0.0);
        let cfg = IntegratorConfig::default();
        let traj = integrate(&z, Point::on_sigma(-0.8), &cfg);
        assert_eq!(traj.arcs[0].side, ArcSide::Sliding);
        assert!((traj.arcs[0].last().x + 0.5).abs() < 1e-12);
        assert_eq!(traj.arcs[1].side, ArcSide::Upper);
        assert_eq!(traj.termination, Termination::LeftDomain);
    }

    #[test]
    fn sigma_center_orbit_closes() {
        let z = system(Tau::Invisible, 0.0, 0.5, 0.0);
        let cfg = IntegratorConfig::default();
        let traj = integrate(&z, Point::on_sigma(0.25), &cfg);
        assert!(
            matches!(traj.termination, Termination::ClosedOrbit(p) if p > 0.0),
            "{:?}",
            traj.termination
        );
        assert_eq!(traj.arcs[0].side, ArcSide::Lower);
        assert_eq!(traj.arcs[1].side, ArcSide::Upper);
    }

    #[test]
    fn escaping_start_is_flagged() {
        let z = system(Tau::Invisible, 0.3, 0.5, 0.0);
        let cfg = IntegratorConfig::default();
        let traj = integrate(&z, Point::on_sigma(0.2), &cfg);
        assert!(traj.escaping_start);
        let traj = integrate(&z, Point::new(0.2, 0.3), &cfg);
        assert!(!traj.escaping_start);
    }

    #[test]
    fn consecutive_arcs_share_endpoints() {
        let z = system(Tau::Invisible, 0.1, 0.4, 0.1);
        let cfg = IntegratorConfig::default();
        let traj = integrate(&z, Point::new(-0.3, 0.2), &cfg);
        for w in traj.arcs.windows(2) {
            let (a, b) = (w[0].last(), w[1].first());
            assert!(a.distance(&b) <= 2.0 * FOLD_NUDGE, "{a:?} {b:?}");
        }
    }

    #[test]
    fn csv_export() {
        let z = system(Tau::Invisible, -0.3, 0.5, 0.0);
        let traj = integrate(&z, Point::on_sigma(-0.25), &IntegratorConfig::default());
        let mut buf = Vec::new();
        write_trajectory_csv(&traj, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("arc_index,side,t,x,y"));
        assert!(lines.next().unwrap().starts_with("0,S,"));
    }
}
