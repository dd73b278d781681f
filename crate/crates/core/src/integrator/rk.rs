//! Dormand–Prince 5(4) stepping for autonomous planar systems. Stage times
//! are not needed since every right-hand side here is autonomous.

pub(crate) type State = [f64; 2];

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// fifth-order weights minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy(y: State, terms: &[(f64, State)], h: f64) -> State {
    let mut out = y;
    for (c, k) in terms {
        out[0] += h * c * k[0];
        out[1] += h * c * k[1];
    }
    out
}

/// One step of size `h`; returns the fifth-order solution and the local error estimate.
pub(crate) fn dp_step(f: &impl Fn(State) -> State, y: State, h: f64) -> (State, State) {
    let k1 = f(y);
    let k2 = f(axpy(y, &[(A21, k1)], h));
    let k3 = f(axpy(y, &[(A31, k1), (A32, k2)], h));
    let k4 = f(axpy(y, &[(A41, k1), (A42, k2), (A43, k3)], h));
    let k5 = f(axpy(y, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)], h));
    let k6 = f(axpy(
        y,
        &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)],
        h,
    ));
    let y5 = axpy(
        y,
        &[(A71, k1), (A73, k3), (A74, k4), (A75, k5), (A76, k6)],
        h,
    );
    let k7 = f(y5);
    let mut err = [0.0; 2];
    for i in 0..2 {
        err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
    }
    (y5, err)
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub h_min: f64,
}

impl StepControl {
    fn error_norm(&self, y: State, y_new: State, err: State) -> f64 {
        (0..2)
            .map(|i| {
                let scale = self.atol + self.rtol * y[i].abs().max(y_new[i].abs());
                (err[i] / scale).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Takes one accepted step starting with trial size `h`. Returns
    /// `(y_new, h_used, h_next)`, or `None` if the step size underflows.
    pub fn advance(
        &self,
        f: &impl Fn(State) -> State,
        y: State,
        mut h: f64,
    ) -> Option<(State, f64, f64)> {
        h = h.min(self.h_max);
        loop {
            let (y_new, err) = dp_step(f, y, h);
            let norm = self.error_norm(y, y_new, err);
            if norm <= 1.0 && y_new.iter().all(|v| v.is_finite()) {
                let factor = if norm == 0.0 {
                    5.0
                } else {
                    (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0)
                };
                return Some((y_new, h, (h * factor).min(self.h_max)));
            }
            let factor = if norm.is_finite() {
                (0.9 * norm.powf(-0.2)).clamp(0.1, 0.5)
            } else {
                0.1
            };
            h *= factor;
            if h < self.h_min {
                return None;
            }
        }
    }
}
