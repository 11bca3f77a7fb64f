//! Dormand–Prince 5(4) step with embedded error estimate and the
//! fourth-order continuous extension, for small fixed-size systems.

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

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Result of one accepted or trial step.
#[derive(Debug, Clone, Copy)]
pub struct Step<const N: usize> {
    pub h: f64,
    pub y0: [f64; N],
    pub y1: [f64; N],
    /// Embedded error estimate `y5 - y4`.
    pub err: [f64; N],
    dense: [[f64; N]; 5],
}

impl<const N: usize> Step<N> {
    /// Max-norm of the error with mixed absolute/relative tolerance.
    pub fn error_norm(&self, atol: f64, rtol: f64) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..N {
            let scale = atol + rtol * self.y0[i].abs().max(self.y1[i].abs());
            worst = worst.max(self.err[i].abs() / scale);
        }
        worst
    }

    /// Continuous extension at fraction `theta` of the step.
    pub fn dense(&self, theta: f64) -> [f64; N] {
        let [r1, r2, r3, r4, r5] = &self.dense;
        let om = 1.0 - theta;
        std::array::from_fn(|i| {
            r1[i] + theta * (r2[i] + om * (r3[i] + theta * (r4[i] + om * r5[i])))
        })
    }
}

#[inline]
fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    std::array::from_fn(|i| {
        let mut s = 0.0;
        for (c, k) in terms {
            s += c * k[i];
        }
        y[i] + h * s
    })
}

/// One Dormand–Prince step of size `h` for the autonomous system `y' = f(y)`.
pub fn dopri5_step<const N: usize, F>(f: &F, y: &[f64; N], h: f64) -> Step<N>
where
    F: Fn(&[f64; N]) -> [f64; N],
{
    let k1 = f(y);
    let k2 = f(&axpy(y, h, &[(A21, &k1)]));
    let k3 = f(&axpy(y, h, &[(A31, &k1), (A32, &k2)]));
    let k4 = f(&axpy(y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
    let k5 = f(&axpy(
        y,
        h,
        &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)],
    ));
    let k6 = f(&axpy(
        y,
        h,
        &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
    ));
    let y1 = axpy(
        y,
        h,
        &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
    );
    let k7 = f(&y1);
    let err = std::array::from_fn(|i| {
        h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
    });
    let r1 = *y;
    let r2: [f64; N] = std::array::from_fn(|i| y1[i] - y[i]);
    let r3: [f64; N] = std::array::from_fn(|i| h * k1[i] - r2[i]);
    let r4: [f64; N] = std::array::from_fn(|i| r2[i] - h * k7[i] - r3[i]);
    let r5: [f64; N] = std::array::from_fn(|i| {
        h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i])
    });
    Step {
        h,
        y0: *y,
        y1,
        err,
        dense: [r1, r2, r3, r4, r5],
    }
}

/// Step-size update factor from an error norm (standard I-controller).
pub fn step_factor(err: f64) -> f64 {
    if err == 0.0 {
        5.0
    } else {
        (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
    }
}
