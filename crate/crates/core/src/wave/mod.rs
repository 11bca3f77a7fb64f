//! The critical travelling wave `ω`, solution of
//! `0 = ω'' + 2ω' + ω - ω²` with `ω(-∞) = 1`, `ω(+∞) = 0`, `ω(0) = 1/2`,
//! tabulated on a uniform grid, and the level positions `W^(α)`.
//!
//! The wave is launched on the unstable manifold of `ω = 1`, where
//! `1 - ω ≈ ε e^{(√2-1)x}`, and integrated forward with Dormand–Prince 5(4).
//! The state carries both `ω` and `1 - ω` so that each keeps full relative
//! precision in the tail where it is small.

mod phi;

pub use phi::{phi, psi, shift_coefficient, PhiTable};

use crate::numerics::{central_diff4, hermite5};
use crate::ode::{dopri5_step, step_factor};
use serde::{Deserialize, Serialize};
use std::f64::consts::SQRT_2;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WaveError {
    #[error("integration error: {0}")]
    Integration(String),
    #[error("solver error: {0}")]
    Solver(String),
    #[error("{what} = {value} outside tabulated range [{lo}, {hi}]")]
    Range {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("tail fit failed: measured decay rate {measured} vs expected {expected}")]
    Tail { measured: f64, expected: f64 },
    #[error("invalid wave configuration: {0}")]
    Config(String),
}

/// Growth rate of `1 - ω` as `x → -∞`.
pub const LEFT_RATE: f64 = SQRT_2 - 1.0;

/// Grid and tolerance for [`solve_wave`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveConfig {
    pub x_lo: f64,
    pub x_hi: f64,
    pub h: f64,
    pub tol: f64,
    /// `1 - ω` at the launch point of the first pass.
    pub launch_gap: f64,
}

impl Default for WaveConfig {
    fn default() -> Self {
        WaveConfig {
            x_lo: -50.0,
            x_hi: 25.0,
            h: 0.005,
            tol: 1e-12,
            launch_gap: 1e-10,
        }
    }
}

impl WaveConfig {
    pub fn with_spacing(self, h: f64) -> Self {
        WaveConfig { h, ..self }
    }
}

/// `ω` and `ω'` tabulated on `x_i = x_lo + i h`, with `x = 0` a grid node.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WaveProfile {
    pub x_lo: f64,
    pub x_hi: f64,
    pub h: f64,
    pub omega: Vec<f64>,
    /// `1 - ω`, carried separately for precision near `ω = 1`.
    pub one_minus_omega: Vec<f64>,
    pub omega_p: Vec<f64>,
    /// `C` in `ω'(x) e^x ∼ C e^{√2 x}` as `x → -∞` (negative).
    pub left_decay_amp: f64,
    origin: usize,
}

fn rhs(y: &[f64; 3]) -> [f64; 3] {
    // y = (ω, 1-ω, ω')
    [y[2], -y[2], -2.0 * y[2] - y[0] * y[1]]
}

fn launch_state(gap: f64) -> [f64; 3] {
    [1.0 - gap, gap, -LEFT_RATE * gap]
}

/// Advance exactly one grid interval of length `h`, splitting it into equal
/// substeps until the embedded error estimate meets `tol`.
fn grid_step(y: &[f64; 3], h: f64, tol: f64) -> [f64; 3] {
    let mut n = 1usize;
    loop {
        let sub = h / n as f64;
        let mut cur = *y;
        let mut ok = true;
        for _ in 0..n {
            let s = dopri5_step(&rhs, &cur, sub);
            if s.error_norm(tol, tol) > 1.0 {
                ok = false;
                break;
            }
            cur = s.y1;
        }
        if ok || n >= 1 << 12 {
            return cur;
        }
        n *= 2;
    }
}

/// Adaptive first pass: distance from the launch point to the `ω = 1/2` crossing.
fn crossing_distance(cfg: &WaveConfig) -> Result<f64, WaveError> {
    let max_len = 40.0 * (1.0 + cfg.launch_gap.ln().abs()) + (cfg.x_hi - cfg.x_lo);
    let mut s = 0.0;
    let mut y = launch_state(cfg.launch_gap);
    let mut h = 0.01;
    while s < max_len {
        let step = dopri5_step(&rhs, &y, h);
        let err = step.error_norm(cfg.tol, cfg.tol);
        if err > 1.0 {
            h *= step_factor(err);
            if h < 1e-12 {
                return Err(WaveError::Integration("step size underflow".into()));
            }
            continue;
        }
        if step.y1[2] >= 0.0 {
            return Err(WaveError::Solver(format!(
                "omega' became non-negative at s = {}",
                s + h
            )));
        }
        if step.y1[0] <= 0.5 {
            let theta = crate::numerics::bisect(|th| step.dense(th)[0] - 0.5, 0.0, 1.0, 1e-16);
            return Ok(s + theta * h);
        }
        s += h;
        y = step.y1;
        h *= step_factor(err);
    }
    Err(WaveError::Integration(format!(
        "trajectory did not cross 1/2 within {max_len} length units of the launch point"
    )))
}

/// Solve for the critical wave on the grid described by `cfg`.
pub fn solve_wave(cfg: &WaveConfig) -> Result<WaveProfile, WaveError> {
    let WaveConfig {
        x_lo,
        x_hi,
        h,
        tol,
        launch_gap,
    } = *cfg;
    if !(x_lo <= -20.0 && x_hi >= 20.0) {
        return Err(WaveError::Config(format!(
            "grid [{x_lo}, {x_hi}] must contain [-20, 20]"
        )));
    }
    if !(h > 0.0 && h <= 0.01) || !(tol > 0.0 && tol <= 1e-10) {
        return Err(WaveError::Config(format!(
            "need 0 < h <= 0.01 and 0 < tol <= 1e-10 (h={h}, tol={tol})"
        )));
    }
    if !(launch_gap > 0.0 && launch_gap < 1e-6) {
        return Err(WaveError::Config(format!(
            "launch gap {launch_gap} not small"
        )));
    }
    let i_lo = (x_lo / h).round() as i64;
    let i_hi = (x_hi / h).round() as i64;

    // normalised coordinates: the first-pass launch sits at -s*
    let s_star = crossing_distance(cfg)?;
    let i_launch = i_lo.min((-s_star / h).floor() as i64);
    let x_launch = i_launch as f64 * h;
    let mut gap = launch_gap * (LEFT_RATE * (x_launch + s_star)).exp();

    let integrate_to = |gap: f64, i_end: i64, mut record: Option<&mut Vec<[f64; 3]>>| {
        let mut y = launch_state(gap);
        if i_launch >= i_lo {
            if let Some(r) = record.as_deref_mut() {
                r.push(y);
            }
        }
        for i in i_launch..i_end {
            y = grid_step(&y, h, tol);
            if i + 1 >= i_lo {
                if let Some(r) = record.as_deref_mut() {
                    r.push(y);
                }
            }
        }
        y
    };

    // pin ω(0) = 1/2 at the grid node by adjusting the launch amplitude
    for _ in 0..8 {
        let y0 = integrate_to(gap, 0, None);
        let miss = y0[0] - 0.5;
        if miss.abs() <= 2.0 * f64::EPSILON {
            break;
        }
        let shift = -miss / y0[2];
        gap *= (LEFT_RATE * shift).exp();
    }

    let mut nodes = Vec::with_capacity((i_hi - i_lo + 1) as usize);
    integrate_to(gap, i_hi, Some(&mut nodes));
    let origin = (-i_lo) as usize;
    let mut profile = WaveProfile {
        x_lo: i_lo as f64 * h,
        x_hi: i_hi as f64 * h,
        h,
        omega: nodes.iter().map(|y| y[0]).collect(),
        one_minus_omega: nodes.iter().map(|y| y[1]).collect(),
        omega_p: nodes.iter().map(|y| y[2]).collect(),
        left_decay_amp: 0.0,
        origin,
    };
    // the shooting leaves ω(0) within 2 ulps of 1/2; the normalisation is exact
    profile.omega[origin] = 0.5;
    profile.one_minus_omega[origin] = 0.5;
    for (i, y) in nodes.iter().enumerate() {
        if !(y[2] < 0.0) || !(y[0] > 0.0) || !(y[1] > 0.0) {
            return Err(WaveError::Solver(format!(
                "profile not strictly decreasing in (0,1) at x = {}",
                profile.x(i)
            )));
        }
    }
    profile.left_decay_amp = profile.omega_p[0] * ((1.0 - SQRT_2) * profile.x_lo).exp();
    Ok(profile)
}

impl WaveProfile {
    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x_lo + i as f64 * self.h
    }

    /// Index of the node at `x = 0`.
    pub fn origin_index(&self) -> usize {
        self.origin
    }

    /// `ω''` at node `i` from the defining equation.
    #[inline]
    pub fn omega_pp(&self, i: usize) -> f64 {
        -2.0 * self.omega_p[i] - self.omega[i] * self.one_minus_omega[i]
    }

    /// `ω'''` at node `i` from the differentiated equation.
    #[inline]
    pub fn omega_ppp(&self, i: usize) -> f64 {
        -2.0 * self.omega_pp(i) - self.omega_p[i] * (self.one_minus_omega[i] - self.omega[i])
    }

    fn locate(&self, what: &'static str, x: f64) -> Result<(usize, f64), WaveError> {
        if !(x >= self.x_lo && x <= self.x_hi) {
            return Err(WaveError::Range {
                what,
                value: x,
                lo: self.x_lo,
                hi: self.x_hi,
            });
        }
        let u = (x - self.x_lo) / self.h;
        let i = (u.floor() as usize).min(self.len() - 2);
        Ok((i, u - i as f64))
    }

    pub fn omega_at(&self, x: f64) -> Result<f64, WaveError> {
        let (i, s) = self.locate("x", x)?;
        Ok(hermite5(
            self.h,
            self.omega[i],
            self.omega_p[i],
            self.omega_pp(i),
            self.omega[i + 1],
            self.omega_p[i + 1],
            self.omega_pp(i + 1),
            s,
        ))
    }

    pub fn one_minus_omega_at(&self, x: f64) -> Result<f64, WaveError> {
        let (i, s) = self.locate("x", x)?;
        Ok(hermite5(
            self.h,
            self.one_minus_omega[i],
            -self.omega_p[i],
            -self.omega_pp(i),
            self.one_minus_omega[i + 1],
            -self.omega_p[i + 1],
            -self.omega_pp(i + 1),
            s,
        ))
    }

    pub fn omega_p_at(&self, x: f64) -> Result<f64, WaveError> {
        let (i, s) = self.locate("x", x)?;
        Ok(hermite5(
            self.h,
            self.omega_p[i],
            self.omega_pp(i),
            self.omega_ppp(i),
            self.omega_p[i + 1],
            self.omega_pp(i + 1),
            self.omega_ppp(i + 1),
            s,
        ))
    }

    /// Finite-difference residual of `ω'' + 2ω' + ω - ω²` at interior nodes,
    /// with `ω''` from a fourth-order difference of the tabulated `ω'`.
    /// Entry `k` belongs to node `k + 2`.
    pub fn ode_residuals(&self) -> Vec<f64> {
        (2..self.len() - 2)
            .map(|i| {
                central_diff4(&self.omega_p, self.h, i)
                    + 2.0 * self.omega_p[i]
                    + self.omega[i] * self.one_minus_omega[i]
            })
            .collect()
    }

    /// Fourth-order difference of `ω` against the tabulated `ω'`.
    pub fn slope_residuals(&self) -> Vec<f64> {
        (2..self.len() - 2)
            .map(|i| central_diff4(&self.omega, self.h, i) - self.omega_p[i])
            .collect()
    }

    /// Position `W` with `ω(W) = α`.
    pub fn level_position(&self, alpha: f64) -> Result<f64, WaveError> {
        let hi = self.omega[0];
        let lo = *self.omega.last().unwrap();
        if !(alpha > lo && alpha < hi) {
            return Err(WaveError::Range {
                what: "alpha",
                value: alpha,
                lo,
                hi,
            });
        }
        // ω decreasing: first node with ω <= α
        let j = self.omega.partition_point(|&w| w > alpha);
        let i = j.saturating_sub(1).min(self.len() - 2);
        let (x0, x1) = (self.x(i), self.x(i + 1));
        // near ω = 1 solve on 1 - ω to keep relative precision
        let upper = alpha > 0.5;
        let target = if upper { 1.0 - alpha } else { alpha };
        let f = |x: f64| -> f64 {
            if upper {
                target - self.one_minus_omega_at(x).unwrap()
            } else {
                self.omega_at(x).unwrap() - target
            }
        };
        let mut a = x0;
        let mut b = x1;
        let mut x = 0.5 * (a + b);
        for _ in 0..200 {
            let fx = f(x);
            if fx == 0.0 {
                break;
            }
            if fx > 0.0 {
                a = x;
            } else {
                b = x;
            }
            // Newton with the interpolated slope, safeguarded by the bracket
            let slope = self.omega_p_at(x).unwrap();
            let newton = x - fx / slope;
            let next = if newton > a && newton < b {
                newton
            } else {
                0.5 * (a + b)
            };
            if (next - x).abs() <= 1e-15 * (1.0 + x.abs()) {
                x = next;
                break;
            }
            x = next;
        }
        Ok(x)
    }
}
