//! Explicit lattice front
//! `h(x,t+b) = h + (b/a²)[h(x-a) + h(x+a) - 2h] + b[h - h²]`
//! evolved in log space on a window that follows the front.
//!
//! Cells left of the window are exactly 1 and cells right of it exactly 0.
//! The right edge sits at `v_c t + 10√t + 50`; beyond it `h` is taken to be
//! zero. Values within `snap_threshold` of `ln h = 0` are snapped to 0, which
//! freezes the bulk and lets the left end of the window be trimmed.

use crate::numerics::{bisect, lagrange_derivative, lagrange_eval};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid simulation parameters: {0}")]
    Params(String),
    #[error("non-finite value at lattice index {index} (t = {t})")]
    Numerics { index: i64, t: f64 },
    #[error("level {alpha} not bracketed by stored cells at t = {t}")]
    LevelNotBracketed { alpha: f64, t: f64 },
    #[error("data error: {0}")]
    Data(String),
}

/// Initial condition for [`run`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    /// `h = 1` for `x ≤ 0`, `h = 0` for `x > 0`.
    Step,
    /// `h = min(1, A x^κ e^{-x})` for `x > 0`, `h = 1` for `x ≤ 0`.
    ExpTail { amplitude: f64, kappa: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub a: f64,
    pub b: f64,
    pub t_max: f64,
    pub alphas: Vec<f64>,
    pub snap_threshold: f64,
    pub sample_stride: usize,
    /// Speed in the right-boundary law.
    pub v_c: f64,
    pub initial: InitialCondition,
}

impl SimParams {
    pub fn new(a: f64, b: f64, v_c: f64, t_max: f64, alphas: Vec<f64>) -> Self {
        SimParams {
            a,
            b,
            t_max,
            alphas,
            snap_threshold: -1e-16,
            sample_stride: 50,
            v_c,
            initial: InitialCondition::Step,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Params(m));
        if !(self.a > 0.0 && self.b > 0.0) || !self.a.is_finite() || !self.b.is_finite() {
            return bad(format!("need a > 0 and b > 0 (a={}, b={})", self.a, self.b));
        }
        if self.b / (self.a * self.a) > 0.5 {
            return bad(format!(
                "unstable: b/a² = {} > 1/2",
                self.b / (self.a * self.a)
            ));
        }
        if !(self.t_max >= 0.0 && self.t_max.is_finite()) {
            return bad(format!(
                "t_max = {} must be finite and non-negative",
                self.t_max
            ));
        }
        if self.alphas.is_empty() || self.alphas.iter().any(|&a| !(a > 0.0 && a < 1.0)) {
            return bad("alphas must be a nonempty list of levels in (0,1)".into());
        }
        if !(self.snap_threshold < 0.0) {
            return bad(format!(
                "snap threshold {} must be negative",
                self.snap_threshold
            ));
        }
        if self.sample_stride == 0 {
            return bad("sample stride must be positive".into());
        }
        if !(self.v_c > 0.0 && self.v_c.is_finite()) {
            return bad(format!("reference speed {} must be positive", self.v_c));
        }
        if let InitialCondition::ExpTail { amplitude, kappa } = self.initial {
            if !(amplitude > 0.0 && amplitude.is_finite() && kappa.is_finite()) {
                return bad("exponential-tail IC needs A > 0 and finite κ".into());
            }
        }
        Ok(())
    }

    pub fn steps(&self) -> u64 {
        (self.t_max / self.b).round() as u64
    }
}

/// Moving window of `ln h` values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontState {
    /// Steps taken; `t = steps · b`.
    pub steps: u64,
    pub t: f64,
    /// Lattice index of `lnh[0]`.
    pub base_index: i64,
    pub lnh: Vec<f64>,
    a: f64,
}

/// Gap above which the neighbour terms dominate and `ln(1+z)` would lose
/// the small `h` contribution; the update then sums the three terms directly.
const LARGE_GAP: f64 = 30.0;
/// Below this `e^l` is under half an ulp of 1, so `expm1(l)` rounds to -1.
const EXPM1_FLOOR: f64 = -38.0;
/// Trim leading frozen cells only once this many have piled up.
const TRIM_SLACK: usize = 256;

#[inline]
fn logaddexp(x: f64, y: f64) -> f64 {
    let m = x.max(y);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((x - m).exp() + (y - m).exp()).ln()
}

#[inline]
fn expm1_ln(l: f64) -> f64 {
    if l < EXPM1_FLOOR {
        -1.0
    } else {
        l.exp_m1()
    }
}

/// Per-step constants.
#[derive(Clone, Copy)]
struct Kernel {
    r: f64,
    ln_r: f64,
    b: f64,
}

impl Kernel {
    /// `ln h` after one step, `el = e^{ll-l} - 1`, `er = e^{lr-l} - 1`.
    #[inline]
    fn update(&self, l: f64, ll: f64, lr: f64, el: f64, er: f64) -> f64 {
        if l == f64::NEG_INFINITY {
            return logaddexp(self.ln_r + ll, self.ln_r + lr);
        }
        if ll - l > LARGE_GAP || lr - l > LARGE_GAP {
            return self.direct(l, ll, lr);
        }
        let z = self.r * (el + er) - self.b * expm1_ln(l);
        l + z.ln_1p()
    }

    /// Three-term sum in log space.
    fn direct(&self, l: f64, ll: f64, lr: f64) -> f64 {
        let own = 1.0 - 2.0 * self.r - self.b * expm1_ln(l);
        let terms = [
            if own > 0.0 {
                l + own.ln()
            } else {
                f64::NEG_INFINITY
            },
            self.ln_r + ll,
            self.ln_r + lr,
        ];
        let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if m == f64::NEG_INFINITY {
            return m;
        }
        m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
    }
}

impl FrontState {
    pub fn new(params: &SimParams) -> Result<Self, SimError> {
        params.validate()?;
        let mut s = FrontState {
            steps: 0,
            t: 0.0,
            base_index: 0,
            lnh: vec![0.0],
            a: params.a,
        };
        let j_max = s.right_edge(params, 0.0);
        for j in 1..=j_max {
            let l = match params.initial {
                InitialCondition::Step => f64::NEG_INFINITY,
                InitialCondition::ExpTail { amplitude, kappa } => {
                    let x = j as f64 * params.a;
                    (amplitude.ln() + kappa * x.ln() - x).min(0.0)
                }
            };
            s.lnh.push(l);
        }
        Ok(s)
    }

    /// Last lattice index inside the boundary `v_c t + 10√t + 50`.
    fn right_edge(&self, params: &SimParams, t: f64) -> i64 {
        ((params.v_c * t + 10.0 * t.sqrt() + 50.0) / params.a).floor() as i64
    }

    pub fn len(&self) -> usize {
        self.lnh.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lnh.is_empty()
    }

    /// Position of stored cell `i`.
    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        (self.base_index + i as i64) as f64 * self.a
    }

    /// `ln h` at lattice index `j`, including the implicit cells.
    #[inline]
    pub fn ln_h_index(&self, j: i64) -> f64 {
        let k = j - self.base_index;
        if k < 0 {
            0.0
        } else if (k as usize) < self.lnh.len() {
            self.lnh[k as usize]
        } else {
            f64::NEG_INFINITY
        }
    }

    /// Advance one time step.
    pub fn step(&mut self, params: &SimParams) -> Result<(), SimError> {
        let t_new = (self.steps + 1) as f64 * params.b;
        let last = self.right_edge(params, t_new) - self.base_index;
        if last >= self.lnh.len() as i64 {
            self.lnh.resize(last as usize + 1, f64::NEG_INFINITY);
        }
        let k = Kernel {
            r: params.b / (params.a * params.a),
            ln_r: (params.b / (params.a * params.a)).ln(),
            b: params.b,
        };
        let snap = params.snap_threshold;
        let n = self.lnh.len();
        let mut ll = 0.0;
        // e^{l_j - l_{j-1}} - 1 from the previous cell, if usable
        let mut carried: Option<f64> = Some(0.0);
        for j in 0..n {
            let l = self.lnh[j];
            let lr = if j + 1 < n {
                self.lnh[j + 1]
            } else {
                f64::NEG_INFINITY
            };
            let new = if l == f64::NEG_INFINITY {
                carried = None;
                k.update(l, ll, lr, 0.0, 0.0)
            } else {
                let el = match carried {
                    Some(e) if e > -0.5 => -e / (1.0 + e),
                    _ => (ll - l).exp_m1(),
                };
                let er = (lr - l).exp_m1();
                carried = Some(er);
                k.update(l, ll, lr, el, er)
            };
            if new.is_nan() || new == f64::INFINITY {
                return Err(SimError::Numerics {
                    index: self.base_index + j as i64,
                    t: t_new,
                });
            }
            self.lnh[j] = if new > snap { 0.0 } else { new };
            ll = l;
        }
        // cells left of the store are exactly 1 only while lnh[0] is; a cell
        // whose neighbours were all 1 stays 1, so one prepended cell restores it
        if self.lnh[0] != 0.0 {
            self.lnh.insert(0, 0.0);
            self.base_index -= 1;
        }
        self.steps += 1;
        self.t = t_new;
        self.trim();
        Ok(())
    }

    /// Drop leading frozen cells, keeping one as a guard.
    fn trim(&mut self) {
        let first_live = self
            .lnh
            .iter()
            .position(|&l| l != 0.0)
            .unwrap_or(self.lnh.len());
        if first_live > TRIM_SLACK {
            let drop = first_live - 1;
            self.lnh.drain(..drop);
            self.base_index += drop as i64;
        }
    }

    /// Cubic in `x` through the four cells around position `x`, as local
    /// offsets from the second node.
    fn local_cubic(&self, j1: i64) -> ([f64; 4], [f64; 4]) {
        let xs = [-1.0, 0.0, 1.0, 2.0].map(|d: f64| d * self.a);
        let ys = [-1, 0, 1, 2].map(|d| self.ln_h_index(j1 + d));
        (xs, ys)
    }

    /// `ln h` at an arbitrary position by cubic interpolation.
    pub fn ln_h_at(&self, x: f64) -> Result<f64, SimError> {
        let j1 = (x / self.a).floor() as i64;
        let (xs, ys) = self.local_cubic(j1);
        if ys.iter().any(|y| !y.is_finite()) {
            return Err(SimError::Data(format!(
                "no finite cubic stencil around x = {x} at t = {}",
                self.t
            )));
        }
        Ok(lagrange_eval(&xs, &ys, x - j1 as f64 * self.a))
    }

    /// Position where the cubic through two cells above and two below
    /// `ln α` crosses `ln α`.
    pub fn measure_level(&self, alpha: f64) -> Result<f64, SimError> {
        let target = alpha.ln();
        let not_bracketed = SimError::LevelNotBracketed { alpha, t: self.t };
        // first stored cell strictly below the level
        let k = self.lnh.partition_point(|&l| l >= target);
        if k >= self.lnh.len() {
            return Err(not_bracketed);
        }
        let j1 = self.base_index + k as i64 - 1;
        let (xs, ys) = self.local_cubic(j1);
        if ys.iter().any(|y| !y.is_finite()) || !(ys[1] >= target && ys[2] < target) {
            return Err(not_bracketed);
        }
        let s = bisect(|s| lagrange_eval(&xs, &ys, s) - target, 0.0, self.a, 0.0);
        Ok(j1 as f64 * self.a + s)
    }
}

/// `(t, μ_t)` samples for one level, with optional speed-deficit estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelTrace {
    pub alpha: f64,
    pub times: Vec<f64>,
    pub mu: Vec<f64>,
    pub eta: Option<Vec<f64>>,
}

/// Run from the configured initial condition to `t_max`, sampling every
/// `sample_stride` steps.
pub fn run(params: &SimParams) -> Result<Vec<LevelTrace>, SimError> {
    run_with(params, |_| Ok(()))
}

/// As [`run`], calling `observe` with the state at every sample.
pub fn run_with<F>(params: &SimParams, mut observe: F) -> Result<Vec<LevelTrace>, SimError>
where
    F: FnMut(&FrontState) -> Result<(), SimError>,
{
    let mut state = FrontState::new(params)?;
    let mut traces: Vec<LevelTrace> = params
        .alphas
        .iter()
        .map(|&alpha| LevelTrace {
            alpha,
            times: Vec::new(),
            mu: Vec::new(),
            eta: None,
        })
        .collect();
    let n = params.steps();
    let stride = params.sample_stride as u64;
    while state.steps < n {
        state.step(params)?;
        if state.steps % stride == 0 {
            for tr in traces.iter_mut() {
                tr.mu.push(state.measure_level(tr.alpha)?);
                tr.times.push(state.t);
            }
            observe(&state)?;
        }
    }
    Ok(traces)
}

/// `η_t = v_ref - dμ/dt` from a five-point derivative over a stencil
/// spanning about `max(1, t/100)` time units.
pub fn eta_estimate(trace: &LevelTrace, v_ref: f64) -> Result<Vec<f64>, SimError> {
    let n = trace.times.len();
    if n < 3 || trace.mu.len() != n {
        return Err(SimError::Data(format!("need at least 3 samples, got {n}")));
    }
    if trace.times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(SimError::Data("sample times must increase".into()));
    }
    let dt = (trace.times[n - 1] - trace.times[0]) / (n - 1) as f64;
    let width = 5.min(n);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let span = (trace.times[i] / 100.0).max(1.0);
        let q = ((span / (4.0 * dt)).round() as usize).clamp(1, (n - 1) / (width - 1));
        let reach = q * (width - 1);
        let start = i.saturating_sub(reach / 2).min(n - 1 - reach);
        let idx: Vec<usize> = (0..width).map(|m| start + m * q).collect();
        let xs: Vec<f64> = idx.iter().map(|&j| trace.times[j]).collect();
        let ys: Vec<f64> = idx.iter().map(|&j| trace.mu[j]).collect();
        out.push(v_ref - lagrange_derivative(&xs, &ys, trace.times[i]));
    }
    Ok(out)
}
