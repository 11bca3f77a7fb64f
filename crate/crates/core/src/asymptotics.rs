//! Large-time analysis of level traces: the reduced position `δ_t`, linear
//! fits of its expansion, the two-level shift check, the profile-correction
//! check, and the exponential-filter oracle `R_t = ∫ φ_u e^{-β(t-u)} du`.

use crate::dispersion::{CriticalPoint, ExpansionCoefficients};
use crate::lattice_sim::{FrontState, LevelTrace, SimError};
use crate::numerics::least_squares;
use crate::wave::{PhiTable, WaveError, WaveProfile};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AsymptoticsError {
    #[error("data error: {0}")]
    Data(String),
    #[error("fit error: {0}")]
    Fit(String),
    #[error("η = {eta:e} is below ten times its noise floor {noise:e}")]
    Signal { eta: f64, noise: f64 },
    #[error(transparent)]
    Wave(#[from] WaveError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// `δ_t = μ_t - v_c t + (3/(2γ_c)) ln t + d'/√t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaSeries {
    pub alpha: f64,
    pub times: Vec<f64>,
    pub delta: Vec<f64>,
    pub v_c: f64,
    pub gamma_c: f64,
    pub d_prime: f64,
}

pub fn delta_series(
    trace: &LevelTrace,
    cp: &CriticalPoint,
    coeffs: &ExpansionCoefficients,
) -> Result<DeltaSeries, AsymptoticsError> {
    if trace.times.is_empty() || trace.times.len() != trace.mu.len() {
        return Err(AsymptoticsError::Data("trace is empty or ragged".into()));
    }
    if trace.times.iter().any(|&t| !(t > 0.0) || !t.is_finite()) {
        return Err(AsymptoticsError::Data(
            "all sample times must be positive".into(),
        ));
    }
    if trace.times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(AsymptoticsError::Data("sample times must increase".into()));
    }
    let delta: Vec<f64> = trace
        .times
        .iter()
        .zip(&trace.mu)
        .map(|(&t, &mu)| mu - cp.v_c * t + 1.5 / cp.gamma_c * t.ln() + coeffs.d_prime / t.sqrt())
        .collect();
    if delta.iter().any(|d| !d.is_finite()) {
        return Err(AsymptoticsError::Data("non-finite level position".into()));
    }
    Ok(DeltaSeries {
        alpha: trace.alpha,
        times: trace.times.clone(),
        delta,
        v_c: cp.v_c,
        gamma_c: cp.gamma_c,
        d_prime: coeffs.d_prime,
    })
}

/// Candidate expansions of `δ_t`, each nesting the previous:
/// (a) `C + (f' ln t + g)/t`, (b) `+ (h ln t + i)/t^{3/2}`,
/// (c) `+ (j ln t + k)/t²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitModel {
    A,
    B,
    C,
}

impl FitModel {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "a" | "A" => Some(FitModel::A),
            "b" | "B" => Some(FitModel::B),
            "c" | "C" => Some(FitModel::C),
            _ => None,
        }
    }

    pub fn names(self) -> &'static [&'static str] {
        const ALL: [&str; 7] = ["C", "f'", "g", "h", "i", "j", "k"];
        &ALL[..self.parameter_count()]
    }

    pub fn parameter_count(self) -> usize {
        match self {
            FitModel::A => 3,
            FitModel::B => 5,
            FitModel::C => 7,
        }
    }

    pub fn basis(self, t: f64) -> Vec<f64> {
        let l = t.ln();
        let all = [
            1.0,
            l / t,
            1.0 / t,
            l / t.powf(1.5),
            1.0 / t.powf(1.5),
            l / (t * t),
            1.0 / (t * t),
        ];
        all[..self.parameter_count()].to_vec()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: FitModel,
    pub alpha: f64,
    /// First and last sample time actually used.
    pub window: (f64, f64),
    pub coefficients: Vec<f64>,
    pub rms_residual: f64,
    pub condition: f64,
    pub points: usize,
}

impl FitResult {
    pub fn constant(&self) -> f64 {
        self.coefficients[0]
    }

    /// Coefficient of `ln t / t`.
    pub fn f_prime(&self) -> f64 {
        self.coefficients[1]
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.model
            .basis(t)
            .iter()
            .zip(&self.coefficients)
            .map(|(b, c)| b * c)
            .sum()
    }
}

pub const MAX_CONDITION: f64 = 1e12;

/// Indices of the samples nearest to the window ends, inclusive.
fn snap_window(times: &[f64], window: (f64, f64)) -> Result<(usize, usize), AsymptoticsError> {
    let (t1, t2) = window;
    if !(t1 < t2) || times.is_empty() {
        return Err(AsymptoticsError::Data(format!("empty window [{t1}, {t2}]")));
    }
    let first = times[0];
    let last = *times.last().unwrap();
    let slack = if times.len() > 1 {
        (last - first) / (times.len() - 1) as f64
    } else {
        0.0
    };
    if t1 < first - slack || t2 > last + slack {
        return Err(AsymptoticsError::Data(format!(
            "window [{t1}, {t2}] outside data range [{first}, {last}]"
        )));
    }
    let nearest = |t: f64| {
        let j = times.partition_point(|&s| s < t);
        if j == 0 {
            0
        } else if j == times.len() || t - times[j - 1] <= times[j] - t {
            j - 1
        } else {
            j
        }
    };
    Ok((nearest(t1), nearest(t2)))
}

pub fn fit(
    ds: &DeltaSeries,
    model: FitModel,
    window: (f64, f64),
) -> Result<FitResult, AsymptoticsError> {
    let (i1, i2) = snap_window(&ds.times, window)?;
    let n = i2 + 1 - i1;
    if n < 2 * model.parameter_count() {
        return Err(AsymptoticsError::Data(format!(
            "{n} samples in window, model needs at least {}",
            2 * model.parameter_count()
        )));
    }
    let times = &ds.times[i1..=i2];
    let rows: Vec<Vec<f64>> = times.iter().map(|&t| model.basis(t)).collect();
    let cols: Vec<Vec<f64>> = (0..model.parameter_count())
        .map(|j| rows.iter().map(|r| r[j]).collect())
        .collect();
    let ls = least_squares(&cols, &ds.delta[i1..=i2])
        .ok_or_else(|| AsymptoticsError::Fit("degenerate design matrix".into()))?;
    if !(ls.condition <= MAX_CONDITION) {
        return Err(AsymptoticsError::Fit(format!(
            "design condition {:e} exceeds {MAX_CONDITION:e}",
            ls.condition
        )));
    }
    Ok(FitResult {
        model,
        alpha: ds.alpha,
        window: (times[0], times[n - 1]),
        coefficients: ls.coefficients,
        rms_residual: ls.rms_residual,
        condition: ls.condition,
        points: n,
    })
}

/// `(t, t(δ_t - C))` over the fitted window.
pub fn scaled_remainder(ds: &DeltaSeries, fit: &FitResult) -> Vec<(f64, f64)> {
    ds.times
        .iter()
        .zip(&ds.delta)
        .filter(|(&t, _)| t >= fit.window.0 && t <= fit.window.1)
        .map(|(&t, &d)| (t, t * (d - fit.constant())))
        .collect()
}

/// Fit of `s_t = μ^(α) - μ^(β) - (W^(α) - W^(β))` against `c0 + c1/t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conjecture1Report {
    pub alpha: f64,
    pub beta: f64,
    pub w_difference: f64,
    pub c0: f64,
    pub c1: f64,
    /// On the fitted upper half of the window.
    pub r_squared_fit: f64,
    /// Of the same line over the whole window.
    pub r_squared_window: f64,
    pub window: (f64, f64),
    pub fit_window: (f64, f64),
    /// `(1/t, s_t)` over the window.
    pub points: Vec<(f64, f64)>,
}

fn r_squared(y: &[f64], pred: &[f64]) -> f64 {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let ss_tot: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    let ss_res: f64 = y.iter().zip(pred).map(|(v, p)| (v - p) * (v - p)).sum();
    if ss_tot == 0.0 {
        if ss_res == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 - ss_res / ss_tot
    }
}

pub fn conjecture1_check(
    trace_a: &LevelTrace,
    trace_b: &LevelTrace,
    wp: &WaveProfile,
    window: (f64, f64),
) -> Result<Conjecture1Report, AsymptoticsError> {
    if trace_a.times != trace_b.times {
        return Err(AsymptoticsError::Data(
            "traces are not on common times".into(),
        ));
    }
    let w_difference = wp.level_position(trace_a.alpha)? - wp.level_position(trace_b.alpha)?;
    let (i1, i2) = snap_window(&trace_a.times, window)?;
    let times = &trace_a.times[i1..=i2];
    let s: Vec<f64> = (i1..=i2)
        .map(|i| trace_a.mu[i] - trace_b.mu[i] - w_difference)
        .collect();
    let mid = 0.5 * (times[0] + times[times.len() - 1]);
    let h = times.partition_point(|&t| t < mid);
    if times.len() - h < 4 {
        return Err(AsymptoticsError::Data(
            "too few samples in the upper half".into(),
        ));
    }
    let inv: Vec<f64> = times[h..].iter().map(|t| 1.0 / t).collect();
    let (c0, c1) = if s[h..].iter().all(|&v| v == 0.0) {
        (0.0, 0.0)
    } else {
        let ls = least_squares(&[vec![1.0; inv.len()], inv.clone()], &s[h..])
            .ok_or_else(|| AsymptoticsError::Fit("degenerate 1/t design".into()))?;
        (ls.coefficients[0], ls.coefficients[1])
    };
    let line = |t: f64| c0 + c1 / t;
    let pred_fit: Vec<f64> = times[h..].iter().map(|&t| line(t)).collect();
    let pred_all: Vec<f64> = times.iter().map(|&t| line(t)).collect();
    Ok(Conjecture1Report {
        alpha: trace_a.alpha,
        beta: trace_b.alpha,
        w_difference,
        c0,
        c1,
        r_squared_fit: r_squared(&s[h..], &pred_fit),
        r_squared_window: r_squared(&s, &pred_all),
        window: (times[0], times[times.len() - 1]),
        fit_window: (times[h], times[times.len() - 1]),
        points: times.iter().zip(&s).map(|(&t, &v)| (1.0 / t, v)).collect(),
    })
}

/// RMS scatter of `η` about a local straight line over `max(1, t/100)` time
/// units each side of sample `i`.
pub fn eta_noise_floor(times: &[f64], eta: &[f64], i: usize) -> Result<f64, AsymptoticsError> {
    let t = times[i];
    let span = (t / 100.0).max(1.0);
    let lo = times.partition_point(|&s| s < t - span);
    let hi = times.partition_point(|&s| s <= t + span);
    if hi - lo < 4 {
        return Err(AsymptoticsError::Data(format!(
            "too few η samples near t = {t}"
        )));
    }
    let ts: Vec<f64> = times[lo..hi].iter().map(|&s| s - t).collect();
    let ls = least_squares(&[vec![1.0; ts.len()], ts], &eta[lo..hi])
        .ok_or_else(|| AsymptoticsError::Fit("degenerate noise fit".into()))?;
    Ok(ls.rms_residual)
}

/// One time of the profile-correction check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Sample {
    pub t: f64,
    pub eta: f64,
    pub eta_noise: f64,
    /// `max_x |δ(x,t)/η_t - [Φ(W+x) - Φ(W)/ω'(W) ω'(W+x)]|` over the samples.
    pub distance: f64,
    /// Uncertainty of `distance` propagated from the noise on `η_t`.
    pub noise: f64,
    /// The compared quantity at `x = 0`.
    pub at_zero: f64,
    pub xs: Vec<f64>,
    pub compared: Vec<f64>,
    pub predicted: Vec<f64>,
}

/// Compare the simulated profile around `μ_t^(α)` with the first-order
/// correction, on `n_x` evenly spaced points in `[-x0, 0]`.
#[allow(clippy::too_many_arguments)]
pub fn theorem2_check(
    state: &FrontState,
    eta: f64,
    eta_noise: f64,
    wp: &WaveProfile,
    pt: &PhiTable,
    alpha: f64,
    x0: f64,
    n_x: usize,
) -> Result<Theorem2Sample, AsymptoticsError> {
    if !(x0 > 0.0 && x0 <= 5.0) || n_x < 2 {
        return Err(AsymptoticsError::Data(format!(
            "need 0 < x0 ≤ 5 and at least two samples (x0 = {x0}, n = {n_x})"
        )));
    }
    if !(eta.abs() >= 10.0 * eta_noise) || eta == 0.0 {
        return Err(AsymptoticsError::Signal {
            eta,
            noise: eta_noise,
        });
    }
    let mu = state.measure_level(alpha)?;
    let w = wp.level_position(alpha)?;
    let mut xs = Vec::with_capacity(n_x);
    let mut compared = Vec::with_capacity(n_x);
    let mut predicted = Vec::with_capacity(n_x);
    let mut distance: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for k in 0..n_x {
        // x = 0 is the last sample and is hit exactly
        let x = -x0 * (n_x - 1 - k) as f64 / (n_x - 1) as f64;
        let u = state.ln_h_at(mu + x)?.exp();
        let d = (u - wp.omega_at(w + x)?) / eta;
        let p = pt.profile_correction(wp, alpha, x)?;
        distance = distance.max((d - p).abs());
        scale = scale.max(d.abs());
        xs.push(x);
        compared.push(d);
        predicted.push(p);
    }
    Ok(Theorem2Sample {
        t: state.t,
        eta,
        eta_noise,
        distance,
        noise: scale * eta_noise / eta.abs(),
        at_zero: compared[n_x - 1],
        xs,
        compared,
        predicted,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Report {
    pub alpha: f64,
    pub samples: Vec<Theorem2Sample>,
    /// Each distance is at most the previous one plus both noise estimates.
    pub non_increasing: bool,
    pub max_abs_at_zero: f64,
}

pub fn theorem2_report(alpha: f64, samples: Vec<Theorem2Sample>) -> Theorem2Report {
    let non_increasing = samples
        .windows(2)
        .all(|w| w[1].distance <= w[0].distance + w[0].noise + w[1].noise);
    let max_abs_at_zero = samples.iter().map(|s| s.at_zero.abs()).fold(0.0, f64::max);
    Theorem2Report {
        alpha,
        samples,
        non_increasing,
        max_abs_at_zero,
    }
}

/// `∫_0^ℓ e^{-βτ} dτ` and `∫_0^ℓ τ e^{-βτ} dτ` for `βℓ ≤ 0.1`.
fn filter_moments(beta: f64, l: f64) -> (f64, f64) {
    let x = beta * l;
    let e0 = -(-x).exp_m1() / beta;
    // Σ (-x)^k / (k! (k+2)), converged well below ε for x ≤ 0.1
    let mut term = 1.0;
    let mut sum = 0.0;
    for k in 0..16 {
        sum += term / (k + 2) as f64;
        term *= -x / (k + 1) as f64;
    }
    (e0, l * l * sum)
}

/// `R_t = ∫_{t0}^t φ_u e^{-β(t-u)} du` for `φ` sampled at `t0 + iΔ`,
/// integrating the linear interpolant exactly, at each of `ts`.
pub fn lemma_oracle(
    phi: &[f64],
    t0: f64,
    dt: f64,
    beta: f64,
    ts: &[f64],
) -> Result<Vec<f64>, AsymptoticsError> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(AsymptoticsError::Data(format!(
            "rate β = {beta} must be positive"
        )));
    }
    if !(dt > 0.0) || dt > 0.1 / beta {
        return Err(AsymptoticsError::Data(format!(
            "sampling Δ = {dt} too coarse for β = {beta} (need Δ ≤ {})",
            0.1 / beta
        )));
    }
    if phi.len() < 2 {
        return Err(AsymptoticsError::Data(
            "need at least two samples of φ".into(),
        ));
    }
    let t_end = t0 + (phi.len() - 1) as f64 * dt;
    if ts.iter().any(|&t| !(t >= t0 && t <= t_end * (1.0 + 1e-15))) {
        return Err(AsymptoticsError::Data(format!(
            "requested times outside [{t0}, {t_end}]"
        )));
    }
    if ts.windows(2).any(|w| w[1] < w[0]) {
        return Err(AsymptoticsError::Data(
            "requested times must be sorted".into(),
        ));
    }
    let (full_e0, full_e1) = filter_moments(beta, dt);
    let decay = (-beta * dt).exp();
    let mut out = Vec::with_capacity(ts.len());
    let mut r = 0.0;
    let mut i = 0usize;
    for &t in ts {
        let target = (((t - t0) / dt).floor() as usize).min(phi.len() - 2);
        while i < target {
            let slope = (phi[i + 1] - phi[i]) / dt;
            r = decay * r + phi[i + 1] * full_e0 - slope * full_e1;
            i += 1;
        }
        let l = t - (t0 + i as f64 * dt);
        if l <= 0.0 {
            out.push(r);
            continue;
        }
        let (e0, e1) = filter_moments(beta, l);
        let slope = (phi[i + 1] - phi[i]) / dt;
        let end = phi[i] + slope * l;
        out.push((-beta * l).exp() * r + end * e0 - slope * e1);
    }
    Ok(out)
}
