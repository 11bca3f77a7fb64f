//! The solvable lattice front
//! `∂_t u(x,t) = u(x,t) + a u(x-1,t)` while `u(x,t) < 1`, frozen at 1 after,
//! with `u(x,·) ≡ 1` for `x ≤ 0`.
//!
//! Two solvers for the reach times `t_x`: an exact cascade of piecewise
//! `e^s P(s) + c` representations (small `x`), and fourth-order Runge–Kutta
//! on the active window of sites (large `x`).

use crate::dispersion::CriticalPoint;
use crate::numerics::{bisect, hermite3, least_squares};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolvableError {
    #[error("invalid initial condition: {0}")]
    InitialCondition(String),
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("x_max = {x_max} exceeds the exact cascade's degree bound {max}")]
    Degree { x_max: usize, max: usize },
    #[error("cascade error at site {site}: {reason}")]
    Cascade { site: usize, reason: String },
    #[error("numerics error at site {site}, t = {t}: {reason}")]
    Numerics { site: usize, t: f64, reason: String },
    #[error("fit error: {0}")]
    Fit(String),
}

/// `u0(x)` for `x ≥ 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SolvableIC {
    /// `u0(x) = values[x-1]`, zero beyond.
    Finite { values: Vec<f64> },
    /// `u0(x) = A e^{-γx} x^{-s}`.
    ExpDecay {
        amplitude: f64,
        rate: f64,
        power: f64,
    },
}

impl SolvableIC {
    pub fn zero() -> Self {
        SolvableIC::Finite { values: Vec::new() }
    }

    pub fn at(&self, x: usize) -> f64 {
        debug_assert!(x >= 1);
        match self {
            SolvableIC::Finite { values } => values.get(x - 1).copied().unwrap_or(0.0),
            SolvableIC::ExpDecay {
                amplitude,
                rate,
                power,
            } => {
                let xf = x as f64;
                amplitude * (-rate * xf - power * xf.ln()).exp()
            }
        }
    }

    /// Check `u0 ∈ [0,1)` and non-increasing on `1..=x_max`.
    pub fn validate(&self, x_max: usize) -> Result<(), SolvableError> {
        if let SolvableIC::ExpDecay {
            amplitude,
            rate,
            power,
        } = self
        {
            if !(*amplitude >= 0.0 && rate.is_finite() && power.is_finite()) {
                return Err(SolvableError::InitialCondition(
                    "exponential descriptor needs A ≥ 0 and finite γ, s".into(),
                ));
            }
        }
        let mut prev = 1.0;
        for x in 1..=x_max {
            let v = self.at(x);
            if !(0.0..1.0).contains(&v) {
                return Err(SolvableError::InitialCondition(format!(
                    "u0({x}) = {v} not in [0,1)"
                )));
            }
            if v > prev {
                return Err(SolvableError::InitialCondition(format!(
                    "u0 increases at x = {x}"
                )));
            }
            prev = v;
        }
        Ok(())
    }
}

/// `t[x-1]` is the time at which site `x` reaches 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReachTimes {
    pub t: Vec<f64>,
}

impl ReachTimes {
    pub fn x_max(&self) -> usize {
        self.t.len()
    }

    pub fn at(&self, x: usize) -> f64 {
        self.t[x - 1]
    }
}

/// `u = e^s P(s) + c` on `[start, start + len)` with `s = t - start`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewisePiece {
    pub start: f64,
    /// `f64::INFINITY` for the final frozen piece.
    pub len: f64,
    /// Ascending coefficients of `P`.
    pub poly: Vec<f64>,
    pub constant: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Compensated Horner evaluation of `Σ p_i s^i`.
fn comp_horner(p: &[f64], s: f64) -> f64 {
    let Some((&last, rest)) = p.split_last() else {
        return 0.0;
    };
    let mut r = last;
    let mut c = 0.0f64;
    for &coef in rest.iter().rev() {
        let (prod, pe) = two_prod(r, s);
        let (sum, se) = two_sum(prod, coef);
        r = sum;
        c = c.mul_add(s, pe + se);
    }
    r + c
}

fn derivative(p: &[f64]) -> Vec<f64> {
    p.iter()
        .enumerate()
        .skip(1)
        .map(|(i, &c)| i as f64 * c)
        .collect()
}

impl PiecewisePiece {
    pub fn value(&self, s: f64) -> f64 {
        s.exp() * comp_horner(&self.poly, s) + self.constant
    }

    fn slope(&self, s: f64) -> f64 {
        let dp = derivative(&self.poly);
        s.exp() * (comp_horner(&self.poly, s) + comp_horner(&dp, s))
    }

    /// Root of `u(s) = 1` on `[0, hi]` by Newton kept inside a bisection bracket.
    fn freeze_time(&self, site: usize) -> Result<f64, SolvableError> {
        let f = |s: f64| self.value(s) - 1.0;
        let not_bracketed = |reason: String| SolvableError::Cascade { site, reason };
        if f(0.0) >= 0.0 {
            return Err(not_bracketed("site starts the piece at or above 1".into()));
        }
        let mut hi = if self.len.is_finite() { self.len } else { 1.0 };
        while f(hi) < 0.0 {
            if self.len.is_finite() || hi > 1e4 {
                return Err(not_bracketed(format!("no crossing of 1 on [0, {hi}]")));
            }
            hi *= 2.0;
        }
        let mut lo = 0.0;
        let mut s = 0.5 * hi;
        for _ in 0..200 {
            let fs = f(s);
            if fs < 0.0 {
                lo = s;
            } else {
                hi = s;
            }
            let newton = s - fs / self.slope(s);
            let next = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (next - s).abs() <= 4.0 * f64::EPSILON * s.abs() || hi - lo <= 1e-15 {
                return Ok(next);
            }
            s = next;
        }
        Ok(s)
    }
}

/// Largest `x_max` for the exact cascade: site `x` carries degree `x-1`.
pub const MAX_CASCADE_SITES: usize = 64;

/// Piecewise representation of the first `x_max` sites.
pub fn exact_pieces(
    ic: &SolvableIC,
    a: f64,
    x_max: usize,
) -> Result<Vec<Vec<PiecewisePiece>>, SolvableError> {
    if x_max > MAX_CASCADE_SITES {
        return Err(SolvableError::Degree {
            x_max,
            max: MAX_CASCADE_SITES,
        });
    }
    if !(a > 0.0 && a.is_finite()) {
        return Err(SolvableError::Params(format!(
            "coupling a = {a} must be positive"
        )));
    }
    ic.validate(x_max)?;
    // site 0 is frozen at 1 from the start
    let mut prev = vec![PiecewisePiece {
        start: 0.0,
        len: f64::INFINITY,
        poly: Vec::new(),
        constant: 1.0,
    }];
    let mut all = Vec::with_capacity(x_max);
    for site in 1..=x_max {
        let mut u_start = ic.at(site);
        let mut pieces = Vec::with_capacity(prev.len() + 1);
        for forcing in &prev {
            let constant = -a * forcing.constant;
            let mut poly = Vec::with_capacity(forcing.poly.len() + 1);
            poly.push(u_start - constant);
            poly.extend(
                forcing
                    .poly
                    .iter()
                    .enumerate()
                    .map(|(i, &q)| a * q / (i + 1) as f64),
            );
            let mut piece = PiecewisePiece {
                start: forcing.start,
                len: forcing.len,
                poly,
                constant,
            };
            if forcing.len.is_finite() {
                let end = piece.value(piece.len);
                if end >= 1.0 {
                    return Err(SolvableError::Cascade {
                        site,
                        reason: format!("reached 1 before site {} froze", site - 1),
                    });
                }
                u_start = end;
                pieces.push(piece);
            } else {
                let s = piece.freeze_time(site)?;
                piece.len = s;
                let t_x = piece.start + s;
                pieces.push(piece);
                pieces.push(PiecewisePiece {
                    start: t_x,
                    len: f64::INFINITY,
                    poly: Vec::new(),
                    constant: 1.0,
                });
            }
        }
        all.push(pieces.clone());
        prev = pieces;
    }
    Ok(all)
}

/// Reach times from the exact piecewise representation.
pub fn exact_cascade(ic: &SolvableIC, a: f64, x_max: usize) -> Result<ReachTimes, SolvableError> {
    let pieces = exact_pieces(ic, a, x_max)?;
    let t: Vec<f64> = pieces.iter().map(|p| p.last().unwrap().start).collect();
    check_increasing(&t)?;
    Ok(ReachTimes { t })
}

fn check_increasing(t: &[f64]) -> Result<(), SolvableError> {
    if let Some(i) = t.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(SolvableError::Cascade {
            site: i + 2,
            reason: "reach times not increasing".into(),
        });
    }
    Ok(())
}

/// Sites below this are advanced with the uncoupled law `u = u0 e^t`.
const ACTIVE_FLOOR: f64 = 1e-280;
/// RK4 couples four sites per step; integrate a few more than that.
const ACTIVE_MARGIN: usize = 8;
pub const MAX_ODE_SITES: usize = 100_000;

/// Active sites `lo..hi` of `u`, sites below `lo` frozen at 1.
struct Window<'a> {
    a: f64,
    ic: &'a SolvableIC,
    u: Vec<f64>,
    lo: usize,
    hi: usize,
    k: [Vec<f64>; 4],
    stage: Vec<f64>,
}

impl Window<'_> {
    fn rhs(a: f64, u: &[f64], pred0: f64, out: &mut [f64]) {
        let mut pred = pred0;
        for (o, &v) in out.iter_mut().zip(u) {
            *o = v + a * pred;
            pred = v;
        }
    }

    /// Classical RK4 over the active sites from `start` by `dt`.
    fn rk4(&mut self, start: &[f64], dt: f64) -> Vec<f64> {
        let n = start.len();
        for k in self.k.iter_mut() {
            k.resize(n, 0.0);
        }
        self.stage.resize(n, 0.0);
        let a = self.a;
        // the predecessor of the first active site is frozen
        Self::rhs(a, start, 1.0, &mut self.k[0]);
        for (s, (&y, &k)) in self.stage.iter_mut().zip(start.iter().zip(&self.k[0])) {
            *s = y + 0.5 * dt * k;
        }
        Self::rhs(a, &self.stage, 1.0, &mut self.k[1]);
        for (s, (&y, &k)) in self.stage.iter_mut().zip(start.iter().zip(&self.k[1])) {
            *s = y + 0.5 * dt * k;
        }
        Self::rhs(a, &self.stage, 1.0, &mut self.k[2]);
        for (s, (&y, &k)) in self.stage.iter_mut().zip(start.iter().zip(&self.k[2])) {
            *s = y + dt * k;
        }
        Self::rhs(a, &self.stage, 1.0, &mut self.k[3]);
        (0..n)
            .map(|i| {
                start[i]
                    + dt / 6.0
                        * (self.k[0][i] + 2.0 * self.k[1][i] + 2.0 * self.k[2][i] + self.k[3][i])
            })
            .collect()
    }

    /// Extend the window so that at least `ACTIVE_MARGIN` sites past the
    /// last one above `ACTIVE_FLOOR` are integrated.
    fn activate(&mut self, t: f64, x_max: usize) {
        let mut last_sig = self.lo - 1;
        for x in (self.lo..self.hi).rev() {
            if self.u[x] > ACTIVE_FLOOR {
                last_sig = x;
                break;
            }
        }
        while self.hi <= x_max {
            let u0 = self.ic.at(self.hi);
            let dormant = if u0 > 0.0 { u0 * t.exp() } else { 0.0 };
            if self.hi <= last_sig + ACTIVE_MARGIN || dormant > ACTIVE_FLOOR {
                if dormant > ACTIVE_FLOOR {
                    last_sig = self.hi;
                }
                self.u[self.hi] = dormant;
                self.hi += 1;
            } else {
                break;
            }
        }
    }
}

/// Reach times by RK4 on `u`, freezing each site at its crossing of 1.
pub fn ode_front(
    ic: &SolvableIC,
    a: f64,
    x_max: usize,
    dt: f64,
) -> Result<ReachTimes, SolvableError> {
    if !(dt > 0.0 && dt <= 1e-3) {
        return Err(SolvableError::Params(format!(
            "need 0 < dt ≤ 1e-3, got {dt}"
        )));
    }
    if !(1..=MAX_ODE_SITES).contains(&x_max) {
        return Err(SolvableError::Params(format!(
            "x_max = {x_max} outside 1..={MAX_ODE_SITES}"
        )));
    }
    if !(a > 0.0 && a.is_finite()) {
        return Err(SolvableError::Params(format!(
            "coupling a = {a} must be positive"
        )));
    }
    ic.validate(x_max)?;
    let mut w = Window {
        a,
        ic,
        u: vec![0.0; x_max + 1],
        lo: 1,
        hi: 1,
        k: Default::default(),
        stage: Vec::new(),
    };
    w.u[0] = 1.0;
    let mut reach = Vec::with_capacity(x_max);
    let mut n: u64 = 0;
    let mut t = 0.0;
    while w.lo <= x_max {
        w.activate(t, x_max);
        let t_end = (n + 1) as f64 * dt;
        let start: Vec<f64> = w.u[w.lo..w.hi].to_vec();
        let mut end = w.rk4(&start, t_end - t);
        let mut from = start;
        let mut t_from = t;
        // freeze every site that crossed 1 during the step, earliest first
        while end[0] >= 1.0 {
            let h = t_end - t_from;
            let f0 = from[0] + a;
            let f1 = end[0] + a;
            let theta = bisect(
                |tau| hermite3(h, from[0], f0, end[0], f1, tau) - 1.0,
                0.0,
                h,
                1e-15 * h,
            );
            // polish on the RK4 map itself so the event error is that of the scheme
            let mut tau = theta;
            let mut part = w.rk4(&from, tau);
            for _ in 0..3 {
                let miss = part[0] - 1.0;
                let next = (tau - miss / (part[0] + a)).clamp(0.0, h);
                if (next - tau).abs() <= 1e-16 * t_end {
                    break;
                }
                tau = next;
                part = w.rk4(&from, tau);
            }
            let site = w.lo;
            reach.push(t_from + tau);
            part[0] = 1.0;
            w.u[w.lo..w.hi].copy_from_slice(&part);
            w.lo += 1;
            if w.lo > x_max {
                break;
            }
            t_from += tau;
            from = part[1..].to_vec();
            if from.is_empty() {
                return Err(SolvableError::Numerics {
                    site,
                    t: t_from,
                    reason: "active window emptied".into(),
                });
            }
            end = if t_end - t_from > 0.0 {
                w.rk4(&from, t_end - t_from)
            } else {
                from.clone()
            };
        }
        if w.lo > x_max {
            break;
        }
        w.u[w.lo..w.hi].copy_from_slice(&end);
        let mut pred = 1.0;
        for x in w.lo..w.hi {
            let v = w.u[x];
            if !v.is_finite() || v > pred || v < 0.0 {
                return Err(SolvableError::Numerics {
                    site: x,
                    t: t_end,
                    reason: format!("u = {v} breaks 0 ≤ u(x) ≤ u(x-1) = {pred}"),
                });
            }
            pred = v;
        }
        n += 1;
        t = t_end;
    }
    check_increasing(&reach).map_err(|e| match e {
        SolvableError::Cascade { site, reason } => SolvableError::Numerics { site, t, reason },
        other => other,
    })?;
    Ok(ReachTimes { t: reach })
}

/// Coefficients of `γ_c v_c (t_x - x/v_c) = k ln x + c + d/√x + f ln x/x + e/x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TxFit {
    /// `k`, fixed at 3/2 unless fitted.
    pub log_coefficient: f64,
    pub c: f64,
    pub d: f64,
    pub f: f64,
    pub e: f64,
    pub rms_residual: f64,
    pub condition: f64,
    pub points: usize,
}

const MAX_CONDITION: f64 = 1e12;

/// Fit the reach-time expansion over `x ∈ [x_lo, x_hi]`; with `free_log`
/// the `ln x` coefficient is fitted instead of fixed at 3/2.
pub fn fit_tx_expansion(
    rt: &ReachTimes,
    cp: &CriticalPoint,
    x_range: (usize, usize),
    free_log: bool,
) -> Result<TxFit, SolvableError> {
    let (lo, hi) = x_range;
    if lo < 1 || hi > rt.x_max() || hi < lo || hi - lo + 1 < 50 {
        return Err(SolvableError::Fit(format!(
            "range [{lo}, {hi}] must hold ≥ 50 sites within 1..={}",
            rt.x_max()
        )));
    }
    let scale = cp.gamma_c * cp.v_c;
    let xs: Vec<f64> = (lo..=hi).map(|x| x as f64).collect();
    let y: Vec<f64> = (lo..=hi)
        .map(|x| {
            let xf = x as f64;
            let base = scale * (rt.at(x) - xf / cp.v_c);
            if free_log {
                base
            } else {
                base - 1.5 * xf.ln()
            }
        })
        .collect();
    let mut cols = Vec::new();
    if free_log {
        cols.push(xs.iter().map(|x| x.ln()).collect::<Vec<_>>());
    }
    cols.push(xs.iter().map(|_| 1.0).collect());
    cols.push(xs.iter().map(|x| 1.0 / x.sqrt()).collect());
    cols.push(xs.iter().map(|x| x.ln() / x).collect());
    cols.push(xs.iter().map(|x| 1.0 / x).collect());
    let ls = least_squares(&cols, &y)
        .ok_or_else(|| SolvableError::Fit("degenerate design matrix".into()))?;
    if !(ls.condition <= MAX_CONDITION) {
        return Err(SolvableError::Fit(format!(
            "design condition {:e} exceeds {MAX_CONDITION:e}",
            ls.condition
        )));
    }
    let c = &ls.coefficients;
    let (k, rest) = if free_log {
        (c[0], &c[1..])
    } else {
        (1.5, &c[..])
    };
    Ok(TxFit {
        log_coefficient: k,
        c: rest[0],
        d: rest[1],
        f: rest[2],
        e: rest[3],
        rms_residual: ls.rms_residual,
        condition: ls.condition,
        points: xs.len(),
    })
}
