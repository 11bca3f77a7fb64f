//! `Φ(x) = ω'(x) ∫_0^x dy e^{-2y}/ω'(y)² ∫_{-∞}^y dz ω'(z)² e^{2z}` and the
//! derived profile correction `Ψ`.

use super::{WaveError, WaveProfile};
use crate::numerics::{central_diff4, cumulative_integral, hermite5};
use serde::{Deserialize, Serialize};
use std::f64::consts::SQRT_2;

/// Exponent of `ω'(z)² e^{2z}` as `z → -∞`.
const INNER_TAIL_RATE: f64 = 2.0 * SQRT_2;
const TAIL_FIT_SPAN: f64 = 1.0;
const TAIL_TOLERANCE: f64 = 0.05;

/// `Φ` and `Φ'` on the grid of a [`WaveProfile`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhiTable {
    pub phi: Vec<f64>,
    pub phi_p: Vec<f64>,
    /// `I(y) = ∫_{-∞}^y ω'(z)² e^{2z} dz`
    pub inner: Vec<f64>,
    /// `J(x) = ∫_0^x e^{-2y} I(y) / ω'(y)² dy`
    pub outer: Vec<f64>,
}

/// Build the `Φ` table for `wp`.
pub fn phi(wp: &WaveProfile) -> Result<PhiTable, WaveError> {
    let n = wp.len();
    let h = wp.h;
    let integrand: Vec<f64> = (0..n)
        .map(|i| {
            let p = wp.omega_p[i];
            p * p * (2.0 * wp.x(i)).exp()
        })
        .collect();

    let k = (TAIL_FIT_SPAN / h).round() as usize;
    let measured = (integrand[k] / integrand[0]).ln() / (k as f64 * h);
    if !measured.is_finite() || (measured / INNER_TAIL_RATE - 1.0).abs() > TAIL_TOLERANCE {
        return Err(WaveError::Tail {
            measured,
            expected: INNER_TAIL_RATE,
        });
    }
    let tail = integrand[0] / INNER_TAIL_RATE;
    let inner: Vec<f64> = cumulative_integral(&integrand, h, 0)
        .into_iter()
        .map(|v| v + tail)
        .collect();

    let ratio: Vec<f64> = (0..n)
        .map(|i| {
            let p = wp.omega_p[i];
            (-2.0 * wp.x(i)).exp() * inner[i] / (p * p)
        })
        .collect();
    let outer = cumulative_integral(&ratio, h, wp.origin_index());

    let phi: Vec<f64> = (0..n).map(|i| wp.omega_p[i] * outer[i]).collect();
    let phi_p: Vec<f64> = (0..n)
        .map(|i| wp.omega_pp(i) * outer[i] + wp.omega_p[i] * ratio[i])
        .collect();
    Ok(PhiTable {
        phi,
        phi_p,
        inner,
        outer,
    })
}

impl PhiTable {
    /// `Φ''` at node `i` from `Φ'' + 2Φ' + (1-2ω)Φ = ω'`.
    #[inline]
    pub fn phi_pp(&self, wp: &WaveProfile, i: usize) -> f64 {
        wp.omega_p[i] - 2.0 * self.phi_p[i] - (1.0 - 2.0 * wp.omega[i]) * self.phi[i]
    }

    pub fn phi_at(&self, wp: &WaveProfile, x: f64) -> Result<f64, WaveError> {
        let (i, s) = wp.locate("x", x)?;
        Ok(hermite5(
            wp.h,
            self.phi[i],
            self.phi_p[i],
            self.phi_pp(wp, i),
            self.phi[i + 1],
            self.phi_p[i + 1],
            self.phi_pp(wp, i + 1),
            s,
        ))
    }

    /// Residual of `Φ'' + 2Φ' + (1-2ω)Φ - ω'` at interior nodes, with `Φ''`
    /// from a fourth-order difference of the tabulated `Φ'`. Entry `k`
    /// belongs to node `k + 2`.
    pub fn ode_residuals(&self, wp: &WaveProfile) -> Vec<f64> {
        (2..wp.len() - 2)
            .map(|i| {
                central_diff4(&self.phi_p, wp.h, i)
                    + 2.0 * self.phi_p[i]
                    + (1.0 - 2.0 * wp.omega[i]) * self.phi[i]
                    - wp.omega_p[i]
            })
            .collect()
    }

    /// Fourth-order difference of `Φ` against the tabulated `Φ'`.
    pub fn slope_residuals(&self, wp: &WaveProfile) -> Vec<f64> {
        (2..wp.len() - 2)
            .map(|i| central_diff4(&self.phi, wp.h, i) - self.phi_p[i])
            .collect()
    }

    /// `(W^(α), Φ(W^(α)) / ω'(W^(α)))`.
    pub fn level_ratio(&self, wp: &WaveProfile, alpha: f64) -> Result<(f64, f64), WaveError> {
        let w = wp.level_position(alpha)?;
        Ok((w, self.phi_at(wp, w)? / wp.omega_p_at(w)?))
    }

    /// `Φ(W+x) - Φ(W)/ω'(W) · ω'(W+x)`, the first-order profile correction
    /// seen from the `α`-level.
    pub fn profile_correction(
        &self,
        wp: &WaveProfile,
        alpha: f64,
        x: f64,
    ) -> Result<f64, WaveError> {
        let (w, ratio) = self.level_ratio(wp, alpha)?;
        Ok(self.phi_at(wp, w + x)? - ratio * wp.omega_p_at(w + x)?)
    }
}

/// `Ψ(x) = e^x [Φ(W+x) - Φ(W)/ω'(W) · ω'(W+x)]` for `x ≤ 0`, `W = W^(α)`.
pub fn psi(wp: &WaveProfile, pt: &PhiTable, alpha: f64, x: f64) -> Result<f64, WaveError> {
    if x > 0.0 {
        return Err(WaveError::Range {
            what: "x",
            value: x,
            lo: f64::NEG_INFINITY,
            hi: 0.0,
        });
    }
    Ok(x.exp() * pt.profile_correction(wp, alpha, x)?)
}

/// `Φ(W^(α))/ω'(W^(α)) - Φ(W^(β))/ω'(W^(β))`: minus the coefficient of
/// `η_t` in `μ^(α) - μ^(β) - (W^(α) - W^(β))`.
pub fn shift_coefficient(
    wp: &WaveProfile,
    pt: &PhiTable,
    alpha: f64,
    beta: f64,
) -> Result<f64, WaveError> {
    let (_, ra) = pt.level_ratio(wp, alpha)?;
    let (_, rb) = pt.level_ratio(wp, beta)?;
    Ok(ra - rb)
}
