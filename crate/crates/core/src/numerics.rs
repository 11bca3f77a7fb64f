//! Small numerical kernels shared by the front modules: uniform-grid
//! quadrature and differences, Hermite interpolation, Lagrange weights and a
//! column-scaled linear least-squares solver.

use nalgebra::{DMatrix, DVector};

/// Cumulative integral of uniformly sampled `f` starting from node `origin`.
///
/// Each cell uses the cubic through four neighbouring nodes, so the result is
/// fourth-order accurate and its error is a smooth function of position. The
/// returned vector satisfies `out[origin] == 0`.
pub fn cumulative_integral(f: &[f64], h: f64, origin: usize) -> Vec<f64> {
    let n = f.len();
    assert!(n >= 4, "cumulative_integral needs at least four nodes");
    assert!(origin < n);
    let cell = |i: usize| -> f64 {
        // integral over [x_i, x_{i+1}]
        if i == 0 {
            h / 24.0 * (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3])
        } else if i + 2 >= n {
            h / 24.0 * (9.0 * f[i + 1] + 19.0 * f[i] - 5.0 * f[i - 1] + f[i - 2])
        } else {
            h / 24.0 * (-f[i - 1] + 13.0 * f[i] + 13.0 * f[i + 1] - f[i + 2])
        }
    };
    let mut out = vec![0.0; n];
    let mut acc = 0.0;
    for i in origin..n - 1 {
        acc += cell(i);
        out[i + 1] = acc;
    }
    acc = 0.0;
    for i in (0..origin).rev() {
        acc -= cell(i);
        out[i] = acc;
    }
    out
}

/// Fourth-order central first derivative at interior node `i` (needs `2 <= i < n-2`).
#[inline]
pub fn central_diff4(f: &[f64], h: f64, i: usize) -> f64 {
    (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / (12.0 * h)
}

/// Quintic Hermite interpolation on `[x0, x0 + h]` from value, first and
/// second derivative at both ends, evaluated at `x0 + s*h`.
#[allow(clippy::too_many_arguments)]
pub fn hermite5(h: f64, f0: f64, d0: f64, dd0: f64, f1: f64, d1: f64, dd1: f64, s: f64) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    let s4 = s3 * s;
    let s5 = s4 * s;
    let h00 = 1.0 - 10.0 * s3 + 15.0 * s4 - 6.0 * s5;
    let h10 = s - 6.0 * s3 + 8.0 * s4 - 3.0 * s5;
    let h20 = 0.5 * s2 - 1.5 * s3 + 1.5 * s4 - 0.5 * s5;
    let h01 = 10.0 * s3 - 15.0 * s4 + 6.0 * s5;
    let h11 = -4.0 * s3 + 7.0 * s4 - 3.0 * s5;
    let h21 = 0.5 * s3 - s4 + 0.5 * s5;
    h00 * f0 + h10 * h * d0 + h20 * h * h * dd0 + h01 * f1 + h11 * h * d1 + h21 * h * h * dd1
}

/// Cubic Hermite interpolation on `[0, h]` from value and slope at both ends.
#[inline]
pub fn hermite3(h: f64, f0: f64, d0: f64, f1: f64, d1: f64, tau: f64) -> f64 {
    let s = tau / h;
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * f0
        + (s3 - 2.0 * s2 + s) * h * d0
        + (-2.0 * s3 + 3.0 * s2) * f1
        + (s3 - s2) * h * d1
}

/// Value of the Lagrange interpolant through `(xs, ys)` at `x`.
pub fn lagrange_eval(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let mut sum = 0.0;
    for (j, (&xj, &yj)) in xs.iter().zip(ys).enumerate() {
        let mut w = 1.0;
        for (m, &xm) in xs.iter().enumerate() {
            if m != j {
                w *= (x - xm) / (xj - xm);
            }
        }
        sum += w * yj;
    }
    sum
}

/// Derivative at `x` of the Lagrange interpolant through `(xs, ys)`.
pub fn lagrange_derivative(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    let mut sum = 0.0;
    for j in 0..n {
        let mut denom = 1.0;
        for m in 0..n {
            if m != j {
                denom *= xs[j] - xs[m];
            }
        }
        // d/dx prod_{m != j} (x - x_m)
        let mut num = 0.0;
        for k in 0..n {
            if k == j {
                continue;
            }
            let mut p = 1.0;
            for (m, &xm) in xs.iter().enumerate() {
                if m != j && m != k {
                    p *= x - xm;
                }
            }
            num += p;
        }
        sum += ys[j] * num / denom;
    }
    sum
}

/// Solution of a column-scaled linear least-squares problem.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub coefficients: Vec<f64>,
    pub rms_residual: f64,
    /// 2-norm condition number of the column-scaled design matrix.
    pub condition: f64,
}

/// Solve `min ||X c - y||` where `columns[j][i]` is basis function `j` at sample `i`.
///
/// Columns are scaled to unit norm before a Householder QR; coefficients are returned
/// in the original (unscaled) basis. Returns `None` when a column vanishes.
pub fn least_squares(columns: &[Vec<f64>], y: &[f64]) -> Option<LeastSquares> {
    let n = y.len();
    let p = columns.len();
    if p == 0 || n < p || columns.iter().any(|c| c.len() != n) {
        return None;
    }
    let scales: Vec<f64> = columns
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    if scales.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
        return None;
    }
    let x = DMatrix::from_fn(n, p, |i, j| columns[j][i] / scales[j]);
    let rhs = DVector::from_column_slice(y);
    let qr = x.clone().qr();
    let (q, r) = (qr.q(), qr.r());
    let sv = r.clone().singular_values();
    let smax = sv.max();
    let smin = sv.min();
    let condition = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    if !(smin > 0.0) {
        return None;
    }
    let solve = |b: &DVector<f64>| r.solve_upper_triangular(&(q.transpose() * b));
    let mut scaled = solve(&rhs)?;
    // one step of refinement recovers the digits lost to Q's rounding
    let correction = solve(&(&rhs - &x * &scaled))?;
    scaled += correction;
    let resid = &x * &scaled - &rhs;
    let rms_residual = (resid.norm_squared() / n as f64).sqrt();
    let coefficients = scaled.iter().zip(&scales).map(|(c, s)| c / s).collect();
    Some(LeastSquares {
        coefficients,
        rms_residual,
        condition,
    })
}

/// Bisection for a sign change of `f` on `[lo, hi]`, stopping at width `xtol`.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, xtol: f64) -> f64 {
    let mut flo = f(lo);
    if flo == 0.0 {
        return lo;
    }
    while hi - lo > xtol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_root_on_either_endpoint() {
        assert_eq!(bisect(|x| x, 0.0, 1.0, 0.0), 0.0);
        assert!((bisect(|x| x - 1.0, 0.0, 1.0, 0.0) - 1.0).abs() < 1e-15);
        assert!((bisect(|x| 0.25 - x, 0.0, 1.0, 0.0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn cumulative_integral_of_cubic_is_exact() {
        let h = 0.1;
        let xs: Vec<f64> = (0..40).map(|i| -1.0 + i as f64 * h).collect();
        let f: Vec<f64> = xs.iter().map(|x| x * x * x - 2.0 * x + 0.5).collect();
        let prim = |x: f64| x.powi(4) / 4.0 - x * x + 0.5 * x;
        let origin = 13;
        let cum = cumulative_integral(&f, h, origin);
        for (i, &x) in xs.iter().enumerate() {
            let exact = prim(x) - prim(xs[origin]);
            assert!(
                (cum[i] - exact).abs() < 1e-12,
                "node {i}: {} vs {exact}",
                cum[i]
            );
        }
    }

    #[test]
    fn cumulative_integral_is_fourth_order() {
        let err = |h: f64| {
            let n = (4.0 / h).round() as usize + 1;
            let f: Vec<f64> = (0..n).map(|i| (i as f64 * h).sin()).collect();
            let cum = cumulative_integral(&f, h, 0);
            (cum[n - 1] - (1.0 - 4.0f64.cos())).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!(ratio > 14.0, "ratio {ratio}");
    }

    #[test]
    fn hermite5_reproduces_quintics() {
        let p = |x: f64| 1.0 - x + 2.0 * x.powi(3) - 0.5 * x.powi(5);
        let dp = |x: f64| -1.0 + 6.0 * x * x - 2.5 * x.powi(4);
        let ddp = |x: f64| 12.0 * x - 10.0 * x.powi(3);
        let (x0, h) = (0.3, 0.7);
        for k in 0..=10 {
            let s = k as f64 / 10.0;
            let v = hermite5(
                h,
                p(x0),
                dp(x0),
                ddp(x0),
                p(x0 + h),
                dp(x0 + h),
                ddp(x0 + h),
                s,
            );
            assert!((v - p(x0 + s * h)).abs() < 1e-13);
        }
    }

    #[test]
    fn lagrange_derivative_matches_polynomial() {
        let xs = [0.0f64, 0.5, 1.5, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| x.powi(4) - x).collect();
        let d = lagrange_derivative(&xs, &ys, 1.0);
        assert!((d - 3.0).abs() < 1e-12);
        assert!((lagrange_eval(&xs, &ys, 2.5) - (2.5f64.powi(4) - 2.5)).abs() < 1e-12);
    }

    #[test]
    fn least_squares_recovers_exact_coefficients() {
        let ts: Vec<f64> = (0..200).map(|i| 10.0 + i as f64).collect();
        let cols = vec![
            ts.iter().map(|_| 1.0).collect::<Vec<_>>(),
            ts.iter().map(|t| 1.0 / t).collect(),
            ts.iter().map(|t| t.ln() / t).collect(),
        ];
        let y: Vec<f64> = ts
            .iter()
            .map(|t| 3.0 - 2.0 / t + 0.5 * t.ln() / t)
            .collect();
        let ls = least_squares(&cols, &y).unwrap();
        assert!((ls.coefficients[0] - 3.0).abs() < 1e-10);
        assert!((ls.coefficients[1] + 2.0).abs() < 1e-9);
        assert!((ls.coefficients[2] - 0.5).abs() < 1e-9);
        assert!(ls.rms_residual < 1e-12);
    }
}
