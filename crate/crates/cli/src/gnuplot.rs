//! Plain-text gnuplot scripts over the emitted CSV files.

use std::fmt::Write as _;

/// One curve of the two-level plot: column of `μ^(α)` and the constant
/// `W^(1/2) - W^(α)` removed from it.
pub struct LevelCurve {
    pub alpha: f64,
    pub column: usize,
    pub w_difference: f64,
}

/// `μ^(1/2) - μ^(α) - (W^(1/2) - W^(α))` versus `1/t`.
pub fn two_level_plot(csv: &str, half_column: usize, curves: &[LevelCurve], t_min: f64) -> String {
    let mut s = String::new();
    writeln!(s, "# mu^(1/2) - mu^(alpha) + const versus 1/t").unwrap();
    writeln!(s, "set datafile separator \",\"").unwrap();
    writeln!(s, "set xlabel \"1/t\"").unwrap();
    writeln!(
        s,
        "set ylabel \"mu^(1/2) - mu^(alpha) - (W^(1/2) - W^(alpha))\""
    )
    .unwrap();
    writeln!(s, "set key left top").unwrap();
    writeln!(s, "file = \"{}\"", escape(csv)).unwrap();
    writeln!(s, "tmin = {t_min:.17e}").unwrap();
    let parts: Vec<String> = curves
        .iter()
        .map(|c| {
            format!(
                "file using (($1 >= tmin) ? 1/$1 : NaN):(${half_column} - ${} - ({:.17e})) \
                 with lines title \"alpha = {}\"",
                c.column, c.w_difference, c.alpha
            )
        })
        .collect();
    writeln!(s, "plot {}", parts.join(", \\\n     ")).unwrap();
    s
}

/// Constants of the reduced position and of one fitted curve.
pub struct ScaledCurve {
    pub alpha: f64,
    pub column: usize,
    pub constant: f64,
    pub offset: f64,
}

/// `t(δ_t - C)` versus `t` on a log axis, with reference lines
/// `slope·ln t + offset`.
#[allow(clippy::too_many_arguments)]
pub fn scaled_remainder_plot(
    csv: &str,
    v_c: f64,
    gamma_c: f64,
    d_prime: f64,
    slope: f64,
    window: (f64, f64),
    curves: &[ScaledCurve],
) -> String {
    let mut s = String::new();
    writeln!(s, "# t (delta_t - C) versus t").unwrap();
    writeln!(s, "set datafile separator \",\"").unwrap();
    writeln!(s, "set logscale x").unwrap();
    writeln!(s, "set xlabel \"t\"").unwrap();
    writeln!(s, "set ylabel \"t (delta_t - C)\"").unwrap();
    writeln!(s, "set key left top").unwrap();
    writeln!(s, "file = \"{}\"", escape(csv)).unwrap();
    writeln!(s, "vc = {v_c:.17e}").unwrap();
    writeln!(s, "gc = {gamma_c:.17e}").unwrap();
    writeln!(s, "dp = {d_prime:.17e}").unwrap();
    writeln!(s, "t1 = {:.17e}", window.0).unwrap();
    writeln!(s, "t2 = {:.17e}", window.1).unwrap();
    writeln!(s, "delta(mu, t) = mu - vc*t + 1.5/gc*log(t) + dp/sqrt(t)").unwrap();
    writeln!(s, "inside(t) = (t >= t1 && t <= t2) ? t : NaN").unwrap();
    writeln!(s, "set xrange [t1:t2]").unwrap();
    let mut parts = Vec::new();
    for c in curves {
        parts.push(format!(
            "file using (inside($1)):($1*(delta(${}, $1) - ({:.17e}))) with lines title \"alpha = {}\"",
            c.column, c.constant, c.alpha
        ));
        parts.push(format!(
            "{slope:.17e}*log(x) + ({:.17e}) with lines dashtype 2 title \"{slope:.3} ln t + const\"",
            c.offset
        ));
    }
    writeln!(s, "plot {}", parts.join(", \\\n     ")).unwrap();
    s
}

fn escape(path: &str) -> String {
    path.replace('\\', "\\\\").replace('"', "\\\"")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_level_script_references_columns() {
        let s = two_level_plot(
            "tr.csv",
            3,
            &[LevelCurve {
                alpha: 0.3,
                column: 2,
                w_difference: -1.25,
            }],
            10.0,
        );
        assert!(s.contains("file = \"tr.csv\""));
        assert!(s.contains("$3 - $2"));
        assert!(s.contains("alpha = 0.3"));
    }

    #[test]
    fn scaled_script_has_reference_line() {
        let s = scaled_remainder_plot(
            "a \"b\".csv",
            2.0,
            1.0,
            5.3,
            0.946,
            (1000.0, 85000.0),
            &[ScaledCurve {
                alpha: 0.5,
                column: 2,
                constant: 0.1,
                offset: -2.0,
            }],
        );
        assert!(s.contains("set logscale x"));
        assert!(s.contains("*log(x)") && s.contains("0.946 ln t"));
        assert!(s.contains("a \\\"b\\\".csv"));
    }
}
