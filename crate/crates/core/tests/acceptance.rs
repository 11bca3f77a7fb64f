//! One PASS / FAIL / SKIP line per acceptance criterion.
//!
//! The long finite-time fit criterion reads a finished `t = 85000` trace file
//! named by `FRONTLAB_FULL_TRACE`. With `FRONTLAB_ACCEPTANCE_STRICT=1` any FAIL
//! makes the process exit non-zero.

use frontlab_core::asymptotics::{self, FitModel};
use frontlab_core::dispersion::{CriticalPoint, DispersionModel};
use frontlab_core::lattice_sim::{self, FrontState, LevelTrace, SimParams};
use frontlab_core::solvable::{self, SolvableIC};
use frontlab_core::wave::{self, WaveConfig, WaveProfile};
use std::f64::consts::{LN_2, PI};
use std::time::{Duration, Instant};

#[derive(Clone, Copy, PartialEq)]
enum Verdict {
    Pass,
    Fail,
    Skip,
}

struct Report {
    lines: Vec<(Verdict, String)>,
}

impl Report {
    fn record(
        &mut self,
        name: &str,
        ok: bool,
        budget: Duration,
        elapsed: Duration,
        detail: String,
    ) {
        let in_time = elapsed <= budget;
        let v = if ok && in_time {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        let tag = if v == Verdict::Pass { "PASS" } else { "FAIL" };
        let timing = format!(
            "{:.1}s of {:.0}s{}",
            elapsed.as_secs_f64(),
            budget.as_secs_f64(),
            if in_time { "" } else { " over budget" }
        );
        let line = format!("{tag} {name}: {detail} [{timing}]");
        println!("{line}");
        self.lines.push((v, line));
    }

    fn skip(&mut self, name: &str, why: &str) {
        let line = format!("SKIP {name}: {why}");
        println!("{line}");
        self.lines.push((Verdict::Skip, line));
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn lattice_cp() -> CriticalPoint {
    DispersionModel::lattice(0.1, 0.002)
        .unwrap()
        .critical_point(1e-12)
        .unwrap()
}

fn dispersion_exactness(r: &mut Report) {
    let start = Instant::now();
    let cp = lattice_cp();
    let dv = (cp.v_c - 1.99684036732).abs();
    let dg = (cp.gamma_c - 1.00074727697).abs();
    r.record(
        "dispersion exactness",
        dv <= 1e-9 && dg <= 1e-9,
        Duration::from_secs(1),
        start.elapsed(),
        format!(
            "v_c = {:.12} (Δ {dv:.1e}), γ_c = {:.12} (Δ {dg:.1e})",
            cp.v_c, cp.gamma_c
        ),
    );
}

fn continuum_constants(r: &mut Report) {
    let start = Instant::now();
    let ec = DispersionModel::Continuum
        .critical_point(1e-12)
        .unwrap()
        .expansion_coefficients()
        .unwrap();
    let dd = (ec.d_prime - 3.0 * PI.sqrt()).abs();
    let df = (ec.f_prime - 9.0 / 8.0 * (5.0 - 6.0 * LN_2)).abs();
    r.record(
        "continuum constants",
        dd <= 1e-12 && df <= 1e-12,
        Duration::from_secs(1),
        start.elapsed(),
        format!(
            "d' = {:.15} (Δ {dd:.1e}), f' = {:.15} (Δ {df:.1e})",
            ec.d_prime, ec.f_prime
        ),
    );
}

struct WaveResiduals {
    ode: f64,
    slope: f64,
    phi_ode: f64,
    phi_slope: f64,
}

fn wave_residuals(wp: &WaveProfile, pt: &wave::PhiTable) -> WaveResiduals {
    WaveResiduals {
        ode: max_abs(&wp.ode_residuals()),
        slope: max_abs(&wp.slope_residuals()),
        phi_ode: max_abs(&pt.ode_residuals(wp)),
        phi_slope: max_abs(&pt.slope_residuals(wp)),
    }
}

fn wave_suite(r: &mut Report) {
    let start = Instant::now();
    let coarse_w = wave::solve_wave(&WaveConfig::default().with_spacing(0.01)).unwrap();
    let coarse_p = wave::phi(&coarse_w).unwrap();
    let wp = wave::solve_wave(&WaveConfig::default()).unwrap();
    let pt = wave::phi(&wp).unwrap();
    let c = wave_residuals(&coarse_w, &coarse_p);
    let f = wave_residuals(&wp, &pt);
    let o = wp.origin_index();
    let gains = [
        c.ode / f.ode,
        c.slope / f.slope,
        c.phi_ode / f.phi_ode,
        c.phi_slope / f.phi_slope,
    ];
    let min_gain = gains.iter().cloned().fold(f64::INFINITY, f64::min);
    let ok = wp.omega[o] == 0.5
        && f.ode < 1e-8
        && f.phi_ode < 1e-6
        && pt.phi[o] == 0.0
        && pt.phi[0].abs() < 1e-6
        && min_gain >= 8.0;
    r.record(
        "wave suite",
        ok,
        Duration::from_secs(30),
        start.elapsed(),
        format!(
            "ω(0) = {}, ODE residual {:.1e}, Φ residual {:.1e}, Φ(0) = {}, |Φ(x_lo)| = {:.1e}, \
             worst gain 0.01→0.005 = {min_gain:.1}",
            wp.omega[o],
            f.ode,
            f.phi_ode,
            pt.phi[o],
            pt.phi[0].abs()
        ),
    );
}

fn solvable_oracles(r: &mut Report) {
    let start = Instant::now();
    let ic = SolvableIC::zero();
    let exact = solvable::exact_cascade(&ic, 1.0, 20).unwrap();
    let ode = solvable::ode_front(&ic, 1.0, 20, 5e-4).unwrap();
    let t1 = (exact.at(1) - LN_2).abs();
    let t2 = (exact.at(2) - (LN_2 - LN_2.ln())).abs();
    let gap = (1..=20)
        .map(|x| (exact.at(x) - ode.at(x)).abs())
        .fold(0.0, f64::max);
    r.record(
        "solvable oracle equivalence",
        t1 <= 1e-10 && t2 <= 1e-10 && gap <= 1e-8,
        Duration::from_secs(60),
        start.elapsed(),
        format!("|t1 - ln 2| = {t1:.1e}, |t2 - (ln 2 - ln ln 2)| = {t2:.1e}, max cascade/ODE gap {gap:.1e}"),
    );
}

fn solvable_expansion(r: &mut Report) {
    let start = Instant::now();
    let cp = DispersionModel::solvable(1.0)
        .unwrap()
        .critical_point(1e-12)
        .unwrap();
    let ec = cp.expansion_coefficients().unwrap();
    let rt = solvable::ode_front(&SolvableIC::zero(), 1.0, 10_000, 5e-4).unwrap();
    let fixed = solvable::fit_tx_expansion(&rt, &cp, (1000, 10_000), false).unwrap();
    let free = solvable::fit_tx_expansion(&rt, &cp, (1000, 10_000), true).unwrap();
    let d_rel = (fixed.d / ec.d - 1.0).abs();
    let k_rel = (free.log_coefficient / 1.5 - 1.0).abs();
    r.record(
        "solvable expansion",
        d_rel <= 0.03 && k_rel <= 0.02,
        Duration::from_secs(30 * 60),
        start.elapsed(),
        format!(
            "d = {:.5} vs {:.5} ({:.2}%), ln-x coefficient {:.6} ({:.3}%)",
            fixed.d,
            ec.d,
            100.0 * d_rel,
            free.log_coefficient,
            100.0 * k_rel
        ),
    );
}

const LADDER: [f64; 4] = [250.0, 500.0, 1000.0, 2000.0];

struct DeskRun {
    traces: Vec<LevelTrace>,
    snapshots: Vec<FrontState>,
    elapsed: Duration,
}

fn desk_run(cp: &CriticalPoint) -> DeskRun {
    let start = Instant::now();
    // a short tail past t = 2000 gives η a centred stencil at the last rung
    let p = SimParams::new(0.1, 0.002, cp.v_c, 2041.0, vec![0.3, 0.5, 0.7]);
    let targets: Vec<u64> = LADDER.iter().map(|t| (t / p.b).round() as u64).collect();
    let mut snapshots = Vec::new();
    let traces = lattice_sim::run_with(&p, |s| {
        if targets.contains(&s.steps) {
            snapshots.push(s.clone());
        }
        Ok(())
    })
    .unwrap();
    DeskRun {
        traces,
        snapshots,
        elapsed: start.elapsed(),
    }
}

fn truncate(tr: &LevelTrace, t_end: f64) -> LevelTrace {
    let n = tr.times.partition_point(|&t| t <= t_end + 1e-9);
    LevelTrace {
        alpha: tr.alpha,
        times: tr.times[..n].to_vec(),
        mu: tr.mu[..n].to_vec(),
        eta: None,
    }
}

fn conjecture1(r: &mut Report, run: &DeskRun, wp: &WaveProfile) {
    let start = Instant::now();
    let a = truncate(&run.traces[0], 2000.0);
    let b = truncate(&run.traces[2], 2000.0);
    let c = asymptotics::conjecture1_check(&a, &b, wp, (200.0, 2000.0)).unwrap();
    r.record(
        "two-level offset (desk scale)",
        c.r_squared_window >= 0.99 && c.c0.abs() <= 2e-2,
        Duration::from_secs(10 * 60),
        run.elapsed + start.elapsed(),
        format!(
            "(0.3, 0.7): c0 = {:.3e}, c1 = {:.3}, R² = {:.6} on [200, 2000] (upper-half fit R² {:.7})",
            c.c0, c.c1, c.r_squared_window, c.r_squared_fit
        ),
    );
}

fn theorem2(r: &mut Report, run: &DeskRun, cp: &CriticalPoint, wp: &WaveProfile) {
    let start = Instant::now();
    let pt = wave::phi(wp).unwrap();
    let mut all_ok = true;
    let mut details = Vec::new();
    for tr in &run.traces {
        let alpha = tr.alpha;
        let eta = lattice_sim::eta_estimate(tr, cp.v_c).unwrap();
        let mut samples = Vec::new();
        for s in &run.snapshots {
            let i = tr
                .times
                .iter()
                .position(|&t| (t - s.t).abs() < 1e-9)
                .unwrap();
            let noise = asymptotics::eta_noise_floor(&tr.times, &eta, i).unwrap();
            samples.push(
                asymptotics::theorem2_check(s, eta[i], noise, wp, &pt, alpha, 3.0, 61).unwrap(),
            );
        }
        let rep = asymptotics::theorem2_report(alpha, samples);
        let ok = rep.non_increasing && rep.max_abs_at_zero <= 1e-10;
        all_ok &= ok;
        let ds: Vec<String> = rep
            .samples
            .iter()
            .map(|s| format!("{:.3e}", s.distance))
            .collect();
        let de: Vec<String> = rep
            .samples
            .iter()
            .map(|s| format!("{:.3e}", s.distance * s.eta))
            .collect();
        details.push(format!(
            "α={alpha}: distances [{}], distance·η [{}], |x=0| ≤ {:.1e}",
            ds.join(", "),
            de.join(", "),
            rep.max_abs_at_zero
        ));
    }
    r.record(
        "profile correction distance",
        all_ok,
        Duration::from_secs(10 * 60),
        start.elapsed(),
        details.join("; "),
    );
}

fn sample(f: impl Fn(f64) -> f64, t0: f64, t1: f64, dt: f64) -> Vec<f64> {
    let n = ((t1 - t0) / dt).round() as usize + 1;
    (0..n).map(|i| f(t0 + i as f64 * dt)).collect()
}

/// `R` at `ts` on the `dt` grid and on its tenfold refinement.
fn lemma_pair(
    f: &dyn Fn(f64) -> f64,
    t0: f64,
    t1: f64,
    dt: f64,
    ts: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let r = asymptotics::lemma_oracle(&sample(f, t0, t1, dt), t0, dt, 1.0, ts).unwrap();
    let fine =
        asymptotics::lemma_oracle(&sample(f, t0, t1, dt / 10.0), t0, dt / 10.0, 1.0, ts).unwrap();
    (r, fine)
}

fn lemma(r: &mut Report) {
    let start = Instant::now();
    let mut parts = Vec::new();
    let mut ok = true;

    // φ → 0
    let ts: Vec<f64> = (1..=20).map(|k| 100.0 * k as f64).collect();
    let vanish = |t: f64| 1.0 / (1.0 + t).ln();
    let (c, f) = lemma_pair(&vanish, 1.0, 2000.0, 0.01, &ts);
    let agree = c
        .iter()
        .zip(&f)
        .all(|(a, b)| (a - b).abs() <= 1e-6 * b.abs());
    // R decreases and tracks φ/β, so it vanishes with φ
    let tracking = ts
        .iter()
        .zip(&f)
        .map(|(&t, v)| (v / vanish(t) - 1.0).abs())
        .fold(0.0, f64::max);
    let decays = f.windows(2).all(|w| w[1] < w[0]) && tracking <= 0.01;
    ok &= agree && decays;
    parts.push(format!(
        "1/ln(1+t): R(100) = {:.4}, R(2000) = {:.4}, max |R/φ - 1| = {tracking:.1e}",
        f[0],
        f[f.len() - 1]
    ));

    // φ = t^{-γ}
    let ts: Vec<f64> = (10..=1000).step_by(10).map(|t| t as f64).collect();
    for gamma in [0.5, 1.0] {
        let power = move |t: f64| t.powf(-gamma);
        let (c, f) = lemma_pair(&power, 1.0, 1000.0, 0.01, &ts);
        let agree = c
            .iter()
            .zip(&f)
            .all(|(a, b)| (a - b).abs() <= 1e-6 * b.abs());
        let sup = ts
            .iter()
            .zip(&f)
            .map(|(t, v)| t.powf(gamma) * v)
            .fold(0.0, f64::max);
        let tight = gamma != 0.5 || (sup - 1.0).abs() <= 0.1;
        ok &= agree && sup.is_finite() && tight;
        parts.push(format!("t^-{gamma}: sup t^γ R = {sup:.4}"));
    }

    // tail-integrable: φ = d/dt[sin(t²)/√t] grows, its tail integral is O(t^{-1/2})
    let osc = |t: f64| 2.0 * t.sqrt() * (t * t).cos() - 0.5 * (t * t).sin() / t.powf(1.5);
    let ts: Vec<f64> = (0..=300).map(|k| 10.0 + 0.1 * k as f64).collect();
    let (c, f) = lemma_pair(&osc, 1.0, 40.0, 2e-4, &ts);
    let agree = c.iter().zip(&f).all(|(a, b)| (a - b).abs() <= 1e-3);
    let sup = ts
        .iter()
        .zip(&f)
        .map(|(t, v)| t.sqrt() * v.abs())
        .fold(0.0, f64::max);
    ok &= agree && sup < 1.5;
    parts.push(format!("d/dt[sin t²/√t]: sup t^½|R| = {sup:.4}"));

    r.record(
        "filtered convolution oracle",
        ok,
        Duration::from_secs(10),
        start.elapsed(),
        parts.join(", "),
    );
}

/// Levels fitted on the full-length run.
const FULL_RUN_ALPHAS: [f64; 5] = [0.01, 0.3, 0.5, 0.7, 0.99];

fn full_run_fits(r: &mut Report) {
    let name = "finite-time f' fits (extended)";
    let Ok(path) = std::env::var("FRONTLAB_FULL_TRACE") else {
        r.skip(
            name,
            "set FRONTLAB_FULL_TRACE to a t = 85000 `simulate` CSV to evaluate",
        );
        return;
    };
    let start = Instant::now();
    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) => {
            r.record(
                name,
                false,
                Duration::from_secs(600),
                start.elapsed(),
                format!("{path}: {e}"),
            );
            return;
        }
    };
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let rows: Vec<Vec<f64>> = lines
        .filter(|l| !l.is_empty())
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    let col = |name: &str| header.iter().position(|h| *h == name);
    let cp = lattice_cp();
    let ec = cp.expansion_coefficients().unwrap();
    let t_last = rows.last().map_or(0.0, |r| r[0]);
    if t_last < 85000.0 - 1.0 {
        r.record(
            name,
            false,
            Duration::from_secs(600),
            start.elapsed(),
            format!("trace ends at t = {t_last}"),
        );
        return;
    }
    let mut ok = true;
    let mut parts = Vec::new();
    for alpha in FULL_RUN_ALPHAS {
        let Some(j) = col(&format!("mu_{alpha}")) else {
            ok = false;
            parts.push(format!("no column for α = {alpha}"));
            continue;
        };
        let tr = LevelTrace {
            alpha,
            times: rows.iter().map(|r| r[0]).collect(),
            mu: rows.iter().map(|r| r[j]).collect(),
            eta: None,
        };
        let ds = asymptotics::delta_series(&tr, &cp, &ec).unwrap();
        let fp = |m: FitModel, lo: f64| asymptotics::fit(&ds, m, (lo, 85000.0)).unwrap().f_prime();
        let c = fp(FitModel::C, 1000.0);
        let a: Vec<f64> = [100.0, 1000.0, 10000.0]
            .iter()
            .map(|&lo| fp(FitModel::A, lo))
            .collect();
        let b: Vec<f64> = [100.0, 1000.0, 10000.0]
            .iter()
            .map(|&lo| fp(FitModel::B, lo))
            .collect();
        let c_ok = (0.943 - 0.02..=0.945 + 0.02).contains(&c);
        // (a) is biased high and drifts down as the window starts later;
        // (b) closes in on (c) as the window starts later
        let a_ok = a[0] > a[1] && a[1] > a[2] && a[2] > c;
        let b_ok = (b[2] - c).abs() < (b[0] - c).abs();
        ok &= c_ok && a_ok && b_ok;
        // reported only: from 10000 on, (c) is at the mercy of the sampling
        let (c_early, c_late) = (fp(FitModel::C, 100.0), fp(FitModel::C, 10000.0));
        parts.push(format!(
            "α={alpha}: (c) {c:.4} [from 100: {c_early:.4}, from 10000: {c_late:.4}]; \
             (a) {:.3}/{:.3}/{:.3}; (b) {:.3}/{:.3}/{:.3}",
            a[0], a[1], a[2], b[0], b[1], b[2]
        ));
    }
    r.record(
        name,
        ok,
        Duration::from_secs(600),
        start.elapsed(),
        parts.join("; "),
    );
}

fn main() {
    // `cargo test` passes harness flags; a name filter that excludes us is honoured
    let args: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    if !args.is_empty() && !args.iter().any(|a| "acceptance".contains(a.as_str())) {
        return;
    }
    let mut r = Report { lines: Vec::new() };
    dispersion_exactness(&mut r);
    continuum_constants(&mut r);
    wave_suite(&mut r);
    solvable_oracles(&mut r);
    solvable_expansion(&mut r);
    let cp = lattice_cp();
    let wp = wave::solve_wave(&WaveConfig::default()).unwrap();
    let run = desk_run(&cp);
    conjecture1(&mut r, &run, &wp);
    theorem2(&mut r, &run, &cp, &wp);
    lemma(&mut r);
    full_run_fits(&mut r);

    let count = |v| r.lines.iter().filter(|(x, _)| *x == v).count();
    let (p, f, s) = (
        count(Verdict::Pass),
        count(Verdict::Fail),
        count(Verdict::Skip),
    );
    println!("acceptance: {p} passed, {f} failed, {s} skipped");
    let strict = std::env::var("FRONTLAB_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && f > 0 {
        std::process::exit(1);
    }
}
