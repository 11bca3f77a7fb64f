//! Subcommand bodies. Every domain failure is tagged with the module that
//! raised it.

use crate::gnuplot::{self, LevelCurve, ScaledCurve};
use crate::output::{self, label, write_csv, write_manifest, ManifestSpec, Table};
use crate::{
    Conj1Args, DispersionArgs, FitArgs, FitModelArg, ModelKind, SimulateArgs, SolvableArgs,
    SolvableMethod, Thm2Args, WaveArgs, WORKERS_ENV,
};
use anyhow::{anyhow, bail, Context};
use frontlab_core::asymptotics::{self, FitModel, FitResult};
use frontlab_core::dispersion::{conjectured_log_coefficient, CriticalPoint, DispersionModel};
use frontlab_core::lattice_sim::{self, InitialCondition, LevelTrace, SimParams};
use frontlab_core::solvable;
use frontlab_core::wave::{self, WaveConfig, WaveProfile};
use serde::Serialize;
use serde_json::json;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

const CRITICAL_TOL: f64 = 1e-12;
const INTERPOLATION_NOTE: &str =
    "level positions: cubic in x through ln h at four cells, inverted by bisection";

pub enum Failure {
    Usage(String),
    Domain(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Domain(e)
    }
}

type Outcome = Result<(), Failure>;

trait InModule<T> {
    fn module(self, name: &str) -> anyhow::Result<T>;
}

impl<T, E: std::fmt::Display> InModule<T> for Result<T, E> {
    fn module(self, name: &str) -> anyhow::Result<T> {
        self.map_err(|e| anyhow!("{name}: {e}"))
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn print_json<T: Serialize>(value: &T) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn lattice_point(a: f64, b: f64) -> anyhow::Result<CriticalPoint> {
    DispersionModel::lattice(a, b)
        .and_then(|m| m.critical_point(CRITICAL_TOL))
        .module("dispersion")
}

fn default_wave() -> anyhow::Result<WaveProfile> {
    wave::solve_wave(&WaveConfig::default()).module("wave")
}

#[derive(Serialize)]
struct DispersionReport {
    model: DispersionModel,
    gamma_c: f64,
    v_c: f64,
    v2: f64,
    v3: f64,
    d: f64,
    d_prime: f64,
    f: f64,
    f_prime: f64,
    g_fkpp: f64,
}

pub fn dispersion(args: &DispersionArgs) -> Outcome {
    let model = match args.model {
        ModelKind::Continuum => {
            if args.a.is_some() || args.b.is_some() {
                return Err(usage("the continuum model takes neither --a nor --b"));
            }
            DispersionModel::Continuum
        }
        ModelKind::Lattice => match (args.a, args.b) {
            (Some(a), Some(b)) => DispersionModel::lattice(a, b).module("dispersion")?,
            _ => return Err(usage("the lattice model needs both --a and --b")),
        },
        ModelKind::Solvable => match (args.a, args.b) {
            (Some(a), None) => DispersionModel::solvable(a).module("dispersion")?,
            (None, _) => return Err(usage("the solvable model needs --a")),
            (_, Some(_)) => return Err(usage("the solvable model takes no --b")),
        },
    };
    let cp = model.critical_point(CRITICAL_TOL).module("dispersion")?;
    let ec = cp.expansion_coefficients().module("dispersion")?;
    let r = DispersionReport {
        model,
        gamma_c: cp.gamma_c,
        v_c: cp.v_c,
        v2: cp.v2,
        v3: cp.v3,
        d: ec.d,
        d_prime: ec.d_prime,
        f: ec.f,
        f_prime: ec.f_prime,
        g_fkpp: ec.g_fkpp,
    };
    if args.json {
        print_json(&r)?;
    } else {
        let rows = [
            ("γ_c", r.gamma_c),
            ("v_c", r.v_c),
            ("v''", r.v2),
            ("v'''", r.v3),
            ("d", r.d),
            ("d'", r.d_prime),
            ("f'", r.f_prime),
            ("g", r.g_fkpp),
        ];
        for (name, v) in rows {
            println!("{:<5}= {:.14}", name, v);
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct LevelInfo {
    alpha: f64,
    w: f64,
    phi_over_omega_p: f64,
}

pub fn wave(args: &WaveArgs) -> Outcome {
    let start = Instant::now();
    let (x_lo, x_hi, h) = args.grid;
    let cfg = WaveConfig {
        x_lo,
        x_hi,
        h,
        ..WaveConfig::default()
    };
    let wp = wave::solve_wave(&cfg).module("wave")?;
    let pt = wave::phi(&wp).module("wave")?;
    let levels = args
        .alpha
        .iter()
        .map(|&alpha| {
            let (w, ratio) = pt.level_ratio(&wp, alpha)?;
            Ok(LevelInfo {
                alpha,
                w,
                phi_over_omega_p: ratio,
            })
        })
        .collect::<Result<Vec<_>, wave::WaveError>>()
        .module("wave")?;
    let header: Vec<String> = ["x", "omega", "omega_prime", "phi"]
        .map(String::from)
        .to_vec();
    let rows = (0..wp.len()).map(|i| vec![wp.x(i), wp.omega[i], wp.omega_p[i], pt.phi[i]]);
    write_csv(&args.out, &header, rows)?;
    let max_abs = |v: Vec<f64>| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let summary = json!({
        "grid": { "x_lo": x_lo, "x_hi": x_hi, "h": h },
        "levels": levels,
        "max_wave_residual": max_abs(wp.ode_residuals()),
        "max_phi_residual": max_abs(pt.ode_residuals(&wp)),
        "phi_at_x_lo": pt.phi[0],
    });
    write_manifest(ManifestSpec {
        subcommand: "wave",
        params: serde_json::to_value(args).map_err(anyhow::Error::from)?,
        runtime: start.elapsed(),
        notes: vec![],
        inputs: &[],
        outputs: &[&args.out],
    })?;
    print_json(&summary)?;
    Ok(())
}

fn parse_ic(s: &str) -> Result<InitialCondition, Failure> {
    if s == "step" {
        return Ok(InitialCondition::Step);
    }
    let bad = || {
        usage(format!(
            "--ic must be `step` or `exptail:A:kappa`, got {s:?}"
        ))
    };
    let rest = s.strip_prefix("exptail:").ok_or_else(bad)?;
    let (a, k) = rest.split_once(':').ok_or_else(bad)?;
    Ok(InitialCondition::ExpTail {
        amplitude: a.parse().map_err(|_| bad())?,
        kappa: k.parse().map_err(|_| bad())?,
    })
}

/// Worker count from the environment cap, or the machine's parallelism.
fn worker_cap() -> anyhow::Result<usize> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => {
            let n: usize = v
                .parse()
                .with_context(|| format!("{WORKERS_ENV}={v:?} is not a positive integer"))?;
            if n == 0 {
                bail!("{WORKERS_ENV} must be at least 1");
            }
            Ok(n)
        }
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}_{suffix}.{}", ext.to_string_lossy()),
        None => format!("{stem}_{suffix}"),
    };
    path.with_file_name(name)
}

#[derive(Serialize)]
struct ResolvedSim<'a> {
    a: f64,
    b: f64,
    t_max: f64,
    alphas: &'a [f64],
    sample_stride: usize,
    v_c: f64,
    v_ref: f64,
    snap_threshold: f64,
    initial: &'a InitialCondition,
}

pub fn simulate(args: &SimulateArgs) -> Outcome {
    let initial = parse_ic(&args.ic)?;
    if args.b.is_empty() {
        return Err(usage("--b needs at least one value"));
    }
    if args.gnuplot.is_some() && !args.alphas.contains(&0.5) {
        return Err(usage(
            "--gnuplot plots against μ^(1/2); include 0.5 in --alphas",
        ));
    }
    let wp = match args.gnuplot {
        Some(_) => Some(default_wave()?),
        None => None,
    };
    let jobs: Vec<(f64, PathBuf, Option<PathBuf>)> = if args.b.len() == 1 {
        vec![(args.b[0], args.out.clone(), args.gnuplot.clone())]
    } else {
        args.b
            .iter()
            .map(|&b| {
                let tag = format!("b{}", label(b));
                let gp = args.gnuplot.as_ref().map(|g| with_suffix(g, &tag));
                (b, with_suffix(&args.out, &tag), gp)
            })
            .collect()
    };
    let workers = worker_cap()?.min(jobs.len());
    let run_one = |(b, out, gp): &(f64, PathBuf, Option<PathBuf>)| -> anyhow::Result<()> {
        simulate_one(args, &initial, *b, out, gp.as_deref(), wp.as_ref())
    };
    let mut results: Vec<anyhow::Result<()>> = Vec::with_capacity(jobs.len());
    for chunk in jobs.chunks(workers) {
        std::thread::scope(|s| {
            let handles: Vec<_> = chunk.iter().map(|j| s.spawn(|| run_one(j))).collect();
            for h in handles {
                results.push(h.join().unwrap_or_else(|_| Err(anyhow!("worker panicked"))));
            }
        });
    }
    results.into_iter().collect::<anyhow::Result<Vec<()>>>()?;
    Ok(())
}

fn simulate_one(
    args: &SimulateArgs,
    initial: &InitialCondition,
    b: f64,
    out: &Path,
    gnuplot_path: Option<&Path>,
    wp: Option<&WaveProfile>,
) -> anyhow::Result<()> {
    let start = Instant::now();
    let cp = lattice_point(args.a, b)?;
    let v_ref = args.v_ref.unwrap_or(cp.v_c);
    let mut params = SimParams::new(args.a, b, cp.v_c, args.tmax, args.alphas.clone());
    params.sample_stride = args.stride;
    params.initial = *initial;
    let traces = lattice_sim::run(&params).module("lattice_sim")?;
    let n = traces[0].times.len();
    let etas: Vec<Vec<f64>> = traces
        .iter()
        .map(|tr| {
            if n >= 3 {
                lattice_sim::eta_estimate(tr, v_ref).module("lattice_sim")
            } else {
                Ok(vec![f64::NAN; n])
            }
        })
        .collect::<anyhow::Result<_>>()?;
    let mut header = vec!["t".to_string()];
    header.extend(args.alphas.iter().map(|a| format!("mu_{}", label(*a))));
    header.extend(args.alphas.iter().map(|a| format!("eta_{}", label(*a))));
    let rows = (0..n).map(|i| {
        let mut row = vec![traces[0].times[i]];
        row.extend(traces.iter().map(|tr| tr.mu[i]));
        row.extend(etas.iter().map(|e| e[i]));
        row
    });
    write_csv(out, &header, rows)?;
    let mut outputs: Vec<&Path> = vec![out];
    if let (Some(gp), Some(wp)) = (gnuplot_path, wp) {
        let col = |alpha: f64| 2 + args.alphas.iter().position(|&a| a == alpha).unwrap();
        let w_half = wp.level_position(0.5).module("wave")?;
        let curves = args
            .alphas
            .iter()
            .filter(|&&a| a != 0.5)
            .map(|&alpha| {
                Ok(LevelCurve {
                    alpha,
                    column: col(alpha),
                    w_difference: w_half - wp.level_position(alpha)?,
                })
            })
            .collect::<Result<Vec<_>, wave::WaveError>>()
            .module("wave")?;
        let script = gnuplot::two_level_plot(&out.display().to_string(), col(0.5), &curves, 10.0);
        fs::write(gp, script).with_context(|| format!("writing {}", gp.display()))?;
        outputs.push(gp);
    }
    let resolved = ResolvedSim {
        a: args.a,
        b,
        t_max: args.tmax,
        alphas: &args.alphas,
        sample_stride: args.stride,
        v_c: cp.v_c,
        v_ref,
        snap_threshold: params.snap_threshold,
        initial,
    };
    write_manifest(ManifestSpec {
        subcommand: "simulate",
        params: serde_json::to_value(&resolved)?,
        runtime: start.elapsed(),
        notes: vec![INTERPOLATION_NOTE.to_string()],
        inputs: &[],
        outputs: &outputs,
    })?;
    Ok(())
}

#[derive(Serialize)]
struct SolvableReport {
    x_max: usize,
    fit: Option<solvable::TxFit>,
    theory_d: f64,
    theory_f: f64,
}

pub fn solvable(args: &SolvableArgs) -> Outcome {
    let start = Instant::now();
    let ic = solvable::SolvableIC::zero();
    let rt = match args.method {
        SolvableMethod::Ode => solvable::ode_front(&ic, args.a, args.xmax, args.dt),
        SolvableMethod::Cascade => solvable::exact_cascade(&ic, args.a, args.xmax),
    }
    .module("solvable")?;
    let header = vec!["x".to_string(), "t_x".to_string()];
    write_csv(
        &args.out,
        &header,
        (1..=rt.x_max()).map(|x| vec![x as f64, rt.at(x)]),
    )?;
    write_manifest(ManifestSpec {
        subcommand: "solvable",
        params: serde_json::to_value(args).map_err(anyhow::Error::from)?,
        runtime: start.elapsed(),
        notes: vec![],
        inputs: &[],
        outputs: &[&args.out],
    })?;
    let cp = DispersionModel::solvable(args.a)
        .and_then(|m| m.critical_point(CRITICAL_TOL))
        .module("dispersion")?;
    let ec = cp.expansion_coefficients().module("dispersion")?;
    let fit = match args.fit {
        Some(range) => {
            Some(solvable::fit_tx_expansion(&rt, &cp, range, args.free_log).module("solvable")?)
        }
        None => None,
    };
    let report = SolvableReport {
        x_max: rt.x_max(),
        fit,
        theory_d: ec.d,
        theory_f: ec.f,
    };
    if args.json {
        print_json(&report)?;
    } else if let Some(f) = &report.fit {
        println!("{:<6}{:>20}{:>20}", "", "fitted", "theory");
        println!("{:<6}{:>20.12}{:>20}", "k", f.log_coefficient, "1.5");
        println!("{:<6}{:>20.12}{:>20}", "c", f.c, "-");
        println!("{:<6}{:>20.12}{:>20.12}", "d", f.d, report.theory_d);
        println!("{:<6}{:>20.12}{:>20.12}", "f", f.f, report.theory_f);
        println!("{:<6}{:>20.12}{:>20}", "e", f.e, "-");
        println!(
            "rms {:.3e}  condition {:.3e}  points {}",
            f.rms_residual, f.condition, f.points
        );
    } else {
        println!("wrote {} reach times to {}", rt.x_max(), args.out.display());
    }
    Ok(())
}

/// Level traces from a `simulate` CSV.
fn read_traces(table: &Table, alphas: Option<&[f64]>) -> anyhow::Result<Vec<(usize, LevelTrace)>> {
    let times = table.column("t").context("input has no `t` column")?;
    let mut out = Vec::new();
    for (j, name) in table.header.iter().enumerate() {
        let Some(tag) = name.strip_prefix("mu_") else {
            continue;
        };
        let alpha: f64 = tag
            .parse()
            .with_context(|| format!("column {name:?} does not name a level"))?;
        if let Some(want) = alphas {
            if !want.contains(&alpha) {
                continue;
            }
        }
        out.push((
            j + 1,
            LevelTrace {
                alpha,
                times: times.clone(),
                mu: table.rows.iter().map(|r| r[j]).collect(),
                eta: None,
            },
        ));
    }
    if let Some(want) = alphas {
        for a in want {
            if !out.iter().any(|(_, t)| t.alpha == *a) {
                bail!("input has no column mu_{}", label(*a));
            }
        }
    }
    if out.is_empty() {
        bail!("input has no μ columns");
    }
    Ok(out)
}

fn lattice_params_for(args: &FitArgs) -> anyhow::Result<(f64, f64)> {
    let from_manifest = || -> anyhow::Result<(f64, f64)> {
        let m = output::read_manifest(&output::manifest_path(&args.input))?;
        let get = |k: &str| {
            m.params
                .get(k)
                .and_then(|v| v.as_f64())
                .with_context(|| format!("manifest has no numeric `{k}`"))
        };
        Ok((get("a")?, get("b")?))
    };
    match (args.a, args.b) {
        (Some(a), Some(b)) => Ok((a, b)),
        (a, b) => {
            let (ma, mb) = from_manifest()
                .context("lattice parameters: pass --a and --b or keep the input manifest")?;
            Ok((a.unwrap_or(ma), b.unwrap_or(mb)))
        }
    }
}

pub fn fit(args: &FitArgs) -> Outcome {
    let start = Instant::now();
    let table = Table::read(&args.input)?;
    let traces = read_traces(&table, args.alphas.as_deref())?;
    let (a, b) = lattice_params_for(args)?;
    let cp = lattice_point(a, b)?;
    let ec = cp.expansion_coefficients().module("dispersion")?;
    let model = match args.model {
        FitModelArg::A => FitModel::A,
        FitModelArg::B => FitModel::B,
        FitModelArg::C => FitModel::C,
    };
    let mut fits: Vec<(usize, FitResult)> = Vec::new();
    for (col, tr) in &traces {
        let ds = asymptotics::delta_series(tr, &cp, &ec).module("asymptotics")?;
        fits.push((
            *col,
            asymptotics::fit(&ds, model, args.window).module("asymptotics")?,
        ));
    }
    if args.json {
        print_json(&fits.iter().map(|(_, f)| f).collect::<Vec<_>>())?;
    } else {
        let names = model.names();
        print!("{:<8}", "alpha");
        for n in names {
            print!("{n:>22}");
        }
        println!("{:>12}{:>12}", "rms", "cond");
        for (_, f) in &fits {
            print!("{:<8}", label(f.alpha));
            for c in &f.coefficients {
                print!("{c:>22.12}");
            }
            println!("{:>12.3e}{:>12.3e}", f.rms_residual, f.condition);
        }
    }
    if let Some(gp) = &args.gnuplot {
        let curves: Vec<ScaledCurve> = fits
            .iter()
            .map(|(col, f)| ScaledCurve {
                alpha: f.alpha,
                column: *col,
                constant: f.constant(),
                offset: f.coefficients[2],
            })
            .collect();
        let window = fits[0].1.window;
        let script = gnuplot::scaled_remainder_plot(
            &args.input.display().to_string(),
            cp.v_c,
            cp.gamma_c,
            ec.d_prime,
            conjectured_log_coefficient(),
            window,
            &curves,
        );
        fs::write(gp, script).with_context(|| format!("writing {}", gp.display()))?;
        write_manifest(ManifestSpec {
            subcommand: "fit",
            params: json!({ "args": args, "lattice": { "a": a, "b": b } }),
            runtime: start.elapsed(),
            notes: vec![],
            inputs: &[&args.input],
            outputs: &[gp],
        })?;
    }
    Ok(())
}

pub fn conj1(args: &Conj1Args) -> Outcome {
    let start = Instant::now();
    if args.alphas.len() != 2 {
        return Err(usage("--alphas takes exactly two levels"));
    }
    let table = Table::read(&args.input)?;
    let traces = read_traces(&table, Some(&args.alphas))?;
    let pick = |a: f64| &traces.iter().find(|(_, t)| t.alpha == a).unwrap().1;
    let wp = default_wave()?;
    let r = asymptotics::conjecture1_check(
        pick(args.alphas[0]),
        pick(args.alphas[1]),
        &wp,
        args.window,
    )
    .module("asymptotics")?;
    if let Some(out) = &args.out {
        let header = vec!["inv_t".to_string(), "s".to_string()];
        write_csv(out, &header, r.points.iter().map(|&(x, s)| vec![x, s]))?;
        write_manifest(ManifestSpec {
            subcommand: "check conj1",
            params: serde_json::to_value(args).map_err(anyhow::Error::from)?,
            runtime: start.elapsed(),
            notes: vec![],
            inputs: &[&args.input],
            outputs: &[out],
        })?;
    }
    if args.json {
        let mut v = serde_json::to_value(&r).map_err(anyhow::Error::from)?;
        v.as_object_mut().unwrap().remove("points");
        print_json(&v)?;
    } else {
        println!("levels        {} / {}", label(r.alpha), label(r.beta));
        println!("W difference  {:.14}", r.w_difference);
        println!("c0            {:.6e}", r.c0);
        println!("c1            {:.6e}", r.c1);
        println!(
            "R² (fit)      {:.8}  on [{}, {}]",
            r.r_squared_fit, r.fit_window.0, r.fit_window.1
        );
        println!(
            "R² (window)   {:.8}  on [{}, {}]",
            r.r_squared_window, r.window.0, r.window.1
        );
    }
    Ok(())
}

pub fn thm2(args: &Thm2Args) -> Outcome {
    if args.times.is_empty() {
        return Err(usage("--times needs at least one value"));
    }
    let cp = lattice_point(args.a, args.b)?;
    let wp = default_wave()?;
    let pt = wave::phi(&wp).module("wave")?;
    let t_max = args.times.iter().cloned().fold(0.0, f64::max);
    let mut params = SimParams::new(args.a, args.b, cp.v_c, t_max, vec![args.alpha]);
    params.sample_stride = args.stride;
    let targets: Vec<u64> = args
        .times
        .iter()
        .map(|t| (t / args.b).round() as u64)
        .collect();
    if targets.iter().any(|s| s % args.stride as u64 != 0) {
        return Err(usage(
            "every --times value must fall on a sample (multiple of stride·b)",
        ));
    }
    // trailing samples so η at the last snapshot has a centred stencil
    params.t_max = t_max * 1.02 + 1.0;
    let mut snaps = Vec::new();
    let traces = lattice_sim::run_with(&params, |s| {
        if targets.contains(&s.steps) {
            snaps.push(s.clone());
        }
        Ok(())
    })
    .module("lattice_sim")?;
    let tr = &traces[0];
    let eta = lattice_sim::eta_estimate(tr, cp.v_c).module("lattice_sim")?;
    let mut samples = Vec::new();
    for s in &snaps {
        let i = tr
            .times
            .iter()
            .position(|&t| (t - s.t).abs() <= 1e-9 * s.t.max(1.0))
            .context("snapshot time missing from the trace")?;
        let noise = asymptotics::eta_noise_floor(&tr.times, &eta, i).module("asymptotics")?;
        samples.push(
            asymptotics::theorem2_check(s, eta[i], noise, &wp, &pt, args.alpha, args.x0, args.nx)
                .module("asymptotics")?,
        );
    }
    let report = asymptotics::theorem2_report(args.alpha, samples);
    if args.json {
        print_json(&report)?;
    } else {
        println!(
            "{:>8}{:>14}{:>14}{:>14}{:>14}{:>14}",
            "t", "eta", "distance", "noise", "distance·eta", "at x=0"
        );
        for s in &report.samples {
            println!(
                "{:>8}{:>14.5e}{:>14.5e}{:>14.3e}{:>14.5e}{:>14.3e}",
                s.t,
                s.eta,
                s.distance,
                s.noise,
                s.distance * s.eta,
                s.at_zero
            );
        }
        println!("non-increasing within noise: {}", report.non_increasing);
    }
    Ok(())
}
