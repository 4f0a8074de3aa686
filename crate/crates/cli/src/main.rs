//! Command-line front end: classify initial data, evolve trajectory
//! extrema, run blowup studies, verify asymptotic rates, and cross-validate
//! the representation formula against the direct PDE solver.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use stagpoint::classifier::{classify, verify_rates, Outcome, RegularityVerdict};
use stagpoint::initial_data::{critical_profile, CriticalProfile, DatumForm, InitialDatum};
use stagpoint::lagrangian::{eulerian_slice, extrema, nonlocal_term, SliceEval};
use stagpoint::pde::{compare, evolve_direct};
use stagpoint::time_map::{build_map, EtaTimeMap};
use stagpoint::BoundaryCondition;

#[derive(Parser)]
#[command(name = "stagpoint", version, about = "Lagrangian analysis of stagnation-point form Euler flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify the datum: blowup vs global, rates and limits
    Analyze(CommonArgs),
    /// Evolve extrema over a time list and write series/slice tables
    Evolve(EvolveArgs),
    /// Blowup study: gap-approach table and the blowup time
    Blowup(CommonArgs),
    /// Fit computed kernels/extrema against the predicted asymptotic laws
    Rates(RatesArgs),
    /// Cross-validate against the direct PDE solver
    Xval(XvalArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// JSON run configuration (see README for the schema)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in datum: example1 (cubic, Dirichlet) or example2 (sine, periodic)
    #[arg(long)]
    preset: Option<String>,
    /// Output directory for tables and reports
    #[arg(long, default_value = "stagpoint_out")]
    out: PathBuf,
    /// Maximizer detection tolerance
    #[arg(long)]
    tol: Option<f64>,
    /// Relative gap of the closest tabulated eta to eta_star
    #[arg(long)]
    eta_gap: Option<f64>,
}

#[derive(Args)]
struct EvolveArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated sample times
    #[arg(long, value_delimiter = ',')]
    times: Vec<f64>,
    /// Eulerian slice resolution (0 disables slices)
    #[arg(long)]
    grid: Option<usize>,
}

#[derive(Args)]
struct RatesArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Gap window delta_lo,delta_hi (delta = eta_star - eta)
    #[arg(long, value_delimiter = ',')]
    window: Vec<f64>,
}

#[derive(Args)]
struct XvalArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comparison time
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    /// Direct-solver grid resolution
    #[arg(long)]
    grid: Option<usize>,
    /// CFL number of the direct solver
    #[arg(long)]
    cfl: Option<f64>,
}

/// JSON run configuration; command-line flags override these fields.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
struct RunConfig {
    datum: Option<InitialDatum>,
    preset: Option<String>,
    #[serde(default)]
    tol: Option<f64>,
    #[serde(default)]
    eta_gap: Option<f64>,
    #[serde(default)]
    grid: Option<usize>,
    #[serde(default)]
    times: Option<Vec<f64>>,
    #[serde(default)]
    window: Option<(f64, f64)>,
    #[serde(default)]
    cfl: Option<f64>,
    /// reserved for sampled diagnostics; outputs are deterministic
    #[serde(default)]
    seed: Option<u64>,
}

struct Resolved {
    datum: InitialDatum,
    profile: CriticalProfile,
    out: PathBuf,
    tol: f64,
    eta_gap: f64,
    config: RunConfig,
}

fn preset_datum(name: &str) -> Result<InitialDatum> {
    match name {
        "example1" => Ok(InitialDatum::new(
            DatumForm::Polynomial {
                coefficients: vec![0.0, 0.5, -1.5, 1.0],
            },
            BoundaryCondition::Dirichlet,
        )),
        "example2" => Ok(InitialDatum::new(
            DatumForm::TrigPolynomial {
                constant: 0.0,
                sin: vec![1.0 / (2.0 * std::f64::consts::PI)],
                cos: vec![],
            },
            BoundaryCondition::Periodic,
        )),
        other => bail!("unknown preset '{other}' (expected example1 or example2)"),
    }
}

fn resolve(common: &CommonArgs) -> Result<Resolved> {
    let mut config: RunConfig = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| "parsing run configuration")?
        }
        None => RunConfig::default(),
    };
    if let Some(p) = &common.preset {
        config.preset = Some(p.clone());
    }
    let datum = match (&config.datum, &config.preset) {
        (Some(d), None) => d.clone(),
        (None, Some(p)) => preset_datum(p)?,
        (Some(_), Some(_)) => bail!("give either a datum or a preset, not both"),
        (None, None) => bail!("no datum: pass --preset example1|example2 or --config with a datum"),
    };
    datum.validate().map_err(|e| anyhow!("{e}"))?;
    let tol = common.tol.or(config.tol).unwrap_or(1e-9);
    let eta_gap = common.eta_gap.or(config.eta_gap).unwrap_or(1e-10);
    let profile = critical_profile(&datum, tol).map_err(|e| anyhow!("{e}"))?;
    fs::create_dir_all(&common.out)
        .with_context(|| format!("creating output directory {}", common.out.display()))?;
    Ok(Resolved {
        datum,
        profile,
        out: common.out.clone(),
        tol,
        eta_gap,
        config,
    })
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_csv(path: &Path, header: &str, rows: &[Vec<f64>]) -> Result<()> {
    let mut text = String::from(header);
    text.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&v| fmt(v)).collect();
        text.push_str(&cells.join(","));
        text.push('\n');
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).context("serializing report")?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn write_map_csv(out: &Path, map: &EtaTimeMap) -> Result<()> {
    let rows: Vec<Vec<f64>> = map
        .samples()
        .iter()
        .map(|s| vec![s.eta, s.t, s.kbar0, s.kbar1])
        .collect();
    write_csv(&out.join("map.csv"), "eta,t,kbar0,kbar1", &rows)
}

#[derive(Serialize)]
struct AnalyzeReport<'a> {
    verdict: &'a RegularityVerdict,
    profile: &'a CriticalProfile,
}

fn cmd_analyze(args: &CommonArgs) -> Result<()> {
    let r = resolve(args)?;
    let verdict = classify(&r.datum, &r.profile).map_err(|e| anyhow!("{e}"))?;
    println!("M0       = {:.12}", r.profile.m0);
    println!("eta_star = {:.12}", r.profile.eta_star);
    println!("maximizers:");
    for m in &r.profile.maximizers {
        println!(
            "  alpha = {:<22} kind = {:<18} C1 = {:<22} r = {:.3e}",
            format!("{:.12}", m.alpha_bar),
            format!("{:?}", m.kind),
            format!("{:.12}", m.c1),
            m.radius
        );
    }
    println!("governing: {:?}", verdict.governing);
    match &verdict.outcome {
        Outcome::FiniteTimeBlowup {
            t_star,
            max_rate,
            min_rate,
            time_rate_constant,
            ..
        } => {
            println!("verdict: finite-time blowup");
            println!("  t_star           = {t_star:.9}");
            println!(
                "  max law          = {:+.6e} * d^{} * |ln d|^{}",
                max_rate.constant, max_rate.exponent, max_rate.log_power
            );
            println!(
                "  min law          = {:+.6e} * d^{} * |ln d|^{}",
                min_rate.constant, min_rate.exponent, min_rate.log_power
            );
            println!("  t_star - t ~ C d = {time_rate_constant:.6e} (leading, log-corrected)");
        }
        Outcome::Global {
            order,
            limit_max,
            limit_off,
        } => {
            println!("verdict: global existence");
            println!("  order     = {order:?}");
            println!("  lim M(t)  = {limit_max:.9}");
            println!("  lim off   = {limit_off:.9}");
        }
    }
    for n in &verdict.notes {
        println!("note: {n}");
    }
    write_json(
        &r.out.join("verdict.json"),
        &AnalyzeReport {
            verdict: &verdict,
            profile: &r.profile,
        },
    )?;
    println!("wrote {}", r.out.join("verdict.json").display());
    Ok(())
}

fn cmd_evolve(args: &EvolveArgs) -> Result<()> {
    let r = resolve(&args.common)?;
    let times = if !args.times.is_empty() {
        args.times.clone()
    } else {
        r.config.times.clone().unwrap_or_else(|| vec![0.0, 0.5, 1.0])
    };
    let grid = args.grid.or(r.config.grid).unwrap_or(0);
    let map = build_map(&r.datum, &r.profile, 1e-11, r.eta_gap).map_err(|e| anyhow!("{e}"))?;
    let mut rows = Vec::new();
    println!("{:>12} {:>14} {:>16} {:>16} {:>16}", "t", "eta", "M", "m", "I");
    for &t in &times {
        let pt = map.eta_of_t(t).map_err(|e| anyhow!("{e}"))?;
        let (mx, mn) = extrema(&map, t).map_err(|e| anyhow!("{e}"))?;
        let i = nonlocal_term(&map, t).map_err(|e| anyhow!("{e}"))?;
        println!("{t:>12.6} {:>14.9} {mx:>16.9} {mn:>16.9} {i:>16.9}", pt.eta);
        rows.push(vec![t, pt.eta, mx, mn, i]);
        if grid >= 2 {
            let slice = eulerian_slice(&map, t, grid).map_err(|e| anyhow!("{e}"))?;
            let srows: Vec<Vec<f64>> = slice
                .x_grid
                .iter()
                .zip(&slice.ux_values)
                .map(|(&x, &v)| vec![x, v])
                .collect();
            write_csv(&r.out.join(format!("slice_t{t}.csv")), "x,ux", &srows)?;
        }
    }
    write_csv(&r.out.join("series.csv"), "t,eta,M,m,I", &rows)?;
    write_map_csv(&r.out, &map)?;
    println!("wrote {}", r.out.join("series.csv").display());
    Ok(())
}

#[derive(Serialize)]
struct BlowupReport<'a> {
    t_star: f64,
    eta_star: f64,
    verdict: &'a RegularityVerdict,
}

fn cmd_blowup(args: &CommonArgs) -> Result<()> {
    let r = resolve(args)?;
    let verdict = classify(&r.datum, &r.profile).map_err(|e| anyhow!("{e}"))?;
    let map = build_map(&r.datum, &r.profile, 1e-11, r.eta_gap).map_err(|e| anyhow!("{e}"))?;
    let t_star = map.t_star;
    if t_star.is_finite() {
        println!("t_star = {t_star:.9} (eta_star = {:.9})", map.eta_star);
    } else {
        println!("global solution: t_star = +inf (eta_star = {:.9})", map.eta_star);
    }
    // gap-approach table with the trajectory maximum
    let mut rows = Vec::new();
    for s in map.samples().iter().skip(1) {
        let mx = if !r.profile.maximizers.is_empty() && s.delta.is_finite() {
            let eval = SliceEval::at_eta(&map, s.eta, s.delta).map_err(|e| anyhow!("{e}"))?;
            r.profile
                .maximizers
                .iter()
                .map(|m| eval.ux(m.alpha_bar))
                .fold(f64::NEG_INFINITY, f64::max)
        } else {
            f64::NAN
        };
        rows.push(vec![s.eta, s.delta, s.t, s.kbar0, s.kbar1, mx]);
    }
    write_csv(
        &r.out.join("approach.csv"),
        "eta,delta,t,kbar0,kbar1,max",
        &rows,
    )?;
    write_map_csv(&r.out, &map)?;
    write_json(
        &r.out.join("blowup.json"),
        &BlowupReport {
            t_star,
            eta_star: map.eta_star,
            verdict: &verdict,
        },
    )?;
    println!("wrote {}", r.out.join("blowup.json").display());
    Ok(())
}

fn cmd_rates(args: &RatesArgs) -> Result<()> {
    let r = resolve(&args.common)?;
    let window = match args.window.as_slice() {
        [lo, hi] => (*lo, *hi),
        [] => r.config.window.unwrap_or((1e-8, 1e-4)),
        _ => bail!("--window takes exactly two comma-separated values"),
    };
    let verdict = classify(&r.datum, &r.profile).map_err(|e| anyhow!("{e}"))?;
    let map = build_map(&r.datum, &r.profile, 1e-11, r.eta_gap).map_err(|e| anyhow!("{e}"))?;
    let report = verify_rates(&verdict, &map, window).map_err(|e| anyhow!("{e}"))?;
    println!(
        "{:>16} {:>14} {:>14} {:>14} {:>14} {:>10}",
        "quantity", "fit exp", "pred exp", "fit const", "pred const", "rel err"
    );
    for e in &report.entries {
        println!(
            "{:>16} {:>14} {:>14} {:>14.6e} {:>14.6e} {:>10.3e}",
            e.quantity,
            e.fitted_exponent
                .map_or("-".into(), |v| format!("{v:.6}")),
            e.predicted_exponent
                .map_or("-".into(), |v| format!("{v:.6}")),
            e.fitted_constant,
            e.predicted_constant,
            e.rel_err_constant
        );
        if let Some(dev) = e.max_abs_deviation {
            println!("{:>16}   max |dev from limit| = {dev:.3e}", "");
        }
    }
    write_json(&r.out.join("rates.json"), &report)?;
    println!("wrote {}", r.out.join("rates.json").display());
    Ok(())
}

#[derive(Serialize)]
struct XvalReport {
    t: f64,
    n_grid: usize,
    cfl: f64,
    max_norm: f64,
    rms: f64,
    nonlocal_direct: f64,
    nonlocal_repr: f64,
}

fn cmd_xval(args: &XvalArgs) -> Result<()> {
    let r = resolve(&args.common)?;
    let grid = args.grid.or(r.config.grid).unwrap_or(256);
    let cfl = args.cfl.or(r.config.cfl).unwrap_or(0.4);
    let map = build_map(&r.datum, &r.profile, 1e-11, r.eta_gap).map_err(|e| anyhow!("{e}"))?;
    let sol = evolve_direct(&r.datum, args.t, grid, cfl).map_err(|e| anyhow!("{e}"))?;
    let rep = compare(&sol, &map, args.t).map_err(|e| anyhow!("{e}"))?;
    println!(
        "t = {}: max-norm = {:.6e}, rms = {:.6e} (n = {grid})",
        rep.t, rep.max_norm, rep.rms
    );
    // final direct field for plotting
    let rows: Vec<Vec<f64>> = sol
        .x_grid
        .iter()
        .zip(sol.v_fields.last().unwrap())
        .map(|(&x, &v)| vec![x, v])
        .collect();
    write_csv(&r.out.join("v_direct.csv"), "x,v", &rows)?;
    write_json(
        &r.out.join("xval.json"),
        &XvalReport {
            t: rep.t,
            n_grid: grid,
            cfl,
            max_norm: rep.max_norm,
            rms: rep.rms,
            nonlocal_direct: rep.nonlocal_direct,
            nonlocal_repr: rep.nonlocal_repr,
        },
    )?;
    println!("wrote {}", r.out.join("xval.json").display());
    let _ = r.tol;
    Ok(())
}

fn main() {
    if let Ok(threads) = std::env::var("STAGPOINT_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Analyze(a) => cmd_analyze(a),
        Command::Evolve(a) => cmd_evolve(a),
        Command::Blowup(a) => cmd_blowup(a),
        Command::Rates(a) => cmd_rates(a),
        Command::Xval(a) => cmd_xval(a),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
