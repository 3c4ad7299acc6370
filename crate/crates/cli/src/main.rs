//! `tvpmix` command line.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;

use tvpmix::data::{destandardize, Panel, RunConfig};
use tvpmix::dgp::{generate, generate_var_break, DgpConfig, VarBreakConfig};
use tvpmix::eval::{compare, cumulative_lpbf, read_records, run_evaluation, stars, write_records, EvalConfig, TotMode};
use tvpmix::sampler::run_chain;
use tvpmix::spectral::{low_freq_bands, write_bands};
use tvpmix::store;
use tvpmix::var::{estimate_var, simulate_predictive, with_threads, VarDraws};

#[derive(Parser, Debug)]
#[command(name = "tvpmix", version, about = "Bayesian TVP regressions and VARs with mixture laws of motion")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Run configuration (TOML key-value file).
    #[arg(long = "spec", global = true)]
    spec: Option<PathBuf>,
    /// Master seed; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Keep every n-th post-burn-in draw; overrides the configuration.
    #[arg(long, global = true)]
    thin: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic data set (`dgp = "regression"` or `"var-break"`).
    Simulate,
    /// Estimate the configured model and write a draw store.
    Estimate,
    /// Expanding-window forecast evaluation.
    Forecast,
    /// Low-frequency relationship bands from a draw store.
    Spectral {
        /// Draw store directory written by `estimate`.
        draws: PathBuf,
    },
    /// Compare two forecast record files.
    Compare {
        /// Records of the model.
        model: PathBuf,
        /// Records of the benchmark.
        benchmark: PathBuf,
    },
}

const DEFAULT_SEED: u64 = 42;

struct Ctx {
    cfg: RunConfig,
    base: PathBuf,
    seed: u64,
    out: PathBuf,
}

fn context(g: &Global) -> Result<Ctx> {
    let (mut cfg, base) = match &g.spec {
        Some(p) => (
            RunConfig::from_file(p).with_context(|| format!("reading {}", p.display()))?,
            p.parent().map(Path::to_path_buf).unwrap_or_default(),
        ),
        None => (RunConfig::default(), PathBuf::new()),
    };
    if let Some(t) = g.thin {
        cfg.thin = t;
    }
    let seed = g.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
    cfg.seed = Some(seed);
    fs::create_dir_all(&g.out).with_context(|| format!("creating {}", g.out.display()))?;
    Ok(Ctx { cfg, base, seed, out: g.out.clone() })
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let ctx = context(&cli.global)?;
    with_threads(cli.global.threads, || match &cli.command {
        Command::Simulate => simulate(&ctx),
        Command::Estimate => estimate(&ctx),
        Command::Forecast => forecast(&ctx),
        Command::Spectral { draws } => spectral(&ctx, draws),
        Command::Compare { model, benchmark } => compare_cmd(&ctx, model, benchmark),
    })?
}

fn period_labels(n: usize) -> Vec<String> {
    (0..n).map(|t| format!("{t}")).collect()
}

fn simulate(ctx: &Ctx) -> Result<()> {
    let data_path = ctx.out.join("data.csv");
    match ctx.cfg.dgp.as_str() {
        "regression" => {
            let mut c = DgpConfig { seed: ctx.seed, ..Default::default() };
            if let Some(p) = ctx.cfg.periods {
                c.periods = p;
            }
            let d = generate(&c)?;
            let k = c.k();
            let mut names = vec!["y".to_string()];
            names.extend((1..=k).map(|i| format!("x{i}")));
            let values = DMatrix::from_fn(c.periods, k + 1, |t, j| if j == 0 { d.y[t] } else { d.x[(t, j - 1)] });
            Panel { dates: period_labels(c.periods), names, values }.write_csv(&data_path)?;
            let mut w = std::io::BufWriter::new(fs::File::create(ctx.out.join("truth.csv"))?);
            write!(w, "t,s,h")?;
            for i in 1..=k {
                write!(w, ",alpha{i}")?;
            }
            writeln!(w)?;
            for t in 0..c.periods {
                write!(w, "{t},{},{:e}", d.s[t], d.h[t])?;
                for i in 0..k {
                    write!(w, ",{:e}", d.alpha[(t, i)])?;
                }
                writeln!(w)?;
            }
            w.flush()?;
        }
        "var-break" => {
            let mut c = VarBreakConfig { seed: ctx.seed, ..Default::default() };
            if let Some(p) = ctx.cfg.periods {
                c.periods = p;
                c.break_at = p / 2;
            }
            let y = generate_var_break(&c)?;
            let names = (1..=c.m()).map(|i| format!("y{i}")).collect();
            Panel { dates: period_labels(c.periods), names, values: y }.write_csv(&data_path)?;
        }
        other => bail!("unknown dgp '{other}' (expected \"regression\" or \"var-break\")"),
    }
    println!("wrote {}", data_path.display());
    Ok(())
}

fn write_summaries(out: &Path, draws: &VarDraws) -> Result<()> {
    for (i, e) in draws.equations.iter().enumerate() {
        store::write_coefficient_summary(&out.join(format!("coefficients_eq{i}.csv")), e)?;
        for w in &e.warnings {
            eprintln!("warning (equation {i}): {w}");
        }
    }
    Ok(())
}

fn estimate(ctx: &Ctx) -> Result<()> {
    let spec = ctx.cfg.model_spec()?;
    let store_dir = ctx.out.join("draws");
    if ctx.cfg.response.is_some() {
        let data = ctx.cfg.load_regression(&ctx.base)?;
        let d = run_chain(&data, &spec, ctx.seed)?;
        let draws = VarDraws { m: 1, p: 0, spec, equations: vec![d], last_obs: Vec::new() };
        store::save(&store_dir, &draws, &ctx.cfg)?;
        write_summaries(&ctx.out, &draws)?;
    } else {
        let (panel, scales) = ctx.cfg.load_panel(&ctx.base)?;
        let draws = estimate_var(&panel.values, &spec, ctx.seed, None)?;
        store::save(&store_dir, &draws, &ctx.cfg)?;
        write_summaries(&ctx.out, &draws)?;
        let horizon = ctx.cfg.horizons.iter().copied().max().unwrap_or(1);
        let mut fc = simulate_predictive(&draws, horizon, ctx.cfg.nsim, ctx.seed ^ 0x5eed, ctx.cfg.freeze)?;
        for r in 0..fc.n {
            for h in 0..horizon {
                for v in 0..fc.m {
                    let idx = (r * horizon + h) * fc.m + v;
                    fc.paths[idx] = destandardize(fc.paths[idx], scales[v]);
                }
            }
        }
        fc.write_csv(&ctx.out.join("forecast_draws.csv"))?;
    }
    println!("wrote {}", store_dir.display());
    Ok(())
}

fn forecast(ctx: &Ctx) -> Result<()> {
    let spec = ctx.cfg.model_spec()?;
    let (panel, _) = ctx.cfg.load_panel(&ctx.base)?;
    let first = ctx.cfg.first_holdout.context("forecast needs `first_holdout` in the configuration")?;
    let cfg = EvalConfig {
        first_holdout: first,
        horizons: ctx.cfg.horizons.clone(),
        nsim: ctx.cfg.nsim,
        freeze: ctx.cfg.freeze,
        seed: ctx.seed,
    };
    let records = run_evaluation(&panel.values, &spec, &cfg)?;
    write_records(&ctx.out.join("records.csv"), &records)?;
    let mut w = std::io::BufWriter::new(fs::File::create(ctx.out.join("summary.csv"))?);
    writeln!(w, "model,horizon,variable,n,rmse,mean_lps,mean_crps,floored")?;
    let mut keys: Vec<(usize, usize)> = records.iter().map(|r| (r.horizon, r.variable)).collect();
    keys.sort_unstable();
    keys.dedup();
    for (h, v) in keys {
        let sel: Vec<_> = records.iter().filter(|r| r.horizon == h && r.variable == v).collect();
        let n = sel.len() as f64;
        writeln!(
            w,
            "{},{h},{},{},{:e},{:e},{:e},{}",
            spec.label(),
            panel.names[v],
            sel.len(),
            (sel.iter().map(|r| r.sq_error()).sum::<f64>() / n).sqrt(),
            sel.iter().map(|r| r.lps).sum::<f64>() / n,
            sel.iter().map(|r| r.crps).sum::<f64>() / n,
            sel.iter().filter(|r| r.floored).count()
        )?;
    }
    w.flush()?;
    println!("wrote {} records to {}", records.len(), ctx.out.join("records.csv").display());
    Ok(())
}

fn spectral(ctx: &Ctx, dir: &Path) -> Result<()> {
    let (draws, cfg) = store::load(dir).with_context(|| format!("loading draw store {}", dir.display()))?;
    if draws.p == 0 {
        bail!("the draw store holds a single regression, not a VAR");
    }
    let pairs: Vec<(usize, usize)> = if !ctx.cfg.pairs.is_empty() {
        ctx.cfg.pairs.iter().map(|p| (p[0], p[1])).collect()
    } else if !cfg.pairs.is_empty() {
        cfg.pairs.iter().map(|p| (p[0], p[1])).collect()
    } else {
        (0..draws.m).flat_map(|i| (0..draws.m).filter(move |&j| j != i).map(move |j| (i, j))).collect()
    };
    let rows = low_freq_bands(&draws, &pairs)?;
    let path = ctx.out.join("lowfreq.csv");
    write_bands(&path, &rows)?;
    let excluded: usize = rows.iter().filter(|r| r.i == pairs[0].0 && r.j == pairs[0].1).map(|r| r.excluded).sum();
    println!("wrote {} ({excluded} non-stationary draw-periods excluded)", path.display());
    Ok(())
}

fn compare_cmd(ctx: &Ctx, model: &Path, bench: &Path) -> Result<()> {
    let m = read_records(model).with_context(|| format!("reading {}", model.display()))?;
    let b = read_records(bench).with_context(|| format!("reading {}", bench.display()))?;
    let table = compare(&m, &b, TotMode::Pooled)?;
    let path = ctx.out.join("comparison.csv");
    let mut w = std::io::BufWriter::new(fs::File::create(&path)?);
    writeln!(w, "horizon,variable,rmse_ratio,rmse_stars,crps_ratio,crps_stars,lpbf,lps_stars")?;
    for c in &table {
        let var = c.variable.map_or_else(|| "TOT".to_string(), |v| v.to_string());
        writeln!(
            w,
            "{},{var},{:.6},{},{:.6},{},{:.6},{}",
            c.horizon,
            c.rmse_ratio,
            stars(c.rmse_p),
            c.crps_ratio,
            stars(c.crps_p),
            c.lpbf,
            stars(c.lps_p)
        )?;
    }
    w.flush()?;
    let mut horizons: Vec<usize> = table.iter().map(|c| c.horizon).collect();
    horizons.dedup();
    let mut w = std::io::BufWriter::new(fs::File::create(ctx.out.join("cumulative_lpbf.csv"))?);
    writeln!(w, "horizon,origin,lpbf")?;
    for h in horizons {
        for (o, v) in cumulative_lpbf(&m, &b, h, None)? {
            writeln!(w, "{h},{o},{v:.6}")?;
        }
    }
    w.flush()?;
    println!("wrote {}", path.display());
    Ok(())
}
