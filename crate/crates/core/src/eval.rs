//! Expanding-window forecast evaluation: point, density and CRPS metrics,
//! cumulative log predictive Bayes factors and a Diebold-Mariano test.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dist::{derive_seed, log_sum_exp, normal_cdf, normal_ln_pdf};
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::sampler::quantile;
use crate::var::{estimate_var, simulate_predictive, ForecastDistribution};

/// Lower bound applied to log scores.
pub const LPS_FLOOR: f64 = -700.0;

/// One estimation origin: the model sees rows `0..train_end` and is scored
/// at `(horizon, target)` pairs, `target = train_end - 1 + horizon`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Origin {
    pub train_end: usize,
    pub targets: Vec<(usize, usize)>,
}

/// Origins from `first_holdout` (0-based index of the first scored row)
/// until the penultimate row. Pairs whose target falls beyond the sample
/// are dropped.
pub fn expanding_windows(t_len: usize, first_holdout: usize, horizons: &[usize]) -> Result<Vec<Origin>> {
    if first_holdout == 0 || horizons.contains(&0) {
        return Err(Error::Config("hold-out start and horizons must be positive".into()));
    }
    let out: Vec<Origin> = (first_holdout..t_len)
        .map(|e| Origin {
            train_end: e,
            targets: horizons
                .iter()
                .filter(|&&h| e + h - 1 < t_len)
                .map(|&h| (h, e + h - 1))
                .collect(),
        })
        .filter(|o| !o.targets.is_empty())
        .collect();
    if out.is_empty() {
        return Err(Error::Config(format!(
            "no forecast targets: T = {t_len}, first hold-out {first_holdout}, horizons {horizons:?}"
        )));
    }
    Ok(out)
}

/// Scored forecast of one variable at one origin and horizon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecastRecord {
    pub origin: usize,
    pub horizon: usize,
    pub variable: usize,
    pub point: f64,
    pub realized: f64,
    pub lps: f64,
    pub crps: f64,
    /// Set when the log score hit [`LPS_FLOOR`].
    pub floored: bool,
}

impl ForecastRecord {
    pub fn sq_error(&self) -> f64 {
        (self.point - self.realized).powi(2)
    }

    fn key(&self) -> (usize, usize, usize) {
        (self.horizon, self.variable, self.origin)
    }
}

fn floor_lps(v: f64) -> (f64, bool) {
    if v.is_finite() && v > LPS_FLOOR {
        (v, false)
    } else {
        (LPS_FLOOR, true)
    }
}

/// Log of the equal-weight average of Gaussian densities `N(mean, var)`
/// at `y`.
pub fn lps_gaussian_mixture(components: &[(f64, f64)], y: f64) -> Result<(f64, bool)> {
    if components.is_empty() {
        return Err(Error::InvalidParameter("no predictive components".into()));
    }
    if components.iter().any(|&(_, v)| !(v > 0.0)) {
        return Err(Error::InvalidParameter("predictive variance must be positive".into()));
    }
    let logs: Vec<f64> = components.iter().map(|&(m, v)| normal_ln_pdf(y, m, v)).collect();
    Ok(floor_lps(log_sum_exp(&logs) - (components.len() as f64).ln()))
}

/// Silverman's rule-of-thumb bandwidth.
pub fn silverman_bandwidth(draws: &[f64]) -> f64 {
    let n = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let sd = (draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let mut sorted = draws.to_vec();
    let iqr = quantile(&mut sorted, 0.75) - quantile(&mut sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * n.powf(-0.2)
}

/// Gaussian kernel density estimate of the log score.
pub fn lps_kde(draws: &[f64], y: f64) -> Result<(f64, bool)> {
    if draws.len() < 2 {
        return Err(Error::InvalidParameter("kernel density needs at least two draws".into()));
    }
    let bw = silverman_bandwidth(draws);
    if !(bw > 0.0) {
        let hit = draws.iter().all(|&d| d == y);
        return Ok(if hit { (0.0, true) } else { (LPS_FLOOR, true) });
    }
    let comps: Vec<(f64, f64)> = draws.iter().map(|&d| (d, bw * bw)).collect();
    lps_gaussian_mixture(&comps, y)
}

/// Empirical CRPS `mean|X−y| − (1/2n²)ΣΣ|X_i−X_j|` in `O(n log n)`.
pub fn crps(draws: &[f64], y: f64) -> Result<f64> {
    let n = draws.len();
    if n < 2 {
        return Err(Error::InvalidParameter("CRPS needs at least two draws".into()));
    }
    let mut sorted = draws.to_vec();
    sorted.sort_by(f64::total_cmp);
    let nf = n as f64;
    let abs_dev = sorted.iter().map(|x| (x - y).abs()).sum::<f64>() / nf;
    let spread: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, x)| (2.0 * (i + 1) as f64 - nf - 1.0) * x)
        .sum();
    Ok((abs_dev - spread / (nf * nf)).max(0.0))
}

/// Closed-form CRPS of `N(mean, sd²)` at `y`.
pub fn crps_gaussian(mean: f64, sd: f64, y: f64) -> f64 {
    let z = (y - mean) / sd;
    let pdf = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    sd * (z * (2.0 * normal_cdf(z) - 1.0) + 2.0 * pdf - 1.0 / std::f64::consts::PI.sqrt())
}

/// Scores the predictive distribution of one origin at its targets.
pub fn score_origin(fc: &ForecastDistribution, origin: &Origin, realized: &DMatrix<f64>) -> Result<Vec<ForecastRecord>> {
    let mut out = Vec::new();
    for &(h, target) in &origin.targets {
        for v in 0..fc.m {
            let y = realized[(target, v)];
            let draws = fc.draws(h, v);
            let (lps, floored) = if h == 1 {
                lps_gaussian_mixture(&fc.h1_components(v), y)?
            } else {
                lps_kde(&draws, y)?
            };
            out.push(ForecastRecord {
                origin: origin.train_end,
                horizon: h,
                variable: v,
                point: draws.iter().sum::<f64>() / draws.len() as f64,
                realized: y,
                lps,
                crps: crps(&draws, y)?,
                floored,
            });
        }
    }
    Ok(out)
}

/// Settings of an expanding-window exercise.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalConfig {
    pub first_holdout: usize,
    pub horizons: Vec<usize>,
    /// Simulated paths per posterior draw.
    pub nsim: usize,
    pub freeze: bool,
    pub seed: u64,
}

/// Re-estimates at every origin and scores all targets. Origins run in
/// parallel; each derives its seed from the origin index.
pub fn run_evaluation(panel: &DMatrix<f64>, spec: &ModelSpec, cfg: &EvalConfig) -> Result<Vec<ForecastRecord>> {
    let origins = expanding_windows(panel.nrows(), cfg.first_holdout, &cfg.horizons)?;
    let max_h = cfg.horizons.iter().copied().max().unwrap_or(1);
    let one = |o: &Origin| -> Result<Vec<ForecastRecord>> {
        let train = panel.rows(0, o.train_end).into_owned();
        let seed = derive_seed(cfg.seed, o.train_end as u64);
        let draws = estimate_var(&train, spec, seed, None)?;
        let fc = simulate_predictive(&draws, max_h, cfg.nsim, derive_seed(seed, u64::MAX), cfg.freeze)?;
        score_origin(&fc, o, panel)
    };
    #[cfg(feature = "parallel")]
    let parts: Vec<Vec<ForecastRecord>> = {
        use rayon::prelude::*;
        origins.par_iter().map(one).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<Vec<ForecastRecord>> = origins.iter().map(one).collect::<Result<_>>()?;
    Ok(parts.into_iter().flatten().collect())
}

/// How the TOT column aggregates over variables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TotMode {
    /// Pool squared errors (or scores) over variables.
    #[default]
    Pooled,
    /// Average the per-variable metrics.
    Average,
}

/// Model and benchmark records matched on `(horizon, variable, origin)`.
fn matched<'a>(
    model: &'a [ForecastRecord],
    bench: &'a [ForecastRecord],
) -> Result<BTreeMap<(usize, usize, usize), (&'a ForecastRecord, &'a ForecastRecord)>> {
    let b: BTreeMap<_, _> = bench.iter().map(|r| (r.key(), r)).collect();
    if b.len() != model.len() || model.len() != bench.len() {
        return Err(Error::Dimension("model and benchmark record sets differ".into()));
    }
    model
        .iter()
        .map(|r| {
            b.get(&r.key())
                .map(|br| (r.key(), (r, *br)))
                .ok_or_else(|| Error::Dimension(format!("no benchmark record for {:?}", r.key())))
        })
        .collect()
}

/// Per-horizon comparison of a model against a benchmark.
#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub horizon: usize,
    /// `None` denotes the TOT column.
    pub variable: Option<usize>,
    pub rmse_ratio: f64,
    pub crps_ratio: f64,
    /// Sum of model minus benchmark log scores.
    pub lpbf: f64,
    pub rmse_p: f64,
    pub lps_p: f64,
    pub crps_p: f64,
}

/// RMSE ratios, CRPS ratios and LPBFs per `(horizon, variable)` plus TOT,
/// with Diebold-Mariano p-values on the underlying losses.
pub fn compare(model: &[ForecastRecord], bench: &[ForecastRecord], tot: TotMode) -> Result<Vec<Comparison>> {
    let pairs = matched(model, bench)?;
    let mut horizons: Vec<usize> = pairs.keys().map(|k| k.0).collect();
    horizons.dedup();
    let mut vars: Vec<usize> = pairs.keys().map(|k| k.1).collect();
    vars.sort_unstable();
    vars.dedup();
    let mut out = Vec::new();
    for &h in &horizons {
        let cell = |v: Option<usize>| -> Result<Comparison> {
            let sel: Vec<_> = pairs
                .iter()
                .filter(|(k, _)| k.0 == h && v.is_none_or(|v| k.1 == v))
                .map(|(_, p)| *p)
                .collect();
            comparison_cell(h, v, &sel)
        };
        for &v in &vars {
            out.push(cell(Some(v))?);
        }
        let tot_cell = match tot {
            TotMode::Pooled => cell(None)?,
            TotMode::Average => {
                let per: Vec<Comparison> = out.iter().filter(|c| c.horizon == h && c.variable.is_some()).cloned().collect();
                let n = per.len() as f64;
                let mut c = cell(None)?;
                c.rmse_ratio = per.iter().map(|c| c.rmse_ratio).sum::<f64>() / n;
                c.crps_ratio = per.iter().map(|c| c.crps_ratio).sum::<f64>() / n;
                c.lpbf = per.iter().map(|c| c.lpbf).sum::<f64>() / n;
                c
            }
        };
        out.push(tot_cell);
    }
    Ok(out)
}

fn comparison_cell(h: usize, v: Option<usize>, sel: &[(&ForecastRecord, &ForecastRecord)]) -> Result<Comparison> {
    let n = sel.len() as f64;
    let se_m: Vec<f64> = sel.iter().map(|(m, _)| m.sq_error()).collect();
    let se_b: Vec<f64> = sel.iter().map(|(_, b)| b.sq_error()).collect();
    let rmse = |v: &[f64]| (v.iter().sum::<f64>() / n).sqrt();
    let cr_m: Vec<f64> = sel.iter().map(|(m, _)| m.crps).collect();
    let cr_b: Vec<f64> = sel.iter().map(|(_, b)| b.crps).collect();
    // Losses for the log score are negative scores.
    let lp_m: Vec<f64> = sel.iter().map(|(m, _)| -m.lps).collect();
    let lp_b: Vec<f64> = sel.iter().map(|(_, b)| -b.lps).collect();
    let p = |a: &[f64], b: &[f64]| dm_test(a, b, h).map_or(f64::NAN, |r| r.p_value);
    Ok(Comparison {
        horizon: h,
        variable: v,
        rmse_ratio: rmse(&se_m) / rmse(&se_b),
        crps_ratio: cr_m.iter().sum::<f64>() / cr_b.iter().sum::<f64>(),
        lpbf: lp_b.iter().sum::<f64>() - lp_m.iter().sum::<f64>(),
        rmse_p: p(&se_m, &se_b),
        lps_p: p(&lp_m, &lp_b),
        crps_p: p(&cr_m, &cr_b),
    })
}

/// Cumulative LPBF over origins for one horizon and variable set, in
/// origin order. `variable = None` pools all variables.
pub fn cumulative_lpbf(
    model: &[ForecastRecord],
    bench: &[ForecastRecord],
    horizon: usize,
    variable: Option<usize>,
) -> Result<Vec<(usize, f64)>> {
    let pairs = matched(model, bench)?;
    let mut by_origin: BTreeMap<usize, f64> = BTreeMap::new();
    for (k, (m, b)) in &pairs {
        if k.0 == horizon && variable.is_none_or(|v| v == k.1) {
            *by_origin.entry(k.2).or_default() += m.lps - b.lps;
        }
    }
    let mut acc = 0.0;
    Ok(by_origin
        .into_iter()
        .map(|(o, d)| {
            acc += d;
            (o, acc)
        })
        .collect())
}

/// Outcome of an equal predictive accuracy test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DmResult {
    pub stat: f64,
    pub p_value: f64,
    /// Set when the loss differential has no variance.
    pub degenerate: bool,
}

/// Diebold-Mariano statistic on `model − bench` loss differentials with a
/// rectangular long-run variance over `h − 1` lags and a two-sided Gaussian
/// p-value.
pub fn dm_test(model: &[f64], bench: &[f64], h: usize) -> Result<DmResult> {
    if model.len() != bench.len() {
        return Err(Error::Dimension("loss vectors differ in length".into()));
    }
    let n = model.len();
    if n < 8 {
        return Err(Error::InvalidParameter(format!("{n} paired losses; at least 8 needed")));
    }
    let d: Vec<f64> = model.iter().zip(bench).map(|(a, b)| a - b).collect();
    let nf = n as f64;
    let mean = d.iter().sum::<f64>() / nf;
    let gamma = |lag: usize| (lag..n).map(|t| (d[t] - mean) * (d[t - lag] - mean)).sum::<f64>() / nf;
    let g0 = gamma(0);
    if !(g0 > 1e-14 * mean * mean) {
        return Ok(DmResult { stat: 0.0, p_value: 1.0, degenerate: true });
    }
    let mut lrv = g0 + 2.0 * (1..h.min(n)).map(gamma).sum::<f64>();
    if lrv <= 0.0 {
        lrv = g0;
    }
    let stat = mean / (lrv / nf).sqrt();
    Ok(DmResult {
        stat,
        p_value: 2.0 * (1.0 - normal_cdf(stat.abs())),
        degenerate: false,
    })
}

/// Significance stars at the 10/5/1% levels.
pub fn stars(p: f64) -> &'static str {
    match p {
        p if p < 0.01 => "***",
        p if p < 0.05 => "**",
        p if p < 0.10 => "*",
        _ => "",
    }
}

pub fn write_records(path: &Path, records: &[ForecastRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<ForecastRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|rec| rec.map_err(Error::from)).collect()
}
