//! Panel ingestion, stationarity transformations, standardization,
//! principal components and the run configuration file.

use std::collections::HashMap;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Class, Minnesota, ModelSpec, Pairing, Subclass};
use crate::sampler::EquationData;

/// Quarterly panel with named columns; the first CSV column holds dates.
#[derive(Clone, Debug, PartialEq)]
pub struct Panel {
    pub dates: Vec<String>,
    pub names: Vec<String>,
    /// `T×m`.
    pub values: DMatrix<f64>,
}

impl Panel {
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let header = rdr.headers()?.clone();
        if header.len() < 2 {
            return Err(Error::Parse("panel needs a date column and at least one series".into()));
        }
        let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut dates = Vec::new();
        let mut flat = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            dates.push(rec.get(0).unwrap_or_default().to_string());
            for (j, field) in rec.iter().skip(1).enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| {
                    Error::Parse(format!("row {}, column '{}': '{field}' is not a number", row + 1, names[j]))
                })?;
                flat.push(v);
            }
        }
        let values = DMatrix::from_row_slice(dates.len(), names.len(), &flat);
        Ok(Self { dates, names, values })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["date".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        for (t, d) in self.dates.iter().enumerate() {
            let mut rec = vec![d.clone()];
            rec.extend((0..self.names.len()).map(|j| format!("{:e}", self.values[(t, j)])));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Columns by name, in the requested order.
    pub fn select(&self, names: &[String]) -> Result<Self> {
        let idx: HashMap<&str, usize> = self.names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let cols: Vec<usize> = names
            .iter()
            .map(|n| idx.get(n.as_str()).copied().ok_or_else(|| Error::Config(format!("no series named '{n}'"))))
            .collect::<Result<_>>()?;
        Ok(Self {
            dates: self.dates.clone(),
            names: names.to_vec(),
            values: DMatrix::from_fn(self.values.nrows(), cols.len(), |t, j| self.values[(t, cols[j])]),
        })
    }

    /// Applies one transformation code per column and trims the leading
    /// rows lost by the most demanding code.
    pub fn transform(&self, tcodes: &[u8]) -> Result<Self> {
        if tcodes.len() != self.names.len() {
            return Err(Error::Dimension(format!("{} codes for {} series", tcodes.len(), self.names.len())));
        }
        let drop = tcodes.iter().map(|&c| lost_rows(c)).collect::<Result<Vec<_>>>()?;
        let max_drop = drop.iter().copied().max().unwrap_or(0);
        let t_len = self.values.nrows();
        if t_len <= max_drop {
            return Err(Error::Dimension("series too short for the transformation".into()));
        }
        let mut out = DMatrix::zeros(t_len - max_drop, self.names.len());
        for (j, &code) in tcodes.iter().enumerate() {
            let col: Vec<f64> = self.values.column(j).iter().copied().collect();
            let tr = transform_series(&col, code)
                .map_err(|e| Error::Config(format!("series '{}': {e}", self.names[j])))?;
            let skip = max_drop - drop[j];
            for (r, v) in tr[skip..].iter().enumerate() {
                out[(r, j)] = *v;
            }
        }
        Ok(Self {
            dates: self.dates[max_drop..].to_vec(),
            names: self.names.clone(),
            values: out,
        })
    }
}

fn lost_rows(tcode: u8) -> Result<usize> {
    match tcode {
        1 => Ok(0),
        5 => Ok(1),
        7 => Ok(2),
        c => Err(Error::Config(format!("unsupported transformation code {c}"))),
    }
}

/// Code 1: levels; 5: log differences; 7: first difference of percentage
/// changes.
pub fn transform_series(x: &[f64], tcode: u8) -> Result<Vec<f64>> {
    let lost = lost_rows(tcode)?;
    if x.len() <= lost {
        return Err(Error::Dimension("series too short for the transformation".into()));
    }
    match tcode {
        1 => Ok(x.to_vec()),
        5 => {
            if let Some(v) = x.iter().find(|v| !(**v > 0.0)) {
                return Err(Error::InvalidParameter(format!("log difference of non-positive value {v}")));
            }
            Ok(x.windows(2).map(|w| (w[1] / w[0]).ln()).collect())
        }
        _ => {
            if x[..x.len() - 1].contains(&0.0) {
                return Err(Error::InvalidParameter("percentage change from a zero value".into()));
            }
            let pct: Vec<f64> = x.windows(2).map(|w| (w[1] - w[0]) / w[0]).collect();
            Ok(pct.windows(2).map(|w| w[1] - w[0]).collect())
        }
    }
}

/// Inverts [`transform_series`] given the untransformed values preceding
/// the first element (`anchors`, oldest first: none for code 1, one for 5,
/// two for 7).
pub fn untransform_series(v: &[f64], tcode: u8, anchors: &[f64]) -> Result<Vec<f64>> {
    let need = lost_rows(tcode)?;
    if anchors.len() < need {
        return Err(Error::Dimension(format!("code {tcode} needs {need} anchor values")));
    }
    let a = &anchors[anchors.len() - need..];
    match tcode {
        1 => Ok(v.to_vec()),
        5 => {
            let mut prev = a[0];
            Ok(v.iter()
                .map(|g| {
                    prev *= g.exp();
                    prev
                })
                .collect())
        }
        _ => {
            let mut prev = a[1];
            let mut pct = (a[1] - a[0]) / a[0];
            Ok(v.iter()
                .map(|d| {
                    pct += d;
                    prev *= 1.0 + pct;
                    prev
                })
                .collect())
        }
    }
}

/// Column-wise `(x − mean)/sd` with the sample (n−1) standard deviation.
/// Returns the scaled panel and the `(mean, sd)` of each column.
pub fn standardize(x: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<(f64, f64)>)> {
    let (t_len, n) = x.shape();
    if t_len < 2 {
        return Err(Error::Dimension("standardization needs at least two rows".into()));
    }
    let mut out = x.clone();
    let mut scales = Vec::with_capacity(n);
    for j in 0..n {
        let col = x.column(j);
        let mean = col.sum() / t_len as f64;
        let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (t_len - 1) as f64).sqrt();
        if !(sd > 1e-300) {
            return Err(Error::InvalidParameter(format!("column {j} has zero variance")));
        }
        out.column_mut(j).iter_mut().for_each(|v| *v = (*v - mean) / sd);
        scales.push((mean, sd));
    }
    Ok((out, scales))
}

/// Maps a standardized value back to the original units.
#[inline]
pub fn destandardize(v: f64, scale: (f64, f64)) -> f64 {
    scale.0 + scale.1 * v
}

/// Principal components of a standardized panel.
#[derive(Clone, Debug, PartialEq)]
pub struct Factors {
    /// `T×k`, each column with unit sample variance.
    pub scores: DMatrix<f64>,
    /// `n×k`, so that `X ≈ scores·loadingsᵀ`.
    pub loadings: DMatrix<f64>,
    /// Share of total variance per factor.
    pub explained: Vec<f64>,
}

/// First `k` principal components via the SVD. Each factor is signed so
/// that its largest-magnitude loading is positive.
pub fn principal_components(x: &DMatrix<f64>, k: usize) -> Result<Factors> {
    let (t_len, n) = x.shape();
    if k == 0 || k > t_len.min(n) {
        return Err(Error::Config(format!("{k} factors from a {t_len}×{n} panel")));
    }
    if t_len < 2 {
        return Err(Error::Dimension("principal components need at least two rows".into()));
    }
    let svd = x.clone().svd(true, true);
    let u = svd.u.as_ref().ok_or_else(|| Error::Numerical("SVD without U".into()))?;
    let vt = svd.v_t.as_ref().ok_or_else(|| Error::Numerical("SVD without V".into()))?;
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    let total: f64 = sv.iter().map(|s| s * s).sum();
    let root = ((t_len - 1) as f64).sqrt();
    let mut scores = DMatrix::zeros(t_len, k);
    let mut loadings = DMatrix::zeros(n, k);
    let mut explained = Vec::with_capacity(k);
    for (c, &o) in order.iter().take(k).enumerate() {
        let v = vt.row(o);
        let lead = (0..n).max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs())).unwrap_or(0);
        let sign = if v[lead] < 0.0 { -1.0 } else { 1.0 };
        for t in 0..t_len {
            scores[(t, c)] = sign * u[(t, o)] * root;
        }
        for i in 0..n {
            loadings[(i, c)] = sign * v[i] * sv[o] / root;
        }
        explained.push(if total > 0.0 { sv[o] * sv[o] / total } else { 0.0 });
    }
    Ok(Factors { scores, loadings, explained })
}

fn default_class() -> String {
    "TVP-MIX".into()
}
fn default_subclass() -> Option<String> {
    Some("FLEX MS".into())
}
fn default_p() -> usize {
    1
}
fn yes() -> bool {
    true
}
fn default_iterations() -> usize {
    20_000
}
fn default_burn_in() -> usize {
    10_000
}
fn one() -> usize {
    1
}
fn default_clusters() -> usize {
    10
}
fn default_horizons() -> Vec<usize> {
    vec![1]
}
fn default_dgp() -> String {
    "regression".into()
}

/// Flat key-value run configuration (TOML syntax). Unset prior constants
/// take the class defaults of [`crate::model::Hyper::for_class`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_class")]
    pub class: String,
    #[serde(default = "default_subclass")]
    pub subclass: Option<String>,
    #[serde(default = "default_p")]
    pub p: usize,
    #[serde(default = "yes")]
    pub sv: bool,
    #[serde(default = "default_clusters")]
    pub n_clusters: usize,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default = "one")]
    pub thin: usize,
    pub indicator_warmup: Option<usize>,
    #[serde(default = "yes")]
    pub store_states: bool,
    #[serde(default = "yes")]
    pub rescale_transitions: bool,
    pub zeta: Option<f64>,
    pub d0: Option<f64>,
    pub e0: Option<f64>,
    pub e1: Option<f64>,
    pub kappa: Option<f64>,
    pub ms_counts: Option<[f64; 4]>,
    pub mix_counts: Option<[f64; 2]>,
    /// `"success-first"` or `"literal"`.
    pub pairing: Option<String>,
    pub minnesota: Option<[f64; 3]>,

    /// Panel CSV, resolved relative to the config file.
    pub data: Option<String>,
    #[serde(default)]
    pub variables: Vec<String>,
    /// Single-equation mode: response column and regressor columns
    /// (regressors default to all other columns). No lags, no
    /// standardization.
    pub response: Option<String>,
    #[serde(default)]
    pub regressors: Vec<String>,
    #[serde(default)]
    pub tcodes: Vec<u8>,
    #[serde(default = "yes")]
    pub standardize: bool,
    /// Principal components extracted from the non-selected columns and
    /// appended to the panel.
    #[serde(default)]
    pub factors: usize,

    pub first_holdout: Option<usize>,
    #[serde(default = "default_horizons")]
    pub horizons: Vec<usize>,
    #[serde(default = "one")]
    pub nsim: usize,
    #[serde(default)]
    pub freeze: bool,
    #[serde(default)]
    pub pairs: Vec<[usize; 2]>,
    pub seed: Option<u64>,

    /// `"regression"` or `"var-break"` for the simulate command.
    #[serde(default = "default_dgp")]
    pub dgp: String,
    pub periods: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty config parses")
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn model_spec(&self) -> Result<ModelSpec> {
        let class: Class = self.class.parse()?;
        let subclass = if class.is_tvp() {
            self.subclass.as_deref().map(str::parse::<Subclass>).transpose()?
        } else {
            None
        };
        let mut spec = ModelSpec::new(class, subclass)?.with_iterations(self.iterations, self.burn_in);
        spec.p = self.p;
        spec.sv = self.sv;
        spec.n_clusters = self.n_clusters;
        spec.thin = self.thin;
        spec.store_states = self.store_states;
        spec.rescale_transitions = self.rescale_transitions;
        if let Some(w) = self.indicator_warmup {
            spec.indicator_warmup = w;
        }
        let h = &mut spec.hyper;
        h.zeta = self.zeta.unwrap_or(h.zeta);
        h.d0 = self.d0.unwrap_or(h.d0);
        h.e0 = self.e0.unwrap_or(h.e0);
        h.e1 = self.e1.unwrap_or(h.e1);
        h.kappa = self.kappa.unwrap_or(h.kappa);
        h.ms_counts = self.ms_counts.unwrap_or(h.ms_counts);
        h.mix_counts = self.mix_counts.unwrap_or(h.mix_counts);
        if let Some([l1, l2, l3]) = self.minnesota {
            h.minnesota = Minnesota { l1, l2, l3 };
        }
        if let Some(p) = &self.pairing {
            h.pairing = match p.to_ascii_lowercase().as_str() {
                "success-first" | "success_first" => Pairing::SuccessFirst,
                "literal" => Pairing::Literal,
                other => return Err(Error::Config(format!("unknown pairing '{other}'"))),
            };
        }
        spec.validate()?;
        Ok(spec)
    }

    /// Response and regressors for single-equation mode.
    pub fn load_regression(&self, base: &Path) -> Result<EquationData> {
        let file = self.data.as_ref().ok_or_else(|| Error::Config("no data file configured".into()))?;
        let response = self.response.as_ref().ok_or_else(|| Error::Config("no response configured".into()))?;
        let raw = Panel::read_csv(&base.join(file))?;
        let regs: Vec<String> = if self.regressors.is_empty() {
            raw.names.iter().filter(|n| *n != response).cloned().collect()
        } else {
            self.regressors.clone()
        };
        let y: Vec<f64> = raw.select(std::slice::from_ref(response))?.values.iter().copied().collect();
        EquationData::new(y, raw.select(&regs)?.values)
    }

    /// Loads, selects, transforms and (optionally) standardizes the panel,
    /// appending principal components of the remaining columns.
    pub fn load_panel(&self, base: &Path) -> Result<(Panel, Vec<(f64, f64)>)> {
        let file = self.data.as_ref().ok_or_else(|| Error::Config("no data file configured".into()))?;
        let raw = Panel::read_csv(&base.join(file))?;
        let vars = if self.variables.is_empty() { raw.names.clone() } else { self.variables.clone() };
        let codes = if self.tcodes.is_empty() { vec![1; raw.names.len()] } else { self.tcodes.clone() };
        if codes.len() != raw.names.len() {
            return Err(Error::Config("tcodes must list one code per data column".into()));
        }
        let all = raw.transform(&codes)?;
        let mut panel = all.select(&vars)?;
        let mut scales = vec![(0.0, 1.0); vars.len()];
        if self.standardize {
            let (z, s) = standardize(&panel.values)?;
            panel.values = z;
            scales = s;
        }
        if self.factors > 0 {
            let rest: Vec<String> = all.names.iter().filter(|n| !vars.contains(n)).cloned().collect();
            let (z, _) = standardize(&all.select(&rest)?.values)?;
            let f = principal_components(&z, self.factors)?;
            let (t_len, m) = panel.values.shape();
            let mut v = panel.values.clone().resize_horizontally(m + self.factors, 0.0);
            for c in 0..self.factors {
                for t in 0..t_len {
                    v[(t, m + c)] = f.scores[(t, c)];
                }
                panel.names.push(format!("factor{}", c + 1));
                scales.push((0.0, 1.0));
            }
            panel.values = v;
        }
        Ok((panel, scales))
    }
}
