//! On-disk draw store: one little-endian binary file per array plus a TOML
//! manifest, and CSV posterior summaries.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::RunConfig;
use crate::error::{Error, Result};
use crate::sampler::{quantile, PosteriorDraws};
use crate::var::VarDraws;

pub const MANIFEST: &str = "manifest.toml";
pub const CONFIG: &str = "run.toml";
const FORMAT: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct ArrayEntry {
    name: String,
    file: String,
    dtype: String,
    len: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct EquationEntry {
    label: String,
    periods: usize,
    k: usize,
    n: usize,
    n_clusters: usize,
    acceptance: [f64; 4],
    warnings: Vec<String>,
    arrays: Vec<ArrayEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Manifest {
    format: u32,
    m: usize,
    p: usize,
    last_obs: Vec<Vec<f64>>,
    equations: Vec<EquationEntry>,
}

enum Array<'a> {
    F64(&'a [f64]),
    U8(&'a [u8]),
    U32(&'a [u32]),
}

fn arrays(e: &PosteriorDraws) -> Vec<(&'static str, Array<'_>)> {
    vec![
        ("alpha0", Array::F64(&e.alpha0)),
        ("sqrt_psi1", Array::F64(&e.sqrt_psi1)),
        ("sqrt_psi0", Array::F64(&e.sqrt_psi0)),
        ("alpha", Array::F64(&e.alpha)),
        ("alpha_tilde", Array::F64(&e.alpha_tilde)),
        ("s", Array::U8(&e.s)),
        ("alpha_tilde_last", Array::F64(&e.alpha_tilde_last)),
        ("s_last", Array::U8(&e.s_last)),
        ("h", Array::F64(&e.h)),
        ("sv_params", Array::F64(&e.sv_params)),
        ("p_ms", Array::F64(&e.p_ms)),
        ("p_mix", Array::F64(&e.p_mix)),
        ("lambda", Array::F64(&e.lambda)),
        ("rho", Array::F64(&e.rho)),
        ("pool_nonempty", Array::U32(&e.pool_nonempty)),
        ("pool_omega", Array::F64(&e.pool_omega)),
        ("pool_mu", Array::F64(&e.pool_mu)),
    ]
}

fn encode(a: &Array<'_>) -> (Vec<u8>, &'static str, usize) {
    match a {
        Array::F64(v) => (v.iter().flat_map(|x| x.to_le_bytes()).collect(), "f64", v.len()),
        Array::U8(v) => (v.to_vec(), "u8", v.len()),
        Array::U32(v) => (v.iter().flat_map(|x| x.to_le_bytes()).collect(), "u32", v.len()),
    }
}

/// Writes the draws and the configuration that produced them into `dir`.
pub fn save(dir: &Path, draws: &VarDraws, config: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut equations = Vec::with_capacity(draws.m);
    for (i, e) in draws.equations.iter().enumerate() {
        let mut entries = Vec::new();
        for (name, arr) in arrays(e) {
            let (bytes, dtype, len) = encode(&arr);
            let file = format!("eq{i}_{name}.bin");
            std::fs::write(dir.join(&file), bytes)?;
            entries.push(ArrayEntry { name: name.into(), file, dtype: dtype.into(), len });
        }
        equations.push(EquationEntry {
            label: e.label.clone(),
            periods: e.periods,
            k: e.k,
            n: e.n,
            n_clusters: e.n_clusters,
            acceptance: e.acceptance,
            warnings: e.warnings.clone(),
            arrays: entries,
        });
    }
    let manifest = Manifest {
        format: FORMAT,
        m: draws.m,
        p: draws.p,
        last_obs: draws.last_obs.clone(),
        equations,
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(dir.join(MANIFEST), text)?;
    std::fs::write(dir.join(CONFIG), config.to_toml()?)?;
    Ok(())
}

fn read_bytes(dir: &Path, entry: &ArrayEntry, width: usize) -> Result<Vec<u8>> {
    let bytes = std::fs::read(dir.join(&entry.file))?;
    if bytes.len() != entry.len * width {
        return Err(Error::Parse(format!("{} has {} bytes, expected {}", entry.file, bytes.len(), entry.len * width)));
    }
    Ok(bytes)
}

/// Reads a store written by [`save`].
pub fn load(dir: &Path) -> Result<(VarDraws, RunConfig)> {
    let text = std::fs::read_to_string(dir.join(MANIFEST))?;
    let manifest: Manifest = toml::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
    if manifest.format != FORMAT {
        return Err(Error::Parse(format!("unsupported store format {}", manifest.format)));
    }
    let config = RunConfig::from_file(&dir.join(CONFIG))?;
    let spec = config.model_spec()?;
    let mut equations = Vec::with_capacity(manifest.m);
    for eq in &manifest.equations {
        let mut e = PosteriorDraws {
            label: eq.label.clone(),
            class: Some(spec.class),
            periods: eq.periods,
            k: eq.k,
            n_clusters: eq.n_clusters,
            n: eq.n,
            acceptance: eq.acceptance,
            warnings: eq.warnings.clone(),
            ..Default::default()
        };
        for a in &eq.arrays {
            match (a.name.as_str(), a.dtype.as_str()) {
                ("s", "u8") => e.s = read_bytes(dir, a, 1)?,
                ("s_last", "u8") => e.s_last = read_bytes(dir, a, 1)?,
                ("pool_nonempty", "u32") => {
                    e.pool_nonempty = read_bytes(dir, a, 4)?
                        .chunks_exact(4)
                        .map(|c| u32::from_le_bytes(c.try_into().expect("4-byte chunk")))
                        .collect()
                }
                (name, "f64") => {
                    let v: Vec<f64> = read_bytes(dir, a, 8)?
                        .chunks_exact(8)
                        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                        .collect();
                    let slot = match name {
                        "alpha0" => &mut e.alpha0,
                        "sqrt_psi1" => &mut e.sqrt_psi1,
                        "sqrt_psi0" => &mut e.sqrt_psi0,
                        "alpha" => &mut e.alpha,
                        "alpha_tilde" => &mut e.alpha_tilde,
                        "alpha_tilde_last" => &mut e.alpha_tilde_last,
                        "h" => &mut e.h,
                        "sv_params" => &mut e.sv_params,
                        "p_ms" => &mut e.p_ms,
                        "p_mix" => &mut e.p_mix,
                        "lambda" => &mut e.lambda,
                        "rho" => &mut e.rho,
                        "pool_omega" => &mut e.pool_omega,
                        "pool_mu" => &mut e.pool_mu,
                        other => return Err(Error::Parse(format!("unknown array '{other}'"))),
                    };
                    *slot = v;
                }
                (name, dtype) => return Err(Error::Parse(format!("array '{name}' has unexpected type {dtype}"))),
            }
        }
        equations.push(e);
    }
    Ok((
        VarDraws {
            m: manifest.m,
            p: manifest.p,
            spec,
            equations,
            last_obs: manifest.last_obs,
        },
        config,
    ))
}

/// Posterior quantiles of every coefficient path:
/// `t,coef,q05,q16,q50,q84,q95[,p_regime1]`.
pub fn write_coefficient_summary(path: &Path, e: &PosteriorDraws) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    let shares = !e.s.is_empty();
    write!(w, "t,coef,q05,q16,q50,q84,q95")?;
    writeln!(w, "{}", if shares { ",p_regime1" } else { "" })?;
    for t in 0..e.periods {
        for i in 0..e.k {
            let mut d = e.alpha_draws(t, i);
            write!(w, "{t},{i}")?;
            for q in [0.05, 0.16, 0.5, 0.84, 0.95] {
                write!(w, ",{:e}", quantile(&mut d, q))?;
            }
            match e.regime1_share(t, i) {
                Some(p) => writeln!(w, ",{p:e}")?,
                None => writeln!(w)?,
            }
        }
    }
    w.flush()?;
    Ok(())
}
