//! wasm-bindgen bindings for the static page in `www/`.
//!
//! Matrices cross the boundary as flat column-major `Float64Array`s.

use tvpmix::dgp::{generate, DgpConfig};
use tvpmix::dist::{chain_rng, sample_gig, Gig};
use tvpmix::model::{Class, ModelSpec, Subclass};
use tvpmix::sampler::{run_chain, EquationData};
use wasm_bindgen::prelude::*;

fn js_err(e: tvpmix::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// A draw from the regime-switching regression.
#[wasm_bindgen]
pub struct Simulation {
    periods: usize,
    k: usize,
    y: Vec<f64>,
    alpha: Vec<f64>,
    s: Vec<f64>,
}

#[wasm_bindgen]
impl Simulation {
    #[wasm_bindgen(getter)]
    pub fn periods(&self) -> usize {
        self.periods
    }

    #[wasm_bindgen(getter)]
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn y(&self) -> Vec<f64> {
        self.y.clone()
    }

    /// `T×K` true coefficient paths.
    pub fn alpha(&self) -> Vec<f64> {
        self.alpha.clone()
    }

    pub fn regimes(&self) -> Vec<f64> {
        self.s.clone()
    }
}

fn dgp(seed: u64, periods: usize) -> Result<(DgpConfig, tvpmix::dgp::SimulatedData), tvpmix::Error> {
    let cfg = DgpConfig { seed, periods, ..Default::default() };
    let d = generate(&cfg)?;
    Ok((cfg, d))
}

#[wasm_bindgen]
pub fn simulate(seed: u64, periods: usize) -> Result<Simulation, JsError> {
    let (cfg, d) = dgp(seed, periods).map_err(js_err)?;
    Ok(Simulation {
        periods,
        k: cfg.k(),
        y: d.y,
        alpha: d.alpha.as_slice().to_vec(),
        s: d.s.iter().map(|&v| f64::from(v)).collect(),
    })
}

/// Posterior bands of a TVP-MIX fit to a simulated sample.
#[wasm_bindgen]
pub struct Fit {
    periods: usize,
    k: usize,
    truth: Vec<f64>,
    median: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    regime1: Vec<f64>,
}

#[wasm_bindgen]
impl Fit {
    #[wasm_bindgen(getter)]
    pub fn periods(&self) -> usize {
        self.periods
    }

    #[wasm_bindgen(getter)]
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn truth(&self) -> Vec<f64> {
        self.truth.clone()
    }

    pub fn median(&self) -> Vec<f64> {
        self.median.clone()
    }

    /// 16% quantile paths.
    pub fn lower(&self) -> Vec<f64> {
        self.lower.clone()
    }

    /// 84% quantile paths.
    pub fn upper(&self) -> Vec<f64> {
        self.upper.clone()
    }

    /// Posterior share of regime 1, averaged over coefficients.
    pub fn regime1(&self) -> Vec<f64> {
        self.regime1.clone()
    }
}

/// Simulates with `seed` and fits TVP-MIX with the given subclass
/// (`"FLEX MS"`, `"FLEX MIX"`, `"SINGLE"` or `"SSVS MIX"`).
#[wasm_bindgen]
pub fn fit(seed: u64, periods: usize, subclass: &str, iterations: usize) -> Result<Fit, JsError> {
    let sub: Subclass = subclass.parse().map_err(js_err)?;
    let (cfg, d) = dgp(seed, periods).map_err(js_err)?;
    let k = cfg.k();
    let spec = ModelSpec::tvp(Class::Mix, sub).map_err(js_err)?.with_iterations(iterations, iterations / 2);
    let data = EquationData::new(d.y, d.x).map_err(js_err)?;
    let post = run_chain(&data, &spec, seed.wrapping_add(1)).map_err(js_err)?;
    let paths = |q: f64| (0..k).flat_map(|i| post.alpha_quantile_path(i, q)).collect::<Vec<f64>>();
    let regime1 = (0..periods)
        .map(|t| (0..k).filter_map(|i| post.regime1_share(t, i)).sum::<f64>() / k as f64)
        .collect();
    Ok(Fit {
        periods,
        k,
        truth: d.alpha.as_slice().to_vec(),
        median: paths(0.5),
        lower: paths(0.16),
        upper: paths(0.84),
        regime1,
    })
}

/// Histogram of `n` GIG draws with density `∝ x^{a-1} exp(-(bx + c/x)/2)`:
/// `bins` densities followed by `bins + 1` edges.
#[wasm_bindgen]
pub fn gig_histogram(a: f64, b: f64, c: f64, n: usize, bins: usize, seed: u64) -> Result<Vec<f64>, JsError> {
    let g = Gig::new(a, b, c).map_err(js_err)?;
    if n == 0 || bins == 0 {
        return Err(JsError::new("need at least one draw and one bin"));
    }
    let mut rng = chain_rng(seed);
    let mut x = (0..n).map(|_| sample_gig(g, &mut rng)).collect::<Result<Vec<f64>, _>>().map_err(js_err)?;
    x.sort_by(f64::total_cmp);
    // Trim the top 0.5% so heavy right tails do not flatten the plot.
    let hi = x[((n as f64 * 0.995) as usize).min(n - 1)];
    let width = hi / bins as f64;
    let mut counts = vec![0.0; bins];
    for v in &x {
        let b = (v / width) as usize;
        if b < bins {
            counts[b] += 1.0;
        }
    }
    let mut out: Vec<f64> = counts.iter().map(|c| c / (n as f64 * width)).collect();
    out.extend((0..=bins).map(|i| i as f64 * width));
    Ok(out)
}
