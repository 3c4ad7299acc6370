//! Structural VAR estimated equation by equation.
//!
//! Equation `i` (0-based) regresses `y_i` on the contemporaneous values of
//! the variables ordered before it, `p` lags of every variable and an
//! intercept, so `K_i = mp + i + 1`. Coefficient layout within equation `i`:
//! `[b₀ (i entries), lag 1 (m), …, lag p (m), intercept]`.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;

use crate::dist::{chain_rng, derive_seed, sample_categorical, std_normal};
use crate::error::{Error, Result};
use crate::indicators::regime1_prob;
use crate::model::{Class, Law, ModelSpec};
use crate::sampler::{ar_residual_variance, run_chain, transition_factor, EquationData, PosteriorDraws};

/// Per-equation datasets from a `T×m` panel; the first `p` rows only feed
/// lags.
pub fn split_equations(y: &DMatrix<f64>, p: usize) -> Result<Vec<EquationData>> {
    let (t_len, m) = y.shape();
    if p == 0 {
        return Err(Error::Config("lag order must be positive".into()));
    }
    if p >= t_len {
        return Err(Error::Dimension(format!("p = {p} leaves no observations out of T = {t_len}")));
    }
    let rows = t_len - p;
    (0..m)
        .map(|i| {
            let k = m * p + i + 1;
            let x = DMatrix::from_fn(rows, k, |r, c| {
                let t = r + p;
                if c < i {
                    y[(t, c)]
                } else if c < i + m * p {
                    let c = c - i;
                    y[(t - 1 - c / m, c % m)]
                } else {
                    1.0
                }
            });
            let resp: Vec<f64> = (p..t_len).map(|t| y[(t, i)]).collect();
            EquationData::new(resp, x)
        })
        .collect()
}

/// Residual standard deviations of univariate AR(`p`) fits; the sample
/// standard deviation stands in when the fit is degenerate.
pub fn ar_scales(y: &DMatrix<f64>, p: usize) -> Vec<f64> {
    (0..y.ncols())
        .map(|j| {
            let col: Vec<f64> = y.column(j).iter().copied().collect();
            ar_residual_variance(&col, p)
                .unwrap_or_else(|| {
                    let n = col.len() as f64;
                    let mean = col.iter().sum::<f64>() / n;
                    (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).max(1e-8)
                })
                .sqrt()
        })
        .collect()
}

/// Minnesota prior variances for every equation. Own lag `l`: `(ℓ₁/l)²`;
/// lag `l` of variable `j ≠ i`: `(ℓ₁ℓ₂σ_i/(lσ_j))²`; intercept and
/// contemporaneous terms: `(ℓ₁ℓ₃σ_i)²`.
pub fn minnesota_variances(sigma: &[f64], p: usize, l1: f64, l2: f64, l3: f64) -> Vec<Vec<f64>> {
    let m = sigma.len();
    (0..m)
        .map(|i| {
            let loose = (l1 * l3 * sigma[i]).powi(2);
            let mut v = vec![loose; i];
            for lag in 1..=p {
                let l = lag as f64;
                for j in 0..m {
                    v.push(if j == i {
                        (l1 / l).powi(2)
                    } else {
                        (l1 * l2 * sigma[i] / (l * sigma[j])).powi(2)
                    });
                }
            }
            v.push(loose);
            v
        })
        .collect()
}

/// Posterior draws of all equations plus what forecasting needs.
#[derive(Clone, Debug, PartialEq)]
pub struct VarDraws {
    pub m: usize,
    pub p: usize,
    pub spec: ModelSpec,
    pub equations: Vec<PosteriorDraws>,
    /// The last `p` observations, most recent first.
    pub last_obs: Vec<Vec<f64>>,
}

impl VarDraws {
    pub fn n(&self) -> usize {
        self.equations.iter().map(|e| e.n).min().unwrap_or(0)
    }

    pub fn periods(&self) -> usize {
        self.equations.first().map_or(0, |e| e.periods)
    }

    /// Structural matrices of draw `d` at in-sample period `t`.
    pub fn structural(&self, d: usize, t: usize) -> StructuralDraw {
        let coef: Vec<Vec<f64>> = self
            .equations
            .iter()
            .map(|e| (0..e.k).map(|i| e.alpha_at(d, t, i)).collect())
            .collect();
        let sigma2 = self.equations.iter().map(|e| e.h[d * e.periods + t].exp()).collect();
        StructuralDraw::from_coefficients(self.m, self.p, &coef, sigma2)
    }
}

fn run_equations(data: &[EquationData], spec: &ModelSpec, seed: u64) -> Result<Vec<PosteriorDraws>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        data.par_iter()
            .enumerate()
            .map(|(i, d)| run_chain(d, spec, derive_seed(seed, i as u64)))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.iter()
            .enumerate()
            .map(|(i, d)| run_chain(d, spec, derive_seed(seed, i as u64)))
            .collect()
    }
}

/// Runs `f` on a pool of `threads` workers, or inline without the
/// `parallel` feature. Results never depend on the thread count.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    #[cfg(feature = "parallel")]
    {
        match threads {
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map(|pool| pool.install(f))
                .map_err(|e| Error::Config(format!("thread pool: {e}"))),
            None => Ok(f()),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        Ok(f())
    }
}

/// Estimates every equation with its own chain seeded from `seed`.
pub fn estimate_var(y: &DMatrix<f64>, spec: &ModelSpec, seed: u64, threads: Option<usize>) -> Result<VarDraws> {
    spec.validate()?;
    let (t_len, m) = y.shape();
    let p = spec.p;
    let mut data = split_equations(y, p)?;
    if spec.class == Class::ConstMin {
        let mn = spec.hyper.minnesota;
        let prior = minnesota_variances(&ar_scales(y, p), p, mn.l1, mn.l2, mn.l3);
        for (d, v) in data.iter_mut().zip(prior) {
            d.prior_var = Some(v);
        }
    }
    let equations = with_threads(threads, || run_equations(&data, spec, seed))??;
    let last_obs = (0..p)
        .map(|l| (0..m).map(|j| y[(t_len - 1 - l, j)]).collect())
        .collect();
    Ok(VarDraws {
        m,
        p,
        spec: spec.clone(),
        equations,
        last_obs,
    })
}

/// Structural form `(I − B₀)y_t = B z_t + Σ^{1/2}ε_t` with
/// `z_t = (y_{t-1}, …, y_{t-p}, 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct StructuralDraw {
    pub m: usize,
    pub p: usize,
    /// Strictly lower triangular.
    pub b0: DMatrix<f64>,
    /// `m×(mp+1)`: lag matrices side by side, then the intercept.
    pub b: DMatrix<f64>,
    pub sigma2: Vec<f64>,
}

impl StructuralDraw {
    /// Assembles the matrices from per-equation coefficient vectors in the
    /// layout of [`split_equations`].
    pub fn from_coefficients(m: usize, p: usize, coef: &[Vec<f64>], sigma2: Vec<f64>) -> Self {
        let mut b0 = DMatrix::zeros(m, m);
        let mut b = DMatrix::zeros(m, m * p + 1);
        for (i, c) in coef.iter().enumerate() {
            for j in 0..i {
                b0[(i, j)] = c[j];
            }
            for c_idx in 0..=m * p {
                b[(i, c_idx)] = c[i + c_idx];
            }
        }
        Self { m, p, b0, b, sigma2 }
    }
}

/// `(I − B₀)⁻¹`, computed by forward substitution on the unit lower
/// triangular matrix.
pub fn unit_lower_inverse(b0: &DMatrix<f64>) -> DMatrix<f64> {
    let m = b0.nrows();
    let mut inv = DMatrix::identity(m, m);
    for c in 0..m {
        for r in c + 1..m {
            inv[(r, c)] = (c..r).map(|k| b0[(r, k)] * inv[(k, c)]).sum();
        }
    }
    inv
}

/// Reduced-form coefficients `A = (I−B₀)⁻¹B` and covariance
/// `(I−B₀)⁻¹Σ(I−B₀)⁻ᵀ`.
pub fn structural_to_reduced(draw: &StructuralDraw) -> (DMatrix<f64>, DMatrix<f64>) {
    let inv = unit_lower_inverse(&draw.b0);
    let a = &inv * &draw.b;
    let sig = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&draw.sigma2));
    let cov = &inv * sig * inv.transpose();
    (a, (&cov + cov.transpose()) * 0.5)
}

/// Simulated predictive paths.
#[derive(Clone, Debug, PartialEq)]
pub struct ForecastDistribution {
    pub m: usize,
    pub horizon: usize,
    /// Number of paths.
    pub n: usize,
    /// `n×horizon×m`.
    pub paths: Vec<f64>,
    /// `n×m` conditional means and variances of `y_{T+1}` given the
    /// propagated states of each path.
    pub h1_mean: Vec<f64>,
    pub h1_var: Vec<f64>,
}

impl ForecastDistribution {
    /// Value of variable `v` at horizon `h` (1-based) on path `r`.
    #[inline]
    pub fn value(&self, r: usize, h: usize, v: usize) -> f64 {
        self.paths[(r * self.horizon + h - 1) * self.m + v]
    }

    pub fn draws(&self, h: usize, v: usize) -> Vec<f64> {
        (0..self.n).map(|r| self.value(r, h, v)).collect()
    }

    pub fn mean(&self, h: usize, v: usize) -> f64 {
        self.draws(h, v).iter().sum::<f64>() / self.n as f64
    }

    /// Conditional Gaussian components of `y_{T+1,v}`.
    pub fn h1_components(&self, v: usize) -> Vec<(f64, f64)> {
        (0..self.n)
            .map(|r| (self.h1_mean[r * self.m + v], self.h1_var[r * self.m + v]))
            .collect()
    }

    /// Long-format CSV: `draw,horizon,variable,value`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "draw,horizon,variable,value")?;
        for r in 0..self.n {
            for h in 1..=self.horizon {
                for v in 0..self.m {
                    writeln!(w, "{r},{h},{v},{:e}", self.value(r, h, v))?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Latent state of one equation carried along a simulated path.
struct EqPath {
    alpha_tilde: Vec<f64>,
    s: Vec<u8>,
    h: f64,
}

fn start_path(e: &PosteriorDraws, d: usize) -> EqPath {
    let k = e.k;
    EqPath {
        alpha_tilde: e.alpha_tilde_last[d * k..(d + 1) * k].to_vec(),
        s: e.s_last[d * k..(d + 1) * k].to_vec(),
        h: e.h[d * e.periods + e.periods - 1],
    }
}

/// One period of the law of motion; returns the centered coefficients.
fn propagate<R: Rng + ?Sized>(
    e: &PosteriorDraws,
    spec: &ModelSpec,
    d: usize,
    st: &mut EqPath,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let k = e.k;
    let block = e.block(d);
    let class = spec.class;
    let prev = st.s.clone();
    if spec.has_indicators() {
        match spec.law().unwrap_or(Law::Bernoulli) {
            Law::MarkovSwitching => {
                let stay = if prev[0] == 1 { e.p_ms[2 * d + 1] } else { e.p_ms[2 * d] };
                let next = if rng.random::<f64>() < stay { prev[0] } else { 1 - prev[0] };
                st.s.iter_mut().for_each(|s| *s = next);
            }
            Law::Bernoulli => {
                for i in 0..k {
                    let p1 = regime1_prob(e.p_mix[d * k + i], spec.hyper.pairing);
                    st.s[i] = u8::from(rng.random::<f64>() < p1);
                }
            }
        }
    }
    let pool_mean = if class == Class::Pool && e.n_clusters > 0 {
        let nc = e.n_clusters;
        let theta = sample_categorical(&e.pool_omega[d * nc..(d + 1) * nc], rng)?;
        Some(&e.pool_mu[(d * nc + theta) * k..(d * nc + theta + 1) * k])
    } else {
        None
    };
    let mut alpha = Vec::with_capacity(k);
    for i in 0..k {
        let f = transition_factor(class, &block, prev[i], st.s[i], i, spec.rescale_transitions);
        let gamma = pool_mean.map_or(0.0, |mu| mu[i]);
        st.alpha_tilde[i] = f * st.alpha_tilde[i] + gamma + std_normal(rng);
        alpha.push(block.alpha0[i] + block.root(i, st.s[i]) * st.alpha_tilde[i]);
    }
    if spec.sv {
        let sp = &e.sv_params[4 * d..4 * d + 4];
        st.h = sp[0] + sp[1] * (st.h - sp[0]) + sp[2].sqrt() * std_normal(rng);
    }
    Ok(alpha)
}

fn simulate_paths(
    draws: &VarDraws,
    d: usize,
    horizon: usize,
    nsim: usize,
    freeze: bool,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let (m, p) = (draws.m, draws.p);
    let last_t = draws.periods() - 1;
    let mut rng = chain_rng(derive_seed(seed, d as u64));
    let mut paths = Vec::with_capacity(nsim * horizon * m);
    let mut means = Vec::with_capacity(nsim * m);
    let mut vars = Vec::with_capacity(nsim * m);
    for _ in 0..nsim {
        let mut states: Vec<EqPath> = draws.equations.iter().map(|e| start_path(e, d)).collect();
        let mut lags = draws.last_obs.clone();
        for h in 1..=horizon {
            let sd = if freeze {
                draws.structural(d, last_t)
            } else {
                let mut coef = Vec::with_capacity(m);
                for (e, st) in draws.equations.iter().zip(states.iter_mut()) {
                    coef.push(propagate(e, &draws.spec, d, st, &mut rng)?);
                }
                let sigma2 = states.iter().map(|s| s.h.exp()).collect();
                StructuralDraw::from_coefficients(m, p, &coef, sigma2)
            };
            let inv = unit_lower_inverse(&sd.b0);
            let z: Vec<f64> = lags.iter().flatten().copied().chain(std::iter::once(1.0)).collect();
            let z = nalgebra::DVector::from_vec(z);
            let a = &inv * &sd.b;
            let mean = &a * &z;
            if h == 1 {
                let (_, cov) = structural_to_reduced(&sd);
                means.extend(mean.iter());
                vars.extend((0..m).map(|v| cov[(v, v)]));
            }
            let shock = nalgebra::DVector::from_fn(m, |i, _| sd.sigma2[i].sqrt() * std_normal(&mut rng));
            let y = mean + inv * shock;
            let y: Vec<f64> = y.iter().copied().collect();
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical(format!("non-finite forecast in draw {d}")));
            }
            paths.extend_from_slice(&y);
            lags.pop();
            lags.insert(0, y);
        }
    }
    Ok((paths, means, vars))
}

/// Predictive paths for horizons `1..=horizon`, `nsim` per stored draw.
/// With `freeze`, coefficients and volatilities stay at their final
/// in-sample values instead of following the law of motion.
pub fn simulate_predictive(
    draws: &VarDraws,
    horizon: usize,
    nsim: usize,
    seed: u64,
    freeze: bool,
) -> Result<ForecastDistribution> {
    if horizon < 1 || nsim < 1 {
        return Err(Error::Config("horizon and paths per draw must be at least 1".into()));
    }
    let n = draws.n();
    if n == 0 {
        return Err(Error::Config("no posterior draws to simulate from".into()));
    }
    let per_draw = |d: usize| simulate_paths(draws, d, horizon, nsim, freeze, seed);
    #[cfg(feature = "parallel")]
    let parts: Vec<_> = {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(per_draw).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<_> = (0..n).map(per_draw).collect::<Result<_>>()?;
    let mut out = ForecastDistribution {
        m: draws.m,
        horizon,
        n: n * nsim,
        paths: Vec::with_capacity(n * nsim * horizon * draws.m),
        h1_mean: Vec::with_capacity(n * nsim * draws.m),
        h1_var: Vec::with_capacity(n * nsim * draws.m),
    };
    for (p, mu, v) in parts {
        out.paths.extend(p);
        out.h1_mean.extend(mu);
        out.h1_var.extend(v);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equation_sizes() {
        let y = DMatrix::from_fn(10, 2, |t, j| (t * 2 + j) as f64);
        let eqs = split_equations(&y, 1).unwrap();
        assert_eq!(eqs[0].k(), 3);
        assert_eq!(eqs[1].k(), 4);
        assert_eq!(eqs[0].periods(), 9);
        // Second equation at t = 1: (y_{0,1}, y_{0,0}, y_{1,0}, 1).
        let row: Vec<f64> = eqs[1].x.row(0).iter().copied().collect();
        assert_eq!(row, vec![2.0, 0.0, 1.0, 1.0]);
        assert_eq!(eqs[1].y[0], 3.0);
        assert!(split_equations(&y, 10).is_err());
    }

    #[test]
    fn lag_two_layout() {
        let y = DMatrix::from_fn(6, 2, |t, j| (10 * t + j) as f64);
        let eqs = split_equations(&y, 2).unwrap();
        let row: Vec<f64> = eqs[0].x.row(0).iter().copied().collect();
        assert_eq!(row, vec![10.0, 11.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn reduced_form_hand_case() {
        let mut b0 = DMatrix::zeros(2, 2);
        b0[(1, 0)] = 0.5;
        let draw = StructuralDraw {
            m: 2,
            p: 1,
            b0,
            b: DMatrix::zeros(2, 3),
            sigma2: vec![1.0, 1.0],
        };
        let (_, cov) = structural_to_reduced(&draw);
        let want = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.25]);
        assert!((cov - want).abs().max() < 1e-15);
    }

    #[test]
    fn zero_b0_is_identity_map() {
        let b = DMatrix::from_fn(3, 4, |i, j| (i + 2 * j) as f64 * 0.1);
        let draw = StructuralDraw {
            m: 3,
            p: 1,
            b0: DMatrix::zeros(3, 3),
            b: b.clone(),
            sigma2: vec![1.0, 2.0, 3.0],
        };
        let (a, cov) = structural_to_reduced(&draw);
        assert_eq!(a, b);
        assert_eq!(cov, DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0, 3.0])));
    }

    #[test]
    fn unit_lower_inverse_inverts() {
        let b0 = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 0.3, 0.0, 0.0, -1.2, 0.7, 0.0]);
        let inv = unit_lower_inverse(&b0);
        let prod = (DMatrix::identity(3, 3) - b0) * inv;
        assert!((prod - DMatrix::identity(3, 3)).abs().max() < 1e-14);
    }

    #[test]
    fn minnesota_layout() {
        let v = minnesota_variances(&[1.0, 2.0], 2, 0.2, 0.5, 100.0);
        assert_eq!(v[0].len(), 5);
        assert_eq!(v[1].len(), 6);
        let close = |a: f64, b: f64| (a - b).abs() < 1e-12;
        // Equation 1 (0-based): [b0, lag1 y0, lag1 y1, lag2 y0, lag2 y1, c].
        assert!(close(v[1][0], (0.2f64 * 100.0 * 2.0).powi(2)));
        assert!(close(v[1][1], (0.2f64 * 0.5 * 2.0).powi(2)));
        assert!(close(v[1][2], 0.04));
        assert!(close(v[1][4], 0.01));
        assert!(close(v[1][3], (0.2f64 * 0.5 * 2.0 / 2.0).powi(2)));
    }
}
