//! Random variate generators and log densities used by the Gibbs sweeps.
//!
//! Every sampler takes an explicit `&mut R: Rng` handle; there is no global
//! generator. Chains use [`ChainRng`] seeded through [`chain_rng`] and
//! [`derive_seed`] so results depend only on the seed.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::cholesky;

/// Generator used for every chain.
pub type ChainRng = ChaCha8Rng;

pub fn chain_rng(seed: u64) -> ChainRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Deterministically derives an independent stream seed from a master seed
/// and a stream index (splitmix64 finalizer).
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(stream.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Standard normal CDF.
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

#[inline]
pub fn normal_ln_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (LN_2PI + var.ln() + d * d / var)
}

/// `log Σ exp(v)` without overflow; `-∞` for an empty or all `-∞` slice.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[inline]
pub fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Uniform on the open interval (0, 1).
#[inline]
pub fn open_unif<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

fn check_positive(v: f64, what: &str) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::InvalidParameter(format!("{what} must be positive and finite, got {v}")));
    }
    Ok(())
}

/// Gamma draw with the given shape and rate (mean `shape/rate`).
pub fn sample_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> Result<f64> {
    check_positive(rate, "gamma rate")?;
    Ok((sample_ln_gamma(shape, rng)? - rate.ln()).exp())
}

/// Logarithm of a unit-rate Gamma(shape) draw. Small shapes go through
/// `G(a) = G(a+1)·U^{1/a}` on the log scale, so they never underflow to zero.
pub fn sample_ln_gamma<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> Result<f64> {
    check_positive(shape, "gamma shape")?;
    if shape >= 1.0 {
        let g = Gamma::new(shape, 1.0).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        return Ok(g.sample(rng).ln());
    }
    let g = Gamma::new(shape + 1.0, 1.0).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok(g.sample(rng).ln() + open_unif(rng).ln() / shape)
}

/// Inverse-Gamma draw with shape and scale (mean `scale/(shape-1)`).
pub fn sample_inv_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> Result<f64> {
    check_positive(scale, "inverse-gamma scale")?;
    Ok((scale.ln() - sample_ln_gamma(shape, rng)?).exp())
}

/// Beta(a, b) draw built from two log-scale gamma draws.
pub fn sample_beta<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> Result<f64> {
    let la = sample_ln_gamma(a, rng)?;
    let lb = sample_ln_gamma(b, rng)?;
    Ok(1.0 / (1.0 + (lb - la).exp()))
}

/// Dirichlet draw. Entries are non-negative and sum to one.
pub fn sample_dirichlet<R: Rng + ?Sized>(conc: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    if conc.is_empty() {
        return Err(Error::InvalidParameter("empty concentration vector".into()));
    }
    let logs = conc
        .iter()
        .map(|&c| sample_ln_gamma(c, rng))
        .collect::<Result<Vec<_>>>()?;
    let norm = log_sum_exp(&logs);
    let mut w: Vec<f64> = logs.iter().map(|l| (l - norm).exp()).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    Ok(w)
}

/// Draws a 0-based index with probability proportional to `weights`.
pub fn sample_categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Result<usize> {
    let mut total = 0.0;
    for &w in weights {
        if !(w >= 0.0) || !w.is_finite() {
            return Err(Error::InvalidParameter(format!("categorical weight {w}")));
        }
        total += w;
    }
    if !(total > 0.0) {
        return Err(Error::InvalidParameter("all categorical weights are zero".into()));
    }
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (n, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last = n;
            if u < acc {
                return Ok(n);
            }
        }
    }
    Ok(last)
}

/// Categorical draw from unnormalized log weights (0-based).
pub fn sample_categorical_log<R: Rng + ?Sized>(log_w: &[f64], rng: &mut R) -> Result<usize> {
    let m = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return Err(Error::InvalidParameter("no finite categorical log weight".into()));
    }
    let w: Vec<f64> = log_w.iter().map(|l| (l - m).exp()).collect();
    sample_categorical(&w, rng)
}

/// Random-walk Metropolis-Hastings step on `log x` for a positive scalar
/// with log target `ln_target` (Jacobian included). Returns the new value
/// and whether the proposal was accepted.
pub fn log_rw_mh<R: Rng + ?Sized, F: Fn(f64) -> f64>(
    x: f64,
    scale: f64,
    ln_target: F,
    rng: &mut R,
) -> (f64, bool) {
    let prop = x * (scale * std_normal(rng)).exp();
    let ln_ratio = ln_target(prop) - ln_target(x) + (prop / x).ln();
    if open_unif(rng).ln() < ln_ratio {
        (prop, true)
    } else {
        (x, false)
    }
}

/// Gaussian draw from canonical parameters: `x ~ N(Q⁻¹b, Q⁻¹)`.
/// Returns the draw and the mean.
pub fn sample_mvn_precision<R: Rng + ?Sized>(
    precision: &DMatrix<f64>,
    linear: &DVector<f64>,
    rng: &mut R,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let n = precision.nrows();
    if linear.len() != n {
        return Err(Error::Dimension(format!("linear term {} vs precision {n}", linear.len())));
    }
    // Factor D·Q·D with D = diag(Q)^(-1/2): same draw, far better conditioned.
    let d: Vec<f64> = (0..n)
        .map(|i| {
            let q = precision[(i, i)];
            if q > 0.0 && q.is_finite() { 1.0 / q.sqrt() } else { 1.0 }
        })
        .collect();
    let scaled = DMatrix::from_fn(n, n, |i, j| precision[(i, j)] * d[i] * d[j]);
    let ch = cholesky(&scaled)?;
    let mean_s = ch.solve(&DVector::from_fn(n, |i, _| linear[i] * d[i]));
    let z = DVector::from_fn(n, |_, _| std_normal(rng));
    let dev_s = ch
        .l()
        .transpose()
        .solve_upper_triangular(&z)
        .ok_or_else(|| Error::Numerical("triangular solve".into()))?;
    let mean = DVector::from_fn(n, |i, _| mean_s[i] * d[i]);
    let dev = DVector::from_fn(n, |i, _| dev_s[i] * d[i]);
    Ok((&mean + dev, mean))
}

/// Generalized inverse Gaussian with density
/// `p(x) ∝ x^{a-1} exp(-(b·x + c/x)/2)` on `x > 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gig {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Gig {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        let g = Self { a, b, c };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let Self { a, b, c } = *self;
        let bad = |m: &str| Err(Error::InvalidParameter(format!("GIG(a={a}, b={b}, c={c}): {m}")));
        if !a.is_finite() || !b.is_finite() || !c.is_finite() {
            return bad("non-finite parameter");
        }
        if b < 0.0 || c < 0.0 {
            return bad("rates must be non-negative");
        }
        if a >= 0.0 && b <= 0.0 {
            return bad("b must be positive when a >= 0");
        }
        if a <= 0.0 && c <= 0.0 {
            return bad("c must be positive when a <= 0");
        }
        Ok(())
    }

    /// Unnormalized log density.
    pub fn ln_kernel(&self, x: f64) -> f64 {
        (self.a - 1.0) * x.ln() - 0.5 * (self.b * x + self.c / x)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        sample_gig(*self, rng)
    }
}

pub fn sample_gig<R: Rng + ?Sized>(p: Gig, rng: &mut R) -> Result<f64> {
    p.validate()?;
    let Gig { a, b, c } = p;
    if c == 0.0 {
        return sample_gamma(a, 0.5 * b, rng);
    }
    if b == 0.0 {
        return sample_inv_gamma(-a, 0.5 * c, rng);
    }
    let (sb, sc) = (b.sqrt(), c.sqrt());
    let omega = sb * sc;
    let alpha = sc / sb;
    let lambda = a.abs();
    let x = if lambda > 2.0 || omega > 3.0 {
        rou_shift(lambda, omega, rng)
    } else if lambda >= 1.0 - 2.25 * omega * omega || omega > 0.2 {
        rou_noshift(lambda, omega, rng)
    } else {
        three_piece(lambda, omega, rng)
    };
    let out = if a < 0.0 { alpha / x } else { alpha * x };
    if out > 0.0 && out.is_finite() {
        Ok(out)
    } else {
        Err(Error::Numerical(format!("GIG draw {out} for a={a}, b={b}, c={c}")))
    }
}

/// Mode of the standardized density `x^{λ-1} exp(-ω(x + 1/x)/2)`.
fn gig_mode(lambda: f64, omega: f64) -> f64 {
    if lambda >= 1.0 {
        (((lambda - 1.0).powi(2) + omega * omega).sqrt() + (lambda - 1.0)) / omega
    } else {
        omega / (((1.0 - lambda).powi(2) + omega * omega).sqrt() + (1.0 - lambda))
    }
}

// Ratio-of-uniforms samplers (Hörmann and Leydold, 2014) for the
// standardized density with λ ≥ 0.

fn rou_shift<R: Rng + ?Sized>(lambda: f64, omega: f64, rng: &mut R) -> f64 {
    let t = 0.5 * (lambda - 1.0);
    let s = 0.25 * omega;
    let xm = gig_mode(lambda, omega);
    let nc = t * xm.ln() - s * (xm + 1.0 / xm);
    // Roots of the cubic giving the bounding rectangle.
    let a = -(2.0 * (lambda + 1.0) / omega + xm);
    let b = 2.0 * (lambda - 1.0) * xm / omega - 1.0;
    let c = xm;
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let fi = (-q / (2.0 * (-(p * p * p) / 27.0).sqrt())).clamp(-1.0, 1.0).acos();
    let fak = 2.0 * (-p / 3.0).sqrt();
    let y1 = fak * (fi / 3.0).cos() - a / 3.0;
    let y2 = fak * (fi / 3.0 + 4.0 / 3.0 * std::f64::consts::PI).cos() - a / 3.0;
    let uplus = (y1 - xm) * (t * y1.ln() - s * (y1 + 1.0 / y1) - nc).exp();
    let uminus = (y2 - xm) * (t * y2.ln() - s * (y2 + 1.0 / y2) - nc).exp();
    loop {
        let u = uminus + rng.random::<f64>() * (uplus - uminus);
        let v = open_unif(rng);
        let x = u / v + xm;
        if x <= 0.0 || !x.is_finite() {
            continue;
        }
        if v.ln() <= t * x.ln() - s * (x + 1.0 / x) - nc {
            return x;
        }
    }
}

fn rou_noshift<R: Rng + ?Sized>(lambda: f64, omega: f64, rng: &mut R) -> f64 {
    let t = 0.5 * (lambda - 1.0);
    let s = 0.25 * omega;
    let xm = gig_mode(lambda, omega);
    let nc = t * xm.ln() - s * (xm + 1.0 / xm);
    let ym = ((lambda + 1.0) + ((lambda + 1.0).powi(2) + omega * omega).sqrt()) / omega;
    let um = (0.5 * (lambda + 1.0) * ym.ln() - s * (ym + 1.0 / ym) - nc).exp();
    loop {
        let u = um * rng.random::<f64>();
        let v = open_unif(rng);
        let x = u / v;
        if x <= 0.0 || !x.is_finite() {
            continue;
        }
        if v.ln() <= t * x.ln() - s * (x + 1.0 / x) - nc {
            return x;
        }
    }
}

/// Rejection from a three-piece envelope; used for `0 ≤ λ < 1`, small `ω`.
fn three_piece<R: Rng + ?Sized>(lambda: f64, omega: f64, rng: &mut R) -> f64 {
    let xm = gig_mode(lambda, omega);
    let x0 = omega / (1.0 - lambda);
    let k0 = ((lambda - 1.0) * xm.ln() - 0.5 * omega * (xm + 1.0 / xm)).exp();
    let a0 = k0 * x0;
    let (k1, a1, k2, a2);
    if x0 >= 2.0 / omega {
        k1 = 0.0;
        a1 = 0.0;
        k2 = x0.powf(lambda - 1.0);
        a2 = k2 * 2.0 * (-omega * x0 / 2.0).exp() / omega;
    } else {
        k1 = (-omega).exp();
        a1 = if lambda == 0.0 {
            k1 * (std::f64::consts::LN_2 - 2.0 * omega.ln())
        } else {
            k1 / lambda * ((2.0 / omega).powf(lambda) - x0.powf(lambda))
        };
        k2 = (2.0 / omega).powf(lambda - 1.0);
        a2 = k2 * 2.0 * (-1.0f64).exp() / omega;
    }
    let total = a0 + a1 + a2;
    loop {
        let mut v = total * rng.random::<f64>();
        let (x, hx);
        if v <= a0 {
            x = x0 * v / a0;
            hx = k0;
        } else {
            v -= a0;
            if v <= a1 {
                if lambda == 0.0 {
                    x = omega * (omega.exp() * v).exp();
                    hx = k1 / x;
                } else {
                    x = (x0.powf(lambda) + lambda / k1 * v).powf(1.0 / lambda);
                    hx = k1 * x.powf(lambda - 1.0);
                }
            } else {
                v -= a1;
                let lo = x0.max(2.0 / omega);
                x = -2.0 / omega * ((-omega / 2.0 * lo).exp() - omega / (2.0 * k2) * v).ln();
                hx = k2 * (-omega / 2.0 * x).exp();
            }
        }
        if !(x > 0.0) || !x.is_finite() {
            continue;
        }
        let u = rng.random::<f64>() * hx;
        if u.ln() <= (lambda - 1.0) * x.ln() - omega / 2.0 * (x + 1.0 / x) {
            return x;
        }
    }
}
