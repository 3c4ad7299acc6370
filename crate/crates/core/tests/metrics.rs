use nalgebra::DMatrix;
use proptest::prelude::*;
use tvpmix::data::{standardize, transform_series, untransform_series};
use tvpmix::dist::{chain_rng, normal_cdf, std_normal};
use tvpmix::eval::{compare, crps, dm_test, lps_gaussian_mixture, lps_kde, ForecastRecord, TotMode};
use tvpmix::spectral::{companion, low_freq};

#[test]
fn crps_gaussian_sample() {
    let mut rng = chain_rng(1);
    let draws: Vec<f64> = (0..100_000).map(|_| std_normal(&mut rng)).collect();
    let want = (2f64.sqrt() - 1.0) / std::f64::consts::PI.sqrt();
    let got = crps(&draws, 0.0).unwrap();
    assert!((got / want - 1.0).abs() < 0.01, "{got} vs {want}");
}

fn normal_quantile(p: f64) -> f64 {
    let (mut lo, mut hi) = (-40.0, 40.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if normal_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `y | μ ~ N(μ, v)` with `μ` from a three-component normal mixture. The
/// Rao-Blackwellized score over stratified draws of `μ` must match the
/// predictive density obtained by Simpson quadrature over `μ`.
#[test]
fn rao_blackwell_lps_matches_quadrature() {
    let mix = [(-1.0, 0.4), (0.5, 0.8), (2.0, 0.3)];
    let (v, y) = (0.6, 0.9);
    let per = 20_000;
    let comps: Vec<(f64, f64)> = mix
        .iter()
        .flat_map(|&(a, b)| (0..per).map(move |i| (a + b * normal_quantile((i as f64 + 0.5) / per as f64), v)))
        .collect();
    let (lps, _) = lps_gaussian_mixture(&comps, y).unwrap();
    let g = |mu: f64| {
        let prior: f64 = mix.iter().map(|&(a, b)| (-0.5 * ((mu - a) / b).powi(2)).exp() / b).sum::<f64>() / 3.0;
        let lik = (-0.5 * (y - mu).powi(2) / v).exp() / v.sqrt();
        prior * lik / (2.0 * std::f64::consts::PI)
    };
    let (lo, hi, n) = (-15.0, 15.0, 20_000);
    let h = (hi - lo) / n as f64;
    let simpson: f64 = (0..=n)
        .map(|k| {
            let w = if k == 0 || k == n { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
            w * g(lo + k as f64 * h)
        })
        .sum::<f64>()
        * h
        / 3.0;
    assert!((lps - simpson.ln()).abs() < 1e-3, "{lps} vs {}", simpson.ln());
}

#[test]
fn scores_prefer_the_true_density() {
    let mut rng = chain_rng(3);
    let truth: Vec<f64> = (0..2000).map(|_| std_normal(&mut rng)).collect();
    let sample = |shift: f64, scale: f64, rng: &mut tvpmix::dist::ChainRng| -> Vec<f64> {
        (0..400).map(|_| shift + scale * std_normal(rng)).collect()
    };
    let mut totals = [[0.0; 3]; 2];
    for &y in &truth {
        for (k, (shift, scale)) in [(0.0, 1.0), (0.7, 1.0), (0.0, 2.0)].iter().enumerate() {
            let d = sample(*shift, *scale, &mut rng);
            totals[0][k] += crps(&d, y).unwrap();
            totals[1][k] -= lps_gaussian_mixture(&[(*shift, scale * scale)], y).unwrap().0;
        }
    }
    for t in totals {
        assert!(t[0] < t[1] && t[0] < t[2], "{t:?}");
    }
}

#[test]
fn kde_lps_tracks_gaussian_density() {
    let mut rng = chain_rng(4);
    let d: Vec<f64> = (0..20_000).map(|_| std_normal(&mut rng)).collect();
    let (v, _) = lps_kde(&d, 0.5).unwrap();
    let exact = -0.5 * (2.0 * std::f64::consts::PI).ln() - 0.125;
    assert!((v - exact).abs() < 0.02, "{v} vs {exact}");
}

#[test]
fn dm_rejection_rate_matches_normal_power() {
    let (n, reps) = (80, 2000);
    let mut rng = chain_rng(5);
    let mut rejections = 0;
    for _ in 0..reps {
        let d: Vec<f64> = (0..n).map(|_| 0.5 + std_normal(&mut rng)).collect();
        let zero = vec![0.0; n];
        if dm_test(&d, &zero, 1).unwrap().p_value < 0.05 {
            rejections += 1;
        }
    }
    // Power of a two-sided 5% z-test with effect 0.5·√80.
    let shift = 0.5 * (n as f64).sqrt();
    let power = 1.0 - normal_cdf(1.959_964 - shift) + normal_cdf(-1.959_964 - shift);
    let rate = rejections as f64 / reps as f64;
    assert!((rate - power).abs() < 0.02, "{rate} vs {power}");
}

fn records(points: &[f64], realized: &[f64], scale: f64, m: usize) -> Vec<ForecastRecord> {
    points
        .iter()
        .zip(realized)
        .enumerate()
        .map(|(k, (p, y))| ForecastRecord {
            origin: k / m,
            horizon: 1,
            variable: k % m,
            point: p * scale,
            realized: y * scale,
            lps: -1.0 - (k as f64) * 0.01 - scale.ln(),
            crps: (p - y).abs() * scale,
            floored: false,
        })
        .collect()
}

proptest! {
    #[test]
    fn ratios_are_unit_free(
        pm in prop::collection::vec(-3.0f64..3.0, 24),
        pb in prop::collection::vec(-3.0f64..3.0, 24),
        yv in prop::collection::vec(-3.0f64..3.0, 24),
        scale in 0.01f64..100.0,
    ) {
        let base = compare(&records(&pm, &yv, 1.0, 2), &records(&pb, &yv, 1.0, 2), TotMode::Pooled).unwrap();
        let scaled = compare(&records(&pm, &yv, scale, 2), &records(&pb, &yv, scale, 2), TotMode::Pooled).unwrap();
        for (a, b) in base.iter().zip(&scaled) {
            if a.rmse_ratio.is_finite() {
                prop_assert!((a.rmse_ratio - b.rmse_ratio).abs() <= 1e-9 * a.rmse_ratio.abs().max(1.0));
            }
            prop_assert!((a.lpbf - b.lpbf).abs() < 1e-9);
        }
    }

    #[test]
    fn tot_equals_single_variable(
        pm in prop::collection::vec(-3.0f64..3.0, 12),
        pb in prop::collection::vec(-3.0f64..3.0, 12),
        yv in prop::collection::vec(-3.0f64..3.0, 12),
    ) {
        let c = compare(&records(&pm, &yv, 1.0, 1), &records(&pb, &yv, 1.0, 1), TotMode::Pooled).unwrap();
        prop_assert_eq!(c.len(), 2);
        prop_assert!(c[0].rmse_ratio == c[1].rmse_ratio || c[0].rmse_ratio.is_nan());
    }

    #[test]
    fn standardize_moments(col in prop::collection::vec(-1e3f64..1e3, 3..40)) {
        let n = col.len();
        let x = DMatrix::from_column_slice(n, 1, &col);
        if let Ok((z, _)) = standardize(&x) {
            let mean = z.sum() / n as f64;
            let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            prop_assert!(mean.abs() < 1e-12);
            prop_assert!((var - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn log_difference_round_trip(x in prop::collection::vec(0.1f64..100.0, 2..30)) {
        for code in [1u8, 5] {
            let lost = usize::from(code == 5);
            let back = untransform_series(&transform_series(&x, code).unwrap(), code, &x[..lost]).unwrap();
            for (a, b) in back.iter().zip(&x[lost..]) {
                prop_assert!((a - b).abs() <= 1e-10 * b.abs());
            }
        }
    }
}

/// Long-run variance by summing autocovariances of the companion process.
fn autocov_sum(f: &DMatrix<f64>, upsilon: &DMatrix<f64>, m: usize) -> DMatrix<f64> {
    let mut g0 = upsilon.clone();
    for _ in 0..5000 {
        let next = f * &g0 * f.transpose() + upsilon;
        if (&next - &g0).abs().max() < 1e-15 {
            g0 = next;
            break;
        }
        g0 = next;
    }
    let mut total = g0.clone();
    let mut gk = g0.clone();
    for _ in 0..5000 {
        gk = f * gk;
        total += &gk + gk.transpose();
        if gk.abs().max() < 1e-16 {
            break;
        }
    }
    total.view((0, 0), (m, m)).into_owned()
}

#[test]
fn low_freq_matches_autocovariance_sum() {
    let mut rng = chain_rng(6);
    let (m, p) = (2, 2);
    let mut done = 0;
    while done < 20 {
        let a = DMatrix::from_fn(m, m * p + 1, |_, _| 0.35 * std_normal(&mut rng));
        let l = DMatrix::from_fn(m, m, |i, j| if j <= i { 0.5 * std_normal(&mut rng) + if i == j { 1.0 } else { 0.0 } } else { 0.0 });
        let sig = &l * l.transpose();
        let cf = companion(&a, &sig, p).unwrap();
        if cf.spectral_radius() > 0.9 {
            continue;
        }
        let pi = cf.long_run_covariance().unwrap();
        let oracle = autocov_sum(&cf.f, &cf.upsilon, m);
        assert!((&pi - &oracle).abs().max() < 1e-6 * oracle.abs().max().max(1.0), "{pi} vs {oracle}");
        assert!((low_freq(&cf, 0, 1).unwrap() - oracle[(0, 1)] / oracle[(1, 1)]).abs() < 1e-6);
        assert_eq!(low_freq(&cf, 1, 1).unwrap(), 1.0);
        let eig = pi.symmetric_eigenvalues();
        assert!(eig.iter().all(|&e| e >= -1e-12));
        done += 1;
    }
}
