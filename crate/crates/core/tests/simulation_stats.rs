//! Monte Carlo checks of the generators against closed-form laws.

use pvarlab::analysis::ratio4_statistic;
use pvarlab::series::SegmentSet;
use pvarlab::simulation::{
    simulate_diffusion, simulate_fbm, stable_increment, DiffusionSpec, FbmSpec, SymmetricStable,
};
use pvarlab::variations::Gamma;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use statrs::distribution::{ContinuousCDF, Normal};

/// KS critical constant at level 1e-3.
fn ks_constant() -> f64 {
    (-(1e-3f64 / 2.0).ln() / 2.0).sqrt()
}

fn ks_one_sample(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

fn ks_two_sample(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

fn draws(alpha: f64, n: usize, seed: u64) -> Vec<f64> {
    let law = SymmetricStable::new(alpha).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| law.sample(&mut rng)).collect()
}

#[test]
fn stable_alpha_two_is_normal_with_variance_two() {
    let xs = draws(2.0, 1_000_000, 21);
    let var = xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64;
    assert!((1.99..=2.01).contains(&var), "variance {var}");
    let normal = Normal::new(0.0, 2f64.sqrt()).unwrap();
    let d = ks_one_sample(xs, |x| normal.cdf(x));
    assert!(d < ks_constant() / 1000.0, "KS distance {d}");
}

#[test]
fn stable_characteristic_function_at_1_75() {
    let xs = draws(1.75, 1_000_000, 22);
    for t in [0.5f64, 1.0, 2.0] {
        let ecf = xs.iter().map(|x| (t * x).cos()).sum::<f64>() / xs.len() as f64;
        let want = (-t.powf(1.75)).exp();
        assert!((ecf - want).abs() < 0.01, "t={t}: {ecf} vs {want}");
    }
}

#[test]
fn cauchy_median_is_zero() {
    let mut xs = draws(1.0, 1_000_001, 23);
    xs.sort_by(f64::total_cmp);
    assert!(xs[500_000].abs() < 0.01);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(stable_increment(1.0, &mut rng).unwrap().is_finite());
}

#[test]
fn ou_stationary_mean() {
    let (theta, mu, sigma) = (20.0, -60.0, 5.0);
    let path = simulate_diffusion(&DiffusionSpec::ou(theta, mu, sigma, mu, 6e-4, 100_001, 31)).unwrap();
    let half = &path.values()[50_000..];
    let mean = half.iter().sum::<f64>() / half.len() as f64;
    // standard error of a time average over T seconds is sigma / (theta sqrt(T))
    let se = sigma / (theta * 30f64.sqrt());
    assert!((mean - mu).abs() < 3.0 * se, "mean {mean}");
}

#[test]
fn ou_transient_moments() {
    let (theta, mu, sigma, x0, dt) = (20.0, -60.0, 5.0, -50.0, 6e-4);
    let steps = 500;
    let t = steps as f64 * dt;
    let finals: Vec<f64> = (0..2000)
        .map(|seed| {
            let p = simulate_diffusion(&DiffusionSpec::ou(theta, mu, sigma, x0, dt, steps + 1, seed)).unwrap();
            p.values()[steps]
        })
        .collect();
    let n = finals.len() as f64;
    let mean = finals.iter().sum::<f64>() / n;
    let var = finals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let want_mean = mu + (x0 - mu) * (-theta * t).exp();
    let want_var = sigma * sigma * (1.0 - (-2.0 * theta * t).exp()) / (2.0 * theta);
    assert!((mean - want_mean).abs() < 4.0 * (want_var / n).sqrt(), "mean {mean} vs {want_mean}");
    assert!((var / want_var - 1.0).abs() < 4.0 * (2.0 / n).sqrt() + 0.02, "var {var} vs {want_var}");
}

#[test]
fn fbm_increment_variance() {
    let (hurst, scale, dt) = (0.3, 5.0, 6e-4);
    let mut sums = [0.0f64; 3];
    let mut counts = [0usize; 3];
    let ms = [1usize, 4, 16];
    for seed in 0..10 {
        let path = simulate_fbm(&FbmSpec { hurst, n: 20_001, dt, scale, x0: 0.0, seed }).unwrap();
        let x = path.values();
        for (k, &m) in ms.iter().enumerate() {
            for i in 0..x.len() - m {
                sums[k] += (x[i + m] - x[i]).powi(2);
                counts[k] += 1;
            }
        }
    }
    for (k, &m) in ms.iter().enumerate() {
        let got = sums[k] / counts[k] as f64;
        let want = scale * scale * (m as f64 * dt).powf(2.0 * hurst);
        assert!((got / want - 1.0).abs() < 0.05, "M={m}: {got} vs {want}");
    }
}

#[test]
fn fbm_half_matches_brownian_increments() {
    let (scale, dt) = (5.0, 6e-4);
    let mut a = Vec::new();
    let mut b = Vec::new();
    for seed in 0..5 {
        let f = simulate_fbm(&FbmSpec { hurst: 0.5, n: 20_001, dt, scale, x0: 0.0, seed }).unwrap();
        a.extend(f.values().windows(2).map(|w| w[1] - w[0]));
        let o = simulate_diffusion(&DiffusionSpec::ou(0.0, 0.0, scale, 0.0, dt, 20_001, 100 + seed)).unwrap();
        b.extend(o.values().windows(2).map(|w| w[1] - w[0]));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let d = ks_two_sample(a, b);
    assert!(d < ks_constant() * ((na + nb) / (na * nb)).sqrt(), "KS distance {d}");
}

#[test]
fn fbm_ratio4_follows_self_similarity() {
    let f = simulate_fbm(&FbmSpec { hurst: 0.3, n: 60_001, dt: 6e-4, scale: 5.0, x0: -60.0, seed: 4 }).unwrap();
    let r = ratio4_statistic(&f, &SegmentSet::whole(&f), Gamma::INFINITE, 1, 3.0).unwrap();
    assert!((r - 2f64.powf(0.2)).abs() < 0.05, "ratio4 {r}");
    let b = simulate_fbm(&FbmSpec { hurst: 0.5, n: 60_001, dt: 6e-4, scale: 5.0, x0: -60.0, seed: 4 }).unwrap();
    let r = ratio4_statistic(&b, &SegmentSet::whole(&b), Gamma::INFINITE, 1, 3.0).unwrap();
    assert!((r - 2.0).abs() < 0.1, "ratio4 {r}");
}
