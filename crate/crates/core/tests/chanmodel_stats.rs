use dos_lab::chanmodel::{ChannelModel, RateModel};
use dos_lab::config::{BackoffPolicy, Scenario, SystemParams};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn scenario(alpha: f64) -> Scenario {
    Scenario::new(SystemParams::default().with_alpha(alpha), BackoffPolicy::Optimized).unwrap()
}

fn corr_abs(a: &[Complex64], b: &[Complex64]) -> f64 {
    let n = a.len() as f64;
    let cross: Complex64 = a.iter().zip(b).map(|(x, y)| x * y.conj()).sum::<Complex64>() / n;
    let va = a.iter().map(|x| x.norm_sqr()).sum::<f64>() / n;
    let vb = b.iter().map(|x| x.norm_sqr()).sum::<f64>() / n;
    cross.norm() / (va * vb).sqrt()
}

#[test]
fn channel_and_pilots() {
    let s = scenario(1.0);
    let m = ChannelModel::new(&s.params, &s.derived, RateModel::Approximate);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 20_000;
    let draws: Vec<_> = (0..n).map(|_| m.sample_channel(&mut rng)).collect();
    let power = draws.iter().map(|d| d.h.norm_sqr()).sum::<f64>() / n as f64;
    assert!((power - 1.0).abs() < 0.03);
    let h: Vec<Complex64> = draws.iter().map(|d| d.h).collect();
    let y0: Vec<Complex64> = draws.iter().map(|d| d.pilot_obs[0]).collect();
    let expected = (m.rho / (m.rho + 1.0)).sqrt();
    assert!((corr_abs(&y0, &h) - expected).abs() < 0.02);
}

#[test]
fn zero_snr_pilots_are_noise() {
    let s = scenario(1.0);
    let mut m = ChannelModel::new(&s.params, &s.derived, RateModel::Approximate);
    m.rho = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let d = m.sample_channel(&mut rng);
    let v = d.pilot_obs.iter().map(|y| y.norm_sqr()).sum::<f64>() / d.pilot_obs.len() as f64;
    assert!((v - 1.0).abs() < 0.15);
}

#[test]
fn estimate_orthogonality() {
    let s = scenario(0.5);
    let m = ChannelModel::new(&s.params, &s.derived, RateModel::Approximate);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let (mut h1, mut err, mut inc) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..100_000 {
        let sums = m.sample_sums(&mut rng);
        let a = m.estimate_level1(&sums).h_hat;
        let b = m.estimate_level2(&sums).h_hat;
        h1.push(a);
        err.push(sums.h - a);
        inc.push(b - a);
    }
    assert!(corr_abs(&h1, &err) < 0.01);
    assert!(corr_abs(&h1, &inc) < 0.01);
}

#[test]
fn first_level_rates_are_exponential() {
    let s = scenario(2.0);
    let m = ChannelModel::new(&s.params, &s.derived, RateModel::Approximate);
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let n = 100_000;
    let mean = s.derived.mean_r1;
    let bins = 20;
    let mut counts = vec![0u32; bins];
    for _ in 0..n {
        let r = m.estimate_level1(&m.sample_sums(&mut rng)).rate;
        // equiprobable bins under Exp(mean)
        let u = 1.0 - (-r / mean).exp();
        counts[((u * bins as f64) as usize).min(bins - 1)] += 1;
    }
    let e = n as f64 / bins as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
    let crit = ChiSquared::new((bins - 1) as f64).unwrap().inverse_cdf(0.99);
    assert!(stat < crit, "chi-square {stat} >= {crit}");
}

#[test]
fn conditional_mean_regression() {
    let s = scenario(1.0);
    let d = &s.derived;
    let m = ChannelModel::new(&s.params, d, RateModel::Approximate);
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let edges = [0.0, 0.5, 1.0, 1.5, 2.0, 3.0];
    let mut acc = vec![(0.0, 0.0, 0u32); edges.len() - 1];
    for _ in 0..200_000 {
        let sums = m.sample_sums(&mut rng);
        let r1 = m.estimate_level1(&sums).rate;
        let r2 = m.estimate_level2(&sums).rate;
        let z = r1 / d.mean_r1;
        if let Some(k) = edges.windows(2).position(|w| z >= w[0] && z < w[1]) {
            acc[k].0 += r1;
            acc[k].1 += r2;
            acc[k].2 += 1;
        }
    }
    for (sx, sy, n) in acc {
        let (x, y) = (sx / n as f64, sy / n as f64);
        let predicted = d.c_r * x + d.r_e;
        assert!((y / predicted - 1.0).abs() < 0.03, "bin mean {x}: {y} vs {predicted}");
    }
}

#[test]
fn level_two_outage_law() {
    let p = SystemParams { m: 1, rho: 2.0, ..SystemParams::default() };
    let s = Scenario::new(p, BackoffPolicy::Fixed { sigma_m: 0.6, sigma_2m: 0.7 }).unwrap();
    let m = ChannelModel::new(&s.params, &s.derived, RateModel::Exact);
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let n = 100_000;
    let ok = (0..n)
        .filter(|_| m.outage_check(&m.estimate_level2(&m.sample_sums(&mut rng))).delivered)
        .count();
    let theory = s.derived.delivery_probability(2);
    assert!((ok as f64 / n as f64 / theory - 1.0).abs() < 0.02);
}
