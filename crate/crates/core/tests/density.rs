use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sparq_core::learner::{SacAgent, SacConfig};

const H: f64 = 1e-5;

/// CDF of `tanh(μ + σ·ξ)` at `x`, `ξ ~ N(0, 1)`.
fn squashed_cdf(x: f64, mu: f64, sigma: f64) -> f64 {
    0.5 * (1.0 + libm::erf((x.atanh() - mu) / (sigma * std::f64::consts::SQRT_2)))
}

fn numeric_log_density(a: &[f64], mu: &[f64], sigma: &[f64]) -> f64 {
    (0..a.len())
        .map(|k| {
            let p = (squashed_cdf(a[k] + H, mu[k], sigma[k]) - squashed_cdf(a[k] - H, mu[k], sigma[k])) / (2.0 * H);
            p.ln()
        })
        .sum()
}

fn agent(rng: &mut ChaCha8Rng, spread: f64, log_std_bias: f64) -> SacAgent<f64> {
    let cfg = SacConfig::default();
    let mut agent = SacAgent::<f64>::new(&cfg, rng).unwrap();
    let n = agent.actor().tensors().len();
    for (i, t) in agent.actor_mut().tensors_mut().into_iter().enumerate() {
        t.iter_mut().for_each(|w| *w = rng.random_range(-spread..spread));
        if i == n - 1 {
            t[2] += log_std_bias;
            t[3] += log_std_bias;
        }
    }
    agent
}

fn check(agent: &SacAgent<f64>, rng: &mut ChaCha8Rng, samples: usize) -> (f64, usize) {
    let cfg = agent.config().clone();
    let obs = Array2::from_shape_fn((samples, 4), |_| rng.random_range(-0.5..0.5));
    let noise = Array2::from_shape_fn((samples, 2), |_| rng.sample::<f64, _>(StandardNormal));
    let sample = agent.sample_policy(obs.view(), &noise);
    let out = agent.actor().predict(obs.view());
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for i in 0..samples {
        let a = [sample.action[[i, 0]], sample.action[[i, 1]]];
        if a.iter().any(|v| v.abs() > 0.95) {
            continue;
        }
        let mu = [out[[i, 0]], out[[i, 1]]];
        let sigma = [2usize, 3].map(|j| out[[i, j]].clamp(cfg.log_std_min, cfg.log_std_max).exp());
        let numeric = numeric_log_density(&a, &mu, &sigma);
        worst = worst.max((sample.log_prob[i] - numeric).abs());
        checked += 1;
    }
    (worst, checked)
}

#[test]
fn log_prob_matches_cdf_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for draw in 0..10 {
        let a = agent(&mut rng, 0.3, -1.0);
        let (worst, checked) = check(&a, &mut rng, 256);
        assert!(checked > 100, "draw {draw}: only {checked} unsaturated samples");
        assert!(worst < 1e-4, "draw {draw}: log-density error {worst:e}");
    }
}

#[test]
fn log_prob_uses_clamped_std() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for bias in [-9.0, 6.0] {
        let a = agent(&mut rng, 0.05, bias);
        let (worst, checked) = check(&a, &mut rng, 4096);
        assert!(checked > 50, "bias {bias}: only {checked} unsaturated samples");
        assert!(worst < 1e-4, "bias {bias}: log-density error {worst:e}");
    }
}
