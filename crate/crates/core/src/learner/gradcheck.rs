//! Central finite-difference verification of the analytic SAC gradients.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::mlp::Mlp;
use super::sac::{draw_noise, Batch, SacAgent};

/// Finite-difference step.
pub const FD_STEP: f64 = 1e-5;
/// Denominator floor of the relative error, so entries whose true gradient is
/// numerically zero are compared in absolute terms.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Network {
    Critic1,
    Critic2,
    Actor,
    LogAlpha,
}

/// Multiplies one analytic gradient tensor by `factor` before comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mutation {
    pub network: Network,
    pub tensor: usize,
    pub factor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probe {
    pub network: Network,
    pub tensor: usize,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub worst: Option<Probe>,
    pub checked: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

pub fn gradient_check(agent: &SacAgent<f64>, batch: &Batch<f64>, noise_seed: u64) -> GradCheckReport {
    gradient_check_with(agent, batch, noise_seed, None)
}

struct Tally {
    report: GradCheckReport,
}

impl Tally {
    fn record(&mut self, probe: Probe) {
        let err = relative_error(probe.analytic, probe.numeric);
        self.report.checked += 1;
        if err > self.report.max_relative_error || self.report.worst.is_none() {
            self.report.max_relative_error = err.max(self.report.max_relative_error);
            self.report.worst = Some(probe);
        }
    }
}

fn check_network<F>(
    tally: &mut Tally,
    network: Network,
    params: &Mlp<f64>,
    analytic: &Mlp<f64>,
    mutation: Option<Mutation>,
    mut loss: F,
) where
    F: FnMut(&Mlp<f64>) -> f64,
{
    let mut probe = params.clone();
    let analytic: Vec<&[f64]> = analytic.tensors();
    for (ti, grads) in analytic.iter().enumerate() {
        let factor = match mutation {
            Some(m) if m.network == network && m.tensor == ti => m.factor,
            _ => 1.0,
        };
        for (ei, &g) in grads.iter().enumerate() {
            let orig = probe.tensors()[ti][ei];
            probe.tensors_mut()[ti][ei] = orig + FD_STEP;
            let up = loss(&probe);
            probe.tensors_mut()[ti][ei] = orig - FD_STEP;
            let down = loss(&probe);
            probe.tensors_mut()[ti][ei] = orig;
            tally.record(Probe {
                network,
                tensor: ti,
                index: ei,
                analytic: g * factor,
                numeric: (up - down) / (2.0 * FD_STEP),
            });
        }
    }
}

/// Compares every analytic gradient of the critic, actor and temperature
/// losses against central differences, under noise drawn from `noise_seed`.
pub fn gradient_check_with(
    agent: &SacAgent<f64>,
    batch: &Batch<f64>,
    noise_seed: u64,
    mutation: Option<Mutation>,
) -> GradCheckReport {
    assert!(!batch.is_empty(), "gradient check needs a non-empty batch");
    let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
    let next_noise = draw_noise::<f64, _>(batch.len(), &mut rng);
    let noise = draw_noise::<f64, _>(batch.len(), &mut rng);
    let grads = agent.loss_grads(batch, &next_noise, &noise);
    let y = agent.critic_targets(batch, &next_noise);
    let mut tally = Tally {
        report: GradCheckReport {
            max_relative_error: 0.0,
            worst: None,
            checked: 0,
        },
    };

    let mut work = agent.clone();
    let (c1, c2) = agent.critics();
    check_network(&mut tally, Network::Critic1, c1, &grads.critic1, mutation, |p| {
        work.critics_mut().0.clone_from(p);
        work.critic_loss(batch, &y)
    });
    work.critics_mut().0.clone_from(c1);
    check_network(&mut tally, Network::Critic2, c2, &grads.critic2, mutation, |p| {
        work.critics_mut().1.clone_from(p);
        work.critic_loss(batch, &y)
    });
    work.critics_mut().1.clone_from(c2);
    check_network(&mut tally, Network::Actor, agent.actor(), &grads.actor, mutation, |p| {
        work.actor_mut().clone_from(p);
        work.actor_loss(batch.s.view(), &noise)
    });

    let factor = match mutation {
        Some(m) if m.network == Network::LogAlpha => m.factor,
        _ => 1.0,
    };
    let la = agent.log_alpha();
    let alpha_loss = |v: f64| {
        let mut a = agent.clone();
        a.set_log_alpha(v);
        a.alpha_loss_and_grad(grads.mean_log_prob).0
    };
    tally.record(Probe {
        network: Network::LogAlpha,
        tensor: 0,
        index: 0,
        analytic: grads.log_alpha * factor,
        numeric: (alpha_loss(la + FD_STEP) - alpha_loss(la - FD_STEP)) / (2.0 * FD_STEP),
    });
    tally.report
}
