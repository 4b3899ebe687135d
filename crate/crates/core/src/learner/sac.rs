//! Soft actor-critic with a tanh-squashed Gaussian actor and twin critics.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::adam::{clip_global_norm, Adam};
use super::mlp::Mlp;
use super::real::Real;
use super::replay::Transition;
use crate::env::{EnvAction, EnvState};
use crate::error::{Error, Result};

pub const OBS_DIM: usize = 4;
pub const ACT_DIM: usize = 2;
const LOG_2PI_HALF: f64 = 0.918_938_533_204_672_7;
const SQUASH_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SacConfig {
    pub hidden: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub gamma: f64,
    pub tau: f64,
    pub warmup_steps: u64,
    pub updates_per_step: usize,
    pub alpha: f64,
    pub auto_alpha: bool,
    pub target_entropy: f64,
    pub grad_clip: f64,
    pub replay_capacity: usize,
    pub log_std_min: f64,
    pub log_std_max: f64,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            hidden: 64,
            learning_rate: 1e-3,
            batch_size: 256,
            gamma: 0.99,
            tau: 0.005,
            warmup_steps: 1_000,
            updates_per_step: 1,
            alpha: 0.003,
            auto_alpha: false,
            target_entropy: -2.0,
            grad_clip: 10.0,
            replay_capacity: 50_000,
            log_std_min: -5.0,
            log_std_max: 2.0,
        }
    }
}

impl SacConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("learner: {m}")));
        if self.hidden == 0 {
            return bad("hidden must be >= 1");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be > 0");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau must lie in (0, 1]");
        }
        if !(self.alpha > 0.0) {
            return bad("alpha must be > 0");
        }
        if !(self.grad_clip > 0.0) {
            return bad("grad_clip must be > 0");
        }
        if self.replay_capacity == 0 {
            return bad("replay_capacity must be >= 1");
        }
        if !(self.log_std_min < self.log_std_max) {
            return bad("log_std_min must be below log_std_max");
        }
        Ok(())
    }
}

/// A replay batch laid out as matrices.
#[derive(Debug, Clone)]
pub struct Batch<T> {
    pub s: Array2<T>,
    pub a: Array2<T>,
    pub r: Array1<T>,
    pub s_next: Array2<T>,
    pub done: Array1<T>,
}

impl<T: Real> Batch<T> {
    pub fn from_transitions(items: &[Transition]) -> Self {
        let n = items.len();
        let mut s = Array2::zeros((n, OBS_DIM));
        let mut s_next = Array2::zeros((n, OBS_DIM));
        let mut a = Array2::zeros((n, ACT_DIM));
        for (i, t) in items.iter().enumerate() {
            for j in 0..OBS_DIM {
                s[[i, j]] = T::lit(t.s[j]);
                s_next[[i, j]] = T::lit(t.s_next[j]);
            }
            for j in 0..ACT_DIM {
                a[[i, j]] = T::lit(t.a[j]);
            }
        }
        Self {
            s,
            a,
            r: items.iter().map(|t| T::lit(t.r_eff)).collect(),
            s_next,
            done: items.iter().map(|t| if t.done { T::one() } else { T::zero() }).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }
}

/// Standard-normal noise of shape `(n, ACT_DIM)`.
pub fn draw_noise<T: Real, R: Rng + ?Sized>(n: usize, rng: &mut R) -> Array2<T> {
    Array2::from_shape_simple_fn((n, ACT_DIM), || T::lit(rng.sample::<f64, _>(StandardNormal)))
}

/// Reparameterized actor sample with what the backward pass needs.
#[derive(Debug, Clone)]
pub struct PolicySample<T> {
    cache: super::mlp::ForwardCache<T>,
    noise: Array2<T>,
    std: Array2<T>,
    clamp_mask: Array2<T>,
    sech2: Array2<T>,
    pub action: Array2<T>,
    pub log_prob: Array1<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub alpha_loss: f64,
    pub alpha: f64,
    pub mean_log_prob: f64,
}

/// Analytic gradients of one update's losses.
#[derive(Debug, Clone)]
pub struct LossGrads<T> {
    pub critic_loss: T,
    pub critic1: Mlp<T>,
    pub critic2: Mlp<T>,
    pub actor_loss: T,
    pub actor: Mlp<T>,
    pub alpha_loss: T,
    pub log_alpha: T,
    pub mean_log_prob: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SacAgent<T> {
    pub(crate) cfg: SacConfig,
    pub(crate) actor: Mlp<T>,
    pub(crate) critic1: Mlp<T>,
    pub(crate) critic2: Mlp<T>,
    pub(crate) target1: Mlp<T>,
    pub(crate) target2: Mlp<T>,
    pub(crate) log_alpha: T,
    pub(crate) actor_opt: Adam<T>,
    pub(crate) critic1_opt: Adam<T>,
    pub(crate) critic2_opt: Adam<T>,
    pub(crate) alpha_opt: Adam<T>,
    pub(crate) updates: u64,
}

fn tensor_lens<T: Real>(net: &Mlp<T>) -> Vec<usize> {
    net.tensors().iter().map(|t| t.len()).collect()
}

fn concat_sa<T: Real>(s: &ArrayView2<'_, T>, a: &ArrayView2<'_, T>) -> Array2<T> {
    ndarray::concatenate(Axis(1), &[s.view(), a.view()]).expect("matching batch sizes")
}

fn polyak<T: Real>(target: &mut Mlp<T>, source: &Mlp<T>, tau: T) {
    if tau == T::one() {
        target.clone_from(source);
        return;
    }
    let keep = T::one() - tau;
    for (t, s) in target.tensors_mut().into_iter().zip(source.tensors()) {
        t.iter_mut().zip(s).for_each(|(t, &s)| *t = tau * s + keep * *t);
    }
}

fn first_non_finite<T: Real>(values: &Array1<T>) -> Vec<usize> {
    values
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.is_finite())
        .map(|(i, _)| i)
        .collect()
}

impl<T: Real> SacAgent<T> {
    pub fn new<R: Rng + ?Sized>(cfg: &SacConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let h = cfg.hidden;
        let mut actor = Mlp::new(&[OBS_DIM, h, h, 2 * ACT_DIM], rng);
        actor.scale_output_layer(T::lit(0.01));
        let critic1 = Mlp::new(&[OBS_DIM + ACT_DIM, h, h, 1], rng);
        let critic2 = Mlp::new(&[OBS_DIM + ACT_DIM, h, h, 1], rng);
        let lr = cfg.learning_rate;
        Ok(Self {
            cfg: cfg.clone(),
            actor_opt: Adam::new(lr, &tensor_lens(&actor)),
            critic1_opt: Adam::new(lr, &tensor_lens(&critic1)),
            critic2_opt: Adam::new(lr, &tensor_lens(&critic2)),
            alpha_opt: Adam::new(lr, &[1]),
            target1: critic1.clone(),
            target2: critic2.clone(),
            actor,
            critic1,
            critic2,
            log_alpha: T::lit(cfg.alpha.ln()),
            updates: 0,
        })
    }

    pub fn config(&self) -> &SacConfig {
        &self.cfg
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn alpha(&self) -> T {
        self.log_alpha.exp()
    }

    pub fn actor(&self) -> &Mlp<T> {
        &self.actor
    }

    pub fn actor_mut(&mut self) -> &mut Mlp<T> {
        &mut self.actor
    }

    pub fn critics_mut(&mut self) -> (&mut Mlp<T>, &mut Mlp<T>) {
        (&mut self.critic1, &mut self.critic2)
    }

    pub fn targets(&self) -> (&Mlp<T>, &Mlp<T>) {
        (&self.target1, &self.target2)
    }

    pub fn critics(&self) -> (&Mlp<T>, &Mlp<T>) {
        (&self.critic1, &self.critic2)
    }

    pub fn log_alpha(&self) -> T {
        self.log_alpha
    }

    pub fn set_log_alpha(&mut self, v: T) {
        self.log_alpha = v;
    }

    /// Same weights and optimizer state in another precision.
    pub fn cast<U: Real>(&self) -> SacAgent<U> {
        let adam = |o: &Adam<T>| Adam {
            lr: U::lit(o.lr.as_f64()),
            beta1: U::lit(o.beta1.as_f64()),
            beta2: U::lit(o.beta2.as_f64()),
            eps: U::lit(o.eps.as_f64()),
            step: o.step,
            m: o.m.iter().map(|v| v.iter().map(|x| U::lit(x.as_f64())).collect()).collect(),
            v: o.v.iter().map(|v| v.iter().map(|x| U::lit(x.as_f64())).collect()).collect(),
        };
        SacAgent {
            cfg: self.cfg.clone(),
            actor: self.actor.cast(),
            critic1: self.critic1.cast(),
            critic2: self.critic2.cast(),
            target1: self.target1.cast(),
            target2: self.target2.cast(),
            log_alpha: U::lit(self.log_alpha.as_f64()),
            actor_opt: adam(&self.actor_opt),
            critic1_opt: adam(&self.critic1_opt),
            critic2_opt: adam(&self.critic2_opt),
            alpha_opt: adam(&self.alpha_opt),
            updates: self.updates,
        }
    }

    /// Draws `a = tanh(μ + σ·ε)` for the given noise and its log-density.
    pub fn sample_policy(&self, s: ArrayView2<'_, T>, noise: &Array2<T>) -> PolicySample<T> {
        let cache = self.actor.forward(s);
        let out = &cache.output;
        let mean = out.slice(s![.., ..ACT_DIM]);
        let raw_log_std = out.slice(s![.., ACT_DIM..]);
        let (lo, hi) = (T::lit(self.cfg.log_std_min), T::lit(self.cfg.log_std_max));
        let log_std = raw_log_std.mapv(|v| v.max(lo).min(hi));
        let clamp_mask = raw_log_std.mapv(|v| if v > lo && v < hi { T::one() } else { T::zero() });
        let std = log_std.mapv(T::exp);
        let u = &mean + &(&std * noise);
        let action = u.mapv(T::tanh);
        // 1 − tanh²(u) without the cancellation of forming it from `action`
        let sech2 = u.mapv(|v| T::one() / (v.cosh() * v.cosh()));

        let n = s.nrows();
        let const_term = T::lit(LOG_2PI_HALF);
        let half = T::lit(0.5);
        let eps = T::lit(SQUASH_EPS);
        let mut log_prob = Array1::zeros(n);
        for i in 0..n {
            let mut lp = T::zero();
            for j in 0..ACT_DIM {
                let e = noise[[i, j]];
                lp += -half * e * e - log_std[[i, j]] - const_term - (sech2[[i, j]] + eps).ln();
            }
            log_prob[i] = lp;
        }
        PolicySample {
            cache,
            noise: noise.clone(),
            std,
            clamp_mask,
            sech2,
            action,
            log_prob,
        }
    }

    /// Backpropagates `∂L/∂a` and `∂L/∂log π` into actor gradients.
    fn policy_backward(
        &self,
        sample: &PolicySample<T>,
        d_action: &Array2<T>,
        d_log_prob: &Array1<T>,
        grads: &mut Mlp<T>,
    ) {
        let n = sample.action.nrows();
        let eps = T::lit(SQUASH_EPS);
        let two = T::lit(2.0);
        let mut d_out = Array2::zeros((n, 2 * ACT_DIM));
        for i in 0..n {
            for j in 0..ACT_DIM {
                let a = sample.action[[i, j]];
                let one_minus = sample.sech2[[i, j]];
                let dlp = d_log_prob[i];
                let du = d_action[[i, j]] * one_minus + dlp * two * a * one_minus / (one_minus + eps);
                d_out[[i, j]] = du;
                d_out[[i, ACT_DIM + j]] =
                    (du * sample.std[[i, j]] * sample.noise[[i, j]] - dlp) * sample.clamp_mask[[i, j]];
            }
        }
        self.actor.backward(&sample.cache, d_out.view(), Some(grads));
    }

    /// Bootstrapped critic targets for a batch.
    pub fn critic_targets(&self, batch: &Batch<T>, next_noise: &Array2<T>) -> Array1<T> {
        let next = self.sample_policy(batch.s_next.view(), next_noise);
        let x = concat_sa(&batch.s_next.view(), &next.action.view());
        let q1 = self.target1.predict(x.view());
        let q2 = self.target2.predict(x.view());
        let alpha = self.alpha();
        let gamma = T::lit(self.cfg.gamma);
        let mut y = Array1::zeros(batch.len());
        for i in 0..batch.len() {
            let soft = q1[[i, 0]].min(q2[[i, 0]]) - alpha * next.log_prob[i];
            y[i] = batch.r[i] + gamma * (T::one() - batch.done[i]) * soft;
        }
        y
    }

    /// `Σₖ mean((Qₖ(s, a) − y)²)` and its gradients for both critics.
    pub fn critic_loss_and_grads(&self, batch: &Batch<T>, y: &Array1<T>) -> (T, Mlp<T>, Mlp<T>) {
        let x = concat_sa(&batch.s.view(), &batch.a.view());
        let n = T::lit(batch.len() as f64);
        let mut loss = T::zero();
        let mut out = Vec::with_capacity(2);
        for critic in [&self.critic1, &self.critic2] {
            let cache = critic.forward(x.view());
            let mut d = Array2::zeros((batch.len(), 1));
            for i in 0..batch.len() {
                let err = cache.output[[i, 0]] - y[i];
                loss += err * err / n;
                d[[i, 0]] = T::lit(2.0) * err / n;
            }
            let mut g = critic.zeros_like();
            critic.backward(&cache, d.view(), Some(&mut g));
            out.push(g);
        }
        let g2 = out.pop().expect("two critics");
        let g1 = out.pop().expect("two critics");
        (loss, g1, g2)
    }

    pub fn critic_loss(&self, batch: &Batch<T>, y: &Array1<T>) -> T {
        let x = concat_sa(&batch.s.view(), &batch.a.view());
        let n = T::lit(batch.len() as f64);
        let mut loss = T::zero();
        for critic in [&self.critic1, &self.critic2] {
            let q = critic.predict(x.view());
            for i in 0..batch.len() {
                let err = q[[i, 0]] - y[i];
                loss += err * err / n;
            }
        }
        loss
    }

    pub fn actor_loss(&self, s: ArrayView2<'_, T>, noise: &Array2<T>) -> T {
        let nf = T::lit(s.nrows() as f64);
        let sample = self.sample_policy(s, noise);
        let x = concat_sa(&s, &sample.action.view());
        let q1 = self.critic1.predict(x.view());
        let q2 = self.critic2.predict(x.view());
        let alpha = self.alpha();
        (0..s.nrows()).fold(T::zero(), |acc, i| {
            acc + (alpha * sample.log_prob[i] - q1[[i, 0]].min(q2[[i, 0]])) / nf
        })
    }

    /// `mean(α·log π(a|s) − min(Q₁, Q₂)(s, a))` with reparameterized `a`,
    /// its actor gradient, and the batch-mean log-probability.
    pub fn actor_loss_and_grads(&self, s: ArrayView2<'_, T>, noise: &Array2<T>) -> (T, Mlp<T>, T) {
        let n = s.nrows();
        let nf = T::lit(n as f64);
        let sample = self.sample_policy(s, noise);
        let x = concat_sa(&s, &sample.action.view());
        let c1 = self.critic1.forward(x.view());
        let c2 = self.critic2.forward(x.view());
        let alpha = self.alpha();
        let mut loss = T::zero();
        let mut pick1 = Array2::zeros((n, 1));
        let mut pick2 = Array2::zeros((n, 1));
        for i in 0..n {
            let (q1, q2) = (c1.output[[i, 0]], c2.output[[i, 0]]);
            loss += (alpha * sample.log_prob[i] - q1.min(q2)) / nf;
            // ∂L/∂Q for whichever critic attains the minimum
            if q1 <= q2 {
                pick1[[i, 0]] = -T::one() / nf;
            } else {
                pick2[[i, 0]] = -T::one() / nf;
            }
        }
        let dx1 = self.critic1.backward(&c1, pick1.view(), None);
        let dx2 = self.critic2.backward(&c2, pick2.view(), None);
        let d_action = (&dx1 + &dx2).slice(s![.., OBS_DIM..]).to_owned();
        let d_log_prob = Array1::from_elem(n, alpha / nf);
        let mut grads = self.actor.zeros_like();
        self.policy_backward(&sample, &d_action, &d_log_prob, &mut grads);
        let mean_lp = sample.log_prob.sum() / nf;
        (loss, grads, mean_lp)
    }

    /// Temperature loss `−log α·(mean log π + H̄)` and its derivative.
    pub fn alpha_loss_and_grad(&self, mean_log_prob: T) -> (T, T) {
        let shifted = mean_log_prob + T::lit(self.cfg.target_entropy);
        (-self.log_alpha * shifted, -shifted)
    }

    /// All loss gradients at the current parameters with fixed noise, with
    /// the actor loss evaluated against the current critics.
    pub fn loss_grads(&self, batch: &Batch<T>, next_noise: &Array2<T>, noise: &Array2<T>) -> LossGrads<T> {
        let y = self.critic_targets(batch, next_noise);
        let (critic_loss, critic1, critic2) = self.critic_loss_and_grads(batch, &y);
        let (actor_loss, actor, mean_log_prob) = self.actor_loss_and_grads(batch.s.view(), noise);
        let (alpha_loss, log_alpha) = self.alpha_loss_and_grad(mean_log_prob);
        LossGrads {
            critic_loss,
            critic1,
            critic2,
            actor_loss,
            actor,
            alpha_loss,
            log_alpha,
            mean_log_prob,
        }
    }

    fn ensure_finite(&self, what: &'static str, values: &Array1<T>, indices: &[usize]) -> Result<()> {
        let bad = first_non_finite(values);
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::NonFinite {
                what,
                update: self.updates,
                indices: bad.iter().map(|&i| indices.get(i).copied().unwrap_or(i)).collect(),
            })
        }
    }

    /// One gradient step on critics, actor and (optionally) temperature,
    /// followed by the target update. `indices` are the replay positions of
    /// the batch rows, reported on a non-finite abort.
    pub fn update<R: Rng + ?Sized>(&mut self, batch: &Batch<T>, indices: &[usize], rng: &mut R) -> Result<UpdateStats> {
        assert!(!batch.is_empty(), "sac update needs a non-empty batch");
        let n = batch.len();
        let clip = T::lit(self.cfg.grad_clip);
        let next_noise = draw_noise::<T, _>(n, rng);
        let noise = draw_noise::<T, _>(n, rng);

        let y = self.critic_targets(batch, &next_noise);
        self.ensure_finite("critic_target", &y, indices)?;
        let (critic_loss, mut g1, mut g2) = self.critic_loss_and_grads(batch, &y);
        if !critic_loss.is_finite() {
            return Err(Error::NonFinite {
                what: "critic_loss",
                update: self.updates,
                indices: indices.to_vec(),
            });
        }
        clip_global_norm(g1.tensors_mut(), clip);
        clip_global_norm(g2.tensors_mut(), clip);
        self.critic1_opt.apply(self.critic1.tensors_mut(), &g1.tensors());
        self.critic2_opt.apply(self.critic2.tensors_mut(), &g2.tensors());

        let (actor_loss, mut ga, mean_lp) = self.actor_loss_and_grads(batch.s.view(), &noise);
        if !actor_loss.is_finite() {
            return Err(Error::NonFinite {
                what: "actor_loss",
                update: self.updates,
                indices: indices.to_vec(),
            });
        }
        clip_global_norm(ga.tensors_mut(), clip);
        self.actor_opt.apply(self.actor.tensors_mut(), &ga.tensors());

        let (alpha_loss, g_alpha) = self.alpha_loss_and_grad(mean_lp);
        let alpha_used = self.alpha();
        if self.cfg.auto_alpha {
            let mut la = [self.log_alpha];
            self.alpha_opt.apply(vec![&mut la[..]], &[&[g_alpha][..]]);
            self.log_alpha = la[0];
        }

        let tau = T::lit(self.cfg.tau);
        polyak(&mut self.target1, &self.critic1, tau);
        polyak(&mut self.target2, &self.critic2, tau);
        self.updates += 1;

        if !self.all_finite() {
            return Err(Error::NonFinite {
                what: "parameters",
                update: self.updates,
                indices: indices.to_vec(),
            });
        }
        Ok(UpdateStats {
            critic_loss: critic_loss.as_f64(),
            actor_loss: actor_loss.as_f64(),
            alpha_loss: alpha_loss.as_f64(),
            alpha: alpha_used.as_f64(),
            mean_log_prob: mean_lp.as_f64(),
        })
    }

    pub fn soft_update_targets(&mut self, tau: f64) {
        let tau = T::lit(tau);
        polyak(&mut self.target1, &self.critic1, tau);
        polyak(&mut self.target2, &self.critic2, tau);
    }

    fn networks(&self) -> [&Mlp<T>; 5] {
        [&self.actor, &self.critic1, &self.critic2, &self.target1, &self.target2]
    }

    pub fn all_finite(&self) -> bool {
        self.log_alpha.is_finite()
            && self
                .networks()
                .iter()
                .all(|n| n.tensors().iter().all(|t| t.iter().all(|v| v.is_finite())))
    }

    /// Policy action in `[-1, 1]²` for one observation.
    pub fn act<R: Rng + ?Sized>(&self, obs: &[f64; OBS_DIM], deterministic: bool, rng: &mut R) -> [f64; ACT_DIM] {
        let s = Array2::from_shape_fn((1, OBS_DIM), |(_, j)| T::lit(obs[j]));
        if deterministic {
            let out = self.actor.predict(s.view());
            [out[[0, 0]].tanh().as_f64(), out[[0, 1]].tanh().as_f64()]
        } else {
            let noise = draw_noise::<T, _>(1, rng);
            let sample = self.sample_policy(s.view(), &noise);
            [sample.action[[0, 0]].as_f64(), sample.action[[0, 1]].as_f64()]
        }
    }

    /// `tanh(mean)` for a batch of observations.
    pub fn deterministic_actions(&self, obs: &[[f64; OBS_DIM]]) -> Vec<[f64; ACT_DIM]> {
        if obs.is_empty() {
            return Vec::new();
        }
        let s = Array2::from_shape_fn((obs.len(), OBS_DIM), |(i, j)| T::lit(obs[i][j]));
        let out = self.actor.predict(s.view());
        out.outer_iter()
            .map(|row| [row[0].tanh().as_f64(), row[1].tanh().as_f64()])
            .collect()
    }

    /// Samples (or takes the mode of) the policy and maps it to a workspace target.
    pub fn select_action<R: Rng + ?Sized>(
        &self,
        state: &EnvState,
        deterministic: bool,
        half_extent: f64,
        rng: &mut R,
    ) -> ([f64; ACT_DIM], EnvAction) {
        let a = self.act(&state.observation(), deterministic, rng);
        (a, to_workspace(a, half_extent))
    }

    /// SHA-256 over every network parameter and the temperature.
    pub fn params_hash(&self) -> String {
        let mut hasher = Sha256::new();
        let mut buf = Vec::new();
        for net in self.networks() {
            for t in net.tensors() {
                buf.clear();
                t.iter().for_each(|v| v.put_le(&mut buf));
                hasher.update(&buf);
            }
        }
        buf.clear();
        self.log_alpha.put_le(&mut buf);
        hasher.update(&buf);
        hex::encode(hasher.finalize())
    }

    /// Q-values of both critics for a batch.
    pub fn q_values(&self, batch: &Batch<T>) -> (Array1<T>, Array1<T>) {
        let x = concat_sa(&batch.s.view(), &batch.a.view());
        let col = |m: Array2<T>| m.column(0).to_owned();
        (col(self.critic1.predict(x.view())), col(self.critic2.predict(x.view())))
    }
}

/// `[-1, 1]²` policy action to a workspace target.
pub fn to_workspace(a: [f64; ACT_DIM], half_extent: f64) -> EnvAction {
    EnvAction::new(a[0] * half_extent, a[1] * half_extent)
}

/// Workspace target back to policy coordinates, kept strictly inside the
/// tanh range.
pub fn from_workspace(target: EnvAction, half_extent: f64) -> [f64; ACT_DIM] {
    let map = |v: f64| (v / half_extent).clamp(-0.999, 0.999);
    [map(target.target_xy[0]), map(target.target_xy[1])]
}
