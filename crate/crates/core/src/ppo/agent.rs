use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::nn::Mlp;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub hidden: Vec<usize>,
    pub gamma: f64,
    /// 1.0 turns advantage estimation into plain Monte-Carlo returns.
    pub gae_lambda: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub clip_ratio: f64,
    pub epochs: usize,
    pub rollout_length: usize,
    pub entropy_coeff: f64,
    pub value_coeff: f64,
    /// Global gradient-norm clip; 0 disables it.
    pub max_grad_norm: f64,
    pub init_log_std: f64,
    /// Parallel rollout workers.
    pub workers: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            hidden: vec![128, 128],
            gamma: 0.97,
            gae_lambda: 0.95,
            batch_size: 128,
            learning_rate: 3e-4,
            clip_ratio: 0.2,
            epochs: 10,
            rollout_length: 2048,
            entropy_coeff: 0.0,
            value_coeff: 0.5,
            max_grad_norm: 0.5,
            init_log_std: -0.5,
            workers: 1,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::config("gamma must lie in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err(Error::config("gae_lambda must lie in [0, 1]"));
        }
        if !(self.clip_ratio > 0.0) {
            return Err(Error::config("clip_ratio must be positive"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::config("learning_rate must be positive"));
        }
        if self.batch_size == 0 || self.epochs == 0 || self.rollout_length == 0 || self.workers == 0
        {
            return Err(Error::config("agent sizes must be at least 1"));
        }
        if self.hidden.contains(&0) {
            return Err(Error::config("hidden layers must be non-empty"));
        }
        if !(self.entropy_coeff >= 0.0 && self.value_coeff >= 0.0 && self.max_grad_norm >= 0.0) {
            return Err(Error::config("loss coefficients must be non-negative"));
        }
        Ok(())
    }
}

/// One decision of the agent.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOutput {
    /// Squashed action in [0, 1] per dimension.
    pub action: Vec<f64>,
    /// Pre-squash Gaussian sample the log-probability refers to.
    pub raw: Vec<f64>,
    pub log_prob: f64,
    pub value: f64,
}

/// A transition prepared for the clipped-surrogate update.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub obs: Vec<f64>,
    pub raw: Vec<f64>,
    pub log_prob: f64,
    pub advantage: f64,
    pub ret: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct LossStats {
    pub total: f64,
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    /// Share of samples whose ratio left the clip interval.
    pub clip_fraction: f64,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Gaussian policy and value function as two separate networks, plus a
/// state-independent log standard deviation per action dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    actor: Mlp,
    log_std: Vec<f64>,
    critic: Mlp,
}

const MAGIC: &[u8; 8] = b"MVAPPO\0\0";
const VERSION: u32 = 1;

impl Agent {
    pub fn new(obs_len: usize, act_len: usize, cfg: &AgentConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sizes = |out: usize| {
            let mut s = vec![obs_len];
            s.extend(&cfg.hidden);
            s.push(out);
            s
        };
        let actor = Mlp::new(&sizes(act_len), 0.01, &mut rng);
        let critic = Mlp::new(&sizes(1), 1.0, &mut rng);
        let mut agent = Self {
            actor,
            log_std: vec![cfg.init_log_std; act_len],
            critic,
        };
        agent.round_to_f32();
        agent
    }

    pub fn from_parts(actor: Mlp, log_std: Vec<f64>, critic: Mlp) -> Result<Self> {
        if actor.output_len() != log_std.len()
            || critic.output_len() != 1
            || actor.input_len() != critic.input_len()
        {
            return Err(Error::Checkpoint("inconsistent network shapes".into()));
        }
        Ok(Self {
            actor,
            log_std,
            critic,
        })
    }

    pub fn obs_len(&self) -> usize {
        self.actor.input_len()
    }

    pub fn act_len(&self) -> usize {
        self.log_std.len()
    }

    pub fn actor(&self) -> &Mlp {
        &self.actor
    }

    pub fn critic(&self) -> &Mlp {
        &self.critic
    }

    pub fn log_std(&self) -> &[f64] {
        &self.log_std
    }

    fn check_obs(&self, obs: &[f64]) -> Result<()> {
        if obs.len() == self.obs_len() {
            Ok(())
        } else {
            Err(Error::Dimension {
                what: "observation",
                expected: self.obs_len(),
                got: obs.len(),
            })
        }
    }

    fn log_prob(&self, mean: &[f64], raw: &[f64]) -> f64 {
        mean.iter()
            .zip(raw)
            .zip(&self.log_std)
            .map(|((m, u), ls)| {
                let z = (u - m) / ls.exp();
                -0.5 * z * z - ls - 0.5 * (2.0 * PI).ln()
            })
            .sum()
    }

    pub fn value(&self, obs: &[f64]) -> Result<f64> {
        self.check_obs(obs)?;
        Ok(self.critic.forward(obs)[0])
    }

    /// Samples an action.
    pub fn act<R: Rng + ?Sized>(&self, obs: &[f64], rng: &mut R) -> Result<PolicyOutput> {
        self.check_obs(obs)?;
        let mean = self.actor.forward(obs);
        let raw: Vec<f64> = mean
            .iter()
            .zip(&self.log_std)
            .map(|(m, ls)| {
                let n: f64 = StandardNormal.sample(rng);
                m + ls.exp() * n
            })
            .collect();
        Ok(PolicyOutput {
            action: raw.iter().map(|&u| sigmoid(u)).collect(),
            log_prob: self.log_prob(&mean, &raw),
            value: self.critic.forward(obs)[0],
            raw,
        })
    }

    /// The distribution mean, squashed.
    pub fn act_deterministic(&self, obs: &[f64]) -> Result<PolicyOutput> {
        self.check_obs(obs)?;
        let mean = self.actor.forward(obs);
        Ok(PolicyOutput {
            action: mean.iter().map(|&u| sigmoid(u)).collect(),
            log_prob: self.log_prob(&mean, &mean),
            value: self.critic.forward(obs)[0],
            raw: mean,
        })
    }

    pub fn param_count(&self) -> usize {
        self.actor.params().len() + self.log_std.len() + self.critic.params().len()
    }

    /// Actor weights, log-std, then critic weights.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.param_count());
        v.extend_from_slice(self.actor.params());
        v.extend_from_slice(&self.log_std);
        v.extend_from_slice(self.critic.params());
        v
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Dimension {
                what: "parameters",
                expected: self.param_count(),
                got: flat.len(),
            });
        }
        let (a, rest) = flat.split_at(self.actor.params().len());
        let (s, c) = rest.split_at(self.log_std.len());
        self.actor.params_mut().copy_from_slice(a);
        self.log_std.copy_from_slice(s);
        self.critic.params_mut().copy_from_slice(c);
        Ok(())
    }

    /// Keeps parameters exactly representable in the checkpoint format.
    pub fn round_to_f32(&mut self) {
        let round = |v: &mut f64| *v = *v as f32 as f64;
        self.actor.params_mut().iter_mut().for_each(round);
        self.log_std.iter_mut().for_each(round);
        self.critic.params_mut().iter_mut().for_each(round);
    }

    /// Clipped-surrogate loss over `batch` and its gradient with respect to
    /// [`Agent::params_flat`].
    pub fn loss_and_grad(&self, batch: &[Sample], cfg: &AgentConfig) -> Result<(LossStats, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        let n = batch.len() as f64;
        let n_actor = self.actor.params().len();
        let n_std = self.log_std.len();
        let mut grad = vec![0.0; self.param_count()];
        let (lo, hi) = (1.0 - cfg.clip_ratio, 1.0 + cfg.clip_ratio);
        let mut stats = LossStats::default();
        let mut clipped = 0usize;

        for s in batch {
            self.check_obs(&s.obs)?;
            let trace = self.actor.forward_trace(&s.obs);
            let mean = trace.output().to_vec();
            let ratio = (self.log_prob(&mean, &s.raw) - s.log_prob).exp();
            let surr = ratio * s.advantage;
            let surr_clip = ratio.clamp(lo, hi) * s.advantage;
            let objective = surr.min(surr_clip);
            debug_assert!(objective <= surr_clip + 1e-12);
            stats.policy -= objective / n;
            if !(lo..=hi).contains(&ratio) {
                clipped += 1;
            }
            // The unclipped branch carries the gradient; the clipped branch
            // only wins once the ratio is outside the interval, where it is flat.
            let d_logp = if surr <= surr_clip { -s.advantage * ratio / n } else { 0.0 };
            if d_logp != 0.0 {
                let mut d_mean = vec![0.0; mean.len()];
                for i in 0..mean.len() {
                    let var = (2.0 * self.log_std[i]).exp();
                    let diff = s.raw[i] - mean[i];
                    d_mean[i] = d_logp * diff / var;
                    grad[n_actor + i] += d_logp * (diff * diff / var - 1.0);
                }
                self.actor.backward(&trace, &d_mean, &mut grad[..n_actor]);
            }

            let vtrace = self.critic.forward_trace(&s.obs);
            let v = vtrace.output()[0];
            let err = v - s.ret;
            stats.value += err * err / n;
            let d_v = cfg.value_coeff * 2.0 * err / n;
            self.critic.backward(&vtrace, &[d_v], &mut grad[n_actor + n_std..]);
        }

        let entropy_const = 0.5 * (2.0 * PI * std::f64::consts::E).ln();
        stats.entropy = self.log_std.iter().map(|ls| ls + entropy_const).sum();
        for g in &mut grad[n_actor..n_actor + n_std] {
            *g -= cfg.entropy_coeff;
        }
        stats.total = stats.policy + cfg.value_coeff * stats.value - cfg.entropy_coeff * stats.entropy;
        stats.clip_fraction = clipped as f64 / n;
        Ok((stats, grad))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        for net in [&self.actor, &self.critic] {
            out.extend_from_slice(&(net.sizes().len() as u32).to_le_bytes());
            for &s in net.sizes() {
                out.extend_from_slice(&(s as u32).to_le_bytes());
            }
        }
        out.extend_from_slice(&(self.log_std.len() as u32).to_le_bytes());
        for v in self.params_flat() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: &str| Error::Checkpoint(msg.to_string());
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(bad("not an agent checkpoint"));
        }
        let version = r.u32()?;
        if version != VERSION as usize {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let mut shapes = Vec::new();
        for _ in 0..2 {
            let n = r.u32()?;
            if !(2..=64).contains(&n) {
                return Err(bad("implausible layer count"));
            }
            shapes.push((0..n).map(|_| r.u32()).collect::<Result<Vec<_>>>()?);
        }
        let n_std = r.u32()?;
        let count = |s: &[usize]| s.windows(2).map(|w| w[0] * w[1] + w[1]).sum::<usize>();
        let total = count(&shapes[0]) + n_std + count(&shapes[1]);
        if r.bytes.len() - r.pos != 4 * total {
            return Err(bad("parameter block does not match the declared shapes"));
        }
        let floats: Vec<f64> = (0..total).map(|_| r.f32()).collect::<Result<_>>()?;
        let (a, rest) = floats.split_at(count(&shapes[0]));
        let (s, c) = rest.split_at(n_std);
        let actor = Mlp::from_parts(shapes[0].clone(), a.to_vec()).ok_or_else(|| bad("actor shape"))?;
        let critic =
            Mlp::from_parts(shapes[1].clone(), c.to_vec()).ok_or_else(|| bad("critic shape"))?;
        Self::from_parts(actor, s.to_vec(), critic)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let s = self
            .bytes
            .get(self.pos..self.pos + n)
            .ok_or_else(|| Error::Checkpoint("truncated file".into()))?;
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn f32(&mut self) -> Result<f64> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()) as f64)
    }
}

/// Adam with the usual bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.lr = lr;
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}
