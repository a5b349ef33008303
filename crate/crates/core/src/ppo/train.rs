use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::agent::{Adam, Agent, AgentConfig, LossStats, Sample};
use crate::env::{Env, EnvConfig, StepOutcome};
use crate::error::{Error, Result};
use crate::metrics::Tally;
use crate::policy::unit_to_action;

/// One row of the learning curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeStats {
    pub episode: usize,
    pub reward: f64,
    pub completion: f64,
    pub fulfillment: f64,
    pub cost: f64,
}

impl EpisodeStats {
    pub fn from_trace(episode: usize, records: &[StepOutcome]) -> Self {
        let t = Tally::from_trace(records);
        Self {
            episode,
            reward: t.total_reward,
            completion: t.completion_pct(),
            fulfillment: t.fulfillment_pct(),
            cost: t.total_cost,
        }
    }
}

/// Environment seed of training episode `episode`.
pub fn episode_seed(seed: u64, episode: usize) -> u64 {
    seed ^ (episode as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

struct Transition {
    obs: Vec<f64>,
    raw: Vec<f64>,
    log_prob: f64,
    value: f64,
    reward: f64,
}

struct Rollout {
    transitions: Vec<Transition>,
    records: Vec<StepOutcome>,
}

fn run_episode(agent: &Agent, env_cfg: &EnvConfig, seed: u64, use_donations: bool) -> Result<Rollout> {
    let mut env = Env::new(env_cfg.clone(), seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut transitions = Vec::with_capacity(env_cfg.horizon);
    let mut records = Vec::with_capacity(env_cfg.horizon);
    while !env.is_done() {
        let obs = env.observation();
        let out = agent.act(&obs, &mut rng)?;
        let action = unit_to_action(&env, &out.action, use_donations)?;
        let step = env.step(&action)?;
        transitions.push(Transition {
            obs,
            raw: out.raw,
            log_prob: out.log_prob,
            value: out.value,
            reward: step.reward,
        });
        records.push(step);
    }
    Ok(Rollout {
        transitions,
        records,
    })
}

/// Generalized advantage estimates and returns for one complete episode.
pub fn gae(rewards: &[f64], values: &[f64], gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    for t in (0..n).rev() {
        let next_value = if t + 1 < n { values[t + 1] } else { 0.0 };
        let delta = rewards[t] + gamma * next_value - values[t];
        next_adv = delta + gamma * lambda * next_adv;
        adv[t] = next_adv;
    }
    let ret = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, ret)
}

/// PPO training loop over whole episodes.
pub struct Trainer {
    cfg: AgentConfig,
    env_cfg: EnvConfig,
    use_donations: bool,
    seed: u64,
    agent: Agent,
    adam: Adam,
    rng: ChaCha8Rng,
    episodes: usize,
    curve: Vec<EpisodeStats>,
    losses: Vec<LossStats>,
}

impl Trainer {
    pub fn new(env_cfg: EnvConfig, cfg: AgentConfig, seed: u64, use_donations: bool) -> Result<Self> {
        cfg.validate()?;
        let probe = Env::new(env_cfg.clone(), seed)?;
        let agent = Agent::new(probe.observation_len(), probe.action_len(), &cfg, seed);
        Ok(Self {
            adam: Adam::new(agent.param_count(), cfg.learning_rate),
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0x5EED),
            agent,
            cfg,
            env_cfg,
            use_donations,
            seed,
            episodes: 0,
            curve: Vec::new(),
            losses: Vec::new(),
        })
    }

    pub fn agent(&self) -> &Agent {
        &self.agent
    }

    pub fn into_agent(self) -> Agent {
        self.agent
    }

    pub fn curve(&self) -> &[EpisodeStats] {
        &self.curve
    }

    pub fn losses(&self) -> &[LossStats] {
        &self.losses
    }

    pub fn episodes(&self) -> usize {
        self.episodes
    }

    pub fn env_config(&self) -> &EnvConfig {
        &self.env_cfg
    }

    /// Swaps the training environment; the encoding sizes must not change.
    pub fn set_env_config(&mut self, env_cfg: EnvConfig) -> Result<()> {
        let probe = Env::new(env_cfg.clone(), self.seed)?;
        if probe.observation_len() != self.agent.obs_len() || probe.action_len() != self.agent.act_len() {
            return Err(Error::config(
                "new environment changes the observation or action size",
            ));
        }
        self.env_cfg = env_cfg;
        Ok(())
    }

    fn collect(&self, first: usize, count: usize) -> Result<Vec<Rollout>> {
        let run = |ep: usize| {
            run_episode(
                &self.agent,
                &self.env_cfg,
                episode_seed(self.seed, ep),
                self.use_donations,
            )
        };
        if self.cfg.workers <= 1 || count <= 1 {
            return (first..first + count).map(run).collect();
        }
        let workers = self.cfg.workers.min(count);
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let run = &run;
                    s.spawn(move || {
                        (first + w..first + count)
                            .step_by(workers)
                            .map(|ep| run(ep).map(|r| (ep, r)))
                            .collect::<Result<Vec<_>>>()
                    })
                })
                .collect();
            let mut all = Vec::with_capacity(count);
            for h in handles {
                all.extend(h.join().expect("rollout worker panicked")?);
            }
            all.sort_by_key(|(ep, _)| *ep);
            Ok(all.into_iter().map(|(_, r)| r).collect())
        })
    }

    /// Runs `episodes` more training episodes, updating after every
    /// `rollout_length` collected transitions.
    pub fn train(&mut self, episodes: usize) -> Result<()> {
        let target = self.episodes + episodes;
        while self.episodes < target {
            let mut buffer = Vec::new();
            let mut steps = 0;
            while steps < self.cfg.rollout_length && self.episodes < target {
                let chunk = self.cfg.workers.min(target - self.episodes);
                for rollout in self.collect(self.episodes, chunk)? {
                    steps += rollout.transitions.len();
                    self.curve
                        .push(EpisodeStats::from_trace(self.episodes, &rollout.records));
                    self.episodes += 1;
                    buffer.push(rollout);
                }
            }
            if steps >= self.cfg.batch_size {
                let samples = self.samples(&buffer);
                self.update(samples)?;
            }
        }
        Ok(())
    }

    fn samples(&self, buffer: &[Rollout]) -> Vec<Sample> {
        let mut samples = Vec::new();
        for r in buffer {
            let rewards: Vec<f64> = r.transitions.iter().map(|t| t.reward).collect();
            let values: Vec<f64> = r.transitions.iter().map(|t| t.value).collect();
            let (adv, ret) = gae(&rewards, &values, self.cfg.gamma, self.cfg.gae_lambda);
            for (i, t) in r.transitions.iter().enumerate() {
                samples.push(Sample {
                    obs: t.obs.clone(),
                    raw: t.raw.clone(),
                    log_prob: t.log_prob,
                    advantage: adv[i],
                    ret: ret[i],
                });
            }
        }
        let n = samples.len() as f64;
        let mean = samples.iter().map(|s| s.advantage).sum::<f64>() / n;
        let var = samples.iter().map(|s| (s.advantage - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt() + 1e-8;
        for s in &mut samples {
            s.advantage = (s.advantage - mean) / std;
        }
        samples
    }

    fn update(&mut self, samples: Vec<Sample>) -> Result<()> {
        if samples.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        let mut order: Vec<usize> = (0..samples.len()).collect();
        for _ in 0..self.cfg.epochs {
            order.shuffle(&mut self.rng);
            for chunk in order.chunks(self.cfg.batch_size) {
                let batch: Vec<Sample> = chunk.iter().map(|&i| samples[i].clone()).collect();
                let (stats, mut grad) = self.agent.loss_and_grad(&batch, &self.cfg)?;
                if self.cfg.max_grad_norm > 0.0 {
                    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                    if norm > self.cfg.max_grad_norm {
                        let k = self.cfg.max_grad_norm / norm;
                        grad.iter_mut().for_each(|g| *g *= k);
                    }
                }
                let mut params = self.agent.params_flat();
                self.adam.step(&mut params, &grad);
                self.agent.set_params_flat(&params)?;
                self.agent.round_to_f32();
                self.losses.push(stats);
            }
        }
        Ok(())
    }
}
