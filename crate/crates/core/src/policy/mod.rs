//! Allocation policies: fixed baselines, uniform random, the one-step
//! exhaustive solver, the pool-aware wrapper and the learned agent.

mod myopic;

pub use myopic::{HeadSolver, Myopic, Pick};

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::decision::{beta_levels, AllocationDecision};
use crate::env::{Action, Env, EnvConfig, StepOutcome};
use crate::error::{Error, Result};
use crate::ppo::Agent;

/// Something that picks a joint action from the current environment state.
pub trait Policy {
    fn act(&mut self, env: &Env) -> Result<Action>;

    /// Called before each episode; stochastic policies reseed here.
    fn begin_episode(&mut self, _seed: u64) {}
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaseKind {
    Saving,
    Average,
    Max,
    Random,
    Myopic,
    Drl,
}

/// A policy name such as `average` or `max-gcp`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PolicyName {
    pub base: BaseKind,
    pub gcp: bool,
}

impl BaseKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BaseKind::Saving => "saving",
            BaseKind::Average => "average",
            BaseKind::Max => "max",
            BaseKind::Random => "random",
            BaseKind::Myopic => "myopic",
            BaseKind::Drl => "drl",
        }
    }
}

impl PolicyName {
    pub fn is_learned(&self) -> bool {
        self.base == BaseKind::Drl
    }
}

impl FromStr for PolicyName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (stem, gcp) = match s.strip_suffix("-gcp") {
            Some(stem) => (stem, true),
            None => (s, false),
        };
        let base = match stem {
            "saving" => BaseKind::Saving,
            "average" | "avg" => BaseKind::Average,
            "max" => BaseKind::Max,
            "random" => BaseKind::Random,
            "myopic" => BaseKind::Myopic,
            "drl" => BaseKind::Drl,
            _ => return Err(Error::UnknownPolicy(s.to_string())),
        };
        Ok(PolicyName { base, gcp })
    }
}

impl fmt::Display for PolicyName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.base.as_str())?;
        if self.gcp {
            f.write_str("-gcp")?;
        }
        Ok(())
    }
}

fn per_head(env: &Env, pick: impl Fn(&Env, usize) -> AllocationDecision) -> Action {
    Action {
        decisions: (0..env.heads().len()).map(|h| Some(pick(env, h))).collect(),
        donations: vec![0.0; env.msps().len()],
    }
}

/// Minimum of every range.
#[derive(Debug, Clone, Copy, Default)]
pub struct Saving;

impl Policy for Saving {
    fn act(&mut self, env: &Env) -> Result<Action> {
        Ok(per_head(env, |e, h| AllocationDecision::minimum(e.profile(h))))
    }
}

/// Midpoint of every range.
#[derive(Debug, Clone, Copy, Default)]
pub struct Average;

impl Policy for Average {
    fn act(&mut self, env: &Env) -> Result<Action> {
        Ok(per_head(env, |e, h| {
            AllocationDecision::midpoint(e.profile(h), e.beta_step())
        }))
    }
}

/// Maximum of every range.
#[derive(Debug, Clone, Copy, Default)]
pub struct Max;

impl Policy for Max {
    fn act(&mut self, env: &Env) -> Result<Action> {
        Ok(per_head(env, |e, h| AllocationDecision::maximum(e.profile(h))))
    }
}

/// Independent uniform draws over each admissible set.
#[derive(Debug, Clone)]
pub struct Random {
    rng: ChaCha8Rng,
}

impl Random {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Policy for Random {
    fn act(&mut self, env: &Env) -> Result<Action> {
        let mut decisions = Vec::with_capacity(env.heads().len());
        for h in 0..env.heads().len() {
            let p = env.profile(h);
            let levels = beta_levels(p, env.beta_step());
            let b = self.rng.random_range(p.bitrate_min..=p.bitrate_max);
            let f = self.rng.random_range(p.framerate_min..=p.framerate_max);
            let beta = levels[self.rng.random_range(0..levels.len())];
            decisions.push(Some(AllocationDecision::new(b, f, beta)));
        }
        Ok(Action {
            decisions,
            donations: vec![0.0; env.msps().len()],
        })
    }

    fn begin_episode(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }
}

impl Policy for Myopic {
    fn act(&mut self, env: &Env) -> Result<Action> {
        self.decide(env)
    }
}

/// Learned agent acting on its distribution mean.
pub struct Drl {
    agent: Agent,
    /// Apply the agent's donation outputs; otherwise donate nothing.
    use_donations: bool,
}

impl Drl {
    pub fn new(agent: Agent, use_donations: bool) -> Self {
        Self {
            agent,
            use_donations,
        }
    }

    pub fn agent(&self) -> &Agent {
        &self.agent
    }
}

/// Turns a unit-cube agent output into an environment action.
pub fn unit_to_action(env: &Env, unit: &[f64], use_donations: bool) -> Result<Action> {
    let mut action = env.decode_action(unit)?;
    if !use_donations {
        action.donations = vec![0.0; env.msps().len()];
    }
    Ok(action)
}

impl Policy for Drl {
    fn act(&mut self, env: &Env) -> Result<Action> {
        let out = self.agent.act_deterministic(&env.observation())?;
        unit_to_action(env, &out.action, self.use_donations)
    }
}

/// Pool-aware wrapper: an MSP whose planned spend fits its own budget
/// donates its whole surplus; one in deficit donates nothing and draws on
/// the pool.
pub struct Gcp<P> {
    inner: P,
}

impl<P: Policy> Gcp<P> {
    pub fn new(inner: P) -> Self {
        Self { inner }
    }
}

/// Planned spend of each MSP under `action`.
pub fn planned_costs(env: &Env, action: &Action) -> Result<Vec<f64>> {
    let mut costs = vec![0.0; env.msps().len()];
    for (i, h) in env.heads().iter().enumerate() {
        if let (true, Some(d)) = (h.request_active, action.decisions[i]) {
            costs[h.msp] += env.head_cost(i, &d)?;
        }
    }
    Ok(costs)
}

impl<P: Policy> Policy for Gcp<P> {
    fn act(&mut self, env: &Env) -> Result<Action> {
        let mut action = self.inner.act(env)?;
        let costs = planned_costs(env, &action)?;
        action.donations = env
            .msps()
            .iter()
            .zip(&costs)
            .map(|(m, &c)| if c <= m.budget { 1.0 } else { 0.0 })
            .collect();
        Ok(action)
    }

    fn begin_episode(&mut self, seed: u64) {
        self.inner.begin_episode(seed);
    }
}

/// Plays one episode of `policy` on a fresh environment.
pub fn run_episode(env_cfg: &EnvConfig, policy: &mut dyn Policy, seed: u64) -> Result<Vec<StepOutcome>> {
    let mut env = Env::new(env_cfg.clone(), seed)?;
    policy.begin_episode(seed);
    let mut records = Vec::with_capacity(env_cfg.horizon);
    while !env.is_done() {
        let action = policy.act(&env)?;
        records.push(env.step(&action)?);
    }
    Ok(records)
}

/// Builds a policy by name. Learned policies need `agent`.
pub fn build(name: PolicyName, seed: u64, agent: Option<Agent>) -> Result<Box<dyn Policy>> {
    fn wrap<P: Policy + 'static>(p: P, gcp: bool) -> Box<dyn Policy> {
        if gcp {
            Box::new(Gcp::new(p))
        } else {
            Box::new(p)
        }
    }
    Ok(match name.base {
        BaseKind::Saving => wrap(Saving, name.gcp),
        BaseKind::Average => wrap(Average, name.gcp),
        BaseKind::Max => wrap(Max, name.gcp),
        BaseKind::Random => wrap(Random::new(seed), name.gcp),
        BaseKind::Myopic => wrap(Myopic::new(), name.gcp),
        BaseKind::Drl => {
            let agent = agent.ok_or_else(|| {
                Error::config(format!("policy `{name}` needs a trained agent or checkpoint"))
            })?;
            // the learned variant chooses its own donations
            Box::new(Drl::new(agent, name.gcp))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::EnvConfig;

    #[test]
    fn names_round_trip() {
        for s in ["saving", "average", "max", "random", "myopic", "drl", "max-gcp", "drl-gcp"] {
            assert_eq!(s.parse::<PolicyName>().unwrap().to_string(), s);
        }
        assert!(matches!("greedy".parse::<PolicyName>(), Err(Error::UnknownPolicy(_))));
        assert!(build("drl".parse().unwrap(), 0, None).is_err());
    }

    #[test]
    fn fixed_policies_hit_table_bounds() {
        let env = Env::new(EnvConfig::noncoop(3, 10), 0).unwrap();
        let s = Saving.act(&env).unwrap().decisions;
        assert_eq!(s[0], Some(AllocationDecision::new(20, 30, 0.5)));
        assert_eq!(s[1], Some(AllocationDecision::new(30, 60, 0.5)));
        assert_eq!(s[2], Some(AllocationDecision::new(25, 30, 0.3)));
        let m = Max.act(&env).unwrap().decisions;
        assert_eq!(m[0], Some(AllocationDecision::new(25, 60, 1.0)));
        assert_eq!(m[1], Some(AllocationDecision::new(50, 120, 1.0)));
        assert_eq!(m[2], Some(AllocationDecision::new(35, 60, 1.0)));
        let a = Average.act(&env).unwrap().decisions;
        assert_eq!(a[0], Some(AllocationDecision::new(23, 45, 0.75)));
        assert_eq!(a[1], Some(AllocationDecision::new(40, 90, 0.75)));
        assert_eq!(a[2], Some(AllocationDecision::new(30, 45, 0.65)));
    }

    #[test]
    fn random_is_seeded_and_admissible() {
        let env = Env::new(EnvConfig::noncoop(3, 10), 0).unwrap();
        let mut a = Random::new(5);
        let mut b = Random::new(5);
        for _ in 0..200 {
            let x = a.act(&env).unwrap();
            assert_eq!(x, b.act(&env).unwrap());
            for (h, d) in x.decisions.iter().enumerate() {
                assert!(d.unwrap().is_admissible(env.profile(h), env.beta_step()));
            }
        }
    }

    #[test]
    fn gcp_donates_only_from_surplus() {
        let mut cfg = EnvConfig::coop(3, 10);
        cfg.budget = 1000.0;
        cfg.budget_weights = vec![1e-9, 1.0, 1.0];
        let env = Env::new(cfg, 3).unwrap();
        let action = Gcp::new(Max).act(&env).unwrap();
        assert_eq!(action.donations, vec![0.0, 1.0, 1.0]);
    }
}
