use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{GlobalParams, RoomKind, RoomTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Each MSP pays from its own budget only.
    Noncoop,
    /// MSPs share surplus credits through the pool.
    Coop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RequestMode {
    /// A Head posts every step until its MSP has executed `quota` requests.
    UntilQuota,
    /// Every Head posts every step of the horizon.
    EveryStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClientDynamics {
    /// Client counts keep their initial value.
    Fixed,
    /// Each step adds Poisson(arrival) and removes Poisson(departure) clients.
    DoublePoisson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadSpec {
    pub room: RoomKind,
    pub msp: usize,
    /// Structural accuracy; the room's midpoint when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    /// Initial client count; drawn from the seed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clients: Option<u32>,
    #[serde(default = "one")]
    pub dt_count: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub threshold: f64,
    pub i_max: f64,
    pub w_imm: f64,
    pub w_fin: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            threshold: 0.6,
            i_max: 1.0,
            w_imm: 1.0,
            w_fin: 2.0,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.threshold && self.threshold <= self.i_max && self.i_max <= 1.0) {
            return Err(Error::config(
                "reward thresholds must satisfy 0 < threshold <= i_max <= 1",
            ));
        }
        if !(self.w_imm >= 0.0 && self.w_fin >= 0.0) {
            return Err(Error::config("reward weights must be non-negative"));
        }
        Ok(())
    }
}

/// Everything needed to build an environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub mode: Mode,
    pub msps: usize,
    pub horizon: usize,
    /// Explicit topology. Empty means one Head per MSP with rooms taken from
    /// the default sequence.
    #[serde(default)]
    pub heads: Vec<HeadSpec>,
    /// Mean initial budget per MSP.
    pub budget: f64,
    /// Budgets ramp linearly from `(1 - spread) * budget` for the first MSP
    /// to `(1 + spread) * budget` for the last; 0 gives equal budgets.
    #[serde(default)]
    pub budget_spread: f64,
    /// Explicit relative budget weights per MSP, overriding the ramp: MSP m
    /// gets `budget * M * w_m / sum(w)`.
    #[serde(default)]
    pub budget_weights: Vec<f64>,
    pub quota: u32,
    pub requests: RequestMode,
    pub clients: ClientDynamics,
    /// Cumulative withdrawals may not exceed this multiple of cumulative
    /// deposits. Absent means uncapped.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub withdraw_cap: Option<f64>,
    pub stuck_cutoff: u32,
    /// Heads with no clients post no request.
    #[serde(default)]
    pub idle_when_empty: bool,
    pub reward: RewardConfig,
    #[serde(default)]
    pub global: GlobalParams,
    #[serde(default)]
    pub rooms: RoomTable,
}

/// Linear budget ramp from `1 - spread` to `1 + spread` across `m` MSPs.
pub fn ramp_weights(m: usize, spread: f64) -> Vec<f64> {
    if m <= 1 {
        return vec![1.0; m];
    }
    (0..m)
        .map(|i| 1.0 - spread + 2.0 * spread * i as f64 / (m - 1) as f64)
        .collect()
}

impl EnvConfig {
    /// Independent MSPs with equal budgets, fixed client counts and a
    /// per-MSP request quota.
    pub fn noncoop(msps: usize, horizon: usize) -> Self {
        Self {
            mode: Mode::Noncoop,
            msps,
            horizon,
            heads: Vec::new(),
            budget: 60.0,
            budget_spread: 0.0,
            budget_weights: Vec::new(),
            quota: 50,
            requests: RequestMode::UntilQuota,
            clients: ClientDynamics::Fixed,
            withdraw_cap: None,
            stuck_cutoff: 10,
            idle_when_empty: false,
            reward: RewardConfig::default(),
            global: GlobalParams::default(),
            rooms: RoomTable::default(),
        }
    }

    /// Pool-sharing MSPs with unbalanced budgets, double-Poisson traffic and
    /// a request from every Head at every step.
    pub fn coop(msps: usize, horizon: usize) -> Self {
        Self {
            mode: Mode::Coop,
            budget: 120.0,
            budget_spread: 0.8,
            quota: horizon as u32,
            requests: RequestMode::EveryStep,
            clients: ClientDynamics::DoublePoisson,
            ..Self::noncoop(msps, horizon)
        }
    }

    /// Topology with defaults filled in.
    pub fn resolved_heads(&self) -> Vec<HeadSpec> {
        if !self.heads.is_empty() {
            return self.heads.clone();
        }
        (0..self.msps)
            .map(|m| HeadSpec {
                room: RoomKind::nth_in_sequence(m),
                msp: m,
                eps: None,
                clients: None,
                dt_count: 1,
            })
            .collect()
    }

    pub fn initial_budgets(&self) -> Vec<f64> {
        let weights = if self.budget_weights.is_empty() {
            ramp_weights(self.msps, self.budget_spread)
        } else {
            self.budget_weights.clone()
        };
        let total: f64 = weights.iter().sum();
        weights
            .iter()
            .map(|w| self.budget * self.msps as f64 * w / total)
            .collect()
    }

    /// The same setup with a different MSP count and horizon. Requires the
    /// default topology and no explicit budget weights.
    pub fn reshape(&self, msps: usize, horizon: usize) -> Result<Self> {
        if !self.heads.is_empty() || !self.budget_weights.is_empty() {
            return Err(Error::config(
                "cannot resize a configuration with an explicit topology or budget weights",
            ));
        }
        let mut c = self.clone();
        c.msps = msps;
        c.horizon = horizon;
        if c.requests == RequestMode::EveryStep {
            c.quota = horizon as u32;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.global.validate()?;
        self.rooms.validate()?;
        self.reward.validate()?;
        if self.msps == 0 {
            return Err(Error::config("at least one MSP is required"));
        }
        if self.horizon == 0 {
            return Err(Error::config("horizon must be positive"));
        }
        if !(self.budget >= 0.0 && self.budget.is_finite()) {
            return Err(Error::config("budget must be a non-negative number"));
        }
        if !(0.0..=1.0).contains(&self.budget_spread) {
            return Err(Error::config("budget_spread must lie in [0, 1]"));
        }
        if !self.budget_weights.is_empty() {
            if self.budget_weights.len() != self.msps {
                return Err(Error::Dimension {
                    what: "budget_weights",
                    expected: self.msps,
                    got: self.budget_weights.len(),
                });
            }
            if self.budget_weights.iter().any(|w| !(*w >= 0.0))
                || !(self.budget_weights.iter().sum::<f64>() > 0.0)
            {
                return Err(Error::config(
                    "budget weights must be non-negative with a positive sum",
                ));
            }
        }
        if let Some(cap) = self.withdraw_cap {
            if !(cap >= 0.0) {
                return Err(Error::config("withdraw_cap must be non-negative"));
            }
        }
        if self.stuck_cutoff == 0 {
            return Err(Error::config("stuck_cutoff must be positive"));
        }
        let heads = self.resolved_heads();
        for (i, h) in heads.iter().enumerate() {
            if h.msp >= self.msps {
                return Err(Error::config(format!(
                    "head {i} belongs to MSP {} but only {} exist",
                    h.msp, self.msps
                )));
            }
            let p = self.rooms.get(h.room);
            if let Some(eps) = h.eps {
                if !(p.eps_min..=p.eps_max).contains(&eps) {
                    return Err(Error::config(format!(
                        "head {i}: eps {eps} outside [{}, {}]",
                        p.eps_min, p.eps_max
                    )));
                }
            }
            if let Some(c) = h.clients {
                if c > p.capacity {
                    return Err(Error::config(format!(
                        "head {i}: {c} clients exceed capacity {}",
                        p.capacity
                    )));
                }
            }
        }
        Ok(())
    }
}
