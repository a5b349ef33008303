//! Discrete-time episode engine for the non-cooperative and cooperative
//! allocation problems.

mod config;
mod ledger;
mod reward;

pub use config::{ramp_weights, ClientDynamics, EnvConfig, HeadSpec, Mode, RequestMode, RewardConfig};
pub use ledger::GcpLedger;
pub use reward::{counts_for_terminal, msp_fulfilled, phi, satisfied};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::decision::AllocationDecision;
use crate::error::{Error, Result};
use crate::immersion::{immersion_with_tau, resolve_tau};
use crate::params::{RoomKind, VRoomProfile};
use crate::scaling::demand;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadState {
    pub id: usize,
    pub room: RoomKind,
    pub msp: usize,
    pub clients: u32,
    pub eps: f64,
    pub tau: f64,
    pub dt_count: usize,
    pub request_active: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MspState {
    pub id: usize,
    pub budget: f64,
    pub initial_budget: f64,
    pub quota: u32,
    /// Steps in which every active Head met the threshold.
    pub fulfilled: u32,
    /// Executed (non-dropped) requests.
    pub completed: u32,
    pub posted: u32,
    pub head_ids: Vec<usize>,
}

/// One joint action: a decision per Head (`None` declines the Head's
/// request) and, in cooperative mode, a donation fraction per MSP.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Action {
    pub decisions: Vec<Option<AllocationDecision>>,
    pub donations: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadOutcome {
    pub msp: usize,
    pub active: bool,
    pub executed: bool,
    pub clients: u32,
    pub decision: Option<AllocationDecision>,
    /// Realized immersion; 0 for requests that were not executed.
    pub immersion: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MspOutcome {
    /// Cost of the requests the MSP tried to serve.
    pub requested: f64,
    /// Cost actually paid.
    pub cost: f64,
    pub withdrawal: f64,
    pub donation: f64,
    pub dropped: bool,
    pub fulfilled: bool,
    pub budget: f64,
}

/// Everything that happened in one step. Serialized as one trace record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub t: usize,
    pub heads: Vec<HeadOutcome>,
    pub msps: Vec<MspOutcome>,
    pub pool: f64,
    pub reward: f64,
    pub immediate: f64,
    pub terminal: f64,
    pub stuck: u32,
    pub done: bool,
}

/// Double-Poisson client update, clamped to `[0, capacity]`.
pub fn update_clients<R: Rng + ?Sized>(clients: u32, profile: &VRoomProfile, rng: &mut R) -> u32 {
    let draw = |rate: f64, rng: &mut R| -> i64 {
        if rate > 0.0 {
            Poisson::new(rate).expect("positive rate").sample(rng) as i64
        } else {
            0
        }
    };
    let arrivals = draw(profile.arrival_rate, rng);
    let departures = draw(profile.departure_rate, rng);
    (clients as i64 + arrivals - departures).clamp(0, profile.capacity as i64) as u32
}

pub struct Env {
    cfg: EnvConfig,
    profiles: Vec<VRoomProfile>,
    heads: Vec<HeadState>,
    msps: Vec<MspState>,
    ledger: GcpLedger,
    t: usize,
    stuck: u32,
    done: bool,
    terminal_count: u64,
    settled: f64,
    rng: ChaCha8Rng,
}

impl Env {
    pub fn new(cfg: EnvConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let specs = cfg.resolved_heads();
        let profiles: Vec<_> = specs.iter().map(|h| cfg.rooms.get(h.room).clone()).collect();
        let mut env = Self {
            profiles,
            heads: Vec::new(),
            msps: Vec::new(),
            ledger: GcpLedger::new(cfg.msps, cfg.withdraw_cap),
            t: 0,
            stuck: 0,
            done: false,
            terminal_count: 0,
            settled: 0.0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            cfg,
        };
        env.reset(seed)?;
        Ok(env)
    }

    /// Restarts the episode under `seed` and returns the first observation.
    pub fn reset(&mut self, seed: u64) -> Result<Vec<f64>> {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        let specs = self.cfg.resolved_heads();
        let mut heads = Vec::with_capacity(specs.len());
        for (id, spec) in specs.iter().enumerate() {
            let p = &self.profiles[id];
            let clients = match spec.clients {
                Some(c) => c,
                None => self.rng.random_range(1..=p.capacity.div_ceil(2)),
            };
            heads.push(HeadState {
                id,
                room: spec.room,
                msp: spec.msp,
                clients,
                eps: spec.eps.unwrap_or_else(|| p.default_eps()),
                tau: resolve_tau(p, &self.cfg.global, spec.dt_count)?,
                dt_count: spec.dt_count,
                request_active: false,
            });
        }
        self.msps = self
            .cfg
            .initial_budgets()
            .into_iter()
            .enumerate()
            .map(|(id, b)| MspState {
                id,
                budget: b,
                initial_budget: b,
                quota: self.cfg.quota,
                fulfilled: 0,
                completed: 0,
                posted: 0,
                head_ids: heads.iter().filter(|h| h.msp == id).map(|h| h.id).collect(),
            })
            .collect();
        self.heads = heads;
        self.ledger = GcpLedger::new(self.cfg.msps, self.cfg.withdraw_cap);
        self.t = 0;
        self.stuck = 0;
        self.done = false;
        self.terminal_count = 0;
        self.settled = 0.0;
        self.refresh_requests();
        Ok(self.observation())
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn heads(&self) -> &[HeadState] {
        &self.heads
    }

    pub fn msps(&self) -> &[MspState] {
        &self.msps
    }

    pub fn ledger(&self) -> &GcpLedger {
        &self.ledger
    }

    pub fn profile(&self, head: usize) -> &VRoomProfile {
        &self.profiles[head]
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn threshold(&self) -> f64 {
        self.cfg.reward.threshold
    }

    pub fn beta_step(&self) -> f64 {
        self.cfg.global.beta_grid_step
    }

    /// Sum of all costs settled since the last reset.
    pub fn settled_cost(&self) -> f64 {
        self.settled
    }

    /// Immersion a Head would get from `decision` (projected first).
    pub fn head_immersion(&self, head: usize, decision: &AllocationDecision) -> Result<f64> {
        let h = &self.heads[head];
        let p = &self.profiles[head];
        let d = decision.project(p, self.beta_step());
        Ok(immersion_with_tau(&d, h.eps, h.tau, p, &self.cfg.global)?.immersion)
    }

    /// Price of serving a Head with `decision` at its current client count.
    pub fn head_cost(&self, head: usize, decision: &AllocationDecision) -> Result<f64> {
        let p = &self.profiles[head];
        let d = decision.project(p, self.beta_step());
        Ok(demand(&d, self.heads[head].clients, p, &self.cfg.global)?.total_cost)
    }

    /// Cheapest possible cost of serving all active requests of MSP `m`.
    pub fn min_cost(&self, m: usize) -> f64 {
        self.msps[m]
            .head_ids
            .iter()
            .filter(|&&h| self.heads[h].request_active)
            .map(|&h| {
                self.head_cost(h, &AllocationDecision::minimum(&self.profiles[h]))
                    .expect("minimum decision is admissible")
            })
            .sum()
    }

    /// Budget MSP `m` could spend this step, including what it may draw from
    /// the pool in cooperative mode.
    pub fn spendable(&self, m: usize) -> f64 {
        match self.cfg.mode {
            Mode::Noncoop => self.msps[m].budget,
            Mode::Coop => self.msps[m].budget + self.ledger.available_to(m),
        }
    }

    pub fn observation_len(&self) -> usize {
        let base = 2 * self.msps.len() + 2 * self.heads.len() + 1;
        match self.cfg.mode {
            Mode::Noncoop => base,
            Mode::Coop => base + 2,
        }
    }

    pub fn action_len(&self) -> usize {
        let base = 3 * self.heads.len();
        match self.cfg.mode {
            Mode::Noncoop => base,
            Mode::Coop => base + self.msps.len(),
        }
    }

    pub fn observation(&self) -> Vec<f64> {
        let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
        let mut obs = Vec::with_capacity(self.observation_len());
        obs.extend(self.msps.iter().map(|m| ratio(m.budget, m.initial_budget)));
        obs.extend(self.msps.iter().map(|m| ratio(m.fulfilled as f64, m.quota as f64)));
        obs.extend(
            self.heads
                .iter()
                .zip(&self.profiles)
                .map(|(h, p)| h.clients as f64 / p.capacity as f64),
        );
        obs.extend(self.heads.iter().map(|h| if h.request_active { 1.0 } else { 0.0 }));
        obs.push(self.t as f64 / self.cfg.horizon as f64);
        if self.cfg.mode == Mode::Coop {
            let total: f64 = self.msps.iter().map(|m| m.initial_budget).sum();
            obs.push(ratio(self.ledger.pool, total));
            obs.push(self.stuck as f64 / self.cfg.stuck_cutoff as f64);
        }
        obs
    }

    /// Maps a unit-cube action vector (3 entries per Head, then one donation
    /// fraction per MSP in cooperative mode) onto the admissible grids.
    pub fn decode_action(&self, unit: &[f64]) -> Result<Action> {
        if unit.len() != self.action_len() {
            return Err(Error::Dimension {
                what: "action",
                expected: self.action_len(),
                got: unit.len(),
            });
        }
        let step = self.beta_step();
        let decisions = self
            .profiles
            .iter()
            .enumerate()
            .map(|(i, p)| {
                Some(AllocationDecision::from_unit(
                    p,
                    step,
                    [unit[3 * i], unit[3 * i + 1], unit[3 * i + 2]],
                ))
            })
            .collect();
        let donations = unit[3 * self.heads.len()..]
            .iter()
            .map(|&d| if d.is_nan() { 0.0 } else { d.clamp(0.0, 1.0) })
            .collect();
        Ok(Action {
            decisions,
            donations,
        })
    }

    pub fn step(&mut self, action: &Action) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::domain("step called on a finished episode"));
        }
        let (n_heads, n_msps) = (self.heads.len(), self.msps.len());
        if action.decisions.len() != n_heads {
            return Err(Error::Dimension {
                what: "decisions",
                expected: n_heads,
                got: action.decisions.len(),
            });
        }
        let donations = match self.cfg.mode {
            Mode::Noncoop => vec![0.0; n_msps],
            Mode::Coop => {
                if action.donations.len() != n_msps {
                    return Err(Error::Dimension {
                        what: "donations",
                        expected: n_msps,
                        got: action.donations.len(),
                    });
                }
                if let Some(d) = action.donations.iter().find(|d| !(0.0..=1.0).contains(*d)) {
                    return Err(Error::domain(format!("donation fraction {d} outside [0, 1]")));
                }
                action.donations.clone()
            }
        };

        // Price every request an MSP intends to serve.
        let step = self.beta_step();
        let mut planned: Vec<Option<(AllocationDecision, f64)>> = vec![None; n_heads];
        let mut requested = vec![0.0; n_msps];
        for (i, h) in self.heads.iter().enumerate() {
            if !h.request_active {
                continue;
            }
            if let Some(d) = action.decisions[i] {
                let p = &self.profiles[i];
                let d = d.project(p, step);
                let imm = immersion_with_tau(&d, h.eps, h.tau, p, &self.cfg.global)?.immersion;
                requested[h.msp] += demand(&d, h.clients, p, &self.cfg.global)?.total_cost;
                planned[i] = Some((d, imm));
            }
        }

        // Deficits are covered from the start-of-step pool, smallest first.
        let pool_start = self.ledger.pool;
        let mut deficits: Vec<(f64, usize)> = (0..n_msps)
            .filter_map(|m| {
                let w = requested[m] - self.msps[m].budget;
                (w > 0.0).then_some((w, m))
            })
            .collect();
        deficits.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut withdrawal = vec![0.0; n_msps];
        let mut dropped = vec![false; n_msps];
        let mut remaining = pool_start;
        for &(w, m) in &deficits {
            if w <= remaining && w <= self.ledger.cap_headroom(m) {
                withdrawal[m] = w;
                remaining -= w;
            } else {
                dropped[m] = true;
            }
        }

        let mut msp_out = Vec::with_capacity(n_msps);
        let (mut total_d, mut total_w) = (0.0, 0.0);
        for m in 0..n_msps {
            let msp = &mut self.msps[m];
            let (cost, donation) = if dropped[m] {
                (0.0, 0.0)
            } else {
                let surplus = (msp.budget - requested[m]).max(0.0);
                let donation = donations[m] * surplus;
                msp.budget = surplus - donation;
                self.ledger.deposits[m] += donation;
                self.ledger.withdrawals[m] += withdrawal[m];
                (requested[m], donation)
            };
            self.settled += cost;
            total_d += donation;
            total_w += withdrawal[m];
            msp_out.push(MspOutcome {
                requested: requested[m],
                cost,
                withdrawal: withdrawal[m],
                donation,
                dropped: dropped[m],
                fulfilled: false,
                budget: msp.budget,
            });
        }
        self.ledger.pool = (pool_start + total_d - total_w).max(0.0);

        let thr = self.cfg.reward.threshold;
        let mut head_out = Vec::with_capacity(n_heads);
        let mut immediate = 0.0;
        for (i, h) in self.heads.iter().enumerate() {
            let executed = h.request_active && !dropped[h.msp] && planned[i].is_some();
            let immersion = if executed { planned[i].unwrap().1 } else { 0.0 };
            let z = satisfied(immersion, h.request_active, thr);
            if h.request_active {
                immediate += phi(immersion, thr);
                self.msps[h.msp].posted += 1;
            }
            if executed {
                self.msps[h.msp].completed += 1;
                if counts_for_terminal(immersion, self.cfg.reward.i_max) {
                    self.terminal_count += 1;
                }
            }
            head_out.push(HeadOutcome {
                msp: h.msp,
                active: h.request_active,
                executed,
                clients: h.clients,
                decision: planned[i].map(|p| p.0),
                immersion,
                satisfied: z,
            });
        }
        for (m, out) in msp_out.iter_mut().enumerate() {
            let zs: Vec<bool> = self.msps[m]
                .head_ids
                .iter()
                .filter(|&&h| head_out[h].active)
                .map(|&h| head_out[h].satisfied)
                .collect();
            out.fulfilled = msp_fulfilled(&zs);
            if out.fulfilled {
                self.msps[m].fulfilled += 1;
            }
        }
        immediate *= self.cfg.reward.w_imm;

        if self.cfg.clients == ClientDynamics::DoublePoisson {
            for (h, p) in self.heads.iter_mut().zip(&self.profiles) {
                h.clients = update_clients(h.clients, p, &mut self.rng);
            }
        }
        let t = self.t;
        self.t += 1;
        self.refresh_requests();
        if self.is_stuck() {
            self.stuck += 1;
        } else {
            self.stuck = 0;
        }
        self.done = self.t >= self.cfg.horizon || self.stuck >= self.cfg.stuck_cutoff;
        let terminal = if self.done {
            self.cfg.reward.w_fin * self.terminal_count as f64
        } else {
            0.0
        };

        Ok(StepOutcome {
            t,
            heads: head_out,
            msps: msp_out,
            pool: self.ledger.pool,
            reward: immediate + terminal,
            immediate,
            terminal,
            stuck: self.stuck,
            done: self.done,
        })
    }

    fn refresh_requests(&mut self) {
        let within = self.t < self.cfg.horizon;
        for h in &mut self.heads {
            let msp = &self.msps[h.msp];
            let wants = match self.cfg.requests {
                RequestMode::UntilQuota => msp.completed < msp.quota,
                RequestMode::EveryStep => true,
            };
            h.request_active = within && wants && !(self.cfg.idle_when_empty && h.clients == 0);
        }
    }

    /// No MSP with pending requests can afford even its cheapest allocation,
    /// or there is nothing left to serve.
    fn is_stuck(&self) -> bool {
        (0..self.msps.len()).all(|m| {
            let pending = self.msps[m]
                .head_ids
                .iter()
                .any(|&h| self.heads[h].request_active);
            !pending || self.min_cost(m) > self.spendable(m)
        })
    }
}
