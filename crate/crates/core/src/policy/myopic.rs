use crate::decision::{decision_grid, AllocationDecision};
use crate::env::{Action, Env};
use crate::error::Result;
use crate::immersion::immersion_with_tau;
use crate::params::{GlobalParams, VRoomProfile};
use crate::scaling::demand;

/// A grid point with its immersion, which does not depend on client count.
#[derive(Debug, Clone, Copy)]
struct Candidate {
    decision: AllocationDecision,
    immersion: f64,
}

/// Exhaustive one-step solver for a single Head with fixed ε and τ.
#[derive(Debug, Clone)]
pub struct HeadSolver {
    profile: VRoomProfile,
    params: GlobalParams,
    grid: Vec<Candidate>,
}

/// Result of a single-Head search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pick {
    pub decision: AllocationDecision,
    pub immersion: f64,
    pub cost: f64,
    pub meets_threshold: bool,
}

impl HeadSolver {
    pub fn new(profile: &VRoomProfile, params: &GlobalParams, eps: f64, tau: f64) -> Result<Self> {
        let grid = decision_grid(profile, params.beta_grid_step)
            .into_iter()
            .map(|decision| {
                Ok(Candidate {
                    decision,
                    immersion: immersion_with_tau(&decision, eps, tau, profile, params)?.immersion,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            profile: profile.clone(),
            params: params.clone(),
            grid,
        })
    }

    /// Cheapest grid point reaching `threshold`; the highest-immersion point
    /// when none does. Ties go to the lexicographically smallest (B, f, β),
    /// which is the first in grid order.
    pub fn solve(&self, clients: u32, threshold: f64) -> Result<Pick> {
        let mut best: Option<Pick> = None;
        for c in self.grid.iter().filter(|c| c.immersion >= threshold) {
            let cost = demand(&c.decision, clients, &self.profile, &self.params)?.total_cost;
            if best.is_none_or(|b| cost < b.cost) {
                best = Some(Pick {
                    decision: c.decision,
                    immersion: c.immersion,
                    cost,
                    meets_threshold: true,
                });
            }
        }
        if let Some(b) = best {
            return Ok(b);
        }
        let top = self
            .grid
            .iter()
            .fold(None::<&Candidate>, |acc, c| match acc {
                Some(a) if a.immersion >= c.immersion => Some(a),
                _ => Some(c),
            })
            .expect("grid is never empty");
        Ok(Pick {
            decision: top.decision,
            immersion: top.immersion,
            cost: demand(&top.decision, clients, &self.profile, &self.params)?.total_cost,
            meets_threshold: false,
        })
    }
}

/// Per-Head greedy solver with budget-aware admission per MSP.
#[derive(Debug, Clone, Default)]
pub struct Myopic {
    solvers: Vec<HeadSolver>,
    /// (ε, τ) per Head the solvers were built for.
    key: Vec<(f64, f64)>,
}

impl Myopic {
    pub fn new() -> Self {
        Self::default()
    }

    fn prepare(&mut self, env: &Env) -> Result<()> {
        let key: Vec<_> = env.heads().iter().map(|h| (h.eps, h.tau)).collect();
        if key != self.key || self.solvers.len() != env.heads().len() {
            self.solvers = env
                .heads()
                .iter()
                .enumerate()
                .map(|(i, h)| HeadSolver::new(env.profile(i), &env.config().global, h.eps, h.tau))
                .collect::<Result<_>>()?;
            self.key = key;
        }
        Ok(())
    }

    pub fn decide(&mut self, env: &Env) -> Result<Action> {
        self.prepare(env)?;
        let heads = env.heads();
        let mut decisions = vec![None; heads.len()];
        let mut picks = Vec::with_capacity(heads.len());
        for (i, h) in heads.iter().enumerate() {
            let pick = self.solvers[i].solve(h.clients, env.threshold())?;
            decisions[i] = Some(pick.decision);
            picks.push(pick);
        }
        for (m, msp) in env.msps().iter().enumerate() {
            let mut active: Vec<usize> = msp
                .head_ids
                .iter()
                .copied()
                .filter(|&h| heads[h].request_active)
                .collect();
            active.sort_by(|&a, &b| picks[a].cost.total_cmp(&picks[b].cost).then(a.cmp(&b)));
            let limit = env.spendable(m);
            let mut spent = 0.0;
            for h in active {
                if spent + picks[h].cost <= limit {
                    spent += picks[h].cost;
                } else {
                    decisions[h] = None;
                }
            }
        }
        Ok(Action {
            decisions,
            donations: vec![0.0; env.msps().len()],
        })
    }
}
