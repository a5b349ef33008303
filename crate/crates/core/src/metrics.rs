//! Completion, fulfillment, cost and fairness metrics computed from step
//! records.

use serde::Serialize;

use crate::env::StepOutcome;

/// Gini coefficient `sum_i sum_j |x_i - x_j| / (2 M^2 mean)`; 0 for an
/// all-zero or empty vector.
pub fn gini(xs: &[f64]) -> f64 {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    if xs.is_empty() || mean == 0.0 {
        return 0.0;
    }
    let mut diff = 0.0;
    for a in xs {
        for b in xs {
            diff += (a - b).abs();
        }
    }
    diff / (2.0 * m * m * mean)
}

/// Spread between the largest and smallest entries.
pub fn range(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
    max - min
}

fn pct(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

/// Counts accumulated over one or more episodes.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Tally {
    pub steps: u64,
    pub posted: u64,
    pub executed: u64,
    /// Executed requests at or above the threshold.
    pub fulfilled: u64,
    /// MSP-steps with at least one active request.
    pub msp_steps: u64,
    /// MSP-steps where every active Head met the threshold.
    pub msp_fulfilled: u64,
    pub served_clients: u64,
    /// Clients of requests that were posted but not served at threshold.
    pub failed_clients: u64,
    pub total_cost: f64,
    pub total_reward: f64,
    pub immersion_sum: f64,
    /// Executed requests per MSP.
    pub completed_per_msp: Vec<u64>,
}

impl Tally {
    pub fn from_trace(records: &[StepOutcome]) -> Self {
        let mut t = Tally::default();
        for r in records {
            t.add(r);
        }
        t
    }

    pub fn add(&mut self, r: &StepOutcome) {
        if self.completed_per_msp.len() < r.msps.len() {
            self.completed_per_msp.resize(r.msps.len(), 0);
        }
        self.steps += 1;
        self.total_reward += r.reward;
        let mut msp_active = vec![false; r.msps.len()];
        for h in &r.heads {
            if h.active {
                self.posted += 1;
                msp_active[h.msp] = true;
                if !(h.executed && h.satisfied) {
                    self.failed_clients += h.clients as u64;
                }
            }
            if h.executed {
                self.executed += 1;
                self.completed_per_msp[h.msp] += 1;
                self.served_clients += h.clients as u64;
                self.immersion_sum += h.immersion;
                if h.satisfied {
                    self.fulfilled += 1;
                }
            }
        }
        self.msp_steps += msp_active.iter().filter(|&&a| a).count() as u64;
        for m in &r.msps {
            self.total_cost += m.cost;
            if m.fulfilled {
                self.msp_fulfilled += 1;
            }
        }
    }

    pub fn merge(&mut self, other: &Tally) {
        self.steps += other.steps;
        self.posted += other.posted;
        self.executed += other.executed;
        self.fulfilled += other.fulfilled;
        self.msp_steps += other.msp_steps;
        self.msp_fulfilled += other.msp_fulfilled;
        self.served_clients += other.served_clients;
        self.failed_clients += other.failed_clients;
        self.total_cost += other.total_cost;
        self.total_reward += other.total_reward;
        self.immersion_sum += other.immersion_sum;
        if self.completed_per_msp.len() < other.completed_per_msp.len() {
            self.completed_per_msp.resize(other.completed_per_msp.len(), 0);
        }
        for (a, b) in self.completed_per_msp.iter_mut().zip(&other.completed_per_msp) {
            *a += b;
        }
    }

    pub fn completion_pct(&self) -> f64 {
        pct(self.executed, self.posted)
    }

    pub fn fulfillment_pct(&self) -> f64 {
        pct(self.fulfilled, self.executed)
    }

    pub fn msp_fulfillment_pct(&self) -> f64 {
        pct(self.msp_fulfilled, self.msp_steps)
    }

    /// Mean immersion of executed requests.
    pub fn mean_immersion(&self) -> f64 {
        if self.executed == 0 {
            0.0
        } else {
            self.immersion_sum / self.executed as f64
        }
    }

    fn completed(&self) -> Vec<f64> {
        self.completed_per_msp.iter().map(|&c| c as f64).collect()
    }

    pub fn range(&self) -> f64 {
        range(&self.completed())
    }

    pub fn gini(&self) -> f64 {
        gini(&self.completed())
    }
}

/// Executed over posted requests, in percent.
pub fn completion_pct(records: &[StepOutcome]) -> f64 {
    Tally::from_trace(records).completion_pct()
}

/// Executed requests meeting the threshold over executed requests, in percent.
pub fn fulfillment_pct(records: &[StepOutcome]) -> f64 {
    Tally::from_trace(records).fulfillment_pct()
}

pub fn served_clients(records: &[StepOutcome]) -> u64 {
    Tally::from_trace(records).served_clients
}

pub fn total_cost(records: &[StepOutcome]) -> f64 {
    Tally::from_trace(records).total_cost
}
