use serde::{Deserialize, Serialize};

/// Shared credit pool with per-MSP deposit/withdrawal accounting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcpLedger {
    pub pool: f64,
    pub deposits: Vec<f64>,
    pub withdrawals: Vec<f64>,
    /// `None` disables the withdrawal cap.
    pub cap_ratio: Option<f64>,
}

impl GcpLedger {
    pub fn new(msps: usize, cap_ratio: Option<f64>) -> Self {
        Self {
            pool: 0.0,
            deposits: vec![0.0; msps],
            withdrawals: vec![0.0; msps],
            cap_ratio,
        }
    }

    /// How much MSP `m` may still withdraw under the cap, ignoring the pool
    /// balance.
    pub fn cap_headroom(&self, m: usize) -> f64 {
        match self.cap_ratio {
            None => f64::INFINITY,
            Some(r) if r.is_infinite() => f64::INFINITY,
            Some(r) => (r * self.deposits[m] - self.withdrawals[m]).max(0.0),
        }
    }

    /// Upper bound on what MSP `m` could draw right now.
    pub fn available_to(&self, m: usize) -> f64 {
        self.pool.min(self.cap_headroom(m))
    }
}
