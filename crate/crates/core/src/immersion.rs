//! Perceptual quality, responsiveness and digital-twin fidelity of a Head
//! under one allocation, and their weighted composite (immersion).
//!
//! Everything here is a pure function of its arguments.

use serde::{Deserialize, Serialize};

use crate::decision::{is_on_beta_grid, AllocationDecision};
use crate::error::{Error, Result};
use crate::params::{GlobalParams, VRoomProfile};

/// All intermediate terms of one immersion evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImmersionBreakdown {
    pub ssim: f64,
    /// Raw VMAF, on [0, 100].
    pub vmaf: f64,
    pub qope: f64,
    pub qope_norm: f64,
    pub framerate_norm: f64,
    pub dt_accuracy: f64,
    pub dt_accuracy_norm: f64,
    pub immersion: f64,
}

fn check_bitrate(bitrate: f64) -> Result<()> {
    if bitrate > 0.0 && bitrate.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("bitrate must be positive, got {bitrate}")))
    }
}

/// Structural similarity as a function of bitrate and rotation speed,
/// floored at `e0`.
pub fn ssim(bitrate: f64, omega: f64, params: &GlobalParams) -> Result<f64> {
    check_bitrate(bitrate)?;
    let [e0, e1, e2, e3, e4] = params.ssim_coeffs;
    let raw = 1.0 - (e1 + e2 * omega) * bitrate.powf(-(e3 + e4 * omega));
    Ok(raw.max(e0))
}

/// Streaming smoothness score, capped at 100.
pub fn vmaf(bitrate: f64, omega: f64, params: &GlobalParams) -> Result<f64> {
    check_bitrate(bitrate)?;
    let [j1, j2, j3, j4] = params.vmaf_coeffs;
    Ok((j1 + j2 * omega + j3 * bitrate + j4 * omega * bitrate).min(100.0))
}

fn raw_qope(bitrate: f64, profile: &VRoomProfile, params: &GlobalParams) -> Result<f64> {
    let s = ssim(bitrate, profile.omega, params)?;
    let v = vmaf(bitrate, profile.omega, params)?;
    Ok(profile.w_sigma * s + profile.w_eta * (v / 100.0))
}

/// Raw and room-normalized perceptual quality. VMAF is rescaled to [0, 1]
/// before weighting; normalization spans the room's bitrate range.
pub fn qope(bitrate: f64, profile: &VRoomProfile, params: &GlobalParams) -> Result<(f64, f64)> {
    let (lo, hi) = (profile.bitrate_min as f64, profile.bitrate_max as f64);
    if !(lo..=hi).contains(&bitrate) {
        return Err(Error::domain(format!(
            "bitrate {bitrate} outside [{lo}, {hi}] for {}",
            profile.kind
        )));
    }
    let q = raw_qope(bitrate, profile, params)?;
    let q_lo = raw_qope(lo, profile, params)?;
    let q_hi = raw_qope(hi, profile, params)?;
    let norm = if q_hi == q_lo {
        1.0
    } else {
        ((q - q_lo) / (q_hi - q_lo)).clamp(0.0, 1.0)
    };
    Ok((q, norm))
}

pub fn framerate_norm(framerate: f64, profile: &VRoomProfile) -> Result<f64> {
    let (lo, hi) = (profile.framerate_min as f64, profile.framerate_max as f64);
    if !(lo..=hi).contains(&framerate) {
        return Err(Error::domain(format!(
            "frame rate {framerate} outside [{lo}, {hi}] for {}",
            profile.kind
        )));
    }
    if hi == lo {
        return Ok(1.0);
    }
    Ok((framerate - lo) / (hi - lo))
}

/// Harmonic mean of structural, behavioral and temporal accuracy; zero when
/// any of them is zero.
pub fn dt_accuracy(eps: f64, beta: f64, tau: f64) -> Result<f64> {
    for (name, v) in [("eps", eps), ("beta", beta), ("tau", tau)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::domain(format!("{name} = {v} outside [0, 1]")));
        }
    }
    if eps == 0.0 || beta == 0.0 || tau == 0.0 {
        return Ok(0.0);
    }
    Ok(3.0 / (1.0 / eps + 1.0 / beta + 1.0 / tau))
}

/// Mean freshness `1 - exp(-lambda f_d)` over the DTs of a room.
pub fn temporal_accuracy(update_freqs: &[f64], lambda: f64) -> Result<f64> {
    if update_freqs.is_empty() {
        return Err(Error::domain("temporal accuracy needs at least one DT"));
    }
    if !(lambda > 0.0) {
        return Err(Error::domain(format!("lambda must be positive, got {lambda}")));
    }
    if let Some(f) = update_freqs.iter().find(|&&f| !(f >= 0.0)) {
        return Err(Error::domain(format!("negative update frequency {f}")));
    }
    let sum: f64 = update_freqs
        .iter()
        .map(|&f| 1.0 - (-lambda * f).exp())
        .sum();
    Ok(sum / update_freqs.len() as f64)
}

/// Temporal accuracy in effect for a Head: the fixed value when configured,
/// otherwise derived from `dt_count` DTs at the room's update frequency.
pub fn resolve_tau(profile: &VRoomProfile, params: &GlobalParams, dt_count: usize) -> Result<f64> {
    match (params.tau_fixed, params.lambda_temporal) {
        (Some(tau), _) => Ok(tau),
        (None, Some(lambda)) => {
            let freqs = vec![profile.update_freq; dt_count.max(1)];
            temporal_accuracy(&freqs, lambda)
        }
        (None, None) => Err(Error::config(
            "either tau_fixed or lambda_temporal must be set",
        )),
    }
}

/// DT accuracy min-max normalized over the controllable β range with ε and τ
/// held at their episode values.
pub fn dt_accuracy_norm(
    eps: f64,
    beta: f64,
    tau: f64,
    profile: &VRoomProfile,
) -> Result<(f64, f64)> {
    let a = dt_accuracy(eps, beta, tau)?;
    let a_lo = dt_accuracy(eps, profile.beta_min, tau)?;
    let a_hi = dt_accuracy(eps, profile.beta_max, tau)?;
    let norm = if a_hi == a_lo {
        if a_hi > 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        ((a - a_lo) / (a_hi - a_lo)).clamp(0.0, 1.0)
    };
    Ok((a, norm))
}

/// Immersion of a Head with structural accuracy `eps` and temporal accuracy
/// `tau` under `decision`.
pub fn immersion_with_tau(
    decision: &AllocationDecision,
    eps: f64,
    tau: f64,
    profile: &VRoomProfile,
    params: &GlobalParams,
) -> Result<ImmersionBreakdown> {
    if !is_on_beta_grid(profile, params.beta_grid_step, decision.beta) {
        return Err(Error::domain(format!(
            "beta {} is not an admissible level for {}",
            decision.beta, profile.kind
        )));
    }
    let bitrate = decision.bitrate as f64;
    let ssim = ssim(bitrate, profile.omega, params)?;
    let vmaf = vmaf(bitrate, profile.omega, params)?;
    let (qope, qope_norm) = qope(bitrate, profile, params)?;
    let framerate_norm = framerate_norm(decision.framerate as f64, profile)?;
    let (dt_accuracy, dt_accuracy_norm) = dt_accuracy_norm(eps, decision.beta, tau, profile)?;
    let immersion = (profile.w_q * qope_norm
        + profile.w_f * framerate_norm
        + profile.w_a * dt_accuracy_norm)
        .clamp(0.0, 1.0);
    Ok(ImmersionBreakdown {
        ssim,
        vmaf,
        qope,
        qope_norm,
        framerate_norm,
        dt_accuracy,
        dt_accuracy_norm,
        immersion,
    })
}

/// Immersion with τ resolved from the global parameters for a single-DT room.
pub fn immersion(
    decision: &AllocationDecision,
    eps: f64,
    profile: &VRoomProfile,
    params: &GlobalParams,
) -> Result<ImmersionBreakdown> {
    let tau = resolve_tau(profile, params, 1)?;
    immersion_with_tau(decision, eps, tau, profile, params)
}
