//! Compute/network requirements of a room's VE and DT components and their
//! monetary cost.

use serde::{Deserialize, Serialize};

use crate::decision::AllocationDecision;
use crate::error::{Error, Result};
use crate::params::{GlobalParams, VRoomProfile};

/// Scaled resource requirements of one Head and their price.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ResourceDemand {
    pub comp_ve: f64,
    pub comp_dt: f64,
    pub net_ve: f64,
    pub net_dt: f64,
    pub total_cost: f64,
}

impl ResourceDemand {
    pub fn comp(&self) -> f64 {
        self.comp_ve + self.comp_dt
    }

    pub fn net(&self) -> f64 {
        self.net_ve + self.net_dt
    }
}

/// Normalized VE primitives. Primitives may exceed their ceilings.
pub fn base_comp_ve(profile: &VRoomProfile, params: &GlobalParams) -> f64 {
    profile.polygons / params.p_max
        + profile.objects / params.o_max
        + profile.interaction_points / params.a_max
}

/// Normalized DT complexity factors.
pub fn base_comp_dt(profile: &VRoomProfile, params: &GlobalParams) -> f64 {
    profile.sensors / params.n_max + profile.state_vars / params.sv_max + profile.update_freq / params.u_max
}

/// VE network base: the allocated bitrate (floored at the room minimum), or
/// the room minimum when allocated-bitrate pricing is disabled.
pub fn base_net_ve(
    decision: &AllocationDecision,
    profile: &VRoomProfile,
    params: &GlobalParams,
) -> f64 {
    if params.net_ve_uses_allocated_bitrate {
        decision.bitrate.max(profile.bitrate_min) as f64
    } else {
        profile.bitrate_min as f64
    }
}

/// DT network base, a β-weighted fraction of the room's minimum bitrate.
pub fn base_net_dt(
    decision: &AllocationDecision,
    profile: &VRoomProfile,
    params: &GlobalParams,
) -> f64 {
    params.phi_dt * profile.bitrate_min as f64 * decision.beta
}

/// Scales a base requirement by frame rate, client count and room density.
/// An empty room requires nothing.
pub fn scale(
    base: f64,
    framerate: f64,
    clients: u32,
    profile: &VRoomProfile,
    kappa: f64,
    theta: f64,
) -> Result<f64> {
    let f_min = profile.framerate_min as f64;
    if !(framerate >= f_min) {
        return Err(Error::domain(format!(
            "frame rate {framerate} below room minimum {f_min}"
        )));
    }
    if clients > profile.capacity {
        return Err(Error::domain(format!(
            "{clients} clients exceed capacity {}",
            profile.capacity
        )));
    }
    if clients == 0 {
        return Ok(0.0);
    }
    let c = clients as f64;
    let frame = (framerate / f_min).powf(kappa);
    let users = c.powf(theta);
    let fill = c / profile.capacity as f64;
    let density = 1.0 - profile.iota * (1.0 - fill.powf(profile.lambda_density));
    Ok(base * frame * users * density)
}

/// Scaled VE/DT compute and network requirements of one Head and their cost.
pub fn demand(
    decision: &AllocationDecision,
    clients: u32,
    profile: &VRoomProfile,
    params: &GlobalParams,
) -> Result<ResourceDemand> {
    let f = decision.framerate as f64;
    let comp = |base| scale(base, f, clients, profile, profile.kappa_comp, profile.theta_comp);
    let net = |base| scale(base, f, clients, profile, profile.kappa_net, profile.theta_net);
    let comp_ve = comp(base_comp_ve(profile, params))?;
    let comp_dt = comp(base_comp_dt(profile, params))?;
    let net_ve = net(base_net_ve(decision, profile, params))?;
    let net_dt = net(base_net_dt(decision, profile, params))?;
    Ok(ResourceDemand {
        comp_ve,
        comp_dt,
        net_ve,
        net_dt,
        total_cost: params.k_comp * (comp_ve + comp_dt) + params.k_net * (net_ve + net_dt),
    })
}
