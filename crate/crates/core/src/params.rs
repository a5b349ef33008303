//! Static model parameters: per-room profiles and system-wide constants.
//!
//! The `Default` impls carry the reference parameter sets for the three
//! built-in room types and the global constants.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const WEIGHT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoomKind {
    Library,
    Arena,
    Gallery,
}

impl RoomKind {
    pub const ALL: [RoomKind; 3] = [RoomKind::Library, RoomKind::Arena, RoomKind::Gallery];

    /// Sequential room assignment used when building a default topology.
    pub const SEQUENCE: [RoomKind; 9] = [
        RoomKind::Library,
        RoomKind::Arena,
        RoomKind::Gallery,
        RoomKind::Library,
        RoomKind::Gallery,
        RoomKind::Arena,
        RoomKind::Gallery,
        RoomKind::Library,
        RoomKind::Library,
    ];

    pub fn nth_in_sequence(i: usize) -> RoomKind {
        Self::SEQUENCE[i % Self::SEQUENCE.len()]
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RoomKind::Library => "library",
            RoomKind::Arena => "arena",
            RoomKind::Gallery => "gallery",
        }
    }
}

impl fmt::Display for RoomKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Static parameters of one virtual-room type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VRoomProfile {
    pub kind: RoomKind,
    /// Bitrate bounds, Mbps.
    pub bitrate_min: u32,
    pub bitrate_max: u32,
    /// Frame-rate bounds, frames/s.
    pub framerate_min: u32,
    pub framerate_max: u32,
    /// Structural accuracy bounds.
    pub eps_min: f64,
    pub eps_max: f64,
    /// Behavioral accuracy bounds.
    pub beta_min: f64,
    pub beta_max: f64,
    /// Average client rotation speed, degrees/s.
    pub omega: f64,
    pub kappa_comp: f64,
    pub kappa_net: f64,
    pub w_sigma: f64,
    pub w_eta: f64,
    pub theta_comp: f64,
    pub theta_net: f64,
    pub lambda_density: f64,
    /// Sharing efficiency in [0, 1].
    pub iota: f64,
    pub polygons: f64,
    pub objects: f64,
    pub interaction_points: f64,
    pub sensors: f64,
    pub state_vars: f64,
    /// DT synchronization frequency, Hz.
    pub update_freq: f64,
    pub capacity: u32,
    pub w_q: f64,
    pub w_f: f64,
    pub w_a: f64,
    pub arrival_rate: f64,
    pub departure_rate: f64,
}

impl VRoomProfile {
    pub fn library() -> Self {
        Self {
            kind: RoomKind::Library,
            bitrate_min: 20,
            bitrate_max: 25,
            framerate_min: 30,
            framerate_max: 60,
            eps_min: 0.6,
            eps_max: 1.0,
            beta_min: 0.5,
            beta_max: 1.0,
            omega: 400.0,
            kappa_comp: 1.1,
            kappa_net: 0.5,
            w_sigma: 0.5,
            w_eta: 0.5,
            theta_comp: 0.7,
            theta_net: 0.9,
            lambda_density: 0.8,
            iota: 0.6,
            polygons: 2e5,
            objects: 50.0,
            interaction_points: 5.0,
            sensors: 50.0,
            state_vars: 30.0,
            update_freq: 2.0,
            capacity: 10,
            w_q: 1.0 / 3.0,
            w_f: 1.0 / 3.0,
            w_a: 1.0 / 3.0,
            arrival_rate: 0.4,
            departure_rate: 0.7,
        }
    }

    pub fn arena() -> Self {
        Self {
            kind: RoomKind::Arena,
            bitrate_min: 30,
            bitrate_max: 50,
            framerate_min: 60,
            framerate_max: 120,
            eps_min: 0.5,
            eps_max: 1.0,
            beta_min: 0.5,
            beta_max: 1.0,
            omega: 720.0,
            kappa_comp: 1.1,
            kappa_net: 0.5,
            w_sigma: 0.3,
            w_eta: 0.7,
            theta_comp: 0.85,
            theta_net: 0.85,
            lambda_density: 0.8,
            iota: 0.5,
            polygons: 5e5,
            objects: 200.0,
            interaction_points: 30.0,
            sensors: 200.0,
            state_vars: 100.0,
            update_freq: 10.0,
            capacity: 100,
            w_q: 1.0 / 3.0,
            w_f: 1.0 / 3.0,
            w_a: 1.0 / 3.0,
            arrival_rate: 0.4,
            departure_rate: 0.7,
        }
    }

    pub fn gallery() -> Self {
        Self {
            kind: RoomKind::Gallery,
            bitrate_min: 25,
            bitrate_max: 35,
            framerate_min: 30,
            framerate_max: 60,
            eps_min: 0.8,
            eps_max: 1.0,
            beta_min: 0.3,
            beta_max: 1.0,
            omega: 400.0,
            kappa_comp: 1.1,
            kappa_net: 0.5,
            w_sigma: 0.7,
            w_eta: 0.3,
            theta_comp: 0.7,
            theta_net: 0.8,
            lambda_density: 0.7,
            iota: 0.8,
            polygons: 3e5,
            objects: 20.0,
            interaction_points: 15.0,
            sensors: 30.0,
            state_vars: 20.0,
            update_freq: 1.0,
            capacity: 10,
            w_q: 1.0 / 3.0,
            w_f: 1.0 / 3.0,
            w_a: 1.0 / 3.0,
            arrival_rate: 0.4,
            departure_rate: 0.7,
        }
    }

    pub fn builtin(kind: RoomKind) -> Self {
        match kind {
            RoomKind::Library => Self::library(),
            RoomKind::Arena => Self::arena(),
            RoomKind::Gallery => Self::gallery(),
        }
    }

    /// Default structural accuracy of a Head hosting this room: the midpoint
    /// of the admissible range.
    pub fn default_eps(&self) -> f64 {
        0.5 * (self.eps_min + self.eps_max)
    }

    pub fn validate(&self) -> Result<()> {
        let name = self.kind;
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::config(format!("{name} profile: {what}")))
            }
        };
        check(
            (self.w_sigma + self.w_eta - 1.0).abs() <= WEIGHT_TOL,
            "w_sigma + w_eta must equal 1",
        )?;
        check(
            (self.w_q + self.w_f + self.w_a - 1.0).abs() <= WEIGHT_TOL,
            "w_q + w_f + w_a must equal 1",
        )?;
        check(self.bitrate_min >= 1, "bitrate_min must be positive")?;
        check(self.bitrate_min <= self.bitrate_max, "bitrate_min > bitrate_max")?;
        check(self.framerate_min >= 1, "framerate_min must be positive")?;
        check(
            self.framerate_min <= self.framerate_max,
            "framerate_min > framerate_max",
        )?;
        check(
            0.0 <= self.beta_min && self.beta_min <= self.beta_max && self.beta_max <= 1.0,
            "beta bounds must satisfy 0 <= min <= max <= 1",
        )?;
        check(
            0.0 <= self.eps_min && self.eps_min <= self.eps_max && self.eps_max <= 1.0,
            "eps bounds must satisfy 0 <= min <= max <= 1",
        )?;
        check((0.0..=1.0).contains(&self.iota), "iota must lie in [0, 1]")?;
        check(self.capacity >= 1, "capacity must be at least 1")?;
        check(
            [
                self.polygons,
                self.objects,
                self.interaction_points,
                self.sensors,
                self.state_vars,
                self.update_freq,
            ]
            .iter()
            .all(|&c| c >= 0.0),
            "primitive counts must be non-negative",
        )?;
        check(
            self.arrival_rate >= 0.0 && self.departure_rate >= 0.0,
            "traffic rates must be non-negative",
        )?;
        check(
            self.kappa_comp >= 0.0 && self.kappa_net >= 0.0,
            "frame-rate exponents must be non-negative",
        )?;
        check(
            self.theta_comp > 0.0 && self.theta_net > 0.0 && self.lambda_density > 0.0,
            "user-count and density exponents must be positive",
        )?;
        Ok(())
    }
}

/// System-wide constants shared by every room.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalParams {
    pub ssim_coeffs: [f64; 5],
    pub vmaf_coeffs: [f64; 4],
    pub k_comp: f64,
    pub k_net: f64,
    pub p_max: f64,
    pub o_max: f64,
    pub a_max: f64,
    pub n_max: f64,
    pub sv_max: f64,
    pub u_max: f64,
    pub phi_dt: f64,
    /// Fixed temporal accuracy. When absent, temporal accuracy is derived
    /// from the DT update frequencies and `lambda_temporal`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_fixed: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_temporal: Option<f64>,
    pub beta_grid_step: f64,
    /// Price the VE network term on the allocated bitrate instead of the
    /// room's minimum bitrate.
    pub net_ve_uses_allocated_bitrate: bool,
}

impl Default for GlobalParams {
    fn default() -> Self {
        Self {
            ssim_coeffs: [0.65, 0.368, 1.23e-3, 0.85, 1.23e-3],
            vmaf_coeffs: [36.13, -1.66e-2, 11.62, -6.07e-3],
            k_comp: 0.01,
            k_net: 0.01,
            p_max: 1e5,
            o_max: 100.0,
            a_max: 10.0,
            n_max: 100.0,
            sv_max: 100.0,
            u_max: 10.0,
            phi_dt: 0.1,
            tau_fixed: Some(1.0),
            lambda_temporal: None,
            beta_grid_step: 0.05,
            net_ve_uses_allocated_bitrate: true,
        }
    }
}

impl GlobalParams {
    pub fn validate(&self) -> Result<()> {
        let ceilings = [
            self.p_max,
            self.o_max,
            self.a_max,
            self.n_max,
            self.sv_max,
            self.u_max,
        ];
        if ceilings.iter().any(|&c| !(c > 0.0)) {
            return Err(Error::config("normalization ceilings must be positive"));
        }
        if !(self.k_comp > 0.0 && self.k_net > 0.0) {
            return Err(Error::config("unit prices must be positive"));
        }
        if !(self.phi_dt > 0.0) {
            return Err(Error::config("phi_dt must be positive"));
        }
        if !(self.beta_grid_step > 0.0) {
            return Err(Error::config("beta_grid_step must be positive"));
        }
        match (self.tau_fixed, self.lambda_temporal) {
            (Some(tau), _) if !(tau > 0.0 && tau <= 1.0) => {
                Err(Error::config("tau_fixed must lie in (0, 1]"))
            }
            (None, None) => Err(Error::config(
                "either tau_fixed or lambda_temporal must be set",
            )),
            (None, Some(l)) if !(l > 0.0) => Err(Error::config("lambda_temporal must be positive")),
            _ => Ok(()),
        }
    }
}

/// Room profiles by kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomTable {
    pub library: VRoomProfile,
    pub arena: VRoomProfile,
    pub gallery: VRoomProfile,
}

impl Default for RoomTable {
    fn default() -> Self {
        Self {
            library: VRoomProfile::library(),
            arena: VRoomProfile::arena(),
            gallery: VRoomProfile::gallery(),
        }
    }
}

impl RoomTable {
    pub fn get(&self, kind: RoomKind) -> &VRoomProfile {
        match kind {
            RoomKind::Library => &self.library,
            RoomKind::Arena => &self.arena,
            RoomKind::Gallery => &self.gallery,
        }
    }

    pub fn get_mut(&mut self, kind: RoomKind) -> &mut VRoomProfile {
        match kind {
            RoomKind::Library => &mut self.library,
            RoomKind::Arena => &mut self.arena,
            RoomKind::Gallery => &mut self.gallery,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for kind in RoomKind::ALL {
            let p = self.get(kind);
            if p.kind != kind {
                return Err(Error::config(format!(
                    "profile stored under `{kind}` declares kind `{}`",
                    p.kind
                )));
            }
            p.validate()?;
        }
        Ok(())
    }
}
