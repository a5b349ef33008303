//! Per-Head control vector and its admissible discrete grid.

use serde::{Deserialize, Serialize};

use crate::params::VRoomProfile;

/// Control vector for one Head at one timestep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AllocationDecision {
    /// Mbps.
    pub bitrate: u32,
    /// Frames/s.
    pub framerate: u32,
    /// Behavioral accuracy, a level of the room's β grid.
    pub beta: f64,
}

/// Removes representation noise from `min + k * step` so that grid levels
/// compare equal to their decimal spelling (0.65, not 0.6500000000000001).
fn tidy(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

fn round_half_up(x: f64) -> f64 {
    (x + 0.5).floor()
}

/// Admissible behavioral-accuracy levels `beta_min, beta_min + step, ..., beta_max`.
pub fn beta_levels(profile: &VRoomProfile, step: f64) -> Vec<f64> {
    let span = profile.beta_max - profile.beta_min;
    let n = (span / step + 1e-9).floor() as usize;
    let mut levels: Vec<f64> = (0..=n)
        .map(|k| tidy(profile.beta_min + k as f64 * step))
        .collect();
    let last = *levels.last().expect("at least one level");
    if (last - profile.beta_max).abs() < 1e-9 {
        *levels.last_mut().unwrap() = profile.beta_max;
    } else if last < profile.beta_max {
        levels.push(profile.beta_max);
    }
    levels
}

/// Nearest admissible β level; ties go to the higher level.
pub fn snap_beta(profile: &VRoomProfile, step: f64, beta: f64) -> f64 {
    let levels = beta_levels(profile, step);
    let x = beta.clamp(profile.beta_min, profile.beta_max);
    let mut best = levels[0];
    for &l in &levels {
        if (x - l).abs() <= (x - best).abs() {
            best = l;
        }
    }
    best
}

pub fn is_on_beta_grid(profile: &VRoomProfile, step: f64, beta: f64) -> bool {
    beta_levels(profile, step)
        .iter()
        .any(|&l| (l - beta).abs() < 1e-9)
}

impl AllocationDecision {
    pub fn new(bitrate: u32, framerate: u32, beta: f64) -> Self {
        Self {
            bitrate,
            framerate,
            beta,
        }
    }

    pub fn minimum(profile: &VRoomProfile) -> Self {
        Self::new(profile.bitrate_min, profile.framerate_min, profile.beta_min)
    }

    pub fn maximum(profile: &VRoomProfile) -> Self {
        Self::new(profile.bitrate_max, profile.framerate_max, profile.beta_max)
    }

    /// Midpoint of every range: round-half-up on the integer controls,
    /// nearest grid level on β.
    pub fn midpoint(profile: &VRoomProfile, step: f64) -> Self {
        let b = round_half_up(0.5 * (profile.bitrate_min + profile.bitrate_max) as f64);
        let f = round_half_up(0.5 * (profile.framerate_min + profile.framerate_max) as f64);
        let beta = snap_beta(profile, step, 0.5 * (profile.beta_min + profile.beta_max));
        Self::new(b as u32, f as u32, beta)
    }

    /// Maps a unit-cube point onto the admissible grid: each coordinate is
    /// clamped to [0, 1], mapped affinely onto the room's range, then rounded
    /// (integer controls) or snapped (β).
    pub fn from_unit(profile: &VRoomProfile, step: f64, unit: [f64; 3]) -> Self {
        let lerp = |lo: f64, hi: f64, u: f64| {
            let u = if u.is_nan() { 0.0 } else { u.clamp(0.0, 1.0) };
            lo + u * (hi - lo)
        };
        let b = lerp(
            profile.bitrate_min as f64,
            profile.bitrate_max as f64,
            unit[0],
        );
        let f = lerp(
            profile.framerate_min as f64,
            profile.framerate_max as f64,
            unit[1],
        );
        let beta = lerp(profile.beta_min, profile.beta_max, unit[2]);
        Self::new(
            round_half_up(b) as u32,
            round_half_up(f) as u32,
            snap_beta(profile, step, beta),
        )
    }

    /// Clamps out-of-range controls to the room bounds and snaps β.
    pub fn project(self, profile: &VRoomProfile, step: f64) -> Self {
        Self::new(
            self.bitrate
                .clamp(profile.bitrate_min, profile.bitrate_max),
            self.framerate
                .clamp(profile.framerate_min, profile.framerate_max),
            snap_beta(profile, step, if self.beta.is_nan() { 0.0 } else { self.beta }),
        )
    }

    pub fn is_admissible(&self, profile: &VRoomProfile, step: f64) -> bool {
        (profile.bitrate_min..=profile.bitrate_max).contains(&self.bitrate)
            && (profile.framerate_min..=profile.framerate_max).contains(&self.framerate)
            && is_on_beta_grid(profile, step, self.beta)
    }

    /// Lexicographic key on (bitrate, framerate, beta).
    pub fn lex_key(&self) -> (u32, u32, f64) {
        (self.bitrate, self.framerate, self.beta)
    }
}

/// Every admissible decision of a room, in lexicographic (B, f, β) order.
pub fn decision_grid(profile: &VRoomProfile, step: f64) -> Vec<AllocationDecision> {
    let betas = beta_levels(profile, step);
    let mut out = Vec::with_capacity(
        (profile.bitrate_max - profile.bitrate_min + 1) as usize
            * (profile.framerate_max - profile.framerate_min + 1) as usize
            * betas.len(),
    );
    for b in profile.bitrate_min..=profile.bitrate_max {
        for f in profile.framerate_min..=profile.framerate_max {
            for &beta in &betas {
                out.push(AllocationDecision::new(b, f, beta));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::VRoomProfile;

    const STEP: f64 = 0.05;

    #[test]
    fn beta_grid_sizes() {
        assert_eq!(beta_levels(&VRoomProfile::library(), STEP).len(), 11);
        assert_eq!(beta_levels(&VRoomProfile::gallery(), STEP).len(), 15);
        let levels = beta_levels(&VRoomProfile::gallery(), STEP);
        assert_eq!(levels[0], 0.3);
        assert_eq!(levels[7], 0.65);
        assert_eq!(*levels.last().unwrap(), 1.0);
    }

    #[test]
    fn beta_grid_keeps_max_when_span_is_not_a_multiple() {
        let mut p = VRoomProfile::library();
        p.beta_min = 0.52;
        let levels = beta_levels(&p, STEP);
        assert_eq!(*levels.last().unwrap(), 1.0);
        assert!((levels[levels.len() - 2] - 0.97).abs() < 1e-12);
    }

    #[test]
    fn snapping() {
        let p = VRoomProfile::library();
        assert_eq!(snap_beta(&p, STEP, 0.74), 0.75);
        assert_eq!(snap_beta(&p, STEP, 0.776), 0.8);
        assert_eq!(snap_beta(&p, STEP, -3.0), 0.5);
        assert_eq!(snap_beta(&p, STEP, 7.0), 1.0);
        // exact midpoint between 0.5 and 0.55 goes up
        assert_eq!(snap_beta(&p, STEP, 0.525), 0.55);
    }

    #[test]
    fn midpoints() {
        let lib = AllocationDecision::midpoint(&VRoomProfile::library(), STEP);
        assert_eq!(lib.bitrate, 23);
        assert_eq!(lib.framerate, 45);
        assert_eq!(lib.beta, 0.75);
        let arena = AllocationDecision::midpoint(&VRoomProfile::arena(), STEP);
        assert_eq!(arena.framerate, 90);
        assert_eq!(arena.bitrate, 40);
        let gal = AllocationDecision::midpoint(&VRoomProfile::gallery(), STEP);
        assert_eq!(gal.beta, 0.65);
        assert_eq!(gal.bitrate, 30);
    }

    #[test]
    fn unit_endpoints_map_to_bounds() {
        for p in [
            VRoomProfile::library(),
            VRoomProfile::arena(),
            VRoomProfile::gallery(),
        ] {
            assert_eq!(
                AllocationDecision::from_unit(&p, STEP, [0.0; 3]),
                AllocationDecision::minimum(&p)
            );
            assert_eq!(
                AllocationDecision::from_unit(&p, STEP, [1.0; 3]),
                AllocationDecision::maximum(&p)
            );
            assert_eq!(
                AllocationDecision::from_unit(&p, STEP, [-4.0, f64::NAN, 9.0]),
                AllocationDecision::new(p.bitrate_min, p.framerate_min, p.beta_max)
            );
        }
    }

    #[test]
    fn projection_clamps() {
        let p = VRoomProfile::arena();
        let d = AllocationDecision::new(5, 500, 0.61).project(&p, STEP);
        assert_eq!(d, AllocationDecision::new(30, 120, 0.6));
        assert!(d.is_admissible(&p, STEP));
        assert!(!AllocationDecision::new(29, 60, 0.5).is_admissible(&p, STEP));
        assert!(!AllocationDecision::new(30, 60, 0.51).is_admissible(&p, STEP));
    }

    #[test]
    fn grid_is_lexicographic_and_complete() {
        let p = VRoomProfile::library();
        let g = decision_grid(&p, STEP);
        assert_eq!(g.len(), 6 * 31 * 11);
        assert!(g
            .windows(2)
            .all(|w| w[0].lex_key().partial_cmp(&w[1].lex_key()) == Some(std::cmp::Ordering::Less)));
        assert!(g.iter().all(|d| d.is_admissible(&p, STEP)));
    }
}
