//! Wheel-speed command generation for simulation scenarios.
//!
//! Commands are body-twist targets converted to per-wheel angular speeds
//! through the *nominal* drive model — the controller does not know about
//! deformation, exactly as on a real robot. Speeds are held constant within
//! each sampling interval.

use rand::Rng;
use rand_distr::StandardNormal;

use super::drive::{DriveGeometry, DriveModel};

/// Body speed caps keeping per-interval displacements modest (at most 15 cm
/// and about 9 degrees per 0.3 s interval).
const MAX_FORWARD: f64 = 0.5;
const MAX_LATERAL: f64 = 0.35;
const MAX_TURN: f64 = 0.55;
/// Forward speed the random walk cruises around. Real platforms spend their
/// runs in motion rather than dithering near standstill, and cruising keeps
/// each interval's arc short relative to the headway it spans.
const CRUISE: f64 = 0.35;

/// How wheel-speed commands evolve over a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CommandProfile {
    /// Smooth seeded random twist: each interval the body twist takes an
    /// autoregressive step, covering the tick-input space densely.
    RandomWalk,
    /// Periodic weave: constant forward speed with a sinusoidal turn rate
    /// (plus a lateral sinusoid for mecanum drives).
    FigureEight,
    /// A fixed repeating schedule of straights, arcs, turns, and (for
    /// mecanum) strafes; useful for deterministic no-RNG scenarios.
    Scripted,
}

impl CommandProfile {
    /// Config-file name of the profile.
    pub fn as_str(&self) -> &'static str {
        match self {
            CommandProfile::RandomWalk => "random_walk",
            CommandProfile::FigureEight => "figure_eight",
            CommandProfile::Scripted => "scripted",
        }
    }

    /// Inverse of [`CommandProfile::as_str`].
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "random_walk" => Some(CommandProfile::RandomWalk),
            "figure_eight" => Some(CommandProfile::FigureEight),
            "scripted" => Some(CommandProfile::Scripted),
            _ => None,
        }
    }
}

/// Stateful helper producing one wheel-speed vector per interval.
pub(crate) struct CommandGenerator {
    profile: CommandProfile,
    model: DriveModel,
    can_strafe: bool,
    // Autoregressive twist state for the random walk.
    twist: [f64; 3],
}

impl CommandGenerator {
    pub(crate) fn new(profile: CommandProfile, model: &DriveModel) -> Self {
        let can_strafe = matches!(model.geometry(), DriveGeometry::Mecanum { .. });
        CommandGenerator {
            profile,
            model: model.clone(),
            can_strafe,
            twist: [CRUISE, 0.0, 0.0],
        }
    }

    /// Wheel angular speeds (rad/s) to hold over `[t, t + interval)`.
    pub(crate) fn wheel_speeds<R: Rng>(&mut self, rng: &mut R, t: f64, interval: f64) -> Vec<f64> {
        let (vx, vy, omega) = match self.profile {
            CommandProfile::RandomWalk => self.random_step(rng),
            CommandProfile::FigureEight => self.figure_eight(t),
            CommandProfile::Scripted => self.scripted(t, interval),
        };
        self.model.wheel_speeds_for_twist(vx, vy, omega)
    }

    fn random_step<R: Rng>(&mut self, rng: &mut R) -> (f64, f64, f64) {
        // First-order autoregressions: persistent enough for realistic
        // motion, noisy enough to cover the speed/turn envelope. The forward
        // speed reverts to the cruise rather than to zero (brief reversals
        // allowed); lateral and turn rates wander around zero. The turn rate
        // carries enough power that the heading decorrelates within seconds,
        // so long runs curl around their neighbourhood the way robots in
        // bounded workspaces do instead of shooting off in one direction.
        let gauss = |rng: &mut R| -> f64 { rng.sample(StandardNormal) };
        self.twist[0] = (CRUISE + 0.85 * (self.twist[0] - CRUISE) + 0.03 * gauss(rng))
            .clamp(-0.1 * MAX_FORWARD, MAX_FORWARD);
        self.twist[1] = if self.can_strafe {
            (0.85 * self.twist[1] + 0.05 * gauss(rng)).clamp(-MAX_LATERAL, MAX_LATERAL)
        } else {
            0.0
        };
        self.twist[2] =
            (0.90 * self.twist[2] + 0.12 * gauss(rng)).clamp(-MAX_TURN, MAX_TURN);
        (self.twist[0], self.twist[1], self.twist[2])
    }

    fn figure_eight(&self, t: f64) -> (f64, f64, f64) {
        let turn = MAX_TURN * (std::f64::consts::TAU * t / 16.0).sin();
        let lateral = if self.can_strafe {
            0.5 * MAX_LATERAL * (std::f64::consts::TAU * t / 8.0).sin()
        } else {
            0.0
        };
        (0.6 * MAX_FORWARD, lateral, turn)
    }

    fn scripted(&self, t: f64, _interval: f64) -> (f64, f64, f64) {
        const SEGMENT_SECONDS: f64 = 3.0;
        let diff_script: &[(f64, f64, f64)] = &[
            (0.35, 0.0, 0.0),
            (0.30, 0.0, 0.30),
            (0.35, 0.0, 0.0),
            (0.30, 0.0, -0.30),
            (0.0, 0.0, 0.40),
            (-0.25, 0.0, 0.0),
        ];
        let mecanum_script: &[(f64, f64, f64)] = &[
            (0.35, 0.0, 0.0),
            (0.0, 0.25, 0.0),
            (0.30, 0.0, 0.30),
            (0.0, -0.25, 0.0),
            (0.25, 0.20, 0.0),
            (0.30, 0.0, -0.30),
            (0.0, 0.0, 0.40),
        ];
        let script = if self.can_strafe {
            mecanum_script
        } else {
            diff_script
        };
        let segment = ((t / SEGMENT_SECONDS).floor() as usize) % script.len();
        script[segment]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn model() -> DriveModel {
        DriveModel::diff_drive([0.03, 0.03], 0.15, 1000.0).unwrap()
    }

    #[test]
    fn profile_names_round_trip() {
        for profile in [
            CommandProfile::RandomWalk,
            CommandProfile::FigureEight,
            CommandProfile::Scripted,
        ] {
            assert_eq!(CommandProfile::parse(profile.as_str()), Some(profile));
        }
        assert_eq!(CommandProfile::parse("zigzag"), None);
    }

    #[test]
    fn random_walk_is_deterministic_per_seed() {
        let speeds = |seed: u64| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let mut generator = CommandGenerator::new(CommandProfile::RandomWalk, &model());
            (0..50)
                .map(|k| generator.wheel_speeds(&mut rng, k as f64 * 0.3, 0.3))
                .collect::<Vec<_>>()
        };
        assert_eq!(speeds(9), speeds(9));
        assert_ne!(speeds(9), speeds(10));
    }

    #[test]
    fn random_walk_explores_turns_in_both_directions() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let mut generator = CommandGenerator::new(CommandProfile::RandomWalk, &model());
        let mut lefts = 0;
        let mut rights = 0;
        for k in 0..200 {
            let speeds = generator.wheel_speeds(&mut rng, k as f64 * 0.3, 0.3);
            let turn = speeds[1] - speeds[0];
            if turn > 0.0 {
                lefts += 1;
            } else if turn < 0.0 {
                rights += 1;
            }
        }
        assert!(lefts > 20 && rights > 20, "lefts {lefts} rights {rights}");
    }

    #[test]
    fn deterministic_profiles_ignore_the_rng() {
        for profile in [CommandProfile::FigureEight, CommandProfile::Scripted] {
            let mut rng_a = ChaCha12Rng::seed_from_u64(1);
            let mut rng_b = ChaCha12Rng::seed_from_u64(2);
            let mut gen_a = CommandGenerator::new(profile, &model());
            let mut gen_b = CommandGenerator::new(profile, &model());
            for k in 0..20 {
                let t = k as f64 * 0.3;
                assert_eq!(
                    gen_a.wheel_speeds(&mut rng_a, t, 0.3),
                    gen_b.wheel_speeds(&mut rng_b, t, 0.3)
                );
            }
        }
    }

    #[test]
    fn diff_drive_never_strafes() {
        // For a diff model the twist is realizable: left/right speeds fully
        // determine it, so lateral commands must be suppressed.
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let mecanum = DriveModel::mecanum([0.03; 4], 0.1, 0.12, 2000.0).unwrap();
        let mut generator = CommandGenerator::new(CommandProfile::RandomWalk, &mecanum);
        let mut strafed = false;
        for k in 0..50 {
            let speeds = generator.wheel_speeds(&mut rng, k as f64 * 0.6, 0.6);
            // Lateral rate reconstructed from the mecanum combination.
            let lateral = 0.25 * (-speeds[0] + speeds[1] + speeds[2] - speeds[3]) * 0.03;
            if lateral.abs() > 1e-3 {
                strafed = true;
            }
        }
        assert!(strafed, "mecanum random walk should strafe");

        let mut generator = CommandGenerator::new(CommandProfile::RandomWalk, &model());
        for k in 0..50 {
            let speeds = generator.wheel_speeds(&mut rng, k as f64 * 0.3, 0.3);
            assert_eq!(speeds.len(), 2);
        }
    }
}
