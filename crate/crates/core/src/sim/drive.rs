//! Parametric drive models: differential drive and mecanum forward
//! kinematics, plus the wheel-deformation model used to generate
//! miscalibrated ground truth.

use crate::data::TickVector;
use crate::error::{Error, Result};
use crate::pose::Pose2D;

/// Rotations below this are treated as straight-line motion to avoid
/// dividing by a vanishing turn angle.
const MIN_TURN_ANGLE: f64 = 1e-9;

/// Chassis geometry. Wheel order for mecanum is front-left, front-right,
/// rear-left, rear-right, with rollers at 45 degrees (X arrangement).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DriveGeometry {
    /// Two driven wheels; `half_axle` is half the wheel separation in
    /// meters.
    DiffDrive { half_axle: f64 },
    /// Four mecanum wheels; half the wheelbase and half the track width in
    /// meters.
    Mecanum { half_length: f64, half_width: f64 },
}

impl DriveGeometry {
    /// Number of wheels the geometry drives.
    pub fn wheel_count(&self) -> usize {
        match self {
            DriveGeometry::DiffDrive { .. } => 2,
            DriveGeometry::Mecanum { .. } => 4,
        }
    }
}

/// A parametric wheel-odometry model: geometry, per-wheel radii, and
/// encoder resolution.
#[derive(Clone, Debug, PartialEq)]
pub struct DriveModel {
    geometry: DriveGeometry,
    wheel_radii: Vec<f64>,
    ticks_per_rev: f64,
}

impl DriveModel {
    /// Differential drive with wheel radii `[left, right]` in meters.
    pub fn diff_drive(wheel_radii: [f64; 2], half_axle: f64, ticks_per_rev: f64) -> Result<Self> {
        if !(half_axle > 0.0) || !half_axle.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "half_axle must be positive, got {half_axle}"
            )));
        }
        Self::validated(
            DriveGeometry::DiffDrive { half_axle },
            wheel_radii.to_vec(),
            ticks_per_rev,
        )
    }

    /// Mecanum drive with wheel radii `[fl, fr, rl, rr]` in meters.
    pub fn mecanum(
        wheel_radii: [f64; 4],
        half_length: f64,
        half_width: f64,
        ticks_per_rev: f64,
    ) -> Result<Self> {
        if !(half_length > 0.0) || !(half_width > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "mecanum half dimensions must be positive, got ({half_length}, {half_width})"
            )));
        }
        Self::validated(
            DriveGeometry::Mecanum {
                half_length,
                half_width,
            },
            wheel_radii.to_vec(),
            ticks_per_rev,
        )
    }

    fn validated(
        geometry: DriveGeometry,
        wheel_radii: Vec<f64>,
        ticks_per_rev: f64,
    ) -> Result<Self> {
        if wheel_radii.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "wheel radii must be positive and finite, got {wheel_radii:?}"
            )));
        }
        if !(ticks_per_rev >= 1.0) || !ticks_per_rev.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "ticks_per_rev must be at least 1, got {ticks_per_rev}"
            )));
        }
        Ok(DriveModel {
            geometry,
            wheel_radii,
            ticks_per_rev,
        })
    }

    pub fn geometry(&self) -> &DriveGeometry {
        &self.geometry
    }

    pub fn wheel_radii(&self) -> &[f64] {
        &self.wheel_radii
    }

    pub fn ticks_per_rev(&self) -> f64 {
        self.ticks_per_rev
    }

    pub fn wheel_count(&self) -> usize {
        self.geometry.wheel_count()
    }

    /// Arc length rolled per wheel for the given tick increments.
    pub fn arcs_from_ticks(&self, ticks: &TickVector) -> Result<Vec<f64>> {
        if ticks.len() != self.wheel_count() {
            return Err(Error::Dimension {
                context: "tick vector",
                expected: self.wheel_count(),
                got: ticks.len(),
            });
        }
        let per_tick = std::f64::consts::TAU / self.ticks_per_rev;
        Ok(self
            .wheel_radii
            .iter()
            .zip(ticks.iter())
            .map(|(r, t)| r * t * per_tick)
            .collect())
    }

    /// Body displacement produced by the given per-wheel arc lengths,
    /// assuming the wheel speeds were constant over the interval.
    pub fn displacement_from_arcs(&self, arcs: &[f64]) -> Result<Pose2D> {
        if arcs.len() != self.wheel_count() {
            return Err(Error::Dimension {
                context: "wheel arcs",
                expected: self.wheel_count(),
                got: arcs.len(),
            });
        }
        match self.geometry {
            DriveGeometry::DiffDrive { half_axle } => {
                let (left, right) = (arcs[0], arcs[1]);
                let forward = 0.5 * (left + right);
                let dtheta = (right - left) / (2.0 * half_axle);
                Ok(twist_displacement(forward, 0.0, dtheta))
            }
            DriveGeometry::Mecanum {
                half_length,
                half_width,
            } => {
                let k = half_length + half_width;
                let (a1, a2, a3, a4) = (arcs[0], arcs[1], arcs[2], arcs[3]);
                let forward = 0.25 * (a1 + a2 + a3 + a4);
                let lateral = 0.25 * (-a1 + a2 + a3 - a4);
                let dtheta = (-a1 + a2 - a3 + a4) / (4.0 * k);
                Ok(twist_displacement(forward, lateral, dtheta))
            }
        }
    }

    /// Per-wheel angular speeds realizing the body twist `(vx, vy, omega)`
    /// under this model. `vy` is ignored for differential drive, which
    /// cannot strafe.
    pub fn wheel_speeds_for_twist(&self, vx: f64, vy: f64, omega: f64) -> Vec<f64> {
        match self.geometry {
            DriveGeometry::DiffDrive { half_axle } => {
                vec![
                    (vx - omega * half_axle) / self.wheel_radii[0],
                    (vx + omega * half_axle) / self.wheel_radii[1],
                ]
            }
            DriveGeometry::Mecanum {
                half_length,
                half_width,
            } => {
                let k = half_length + half_width;
                let rates = [
                    vx - vy - k * omega,
                    vx + vy + k * omega,
                    vx + vy - k * omega,
                    vx - vy + k * omega,
                ];
                rates
                    .iter()
                    .zip(&self.wheel_radii)
                    .map(|(rate, r)| rate / r)
                    .collect()
            }
        }
    }

    fn with_radii(&self, wheel_radii: Vec<f64>) -> DriveModel {
        DriveModel {
            geometry: self.geometry,
            wheel_radii,
            ticks_per_rev: self.ticks_per_rev,
        }
    }
}

/// Exact displacement of a constant body twist integrated over one
/// interval. `forward` and `lateral` are the integrated body-frame
/// velocities (meters); `dtheta` is the total rotation (radians).
pub fn twist_displacement(forward: f64, lateral: f64, dtheta: f64) -> Pose2D {
    if dtheta.abs() < MIN_TURN_ANGLE {
        return Pose2D::new(forward, lateral, dtheta);
    }
    let (sin, cos) = dtheta.sin_cos();
    Pose2D::new(
        (forward * sin + lateral * (cos - 1.0)) / dtheta,
        (forward * (1.0 - cos) + lateral * sin) / dtheta,
        dtheta,
    )
}

/// Displacement of a differential-drive robot for the given tick
/// increments: straight segment or exact circular arc.
pub fn diff_drive_forward(ticks: &TickVector, model: &DriveModel) -> Result<Pose2D> {
    if !matches!(model.geometry, DriveGeometry::DiffDrive { .. }) {
        return Err(Error::InvalidArgument(
            "diff_drive_forward requires a differential-drive model".into(),
        ));
    }
    let arcs = model.arcs_from_ticks(ticks)?;
    model.displacement_from_arcs(&arcs)
}

/// Displacement of a mecanum robot for the given tick increments: the
/// roller-wheel Jacobian maps wheel arcs to a body twist, which is
/// integrated exactly over the interval.
pub fn mecanum_forward(ticks: &TickVector, model: &DriveModel) -> Result<Pose2D> {
    if !matches!(model.geometry, DriveGeometry::Mecanum { .. }) {
        return Err(Error::InvalidArgument(
            "mecanum_forward requires a mecanum model".into(),
        ));
    }
    let arcs = model.arcs_from_ticks(ticks)?;
    model.displacement_from_arcs(&arcs)
}

/// Ground-truth wheel imperfections, one entry per wheel.
///
/// The effective rolling radius of wheel `i` at wheel angle `phi` is
///
/// ```text
/// r_i * scale[i] * cos(tilt_deg[i]) * (1 + ripple[i] * sin(phi))
/// ```
///
/// `scale` models inflation/wear, `tilt_deg` a camber-style lean that
/// shortens the contact radius, and `ripple` a once-per-revolution radius
/// modulation such as a taped or dented wheel.
#[derive(Clone, Debug, PartialEq)]
pub struct Deformation {
    pub scale: Vec<f64>,
    pub tilt_deg: Vec<f64>,
    pub ripple: Vec<f64>,
}

impl Deformation {
    /// No deformation: unit scales, zero tilt, zero ripple.
    pub fn none(wheel_count: usize) -> Self {
        Deformation {
            scale: vec![1.0; wheel_count],
            tilt_deg: vec![0.0; wheel_count],
            ripple: vec![0.0; wheel_count],
        }
    }

    /// Same radius scale applied to every wheel.
    pub fn uniform_scale(wheel_count: usize, scale: f64) -> Self {
        Deformation {
            scale: vec![scale; wheel_count],
            ..Deformation::none(wheel_count)
        }
    }

    /// Scale a single wheel's radius, leaving the others nominal.
    pub fn scale_wheel(wheel_count: usize, wheel: usize, scale: f64) -> Self {
        let mut deform = Deformation::none(wheel_count);
        deform.scale[wheel] = scale;
        deform
    }

    /// Tilt a single wheel by `degrees`, leaving the others nominal.
    pub fn tilt_wheel(wheel_count: usize, wheel: usize, degrees: f64) -> Self {
        let mut deform = Deformation::none(wheel_count);
        deform.tilt_deg[wheel] = degrees;
        deform
    }

    pub fn validate(&self, wheel_count: usize) -> Result<()> {
        for (name, values) in [
            ("scale", &self.scale),
            ("tilt_deg", &self.tilt_deg),
            ("ripple", &self.ripple),
        ] {
            if values.len() != wheel_count {
                return Err(Error::Dimension {
                    context: "deformation entries",
                    expected: wheel_count,
                    got: values.len(),
                });
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "deformation {name} must be finite"
                )));
            }
        }
        if self.scale.iter().any(|s| *s <= 0.0) {
            return Err(Error::InvalidArgument(
                "deformation scale must be positive".into(),
            ));
        }
        if self.tilt_deg.iter().any(|t| *t < 0.0 || *t >= 90.0) {
            return Err(Error::InvalidArgument(
                "deformation tilt must lie in [0, 90) degrees".into(),
            ));
        }
        if self.ripple.iter().any(|a| *a < 0.0 || *a >= 1.0) {
            return Err(Error::InvalidArgument(
                "deformation ripple amplitude must lie in [0, 1)".into(),
            ));
        }
        Ok(())
    }

    /// True when every wheel has unit scale, zero tilt, and zero ripple.
    pub fn is_none(&self) -> bool {
        self.scale.iter().all(|s| *s == 1.0)
            && self.tilt_deg.iter().all(|t| *t == 0.0)
            && self.ripple.iter().all(|a| *a == 0.0)
    }
}

/// The drive model whose nominal radii are replaced by the effective
/// deformed radii at the given wheel angles (radians, one per wheel).
pub fn apply_deformation(
    model: &DriveModel,
    deform: &Deformation,
    wheel_angles: &[f64],
) -> Result<DriveModel> {
    deform.validate(model.wheel_count())?;
    if wheel_angles.len() != model.wheel_count() {
        return Err(Error::Dimension {
            context: "wheel angles",
            expected: model.wheel_count(),
            got: wheel_angles.len(),
        });
    }
    let radii = model
        .wheel_radii
        .iter()
        .enumerate()
        .map(|(i, r)| {
            r * deform.scale[i]
                * deform.tilt_deg[i].to_radians().cos()
                * (1.0 + deform.ripple[i] * wheel_angles[i].sin())
        })
        .collect();
    Ok(model.with_radii(radii))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;
    use std::f64::consts::TAU;

    fn diff_model() -> DriveModel {
        DriveModel::diff_drive([0.03, 0.03], 0.15, 1000.0).unwrap()
    }

    fn mecanum_model() -> DriveModel {
        DriveModel::mecanum([0.03; 4], 0.10, 0.12, 2000.0).unwrap()
    }

    /// Brute-force oracle: forward-integrate the world-frame kinematic ODE
    /// with tiny Euler steps under constant wheel speeds.
    fn integrate_fine(model: &DriveModel, arcs: &[f64], steps: usize) -> Pose2D {
        let mut pose = Pose2D::IDENTITY;
        let (forward, lateral, dtheta) = match *model.geometry() {
            DriveGeometry::DiffDrive { half_axle } => (
                0.5 * (arcs[0] + arcs[1]),
                0.0,
                (arcs[1] - arcs[0]) / (2.0 * half_axle),
            ),
            DriveGeometry::Mecanum {
                half_length,
                half_width,
            } => {
                let k = half_length + half_width;
                (
                    0.25 * (arcs[0] + arcs[1] + arcs[2] + arcs[3]),
                    0.25 * (-arcs[0] + arcs[1] + arcs[2] - arcs[3]),
                    (-arcs[0] + arcs[1] - arcs[2] + arcs[3]) / (4.0 * k),
                )
            }
        };
        let h = 1.0 / steps as f64;
        for step in 0..steps {
            // Midpoint rule on the world-frame velocity.
            let theta = pose.theta + 0.5 * h * dtheta;
            pose = Pose2D::new(
                pose.x + h * (forward * theta.cos() - lateral * theta.sin()),
                pose.y + h * (forward * theta.sin() + lateral * theta.cos()),
                (step + 1) as f64 * h * dtheta,
            );
        }
        pose
    }

    #[test]
    fn zero_ticks_is_identity() {
        let pose = diff_drive_forward(&dvector![0.0, 0.0], &diff_model()).unwrap();
        assert_eq!(pose, Pose2D::IDENTITY);
        let pose = mecanum_forward(&dvector![0.0, 0.0, 0.0, 0.0], &mecanum_model()).unwrap();
        assert_eq!(pose, Pose2D::IDENTITY);
    }

    #[test]
    fn equal_ticks_drive_straight() {
        let model = diff_model();
        let pose = diff_drive_forward(&dvector![500.0, 500.0], &model).unwrap();
        let expected_x = TAU * 0.03 * 500.0 / 1000.0;
        assert!((pose.x - expected_x).abs() < 1e-12);
        assert_eq!(pose.y, 0.0);
        assert_eq!(pose.theta, 0.0);
    }

    #[test]
    fn opposite_ticks_turn_in_place() {
        let model = diff_model();
        let n = 40.0;
        let pose = diff_drive_forward(&dvector![-n, n], &model).unwrap();
        assert!(pose.x.abs() < 1e-15);
        assert!(pose.y.abs() < 1e-15);
        let expected = TAU * 0.03 * n / 1000.0 / 0.15;
        assert!((pose.theta - expected).abs() < 1e-12);
    }

    #[test]
    fn diff_arc_matches_fine_integration() {
        let model = diff_model();
        for (l, r) in [(300.0, 420.0), (-120.0, 260.0), (55.0, 54.0), (-80.0, -81.5)] {
            let ticks = dvector![l, r];
            let closed_form = diff_drive_forward(&ticks, &model).unwrap();
            let arcs = model.arcs_from_ticks(&ticks).unwrap();
            let oracle = integrate_fine(&model, &arcs, 200_000);
            assert!(
                closed_form.max_abs_diff(&oracle) < 1e-9,
                "ticks ({l}, {r}): closed form {closed_form}, oracle {oracle}"
            );
        }
    }

    #[test]
    fn mecanum_equal_ticks_drive_straight() {
        let pose = mecanum_forward(&dvector![300.0, 300.0, 300.0, 300.0], &mecanum_model()).unwrap();
        let expected_x = TAU * 0.03 * 300.0 / 2000.0;
        assert!((pose.x - expected_x).abs() < 1e-12);
        assert_eq!(pose.y, 0.0);
        assert_eq!(pose.theta, 0.0);
    }

    #[test]
    fn mecanum_strafe_pattern_translates_laterally() {
        // Ticks (n, -n, -n, n) cancel in both forward speed and rotation,
        // leaving pure lateral motion.
        let n = 250.0;
        let pose = mecanum_forward(&dvector![n, -n, -n, n], &mecanum_model()).unwrap();
        assert!(pose.x.abs() < 1e-15, "got {pose}");
        assert_eq!(pose.theta, 0.0);
        let expected = -TAU * 0.03 * n / 2000.0;
        assert!((pose.y - expected).abs() < 1e-12, "got {pose}");
    }

    #[test]
    fn mecanum_strafe_sign_agrees_with_twist_integration() {
        let model = mecanum_model();
        let ticks = dvector![250.0, -250.0, -250.0, 250.0];
        let closed_form = mecanum_forward(&ticks, &model).unwrap();
        let arcs = model.arcs_from_ticks(&ticks).unwrap();
        let oracle = integrate_fine(&model, &arcs, 50_000);
        assert!(closed_form.max_abs_diff(&oracle) < 1e-9);
    }

    #[test]
    fn mecanum_general_motion_matches_fine_integration() {
        let model = mecanum_model();
        for ticks in [
            dvector![400.0, 180.0, 260.0, 320.0],
            dvector![-100.0, 240.0, 240.0, -100.0],
            dvector![60.0, -60.0, 70.0, -70.0],
        ] {
            let closed_form = mecanum_forward(&ticks, &model).unwrap();
            let arcs = model.arcs_from_ticks(&ticks).unwrap();
            let oracle = integrate_fine(&model, &arcs, 200_000);
            assert!(
                closed_form.max_abs_diff(&oracle) < 1e-9,
                "ticks {ticks:?}: closed form {closed_form}, oracle {oracle}"
            );
        }
    }

    #[test]
    fn twist_displacement_small_angle_branch_is_continuous() {
        // Translation must join smoothly across the straight-line cutoff;
        // the seam gap is bounded by |v| * dtheta / 2 ≈ 6e-11 here.
        let just_below = twist_displacement(0.1, 0.02, 0.999e-9);
        let just_above = twist_displacement(0.1, 0.02, 1.001e-9);
        assert!((just_below.x - just_above.x).abs() < 1e-9);
        assert!((just_below.y - just_above.y).abs() < 1e-9);
    }

    #[test]
    fn wrong_tick_count_is_a_dimension_error() {
        let err = diff_drive_forward(&dvector![1.0, 2.0, 3.0], &diff_model()).unwrap_err();
        assert!(matches!(err, Error::Dimension { .. }));
        let err = mecanum_forward(&dvector![1.0, 2.0], &mecanum_model()).unwrap_err();
        assert!(matches!(err, Error::Dimension { .. }));
    }

    #[test]
    fn kinematics_reject_mismatched_geometry() {
        assert!(diff_drive_forward(&dvector![1.0, 2.0], &mecanum_model()).is_err());
        assert!(mecanum_forward(&dvector![1.0, 2.0, 3.0, 4.0], &diff_model()).is_err());
    }

    #[test]
    fn inverse_kinematics_round_trips_through_forward() {
        for model in [diff_model(), mecanum_model()] {
            let (vx, vy, omega) = match model.geometry() {
                DriveGeometry::DiffDrive { .. } => (0.31, 0.0, -0.42),
                DriveGeometry::Mecanum { .. } => (0.31, -0.18, 0.27),
            };
            let dt = 0.25;
            let speeds = model.wheel_speeds_for_twist(vx, vy, omega);
            let arcs: Vec<f64> = speeds
                .iter()
                .zip(model.wheel_radii())
                .map(|(w, r)| w * r * dt)
                .collect();
            let pose = model.displacement_from_arcs(&arcs).unwrap();
            let expected = twist_displacement(vx * dt, vy * dt, omega * dt);
            assert!(
                pose.max_abs_diff(&expected) < 1e-12,
                "model {:?}", model.geometry()
            );
        }
    }

    #[test]
    fn no_deformation_leaves_radii_unchanged() {
        let model = diff_model();
        let deformed =
            apply_deformation(&model, &Deformation::none(2), &[0.3, 0.4]).unwrap();
        assert_eq!(deformed, model);
    }

    #[test]
    fn scale_and_tilt_shrink_or_grow_the_radius() {
        let model = diff_model();
        let scaled =
            apply_deformation(&model, &Deformation::scale_wheel(2, 0, 1.05), &[0.0, 0.0]).unwrap();
        assert!((scaled.wheel_radii()[0] - 0.0315).abs() < 1e-15);
        assert_eq!(scaled.wheel_radii()[1], 0.03);

        let tilted =
            apply_deformation(&model, &Deformation::tilt_wheel(2, 1, 60.0), &[0.0, 0.0]).unwrap();
        assert_eq!(tilted.wheel_radii()[0], 0.03);
        assert!((tilted.wheel_radii()[1] - 0.015).abs() < 1e-12);
    }

    #[test]
    fn ripple_depends_on_wheel_angle() {
        let model = diff_model();
        let mut deform = Deformation::none(2);
        deform.ripple[0] = 0.1;
        let at_peak = apply_deformation(&model, &deform, &[TAU / 4.0, 0.0]).unwrap();
        assert!((at_peak.wheel_radii()[0] - 0.033).abs() < 1e-12);
        let at_zero = apply_deformation(&model, &deform, &[0.0, 0.0]).unwrap();
        assert_eq!(at_zero.wheel_radii()[0], 0.03);
    }

    #[test]
    fn deformation_validation_rejects_out_of_range_values() {
        assert!(Deformation {
            scale: vec![0.0, 1.0],
            ..Deformation::none(2)
        }
        .validate(2)
        .is_err());
        assert!(Deformation {
            tilt_deg: vec![90.0, 0.0],
            ..Deformation::none(2)
        }
        .validate(2)
        .is_err());
        assert!(Deformation {
            ripple: vec![1.0, 0.0],
            ..Deformation::none(2)
        }
        .validate(2)
        .is_err());
        assert!(Deformation::none(4).validate(2).is_err());
    }

    #[test]
    fn invalid_model_parameters_are_rejected() {
        assert!(DriveModel::diff_drive([0.0, 0.03], 0.15, 1000.0).is_err());
        assert!(DriveModel::diff_drive([0.03, 0.03], 0.0, 1000.0).is_err());
        assert!(DriveModel::diff_drive([0.03, 0.03], 0.15, 0.5).is_err());
        assert!(DriveModel::mecanum([0.03; 4], 0.0, 0.12, 2000.0).is_err());
    }
}
