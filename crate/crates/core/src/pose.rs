//! Planar poses and their composition algebra.
//!
//! A [`Pose2D`] is an element of SE(2): a translation `(x, y)` plus a heading
//! `theta`. Composition follows the usual roto-translation rules:
//!
//! ```text
//! a.compose(b) = [ a_x + b_x cos a_θ − b_y sin a_θ ,
//!                  a_y + b_x sin a_θ + b_y cos a_θ ,
//!                  a_θ + b_θ ]
//! a.inverse()  = [ −a_x cos a_θ − a_y sin a_θ ,
//!                   a_x sin a_θ − a_y cos a_θ ,
//!                  −a_θ ]
//! ```
//!
//! Headings are always stored normalized to the half-open interval
//! `(-π, π]`, so composing long chains never accumulates unbounded angles.

use std::f64::consts::{PI, TAU};

use nalgebra::Vector3;

/// Wrap an angle to `(-π, π]`.
///
/// The upper boundary is inclusive: `normalize_angle(PI)` is `PI`, while
/// `normalize_angle(-PI)` is also `PI`.
pub fn normalize_angle(theta: f64) -> f64 {
    // Remainder lands in (-2π, 2π); one correction step reaches (-π, π].
    let mut wrapped = theta % TAU;
    if wrapped > PI {
        wrapped -= TAU;
    } else if wrapped <= -PI {
        wrapped += TAU;
    }
    wrapped
}

/// A planar pose: translation in meters, heading in radians.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    /// Heading, kept in `(-π, π]` by every constructor and operation.
    pub theta: f64,
}

impl Pose2D {
    /// The identity element: zero translation, zero heading.
    pub const IDENTITY: Pose2D = Pose2D {
        x: 0.0,
        y: 0.0,
        theta: 0.0,
    };

    /// Build a pose, normalizing the heading.
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        debug_assert!(
            x.is_finite() && y.is_finite() && theta.is_finite(),
            "pose components must be finite, got ({x}, {y}, {theta})"
        );
        Pose2D {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    /// Roto-translation composition: apply `other` in the frame of `self`.
    pub fn compose(&self, other: &Pose2D) -> Pose2D {
        let (sin, cos) = self.theta.sin_cos();
        Pose2D::new(
            self.x + other.x * cos - other.y * sin,
            self.y + other.x * sin + other.y * cos,
            self.theta + other.theta,
        )
    }

    /// The pose that undoes `self`: `p.compose(&p.inverse())` is identity.
    pub fn inverse(&self) -> Pose2D {
        let (sin, cos) = self.theta.sin_cos();
        Pose2D::new(
            -self.x * cos - self.y * sin,
            self.x * sin - self.y * cos,
            -self.theta,
        )
    }

    /// Pose of `other` expressed in the frame of `self`.
    ///
    /// Equivalent to `self.inverse().compose(other)`; for trajectory poses
    /// `q_j`, `q_k` this is the relative displacement over `[t_j, t_k]`.
    pub fn relative_pose(&self, other: &Pose2D) -> Pose2D {
        self.inverse().compose(other)
    }

    /// Euclidean norm of the translation component.
    pub fn translation_norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Components as `(x, y, theta)` for numeric interop.
    pub fn to_vector(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.theta)
    }

    /// Inverse of [`Pose2D::to_vector`]; normalizes the heading.
    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Pose2D::new(v.x, v.y, v.z)
    }

    /// Largest componentwise deviation from `other`, with the heading
    /// difference wrapped. Useful for tolerance checks in tests.
    pub fn max_abs_diff(&self, other: &Pose2D) -> f64 {
        let dtheta = normalize_angle(self.theta - other.theta).abs();
        (self.x - other.x).abs().max((self.y - other.y).abs()).max(dtheta)
    }
}

impl std::fmt::Display for Pose2D {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({:.6}, {:.6}, {:.6} rad)", self.x, self.y, self.theta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const TOL: f64 = 1e-12;

    #[test]
    fn normalize_angle_hits_half_open_interval() {
        assert_eq!(normalize_angle(0.0), 0.0);
        assert_eq!(normalize_angle(PI), PI);
        assert_eq!(normalize_angle(-PI), PI);
        assert_abs_diff_eq!(normalize_angle(3.0 * PI / 2.0), -PI / 2.0, epsilon = TOL);
        assert_abs_diff_eq!(normalize_angle(-3.0 * PI / 2.0), PI / 2.0, epsilon = TOL);
        assert_abs_diff_eq!(normalize_angle(7.0 * TAU + 0.25), 0.25, epsilon = 1e-12);
    }

    #[test]
    fn compose_quarter_turn_moves_sideways() {
        let a = Pose2D::new(1.0, 0.0, PI / 2.0);
        let b = Pose2D::new(1.0, 0.0, 0.0);
        let c = a.compose(&b);
        assert!(c.max_abs_diff(&Pose2D::new(1.0, 1.0, PI / 2.0)) < TOL);
    }

    #[test]
    fn compose_wraps_heading() {
        let a = Pose2D::new(1.0, 2.0, PI);
        let b = Pose2D::new(1.0, 1.0, PI / 2.0);
        let c = a.compose(&b);
        assert!(
            c.max_abs_diff(&Pose2D::new(0.0, 1.0, -PI / 2.0)) < TOL,
            "got {c}"
        );
    }

    #[test]
    fn inverse_of_identity_is_identity() {
        assert!(Pose2D::IDENTITY.inverse().max_abs_diff(&Pose2D::IDENTITY) < TOL);
    }

    #[test]
    fn inverse_quarter_turn() {
        let p = Pose2D::new(1.0, 0.0, PI / 2.0);
        let inv = p.inverse();
        assert!(
            inv.max_abs_diff(&Pose2D::new(0.0, 1.0, -PI / 2.0)) < TOL,
            "got {inv}"
        );
    }

    #[test]
    fn relative_pose_recovers_step() {
        let q_j = Pose2D::new(0.3, -0.7, 0.4);
        let step = Pose2D::new(0.11, -0.02, 0.09);
        let q_k = q_j.compose(&step);
        assert!(q_j.relative_pose(&q_k).max_abs_diff(&step) < TOL);
    }

    fn arb_pose() -> impl Strategy<Value = Pose2D> {
        // Translations span several orders of magnitude; headings are drawn
        // beyond ±π so normalization is exercised on construction.
        (
            prop::num::f64::NORMAL.prop_map(|v| (v % 1.0e3) * 1.0e-1),
            prop::num::f64::NORMAL.prop_map(|v| (v % 1.0e3) * 1.0e-1),
            -10.0..10.0f64,
        )
            .prop_map(|(x, y, theta)| Pose2D::new(x, y, theta))
    }

    proptest! {
        #[test]
        fn identity_laws(p in arb_pose()) {
            prop_assert!(p.compose(&Pose2D::IDENTITY).max_abs_diff(&p) < TOL);
            prop_assert!(Pose2D::IDENTITY.compose(&p).max_abs_diff(&p) < TOL);
        }

        #[test]
        fn inverse_laws(p in arb_pose()) {
            prop_assert!(p.compose(&p.inverse()).max_abs_diff(&Pose2D::IDENTITY) < TOL);
            prop_assert!(p.inverse().compose(&p).max_abs_diff(&Pose2D::IDENTITY) < TOL);
            prop_assert!(p.inverse().inverse().max_abs_diff(&p) < TOL);
        }

        #[test]
        fn composition_is_associative(a in arb_pose(), b in arb_pose(), c in arb_pose()) {
            let left = a.compose(&b).compose(&c);
            let right = a.compose(&b.compose(&c));
            prop_assert!(left.max_abs_diff(&right) < TOL, "left {left} right {right}");
        }

        #[test]
        fn normalization_is_idempotent(theta in -100.0..100.0f64) {
            let once = normalize_angle(theta);
            prop_assert_eq!(once, normalize_angle(once));
            prop_assert!(once > -PI && once <= PI);
        }

        #[test]
        fn relative_pose_composes_back(a in arb_pose(), b in arb_pose()) {
            let rel = a.relative_pose(&b);
            prop_assert!(a.compose(&rel).max_abs_diff(&b) < TOL);
        }
    }
}
