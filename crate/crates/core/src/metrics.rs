//! Trajectory accuracy metrics against a reference.
//!
//! Two standard summaries: relative pose error (RPE) for local,
//! step-to-step drift, and absolute trajectory error (ATE) for global
//! consistency. Both are root-mean-square norms of the translational part
//! of pose errors; the rotational parts are available separately as
//! diagnostics. Trajectories are compared from a shared start pose — no
//! least-squares pre-alignment is applied.

use crate::error::{Error, Result};
use crate::pose::{normalize_angle, Pose2D};

/// Two pose sequences in 1:1 correspondence.
#[derive(Clone, Debug)]
pub struct TrajectoryPair {
    estimated: Vec<Pose2D>,
    reference: Vec<Pose2D>,
}

/// What time alignment kept and discarded.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AlignmentReport {
    pub matched: usize,
    pub dropped_estimated: usize,
    pub dropped_reference: usize,
}

impl TrajectoryPair {
    /// Pair two already-corresponding sequences. They must be the same
    /// nonzero length.
    pub fn new(estimated: Vec<Pose2D>, reference: Vec<Pose2D>) -> Result<Self> {
        if estimated.len() != reference.len() {
            return Err(Error::Dimension {
                context: "trajectory lengths",
                expected: reference.len(),
                got: estimated.len(),
            });
        }
        if estimated.is_empty() {
            return Err(Error::InsufficientData(
                "trajectory comparison needs at least one pose".into(),
            ));
        }
        Ok(TrajectoryPair {
            estimated,
            reference,
        })
    }

    /// Pair two time-stamped sequences by nearest-timestamp matching.
    ///
    /// Each estimated pose is matched to the closest unused reference pose
    /// (earlier wins ties); pairs further apart than `tolerance` seconds
    /// are dropped and counted. Timestamps must be strictly increasing.
    pub fn align(
        estimated: &[(f64, Pose2D)],
        reference: &[(f64, Pose2D)],
        tolerance: f64,
    ) -> Result<(Self, AlignmentReport)> {
        if !(tolerance > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "alignment tolerance must be positive, got {tolerance}"
            )));
        }
        check_monotone(estimated, "estimated trajectory")?;
        check_monotone(reference, "reference trajectory")?;

        let mut est = Vec::new();
        let mut refr = Vec::new();
        let mut j = 0usize;
        for (t, pose) in estimated {
            if j >= reference.len() {
                break;
            }
            while j + 1 < reference.len()
                && (reference[j + 1].0 - t).abs() < (reference[j].0 - t).abs()
            {
                j += 1;
            }
            if (reference[j].0 - t).abs() <= tolerance {
                est.push(*pose);
                refr.push(reference[j].1);
                j += 1;
            }
        }

        let report = AlignmentReport {
            matched: est.len(),
            dropped_estimated: estimated.len() - est.len(),
            dropped_reference: reference.len() - refr.len(),
        };
        Ok((TrajectoryPair::new(est, refr)?, report))
    }

    pub fn len(&self) -> usize {
        self.estimated.len()
    }

    pub fn is_empty(&self) -> bool {
        self.estimated.is_empty()
    }

    pub fn estimated(&self) -> &[Pose2D] {
        &self.estimated
    }

    pub fn reference(&self) -> &[Pose2D] {
        &self.reference
    }

    /// Per-step relative-pose errors: the `k`-th term compares the motion
    /// between poses `k` and `k+1` in each trajectory.
    fn relative_errors(&self) -> impl Iterator<Item = Pose2D> + '_ {
        self.estimated.windows(2).zip(self.reference.windows(2)).map(
            |(est, refr)| {
                let step_est = est[0].relative_pose(&est[1]);
                let step_ref = refr[0].relative_pose(&refr[1]);
                step_est.inverse().compose(&step_ref)
            },
        )
    }

    /// Per-pose absolute errors: reference pose expressed in the frame of
    /// the corresponding estimated pose.
    fn absolute_errors(&self) -> impl Iterator<Item = Pose2D> + '_ {
        self.estimated
            .iter()
            .zip(&self.reference)
            .map(|(est, refr)| est.relative_pose(refr))
    }
}

fn check_monotone(seq: &[(f64, Pose2D)], what: &'static str) -> Result<()> {
    for pair in seq.windows(2) {
        if pair[1].0 <= pair[0].0 {
            return Err(Error::InvalidArgument(format!(
                "{what} timestamps must be strictly increasing ({} then {})",
                pair[0].0, pair[1].0
            )));
        }
    }
    Ok(())
}

fn rms(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for v in values {
        sum += v * v;
        count += 1;
    }
    (sum / count as f64).sqrt()
}

/// Relative pose error in meters: RMS translational norm of per-step
/// relative-motion errors. Needs at least two poses.
pub fn rpe(pair: &TrajectoryPair) -> Result<f64> {
    if pair.len() < 2 {
        return Err(Error::InsufficientData(
            "relative pose error needs at least two poses".into(),
        ));
    }
    Ok(rms(pair.relative_errors().map(|e| e.translation_norm())))
}

/// Absolute trajectory error in meters: RMS translational norm of per-pose
/// errors.
pub fn ate(pair: &TrajectoryPair) -> Result<f64> {
    Ok(rms(pair.absolute_errors().map(|e| e.translation_norm())))
}

/// Rotational counterpart of [`rpe`], in radians; diagnostic only.
pub fn rpe_rotation(pair: &TrajectoryPair) -> Result<f64> {
    if pair.len() < 2 {
        return Err(Error::InsufficientData(
            "relative pose error needs at least two poses".into(),
        ));
    }
    Ok(rms(pair.relative_errors().map(|e| normalize_angle(e.theta))))
}

/// Rotational counterpart of [`ate`], in radians; diagnostic only.
pub fn ate_rotation(pair: &TrajectoryPair) -> Result<f64> {
    Ok(rms(pair.absolute_errors().map(|e| normalize_angle(e.theta))))
}

/// All four metrics over one pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorSummary {
    /// Absolute trajectory error, meters.
    pub ate: f64,
    /// Relative pose error, meters.
    pub rpe: f64,
    /// RMS absolute heading error, radians.
    pub ate_rotation: f64,
    /// RMS relative heading error, radians.
    pub rpe_rotation: f64,
    /// Poses compared.
    pub poses: usize,
}

pub fn summarize(pair: &TrajectoryPair) -> Result<ErrorSummary> {
    Ok(ErrorSummary {
        ate: ate(pair)?,
        rpe: rpe(pair)?,
        ate_rotation: ate_rotation(pair)?,
        rpe_rotation: rpe_rotation(pair)?,
        poses: pair.len(),
    })
}
