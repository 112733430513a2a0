//! Displacement datasets: the training/evaluation unit shared by every
//! calibration model.
//!
//! One [`DisplacementSample`] pairs the wheel-encoder tick increments
//! accumulated over a time interval with the sensor's measured
//! roto-translation over that interval and the (known) covariance of that
//! measurement.

use nalgebra::{DVector, Matrix3};

use crate::error::{Error, Result};
use crate::pose::Pose2D;

/// Wheel-encoder tick increments over one interval, one entry per wheel.
///
/// Counts are integral at the encoder but carried as reals: regression
/// models treat them as points in `R^m`.
pub type TickVector = DVector<f64>;

/// One measured displacement edge.
#[derive(Clone, Debug)]
pub struct DisplacementSample {
    /// Interval start time in seconds.
    pub t_start: f64,
    /// Interval end time in seconds; must exceed `t_start`.
    pub t_end: f64,
    /// Tick increments per wheel over `[t_start, t_end]`.
    pub ticks: TickVector,
    /// Measured sensor displacement over the interval.
    pub displacement: Pose2D,
    /// Covariance of the displacement measurement (x, y, theta order).
    pub noise_cov: Matrix3<f64>,
}

impl DisplacementSample {
    /// Check interval ordering, finiteness, and that `noise_cov` is
    /// symmetric positive semidefinite.
    pub fn validate(&self) -> Result<()> {
        if !(self.t_end > self.t_start) {
            return Err(Error::InvalidArgument(format!(
                "sample interval must have t_end > t_start, got [{}, {}]",
                self.t_start, self.t_end
            )));
        }
        if self.ticks.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument(
                "tick increments must be finite".into(),
            ));
        }
        validate_noise_cov(&self.noise_cov)?;
        Ok(())
    }
}

/// Check that a covariance matrix is symmetric positive semidefinite
/// (within a scale-relative round-off allowance).
pub fn validate_noise_cov(cov: &Matrix3<f64>) -> Result<()> {
    if cov.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "noise covariance must be finite".into(),
        ));
    }
    let scale = cov.amax().max(1e-300);
    let tol = 1e-9 * scale;
    for i in 0..3 {
        for j in (i + 1)..3 {
            if (cov[(i, j)] - cov[(j, i)]).abs() > tol {
                return Err(Error::InvalidArgument(format!(
                    "noise covariance is not symmetric at ({i}, {j})"
                )));
            }
        }
        if cov[(i, i)] < -tol {
            return Err(Error::InvalidArgument(format!(
                "noise covariance has negative variance {} on the diagonal",
                cov[(i, i)]
            )));
        }
    }
    let symmetrized = (cov + cov.transpose()) * 0.5;
    let eigenvalues = symmetrized.symmetric_eigenvalues();
    if eigenvalues.iter().any(|&l| l < -tol) {
        return Err(Error::InvalidArgument(
            "noise covariance is not positive semidefinite".into(),
        ));
    }
    Ok(())
}

/// Validate a dataset and return its common tick dimension.
///
/// Fails on an empty dataset, on any invalid sample, and on samples whose
/// tick vectors disagree in length.
pub fn validate_dataset(samples: &[DisplacementSample]) -> Result<usize> {
    let first = samples.first().ok_or_else(|| {
        Error::InsufficientData("dataset contains no displacement samples".into())
    })?;
    let dim = first.ticks.len();
    for (idx, sample) in samples.iter().enumerate() {
        sample.validate().map_err(|e| {
            Error::InvalidArgument(format!("sample {idx}: {e}"))
        })?;
        if sample.ticks.len() != dim {
            return Err(Error::Dimension {
                context: "dataset tick vectors",
                expected: dim,
                got: sample.ticks.len(),
            });
        }
    }
    Ok(dim)
}

/// Per-axis standard deviations `sqrt(diag(noise_cov))` of a sample.
pub fn noise_std(sample: &DisplacementSample) -> [f64; 3] {
    [
        sample.noise_cov[(0, 0)].max(0.0).sqrt(),
        sample.noise_cov[(1, 1)].max(0.0).sqrt(),
        sample.noise_cov[(2, 2)].max(0.0).sqrt(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    fn sample() -> DisplacementSample {
        DisplacementSample {
            t_start: 0.0,
            t_end: 0.3,
            ticks: dvector![10.0, 12.0],
            displacement: Pose2D::new(0.01, 0.0, 0.002),
            noise_cov: Matrix3::from_diagonal(&nalgebra::vector![4e-6, 4e-6, 1e-5]),
        }
    }

    #[test]
    fn valid_sample_passes() {
        sample().validate().unwrap();
    }

    #[test]
    fn reversed_interval_is_rejected() {
        let mut s = sample();
        s.t_end = s.t_start;
        assert!(s.validate().is_err());
    }

    #[test]
    fn negative_variance_is_rejected() {
        let mut s = sample();
        s.noise_cov[(1, 1)] = -1e-6;
        let err = s.validate().unwrap_err();
        assert!(err.to_string().contains("negative variance"), "{err}");
    }

    #[test]
    fn asymmetric_covariance_is_rejected() {
        let mut s = sample();
        s.noise_cov[(0, 1)] = 1e-6;
        assert!(s.validate().is_err());
    }

    #[test]
    fn indefinite_covariance_is_rejected() {
        let mut s = sample();
        // Symmetric, positive diagonal, but eigenvalues {3, -1} in the x-y block.
        s.noise_cov[(0, 0)] = 1.0;
        s.noise_cov[(1, 1)] = 1.0;
        s.noise_cov[(0, 1)] = 2.0;
        s.noise_cov[(1, 0)] = 2.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn dataset_dimension_mismatch_is_rejected() {
        let mut second = sample();
        second.ticks = dvector![1.0, 2.0, 3.0];
        let err = validate_dataset(&[sample(), second]).unwrap_err();
        assert!(matches!(err, Error::Dimension { .. }));
    }

    #[test]
    fn empty_dataset_is_insufficient() {
        assert!(matches!(
            validate_dataset(&[]),
            Err(Error::InsufficientData(_))
        ));
    }
}
