//! Prior mean functions for the displacement regressors.

use nalgebra::{DMatrix, DVector, Vector3};

use crate::data::TickVector;
use crate::error::{Error, Result};

/// Which mean family to fit; the fitted result is a [`MeanSpec`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeanKind {
    Zero,
    Linear,
}

/// Prior mean of the displacement as a function of the tick input.
#[derive(Clone, Debug, PartialEq)]
pub enum MeanSpec {
    /// Identically zero: displacements are explained by the kernel alone.
    Zero,
    /// Linear map `x ↦ C x` with `C ∈ R^{3×m}`; row order is `(x, y, theta)`.
    Linear { coeffs: DMatrix<f64> },
}

impl MeanSpec {
    /// Linear mean from a coefficient matrix; must be `3×m`.
    pub fn linear(coeffs: DMatrix<f64>) -> Result<Self> {
        if coeffs.nrows() != 3 {
            return Err(Error::Dimension {
                context: "linear mean coefficient rows",
                expected: 3,
                got: coeffs.nrows(),
            });
        }
        if coeffs.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "linear mean coefficients must be finite".into(),
            ));
        }
        Ok(MeanSpec::Linear { coeffs })
    }

    pub fn kind(&self) -> MeanKind {
        match self {
            MeanSpec::Zero => MeanKind::Zero,
            MeanSpec::Linear { .. } => MeanKind::Linear,
        }
    }

    /// Check compatibility with an input dimension.
    pub fn validate(&self, input_dim: usize) -> Result<()> {
        match self {
            MeanSpec::Zero => Ok(()),
            MeanSpec::Linear { coeffs } => {
                if coeffs.ncols() != input_dim {
                    return Err(Error::Dimension {
                        context: "linear mean coefficient columns",
                        expected: input_dim,
                        got: coeffs.ncols(),
                    });
                }
                Ok(())
            }
        }
    }

    /// Mean displacement `(x, y, theta)` at a tick input.
    pub fn eval(&self, ticks: &TickVector) -> Result<Vector3<f64>> {
        match self {
            MeanSpec::Zero => Ok(Vector3::zeros()),
            MeanSpec::Linear { coeffs } => {
                self.validate(ticks.len())?;
                let out = coeffs * ticks;
                Ok(Vector3::new(out[0], out[1], out[2]))
            }
        }
    }

    /// One output row's mean at a tick input, without dimension checks.
    pub(crate) fn eval_output(&self, output: usize, ticks: &TickVector) -> f64 {
        match self {
            MeanSpec::Zero => 0.0,
            MeanSpec::Linear { coeffs } => coeffs.row(output).transpose().dot(ticks),
        }
    }

    /// Overwrite one output row of a linear mean; no-op for the zero mean.
    pub(crate) fn set_linear_row(&mut self, output: usize, row: &DVector<f64>) {
        if let MeanSpec::Linear { coeffs } = self {
            coeffs.row_mut(output).copy_from(&row.transpose());
        }
    }
}
