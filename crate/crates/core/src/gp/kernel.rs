//! Covariance functions over tick inputs.
//!
//! Outputs `(x, y, theta)` are modeled as independent processes, so a
//! kernel evaluation returns the three diagonal entries of a `3×3`
//! output-covariance block. The RBF family carries separate hyperparameters
//! per output; the linear (dot-product) kernel is parameter-free with an
//! implicit unit prior on the weights.

use nalgebra::{DVector, Vector3};

use crate::data::TickVector;
use crate::error::{Error, Result};

/// Which kernel family to fit; the fitted result is a [`KernelSpec`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelKind {
    Rbf,
    Linear,
    RbfPlusLinear,
}

/// Per-output RBF hyperparameters.
///
/// The covariance for output `i` is
/// `signal_std[i]^2 * exp(-1/2 * sum_d (a_d - b_d)^2 / length_scale_sq[i][d])`,
/// i.e. `length_scale_sq` holds the diagonal of the positive-definite
/// length-scale matrix (units of ticks squared).
#[derive(Clone, Debug, PartialEq)]
pub struct RbfParams {
    pub signal_std: Vector3<f64>,
    pub length_scale_sq: [DVector<f64>; 3],
}

impl RbfParams {
    /// Same signal std and length scale for every output and input
    /// dimension; `length_scale` is in ticks (it is squared internally).
    pub fn isotropic(signal_std: f64, length_scale: f64, input_dim: usize) -> Self {
        let sq = length_scale * length_scale;
        RbfParams {
            signal_std: Vector3::from_element(signal_std),
            length_scale_sq: std::array::from_fn(|_| DVector::from_element(input_dim, sq)),
        }
    }

    pub fn validate(&self, input_dim: usize) -> Result<()> {
        if self.signal_std.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "RBF signal std must be positive, got {:?}",
                self.signal_std.as_slice()
            )));
        }
        for scales in &self.length_scale_sq {
            if scales.len() != input_dim {
                return Err(Error::Dimension {
                    context: "RBF length scales",
                    expected: input_dim,
                    got: scales.len(),
                });
            }
            if scales.iter().any(|b| !(*b > 0.0) || !b.is_finite()) {
                return Err(Error::InvalidArgument(
                    "RBF squared length scales must be positive".into(),
                ));
            }
        }
        Ok(())
    }
}

/// A covariance function over tick inputs with diagonal output structure.
#[derive(Clone, Debug, PartialEq)]
pub enum KernelSpec {
    Rbf(RbfParams),
    /// Unscaled dot product `⟨a, b⟩`, identical for every output.
    Linear,
    /// Sum of the RBF and linear kernels.
    RbfPlusLinear(RbfParams),
}

impl KernelSpec {
    pub fn kind(&self) -> KernelKind {
        match self {
            KernelSpec::Rbf(_) => KernelKind::Rbf,
            KernelSpec::Linear => KernelKind::Linear,
            KernelSpec::RbfPlusLinear(_) => KernelKind::RbfPlusLinear,
        }
    }

    pub fn rbf_params(&self) -> Option<&RbfParams> {
        match self {
            KernelSpec::Rbf(p) | KernelSpec::RbfPlusLinear(p) => Some(p),
            KernelSpec::Linear => None,
        }
    }

    pub(crate) fn rbf_params_mut(&mut self) -> Option<&mut RbfParams> {
        match self {
            KernelSpec::Rbf(p) | KernelSpec::RbfPlusLinear(p) => Some(p),
            KernelSpec::Linear => None,
        }
    }

    pub fn validate(&self, input_dim: usize) -> Result<()> {
        match self.rbf_params() {
            Some(params) => params.validate(input_dim),
            None => Ok(()),
        }
    }

    /// Diagonal of the `3×3` covariance block between two inputs.
    pub fn eval(&self, a: &TickVector, b: &TickVector) -> Result<Vector3<f64>> {
        if a.len() != b.len() {
            return Err(Error::Dimension {
                context: "kernel inputs",
                expected: a.len(),
                got: b.len(),
            });
        }
        self.validate(a.len())?;
        Ok(Vector3::from_fn(|i, _| self.eval_output(i, a, b)))
    }

    /// One output's covariance between two inputs, without validation.
    pub(crate) fn eval_output(&self, output: usize, a: &TickVector, b: &TickVector) -> f64 {
        match self {
            KernelSpec::Rbf(params) => rbf_output(params, output, a, b),
            KernelSpec::Linear => a.dot(b),
            KernelSpec::RbfPlusLinear(params) => rbf_output(params, output, a, b) + a.dot(b),
        }
    }

    /// The RBF component alone (zero for the linear kernel); used by the
    /// marginal-likelihood gradients, which only involve the RBF part.
    pub(crate) fn eval_rbf_output(&self, output: usize, a: &TickVector, b: &TickVector) -> f64 {
        match self.rbf_params() {
            Some(params) => rbf_output(params, output, a, b),
            None => 0.0,
        }
    }
}

fn rbf_output(params: &RbfParams, output: usize, a: &TickVector, b: &TickVector) -> f64 {
    let scales = &params.length_scale_sq[output];
    let mut quad = 0.0;
    for d in 0..a.len() {
        let diff = a[d] - b[d];
        quad += diff * diff / scales[d];
    }
    let sigma = params.signal_std[output];
    sigma * sigma * (-0.5 * quad).exp()
}
