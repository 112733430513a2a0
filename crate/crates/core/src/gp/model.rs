//! Gaussian-process training, prediction, and marginal likelihood.
//!
//! The three displacement outputs are independent scalar processes sharing
//! the tick inputs, so training factorizes one `n×n` system per output
//! rather than a dense `3n×3n` one. Off-diagonal entries of each sample's
//! measurement covariance are dropped to make that split exact; datasets
//! produced by the simulator have diagonal covariance, so nothing is lost
//! there.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, Matrix3, Vector3};

use crate::data::{validate_dataset, DisplacementSample, TickVector};
use crate::error::{Error, Result};

use super::kernel::KernelSpec;
use super::mean::MeanSpec;

/// First jitter attempt, as a fraction of the mean kernel diagonal.
const JITTER_INITIAL: f64 = 1e-10;
/// Escalation stops once the fraction exceeds this.
const JITTER_MAX: f64 = 1e-6;
/// Escalation multiplier between attempts.
const JITTER_GROWTH: f64 = 10.0;

/// A trained Gaussian-process displacement model.
///
/// Holds everything prediction needs: the specs, training inputs,
/// per-output noise diagonals, the solved weight vectors
/// `alpha_i = (K_i + Sigma_i)^-1 (s_i - mu_i)`, and the Cholesky factors of
/// `(K_i + Sigma_i)` for posterior variances.
#[derive(Clone, Debug)]
pub struct GpModel {
    mean: MeanSpec,
    kernel: KernelSpec,
    inputs: Vec<TickVector>,
    noise_diag: [DVector<f64>; 3],
    alpha: [DVector<f64>; 3],
    factors: [Cholesky<f64, Dyn>; 3],
    jitter: [f64; 3],
}

impl GpModel {
    pub fn mean(&self) -> &MeanSpec {
        &self.mean
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn inputs(&self) -> &[TickVector] {
        &self.inputs
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.first().map_or(0, |x| x.len())
    }

    /// Per-output measurement-noise variances at the training points.
    pub fn noise_diag(&self) -> &[DVector<f64>; 3] {
        &self.noise_diag
    }

    /// Per-output solved weights.
    pub fn alpha(&self) -> &[DVector<f64>; 3] {
        &self.alpha
    }

    /// The `3n` weight vector in sample-major layout:
    /// `[a_0x, a_0y, a_0t, a_1x, ...]`.
    pub fn alpha_stacked(&self) -> DVector<f64> {
        let n = self.len();
        DVector::from_fn(3 * n, |idx, _| self.alpha[idx % 3][idx / 3])
    }

    /// Diagonal stabilization added per output during training (zero when
    /// the plain factorization succeeded).
    pub fn jitter(&self) -> [f64; 3] {
        self.jitter
    }

    /// Posterior mean at a tick input; skips the variance solve.
    pub fn predict_mean(&self, ticks: &TickVector) -> Result<Vector3<f64>> {
        self.check_input(ticks)?;
        let mut out = Vector3::zeros();
        for i in 0..3 {
            let mut acc = self.mean.eval_output(i, ticks);
            for (a, x) in self.inputs.iter().enumerate() {
                acc += self.kernel.eval_output(i, ticks, x) * self.alpha[i][a];
            }
            out[i] = acc;
        }
        Ok(out)
    }

    /// Posterior mean and covariance at a tick input. The covariance is
    /// diagonal (independent outputs) with entries floored at zero against
    /// round-off.
    pub fn predict(&self, ticks: &TickVector) -> Result<(Vector3<f64>, Matrix3<f64>)> {
        self.check_input(ticks)?;
        let n = self.len();
        let mut mean = Vector3::zeros();
        let mut var = Vector3::zeros();
        for i in 0..3 {
            let k_star =
                DVector::from_fn(n, |a, _| self.kernel.eval_output(i, ticks, &self.inputs[a]));
            mean[i] = self.mean.eval_output(i, ticks) + k_star.dot(&self.alpha[i]);
            let solved = self.factors[i].solve(&k_star);
            let prior = self.kernel.eval_output(i, ticks, ticks);
            var[i] = (prior - k_star.dot(&solved)).max(0.0);
        }
        Ok((mean, Matrix3::from_diagonal(&var)))
    }

    /// Rebuild a model from persisted parts; refactorizes the training
    /// covariance (with the stored jitter) but trusts the stored weights.
    pub fn from_parts(
        mean: MeanSpec,
        kernel: KernelSpec,
        inputs: Vec<TickVector>,
        noise_diag: [DVector<f64>; 3],
        alpha: [DVector<f64>; 3],
        jitter: [f64; 3],
    ) -> Result<Self> {
        let n = inputs.len();
        if n == 0 {
            return Err(Error::InsufficientData(
                "a Gaussian-process model needs at least one training input".into(),
            ));
        }
        let dim = inputs[0].len();
        if inputs.iter().any(|x| x.len() != dim) {
            return Err(Error::Dimension {
                context: "training inputs",
                expected: dim,
                got: inputs.iter().map(|x| x.len()).find(|l| *l != dim).unwrap_or(dim),
            });
        }
        mean.validate(dim)?;
        kernel.validate(dim)?;
        for i in 0..3 {
            if noise_diag[i].len() != n || alpha[i].len() != n {
                return Err(Error::Dimension {
                    context: "per-output vectors",
                    expected: n,
                    got: noise_diag[i].len().min(alpha[i].len()),
                });
            }
        }
        let mut factors: Vec<Cholesky<f64, Dyn>> = Vec::with_capacity(3);
        for i in 0..3 {
            let mut a = kernel_matrix(&kernel, i, &inputs);
            for r in 0..n {
                a[(r, r)] += noise_diag[i][r] + jitter[i];
            }
            factors.push(Cholesky::new(a).ok_or_else(|| {
                Error::Numerical("stored model covariance is no longer positive definite".into())
            })?);
        }
        let factors: [Cholesky<f64, Dyn>; 3] = match factors.try_into() {
            Ok(f) => f,
            Err(_) => unreachable!("exactly three factors are built"),
        };
        Ok(GpModel {
            mean,
            kernel,
            inputs,
            noise_diag,
            alpha,
            factors,
            jitter,
        })
    }

    fn check_input(&self, ticks: &TickVector) -> Result<()> {
        if ticks.len() != self.input_dim() {
            return Err(Error::Dimension {
                context: "prediction input",
                expected: self.input_dim(),
                got: ticks.len(),
            });
        }
        Ok(())
    }
}

/// Train a Gaussian-process model on a displacement dataset.
///
/// Preconditions: a non-empty dataset with consistent tick dimensions and
/// symmetric positive-semidefinite per-sample noise covariances, and specs
/// whose dimensions match the data. When the covariance factorization fails
/// (e.g. duplicated inputs with vanishing noise), an escalating diagonal
/// jitter of `1e-10 .. 1e-6` times the mean kernel diagonal is applied; the
/// level used is recorded in the model.
pub fn train(
    dataset: &[DisplacementSample],
    mean: MeanSpec,
    kernel: KernelSpec,
) -> Result<GpModel> {
    let dim = validate_dataset(dataset)?;
    mean.validate(dim)?;
    kernel.validate(dim)?;
    let inputs: Vec<TickVector> = dataset.iter().map(|s| s.ticks.clone()).collect();
    let mut noise_diag: [DVector<f64>; 3] = std::array::from_fn(|_| DVector::zeros(dataset.len()));
    let mut alpha: [DVector<f64>; 3] = std::array::from_fn(|_| DVector::zeros(dataset.len()));
    let mut factors: Vec<Cholesky<f64, Dyn>> = Vec::with_capacity(3);
    let mut jitter = [0.0f64; 3];
    for i in 0..3 {
        let system = OutputSystem::build(dataset, &inputs, &mean, &kernel, i)?;
        noise_diag[i] = system.noise;
        alpha[i] = system.alpha;
        jitter[i] = system.jitter;
        factors.push(system.factor);
    }
    let factors: [Cholesky<f64, Dyn>; 3] = match factors.try_into() {
        Ok(f) => f,
        Err(_) => unreachable!("exactly three factors are built"),
    };
    Ok(GpModel {
        mean,
        kernel,
        inputs,
        noise_diag,
        alpha,
        factors,
        jitter,
    })
}

/// Log marginal likelihood of the dataset under the given specs:
/// `-1/2 r'(K+S)^-1 r - 1/2 log det(K+S) - (3n/2) log 2π` summed over the
/// three independent outputs.
pub fn log_marginal_likelihood(
    dataset: &[DisplacementSample],
    mean: &MeanSpec,
    kernel: &KernelSpec,
) -> Result<f64> {
    let dim = validate_dataset(dataset)?;
    mean.validate(dim)?;
    kernel.validate(dim)?;
    let inputs: Vec<TickVector> = dataset.iter().map(|s| s.ticks.clone()).collect();
    let mut total = 0.0;
    for i in 0..3 {
        let system = OutputSystem::build(dataset, &inputs, mean, kernel, i)?;
        total += system.log_marginal;
    }
    Ok(total)
}

/// Gradient of the log marginal likelihood for one output block.
#[derive(Clone, Debug)]
pub struct OutputGradient {
    /// d L / d log(signal_std); 0.0 for linear kernels.
    pub d_log_signal: f64,
    /// d L / d log(length_scale_sq[d]); empty for linear kernels.
    pub d_log_scale_sq: DVector<f64>,
    /// d L / d (mean coefficient row); empty for the zero mean.
    pub d_mean_row: DVector<f64>,
}

/// Log marginal likelihood together with its analytic gradients, one block
/// per output. Used by hyperparameter fitting and validated against central
/// finite differences in the test suite.
pub fn lml_with_gradients(
    dataset: &[DisplacementSample],
    mean: &MeanSpec,
    kernel: &KernelSpec,
) -> Result<(f64, [OutputGradient; 3])> {
    let dim = validate_dataset(dataset)?;
    mean.validate(dim)?;
    kernel.validate(dim)?;
    let inputs: Vec<TickVector> = dataset.iter().map(|s| s.ticks.clone()).collect();
    let mut total = 0.0;
    let mut grads: Vec<OutputGradient> = Vec::with_capacity(3);
    for i in 0..3 {
        let system = OutputSystem::build(dataset, &inputs, mean, kernel, i)?;
        total += system.log_marginal;
        grads.push(output_gradient(&inputs, mean, kernel, i, &system));
    }
    let grads: [OutputGradient; 3] = match grads.try_into() {
        Ok(g) => g,
        Err(_) => unreachable!("exactly three gradients are built"),
    };
    Ok((total, grads))
}

/// Gradient of one output's log marginal likelihood with respect to that
/// output's hyperparameters, written against the factorized system.
pub(crate) fn output_gradient(
    inputs: &[TickVector],
    mean: &MeanSpec,
    kernel: &KernelSpec,
    output: usize,
    system: &OutputSystem,
) -> OutputGradient {
    let n = inputs.len();
    let dim = inputs.first().map_or(0, |x| x.len());
    let alpha = &system.alpha;
    let a_inv = system.factor.inverse();

    let (d_log_signal, d_log_scale_sq) = match kernel.rbf_params() {
        None => (0.0, DVector::zeros(0)),
        Some(params) => {
            let scales = &params.length_scale_sq[output];
            let mut d_signal = 0.0;
            let mut d_scales = DVector::zeros(dim);
            for a in 0..n {
                for b in 0..n {
                    let k_ab = kernel.eval_rbf_output(output, &inputs[a], &inputs[b]);
                    // 1/2 (alpha alpha' - A^-1) ⊙ dK/dθ, with
                    // dK/dlog σ = 2 K_rbf and
                    // dK/dlog b_d = K_rbf (x_ad - x_bd)^2 / (2 b_d).
                    let w = 0.5 * (alpha[a] * alpha[b] - a_inv[(a, b)]) * k_ab;
                    d_signal += 2.0 * w;
                    for d in 0..dim {
                        let diff = inputs[a][d] - inputs[b][d];
                        d_scales[d] += w * 0.5 * diff * diff / scales[d];
                    }
                }
            }
            (d_signal, d_scales)
        }
    };

    let d_mean_row = match mean {
        MeanSpec::Zero => DVector::zeros(0),
        MeanSpec::Linear { .. } => {
            DVector::from_fn(dim, |d, _| (0..n).map(|a| inputs[a][d] * alpha[a]).sum())
        }
    };

    OutputGradient {
        d_log_signal,
        d_log_scale_sq,
        d_mean_row,
    }
}

/// One output's factorized training system.
pub(crate) struct OutputSystem {
    pub factor: Cholesky<f64, Dyn>,
    pub noise: DVector<f64>,
    pub alpha: DVector<f64>,
    pub jitter: f64,
    pub log_det: f64,
    pub log_marginal: f64,
}

impl OutputSystem {
    pub(crate) fn build(
        dataset: &[DisplacementSample],
        inputs: &[TickVector],
        mean: &MeanSpec,
        kernel: &KernelSpec,
        output: usize,
    ) -> Result<OutputSystem> {
        let n = dataset.len();
        let noise = DVector::from_fn(n, |a, _| dataset[a].noise_cov[(output, output)]);
        let residual = DVector::from_fn(n, |a, _| {
            let target = dataset[a].displacement.to_vector()[output];
            target - mean.eval_output(output, &inputs[a])
        });
        let gram = kernel_matrix(kernel, output, inputs);
        let diag_scale = gram.diagonal().mean().max(f64::MIN_POSITIVE);

        let mut factor = None;
        let mut applied = 0.0;
        let mut level = 0.0;
        loop {
            let mut a = gram.clone();
            for r in 0..n {
                a[(r, r)] += noise[r] + level * diag_scale;
            }
            if let Some(chol) = Cholesky::new(a) {
                applied = level * diag_scale;
                factor = Some(chol);
                break;
            }
            level = if level == 0.0 {
                JITTER_INITIAL
            } else {
                level * JITTER_GROWTH
            };
            if level > JITTER_MAX * (1.0 + 1e-12) {
                break;
            }
        }
        let factor = factor.ok_or_else(|| {
            Error::Numerical(format!(
                "training covariance for output {output} is not positive definite even \
                 after diagonal jitter up to {JITTER_MAX} times the mean kernel diagonal; \
                 check for duplicated inputs with zero measurement noise"
            ))
        })?;

        let alpha = factor.solve(&residual);
        let log_det = {
            let l = factor.l_dirty();
            2.0 * (0..n).map(|r| l[(r, r)].ln()).sum::<f64>()
        };
        let log_marginal = -0.5 * residual.dot(&alpha)
            - 0.5 * log_det
            - 0.5 * n as f64 * (std::f64::consts::TAU).ln();
        Ok(OutputSystem {
            factor,
            noise,
            alpha,
            jitter: applied,
            log_det,
            log_marginal,
        })
    }
}

fn kernel_matrix(kernel: &KernelSpec, output: usize, inputs: &[TickVector]) -> DMatrix<f64> {
    let n = inputs.len();
    let mut gram = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let v = kernel.eval_output(output, &inputs[a], &inputs[b]);
            gram[(a, b)] = v;
            gram[(b, a)] = v;
        }
    }
    gram
}
