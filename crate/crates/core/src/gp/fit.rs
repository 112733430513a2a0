//! Hyperparameter fitting by marginal-likelihood ascent.
//!
//! Each output's kernel hyperparameters are tuned independently (the
//! outputs are independent processes) with gradient ascent in log space
//! and Armijo backtracking. A linear mean is never stepped directly:
//! for fixed kernel parameters its coefficient row has a closed-form
//! generalized-least-squares optimum, which is substituted on every
//! evaluation. Random restarts guard against bad local maxima; everything
//! is driven by a seeded generator so results are reproducible.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::data::{validate_dataset, DisplacementSample, TickVector};
use crate::error::{Error, Result};

use super::kernel::KernelSpec;
use super::mean::{MeanKind, MeanSpec};
use super::model::{output_gradient, OutputGradient, OutputSystem};

/// Search bounds, in natural log of the parameter.
const LOG_SIGNAL_MIN: f64 = -18.420680743952367; // ln 1e-8
const LOG_SIGNAL_MAX: f64 = 18.420680743952367; // ln 1e8
const LOG_SCALE_SQ_MIN: f64 = -27.631021115928547; // ln 1e-12
const LOG_SCALE_SQ_MAX: f64 = 27.631021115928547; // ln 1e12

/// Armijo sufficient-increase coefficient.
const ARMIJO_C: f64 = 1e-4;
/// Backtracking halts once the step shrinks below this.
const MIN_STEP: f64 = 1e-6;
/// Restart perturbations multiply each parameter by 10^U(-1, 1).
const PERTURB_DECADES: f64 = 1.0;

/// Knobs for the marginal-likelihood search.
#[derive(Clone, Debug)]
pub struct FitOptions {
    /// Seed for the restart perturbations.
    pub seed: u64,
    /// Number of starts per output, including the unperturbed one.
    pub starts: usize,
    /// Maximum accepted ascent steps per start.
    pub max_iterations: usize,
    /// Ascent stops once the gradient norm falls below this.
    pub gradient_tolerance: f64,
    /// Initial Armijo step length in log space.
    pub initial_step: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            seed: 0,
            starts: 8,
            max_iterations: 40,
            gradient_tolerance: 1e-5,
            initial_step: 0.3,
        }
    }
}

impl FitOptions {
    fn validate(&self) -> Result<()> {
        if self.starts == 0 {
            return Err(Error::InvalidArgument(
                "hyperparameter fitting needs at least one start".into(),
            ));
        }
        if !(self.gradient_tolerance > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "gradient tolerance must be positive, got {}",
                self.gradient_tolerance
            )));
        }
        if !(self.initial_step > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "initial step must be positive, got {}",
                self.initial_step
            )));
        }
        Ok(())
    }
}

/// Result of a hyperparameter search.
#[derive(Clone, Debug)]
pub struct FitOutcome {
    pub mean: MeanSpec,
    pub kernel: KernelSpec,
    /// Log marginal likelihood at the returned parameters.
    pub log_marginal_likelihood: f64,
    /// Accepted ascent steps, summed over outputs and restarts.
    pub iterations: usize,
    /// Set when no restart improved on the initial parameters.
    pub warning: Option<String>,
}

/// Tune kernel hyperparameters (and a linear mean, if present) by
/// maximizing the log marginal likelihood of the dataset.
///
/// Kernels without a radial part have nothing to search: the specs come
/// back unchanged except that a linear mean is replaced by its
/// generalized-least-squares optimum.
pub fn fit_hyperparameters(
    dataset: &[DisplacementSample],
    mean: MeanSpec,
    kernel: KernelSpec,
    options: &FitOptions,
) -> Result<FitOutcome> {
    options.validate()?;
    let dim = validate_dataset(dataset)?;
    mean.validate(dim)?;
    kernel.validate(dim)?;

    let evaluator = Evaluator::new(dataset);

    if kernel.rbf_params().is_none() {
        let mut mean = mean;
        let mut total = 0.0;
        for output in 0..3 {
            let (lml, _) = evaluator.eval(&mut mean, &kernel, output)?;
            total += lml;
        }
        return Ok(FitOutcome {
            mean,
            kernel,
            log_marginal_likelihood: total,
            iterations: 0,
            warning: None,
        });
    }

    let mut rng = ChaCha12Rng::seed_from_u64(options.seed);
    let mut best_mean = mean.clone();
    let mut best_kernel = kernel.clone();
    let mut total_initial = 0.0;
    let mut total_best = 0.0;
    let mut iterations = 0;

    for output in 0..3 {
        let z_init = read_params(&kernel, output);
        let mut best: Option<(f64, DVector<f64>, MeanSpec)> = None;
        for start in 0..options.starts {
            let z_start = if start == 0 {
                z_init.clone()
            } else {
                perturb(&z_init, &mut rng)
            };
            let mut mean_state = mean.clone();
            let mut kernel_state = kernel.clone();
            write_params(&mut kernel_state, output, &z_start);
            let climbed = match climb(
                &evaluator,
                &mut mean_state,
                &mut kernel_state,
                output,
                z_start,
                options,
            ) {
                Ok(c) => c,
                // A start that lands on an indefinite system is abandoned,
                // not fatal; the unperturbed start still propagates errors
                // through the outcome below.
                Err(err) if start > 0 => {
                    let _ = err;
                    continue;
                }
                Err(err) => return Err(err),
            };
            iterations += climbed.iterations;
            if start == 0 {
                total_initial += climbed.initial_lml;
            }
            if best.as_ref().map_or(true, |(lml, _, _)| climbed.lml > *lml) {
                best = Some((climbed.lml, climbed.z, mean_state));
            }
        }
        let (lml, z, mean_state) =
            best.expect("the unperturbed start always yields a candidate");
        total_best += lml;
        write_params(&mut best_kernel, output, &z);
        if let MeanSpec::Linear { coeffs } = &mean_state {
            best_mean.set_linear_row(output, &coeffs.row(output).transpose());
        }
    }

    let warning = if total_best <= total_initial + 1e-12 {
        Some(
            "marginal-likelihood search found no improvement over the initial \
             hyperparameters"
                .to_string(),
        )
    } else {
        None
    };

    Ok(FitOutcome {
        mean: best_mean,
        kernel: best_kernel,
        log_marginal_likelihood: total_best,
        iterations,
        warning,
    })
}

struct Climbed {
    lml: f64,
    initial_lml: f64,
    z: DVector<f64>,
    iterations: usize,
}

/// Gradient ascent with backtracking for one output, one start. The mean
/// state is updated in place (its optimal row depends on the kernel).
fn climb(
    evaluator: &Evaluator<'_>,
    mean: &mut MeanSpec,
    kernel: &mut KernelSpec,
    output: usize,
    mut z: DVector<f64>,
    options: &FitOptions,
) -> Result<Climbed> {
    let (mut lml, mut grad) = evaluator.eval(mean, kernel, output)?;
    let initial_lml = lml;
    let mut iterations = 0;

    for _ in 0..options.max_iterations {
        let g = gradient_vector(&grad);
        if g.norm() < options.gradient_tolerance {
            break;
        }
        let mut step = options.initial_step;
        let mut accepted = false;
        while step >= MIN_STEP {
            let z_trial = clamp_params(&(&z + &g * step));
            let mut mean_trial = mean.clone();
            let mut kernel_trial = kernel.clone();
            write_params(&mut kernel_trial, output, &z_trial);
            match evaluator.eval(&mut mean_trial, &kernel_trial, output) {
                Ok((lml_trial, grad_trial))
                    if lml_trial.is_finite()
                        && lml_trial >= lml + ARMIJO_C * g.dot(&(&z_trial - &z)) =>
                {
                    z = z_trial;
                    *mean = mean_trial;
                    *kernel = kernel_trial;
                    lml = lml_trial;
                    grad = grad_trial;
                    accepted = true;
                    iterations += 1;
                    break;
                }
                _ => step *= 0.5,
            }
        }
        if !accepted {
            break;
        }
    }

    Ok(Climbed {
        lml,
        initial_lml,
        z,
        iterations,
    })
}

/// Log-space view of one output's kernel parameters:
/// `[log signal_std, log length_scale_sq...]`.
fn read_params(kernel: &KernelSpec, output: usize) -> DVector<f64> {
    let params = kernel.rbf_params().expect("radial part present");
    let scales = &params.length_scale_sq[output];
    let mut z = DVector::zeros(1 + scales.len());
    z[0] = params.signal_std[output].ln();
    for d in 0..scales.len() {
        z[1 + d] = scales[d].ln();
    }
    z
}

fn write_params(kernel: &mut KernelSpec, output: usize, z: &DVector<f64>) {
    let params = kernel.rbf_params_mut().expect("radial part present");
    params.signal_std[output] = z[0].exp();
    let scales = &mut params.length_scale_sq[output];
    for d in 0..scales.len() {
        scales[d] = z[1 + d].exp();
    }
}

fn clamp_params(z: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(z.len(), |idx, _| {
        if idx == 0 {
            z[idx].clamp(LOG_SIGNAL_MIN, LOG_SIGNAL_MAX)
        } else {
            z[idx].clamp(LOG_SCALE_SQ_MIN, LOG_SCALE_SQ_MAX)
        }
    })
}

fn perturb(z: &DVector<f64>, rng: &mut ChaCha12Rng) -> DVector<f64> {
    let decade = std::f64::consts::LN_10 * PERTURB_DECADES;
    clamp_params(&DVector::from_fn(z.len(), |idx, _| {
        z[idx] + rng.gen_range(-decade..decade)
    }))
}

fn gradient_vector(grad: &OutputGradient) -> DVector<f64> {
    let mut g = DVector::zeros(1 + grad.d_log_scale_sq.len());
    g[0] = grad.d_log_signal;
    for d in 0..grad.d_log_scale_sq.len() {
        g[1 + d] = grad.d_log_scale_sq[d];
    }
    g
}

/// Shared per-dataset quantities for repeated objective evaluations.
struct Evaluator<'a> {
    dataset: &'a [DisplacementSample],
    inputs: Vec<TickVector>,
    design: DMatrix<f64>,
    targets: [DVector<f64>; 3],
}

impl<'a> Evaluator<'a> {
    fn new(dataset: &'a [DisplacementSample]) -> Self {
        let n = dataset.len();
        let dim = dataset.first().map_or(0, |s| s.ticks.len());
        let inputs: Vec<TickVector> = dataset.iter().map(|s| s.ticks.clone()).collect();
        let design = DMatrix::from_fn(n, dim, |a, d| inputs[a][d]);
        let targets = std::array::from_fn(|i| {
            DVector::from_fn(n, |a, _| dataset[a].displacement.to_vector()[i])
        });
        Evaluator {
            dataset,
            inputs,
            design,
            targets,
        }
    }

    /// One output's log marginal likelihood and gradient at the given
    /// kernel parameters. A linear mean's row is first replaced by its
    /// generalized-least-squares optimum for those parameters — the train
    /// covariance factor does not depend on the mean, so this costs no
    /// extra factorization. Singular normal equations leave the row as-is.
    fn eval(
        &self,
        mean: &mut MeanSpec,
        kernel: &KernelSpec,
        output: usize,
    ) -> Result<(f64, OutputGradient)> {
        let mut system = OutputSystem::build(self.dataset, &self.inputs, mean, kernel, output)?;
        if mean.kind() == MeanKind::Linear {
            let solved_design = system.factor.solve(&self.design);
            let normal = self.design.transpose() * &solved_design;
            if let Some(chol) = Cholesky::new(normal) {
                let rhs = solved_design.transpose() * &self.targets[output];
                let row = chol.solve(&rhs);
                mean.set_linear_row(output, &row);
                let residual = &self.targets[output] - &self.design * &row;
                let alpha = system.factor.solve(&residual);
                let n = residual.len() as f64;
                system.log_marginal = -0.5 * residual.dot(&alpha)
                    - 0.5 * system.log_det
                    - 0.5 * n * std::f64::consts::TAU.ln();
                system.alpha = alpha;
            }
        }
        let grad = output_gradient(&self.inputs, mean, kernel, output, &system);
        Ok((system.log_marginal, grad))
    }
}
