//! Robust linear calibration of displacement against wheel ticks.
//!
//! Fits one weight row per displacement component by minimizing a Huber
//! loss on noise-whitened residuals, via iteratively reweighted least
//! squares. The three rows are independent problems and are solved
//! separately.

use nalgebra::{Cholesky, DMatrix, DVector, Vector3, SVD};

use crate::data::{noise_std, validate_dataset, DisplacementSample, TickVector};
use crate::error::{Error, Result};

/// Default Huber threshold on whitened residuals; the classical value
/// giving 95% efficiency under purely Gaussian noise.
pub const HUBER_DEFAULT_THRESHOLD: f64 = 1.345;

/// Iteration cap for the reweighting loop.
const MAX_ITERATIONS: usize = 100;
/// Convergence threshold on the objective-gradient norm.
const GRADIENT_TOLERANCE: f64 = 1e-10;
/// Noise standard deviations are clamped below by this to keep whitened
/// residuals finite for exactly-noiseless samples.
const MIN_NOISE_STD: f64 = 1e-12;
/// Relative singular-value cutoff for declaring the design rank-deficient.
const RANK_TOLERANCE: f64 = 1e-10;

/// Huber loss: quadratic up to `threshold`, linear beyond it.
///
/// `r^2 / 2` for `|r| <= threshold`, else `threshold (|r| - threshold/2)`;
/// value and first derivative are continuous at the joint.
pub fn huber_loss(residual: f64, threshold: f64) -> f64 {
    let a = residual.abs();
    if a <= threshold {
        0.5 * residual * residual
    } else {
        threshold * (a - 0.5 * threshold)
    }
}

/// Derivative of [`huber_loss`] in its first argument.
fn huber_influence(residual: f64, threshold: f64) -> f64 {
    residual.clamp(-threshold, threshold)
}

/// A fitted linear displacement model: `displacement = weights * ticks`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearModel {
    weights: DMatrix<f64>,
    huber_threshold: f64,
}

impl LinearModel {
    /// Reassemble a model from persisted values.
    pub fn from_parts(weights: DMatrix<f64>, huber_threshold: f64) -> Result<Self> {
        if weights.nrows() != 3 {
            return Err(Error::Dimension {
                context: "linear model weight rows",
                expected: 3,
                got: weights.nrows(),
            });
        }
        if !weights.iter().all(|w| w.is_finite()) {
            return Err(Error::InvalidArgument(
                "linear model weights must be finite".into(),
            ));
        }
        if !(huber_threshold > 0.0 && huber_threshold.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "Huber threshold must be positive and finite, got {huber_threshold}"
            )));
        }
        Ok(LinearModel {
            weights,
            huber_threshold,
        })
    }

    /// `3 x m` weight matrix.
    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn huber_threshold(&self) -> f64 {
        self.huber_threshold
    }

    pub fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    /// Predicted displacement for a tick vector.
    pub fn predict(&self, ticks: &TickVector) -> Result<Vector3<f64>> {
        if ticks.len() != self.input_dim() {
            return Err(Error::Dimension {
                context: "prediction input",
                expected: self.input_dim(),
                got: ticks.len(),
            });
        }
        let v = &self.weights * ticks;
        Ok(Vector3::new(v[0], v[1], v[2]))
    }
}

/// Diagnostics from one robust fit, indexed per output component.
#[derive(Clone, Debug, Default)]
pub struct FitReport {
    /// Reweighting iterations performed.
    pub iterations: [usize; 3],
    /// Final Huber objective on whitened residuals.
    pub objective: [f64; 3],
    /// Samples whose final whitened residual exceeds the threshold.
    pub outliers: [usize; 3],
    /// Final objective-gradient norm.
    pub gradient_norm: [f64; 3],
    /// Objective after the initial solve and after each iteration.
    pub objective_trace: [Vec<f64>; 3],
}

/// Fit a robust linear displacement model.
///
/// Each output row minimizes `sum_a huber((y_a - w . x_a) / sigma_a)` where
/// `sigma_a` is that sample's noise standard deviation for the output.
/// Starts from the weighted least-squares solution and reweights until the
/// gradient norm drops below `1e-10`, the iterate stops moving, or 100
/// iterations pass. Needs at least as many samples as tick dimensions; a
/// rank-deficient design is reported with the unidentifiable direction.
pub fn fit_linear(
    dataset: &[DisplacementSample],
    huber_threshold: f64,
) -> Result<(LinearModel, FitReport)> {
    let dim = validate_dataset(dataset)?;
    if !(huber_threshold > 0.0 && huber_threshold.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "Huber threshold must be positive and finite, got {huber_threshold}"
        )));
    }
    let n = dataset.len();
    if n < dim {
        return Err(Error::InsufficientData(format!(
            "{n} samples cannot identify {dim} weights per output"
        )));
    }

    let design = DMatrix::from_fn(n, dim, |a, d| dataset[a].ticks[d]);
    let mut weights = DMatrix::zeros(3, dim);
    let mut report = FitReport::default();

    for output in 0..3 {
        let targets = DVector::from_fn(n, |a, _| dataset[a].displacement.to_vector()[output]);
        let sigma =
            DVector::from_fn(n, |a, _| noise_std(&dataset[a])[output].max(MIN_NOISE_STD));

        // Initial iterate: weighted least squares (all Huber weights 1).
        let base_weights = sigma.map(|s| 1.0 / (s * s));
        let mut w = solve_weighted(&design, &targets, &base_weights)?;

        let objective = |w: &DVector<f64>| -> f64 {
            (0..n)
                .map(|a| {
                    let u = (targets[a] - design.row(a).transpose().dot(w)) / sigma[a];
                    huber_loss(u, huber_threshold)
                })
                .sum()
        };
        let gradient = |w: &DVector<f64>| -> DVector<f64> {
            let mut g = DVector::zeros(dim);
            for a in 0..n {
                let u = (targets[a] - design.row(a).transpose().dot(w)) / sigma[a];
                let psi = huber_influence(u, huber_threshold);
                g -= design.row(a).transpose() * (psi / sigma[a]);
            }
            g
        };

        report.objective_trace[output].push(objective(&w));
        let mut iterations = 0;
        for _ in 0..MAX_ITERATIONS {
            let grad = gradient(&w);
            if grad.norm() < GRADIENT_TOLERANCE {
                break;
            }
            let huber_weights = DVector::from_fn(n, |a, _| {
                let u = (targets[a] - design.row(a).transpose().dot(&w)) / sigma[a];
                let h = if u.abs() <= huber_threshold {
                    1.0
                } else {
                    huber_threshold / u.abs()
                };
                h * base_weights[a]
            });
            let w_next = solve_weighted(&design, &targets, &huber_weights)?;
            iterations += 1;
            report.objective_trace[output].push(objective(&w_next));
            if w_next == w {
                w = w_next;
                break;
            }
            w = w_next;
        }

        report.iterations[output] = iterations;
        report.objective[output] = objective(&w);
        report.gradient_norm[output] = gradient(&w).norm();
        report.outliers[output] = (0..n)
            .filter(|&a| {
                let u = (targets[a] - design.row(a).transpose().dot(&w)) / sigma[a];
                u.abs() > huber_threshold
            })
            .count();
        weights.row_mut(output).copy_from(&w.transpose());
    }

    Ok((
        LinearModel {
            weights,
            huber_threshold,
        },
        report,
    ))
}

/// Solve `argmin_w sum_a q_a (y_a - w . x_a)^2` by normal equations; on a
/// singular system, names the unidentifiable direction via SVD of the
/// weighted design.
fn solve_weighted(
    design: &DMatrix<f64>,
    targets: &DVector<f64>,
    row_weights: &DVector<f64>,
) -> Result<DVector<f64>> {
    let (n, dim) = design.shape();
    let mut normal = DMatrix::zeros(dim, dim);
    let mut rhs = DVector::zeros(dim);
    for a in 0..n {
        let x = design.row(a).transpose();
        normal.syger(row_weights[a], &x, &x, 1.0);
        rhs += x * (row_weights[a] * targets[a]);
    }
    // syger fills the lower triangle; mirror it.
    for r in 0..dim {
        for c in (r + 1)..dim {
            normal[(r, c)] = normal[(c, r)];
        }
    }

    if let Some(chol) = Cholesky::new(normal.clone()) {
        // Guard against a numerically semi-definite system that still
        // factorizes: check the conditioning through the factor diagonal.
        let l = chol.l_dirty();
        let (mut dmin, mut dmax) = (f64::INFINITY, 0.0f64);
        for r in 0..dim {
            dmin = dmin.min(l[(r, r)]);
            dmax = dmax.max(l[(r, r)]);
        }
        if dmin > RANK_TOLERANCE.sqrt() * dmax {
            return Ok(chol.solve(&rhs));
        }
    }

    let scaled = DMatrix::from_fn(n, dim, |a, d| row_weights[a].sqrt() * design[(a, d)]);
    let svd = SVD::new(scaled, false, true);
    let v_t = svd
        .v_t
        .as_ref()
        .expect("right singular vectors were requested");
    let mut min_idx = 0;
    for (idx, s) in svd.singular_values.iter().enumerate() {
        if *s < svd.singular_values[min_idx] {
            min_idx = idx;
        }
    }
    let null_direction: Vec<f64> = v_t.row(min_idx).iter().copied().collect();
    Err(Error::RankDeficient { null_direction })
}
