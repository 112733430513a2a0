//! Independent oracles for the acceptance suite.
//!
//! Everything here recomputes results from first principles — scalar kernel
//! formulas, dense matrix inverses, closed-form regression — without going
//! through the library's factorizations, so agreement is meaningful.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use odocal::gp::{KernelSpec, MeanSpec};
use odocal::{DisplacementSample, Pose2D};

/// Small deterministic RNG (xorshift64*) so the oracle side does not share
/// the library's random plumbing.
pub struct Rng64(u64);

impl Rng64 {
    pub fn new(seed: u64) -> Self {
        Rng64(seed.wrapping_mul(2685821657736338717).max(1))
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.0 = x;
        x.wrapping_mul(0x2545_f491_4f6c_dd1d)
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal via Box–Muller.
    pub fn normal(&mut self) -> f64 {
        let u = self.uniform().max(1e-300);
        let v = self.uniform();
        (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
    }
}

/// Scalar kernel evaluation from the published formulas.
fn kernel_value(kernel: &KernelSpec, output: usize, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let dot = a.dot(b);
    let rbf = |params: &odocal::gp::RbfParams| {
        let mut quad = 0.0;
        for d in 0..a.len() {
            let diff = a[d] - b[d];
            quad += diff * diff / params.length_scale_sq[output][d];
        }
        params.signal_std[output] * params.signal_std[output] * (-0.5 * quad).exp()
    };
    match kernel {
        KernelSpec::Linear => dot,
        KernelSpec::Rbf(params) => rbf(params),
        KernelSpec::RbfPlusLinear(params) => rbf(params) + dot,
    }
}

fn mean_value(mean: &MeanSpec, output: usize, x: &DVector<f64>) -> f64 {
    match mean {
        MeanSpec::Zero => 0.0,
        MeanSpec::Linear { coeffs } => (0..x.len()).map(|d| coeffs[(output, d)] * x[d]).sum(),
    }
}

fn target(sample: &DisplacementSample, output: usize) -> f64 {
    match output {
        0 => sample.displacement.x,
        1 => sample.displacement.y,
        _ => sample.displacement.theta,
    }
}

/// Dense-inverse posterior at one probe input: `(mean, variance)` per output.
pub fn oracle_gp_predict(
    dataset: &[DisplacementSample],
    mean: &MeanSpec,
    kernel: &KernelSpec,
    probe: &DVector<f64>,
) -> (Vector3<f64>, Vector3<f64>) {
    let n = dataset.len();
    let mut out_mean = Vector3::zeros();
    let mut out_var = Vector3::zeros();
    for i in 0..3 {
        let gram = DMatrix::from_fn(n, n, |a, b| {
            let mut value = kernel_value(kernel, i, &dataset[a].ticks, &dataset[b].ticks);
            if a == b {
                value += dataset[a].noise_cov[(i, i)];
            }
            value
        });
        let inv = gram.try_inverse().expect("oracle system invertible");
        let residual =
            DVector::from_fn(n, |a, _| target(&dataset[a], i) - mean_value(mean, i, &dataset[a].ticks));
        let k_star = DVector::from_fn(n, |a, _| kernel_value(kernel, i, probe, &dataset[a].ticks));
        let weighted = &inv * &residual;
        out_mean[i] = mean_value(mean, i, probe) + k_star.dot(&weighted);
        let solved = &inv * &k_star;
        out_var[i] = kernel_value(kernel, i, probe, probe) - k_star.dot(&solved);
    }
    (out_mean, out_var)
}

/// Dense-inverse log marginal likelihood summed over the three outputs.
pub fn oracle_gp_lml(dataset: &[DisplacementSample], mean: &MeanSpec, kernel: &KernelSpec) -> f64 {
    let n = dataset.len();
    let mut total = 0.0;
    for i in 0..3 {
        let gram = DMatrix::from_fn(n, n, |a, b| {
            let mut value = kernel_value(kernel, i, &dataset[a].ticks, &dataset[b].ticks);
            if a == b {
                value += dataset[a].noise_cov[(i, i)];
            }
            value
        });
        let det = gram.determinant();
        let inv = gram.try_inverse().expect("oracle system invertible");
        let residual =
            DVector::from_fn(n, |a, _| target(&dataset[a], i) - mean_value(mean, i, &dataset[a].ticks));
        let weighted = &inv * &residual;
        total += -0.5 * residual.dot(&weighted)
            - 0.5 * det.ln()
            - 0.5 * n as f64 * (std::f64::consts::TAU).ln();
    }
    total
}

/// Closed-form Bayesian linear regression with a unit prior on the weights:
/// returns the posterior-mean prediction `x*' (X'S^-1X + I)^-1 X'S^-1 y`
/// per output, computed through the feature-space normal equations rather
/// than the kernel trick.
pub fn oracle_blr_predict(dataset: &[DisplacementSample], probe: &DVector<f64>) -> Vector3<f64> {
    let m = dataset[0].ticks.len();
    let mut out = Vector3::zeros();
    for i in 0..3 {
        let mut normal = DMatrix::<f64>::identity(m, m);
        let mut moment = DVector::<f64>::zeros(m);
        for sample in dataset {
            let precision = 1.0 / sample.noise_cov[(i, i)];
            let x = &sample.ticks;
            for r in 0..m {
                for c in 0..m {
                    normal[(r, c)] += precision * x[r] * x[c];
                }
                moment[r] += precision * x[r] * target(sample, i);
            }
        }
        let weights = normal.try_inverse().expect("oracle normal equations invertible") * moment;
        out[i] = probe.dot(&weights);
    }
    out
}

/// Sum of step translation norms along a timestamped trajectory.
pub fn path_length(trajectory: &[(f64, Pose2D)]) -> f64 {
    trajectory
        .windows(2)
        .map(|w| {
            let dx = w[1].1.x - w[0].1.x;
            let dy = w[1].1.y - w[0].1.y;
            (dx * dx + dy * dy).sqrt()
        })
        .sum()
}

/// A random displacement sample with well-conditioned noise.
pub fn random_sample(rng: &mut Rng64, k: usize, dim: usize) -> DisplacementSample {
    let ticks = DVector::from_fn(dim, |_, _| rng.range(-3.0, 3.0));
    let displacement = Pose2D::new(rng.range(-1.0, 1.0), rng.range(-1.0, 1.0), rng.range(-1.0, 1.0));
    let variances = Vector3::new(
        rng.range(0.01, 0.1),
        rng.range(0.01, 0.1),
        rng.range(0.01, 0.1),
    );
    DisplacementSample {
        t_start: k as f64,
        t_end: k as f64 + 1.0,
        ticks,
        displacement,
        noise_cov: Matrix3::from_diagonal(&variances),
    }
}
