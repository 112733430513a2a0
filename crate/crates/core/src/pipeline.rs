//! End-to-end calibration plumbing.
//!
//! Connects the pieces: selecting displacement edges from sensor event
//! times and an odometry log, assembling datasets, dispatching training
//! across the model kinds, batch prediction, and chaining predicted
//! displacements back into a trajectory.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::data::{DisplacementSample, TickVector};
use crate::error::{Error, Result};
use crate::gp::{
    fit_hyperparameters, FitOptions, GpModel, KernelKind, KernelSpec, MeanKind, MeanSpec,
    RbfParams,
};
use crate::linear::{fit_linear, FitReport, LinearModel, HUBER_DEFAULT_THRESHOLD};
use crate::pose::Pose2D;

/// The calibration model families. Gaussian-process variants are named by
/// mean function then kernel; `Sum` is the RBF-plus-linear kernel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelKind {
    CgpZeroRbf,
    CgpLinRbf,
    CgpZeroLin,
    CgpZeroSum,
    CgpLinSum,
    LinearHuber,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::CgpZeroRbf,
        ModelKind::CgpLinRbf,
        ModelKind::CgpZeroLin,
        ModelKind::CgpZeroSum,
        ModelKind::CgpLinSum,
        ModelKind::LinearHuber,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::CgpZeroRbf => "cgp_zero_rbf",
            ModelKind::CgpLinRbf => "cgp_lin_rbf",
            ModelKind::CgpZeroLin => "cgp_zero_lin",
            ModelKind::CgpZeroSum => "cgp_zero_sum",
            ModelKind::CgpLinSum => "cgp_lin_sum",
            ModelKind::LinearHuber => "linear_huber",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == text)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown model kind {text:?}; expected one of {}",
                    Self::ALL.map(|k| k.as_str()).join(", ")
                ))
            })
    }

    /// Mean function for Gaussian-process kinds; `None` for the robust
    /// linear fit.
    pub fn mean_kind(self) -> Option<MeanKind> {
        match self {
            ModelKind::CgpZeroRbf | ModelKind::CgpZeroLin | ModelKind::CgpZeroSum => {
                Some(MeanKind::Zero)
            }
            ModelKind::CgpLinRbf | ModelKind::CgpLinSum => Some(MeanKind::Linear),
            ModelKind::LinearHuber => None,
        }
    }

    /// Kernel for Gaussian-process kinds; `None` for the robust linear fit.
    pub fn kernel_kind(self) -> Option<KernelKind> {
        match self {
            ModelKind::CgpZeroRbf | ModelKind::CgpLinRbf => Some(KernelKind::Rbf),
            ModelKind::CgpZeroLin => Some(KernelKind::Linear),
            ModelKind::CgpZeroSum | ModelKind::CgpLinSum => Some(KernelKind::RbfPlusLinear),
        ModelKind::LinearHuber => None,
        }
    }

    pub fn is_gp(self) -> bool {
        self != ModelKind::LinearHuber
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A trained displacement model of either family.
#[derive(Clone, Debug)]
pub enum TrainedModel {
    Gp(GpModel),
    Linear(LinearModel),
}

impl TrainedModel {
    pub fn input_dim(&self) -> usize {
        match self {
            TrainedModel::Gp(m) => m.input_dim(),
            TrainedModel::Linear(m) => m.input_dim(),
        }
    }

    /// Posterior mean and covariance of the displacement for a tick
    /// vector. Linear models report zero covariance.
    pub fn predict(&self, ticks: &TickVector) -> Result<(Pose2D, Matrix3<f64>)> {
        match self {
            TrainedModel::Gp(m) => {
                let (mean, cov) = m.predict(ticks)?;
                Ok((Pose2D::new(mean[0], mean[1], mean[2]), cov))
            }
            TrainedModel::Linear(m) => {
                let mean = m.predict(ticks)?;
                Ok((Pose2D::new(mean[0], mean[1], mean[2]), Matrix3::zeros()))
            }
        }
    }
}

/// Training knobs common to all model kinds.
#[derive(Clone, Debug)]
pub struct TrainOptions {
    /// Huber threshold for the robust linear fit (and the linear-mean
    /// seed of Gaussian-process kinds).
    pub huber_threshold: f64,
    /// Marginal-likelihood search settings for kernels with a radial part.
    pub fit: FitOptions,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            huber_threshold: HUBER_DEFAULT_THRESHOLD,
            fit: FitOptions::default(),
        }
    }
}

/// A completed training run: the model plus context for reporting.
#[derive(Clone, Debug)]
pub struct CalibrationRun {
    pub model_kind: ModelKind,
    pub model: TrainedModel,
    /// Log marginal likelihood at the trained hyperparameters (GP kinds).
    pub log_marginal_likelihood: Option<f64>,
    /// Hyperparameter-search warning, if the search stalled.
    pub fit_warning: Option<String>,
    /// Ascent steps spent in the hyperparameter search (GP kinds).
    pub fit_iterations: usize,
    /// Robust-fit diagnostics (LinearHuber only).
    pub linear_report: Option<FitReport>,
    pub train_samples: usize,
    pub wall_time: Duration,
}

/// Train a model of the requested kind on a displacement dataset.
///
/// Gaussian-process kinds with a radial kernel get their hyperparameters
/// fitted by marginal-likelihood ascent, starting from data-driven scales
/// (target standard deviations and per-dimension input variances); linear
/// means are seeded from a robust linear fit when one is identifiable.
/// The pure linear-kernel kind has no kernel hyperparameters.
pub fn train(
    dataset: &[DisplacementSample],
    model_kind: ModelKind,
    options: &TrainOptions,
) -> Result<CalibrationRun> {
    let started = Instant::now();
    let run = match model_kind {
        ModelKind::LinearHuber => {
            let (model, report) = fit_linear(dataset, options.huber_threshold)?;
            CalibrationRun {
                model_kind,
                model: TrainedModel::Linear(model),
                log_marginal_likelihood: None,
                fit_warning: None,
                fit_iterations: 0,
                linear_report: Some(report),
                train_samples: dataset.len(),
                wall_time: Duration::ZERO,
            }
        }
        _ => {
            let mean = initial_mean(dataset, model_kind, options)?;
            let kernel = initial_kernel(dataset, model_kind)?;
            let outcome = fit_hyperparameters(dataset, mean, kernel, &options.fit)?;
            let model = crate::gp::train(dataset, outcome.mean, outcome.kernel)?;
            CalibrationRun {
                model_kind,
                model: TrainedModel::Gp(model),
                log_marginal_likelihood: Some(outcome.log_marginal_likelihood),
                fit_warning: outcome.warning,
                fit_iterations: outcome.iterations,
                linear_report: None,
                train_samples: dataset.len(),
                wall_time: Duration::ZERO,
            }
        }
    };
    Ok(CalibrationRun {
        wall_time: started.elapsed(),
        ..run
    })
}

/// Starting mean for a Gaussian-process kind: zero, or a linear mean
/// seeded from the robust linear fit (zeros when the linear fit cannot
/// identify the weights — the closed-form refresh inside the search
/// replaces the seed anyway).
fn initial_mean(
    dataset: &[DisplacementSample],
    model_kind: ModelKind,
    options: &TrainOptions,
) -> Result<MeanSpec> {
    let dim = dataset.first().map_or(0, |s| s.ticks.len());
    match model_kind.mean_kind() {
        Some(MeanKind::Zero) => Ok(MeanSpec::Zero),
        Some(MeanKind::Linear) => {
            let coeffs = match fit_linear(dataset, options.huber_threshold) {
                Ok((model, _)) => model.weights().clone(),
                Err(_) => DMatrix::zeros(3, dim),
            };
            MeanSpec::linear(coeffs)
        }
        None => unreachable!("GP kinds always declare a mean"),
    }
}

/// Starting kernel for a Gaussian-process kind. Radial scales come from
/// the data: per-output signal deviations from the target spread,
/// per-dimension squared length scales from the input spread.
fn initial_kernel(dataset: &[DisplacementSample], model_kind: ModelKind) -> Result<KernelSpec> {
    let kind = model_kind
        .kernel_kind()
        .expect("GP kinds always declare a kernel");
    if kind == KernelKind::Linear {
        return Ok(KernelSpec::Linear);
    }
    let n = dataset.len().max(1);
    let dim = dataset.first().map_or(0, |s| s.ticks.len());

    let mut signal_std = Vector3::zeros();
    for i in 0..3 {
        let mean = dataset
            .iter()
            .map(|s| s.displacement.to_vector()[i])
            .sum::<f64>()
            / n as f64;
        let var = dataset
            .iter()
            .map(|s| (s.displacement.to_vector()[i] - mean).powi(2))
            .sum::<f64>()
            / n as f64;
        signal_std[i] = var.sqrt().max(1e-6);
    }

    let mut scale_sq = DVector::zeros(dim);
    for d in 0..dim {
        let mean = dataset.iter().map(|s| s.ticks[d]).sum::<f64>() / n as f64;
        let var = dataset
            .iter()
            .map(|s| (s.ticks[d] - mean).powi(2))
            .sum::<f64>()
            / n as f64;
        scale_sq[d] = var.max(1e-6);
    }

    let params = RbfParams {
        signal_std,
        length_scale_sq: std::array::from_fn(|_| scale_sq.clone()),
    };
    Ok(match kind {
        KernelKind::Rbf => KernelSpec::Rbf(params),
        KernelKind::RbfPlusLinear => KernelSpec::RbfPlusLinear(params),
        KernelKind::Linear => unreachable!("handled above"),
    })
}

/// Predict displacements for a batch of tick vectors, order preserved.
pub fn predict_displacements(
    model: &TrainedModel,
    edges: &[TickVector],
) -> Result<Vec<(Pose2D, Matrix3<f64>)>> {
    edges.iter().map(|ticks| model.predict(ticks)).collect()
}

/// Chain relative displacements from a start pose. The output has one more
/// pose than there are displacements, beginning with `start`.
pub fn integrate_trajectory(
    start: Pose2D,
    displacements: impl IntoIterator<Item = Pose2D>,
) -> Vec<Pose2D> {
    let mut poses = vec![start];
    for step in displacements {
        let last = *poses.last().expect("seeded with the start pose");
        poses.push(last.compose(&step));
    }
    poses
}

/// Edge-selection settings.
#[derive(Clone, Copy, Debug)]
pub struct EdgeOptions {
    /// Base sensor sampling interval T, seconds.
    pub interval: f64,
    /// Pair every `stride`-th event: 1 pairs consecutive events, k makes
    /// edges spanning roughly `k * interval`.
    pub stride: usize,
    /// Accepted fractional deviation of an edge's duration from
    /// `stride * interval`.
    pub spacing_tolerance: f64,
}

impl EdgeOptions {
    pub fn new(interval: f64) -> Self {
        EdgeOptions {
            interval,
            stride: 1,
            spacing_tolerance: 0.1,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.interval > 0.0 && self.interval.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "edge interval must be positive, got {}",
                self.interval
            )));
        }
        if self.stride == 0 {
            return Err(Error::InvalidArgument("edge stride must be at least 1".into()));
        }
        if !(self.spacing_tolerance >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "spacing tolerance must be non-negative, got {}",
                self.spacing_tolerance
            )));
        }
        Ok(())
    }
}

/// One selected edge: an event-time pair and the tick increment between
/// the odometry readings associated to its endpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub t_start: f64,
    pub t_end: f64,
    pub ticks: TickVector,
}

/// Selected edges plus drop counters.
#[derive(Clone, Debug, Default)]
pub struct EdgeSelection {
    pub edges: Vec<Edge>,
    /// Edges discarded because an endpoint had no odometry reading within
    /// half the base interval.
    pub dropped_missing_odometry: usize,
    /// Edges discarded because their duration fell outside the spacing
    /// window.
    pub rejected_spacing: usize,
}

/// Incremental edge selection over time-sorted streams.
///
/// Readings and events may be pushed in any interleaving; selection
/// happens in [`finish`](EdgeSelector::finish), so how the logs were
/// chunked cannot influence the result. Both streams must individually be
/// strictly time-ordered.
#[derive(Clone, Debug)]
pub struct EdgeSelector {
    options: EdgeOptions,
    odometry_times: Vec<f64>,
    odometry_counters: Vec<Vec<i64>>,
    events: Vec<f64>,
}

impl EdgeSelector {
    pub fn new(options: EdgeOptions) -> Result<Self> {
        options.validate()?;
        Ok(EdgeSelector {
            options,
            odometry_times: Vec::new(),
            odometry_counters: Vec::new(),
            events: Vec::new(),
        })
    }

    pub fn push_odometry(&mut self, t: f64, counters: &[i64]) -> Result<()> {
        if let Some(last) = self.odometry_times.last() {
            if t <= *last {
                return Err(Error::InvalidArgument(format!(
                    "odometry timestamps must be strictly increasing ({last} then {t})"
                )));
            }
        }
        if let Some(first) = self.odometry_counters.first() {
            if first.len() != counters.len() {
                return Err(Error::Dimension {
                    context: "odometry counters",
                    expected: first.len(),
                    got: counters.len(),
                });
            }
        }
        self.odometry_times.push(t);
        self.odometry_counters.push(counters.to_vec());
        Ok(())
    }

    pub fn push_event(&mut self, t: f64) -> Result<()> {
        if let Some(last) = self.events.last() {
            if t <= *last {
                return Err(Error::InvalidArgument(format!(
                    "sensor event timestamps must be strictly increasing ({last} then {t})"
                )));
            }
        }
        self.events.push(t);
        Ok(())
    }

    /// Associate events with odometry and emit edges.
    pub fn finish(self) -> Result<EdgeSelection> {
        if self.odometry_times.is_empty() {
            return Err(Error::InsufficientData("empty odometry log".into()));
        }
        if self.events.is_empty() {
            return Err(Error::InsufficientData("no sensor events".into()));
        }
        let opts = &self.options;

        // Temporally closest odometry reading per event, earlier on ties;
        // readings further than half the base interval count as missing.
        let associated: Vec<Option<usize>> = self
            .events
            .iter()
            .map(|t| {
                let idx = match self
                    .odometry_times
                    .binary_search_by(|probe| probe.partial_cmp(t).expect("finite times"))
                {
                    Ok(exact) => exact,
                    Err(insertion) => {
                        if insertion == 0 {
                            0
                        } else if insertion == self.odometry_times.len() {
                            insertion - 1
                        } else {
                            let before = insertion - 1;
                            if (self.odometry_times[insertion] - t).abs()
                                < (self.odometry_times[before] - t).abs()
                            {
                                insertion
                            } else {
                                before
                            }
                        }
                    }
                };
                ((self.odometry_times[idx] - t).abs() <= opts.interval / 2.0).then_some(idx)
            })
            .collect();

        let target = opts.interval * opts.stride as f64;
        let window = opts.spacing_tolerance * target;
        let mut selection = EdgeSelection::default();
        let picked: Vec<usize> = (0..self.events.len()).step_by(opts.stride).collect();
        for pair in picked.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let duration = self.events[b] - self.events[a];
            if (duration - target).abs() > window {
                selection.rejected_spacing += 1;
                continue;
            }
            let (Some(oa), Some(ob)) = (associated[a], associated[b]) else {
                selection.dropped_missing_odometry += 1;
                continue;
            };
            let start = &self.odometry_counters[oa];
            let end = &self.odometry_counters[ob];
            let ticks = DVector::from_fn(start.len(), |w, _| (end[w] - start[w]) as f64);
            selection.edges.push(Edge {
                t_start: self.events[a],
                t_end: self.events[b],
                ticks,
            });
        }
        Ok(selection)
    }
}

/// Whole-log edge selection; see [`EdgeSelector`] for the streaming form.
pub fn select_edges(
    odometry: &[(f64, Vec<i64>)],
    sensor_event_times: &[f64],
    options: EdgeOptions,
) -> Result<EdgeSelection> {
    let mut selector = EdgeSelector::new(options)?;
    for (t, counters) in odometry {
        selector.push_odometry(*t, counters)?;
    }
    for t in sensor_event_times {
        selector.push_event(*t)?;
    }
    selector.finish()
}

/// Combine selected edges with sensor poses into a training dataset.
///
/// Each edge's endpoints must appear in `sensor_poses` (timestamps within
/// 1 microsecond); the displacement is the end pose expressed in the start
/// pose's frame, and every sample carries the given noise covariance.
pub fn assemble_dataset(
    selection: &EdgeSelection,
    sensor_poses: &[(f64, Pose2D)],
    noise_cov: Matrix3<f64>,
) -> Result<Vec<DisplacementSample>> {
    let lookup = |t: f64| -> Result<Pose2D> {
        sensor_poses
            .iter()
            .find(|(pt, _)| (pt - t).abs() <= 1e-6)
            .map(|(_, p)| *p)
            .ok_or_else(|| {
                Error::InvalidArgument(format!("no sensor pose recorded at time {t}"))
            })
    };
    selection
        .edges
        .iter()
        .map(|edge| {
            let start = lookup(edge.t_start)?;
            let end = lookup(edge.t_end)?;
            let sample = DisplacementSample {
                t_start: edge.t_start,
                t_end: edge.t_end,
                ticks: edge.ticks.clone(),
                displacement: start.relative_pose(&end),
                noise_cov,
            };
            sample.validate()?;
            Ok(sample)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn sample(ticks: TickVector, target: Vector3<f64>, noise_var: f64) -> DisplacementSample {
        DisplacementSample {
            t_start: 0.0,
            t_end: 1.0,
            ticks,
            displacement: Pose2D::new(target[0], target[1], target[2]),
            noise_cov: Matrix3::from_diagonal(&Vector3::from_element(noise_var)),
        }
    }

    fn linear_dataset(n: usize, seed: u64) -> (DMatrix<f64>, Vec<DisplacementSample>) {
        let truth = DMatrix::from_row_slice(3, 2, &[0.011, 0.009, -0.001, 0.002, -0.003, 0.003]);
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let data = (0..n)
            .map(|_| {
                let ticks = dvector![rng.gen_range(-40.0..40.0), rng.gen_range(-40.0..40.0)];
                let clean = &truth * &ticks;
                sample(ticks, Vector3::new(clean[0], clean[1], clean[2]), 1e-8)
            })
            .collect();
        (truth, data)
    }

    #[test]
    fn model_kind_strings_round_trip() {
        for kind in ModelKind::ALL {
            assert_eq!(ModelKind::parse(kind.as_str()).unwrap(), kind);
        }
        assert!(ModelKind::parse("cgp_cubic").is_err());
    }

    #[test]
    fn kind_table_matches_names() {
        assert_eq!(ModelKind::CgpLinSum.mean_kind(), Some(MeanKind::Linear));
        assert_eq!(
            ModelKind::CgpLinSum.kernel_kind(),
            Some(KernelKind::RbfPlusLinear)
        );
        assert_eq!(ModelKind::CgpZeroLin.kernel_kind(), Some(KernelKind::Linear));
        assert_eq!(ModelKind::LinearHuber.mean_kind(), None);
        assert!(!ModelKind::LinearHuber.is_gp());
    }

    #[test]
    fn linear_and_zero_lin_agree_on_clean_linear_data() {
        let (truth, data) = linear_dataset(40, 1);
        let huber = train(&data, ModelKind::LinearHuber, &TrainOptions::default()).unwrap();
        let gp = train(&data, ModelKind::CgpZeroLin, &TrainOptions::default()).unwrap();
        assert!(huber.log_marginal_likelihood.is_none());
        assert!(gp.log_marginal_likelihood.is_some());
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        for _ in 0..20 {
            let ticks = dvector![rng.gen_range(-40.0..40.0), rng.gen_range(-40.0..40.0)];
            let clean = &truth * &ticks;
            let (h, _) = huber.model.predict(&ticks).unwrap();
            let (g, cov) = gp.model.predict(&ticks).unwrap();
            assert!((h.x - clean[0]).abs() < 1e-3);
            assert!((h.x - g.x).abs() < 1e-3, "x: huber {} gp {}", h.x, g.x);
            assert!((h.y - g.y).abs() < 1e-3);
            assert!((h.theta - g.theta).abs() < 1e-3);
            assert!(cov[(0, 0)] >= 0.0);
        }
    }

    #[test]
    fn empty_dataset_is_rejected_for_every_kind() {
        for kind in ModelKind::ALL {
            assert!(matches!(
                train(&[], kind, &TrainOptions::default()),
                Err(Error::InsufficientData(_))
            ));
        }
    }

    #[test]
    fn batch_prediction_equals_single_calls() {
        let (_, data) = linear_dataset(30, 3);
        let run = train(&data, ModelKind::CgpZeroLin, &TrainOptions::default()).unwrap();
        let edges: Vec<TickVector> =
            (0..7).map(|k| dvector![k as f64 * 3.0, 10.0 - k as f64]).collect();
        let batch = predict_displacements(&run.model, &edges).unwrap();
        assert_eq!(batch.len(), edges.len());
        for (edge, (mean, cov)) in edges.iter().zip(&batch) {
            let (single_mean, single_cov) = run.model.predict(edge).unwrap();
            assert_eq!(*mean, single_mean);
            assert_eq!(*cov, single_cov);
        }
    }

    #[test]
    fn zero_ticks_predict_zero_displacement_for_linear_models() {
        let (_, data) = linear_dataset(30, 4);
        for kind in [ModelKind::LinearHuber, ModelKind::CgpZeroLin] {
            let run = train(&data, kind, &TrainOptions::default()).unwrap();
            let (mean, _) = run.model.predict(&dvector![0.0, 0.0]).unwrap();
            assert!(mean.max_abs_diff(&Pose2D::IDENTITY) < 1e-12, "{kind}");
        }
    }

    #[test]
    fn integrate_handles_empty_straight_and_square_paths() {
        assert_eq!(integrate_trajectory(Pose2D::IDENTITY, []), vec![Pose2D::IDENTITY]);

        let straight = integrate_trajectory(
            Pose2D::IDENTITY,
            std::iter::repeat(Pose2D::new(1.0, 0.0, 0.0)).take(3),
        );
        assert_eq!(straight.len(), 4);
        for (k, p) in straight.iter().enumerate() {
            assert!(p.max_abs_diff(&Pose2D::new(k as f64, 0.0, 0.0)) < 1e-12);
        }

        let square = integrate_trajectory(
            Pose2D::IDENTITY,
            std::iter::repeat(Pose2D::new(1.0, 0.0, std::f64::consts::FRAC_PI_2)).take(4),
        );
        let last = square.last().unwrap();
        assert!(last.translation_norm() < 1e-12, "loop endpoint {last}");
    }

    proptest! {
        #[test]
        fn integration_round_trips_through_relative_poses(
            steps in prop::collection::vec(
                (-1.0f64..1.0, -1.0f64..1.0, -1.5f64..1.5)
                    .prop_map(|(x, y, t)| Pose2D::new(x, y, t)),
                0..12,
            ),
            start in (-5.0f64..5.0, -5.0f64..5.0, -3.0f64..3.0)
                .prop_map(|(x, y, t)| Pose2D::new(x, y, t)),
        ) {
            let poses = integrate_trajectory(start, steps.iter().copied());
            prop_assert_eq!(poses.len(), steps.len() + 1);
            for (k, step) in steps.iter().enumerate() {
                let recovered = poses[k].relative_pose(&poses[k + 1]);
                prop_assert!(recovered.max_abs_diff(step) < 1e-12);
            }
        }
    }

    fn odometry_log(rate_hz: f64, duration: f64) -> Vec<(f64, Vec<i64>)> {
        let dt = 1.0 / rate_hz;
        let n = (duration / dt).round() as usize;
        (0..=n)
            .map(|k| {
                let t = k as f64 * dt;
                (t, vec![(t * 100.0).round() as i64, (t * 80.0).round() as i64])
            })
            .collect()
    }

    #[test]
    fn nominal_streams_yield_all_consecutive_edges() {
        let t_total = 12.0;
        let odometry = odometry_log(10.0, t_total);
        let events: Vec<f64> = (0..=40).map(|k| k as f64 * 0.3).collect();
        let selection = select_edges(&odometry, &events, EdgeOptions::new(0.3)).unwrap();
        assert_eq!(selection.edges.len(), events.len() - 1);
        assert_eq!(selection.dropped_missing_odometry, 0);
        assert_eq!(selection.rejected_spacing, 0);
        // Ticks are counter differences of the associated readings.
        let edge = &selection.edges[10];
        assert!(edge.ticks[0] != 0.0 || edge.ticks[1] != 0.0);
    }

    #[test]
    fn spacing_gaps_are_rejected() {
        let odometry = odometry_log(10.0, 20.0);
        // Drop events 5..8: the pair spanning the gap is 4*0.3 apart.
        let events: Vec<f64> = (0..=40)
            .filter(|k| !(5..8).contains(k))
            .map(|k| k as f64 * 0.3)
            .collect();
        let selection = select_edges(&odometry, &events, EdgeOptions::new(0.3)).unwrap();
        assert_eq!(selection.rejected_spacing, 1);
        assert_eq!(selection.edges.len(), events.len() - 2);
    }

    #[test]
    fn association_matches_a_brute_force_search() {
        // Odometry offset by about a quarter interval from events.
        let odometry: Vec<(f64, Vec<i64>)> = (0..200)
            .map(|k| {
                let t = k as f64 * 0.1 + 0.073;
                (t, vec![k as i64 * 3, k as i64 * 5])
            })
            .collect();
        let events: Vec<f64> = (0..50).map(|k| k as f64 * 0.3).collect();
        let selection = select_edges(&odometry, &events, EdgeOptions::new(0.3)).unwrap();

        let nearest = |t: f64| -> &Vec<i64> {
            odometry
                .iter()
                .min_by(|a, b| {
                    (a.0 - t)
                        .abs()
                        .partial_cmp(&(b.0 - t).abs())
                        .unwrap()
                        .then(a.0.partial_cmp(&b.0).unwrap())
                })
                .map(|(_, c)| c)
                .unwrap()
        };
        for edge in &selection.edges {
            let start = nearest(edge.t_start);
            let end = nearest(edge.t_end);
            for w in 0..2 {
                assert_eq!(edge.ticks[w], (end[w] - start[w]) as f64);
            }
        }
    }

    #[test]
    fn events_without_nearby_odometry_are_dropped() {
        // Odometry stops at t = 6; later events have no reading within
        // half an interval.
        let odometry = odometry_log(10.0, 6.0);
        let events: Vec<f64> = (0..=40).map(|k| k as f64 * 0.3).collect();
        let selection = select_edges(&odometry, &events, EdgeOptions::new(0.3)).unwrap();
        assert!(selection.dropped_missing_odometry > 0);
        assert_eq!(
            selection.edges.len() + selection.dropped_missing_odometry,
            events.len() - 1
        );
        assert!(selection.edges.iter().all(|e| e.t_end <= 6.2));
    }

    #[test]
    fn stride_pairs_every_kth_event() {
        let odometry = odometry_log(20.0, 30.0);
        let events: Vec<f64> = (0..=100).map(|k| k as f64 * 0.3).collect();
        let mut options = EdgeOptions::new(0.3);
        options.stride = 5;
        let selection = select_edges(&odometry, &events, options).unwrap();
        assert_eq!(selection.edges.len(), 20);
        for edge in &selection.edges {
            assert!((edge.t_end - edge.t_start - 1.5).abs() < 1e-9);
        }
    }

    #[test]
    fn chunking_cannot_change_the_selection() {
        let odometry = odometry_log(10.0, 12.0);
        let events: Vec<f64> = (0..=40).map(|k| k as f64 * 0.3).collect();
        let whole = select_edges(&odometry, &events, EdgeOptions::new(0.3)).unwrap();

        // Interleave pushes in a deliberately awkward order: all events
        // first, then odometry in two chunks.
        let mut selector = EdgeSelector::new(EdgeOptions::new(0.3)).unwrap();
        for t in &events {
            selector.push_event(*t).unwrap();
        }
        let (head, tail) = odometry.split_at(17);
        for (t, c) in head.iter().chain(tail) {
            selector.push_odometry(*t, c).unwrap();
        }
        let streamed = selector.finish().unwrap();
        assert_eq!(whole.edges, streamed.edges);
        assert_eq!(
            whole.dropped_missing_odometry,
            streamed.dropped_missing_odometry
        );
        assert_eq!(whole.rejected_spacing, streamed.rejected_spacing);
    }

    #[test]
    fn degenerate_logs_are_rejected() {
        let odometry = odometry_log(10.0, 3.0);
        assert!(matches!(
            select_edges(&odometry, &[], EdgeOptions::new(0.3)),
            Err(Error::InsufficientData(_))
        ));
        assert!(matches!(
            select_edges(&[], &[0.0, 0.3], EdgeOptions::new(0.3)),
            Err(Error::InsufficientData(_))
        ));
        let mut selector = EdgeSelector::new(EdgeOptions::new(0.3)).unwrap();
        selector.push_event(1.0).unwrap();
        assert!(selector.push_event(1.0).is_err());
        let mut selector = EdgeSelector::new(EdgeOptions::new(0.3)).unwrap();
        selector.push_odometry(1.0, &[0, 0]).unwrap();
        assert!(selector.push_odometry(0.5, &[1, 1]).is_err());
        assert!(selector.push_odometry(2.0, &[1, 1, 1]).is_err());
    }

    #[test]
    fn assembled_datasets_reproduce_relative_poses() {
        let poses: Vec<(f64, Pose2D)> = (0..5)
            .map(|k| {
                let t = k as f64 * 0.3;
                (t, Pose2D::new(0.1 * k as f64, 0.02 * k as f64, 0.05 * k as f64))
            })
            .collect();
        let selection = EdgeSelection {
            edges: (0..4)
                .map(|k| Edge {
                    t_start: k as f64 * 0.3,
                    t_end: (k + 1) as f64 * 0.3,
                    ticks: dvector![1.0, 2.0],
                })
                .collect(),
            dropped_missing_odometry: 0,
            rejected_spacing: 0,
        };
        let noise = Matrix3::from_diagonal(&Vector3::new(1e-6, 1e-6, 1e-6));
        let dataset = assemble_dataset(&selection, &poses, noise).unwrap();
        assert_eq!(dataset.len(), 4);
        for (k, sample) in dataset.iter().enumerate() {
            let expect = poses[k].1.relative_pose(&poses[k + 1].1);
            assert!(sample.displacement.max_abs_diff(&expect) < 1e-12);
        }

        let missing = EdgeSelection {
            edges: vec![Edge {
                t_start: 0.0,
                t_end: 9.9,
                ticks: dvector![1.0, 2.0],
            }],
            ..Default::default()
        };
        assert!(assemble_dataset(&missing, &poses, noise).is_err());
    }
}
