//! JSON snapshots of trained models.
//!
//! A snapshot stores everything needed to rebuild a [`TrainedModel`]
//! without the training targets: the model kind, and either the robust
//! linear weights or the Gaussian-process parts (mean, kernel, training
//! inputs, per-sample noise variances, precomputed weight vectors, and
//! the stabilizing jitter that was applied per output). Loading
//! refactorizes the training covariance and validates that the payload
//! matches the declared kind, so a snapshot edited into an inconsistent
//! state is rejected rather than silently reinterpreted.
//!
//! The encoding is pretty-printed JSON with a trailing newline; writing a
//! freshly loaded model reproduces the file byte for byte.

use std::path::Path;

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::data::TickVector;
use crate::error::{Error, Result};
use crate::gp::{GpModel, KernelKind, KernelSpec, MeanKind, MeanSpec, RbfParams};
use crate::linear::LinearModel;
use crate::pipeline::{ModelKind, TrainedModel};

/// Snapshot schema revision this build reads and writes.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StoredModel {
    format_version: u32,
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    linear: Option<StoredLinear>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    gp: Option<StoredGp>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StoredLinear {
    /// Rows `(x, y, theta)`, one column per wheel.
    weights: Vec<Vec<f64>>,
    huber_threshold: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StoredGp {
    mean: StoredMean,
    kernel: StoredKernel,
    /// Training tick inputs, one row per sample.
    inputs: Vec<Vec<f64>>,
    /// Per-output noise variances along the training samples.
    noise_diag: Vec<Vec<f64>>,
    /// Per-output precomputed weight vectors `A^{-1}(s - mu)`.
    alpha: Vec<Vec<f64>>,
    /// Stabilizing diagonal added per output during training.
    jitter: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StoredMean {
    kind: String,
    /// Rows `(x, y, theta)`; empty for the zero mean.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    coeffs: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StoredKernel {
    kind: String,
    /// One entry per output; empty for the parameter-free linear kernel.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    signal_std: Vec<f64>,
    /// Squared length scales, one row per output; empty for linear.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    length_scale_sq: Vec<Vec<f64>>,
}

fn matrix_rows(matrix: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..matrix.nrows())
        .map(|r| matrix.row(r).iter().copied().collect())
        .collect()
}

fn rows_matrix(rows: &[Vec<f64>], context: &'static str) -> Result<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::InvalidArgument(format!(
            "{context}: rows have unequal lengths"
        )));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(DMatrix::from_row_slice(rows.len(), ncols, &flat))
}

fn mean_kind_name(kind: MeanKind) -> &'static str {
    match kind {
        MeanKind::Zero => "zero",
        MeanKind::Linear => "linear",
    }
}

fn kernel_kind_name(kind: KernelKind) -> &'static str {
    match kind {
        KernelKind::Rbf => "rbf",
        KernelKind::Linear => "linear",
        KernelKind::RbfPlusLinear => "rbf_plus_linear",
    }
}

fn encode(kind: ModelKind, model: &TrainedModel) -> Result<StoredModel> {
    let mut stored = StoredModel {
        format_version: FORMAT_VERSION,
        kind: kind.as_str().to_string(),
        linear: None,
        gp: None,
    };
    match model {
        TrainedModel::Linear(linear) => {
            if kind.is_gp() {
                return Err(Error::InvalidArgument(format!(
                    "model kind {kind} cannot store robust linear weights"
                )));
            }
            stored.linear = Some(StoredLinear {
                weights: matrix_rows(linear.weights()),
                huber_threshold: linear.huber_threshold(),
            });
        }
        TrainedModel::Gp(gp) => {
            if !kind.is_gp() {
                return Err(Error::InvalidArgument(format!(
                    "model kind {kind} cannot store a Gaussian process"
                )));
            }
            let mean = match gp.mean() {
                MeanSpec::Zero => StoredMean {
                    kind: mean_kind_name(MeanKind::Zero).into(),
                    coeffs: Vec::new(),
                },
                MeanSpec::Linear { coeffs } => StoredMean {
                    kind: mean_kind_name(MeanKind::Linear).into(),
                    coeffs: matrix_rows(coeffs),
                },
            };
            let kernel = match gp.kernel().rbf_params() {
                None => StoredKernel {
                    kind: kernel_kind_name(gp.kernel().kind()).into(),
                    signal_std: Vec::new(),
                    length_scale_sq: Vec::new(),
                },
                Some(params) => StoredKernel {
                    kind: kernel_kind_name(gp.kernel().kind()).into(),
                    signal_std: params.signal_std.iter().copied().collect(),
                    length_scale_sq: params
                        .length_scale_sq
                        .iter()
                        .map(|row| row.iter().copied().collect())
                        .collect(),
                },
            };
            stored.gp = Some(StoredGp {
                mean,
                kernel,
                inputs: gp.inputs().iter().map(|x| x.iter().copied().collect()).collect(),
                noise_diag: gp.noise_diag().iter().map(|v| v.iter().copied().collect()).collect(),
                alpha: gp.alpha().iter().map(|v| v.iter().copied().collect()).collect(),
                jitter: gp.jitter().to_vec(),
            });
        }
    }
    Ok(stored)
}

fn decode(stored: StoredModel) -> Result<(ModelKind, TrainedModel)> {
    if stored.format_version != FORMAT_VERSION {
        return Err(Error::InvalidArgument(format!(
            "unsupported model format version {}, this build reads {FORMAT_VERSION}",
            stored.format_version
        )));
    }
    let kind = ModelKind::parse(&stored.kind)?;
    match (kind.is_gp(), stored.linear, stored.gp) {
        (false, Some(linear), None) => {
            let weights = rows_matrix(&linear.weights, "linear weights")?;
            let model = LinearModel::from_parts(weights, linear.huber_threshold)?;
            Ok((kind, TrainedModel::Linear(model)))
        }
        (true, None, Some(gp)) => {
            let model = decode_gp(kind, gp)?;
            Ok((kind, TrainedModel::Gp(model)))
        }
        _ => Err(Error::InvalidArgument(format!(
            "model kind {kind} does not match the stored payload"
        ))),
    }
}

fn decode_gp(kind: ModelKind, stored: StoredGp) -> Result<GpModel> {
    let expected_mean = kind.mean_kind().expect("GP kinds declare a mean");
    let expected_kernel = kind.kernel_kind().expect("GP kinds declare a kernel");
    if stored.mean.kind != mean_kind_name(expected_mean) {
        return Err(Error::InvalidArgument(format!(
            "model kind {kind} expects a {} mean, stored file has {:?}",
            mean_kind_name(expected_mean),
            stored.mean.kind
        )));
    }
    if stored.kernel.kind != kernel_kind_name(expected_kernel) {
        return Err(Error::InvalidArgument(format!(
            "model kind {kind} expects a {} kernel, stored file has {:?}",
            kernel_kind_name(expected_kernel),
            stored.kernel.kind
        )));
    }

    let mean = match expected_mean {
        MeanKind::Zero => MeanSpec::Zero,
        MeanKind::Linear => MeanSpec::linear(rows_matrix(&stored.mean.coeffs, "mean coefficients")?)?,
    };
    let kernel = match expected_kernel {
        KernelKind::Linear => KernelSpec::Linear,
        radial => {
            if stored.kernel.signal_std.len() != 3 || stored.kernel.length_scale_sq.len() != 3 {
                return Err(Error::Dimension {
                    context: "stored kernel outputs",
                    expected: 3,
                    got: stored
                        .kernel
                        .signal_std
                        .len()
                        .min(stored.kernel.length_scale_sq.len()),
                });
            }
            let params = RbfParams {
                signal_std: Vector3::from_iterator(stored.kernel.signal_std.iter().copied()),
                length_scale_sq: std::array::from_fn(|i| {
                    DVector::from_vec(stored.kernel.length_scale_sq[i].clone())
                }),
            };
            match radial {
                KernelKind::Rbf => KernelSpec::Rbf(params),
                _ => KernelSpec::RbfPlusLinear(params),
            }
        }
    };

    let inputs: Vec<TickVector> = stored
        .inputs
        .iter()
        .map(|row| DVector::from_vec(row.clone()))
        .collect();
    let per_output = |rows: &[Vec<f64>], name: &'static str| -> Result<[DVector<f64>; 3]> {
        if rows.len() != 3 {
            return Err(Error::Dimension {
                context: name,
                expected: 3,
                got: rows.len(),
            });
        }
        Ok(std::array::from_fn(|i| DVector::from_vec(rows[i].clone())))
    };
    let noise_diag = per_output(&stored.noise_diag, "stored noise variances")?;
    let alpha = per_output(&stored.alpha, "stored weight vectors")?;
    if stored.jitter.len() != 3 {
        return Err(Error::Dimension {
            context: "stored jitter",
            expected: 3,
            got: stored.jitter.len(),
        });
    }
    let jitter: [f64; 3] = [stored.jitter[0], stored.jitter[1], stored.jitter[2]];
    GpModel::from_parts(mean, kernel, inputs, noise_diag, alpha, jitter)
}

/// Serialize a trained model to pretty-printed JSON (with trailing newline).
pub fn model_to_json(kind: ModelKind, model: &TrainedModel) -> Result<String> {
    let stored = encode(kind, model)?;
    let mut text = serde_json::to_string_pretty(&stored)
        .map_err(|e| Error::InvalidArgument(format!("model serialization failed: {e}")))?;
    text.push('\n');
    Ok(text)
}

/// Rebuild a trained model from JSON produced by [`model_to_json`].
pub fn model_from_json(text: &str, label: &str) -> Result<(ModelKind, TrainedModel)> {
    let stored: StoredModel = serde_json::from_str(text).map_err(|e| Error::Parse {
        path: label.to_string(),
        row: e.line(),
        message: e.to_string(),
    })?;
    decode(stored)
}

/// Write a model snapshot to disk.
pub fn save_model(path: &Path, kind: ModelKind, model: &TrainedModel) -> Result<()> {
    let text = model_to_json(kind, model)?;
    std::fs::write(path, text)
        .map_err(|e| Error::io(format!("writing model {}", path.display()), e))
}

/// Load a model snapshot from disk.
pub fn load_model(path: &Path) -> Result<(ModelKind, TrainedModel)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading model {}", path.display()), e))?;
    model_from_json(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DisplacementSample;
    use crate::pipeline::{train, TrainOptions};
    use crate::pose::Pose2D;
    use nalgebra::{dvector, Matrix3};

    fn tiny_dataset() -> Vec<DisplacementSample> {
        let cov = Matrix3::from_diagonal(&nalgebra::Vector3::new(1e-4, 1e-4, 1e-5));
        (0..6)
            .map(|k| {
                let a = k as f64 * 0.7 - 2.0;
                let b = (k as f64 * 1.3).sin();
                DisplacementSample {
                    t_start: k as f64,
                    t_end: k as f64 + 1.0,
                    ticks: dvector![a, b],
                    displacement: Pose2D::new(0.02 * (a + b), 0.01 * (a - b), 0.005 * b),
                    noise_cov: cov,
                }
            })
            .collect()
    }

    fn probe() -> TickVector {
        dvector![0.4, -1.1]
    }

    #[test]
    fn gp_round_trip_is_byte_identical_and_predicts_identically() {
        let dataset = tiny_dataset();
        for kind in [ModelKind::CgpZeroRbf, ModelKind::CgpLinSum, ModelKind::CgpZeroLin] {
            let run = train(&dataset, kind, &TrainOptions::default()).unwrap();
            let json = model_to_json(kind, &run.model).unwrap();
            let (kind_back, model_back) = model_from_json(&json, "test").unwrap();
            assert_eq!(kind_back, kind);
            assert_eq!(model_to_json(kind_back, &model_back).unwrap(), json);

            let (mean_a, cov_a) = run.model.predict(&probe()).unwrap();
            let (mean_b, cov_b) = model_back.predict(&probe()).unwrap();
            assert_eq!(mean_a, mean_b);
            assert_eq!(cov_a, cov_b);
        }
    }

    #[test]
    fn linear_round_trip_is_byte_identical() {
        let dataset = tiny_dataset();
        let run = train(&dataset, ModelKind::LinearHuber, &TrainOptions::default()).unwrap();
        let json = model_to_json(ModelKind::LinearHuber, &run.model).unwrap();
        let (kind_back, model_back) = model_from_json(&json, "test").unwrap();
        assert_eq!(kind_back, ModelKind::LinearHuber);
        assert_eq!(model_to_json(kind_back, &model_back).unwrap(), json);
        let (mean_a, _) = run.model.predict(&probe()).unwrap();
        let (mean_b, _) = model_back.predict(&probe()).unwrap();
        assert_eq!(mean_a, mean_b);
    }

    #[test]
    fn save_and_load_round_trip_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let dataset = tiny_dataset();
        let run = train(&dataset, ModelKind::CgpZeroSum, &TrainOptions::default()).unwrap();
        save_model(&path, ModelKind::CgpZeroSum, &run.model).unwrap();
        let (kind, model) = load_model(&path).unwrap();
        assert_eq!(kind, ModelKind::CgpZeroSum);
        let (mean_a, _) = run.model.predict(&probe()).unwrap();
        let (mean_b, _) = model.predict(&probe()).unwrap();
        assert_eq!(mean_a, mean_b);
    }

    #[test]
    fn mismatched_kind_and_payload_are_rejected() {
        let dataset = tiny_dataset();
        let run = train(&dataset, ModelKind::LinearHuber, &TrainOptions::default()).unwrap();
        let json = model_to_json(ModelKind::LinearHuber, &run.model).unwrap();

        // Claiming a GP kind over a linear payload must fail.
        let tampered = json.replace("linear_huber", "cgp_zero_lin");
        assert!(model_from_json(&tampered, "test").is_err());

        // Unknown fields and versions are rejected too.
        let unknown = json.replace("\"format_version\": 1", "\"format_version\": 1, \"extra\": 0");
        assert!(model_from_json(&unknown, "test").is_err());
        let version = json.replace("\"format_version\": 1", "\"format_version\": 99");
        assert!(model_from_json(&version, "test").is_err());

        // A GP payload whose stored mean kind contradicts the model kind.
        let gp_run = train(&dataset, ModelKind::CgpLinRbf, &TrainOptions::default()).unwrap();
        let gp_json = model_to_json(ModelKind::CgpLinRbf, &gp_run.model).unwrap();
        let tampered = gp_json.replace("cgp_lin_rbf", "cgp_zero_rbf");
        assert!(model_from_json(&tampered, "test").is_err());
    }

    #[test]
    fn malformed_json_names_the_line() {
        match model_from_json("{\n  \"format_version\": oops\n}", "bad.json") {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 2),
            other => panic!("expected a parse error, got {other:?}"),
        }
    }
}
