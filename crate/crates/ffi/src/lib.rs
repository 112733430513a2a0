//! C ABI for the odocal calibration library.
//!
//! Conventions:
//!
//! * Every fallible call returns an [`OdocalStatus`]; `ODOCAL_STATUS_OK`
//!   means the output parameters are valid. On failure a human-readable
//!   message is stored per thread and can be fetched with
//!   [`odocal_last_error`].
//! * Datasets and models are opaque handles created and destroyed by this
//!   library; pass them back only to these functions, and free each handle
//!   exactly once.
//! * Poses are `(x, y, theta)` triples of doubles; pose arrays are
//!   row-major `n × 3`.
//!
//! The generated header lives at `include/odocal.h`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use odocal::gp::FitOptions;
use odocal::io;
use odocal::metrics::{self, TrajectoryPair};
use odocal::pipeline::{
    integrate_trajectory, predict_displacements, train, ModelKind, TrainOptions, TrainedModel,
};
use odocal::{DisplacementSample, Error, Pose2D, TickVector};

/// Result category of an odocal call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OdocalStatus {
    /// Success; outputs are valid.
    Ok = 0,
    /// Invalid input: bad arguments, unreadable or malformed files,
    /// dimension mismatches.
    Invalid = 2,
    /// A numerical failure such as a covariance that cannot be factorized.
    Numerical = 3,
}

/// A displacement dataset loaded from CSV. Opaque.
pub struct OdocalDataset {
    samples: Vec<DisplacementSample>,
    tick_dim: usize,
}

/// A trained calibration model. Opaque.
pub struct OdocalModel {
    kind: ModelKind,
    model: TrainedModel,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let sanitized: String = message.chars().map(|c| if c == '\0' { ' ' } else { c }).collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn clear_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = CString::default());
}

fn status_of(err: &Error) -> OdocalStatus {
    match err.exit_code() {
        3 => OdocalStatus::Numerical,
        _ => OdocalStatus::Invalid,
    }
}

/// Run a closure, translating errors and panics into a status plus a
/// thread-local message.
fn guard(body: impl FnOnce() -> Result<(), Error>) -> OdocalStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            clear_error();
            OdocalStatus::Ok
        }
        Ok(Err(err)) => {
            set_error(&err.to_string());
            status_of(&err)
        }
        Err(_) => {
            set_error("internal panic");
            OdocalStatus::Numerical
        }
    }
}

fn invalid(message: impl Into<String>) -> Error {
    Error::InvalidArgument(message.into())
}

/// # Safety
/// `ptr` must be null or a valid nul-terminated string.
unsafe fn path_arg<'a>(ptr: *const c_char, name: &str) -> Result<&'a Path, Error> {
    if ptr.is_null() {
        return Err(invalid(format!("{name} must not be null")));
    }
    let text = CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| invalid(format!("{name} must be valid UTF-8")))?;
    Ok(Path::new(text))
}

unsafe fn ref_arg<'a, T>(ptr: *const T, name: &str) -> Result<&'a T, Error> {
    ptr.as_ref().ok_or_else(|| invalid(format!("{name} must not be null")))
}

unsafe fn out_arg<'a, T>(ptr: *mut T, name: &str) -> Result<&'a mut T, Error> {
    ptr.as_mut().ok_or_else(|| invalid(format!("{name} must not be null")))
}

/// Message describing the most recent failure on this thread, as a
/// nul-terminated string. Empty after a successful call. The pointer stays
/// valid until the next odocal call on the same thread.
#[no_mangle]
pub extern "C" fn odocal_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Read a displacement dataset CSV into a new handle.
///
/// On success `*out` owns the dataset; release it with
/// [`odocal_dataset_free`].
///
/// # Safety
/// `path` must be a valid nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn odocal_dataset_read_csv(
    path: *const c_char,
    out: *mut *mut OdocalDataset,
) -> OdocalStatus {
    guard(|| {
        let path = path_arg(path, "path")?;
        let out = out_arg(out, "out")?;
        let samples = io::read_dataset(path)?;
        let tick_dim = samples[0].ticks.len();
        *out = Box::into_raw(Box::new(OdocalDataset { samples, tick_dim }));
        Ok(())
    })
}

/// Release a dataset handle. Passing null is a no-op.
///
/// # Safety
/// `dataset` must be a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn odocal_dataset_free(dataset: *mut OdocalDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Number of displacement samples in the dataset; 0 for null.
///
/// # Safety
/// `dataset` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn odocal_dataset_len(dataset: *const OdocalDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.samples.len())
}

/// Number of tick columns (wheels) in the dataset; 0 for null.
///
/// # Safety
/// `dataset` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn odocal_dataset_tick_dim(dataset: *const OdocalDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.tick_dim)
}

/// Train a model on a dataset.
///
/// `kind` is one of `cgp_zero_rbf`, `cgp_lin_rbf`, `cgp_zero_lin`,
/// `cgp_zero_sum`, `cgp_lin_sum`, `linear_huber`. `seed` drives the
/// hyperparameter-search restarts. On success `*out` owns the model;
/// release it with [`odocal_model_free`].
///
/// # Safety
/// `dataset` must be a live handle, `kind` a valid nul-terminated string,
/// and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn odocal_train(
    dataset: *const OdocalDataset,
    kind: *const c_char,
    seed: u64,
    out: *mut *mut OdocalModel,
) -> OdocalStatus {
    guard(|| {
        let dataset = ref_arg(dataset, "dataset")?;
        let out = out_arg(out, "out")?;
        if kind.is_null() {
            return Err(invalid("kind must not be null"));
        }
        let kind = CStr::from_ptr(kind)
            .to_str()
            .map_err(|_| invalid("kind must be valid UTF-8"))?;
        let kind = ModelKind::parse(kind)?;
        let options = TrainOptions {
            fit: FitOptions {
                seed,
                ..FitOptions::default()
            },
            ..TrainOptions::default()
        };
        let run = train(&dataset.samples, kind, &options)?;
        *out = Box::into_raw(Box::new(OdocalModel {
            kind: run.model_kind,
            model: run.model,
        }));
        Ok(())
    })
}

/// Write a model snapshot to a JSON file.
///
/// # Safety
/// `model` must be a live handle and `path` a valid nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn odocal_model_save(
    model: *const OdocalModel,
    path: *const c_char,
) -> OdocalStatus {
    guard(|| {
        let model = ref_arg(model, "model")?;
        let path = path_arg(path, "path")?;
        io::save_model(path, model.kind, &model.model)
    })
}

/// Load a model snapshot from a JSON file into a new handle.
///
/// # Safety
/// `path` must be a valid nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn odocal_model_load(
    path: *const c_char,
    out: *mut *mut OdocalModel,
) -> OdocalStatus {
    guard(|| {
        let path = path_arg(path, "path")?;
        let out = out_arg(out, "out")?;
        let (kind, model) = io::load_model(path)?;
        *out = Box::into_raw(Box::new(OdocalModel { kind, model }));
        Ok(())
    })
}

/// Release a model handle. Passing null is a no-op.
///
/// # Safety
/// `model` must be a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn odocal_model_free(model: *mut OdocalModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// The model's kind name as a static nul-terminated string; null for null.
///
/// # Safety
/// `model` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn odocal_model_kind(model: *const OdocalModel) -> *const c_char {
    match model.as_ref() {
        None => std::ptr::null(),
        Some(handle) => match handle.kind {
            ModelKind::CgpZeroRbf => b"cgp_zero_rbf\0".as_ptr().cast(),
            ModelKind::CgpLinRbf => b"cgp_lin_rbf\0".as_ptr().cast(),
            ModelKind::CgpZeroLin => b"cgp_zero_lin\0".as_ptr().cast(),
            ModelKind::CgpZeroSum => b"cgp_zero_sum\0".as_ptr().cast(),
            ModelKind::CgpLinSum => b"cgp_lin_sum\0".as_ptr().cast(),
            ModelKind::LinearHuber => b"linear_huber\0".as_ptr().cast(),
        },
    }
}

/// Number of tick inputs the model expects; 0 for null.
///
/// # Safety
/// `model` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn odocal_model_input_dim(model: *const OdocalModel) -> usize {
    model.as_ref().map_or(0, |m| m.model.input_dim())
}

/// Predict one displacement from a tick difference vector.
///
/// Writes the predicted `(x, y, theta)` into `out_pose` and the predictive
/// variances into `out_cov_diag` (zeros for the robust linear model).
///
/// # Safety
/// `ticks` must point to `tick_dim` doubles; `out_pose` and `out_cov_diag`
/// must each point to 3 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn odocal_model_predict(
    model: *const OdocalModel,
    ticks: *const f64,
    tick_dim: usize,
    out_pose: *mut f64,
    out_cov_diag: *mut f64,
) -> OdocalStatus {
    guard(|| {
        let model = ref_arg(model, "model")?;
        if ticks.is_null() || out_pose.is_null() || out_cov_diag.is_null() {
            return Err(invalid("ticks, out_pose, and out_cov_diag must not be null"));
        }
        let ticks = std::slice::from_raw_parts(ticks, tick_dim);
        let input = TickVector::from_row_slice(ticks);
        let (pose, cov) = model.model.predict(&input)?;
        let out_pose = std::slice::from_raw_parts_mut(out_pose, 3);
        out_pose.copy_from_slice(&[pose.x, pose.y, pose.theta]);
        let out_cov = std::slice::from_raw_parts_mut(out_cov_diag, 3);
        out_cov.copy_from_slice(&[cov[(0, 0)], cov[(1, 1)], cov[(2, 2)]]);
        Ok(())
    })
}

/// Predict every displacement in a dataset and chain them from a start pose.
///
/// Writes `(len + 1) × 3` doubles into `out_poses` — the start pose followed
/// by one pose per sample. `capacity` is the number of doubles available at
/// `out_poses` and must be at least `3 * (odocal_dataset_len(dataset) + 1)`.
///
/// # Safety
/// `model` and `dataset` must be live handles; `start_pose` must point to 3
/// doubles; `out_poses` must point to `capacity` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn odocal_integrate(
    model: *const OdocalModel,
    dataset: *const OdocalDataset,
    start_pose: *const f64,
    out_poses: *mut f64,
    capacity: usize,
) -> OdocalStatus {
    guard(|| {
        let model = ref_arg(model, "model")?;
        let dataset = ref_arg(dataset, "dataset")?;
        if start_pose.is_null() || out_poses.is_null() {
            return Err(invalid("start_pose and out_poses must not be null"));
        }
        let needed = 3 * (dataset.samples.len() + 1);
        if capacity < needed {
            return Err(invalid(format!(
                "out_poses capacity {capacity} is below the required {needed} doubles"
            )));
        }
        let start = std::slice::from_raw_parts(start_pose, 3);
        let ticks: Vec<TickVector> = dataset.samples.iter().map(|s| s.ticks.clone()).collect();
        let steps = predict_displacements(&model.model, &ticks)?;
        let poses = integrate_trajectory(
            Pose2D::new(start[0], start[1], start[2]),
            steps.into_iter().map(|(pose, _)| pose),
        );
        let out = std::slice::from_raw_parts_mut(out_poses, needed);
        for (chunk, pose) in out.chunks_exact_mut(3).zip(&poses) {
            chunk.copy_from_slice(&[pose.x, pose.y, pose.theta]);
        }
        Ok(())
    })
}

unsafe fn pose_array<'a>(
    ptr: *const f64,
    n: usize,
    name: &str,
) -> Result<Vec<Pose2D>, Error> {
    if ptr.is_null() {
        return Err(invalid(format!("{name} must not be null")));
    }
    let flat = std::slice::from_raw_parts(ptr, 3 * n);
    Ok(flat
        .chunks_exact(3)
        .map(|c| Pose2D::new(c[0], c[1], c[2]))
        .collect())
}

/// Absolute trajectory error (RMS translation distance, meters) between two
/// already-corresponding pose arrays of `n` poses each.
///
/// # Safety
/// `estimated` and `reference` must each point to `n × 3` doubles; `out`
/// must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn odocal_ate(
    estimated: *const f64,
    reference: *const f64,
    n: usize,
    out: *mut f64,
) -> OdocalStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let pair = TrajectoryPair::new(
            pose_array(estimated, n, "estimated")?,
            pose_array(reference, n, "reference")?,
        )?;
        *out = metrics::ate(&pair)?;
        Ok(())
    })
}

/// Relative pose error (RMS step-displacement distance, meters) between two
/// already-corresponding pose arrays of `n` poses each; needs `n >= 2`.
///
/// # Safety
/// `estimated` and `reference` must each point to `n × 3` doubles; `out`
/// must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn odocal_rpe(
    estimated: *const f64,
    reference: *const f64,
    n: usize,
    out: *mut f64,
) -> OdocalStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let pair = TrajectoryPair::new(
            pose_array(estimated, n, "estimated")?,
            pose_array(reference, n, "reference")?,
        )?;
        *out = metrics::rpe(&pair)?;
        Ok(())
    })
}

/// Run a simulation scenario from a config file and write `truth.csv`,
/// `odometry.csv`, and `dataset.csv` into `out_dir`.
///
/// # Safety
/// `config_path` and `out_dir` must be valid nul-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn odocal_simulate_csv(
    config_path: *const c_char,
    out_dir: *const c_char,
) -> OdocalStatus {
    guard(|| {
        let config_path = path_arg(config_path, "config_path")?;
        let out_dir = path_arg(out_dir, "out_dir")?;
        let config = io::load_config(config_path)?;
        std::fs::create_dir_all(out_dir).map_err(|e| {
            invalid(format!("creating output directory {}: {e}", out_dir.display()))
        })?;
        let output = odocal::sim::simulate(&config.simulation)?;
        io::write_trajectory(&out_dir.join("truth.csv"), &output.sensor_truth)?;
        io::write_odometry(&out_dir.join("odometry.csv"), &output.odometry)?;
        io::write_dataset(&out_dir.join("dataset.csv"), &output.dataset)?;
        Ok(())
    })
}
