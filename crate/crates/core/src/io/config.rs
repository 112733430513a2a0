//! INI-style run configuration.
//!
//! Three sections — `[simulation]`, `[calibration]`, `[evaluation]` — with
//! flat `key = value` entries. Every key has a default, so an empty file
//! is a valid configuration; unknown sections, unknown keys, duplicate
//! keys, and malformed values are all rejected with the offending line
//! number. Lines starting with `#` or `;` are comments.
//!
//! Simulation keys (defaults in parentheses):
//! `drive` (`diff_drive` | `mecanum`), `wheel_radius` (0.05 m, all
//! wheels), `wheel_radius_N` (per-wheel override, 1-based), `half_axle`
//! (0.15 m, diff drive), `half_length` / `half_width` (0.20 / 0.15 m,
//! mecanum), `ticks_per_rev` (1024), `profile`
//! (`random_walk` | `figure_eight` | `scripted`), `interval` (drive
//! dependent: 0.3 s diff, 0.6 s mecanum), `duration` (60 s), `noise_x` /
//! `noise_y` (0.002 m), `noise_theta_deg` (0.2°), `seed` (0), `substeps`
//! (20), `sensor_x` / `sensor_y` / `sensor_theta` (0: sensor at the body
//! origin), and per-wheel deformation `scale_N` (1.0), `tilt_deg_N` (0.0),
//! `ripple_N` (0.0).
//!
//! Calibration keys: `model` (`cgp_zero_lin`; one of the kind names),
//! `huber_c` (1.345), `stride` (1), `fit_seed` (0), `fit_starts` (8),
//! `fit_max_iterations` (40).
//!
//! Evaluation keys: `out_dir` (`out`), `truth` (empty: no reference
//! trajectory configured).

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::gp::FitOptions;
use crate::linear::HUBER_DEFAULT_THRESHOLD;
use crate::pipeline::ModelKind;
use crate::pose::Pose2D;
use crate::sim::{default_interval, CommandProfile, Deformation, DriveModel, SimConfig};

/// Calibration-stage settings.
#[derive(Clone, Debug)]
pub struct CalibrationSettings {
    pub model_kind: ModelKind,
    pub huber_threshold: f64,
    /// Edge stride: pair every k-th sensor event.
    pub stride: usize,
    pub fit: FitOptions,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        CalibrationSettings {
            model_kind: ModelKind::CgpZeroLin,
            huber_threshold: HUBER_DEFAULT_THRESHOLD,
            stride: 1,
            fit: FitOptions::default(),
        }
    }
}

/// Evaluation-stage settings.
#[derive(Clone, Debug)]
pub struct EvaluationSettings {
    pub out_dir: PathBuf,
    /// Reference trajectory file; `None` when not configured.
    pub truth: Option<PathBuf>,
}

impl Default for EvaluationSettings {
    fn default() -> Self {
        EvaluationSettings {
            out_dir: PathBuf::from("out"),
            truth: None,
        }
    }
}

/// A parsed configuration file.
#[derive(Clone, Debug)]
pub struct Config {
    pub simulation: SimConfig,
    pub calibration: CalibrationSettings,
    pub evaluation: EvaluationSettings,
}

impl Default for Config {
    fn default() -> Self {
        let drive = DriveModel::diff_drive([0.05, 0.05], 0.15, 1024.0)
            .expect("default drive parameters are valid");
        Config {
            simulation: SimConfig::new(drive),
            calibration: CalibrationSettings::default(),
            evaluation: EvaluationSettings::default(),
        }
    }
}

/// Read and parse a configuration file.
pub fn load_config(path: &Path) -> Result<Config> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    parse_config(&text, &path.display().to_string())
}

/// Parse configuration text; `label` names the source in errors.
pub fn parse_config(text: &str, label: &str) -> Result<Config> {
    let entries = tokenize(text, label)?;
    build(entries, label)
}

struct Entry {
    section: Section,
    key: String,
    value: String,
    line: usize,
    used: bool,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    Simulation,
    Calibration,
    Evaluation,
}

fn config_error(label: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Config {
        path: label.to_string(),
        line,
        message: message.into(),
    }
}

fn tokenize(text: &str, label: &str) -> Result<Vec<Entry>> {
    let mut section: Option<Section> = None;
    let mut entries: Vec<Entry> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with(';') {
            continue;
        }
        if let Some(name) = trimmed.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| config_error(label, line, "unterminated section header"))?;
            section = Some(match name {
                "simulation" => Section::Simulation,
                "calibration" => Section::Calibration,
                "evaluation" => Section::Evaluation,
                other => {
                    return Err(config_error(label, line, format!("unknown section [{other}]")))
                }
            });
            continue;
        }
        let Some((key, value)) = trimmed.split_once('=') else {
            return Err(config_error(label, line, format!("expected key = value, got {trimmed:?}")));
        };
        let section = section
            .ok_or_else(|| config_error(label, line, "key appears before any [section] header"))?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if let Some(previous) = entries.iter().find(|e| e.section == section && e.key == key) {
            return Err(config_error(
                label,
                line,
                format!("duplicate key {key:?} (first set on line {})", previous.line),
            ));
        }
        entries.push(Entry {
            section,
            key,
            value,
            line,
            used: false,
        });
    }
    Ok(entries)
}

struct Entries<'a> {
    entries: Vec<Entry>,
    label: &'a str,
}

impl Entries<'_> {
    fn take(&mut self, section: Section, key: &str) -> Option<(usize, String)> {
        self.entries
            .iter_mut()
            .find(|e| e.section == section && e.key == key && !e.used)
            .map(|e| {
                e.used = true;
                (e.line, e.value.clone())
            })
    }

    fn parse<T: std::str::FromStr>(
        &mut self,
        section: Section,
        key: &str,
        default: T,
    ) -> Result<(T, usize)> {
        match self.take(section, key) {
            None => Ok((default, 0)),
            Some((line, value)) => value.parse::<T>().map(|v| (v, line)).map_err(|_| {
                config_error(self.label, line, format!("{key}: invalid value {value:?}"))
            }),
        }
    }

    fn finish(self) -> Result<()> {
        match self.entries.iter().find(|e| !e.used) {
            None => Ok(()),
            Some(entry) => Err(config_error(
                self.label,
                entry.line,
                format!("unknown key {:?}", entry.key),
            )),
        }
    }
}

/// Parse a positive float with a line-precise range message.
fn positive(label: &str, entry: (f64, usize), key: &str) -> Result<f64> {
    let (value, line) = entry;
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(config_error(label, line, format!("{key} must be positive, got {value}")))
    }
}

fn non_negative(label: &str, entry: (f64, usize), key: &str) -> Result<f64> {
    let (value, line) = entry;
    if value >= 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(config_error(
            label,
            line,
            format!("{key} must be non-negative, got {value}"),
        ))
    }
}

fn build(entries: Vec<Entry>, label: &str) -> Result<Config> {
    let mut entries = Entries { entries, label };
    let sim = Section::Simulation;

    let (drive_name, drive_line) = entries.parse(sim, "drive", "diff_drive".to_string())?;
    let wheel_count = match drive_name.as_str() {
        "diff_drive" => 2,
        "mecanum" => 4,
        other => {
            return Err(config_error(
                label,
                drive_line,
                format!("drive must be diff_drive or mecanum, got {other:?}"),
            ))
        }
    };

    let base_radius = positive(label, entries.parse(sim, "wheel_radius", 0.05)?, "wheel_radius")?;
    let mut radii = vec![base_radius; wheel_count];
    for w in 0..4usize {
        let key = format!("wheel_radius_{}", w + 1);
        if let Some((line, value)) = entries.take(sim, &key) {
            let radius = value
                .parse::<f64>()
                .map_err(|_| config_error(label, line, format!("{key}: invalid value {value:?}")))?;
            if w >= wheel_count {
                return Err(config_error(
                    label,
                    line,
                    format!("{key} does not apply to a {wheel_count}-wheel drive"),
                ));
            }
            radii[w] = positive(label, (radius, line), &key)?;
        }
    }

    let ticks_per_rev = positive(
        label,
        entries.parse(sim, "ticks_per_rev", 1024.0)?,
        "ticks_per_rev",
    )?;

    let drive = match drive_name.as_str() {
        "diff_drive" => {
            let half_axle =
                positive(label, entries.parse(sim, "half_axle", 0.15)?, "half_axle")?;
            DriveModel::diff_drive([radii[0], radii[1]], half_axle, ticks_per_rev)?
        }
        _ => {
            let half_length =
                positive(label, entries.parse(sim, "half_length", 0.20)?, "half_length")?;
            let half_width =
                positive(label, entries.parse(sim, "half_width", 0.15)?, "half_width")?;
            DriveModel::mecanum(
                [radii[0], radii[1], radii[2], radii[3]],
                half_length,
                half_width,
                ticks_per_rev,
            )?
        }
    };

    let mut deform = Deformation::none(wheel_count);
    for w in 0..4usize {
        for (prefix, slot, checker) in [
            ("scale", 0usize, positive as fn(&str, (f64, usize), &str) -> Result<f64>),
            ("tilt_deg", 1, non_negative),
            ("ripple", 2, non_negative),
        ] {
            let key = format!("{prefix}_{}", w + 1);
            if let Some((line, value)) = entries.take(sim, &key) {
                let parsed = value.parse::<f64>().map_err(|_| {
                    config_error(label, line, format!("{key}: invalid value {value:?}"))
                })?;
                if w >= wheel_count {
                    return Err(config_error(
                        label,
                        line,
                        format!("{key} does not apply to a {wheel_count}-wheel drive"),
                    ));
                }
                let checked = checker(label, (parsed, line), &key)?;
                match slot {
                    0 => deform.scale[w] = checked,
                    1 => deform.tilt_deg[w] = checked,
                    _ => deform.ripple[w] = checked,
                }
            }
        }
    }
    deform.validate(wheel_count)?;

    let (profile_name, profile_line) =
        entries.parse(sim, "profile", "random_walk".to_string())?;
    let profile = CommandProfile::parse(&profile_name).ok_or_else(|| {
        config_error(
            label,
            profile_line,
            format!("profile must be random_walk, figure_eight, or scripted, got {profile_name:?}"),
        )
    })?;

    let interval = positive(
        label,
        entries.parse(sim, "interval", default_interval(drive.geometry()))?,
        "interval",
    )?;
    let duration = positive(label, entries.parse(sim, "duration", 60.0)?, "duration")?;
    let noise_x = non_negative(label, entries.parse(sim, "noise_x", 0.002)?, "noise_x")?;
    let noise_y = non_negative(label, entries.parse(sim, "noise_y", 0.002)?, "noise_y")?;
    let noise_theta_deg = non_negative(
        label,
        entries.parse(sim, "noise_theta_deg", 0.2)?,
        "noise_theta_deg",
    )?;
    let (seed, _) = entries.parse(sim, "seed", 0u64)?;
    let (substeps, substeps_line) = entries.parse(sim, "substeps", 20usize)?;
    if substeps == 0 {
        return Err(config_error(label, substeps_line, "substeps must be at least 1"));
    }
    let (sensor_x, _) = entries.parse(sim, "sensor_x", 0.0f64)?;
    let (sensor_y, _) = entries.parse(sim, "sensor_y", 0.0f64)?;
    let (sensor_theta, _) = entries.parse(sim, "sensor_theta", 0.0f64)?;

    let mut simulation = SimConfig::new(drive);
    simulation.deform = deform;
    simulation.sensor_pose = Pose2D::new(sensor_x, sensor_y, sensor_theta);
    simulation.profile = profile;
    simulation.interval = interval;
    simulation.duration = duration;
    simulation.noise_sigma = [noise_x, noise_y, noise_theta_deg.to_radians()];
    simulation.seed = seed;
    simulation.substeps = substeps;

    let cal = Section::Calibration;
    let (model_name, model_line) =
        entries.parse(cal, "model", ModelKind::CgpZeroLin.as_str().to_string())?;
    let model_kind = ModelKind::parse(&model_name)
        .map_err(|e| config_error(label, model_line, e.to_string()))?;
    let huber_threshold =
        positive(label, entries.parse(cal, "huber_c", HUBER_DEFAULT_THRESHOLD)?, "huber_c")?;
    let (stride, stride_line) = entries.parse(cal, "stride", 1usize)?;
    if stride == 0 {
        return Err(config_error(label, stride_line, "stride must be at least 1"));
    }
    let defaults = FitOptions::default();
    let (fit_seed, _) = entries.parse(cal, "fit_seed", defaults.seed)?;
    let (fit_starts, starts_line) = entries.parse(cal, "fit_starts", defaults.starts)?;
    if fit_starts == 0 {
        return Err(config_error(label, starts_line, "fit_starts must be at least 1"));
    }
    let (fit_max_iterations, _) =
        entries.parse(cal, "fit_max_iterations", defaults.max_iterations)?;

    let eval = Section::Evaluation;
    let (out_dir, _) = entries.parse(eval, "out_dir", "out".to_string())?;
    let truth = entries
        .take(eval, "truth")
        .and_then(|(_, value)| (!value.is_empty()).then(|| PathBuf::from(value)));

    entries.finish()?;

    let config = Config {
        simulation,
        calibration: CalibrationSettings {
            model_kind,
            huber_threshold,
            stride,
            fit: FitOptions {
                seed: fit_seed,
                starts: fit_starts,
                max_iterations: fit_max_iterations,
                ..defaults
            },
        },
        evaluation: EvaluationSettings {
            out_dir: PathBuf::from(out_dir),
            truth,
        },
    };
    config.simulation.validate()?;
    Ok(config)
}
