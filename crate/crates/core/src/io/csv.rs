//! CSV readers and writers for datasets, trajectories, and odometry logs.
//!
//! All files carry a header row, use `.` decimals and comma separators,
//! and print floats in Rust's shortest round-trip form, so reading a file
//! and writing it back reproduces it byte for byte.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DVector, Matrix3};

use crate::data::DisplacementSample;
use crate::error::{Error, Result};
use crate::pose::Pose2D;
use crate::sim::OdometryRecord;

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))
}

fn write_string(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content)
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn parse_error(path: &Path, row: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        row,
        message: message.into(),
    }
}

fn parse_f64(path: &Path, row: usize, name: &str, text: &str) -> Result<f64> {
    text.parse::<f64>()
        .map_err(|_| parse_error(path, row, format!("column {name}: invalid number {text:?}")))
}

/// Split non-empty data lines, with their 1-based line numbers.
fn data_lines(content: &str) -> impl Iterator<Item = (usize, &str)> {
    content
        .lines()
        .enumerate()
        .map(|(idx, line)| (idx + 1, line))
        .skip(1)
        .filter(|(_, line)| !line.is_empty())
}

fn dataset_header(tick_dim: usize) -> String {
    let mut header = String::from("t_j,t_k");
    for w in 1..=tick_dim {
        let _ = write!(header, ",tick_{w}");
    }
    header.push_str(",sx,sy,stheta");
    for r in 0..3 {
        for c in 0..3 {
            let _ = write!(header, ",cov_{r}{c}");
        }
    }
    header
}

/// Write a displacement dataset.
///
/// Columns: `t_j,t_k,tick_1..tick_m,sx,sy,stheta,cov_00..cov_22` with the
/// covariance in row-major order.
pub fn write_dataset(path: &Path, dataset: &[DisplacementSample]) -> Result<()> {
    let tick_dim = dataset.first().map_or(0, |s| s.ticks.len());
    let mut out = dataset_header(tick_dim);
    out.push('\n');
    for s in dataset {
        let _ = write!(out, "{},{}", s.t_start, s.t_end);
        for w in 0..s.ticks.len() {
            let _ = write!(out, ",{}", s.ticks[w]);
        }
        let _ = write!(
            out,
            ",{},{},{}",
            s.displacement.x, s.displacement.y, s.displacement.theta
        );
        for r in 0..3 {
            for c in 0..3 {
                let _ = write!(out, ",{}", s.noise_cov[(r, c)]);
            }
        }
        out.push('\n');
    }
    write_string(path, &out)
}

/// Read a displacement dataset written by [`write_dataset`]. Errors name
/// the offending line.
pub fn read_dataset(path: &Path) -> Result<Vec<DisplacementSample>> {
    let content = read_to_string(path)?;
    let header = content
        .lines()
        .next()
        .ok_or_else(|| parse_error(path, 1, "empty file"))?;
    let columns: Vec<&str> = header.split(',').collect();
    if columns.len() < 2 + 3 + 9 || columns[0] != "t_j" {
        return Err(parse_error(path, 1, "not a dataset header"));
    }
    let tick_dim = columns.len() - (2 + 3 + 9);
    if header != dataset_header(tick_dim) {
        return Err(parse_error(
            path,
            1,
            format!("unexpected header {header:?}"),
        ));
    }

    let mut dataset = Vec::new();
    for (row, line) in data_lines(&content) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() {
            return Err(parse_error(
                path,
                row,
                format!("expected {} fields, found {}", columns.len(), fields.len()),
            ));
        }
        let mut take = fields.iter().zip(&columns);
        let mut float = || -> Result<f64> {
            let (value, name) = take.next().expect("field count checked");
            parse_f64(path, row, name, value)
        };

        let t_start = float()?;
        let t_end = float()?;
        let mut ticks = DVector::zeros(tick_dim);
        for w in 0..tick_dim {
            ticks[w] = float()?;
        }
        let sx = float()?;
        let sy = float()?;
        let stheta = float()?;
        let mut cov = Matrix3::zeros();
        for r in 0..3 {
            for c in 0..3 {
                cov[(r, c)] = float()?;
            }
        }
        let sample = DisplacementSample {
            t_start,
            t_end,
            ticks,
            displacement: Pose2D::new(sx, sy, stheta),
            noise_cov: cov,
        };
        sample
            .validate()
            .map_err(|e| parse_error(path, row, e.to_string()))?;
        dataset.push(sample);
    }
    Ok(dataset)
}

/// Write a time-stamped trajectory with columns `t,x,y,theta`.
pub fn write_trajectory(path: &Path, trajectory: &[(f64, Pose2D)]) -> Result<()> {
    let mut out = String::from("t,x,y,theta\n");
    for (t, pose) in trajectory {
        let _ = writeln!(out, "{t},{},{},{}", pose.x, pose.y, pose.theta);
    }
    write_string(path, &out)
}

/// Read a trajectory written by [`write_trajectory`].
pub fn read_trajectory(path: &Path) -> Result<Vec<(f64, Pose2D)>> {
    let content = read_to_string(path)?;
    let header = content
        .lines()
        .next()
        .ok_or_else(|| parse_error(path, 1, "empty file"))?;
    if header != "t,x,y,theta" {
        return Err(parse_error(path, 1, format!("unexpected header {header:?}")));
    }
    let mut trajectory = Vec::new();
    for (row, line) in data_lines(&content) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(parse_error(
                path,
                row,
                format!("expected 4 fields, found {}", fields.len()),
            ));
        }
        let t = parse_f64(path, row, "t", fields[0])?;
        let x = parse_f64(path, row, "x", fields[1])?;
        let y = parse_f64(path, row, "y", fields[2])?;
        let theta = parse_f64(path, row, "theta", fields[3])?;
        if !(t.is_finite() && x.is_finite() && y.is_finite() && theta.is_finite()) {
            return Err(parse_error(path, row, "non-finite value"));
        }
        trajectory.push((t, Pose2D::new(x, y, theta)));
    }
    Ok(trajectory)
}

fn odometry_header(tick_dim: usize) -> String {
    let mut header = String::from("t");
    for w in 1..=tick_dim {
        let _ = write!(header, ",tick_{w}");
    }
    header
}

/// Write an odometry log: cumulative integer counters per wheel, columns
/// `t,tick_1..tick_m`.
pub fn write_odometry(path: &Path, log: &[OdometryRecord]) -> Result<()> {
    let tick_dim = log.first().map_or(0, |r| r.counters.len());
    let mut out = odometry_header(tick_dim);
    out.push('\n');
    for record in log {
        let _ = write!(out, "{}", record.t);
        for c in &record.counters {
            let _ = write!(out, ",{c}");
        }
        out.push('\n');
    }
    write_string(path, &out)
}

/// Read an odometry log written by [`write_odometry`].
pub fn read_odometry(path: &Path) -> Result<Vec<OdometryRecord>> {
    let content = read_to_string(path)?;
    let header = content
        .lines()
        .next()
        .ok_or_else(|| parse_error(path, 1, "empty file"))?;
    let columns: Vec<&str> = header.split(',').collect();
    if columns.is_empty() || columns[0] != "t" {
        return Err(parse_error(path, 1, "not an odometry header"));
    }
    let tick_dim = columns.len() - 1;
    if header != odometry_header(tick_dim) {
        return Err(parse_error(path, 1, format!("unexpected header {header:?}")));
    }
    let mut log = Vec::new();
    for (row, line) in data_lines(&content) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() {
            return Err(parse_error(
                path,
                row,
                format!("expected {} fields, found {}", columns.len(), fields.len()),
            ));
        }
        let t = parse_f64(path, row, "t", fields[0])?;
        let counters = fields[1..]
            .iter()
            .enumerate()
            .map(|(w, text)| {
                text.parse::<i64>().map_err(|_| {
                    parse_error(
                        path,
                        row,
                        format!("column tick_{}: invalid count {text:?}", w + 1),
                    )
                })
            })
            .collect::<Result<Vec<i64>>>()?;
        log.push(OdometryRecord { t, counters });
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dvector, Vector3};

    fn sample_dataset() -> Vec<DisplacementSample> {
        (0..5)
            .map(|k| DisplacementSample {
                t_start: 0.3 * k as f64,
                t_end: 0.3 * (k + 1) as f64,
                ticks: dvector![10.0 + k as f64, -3.0 * k as f64],
                displacement: Pose2D::new(0.1 * k as f64, -0.05, 0.01 * k as f64),
                noise_cov: Matrix3::from_diagonal(&Vector3::new(4e-6, 4e-6, 1.2e-5)),
            })
            .collect()
    }

    #[test]
    fn dataset_round_trips_byte_identically() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let dataset = sample_dataset();
        write_dataset(&path, &dataset).unwrap();
        let first = std::fs::read(&path).unwrap();

        let back = read_dataset(&path).unwrap();
        assert_eq!(back.len(), dataset.len());
        for (a, b) in back.iter().zip(&dataset) {
            assert_eq!(a.ticks, b.ticks);
            assert_eq!(a.displacement, b.displacement);
            assert_eq!(a.noise_cov, b.noise_cov);
        }

        write_dataset(&path, &back).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), first);
    }

    #[test]
    fn dataset_reader_names_the_bad_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let mut dataset = sample_dataset();
        dataset[2].noise_cov[(1, 1)] = -1.0; // invalid variance
        write_dataset(&path, &dataset).unwrap();
        match read_dataset(&path) {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 4), // header + 3 rows
            other => panic!("expected a parse error, got {other:?}"),
        }

        std::fs::write(&path, "t_j,t_k,tick_1,sx,sy,stheta,cov_00\n").unwrap();
        assert!(matches!(read_dataset(&path), Err(Error::Parse { row: 1, .. })));
    }

    #[test]
    fn dataset_reader_rejects_malformed_numbers_and_counts() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        write_dataset(&path, &sample_dataset()).unwrap();
        let mut content = std::fs::read_to_string(&path).unwrap();
        content = content.replacen("-0.05", "oops", 1);
        std::fs::write(&path, &content).unwrap();
        assert!(matches!(read_dataset(&path), Err(Error::Parse { row: 2, .. })));

        write_dataset(&path, &sample_dataset()).unwrap();
        let clean = std::fs::read_to_string(&path).unwrap();
        let mut lines: Vec<&str> = clean.lines().collect();
        lines[3] = "1,2,3";
        std::fs::write(&path, lines.join("\n")).unwrap();
        assert!(matches!(read_dataset(&path), Err(Error::Parse { row: 4, .. })));
    }

    #[test]
    fn trajectory_round_trips_byte_identically() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let trajectory: Vec<(f64, Pose2D)> = (0..7)
            .map(|k| {
                (
                    0.3 * k as f64,
                    Pose2D::new(k as f64 * 0.11, -k as f64 * 0.07, 0.1 * k as f64),
                )
            })
            .collect();
        write_trajectory(&path, &trajectory).unwrap();
        let first = std::fs::read(&path).unwrap();
        let back = read_trajectory(&path).unwrap();
        assert_eq!(back, trajectory);
        write_trajectory(&path, &back).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), first);
    }

    #[test]
    fn odometry_round_trips_byte_identically() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("o.csv");
        let log: Vec<OdometryRecord> = (0..9)
            .map(|k| OdometryRecord {
                t: 0.015 * k as f64,
                counters: vec![3 * k as i64, -2 * k as i64, k as i64, 0],
            })
            .collect();
        write_odometry(&path, &log).unwrap();
        let first = std::fs::read(&path).unwrap();
        let back = read_odometry(&path).unwrap();
        assert_eq!(back.len(), log.len());
        assert_eq!(back[3].counters, log[3].counters);
        write_odometry(&path, &back).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), first);
    }

    #[test]
    fn odometry_reader_rejects_fractional_counts() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("o.csv");
        std::fs::write(&path, "t,tick_1\n0,1\n0.3,2.5\n").unwrap();
        assert!(matches!(read_odometry(&path), Err(Error::Parse { row: 3, .. })));
    }

    #[test]
    fn missing_files_surface_io_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("absent.csv");
        assert!(matches!(read_dataset(&path), Err(Error::Io { .. })));
        assert!(matches!(read_trajectory(&path), Err(Error::Io { .. })));
        assert!(matches!(read_odometry(&path), Err(Error::Io { .. })));
    }
}
