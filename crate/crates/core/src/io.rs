//! Deterministic file formats: measure specs, grids, point clouds,
//! quantizer results, sweeps, and reports.
//!
//! Structured objects are JSON; tabular data (clouds, sweep rows) is CSV.
//! Floats in CSV are printed with 17 significant digits, which uniquely
//! identifies an f64 and so round-trips bit-exactly; JSON floats use
//! serde_json's shortest-round-trip form, which carries the same
//! guarantee. All writers are atomic (temp file + rename) and byte-stable:
//! identical values serialize to identical bytes.

use std::fs;
use std::io::{BufWriter, Write as _};
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::asympt::{SweepResult, SweepRow};
use crate::error::{Error, Result};
use crate::measure::{GridDensity, MeasureSpec};
use crate::quantize::QuantizerResult;
use crate::transport::PointCloud;

/// Exact CSV header of a sweep file.
pub const SWEEP_CSV_HEADER: &str = "n,method,p,d,error,scaled_error,seed,restarts,runtime_ms";

/// Formats a float with 17 significant digits (round-trip exact).
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x == f64::INFINITY {
        "inf".to_string()
    } else if x == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{x:.16e}")
    }
}

fn parse_float(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("{what}: not a float: {s:?}")))
}

fn parse_int<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.trim()
        .parse::<T>()
        .map_err(|_| Error::Parse(format!("{what}: not an integer: {s:?}")))
}

/// Writes bytes atomically: a temp file next to the target, then rename.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp: PathBuf = path.to_path_buf();
    let mut name = path
        .file_name()
        .ok_or_else(|| Error::Io(std::io::Error::other(format!("bad path {path:?}"))))?
        .to_os_string();
    name.push(".tmp");
    tmp.set_file_name(name);
    {
        let file = fs::File::create(&tmp)?;
        let mut w = BufWriter::new(file);
        w.write_all(bytes)?;
        w.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Serializes any value as pretty JSON (atomically, trailing newline).
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| Error::Internal(format!("JSON encoding failed: {e}")))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// Reads any JSON value.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// Reads and validates a measure spec.
pub fn read_measure_spec(path: &Path) -> Result<MeasureSpec> {
    let spec: MeasureSpec = read_json(path)?;
    spec.validate()?;
    Ok(spec)
}

// ---------------------------------------------------------------------------
// Grids

#[derive(Serialize, Deserialize)]
struct GridFile {
    d: usize,
    shape: Vec<usize>,
    origin: Vec<f64>,
    spacing: f64,
    total: f64,
    singular_cells: Vec<usize>,
    masses: Vec<f64>,
}

/// Writes a grid as JSON.
pub fn write_grid_json(path: &Path, grid: &GridDensity) -> Result<()> {
    let file = GridFile {
        d: grid.d(),
        shape: grid.shape().to_vec(),
        origin: grid.origin().to_vec(),
        spacing: grid.spacing(),
        total: grid.total(),
        singular_cells: grid.singular_cells().iter().copied().collect(),
        masses: grid.masses().to_vec(),
    };
    write_json(path, &file)
}

/// Reads a grid written by [`write_grid_json`] (validated by from_parts).
pub fn read_grid_json(path: &Path) -> Result<GridDensity> {
    let file: GridFile = read_json(path)?;
    GridDensity::from_parts(
        file.d,
        file.shape,
        file.origin,
        file.spacing,
        file.masses,
        file.total,
        file.singular_cells.into_iter().collect(),
    )
}

// ---------------------------------------------------------------------------
// Point clouds

/// Writes a cloud as CSV, one point per row (x_1,…,x_d), no header. The
/// uniform weights are not stored: readers reconstruct weight 1/n, i.e.
/// CSV clouds are probability-normalized.
pub fn write_cloud_csv(path: &Path, cloud: &PointCloud) -> Result<()> {
    let mut out = String::new();
    for point in cloud.iter_points() {
        for (k, v) in point.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            out.push_str(&fmt_float(*v));
        }
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

/// Reads a CSV cloud; d is the column count, weights are 1/n.
pub fn read_cloud_csv(path: &Path) -> Result<PointCloud> {
    let text = fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: Result<Vec<f64>> = line
            .split(',')
            .map(|f| parse_float(f, &format!("cloud row {}", ln + 1)))
            .collect();
        rows.push(row?);
    }
    if rows.is_empty() {
        return Err(Error::Parse(format!("{}: no points", path.display())));
    }
    let d = rows[0].len();
    PointCloud::new(d, &rows, 1.0 / rows.len() as f64)
}

#[derive(Serialize, Deserialize)]
struct CloudFile {
    d: usize,
    weight_each: f64,
    points: Vec<Vec<f64>>,
}

/// Writes a cloud as JSON (weights included, unlike the CSV form).
pub fn write_cloud_json(path: &Path, cloud: &PointCloud) -> Result<()> {
    let file = CloudFile {
        d: cloud.d(),
        weight_each: cloud.weight_each(),
        points: cloud.iter_points().map(|q| q.to_vec()).collect(),
    };
    write_json(path, &file)
}

/// Reads a JSON cloud.
pub fn read_cloud_json(path: &Path) -> Result<PointCloud> {
    let file: CloudFile = read_json(path)?;
    PointCloud::new(file.d, &file.points, file.weight_each)
}

// ---------------------------------------------------------------------------
// Quantizer results

#[derive(Serialize, Deserialize)]
struct QuantizerResultFile {
    method: String,
    seed: u64,
    trace: Vec<f64>,
    cost: f64,
    n: usize,
    p: f64,
}

/// Writes the scalar summary of a quantizer run (the cloud itself goes to
/// its own file).
pub fn write_quantizer_result_json(path: &Path, result: &QuantizerResult, p: f64) -> Result<()> {
    let file = QuantizerResultFile {
        method: result.method.clone(),
        seed: result.seed_used,
        trace: result.trace.clone(),
        cost: result.cost,
        n: result.cloud.n(),
        p,
    };
    write_json(path, &file)
}

// ---------------------------------------------------------------------------
// Sweeps

/// Writes a sweep as CSV with the fixed header. Failed rows keep their
/// place with error fields serialized as `nan`.
pub fn write_sweep_csv(path: &Path, sweep: &SweepResult) -> Result<()> {
    let mut out = String::with_capacity(64 * (sweep.rows.len() + 1));
    out.push_str(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in &sweep.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.n,
            r.method,
            fmt_float(r.p),
            r.d,
            fmt_float(r.error),
            fmt_float(r.scaled_error),
            r.seed,
            r.restarts,
            r.runtime_ms
        ));
    }
    write_atomic(path, out.as_bytes())
}

/// Reads a sweep CSV. The CSV carries only the row table, so `measure_id`
/// comes back empty and `grid_resolution` zero; row values round-trip
/// exactly.
pub fn read_sweep_csv(path: &Path) -> Result<SweepResult> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == SWEEP_CSV_HEADER => {}
        other => {
            return Err(Error::Parse(format!(
                "{}: bad sweep header {other:?}",
                path.display()
            )))
        }
    }
    let mut rows = Vec::new();
    for (ln, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(Error::Parse(format!(
                "{}: sweep row {} has {} fields, expected 9",
                path.display(),
                ln + 2,
                f.len()
            )));
        }
        let what = format!("sweep row {}", ln + 2);
        rows.push(SweepRow {
            n: parse_int(f[0], &what)?,
            method: f[1].to_string(),
            p: parse_float(f[2], &what)?,
            d: parse_int(f[3], &what)?,
            error: parse_float(f[4], &what)?,
            scaled_error: parse_float(f[5], &what)?,
            seed: parse_int(f[6], &what)?,
            restarts: parse_int(f[7], &what)?,
            runtime_ms: parse_int(f[8], &what)?,
            note: None,
        });
    }
    Ok(SweepResult {
        rows,
        measure_id: String::new(),
        grid_resolution: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::grid_for_spec;
    use std::collections::BTreeSet;

    fn tmp(name: &str) -> PathBuf {
        let mut p = std::env::temp_dir();
        p.push(format!("eqq-io-{}-{name}", std::process::id()));
        p
    }

    #[test]
    fn floats_round_trip_bit_exactly() {
        for &x in &[
            0.1_f64,
            -1.0 / 3.0,
            1e-300,
            2.2250738585072014e-308,
            9.999999999999999e299,
            0.0,
            -0.0,
        ] {
            let s = fmt_float(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{x} → {s} → {back}");
        }
        assert_eq!(fmt_float(f64::NAN), "nan");
        assert!(fmt_float(f64::NAN).parse::<f64>().unwrap().is_nan());
    }

    #[test]
    fn grid_json_round_trips() {
        let grid = GridDensity::from_parts(
            2,
            vec![2, 3],
            vec![0.0, -1.0],
            0.25,
            vec![0.1, 0.0, 0.2, 0.3, 0.0, 0.4],
            1.0,
            BTreeSet::from([3usize]),
        )
        .unwrap();
        let path = tmp("grid.json");
        write_grid_json(&path, &grid).unwrap();
        let back = read_grid_json(&path).unwrap();
        assert_eq!(grid, back);
        fs::remove_file(&path).unwrap();
    }

    #[test]
    fn cloud_csv_and_json_round_trip() {
        let rows = vec![vec![0.125, 0.25], vec![1.0 / 3.0, 2.0 / 3.0], vec![0.9, 0.1]];
        let cloud = PointCloud::new(2, &rows, 1.0 / 3.0).unwrap();
        let csv = tmp("cloud.csv");
        write_cloud_csv(&csv, &cloud).unwrap();
        let back = read_cloud_csv(&csv).unwrap();
        assert_eq!(back.d(), 2);
        assert_eq!(back.coords(), cloud.coords());
        assert_eq!(back.weight_each(), cloud.weight_each());
        fs::remove_file(&csv).unwrap();

        let json = tmp("cloud.json");
        write_cloud_json(&json, &cloud).unwrap();
        let back = read_cloud_json(&json).unwrap();
        assert_eq!(back.coords(), cloud.coords());
        fs::remove_file(&json).unwrap();
    }

    #[test]
    fn sweep_csv_round_trips_with_nan_rows() {
        let sweep = SweepResult {
            rows: vec![
                SweepRow {
                    n: 4,
                    method: "midpoint".into(),
                    p: 2.0,
                    d: 1,
                    error: 0.125,
                    scaled_error: 0.5,
                    seed: 7,
                    restarts: 3,
                    runtime_ms: 12,
                    note: None,
                },
                SweepRow {
                    n: 8,
                    method: "hex".into(),
                    p: 2.0,
                    d: 1,
                    error: f64::NAN,
                    scaled_error: f64::NAN,
                    seed: 7,
                    restarts: 3,
                    runtime_ms: 0,
                    note: Some("dimension mismatch".into()),
                },
            ],
            measure_id: "uniform_cube_d1".into(),
            grid_resolution: 4096,
        };
        let path = tmp("sweep.csv");
        write_sweep_csv(&path, &sweep).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(SWEEP_CSV_HEADER));
        let back = read_sweep_csv(&path).unwrap();
        assert_eq!(back.rows.len(), 2);
        assert_eq!(back.rows[0].error.to_bits(), 0.125_f64.to_bits());
        assert_eq!(back.rows[0].seed, 7);
        assert!(back.rows[1].error.is_nan());
        fs::remove_file(&path).unwrap();
    }

    #[test]
    fn writers_are_byte_deterministic() {
        let spec = MeasureSpec::UniformCube { d: 1, declared_total: 1.0 };
        let grid = grid_for_spec(&spec, 32, false).unwrap();
        let a = tmp("det-a.json");
        let b = tmp("det-b.json");
        write_grid_json(&a, &grid).unwrap();
        write_grid_json(&b, &grid).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
        fs::remove_file(&a).unwrap();
        fs::remove_file(&b).unwrap();
    }

    #[test]
    fn measure_spec_reader_validates() {
        let path = tmp("spec.json");
        fs::write(&path, r#"{"kind": "uniform_cube", "d": 0}"#).unwrap();
        assert!(read_measure_spec(&path).is_err());
        fs::write(&path, r#"{"kind": "uniform_cube", "d": 2}"#).unwrap();
        let spec = read_measure_spec(&path).unwrap();
        assert_eq!(spec.d(), 2);
        fs::remove_file(&path).unwrap();
    }
}
