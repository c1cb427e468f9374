//! Trajectory and report files.
//!
//! Trajectory CSV header: `t,x0,...,x{dim-1},s,u,V,d,w_norm`. Numbers are
//! written with 17 significant digits so `f64` values round-trip exactly.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Result, SmcError};
use crate::scalar::Scalar;
use crate::simulator::{Trajectory, TrajectorySample};

pub fn format_number(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn trajectory_header(dim: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((0..dim).map(|i| format!("x{i}")));
    h.extend(["s", "u", "V", "d", "w_norm"].map(String::from));
    h
}

pub fn write_trajectory_csv<S: Scalar, W: Write>(traj: &Trajectory<S>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trajectory_header(traj.dimension()))?;
    for p in &traj.samples {
        let mut row = Vec::with_capacity(p.x.len() + 6);
        row.push(format_number(p.t.as_f64()));
        row.extend(p.x.iter().map(|v| format_number(v.as_f64())));
        for v in [p.s, p.u, p.v, p.d, p.w_norm] {
            row.push(format_number(v.as_f64()));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trajectory_file<S: Scalar>(traj: &Trajectory<S>, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| SmcError::Io(format!("{}: {e}", path.display())))?;
    write_trajectory_csv(traj, std::io::BufWriter::new(f))
}

/// Reads the sample rows back. Run metadata is not part of the CSV.
pub fn read_trajectory_samples<R: Read>(input: R) -> Result<Vec<TrajectorySample<f64>>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    let width = headers.len();
    if width < 7 {
        return Err(SmcError::Data(format!("trajectory csv needs at least 7 columns, found {width}")));
    }
    let dim = width - 6;
    let expected = trajectory_header(dim);
    if headers.iter().ne(expected.iter().map(String::as_str)) {
        return Err(SmcError::Data(format!("unexpected trajectory header: {headers:?}")));
    }
    let mut samples = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let vals = rec
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| SmcError::Data(format!("row {}: {e}", line + 1)))?;
        samples.push(TrajectorySample {
            t: vals[0],
            x: vals[1..=dim].to_vec(),
            s: vals[dim + 1],
            u: vals[dim + 2],
            v: vals[dim + 3],
            d: vals[dim + 4],
            w_norm: vals[dim + 5],
        });
    }
    Ok(samples)
}

pub fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| SmcError::Io(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| SmcError::Io(format!("{}: {e}", path.display())))
}
