//! Snapshot CSV and JSON report serialization.
//!
//! `snapshots.csv` has the header `t,j,x,rho,u,r`. Each output time is a block
//! of rows `j = 0..=N` followed by one ghost row `j = N+1` with an empty `rho`
//! that carries the ghost velocity and the free-boundary radius. Numbers use
//! the shortest decimal form that parses back to the same value.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use vacuum_ns::reconstruct::Snapshot;

pub const HEADER: [&str; 6] = ["t", "j", "x", "rho", "u", "r"];

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("row {row}, column `{column}`: {message}")]
    Schema {
        row: usize,
        column: &'static str,
        message: String,
    },
}

/// Shortest round-trip decimal representation.
pub fn number(v: f64) -> String {
    format!("{v:?}")
}

pub fn write_snapshots<W: Write>(out: W, snapshots: &[Snapshot]) -> Result<(), OutputError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for snap in snapshots {
        let cells = snap.cells();
        let t = number(snap.t);
        for j in 0..=cells + 1 {
            let ghost = j == cells + 1;
            w.write_record([
                t.clone(),
                j.to_string(),
                number(j as f64 * snap.h),
                if ghost {
                    String::new()
                } else {
                    number(snap.rho[j])
                },
                number(snap.velocity(j)),
                number(snap.r[j]),
            ])?;
        }
    }
    w.flush().map_err(|source| OutputError::Io {
        path: "snapshots".into(),
        source,
    })?;
    Ok(())
}

fn schema(row: usize, column: &'static str, message: impl Into<String>) -> OutputError {
    OutputError::Schema {
        row,
        column,
        message: message.into(),
    }
}

struct Block {
    t: f64,
    first_row: usize,
    rho: Vec<f64>,
    u: Vec<f64>,
    r: Vec<f64>,
    ghost: Option<f64>,
}

/// Rebuilds snapshots from CSV text. Row numbers in errors count the header
/// as row 1.
pub fn read_snapshots<R: Read>(input: R, dim: u32) -> Result<Vec<Snapshot>, OutputError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let header = reader.headers()?.clone();
    if header.iter().ne(HEADER.iter().copied()) {
        return Err(schema(
            1,
            "t",
            format!("header must be `{}`", HEADER.join(",")),
        ));
    }
    let mut blocks: Vec<Block> = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let row = k + 2;
        let record = record?;
        if record.len() != HEADER.len() {
            return Err(schema(
                row,
                "t",
                format!("expected {} fields, found {}", HEADER.len(), record.len()),
            ));
        }
        let real = |idx: usize, column: &'static str| -> Result<f64, OutputError> {
            let v: f64 = record[idx]
                .parse()
                .map_err(|_| schema(row, column, format!("`{}` is not a number", &record[idx])))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(schema(row, column, "value is not finite"))
            }
        };
        let t = real(0, "t")?;
        let j: usize = record[1]
            .parse()
            .map_err(|_| schema(row, "j", format!("`{}` is not an index", &record[1])))?;
        let (u, r) = (real(4, "u")?, real(5, "r")?);

        if j == 0 {
            if let Some(prev) = blocks.last() {
                if prev.ghost.is_none() {
                    return Err(schema(
                        row,
                        "j",
                        format!("block at t={} has no ghost row", prev.t),
                    ));
                }
                if t <= prev.t {
                    return Err(schema(row, "t", "times must be strictly increasing"));
                }
            }
            blocks.push(Block {
                t,
                first_row: row,
                rho: Vec::new(),
                u: Vec::new(),
                r: Vec::new(),
                ghost: None,
            });
        }
        let Some(block) = blocks.last_mut() else {
            return Err(schema(row, "j", "first row of a block must have j = 0"));
        };
        if t != block.t {
            return Err(schema(
                row,
                "t",
                format!(
                    "time changes inside the block starting at row {}",
                    block.first_row
                ),
            ));
        }
        if block.ghost.is_some() || j != block.rho.len() {
            return Err(schema(
                row,
                "j",
                format!("expected j = {}", block.rho.len()),
            ));
        }
        if let Some(&last) = block.r.last() {
            if r <= last {
                return Err(schema(row, "r", "radii must be strictly increasing in j"));
            }
        }
        if record[3].is_empty() {
            block.ghost = Some(u);
        } else {
            let rho = real(3, "rho")?;
            if rho <= 0.0 {
                return Err(schema(
                    row,
                    "rho",
                    "vacuum collapse in input: density must be positive",
                ));
            }
            block.rho.push(rho);
            block.u.push(u);
        }
        block.r.push(r);
    }

    let mut snapshots = Vec::with_capacity(blocks.len());
    let mut cells = None;
    for b in blocks {
        let Some(u_ghost) = b.ghost else {
            return Err(schema(
                b.first_row,
                "rho",
                format!("block at t={} has no ghost row", b.t),
            ));
        };
        let n = b.rho.len() - 1;
        if n < 1 {
            return Err(schema(b.first_row, "j", "a block needs at least one cell"));
        }
        if *cells.get_or_insert(n) != n {
            return Err(schema(
                b.first_row,
                "j",
                "the number of cells changes between blocks",
            ));
        }
        snapshots.push(Snapshot {
            t: b.t,
            dim,
            h: 1.0 / n as f64,
            rho: b.rho,
            u: b.u,
            u_ghost,
            r: b.r,
        });
    }
    if snapshots.is_empty() {
        return Err(schema(2, "t", "no snapshot rows"));
    }
    Ok(snapshots)
}

/// Top-level layout of `report.json`.
#[derive(Debug, Serialize)]
pub struct Report<P: Serialize, V: Serialize, S: Serialize, T: Serialize> {
    pub params: P,
    pub verdicts: V,
    pub series: S,
    pub termination: T,
}

pub fn create(path: &Path) -> Result<File, OutputError> {
    File::create(path).map_err(|source| OutputError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), OutputError> {
    let mut file = create(path)?;
    serde_json::to_writer_pretty(&mut file, value)?;
    file.write_all(b"\n").map_err(|source| OutputError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn snap(t: f64) -> Snapshot {
        Snapshot {
            t,
            dim: 2,
            h: 0.5,
            rho: vec![1.0, 0.1 + t, 1e-300],
            u: vec![0.0, 0.2, -1.0 / 3.0],
            u_ghost: 0.125,
            r: vec![1.0, 2f64.sqrt(), 3f64.sqrt(), 2.0],
        }
    }

    fn csv_of(snaps: &[Snapshot]) -> String {
        let mut buf = Vec::new();
        write_snapshots(&mut buf, snaps).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn layout() {
        let text = csv_of(&[snap(0.0)]);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,j,x,rho,u,r");
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[1], "0.0,0,0.0,1.0,0.0,1.0");
        assert_eq!(lines[4], "0.0,3,1.5,,0.125,2.0");
        assert!(lines[3].contains("1e-300"));
    }

    #[test]
    fn round_trip_is_exact() {
        let snaps = vec![snap(0.0), snap(0.1), snap(0.30000000000000004)];
        let back = read_snapshots(csv_of(&snaps).as_bytes(), 2).unwrap();
        assert_eq!(back, snaps);
    }

    #[test]
    fn schema_violations() {
        let good = csv_of(&[snap(0.0)]);
        let err = |text: String| read_snapshots(text.as_bytes(), 2).unwrap_err().to_string();

        let bad_r = good.replacen(",1.4142135623730951", ",0.5", 1);
        assert!(err(bad_r).contains("strictly increasing"));
        let collapse = good.replacen("0.0,1,0.5,0.1,", "0.0,1,0.5,-0.1,", 1);
        assert!(err(collapse).contains("vacuum collapse in input"));
        let zero = good.replacen("0.0,1,0.5,0.1,", "0.0,1,0.5,0,", 1);
        let msg = err(zero);
        assert!(msg.contains("row 3") && msg.contains("`rho`"), "{msg}");
        let header = good.replacen("t,j,x,rho,u,r", "t,j,x,rho,v,r", 1);
        assert!(err(header).contains("header"));
        let no_ghost: String = good.lines().take(4).map(|l| format!("{l}\n")).collect();
        assert!(err(no_ghost).contains("ghost"));
        assert!(err("t,j,x,rho,u,r\n0,0,0,abc,0,1\n".into()).contains("not a number"));
    }
}
