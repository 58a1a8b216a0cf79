//! CSV output. Floats are written with `Display`, the shortest text that
//! parses back to the same `f64`.

use std::io::{Read, Write};

use thiserror::Error;

use crate::bench::BenchRow;
use crate::economy::Economy;
use crate::sim::Trajectory;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("row {row}: {message}")]
    Malformed { row: usize, message: String },
}

const TRAJECTORY_FIXED: [&str; 6] = [
    "tick",
    "humanity",
    "externality_step",
    "externality_cum",
    "reward",
    "delivery_scale",
];

pub fn trajectory_header(economy: &Economy) -> Vec<String> {
    TRAJECTORY_FIXED
        .iter()
        .map(|s| s.to_string())
        .chain(
            economy
                .goods()
                .iter()
                .map(|g| format!("inventory_{}", g.name)),
        )
        .collect()
}

/// One trajectory CSV line, parsed back.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub tick: u64,
    pub humanity: f64,
    pub externality_step: f64,
    pub externality_cum: f64,
    pub reward: f64,
    pub delivery_scale: f64,
    pub inventory: Vec<f64>,
}

pub fn write_trajectory<W: Write>(
    out: W,
    economy: &Economy,
    trajectory: &Trajectory,
) -> Result<(), OutputError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trajectory_header(economy))?;
    for r in &trajectory.reports {
        let mut rec = vec![
            r.tick.to_string(),
            r.humanity.to_string(),
            r.externality_step.to_string(),
            r.cumulative_externality.to_string(),
            r.reward.to_string(),
            r.delivery_scale.to_string(),
        ];
        rec.extend(r.inventory_after.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

fn parse_f64(row: usize, s: &str) -> Result<f64, OutputError> {
    s.parse().map_err(|_| OutputError::Malformed {
        row,
        message: format!("not a number: {s:?}"),
    })
}

/// Returns the header and the rows.
pub fn read_trajectory<R: Read>(
    input: R,
) -> Result<(Vec<String>, Vec<TrajectoryRow>), OutputError> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    if header.len() < TRAJECTORY_FIXED.len() || header[..6] != TRAJECTORY_FIXED {
        return Err(OutputError::Malformed {
            row: 0,
            message: "unexpected trajectory header".into(),
        });
    }
    let mut rows = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = k + 1;
        let num = |i: usize| parse_f64(row, &rec[i]);
        rows.push(TrajectoryRow {
            tick: rec[0].parse().map_err(|_| OutputError::Malformed {
                row,
                message: format!("bad tick {:?}", &rec[0]),
            })?,
            humanity: num(1)?,
            externality_step: num(2)?,
            externality_cum: num(3)?,
            reward: num(4)?,
            delivery_scale: num(5)?,
            inventory: (6..rec.len()).map(num).collect::<Result<_, _>>()?,
        });
    }
    Ok((header, rows))
}

pub fn write_bench<W: Write>(out: W, rows: &[BenchRow]) -> Result<(), OutputError> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    if rows.is_empty() {
        w.write_record([
            "n_industrial",
            "n_final",
            "n_profiles",
            "deps",
            "n_total",
            "nnz",
            "time_s_median",
            "residual",
            "time_s_min",
            "contended",
            "status",
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_bench<R: Read>(input: R) -> Result<Vec<BenchRow>, OutputError> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

/// `good,kind,x` per good.
pub fn write_plan<W: Write>(out: W, economy: &Economy, x: &[f64]) -> Result<(), OutputError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["good", "kind", "x"])?;
    for (g, v) in economy.goods().iter().zip(x) {
        w.write_record([g.name.as_str(), g.kind.label(), &v.to_string()])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Reads `(output, total input)` samples from a two-column CSV with a
/// header row.
pub fn read_samples<R: Read>(input: R) -> Result<Vec<(f64, f64)>, OutputError> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != 2 {
            return Err(OutputError::Malformed {
                row: k + 1,
                message: format!("expected 2 columns, found {}", rec.len()),
            });
        }
        out.push((
            parse_f64(k + 1, rec[0].trim())?,
            parse_f64(k + 1, rec[1].trim())?,
        ));
    }
    Ok(out)
}

/// `level,per_unit` per breakpoint.
pub fn write_breakpoints<W: Write>(out: W, breakpoints: &[(f64, f64)]) -> Result<(), OutputError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["level", "per_unit"])?;
    for (x, f) in breakpoints {
        w.write_record([x.to_string(), f.to_string()])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
