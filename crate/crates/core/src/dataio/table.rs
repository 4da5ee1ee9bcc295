//! CSV files for series (`axis,nbar,sigma`) and Ramsey grids in long form
//! (`tau,phi,nbar,sigma`, delays outermost). Values are written with 17
//! significant digits so that reading them back is bit-exact.

use std::collections::HashMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::protocols::{ExperimentSeries, RamseyGrid, SeriesKind};

pub const SERIES_HEADER: [&str; 3] = ["axis", "nbar", "sigma"];
pub const GRID_HEADER: [&str; 4] = ["tau", "phi", "nbar", "sigma"];

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => Error::Parse {
            line,
            message: format!("{kind:?}"),
        },
    }
}

fn write_rows<W: Write>(out: W, header: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(header).map_err(csv_error)?;
    for row in rows {
        w.write_record(row.into_iter().map(fmt)).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn read_rows<R: Read>(input: R, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut records = r.records();
    let first = match records.next() {
        Some(rec) => rec.map_err(csv_error)?,
        None => {
            return Err(Error::Parse {
                line: 1,
                message: "empty file; expected a header row".into(),
            })
        }
    };
    if first.iter().ne(header.iter().copied()) {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "expected header `{}`, found `{}`",
                header.join(","),
                first.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut rows = Vec::new();
    for rec in records {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != header.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        let row = rec
            .iter()
            .zip(header)
            .map(|(field, name)| {
                field.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    message: format!("column {name}: `{field}` is not a number"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 2,
            message: "no data rows".into(),
        });
    }
    Ok(rows)
}

pub fn write_series<W: Write>(series: &ExperimentSeries, out: W) -> Result<()> {
    write_rows(
        out,
        &SERIES_HEADER,
        (0..series.len()).map(|i| vec![series.axis[i], series.nbar[i], series.sigma[i]]),
    )
}

pub fn read_series<R: Read>(input: R, kind: SeriesKind) -> Result<ExperimentSeries> {
    let rows = read_rows(input, &SERIES_HEADER)?;
    for (i, r) in rows.iter().enumerate() {
        if !(r[2] >= 0.0) {
            return Err(Error::Parse {
                line: i as u64 + 2,
                message: format!("sigma {} must be >= 0", r[2]),
            });
        }
    }
    ExperimentSeries::new(
        rows.iter().map(|r| r[0]).collect(),
        rows.iter().map(|r| r[1]).collect(),
        rows.iter().map(|r| r[2]).collect(),
        kind,
    )
}

pub fn write_grid<W: Write>(grid: &RamseyGrid, out: W) -> Result<()> {
    let rows = grid.taus.iter().enumerate().flat_map(|(i, &tau)| {
        grid.phis
            .iter()
            .enumerate()
            .map(move |(j, &phi)| vec![tau, phi, grid.nbar[i][j], grid.sigma[i][j]])
    });
    write_rows(out, &GRID_HEADER, rows)
}

/// Reads a long-form grid; every `(tau, phi)` pair must appear exactly once.
pub fn read_grid<R: Read>(input: R) -> Result<RamseyGrid> {
    let rows = read_rows(input, &GRID_HEADER)?;
    let mut taus = Vec::new();
    let mut phis = Vec::new();
    let mut tau_index = HashMap::new();
    let mut phi_index = HashMap::new();
    for r in &rows {
        tau_index.entry(r[0].to_bits()).or_insert_with(|| {
            taus.push(r[0]);
            taus.len() - 1
        });
        phi_index.entry(r[1].to_bits()).or_insert_with(|| {
            phis.push(r[1]);
            phis.len() - 1
        });
    }
    if taus.len() * phis.len() != rows.len() {
        return Err(Error::Parse {
            line: 0,
            message: format!(
                "{} rows do not form a complete {} x {} grid",
                rows.len(),
                taus.len(),
                phis.len()
            ),
        });
    }
    let mut nbar = vec![vec![f64::NAN; phis.len()]; taus.len()];
    let mut sigma = vec![vec![f64::NAN; phis.len()]; taus.len()];
    for (k, r) in rows.iter().enumerate() {
        let i = tau_index[&r[0].to_bits()];
        let j = phi_index[&r[1].to_bits()];
        let line = k as u64 + 2;
        if !nbar[i][j].is_nan() {
            return Err(Error::Parse {
                line,
                message: format!("duplicate point tau={}, phi={}", r[0], r[1]),
            });
        }
        if !(r[3] >= 0.0) {
            return Err(Error::Parse {
                line,
                message: format!("sigma {} must be >= 0", r[3]),
            });
        }
        nbar[i][j] = r[2];
        sigma[i][j] = r[3];
    }
    RamseyGrid::new(taus, phis, nbar, sigma)
}
