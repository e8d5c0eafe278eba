// SPDX-License-Identifier: MIT OR Apache-2.0

//! CSV input and output: series, precomputed distance matrices and scan
//! profiles. Every CSV file starts with a header row.

use std::io::{Read, Write};

use crate::ballstat::ProfilePoint;
use crate::error::{CpdError, Result};
use crate::metric::{validate_distance_matrix, DistanceMatrix, Metric, Observation};

fn parse_cell(field: &str, row: usize, col: usize) -> Result<f64> {
    let v: f64 = field.trim().parse().map_err(|_| {
        CpdError::invalid_input(format!(
            "row {row}, column {col}: cannot parse {field:?} as a number"
        ))
    })?;
    if !v.is_finite() {
        return Err(CpdError::invalid_input(format!(
            "row {row}, column {col}: non-finite value"
        )));
    }
    Ok(v)
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input)
}

/// Reads one observation per row. With `Metric::Circular` the column named
/// `angle` holds radians; otherwise every column is a coordinate.
pub fn read_series_csv<R: Read>(input: R, metric: Metric) -> Result<Vec<Observation>> {
    let mut rdr = reader(input);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() {
        return Err(CpdError::invalid_input("series CSV needs a header row"));
    }
    let angle_col = match metric {
        Metric::Circular => Some(headers.iter().position(|h| h == "angle").ok_or_else(|| {
            CpdError::invalid_input("circular series need a column named \"angle\"")
        })?),
        Metric::Euclidean => None,
        Metric::Precomputed => {
            return Err(CpdError::invalid_input(
                "precomputed input is a distance matrix, not a series",
            ));
        }
    };

    let mut out = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = r + 1;
        let obs = match angle_col {
            Some(c) => Observation::Angle(parse_cell(rec.get(c).unwrap_or(""), row, c + 1)?),
            None => Observation::Coords(
                rec.iter()
                    .enumerate()
                    .map(|(c, f)| parse_cell(f, row, c + 1))
                    .collect::<Result<_>>()?,
            ),
        };
        out.push(obs);
    }
    if out.is_empty() {
        return Err(CpdError::invalid_input("series CSV has no data rows"));
    }
    Ok(out)
}

/// Reads a square distance matrix (header row of labels, then one row per
/// observation) and validates it.
pub fn read_matrix_csv<R: Read>(input: R) -> Result<DistanceMatrix> {
    let mut rdr = reader(input);
    let width = rdr.headers()?.len();
    let mut rows = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        rows.push(
            rec.iter()
                .enumerate()
                .map(|(c, f)| parse_cell(f, r + 1, c + 1))
                .collect::<Result<Vec<f64>>>()?,
        );
    }
    if rows.len() != width {
        return Err(CpdError::invalid_input(format!(
            "distance matrix has {width} columns but {} rows",
            rows.len()
        )));
    }
    validate_distance_matrix(&rows)
}

/// Writes `angle` or `x1, x2, ...` columns.
pub fn write_series_csv<W: Write>(output: W, series: &[Observation]) -> Result<()> {
    let mut w = csv::Writer::from_writer(output);
    match series.first() {
        Some(Observation::Angle(_)) => w.write_record(["angle"])?,
        Some(Observation::Coords(v)) => w.write_record((1..=v.len()).map(|k| format!("x{k}")))?,
        None => return Err(CpdError::invalid_input("empty series")),
    }
    for obs in series {
        match obs {
            Observation::Angle(a) => w.write_record([a.to_string()])?,
            Observation::Coords(v) => w.write_record(v.iter().map(f64::to_string))?,
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes `m, l, v` rows with 1-based `m` and `l`.
pub fn write_profile_csv<W: Write>(output: W, points: &[ProfilePoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(output);
    w.write_record(["m", "l", "v"])?;
    for p in points {
        w.write_record([p.m.to_string(), p.l.to_string(), p.value.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
