// SPDX-License-Identifier: MIT OR Apache-2.0

//! Pairwise distance structures.
//!
//! Every ball statistic in this crate consumes a [`DistanceMatrix`] and
//! nothing else, so Euclidean vectors, angles on the unit circle and
//! arbitrary user-supplied metrics all flow through the same code.

use crate::error::{CpdError, Result, Violation};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Absolute tolerance for asymmetry in user-supplied matrices.
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

/// One observation of a series.
#[derive(Clone, Debug, PartialEq)]
pub enum Observation {
    Coords(Vec<f64>),
    /// Radians; any real value, reduced mod 2π before distances are taken.
    Angle(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Euclidean,
    Circular,
    /// Distances supplied directly as a matrix.
    Precomputed,
}

impl std::str::FromStr for Metric {
    type Err = CpdError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Self::Euclidean),
            "circular" => Ok(Self::Circular),
            "precomputed" => Ok(Self::Precomputed),
            other => Err(CpdError::invalid_input(format!("unknown metric '{other}'"))),
        }
    }
}

fn reduce_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    // rem_euclid can return TAU itself for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Geodesic distance on the unit circle, in `[0, π]`.
pub fn circular_distance(a: f64, b: f64) -> Result<f64> {
    if !a.is_finite() || !b.is_finite() {
        return Err(CpdError::invalid_input(format!(
            "circular_distance requires finite angles; got {a}, {b}"
        )));
    }
    let diff = (reduce_angle(a) - reduce_angle(b)).abs();
    Ok(diff.min(TAU - diff))
}

pub fn euclidean_distance(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(CpdError::invalid_input(format!(
            "dimension mismatch: {} vs {}",
            u.len(),
            v.len()
        )));
    }
    if u.iter().chain(v).any(|x| !x.is_finite()) {
        return Err(CpdError::invalid_input(
            "euclidean_distance requires finite coordinates",
        ));
    }
    Ok(u.iter()
        .zip(v)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

/// Symmetric, nonnegative, zero-diagonal matrix of pairwise distances.
///
/// Immutable once built; stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    values: Vec<f64>,
}

impl DistanceMatrix {
    /// Builds a matrix from a distance function evaluated on the upper triangle.
    pub(crate) fn from_upper<F>(n: usize, mut dist: F) -> Result<Self>
    where
        F: FnMut(usize, usize) -> Result<f64>,
    {
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = dist(i, j)?;
                values[i * n + j] = d;
                values[j * n + i] = d;
            }
        }
        Ok(Self { n, values })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    /// Every distance multiplied by `c`; `c` must be positive and finite.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(CpdError::invalid_input(format!(
                "scale must be finite and > 0; got {c}"
            )));
        }
        Ok(Self {
            n: self.n,
            values: self.values.iter().map(|v| v * c).collect(),
        })
    }

    /// Matrix over the observations `indices[0], indices[1], ...` (repeats allowed).
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.n) {
            return Err(CpdError::IndexOutOfRange {
                index: bad,
                len: self.n,
            });
        }
        let k = indices.len();
        let mut values = Vec::with_capacity(k * k);
        for &a in indices {
            let row = self.row(a);
            values.extend(indices.iter().map(|&b| row[b]));
        }
        Ok(Self { n: k, values })
    }
}

fn observation_kind(obs: &Observation) -> &'static str {
    match obs {
        Observation::Coords(_) => "coords",
        Observation::Angle(_) => "angle",
    }
}

/// Distance matrix of `series` under `metric`.
pub fn pairwise_distance_matrix(series: &[Observation], metric: Metric) -> Result<DistanceMatrix> {
    if series.is_empty() {
        return Err(CpdError::invalid_input("series is empty"));
    }
    match metric {
        Metric::Euclidean => {
            let mut coords = Vec::with_capacity(series.len());
            for (t, obs) in series.iter().enumerate() {
                match obs {
                    Observation::Coords(c) if !c.is_empty() => coords.push(c.as_slice()),
                    Observation::Coords(_) => {
                        return Err(CpdError::invalid_input(format!(
                            "observation {t} has no coordinates"
                        )))
                    }
                    other => {
                        return Err(CpdError::invalid_input(format!(
                            "euclidean metric needs coordinate observations; observation {t} is {}",
                            observation_kind(other)
                        )))
                    }
                }
            }
            let dim = coords[0].len();
            if let Some(t) = coords.iter().position(|c| c.len() != dim) {
                return Err(CpdError::invalid_input(format!(
                    "observation {t} has dimension {}, expected {dim}",
                    coords[t].len()
                )));
            }
            DistanceMatrix::from_upper(series.len(), |i, j| {
                euclidean_distance(coords[i], coords[j])
            })
        }
        Metric::Circular => {
            let mut angles = Vec::with_capacity(series.len());
            for (t, obs) in series.iter().enumerate() {
                match obs {
                    Observation::Angle(a) if a.is_finite() => angles.push(*a),
                    Observation::Angle(a) => {
                        return Err(CpdError::invalid_input(format!(
                            "observation {t} has non-finite angle {a}"
                        )))
                    }
                    other => {
                        return Err(CpdError::invalid_input(format!(
                            "circular metric needs angle observations; observation {t} is {}",
                            observation_kind(other)
                        )))
                    }
                }
            }
            DistanceMatrix::from_upper(series.len(), |i, j| circular_distance(angles[i], angles[j]))
        }
        Metric::Precomputed => Err(CpdError::invalid_input(
            "precomputed metric has no observation-level distance; use validate_distance_matrix",
        )),
    }
}

/// Checks a raw square matrix and returns it as a [`DistanceMatrix`].
///
/// Entries within [`SYMMETRY_TOLERANCE`] of their transpose are averaged.
/// All violations are collected, not just the first one.
pub fn validate_distance_matrix(raw: &[Vec<f64>]) -> Result<DistanceMatrix> {
    let n = raw.len();
    if n == 0 {
        return Err(CpdError::invalid_input("distance matrix is empty"));
    }
    if let Some(r) = raw.iter().position(|row| row.len() != n) {
        return Err(CpdError::invalid_input(format!(
            "distance matrix is not square: row {r} has {} entries, expected {n}",
            raw[r].len()
        )));
    }

    let mut violations = Vec::new();
    for (i, row) in raw.iter().enumerate() {
        for (j, &value) in row.iter().enumerate() {
            if !value.is_finite() {
                violations.push(Violation::NonFinite { i, j, value });
            } else if value < 0.0 {
                violations.push(Violation::Negative { i, j, value });
            } else if i == j && value != 0.0 {
                violations.push(Violation::NonzeroDiagonal { i, value });
            }
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let (upper, lower) = (raw[i][j], raw[j][i]);
            if upper.is_finite() && lower.is_finite() && (upper - lower).abs() > SYMMETRY_TOLERANCE
            {
                violations.push(Violation::Asymmetric { i, j, upper, lower });
            }
        }
    }
    if !violations.is_empty() {
        return Err(CpdError::InvalidDistanceMatrix(violations));
    }

    DistanceMatrix::from_upper(n, |i, j| {
        let (upper, lower) = (raw[i][j], raw[j][i]);
        Ok(if upper == lower {
            upper
        } else {
            0.5 * (upper + lower)
        })
    })
}
