// SPDX-License-Identifier: MIT OR Apache-2.0

//! Exact population Ball divergence and detection function for
//! finite-support distributions.

use crate::error::{CpdError, Result};
use crate::metric::{pairwise_distance_matrix, DistanceMatrix, Metric, Observation};

const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

/// Probability distribution with finitely many atoms.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteDistribution {
    atoms: Vec<Observation>,
    weights: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(atoms: Vec<Observation>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != weights.len() {
            return Err(CpdError::invalid_input(format!(
                "need one weight per atom; got {} atoms and {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        check_weights(&weights)?;
        Ok(Self { atoms, weights })
    }

    /// Point mass at a single observation.
    pub fn dirac(atom: Observation) -> Self {
        Self {
            atoms: vec![atom],
            weights: vec![1.0],
        }
    }

    pub fn atoms(&self) -> &[Observation] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(CpdError::invalid_input(
            "weights must be finite and nonnegative",
        ));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
        return Err(CpdError::invalid_input(format!(
            "weights sum to {total}, expected 1"
        )));
    }
    Ok(())
}

fn check_open_fraction(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(CpdError::invalid_input(format!(
            "{name} must lie strictly inside (0, 1); got {x}"
        )))
    }
}

/// `α/β` when `β ≥ α`, otherwise `(1-α)/(1-β)`.
pub fn h_factor(alpha: f64, beta: f64) -> Result<f64> {
    check_open_fraction("alpha", alpha)?;
    check_open_fraction("beta", beta)?;
    Ok(if beta >= alpha {
        alpha / beta
    } else {
        (1.0 - alpha) / (1.0 - beta)
    })
}

/// Ball divergence with scale parameter `alpha` between two weight vectors
/// defined over a common finite support whose distances are `d`.
///
/// Centers `u` and radius endpoints `v` are drawn from the mixture
/// `alpha·mu + (1-alpha)·nu`; the closed ball `{w : d(u,w) <= d(u,v)}` is
/// measured under both distributions and the squared difference integrated.
pub fn ball_divergence_on_support(
    mu: &[f64],
    nu: &[f64],
    alpha: f64,
    d: &DistanceMatrix,
) -> Result<f64> {
    let k = d.len();
    if mu.len() != k || nu.len() != k {
        return Err(CpdError::invalid_input(format!(
            "weight vectors ({}, {}) do not match support size {k}",
            mu.len(),
            nu.len()
        )));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(CpdError::invalid_input(format!(
            "alpha must lie in [0, 1]; got {alpha}"
        )));
    }
    check_weights(mu)?;
    check_weights(nu)?;

    let mixture: Vec<f64> = mu
        .iter()
        .zip(nu)
        .map(|(m, n)| alpha * m + (1.0 - alpha) * n)
        .collect();
    let mut total = 0.0;
    for u in 0..k {
        if mixture[u] == 0.0 {
            continue;
        }
        let row = d.row(u);
        for v in 0..k {
            if mixture[v] == 0.0 {
                continue;
            }
            let radius = row[v];
            let diff: f64 = (0..k)
                .filter(|&w| row[w] <= radius)
                .map(|w| mu[w] - nu[w])
                .sum();
            total += diff * diff * mixture[u] * mixture[v];
        }
    }
    Ok(total)
}

/// Merges the atoms of both distributions into one support (atoms at
/// distance zero are identified) and returns `(distances, mu weights, nu weights)`.
pub fn common_support(
    mu: &DiscreteDistribution,
    nu: &DiscreteDistribution,
    metric: Metric,
) -> Result<(DistanceMatrix, Vec<f64>, Vec<f64>)> {
    let all: Vec<Observation> = mu.atoms.iter().chain(&nu.atoms).cloned().collect();
    let d_all = pairwise_distance_matrix(&all, metric)?;

    // representative[a] = index into the merged support
    let mut reps: Vec<usize> = Vec::new();
    let mut representative = vec![0; all.len()];
    for a in 0..all.len() {
        match reps.iter().position(|&r| d_all.get(r, a) == 0.0) {
            Some(p) => {
                if a < mu.atoms.len() && reps[p] < mu.atoms.len() {
                    return Err(CpdError::invalid_input(format!(
                        "atoms {} and {a} of the first distribution coincide",
                        reps[p]
                    )));
                }
                if a >= mu.atoms.len() && reps[p] >= mu.atoms.len() {
                    return Err(CpdError::invalid_input(format!(
                        "atoms {} and {} of the second distribution coincide",
                        reps[p] - mu.atoms.len(),
                        a - mu.atoms.len()
                    )));
                }
                representative[a] = p;
            }
            None => {
                representative[a] = reps.len();
                reps.push(a);
            }
        }
    }

    let mut mu_w = vec![0.0; reps.len()];
    let mut nu_w = vec![0.0; reps.len()];
    for (a, &w) in mu.weights.iter().enumerate() {
        mu_w[representative[a]] += w;
    }
    for (b, &w) in nu.weights.iter().enumerate() {
        nu_w[representative[mu.atoms.len() + b]] += w;
    }
    Ok((d_all.select(&reps)?, mu_w, nu_w))
}

/// Exact `D_α(μ, ν)` for two finite-support distributions.
pub fn pop_ball_divergence(
    mu: &DiscreteDistribution,
    nu: &DiscreteDistribution,
    alpha: f64,
    metric: Metric,
) -> Result<f64> {
    let (d, mu_w, nu_w) = common_support(mu, nu, metric)?;
    ball_divergence_on_support(&mu_w, &nu_w, alpha, &d)
}

/// `β(1-β)·h_α(β)²·D_α(μ, ν)`.
pub fn pop_detection_function(
    beta: f64,
    alpha: f64,
    mu: &DiscreteDistribution,
    nu: &DiscreteDistribution,
    metric: Metric,
) -> Result<f64> {
    let h = h_factor(alpha, beta)?;
    Ok(beta * (1.0 - beta) * h * h * pop_ball_divergence(mu, nu, alpha, metric)?)
}

/// Same as [`pop_detection_function`] on an explicit common support.
pub fn detection_function_on_support(
    beta: f64,
    alpha: f64,
    mu: &[f64],
    nu: &[f64],
    d: &DistanceMatrix,
) -> Result<f64> {
    let h = h_factor(alpha, beta)?;
    Ok(beta * (1.0 - beta) * h * h * ball_divergence_on_support(mu, nu, alpha, d)?)
}
