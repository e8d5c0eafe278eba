// SPDX-License-Identifier: MIT OR Apache-2.0

//! Hierarchical search for multiple change points: scan every current
//! segment, bootstrap-test the strongest candidate, split, repeat.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ballstat::{segment_scan, Segment, SegmentBest};
use crate::bootstrap::{test_candidate, BootstrapConfig, DEFAULT_P_THRESHOLD, DEFAULT_REPLICATES};
use crate::error::{CpdError, Result};
use crate::metric::{DistanceMatrix, Metric};

pub const DEFAULT_MIN_SEG: usize = 10;

/// How the significance threshold evolves over successive tests.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdSchedule {
    /// `p_threshold` at every stage.
    #[default]
    Fixed,
    /// `p_threshold / stage` at the `stage`-th test (1-based).
    Decreasing,
}

impl ThresholdSchedule {
    pub fn threshold(self, p0: f64, stage: usize) -> f64 {
        match self {
            Self::Fixed => p0,
            Self::Decreasing => p0 / stage.max(1) as f64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionConfig {
    pub metric: Metric,
    pub min_seg: usize,
    pub replicates: usize,
    pub p_threshold: f64,
    pub block_size: Option<usize>,
    pub stride: usize,
    pub seed: u64,
    #[serde(default)]
    pub schedule: ThresholdSchedule,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            metric: Metric::Euclidean,
            min_seg: DEFAULT_MIN_SEG,
            replicates: DEFAULT_REPLICATES,
            p_threshold: DEFAULT_P_THRESHOLD,
            block_size: None,
            stride: 1,
            seed: 0,
            schedule: ThresholdSchedule::Fixed,
        }
    }
}

impl DetectionConfig {
    pub fn bootstrap(&self) -> BootstrapConfig {
        BootstrapConfig {
            replicates: self.replicates,
            block_size: self.block_size,
            p_threshold: self.p_threshold,
            seed: self.seed,
            min_seg: self.min_seg,
            stride: self.stride,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.bootstrap().validate()
    }
}

/// Observations `first..=last` in 1-based time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub first: usize,
    pub last: usize,
}

impl From<Segment> for Span {
    fn from(s: Segment) -> Self {
        Self {
            first: s.start + 1,
            last: s.end,
        }
    }
}

/// One bootstrap test of the outer loop.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Stage {
    pub segment: Span,
    pub m_hat: usize,
    pub l_hat: usize,
    pub v: f64,
    pub p: f64,
    pub threshold: f64,
    pub block_size: usize,
    pub accepted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChangePointReport {
    /// Series length `T`.
    pub length: usize,
    /// Accepted change points, increasing, 1-based: the last index of the
    /// segment to the left of each change.
    pub changepoints: Vec<usize>,
    /// p-values of accepted detections, in discovery order.
    pub p_values: Vec<f64>,
    pub discovery_order: Vec<usize>,
    pub segments: Vec<Span>,
    pub stages: Vec<Stage>,
    /// Set when the series is shorter than two minimal segments.
    pub too_short: bool,
    pub config: DetectionConfig,
}

impl ChangePointReport {
    fn empty(length: usize, config: &DetectionConfig, too_short: bool) -> Self {
        Self {
            length,
            changepoints: Vec::new(),
            p_values: Vec::new(),
            discovery_order: Vec::new(),
            segments: if length > 0 {
                vec![Span {
                    first: 1,
                    last: length,
                }]
            } else {
                Vec::new()
            },
            stages: Vec::new(),
            too_short,
            config: config.clone(),
        }
    }
}

/// Detects all change points of the series described by `d`.
pub fn detect(d: &DistanceMatrix, config: &DetectionConfig) -> Result<ChangePointReport> {
    run(d, config, true)
}

/// [`detect`] without reusing scans of unchanged segments.
pub fn detect_uncached(d: &DistanceMatrix, config: &DetectionConfig) -> Result<ChangePointReport> {
    run(d, config, false)
}

fn scan_or_none(
    d: &DistanceMatrix,
    seg: Segment,
    config: &DetectionConfig,
) -> Result<Option<SegmentBest>> {
    match segment_scan(d, seg, config.min_seg, config.stride) {
        Ok(best) => Ok(Some(best)),
        Err(CpdError::SegmentTooShort { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn run(d: &DistanceMatrix, config: &DetectionConfig, cache: bool) -> Result<ChangePointReport> {
    config.validate()?;
    let t = d.len();
    if t < 2 * config.min_seg {
        return Ok(ChangePointReport::empty(t, config, true));
    }
    let boot = config.bootstrap();

    let mut segments = vec![Segment::new(0, t)?];
    let mut scanned: HashMap<Segment, Option<SegmentBest>> = HashMap::new();
    let mut report = ChangePointReport::empty(t, config, false);

    for stage in 1.. {
        if !cache {
            scanned.clear();
        }
        let fresh: Vec<Segment> = segments
            .iter()
            .copied()
            .filter(|s| !scanned.contains_key(s))
            .collect();
        let results = fresh
            .par_iter()
            .map(|&s| scan_or_none(d, s, config))
            .collect::<Result<Vec<_>>>()?;
        scanned.extend(fresh.into_iter().zip(results));

        // segments are kept sorted by start; strict improvement keeps the
        // leftmost among equal statistics
        let mut pick: Option<(usize, SegmentBest)> = None;
        for (pos, s) in segments.iter().enumerate() {
            if let Some(best) = scanned[s] {
                if pick.is_none_or(|(_, b)| best.exact_value() > b.exact_value()) {
                    pick = Some((pos, best));
                }
            }
        }
        let Some((pos, best)) = pick else { break };

        let seg = segments[pos];
        let sig = test_candidate(d, seg, &best, &boot)?;
        let threshold = config.schedule.threshold(config.p_threshold, stage);
        let accepted = sig.p_value < threshold;
        report.stages.push(Stage {
            segment: seg.into(),
            m_hat: best.m_hat,
            l_hat: best.l_hat,
            v: best.value,
            p: sig.p_value,
            threshold,
            block_size: sig.block_size,
            accepted,
        });
        if !accepted {
            break;
        }
        report.discovery_order.push(best.m_hat);
        report.p_values.push(sig.p_value);
        segments.splice(
            pos..=pos,
            [
                Segment::new(seg.start, best.m_hat)?,
                Segment::new(best.m_hat, seg.end)?,
            ],
        );
    }

    report.changepoints = report.discovery_order.clone();
    report.changepoints.sort_unstable();
    report.segments = segments.into_iter().map(Span::from).collect();
    Ok(report)
}
