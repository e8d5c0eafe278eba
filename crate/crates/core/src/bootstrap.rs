// SPDX-License-Identifier: MIT OR Apache-2.0

//! Moving-block-bootstrap significance of a candidate split.

use crate::ballstat::{segment_scan, Segment, SegmentBest, StatValue};
use crate::error::{CpdError, Result};
use crate::metric::DistanceMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const DEFAULT_REPLICATES: usize = 199;
pub const DEFAULT_P_THRESHOLD: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub replicates: usize,
    /// Fixed block length; `None` selects it from the data.
    pub block_size: Option<usize>,
    pub p_threshold: f64,
    pub seed: u64,
    pub min_seg: usize,
    pub stride: usize,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            replicates: DEFAULT_REPLICATES,
            block_size: None,
            p_threshold: DEFAULT_P_THRESHOLD,
            seed: 0,
            min_seg: 10,
            stride: 1,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(CpdError::invalid_input("replicates must be >= 1"));
        }
        if !(self.p_threshold > 0.0 && self.p_threshold < 1.0) {
            return Err(CpdError::invalid_input(format!(
                "p_threshold must lie in (0, 1); got {}",
                self.p_threshold
            )));
        }
        if self.block_size == Some(0) {
            return Err(CpdError::invalid_input("block_size must be >= 1"));
        }
        if self.min_seg == 0 {
            return Err(CpdError::invalid_input("min_seg must be >= 1"));
        }
        if self.stride == 0 {
            return Err(CpdError::invalid_input("stride must be >= 1"));
        }
        Ok(())
    }
}

/// Lag-one sample autocorrelation; zero for constant input.
pub fn lag1_autocorrelation(x: &[f64]) -> Result<f64> {
    if x.len() < 3 {
        return Err(CpdError::invalid_input(format!(
            "lag-1 autocorrelation needs at least 3 values; got {}",
            x.len()
        )));
    }
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let denom: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum();
    if denom == 0.0 {
        return Ok(0.0);
    }
    let num: f64 = x.windows(2).map(|w| (w[1] - mean) * (w[0] - mean)).sum();
    Ok((num / denom).clamp(-1.0, 1.0))
}

/// Index of the point with the smallest total distance to all others.
/// Sums within a relative `1e-12` of the minimum count as tied (they arise
/// exactly, e.g. between the two middle points of an even-sized line), and
/// the first tied index wins, so rounding cannot move the medoid.
pub fn medoid(d: &DistanceMatrix) -> usize {
    let sums: Vec<f64> = (0..d.len()).map(|i| d.row(i).iter().sum()).collect();
    let min = sums.iter().copied().fold(f64::INFINITY, f64::min);
    sums.iter()
        .position(|&s| s <= min + 1e-12 * min.abs())
        .unwrap_or(0)
}

/// Distance of every observation to the medoid: a scalar series that any
/// metric (including a precomputed one) can be reduced to.
pub fn scalar_proxy(d: &DistanceMatrix) -> Result<Vec<f64>> {
    if d.is_empty() {
        return Err(CpdError::invalid_input("scalar proxy of an empty series"));
    }
    Ok(d.row(medoid(d)).to_vec())
}

fn block_term(t: f64, rho: f64) -> f64 {
    let denom = 1.0 - rho * rho;
    if denom <= 0.0 {
        return f64::INFINITY;
    }
    let ratio = 2.0 * rho.abs() / denom;
    ((1.5 * t).cbrt() * ratio.powf(2.0 / 3.0)).floor()
}

/// Block length from the lag-one autocorrelations of a scalar series
/// (`rho`) and of its squares (`rho_sq`), clamped to `[1, t/4]`.
pub fn block_size_from_autocorr(t: usize, rho: f64, rho_sq: f64) -> usize {
    let tf = t as f64;
    let cap = (8.0 * (tf / 100.0).cbrt()).floor();
    let q = block_term(tf, rho).min(cap);
    let q_sq = block_term(tf, rho_sq).min(cap);
    let b = q.max(q_sq).max(0.0) as usize;
    b.min(t / 4).max(1)
}

/// Data-driven block length for the observations of `segment`.
pub fn block_size(d: &DistanceMatrix, segment: Segment) -> Result<usize> {
    let n = segment.len();
    if n < 3 {
        return Err(CpdError::invalid_input(format!(
            "block size needs at least 3 observations; got {n}"
        )));
    }
    let idx: Vec<usize> = (segment.start..segment.end).collect();
    let proxy = scalar_proxy(&d.select(&idx)?)?;
    let squared: Vec<f64> = proxy.iter().map(|v| v * v).collect();
    Ok(block_size_from_autocorr(
        n,
        lag1_autocorrelation(&proxy)?,
        lag1_autocorrelation(&squared)?,
    ))
}

/// Moving-block resample of `0..len`: `⌈len/b⌉` blocks of `b` consecutive
/// indices with uniformly drawn starts, concatenated and cut to `len`.
pub fn mbb_resample<R: Rng + ?Sized>(len: usize, b: usize, rng: &mut R) -> Result<Vec<usize>> {
    if b == 0 || b > len {
        return Err(CpdError::invalid_input(format!(
            "block size {b} must lie in [1, {len}]"
        )));
    }
    let blocks = len.div_ceil(b);
    let mut out = Vec::with_capacity(blocks * b);
    for _ in 0..blocks {
        let start = rng.random_range(0..=len - b);
        out.extend(start..start + b);
    }
    out.truncate(len);
    Ok(out)
}

fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// RNG for one bootstrap replicate; depends only on the seed, the segment
/// under test and the replicate index.
pub fn replicate_rng(seed: u64, segment: Segment, replicate: usize) -> ChaCha8Rng {
    let key = mix64(seed ^ mix64(segment.start as u64 ^ mix64(segment.end as u64)));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(replicate as u64);
    rng
}

/// Outcome of one bootstrap test.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Significance {
    pub p_value: f64,
    /// Replicates whose maximal statistic reached the observed one.
    pub exceedances: usize,
    pub replicates: usize,
    pub block_size: usize,
}

/// Maximal scan statistic of each bootstrap replicate of `segment`.
pub fn replicate_maxima(
    d: &DistanceMatrix,
    segment: Segment,
    config: &BootstrapConfig,
) -> Result<(usize, Vec<StatValue>)> {
    config.validate()?;
    let len = segment.len();
    if len < 2 * config.min_seg {
        return Err(CpdError::SegmentTooShort {
            len,
            min_seg: config.min_seg,
        });
    }
    let b = match config.block_size {
        Some(b) => b.min(len),
        None => block_size(d, segment)?,
    };

    let maxima = (0..config.replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(config.seed, segment, r);
            let idx: Vec<usize> = mbb_resample(len, b, &mut rng)?
                .into_iter()
                .map(|i| segment.start + i)
                .collect();
            let resampled = d.select(&idx)?;
            let best = segment_scan(
                &resampled,
                Segment::new(0, len)?,
                config.min_seg,
                config.stride,
            )?;
            Ok(best.exact_value())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((b, maxima))
}

/// Bootstrap test of the candidate `observed` found in `segment`.
pub fn test_candidate(
    d: &DistanceMatrix,
    segment: Segment,
    observed: &SegmentBest,
    config: &BootstrapConfig,
) -> Result<Significance> {
    let (block_size, maxima) = replicate_maxima(d, segment, config)?;
    let target = observed.exact_value();
    let exceedances = maxima.iter().filter(|&&v| v >= target).count();
    Ok(Significance {
        p_value: exceedances as f64 / (config.replicates + 1) as f64,
        exceedances,
        replicates: config.replicates,
        block_size,
    })
}

/// p-value `#{V* >= V_obs} / (R + 1)` of the candidate split.
pub fn significance(
    d: &DistanceMatrix,
    segment: Segment,
    observed: &SegmentBest,
    config: &BootstrapConfig,
) -> Result<f64> {
    Ok(test_candidate(d, segment, observed, config)?.p_value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{pairwise_distance_matrix, Metric, Observation};
    use rand_distr::{Distribution, StandardNormal};

    fn line(xs: &[f64]) -> DistanceMatrix {
        let obs: Vec<_> = xs.iter().map(|&x| Observation::Coords(vec![x])).collect();
        pairwise_distance_matrix(&obs, Metric::Euclidean).unwrap()
    }

    #[test]
    fn autocorrelation_examples() {
        assert_eq!(lag1_autocorrelation(&[2.0; 10]).unwrap(), 0.0);
        for t in [4usize, 10, 50] {
            let alt: Vec<f64> = (0..t)
                .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
                .collect();
            let expected = -((t - 1) as f64) / t as f64;
            assert!((lag1_autocorrelation(&alt).unwrap() - expected).abs() < 1e-15);
        }
        assert!(lag1_autocorrelation(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn autocorrelation_of_white_noise_is_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let x: Vec<f64> = (0..10_000)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        assert!(lag1_autocorrelation(&x).unwrap().abs() < 0.05);
    }

    #[test]
    fn proxy_examples() {
        assert_eq!(scalar_proxy(&line(&[1.5; 5])).unwrap(), vec![0.0; 5]);
        assert_eq!(
            scalar_proxy(&line(&[0.0, 0.0, 0.0, 9.0])).unwrap(),
            vec![0.0, 0.0, 0.0, 9.0]
        );
        assert_eq!(medoid(&line(&[0.0, 0.0, 0.0, 9.0])), 0);
    }

    #[test]
    fn medoid_ties_survive_scaling() {
        // the two middle points of an even-sized line have equal sums
        let xs = [0.3, 2.9, 1.7, 0.1, 5.3, 4.1];
        for c in [1.0, 167.17, 1e-3, 0.1, 3.3e2] {
            let scaled: Vec<f64> = xs.iter().map(|x| x * c).collect();
            assert_eq!(medoid(&line(&scaled)), 1, "scale {c}");
        }
    }

    #[test]
    fn proxy_is_invariant_to_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pts: Vec<[f64; 3]> = (0..40)
            .map(|_| [0; 3].map(|_| StandardNormal.sample(&mut rng)))
            .collect();
        // rotation about z by θ, then about x by φ, then a translation
        let (th, ph) = (0.7f64, -1.9f64);
        let rotated: Vec<[f64; 3]> = pts
            .iter()
            .map(|p| {
                let (x, y, z) = (
                    th.cos() * p[0] - th.sin() * p[1],
                    th.sin() * p[0] + th.cos() * p[1],
                    p[2],
                );
                [
                    x + 3.0,
                    ph.cos() * y - ph.sin() * z - 1.0,
                    ph.sin() * y + ph.cos() * z,
                ]
            })
            .collect();
        let to_d = |v: &[[f64; 3]]| {
            let obs: Vec<_> = v.iter().map(|p| Observation::Coords(p.to_vec())).collect();
            pairwise_distance_matrix(&obs, Metric::Euclidean).unwrap()
        };
        let a = scalar_proxy(&to_d(&pts)).unwrap();
        let b = scalar_proxy(&to_d(&rotated)).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn block_size_examples() {
        // ⌊150^{1/3}·(4/3)^{2/3}⌋ = ⌊6.43⌋ against ⌊8·1⌋
        assert_eq!(block_size_from_autocorr(100, 0.5, 0.01), 6);
        assert_eq!(block_size_from_autocorr(100, 0.0, 0.0), 1);
        // ⌊1200^{1/3}·(1.8/0.19)^{2/3}⌋ = 47 against ⌊8·2⌋
        assert_eq!(block_size_from_autocorr(800, 0.9, 0.9), 16);
        assert_eq!(block_size_from_autocorr(800, 1.0, -1.0), 16);
        // the t/4 clamp
        assert_eq!(block_size_from_autocorr(12, 0.9, 0.9), 3);
        // negative autocorrelation enters through its magnitude
        assert_eq!(block_size_from_autocorr(100, -0.5, 0.0), 6);
    }

    #[test]
    fn block_size_from_segment() {
        let d = line(&[3.0; 10]);
        assert_eq!(block_size(&d, Segment::new(0, 10).unwrap()).unwrap(), 1);
        assert!(block_size(&d, Segment::new(0, 2).unwrap()).is_err());
        // a slow drift is strongly autocorrelated
        let xs: Vec<f64> = (0..100).map(|t| (t as f64 / 15.0).sin()).collect();
        assert!(block_size(&line(&xs), Segment::new(0, 100).unwrap()).unwrap() > 3);
    }

    #[test]
    fn resample_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(
            mbb_resample(7, 7, &mut rng).unwrap(),
            (0..7).collect::<Vec<_>>()
        );
        let iid = mbb_resample(50, 1, &mut rng).unwrap();
        assert_eq!(iid.len(), 50);
        assert!(iid.iter().all(|&i| i < 50));
        assert!(mbb_resample(5, 0, &mut rng).is_err());
        assert!(mbb_resample(5, 6, &mut rng).is_err());
    }

    #[test]
    fn resample_replays_the_seeded_stream() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let got = mbb_resample(6, 2, &mut rng).unwrap();

        let mut replay = ChaCha8Rng::seed_from_u64(77);
        let starts: Vec<usize> = (0..3).map(|_| replay.random_range(0..=4)).collect();
        let expected: Vec<usize> = starts.iter().flat_map(|&s| [s, s + 1]).collect();
        assert_eq!(got, expected);
        assert!(got.chunks(2).all(|c| c[1] == c[0] + 1));
    }

    #[test]
    fn resample_is_truncated_to_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for len in 1..30 {
            for b in 1..=len {
                let idx = mbb_resample(len, b, &mut rng).unwrap();
                assert_eq!(idx.len(), len);
                assert!(idx.iter().all(|&i| i < len));
            }
        }
    }

    #[test]
    fn zero_statistic_is_never_significant() {
        let d = line(&[1.0; 24]);
        let seg = Segment::new(0, 24).unwrap();
        let cfg = BootstrapConfig {
            replicates: 19,
            min_seg: 4,
            ..Default::default()
        };
        let best = segment_scan(&d, seg, 4, 1).unwrap();
        assert_eq!(best.value, 0.0);
        let sig = test_candidate(&d, seg, &best, &cfg).unwrap();
        assert_eq!(sig.exceedances, 19);
        assert_eq!(sig.p_value, 19.0 / 20.0);
    }

    #[test]
    fn p_value_arithmetic() {
        // 4 exceedances out of R = 199
        assert_eq!(4.0 / (199 + 1) as f64, 0.02);
    }

    #[test]
    fn separated_clusters_are_significant() {
        let mut hits = 0;
        let runs = 20;
        for seed in 0..runs {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let xs: Vec<f64> = (0..60)
                .map(|t| {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    if t < 30 {
                        e
                    } else {
                        8.0 + e
                    }
                })
                .collect();
            let d = line(&xs);
            let seg = Segment::new(0, 60).unwrap();
            let cfg = BootstrapConfig {
                replicates: 99,
                seed,
                ..Default::default()
            };
            let best = segment_scan(&d, seg, cfg.min_seg, 1).unwrap();
            if significance(&d, seg, &best, &cfg).unwrap() < 0.05 {
                hits += 1;
            }
        }
        assert!(hits as f64 >= 0.95 * runs as f64, "{hits}/{runs}");
    }

    #[test]
    fn p_value_is_bounded_and_monotone_in_observed() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let xs: Vec<f64> = (0..30).map(|_| StandardNormal.sample(&mut rng)).collect();
        let d = line(&xs);
        let seg = Segment::new(0, 30).unwrap();
        let cfg = BootstrapConfig {
            replicates: 39,
            min_seg: 5,
            ..Default::default()
        };
        let (_, maxima) = replicate_maxima(&d, seg, &cfg).unwrap();
        let mut sorted: Vec<f64> = maxima.iter().map(|v| v.to_f64()).collect();
        sorted.sort_by(f64::total_cmp);
        let p_at = |obs: f64| sorted.iter().filter(|&&v| v >= obs).count() as f64 / 40.0;
        let mut last = 1.0;
        for &obs in &sorted {
            let p = p_at(obs);
            assert!(p <= last && p <= 39.0 / 40.0);
            last = p;
        }
    }

    #[test]
    fn p_value_is_deterministic_across_thread_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let xs: Vec<f64> = (0..40).map(|t| { let z: f64 = StandardNormal.sample(&mut rng); z } + if t > 25 { 1.0 } else { 0.0 }).collect();
        let d = line(&xs);
        let seg = Segment::new(0, 40).unwrap();
        let cfg = BootstrapConfig {
            replicates: 49,
            seed: 5,
            min_seg: 5,
            ..Default::default()
        };
        let best = segment_scan(&d, seg, 5, 1).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| test_candidate(&d, seg, &best, &cfg).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn invalid_config_is_rejected() {
        let d = line(&[0.0; 20]);
        let seg = Segment::new(0, 20).unwrap();
        let best = segment_scan(&d, seg, 2, 1).unwrap();
        for cfg in [
            BootstrapConfig {
                replicates: 0,
                ..Default::default()
            },
            BootstrapConfig {
                p_threshold: 1.0,
                ..Default::default()
            },
            BootstrapConfig {
                block_size: Some(0),
                ..Default::default()
            },
        ] {
            assert!(significance(&d, seg, &best, &cfg).is_err());
        }
        let short = BootstrapConfig {
            min_seg: 11,
            ..Default::default()
        };
        assert!(matches!(
            significance(&d, seg, &best, &short),
            Err(CpdError::SegmentTooShort { .. })
        ));
    }
}
