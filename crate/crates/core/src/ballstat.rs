// SPDX-License-Identifier: MIT OR Apache-2.0

//! Sample Ball detection statistics.
//!
//! For a segment `(start, end]` and candidate split `(M, L]` the statistic is
//!
//! ```text
//! V(M, L) = p·q/ℓ³ · Σ_{i,j} (C¹_ij − C²_ij)²,   p = M − start, q = L − M, ℓ = p + q
//! ```
//!
//! where `i, j` range over `(start, L]`, `C¹_ij` is the fraction of the left
//! part `(start, M]` inside the closed ball centered at `Z_i` with radius
//! `ρ(Z_i, Z_j)`, and `C²_ij` the same fraction of the right part `(M, L]`.
//!
//! Writing `a_ij` for the left count and `A_ij` for the count over the whole
//! prefix, the summand becomes `(ℓ·a_ij − p·A_ij)² / (p·q)²`, so
//!
//! ```text
//! V(M, L) = (ℓ²·Σa² − 2ℓp·Σa·A + p²·ΣA²) / (ℓ³·p·q)
//! ```
//!
//! All three sums are integers. [`segment_scan`] maintains them over the
//! full `(M, L)` grid in `O(n³)` and compares candidates as exact rationals,
//! so the argmax and its tie-break never depend on rounding.

use crate::error::{CpdError, Result};
use crate::metric::DistanceMatrix;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

/// Observations `start+1 ..= end` in 1-based time, i.e. `start..end` 0-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
}

impl Segment {
    pub fn new(start: usize, end: usize) -> Result<Self> {
        if start >= end {
            return Err(CpdError::invalid_input(format!(
                "segment ({start}, {end}] is empty"
            )));
        }
        Ok(Self { start, end })
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    fn check_within(&self, d: &DistanceMatrix) -> Result<()> {
        if self.start >= self.end {
            return Err(CpdError::invalid_input(format!(
                "segment ({}, {}] is empty",
                self.start, self.end
            )));
        }
        if self.end > d.len() {
            return Err(CpdError::IndexOutOfRange {
                index: self.end,
                len: d.len(),
            });
        }
        Ok(())
    }
}

/// Non-negative rational `num / den` with exact ordering.
#[derive(Clone, Copy, Debug)]
pub struct StatValue {
    num: u128,
    den: u128,
}

impl StatValue {
    pub(crate) fn new(num: u128, den: u128) -> Self {
        debug_assert!(den > 0);
        Self { num, den }
    }

    pub fn zero() -> Self {
        Self { num: 0, den: 1 }
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl PartialEq for StatValue {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for StatValue {}

impl PartialOrd for StatValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for StatValue {
    fn cmp(&self, other: &Self) -> Ordering {
        match (
            self.num.checked_mul(other.den),
            other.num.checked_mul(self.den),
        ) {
            (Some(a), Some(b)) => a.cmp(&b),
            // only reachable for segments of several thousand points
            _ => self.to_f64().total_cmp(&other.to_f64()),
        }
    }
}

/// Best split found in one segment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SegmentBest {
    /// Split index: the left part is `(start, m_hat]`.
    pub m_hat: usize,
    /// Right bound of the candidate window `(m_hat, l_hat]`.
    pub l_hat: usize,
    pub value: f64,
    #[serde(skip)]
    pub(crate) exact: StatValue,
}

impl SegmentBest {
    pub fn exact_value(&self) -> StatValue {
        self.exact
    }
}

/// Closed-ball membership: is `Z_u` within `ρ(Z_i, Z_j)` of `Z_i`?
pub fn ball_indicator(d: &DistanceMatrix, i: usize, j: usize, u: usize) -> Result<bool> {
    let n = d.len();
    if let Some(&index) = [i, j, u].iter().find(|&&x| x >= n) {
        return Err(CpdError::IndexOutOfRange { index, len: n });
    }
    Ok(d.get(i, u) <= d.get(i, j))
}

fn check_split(segment: Segment, m: usize) -> Result<()> {
    if m <= segment.start || m >= segment.end {
        return Err(CpdError::invalid_input(format!(
            "split {m} leaves an empty side in segment ({}, {}]",
            segment.start, segment.end
        )));
    }
    Ok(())
}

/// Direct triple-loop evaluation of `V` for the split `(start, m] | (m, end]`.
///
/// Floating-point throughout with no shortcuts; used as the reference the
/// fast paths are tested against.
pub fn detection_stat_naive(d: &DistanceMatrix, segment: Segment, m: usize) -> Result<f64> {
    segment.check_within(d)?;
    check_split(segment, m)?;
    let (s, e) = (segment.start, segment.end);
    let left = (m - s) as f64;
    let right = (e - m) as f64;
    let n = (e - s) as f64;

    let mut total = 0.0;
    for i in s..e {
        for j in s..e {
            let radius = d.get(i, j);
            let c1 = (s..m).filter(|&u| d.get(i, u) <= radius).count() as f64 / left;
            let c2 = (m..e).filter(|&v| d.get(i, v) <= radius).count() as f64 / right;
            total += (c1 - c2) * (c1 - c2);
        }
    }
    Ok(left * right / (n * n * n) * total)
}

/// Per-center orderings of within-segment distances.
///
/// For each center `i` (segment-relative), `order(i)` lists the segment
/// points by ascending distance from `Z_i`, ties by index. Points at equal
/// distance form a tie group, which is what closed-ball counting needs.
#[derive(Clone, Debug)]
pub struct RankTable {
    n: usize,
    order: Vec<u32>,
    rank: Vec<u32>,
    group_start: Vec<u32>,
    group_end: Vec<u32>,
}

impl RankTable {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn order(&self, i: usize) -> &[u32] {
        &self.order[i * self.n..(i + 1) * self.n]
    }

    pub fn rank(&self, i: usize, j: usize) -> usize {
        self.rank[i * self.n + j] as usize
    }

    /// First position in `order(i)` at the same distance as `j`.
    #[inline]
    fn tie_start(&self, i: usize, j: usize) -> usize {
        self.group_start[i * self.n + self.rank[i * self.n + j] as usize] as usize
    }

    /// Number of segment points inside the closed ball centered at `Z_i`
    /// through `Z_j` (both segment-relative).
    pub fn ball_count(&self, i: usize, j: usize) -> usize {
        self.group_end[i * self.n + self.rank[i * self.n + j] as usize] as usize
    }
}

pub fn build_rank_table(d: &DistanceMatrix, segment: Segment) -> Result<RankTable> {
    segment.check_within(d)?;
    let n = segment.len();
    if n > u32::MAX as usize {
        return Err(CpdError::invalid_input("segment too long for rank table"));
    }
    let mut order = vec![0u32; n * n];
    let mut rank = vec![0u32; n * n];
    let mut group_start = vec![0u32; n * n];
    let mut group_end = vec![0u32; n * n];

    // finite nonnegative distances (with -0 folded into +0) sort like their
    // bit patterns; the low word breaks ties by index
    let mut keys: Vec<u128> = Vec::with_capacity(n);
    let mut idx: Vec<u32> = Vec::with_capacity(n);
    for i in 0..n {
        let row = &d.row(segment.start + i)[segment.start..segment.end];
        keys.clear();
        keys.extend(
            row.iter()
                .enumerate()
                .map(|(j, x)| (u128::from((x + 0.0).to_bits()) << 32) | j as u128),
        );
        keys.sort_unstable();
        idx.clear();
        idx.extend(keys.iter().map(|&k| k as u32));

        let base = i * n;
        let mut pos = 0;
        while pos < n {
            let dist = row[idx[pos] as usize];
            let mut end = pos + 1;
            while end < n && row[idx[end] as usize] == dist {
                end += 1;
            }
            for p in pos..end {
                group_start[base + p] = pos as u32;
                group_end[base + p] = end as u32;
            }
            pos = end;
        }
        for (p, &j) in idx.iter().enumerate() {
            order[base + p] = j;
            rank[base + j as usize] = p as u32;
        }
    }

    Ok(RankTable {
        n,
        order,
        rank,
        group_start,
        group_end,
    })
}

fn exact_stat(l: u64, p: u64, s1: u64, s2: u64, s3: u64) -> StatValue {
    let (l, p) = (l as i128, p as i128);
    let num = l * l * s1 as i128 - 2 * l * p * s2 as i128 + p * p * s3 as i128;
    debug_assert!(num >= 0);
    let q = l - p;
    StatValue::new(num.max(0) as u128, (l * l * l * p * q) as u128)
}

/// `V` for a single split using the rank-count route; `O(n² log n)`.
pub fn detection_stat(d: &DistanceMatrix, segment: Segment, m: usize) -> Result<f64> {
    Ok(detection_stat_exact(d, segment, m)?.to_f64())
}

pub(crate) fn detection_stat_exact(
    d: &DistanceMatrix,
    segment: Segment,
    m: usize,
) -> Result<StatValue> {
    segment.check_within(d)?;
    check_split(segment, m)?;
    let (s, e) = (segment.start, segment.end);
    let l = (e - s) as u64;
    let p = (m - s) as u64;

    let mut s1: u64 = 0;
    let mut s2: u64 = 0;
    let mut s3: u64 = 0;
    let mut sorted: Vec<(f64, bool)> = Vec::with_capacity(e - s);
    for i in s..e {
        let row = d.row(i);
        sorted.clear();
        sorted.extend((s..e).map(|u| (row[u], u < m)));
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));

        let (mut left, mut all) = (0u64, 0u64);
        let mut pos = 0;
        while pos < sorted.len() {
            let dist = sorted[pos].0;
            let mut end = pos;
            while end < sorted.len() && sorted[end].0 == dist {
                left += u64::from(sorted[end].1);
                end += 1;
            }
            all += (end - pos) as u64;
            let g = (end - pos) as u64;
            s1 += g * left * left;
            s2 += g * left * all;
            s3 += g * all * all;
            pos = end;
        }
    }
    Ok(exact_stat(l, p, s1, s2, s3))
}

fn check_scan_args(
    d: &DistanceMatrix,
    segment: Segment,
    min_seg: usize,
    stride: usize,
) -> Result<()> {
    segment.check_within(d)?;
    if min_seg == 0 {
        return Err(CpdError::invalid_input("min_seg must be >= 1"));
    }
    if stride == 0 {
        return Err(CpdError::invalid_input("stride must be >= 1"));
    }
    if segment.len() < 2 * min_seg {
        return Err(CpdError::SegmentTooShort {
            len: segment.len(),
            min_seg,
        });
    }
    Ok(())
}

/// Evaluates every admissible `(m, l)` (segment-relative, `min_seg <= m <= l - min_seg`)
/// accepted by the two filters, in order of increasing `l` then `m`.
///
/// Sweeps `k = 0..=n`, holding the counts `a_ij(k)` of points `u < k` in each
/// ball. At step `k` the counts serve as the left counts for `m = k` (giving
/// `Σa²` for every `l`) and as the prefix counts `A_ij` for `l = k` (giving
/// `ΣA²` and, through per-center suffix sums, `Σa·A` for every `m < k`).
fn scan_surface<FM, FL, V>(rt: &RankTable, min_seg: usize, m_ok: FM, l_ok: FL, mut visit: V)
where
    FM: Fn(usize) -> bool,
    FL: Fn(usize) -> bool,
    V: FnMut(usize, usize, StatValue),
{
    let n = rt.n;
    assert!(
        n <= u16::MAX as usize,
        "segment of {n} points is too long to scan"
    );
    let m_wanted = |m: usize| m >= min_seg && m + min_seg <= n && m_ok(m);
    let l_wanted = |l: usize| l >= 2 * min_seg && l <= n && l_ok(l);

    // tie_t[u * n + i]: first position in order(i) at distance ρ(Z_i, Z_u)
    let mut tie_t = vec![0u32; n * n];
    for i in 0..n {
        for u in 0..n {
            tie_t[u * n + i] = rt.tie_start(i, u) as u32;
        }
    }

    // rank16[i * n + j]: position of j in order(i)
    let rank16: Vec<u16> = rt.rank.iter().map(|&r| r as u16).collect();
    // counts[i * n + j] = a_ij(k); admitting point k adds the indicator
    // `rank(i, j) >= tie_start(i, k)` to every entry of row i
    let mut counts = vec![0u16; n * n];
    // by_max[t] = Σ a_ij(k)² over pairs with max(i, j) = t, so that
    // Σ_{i,j<l} a_ij(k)² is a prefix sum of by_max
    let mut by_max = vec![0u64; n];
    let width = n + 1;
    // s1[m * width + l] = Σ_{i,j<l} a_ij(m)²
    let mut s1 = vec![0u64; width * width];
    let mut suffix = vec![0u32; n * width];

    for k in 0..=n {
        let as_m = m_wanted(k);
        let as_l = l_wanted(k);

        let mut s3 = 0u64;
        if as_m || as_l {
            let mut acc = 0u64;
            for (t, &h) in by_max.iter().enumerate() {
                acc += h;
                let size = t + 1;
                if as_m && size >= k + min_seg && l_wanted(size) {
                    s1[k * width + size] = acc;
                }
                if size == k {
                    s3 = acc;
                }
            }
        }

        if as_l {
            // suffix[i][pos] = Σ_{pos' >= pos, order(i)[pos'] < k} A_i,order(i)[pos']
            for i in 0..k {
                let order = rt.order(i);
                let row = &counts[i * n..(i + 1) * n];
                let suf = &mut suffix[i * width..(i + 1) * width];
                let mut run = 0u32;
                suf[n] = 0;
                for pos in (0..n).rev() {
                    let j = order[pos] as usize;
                    run += u32::from(row[j]) * u32::from(j < k);
                    suf[pos] = run;
                }
            }
            let mut s2 = 0u64;
            for m in 0..=(k - min_seg) {
                if m_wanted(m) {
                    let value = exact_stat(k as u64, m as u64, s1[m * width + k], s2, s3);
                    visit(m, k, value);
                }
                // moving point m to the left side
                let ties = &tie_t[m * n..m * n + k];
                let mut add = 0u64;
                for (i, &t) in ties.iter().enumerate() {
                    add += u64::from(suffix[i * width + t as usize]);
                }
                s2 += add;
            }
        }

        if k < n {
            let ties = &tie_t[k * n..(k + 1) * n];
            for (i, ((row, ranks), &from)) in counts
                .chunks_exact_mut(n)
                .zip(rank16.chunks_exact(n))
                .zip(ties)
                .enumerate()
            {
                let from = from as u16;
                let (low, high) = row.split_at_mut(i);
                let mut own = 0u32;
                for (c, &r) in low.iter_mut().zip(&ranks[..i]) {
                    let inside = u16::from(r >= from);
                    own += u32::from(inside) * (2 * u32::from(*c) + 1);
                    *c += inside;
                }
                for ((c, &r), h) in high.iter_mut().zip(&ranks[i..]).zip(&mut by_max[i..]) {
                    let inside = u16::from(r >= from);
                    *h += u64::from(u32::from(inside) * (2 * u32::from(*c) + 1));
                    *c += inside;
                }
                by_max[i] += u64::from(own);
            }
        }
    }
}

/// Coarse grid for a given stride: `m` stepping up from `min_seg`, `l`
/// stepping down from the segment end.
fn on_grid_m(m: usize, min_seg: usize, stride: usize) -> bool {
    (m - min_seg) % stride == 0
}

fn on_grid_l(l: usize, n: usize, stride: usize) -> bool {
    (n - l) % stride == 0
}

fn best_over<FM, FL>(
    rt: &RankTable,
    min_seg: usize,
    m_ok: FM,
    l_ok: FL,
) -> Option<(usize, usize, StatValue)>
where
    FM: Fn(usize) -> bool,
    FL: Fn(usize) -> bool,
{
    let mut best: Option<(usize, usize, StatValue)> = None;
    scan_surface(rt, min_seg, m_ok, l_ok, |m, l, v| {
        // visited by increasing l then m, so strict improvement keeps the
        // smallest (l, m) among ties
        if best.is_none_or(|(_, _, b)| v > b) {
            best = Some((m, l, v));
        }
    });
    best
}

/// Exact argmax of `V` over admissible `(M, L)` within `segment`.
///
/// Admissible means `start + min_seg <= M <= L - min_seg` and `L <= end`.
/// With `stride > 1` the grid is coarsened and the best coarse point is
/// refined exhaustively within `±(stride - 1)`. Ties go to the smallest `L`,
/// then the smallest `M`.
pub fn segment_scan(
    d: &DistanceMatrix,
    segment: Segment,
    min_seg: usize,
    stride: usize,
) -> Result<SegmentBest> {
    check_scan_args(d, segment, min_seg, stride)?;
    let rt = build_rank_table(d, segment)?;
    let n = rt.n;

    let (mut m, mut l, mut value) = best_over(
        &rt,
        min_seg,
        |m| on_grid_m(m, min_seg, stride),
        |l| on_grid_l(l, n, stride),
    )
    .expect("a segment of length >= 2*min_seg has an admissible split");

    if stride > 1 {
        let (cm, cl) = (m, l);
        let near = |x: usize, c: usize| x.abs_diff(c) < stride;
        if let Some(refined) = best_over(&rt, min_seg, |x| near(x, cm), |x| near(x, cl)) {
            (m, l, value) = refined;
        }
    }

    Ok(SegmentBest {
        m_hat: segment.start + m,
        l_hat: segment.start + l,
        value: value.to_f64(),
        exact: value,
    })
}

/// One point of the scan surface, in absolute indices.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProfilePoint {
    pub m: usize,
    pub l: usize,
    pub value: f64,
}

/// Every coarse-grid point of the scan surface (no refinement).
pub fn scan_profile(
    d: &DistanceMatrix,
    segment: Segment,
    min_seg: usize,
    stride: usize,
) -> Result<Vec<ProfilePoint>> {
    check_scan_args(d, segment, min_seg, stride)?;
    let rt = build_rank_table(d, segment)?;
    let n = rt.n;
    let mut points = Vec::new();
    scan_surface(
        &rt,
        min_seg,
        |m| on_grid_m(m, min_seg, stride),
        |l| on_grid_l(l, n, stride),
        |m, l, v| {
            points.push(ProfilePoint {
                m: segment.start + m,
                l: segment.start + l,
                value: v.to_f64(),
            })
        },
    );
    Ok(points)
}
