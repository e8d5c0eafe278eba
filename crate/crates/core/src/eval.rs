// SPDX-License-Identifier: MIT OR Apache-2.0

//! Agreement between an estimated and a true segmentation.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{CpdError, Result};

/// Segment label of every time point.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    pub labels: Vec<usize>,
}

impl Partition {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

fn check_changepoints(cps: &[usize], t: usize) -> Result<()> {
    for (k, &c) in cps.iter().enumerate() {
        if c == 0 || c >= t {
            return Err(CpdError::invalid_input(format!(
                "change point {c} outside (0, {t})"
            )));
        }
        if k > 0 && cps[k - 1] >= c {
            return Err(CpdError::invalid_input(
                "change points must be strictly increasing",
            ));
        }
    }
    Ok(())
}

/// Labels time `t = 1..=T` by the number of change points below `t`.
pub fn partition_from_changepoints(cps: &[usize], t: usize) -> Result<Partition> {
    check_changepoints(cps, t)?;
    let mut labels = Vec::with_capacity(t);
    let mut seen = 0;
    for time in 1..=t {
        while seen < cps.len() && cps[seen] < time {
            seen += 1;
        }
        labels.push(seen);
    }
    Ok(Partition { labels })
}

fn pairs(x: u64) -> f64 {
    (x as f64) * (x.saturating_sub(1) as f64) / 2.0
}

/// Σ C(n_ij, 2) over the contingency table, and the same over both margins.
fn contingency_sums(p1: &Partition, p2: &Partition) -> Result<(f64, f64, f64, f64)> {
    if p1.len() != p2.len() {
        return Err(CpdError::invalid_input(format!(
            "partitions have different lengths ({} and {})",
            p1.len(),
            p2.len()
        )));
    }
    if p1.len() < 2 {
        return Err(CpdError::invalid_input(
            "partitions need at least two points",
        ));
    }
    let mut cells: HashMap<(usize, usize), u64> = HashMap::new();
    let mut rows: HashMap<usize, u64> = HashMap::new();
    let mut cols: HashMap<usize, u64> = HashMap::new();
    for (&a, &b) in p1.labels.iter().zip(&p2.labels) {
        *cells.entry((a, b)).or_default() += 1;
        *rows.entry(a).or_default() += 1;
        *cols.entry(b).or_default() += 1;
    }
    let sum = |m: &mut dyn Iterator<Item = u64>| m.map(pairs).sum::<f64>();
    Ok((
        sum(&mut cells.into_values()),
        sum(&mut rows.into_values()),
        sum(&mut cols.into_values()),
        pairs(p1.len() as u64),
    ))
}

/// Fraction of point pairs on which the partitions agree (same segment in
/// both, or different segments in both).
pub fn rand_index(p1: &Partition, p2: &Partition) -> Result<f64> {
    let (cells, rows, cols, total) = contingency_sums(p1, p2)?;
    Ok((total + 2.0 * cells - rows - cols) / total)
}

/// Rand index corrected for chance under the permutation model.
pub fn adjusted_rand_index(p1: &Partition, p2: &Partition) -> Result<f64> {
    let (cells, rows, cols, total) = contingency_sums(p1, p2)?;
    let expected = rows * cols / total;
    let max = (rows + cols) / 2.0;
    let denom = max - expected;
    if denom == 0.0 {
        return Ok(if same_grouping(p1, p2) { 1.0 } else { 0.0 });
    }
    Ok((cells - expected) / denom)
}

fn same_grouping(p1: &Partition, p2: &Partition) -> bool {
    let mut fwd = HashMap::new();
    let mut back = HashMap::new();
    p1.labels
        .iter()
        .zip(&p2.labels)
        .all(|(a, b)| *fwd.entry(a).or_insert(b) == b && *back.entry(b).or_insert(a) == a)
}

fn check_sentinels(set: &[usize], t: usize) -> Result<()> {
    if !set.contains(&0) || !set.contains(&t) {
        return Err(CpdError::invalid_input(format!(
            "change-point sets must contain the sentinels 0 and {t}"
        )));
    }
    if let Some(&x) = set.iter().find(|&&x| x > t) {
        return Err(CpdError::invalid_input(format!(
            "change point {x} exceeds {t}"
        )));
    }
    Ok(())
}

fn directed(from: &[usize], to: &[usize]) -> usize {
    from.iter()
        .map(|&b| to.iter().map(|&a| a.abs_diff(b)).min().unwrap_or(0))
        .max()
        .unwrap_or(0)
}

/// `(over, under)`: the largest distance from a true change point to the
/// nearest estimate, and from an estimate to the nearest true change point.
/// Both sets must include the sentinels `0` and `t`.
pub fn segmentation_errors(
    truth: &[usize],
    estimate: &[usize],
    t: usize,
) -> Result<(usize, usize)> {
    check_sentinels(truth, t)?;
    check_sentinels(estimate, t)?;
    Ok((directed(truth, estimate), directed(estimate, truth)))
}

pub fn hausdorff(truth: &[usize], estimate: &[usize], t: usize) -> Result<usize> {
    let (over, under) = segmentation_errors(truth, estimate, t)?;
    Ok(over.max(under))
}

/// `cps` with the sentinels `0` and `t` added.
pub fn with_sentinels(cps: &[usize], t: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(cps.len() + 2);
    out.push(0);
    out.extend(cps.iter().copied().filter(|&c| c != 0 && c != t));
    out.push(t);
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Evaluation {
    pub rand_index: f64,
    pub adjusted_rand_index: f64,
    pub over_segmentation: usize,
    pub under_segmentation: usize,
    pub hausdorff: usize,
}

/// All criteria for change-point sets without sentinels.
pub fn evaluate(truth: &[usize], estimate: &[usize], t: usize) -> Result<Evaluation> {
    let p_true = partition_from_changepoints(truth, t)?;
    let p_hat = partition_from_changepoints(estimate, t)?;
    let (over, under) =
        segmentation_errors(&with_sentinels(truth, t), &with_sentinels(estimate, t), t)?;
    Ok(Evaluation {
        rand_index: rand_index(&p_true, &p_hat)?,
        adjusted_rand_index: adjusted_rand_index(&p_true, &p_hat)?,
        over_segmentation: over,
        under_segmentation: under,
        hausdorff: over.max(under),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn part(labels: &[usize]) -> Partition {
        Partition {
            labels: labels.to_vec(),
        }
    }

    fn brute_rand(a: &[usize], b: &[usize]) -> f64 {
        let n = a.len();
        let mut agree = 0;
        for i in 0..n {
            for j in i + 1..n {
                if (a[i] == a[j]) == (b[i] == b[j]) {
                    agree += 1;
                }
            }
        }
        agree as f64 / (n * (n - 1) / 2) as f64
    }

    // contingency table built by nested loops over label values
    fn brute_ari(a: &[usize], b: &[usize]) -> f64 {
        let ka = a.iter().max().unwrap() + 1;
        let kb = b.iter().max().unwrap() + 1;
        let mut table = vec![vec![0u64; kb]; ka];
        for (&x, &y) in a.iter().zip(b) {
            table[x][y] += 1;
        }
        let c2 = |x: u64| (x * x.saturating_sub(1)) as f64 / 2.0;
        let index: f64 = table.iter().flatten().map(|&x| c2(x)).sum();
        let ra: f64 = table.iter().map(|r| c2(r.iter().sum())).sum();
        let rb: f64 = (0..kb).map(|j| c2(table.iter().map(|r| r[j]).sum())).sum();
        let total = c2(a.len() as u64);
        let expected = ra * rb / total;
        (index - expected) / ((ra + rb) / 2.0 - expected)
    }

    #[test]
    fn partition_examples() {
        assert_eq!(
            partition_from_changepoints(&[], 4).unwrap().labels,
            vec![0, 0, 0, 0]
        );
        assert_eq!(
            partition_from_changepoints(&[2], 4).unwrap().labels,
            vec![0, 0, 1, 1]
        );
        assert_eq!(
            partition_from_changepoints(&[1, 3], 4).unwrap().labels,
            vec![0, 1, 1, 2]
        );
        assert!(partition_from_changepoints(&[4], 4).is_err());
        assert!(partition_from_changepoints(&[0], 4).is_err());
        assert!(partition_from_changepoints(&[3, 2], 4).is_err());
    }

    #[test]
    fn rand_index_examples() {
        let p = part(&[0, 0, 1, 1]);
        assert_eq!(rand_index(&p, &p).unwrap(), 1.0);
        assert!((rand_index(&p, &part(&[0, 1, 0, 1])).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(
            rand_index(&part(&[0, 0, 0]), &part(&[0, 1, 2])).unwrap(),
            0.0
        );
        assert!(rand_index(&p, &part(&[0, 0, 1])).is_err());
    }

    #[test]
    fn ari_examples() {
        let p = part(&[0, 0, 1, 1, 2]);
        assert_eq!(adjusted_rand_index(&p, &p).unwrap(), 1.0);
        let a = [1, 1, 1, 2, 2, 2];
        let b = [1, 1, 1, 1, 2, 2];
        let got = adjusted_rand_index(&part(&a), &part(&b)).unwrap();
        assert!((got - brute_ari(&a, &b)).abs() < 1e-15);
        // cells 3,1,2; margins 3,3 and 4,2
        assert!((got - (4.0 - 42.0 / 15.0) / (6.5 - 42.0 / 15.0)).abs() < 1e-12);
        // both trivial
        assert_eq!(
            adjusted_rand_index(&part(&[0, 0, 0]), &part(&[5, 5, 5])).unwrap(),
            1.0
        );
    }

    #[test]
    fn ari_of_independent_labelings_is_near_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let a: Vec<usize> = (0..2000).map(|_| rng.random_range(0..4)).collect();
        let b: Vec<usize> = (0..2000).map(|_| rng.random_range(0..4)).collect();
        assert!(adjusted_rand_index(&part(&a), &part(&b)).unwrap().abs() < 0.05);
    }

    #[test]
    fn zeta_examples() {
        assert_eq!(
            segmentation_errors(&[0, 50, 120], &[0, 50, 120], 120).unwrap(),
            (0, 0)
        );
        assert_eq!(
            segmentation_errors(&[0, 50, 120], &[0, 40, 120], 120).unwrap(),
            (10, 10)
        );
        assert_eq!(
            segmentation_errors(&[0, 60, 120], &[0, 30, 60, 120], 120).unwrap(),
            (0, 30)
        );
        assert_eq!(hausdorff(&[0, 60, 120], &[0, 60, 120], 120).unwrap(), 0);
        assert_eq!(hausdorff(&[0, 50, 120], &[0, 40, 120], 120).unwrap(), 10);
        assert_eq!(
            hausdorff(&[0, 60, 120], &[0, 30, 60, 120], 120).unwrap(),
            30
        );
        assert!(segmentation_errors(&[50, 120], &[0, 120], 120).is_err());
        assert!(segmentation_errors(&[0, 50], &[0, 120], 120).is_err());
    }

    #[test]
    fn evaluate_combines_criteria() {
        let e = evaluate(&[40, 80], &[40, 80], 120).unwrap();
        assert_eq!(
            (e.rand_index, e.adjusted_rand_index, e.hausdorff),
            (1.0, 1.0, 0)
        );
        let e = evaluate(&[50], &[40], 120).unwrap();
        assert_eq!(
            (e.over_segmentation, e.under_segmentation, e.hausdorff),
            (10, 10, 10)
        );
    }

    fn labels(max_len: usize) -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
        (2..max_len).prop_flat_map(|n| {
            (
                prop::collection::vec(0..4usize, n),
                prop::collection::vec(0..4usize, n),
            )
        })
    }

    fn cp_set() -> impl Strategy<Value = (Vec<usize>, Vec<usize>, usize)> {
        (5usize..60).prop_flat_map(|t| {
            (
                prop::collection::btree_set(1..t, 0..5),
                prop::collection::btree_set(1..t, 0..5),
                Just(t),
            )
                .prop_map(|(a, b, t)| (a.into_iter().collect(), b.into_iter().collect(), t))
        })
    }

    proptest! {
        #[test]
        fn rand_matches_pair_enumeration((a, b) in labels(30)) {
            let ri = rand_index(&part(&a), &part(&b)).unwrap();
            prop_assert!((ri - brute_rand(&a, &b)).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&ri));
            prop_assert_eq!(ri, rand_index(&part(&b), &part(&a)).unwrap());
        }

        #[test]
        fn ari_symmetric_and_relabel_invariant((a, b) in labels(30), shift in 1usize..7) {
            let ari = adjusted_rand_index(&part(&a), &part(&b)).unwrap();
            prop_assert!(ari <= 1.0 + 1e-12);
            prop_assert!((ari - adjusted_rand_index(&part(&b), &part(&a)).unwrap()).abs() < 1e-12);
            let relabeled: Vec<usize> = a.iter().map(|&x| (x + shift) * 3).collect();
            prop_assert!((ari - adjusted_rand_index(&part(&relabeled), &part(&b)).unwrap()).abs() < 1e-12);
            let identical = same_grouping(&part(&a), &part(&b));
            prop_assert_eq!(identical, (ari - 1.0).abs() < 1e-12);
        }

        #[test]
        fn hausdorff_symmetric_and_zero_iff_equal((a, b, t) in cp_set()) {
            let (sa, sb) = (with_sentinels(&a, t), with_sentinels(&b, t));
            let h = hausdorff(&sa, &sb, t).unwrap();
            prop_assert_eq!(h, hausdorff(&sb, &sa, t).unwrap());
            prop_assert_eq!(h == 0, a == b);
            let pa = partition_from_changepoints(&a, t).unwrap();
            prop_assert_eq!(pa.labels.windows(2).filter(|w| w[0] != w[1]).count(), a.len());
        }
    }
}
