//! Clustering agreement metrics: best-assignment accuracy, normalized mutual
//! information, and pairwise F-score / precision. All are invariant under
//! relabeling of either input.

use std::collections::BTreeMap;

use ndarray::Array2;
use pathfinding::kuhn_munkres::kuhn_munkres;
use pathfinding::matrix::Matrix;
use thiserror::Error;

/// Errors raised by metric computations.
#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("label vectors differ in length: {truth} vs {pred}")]
    LengthMismatch { truth: usize, pred: usize },
    #[error("label vectors must be nonempty")]
    Empty,
    #[error("pairwise metrics need at least two samples, got {0}")]
    TooFewSamples(usize),
}

/// Contingency table between two labelings: entry `(a, b)` counts samples
/// with true class `a` and predicted class `b`. Class ids are compacted in
/// sorted label order, so the table is independent of label naming.
#[derive(Debug, Clone)]
pub struct Contingency {
    table: Array2<u64>,
    n: usize,
}

fn compact(labels: &[usize]) -> Vec<usize> {
    let ids: BTreeMap<usize, usize> = {
        let mut sorted: Vec<usize> = labels.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        sorted
            .into_iter()
            .enumerate()
            .map(|(i, l)| (l, i))
            .collect()
    };
    labels.iter().map(|l| ids[l]).collect()
}

impl Contingency {
    pub fn from_labels(truth: &[usize], pred: &[usize]) -> Result<Self, MetricsError> {
        if truth.len() != pred.len() {
            return Err(MetricsError::LengthMismatch {
                truth: truth.len(),
                pred: pred.len(),
            });
        }
        if truth.is_empty() {
            return Err(MetricsError::Empty);
        }
        let t = compact(truth);
        let p = compact(pred);
        let k_t = t.iter().max().unwrap() + 1;
        let k_p = p.iter().max().unwrap() + 1;
        let mut table = Array2::zeros((k_t, k_p));
        for (&a, &b) in t.iter().zip(&p) {
            table[[a, b]] += 1;
        }
        Ok(Self {
            table,
            n: truth.len(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn table(&self) -> &Array2<u64> {
        &self.table
    }
}

/// Best-bijection clustering accuracy: the matched fraction under the
/// optimal one-to-one assignment between predicted and true classes,
/// computed on the zero-padded square contingency table.
pub fn accuracy(truth: &[usize], pred: &[usize]) -> Result<f64, MetricsError> {
    let ct = Contingency::from_labels(truth, pred)?;
    let (k_t, k_p) = ct.table.dim();
    let k = k_t.max(k_p);
    let rows = (0..k).map(|a| {
        (0..k)
            .map(|b| {
                if a < k_t && b < k_p {
                    ct.table[[a, b]] as i64
                } else {
                    0
                }
            })
            .collect::<Vec<i64>>()
    });
    let weights = Matrix::from_rows(rows).expect("rows have equal length");
    let (matched, _) = kuhn_munkres(&weights);
    Ok(matched as f64 / ct.n as f64)
}

/// Normalized mutual information `I(U;V)/√(H(U)·H(V))` with natural-log
/// entropies. Two trivial single-cluster partitions agree perfectly (1.0);
/// if exactly one partition is trivial there is no shared information (0.0).
pub fn nmi(truth: &[usize], pred: &[usize]) -> Result<f64, MetricsError> {
    let ct = Contingency::from_labels(truth, pred)?;
    let n = ct.n as f64;
    let row_sums: Vec<u64> = ct.table.rows().into_iter().map(|r| r.sum()).collect();
    let col_sums: Vec<u64> = ct.table.columns().into_iter().map(|c| c.sum()).collect();
    let entropy = |sums: &[u64]| -> f64 {
        sums.iter()
            .filter(|&&s| s > 0)
            .map(|&s| {
                let p = s as f64 / n;
                -p * p.ln()
            })
            .sum()
    };
    let h_t = entropy(&row_sums);
    let h_p = entropy(&col_sums);
    if h_t == 0.0 && h_p == 0.0 {
        return Ok(1.0);
    }
    if h_t == 0.0 || h_p == 0.0 {
        return Ok(0.0);
    }
    let mut mi = 0.0;
    for (a, &ra) in row_sums.iter().enumerate() {
        for (b, &cb) in col_sums.iter().enumerate() {
            let nab = ct.table[[a, b]];
            if nab > 0 {
                let p = nab as f64 / n;
                mi += p * (n * nab as f64 / (ra as f64 * cb as f64)).ln();
            }
        }
    }
    // Roundoff can push the ratio a few ulps outside [0, 1].
    Ok((mi / (h_t * h_p).sqrt()).clamp(0.0, 1.0))
}

fn pairs(c: u64) -> u64 {
    c * c.saturating_sub(1) / 2
}

/// Pairwise F-score and precision over all unordered sample pairs: a true
/// positive is a pair grouped together in both labelings. Ratios with a zero
/// denominator are 1 (no pairs to get wrong), except F, which is 0 when
/// precision + recall is 0.
pub fn pairwise_f_precision(truth: &[usize], pred: &[usize]) -> Result<(f64, f64), MetricsError> {
    let ct = Contingency::from_labels(truth, pred)?;
    if ct.n < 2 {
        return Err(MetricsError::TooFewSamples(ct.n));
    }
    let tp: u64 = ct.table.iter().map(|&c| pairs(c)).sum();
    let same_truth: u64 = ct.table.rows().into_iter().map(|r| pairs(r.sum())).sum();
    let same_pred: u64 = ct.table.columns().into_iter().map(|c| pairs(c.sum())).sum();
    let ratio = |num: u64, denom: u64| {
        if denom == 0 {
            1.0
        } else {
            num as f64 / denom as f64
        }
    };
    let precision = ratio(tp, same_pred);
    let recall = ratio(tp, same_truth);
    let f = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok((f, precision))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn accuracy_identical_and_renamed_partitions() {
        let t = vec![0, 0, 1, 1];
        assert_eq!(accuracy(&t, &t).unwrap(), 1.0);
        assert_eq!(accuracy(&t, &[1, 1, 0, 0]).unwrap(), 1.0);
    }

    #[test]
    fn accuracy_half_matched() {
        assert_eq!(accuracy(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap(), 0.5);
    }

    #[test]
    fn accuracy_rectangular_tables() {
        // More predicted clusters than true ones and vice versa.
        assert_eq!(accuracy(&[0, 0, 0, 1], &[0, 1, 2, 3]).unwrap(), 0.5);
        assert_eq!(accuracy(&[0, 1, 2, 3], &[0, 0, 0, 1]).unwrap(), 0.5);
    }

    #[test]
    fn nmi_examples() {
        assert_eq!(nmi(&[0, 0, 1, 1], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert!(nmi(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap().abs() < 1e-12);
    }

    #[test]
    fn nmi_trivial_partitions() {
        assert_eq!(nmi(&[0, 0, 0], &[5, 5, 5]).unwrap(), 1.0);
        assert_eq!(nmi(&[0, 0, 0], &[0, 1, 2]).unwrap(), 0.0);
        assert_eq!(nmi(&[0, 1, 2], &[7, 7, 7]).unwrap(), 0.0);
    }

    #[test]
    fn nmi_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let a: Vec<usize> = (0..12).map(|_| rng.gen_range(0..3)).collect();
            let b: Vec<usize> = (0..12).map(|_| rng.gen_range(0..4)).collect();
            let ab = nmi(&a, &b).unwrap();
            let ba = nmi(&b, &a).unwrap();
            assert!((ab - ba).abs() < 1e-12);
        }
    }

    #[test]
    fn pairwise_examples() {
        let t = vec![0, 0, 1, 1];
        assert_eq!(pairwise_f_precision(&t, &t).unwrap(), (1.0, 1.0));
        assert_eq!(pairwise_f_precision(&t, &[0, 1, 0, 1]).unwrap(), (0.0, 0.0));
        // All-one-cluster prediction against two balanced classes: TP = 2 of
        // the 6 pairs, recall = 1.
        let (f, p) = pairwise_f_precision(&t, &[0, 0, 0, 0]).unwrap();
        assert!((p - 2.0 / 6.0).abs() < 1e-12);
        assert!((f - 0.5).abs() < 1e-12);
    }

    #[test]
    fn pairwise_singleton_partitions_agree() {
        let (f, p) = pairwise_f_precision(&[0, 1, 2], &[2, 0, 1]).unwrap();
        assert_eq!((f, p), (1.0, 1.0));
    }

    #[test]
    fn metrics_are_relabeling_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..30 {
            let t: Vec<usize> = (0..10).map(|_| rng.gen_range(0..3)).collect();
            let p: Vec<usize> = (0..10).map(|_| rng.gen_range(0..3)).collect();
            // Rename labels through an arbitrary injective map.
            let rename = |v: &[usize]| -> Vec<usize> { v.iter().map(|&l| 7 * l + 3).collect() };
            assert_eq!(
                accuracy(&t, &p).unwrap(),
                accuracy(&rename(&t), &rename(&p)).unwrap()
            );
            assert!((nmi(&t, &p).unwrap() - nmi(&rename(&t), &rename(&p)).unwrap()).abs() < 1e-12);
            assert_eq!(
                pairwise_f_precision(&t, &p).unwrap(),
                pairwise_f_precision(&rename(&t), &rename(&p)).unwrap()
            );
        }
    }

    #[test]
    fn accuracy_matches_exhaustive_bijection_search() {
        fn brute_force(truth: &[usize], pred: &[usize]) -> f64 {
            let ct = Contingency::from_labels(truth, pred).unwrap();
            let (k_t, k_p) = ct.table().dim();
            let k = k_t.max(k_p);
            let mut cols: Vec<usize> = (0..k).collect();
            let mut best = 0;
            // Heap's algorithm over all column assignments.
            fn permute(cols: &mut Vec<usize>, size: usize, ct: &Array2<u64>, best: &mut u64) {
                if size == 1 {
                    let (k_t, k_p) = ct.dim();
                    let score: u64 = cols
                        .iter()
                        .enumerate()
                        .filter(|&(a, &b)| a < k_t && b < k_p)
                        .map(|(a, &b)| ct[[a, b]])
                        .sum();
                    *best = (*best).max(score);
                    return;
                }
                for i in 0..size {
                    permute(cols, size - 1, ct, best);
                    if size.is_multiple_of(2) {
                        cols.swap(i, size - 1);
                    } else {
                        cols.swap(0, size - 1);
                    }
                }
            }
            permute(&mut cols, k, ct.table(), &mut best);
            best as f64 / ct.n() as f64
        }

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..40 {
            let n = rng.gen_range(2..9);
            let t: Vec<usize> = (0..n).map(|_| rng.gen_range(0..4)).collect();
            let p: Vec<usize> = (0..n).map(|_| rng.gen_range(0..4)).collect();
            assert_eq!(accuracy(&t, &p).unwrap(), brute_force(&t, &p));
        }
    }

    #[test]
    fn accuracy_lower_bound_via_padded_table_size() {
        // Averaging over all bijections shows the optimum matches at least
        // n / max(k_t, k_p) samples.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let n = rng.gen_range(2..16);
            let t: Vec<usize> = (0..n).map(|_| rng.gen_range(0..4)).collect();
            let p: Vec<usize> = (0..n).map(|_| rng.gen_range(0..4)).collect();
            let ct = Contingency::from_labels(&t, &p).unwrap();
            let k = ct.table().nrows().max(ct.table().ncols()) as f64;
            assert!(accuracy(&t, &p).unwrap() >= 1.0 / k - 1e-15);
        }
    }

    #[test]
    fn metrics_stay_in_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let n = rng.gen_range(2..20);
            let t: Vec<usize> = (0..n).map(|_| rng.gen_range(0..5)).collect();
            let p: Vec<usize> = (0..n).map(|_| rng.gen_range(0..5)).collect();
            let acc = accuracy(&t, &p).unwrap();
            let mi = nmi(&t, &p).unwrap();
            let (f, prec) = pairwise_f_precision(&t, &p).unwrap();
            for m in [acc, mi, f, prec] {
                assert!((0.0..=1.0).contains(&m), "metric {m} outside [0,1]");
            }
        }
    }

    #[test]
    fn errors_on_bad_input() {
        assert!(matches!(
            accuracy(&[0, 1], &[0]),
            Err(MetricsError::LengthMismatch { .. })
        ));
        assert!(matches!(accuracy(&[], &[]), Err(MetricsError::Empty)));
        assert!(matches!(
            pairwise_f_precision(&[0], &[0]),
            Err(MetricsError::TooFewSamples(1))
        ));
    }
}
