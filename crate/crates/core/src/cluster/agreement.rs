//! Adjusted Rand index and normalized mutual information between two hard partitions.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{CarolError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Agreement {
    pub ari: f64,
    pub nmi: f64,
}

fn choose2(n: usize) -> f64 {
    (n as f64) * (n as f64 - 1.0) / 2.0
}

fn relabel(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut map = HashMap::new();
    let dense = labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(*l).or_insert(next)
        })
        .collect();
    (dense, map.len())
}

/// Compares two labelings of the same elements (element `i` is `a[i]` vs `b[i]`).
///
/// NMI uses the arithmetic-mean normalization `2 I / (H_a + H_b)`. Degenerate
/// cases where a normalizer vanishes score 1.0 if the partitions coincide and
/// 0.0 otherwise.
pub fn partition_agreement(a: &[usize], b: &[usize]) -> Result<Agreement> {
    if a.len() != b.len() {
        return Err(CarolError::input(format!(
            "partitions cover different element sets ({} vs {} elements)",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(CarolError::input("partitions are empty"));
    }
    let n = a.len();
    let (a, ka) = relabel(a);
    let (b, kb) = relabel(b);
    let mut table = vec![vec![0usize; kb]; ka];
    for (&i, &j) in a.iter().zip(&b) {
        table[i][j] += 1;
    }
    let rows: Vec<usize> = table.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<usize> = (0..kb).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let same_partition = ka == kb
        && table.iter().all(|r| r.iter().filter(|&&c| c > 0).count() == 1)
        && (0..kb).all(|j| table.iter().filter(|r| r[j] > 0).count() == 1);

    let index: f64 = table.iter().flatten().map(|&c| choose2(c)).sum();
    let sum_a: f64 = rows.iter().map(|&c| choose2(c)).sum();
    let sum_b: f64 = cols.iter().map(|&c| choose2(c)).sum();
    let expected = sum_a * sum_b / choose2(n).max(f64::MIN_POSITIVE);
    let max_index = (sum_a + sum_b) / 2.0;
    let ari = if (max_index - expected).abs() < 1e-15 {
        if same_partition { 1.0 } else { 0.0 }
    } else {
        (index - expected) / (max_index - expected)
    };

    let nf = n as f64;
    let entropy = |counts: &[usize]| -> f64 {
        counts
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / nf;
                -p * p.ln()
            })
            .sum()
    };
    let (ha, hb) = (entropy(&rows), entropy(&cols));
    let mut mi = 0.0;
    for (i, row) in table.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c > 0 {
                let c = c as f64;
                mi += c / nf * (nf * c / (rows[i] as f64 * cols[j] as f64)).ln();
            }
        }
    }
    let nmi = if ha + hb <= 0.0 {
        if same_partition { 1.0 } else { 0.0 }
    } else {
        (2.0 * mi / (ha + hb)).clamp(0.0, 1.0)
    };
    Ok(Agreement { ari, nmi })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_and_relabeled() {
        let a = [0, 0, 1, 1, 2, 2, 2];
        let r = partition_agreement(&a, &a).unwrap();
        assert!((r.ari - 1.0).abs() < 1e-12 && (r.nmi - 1.0).abs() < 1e-12);
        let relabeled = [5, 5, 9, 9, 1, 1, 1];
        let r = partition_agreement(&a, &relabeled).unwrap();
        assert!((r.ari - 1.0).abs() < 1e-12 && (r.nmi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn crossed_pairs_give_minus_half() {
        // {a,b | c,d} vs {a,c | b,d}: contingency all ones, index 0, expected 2/3, max 2.
        let r = partition_agreement(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap();
        assert!((r.ari + 0.5).abs() < 1e-12, "{}", r.ari);
        assert!(r.nmi.abs() < 1e-12);
    }

    #[test]
    fn degenerate_single_cluster() {
        let r = partition_agreement(&[0, 0, 0], &[3, 3, 3]).unwrap();
        assert_eq!((r.ari, r.nmi), (1.0, 1.0));
        let r = partition_agreement(&[0, 0, 0], &[0, 1, 2]).unwrap();
        assert_eq!(r.ari, 0.0);
    }

    #[test]
    fn mismatched_lengths() {
        assert!(partition_agreement(&[0, 1], &[0]).is_err());
    }
}
