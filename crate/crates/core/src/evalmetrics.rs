//! Cluster-to-class alignment, confusion matrices and classification metrics.
//!
//! Class indices follow [`Condition::DISPLAY_ORDER`]; when there are more
//! clusters than classes the table is padded with empty classes so it stays
//! square.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::domain::Condition;
use crate::error::{Error, Result};

/// Largest cluster count accepted by [`align`].
pub const MAX_ALIGN_CLUSTERS: usize = 8;

/// Class index of every condition in display order.
pub fn display_indices(labels: &[Condition]) -> Vec<usize> {
    labels.iter().map(|c| c.display_index()).collect()
}

/// Row/column labels for a `k x k` table.
pub fn class_labels(k: usize) -> Vec<String> {
    (0..k)
        .map(|i| match Condition::from_display_index(i) {
            Some(c) => c.label().to_string(),
            None => format!("Unmatched{}", i - Condition::DISPLAY_ORDER.len() + 1),
        })
        .collect()
}

fn table_size(pred: &[usize], truth: &[usize]) -> Result<(usize, usize)> {
    if pred.len() != truth.len() {
        return Err(Error::input(format!("{} predictions for {} labels", pred.len(), truth.len())));
    }
    if pred.is_empty() {
        return Err(Error::input("no labels to align"));
    }
    let clusters = pred.iter().max().map_or(0, |m| m + 1);
    let classes = truth.iter().max().map_or(0, |m| m + 1);
    Ok((clusters, clusters.max(classes)))
}

/// Contingency counts `table[cluster][class]`, padded to `k x k`.
fn contingency(pred: &[usize], truth: &[usize], k: usize) -> Vec<Vec<u64>> {
    let mut t = vec![vec![0u64; k]; k];
    for (&p, &c) in pred.iter().zip(truth) {
        t[p][c] += 1;
    }
    t
}

fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = (1..p.len()).rev().find(|&i| p[i - 1] < p[i]) else {
        return false;
    };
    let j = (i..p.len()).rev().find(|&j| p[j] > p[i - 1]).expect("successor exists");
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// The cluster-to-class map maximizing the number of matched points.
///
/// `perm[cluster]` is a class index in `0..k`. Every permutation is tried in
/// lexicographic order and the first maximum wins.
pub fn align(pred: &[usize], truth: &[usize]) -> Result<Vec<usize>> {
    let (clusters, k) = table_size(pred, truth)?;
    if clusters > MAX_ALIGN_CLUSTERS {
        return Err(Error::UnsupportedSize(format!(
            "{clusters} clusters exceed the exhaustive alignment limit of {MAX_ALIGN_CLUSTERS}"
        )));
    }
    if k > MAX_ALIGN_CLUSTERS {
        return Err(Error::UnsupportedSize(format!("{k} classes exceed the alignment limit of {MAX_ALIGN_CLUSTERS}")));
    }
    let t = contingency(pred, truth, k);
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = perm.clone();
    let mut best_trace = 0u64;
    let mut first = true;
    loop {
        let trace: u64 = perm.iter().enumerate().map(|(cl, &c)| t[cl][c]).sum();
        if first || trace > best_trace {
            best_trace = trace;
            best.clone_from(&perm);
            first = false;
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    Ok(best)
}

/// `matrix[class][perm[cluster]]` counts, rows = true class, `k x k`.
pub fn confusion(pred: &[usize], truth: &[usize], perm: &[usize]) -> Result<Vec<Vec<u64>>> {
    let (clusters, k) = table_size(pred, truth)?;
    let k = k.max(perm.len());
    let mut seen = vec![false; k];
    if perm.len() < clusters || perm.iter().any(|&c| c >= k || std::mem::replace(&mut seen[c], true)) {
        return Err(Error::input("permutation does not map clusters one-to-one onto classes"));
    }
    let mut m = vec![vec![0u64; k]; k];
    for (&p, &c) in pred.iter().zip(truth) {
        m[c][perm[p]] += 1;
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub support: u64,
    pub predicted: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Nothing was assigned to this class; its precision is reported as 0.
    pub empty_column: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionReport {
    pub labels: Vec<String>,
    /// Rows = true class, columns = aligned cluster.
    pub matrix: Vec<Vec<u64>>,
    /// `permutation[cluster]` = class index, when produced by [`align`].
    pub permutation: Option<Vec<usize>>,
    pub total: u64,
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub weighted_f1: f64,
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Accuracy plus per-class and averaged precision, recall and F1.
///
/// Averages run over classes with positive support; weighted F1 weights by
/// support.
pub fn summarize(matrix: &[Vec<u64>]) -> Result<ConfusionReport> {
    let k = matrix.len();
    if k == 0 || matrix.iter().any(|r| r.len() != k) {
        return Err(Error::input("confusion matrix must be square and nonempty"));
    }
    let total: u64 = matrix.iter().flatten().sum();
    if total == 0 {
        return Err(Error::input("confusion matrix has no counts"));
    }
    let labels = class_labels(k);
    let trace: u64 = (0..k).map(|i| matrix[i][i]).sum();
    let per_class: Vec<ClassMetrics> = (0..k)
        .map(|i| {
            let support: u64 = matrix[i].iter().sum();
            let predicted: u64 = matrix.iter().map(|r| r[i]).sum();
            let precision = ratio(matrix[i][i], predicted);
            let recall = ratio(matrix[i][i], support);
            let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
            ClassMetrics {
                label: labels[i].clone(),
                support,
                predicted,
                precision,
                recall,
                f1,
                empty_column: predicted == 0,
            }
        })
        .collect();
    let present: Vec<&ClassMetrics> = per_class.iter().filter(|c| c.support > 0).collect();
    let n_present = present.len() as f64;
    let avg = |f: fn(&ClassMetrics) -> f64| present.iter().map(|c| f(c)).sum::<f64>() / n_present;
    let macro_f1 = avg(|c| c.f1);
    let balanced = present.iter().all(|c| c.support == present[0].support);
    let weighted_f1 =
        if balanced { macro_f1 } else { present.iter().map(|c| c.f1 * c.support as f64).sum::<f64>() / total as f64 };
    Ok(ConfusionReport {
        labels,
        matrix: matrix.to_vec(),
        permutation: None,
        total,
        accuracy: ratio(trace, total),
        macro_precision: avg(|c| c.precision),
        macro_recall: avg(|c| c.recall),
        macro_f1,
        weighted_f1,
        per_class,
    })
}

/// Rounds half away from zero at `decimals` places.
///
/// The value is first fixed to 9 decimals so that binary noise such as
/// `98.57499999999999` still rounds as the decimal `98.575`.
pub fn round_half_away(x: f64, decimals: u32) -> f64 {
    let s = format!("{:.9}", x.abs());
    let (int, frac) = s.split_once('.').expect("fixed notation");
    let d = decimals as usize;
    let mut scaled: u128 = format!("{int}{}", &frac[..d]).parse().expect("digits");
    if frac.as_bytes()[d] >= b'5' {
        scaled += 1;
    }
    let v = scaled as f64 / 10f64.powi(decimals as i32);
    if x < 0.0 {
        -v
    } else {
        v
    }
}

/// A fraction as a percentage with two decimals, e.g. `98.58`.
pub fn pct(x: f64) -> String {
    format!("{:.2}", round_half_away(100.0 * x, 2))
}

impl ConfusionReport {
    /// Confusion table with true classes as rows.
    pub fn confusion_csv(&self) -> String {
        let mut out = String::from("true\\predicted");
        for l in &self.labels {
            let _ = write!(out, ",{l}");
        }
        out.push('\n');
        for (l, row) in self.labels.iter().zip(&self.matrix) {
            out.push_str(l);
            for v in row {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    /// Overall metrics in percent.
    pub fn overall_csv(&self) -> String {
        let mut out = String::from("metric,value\n");
        for (name, v) in self.overall_rows() {
            let _ = writeln!(out, "{name},{}", pct(v));
        }
        out
    }

    /// Per-class metrics in percent.
    pub fn per_class_csv(&self) -> String {
        let mut out = String::from("class,precision,recall,f1,support\n");
        for c in &self.per_class {
            let _ = writeln!(out, "{},{},{},{},{}", c.label, pct(c.precision), pct(c.recall), pct(c.f1), c.support);
        }
        out
    }

    pub fn overall_rows(&self) -> [(&'static str, f64); 5] {
        [
            ("Accuracy", self.accuracy),
            ("Precision (macro)", self.macro_precision),
            ("Recall (macro)", self.macro_recall),
            ("F1 (macro)", self.macro_f1),
            ("F1 (weighted)", self.weighted_f1),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn golden() -> Vec<Vec<u64>> {
        vec![vec![1000, 0, 0, 0], vec![0, 1000, 0, 0], vec![0, 0, 968, 32], vec![0, 0, 25, 975]]
    }

    // Hungarian algorithm (potentials, O(k^3)) on the cost -count.
    fn hungarian_max(t: &[Vec<u64>]) -> u64 {
        let n = t.len();
        let cost = |i: usize, j: usize| -(t[i - 1][j - 1] as i64);
        let inf = i64::MAX / 4;
        let (mut u, mut v) = (vec![0i64; n + 1], vec![0i64; n + 1]);
        let (mut p, mut way) = (vec![0usize; n + 1], vec![0usize; n + 1]);
        for i in 1..=n {
            p[0] = i;
            let mut j0 = 0;
            let mut minv = vec![inf; n + 1];
            let mut used = vec![false; n + 1];
            loop {
                used[j0] = true;
                let (i0, mut delta, mut j1) = (p[j0], inf, 0);
                for j in 1..=n {
                    if !used[j] {
                        let cur = cost(i0, j) - u[i0] - v[j];
                        if cur < minv[j] {
                            minv[j] = cur;
                            way[j] = j0;
                        }
                        if minv[j] < delta {
                            delta = minv[j];
                            j1 = j;
                        }
                    }
                }
                for j in 0..=n {
                    if used[j] {
                        u[p[j]] += delta;
                        v[j] -= delta;
                    } else {
                        minv[j] -= delta;
                    }
                }
                j0 = j1;
                if p[j0] == 0 {
                    break;
                }
            }
            loop {
                let j1 = way[j0];
                p[j0] = p[j1];
                j0 = j1;
                if j0 == 0 {
                    break;
                }
            }
        }
        (1..=n).map(|j| t[p[j] - 1][j - 1]).sum()
    }

    fn expand(m: &[Vec<u64>]) -> (Vec<usize>, Vec<usize>) {
        let (mut pred, mut truth) = (vec![], vec![]);
        for (c, row) in m.iter().enumerate() {
            for (cl, &n) in row.iter().enumerate() {
                for _ in 0..n {
                    pred.push(cl);
                    truth.push(c);
                }
            }
        }
        (pred, truth)
    }

    #[test]
    fn identity_alignment() {
        let y = vec![0, 1, 2, 3, 0, 1, 2, 3];
        assert_eq!(align(&y, &y).unwrap(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn cyclic_shift_recovered() {
        let truth: Vec<usize> = (0..40).map(|i| i % 4).collect();
        let pred: Vec<usize> = truth.iter().map(|c| (c + 1) % 4).collect();
        let perm = align(&pred, &truth).unwrap();
        assert_eq!(perm, vec![3, 0, 1, 2]);
        let m = confusion(&pred, &truth, &perm).unwrap();
        assert!((0..4).all(|i| m[i][i] == 10));
    }

    #[test]
    fn matches_hungarian_oracle() {
        let mut rng = crate::synthlab::make_rng(11, 0);
        for _ in 0..200 {
            let t: Vec<Vec<u64>> = (0..4).map(|_| (0..4).map(|_| rng.next_u64() % 50).collect()).collect();
            // pred = cluster index, truth = class index
            let (mut pred, mut truth) = (vec![], vec![]);
            for (cl, row) in t.iter().enumerate() {
                for (c, &n) in row.iter().enumerate() {
                    for _ in 0..n {
                        pred.push(cl);
                        truth.push(c);
                    }
                }
            }
            if pred.is_empty() {
                continue;
            }
            let perm = align(&pred, &truth).unwrap();
            let k = perm.len();
            let padded: Vec<Vec<u64>> =
                (0..k).map(|i| (0..k).map(|j| *t.get(i).and_then(|r| r.get(j)).unwrap_or(&0)).collect()).collect();
            let got: u64 = perm.iter().enumerate().map(|(cl, &c)| padded[cl][c]).sum();
            assert_eq!(got, hungarian_max(&padded));
        }
    }

    #[test]
    fn ties_pick_lexicographically_smallest() {
        // every map matches two of the four points
        let pred = vec![0, 0, 1, 1];
        let truth = vec![0, 1, 0, 1];
        assert_eq!(align(&pred, &truth).unwrap(), vec![0, 1]);
    }

    #[test]
    fn too_many_clusters() {
        let pred: Vec<usize> = (0..9).collect();
        let truth = vec![0; 9];
        assert!(matches!(align(&pred, &truth), Err(Error::UnsupportedSize(_))));
    }

    #[test]
    fn extra_clusters_pad_the_table() {
        let pred = vec![0, 1, 2, 3, 4, 4];
        let truth = vec![0, 1, 2, 3, 0, 0];
        let perm = align(&pred, &truth).unwrap();
        assert_eq!(perm.len(), 5);
        let m = confusion(&pred, &truth, &perm).unwrap();
        assert_eq!(m.len(), 5);
        let r = summarize(&m).unwrap();
        assert_eq!(r.labels[4], "Unmatched1");
        assert!((r.accuracy - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(r.per_class[4].support, 0);
        assert!(!r.per_class[0].empty_column);
        let sparse = summarize(&[vec![2, 0], vec![1, 0]]).unwrap();
        assert!(sparse.per_class[1].empty_column);
        assert_eq!(sparse.per_class[1].precision, 0.0);
    }

    #[test]
    fn golden_table_round_trip() {
        let (pred, truth) = expand(&golden());
        let perm = align(&pred, &truth).unwrap();
        assert_eq!(perm, vec![0, 1, 2, 3]);
        let m = confusion(&pred, &truth, &perm).unwrap();
        assert_eq!(m, golden());
        let col: Vec<u64> = (0..4).map(|j| m.iter().map(|r| r[j]).sum()).collect();
        assert_eq!(col, vec![1000, 1000, 993, 1007]);
    }

    #[test]
    fn golden_metrics() {
        let r = summarize(&golden()).unwrap();
        assert!((r.accuracy - 0.98575).abs() < 1e-15);
        assert_eq!(pct(r.accuracy), "98.58");
        let p: Vec<String> = r.per_class.iter().map(|c| pct(c.precision)).collect();
        let rc: Vec<String> = r.per_class.iter().map(|c| pct(c.recall)).collect();
        let f: Vec<String> = r.per_class.iter().map(|c| pct(c.f1)).collect();
        assert_eq!(p, ["100.00", "100.00", "97.48", "96.82"]);
        assert_eq!(rc, ["100.00", "100.00", "96.80", "97.50"]);
        assert_eq!(f, ["100.00", "100.00", "97.14", "97.16"]);
        assert_eq!(pct(r.weighted_f1), "98.57");
        assert_eq!(pct(r.macro_f1), "98.57");
        assert_eq!(r.weighted_f1, r.macro_f1);
        assert_eq!(r.labels, ["HiEqv-Det", "HiEqv-Prob", "LoEqv-Det", "LoEqv-Prob"]);
    }

    #[test]
    fn csv_layouts() {
        let r = summarize(&golden()).unwrap();
        assert_eq!(
            r.confusion_csv(),
            "true\\predicted,HiEqv-Det,HiEqv-Prob,LoEqv-Det,LoEqv-Prob\n\
             HiEqv-Det,1000,0,0,0\nHiEqv-Prob,0,1000,0,0\nLoEqv-Det,0,0,968,32\nLoEqv-Prob,0,0,25,975\n"
        );
        assert_eq!(
            r.overall_csv(),
            "metric,value\nAccuracy,98.58\nPrecision (macro),98.58\nRecall (macro),98.58\nF1 (macro),98.57\nF1 (weighted),98.57\n"
        );
        assert!(r.per_class_csv().contains("LoEqv-Det,97.48,96.80,97.14,1000\n"));
    }

    #[test]
    fn half_away_rounding() {
        assert_eq!(round_half_away(98.575, 2), 98.58);
        assert_eq!(round_half_away(98.57499999999999, 2), 98.58);
        assert_eq!(round_half_away(-2.345, 2), -2.35);
        assert_eq!(round_half_away(0.004, 2), 0.0);
        assert_eq!(pct(1.0), "100.00");
    }

    #[test]
    fn diagonal_iff_perfect() {
        let d = vec![vec![3, 0], vec![0, 4]];
        assert_eq!(summarize(&d).unwrap().accuracy, 1.0);
        let o = vec![vec![3, 1], vec![0, 4]];
        assert!(summarize(&o).unwrap().accuracy < 1.0);
        assert!(summarize(&[vec![0, 0], vec![0, 0]]).is_err());
        assert!(summarize(&[vec![1, 0]]).is_err());
    }

    #[test]
    fn simultaneous_permutation() {
        let g = golden();
        let p = [2usize, 0, 3, 1];
        let pm: Vec<Vec<u64>> = (0..4).map(|i| (0..4).map(|j| g[p[i]][p[j]]).collect()).collect();
        let (a, b) = (summarize(&g).unwrap(), summarize(&pm).unwrap());
        assert_eq!(a.accuracy, b.accuracy);
        assert!((a.macro_f1 - b.macro_f1).abs() < 1e-15);
        assert!((a.weighted_f1 - b.weighted_f1).abs() < 1e-15);
        for i in 0..4 {
            assert_eq!(b.per_class[i].f1, a.per_class[p[i]].f1);
        }
    }
}
