//! Ward agglomeration on axis-standardized data.
//!
//! The hierarchy is built with the nearest-neighbour chain algorithm and the
//! Lance-Williams update for Ward's criterion, where the dissimilarity of
//! two clusters is the increase in within-cluster sum of squares caused by
//! merging them.

use super::Points;
use crate::error::{Error, Result};

/// Largest number of points the hierarchy is built on.
pub const MAX_HIER_POINTS: usize = 1024;

/// Dendrogram over a canonical subsample of the data.
#[derive(Debug, Clone)]
pub struct WardTree {
    n: usize,
    dim: usize,
    /// Standardized coordinates of every data point.
    scaled: Vec<f64>,
    /// Data indices of the subsample, in lexicographic order of the points.
    sub: Vec<usize>,
    /// Merges `(a, b, cost)` over subsample positions, sorted by cost.
    merges: Vec<(usize, usize, f64)>,
}

fn standardize(points: &Points<'_>) -> Vec<f64> {
    let (n, dim) = (points.n(), points.dim);
    let mut out = points.data.to_vec();
    for d in 0..dim {
        let mean = (0..n).map(|i| points.row(i)[d]).sum::<f64>() / n as f64;
        let var = (0..n).map(|i| (points.row(i)[d] - mean).powi(2)).sum::<f64>() / n as f64;
        let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
        for i in 0..n {
            out[i * dim + d] = (points.row(i)[d] - mean) / sd;
        }
    }
    out
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
}

fn nn_chain(x: &[f64], m: usize, dim: usize) -> Vec<(usize, usize, f64)> {
    let mut dist = vec![0.0f64; m * m];
    for i in 0..m {
        for j in (i + 1)..m {
            let d: f64 = (0..dim).map(|k| (x[i * dim + k] - x[j * dim + k]).powi(2)).sum();
            dist[i * m + j] = 0.5 * d;
            dist[j * m + i] = 0.5 * d;
        }
    }
    let mut size = vec![1usize; m];
    let mut active = vec![true; m];
    let mut n_active = m;
    let mut chain: Vec<usize> = Vec::with_capacity(m);
    let mut merges = Vec::with_capacity(m.saturating_sub(1));
    while n_active > 1 {
        if chain.is_empty() {
            chain.push(active.iter().position(|a| *a).expect("an active cluster"));
        }
        let (a, b) = loop {
            let a = *chain.last().unwrap();
            let prev = if chain.len() >= 2 { Some(chain[chain.len() - 2]) } else { None };
            let mut best = usize::MAX;
            let mut best_d = f64::INFINITY;
            if let Some(p) = prev {
                best = p;
                best_d = dist[a * m + p];
            }
            for j in 0..m {
                if !active[j] || j == a {
                    continue;
                }
                let d = dist[a * m + j];
                if d < best_d {
                    best_d = d;
                    best = j;
                }
            }
            if Some(best) == prev {
                chain.pop();
                chain.pop();
                break (a, best);
            }
            chain.push(best);
        };
        let (keep, gone) = if a < b { (a, b) } else { (b, a) };
        let d_ab = dist[a * m + b];
        merges.push((keep, gone, d_ab));
        let (na, nb) = (size[keep] as f64, size[gone] as f64);
        for k in 0..m {
            if !active[k] || k == keep || k == gone {
                continue;
            }
            let nk = size[k] as f64;
            let d = ((na + nk) * dist[keep * m + k] + (nb + nk) * dist[gone * m + k] - nk * d_ab) / (na + nb + nk);
            dist[keep * m + k] = d;
            dist[k * m + keep] = d;
        }
        active[gone] = false;
        size[keep] += size[gone];
        n_active -= 1;
    }
    merges.sort_by(|x, y| x.2.total_cmp(&y.2));
    merges
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

impl WardTree {
    pub fn build(points: &Points<'_>) -> Result<Self> {
        let (n, dim) = (points.n(), points.dim);
        if n == 0 {
            return Err(Error::input("no points to cluster"));
        }
        let scaled = standardize(points);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| lex_cmp(points.row(i), points.row(j)));
        let m = n.min(MAX_HIER_POINTS);
        let sub: Vec<usize> = (0..m).map(|i| order[i * n / m]).collect();
        let xs: Vec<f64> = sub.iter().flat_map(|&i| scaled[i * dim..(i + 1) * dim].iter().copied()).collect();
        let merges = nn_chain(&xs, m, dim);
        Ok(WardTree { n, dim, scaled, sub, merges })
    }

    /// Labels `0..g` for every data point. Subsample points keep their
    /// hierarchy cluster; the rest go to the nearest standardized cluster
    /// mean (lowest label on ties). Labels are numbered by first appearance
    /// in the canonical order.
    pub fn cut(&self, g: usize) -> Result<Vec<usize>> {
        let m = self.sub.len();
        if g == 0 || g > m {
            return Err(Error::input(format!("cannot cut {m} hierarchy points into {g} clusters")));
        }
        let mut parent: Vec<usize> = (0..m).collect();
        for &(a, b, _) in &self.merges[..m - g] {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            parent[ra.max(rb)] = ra.min(rb);
        }
        let mut label_of_root = vec![usize::MAX; m];
        let mut sub_labels = vec![0usize; m];
        let mut next = 0;
        for (pos, lbl) in sub_labels.iter_mut().enumerate() {
            let r = find(&mut parent, pos);
            if label_of_root[r] == usize::MAX {
                label_of_root[r] = next;
                next += 1;
            }
            *lbl = label_of_root[r];
        }
        let dim = self.dim;
        let mut labels = vec![usize::MAX; self.n];
        for (pos, &i) in self.sub.iter().enumerate() {
            labels[i] = sub_labels[pos];
        }
        if m < self.n {
            let mut centers = vec![0.0; g * dim];
            let mut counts = vec![0usize; g];
            for (pos, &i) in self.sub.iter().enumerate() {
                let k = sub_labels[pos];
                counts[k] += 1;
                for d in 0..dim {
                    centers[k * dim + d] += self.scaled[i * dim + d];
                }
            }
            for k in 0..g {
                for d in 0..dim {
                    centers[k * dim + d] /= counts[k] as f64;
                }
            }
            for (i, lbl) in labels.iter_mut().enumerate() {
                if *lbl != usize::MAX {
                    continue;
                }
                let x = &self.scaled[i * dim..(i + 1) * dim];
                let mut best = 0;
                let mut best_d = f64::INFINITY;
                for k in 0..g {
                    let d: f64 = (0..dim).map(|a| (x[a] - centers[k * dim + a]).powi(2)).sum();
                    if d < best_d {
                        best_d = d;
                        best = k;
                    }
                }
                *lbl = best;
            }
        }
        Ok(labels)
    }
}

/// Ward partition of `points` into `g` clusters.
pub fn hier_init(points: &Points<'_>, g: usize) -> Result<Vec<usize>> {
    if g == 0 {
        return Err(Error::input("g must be at least 1"));
    }
    if points.n() < g {
        return Err(Error::input(format!("{} points cannot form {g} clusters", points.n())));
    }
    WardTree::build(points)?.cut(g)
}
