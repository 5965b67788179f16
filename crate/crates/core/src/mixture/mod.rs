//! Finite Gaussian mixtures with axis-aligned variances.
//!
//! Candidates are initialized from a Ward partition, fitted by EM in the
//! original coordinates, and ranked by `BIC = 2 loglik - p ln n` (larger is
//! better). Two variance families are supported: `E` shares one variance per
//! axis across components, `V` gives each component its own.

mod ward;

pub use ward::{hier_init, WardTree, MAX_HIER_POINTS};

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Row-major view of `n x dim` observations.
#[derive(Debug, Clone, Copy)]
pub struct Points<'a> {
    pub data: &'a [f64],
    pub dim: usize,
}

impl<'a> Points<'a> {
    pub fn new(data: &'a [f64], dim: usize) -> Result<Self> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(Error::input(format!("{} values do not form rows of width {dim}", data.len())));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("non-finite coordinate"));
        }
        Ok(Points { data, dim })
    }

    pub fn n(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn row(&self, i: usize) -> &'a [f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum VarianceModel {
    E,
    V,
}

impl VarianceModel {
    pub const ALL: [VarianceModel; 2] = [VarianceModel::E, VarianceModel::V];

    /// Free parameters: means, weights and variances.
    pub fn n_params(self, g: usize, dim: usize) -> usize {
        let variances = match self {
            VarianceModel::E => dim,
            VarianceModel::V => g * dim,
        };
        g * dim + (g - 1) + variances
    }
}

impl fmt::Display for VarianceModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VarianceModel::E => "E",
            VarianceModel::V => "V",
        })
    }
}

impl FromStr for VarianceModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "E" => Ok(VarianceModel::E),
            "V" => Ok(VarianceModel::V),
            _ => Err(Error::parse(format!("unknown variance model {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureFit {
    pub g: usize,
    pub dim: usize,
    pub model: VarianceModel,
    pub weights: Vec<f64>,
    /// `g x dim`, row-major.
    pub means: Vec<f64>,
    /// `dim` entries for `E`, `g x dim` for `V`.
    pub variances: Vec<f64>,
    pub loglik: f64,
    pub bic: f64,
    pub n_iter: usize,
    pub converged: bool,
    /// Log-likelihood at every E-step, in order.
    pub loglik_trace: Vec<f64>,
}

impl MixtureFit {
    pub fn mean(&self, k: usize) -> &[f64] {
        &self.means[k * self.dim..(k + 1) * self.dim]
    }

    pub fn variance(&self, k: usize, d: usize) -> f64 {
        match self.model {
            VarianceModel::E => self.variances[d],
            VarianceModel::V => self.variances[k * self.dim + d],
        }
    }

    pub fn n_params(&self) -> usize {
        self.model.n_params(self.g, self.dim)
    }
}

/// `2 loglik - p ln n`.
pub fn bic(fit: &MixtureFit, n: usize) -> f64 {
    2.0 * fit.loglik - fit.n_params() as f64 * (n as f64).ln()
}

struct Params {
    weights: Vec<f64>,
    means: Vec<f64>,
    variances: Vec<f64>,
}

/// Total (`1/n`) variance of every axis.
fn axis_variances(points: &Points<'_>) -> Vec<f64> {
    let n = points.n() as f64;
    (0..points.dim)
        .map(|d| {
            let m = (0..points.n()).map(|i| points.row(i)[d]).sum::<f64>() / n;
            (0..points.n()).map(|i| (points.row(i)[d] - m).powi(2)).sum::<f64>() / n
        })
        .collect()
}

/// Per-axis variance floors: `1e-6` times the total variance of the axis,
/// or `1e-6` when the axis is constant.
fn variance_floors(total: &[f64]) -> Vec<f64> {
    total.iter().map(|&v| if v > 0.0 { 1e-6 * v } else { 1e-6 }).collect()
}

fn m_step(
    points: &Points<'_>,
    resp: &[f64],
    g: usize,
    model: VarianceModel,
    floors: &[f64],
    prev: Option<&Params>,
) -> Params {
    let (n, dim) = (points.n(), points.dim);
    let mut nk = vec![0.0; g];
    let mut means = vec![0.0; g * dim];
    for i in 0..n {
        let x = points.row(i);
        for k in 0..g {
            let r = resp[i * g + k];
            nk[k] += r;
            for d in 0..dim {
                means[k * dim + d] += r * x[d];
            }
        }
    }
    let empty = |k: usize| nk[k] <= 1e-300;
    for k in 0..g {
        for d in 0..dim {
            if empty(k) {
                means[k * dim + d] = prev.map_or(0.0, |p| p.means[k * dim + d]);
            } else {
                means[k * dim + d] /= nk[k];
            }
        }
    }
    let mut ss = vec![0.0; g * dim];
    for i in 0..n {
        let x = points.row(i);
        for k in 0..g {
            let r = resp[i * g + k];
            for d in 0..dim {
                let e = x[d] - means[k * dim + d];
                ss[k * dim + d] += r * e * e;
            }
        }
    }
    let variances = match model {
        VarianceModel::E => {
            (0..dim).map(|d| ((0..g).map(|k| ss[k * dim + d]).sum::<f64>() / n as f64).max(floors[d])).collect()
        }
        VarianceModel::V => (0..g * dim)
            .map(|kd| {
                let (k, d) = (kd / dim, kd % dim);
                if empty(k) {
                    prev.map_or(floors[d], |p| p.variances[kd])
                } else {
                    (ss[kd] / nk[k]).max(floors[d])
                }
            })
            .collect(),
    };
    let weights = nk.iter().map(|v| v / n as f64).collect();
    Params { weights, means, variances }
}

fn log_dens_table(points: &Points<'_>, p: &Params, g: usize, model: VarianceModel) -> Vec<f64> {
    let (n, dim) = (points.n(), points.dim);
    let var = |k: usize, d: usize| match model {
        VarianceModel::E => p.variances[d],
        VarianceModel::V => p.variances[k * dim + d],
    };
    let consts: Vec<f64> =
        (0..g).map(|k| p.weights[k].ln() - 0.5 * (0..dim).map(|d| LN_2PI + var(k, d).ln()).sum::<f64>()).collect();
    let inv: Vec<f64> = (0..g * dim).map(|kd| 1.0 / var(kd / dim, kd % dim)).collect();
    let mut out = vec![0.0; n * g];
    for i in 0..n {
        let x = points.row(i);
        for k in 0..g {
            let mut q = 0.0;
            for d in 0..dim {
                let e = x[d] - p.means[k * dim + d];
                q += e * e * inv[k * dim + d];
            }
            out[i * g + k] = consts[k] - 0.5 * q;
        }
    }
    out
}

/// Turns log joint densities into responsibilities in place; returns loglik.
fn normalize_rows(table: &mut [f64], g: usize) -> f64 {
    let mut ll = 0.0;
    for row in table.chunks_exact_mut(g) {
        let mx = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = row.iter().map(|v| (v - mx).exp()).sum();
        let lse = mx + s.ln();
        ll += lse;
        let mut tot = 0.0;
        for v in row.iter_mut() {
            *v = (*v - lse).exp();
            tot += *v;
        }
        row.iter_mut().for_each(|v| *v /= tot);
    }
    ll
}

fn params_of(fit: &MixtureFit) -> Params {
    Params { weights: fit.weights.clone(), means: fit.means.clone(), variances: fit.variances.clone() }
}

/// EM from a hard initial partition with labels in `0..g`.
///
/// Stops when `|loglik change| < tol (1 + |loglik|)` or after `max_iter`
/// E-steps, in which case `converged` is false. The `|loglik|` in the bound
/// is taken on axis-standardized data, so rescaling an axis changes neither
/// the stopping iteration nor the hard labels.
pub fn em_fit(
    points: &Points<'_>,
    g: usize,
    model: VarianceModel,
    init: &[usize],
    tol: f64,
    max_iter: usize,
) -> Result<MixtureFit> {
    let n = points.n();
    if g == 0 || n <= g {
        return Err(Error::input(format!("need n > g, got n = {n}, g = {g}")));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("tol must be positive"));
    }
    if max_iter == 0 {
        return Err(Error::invalid("max_iter must be positive"));
    }
    if init.len() != n || init.iter().any(|&l| l >= g) {
        return Err(Error::input("initial partition must label every point in 0..g"));
    }
    let total = axis_variances(points);
    let floors = variance_floors(&total);
    // loglik of the standardized data = loglik + n * sum(ln sd)
    let std_shift = 0.5 * n as f64 * total.iter().map(|&v| if v > 0.0 { v.ln() } else { 0.0 }).sum::<f64>();
    let mut resp = vec![0.0; n * g];
    for (i, &l) in init.iter().enumerate() {
        resp[i * g + l] = 1.0;
    }
    let mut params = m_step(points, &resp, g, model, &floors, None);
    let mut trace = Vec::new();
    let mut converged = false;
    loop {
        let mut table = log_dens_table(points, &params, g, model);
        let ll = normalize_rows(&mut table, g);
        if let Some(&prev) = trace.last() {
            debug_assert!(ll >= prev - 1e-9 * (1.0 + f64::abs(prev)), "EM decreased loglik {prev} -> {ll}");
            if (ll - prev).abs() < tol * (1.0 + (ll + std_shift).abs()) {
                converged = true;
            }
        }
        trace.push(ll);
        if converged || trace.len() >= max_iter {
            break;
        }
        params = m_step(points, &table, g, model, &floors, Some(&params));
    }
    let loglik = *trace.last().expect("at least one E-step");
    let mut fit = MixtureFit {
        g,
        dim: points.dim,
        model,
        weights: params.weights,
        means: params.means,
        variances: params.variances,
        loglik,
        bic: 0.0,
        n_iter: trace.len(),
        converged,
        loglik_trace: trace,
    };
    fit.bic = bic(&fit, n);
    Ok(fit)
}

/// Posterior component probabilities, `n x g` row-major.
pub fn responsibilities(fit: &MixtureFit, points: &Points<'_>) -> Result<Vec<f64>> {
    check_dims(fit, points)?;
    let mut table = log_dens_table(points, &params_of(fit), fit.g, fit.model);
    normalize_rows(&mut table, fit.g);
    Ok(table)
}

/// Log-likelihood of `points` under `fit`.
pub fn log_likelihood(fit: &MixtureFit, points: &Points<'_>) -> Result<f64> {
    check_dims(fit, points)?;
    let mut table = log_dens_table(points, &params_of(fit), fit.g, fit.model);
    Ok(normalize_rows(&mut table, fit.g))
}

fn check_dims(fit: &MixtureFit, points: &Points<'_>) -> Result<()> {
    if fit.dim != points.dim {
        return Err(Error::input(format!("fit has dim {}, data has dim {}", fit.dim, points.dim)));
    }
    Ok(())
}

/// Hard labels by maximum posterior; ties go to the lowest component index.
pub fn map_labels(fit: &MixtureFit, points: &Points<'_>) -> Result<Vec<usize>> {
    check_dims(fit, points)?;
    let table = log_dens_table(points, &params_of(fit), fit.g, fit.model);
    Ok(table
        .chunks_exact(fit.g)
        .map(|row| {
            let mut best = 0;
            for k in 1..row.len() {
                if row[k] > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BicEntry {
    pub g: usize,
    pub model: VarianceModel,
    pub bic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BicSurface {
    pub entries: Vec<BicEntry>,
    pub best: (usize, VarianceModel),
}

impl BicSurface {
    pub fn get(&self, g: usize, model: VarianceModel) -> Option<f64> {
        self.entries.iter().find(|e| e.g == g && e.model == model).map(|e| e.bic)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("G,model,bic\n");
        for e in &self.entries {
            let _ = writeln!(out, "{},{},{:.6}", e.g, e.model, e.bic);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectOptions {
    pub g_range: std::ops::RangeInclusive<usize>,
    pub models: Vec<VarianceModel>,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SelectOptions {
    fn default() -> Self {
        SelectOptions { g_range: 1..=9, models: VarianceModel::ALL.to_vec(), tol: 1e-6, max_iter: 1000 }
    }
}

#[derive(Debug, Clone)]
pub struct Selection {
    pub surface: BicSurface,
    pub best: MixtureFit,
    /// Every fitted candidate, ordered by `(g, model)`.
    pub candidates: Vec<MixtureFit>,
}

/// Fits every `(g, model)` candidate from one Ward hierarchy and picks the
/// largest BIC; ties go to the smaller `g`, then `E` before `V`.
///
/// Candidates are fitted in parallel; the outcome does not depend on the
/// thread count.
pub fn select(points: &Points<'_>, opts: &SelectOptions) -> Result<Selection> {
    let n = points.n();
    let g_max = *opts.g_range.end();
    if opts.g_range.is_empty() || *opts.g_range.start() == 0 {
        return Err(Error::invalid("g range must be nonempty and start at 1 or more"));
    }
    if g_max >= n {
        return Err(Error::input(format!("largest g ({g_max}) must be below n ({n})")));
    }
    let mut models = opts.models.clone();
    models.sort();
    models.dedup();
    if models.is_empty() {
        return Err(Error::invalid("no variance models requested"));
    }
    let tree = WardTree::build(points)?;
    let inits: Vec<(usize, Vec<usize>)> =
        opts.g_range.clone().map(|g| tree.cut(g).map(|p| (g, p))).collect::<Result<_>>()?;
    let jobs: Vec<(usize, VarianceModel, &[usize])> =
        inits.iter().flat_map(|(g, p)| models.iter().map(move |m| (*g, *m, p.as_slice()))).collect();
    let candidates: Vec<MixtureFit> =
        jobs.par_iter().map(|(g, m, p)| em_fit(points, *g, *m, p, opts.tol, opts.max_iter)).collect::<Result<_>>()?;
    let mut best = 0;
    for (i, c) in candidates.iter().enumerate() {
        if c.bic > candidates[best].bic {
            best = i;
        }
    }
    let surface = BicSurface {
        entries: candidates.iter().map(|c| BicEntry { g: c.g, model: c.model, bic: c.bic }).collect(),
        best: (candidates[best].g, candidates[best].model),
    };
    Ok(Selection { surface, best: candidates[best].clone(), candidates })
}
