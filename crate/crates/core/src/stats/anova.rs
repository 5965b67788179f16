//! Sums of squares by incremental orthogonal projection.
//!
//! Each term's columns are Gram-Schmidt orthogonalized (two passes) against
//! the span of the intercept and every earlier term. The term's sequential
//! sum of squares is the squared length of the response's projection onto
//! the new directions.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{signif_code, tail_prob_f};
use crate::domain::{condition_of, Condition, FacetLevel, Gender, PerformanceRecord, RepKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaRow {
    pub term: String,
    pub df: usize,
    pub sum_sq: f64,
    pub mean_sq: f64,
    /// `None` on the residual row.
    pub f: Option<f64>,
    pub p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaTable {
    pub rows: Vec<AnovaRow>,
    pub residual: AnovaRow,
}

impl AnovaTable {
    pub fn total_ss(&self) -> f64 {
        self.rows.iter().map(|r| r.sum_sq).sum::<f64>() + self.residual.sum_sq
    }

    pub fn row(&self, term: &str) -> Option<&AnovaRow> {
        self.rows.iter().find(|r| r.term == term)
    }

    /// Column layout `term,Df,Sum sq,Mean Sq,F value,Pr(>F),signif`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("term,Df,Sum sq,Mean Sq,F value,Pr(>F),signif\n");
        for r in self.rows.iter().chain(std::iter::once(&self.residual)) {
            let f = r.f.map(|f| format!("{f:.4}")).unwrap_or_default();
            let p = r.p.map(|p| format!("{p:.4}")).unwrap_or_default();
            let code = r.p.map(signif_code).unwrap_or("");
            let _ = writeln!(out, "{},{},{:.4},{:.4},{f},{p},{code}", r.term, r.df, r.sum_sq, r.mean_sq);
        }
        out
    }
}

struct Projector {
    y: Vec<f64>,
    basis: Vec<Vec<f64>>,
    residual: Vec<f64>,
}

impl Projector {
    fn new(y: &[f64]) -> Self {
        Projector { y: y.to_vec(), basis: Vec::new(), residual: y.to_vec() }
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    /// Adds the columns of one term; returns `(rank added, sequential SS)`.
    fn add_term(&mut self, columns: Vec<Vec<f64>>) -> (usize, f64) {
        let mut rank = 0;
        let mut ss = 0.0;
        for mut v in columns {
            let norm0 = Self::dot(&v, &v).sqrt();
            if norm0 == 0.0 {
                continue;
            }
            for _ in 0..2 {
                for q in &self.basis {
                    let c = Self::dot(q, &v);
                    v.iter_mut().zip(q).for_each(|(vi, qi)| *vi -= c * qi);
                }
            }
            let norm = Self::dot(&v, &v).sqrt();
            if norm <= 1e-9 * norm0 {
                continue;
            }
            v.iter_mut().for_each(|x| *x /= norm);
            let c = Self::dot(&v, &self.residual);
            self.residual.iter_mut().zip(&v).for_each(|(r, q)| *r -= c * q);
            // re-project against the original response for the SS itself
            let cy = Self::dot(&v, &self.y);
            ss += cy * cy;
            self.basis.push(v);
            rank += 1;
        }
        (rank, ss)
    }

    fn rank(&self) -> usize {
        self.basis.len()
    }

    fn residual_ss(&self) -> f64 {
        Self::dot(&self.residual, &self.residual)
    }
}

fn f_row(term: String, df: usize, sum_sq: f64, ms_res: f64, df_res: usize) -> AnovaRow {
    let mean_sq = sum_sq / df as f64;
    let f = if sum_sq == 0.0 {
        0.0
    } else if ms_res == 0.0 {
        f64::INFINITY
    } else {
        mean_sq / ms_res
    };
    let p = tail_prob_f(f, df as f64, df_res as f64);
    AnovaRow { term, df, sum_sq, mean_sq, f: Some(f), p: Some(p) }
}

fn finish(n: usize, proj: Projector, terms: Vec<(String, usize, f64)>) -> Result<AnovaTable> {
    let rank = proj.rank();
    if rank >= n {
        return Err(Error::InvalidDesign(format!("residual df is {} with n = {n}", n as i64 - rank as i64)));
    }
    let df_res = n - rank;
    let ss_res = proj.residual_ss();
    let ms_res = ss_res / df_res as f64;
    let rows = terms.into_iter().map(|(name, df, ss)| f_row(name, df, ss, ms_res, df_res)).collect();
    let residual = AnovaRow { term: "Residuals".into(), df: df_res, sum_sq: ss_res, mean_sq: ms_res, f: None, p: None };
    Ok(AnovaTable { rows, residual })
}

/// One-way ANOVA of `values` by `groups` with the term labelled `term`.
pub fn one_way_anova_labeled<L: Ord + Clone>(term: &str, values: &[f64], groups: &[L]) -> Result<AnovaTable> {
    if values.len() != groups.len() {
        return Err(Error::input("values and groups differ in length"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("non-finite value"));
    }
    let mut levels: BTreeMap<L, usize> = BTreeMap::new();
    for g in groups {
        let next = levels.len();
        levels.entry(g.clone()).or_insert(next);
    }
    if levels.len() < 2 {
        return Err(Error::input("one-way ANOVA needs at least two nonempty groups"));
    }
    let n = values.len();
    if n <= levels.len() {
        return Err(Error::input(format!("{n} observations cannot support {} groups", levels.len())));
    }
    let ordered: Vec<&L> = levels.keys().collect();
    let mut proj = Projector::new(values);
    proj.add_term(vec![vec![1.0; n]]);
    let cols: Vec<Vec<f64>> =
        ordered[1..].iter().map(|lvl| groups.iter().map(|g| if g == *lvl { 1.0 } else { 0.0 }).collect()).collect();
    let (df, ss) = proj.add_term(cols);
    finish(n, proj, vec![(term.to_string(), df, ss)])
}

pub fn one_way_anova<L: Ord + Clone>(values: &[f64], groups: &[L]) -> Result<AnovaTable> {
    one_way_anova_labeled("group", values, groups)
}

/// Terms of the two-way design with the gender control.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Term {
    Facet,
    Rep,
    FacetRep,
    Gender,
}

/// Row order of the aggregate table.
pub const TABLE6_TERMS: [Term; 4] = [Term::Facet, Term::Rep, Term::FacetRep, Term::Gender];

impl Term {
    pub fn label(self) -> &'static str {
        match self {
            Term::Facet => "Equivocality",
            Term::Rep => "Information Representations",
            Term::FacetRep => "Equivocality x Information Representations",
            Term::Gender => "Gender",
        }
    }

    /// Effect-coded column value; High, Det and F code as +1.
    fn code(self, r: &PerformanceRecord) -> f64 {
        let facet = if r.condition.facet() == FacetLevel::HighEquivocality { 1.0 } else { -1.0 };
        let rep = if r.condition.rep() == RepKind::Deterministic { 1.0 } else { -1.0 };
        match self {
            Term::Facet => facet,
            Term::Rep => rep,
            Term::FacetRep => facet * rep,
            Term::Gender => {
                if r.gender == Gender::F {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }
}

/// Sequential (type I) sums of squares for `terms` in the given order.
pub fn factorial_anova_sequential(records: &[PerformanceRecord], terms: &[Term]) -> Result<AnovaTable> {
    let n = records.len();
    for c in Condition::ALL {
        if !records.iter().any(|r| r.condition == c) {
            return Err(Error::InvalidDesign(format!("cell {c} is empty")));
        }
    }
    if n <= 5 {
        return Err(Error::InvalidDesign(format!("n = {n} leaves no residual degrees of freedom")));
    }
    let y: Vec<f64> = records.iter().map(|r| r.profit).collect();
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("non-finite profit"));
    }
    let mut proj = Projector::new(&y);
    proj.add_term(vec![vec![1.0; n]]);
    let mut rows = Vec::with_capacity(terms.len());
    for &t in terms {
        let col: Vec<f64> = records.iter().map(|r| t.code(r)).collect();
        let (df, ss) = proj.add_term(vec![col]);
        if df == 0 {
            return Err(Error::InvalidDesign(format!("term {} is confounded with earlier terms", t.label())));
        }
        rows.push((t.label().to_string(), df, ss));
    }
    finish(n, proj, rows)
}

/// Cell means for a two-line interaction plot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionData {
    pub cells: Vec<(FacetLevel, RepKind, f64)>,
    /// `sign((C4 - C1) - (C3 - C2))`: positive when the deterministic line
    /// gains more from low equivocality than the probabilistic one.
    pub indicator: i8,
}

impl InteractionData {
    pub fn mean(&self, facet: FacetLevel, rep: RepKind) -> f64 {
        self.cells.iter().find(|(f, r, _)| *f == facet && *r == rep).map(|c| c.2).expect("all four cells present")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("facet,rep,mean\n");
        for (f, r, m) in &self.cells {
            let _ = writeln!(out, "{f},{r},{m:.6}");
        }
        let _ = writeln!(out, "# interaction_indicator={}", self.indicator);
        out
    }
}

pub fn interaction_plot_data(records: &[PerformanceRecord]) -> Result<InteractionData> {
    let mut sums = [(0.0f64, 0usize); 4];
    for r in records {
        let s = &mut sums[r.condition.index()];
        s.0 += r.profit;
        s.1 += 1;
    }
    let mut means = [0.0; 4];
    for c in Condition::ALL {
        let (sum, n) = sums[c.index()];
        if n == 0 {
            return Err(Error::input(format!("cell {c} is empty")));
        }
        means[c.index()] = sum / n as f64;
    }
    let m = |c: Condition| means[c.index()];
    let contrast = (m(Condition::C4) - m(Condition::C1)) - (m(Condition::C3) - m(Condition::C2));
    let indicator = if contrast > 0.0 {
        1
    } else if contrast < 0.0 {
        -1
    } else {
        0
    };
    let mut cells = Vec::with_capacity(4);
    for f in FacetLevel::ALL {
        for r in RepKind::ALL {
            cells.push((f, r, m(condition_of(f, r))));
        }
    }
    Ok(InteractionData { cells, indicator })
}
