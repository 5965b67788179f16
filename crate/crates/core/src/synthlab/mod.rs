//! Per-condition Gaussian synthesis of labeled performance data.
//!
//! Two calibrations ship with the crate:
//!
//! * `table5_1d` uses the observed per-condition profit moments directly.
//!   The high-equivocality deterministic cell (sd 11.27) overlaps every
//!   other cell, so clustering on it is necessarily poor.
//! * `paper_regime_2d` has unit axis-aligned sds. Axis 0 carries the facet
//!   signal (high equivocality sits at large values), axis 1 the performance
//!   signal. Every pair of conditions is at least 10 sd-units apart except
//!   the two low-equivocality cells, which are 3.806 sd-units apart, giving
//!   a pairwise Bayes error of `Phi(-1.903) = 0.0285` for that pair.

mod rng;

pub use rng::{make_rng, mix64, sample_normal, RngStream};

use serde::{Deserialize, Serialize};

use crate::domain::Condition;
use crate::error::{Error, Result};

/// Separation between the two low-equivocality means in `paper_regime_2d`.
pub const LOW_PAIR_SEPARATION: f64 = 3.806;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionGaussian {
    pub condition: Condition,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl ConditionGaussian {
    pub fn new(condition: Condition, mean: Vec<f64>, sd: Vec<f64>) -> Result<Self> {
        if mean.is_empty() || mean.len() > 2 || mean.len() != sd.len() {
            return Err(Error::invalid("mean and sd must share dimension 1 or 2"));
        }
        if sd.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::invalid(format!("sds must be positive for {condition}")));
        }
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::invalid(format!("means must be finite for {condition}")));
        }
        Ok(ConditionGaussian { condition, mean, sd })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Named set of per-condition Gaussians, one per condition code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub name: String,
    pub dim: usize,
    pub per_condition: Vec<ConditionGaussian>,
}

impl Calibration {
    /// Validates dimension agreement and that each condition occurs once.
    /// Entries are stored in `C1..C4` order regardless of input order.
    pub fn new(name: impl Into<String>, mut per_condition: Vec<ConditionGaussian>) -> Result<Self> {
        let name = name.into();
        if per_condition.len() != 4 {
            return Err(Error::invalid(format!("calibration {name} needs 4 conditions")));
        }
        per_condition.sort_by_key(|g| g.condition);
        for (g, c) in per_condition.iter().zip(Condition::ALL) {
            if g.condition != c {
                return Err(Error::invalid(format!("calibration {name} repeats {}", g.condition)));
            }
        }
        let dim = per_condition[0].dim();
        if per_condition.iter().any(|g| g.dim() != dim) {
            return Err(Error::invalid(format!("calibration {name} mixes dimensions")));
        }
        Ok(Calibration { name, dim, per_condition })
    }

    pub fn get(&self, c: Condition) -> &ConditionGaussian {
        &self.per_condition[c.index()]
    }

    /// Per-condition Gaussians from scalar `(mean, sd)` pairs in `C1..C4` order.
    pub fn univariate(name: impl Into<String>, moments: [(f64, f64); 4]) -> Result<Self> {
        let per = Condition::ALL
            .iter()
            .zip(moments)
            .map(|(&c, (m, s))| ConditionGaussian::new(c, vec![m], vec![s]))
            .collect::<Result<Vec<_>>>()?;
        Calibration::new(name, per)
    }
}

/// Observed profit moments per condition, `C1..C4`.
pub const TABLE5_MOMENTS: [(f64, f64); 4] = [(-0.72, 11.27), (5.13, 5.61), (7.39, 0.81), (8.19, 2.39)];

pub fn table5_1d() -> Calibration {
    Calibration::univariate("table5_1d", TABLE5_MOMENTS).expect("builtin calibration is valid")
}

pub fn paper_regime_2d() -> Calibration {
    let means = [
        (Condition::C1, [14.0, 0.0]),
        (Condition::C2, [14.0, 10.0]),
        (Condition::C3, [4.0, 10.5]),
        (Condition::C4, [4.0, 10.5 + LOW_PAIR_SEPARATION]),
    ];
    let per = means
        .iter()
        .map(|(c, m)| ConditionGaussian::new(*c, m.to_vec(), vec![1.0, 1.0]))
        .collect::<Result<Vec<_>>>()
        .expect("builtin calibration is valid");
    Calibration::new("paper_regime_2d", per).expect("builtin calibration is valid")
}

pub fn builtin_calibrations() -> Vec<Calibration> {
    vec![table5_1d(), paper_regime_2d()]
}

pub fn calibration_by_name(name: &str) -> Option<Calibration> {
    builtin_calibrations().into_iter().find(|c| c.name == name)
}

/// Labeled feature rows, stored row-major with `dim` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub dim: usize,
    pub features: Vec<f64>,
    pub labels: Vec<Condition>,
    pub seed: u64,
    pub calibration_name: String,
}

impl SyntheticDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks_exact(self.dim)
    }
}

/// `n_per_condition` rows for each condition in `C1..C4` order. Condition
/// `c` draws from stream `c.index()` of `seed`, axis 0 before axis 1.
pub fn generate_dataset(cal: &Calibration, n_per_condition: usize, seed: u64) -> Result<SyntheticDataset> {
    if n_per_condition == 0 {
        return Err(Error::invalid("n_per_condition must be at least 1"));
    }
    let dim = cal.dim;
    let mut features = Vec::with_capacity(4 * n_per_condition * dim);
    let mut labels = Vec::with_capacity(4 * n_per_condition);
    for g in &cal.per_condition {
        let mut rng = make_rng(seed, g.condition.index() as u64);
        for _ in 0..n_per_condition {
            for (m, s) in g.mean.iter().zip(&g.sd) {
                features.push(sample_normal(&mut rng, *m, *s)?);
            }
            labels.push(g.condition);
        }
    }
    Ok(SyntheticDataset { dim, features, labels, seed, calibration_name: cal.name.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn label_moments(ds: &SyntheticDataset, c: Condition, axis: usize) -> (f64, f64, usize) {
        let xs: Vec<f64> = ds.rows().zip(&ds.labels).filter(|(_, l)| **l == c).map(|(r, _)| r[axis]).collect();
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, v.sqrt(), xs.len())
    }

    #[test]
    fn table5_parameters() {
        let cal = table5_1d();
        assert_eq!(cal.dim, 1);
        assert_eq!(cal.get(Condition::C1).mean, vec![-0.72]);
        assert_eq!(cal.get(Condition::C1).sd, vec![11.27]);
        assert_eq!(cal.get(Condition::C4).mean, vec![8.19]);
        assert_eq!(cal.get(Condition::C4).sd, vec![2.39]);
        assert_eq!(cal.get(Condition::C2).mean, vec![5.13]);
        assert_eq!(cal.get(Condition::C3).sd, vec![0.81]);
    }

    #[test]
    fn calibration_rejects_duplicates_and_bad_sd() {
        let g = |c| ConditionGaussian::new(c, vec![0.0], vec![1.0]).unwrap();
        assert!(Calibration::new("x", vec![g(Condition::C1), g(Condition::C1), g(Condition::C3), g(Condition::C4)])
            .is_err());
        assert!(Calibration::new("x", vec![g(Condition::C1)]).is_err());
        assert!(ConditionGaussian::new(Condition::C1, vec![0.0], vec![0.0]).is_err());
        assert!(ConditionGaussian::new(Condition::C1, vec![0.0, 1.0], vec![1.0]).is_err());
    }

    #[test]
    fn minimal_dataset() {
        for cal in builtin_calibrations() {
            let ds = generate_dataset(&cal, 1, 3).unwrap();
            assert_eq!(ds.len(), 4);
            assert_eq!(ds.labels, Condition::ALL.to_vec());
            assert_eq!(ds.features.len(), 4 * cal.dim);
        }
        assert!(generate_dataset(&table5_1d(), 0, 3).is_err());
    }

    #[test]
    fn full_size_label_counts() {
        let ds = generate_dataset(&table5_1d(), 1000, 11).unwrap();
        assert_eq!(ds.len(), 4000);
        for c in Condition::ALL {
            assert_eq!(ds.labels.iter().filter(|l| **l == c).count(), 1000);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_dataset(&paper_regime_2d(), 50, 8).unwrap();
        let b = generate_dataset(&paper_regime_2d(), 50, 8).unwrap();
        let c = generate_dataset(&paper_regime_2d(), 50, 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.features, c.features);
    }

    #[test]
    fn table5_means_within_standard_error() {
        let cal = table5_1d();
        let ds = generate_dataset(&cal, 1000, 12).unwrap();
        for c in Condition::ALL {
            let g = cal.get(c);
            let (m, _, n) = label_moments(&ds, c, 0);
            let bound = 3.0 * g.sd[0] / (n as f64).sqrt();
            assert!((m - g.mean[0]).abs() <= bound, "{c}: {m}");
        }
    }

    #[test]
    fn moments_converge_at_large_n() {
        for cal in builtin_calibrations() {
            let ds = generate_dataset(&cal, 100_000, 77).unwrap();
            for c in Condition::ALL {
                let g = cal.get(c);
                for axis in 0..cal.dim {
                    let (m, s, n) = label_moments(&ds, c, axis);
                    let sd = g.sd[axis];
                    let se_mean = sd / (n as f64).sqrt();
                    let se_sd = sd / (2.0 * (n as f64 - 1.0)).sqrt();
                    assert!((m - g.mean[axis]).abs() <= 4.0 * se_mean, "{} {c} axis {axis} mean", cal.name);
                    assert!((s - sd).abs() <= 4.0 * se_sd, "{} {c} axis {axis} sd", cal.name);
                }
            }
        }
    }

    fn distance(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
    }

    #[test]
    fn regime_2d_separations_and_bayes_error() {
        use statrs::distribution::{ContinuousCDF, Normal};
        let phi = Normal::new(0.0, 1.0).unwrap();
        let cal = paper_regime_2d();
        assert_eq!(cal.dim, 2);
        for g in &cal.per_condition {
            assert_eq!(g.sd, vec![1.0, 1.0]);
        }
        for (i, a) in cal.per_condition.iter().enumerate() {
            for b in &cal.per_condition[i + 1..] {
                let d = distance(&a.mean, &b.mean);
                let err = phi.cdf(-d / 2.0);
                if (a.condition, b.condition) == (Condition::C3, Condition::C4) {
                    assert!((d - 3.806).abs() < 1e-12);
                    assert!((err - 0.0285).abs() < 1e-4, "{err}");
                } else {
                    assert!(d >= 8.0, "{} {} {d}", a.condition, b.condition);
                    assert!(err <= phi.cdf(-4.0));
                }
            }
        }
        let err = phi.cdf(-LOW_PAIR_SEPARATION / 2.0);
        let expected_accuracy = 1.0 - 2.0 * err * 1000.0 / 4000.0;
        assert!((expected_accuracy - 0.98575).abs() < 5e-5, "{expected_accuracy}");
    }

    #[test]
    fn regime_2d_semantics() {
        let cal = paper_regime_2d();
        for c in Condition::ALL {
            let m = &cal.get(c).mean;
            match c.facet() {
                crate::domain::FacetLevel::HighEquivocality => assert!(m[0] > 10.0),
                crate::domain::FacetLevel::LowEquivocality => assert!(m[0] < 10.0),
            }
        }
        let perf: Vec<f64> = Condition::ALL.iter().map(|c| cal.get(*c).mean[1]).collect();
        assert!(perf[0] < perf[1] && perf[1] < perf[2] && perf[2] < perf[3]);
    }

    #[test]
    fn lookup_by_name() {
        assert!(calibration_by_name("table5_1d").is_some());
        assert!(calibration_by_name("paper_regime_2d").is_some());
        assert!(calibration_by_name("nope").is_none());
    }
}
