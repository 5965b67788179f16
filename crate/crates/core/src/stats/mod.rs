//! Descriptive statistics, Welch tests, one-way and sequential factorial
//! ANOVA, and the t/F tail probabilities they report.

mod anova;
mod special;
mod welch;

pub use anova::{
    factorial_anova_sequential, interaction_plot_data, one_way_anova, one_way_anova_labeled, AnovaRow, AnovaTable,
    InteractionData, Term, TABLE6_TERMS,
};
pub use special::{ln_gamma, reg_inc_beta, tail_prob_f, tail_prob_t};
pub use welch::{backsolve_welch, replicate_manipulation_check, welch_from_summary, welch_t, LIKERT_FLOOR};

use std::collections::BTreeMap;
use std::fmt::Display;

use serde::{Deserialize, Serialize};

use crate::domain::PerformanceRecord;
use crate::error::{Error, Result};

/// Sample summary of one group; `sd` uses the `n - 1` denominator and is
/// `None` for single observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub group_key: String,
    pub n: usize,
    pub mean: f64,
    pub sd: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    WelchT,
    F,
}

/// `p` is two-sided for Welch t and upper-tail for F.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub df: f64,
    pub p: f64,
    pub kind: TestKind,
}

/// Two-pass mean with a correction term, then the `n - 1` sd.
pub(crate) fn mean_sd(xs: &[f64]) -> (f64, Option<f64>) {
    let n = xs.len() as f64;
    let m0 = xs.iter().sum::<f64>() / n;
    let mean = m0 + xs.iter().map(|x| x - m0).sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, None);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, Some((ss / (n - 1.0)).sqrt()))
}

pub fn summarize_group(key: impl Into<String>, xs: &[f64]) -> Result<GroupStats> {
    let group_key = key.into();
    if xs.is_empty() {
        return Err(Error::input(format!("group {group_key} is empty")));
    }
    let (mean, sd) = mean_sd(xs);
    Ok(GroupStats { group_key, n: xs.len(), mean, sd })
}

/// Per-group summaries of `profit`, ordered by the selector's key.
pub fn describe<K, F>(records: &[PerformanceRecord], group_by: F) -> Result<Vec<GroupStats>>
where
    K: Ord + Display,
    F: Fn(&PerformanceRecord) -> K,
{
    if records.is_empty() {
        return Err(Error::input("no records to describe"));
    }
    let mut groups: BTreeMap<K, Vec<f64>> = BTreeMap::new();
    for r in records {
        groups.entry(group_by(r)).or_default().push(r.profit);
    }
    groups.iter().map(|(k, xs)| summarize_group(k.to_string(), xs)).collect()
}

/// Significance code legend: `***` < 0.001 < `**` < 0.01 < `*` < 0.05 < `.` < 0.1.
pub fn signif_code(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else if p < 0.1 {
        "."
    } else {
        ""
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Condition, Gender};

    fn rec(id: u32, c: Condition, g: Gender, p: f64) -> PerformanceRecord {
        PerformanceRecord { subject_id: id, condition: c, gender: g, profit: p }
    }

    #[test]
    fn identical_values() {
        let g = summarize_group("x", &[0.1; 7]).unwrap();
        assert_eq!(g.mean, 0.1);
        assert_eq!(g.sd, Some(0.0));
    }

    #[test]
    fn one_to_four() {
        let g = summarize_group("x", &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((g.mean - 2.5).abs() < 1e-15);
        assert!((g.sd.unwrap() - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((g.sd.unwrap() - 1.29099).abs() < 1e-5);
    }

    #[test]
    fn singleton_has_no_sd() {
        let g = summarize_group("x", &[3.0]).unwrap();
        assert_eq!(g.n, 1);
        assert_eq!(g.sd, None);
        assert!(summarize_group("x", &[]).is_err());
    }

    #[test]
    fn describe_groups_in_key_order() {
        let rs = vec![
            rec(1, Condition::C4, Gender::F, 1.0),
            rec(2, Condition::C1, Gender::M, 2.0),
            rec(3, Condition::C4, Gender::M, 3.0),
        ];
        let by_cond = describe(&rs, |r| r.condition).unwrap();
        let keys: Vec<_> = by_cond.iter().map(|g| g.group_key.as_str()).collect();
        assert_eq!(keys, ["HiEqv-Det", "LoEqv-Det"]);
        assert_eq!(by_cond[1].n, 2);
        assert_eq!(by_cond[1].mean, 2.0);
        let by_gender = describe(&rs, |r| r.gender).unwrap();
        assert_eq!(by_gender[0].group_key, "F");
        assert!(describe(&[], |r| r.gender).is_err());
    }

    #[test]
    fn signif_codes() {
        assert_eq!(signif_code(0.0001), "***");
        assert_eq!(signif_code(0.005), "**");
        assert_eq!(signif_code(0.02), "*");
        assert_eq!(signif_code(0.06), ".");
        assert_eq!(signif_code(0.9), "");
    }
}
