use super::{mean_sd, tail_prob_t, TestKind, TestResult};
use crate::error::{Error, Result};
use crate::synthlab::{make_rng, sample_normal};

/// Lowest point of the 7-point Likert scale used by the manipulation checks.
pub const LIKERT_FLOOR: f64 = 1.0;

/// Welch's unequal-variance t-test from group summaries.
pub fn welch_from_summary(m1: f64, s1: f64, n1: usize, m2: f64, s2: f64, n2: usize) -> TestResult {
    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let a = s1 * s1 / n1f;
    let b = s2 * s2 / n2f;
    let se2 = a + b;
    let pooled_df = n1f + n2f - 2.0;
    if se2 == 0.0 {
        let (statistic, p) = if m1 == m2 { (0.0, 1.0) } else { ((m1 - m2).signum() * f64::INFINITY, 0.0) };
        return TestResult { statistic, df: pooled_df, p, kind: TestKind::WelchT };
    }
    let statistic = (m1 - m2) / se2.sqrt();
    let df = se2 * se2 / (a * a / (n1f - 1.0) + b * b / (n2f - 1.0));
    TestResult { statistic, df, p: tail_prob_t(statistic, df), kind: TestKind::WelchT }
}

/// Welch two-sample t-test of `x` against `y`.
pub fn welch_t(x: &[f64], y: &[f64]) -> Result<TestResult> {
    if x.len() < 2 || y.len() < 2 {
        return Err(Error::input("welch_t needs at least two observations per group"));
    }
    let (mx, sx) = mean_sd(x);
    let (my, sy) = mean_sd(y);
    Ok(welch_from_summary(mx, sx.unwrap_or(0.0), x.len(), my, sy.unwrap_or(0.0), y.len()))
}

/// Recovers the two group sds from a reported Welch result.
///
/// With `a = s1^2/n1` and `b = s2^2/n2`, the statistic fixes `a + b` and the
/// Satterthwaite df fixes `a^2/(n1-1) + b^2/(n2-1)`; eliminating `b` leaves a
/// quadratic in `a`. Of its roots, the one giving the smaller sd to the group
/// whose mean is nearer [`LIKERT_FLOOR`] is returned.
pub fn backsolve_welch(m1: f64, m2: f64, t: f64, df: f64, n1: usize, n2: usize) -> Result<(f64, f64)> {
    if t == 0.0 || !t.is_finite() {
        return Err(Error::invalid("t must be finite and nonzero"));
    }
    if n1 < 2 || n2 < 2 {
        return Err(Error::invalid("both groups need at least two observations"));
    }
    let (nu1, nu2) = ((n1 - 1) as f64, (n2 - 1) as f64);
    let lo = nu1.min(nu2);
    let hi = nu1 + nu2;
    if !(df > lo && df <= hi) {
        return Err(Error::invalid(format!("df {df} outside ({lo}, {hi}]")));
    }
    let se = ((m1 - m2) / t).abs();
    let s = se * se;
    let qa = 1.0 / nu1 + 1.0 / nu2;
    let qb = -2.0 * s / nu2;
    let qc = s * s * (1.0 / nu2 - 1.0 / df);
    let mut disc = qb * qb - 4.0 * qa * qc;
    // rounding at the equal-variance boundary
    if disc < 0.0 && disc > -1e-12 * qb * qb {
        disc = 0.0;
    }
    if disc < 0.0 {
        return Err(Error::Infeasible { reason: "no real root for the Welch system".into(), discriminant: disc });
    }
    let root = disc.sqrt();
    let candidates: Vec<(f64, f64)> = [(-qb - root) / (2.0 * qa), (-qb + root) / (2.0 * qa)]
        .into_iter()
        .filter(|a| *a >= -1e-15 * s && *a <= s * (1.0 + 1e-15))
        .map(|a| {
            let a = a.clamp(0.0, s);
            ((a * n1 as f64).sqrt(), ((s - a) * n2 as f64).sqrt())
        })
        .collect();
    if candidates.is_empty() {
        return Err(Error::Infeasible { reason: "roots imply negative variance".into(), discriminant: disc });
    }
    let first_near = (m1 - LIKERT_FLOOR).abs() <= (m2 - LIKERT_FLOOR).abs();
    let split = |&(s1, s2): &(f64, f64)| if first_near { (s1, s2) } else { (s2, s1) };
    let by_near_sd = |a: &&(f64, f64), b: &&(f64, f64)| split(a).0.total_cmp(&split(b).0);
    let best = candidates
        .iter()
        .filter(|c| {
            let (near, far) = split(c);
            near <= far
        })
        .min_by(by_near_sd)
        .or_else(|| candidates.iter().min_by(by_near_sd))
        .copied()
        .expect("nonempty");
    Ok(best)
}

/// Synthetic replica of a reported manipulation check: back-solve the group
/// sds, draw `n_low` and `n_high` normal responses (streams 0 and 1 of
/// `seed`) and run Welch's test of low against high.
pub fn replicate_manipulation_check(
    m_low: f64,
    m_high: f64,
    t: f64,
    df: f64,
    n_low: usize,
    n_high: usize,
    seed: u64,
) -> Result<TestResult> {
    let (s_low, s_high) = backsolve_welch(m_low, m_high, t, df, n_low, n_high)?;
    let draw = |stream: u64, m: f64, s: f64, n: usize| -> Result<Vec<f64>> {
        let mut rng = make_rng(seed, stream);
        (0..n).map(|_| sample_normal(&mut rng, m, s)).collect()
    };
    let low = draw(0, m_low, s_low, n_low)?;
    let high = draw(1, m_high, s_high, n_high)?;
    welch_t(&low, &high)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_samples_give_zero() {
        let r = welch_t(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!((r.p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn closed_form_example() {
        // equal n = 4, both variances 5/3: t = -1 / sqrt(5/6), df = 6
        let r = welch_t(&[1.0, 2.0, 3.0, 4.0], &[2.0, 3.0, 4.0, 5.0]).unwrap();
        assert!((r.statistic - (-1.0 / (5.0f64 / 6.0).sqrt())).abs() < 1e-12);
        assert!((r.statistic + 1.0954).abs() < 1e-4);
        assert!((r.df - 6.0).abs() < 1e-12);
        assert_eq!(r.kind, TestKind::WelchT);
    }

    #[test]
    fn degenerate_constant_groups() {
        let r = welch_t(&[2.0, 2.0], &[2.0, 2.0, 2.0]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.df, 3.0);
        assert_eq!(r.p, 1.0);
        assert!(welch_t(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn table2_backsolve() {
        let (s_low, s_high) = backsolve_welch(1.62, 5.81, -14.69, 31.10, 22, 22).unwrap();
        assert!((s_low - 0.604).abs() < 1e-3, "{s_low}");
        assert!((s_high - 1.194).abs() < 1e-3, "{s_high}");
        let f = welch_from_summary(1.62, s_low, 22, 5.81, s_high, 22);
        assert!((f.statistic + 14.69).abs() < 1e-9);
        assert!((f.df - 31.10).abs() < 1e-9);
    }

    #[test]
    fn table3_backsolve() {
        let (s_low, s_high) = backsolve_welch(1.53, 6.05, -22.23, 35.48, 22, 22).unwrap();
        assert!(s_low < s_high);
        let f = welch_from_summary(1.53, s_low, 22, 6.05, s_high, 22);
        assert!((f.statistic + 22.23).abs() <= 0.01);
        assert!((f.df - 35.48).abs() <= 0.01);
    }

    #[test]
    fn pairing_follows_floor_when_groups_are_swapped() {
        let (s_high, s_low) = backsolve_welch(5.81, 1.62, 14.69, 31.10, 22, 22).unwrap();
        assert!(s_low < s_high);
        assert!((s_low - 0.604).abs() < 1e-3);
    }

    #[test]
    fn equal_variance_boundary() {
        let (s1, s2) = backsolve_welch(1.0, 3.0, -4.0, 42.0, 22, 22).unwrap();
        assert!((s1 - s2).abs() < 1e-6 * s1, "{s1} {s2}");
    }

    #[test]
    fn infeasible_and_invalid() {
        assert!(matches!(backsolve_welch(1.0, 2.0, 0.0, 30.0, 22, 22), Err(Error::InvalidParameter(_))));
        assert!(matches!(backsolve_welch(1.0, 2.0, -3.0, 50.0, 22, 22), Err(Error::InvalidParameter(_))));
        assert!(matches!(backsolve_welch(1.0, 2.0, -3.0, 21.0, 22, 22), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn replica_is_deterministic() {
        let a = replicate_manipulation_check(1.62, 5.81, -14.69, 31.10, 22, 22, 4).unwrap();
        let b = replicate_manipulation_check(1.62, 5.81, -14.69, 31.10, 22, 22, 4).unwrap();
        assert_eq!(a, b);
        assert!(a.statistic < 0.0);
    }

    #[test]
    fn replica_t_near_reported_over_seeds() {
        let ts: Vec<f64> = (0..100)
            .map(|s| replicate_manipulation_check(1.62, 5.81, -14.69, 31.10, 22, 22, s).unwrap().statistic)
            .collect();
        let mean = ts.iter().sum::<f64>() / ts.len() as f64;
        assert!((mean / -14.69 - 1.0).abs() <= 0.15, "mean t {mean}");
    }
}
