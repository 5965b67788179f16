//! Adaptive recommender: one two-armed bandit per facet level, choosing the
//! representation to serve and learning from the performance it produces.
//!
//! The optimism score of an arm is
//! `mean + c * sigma_f * sqrt(ln t_f / n)` where `t_f` counts pulls under the
//! facet, `n` pulls of the arm and `sigma_f` is the larger of the two arms'
//! sample sds (1 until either can be estimated). Scaling by `sigma_f` makes
//! the exploration rate invariant to the units of performance. Under
//! optimism an arm pulled fewer than `8 ln t_f` times is played before any
//! score is compared, so the sd estimates behind the bonus stay informed.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{condition_of, Condition, FacetLevel, PerformanceRecord, RepKind};
use crate::error::{Error, Result};
use crate::stats::{summarize_group, GroupStats};
use crate::synthlab::{make_rng, Calibration, RngStream};

pub const DEFAULT_EXPLORATION_C: f64 = 2.0;

/// Streaming mean and sum of squared deviations of one arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmStats {
    pub facet: FacetLevel,
    pub rep: RepKind,
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
}

impl ArmStats {
    pub fn new(facet: FacetLevel, rep: RepKind) -> Self {
        ArmStats { facet, rep, n: 0, mean: 0.0, m2: 0.0 }
    }

    /// Welford update.
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn sd(&self) -> Option<f64> {
        (self.n >= 2).then(|| (self.m2 / (self.n - 1) as f64).sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    GreedyMean,
    Optimism,
}

impl std::str::FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy_mean" | "greedy" => Ok(Policy::GreedyMean),
            "optimism" | "ucb" => Ok(Policy::Optimism),
            _ => Err(Error::parse(format!("unknown policy {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// 1-based step.
    pub t: u64,
    pub facet: FacetLevel,
    pub rep: RepKind,
    pub performance: f64,
}

/// Arm index: facet-major, `Det` before `Prob`.
fn arm_index(facet: FacetLevel, rep: RepKind) -> usize {
    let f = match facet {
        FacetLevel::HighEquivocality => 0,
        FacetLevel::LowEquivocality => 1,
    };
    let r = match rep {
        RepKind::Deterministic => 0,
        RepKind::Probabilistic => 1,
    };
    2 * f + r
}

#[derive(Debug, Clone)]
pub struct LoopState {
    pub arms: [ArmStats; 4],
    pub history: Vec<Observation>,
    pub policy: Policy,
    pub exploration_c: f64,
    pub rng: RngStream,
}

fn fresh_arms() -> [ArmStats; 4] {
    let mut arms = [ArmStats::new(FacetLevel::HighEquivocality, RepKind::Deterministic); 4];
    for facet in FacetLevel::ALL {
        for rep in RepKind::ALL {
            arms[arm_index(facet, rep)] = ArmStats::new(facet, rep);
        }
    }
    arms
}

impl LoopState {
    pub fn new(policy: Policy, exploration_c: f64, seed: u64) -> Result<Self> {
        if !(exploration_c >= 0.0 && exploration_c.is_finite()) {
            return Err(Error::invalid("exploration_c must be nonnegative"));
        }
        Ok(LoopState { arms: fresh_arms(), history: Vec::new(), policy, exploration_c, rng: make_rng(seed, 0) })
    }

    /// State after observing `history` in order.
    pub fn from_history(policy: Policy, exploration_c: f64, seed: u64, history: &[Observation]) -> Result<Self> {
        let mut s = LoopState::new(policy, exploration_c, seed)?;
        for o in history {
            s.observe(o.facet, o.rep, o.performance)?;
        }
        Ok(s)
    }

    pub fn arm(&self, facet: FacetLevel, rep: RepKind) -> &ArmStats {
        &self.arms[arm_index(facet, rep)]
    }

    /// Larger sample sd of the two arms under `facet`.
    fn facet_scale(&self, facet: FacetLevel) -> f64 {
        RepKind::ALL.iter().filter_map(|&r| self.arm(facet, r).sd()).reduce(f64::max).unwrap_or(1.0)
    }

    pub fn score(&self, facet: FacetLevel, rep: RepKind) -> f64 {
        let a = self.arm(facet, rep);
        match self.policy {
            Policy::GreedyMean => a.mean,
            Policy::Optimism => {
                let t_f = self.arm(facet, RepKind::Deterministic).n + self.arm(facet, RepKind::Probabilistic).n;
                let bonus = self.exploration_c * self.facet_scale(facet) * ((t_f as f64).ln() / a.n as f64).sqrt();
                a.mean + bonus
            }
        }
    }

    /// Unplayed arms first (`Det`, then `Prob`). Under optimism, arms below
    /// the exploration floor come next, fewer pulls first. Otherwise the
    /// higher score wins with ties to `Det`.
    pub fn recommend(&self, facet: FacetLevel) -> RepKind {
        if let Some(r) = RepKind::ALL.into_iter().find(|&r| self.arm(facet, r).n == 0) {
            return r;
        }
        let (d, p) = (self.arm(facet, RepKind::Deterministic), self.arm(facet, RepKind::Probabilistic));
        if self.policy == Policy::Optimism {
            let floor = 8.0 * ((d.n + p.n) as f64).ln();
            let starved = |a: &ArmStats| (a.n as f64) < floor;
            if starved(d) || starved(p) {
                return if p.n < d.n { RepKind::Probabilistic } else { RepKind::Deterministic };
            }
        }
        let (d, p) = (self.score(facet, RepKind::Deterministic), self.score(facet, RepKind::Probabilistic));
        if p > d {
            RepKind::Probabilistic
        } else {
            RepKind::Deterministic
        }
    }

    pub fn observe(&mut self, facet: FacetLevel, rep: RepKind, performance: f64) -> Result<()> {
        if !performance.is_finite() {
            return Err(Error::input(format!("performance must be finite, got {performance}")));
        }
        self.arms[arm_index(facet, rep)].push(performance);
        let t = self.history.len() as u64 + 1;
        self.history.push(Observation { t, facet, rep, performance });
        Ok(())
    }
}

/// True reward distribution of every (facet, representation) arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopEnv {
    /// Indexed by `Condition::index()`.
    pub means: [f64; 4],
    pub sds: [f64; 4],
}

impl LoopEnv {
    /// Uses the last axis of each condition's Gaussian.
    pub fn from_calibration(cal: &Calibration) -> Self {
        let mut env = LoopEnv { means: [0.0; 4], sds: [0.0; 4] };
        for c in Condition::ALL {
            let g = cal.get(c);
            env.means[c.index()] = *g.mean.last().expect("nonempty");
            env.sds[c.index()] = *g.sd.last().expect("nonempty");
        }
        env
    }

    pub fn mean(&self, facet: FacetLevel, rep: RepKind) -> f64 {
        self.means[condition_of(facet, rep).index()]
    }

    pub fn best_mean(&self, facet: FacetLevel) -> f64 {
        self.mean(facet, RepKind::Deterministic).max(self.mean(facet, RepKind::Probabilistic))
    }

    fn validate(&self) -> Result<()> {
        if self.means.iter().any(|m| !m.is_finite()) || self.sds.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(Error::invalid("environment needs finite means and nonnegative sds"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopStep {
    pub t: u64,
    pub facet: FacetLevel,
    pub choice: RepKind,
    pub reward: f64,
    pub cum_regret: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChoiceFrequency {
    pub facet: FacetLevel,
    pub n: u64,
    pub deterministic: f64,
    pub probabilistic: f64,
}

impl ChoiceFrequency {
    /// More frequent representation; ties to `Det`.
    pub fn modal(&self) -> RepKind {
        if self.probabilistic > self.deterministic {
            RepKind::Probabilistic
        } else {
            RepKind::Deterministic
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopTrace {
    pub steps: Vec<LoopStep>,
    /// Per facet in `FacetLevel::ALL` order; `None` when the facet never
    /// came up in the final quarter.
    pub final_quarter: Vec<Option<ChoiceFrequency>>,
    pub total_regret: f64,
    pub arms: [ArmStats; 4],
}

pub const LOOP_TRACE_HEADER: &str = "step,facet,choice,reward,cum_regret";

impl LoopTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(40 * (self.steps.len() + 1));
        out.push_str(LOOP_TRACE_HEADER);
        out.push('\n');
        for s in &self.steps {
            let _ = writeln!(out, "{},{},{},{:.6},{:.6}", s.t, s.facet, s.choice, s.reward, s.cum_regret);
        }
        out
    }

    /// Cumulative regret after `t` steps.
    pub fn regret_at(&self, t: usize) -> f64 {
        if t == 0 {
            0.0
        } else {
            self.steps[t - 1].cum_regret
        }
    }

    pub fn frequency(&self, facet: FacetLevel) -> Option<&ChoiceFrequency> {
        let i = FacetLevel::ALL.iter().position(|f| *f == facet).expect("known facet");
        self.final_quarter[i].as_ref()
    }

    pub fn modal(&self, facet: FacetLevel) -> Option<RepKind> {
        self.frequency(facet).map(ChoiceFrequency::modal)
    }
}

pub const MIN_LOOP_STEPS: usize = 8;

/// Runs `steps` rounds: draw a facet uniformly, recommend, sample the arm's
/// Gaussian and observe. Regret is measured against the true per-facet best
/// mean.
pub fn run_loop(env: &LoopEnv, policy: Policy, exploration_c: f64, steps: usize, seed: u64) -> Result<LoopTrace> {
    if steps < MIN_LOOP_STEPS {
        return Err(Error::invalid(format!("need at least {MIN_LOOP_STEPS} steps, got {steps}")));
    }
    env.validate()?;
    let mut state = LoopState::new(policy, exploration_c, seed)?;
    let mut out = Vec::with_capacity(steps);
    let mut regret = 0.0;
    for t in 1..=steps as u64 {
        let facet = if state.rng.next_f64() < 0.5 { FacetLevel::HighEquivocality } else { FacetLevel::LowEquivocality };
        let choice = state.recommend(facet);
        let c = condition_of(facet, choice).index();
        let reward = env.means[c] + env.sds[c] * state.rng.standard_normal();
        state.observe(facet, choice, reward)?;
        regret += env.best_mean(facet) - env.means[c];
        out.push(LoopStep { t, facet, choice, reward, cum_regret: regret });
    }
    let tail = &out[steps - steps / 4..];
    let final_quarter = FacetLevel::ALL
        .iter()
        .map(|&facet| {
            let seen: Vec<&LoopStep> = tail.iter().filter(|s| s.facet == facet).collect();
            if seen.is_empty() {
                return None;
            }
            let n = seen.len() as u64;
            let det = seen.iter().filter(|s| s.choice == RepKind::Deterministic).count() as u64;
            Some(ChoiceFrequency {
                facet,
                n,
                deterministic: det as f64 / n as f64,
                probabilistic: (n - det) as f64 / n as f64,
            })
        })
        .collect();
    Ok(LoopTrace { steps: out, final_quarter, total_regret: regret, arms: state.arms })
}

/// Independent runs, one per seed, returned in seed order.
pub fn run_replications(
    env: &LoopEnv,
    policy: Policy,
    exploration_c: f64,
    steps: usize,
    seeds: &[u64],
) -> Result<Vec<LoopTrace>> {
    seeds.par_iter().map(|&s| run_loop(env, policy, exploration_c, steps, s)).collect()
}

/// Records equivalent to a loop history, one per observation.
pub fn history_records(history: &[Observation]) -> Vec<PerformanceRecord> {
    history
        .iter()
        .map(|o| PerformanceRecord {
            subject_id: o.t as u32,
            condition: condition_of(o.facet, o.rep),
            gender: crate::domain::Gender::F,
            profit: o.performance,
        })
        .collect()
}

/// Per-arm `(mean, sd, n)` summaries of a history, ordered by condition and
/// keyed by the condition label, matching `describe` grouped by condition.
pub fn fit_predictor(history: &[Observation]) -> Result<Vec<GroupStats>> {
    if history.is_empty() {
        return Err(Error::input("history is empty"));
    }
    let mut groups: [Vec<f64>; 4] = Default::default();
    for o in history {
        groups[condition_of(o.facet, o.rep).index()].push(o.performance);
    }
    Condition::ALL
        .iter()
        .filter(|c| !groups[c.index()].is_empty())
        .map(|c| summarize_group(c.to_string(), &groups[c.index()]))
        .collect()
}
