//! Run configuration: one JSON document, optionally patched by `--set`.

use std::path::{Path, PathBuf};

use acflab::acfloop::{Policy, DEFAULT_EXPLORATION_C};
use acflab::marketsim::MarketScenario;
use acflab::mixture::{SelectOptions, VarianceModel};
use acflab::synthlab::{calibration_by_name, Calibration, TABLE5_MOMENTS};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixtureConfig {
    pub g_min: usize,
    pub g_max: usize,
    pub models: Vec<VarianceModel>,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for MixtureConfig {
    fn default() -> Self {
        let d = SelectOptions::default();
        MixtureConfig {
            g_min: *d.g_range.start(),
            g_max: *d.g_range.end(),
            models: d.models,
            tol: d.tol,
            max_iter: d.max_iter,
        }
    }
}

impl MixtureConfig {
    pub fn options(&self) -> SelectOptions {
        SelectOptions {
            g_range: self.g_min..=self.g_max,
            models: self.models.clone(),
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoopConfig {
    pub policy: Policy,
    pub steps: usize,
    pub exploration_c: f64,
    /// Environment the recommender is run against.
    pub calibration: String,
}

impl Default for LoopConfig {
    fn default() -> Self {
        LoopConfig {
            policy: Policy::Optimism,
            steps: 4000,
            exploration_c: DEFAULT_EXPLORATION_C,
            calibration: "table5_1d".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    /// Calibration used by `synth`.
    pub calibration: String,
    pub n_per_condition: usize,
    /// Subjects per condition, C1..C4.
    pub cells: [usize; 4],
    /// `[female, male]`.
    pub gender_counts: [usize; 2],
    /// Profit `[mean, sd]` per condition, C1..C4, matched by agent calibration.
    pub targets: [[f64; 2]; 4],
    pub calibration_budget: usize,
    pub scenario: MarketScenario,
    pub mixture: MixtureConfig,
    #[serde(rename = "loop")]
    pub loop_cfg: LoopConfig,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: None,
            calibration: "paper_regime_2d".into(),
            n_per_condition: 1000,
            cells: [22, 22, 22, 19],
            gender_counts: [40, 45],
            targets: TABLE5_MOMENTS.map(|(m, s)| [m, s]),
            calibration_budget: 200,
            scenario: MarketScenario::default(),
            mixture: MixtureConfig::default(),
            loop_cfg: LoopConfig::default(),
            output_dir: PathBuf::from("acflab-out"),
        }
    }
}

fn set_path(root: &mut Value, key: &str, raw: &str) -> CliResult<()> {
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| CliError::Usage(format!("--set {key}: {} is not an object", parts[..i].join("."))))?;
        if !obj.contains_key(*part) {
            return Err(CliError::Usage(format!("--set {key}: unknown key {part:?}")));
        }
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj.get_mut(*part).expect("checked");
    }
    unreachable!("split yields at least one part")
}

impl RunConfig {
    /// Defaults, overlaid by the file at `path`, then by `K=V` overrides.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> CliResult<Self> {
        let mut value = serde_json::to_value(RunConfig::default()).expect("serializable");
        if let Some(p) = path {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            let file: Value =
                serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", p.display())))?;
            let Value::Object(map) = file else {
                return Err(CliError::Parse(format!("{}: top level must be an object", p.display())));
            };
            let root = value.as_object_mut().expect("object");
            for (k, v) in map {
                if !root.contains_key(&k) {
                    return Err(CliError::Parse(format!("{}: unknown key {k:?}", p.display())));
                }
                if let (Some(Value::Object(dst)), Value::Object(src)) = (root.get_mut(&k), &v) {
                    for (ik, iv) in src {
                        dst.insert(ik.clone(), iv.clone());
                    }
                } else {
                    root.insert(k, v);
                }
            }
        }
        for o in overrides {
            let (k, v) =
                o.split_once('=').ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got {o:?}")))?;
            set_path(&mut value, k.trim(), v.trim())?;
        }
        serde_json::from_value(value).map_err(|e| CliError::Usage(format!("invalid configuration: {e}")))
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Usage(m));
        if self.n_per_condition == 0 {
            return bad("n_per_condition must be positive".into());
        }
        if self.cells.iter().any(|&c| c == 0) {
            return bad("every cell count must be positive".into());
        }
        if self.gender_counts.iter().sum::<usize>() != self.cells.iter().sum::<usize>() {
            return bad(format!(
                "gender counts {:?} do not sum to the {} subjects in cells",
                self.gender_counts,
                self.cells.iter().sum::<usize>()
            ));
        }
        if self.calibration_budget == 0 {
            return bad("calibration_budget must be positive".into());
        }
        self.env_calibration(&self.calibration)?;
        self.env_calibration(&self.loop_cfg.calibration)?;
        self.scenario.validate()?;
        if self.mixture.g_min == 0 || self.mixture.g_min > self.mixture.g_max || self.mixture.models.is_empty() {
            return bad("mixture needs 1 <= g_min <= g_max and at least one model".into());
        }
        if !(self.mixture.tol > 0.0) || self.mixture.max_iter == 0 {
            return bad("mixture tol and max_iter must be positive".into());
        }
        if self.loop_cfg.steps < acflab::acfloop::MIN_LOOP_STEPS {
            return bad(format!("loop.steps must be at least {}", acflab::acfloop::MIN_LOOP_STEPS));
        }
        if !(self.loop_cfg.exploration_c >= 0.0) {
            return bad("loop.exploration_c must be nonnegative".into());
        }
        Ok(())
    }

    pub fn env_calibration(&self, name: &str) -> CliResult<Calibration> {
        calibration_by_name(name).ok_or_else(|| CliError::Usage(format!("unknown calibration {name:?}")))
    }

    pub fn seed(&self) -> CliResult<u64> {
        self.seed
            .ok_or_else(|| CliError::Usage("a seed is required: pass --seed N or set \"seed\" in the config".into()))
    }

    pub fn targets(&self) -> [(f64, f64); 4] {
        self.targets.map(|[m, s]| (m, s))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("serializable");
        s.push('\n');
        s
    }
}
