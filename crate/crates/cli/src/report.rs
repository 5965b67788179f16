//! Markdown report assembled from the files earlier commands left in the
//! output directory. The report is a pure function of those files.

use std::fmt::Write as _;
use std::path::Path;

use acflab::domain::Condition;
use acflab::evalmetrics::pct;
use serde_json::Value;

use crate::commands::{AGENTS_FILE, ANOVA_FILE, DATASET_FILE, METRICS_FILE, SUMMARY_FILE};
use crate::error::{CliError, CliResult};
use crate::io::{parse_dataset, read_json, read_text, write_text};

pub const REPORT_FILE: &str = "report.md";
pub const REQUIRED_INPUTS: [&str; 4] = [DATASET_FILE, METRICS_FILE, ANOVA_FILE, SUMMARY_FILE];

/// CSV as a markdown table; `#` lines become notes below it.
fn csv_to_markdown(text: &str) -> String {
    let mut notes = Vec::new();
    let mut rows: Vec<Vec<String>> = Vec::new();
    for line in text.lines() {
        if let Some(n) = line.strip_prefix('#') {
            notes.push(n.trim().to_string());
        } else if !line.is_empty() {
            rows.push(line.split(',').map(|c| c.replace('|', "\\|")).collect());
        }
    }
    let mut out = String::new();
    if let Some((head, body)) = rows.split_first() {
        let _ = writeln!(out, "| {} |", head.join(" | "));
        let _ = writeln!(out, "|{}|", vec!["---"; head.len()].join("|"));
        for r in body {
            let _ = writeln!(out, "| {} |", r.join(" | "));
        }
    }
    for n in notes {
        let _ = writeln!(out, "\n{n}");
    }
    out
}

struct Sections {
    out: String,
    n: usize,
}

impl Sections {
    fn heading(&mut self, title: &str, source: &str, provenance: &str) {
        self.n += 1;
        let _ = writeln!(self.out, "\n## {}. {title}\n", self.n);
        let _ = writeln!(self.out, "Source: `{source}`. Provenance: {provenance}\n");
    }

    fn csv(&mut self, dir: &Path, file: &str, title: &str, provenance: &str) -> CliResult<()> {
        let path = dir.join(file);
        if path.exists() {
            self.heading(title, file, provenance);
            let md = csv_to_markdown(&read_text(&path)?);
            self.out.push_str(&md);
        }
        Ok(())
    }
}

fn f64_at(v: &Value, key: &str) -> f64 {
    v.get(key).and_then(Value::as_f64).unwrap_or(f64::NAN)
}

fn str_at<'a>(v: &'a Value, key: &str) -> &'a str {
    v.get(key).and_then(Value::as_str).unwrap_or("unrecorded")
}

fn seed_at(v: &Value, key: &str) -> String {
    v.get(key).and_then(Value::as_u64).map(|s| s.to_string()).unwrap_or_else(|| "unrecorded".into())
}

pub fn build_report(dir: &Path) -> CliResult<String> {
    let missing: Vec<String> =
        REQUIRED_INPUTS.iter().filter(|f| !dir.join(f).exists()).map(|f| f.to_string()).collect();
    if !missing.is_empty() {
        return Err(CliError::MissingInput(missing));
    }
    let dataset_path = dir.join(DATASET_FILE);
    let ds = parse_dataset(&read_text(&dataset_path)?, &dataset_path)?;
    let metrics = read_json(&dir.join(METRICS_FILE))?;
    let summary = read_json(&dir.join(SUMMARY_FILE))?;
    let agents = if dir.join(AGENTS_FILE).exists() { Some(read_json(&dir.join(AGENTS_FILE))?) } else { None };

    let ds_prov = format!(
        "synthetic draws from calibration `{}`, seed {}.",
        ds.meta("calibration").unwrap_or("unrecorded"),
        ds.meta("seed").unwrap_or("unrecorded")
    );
    let exp_prov = match &agents {
        Some(a) => format!(
            "simulated subjects trading with agents fitted to the target profit moments (`{AGENTS_FILE}`), seed {}.",
            seed_at(a, "seed")
        ),
        None => "simulated subjects; agent calibration file not present.".to_string(),
    };
    let check_prov = match &agents {
        Some(a) => {
            format!("Likert responses drawn to match the reported summary statistics, seed {}.", seed_at(a, "seed"))
        }
        None => "Likert responses drawn to match the reported summary statistics.".to_string(),
    };

    let mut s = Sections { out: String::from("# acflab run report\n"), n: 0 };

    s.heading("Synthetic dataset", DATASET_FILE, &ds_prov);
    let mut t = String::from("condition,n");
    for d in 1..=ds.dim {
        let _ = write!(t, ",mean x{d}");
    }
    t.push('\n');
    for c in Condition::DISPLAY_ORDER {
        let rows: Vec<&[f64]> =
            ds.features.chunks_exact(ds.dim).zip(&ds.labels).filter(|(_, l)| **l == c).map(|(r, _)| r).collect();
        let _ = write!(t, "{c},{}", rows.len());
        for d in 0..ds.dim {
            let m = rows.iter().map(|r| r[d]).sum::<f64>() / rows.len().max(1) as f64;
            let _ = write!(t, ",{m:.4}");
        }
        t.push('\n');
    }
    s.out.push_str(&csv_to_markdown(&t));

    s.csv(dir, "manipulation.csv", "Manipulation checks (Welch t)", &check_prov)?;

    s.heading("Conditions", "built in", "fixed facet x representation design.");
    let mut t = String::from("condition,code,facet,representation\n");
    for c in Condition::ALL {
        let _ = writeln!(t, "{c},{},{},{}", c.code(), c.facet(), c.rep());
    }
    s.out.push_str(&csv_to_markdown(&t));

    s.csv(dir, "table5.csv", "Performance means and standard deviations", &exp_prov)?;
    s.csv(dir, ANOVA_FILE, "Sequential two-way ANOVA with gender control", &exp_prov)?;
    s.csv(dir, "table7a.csv", "One-way ANOVA under high equivocality", &exp_prov)?;
    s.csv(dir, "table7b.csv", "One-way ANOVA for probabilistic representation", &exp_prov)?;
    s.csv(dir, "table7c.csv", "One-way ANOVA for deterministic representation", &exp_prov)?;
    s.csv(dir, "interaction.csv", "Interaction plot data", &exp_prov)?;

    let cl_prov = format!(
        "mixture fit to `{DATASET_FILE}` (calibration `{}`, seed {}).",
        str_at(&metrics, "calibration"),
        seed_at(&metrics, "dataset_seed")
    );
    s.csv(dir, "bic.csv", "BIC by component count and variance model", &cl_prov)?;
    s.csv(dir, "confusion.csv", "Confusion matrix of aligned clusters", &cl_prov)?;

    s.heading("Classification metrics", METRICS_FILE, &cl_prov);
    let report = metrics.get("report").cloned().unwrap_or(Value::Null);
    let _ = writeln!(
        s.out,
        "Selected G = {}, model {}, component sizes {}.\n",
        metrics.get("best_g").map(Value::to_string).unwrap_or_default(),
        str_at(&metrics, "best_model"),
        metrics.get("component_sizes").map(Value::to_string).unwrap_or_default()
    );
    let _ = writeln!(s.out, "Accuracy {}%\n", pct(f64_at(&metrics, "accuracy")));
    let mut t = String::from("Class,Precision,Recall,F1,Support\n");
    if let Some(classes) = report.get("per_class").and_then(Value::as_array) {
        for c in classes {
            let _ = writeln!(
                t,
                "{},{},{},{},{}",
                str_at(c, "label"),
                pct(f64_at(c, "precision")),
                pct(f64_at(c, "recall")),
                pct(f64_at(c, "f1")),
                c.get("support").map(Value::to_string).unwrap_or_default()
            );
        }
    }
    s.out.push_str(&csv_to_markdown(&t));
    let mut t = String::from("Metric,Value\n");
    for (label, key) in [
        ("Precision (macro)", "macro_precision"),
        ("Recall (macro)", "macro_recall"),
        ("F1 (macro)", "macro_f1"),
        ("F1 (weighted)", "weighted_f1"),
    ] {
        let _ = writeln!(t, "{label},{}", pct(f64_at(&report, key)));
    }
    s.out.push('\n');
    s.out.push_str(&csv_to_markdown(&t));

    let loop_prov = format!(
        "adaptive recommender against environment `{}`, policy {}, seed {}.",
        str_at(&summary, "calibration"),
        str_at(&summary, "policy"),
        seed_at(&summary, "seed")
    );
    s.heading("Adaptive recommendation loop", SUMMARY_FILE, &loop_prov);
    let _ = writeln!(
        s.out,
        "Steps {}, exploration constant {}, total regret {:.4}.\n",
        summary.get("steps").map(Value::to_string).unwrap_or_default(),
        summary.get("exploration_c").map(Value::to_string).unwrap_or_default(),
        f64_at(&summary, "total_regret")
    );
    let mut t = String::from("facet,n,Det,Prob,modal\n");
    if let Some(fq) = summary.get("final_quarter").and_then(Value::as_array) {
        for q in fq.iter().filter(|q| !q.is_null()) {
            let (d, p) = (f64_at(q, "deterministic"), f64_at(q, "probabilistic"));
            let modal = if d >= p { "Det" } else { "Prob" };
            let _ = writeln!(
                t,
                "{},{},{d:.4},{p:.4},{modal}",
                str_at(q, "facet"),
                q.get("n").map(Value::to_string).unwrap_or_default()
            );
        }
    }
    s.out.push_str(&csv_to_markdown(&t));
    let mut t = String::from("arm,n,mean,sd\n");
    if let Some(pred) = summary.get("predictor").and_then(Value::as_array) {
        for g in pred {
            let sd = g.get("sd").and_then(Value::as_f64).map(|x| format!("{x:.4}")).unwrap_or_else(|| "NA".into());
            let _ = writeln!(
                t,
                "{},{},{:.4},{sd}",
                str_at(g, "group_key"),
                g.get("n").map(Value::to_string).unwrap_or_default(),
                f64_at(g, "mean")
            );
        }
    }
    s.out.push('\n');
    s.out.push_str(&csv_to_markdown(&t));
    Ok(s.out)
}

pub fn report(dir: &Path) -> CliResult<String> {
    let text = build_report(dir)?;
    write_text(&dir.join(REPORT_FILE), &text)?;
    Ok(format!("wrote {}\n", dir.join(REPORT_FILE).display()))
}
