//! Cross-arm report: summary grid, pairwise arm tests and per-category
//! ordering tests, with CSV/JSON/SVG output.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::arm::ExperimentArm;
use super::pipeline::{parse_dice_csv, CaseDice, DICE_CSV, TRAIN_LOG};
use super::svg::{box_plot, line_plot};
use crate::error::{Error, Result};
use crate::motion::SeverityCategory;
use crate::segmenter::train::TrainLog;
use crate::stats::{anova_oneway, choose_paired_test, summarize, StatTestResult, DEFAULT_ALPHA};

use ExperimentArm::*;

/// The four arm comparisons of the pairwise table.
pub const PAIRWISE: [(ExperimentArm, ExperimentArm); 4] = [
    (ShuffledNoSkullClean, ShuffledSkullClean),
    (ShuffledSkullClean, ShuffledSkullMotion),
    (ShuffledSkullMotion, CurriculumSkullMotion),
    (ShuffledSkullClean, CurriculumSkullMotion),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub arm: ExperimentArm,
    pub label: String,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseComparison {
    pub first: ExperimentArm,
    pub second: ExperimentArm,
    pub label: String,
    pub mean_difference: f64,
    pub test: StatTestResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryComparison {
    pub category: SeverityCategory,
    pub n: usize,
    pub shuffled_mean: Option<f64>,
    pub curriculum_mean: Option<f64>,
    pub test: Option<StatTestResult>,
    /// Why no test was run, when it was not.
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub arms: Vec<ArmSummary>,
    pub pairwise: Vec<PairwiseComparison>,
    pub per_category: Vec<CategoryComparison>,
    pub train_logs: BTreeMap<ExperimentArm, TrainLog>,
}

/// Per-arm dice rows and training logs as read from a runs directory.
#[derive(Debug, Clone)]
pub struct ArmResults {
    pub dice: BTreeMap<ExperimentArm, Vec<CaseDice>>,
    pub logs: BTreeMap<ExperimentArm, TrainLog>,
}

pub fn load_results(runs_dir: &Path) -> Result<ArmResults> {
    let mut dice = BTreeMap::new();
    let mut logs = BTreeMap::new();
    for arm in ExperimentArm::ALL {
        let dir = runs_dir.join(arm.slug());
        let csv = dir.join(DICE_CSV);
        if !csv.is_file() {
            return Err(Error::validation(format!(
                "missing run for arm {arm} (expected {})",
                csv.display()
            )));
        }
        let text = fs::read_to_string(&csv).map_err(|e| Error::io(&csv, e))?;
        let rows = parse_dice_csv(&text, &csv)?;
        if rows.is_empty() {
            return Err(Error::validation(format!("arm {arm}: no test cases in {}", csv.display())));
        }
        dice.insert(arm, rows);
        let log_path = dir.join(TRAIN_LOG);
        let text = fs::read_to_string(&log_path).map_err(|e| Error::io(&log_path, e))?;
        let log: TrainLog = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: log_path.clone(),
            source,
        })?;
        logs.insert(arm, log);
    }
    Ok(ArmResults { dice, logs })
}

fn values(rows: &[CaseDice]) -> Vec<f64> {
    rows.iter().map(|r| r.dice).collect()
}

/// Pairs two arms' rows by case id, optionally restricted to one category.
fn paired(a: &[CaseDice], b: &[CaseDice], category: Option<SeverityCategory>) -> Result<(Vec<f64>, Vec<f64>)> {
    let lookup: BTreeMap<&str, &CaseDice> = b.iter().map(|r| (r.case_id.as_str(), r)).collect();
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for r in a {
        if category.is_some() && r.severity != category {
            continue;
        }
        let other = lookup
            .get(r.case_id.as_str())
            .ok_or_else(|| Error::validation(format!("case {} missing from the paired arm", r.case_id)))?;
        x.push(r.dice);
        y.push(other.dice);
    }
    Ok((x, y))
}

pub fn build_report(results: &ArmResults) -> Result<RunReport> {
    let mut arms = Vec::new();
    for arm in ExperimentArm::ALL {
        let s = summarize(&values(&results.dice[&arm]))?;
        arms.push(ArmSummary {
            arm,
            label: arm.label().to_string(),
            mean: s.mean,
            std: s.std,
            n: s.n,
        });
    }

    let mut pairwise = Vec::new();
    for (first, second) in PAIRWISE {
        let a = values(&results.dice[&first]);
        let b = values(&results.dice[&second]);
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let test = anova_oneway(&[a.clone(), b.clone()])?;
        pairwise.push(PairwiseComparison {
            first,
            second,
            label: format!("{} vs {}", first.label(), second.label()),
            mean_difference: mean(&b) - mean(&a),
            test,
        });
    }

    let shuffled = &results.dice[&ShuffledSkullMotion];
    let curriculum = &results.dice[&CurriculumSkullMotion];
    let mut per_category = Vec::new();
    for category in SeverityCategory::ALL {
        let (s, c) = paired(shuffled, curriculum, Some(category))?;
        let n = s.len();
        let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        let (test, note) = match choose_paired_test(&s, &c, DEFAULT_ALPHA) {
            Ok(t) => (Some(t), None),
            Err(e) => (None, Some(e.to_string())),
        };
        per_category.push(CategoryComparison {
            category,
            n,
            shuffled_mean: mean(&s),
            curriculum_mean: mean(&c),
            test,
            note,
        });
    }

    Ok(RunReport {
        arms,
        pairwise,
        per_category,
        train_logs: results.logs.clone(),
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn summary_csv(report: &RunReport) -> String {
    let mut s = String::from("arm,label,mean,std,n\n");
    for a in &report.arms {
        s.push_str(&format!("{},{},{},{},{}\n", a.arm, a.label, a.mean, a.std, a.n));
    }
    s
}

pub fn pairwise_csv(report: &RunReport) -> String {
    let mut s = format!("comparison,mean_difference,{}\n", StatTestResult::CSV_HEADER);
    for p in &report.pairwise {
        s.push_str(&format!("{},{},{}\n", p.label, p.mean_difference, p.test.csv_row()));
    }
    s
}

pub fn category_csv(report: &RunReport) -> String {
    let mut s = String::from("category,n,shuffled_mean,curriculum_mean,test_name,statistic,p_value,note\n");
    for c in &report.per_category {
        let (name, stat, p) = match &c.test {
            Some(t) => (t.test_name.clone(), t.statistic.to_string(), t.p_value.to_string()),
            None => (String::new(), String::new(), String::new()),
        };
        let note = c.note.clone().unwrap_or_default().replace(',', ";");
        s.push_str(&format!(
            "{},{},{},{},{name},{stat},{p},{note}\n",
            c.category,
            c.n,
            opt(c.shuffled_mean),
            opt(c.curriculum_mean)
        ));
    }
    s
}

/// Writes report.json, the three CSV tables and the SVG figures.
pub fn write_report(out_dir: &Path, results: &ArmResults, report: &RunReport) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let write = |name: &str, text: String| {
        let p = out_dir.join(name);
        fs::write(&p, text).map_err(|e| Error::io(&p, e))
    };
    let mut json = serde_json::to_string_pretty(report).expect("report serializes");
    json.push('\n');
    write("report.json", json)?;
    write("summary.csv", summary_csv(report))?;
    write("pairwise.csv", pairwise_csv(report))?;
    write("per_category.csv", category_csv(report))?;

    let groups: Vec<(String, Vec<f64>)> = ExperimentArm::ALL
        .iter()
        .map(|a| (a.label().to_string(), values(&results.dice[a])))
        .collect();
    write("dice_by_arm.svg", box_plot("Test dice by arm", "dice", &groups))?;

    let mut cat_groups = Vec::new();
    for category in SeverityCategory::ALL {
        for arm in [ShuffledSkullMotion, CurriculumSkullMotion] {
            let v: Vec<f64> = results.dice[&arm]
                .iter()
                .filter(|r| r.severity == Some(category))
                .map(|r| r.dice)
                .collect();
            let tag = if arm == ShuffledSkullMotion { "s" } else { "c" };
            cat_groups.push((format!("{tag}-{}", category.name()), v));
        }
    }
    write(
        "dice_by_category.svg",
        box_plot("Motion test dice by category (s = shuffled, c = curriculum)", "dice", &cat_groups),
    )?;

    for (arm, log) in &results.logs {
        let svg = line_plot(
            &format!("Loss, {}", arm.label()),
            "soft dice loss",
            &[("train", "red", &log.train_loss), ("validation", "blue", &log.val_loss)],
        );
        write(&format!("loss_{}.svg", arm.slug()), svg)?;
    }
    Ok(())
}

/// Loads the runs, builds the report and writes it.
pub fn report_runs(runs_dir: &Path, out_dir: &Path) -> Result<RunReport> {
    let results = load_results(runs_dir)?;
    let report = build_report(&results)?;
    write_report(out_dir, &results, &report)?;
    Ok(report)
}
