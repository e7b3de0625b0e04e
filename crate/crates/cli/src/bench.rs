//! Benchmark harness: runs each method over each listed score cache with a
//! set of seeds, reporting min/median/max scores and percentages relative to
//! the v2 median, as a plain-text table and a machine-readable report.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use twbn::scoring::read_scores_path;
use twbn::search::{learn, Budget, LearnOptions, Method};

#[derive(Clone, Debug, Deserialize)]
pub struct SuiteEntry {
    pub name: String,
    pub scores: PathBuf,
    /// Optional externally solved MILP solution (`name value` lines); it is
    /// checked against the model and imported as a `milp` row. The harness
    /// never invokes a solver itself.
    #[serde(default)]
    pub milp_solution: Option<PathBuf>,
}

#[derive(Clone, Debug, Deserialize)]
pub struct Suite {
    pub entries: Vec<SuiteEntry>,
    pub methods: Vec<String>,
    pub treewidth: usize,
    #[serde(default)]
    pub seconds: Option<f64>,
    #[serde(default)]
    pub iterations: Option<u64>,
    #[serde(default = "default_seeds")]
    pub seeds: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

fn default_seeds() -> u64 {
    10
}

fn default_workers() -> usize {
    1
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchRow {
    pub entry: String,
    pub method: String,
    pub min: f64,
    pub median: f64,
    pub max: f64,
    /// 100 · v2-median / score-median; 100 for the v2 row by construction.
    pub relative_to_v2_median: f64,
    pub scores: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchReport {
    pub treewidth: usize,
    pub seeds: u64,
    pub rows: Vec<BenchRow>,
}

fn median(sorted: &[f64]) -> f64 {
    let m = sorted.len();
    if m % 2 == 1 {
        sorted[m / 2]
    } else {
        (sorted[m / 2 - 1] + sorted[m / 2]) / 2.0
    }
}

pub fn run_suite(suite: &Suite) -> anyhow::Result<BenchReport> {
    let budget = match (suite.iterations, suite.seconds) {
        (Some(i), _) => Budget::Iterations(i),
        (None, Some(s)) => Budget::WallClock(std::time::Duration::from_secs_f64(s)),
        (None, None) => Budget::WallClock(std::time::Duration::from_secs(60)),
    };
    let mut rows = Vec::new();
    for entry in &suite.entries {
        let cache = read_scores_path(&entry.scores)?;
        let mut per_method: Vec<(String, Vec<f64>)> = Vec::new();
        for method_name in &suite.methods {
            let method = match method_name.as_str() {
                "v1" => Method::V1,
                "v2" => Method::V2,
                other => anyhow::bail!("unknown method '{other}' in suite"),
            };
            let mut scores = Vec::new();
            for seed in 0..suite.seeds {
                let r = learn(
                    &cache,
                    suite.treewidth,
                    method,
                    budget,
                    &LearnOptions {
                        seed,
                        workers: suite.workers,
                    },
                    None,
                )?;
                scores.push(r.total_score);
            }
            per_method.push((method_name.clone(), scores));
        }
        let v2_median = per_method
            .iter()
            .find(|(m, _)| m == "v2")
            .map(|(_, scores)| {
                let mut s = scores.clone();
                s.sort_by(|a, b| a.partial_cmp(b).unwrap());
                median(&s)
            });
        if let Some(solution) = &entry.milp_solution {
            let model = twbn::milp::build_learning_model(&cache, suite.treewidth)?;
            let text = std::fs::read_to_string(solution)?;
            let named = twbn::milp::parse_solution(&text)?;
            let assignment = twbn::milp::MilpAssignment::from_named(&model, &named)?;
            let report = twbn::milp::check_assignment(&model, &assignment)?;
            if !report.feasible {
                anyhow::bail!(
                    "imported solution for '{}' is infeasible: {}",
                    entry.name,
                    report.first_violation().unwrap_or("unknown")
                );
            }
            per_method.push(("milp".to_string(), vec![assignment.objective(&model)]));
        }
        for (method, scores) in per_method {
            let mut sorted = scores.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let med = median(&sorted);
            let relative = match v2_median {
                Some(v2) => 100.0 * v2 / med,
                None => f64::NAN,
            };
            rows.push(BenchRow {
                entry: entry.name.clone(),
                method,
                min: sorted[0],
                median: med,
                max: *sorted.last().unwrap(),
                relative_to_v2_median: relative,
                scores,
            });
        }
    }
    Ok(BenchReport {
        treewidth: suite.treewidth,
        seeds: suite.seeds,
        rows,
    })
}

pub fn render_table(report: &BenchReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<16} {:<6} {:>14} {:>14} {:>14} {:>9}\n",
        "ENTRY", "METHOD", "MIN", "MEDIAN", "MAX", "REL%"
    ));
    for row in &report.rows {
        out.push_str(&format!(
            "{:<16} {:<6} {:>14.4} {:>14.4} {:>14.4} {:>8.1}%\n",
            row.entry, row.method, row.min, row.median, row.max, row.relative_to_v2_median
        ));
    }
    out
}

pub fn load_suite(path: &Path) -> anyhow::Result<Suite> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}
