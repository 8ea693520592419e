//! Benchmark statistics: repeated scenario runs across every applicable
//! planner, with per-phase mean and variance summaries.

use serde::Serialize;

use crate::scenario::{run_scenario, PathSource, Planner, Scenario};

pub const ALL_PLANNERS: [Planner; 4] = [
    Planner::Avoidance,
    Planner::NoAvoidance,
    Planner::RandomNullspace,
    Planner::CspaceRrtStar,
];

/// Summary of `reps` runs of one scenario with one planner.
#[derive(Clone, Debug, Serialize)]
pub struct BenchRow {
    pub scenario: String,
    pub planner: String,
    pub reps: usize,
    /// Runs whose outcome reported success.
    pub successes: usize,
    pub path_mean_s: f64,
    pub path_var: f64,
    pub motion_mean_s: f64,
    pub motion_var: f64,
    pub total_mean_s: f64,
    pub total_var: f64,
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance; 0 for fewer than two samples.
fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Whether a planner can run a scenario at all (the configuration-space
/// baseline needs a goal position, which only the tree-search path source
/// carries).
pub fn planner_applicable(planner: Planner, scenario: &Scenario) -> bool {
    !(planner == Planner::CspaceRrtStar
        && matches!(scenario.path_source, PathSource::FixedCircle { .. }))
}

/// Runs every applicable planner on every labeled scenario `reps` times.
///
/// Repetition `k` uses seed `rng_seed + k`. Runs that fail with a hard
/// planner error count as failures and contribute no timings; runs that
/// complete (successfully or not) contribute their timings.
pub fn benchmark(labeled: &[(String, Scenario)], reps: usize) -> Vec<BenchRow> {
    assert!(reps >= 1, "benchmark needs at least one repetition");
    let mut rows = Vec::new();
    for (label, scenario) in labeled {
        for planner in ALL_PLANNERS {
            if !planner_applicable(planner, scenario) {
                continue;
            }
            let mut paths = Vec::with_capacity(reps);
            let mut motions = Vec::with_capacity(reps);
            let mut totals = Vec::with_capacity(reps);
            let mut successes = 0;
            for rep in 0..reps {
                let seed = scenario.rng_seed.wrapping_add(rep as u64);
                if let Ok(report) = run_scenario(scenario, Some(seed), Some(planner)) {
                    if report.outcome.succeeded {
                        successes += 1;
                    }
                    paths.push(report.timings.path_planning);
                    motions.push(report.timings.motion_planning);
                    totals.push(report.timings.total());
                }
            }
            rows.push(BenchRow {
                scenario: label.clone(),
                planner: planner.label().to_string(),
                reps,
                successes,
                path_mean_s: mean(&paths),
                path_var: variance(&paths),
                motion_mean_s: mean(&motions),
                motion_var: variance(&motions),
                total_mean_s: mean(&totals),
                total_var: variance(&totals),
            });
        }
    }
    rows
}

/// Renders rows as an aligned text table.
pub fn format_table(rows: &[BenchRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<16} {:<18} {:>5} {:>5} {:>13} {:>12} {:>13} {:>12} {:>13} {:>12}\n",
        "scenario",
        "planner",
        "reps",
        "ok",
        "path_mean_s",
        "path_var",
        "motion_mean_s",
        "motion_var",
        "total_mean_s",
        "total_var"
    ));
    for r in rows {
        out.push_str(&format!(
            "{:<16} {:<18} {:>5} {:>5} {:>13.6} {:>12.3e} {:>13.6} {:>12.3e} {:>13.6} {:>12.3e}\n",
            r.scenario,
            r.planner,
            r.reps,
            r.successes,
            r.path_mean_s,
            r.path_var,
            r.motion_mean_s,
            r.motion_var,
            r.total_mean_s,
            r.total_var
        ));
    }
    out
}
