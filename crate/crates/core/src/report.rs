//! Repair reports and side-by-side heuristic comparison.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::constraints::check_satisfied;
use crate::error::Result;
use crate::io::{measure_accuracy, Job, LabeledSet};
use crate::lp::Norm;
use crate::network::Network;
use crate::search::{repair, Heuristic, LayerDelta, RepairResult, RepairStatus, SearchConfig, SearchTrace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointOutcome {
    pub x: Vec<f64>,
    pub before: Vec<f64>,
    pub after: Vec<f64>,
    pub satisfied_before: bool,
    pub satisfied_after: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub samples: usize,
    pub before: f64,
    pub after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairReport {
    pub status: RepairStatus,
    pub heuristic: Heuristic,
    pub norm: Norm,
    pub epsilon: f64,
    pub separation_indices: Vec<usize>,
    pub total_cost: Option<f64>,
    /// One entry per modified weight matrix (0-based index in the network).
    pub deltas: Vec<LayerDelta>,
    pub best_change: Option<Vec<Vec<f64>>>,
    pub evaluations: usize,
    pub wall_time_secs: f64,
    pub points: Vec<PointOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<Accuracy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<SearchTrace>,
}

impl RepairReport {
    pub fn build(
        original: &Network,
        job: &Job,
        result: &RepairResult,
        accuracy_set: Option<&LabeledSet>,
        include_trace: bool,
    ) -> Result<Self> {
        let points = job
            .points
            .iter()
            .map(|p| {
                Ok(PointOutcome {
                    x: p.x.clone(),
                    before: original.output(&p.x)?,
                    after: result.network.output(&p.x)?,
                    satisfied_before: check_satisfied(original, p)?,
                    satisfied_after: check_satisfied(&result.network, p)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let accuracy = match accuracy_set {
            Some(set) => Some(Accuracy {
                samples: set.len(),
                before: measure_accuracy(original, set)?,
                after: measure_accuracy(&result.network, set)?,
            }),
            None => None,
        };
        Ok(Self {
            status: result.status,
            heuristic: result.heuristic,
            norm: result.norm,
            epsilon: job.config.epsilon,
            separation_indices: job.separation.clone(),
            total_cost: result.cost,
            deltas: result.deltas.clone(),
            best_change: result.best_change.clone(),
            evaluations: result.evaluations,
            wall_time_secs: result.elapsed.as_secs_f64(),
            points,
            accuracy,
            trace: include_trace.then(|| result.trace.clone()),
        })
    }

    /// The original network with every reported delta added.
    pub fn apply_deltas(&self, original: &Network) -> Result<Network> {
        self.deltas
            .iter()
            .try_fold(original.clone(), |net, d| net.apply_delta(d.layer, &d.delta))
    }

    /// Combined cost recomputed from the per-layer sub-costs.
    pub fn recombined_cost(&self) -> Option<f64> {
        (!self.deltas.is_empty()).then(|| {
            let costs: Vec<f64> = self.deltas.iter().map(|d| d.cost).collect();
            self.norm.total(&costs)
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "status: {}", status_name(self.status));
        match self.total_cost {
            Some(c) => {
                let _ = writeln!(s, "cost ({}): {c}", self.norm);
            }
            None => {
                let _ = writeln!(s, "cost ({}): -", self.norm);
            }
        }
        for d in &self.deltas {
            let _ = writeln!(s, "  W{}: {}", d.layer, d.cost);
        }
        let _ = writeln!(
            s,
            "evaluations: {}  time: {:.3}s  heuristic: {}",
            self.evaluations, self.wall_time_secs, self.heuristic
        );
        if let Some(a) = self.accuracy {
            let _ = writeln!(s, "accuracy: {:.4} -> {:.4} ({} samples)", a.before, a.after, a.samples);
        }
        s
    }
}

fn status_name(s: RepairStatus) -> &'static str {
    match s {
        RepairStatus::Repaired => "repaired",
        RepairStatus::NotRepaired => "not-repaired",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub heuristic: Heuristic,
    pub status: RepairStatus,
    pub cost: Option<f64>,
    pub evaluations: usize,
    pub wall_time_secs: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
}

/// Runs each heuristic on the same job with the same timeout and budget.
pub fn compare(
    net: &Network,
    job: &Job,
    heuristics: &[Heuristic],
    accuracy_set: Option<&LabeledSet>,
) -> Result<Vec<CompareRow>> {
    heuristics
        .iter()
        .map(|&h| {
            let config = SearchConfig {
                heuristic: h,
                ..job.config.clone()
            };
            let r = repair(net, &job.points, &job.separation, &config)?;
            let accuracy = match accuracy_set {
                Some(set) => Some(measure_accuracy(&r.network, set)?),
                None => None,
            };
            Ok(CompareRow {
                heuristic: h,
                status: r.status,
                cost: r.cost,
                evaluations: r.evaluations,
                wall_time_secs: r.elapsed.as_secs_f64(),
                accuracy,
            })
        })
        .collect()
}

pub fn format_compare_table(rows: &[CompareRow]) -> String {
    let with_acc = rows.iter().any(|r| r.accuracy.is_some());
    let mut s = format!("{:<10} {:<13} {:>14} {:>6} {:>9}", "heuristic", "status", "change", "evals", "time[s]");
    if with_acc {
        s.push_str(&format!(" {:>9}", "accuracy"));
    }
    s.push('\n');
    for r in rows {
        let cost = r.cost.map_or("-".to_string(), |c| format!("{c:.6}"));
        let _ = write!(
            s,
            "{:<10} {:<13} {:>14} {:>6} {:>9.3}",
            r.heuristic.to_string(),
            status_name(r.status),
            cost,
            r.evaluations,
            r.wall_time_secs
        );
        if with_acc {
            let acc = r.accuracy.map_or("-".to_string(), |a| format!("{a:.4}"));
            let _ = write!(s, " {acc:>9}");
        }
        s.push('\n');
    }
    s
}
