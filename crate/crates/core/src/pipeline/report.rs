use super::config::{ModelFamily, OptimizerKind};
use crate::error::{Error, Result};
use crate::optimize::{Termination, TraceRecord};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorErrors {
    pub scaled_initial: f64,
    pub scaled_final: f64,
    pub unscaled_initial: f64,
    pub unscaled_final: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QoiSummary {
    pub name: String,
    /// False when the initial model already preserved this QoI.
    pub in_objective: bool,
    /// `Σ_t (g_X − g_M)² / Σ_t g_X²` over the QoI's time set.
    pub relative_error_initial: f64,
    pub relative_error_final: f64,
    /// Same ratio for `√g` (momentum QoIs only).
    pub sqrt_relative_error_initial: Option<f64>,
    pub sqrt_relative_error_final: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub model: ModelFamily,
    /// CP: one rank; Tucker: multilinear ranks.
    pub ranks: Vec<usize>,
    pub dims: Vec<usize>,
    pub param_count: usize,
    pub compression_ratio: f64,
    pub seed: u64,
    /// Absent for runs that stop after the classic fit.
    pub optimizer: Option<OptimizerKind>,
    pub iteration_budget: usize,
    pub accepted_iterations: usize,
    pub termination: Option<Termination>,
    /// `α_0, α_1, …` for the QoIs kept in the objective.
    pub weights: Vec<f64>,
    pub f_go_initial: Option<f64>,
    pub f_go_final: Option<f64>,
    /// `1/(Q+1)` with `Q` the number of QoIs in the objective.
    pub f_go_lower_bound: Option<f64>,
    pub tensor_error: TensorErrors,
    pub qois: Vec<QoiSummary>,
}

/// QoI values at every time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QoiTrajectory {
    pub name: String,
    pub data: Vec<f64>,
    pub initial_model: Vec<f64>,
    pub final_model: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub summary: Summary,
    pub trajectories: Vec<QoiTrajectory>,
    /// Starting point followed by every outer iteration, rejected ones included.
    pub trace: Vec<TraceRecord>,
}

/// `Σ (a − b)² / Σ a²`; zero when both vanish.
pub fn relative_sse(data: &[f64], model: &[f64]) -> f64 {
    let num: f64 = data.iter().zip(model).map(|(a, b)| (a - b) * (a - b)).sum();
    let den: f64 = data.iter().map(|a| a * a).sum();
    if num == 0.0 {
        0.0
    } else {
        num / den
    }
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

impl RunReport {
    pub fn summary_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.summary)? + "\n")
    }

    pub fn trajectories_csv(&self) -> String {
        let mut s = String::from("time,qoi_name,data,initial_model,final_model\n");
        for q in &self.trajectories {
            for t in 0..q.data.len() {
                let _ = writeln!(
                    s,
                    "{t},{},{},{},{}",
                    q.name,
                    num(q.data[t]),
                    num(q.initial_model[t]),
                    num(q.final_model[t])
                );
            }
        }
        s
    }

    /// Starting point plus accepted iterations.
    pub fn trace_csv(&self) -> String {
        let names: Vec<&str> = self
            .summary
            .qois
            .iter()
            .filter(|q| q.in_objective)
            .map(|q| q.name.as_str())
            .collect();
        let mut s = String::from("iteration,value,grad_norm,frobenius");
        for n in &names {
            let _ = write!(s, ",sse_{n}");
        }
        s.push_str(",step_norm,inner_iterations\n");
        for r in self.trace.iter().filter(|r| r.accepted) {
            let _ = write!(
                s,
                "{},{},{},{}",
                r.iteration,
                num(r.value),
                num(r.grad_norm),
                r.frobenius.map(num).unwrap_or_default()
            );
            for k in 0..names.len() {
                let _ = write!(s, ",{}", r.qoi_sse.get(k).copied().map(num).unwrap_or_default());
            }
            let _ = writeln!(s, ",{},{}", num(r.step_norm), r.inner_iterations);
        }
        s
    }
}

/// Writes `summary.json`, `qoi_trajectories.csv` and `trace.csv` into `dir`.
pub fn emit_report(report: &RunReport, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    let ctx = |e: std::io::Error| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", dir.display())));
    std::fs::create_dir_all(dir).map_err(ctx)?;
    std::fs::write(dir.join("summary.json"), report.summary_json()?).map_err(ctx)?;
    std::fs::write(dir.join("qoi_trajectories.csv"), report.trajectories_csv()).map_err(ctx)?;
    std::fs::write(dir.join("trace.csv"), report.trace_csv()).map_err(ctx)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(iteration: usize, accepted: bool) -> TraceRecord {
        TraceRecord {
            iteration,
            value: 1.0 / (iteration + 1) as f64,
            grad_norm: 0.5,
            frobenius: Some(2.0),
            qoi_sse: vec![0.25, 0.125],
            step_norm: 0.1,
            inner_iterations: 3,
            accepted,
        }
    }

    fn report() -> RunReport {
        let q = |name: &str| QoiSummary {
            name: name.into(),
            in_objective: true,
            relative_error_initial: 0.1,
            relative_error_final: 1e-3,
            sqrt_relative_error_initial: None,
            sqrt_relative_error_final: None,
        };
        let traj = |name: &str| QoiTrajectory {
            name: name.into(),
            data: (0..50).map(|t| t as f64 * 0.1).collect(),
            initial_model: vec![1.0 / 3.0; 50],
            final_model: vec![-2.5e-300; 50],
        };
        RunReport {
            summary: Summary {
                model: ModelFamily::Cp,
                ranks: vec![5],
                dims: vec![4, 4, 2, 50],
                param_count: 300,
                compression_ratio: 1600.0 / 300.0,
                seed: 7,
                optimizer: Some(OptimizerKind::TrNewton),
                iteration_budget: 4,
                accepted_iterations: 2,
                termination: Some(Termination::IterationBudget),
                weights: vec![0.1, 0.2, 0.3],
                f_go_initial: Some(1.0),
                f_go_final: Some(0.4),
                f_go_lower_bound: Some(1.0 / 3.0),
                tensor_error: TensorErrors {
                    scaled_initial: 0.1,
                    scaled_final: 0.1 + 1e-17,
                    unscaled_initial: 0.2,
                    unscaled_final: 0.2,
                },
                qois: vec![q("mass"), q("ke")],
            },
            trajectories: vec![traj("mass"), traj("ke")],
            trace: vec![record(0, true), record(1, false), record(2, true), record(3, false), record(4, true)],
        }
    }

    #[test]
    fn csv_row_counts() {
        let r = report();
        assert_eq!(r.trajectories_csv().lines().count(), 2 * 50 + 1);
        let trace = r.trace_csv();
        assert_eq!(trace.lines().count(), 1 + 3);
        assert!(trace.starts_with("iteration,value,grad_norm,frobenius,sse_mass,sse_ke,step_norm,inner_iterations\n"));
        // 17 significant digits survive the round trip.
        let row = r.trajectories_csv().lines().nth(2).unwrap().to_string();
        let v: f64 = row.split(',').nth(3).unwrap().parse().unwrap();
        assert_eq!(v, 1.0 / 3.0);
    }

    #[test]
    fn json_round_trip() {
        let r = report();
        let back: Summary = serde_json::from_str(&r.summary_json().unwrap()).unwrap();
        assert_eq!(back, r.summary);
    }

    #[test]
    fn emit_writes_three_files() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("nested/out");
        emit_report(&report(), &out).unwrap();
        for f in ["summary.json", "qoi_trajectories.csv", "trace.csv"] {
            assert!(out.join(f).is_file(), "{f}");
        }
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        assert!(emit_report(&report(), blocker.join("sub")).is_err());
    }

    #[test]
    fn relative_sse_cases() {
        assert_eq!(relative_sse(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert_eq!(relative_sse(&[0.0], &[0.0]), 0.0);
        assert!((relative_sse(&[3.0, 4.0], &[3.0, 3.0]) - 1.0 / 25.0).abs() < 1e-15);
    }
}
