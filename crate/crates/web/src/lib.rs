//! Browser bindings. Each export takes and returns JSON text so the page
//! needs no glue beyond `JSON.parse`.

use gotd::decomp::{sthosvd, SthosvdConfig};
use gotd::frob_err;
use gotd::pipeline::{run_pipeline, synth_generate, DataSource, ModelFamily, OptimizerKind, RunConfig, Stage, SynthSpec};
use serde::{Deserialize, Serialize};
use std::path::Path;
use wasm_bindgen::prelude::*;

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct GoalParams {
    pub dims: Vec<usize>,
    pub true_rank: usize,
    pub noise: f64,
    pub rank: usize,
    pub iters: usize,
    pub seed: u64,
}

impl Default for GoalParams {
    fn default() -> Self {
        Self {
            dims: vec![16, 16, 4, 12],
            true_rank: 6,
            noise: 0.01,
            rank: 3,
            iters: 10,
            seed: 1,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Series {
    pub name: String,
    pub data: Vec<f64>,
    pub initial: Vec<f64>,
    pub refined: Vec<f64>,
    pub relative_error_initial: f64,
    pub relative_error_final: f64,
}

#[derive(Debug, Serialize)]
pub struct GoalOutput {
    pub compression_ratio: f64,
    pub tensor_error_initial: f64,
    pub tensor_error_final: f64,
    pub f_go: Vec<f64>,
    pub lower_bound: f64,
    pub qois: Vec<Series>,
}

fn config(p: &GoalParams, model: ModelFamily, optimizer: OptimizerKind) -> Result<RunConfig, String> {
    let text = "
        qoi.0.name = mass
        qoi.0.kind = variable-sum
        qoi.0.vars = 0,1
        qoi.1.name = kinetic
        qoi.1.kind = kinetic-energy
        qoi.1.density = 0
        qoi.1.ux = 1
        qoi.1.uy = 2
    ";
    if p.dims.len() < 3 || p.dims[p.dims.len() - 2] < 3 {
        return Err("need at least 3 modes and 3 variables".into());
    }
    let mut cfg = RunConfig::parse(text, Path::new(".")).map_err(|e| e.to_string())?;
    cfg.data = Some(DataSource::Synth(SynthSpec {
        dims: p.dims.clone(),
        rank: p.true_rank,
        noise: p.noise,
        seed: p.seed,
    }));
    cfg.model = Some(model);
    cfg.rank = Some(p.rank);
    cfg.seed = p.seed;
    cfg.optimizer = optimizer;
    cfg.opt.max_outer_iterations = p.iters;
    Ok(cfg)
}

fn parse<T: for<'de> Deserialize<'de>>(json: &str) -> Result<T, String> {
    serde_json::from_str(json).map_err(|e| format!("bad parameters: {e}"))
}

/// Goal-oriented CP on synthetic data: QoI trajectories before and after.
pub fn goal_cp(json: &str) -> Result<String, String> {
    let p: GoalParams = parse(json)?;
    let r = run_pipeline(&config(&p, ModelFamily::Cp, OptimizerKind::TrNewton)?, Stage::GoalOriented)
        .map_err(|e| e.to_string())?;
    let s = &r.summary;
    let out = GoalOutput {
        compression_ratio: s.compression_ratio,
        tensor_error_initial: s.tensor_error.unscaled_initial,
        tensor_error_final: s.tensor_error.unscaled_final,
        f_go: r.trace.iter().filter(|t| t.accepted).map(|t| t.value).collect(),
        lower_bound: s.f_go_lower_bound.unwrap_or(0.0),
        qois: r
            .trajectories
            .iter()
            .zip(&s.qois)
            .map(|(t, q)| Series {
                name: t.name.clone(),
                data: t.data.clone(),
                initial: t.initial_model.clone(),
                refined: t.final_model.clone(),
                relative_error_initial: q.relative_error_initial,
                relative_error_final: q.relative_error_final,
            })
            .collect(),
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct SweepParams {
    pub dims: Vec<usize>,
    pub true_rank: usize,
    pub noise: f64,
    pub seed: u64,
    pub tolerances: Vec<f64>,
}

impl Default for SweepParams {
    fn default() -> Self {
        Self {
            dims: vec![24, 20, 16, 12],
            true_rank: 5,
            noise: 0.05,
            seed: 2,
            tolerances: vec![0.5, 0.3, 0.2, 0.1, 0.07, 0.05, 0.03, 0.02, 0.01],
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SweepPoint {
    pub tolerance: f64,
    pub error: f64,
    pub ranks: Vec<usize>,
    pub compression_ratio: f64,
}

/// ST-HOSVD error and compression across tolerances.
pub fn sthosvd_sweep(json: &str) -> Result<String, String> {
    let p: SweepParams = parse(json)?;
    let x = synth_generate(&SynthSpec {
        dims: p.dims,
        rank: p.true_rank,
        noise: p.noise,
        seed: p.seed,
    })
    .map_err(|e| e.to_string())?;
    let points = p
        .tolerances
        .iter()
        .map(|&eps| {
            let m = sthosvd(&x, &SthosvdConfig::tolerance(eps)).map_err(|e| e.to_string())?;
            Ok(SweepPoint {
                tolerance: eps,
                error: frob_err(&x, &m.reconstruct()).map_err(|e| e.to_string())?,
                ranks: m.ranks(),
                compression_ratio: x.len() as f64 / m.param_count() as f64,
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    serde_json::to_string(&points).map_err(|e| e.to_string())
}

#[derive(Debug, Serialize)]
pub struct Comparison {
    pub tr_newton: Vec<f64>,
    pub lbfgs: Vec<f64>,
    pub lower_bound: f64,
}

/// Objective histories of both optimizers on the same goal-oriented CP problem.
pub fn compare_optimizers(json: &str) -> Result<String, String> {
    let p: GoalParams = parse(json)?;
    let mut hist = Vec::new();
    let mut bound = 0.0;
    for opt in [OptimizerKind::TrNewton, OptimizerKind::Lbfgs] {
        let r = run_pipeline(&config(&p, ModelFamily::Cp, opt)?, Stage::GoalOriented).map_err(|e| e.to_string())?;
        bound = r.summary.f_go_lower_bound.unwrap_or(0.0);
        // Best value so far at each outer iteration, rejected steps included.
        let mut best = f64::INFINITY;
        hist.push(
            r.trace
                .iter()
                .map(|t| {
                    if t.accepted {
                        best = best.min(t.value);
                    }
                    best
                })
                .collect::<Vec<_>>(),
        );
    }
    let lbfgs = hist.pop().unwrap_or_default();
    let tr_newton = hist.pop().unwrap_or_default();
    serde_json::to_string(&Comparison {
        tr_newton,
        lbfgs,
        lower_bound: bound,
    })
    .map_err(|e| e.to_string())
}

#[wasm_bindgen(js_name = goalCp)]
pub fn goal_cp_js(params: &str) -> Result<String, JsValue> {
    goal_cp(params).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = sthosvdSweep)]
pub fn sthosvd_sweep_js(params: &str) -> Result<String, JsValue> {
    sthosvd_sweep(params).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = compareOptimizers)]
pub fn compare_optimizers_js(params: &str) -> Result<String, JsValue> {
    compare_optimizers(params).map_err(|e| JsValue::from_str(&e))
}
