use super::config::{
    DataSource, FeIntegrandKind, MeshSource, ModelFamily, OptimizerKind, QoiKind, QoiSpec, RunConfig, ScalingMode,
};
use super::io::read_tensor;
use super::report::{relative_sse, QoiSummary, QoiTrajectory, RunReport, Summary, TensorErrors};
use super::synth::synth_generate;
use crate::decomp::{cp_als, sthosvd, AlsConfig, SthosvdConfig};
use crate::error::{Error, Result};
use crate::goal::{GoalProblem, ModelShape, ScalingInfo};
use crate::model::Model;
use crate::optimize::{lbfgs_minimize, tr_newton_minimize};
use crate::qoi::{
    FeQoi, HexMesh, Integrand, InternalEnergy, KineticEnergy, KineticEnergyDensity, MagneticEnergy,
    MomentumSquared, QoiDefinition, SliceFunctional, VariableSum,
};
use crate::tensor::{frob_err, DenseTensor};
use std::sync::Arc;

/// How far [`run_pipeline`] goes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// Classic fit only (CP-ALS or ST-HOSVD).
    ClassicFit,
    /// Classic fit followed by the goal-oriented optimization.
    GoalOriented,
}

pub fn load_data(cfg: &RunConfig) -> Result<DenseTensor> {
    match &cfg.data {
        Some(DataSource::File(p)) => read_tensor(p).map_err(|e| match e {
            Error::Io(io) => Error::Config(format!("cannot read input {}: {io}", p.display())),
            other => other,
        }),
        Some(DataSource::Synth(s)) => synth_generate(s).map_err(|e| Error::Config(format!("synth: {e}"))),
        None => Err(Error::Config("no data: set input or synth.dims".into())),
    }
}

/// Builds the QoI definitions for a tensor with `dims`; the flag marks
/// momentum QoIs, which also get a `√g` error in the report.
pub fn build_qois(specs: &[QoiSpec], dims: &[usize]) -> Result<Vec<(QoiDefinition, bool)>> {
    let d = dims.len();
    if d < 2 {
        return Err(Error::Config(format!("QoIs need at least a variable and a time mode, dims {dims:?}")));
    }
    let tau = dims[d - 1];
    let nv = dims[d - 2];
    specs
        .iter()
        .map(|spec| {
            let ctx = |e: Error| match e {
                Error::Numeric(m) => Error::Numeric(format!("QoI '{}': {m}", spec.name)),
                e => Error::Config(format!("QoI '{}': {e}", spec.name)),
            };
            let vars_ok = |vars: &[usize]| match vars.iter().find(|&&v| v >= nv) {
                Some(v) => Err(Error::Config(format!("QoI '{}': variable {v} out of range ({nv} variables)", spec.name))),
                None => Ok(()),
            };
            let (functional, momentum): (Arc<dyn SliceFunctional>, bool) = match &spec.kind {
                QoiKind::VariableSum { vars, coefficient } => {
                    vars_ok(vars)?;
                    (Arc::new(VariableSum::new(vars.clone(), *coefficient).map_err(ctx)?), false)
                }
                QoiKind::KineticEnergy { density, ux, uy } => {
                    vars_ok(density)?;
                    vars_ok(&[*ux, *uy])?;
                    (Arc::new(KineticEnergy::new(density.clone(), *ux, *uy).map_err(ctx)?), false)
                }
                QoiKind::FiniteElement { integrand, vars, mesh } => {
                    vars_ok(vars)?;
                    let mesh = match mesh {
                        MeshSource::File(p) => HexMesh::read(p),
                        MeshSource::Structured(h) => {
                            if d != 5 {
                                return Err(Error::Config(format!(
                                    "QoI '{}': a structured mesh needs 3 spatial modes, dims {dims:?}",
                                    spec.name
                                )));
                            }
                            HexMesh::structured([dims[0], dims[1], dims[2]], *h)
                        }
                    }
                    .map_err(ctx)?;
                    let n = vars.len();
                    let (f, momentum): (Arc<dyn Integrand>, bool) = match integrand {
                        FeIntegrandKind::InternalEnergy => (Arc::new(InternalEnergy), false),
                        FeIntegrandKind::KineticEnergy => (
                            Arc::new(KineticEnergyDensity {
                                components: n.saturating_sub(1),
                            }),
                            false,
                        ),
                        FeIntegrandKind::MagneticEnergy { mu0 } => {
                            if !(*mu0 > 0.0) {
                                return Err(Error::Config(format!("QoI '{}': mu0 must be positive", spec.name)));
                            }
                            (Arc::new(MagneticEnergy { components: n, mu0: *mu0 }), false)
                        }
                        FeIntegrandKind::Momentum => (Arc::new(MomentumSquared { components: n }), true),
                    };
                    (Arc::new(FeQoi::new(Arc::new(mesh), f, vars.clone()).map_err(ctx)?), momentum)
                }
            };
            let times = spec.times.resolve(tau);
            let def = QoiDefinition::new(spec.name.clone(), times, functional).map_err(ctx)?;
            def.check_times(tau).map_err(ctx)?;
            Ok((def, momentum))
        })
        .collect()
}

fn model_family(cfg: &RunConfig) -> Result<ModelFamily> {
    match cfg.model {
        Some(m) => Ok(m),
        None => match (cfg.rank.is_some(), cfg.tol.is_some() || cfg.ranks.is_some()) {
            (true, false) => Ok(ModelFamily::Cp),
            (false, true) => Ok(ModelFamily::Tucker),
            _ => Err(Error::Config("set model = cp | tucker".into())),
        },
    }
}

fn classic_fit(cfg: &RunConfig, family: ModelFamily, xs: &DenseTensor) -> Result<Model> {
    match family {
        ModelFamily::Cp => {
            let rank = cfg.rank.ok_or_else(|| Error::Config("CP model needs rank".into()))?;
            if cfg.ranks.is_some() {
                return Err(Error::Config("ranks is a Tucker setting; CP takes rank".into()));
            }
            let als = AlsConfig {
                fit_tolerance: cfg.als_tol,
                max_iterations: cfg.als_max_iters,
                init_seed: cfg.seed,
                ..AlsConfig::new(rank)
            };
            Ok(Model::Cp(cp_als(xs, &als)?.model))
        }
        ModelFamily::Tucker => {
            let trunc = match (cfg.tol, &cfg.ranks) {
                (Some(eps), None) => SthosvdConfig::tolerance(eps),
                (None, Some(r)) => SthosvdConfig::ranks(r.clone()),
                _ => return Err(Error::Config("Tucker model needs exactly one of tol and ranks".into())),
            };
            sthosvd(xs, &trunc).map(Model::Tucker).map_err(|e| match e {
                Error::InvalidArgument(m) => Error::Config(m),
                e => e,
            })
        }
    }
}

fn trajectories(defs: &[(QoiDefinition, bool)], x: &DenseTensor) -> Result<Vec<Vec<f64>>> {
    defs.iter().map(|(q, _)| q.trajectory(x)).collect()
}

/// Load, scale, fit, optionally optimize, and collect the report.
/// Deterministic for a fixed config.
pub fn run_pipeline(cfg: &RunConfig, stage: Stage) -> Result<RunReport> {
    let family = model_family(cfg)?;
    let x = load_data(cfg)?;
    let d = x.order();
    let vm = cfg.variable_mode.unwrap_or(d.saturating_sub(2));
    if vm >= d {
        return Err(Error::Config(format!("variable_mode {vm} out of range for a {d}-way tensor")));
    }
    if !cfg.qois.is_empty() && vm + 2 != d {
        return Err(Error::Config(format!(
            "QoIs need the variable mode to be the second-to-last mode ({})",
            d.saturating_sub(2)
        )));
    }
    let scaling = match cfg.scaling {
        ScalingMode::MeanStd => ScalingInfo::compute(&x, vm)?,
        ScalingMode::None => ScalingInfo::identity(vm, x.dims()[vm]),
    };
    let xs = scaling.apply(&x)?;
    let defs = build_qois(&cfg.qois, x.dims())?;

    let model0 = classic_fit(cfg, family, &xs)?;
    let shape = ModelShape::of(&model0);
    let v0 = shape.pack(&model0)?;

    let mut weights = Vec::new();
    let mut in_objective = vec![false; defs.len()];
    let (mut f_init, mut f_final, mut bound) = (None, None, None);
    let (mut v_final, mut trace, mut termination) = (v0.clone(), Vec::new(), None);
    if stage == Stage::GoalOriented {
        let qois: Vec<QoiDefinition> = defs.iter().map(|(q, _)| q.clone()).collect();
        let (problem, choice) = GoalProblem::from_initial_guess(xs.clone(), scaling.clone(), shape.clone(), qois, &v0)?;
        for &k in &choice.kept {
            in_objective[k] = true;
        }
        f_init = Some(problem.objective(&v0)?);
        bound = Some(1.0 / (choice.kept.len() + 1) as f64);
        let result = match cfg.optimizer {
            OptimizerKind::TrNewton => tr_newton_minimize(&problem, &v0, &cfg.opt)?,
            OptimizerKind::Lbfgs => lbfgs_minimize(&problem, &v0, &cfg.opt)?,
        };
        f_final = Some(result.value);
        weights = choice.weights;
        v_final = result.v;
        trace = result.trace;
        termination = Some(result.termination);
    }

    let m0s = shape.reconstruct(&v0)?;
    let m1s = shape.reconstruct(&v_final)?;
    let (m0, m1) = (scaling.unscale(&m0s)?, scaling.unscale(&m1s)?);
    let tensor_error = TensorErrors {
        scaled_initial: frob_err(&xs, &m0s)?,
        scaled_final: frob_err(&xs, &m1s)?,
        unscaled_initial: frob_err(&x, &m0)?,
        unscaled_final: frob_err(&x, &m1)?,
    };
    let (gx, g0, g1) = (trajectories(&defs, &x)?, trajectories(&defs, &m0)?, trajectories(&defs, &m1)?);
    let mut qoi_summaries = Vec::new();
    for (k, (q, momentum)) in defs.iter().enumerate() {
        let pick = |traj: &[f64], f: fn(f64) -> f64| -> Vec<f64> { q.time_set().iter().map(|&t| f(traj[t])).collect() };
        let id = |v: f64| v;
        let root = |v: f64| v.max(0.0).sqrt();
        let rel = |traj: &[f64], f| relative_sse(&pick(&gx[k], f), &pick(traj, f));
        qoi_summaries.push(QoiSummary {
            name: q.name().to_string(),
            in_objective: in_objective[k],
            relative_error_initial: rel(&g0[k], id),
            relative_error_final: rel(&g1[k], id),
            sqrt_relative_error_initial: momentum.then(|| rel(&g0[k], root)),
            sqrt_relative_error_final: momentum.then(|| rel(&g1[k], root)),
        });
    }
    let trajectories = defs
        .iter()
        .enumerate()
        .map(|(k, (q, _))| QoiTrajectory {
            name: q.name().to_string(),
            data: gx[k].clone(),
            initial_model: g0[k].clone(),
            final_model: g1[k].clone(),
        })
        .collect();

    let ranks = match &model0 {
        Model::Cp(m) => vec![m.rank()],
        Model::Tucker(m) => m.ranks(),
    };
    let summary = Summary {
        model: family,
        ranks,
        dims: x.dims().to_vec(),
        param_count: model0.param_count(),
        compression_ratio: model0.compression_ratio(),
        seed: cfg.seed,
        optimizer: (stage == Stage::GoalOriented).then_some(cfg.optimizer),
        iteration_budget: if stage == Stage::GoalOriented { cfg.opt.max_outer_iterations } else { 0 },
        accepted_iterations: trace.iter().skip(1).filter(|r| r.accepted).count(),
        termination,
        weights,
        f_go_initial: f_init,
        f_go_final: f_final,
        f_go_lower_bound: bound,
        tensor_error,
        qois: qoi_summaries,
    };
    let all = [summary.compression_ratio, summary.tensor_error.scaled_final, summary.tensor_error.unscaled_final];
    if all.iter().any(|v| !v.is_finite()) || f_final.is_some_and(|f| !f.is_finite()) {
        return Err(Error::Numeric("report contains non-finite values".into()));
    }
    Ok(RunReport {
        summary,
        trajectories,
        trace,
    })
}

/// QoI trajectories of the input data alone.
pub fn evaluate_qois(cfg: &RunConfig) -> Result<Vec<(String, Vec<f64>)>> {
    let x = load_data(cfg)?;
    let defs = build_qois(&cfg.qois, x.dims())?;
    if defs.is_empty() {
        return Err(Error::Config("no QoIs configured".into()));
    }
    defs.iter().map(|(q, _)| Ok((q.name().to_string(), q.trajectory(&x)?))).collect()
}
