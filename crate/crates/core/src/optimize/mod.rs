//! Unconstrained minimizers over flat parameter vectors.
//!
//! Both solvers run a fixed outer-iteration budget and stop early only when
//! the gradient norm drops below [`OptConfig::gradient_floor`].

mod lbfgs;
mod line_search;
mod tcg;
mod trust_region;

pub use lbfgs::lbfgs_minimize;
pub use line_search::{strong_wolfe, LineSearchResult};
pub use tcg::{steihaug_tcg, TcgExit, TcgResult};
pub use trust_region::tr_newton_minimize;

use crate::error::{Error, Result};
use crate::goal::{GoalPoint, GoalProblem, Preconditioner, Terms};
use serde::{Deserialize, Serialize};

/// Objective value plus an optional breakdown for the trace.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub terms: Option<Terms>,
}

impl Evaluation {
    pub fn plain(value: f64) -> Self {
        Self { value, terms: None }
    }
}

pub trait Objective {
    fn dim(&self) -> usize;
    fn evaluate(&self, v: &[f64]) -> Result<Evaluation>;
    fn evaluate_with_gradient(&self, v: &[f64]) -> Result<(Evaluation, Vec<f64>)>;
}

/// A quadratic model around one point.
pub trait LocalModel {
    /// Curvature product `H·w`.
    fn hess_vec(&self, w: &[f64]) -> Result<Vec<f64>>;
    /// Preconditioner solve `P⁻¹·r`; the trust region is measured in the
    /// `P` norm.
    fn precondition(&self, r: &[f64]) -> Vec<f64>;
}

pub trait SecondOrderObjective: Objective {
    type Local<'a>: LocalModel
    where
        Self: 'a;

    fn linearize<'a>(&'a self, v: &[f64]) -> Result<(Evaluation, Vec<f64>, Self::Local<'a>)>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptConfig {
    pub max_outer_iterations: usize,
    pub lbfgs_memory: usize,
    pub wolfe_c1: f64,
    pub wolfe_c2: f64,
    /// Cap on truncated-CG iterations; `None` means `min(dim, 100)`.
    pub tcg_max_iterations: Option<usize>,
    /// `None` means `max(‖v₀‖/10, 1)`.
    pub initial_radius: Option<f64>,
    /// Steps with `ρ` below this are rejected and the radius shrinks.
    pub accept_ratio: f64,
    /// Steps with `ρ` above this that hit the boundary grow the radius.
    pub expand_ratio: f64,
    pub shrink_factor: f64,
    pub expand_factor: f64,
    /// Largest radius as a multiple of the initial one.
    pub max_radius_factor: f64,
    pub gradient_floor: f64,
}

impl Default for OptConfig {
    fn default() -> Self {
        Self {
            max_outer_iterations: 20,
            lbfgs_memory: 5,
            wolfe_c1: 1e-4,
            wolfe_c2: 0.9,
            tcg_max_iterations: None,
            initial_radius: None,
            accept_ratio: 0.1,
            expand_ratio: 0.75,
            shrink_factor: 0.25,
            expand_factor: 2.5,
            max_radius_factor: 1e6,
            gradient_floor: 1e-12,
        }
    }
}

impl OptConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lbfgs_memory", self.lbfgs_memory as f64),
            ("wolfe_c1", self.wolfe_c1),
            ("accept_ratio", self.accept_ratio),
            ("shrink_factor", self.shrink_factor),
            ("max_radius_factor", self.max_radius_factor),
            ("gradient_floor", self.gradient_floor),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| !(*v > 0.0)) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if !(self.wolfe_c1 < self.wolfe_c2 && self.wolfe_c2 < 1.0) {
            return Err(Error::Config("need 0 < wolfe_c1 < wolfe_c2 < 1".into()));
        }
        if !(self.accept_ratio < self.expand_ratio && self.expand_ratio < 1.0) {
            return Err(Error::Config("need 0 < accept_ratio < expand_ratio < 1".into()));
        }
        if !(self.shrink_factor < 1.0 && self.expand_factor > 1.0) {
            return Err(Error::Config("need shrink_factor < 1 < expand_factor".into()));
        }
        if self.tcg_max_iterations == Some(0) {
            return Err(Error::Config("tcg_max_iterations must be positive".into()));
        }
        if let Some(r) = self.initial_radius {
            if !(r > 0.0) {
                return Err(Error::Config("initial_radius must be positive".into()));
            }
        }
        Ok(())
    }
}

/// One row of the optimizer history. Row 0 is the starting point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub value: f64,
    pub grad_norm: f64,
    /// Unweighted Frobenius term, when the objective reports it.
    pub frobenius: Option<f64>,
    /// Unweighted QoI residual sums, when the objective reports them.
    pub qoi_sse: Vec<f64>,
    pub step_norm: f64,
    /// Truncated-CG iterations (trust region) or function evaluations (L-BFGS).
    pub inner_iterations: usize,
    pub accepted: bool,
}

impl TraceRecord {
    fn new(iteration: usize, eval: &Evaluation, grad_norm: f64) -> Self {
        Self {
            iteration,
            value: eval.value,
            grad_norm,
            frobenius: eval.terms.as_ref().map(|t| t.frobenius),
            qoi_sse: eval.terms.as_ref().map(|t| t.qoi_sse.clone()).unwrap_or_default(),
            step_norm: 0.0,
            inner_iterations: 0,
            accepted: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    IterationBudget,
    GradientFloor,
    LineSearchFailure,
}

#[derive(Debug, Clone)]
pub struct OptResult {
    pub v: Vec<f64>,
    pub value: f64,
    pub trace: Vec<TraceRecord>,
    pub termination: Termination,
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Wraps plain closures as an [`Objective`].
pub struct FnObjective<F, G> {
    pub dim: usize,
    pub f: F,
    pub grad: G,
}

impl<F, G> Objective for FnObjective<F, G>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn evaluate(&self, v: &[f64]) -> Result<Evaluation> {
        Ok(Evaluation::plain((self.f)(v)))
    }

    fn evaluate_with_gradient(&self, v: &[f64]) -> Result<(Evaluation, Vec<f64>)> {
        Ok((Evaluation::plain((self.f)(v)), (self.grad)(v)))
    }
}

impl Objective for GoalProblem {
    fn dim(&self) -> usize {
        self.shape().len()
    }

    fn evaluate(&self, v: &[f64]) -> Result<Evaluation> {
        let terms = self.terms(v)?;
        Ok(Evaluation {
            value: terms.weighted(self.weights()),
            terms: Some(terms),
        })
    }

    fn evaluate_with_gradient(&self, v: &[f64]) -> Result<(Evaluation, Vec<f64>)> {
        let p = self.linearize(v)?;
        Ok((
            Evaluation {
                value: p.value(),
                terms: Some(p.terms().clone()),
            },
            p.gradient().to_vec(),
        ))
    }
}

/// Gauss-Newton model of the goal objective with its preconditioner.
pub struct GoalLocal<'a> {
    point: GoalPoint<'a>,
    precond: Preconditioner,
}

impl LocalModel for GoalLocal<'_> {
    fn hess_vec(&self, w: &[f64]) -> Result<Vec<f64>> {
        self.point.hess_vec(w)
    }

    fn precondition(&self, r: &[f64]) -> Vec<f64> {
        self.precond.apply(r)
    }
}

impl SecondOrderObjective for GoalProblem {
    type Local<'a> = GoalLocal<'a>;

    fn linearize<'a>(&'a self, v: &[f64]) -> Result<(Evaluation, Vec<f64>, GoalLocal<'a>)> {
        let point = GoalProblem::linearize(self, v)?;
        let precond = point.preconditioner()?;
        let eval = Evaluation {
            value: point.value(),
            terms: Some(point.terms().clone()),
        };
        let g = point.gradient().to_vec();
        Ok((eval, g, GoalLocal { point, precond }))
    }
}
