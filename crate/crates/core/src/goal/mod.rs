//! Goal-oriented objective
//!
//! ```text
//! f_go(v) = α_0 ‖X̃ − M̃(v)‖² + Σ_q α_q Σ_{t∈T_q} (g_q(S(X̃_t)) − g_q(S(M̃_t)))²
//! ```
//!
//! over the flat parameter vector `v` of a CP or Tucker model of the scaled
//! data `X̃`. QoIs always see unscaled slices; their derivative tensors are
//! pulled back through `S` with [`ScalingInfo::chain_scale`].
//!
//! Every derivative is expressed through two linear maps of the model,
//! [`ModelShape::tangent`] (`J_M w`) and [`ModelShape::adjoint`] (`J_Mᵀ T`):
//!
//! - gradient: `J_Mᵀ [2α_0 (M̃ − X̃) − Σ_{q,t} 2α_q F_{q,t} σZ_{q,t}]`, with
//!   all QoI terms summed into one tensor before the single adjoint pass;
//! - Gauss-Newton product: `J_Mᵀ [2α_0 J_M w + Σ_{q,t} 2α_q ⟨σZ_{q,t}, (J_M w)_t⟩ σZ_{q,t}]`.
//!   For CP the Frobenius part goes through Gram matrices instead.

mod precond;
mod scaling;
mod shape;

pub use precond::{Preconditioner, DIAG_FLOOR};
pub use scaling::{ScalingInfo, SIGMA_FLOOR};
pub use shape::{ModelKind, ModelShape};

use crate::error::{Error, Result};
use crate::matrix::dot;
use crate::qoi::QoiDefinition;
use crate::tensor::DenseTensor;
use serde::{Deserialize, Serialize};

/// QoI residual sums below this are treated as already preserved.
pub const RESIDUAL_FLOOR: f64 = 1e-30;

/// Unweighted pieces of the objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Terms {
    /// `‖X̃ − M̃‖²`.
    pub frobenius: f64,
    /// `Σ_t (g_q(X_t) − g_q(M_t))²` per QoI.
    pub qoi_sse: Vec<f64>,
}

impl Terms {
    pub fn weighted(&self, weights: &[f64]) -> f64 {
        weights[0] * self.frobenius
            + self
                .qoi_sse
                .iter()
                .zip(&weights[1..])
                .map(|(s, a)| a * s)
                .sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightChoice {
    /// `α_0` followed by one weight per kept QoI.
    pub weights: Vec<f64>,
    /// Indices (into the QoIs passed in) that stay in the objective.
    pub kept: Vec<usize>,
    /// QoIs dropped because the initial guess already preserves them.
    pub dropped: Vec<usize>,
}

/// Weights that make the Frobenius term and every QoI term contribute
/// `1/(Q+1)` at the initial guess, so `f_go(init) = 1`.
pub fn choose_weights(initial: &Terms) -> Result<WeightChoice> {
    if !(initial.frobenius > 0.0) || !initial.frobenius.is_finite() {
        return Err(Error::Numeric(format!(
            "Frobenius term at the initial guess is {}; weights need it positive",
            initial.frobenius
        )));
    }
    let (kept, dropped): (Vec<usize>, Vec<usize>) =
        (0..initial.qoi_sse.len()).partition(|&q| initial.qoi_sse[q] >= RESIDUAL_FLOOR);
    if let Some(&q) = kept.iter().find(|&&q| !initial.qoi_sse[q].is_finite()) {
        return Err(Error::Numeric(format!("QoI {q} residual at the initial guess is not finite")));
    }
    let share = 1.0 / (kept.len() + 1) as f64;
    let mut weights = vec![share / initial.frobenius];
    weights.extend(kept.iter().map(|&q| share / initial.qoi_sse[q]));
    Ok(WeightChoice {
        weights,
        kept,
        dropped,
    })
}

/// The assembled goal-oriented objective.
#[derive(Debug, Clone)]
pub struct GoalProblem {
    data: DenseTensor,
    scaling: ScalingInfo,
    shape: ModelShape,
    qois: Vec<QoiDefinition>,
    weights: Vec<f64>,
    /// `g_q(S(X̃_t))` for `t` in QoI `q`'s time set.
    targets: Vec<Vec<f64>>,
}

impl GoalProblem {
    /// `data` is already scaled. With QoIs, the variable mode must be the
    /// second-to-last mode (slices are `(space…, variable)`).
    pub fn new(
        data: DenseTensor,
        scaling: ScalingInfo,
        shape: ModelShape,
        qois: Vec<QoiDefinition>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let d = data.order();
        if shape.dims() != data.dims() {
            return Err(Error::DimensionMismatch(format!(
                "model dims {:?} differ from data dims {:?}",
                shape.dims(),
                data.dims()
            )));
        }
        if weights.len() != qois.len() + 1 {
            return Err(Error::InvalidArgument(format!(
                "{} weights for {} QoIs",
                weights.len(),
                qois.len()
            )));
        }
        if let Some(a) = weights.iter().find(|&&a| !(a > 0.0) || !a.is_finite()) {
            return Err(Error::InvalidArgument(format!("weight {a} is not positive")));
        }
        if !qois.is_empty() && (d < 2 || scaling.variable_mode() != d - 2) {
            return Err(Error::InvalidArgument(format!(
                "QoIs need the variable mode to be mode {} of a {d}-way tensor, got {}",
                d.saturating_sub(2),
                scaling.variable_mode()
            )));
        }
        let vm = scaling.variable_mode();
        if vm >= d || data.dims()[vm] != scaling.mu().len() {
            return Err(Error::DimensionMismatch(format!(
                "scaling for {} variables along mode {vm} does not fit dims {:?}",
                scaling.mu().len(),
                data.dims()
            )));
        }
        let tau = data.dims()[d - 1];
        for q in &qois {
            q.check_times(tau)?;
        }
        let targets = qoi_values(&data, &scaling, &qois)?;
        Ok(Self {
            data,
            scaling,
            shape,
            qois,
            weights,
            targets,
        })
    }

    /// Builds the problem with weights chosen at the initial guess `v0`;
    /// QoIs that `v0` already preserves are dropped.
    pub fn from_initial_guess(
        data: DenseTensor,
        scaling: ScalingInfo,
        shape: ModelShape,
        qois: Vec<QoiDefinition>,
        v0: &[f64],
    ) -> Result<(Self, WeightChoice)> {
        let q = qois.len();
        let mut problem = Self::new(data, scaling, shape, qois, vec![1.0; q + 1])?;
        let choice = choose_weights(&problem.terms(v0)?)?;
        let keep = |q: usize| choice.kept.contains(&q);
        problem.qois = std::mem::take(&mut problem.qois)
            .into_iter()
            .enumerate()
            .filter_map(|(i, d)| keep(i).then_some(d))
            .collect();
        problem.targets = std::mem::take(&mut problem.targets)
            .into_iter()
            .enumerate()
            .filter_map(|(i, t)| keep(i).then_some(t))
            .collect();
        problem.weights = choice.weights.clone();
        Ok((problem, choice))
    }

    pub fn data(&self) -> &DenseTensor {
        &self.data
    }

    pub fn scaling(&self) -> &ScalingInfo {
        &self.scaling
    }

    pub fn shape(&self) -> &ModelShape {
        &self.shape
    }

    pub fn qois(&self) -> &[QoiDefinition] {
        &self.qois
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn targets(&self) -> &[Vec<f64>] {
        &self.targets
    }

    /// The unweighted terms at `v`.
    pub fn terms(&self, v: &[f64]) -> Result<Terms> {
        let m = self.shape.reconstruct(v)?;
        self.terms_of(&m)
    }

    fn terms_of(&self, m: &DenseTensor) -> Result<Terms> {
        let frobenius = self.data.dist_sq(m)?;
        let values = qoi_values(m, &self.scaling, &self.qois)?;
        let qoi_sse = values
            .iter()
            .zip(&self.targets)
            .map(|(gm, gx)| gm.iter().zip(gx).map(|(a, b)| (b - a) * (b - a)).sum())
            .collect();
        Ok(Terms { frobenius, qoi_sse })
    }

    /// `f_go(v)`.
    pub fn objective(&self, v: &[f64]) -> Result<f64> {
        Ok(self.terms(v)?.weighted(&self.weights))
    }

    /// Value, terms, gradient and the data needed for Gauss-Newton products
    /// at `v`.
    pub fn linearize(&self, v: &[f64]) -> Result<GoalPoint<'_>> {
        let recon = self.shape.reconstruct(v)?;
        let terms = self.terms_of(&recon)?;
        let value = terms.weighted(&self.weights);
        let mut slices: Vec<Option<DenseTensor>> = vec![None; *recon.dims().last().expect("dims")];
        let mut residuals = Vec::new();
        for (q, def) in self.qois.iter().enumerate() {
            for (k, &t) in def.time_set().iter().enumerate() {
                if slices[t].is_none() {
                    slices[t] = Some(self.scaling.unscale(&recon.time_slice(t)?)?);
                }
                let m_t = slices[t].as_ref().expect("filled above");
                let gm = def.functional().value(m_t)?;
                let z = self.scaling.chain_scale(&def.functional().derivative(m_t)?)?;
                residuals.push(QoiResidual {
                    qoi: q,
                    time: t,
                    residual: self.targets[q][k] - gm,
                    sz: z.into_vec(),
                });
            }
        }
        let mut t = recon.clone();
        t.axpy(-1.0, &self.data)?;
        t.scale(2.0 * self.weights[0]);
        for r in &residuals {
            let c = -2.0 * self.weights[1 + r.qoi] * r.residual;
            for (o, z) in t.time_slice_values_mut(r.time).iter_mut().zip(&r.sz) {
                *o += c * z;
            }
        }
        let gradient = self.shape.adjoint(v, &t)?;
        Ok(GoalPoint {
            problem: self,
            v: v.to_vec(),
            value,
            terms,
            gradient,
            residuals,
        })
    }

    pub fn gradient(&self, v: &[f64]) -> Result<Vec<f64>> {
        Ok(self.linearize(v)?.gradient)
    }

    pub fn gn_hess_vec(&self, v: &[f64], w: &[f64]) -> Result<Vec<f64>> {
        self.linearize(v)?.hess_vec(w)
    }
}

/// `g_q(S(Y_t))` for each QoI and each `t` in its time set.
fn qoi_values(y: &DenseTensor, scaling: &ScalingInfo, qois: &[QoiDefinition]) -> Result<Vec<Vec<f64>>> {
    if qois.is_empty() {
        return Ok(Vec::new());
    }
    let mut slices: Vec<Option<DenseTensor>> = vec![None; *y.dims().last().expect("dims")];
    qois.iter()
        .map(|def| {
            def.time_set()
                .iter()
                .map(|&t| {
                    if slices[t].is_none() {
                        slices[t] = Some(scaling.unscale(&y.time_slice(t)?)?);
                    }
                    def.functional().value(slices[t].as_ref().expect("filled above"))
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone)]
struct QoiResidual {
    qoi: usize,
    time: usize,
    /// `F = g_q(S(X̃_t)) − g_q(S(M̃_t))`.
    residual: f64,
    /// `σ ∗ Z_t`, the QoI derivative with respect to the scaled slice.
    sz: Vec<f64>,
}

/// The objective linearized at one parameter vector.
#[derive(Debug, Clone)]
pub struct GoalPoint<'a> {
    problem: &'a GoalProblem,
    v: Vec<f64>,
    value: f64,
    terms: Terms,
    gradient: Vec<f64>,
    residuals: Vec<QoiResidual>,
}

impl GoalPoint<'_> {
    pub fn params(&self) -> &[f64] {
        &self.v
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn terms(&self) -> &Terms {
        &self.terms
    }

    pub fn gradient(&self) -> &[f64] {
        &self.gradient
    }

    /// Stacked QoI residuals `√α_q·F_{q,t}`, QoI-major then time.
    pub fn weighted_residuals(&self) -> Vec<f64> {
        self.residuals
            .iter()
            .map(|r| self.problem.weights[1 + r.qoi].sqrt() * r.residual)
            .collect()
    }

    /// Gauss-Newton product `2JᵀJ·w`.
    pub fn hess_vec(&self, w: &[f64]) -> Result<Vec<f64>> {
        let p = self.problem;
        let shape = &p.shape;
        shape.check_len(w)?;
        let a0 = p.weights[0];
        let result = if shape.is_cp() {
            let mut h = shape.cp_gram_hess_vec(&self.v, w)?;
            h.iter_mut().for_each(|x| *x *= 2.0 * a0);
            if !self.residuals.is_empty() {
                let tw = shape.tangent(&self.v, w)?;
                let goal = self.goal_tensor(&tw)?;
                for (x, y) in h.iter_mut().zip(shape.adjoint(&self.v, &goal)?) {
                    *x += y;
                }
            }
            h
        } else {
            let tw = shape.tangent(&self.v, w)?;
            let mut t = self.goal_tensor(&tw)?;
            t.axpy(2.0 * a0, &tw)?;
            shape.adjoint(&self.v, &t)?
        };
        if result.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric("Gauss-Newton product is not finite".into()));
        }
        Ok(result)
    }

    /// `Σ_{q,t} 2α_q ⟨σZ_{q,t}, tw_t⟩ σZ_{q,t}` placed at slice `t`.
    fn goal_tensor(&self, tw: &DenseTensor) -> Result<DenseTensor> {
        let mut t = DenseTensor::zeros(tw.dims())?;
        for r in &self.residuals {
            let s = 2.0 * self.problem.weights[1 + r.qoi] * dot(&r.sz, tw.time_slice_values(r.time));
            for (o, z) in t.time_slice_values_mut(r.time).iter_mut().zip(&r.sz) {
                *o += s * z;
            }
        }
        Ok(t)
    }

    pub fn preconditioner(&self) -> Result<Preconditioner> {
        Preconditioner::build(&self.problem.shape, &self.v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomp::random_factors;
    use crate::kernels::mttkrp;
    use crate::qoi::{SliceFunctional, VariableSum};
    use std::sync::Arc;

    fn mass(tau: usize) -> QoiDefinition {
        let g: Arc<dyn SliceFunctional> = Arc::new(VariableSum::new(vec![0, 1], 1.0).unwrap());
        QoiDefinition::all_times("mass", tau, g).unwrap()
    }

    #[test]
    fn weight_rule_examples() {
        let c = choose_weights(&Terms {
            frobenius: 0.5,
            qoi_sse: vec![0.25],
        })
        .unwrap();
        assert_eq!(c.weights, vec![1.0, 2.0]);
        let t = Terms {
            frobenius: 3.0,
            qoi_sse: vec![3.0, 3.0],
        };
        let c = choose_weights(&t).unwrap();
        assert!((c.weights[0] * 3.0 - 1.0 / 3.0).abs() < 1e-15);
        assert!((t.weighted(&c.weights) - 1.0).abs() < 1e-15);

        let c = choose_weights(&Terms {
            frobenius: 2.0,
            qoi_sse: vec![1e-31, 4.0],
        })
        .unwrap();
        assert_eq!(c.kept, vec![1]);
        assert_eq!(c.dropped, vec![0]);
        assert_eq!(c.weights, vec![0.25, 0.125]);
        assert!(choose_weights(&Terms {
            frobenius: 0.0,
            qoi_sse: vec![]
        })
        .is_err());
    }

    #[test]
    fn exact_model_has_zero_objective_and_gradient() {
        let shape = ModelShape::cp(&[3, 2, 3, 4], 2).unwrap();
        let v: Vec<f64> = random_factors(&[shape.len()], 1, 5)[0].as_slice().to_vec();
        let x = shape.reconstruct(&v).unwrap();
        let scaling = ScalingInfo::identity(2, 3);
        let p = GoalProblem::new(x, scaling, shape, vec![mass(4)], vec![1.0, 1.0]).unwrap();
        let point = p.linearize(&v).unwrap();
        assert_eq!(point.value(), 0.0);
        assert!(point.gradient().iter().all(|&g| g.abs() <= 1e-13));
    }

    #[test]
    fn frobenius_gradient_matches_cp_formula() {
        // ∂f/∂A_n = 2(A_n Γ_n − X_(n)(⊙_{k≠n} A_k)).
        let dims = [4, 3, 2, 5];
        let shape = ModelShape::cp(&dims, 3).unwrap();
        let x = DenseTensor::from_fn(&dims, |i| ((i[0] * 3 + i[1] + 7 * i[2] * i[3]) as f64).cos()).unwrap();
        let v: Vec<f64> = random_factors(&[shape.len()], 1, 8)[0].as_slice().to_vec();
        let p = GoalProblem::new(x.clone(), ScalingInfo::identity(2, 2), shape.clone(), vec![], vec![0.7]).unwrap();
        let g = p.gradient(&v).unwrap();
        let (_, a) = shape.parts(&v).unwrap();
        let grams: Vec<_> = a.iter().map(crate::matrix::Matrix::gram).collect();
        let mut expect = Vec::new();
        for n in 0..4 {
            let mut m = a[n].matmul(&crate::decomp::hadamard_of_grams(&grams, n)).unwrap();
            let u = mttkrp(&x, &a, n).unwrap();
            m.as_mut_slice().iter_mut().zip(u.as_slice()).for_each(|(s, u)| *s = 2.0 * 0.7 * (*s - u));
            expect.extend_from_slice(m.as_slice());
        }
        for (a, b) in g.iter().zip(&expect) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn initial_guess_weights_normalize_objective() {
        let shape = ModelShape::tucker(&[3, 2, 3, 4], &[2, 2, 2, 2]).unwrap();
        let x = DenseTensor::from_fn(&[3, 2, 3, 4], |i| 1.0 + ((i[0] + 2 * i[1] + i[2] * i[3]) as f64).sin()).unwrap();
        let scaling = ScalingInfo::compute(&x, 2).unwrap();
        let xs = scaling.apply(&x).unwrap();
        let v0: Vec<f64> = random_factors(&[shape.len()], 1, 2)[0].as_slice().to_vec();
        let (p, choice) = GoalProblem::from_initial_guess(xs, scaling, shape, vec![mass(4)], &v0).unwrap();
        assert!(choice.dropped.is_empty());
        assert!((p.objective(&v0).unwrap() - 1.0).abs() <= 1e-12);
        // Targets are the QoIs of the unscaled data.
        let direct = mass(4).values(&x).unwrap();
        for (a, b) in p.targets()[0].iter().zip(&direct) {
            assert!((a - b).abs() <= 1e-12 * b.abs());
        }
    }

    #[test]
    fn rejects_inconsistent_setup() {
        let shape = ModelShape::cp(&[3, 2, 4], 1).unwrap();
        let x = DenseTensor::zeros(&[3, 2, 4]).unwrap();
        let id = ScalingInfo::identity(1, 2);
        assert!(GoalProblem::new(x.clone(), id.clone(), shape.clone(), vec![], vec![1.0, 1.0]).is_err());
        assert!(GoalProblem::new(x.clone(), id.clone(), shape.clone(), vec![], vec![0.0]).is_err());
        assert!(GoalProblem::new(x.clone(), ScalingInfo::identity(0, 3), shape.clone(), vec![mass(4)], vec![1.0, 1.0]).is_err());
        assert!(GoalProblem::new(x.clone(), id.clone(), shape.clone(), vec![mass(5)], vec![1.0, 1.0]).is_err());
        let wrong = ModelShape::cp(&[3, 2, 5], 1).unwrap();
        assert!(GoalProblem::new(x, id, wrong, vec![], vec![1.0]).is_err());
    }
}
