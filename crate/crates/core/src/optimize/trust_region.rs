use super::{norm, steihaug_tcg, LocalModel, OptConfig, OptResult, SecondOrderObjective, Termination, TraceRecord};
use crate::error::{Error, Result};

/// Trust-region Newton with a preconditioned truncated-CG inner solve.
///
/// Every outer iteration counts against the budget, whether or not its step
/// is accepted. A step is accepted when `ρ = actual / predicted` reaches
/// [`OptConfig::accept_ratio`] and the objective strictly decreases; the
/// radius then grows if the step reached the boundary with
/// `ρ > expand_ratio`. Rejected steps shrink the radius to
/// `shrink_factor·‖s‖_P`.
pub fn tr_newton_minimize<F: SecondOrderObjective>(f: &F, v0: &[f64], cfg: &OptConfig) -> Result<OptResult> {
    cfg.validate()?;
    let dim = f.dim();
    if v0.len() != dim {
        return Err(Error::DimensionMismatch(format!(
            "start has length {}, objective expects {dim}",
            v0.len()
        )));
    }
    let max_inner = cfg.tcg_max_iterations.unwrap_or(dim.min(100)).max(1);
    let radius0 = cfg.initial_radius.unwrap_or((norm(v0) / 10.0).max(1.0));
    let max_radius = cfg.max_radius_factor * radius0;
    let mut radius = radius0;

    let mut v = v0.to_vec();
    let (mut eval, mut g, mut local) = f.linearize(&v)?;
    if !eval.value.is_finite() {
        return Err(Error::Numeric("objective is not finite at the starting point".into()));
    }
    let mut trace = vec![TraceRecord::new(0, &eval, norm(&g))];
    let mut termination = Termination::IterationBudget;

    for k in 1..=cfg.max_outer_iterations {
        let gnorm = norm(&g);
        if gnorm <= cfg.gradient_floor {
            termination = Termination::GradientFloor;
            break;
        }
        let tol = 0.5f64.min(gnorm.sqrt());
        let sol = steihaug_tcg(&g, |w| local.hess_vec(w), |r| local.precondition(r), radius, tol, max_inner)?;
        let predicted = -sol.model_value;
        let mut rec = TraceRecord::new(k, &eval, gnorm);
        rec.step_norm = sol.step_pnorm;
        rec.inner_iterations = sol.iterations;

        let accepted = if predicted > 0.0 {
            let trial: Vec<f64> = v.iter().zip(&sol.step).map(|(a, b)| a + b).collect();
            let trial_eval = f.evaluate(&trial)?;
            let rho = (eval.value - trial_eval.value) / predicted;
            if trial_eval.value.is_finite() && rho >= cfg.accept_ratio && trial_eval.value < eval.value {
                let on_boundary = sol.step_pnorm >= (1.0 - 1e-8) * radius;
                if rho > cfg.expand_ratio && on_boundary {
                    radius = (cfg.expand_factor * radius).min(max_radius);
                }
                v = trial;
                Some(())
            } else {
                None
            }
        } else {
            None
        };
        match accepted {
            Some(()) => {
                let (e, grad, l) = f.linearize(&v)?;
                eval = e;
                g = grad;
                local = l;
                rec = TraceRecord {
                    grad_norm: norm(&g),
                    ..TraceRecord::new(k, &eval, 0.0)
                }
                .with_step(sol.step_pnorm, sol.iterations);
            }
            None => {
                radius = cfg.shrink_factor * sol.step_pnorm.min(radius).max(f64::MIN_POSITIVE);
                rec.accepted = false;
            }
        }
        trace.push(rec);
    }
    Ok(OptResult {
        value: eval.value,
        v,
        trace,
        termination,
    })
}

impl TraceRecord {
    fn with_step(mut self, step_norm: f64, inner: usize) -> Self {
        self.step_norm = step_norm;
        self.inner_iterations = inner;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimize::{Evaluation, Objective};

    /// `½ vᵀAv − bᵀv` with its exact Hessian.
    struct Quadratic {
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
    }

    impl Quadratic {
        fn av(&self, v: &[f64]) -> Vec<f64> {
            self.a.iter().map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
        }
    }

    impl Objective for Quadratic {
        fn dim(&self) -> usize {
            self.b.len()
        }
        fn evaluate(&self, v: &[f64]) -> Result<Evaluation> {
            let av = self.av(v);
            Ok(Evaluation::plain(
                v.iter().zip(&av).map(|(x, y)| 0.5 * x * y).sum::<f64>()
                    - v.iter().zip(&self.b).map(|(x, y)| x * y).sum::<f64>(),
            ))
        }
        fn evaluate_with_gradient(&self, v: &[f64]) -> Result<(Evaluation, Vec<f64>)> {
            let g = self.av(v).iter().zip(&self.b).map(|(x, y)| x - y).collect();
            Ok((self.evaluate(v)?, g))
        }
    }

    struct Exact<'a>(&'a Quadratic);

    impl LocalModel for Exact<'_> {
        fn hess_vec(&self, w: &[f64]) -> Result<Vec<f64>> {
            Ok(self.0.av(w))
        }
        /// Jacobi preconditioner.
        fn precondition(&self, r: &[f64]) -> Vec<f64> {
            r.iter().enumerate().map(|(i, x)| x / self.0.a[i][i]).collect()
        }
    }

    impl SecondOrderObjective for Quadratic {
        type Local<'a> = Exact<'a>;
        fn linearize<'a>(&'a self, v: &[f64]) -> Result<(Evaluation, Vec<f64>, Exact<'a>)> {
            let (e, g) = self.evaluate_with_gradient(v)?;
            Ok((e, g, Exact(self)))
        }
    }

    fn quadratic() -> Quadratic {
        Quadratic {
            a: vec![vec![4.0, 1.0, 0.0], vec![1.0, 3.0, 0.5], vec![0.0, 0.5, 2.0]],
            b: vec![1.0, -2.0, 0.5],
        }
    }

    #[test]
    fn newton_on_quadratic_in_one_iteration() {
        // With a diagonal Hessian the Jacobi preconditioner is exact, so the
        // first CG step is the Newton step whatever the forcing term.
        let q = Quadratic {
            a: vec![vec![4.0, 0.0, 0.0], vec![0.0, 0.5, 0.0], vec![0.0, 0.0, 9.0]],
            b: vec![1.0, -2.0, 0.5],
        };
        let cfg = OptConfig {
            initial_radius: Some(100.0),
            tcg_max_iterations: Some(3),
            max_outer_iterations: 1,
            ..OptConfig::default()
        };
        let r = tr_newton_minimize(&q, &[0.0; 3], &cfg).unwrap();
        let g = q.evaluate_with_gradient(&r.v).unwrap().1;
        assert!(norm(&g) <= 1e-10, "{g:?}");
        assert!(r.trace[1].accepted);
    }

    #[test]
    fn small_radius_still_decreases_monotonically() {
        let q = quadratic();
        let cfg = OptConfig {
            initial_radius: Some(0.01),
            ..OptConfig::default()
        };
        let r = tr_newton_minimize(&q, &[5.0, -3.0, 2.0], &cfg).unwrap();
        let accepted: Vec<f64> = r.trace.iter().filter(|t| t.accepted).map(|t| t.value).collect();
        for w in accepted.windows(2) {
            assert!(w[1] < w[0]);
        }
        assert!(r.trace.len() <= cfg.max_outer_iterations + 1);
        assert!(r.value < accepted[0]);
    }
}
