use super::{dot, norm, strong_wolfe, Objective, OptConfig, OptResult, Termination, TraceRecord};
use crate::error::{Error, Result};
use std::collections::VecDeque;

/// Limited-memory BFGS with the two-loop recursion and a strong Wolfe line
/// search. The first step has unit length; later steps start from `α = 1`.
pub fn lbfgs_minimize(f: &dyn Objective, v0: &[f64], cfg: &OptConfig) -> Result<OptResult> {
    cfg.validate()?;
    if v0.len() != f.dim() {
        return Err(Error::DimensionMismatch(format!(
            "start has length {}, objective expects {}",
            v0.len(),
            f.dim()
        )));
    }
    let mut v = v0.to_vec();
    let (mut eval, mut g) = f.evaluate_with_gradient(&v)?;
    if !eval.value.is_finite() {
        return Err(Error::Numeric("objective is not finite at the starting point".into()));
    }
    let mut trace = vec![TraceRecord::new(0, &eval, norm(&g))];
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut termination = Termination::IterationBudget;

    for k in 1..=cfg.max_outer_iterations {
        let gnorm = norm(&g);
        if gnorm <= cfg.gradient_floor {
            termination = Termination::GradientFloor;
            break;
        }
        let mut p = two_loop(&g, &pairs);
        if dot(&p, &g) >= 0.0 {
            pairs.clear();
            p = g.iter().map(|x| -x).collect();
        }
        let alpha0 = if pairs.is_empty() { 1.0 / norm(&p) } else { 1.0 };
        let Some(ls) = strong_wolfe(f, &v, eval.value, &g, &p, alpha0, cfg.wolfe_c1, cfg.wolfe_c2)? else {
            termination = Termination::LineSearchFailure;
            break;
        };
        let s: Vec<f64> = p.iter().map(|x| ls.alpha * x).collect();
        let y: Vec<f64> = ls.gradient.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > f64::EPSILON * norm(&s) * norm(&y) {
            if pairs.len() == cfg.lbfgs_memory {
                pairs.pop_front();
            }
            pairs.push_back((s.clone(), y, 1.0 / sy));
        }
        v.iter_mut().zip(&s).for_each(|(a, b)| *a += b);
        eval = ls.eval;
        g = ls.gradient;
        let mut rec = TraceRecord::new(k, &eval, norm(&g));
        rec.step_norm = norm(&s);
        rec.inner_iterations = ls.evaluations;
        trace.push(rec);
    }
    Ok(OptResult {
        value: eval.value,
        v,
        trace,
        termination,
    })
}

/// `−H·g` with `H₀ = (sᵀy / yᵀy)·I` from the newest pair.
fn two_loop(g: &[f64], pairs: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let a = rho * dot(s, &q);
        q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push(a);
    }
    if let Some((s, y, _)) = pairs.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|x| *x *= gamma);
    }
    for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    q.iter_mut().for_each(|x| *x = -*x);
    q
}
