use super::{dot, norm};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TcgExit {
    Converged,
    Boundary,
    NegativeCurvature,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct TcgResult {
    pub step: Vec<f64>,
    /// `‖s‖_P`.
    pub step_pnorm: f64,
    /// `m(s) = gᵀs + ½ sᵀHs`, never positive.
    pub model_value: f64,
    pub iterations: usize,
    pub exit: TcgExit,
}

/// Steihaug–Toint preconditioned truncated CG for
/// `min gᵀs + ½ sᵀHs  s.t. ‖s‖_P ≤ radius`.
///
/// `precond` applies `P⁻¹`. The `P` norms of the iterate and direction are
/// carried by recurrences, so `P` itself is never needed. Stops on the
/// boundary, on non-positive curvature, once `‖r‖ ≤ rel_tol·‖g‖`, or after
/// `max_iter` iterations.
pub fn steihaug_tcg(
    g: &[f64],
    mut hess_vec: impl FnMut(&[f64]) -> Result<Vec<f64>>,
    precond: impl Fn(&[f64]) -> Vec<f64>,
    radius: f64,
    rel_tol: f64,
    max_iter: usize,
) -> Result<TcgResult> {
    let n = g.len();
    let mut s = vec![0.0; n];
    let mut r = g.to_vec();
    let mut z = precond(&r);
    let mut d: Vec<f64> = z.iter().map(|x| -x).collect();
    let mut rz = dot(&r, &z);
    let (mut s_ps, mut s_pd, mut d_pd) = (0.0, 0.0, rz);
    let mut model = 0.0;
    let r0 = norm(g);
    let result = |s: Vec<f64>, s_ps: f64, model: f64, iterations, exit| TcgResult {
        step: s,
        step_pnorm: s_ps.max(0.0).sqrt(),
        model_value: model,
        iterations,
        exit,
    };
    if r0 == 0.0 {
        return Ok(result(s, 0.0, 0.0, 0, TcgExit::Converged));
    }
    if !(rz > 0.0) {
        return Err(Error::Numeric("preconditioner is not positive definite".into()));
    }
    let to_boundary = |s_ps: f64, s_pd: f64, d_pd: f64| {
        (-s_pd + (s_pd * s_pd + d_pd * (radius * radius - s_ps)).max(0.0).sqrt()) / d_pd
    };

    for k in 0..max_iter {
        let hd = hess_vec(&d)?;
        let kappa = dot(&d, &hd);
        if !kappa.is_finite() {
            return Err(Error::Numeric("Hessian-vector product is not finite".into()));
        }
        let alpha = rz / kappa;
        let next_ps = s_ps + 2.0 * alpha * s_pd + alpha * alpha * d_pd;
        if kappa <= 0.0 || next_ps >= radius * radius {
            let tau = to_boundary(s_ps, s_pd, d_pd);
            model += tau * dot(&r, &d) + 0.5 * tau * tau * kappa;
            s.iter_mut().zip(&d).for_each(|(a, b)| *a += tau * b);
            let exit = if kappa <= 0.0 {
                TcgExit::NegativeCurvature
            } else {
                TcgExit::Boundary
            };
            return Ok(result(s, radius * radius, model, k + 1, exit));
        }
        model += alpha * dot(&r, &d) + 0.5 * alpha * alpha * kappa;
        s.iter_mut().zip(&d).for_each(|(a, b)| *a += alpha * b);
        r.iter_mut().zip(&hd).for_each(|(a, b)| *a += alpha * b);
        s_ps = next_ps;
        if norm(&r) <= rel_tol * r0 {
            return Ok(result(s, s_ps, model, k + 1, TcgExit::Converged));
        }
        z = precond(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        d.iter_mut().zip(&z).for_each(|(a, b)| *a = -b + beta * *a);
        s_pd = beta * (s_pd + alpha * d_pd);
        d_pd = rz + beta * beta * d_pd;
    }
    Ok(result(s, s_ps, model, max_iter, TcgExit::MaxIterations))
}
