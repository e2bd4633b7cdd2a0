use super::{dot, Evaluation, Objective};
use crate::error::Result;

const MAX_EVALS: usize = 30;

#[derive(Debug, Clone)]
pub struct LineSearchResult {
    pub alpha: f64,
    pub eval: Evaluation,
    pub gradient: Vec<f64>,
    pub evaluations: usize,
    /// False when only sufficient decrease could be established.
    pub strong_wolfe: bool,
}

struct Sample {
    alpha: f64,
    phi: f64,
    dphi: f64,
    eval: Evaluation,
    grad: Vec<f64>,
}

/// Line search for the strong Wolfe conditions along descent direction `p`
/// (bracketing followed by safeguarded cubic zoom). Returns `None` if no
/// point with sufficient decrease was found.
#[allow(clippy::too_many_arguments)]
pub fn strong_wolfe(
    f: &dyn Objective,
    v: &[f64],
    f0: f64,
    g0: &[f64],
    p: &[f64],
    alpha_init: f64,
    c1: f64,
    c2: f64,
) -> Result<Option<LineSearchResult>> {
    let dphi0 = dot(g0, p);
    let mut evals = 0;
    let probe = |alpha: f64| -> Result<Sample> {
        let x: Vec<f64> = v.iter().zip(p).map(|(a, b)| a + alpha * b).collect();
        let (eval, grad) = f.evaluate_with_gradient(&x)?;
        Ok(Sample {
            alpha,
            phi: eval.value,
            dphi: dot(&grad, p),
            eval,
            grad,
        })
    };
    let armijo = |s: &Sample| s.phi.is_finite() && s.phi <= f0 + c1 * s.alpha * dphi0;
    let curvature = |s: &Sample| s.dphi.abs() <= -c2 * dphi0;
    let done = |s: Sample, evals: usize, strong: bool| {
        Some(LineSearchResult {
            alpha: s.alpha,
            eval: s.eval,
            gradient: s.grad,
            evaluations: evals,
            strong_wolfe: strong,
        })
    };

    let mut prev = Sample {
        alpha: 0.0,
        phi: f0,
        dphi: dphi0,
        eval: Evaluation::plain(f0),
        grad: g0.to_vec(),
    };
    let mut alpha = alpha_init;
    let (mut lo, mut hi);
    loop {
        let cur = probe(alpha)?;
        evals += 1;
        if !armijo(&cur) || (evals > 1 && cur.phi >= prev.phi) {
            lo = prev;
            hi = cur;
            break;
        }
        if curvature(&cur) {
            return Ok(done(cur, evals, true));
        }
        if cur.dphi >= 0.0 {
            lo = cur;
            hi = prev;
            break;
        }
        if evals >= MAX_EVALS {
            return Ok(done(cur, evals, false));
        }
        alpha *= 2.0;
        prev = cur;
    }

    // Zoom: `lo` satisfies sufficient decrease and has the lowest value seen.
    while evals < MAX_EVALS {
        let (a, b) = (lo.alpha, hi.alpha);
        let width = (b - a).abs();
        if width <= 1e-16 * a.abs().max(b.abs()).max(1e-300) {
            break;
        }
        let mut trial = cubic_min(&lo, &hi).unwrap_or(0.5 * (a + b));
        let (left, right) = (a.min(b), a.max(b));
        trial = trial.clamp(left + 0.1 * width, right - 0.1 * width);
        let cur = probe(trial)?;
        evals += 1;
        if !armijo(&cur) || cur.phi >= lo.phi {
            hi = cur;
        } else {
            if curvature(&cur) {
                return Ok(done(cur, evals, true));
            }
            if cur.dphi * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = cur;
        }
    }
    Ok(if lo.alpha > 0.0 { done(lo, evals, false) } else { None })
}

/// Minimizer of the cubic interpolating values and slopes at two points.
fn cubic_min(a: &Sample, b: &Sample) -> Option<f64> {
    if !(a.phi.is_finite() && b.phi.is_finite() && a.dphi.is_finite() && b.dphi.is_finite()) {
        return None;
    }
    let d1 = a.dphi + b.dphi - 3.0 * (a.phi - b.phi) / (a.alpha - b.alpha);
    let disc = d1 * d1 - a.dphi * b.dphi;
    if disc < 0.0 {
        return None;
    }
    let d2 = (b.alpha - a.alpha).signum() * disc.sqrt();
    let t = b.alpha - (b.alpha - a.alpha) * (b.dphi + d2 - d1) / (b.dphi - a.dphi + 2.0 * d2);
    t.is_finite().then_some(t)
}
