#![allow(dead_code)]

use gotd::decomp::{cp_als, sthosvd, AlsConfig, SthosvdConfig};
use gotd::goal::{GoalProblem, ModelShape, ScalingInfo};
use gotd::pipeline::{synth_generate, SynthSpec};
use gotd::qoi::{KineticEnergy, QoiDefinition, VariableSum};
use gotd::{DenseTensor, Model};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::sync::Arc;

pub fn small_data() -> DenseTensor {
    synth_generate(&SynthSpec {
        dims: vec![6, 5, 4, 7],
        rank: 4,
        noise: 0.1,
        seed: 7,
    })
    .unwrap()
}

/// A linear and a nonlinear QoI on a 4-variable tensor with `tau` steps.
pub fn two_qois(tau: usize) -> Vec<QoiDefinition> {
    vec![
        QoiDefinition::all_times("sum", tau, Arc::new(VariableSum::new(vec![0, 1], 1.0).unwrap())).unwrap(),
        QoiDefinition::all_times("ke", tau, Arc::new(KineticEnergy::new(vec![0], 1, 2).unwrap())).unwrap(),
    ]
}

/// Goal problem with weights set at a classic fit, plus that fit.
pub fn goal_problem(x: &DenseTensor, model: &str) -> (GoalProblem, Vec<f64>) {
    let d = x.order();
    let scaling = ScalingInfo::compute(x, d - 2).unwrap();
    let xs = scaling.apply(x).unwrap();
    let m = match model {
        "cp" => Model::Cp(cp_als(&xs, &AlsConfig::new(3)).unwrap().model),
        _ => Model::Tucker(sthosvd(&xs, &SthosvdConfig::ranks(vec![2, 2, 2, 3])).unwrap()),
    };
    let shape = ModelShape::of(&m);
    let v0 = shape.pack(&m).unwrap();
    let tau = x.dims()[d - 1];
    let (p, choice) = GoalProblem::from_initial_guess(xs, scaling, shape, two_qois(tau), &v0).unwrap();
    assert!(choice.dropped.is_empty());
    (p, v0)
}

pub fn gaussian(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// `v0` perturbed by 10% Gaussian noise.
pub fn random_point(v0: &[f64], seed: u64) -> Vec<f64> {
    let scale = norm(v0) / (v0.len() as f64).sqrt();
    v0.iter().zip(gaussian(v0.len(), seed)).map(|(a, e)| a + 0.1 * scale * e).collect()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&diff) / norm(b).max(f64::MIN_POSITIVE)
}

pub fn fd_gradient(p: &GoalProblem, v: &[f64], h: f64) -> Vec<f64> {
    let mut w = v.to_vec();
    (0..v.len())
        .map(|i| {
            w[i] = v[i] + h;
            let fp = p.objective(&w).unwrap();
            w[i] = v[i] - h;
            let fm = p.objective(&w).unwrap();
            w[i] = v[i];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// `[√α₀ vec(X̃ − M̃); √α_q (g_q(X_t) − g_q(S(M̃_t)))]`, built from the
/// public pieces only.
pub fn stacked_residuals(p: &GoalProblem, v: &[f64]) -> Vec<f64> {
    let ms = p.shape().reconstruct(v).unwrap();
    let a = p.weights();
    let mut r: Vec<f64> = p.data().as_slice().iter().zip(ms.as_slice()).map(|(x, m)| a[0].sqrt() * (x - m)).collect();
    let x = p.scaling().unscale(p.data()).unwrap();
    let m = p.scaling().unscale(&ms).unwrap();
    for (q, def) in p.qois().iter().enumerate() {
        for &t in def.time_set() {
            r.push(a[q + 1].sqrt() * (def.evaluate(&x, t).unwrap() - def.evaluate(&m, t).unwrap()));
        }
    }
    r
}

/// Central-difference Jacobian of [`stacked_residuals`], column by column.
pub fn fd_jacobian(p: &GoalProblem, v: &[f64], h: f64) -> Vec<Vec<f64>> {
    let mut w = v.to_vec();
    (0..v.len())
        .map(|i| {
            w[i] = v[i] + h;
            let rp = stacked_residuals(p, &w);
            w[i] = v[i] - h;
            let rm = stacked_residuals(p, &w);
            w[i] = v[i];
            rp.iter().zip(&rm).map(|(a, b)| (a - b) / (2.0 * h)).collect()
        })
        .collect()
}

/// `2 Jᵀ J w` from explicit Jacobian columns.
pub fn gn_oracle(jac: &[Vec<f64>], w: &[f64]) -> Vec<f64> {
    let mut jw = vec![0.0; jac[0].len()];
    for (col, &wi) in jac.iter().zip(w) {
        for (o, c) in jw.iter_mut().zip(col) {
            *o += c * wi;
        }
    }
    jac.iter().map(|col| 2.0 * dot(col, &jw)).collect()
}
