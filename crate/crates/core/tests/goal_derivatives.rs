mod common;

use common::*;
use gotd::goal::Preconditioner;

#[test]
fn gradient_matches_central_differences() {
    let x = small_data();
    for model in ["cp", "tucker"] {
        let (p, v0) = goal_problem(&x, model);
        for k in 0..5 {
            let v = random_point(&v0, 100 + k);
            let g = p.gradient(&v).unwrap();
            let fd = fd_gradient(&p, &v, 1e-6);
            let e = rel_err(&g, &fd);
            assert!(e <= 1e-6, "{model} point {k}: {e:e}");
        }
    }
}

#[test]
fn gauss_newton_product_matches_explicit_jacobian() {
    let x = small_data();
    for model in ["cp", "tucker"] {
        let (p, v0) = goal_problem(&x, model);
        let v = random_point(&v0, 5);
        let jac = fd_jacobian(&p, &v, 1e-6);
        for k in 0..10 {
            let w = gaussian(v.len(), 200 + k);
            let hv = p.gn_hess_vec(&v, &w).unwrap();
            let e = rel_err(&hv, &gn_oracle(&jac, &w));
            assert!(e <= 1e-5, "{model} w{k}: {e:e}");
            assert!(dot(&w, &hv) >= 0.0);
        }
    }
}

#[test]
fn gauss_newton_operator_is_symmetric() {
    let x = small_data();
    for model in ["cp", "tucker"] {
        let (p, v0) = goal_problem(&x, model);
        let v = random_point(&v0, 9);
        for k in 0..5 {
            let (u, w) = (gaussian(v.len(), 300 + k), gaussian(v.len(), 400 + k));
            let a = dot(&u, &p.gn_hess_vec(&v, &w).unwrap());
            let b = dot(&w, &p.gn_hess_vec(&v, &u).unwrap());
            assert!((a - b).abs() <= 1e-10 * a.abs().max(b.abs()), "{model}: {a} vs {b}");
        }
    }
}

#[test]
fn tucker_preconditioner_diagonal_matches_differences() {
    let x = small_data();
    let (p, v0) = goal_problem(&x, "tucker");
    let v = random_point(&v0, 3);
    let Preconditioner::Diagonal(diag) = Preconditioner::build(p.shape(), &v).unwrap() else {
        panic!("Tucker should use a diagonal preconditioner");
    };
    let h = 1e-6;
    let mut w = v.clone();
    for i in (0..v.len()).step_by(7) {
        w[i] = v[i] + h;
        let mp = p.shape().reconstruct(&w).unwrap();
        w[i] = v[i] - h;
        let mm = p.shape().reconstruct(&w).unwrap();
        w[i] = v[i];
        let col_sq: f64 = mp.as_slice().iter().zip(mm.as_slice()).map(|(a, b)| ((a - b) / (2.0 * h)).powi(2)).sum();
        let expect = col_sq.max(gotd::goal::DIAG_FLOOR);
        assert!((diag[i] - expect).abs() <= 1e-6 * expect.max(1e-8), "entry {i}: {} vs {expect}", diag[i]);
    }
}

#[test]
fn weights_normalize_initial_objective() {
    let x = small_data();
    for model in ["cp", "tucker"] {
        let (p, v0) = goal_problem(&x, model);
        let f = p.objective(&v0).unwrap();
        assert!((f - 1.0).abs() <= 1e-12, "{model}: {f}");
    }
}
