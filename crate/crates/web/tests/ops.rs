use gotd_web::{compare_optimizers, goal_cp, sthosvd_sweep};
use serde_json::Value;

#[test]
fn goal_cp_reduces_qoi_errors() {
    let v: Value = serde_json::from_str(&goal_cp(r#"{"iters": 6}"#).unwrap()).unwrap();
    let qois = v["qois"].as_array().unwrap();
    assert_eq!(qois.len(), 2);
    for q in qois {
        assert_eq!(q["data"].as_array().unwrap().len(), 12);
        assert!(q["relative_error_final"].as_f64().unwrap() < q["relative_error_initial"].as_f64().unwrap());
    }
    let f: Vec<f64> = v["f_go"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert!((f[0] - 1.0).abs() < 1e-12);
    assert!(f.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn sweep_respects_tolerance_and_compresses_more_when_loose() {
    let v: Value = serde_json::from_str(&sthosvd_sweep("{}").unwrap()).unwrap();
    let pts = v.as_array().unwrap();
    for p in pts {
        assert!(p["error"].as_f64().unwrap() <= p["tolerance"].as_f64().unwrap());
    }
    let ratios: Vec<f64> = pts.iter().map(|p| p["compression_ratio"].as_f64().unwrap()).collect();
    assert!(ratios.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn comparison_histories_are_monotone() {
    let v: Value = serde_json::from_str(&compare_optimizers(r#"{"iters": 5}"#).unwrap()).unwrap();
    for key in ["tr_newton", "lbfgs"] {
        let h: Vec<f64> = v[key].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
        assert_eq!(h.len(), 6);
        assert!(h.windows(2).all(|w| w[1] <= w[0]));
    }
}

#[test]
fn bad_parameters_are_reported() {
    assert!(goal_cp("not json").is_err());
    assert!(goal_cp(r#"{"dims": [4, 2]}"#).is_err());
    assert!(sthosvd_sweep(r#"{"tolerances": [2.0]}"#).is_err());
}
