use serde_json::Value;
use weaver_demo::{aso_compare, forgetting_demo, merge_coefficients};

#[test]
fn coefficients_share_weight_by_size() {
    let v: Value = serde_json::from_str(&merge_coefficients("4725, 3230 3043").unwrap()).unwrap();
    let last: Vec<f64> = v["share"][2].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    let total = 4725.0 + 3230.0 + 3043.0;
    for (s, n) in last.iter().zip([4725.0, 3230.0, 3043.0]) {
        assert!((s - n / total).abs() < 1e-12);
    }
    assert!((v["new_model"][1].as_f64().unwrap() - 3230.0 / 7955.0).abs() < 1e-15);
    assert!(merge_coefficients("3, 0").is_err());
    assert!(merge_coefficients("three").is_err());
}

#[test]
fn aso_of_disjoint_samples() {
    let v: Value = serde_json::from_str(&aso_compare("5 6 7 8", "1,2,3,4", 1).unwrap()).unwrap();
    assert_eq!(v["eps_min"].as_f64().unwrap(), 0.0);
    assert_eq!(v["dominant"], Value::Bool(true));
    assert_eq!(v["t"].as_array().unwrap().len(), 101);
    assert!(aso_compare("", "1", 0).is_err());
}

#[test]
fn forgetting_demo_reports_both_strategies() {
    let v: Value = serde_json::from_str(&forgetting_demo(40, 0.3, 2).unwrap()).unwrap();
    let runs = v.as_array().unwrap();
    assert_eq!(runs.len(), 2);
    assert_eq!(runs[0]["strategy"], "finetune");
    assert_eq!(runs[1]["strategy"], "weaver");
    for run in runs {
        assert_eq!(run["forgetting_curve"].as_array().unwrap().len(), 4);
    }
    assert!(forgetting_demo(5, 0.3, 0).is_err());
}
