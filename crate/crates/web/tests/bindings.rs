use dos_lab_web::{cdf_curve_json, solve_json, sweep_json, CdfCurve, WebParams};

#[test]
fn solve_defaults_and_overrides() {
    let v: serde_json::Value = serde_json::from_str(&solve_json("").unwrap()).unwrap();
    assert_eq!(v["strategy"], "A");
    let v: serde_json::Value = serde_json::from_str(&solve_json(r#"{"alpha": 50}"#).unwrap()).unwrap();
    assert_eq!(v["strategy"], "B");
    assert!(solve_json(r#"{"tau": 2}"#).unwrap_err().contains("tau"));
    assert!(solve_json(r#"{"bogus": 1}"#).is_err());
    assert!(solve_json(r#"{"sigma_m": 0.9}"#).is_err());
}

#[test]
fn sweep_rows_in_grid_order() {
    let rows: Vec<serde_json::Value> = serde_json::from_str(&sweep_json("{}", 0.1, 10.0, 5).unwrap()).unwrap();
    assert_eq!(rows.len(), 5);
    let alphas: Vec<f64> = rows.iter().map(|r| r["alpha"].as_f64().unwrap()).collect();
    assert!(alphas.windows(2).all(|w| w[0] < w[1]));
    for r in &rows {
        assert!(r["Gamma_two"].as_f64().unwrap() >= r["Gamma_one"].as_f64().unwrap());
    }
    assert!(sweep_json("{}", 0.0, 1.0, 5).is_err());
}

#[test]
fn cdf_curve_shape() {
    let c: CdfCurve = serde_json::from_str(&cdf_curve_json(r#"{"alpha": 0.5}"#, 1.0, 101).unwrap()).unwrap();
    assert_eq!(c.conditional.len(), 101);
    assert_eq!(c.conditional[0][1], 0.0);
    assert!(c.conditional.windows(2).all(|w| w[1][1] >= w[0][1] - 1e-12));
    assert!(c.conditional.last().unwrap()[1] > 0.999);
    let p = WebParams::parse(r#"{"alpha": 0.5}"#).unwrap().scenario().unwrap();
    assert!((c.mean - (p.derived.c_r * p.derived.mean_r1 + p.derived.r_e)).abs() < 1e-12);
}
