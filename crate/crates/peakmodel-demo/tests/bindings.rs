use peakmodel_demo::{dispersion_value, omega_value, weyl_curve_value};

const CONFIG: &str = include_str!("../../peakmodel/configs/interlacing.json");
const LAPLACE: &str = include_str!("../../peakmodel/configs/laplacian.json");

fn entry(v: &serde_json::Value) -> (f64, f64) {
    (v[0].as_f64().unwrap(), v[1].as_f64().unwrap())
}

#[test]
fn weyl_curve_is_nevanlinna_above_the_axis() {
    let v = weyl_curve_value(CONFIG, "peak", -3.0, 6.0, 25, 0.4).unwrap();
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 25);
    for r in rows {
        assert!(r["skipped"].is_null());
        assert!(r["im_min"].as_f64().unwrap() > -1e-10);
    }
}

#[test]
fn weyl_curve_marks_spectral_points() {
    let v = weyl_curve_value(CONFIG, "classical", -2.0, 2.0, 3, 0.0).unwrap();
    assert!(v["rows"].as_array().unwrap().iter().all(|r| r["skipped"] == "SPECTRAL_COLLISION"));
}

#[test]
fn dispersion_has_a_near_zero() {
    let v = dispersion_value(CONFIG, "classical", -1.9, 3.9, 400).unwrap();
    let mins: Vec<f64> = v["rows"].as_array().unwrap().iter().filter_map(|r| r["sigma_min"].as_f64()).collect();
    assert!(mins.len() > 300);
    let lo = mins.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = mins.iter().cloned().fold(0.0, f64::max);
    assert!(lo < 1e-2 * hi, "{lo} {hi}");
}

#[test]
fn zero_strength_omega_matches_peak() {
    let v = omega_value(CONFIG, 3, 0.0, -1.0, 1.0, 5, 0.5).unwrap();
    for r in v["rows"].as_array().unwrap() {
        let (a, b) = (entry(&r["M_peak"][0][0]), entry(&r["M_omega"][0][0]));
        assert!((a.0 - b.0).hypot(a.1 - b.1) < 1e-10);
        assert!(r["delta_norm"].as_f64().unwrap() < 1e-10);
    }
    let v = omega_value(CONFIG, 3, 0.5, -1.0, 1.0, 5, 0.5).unwrap();
    assert!(v["iota_min_eigenvalue"].as_f64().unwrap() > 0.0);
    assert!(v["rows"].as_array().unwrap().iter().any(|r| r["delta_norm"].as_f64().unwrap() > 1e-6));
}

#[test]
fn errors_carry_codes() {
    assert_eq!(weyl_curve_value(LAPLACE, "peak", 0.0, 1.0, 3, 0.5).unwrap_err().code, "NON_HERMITIAN");
    assert_eq!(weyl_curve_value("{}", "peak", 0.0, 1.0, 3, 0.5).unwrap_err().code, "SCHEMA");
    assert_eq!(weyl_curve_value(CONFIG, "nope", 0.0, 1.0, 3, 0.5).unwrap_err().code, "USAGE");
    assert_eq!(omega_value(CONFIG, 1, 1.5, 0.0, 1.0, 3, 0.5).unwrap_err().code, "USAGE");
}
