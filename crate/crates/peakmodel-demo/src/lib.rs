//! Browser bindings: a Weyl function curve, a dispersion scan and an ι deformation
//! comparison, each driven by a run config in JSON.

use peakmodel::config::{Built, ConfigError, RunConfig};
use peakmodel::extensions::{dispersion_scan, BBranchTriple, ClassicalTriple, PeakTriple, Triple};
use peakmodel::linalg::hermitian_eigen;
use peakmodel::omega::{IotaDeformation, IotaSpec, OmegaTriple};
use peakmodel::{CMat, Error, C64};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Error with a stable code, rendered as `{"code", "message"}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub code: &'static str,
    pub message: String,
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure { code: e.code(), message: e.to_string() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure { code: e.code(), message: e.to_string() }
    }
}

impl Failure {
    fn usage(msg: impl Into<String>) -> Self {
        Failure { code: "USAGE", message: msg.into() }
    }

    pub fn to_json(&self) -> String {
        json!({"code": self.code, "message": self.message}).to_string()
    }
}

fn build(config: &str) -> Result<Built, Failure> {
    Ok(RunConfig::from_json(config)?.build()?)
}

fn grid(re0: f64, re1: f64, n: usize, im: f64) -> Result<Vec<C64>, Failure> {
    if n == 0 || n > 4000 || !re0.is_finite() || !re1.is_finite() || !im.is_finite() {
        return Err(Failure::usage("grid needs finite bounds and 1 to 4000 points"));
    }
    let step = if n > 1 { (re1 - re0) / (n - 1) as f64 } else { 0.0 };
    Ok((0..n).map(|k| C64::new(re0 + step * k as f64, im)).collect())
}

fn triple(b: &Built, branch: &str) -> Result<Box<dyn Triple>, Failure> {
    let sp = &b.space;
    let needs_hermitian = matches!(branch, "peak" | "omega");
    if needs_hermitian && !sp.is_hermitian() {
        return Err(Error::NonHermitian("this branch").into());
    }
    Ok(match branch {
        "classical" => Box::new(ClassicalTriple { setup: sp.setup.clone() }),
        "peak" => Box::new(PeakTriple { space: sp.clone() }),
        "b" => Box::new(BBranchTriple::new(sp.clone())?),
        "omega" => {
            let spec = b.iota.clone().unwrap_or(IotaSpec::Identity);
            Box::new(OmegaTriple { iota: IotaDeformation::new(sp.clone(), &spec)? })
        }
        other => return Err(Failure::usage(format!("unknown branch {other}"))),
    })
}

fn pair(z: C64) -> Value {
    json!([z.re, z.im])
}

fn matrix(a: &CMat) -> Value {
    Value::Array((0..a.nrows()).map(|i| Value::Array((0..a.ncols()).map(|j| pair(a[(i, j)])).collect())).collect())
}

/// Smallest eigenvalue of `Im M`.
fn im_min(m: &CMat) -> f64 {
    hermitian_eigen(&((m - m.adjoint()) / C64::new(0.0, 2.0))).0[0]
}

/// `M(x + i im)` along a horizontal line. Points that fail carry their error code.
pub fn weyl_curve_value(config: &str, branch: &str, re0: f64, re1: f64, n: usize, im: f64) -> Result<Value, Failure> {
    let b = build(config)?;
    let h = triple(&b, branch)?;
    let rows: Vec<Value> = grid(re0, re1, n, im)?
        .into_iter()
        .map(|z| match h.weyl(z) {
            Ok(m) => json!({"z": pair(z), "M": matrix(&m), "im_min": im_min(&m), "skipped": null}),
            Err(e) => json!({"z": pair(z), "M": null, "im_min": null, "skipped": e.code()}),
        })
        .collect();
    Ok(json!({"branch": branch, "d": b.space.d(), "hermitian": b.space.is_hermitian(), "rows": rows}))
}

/// Smallest singular value of the boundary condition along the real axis. Its zeros
/// are eigenvalues of the extension fixed by the config's theta (zero domain if absent).
pub fn dispersion_value(config: &str, branch: &str, re0: f64, re1: f64, n: usize) -> Result<Value, Failure> {
    let b = build(config)?;
    let h = triple(&b, branch)?;
    let pts = dispersion_scan(h.as_ref(), &b.theta_or_zero(), &grid(re0, re1, n, 0.0)?);
    let rows: Vec<Value> = pts
        .iter()
        .map(|p| json!({"x": p.z.re, "sigma_min": p.sigma_min, "skipped": p.skipped}))
        .collect();
    Ok(json!({"branch": branch, "rows": rows}))
}

/// Peak Weyl function against its ι-deformed counterpart for a random positive ι
/// of the given strength.
pub fn omega_value(config: &str, seed: u64, strength: f64, re0: f64, re1: f64, n: usize, im: f64) -> Result<Value, Failure> {
    let b = build(config)?;
    if !b.space.is_hermitian() {
        return Err(Error::NonHermitian("the omega deformation").into());
    }
    if !(0.0..1.0).contains(&strength) {
        return Err(Failure::usage("strength must lie in [0, 1)"));
    }
    let iota = IotaDeformation::new(b.space.clone(), &IotaSpec::Random { seed, strength })?;
    let rows: Vec<Value> = grid(re0, re1, n, im)?
        .into_iter()
        .map(|z| match iota.m_omega(z) {
            Ok(w) => json!({
                "z": pair(z),
                "M_peak": matrix(&w.m_peak),
                "M_omega": matrix(&w.m),
                "delta_norm": w.delta.norm(),
                "skipped": null,
            }),
            Err(e) => json!({"z": pair(z), "M_peak": null, "M_omega": null, "delta_norm": null, "skipped": e.code()}),
        })
        .collect();
    Ok(json!({"iota_min_eigenvalue": iota.min_eigenvalue, "rows": rows}))
}

fn js(r: Result<Value, Failure>) -> Result<String, JsValue> {
    r.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e.to_json()))
}

#[wasm_bindgen]
pub fn weyl_curve(config: &str, branch: &str, re0: f64, re1: f64, n: usize, im: f64) -> Result<String, JsValue> {
    js(weyl_curve_value(config, branch, re0, re1, n, im))
}

#[wasm_bindgen]
pub fn dispersion(config: &str, branch: &str, re0: f64, re1: f64, n: usize) -> Result<String, JsValue> {
    js(dispersion_value(config, branch, re0, re1, n))
}

#[wasm_bindgen]
pub fn omega_deformation(config: &str, seed: u32, strength: f64, re0: f64, re1: f64, n: usize, im: f64) -> Result<String, JsValue> {
    js(omega_value(config, seed as u64, strength, re0, re1, n, im))
}
