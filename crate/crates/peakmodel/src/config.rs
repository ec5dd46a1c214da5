//! JSON run configuration. Complex numbers are `[re, im]` pairs and matrices
//! are lists of rows.

use serde::{Deserialize, Serialize};

use crate::extensions::LinearRelationFD;
use crate::omega::IotaSpec;
use crate::peak::PeakSpace;
use crate::samples::{laplacian_1d, laplacian_delta};
use crate::{AdmissibleMode, CMat, Error, FunctionalFamily, RegularSet, Scaling, Setup, SpectralModel, C64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub functionals: FunctionalSpec,
    pub m: usize,
    pub d: usize,
    #[serde(rename = "Z")]
    pub z: Vec<C64>,
    #[serde(default)]
    pub scaling: Scaling,
    #[serde(default)]
    pub admissible_mode: ModeSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<ThetaSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iota: Option<IotaSpec>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSpec {
    Eigenvalues { eigenvalues: Vec<f64> },
    Generator { generator: Generator, size: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Generator {
    #[serde(rename = "laplacian_1d")]
    Laplacian1d,
}

/// Functionals in the eigenbasis of `L`. A delta site is a grid site of the
/// generated Laplacian (0-based), or a coordinate for explicit eigenvalues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FunctionalSpec {
    Vectors(Vec<Vec<C64>>),
    Site { delta_site: usize },
    Sites { delta_sites: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ModeSpec {
    #[default]
    Direct,
    Renormalized { r0: Vec<Vec<C64>>, z0: C64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaSpec {
    #[serde(rename = "C")]
    pub c: Vec<Vec<C64>>,
    #[serde(rename = "D")]
    pub d: Vec<Vec<C64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Minimal distance of any evaluation point to the spectrum.
    pub spectral: Option<f64>,
    /// Bound on the graph residual reported by `resolvent`.
    pub graph: f64,
    /// Lower bound on the Nevanlinna margin reported by `weyl`.
    pub nevanlinna: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { spectral: None, graph: 1e-9, nevanlinna: -1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("{0}")]
    Schema(String),
    #[error(transparent)]
    Math(#[from] Error),
}

impl ConfigError {
    pub fn code(&self) -> &'static str {
        match self {
            ConfigError::Schema(_) => "SCHEMA",
            ConfigError::Math(e) => e.code(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            ConfigError::Schema(_) => 2,
            ConfigError::Math(_) => 3,
        }
    }
}

fn schema(msg: impl Into<String>) -> ConfigError {
    ConfigError::Schema(msg.into())
}

pub fn matrix(rows: &[Vec<C64>], what: &str) -> Result<CMat, ConfigError> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
        return Err(schema(format!("{what}: expected a non-empty rectangular list of rows")));
    }
    Ok(CMat::from_fn(r, c, |i, j| rows[i][j]))
}

/// Everything a command needs, built from a validated config.
#[derive(Debug, Clone)]
pub struct Built {
    pub space: PeakSpace,
    pub theta: Option<LinearRelationFD>,
    pub iota: Option<IotaSpec>,
    pub tolerances: Tolerances,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| schema(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    fn eigenvalues(&self) -> Vec<f64> {
        match &self.model {
            ModelSpec::Eigenvalues { eigenvalues } => eigenvalues.clone(),
            ModelSpec::Generator { size, .. } => laplacian_1d(*size),
        }
    }

    fn phi(&self, n: usize) -> Result<CMat, ConfigError> {
        let delta = |site: usize| -> Result<Vec<C64>, ConfigError> {
            if site >= n {
                return Err(schema(format!("delta site {site} out of range for N={n}")));
            }
            Ok(match self.model {
                ModelSpec::Generator { .. } => laplacian_delta(n, site).iter().copied().collect(),
                ModelSpec::Eigenvalues { .. } => {
                    (0..n).map(|i| C64::new(if i == site { 1.0 } else { 0.0 }, 0.0)).collect()
                }
            })
        };
        let cols: Vec<Vec<C64>> = match &self.functionals {
            FunctionalSpec::Vectors(v) => v.clone(),
            FunctionalSpec::Site { delta_site } => vec![delta(*delta_site)?],
            FunctionalSpec::Sites { delta_sites } => delta_sites.iter().map(|&s| delta(s)).collect::<Result<_, _>>()?,
        };
        if cols.len() != self.d {
            return Err(schema(format!("d = {} but {} functionals were given", self.d, cols.len())));
        }
        if let Some(bad) = cols.iter().find(|c| c.len() != n) {
            return Err(schema(format!("functional has length {}, expected N = {n}", bad.len())));
        }
        Ok(CMat::from_fn(n, self.d, |i, s| cols[s][i]))
    }

    pub fn build(&self) -> Result<Built, ConfigError> {
        if self.z.len() != self.m {
            return Err(schema(format!("m = {} but Z has {} points", self.m, self.z.len())));
        }
        if let ModelSpec::Generator { size: 0, .. } = self.model {
            return Err(schema("generator size must be positive"));
        }
        let eigs = self.eigenvalues();
        let n = eigs.len();
        let phi = self.phi(n)?;
        let model = SpectralModel::new(eigs, self.m, self.tolerances.spectral)?;
        let zs = RegularSet::new(&model, self.z.clone())?;
        let fam = FunctionalFamily::new(phi, &model)?;
        let mode = match &self.admissible_mode {
            ModeSpec::Direct => AdmissibleMode::Direct,
            ModeSpec::Renormalized { r0, z0 } => {
                let r0 = matrix(r0, "admissible_mode.renormalized.r0")?;
                if r0.shape() != (self.d, self.d) {
                    return Err(schema(format!("r0 must be {0}x{0}", self.d)));
                }
                AdmissibleMode::Renormalized { r0, z0: *z0 }
            }
        };
        let setup = Setup::new(model, zs, fam, self.scaling, mode)?;
        let space = PeakSpace::new(setup)?;
        let theta = match &self.theta {
            None => None,
            Some(t) => {
                let (c, d) = (matrix(&t.c, "theta.C")?, matrix(&t.d, "theta.D")?);
                if c.nrows() != self.d || d.nrows() != self.d || c.ncols() != d.ncols() {
                    return Err(schema(format!("theta.C and theta.D must both be {} x k", self.d)));
                }
                Some(LinearRelationFD::new(c, d)?)
            }
        };
        Ok(Built { space, theta, iota: self.iota.clone(), tolerances: self.tolerances })
    }
}

impl Built {
    pub fn theta_or_zero(&self) -> LinearRelationFD {
        self.theta.clone().unwrap_or_else(|| LinearRelationFD::zero_domain(self.space.d()))
    }
}
