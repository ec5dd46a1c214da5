//! The ι-deformation of the peak model: `H_z`, `M_Ω = M + Δ^Ω` and the
//! Weyl-preservation test.

use serde::{Deserialize, Serialize};

use crate::extensions::{krein_coefficient, LinearRelationFD, Triple};
use crate::linalg::{hermitian_eigen, hermitian_fn, symmetrize};
use crate::peak::{ExtendedVector, PeakSpace, PeakVector};
use crate::samples::Rng;
use crate::{CMat, CVec, Error, Result, C64};

/// How to build ι.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IotaSpec {
    Identity,
    /// `ι = B B^[*]` with `B = I + strength X / |X|`, `X` random.
    Random { seed: u64, strength: f64 },
    /// `ι = I + Q T Q`, `Q` the ℋ-projector onto the complement of the given
    /// flattened PeakVectors.
    Fixing { vectors: Vec<Vec<C64>>, seed: u64 },
    /// Fixing mode applied to `F_sigma(z)` for every sigma.
    FixingDeficiency { z: C64, seed: u64 },
}

/// ι together with the peak space it deforms.
#[derive(Debug, Clone)]
pub struct IotaDeformation {
    pub space: PeakSpace,
    pub iota: CMat,
    /// Ω = ι^{1/2}
    pub omega: CMat,
    pub omega_inv: CMat,
    /// Smallest eigenvalue of ι (ι is ℋ-self-adjoint, so it is real).
    pub min_eigenvalue: f64,
    w: CMat,
    w_inv: CMat,
    /// Eigenvalues of ιA_0 when they are real, else `None`.
    iota_a0_spectrum: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct OmegaWeyl {
    pub m: CMat,
    pub m_peak: CMat,
    pub delta: CMat,
}

/// `A^[*] = W^{-1} A^* W`.
fn h_adjoint(a: &CMat, w: &CMat, w_inv: &CMat) -> CMat {
    w_inv * a.adjoint() * w
}

impl IotaDeformation {
    pub fn new(space: PeakSpace, spec: &IotaSpec) -> Result<Self> {
        let dim = space.n() + space.md();
        let w = space.metric();
        let w_inv = w.clone().try_inverse().ok_or(Error::NotPositive(0.0))?;
        let iota = match spec {
            IotaSpec::Identity => CMat::identity(dim, dim),
            IotaSpec::Random { seed, strength } => random_positive(&mut Rng::new(*seed), *strength, &w, &w_inv),
            IotaSpec::Fixing { vectors, seed } => {
                let vs: Vec<CVec> = vectors.iter().map(|v| CVec::from_column_slice(v)).collect();
                if vs.iter().any(|v| v.len() != dim) {
                    return Err(Error::DimensionMismatch { expected: dim, got: vs.iter().map(|v| v.len()).find(|&l| l != dim).unwrap() });
                }
                fixing(&vs, *seed, &w, &w_inv)?
            }
            IotaSpec::FixingDeficiency { z, seed } => {
                let vs = (0..space.d())
                    .map(|s| Ok(space.gamma(*z, &unit(space.d(), s))?.to_flat()))
                    .collect::<Result<Vec<_>>>()?;
                fixing(&vs, *seed, &w, &w_inv)?
            }
        };
        Self::from_matrix(space, iota)
    }

    pub fn from_matrix(space: PeakSpace, iota: CMat) -> Result<Self> {
        let w = space.metric();
        let (s, s_inv) = space.metric_sqrt();
        let w_inv = &s_inv * &s_inv;
        // S ι S^{-1} is Hermitian exactly when ι is ℋ-self-adjoint
        let h = &s * &iota * &s_inv;
        let (vals, _) = hermitian_eigen(&h);
        let min_eigenvalue = vals.first().copied().unwrap_or(1.0);
        if min_eigenvalue <= 1e-8 {
            return Err(Error::NotPositive(min_eigenvalue));
        }
        let omega = &s_inv * hermitian_fn(&h, f64::sqrt) * &s;
        let omega_inv = &s_inv * hermitian_fn(&h, |x| 1.0 / x.sqrt()) * &s;
        let iota_a0_spectrum = space.is_hermitian().then(|| {
            let a = &s * &omega * space.a0_matrix() * &omega * &s_inv;
            hermitian_eigen(&symmetrize(&a)).0
        });
        Ok(Self { space, iota, omega, omega_inv, min_eigenvalue, w, w_inv, iota_a0_spectrum })
    }

    pub fn dim(&self) -> usize {
        self.iota.nrows()
    }

    /// `max |<ιu, v> - <u, ιv>|` relative, through `W ι - (W ι)^*`.
    pub fn self_adjoint_defect(&self) -> f64 {
        let wi = &self.w * &self.iota;
        (&wi - wi.adjoint()).norm() / wi.norm()
    }

    pub fn iota_a0(&self) -> CMat {
        &self.iota * self.space.a0_matrix()
    }

    pub fn iota_a0_spectrum(&self) -> Option<&[f64]> {
        self.iota_a0_spectrum.as_deref()
    }

    /// `z ∈ Σ_ι = res A_0 ∩ res(ι A_0)`.
    pub fn check_sigma(&self, z: C64) -> Result<()> {
        if !self.space.is_hermitian() {
            return Err(Error::NonHermitian("the ι-deformation"));
        }
        self.space.check_res_a0(z).map_err(|_| Error::NotInSigmaIota(z))?;
        let tol = self.space.setup.model.tol();
        let spec = self.iota_a0_spectrum.as_deref().unwrap_or(&[]);
        if spec.iter().any(|&mu| (C64::new(mu, 0.0) - z).norm() <= tol) {
            return Err(Error::NotInSigmaIota(z));
        }
        Ok(())
    }

    fn shifted_solve(&self, z: C64, rhs: &CVec) -> Result<CVec> {
        let dim = self.dim();
        let a = self.iota_a0() - CMat::identity(dim, dim) * z;
        a.lu().solve(rhs).ok_or(Error::NotInSigmaIota(z))
    }

    /// `w = z (ι A_0 - z)^{-1} (I - ι) F_z(c)`, the `dom A_0` correction in `H_z`.
    fn correction(&self, z: C64, c: &CVec) -> Result<(PeakVector, PeakVector)> {
        self.check_sigma(z)?;
        let f = self.space.gamma(z, c)?;
        let ff = f.to_flat();
        let w = self.shifted_solve(z, &((&ff - &self.iota * &ff) * z))?;
        Ok((f, PeakVector::from_flat(self.space.n(), &w)))
    }

    /// `H_z(c) = [I + z (ι A_0 - z)^{-1} (I - ι)] F_z(c)`.
    pub fn h_z(&self, z: C64, c: &CVec) -> Result<PeakVector> {
        let (f, w) = self.correction(z, c)?;
        Ok(f.add(&w))
    }

    /// Explicit `dom A_max` coordinates of `H_z(c)`.
    pub fn h_z_ev(&self, z: C64, c: &CVec) -> Result<ExtendedVector> {
        let (_, w) = self.correction(z, c)?;
        Ok(self.space.gamma_ev(z, c)?.add(&self.space.dom_a0(&w, z)))
    }

    /// `|ι A_max H - z H|_ℋ / |H|_ℋ` for `H = H_z(c)`.
    pub fn eigen_residual(&self, z: C64, c: &CVec) -> Result<f64> {
        let ev = self.h_z_ev(z, c)?;
        let h = self.space.embed(&ev)?;
        let a = self.space.amax_apply(&ev)?.to_flat();
        let r = PeakVector::from_flat(self.space.n(), &(&self.iota * a - h.to_flat() * z));
        Ok(self.space.norm(&r) / self.space.norm(&h).max(f64::MIN_POSITIVE))
    }

    /// `M_Ω(z) = Γ~_1 H_z`, split as `M_Γ~(z) + Δ^Ω(z)`.
    pub fn m_omega(&self, z: C64) -> Result<OmegaWeyl> {
        let d = self.space.d();
        let m_peak = self.space.weyl(z)?.m;
        let mut delta = CMat::zeros(d, d);
        for s in 0..d {
            let (_, w) = self.correction(z, &unit(d, s))?;
            let (_, g1) = self.space.boundary_gamma(&self.space.dom_a0(&w, z))?;
            delta.set_column(s, &g1);
        }
        Ok(OmegaWeyl { m: &m_peak + &delta, m_peak, delta })
    }

    /// True when `z = 0` or ι fixes every `F_sigma(z)`.
    pub fn weyl_preserved(&self, z: C64) -> Result<bool> {
        self.check_sigma(z)?;
        if z.norm() <= self.space.setup.model.tol() {
            return Ok(true);
        }
        for s in 0..self.space.d() {
            let f = self.space.gamma(z, &unit(self.space.d(), s))?;
            let ff = f.to_flat();
            let r = PeakVector::from_flat(self.space.n(), &(&self.iota * &ff - &ff));
            if self.space.norm(&r) > 1e-9 * self.space.norm(&f) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// `|Ω^[*] - Ω|` relative.
    pub fn omega_self_adjoint_defect(&self) -> f64 {
        (h_adjoint(&self.omega, &self.w, &self.w_inv) - &self.omega).norm() / self.omega.norm()
    }
}

fn unit(d: usize, s: usize) -> CVec {
    CVec::from_fn(d, |t, _| C64::new(if t == s { 1.0 } else { 0.0 }, 0.0))
}

fn random_positive(rng: &mut Rng, strength: f64, w: &CMat, w_inv: &CMat) -> CMat {
    let dim = w.nrows();
    let x = rng.cmat(dim, dim);
    let b = CMat::identity(dim, dim) + &x * C64::new(strength / x.norm(), 0.0);
    &b * h_adjoint(&b, w, w_inv)
}

fn fixing(vs: &[CVec], seed: u64, w: &CMat, w_inv: &CMat) -> Result<CMat> {
    let dim = w.nrows();
    let t = random_positive(&mut Rng::new(seed), 0.5, w, w_inv);
    if vs.is_empty() {
        return Ok(CMat::identity(dim, dim) + t);
    }
    // orthonormal basis of S span(vs), S = W^{1/2}, so dependent vectors are fine
    let s = hermitian_fn(w, f64::sqrt);
    let s_inv = hermitian_fn(w, |x| 1.0 / x.sqrt());
    let svd = (&s * CMat::from_columns(vs)).svd(true, false);
    let u = svd.u.ok_or(Error::NotPositive(0.0))?;
    let top = svd.singular_values.max();
    let keep: Vec<usize> = (0..svd.singular_values.len()).filter(|&k| svd.singular_values[k] > 1e-10 * top).collect();
    let u = u.select_columns(&keep);
    let q = CMat::identity(dim, dim) - &s_inv * &u * u.adjoint() * &s;
    Ok(CMat::identity(dim, dim) + &q * t * &q)
}

/// The Ω-transformed triple: distinguished resolvent
/// `ι^{-1/2} (ι A_0 - z)^{-1} ι^{1/2}`, `γ = Ω^{-1} H_z`, `M = M_Ω`.
#[derive(Debug, Clone)]
pub struct OmegaTriple {
    pub iota: IotaDeformation,
}

impl OmegaTriple {
    /// Explicit coordinates of `Ω y` for the Krein output `y`.
    pub fn resolvent_ev(&self, theta: &LinearRelationFD, z: C64, v: &CVec) -> Result<ExtendedVector> {
        let io = &self.iota;
        let c = krein_coefficient(self, theta, z, v)?;
        let w0 = PeakVector::from_flat(io.space.n(), &io.shifted_solve(z, &(&io.omega * v))?);
        Ok(io.h_z_ev(z, &c)?.add(&io.space.dom_a0(&w0, z)))
    }

    /// Relative residuals of `ι A_max w - z w = Ω v` and `Γ~ w ∈ Θ`.
    pub fn graph_residuals(&self, theta: &LinearRelationFD, z: C64, v: &CVec) -> Result<(f64, f64)> {
        let io = &self.iota;
        let sp = &io.space;
        let ev = self.resolvent_ev(theta, z, v)?;
        let w = sp.embed(&ev)?.to_flat();
        let lhs = &io.iota * sp.amax_apply(&ev)?.to_flat() - &w * z;
        let rhs = &io.omega * v;
        let n = sp.n();
        let r = sp.norm(&PeakVector::from_flat(n, &(&lhs - &rhs))) / sp.norm(&PeakVector::from_flat(n, &rhs));
        let (g0, g1) = sp.boundary_gamma(&ev)?;
        Ok((theta.membership_residual(&g0, &g1), r))
    }
}

impl Triple for OmegaTriple {
    fn tag(&self) -> &'static str {
        "omega"
    }
    fn d(&self) -> usize {
        self.iota.space.d()
    }
    fn dim(&self) -> usize {
        self.iota.dim()
    }
    fn inner(&self, u: &CVec, v: &CVec) -> C64 {
        (u.adjoint() * &self.iota.w * v)[(0, 0)]
    }
    fn r0(&self, z: C64, v: &CVec) -> Result<CVec> {
        self.iota.check_sigma(z)?;
        Ok(&self.iota.omega_inv * self.iota.shifted_solve(z, &(&self.iota.omega * v))?)
    }
    fn gamma(&self, z: C64, c: &CVec) -> Result<CVec> {
        Ok(&self.iota.omega_inv * self.iota.h_z(z, c)?.to_flat())
    }
    fn gamma_adj(&self, z: C64, v: &CVec) -> Result<CVec> {
        let d = self.d();
        let mut out = CVec::zeros(d);
        for s in 0..d {
            out[s] = self.inner(&self.gamma(z.conj(), &unit(d, s))?, v);
        }
        Ok(out)
    }
    fn weyl(&self, z: C64) -> Result<CMat> {
        Ok(self.iota.m_omega(z)?.m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extensions::krein_resolvent;
    use crate::linalg::{rel_diff_mat, rel_diff_vec};
    use crate::samples::hermitian_setup;
    use crate::Scaling;

    fn space(seed: u64, m: usize, d: usize) -> (PeakSpace, Rng) {
        let mut rng = Rng::new(seed);
        let s = hermitian_setup(&mut rng, m, d, 2, Scaling::Canonical);
        (PeakSpace::new(s).unwrap(), rng)
    }

    #[test]
    fn identity_reduces_to_peak() {
        let (sp, _) = space(1, 2, 2);
        let io = IotaDeformation::new(sp, &IotaSpec::Identity).unwrap();
        let z = C64::new(0.4, 1.3);
        let w = io.m_omega(z).unwrap();
        assert!(rel_diff_mat(&w.m, &w.m_peak) < 1e-10);
        let c = CVec::from_element(2, C64::new(1.0, -0.5));
        assert_eq!(io.h_z(z, &c).unwrap(), io.space.gamma(z, &c).unwrap());
        assert!(io.h_z(z, &CVec::zeros(2)).unwrap().coord_norm() == 0.0);
    }

    #[test]
    fn random_iota_properties() {
        let (sp, _) = space(2, 2, 2);
        let io = IotaDeformation::new(sp, &IotaSpec::Random { seed: 7, strength: 0.5 }).unwrap();
        assert!(io.self_adjoint_defect() < 1e-11);
        assert!(io.omega_self_adjoint_defect() < 1e-10);
        assert!(rel_diff_mat(&(&io.omega * &io.omega), &io.iota) < 1e-10);
        let z = C64::new(-0.7, 0.9);
        let c = CVec::from_element(2, C64::new(0.3, 1.0));
        assert!(io.eigen_residual(z, &c).unwrap() < 1e-9);
        let w = io.m_omega(z).unwrap();
        assert!(w.delta.norm() > 1e-6);
        let wc = io.m_omega(z.conj()).unwrap();
        assert!(rel_diff_mat(&wc.m, &w.m.adjoint()) < 1e-9);
        assert!(!io.weyl_preserved(z).unwrap());
        assert!(io.weyl_preserved(C64::new(0.0, 0.0)).unwrap_or(true));
    }

    #[test]
    fn fixing_kills_delta() {
        let (sp, _) = space(3, 3, 2);
        let zs = C64::new(0.8, 1.2);
        let io = IotaDeformation::new(sp, &IotaSpec::FixingDeficiency { z: zs, seed: 3 }).unwrap();
        let w = io.m_omega(zs).unwrap();
        assert!(w.delta.norm() < 1e-10 * w.m_peak.norm());
        assert!(io.weyl_preserved(zs).unwrap());
        assert!(io.m_omega(C64::new(-1.0, 0.5)).unwrap().delta.norm() > 1e-6);
    }

    #[test]
    fn omega_krein_graph() {
        let (sp, mut rng) = space(4, 2, 1);
        let io = IotaDeformation::new(sp, &IotaSpec::Random { seed: 1, strength: 0.4 }).unwrap();
        let h = OmegaTriple { iota: io };
        let theta = LinearRelationFD::graph(CMat::from_element(1, 1, C64::new(0.7, 0.0))).unwrap();
        let z = C64::new(0.3, 0.8);
        let v = rng.cvec(h.dim());
        let (b, e) = h.graph_residuals(&theta, z, &v).unwrap();
        assert!(b < 1e-9 && e < 1e-9, "{b} {e}");
        let y = krein_resolvent(&h, &theta, z, &v).unwrap();
        let ev = h.resolvent_ev(&theta, z, &v).unwrap();
        let wv = h.iota.space.embed(&ev).unwrap().to_flat();
        assert!(rel_diff_vec(&(&h.iota.omega * y), &wv) < 1e-10);
    }
}
