//! The intermediate space ℋ ≅ H_m ⊕ ℂ^{md}, the operators `A_0`, `A_max`,
//! the boundary triple Γ~ and the relation branch `B`.

use crate::gram::{GramData, HermiticityReport};
use crate::linalg::{hermitian_eigen, hermitian_fn};
use crate::perturbation::{Setup, Variant};
use crate::{CMat, CVec, Error, Result, C64};

/// Element of ℋ: smooth part `f` and 𝔎-coefficients `xi`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakVector {
    pub f: CVec,
    pub xi: CVec,
}

impl PeakVector {
    pub fn new(f: CVec, xi: CVec) -> Self {
        Self { f, xi }
    }

    pub fn zeros(n: usize, md: usize) -> Self {
        Self { f: CVec::zeros(n), xi: CVec::zeros(md) }
    }

    pub fn add(&self, o: &PeakVector) -> PeakVector {
        PeakVector { f: &self.f + &o.f, xi: &self.xi + &o.xi }
    }

    pub fn sub(&self, o: &PeakVector) -> PeakVector {
        PeakVector { f: &self.f - &o.f, xi: &self.xi - &o.xi }
    }

    pub fn scale(&self, a: C64) -> PeakVector {
        PeakVector { f: &self.f * a, xi: &self.xi * a }
    }

    pub fn to_flat(&self) -> CVec {
        let n = self.f.len();
        CVec::from_fn(n + self.xi.len(), |i, _| if i < n { self.f[i] } else { self.xi[i - n] })
    }

    pub fn from_flat(n: usize, v: &CVec) -> PeakVector {
        PeakVector { f: v.rows(0, n).into_owned(), xi: v.rows(n, v.len() - n).into_owned() }
    }

    /// Euclidean norm of the coordinates, used only for residual scaling.
    pub fn coord_norm(&self) -> f64 {
        (self.f.norm_squared() + self.xi.norm_squared()).sqrt()
    }
}

/// Explicit coordinates of an element of `dom A_max`:
/// `p(L)(f# + G_{z_ref}(c)) + sum xi_alpha g_alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedVector {
    pub f_sharp: CVec,
    pub c: CVec,
    pub xi: CVec,
    pub z_ref: C64,
}

impl ExtendedVector {
    pub fn add(&self, o: &ExtendedVector) -> ExtendedVector {
        assert_eq!(self.z_ref, o.z_ref, "coordinates refer to different z_ref");
        ExtendedVector { f_sharp: &self.f_sharp + &o.f_sharp, c: &self.c + &o.c, xi: &self.xi + &o.xi, z_ref: self.z_ref }
    }

    pub fn scale(&self, a: C64) -> ExtendedVector {
        ExtendedVector { f_sharp: &self.f_sharp * a, c: &self.c * a, xi: &self.xi * a, z_ref: self.z_ref }
    }
}

/// Setup and Gram data of one peak model.
#[derive(Debug, Clone)]
pub struct PeakSpace {
    pub setup: Setup,
    pub gram: GramData,
    report: HermiticityReport,
}

#[derive(Debug, Clone)]
pub struct Weyl {
    pub m: CMat,
    /// Set when 𝒢_Z is not Hermitian and the triple is not a boundary triple.
    pub formal: bool,
}

impl PeakSpace {
    pub fn new(setup: Setup) -> Result<Self> {
        let gram = GramData::build(&setup)?;
        let report = gram.hermiticity_report();
        Ok(Self { setup, gram, report })
    }

    pub fn n(&self) -> usize {
        self.setup.n()
    }

    pub fn md(&self) -> usize {
        self.setup.md()
    }

    pub fn d(&self) -> usize {
        self.setup.d()
    }

    pub fn report(&self) -> HermiticityReport {
        self.report
    }

    pub fn is_hermitian(&self) -> bool {
        self.report.gz_hermitian
    }

    /// Default reference point `z_1 + i (1 + max|lambda|)`.
    pub fn default_z_ref(&self) -> C64 {
        self.setup.zs.points()[0] + C64::new(0.0, 1.0 + self.setup.model.spectral_radius())
    }

    pub fn check_res_a0(&self, z: C64) -> Result<()> {
        self.setup.model.check_resolvent(z)?;
        if self.setup.zs.is_regular_point(z, self.setup.model.tol()) {
            return Err(Error::RegularPointCollision(z));
        }
        Ok(())
    }

    pub fn inner(&self, u: &PeakVector, v: &PeakVector) -> C64 {
        let xi = u.xi.adjoint() * &self.gram.g * &v.xi;
        self.setup.inner_m(&u.f, &v.f) + xi[(0, 0)]
    }

    pub fn norm(&self, u: &PeakVector) -> f64 {
        self.inner(u, u).re.max(0.0).sqrt()
    }

    /// Coordinate Gram matrix `W = diag(P) ⊕ 𝒢` of the ℋ inner product.
    pub fn metric(&self) -> CMat {
        let (n, md) = (self.n(), self.md());
        let mut w = CMat::zeros(n + md, n + md);
        for i in 0..n {
            w[(i, i)] = C64::new(self.setup.weight()[i], 0.0);
        }
        w.view_mut((n, n), (md, md)).copy_from(&self.gram.g);
        w
    }

    pub fn metric_sqrt(&self) -> (CMat, CMat) {
        let (n, md) = (self.n(), self.md());
        let mut s = CMat::zeros(n + md, n + md);
        let mut si = CMat::zeros(n + md, n + md);
        for i in 0..n {
            let w = self.setup.weight()[i].sqrt();
            s[(i, i)] = C64::new(w, 0.0);
            si[(i, i)] = C64::new(1.0 / w, 0.0);
        }
        s.view_mut((n, n), (md, md)).copy_from(&hermitian_fn(&self.gram.g, f64::sqrt));
        si.view_mut((n, n), (md, md)).copy_from(&hermitian_fn(&self.gram.g, |x| 1.0 / x.sqrt()));
        (s, si)
    }

    pub fn a0_apply(&self, v: &PeakVector, star: bool) -> PeakVector {
        let f = self.setup.model.apply_l(&v.f);
        let xi = if star { &self.gram.g_inv * (self.gram.gz.adjoint() * &v.xi) } else { &self.gram.zd * &v.xi };
        PeakVector { f, xi }
    }

    /// Dense coordinate matrix of `A_0`.
    pub fn a0_matrix(&self) -> CMat {
        let (n, md) = (self.n(), self.md());
        let mut a = CMat::zeros(n + md, n + md);
        for (i, &l) in self.setup.model.eigenvalues().iter().enumerate() {
            a[(i, i)] = C64::new(l, 0.0);
        }
        a.view_mut((n, n), (md, md)).copy_from(&self.gram.zd);
        a
    }

    pub fn a0_resolvent(&self, z: C64, v: &PeakVector) -> Result<PeakVector> {
        self.check_res_a0(z)?;
        let f = self.setup.model.resolvent(z, &v.f)?;
        let xi = CVec::from_fn(self.md(), |a, _| v.xi[a] / (self.gram.zd[(a, a)] - z));
        Ok(PeakVector { f, xi })
    }

    pub fn embed(&self, ev: &ExtendedVector) -> Result<PeakVector> {
        let g = self.setup.deficiency_combo(ev.z_ref, &ev.c, Variant::Big)?;
        Ok(PeakVector { f: self.setup.apply_p(&(&ev.f_sharp + g)), xi: ev.xi.clone() })
    }

    /// Coordinates of an element of `dom A_0` (no deficiency component).
    pub fn dom_a0(&self, v: &PeakVector, z_ref: C64) -> ExtendedVector {
        ExtendedVector { f_sharp: self.setup.apply_p_inv(&v.f), c: CVec::zeros(self.d()), xi: v.xi.clone(), z_ref }
    }

    pub fn amax_apply(&self, ev: &ExtendedVector) -> Result<PeakVector> {
        let s = &self.setup;
        let gt = s.deficiency_combo(ev.z_ref, &ev.c, Variant::Tilde)?;
        let f = s.model.apply_l(&s.apply_p(&ev.f_sharp)) + gt * ev.z_ref;
        let xi = &self.gram.zd * &ev.xi + &self.gram.bhat * &ev.c;
        Ok(PeakVector { f, xi })
    }

    /// `(Γ~_0, Γ~_1)`.
    pub fn boundary_gamma(&self, ev: &ExtendedVector) -> Result<(CVec, CVec)> {
        let g1 = self.setup.pairing_tilde(&ev.f_sharp) + self.setup.tilde_r(ev.z_ref)? * &ev.c
            - self.gram.gb_star() * &ev.xi;
        Ok((ev.c.clone(), g1))
    }

    /// `[u, v] = <u, A v> - <A u, v>`.
    pub fn boundary_form(&self, u: &ExtendedVector, v: &ExtendedVector) -> Result<C64> {
        let (eu, ev) = (self.embed(u)?, self.embed(v)?);
        let (au, av) = (self.amax_apply(u)?, self.amax_apply(v)?);
        Ok(self.inner(&eu, &av) - self.inner(&au, &ev))
    }

    /// `[k, k']_{A_0}` predicted from `𝒢_Z`: `xi^* 𝒢_Z xi' - (𝒢_Z xi)^* xi'`.
    pub fn a0_form_prediction(&self, xi: &CVec, xi2: &CVec) -> C64 {
        let gz = &self.gram.gz;
        (xi.adjoint() * gz * xi2)[(0, 0)] - ((gz * xi).adjoint() * xi2)[(0, 0)]
    }

    fn zd_shift_inv(&self, z: C64) -> CVec {
        CVec::from_fn(self.md(), |a, _| (z - self.gram.zd[(a, a)]).inv())
    }

    /// Coordinates of `γ(z) c = F_z(c)`.
    pub fn gamma_ev(&self, z: C64, c: &CVec) -> Result<ExtendedVector> {
        self.check_res_a0(z)?;
        self.setup.check_d(c)?;
        let xi = self.zd_shift_inv(z).component_mul(&(&self.gram.bhat * c));
        Ok(ExtendedVector { f_sharp: CVec::zeros(self.n()), c: c.clone(), xi, z_ref: z })
    }

    pub fn gamma(&self, z: C64, c: &CVec) -> Result<PeakVector> {
        self.embed(&self.gamma_ev(z, c)?)
    }

    /// `γ(conj z)^* v = (<F_sigma(conj z), v>_ℋ)_sigma`.
    pub fn gamma_adj(&self, z: C64, v: &PeakVector) -> Result<CVec> {
        let d = self.d();
        let mut out = CVec::zeros(d);
        for s in 0..d {
            let e = CVec::from_fn(d, |t, _| if t == s { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) });
            out[s] = self.inner(&self.gamma(z.conj(), &e)?, v);
        }
        Ok(out)
    }

    /// `M(z) = Γ~_1 γ(z) = R~(z) + 𝒢_b^*(Z_d - z)^{-1} b^`.
    pub fn weyl(&self, z: C64) -> Result<Weyl> {
        self.check_res_a0(z)?;
        let inv = self.zd_shift_inv(z).map(|x| -x);
        let q = self.gram.gb_star() * CMat::from_diagonal(&inv) * &self.gram.bhat;
        Ok(Weyl { m: self.setup.tilde_r(z)? + q, formal: !self.is_hermitian() })
    }

    /// `Q_𝒢(z)_{sigma sigma'} = sum_j 𝒢_{sigma j, sigma' j} / ((z_j - z) b_j(z_j)^2)`.
    pub fn q_gram(&self, z: C64) -> Result<CMat> {
        self.check_res_a0(z)?;
        let (m, d) = (self.gram.m, self.d());
        let b = self.setup.zs.b_diag();
        Ok(CMat::from_fn(d, d, |s, t| {
            (0..m)
                .map(|j| self.gram.g[(s * m + j, t * m + j)] / ((self.gram.z[j] - z) * b[j] * b[j]))
                .sum()
        }))
    }

    /// Orthonormal-coordinate basis `(0, xi)` of ℋ_⊥.
    pub fn hperp_basis(&self) -> Vec<PeakVector> {
        (0..self.gram.ker_gb_star.ncols())
            .map(|k| PeakVector { f: CVec::zeros(self.n()), xi: self.gram.ker_gb_star.column(k).into_owned() })
            .collect()
    }

    fn require_b(&self, z: C64) -> Result<()> {
        if self.gram.m < 2 {
            return Err(Error::OrderTooSmall);
        }
        self.setup.model.check_resolvent(z)?;
        let tol = self.setup.model.tol();
        if self.delta_hat_spectrum().iter().any(|mu| (C64::new(*mu, 0.0) - z).norm() <= tol) {
            return Err(Error::DeltaHatCollision(z));
        }
        Ok(())
    }

    /// Spectrum of Δ^ through `𝒢_min^{-1/2} Δ 𝒢_min^{-1/2}`.
    pub fn delta_hat_spectrum(&self) -> Vec<f64> {
        let s = hermitian_fn(&self.gram.gmin, |x| 1.0 / x.sqrt());
        hermitian_eigen(&(&s * &self.gram.delta * &s)).0
    }

    fn delta_hat_shift_inv(&self, z: C64) -> Result<CMat> {
        let d = self.d();
        let a = CMat::identity(d, d) * z - &self.gram.delta_hat;
        a.try_inverse().ok_or(Error::DeltaHatCollision(z))
    }

    /// `γ'(z) c = (G~_z(c), b^ (z - Δ^)^{-1} c)`.
    pub fn gamma_b(&self, z: C64, c: &CVec) -> Result<PeakVector> {
        self.require_b(z)?;
        let chi = self.delta_hat_shift_inv(z)? * c;
        Ok(PeakVector { f: self.setup.deficiency_combo(z, c, Variant::Tilde)?, xi: &self.gram.bhat * chi })
    }

    pub fn gamma_b_ev(&self, z: C64, c: &CVec) -> Result<ExtendedVector> {
        self.require_b(z)?;
        let chi = self.delta_hat_shift_inv(z)? * c;
        Ok(ExtendedVector { f_sharp: CVec::zeros(self.n()), c: c.clone(), xi: &self.gram.bhat * chi, z_ref: z })
    }

    /// `M'(z) = R~(z) + 𝒢_min (Δ^ - z)^{-1}`.
    pub fn weyl_b(&self, z: C64) -> Result<CMat> {
        self.require_b(z)?;
        let q = &self.gram.gmin * self.delta_hat_shift_inv(z)? * C64::new(-1.0, 0.0);
        Ok(self.setup.tilde_r(z)? + q)
    }

    /// `(B_0 - z)^{-1}`: `((L - z)^{-1} f, b^ (Δ - z 𝒢_min)^{-1} 𝒢_b^* xi)`.
    pub fn b0_resolvent(&self, z: C64, v: &PeakVector) -> Result<PeakVector> {
        self.require_b(z)?;
        let chi = self.b0_chi(z, v)?;
        Ok(PeakVector { f: self.setup.model.resolvent(z, &v.f)?, xi: &self.gram.bhat * chi })
    }

    fn b0_chi(&self, z: C64, v: &PeakVector) -> Result<CVec> {
        let a = &self.gram.delta - &self.gram.gmin * z;
        let inv = a.try_inverse().ok_or(Error::DeltaHatCollision(z))?;
        Ok(inv * (self.gram.gb_star() * &v.xi))
    }

    pub fn b0_resolvent_ev(&self, z: C64, v: &PeakVector) -> Result<ExtendedVector> {
        let y = self.b0_resolvent(z, v)?;
        Ok(self.dom_a0(&y, z))
    }

    /// `γ'(conj z)^*` as the ℋ-adjoint.
    pub fn gamma_b_adj(&self, z: C64, v: &PeakVector) -> Result<CVec> {
        let d = self.d();
        let mut out = CVec::zeros(d);
        for s in 0..d {
            let e = CVec::from_fn(d, |t, _| if t == s { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) });
            out[s] = self.inner(&self.gamma_b(z.conj(), &e)?, v);
        }
        Ok(out)
    }

    /// `Γ~'_1 (B_0 - z)^{-1} v`, the second expression for `γ'(conj z)^*`.
    pub fn gamma_b_adj_via_b0(&self, z: C64, v: &PeakVector) -> Result<CVec> {
        self.require_b(z)?;
        let y = self.setup.model.resolvent(z, &v.f)?;
        let chi = self.b0_chi(z, v)?;
        let fs = self.setup.apply_p_inv(&y);
        Ok(self.setup.pairing_tilde(&fs) - &self.gram.gmin * chi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::rel_diff_mat;
    use crate::samples::{hermitian_setup, random_setup, Rng};

    #[test]
    fn weyl_d1_m1_formula() {
        let mut rng = Rng::new(5);
        let setup = hermitian_setup(&mut rng, 1, 1, 3, crate::Scaling::Canonical);
        let sp = PeakSpace::new(setup).unwrap();
        let z = C64::new(0.3, 0.8);
        let z1 = sp.gram.z[0];
        let want = sp.setup.tilde_r(z).unwrap()[(0, 0)] + sp.gram.g[(0, 0)] / (z1 - z);
        assert!((sp.weyl(z).unwrap().m[(0, 0)] - want).norm() < 1e-12 * want.norm());
    }

    #[test]
    fn b_branch_needs_m_gt_1() {
        let mut rng = Rng::new(9);
        let sp = PeakSpace::new(random_setup(&mut rng, 1, 2, 6, false)).unwrap();
        assert!(matches!(sp.weyl_b(C64::new(0.0, 1.0)), Err(Error::OrderTooSmall)));
    }

    #[test]
    fn a0_resolvent_regular_point() {
        let mut rng = Rng::new(2);
        let sp = PeakSpace::new(random_setup(&mut rng, 2, 1, 6, false)).unwrap();
        let v = PeakVector::zeros(sp.n(), sp.md());
        let z1 = sp.gram.z[0];
        assert!(matches!(sp.a0_resolvent(z1, &v), Err(Error::RegularPointCollision(_))));
        let xi = CVec::from_element(sp.md(), C64::new(1.0, 0.0));
        let z = C64::new(0.5, 2.0);
        let out = sp.a0_resolvent(z, &PeakVector::new(CVec::zeros(sp.n()), xi)).unwrap();
        for a in 0..sp.md() {
            assert!((out.xi[a] - (sp.gram.z[a % 2] - z).inv()).norm() < 1e-14);
        }
        assert!(rel_diff_mat(&sp.metric(), &sp.metric().adjoint()) < 1e-15);
    }
}
