//! The functionals `phi_sigma`, their deficiency vectors and the admissible
//! matrix functions `R(z)`, `R~(z)`.

use crate::linalg::{hermitian_defect, singular_values};
use crate::spectral::{p_of_l, weight_of_l, RegularSet, Scaling, SpectralModel};
use crate::{CMat, CVec, Error, Result, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalFamily {
    phi: CMat,
}

impl FunctionalFamily {
    /// Columns of `phi` are the eigenbasis coordinates of `phi_sigma`.
    pub fn new(phi: CMat, model: &SpectralModel) -> Result<Self> {
        if phi.nrows() != model.n() {
            return Err(Error::DimensionMismatch { expected: model.n(), got: phi.nrows() });
        }
        let d = phi.ncols();
        if d == 0 {
            return Err(Error::DependentFunctionals(0.0));
        }
        let md = model.m() * d;
        if model.n() < md {
            return Err(Error::InsufficientHeadroom { n: model.n(), md });
        }
        let s = singular_values(&phi);
        let ratio = s.last().unwrap() / s[0].max(f64::MIN_POSITIVE);
        if ratio.is_nan() || ratio <= 1e-10 {
            return Err(Error::DependentFunctionals(ratio));
        }
        Ok(Self { phi })
    }

    pub fn phi(&self) -> &CMat {
        &self.phi
    }

    pub fn d(&self) -> usize {
        self.phi.ncols()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum AdmissibleMode {
    #[default]
    Direct,
    /// `R(z) = R0 + (z - z0) <g(conj z), g(z0)>_{-m}`.
    Renormalized { r0: CMat, z0: C64 },
}

/// Which scale the deficiency vector is taken in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// `g(z) = (L - z)^{-1} phi`
    Plain,
    /// `G(z) = P(L)^{-1} g(z)`
    Big,
    /// `g^(z) = P(L)^{-1/2} g(z)`
    Hat,
    /// `G~(z) = p(L) G(z)`
    Tilde,
}

/// Model, regular points, functionals and scaling bundled together.
#[derive(Debug, Clone)]
pub struct Setup {
    pub model: SpectralModel,
    pub zs: RegularSet,
    pub family: FunctionalFamily,
    pub scaling: Scaling,
    pub mode: AdmissibleMode,
    weight: Vec<f64>,
    p: Vec<C64>,
}

impl Setup {
    pub fn new(
        model: SpectralModel,
        zs: RegularSet,
        family: FunctionalFamily,
        scaling: Scaling,
        mode: AdmissibleMode,
    ) -> Result<Self> {
        if zs.m() != model.m() {
            return Err(Error::RegularSetSize { expected: model.m(), got: zs.m() });
        }
        if family.phi().nrows() != model.n() {
            return Err(Error::DimensionMismatch { expected: model.n(), got: family.phi().nrows() });
        }
        let weight = weight_of_l(&model, &zs, scaling)?;
        let p = p_of_l(&model, &zs, scaling)?;
        if let AdmissibleMode::Renormalized { r0, z0 } = &mode {
            let d = family.d();
            if r0.nrows() != d || r0.ncols() != d {
                return Err(Error::InvalidAdmissible(format!("R0 must be {d}x{d}")));
            }
            model.check_resolvent(*z0)?;
            if z0.im == 0.0 && hermitian_defect(r0) > 1e-12 * r0.norm().max(1.0) {
                return Err(Error::InvalidAdmissible("R0 must be Hermitian for real z0".into()));
            }
        }
        Ok(Self { model, zs, family, scaling, mode, weight, p })
    }

    pub fn n(&self) -> usize {
        self.model.n()
    }

    pub fn m(&self) -> usize {
        self.model.m()
    }

    pub fn d(&self) -> usize {
        self.family.d()
    }

    pub fn md(&self) -> usize {
        self.m() * self.d()
    }

    pub fn phi(&self) -> &CMat {
        self.family.phi()
    }

    /// Diagonal of `P(L)`.
    pub fn weight(&self) -> &[f64] {
        &self.weight
    }

    /// Diagonal of `p(L)`.
    pub fn p(&self) -> &[C64] {
        &self.p
    }

    pub fn lambda(&self, i: usize) -> C64 {
        C64::new(self.model.eigenvalues()[i], 0.0)
    }

    fn variant_factor(&self, i: usize, v: Variant) -> C64 {
        match v {
            Variant::Plain => C64::new(1.0, 0.0),
            Variant::Big => C64::new(1.0 / self.weight[i], 0.0),
            Variant::Hat => C64::new(self.weight[i].sqrt().recip(), 0.0),
            Variant::Tilde => self.p[i] / self.weight[i],
        }
    }

    /// Deficiency vector of a single functional.
    pub fn deficiency(&self, sigma: usize, z: C64, variant: Variant) -> Result<CVec> {
        if sigma >= self.d() {
            return Err(Error::IndexOutOfRange { index: sigma, bound: self.d() });
        }
        self.model.check_resolvent(z)?;
        let phi = self.phi();
        Ok(CVec::from_fn(self.n(), |i, _| {
            phi[(i, sigma)] * self.variant_factor(i, variant) / (self.lambda(i) - z)
        }))
    }

    /// N x d matrix with columns `g_sigma(z)` in the requested variant.
    pub fn deficiency_matrix(&self, z: C64, variant: Variant) -> Result<CMat> {
        self.model.check_resolvent(z)?;
        let phi = self.phi();
        Ok(CMat::from_fn(self.n(), self.d(), |i, s| {
            phi[(i, s)] * self.variant_factor(i, variant) / (self.lambda(i) - z)
        }))
    }

    /// `sum_sigma c_sigma g_sigma(z)` in the requested variant.
    pub fn deficiency_combo(&self, z: C64, c: &CVec, variant: Variant) -> Result<CVec> {
        self.check_d(c)?;
        Ok(self.deficiency_matrix(z, variant)? * c)
    }

    pub fn check_d(&self, c: &CVec) -> Result<()> {
        if c.len() != self.d() {
            return Err(Error::DimensionMismatch { expected: self.d(), got: c.len() });
        }
        Ok(())
    }

    pub fn check_n(&self, f: &CVec) -> Result<()> {
        if f.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), got: f.len() });
        }
        Ok(())
    }

    /// `F_z(c) = g_z(c) / b(z)`.
    pub fn f_vector(&self, z: C64, c: &CVec) -> Result<CVec> {
        if self.zs.is_regular_point(z, self.model.tol()) {
            return Err(Error::RegularPointCollision(z));
        }
        Ok(self.deficiency_combo(z, c, Variant::Plain)? / self.zs.b(z))
    }

    /// Plain duality pairing `<phi, f> = phi^* f`.
    pub fn pairing(&self, f: &CVec) -> CVec {
        self.phi().adjoint() * f
    }

    /// `<phi, |p(L)|^2 f>`.
    pub fn pairing_tilde(&self, f: &CVec) -> CVec {
        let w = CVec::from_fn(self.n(), |i, _| f[i] * self.p[i].norm_sqr());
        self.phi().adjoint() * w
    }

    /// `phi^ = P(L)^{-1/2} phi`.
    pub fn phi_hat(&self) -> CMat {
        CMat::from_fn(self.n(), self.d(), |i, s| self.phi()[(i, s)] / self.weight[i].sqrt())
    }

    /// `sum_i conj(phi_is) phi_is' w_i / (P_i (lambda_i - z)(lambda_i - w))`
    /// with `w_i = 1` or `|p_i|^2`.
    fn pair_kernel(&self, z: C64, w: Option<C64>, tilde: bool) -> Result<CMat> {
        self.model.check_resolvent(z)?;
        if let Some(w) = w {
            self.model.check_resolvent(w)?;
        }
        let d = self.d();
        let phi = self.phi();
        let mut out = CMat::zeros(d, d);
        for i in 0..self.n() {
            let mut k = C64::new(1.0 / self.weight[i], 0.0) / (self.lambda(i) - z);
            if let Some(w) = w {
                k /= self.lambda(i) - w;
            }
            if tilde {
                k *= self.p[i].norm_sqr();
            }
            for s in 0..d {
                let a = phi[(i, s)].conj() * k;
                for t in 0..d {
                    out[(s, t)] += a * phi[(i, t)];
                }
            }
        }
        Ok(out)
    }

    /// `M_pair(z, w) = <g(conj z), g(w)>_{-m}`.
    pub fn m_pair(&self, z: C64, w: C64) -> Result<CMat> {
        self.pair_kernel(z, Some(w), false)
    }

    /// Same pairing with `|p|^2` inserted.
    pub fn m_pair_tilde(&self, z: C64, w: C64) -> Result<CMat> {
        self.pair_kernel(z, Some(w), true)
    }

    /// `R(z)` by direct summation, ignoring the admissible mode.
    pub fn r_direct(&self, z: C64) -> Result<CMat> {
        self.pair_kernel(z, None, false)
    }

    pub fn admissible_r(&self, z: C64) -> Result<CMat> {
        match &self.mode {
            AdmissibleMode::Direct => self.r_direct(z),
            AdmissibleMode::Renormalized { r0, z0 } => Ok(r0 + self.m_pair(z, *z0)? * (z - z0)),
        }
    }

    pub fn tilde_r(&self, z: C64) -> Result<CMat> {
        match &self.mode {
            AdmissibleMode::Direct => self.pair_kernel(z, None, true),
            AdmissibleMode::Renormalized { r0, z0 } => Ok(r0 + self.m_pair_tilde(z, *z0)? * (z - z0)),
        }
    }

    /// `<f, g>_m` with the model weight `P(L)`.
    pub fn inner_m(&self, f: &CVec, g: &CVec) -> C64 {
        f.iter().zip(g.iter()).zip(&self.weight).map(|((a, b), w)| a.conj() * b * *w).sum()
    }

    /// `<f, g>_{-m}`.
    pub fn inner_minus_m(&self, f: &CVec, g: &CVec) -> C64 {
        f.iter().zip(g.iter()).zip(&self.weight).map(|((a, b), w)| a.conj() * b / *w).sum()
    }

    /// The component-wise operator `p(L)`.
    pub fn apply_p(&self, f: &CVec) -> CVec {
        CVec::from_fn(f.len(), |i, _| f[i] * self.p[i])
    }

    pub fn apply_p_inv(&self, f: &CVec) -> CVec {
        CVec::from_fn(f.len(), |i, _| f[i] / self.p[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::real_cvec;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn setup(eigs: &[f64], m: usize, phi: &[f64], z: &[C64], scaling: Scaling) -> Setup {
        let model = SpectralModel::new(eigs.to_vec(), m, None).unwrap();
        let zs = RegularSet::new(&model, z.to_vec()).unwrap();
        let fam = FunctionalFamily::new(CMat::from_column_slice(eigs.len(), 1, real_cvec(phi).as_slice()), &model).unwrap();
        Setup::new(model, zs, fam, scaling, AdmissibleMode::Direct).unwrap()
    }

    #[test]
    fn deficiency_example() {
        let s = setup(&[0.0, 1.0], 1, &[1.0, 1.0], &[c(3.0, 1.0)], Scaling::Canonical);
        let g = s.deficiency(0, c(-1.0, 0.0), Variant::Plain).unwrap();
        assert!((g - real_cvec(&[1.0, 0.5])).norm() < 1e-15);
        assert!(matches!(s.deficiency(1, c(-1.0, 0.0), Variant::Plain), Err(Error::IndexOutOfRange { .. })));
        let z = c(0.3, 0.7);
        let a = s.deficiency(0, z, Variant::Plain).unwrap().map(|x| x.conj());
        let b = s.deficiency(0, z.conj(), Variant::Plain).unwrap();
        assert!((a - b).norm() < 1e-15);
    }

    #[test]
    fn f_vector_m1() {
        let s = setup(&[0.0, 2.0, 5.0], 1, &[1.0, -0.5, 2.0], &[c(-1.0, 0.0)], Scaling::Canonical);
        let z = c(1.0, 1.0);
        let cc = CVec::from_element(1, c(2.0, -1.0));
        let got = s.f_vector(z, &cc).unwrap();
        let want = s.deficiency(0, z, Variant::Plain).unwrap() * cc[0] / (z - c(-1.0, 0.0));
        assert!((got - want).norm() < 1e-14);
        assert!(s.f_vector(z, &CVec::zeros(1)).unwrap().norm() == 0.0);
        assert!(matches!(s.f_vector(c(-1.0, 0.0), &cc), Err(Error::RegularPointCollision(_))));
    }

    #[test]
    fn r_scalar_examples() {
        let s = setup(&[0.0], 1, &[1.0], &[c(-1.0, 0.0)], Scaling::Canonical);
        // 1 / ((0+1)^1 (0+1))
        assert!((s.admissible_r(c(-1.0, 0.0)).unwrap()[(0, 0)] - c(1.0, 0.0)).norm() < 1e-15);
        // |p(0)|^2 = 1
        assert!((s.tilde_r(c(-1.0, 0.0)).unwrap()[(0, 0)] - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn tilde_scaling_r_equals_r_tilde() {
        let s = setup(&[0.0, 1.0, 4.0, 9.0], 2, &[1.0, 0.3, -0.2, 0.7], &[c(-1.0, 0.0), c(-3.0, 0.0)], Scaling::Tilde);
        let z = c(0.4, 1.3);
        assert_eq!(s.admissible_r(z).unwrap(), s.tilde_r(z).unwrap());
    }

    #[test]
    fn renormalized_shift_is_constant() {
        let base = setup(&[0.0, 1.0, 4.0], 1, &[1.0, 0.3, -0.2], &[c(-1.0, 0.0)], Scaling::Canonical);
        let r0 = CMat::from_element(1, 1, c(0.25, 0.0));
        let z0 = c(-2.0, 0.0);
        let ren = Setup::new(
            base.model.clone(),
            base.zs.clone(),
            base.family.clone(),
            Scaling::Canonical,
            AdmissibleMode::Renormalized { r0: r0.clone(), z0 },
        )
        .unwrap();
        let shift = r0 - base.r_direct(z0).unwrap();
        for z in [c(0.5, 1.0), c(-3.0, 0.2), c(7.0, -2.0)] {
            let diff = ren.admissible_r(z).unwrap() - base.r_direct(z).unwrap();
            assert!((diff - &shift).norm() < 1e-13);
        }
        let bad = Setup::new(
            base.model.clone(),
            base.zs.clone(),
            base.family.clone(),
            Scaling::Canonical,
            AdmissibleMode::Renormalized { r0: CMat::from_element(1, 1, c(0.0, 1.0)), z0 },
        );
        assert!(matches!(bad, Err(Error::InvalidAdmissible(_))));
    }

    #[test]
    fn family_rejections() {
        let model = SpectralModel::new(vec![0.0, 1.0, 2.0], 2, None).unwrap();
        let phi = CMat::from_element(3, 2, c(1.0, 0.0));
        assert!(matches!(FunctionalFamily::new(phi, &model), Err(Error::InsufficientHeadroom { .. })));
        let model = SpectralModel::new(vec![0.0, 1.0, 2.0], 1, None).unwrap();
        let phi = CMat::from_element(3, 2, c(1.0, 0.0));
        assert!(matches!(FunctionalFamily::new(phi, &model), Err(Error::DependentFunctionals(_))));
    }
}
