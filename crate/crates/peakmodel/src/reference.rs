//! Boundary maps and operators transported to the reference space `H_0`.

use crate::gram::{deficiency_frame, sum_matrix, GramData};
use crate::linalg::{rank, rel_diff_mat};
use crate::perturbation::{Setup, Variant};
use crate::{CMat, CVec, Result, C64};

/// The frame `ĝ_alpha = P(L)^{-1/2} g_sigma(z_j)` and the projection onto its span.
#[derive(Debug, Clone)]
pub struct KhatFrame {
    pub setup: Setup,
    pub gram: GramData,
    pub ghat: CMat,
    pub proj: CMat,
    /// `ĝ^+ = 𝒢^{-1} ĝ^*`, formed from a QR factorization of `ĝ`.
    ghat_pinv: CMat,
    /// `K = S ĝ^+`, so that `c(Pu) = K u`.
    k: CMat,
}

/// An element of `dom Â_max`: `u' + Σ xi_alpha ĝ_alpha` with
/// `u' = f♮ + (L - z_ref)^{-1} ĝ b^ c`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimeCoords {
    pub f_nat: CVec,
    pub c: CVec,
    pub xi: CVec,
    pub z_ref: C64,
}

impl KhatFrame {
    pub fn new(setup: Setup) -> Result<Self> {
        let gram = GramData::build(&setup)?;
        let ghat = deficiency_frame(&setup, Variant::Hat)?;
        let qr = ghat.clone().qr();
        let (q, r) = (qr.q(), qr.r());
        let r_inv = r.try_inverse().ok_or(crate::Error::DependentDeficiencyVectors(0.0))?;
        let ghat_pinv = r_inv * q.adjoint();
        let proj = &q * q.adjoint();
        let k = sum_matrix(gram.m, gram.d) * &ghat_pinv;
        Ok(Self { setup, gram, ghat, proj, ghat_pinv, k })
    }

    pub fn n(&self) -> usize {
        self.setup.n()
    }

    /// Consistency `ĝ^* ĝ = 𝒢`, relative.
    pub fn gram_defect(&self) -> f64 {
        rel_diff_mat(&(self.ghat.adjoint() * &self.ghat), &self.gram.g)
    }

    /// `d(Pu) = 𝒢^{-1} ĝ^* u`.
    pub fn d_of(&self, u: &CVec) -> CVec {
        &self.ghat_pinv * u
    }

    pub fn c_of(&self, u: &CVec) -> CVec {
        &self.k * u
    }

    pub fn c_matrix(&self) -> &CMat {
        &self.k
    }

    /// `L (I - P) u + ĝ Z_d 𝒢^{-1} ĝ^* u`.
    pub fn l0star_apply(&self, u: &CVec) -> CVec {
        let l = &self.setup.model;
        l.apply_l(&(u - &self.proj * u)) + &self.ghat * (&self.gram.zd * self.d_of(u))
    }

    /// `ĝ_z(c)`.
    pub fn ghat_z(&self, z: C64, c: &CVec) -> Result<CVec> {
        self.setup.deficiency_combo(z, c, Variant::Hat)
    }

    /// `(Γ^_0, Γ^_1)` of `u# + ĝ_z(c)`.
    pub fn gammahat(&self, u_sharp: &CVec, c: &CVec, z: C64) -> Result<(CVec, CVec)> {
        let g1 = self.setup.phi_hat().adjoint() * u_sharp + self.setup.admissible_r(z)? * c;
        Ok((c.clone(), g1))
    }

    /// The same boundary values read off a raw vector: `(c(Pu), <φ^, u>)`.
    /// Matches [`Self::gammahat`] in the direct admissible mode on
    /// admissible coordinates.
    pub fn gammahat_raw(&self, u: &CVec) -> (CVec, CVec) {
        (self.c_of(u), self.setup.phi_hat().adjoint() * u)
    }

    /// Moves `u0` to the nearest `u#` with `c(P(u# + ĝ_z(c))) = c`, the
    /// coordinates on which the von Neumann form and `l0star_apply` agree.
    pub fn admissible_sharp(&self, u0: &CVec, c: &CVec, z: C64) -> Result<CVec> {
        let target = c - &self.k * self.ghat_z(z, c)?;
        Ok(u0 + self.k_pinv() * (target - &self.k * u0))
    }

    fn k_pinv(&self) -> CMat {
        let kk = &self.k * self.k.adjoint();
        self.k.adjoint() * kk.try_inverse().expect("c(K^) = C^d makes K K^* invertible")
    }

    /// `u' = f♮ + (L - z_ref)^{-1} ĝ b^ c`.
    pub fn u_prime(&self, p: &PrimeCoords) -> Result<CVec> {
        let k = &self.ghat * (&self.gram.bhat * &p.c);
        Ok(&p.f_nat + self.setup.model.resolvent(p.z_ref, &k)?)
    }

    pub fn embed_prime(&self, p: &PrimeCoords) -> Result<CVec> {
        Ok(self.u_prime(p)? + &self.ghat * &p.xi)
    }

    /// Adjusts `f♮` so that `c(P u') = 0`, i.e. `u'` plays the role of an
    /// element of `H_2` with no `K̂` trace.
    pub fn h2_project(&self, p: &PrimeCoords) -> Result<PrimeCoords> {
        let u = self.u_prime(p)?;
        let f_nat = &p.f_nat - self.k_pinv() * (&self.k * u);
        Ok(PrimeCoords { f_nat, ..p.clone() })
    }

    /// `(Γ^'_0, Γ^'_1) = (c(xi), <φ^, u'> + ℳ xi)`.
    pub fn gammahat_prime(&self, p: &PrimeCoords) -> Result<(CVec, CVec)> {
        let u = self.u_prime(p)?;
        let g0 = self.gram.c_functional(&p.xi);
        let g1 = self.setup.phi_hat().adjoint() * u + &self.gram.m_cal * &p.xi;
        Ok((g0, g1))
    }

    /// Von Neumann coordinates `(u#, c)` of a prime-coordinate element at `z`:
    /// `u# = u' + Σ xi_alpha (ĝ_alpha - ĝ_sigma(z))`, `c = c(xi)`.
    pub fn prime_to_sharp(&self, p: &PrimeCoords, z: C64) -> Result<(CVec, CVec)> {
        let c = self.gram.c_functional(&p.xi);
        let u = self.embed_prime(p)? - self.ghat_z(z, &c)?;
        Ok((u, c))
    }

    /// `Â_max(u' + k̂) = L u' + ĝ Z_d xi`.
    pub fn ahat_max_apply(&self, p: &PrimeCoords) -> Result<CVec> {
        let u = self.u_prime(p)?;
        Ok(self.setup.model.apply_l(&u) + &self.ghat * (&self.gram.zd * &p.xi))
    }

    /// Numerical rank of the range of `Γ^'` over all prime coordinates.
    pub fn gammahat_prime_rank(&self) -> usize {
        let (n, md, d) = (self.n(), self.gram.md(), self.gram.d);
        let mut a = CMat::zeros(2 * d, n + md);
        a.view_mut((0, n), (d, md)).copy_from(&sum_matrix(self.gram.m, d));
        a.view_mut((d, 0), (d, n)).copy_from(&self.setup.phi_hat().adjoint());
        a.view_mut((d, n), (d, md)).copy_from(&self.gram.m_cal);
        rank(&a, 1e-12)
    }

    /// `d(P L u) - 𝒳 <φ^, u> - 𝒢^{-1} 𝒢_Z^* d(Pu)`, relative in the `𝒢`-norm.
    pub fn cx_identity_residual(&self, u: &CVec) -> f64 {
        let lhs = self.d_of(&self.setup.model.apply_l(u));
        let rhs = &self.gram.x * (self.setup.phi_hat().adjoint() * u)
            + &self.gram.g_inv * (self.gram.gz.adjoint() * self.d_of(u));
        let g = &self.gram;
        g.g_norm(&(&lhs - &rhs)) / g.g_norm(&lhs).max(g.g_norm(&rhs)).max(f64::MIN_POSITIVE)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gram::flat;
    use crate::linalg::{null_space, rel_diff_vec, subspace_distance};
    use crate::samples::{random_setup, Rng};

    fn frame(seed: u64, m: usize, d: usize) -> (KhatFrame, Rng) {
        let mut rng = Rng::new(seed);
        let s = random_setup(&mut rng, m, d, 10, false);
        (KhatFrame::new(s).unwrap(), rng)
    }

    #[test]
    fn projection_and_gram() {
        let (f, _) = frame(1, 2, 2);
        assert!(f.gram_defect() < 1e-10);
        assert!(rel_diff_mat(&(&f.proj * &f.proj), &f.proj) < 1e-12);
        assert!(rel_diff_mat(&f.proj.adjoint(), &f.proj) < 1e-12);
    }

    #[test]
    fn c_of_examples() {
        let (f, mut rng) = frame(2, 2, 2);
        let diff = f.ghat.column(flat(2, 1, 0)) - f.ghat.column(flat(2, 1, 1));
        assert!(f.c_of(&diff.into_owned()).norm() < 1e-10);
        // u orthogonal to K^
        let u = rng.cvec(f.n());
        let perp = &u - &f.proj * &u;
        assert!(f.c_of(&perp).norm() < 1e-10 * u.norm());
        assert_eq!(rank(&(f.c_matrix() * &f.ghat), 1e-12), 2);
    }

    #[test]
    fn kmin_is_spanned_by_differences() {
        let (f, _) = frame(3, 3, 2);
        let ker = null_space(&sum_matrix(3, 2), 1e-12);
        let mut diffs = CMat::zeros(6, 4);
        for s in 0..2 {
            for j in 0..2 {
                diffs[(flat(3, s, j), 2 * s + j)] = C64::new(1.0, 0.0);
                diffs[(flat(3, s, 2), 2 * s + j)] = C64::new(-1.0, 0.0);
            }
        }
        assert!(subspace_distance(&ker, &diffs, 1e-12) < 1e-10);
        assert!(f.gram_defect() < 1e-10);
    }

    #[test]
    fn l0star_examples() {
        let (f, mut rng) = frame(4, 2, 1);
        let u = rng.cvec(f.n());
        let perp = &u - &f.proj * &u;
        assert!(rel_diff_vec(&f.l0star_apply(&perp), &f.setup.model.apply_l(&perp)) < 1e-10);
        for a in 0..2 {
            let g = f.ghat.column(a).into_owned();
            let want = &g * f.gram.z[a % 2];
            assert!(rel_diff_vec(&f.l0star_apply(&g), &want) < 1e-10);
        }
        let z = C64::new(0.3, 1.7);
        let c = rng.cvec(1);
        let us = f.admissible_sharp(&rng.cvec(f.n()), &c, z).unwrap();
        let u = &us + f.ghat_z(z, &c).unwrap();
        let want = f.setup.model.apply_l(&us) + f.ghat_z(z, &c).unwrap() * z;
        assert!(rel_diff_vec(&f.l0star_apply(&u), &want) < 1e-10);
    }

    #[test]
    fn prime_agrees_with_gammahat() {
        let (f, mut rng) = frame(5, 3, 2);
        let z = C64::new(-0.4, 1.1);
        for _ in 0..20 {
            let p = PrimeCoords { f_nat: rng.cvec(f.n()), c: rng.cvec(2), xi: rng.cvec(6), z_ref: C64::new(0.5, 2.0) };
            let (g0p, g1p) = f.gammahat_prime(&p).unwrap();
            let (us, c) = f.prime_to_sharp(&p, z).unwrap();
            let (g0, g1) = f.gammahat(&us, &c, z).unwrap();
            assert!(rel_diff_vec(&g0p, &g0) < 1e-10);
            assert!(rel_diff_vec(&g1p, &g1) < 1e-10);
        }
        assert_eq!(f.gammahat_prime_rank(), 4);
    }

    #[test]
    fn cx_identity_random_and_frame() {
        let (f, mut rng) = frame(6, 2, 2);
        assert!(f.cx_identity_residual(&rng.cvec(f.n())) < 1e-10);
        for a in 0..4 {
            let g = f.ghat.column(a).into_owned();
            let want = &g * f.gram.z[a % 2] + f.setup.phi_hat().column(a / 2);
            assert!(rel_diff_vec(&f.setup.model.apply_l(&g), &want) < 1e-12);
        }
    }
}
