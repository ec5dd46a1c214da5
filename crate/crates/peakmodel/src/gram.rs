//! Gram algebra of the deficiency vectors `g_(sigma,j) = g_sigma(z_j)`.
//!
//! Index convention: `alpha = (sigma, j)` is stored at `sigma * m + j`.

use serde::Serialize;

use crate::linalg::{checked_inverse, condition_number, diag, hermitian_defect, hermitian_eigen, null_space};
use crate::perturbation::{Setup, Variant};
use crate::{CMat, CVec, Error, Result, C64};

#[derive(Debug, Clone)]
pub struct GramData {
    pub m: usize,
    pub d: usize,
    pub z: Vec<C64>,
    /// 𝒢
    pub g: CMat,
    pub g_inv: CMat,
    /// 𝒢_b = 𝒢 b^
    pub gb: CMat,
    /// b^ with entries `delta_{sigma sigma'} / b_j(z_j)`
    pub bhat: CMat,
    /// 𝒢_min = 𝒢_b^* 𝒢^{-1} 𝒢_b
    pub gmin: CMat,
    pub gmin_inv: CMat,
    pub zd: CMat,
    /// 𝒢_Z = 𝒢 Z_d
    pub gz: CMat,
    /// Pseudoinverse of 𝒢_b^* (md x d).
    pub hb: CMat,
    pub hb_op: CMat,
    /// Orthonormal basis of ker 𝒢_b^*.
    pub ker_gb_star: CMat,
    /// Δ = 𝒢_b^* Z_d b^
    pub delta: CMat,
    pub delta_hat: CMat,
    /// 𝒳 = 𝒢^{-1} S^*, S the j-summation matrix.
    pub x: CMat,
    /// ℳ with `ℳ_{sigma,(sigma' j')} = R_{sigma sigma'}(z_j')`.
    pub m_cal: CMat,
    /// `R(z_j)` for each regular point.
    pub r_at_z: Vec<CMat>,
    /// Entry scale for the `R(z_j)` sums, used for relative tests.
    pub r_scale: f64,
    pub cond_g: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct HermiticityReport {
    pub gz_hermitian: bool,
    pub gram_j_diagonal: bool,
    pub z_all_real: bool,
    pub r_constant_hermitian: bool,
    /// The three characterizations agree.
    pub consistent: bool,
}

pub fn flat(m: usize, sigma: usize, j: usize) -> usize {
    sigma * m + j
}

/// The `d x md` matrix `S` with `(S xi)_sigma = sum_j xi_(sigma,j)`.
pub fn sum_matrix(m: usize, d: usize) -> CMat {
    CMat::from_fn(d, m * d, |s, a| if a / m == s { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) })
}

/// `N x md` matrix with columns `g_alpha` in the requested variant.
pub fn deficiency_frame(setup: &Setup, variant: Variant) -> Result<CMat> {
    let (m, d) = (setup.m(), setup.d());
    let mut out = CMat::zeros(setup.n(), m * d);
    for (j, &zj) in setup.zs.points().iter().enumerate() {
        let gj = setup.deficiency_matrix(zj, variant)?;
        for s in 0..d {
            out.set_column(flat(m, s, j), &gj.column(s));
        }
    }
    Ok(out)
}

impl GramData {
    pub fn build(setup: &Setup) -> Result<Self> {
        let (m, d) = (setup.m(), setup.d());
        let md = m * d;
        let z: Vec<C64> = setup.zs.points().to_vec();
        let ghat = deficiency_frame(setup, Variant::Hat)?;
        let g = ghat.adjoint() * &ghat;
        let mut warnings: Vec<String> = setup.zs.warnings().to_vec();
        let (evals, _) = hermitian_eigen(&g);
        let cond_g = condition_number(&g);
        if evals[0] <= 0.0 || cond_g > 1e14 {
            return Err(Error::DependentDeficiencyVectors(cond_g));
        }
        if cond_g > 1e10 {
            warnings.push(format!("Gram matrix is ill-conditioned (cond = {cond_g:e})"));
        }
        let g_inv = checked_inverse(&g, 1e15).ok_or(Error::DependentDeficiencyVectors(cond_g))?;

        let w = setup.zs.pf_weights();
        let bhat = CMat::from_fn(md, d, |a, s| if a / m == s { w[a % m] } else { C64::new(0.0, 0.0) });
        let gb = &g * &bhat;
        let gmin = bhat.adjoint() * &g * &bhat;
        let gmin_inv = checked_inverse(&gmin, 1e15).ok_or(Error::DependentDeficiencyVectors(condition_number(&gmin)))?;
        let zdiag: Vec<C64> = (0..md).map(|a| z[a % m]).collect();
        let zd = diag(&zdiag);
        let gz = &g * &zd;

        let gb_star = gb.adjoint();
        let hb = gb_star.clone().pseudo_inverse(1e-13 * gb.norm()).map_err(|_| Error::DependentDeficiencyVectors(f64::INFINITY))?;
        let hb_op = &hb * &gb_star * &hb;
        let ker_gb_star = null_space(&gb_star, 1e-10);

        let delta = &gb_star * &zd * &bhat;
        let delta_hat = &gmin_inv * &delta;
        let x = &g_inv * sum_matrix(m, d).adjoint();

        let r_at_z: Vec<CMat> = z.iter().map(|&zj| setup.admissible_r(zj)).collect::<Result<_>>()?;
        let mut m_cal = CMat::zeros(d, md);
        for (j, r) in r_at_z.iter().enumerate() {
            for s in 0..d {
                for t in 0..d {
                    m_cal[(s, flat(m, t, j))] = r[(s, t)];
                }
            }
        }
        let phi = setup.phi();
        let mut r_scale: f64 = 0.0;
        for &zj in &z {
            let mut acc = 0.0;
            for i in 0..setup.n() {
                let row: f64 = (0..d).map(|s| phi[(i, s)].norm_sqr()).sum();
                acc += row / (setup.weight()[i] * (setup.lambda(i) - zj).norm());
            }
            r_scale = r_scale.max(acc);
        }
        if let crate::AdmissibleMode::Renormalized { r0, .. } = &setup.mode {
            r_scale = r_scale.max(r0.norm());
        }

        Ok(Self {
            m,
            d,
            z,
            g,
            g_inv,
            gb,
            bhat,
            gmin,
            gmin_inv,
            zd,
            gz,
            hb,
            hb_op,
            ker_gb_star,
            delta,
            delta_hat,
            x,
            m_cal,
            r_at_z,
            r_scale,
            cond_g,
            warnings,
        })
    }

    pub fn md(&self) -> usize {
        self.m * self.d
    }

    pub fn gb_star(&self) -> CMat {
        self.gb.adjoint()
    }

    pub fn hermiticity_report(&self) -> HermiticityReport {
        let tol = 1e-9;
        let gz_hermitian = hermitian_defect(&self.gz) <= tol * self.gz.norm();
        let mut off = 0.0f64;
        for a in 0..self.md() {
            for b in 0..self.md() {
                if a % self.m != b % self.m {
                    off = off.max(self.g[(a, b)].norm());
                }
            }
        }
        let gram_j_diagonal = off <= tol * self.g.norm();
        let zmax = self.z.iter().map(|z| z.norm()).fold(1.0, f64::max);
        let z_all_real = self.z.iter().all(|z| z.im.abs() <= tol * zmax);
        let r0 = &self.r_at_z[0];
        let rs = self.r_scale.max(f64::MIN_POSITIVE);
        let r_constant_hermitian = hermitian_defect(r0) <= tol * rs
            && self.r_at_z.iter().all(|r| (r - r0).norm() <= tol * rs);
        let b = gram_j_diagonal && z_all_real;
        HermiticityReport {
            gz_hermitian,
            gram_j_diagonal,
            z_all_real,
            r_constant_hermitian,
            consistent: gz_hermitian == b && b == r_constant_hermitian,
        }
    }

    /// `xi = b^ c + xi_perp` with `𝒢_b^* xi_perp = 0`.
    pub fn decompose(&self, xi: &CVec) -> (CVec, CVec) {
        let c = &self.gmin_inv * (self.gb_star() * xi);
        let perp = xi - &self.bhat * &c;
        (c, perp)
    }

    /// `c_sigma(xi) = sum_j xi_(sigma,j)`.
    pub fn c_functional(&self, xi: &CVec) -> CVec {
        CVec::from_fn(self.d, |s, _| (0..self.m).map(|j| xi[flat(self.m, s, j)]).sum())
    }

    /// `xi` with each `chi_sigma` repeated over `j`.
    pub fn repeat(&self, chi: &CVec) -> CVec {
        CVec::from_fn(self.md(), |a, _| chi[a / self.m])
    }

    /// The constant value of `R(z_j)` when it exists.
    pub fn r_constant(&self) -> &CMat {
        &self.r_at_z[0]
    }

    /// `|xi|_𝒢 = (xi^* 𝒢 xi)^{1/2}`, the norm of `Σ xi_alpha g_alpha`.
    pub fn g_norm(&self, xi: &CVec) -> f64 {
        xi.dotc(&(&self.g * xi)).re.max(0.0).sqrt()
    }

    pub fn identity_residuals(&self, xi: &CVec) -> IdentityResiduals {
        let c = self.c_functional(xi);
        let scale = self.r_scale.max(f64::MIN_POSITIVE) * xi.norm().max(f64::MIN_POSITIVE);
        let herm = self.hermiticity_report().gz_hermitian;
        let m_identity = herm.then(|| (&self.m_cal * xi - self.r_constant() * &c).norm() / scale);
        // 𝒢^{-1}(𝒢_Z^* xi - ℳ^* c(xi)) = (Z_d - 𝒳 ℳ) xi
        let lhs = &self.g_inv * (self.gz.adjoint() * xi - self.m_cal.adjoint() * &c);
        let rhs = (&self.zd - &self.x * &self.m_cal) * xi;
        let x_identity = self.g_norm(&(&lhs - &rhs)) / self.g_norm(&lhs).max(self.g_norm(&rhs)).max(f64::MIN_POSITIVE);
        let delta_k0 = (self.m > 1).then(|| {
            let k0 = &self.g_inv * (self.gz.adjoint() - &self.gz) * xi;
            let lhs = self.gb_star() * &k0;
            let rhs = self.bhat.adjoint() * (self.m_cal.adjoint() * &c);
            let pre = self.gb.norm() * self.g_inv.norm() * 2.0 * self.gz.norm() * xi.norm();
            let s = pre.max(self.bhat.norm() * self.m_cal.norm() * c.norm());
            (lhs - rhs).norm() / s.max(f64::MIN_POSITIVE)
        });
        let kmin_perp = (self.m > 1).then(|| {
            let k0 = &self.g_inv * (self.gz.adjoint() - &self.gz) * &self.bhat;
            (self.gb_star() * &k0).norm() / (self.gb.norm() * self.bhat.norm() * self.gz.norm())
        });
        IdentityResiduals { m_identity, x_identity, delta_k0, kmin_perp }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct IdentityResiduals {
    /// `ℳ xi - R c(xi)`, only in the Hermitian regime.
    pub m_identity: Option<f64>,
    pub x_identity: f64,
    /// `[𝒢_b^* d(k_0)]_sigma` identity, only for `m > 1`.
    pub delta_k0: Option<f64>,
    /// `(A_0^* - A_0) 𝔎_min ⊆ ℋ_⊥`, only for `m > 1`.
    pub kmin_perp: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::rel_diff_mat;
    use crate::spectral::{RegularSet, Scaling, SpectralModel};
    use crate::{AdmissibleMode, FunctionalFamily};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn setup(m: usize, d: usize, z: &[C64]) -> Setup {
        let n = 9;
        let eigs: Vec<f64> = (0..n).map(|i| i as f64 * 0.7 - 1.0).collect();
        let model = SpectralModel::new(eigs, m, None).unwrap();
        let zs = RegularSet::new(&model, z.to_vec()).unwrap();
        let phi = CMat::from_fn(n, d, |i, s| c(1.0 + ((i * 7 + s * 3) % 5) as f64 * 0.3, (i as f64 - s as f64) * 0.1));
        let fam = FunctionalFamily::new(phi, &model).unwrap();
        Setup::new(model, zs, fam, Scaling::Canonical, AdmissibleMode::Direct).unwrap()
    }

    #[test]
    fn m1_reductions() {
        let s = setup(1, 2, &[c(-3.0, 0.0)]);
        let g = GramData::build(&s).unwrap();
        assert!(rel_diff_mat(&g.gb, &g.g) < 1e-14);
        assert!(rel_diff_mat(&g.hb, &g.g_inv) < 1e-10);
        assert!(rel_diff_mat(&g.hb_op, &g.g_inv) < 1e-10);
        assert!(rel_diff_mat(&g.gmin, &g.g) < 1e-14);
        assert!(rel_diff_mat(&g.delta, &(&g.g * c(-3.0, 0.0))) < 1e-14);
        assert_eq!(g.ker_gb_star.ncols(), 0);
    }

    #[test]
    fn d1_gb_is_g_times_b() {
        let s = setup(3, 1, &[c(-3.0, 0.0), c(-2.0, 1.0), c(9.0, -1.0)]);
        let g = GramData::build(&s).unwrap();
        let b: Vec<C64> = s.zs.b_diag().iter().map(|x| x.inv()).collect();
        let bcol = CMat::from_column_slice(3, 1, &b);
        assert!(rel_diff_mat(&g.gb, &(&g.g * bcol)) < 1e-14);
    }

    #[test]
    fn zd_layout() {
        let s = setup(2, 2, &[c(-3.0, 0.0), c(-2.0, 0.0)]);
        let g = GramData::build(&s).unwrap();
        let want: Vec<C64> = vec![c(-3.0, 0.0), c(-2.0, 0.0), c(-3.0, 0.0), c(-2.0, 0.0)];
        assert_eq!(g.zd, diag(&want));
    }

    #[test]
    fn decompose_and_c_functional() {
        let s = setup(2, 2, &[c(-3.0, 0.5), c(-2.0, 0.0)]);
        let g = GramData::build(&s).unwrap();
        let c0 = CVec::from_vec(vec![c(1.0, 2.0), c(-0.5, 0.0)]);
        let (cc, perp) = g.decompose(&(&g.bhat * &c0));
        assert!((cc - &c0).norm() < 1e-12 && perp.norm() < 1e-12);
        let k = g.ker_gb_star.column(0).into_owned();
        let (cc, perp) = g.decompose(&k);
        assert!(cc.norm() < 1e-12 && (perp - &k).norm() < 1e-12);
        assert!(g.c_functional(&(&g.bhat * &c0)).norm() < 1e-12);

        let s1 = setup(2, 1, &[c(-3.0, 0.5), c(-2.0, 0.0)]);
        let g1 = GramData::build(&s1).unwrap();
        let xi = CVec::from_vec(vec![c(1.0, 0.0), c(-1.0, 0.0)]);
        assert_eq!(g1.c_functional(&xi)[0], c(0.0, 0.0));

        let s2 = setup(1, 2, &[c(-3.0, 0.5)]);
        let g2 = GramData::build(&s2).unwrap();
        assert_eq!(g2.c_functional(&c0), c0);
    }

    #[test]
    fn m1_real_is_hermitian() {
        let s = setup(1, 2, &[c(-3.0, 0.0)]);
        let r = GramData::build(&s).unwrap().hermiticity_report();
        assert!(r.gz_hermitian && r.gram_j_diagonal && r.z_all_real && r.r_constant_hermitian);
        let s = setup(2, 1, &[c(-3.0, 0.0), c(-2.0, 0.1)]);
        let r = GramData::build(&s).unwrap().hermiticity_report();
        assert!(!r.gz_hermitian && r.consistent);
    }
}
