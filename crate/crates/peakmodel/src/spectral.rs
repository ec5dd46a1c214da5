//! Diagonal model of `L`, the scale of weighted inner products, and the
//! rational functions built from the regular points `z_1..z_m`.

use serde::{Deserialize, Serialize};

use crate::{CVec, Error, Result, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralModel {
    eigenvalues: Vec<f64>,
    m: usize,
    tol: f64,
}

impl SpectralModel {
    /// `tol = None` picks `1e-8 * (1 + max|lambda|)`.
    pub fn new(eigenvalues: Vec<f64>, m: usize, tol: Option<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::EmptySpectrum);
        }
        if let Some(index) = eigenvalues.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFiniteEigenvalue { index });
        }
        if m < 1 {
            return Err(Error::InvalidOrder(m));
        }
        let top = eigenvalues.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let tol = tol.unwrap_or(1e-8 * (1.0 + top));
        Ok(Self { eigenvalues, m, tol })
    }

    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0f64, |a, x| a.max(x.abs()))
    }

    pub fn distance_to_spectrum(&self, z: C64) -> f64 {
        self.eigenvalues
            .iter()
            .map(|&l| (C64::new(l, 0.0) - z).norm())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn check_resolvent(&self, z: C64) -> Result<()> {
        if !(z.re.is_finite() && z.im.is_finite()) || self.distance_to_spectrum(z) <= self.tol {
            return Err(Error::SpectralCollision(z));
        }
        Ok(())
    }

    fn check_len(&self, f: &CVec) -> Result<()> {
        if f.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), got: f.len() });
        }
        Ok(())
    }

    /// `(|lambda_i| + 1)^n`.
    pub fn scale_weights(&self, n: f64) -> Vec<f64> {
        self.eigenvalues.iter().map(|l| (l.abs() + 1.0).powf(n)).collect()
    }

    /// `<f, g>_n = sum (|lambda|+1)^n conj(f) g`.
    pub fn scale_inner(&self, n: i32, f: &CVec, g: &CVec) -> Result<C64> {
        self.check_len(f)?;
        self.check_len(g)?;
        let w = self.scale_weights(n as f64);
        Ok(w.iter().zip(f.iter().zip(g.iter())).map(|(w, (a, b))| a.conj() * b * *w).sum())
    }

    /// Canonical `P(L)^s = (|L|+I)^{m s}` applied componentwise.
    pub fn apply_scale_power(&self, s: f64, f: &CVec) -> Result<CVec> {
        self.check_len(f)?;
        let w = self.scale_weights(self.m as f64 * s);
        Ok(CVec::from_iterator(f.len(), f.iter().zip(w).map(|(x, w)| x * w)))
    }

    pub fn resolvent(&self, z: C64, f: &CVec) -> Result<CVec> {
        self.check_len(f)?;
        self.check_resolvent(z)?;
        Ok(CVec::from_iterator(
            f.len(),
            f.iter().zip(&self.eigenvalues).map(|(x, &l)| x / (C64::new(l, 0.0) - z)),
        ))
    }

    pub fn apply_l(&self, f: &CVec) -> CVec {
        CVec::from_iterator(f.len(), f.iter().zip(&self.eigenvalues).map(|(x, &l)| x * l))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Scaling {
    #[default]
    Canonical,
    Tilde,
}

/// The regular points `z_1..z_m` with the partial-fraction data
/// `b_j(z) = prod_{j' != j} (z - z_j')`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularSet {
    z: Vec<C64>,
    b_diag: Vec<C64>,
    warnings: Vec<String>,
}

impl RegularSet {
    pub fn new(model: &SpectralModel, z: Vec<C64>) -> Result<Self> {
        let m = model.m();
        if z.len() != m {
            return Err(Error::RegularSetSize { expected: m, got: z.len() });
        }
        for j in 0..m {
            for k in j + 1..m {
                let scale = 1.0 + z[j].norm().max(z[k].norm());
                if (z[j] - z[k]).norm() <= 1e-14 * scale {
                    return Err(Error::DuplicateRegularPoint(j, k));
                }
            }
        }
        for &zj in &z {
            model.check_resolvent(zj)?;
        }
        let b_diag: Vec<C64> = (0..m).map(|j| b_j_at(&z, j, z[j])).collect();
        let mut warnings = Vec::new();
        let hi = b_diag.iter().map(|b| b.norm()).fold(0.0, f64::max);
        let lo = b_diag.iter().map(|b| b.norm()).fold(f64::INFINITY, f64::min);
        if m > 1 && lo < 1e-6 * hi {
            warnings.push(format!("near-degenerate regular points: min|b_j(z_j)|/max = {:e}", lo / hi));
        }
        let set = Self { z, b_diag, warnings };
        if m > 1 {
            let inv: Vec<C64> = set.pf_weights();
            let sum: C64 = inv.iter().sum();
            let top = inv.iter().map(|w| w.norm()).fold(0.0, f64::max);
            if sum.norm() >= 1e-10 * top {
                return Err(Error::PartialFractionDefect(sum.norm() / top));
            }
        }
        Ok(set)
    }

    pub fn points(&self) -> &[C64] {
        &self.z
    }

    pub fn m(&self) -> usize {
        self.z.len()
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn all_real(&self, tol: f64) -> bool {
        self.z.iter().all(|z| z.im.abs() <= tol)
    }

    /// `(b_1(z_1), ..., b_m(z_m))`, with `b_1 = 1` when `m = 1`.
    pub fn b_diag(&self) -> &[C64] {
        &self.b_diag
    }

    /// `1 / b_j(z_j)`, the partial-fraction weights of `P~^{-1}`.
    pub fn pf_weights(&self) -> Vec<C64> {
        self.b_diag.iter().map(|b| b.inv()).collect()
    }

    pub fn b_j(&self, j: usize, z: C64) -> C64 {
        b_j_at(&self.z, j, z)
    }

    /// `P~(z) = prod_j (z - z_j)`.
    pub fn b(&self, z: C64) -> C64 {
        self.z.iter().map(|zj| z - zj).product()
    }

    pub fn is_regular_point(&self, z: C64, tol: f64) -> bool {
        self.z.iter().any(|zj| (zj - z).norm() <= tol)
    }
}

fn b_j_at(z: &[C64], j: usize, at: C64) -> C64 {
    z.iter()
        .enumerate()
        .filter(|(k, _)| *k != j)
        .map(|(_, zk)| at - zk)
        .product()
}

/// Forward: `P~(L) f`. Inverse: `sum_j b_j(z_j)^{-1} (L - z_j)^{-1} f`.
pub fn tilde_p_apply(model: &SpectralModel, zs: &RegularSet, f: &CVec, inverse: bool) -> Result<CVec> {
    if f.len() != model.n() {
        return Err(Error::DimensionMismatch { expected: model.n(), got: f.len() });
    }
    if !inverse {
        return Ok(CVec::from_iterator(
            f.len(),
            f.iter().zip(model.eigenvalues()).map(|(x, &l)| x * zs.b(C64::new(l, 0.0))),
        ));
    }
    let mut out = CVec::zeros(f.len());
    for (w, &zj) in zs.pf_weights().iter().zip(zs.points()) {
        out += model.resolvent(zj, f)? * *w;
    }
    Ok(out)
}

/// Diagonal of `p(L) = P(L) P~(L)^{-1}`.
pub fn p_of_l(model: &SpectralModel, zs: &RegularSet, scaling: Scaling) -> Result<Vec<C64>> {
    for &zj in zs.points() {
        model.check_resolvent(zj)?;
    }
    Ok(match scaling {
        Scaling::Tilde => vec![C64::new(1.0, 0.0); model.n()],
        Scaling::Canonical => model
            .eigenvalues()
            .iter()
            .map(|&l| C64::new((l.abs() + 1.0).powi(model.m() as i32), 0.0) / zs.b(C64::new(l, 0.0)))
            .collect(),
    })
}

/// Diagonal of the scale weight `P(L)` for the given scaling choice.
pub fn weight_of_l(model: &SpectralModel, zs: &RegularSet, scaling: Scaling) -> Result<Vec<f64>> {
    match scaling {
        Scaling::Canonical => Ok(model.scale_weights(model.m() as f64)),
        Scaling::Tilde => {
            if !zs.all_real(0.0) {
                return Err(Error::TildeNeedsRealPoints);
            }
            model
                .eigenvalues()
                .iter()
                .enumerate()
                .map(|(index, &l)| {
                    let v = zs.b(C64::new(l, 0.0)).re;
                    if v > 0.0 { Ok(v) } else { Err(Error::TildeNotPositive { index }) }
                })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{cvec, real_cvec};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn build_and_reject() {
        assert_eq!(SpectralModel::new(vec![0.0, 1.0, 2.0, 3.0], 1, Some(1e-8)).unwrap().n(), 4);
        assert_eq!(SpectralModel::new(vec![], 1, Some(1e-8)), Err(Error::EmptySpectrum));
        assert_eq!(SpectralModel::new(vec![0.5], 3, Some(1e-8)).unwrap().n(), 1);
        assert_eq!(SpectralModel::new(vec![1.0], 0, None), Err(Error::InvalidOrder(0)));
        assert!(matches!(
            SpectralModel::new(vec![1.0, f64::NAN], 1, None),
            Err(Error::NonFiniteEigenvalue { index: 1 })
        ));
    }

    #[test]
    fn scale_inner_examples() {
        let m = SpectralModel::new(vec![0.0, 0.0], 2, None).unwrap();
        let f = cvec(&[c(1.0, 0.0), c(0.0, 1.0)]);
        assert!((m.scale_inner(0, &f, &f).unwrap() - c(2.0, 0.0)).norm() < 1e-15);
        let m = SpectralModel::new(vec![0.0], 4, None).unwrap();
        let one = real_cvec(&[1.0]);
        assert!((m.scale_inner(1, &one, &one).unwrap() - c(1.0, 0.0)).norm() < 1e-15);
        let m = SpectralModel::new(vec![1.0, 3.0], 1, None).unwrap();
        let f = real_cvec(&[1.0, 1.0]);
        // direct sum 1/2^2 + 1/4^2
        let want = 1.0 / 4.0 + 1.0 / 16.0;
        assert!((m.scale_inner(-2, &f, &f).unwrap().re - want).abs() < 1e-15);
        assert!(m.scale_inner(0, &f, &real_cvec(&[1.0])).is_err());
    }

    #[test]
    fn scale_power_examples() {
        let m = SpectralModel::new(vec![0.0, 1.0], 2, None).unwrap();
        let f = real_cvec(&[1.0, 1.0]);
        assert_eq!(m.apply_scale_power(0.0, &f).unwrap(), f);
        let got = m.apply_scale_power(0.5, &f).unwrap();
        assert!((got - real_cvec(&[1.0, 2.0])).norm() < 1e-15);
    }

    #[test]
    fn resolvent_examples() {
        let m = SpectralModel::new(vec![0.0, 1.0], 1, None).unwrap();
        let f = real_cvec(&[1.0, 1.0]);
        let got = m.resolvent(c(-1.0, 0.0), &f).unwrap();
        assert!((got - real_cvec(&[1.0, 0.5])).norm() < 1e-15);
        assert!(matches!(m.resolvent(c(0.0, 0.0), &f), Err(Error::SpectralCollision(_))));
    }

    #[test]
    fn tilde_inverse_examples() {
        let m = SpectralModel::new(vec![0.0], 2, None).unwrap();
        let zs = RegularSet::new(&m, vec![c(-1.0, 0.0), c(-2.0, 0.0)]).unwrap();
        let got = tilde_p_apply(&m, &zs, &real_cvec(&[1.0]), true).unwrap();
        // 1/((0+1)(0+2))
        assert!((got[0] - c(0.5, 0.0)).norm() < 1e-15);

        let m1 = SpectralModel::new(vec![0.0, 2.0, 5.0], 1, None).unwrap();
        let zs1 = RegularSet::new(&m1, vec![c(1.0, 0.5)]).unwrap();
        let f = cvec(&[c(1.0, 2.0), c(-1.0, 0.0), c(0.0, 3.0)]);
        let a = tilde_p_apply(&m1, &zs1, &f, true).unwrap();
        let b = m1.resolvent(c(1.0, 0.5), &f).unwrap();
        assert!((a - b).norm() < 1e-15);
    }

    #[test]
    fn p_of_l_examples() {
        let m = SpectralModel::new(vec![0.0], 1, None).unwrap();
        let zs = RegularSet::new(&m, vec![c(-1.0, 0.0)]).unwrap();
        // (0+1)/(0-(-1))
        assert!((p_of_l(&m, &zs, Scaling::Canonical).unwrap()[0] - c(1.0, 0.0)).norm() < 1e-15);
        let m = SpectralModel::new(vec![0.0, 3.0, 7.0], 2, None).unwrap();
        let zs = RegularSet::new(&m, vec![c(-1.0, 0.0), c(-2.5, 0.0)]).unwrap();
        assert!(p_of_l(&m, &zs, Scaling::Tilde).unwrap().iter().all(|p| *p == c(1.0, 0.0)));
    }

    #[test]
    fn regular_set_rejections() {
        let m = SpectralModel::new(vec![0.0, 1.0], 2, None).unwrap();
        assert!(matches!(
            RegularSet::new(&m, vec![c(-1.0, 0.0), c(-1.0, 0.0)]),
            Err(Error::DuplicateRegularPoint(0, 1))
        ));
        assert!(matches!(RegularSet::new(&m, vec![c(-1.0, 0.0)]), Err(Error::RegularSetSize { .. })));
        assert!(matches!(
            RegularSet::new(&m, vec![c(1.0, 0.0), c(-1.0, 0.0)]),
            Err(Error::SpectralCollision(_))
        ));
        let zs = RegularSet::new(&m, vec![c(-1.0, 0.0), c(-2.0, 0.0)]).unwrap();
        assert_eq!(zs.b_diag(), &[c(1.0, 0.0), c(-1.0, 0.0)]);
    }

    #[test]
    fn tilde_weight_needs_positivity() {
        let m = SpectralModel::new(vec![0.0, 1.0], 1, None).unwrap();
        let zs = RegularSet::new(&m, vec![c(0.5, 0.0)]).unwrap();
        assert!(matches!(weight_of_l(&m, &zs, Scaling::Tilde), Err(Error::TildeNotPositive { .. })));
        let zs = RegularSet::new(&m, vec![c(0.5, 1.0)]).unwrap();
        assert_eq!(weight_of_l(&m, &zs, Scaling::Tilde), Err(Error::TildeNeedsRealPoints));
    }
}
