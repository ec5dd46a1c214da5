//! Seeded generators for models, regular sets and functional families.

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::spectral::{RegularSet, Scaling, SpectralModel};
use crate::{AdmissibleMode, CMat, CVec, FunctionalFamily, Setup, C64};

pub struct Rng(ChaCha8Rng);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.0.gen_range(lo..hi)
    }

    pub fn index(&mut self, n: usize) -> usize {
        self.0.gen_range(0..n)
    }

    pub fn coin(&mut self) -> bool {
        self.0.gen_bool(0.5)
    }

    pub fn complex(&mut self) -> C64 {
        C64::new(self.uniform(-1.0, 1.0), self.uniform(-1.0, 1.0))
    }

    pub fn cvec(&mut self, n: usize) -> CVec {
        CVec::from_fn(n, |_, _| self.complex())
    }

    pub fn cmat(&mut self, r: usize, c: usize) -> CMat {
        CMat::from_fn(r, c, |_, _| self.complex())
    }

    pub fn unit_phase(&mut self) -> C64 {
        C64::from_polar(1.0, self.uniform(0.0, std::f64::consts::TAU))
    }
}

/// Sorted eigenvalues spread over `[-span, span]`.
pub fn random_spectrum(rng: &mut Rng, n: usize, span: f64) -> Vec<f64> {
    let mut e: Vec<f64> = (0..n).map(|_| rng.uniform(-span, span)).collect();
    e.sort_by(|a, b| a.partial_cmp(b).unwrap());
    e
}

/// `m` distinct points: complex ones off the axis, or real ones in the
/// resolvent set. With `below` the real points lie under the spectrum,
/// which keeps `∏(λ - z_j) > 0`.
pub fn random_points(rng: &mut Rng, model: &SpectralModel, m: usize, real: bool, below: bool) -> Vec<C64> {
    let lo = model.eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
    let mut out: Vec<C64> = Vec::with_capacity(m);
    while out.len() < m {
        let z = match (real, below) {
            (true, true) => C64::new(lo - 0.5 - rng.uniform(0.0, 3.0 * m as f64), 0.0),
            (true, false) => C64::new(rng.uniform(-6.0, 6.0), 0.0),
            _ => {
                let im = rng.uniform(0.5, 2.5) * if rng.coin() { 1.0 } else { -1.0 };
                C64::new(rng.uniform(-4.0, 4.0), im)
            }
        };
        if real && model.distance_to_spectrum(z) < 0.1 {
            continue;
        }
        let gap = if below { 1.0 } else { 0.3 };
        if out.iter().all(|w| (w - z).norm() > gap) {
            out.push(z);
        }
    }
    out
}

/// Sampled setups keep `cond 𝒢` below this; the Gram identities lose about
/// `cond 𝒢 * 1e-17` in relative accuracy.
pub const MAX_SAMPLE_COND: f64 = 1e6;

/// Generic setup: random spectrum on `[-5, 5]`, random complex functionals,
/// real points when `real` is set.
pub fn random_setup(rng: &mut Rng, m: usize, d: usize, n: usize, real: bool) -> Setup {
    random_setup_scaled(rng, m, d, n, real, Scaling::Canonical)
}

/// The tilde scaling always gets real points below the spectrum.
pub fn random_setup_scaled(rng: &mut Rng, m: usize, d: usize, n: usize, real: bool, scaling: Scaling) -> Setup {
    random_setup_cond(rng, m, d, n, real, scaling, MAX_SAMPLE_COND)
}

/// Redraws until `cond 𝒢 < max_cond`; panics after 100000 draws.
pub fn random_setup_cond(rng: &mut Rng, m: usize, d: usize, n: usize, real: bool, scaling: Scaling, max_cond: f64) -> Setup {
    let tilde = scaling == Scaling::Tilde;
    for _ in 0..100_000 {
        let model = SpectralModel::new(random_spectrum(rng, n, 5.0), m, None).unwrap();
        let z = random_points(rng, &model, m, real || tilde, tilde);
        let Ok(zs) = RegularSet::new(&model, z) else { continue };
        let phi = rng.cmat(n, d);
        let Ok(fam) = FunctionalFamily::new(phi, &model) else { continue };
        if let Ok(s) = Setup::new(model, zs, fam, scaling, AdmissibleMode::Direct) {
            if crate::GramData::build(&s).is_ok_and(|g| g.cond_g < max_cond) {
                return s;
            }
        }
    }
    panic!("no setup with m={m} d={d} n={n} and cond G < {max_cond:e}");
}

/// Setup with Hermitian `𝒢_Z`: real points `z_1 < .. < z_m`, and for each
/// `sigma` a block of `m + 1` eigenvalues interlacing them, weighted so that
/// `R(z_j) = 0` for every `j`. Extra eigenvalues carry no weight. The
/// functionals are finally mixed by an invertible `d x d` matrix.
pub fn hermitian_setup(rng: &mut Rng, m: usize, d: usize, pad: usize, scaling: Scaling) -> Setup {
    let z: Vec<f64> = (0..m).map(|j| 3.0 * j as f64 - 1.5 * m as f64 + rng.uniform(-0.8, 0.8)).collect();
    let mut eigs: Vec<f64> = Vec::new();
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for _ in 0..d {
        let mut lam = Vec::with_capacity(m + 1);
        lam.push(z[0] - rng.uniform(0.3, 2.5));
        for j in 1..m {
            lam.push(rng.uniform(z[j - 1] + 0.3, z[j] - 0.3));
        }
        lam.push(z[m - 1] + rng.uniform(0.3, 2.5));
        let start = eigs.len();
        eigs.extend(&lam);
        blocks.push((start..start + m + 1).collect());
    }
    for _ in 0..pad {
        eigs.push(rng.uniform(-8.0, 8.0));
    }
    let n = eigs.len();
    let model = SpectralModel::new(eigs.clone(), m, None).unwrap();
    let zs = RegularSet::new(&model, z.iter().map(|&x| C64::new(x, 0.0)).collect()).unwrap();
    let weight = crate::spectral::weight_of_l(&model, &zs, scaling).unwrap_or_else(|_| model.scale_weights(m as f64));
    let sign = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
    let mut phi = CMat::zeros(n, d);
    for (s, block) in blocks.iter().enumerate() {
        let k = rng.uniform(0.5, 2.0);
        for &i in block {
            let li = eigs[i];
            let num: f64 = z.iter().map(|zj| li - zj).product();
            let den: f64 = block.iter().filter(|&&t| t != i).map(|&t| eigs[t] - li).product();
            let w = sign * k * num / den;
            debug_assert!(w > 0.0);
            phi[(i, s)] = rng.unit_phase() * (w * weight[i]).sqrt();
        }
    }
    let mix = CMat::identity(d, d) + rng.cmat(d, d) * C64::new(0.3, 0.0);
    let phi = phi * mix;
    let fam = FunctionalFamily::new(phi, &model).unwrap();
    Setup::new(model, zs, fam, scaling, AdmissibleMode::Direct).unwrap()
}

/// Dirichlet second-difference matrix of size `n`: eigenvalues and the
/// eigenbasis coordinates of the unit vector at `site` (0-based).
pub fn laplacian_1d(n: usize) -> Vec<f64> {
    (1..=n)
        .map(|k| {
            let s = (k as f64 * std::f64::consts::PI / (2.0 * (n as f64 + 1.0))).sin();
            4.0 * s * s
        })
        .collect()
}

pub fn laplacian_delta(n: usize, site: usize) -> CVec {
    let h = n as f64 + 1.0;
    CVec::from_fn(n, |k, _| {
        let k = (k + 1) as f64;
        C64::new((2.0 / h).sqrt() * ((site as f64 + 1.0) * k * std::f64::consts::PI / h).sin(), 0.0)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::GramData;

    #[test]
    fn laplacian_matches_dense_eigenproblem() {
        let n = 7;
        let eigs = laplacian_1d(n);
        let a = CMat::from_fn(n, n, |i, j| {
            C64::new(if i == j { 2.0 } else if i.abs_diff(j) == 1 { -1.0 } else { 0.0 }, 0.0)
        });
        // column k of the eigenbasis is the transform of e_site, so
        // sum_k v_k(site) v_k(site') lambda_k = A[site, site']
        let v: Vec<CVec> = (0..n).map(|s| laplacian_delta(n, s)).collect();
        for s in 0..n {
            for t in 0..n {
                let got: C64 = (0..n).map(|k| v[s][k] * v[t][k] * eigs[k]).sum();
                assert!((got - a[(s, t)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn hermitian_generator_is_hermitian() {
        let mut rng = Rng::new(3);
        for (m, d) in [(1, 1), (2, 1), (3, 2), (4, 3)] {
            let s = hermitian_setup(&mut rng, m, d, 2, Scaling::Canonical);
            let r = GramData::build(&s).unwrap().hermiticity_report();
            assert!(r.gz_hermitian && r.gram_j_diagonal && r.z_all_real && r.r_constant_hermitian, "{m} {d} {r:?}");
        }
    }
}
