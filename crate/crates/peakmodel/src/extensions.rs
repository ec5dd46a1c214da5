//! Boundary parameters as linear relations in ℂ^d and the Krein resolvent
//! engine shared by every triple.

use crate::linalg::{checked_inverse, hermitian_defect, null_space, range_basis, rank, smallest_singular, subspace_distance};
use crate::peak::{ExtendedVector, PeakSpace, PeakVector};
use crate::perturbation::{Setup, Variant};
use crate::{CMat, CVec, Error, Result, C64};

const REL_RANK_TOL: f64 = 1e-12;
const MAX_COND: f64 = 1e12;

/// `Θ = {(Cx, Dx) : x ∈ ℂ^p}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRelationFD {
    c: CMat,
    d: CMat,
}

impl LinearRelationFD {
    pub fn new(c: CMat, d: CMat) -> Result<Self> {
        if c.shape() != d.shape() {
            return Err(Error::InvalidRelation(format!("C is {:?} but D is {:?}", c.shape(), d.shape())));
        }
        let p = c.ncols();
        let stacked = stack(&c, &d);
        if p == 0 || rank(&stacked, REL_RANK_TOL) < p {
            return Err(Error::InvalidRelation("generators [C; D] are not linearly independent".into()));
        }
        Ok(Self { c, d })
    }

    /// `{0} x ℂ^d`, the parameter of the distinguished extension.
    pub fn zero_domain(d: usize) -> Self {
        Self { c: CMat::zeros(d, d), d: CMat::identity(d, d) }
    }

    /// Graph of a `d x d` matrix.
    pub fn graph(t: CMat) -> Result<Self> {
        let d = t.nrows();
        Self::new(CMat::identity(d, d), t)
    }

    pub fn c(&self) -> &CMat {
        &self.c
    }

    pub fn d_mat(&self) -> &CMat {
        &self.d
    }

    /// Dimension `d` of the boundary space.
    pub fn d(&self) -> usize {
        self.c.nrows()
    }

    /// Dimension of Θ as a subspace of ℂ^{2d}.
    pub fn dim(&self) -> usize {
        self.c.ncols()
    }

    pub fn basis(&self) -> CMat {
        stack(&self.c, &self.d)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let h = self.c.adjoint() * &self.d;
        let scale = (self.c.norm() * self.d.norm()).max(f64::MIN_POSITIVE);
        hermitian_defect(&h) <= tol * scale
    }

    pub fn is_self_adjoint(&self, tol: f64) -> bool {
        self.dim() == self.d() && self.is_symmetric(tol)
    }

    /// `Θ* = {(y, y') : C^* y' = D^* y}`.
    pub fn adjoint(&self) -> Self {
        let d = self.d();
        let mut k = CMat::zeros(self.dim(), 2 * d);
        k.view_mut((0, 0), (self.dim(), d)).copy_from(&(-self.d.adjoint()));
        k.view_mut((0, d), (self.dim(), d)).copy_from(&self.c.adjoint());
        let ns = null_space(&k, REL_RANK_TOL);
        if ns.ncols() == 0 {
            // Θ = ℂ^{2d}; its adjoint {0} has no range representation with p >= 1
            return Self { c: CMat::zeros(d, 1), d: CMat::zeros(d, 1) };
        }
        let c = ns.rows(0, d).into_owned();
        let dd = ns.rows(d, d).into_owned();
        Self { c, d: dd }
    }

    /// Sine of the largest principal angle between the two subspaces.
    pub fn distance(&self, other: &Self) -> f64 {
        subspace_distance(&self.basis(), &other.basis(), REL_RANK_TOL)
    }

    /// Relative distance of `(a, b)` from Θ.
    pub fn membership_residual(&self, a: &CVec, b: &CVec) -> f64 {
        let q = range_basis(&self.basis(), REL_RANK_TOL);
        let w = stack_vec(a, b);
        let r = &w - &q * (q.adjoint() * &w);
        r.norm() / w.norm().max(f64::MIN_POSITIVE)
    }
}

fn stack(a: &CMat, b: &CMat) -> CMat {
    let (r, c) = a.shape();
    let mut s = CMat::zeros(2 * r, c);
    s.view_mut((0, 0), (r, c)).copy_from(a);
    s.view_mut((r, 0), (r, c)).copy_from(b);
    s
}

fn stack_vec(a: &CVec, b: &CVec) -> CVec {
    CVec::from_fn(a.len() + b.len(), |i, _| if i < a.len() { a[i] } else { b[i - a.len()] })
}

/// `(Θ - M)^{-1} = C (D - M C)^{-1}`.
pub fn theta_minus_m_inverse(theta: &LinearRelationFD, m: &CMat, z: C64) -> Result<CMat> {
    if theta.dim() != theta.d() {
        return Err(Error::InvalidRelation(format!("need dim Θ = d = {}, got {}", theta.d(), theta.dim())));
    }
    if m.shape() != (theta.d(), theta.d()) {
        return Err(Error::DimensionMismatch { expected: theta.d(), got: m.nrows() });
    }
    let a = theta.d_mat() - m * theta.c();
    let inv = checked_inverse(&a, MAX_COND).ok_or(Error::NotInResolventSet(z))?;
    Ok(theta.c() * inv)
}

/// A boundary triple (or an isometric / formal one) with its distinguished
/// resolvent, γ-field and Weyl function, acting on flattened coordinates.
pub trait Triple {
    fn tag(&self) -> &'static str;
    fn d(&self) -> usize;
    fn dim(&self) -> usize;
    /// Inner product of the underlying Hilbert space.
    fn inner(&self, u: &CVec, v: &CVec) -> C64;
    fn r0(&self, z: C64, v: &CVec) -> Result<CVec>;
    fn gamma(&self, z: C64, c: &CVec) -> Result<CVec>;
    /// `γ(conj z)^* v`.
    fn gamma_adj(&self, z: C64, v: &CVec) -> Result<CVec>;
    fn weyl(&self, z: C64) -> Result<CMat>;
    /// False when the Krein formula is only formal.
    fn is_boundary_triple(&self) -> bool {
        true
    }
}

/// `R_0(z) v + γ(z) (Θ - M(z))^{-1} γ(conj z)^* v`.
pub fn krein_resolvent(h: &dyn Triple, theta: &LinearRelationFD, z: C64, v: &CVec) -> Result<CVec> {
    let base = h.r0(z, v)?;
    let c = krein_coefficient(h, theta, z, v)?;
    Ok(base + h.gamma(z, &c)?)
}

/// Boundary coefficient `(Θ - M(z))^{-1} γ(conj z)^* v` of the Krein formula.
pub fn krein_coefficient(h: &dyn Triple, theta: &LinearRelationFD, z: C64, v: &CVec) -> Result<CVec> {
    if theta.d() != h.d() {
        return Err(Error::DimensionMismatch { expected: h.d(), got: theta.d() });
    }
    if v.len() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), got: v.len() });
    }
    let k = theta_minus_m_inverse(theta, &h.weyl(z)?, z)?;
    Ok(k * h.gamma_adj(z, v)?)
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct DispersionPoint {
    pub z: C64,
    pub sigma_min: Option<f64>,
    pub skipped: Option<&'static str>,
}

/// Smallest singular value of `D - M(z) C` along a grid.
pub fn dispersion_scan(h: &dyn Triple, theta: &LinearRelationFD, grid: &[C64]) -> Vec<DispersionPoint> {
    grid.iter()
        .map(|&z| match h.weyl(z) {
            Ok(m) => DispersionPoint { z, sigma_min: Some(smallest_singular(&(theta.d_mat() - m * theta.c()))), skipped: None },
            Err(e) => DispersionPoint { z, sigma_min: None, skipped: Some(e.code()) },
        })
        .collect()
}

/// The classical triple of `L*_min` in `H_m`: `γ(z) = G_z`, `M = R`.
#[derive(Debug, Clone)]
pub struct ClassicalTriple {
    pub setup: Setup,
}

impl Triple for ClassicalTriple {
    fn tag(&self) -> &'static str {
        "classical"
    }
    fn d(&self) -> usize {
        self.setup.d()
    }
    fn dim(&self) -> usize {
        self.setup.n()
    }
    fn inner(&self, u: &CVec, v: &CVec) -> C64 {
        self.setup.inner_m(u, v)
    }
    fn r0(&self, z: C64, v: &CVec) -> Result<CVec> {
        self.setup.model.resolvent(z, v)
    }
    fn gamma(&self, z: C64, c: &CVec) -> Result<CVec> {
        self.setup.deficiency_combo(z, c, Variant::Big)
    }
    fn gamma_adj(&self, z: C64, v: &CVec) -> Result<CVec> {
        Ok(self.setup.pairing(&self.setup.model.resolvent(z, v)?))
    }
    fn weyl(&self, z: C64) -> Result<CMat> {
        self.setup.admissible_r(z)
    }
}

impl ClassicalTriple {
    /// Dense solve of `(L_Θ - w) f = v` in the coordinates `f = f# + G_zr(Cx)`:
    /// `(L - w) f# + (zr - w) G_zr(Cx) = v`, `<φ, f#> + R(zr) Cx = D x`.
    pub fn dense_resolvent(&self, theta: &LinearRelationFD, w: C64, v: &CVec) -> Result<CVec> {
        let s = &self.setup;
        let (n, p, d) = (s.n(), theta.dim(), s.d());
        let zr = C64::new(w.re, 1.0 + 2.0 * s.model.spectral_radius());
        let gc = s.deficiency_matrix(zr, Variant::Big)? * theta.c();
        let rc = s.admissible_r(zr)? * theta.c();
        let mut a = CMat::zeros(n + d, n + p);
        let mut rhs = CVec::zeros(n + d);
        for i in 0..n {
            a[(i, i)] = s.lambda(i) - w;
            rhs[i] = v[i];
        }
        a.view_mut((0, n), (n, p)).copy_from(&(&gc * (zr - w)));
        a.view_mut((n, 0), (d, n)).copy_from(&s.phi().adjoint());
        a.view_mut((n, n), (d, p)).copy_from(&(rc - theta.d_mat()));
        let inv = checked_inverse(&a, MAX_COND).ok_or(Error::NotInResolventSet(w))?;
        let sol = inv * rhs;
        let x = sol.rows(n, p).into_owned();
        Ok(sol.rows(0, n).into_owned() + gc * x)
    }

    /// Matrix of `L_Θ` for `Θ = graph θ` with invertible θ in the direct
    /// admissible mode: `L - P^{-1} φ θ^{-1} φ^*`.
    pub fn graph_operator(&self, theta: &CMat) -> Result<CMat> {
        let s = &self.setup;
        let tinv = checked_inverse(theta, MAX_COND).ok_or(Error::InvalidRelation("θ is not invertible".into()))?;
        let pphi = CMat::from_fn(s.n(), s.d(), |i, t| s.phi()[(i, t)] / s.weight()[i]);
        let mut a = -(pphi * tinv * s.phi().adjoint());
        for i in 0..s.n() {
            a[(i, i)] += s.lambda(i);
        }
        Ok(a)
    }
}

/// The triple of `L^*_0` in `H_0`: `γ(z) = ĝ_z`, `M = R`.
#[derive(Debug, Clone)]
pub struct ReferenceTriple {
    pub setup: Setup,
}

impl Triple for ReferenceTriple {
    fn tag(&self) -> &'static str {
        "reference"
    }
    fn d(&self) -> usize {
        self.setup.d()
    }
    fn dim(&self) -> usize {
        self.setup.n()
    }
    fn inner(&self, u: &CVec, v: &CVec) -> C64 {
        u.dotc(v)
    }
    fn r0(&self, z: C64, v: &CVec) -> Result<CVec> {
        self.setup.model.resolvent(z, v)
    }
    fn gamma(&self, z: C64, c: &CVec) -> Result<CVec> {
        self.setup.deficiency_combo(z, c, Variant::Hat)
    }
    fn gamma_adj(&self, z: C64, v: &CVec) -> Result<CVec> {
        Ok(self.setup.phi_hat().adjoint() * self.setup.model.resolvent(z, v)?)
    }
    fn weyl(&self, z: C64) -> Result<CMat> {
        self.setup.admissible_r(z)
    }
}

/// The peak triple `(ℂ^d, Γ~_0, Γ~_1)` for `A_max` in ℋ.
#[derive(Debug, Clone)]
pub struct PeakTriple {
    pub space: PeakSpace,
}

impl PeakTriple {
    fn split(&self, v: &CVec) -> PeakVector {
        PeakVector::from_flat(self.space.n(), v)
    }

    /// Explicit coordinates of the Krein output `(A_0 - z)^{-1} v ⊕ F_z(c')`.
    pub fn resolvent_ev(&self, theta: &LinearRelationFD, z: C64, v: &PeakVector) -> Result<ExtendedVector> {
        let c = krein_coefficient(self, theta, z, &v.to_flat())?;
        let y0 = self.space.a0_resolvent(z, v)?;
        Ok(self.space.dom_a0(&y0, z).add(&self.space.gamma_ev(z, &c)?))
    }
}

impl Triple for PeakTriple {
    fn tag(&self) -> &'static str {
        "peak"
    }
    fn d(&self) -> usize {
        self.space.d()
    }
    fn dim(&self) -> usize {
        self.space.n() + self.space.md()
    }
    fn inner(&self, u: &CVec, v: &CVec) -> C64 {
        self.space.inner(&self.split(u), &self.split(v))
    }
    fn r0(&self, z: C64, v: &CVec) -> Result<CVec> {
        Ok(self.space.a0_resolvent(z, &self.split(v))?.to_flat())
    }
    fn gamma(&self, z: C64, c: &CVec) -> Result<CVec> {
        Ok(self.space.gamma(z, c)?.to_flat())
    }
    fn gamma_adj(&self, z: C64, v: &CVec) -> Result<CVec> {
        self.space.gamma_adj(z, &self.split(v))
    }
    fn weyl(&self, z: C64) -> Result<CMat> {
        Ok(self.space.weyl(z)?.m)
    }
    fn is_boundary_triple(&self) -> bool {
        self.space.is_hermitian()
    }
}

/// The relation-branch triple `(ℂ^d, Γ~'_0, Γ~'_1)` for `B_max`, `m > 1`.
#[derive(Debug, Clone)]
pub struct BBranchTriple {
    pub space: PeakSpace,
}

impl BBranchTriple {
    pub fn new(space: PeakSpace) -> Result<Self> {
        if space.gram.m < 2 {
            return Err(Error::OrderTooSmall);
        }
        Ok(Self { space })
    }

    fn split(&self, v: &CVec) -> PeakVector {
        PeakVector::from_flat(self.space.n(), v)
    }

    pub fn resolvent_ev(&self, theta: &LinearRelationFD, z: C64, v: &PeakVector) -> Result<ExtendedVector> {
        let c = krein_coefficient(self, theta, z, &v.to_flat())?;
        Ok(self.space.b0_resolvent_ev(z, v)?.add(&self.space.gamma_b_ev(z, &c)?))
    }
}

impl Triple for BBranchTriple {
    fn tag(&self) -> &'static str {
        "b_branch"
    }
    fn d(&self) -> usize {
        self.space.d()
    }
    fn dim(&self) -> usize {
        self.space.n() + self.space.md()
    }
    fn inner(&self, u: &CVec, v: &CVec) -> C64 {
        self.space.inner(&self.split(u), &self.split(v))
    }
    fn r0(&self, z: C64, v: &CVec) -> Result<CVec> {
        Ok(self.space.b0_resolvent(z, &self.split(v))?.to_flat())
    }
    fn gamma(&self, z: C64, c: &CVec) -> Result<CVec> {
        Ok(self.space.gamma_b(z, c)?.to_flat())
    }
    fn gamma_adj(&self, z: C64, v: &CVec) -> Result<CVec> {
        self.space.gamma_b_adj_via_b0(z, &self.split(v))
    }
    fn weyl(&self, z: C64) -> Result<CMat> {
        self.space.weyl_b(z)
    }
}

/// Residuals of the graph check for a peak-type resolvent output.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct GraphResiduals {
    /// Relative distance of `Γ~ y` from Θ.
    pub boundary: f64,
    /// Relative ℋ norm of `(A_max - z) y - v`. For the relation branch the
    /// component in ℋ_⊥ (the multivalued part) is removed first.
    pub equation: f64,
}

pub fn peak_graph_residuals(
    space: &PeakSpace,
    theta: &LinearRelationFD,
    z: C64,
    v: &PeakVector,
    y: &ExtendedVector,
    relation_branch: bool,
) -> Result<GraphResiduals> {
    let (g0, g1) = space.boundary_gamma(y)?;
    let boundary = theta.membership_residual(&g0, &g1);
    let mut r = space.amax_apply(y)?.sub(&space.embed(y)?.scale(z)).sub(v);
    let ker = &space.gram.ker_gb_star;
    if relation_branch && ker.ncols() > 0 {
        // ℋ-orthogonal projection onto ℋ_⊥ = {(0, ker ξ)}
        let g = &space.gram.g;
        let a = ker.adjoint() * g * ker;
        let coef = a.lu().solve(&(ker.adjoint() * g * &r.xi)).unwrap_or_else(|| CVec::zeros(ker.ncols()));
        r.xi -= ker * coef;
    }
    let scale = space.norm(v).max(f64::MIN_POSITIVE);
    Ok(GraphResiduals { boundary, equation: space.norm(&r) / scale })
}
