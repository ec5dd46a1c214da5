use peakmodel::extensions::{krein_resolvent, ClassicalTriple, PeakTriple, Triple};
use peakmodel::linalg::{hermitian_defect, hermitian_eigen, rel_diff_mat, rel_diff_vec};
use peakmodel::samples::{hermitian_setup, random_setup, Rng};
use peakmodel::{CMat, GramData, LinearRelationFD, PeakSpace, RegularSet, Scaling, SpectralModel, C64};
use proptest::prelude::*;

fn complex() -> impl Strategy<Value = C64> {
    (-6.0..6.0f64, -3.0..3.0f64).prop_map(|(a, b)| C64::new(a, b))
}

fn points(m: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec(complex(), m).prop_filter("separated", |z| {
        z.iter().enumerate().all(|(i, a)| z[..i].iter().all(|b| (a - b).norm() > 0.2))
    })
}

fn upper() -> impl Strategy<Value = C64> {
    (-5.0..5.0f64, 0.2..3.0f64).prop_map(|(a, b)| C64::new(a, b))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pf_weights_sum_to_zero((m, z) in (2usize..=5).prop_flat_map(|m| (Just(m), points(m)))) {
        let model = SpectralModel::new(vec![10.0, 11.0, 12.0], m, None).unwrap();
        let zs = RegularSet::new(&model, z).unwrap();
        let w = zs.pf_weights();
        let scale: f64 = w.iter().map(|x| x.norm()).sum();
        prop_assert!(w.iter().sum::<C64>().norm() <= 1e-10 * scale);
    }

    #[test]
    fn gram_is_hermitian_positive(seed in any::<u64>(), m in 1usize..=4, d in 1usize..=3, real in any::<bool>()) {
        let mut rng = Rng::new(seed);
        let s = random_setup(&mut rng, m, d, m * d + 5, real);
        let g = GramData::build(&s).unwrap();
        prop_assert!(hermitian_defect(&g.g) <= 1e-13 * g.g.norm());
        prop_assert!(hermitian_eigen(&g.g).0[0] > 0.0);
    }

    #[test]
    fn decomposition_reconstructs(seed in any::<u64>(), m in 1usize..=4, d in 1usize..=3) {
        let mut rng = Rng::new(seed);
        let g = GramData::build(&random_setup(&mut rng, m, d, m * d + 4, false)).unwrap();
        let xi = rng.cvec(m * d);
        let (c, perp) = g.decompose(&xi);
        prop_assert!(rel_diff_vec(&(&g.bhat * &c + &perp), &xi) <= 1e-12);
        prop_assert!((g.gb_star() * &perp).norm() <= 1e-9 * g.gb.norm() * xi.norm());
        if m > 1 {
            prop_assert!(g.c_functional(&(&g.bhat * &c)).norm() <= 1e-10 * (g.bhat.norm() * c.norm()));
        }
    }

    #[test]
    fn hermitian_weyl_symmetry(seed in any::<u64>(), m in 1usize..=3, d in 1usize..=2, z in upper()) {
        let mut rng = Rng::new(seed);
        let sp = PeakSpace::new(hermitian_setup(&mut rng, m, d, 2, Scaling::Canonical)).unwrap();
        prop_assume!(sp.is_hermitian());
        let h = PeakTriple { space: sp };
        let (a, b) = (h.weyl(z).unwrap(), h.weyl(z.conj()).unwrap());
        prop_assert!(rel_diff_mat(&b, &a.adjoint()) <= 1e-10);
        let im = (&a - a.adjoint()) / C64::new(0.0, 2.0);
        prop_assert!(hermitian_eigen(&im).0[0] >= -1e-10 * a.norm().max(1.0));
    }

    #[test]
    fn classical_resolvent_identity(seed in any::<u64>(), m in 1usize..=3, z in upper(), w in upper(), t in -3.0..3.0f64) {
        let mut rng = Rng::new(seed);
        let h = ClassicalTriple { setup: random_setup(&mut rng, m, 1, 8, false) };
        let theta = LinearRelationFD::graph(CMat::from_element(1, 1, C64::new(t, 0.0))).unwrap();
        let v = rng.cvec(8);
        let rw = krein_resolvent(&h, &theta, w, &v).unwrap();
        let lhs = krein_resolvent(&h, &theta, z, &v).unwrap() - &rw;
        let rhs = krein_resolvent(&h, &theta, z, &rw).unwrap() * (z - w);
        prop_assert!(rel_diff_vec(&lhs, &rhs) <= 1e-9);
    }

    #[test]
    fn relation_adjoint_is_involutive(seed in any::<u64>(), d in 1usize..=4) {
        let mut rng = Rng::new(seed);
        let t = LinearRelationFD::new(rng.cmat(d, d), rng.cmat(d, d)).unwrap();
        prop_assert!(t.adjoint().adjoint().distance(&t) <= 1e-9);
        let h = rng.cmat(d, d);
        let sa = LinearRelationFD::graph(&h + h.adjoint()).unwrap();
        prop_assert!(sa.is_self_adjoint(1e-10));
    }

    #[test]
    fn config_round_trip(eigs in prop::collection::vec(-20.0..20.0f64, 3..10), z in complex()) {
        let n = eigs.len();
        let phi: Vec<[f64; 2]> = (0..n).map(|i| [1.0 + i as f64, 0.5]).collect();
        let text = serde_json::json!({
            "model": {"eigenvalues": eigs}, "functionals": [phi], "m": 1, "d": 1, "Z": [[z.re, z.im]],
        }).to_string();
        let cfg = peakmodel::config::RunConfig::from_json(&text).unwrap();
        prop_assert_eq!(peakmodel::config::RunConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }
}
