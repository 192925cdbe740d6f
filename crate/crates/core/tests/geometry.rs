use igc_core::exp_manifold::{
    chart_m, chart_s, cumulant, cumulant_gradient, cumulant_gradient_derivative, divergence,
    divergence_at, divergence_directional_derivative, e_convergence_diagnostic, kl, patch_e,
    patch_m, pythagorean_check, transition_e, transition_m, transport_e, transport_m, EChartPoint,
};
use igc_core::hilbert::{
    embed_sqrt, hermite_transport_demo, hilbert_transport, lift, sphere_chart, sphere_patch,
    sphere_transport, unlift,
};
use igc_core::random;
use igc_core::{expect, CotangentVector, Density, HilbertVector, Measure, RandomVariable, TangentVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn sup_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

struct Instance {
    p: Density,
    q: Density,
    r: Density,
    u: TangentVector,
    w: TangentVector,
}

fn instance(seed: u64, n: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = Measure::counting_n(n).unwrap();
    let p = random::density(&base, &mut rng, 1.0);
    let q = random::density(&base, &mut rng, 1.0);
    let r = random::density(&base, &mut rng, 1.0);
    let u = random::tangent(&p, &mut rng, 1.0);
    let w = random::tangent(&p, &mut rng, 1.0);
    Instance { p, q, r, u, w }
}

#[test]
fn gradient_derivative_matches_finite_differences() {
    let s = instance(1, 9);
    let h = 1e-5;
    let exact = cumulant_gradient_derivative(&s.p, &s.u, &s.w).unwrap();
    let shifted = |t: f64| {
        let coord = TangentVector::centered(s.p.clone(), s.u.rv().lin_comb(1.0, s.w.rv(), t).unwrap()).unwrap();
        cumulant_gradient(&s.p, &coord).unwrap()
    };
    let (plus, minus) = (shifted(h), shifted(-h));
    let fd: Vec<f64> = plus.values().iter().zip(minus.values()).map(|(a, b)| (a - b) / (2.0 * h)).collect();
    assert!(sup_gap(&fd, exact.values()) < 1e-8);
}

#[test]
fn divergence_derivative_matches_finite_differences() {
    let s = instance(2, 7);
    let q = patch_e(&s.p, &s.u).unwrap();
    let exact = divergence_directional_derivative(&s.p, &q, &s.r, &s.w).unwrap();
    let h = 1e-5;
    let d = |t: f64| {
        let coord = TangentVector::centered(s.p.clone(), s.u.rv().lin_comb(1.0, s.w.rv(), t).unwrap()).unwrap();
        kl(&patch_e(&s.p, &coord).unwrap(), &s.r).unwrap()
    };
    let fd = (d(h) - d(-h)) / (2.0 * h);
    assert!((fd - exact).abs() <= 1e-7 * exact.abs().max(1.0));
}

#[test]
fn e_convergence_flags() {
    let s = instance(3, 6);
    let approaching: Vec<Density> = (1..=6)
        .map(|k| s.q.mixture(&s.p, 1.0 - 0.5f64.powi(k)).unwrap())
        .collect();
    let table = e_convergence_diagnostic(&approaching, &s.p, &[1.0, 2.0, 4.0]).unwrap();
    assert!(!table.flagged());
    let away: Vec<Density> = approaching.into_iter().rev().collect();
    let table = e_convergence_diagnostic(&away, &s.p, &[1.0, 2.0]).unwrap();
    assert_eq!(table.non_convergent_alphas, vec![1.0, 2.0]);
    assert!(e_convergence_diagnostic(&away, &s.p, &[0.5]).is_err());
}

#[test]
fn hermite_basis_stays_orthogonal() {
    let base = Measure::gauss_hermite(40).unwrap();
    let y = RandomVariable::from_fn(base, |x| (x + 0.3 * x * x * x) / (1.0f64 + 0.3 * 6.0 + 0.09 * 15.0).sqrt())
        .unwrap();
    let report = hermite_transport_demo(&y, 8).unwrap();
    assert!(report.max_off_diagonal < 1e-9);
    assert!(report.max_diagonal_error < 1e-9);
    assert!(report.max_tangency < 1e-9);
}

#[test]
fn sphere_transport_matches_hilbert_transport() {
    let s = instance(4, 8);
    let u = HilbertVector::centered(s.p.clone(), s.u.rv().clone()).unwrap();
    let via_sphere = unlift(&sphere_transport(&embed_sqrt(&s.q), &lift(&u)).unwrap()).unwrap();
    let direct = hilbert_transport(&s.q, &u).unwrap();
    assert!(sup_gap(via_sphere.values(), direct.values()) < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn charts_invert_patches(seed in any::<u64>(), n in 2usize..20) {
        let s = instance(seed, n);
        let q = patch_e(&s.p, &s.u).unwrap();
        let back = chart_s(&s.p, &q).unwrap();
        prop_assert!(sup_gap(back.values(), s.u.values()) < 1e-10);
        let point = EChartPoint::new(s.u.clone()).unwrap();
        prop_assert!((point.cumulant() - cumulant(&s.p, &s.u).unwrap()).abs() < 1e-15);

        let eta = chart_m(&s.p, &s.q.as_rv()).unwrap();
        prop_assert!(sup_gap(patch_m(&s.p, &eta).values(), s.q.values()) < 1e-14);
    }

    #[test]
    fn transitions_agree_with_charts(seed in any::<u64>(), n in 2usize..20) {
        let s = instance(seed, n);
        let target = patch_e(&s.p, &s.u).unwrap();
        let moved = transition_e(&s.p, &s.q, &s.u).unwrap();
        prop_assert!(sup_gap(moved.values(), chart_s(&s.q, &target).unwrap().values()) < 1e-10);

        let eta = chart_m(&s.p, &s.r.as_rv()).unwrap();
        let moved = transition_m(&s.p, &s.q, &eta).unwrap();
        let direct = chart_m(&s.q, &s.r.as_rv()).unwrap();
        prop_assert!(sup_gap(moved.values(), direct.values()) < 1e-10);
    }

    #[test]
    fn transports_are_dual(seed in any::<u64>(), n in 2usize..20) {
        let s = instance(seed, n);
        let v = CotangentVector::centered(s.p.clone(), s.w.rv().clone()).unwrap();
        let before = expect(&s.p, &s.u.rv().mul(v.rv()).unwrap()).unwrap();
        let ue = transport_e(&s.p, &s.q, &s.u).unwrap();
        let vm = transport_m(&s.p, &s.q, &v).unwrap();
        let after = expect(&s.q, &ue.rv().mul(vm.rv()).unwrap()).unwrap();
        prop_assert!((before - after).abs() <= 1e-12 * before.abs().max(1.0));
    }

    #[test]
    fn divergence_identities(seed in any::<u64>(), n in 2usize..20) {
        let s = instance(seed, n);
        let d = divergence(&s.q, &s.r).unwrap();
        prop_assert!(d.direct >= 0.0);
        prop_assert!((d.direct - d.bregman).abs() < 1e-10);
        let centered = divergence_at(&s.p, &s.q, &s.r).unwrap();
        prop_assert!((centered.bregman - d.direct).abs() < 1e-10);
        let py = pythagorean_check(&s.p, &s.q, &s.r).unwrap();
        prop_assert!(py.defect.abs() < 1e-10);
    }

    #[test]
    fn sphere_chart_round_trip(seed in any::<u64>(), n in 2usize..20) {
        let s = instance(seed, n);
        let x = embed_sqrt(&s.p);
        let y = embed_sqrt(&s.q);
        let v = sphere_chart(&x, &y).unwrap();
        let back = sphere_patch(&v).unwrap();
        prop_assert!(sup_gap(back.values(), y.values()) < 1e-12);
    }

    #[test]
    fn hilbert_transport_is_isometric(seed in any::<u64>(), n in 2usize..40) {
        let s = instance(seed, n);
        let u = HilbertVector::centered(s.p.clone(), s.u.rv().clone()).unwrap();
        let v = HilbertVector::centered(s.p.clone(), s.w.rv().clone()).unwrap();
        let inner = |a: &HilbertVector, b: &HilbertVector| expect(a.at(), &a.rv().mul(b.rv()).unwrap()).unwrap();
        let (tu, tv) = (hilbert_transport(&s.q, &u).unwrap(), hilbert_transport(&s.q, &v).unwrap());
        prop_assert!((inner(&tu, &tv) - inner(&u, &v)).abs() < 1e-12);
        prop_assert!(expect(&s.q, tu.rv()).unwrap().abs() < 1e-12);
    }
}
