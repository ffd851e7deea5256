mod common;

use common::lp_oracle;
use linpoly::elastostatics::{Matrix2, Vec2};
use linpoly::relaxation::{build_density, rationalize_decomposition, BurgersLattice};
use linpoly::self_energy::QuadraticSelfEnergy;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fixtures() -> Vec<(&'static str, BurgersLattice, QuadraticSelfEnergy)> {
    vec![
        ("square", BurgersLattice::square(1.5).unwrap(), QuadraticSelfEnergy::isotropic(0.3)),
        ("triangular", BurgersLattice::triangular(2.0).unwrap(), QuadraticSelfEnergy::isotropic(1.0)),
        (
            "oblique",
            BurgersLattice::new(vec![Vec2::E1, Vec2::new(0.3, 1.1)], 2.5).unwrap(),
            QuadraticSelfEnergy { form: Matrix2::new(1.0, 0.3, 0.3, 0.6) },
        ),
    ]
}

fn random_xi(rng: &mut ChaCha8Rng) -> Vec2 {
    Vec2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0))
}

#[test]
fn gauge_matches_brute_force_lp() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (name, lattice, psi) in fixtures() {
        let d = build_density(&lattice, |x| psi.eval(x)).unwrap();
        let truncated = lattice.with_radius(d.certified_radius());
        for _ in 0..100 {
            let xi = random_xi(&mut rng);
            let got = d.phi_eval(xi);
            let want = lp_oracle(&truncated, &|x| psi.eval(x), xi);
            assert!((got - want).abs() <= 1e-9 * want, "{name}: {got} vs {want}");
        }
    }
}

#[test]
fn decomposition_is_optimal_and_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for (_, lattice, psi) in fixtures() {
        let d = build_density(&lattice, |x| psi.eval(x)).unwrap();
        for _ in 0..100 {
            let xi = random_xi(&mut rng);
            let terms = d.decompose(xi).unwrap();
            assert!(terms.len() <= 2 && terms.iter().all(|t| t.weight >= 0.0));
            let rebuilt = terms.iter().fold(Vec2::ZERO, |a, t| a + t.burgers * t.weight);
            assert!((rebuilt - xi).norm() <= 1e-12 * xi.norm());
            let cost: f64 = terms.iter().map(|t| t.weight * t.psi).sum();
            assert!((cost - d.phi_eval(xi)).abs() <= 1e-12 * cost);
        }
    }
}

#[test]
fn hull_vertices_lie_on_the_unit_sphere_of_the_gauge() {
    for (_, lattice, psi) in fixtures() {
        let d = build_density(&lattice, |x| psi.eval(x)).unwrap();
        for v in d.hull_vertices() {
            assert!((d.phi_eval(v.point) - 1.0).abs() < 1e-12);
            assert!(d.phi_eval(v.burgers) <= v.psi * (1.0 + 1e-12));
        }
        for &g in lattice.generators() {
            assert!(d.phi_eval(g) <= psi.eval(g) * (1.0 + 1e-12));
        }
    }
}

#[test]
fn doubling_the_radius_changes_nothing() {
    for (_, lattice, psi) in fixtures() {
        let d = build_density(&lattice, |x| psi.eval(x)).unwrap();
        let wide = build_density(&lattice.with_radius(2.0 * d.certified_radius()), |x| psi.eval(x)).unwrap();
        for k in 0..64 {
            let nu = Vec2::from_angle(k as f64 * std::f64::consts::PI / 32.0 + 0.1);
            assert!((d.phi_eval(nu) - wide.phi_eval(nu)).abs() <= 1e-12 * d.phi_eval(nu));
        }
    }
}

#[test]
fn gauge_is_norm_equivalent() {
    for (_, lattice, psi) in fixtures() {
        let d = build_density(&lattice, |x| psi.eval(x)).unwrap();
        let values: Vec<f64> = (0..360).map(|k| d.phi_eval(Vec2::from_angle(k as f64 * std::f64::consts::PI / 180.0))).collect();
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(0.0, f64::max);
        assert!(lo > 0.0 && hi.is_finite());
    }
}

#[test]
fn rationalized_perturbation_is_bounded() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (_, lattice, psi) = fixtures().remove(2);
    let d = build_density(&lattice, |x| psi.eval(x)).unwrap();
    for _ in 0..100 {
        let xi = random_xi(&mut rng);
        let terms = d.decompose(xi).unwrap();
        let n = rng.gen_range(4..20);
        let Ok(r) = rationalize_decomposition(&terms, n) else { continue };
        assert_eq!(r.counts.iter().sum::<u64>(), n * n);
        let total: f64 = terms.iter().map(|t| t.weight).sum();
        let longest = terms.iter().map(|t| t.burgers.norm()).fold(0.0, f64::max);
        assert!((r.xi - xi).norm() <= longest * total / (n * n) as f64 + 1e-12);
    }
}

proptest! {
    #[test]
    fn gauge_is_one_homogeneous(x in -5.0f64..5.0, y in -5.0f64..5.0, s in 0.0f64..10.0) {
        for (_, lattice, psi) in fixtures() {
            let d = build_density(&lattice, |v| psi.eval(v)).unwrap();
            let xi = Vec2::new(x, y);
            prop_assert!((d.phi_eval(xi * s) - s * d.phi_eval(xi)).abs() <= 1e-12 * (1.0 + s * d.phi_eval(xi)));
        }
    }

    #[test]
    fn gauge_is_subadditive(a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0, e in -5.0f64..5.0) {
        for (_, lattice, psi) in fixtures() {
            let d = build_density(&lattice, |v| psi.eval(v)).unwrap();
            let (p, q) = (Vec2::new(a, b), Vec2::new(c, e));
            prop_assert!(d.phi_eval(p + q) <= d.phi_eval(p) + d.phi_eval(q) + 1e-12);
        }
    }
}
