use std::sync::{Arc, OnceLock};

use aetomo::fem::{Degree, FunctionSpace, Gram, InnerProductKind, ScalarField};
use aetomo::forward::{add_noise, power_density, BcSet};
use aetomo::mesh::{generate_disk_mesh, Mesh};
use aetomo::optimizer::{armijo_search, hager_zhang_beta, project_box, ArmijoParams, Beta, Bounds, Problem};
use aetomo::phantom::Phantom;
use proptest::prelude::*;

fn mesh() -> &'static Arc<Mesh> {
    static MESH: OnceLock<Arc<Mesh>> = OnceLock::new();
    MESH.get_or_init(|| Arc::new(generate_disk_mesh(0.1).unwrap()))
}

fn p2() -> &'static Arc<FunctionSpace> {
    static SPACE: OnceLock<Arc<FunctionSpace>> = OnceLock::new();
    SPACE.get_or_init(|| FunctionSpace::new(mesh().clone(), Degree::P2))
}

fn point_in_disk(max_r: f64) -> impl Strategy<Value = [f64; 2]> {
    (0.0..max_r, 0.0..std::f64::consts::TAU).prop_map(|(r, t): (f64, f64)| [r * t.cos(), r * t.sin()])
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Quadratic {
    c: Vec<f64>,
    t: Vec<f64>,
}

impl Problem for Quadratic {
    type State = ();
    fn evaluate(&self, x: &[f64]) -> aetomo::Result<(f64, ())> {
        let j = x.iter().zip(&self.c).zip(&self.t).map(|((x, c), t)| 0.5 * c * (x - t).powi(2)).sum();
        Ok((j, ()))
    }
    fn gradient(&self, x: &[f64], _: &()) -> aetomo::Result<Vec<f64>> {
        Ok(x.iter().zip(&self.c).zip(&self.t).map(|((x, c), t)| c * (x - t)).collect())
    }
    fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        euclid(a, b)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn located_points_are_reproduced(p in point_in_disk(0.995)) {
        let loc = mesh().locate_point(p).unwrap();
        prop_assert!(loc.bary.iter().all(|&l| l >= -1e-10));
        prop_assert!((loc.bary.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let q = mesh().map_to_physical(loc.triangle, loc.bary);
        prop_assert!((q[0] - p[0]).abs() < 1e-12 && (q[1] - p[1]).abs() < 1e-12);
    }

    #[test]
    fn quadratics_are_interpolated_exactly_by_p2(
        c in prop::array::uniform6(-2.0f64..2.0),
        p in point_in_disk(0.98),
    ) {
        let f = |x: f64, y: f64| c[0] + c[1] * x + c[2] * y + c[3] * x * x + c[4] * x * y + c[5] * y * y;
        let u = ScalarField::interpolate(p2().clone(), f);
        prop_assert!((u.eval_at(p).unwrap() - f(p[0], p[1])).abs() < 1e-11);
    }

    #[test]
    fn mass_matrix_is_positive(coeffs in prop::collection::vec(-1.0f64..1.0, 8)) {
        // a random smooth field has a positive squared L² norm and
        // ⟨a, b⟩ = ⟨b, a⟩
        let gram = gram();
        let f = ScalarField::interpolate(gram.space().clone(), |x, y| {
            coeffs.iter().enumerate().map(|(k, c)| c * ((k as f64 + 1.0) * x + y * k as f64).cos()).sum()
        });
        let g = ScalarField::interpolate(gram.space().clone(), |x, y| x * y + coeffs[0]);
        prop_assert!(gram.norm(&f, InnerProductKind::L2).unwrap() > 0.0);
        let ab = gram.inner(&f, &g, InnerProductKind::H1).unwrap();
        let ba = gram.inner(&g, &f, InnerProductKind::H1).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-12 * ab.abs().max(1.0));
    }

    #[test]
    fn power_density_is_linear_in_sigma(c in 0.1f64..5.0, k in 0.5f64..3.0) {
        let u = ScalarField::interpolate(p2().clone(), |x, y| (k * x).sin() * y + x);
        let s = ScalarField::constant(p2().clone(), 1.0);
        let sc = ScalarField::constant(p2().clone(), c);
        let h = power_density(&s, &u).unwrap();
        let hc = power_density(&sc, &u).unwrap();
        for (a, b) in h.coeffs().iter().zip(hc.coeffs()) {
            prop_assert!((c * a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn noise_is_deterministic_and_vanishes_at_zero(seed in any::<u64>(), delta in 0.0f64..0.5) {
        let h = ScalarField::constant(p2().clone(), 2.0);
        let a = add_noise(&h, delta, seed).unwrap();
        let b = add_noise(&h, delta, seed).unwrap();
        prop_assert_eq!(a.coeffs(), b.coeffs());
        let clean = add_noise(&h, 0.0, seed).unwrap();
        prop_assert_eq!(clean.coeffs(), h.coeffs());
    }

    #[test]
    fn bundled_phantoms_take_tabulated_values(p in point_in_disk(1.0)) {
        for ph in [Phantom::disk(), Phantom::heart_lung(), Phantom::rotated_rect(), Phantom::composite()] {
            let v = ph.eval(p[0], p[1]);
            prop_assert!([0.5, 1.0, 2.0, 3.0].contains(&v), "{} gives {v}", ph.name);
        }
    }

    #[test]
    fn third_bc3_trace_combines_the_bc2_traces(theta in 0.0f64..std::f64::consts::TAU) {
        let f1 = BcSet::Bc2.eval_boundary(0, theta).unwrap();
        let f2 = BcSet::Bc2.eval_boundary(1, theta).unwrap();
        let f3 = BcSet::Bc3.eval_boundary(2, theta).unwrap();
        prop_assert!((f3 - (f1 + f2) / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn projection_is_idempotent_and_keeps_feasible_values(x in prop::collection::vec(-10.0f64..10.0, 1..40)) {
        let b = Bounds::new(0.01, 4.0).unwrap();
        let p = project_box(&x, b);
        prop_assert_eq!(project_box(&p, b), p.clone());
        for (xi, pi) in x.iter().zip(&p) {
            prop_assert!((0.01..=4.0).contains(pi));
            if (0.01..=4.0).contains(xi) {
                prop_assert_eq!(xi.to_bits(), pi.to_bits());
            }
        }
    }

    /// Hager and Zhang's bound ⟨d₊, g₊⟩ ≤ −(7/8)‖g₊‖² holds for any d with ⟨d, y⟩ ≠ 0.
    #[test]
    fn hager_zhang_direction_is_sufficiently_descending(
        g in prop::collection::vec(-1.0f64..1.0, 5),
        gn in prop::collection::vec(-1.0f64..1.0, 5),
        d in prop::collection::vec(-1.0f64..1.0, 5),
    ) {
        if let Beta::Value(beta) = hager_zhang_beta(&g, &gn, &d, euclid, 1e-6) {
            let dn: Vec<f64> = gn.iter().zip(&d).map(|(a, b)| -a + beta * b).collect();
            let gg = euclid(&gn, &gn);
            prop_assert!(euclid(&dn, &gn) <= -0.875 * gg + 1e-9 * (1.0 + beta.abs()));
        }
    }

    #[test]
    fn armijo_steps_decrease_convex_quadratics(
        c in prop::collection::vec(0.1f64..10.0, 4),
        t in prop::collection::vec(0.5f64..3.0, 4),
        x in prop::collection::vec(0.5f64..3.0, 4),
        alpha_init in 0.01f64..100.0,
    ) {
        let q = Quadratic { c, t };
        let (f, ()) = q.evaluate(&x).unwrap();
        let g = q.gradient(&x, &()).unwrap();
        prop_assume!(euclid(&g, &g) > 1e-12);
        let d: Vec<f64> = g.iter().map(|v| -v).collect();
        let b = Bounds::new(0.01, 4.0).unwrap();
        let step = armijo_search(&q, &x, f, &g, &d, alpha_init, &ArmijoParams::default(), b).unwrap();
        prop_assert!(step.cost < f);
        prop_assert!(step.cost <= f + 0.1 * step.alpha * euclid(&g, &d));
        prop_assert!(step.x.iter().all(|v| (0.01..=4.0).contains(v)));
    }
}

fn gram() -> &'static Gram {
    static GRAM: OnceLock<Gram> = OnceLock::new();
    GRAM.get_or_init(|| Gram::new(&FunctionSpace::new(mesh().clone(), Degree::P1)))
}
