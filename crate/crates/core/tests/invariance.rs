use std::sync::Arc;

use aetomo::adjoint::{sigma_degree, Objective};
use aetomo::fem::{FunctionSpace, InnerProductKind, LinearSolver, ScalarField};
use aetomo::forward::{generate_data, BcSet, DataSpec};
use aetomo::mesh::{generate_disk_mesh, Mesh};
use aetomo::phantom::Phantom;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn objective_on(mesh: Mesh, s: u8) -> Objective {
    let space = FunctionSpace::new(Arc::new(mesh), sigma_degree(s).unwrap());
    let spec = DataSpec { fine_h: 0.05, noise_level: 0.0, seed: 0, solver: LinearSolver::default() };
    let truth = Phantom::heart_lung();
    let data = generate_data(|x, y| truth.eval(x, y), &BcSet::Bc3.conditions(), &space, &spec).unwrap();
    Objective::new(&data, 0.1, s, 1.0, LinearSolver::default()).unwrap()
}

/// Renumbers vertices, shuffles the triangle list and rotates each
/// triangle's local vertex order (keeping orientation).
fn shuffled(mesh: &Mesh, rng: &mut impl Rng) -> Mesh {
    let nv = mesh.num_vertices();
    let mut new_of: Vec<usize> = (0..nv).collect();
    new_of.shuffle(rng);
    let mut vertices = vec![[0.0; 2]; nv];
    for (old, &new) in new_of.iter().enumerate() {
        vertices[new] = mesh.vertices()[old];
    }
    let mut triangles: Vec<[usize; 3]> = mesh
        .triangles()
        .iter()
        .map(|t| {
            let t = t.map(|v| new_of[v]);
            let k = rng.random_range(0..3);
            [t[k], t[(k + 1) % 3], t[(k + 2) % 3]]
        })
        .collect();
    triangles.shuffle(rng);
    let boundary = mesh.boundary_vertices().iter().map(|&v| new_of[v]).collect();
    Mesh::from_parts(vertices, triangles, boundary, mesh.target_h()).unwrap()
}

#[test]
fn cost_does_not_depend_on_dof_numbering() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let sigma = |x: f64, y: f64| 1.0 + 0.4 * (2.0 * x).sin() * (1.5 * y).cos();
    for s in [0u8, 1] {
        let base = generate_disk_mesh(0.1).unwrap();
        let perm = shuffled(&base, &mut rng);
        let a = objective_on(base, s);
        let b = objective_on(perm, s);
        let ja = a.cost(&ScalarField::interpolate(a.sigma_space().clone(), sigma)).unwrap();
        let jb = b.cost(&ScalarField::interpolate(b.sigma_space().clone(), sigma)).unwrap();
        assert!((ja - jb).abs() <= 1e-10 * ja, "s={s}: {ja} vs {jb}");
    }
}

fn random_field(space: &Arc<FunctionSpace>, rng: &mut impl Rng, zero_trace: bool) -> ScalarField {
    let c: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut f = ScalarField::interpolate(space.clone(), |x, y| {
        c[0] + c[1] * x + c[2] * y + c[3] * (3.0 * x * y).sin() + c[4] * (2.0 * y).cos() + c[5] * x * x
    });
    if zero_trace {
        let bd = space.boundary_dofs().to_vec();
        for d in bd {
            f.coeffs_mut()[d] = 0.0;
        }
    }
    f
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// ⟨g, φ⟩_X = Ĵ'(σ)φ for the representative g in both inner products.
#[test]
fn gradients_satisfy_the_riesz_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for s in [0u8, 1] {
        let obj = objective_on(generate_disk_mesh(0.1).unwrap(), s);
        let space = obj.sigma_space().clone();
        let sigma = ScalarField::interpolate(space.clone(), |x, y| 1.1 + 0.2 * x * y);
        let state = obj.evaluate(&sigma).unwrap();
        let grad = obj.gradient(&state).unwrap();
        for _ in 0..10 {
            // s = 1 gradients vanish on the boundary, so only test
            // directions in H¹₀ there
            let phi = random_field(&space, &mut rng, s == 1);
            let b_phi: f64 = grad.derivative.iter().zip(phi.coeffs()).map(|(b, p)| b * p).sum();
            let l2 = obj.gram().inner(&grad.l2, &phi, InnerProductKind::L2).unwrap();
            assert!(rel(l2, b_phi) <= 1e-8, "s={s}: L² {l2} vs {b_phi}");
            if let Some(h1) = &grad.h1 {
                let v = obj.gram().inner(h1, &phi, InnerProductKind::H1).unwrap();
                assert!(rel(v, b_phi) <= 1e-8, "H¹ {v} vs {b_phi}");
            }
        }
    }
}
