use std::sync::Arc;

use aetomo::fem::{
    assemble_laplacian, assemble_stiffness, l2_distance, project_between_meshes, solve_dirichlet, Degree,
    FunctionSpace, LinearSolver, ScalarField,
};
use aetomo::forward::power_density;
use aetomo::mesh::generate_disk_mesh;

fn space(h: f64, degree: Degree) -> Arc<FunctionSpace> {
    FunctionSpace::new(Arc::new(generate_disk_mesh(h).unwrap()), degree)
}

fn orders(errs: &[f64], sizes: &[f64]) -> Vec<f64> {
    (1..errs.len())
        .map(|i| (errs[i - 1] / errs[i]).ln() / (sizes[i - 1] / sizes[i]).ln())
        .collect()
}

#[test]
fn p2_harmonic_solution_converges_at_third_order() {
    let exact = |x: f64, y: f64| x.sin() * y.sinh();
    let mut errs = Vec::new();
    let mut sizes = Vec::new();
    for h in [0.2, 0.1, 0.05] {
        let v = space(h, Degree::P2);
        let g = ScalarField::interpolate(v.clone(), exact);
        let u = solve_dirichlet(&assemble_laplacian(&v), &vec![0.0; v.num_dofs()], &v, &g, LinearSolver::default())
            .unwrap();
        errs.push(l2_distance(&u, exact));
        sizes.push(v.mesh().mean_edge_length());
    }
    let p = orders(&errs, &sizes);
    println!("P2 errors {errs:?} orders {p:?}");
    assert!(p.iter().all(|&o| o >= 2.8), "{p:?}");
}

/// σ = 2 + x with u = ln(2 + x) solves ∇·(σ∇u) = 0 and has H = 1/(2 + x).
/// Data synthesized on finer meshes and projected onto a fixed coarse P1
/// space approaches the exact H there.
#[test]
fn projected_power_density_converges_under_data_refinement() {
    let coarse = space(0.1, Degree::P1);
    let exact_h = |x: f64, _: f64| 1.0 / (2.0 + x);
    let target = ScalarField::interpolate(coarse.clone(), exact_h);
    let mut errs = Vec::new();
    let mut sizes = Vec::new();
    for fine_h in [0.05, 0.025, 0.0125] {
        let p2 = space(fine_h, Degree::P2);
        let p1 = FunctionSpace::new(p2.mesh().clone(), Degree::P1);
        let sigma = ScalarField::interpolate(p1, |x, _| 2.0 + x);
        let a = assemble_stiffness(&p2, &sigma).unwrap();
        let g = ScalarField::interpolate(p2.clone(), |x, _| (2.0 + x).ln());
        let u = solve_dirichlet(&a, &vec![0.0; p2.num_dofs()], &p2, &g, LinearSolver::default()).unwrap();
        let h_fine = power_density(&sigma, &u).unwrap();
        let h = project_between_meshes(&h_fine, &coarse).unwrap();
        errs.push(h.max_abs_diff(&target));
        sizes.push(p2.mesh().mean_edge_length());
    }
    let p = orders(&errs, &sizes);
    println!("projection errors {errs:?} orders {p:?}");
    assert!(errs.windows(2).all(|w| w[1] < w[0]));
    assert!(p.iter().all(|&o| o >= 1.7), "{p:?}");
}
