//! P1 and P2 Dirichlet solves of Δu = 0 against u = sin(x) sinh(y).

use std::sync::Arc;

use aetomo::fem::{assemble_laplacian, l2_distance, solve_dirichlet, Degree, FunctionSpace, LinearSolver, ScalarField};
use aetomo::mesh::generate_disk_mesh;

fn main() -> aetomo::Result<()> {
    let exact = |x: f64, y: f64| x.sin() * y.sinh();
    for degree in [Degree::P1, Degree::P2] {
        let mut previous: Option<(f64, f64)> = None;
        println!("{degree:?}");
        for h in [0.2, 0.1, 0.05, 0.025] {
            let space = FunctionSpace::new(Arc::new(generate_disk_mesh(h)?), degree);
            let g = ScalarField::interpolate(space.clone(), exact);
            let k = assemble_laplacian(&space);
            let u = solve_dirichlet(&k, &vec![0.0; space.num_dofs()], &space, &g, LinearSolver::default())?;
            let err = l2_distance(&u, exact);
            let size = space.mesh().mean_edge_length();
            match previous {
                Some((e0, s0)) => println!("  h = {size:.4}  L2 error {err:.3e}  order {:.2}", (e0 / err).ln() / (s0 / size).ln()),
                None => println!("  h = {size:.4}  L2 error {err:.3e}"),
            }
            previous = Some((err, size));
        }
    }
    Ok(())
}
