//! Solves the forward problem for the disk inclusion and prints the interior
//! power densities and the determinant of the two potential gradients.

use std::sync::Arc;

use aetomo::fem::{Degree, FunctionSpace};
use aetomo::forward::{determinant_diagnostic, power_density, solve_forward, BcSet};
use aetomo::mesh::generate_disk_mesh;
use aetomo::phantom::Phantom;

fn main() -> aetomo::Result<()> {
    let mesh = Arc::new(generate_disk_mesh(0.03)?);
    let p2 = FunctionSpace::new(mesh.clone(), Degree::P2);
    let p1 = FunctionSpace::new(mesh, Degree::P1);
    let sigma = Phantom::disk().interpolate(&p1);
    let mut potentials = Vec::new();
    for (i, bc) in BcSet::Bc1.conditions().iter().enumerate() {
        let u = solve_forward(&sigma, bc, &p2)?;
        let h = power_density(&sigma, &u)?;
        let (lo, hi) = h.coeffs().iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
        println!("H{}: min {lo:.4}  max {hi:.4}", i + 1);
        potentials.push(u);
    }
    let det = determinant_diagnostic(&potentials[0], &potentials[1])?;
    println!("min det[∇u1, ∇u2] = {:.4}", det.iter().cloned().fold(f64::INFINITY, f64::min));
    Ok(())
}
