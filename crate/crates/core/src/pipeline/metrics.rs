//! Quality measures of a reconstruction against its ground truth.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{Degree, FunctionSpace, Gram, InnerProductKind, LinearSolver, QuadratureRule, ScalarField};
use crate::forward::{determinant_diagnostic, BoundaryCondition, ForwardSolver};
use crate::optimizer::{ReconstructionResult, Termination};
use crate::phantom::Phantom;

/// Extreme reconstructed value inside one primitive of the phantom: the
/// maximum for inclusions above the background, the minimum below it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InclusionPeak {
    pub primitive: usize,
    pub true_value: f64,
    pub peak: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rel_l2_error: f64,
    pub initial_rel_l2_error: f64,
    /// Largest reconstructed value inside inclusions brighter than the
    /// background; `None` if there are none.
    pub max_in_inclusion: Option<f64>,
    pub inclusions: Vec<InclusionPeak>,
    /// max |∇σ_rec| over elements touching a material interface.
    pub edge_sharpness: f64,
    pub min_det: f64,
    pub iterations: usize,
    pub termination: Termination,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub final_grad_norm: f64,
    pub projected_gradient_norm: f64,
    pub wall_time: f64,
}

/// ‖a − b‖_{L²} / ‖b‖_{L²} with the mass matrix of the common space.
pub fn relative_l2_error(gram: &Gram, a: &ScalarField, b: &ScalarField) -> Result<f64> {
    let diff: Vec<f64> = a.coeffs().iter().zip(b.coeffs()).map(|(x, y)| x - y).collect();
    let diff = a.with_coeffs(diff)?;
    Ok(gram.norm(&diff, InnerProductKind::L2)? / gram.norm(b, InnerProductKind::L2)?)
}

/// Peaks per primitive, using the phantom region of each dof point.
pub fn inclusion_peaks(phantom: &Phantom, sigma: &ScalarField) -> Vec<InclusionPeak> {
    let mut peaks: Vec<Option<f64>> = vec![None; phantom.primitives.len()];
    for (p, &v) in sigma.space().dof_coordinates().iter().zip(sigma.coeffs()) {
        if let Some(i) = phantom.region(p[0], p[1]) {
            let above = phantom.primitives[i].value() >= phantom.background;
            peaks[i] = Some(match peaks[i] {
                None => v,
                Some(c) if above => c.max(v),
                Some(c) => c.min(v),
            });
        }
    }
    peaks
        .into_iter()
        .enumerate()
        .filter_map(|(i, peak)| {
            let true_value = phantom.primitives[i].value();
            (true_value != phantom.background)
                .then_some(())
                .and(peak)
                .map(|peak| InclusionPeak { primitive: i, true_value, peak })
        })
        .collect()
}

pub fn max_in_inclusion(phantom: &Phantom, peaks: &[InclusionPeak]) -> Option<f64> {
    peaks
        .iter()
        .filter(|p| p.true_value > phantom.background)
        .map(|p| p.peak)
        .reduce(f64::max)
}

/// Cells whose quadrature or vertex points fall in different phantom
/// regions, together with every cell sharing a vertex with one of them.
pub fn interface_band(phantom: &Phantom, space: &FunctionSpace) -> Vec<bool> {
    let mesh = space.mesh();
    let rule = QuadratureRule::degree5();
    let nt = mesh.num_triangles();
    let straddles: Vec<bool> = (0..nt)
        .map(|t| {
            let tri = mesh.triangles()[t];
            let mut regions = tri
                .iter()
                .map(|&v| mesh.vertices()[v])
                .chain(rule.points.iter().map(|l| mesh.map_to_physical(t, *l)))
                .map(|p| phantom.eval(p[0], p[1]));
            let first = regions.next().unwrap_or(0.0);
            regions.any(|v| v != first)
        })
        .collect();
    let mut near = vec![false; mesh.num_vertices()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        if straddles[t] {
            for &v in tri {
                near[v] = true;
            }
        }
    }
    mesh.triangles().iter().map(|tri| tri.iter().any(|&v| near[v])).collect()
}

/// max |∇σ| at the degree-5 quadrature points of the interface band.
pub fn edge_sharpness(phantom: &Phantom, sigma: &ScalarField) -> f64 {
    let band = interface_band(phantom, sigma.space());
    let rule = QuadratureRule::degree5();
    band.iter()
        .enumerate()
        .filter(|(_, &b)| b)
        .flat_map(|(t, _)| {
            rule.points.iter().map(move |l| {
                let g = sigma.grad_in_cell(t, *l);
                g[0].hypot(g[1])
            })
        })
        .fold(0.0, f64::max)
}

/// Smallest det[∇u₁, ∇u₂] over the mesh for the first two excitations
/// solved at `sigma` with P2 potentials.
pub fn min_determinant(sigma: &ScalarField, bcs: &[BoundaryCondition], solver: LinearSolver) -> Result<f64> {
    if bcs.len() < 2 {
        return Err(Error::InvalidArgument("determinant needs two boundary conditions".into()));
    }
    let potential = match sigma.space().degree() {
        Degree::P2 => sigma.space().clone(),
        Degree::P1 => FunctionSpace::new(sigma.space().mesh().clone(), Degree::P2),
    };
    let fwd = ForwardSolver::new(sigma, &potential, solver)?;
    let u1 = fwd.solve(&bcs[0])?;
    let u2 = fwd.solve(&bcs[1])?;
    Ok(determinant_diagnostic(&u1, &u2)?.into_iter().fold(f64::INFINITY, f64::min))
}

/// Everything except timing, which the caller measures.
pub fn compute(
    phantom: &Phantom,
    result: &ReconstructionResult,
    initial: &ScalarField,
    gram: &Gram,
    bcs: &[BoundaryCondition],
    solver: LinearSolver,
    wall_time: f64,
) -> Result<Metrics> {
    let space: &Arc<FunctionSpace> = result.sigma.space();
    let truth = phantom.interpolate(space);
    let inclusions = inclusion_peaks(phantom, &result.sigma);
    Ok(Metrics {
        rel_l2_error: relative_l2_error(gram, &result.sigma, &truth)?,
        initial_rel_l2_error: relative_l2_error(gram, initial, &truth)?,
        max_in_inclusion: max_in_inclusion(phantom, &inclusions),
        inclusions,
        edge_sharpness: edge_sharpness(phantom, &result.sigma),
        min_det: min_determinant(&result.sigma, bcs, solver)?,
        iterations: result.history.len(),
        termination: result.termination,
        initial_cost: result.initial_cost,
        final_cost: result.final_cost,
        final_grad_norm: result.final_grad_norm,
        projected_gradient_norm: result.projected_gradient_norm,
        wall_time,
    })
}
