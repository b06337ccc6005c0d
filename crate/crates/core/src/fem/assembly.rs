use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::quadrature::QuadratureRule;
use crate::fem::space::{basis_gradients, basis_values, Degree, FunctionSpace, ScalarField};
use crate::fem::sparse::SparseMatrix;
use crate::mesh::CellGeometry;

/// Stiffness matrix of `∫ σ ∇u·∇v` with σ evaluated at quadrature points.
///
/// `sigma` must live on the same mesh as `space` (any degree) and be strictly
/// positive at every quadrature point.
pub fn assemble_stiffness(space: &Arc<FunctionSpace>, sigma: &ScalarField) -> Result<SparseMatrix> {
    if !space.same_mesh(sigma.space()) {
        return Err(Error::InvalidArgument(
            "conductivity and trial space live on different meshes".into(),
        ));
    }
    let rule = QuadratureRule::for_form(space.degree().order(), sigma.space().degree().order());
    assemble_stiffness_impl(space, Some(sigma), &rule)
}

/// Stiffness matrix with unit coefficient (discrete negative Laplacian).
pub fn assemble_laplacian(space: &Arc<FunctionSpace>) -> SparseMatrix {
    let rule = QuadratureRule::for_form(space.degree().order(), 0);
    assemble_stiffness_impl(space, None, &rule).expect("unit coefficient is coercive")
}

fn assemble_stiffness_impl(
    space: &Arc<FunctionSpace>,
    sigma: Option<&ScalarField>,
    rule: &QuadratureRule,
) -> Result<SparseMatrix> {
    let mesh = space.mesh();
    let degree = space.degree();
    let nl = degree.local_dofs();
    let mut a = SparseMatrix::zeros(space.pattern());
    for cell in 0..space.num_cells() {
        let geom = mesh.geometry(cell);
        let local = local_stiffness(degree, geom, rule, |l| match sigma {
            Some(s) => {
                let v = s.eval_in_cell(cell, l);
                if v > 0.0 {
                    Ok(v)
                } else {
                    Err(Error::Coercivity { element: cell, value: v })
                }
            }
            None => Ok(1.0),
        })?;
        let dofs = space.cell_dofs(cell);
        for i in 0..nl {
            for j in i..nl {
                let v = local[i][j];
                a.add(dofs[i], dofs[j], v);
                if i != j {
                    a.add(dofs[j], dofs[i], v);
                }
            }
        }
    }
    Ok(a)
}

/// Element matrix `∫_K c ∇φ_i·∇φ_j` (upper triangle filled) with the
/// coefficient supplied per quadrature point.
pub(crate) fn local_stiffness(
    degree: Degree,
    geom: &CellGeometry,
    rule: &QuadratureRule,
    coef: impl Fn([f64; 3]) -> Result<f64>,
) -> Result<[[f64; 6]; 6]> {
    let nl = degree.local_dofs();
    let mut local = [[0.0f64; 6]; 6];
    for (l, w) in rule.points.iter().zip(&rule.weights) {
        let scale = w * geom.area * coef(*l)?;
        let g = basis_gradients(degree, *l, geom);
        for i in 0..nl {
            for j in i..nl {
                local[i][j] += scale * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
            }
        }
    }
    Ok(local)
}

/// Consistent mass matrix `∫ u v`.
pub fn assemble_mass(space: &Arc<FunctionSpace>) -> SparseMatrix {
    let mesh = space.mesh();
    let degree = space.degree();
    let nl = degree.local_dofs();
    // P1 mass is degree 2, P2 mass degree 4
    let rule = QuadratureRule::for_form(degree.order(), 0);
    let mut m = SparseMatrix::zeros(space.pattern());
    for cell in 0..space.num_cells() {
        let area = mesh.area(cell);
        let dofs = space.cell_dofs(cell);
        let mut local = [[0.0f64; 6]; 6];
        for (l, w) in rule.points.iter().zip(&rule.weights) {
            let phi = basis_values(degree, *l);
            for i in 0..nl {
                for j in i..nl {
                    local[i][j] += w * area * phi[i] * phi[j];
                }
            }
        }
        for i in 0..nl {
            for j in i..nl {
                m.add(dofs[i], dofs[j], local[i][j]);
                if i != j {
                    m.add(dofs[j], dofs[i], local[i][j]);
                }
            }
        }
    }
    m
}

/// Load vector `∫ f v` for a closure source, using the degree-5 rule.
pub fn assemble_load(space: &Arc<FunctionSpace>, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let mesh = space.mesh();
    let degree = space.degree();
    let rule = QuadratureRule::degree5();
    let mut b = vec![0.0; space.num_dofs()];
    for cell in 0..space.num_cells() {
        let area = mesh.area(cell);
        for (l, w) in rule.points.iter().zip(&rule.weights) {
            let [x, y] = mesh.map_to_physical(cell, *l);
            let fv = f(x, y) * w * area;
            let phi = basis_values(degree, *l);
            for (&d, p) in space.cell_dofs(cell).iter().zip(phi) {
                b[d] += fv * p;
            }
        }
    }
    b
}
