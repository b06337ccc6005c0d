//! Lagrange finite elements on triangle meshes: spaces, assembly, solvers,
//! gradient recovery, cross-mesh projection, and discrete inner products.

pub mod assembly;
pub mod io;
pub mod quadrature;
pub mod solve;
pub mod space;
pub mod sparse;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use assembly::{assemble_laplacian, assemble_load, assemble_mass, assemble_stiffness};
pub use quadrature::QuadratureRule;
pub use solve::{conjugate_gradient, solve_dirichlet, DirichletSystem, Factorization, LinearSolver};
pub use space::{dof_barycentric, Degree, FunctionSpace, ScalarField};
pub use sparse::{SparseMatrix, SparsityPattern};

/// Gradients of `u` at the points of `rule`, grouped per element.
pub fn gradient_at_quadrature(u: &ScalarField, rule: &QuadratureRule) -> Vec<Vec<[f64; 2]>> {
    (0..u.space().num_cells())
        .map(|cell| rule.points.iter().map(|l| u.grad_in_cell(cell, *l)).collect())
        .collect()
}

/// L² distance between a field and a closed-form function (degree-5 rule).
pub fn l2_distance(u: &ScalarField, exact: impl Fn(f64, f64) -> f64) -> f64 {
    let mesh = u.space().mesh();
    let rule = QuadratureRule::degree5();
    let mut total = 0.0;
    for cell in 0..mesh.num_triangles() {
        let area = mesh.area(cell);
        for (l, w) in rule.points.iter().zip(&rule.weights) {
            let [x, y] = mesh.map_to_physical(cell, *l);
            total += w * area * (u.eval_in_cell(cell, *l) - exact(x, y)).powi(2);
        }
    }
    total.sqrt()
}

/// Interpolation projection: evaluate `src` at every dof point of `dst`.
pub fn project_between_meshes(src: &ScalarField, dst: &Arc<FunctionSpace>) -> Result<ScalarField> {
    if Arc::ptr_eq(src.space(), dst) {
        return Ok(src.clone());
    }
    let coeffs = dst
        .dof_coordinates()
        .iter()
        .map(|&p| src.eval_at(p))
        .collect::<Result<Vec<f64>>>()?;
    ScalarField::new(dst.clone(), coeffs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InnerProductKind {
    L2,
    H1,
}

/// Mass and unit-coefficient stiffness matrices of a space.
#[derive(Debug, Clone)]
pub struct Gram {
    space: Arc<FunctionSpace>,
    mass: SparseMatrix,
    stiffness: SparseMatrix,
}

impl Gram {
    pub fn new(space: &Arc<FunctionSpace>) -> Gram {
        Gram {
            space: space.clone(),
            mass: assemble_mass(space),
            stiffness: assemble_laplacian(space),
        }
    }

    pub fn space(&self) -> &Arc<FunctionSpace> {
        &self.space
    }

    pub fn mass(&self) -> &SparseMatrix {
        &self.mass
    }

    pub fn stiffness(&self) -> &SparseMatrix {
        &self.stiffness
    }

    /// Matrix of the chosen inner product: M, or M + K.
    pub fn matrix(&self, kind: InnerProductKind) -> SparseMatrix {
        match kind {
            InnerProductKind::L2 => self.mass.clone(),
            InnerProductKind::H1 => self
                .mass
                .plus_scaled(1.0, &self.stiffness)
                .expect("gram matrices share a pattern"),
        }
    }

    pub fn inner_coeffs(&self, a: &[f64], b: &[f64], kind: InnerProductKind) -> f64 {
        let l2 = self.mass.bilinear(a, b);
        match kind {
            InnerProductKind::L2 => l2,
            InnerProductKind::H1 => l2 + self.stiffness.bilinear(a, b),
        }
    }

    pub fn inner(&self, a: &ScalarField, b: &ScalarField, kind: InnerProductKind) -> Result<f64> {
        if !Arc::ptr_eq(a.space(), &self.space) || !Arc::ptr_eq(b.space(), &self.space) {
            return Err(Error::InvalidArgument(
                "fields do not belong to the space of this inner product".into(),
            ));
        }
        Ok(self.inner_coeffs(a.coeffs(), b.coeffs(), kind))
    }

    pub fn norm(&self, a: &ScalarField, kind: InnerProductKind) -> Result<f64> {
        Ok(self.inner(a, a, kind)?.max(0.0).sqrt())
    }
}

/// Discrete L² or H¹ inner product of two fields on the same space.
pub fn inner_product(a: &ScalarField, b: &ScalarField, kind: InnerProductKind) -> Result<f64> {
    if !a.same_space(b) {
        return Err(Error::InvalidArgument(
            "inner product of fields on different spaces".into(),
        ));
    }
    Gram::new(a.space()).inner(a, b, kind)
}
