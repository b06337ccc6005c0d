//! Linear solvers for the SPD systems left after Dirichlet elimination.
//!
//! Two independent routes are available: a sparse Cholesky factorization
//! (default; one factorization serves every right-hand side sharing a
//! matrix) and Jacobi-preconditioned conjugate gradients.

use serde::{Deserialize, Serialize};

use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::linalg::solvers::Solve;

use crate::error::{Error, Result};
use crate::fem::space::{FunctionSpace, ScalarField};
use crate::fem::sparse::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LinearSolver {
    #[default]
    Cholesky,
    /// Jacobi-preconditioned CG with relative residual tolerance and an
    /// iteration cap of `max_iter_factor · n`.
    Cg { rel_tol: f64, max_iter_factor: usize },
}

impl LinearSolver {
    pub fn cg() -> Self {
        LinearSolver::Cg {
            rel_tol: 1e-10,
            max_iter_factor: 10,
        }
    }
}

/// Statistics of a conjugate-gradient run.
#[derive(Debug, Clone, Copy)]
pub struct CgStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients for an SPD matrix.
pub fn conjugate_gradient(
    a: &SparseMatrix,
    b: &[f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, CgStats)> {
    let n = a.dim();
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    pcg(a, &inv_diag, b, rel_tol, max_iter.max(n.min(1)))
}

fn pcg(
    a: &SparseMatrix,
    inv_diag: &[f64],
    b: &[f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, CgStats)> {
    let n = a.dim();
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
    let b_norm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok((
            x,
            CgStats {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    for it in 1..=max_iter {
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::LinearSolver {
                iterations: it,
                residual: dot(&r, &r).sqrt() / b_norm,
            });
        }
        let step = rz / pap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        let res = dot(&r, &r).sqrt() / b_norm;
        if res <= rel_tol {
            return Ok((
                x,
                CgStats {
                    iterations: it,
                    relative_residual: res,
                },
            ));
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::LinearSolver {
        iterations: max_iter,
        residual: dot(&r, &r).sqrt() / b_norm,
    })
}

enum Backend {
    Cholesky(Llt<usize, f64>),
    Cg {
        matrix: SparseMatrix,
        inv_diag: Vec<f64>,
        rel_tol: f64,
        max_iter: usize,
    },
}

/// A prepared SPD operator that can be solved against many right-hand sides.
pub struct Factorization {
    backend: Backend,
    n: usize,
}

impl std::fmt::Debug for Factorization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match self.backend {
            Backend::Cholesky(_) => "cholesky",
            Backend::Cg { .. } => "cg",
        };
        f.debug_struct("Factorization").field("kind", &kind).field("n", &self.n).finish()
    }
}

impl Factorization {
    /// Prepare `a` (which must be symmetric positive definite).
    pub fn new(solver: LinearSolver, a: &SparseMatrix) -> Result<Factorization> {
        let n = a.dim();
        let backend = match solver {
            LinearSolver::Cholesky => {
                let pattern = a.pattern();
                // CSR of a symmetric matrix is its CSC
                let structure = SymbolicSparseColMatRef::new_checked(
                    n,
                    n,
                    pattern.row_ptr(),
                    None,
                    pattern.col_idx(),
                );
                let symbolic = match pattern.symbolic.get() {
                    Some(s) => s.clone(),
                    None => {
                        let s = SymbolicLlt::try_new(structure, faer::Side::Lower)
                            .map_err(|e| Error::Factorization(format!("{e:?}")))?;
                        let _ = pattern.symbolic.set(s.clone());
                        s
                    }
                };
                let mat = SparseColMatRef::new(structure, a.values());
                let llt = Llt::try_new_with_symbolic(symbolic, mat, faer::Side::Lower)
                    .map_err(|e| Error::Factorization(format!("{e}")))?;
                Backend::Cholesky(llt)
            }
            LinearSolver::Cg {
                rel_tol,
                max_iter_factor,
            } => Backend::Cg {
                inv_diag: a
                    .diagonal()
                    .iter()
                    .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
                    .collect(),
                matrix: a.clone(),
                rel_tol,
                max_iter: max_iter_factor.saturating_mul(n).max(1),
            },
        };
        Ok(Factorization { backend, n })
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        assert_eq!(rhs.len(), self.n, "right-hand side has the wrong length");
        match &self.backend {
            Backend::Cholesky(llt) => {
                let mut x = faer::Mat::<f64>::from_fn(self.n, 1, |i, _| rhs[i]);
                llt.solve_in_place(x.as_mut());
                Ok((0..self.n).map(|i| x[(i, 0)]).collect())
            }
            Backend::Cg {
                matrix,
                inv_diag,
                rel_tol,
                max_iter,
            } => pcg(matrix, inv_diag, rhs, *rel_tol, *max_iter).map(|(x, _)| x),
        }
    }
}

/// Symmetric elimination of the constrained dofs: zero their rows and
/// columns and place 1 on the diagonal (the pattern is kept).
pub fn constrain_symmetric(a: &SparseMatrix, constrained: &[bool]) -> SparseMatrix {
    let mut out = a.clone();
    let pattern = a.pattern().clone();
    let values = out.values_mut();
    for i in 0..pattern.dim() {
        for (k, &j) in pattern.row(i).iter().enumerate() {
            let pos = pattern.row_ptr()[i] + k;
            if constrained[i] || constrained[j] {
                values[pos] = if i == j { 1.0 } else { 0.0 };
            }
        }
    }
    out
}

/// A matrix with Dirichlet rows eliminated and factorized, ready to solve
/// `A u = f` with prescribed values on the constrained dofs.
#[derive(Debug)]
pub struct DirichletSystem {
    original: SparseMatrix,
    constrained: Vec<bool>,
    factor: Factorization,
}

impl DirichletSystem {
    /// Constrain all boundary dofs of `space`.
    pub fn new(a: &SparseMatrix, space: &FunctionSpace, solver: LinearSolver) -> Result<Self> {
        let constrained = (0..space.num_dofs()).map(|d| space.is_boundary_dof(d)).collect();
        Self::with_constraints(a, constrained, solver)
    }

    pub fn with_constraints(a: &SparseMatrix, constrained: Vec<bool>, solver: LinearSolver) -> Result<Self> {
        let reduced = constrain_symmetric(a, &constrained);
        let factor = Factorization::new(solver, &reduced)?;
        Ok(DirichletSystem {
            original: a.clone(),
            constrained,
            factor,
        })
    }

    /// Solve with values taken from `prescribed` on constrained dofs.
    pub fn solve(&self, rhs: &[f64], prescribed: &[f64]) -> Result<Vec<f64>> {
        let n = self.original.dim();
        let pattern = self.original.pattern();
        let vals = self.original.values();
        let mut b = rhs.to_vec();
        for i in 0..n {
            if self.constrained[i] {
                b[i] = prescribed[i];
                continue;
            }
            for (k, &j) in pattern.row(i).iter().enumerate() {
                if self.constrained[j] {
                    b[i] -= vals[pattern.row_ptr()[i] + k] * prescribed[j];
                }
            }
        }
        let mut x = self.factor.solve(&b)?;
        for i in 0..n {
            if self.constrained[i] {
                x[i] = prescribed[i];
            }
        }
        Ok(x)
    }

    /// Solve with homogeneous values on constrained dofs.
    pub fn solve_homogeneous(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let mut b = rhs.to_vec();
        for (bi, &c) in b.iter_mut().zip(&self.constrained) {
            if c {
                *bi = 0.0;
            }
        }
        let mut x = self.factor.solve(&b)?;
        for (xi, &c) in x.iter_mut().zip(&self.constrained) {
            if c {
                *xi = 0.0;
            }
        }
        Ok(x)
    }

    /// Relative residual of the interior equations for a candidate solution.
    pub fn interior_residual(&self, rhs: &[f64], x: &[f64]) -> f64 {
        let ax = self.original.mul_vec(x);
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..x.len() {
            if !self.constrained[i] {
                num += (ax[i] - rhs[i]).powi(2);
                den += rhs[i].powi(2);
            }
        }
        let scale = den.sqrt().max(
            self.original.values().iter().fold(0.0f64, |m, v| m.max(v.abs()))
                * x.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        );
        if scale == 0.0 {
            0.0
        } else {
            num.sqrt() / scale
        }
    }
}

/// Solve `A u = rhs` in the interior with `u = boundary_values` on the
/// boundary dofs of `space`.
pub fn solve_dirichlet(
    a: &SparseMatrix,
    rhs: &[f64],
    space: &std::sync::Arc<FunctionSpace>,
    boundary_values: &ScalarField,
    solver: LinearSolver,
) -> Result<ScalarField> {
    if !std::sync::Arc::ptr_eq(boundary_values.space(), space) {
        return Err(Error::InvalidArgument(
            "boundary values live on a different space".into(),
        ));
    }
    let system = DirichletSystem::new(a, space, solver)?;
    let x = system.solve(rhs, boundary_values.coeffs())?;
    ScalarField::new(space.clone(), x)
}
