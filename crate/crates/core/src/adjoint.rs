//! Reduced cost functional, adjoint solves, and L²/H¹ gradients.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::space::basis_values;
use crate::fem::{
    Degree, DirichletSystem, FunctionSpace, Gram, InnerProductKind, LinearSolver, QuadratureRule,
    ScalarField, SparseMatrix,
};
use crate::forward::{BoundaryCondition, ForwardSolver, PowerDensity};

/// Inner product of the regularization and gradient for smoothness index `s`.
pub fn smoothness_kind(s: u8) -> Result<InnerProductKind> {
    match s {
        0 => Ok(InnerProductKind::L2),
        1 => Ok(InnerProductKind::H1),
        _ => Err(Error::InvalidParameter(format!(
            "smoothness index s must be 0 or 1, got {s}"
        ))),
    }
}

/// Conductivity element degree used with smoothness index `s`.
pub fn sigma_degree(s: u8) -> Result<Degree> {
    smoothness_kind(s).map(|k| match k {
        InnerProductKind::L2 => Degree::P1,
        InnerProductKind::H1 => Degree::P2,
    })
}

/// Ĵ(σ) = Σᵢ ½‖σ|∇uᵢ|² − Hᵢ‖² + (α/2)‖σ − σ_b‖²_X for fixed data.
///
/// Holds everything that does not depend on σ: data at quadrature points,
/// Gram matrices, and the factorized Riesz and smoothing systems.
#[derive(Debug)]
pub struct Objective {
    sigma_space: Arc<FunctionSpace>,
    potential_space: Arc<FunctionSpace>,
    bcs: Vec<BoundaryCondition>,
    data_q: Vec<Vec<f64>>,
    rule: QuadratureRule,
    alpha: f64,
    kind: InnerProductKind,
    sigma_b: ScalarField,
    gram: Gram,
    reg_matrix: SparseMatrix,
    riesz: DirichletSystem,
    smoother: Option<DirichletSystem>,
    solver: LinearSolver,
}

/// Forward solution and residuals at one σ.
#[derive(Debug)]
pub struct ObjectiveState {
    pub sigma: ScalarField,
    pub potentials: Vec<ScalarField>,
    /// σ|∇uᵢ|² − Hᵢ per quadrature point, cell-major.
    pub residuals: Vec<Vec<f64>>,
    pub misfit: f64,
    pub regularization: f64,
    pub cost: f64,
    grads: Vec<Vec<[f64; 2]>>,
    sigma_q: Vec<f64>,
    forward: ForwardSolver,
}

/// Outputs of one gradient evaluation.
#[derive(Debug, Clone)]
pub struct Gradient {
    /// Derivative vector bₐ = Ĵ'(σ)φₐ.
    pub derivative: Vec<f64>,
    pub adjoints: Vec<ScalarField>,
    pub l2: ScalarField,
    /// Sobolev gradient; present when s = 1.
    pub h1: Option<ScalarField>,
}

impl Gradient {
    /// Representative in the inner product the objective was built with.
    pub fn riesz(&self) -> &ScalarField {
        self.h1.as_ref().unwrap_or(&self.l2)
    }
}

impl Objective {
    /// Objective for `data`, whose space fixes the conductivity space; its
    /// degree must match `s` (P1 for s = 0, P2 for s = 1).
    pub fn new(data: &PowerDensity, alpha: f64, s: u8, sigma_b: f64, solver: LinearSolver) -> Result<Objective> {
        let bcs = data.boundary_conditions()?;
        Self::from_fields(&data.fields, bcs, alpha, s, sigma_b, solver)
    }

    pub fn from_fields(
        fields: &[ScalarField],
        bcs: Vec<BoundaryCondition>,
        alpha: f64,
        s: u8,
        sigma_b: f64,
        solver: LinearSolver,
    ) -> Result<Objective> {
        let kind = smoothness_kind(s)?;
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!("alpha must be >= 0, got {alpha}")));
        }
        if fields.is_empty() || fields.len() != bcs.len() {
            return Err(Error::InvalidArgument(format!(
                "{} data fields for {} boundary conditions",
                fields.len(),
                bcs.len()
            )));
        }
        let sigma_space = fields[0].space().clone();
        if fields.iter().any(|f| !Arc::ptr_eq(f.space(), &sigma_space)) {
            return Err(Error::InvalidArgument("data fields live on different spaces".into()));
        }
        if sigma_space.degree() != sigma_degree(s)? {
            return Err(Error::Config(format!(
                "s = {s} needs {:?} data, got {:?}",
                sigma_degree(s)?,
                sigma_space.degree()
            )));
        }
        let potential_space = match sigma_space.degree() {
            Degree::P2 => sigma_space.clone(),
            Degree::P1 => FunctionSpace::new(sigma_space.mesh().clone(), Degree::P2),
        };
        let rule = QuadratureRule::degree5();
        let data_q = fields
            .iter()
            .map(|h| {
                (0..sigma_space.num_cells())
                    .flat_map(|cell| rule.points.iter().map(move |l| h.eval_in_cell(cell, *l)))
                    .collect()
            })
            .collect();
        let gram = Gram::new(&sigma_space);
        let reg_matrix = gram.matrix(kind);
        let n = sigma_space.num_dofs();
        let (riesz, smoother) = match kind {
            InnerProductKind::L2 => (
                DirichletSystem::with_constraints(gram.mass(), vec![false; n], solver)?,
                None,
            ),
            InnerProductKind::H1 => (
                DirichletSystem::new(gram.mass(), &sigma_space, solver)?,
                Some(DirichletSystem::new(&reg_matrix, &sigma_space, solver)?),
            ),
        };
        Ok(Objective {
            sigma_b: ScalarField::constant(sigma_space.clone(), sigma_b),
            sigma_space,
            potential_space,
            bcs,
            data_q,
            rule,
            alpha,
            kind,
            gram,
            reg_matrix,
            riesz,
            smoother,
            solver,
        })
    }

    pub fn sigma_space(&self) -> &Arc<FunctionSpace> {
        &self.sigma_space
    }

    pub fn potential_space(&self) -> &Arc<FunctionSpace> {
        &self.potential_space
    }

    pub fn boundary_conditions(&self) -> &[BoundaryCondition] {
        &self.bcs
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn kind(&self) -> InnerProductKind {
        self.kind
    }

    pub fn sigma_b(&self) -> &ScalarField {
        &self.sigma_b
    }

    pub fn gram(&self) -> &Gram {
        &self.gram
    }

    /// ⟨a, b⟩_X on coefficient vectors.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.gram.inner_coeffs(a, b, self.kind)
    }

    /// Solves the forward problems and evaluates the cost.
    pub fn evaluate(&self, sigma: &ScalarField) -> Result<ObjectiveState> {
        if !Arc::ptr_eq(sigma.space(), &self.sigma_space) {
            return Err(Error::InvalidArgument(
                "conductivity is not on the objective's space".into(),
            ));
        }
        let forward = ForwardSolver::new(sigma, &self.potential_space, self.solver)?;
        let mesh = self.sigma_space.mesh();
        let nq = self.rule.len();
        let mut sigma_q = Vec::with_capacity(mesh.num_triangles() * nq);
        for cell in 0..mesh.num_triangles() {
            for l in &self.rule.points {
                sigma_q.push(sigma.eval_in_cell(cell, *l));
            }
        }
        let mut potentials = Vec::with_capacity(self.bcs.len());
        let mut residuals = Vec::with_capacity(self.bcs.len());
        let mut grads = Vec::with_capacity(self.bcs.len());
        let mut misfit = 0.0;
        for (bc, h) in self.bcs.iter().zip(&self.data_q) {
            let u = forward.solve(bc)?;
            let mut g = Vec::with_capacity(sigma_q.len());
            let mut r = Vec::with_capacity(sigma_q.len());
            for cell in 0..mesh.num_triangles() {
                let area = mesh.area(cell);
                for (q, (l, w)) in self.rule.points.iter().zip(&self.rule.weights).enumerate() {
                    let k = cell * nq + q;
                    let gu = u.grad_in_cell(cell, *l);
                    let ri = sigma_q[k] * (gu[0] * gu[0] + gu[1] * gu[1]) - h[k];
                    misfit += 0.5 * w * area * ri * ri;
                    g.push(gu);
                    r.push(ri);
                }
            }
            potentials.push(u);
            residuals.push(r);
            grads.push(g);
        }
        let e = self.deviation(sigma);
        let regularization = 0.5 * self.alpha * self.reg_matrix.bilinear(&e, &e);
        Ok(ObjectiveState {
            sigma: sigma.clone(),
            potentials,
            residuals,
            misfit,
            regularization,
            cost: misfit + regularization,
            grads,
            sigma_q,
            forward,
        })
    }

    pub fn cost(&self, sigma: &ScalarField) -> Result<f64> {
        Ok(self.evaluate(sigma)?.cost)
    }

    fn deviation(&self, sigma: &ScalarField) -> Vec<f64> {
        sigma
            .coeffs()
            .iter()
            .zip(self.sigma_b.coeffs())
            .map(|(s, b)| s - b)
            .collect()
    }

    /// Adjoint potentials vᵢ: A(σ)vᵢ = Lᵢ with L(ṽ) = −2∫σ rᵢ∇uᵢ·∇ṽ and
    /// zero trace, reusing the forward factorization.
    pub fn adjoints(&self, state: &ObjectiveState) -> Result<Vec<ScalarField>> {
        let space = &self.potential_space;
        let mesh = space.mesh();
        let nq = self.rule.len();
        let mut out = Vec::with_capacity(self.bcs.len());
        for (r, g) in state.residuals.iter().zip(&state.grads) {
            let mut rhs = vec![0.0; space.num_dofs()];
            for cell in 0..mesh.num_triangles() {
                let geom = mesh.geometry(cell);
                let dofs = space.cell_dofs(cell);
                for (q, (l, w)) in self.rule.points.iter().zip(&self.rule.weights).enumerate() {
                    let k = cell * nq + q;
                    let c = -2.0 * w * geom.area * state.sigma_q[k] * r[k];
                    if c == 0.0 {
                        continue;
                    }
                    let phi = crate::fem::space::basis_gradients(Degree::P2, *l, geom);
                    for (&d, p) in dofs.iter().zip(phi) {
                        rhs[d] += c * (g[k][0] * p[0] + g[k][1] * p[1]);
                    }
                }
            }
            out.push(state.forward.solve_homogeneous(&rhs)?);
        }
        Ok(out)
    }

    /// bₐ = Σᵢ∫(rᵢ|∇uᵢ|² + ∇uᵢ·∇vᵢ)φₐ + α(X(σ − σ_b))ₐ.
    pub fn derivative(&self, state: &ObjectiveState, adjoints: &[ScalarField]) -> Vec<f64> {
        let space = &self.sigma_space;
        let mesh = space.mesh();
        let degree = space.degree();
        let nq = self.rule.len();
        let e = self.deviation(&state.sigma);
        let mut b = self.reg_matrix.mul_vec(&e);
        b.iter_mut().for_each(|v| *v *= self.alpha);
        for ((r, g), v) in state.residuals.iter().zip(&state.grads).zip(adjoints) {
            for cell in 0..mesh.num_triangles() {
                let area = mesh.area(cell);
                let dofs = space.cell_dofs(cell);
                for (q, (l, w)) in self.rule.points.iter().zip(&self.rule.weights).enumerate() {
                    let k = cell * nq + q;
                    let gv = v.grad_in_cell(cell, *l);
                    let gu = g[k];
                    let density = r[k] * (gu[0] * gu[0] + gu[1] * gu[1]) + gu[0] * gv[0] + gu[1] * gv[1];
                    let c = w * area * density;
                    for (&d, p) in dofs.iter().zip(basis_values(degree, *l)) {
                        b[d] += c * p;
                    }
                }
            }
        }
        b
    }

    /// L² Riesz representative: M g = b, with g = 0 on the boundary for s = 1.
    pub fn riesz_l2(&self, derivative: &[f64]) -> Result<ScalarField> {
        let g = self.riesz.solve_homogeneous(derivative)?;
        ScalarField::new(self.sigma_space.clone(), g)
    }

    /// (K + M) g_H¹ = M g_L² with zero trace.
    pub fn smooth_to_h1(&self, g_l2: &ScalarField) -> Result<ScalarField> {
        let rhs = self.gram.mass().mul_vec(g_l2.coeffs());
        let g = match &self.smoother {
            Some(system) => system.solve_homogeneous(&rhs)?,
            None => {
                let km = self.gram.matrix(InnerProductKind::H1);
                DirichletSystem::new(&km, &self.sigma_space, self.solver)?.solve_homogeneous(&rhs)?
            }
        };
        ScalarField::new(self.sigma_space.clone(), g)
    }

    /// Adjoint solves, derivative, and Riesz representatives at `state`.
    pub fn gradient(&self, state: &ObjectiveState) -> Result<Gradient> {
        let adjoints = self.adjoints(state)?;
        let derivative = self.derivative(state, &adjoints);
        let l2 = self.riesz_l2(&derivative)?;
        let h1 = match self.kind {
            InnerProductKind::L2 => None,
            InnerProductKind::H1 => Some(self.smooth_to_h1(&l2)?),
        };
        Ok(Gradient {
            derivative,
            adjoints,
            l2,
            h1,
        })
    }
}

/// One-shot cost evaluation with the default solver.
pub fn evaluate_cost(sigma: &ScalarField, data: &PowerDensity, alpha: f64, s: u8, sigma_b: f64) -> Result<f64> {
    Objective::new(data, alpha, s, sigma_b, LinearSolver::default())?.cost(sigma)
}

/// Adjoint potential for a single excitation: `u` must solve the forward
/// problem with this σ, and `h` is the datum (any space on the same mesh).
pub fn solve_adjoint(sigma: &ScalarField, u: &ScalarField, h: &ScalarField) -> Result<ScalarField> {
    let space = u.space();
    if !space.same_mesh(sigma.space()) || !space.same_mesh(h.space()) {
        return Err(Error::InvalidArgument("adjoint inputs live on different meshes".into()));
    }
    let forward = ForwardSolver::new(sigma, space, LinearSolver::default())?;
    let mesh = space.mesh();
    let rule = QuadratureRule::degree5();
    let mut rhs = vec![0.0; space.num_dofs()];
    for cell in 0..mesh.num_triangles() {
        let geom = mesh.geometry(cell);
        for (l, w) in rule.points.iter().zip(&rule.weights) {
            let s = sigma.eval_in_cell(cell, *l);
            let g = u.grad_in_cell(cell, *l);
            let r = s * (g[0] * g[0] + g[1] * g[1]) - h.eval_in_cell(cell, *l);
            let c = -2.0 * w * geom.area * s * r;
            let phi = crate::fem::space::basis_gradients(space.degree(), *l, geom);
            for (&d, p) in space.cell_dofs(cell).iter().zip(phi) {
                rhs[d] += c * (g[0] * p[0] + g[1] * p[1]);
            }
        }
    }
    forward.solve_homogeneous(&rhs)
}

/// Sobolev smoothing (K + M) g_H¹ = M g with zero trace on g's own space.
pub fn smooth_to_h1(g_l2: &ScalarField) -> Result<ScalarField> {
    let space = g_l2.space();
    let gram = Gram::new(space);
    let km = gram.matrix(InnerProductKind::H1);
    let rhs = gram.mass().mul_vec(g_l2.coeffs());
    let g = DirichletSystem::new(&km, space, LinearSolver::default())?.solve_homogeneous(&rhs)?;
    ScalarField::new(space.clone(), g)
}

/// One row of a directional finite-difference check.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct GradientCheckRow {
    pub epsilon: f64,
    pub adjoint: f64,
    pub finite_difference: f64,
    pub relative_error: f64,
}

/// Compares bᵀφ with (Ĵ(σ+εφ) − Ĵ(σ−εφ))/(2ε) for each ε.
pub fn finite_difference_check(
    objective: &Objective,
    sigma: &ScalarField,
    direction: &ScalarField,
    epsilons: &[f64],
) -> Result<Vec<GradientCheckRow>> {
    let state = objective.evaluate(sigma)?;
    let grad = objective.gradient(&state)?;
    let adjoint: f64 = grad
        .derivative
        .iter()
        .zip(direction.coeffs())
        .map(|(b, p)| b * p)
        .sum();
    epsilons
        .iter()
        .map(|&eps| {
            let shifted = |sign: f64| -> Result<f64> {
                let c = sigma
                    .coeffs()
                    .iter()
                    .zip(direction.coeffs())
                    .map(|(s, p)| s + sign * eps * p)
                    .collect();
                objective.cost(&sigma.with_coeffs(c)?)
            };
            let fd = (shifted(1.0)? - shifted(-1.0)?) / (2.0 * eps);
            Ok(GradientCheckRow {
                epsilon: eps,
                adjoint,
                finite_difference: fd,
                relative_error: (fd - adjoint).abs() / adjoint.abs().max(f64::MIN_POSITIVE),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{inner_product, l2_distance};
    use crate::forward::{power_density, BcSet};
    use crate::mesh::generate_disk_mesh;
    use std::f64::consts::PI;

    fn p2_space(h: f64) -> Arc<FunctionSpace> {
        FunctionSpace::new(Arc::new(generate_disk_mesh(h).unwrap()), Degree::P2)
    }

    #[test]
    fn zero_residual_gives_zero_adjoint() {
        let space = p2_space(0.1);
        let sigma = ScalarField::interpolate(space.clone(), |x, y| 1.0 + 0.3 * x * y);
        let bcs = BcSet::Bc1.conditions();
        let h: Vec<ScalarField> = bcs
            .iter()
            .map(|bc| {
                let u = crate::forward::solve_forward(&sigma, bc, &space).unwrap();
                power_density(&sigma, &u).unwrap()
            })
            .collect();
        let obj = Objective::from_fields(&h, bcs, 0.0, 1, 1.0, LinearSolver::default()).unwrap();
        let mut state = obj.evaluate(&sigma).unwrap();
        // H on the σ-space only approximates σ|∇u|² at quadrature points;
        // zero the residual to isolate the adjoint map
        for r in state.residuals.iter_mut() {
            r.iter_mut().for_each(|v| *v = 0.0);
        }
        for v in obj.adjoints(&state).unwrap() {
            assert!(v.coeffs().iter().all(|c| c.abs() < 1e-9));
        }
    }

    #[test]
    fn adjoint_of_linear_potential_with_zero_data_vanishes() {
        let space = p2_space(0.1);
        let one = ScalarField::constant(space.clone(), 1.0);
        let u = ScalarField::interpolate(space.clone(), |x, _| x);
        let v = solve_adjoint(&one, &u, &ScalarField::zeros(space)).unwrap();
        assert!(v.coeffs().iter().all(|c| c.abs() < 1e-9));
    }

    #[test]
    fn adjoint_with_linear_data_is_radial_paraboloid() {
        let space = p2_space(0.02);
        let one = ScalarField::constant(space.clone(), 1.0);
        let u = ScalarField::interpolate(space.clone(), |x, _| x);
        let h = ScalarField::interpolate(space.clone(), |x, _| x);
        let v = solve_adjoint(&one, &u, &h).unwrap();
        let err = l2_distance(&v, |x, y| -(1.0 - x * x - y * y) / 2.0);
        assert!(err < 1e-3, "L2 error {err}");
    }

    #[test]
    fn cost_with_zero_data_is_disk_area() {
        let mesh = Arc::new(generate_disk_mesh(0.05).unwrap());
        let p1 = FunctionSpace::new(mesh, Degree::P1);
        let zero = ScalarField::zeros(p1.clone());
        let obj = Objective::from_fields(
            &[zero.clone(), zero],
            BcSet::Bc2.conditions(),
            0.0,
            0,
            1.0,
            LinearSolver::default(),
        )
        .unwrap();
        let cost = obj.cost(&ScalarField::constant(p1, 1.0)).unwrap();
        assert!((cost - PI).abs() <= 0.03 * PI, "cost {cost}");
    }

    #[test]
    fn regularization_vanishes_at_background() {
        let mesh = Arc::new(generate_disk_mesh(0.2).unwrap());
        for s in [0u8, 1] {
            let space = FunctionSpace::new(mesh.clone(), sigma_degree(s).unwrap());
            let h = ScalarField::constant(space.clone(), 0.7);
            let obj = Objective::from_fields(
                &[h.clone(), h],
                BcSet::Bc1.conditions(),
                0.5,
                s,
                1.0,
                LinearSolver::default(),
            )
            .unwrap();
            let state = obj.evaluate(&ScalarField::constant(space.clone(), 1.0)).unwrap();
            assert_eq!(state.regularization, 0.0);
            let grad = obj.gradient(&state).unwrap();
            let reg_free = Objective::from_fields(
                &[ScalarField::constant(space.clone(), 0.7), ScalarField::constant(space.clone(), 0.7)],
                BcSet::Bc1.conditions(),
                0.0,
                s,
                1.0,
                LinearSolver::default(),
            )
            .unwrap();
            let state0 = reg_free.evaluate(&ScalarField::constant(space, 1.0)).unwrap();
            let grad0 = reg_free.gradient(&state0).unwrap();
            assert_eq!(grad.derivative, grad0.derivative);
        }
    }

    #[test]
    fn smoothing_zero_is_zero() {
        let space = p2_space(0.2);
        let g = smooth_to_h1(&ScalarField::zeros(space)).unwrap();
        assert!(g.coeffs().iter().all(|&v| v == 0.0));
    }

    fn bessel_j0(x: f64) -> f64 {
        // power series, ample for |x| <= 3
        let mut term = 1.0;
        let mut sum = 1.0;
        let q = -(x * x) / 4.0;
        for k in 1..40 {
            term *= q / (k as f64 * k as f64);
            sum += term;
        }
        sum
    }

    #[test]
    fn bessel_eigenfunction_is_scaled() {
        let j01 = 2.404_825_557_695_773f64;
        assert!(bessel_j0(j01).abs() < 1e-12);
        let space = p2_space(0.02);
        let f = |x: f64, y: f64| bessel_j0(j01 * (x * x + y * y).sqrt());
        let g = ScalarField::interpolate(space.clone(), f);
        let smoothed = smooth_to_h1(&g).unwrap();
        let scale = 1.0 / (1.0 + j01 * j01);
        let err = l2_distance(&smoothed, |x, y| scale * f(x, y));
        let norm = l2_distance(&ScalarField::zeros(space), |x, y| scale * f(x, y));
        assert!(err <= 0.02 * norm, "relative error {}", err / norm);
    }

    #[test]
    fn smoothing_energy_identity() {
        let space = p2_space(0.1);
        let g = ScalarField::interpolate(space.clone(), |x, y| (3.0 * x).cos() + y * y * x);
        let gh = smooth_to_h1(&g).unwrap();
        let lhs = inner_product(&gh, &gh, InnerProductKind::H1).unwrap();
        let rhs = inner_product(&g, &gh, InnerProductKind::L2).unwrap();
        assert!((lhs - rhs).abs() <= 1e-9 * lhs.abs());
        let gl2 = inner_product(&g, &g, InnerProductKind::L2).unwrap().sqrt();
        assert!(lhs.sqrt() <= gl2 * (1.0 + 1e-9));
    }

    #[test]
    fn rejects_mismatched_degree() {
        let mesh = Arc::new(generate_disk_mesh(0.3).unwrap());
        let p1 = FunctionSpace::new(mesh, Degree::P1);
        let h = ScalarField::constant(p1, 1.0);
        let err = Objective::from_fields(&[h.clone(), h], BcSet::Bc1.conditions(), 0.1, 1, 1.0, LinearSolver::default());
        assert!(matches!(err, Err(Error::Config(_))));
        assert!(smoothness_kind(2).is_err());
    }
}
