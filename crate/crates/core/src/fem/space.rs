use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::sparse::SparsityPattern;
use crate::mesh::{edge_key, local_edges, CellGeometry, Mesh, Point};

/// Polynomial degree of a continuous Lagrange space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Degree {
    P1,
    P2,
}

impl Degree {
    pub fn order(self) -> usize {
        match self {
            Degree::P1 => 1,
            Degree::P2 => 2,
        }
    }

    pub fn local_dofs(self) -> usize {
        match self {
            Degree::P1 => 3,
            Degree::P2 => 6,
        }
    }

    pub fn from_order(order: usize) -> Result<Degree> {
        match order {
            1 => Ok(Degree::P1),
            2 => Ok(Degree::P2),
            _ => Err(Error::InvalidParameter(format!(
                "unsupported element degree {order}"
            ))),
        }
    }
}

/// Values of the local basis at a barycentric point. Local P2 ordering is
/// the three vertices, then the midpoints of edges (0,1), (1,2), (2,0).
#[inline]
pub fn basis_values(degree: Degree, l: [f64; 3]) -> [f64; 6] {
    match degree {
        Degree::P1 => [l[0], l[1], l[2], 0.0, 0.0, 0.0],
        Degree::P2 => [
            l[0] * (2.0 * l[0] - 1.0),
            l[1] * (2.0 * l[1] - 1.0),
            l[2] * (2.0 * l[2] - 1.0),
            4.0 * l[0] * l[1],
            4.0 * l[1] * l[2],
            4.0 * l[2] * l[0],
        ],
    }
}

/// Physical gradients of the local basis at a barycentric point.
#[inline]
pub fn basis_gradients(degree: Degree, l: [f64; 3], geom: &CellGeometry) -> [[f64; 2]; 6] {
    let g = &geom.grad_bary;
    match degree {
        Degree::P1 => [g[0], g[1], g[2], [0.0; 2], [0.0; 2], [0.0; 2]],
        Degree::P2 => {
            let v = |i: usize| {
                let c = 4.0 * l[i] - 1.0;
                [c * g[i][0], c * g[i][1]]
            };
            let e = |i: usize, j: usize| {
                [
                    4.0 * (l[j] * g[i][0] + l[i] * g[j][0]),
                    4.0 * (l[j] * g[i][1] + l[i] * g[j][1]),
                ]
            };
            [v(0), v(1), v(2), e(0, 1), e(1, 2), e(2, 0)]
        }
    }
}

/// Barycentric coordinates of local dof `j` (same ordering as the basis).
pub fn dof_barycentric(degree: Degree, j: usize) -> [f64; 3] {
    debug_assert!(j < degree.local_dofs());
    const NODES: [[f64; 3]; 6] = [
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.5, 0.5, 0.0],
        [0.0, 0.5, 0.5],
        [0.5, 0.0, 0.5],
    ];
    NODES[j]
}

/// Continuous Lagrange P1 or P2 space on a mesh.
#[derive(Debug)]
pub struct FunctionSpace {
    mesh: Arc<Mesh>,
    degree: Degree,
    cell_dofs: Vec<usize>,
    dof_coordinates: Vec<Point>,
    boundary_dofs: Vec<usize>,
    is_boundary: Vec<bool>,
    pattern: OnceLock<Arc<SparsityPattern>>,
}

impl FunctionSpace {
    pub fn new(mesh: Arc<Mesh>, degree: Degree) -> Arc<FunctionSpace> {
        let nv = mesh.num_vertices();
        let stride = degree.local_dofs();
        let mut cell_dofs = Vec::with_capacity(mesh.num_triangles() * stride);
        let mut dof_coordinates: Vec<Point> = mesh.vertices().to_vec();
        let mut is_boundary: Vec<bool> = (0..nv).map(|v| mesh.is_boundary_vertex(v)).collect();

        match degree {
            Degree::P1 => {
                for tri in mesh.triangles() {
                    cell_dofs.extend_from_slice(tri);
                }
            }
            Degree::P2 => {
                let mut edge_dof: HashMap<(usize, usize), usize> = HashMap::new();
                let mut edge_count: Vec<u8> = Vec::new();
                for tri in mesh.triangles() {
                    cell_dofs.extend_from_slice(tri);
                    for (a, b) in local_edges(*tri) {
                        let dof = *edge_dof.entry(edge_key(a, b)).or_insert_with(|| {
                            let [pa, pb] = [mesh.vertices()[a], mesh.vertices()[b]];
                            dof_coordinates.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
                            edge_count.push(0);
                            dof_coordinates.len() - 1
                        });
                        edge_count[dof - nv] += 1;
                        cell_dofs.push(dof);
                    }
                }
                is_boundary.extend(edge_count.iter().map(|&c| c == 1));
            }
        }
        let boundary_dofs = (0..is_boundary.len()).filter(|&d| is_boundary[d]).collect();
        Arc::new(FunctionSpace {
            mesh,
            degree,
            cell_dofs,
            dof_coordinates,
            boundary_dofs,
            is_boundary,
            pattern: OnceLock::new(),
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn degree(&self) -> Degree {
        self.degree
    }

    pub fn num_dofs(&self) -> usize {
        self.dof_coordinates.len()
    }

    pub fn num_cells(&self) -> usize {
        self.mesh.num_triangles()
    }

    #[inline]
    pub fn cell_dofs(&self, cell: usize) -> &[usize] {
        let s = self.degree.local_dofs();
        &self.cell_dofs[cell * s..(cell + 1) * s]
    }

    pub fn dof_coordinates(&self) -> &[Point] {
        &self.dof_coordinates
    }

    /// Dofs on the boundary: circle vertices and, for P2, midpoints of hull edges.
    pub fn boundary_dofs(&self) -> &[usize] {
        &self.boundary_dofs
    }

    pub fn is_boundary_dof(&self, d: usize) -> bool {
        self.is_boundary[d]
    }

    /// Dof adjacency pattern, shared by every matrix assembled on this space.
    pub fn pattern(&self) -> Arc<SparsityPattern> {
        self.pattern
            .get_or_init(|| {
                let mut rows = vec![Vec::new(); self.num_dofs()];
                for cell in 0..self.num_cells() {
                    let dofs = self.cell_dofs(cell);
                    for &i in dofs {
                        rows[i].extend_from_slice(dofs);
                    }
                }
                Arc::new(SparsityPattern::from_rows(rows))
            })
            .clone()
    }

    pub fn same_mesh(&self, other: &FunctionSpace) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh)
    }
}

/// A finite-element function: coefficient vector bound to a space.
#[derive(Debug, Clone)]
pub struct ScalarField {
    space: Arc<FunctionSpace>,
    coeffs: Vec<f64>,
}

impl ScalarField {
    pub fn new(space: Arc<FunctionSpace>, coeffs: Vec<f64>) -> Result<ScalarField> {
        if coeffs.len() != space.num_dofs() {
            return Err(Error::InvalidArgument(format!(
                "coefficient vector has length {}, space has {} dofs",
                coeffs.len(),
                space.num_dofs()
            )));
        }
        Ok(ScalarField { space, coeffs })
    }

    pub fn zeros(space: Arc<FunctionSpace>) -> ScalarField {
        Self::constant(space, 0.0)
    }

    pub fn constant(space: Arc<FunctionSpace>, value: f64) -> ScalarField {
        let coeffs = vec![value; space.num_dofs()];
        ScalarField { space, coeffs }
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(space: Arc<FunctionSpace>, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        let coeffs = space.dof_coordinates().iter().map(|p| f(p[0], p[1])).collect();
        ScalarField { space, coeffs }
    }

    pub fn space(&self) -> &Arc<FunctionSpace> {
        &self.space
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn with_coeffs(&self, coeffs: Vec<f64>) -> Result<ScalarField> {
        ScalarField::new(self.space.clone(), coeffs)
    }

    pub fn same_space(&self, other: &ScalarField) -> bool {
        Arc::ptr_eq(&self.space, &other.space)
    }

    #[inline]
    pub fn eval_in_cell(&self, cell: usize, bary: [f64; 3]) -> f64 {
        let phi = basis_values(self.space.degree, bary);
        self.space
            .cell_dofs(cell)
            .iter()
            .zip(phi)
            .map(|(&d, p)| self.coeffs[d] * p)
            .sum()
    }

    #[inline]
    pub fn grad_in_cell(&self, cell: usize, bary: [f64; 3]) -> [f64; 2] {
        let geom = self.space.mesh.geometry(cell);
        let grads = basis_gradients(self.space.degree, bary, geom);
        let mut g = [0.0; 2];
        for (&d, dg) in self.space.cell_dofs(cell).iter().zip(grads) {
            g[0] += self.coeffs[d] * dg[0];
            g[1] += self.coeffs[d] * dg[1];
        }
        g
    }

    /// Point evaluation anywhere in the closed unit disk.
    pub fn eval_at(&self, p: Point) -> Result<f64> {
        let loc = self.space.mesh.locate_point(p)?;
        Ok(self.eval_in_cell(loc.triangle, loc.bary))
    }

    pub fn max_abs_diff(&self, other: &ScalarField) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.coeffs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.coeffs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}
