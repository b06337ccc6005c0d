//! Forward conductivity problem, power densities, and synthetic data.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::io::{parse_field_rows, write_field_rows};
use crate::fem::{
    assemble_stiffness, dof_barycentric, project_between_meshes, Degree, DirichletSystem,
    FunctionSpace, LinearSolver, QuadratureRule, ScalarField,
};
use crate::mesh::generate_disk_mesh;

/// Closed-form boundary traces used as Dirichlet data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trace {
    /// f = x
    X,
    /// f = y
    Y,
    /// f = (x + y)/√2
    Diagonal,
}

impl Trace {
    #[inline]
    pub fn eval(self, x: f64, y: f64) -> f64 {
        match self {
            Trace::X => x,
            Trace::Y => y,
            Trace::Diagonal => (x + y) * std::f64::consts::FRAC_1_SQRT_2,
        }
    }
}

/// One boundary excitation, identified by a label such as `BC1-b`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryCondition {
    pub id: String,
    pub trace: Trace,
}

impl BoundaryCondition {
    /// Value of the trace extended to the plane (it is linear).
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.trace.eval(x, y)
    }

    /// Value at (cos θ, sin θ).
    pub fn eval_boundary(&self, theta: f64) -> f64 {
        self.trace.eval(theta.cos(), theta.sin())
    }

    pub fn from_id(id: &str) -> Result<BoundaryCondition> {
        BcSet::ALL
            .iter()
            .flat_map(|s| s.conditions())
            .find(|bc| bc.id == id)
            .ok_or_else(|| Error::Config(format!("unknown boundary condition `{id}`")))
    }
}

/// The three excitation sets: BC1 = {x, (x+y)/√2}, BC2 = {x, y},
/// BC3 = {x, y, (x+y)/√2}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BcSet {
    #[serde(rename = "BC1", alias = "bc1")]
    Bc1,
    #[serde(rename = "BC2", alias = "bc2")]
    Bc2,
    #[serde(rename = "BC3", alias = "bc3")]
    Bc3,
}

impl BcSet {
    pub const ALL: [BcSet; 3] = [BcSet::Bc1, BcSet::Bc2, BcSet::Bc3];

    pub fn name(self) -> &'static str {
        match self {
            BcSet::Bc1 => "BC1",
            BcSet::Bc2 => "BC2",
            BcSet::Bc3 => "BC3",
        }
    }

    fn traces(self) -> &'static [Trace] {
        match self {
            BcSet::Bc1 => &[Trace::X, Trace::Diagonal],
            BcSet::Bc2 => &[Trace::X, Trace::Y],
            BcSet::Bc3 => &[Trace::X, Trace::Y, Trace::Diagonal],
        }
    }

    pub fn arity(self) -> usize {
        self.traces().len()
    }

    pub fn conditions(self) -> Vec<BoundaryCondition> {
        self.traces()
            .iter()
            .zip(['a', 'b', 'c'])
            .map(|(&trace, suffix)| BoundaryCondition {
                id: format!("{}-{suffix}", self.name()),
                trace,
            })
            .collect()
    }

    /// Trace number `which` (0-based) of this set at angle `theta`.
    pub fn eval_boundary(self, which: usize, theta: f64) -> Result<f64> {
        let traces = self.traces();
        let trace = traces.get(which).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "{} has {} traces, index {which} requested",
                self.name(),
                traces.len()
            ))
        })?;
        Ok(trace.eval(theta.cos(), theta.sin()))
    }
}

impl fmt::Display for BcSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BcSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<BcSet> {
        match s.to_ascii_uppercase().as_str() {
            "BC1" => Ok(BcSet::Bc1),
            "BC2" => Ok(BcSet::Bc2),
            "BC3" => Ok(BcSet::Bc3),
            _ => Err(Error::Config(format!(
                "unknown boundary condition set `{s}` (expected BC1, BC2 or BC3)"
            ))),
        }
    }
}

/// The conductivity operator for a fixed σ, factorized once and reused for
/// every boundary condition and for adjoint solves.
#[derive(Debug)]
pub struct ForwardSolver {
    sigma: ScalarField,
    space: Arc<FunctionSpace>,
    system: DirichletSystem,
}

impl ForwardSolver {
    pub fn new(sigma: &ScalarField, space: &Arc<FunctionSpace>, solver: LinearSolver) -> Result<Self> {
        let a = assemble_stiffness(space, sigma)?;
        let system = DirichletSystem::new(&a, space, solver)?;
        Ok(ForwardSolver {
            sigma: sigma.clone(),
            space: space.clone(),
            system,
        })
    }

    pub fn sigma(&self) -> &ScalarField {
        &self.sigma
    }

    pub fn space(&self) -> &Arc<FunctionSpace> {
        &self.space
    }

    pub fn solve(&self, bc: &BoundaryCondition) -> Result<ScalarField> {
        let trace = ScalarField::interpolate(self.space.clone(), |x, y| bc.eval(x, y));
        let rhs = vec![0.0; self.space.num_dofs()];
        let u = self.system.solve(&rhs, trace.coeffs())?;
        ScalarField::new(self.space.clone(), u)
    }

    /// Solve `A v = rhs` with zero trace.
    pub fn solve_homogeneous(&self, rhs: &[f64]) -> Result<ScalarField> {
        let v = self.system.solve_homogeneous(rhs)?;
        ScalarField::new(self.space.clone(), v)
    }
}

/// Potential for one boundary condition with the default direct solver.
pub fn solve_forward(
    sigma: &ScalarField,
    bc: &BoundaryCondition,
    space: &Arc<FunctionSpace>,
) -> Result<ScalarField> {
    ForwardSolver::new(sigma, space, LinearSolver::default())?.solve(bc)
}

/// H = σ|∇u|² as a field on σ's space.
///
/// Gradients are taken from the element polynomials at each dof point and
/// averaged over the incident elements with area weights.
pub fn power_density(sigma: &ScalarField, u: &ScalarField) -> Result<ScalarField> {
    let space = sigma.space();
    if !space.same_mesh(u.space()) {
        return Err(Error::InvalidArgument(
            "conductivity and potential live on different meshes".into(),
        ));
    }
    let mesh = space.mesh();
    let degree = space.degree();
    let n = space.num_dofs();
    let mut sum = vec![0.0; n];
    let mut weight = vec![0.0; n];
    for cell in 0..space.num_cells() {
        let area = mesh.area(cell);
        for (j, &d) in space.cell_dofs(cell).iter().enumerate() {
            let g = u.grad_in_cell(cell, dof_barycentric(degree, j));
            sum[d] += area * (g[0] * g[0] + g[1] * g[1]);
            weight[d] += area;
        }
    }
    let values = (0..n)
        .map(|d| sigma.coeffs()[d] * sum[d] / weight[d])
        .collect();
    ScalarField::new(space.clone(), values)
}

/// Per-element minimum of det[∇u₁, ∇u₂] over the degree-5 quadrature points.
pub fn determinant_diagnostic(u1: &ScalarField, u2: &ScalarField) -> Result<Vec<f64>> {
    if !u1.same_space(u2) {
        return Err(Error::InvalidArgument(
            "determinant of potentials on different spaces".into(),
        ));
    }
    let rule = QuadratureRule::degree5();
    Ok((0..u1.space().num_cells())
        .map(|cell| {
            rule.points
                .iter()
                .map(|l| {
                    let a = u1.grad_in_cell(cell, *l);
                    let b = u2.grad_in_cell(cell, *l);
                    a[0] * b[1] - a[1] * b[0]
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect())
}

/// Multiplicative Gaussian noise H(1 + δN) on stream 0 of the seed.
pub fn add_noise(h: &ScalarField, delta: f64, seed: u64) -> Result<ScalarField> {
    add_noise_stream(h, delta, seed, 0)
}

/// Multiplicative Gaussian noise drawn from ChaCha20 seeded by `seed`,
/// using the independent sub-stream `stream` (one per data field).
pub fn add_noise_stream(h: &ScalarField, delta: f64, seed: u64, stream: u64) -> Result<ScalarField> {
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "noise level must be a finite non-negative number, got {delta}"
        )));
    }
    if delta == 0.0 {
        return Ok(h.clone());
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let values = h
        .coeffs()
        .iter()
        .map(|&v| {
            let n: f64 = StandardNormal.sample(&mut rng);
            v * (1.0 + delta * n)
        })
        .collect();
    h.with_coeffs(values)
}

/// Settings for synthesizing data on a finer mesh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataSpec {
    pub fine_h: f64,
    pub noise_level: f64,
    pub seed: u64,
    #[serde(default)]
    pub solver: LinearSolver,
}

/// Descriptive header of a power-density data set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataHeader {
    pub mesh_hash: String,
    pub fine_mesh_hash: String,
    pub coarse_h: f64,
    pub fine_h: f64,
    pub degree: Degree,
    pub bc_ids: Vec<String>,
    pub noise_level: f64,
    pub seed: u64,
}

/// Power densities H_i on the reconstruction space, one per excitation.
#[derive(Debug, Clone)]
pub struct PowerDensity {
    pub header: DataHeader,
    pub fields: Vec<ScalarField>,
}

const DATA_MAGIC: &str = "# aetomo power density v1";

impl PowerDensity {
    pub fn noise_level(&self) -> f64 {
        self.header.noise_level
    }

    pub fn seed(&self) -> u64 {
        self.header.seed
    }

    pub fn bc_ids(&self) -> &[String] {
        &self.header.bc_ids
    }

    pub fn boundary_conditions(&self) -> Result<Vec<BoundaryCondition>> {
        self.header.bc_ids.iter().map(|id| BoundaryCondition::from_id(id)).collect()
    }

    pub fn space(&self) -> &Arc<FunctionSpace> {
        self.fields[0].space()
    }

    /// Versioned text form: a `key value` header, then one CSV block per field.
    pub fn write(&self, out: &mut impl Write) -> Result<()> {
        let h = &self.header;
        writeln!(out, "{DATA_MAGIC}")?;
        writeln!(out, "mesh_hash {}", h.mesh_hash)?;
        writeln!(out, "fine_mesh_hash {}", h.fine_mesh_hash)?;
        writeln!(out, "coarse_h {}", h.coarse_h)?;
        writeln!(out, "fine_h {}", h.fine_h)?;
        writeln!(out, "degree {}", h.degree.order())?;
        writeln!(out, "bcs {}", h.bc_ids.join(","))?;
        writeln!(out, "noise_level {}", h.noise_level)?;
        writeln!(out, "seed {}", h.seed)?;
        writeln!(out, "fields {}", self.fields.len())?;
        for (id, field) in h.bc_ids.iter().zip(&self.fields) {
            writeln!(out, "[field {id}]")?;
            writeln!(out, "dof_index,x,y,value")?;
            write_field_rows(field, out)?;
        }
        Ok(())
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write(&mut out)?;
        out.flush()?;
        Ok(())
    }

    /// Reads only the header of a data file.
    pub fn read_header(path: &Path) -> Result<DataHeader> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut lines = Vec::new();
        for line in file.lines() {
            let line = line?;
            if line.starts_with('[') {
                break;
            }
            lines.push(line);
        }
        parse_header(&lines, path).map(|(h, _)| h)
    }

    /// Reads a data file onto `space`, which must be built on the mesh the
    /// data was generated for (checked by hash) with the stored degree.
    pub fn read(path: &Path, space: &Arc<FunctionSpace>) -> Result<PowerDensity> {
        let text = std::fs::read_to_string(path)?;
        let lines: Vec<&str> = text.lines().collect();
        let split = lines.iter().position(|l| l.starts_with('[')).unwrap_or(lines.len());
        let header_lines: Vec<String> = lines[..split].iter().map(|s| s.to_string()).collect();
        let (header, count) = parse_header(&header_lines, path)?;
        if header.mesh_hash != space.mesh().content_hash() {
            return Err(Error::Config(format!(
                "{} was generated for a different mesh (hash mismatch)",
                path.display()
            )));
        }
        if header.degree != space.degree() {
            return Err(Error::Config(format!(
                "{} holds {:?} data but the reconstruction space is {:?}",
                path.display(),
                header.degree,
                space.degree()
            )));
        }
        let mut fields = Vec::new();
        let mut i = split;
        while i < lines.len() {
            let tag = lines[i].trim();
            if tag.is_empty() {
                i += 1;
                continue;
            }
            let id = tag
                .strip_prefix("[field ")
                .and_then(|t| t.strip_suffix(']'))
                .ok_or_else(|| Error::parse(path, format!("expected a field block, found `{tag}`")))?;
            if header.bc_ids.get(fields.len()).map(String::as_str) != Some(id) {
                return Err(Error::parse(path, format!("unexpected field block `{id}`")));
            }
            let end = lines[i + 1..]
                .iter()
                .position(|l| l.starts_with('['))
                .map_or(lines.len(), |p| i + 1 + p);
            let rows = lines[i + 1..end].iter().copied().filter(|l| !l.trim().is_empty());
            fields.push(parse_field_rows(space, rows, path)?);
            i = end;
        }
        if fields.len() != count || count != header.bc_ids.len() {
            return Err(Error::parse(
                path,
                format!("expected {count} field blocks, found {}", fields.len()),
            ));
        }
        Ok(PowerDensity { header, fields })
    }
}

fn parse_header(lines: &[String], path: &Path) -> Result<(DataHeader, usize)> {
    let mut it = lines.iter().map(|l| l.trim()).filter(|l| !l.is_empty());
    if it.next() != Some(DATA_MAGIC) {
        return Err(Error::parse(path, "not an aetomo power density file (bad first line)"));
    }
    let mut get = std::collections::HashMap::new();
    for line in it {
        let (k, v) = line
            .split_once(' ')
            .ok_or_else(|| Error::parse(path, format!("bad header line `{line}`")))?;
        get.insert(k.to_string(), v.trim().to_string());
    }
    let field = |k: &str| {
        get.get(k)
            .cloned()
            .ok_or_else(|| Error::parse(path, format!("missing header key `{k}`")))
    };
    let num = |k: &str| -> Result<f64> {
        field(k)?
            .parse()
            .map_err(|_| Error::parse(path, format!("header key `{k}` is not a number")))
    };
    let int = |k: &str| -> Result<u64> {
        field(k)?
            .parse()
            .map_err(|_| Error::parse(path, format!("header key `{k}` is not an integer")))
    };
    let degree = Degree::from_order(int("degree")? as usize)
        .map_err(|_| Error::parse(path, "header degree must be 1 or 2"))?;
    let header = DataHeader {
        mesh_hash: field("mesh_hash")?,
        fine_mesh_hash: field("fine_mesh_hash")?,
        coarse_h: num("coarse_h")?,
        fine_h: num("fine_h")?,
        degree,
        bc_ids: field("bcs")?.split(',').map(|s| s.trim().to_string()).collect(),
        noise_level: num("noise_level")?,
        seed: int("seed")?,
    };
    Ok((header, int("fields")? as usize))
}

/// Inverse-crime guard: the data mesh must be at least twice as fine.
pub fn check_fine_h(fine_h: f64, coarse_h: f64) -> Result<()> {
    if !(fine_h > 0.0) || fine_h > coarse_h / 2.0 + 1e-12 {
        return Err(Error::Config(format!(
            "data mesh size {fine_h} must satisfy 0 < fine_h <= coarse_h/2 = {}",
            coarse_h / 2.0
        )));
    }
    Ok(())
}

/// Synthesizes power densities for `truth` on the reconstruction space.
///
/// Potentials are P2 on a mesh of size `spec.fine_h`; σ and H on that mesh
/// use the degree of `coarse_space`. H is projected onto `coarse_space` by
/// point evaluation and then perturbed with `spec.noise_level`, field `i`
/// drawing from noise stream `i`.
pub fn generate_data(
    truth: impl Fn(f64, f64) -> f64,
    bcs: &[BoundaryCondition],
    coarse_space: &Arc<FunctionSpace>,
    spec: &DataSpec,
) -> Result<PowerDensity> {
    if !(2..=3).contains(&bcs.len()) {
        return Err(Error::Config(format!(
            "power density data needs 2 or 3 boundary conditions, got {}",
            bcs.len()
        )));
    }
    let coarse_h = coarse_space.mesh().target_h();
    check_fine_h(spec.fine_h, coarse_h)?;
    if !(spec.noise_level >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "noise level must be non-negative, got {}",
            spec.noise_level
        )));
    }
    let fine_mesh = Arc::new(generate_disk_mesh(spec.fine_h)?);
    let fine_mesh_hash = fine_mesh.content_hash();
    let potential_space = FunctionSpace::new(fine_mesh.clone(), Degree::P2);
    let sigma_space = match coarse_space.degree() {
        Degree::P2 => potential_space.clone(),
        Degree::P1 => FunctionSpace::new(fine_mesh, Degree::P1),
    };
    let sigma = ScalarField::interpolate(sigma_space, truth);
    let solver = ForwardSolver::new(&sigma, &potential_space, spec.solver)?;
    let mut fields = Vec::with_capacity(bcs.len());
    for (i, bc) in bcs.iter().enumerate() {
        let u = solver.solve(bc)?;
        let h_fine = power_density(&sigma, &u)?;
        let h = project_between_meshes(&h_fine, coarse_space)?;
        fields.push(add_noise_stream(&h, spec.noise_level, spec.seed, i as u64)?);
    }
    Ok(PowerDensity {
        header: DataHeader {
            mesh_hash: coarse_space.mesh().content_hash(),
            fine_mesh_hash,
            coarse_h,
            fine_h: spec.fine_h,
            degree: coarse_space.degree(),
            bc_ids: bcs.iter().map(|b| b.id.clone()).collect(),
            noise_level: spec.noise_level,
            seed: spec.seed,
        },
        fields,
    })
}
