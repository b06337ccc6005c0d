//! Conforming triangulations of the unit disk.
//!
//! Meshes are generated from concentric rings of points (ring spacing and arc
//! spacing both close to the requested size) followed by a Delaunay
//! triangulation of the point set. Boundary vertices sit exactly on the unit
//! circle. A mesh is immutable once built; the point locator used for
//! cross-mesh projection is built lazily on first use.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::OnceLock;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Distance outside the unit circle that is still accepted by point location.
pub const OUTSIDE_TOLERANCE: f64 = 1e-9;

/// Affine data of one triangle.
#[derive(Debug, Clone, Copy)]
pub struct CellGeometry {
    pub area: f64,
    /// Gradients of the three barycentric coordinate functions.
    pub grad_bary: [[f64; 2]; 3],
}

/// Result of [`Mesh::locate_point`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Location {
    pub triangle: usize,
    pub bary: [f64; 3],
}

#[derive(Debug)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<usize>,
    is_boundary: Vec<bool>,
    target_h: f64,
    geometry: Vec<CellGeometry>,
    locator: OnceLock<PointLocator>,
}

impl Clone for Mesh {
    fn clone(&self) -> Self {
        Mesh {
            vertices: self.vertices.clone(),
            triangles: self.triangles.clone(),
            boundary: self.boundary.clone(),
            is_boundary: self.is_boundary.clone(),
            target_h: self.target_h,
            geometry: self.geometry.clone(),
            locator: OnceLock::new(),
        }
    }
}

/// Generate a mesh of the unit disk with nominal element size `h`.
pub fn generate_disk_mesh(h: f64) -> Result<Mesh> {
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "mesh size must satisfy 0 < h < 1, got {h}"
        )));
    }
    let rings = ((1.0 / h) - 1e-9).ceil().max(1.0) as usize;
    let mut vertices: Vec<Point> = vec![[0.0, 0.0]];
    let mut boundary = Vec::new();
    for i in 1..=rings {
        let r = if i == rings { 1.0 } else { i as f64 / rings as f64 };
        let count = ((2.0 * PI * r / h).round() as usize).max(6);
        let shift = if i % 2 == 1 { 0.5 } else { 0.0 };
        for j in 0..count {
            let theta = 2.0 * PI * (j as f64 + shift) / count as f64;
            if i == rings {
                boundary.push(vertices.len());
            }
            vertices.push([r * theta.cos(), r * theta.sin()]);
        }
    }

    let points: Vec<delaunator::Point> = vertices
        .iter()
        .map(|p| delaunator::Point { x: p[0], y: p[1] })
        .collect();
    let triangulation = delaunator::triangulate(&points);
    let area_floor = 1e-12 * h * h;
    let mut triangles = Vec::with_capacity(triangulation.triangles.len() / 3);
    for t in triangulation.triangles.chunks_exact(3) {
        let mut tri = [t[0], t[1], t[2]];
        let a = signed_area(&vertices, tri);
        if a.abs() <= area_floor {
            continue;
        }
        if a < 0.0 {
            tri.swap(1, 2);
        }
        triangles.push(tri);
    }
    Mesh::from_parts(vertices, triangles, boundary, h)
}

fn signed_area(vertices: &[Point], tri: [usize; 3]) -> f64 {
    let [a, b, c] = tri.map(|i| vertices[i]);
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

impl Mesh {
    /// Build a mesh from raw parts, checking every structural invariant.
    pub fn from_parts(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        mut boundary: Vec<usize>,
        target_h: f64,
    ) -> Result<Mesh> {
        let nv = vertices.len();
        let invalid = |msg: String| Err(Error::InvalidArgument(msg));
        if nv < 3 || triangles.is_empty() {
            return invalid("mesh needs at least one triangle".into());
        }
        boundary.sort_unstable();
        boundary.dedup();
        let mut is_boundary = vec![false; nv];
        for &b in &boundary {
            if b >= nv {
                return invalid(format!("boundary index {b} out of range"));
            }
            let r = (vertices[b][0].powi(2) + vertices[b][1].powi(2)).sqrt();
            if (r - 1.0).abs() > 1e-10 {
                return invalid(format!("boundary vertex {b} has radius {r}, not 1"));
            }
            is_boundary[b] = true;
        }
        let mut geometry = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&i| i >= nv) {
                return invalid(format!("triangle {t} references a missing vertex"));
            }
            let area = signed_area(&vertices, *tri);
            if !(area > 0.0) {
                return invalid(format!("triangle {t} has non-positive area {area}"));
            }
            geometry.push(cell_geometry(&vertices, *tri, area));
        }

        let mut edge_use: HashMap<(usize, usize), u8> = HashMap::new();
        for tri in &triangles {
            for (a, b) in local_edges(*tri) {
                *edge_use.entry(edge_key(a, b)).or_insert(0) += 1;
            }
        }
        for (&(a, b), &n) in &edge_use {
            if n > 2 {
                return invalid(format!("edge ({a}, {b}) is shared by {n} triangles"));
            }
            if n == 1 && !(is_boundary[a] && is_boundary[b]) {
                return invalid(format!("hull edge ({a}, {b}) has an interior endpoint"));
            }
        }

        // connectivity through shared vertices
        let mut parent: Vec<usize> = (0..nv).collect();
        fn find(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        for tri in &triangles {
            for k in 1..3 {
                let (ra, rb) = (find(&mut parent, tri[0]), find(&mut parent, tri[k]));
                parent[ra] = rb;
            }
        }
        let mut used = vec![false; nv];
        triangles.iter().flatten().for_each(|&i| used[i] = true);
        if used.iter().any(|u| !u) {
            return invalid("mesh contains unreferenced vertices".into());
        }
        let root = find(&mut parent, 0);
        if (0..nv).any(|i| find(&mut parent, i) != root) {
            return invalid("mesh is not connected".into());
        }

        Ok(Mesh {
            vertices,
            triangles,
            boundary,
            is_boundary,
            target_h,
            geometry,
            locator: OnceLock::new(),
        })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Sorted indices of the vertices on the unit circle.
    pub fn boundary_vertices(&self) -> &[usize] {
        &self.boundary
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.is_boundary[v]
    }

    pub fn target_h(&self) -> f64 {
        self.target_h
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn geometry(&self, t: usize) -> &CellGeometry {
        &self.geometry[t]
    }

    pub fn area(&self, t: usize) -> f64 {
        self.geometry[t].area
    }

    pub fn total_area(&self) -> f64 {
        self.geometry.iter().map(|g| g.area).sum()
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.triangles[t].map(|i| self.vertices[i]);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    /// Unique undirected edges, numbered in order of first appearance.
    pub fn edges(&self) -> Vec<[usize; 2]> {
        let mut seen = HashMap::new();
        let mut edges = Vec::new();
        for tri in &self.triangles {
            for (a, b) in local_edges(*tri) {
                seen.entry(edge_key(a, b)).or_insert_with(|| {
                    edges.push([a.min(b), a.max(b)]);
                    edges.len() - 1
                });
            }
        }
        edges
    }

    pub fn mean_edge_length(&self) -> f64 {
        let edges = self.edges();
        let total: f64 = edges
            .iter()
            .map(|&[a, b]| dist(self.vertices[a], self.vertices[b]))
            .sum();
        total / edges.len() as f64
    }

    /// Map barycentric coordinates of triangle `t` to a point.
    pub fn map_to_physical(&self, t: usize, bary: [f64; 3]) -> Point {
        let [a, b, c] = self.triangles[t].map(|i| self.vertices[i]);
        [
            bary[0] * a[0] + bary[1] * b[0] + bary[2] * c[0],
            bary[0] * a[1] + bary[1] * b[1] + bary[2] * c[1],
        ]
    }

    /// Affine barycentric coordinates of `p` with respect to triangle `t`.
    pub fn barycentric(&self, t: usize, p: Point) -> [f64; 3] {
        let a = self.vertices[self.triangles[t][0]];
        let g = &self.geometry[t].grad_bary;
        let d = [p[0] - a[0], p[1] - a[1]];
        let l1 = g[1][0] * d[0] + g[1][1] * d[1];
        let l2 = g[2][0] * d[0] + g[2][1] * d[1];
        [1.0 - l1 - l2, l1, l2]
    }

    /// Find the triangle containing `p`.
    ///
    /// Points between the polygonal hull and the unit circle are assigned to
    /// the nearest element; their barycentric coordinates are the affine
    /// ones of that element and may be slightly negative.
    pub fn locate_point(&self, p: Point) -> Result<Location> {
        self.locator
            .get_or_init(|| PointLocator::new(self))
            .locate(self, p)
    }

    /// Stable content hash of the mesh (SHA-256 of its text serialization).
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# aetomo mesh v1");
        let _ = writeln!(s, "# target_h {}", self.target_h);
        let _ = writeln!(s, "{}", self.vertices.len());
        for v in &self.vertices {
            let _ = writeln!(s, "{} {}", v[0], v[1]);
        }
        let _ = writeln!(s, "{}", self.triangles.len());
        for t in &self.triangles {
            let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
        }
        let line: Vec<String> = self.boundary.iter().map(|b| b.to_string()).collect();
        let _ = writeln!(s, "{}", line.join(" "));
        s
    }

    pub fn write_text(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read_text(path: &Path) -> Result<Mesh> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut target_h = None;
        let mut lines = Vec::new();
        for line in file.lines() {
            let line = line?;
            let trimmed = line.trim();
            if let Some(rest) = trimmed.strip_prefix('#') {
                if let Some(h) = rest.trim().strip_prefix("target_h") {
                    target_h = h.trim().parse::<f64>().ok();
                }
                continue;
            }
            lines.push(line);
        }
        let bad = |m: &str| Error::parse(path, m);
        let mut it = lines.iter();
        let mut next = |what: &str| it.next().ok_or_else(|| bad(&format!("missing {what}")));
        let nv: usize = next("vertex count")?.trim().parse().map_err(|_| bad("vertex count"))?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let nums = parse_numbers::<f64>(next("vertex")?).ok_or_else(|| bad("vertex line"))?;
            if nums.len() != 2 {
                return Err(bad("vertex line must hold two numbers"));
            }
            vertices.push([nums[0], nums[1]]);
        }
        let nt: usize = next("triangle count")?.trim().parse().map_err(|_| bad("triangle count"))?;
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let nums = parse_numbers::<usize>(next("triangle")?).ok_or_else(|| bad("triangle line"))?;
            if nums.len() != 3 {
                return Err(bad("triangle line must hold three indices"));
            }
            triangles.push([nums[0], nums[1], nums[2]]);
        }
        let boundary = parse_numbers::<usize>(next("boundary line")?).ok_or_else(|| bad("boundary line"))?;
        let mut mesh = Mesh::from_parts(vertices, triangles, boundary, 0.0)?;
        mesh.target_h = target_h.unwrap_or_else(|| mesh.mean_edge_length());
        Ok(mesh)
    }

    /// Legacy ASCII VTK export of the bare triangulation.
    pub fn write_vtk(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "# vtk DataFile Version 3.0")?;
        writeln!(out, "aetomo mesh")?;
        writeln!(out, "ASCII")?;
        writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
        writeln!(out, "POINTS {} double", self.vertices.len())?;
        for v in &self.vertices {
            writeln!(out, "{} {} 0", v[0], v[1])?;
        }
        let nt = self.triangles.len();
        writeln!(out, "CELLS {} {}", nt, 4 * nt)?;
        for t in &self.triangles {
            writeln!(out, "3 {} {} {}", t[0], t[1], t[2])?;
        }
        writeln!(out, "CELL_TYPES {nt}")?;
        for _ in 0..nt {
            writeln!(out, "5")?;
        }
        Ok(())
    }
}

fn parse_numbers<T: std::str::FromStr>(line: &str) -> Option<Vec<T>> {
    line.split_whitespace().map(|t| t.parse().ok()).collect()
}

fn cell_geometry(vertices: &[Point], tri: [usize; 3], area: f64) -> CellGeometry {
    let [a, b, c] = tri.map(|i| vertices[i]);
    CellGeometry::with_area(a, b, c, area)
}

impl CellGeometry {
    pub fn from_vertices(a: Point, b: Point, c: Point) -> CellGeometry {
        let area = 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]));
        Self::with_area(a, b, c, area)
    }

    fn with_area(a: Point, b: Point, c: Point, area: f64) -> CellGeometry {
    let two_a = 2.0 * area;
    CellGeometry {
        area,
        grad_bary: [
            [(b[1] - c[1]) / two_a, (c[0] - b[0]) / two_a],
            [(c[1] - a[1]) / two_a, (a[0] - c[0]) / two_a],
            [(a[1] - b[1]) / two_a, (b[0] - a[0]) / two_a],
        ],
    }
    }
}

pub(crate) fn local_edges(tri: [usize; 3]) -> [(usize, usize); 3] {
    [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])]
}

pub(crate) fn edge_key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Uniform bucket grid over the bounding box; each bucket lists the
/// triangles whose bounding boxes overlap it.
#[derive(Debug)]
struct PointLocator {
    origin: Point,
    cell: f64,
    dim: usize,
    offsets: Vec<usize>,
    items: Vec<usize>,
}

impl PointLocator {
    fn new(mesh: &Mesh) -> PointLocator {
        let (mut lo, mut hi) = ([f64::MAX; 2], [f64::MIN; 2]);
        for v in &mesh.vertices {
            for k in 0..2 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        let extent = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-12);
        let mean_h = (mesh.total_area() / mesh.num_triangles() as f64 * 2.0).sqrt();
        let dim = ((extent / mean_h).ceil() as usize).clamp(1, 2048);
        let cell = extent / dim as f64 * (1.0 + 1e-12);
        let bucket = |x: f64, k: usize| (((x - lo[k]) / cell).floor().max(0.0) as usize).min(dim - 1);

        let mut counts = vec![0usize; dim * dim + 1];
        let mut ranges = Vec::with_capacity(mesh.num_triangles());
        for tri in &mesh.triangles {
            let pts = tri.map(|i| mesh.vertices[i]);
            let (mut blo, mut bhi) = ([usize::MAX; 2], [0usize; 2]);
            for p in pts {
                for k in 0..2 {
                    blo[k] = blo[k].min(bucket(p[k], k));
                    bhi[k] = bhi[k].max(bucket(p[k], k));
                }
            }
            for i in blo[0]..=bhi[0] {
                for j in blo[1]..=bhi[1] {
                    counts[i * dim + j + 1] += 1;
                }
            }
            ranges.push((blo, bhi));
        }
        for i in 0..dim * dim {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut items = vec![0usize; counts[dim * dim]];
        for (t, (blo, bhi)) in ranges.into_iter().enumerate() {
            for i in blo[0]..=bhi[0] {
                for j in blo[1]..=bhi[1] {
                    let slot = &mut fill[i * dim + j];
                    items[*slot] = t;
                    *slot += 1;
                }
            }
        }
        PointLocator {
            origin: lo,
            cell,
            dim,
            offsets: counts,
            items,
        }
    }

    fn bucket_of(&self, p: Point) -> (isize, isize) {
        let i = ((p[0] - self.origin[0]) / self.cell).floor() as isize;
        let j = ((p[1] - self.origin[1]) / self.cell).floor() as isize;
        (i, j)
    }

    fn candidates(&self, i: isize, j: isize) -> &[usize] {
        if i < 0 || j < 0 || i >= self.dim as isize || j >= self.dim as isize {
            return &[];
        }
        let b = i as usize * self.dim + j as usize;
        &self.items[self.offsets[b]..self.offsets[b + 1]]
    }

    fn locate(&self, mesh: &Mesh, p: Point) -> Result<Location> {
        let radius = (p[0] * p[0] + p[1] * p[1]).sqrt();
        if !(radius <= 1.0 + OUTSIDE_TOLERANCE) {
            return Err(Error::PointOutsideDomain { x: p[0], y: p[1] });
        }
        let (bi, bj) = self.bucket_of(p);
        let mut best: Option<(f64, Location)> = None;
        let consider = |t: usize, best: &mut Option<(f64, Location)>| {
            let bary = mesh.barycentric(t, p);
            let score = bary[0].min(bary[1]).min(bary[2]);
            if best.as_ref().is_none_or(|(s, _)| score > *s) {
                *best = Some((score, Location { triangle: t, bary }));
            }
        };
        for &t in self.candidates(bi, bj) {
            consider(t, &mut best);
        }
        if let Some((score, loc)) = best {
            if score >= -OUTSIDE_TOLERANCE {
                return Ok(loc);
            }
        }
        let mut near = Vec::new();
        for di in -1..=1 {
            for dj in -1..=1 {
                near.extend_from_slice(self.candidates(bi + di, bj + dj));
            }
        }
        for &t in &near {
            consider(t, &mut best);
        }
        if let Some((score, loc)) = best {
            if score >= -OUTSIDE_TOLERANCE {
                return Ok(loc);
            }
        }
        // brute-force containment before falling back to the nearest element
        for t in 0..mesh.num_triangles() {
            let bary = mesh.barycentric(t, p);
            if bary.iter().all(|&b| b >= -OUTSIDE_TOLERANCE) {
                return Ok(Location { triangle: t, bary });
            }
        }
        let pool: Vec<usize> = if near.is_empty() {
            (0..mesh.num_triangles()).collect()
        } else {
            near
        };
        let nearest = pool
            .into_iter()
            .map(|t| (distance_to_triangle(mesh, t, p), t))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, t)| t)
            .ok_or(Error::PointOutsideDomain { x: p[0], y: p[1] })?;
        Ok(Location {
            triangle: nearest,
            bary: mesh.barycentric(nearest, p),
        })
    }
}

fn distance_to_triangle(mesh: &Mesh, t: usize, p: Point) -> f64 {
    let bary = mesh.barycentric(t, p);
    if bary.iter().all(|&b| b >= 0.0) {
        return 0.0;
    }
    let pts = mesh.triangles[t].map(|i| mesh.vertices[i]);
    (0..3)
        .map(|k| segment_distance(p, pts[k], pts[(k + 1) % 3]))
        .fold(f64::MAX, f64::min)
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let s = ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0);
    dist(p, [a[0] + s * ab[0], a[1] + s * ab[1]])
}
