//! Plain-text exports of finite element fields.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::space::{Degree, FunctionSpace, ScalarField};

/// Writes `dof_index,x,y,value` rows, one per degree of freedom.
pub fn write_field_csv(field: &ScalarField, out: &mut impl Write) -> Result<()> {
    writeln!(out, "dof_index,x,y,value")?;
    write_field_rows(field, out)
}

/// Rows without the header line, for embedding in larger files.
pub(crate) fn write_field_rows(field: &ScalarField, out: &mut impl Write) -> Result<()> {
    for (d, (p, v)) in field
        .space()
        .dof_coordinates()
        .iter()
        .zip(field.coeffs())
        .enumerate()
    {
        writeln!(out, "{d},{:.17e},{:.17e},{:.17e}", p[0], p[1], v)?;
    }
    Ok(())
}

/// Parses CSV rows produced by [`write_field_csv`] back onto `space`.
///
/// Every dof must appear exactly once; the stored coordinates are checked
/// against the space so that data from a different mesh is rejected.
pub fn read_field_csv(space: &Arc<FunctionSpace>, text: &str, path: &Path) -> Result<ScalarField> {
    let rows = text.lines().filter(|l| !l.trim().is_empty());
    parse_field_rows(space, rows, path)
}

pub(crate) fn parse_field_rows<'a>(
    space: &Arc<FunctionSpace>,
    rows: impl Iterator<Item = &'a str>,
    path: &Path,
) -> Result<ScalarField> {
    let n = space.num_dofs();
    let mut values = vec![f64::NAN; n];
    let mut seen = vec![false; n];
    for line in rows {
        if line.starts_with("dof_index") {
            continue;
        }
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(Error::parse(path, format!("expected 4 columns in `{line}`")));
        }
        let d: usize = parts[0]
            .parse()
            .map_err(|_| Error::parse(path, format!("bad dof index `{}`", parts[0])))?;
        let nums = parts[1..]
            .iter()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|_| Error::parse(path, format!("bad number in `{line}`")))?;
        if d >= n || seen[d] {
            return Err(Error::parse(path, format!("dof index {d} out of range or repeated")));
        }
        let p = space.dof_coordinates()[d];
        if (p[0] - nums[0]).abs() > 1e-9 || (p[1] - nums[1]).abs() > 1e-9 {
            return Err(Error::parse(
                path,
                format!("dof {d} coordinates do not match the mesh"),
            ));
        }
        seen[d] = true;
        values[d] = nums[2];
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::parse(path, format!("dof {missing} missing")));
    }
    ScalarField::new(space.clone(), values)
}

/// Legacy ASCII VTK unstructured grid with point data for each named field.
///
/// P1 fields use linear triangles, P2 fields quadratic triangles whose
/// extra nodes are the edge dofs.
pub fn write_fields_vtk(
    space: &Arc<FunctionSpace>,
    fields: &[(&str, &ScalarField)],
    out: &mut impl Write,
) -> Result<()> {
    for (name, f) in fields {
        if !Arc::ptr_eq(f.space(), space) {
            return Err(Error::InvalidArgument(format!(
                "field `{name}` is not defined on the export space"
            )));
        }
    }
    let (nl, cell_type) = match space.degree() {
        Degree::P1 => (3, 5),
        Degree::P2 => (6, 22),
    };
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "aetomo field")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {} double", space.num_dofs())?;
    for p in space.dof_coordinates() {
        writeln!(out, "{} {} 0", p[0], p[1])?;
    }
    let nc = space.num_cells();
    writeln!(out, "CELLS {} {}", nc, (nl + 1) * nc)?;
    for cell in 0..nc {
        write!(out, "{nl}")?;
        for d in space.cell_dofs(cell) {
            write!(out, " {d}")?;
        }
        writeln!(out)?;
    }
    writeln!(out, "CELL_TYPES {nc}")?;
    for _ in 0..nc {
        writeln!(out, "{cell_type}")?;
    }
    if !fields.is_empty() {
        writeln!(out, "POINT_DATA {}", space.num_dofs())?;
        for (name, f) in fields {
            writeln!(out, "SCALARS {name} double 1")?;
            writeln!(out, "LOOKUP_TABLE default")?;
            for v in f.coeffs() {
                writeln!(out, "{v}")?;
            }
        }
    }
    Ok(())
}
