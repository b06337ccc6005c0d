//! Heat-map rendering of fields on the unit disk.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fem::ScalarField;

pub const IMAGE_SIZE: usize = 800;
/// Color scale shared by all renders of the bundled phantoms.
pub const COLOR_RANGE: (f64, f64) = (0.0, 3.2);

const VIRIDIS: [[f64; 3]; 9] = [
    [68.0, 1.0, 84.0],
    [71.0, 44.0, 122.0],
    [59.0, 81.0, 139.0],
    [44.0, 113.0, 142.0],
    [33.0, 144.0, 141.0],
    [39.0, 173.0, 129.0],
    [92.0, 200.0, 99.0],
    [170.0, 220.0, 50.0],
    [253.0, 231.0, 37.0],
];

/// Piecewise-linear viridis approximation; `t` is clamped to [0, 1].
pub fn colormap(t: f64) -> [u8; 3] {
    let t = if t.is_nan() { 0.0 } else { t.clamp(0.0, 1.0) };
    let x = t * (VIRIDIS.len() - 1) as f64;
    let i = (x.floor() as usize).min(VIRIDIS.len() - 2);
    let w = x - i as f64;
    let mut rgb = [0u8; 3];
    for c in 0..3 {
        rgb[c] = ((1.0 - w) * VIRIDIS[i][c] + w * VIRIDIS[i + 1][c]).round() as u8;
    }
    rgb
}

/// Samples `field` at pixel centers of a `size`×`size` grid over
/// [−1, 1]², row 0 at the top. Pixels outside the mesh are `None`.
pub fn rasterize(field: &ScalarField, size: usize) -> Vec<Option<f64>> {
    let mesh = field.space().mesh();
    let mut pixels = vec![None; size * size];
    let step = 2.0 / size as f64;
    let to_col = |x: f64| (x + 1.0) / step - 0.5;
    let to_row = |y: f64| (1.0 - y) / step - 0.5;
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let p = tri.map(|v| mesh.vertices()[v]);
        let (xmin, xmax) = p.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), q| (a.min(q[0]), b.max(q[0])));
        let (ymin, ymax) = p.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), q| (a.min(q[1]), b.max(q[1])));
        let c0 = to_col(xmin).ceil().max(0.0) as usize;
        let c1 = (to_col(xmax).floor() as isize).min(size as isize - 1);
        let r0 = to_row(ymax).ceil().max(0.0) as usize;
        let r1 = (to_row(ymin).floor() as isize).min(size as isize - 1);
        if c1 < 0 || r1 < 0 {
            continue;
        }
        for row in r0..=r1 as usize {
            let y = 1.0 - (row as f64 + 0.5) * step;
            for col in c0..=c1 as usize {
                let x = -1.0 + (col as f64 + 0.5) * step;
                let l = mesh.barycentric(t, [x, y]);
                if l.iter().all(|&li| li >= -1e-12) {
                    pixels[row * size + col] = Some(field.eval_in_cell(t, l));
                }
            }
        }
    }
    pixels
}

/// RGB PNG of `field` on the fixed color scale; white outside the disk.
pub fn write_png(field: &ScalarField, out: impl Write) -> Result<()> {
    write_png_scaled(field, IMAGE_SIZE, COLOR_RANGE, out)
}

pub fn write_png_scaled(field: &ScalarField, size: usize, range: (f64, f64), out: impl Write) -> Result<()> {
    if !(range.1 > range.0) {
        return Err(Error::InvalidArgument(format!("empty color range {range:?}")));
    }
    let mut data = Vec::with_capacity(size * size * 3);
    for v in rasterize(field, size) {
        match v {
            Some(v) => data.extend(colormap((v - range.0) / (range.1 - range.0))),
            None => data.extend([255, 255, 255]),
        }
    }
    let mut enc = png::Encoder::new(out, size as u32, size as u32);
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    let png_err = |e: png::EncodingError| Error::Io(std::io::Error::other(e));
    let mut writer = enc.write_header().map_err(png_err)?;
    writer.write_image_data(&data).map_err(png_err)?;
    writer.finish().map_err(png_err)
}

pub fn write_png_file(field: &ScalarField, path: &Path) -> Result<()> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_png(field, file)
}
