//! Triangulates the unit disk at a few sizes and writes the finest one as VTK.
//!
//!     cargo run --release --example mesh_disk

use aetomo::mesh::generate_disk_mesh;

fn main() -> aetomo::Result<()> {
    for h in [0.2, 0.1, 0.05, 0.02] {
        let mesh = generate_disk_mesh(h)?;
        println!(
            "h = {h:<5} vertices {:>6}  triangles {:>6}  boundary {:>4}  mean edge {:.4}  area {:.6}",
            mesh.num_vertices(),
            mesh.num_triangles(),
            mesh.boundary_vertices().len(),
            mesh.mean_edge_length(),
            mesh.total_area(),
        );
    }
    let path = std::env::temp_dir().join("aetomo_disk.vtk");
    let mut f = std::io::BufWriter::new(std::fs::File::create(&path)?);
    generate_disk_mesh(0.05)?.write_vtk(&mut f)?;
    println!("wrote {}", path.display());
    Ok(())
}
