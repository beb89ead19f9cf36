//! Legacy ASCII VTK export for meshes, fields and test cube grids.
//!
//! Two dataset shapes are written: the simplex mesh as an unstructured grid
//! of triangles or tetrahedra, and a test cube grid as pixel or voxel cells
//! (each cell carries its own corner points, listed x fastest as the voxel
//! type requires). 2-D data gets a zero third coordinate. Output is plain
//! text, deterministic, and written atomically like the matrix containers.

use std::io::Write;
use std::path::Path;

use crate::elasticity::DisplacementField;
use crate::error::{CoreError, Result};
use crate::geometry::BoxRegion;
use crate::mesh::{Mesh, TestCubeGrid};

/// One scalar value per cell, written as CELL_DATA.
pub struct CellScalars<'a> {
    pub name: &'a str,
    pub values: &'a [f64],
}

const TRIANGLE: u8 = 5;
const PIXEL: u8 = 8;
const TETRAHEDRON: u8 = 10;
const VOXEL: u8 = 11;

fn check_name(name: &str) -> Result<()> {
    if name.is_empty() || name.contains(char::is_whitespace) {
        return Err(CoreError::invalid(format!("'{name}' is not a valid VTK data name")));
    }
    Ok(())
}

fn write_atomic(path: &Path, body: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.as_file().write_all(body)?;
    tmp.persist(path).map_err(|e| CoreError::Io(e.error))?;
    Ok(())
}

fn header(out: &mut Vec<u8>, title: &str) {
    out.extend_from_slice(b"# vtk DataFile Version 3.0\n");
    let mut line: String = title.chars().filter(|c| *c != '\n').take(200).collect();
    if line.is_empty() {
        line.push_str("output");
    }
    out.extend_from_slice(line.as_bytes());
    out.extend_from_slice(b"\nASCII\nDATASET UNSTRUCTURED_GRID\n");
}

fn push_point(out: &mut Vec<u8>, p: [f64; 3]) {
    out.extend_from_slice(format!("{:.9e} {:.9e} {:.9e}\n", p[0], p[1], p[2]).as_bytes());
}

fn push_cell_data(out: &mut Vec<u8>, cell_count: usize, scalars: &[CellScalars]) -> Result<()> {
    if scalars.is_empty() {
        return Ok(());
    }
    out.extend_from_slice(format!("CELL_DATA {cell_count}\n").as_bytes());
    for s in scalars {
        check_name(s.name)?;
        if s.values.len() != cell_count {
            return Err(CoreError::invalid(format!(
                "cell data '{}' has {} values for {} cells",
                s.name,
                s.values.len(),
                cell_count
            )));
        }
        out.extend_from_slice(format!("SCALARS {} double 1\nLOOKUP_TABLE default\n", s.name).as_bytes());
        for v in s.values {
            out.extend_from_slice(format!("{v:.9e}\n").as_bytes());
        }
    }
    Ok(())
}

/// Write the simplex mesh with optional per-cell scalars and an optional
/// per-vertex displacement field.
pub fn write_mesh_vtk(
    path: &Path,
    mesh: &Mesh,
    cell_scalars: &[CellScalars],
    displacement: Option<(&str, &DisplacementField)>,
) -> Result<()> {
    let dim = mesh.dimension();
    let verts_per_cell = dim + 1;
    let mut out = Vec::new();
    header(&mut out, "simplex mesh");

    out.extend_from_slice(format!("POINTS {} double\n", mesh.vertex_count()).as_bytes());
    for v in 0..mesh.vertex_count() {
        push_point(&mut out, mesh.vertex(v));
    }

    let n_cells = mesh.element_count();
    out.extend_from_slice(
        format!("CELLS {} {}\n", n_cells, n_cells * (verts_per_cell + 1)).as_bytes(),
    );
    for e in 0..n_cells {
        let ids: Vec<String> = mesh.element(e).iter().map(|v| v.to_string()).collect();
        out.extend_from_slice(format!("{} {}\n", verts_per_cell, ids.join(" ")).as_bytes());
    }
    out.extend_from_slice(format!("CELL_TYPES {n_cells}\n").as_bytes());
    let cell_type = if dim == 2 { TRIANGLE } else { TETRAHEDRON };
    for _ in 0..n_cells {
        out.extend_from_slice(format!("{cell_type}\n").as_bytes());
    }

    push_cell_data(&mut out, n_cells, cell_scalars)?;

    if let Some((name, field)) = displacement {
        check_name(name)?;
        if !field.compatible_with(mesh) {
            return Err(CoreError::invalid("displacement field belongs to a different mesh"));
        }
        out.extend_from_slice(format!("POINT_DATA {}\n", mesh.vertex_count()).as_bytes());
        out.extend_from_slice(format!("VECTORS {name} double\n").as_bytes());
        for v in 0..mesh.vertex_count() {
            push_point(&mut out, field.vertex_value(v));
        }
    }

    write_atomic(path, &out)
}

fn box_corners(b: &BoxRegion, dimension: usize) -> Vec<[f64; 3]> {
    // Corner order must be x fastest, the layout pixel and voxel cells use.
    let mut corners = Vec::new();
    let zs: &[usize] = if dimension == 2 { &[0] } else { &[0, 1] };
    for &kz in zs {
        for ky in 0..2 {
            for kx in 0..2 {
                let pick = |axis: usize, k: usize| if k == 0 { b.min[axis] } else { b.max[axis] };
                let z = if dimension == 2 { 0.0 } else { pick(2, kz) };
                corners.push([pick(0, kx), pick(1, ky), z]);
            }
        }
    }
    corners
}

/// Write a test cube grid with per-cube scalars (for example the decision
/// value and the inside mask of a reconstruction).
pub fn write_grid_vtk(path: &Path, grid: &TestCubeGrid, cell_scalars: &[CellScalars]) -> Result<()> {
    let dim = grid.dimension;
    let corners_per_cell = if dim == 2 { 4 } else { 8 };
    let n_cells = grid.cubes.len();
    if n_cells == 0 {
        return Err(CoreError::invalid("cannot write an empty cube grid"));
    }
    let mut out = Vec::new();
    header(&mut out, "test cube grid");

    out.extend_from_slice(format!("POINTS {} double\n", n_cells * corners_per_cell).as_bytes());
    for cube in &grid.cubes {
        for corner in box_corners(cube, dim) {
            push_point(&mut out, corner);
        }
    }

    out.extend_from_slice(
        format!("CELLS {} {}\n", n_cells, n_cells * (corners_per_cell + 1)).as_bytes(),
    );
    for c in 0..n_cells {
        let base = c * corners_per_cell;
        let ids: Vec<String> = (base..base + corners_per_cell).map(|i| i.to_string()).collect();
        out.extend_from_slice(format!("{} {}\n", corners_per_cell, ids.join(" ")).as_bytes());
    }
    out.extend_from_slice(format!("CELL_TYPES {n_cells}\n").as_bytes());
    let cell_type = if dim == 2 { PIXEL } else { VOXEL };
    for _ in 0..n_cells {
        out.extend_from_slice(format!("{cell_type}\n").as_bytes());
    }

    push_cell_data(&mut out, n_cells, cell_scalars)?;
    write_atomic(path, &out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BoxRegion, Face};
    use crate::mesh::{build_box_mesh, build_test_cubes, tag_boundary, PatchLayout, TestGridSpec};

    fn tagged_mesh(dim: usize, res: usize) -> Mesh {
        let domain = BoxRegion::cube(-0.5, 0.5, dim).unwrap();
        let mesh = build_box_mesh(&domain, dim, res).unwrap();
        let face = if dim == 2 { Face::YMin } else { Face::ZMin };
        let layout = PatchLayout::new(&domain, dim, 1, face).unwrap();
        tag_boundary(mesh, &layout).unwrap()
    }

    #[test]
    fn mesh_file_is_wellformed_and_deterministic() {
        let mesh = tagged_mesh(3, 2);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mesh.vtk");
        let lambda: Vec<f64> = (0..mesh.element_count()).map(|e| e as f64).collect();
        let disp = DisplacementField::zero(&mesh);
        let scalars = [CellScalars { name: "lambda", values: &lambda }];
        write_mesh_vtk(&path, &mesh, &scalars, Some(("displacement", &disp))).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# vtk DataFile Version 3.0\n"));
        assert!(text.contains(&format!("POINTS {} double", mesh.vertex_count())));
        assert!(text.contains(&format!("CELLS {} {}", mesh.element_count(), mesh.element_count() * 5)));
        assert!(text.contains("SCALARS lambda double 1"));
        assert!(text.contains("VECTORS displacement double"));
        assert_eq!(text.matches("10\n").count() >= mesh.element_count(), true);

        write_mesh_vtk(&path, &mesh, &scalars, Some(("displacement", &disp))).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), text);
    }

    #[test]
    fn two_dimensional_mesh_uses_triangles() {
        let mesh = tagged_mesh(2, 2);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mesh2d.vtk");
        write_mesh_vtk(&path, &mesh, &[], None).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let types_at = text.find("CELL_TYPES").unwrap();
        assert!(text[types_at..].lines().skip(1).take(4).all(|l| l == "5"));
        assert!(!text.contains("CELL_DATA"));
    }

    #[test]
    fn grid_file_uses_voxels_with_x_fastest_corners() {
        let domain = BoxRegion::cube(0.0, 1.0, 3).unwrap();
        let grid = build_test_cubes(&domain, 3, &TestGridSpec::tiling(2)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("grid.vtk");
        let vals: Vec<f64> = (0..grid.cubes.len()).map(|c| c as f64).collect();
        write_grid_vtk(&path, &grid, &[CellScalars { name: "value", values: &vals }]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("POINTS 64 double"));
        assert!(text.contains("CELLS 8 72"));

        // First cube is [0, 0.5]^3; its first four corners walk x first, then y.
        let points: Vec<&str> = text.lines().skip(5).take(4).collect();
        assert_eq!(points[0], "0.000000000e0 0.000000000e0 0.000000000e0");
        assert_eq!(points[1], "5.000000000e-1 0.000000000e0 0.000000000e0");
        assert_eq!(points[2], "0.000000000e0 5.000000000e-1 0.000000000e0");
        assert_eq!(points[3], "5.000000000e-1 5.000000000e-1 0.000000000e0");
        let types_at = text.find("CELL_TYPES").unwrap();
        assert!(text[types_at..].lines().skip(1).take(8).all(|l| l == "11"));
    }

    #[test]
    fn bad_inputs_rejected() {
        let mesh = tagged_mesh(3, 1);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.vtk");
        let short = [0.0; 2];
        let err = write_mesh_vtk(&path, &mesh, &[CellScalars { name: "v", values: &short }], None);
        assert!(err.is_err());
        let vals = vec![0.0; mesh.element_count()];
        let err = write_mesh_vtk(&path, &mesh, &[CellScalars { name: "bad name", values: &vals }], None);
        assert!(err.is_err());
        assert!(!path.exists());
    }
}
