//! Scanning grids of test cubes and element volume fractions.
//!
//! Reconstruction sweeps a grid of small axis-aligned test cubes over the
//! domain and runs one definiteness test per cube. Forward simulation and
//! the derivative operators both need, per element, the fraction of the
//! element volume inside a region; fractions are computed by recursive
//! red refinement of the element with early exit on fully-inside or
//! fully-outside simplices.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::geometry::BoxRegion;
use crate::mesh::Mesh;

/// Grid of congruent test cubes laid over the domain, x index fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestGridSpec {
    /// Cubes per axis.
    pub cubes_per_axis: usize,
    /// Explicit cube side length. Defaults to `extent / cubes_per_axis` per
    /// axis, which tiles the domain exactly.
    #[serde(default)]
    pub cube_size: Option<f64>,
    /// Shift of the grid origin from the domain's low corner.
    #[serde(default)]
    pub offset: [f64; 3],
}

impl TestGridSpec {
    pub fn tiling(cubes_per_axis: usize) -> Self {
        Self { cubes_per_axis, cube_size: None, offset: [0.0; 3] }
    }
}

/// Materialized test cube grid.
#[derive(Debug, Clone)]
pub struct TestCubeGrid {
    pub spec: TestGridSpec,
    pub domain: BoxRegion,
    pub dimension: usize,
    /// Cubes in x-fastest order: index `ix + n (iy + n iz)`.
    pub cubes: Vec<BoxRegion>,
}

impl TestCubeGrid {
    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    /// Grid indices of a cube, x fastest.
    pub fn indices(&self, cube: usize) -> [usize; 3] {
        let n = self.spec.cubes_per_axis;
        match self.dimension {
            2 => [cube % n, cube / n, 0],
            _ => [cube % n, (cube / n) % n, cube / (n * n)],
        }
    }
}

/// Lay a grid of test cubes over the domain. Every cube must fit inside the
/// domain (up to a relative slack of 1e-9), so an explicit `cube_size` or a
/// nonzero `offset` limits how far the grid extends.
pub fn build_test_cubes(domain: &BoxRegion, dimension: usize, spec: &TestGridSpec) -> Result<TestCubeGrid> {
    if dimension != 2 && dimension != 3 {
        return Err(CoreError::invalid(format!("dimension must be 2 or 3, got {dimension}")));
    }
    let n = spec.cubes_per_axis;
    if n == 0 {
        return Err(CoreError::invalid("cubes_per_axis must be at least 1"));
    }
    if let Some(s) = spec.cube_size {
        if !(s > 0.0) {
            return Err(CoreError::invalid(format!("cube_size must be positive, got {s}")));
        }
    }

    let mut sizes = [0.0; 3];
    for a in 0..dimension {
        sizes[a] = spec.cube_size.unwrap_or(domain.extent(a) / n as f64);
    }
    let tol = 1e-9 * domain.max_extent();

    let counts: [usize; 3] = match dimension {
        2 => [n, n, 1],
        _ => [n, n, n],
    };
    let mut cubes = Vec::with_capacity(counts[0] * counts[1] * counts[2]);
    for iz in 0..counts[2] {
        for iy in 0..counts[1] {
            for ix in 0..counts[0] {
                let idx = [ix, iy, iz];
                let mut min = [0.0; 3];
                let mut max = [0.0; 3];
                for a in 0..dimension {
                    min[a] = domain.min[a] + spec.offset[a] + idx[a] as f64 * sizes[a];
                    max[a] = min[a] + sizes[a];
                }
                let cube = BoxRegion::new(min, max)?;
                if !domain.contains_box(&cube, tol) {
                    return Err(CoreError::invalid(format!(
                        "test cube ({ix},{iy},{iz}) spans [{:?}, {:?}] and leaves the domain",
                        cube.min, cube.max
                    )));
                }
                cubes.push(cube);
            }
        }
    }

    Ok(TestCubeGrid { spec: spec.clone(), domain: *domain, dimension, cubes })
}

/// Fraction of each element's volume inside `region`, in element order.
pub fn element_cube_fractions(mesh: &Mesh, region: &BoxRegion, depth: usize) -> Vec<f64> {
    element_region_fractions(mesh, std::slice::from_ref(region), depth)
}

/// Fraction of each element's volume inside the union of `regions`.
///
/// Exact (0 or 1) for elements fully outside or fully inside a region; for
/// straddling elements the simplex is red-refined `depth` times and leaves
/// are scored by their centroid, giving a volume fraction accurate to about
/// `2^-depth` of the element diameter in the interface layer.
pub fn element_region_fractions(mesh: &Mesh, regions: &[BoxRegion], depth: usize) -> Vec<f64> {
    let dim = mesh.dimension();
    let tol = 1e-9 * mesh.domain().max_extent();
    (0..mesh.element_count())
        .map(|e| {
            let verts = mesh.element_vertices(e);
            simplex_fraction(dim, &verts, regions, depth, tol)
        })
        .collect()
}

fn simplex_bbox(dim: usize, verts: &[[f64; 3]; 4]) -> BoxRegion {
    let nv = dim + 1;
    let mut min = verts[0];
    let mut max = verts[0];
    for v in &verts[1..nv] {
        for a in 0..3 {
            min[a] = min[a].min(v[a]);
            max[a] = max[a].max(v[a]);
        }
    }
    BoxRegion { min, max }
}

fn simplex_centroid(dim: usize, verts: &[[f64; 3]; 4]) -> [f64; 3] {
    let nv = dim + 1;
    let mut c = [0.0; 3];
    for v in &verts[..nv] {
        for a in 0..3 {
            c[a] += v[a];
        }
    }
    for a in 0..3 {
        c[a] /= nv as f64;
    }
    c
}

fn simplex_fraction(
    dim: usize,
    verts: &[[f64; 3]; 4],
    regions: &[BoxRegion],
    depth: usize,
    tol: f64,
) -> f64 {
    let nv = dim + 1;
    if regions
        .iter()
        .any(|r| verts[..nv].iter().all(|v| r.contains(*v, tol)))
    {
        return 1.0;
    }
    let bbox = simplex_bbox(dim, verts);
    if !regions.iter().any(|r| bbox.overlaps_interior(r, dim, tol)) {
        return 0.0;
    }
    if depth == 0 {
        let c = simplex_centroid(dim, verts);
        return if regions.iter().any(|r| r.contains(c, tol)) { 1.0 } else { 0.0 };
    }

    let mid = |i: usize, j: usize| -> [f64; 3] {
        [
            0.5 * (verts[i][0] + verts[j][0]),
            0.5 * (verts[i][1] + verts[j][1]),
            0.5 * (verts[i][2] + verts[j][2]),
        ]
    };

    match dim {
        2 => {
            let m01 = mid(0, 1);
            let m02 = mid(0, 2);
            let m12 = mid(1, 2);
            let z = [0.0; 3];
            let children = [
                [verts[0], m01, m02, z],
                [m01, verts[1], m12, z],
                [m02, m12, verts[2], z],
                [m01, m12, m02, z],
            ];
            let sum: f64 = children
                .iter()
                .map(|c| simplex_fraction(dim, c, regions, depth - 1, tol))
                .sum();
            sum / 4.0
        }
        _ => {
            let m01 = mid(0, 1);
            let m02 = mid(0, 2);
            let m03 = mid(0, 3);
            let m12 = mid(1, 2);
            let m13 = mid(1, 3);
            let m23 = mid(2, 3);
            // Red refinement: 4 corner children plus 4 children of the inner
            // octahedron split along the m02-m13 diagonal; all have volume
            // 1/8 of the parent.
            let children = [
                [verts[0], m01, m02, m03],
                [m01, verts[1], m12, m13],
                [m02, m12, verts[2], m23],
                [m03, m13, m23, verts[3]],
                [m01, m02, m03, m13],
                [m01, m02, m12, m13],
                [m02, m03, m13, m23],
                [m02, m12, m13, m23],
            ];
            let sum: f64 = children
                .iter()
                .map(|c| simplex_fraction(dim, c, regions, depth - 1, tol))
                .sum();
            sum / 8.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_box_mesh;

    fn centered_cube(dim: usize) -> BoxRegion {
        BoxRegion::cube(-0.5, 0.5, dim).unwrap()
    }

    #[test]
    fn tiling_grid_covers_domain() {
        let d = centered_cube(3);
        let grid = build_test_cubes(&d, 3, &TestGridSpec::tiling(5)).unwrap();
        assert_eq!(grid.len(), 125);
        let vol: f64 = grid.cubes.iter().map(|c| c.volume(3)).sum();
        assert!((vol - 1.0).abs() < 1e-12);
        // x index fastest.
        assert_eq!(grid.indices(1), [1, 0, 0]);
        assert_eq!(grid.indices(5), [0, 1, 0]);
        assert_eq!(grid.indices(25), [0, 0, 1]);
        let c0 = &grid.cubes[0];
        assert!((c0.min[0] + 0.5).abs() < 1e-15 && (c0.max[0] + 0.3).abs() < 1e-15);
    }

    #[test]
    fn shifted_grid_must_stay_inside() {
        let d = centered_cube(3);
        // 9 cubes of side 0.1 starting at an offset of 0.05 fit exactly.
        let spec = TestGridSpec {
            cubes_per_axis: 9,
            cube_size: Some(0.1),
            offset: [0.05; 3],
        };
        let grid = build_test_cubes(&d, 3, &spec).unwrap();
        assert_eq!(grid.len(), 729);
        // A wider offset pushes the last cube outside.
        let spec = TestGridSpec {
            cubes_per_axis: 9,
            cube_size: Some(0.1),
            offset: [0.2, 0.05, 0.05],
        };
        assert!(build_test_cubes(&d, 3, &spec).is_err());
    }

    #[test]
    fn aligned_region_gives_binary_fractions() {
        let d = centered_cube(3);
        let mesh = build_box_mesh(&d, 3, 4).unwrap();
        // Region equal to a block of 2x2x2 cells: every element is fully in
        // or fully out, and the fractions sum to the exact region volume.
        let region = BoxRegion::new([-0.25, -0.25, -0.25], [0.25, 0.25, 0.25]).unwrap();
        let fr = element_cube_fractions(&mesh, &region, 3);
        let mut inside_vol = 0.0;
        for (e, &f) in fr.iter().enumerate() {
            assert!(f == 0.0 || f == 1.0, "element {e} fraction {f}");
            inside_vol += f * mesh.element_volume(e);
        }
        assert!((inside_vol - 0.125).abs() < 1e-12);
    }

    #[test]
    fn misaligned_region_volume_close() {
        let d = BoxRegion::cube(0.0, 1.0, 3).unwrap();
        let mesh = build_box_mesh(&d, 3, 16).unwrap();
        let region = BoxRegion::new([0.03, 0.03, 0.03], [0.91, 0.91, 0.91]).unwrap();
        let fr = element_cube_fractions(&mesh, &region, 3);
        let vol: f64 = fr.iter().enumerate().map(|(e, &f)| f * mesh.element_volume(e)).sum();
        // Exact box volume; the region sits strictly inside the domain.
        let expect = 0.88f64.powi(3);
        assert!(
            (vol - expect).abs() <= 0.01 * expect,
            "volume {vol} vs exact {expect}"
        );
        for &f in &fr {
            assert!((0.0..=1.0).contains(&f));
        }
    }

    #[test]
    fn union_fraction_bounds_parts() {
        let d = centered_cube(3);
        let mesh = build_box_mesh(&d, 3, 5).unwrap();
        let a = BoxRegion::new([-0.3, -0.3, -0.1], [-0.1, -0.1, 0.3]).unwrap();
        let b = BoxRegion::new([0.1, 0.1, -0.3], [0.3, 0.3, 0.1]).unwrap();
        let fa = element_cube_fractions(&mesh, &a, 2);
        let fb = element_cube_fractions(&mesh, &b, 2);
        let fu = element_region_fractions(&mesh, &[a, b], 2);
        for e in 0..mesh.element_count() {
            assert!(fu[e] >= fa[e].max(fb[e]) - 1e-12);
            assert!(fu[e] <= fa[e] + fb[e] + 1e-12);
        }
    }

    #[test]
    fn nested_region_fraction_monotone() {
        let d = centered_cube(3);
        let mesh = build_box_mesh(&d, 3, 4).unwrap();
        let inner = BoxRegion::new([-0.17, -0.12, -0.08], [0.13, 0.18, 0.22]).unwrap();
        let outer = BoxRegion::new([-0.22, -0.17, -0.13], [0.18, 0.23, 0.27]).unwrap();
        let fi = element_cube_fractions(&mesh, &inner, 3);
        let fo = element_cube_fractions(&mesh, &outer, 3);
        for e in 0..mesh.element_count() {
            assert!(fi[e] <= fo[e] + 1e-12, "element {e}: {} > {}", fi[e], fo[e]);
        }
    }
}
