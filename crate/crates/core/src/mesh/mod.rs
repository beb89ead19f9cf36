//! Structured simplex meshes on axis-aligned box domains.
//!
//! A box with `r` cells per axis is split into `r^d` cubic (square) cells;
//! each 3-D cell is divided into 6 tetrahedra sharing the cell diagonal, each
//! 2-D cell into 2 triangles. The split is translation-invariant, so
//! neighboring cells match along shared facets and the mesh is conforming.
//!
//! Vertex coordinates are built with a two-sided linear interpolation so that
//! boundary vertices land *exactly* on the box planes; boundary facets can
//! therefore be classified to a face without tolerances.

mod grid;
mod patches;

pub use grid::{
    build_test_cubes, element_cube_fractions, element_region_fractions, TestCubeGrid, TestGridSpec,
};
pub use patches::{tag_boundary, PatchLayout};

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::geometry::{BoxRegion, Face};

/// Tag carried by a boundary facet after [`tag_boundary`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FacetTag {
    /// Not yet tagged.
    Untagged,
    /// Facet on the clamped face (zero displacement).
    Dirichlet,
    /// Facet assigned to the traction patch with this 1-based id.
    Patch(u32),
}

/// Boundary facet: a triangle (3-D) or segment (2-D) of exactly one element.
#[derive(Debug, Clone)]
pub struct BoundaryFacet {
    /// Vertex ids, oriented so the facet normal points out of the domain.
    /// In 2-D the third entry is `usize::MAX`.
    pub vertices: [usize; 3],
    /// The one element this facet belongs to.
    pub element: usize,
    /// Box face the facet lies on.
    pub face: Face,
    pub tag: FacetTag,
}

/// Identifies a mesh's defining parameters for artifact compatibility checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshDescriptor {
    pub dimension: usize,
    pub cells_per_axis: usize,
    pub domain: BoxRegion,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    dimension: usize,
    cells_per_axis: usize,
    domain: BoxRegion,
    vertices: Vec<[f64; 3]>,
    /// Element connectivity; in 2-D the fourth entry is `usize::MAX`.
    elements: Vec<[usize; 4]>,
    element_volumes: Vec<f64>,
    boundary: Vec<BoundaryFacet>,
    layout: Option<PatchLayout>,
}

impl Mesh {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn cells_per_axis(&self) -> usize {
        self.cells_per_axis
    }

    pub fn domain(&self) -> &BoxRegion {
        &self.domain
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn element_count(&self) -> usize {
        self.elements.len()
    }

    pub fn vertex(&self, v: usize) -> [f64; 3] {
        self.vertices[v]
    }

    /// Vertex ids of element `e` (first `dimension + 1` entries are valid).
    pub fn element(&self, e: usize) -> &[usize] {
        &self.elements[e][..self.dimension + 1]
    }

    pub fn element_volume(&self, e: usize) -> f64 {
        self.element_volumes[e]
    }

    pub fn element_vertices(&self, e: usize) -> [[f64; 3]; 4] {
        let mut out = [[0.0; 3]; 4];
        for (k, &v) in self.element(e).iter().enumerate() {
            out[k] = self.vertices[v];
        }
        out
    }

    pub fn element_centroid(&self, e: usize) -> [f64; 3] {
        let nv = (self.dimension + 1) as f64;
        let mut c = [0.0; 3];
        for &v in self.element(e) {
            for a in 0..3 {
                c[a] += self.vertices[v][a];
            }
        }
        for a in 0..3 {
            c[a] /= nv;
        }
        c
    }

    pub fn boundary_facets(&self) -> &[BoundaryFacet] {
        &self.boundary
    }

    /// Vertex ids of a boundary facet (2 in 2-D, 3 in 3-D).
    pub fn facet_vertices<'a>(&self, f: &'a BoundaryFacet) -> &'a [usize] {
        &f.vertices[..self.dimension]
    }

    /// Area (3-D) or length (2-D) of a boundary facet.
    pub fn facet_measure(&self, f: &BoundaryFacet) -> f64 {
        let p: Vec<[f64; 3]> = self.facet_vertices(f).iter().map(|&v| self.vertices[v]).collect();
        match self.dimension {
            2 => {
                let d = [p[1][0] - p[0][0], p[1][1] - p[0][1]];
                (d[0] * d[0] + d[1] * d[1]).sqrt()
            }
            _ => {
                let u = sub(p[1], p[0]);
                let v = sub(p[2], p[0]);
                0.5 * norm(cross(u, v))
            }
        }
    }

    pub fn facet_centroid(&self, f: &BoundaryFacet) -> [f64; 3] {
        let verts = self.facet_vertices(f);
        let mut c = [0.0; 3];
        for &v in verts {
            for a in 0..3 {
                c[a] += self.vertices[v][a];
            }
        }
        for a in 0..3 {
            c[a] /= verts.len() as f64;
        }
        c
    }

    /// Outward unit normal of a boundary facet (from its vertex order).
    pub fn facet_normal(&self, f: &BoundaryFacet) -> [f64; 3] {
        let p: Vec<[f64; 3]> = self.facet_vertices(f).iter().map(|&v| self.vertices[v]).collect();
        match self.dimension {
            2 => {
                let d = [p[1][0] - p[0][0], p[1][1] - p[0][1]];
                let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
                [d[1] / len, -d[0] / len, 0.0]
            }
            _ => {
                let n = cross(sub(p[1], p[0]), sub(p[2], p[0]));
                let len = norm(n);
                [n[0] / len, n[1] / len, n[2] / len]
            }
        }
    }

    /// Patch layout attached by [`tag_boundary`], if any.
    pub fn layout(&self) -> Option<&PatchLayout> {
        self.layout.as_ref()
    }

    /// Sorted vertex ids clamped by the Dirichlet face of the attached layout.
    pub fn dirichlet_vertices(&self) -> Result<Vec<usize>> {
        if self.layout.is_none() {
            return Err(CoreError::config(
                "mesh carries no boundary layout; call tag_boundary first",
            ));
        }
        let mut verts: Vec<usize> = self
            .boundary
            .iter()
            .filter(|f| f.tag == FacetTag::Dirichlet)
            .flat_map(|f| self.facet_vertices(f).iter().copied())
            .collect();
        verts.sort_unstable();
        verts.dedup();
        Ok(verts)
    }

    pub fn descriptor(&self) -> MeshDescriptor {
        MeshDescriptor {
            dimension: self.dimension,
            cells_per_axis: self.cells_per_axis,
            domain: self.domain,
        }
    }

    /// Cheap compatibility token for fields derived from this mesh.
    pub fn signature(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.dimension.hash(&mut h);
        self.cells_per_axis.hash(&mut h);
        for a in 0..3 {
            self.domain.min[a].to_bits().hash(&mut h);
            self.domain.max[a].to_bits().hash(&mut h);
        }
        self.layout.is_some().hash(&mut h);
        h.finish()
    }

    pub(crate) fn set_layout(&mut self, layout: PatchLayout) {
        self.layout = Some(layout);
    }

    pub(crate) fn boundary_mut(&mut self) -> &mut Vec<BoundaryFacet> {
        &mut self.boundary
    }
}

pub(crate) fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

/// Signed element volume from the ordered vertex tuple.
fn signed_volume(dim: usize, p: &[[f64; 3]]) -> f64 {
    match dim {
        2 => {
            let u = sub(p[1], p[0]);
            let v = sub(p[2], p[0]);
            0.5 * (u[0] * v[1] - u[1] * v[0])
        }
        _ => {
            let u = sub(p[1], p[0]);
            let v = sub(p[2], p[0]);
            let w = sub(p[3], p[0]);
            dot(u, cross(v, w)) / 6.0
        }
    }
}

/// Axis permutations of the 6-tetrahedra cell split with their parities.
/// Each permutation walks from the cell's low corner to its high corner one
/// axis at a time; odd parities get two vertices swapped to restore positive
/// orientation.
const CELL_SPLITS_3D: [([usize; 3], bool); 6] = [
    ([0, 1, 2], false),
    ([0, 2, 1], true),
    ([1, 0, 2], true),
    ([1, 2, 0], false),
    ([2, 0, 1], false),
    ([2, 1, 0], true),
];

/// Build the structured mesh of a box domain with `cells_per_axis` cells per
/// axis. Boundary facets are extracted and oriented but not yet tagged.
pub fn build_box_mesh(domain: &BoxRegion, dimension: usize, cells_per_axis: usize) -> Result<Mesh> {
    if dimension != 2 && dimension != 3 {
        return Err(CoreError::invalid(format!("dimension must be 2 or 3, got {dimension}")));
    }
    if cells_per_axis == 0 {
        return Err(CoreError::invalid("cells_per_axis must be at least 1"));
    }
    for a in 0..dimension {
        if domain.extent(a) <= 0.0 {
            return Err(CoreError::invalid(format!("domain is degenerate on axis {a}")));
        }
    }

    let r = cells_per_axis;
    let n1 = r + 1;
    let coord = |i: usize, a: usize| -> f64 {
        let t = i as f64 / r as f64;
        (1.0 - t) * domain.min[a] + t * domain.max[a]
    };

    let mut vertices = Vec::with_capacity(n1.pow(dimension as u32));
    match dimension {
        2 => {
            for iy in 0..n1 {
                for ix in 0..n1 {
                    vertices.push([coord(ix, 0), coord(iy, 1), 0.0]);
                }
            }
        }
        _ => {
            for iz in 0..n1 {
                for iy in 0..n1 {
                    for ix in 0..n1 {
                        vertices.push([coord(ix, 0), coord(iy, 1), coord(iz, 2)]);
                    }
                }
            }
        }
    }

    let mut elements = Vec::with_capacity(if dimension == 2 { 2 * r * r } else { 6 * r * r * r });
    match dimension {
        2 => {
            let vid = |ix: usize, iy: usize| ix + n1 * iy;
            for cy in 0..r {
                for cx in 0..r {
                    let c = |dx: usize, dy: usize| vid(cx + dx, cy + dy);
                    elements.push([c(0, 0), c(1, 0), c(1, 1), usize::MAX]);
                    elements.push([c(0, 0), c(1, 1), c(0, 1), usize::MAX]);
                }
            }
        }
        _ => {
            let vid = |ix: usize, iy: usize, iz: usize| ix + n1 * (iy + n1 * iz);
            for cz in 0..r {
                for cy in 0..r {
                    for cx in 0..r {
                        let c = |d: [usize; 3]| vid(cx + d[0], cy + d[1], cz + d[2]);
                        for (perm, odd) in CELL_SPLITS_3D {
                            let mut offset = [0usize; 3];
                            let v0 = c(offset);
                            offset[perm[0]] = 1;
                            let v1 = c(offset);
                            offset[perm[1]] = 1;
                            let v2 = c(offset);
                            let v3 = c([1, 1, 1]);
                            if odd {
                                elements.push([v0, v2, v1, v3]);
                            } else {
                                elements.push([v0, v1, v2, v3]);
                            }
                        }
                    }
                }
            }
        }
    }

    let element_volumes: Vec<f64> = elements
        .iter()
        .map(|el| {
            let p: Vec<[f64; 3]> = el[..dimension + 1].iter().map(|&v| vertices[v]).collect();
            signed_volume(dimension, &p)
        })
        .collect();
    if let Some((e, &v)) = element_volumes.iter().enumerate().find(|(_, &v)| v <= 0.0) {
        return Err(CoreError::numerical(format!(
            "element {e} has non-positive volume {v:.3e}; cell split is mis-oriented"
        )));
    }

    let boundary = extract_boundary(dimension, domain, &vertices, &elements)?;

    Ok(Mesh {
        dimension,
        cells_per_axis,
        domain: *domain,
        vertices,
        elements,
        element_volumes,
        boundary,
        layout: None,
    })
}

/// Facets of one element as (sorted key, ordered vertices, opposite vertex).
fn element_facets(dim: usize, el: &[usize]) -> Vec<([usize; 3], [usize; 3], usize)> {
    let mut out = Vec::with_capacity(dim + 1);
    for skip in 0..=dim {
        let mut verts = [usize::MAX; 3];
        let mut k = 0;
        for (i, &v) in el.iter().enumerate() {
            if i != skip {
                verts[k] = v;
                k += 1;
            }
        }
        let mut key = verts;
        key[..dim].sort_unstable();
        out.push((key, verts, el[skip]));
    }
    out
}

fn extract_boundary(
    dim: usize,
    domain: &BoxRegion,
    vertices: &[[f64; 3]],
    elements: &[[usize; 4]],
) -> Result<Vec<BoundaryFacet>> {
    let mut counts: HashMap<[usize; 3], u32> = HashMap::new();
    for el in elements {
        for (key, _, _) in element_facets(dim, &el[..dim + 1]) {
            *counts.entry(key).or_insert(0) += 1;
        }
    }

    let mut boundary = Vec::new();
    for (e, el) in elements.iter().enumerate() {
        for (key, verts, opposite) in element_facets(dim, &el[..dim + 1]) {
            match counts.get(&key) {
                Some(1) => {}
                Some(2) => continue,
                c => {
                    return Err(CoreError::numerical(format!(
                        "facet shared by {c:?} elements; mesh is not conforming"
                    )))
                }
            }
            let face = classify_face(dim, domain, vertices, &verts)?;
            let oriented = orient_outward(dim, vertices, verts, vertices[opposite]);
            boundary.push(BoundaryFacet { vertices: oriented, element: e, face, tag: FacetTag::Untagged });
        }
    }
    Ok(boundary)
}

/// The box face a boundary facet lies on. Boundary vertex coordinates sit
/// exactly on the box planes by construction, so exact comparison is sound.
fn classify_face(
    dim: usize,
    domain: &BoxRegion,
    vertices: &[[f64; 3]],
    facet: &[usize; 3],
) -> Result<Face> {
    for face in Face::all(dim) {
        let a = face.axis();
        let plane = face.plane_coordinate(domain);
        if facet[..dim].iter().all(|&v| vertices[v][a] == plane) {
            return Ok(face);
        }
    }
    Err(CoreError::numerical(
        "boundary facet does not lie on any box face; mesh construction is inconsistent",
    ))
}

/// Order facet vertices so the facet normal points away from `opposite`
/// (the element's interior vertex), i.e. out of the domain.
fn orient_outward(
    dim: usize,
    vertices: &[[f64; 3]],
    mut facet: [usize; 3],
    opposite: [f64; 3],
) -> [usize; 3] {
    let p0 = vertices[facet[0]];
    let outward_dot;
    match dim {
        2 => {
            let p1 = vertices[facet[1]];
            let d = sub(p1, p0);
            let n = [d[1], -d[0], 0.0];
            outward_dot = dot(n, sub(p0, opposite));
        }
        _ => {
            let p1 = vertices[facet[1]];
            let p2 = vertices[facet[2]];
            let n = cross(sub(p1, p0), sub(p2, p0));
            outward_dot = dot(n, sub(p0, opposite));
        }
    }
    if outward_dot < 0.0 {
        facet.swap(0, 1);
    }
    facet
}
