//! Traction patch layouts on the non-clamped part of the box boundary.
//!
//! One box face is clamped (zero displacement); every other face is divided
//! into `p x p` congruent squares (`p` segments in 2-D). Each square is one
//! load patch, numbered 1-based: faces in canonical order (x-min, x-max,
//! y-min, y-max, z-min, z-max) with the clamped face skipped, and within a
//! face row-major over the ascending tangent axes, first tangent axis
//! fastest.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CoreError, Result};
use crate::geometry::{BoxRegion, Face};
use crate::mesh::{FacetTag, Mesh};

/// Serializable identity of a patch layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutDescriptor {
    pub dimension: usize,
    pub patches_per_axis: usize,
    pub dirichlet_face: Face,
    pub domain: BoxRegion,
}

/// Partition of the traction boundary into congruent square patches.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchLayout {
    domain: BoxRegion,
    dimension: usize,
    patches_per_axis: usize,
    dirichlet_face: Face,
    neumann_faces: Vec<Face>,
}

impl PatchLayout {
    pub fn new(
        domain: &BoxRegion,
        dimension: usize,
        patches_per_axis: usize,
        dirichlet_face: Face,
    ) -> Result<Self> {
        if dimension != 2 && dimension != 3 {
            return Err(CoreError::invalid(format!("dimension must be 2 or 3, got {dimension}")));
        }
        if patches_per_axis == 0 {
            return Err(CoreError::invalid("patches_per_axis must be at least 1"));
        }
        if dirichlet_face.axis() >= dimension {
            return Err(CoreError::invalid(format!(
                "face {} does not exist in dimension {dimension}",
                dirichlet_face.name()
            )));
        }
        let neumann_faces = Face::all(dimension)
            .into_iter()
            .filter(|f| *f != dirichlet_face)
            .collect();
        Ok(Self {
            domain: *domain,
            dimension,
            patches_per_axis,
            dirichlet_face,
            neumann_faces,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn domain(&self) -> &BoxRegion {
        &self.domain
    }

    pub fn patches_per_axis(&self) -> usize {
        self.patches_per_axis
    }

    pub fn dirichlet_face(&self) -> Face {
        self.dirichlet_face
    }

    /// Traction faces in canonical order.
    pub fn neumann_faces(&self) -> &[Face] {
        &self.neumann_faces
    }

    /// Patches per traction face: `p^(d-1)`.
    pub fn patches_per_face(&self) -> usize {
        self.patches_per_axis.pow(self.dimension as u32 - 1)
    }

    /// Total number of load patches: `(2d - 1) p^(d-1)`.
    pub fn load_count(&self) -> usize {
        self.neumann_faces.len() * self.patches_per_face()
    }

    fn split_id(&self, id: u32) -> Result<(Face, usize)> {
        if id == 0 || id as usize > self.load_count() {
            return Err(CoreError::invalid(format!(
                "patch id {id} out of range 1..={}",
                self.load_count()
            )));
        }
        let idx = id as usize - 1;
        let per_face = self.patches_per_face();
        Ok((self.neumann_faces[idx / per_face], idx % per_face))
    }

    /// Face carrying the given patch.
    pub fn patch_face(&self, id: u32) -> Result<Face> {
        Ok(self.split_id(id)?.0)
    }

    /// Patch rectangle in tangent coordinates: for each tangent axis of the
    /// face (ascending order), the `[lo, hi]` interval. In 2-D only the first
    /// entry is meaningful.
    pub fn patch_rect(&self, id: u32) -> Result<(Face, [[f64; 2]; 2])> {
        let (face, local) = self.split_id(id)?;
        let p = self.patches_per_axis;
        let tangents = face.tangent_axes(self.dimension);
        let cells = [local % p, local / p];
        let mut rect = [[0.0; 2]; 2];
        for (t, &axis) in tangents.iter().enumerate() {
            let lo = self.domain.min[axis];
            let hi = self.domain.max[axis];
            let split = |k: usize| {
                let s = k as f64 / p as f64;
                (1.0 - s) * lo + s * hi
            };
            rect[t] = [split(cells[t]), split(cells[t] + 1)];
        }
        Ok((face, rect))
    }

    /// Area (3-D) or length (2-D) of one patch. All patches are congruent
    /// only when the domain is a cube; in general faces differ, so this takes
    /// the patch id.
    pub fn patch_area(&self, id: u32) -> Result<f64> {
        let (face, rect) = self.patch_rect(id)?;
        let mut area = rect[0][1] - rect[0][0];
        if self.dimension == 3 {
            area *= rect[1][1] - rect[1][0];
        }
        let _ = face;
        Ok(area)
    }

    /// Outward unit normal of the face carrying the given patch. Patch loads
    /// are normal tractions, so this is also the load direction.
    pub fn patch_normal(&self, id: u32) -> Result<[f64; 3]> {
        Ok(self.patch_face(id)?.outward_normal())
    }

    /// Patch containing a boundary point, by its face and tangent coordinates.
    /// Points on an interior patch edge go to the higher patch.
    pub fn patch_at(&self, face: Face, point: [f64; 3]) -> Result<u32> {
        if !self.neumann_faces.contains(&face) {
            return Err(CoreError::invalid(format!(
                "face {} carries no patches (it is clamped)",
                face.name()
            )));
        }
        let p = self.patches_per_axis;
        let tangents = face.tangent_axes(self.dimension);
        let mut cells = [0usize; 2];
        for (t, &axis) in tangents.iter().enumerate() {
            let lo = self.domain.min[axis];
            let w = self.domain.extent(axis);
            let s = (point[axis] - lo) / w * p as f64;
            cells[t] = (s.floor() as isize).clamp(0, p as isize - 1) as usize;
        }
        let local = cells[0] + if self.dimension == 3 { p * cells[1] } else { 0 };
        let face_pos = self.neumann_faces.iter().position(|f| *f == face).unwrap();
        Ok((face_pos * self.patches_per_face() + local) as u32 + 1)
    }

    pub fn descriptor(&self) -> LayoutDescriptor {
        LayoutDescriptor {
            dimension: self.dimension,
            patches_per_axis: self.patches_per_axis,
            dirichlet_face: self.dirichlet_face,
            domain: self.domain,
        }
    }

    /// Stable hex id of the load system. Two operator matrices are comparable
    /// entry by entry only if their load system ids match.
    pub fn system_id(&self) -> String {
        let json = serde_json::to_string(&self.descriptor()).expect("descriptor serializes");
        let digest = Sha256::digest(json.as_bytes());
        let mut out = String::with_capacity(16);
        for b in &digest[..8] {
            out.push_str(&format!("{b:02x}"));
        }
        out
    }
}

/// Tag every boundary facet of `mesh` against `layout`: facets on the clamped
/// face get the Dirichlet tag, all others the id of the patch containing
/// their centroid. When the mesh resolution is a multiple of the patch count
/// per axis, patch edges coincide with facet edges and every facet lies
/// entirely inside its patch; otherwise facets straddling a patch edge are
/// assigned whole to the centroid's patch.
pub fn tag_boundary(mut mesh: Mesh, layout: &PatchLayout) -> Result<Mesh> {
    if layout.dimension() != mesh.dimension() {
        return Err(CoreError::config(format!(
            "layout dimension {} does not match mesh dimension {}",
            layout.dimension(),
            mesh.dimension()
        )));
    }
    if layout.domain() != mesh.domain() {
        return Err(CoreError::config(
            "layout domain does not match mesh domain",
        ));
    }

    let centroids: Vec<(usize, Face, [f64; 3])> = mesh
        .boundary_facets()
        .iter()
        .enumerate()
        .map(|(i, f)| (i, f.face, mesh.facet_centroid(f)))
        .collect();

    let mut tags = vec![FacetTag::Untagged; centroids.len()];
    for (i, face, centroid) in centroids {
        tags[i] = if face == layout.dirichlet_face() {
            FacetTag::Dirichlet
        } else {
            FacetTag::Patch(layout.patch_at(face, centroid)?)
        };
    }
    for (f, t) in mesh.boundary_mut().iter_mut().zip(tags) {
        f.tag = t;
    }
    mesh.set_layout(layout.clone());
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_box_mesh;

    fn centered_cube(dim: usize) -> BoxRegion {
        BoxRegion::cube(-0.5, 0.5, dim).unwrap()
    }

    #[test]
    fn load_counts() {
        let d3 = centered_cube(3);
        let l = PatchLayout::new(&d3, 3, 5, Face::ZMin).unwrap();
        assert_eq!(l.load_count(), 125);
        assert_eq!(l.patches_per_face(), 25);
        let l = PatchLayout::new(&d3, 3, 3, Face::ZMin).unwrap();
        assert_eq!(l.load_count(), 45);
        let d2 = centered_cube(2);
        let l = PatchLayout::new(&d2, 2, 4, Face::YMin).unwrap();
        assert_eq!(l.load_count(), 12);
    }

    #[test]
    fn rejects_bad_layouts() {
        let d3 = centered_cube(3);
        assert!(PatchLayout::new(&d3, 3, 0, Face::ZMin).is_err());
        let d2 = centered_cube(2);
        assert!(PatchLayout::new(&d2, 2, 3, Face::ZMin).is_err());
    }

    #[test]
    fn patch_rects_partition_each_face() {
        let d3 = centered_cube(3);
        let l = PatchLayout::new(&d3, 3, 5, Face::ZMin).unwrap();
        let mut total = 0.0;
        for id in 1..=l.load_count() as u32 {
            total += l.patch_area(id).unwrap();
        }
        // 5 traction faces of unit area each.
        assert!((total - 5.0).abs() < 1e-12);
        // First patch on the first traction face starts at the low corner.
        let (face, rect) = l.patch_rect(1).unwrap();
        assert_eq!(face, Face::XMin);
        assert!((rect[0][0] + 0.5).abs() < 1e-15);
        assert!((rect[0][1] + 0.3).abs() < 1e-15);
    }

    #[test]
    fn patch_at_inverts_rect() {
        let d3 = centered_cube(3);
        let l = PatchLayout::new(&d3, 3, 4, Face::ZMin).unwrap();
        for id in 1..=l.load_count() as u32 {
            let (face, rect) = l.patch_rect(id).unwrap();
            let tangents = face.tangent_axes(3);
            let mut point = [0.0; 3];
            point[face.axis()] = face.plane_coordinate(&d3);
            point[tangents[0]] = 0.5 * (rect[0][0] + rect[0][1]);
            point[tangents[1]] = 0.5 * (rect[1][0] + rect[1][1]);
            assert_eq!(l.patch_at(face, point).unwrap(), id);
        }
    }

    #[test]
    fn tags_cover_boundary_exactly() {
        let d3 = centered_cube(3);
        let mesh = build_box_mesh(&d3, 3, 6).unwrap();
        let layout = PatchLayout::new(&d3, 3, 3, Face::ZMin).unwrap();
        let mesh = tag_boundary(mesh, &layout).unwrap();

        let mut patch_area = vec![0.0; layout.load_count() + 1];
        let mut dirichlet_area = 0.0;
        for f in mesh.boundary_facets() {
            match f.tag {
                FacetTag::Dirichlet => dirichlet_area += mesh.facet_measure(f),
                FacetTag::Patch(id) => patch_area[id as usize] += mesh.facet_measure(f),
                FacetTag::Untagged => panic!("facet left untagged"),
            }
        }
        assert!((dirichlet_area - 1.0).abs() < 1e-12);
        // Divisible case: facet areas per patch match the exact patch area.
        for id in 1..=layout.load_count() as u32 {
            let expect = layout.patch_area(id).unwrap();
            assert!(
                (patch_area[id as usize] - expect).abs() < 1e-12,
                "patch {id}: {} vs {expect}",
                patch_area[id as usize]
            );
        }
    }

    #[test]
    fn tags_cover_boundary_when_not_divisible() {
        // 7 cells, 3 patches per axis: facets straddle patch edges but the
        // union of patch facets must still cover the traction boundary.
        let d3 = centered_cube(3);
        let mesh = build_box_mesh(&d3, 3, 7).unwrap();
        let layout = PatchLayout::new(&d3, 3, 3, Face::ZMin).unwrap();
        let mesh = tag_boundary(mesh, &layout).unwrap();
        let mut patch_total = 0.0;
        for f in mesh.boundary_facets() {
            if let FacetTag::Patch(id) = f.tag {
                assert!(id >= 1 && id as usize <= layout.load_count());
                patch_total += mesh.facet_measure(f);
            }
        }
        assert!((patch_total - 5.0).abs() < 1e-12);
    }

    #[test]
    fn system_id_distinguishes_layouts() {
        let d3 = centered_cube(3);
        let a = PatchLayout::new(&d3, 3, 5, Face::ZMin).unwrap();
        let b = PatchLayout::new(&d3, 3, 4, Face::ZMin).unwrap();
        let c = PatchLayout::new(&d3, 3, 5, Face::ZMin).unwrap();
        assert_ne!(a.system_id(), b.system_id());
        assert_eq!(a.system_id(), c.system_id());
        assert_eq!(a.system_id().len(), 16);
    }
}
