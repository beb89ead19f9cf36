//! Axis-aligned boxes and box faces.
//!
//! Everything geometric in this crate is axis-aligned: the domain is a box,
//! inclusions are boxes, scanning cubes are boxes. Points are stored as
//! `[f64; 3]` with the z component fixed to 0 in two dimensions.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Closed axis-aligned box. In 2-D the z interval is [0, 0].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxRegion {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl BoxRegion {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Result<Self> {
        for a in 0..3 {
            if !(min[a] <= max[a]) {
                return Err(CoreError::invalid(format!(
                    "box min {:?} exceeds max {:?} on axis {a}",
                    min, max
                )));
            }
        }
        Ok(BoxRegion { min, max })
    }

    /// Unit-style box spanning the same interval on each of `dim` axes.
    pub fn cube(lo: f64, hi: f64, dim: usize) -> Result<Self> {
        let mut min = [0.0; 3];
        let mut max = [0.0; 3];
        for a in 0..dim {
            min[a] = lo;
            max[a] = hi;
        }
        Self::new(min, max)
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.max[axis] - self.min[axis]
    }

    pub fn max_extent(&self) -> f64 {
        (0..3).map(|a| self.extent(a)).fold(0.0, f64::max)
    }

    /// Volume in `dim` dimensions (area in 2-D).
    pub fn volume(&self, dim: usize) -> f64 {
        (0..dim).map(|a| self.extent(a)).product()
    }

    pub fn center(&self) -> [f64; 3] {
        [
            0.5 * (self.min[0] + self.max[0]),
            0.5 * (self.min[1] + self.max[1]),
            0.5 * (self.min[2] + self.max[2]),
        ]
    }

    pub fn contains(&self, p: [f64; 3], tol: f64) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] - tol && p[a] <= self.max[a] + tol)
    }

    /// Whether `inner` lies inside `self` up to `tol` per coordinate.
    pub fn contains_box(&self, inner: &BoxRegion, tol: f64) -> bool {
        (0..3).all(|a| inner.min[a] >= self.min[a] - tol && inner.max[a] <= self.max[a] + tol)
    }

    /// Whether the open interiors overlap by more than `tol` on every axis.
    pub fn overlaps_interior(&self, other: &BoxRegion, dim: usize, tol: f64) -> bool {
        (0..dim).all(|a| {
            self.max[a].min(other.max[a]) - self.min[a].max(other.min[a]) > tol
        })
    }

    /// Intersection volume of the closed boxes (0 if disjoint).
    pub fn intersection_volume(&self, other: &BoxRegion, dim: usize) -> f64 {
        (0..dim)
            .map(|a| (self.max[a].min(other.max[a]) - self.min[a].max(other.min[a])).max(0.0))
            .product()
    }

    /// Euclidean distance between the closed boxes (0 if they touch).
    pub fn distance_to(&self, other: &BoxRegion, dim: usize) -> f64 {
        let mut sq = 0.0;
        for a in 0..dim {
            let gap = (self.min[a] - other.max[a]).max(other.min[a] - self.max[a]).max(0.0);
            sq += gap * gap;
        }
        sq.sqrt()
    }
}

/// One face of an axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Face {
    XMin,
    XMax,
    YMin,
    YMax,
    ZMin,
    ZMax,
}

/// Canonical face order used for patch numbering.
pub const FACE_ORDER: [Face; 6] = [
    Face::XMin,
    Face::XMax,
    Face::YMin,
    Face::YMax,
    Face::ZMin,
    Face::ZMax,
];

impl Face {
    /// Axis normal to the face.
    pub fn axis(self) -> usize {
        match self {
            Face::XMin | Face::XMax => 0,
            Face::YMin | Face::YMax => 1,
            Face::ZMin | Face::ZMax => 2,
        }
    }

    /// Whether the face sits at the minimum end of its axis.
    pub fn is_min(self) -> bool {
        matches!(self, Face::XMin | Face::YMin | Face::ZMin)
    }

    /// Outward unit normal of the face on a box domain.
    pub fn outward_normal(self) -> [f64; 3] {
        let mut n = [0.0; 3];
        n[self.axis()] = if self.is_min() { -1.0 } else { 1.0 };
        n
    }

    /// The in-face axes in ascending order (one axis in 2-D).
    pub fn tangent_axes(self, dim: usize) -> Vec<usize> {
        (0..dim).filter(|&a| a != self.axis()).collect()
    }

    /// Coordinate of the face plane on the given box.
    pub fn plane_coordinate(self, domain: &BoxRegion) -> f64 {
        if self.is_min() {
            domain.min[self.axis()]
        } else {
            domain.max[self.axis()]
        }
    }

    /// All faces of a `dim`-dimensional box, canonical order.
    pub fn all(dim: usize) -> Vec<Face> {
        FACE_ORDER.iter().copied().filter(|f| f.axis() < dim).collect()
    }

    pub fn name(self) -> &'static str {
        match self {
            Face::XMin => "xmin",
            Face::XMax => "xmax",
            Face::YMin => "ymin",
            Face::YMax => "ymax",
            Face::ZMin => "zmin",
            Face::ZMax => "zmax",
        }
    }

    pub fn parse(s: &str) -> Result<Face> {
        match s {
            "xmin" => Ok(Face::XMin),
            "xmax" => Ok(Face::XMax),
            "ymin" => Ok(Face::YMin),
            "ymax" => Ok(Face::YMax),
            "zmin" => Ok(Face::ZMin),
            "zmax" => Ok(Face::ZMax),
            _ => Err(CoreError::invalid(format!(
                "unknown face selector {s:?} (expected xmin/xmax/ymin/ymax/zmin/zmax)"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_rejects_inverted_bounds() {
        assert!(BoxRegion::new([0.0, 0.0, 0.0], [-1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn volume_and_extent() {
        let b = BoxRegion::new([-0.5, -0.5, -0.5], [0.5, 0.5, 0.5]).unwrap();
        assert_eq!(b.volume(3), 1.0);
        assert_eq!(b.volume(2), 1.0);
        assert_eq!(b.extent(1), 1.0);
        assert_eq!(b.center(), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn distance_between_boxes() {
        let a = BoxRegion::new([0.0, 0.0, 0.0], [1.0, 1.0, 1.0]).unwrap();
        let b = BoxRegion::new([2.0, 0.0, 0.0], [3.0, 1.0, 1.0]).unwrap();
        assert_eq!(a.distance_to(&b, 3), 1.0);
        let c = BoxRegion::new([2.0, 2.0, 0.0], [3.0, 3.0, 1.0]).unwrap();
        assert!((a.distance_to(&c, 3) - std::f64::consts::SQRT_2).abs() < 1e-15);
        assert_eq!(a.distance_to(&a, 3), 0.0);
    }

    #[test]
    fn face_normals_point_outward() {
        assert_eq!(Face::ZMin.outward_normal(), [0.0, 0.0, -1.0]);
        assert_eq!(Face::XMax.outward_normal(), [1.0, 0.0, 0.0]);
        assert_eq!(Face::all(2).len(), 4);
        assert_eq!(Face::all(3).len(), 6);
    }

    #[test]
    fn face_names_round_trip() {
        for f in Face::all(3) {
            assert_eq!(Face::parse(f.name()).unwrap(), f);
        }
        assert!(Face::parse("top").is_err());
    }
}
