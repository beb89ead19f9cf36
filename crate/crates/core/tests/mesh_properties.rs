//! Randomized structural properties of meshes, patch layouts and cube
//! fraction computation.

mod support;

use monorec_core::geometry::{BoxRegion, Face};
use monorec_core::mesh::{
    build_box_mesh, build_test_cubes, element_cube_fractions, FacetTag, PatchLayout,
    TestGridSpec,
};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Element volumes are positive and partition the domain volume.
    #[test]
    fn volumes_partition_the_domain(
        dim in prop_oneof![Just(2usize), Just(3usize)],
        res in 1usize..5,
        seed_domain in (0u8..2),
    ) {
        let domain = if seed_domain == 0 {
            BoxRegion::cube(-0.5, 0.5, dim).unwrap()
        } else {
            let mut min = [0.0; 3];
            let mut max = [0.0; 3];
            for a in 0..dim {
                min[a] = -0.3 - 0.1 * a as f64;
                max[a] = 0.7 + 0.2 * a as f64;
            }
            BoxRegion::new(min, max).unwrap()
        };
        let mesh = build_box_mesh(&domain, dim, res).unwrap();
        let mut total = 0.0;
        for e in 0..mesh.element_count() {
            prop_assert!(mesh.element_volume(e) > 0.0);
            total += mesh.element_volume(e);
        }
        let want = domain.volume(dim);
        prop_assert!((total - want).abs() <= 1e-12 * want);
    }

    /// Patch areas partition each open face, and every patch rectangle maps
    /// back to its own id through point lookup.
    #[test]
    fn patches_partition_faces(
        dim in prop_oneof![Just(2usize), Just(3usize)],
        patches in 1usize..4,
    ) {
        let domain = BoxRegion::new([-0.4, -0.6, -0.5], [0.6, 0.5, 0.4]).unwrap();
        let domain = if dim == 2 {
            BoxRegion::new([-0.4, -0.6, 0.0], [0.6, 0.5, 0.0]).unwrap()
        } else {
            domain
        };
        let clamped = if dim == 2 { Face::YMin } else { Face::ZMin };
        let layout = PatchLayout::new(&domain, dim, patches, clamped).unwrap();

        let mut per_face = std::collections::HashMap::new();
        for id in 1..=layout.load_count() as u32 {
            let (face, rect) = layout.patch_rect(id).unwrap();
            *per_face.entry(face.name()).or_insert(0.0) += layout.patch_area(id).unwrap();

            let tangents = face.tangent_axes(dim);
            let mut point = [0.0; 3];
            point[face.axis()] = face.plane_coordinate(&domain);
            for (k, &axis) in tangents.iter().enumerate() {
                point[axis] = 0.5 * (rect[k][0] + rect[k][1]);
            }
            prop_assert_eq!(layout.patch_at(face, point).unwrap(), id);
        }
        for face in Face::all(dim) {
            if face == clamped {
                prop_assert!(!per_face.contains_key(face.name()));
                continue;
            }
            let want: f64 = face
                .tangent_axes(dim)
                .iter()
                .map(|&a| domain.extent(a))
                .product();
            let got = per_face[face.name()];
            prop_assert!((got - want).abs() <= 1e-12 * want.max(1.0));
        }
    }

    /// Fractions are in [0, 1], monotone under region nesting, and exact
    /// for the full domain.
    #[test]
    fn fractions_are_bounded_and_monotone(
        dim in prop_oneof![Just(2usize), Just(3usize)],
        lo in -0.45f64..0.0,
        hi in 0.05f64..0.45,
        shrink in 0.1f64..0.9,
    ) {
        let domain = BoxRegion::cube(-0.5, 0.5, dim).unwrap();
        let mesh = build_box_mesh(&domain, dim, 3).unwrap();

        let mut outer_min = [0.0; 3];
        let mut outer_max = [0.0; 3];
        for a in 0..dim {
            outer_min[a] = lo;
            outer_max[a] = hi;
        }
        let outer = BoxRegion::new(outer_min, outer_max).unwrap();
        let mut inner_max = outer_max;
        for a in 0..dim {
            inner_max[a] = lo + shrink * (hi - lo);
        }
        let inner = BoxRegion::new(outer_min, inner_max).unwrap();

        let f_outer = element_cube_fractions(&mesh, &outer, 3);
        let f_inner = element_cube_fractions(&mesh, &inner, 3);
        let f_all = element_cube_fractions(&mesh, &domain, 3);
        for e in 0..mesh.element_count() {
            prop_assert!((0.0..=1.0).contains(&f_outer[e]));
            prop_assert!(f_inner[e] <= f_outer[e] + 1e-12);
            prop_assert!((f_all[e] - 1.0).abs() <= 1e-12);
        }
    }
}

/// Boundary facets carry the right tags: the clamped face everywhere, a
/// patch everywhere else, and their measures partition the surface.
#[test]
fn boundary_tags_cover_the_surface() {
    for dim in [2usize, 3] {
        let mesh = support::tagged_mesh(dim, 4, 3);
        let layout = mesh.layout().unwrap().clone();
        let clamped = if dim == 2 { Face::YMin } else { Face::ZMin };
        let mut patch_measure = vec![0.0; layout.load_count() + 1];
        let mut clamped_measure = 0.0;
        for facet in mesh.boundary_facets() {
            match facet.tag {
                FacetTag::Dirichlet => {
                    assert_eq!(facet.face, clamped);
                    clamped_measure += mesh.facet_measure(facet);
                }
                FacetTag::Patch(id) => {
                    assert_ne!(facet.face, clamped);
                    patch_measure[id as usize] += mesh.facet_measure(facet);
                }
                FacetTag::Untagged => panic!("untagged facet after tagging"),
            }
        }
        let face_area = 1.0;
        assert!((clamped_measure - face_area).abs() <= 1e-12);
        let total: f64 = patch_measure.iter().sum();
        let faces = if dim == 2 { 3.0 } else { 5.0 };
        assert!((total - faces * face_area).abs() <= 1e-12);
    }
}

/// The scanning grid enumerates cubes first along the first axis.
#[test]
fn grid_enumeration_is_first_axis_fastest() {
    let domain = BoxRegion::cube(0.0, 1.0, 3).unwrap();
    let grid = build_test_cubes(&domain, 3, &TestGridSpec::tiling(3)).unwrap();
    assert_eq!(grid.len(), 27);
    for (c, cube) in grid.cubes.iter().enumerate() {
        let [ix, iy, iz] = grid.indices(c);
        assert_eq!(c, ix + 3 * (iy + 3 * iz));
        let want_min = [ix as f64 / 3.0, iy as f64 / 3.0, iz as f64 / 3.0];
        for a in 0..3 {
            assert!((cube.min[a] - want_min[a]).abs() <= 1e-12);
        }
    }
}
