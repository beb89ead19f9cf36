//! Cross-checks of the assembly, solve and load integration against
//! closed-form values: energies of affine fields, the defining variational
//! identity of discrete solutions, and exact patch load functionals.

mod support;

use monorec_core::elasticity::{
    assemble, material_with_inclusions, load_vector, strain_energy_product, BoundaryLoad,
    DisplacementField, Inclusion,
};
use monorec_core::geometry::BoxRegion;
use monorec_core::ntd::patch_load_vectors;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use support::{affine_energy_density, affine_field, gradient_samples, tagged_mesh};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Lowest-order elements represent affine fields exactly and the one-point
/// quadrature is exact for their constant strains, so discrete energies must
/// match the closed-form density times the domain volume to rounding.
#[test]
fn affine_energies_match_closed_form() {
    for dim in [2usize, 3] {
        let mesh = tagged_mesh(dim, 3, 1);
        let n = mesh.element_count();
        for (lambda, mu) in [(0.0, 0.5), (2.0, 1.0), (99.0, 1.0)] {
            let wl = vec![lambda; n];
            let wm = vec![mu; n];
            for a in gradient_samples(dim) {
                for b in gradient_samples(dim) {
                    let ua = affine_field(&mesh, &a, &[0.3, -0.1, 0.2]);
                    let ub = affine_field(&mesh, &b, &[0.0; 3]);
                    let got = strain_energy_product(&mesh, &wl, &wm, &ua, &ub).unwrap();
                    // Domain volume is one, so the density is the integral.
                    let want = affine_energy_density(dim, lambda, mu, &a, &b);
                    let scale = want.abs().max(1.0);
                    assert!(
                        (got - want).abs() <= 1e-12 * scale,
                        "dim {dim} lambda {lambda} mu {mu}: {got} vs {want}"
                    );
                }
            }
        }
    }
}

/// A discrete solution is defined by bilinear-form-equals-load against every
/// admissible test field; verify it with the independently computed energy
/// product and random test fields vanishing on the clamped face.
#[test]
fn solutions_satisfy_the_variational_identity() {
    let mesh = tagged_mesh(3, 3, 2);
    let region = BoxRegion::new([-0.13, -0.2, -0.31], [0.22, 0.29, 0.18]).unwrap();
    let material = material_with_inclusions(
        &mesh,
        2.0,
        1.0,
        &[Inclusion { region, lambda: 5.0, mu: 2.5 }],
        3,
    )
    .unwrap();
    let system = assemble(&mesh, &material).unwrap();
    let loads = patch_load_vectors(&mesh).unwrap();
    let solutions = system.solve_many(&loads).unwrap();

    let mut clamped = vec![false; mesh.vertex_count()];
    for v in mesh.dirichlet_vertices().unwrap() {
        clamped[v] = true;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let wl = material.lambda_slice().to_vec();
    let wm = material.mu_slice().to_vec();
    for trial in 0..3 {
        let mut values = vec![0.0; 3 * mesh.vertex_count()];
        for v in 0..mesh.vertex_count() {
            if clamped[v] {
                continue;
            }
            for c in 0..3 {
                values[3 * v + c] = rng.gen_range(-1.0..1.0);
            }
        }
        let test_field = DisplacementField::from_values(&mesh, values).unwrap();
        for (i, load) in loads.iter().enumerate() {
            let lhs = strain_energy_product(&mesh, &wl, &wm, &solutions[i], &test_field).unwrap();
            let rhs = dot(load, test_field.as_slice());
            let scale = lhs.abs().max(rhs.abs()).max(1e-12);
            assert!(
                (lhs - rhs).abs() <= 1e-8 * scale,
                "trial {trial} load {i}: {lhs} vs {rhs}"
            );
        }
    }
}

/// The load functional of a patch applied to an affine field equals the
/// traction times the exact integral of the field over the patch rectangle,
/// also when facet edges do not line up with patch edges.
#[test]
fn patch_loads_integrate_affine_fields_exactly() {
    for (dim, res, patches) in [(2usize, 4usize, 3usize), (3, 4, 3)] {
        let mesh = tagged_mesh(dim, res, patches);
        let layout = mesh.layout().unwrap().clone();
        let domain = *mesh.domain();
        let a = gradient_samples(dim)[3];
        let t = [0.17, -0.4, 0.25];
        let field = affine_field(&mesh, &a, &t);

        for id in 1..=layout.load_count() as u32 {
            let load = BoundaryLoad::normal(&mesh, id).unwrap();
            let vec = load_vector(&mesh, &load).unwrap();
            let got = dot(&vec, field.as_slice());

            let (face, rect) = layout.patch_rect(id).unwrap();
            let tangents = face.tangent_axes(dim);
            let mut centroid = [0.0; 3];
            centroid[face.axis()] = face.plane_coordinate(&domain);
            for (k, &axis) in tangents.iter().enumerate() {
                centroid[axis] = 0.5 * (rect[k][0] + rect[k][1]);
            }
            let area = layout.patch_area(id).unwrap();
            let mut field_at = [0.0; 3];
            for c in 0..dim {
                field_at[c] = t[c];
                for d in 0..dim {
                    field_at[c] += a[c][d] * centroid[d];
                }
            }
            let mut want = 0.0;
            for c in 0..dim {
                want += load.traction[c] * field_at[c];
            }
            want *= area;

            let scale = want.abs().max(1.0);
            assert!(
                (got - want).abs() <= 1e-12 * scale,
                "dim {dim} patch {id}: {got} vs {want}"
            );
        }
    }
}
