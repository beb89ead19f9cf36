//! Shared oracles for the integration tests. Everything here recomputes
//! quantities through routes independent of the library internals: a plain
//! cyclic Jacobi eigensolver, closed-form energies of affine displacement
//! fields, and small deterministic helpers.

#![allow(dead_code)]

use monorec_core::elasticity::DisplacementField;
use monorec_core::geometry::{BoxRegion, Face};
use monorec_core::mesh::{build_box_mesh, tag_boundary, Mesh, PatchLayout};
use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
/// Deliberately naive: no pivot strategy, no library eigensolver involved.
pub fn jacobi_eigenvalues(a0: &DMatrix<f64>) -> Vec<f64> {
    let n = a0.nrows();
    assert_eq!(n, a0.ncols(), "matrix must be square");
    let mut a = a0.clone();
    let frob = a0.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += a[(i, j)] * a[(i, j)];
            }
        }
        if off.sqrt() <= 1e-15 * frob {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Dense random symmetric matrix with entries of order one.
pub fn random_symmetric(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    (&raw + raw.transpose()) / 2.0
}

/// The standard test fixture: unit box centered at the origin, one clamped
/// face at the bottom of the last axis, `patches` patches per axis on the
/// remaining faces.
pub fn tagged_mesh(dim: usize, res: usize, patches: usize) -> Mesh {
    let domain = BoxRegion::cube(-0.5, 0.5, dim).unwrap();
    let mesh = build_box_mesh(&domain, dim, res).unwrap();
    let face = if dim == 2 { Face::YMin } else { Face::ZMin };
    let layout = PatchLayout::new(&domain, dim, patches, face).unwrap();
    tag_boundary(mesh, &layout).unwrap()
}

/// Nodal interpolant of the affine field u(x) = A x + t. Exact for
/// lowest-order elements, so discrete energies of these fields must match
/// the closed-form values to rounding.
pub fn affine_field(mesh: &Mesh, a: &[[f64; 3]; 3], t: &[f64; 3]) -> DisplacementField {
    let dim = mesh.dimension();
    let mut values = vec![0.0; dim * mesh.vertex_count()];
    for v in 0..mesh.vertex_count() {
        let x = mesh.vertex(v);
        for c in 0..dim {
            let mut u = t[c];
            for d in 0..dim {
                u += a[c][d] * x[d];
            }
            values[dim * v + c] = u;
        }
    }
    DisplacementField::from_values(mesh, values).unwrap()
}

/// Closed-form bilinear energy density of two affine fields with gradients
/// A and B: lambda (div A)(div B) + 2 mu sym(A) : sym(B).
pub fn affine_energy_density(
    dim: usize,
    lambda: f64,
    mu: f64,
    a: &[[f64; 3]; 3],
    b: &[[f64; 3]; 3],
) -> f64 {
    let mut div_a = 0.0;
    let mut div_b = 0.0;
    for c in 0..dim {
        div_a += a[c][c];
        div_b += b[c][c];
    }
    let mut contract = 0.0;
    for c in 0..dim {
        for d in 0..dim {
            let ea = 0.5 * (a[c][d] + a[d][c]);
            let eb = 0.5 * (b[c][d] + b[d][c]);
            contract += ea * eb;
        }
    }
    lambda * div_a * div_b + 2.0 * mu * contract
}

/// A deterministic batch of gradient matrices exercising shear, dilation
/// and rotation parts.
pub fn gradient_samples(dim: usize) -> Vec<[[f64; 3]; 3]> {
    let mut out = vec![
        [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        [[0.0, 1.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]],
        [[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 0.0]],
        [[0.3, -0.7, 0.2], [0.5, 0.1, -0.4], [-0.2, 0.6, 0.8]],
    ];
    if dim == 2 {
        for g in &mut out {
            for c in 0..3 {
                g[c][2] = 0.0;
                g[2][c] = 0.0;
            }
        }
    }
    out
}
