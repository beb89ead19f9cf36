//! Derivative of the Neumann-to-Dirichlet operator at the background
//! coefficients, restricted to a test region.
//!
//! For loads g_i, g_j and background solutions u_i, u_j the derivative
//! matrix of a region B with contrasts (alpha, beta) has entries
//!
//! ```text
//! M_ij = - integral over B of 2 beta strain(u_i):strain(u_j) + alpha div(u_i) div(u_j) dx
//! ```
//!
//! All background solutions are piecewise linear, so per-element strains are
//! constant and the integral reduces to the exact centroid rule; the only
//! approximation is the volume fraction of elements straddling the region
//! boundary. The matrix is symmetric and negative semidefinite by
//! construction: it is minus a sum of Gram matrices.
//!
//! Entries are accumulated as two Gram matrices (divergence and shear parts)
//! and combined with the contrasts at the end, so the result is linear in
//! (alpha, beta) by construction.

use nalgebra::DMatrix;

use crate::elasticity::{
    assemble, assemble_weighted, element_strain, material_background, strain_contract,
    DisplacementField, StiffnessSystem,
};
use crate::error::{CoreError, Result};
use crate::geometry::BoxRegion;
use crate::mesh::{element_region_fractions, Mesh};
use crate::ntd::{patch_load_vectors, OperatorKind, OperatorMatrix};
#[cfg(test)]
use crate::ntd::max_abs_of;

/// Background solutions for every patch load with cached per-element
/// strains, shared by all derivative matrices on one mesh.
pub struct BackgroundSolutionBank<'a> {
    mesh: &'a Mesh,
    system: StiffnessSystem,
    system_id: String,
    loads: Vec<Vec<f64>>,
    displacements: Vec<DisplacementField>,
    /// Flat cache indexed `element * m + load`: symmetric gradient in
    /// six-component storage plus divergence, constant per element.
    strains: Vec<([f64; 6], f64)>,
    background: DMatrix<f64>,
}

/// Solve the background problem for every patch load and cache the
/// per-element strains. One factorization, m solves.
pub fn build_solution_bank<'a>(
    mesh: &'a Mesh,
    lambda0: f64,
    mu0: f64,
) -> Result<BackgroundSolutionBank<'a>> {
    let layout = mesh
        .layout()
        .ok_or_else(|| CoreError::config("mesh carries no patch layout; call tag_boundary first"))?;
    let loads = patch_load_vectors(mesh)?;
    let material = material_background(mesh, lambda0, mu0)?;
    let system = assemble(mesh, &material)?;
    let displacements = system.solve_many(&loads)?;

    let m = loads.len();
    let mut strains = Vec::with_capacity(mesh.element_count() * m);
    for e in 0..mesh.element_count() {
        for u in &displacements {
            strains.push(element_strain(mesh, u, e));
        }
    }
    let background = DMatrix::from_fn(m, m, |i, j| {
        loads[i]
            .iter()
            .zip(displacements[j].as_slice())
            .map(|(a, b)| a * b)
            .sum()
    });
    Ok(BackgroundSolutionBank {
        mesh,
        system,
        system_id: layout.system_id(),
        loads,
        displacements,
        strains,
        background,
    })
}

impl<'a> BackgroundSolutionBank<'a> {
    pub fn load_count(&self) -> usize {
        self.loads.len()
    }

    pub fn mesh(&self) -> &Mesh {
        self.mesh
    }

    pub fn system_id(&self) -> &str {
        &self.system_id
    }

    pub fn displacement(&self, load: usize) -> &DisplacementField {
        &self.displacements[load]
    }

    /// The background operator matrix observed while building the bank.
    pub fn background_operator(&self) -> OperatorMatrix {
        OperatorMatrix::from_raw(
            self.background.clone(),
            self.system_id.clone(),
            OperatorKind::Ntd,
        )
    }

    /// Largest deviation between the strain cache and a fresh recomputation.
    pub fn verify_cache(&self) -> f64 {
        let m = self.load_count();
        let mut worst = 0.0f64;
        for e in 0..self.mesh.element_count() {
            for (k, u) in self.displacements.iter().enumerate() {
                let (s, d) = element_strain(self.mesh, u, e);
                let (cs, cd) = self.strains[e * m + k];
                for c in 0..6 {
                    worst = worst.max((s[c] - cs[c]).abs());
                }
                worst = worst.max((d - cd).abs());
            }
        }
        worst
    }

    fn check_regions(&self, regions: &[BoxRegion]) -> Result<()> {
        let tol = 1e-9 * self.mesh.domain().max_extent();
        for (k, r) in regions.iter().enumerate() {
            if !self.mesh.domain().contains_box(r, tol) {
                return Err(CoreError::invalid(format!(
                    "region {k} [{:?}, {:?}] leaves the domain",
                    r.min, r.max
                )));
            }
        }
        Ok(())
    }

    /// The two Gram matrices of a region: divergence part and shear part,
    /// both scaled by element volume fractions. `entries = -(alpha D + beta S)`.
    fn region_grams(&self, regions: &[BoxRegion], depth: usize) -> (DMatrix<f64>, DMatrix<f64>) {
        let m = self.load_count();
        let fractions = element_region_fractions(self.mesh, regions, depth);
        let mut div_gram = DMatrix::zeros(m, m);
        let mut shear_gram = DMatrix::zeros(m, m);
        for (e, &fr) in fractions.iter().enumerate() {
            if fr == 0.0 {
                continue;
            }
            let w = fr * self.mesh.element_volume(e);
            let row = &self.strains[e * m..(e + 1) * m];
            for i in 0..m {
                let (si, di) = &row[i];
                for j in i..m {
                    let (sj, dj) = &row[j];
                    div_gram[(i, j)] += w * di * dj;
                    shear_gram[(i, j)] += w * 2.0 * strain_contract(si, sj);
                }
            }
        }
        for i in 0..m {
            for j in 0..i {
                div_gram[(i, j)] = div_gram[(j, i)];
                shear_gram[(i, j)] = shear_gram[(j, i)];
            }
        }
        (div_gram, shear_gram)
    }
}

/// Derivative matrix of one region. Contrasts may not be negative; both
/// zero gives the zero matrix.
pub fn frechet_matrix(
    bank: &BackgroundSolutionBank,
    region: &BoxRegion,
    alpha: f64,
    beta: f64,
    depth: usize,
) -> Result<OperatorMatrix> {
    frechet_matrix_regions(bank, std::slice::from_ref(region), alpha, beta, depth)
}

/// Derivative matrix of a union of regions with shared contrasts.
pub fn frechet_matrix_regions(
    bank: &BackgroundSolutionBank,
    regions: &[BoxRegion],
    alpha: f64,
    beta: f64,
    depth: usize,
) -> Result<OperatorMatrix> {
    if !(alpha >= 0.0) || !(beta >= 0.0) {
        return Err(CoreError::invalid(format!(
            "contrasts must be non-negative, got alpha {alpha}, beta {beta}"
        )));
    }
    bank.check_regions(regions)?;
    let (div_gram, shear_gram) = bank.region_grams(regions, depth);
    let entries = -(alpha * div_gram + beta * shear_gram);
    Ok(OperatorMatrix::from_raw(
        entries,
        bank.system_id().to_string(),
        OperatorKind::Derivative,
    ))
}

/// Independent check of one derivative column through the adjoint problem:
/// the column for load j equals the boundary trace of the solution v_j of
/// the background system whose right-hand side is minus the
/// contrast-weighted stiffness applied to u_j. Returns the largest absolute
/// deviation across the column.
pub fn adjoint_trace_deviation(
    bank: &BackgroundSolutionBank,
    region: &BoxRegion,
    alpha: f64,
    beta: f64,
    depth: usize,
    load: usize,
) -> Result<f64> {
    if load >= bank.load_count() {
        return Err(CoreError::invalid(format!(
            "load index {load} out of range 0..{}",
            bank.load_count()
        )));
    }
    let matrix = frechet_matrix(bank, region, alpha, beta, depth)?;
    let fractions = element_region_fractions(bank.mesh, std::slice::from_ref(region), depth);
    let a: Vec<f64> = fractions.iter().map(|f| alpha * f).collect();
    let b: Vec<f64> = fractions.iter().map(|f| beta * f).collect();
    let weighted = assemble_weighted(bank.mesh, &a, &b)?;
    let rhs: Vec<f64> = weighted
        .apply(bank.displacements[load].as_slice())?
        .iter()
        .map(|v| -v)
        .collect();
    let v = bank.system.solve(&rhs)?;

    let mut worst = 0.0f64;
    for i in 0..bank.load_count() {
        let trace: f64 = bank.loads[i]
            .iter()
            .zip(v.as_slice())
            .map(|(g, x)| g * x)
            .sum();
        worst = worst.max((matrix.entries[(i, load)] - trace).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Face;
    use crate::mesh::{build_box_mesh, tag_boundary, PatchLayout};
    use crate::ntd::spectral_norm_sym;

    fn tagged_mesh(dim: usize, cells: usize, patches: usize) -> crate::mesh::Mesh {
        let domain = BoxRegion::cube(-0.5, 0.5, dim).unwrap();
        let mesh = build_box_mesh(&domain, dim, cells).unwrap();
        let dirichlet = if dim == 2 { Face::YMin } else { Face::ZMin };
        let layout = PatchLayout::new(&domain, dim, patches, dirichlet).unwrap();
        tag_boundary(mesh, &layout).unwrap()
    }

    #[test]
    fn bank_reciprocity_and_cache() {
        let mesh = tagged_mesh(3, 3, 1);
        let bank = build_solution_bank(&mesh, 2.0, 1.0).unwrap();
        assert_eq!(bank.load_count(), 5);
        let b = bank.background_operator();
        assert!(b.relative_asymmetry() <= 1e-9);
        assert_eq!(bank.verify_cache(), 0.0);
    }

    #[test]
    fn derivative_is_negative_semidefinite() {
        let mesh = tagged_mesh(3, 3, 1);
        let bank = build_solution_bank(&mesh, 2.0, 1.0).unwrap();
        let cube = BoxRegion::new([-0.25, -0.25, -0.25], [0.25, 0.25, 0.0]).unwrap();
        let m = frechet_matrix(&bank, &cube, 1.0, 0.5, 3).unwrap();
        assert_eq!(m.kind, OperatorKind::Derivative);
        let norm = m.spectral_norm();
        assert!(norm > 0.0);
        let eigs = m.eigenvalues();
        let max = eigs.last().unwrap();
        assert!(*max <= 1e-12 * norm, "lambda_max {max} vs norm {norm}");
    }

    #[test]
    fn zero_contrast_and_zero_volume_give_zero() {
        let mesh = tagged_mesh(3, 2, 1);
        let bank = build_solution_bank(&mesh, 2.0, 1.0).unwrap();
        let cube = BoxRegion::new([-0.25, -0.25, -0.25], [0.25, 0.25, 0.25]).unwrap();
        let z = frechet_matrix(&bank, &cube, 0.0, 0.0, 3).unwrap();
        assert_eq!(z.max_abs(), 0.0);
        // A zero-volume region intersects no element interior.
        let point = BoxRegion::new([0.1; 3], [0.1; 3]).unwrap();
        let zp = frechet_matrix(&bank, &point, 1.0, 1.0, 3).unwrap();
        assert_eq!(zp.max_abs(), 0.0);
        // Regions outside the domain are rejected.
        let outside = BoxRegion::new([0.4; 3], [0.7; 3]).unwrap();
        assert!(frechet_matrix(&bank, &outside, 1.0, 1.0, 3).is_err());
        // Negative contrasts are rejected.
        assert!(frechet_matrix(&bank, &cube, -1.0, 0.5, 3).is_err());
    }

    #[test]
    fn additive_over_disjoint_regions() {
        let mesh = tagged_mesh(3, 4, 1);
        let bank = build_solution_bank(&mesh, 2.0, 1.0).unwrap();
        let a = BoxRegion::new([-0.375, -0.375, -0.375], [-0.125, -0.125, -0.125]).unwrap();
        let b = BoxRegion::new([0.125, 0.125, 0.125], [0.375, 0.375, 0.375]).unwrap();
        let ma = frechet_matrix(&bank, &a, 1.0, 0.5, 3).unwrap();
        let mb = frechet_matrix(&bank, &b, 1.0, 0.5, 3).unwrap();
        let mu = frechet_matrix_regions(&bank, &[a, b], 1.0, 0.5, 3).unwrap();
        let sum = &ma.entries + &mb.entries;
        let scale = mu.spectral_norm();
        assert!(scale > 0.0);
        let dev = max_abs_of(&(&mu.entries - &sum));
        assert!(dev <= 1e-13 * scale, "deviation {dev} vs scale {scale}");
    }

    #[test]
    fn linear_in_contrasts() {
        let mesh = tagged_mesh(2, 4, 2);
        let bank = build_solution_bank(&mesh, 2.0, 1.0).unwrap();
        let cube = BoxRegion::new([-0.3, -0.2, 0.0], [0.1, 0.25, 0.0]).unwrap();
        let m_a = frechet_matrix(&bank, &cube, 1.0, 0.0, 3).unwrap();
        let m_b = frechet_matrix(&bank, &cube, 0.0, 1.0, 3).unwrap();
        let m = frechet_matrix(&bank, &cube, 0.7, 1.9, 3).unwrap();
        let combo = 0.7 * &m_a.entries + 1.9 * &m_b.entries;
        let dev = max_abs_of(&(&m.entries - &combo));
        assert!(dev <= 1e-13 * m.spectral_norm());
    }

    #[test]
    fn derivative_monotone_in_contrasts() {
        let mesh = tagged_mesh(3, 3, 1);
        let bank = build_solution_bank(&mesh, 2.0, 1.0).unwrap();
        let cube = BoxRegion::new([-0.25, -0.25, -0.25], [0.25, 0.25, 0.25]).unwrap();
        let m0 = frechet_matrix(&bank, &cube, 0.5, 0.25, 3).unwrap();
        let m1 = frechet_matrix(&bank, &cube, 1.0, 0.5, 3).unwrap();
        let diff = &m0.entries - &m1.entries;
        let scale = spectral_norm_sym(&diff).max(m1.spectral_norm());
        let eig = nalgebra::SymmetricEigen::new(diff);
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min >= -1e-12 * scale, "lambda_min {min} vs scale {scale}");
    }

    #[test]
    fn adjoint_solve_reproduces_column() {
        let mesh = tagged_mesh(3, 3, 1);
        let bank = build_solution_bank(&mesh, 2.0, 1.0).unwrap();
        let cube = BoxRegion::new([-0.25, -0.25, -0.25], [0.25, 0.25, 0.25]).unwrap();
        let m = frechet_matrix(&bank, &cube, 1.0, 0.5, 3).unwrap();
        for load in [0, 2] {
            let dev = adjoint_trace_deviation(&bank, &cube, 1.0, 0.5, 3, load).unwrap();
            assert!(dev <= 1e-9 * m.spectral_norm().max(1e-300), "load {load}: deviation {dev}");
        }
        assert!(adjoint_trace_deviation(&bank, &cube, 1.0, 0.5, 3, 99).is_err());
    }
}
