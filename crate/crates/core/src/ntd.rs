//! Discretized Neumann-to-Dirichlet operator matrices over a patch load
//! system, difference measurements, test-inclusion operators, and
//! deterministic measurement noise.
//!
//! For loads g_1 .. g_m the operator matrix has entries
//!
//! ```text
//! B_ij = integral over the traction boundary of g_i . u^{g_j} ds
//! ```
//!
//! where u^{g_j} solves the elasticity problem for load g_j. With
//! piecewise-linear displacements that boundary integral is exactly the dot
//! product of the load vector of g_i with the solution vector of g_j, so the
//! matrix costs one factorization and m solves. The matrix is symmetric up
//! to solver error; the raw asymmetry is recorded and the stored entries are
//! symmetrized.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::elasticity::{
    assemble, assemble_weighted, load_vector, material_background, material_with_inclusions,
    BoundaryLoad, Inclusion, MaterialField, StiffnessSystem,
};
use crate::error::{CoreError, Result};
use crate::geometry::BoxRegion;
use crate::mesh::Mesh;

/// What an operator matrix represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorKind {
    /// Full Neumann-to-Dirichlet matrix of one material.
    Ntd,
    /// Background matrix minus perturbed matrix.
    Difference,
    /// Derivative of the operator at the background, for one test cube.
    Derivative,
    /// Difference matrix with measurement noise applied.
    NoisyDifference,
}

impl OperatorKind {
    pub fn name(self) -> &'static str {
        match self {
            OperatorKind::Ntd => "ntd",
            OperatorKind::Difference => "difference",
            OperatorKind::Derivative => "derivative",
            OperatorKind::NoisyDifference => "noisy-difference",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ntd" => Ok(OperatorKind::Ntd),
            "difference" => Ok(OperatorKind::Difference),
            "derivative" => Ok(OperatorKind::Derivative),
            "noisy-difference" => Ok(OperatorKind::NoisyDifference),
            other => Err(CoreError::invalid(format!("unknown operator kind '{other}'"))),
        }
    }
}

/// Symmetric m-by-m operator matrix tied to one load system.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    pub entries: DMatrix<f64>,
    /// Identifier of the patch layout the loads came from; matrices are
    /// comparable entry by entry only when these match.
    pub load_system_id: String,
    pub kind: OperatorKind,
    /// Largest absolute entry of (M - M^T) before symmetrization.
    pub presym_asymmetry: f64,
}

impl OperatorMatrix {
    /// Wrap raw entries: records the asymmetry, stores (M + M^T)/2.
    pub fn from_raw(entries: DMatrix<f64>, load_system_id: String, kind: OperatorKind) -> Self {
        let presym = max_abs_of(&(&entries - entries.transpose()));
        let sym = 0.5 * (&entries + entries.transpose());
        Self { entries: sym, load_system_id, kind, presym_asymmetry: presym }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn max_abs(&self) -> f64 {
        max_abs_of(&self.entries)
    }

    /// Raw asymmetry relative to the largest entry.
    pub fn relative_asymmetry(&self) -> f64 {
        let m = self.max_abs();
        if m == 0.0 {
            0.0
        } else {
            self.presym_asymmetry / m
        }
    }

    /// Spectral norm (largest absolute eigenvalue; entries are symmetric).
    pub fn spectral_norm(&self) -> f64 {
        spectral_norm_sym(&self.entries)
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let eig = SymmetricEigen::new(self.entries.clone());
        let mut vals: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        vals
    }

    pub fn check_comparable(&self, other: &OperatorMatrix) -> Result<()> {
        if self.load_system_id != other.load_system_id {
            return Err(CoreError::invalid(format!(
                "operator matrices belong to different load systems ({} vs {})",
                self.load_system_id, other.load_system_id
            )));
        }
        if self.dim() != other.dim() {
            return Err(CoreError::invalid(format!(
                "operator matrices have different sizes ({} vs {})",
                self.dim(),
                other.dim()
            )));
        }
        Ok(())
    }
}

pub(crate) fn max_abs_of(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// Spectral norm of a symmetric matrix.
pub fn spectral_norm_sym(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// Load vectors of all patches in patch order.
pub fn patch_load_vectors(mesh: &Mesh) -> Result<Vec<Vec<f64>>> {
    let layout = mesh
        .layout()
        .ok_or_else(|| CoreError::config("mesh carries no patch layout; call tag_boundary first"))?;
    (1..=layout.load_count() as u32)
        .map(|id| load_vector(mesh, &BoundaryLoad::normal(mesh, id)?))
        .collect()
}

/// Solutions of one stiffness system for all patch loads, as full vectors.
fn solve_all(system: &StiffnessSystem, loads: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    Ok(system
        .solve_many(loads)?
        .into_iter()
        .map(|u| u.as_slice().to_vec())
        .collect())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Operator entries from load vectors and solution vectors.
fn operator_entries(loads: &[Vec<f64>], solutions: &[Vec<f64>]) -> DMatrix<f64> {
    let m = loads.len();
    DMatrix::from_fn(m, m, |i, j| dot(&loads[i], &solutions[j]))
}

/// Full Neumann-to-Dirichlet matrix of one material field.
pub fn ntd_matrix(mesh: &Mesh, material: &MaterialField) -> Result<OperatorMatrix> {
    let layout = mesh
        .layout()
        .ok_or_else(|| CoreError::config("mesh carries no patch layout; call tag_boundary first"))?;
    let loads = patch_load_vectors(mesh)?;
    let system = assemble(mesh, material)?;
    let solutions = solve_all(&system, &loads)?;
    Ok(OperatorMatrix::from_raw(
        operator_entries(&loads, &solutions),
        layout.system_id(),
        OperatorKind::Ntd,
    ))
}

/// How a difference matrix is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DifferenceRoute {
    /// Solve the background system, then a second system whose right-hand
    /// side is the coefficient-difference operator applied to the background
    /// solution. One extra factorization, no subtraction of near-equal
    /// matrices.
    Coupled,
    /// Assemble both full matrices and subtract entrywise.
    Subtraction,
}

/// Difference of the background operator and the perturbed operator,
/// `B(lambda0, mu0) - B(lambda, mu)`, on the measurement mesh.
pub fn difference_measurement(
    mesh: &Mesh,
    lambda0: f64,
    mu0: f64,
    inclusions: &[Inclusion],
    depth: usize,
    route: DifferenceRoute,
) -> Result<OperatorMatrix> {
    let layout = mesh
        .layout()
        .ok_or_else(|| CoreError::config("mesh carries no patch layout; call tag_boundary first"))?;
    let background = material_background(mesh, lambda0, mu0)?;
    let perturbed = material_with_inclusions(mesh, lambda0, mu0, inclusions, depth)?;

    let loads = patch_load_vectors(mesh)?;
    let entries = match route {
        DifferenceRoute::Subtraction => {
            let sys0 = assemble(mesh, &background)?;
            let sys1 = assemble(mesh, &perturbed)?;
            let u0 = solve_all(&sys0, &loads)?;
            let u1 = solve_all(&sys1, &loads)?;
            operator_entries(&loads, &u0) - operator_entries(&loads, &u1)
        }
        DifferenceRoute::Coupled => {
            // v := u0 - u solves the perturbed system with right-hand side
            // K_delta u0, where K_delta carries the coefficient differences;
            // each matrix entry is then the load vector against v directly.
            let sys0 = assemble(mesh, &background)?;
            let u0 = solve_all(&sys0, &loads)?;
            let da: Vec<f64> = perturbed
                .lambda_slice()
                .iter()
                .zip(background.lambda_slice())
                .map(|(l, l0)| l - l0)
                .collect();
            let db: Vec<f64> = perturbed
                .mu_slice()
                .iter()
                .zip(background.mu_slice())
                .map(|(m, m0)| m - m0)
                .collect();
            let k_delta = assemble_weighted(mesh, &da, &db)?;
            let sys1 = assemble(mesh, &perturbed)?;
            let rhss: Vec<Vec<f64>> = u0
                .iter()
                .map(|u| k_delta.apply(u))
                .collect::<Result<_>>()?;
            let v = solve_all(&sys1, &rhss)?;
            operator_entries(&loads, &v)
        }
    };
    Ok(OperatorMatrix::from_raw(entries, layout.system_id(), OperatorKind::Difference))
}

/// Direction of a test perturbation: raise looks for stiffer regions,
/// lower for softer ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Raise,
    Lower,
}

impl Direction {
    pub fn name(self) -> &'static str {
        match self {
            Direction::Raise => "raise",
            Direction::Lower => "lower",
        }
    }

    /// Signed contrast applied to the background.
    pub fn apply(self, base: f64, contrast: f64) -> f64 {
        match self {
            Direction::Raise => base + contrast,
            Direction::Lower => base - contrast,
        }
    }
}

fn check_contrasts(
    lambda0: f64,
    mu0: f64,
    alpha: f64,
    beta: f64,
    direction: Direction,
) -> Result<()> {
    if !(alpha >= 0.0) || !(beta >= 0.0) || !(alpha + beta > 0.0) {
        return Err(CoreError::invalid(format!(
            "contrasts must satisfy alpha, beta >= 0 and alpha + beta > 0, got alpha {alpha}, beta {beta}"
        )));
    }
    if direction == Direction::Lower && (alpha >= lambda0 || beta >= mu0) {
        return Err(CoreError::invalid(format!(
            "lower-direction contrasts must stay below the background (alpha {alpha} vs lambda0 {lambda0}, beta {beta} vs mu0 {mu0})"
        )));
    }
    Ok(())
}

/// Test operator of one cube on the offline mesh:
/// `B(lambda0, mu0) - B(lambda0 +/- alpha on the cube, mu0 +/- beta on the cube)`.
pub fn test_operator_standard(
    mesh: &Mesh,
    lambda0: f64,
    mu0: f64,
    cube: &BoxRegion,
    alpha: f64,
    beta: f64,
    direction: Direction,
    depth: usize,
) -> Result<OperatorMatrix> {
    let bank = TestOperatorBank::prepare(mesh, lambda0, mu0)?;
    let mut out = bank.operator(cube, alpha, beta, direction, depth)?;
    out.kind = OperatorKind::Difference;
    Ok(out)
}

/// Shared state for building many standard test operators on one mesh: the
/// load vectors and the background matrix are computed once.
pub struct TestOperatorBank<'a> {
    mesh: &'a Mesh,
    lambda0: f64,
    mu0: f64,
    loads: Vec<Vec<f64>>,
    background: DMatrix<f64>,
    system_id: String,
}

impl<'a> TestOperatorBank<'a> {
    pub fn prepare(mesh: &'a Mesh, lambda0: f64, mu0: f64) -> Result<Self> {
        let layout = mesh
            .layout()
            .ok_or_else(|| CoreError::config("mesh carries no patch layout; call tag_boundary first"))?;
        let loads = patch_load_vectors(mesh)?;
        let material = material_background(mesh, lambda0, mu0)?;
        let system = assemble(mesh, &material)?;
        let solutions = solve_all(&system, &loads)?;
        let background = operator_entries(&loads, &solutions);
        Ok(Self { mesh, lambda0, mu0, loads, background, system_id: layout.system_id() })
    }

    pub fn load_count(&self) -> usize {
        self.loads.len()
    }

    /// The background matrix as an operator (symmetrized).
    pub fn background_matrix(&self) -> OperatorMatrix {
        OperatorMatrix::from_raw(self.background.clone(), self.system_id.clone(), OperatorKind::Ntd)
    }

    /// One perturbed-cube test operator.
    pub fn operator(
        &self,
        cube: &BoxRegion,
        alpha: f64,
        beta: f64,
        direction: Direction,
        depth: usize,
    ) -> Result<OperatorMatrix> {
        check_contrasts(self.lambda0, self.mu0, alpha, beta, direction)?;
        let perturbed = material_with_inclusions(
            self.mesh,
            self.lambda0,
            self.mu0,
            &[Inclusion {
                region: *cube,
                lambda: direction.apply(self.lambda0, alpha),
                mu: direction.apply(self.mu0, beta),
            }],
            depth,
        )?;
        let system = assemble(self.mesh, &perturbed)?;
        let solutions = solve_all(&system, &self.loads)?;
        let entries = &self.background - operator_entries(&self.loads, &solutions);
        Ok(OperatorMatrix::from_raw(entries, self.system_id.clone(), OperatorKind::Difference))
    }
}

/// Multiplicative entrywise measurement noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Relative level; each entry is perturbed by at most this fraction.
    pub level: f64,
    pub seed: u64,
}

/// Perturb every entry by `level * entry * E_ij` with E uniform on [-1, 1]
/// drawn row-major from a counter-based generator, then symmetrize.
pub fn add_noise(matrix: &OperatorMatrix, spec: &NoiseSpec) -> Result<OperatorMatrix> {
    if !(spec.level >= 0.0) {
        return Err(CoreError::invalid(format!("noise level must be >= 0, got {}", spec.level)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let dist = Uniform::new_inclusive(-1.0f64, 1.0f64);
    let m = matrix.dim();
    let mut noisy = matrix.entries.clone();
    for i in 0..m {
        for j in 0..m {
            let e = dist.sample(&mut rng);
            noisy[(i, j)] *= 1.0 + spec.level * e;
        }
    }
    let mut out = OperatorMatrix::from_raw(noisy, matrix.load_system_id.clone(), matrix.kind);
    out.kind = OperatorKind::NoisyDifference;
    Ok(out)
}

/// Spectral norm of the perturbation between two comparable matrices; the
/// natural choice for the test threshold delta of a noisy measurement.
pub fn perturbation_norm(clean: &OperatorMatrix, noisy: &OperatorMatrix) -> Result<f64> {
    clean.check_comparable(noisy)?;
    Ok(spectral_norm_sym(&(&noisy.entries - &clean.entries)))
}
