//! Definiteness tests that classify test cubes as inside or outside the
//! unknown region, from one measurement matrix and a bank of per-cube
//! operators.
//!
//! All four test variants reduce to one decision rule. With the measurement
//! difference matrix M (noisy or clean) and the cube's operator T:
//!
//! ```text
//! standard raise:    value = lambda_min(sym(M - T)) + delta
//! standard lower:    value = lambda_min(sym(T - M)) + delta
//! linearized raise:  value = lambda_min(sym(M) + T) + delta
//! linearized lower:  value = lambda_min(T - sym(M)) + delta
//! ```
//!
//! and the cube is inside when value >= 0; exact zero counts as inside. The
//! lower variants are the raise variants of the negated matrices, restated
//! so both directions consume the same difference measurement. Adding
//! delta*I shifts every eigenvalue by delta, so the inside set can only grow
//! with delta.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::geometry::BoxRegion;
use crate::mesh::TestCubeGrid;
use crate::ntd::{Direction, NoiseSpec, OperatorKind, OperatorMatrix};

/// Which operator family drives the test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Difference operators of perturbed forward solves per cube.
    Standard,
    /// Derivative operators at the background per cube.
    Linearized,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Standard => "standard",
            Method::Linearized => "linearized",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Method::Standard),
            "linearized" => Ok(Method::Linearized),
            other => Err(CoreError::invalid(format!("unknown method '{other}'"))),
        }
    }
}

/// One test perturbation: a cube with contrasts and a direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestInclusion {
    pub cube: BoxRegion,
    pub alpha: f64,
    pub beta: f64,
    pub direction: Direction,
}

impl TestInclusion {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0) || !(self.beta >= 0.0) || !(self.alpha + self.beta > 0.0) {
            return Err(CoreError::invalid(format!(
                "contrasts must satisfy alpha, beta >= 0 and alpha + beta > 0, got alpha {}, beta {}",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }
}

/// Decision record of one cube.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubeOutcome {
    pub cube_index: usize,
    /// Smallest eigenvalue of the decision matrix with the delta shift
    /// folded in; the cube is inside exactly when this is >= 0.
    pub min_eigenvalue: f64,
    pub inside: bool,
}

/// Classification of every cube in one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionResult {
    pub method: Method,
    pub direction: Direction,
    pub delta: f64,
    pub noise: Option<NoiseSpec>,
    pub outcomes: Vec<CubeOutcome>,
}

impl ReconstructionResult {
    pub fn inside_mask(&self) -> Vec<bool> {
        self.outcomes.iter().map(|o| o.inside).collect()
    }

    pub fn inside_count(&self) -> usize {
        self.outcomes.iter().filter(|o| o.inside).count()
    }
}

/// Largest matrix size accepted by the dense eigensolver.
pub const MAX_EIGEN_DIM: usize = 512;

/// Smallest eigenvalue of the symmetrized matrix.
pub fn min_eigenvalue(matrix: &OperatorMatrix) -> Result<f64> {
    min_eigenvalue_entries(&matrix.entries)
}

fn min_eigenvalue_entries(entries: &nalgebra::DMatrix<f64>) -> Result<f64> {
    if entries.nrows() == 0 {
        return Err(CoreError::invalid("empty matrix has no eigenvalues"));
    }
    if entries.nrows() > MAX_EIGEN_DIM {
        return Err(CoreError::invalid(format!(
            "matrix size {} exceeds the dense eigensolver cap {MAX_EIGEN_DIM}",
            entries.nrows()
        )));
    }
    if entries.iter().any(|v| !v.is_finite()) {
        return Err(CoreError::invalid("matrix contains non-finite entries"));
    }
    let sym = 0.5 * (entries + entries.transpose());
    let eig = nalgebra::SymmetricEigen::new(sym);
    Ok(eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min))
}

fn check_measurement_kind(measurement: &OperatorMatrix) -> Result<()> {
    match measurement.kind {
        OperatorKind::Difference | OperatorKind::NoisyDifference => Ok(()),
        other => Err(CoreError::invalid(format!(
            "measurement must be a difference matrix, got kind '{}'",
            other.name()
        ))),
    }
}

fn run_test(
    measurement: &OperatorMatrix,
    test_ops: &[OperatorMatrix],
    delta: f64,
    direction: Direction,
    method: Method,
    expected_kind: OperatorKind,
) -> Result<ReconstructionResult> {
    if !(delta >= 0.0) {
        return Err(CoreError::invalid(format!("delta must be >= 0, got {delta}")));
    }
    check_measurement_kind(measurement)?;
    let m_sym = 0.5 * (&measurement.entries + measurement.entries.transpose());

    let mut outcomes = Vec::with_capacity(test_ops.len());
    for (k, op) in test_ops.iter().enumerate() {
        if op.kind != expected_kind {
            return Err(CoreError::invalid(format!(
                "test operator {k} has kind '{}', the {} test needs '{}'",
                op.kind.name(),
                method.name(),
                expected_kind.name()
            )));
        }
        measurement.check_comparable(op)?;
        let decision = match (method, direction) {
            (Method::Standard, Direction::Raise) => &m_sym - &op.entries,
            (Method::Standard, Direction::Lower) => &op.entries - &m_sym,
            (Method::Linearized, Direction::Raise) => &m_sym + &op.entries,
            (Method::Linearized, Direction::Lower) => &op.entries - &m_sym,
        };
        let value = min_eigenvalue_entries(&decision)? + delta;
        outcomes.push(CubeOutcome { cube_index: k, min_eigenvalue: value, inside: value >= 0.0 });
    }
    Ok(ReconstructionResult { method, direction, delta, noise: None, outcomes })
}

/// Standard test: compares the measurement against per-cube difference
/// operators from perturbed forward solves.
pub fn standard_test(
    measurement: &OperatorMatrix,
    test_ops: &[OperatorMatrix],
    delta: f64,
    direction: Direction,
) -> Result<ReconstructionResult> {
    run_test(measurement, test_ops, delta, direction, Method::Standard, OperatorKind::Difference)
}

/// Linearized test: compares the measurement against per-cube derivative
/// operators at the background.
pub fn linearized_test(
    measurement: &OperatorMatrix,
    derivative_ops: &[OperatorMatrix],
    delta: f64,
    direction: Direction,
) -> Result<ReconstructionResult> {
    run_test(
        measurement,
        derivative_ops,
        delta,
        direction,
        Method::Linearized,
        OperatorKind::Derivative,
    )
}

/// A flagged cube that is not contained in the true region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FalsePositive {
    pub cube_index: usize,
    /// Euclidean gap between the cube and the nearest true inclusion.
    pub distance: f64,
}

/// Histogram of false-positive distances with fixed-width bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceHistogram {
    pub bin_width: f64,
    /// counts[k] holds distances in [k w, (k+1) w).
    pub counts: Vec<usize>,
}

/// Scoring of a reconstruction against known true inclusions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthReport {
    /// Cubes fully contained in the union of true inclusions.
    pub inside_truth_count: usize,
    /// Of those, how many the test flagged.
    pub detected_inside_count: usize,
    /// detected / total over contained cubes; 1 when no cube is contained.
    pub recall_inside: f64,
    pub false_positives: Vec<FalsePositive>,
    pub distance_histogram: DistanceHistogram,
}

/// Volume of the union of boxes clipped to `probe`, by inclusion-exclusion.
fn union_volume_within(probe: &BoxRegion, boxes: &[BoxRegion], dim: usize) -> Result<f64> {
    if boxes.len() > 16 {
        return Err(CoreError::invalid(format!(
            "{} inclusion boxes exceed the inclusion-exclusion cap of 16",
            boxes.len()
        )));
    }
    let clipped: Vec<Option<BoxRegion>> = boxes.iter().map(|b| intersect(probe, b)).collect();
    let mut total = 0.0;
    for mask in 1u32..(1 << boxes.len()) {
        let mut cur: Option<BoxRegion> = Some(*probe);
        for (k, c) in clipped.iter().enumerate() {
            if mask & (1 << k) == 0 {
                continue;
            }
            cur = match (cur, c) {
                (Some(a), Some(b)) => intersect(&a, b),
                _ => None,
            };
            if cur.is_none() {
                break;
            }
        }
        if let Some(b) = cur {
            let sign = if mask.count_ones() % 2 == 1 { 1.0 } else { -1.0 };
            total += sign * b.volume(dim);
        }
    }
    Ok(total)
}

fn intersect(a: &BoxRegion, b: &BoxRegion) -> Option<BoxRegion> {
    let mut min = [0.0; 3];
    let mut max = [0.0; 3];
    for c in 0..3 {
        min[c] = a.min[c].max(b.min[c]);
        max[c] = a.max[c].min(b.max[c]);
        if min[c] > max[c] {
            return None;
        }
    }
    Some(BoxRegion { min, max })
}

/// Score a reconstruction against the true inclusion boxes. A cube counts
/// as inside the truth when the union of inclusions covers its volume up to
/// a 1e-9 relative slack.
pub fn classify_against_truth(
    result: &ReconstructionResult,
    grid: &TestCubeGrid,
    true_inclusions: &[BoxRegion],
) -> Result<TruthReport> {
    if result.outcomes.len() != grid.len() {
        return Err(CoreError::invalid(format!(
            "result has {} outcomes but the grid has {} cubes",
            result.outcomes.len(),
            grid.len()
        )));
    }
    let dim = grid.dimension;
    let mut inside_truth = 0usize;
    let mut detected_inside = 0usize;
    let mut false_positives = Vec::new();
    for outcome in &result.outcomes {
        let cube = &grid.cubes[outcome.cube_index];
        let vol = cube.volume(dim);
        let covered = union_volume_within(cube, true_inclusions, dim)?;
        let contained = covered >= vol * (1.0 - 1e-9);
        if contained {
            inside_truth += 1;
            if outcome.inside {
                detected_inside += 1;
            }
        } else if outcome.inside {
            let distance = true_inclusions
                .iter()
                .map(|b| cube.distance_to(b, dim))
                .fold(f64::INFINITY, f64::min);
            let distance = if distance.is_finite() { distance } else { 0.0 };
            false_positives.push(FalsePositive { cube_index: outcome.cube_index, distance });
        }
    }
    let recall_inside = if inside_truth == 0 {
        1.0
    } else {
        detected_inside as f64 / inside_truth as f64
    };

    // Bin width: the largest cube side, a natural length unit of the grid.
    let bin_width = (0..dim)
        .map(|a| grid.cubes.first().map_or(0.0, |c| c.extent(a)))
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let max_bin = false_positives
        .iter()
        .map(|f| (f.distance / bin_width).floor() as usize)
        .max()
        .map_or(0, |b| b + 1);
    let mut counts = vec![0usize; max_bin];
    for f in &false_positives {
        counts[(f.distance / bin_width).floor() as usize] += 1;
    }

    Ok(TruthReport {
        inside_truth_count: inside_truth,
        detected_inside_count: detected_inside,
        recall_inside,
        false_positives,
        distance_histogram: DistanceHistogram { bin_width, counts },
    })
}
