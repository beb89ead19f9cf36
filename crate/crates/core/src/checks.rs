//! Reusable verification battery: numerical properties the operators must
//! satisfy, packaged as named pass/fail outcomes. The `verify` command runs
//! the whole battery on a coarse configuration; the test suites call the
//! individual checks at pinned sizes. Tolerances live here as constants so
//! every caller applies the same bounds.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::elasticity::{
    assemble, material_background, material_with_inclusions, strain_energy_product, Inclusion,
    MaterialField, DEFAULT_FRACTION_DEPTH,
};
use crate::error::{CoreError, Result};
use crate::frechet::{adjoint_trace_deviation, build_solution_bank, frechet_matrix};
use crate::geometry::{BoxRegion, Face};
use crate::mesh::{build_box_mesh, build_test_cubes, tag_boundary, Mesh, PatchLayout, TestGridSpec};
use crate::monotest::{linearized_test, min_eigenvalue, standard_test};
use crate::ntd::{
    difference_measurement, ntd_matrix, patch_load_vectors, spectral_norm_sym, Direction,
    DifferenceRoute, OperatorKind, OperatorMatrix, TestOperatorBank,
};

/// Raw asymmetry of an assembled operator, relative to its largest entry.
pub const SELF_ADJOINT_TOL_REL: f64 = 1e-9;
/// Eigenvalue slack for the ordering of operators of ordered coefficients.
pub const LOEWNER_TOL_REL: f64 = 1e-9;
/// Relative slack for the energy sandwich and the ratio lower bound.
pub const SANDWICH_SLACK_REL: f64 = 1e-8;
/// Difference-quotient error must shrink roughly linearly in the step.
pub const FD_RATIO_RANGE: (f64, f64) = (0.35, 0.65);
/// Derivative matrices may exceed zero by at most this fraction of their norm.
pub const NSD_TOL_REL: f64 = 1e-12;
/// Margin used when measurement and test operator are built identically.
pub const PERFECT_FIT_DELTA_REL: f64 = 1e-12;
/// Agreement of the coupled and subtraction difference routes.
pub const ROUTE_AGREEMENT_TOL_REL: f64 = 1e-8;
/// Agreement of a derivative column with its adjoint-solve counterpart.
pub const ADJOINT_TOL_REL: f64 = 1e-9;

/// One named verification result.
#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub bound: f64,
    pub detail: String,
}

impl CheckOutcome {
    fn at_least(name: impl Into<String>, measured: f64, bound: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed: measured >= bound,
            measured,
            bound,
            detail: detail.into(),
        }
    }

    fn at_most(name: impl Into<String>, measured: f64, bound: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed: measured <= bound,
            measured,
            bound,
            detail: detail.into(),
        }
    }

    fn in_range(
        name: impl Into<String>,
        measured: f64,
        range: (f64, f64),
        detail: impl Into<String>,
    ) -> Self {
        Self {
            name: name.into(),
            passed: range.0 <= measured && measured <= range.1,
            measured,
            bound: range.1,
            detail: detail.into(),
        }
    }

    /// One-line report, stable enough to grep in logs.
    pub fn line(&self) -> String {
        format!(
            "{} {}: {} (measured {:.3e}, bound {:.3e})",
            if self.passed { "pass" } else { "FAIL" },
            self.name,
            self.detail,
            self.measured,
            self.bound
        )
    }
}

pub fn all_passed(outcomes: &[CheckOutcome]) -> bool {
    outcomes.iter().all(|o| o.passed)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// The raw operator of any material field must be symmetric to rounding.
pub fn self_adjointness_check(mesh: &Mesh, material: &MaterialField) -> Result<CheckOutcome> {
    let op = ntd_matrix(mesh, material)?;
    Ok(CheckOutcome::at_most(
        "operator self-adjointness",
        op.relative_asymmetry(),
        SELF_ADJOINT_TOL_REL,
        "raw asymmetry relative to the largest entry",
    ))
}

/// Elementwise larger coefficients must give the smaller operator: for
/// random piecewise-constant fields with a <= b, the eigenvalues of the
/// operator difference stay above a rounding margin.
pub fn loewner_check(
    mesh: &Mesh,
    lambda0: f64,
    mu0: f64,
    pairs: usize,
    seed: u64,
) -> Result<Vec<CheckOutcome>> {
    if pairs == 0 {
        return Err(CoreError::invalid("at least one coefficient pair is required"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = mesh.element_count();
    let mut out = Vec::with_capacity(pairs);
    for p in 0..pairs {
        let mut la = Vec::with_capacity(n);
        let mut lb = Vec::with_capacity(n);
        let mut ma = Vec::with_capacity(n);
        let mut mb = Vec::with_capacity(n);
        for _ in 0..n {
            let l = lambda0 * (1.0 + rng.gen_range(0.0..1.0));
            la.push(l);
            lb.push(l * (1.0 + rng.gen_range(0.0..1.0)));
            let m = mu0 * (1.0 + rng.gen_range(0.0..1.0));
            ma.push(m);
            mb.push(m * (1.0 + rng.gen_range(0.0..1.0)));
        }
        let field_a = MaterialField::from_parts(mesh, la, ma)?;
        let field_b = MaterialField::from_parts(mesh, lb, mb)?;
        let op_a = ntd_matrix(mesh, &field_a)?;
        let op_b = ntd_matrix(mesh, &field_b)?;
        let diff = OperatorMatrix::from_raw(
            &op_a.entries - &op_b.entries,
            op_a.load_system_id.clone(),
            OperatorKind::Difference,
        );
        let smallest = min_eigenvalue(&diff)?;
        out.push(CheckOutcome::at_least(
            format!("coefficient ordering pair {p}"),
            smallest,
            -LOEWNER_TOL_REL * op_a.spectral_norm(),
            "smaller coefficients give the larger operator",
        ));
    }
    Ok(out)
}

/// Per-load energy sandwich. With d the change of the boundary form under a
/// coefficient perturbation, the difference of material energies evaluated
/// at the unperturbed solution bounds d from below, the same expression at
/// the perturbed solution bounds it from above, and a ratio-weighted
/// variant sharpens the lower bound. All three are exact identities or
/// one-sided estimates in the discrete space, so the slack only absorbs
/// solver tolerance.
pub fn sandwich_checks(
    mesh: &Mesh,
    lambda0: f64,
    mu0: f64,
    inclusions: &[Inclusion],
    depth: usize,
) -> Result<Vec<CheckOutcome>> {
    let background = material_background(mesh, lambda0, mu0)?;
    let perturbed = material_with_inclusions(mesh, lambda0, mu0, inclusions, depth)?;
    let loads = patch_load_vectors(mesh)?;
    let sys0 = assemble(mesh, &background)?;
    let sys1 = assemble(mesh, &perturbed)?;
    let u0 = sys0.solve_many(&loads)?;
    let u1 = sys1.solve_many(&loads)?;

    let wl: Vec<f64> = background
        .lambda_slice()
        .iter()
        .zip(perturbed.lambda_slice())
        .map(|(l0, l1)| l0 - l1)
        .collect();
    let wm: Vec<f64> = background
        .mu_slice()
        .iter()
        .zip(perturbed.mu_slice())
        .map(|(m0, m1)| m0 - m1)
        .collect();
    // Ratio-weighted variant: each element weight is scaled by the
    // coefficient ratio of the perturbed over the unperturbed field.
    let wl_ratio: Vec<f64> = background
        .lambda_slice()
        .iter()
        .zip(perturbed.lambda_slice())
        .map(|(l0, l1)| (l1 / l0) * (l0 - l1))
        .collect();
    let wm_ratio: Vec<f64> = background
        .mu_slice()
        .iter()
        .zip(perturbed.mu_slice())
        .map(|(m0, m1)| (m1 / m0) * (m0 - m1))
        .collect();

    let mut worst_lower = f64::INFINITY;
    let mut worst_upper = f64::INFINITY;
    let mut worst_ratio = f64::INFINITY;
    for (i, load) in loads.iter().enumerate() {
        let d = dot(load, u1[i].as_slice()) - dot(load, u0[i].as_slice());
        let lower = strain_energy_product(mesh, &wl, &wm, &u0[i], &u0[i])?;
        let upper = strain_energy_product(mesh, &wl, &wm, &u1[i], &u1[i])?;
        let ratio = strain_energy_product(mesh, &wl_ratio, &wm_ratio, &u1[i], &u1[i])?;
        let scale = d.abs().max(lower.abs()).max(upper.abs()).max(ratio.abs()).max(f64::MIN_POSITIVE);
        worst_lower = worst_lower.min((d - lower) / scale);
        worst_upper = worst_upper.min((upper - d) / scale);
        worst_ratio = worst_ratio.min((d - ratio) / scale);
    }
    Ok(vec![
        CheckOutcome::at_least(
            "energy sandwich lower",
            worst_lower,
            -SANDWICH_SLACK_REL,
            "form change stays above the energy at the unperturbed solution",
        ),
        CheckOutcome::at_least(
            "energy sandwich upper",
            worst_upper,
            -SANDWICH_SLACK_REL,
            "form change stays below the energy at the perturbed solution",
        ),
        CheckOutcome::at_least(
            "ratio lower bound",
            worst_ratio,
            -SANDWICH_SLACK_REL,
            "form change stays above the ratio-weighted energy",
        ),
    ])
}

/// The two ways of computing a difference matrix, the coupled solve and the
/// plain subtraction of two full operators, must agree.
pub fn route_agreement_check(
    mesh: &Mesh,
    lambda0: f64,
    mu0: f64,
    inclusions: &[Inclusion],
    depth: usize,
) -> Result<CheckOutcome> {
    let coupled =
        difference_measurement(mesh, lambda0, mu0, inclusions, depth, DifferenceRoute::Coupled)?;
    let subtracted =
        difference_measurement(mesh, lambda0, mu0, inclusions, depth, DifferenceRoute::Subtraction)?;
    let dev = (&coupled.entries - &subtracted.entries).abs().max();
    let scale = coupled.max_abs().max(f64::MIN_POSITIVE);
    Ok(CheckOutcome::at_most(
        "difference route agreement",
        dev / scale,
        ROUTE_AGREEMENT_TOL_REL,
        "coupled and subtraction routes give the same matrix",
    ))
}

/// Difference-quotient convergence of the derivative matrix: the error of
/// (change of operator)/t against the derivative shrinks linearly in t, and
/// the derivative matrix itself is negative semidefinite.
pub fn derivative_fd_check(
    mesh: &Mesh,
    lambda0: f64,
    mu0: f64,
    region: &BoxRegion,
    alpha: f64,
    beta: f64,
    steps: &[f64],
    depth: usize,
) -> Result<Vec<CheckOutcome>> {
    if steps.len() < 2 {
        return Err(CoreError::invalid("at least two step sizes are required"));
    }
    let bank = build_solution_bank(mesh, lambda0, mu0)?;
    let derivative = frechet_matrix(&bank, region, alpha, beta, depth)?;
    let norm = derivative.spectral_norm();

    let mut errors = Vec::with_capacity(steps.len());
    for &t in steps {
        if !(t > 0.0) {
            return Err(CoreError::invalid(format!("step sizes must be positive, got {t}")));
        }
        let inclusion =
            Inclusion { region: *region, lambda: lambda0 + t * alpha, mu: mu0 + t * beta };
        let diff = difference_measurement(
            mesh,
            lambda0,
            mu0,
            &[inclusion],
            depth,
            DifferenceRoute::Subtraction,
        )?;
        // The difference matrix holds unperturbed minus perturbed, so the
        // quotient approximating the derivative carries a minus sign.
        let quotient = diff.entries.map(|x| -x / t);
        errors.push((t, spectral_norm_sym(&(quotient - &derivative.entries))));
    }

    let mut out = Vec::new();
    for k in 1..errors.len() {
        let (t_prev, e_prev) = errors[k - 1];
        let (t_cur, e_cur) = errors[k];
        out.push(CheckOutcome::in_range(
            format!("difference quotient ratio t={t_cur}"),
            e_cur / e_prev.max(f64::MIN_POSITIVE),
            FD_RATIO_RANGE,
            format!("error contraction from t={t_prev}"),
        ));
    }
    let largest = *derivative
        .eigenvalues()
        .last()
        .ok_or_else(|| CoreError::numerical("derivative matrix has no eigenvalues"))?;
    out.push(CheckOutcome::at_most(
        "derivative negative semidefinite",
        largest,
        NSD_TOL_REL * norm,
        "largest eigenvalue of the derivative matrix",
    ));
    Ok(out)
}

/// One derivative column must match the independent adjoint-solve route.
pub fn adjoint_check(
    mesh: &Mesh,
    lambda0: f64,
    mu0: f64,
    region: &BoxRegion,
    alpha: f64,
    beta: f64,
    depth: usize,
    load: usize,
) -> Result<CheckOutcome> {
    let bank = build_solution_bank(mesh, lambda0, mu0)?;
    let derivative = frechet_matrix(&bank, region, alpha, beta, depth)?;
    let dev = adjoint_trace_deviation(&bank, region, alpha, beta, depth, load)?;
    Ok(CheckOutcome::at_most(
        "adjoint column agreement",
        dev,
        ADJOINT_TOL_REL * derivative.max_abs().max(f64::MIN_POSITIVE),
        format!("derivative column {load} against the adjoint solve"),
    ))
}

/// When the hidden region is exactly one grid cube and measurement and test
/// operators are built on the same mesh with the exact contrasts, the test
/// must flag exactly that cube.
pub fn perfect_fit_check(
    mesh: &Mesh,
    lambda0: f64,
    mu0: f64,
    lambda1: f64,
    mu1: f64,
    grid_spec: &TestGridSpec,
    target: usize,
    depth: usize,
) -> Result<Vec<CheckOutcome>> {
    let grid = build_test_cubes(mesh.domain(), mesh.dimension(), grid_spec)?;
    if target >= grid.len() {
        return Err(CoreError::invalid(format!(
            "target cube {target} out of range 0..{}",
            grid.len()
        )));
    }
    let alpha = lambda1 - lambda0;
    let beta = mu1 - mu0;
    let bank = TestOperatorBank::prepare(mesh, lambda0, mu0)?;
    let measurement = bank.operator(&grid.cubes[target], alpha, beta, Direction::Raise, depth)?;
    let mut ops = Vec::with_capacity(grid.len());
    for cube in &grid.cubes {
        ops.push(bank.operator(cube, alpha, beta, Direction::Raise, depth)?);
    }
    let delta = PERFECT_FIT_DELTA_REL * measurement.spectral_norm();
    let result = standard_test(&measurement, &ops, delta, Direction::Raise)?;
    let mask = result.inside_mask();
    let spurious = mask.iter().enumerate().filter(|(i, &m)| m && *i != target).count();
    Ok(vec![
        CheckOutcome::at_least(
            "perfect fit detects the cube",
            result.outcomes[target].min_eigenvalue,
            0.0,
            format!("decision value of the hidden cube {target}"),
        ),
        CheckOutcome::at_most(
            "perfect fit rejects the rest",
            spurious as f64,
            0.0,
            "no other cube is flagged",
        ),
    ])
}

/// Linearized decision at admissible contrasts: with the hidden region
/// itself as the probed region and contrasts scaled by the coefficient
/// ratio, the linearized test must flag it.
pub fn linearized_bound_check(
    mesh: &Mesh,
    lambda0: f64,
    mu0: f64,
    lambda1: f64,
    mu1: f64,
    region: &BoxRegion,
    depth: usize,
) -> Result<CheckOutcome> {
    let inclusion = Inclusion { region: *region, lambda: lambda1, mu: mu1 };
    let measurement =
        difference_measurement(mesh, lambda0, mu0, &[inclusion], depth, DifferenceRoute::Coupled)?;
    let bank = build_solution_bank(mesh, lambda0, mu0)?;
    let alpha = (lambda0 / lambda1) * (lambda1 - lambda0);
    let beta = (mu0 / mu1) * (mu1 - mu0);
    let derivative = frechet_matrix(&bank, region, alpha, beta, depth)?;
    let delta = PERFECT_FIT_DELTA_REL * measurement.spectral_norm();
    let result =
        linearized_test(&measurement, std::slice::from_ref(&derivative), delta, Direction::Raise)?;
    Ok(CheckOutcome::at_least(
        "linearized inside bound",
        result.outcomes[0].min_eigenvalue,
        0.0,
        "ratio-scaled contrasts keep the hidden region flagged",
    ))
}

/// Parameters of the coarse battery run.
#[derive(Debug, Clone)]
pub struct BatteryConfig {
    pub dimension: usize,
    pub cells_per_axis: usize,
    pub patches_per_axis: usize,
    pub lambda0: f64,
    pub mu0: f64,
    pub lambda1: f64,
    pub mu1: f64,
    pub seed: u64,
    pub loewner_pairs: usize,
    pub depth: usize,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        Self {
            dimension: 3,
            cells_per_axis: 4,
            patches_per_axis: 2,
            lambda0: 2.0,
            mu0: 1.0,
            lambda1: 5.0,
            mu1: 2.5,
            seed: 7,
            loewner_pairs: 2,
            depth: DEFAULT_FRACTION_DEPTH,
        }
    }
}

/// Run every check on one small self-built configuration. The inclusion is
/// a mesh-aligned cube in the lower corner octant, so volume fractions are
/// exact and the perfect-fit scenario is available.
pub fn run_battery(cfg: &BatteryConfig) -> Result<Vec<CheckOutcome>> {
    if !(cfg.lambda1 > cfg.lambda0) || !(cfg.mu1 > cfg.mu0) {
        return Err(CoreError::invalid("battery expects raised inclusion coefficients"));
    }
    let dim = cfg.dimension;
    let domain = BoxRegion::cube(-0.5, 0.5, dim)?;
    let mesh = build_box_mesh(&domain, dim, cfg.cells_per_axis)?;
    let clamped_face = if dim == 2 { Face::YMin } else { Face::ZMin };
    let layout = PatchLayout::new(&domain, dim, cfg.patches_per_axis, clamped_face)?;
    let mesh = tag_boundary(mesh, &layout)?;

    let mut lo = [0.0; 3];
    let mut hi = [0.0; 3];
    for a in 0..dim {
        lo[a] = -0.5;
        hi[a] = 0.0;
    }
    let region = BoxRegion::new(lo, hi)?;
    let inclusion = Inclusion { region, lambda: cfg.lambda1, mu: cfg.mu1 };
    let perturbed =
        material_with_inclusions(&mesh, cfg.lambda0, cfg.mu0, &[inclusion], cfg.depth)?;

    let mut outcomes = Vec::new();
    outcomes.push(self_adjointness_check(&mesh, &perturbed)?);
    outcomes.extend(loewner_check(&mesh, cfg.lambda0, cfg.mu0, cfg.loewner_pairs, cfg.seed)?);
    outcomes.extend(sandwich_checks(&mesh, cfg.lambda0, cfg.mu0, &[inclusion], cfg.depth)?);
    outcomes.push(route_agreement_check(&mesh, cfg.lambda0, cfg.mu0, &[inclusion], cfg.depth)?);
    outcomes.extend(derivative_fd_check(
        &mesh,
        cfg.lambda0,
        cfg.mu0,
        &region,
        cfg.lambda1 - cfg.lambda0,
        cfg.mu1 - cfg.mu0,
        &[0.1, 0.05, 0.025],
        cfg.depth,
    )?);
    outcomes.push(adjoint_check(
        &mesh,
        cfg.lambda0,
        cfg.mu0,
        &region,
        cfg.lambda1 - cfg.lambda0,
        cfg.mu1 - cfg.mu0,
        cfg.depth,
        0,
    )?);
    outcomes.extend(perfect_fit_check(
        &mesh,
        cfg.lambda0,
        cfg.mu0,
        cfg.lambda1,
        cfg.mu1,
        &TestGridSpec::tiling(2),
        0,
        cfg.depth,
    )?);
    outcomes.push(linearized_bound_check(
        &mesh,
        cfg.lambda0,
        cfg.mu0,
        cfg.lambda1,
        cfg.mu1,
        &region,
        cfg.depth,
    )?);
    Ok(outcomes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn battery_passes_in_three_dimensions() {
        let outcomes = run_battery(&BatteryConfig::default()).unwrap();
        for o in &outcomes {
            assert!(o.passed, "{}", o.line());
        }
        assert!(all_passed(&outcomes));
        assert!(outcomes.len() >= 12);
    }

    #[test]
    fn battery_passes_in_two_dimensions() {
        let cfg = BatteryConfig { dimension: 2, ..BatteryConfig::default() };
        let outcomes = run_battery(&cfg).unwrap();
        for o in &outcomes {
            assert!(o.passed, "{}", o.line());
        }
    }

    #[test]
    fn outcome_lines_name_the_verdict() {
        let good = CheckOutcome::at_most("demo", 0.5, 1.0, "detail");
        assert!(good.line().starts_with("pass demo"));
        let bad = CheckOutcome::at_least("demo", 0.5, 1.0, "detail");
        assert!(bad.line().starts_with("FAIL demo"));
        assert!(!all_passed(&[good, bad]));
    }

    #[test]
    fn bad_arguments_are_rejected() {
        let cfg = BatteryConfig::default();
        let domain = BoxRegion::cube(-0.5, 0.5, 3).unwrap();
        let mesh = build_box_mesh(&domain, 3, 2).unwrap();
        let layout = PatchLayout::new(&domain, 3, 1, Face::ZMin).unwrap();
        let mesh = tag_boundary(mesh, &layout).unwrap();
        assert!(loewner_check(&mesh, 1.0, 1.0, 0, 0).is_err());
        assert!(perfect_fit_check(
            &mesh,
            cfg.lambda0,
            cfg.mu0,
            cfg.lambda1,
            cfg.mu1,
            &TestGridSpec::tiling(2),
            99,
            cfg.depth
        )
        .is_err());
        let swapped = BatteryConfig { lambda1: 1.0, ..cfg };
        assert!(run_battery(&swapped).is_err());
    }
}
