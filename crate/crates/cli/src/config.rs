//! Experiment configuration: the TOML schema, load-time validation, and
//! builders for the derived objects (meshes, layouts, grids, contrasts).
//!
//! Validation is strict and front-loaded: a config that parses and passes
//! `validate` will not fail later for schema reasons. Unknown keys are
//! rejected so a typo cannot silently disable an option.

use std::path::Path;

use monorec_core::elasticity::{Inclusion, DEFAULT_FRACTION_DEPTH};
use monorec_core::geometry::{BoxRegion, Face};
use monorec_core::mesh::{build_box_mesh, tag_boundary, Mesh, PatchLayout, TestGridSpec};
use monorec_core::monotest::Method;
use monorec_core::ntd::{Direction, NoiseSpec};
use monorec_core::{CoreError, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainSection,
    pub material: MaterialSection,
    #[serde(default)]
    pub inclusions: Vec<InclusionSection>,
    pub measurement: MeasurementSection,
    pub offline: OfflineSection,
    pub grid: GridSection,
    pub test: TestSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub dimension: usize,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

/// Background (0) and default inclusion (1) Lame moduli.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSection {
    pub lambda0: f64,
    pub mu0: f64,
    pub lambda1: f64,
    pub mu1: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InclusionSection {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    /// Per-inclusion moduli; default to material.lambda1 / material.mu1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementSection {
    pub cells_per_axis: usize,
    pub patches_per_axis: usize,
    /// Clamped face name (xmin, xmax, ymin, ymax, zmin, zmax). Defaults to
    /// the lowest face of the last axis: zmin in 3-D, ymin in 2-D.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dirichlet_face: Option<String>,
    /// Relative entrywise noise level applied to the simulated measurement.
    #[serde(default)]
    pub noise_level: f64,
    #[serde(default)]
    pub noise_seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OfflineSection {
    pub cells_per_axis: usize,
    /// Simulating data and building test operators on the same mesh makes
    /// every discretization error cancel and overstates accuracy. Equal
    /// resolutions are therefore refused unless this is set.
    #[serde(default)]
    pub allow_matching_resolution: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub cubes_per_axis: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cube_size: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestSection {
    /// "standard" or "linearized".
    pub method: String,
    /// "raise" or "lower".
    pub direction: String,
    /// Test contrasts. Omitted values default to the sharpest admissible
    /// choice for the configured method, direction and materials.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Absolute eigenvalue threshold. When omitted, reconstruction derives
    /// one from the recorded noise magnitude (see `cmd_reconstruct`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Subdivision depth for element volume fractions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fraction_depth: Option<usize>,
}

fn ensure_finite(value: f64, what: &str) -> Result<()> {
    if !value.is_finite() {
        return Err(CoreError::config(format!("{what} must be finite, got {value}")));
    }
    Ok(())
}

fn point3(coords: &[f64], dim: usize, what: &str) -> Result<[f64; 3]> {
    if coords.len() != dim {
        return Err(CoreError::config(format!(
            "{what} must have {dim} coordinates, got {}",
            coords.len()
        )));
    }
    let mut out = [0.0; 3];
    for (a, &c) in coords.iter().enumerate() {
        ensure_finite(c, what)?;
        out[a] = c;
    }
    Ok(out)
}

impl RunConfig {
    /// Parse and validate a TOML config file.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CoreError::config(format!("cannot read config {}: {e}", path.display()))
        })?;
        let cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| CoreError::config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn dimension(&self) -> usize {
        self.domain.dimension
    }

    pub fn domain_box(&self) -> Result<BoxRegion> {
        let dim = self.domain.dimension;
        let min = point3(&self.domain.min, dim, "domain.min")?;
        let max = point3(&self.domain.max, dim, "domain.max")?;
        let region = BoxRegion::new(min, max)?;
        for a in 0..dim {
            if !(region.extent(a) > 0.0) {
                return Err(CoreError::config(format!(
                    "domain must have positive extent on axis {a}"
                )));
            }
        }
        Ok(region)
    }

    pub fn dirichlet_face(&self) -> Result<Face> {
        match &self.measurement.dirichlet_face {
            Some(name) => Face::parse(name),
            None => Ok(if self.domain.dimension == 2 { Face::YMin } else { Face::ZMin }),
        }
    }

    pub fn layout(&self) -> Result<PatchLayout> {
        PatchLayout::new(
            &self.domain_box()?,
            self.domain.dimension,
            self.measurement.patches_per_axis,
            self.dirichlet_face()?,
        )
    }

    fn build_mesh(&self, cells_per_axis: usize) -> Result<Mesh> {
        let mesh = build_box_mesh(&self.domain_box()?, self.domain.dimension, cells_per_axis)?;
        tag_boundary(mesh, &self.layout()?)
    }

    /// Fine mesh used to simulate measurement data.
    pub fn measurement_mesh(&self) -> Result<Mesh> {
        self.build_mesh(self.measurement.cells_per_axis)
    }

    /// Coarse mesh used to build the offline test operators.
    pub fn offline_mesh(&self) -> Result<Mesh> {
        self.build_mesh(self.offline.cells_per_axis)
    }

    /// Inclusions with per-inclusion moduli defaults resolved.
    pub fn truth_inclusions(&self) -> Result<Vec<Inclusion>> {
        let dim = self.domain.dimension;
        self.inclusions
            .iter()
            .enumerate()
            .map(|(k, inc)| {
                let what = format!("inclusions[{k}]");
                let min = point3(&inc.min, dim, &format!("{what}.min"))?;
                let max = point3(&inc.max, dim, &format!("{what}.max"))?;
                Ok(Inclusion {
                    region: BoxRegion::new(min, max)?,
                    lambda: inc.lambda.unwrap_or(self.material.lambda1),
                    mu: inc.mu.unwrap_or(self.material.mu1),
                })
            })
            .collect()
    }

    pub fn grid_spec(&self) -> Result<TestGridSpec> {
        let mut offset = [0.0; 3];
        if let Some(o) = &self.grid.offset {
            offset = point3(o, self.domain.dimension, "grid.offset")?;
        }
        Ok(TestGridSpec {
            cubes_per_axis: self.grid.cubes_per_axis,
            cube_size: self.grid.cube_size,
            offset,
        })
    }

    pub fn method(&self) -> Result<Method> {
        Method::parse(&self.test.method)
    }

    pub fn direction(&self) -> Result<Direction> {
        match self.test.direction.as_str() {
            "raise" => Ok(Direction::Raise),
            "lower" => Ok(Direction::Lower),
            other => Err(CoreError::config(format!(
                "test.direction must be \"raise\" or \"lower\", got \"{other}\""
            ))),
        }
    }

    pub fn fraction_depth(&self) -> usize {
        self.test.fraction_depth.unwrap_or(DEFAULT_FRACTION_DEPTH)
    }

    /// Largest admissible test contrasts for the configured method and
    /// direction. The raise-direction linearized test stays one-sided only
    /// when the contrast is shrunk by the background-to-inclusion ratio;
    /// the other three cases admit the plain modulus differences.
    pub fn contrast_bounds(&self) -> Result<(f64, f64)> {
        let m = &self.material;
        let (alpha, beta) = match (self.method()?, self.direction()?) {
            (Method::Standard, Direction::Raise) => (m.lambda1 - m.lambda0, m.mu1 - m.mu0),
            (Method::Standard, Direction::Lower) => (m.lambda0 - m.lambda1, m.mu0 - m.mu1),
            (Method::Linearized, Direction::Raise) => (
                (m.lambda0 / m.lambda1) * (m.lambda1 - m.lambda0),
                (m.mu0 / m.mu1) * (m.mu1 - m.mu0),
            ),
            (Method::Linearized, Direction::Lower) => (m.lambda0 - m.lambda1, m.mu0 - m.mu1),
        };
        Ok((alpha, beta))
    }

    /// Test contrasts actually used: configured values, or the bounds.
    pub fn contrasts(&self) -> Result<(f64, f64)> {
        let (alpha_max, beta_max) = self.contrast_bounds()?;
        let alpha = self.test.alpha.unwrap_or(alpha_max);
        let beta = self.test.beta.unwrap_or(beta_max);
        Ok((alpha, beta))
    }

    /// Noise spec after optional command line overrides, None when the
    /// effective level is zero.
    pub fn noise(&self, level_override: Option<f64>, seed_override: Option<u64>) -> Option<NoiseSpec> {
        let level = level_override.unwrap_or(self.measurement.noise_level);
        if level == 0.0 {
            return None;
        }
        Some(NoiseSpec {
            level,
            seed: seed_override.unwrap_or(self.measurement.noise_seed),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.domain.dimension;
        if dim != 2 && dim != 3 {
            return Err(CoreError::config(format!(
                "domain.dimension must be 2 or 3, got {dim}"
            )));
        }
        let domain = self.domain_box()?;

        let m = &self.material;
        for (v, what) in [
            (m.lambda0, "material.lambda0"),
            (m.mu0, "material.mu0"),
            (m.lambda1, "material.lambda1"),
            (m.mu1, "material.mu1"),
        ] {
            ensure_finite(v, what)?;
            if !(v > 0.0) {
                return Err(CoreError::config(format!("{what} must be positive, got {v}")));
            }
        }

        // The truth must sit on the side of the background the test probes,
        // in both moduli, or the monotonicity relation carries no sign.
        let direction = self.direction()?;
        if !self.inclusions.is_empty() {
            let ok = match direction {
                Direction::Raise => m.lambda1 > m.lambda0 && m.mu1 > m.mu0,
                Direction::Lower => m.lambda1 < m.lambda0 && m.mu1 < m.mu0,
            };
            if !ok {
                return Err(CoreError::config(format!(
                    "test.direction \"{}\" needs lambda1 and mu1 {} lambda0 and mu0 \
                     (lambda0 {}, lambda1 {}, mu0 {}, mu1 {})",
                    direction.name(),
                    match direction {
                        Direction::Raise => "above",
                        Direction::Lower => "below",
                    },
                    m.lambda0, m.lambda1, m.mu0, m.mu1,
                )));
            }
        }

        for (k, inc) in self.inclusions.iter().enumerate() {
            let what = format!("inclusions[{k}]");
            let min = point3(&inc.min, dim, &format!("{what}.min"))?;
            let max = point3(&inc.max, dim, &format!("{what}.max"))?;
            let region = BoxRegion::new(min, max)?;
            for a in 0..dim {
                if !(region.extent(a) > 0.0) {
                    return Err(CoreError::config(format!(
                        "{what} must have positive extent on axis {a}"
                    )));
                }
            }
            if !domain.contains_box(&region, 0.0) {
                return Err(CoreError::config(format!("{what} must lie inside the domain")));
            }
            for (v, part) in [(inc.lambda, "lambda"), (inc.mu, "mu")] {
                if let Some(v) = v {
                    ensure_finite(v, &format!("{what}.{part}"))?;
                    if !(v > 0.0) {
                        return Err(CoreError::config(format!(
                            "{what}.{part} must be positive, got {v}"
                        )));
                    }
                }
            }
        }

        if self.measurement.cells_per_axis < 2 {
            return Err(CoreError::config("measurement.cells_per_axis must be at least 2"));
        }
        if self.offline.cells_per_axis < 2 {
            return Err(CoreError::config("offline.cells_per_axis must be at least 2"));
        }
        if self.measurement.cells_per_axis == self.offline.cells_per_axis
            && !self.offline.allow_matching_resolution
        {
            return Err(CoreError::config(format!(
                "measurement and offline meshes share cells_per_axis {}; simulating data \
                 on the reconstruction mesh hides discretization error. Use different \
                 resolutions, or set offline.allow_matching_resolution = true to force it",
                self.measurement.cells_per_axis
            )));
        }
        if self.measurement.patches_per_axis == 0 {
            return Err(CoreError::config("measurement.patches_per_axis must be at least 1"));
        }
        self.layout()?;

        if !(self.measurement.noise_level >= 0.0) || !self.measurement.noise_level.is_finite() {
            return Err(CoreError::config(format!(
                "measurement.noise_level must be finite and >= 0, got {}",
                self.measurement.noise_level
            )));
        }

        if self.grid.cubes_per_axis == 0 {
            return Err(CoreError::config("grid.cubes_per_axis must be at least 1"));
        }
        if let Some(s) = self.grid.cube_size {
            ensure_finite(s, "grid.cube_size")?;
            if !(s > 0.0) {
                return Err(CoreError::config(format!(
                    "grid.cube_size must be positive, got {s}"
                )));
            }
        }
        let spec = self.grid_spec()?;
        monorec_core::mesh::build_test_cubes(&domain, dim, &spec)?;

        self.method()?;
        let (alpha_max, beta_max) = self.contrast_bounds()?;
        let (alpha, beta) = self.contrasts()?;
        for (v, what) in [(alpha, "test.alpha"), (beta, "test.beta")] {
            ensure_finite(v, what)?;
            if !(v >= 0.0) {
                return Err(CoreError::config(format!(
                    "{what} must be >= 0, got {v} (check the test direction)"
                )));
            }
        }
        if !(alpha + beta > 0.0) {
            return Err(CoreError::config(
                "test contrasts must satisfy alpha + beta > 0; both are zero",
            ));
        }
        // Oversized contrasts void the one-sided eigenvalue argument, so the
        // reconstruction would be meaningless rather than merely inaccurate.
        let slack = 1.0 + 1e-12;
        if alpha > alpha_max * slack || beta > beta_max * slack {
            return Err(CoreError::config(format!(
                "test contrasts alpha {alpha}, beta {beta} exceed the admissible bounds \
                 alpha <= {alpha_max}, beta <= {beta_max} for the {} {} test",
                self.test.method, self.test.direction,
            )));
        }
        if direction == Direction::Lower {
            // A lowered background modulus must stay positive definite.
            if alpha >= m.lambda0 || beta >= m.mu0 {
                return Err(CoreError::config(format!(
                    "lower-direction contrasts alpha {alpha}, beta {beta} would drive the \
                     test moduli below zero (lambda0 {}, mu0 {})",
                    m.lambda0, m.mu0
                )));
            }
        }

        if let Some(d) = self.test.delta {
            ensure_finite(d, "test.delta")?;
            if !(d >= 0.0) {
                return Err(CoreError::config(format!("test.delta must be >= 0, got {d}")));
            }
        }
        if let Some(depth) = self.test.fraction_depth {
            if depth > 8 {
                return Err(CoreError::config(format!(
                    "test.fraction_depth {depth} is too deep; 8 already samples 16M points \
                     per hexahedron in 3-D"
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub fn base_toml() -> String {
        r#"
[domain]
dimension = 3
min = [-0.5, -0.5, -0.5]
max = [0.5, 0.5, 0.5]

[material]
lambda0 = 2.0
mu0 = 1.0
lambda1 = 5.0
mu1 = 2.5

[[inclusions]]
min = [-0.3, -0.3, -0.1]
max = [-0.1, -0.1, 0.3]

[measurement]
cells_per_axis = 6
patches_per_axis = 2

[offline]
cells_per_axis = 5

[grid]
cubes_per_axis = 5

[test]
method = "standard"
direction = "raise"
"#
        .to_string()
    }

    fn parse(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CoreError::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    #[test]
    fn base_config_is_valid_and_fills_defaults() {
        let cfg = parse(&base_toml()).unwrap();
        assert_eq!(cfg.dirichlet_face().unwrap(), Face::ZMin);
        let (alpha, beta) = cfg.contrasts().unwrap();
        assert_eq!(alpha, 3.0);
        assert_eq!(beta, 1.5);
        assert_eq!(cfg.fraction_depth(), DEFAULT_FRACTION_DEPTH);
        assert!(cfg.noise(None, None).is_none());
        let incs = cfg.truth_inclusions().unwrap();
        assert_eq!(incs.len(), 1);
        assert_eq!(incs[0].lambda, 5.0);
        assert_eq!(incs[0].mu, 2.5);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = base_toml().replace("[test]", "[test]\nmystery = 3");
        let err = parse(&text).unwrap_err();
        assert!(err.to_string().contains("mystery"), "{err}");
    }

    #[test]
    fn matching_resolutions_need_the_override() {
        let text = base_toml().replace("cells_per_axis = 5", "cells_per_axis = 6");
        let err = parse(&text).unwrap_err();
        assert!(err.to_string().contains("allow_matching_resolution"), "{err}");
        let forced = text.replace(
            "[grid]",
            "allow_matching_resolution = true\n\n[grid]",
        );
        parse(&forced).unwrap();
    }

    #[test]
    fn linearized_raise_bounds_shrink_by_the_modulus_ratio() {
        let text = base_toml().replace("method = \"standard\"", "method = \"linearized\"");
        let cfg = parse(&text).unwrap();
        let (alpha, beta) = cfg.contrasts().unwrap();
        assert!((alpha - (2.0 / 5.0) * 3.0).abs() < 1e-15);
        assert!((beta - (1.0 / 2.5) * 1.5).abs() < 1e-15);
    }

    #[test]
    fn oversized_contrast_is_refused() {
        let text = base_toml().replace("direction = \"raise\"", "direction = \"raise\"\nalpha = 3.1");
        let err = parse(&text).unwrap_err();
        assert!(err.to_string().contains("admissible"), "{err}");
    }

    #[test]
    fn raise_test_on_a_softer_truth_is_refused() {
        let text = base_toml().replace("lambda1 = 5.0", "lambda1 = 0.5");
        let err = parse(&text).unwrap_err();
        assert!(err.to_string().contains("direction"), "{err}");
    }

    #[test]
    fn lower_direction_flips_the_required_ordering() {
        let text = base_toml()
            .replace("lambda1 = 5.0", "lambda1 = 1.0")
            .replace("mu1 = 2.5", "mu1 = 0.5")
            .replace("direction = \"raise\"", "direction = \"lower\"");
        let cfg = parse(&text).unwrap();
        let (alpha, beta) = cfg.contrasts().unwrap();
        assert_eq!(alpha, 1.0);
        assert_eq!(beta, 0.5);
    }

    #[test]
    fn inclusion_outside_the_domain_is_refused() {
        let text = base_toml().replace("max = [-0.1, -0.1, 0.3]", "max = [-0.1, -0.1, 0.7]");
        let err = parse(&text).unwrap_err();
        assert!(err.to_string().contains("inside the domain"), "{err}");
    }

    #[test]
    fn wrong_coordinate_count_is_refused() {
        let text = base_toml().replace("min = [-0.5, -0.5, -0.5]", "min = [-0.5, -0.5]");
        let err = parse(&text).unwrap_err();
        assert!(err.to_string().contains("coordinates"), "{err}");
    }
}
