//! Artifact identity. Every on-disk matrix carries a JSON context describing
//! exactly which physical setup produced it, plus a hash of that context.
//! Downstream phases recompute the expected context from their own config and
//! refuse to combine artifacts whose stored contexts disagree, reporting the
//! differing fields instead of a bare hash mismatch.

use monorec_core::elasticity::Inclusion;
use monorec_core::matio::sha256_hex;
use monorec_core::ntd::NoiseSpec;
use monorec_core::{CoreError, Result};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

/// Physics shared by the measurement and the offline bank. Two artifacts can
/// only be combined when this part matches exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharedContext {
    pub dimension: usize,
    pub domain_min: Vec<f64>,
    pub domain_max: Vec<f64>,
    pub patches_per_axis: usize,
    pub dirichlet_face: String,
    pub lambda0: f64,
    pub mu0: f64,
}

/// Identity of a simulated measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementContext {
    #[serde(flatten)]
    pub shared: SharedContext,
    pub cells_per_axis: usize,
    pub inclusions: Vec<InclusionContext>,
    pub noise_level: f64,
    pub noise_seed: u64,
    pub fraction_depth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InclusionContext {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub lambda: f64,
    pub mu: f64,
}

/// Identity of an offline test operator bank. Deliberately independent of the
/// inclusions and the noise: one bank serves every measurement that shares
/// the background physics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankContext {
    #[serde(flatten)]
    pub shared: SharedContext,
    pub cells_per_axis: usize,
    pub cubes_per_axis: usize,
    pub cube_size: Option<f64>,
    pub offset: Vec<f64>,
    pub method: String,
    pub direction: String,
    pub alpha: f64,
    pub beta: f64,
    pub fraction_depth: usize,
}

fn coords(values: &[f64; 3], dim: usize) -> Vec<f64> {
    values[..dim].to_vec()
}

pub fn shared_context(cfg: &RunConfig) -> Result<SharedContext> {
    let domain = cfg.domain_box()?;
    let dim = cfg.dimension();
    Ok(SharedContext {
        dimension: dim,
        domain_min: coords(&domain.min, dim),
        domain_max: coords(&domain.max, dim),
        patches_per_axis: cfg.measurement.patches_per_axis,
        dirichlet_face: cfg.dirichlet_face()?.name().to_string(),
        lambda0: cfg.material.lambda0,
        mu0: cfg.material.mu0,
    })
}

fn inclusion_context(inc: &Inclusion, dim: usize) -> InclusionContext {
    InclusionContext {
        min: coords(&inc.region.min, dim),
        max: coords(&inc.region.max, dim),
        lambda: inc.lambda,
        mu: inc.mu,
    }
}

/// Context of the measurement `cmd_simulate` is about to produce. The noise
/// spec is passed in because command line flags may override the config.
pub fn measurement_context(cfg: &RunConfig, noise: Option<&NoiseSpec>) -> Result<MeasurementContext> {
    let dim = cfg.dimension();
    Ok(MeasurementContext {
        shared: shared_context(cfg)?,
        cells_per_axis: cfg.measurement.cells_per_axis,
        inclusions: cfg
            .truth_inclusions()?
            .iter()
            .map(|inc| inclusion_context(inc, dim))
            .collect(),
        noise_level: noise.map_or(0.0, |n| n.level),
        noise_seed: noise.map_or(0, |n| n.seed),
        fraction_depth: cfg.fraction_depth(),
    })
}

pub fn bank_context(cfg: &RunConfig) -> Result<BankContext> {
    let spec = cfg.grid_spec()?;
    let (alpha, beta) = cfg.contrasts()?;
    Ok(BankContext {
        shared: shared_context(cfg)?,
        cells_per_axis: cfg.offline.cells_per_axis,
        cubes_per_axis: spec.cubes_per_axis,
        cube_size: spec.cube_size,
        offset: coords(&spec.offset, cfg.dimension()),
        method: cfg.method()?.name().to_string(),
        direction: cfg.direction()?.name().to_string(),
        alpha,
        beta,
        fraction_depth: cfg.fraction_depth(),
    })
}

/// Canonical JSON encoding, the byte string all context hashes are taken of.
pub fn context_json<T: Serialize>(ctx: &T) -> Result<String> {
    serde_json::to_string(ctx)
        .map_err(|e| CoreError::config(format!("cannot encode context: {e}")))
}

pub fn context_hash<T: Serialize>(ctx: &T) -> Result<String> {
    Ok(sha256_hex(context_json(ctx)?.as_bytes()))
}

/// Field-level differences between two contexts, for refusal messages.
/// Returns dotted paths with both values, e.g.
/// `lambda0: stored 2, expected 2.5`.
pub fn context_diff<T: Serialize>(stored: &T, expected: &T) -> Result<Vec<String>> {
    let a = serde_json::to_value(stored)
        .map_err(|e| CoreError::config(format!("cannot encode context: {e}")))?;
    let b = serde_json::to_value(expected)
        .map_err(|e| CoreError::config(format!("cannot encode context: {e}")))?;
    let mut out = Vec::new();
    diff_values("", &a, &b, &mut out);
    Ok(out)
}

fn diff_values(path: &str, a: &serde_json::Value, b: &serde_json::Value, out: &mut Vec<String>) {
    use serde_json::Value;
    match (a, b) {
        (Value::Object(ma), Value::Object(mb)) => {
            let mut keys: Vec<&String> = ma.keys().chain(mb.keys()).collect();
            keys.sort();
            keys.dedup();
            for key in keys {
                let sub = if path.is_empty() { key.clone() } else { format!("{path}.{key}") };
                let missing = Value::Null;
                diff_values(
                    &sub,
                    ma.get(key).unwrap_or(&missing),
                    mb.get(key).unwrap_or(&missing),
                    out,
                );
            }
        }
        (Value::Array(va), Value::Array(vb)) if va.len() == vb.len() => {
            for (k, (ia, ib)) in va.iter().zip(vb).enumerate() {
                diff_values(&format!("{path}[{k}]"), ia, ib, out);
            }
        }
        _ if a == b => {}
        _ => out.push(format!("{path}: stored {a}, expected {b}")),
    }
}

/// Error for an artifact whose stored context disagrees with the config.
pub fn mismatch_error<T: Serialize>(what: &str, stored: &T, expected: &T) -> CoreError {
    let detail = match context_diff(stored, expected) {
        Ok(fields) if !fields.is_empty() => fields.join("; "),
        Ok(_) => "contexts differ in encoding only".to_string(),
        Err(e) => format!("context comparison failed: {e}"),
    };
    CoreError::ArtifactMismatch(format!(
        "{what} was produced under a different configuration. Differing fields: {detail}. \
         Re-run the producing phase, or point the command at matching artifacts"
    ))
}

/// Parse the context JSON stored in an artifact's metadata comment.
pub fn parse_stored<T: for<'de> Deserialize<'de>>(what: &str, comment: Option<&str>) -> Result<T> {
    let text = comment.ok_or_else(|| {
        CoreError::ArtifactMismatch(format!("{what} carries no stored context"))
    })?;
    serde_json::from_str(text).map_err(|e| {
        CoreError::ArtifactMismatch(format!("{what} has an unreadable stored context: {e}"))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo_shared() -> SharedContext {
        SharedContext {
            dimension: 3,
            domain_min: vec![-0.5; 3],
            domain_max: vec![0.5; 3],
            patches_per_axis: 2,
            dirichlet_face: "zmin".to_string(),
            lambda0: 2.0,
            mu0: 1.0,
        }
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = demo_shared();
        let mut b = a.clone();
        assert_eq!(context_hash(&a).unwrap(), context_hash(&b).unwrap());
        b.mu0 = 1.5;
        assert_ne!(context_hash(&a).unwrap(), context_hash(&b).unwrap());
    }

    #[test]
    fn diff_names_the_changed_fields() {
        let a = demo_shared();
        let mut b = a.clone();
        b.lambda0 = 3.0;
        b.dirichlet_face = "ymin".to_string();
        let diff = context_diff(&a, &b).unwrap();
        assert_eq!(diff.len(), 2);
        assert!(diff.iter().any(|d| d.starts_with("lambda0:")), "{diff:?}");
        assert!(diff.iter().any(|d| d.starts_with("dirichlet_face:")), "{diff:?}");
    }

    #[test]
    fn diff_descends_into_arrays_and_length_changes() {
        let a = vec![1.0, 2.0];
        let b = vec![1.0, 3.0];
        let diff = context_diff(&a, &b).unwrap();
        assert_eq!(diff, vec!["[1]: stored 2.0, expected 3.0"]);
        let c = vec![1.0];
        let diff = context_diff(&a, &c).unwrap();
        assert_eq!(diff.len(), 1);
    }

    #[test]
    fn stored_context_roundtrips_through_json() {
        let ctx = demo_shared();
        let text = context_json(&ctx).unwrap();
        let back: SharedContext = parse_stored("test", Some(&text)).unwrap();
        assert_eq!(back, ctx);
        assert!(parse_stored::<SharedContext>("test", None).is_err());
    }
}
