//! JSON run configuration.
//!
//! ```json
//! {
//!   "prior":   { "mu_x": 0.3, "sd_x": 1.2, "n_x": 50, "mu_y": 0.2, "sd_y": 0.75, "n_y": 100 },
//!   "sampler": { "iterations": 200000, "burn_in": 5000, "seed": 7, "scan": "uniform",
//!                "proposals": { "mu_x": 0.1 }, "trunc": { "auto": 0.9 }, "adapt": true, "chains": 4 }
//! }
//! ```
//!
//! The prior block is required. Every sampler key is optional. Errors name the
//! offending key.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde_json::{json, Map, Value};

use crate::error::{FusionError, Result};
use crate::model::PriorSpec;
use crate::sampler::SamplerConfig;

pub const PRIOR_KEYS: [&str; 6] = ["mu_x", "sd_x", "n_x", "mu_y", "sd_y", "n_y"];

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub prior: PriorSpec,
    pub sampler: SamplerConfig,
    /// Number of chains for `run`; 1 runs a single chain from the sample moments.
    pub chains: usize,
}

impl RunConfig {
    pub fn new(prior: PriorSpec, sampler: SamplerConfig, chains: usize) -> Result<Self> {
        let c = Self { prior, sampler, chains };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.prior.validate()?;
        self.sampler.validate()?;
        if self.chains == 0 {
            return Err(FusionError::config("sampler.chains", "must be >= 1"));
        }
        Ok(())
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let root: Value = serde_json::from_str(text)?;
        Self::from_value(&root)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn from_value(root: &Value) -> Result<Self> {
        let root = as_object(root, "<root>")?;
        for key in root.keys() {
            if key != "prior" && key != "sampler" {
                return Err(FusionError::config(key.as_str(), "unknown key"));
            }
        }
        let prior_obj = as_object(
            root.get("prior").ok_or_else(|| FusionError::config("prior", "missing"))?,
            "prior",
        )?;
        for key in prior_obj.keys() {
            if !PRIOR_KEYS.contains(&key.as_str()) {
                return Err(FusionError::config(format!("prior.{key}"), "unknown key"));
            }
        }
        let mut vals = [0.0; 6];
        for (slot, key) in vals.iter_mut().zip(PRIOR_KEYS) {
            let full = format!("prior.{key}");
            let v = prior_obj.get(key).ok_or_else(|| FusionError::config(full.clone(), "missing"))?;
            *slot = v
                .as_f64()
                .ok_or_else(|| FusionError::config(full, format!("expected a number, got {v}")))?;
        }
        let prior = PriorSpec::new(vals[0], vals[1], vals[2], vals[3], vals[4], vals[5])?;

        let mut sampler = SamplerConfig::default();
        let mut chains = 1;
        if let Some(s) = root.get("sampler") {
            for (key, v) in as_object(s, "sampler")? {
                let full = format!("sampler.{key}");
                match key.as_str() {
                    "iterations" => sampler.iterations = field(v, &full)?,
                    "burn_in" => sampler.burn_in = field(v, &full)?,
                    "seed" => sampler.seed = field(v, &full)?,
                    "scan" => sampler.scan = field(v, &full)?,
                    "proposals" => sampler.proposals = field(v, &full)?,
                    "trunc" => sampler.trunc = field(v, &full)?,
                    "adapt" => sampler.adapt = field(v, &full)?,
                    "chains" => chains = field(v, &full)?,
                    _ => return Err(FusionError::config(full, "unknown key")),
                }
            }
        }
        Self::new(prior, sampler, chains)
    }

    /// The resolved configuration, every default filled in, in the file schema.
    pub fn to_value(&self) -> Value {
        let p = &self.prior;
        let mut sampler = serde_json::to_value(&self.sampler).expect("serializable config");
        sampler["chains"] = json!(self.chains);
        json!({
            "prior": {
                "mu_x": p.mu_prime_x, "sd_x": p.sigma_prime_x, "n_x": p.n_prime_x,
                "mu_y": p.mu_prime_y, "sd_y": p.sigma_prime_y, "n_y": p.n_prime_y,
            },
            "sampler": sampler,
        })
    }
}

fn as_object<'a>(v: &'a Value, key: &str) -> Result<&'a Map<String, Value>> {
    v.as_object()
        .ok_or_else(|| FusionError::config(key, format!("expected an object, got {v}")))
}

fn field<T: DeserializeOwned>(v: &Value, key: &str) -> Result<T> {
    serde_json::from_value(v.clone()).map_err(|e| FusionError::config(key, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conditionals::ParamId;
    use crate::sampler::{ScanPolicy, TruncPolicy};

    const REFERENCE: &str = r#"{
        "prior": {"mu_x": 0.3, "sd_x": 1.2, "n_x": 50, "mu_y": 0.2, "sd_y": 0.75, "n_y": 100}
    }"#;

    fn key_of(e: FusionError) -> String {
        match e {
            FusionError::InvalidConfig { key, .. } => key,
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn defaults_fill_sampler() {
        let c = RunConfig::from_json_str(REFERENCE).unwrap();
        assert_eq!(c.sampler, SamplerConfig::default());
        assert_eq!(c.chains, 1);
        assert_eq!(c.prior.n_prime_y, 100.0);
    }

    #[test]
    fn round_trips_through_resolved_form() {
        let text = r#"{
            "prior": {"mu_x": 0.3, "sd_x": 1.2, "n_x": 50, "mu_y": 0.2, "sd_y": 0.75, "n_y": 100},
            "sampler": {"iterations": 10, "burn_in": 3, "seed": 9, "scan": "rho,mu_x,mu_y,sigma2_x,sigma2_y",
                        "proposals": {"mu_x": 0.5}, "trunc": {"fixed": 4.0}, "adapt": false, "chains": 3}
        }"#;
        let c = RunConfig::from_json_str(text).unwrap();
        assert_eq!(c.sampler.proposals.mu_x, 0.5);
        assert_eq!(c.sampler.proposals.mu_y, 0.1);
        assert_eq!(c.sampler.trunc, TruncPolicy::Fixed(4.0));
        assert!(matches!(c.sampler.scan, ScanPolicy::FixedPermutation(o) if o[0] == ParamId::Rho));
        let again = RunConfig::from_value(&c.to_value()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn errors_name_the_key() {
        let bad_n = REFERENCE.replace("\"n_x\": 50", "\"n_x\": 1");
        assert_eq!(key_of(RunConfig::from_json_str(&bad_n).unwrap_err()), "prior.n_x");
        let missing = REFERENCE.replace("\"sd_y\": 0.75,", "");
        assert_eq!(key_of(RunConfig::from_json_str(&missing).unwrap_err()), "prior.sd_y");
        let extra = r#"{"prior": {"mu_x": 0.3, "sd_x": 1.2, "n_x": 50, "mu_y": 0.2, "sd_y": 0.75, "n_y": 100},
                        "sampler": {"iters": 5}}"#;
        assert_eq!(key_of(RunConfig::from_json_str(extra).unwrap_err()), "sampler.iters");
        let scan = extra.replace("\"iters\": 5", "\"scan\": \"mu_x,mu_y\"");
        assert_eq!(key_of(RunConfig::from_json_str(&scan).unwrap_err()), "sampler.scan");
        let neg = extra.replace("\"iters\": 5", "\"iterations\": -1");
        assert_eq!(key_of(RunConfig::from_json_str(&neg).unwrap_err()), "sampler.iterations");
        let chains = extra.replace("\"iters\": 5", "\"chains\": 0");
        assert_eq!(key_of(RunConfig::from_json_str(&chains).unwrap_err()), "sampler.chains");
        assert!(matches!(RunConfig::from_json_str("{"), Err(FusionError::Json(_))));
    }
}
