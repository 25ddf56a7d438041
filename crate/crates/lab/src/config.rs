//! Experiment configs: one TOML file per run.
//!
//! ```toml
//! experiment = "driving_variance"
//! seed = 7
//! meshes = [0.015625]
//! samples = 2000
//!
//! [domain]
//! shape = "disk"
//! center = [0.0, 0.0]
//! radius = 1.0
//! a = [0.0, -1.0]
//! b = [0.0, 1.0]
//!
//! [field]
//! h = 0.0
//! modifier = "one"
//! ```

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use magsle_core::correlation::{C_SIGMA_REFERENCE, K_MAX};
use magsle_core::domain::ShapeSpec;
use magsle_core::field::{FieldSpec, Modifier};

use crate::error::{Diagnostic, LabError, Result};

/// Every experiment id with the smallest sample count it accepts.
pub const EXPERIMENTS: &[(&str, usize)] = &[
    ("driving_variance", 200),
    ("small_field_ks", 100),
    ("large_field_degeneration", 100),
    ("h_limit_trend", 50),
    ("interface_magnetization", 100),
    ("arm_exponents", 50),
    ("rn_importance", 20),
    ("covariance_check", 200),
    ("c_sigma_calibration", 500),
    // oracle suites run by the acceptance harness
    ("es_exact", 0),
    ("loewner_oracles", 0),
    ("kernel_oracles", 0),
    ("inequality_suite", 1000),
];

pub fn min_samples(id: &str) -> Option<usize> {
    EXPERIMENTS.iter().find(|e| e.0 == id).map(|e| e.1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    #[serde(default)]
    pub h: f64,
    #[serde(default = "default_exponent")]
    pub exponent: f64,
    /// `one`, `delta_pow(p)` or `inv_delta_pow(p)`.
    #[serde(default = "default_modifier")]
    pub modifier: String,
    /// Defaults to the reference lattice constant.
    #[serde(default)]
    pub c_sigma: Option<f64>,
}

fn default_exponent() -> f64 {
    15.0 / 8.0
}
fn default_modifier() -> String {
    "one".into()
}

impl Default for FieldConfig {
    fn default() -> Self {
        FieldConfig { h: 0.0, exponent: default_exponent(), modifier: default_modifier(), c_sigma: None }
    }
}

pub fn parse_modifier(s: &str) -> std::result::Result<Modifier, String> {
    let s = s.trim();
    if s == "one" {
        return Ok(Modifier::One);
    }
    let arg = |name: &str| -> Option<std::result::Result<f64, String>> {
        let inner = s.strip_prefix(name)?.strip_prefix('(')?.strip_suffix(')')?;
        Some(inner.trim().parse::<f64>().map_err(|e| format!("bad exponent in {s:?}: {e}")))
    };
    if let Some(p) = arg("delta_pow") {
        return p.map(Modifier::DeltaPow);
    }
    if let Some(p) = arg("inv_delta_pow") {
        return p.map(Modifier::InvDeltaPow);
    }
    Err(format!("expected one, delta_pow(p) or inv_delta_pow(p), got {s:?}"))
}

impl FieldConfig {
    pub fn c_sigma(&self) -> f64 {
        self.c_sigma.unwrap_or(C_SIGMA_REFERENCE)
    }

    /// The field at intensity `h` with this config's scaling.
    pub fn spec_at(&self, h: f64) -> FieldSpec {
        let mut f = FieldSpec::constant(h).with_c_sigma(self.c_sigma());
        f.exponent = self.exponent;
        f.with_modifier(parse_modifier(&self.modifier).unwrap_or(Modifier::One))
    }

    pub fn spec(&self) -> FieldSpec {
        self.spec_at(self.h)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub seed: u64,
    pub domain: ShapeSpec,
    /// Mesh ladder, strictly decreasing.
    pub meshes: Vec<f64>,
    #[serde(default)]
    pub field: FieldConfig,
    pub samples: usize,
    /// Sweeps between recorded samples. The default is about four
    /// autocorrelation times of the driving function at δ = 1/64.
    #[serde(default = "default_spacing")]
    pub spacing: usize,
    /// Series truncation K.
    #[serde(default = "default_order")]
    pub order: usize,
    /// Monte Carlo points per series order.
    #[serde(default = "default_n_mc")]
    pub n_mc: usize,
    /// Ising samples per conditional or normalizer estimate.
    #[serde(default = "default_conditional")]
    pub conditional_samples: usize,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default)]
    pub h_values: Vec<f64>,
    #[serde(default = "default_window")]
    pub t_window: [f64; 2],
    /// Capacity at which driving values are compared.
    #[serde(default = "default_t_probe")]
    pub t_probe: f64,
    /// One-arm box radii L in lattice units.
    #[serde(default = "default_radii")]
    pub radii: Vec<i32>,
    /// Two-arm annuli: inner radius r and outer radii R = r·ratio.
    #[serde(default = "default_inner")]
    pub inner_radius: i32,
    #[serde(default = "default_ratios")]
    pub ratios: Vec<i32>,
    /// Curves and samples per estimator for the rn_full/discrete_rn comparison.
    #[serde(default = "default_cross_curves")]
    pub cross_curves: usize,
    #[serde(default = "default_cross_samples")]
    pub cross_samples: usize,
    /// Random disk automorphisms for the covariance checks.
    #[serde(default = "default_maps")]
    pub automorphisms: usize,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn default_spacing() -> usize {
    20
}
fn default_order() -> usize {
    6
}
fn default_n_mc() -> usize {
    2000
}
fn default_conditional() -> usize {
    400
}
fn default_eta() -> f64 {
    0.2
}
fn default_window() -> [f64; 2] {
    [0.05, 0.3]
}
fn default_t_probe() -> f64 {
    0.3
}
fn default_radii() -> Vec<i32> {
    vec![1, 2, 4, 8, 16, 32]
}
fn default_ratios() -> Vec<i32> {
    vec![2, 4, 8, 16]
}
fn default_inner() -> i32 {
    2
}
fn default_cross_curves() -> usize {
    4
}
fn default_cross_samples() -> usize {
    4000
}
fn default_maps() -> usize {
    20
}

impl ExperimentConfig {
    /// Parse and validate.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| LabError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs always serialize")
    }

    /// Field-level diagnostics; every problem is reported, not just the first.
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        let mut err = |field: &str, message: String| bad.push(Diagnostic { field: field.into(), message });
        let min = min_samples(&self.experiment);
        match min {
            None => {
                let ids: Vec<&str> = EXPERIMENTS.iter().map(|e| e.0).collect();
                err("experiment", format!("unknown id {:?}; known: {}", self.experiment, ids.join(", ")));
            }
            Some(m) if self.samples < m => err("samples", format!("{} is below the minimum {m} for {}", self.samples, self.experiment)),
            _ => {}
        }
        if let Err(e) = self.domain.validate() {
            err("domain", e.to_string());
        }
        if self.meshes.is_empty() {
            err("meshes", "at least one mesh is required".into());
        }
        for (k, &d) in self.meshes.iter().enumerate() {
            if !(d > 0.0 && d <= 0.5) {
                err(&format!("meshes[{k}]"), format!("{d} is outside (0, 0.5]"));
            }
        }
        if self.meshes.windows(2).any(|w| w[1] >= w[0]) {
            err("meshes", "ladder must be strictly decreasing".into());
        }
        let ladder = ["large_field_degeneration", "interface_magnetization", "c_sigma_calibration"];
        if ladder.contains(&self.experiment.as_str()) && self.meshes.len() < 3 {
            err("meshes", format!("{} needs at least three meshes", self.experiment));
        }
        if self.experiment == "h_limit_trend" && self.h_values.len() < 2 {
            err("h_values", "needs at least two intensities".into());
        }
        if self.h_values.iter().any(|h| !(h.is_finite() && *h >= 0.0)) {
            err("h_values", "intensities must be finite and nonnegative".into());
        }
        if !(self.field.h.is_finite() && self.field.h >= 0.0) {
            err("field.h", format!("{} must be finite and nonnegative", self.field.h));
        }
        if !self.field.exponent.is_finite() {
            err("field.exponent", "must be finite".into());
        }
        if let Err(e) = parse_modifier(&self.field.modifier) {
            err("field.modifier", e);
        }
        if let Some(c) = self.field.c_sigma {
            if !(c.is_finite() && c > 0.0) {
                err("field.c_sigma", format!("{c} must be positive"));
            }
        }
        if self.spacing == 0 {
            err("spacing", "must be at least 1".into());
        }
        if !(1..=K_MAX).contains(&self.order) {
            err("order", format!("{} is outside 1..={K_MAX}", self.order));
        }
        if self.n_mc < 10 {
            err("n_mc", "must be at least 10".into());
        }
        if self.conditional_samples < 50 {
            err("conditional_samples", "must be at least 50".into());
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            err("eta", format!("{} is outside (0, 1)", self.eta));
        }
        let [lo, hi] = self.t_window;
        if !(lo > 0.0 && lo < hi) {
            err("t_window", format!("need 0 < lo < hi, got [{lo}, {hi}]"));
        }
        if self.cross_curves == 0 || self.cross_samples < 100 {
            err("cross_samples", "need at least one curve and 100 samples".into());
        }
        if self.automorphisms == 0 {
            err("automorphisms", "must be at least 1".into());
        }
        if self.t_probe <= 0.0 {
            err("t_probe", "must be positive".into());
        }
        if self.radii.len() < 2 || self.radii.iter().any(|&r| r < 1) {
            err("radii", "need at least two positive radii".into());
        }
        if self.inner_radius < 1 {
            err("inner_radius", "must be at least 1".into());
        }
        if self.ratios.len() < 2 || self.ratios.iter().any(|&q| q < 2) {
            err("ratios", "need at least two ratios, each at least 2".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(LabError::ConfigInvalid(bad))
        }
    }

    pub fn finest(&self) -> f64 {
        *self.meshes.last().unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
experiment = "driving_variance"
seed = 1
meshes = [0.0625, 0.03125]
samples = 500
[domain]
shape = "disk"
center = [0.0, 0.0]
radius = 1.0
a = [0.0, -1.0]
b = [0.0, 1.0]
"#;

    #[test]
    fn parses_and_roundtrips() {
        let c = ExperimentConfig::from_toml(BASE).unwrap();
        assert_eq!(c.spacing, 20);
        assert_eq!(ExperimentConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn reports_every_bad_field() {
        let text = BASE.replace("[0.0625, 0.03125]", "[0.03125, 0.0625]").replace("samples = 500", "samples = 10");
        let text = format!("{text}[field]\nmodifier = \"delta_pow(x)\"\n");
        let Err(LabError::ConfigInvalid(d)) = ExperimentConfig::from_toml(&text) else { panic!() };
        let fields: Vec<&str> = d.iter().map(|x| x.field.as_str()).collect();
        assert_eq!(fields, ["samples", "meshes", "field.modifier"]);
    }

    #[test]
    fn modifiers() {
        assert_eq!(parse_modifier("one"), Ok(Modifier::One));
        assert_eq!(parse_modifier("delta_pow(0.25)"), Ok(Modifier::DeltaPow(0.25)));
        assert_eq!(parse_modifier(" inv_delta_pow( 0.5 )"), Ok(Modifier::InvDeltaPow(0.5)));
        assert!(parse_modifier("delta(1)").is_err());
    }
}
