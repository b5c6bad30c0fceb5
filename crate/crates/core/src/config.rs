//! Run configuration: presets, flat `key = value` files, JSON replay and
//! per-key overrides.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use std::path::Path;
use thiserror::Error;

use crate::delay::DistanceBand;
use crate::experiments::reference_critical_density;
use crate::geometry::BoxRegion;
use crate::pointprocess::SimulationParams;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("invalid value for `{field}`: {reason}")]
    Field { field: String, reason: String },
    #[error("unknown preset `{0}` (expected fig5a, fig5b, fig5c, fig5d or critical)")]
    UnknownPreset(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl ConfigError {
    fn field(field: &str, reason: impl Into<String>) -> Self {
        ConfigError::Field {
            field: field.to_string(),
            reason: reason.into(),
        }
    }
}

/// Everything a run needs besides the worker count and output directory.
/// Lengths are in km, densities in km⁻², times in s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub secondary_density: f64,
    pub primary_density: f64,
    pub secondary_range: f64,
    pub secondary_interference_range: f64,
    pub primary_range: f64,
    pub primary_interference_range: f64,
    pub slot_length: f64,
    pub propagation_delay: f64,
    /// Observation window is `[-window_half, window_half]²` before scaling.
    pub window_half: f64,
    pub seed: u64,
    /// Shrinks the window, distance bands and crossing windows.
    pub scale: f64,
    pub horizon: u64,
    pub sources: u64,
    /// Band edges; consecutive pairs form half-open bands.
    pub bands: Vec<f64>,
    pub phase_secondary: Vec<f64>,
    pub phase_primary: Vec<f64>,
    pub phase_trials: u64,
    /// Defaults to the reference critical density for `secondary_range`.
    pub critical_density: Option<f64>,
    pub critical_windows: Vec<f64>,
    pub critical_densities: Vec<f64>,
    pub critical_trials: u64,
    pub tail_h: Vec<f64>,
    pub tail_trials: u64,
    pub hop_length: f64,
    pub hop_trials: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::from_params(SimulationParams::reference(10.0, 0.0))
    }
}

impl RunConfig {
    fn from_params(p: SimulationParams) -> Self {
        let r = p.secondary_range;
        Self {
            secondary_density: p.secondary_density,
            primary_density: p.primary_density,
            secondary_range: p.secondary_range,
            secondary_interference_range: p.secondary_interference_range,
            primary_range: p.primary_range,
            primary_interference_range: p.primary_interference_range,
            slot_length: p.slot_length,
            propagation_delay: p.propagation_delay,
            window_half: 5.0,
            seed: 1,
            scale: 1.0,
            horizon: crate::delay::DEFAULT_HORIZON_SLOTS,
            sources: 4,
            bands: vec![0.5, 1.0, 2.0, 3.0, 4.0, 5.0],
            phase_secondary: vec![400.0, 500.0, 600.0, 700.0, 800.0, 1000.0],
            phase_primary: vec![0.0, 5.0, 10.0, 20.0, 30.0, 50.0],
            phase_trials: 50,
            critical_density: None,
            critical_windows: vec![2.0, 4.0],
            critical_densities: (0..12).map(|i| 400.0 + 400.0 * i as f64 / 11.0).collect(),
            critical_trials: 200,
            tail_h: [2.0, 4.0, 6.0, 8.0, 10.0].iter().map(|k| k * r).collect(),
            tail_trials: 500,
            hop_length: r,
            hop_trials: 10_000,
        }
    }

    /// `fig5a`..`fig5d` are the reference scenario with
    /// `λ_PT ∈ {10, 50}` and `τ ∈ {0, 0.01}`; `critical` has no primaries.
    pub fn preset(name: &str) -> Result<Self, ConfigError> {
        let (lambda_pt, tau) = match name {
            "fig5a" => (10.0, 0.0),
            "fig5b" => (50.0, 0.0),
            "fig5c" => (10.0, 0.01),
            "fig5d" => (50.0, 0.01),
            "critical" => (0.0, 0.0),
            _ => return Err(ConfigError::UnknownPreset(name.to_string())),
        };
        Ok(Self::from_params(SimulationParams::reference(
            lambda_pt, tau,
        )))
    }

    pub fn params(&self) -> SimulationParams {
        SimulationParams {
            secondary_density: self.secondary_density,
            primary_density: self.primary_density,
            secondary_range: self.secondary_range,
            secondary_interference_range: self.secondary_interference_range,
            primary_range: self.primary_range,
            primary_interference_range: self.primary_interference_range,
            slot_length: self.slot_length,
            propagation_delay: self.propagation_delay,
        }
    }

    pub fn region(&self) -> BoxRegion {
        BoxRegion::centered_square(self.window_half * self.scale).expect("validated window")
    }

    pub fn distance_bands(&self) -> Vec<DistanceBand> {
        self.bands
            .windows(2)
            .map(|w| DistanceBand {
                lo: w[0] * self.scale,
                hi: w[1] * self.scale,
            })
            .collect()
    }

    pub fn scaled_critical_windows(&self) -> Vec<f64> {
        self.critical_windows
            .iter()
            .map(|w| w * self.scale)
            .collect()
    }

    pub fn effective_critical_density(&self) -> f64 {
        self.critical_density
            .unwrap_or_else(|| reference_critical_density(self.secondary_range))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.params()
            .validate()
            .map_err(|e| ConfigError::field(e.field(), e.to_string()))?;
        if !(self.secondary_density > 0.0) {
            return Err(ConfigError::field("secondary_density", "must be positive"));
        }
        let positive = [
            ("window_half", self.window_half),
            ("scale", self.scale),
            ("hop_length", self.hop_length),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(ConfigError::field(
                    field,
                    format!("must be positive, got {v}"),
                ));
            }
        }
        let counts = [
            ("horizon", self.horizon),
            ("sources", self.sources),
            ("phase_trials", self.phase_trials),
            ("critical_trials", self.critical_trials),
            ("tail_trials", self.tail_trials),
            ("hop_trials", self.hop_trials),
        ];
        for (field, v) in counts {
            if v == 0 {
                return Err(ConfigError::field(field, "must be at least 1"));
            }
        }
        let increasing = [
            ("bands", &self.bands, 2),
            ("critical_windows", &self.critical_windows, 2),
            ("critical_densities", &self.critical_densities, 2),
            ("tail_h", &self.tail_h, 1),
        ];
        for (field, v, min_len) in increasing {
            if v.len() < min_len {
                return Err(ConfigError::field(
                    field,
                    format!("needs at least {min_len} values"),
                ));
            }
            if v.iter().any(|x| !x.is_finite() || *x < 0.0) || v.windows(2).any(|w| w[1] <= w[0]) {
                return Err(ConfigError::field(
                    field,
                    "values must be non-negative and strictly increasing",
                ));
            }
        }
        for (field, v) in [
            ("phase_secondary", &self.phase_secondary),
            ("phase_primary", &self.phase_primary),
        ] {
            if v.is_empty() || v.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(ConfigError::field(field, "needs non-negative values"));
            }
        }
        if let Some(c) = self.critical_density {
            if !(c.is_finite() && c > 0.0) {
                return Err(ConfigError::field("critical_density", "must be positive"));
            }
        }
        if self.hop_length > self.secondary_range {
            return Err(ConfigError::field(
                "hop_length",
                "must not exceed secondary_range",
            ));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// Applies `key -> value` overrides; each key is checked on its own so
    /// errors name the offending field.
    pub fn apply(&mut self, overrides: &Map<String, Value>) -> Result<(), ConfigError> {
        let base = self.to_json();
        let Value::Object(mut merged) = base.clone() else {
            unreachable!("config is an object")
        };
        for (key, value) in overrides {
            let Some(current) = merged.get(key) else {
                return Err(ConfigError::UnknownKey(key.clone()));
            };
            let value = if current.is_array() && value.is_number() {
                &Value::Array(vec![value.clone()])
            } else {
                value
            };
            let mut single = base.as_object().expect("object").clone();
            single.insert(key.clone(), value.clone());
            serde_json::from_value::<RunConfig>(Value::Object(single))
                .map_err(|e| ConfigError::field(key, e.to_string()))?;
            merged.insert(key.clone(), value.clone());
        }
        *self = serde_json::from_value(Value::Object(merged))
            .map_err(|e| ConfigError::field("config", e.to_string()))?;
        Ok(())
    }

    pub fn set(&mut self, key: &str, raw: &str) -> Result<(), ConfigError> {
        let mut m = Map::new();
        m.insert(key.to_string(), parse_value(raw));
        self.apply(&m)
    }
}

/// A flat-file value: JSON literal, bare float, comma-separated floats,
/// `none`, or else a string.
pub fn parse_value(raw: &str) -> Value {
    let s = raw.trim();
    if s.eq_ignore_ascii_case("none") || s.is_empty() {
        return Value::Null;
    }
    if let Ok(v) = serde_json::from_str::<Value>(s) {
        return v;
    }
    let number = |t: &str| {
        t.trim()
            .parse::<f64>()
            .ok()
            .and_then(serde_json::Number::from_f64)
    };
    if let Some(n) = number(s) {
        return Value::Number(n);
    }
    if s.contains(',') {
        let items: Option<Vec<Value>> =
            s.split(',').map(|t| number(t).map(Value::Number)).collect();
        if let Some(items) = items {
            return Value::Array(items);
        }
    }
    Value::String(s.to_string())
}

/// Parses overrides from either a flat `key = value` file (`#` comments)
/// or a JSON document; a JSON summary is read through its `config` object.
pub fn parse_overrides(text: &str) -> Result<Map<String, Value>, ConfigError> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('{') {
        let v: Value = serde_json::from_str(trimmed).map_err(|e| ConfigError::Syntax {
            line: e.line(),
            message: e.to_string(),
        })?;
        let obj = match v {
            Value::Object(mut o) => match o.remove("config") {
                Some(Value::Object(c)) => c,
                Some(_) => {
                    return Err(ConfigError::Syntax {
                        line: 1,
                        message: "`config` must be an object".into(),
                    })
                }
                None => o,
            },
            _ => {
                return Err(ConfigError::Syntax {
                    line: 1,
                    message: "expected a JSON object".into(),
                })
            }
        };
        return Ok(obj);
    }
    let mut out = Map::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(ConfigError::Syntax {
                line: i + 1,
                message: format!("expected `key = value`, got `{line}`"),
            });
        };
        out.insert(k.trim().to_string(), parse_value(v));
    }
    Ok(out)
}

pub fn load_overrides(path: &Path) -> Result<Map<String, Value>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_overrides(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_match_reference() {
        let a = RunConfig::preset("fig5a").unwrap();
        let d = RunConfig::preset("fig5d").unwrap();
        assert_eq!(a.params(), SimulationParams::reference(10.0, 0.0));
        assert_eq!(d.params(), SimulationParams::reference(50.0, 0.01));
        assert!(RunConfig::preset("fig6").is_err());
        a.validate().unwrap();
    }

    #[test]
    fn flat_file_round_trip() {
        let text = "# comment\nsecondary_density = 650\nbands = 0.5,1,2\ncritical_density = none\nseed=9\n";
        let mut c = RunConfig::default();
        c.apply(&parse_overrides(text).unwrap()).unwrap();
        assert_eq!(c.secondary_density, 650.0);
        assert_eq!(c.bands, vec![0.5, 1.0, 2.0]);
        assert_eq!(c.seed, 9);
        let mut d = RunConfig::default();
        d.apply(&parse_overrides(&serde_json::json!({"config": c.to_json()}).to_string()).unwrap())
            .unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn unknown_and_bad_keys_named() {
        let mut c = RunConfig::default();
        let e = c.set("lambda", "3").unwrap_err();
        assert!(e.to_string().contains("lambda"));
        let e = c.set("horizon", "abc").unwrap_err();
        assert!(e.to_string().contains("horizon"));
        c.set("secondary_density", "0").unwrap();
        let e = c.validate().unwrap_err();
        assert!(e.to_string().contains("secondary_density"), "{e}");
    }

    #[test]
    fn scale_shrinks_window_and_bands() {
        let mut c = RunConfig::preset("fig5b").unwrap();
        c.scale = 0.5;
        assert_eq!(c.region().x_max, 2.5);
        assert_eq!(c.distance_bands().last().unwrap().hi, 2.5);
        assert_eq!(c.params().secondary_density, 700.0);
    }

    #[test]
    fn syntax_error_reports_line() {
        let e = parse_overrides("seed = 1\nnonsense\n").unwrap_err();
        assert!(e.to_string().starts_with("line 2"));
    }
}
