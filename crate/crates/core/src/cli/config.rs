use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::acoustics::DEFAULT_AIR_ABSORPTION_DB_PER_M;
use crate::attack::AttackConfig;
use crate::error::{Error, Result};
use crate::field::{ElementModel, ObstructionMask, ARRAY_RANGE_M};
use crate::signals::{NonlinearCoeffs, DEFAULT_CARRIER_HZ, DEFAULT_SAMPLE_RATE_HZ};

/// Prefix of environment variables that override config keys, e.g.
/// `ULTRAINJECT_ATTACK__ANGLE_STEP_DEG=6` or `ULTRAINJECT_SEED=3`.
pub const ENV_PREFIX: &str = "ULTRAINJECT_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SignalsConfig {
    pub sample_rate_hz: u32,
    pub carrier_hz: f64,
    pub depth: f64,
    pub cutoff_hz: f64,
    pub mic: NonlinearCoeffs,
}

impl Default for SignalsConfig {
    fn default() -> Self {
        Self {
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            carrier_hz: DEFAULT_CARRIER_HZ,
            depth: 1.0,
            cutoff_hz: 4000.0,
            mic: NonlinearCoeffs::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AcousticsConfig {
    /// SPL of a full-scale sine at the housing (dB).
    pub source_spl_ref_db: f64,
    pub air_absorption_db_per_m: f64,
}

impl Default for AcousticsConfig {
    fn default() -> Self {
        Self {
            source_spl_ref_db: 60.0,
            air_absorption_db_per_m: DEFAULT_AIR_ABSORPTION_DB_PER_M,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldConfig {
    pub frequency_hz: f64,
    pub range_m: f64,
    pub element_model: ElementModel,
    pub mask: ObstructionMask,
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self {
            frequency_hz: DEFAULT_CARRIER_HZ,
            range_m: ARRAY_RANGE_M,
            element_model: ElementModel::Monopole,
            mask: ObstructionMask::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub trials: u64,
    pub distance_step_m: f64,
    pub max_distance_m: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            trials: 200,
            distance_step_m: 0.25,
            max_distance_m: 12.0,
        }
    }
}

impl SimConfig {
    pub fn distance_grid(&self) -> Vec<f64> {
        let n = (self.max_distance_m / self.distance_step_m + 1e-9).floor() as usize;
        (1..=n).map(|i| i as f64 * self.distance_step_m).collect()
    }
}

/// Everything a run can be configured with.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub verbosity: u8,
    pub signals: SignalsConfig,
    pub acoustics: AcousticsConfig,
    pub field: FieldConfig,
    pub attack: AttackConfig,
    pub sim: SimConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let s = &self.signals;
        if s.sample_rate_hz == 0 {
            return Err(Error::param("signals.sample_rate_hz", "must be positive"));
        }
        if !(s.carrier_hz > 0.0 && s.carrier_hz < s.sample_rate_hz as f64 / 2.0) {
            return Err(Error::param("signals.carrier_hz", "must lie below Nyquist"));
        }
        if !(s.depth > 0.0 && s.depth <= 1.0) {
            return Err(Error::param("signals.depth", "must be in (0, 1]"));
        }
        if !(s.cutoff_hz > 0.0) {
            return Err(Error::param("signals.cutoff_hz", "must be positive"));
        }
        s.mic.validate()?;
        if !self.acoustics.source_spl_ref_db.is_finite() {
            return Err(Error::param("acoustics.source_spl_ref_db", "must be finite"));
        }
        if !(self.acoustics.air_absorption_db_per_m >= 0.0) {
            return Err(Error::param(
                "acoustics.air_absorption_db_per_m",
                "must be non-negative",
            ));
        }
        if !(self.field.frequency_hz > 0.0) {
            return Err(Error::param("field.frequency_hz", "must be positive"));
        }
        if !(self.field.range_m > 0.0) {
            return Err(Error::param("field.range_m", "must be positive"));
        }
        self.field.mask.validate()?;
        self.attack.validate()?;
        if self.sim.trials < 30 {
            return Err(Error::param("sim.trials", "need at least 30"));
        }
        if !(self.sim.distance_step_m > 0.0 && self.sim.max_distance_m >= self.sim.distance_step_m) {
            return Err(Error::param("sim.distance_step_m", "need 0 < step ≤ max_distance_m"));
        }
        Ok(())
    }

    /// Flattened `(dotted.key, default)` pairs, for help text.
    pub fn documented_keys() -> Vec<(String, String)> {
        let v = serde_json::to_value(RunConfig::default()).expect("config serializes");
        let mut out = Vec::new();
        flatten("", &v, &mut out);
        out
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, child, out);
            }
        }
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

/// Unit implied by a key's suffix.
pub fn unit_of(key: &str) -> &'static str {
    let last = key.rsplit('.').next().unwrap_or(key);
    match last {
        "ramp_window" => return "scans",
        "delta_db_threshold" => return "dB",
        _ => {}
    }
    for (suffix, unit) in [
        ("_hz", "Hz"),
        ("_deg", "degrees"),
        ("_db_per_m", "dB/m"),
        ("_db_per_db", "dB/dB"),
        ("_dbm", "dBm"),
        ("_db", "dB"),
        ("_m", "m"),
        ("_s", "s"),
    ] {
        if last.ends_with(suffix) {
            return unit;
        }
    }
    ""
}

/// Reads `path` (or starts from defaults), applies `ULTRAINJECT_*`
/// overrides from the process environment and validates.
pub fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    load_config_with_env(path, std::env::vars())
}

/// As [`load_config`] with an explicit variable list. A variable
/// `ULTRAINJECT_A__B` sets key `a.b`; its value is parsed as JSON, falling
/// back to a plain string.
pub fn load_config_with_env(
    path: Option<&Path>,
    vars: impl IntoIterator<Item = (String, String)>,
) -> Result<RunConfig> {
    let label = path.map_or_else(|| "<defaults>".to_string(), |p| p.display().to_string());
    let text = match path {
        Some(p) => Some(std::fs::read_to_string(p).map_err(|e| Error::Config {
            path: label.clone(),
            message: e.to_string(),
        })?),
        None => None,
    };
    let mut doc = match &text {
        Some(t) => serde_json::from_str::<Value>(t).map_err(|e| Error::Config {
            path: label.clone(),
            message: e.to_string(),
        })?,
        None => Value::Object(Default::default()),
    };
    if !doc.is_object() {
        return Err(Error::Config {
            path: label,
            message: "top level must be an object".into(),
        });
    }
    let mut vars: Vec<(String, String)> = vars.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
    vars.sort();
    let overridden = !vars.is_empty();
    for (name, raw) in vars {
        let key: Vec<String> = name[ENV_PREFIX.len()..].split("__").map(str::to_lowercase).collect();
        if key.iter().any(String::is_empty) {
            return Err(Error::Config {
                path: name,
                message: "malformed override name".into(),
            });
        }
        let value = serde_json::from_str(&raw).unwrap_or(Value::String(raw));
        set_path(&mut doc, &key, value).map_err(|message| Error::Config {
            path: name.clone(),
            message,
        })?;
    }
    let describe = |field: String, e: String| Error::Config {
        path: label.clone(),
        message: format!("field `{field}`: {e}"),
    };
    // Parsing the original text keeps line numbers in the diagnostic.
    let cfg: RunConfig = match text {
        Some(t) if !overridden => {
            let mut de = serde_json::Deserializer::from_str(&t);
            serde_path_to_error::deserialize(&mut de)
                .map_err(|e| describe(e.path().to_string(), e.into_inner().to_string()))?
        }
        _ => serde_path_to_error::deserialize(doc)
            .map_err(|e| describe(e.path().to_string(), e.into_inner().to_string()))?,
    };
    cfg.validate().map_err(|e| Error::Config {
        path: label,
        message: e.to_string(),
    })?;
    Ok(cfg)
}

fn set_path(doc: &mut Value, key: &[String], value: Value) -> std::result::Result<(), String> {
    let mut cur = doc;
    for (i, part) in key.iter().enumerate() {
        let map = cur
            .as_object_mut()
            .ok_or_else(|| format!("`{}` is not an object", key[..i].join(".")))?;
        if i + 1 == key.len() {
            map.insert(part.clone(), value);
            return Ok(());
        }
        cur = map
            .entry(part.clone())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}
