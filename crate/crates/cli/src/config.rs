//! Run configuration: a single JSON file, validated up front.
//!
//! Every constraint of the downstream modules is checked at parse time and
//! reported with the dotted path of the offending field, so a bad
//! experiment file fails before any computation starts.

use serde::Serialize;
use serde_json::Value;
use std::fmt;
use std::fs;
use std::path::Path;

use tban::dynamics::{PotentialSet, UpdateMode};
use tban::montecarlo::{SweepParam, SweepSpec, DEFAULT_BATCHES};

/// Configuration failure; the message names the offending field path.
#[derive(Debug)]
pub struct ConfigError(String);

impl ConfigError {
    fn new(message: impl Into<String>) -> Self {
        ConfigError(message.into())
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

type Result<T> = std::result::Result<T, ConfigError>;

/// Fully resolved run configuration with every default filled in.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub width: u32,
    pub height: u32,
    pub potentials: PotentialSet,
    pub boundary: u8,
    pub mode: UpdateMode,
    pub burn_in: u64,
    pub samples: u64,
    pub thinning: u64,
    pub seed: u64,
    pub sweep: Option<SweepSpec>,
}

/// Reads and validates a configuration file.
pub fn load(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| ConfigError::new(format!("cannot read config {}: {e}", path.display())))?;
    parse(&text)
}

/// Parses and validates a configuration document.
pub fn parse(text: &str) -> Result<RunConfig> {
    let root: Value = serde_json::from_str(text)
        .map_err(|e| ConfigError::new(format!("config is not valid JSON: {e}")))?;
    if !root.is_object() {
        return Err(ConfigError::new("config root must be a JSON object"));
    }

    let width = require_dimension(&root, "lattice.width")?;
    let height = require_dimension(&root, "lattice.height")?;

    let t = require_f64(&root, "potentials.T")?;
    let k = require_u64(&root, "potentials.k")?;
    if !(2..=5).contains(&k) {
        return Err(ConfigError::new(format!(
            "potentials.k must lie in 2..=5 (got {k})"
        )));
    }
    let w = [
        require_f64(&root, "potentials.w0")?,
        require_f64(&root, "potentials.w1")?,
        optional_f64(&root, "potentials.w2", 0.0)?,
        optional_f64(&root, "potentials.w3", 0.0)?,
        optional_f64(&root, "potentials.w4", 0.0)?,
    ];
    let potentials = PotentialSet::new(t, k as u8, w).map_err(|e| match e {
        tban::Error::InvalidTemperature(v) => {
            ConfigError::new(format!("potentials.T must be a finite number > 0 (got {v})"))
        }
        tban::Error::NonFinitePotential { name, value } => {
            ConfigError::new(format!("potentials.{name} must be finite (got {value})"))
        }
        other => ConfigError::new(other.to_string()),
    })?;

    let boundary = optional_u64(&root, "boundary.value", 0)?;
    if boundary > 1 {
        return Err(ConfigError::new(format!(
            "boundary.value must be 0 or 1 (got {boundary})"
        )));
    }
    let boundary = boundary as u8;

    let mode = match optional_str(&root, "dynamics.mode", "synchronous")? {
        "synchronous" => UpdateMode::Synchronous,
        "asynchronous-uniform" => UpdateMode::AsynchronousUniform,
        other => {
            return Err(ConfigError::new(format!(
                "dynamics.mode must be \"synchronous\" or \"asynchronous-uniform\" (got {other:?})"
            )))
        }
    };
    let burn_in = optional_u64(&root, "dynamics.burn_in", 1000)?;
    let samples = optional_u64(&root, "dynamics.samples", 10_000)?;
    let thinning = optional_u64(&root, "dynamics.thinning", 1)?;
    let seed = optional_u64(&root, "dynamics.seed", 0)?;
    if thinning == 0 {
        return Err(ConfigError::new("dynamics.thinning must be >= 1"));
    }
    let min_samples = 10 * DEFAULT_BATCHES as u64;
    if samples < min_samples {
        return Err(ConfigError::new(format!(
            "dynamics.samples must be >= {min_samples} (got {samples})"
        )));
    }
    if samples / thinning < DEFAULT_BATCHES as u64 {
        return Err(ConfigError::new(format!(
            "dynamics.thinning {thinning} leaves fewer than {DEFAULT_BATCHES} records of {samples} samples"
        )));
    }

    let sweep = match root.get("sweep") {
        None | Some(Value::Null) => None,
        Some(_) => Some(parse_sweep(&root)?),
    };

    Ok(RunConfig {
        width,
        height,
        potentials,
        boundary,
        mode,
        burn_in,
        samples,
        thinning,
        seed,
        sweep,
    })
}

fn parse_sweep(root: &Value) -> Result<SweepSpec> {
    let param: SweepParam = require_str(root, "sweep.param")?
        .parse()
        .map_err(|e| ConfigError::new(format!("sweep.param: {e}")))?;
    let from = require_f64(root, "sweep.from")?;
    let to = require_f64(root, "sweep.to")?;
    let steps = require_u64(root, "sweep.steps")?;
    if steps < 2 {
        return Err(ConfigError::new(format!(
            "sweep.steps must be >= 2 (got {steps})"
        )));
    }
    if steps > u32::MAX as u64 {
        return Err(ConfigError::new("sweep.steps is out of range"));
    }
    if !from.is_finite() {
        return Err(ConfigError::new(format!("sweep.from must be finite (got {from})")));
    }
    if !to.is_finite() {
        return Err(ConfigError::new(format!("sweep.to must be finite (got {to})")));
    }
    if param == SweepParam::Temperature {
        if from <= 0.0 {
            return Err(ConfigError::new(format!(
                "sweep.from must be > 0 for temperature sweeps (got {from})"
            )));
        }
        if to <= 0.0 {
            return Err(ConfigError::new(format!(
                "sweep.to must be > 0 for temperature sweeps (got {to})"
            )));
        }
    }
    Ok(SweepSpec { param, from, to, steps: steps as u32 })
}

fn lookup<'a>(root: &'a Value, path: &str) -> Option<&'a Value> {
    let mut v = root;
    for part in path.split('.') {
        v = v.get(part)?;
    }
    Some(v)
}

fn require<'a>(root: &'a Value, path: &str) -> Result<&'a Value> {
    lookup(root, path).ok_or_else(|| ConfigError::new(format!("missing required field {path}")))
}

fn require_f64(root: &Value, path: &str) -> Result<f64> {
    require(root, path)?
        .as_f64()
        .ok_or_else(|| ConfigError::new(format!("field {path} must be a number")))
}

fn optional_f64(root: &Value, path: &str, default: f64) -> Result<f64> {
    match lookup(root, path) {
        None => Ok(default),
        Some(v) => v
            .as_f64()
            .ok_or_else(|| ConfigError::new(format!("field {path} must be a number"))),
    }
}

fn require_u64(root: &Value, path: &str) -> Result<u64> {
    require(root, path)?
        .as_u64()
        .ok_or_else(|| ConfigError::new(format!("field {path} must be a non-negative integer")))
}

fn optional_u64(root: &Value, path: &str, default: u64) -> Result<u64> {
    match lookup(root, path) {
        None => Ok(default),
        Some(v) => v
            .as_u64()
            .ok_or_else(|| ConfigError::new(format!("field {path} must be a non-negative integer"))),
    }
}

fn require_str<'a>(root: &'a Value, path: &str) -> Result<&'a str> {
    require(root, path)?
        .as_str()
        .ok_or_else(|| ConfigError::new(format!("field {path} must be a string")))
}

fn optional_str<'a>(root: &'a Value, path: &str, default: &'static str) -> Result<&'a str> {
    match lookup(root, path) {
        None => Ok(default),
        Some(v) => v
            .as_str()
            .ok_or_else(|| ConfigError::new(format!("field {path} must be a string"))),
    }
}

fn require_dimension(root: &Value, path: &str) -> Result<u32> {
    let raw = require_u64(root, path)?;
    if raw == 0 || raw > u32::MAX as u64 {
        return Err(ConfigError::new(format!(
            "field {path} must be a positive lattice dimension (got {raw})"
        )));
    }
    Ok(raw as u32)
}

#[derive(Serialize)]
struct EchoLattice {
    width: u32,
    height: u32,
}

#[derive(Serialize)]
struct EchoPotentials {
    #[serde(rename = "T")]
    temperature: f64,
    k: u8,
    w0: f64,
    w1: f64,
    w2: f64,
    w3: f64,
    w4: f64,
}

#[derive(Serialize)]
struct EchoBoundary {
    value: u8,
}

#[derive(Serialize)]
struct EchoDynamics {
    mode: UpdateMode,
    burn_in: u64,
    samples: u64,
    thinning: u64,
    seed: u64,
}

#[derive(Serialize)]
struct EchoSweep {
    param: SweepParam,
    from: f64,
    to: f64,
    steps: u32,
}

/// The configuration as actually used, with all defaults filled in, for
/// the audit echo on stderr.
#[derive(Serialize)]
pub struct ResolvedConfig {
    lattice: EchoLattice,
    potentials: EchoPotentials,
    boundary: EchoBoundary,
    dynamics: EchoDynamics,
    #[serde(skip_serializing_if = "Option::is_none")]
    sweep: Option<EchoSweep>,
}

impl RunConfig {
    pub fn resolved(&self) -> ResolvedConfig {
        ResolvedConfig {
            lattice: EchoLattice { width: self.width, height: self.height },
            potentials: EchoPotentials {
                temperature: self.potentials.temperature(),
                k: self.potentials.order(),
                w0: self.potentials.w(0),
                w1: self.potentials.w(1),
                w2: self.potentials.w(2),
                w3: self.potentials.w(3),
                w4: self.potentials.w(4),
            },
            boundary: EchoBoundary { value: self.boundary },
            dynamics: EchoDynamics {
                mode: self.mode,
                burn_in: self.burn_in,
                samples: self.samples,
                thinning: self.thinning,
                seed: self.seed,
            },
            sweep: self.sweep.as_ref().map(|s| EchoSweep {
                param: s.param,
                from: s.from,
                to: s.to,
                steps: s.steps,
            }),
        }
    }
}
