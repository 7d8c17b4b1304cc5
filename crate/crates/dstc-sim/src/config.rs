//! Experiment configuration: plain-text `key=value` files plus CLI flag
//! overrides, with an `a:b:c` range grammar for grids.
//!
//! Files are line oriented: blank lines and lines starting with `#` are
//! skipped, everything else must be `key=value`. Flag overrides are applied
//! after the file, so flags win. Unknown keys are rejected with the
//! offending line number.

use std::path::PathBuf;

use thiserror::Error;

use crate::capacity::Scenario;
use crate::modulation::ModulationName;
use crate::stc::CodeName;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{} unknown key `{key}` (valid keys: {valid})", location(*.line))]
    UnknownKey {
        key: String,
        line: Option<usize>,
        valid: &'static str,
    },
    #[error("{} invalid value `{value}` for `{key}`: {detail}", location(*.line))]
    InvalidValue {
        key: String,
        value: String,
        line: Option<usize>,
        detail: String,
    },
    #[error("line {line}: expected `key=value`, got `{text}`")]
    Malformed { line: usize, text: String },
    #[error("mode `{mode}` requires `{key}`")]
    MissingKey { mode: String, key: String },
    #[error("missing required key `mode`")]
    MissingMode,
}

fn location(line: Option<usize>) -> String {
    match line {
        Some(n) => format!("line {n}:"),
        None => "flag:".to_string(),
    }
}

/// Experiment front-end mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    CapacitySweep,
    BerSnrSweep,
    BerImbalanceSweep,
    Validate,
}

impl Mode {
    pub fn token(self) -> &'static str {
        match self {
            Mode::CapacitySweep => "capacity-sweep",
            Mode::BerSnrSweep => "ber-snr-sweep",
            Mode::BerImbalanceSweep => "ber-imbalance-sweep",
            Mode::Validate => "validate",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [
            Mode::CapacitySweep,
            Mode::BerSnrSweep,
            Mode::BerImbalanceSweep,
            Mode::Validate,
        ]
        .into_iter()
        .find(|m| m.token() == s)
    }
}

/// Which capacity scenarios a sweep covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioSelection {
    All,
    One(Scenario),
}

impl ScenarioSelection {
    pub fn scenarios(self) -> Vec<Scenario> {
        match self {
            ScenarioSelection::All => Scenario::all().to_vec(),
            ScenarioSelection::One(s) => vec![s],
        }
    }
}

/// Fully resolved experiment configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub code: Option<CodeName>,
    pub constellation: Option<ModulationName>,
    pub snr_grid_db: Vec<f64>,
    pub imbalance_grid_db: Vec<f64>,
    pub positions_km: Vec<f64>,
    pub scenario: ScenarioSelection,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub workers: Option<usize>,
    pub n_realizations: usize,
    pub min_bit_errors: u64,
    pub max_codewords: u64,
    pub pathloss_exponent: f64,
    pub separation_km: f64,
    pub total_power_w: f64,
    pub min_distance_km: f64,
    /// Explicit noise floor; None calibrates it from `sfn_target_bits`.
    pub noise_variance: Option<f64>,
    pub sfn_target_bits: f64,
    /// Working SNR for the imbalance sweep; None picks it from `target_ber`.
    pub fixed_snr_db: Option<f64>,
    pub target_ber: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mode: Mode::Validate,
            code: None,
            constellation: None,
            snr_grid_db: Vec::new(),
            imbalance_grid_db: Vec::new(),
            positions_km: Vec::new(),
            scenario: ScenarioSelection::All,
            seed: 42,
            out_dir: PathBuf::from("out"),
            workers: None,
            n_realizations: 20_000,
            min_bit_errors: 400,
            max_codewords: 10_000_000,
            pathloss_exponent: 3.5,
            separation_km: 10.0,
            total_power_w: 10_000.0,
            min_distance_km: 0.1,
            noise_variance: None,
            sfn_target_bits: 1.5,
            fixed_snr_db: None,
            target_ber: 1e-3,
        }
    }
}

const VALID_KEYS: &str = "mode, code, constellation, snr, imbalance, positions, scenario, seed, \
                          out, workers, realizations, min-bit-errors, max-codewords, \
                          pathloss-exponent, separation-km, total-power-w, min-distance-km, \
                          noise-variance, sfn-target-bits, snr-fixed, target-ber";

/// Parses a grid token: a single number, a comma list, or `start:step:end`
/// (inclusive). Grids must come out strictly ascending.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, String> {
    let s = s.trim();
    if s.is_empty() {
        return Err("empty grid".into());
    }
    let values: Vec<f64> = if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("range must be start:step:end, got `{s}`"));
        }
        let start: f64 = parts[0].trim().parse().map_err(|_| format!("bad number `{}`", parts[0]))?;
        let step: f64 = parts[1].trim().parse().map_err(|_| format!("bad number `{}`", parts[1]))?;
        let end: f64 = parts[2].trim().parse().map_err(|_| format!("bad number `{}`", parts[2]))?;
        if !start.is_finite() || !step.is_finite() || !end.is_finite() {
            return Err("range bounds must be finite".into());
        }
        if step <= 0.0 {
            return Err(format!("range step must be > 0, got {step}"));
        }
        if end < start {
            return Err(format!("range end {end} below start {start}"));
        }
        let count = ((end - start) / step + 1e-9).floor() as usize + 1;
        if count > 100_000 {
            return Err(format!("range produces {count} points; cap is 100000"));
        }
        (0..count).map(|i| start + step * i as f64).collect()
    } else {
        s.split(',')
            .map(|tok| {
                let tok = tok.trim();
                tok.parse::<f64>().map_err(|_| format!("bad number `{tok}`"))
            })
            .collect::<Result<Vec<f64>, String>>()?
    };
    if values.iter().any(|v| !v.is_finite()) {
        return Err("grid values must be finite".into());
    }
    if !values.windows(2).all(|w| w[0] < w[1]) {
        return Err("grid must be strictly ascending".into());
    }
    Ok(values)
}

/// Parses config text plus `(key, value)` flag overrides into a validated
/// [`ExperimentConfig`]. Overrides are applied after the file, so they win.
pub fn parse_config(
    text: &str,
    overrides: &[(String, String)],
) -> Result<ExperimentConfig, ConfigError> {
    let mut entries: Vec<(String, String, Option<usize>)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) => entries.push((k.trim().to_string(), v.trim().to_string(), Some(line_no))),
            None => {
                return Err(ConfigError::Malformed {
                    line: line_no,
                    text: line.to_string(),
                })
            }
        }
    }
    for (k, v) in overrides {
        entries.push((k.clone(), v.clone(), None));
    }

    let mut cfg = ExperimentConfig::default();
    let mut mode_set = false;

    for (key, value, line) in &entries {
        let line = *line;
        let invalid = |detail: String| ConfigError::InvalidValue {
            key: key.clone(),
            value: value.clone(),
            line,
            detail,
        };
        match key.as_str() {
            "mode" => {
                cfg.mode = Mode::parse(value).ok_or_else(|| {
                    invalid("valid modes: capacity-sweep, ber-snr-sweep, ber-imbalance-sweep, validate".into())
                })?;
                mode_set = true;
            }
            "code" => {
                cfg.code = Some(CodeName::parse_token(value).map_err(|e| invalid(e.to_string()))?)
            }
            "constellation" => {
                cfg.constellation =
                    Some(ModulationName::parse_token(value).map_err(|e| invalid(e.to_string()))?)
            }
            "snr" => cfg.snr_grid_db = parse_grid(value).map_err(invalid)?,
            "imbalance" => cfg.imbalance_grid_db = parse_grid(value).map_err(invalid)?,
            "positions" => cfg.positions_km = parse_grid(value).map_err(invalid)?,
            "scenario" => {
                cfg.scenario = if value == "all" {
                    ScenarioSelection::All
                } else {
                    ScenarioSelection::One(
                        Scenario::parse_token(value).map_err(|e| invalid(e.to_string()))?,
                    )
                }
            }
            "seed" => cfg.seed = value.parse().map_err(|_| invalid("expected a u64".into()))?,
            "out" => cfg.out_dir = PathBuf::from(value),
            "workers" => {
                let n: usize = value.parse().map_err(|_| invalid("expected a positive integer".into()))?;
                if n == 0 {
                    return Err(invalid("worker count must be >= 1".into()));
                }
                cfg.workers = Some(n);
            }
            "realizations" => {
                cfg.n_realizations = value.parse().map_err(|_| invalid("expected a positive integer".into()))?;
                if cfg.n_realizations == 0 {
                    return Err(invalid("realization count must be >= 1".into()));
                }
            }
            "min-bit-errors" => {
                cfg.min_bit_errors = value.parse().map_err(|_| invalid("expected a u64".into()))?
            }
            "max-codewords" => {
                cfg.max_codewords = value.parse().map_err(|_| invalid("expected a u64".into()))?
            }
            "pathloss-exponent" => {
                cfg.pathloss_exponent = parse_positive(value).map_err(invalid)?
            }
            "separation-km" => cfg.separation_km = parse_positive(value).map_err(invalid)?,
            "total-power-w" => cfg.total_power_w = parse_positive(value).map_err(invalid)?,
            "min-distance-km" => cfg.min_distance_km = parse_positive(value).map_err(invalid)?,
            "noise-variance" => {
                cfg.noise_variance = Some(parse_positive(value).map_err(invalid)?)
            }
            "sfn-target-bits" => cfg.sfn_target_bits = parse_positive(value).map_err(invalid)?,
            "snr-fixed" => {
                cfg.fixed_snr_db =
                    Some(value.parse().map_err(|_| invalid("expected a number".into()))?)
            }
            "target-ber" => {
                let t: f64 = value.parse().map_err(|_| invalid("expected a number".into()))?;
                if !(t > 0.0 && t < 0.5) {
                    return Err(invalid("target BER must be in (0, 0.5)".into()));
                }
                cfg.target_ber = t;
            }
            _ => {
                return Err(ConfigError::UnknownKey {
                    key: key.clone(),
                    line,
                    valid: VALID_KEYS,
                })
            }
        }
    }

    if !mode_set {
        return Err(ConfigError::MissingMode);
    }
    validate_mode_requirements(&cfg)?;
    Ok(cfg)
}

fn parse_positive(value: &str) -> Result<f64, String> {
    let v: f64 = value.parse().map_err(|_| "expected a number".to_string())?;
    if !(v > 0.0) || !v.is_finite() {
        return Err(format!("must be positive and finite, got {v}"));
    }
    Ok(v)
}

fn validate_mode_requirements(cfg: &ExperimentConfig) -> Result<(), ConfigError> {
    let missing = |key: &str| ConfigError::MissingKey {
        mode: cfg.mode.token().to_string(),
        key: key.to_string(),
    };
    match cfg.mode {
        Mode::BerSnrSweep => {
            if cfg.code.is_none() {
                return Err(missing("code"));
            }
            if cfg.constellation.is_none() {
                return Err(missing("constellation"));
            }
            if cfg.snr_grid_db.is_empty() {
                return Err(missing("snr"));
            }
        }
        Mode::BerImbalanceSweep => {
            if cfg.code.is_none() {
                return Err(missing("code"));
            }
            if cfg.constellation.is_none() {
                return Err(missing("constellation"));
            }
            if cfg.imbalance_grid_db.is_empty() {
                return Err(missing("imbalance"));
            }
        }
        Mode::CapacitySweep => {
            if cfg.positions_km.is_empty() {
                return Err(missing("positions"));
            }
            for &p in &cfg.positions_km {
                if p < 0.0 || p > cfg.separation_km {
                    return Err(ConfigError::InvalidValue {
                        key: "positions".into(),
                        value: format!("{p}"),
                        line: None,
                        detail: format!("positions must lie in [0, {}]", cfg.separation_km),
                    });
                }
            }
        }
        Mode::Validate => {}
    }
    Ok(())
}
