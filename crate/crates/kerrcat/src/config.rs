//! JSON run configuration.
//!
//! A run is described by a single JSON document with three top-level blocks —
//! `circuit`, `space`, `numerics` — plus an optional `experiment` block that
//! carries subcommand defaults (every one of which a CLI flag can override):
//!
//! ```json
//! {
//!   "circuit":  { "kpo1": { ... }, "kpo2": { ... }, "coupler": { ... }, ... },
//!   "space":    { "dims": [20, 20, 5], "convergence_check": false },
//!   "numerics": { "rel_tol": 1e-12, "abs_tol": 1e-14, "method": "adaptive" }
//! }
//! ```
//!
//! Unknown keys are rejected everywhere, `space`, `numerics` and `experiment`
//! fall back to their defaults when omitted, and all field names carry their
//! units. The bundled [`TABLE1_JSON`] document reproduces the published design
//! table's bold column exactly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::{Method, PropagationSpec};
use crate::fock::FockSpace;
use crate::gate::ScheduleMode;
use crate::params::CircuitDesign;

/// The bundled run configuration for the published design point.
pub const TABLE1_JSON: &str = include_str!("../data/table1.json");

/// Fock-space block: truncation dimensions plus the convergence-check flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    /// Truncation dimensions (d_1, d_2, d_c).
    #[serde(default = "default_dims")]
    pub dims: [usize; 3],
    /// When set, experiments re-run at enlarged dimensions
    /// (d_1+5, d_2+5, d_c+1) and report the shift of their headline number.
    #[serde(default)]
    pub convergence_check: bool,
}

impl Default for SpaceConfig {
    fn default() -> Self {
        SpaceConfig {
            dims: default_dims(),
            convergence_check: false,
        }
    }
}

fn default_dims() -> [usize; 3] {
    FockSpace::DEFAULT_DIMS
}

/// Integrator block of the configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsConfig {
    /// Relative local-error tolerance of the adaptive integrator.
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    /// Absolute local-error tolerance.
    #[serde(default = "default_abs_tol")]
    pub abs_tol: f64,
    /// `"adaptive"`, `"exponential"`, or `"rk4:<dt_ns>"`.
    #[serde(default = "default_method")]
    pub method: String,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        NumericsConfig {
            rel_tol: default_rel_tol(),
            abs_tol: default_abs_tol(),
            method: default_method(),
        }
    }
}

fn default_rel_tol() -> f64 {
    PropagationSpec::DEFAULT_REL_TOL
}

fn default_abs_tol() -> f64 {
    PropagationSpec::DEFAULT_ABS_TOL
}

fn default_method() -> String {
    "adaptive".into()
}

/// Optional experiment defaults; `None` means "use the built-in default".
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Gate duration in ns (default 25).
    pub t_g_ns: Option<f64>,
    /// Gate schedule: `"both"` (both detunings follow the degeneracy
    /// condition) or `"coupler-only"`.
    pub mode: Option<String>,
    /// Residual-experiment hold duration in ns (default 100).
    pub duration_ns: Option<f64>,
    /// Number of recorded samples in the residual experiment (default 200).
    pub samples: Option<usize>,
    /// ζ_ZZ sweep window for the coupler bias, φ̃_c^bias/2π (default ±4e-3).
    pub sweep_from_over_2pi: Option<f64>,
    pub sweep_to_over_2pi: Option<f64>,
    /// Number of sweep points (default 81).
    pub sweep_points: Option<usize>,
    /// Gate times visited by the gate sweep, in ns
    /// (default 15, 17.5, 20, 22.5, 25).
    pub gate_times_ns: Option<Vec<f64>>,
}

/// A fully parsed and validated run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub circuit: CircuitDesign,
    #[serde(default)]
    pub space: SpaceConfig,
    #[serde(default)]
    pub numerics: NumericsConfig,
    #[serde(default)]
    pub experiment: ExperimentConfig,
}

impl RunConfig {
    /// The bundled published-design configuration.
    pub fn table1() -> Self {
        Self::from_json(TABLE1_JSON).expect("bundled table1.json must parse")
    }

    /// Parse and validate a JSON document.
    pub fn from_json(text: &str) -> Result<Self> {
        let config: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Read and parse a configuration file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Serialize back to pretty JSON (the `echo-config` format); the output
    /// re-parses to an equal configuration.
    pub fn to_json_pretty(&self) -> String {
        let mut text =
            serde_json::to_string_pretty(self).expect("RunConfig serialization cannot fail");
        text.push('\n');
        text
    }

    /// Everything that makes a configuration unusable, reported as a config
    /// error regardless of which library type first objects.
    pub fn validate(&self) -> Result<()> {
        self.circuit.validate()?;
        self.space()?;
        if !(self.numerics.rel_tol.is_finite() && self.numerics.rel_tol > 0.0) {
            return Err(Error::Config(format!(
                "numerics.rel_tol must be positive and finite, got {}",
                self.numerics.rel_tol
            )));
        }
        if !(self.numerics.abs_tol.is_finite() && self.numerics.abs_tol > 0.0) {
            return Err(Error::Config(format!(
                "numerics.abs_tol must be positive and finite, got {}",
                self.numerics.abs_tol
            )));
        }
        self.method()?;
        let exp = &self.experiment;
        for (name, value) in [("t_g_ns", exp.t_g_ns), ("duration_ns", exp.duration_ns)] {
            if let Some(v) = value {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::Config(format!(
                        "experiment.{name} must be positive and finite, got {v}"
                    )));
                }
            }
        }
        if let Some(s) = exp.samples {
            if s < 2 {
                return Err(Error::Config(format!(
                    "experiment.samples must be at least 2, got {s}"
                )));
            }
        }
        if let Some(mode) = &exp.mode {
            parse_mode(mode)?;
        }
        for (name, value) in [
            ("sweep_from_over_2pi", exp.sweep_from_over_2pi),
            ("sweep_to_over_2pi", exp.sweep_to_over_2pi),
        ] {
            if let Some(v) = value {
                if !v.is_finite() {
                    return Err(Error::Config(format!(
                        "experiment.{name} must be finite, got {v}"
                    )));
                }
            }
        }
        if let Some(n) = exp.sweep_points {
            if n < 2 {
                return Err(Error::Config(format!(
                    "experiment.sweep_points must be at least 2, got {n}"
                )));
            }
        }
        if let Some(times) = &exp.gate_times_ns {
            if times.is_empty() {
                return Err(Error::Config(
                    "experiment.gate_times_ns must not be empty".into(),
                ));
            }
            if let Some(&bad) = times.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
                return Err(Error::Config(format!(
                    "experiment.gate_times_ns entries must be positive and finite, got {bad}"
                )));
            }
        }
        Ok(())
    }

    /// The configured Fock space.
    pub fn space(&self) -> Result<FockSpace> {
        let [d1, d2, dc] = self.space.dims;
        FockSpace::new(d1, d2, dc).map_err(|e| Error::Config(format!("space.dims: {e}")))
    }

    /// The configured space enlarged by (+5, +5, +1), as used by the
    /// convergence check.
    pub fn enlarged_space(&self) -> Result<FockSpace> {
        let [d1, d2, dc] = self.space.dims;
        FockSpace::new(d1 + 5, d2 + 5, dc + 1)
            .map_err(|e| Error::Config(format!("space.dims (enlarged): {e}")))
    }

    /// The configured integration method.
    pub fn method(&self) -> Result<Method> {
        parse_method(&self.numerics.method)
    }

    /// A propagation spec over `[t_start, t_end]` with the configured
    /// tolerances and method.
    pub fn propagation(&self, t_start_ns: f64, t_end_ns: f64) -> Result<PropagationSpec> {
        Ok(PropagationSpec::adaptive(t_start_ns, t_end_ns)
            .with_tolerances(self.numerics.rel_tol, self.numerics.abs_tol)
            .with_method(self.method()?))
    }

    pub fn gate_time_ns(&self) -> f64 {
        self.experiment.t_g_ns.unwrap_or(25.0)
    }

    pub fn gate_mode(&self) -> Result<ScheduleMode> {
        match &self.experiment.mode {
            Some(label) => parse_mode(label),
            None => Ok(ScheduleMode::BothTuned),
        }
    }

    pub fn duration_ns(&self) -> f64 {
        self.experiment.duration_ns.unwrap_or(100.0)
    }

    pub fn samples(&self) -> usize {
        self.experiment.samples.unwrap_or(200)
    }

    /// Sweep window in φ̃_c^bias/2π, low to high.
    pub fn sweep_window_over_2pi(&self) -> (f64, f64) {
        (
            self.experiment.sweep_from_over_2pi.unwrap_or(-4e-3),
            self.experiment.sweep_to_over_2pi.unwrap_or(4e-3),
        )
    }

    pub fn sweep_points(&self) -> usize {
        self.experiment.sweep_points.unwrap_or(81)
    }

    pub fn gate_times_ns(&self) -> Vec<f64> {
        self.experiment
            .gate_times_ns
            .clone()
            .unwrap_or_else(|| vec![15.0, 17.5, 20.0, 22.5, 25.0])
    }
}

/// Parse a gate-mode label (`"both"` and its long form `"both-tuned"`, or
/// `"coupler-only"`).
pub fn parse_mode(label: &str) -> Result<ScheduleMode> {
    match label {
        "both" | "both-tuned" => Ok(ScheduleMode::BothTuned),
        "coupler-only" => Ok(ScheduleMode::CouplerOnly),
        other => Err(Error::Config(format!(
            "unknown gate mode '{other}' (expected both or coupler-only)"
        ))),
    }
}

/// Parse a method string: `"adaptive"`, `"exponential"`, or `"rk4:<dt_ns>"`.
pub fn parse_method(text: &str) -> Result<Method> {
    match text {
        "adaptive" => Ok(Method::AdaptiveEmbeddedRk),
        "exponential" => Ok(Method::StaticExponential),
        other => other
            .strip_prefix("rk4:")
            .and_then(|dt| dt.parse::<f64>().ok())
            .filter(|dt| dt.is_finite() && *dt > 0.0)
            .map(|dt_ns| Method::FixedStepRk4 { dt_ns })
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown method '{other}' (expected adaptive, exponential, or rk4:<dt_ns>)"
                ))
            }),
    }
}
