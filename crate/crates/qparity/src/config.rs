//! Run configuration shared by the protocol runner, the ensemble harness and
//! the command line. Configs can be parsed from flat `key=value` files; flags
//! override file values.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Measurement {
    Half,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    PH,
    PF,
    None,
    HillRalph,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    LuReset,
    Hamiltonian,
}

impl Measurement {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "half" => Ok(Self::Half),
            "full" => Ok(Self::Full),
            other => Err(Error::Config(format!("unknown measurement '{other}'"))),
        }
    }
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Half => "half",
            Self::Full => "full",
        }
    }
}

impl Protocol {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "p_h" | "ph" => Ok(Self::PH),
            "p_f" | "pf" => Ok(Self::PF),
            "none" => Ok(Self::None),
            "hill_ralph" | "hill-ralph" => Ok(Self::HillRalph),
            other => Err(Error::Config(format!("unknown protocol '{other}'"))),
        }
    }
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::PH => "p_h",
            Self::PF => "p_f",
            Self::None => "none",
            Self::HillRalph => "hill_ralph",
        }
    }
}

impl Mode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "lu_reset" | "lu-reset" => Ok(Self::LuReset),
            "hamiltonian" => Ok(Self::Hamiltonian),
            other => Err(Error::Config(format!("unknown mode '{other}'"))),
        }
    }
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::LuReset => "lu_reset",
            Self::Hamiltonian => "hamiltonian",
        }
    }
}

/// Full simulation configuration. Serialized into every output file so runs
/// are self-describing.
#[derive(Debug, Clone, Serialize)]
pub struct SimConfig {
    pub measurement: Measurement,
    pub protocol: Protocol,
    pub mode: Mode,
    pub dt: f64,
    pub t_max: f64,
    pub c0: f64,
    pub eta: f64,
    pub n: usize,
    pub seed: u64,
    pub grid_points: usize,
    /// Number of worker threads for ensembles; 0 means auto.
    pub threads: usize,
    /// Forces the density-matrix integrator for protocol `none` even at
    /// eta = 1 (used by the purity-equivalence checks).
    pub force_density: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            measurement: Measurement::Full,
            protocol: Protocol::None,
            mode: Mode::LuReset,
            dt: 1e-4,
            t_max: 5.0,
            c0: 0.0,
            eta: 1.0,
            n: 1,
            seed: 1,
            grid_points: 200,
            threads: 0,
            force_density: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::Config(format!("dt = {} must be positive", self.dt)));
        }
        if self.t_max <= self.dt {
            return Err(Error::Config(format!(
                "t_max = {} must exceed dt = {}",
                self.t_max, self.dt
            )));
        }
        if self.n < 1 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.c0) {
            return Err(Error::Config(format!("c0 = {} outside [0, 1]", self.c0)));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::Config(format!("eta = {} outside [0, 1]", self.eta)));
        }
        if self.grid_points < 1 {
            return Err(Error::Config("grid_points must be at least 1".into()));
        }
        if self.eta < 1.0 && self.protocol != Protocol::None {
            return Err(Error::Config(
                "eta < 1 requires the density-matrix protocol 'none'; the feedback \
                 protocols are defined for unit-efficiency measurement"
                    .into(),
            ));
        }
        match self.protocol {
            Protocol::HillRalph => {
                if self.measurement != Measurement::Full {
                    return Err(Error::Config(
                        "hill_ralph requires the full-parity measurement".into(),
                    ));
                }
                if self.c0 != 0.0 {
                    return Err(Error::Config(
                        "hill_ralph starts from the even-parity mixture; c0 must be 0".into(),
                    ));
                }
            }
            Protocol::PH => {
                if self.mode == Mode::Hamiltonian {
                    return Err(Error::Config(
                        "the proportional-feedback Hamiltonian for P_H is not specified; \
                         run P_H in lu_reset mode"
                            .into(),
                    ));
                }
                if self.measurement != Measurement::Half {
                    return Err(Error::Config("P_H requires the half-parity measurement".into()));
                }
            }
            Protocol::PF => {
                if self.measurement != Measurement::Full {
                    return Err(Error::Config("P_F requires the full-parity measurement".into()));
                }
            }
            Protocol::None => {}
        }
        Ok(())
    }

    /// Number of integrator steps.
    pub fn steps(&self) -> usize {
        (self.t_max / self.dt).round().max(1.0) as usize
    }

    /// Applies one `key=value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |k: &str, v: &str| Error::Config(format!("invalid value '{v}' for {k}"));
        match key {
            "measurement" => self.measurement = Measurement::parse(value)?,
            "protocol" => self.protocol = Protocol::parse(value)?,
            "mode" => self.mode = Mode::parse(value)?,
            "dt" => self.dt = value.parse().map_err(|_| bad(key, value))?,
            "t_max" | "t-max" => self.t_max = value.parse().map_err(|_| bad(key, value))?,
            "c0" => self.c0 = value.parse().map_err(|_| bad(key, value))?,
            "eta" => self.eta = value.parse().map_err(|_| bad(key, value))?,
            "n" => self.n = value.parse().map_err(|_| bad(key, value))?,
            "seed" => self.seed = value.parse().map_err(|_| bad(key, value))?,
            "grid_points" | "grid-points" => {
                self.grid_points = value.parse().map_err(|_| bad(key, value))?
            }
            "threads" => self.threads = value.parse().map_err(|_| bad(key, value))?,
            "force_density" => {
                self.force_density = value.parse().map_err(|_| bad(key, value))?
            }
            other => return Err(Error::Config(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// Parses a flat `key=value` config file body (# starts a comment).
    pub fn apply_file(&mut self, body: &str) -> Result<()> {
        for (lineno, raw) in body.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "line {}: expected key=value, got '{raw}'",
                    lineno + 1
                )));
            };
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// `key=value` lines mirroring the config-file format.
    pub fn to_key_values(&self) -> Vec<(String, String)> {
        vec![
            ("measurement".into(), self.measurement.as_str().into()),
            ("protocol".into(), self.protocol.as_str().into()),
            ("mode".into(), self.mode.as_str().into()),
            ("dt".into(), format!("{}", self.dt)),
            ("t_max".into(), format!("{}", self.t_max)),
            ("c0".into(), format!("{}", self.c0)),
            ("eta".into(), format!("{}", self.eta)),
            ("n".into(), format!("{}", self.n)),
            ("seed".into(), format!("{}", self.seed)),
            ("grid_points".into(), format!("{}", self.grid_points)),
            ("threads".into(), format!("{}", self.threads)),
        ]
    }
}
