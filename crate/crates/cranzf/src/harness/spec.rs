//! Experiment specification: a versioned, human-editable TOML schema.
//! Physical quantities carry their unit in the field name (`…_db`, `…_dbm`,
//! `…_m`).

use crate::channel::HexRegion;
use crate::rvq::RvqMode;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("failed to read spec file: {0}")]
    Io(#[from] std::io::Error),
    #[error("spec parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("spec serialize error: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("unsupported schema_version {0} (this build reads version {SCHEMA_VERSION})")]
    SchemaVersion(u32),
    #[error("invalid spec: {0}")]
    Invalid(String),
}

/// Cluster/topology side of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SetupSpec {
    /// Equal attenuation `α = 1/M`, unit noise, powers in dB; the symmetric
    /// selection policy drives PaQ.
    Symmetric {
        m_srrh: usize,
        q_ms: usize,
        n_t: usize,
    },
    /// MSs placed uniformly over a hexagon-cluster region; pathloss-derived
    /// attenuation, powers in dBm, equal power-backoff.
    RandomPlacement {
        q_ms: usize,
        n_t: usize,
        geometry: HexRegion,
        noise_dbm: f64,
    },
}

impl SetupSpec {
    pub fn m_srrh(&self) -> usize {
        match self {
            SetupSpec::Symmetric { m_srrh, .. } => *m_srrh,
            SetupSpec::RandomPlacement { geometry, .. } => geometry.centers.len(),
        }
    }

    pub fn q_ms(&self) -> usize {
        match self {
            SetupSpec::Symmetric { q_ms, .. } | SetupSpec::RandomPlacement { q_ms, .. } => *q_ms,
        }
    }

    pub fn n_t(&self) -> usize {
        match self {
            SetupSpec::Symmetric { n_t, .. } | SetupSpec::RandomPlacement { n_t, .. } => *n_t,
        }
    }
}

/// What the sweep walks over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepVariable {
    /// Total feedback bits per S-RRH per direction.
    Bits,
    /// Per-S-RRH power in dB (symmetric setups).
    PmaxDb,
    /// Per-S-RRH power in dBm (random-placement setups).
    PmaxDbm,
}

impl SweepVariable {
    pub fn column_name(self) -> &'static str {
        match self {
            SweepVariable::Bits => "bits",
            SweepVariable::PmaxDb => "pmax_db",
            SweepVariable::PmaxDbm => "pmax_dbm",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub grid: Vec<f64>,
    /// Bit budget held fixed while sweeping power.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_bits: Option<u32>,
    /// Power held fixed while sweeping bits (dB or dBm per the setup).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_pmax: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    /// Channel realizations per point (per placement, for random setups).
    pub channels: usize,
    /// MS-placement realizations (random setups; ignored otherwise).
    #[serde(default = "one")]
    pub placements: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSpec {
    /// Antenna counts the standard scheme may switch down to.
    pub n_t: Vec<usize>,
    /// Discard counts the PaQ scheme may choose from.
    pub q_bar: Vec<usize>,
}

fn default_mode() -> RvqMode {
    RvqMode::Surrogate
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub schema_version: u32,
    pub name: String,
    pub seed: u64,
    /// Quantizer implementation; the surrogate is exact in distribution and
    /// is the only feasible choice at large bit budgets.
    #[serde(default = "default_mode")]
    pub rvq_mode: RvqMode,
    pub setup: SetupSpec,
    pub sweep: SweepSpec,
    pub trials: TrialSpec,
    pub candidates: CandidateSpec,
    /// Output directory; a CLI flag may override it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self, SpecError> {
        let spec: ExperimentSpec = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: &Path) -> Result<Self, SpecError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String, SpecError> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(SpecError::SchemaVersion(self.schema_version));
        }
        if self.sweep.grid.is_empty() {
            return Err(SpecError::Invalid("sweep.grid must be nonempty".into()));
        }
        if self.trials.channels == 0 || self.trials.placements == 0 {
            return Err(SpecError::Invalid("trial counts must be at least 1".into()));
        }
        let n_t = self.setup.n_t();
        let q = self.setup.q_ms();
        if self.candidates.n_t.iter().any(|&c| c < 2 || c > n_t) {
            return Err(SpecError::Invalid(format!(
                "candidates.n_t must lie in [2, {n_t}]"
            )));
        }
        let q_bar_max = (q - 1).min(n_t - 1);
        if self.candidates.q_bar.iter().any(|&c| c > q_bar_max) {
            return Err(SpecError::Invalid(format!(
                "candidates.q_bar must lie in [0, {q_bar_max}]"
            )));
        }
        match (&self.setup, self.sweep.variable) {
            (SetupSpec::Symmetric { .. }, SweepVariable::PmaxDbm) => {
                return Err(SpecError::Invalid(
                    "symmetric setups use pmax-db, not pmax-dbm".into(),
                ));
            }
            (SetupSpec::RandomPlacement { .. }, SweepVariable::PmaxDb) => {
                return Err(SpecError::Invalid(
                    "random-placement setups use pmax-dbm, not pmax-db".into(),
                ));
            }
            _ => {}
        }
        if self.sweep.variable == SweepVariable::Bits && self.sweep.fixed_pmax.is_none() {
            return Err(SpecError::Invalid(
                "sweeping bits requires sweep.fixed_pmax".into(),
            ));
        }
        if self.sweep.variable != SweepVariable::Bits && self.sweep.fixed_bits.is_none() {
            return Err(SpecError::Invalid(
                "sweeping power requires sweep.fixed_bits".into(),
            ));
        }
        Ok(())
    }

    /// The two default experiments, at desk scale.
    pub fn default_symmetric() -> Self {
        ExperimentSpec {
            schema_version: SCHEMA_VERSION,
            name: "symmetric-bits-sweep".into(),
            seed: 20240811,
            rvq_mode: RvqMode::Surrogate,
            setup: SetupSpec::Symmetric {
                m_srrh: 4,
                q_ms: 8,
                n_t: 8,
            },
            sweep: SweepSpec {
                variable: SweepVariable::Bits,
                grid: vec![40.0, 80.0, 120.0, 160.0, 200.0, 250.0],
                fixed_bits: None,
                fixed_pmax: Some(35.0),
            },
            trials: TrialSpec {
                channels: 300,
                placements: 1,
            },
            candidates: CandidateSpec {
                n_t: vec![2, 3, 4, 5, 6, 7, 8],
                q_bar: vec![0, 2, 4, 6],
            },
            out_dir: None,
        }
    }

    pub fn default_random_placement() -> Self {
        ExperimentSpec {
            schema_version: SCHEMA_VERSION,
            name: "random-placement-power-sweep".into(),
            seed: 20240811,
            rvq_mode: RvqMode::Surrogate,
            setup: SetupSpec::RandomPlacement {
                q_ms: 8,
                n_t: 8,
                geometry: HexRegion::four_hex_cluster(),
                noise_dbm: -121.0,
            },
            sweep: SweepSpec {
                variable: SweepVariable::PmaxDbm,
                grid: vec![40.0, 45.0, 50.0, 55.0, 60.0, 65.0, 70.0],
                fixed_bits: Some(176),
                fixed_pmax: None,
            },
            trials: TrialSpec {
                channels: 40,
                placements: 20,
            },
            candidates: CandidateSpec {
                n_t: vec![2, 3, 4, 5, 6, 7, 8],
                q_bar: vec![1, 2, 3, 4, 5, 6],
            },
            out_dir: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        for spec in [
            ExperimentSpec::default_symmetric(),
            ExperimentSpec::default_random_placement(),
        ] {
            spec.validate().unwrap();
            let text = spec.to_toml().unwrap();
            let back = ExperimentSpec::from_toml(&text).unwrap();
            assert_eq!(back, spec);
        }
    }

    #[test]
    fn schema_version_is_enforced() {
        let mut spec = ExperimentSpec::default_symmetric();
        spec.schema_version = 99;
        let text = toml::to_string(&spec).unwrap();
        assert!(matches!(
            ExperimentSpec::from_toml(&text),
            Err(SpecError::SchemaVersion(99))
        ));
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = ExperimentSpec::from_toml("schema_version = \"not a number\"").unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("schema_version") || msg.contains("line"),
            "{msg}"
        );
    }

    #[test]
    fn unit_mismatch_is_rejected() {
        let mut spec = ExperimentSpec::default_symmetric();
        spec.sweep.variable = SweepVariable::PmaxDbm;
        spec.sweep.fixed_bits = Some(160);
        assert!(spec.validate().is_err());
    }

    #[test]
    fn candidate_ranges_are_checked() {
        let mut spec = ExperimentSpec::default_symmetric();
        spec.candidates.q_bar = vec![8]; // above min(Q−1, N_t−1) = 7
        assert!(spec.validate().is_err());
        let mut spec = ExperimentSpec::default_symmetric();
        spec.candidates.n_t = vec![1];
        assert!(spec.validate().is_err());
    }
}
