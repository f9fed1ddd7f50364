//! Resolved configuration: defaults, then a JSON config file, then
//! `LANEKIT_*` environment variables, then command-line flags.

use std::fs;
use std::path::Path;

use lanekit_core::losses::LossConfig;
use lanekit_core::{EvalConfig, EvalSettings, PointwiseConfig, SampleGrid};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synth::SynthParams;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub eval: EvalConfig,
    pub pointwise: PointwiseConfig,
    pub loss: LossConfig,
    pub grid: SampleGrid,
    pub synth: SynthParams,
}

impl CliConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut de = serde_json::Deserializer::from_str(&text);
        serde_path_to_error::deserialize(&mut de)
            .map_err(|e| Error::Config(format!("{}: {}: {}", path.display(), e.path(), e.inner())))
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn settings(&self) -> EvalSettings {
        EvalSettings {
            eval: self.eval.clone(),
            pointwise: self.pointwise.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let core = |e: lanekit_core::Error| Error::Config(e.to_string());
        self.settings().validate().map_err(core)?;
        self.loss.validate().map_err(core)?;
        self.grid.validate().map_err(core)?;
        self.synth.noise.validate()
    }
}

/// Parses `g1,...,g6`.
pub fn parse_gammas(text: &str) -> std::result::Result<[f64; 6], String> {
    let values: Vec<f64> = text
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| format!("{v:?} is not a number")))
        .collect::<std::result::Result<_, _>>()?;
    values
        .try_into()
        .map_err(|v: Vec<f64>| format!("expected 6 weights, got {}", v.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn file_overrides_defaults_field_by_field() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, r#"{{"eval": {{"tau_bcd": 0.5}}, "loss": {{"gamma": [1,2,3,4,5,6]}}}}"#).unwrap();
        let c = CliConfig::load(f.path()).unwrap();
        assert_eq!(c.eval.tau_bcd, 0.5);
        assert_eq!(c.eval.tau_cd, 0.3);
        assert_eq!(c.loss.gamma, [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn unknown_keys_name_their_path() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, r#"{{"eval": {{"tau_bdc": 0.5}}}}"#).unwrap();
        let e = CliConfig::load(f.path()).unwrap_err().to_string();
        assert!(e.contains("eval"), "{e}");
    }

    #[test]
    fn gamma_lists() {
        assert_eq!(parse_gammas("0.5,2,10,3,5,2").unwrap(), lanekit_core::losses::DEFAULT_GAMMA);
        assert!(parse_gammas("1,2,3").is_err());
        assert!(parse_gammas("1,2,3,4,5,x").is_err());
    }
}
