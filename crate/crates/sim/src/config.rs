//! TOML-backed experiment configuration.

use std::path::Path;

use cdce_core::cdce::LassoConfig;
use cdce_core::channel::{ChannelModel, ChannelStats, DopplerClock, Pulse};
use cdce_core::grid::Dims;
use cdce_core::pilot::{DataMode, FrameSpec, Lattice, Placement, SequenceKind};
use serde::{Deserialize, Serialize};

use crate::error::{SimError, SimResult};

/// Environment variable that overrides `base_seed`.
pub const SEED_ENV: &str = "CDCE_BASE_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorId {
    Cdce,
    StLs,
    StLmmse,
    FsLmmse,
    TfLasso,
}

impl EstimatorId {
    pub const ALL: [EstimatorId; 5] =
        [EstimatorId::Cdce, EstimatorId::StLs, EstimatorId::StLmmse, EstimatorId::FsLmmse, EstimatorId::TfLasso];

    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorId::Cdce => "cdce",
            EstimatorId::StLs => "st_ls",
            EstimatorId::StLmmse => "st_lmmse",
            EstimatorId::FsLmmse => "fs_lmmse",
            EstimatorId::TfLasso => "tf_lasso",
        }
    }
}

impl std::fmt::Display for EstimatorId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    PilotOnly,
    WithData,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub m: usize,
    pub n: usize,
    pub cp_len: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { m: 8, n: 14, cp_len: 2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockKind {
    #[default]
    SymbolAligned,
    Frame,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseKind {
    #[default]
    Ideal,
    Rectangular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelSection {
    pub paths: usize,
    pub max_delay: usize,
    pub max_doppler: usize,
    pub clock: ClockKind,
    pub pulse: PulseKind,
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self { paths: 3, max_delay: 2, max_doppler: 3, clock: ClockKind::default(), pulse: PulseKind::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceName {
    #[default]
    AllOnes,
    Walsh,
    ZadoffChu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlacementName {
    #[default]
    Lattice,
    UniformRandom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrameSection {
    pub freq_spacing: usize,
    pub time_spacing: usize,
    pub freq_offset: usize,
    pub time_offset: usize,
    pub sequence: SequenceName,
    /// Walsh row or Zadoff-Chu root; the sequence's default when absent.
    pub sequence_param: Option<usize>,
    pub pilot_power: f64,
    pub placement: PlacementName,
}

impl Default for FrameSection {
    fn default() -> Self {
        let l = Lattice::default();
        Self {
            freq_spacing: l.freq_spacing,
            time_spacing: l.time_spacing,
            freq_offset: l.freq_offset,
            time_offset: l.time_offset,
            sequence: SequenceName::default(),
            sequence_param: None,
            pilot_power: 1.0,
            placement: PlacementName::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LassoSection {
    pub lambda: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LassoSection {
    fn default() -> Self {
        let c = LassoConfig::default();
        Self { lambda: c.lambda, tol: c.tol, max_iter: c.max_iter }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CovarianceSection {
    /// Monte Carlo channel draws behind the FS-LMMSE prior.
    pub samples: usize,
    /// Use the full transmitted grid (pilots and data) as FS-LMMSE's `X`.
    pub uses_data: bool,
}

impl Default for CovarianceSection {
    fn default() -> Self {
        Self { samples: 1000, uses_data: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub grid: GridSection,
    pub channel: ChannelSection,
    pub frame: FrameSection,
    pub snr_grid_db: Vec<f64>,
    pub trials: usize,
    pub mode: Mode,
    pub estimators: Vec<EstimatorId>,
    pub lasso: LassoSection,
    pub covariance: CovarianceSection,
    pub base_seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            grid: GridSection::default(),
            channel: ChannelSection::default(),
            frame: FrameSection::default(),
            snr_grid_db: (0..=8).map(|i| 2.5 * i as f64).collect(),
            trials: 500,
            mode: Mode::default(),
            estimators: EstimatorId::ALL.to_vec(),
            lasso: LassoSection::default(),
            covariance: CovarianceSection::default(),
            base_seed: 0x5eed,
        }
    }
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> SimResult<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file and applies the `CDCE_BASE_SEED` override.
    pub fn load(path: &Path) -> SimResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let Ok(seed) = std::env::var(SEED_ENV) {
            cfg.base_seed =
                seed.trim().parse().map_err(|_| SimError::Config(format!("{SEED_ENV} is not a u64: {seed:?}")))?;
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> SimResult<()> {
        let d = self.dims()?;
        self.stats().validate(d)?;
        if self.trials == 0 {
            return Err(SimError::Config("trials must be at least 1".into()));
        }
        if self.snr_grid_db.iter().any(|s| s.is_nan()) {
            return Err(SimError::Config("SNR grid contains NaN".into()));
        }
        if self.estimators.contains(&EstimatorId::FsLmmse) && self.covariance.samples < 2 {
            return Err(SimError::Config("covariance.samples must be at least 2".into()));
        }
        self.lasso_config().validate()?;
        if !(self.frame.pilot_power > 0.0) {
            return Err(SimError::Config("pilot_power must be positive".into()));
        }
        Ok(())
    }

    pub fn dims(&self) -> SimResult<Dims> {
        Ok(Dims::new(self.grid.m, self.grid.n, self.grid.cp_len)?)
    }

    pub fn stats(&self) -> ChannelStats {
        ChannelStats::new(self.channel.paths, self.channel.max_delay, self.channel.max_doppler)
    }

    pub fn channel_model(&self) -> ChannelModel {
        ChannelModel {
            pulse: match self.channel.pulse {
                PulseKind::Ideal => Pulse::Ideal,
                PulseKind::Rectangular => Pulse::Rectangular,
            },
            clock: match self.channel.clock {
                ClockKind::SymbolAligned => DopplerClock::SymbolAligned,
                ClockKind::Frame => DopplerClock::Frame,
            },
        }
    }

    pub fn lasso_config(&self) -> LassoConfig {
        LassoConfig { lambda: self.lasso.lambda, tol: self.lasso.tol, max_iter: self.lasso.max_iter }
    }

    pub fn frame_spec(&self) -> SimResult<FrameSpec> {
        let f = &self.frame;
        let mut spec = FrameSpec::new(self.dims()?);
        spec.lattice = Lattice {
            freq_spacing: f.freq_spacing,
            time_spacing: f.time_spacing,
            freq_offset: f.freq_offset,
            time_offset: f.time_offset,
        };
        spec.sequence = match f.sequence {
            SequenceName::AllOnes => SequenceKind::AllOnes,
            SequenceName::Walsh => SequenceKind::Walsh,
            SequenceName::ZadoffChu => SequenceKind::ZadoffChu,
        };
        spec.sequence_param = f.sequence_param;
        spec.pilot_power = f.pilot_power;
        spec.data_mode = match self.mode {
            Mode::PilotOnly => DataMode::None,
            Mode::WithData => DataMode::Qpsk,
        };
        spec.placement = match f.placement {
            PlacementName::Lattice => Placement::Lattice,
            PlacementName::UniformRandom => Placement::UniformRandom,
        };
        Ok(spec)
    }

    /// Noise PSD `N0 = 𝒫 / SNR` with `𝒫` the pilot power.
    pub fn noise_psd(&self, snr_db: f64) -> f64 {
        self.frame.pilot_power * 10f64.powf(-snr_db / 10.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_survive_a_round_trip() {
        let cfg = SimConfig::default();
        assert_eq!(cfg.snr_grid_db, vec![0.0, 2.5, 5.0, 7.5, 10.0, 12.5, 15.0, 17.5, 20.0]);
        let back = SimConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_files_fill_defaults() {
        let cfg = SimConfig::from_toml_str("trials = 7\nmode = \"with_data\"\n[channel]\npaths = 2\n").unwrap();
        assert_eq!(cfg.trials, 7);
        assert_eq!(cfg.mode, Mode::WithData);
        assert_eq!(cfg.channel.paths, 2);
        assert_eq!(cfg.channel.max_doppler, 3);
        assert_eq!(cfg.grid, GridSection::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(SimConfig::from_toml_str("trails = 3\n").is_err());
        assert!(SimConfig::from_toml_str("[grid]\nM = 8\n").is_err());
        assert!(SimConfig::from_toml_str("estimators = [\"magic\"]\n").is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(SimConfig::from_toml_str("trials = 0\n").is_err());
        assert!(SimConfig::from_toml_str("[channel]\nmax_delay = 5\n").is_err());
        assert!(SimConfig::from_toml_str("[lasso]\nlambda = -1.0\n").is_err());
    }

    #[test]
    fn noise_follows_snr() {
        let cfg = SimConfig::default();
        assert!((cfg.noise_psd(10.0) - 0.1).abs() < 1e-15);
        assert_eq!(cfg.noise_psd(f64::INFINITY), 0.0);
    }
}
