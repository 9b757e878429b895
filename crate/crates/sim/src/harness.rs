//! Seeded Monte Carlo evaluation of the estimators.

use std::collections::BTreeMap;

use cdce_core::baseline::{fit_covariance, fs_lmmse, nmse_db, st_lmmse, st_ls, CovarianceModel, TfLasso};
use cdce_core::cdce::{cdce_estimate, CdceConfig, ThresholdRule};
use cdce_core::channel::{sample_channel, time_channel_matrix, transmit_frame};
use cdce_core::pilot::{assemble_frame, Frame, FrameSpec, Placement};
use cdce_core::CMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{EstimatorId, Mode, SimConfig};
use crate::error::SimResult;

/// Independent random streams derived from the base seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Trial = 1,
    Covariance = 2,
    Frame = 3,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Order-independent 64-bit seed for `(stream, a, b)` under `base`.
pub fn derive_seed(base: u64, stream: Stream, a: u64, b: u64) -> u64 {
    splitmix(splitmix(splitmix(base ^ splitmix(stream as u64)) ^ a) ^ b)
}

/// One (estimator, SNR) cell of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub estimator: EstimatorId,
    pub snr_db: f64,
    pub trials: usize,
    pub nmse_db: f64,
    pub stderr_db: f64,
}

/// A configured experiment with its ensemble-level state prepared.
pub struct Experiment {
    cfg: SimConfig,
    spec: FrameSpec,
    estimators: Vec<EstimatorId>,
    covariance: Option<CovarianceModel>,
    tf_lasso: Option<TfLasso>,
}

impl Experiment {
    /// Validates `cfg`, fits the FS-LMMSE prior on its own seed stream and
    /// prebuilds the TF-LASSO dictionary when the pilot layout is fixed.
    pub fn new(cfg: SimConfig) -> SimResult<Self> {
        cfg.validate()?;
        let spec = cfg.frame_spec()?;
        let mut estimators = cfg.estimators.clone();
        estimators.sort();
        estimators.dedup();
        let covariance = if estimators.contains(&EstimatorId::FsLmmse) {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.base_seed, Stream::Covariance, 0, 0));
            Some(fit_covariance(cfg.stats(), spec.dims, cfg.channel_model(), cfg.covariance.samples, &mut rng)?)
        } else {
            None
        };
        let tf_lasso = if estimators.contains(&EstimatorId::TfLasso) && spec.placement == Placement::Lattice {
            // Pilot positions and symbols are deterministic here, so any draw
            // of the frame carries the same pilot-only grid.
            let frame = assemble_frame(&spec, &mut ChaCha8Rng::seed_from_u64(0))?;
            Some(TfLasso::new(&frame, cfg.channel_model())?)
        } else {
            None
        };
        Ok(Self { cfg, spec, estimators, covariance, tf_lasso })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn covariance(&self) -> Option<&CovarianceModel> {
        self.covariance.as_ref()
    }

    /// Seed of trial `trial` at SNR grid position `snr_idx`.
    pub fn trial_seed(&self, snr_idx: usize, trial: u64) -> u64 {
        derive_seed(self.cfg.base_seed, Stream::Trial, snr_idx as u64, trial)
    }

    /// Runs every requested estimator on one shared channel, frame and noise
    /// draw. `snr_idx` only selects the random stream.
    pub fn run_trial(&self, snr_db: f64, snr_idx: usize, trial: u64) -> SimResult<BTreeMap<EstimatorId, f64>> {
        let mut out = BTreeMap::new();
        if self.estimators.is_empty() {
            return Ok(out);
        }
        let d = self.spec.dims;
        let model = self.cfg.channel_model();
        let mut rng = ChaCha8Rng::seed_from_u64(self.trial_seed(snr_idx, trial));
        let channel = sample_channel(self.cfg.stats(), d, false, &mut rng)?;
        let frame = assemble_frame(&self.spec, &mut rng)?;
        let n0 = self.cfg.noise_psd(snr_db);
        let g = time_channel_matrix(&channel, model)?;
        let y = transmit_frame(&frame.tf, &g, n0, &mut rng, d)?;
        let truth = channel.tf_channel(model)?;
        for &est in &self.estimators {
            let h = self.estimate(est, &y, &frame, n0, snr_db)?;
            out.insert(est, nmse_db(&h, &truth)?);
        }
        Ok(out)
    }

    fn estimate(
        &self,
        est: EstimatorId,
        y: &cdce_core::grid::TfGrid,
        frame: &Frame,
        n0: f64,
        snr_db: f64,
    ) -> SimResult<CMatrix> {
        let model = self.cfg.channel_model();
        Ok(match est {
            EstimatorId::Cdce => {
                let rule = match self.cfg.mode {
                    Mode::PilotOnly => ThresholdRule::PilotOnly { noise_psd: n0 },
                    Mode::WithData => ThresholdRule::WithData,
                };
                let cfg = CdceConfig { lasso: self.cfg.lasso_config(), model };
                cdce_estimate(y, frame, self.cfg.stats(), rule, &cfg)?.tf_channel
            }
            EstimatorId::StLs => st_ls(y, frame)?,
            EstimatorId::StLmmse => st_lmmse(y, frame, 10f64.powf(snr_db / 10.0))?,
            EstimatorId::FsLmmse => {
                let cov = self.covariance.as_ref().expect("prior fitted when fs_lmmse is requested");
                let reference = if self.cfg.covariance.uses_data { &frame.tf } else { &frame.pilot_only_tf };
                fs_lmmse(y, reference, cov, n0)?
            }
            EstimatorId::TfLasso => match &self.tf_lasso {
                Some(solver) => solver.estimate(y, &self.cfg.lasso_config())?,
                None => TfLasso::new(frame, model)?.estimate(y, &self.cfg.lasso_config())?,
            },
        })
    }

    /// Every (SNR, trial) pair in parallel, reduced in trial order.
    pub fn run_sweep(&self) -> SimResult<Vec<ResultRow>> {
        let snrs = &self.cfg.snr_grid_db;
        let trials = self.cfg.trials;
        let jobs: Vec<(usize, u64)> = (0..snrs.len()).flat_map(|i| (0..trials as u64).map(move |t| (i, t))).collect();
        let results: Vec<BTreeMap<EstimatorId, f64>> =
            jobs.par_iter().map(|&(i, t)| self.run_trial(snrs[i], i, t)).collect::<SimResult<_>>()?;
        let mut rows = Vec::new();
        for &est in &self.estimators {
            for (i, &snr_db) in snrs.iter().enumerate() {
                let db: Vec<f64> = results[i * trials..(i + 1) * trials].iter().map(|r| r[&est]).collect();
                let (nmse_db, stderr_db) = summarize_db(&db);
                rows.push(ResultRow { estimator: est, snr_db, trials, nmse_db, stderr_db });
            }
        }
        rows.sort_by(|a, b| a.estimator.cmp(&b.estimator).then(a.snr_db.total_cmp(&b.snr_db)));
        Ok(rows)
    }
}

/// Mean of per-trial NMSE taken in the linear domain, in dB, together with a
/// delta-method standard error in dB.
pub fn summarize_db(values_db: &[f64]) -> (f64, f64) {
    let lin: Vec<f64> = values_db.iter().map(|v| 10f64.powf(v / 10.0)).collect();
    let n = lin.len() as f64;
    let mean = lin.iter().sum::<f64>() / n;
    let stderr = if lin.len() > 1 {
        let var = lin.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    (10.0 * mean.log10(), 10.0 / std::f64::consts::LN_10 * stderr / mean)
}

pub fn run_sweep(cfg: &SimConfig) -> SimResult<Vec<ResultRow>> {
    Experiment::new(cfg.clone())?.run_sweep()
}
