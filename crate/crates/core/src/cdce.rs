//! Two-stage cross-domain channel estimator.
//!
//! Stage one correlates the received DD grid against the pilot DD image with
//! the twisted-convolution phase structure and keeps the (delay, Doppler)
//! bins inside the target region that clear a threshold. Stage two builds one
//! dictionary column per surviving bin, the TF response of a unit-gain path
//! at that bin through the pilot frame, and fits complex gains either by
//! least squares or by accelerated proximal gradient on the LASSO objective
//! `½‖y − Dh‖² + λ‖h‖₁`.

use alloc::vec::Vec;

use nalgebra::Complex;
#[allow(unused_imports)]
use num_traits::Float;

use crate::channel::{
    channel_matrix_unchecked, effective_tf_channel, propagate, ChannelModel, ChannelStats, PathParams,
};
use crate::error::{Error, Result};
use crate::grid::{remove_cp, tf_to_dd, tf_to_time, time_to_tf, DdGrid, Dims, TfGrid, TimeSignal};
use crate::linalg::{cis, power_iteration, CMatrix, CVector, C64, ONE, ZERO};
use crate::pilot::Frame;

/// An on-grid (delay, signed Doppler) hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DelayDoppler {
    pub delay: usize,
    pub doppler: i64,
}

impl DelayDoppler {
    pub fn new(delay: usize, doppler: i64) -> Self {
        Self { delay, doppler }
    }

    fn unit_path(self, gain: C64) -> PathParams {
        PathParams::on_grid(gain, self.delay, self.doppler)
    }
}

/// Output of the DD-domain search.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CoarseEstimate {
    pub pairs: Vec<DelayDoppler>,
    pub scores: Vec<C64>,
}

impl CoarseEstimate {
    pub fn p_hat(&self) -> usize {
        self.pairs.len()
    }
}

/// `V[l,k] = Σ_{m,n} Y*[m,n] X[[m−l]_M, [n−k]_N] α[m−l, n−k] e^{j2π k(m−l)/(MN)}`
/// for `l ∈ [0,M)`, `k ∈ [0,N)`. The Doppler in the exponential is the signed
/// value of column `k`.
pub fn twisted_convolution(y_dd: &DdGrid, x_dd: &DdGrid) -> Result<CMatrix> {
    let (y, x) = (y_dd.values(), x_dd.values());
    if y.shape() != x.shape() {
        return Err(Error::Dimension { expected: x.len(), actual: y.len() });
    }
    let (m, n) = x.shape();
    let mn = (m * n) as f64;
    // α for a wrapped delay, indexed by (n − k) mod N.
    let wrap: Vec<C64> = (0..n).map(|i| cis(-(i as f64) / n as f64)).collect();
    let y_conj = y.map(|v| v.conj());
    let mut v = CMatrix::zeros(m, n);
    for k in 0..n {
        let k_signed = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
        for l in 0..m {
            let mut acc = ZERO;
            for row in 0..m {
                let shift = row as i64 - l as i64;
                let src = shift.rem_euclid(m as i64) as usize;
                let mut inner = ZERO;
                for col in 0..n {
                    let dk = (col + n - k) % n;
                    let term = y_conj[(row, col)] * x[(src, dk)];
                    inner += if shift < 0 { term * wrap[dk] } else { term };
                }
                acc += inner * cis(k_signed * shift as f64 / mn);
            }
            v[(l, k)] = acc;
        }
    }
    Ok(v)
}

/// Keeps bins of `v` inside `[0, l_max] × [−k_max, k_max]` whose magnitude is
/// at least `gamma`, strongest first (ties broken by `(l, k)`).
pub fn threshold_select(v: &CMatrix, stats: ChannelStats, gamma: f64) -> CoarseEstimate {
    let (m, n) = v.shape();
    let mut hits: Vec<(f64, DelayDoppler, C64)> = Vec::new();
    let k_max = stats.max_doppler.min(n / 2) as i64;
    for l in 0..=stats.max_delay.min(m - 1) {
        for k in -k_max..=k_max {
            let col = k.rem_euclid(n as i64) as usize;
            let s = v[(l, col)];
            if s.norm() >= gamma {
                hits.push((s.norm(), DelayDoppler::new(l, k), s));
            }
        }
    }
    hits.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    CoarseEstimate { pairs: hits.iter().map(|h| h.1).collect(), scores: hits.iter().map(|h| h.2).collect() }
}

/// How the DD-domain detection threshold is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdRule {
    /// `γ = √N0 / 3`.
    PilotOnly {
        noise_psd: f64,
    },
    /// `γ = √(vᴴv / |R|)` with `v = vec(V_DD)` over the whole grid.
    WithData,
    Fixed(f64),
}

pub fn default_gamma(rule: ThresholdRule, v: &CMatrix, region_size: usize) -> f64 {
    match rule {
        ThresholdRule::PilotOnly { noise_psd } => noise_psd.max(0.0).sqrt() / 3.0,
        ThresholdRule::WithData => {
            let energy: f64 = v.iter().map(|z| z.norm_sqr()).sum();
            (energy / region_size.max(1) as f64).sqrt()
        }
        ThresholdRule::Fixed(g) => g,
    }
}

/// Dictionary `D` whose column `j` is the TF response of a unit-gain path at
/// `pairs[j]` to the pilot-only frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    pub matrix: CMatrix,
    pub pairs: Vec<DelayDoppler>,
}

/// Runs the pilot-only frame through `tf_to_time` (with CP), a unit-gain
/// single path, `remove_cp` and `time_to_tf` for every pair. Pairs may exceed
/// the CP or the target region.
pub fn build_dictionary(
    pilot_only_tf: &TfGrid,
    pairs: &[DelayDoppler],
    model: ChannelModel,
    d: Dims,
) -> Result<Dictionary> {
    if pairs.is_empty() {
        return Err(Error::Contract("empty coarse estimate; return a zero channel instead"));
    }
    let tx = tf_to_time(pilot_only_tf, d, true)?;
    let mut matrix = CMatrix::zeros(d.grid_len(), pairs.len());
    for (j, pair) in pairs.iter().enumerate() {
        let rx = propagate(&[pair.unit_path(ONE)], model, d, tx.samples());
        let y = time_to_tf(&remove_cp(&TimeSignal::new(rx, true, d)?, d)?, d)?;
        matrix.column_mut(j).copy_from_slice(y.as_vec());
    }
    Ok(Dictionary { matrix, pairs: pairs.to_vec() })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoConfig {
    pub lambda: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LassoConfig {
    fn default() -> Self {
        Self { lambda: 0.01, tol: 1e-6, max_iter: 1000 }
    }
}

impl LassoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::Parameter("lambda must be a non-negative number"));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::Parameter("tolerance must be non-negative"));
        }
        if self.max_iter == 0 {
            return Err(Error::Parameter("max_iter must be positive"));
        }
        Ok(())
    }
}

/// Complex soft threshold `ψ(x, γ) = max(0, 1 − γ/|x|)·x`.
#[inline]
pub fn soft_threshold(x: C64, gamma: f64) -> C64 {
    let mag = x.norm();
    if mag <= gamma {
        ZERO
    } else {
        x * (1.0 - gamma / mag)
    }
}

/// Nesterov momentum update `β⁺ = (1 + √(1 + 4β²)) / 2`.
#[inline]
pub fn next_momentum(beta: f64) -> f64 {
    (1.0 + (1.0 + 4.0 * beta * beta).sqrt()) / 2.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoSolution {
    pub coefficients: CVector,
    pub iterations: usize,
    pub converged: bool,
}

/// Power-iteration settings for the step size `1/‖D‖₂²`.
pub(crate) const POWER_ITERS: usize = 50;
pub(crate) const POWER_TOL: f64 = 1e-10;

/// FISTA on `½‖y − Dh‖² + λ‖h‖₁`, starting from zero, with step `1/‖D‖₂²`
/// and threshold `λ/‖D‖₂²`. Stops once `‖hⁱ − hⁱ⁻¹‖/‖hⁱ‖ < tol`.
pub fn solve_lasso(y: &CVector, dict: &CMatrix, cfg: &LassoConfig) -> Result<LassoSolution> {
    cfg.validate()?;
    if dict.ncols() == 0 {
        return Err(Error::Contract("dictionary has no columns"));
    }
    if y.len() != dict.nrows() {
        return Err(Error::Dimension { expected: dict.nrows(), actual: y.len() });
    }
    // Dᴴ(y − Dz) = Dᴴy − (DᴴD)z.
    let gram = dict.adjoint() * dict;
    let lipschitz = power_iteration(&gram, POWER_ITERS, POWER_TOL);
    if !(lipschitz > 0.0) {
        return Err(Error::DegenerateDictionary);
    }
    let corr = dict.adjoint() * y;
    Ok(fista(&gram, &corr, lipschitz, cfg))
}

/// FISTA iterations given `DᴴD`, `Dᴴy` and the Lipschitz constant `‖D‖₂²`.
pub(crate) fn fista(gram: &CMatrix, corr: &CVector, lipschitz: f64, cfg: &LassoConfig) -> LassoSolution {
    let step = 1.0 / lipschitz;
    let shrink = cfg.lambda * step;
    let p = corr.len();
    let mut h = CVector::zeros(p);
    let mut z = h.clone();
    let mut beta = 1.0;
    let mut grad = CVector::zeros(p);
    for it in 1..=cfg.max_iter {
        grad.copy_from(corr);
        grad.gemv(Complex::new(-1.0, 0.0), gram, &z, ONE);
        let next = CVector::from_fn(p, |i, _| soft_threshold(z[i] + grad[i] * step, shrink));
        let beta_next = next_momentum(beta);
        let delta = &next - &h;
        z = &next + &delta * C64::new((beta - 1.0) / beta_next, 0.0);
        let (change, norm) = (delta.norm(), next.norm());
        h = next;
        beta = beta_next;
        if change <= cfg.tol * norm || (change == 0.0 && norm == 0.0) {
            return LassoSolution { coefficients: h, iterations: it, converged: true };
        }
    }
    LassoSolution { coefficients: h, iterations: cfg.max_iter, converged: false }
}

/// Condition-number ceiling for the least-squares branch.
pub const MAX_LS_CONDITION: f64 = 1e6;

/// `ĥ = (DᴴD)⁻¹Dᴴy` for tall, well-conditioned `D` (solved through the SVD).
pub fn solve_ls(y: &CVector, dict: &CMatrix) -> Result<CVector> {
    let (rows, cols) = dict.shape();
    if cols == 0 {
        return Err(Error::Contract("dictionary has no columns"));
    }
    if rows < cols {
        return Err(Error::NotTall { rows, cols });
    }
    if y.len() != rows {
        return Err(Error::Dimension { expected: rows, actual: y.len() });
    }
    let svd = dict.clone().svd(true, true);
    let sv = &svd.singular_values;
    let (max, min) = sv.iter().fold((0.0f64, f64::INFINITY), |(a, b), &s| (a.max(s), b.min(s)));
    let cond = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(cond < MAX_LS_CONDITION) {
        return Err(Error::IllConditioned(cond));
    }
    svd.solve(y, 0.0).map_err(Error::Numerical)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    LeastSquares,
    Lasso,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CdceConfig {
    pub lasso: LassoConfig,
    pub model: ChannelModel,
}

/// Result of [`cdce_estimate`].
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    /// Nonzero fitted gains, aligned with `pairs`.
    pub gains: Vec<C64>,
    pub pairs: Vec<DelayDoppler>,
    pub tf_channel: CMatrix,
    pub coarse: CoarseEstimate,
    /// `None` when the DD search found nothing.
    pub solver: Option<SolverKind>,
}

impl ChannelEstimate {
    /// True when the coarse stage kept no bins and the estimate is zero.
    pub fn no_paths_detected(&self) -> bool {
        self.solver.is_none()
    }
}

/// Rebuilds `H_TF` from on-grid paths.
pub fn reconstruct_tf_channel(pairs: &[DelayDoppler], gains: &[C64], model: ChannelModel, d: Dims) -> Result<CMatrix> {
    if pairs.is_empty() {
        return Ok(CMatrix::zeros(d.grid_len(), d.grid_len()));
    }
    let paths: Vec<PathParams> = pairs.iter().zip(gains).map(|(p, g)| p.unit_path(*g)).collect();
    effective_tf_channel(&channel_matrix_unchecked(&paths, d, model), d)
}

/// Normalized DD-domain correlation `V_DD / ‖x_DD‖²`, so that an isolated
/// path of gain `h` scores `h*`.
pub fn normalized_correlation(y_tf: &TfGrid, pilot_only_tf: &TfGrid, d: Dims) -> Result<CMatrix> {
    let x_dd = tf_to_dd(pilot_only_tf, d)?;
    let energy = x_dd.energy();
    if !(energy > 0.0) {
        return Err(Error::Parameter("pilot frame carries no energy"));
    }
    let v = twisted_convolution(&tf_to_dd(y_tf, d)?, &x_dd)?;
    Ok(v / C64::new(energy, 0.0))
}

/// Full estimator: DD correlation, thresholding, dictionary fit, pruning of
/// zero gains and reconstruction of `Ĥ_TF`.
pub fn cdce_estimate(
    y_tf: &TfGrid,
    frame: &Frame,
    stats: ChannelStats,
    rule: ThresholdRule,
    cfg: &CdceConfig,
) -> Result<ChannelEstimate> {
    let d = frame.dims;
    if y_tf.values().shape() != (d.m(), d.n()) {
        return Err(Error::Dimension { expected: d.grid_len(), actual: y_tf.values().len() });
    }
    let v = normalized_correlation(y_tf, &frame.pilot_only_tf, d)?;
    let gamma = default_gamma(rule, &v, stats.region_size());
    let coarse = threshold_select(&v, stats, gamma);
    if coarse.pairs.is_empty() {
        return Ok(ChannelEstimate {
            gains: Vec::new(),
            pairs: Vec::new(),
            tf_channel: CMatrix::zeros(d.grid_len(), d.grid_len()),
            coarse,
            solver: None,
        });
    }
    let dict = build_dictionary(&frame.pilot_only_tf, &coarse.pairs, cfg.model, d)?;
    let y = CVector::from_column_slice(y_tf.as_vec());
    let (h, solver) = match solve_ls(&y, &dict.matrix) {
        Ok(h) => (h, SolverKind::LeastSquares),
        Err(Error::NotTall { .. } | Error::IllConditioned(_)) => {
            (solve_lasso(&y, &dict.matrix, &cfg.lasso)?.coefficients, SolverKind::Lasso)
        }
        Err(e) => return Err(e),
    };
    let (pairs, gains): (Vec<_>, Vec<_>) =
        dict.pairs.iter().zip(h.iter()).filter(|(_, g)| **g != ZERO).map(|(p, g)| (*p, *g)).unzip();
    let tf_channel = reconstruct_tf_channel(&pairs, &gains, cfg.model, d)?;
    Ok(ChannelEstimate { gains, pairs, tf_channel, coarse, solver: Some(solver) })
}
