//! Reference TF-domain estimators: single-tap LS/LMMSE with linear
//! interpolation, full-size LMMSE with a sampled covariance, and LASSO over
//! every delay-Doppler bin without a DD-domain support prior.

use alloc::vec::Vec;

use nalgebra::{DMatrix, Dyn};
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::cdce::{
    build_dictionary, fista, reconstruct_tf_channel, DelayDoppler, Dictionary, LassoConfig, POWER_ITERS, POWER_TOL,
};
use crate::channel::{sample_channel, ChannelModel, ChannelStats};
use crate::error::{Error, Result};
use crate::grid::{Dims, TfGrid};
use crate::linalg::{power_iteration, CMatrix, CVector, C64, ZERO};
use crate::pilot::Frame;

/// Linear interpolation over `len` points from sorted `(index, value)`
/// anchors, holding the end values beyond the outermost anchors.
fn interp_line(anchors: &[(usize, C64)], len: usize) -> Vec<C64> {
    let mut out = alloc::vec![ZERO; len];
    let (first, last) = (anchors[0], anchors[anchors.len() - 1]);
    for (i, v) in out.iter_mut().enumerate() {
        *v = if i <= first.0 {
            first.1
        } else if i >= last.0 {
            last.1
        } else {
            let right = anchors.partition_point(|a| a.0 < i);
            let (a, b) = (anchors[right - 1], anchors[right]);
            if b.0 == i {
                b.1
            } else {
                let t = (i - a.0) as f64 / (b.0 - a.0) as f64;
                a.1 * (1.0 - t) + b.1 * t
            }
        };
    }
    out
}

/// Single-tap LS at the pilots, filled in along frequency within each
/// pilot-bearing symbol and then along time. Returned as the `M × N` grid of
/// per-element gains.
pub fn st_ls_grid(y_tf: &TfGrid, frame: &Frame) -> Result<CMatrix> {
    let mask = &frame.pilot_mask;
    let (m, n) = mask.shape();
    let (y, x) = (y_tf.values(), frame.pilot_only_tf.values());
    if y.shape() != (m, n) {
        return Err(Error::Dimension { expected: m * n, actual: y.len() });
    }
    let mut grid = CMatrix::zeros(m, n);
    let mut filled = Vec::new();
    for t in 0..n {
        let mut anchors = Vec::new();
        for f in 0..m {
            if mask[(f, t)] {
                if x[(f, t)] == ZERO {
                    return Err(Error::Numerical("zero pilot symbol at a pilot position"));
                }
                anchors.push((f, y[(f, t)] / x[(f, t)]));
            }
        }
        if !anchors.is_empty() {
            grid.column_mut(t).copy_from_slice(&interp_line(&anchors, m));
            filled.push(t);
        }
    }
    if filled.is_empty() {
        return Err(Error::Contract("frame carries no pilots"));
    }
    for f in 0..m {
        let anchors: Vec<(usize, C64)> = filled.iter().map(|&t| (t, grid[(f, t)])).collect();
        for (t, v) in interp_line(&anchors, n).into_iter().enumerate() {
            grid[(f, t)] = v;
        }
    }
    Ok(grid)
}

fn diagonal(grid: &CMatrix) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_column_slice(grid.as_slice()))
}

/// ST-LS estimate as the diagonal `MN × MN` matrix `diag(ĥ)`.
pub fn st_ls(y_tf: &TfGrid, frame: &Frame) -> Result<CMatrix> {
    Ok(diagonal(&st_ls_grid(y_tf, frame)?))
}

/// ST-LS shrunk by `1/(1 + 1/SNR)` (linear SNR).
pub fn st_lmmse(y_tf: &TfGrid, frame: &Frame, snr: f64) -> Result<CMatrix> {
    if !(snr > 0.0) {
        return Err(Error::Parameter("SNR must be positive"));
    }
    let scale = 1.0 / (1.0 + 1.0 / snr);
    Ok(diagonal(&(st_ls_grid(y_tf, frame)? * C64::new(scale, 0.0))))
}

/// Relative size below which a sample's residual counts as inside the basis.
const SPAN_TOL: f64 = 1e-10;

/// Sample mean and covariance of `vec(H_TF)`, kept as `C̄ = U·Uᴴ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceModel {
    pub mean: CVector,
    pub factor: CMatrix,
    pub samples: usize,
}

impl CovarianceModel {
    /// Streams samples through an orthonormal basis of their span, so memory
    /// grows with the rank rather than the sample count.
    pub fn from_samples<I: IntoIterator<Item = CVector>>(samples: I) -> Result<Self> {
        let mut basis: Vec<CVector> = Vec::new();
        let mut coords: Vec<Vec<C64>> = Vec::new();
        let mut dim = None;
        let mut largest = 0.0f64;
        for s in samples {
            if *dim.get_or_insert(s.len()) != s.len() {
                return Err(Error::Dimension { expected: dim.unwrap_or(0), actual: s.len() });
            }
            let scale = s.norm();
            largest = largest.max(scale);
            let mut c: Vec<C64> = Vec::with_capacity(basis.len() + 1);
            let mut r = s;
            for q in &basis {
                let p = q.dotc(&r);
                r.axpy(-p, q, C64::new(1.0, 0.0));
                c.push(p);
            }
            // Second pass keeps the basis orthonormal to working precision.
            for (q, ci) in basis.iter().zip(c.iter_mut()) {
                let p = q.dotc(&r);
                r.axpy(-p, q, C64::new(1.0, 0.0));
                *ci += p;
            }
            let rest = r.norm();
            if rest > SPAN_TOL * scale && rest > 0.0 {
                basis.push(r / C64::new(rest, 0.0));
                c.push(C64::new(rest, 0.0));
            }
            coords.push(c);
        }
        let k = coords.len();
        if k < 2 {
            return Err(Error::Config("covariance needs at least two samples"));
        }
        let dim = dim.unwrap_or(0);
        let rank = basis.len();
        let mut q = CMatrix::zeros(dim, rank);
        for (j, b) in basis.iter().enumerate() {
            q.set_column(j, b);
        }
        let mut centered = CMatrix::zeros(rank, k);
        for (i, c) in coords.iter().enumerate() {
            for (j, v) in c.iter().enumerate() {
                centered[(j, i)] = *v;
            }
        }
        let mean_c = centered.column_mean();
        for mut col in centered.column_iter_mut() {
            col -= &mean_c;
        }
        let mean = &q * &mean_c;
        let core = (&centered * centered.adjoint()) / C64::new(k as f64, 0.0);
        let factor = if rank == 0 {
            CMatrix::zeros(dim, 0)
        } else {
            let eig = core.symmetric_eigen();
            let top = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b));
            let floor = (SPAN_TOL * top).max((SPAN_TOL * largest).powi(2));
            let keep: Vec<usize> = (0..rank).filter(|&i| eig.eigenvalues[i] > floor).collect();
            let mut u = CMatrix::zeros(rank, keep.len());
            for (j, &i) in keep.iter().enumerate() {
                u.set_column(j, &(eig.eigenvectors.column(i) * C64::new(eig.eigenvalues[i].sqrt(), 0.0)));
            }
            &q * u
        };
        Ok(Self { mean, factor, samples: k })
    }

    /// Dense `C̄` (only sensible for small grids).
    pub fn dense(&self) -> CMatrix {
        &self.factor * self.factor.adjoint()
    }

    pub fn trace(&self) -> f64 {
        self.factor.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn rank(&self) -> usize {
        self.factor.ncols()
    }
}

/// Monte Carlo prior over `vec(H_TF)` from `samples` integer-grid draws.
pub fn fit_covariance<R: Rng + ?Sized>(
    stats: ChannelStats,
    dims: Dims,
    model: ChannelModel,
    samples: usize,
    rng: &mut R,
) -> Result<CovarianceModel> {
    if samples < 2 {
        return Err(Error::Config("covariance needs at least two samples"));
    }
    stats.validate(dims)?;
    let mut err = None;
    let draws =
        (0..samples).map_while(|_| match sample_channel(stats, dims, false, rng).and_then(|ch| ch.tf_channel(model)) {
            Ok(h) => Some(CVector::from_vec(h.as_slice().to_vec())),
            Err(e) => {
                err = Some(e);
                None
            }
        });
    let cov = CovarianceModel::from_samples(draws);
    match err {
        Some(e) => Err(e),
        None => cov,
    }
}

/// `H·x` for `H = reshape(v, MN, MN)`, i.e. `(xᵀ ⊗ I)·v`.
fn apply_reference(v: &[C64], x: &[C64]) -> CVector {
    let mn = x.len();
    let mut out = CVector::zeros(mn);
    for (col, xc) in x.iter().enumerate() {
        if *xc != ZERO {
            for (o, h) in out.iter_mut().zip(&v[col * mn..(col + 1) * mn]) {
                *o += h * xc;
            }
        }
    }
    out
}

/// `ĥ = h̄ + C̄Xᴴ(XC̄Xᴴ + N0·I)⁻¹(y − Xh̄)` with `X = x_TFᵀ ⊗ I_MN` for the
/// given reference grid, reshaped to `MN × MN`.
pub fn fs_lmmse(y_tf: &TfGrid, reference: &TfGrid, cov: &CovarianceModel, noise_psd: f64) -> Result<CMatrix> {
    if !(noise_psd >= 0.0) {
        return Err(Error::Parameter("noise PSD must be non-negative"));
    }
    let x = reference.as_vec();
    let mn = x.len();
    if y_tf.as_vec().len() != mn {
        return Err(Error::Dimension { expected: mn, actual: y_tf.as_vec().len() });
    }
    if cov.mean.len() != mn * mn {
        return Err(Error::Dimension { expected: mn * mn, actual: cov.mean.len() });
    }
    let r = cov.factor.ncols();
    let mut xu = CMatrix::zeros(mn, r);
    for j in 0..r {
        xu.set_column(j, &apply_reference(cov.factor.column(j).as_slice(), x));
    }
    let resid = CVector::from_column_slice(y_tf.as_vec()) - apply_reference(cov.mean.as_slice(), x);
    let mut gram = &xu * xu.adjoint();
    for i in 0..mn {
        gram[(i, i)] += C64::new(noise_psd, 0.0);
    }
    let weights = if r == 0 {
        CVector::zeros(0)
    } else {
        let chol = gram.cholesky().ok_or(Error::Numerical("XC̄Xᴴ + N0·I is not positive definite"))?;
        xu.adjoint() * chol.solve(&resid)
    };
    let h = &cov.mean + &cov.factor * weights;
    Ok(DMatrix::from_vec_generic(Dyn(mn), Dyn(mn), h.data.into()))
}

/// LASSO over every bin of the DD grid, `(l, k) ∈ [0, M) × [0, N)` with `k`
/// read as a signed Doppler. The dictionary depends only on the pilot frame,
/// so it is built once and reused across received frames.
#[derive(Debug, Clone)]
pub struct TfLasso {
    dict: Dictionary,
    gram: CMatrix,
    lipschitz: f64,
    model: ChannelModel,
    dims: Dims,
}

impl TfLasso {
    pub fn new(frame: &Frame, model: ChannelModel) -> Result<Self> {
        let d = frame.dims;
        let pairs: Vec<DelayDoppler> =
            (0..d.n()).flat_map(|k| (0..d.m()).map(move |l| DelayDoppler::new(l, d.signed_doppler(k)))).collect();
        let dict = build_dictionary(&frame.pilot_only_tf, &pairs, model, d)?;
        let gram = dict.matrix.adjoint() * &dict.matrix;
        let lipschitz = power_iteration(&gram, POWER_ITERS, POWER_TOL);
        if !(lipschitz > 0.0) {
            return Err(Error::DegenerateDictionary);
        }
        Ok(Self { dict, gram, lipschitz, model, dims: d })
    }

    pub fn dictionary(&self) -> &Dictionary {
        &self.dict
    }

    pub fn estimate(&self, y_tf: &TfGrid, cfg: &LassoConfig) -> Result<CMatrix> {
        cfg.validate()?;
        let y = y_tf.as_vec();
        if y.len() != self.dict.matrix.nrows() {
            return Err(Error::Dimension { expected: self.dict.matrix.nrows(), actual: y.len() });
        }
        let corr = self.dict.matrix.adjoint() * CVector::from_column_slice(y);
        let h = fista(&self.gram, &corr, self.lipschitz, cfg).coefficients;
        let (pairs, gains): (Vec<_>, Vec<_>) =
            self.dict.pairs.iter().zip(h.iter()).filter(|(_, g)| **g != ZERO).map(|(p, g)| (*p, *g)).unzip();
        reconstruct_tf_channel(&pairs, &gains, self.model, self.dims)
    }
}

/// One-shot [`TfLasso`].
pub fn tf_lasso(y_tf: &TfGrid, frame: &Frame, cfg: &LassoConfig, model: ChannelModel) -> Result<CMatrix> {
    TfLasso::new(frame, model)?.estimate(y_tf, cfg)
}

/// `10·log10(‖Ĥ − H‖² / ‖H‖²)`, floored at −200 dB.
pub fn nmse_db(h_hat: &CMatrix, h_true: &CMatrix) -> Result<f64> {
    if h_hat.shape() != h_true.shape() {
        return Err(Error::Dimension { expected: h_true.len(), actual: h_hat.len() });
    }
    let energy = h_true.norm_squared();
    if !(energy > 0.0) {
        return Err(Error::ZeroChannel);
    }
    let ratio = (h_hat - h_true).norm_squared() / energy;
    Ok((10.0 * ratio.log10()).max(NMSE_FLOOR_DB))
}

/// Value reported for a perfect estimate.
pub const NMSE_FLOOR_DB: f64 = -200.0;
