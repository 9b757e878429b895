//! Doubly selective multipath channel: random path draws, the transmit pulse
//! ambiguity function, the sampled time-domain channel matrix and its
//! effective time-frequency form.
//!
//! Units are normalized to the sampling period `T_s = T/M`: delays are in
//! samples and Doppler shifts in cycles per sample, so a path with Doppler
//! index `k` rotates by `k/(MN)` cycles per sample.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::grid::{remove_cp, tf_to_time, time_to_tf, Dft, Dims, TfGrid, TimeSignal};
use crate::linalg::{cis, CMatrix, C64, ZERO};

/// Transmit pulse shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Pulse {
    /// Kronecker ambiguity function on the sample lattice.
    #[default]
    Ideal,
    /// `p(t) = 1/√T_s` on `[0, T_s)`.
    Rectangular,
}

impl Pulse {
    /// Ambiguity function `A(τ, ν) = ∫ p(t) p*(t−τ) e^{−j2πν(t−τ)} dt` with the
    /// delay in samples and the Doppler shift in cycles per sample.
    pub fn ambiguity(self, delay: f64, doppler: f64) -> C64 {
        match self {
            Pulse::Ideal => {
                if delay.abs() < 1e-12 {
                    C64::new(1.0, 0.0)
                } else {
                    ZERO
                }
            }
            Pulse::Rectangular => {
                let overlap = 1.0 - delay.abs();
                if overlap <= 0.0 {
                    return ZERO;
                }
                // The integrand runs over u = t − τ ∈ [max(0,−τ), min(1, 1−τ)),
                // an interval of length `overlap` centred on (1 − τ)/2.
                cis(-0.5 * doppler * (1.0 - delay)) * (overlap * sinc(doppler * overlap))
            }
        }
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = core::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Ambiguity function in physical units: delay in seconds, Doppler in Hz.
pub fn pulse_af(tau: f64, nu: f64, pulse: Pulse, sample_period: f64) -> C64 {
    pulse.ambiguity(tau / sample_period, nu * sample_period)
}

/// Sample index used as the time origin of the Doppler rotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DopplerClock {
    /// A sample at offset `o ∈ [−L_cp, M)` from the start of symbol `i`'s data
    /// part rotates with index `i·M + o`. The DD-domain image of an on-grid
    /// path is then exactly on-grid.
    #[default]
    SymbolAligned,
    /// Samples rotate with their absolute index in the CP-extended frame, so
    /// every prefix advances the Doppler phase.
    Frame,
}

/// Pulse and Doppler-clock conventions shared by channel synthesis and by the
/// estimators that rebuild channels from (delay, Doppler) hypotheses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ChannelModel {
    pub pulse: Pulse,
    pub clock: DopplerClock,
}

impl ChannelModel {
    fn phase_index(&self, d: Dims, n: usize) -> f64 {
        match self.clock {
            DopplerClock::Frame => n as f64,
            DopplerClock::SymbolAligned => {
                let (sym, off) = (n / d.block_len(), n % d.block_len());
                (sym * d.m()) as f64 + off as f64 - d.cp_len() as f64
            }
        }
    }
}

/// One propagation path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathParams {
    pub gain: C64,
    pub delay_int: usize,
    pub delay_frac: f64,
    pub doppler_int: i64,
    pub doppler_frac: f64,
}

impl PathParams {
    /// An on-grid path.
    pub fn on_grid(gain: C64, delay: usize, doppler: i64) -> Self {
        Self { gain, delay_int: delay, delay_frac: 0.0, doppler_int: doppler, doppler_frac: 0.0 }
    }

    /// Delay in samples.
    pub fn delay(&self) -> f64 {
        self.delay_int as f64 + self.delay_frac
    }

    /// Doppler in bins of `1/(NT)`.
    pub fn doppler(&self) -> f64 {
        self.doppler_int as f64 + self.doppler_frac
    }
}

/// Ensemble parameters for [`sample_channel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChannelStats {
    pub paths: usize,
    pub max_delay: usize,
    pub max_doppler: usize,
}

impl ChannelStats {
    pub fn new(paths: usize, max_delay: usize, max_doppler: usize) -> Self {
        Self { paths, max_delay, max_doppler }
    }

    /// Per-path gain variance `1/P`.
    pub fn gain_variance(&self) -> f64 {
        1.0 / self.paths as f64
    }

    /// `|R| = (l_max + 1)(2 k_max + 1)`.
    pub fn region_size(&self) -> usize {
        (self.max_delay + 1) * (2 * self.max_doppler + 1)
    }

    pub fn validate(&self, d: Dims) -> Result<()> {
        if self.paths == 0 {
            return Err(Error::Config("path count must be positive"));
        }
        if self.max_delay > d.cp_len() {
            return Err(Error::Config("maximum delay exceeds the cyclic prefix"));
        }
        if 2 * self.max_doppler > d.n() {
            return Err(Error::Config("maximum Doppler index exceeds N/2"));
        }
        if self.paths > self.region_size() {
            return Err(Error::Config("more paths than distinct delay-Doppler pairs"));
        }
        Ok(())
    }
}

/// A drawn channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    paths: Vec<PathParams>,
    dims: Dims,
}

impl ChannelRealization {
    pub fn new(paths: Vec<PathParams>, dims: Dims) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::Config("a channel needs at least one path"));
        }
        for p in &paths {
            if p.delay() < 0.0 {
                return Err(Error::Parameter("negative path delay"));
            }
            if 2.0 * p.doppler().abs() > dims.n() as f64 {
                return Err(Error::Parameter("Doppler shift beyond N/2"));
            }
        }
        Ok(Self { paths, dims })
    }

    pub fn paths(&self) -> &[PathParams] {
        &self.paths
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    /// Effective TF channel `H_TF` of this realization.
    pub fn tf_channel(&self, model: ChannelModel) -> Result<CMatrix> {
        effective_tf_channel(&time_channel_matrix(self, model)?, self.dims)
    }
}

pub(crate) fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = (0.5 * variance).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re * s, im * s)
}

/// Draws `P` paths with distinct integer (delay, Doppler) pairs uniform over
/// `[0, l_max] × [−k_max, k_max]` and i.i.d. `CN(0, 1/P)` gains. With
/// `fractional`, each index also gets a uniform offset in `[−1/2, 1/2]`
/// (delays are kept non-negative).
pub fn sample_channel<R: Rng + ?Sized>(
    stats: ChannelStats,
    dims: Dims,
    fractional: bool,
    rng: &mut R,
) -> Result<ChannelRealization> {
    stats.validate(dims)?;
    let mut pairs: Vec<(usize, i64)> = Vec::with_capacity(stats.paths);
    while pairs.len() < stats.paths {
        let l = rng.random_range(0..=stats.max_delay);
        let k = rng.random_range(-(stats.max_doppler as i64)..=stats.max_doppler as i64);
        if !pairs.contains(&(l, k)) {
            pairs.push((l, k));
        }
    }
    let var = stats.gain_variance();
    let mut paths = Vec::with_capacity(stats.paths);
    for (l, k) in pairs {
        let gain = complex_gaussian(rng, var);
        let (mut iota, mut kappa) = (0.0, 0.0);
        if fractional {
            iota = rng.random_range(-0.5..=0.5);
            kappa = rng.random_range(-0.5..=0.5);
            // Reflect offsets that would leave [0, l_max].
            let upper = stats.max_delay as f64 - l as f64;
            if iota < -(l as f64) || iota > upper {
                iota = -iota;
            }
            if iota < -(l as f64) || iota > upper {
                iota = 0.0;
            }
            if (k as f64 + kappa).abs() * 2.0 > dims.n() as f64 {
                kappa = -kappa;
            }
        }
        paths.push(PathParams { gain, delay_int: l, delay_frac: iota, doppler_int: k, doppler_frac: kappa });
    }
    ChannelRealization::new(paths, dims)
}

/// Calls `f(row, col, value)` for every nonzero contribution of `paths` to the
/// time-domain channel matrix `G` (receive index `row`, transmit index `col`).
pub(crate) fn for_each_tap(paths: &[PathParams], model: ChannelModel, d: Dims, mut f: impl FnMut(usize, usize, C64)) {
    let size = d.frame_len();
    let mn = d.grid_len() as f64;
    for p in paths {
        let tau = p.delay();
        let nu = p.doppler() / mn;
        // A*((n − m) + τ, ν) vanishes unless |m − n − τ| < 1.
        let lo = (tau - 1.0).floor() as i64 + 1;
        let hi = (tau + 1.0).ceil() as i64 - 1;
        for n in 0..size {
            let rot = p.gain * cis(model.phase_index(d, n) * nu);
            for off in lo..=hi {
                let m = n as i64 + off;
                if m < 0 || m >= size as i64 {
                    continue;
                }
                let a = model.pulse.ambiguity(-(off as f64) + tau, nu);
                if a != ZERO {
                    f(m as usize, n, rot * a.conj());
                }
            }
        }
    }
}

fn check_paths(ch: &ChannelRealization, model: ChannelModel) -> Result<()> {
    let d = ch.dims;
    for p in &ch.paths {
        if p.delay() > d.cp_len() as f64 {
            return Err(Error::Config("path delay exceeds the cyclic prefix"));
        }
        if model.pulse == Pulse::Ideal && p.delay_frac != 0.0 {
            return Err(Error::Config("the ideal pulse only supports integer delays"));
        }
    }
    Ok(())
}

/// Dense `(M+L_cp)N × (M+L_cp)N` matrix with
/// `G[m,n] = Σ_p h_p e^{j2π φ(n) ν_p} A*((n−m) + τ_p, ν_p)`, where `φ` is the
/// sample clock selected by `model`.
pub fn time_channel_matrix(ch: &ChannelRealization, model: ChannelModel) -> Result<CMatrix> {
    check_paths(ch, model)?;
    Ok(channel_matrix_unchecked(&ch.paths, ch.dims, model))
}

pub(crate) fn channel_matrix_unchecked(paths: &[PathParams], d: Dims, model: ChannelModel) -> CMatrix {
    let size = d.frame_len();
    let mut g = CMatrix::zeros(size, size);
    for_each_tap(paths, model, d, |m, n, v| g[(m, n)] += v);
    g
}

/// Noiseless `G·s` evaluated tap by tap.
pub(crate) fn propagate(paths: &[PathParams], model: ChannelModel, d: Dims, s: &[C64]) -> Vec<C64> {
    let mut r = alloc::vec![ZERO; s.len()];
    for_each_tap(paths, model, d, |m, n, v| r[m] += v * s[n]);
    r
}

/// `r̃ = G·s̃ + w` with `w ~ CN(0, N0·I)`.
pub fn apply_channel<R: Rng + ?Sized>(
    s: &TimeSignal,
    g: &CMatrix,
    noise_psd: f64,
    rng: &mut R,
    d: Dims,
) -> Result<TimeSignal> {
    if !(noise_psd >= 0.0) {
        return Err(Error::Parameter("noise PSD must be non-negative"));
    }
    if !s.has_cp() {
        return Err(Error::Contract("apply_channel expects a CP-extended signal"));
    }
    if g.nrows() != s.samples().len() || g.ncols() != s.samples().len() {
        return Err(Error::Dimension { expected: g.ncols(), actual: s.samples().len() });
    }
    let x = crate::linalg::CVector::from_column_slice(s.samples());
    let mut y = g * x;
    if noise_psd > 0.0 {
        for v in y.iter_mut() {
            *v += complex_gaussian(rng, noise_psd);
        }
    }
    TimeSignal::new(y.as_slice().to_vec(), true, d)
}

/// Full link: modulate `x` with a CP, pass it through `g` plus noise, strip
/// the CP and demodulate.
pub fn transmit_frame<R: Rng + ?Sized>(
    x: &TfGrid,
    g: &CMatrix,
    noise_psd: f64,
    rng: &mut R,
    d: Dims,
) -> Result<TfGrid> {
    let s = tf_to_time(x, d, true)?;
    let r = apply_channel(&s, g, noise_psd, rng, d)?;
    time_to_tf(&remove_cp(&r, d)?, d)
}

/// `H_TF = (I_N⊗F_M)(I_N⊗R_CP)·G·(I_N⊗A_CP)(I_N⊗F_Mᴴ)`, evaluated symbol
/// block by symbol block.
pub fn effective_tf_channel(g: &CMatrix, d: Dims) -> Result<CMatrix> {
    let size = d.frame_len();
    if g.nrows() != size || g.ncols() != size {
        return Err(Error::Dimension { expected: size, actual: g.nrows() });
    }
    let (m, b, cp) = (d.m(), d.block_len(), d.cp_len());
    let scale = 1.0 / (m as f64).sqrt();
    // CP-extended time waveform of each unit subcarrier.
    let waveforms: Vec<Vec<C64>> =
        (0..m).map(|f| (0..b).map(|o| cis(((o + m - cp) % m * f) as f64 / m as f64) * scale).collect()).collect();
    let dft = Dft::new(m);
    let mut h = CMatrix::zeros(d.grid_len(), d.grid_len());
    let mut rx = alloc::vec![ZERO; size];
    let mut out = alloc::vec![ZERO; m];
    for sym in 0..d.n() {
        for (f, wave) in waveforms.iter().enumerate() {
            rx.iter_mut().for_each(|v| *v = ZERO);
            for (o, w) in wave.iter().enumerate() {
                let col = g.column(sym * b + o);
                for (r, gv) in rx.iter_mut().zip(col.iter()) {
                    *r += gv * w;
                }
            }
            let mut hcol = h.column_mut(sym * m + f);
            for rsym in 0..d.n() {
                let data = &rx[rsym * b + cp..(rsym + 1) * b];
                dft.apply(data, &mut out, false);
                for (i, v) in out.iter().enumerate() {
                    hcol[rsym * m + i] = *v;
                }
            }
        }
    }
    Ok(h)
}
