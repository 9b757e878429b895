//! Lattice pilot frames, pilot sequences and their delay-Doppler ambiguity
//! functions.

use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::{tf_to_dd, DdGrid, Dims, TfGrid};
use crate::linalg::{cis, CMatrix, C64, ZERO};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SequenceKind {
    #[default]
    AllOnes,
    Walsh,
    ZadoffChu,
}

/// Unit-modulus pilot sequence of length `len`.
///
/// `param` is the Sylvester–Hadamard row for [`SequenceKind::Walsh`] (default
/// `len/2`) and the root for [`SequenceKind::ZadoffChu`] (default 1). It is
/// ignored for all-ones.
pub fn make_pilot_sequence(kind: SequenceKind, len: usize, param: Option<usize>) -> Result<Vec<C64>> {
    if len == 0 {
        return Err(Error::Parameter("pilot sequence length must be positive"));
    }
    match kind {
        SequenceKind::AllOnes => Ok(alloc::vec![C64::new(1.0, 0.0); len]),
        SequenceKind::Walsh => {
            if !len.is_power_of_two() {
                return Err(Error::Parameter("Walsh sequences need a power-of-two length"));
            }
            let row = param.unwrap_or(len / 2);
            if row >= len {
                return Err(Error::Parameter("Walsh row out of range"));
            }
            Ok((0..len)
                .map(|i| {
                    let sign = if (row & i).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
                    C64::new(sign, 0.0)
                })
                .collect())
        }
        SequenceKind::ZadoffChu => {
            let root = param.unwrap_or(1);
            if root == 0 || gcd(root, len) != 1 {
                return Err(Error::Parameter("Zadoff-Chu root must be coprime with the length"));
            }
            let (u, nz) = (root as u128, len as u128);
            Ok((0..len as u128)
                .map(|n| {
                    // Exponent reduced mod 2·len keeps the phase exact for long sequences.
                    let e = if len % 2 == 1 { u * n * (n + 1) } else { u * n * n } % (2 * nz);
                    cis(-(e as f64) / (2.0 * len as f64))
                })
                .collect())
        }
    }
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Periodic pilot pattern along frequency and time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lattice {
    pub freq_spacing: usize,
    pub time_spacing: usize,
    pub freq_offset: usize,
    pub time_offset: usize,
}

impl Default for Lattice {
    fn default() -> Self {
        Self { freq_spacing: 2, time_spacing: 1, freq_offset: 0, time_offset: 0 }
    }
}

impl Lattice {
    fn validate(&self, d: Dims) -> Result<()> {
        if self.freq_spacing == 0 || self.time_spacing == 0 {
            return Err(Error::Parameter("lattice spacing must be positive"));
        }
        if self.freq_offset >= d.m() || self.time_offset >= d.n() {
            return Err(Error::Parameter("lattice offset outside the grid"));
        }
        Ok(())
    }

    /// Pilot positions `(subcarrier, symbol)` in column-major scan order.
    pub fn positions(&self, d: Dims) -> Vec<(usize, usize)> {
        (self.time_offset..d.n())
            .step_by(self.time_spacing)
            .flat_map(|t| (self.freq_offset..d.m()).step_by(self.freq_spacing).map(move |f| (f, t)))
            .collect()
    }

    /// `⌈(M − f₀)/D_f⌉ · ⌈(N − t₀)/D_t⌉`.
    pub fn pilot_count(&self, d: Dims) -> usize {
        (d.m() - self.freq_offset).div_ceil(self.freq_spacing) * (d.n() - self.time_offset).div_ceil(self.time_spacing)
    }

    /// Delay and Doppler period of the ambiguity-function replicas this
    /// lattice produces; a full-grid period means no replicas.
    pub fn af_period(&self, d: Dims) -> (usize, usize) {
        let delay = if d.m().is_multiple_of(self.freq_spacing) { d.m() / self.freq_spacing } else { d.m() };
        let doppler = if d.n().is_multiple_of(self.time_spacing) { d.n() / self.time_spacing } else { d.n() };
        (delay, doppler)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DataMode {
    #[default]
    None,
    Qpsk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Placement {
    #[default]
    Lattice,
    /// The lattice's pilot count, scattered uniformly over the grid.
    UniformRandom,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameSpec {
    pub dims: Dims,
    pub lattice: Lattice,
    pub sequence: SequenceKind,
    pub sequence_param: Option<usize>,
    pub pilot_power: f64,
    pub data_mode: DataMode,
    pub placement: Placement,
}

impl FrameSpec {
    /// All-ones pilots of unit power on the default lattice, no data.
    pub fn new(dims: Dims) -> Self {
        Self {
            dims,
            lattice: Lattice::default(),
            sequence: SequenceKind::AllOnes,
            sequence_param: None,
            pilot_power: 1.0,
            data_mode: DataMode::None,
            placement: Placement::Lattice,
        }
    }

    pub fn pilot_count(&self) -> usize {
        self.lattice.pilot_count(self.dims)
    }
}

/// An assembled TF frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub dims: Dims,
    pub tf: TfGrid,
    pub pilot_mask: DMatrix<bool>,
    pub pilot_only_tf: TfGrid,
}

impl Frame {
    pub fn pilot_count(&self) -> usize {
        self.pilot_mask.iter().filter(|&&p| p).count()
    }
}

fn qpsk<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let a = core::f64::consts::FRAC_1_SQRT_2;
    let re = if rng.random::<bool>() { a } else { -a };
    let im = if rng.random::<bool>() { a } else { -a };
    C64::new(re, im)
}

/// Lays the power-scaled pilot sequence onto the pilot positions (in
/// column-major scan order) and optionally fills every other resource element
/// with unit-energy QPSK.
pub fn assemble_frame<R: Rng + ?Sized>(spec: &FrameSpec, rng: &mut R) -> Result<Frame> {
    let d = spec.dims;
    spec.lattice.validate(d)?;
    if !(spec.pilot_power > 0.0) || !spec.pilot_power.is_finite() {
        return Err(Error::Parameter("pilot power must be positive"));
    }
    let count = spec.pilot_count();
    if count == 0 || count > d.grid_len() {
        return Err(Error::Parameter("pilot count must lie in [1, MN]"));
    }
    let positions: Vec<(usize, usize)> = match spec.placement {
        Placement::Lattice => spec.lattice.positions(d),
        Placement::UniformRandom => {
            let mut idx = rand::seq::index::sample(rng, d.grid_len(), count).into_vec();
            idx.sort_unstable();
            idx.into_iter().map(|i| (i % d.m(), i / d.m())).collect()
        }
    };
    let seq = make_pilot_sequence(spec.sequence, count, spec.sequence_param)?;
    let amp = spec.pilot_power.sqrt();
    let mut pilots = CMatrix::zeros(d.m(), d.n());
    let mut mask = DMatrix::from_element(d.m(), d.n(), false);
    for (&(f, t), s) in positions.iter().zip(&seq) {
        pilots[(f, t)] = s * amp;
        mask[(f, t)] = true;
    }
    let mut tf = pilots.clone();
    if spec.data_mode == DataMode::Qpsk {
        for (v, &is_pilot) in tf.iter_mut().zip(mask.iter()) {
            if !is_pilot {
                *v = qpsk(rng);
            }
        }
    }
    Ok(Frame { dims: d, tf: TfGrid::new(tf)?, pilot_mask: mask, pilot_only_tf: TfGrid::new(pilots)? })
}

/// DD-domain image of the pilot-only frame.
pub fn pilot_dd_image(frame: &Frame) -> DdGrid {
    tf_to_dd(&frame.pilot_only_tf, frame.dims).expect("shape taken from the frame")
}

/// Discrete ambiguity function of a DD grid:
///
/// `A[l,k] = Σ_{l',k'} X*[l',k'] X[[l'−l]_M, [k'−k]_N] α[l'−l, k'−k] e^{j2π k(l'−l)/(MN)}`
///
/// with `α[a,b] = e^{−j2πb/N}` for `a < 0` and 1 otherwise. `k` enters the
/// exponential as a signed Doppler.
pub fn discrete_af(x: &DdGrid) -> CMatrix {
    let v = x.values();
    let (m, n) = (v.nrows(), v.ncols());
    let mn = (m * n) as f64;
    CMatrix::from_fn(m, n, |l, k| {
        let k_signed = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
        let mut acc = ZERO;
        for lp in 0..m {
            for kp in 0..n {
                let dl = lp as i64 - l as i64;
                let dk = kp as i64 - k as i64;
                let shifted = v[(dl.rem_euclid(m as i64) as usize, dk.rem_euclid(n as i64) as usize)];
                let alpha = if dl < 0 { cis(-(dk as f64) / n as f64) } else { C64::new(1.0, 0.0) };
                acc += v[(lp, kp)].conj() * shifted * alpha * cis(k_signed * dl as f64 / mn);
            }
        }
        acc
    })
}

/// `|A[0,0]|` over the largest `|A|` outside the lattice replica positions
/// (multiples of `period`). Infinite when there are no sidelobes.
pub fn peak_to_sidelobe(af: &CMatrix, period: (usize, usize)) -> f64 {
    let peak = af[(0, 0)].norm();
    let mut side = 0.0f64;
    for k in 0..af.ncols() {
        for l in 0..af.nrows() {
            if l % period.0 == 0 && k % period.1 == 0 {
                continue;
            }
            side = side.max(af[(l, k)].norm());
        }
    }
    if side <= 1e-12 * peak {
        f64::INFINITY
    } else {
        peak / side
    }
}

/// Fraction of grid energy held by its `bins` strongest entries.
pub fn energy_concentration(x: &DdGrid, bins: usize) -> f64 {
    let mut e: Vec<f64> = x.as_vec().iter().map(|z| z.norm_sqr()).collect();
    let total: f64 = e.iter().sum();
    if total == 0.0 {
        return 0.0;
    }
    e.sort_unstable_by(|a, b| b.total_cmp(a));
    e.iter().take(bins).sum::<f64>() / total
}
