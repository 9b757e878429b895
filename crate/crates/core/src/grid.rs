//! Sample containers for the time-frequency, delay-Doppler and time domains
//! and the unitary maps between them.
//!
//! Every grid is an `M × N` matrix stored column-major, so `vec(X)` runs over
//! the subcarrier (or delay) index fastest. All DFTs are normalized by
//! `1/√n`, which makes each transform unitary.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{cis, CMatrix, C64, ZERO};

/// Frame geometry: `m` subcarriers, `n` OFDM symbols and a cyclic prefix of
/// `cp_len` samples per symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    m: usize,
    n: usize,
    cp_len: usize,
}

impl Dims {
    pub fn new(m: usize, n: usize, cp_len: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidDims("subcarrier count must be positive"));
        }
        if n == 0 {
            return Err(Error::InvalidDims("symbol count must be positive"));
        }
        if cp_len >= m {
            return Err(Error::InvalidDims("cyclic prefix must be shorter than a symbol"));
        }
        Ok(Self { m, n, cp_len })
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn cp_len(&self) -> usize {
        self.cp_len
    }

    /// `M·N`, the number of resource elements.
    #[inline]
    pub fn grid_len(&self) -> usize {
        self.m * self.n
    }

    /// Samples per symbol including the prefix.
    #[inline]
    pub fn block_len(&self) -> usize {
        self.m + self.cp_len
    }

    /// Length of the CP-extended time-domain frame.
    #[inline]
    pub fn frame_len(&self) -> usize {
        self.block_len() * self.n
    }

    /// Maps a Doppler column index in `[0, N)` to its signed value.
    #[inline]
    pub fn signed_doppler(&self, k: usize) -> i64 {
        if k <= self.n / 2 {
            k as i64
        } else {
            k as i64 - self.n as i64
        }
    }

    /// Inverse of [`Dims::signed_doppler`].
    #[inline]
    pub fn doppler_column(&self, k: i64) -> usize {
        k.rem_euclid(self.n as i64) as usize
    }
}

macro_rules! grid_type {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name(CMatrix);

        impl $name {
            pub fn new(values: CMatrix) -> Result<Self> {
                if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(Error::Numerical("grid entries must be finite"));
                }
                Ok(Self(values))
            }

            pub fn zeros(d: Dims) -> Self {
                Self(CMatrix::zeros(d.m(), d.n()))
            }

            /// Builds a grid from a column-major vector of length `M·N`.
            pub fn from_vec(d: Dims, v: &[C64]) -> Result<Self> {
                if v.len() != d.grid_len() {
                    return Err(Error::Dimension { expected: d.grid_len(), actual: v.len() });
                }
                Self::new(CMatrix::from_column_slice(d.m(), d.n(), v))
            }

            #[inline]
            pub fn values(&self) -> &CMatrix {
                &self.0
            }

            #[inline]
            pub fn into_inner(self) -> CMatrix {
                self.0
            }

            /// Column-major vectorization.
            #[inline]
            pub fn as_vec(&self) -> &[C64] {
                self.0.as_slice()
            }

            pub fn energy(&self) -> f64 {
                self.0.iter().map(|z| z.norm_sqr()).sum()
            }

            fn check(&self, d: Dims) -> Result<()> {
                if self.0.nrows() != d.m() {
                    return Err(Error::Dimension { expected: d.m(), actual: self.0.nrows() });
                }
                if self.0.ncols() != d.n() {
                    return Err(Error::Dimension { expected: d.n(), actual: self.0.ncols() });
                }
                Ok(())
            }
        }
    };
}

grid_type!(
    /// Time-frequency grid: rows are subcarriers, columns are OFDM symbols.
    TfGrid
);
grid_type!(
    /// Delay-Doppler grid: rows are delay bins, columns are Doppler bins.
    DdGrid
);

/// Time-domain sample stream, with or without cyclic prefixes.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSignal {
    samples: Vec<C64>,
    has_cp: bool,
}

impl TimeSignal {
    pub fn new(samples: Vec<C64>, has_cp: bool, d: Dims) -> Result<Self> {
        let expected = if has_cp { d.frame_len() } else { d.grid_len() };
        if samples.len() != expected {
            return Err(Error::Dimension { expected, actual: samples.len() });
        }
        Ok(Self { samples, has_cp })
    }

    #[inline]
    pub fn samples(&self) -> &[C64] {
        &self.samples
    }

    #[inline]
    pub fn has_cp(&self) -> bool {
        self.has_cp
    }

    pub fn into_samples(self) -> Vec<C64> {
        self.samples
    }
}

/// Unitary DFT of a fixed size with a precomputed twiddle table.
#[derive(Debug, Clone)]
pub(crate) struct Dft {
    size: usize,
    twiddle: Vec<C64>,
    scale: f64,
}

impl Dft {
    pub(crate) fn new(size: usize) -> Self {
        let twiddle = (0..size).map(|i| cis(-(i as f64) / size as f64)).collect();
        Self { size, twiddle, scale: 1.0 / (size as f64).sqrt() }
    }

    /// `out[k] = 1/√n Σ_t x[t]·e^{∓j2πkt/n}`; `inverse` selects the `+` sign.
    pub(crate) fn apply(&self, input: &[C64], out: &mut [C64], inverse: bool) {
        let n = self.size;
        for (k, o) in out.iter_mut().enumerate() {
            let mut acc = ZERO;
            for (t, x) in input.iter().enumerate() {
                let w = self.twiddle[(k * t) % n];
                acc += x * if inverse { w.conj() } else { w };
            }
            *o = acc * self.scale;
        }
    }
}

fn per_column(x: &CMatrix, inverse: bool) -> CMatrix {
    let dft = Dft::new(x.nrows());
    let mut out = CMatrix::zeros(x.nrows(), x.ncols());
    for (src, mut dst) in x.column_iter().zip(out.column_iter_mut()) {
        dft.apply(src.as_slice(), dst.as_mut_slice(), inverse);
    }
    out
}

fn per_row(x: &CMatrix, inverse: bool) -> CMatrix {
    let dft = Dft::new(x.ncols());
    let mut out = CMatrix::zeros(x.nrows(), x.ncols());
    let mut row = alloc::vec![ZERO; x.ncols()];
    let mut res = alloc::vec![ZERO; x.ncols()];
    for r in 0..x.nrows() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = x[(r, c)];
        }
        dft.apply(&row, &mut res, inverse);
        for (c, v) in res.iter().enumerate() {
            out[(r, c)] = *v;
        }
    }
    out
}

/// Per-symbol inverse DFT, optionally prefixing each `M`-sample block with its
/// last `L_cp` samples.
pub fn tf_to_time(x: &TfGrid, d: Dims, with_cp: bool) -> Result<TimeSignal> {
    x.check(d)?;
    let blocks = per_column(x.values(), true);
    let samples = if with_cp {
        let mut out = Vec::with_capacity(d.frame_len());
        for col in blocks.column_iter() {
            let s = col.as_slice();
            out.extend_from_slice(&s[d.m() - d.cp_len()..]);
            out.extend_from_slice(s);
        }
        out
    } else {
        blocks.as_slice().to_vec()
    };
    Ok(TimeSignal { samples, has_cp: with_cp })
}

/// Per-symbol forward DFT of a CP-free signal.
pub fn time_to_tf(r: &TimeSignal, d: Dims) -> Result<TfGrid> {
    if r.has_cp {
        return Err(Error::Contract("remove the cyclic prefix before time_to_tf"));
    }
    if r.samples.len() != d.grid_len() {
        return Err(Error::Dimension { expected: d.grid_len(), actual: r.samples.len() });
    }
    let blocks = CMatrix::from_column_slice(d.m(), d.n(), &r.samples);
    Ok(TfGrid(per_column(&blocks, false)))
}

/// Drops the first `L_cp` samples of every `(M + L_cp)`-sample block.
pub fn remove_cp(r: &TimeSignal, d: Dims) -> Result<TimeSignal> {
    if !r.has_cp {
        return Err(Error::Contract("signal carries no cyclic prefix"));
    }
    if r.samples.len() != d.frame_len() {
        return Err(Error::Dimension { expected: d.frame_len(), actual: r.samples.len() });
    }
    let samples = r.samples.chunks_exact(d.block_len()).flat_map(|b| b[d.cp_len()..].iter().copied()).collect();
    Ok(TimeSignal { samples, has_cp: false })
}

/// `vec(X_DD) = (F_N ⊗ F_Mᴴ)·vec(X_TF)`: inverse DFT down each column, then a
/// forward DFT along each row.
pub fn tf_to_dd(x: &TfGrid, d: Dims) -> Result<DdGrid> {
    x.check(d)?;
    Ok(DdGrid(per_row(&per_column(x.values(), true), false)))
}

/// `vec(X_TF) = (F_Nᴴ ⊗ F_M)·vec(X_DD)`.
pub fn dd_to_tf(x: &DdGrid, d: Dims) -> Result<TfGrid> {
    x.check(d)?;
    Ok(TfGrid(per_row(&per_column(x.values(), false), true)))
}
