//! Delay-Doppler framing and OTFS modulation with rectangular pulses.
//!
//! Layout used everywhere in the crate:
//!
//! * a [`DDFrame`] is `M × N`, rows are delay bins `m`, columns Doppler bins `n`;
//! * the delay-time grid `X̃ = X · F_Nᴴ` is also `M × N` (row = delay sample
//!   within a block, column = time block);
//! * vectorization is column-wise, so time sample `q = n·M + m` holds
//!   `X̃[m, n]` and every block of `M` consecutive samples is one time block.
//!
//! With `G_tx = G_rx = I` the transmit chain is `s = vec(X · F_Nᴴ)` and the
//! receive chain is `Y = vec⁻¹(r) · F_N`.

use std::f64::consts::PI;

use rustfft::FftPlanner;

use crate::linalg::CMatrix;
use crate::{Complex64, Error, Result};

/// `M × N` complex delay-Doppler symbol grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DDFrame {
    symbols: CMatrix,
}

impl DDFrame {
    pub fn zeros(m: usize, n: usize) -> Result<Self> {
        check_dims(m, n)?;
        Ok(Self { symbols: CMatrix::zeros(m, n) })
    }

    pub fn from_matrix(symbols: CMatrix) -> Result<Self> {
        check_dims(symbols.nrows(), symbols.ncols())?;
        if symbols.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidValue("frame contains non-finite symbols".into()));
        }
        Ok(Self { symbols })
    }

    /// Number of delay bins.
    pub fn m(&self) -> usize {
        self.symbols.nrows()
    }

    /// Number of Doppler bins.
    pub fn n(&self) -> usize {
        self.symbols.ncols()
    }

    pub fn symbols(&self) -> &CMatrix {
        &self.symbols
    }

    pub fn symbols_mut(&mut self) -> &mut CMatrix {
        &mut self.symbols
    }

    pub fn into_matrix(self) -> CMatrix {
        self.symbols
    }

    pub fn get(&self, delay: usize, doppler: usize) -> Complex64 {
        self.symbols[(delay, doppler)]
    }
}

/// Sampled time-domain waveform of one OTFS frame (`N·M` samples at `T/M`).
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSignal {
    samples: Vec<Complex64>,
    m: usize,
    n: usize,
}

impl TimeSignal {
    pub fn new(samples: Vec<Complex64>, m: usize, n: usize) -> Result<Self> {
        check_dims(m, n)?;
        if samples.len() != m * n {
            return Err(Error::InvalidDimension(format!(
                "time signal has {} samples, expected N·M = {}",
                samples.len(),
                m * n
            )));
        }
        Ok(Self { samples, m, n })
    }

    pub fn zeros(m: usize, n: usize) -> Result<Self> {
        Self::new(vec![Complex64::new(0.0, 0.0); m * n], m, n)
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.samples
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|z| z.norm_sqr()).sum()
    }
}

fn check_dims(m: usize, n: usize) -> Result<()> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidDimension(format!("grid must be non-empty, got {m}×{n}")));
    }
    Ok(())
}

/// Unitary DFT matrix, entry `(a, b) = exp(−j2πab/n)/√n`.
pub fn dft_matrix(n: usize) -> Result<CMatrix> {
    if n == 0 {
        return Err(Error::InvalidDimension("DFT size must be positive".into()));
    }
    let scale = 1.0 / (n as f64).sqrt();
    Ok(CMatrix::from_fn(n, n, |a, b| {
        // reduce the exponent mod n to keep the phase argument small
        let k = (a * b) % n;
        Complex64::from_polar(scale, -2.0 * PI * k as f64 / n as f64)
    }))
}

/// Transmit chain: `s = vec(X · F_Nᴴ)`.
pub fn otfs_modulate(frame: &DDFrame) -> TimeSignal {
    let (m, n) = (frame.m(), frame.n());
    let fft = FftPlanner::<f64>::new().plan_fft_inverse(n);
    let scale = 1.0 / (n as f64).sqrt();
    let mut samples = vec![Complex64::new(0.0, 0.0); m * n];
    let mut row = vec![Complex64::new(0.0, 0.0); n];
    for delay in 0..m {
        for (k, v) in row.iter_mut().enumerate() {
            *v = frame.symbols[(delay, k)];
        }
        fft.process(&mut row);
        for (block, v) in row.iter().enumerate() {
            samples[block * m + delay] = v * scale;
        }
    }
    TimeSignal { samples, m, n }
}

/// Receive chain: fold `r` column-wise into the `M × N` delay-time grid and
/// apply `F_N` along each delay row.
pub fn otfs_demodulate(received: &TimeSignal) -> DDFrame {
    let (m, n) = (received.m, received.n);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let scale = 1.0 / (n as f64).sqrt();
    let mut symbols = CMatrix::zeros(m, n);
    let mut row = vec![Complex64::new(0.0, 0.0); n];
    for delay in 0..m {
        for (block, v) in row.iter_mut().enumerate() {
            *v = received.samples[block * m + delay];
        }
        fft.process(&mut row);
        for (k, v) in row.iter().enumerate() {
            symbols[(delay, k)] = v * scale;
        }
    }
    DDFrame { symbols }
}

/// Unit-energy QPSK data frame.
pub fn random_qpsk_frame<R: rand::Rng + ?Sized>(m: usize, n: usize, rng: &mut R) -> Result<DDFrame> {
    check_dims(m, n)?;
    let a = std::f64::consts::FRAC_1_SQRT_2;
    let symbols = CMatrix::from_fn(m, n, |_, _| {
        let re = if rng.random::<bool>() { a } else { -a };
        let im = if rng.random::<bool>() { a } else { -a };
        Complex64::new(re, im)
    });
    Ok(DDFrame { symbols })
}
