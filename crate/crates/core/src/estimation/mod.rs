//! Embedded-pilot channel estimation.
//!
//! Every estimator returns `H_DD`, the delay-Doppler response to a unit pilot
//! at `(L_p, K_p)`, together with per-path coefficients. Coefficients in
//! [`EstimateResult::h_max`] are the physical path gains: the pilot amplitude
//! is divided out and the Doppler phase `exp(j2πκL_p/MN)` that the pilot row
//! picks up in the channel is removed.

mod baselines;
pub mod basis;
pub mod pilot;
pub mod sblvi;

use std::f64::consts::PI;

pub use baselines::{ep_threshold_estimate, lmmse_estimate};
pub use basis::{basis_gradients, delay_basis, delay_basis_gradient, doppler_basis, doppler_basis_gradient};
pub use pilot::{embed_pilot, initial_peak_search, ObservationWindow, PeakSearch, PilotConfig};
pub use sblvi::{sblvi_estimate, GammaPrior, HyperUpdate, Initialization, IterationReport, Sblvi, SblviConfig, SblviState};

use serde::{Deserialize, Serialize};

use crate::channel::{apply_channel, ChannelRealization};
use crate::linalg::CMatrix;
use crate::otfs::{otfs_demodulate, otfs_modulate, DDFrame};
use crate::{Complex64, Error, Result};

/// Output of any estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateResult {
    /// `M × N` response to a unit pilot.
    pub h_dd: CMatrix,
    /// Path coefficients, ordered like `l_est`/`k_est`.
    pub h_max: Vec<Complex64>,
    /// Absolute (frame) row index of each path.
    pub l_est: Vec<f64>,
    /// Absolute (frame) column index of each path, unwrapped around `K_p`.
    pub k_est: Vec<f64>,
    pub iterations: usize,
    pub final_eps: f64,
}

impl EstimateResult {
    pub fn num_paths(&self) -> usize {
        self.h_max.len()
    }
}

/// Estimator selector used by the environment and the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Sblvi,
    Lmmse,
    Ep,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 3] = [EstimatorKind::Sblvi, EstimatorKind::Lmmse, EstimatorKind::Ep];

    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::Sblvi => "sblvi",
            EstimatorKind::Lmmse => "lmmse",
            EstimatorKind::Ep => "ep",
        }
    }

    /// Run this estimator on a received frame.
    pub fn run(
        &self,
        y: &DDFrame,
        p: usize,
        pilot: &PilotConfig,
        noise_variance: f64,
        sblvi: &SblviConfig,
    ) -> Result<EstimateResult> {
        match self {
            EstimatorKind::Sblvi => Sblvi::new(*sblvi).estimate(y, p, pilot),
            EstimatorKind::Lmmse => lmmse_estimate(y, p, pilot, noise_variance),
            EstimatorKind::Ep => ep_threshold_estimate(y, pilot, noise_variance),
        }
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sblvi" => Ok(EstimatorKind::Sblvi),
            "lmmse" => Ok(EstimatorKind::Lmmse),
            "ep" => Ok(EstimatorKind::Ep),
            other => Err(Error::InvalidConfig(format!("unknown estimator '{other}'"))),
        }
    }
}

/// `H_DD = ω_τᵀ diag(h) ω_ν` over the full frame.
pub fn reconstruct(m: usize, n: usize, h: &[Complex64], l_abs: &[f64], k_abs: &[f64]) -> CMatrix {
    let mut out = CMatrix::zeros(m, n);
    for ((hi, &l), &k) in h.iter().zip(l_abs).zip(k_abs) {
        let wt = delay_basis(l, m);
        let wn = doppler_basis(k, n);
        for c in 0..n {
            let scaled = wn[c] * hi;
            for r in 0..m {
                out[(r, c)] += wt[r] * scaled;
            }
        }
    }
    out
}

/// Remove the pilot-row Doppler phase from per-unit-pilot coefficients.
pub(crate) fn derotate(h_eff: &[Complex64], doppler_offsets: &[f64], pilot: &PilotConfig, m: usize, n: usize) -> Vec<Complex64> {
    let mn = (m * n) as f64;
    h_eff
        .iter()
        .zip(doppler_offsets)
        .map(|(h, k)| h * Complex64::from_polar(1.0, -2.0 * PI * k * pilot.delay as f64 / mn))
        .collect()
}

/// Ground-truth unit-pilot response: a pilot-only frame pushed through the
/// noise-free channel and demodulated.
pub fn true_dd_response(ch: &ChannelRealization, pilot: &PilotConfig, m: usize, n: usize) -> Result<CMatrix> {
    let frame = embed_pilot(&DDFrame::zeros(m, n)?, pilot)?;
    let y = otfs_demodulate(&apply_channel(&otfs_modulate(&frame), ch)?);
    Ok(y.into_matrix().map(|z| z / pilot.amplitude))
}

/// `‖Ĥ − H‖²_F / ‖H‖²_F`.
pub fn nmse(h_est: &CMatrix, h_true: &CMatrix) -> Result<f64> {
    if h_est.shape() != h_true.shape() {
        return Err(Error::InvalidDimension(format!(
            "NMSE of {:?} against {:?}",
            h_est.shape(),
            h_true.shape()
        )));
    }
    let den: f64 = h_true.iter().map(|z| z.norm_sqr()).sum();
    if den == 0.0 {
        return Err(Error::UndefinedMetric("reference channel is zero".into()));
    }
    let num: f64 = h_est.iter().zip(h_true.iter()).map(|(a, b)| (a - b).norm_sqr()).sum();
    Ok(num / den)
}

pub fn nmse_db(h_est: &CMatrix, h_true: &CMatrix) -> Result<f64> {
    nmse(h_est, h_true).map(|v| 10.0 * v.log10())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CMatrix {
        CMatrix::from_fn(3, 4, |r, c| Complex64::new(r as f64 - 1.0, c as f64 * 0.5))
    }

    #[test]
    fn nmse_identities() {
        let h = sample();
        assert_eq!(nmse(&h, &h).unwrap(), 0.0);
        assert!((nmse(&CMatrix::zeros(3, 4), &h).unwrap() - 1.0).abs() < 1e-15);
        assert!((nmse(&h.map(|z| z * 2.0), &h).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn nmse_of_zero_reference_is_undefined() {
        let z = CMatrix::zeros(3, 4);
        assert!(matches!(nmse(&sample(), &z), Err(Error::UndefinedMetric(_))));
        assert!(matches!(nmse(&CMatrix::zeros(2, 2), &sample()), Err(Error::InvalidDimension(_))));
    }

    #[test]
    fn estimator_names_round_trip() {
        for k in EstimatorKind::ALL {
            assert_eq!(k.name().parse::<EstimatorKind>().unwrap(), k);
        }
        assert!("magic".parse::<EstimatorKind>().is_err());
    }
}
