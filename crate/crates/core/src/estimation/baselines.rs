//! On-grid reference estimators: LMMSE over the peak-search support and the
//! classic threshold read-out of the pilot window.

use super::pilot::{search_window, PilotConfig};
use super::{derotate, reconstruct, EstimateResult};
use crate::linalg::{hermitian_inverse, CMatrix, CVector};
use crate::otfs::DDFrame;
use crate::{Complex64, Error, Result};

/// LMMSE on the `P` strongest on-grid cells with prior `R_h = I/P`.
///
/// Uses `ĥ = (ΦᴴΦ + δ²R_h⁻¹)⁻¹ Φᴴ y` with `Φ` scaled by the pilot amplitude,
/// which equals `R_h Φᴴ(Φ R_h Φᴴ + δ²I)⁻¹ y`.
pub fn lmmse_estimate(y: &DDFrame, p: usize, pilot: &PilotConfig, noise_variance: f64) -> Result<EstimateResult> {
    if !(noise_variance >= 0.0) {
        return Err(Error::InvalidValue("noise variance must be non-negative".into()));
    }
    let (m, n) = (y.m(), y.n());
    let window = pilot.window(m, n)?;
    let peaks = search_window(y, p, &window)?;
    let obs = CVector::from_vec(window.observe(y));
    let l_abs: Vec<f64> = peaks.delays.iter().map(|&r| r as f64).collect();
    let k_off: Vec<f64> = peaks.doppler_offsets.iter().map(|&k| k as f64).collect();
    let k_abs: Vec<f64> = k_off.iter().map(|k| k + pilot.doppler as f64).collect();

    // on-grid atoms are single cells
    let mut phi = CMatrix::zeros(window.len(), p);
    for i in 0..p {
        let cell = (peaks.delays[i], peaks.dopplers[i]);
        let row = window.cells.iter().position(|&c| c == cell).expect("peak lies in window");
        phi[(row, i)] = Complex64::new(pilot.amplitude, 0.0);
    }
    let mut system = phi.adjoint() * &phi;
    for i in 0..p {
        system[(i, i)] += Complex64::new(noise_variance * p as f64, 0.0);
    }
    let inv = hermitian_inverse(&system, 0)?;
    let h_eff: Vec<Complex64> = (inv * (phi.adjoint() * obs)).iter().copied().collect();
    if h_eff.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NumericalFailure { iteration: 0, reason: "LMMSE solve produced non-finite values".into() });
    }
    Ok(EstimateResult {
        h_dd: reconstruct(m, n, &h_eff, &l_abs, &k_abs),
        h_max: derotate(&h_eff, &k_off, pilot, m, n),
        l_est: l_abs,
        k_est: k_abs,
        iterations: 1,
        final_eps: 0.0,
    })
}

/// Relative floor on the detection threshold so that round-off is not
/// mistaken for a path when the noise variance is zero.
const NOISELESS_FLOOR: f64 = 1e-9;

/// Declare a path at every window cell with `|Y| ≥ 3σ`.
pub fn ep_threshold_estimate(y: &DDFrame, pilot: &PilotConfig, noise_variance: f64) -> Result<EstimateResult> {
    if !(noise_variance >= 0.0) {
        return Err(Error::InvalidValue("noise variance must be non-negative".into()));
    }
    let (m, n) = (y.m(), y.n());
    let window = pilot.window(m, n)?;
    let threshold = (3.0 * noise_variance.sqrt()).max(NOISELESS_FLOOR * pilot.amplitude);
    let mut h_dd = CMatrix::zeros(m, n);
    let mut h_eff = Vec::new();
    let mut l_est = Vec::new();
    let mut k_off = Vec::new();
    for &(r, c) in &window.cells {
        let v = y.get(r, c);
        if v.norm() >= threshold {
            let h = v / pilot.amplitude;
            h_dd[(r, c)] = h;
            h_eff.push(h);
            l_est.push(r as f64);
            k_off.push(window.doppler_offset(c) as f64);
        }
    }
    Ok(EstimateResult {
        h_dd,
        h_max: derotate(&h_eff, &k_off, pilot, m, n),
        l_est,
        k_est: k_off.iter().map(|k| k + pilot.doppler as f64).collect(),
        iterations: 1,
        final_eps: 0.0,
    })
}
