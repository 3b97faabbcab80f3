//! Off-grid sparse Bayesian channel estimation by variational inference.
//!
//! The observation is the pilot window `y = A·Φ(l, k)·h + w`, where column
//! `i` of `Φ` is the column-wise vec of `ω_τ(l_i) ω_ν(k_i)ᵀ` restricted to the
//! window. Coefficients get a Gaussian posterior under per-path Gamma
//! precisions `(a, b)` and a Gamma noise precision `(c, d)`; the fractional
//! index offsets are refined by a first-order expansion of `Φ` whose
//! uncertainty `Σ_k`, `Σ_l` feeds back into the coefficient precision.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::basis::{delay_basis, delay_basis_gradient, doppler_basis, doppler_basis_gradient};
use super::pilot::{search_window, successive_search, ObservationWindow, PilotConfig};
use super::{derotate, reconstruct, EstimateResult};
use crate::linalg::{frobenius, hadamard, hermitian_inverse, spd_inverse, CMatrix, CVector};
use crate::otfs::DDFrame;
use crate::{Complex64, Error, Result};

/// Gamma hyperprior parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaPrior {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Default for GammaPrior {
    fn default() -> Self {
        Self { a: 1.0, b: 1.0, c: 1e-6, d: 1e-3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SblviConfig {
    /// `F`, iteration cap.
    pub max_iterations: usize,
    /// `Epsilon`, stop once the relative change of `H_DD` drops to this.
    pub tolerance: f64,
    /// Largest index correction applied per iteration, in bins.
    pub max_offset_step: f64,
    pub prior: GammaPrior,
    pub init: Initialization,
    /// Prior precision on each index offset, added to the offset
    /// information before inversion. Zero gives the bare update.
    pub offset_prior_precision: f64,
    pub hyper_update: HyperUpdate,
}

impl Default for SblviConfig {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            tolerance: 1e-6,
            max_offset_step: 0.5,
            prior: GammaPrior::default(),
            init: Initialization::Successive,
            offset_prior_precision: 1.0,
            hyper_update: HyperUpdate::Standard,
        }
    }
}

/// How the index estimates are seeded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Initialization {
    /// The `P` largest window cells, on-grid.
    PeakSearch,
    /// Peak picking with successive cancellation and a fractional Doppler
    /// start; resolves weak paths hidden behind sidelobes.
    Successive,
}

/// How the Gamma hyperparameters move between iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HyperUpdate {
    /// Prior plus the current iteration's sufficient statistics.
    Standard,
    /// Statistics summed over all iterations so far.
    Accumulating,
}

/// All variational quantities carried between iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct SblviState {
    pub mu_h: CVector,
    pub sigma_h: CMatrix,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: f64,
    pub d: f64,
    pub sigma_k: DMatrix<f64>,
    pub sigma_l: DMatrix<f64>,
    /// Delay offsets from the pilot row, fractional.
    pub l_hat: Vec<f64>,
    /// Doppler offsets from the pilot column, fractional.
    pub k_hat: Vec<f64>,
}

impl SblviState {
    fn initial(p: usize, prior: &GammaPrior, l0: Vec<f64>, k0: Vec<f64>) -> Self {
        Self {
            mu_h: CVector::zeros(p),
            sigma_h: CMatrix::identity(p, p),
            a: vec![prior.a; p],
            b: vec![prior.b; p],
            c: prior.c,
            d: prior.d,
            sigma_k: DMatrix::identity(p, p),
            sigma_l: DMatrix::identity(p, p),
            l_hat: l0,
            k_hat: k0,
        }
    }

    /// Expected noise precision `c/d`.
    pub fn noise_precision(&self) -> f64 {
        self.c / self.d
    }
}

/// Per-iteration snapshot passed to observers.
#[derive(Debug)]
pub struct IterationReport<'a> {
    pub iteration: usize,
    pub state: &'a SblviState,
    pub eps: f64,
}

/// Window-restricted dictionaries for the current index estimates.
struct Dictionaries {
    phi: CMatrix,
    phi_nu: CMatrix,
    phi_tau: CMatrix,
}

fn dictionaries(window: &ObservationWindow, l_hat: &[f64], k_hat: &[f64]) -> Dictionaries {
    let (m, n) = window.frame_dims();
    let pilot = window.pilot();
    let p = l_hat.len();
    let w = window.len();
    let mut phi = CMatrix::zeros(w, p);
    let mut phi_nu = CMatrix::zeros(w, p);
    let mut phi_tau = CMatrix::zeros(w, p);
    for i in 0..p {
        let l = pilot.delay as f64 + l_hat[i];
        let k = pilot.doppler as f64 + k_hat[i];
        let wt = delay_basis(l, m);
        let wn = doppler_basis(k, n);
        let dt = delay_basis_gradient(l, m);
        let dn = doppler_basis_gradient(k, n);
        for (row, &(r, c)) in window.cells.iter().enumerate() {
            phi[(row, i)] = wt[r] * wn[c];
            phi_nu[(row, i)] = wt[r] * dn[c];
            phi_tau[(row, i)] = dt[r] * wn[c];
        }
    }
    Dictionaries { phi, phi_nu, phi_tau }
}

fn real_to_complex(a: &DMatrix<f64>) -> CMatrix {
    a.map(|x| Complex64::new(x, 0.0))
}

/// Off-grid index correction `Σ·β·Re(b)` for one family of offsets, where
/// `b_i = conj(μ_i)(Φ_dᴴ y)_i − Σ_j (Φ_dᴴ Φ)_ij conj(R_ij)` and
/// `R = Σ_h + μ μᴴ`.
fn offset_step(
    phi_d: &CMatrix,
    phi: &CMatrix,
    y: &CVector,
    mu: &CVector,
    second_moment: &CMatrix,
    sigma: &DMatrix<f64>,
    beta: f64,
    clamp: f64,
) -> Vec<f64> {
    let p = mu.len();
    let proj = phi_d.adjoint() * y;
    let cross = phi_d.adjoint() * phi;
    let rhs = DVector::from_fn(p, |i, _| {
        let mut b = mu[i].conj() * proj[i];
        for j in 0..p {
            b -= cross[(i, j)] * second_moment[(i, j)].conj();
        }
        b.re
    });
    let step = sigma * rhs * beta;
    step.iter().map(|s| s.clamp(-clamp, clamp)).collect()
}

/// Variational SBL estimator.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sblvi {
    pub config: SblviConfig,
}

impl Sblvi {
    pub fn new(config: SblviConfig) -> Self {
        Self { config }
    }

    pub fn estimate(&self, y: &DDFrame, p: usize, pilot: &PilotConfig) -> Result<EstimateResult> {
        self.estimate_traced(y, p, pilot, |_| {}).map(|(r, _)| r)
    }

    /// Run the estimator, handing every iteration to `observer`, and return
    /// the final state alongside the result.
    pub fn estimate_traced<F>(
        &self,
        frame: &DDFrame,
        p: usize,
        pilot: &PilotConfig,
        mut observer: F,
    ) -> Result<(EstimateResult, SblviState)>
    where
        F: FnMut(&IterationReport<'_>),
    {
        let cfg = &self.config;
        if cfg.max_iterations == 0 {
            return Err(Error::InvalidConfig("iteration cap must be positive".into()));
        }
        let (m, n) = (frame.m(), frame.n());
        let window = pilot.window(m, n)?;
        let (l0, k0) = match cfg.init {
            Initialization::PeakSearch => {
                let peaks = search_window(frame, p, &window)?;
                (
                    peaks.delay_offsets.iter().map(|&v| v as f64).collect(),
                    peaks.doppler_offsets.iter().map(|&v| v as f64).collect(),
                )
            }
            Initialization::Successive => {
                let (peaks, frac) = successive_search(frame, p, &window)?;
                (peaks.delay_offsets.iter().map(|&v| v as f64).collect(), frac)
            }
        };
        let y = CVector::from_vec(window.observe(frame));
        let obs_len = window.len() as f64;
        let prior = cfg.prior;

        let mut st = SblviState::initial(p, &prior, l0, k0);
        let mut h_dd_prev: Option<CMatrix> = None;
        let mut eps = f64::INFINITY;
        let mut iterations = 0;

        for iter in 1..=cfg.max_iterations {
            iterations = iter;
            let dict = dictionaries(&window, &st.l_hat, &st.k_hat);
            let gram = dict.phi.adjoint() * &dict.phi;
            let gram_nu = dict.phi_nu.adjoint() * &dict.phi_nu;
            let gram_tau = dict.phi_tau.adjoint() * &dict.phi_tau;
            let h_h = &gram
                + hadamard(&gram_nu, &real_to_complex(&st.sigma_k))
                + hadamard(&gram_tau, &real_to_complex(&st.sigma_l));

            // coefficient posterior
            let beta = st.c / st.d;
            let mut precision = h_h.map(|z| z * beta);
            for i in 0..p {
                precision[(i, i)] += Complex64::new(st.a[i] / st.b[i], 0.0);
            }
            let sigma_h = hermitian_inverse(&precision, iter)?;
            let mu = (&sigma_h * (dict.phi.adjoint() * &y)).map(|z| z * beta);

            // Gamma hyperparameters
            let fit = &dict.phi * &mu;
            let residual: f64 = (&y - &fit).iter().map(|z| z.norm_sqr()).sum();
            let penalty = (mu.adjoint() * (&h_h - &gram) * &mu)[(0, 0)].re;
            let trace = (&h_h * &sigma_h).trace().re;
            let fit_cost = (residual + penalty + trace).max(0.0);
            match cfg.hyper_update {
                HyperUpdate::Standard => {
                    for i in 0..p {
                        st.a[i] = prior.a + 1.0;
                        st.b[i] = prior.b + mu[i].norm_sqr() + sigma_h[(i, i)].re;
                    }
                    st.c = prior.c + obs_len;
                    st.d = prior.d + fit_cost;
                }
                HyperUpdate::Accumulating => {
                    for i in 0..p {
                        st.a[i] += 1.0;
                        st.b[i] += mu[i].norm_sqr() + sigma_h[(i, i)].re;
                    }
                    st.c += obs_len;
                    st.d += fit_cost;
                }
            }
            st.mu_h = mu;
            st.sigma_h = sigma_h;

            // offset covariances and index refinement
            let beta = st.c / st.d;
            let second = &st.sigma_h + &st.mu_h * st.mu_h.adjoint();
            let conj_second = second.map(|z| z.conj());
            let mut info_k = hadamard(&gram_nu, &conj_second).map(|z| z.re * beta);
            let mut info_l = hadamard(&gram_tau, &conj_second).map(|z| z.re * beta);
            for i in 0..p {
                info_k[(i, i)] += cfg.offset_prior_precision;
                info_l[(i, i)] += cfg.offset_prior_precision;
            }
            st.sigma_k = spd_inverse(&info_k, iter)?;
            st.sigma_l = spd_inverse(&info_l, iter)?;
            let dk = offset_step(&dict.phi_nu, &dict.phi, &y, &st.mu_h, &second, &st.sigma_k, beta, cfg.max_offset_step);
            let dl = offset_step(&dict.phi_tau, &dict.phi, &y, &st.mu_h, &second, &st.sigma_l, beta, cfg.max_offset_step);
            for i in 0..p {
                st.k_hat[i] += dk[i];
                // delays cannot precede the pilot
                st.l_hat[i] = (st.l_hat[i] + dl[i]).max(0.0);
            }
            if st.mu_h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) || !st.d.is_finite() {
                return Err(Error::NumericalFailure { iteration: iter, reason: "non-finite posterior".into() });
            }

            let h_eff: Vec<Complex64> = st.mu_h.iter().map(|z| z / pilot.amplitude).collect();
            let (l_abs, k_abs) = absolute(&st, pilot);
            let h_dd = reconstruct(m, n, &h_eff, &l_abs, &k_abs);
            eps = match &h_dd_prev {
                None => f64::INFINITY,
                Some(prev) => relative_change(&h_dd, prev),
            };
            h_dd_prev = Some(h_dd);
            observer(&IterationReport { iteration: iter, state: &st, eps });
            if eps <= cfg.tolerance {
                break;
            }
        }

        let (l_est, k_est) = absolute(&st, pilot);
        let h_eff: Vec<Complex64> = st.mu_h.iter().map(|z| z / pilot.amplitude).collect();
        let h_max = derotate(&h_eff, &st.k_hat, pilot, m, n);
        let result = EstimateResult {
            h_dd: h_dd_prev.unwrap_or_else(|| CMatrix::zeros(m, n)),
            h_max,
            l_est,
            k_est,
            iterations,
            final_eps: eps,
        };
        Ok((result, st))
    }
}

fn absolute(st: &SblviState, pilot: &PilotConfig) -> (Vec<f64>, Vec<f64>) {
    (
        st.l_hat.iter().map(|l| l + pilot.delay as f64).collect(),
        st.k_hat.iter().map(|k| k + pilot.doppler as f64).collect(),
    )
}

fn relative_change(next: &CMatrix, prev: &CMatrix) -> f64 {
    let base = frobenius(prev);
    let diff = frobenius(&(next - prev));
    if base > 0.0 {
        diff / base
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Algorithm entry point with the default hyperpriors.
pub fn sblvi_estimate(
    y: &DDFrame,
    p: usize,
    pilot: &PilotConfig,
    max_iterations: usize,
    tolerance: f64,
) -> Result<EstimateResult> {
    Sblvi::new(SblviConfig { max_iterations, tolerance, ..Default::default() }).estimate(y, p, pilot)
}
