//! Dirichlet-kernel interpolation bases for fractional delay/Doppler indices
//! and their derivatives with respect to the index.
//!
//! Grid indices run `0..M` and `0..N`. The delay kernel uses the
//! `exp(+jπ(M−1)x/M)` phase, which is the kernel whose derivative is the
//! delay gradient below; the Doppler kernel uses `exp(−jπ(N−1)x/N)`. Both are
//! periodic in the offset and reduce to unit impulses at integer offsets.

use std::f64::consts::PI;

use crate::Complex64;

/// Below this `|sin(πx/len)|` the closed form is replaced by the direct sum.
const SINGULAR: f64 = 1e-9;

/// `(1/len) · sin(πx)/sin(πx/len) · exp(sign·jπ(len−1)x/len)`.
fn dirichlet(x: f64, len: usize, sign: f64) -> Complex64 {
    let l = len as f64;
    let den = (PI * x / l).sin();
    if den.abs() < SINGULAR {
        let (s0, _) = power_sums(sign * 2.0 * PI * x / l, len);
        return s0 / l;
    }
    let mag = (PI * x).sin() / (l * den);
    Complex64::from_polar(1.0, sign * PI * (l - 1.0) * x / l) * mag
}

/// `(Σ_{u<len} r^u, Σ_{u<len} u·r^u)` with `r = exp(jθ)`.
fn power_sums(theta: f64, len: usize) -> (Complex64, Complex64) {
    let r = Complex64::from_polar(1.0, theta);
    let mut pow = Complex64::new(1.0, 0.0);
    let mut s0 = Complex64::new(0.0, 0.0);
    let mut s1 = Complex64::new(0.0, 0.0);
    for u in 0..len {
        s0 += pow;
        s1 += pow * u as f64;
        pow *= r;
    }
    (s0, s1)
}

/// Fractional delay basis `ω_τ[m]` for a (possibly fractional) row index.
pub fn delay_basis(l_ip: f64, m: usize) -> Vec<Complex64> {
    (0..m).map(|i| dirichlet(i as f64 - l_ip, m, 1.0)).collect()
}

/// Fractional Doppler basis `ω_ν[n]` for a (possibly fractional) column index.
pub fn doppler_basis(k_ip: f64, n: usize) -> Vec<Complex64> {
    (0..n).map(|i| dirichlet(i as f64 - k_ip, n, -1.0)).collect()
}

/// `∂ω_τ[m]/∂l = −(1/M) Σ_u j(2πu/M) exp(j2π(m−l)u/M)`.
pub fn delay_basis_gradient(l_ip: f64, m: usize) -> Vec<Complex64> {
    let len = m as f64;
    (0..m)
        .map(|i| {
            let (_, s1) = power_sums(2.0 * PI * (i as f64 - l_ip) / len, m);
            -Complex64::i() * s1 * (2.0 * PI / (len * len))
        })
        .collect()
}

/// `∂ω_ν[n]/∂k = (1/N) Σ_ς j(2πς/N) exp(−j2π(n−k)ς/N)`.
pub fn doppler_basis_gradient(k_ip: f64, n: usize) -> Vec<Complex64> {
    let len = n as f64;
    (0..n)
        .map(|i| {
            let (_, s1) = power_sums(-2.0 * PI * (i as f64 - k_ip) / len, n);
            Complex64::i() * s1 * (2.0 * PI / (len * len))
        })
        .collect()
}

/// Both gradients at once.
pub fn basis_gradients(l_ip: f64, k_ip: f64, m: usize, n: usize) -> (Vec<Complex64>, Vec<Complex64>) {
    (delay_basis_gradient(l_ip, m), doppler_basis_gradient(k_ip, n))
}
