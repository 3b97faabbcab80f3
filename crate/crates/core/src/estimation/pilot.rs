//! Embedded-pilot frame layout and the observation window around it.

use serde::{Deserialize, Serialize};

use crate::channel::ChannelConfig;
use crate::otfs::DDFrame;
use crate::{Complex64, Error, Result};

/// Single-impulse pilot with a guard rectangle.
///
/// The guard spans rows `L_p ± guard_delay` (no wrap, the delay axis is not
/// cyclic) and Doppler columns `K_p ± guard_doppler` taken modulo `N`. A
/// `guard_doppler` of `N/2` blanks the guard rows completely.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PilotConfig {
    pub delay: usize,
    pub doppler: usize,
    pub amplitude: f64,
    pub guard_delay: usize,
    pub guard_doppler: usize,
    /// Doppler half-width of the observation window, at most `guard_doppler`.
    pub window_doppler: usize,
}

/// Pilot power 10 dB above a unit-energy data symbol.
pub const DEFAULT_PILOT_AMPLITUDE: f64 = 3.162_277_660_168_379_5;

impl PilotConfig {
    /// Centred pilot with a full-width Doppler guard sized for delays up to
    /// `max_delay`; the observation window spans the whole guard.
    pub fn centered(m: usize, n: usize, max_delay: usize) -> Self {
        Self {
            delay: m / 2,
            doppler: n / 2,
            amplitude: DEFAULT_PILOT_AMPLITUDE,
            guard_delay: max_delay,
            guard_doppler: n / 2,
            window_doppler: n / 2,
        }
    }

    /// Centred pilot for an `m × n` frame carrying channels drawn from `cfg`:
    /// full-width Doppler guard, observation window `⌈κ_max⌉ + 2` columns
    /// either side of the pilot.
    pub fn for_channel(m: usize, n: usize, cfg: &ChannelConfig) -> Self {
        let reach = cfg.max_doppler_index().ceil() as usize + 2;
        Self { window_doppler: reach.min(n / 2), ..Self::centered(m, n, cfg.max_delay) }
    }

    pub fn validate(&self, m: usize, n: usize) -> Result<()> {
        if !(self.amplitude > 0.0) || !self.amplitude.is_finite() {
            return Err(Error::InvalidConfig("pilot amplitude must be positive".into()));
        }
        if self.delay >= m || self.doppler >= n {
            return Err(Error::InvalidConfig(format!(
                "pilot ({}, {}) lies outside the {m}×{n} frame",
                self.delay, self.doppler
            )));
        }
        if self.delay < self.guard_delay || self.delay + self.guard_delay >= m {
            return Err(Error::InvalidConfig(format!(
                "delay guard {} around row {} exceeds the {m} delay bins",
                self.guard_delay, self.delay
            )));
        }
        if 2 * self.guard_doppler > n {
            return Err(Error::InvalidConfig(format!(
                "Doppler guard {} exceeds half of the {n} Doppler bins",
                self.guard_doppler
            )));
        }
        if self.window_doppler > self.guard_doppler {
            return Err(Error::InvalidConfig(format!(
                "observation half-width {} exceeds the Doppler guard {}",
                self.window_doppler, self.guard_doppler
            )));
        }
        Ok(())
    }

    /// Check that the guards cover the delay and Doppler spread of `cfg`.
    pub fn check_channel(&self, n: usize, cfg: &ChannelConfig) -> Result<()> {
        let kappa = cfg.max_doppler_index().ceil() as usize + 1;
        if self.guard_delay < cfg.max_delay {
            return Err(Error::InvalidConfig(format!(
                "delay guard {} is below the maximum delay {}",
                self.guard_delay, cfg.max_delay
            )));
        }
        if self.guard_doppler < kappa.min(n / 2) || self.window_doppler < kappa.min(n / 2) {
            return Err(Error::InvalidConfig(format!(
                "Doppler guard {} is below ⌈κ_max⌉ + 1 = {kappa}",
                self.guard_doppler
            )));
        }
        Ok(())
    }

    fn columns(&self, n: usize, half: usize) -> Vec<usize> {
        let width = (2 * half + 1).min(n);
        (0..width).map(|i| (self.doppler + n + i - half) % n).collect()
    }

    /// Number of cells blanked by the guard rectangle.
    pub fn guard_cells(&self, n: usize) -> usize {
        (2 * self.guard_delay + 1) * (2 * self.guard_doppler + 1).min(n)
    }

    /// Cells used for estimation: rows `L_p ..= L_p + guard_delay` (delays are
    /// causal) across columns `K_p ± window_doppler`.
    pub fn window(&self, m: usize, n: usize) -> Result<ObservationWindow> {
        self.validate(m, n)?;
        let columns = self.columns(n, self.window_doppler);
        let rows: Vec<usize> = (self.delay..=self.delay + self.guard_delay).collect();
        let mut cells = Vec::with_capacity(rows.len() * columns.len());
        for &c in &columns {
            for &r in &rows {
                cells.push((r, c));
            }
        }
        Ok(ObservationWindow { rows, columns, cells, pilot: *self, m, n })
    }
}

/// Ordered list of observed cells, flattened column-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationWindow {
    pub rows: Vec<usize>,
    pub columns: Vec<usize>,
    pub cells: Vec<(usize, usize)>,
    pilot: PilotConfig,
    m: usize,
    n: usize,
}

impl ObservationWindow {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn observe(&self, y: &DDFrame) -> Vec<Complex64> {
        self.cells.iter().map(|&(r, c)| y.get(r, c)).collect()
    }

    /// Signed Doppler offset of column `c` from the pilot, in `(−N/2, N/2]`.
    pub fn doppler_offset(&self, c: usize) -> i64 {
        let n = self.n as i64;
        let mut d = (c as i64 - self.pilot.doppler as i64).rem_euclid(n);
        if d > n / 2 {
            d -= n;
        }
        d
    }

    pub fn frame_dims(&self) -> (usize, usize) {
        (self.m, self.n)
    }

    pub fn pilot(&self) -> &PilotConfig {
        &self.pilot
    }

    /// Integer delays keep a path's energy in its own row, so only the
    /// adjacent Doppler cells of the same row count as neighbours.
    fn neighbours(&self, a: (usize, usize), b: (usize, usize)) -> bool {
        let n = self.n as i64;
        let dc = (a.1 as i64 - b.1 as i64).rem_euclid(n);
        a.0 == b.0 && dc.min(n - dc) <= 1
    }
}

/// Place the pilot impulse, blank the guard rectangle, keep data elsewhere.
pub fn embed_pilot(data: &DDFrame, cfg: &PilotConfig) -> Result<DDFrame> {
    let (m, n) = (data.m(), data.n());
    cfg.validate(m, n)?;
    let mut out = data.clone();
    let zero = Complex64::new(0.0, 0.0);
    for c in cfg.columns(n, cfg.guard_doppler) {
        for r in cfg.delay - cfg.guard_delay..=cfg.delay + cfg.guard_delay {
            out.symbols_mut()[(r, c)] = zero;
        }
    }
    out.symbols_mut()[(cfg.delay, cfg.doppler)] = Complex64::new(cfg.amplitude, 0.0);
    Ok(out)
}

/// Result of the coarse on-grid path search.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakSearch {
    /// Absolute row of each peak, strongest first.
    pub delays: Vec<usize>,
    /// Absolute column of each peak.
    pub dopplers: Vec<usize>,
    /// `l⁰ − L_p`.
    pub delay_offsets: Vec<i64>,
    /// `k⁰ − K_p`, wrapped to `(−N/2, N/2]`.
    pub doppler_offsets: Vec<i64>,
}

/// Pick the `P` largest-magnitude cells of the observation window.
///
/// After each pick the adjacent Doppler cells of the same row are excluded so
/// that energy leaking from a fractional path does not produce duplicate
/// picks. If exclusion leaves too few candidates the remaining slots are
/// filled by magnitude.
pub fn initial_peak_search(y: &DDFrame, p: usize, cfg: &PilotConfig) -> Result<PeakSearch> {
    let window = cfg.window(y.m(), y.n())?;
    search_window(y, p, &window)
}

pub(crate) fn search_window(y: &DDFrame, p: usize, window: &ObservationWindow) -> Result<PeakSearch> {
    if p == 0 {
        return Err(Error::InvalidConfig("number of paths must be positive".into()));
    }
    if window.len() < p {
        return Err(Error::InvalidConfig(format!(
            "observation window has {} cells, fewer than P = {p}",
            window.len()
        )));
    }
    let mut order: Vec<usize> = (0..window.len()).collect();
    // stable sort keeps column-wise order among equal magnitudes
    order.sort_by(|&a, &b| {
        let (ra, ca) = window.cells[a];
        let (rb, cb) = window.cells[b];
        y.get(rb, cb).norm().total_cmp(&y.get(ra, ca).norm())
    });
    let mut picked: Vec<usize> = Vec::with_capacity(p);
    for &i in &order {
        if picked.len() == p {
            break;
        }
        if picked.iter().all(|&j| !window.neighbours(window.cells[i], window.cells[j])) {
            picked.push(i);
        }
    }
    for &i in &order {
        if picked.len() == p {
            break;
        }
        if !picked.contains(&i) {
            picked.push(i);
        }
    }
    picked.sort_by(|&a, &b| {
        let (ra, ca) = window.cells[a];
        let (rb, cb) = window.cells[b];
        y.get(rb, cb).norm().total_cmp(&y.get(ra, ca).norm())
    });
    let pilot = window.pilot();
    let delays: Vec<usize> = picked.iter().map(|&i| window.cells[i].0).collect();
    let dopplers: Vec<usize> = picked.iter().map(|&i| window.cells[i].1).collect();
    Ok(PeakSearch {
        delay_offsets: delays.iter().map(|&r| r as i64 - pilot.delay as i64).collect(),
        doppler_offsets: dopplers.iter().map(|&c| window.doppler_offset(c)).collect(),
        delays,
        dopplers,
    })
}

/// Peak search on a successively cancelled residual.
///
/// Each round takes the strongest remaining cell, estimates its fractional
/// Doppler offset from the larger adjacent cell (for a sinc-shaped kernel
/// `|Y(k±1)| / (|Y(k)| + |Y(k±1)|)` equals the offset), fits the coefficient
/// of that off-grid atom by least squares over the window and subtracts its
/// response before the next round. Returns the on-grid picks and the
/// fractional Doppler offsets from the pilot column.
pub(crate) fn successive_search(y: &DDFrame, p: usize, window: &ObservationWindow) -> Result<(PeakSearch, Vec<f64>)> {
    if p == 0 {
        return Err(Error::InvalidConfig("number of paths must be positive".into()));
    }
    if window.len() < p {
        return Err(Error::InvalidConfig(format!(
            "observation window has {} cells, fewer than P = {p}",
            window.len()
        )));
    }
    let (m, n) = window.frame_dims();
    let pilot = *window.pilot();
    let mut residual = y.clone();
    let mut picked: Vec<(usize, usize)> = Vec::with_capacity(p);
    let mut fractional = Vec::with_capacity(p);
    for _ in 0..p {
        let best = window
            .cells
            .iter()
            .copied()
            .filter(|c| !picked.contains(c))
            .max_by(|a, b| residual.get(a.0, a.1).norm().total_cmp(&residual.get(b.0, b.1).norm()))
            .expect("window holds at least P cells");
        let (r, c) = best;
        let centre = residual.get(r, c).norm();
        let up = residual.get(r, (c + 1) % n).norm();
        let down = residual.get(r, (c + n - 1) % n).norm();
        let shift = if centre == 0.0 {
            0.0
        } else if up >= down {
            up / (centre + up)
        } else {
            -down / (centre + down)
        };
        let offset = window.doppler_offset(c) as f64 + shift.clamp(-0.5, 0.5);
        let wn = super::basis::doppler_basis(pilot.doppler as f64 + offset, n);
        let wt = super::basis::delay_basis(r as f64, m);
        let (mut num, mut den) = (Complex64::new(0.0, 0.0), 0.0);
        for &(rr, cc) in &window.cells {
            let atom = wt[rr] * wn[cc];
            num += atom.conj() * residual.get(rr, cc);
            den += atom.norm_sqr();
        }
        if den > 0.0 {
            let coeff = num / den;
            for cc in 0..n {
                let v = coeff * wn[cc];
                residual.symbols_mut()[(r, cc)] -= v;
            }
        }
        picked.push(best);
        fractional.push(offset);
    }
    let search = PeakSearch {
        delays: picked.iter().map(|c| c.0).collect(),
        dopplers: picked.iter().map(|c| c.1).collect(),
        delay_offsets: picked.iter().map(|c| c.0 as i64 - pilot.delay as i64).collect(),
        doppler_offsets: picked.iter().map(|c| window.doppler_offset(c.1)).collect(),
    };
    Ok((search, fractional))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> PilotConfig {
        PilotConfig { delay: 8, doppler: 8, amplitude: 2.0, guard_delay: 2, guard_doppler: 3, window_doppler: 3 }
    }

    fn ones(m: usize, n: usize) -> DDFrame {
        DDFrame::from_matrix(crate::linalg::CMatrix::from_element(m, n, Complex64::new(1.0, 0.0))).unwrap()
    }

    #[test]
    fn zero_data_leaves_only_the_pilot() {
        let f = embed_pilot(&DDFrame::zeros(16, 16).unwrap(), &cfg()).unwrap();
        let nz: Vec<_> = f.symbols().iter().filter(|z| z.norm() > 0.0).collect();
        assert_eq!(nz.len(), 1);
        assert_eq!(f.get(8, 8), Complex64::new(2.0, 0.0));
    }

    #[test]
    fn guard_is_blank_and_data_count_matches() {
        let f = embed_pilot(&ones(16, 16), &cfg()).unwrap();
        for r in 6..=10 {
            for c in 5..=11 {
                if (r, c) != (8, 8) {
                    assert_eq!(f.get(r, c).norm(), 0.0);
                }
            }
        }
        let data = f.symbols().iter().filter(|z| **z == Complex64::new(1.0, 0.0)).count();
        assert_eq!(data, 16 * 16 - (2 * 2 + 1) * (2 * 3 + 1));
        assert_eq!(cfg().guard_cells(16), 35);
    }

    #[test]
    fn full_doppler_guard_blanks_whole_rows() {
        let c = PilotConfig { guard_doppler: 8, window_doppler: 8, ..cfg() };
        let f = embed_pilot(&ones(16, 16), &c).unwrap();
        for r in 6..=10 {
            for col in 0..16 {
                if (r, col) != (8, 8) {
                    assert_eq!(f.get(r, col).norm(), 0.0);
                }
            }
        }
        assert_eq!(c.window(16, 16).unwrap().columns.len(), 16);
    }

    #[test]
    fn oversized_guards_are_rejected() {
        let too_deep = PilotConfig { guard_delay: 9, ..cfg() };
        assert!(matches!(embed_pilot(&ones(16, 16), &too_deep), Err(Error::InvalidConfig(_))));
        let too_wide = PilotConfig { guard_doppler: 9, ..cfg() };
        assert!(matches!(embed_pilot(&ones(16, 16), &too_wide), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn single_dominant_cell() {
        let mut y = DDFrame::zeros(16, 16).unwrap();
        y.symbols_mut()[(9, 6)] = Complex64::new(0.0, 3.0);
        let peaks = initial_peak_search(&y, 1, &cfg()).unwrap();
        assert_eq!((peaks.delays[0], peaks.dopplers[0]), (9, 6));
        assert_eq!((peaks.delay_offsets[0], peaks.doppler_offsets[0]), (1, -2));
    }

    #[test]
    fn two_spikes_in_magnitude_order() {
        let mut y = DDFrame::zeros(16, 16).unwrap();
        y.symbols_mut()[(8, 10)] = Complex64::new(3.0, 0.0);
        y.symbols_mut()[(10, 6)] = Complex64::new(-5.0, 0.0);
        let peaks = initial_peak_search(&y, 2, &cfg()).unwrap();
        assert_eq!(peaks.delays, vec![10, 8]);
        assert_eq!(peaks.dopplers, vec![6, 10]);
    }

    #[test]
    fn neighbours_of_a_peak_are_skipped() {
        let mut y = DDFrame::zeros(16, 16).unwrap();
        y.symbols_mut()[(8, 8)] = Complex64::new(5.0, 0.0);
        y.symbols_mut()[(8, 9)] = Complex64::new(4.0, 0.0);
        y.symbols_mut()[(10, 5)] = Complex64::new(1.0, 0.0);
        let peaks = initial_peak_search(&y, 2, &cfg()).unwrap();
        assert_eq!(peaks.dopplers, vec![8, 5]);
    }

    #[test]
    fn window_too_small() {
        let tiny = PilotConfig { guard_delay: 0, guard_doppler: 0, window_doppler: 0, ..cfg() };
        let y = DDFrame::zeros(16, 16).unwrap();
        assert!(matches!(initial_peak_search(&y, 2, &tiny), Err(Error::InvalidConfig(_))));
    }
}
