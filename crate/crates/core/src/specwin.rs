//! Frequency-domain windows of the FC filter bank.
//!
//! A window lives on the FFT-shifted `L`-point grid of one subband: index
//! `L/2` is the subband center. Stopband edges come from the channel edges
//! and the neighbouring passbands.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

const EDGE_EPS: f64 = 1e-9;

/// One subband's allocation at a given instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Allocation {
    pub center_hz: f64,
    pub scs_hz: f64,
    /// Active subcarriers; zero for a blank symbol.
    pub l_act: usize,
}

impl Allocation {
    pub fn passband(&self) -> (f64, f64) {
        let half = self.l_act as f64 / 2.0;
        (
            self.center_hz - self.scs_hz * half,
            self.center_hz + self.scs_hz * (half - 1.0),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BandEdges {
    pub pb_low: f64,
    pub pb_high: f64,
    pub sb_low: f64,
    pub sb_high: f64,
    pub center: f64,
}

/// Passband and stopband edges of every active allocation. Allocations may
/// come in any order; neighbours are found by center frequency. Inactive
/// allocations get `None`.
pub fn band_edges(allocs: &[Allocation], channel_bw_hz: f64) -> Result<Vec<Option<BandEdges>>> {
    let mut order: Vec<usize> = (0..allocs.len()).filter(|&i| allocs[i].l_act > 0).collect();
    order.sort_by(|&a, &b| allocs[a].center_hz.total_cmp(&allocs[b].center_hz));
    for pair in order.windows(2) {
        let lo = allocs[pair[0]].passband();
        let hi = allocs[pair[1]].passband();
        if lo.1 >= hi.0 {
            return Err(Error::config(format!(
                "passbands of subbands {} and {} overlap ({:.1} Hz >= {:.1} Hz)",
                pair[0], pair[1], lo.1, hi.0
            )));
        }
    }
    let half_bw = channel_bw_hz / 2.0;
    let mut out = vec![None; allocs.len()];
    for (rank, &i) in order.iter().enumerate() {
        let (pb_low, pb_high) = allocs[i].passband();
        if pb_low < -half_bw || pb_high > half_bw {
            return Err(Error::GuardBand(format!(
                "subband {i} passband [{pb_low}, {pb_high}] Hz leaves the channel"
            )));
        }
        let sb_low = if rank == 0 {
            -half_bw
        } else {
            allocs[order[rank - 1]].passband().1
        };
        let sb_high = if rank + 1 == order.len() {
            half_bw
        } else {
            allocs[order[rank + 1]].passband().0
        };
        out[i] = Some(BandEdges {
            pb_low,
            pb_high,
            sb_low,
            sb_high,
            center: allocs[i].center_hz,
        });
    }
    Ok(out)
}

/// Grid geometry shared by all windows of one subband.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowGrid {
    /// Long transform length N.
    pub n_long: usize,
    /// Subband transform length L.
    pub l_short: usize,
    pub sample_rate_hz: f64,
}

impl WindowGrid {
    pub fn bin_spacing(&self) -> f64 {
        self.sample_rate_hz / self.n_long as f64
    }

    fn offset(&self, f: f64, center: f64) -> f64 {
        (f - center) * self.n_long as f64 / self.sample_rate_hz
    }

    /// Stopband indices `(k_low, k_high)`.
    pub fn stopband_indices(&self, e: &BandEdges) -> (usize, usize) {
        let half = (self.l_short / 2) as i64;
        let lo = (self.offset(e.sb_low, e.center) - EDGE_EPS).ceil() as i64 + half;
        let hi = (self.offset(e.sb_high, e.center) + EDGE_EPS).floor() as i64 + half;
        (
            lo.clamp(0, self.l_short as i64 - 1) as usize,
            hi.clamp(0, self.l_short as i64 - 1) as usize,
        )
    }

    /// Window indices of the outermost active subcarriers, rounded outward
    /// when a subcarrier falls between bins.
    pub fn passband_indices(&self, e: &BandEdges) -> Result<(usize, usize)> {
        let half = (self.l_short / 2) as i64;
        let lo = (self.offset(e.pb_low, e.center) + EDGE_EPS).floor() as i64 + half;
        let hi = (self.offset(e.pb_high, e.center) - EDGE_EPS).ceil() as i64 + half;
        if lo < 0 || hi >= self.l_short as i64 || lo > hi {
            return Err(Error::GuardBand(format!(
                "passband [{}, {}] Hz does not fit the {}-bin subband grid",
                e.pb_low, e.pb_high, self.l_short
            )));
        }
        Ok((lo as usize, hi as usize))
    }

    /// Bins available for transition weights below and above the passband.
    pub fn guard_bins(&self, e: &BandEdges) -> Result<(usize, usize)> {
        let (k_low, k_high) = self.stopband_indices(e);
        let (p_low, p_high) = self.passband_indices(e)?;
        Ok((p_low.saturating_sub(k_low), k_high.saturating_sub(p_high)))
    }

    /// Default transition length: the guard band in whole bins, measured
    /// from the outermost subcarrier's band edge and limited by both sides.
    pub fn default_n_tb(&self, e: &BandEdges, scs_hz: f64) -> Result<usize> {
        let fbs = self.bin_spacing();
        let lo = ((e.pb_low - e.sb_low - scs_hz / 2.0) / fbs + EDGE_EPS).floor().max(0.0);
        let hi = ((e.sb_high - e.pb_high - scs_hz / 2.0) / fbs + EDGE_EPS).floor().max(0.0);
        let (g_lo, g_hi) = self.guard_bins(e)?;
        Ok((lo.min(hi) as usize).min(g_lo).min(g_hi))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FreqWindow {
    /// Window coefficients, FFT-shifted order.
    pub d: Vec<Complex64>,
    pub n_tb: usize,
    /// Ascending transition weights.
    pub h: Vec<f64>,
    pub k_low: usize,
    pub k_high: usize,
    pub phi_fd: f64,
}

impl FreqWindow {
    pub fn zeros(l: usize) -> Self {
        Self {
            d: vec![Complex64::new(0.0, 0.0); l],
            n_tb: 0,
            h: Vec::new(),
            k_low: 0,
            k_high: 0,
            phi_fd: 0.0,
        }
    }

    pub fn ones(l: usize) -> Self {
        Self {
            d: vec![Complex64::new(1.0, 0.0); l],
            n_tb: 0,
            h: Vec::new(),
            k_low: 0,
            k_high: l.saturating_sub(1),
            phi_fd: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.d.iter().all(|v| v.norm_sqr() == 0.0)
    }
}

/// Raised-cosine transition weights.
pub fn default_transition_weights(n_tb: usize) -> Vec<f64> {
    (0..n_tb)
        .map(|i| 0.5 * (1.0 - (PI * (i + 1) as f64 / (n_tb + 1) as f64).cos()))
        .collect()
}

/// Assembles zeros, `h`, ones, reversed `h`, zeros. With `h = None` the
/// default weights of length `n_tb` are used; otherwise `n_tb` is ignored.
pub fn design_window(
    edges: &BandEdges,
    grid: &WindowGrid,
    n_tb: usize,
    h: Option<&[f64]>,
) -> Result<FreqWindow> {
    let h = match h {
        Some(h) => {
            validate_weights(h)?;
            h.to_vec()
        }
        None => default_transition_weights(n_tb),
    };
    let n_tb = h.len();
    let l = grid.l_short;
    let (k_low, k_high) = grid.stopband_indices(edges);
    let (p_low, p_high) = grid.passband_indices(edges)?;
    let span = k_high + 1 - k_low.min(k_high + 1);
    if span < 2 * n_tb {
        return Err(Error::TransitionOverlap {
            required: 2 * n_tb,
            available: span,
        });
    }
    if p_low < k_low + n_tb || p_high + n_tb > k_high {
        let available = (p_low.saturating_sub(k_low)).min(k_high.saturating_sub(p_high));
        return Err(Error::TransitionOverlap {
            required: n_tb,
            available,
        });
    }
    let mut d = vec![Complex64::new(0.0, 0.0); l];
    for (i, &v) in h.iter().enumerate() {
        d[k_low + i] = Complex64::new(v, 0.0);
        d[k_high - i] = Complex64::new(v, 0.0);
    }
    for v in &mut d[k_low + n_tb..=k_high - n_tb] {
        *v = Complex64::new(1.0, 0.0);
    }
    Ok(FreqWindow {
        d,
        n_tb,
        h,
        k_low,
        k_high,
        phi_fd: 0.0,
    })
}

/// Adds a linear phase that delays the subband by `phi` low-rate samples.
pub fn apply_fractional_delay(w: &FreqWindow, phi: f64) -> Result<FreqWindow> {
    if !(0.0..=1.0).contains(&phi) {
        return Err(Error::range(format!("fractional delay {phi} not in [0, 1]")));
    }
    let l = w.d.len() as f64;
    let half = (w.d.len() / 2) as f64;
    let mut out = w.clone();
    if phi != 0.0 {
        for (q, v) in out.d.iter_mut().enumerate() {
            *v *= Complex64::from_polar(1.0, -2.0 * PI * (q as f64 - half) * phi / l);
        }
    }
    out.phi_fd = phi;
    Ok(out)
}

fn validate_weights(h: &[f64]) -> Result<()> {
    if let Some(i) = h.iter().position(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::range(format!(
            "transition weight {i} = {} not in [0, 1]",
            h[i]
        )));
    }
    if let Some(i) = h.windows(2).position(|p| p[1] <= p[0]) {
        return Err(Error::range(format!(
            "transition weights must be strictly increasing (entry {})",
            i + 1
        )));
    }
    Ok(())
}

/// Reads transition weights, one decimal value per line. Blank lines and
/// lines starting with `#` are skipped.
pub fn load_weights(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut h = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        h.push(line.parse::<f64>().map_err(|_| {
            Error::config(format!("{}:{}: `{line}` is not a number", path.display(), i + 1))
        })?);
    }
    validate_weights(&h)?;
    Ok(h)
}

pub fn save_weights(path: &Path, h: &[f64]) -> Result<()> {
    let mut text = String::new();
    for v in h {
        text.push_str(&format!("{v:?}\n"));
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
