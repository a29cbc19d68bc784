//! Low-rate CP-OFDM modulation and demodulation, plus the WOLA baseline.
//!
//! Subcarrier `p` of an `l_act`-wide allocation sits at `(p - l_act/2)` bins
//! from DC. Transforms are unitary.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dft;
use crate::error::{Error, Result};
use crate::numerology::NumerologyPlan;

/// Shortest transform length used for any allocation.
pub const MIN_TRANSFORM_LEN: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Modulation {
    #[serde(rename = "qpsk", alias = "QPSK")]
    Qpsk,
    #[serde(rename = "16qam", alias = "16QAM")]
    Qam16,
    #[serde(rename = "64qam", alias = "64QAM")]
    Qam64,
    #[serde(rename = "256qam", alias = "256QAM")]
    Qam256,
}

impl Modulation {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Modulation::Qpsk => 2,
            Modulation::Qam16 => 4,
            Modulation::Qam64 => 6,
            Modulation::Qam256 => 8,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Modulation::Qpsk => "qpsk",
            Modulation::Qam16 => "16qam",
            Modulation::Qam64 => "64qam",
            Modulation::Qam256 => "256qam",
        }
    }

    /// Gray mapping of one symbol's bits (each 0 or 1), unit average power.
    pub fn map(self, bits: &[u8]) -> Complex64 {
        debug_assert_eq!(bits.len(), self.bits_per_symbol());
        let s = |i: usize| 1.0 - 2.0 * f64::from(bits[i] & 1);
        match self {
            Modulation::Qpsk => Complex64::new(s(0), s(1)) / 2f64.sqrt(),
            Modulation::Qam16 => {
                Complex64::new(s(0) * (2.0 - s(2)), s(1) * (2.0 - s(3))) / 10f64.sqrt()
            }
            Modulation::Qam64 => Complex64::new(
                s(0) * (4.0 - s(2) * (2.0 - s(4))),
                s(1) * (4.0 - s(3) * (2.0 - s(5))),
            ) / 42f64.sqrt(),
            Modulation::Qam256 => Complex64::new(
                s(0) * (8.0 - s(2) * (4.0 - s(4) * (2.0 - s(6)))),
                s(1) * (8.0 - s(3) * (4.0 - s(5) * (2.0 - s(7)))),
            ) / 170f64.sqrt(),
        }
    }

    pub fn map_bits(self, bits: &[u8]) -> Vec<Complex64> {
        bits.chunks_exact(self.bits_per_symbol())
            .map(|c| self.map(c))
            .collect()
    }
}

/// Constellation points of one subband, one vector per CP-OFDM symbol.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GridSymbols {
    pub symbols: Vec<Vec<Complex64>>,
    /// Modulation of each symbol (constant within a symbol set).
    pub modulation: Vec<Modulation>,
}

impl GridSymbols {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

/// Low-rate time-domain signal of one subband.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LowRateWaveform {
    pub samples: Vec<Complex64>,
    /// CP start of every symbol.
    pub symbol_starts: Vec<usize>,
    /// `(l_ofdm, l_cp)` of every symbol.
    pub symbol_lens: Vec<(usize, usize)>,
}

impl LowRateWaveform {
    pub fn symbol(&self, n: usize) -> &[Complex64] {
        let (l, cp) = self.symbol_lens[n];
        let s = self.symbol_starts[n];
        &self.samples[s..s + l + cp]
    }

    pub fn min_cp(&self) -> Option<usize> {
        self.symbol_lens.iter().map(|&(_, cp)| cp).min()
    }
}

/// Smallest power-of-two transform that holds `l_act` subcarriers.
pub fn min_transform_length(l_act: usize) -> usize {
    l_act.max(1).next_power_of_two().max(MIN_TRANSFORM_LEN)
}

fn half_bin(l_act: usize) -> bool {
    l_act % 2 == 1
}

fn bin_of(p: usize, l_act: usize, l_ofdm: usize) -> usize {
    (p + l_ofdm - l_act / 2) % l_ofdm
}

/// Payload of one symbol: unitary pruned inverse DFT of `x`.
pub fn pruned_idft(x: &[Complex64], l_ofdm: usize) -> Result<Vec<Complex64>> {
    if x.len() > l_ofdm {
        return Err(Error::dim(format!(
            "{} subcarriers do not fit a transform of length {l_ofdm}",
            x.len()
        )));
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); l_ofdm];
    for (p, &v) in x.iter().enumerate() {
        buf[bin_of(p, x.len(), l_ofdm)] = v;
    }
    dft::inverse(&mut buf);
    let scale = 1.0 / (l_ofdm as f64).sqrt();
    if half_bin(x.len()) {
        for (t, v) in buf.iter_mut().enumerate() {
            *v *= Complex64::from_polar(scale, -PI * t as f64 / l_ofdm as f64);
        }
    } else {
        buf.iter_mut().for_each(|v| *v *= scale);
    }
    Ok(buf)
}

/// Unitary pruned DFT, the adjoint of [`pruned_idft`].
pub fn pruned_dft(payload: &[Complex64], l_act: usize) -> Result<Vec<Complex64>> {
    let l_ofdm = payload.len();
    if l_act > l_ofdm {
        return Err(Error::dim(format!(
            "{l_act} subcarriers do not fit a transform of length {l_ofdm}"
        )));
    }
    let mut buf = payload.to_vec();
    if half_bin(l_act) {
        for (t, v) in buf.iter_mut().enumerate() {
            *v *= Complex64::from_polar(1.0, PI * t as f64 / l_ofdm as f64);
        }
    }
    dft::forward(&mut buf);
    let scale = 1.0 / (l_ofdm as f64).sqrt();
    Ok((0..l_act)
        .map(|p| buf[bin_of(p, l_act, l_ofdm)] * scale)
        .collect())
}

/// One CP-OFDM symbol: pruned IDFT payload with its last `l_cp` samples
/// prepended.
pub fn modulate_symbol(x: &[Complex64], l_ofdm: usize, l_cp: usize) -> Result<Vec<Complex64>> {
    if l_cp >= l_ofdm {
        return Err(Error::dim(format!(
            "cyclic prefix {l_cp} must be shorter than the symbol {l_ofdm}"
        )));
    }
    let payload = pruned_idft(x, l_ofdm)?;
    let mut out = Vec::with_capacity(l_ofdm + l_cp);
    out.extend_from_slice(&payload[l_ofdm - l_cp..]);
    out.extend_from_slice(&payload);
    Ok(out)
}

/// Concatenates all symbols of a subband according to a low-rate plan.
pub fn modulate_subband(grid: &GridSymbols, plan: &NumerologyPlan) -> Result<LowRateWaveform> {
    if grid.len() != plan.len() {
        return Err(Error::dim(format!(
            "grid has {} symbols, plan has {}",
            grid.len(),
            plan.len()
        )));
    }
    let mut wf = LowRateWaveform::default();
    for (x, sym) in grid.symbols.iter().zip(&plan.symbols) {
        wf.symbol_starts.push(wf.samples.len());
        wf.symbol_lens.push((sym.n_ofdm, sym.n_cp));
        wf.samples
            .extend(modulate_symbol(x, sym.n_ofdm, sym.n_cp)?);
    }
    Ok(wf)
}

fn check_tau(l_cp: usize, tau: usize) -> Result<()> {
    if tau > l_cp {
        return Err(Error::range(format!(
            "timing offset {tau} exceeds the cyclic prefix {l_cp}"
        )));
    }
    Ok(())
}

/// Removes the CP at offset `l_cp - tau`, undoes the resulting circular
/// shift and returns the `l_act` active subcarriers.
pub fn demodulate_symbol(
    y: &[Complex64],
    l_ofdm: usize,
    l_cp: usize,
    l_act: usize,
    tau: usize,
) -> Result<Vec<Complex64>> {
    check_tau(l_cp, tau)?;
    if y.len() != l_ofdm + l_cp {
        return Err(Error::dim(format!(
            "symbol has {} samples, expected {}",
            y.len(),
            l_ofdm + l_cp
        )));
    }
    let window = &y[l_cp - tau..l_cp - tau + l_ofdm];
    let v: Vec<Complex64> = (0..l_ofdm).map(|i| window[(i + tau) % l_ofdm]).collect();
    pruned_dft(&v, l_act)
}

/// Rising squared-sine ramp of length `l`; `w(i) + w(l-1-i) = 1`.
pub fn wola_ramp(l: usize) -> Vec<f64> {
    (0..l)
        .map(|i| (PI * (i as f64 + 0.5) / (2.0 * l as f64)).sin().powi(2))
        .collect()
}

/// One WOLA-shaped symbol: the CP-OFDM symbol `sym` with ramped cyclic
/// extensions of `l_ext` samples on both sides.
pub fn wola_symbol(sym: &[Complex64], l_cp: usize, l_ext: usize) -> Result<Vec<Complex64>> {
    if l_cp > sym.len() {
        return Err(Error::dim("cyclic prefix longer than the symbol"));
    }
    let l = sym.len() - l_cp;
    if 2 * l_ext > l_cp {
        return Err(Error::range(format!(
            "WOLA extension {l_ext} exceeds half the cyclic prefix {l_cp}"
        )));
    }
    let ramp = wola_ramp(l_ext);
    let payload = &sym[l_cp..];
    let mut out = Vec::with_capacity(sym.len() + 2 * l_ext);
    out.extend((0..l_ext).map(|i| payload[l - l_cp - l_ext + i] * ramp[i]));
    out.extend_from_slice(sym);
    out.extend((0..l_ext).map(|i| payload[i] * ramp[l_ext - 1 - i]));
    Ok(out)
}

/// WOLA transmit shaping. The result starts `l_ext` samples before `y` and
/// is `2 * l_ext` samples longer.
pub fn wola_shape(y: &LowRateWaveform, l_ext: usize) -> Result<Vec<Complex64>> {
    if l_ext == 0 {
        return Ok(y.samples.clone());
    }
    let mut out = vec![Complex64::new(0.0, 0.0); y.samples.len() + 2 * l_ext];
    for n in 0..y.symbol_starts.len() {
        let seg = wola_symbol(y.symbol(n), y.symbol_lens[n].1, l_ext)?;
        let base = y.symbol_starts[n];
        for (o, v) in out[base..].iter_mut().zip(seg) {
            *o += v;
        }
    }
    Ok(out)
}

/// WOLA receive processing of one symbol. `start` is the CP start within
/// `stream`; the FFT window is extended by up to `l_ext` samples on each
/// side, shaped with ramps of twice that length and folded back.
pub fn wola_demodulate(
    stream: &[Complex64],
    start: usize,
    l_ofdm: usize,
    l_cp: usize,
    l_act: usize,
    tau: usize,
    l_ext: usize,
) -> Result<Vec<Complex64>> {
    check_tau(l_cp, tau)?;
    if start + l_ofdm + l_cp > stream.len() {
        return Err(Error::dim("symbol extends past the end of the stream"));
    }
    let l = l_ext.min(tau).min(l_cp - tau);
    let seg = &stream[start + l_cp - tau - l..start + l_cp - tau + l_ofdm + l];
    let ramp = wola_ramp(2 * l);
    let mut v = vec![Complex64::new(0.0, 0.0); l_ofdm];
    for (j, &x) in seg.iter().enumerate() {
        let w = if j < 2 * l {
            ramp[j]
        } else if j >= l_ofdm {
            ramp[l_ofdm + 2 * l - 1 - j]
        } else {
            1.0
        };
        v[(j + l_ofdm - l) % l_ofdm] += x * w;
    }
    let v: Vec<Complex64> = (0..l_ofdm).map(|i| v[(i + tau) % l_ofdm]).collect();
    pruned_dft(&v, l_act)
}
