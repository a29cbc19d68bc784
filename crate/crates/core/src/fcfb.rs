//! Symbol-synchronized fast-convolution filter bank.
//!
//! Synthesis of one subband takes the low-rate stream `y`, pads it with
//! `l_l0` leading and `l_t,last` trailing zeros, cuts overlapping blocks of
//! `L` samples and runs each through
//! `s . IFFT_N . rotate . map . d . fftshift . FFT_L . a`, then composes the
//! blocks at high-rate offsets `q = I p`. Analysis is the exact adjoint.
//!
//! Block payloads tile the low-rate stream: each half subframe has `R`
//! blocks of `L 137/256` samples, the first one longer by `alpha / I`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dft;
use crate::error::{Error, Result};
use crate::numerology::{excess_samples, half_subframe_samples, NumerologyPlan, CP_PERIOD};
use crate::specwin::FreqWindow;

/// Default cap on the row count of [`SubbandFilter::dense_operator`].
pub const DENSE_CAP: usize = 16384;
/// Shortest subband transform.
pub const MIN_SHORT_LEN: usize = 256;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Ola,
    Ols,
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ola" => Ok(Scheme::Ola),
            "ols" => Ok(Scheme::Ols),
            _ => Err(Error::config(format!("unknown scheme `{s}` (ola|ols)"))),
        }
    }
}

/// Transform lengths and derived rates of one subband's bank.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FcConfig {
    pub n_long: usize,
    pub l_short: usize,
    pub interp: usize,
    pub sample_rate_hz: u64,
    pub f_bs: f64,
    pub scheme: Scheme,
    /// Blocks per half subframe.
    pub r_per_hsf: usize,
    /// Common low-rate payload length.
    pub l_s: usize,
    /// Low-rate excess samples of the first block of a half subframe.
    pub alpha_low: usize,
}

impl FcConfig {
    pub fn new(n_long: usize, l_short: usize, sample_rate_hz: u64, scheme: Scheme) -> Result<Self> {
        if !n_long.is_power_of_two() || !l_short.is_power_of_two() {
            return Err(Error::config(format!(
                "transform lengths must be powers of two (N = {n_long}, L = {l_short})"
            )));
        }
        if l_short < MIN_SHORT_LEN {
            return Err(Error::config(format!(
                "short transform length {l_short} is below the minimum {MIN_SHORT_LEN}"
            )));
        }
        if l_short > n_long {
            return Err(Error::config(format!(
                "short transform length {l_short} exceeds the long transform {n_long}"
            )));
        }
        let interp = n_long / l_short;
        let n_hsf = half_subframe_samples(sample_rate_hz)?;
        let alpha = excess_samples(n_hsf);
        if !alpha.is_multiple_of(interp) || n_hsf % interp != 0 {
            return Err(Error::config(format!(
                "interpolation factor {interp} does not divide the excess {alpha} of a half subframe"
            )));
        }
        let l_s = l_short * CP_PERIOD / 256;
        let n_s = interp * l_s;
        if !(n_hsf - alpha).is_multiple_of(n_s) {
            return Err(Error::config(format!(
                "block payload {n_s} does not tile the {n_hsf}-sample half subframe"
            )));
        }
        Ok(Self {
            n_long,
            l_short,
            interp,
            sample_rate_hz,
            f_bs: sample_rate_hz as f64 / n_long as f64,
            scheme,
            r_per_hsf: (n_hsf - alpha) / n_s,
            l_s,
            alpha_low: alpha / interp,
        })
    }

    pub fn low_rate_hz(&self) -> u64 {
        self.sample_rate_hz / self.interp as u64
    }

    /// Low-rate samples per half subframe.
    pub fn hsf_low(&self) -> usize {
        self.r_per_hsf * self.l_s + self.alpha_low
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Block {
    pub l_s: usize,
    pub l_l: usize,
    pub l_t: usize,
    /// Start within the padded low-rate stream.
    pub p: usize,
    /// Start within the padded high-rate output.
    pub q: usize,
    /// Payload start within the unpadded low-rate stream.
    pub payload_start: usize,
    pub half_subframe: usize,
    pub scheme: Scheme,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockSchedule {
    pub blocks: Vec<Block>,
    pub l_samp: usize,
    /// Leading zero padding of the low-rate stream.
    pub l_l0: usize,
    /// Trailing zero padding of the low-rate stream.
    pub l_t_last: usize,
    pub l_short: usize,
    pub interp: usize,
}

impl BlockSchedule {
    pub fn padded_len(&self) -> usize {
        self.l_l0 + self.l_samp + self.l_t_last
    }

    pub fn output_len(&self) -> usize {
        self.interp * self.padded_len()
    }

    pub fn pad(&self, y: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![ZERO; self.padded_len()];
        out[self.l_l0..self.l_l0 + y.len()].copy_from_slice(y);
        out
    }

    /// Index of the symbol whose span contains each block's payload start.
    pub fn owner_symbols(&self, plan: &NumerologyPlan) -> Vec<usize> {
        let starts = plan.symbol_starts();
        self.blocks
            .iter()
            .map(|b| starts.partition_point(|&s| s <= b.payload_start) - 1)
            .collect()
    }

    /// Every block payload lies inside one symbol or covers whole symbols.
    pub fn check_symbol_sync(&self, plan: &NumerologyPlan) -> Result<()> {
        let starts = plan.symbol_starts();
        let mut ends: Vec<usize> = starts[1..].to_vec();
        ends.push(plan.total_samples());
        for (r, b) in self.blocks.iter().enumerate() {
            let (b0, b1) = (b.payload_start, b.payload_start + b.l_s);
            let n = starts.partition_point(|&s| s <= b0) - 1;
            let inside = b1 <= ends[n];
            let aligned = starts[n] == b0 && ends.binary_search(&b1).is_ok();
            if !inside && !aligned {
                return Err(Error::Tiling {
                    half_subframe: b.half_subframe,
                    detail: format!(
                        "block {r} payload [{b0}, {b1}) splits a symbol boundary"
                    ),
                });
            }
        }
        Ok(())
    }
}

/// Block geometry for `half_subframes` half subframes.
pub fn plan_blocks(cfg: &FcConfig, half_subframes: usize) -> BlockSchedule {
    let l = cfg.l_short;
    let mut payload = Vec::new();
    for h in 0..half_subframes {
        for r in 0..cfg.r_per_hsf {
            let l_s = cfg.l_s + if r == 0 { cfg.alpha_low } else { 0 };
            payload.push((h, l_s));
        }
    }
    let geom = |l_s: usize| {
        let l_l = (l - l_s).div_ceil(2);
        (l_l, l - l_s - l_l)
    };
    let l_l0 = payload.first().map(|&(_, s)| geom(s).0).unwrap_or(0);
    let mut blocks = Vec::with_capacity(payload.len());
    let mut start = 0;
    for (h, l_s) in payload {
        let (l_l, l_t) = geom(l_s);
        let p = start + l_l0 - l_l;
        blocks.push(Block {
            l_s,
            l_l,
            l_t,
            p,
            q: cfg.interp * p,
            payload_start: start,
            half_subframe: h,
            scheme: cfg.scheme,
        });
        start += l_s;
    }
    let l_t_last = blocks.last().map(|b| b.p + l - l_l0 - start).unwrap_or(0);
    BlockSchedule {
        blocks,
        l_samp: start,
        l_l0,
        l_t_last,
        l_short: l,
        interp: cfg.interp,
    }
}

/// Block schedule for a low-rate plan, checked for symbol synchronism.
pub fn plan_schedule(cfg: &FcConfig, plan: &NumerologyPlan) -> Result<BlockSchedule> {
    if plan.sample_rate_hz != cfg.low_rate_hz() {
        return Err(Error::dim(format!(
            "plan runs at {} Hz, bank input rate is {} Hz",
            plan.sample_rate_hz,
            cfg.low_rate_hz()
        )));
    }
    let sched = plan_blocks(cfg, plan.half_subframes);
    if sched.l_samp != plan.total_samples() {
        return Err(Error::dim(format!(
            "blocks cover {} samples, plan has {}",
            sched.l_samp,
            plan.total_samples()
        )));
    }
    sched.check_symbol_sync(plan)?;
    Ok(sched)
}

/// Where one block's `L` bins land on the `N` grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinMapping {
    /// Subband center in units of the bin spacing.
    pub offset: i64,
    /// Destination of shifted bin 0.
    pub dst_start: usize,
    pub rotation: Complex64,
}

impl BinMapping {
    /// Phase reference is the first data sample of the high-rate output.
    pub fn new(offset: i64, block: &Block, sched: &BlockSchedule, n_long: usize) -> Self {
        let l = sched.l_short as i64;
        let n = n_long as i64;
        let t0 = block.q as i64 - (sched.interp * sched.l_l0) as i64;
        let phase = (offset * t0).rem_euclid(n) as f64 / n as f64;
        Self {
            offset,
            dst_start: (offset - l / 2).rem_euclid(n) as usize,
            rotation: Complex64::from_polar(1.0, 2.0 * PI * phase),
        }
    }

    pub fn dst(&self, j: usize, n_long: usize) -> usize {
        (self.dst_start + j) % n_long
    }
}

fn payload_mask(buf: &mut [Complex64], keep: std::ops::Range<usize>) {
    buf[..keep.start].fill(ZERO);
    buf[keep.end..].fill(ZERO);
}

/// One synthesis block: `L` low-rate samples in, `N` high-rate samples out.
pub fn synthesize_block(
    input: &[Complex64],
    window: &FreqWindow,
    map: &BinMapping,
    block: &Block,
    cfg: &FcConfig,
) -> Result<Vec<Complex64>> {
    let (l, n, i) = (cfg.l_short, cfg.n_long, cfg.interp);
    if input.len() != l || window.len() != l {
        return Err(Error::dim(format!(
            "block of {} samples and window of {} for L = {l}",
            input.len(),
            window.len()
        )));
    }
    let mut u = input.to_vec();
    if block.scheme == Scheme::Ola {
        payload_mask(&mut u, block.l_l..block.l_l + block.l_s);
    }
    dft::forward(&mut u);
    let mut z = vec![ZERO; n];
    let gain = map.rotation / l as f64;
    for (j, dj) in window.d.iter().enumerate() {
        if dj.norm_sqr() != 0.0 {
            z[map.dst(j, n)] += u[(j + l / 2) % l] * dj * gain;
        }
    }
    dft::inverse(&mut z);
    if block.scheme == Scheme::Ols {
        payload_mask(&mut z, i * block.l_l..i * (block.l_l + block.l_s));
    }
    Ok(z)
}

/// Adjoint of [`synthesize_block`].
pub fn analyze_block(
    input: &[Complex64],
    window: &FreqWindow,
    map: &BinMapping,
    block: &Block,
    cfg: &FcConfig,
) -> Result<Vec<Complex64>> {
    let (l, n, i) = (cfg.l_short, cfg.n_long, cfg.interp);
    if input.len() != n || window.len() != l {
        return Err(Error::dim(format!(
            "block of {} samples and window of {} for N = {n}, L = {l}",
            input.len(),
            window.len()
        )));
    }
    let mut z = input.to_vec();
    if block.scheme == Scheme::Ols {
        payload_mask(&mut z, i * block.l_l..i * (block.l_l + block.l_s));
    }
    dft::forward(&mut z);
    let mut u = vec![ZERO; l];
    let gain = map.rotation.conj() / l as f64;
    for (j, dj) in window.d.iter().enumerate() {
        if dj.norm_sqr() != 0.0 {
            u[(j + l / 2) % l] = z[map.dst(j, n)] * dj.conj() * gain;
        }
    }
    dft::inverse(&mut u);
    if block.scheme == Scheme::Ola {
        payload_mask(&mut u, block.l_l..block.l_l + block.l_s);
    }
    Ok(u)
}

/// A planned synthesis/analysis bank for one subband.
#[derive(Debug, Clone, PartialEq)]
pub struct SubbandFilter {
    pub cfg: FcConfig,
    pub schedule: BlockSchedule,
    /// One window per block.
    pub windows: Vec<FreqWindow>,
    /// Bin offset of the subband center per block.
    pub offsets: Vec<i64>,
}

impl SubbandFilter {
    pub fn new(
        cfg: FcConfig,
        schedule: BlockSchedule,
        windows: Vec<FreqWindow>,
        offsets: Vec<i64>,
    ) -> Result<Self> {
        let nb = schedule.blocks.len();
        if windows.len() != nb || offsets.len() != nb {
            return Err(Error::dim(format!(
                "{nb} blocks but {} windows and {} offsets",
                windows.len(),
                offsets.len()
            )));
        }
        if let Some(w) = windows.iter().find(|w| w.len() != cfg.l_short) {
            return Err(Error::dim(format!(
                "window of length {} for L = {}",
                w.len(),
                cfg.l_short
            )));
        }
        if schedule.l_short != cfg.l_short || schedule.interp != cfg.interp {
            return Err(Error::dim("schedule was planned for a different bank"));
        }
        Ok(Self {
            cfg,
            schedule,
            windows,
            offsets,
        })
    }

    /// Same window and offset on every block.
    pub fn uniform(cfg: FcConfig, schedule: BlockSchedule, window: FreqWindow, offset: i64) -> Result<Self> {
        let nb = schedule.blocks.len();
        Self::new(cfg, schedule, vec![window; nb], vec![offset; nb])
    }

    pub fn mapping(&self, r: usize) -> BinMapping {
        BinMapping::new(
            self.offsets[r],
            &self.schedule.blocks[r],
            &self.schedule,
            self.cfg.n_long,
        )
    }

    /// `F y_hat` for an already padded low-rate stream.
    pub fn apply(&self, y_hat: &[Complex64]) -> Result<Vec<Complex64>> {
        let sched = &self.schedule;
        if y_hat.len() != sched.padded_len() {
            return Err(Error::dim(format!(
                "padded input has {} samples, schedule expects {}",
                y_hat.len(),
                sched.padded_len()
            )));
        }
        let (l, n) = (self.cfg.l_short, self.cfg.n_long);
        let mut out = vec![ZERO; sched.output_len()];
        for (r, b) in sched.blocks.iter().enumerate() {
            if self.windows[r].is_zero() {
                continue;
            }
            let z = synthesize_block(&y_hat[b.p..b.p + l], &self.windows[r], &self.mapping(r), b, &self.cfg)?;
            for (o, v) in out[b.q..b.q + n].iter_mut().zip(z) {
                *o += v;
            }
        }
        Ok(out)
    }

    /// `F^H z` for a full-length high-rate vector.
    pub fn apply_adjoint(&self, z: &[Complex64]) -> Result<Vec<Complex64>> {
        let sched = &self.schedule;
        if z.len() != sched.output_len() {
            return Err(Error::dim(format!(
                "input has {} samples, schedule expects {}",
                z.len(),
                sched.output_len()
            )));
        }
        let (l, n) = (self.cfg.l_short, self.cfg.n_long);
        let mut out = vec![ZERO; sched.padded_len()];
        for (r, b) in sched.blocks.iter().enumerate() {
            if self.windows[r].is_zero() {
                continue;
            }
            let u = analyze_block(&z[b.q..b.q + n], &self.windows[r], &self.mapping(r), b, &self.cfg)?;
            for (o, v) in out[b.p..b.p + l].iter_mut().zip(u) {
                *o += v;
            }
        }
        Ok(out)
    }

    fn check_len(&self, y: &[Complex64]) -> Result<()> {
        if y.len() != self.schedule.l_samp {
            return Err(Error::dim(format!(
                "waveform has {} samples, schedule covers {}",
                y.len(),
                self.schedule.l_samp
            )));
        }
        Ok(())
    }

    /// Padded synthesis output, including the filter transients around the
    /// data span.
    pub fn synthesize_padded(&self, y: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(y)?;
        self.apply(&self.schedule.pad(y))
    }

    /// Synthesis output aligned with the data span, `I * L_samp` samples.
    pub fn synthesize(&self, y: &[Complex64]) -> Result<Vec<Complex64>> {
        let full = self.synthesize_padded(y)?;
        let i = self.cfg.interp;
        let h = i * self.schedule.l_l0;
        Ok(full[h..h + i * self.schedule.l_samp].to_vec())
    }

    /// Analysis of a full padded-span high-rate signal, cropped to the data
    /// span.
    pub fn analyze_padded(&self, z: &[Complex64]) -> Result<Vec<Complex64>> {
        let full = self.apply_adjoint(z)?;
        let h = self.schedule.l_l0;
        Ok(full[h..h + self.schedule.l_samp].to_vec())
    }

    /// Analysis of a high-rate signal aligned with the data span.
    pub fn analyze(&self, z: &[Complex64]) -> Result<Vec<Complex64>> {
        let i = self.cfg.interp;
        if z.len() != i * self.schedule.l_samp {
            return Err(Error::dim(format!(
                "signal has {} samples, expected {}",
                z.len(),
                i * self.schedule.l_samp
            )));
        }
        let mut full = vec![ZERO; self.schedule.output_len()];
        let h = i * self.schedule.l_l0;
        full[h..h + z.len()].copy_from_slice(z);
        self.analyze_padded(&full)
    }

    /// Explicit matrix of the bank, built from dense DFT matrices.
    pub fn dense_operator(&self, cap: usize) -> Result<DenseOperator> {
        let sched = &self.schedule;
        let rows = sched.output_len();
        let cols = sched.padded_len();
        if rows > cap {
            return Err(Error::range(format!(
                "dense operator needs {rows} rows, cap is {cap}"
            )));
        }
        let (l, n, i) = (self.cfg.l_short, self.cfg.n_long, self.cfg.interp);
        let mut data = vec![ZERO; rows * cols];
        let gain = (n as f64 / l as f64).sqrt();
        let w_l = |k: usize, t: usize| {
            Complex64::from_polar(1.0 / (l as f64).sqrt(), -2.0 * PI * ((k * t) % l) as f64 / l as f64)
        };
        let w_n_inv = |j: usize, k: usize| {
            Complex64::from_polar(1.0 / (n as f64).sqrt(), 2.0 * PI * ((j * k) % n) as f64 / n as f64)
        };
        for (r, b) in sched.blocks.iter().enumerate() {
            let d = &self.windows[r].d;
            let map = self.mapping(r);
            let a: Vec<f64> = (0..l)
                .map(|t| match b.scheme {
                    Scheme::Ola if t < b.l_l || t >= b.l_l + b.l_s => 0.0,
                    _ => 1.0,
                })
                .collect();
            let s: Vec<f64> = (0..n)
                .map(|j| match b.scheme {
                    Scheme::Ols if j < i * b.l_l || j >= i * (b.l_l + b.l_s) => 0.0,
                    _ => 1.0,
                })
                .collect();
            // Rows of M D P W_L A for the nonzero window bins.
            let active: Vec<(usize, Vec<Complex64>)> = (0..l)
                .filter(|&k| d[k].norm_sqr() != 0.0)
                .map(|k| {
                    let src = (k + l / 2) % l;
                    let row = (0..l).map(|t| map.rotation * d[k] * w_l(src, t) * a[t]).collect();
                    (map.dst(k, n), row)
                })
                .collect();
            for j in 0..n {
                if s[j] == 0.0 {
                    continue;
                }
                let out_row = &mut data[(b.q + j) * cols..(b.q + j + 1) * cols];
                for (dst, row) in &active {
                    let c = w_n_inv(j, *dst) * gain;
                    for (t, v) in row.iter().enumerate() {
                        out_row[b.p + t] += c * v;
                    }
                }
            }
        }
        Ok(DenseOperator { rows, cols, data })
    }
}

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Complex64>,
}

impl DenseOperator {
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.cols + c]
    }

    pub fn apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.cols {
            return Err(Error::dim(format!("vector of {} for {} columns", x.len(), self.cols)));
        }
        Ok(self
            .data
            .chunks_exact(self.cols)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn apply_adjoint(&self, z: &[Complex64]) -> Result<Vec<Complex64>> {
        if z.len() != self.rows {
            return Err(Error::dim(format!("vector of {} for {} rows", z.len(), self.rows)));
        }
        let mut out = vec![ZERO; self.cols];
        for (row, zr) in self.data.chunks_exact(self.cols).zip(z) {
            if zr.norm_sqr() == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(row) {
                *o += a.conj() * zr;
            }
        }
        Ok(out)
    }
}

/// Element-wise sum of equally long subband outputs.
pub fn combine_subbands(parts: &[Vec<Complex64>]) -> Result<Vec<Complex64>> {
    let Some(first) = parts.first() else {
        return Ok(Vec::new());
    };
    let mut out = vec![ZERO; first.len()];
    for (m, p) in parts.iter().enumerate() {
        if p.len() != out.len() {
            return Err(Error::dim(format!(
                "subband {m} has {} samples, subband 0 has {}",
                p.len(),
                out.len()
            )));
        }
        for (o, v) in out.iter_mut().zip(p) {
            *o += v;
        }
    }
    Ok(out)
}
