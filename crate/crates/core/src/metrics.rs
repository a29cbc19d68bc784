//! EVM and spectral measurements.

use num_complex::Complex64;
use serde::Serialize;

use crate::cpofdm::GridSymbols;
use crate::dft;
use crate::error::{Error, Result};

/// Reported value for zero power.
pub const DB_FLOOR: f64 = -200.0;

pub fn to_db(x: f64) -> f64 {
    if x > 0.0 {
        (10.0 * x.log10()).max(DB_FLOOR)
    } else {
        DB_FLOOR
    }
}

fn check_sets(received: &GridSymbols, reference: &GridSymbols, sets: &[Vec<usize>]) -> Result<()> {
    if received.len() != reference.len() {
        return Err(Error::dim(format!(
            "received grid has {} symbols, reference {}",
            received.len(),
            reference.len()
        )));
    }
    for (u, set) in sets.iter().enumerate() {
        let Some(&first) = set.first() else {
            return Err(Error::Metric(format!("symbol set {u} is empty")));
        };
        for &n in set {
            if n >= reference.len() {
                return Err(Error::dim(format!("set {u} names symbol {n} beyond the grid")));
            }
            let l = reference.symbols[first].len();
            if reference.symbols[n].len() != l || received.symbols[n].len() != l {
                return Err(Error::dim(format!(
                    "symbol {n} of set {u} does not have {l} subcarriers"
                )));
            }
        }
    }
    Ok(())
}

/// Equalized grid with the subcarriers whose reference carried no energy.
#[derive(Debug, Clone, PartialEq)]
pub struct Equalized {
    pub grid: GridSymbols,
    /// `(set, subcarrier)` pairs equalized with unit gain.
    pub flagged: Vec<(usize, usize)>,
}

/// Per-subcarrier least-squares gain over each symbol set; `x / g`.
pub fn zf_equalize(received: &GridSymbols, reference: &GridSymbols, sets: &[Vec<usize>]) -> Result<Equalized> {
    check_sets(received, reference, sets)?;
    let mut grid = received.clone();
    let mut flagged = Vec::new();
    for (u, set) in sets.iter().enumerate() {
        let l = reference.symbols[set[0]].len();
        for k in 0..l {
            let mut num = Complex64::new(0.0, 0.0);
            let mut den = 0.0;
            for &n in set {
                let x = reference.symbols[n][k];
                num += received.symbols[n][k] * x.conj();
                den += x.norm_sqr();
            }
            let g = if den > 0.0 && num.norm_sqr() > 0.0 {
                num / den
            } else {
                flagged.push((u, k));
                Complex64::new(1.0, 0.0)
            };
            for &n in set {
                grid.symbols[n][k] = received.symbols[n][k] / g;
            }
        }
    }
    Ok(Equalized { grid, flagged })
}

/// Per-subcarrier MSE of one symbol set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SetMse {
    pub mse: Vec<f64>,
    pub evm_db: f64,
}

pub fn evm_per_set(received: &GridSymbols, reference: &GridSymbols, sets: &[Vec<usize>]) -> Result<Vec<SetMse>> {
    check_sets(received, reference, sets)?;
    Ok(sets
        .iter()
        .map(|set| {
            let l = reference.symbols[set[0]].len();
            let mse: Vec<f64> = (0..l)
                .map(|k| {
                    set.iter()
                        .map(|&n| (received.symbols[n][k] - reference.symbols[n][k]).norm_sqr())
                        .sum::<f64>()
                        / set.len() as f64
                })
                .collect();
            let avg = if l == 0 { 0.0 } else { mse.iter().sum::<f64>() / l as f64 };
            SetMse { mse, evm_db: to_db(avg) }
        })
        .collect())
}

/// Demodulation instants derived from an EVM window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EvmTimings {
    pub low: usize,
    pub reference: usize,
    pub high: usize,
}

impl EvmTimings {
    pub fn new(l_cp: usize, n_evm: usize) -> Result<Self> {
        if n_evm > l_cp {
            return Err(Error::range(format!(
                "EVM window {n_evm} exceeds the cyclic prefix {l_cp}"
            )));
        }
        let reference = l_cp / 2;
        let low = reference - n_evm / 2;
        Ok(Self {
            low,
            reference,
            high: low + n_evm,
        })
    }

    pub fn as_array(&self) -> [usize; 3] {
        [self.low, self.reference, self.high]
    }
}

/// EVM of one symbol set at the three timings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SetReport {
    pub symbols: Vec<usize>,
    pub l_act: usize,
    /// Linear per-subcarrier MSE at low, reference and high timing.
    pub mse: [Vec<f64>; 3],
    pub evm_db: [f64; 3],
    /// Subcarriers equalized with unit gain, per timing.
    pub flagged: [Vec<usize>; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvmReport {
    pub sets: Vec<SetReport>,
    /// EVM window length of every symbol.
    pub n_evm: Vec<usize>,
    pub timings: Vec<EvmTimings>,
}

/// Demodulates at the low/reference/high instants of each symbol's EVM
/// window, equalizes each timing separately and reports per-set EVM.
/// `demod` maps per-symbol timing offsets to a received grid.
pub fn evm_windowed<F>(
    reference: &GridSymbols,
    sets: &[Vec<usize>],
    cp_lens: &[usize],
    n_evm: &[usize],
    mut demod: F,
) -> Result<EvmReport>
where
    F: FnMut(&[usize]) -> Result<GridSymbols>,
{
    if cp_lens.len() != reference.len() || n_evm.len() != reference.len() {
        return Err(Error::dim("one CP length and EVM window per symbol required"));
    }
    let timings = cp_lens
        .iter()
        .zip(n_evm)
        .map(|(&cp, &n)| EvmTimings::new(cp, n))
        .collect::<Result<Vec<_>>>()?;
    let mut sets_out: Vec<SetReport> = sets
        .iter()
        .map(|s| SetReport {
            symbols: s.clone(),
            l_act: s.first().map(|&n| reference.symbols[n].len()).unwrap_or(0),
            mse: Default::default(),
            evm_db: [DB_FLOOR; 3],
            flagged: Default::default(),
        })
        .collect();
    for which in 0..3 {
        let taus: Vec<usize> = timings.iter().map(|t| t.as_array()[which]).collect();
        let received = demod(&taus)?;
        let eq = zf_equalize(&received, reference, sets)?;
        let evm = evm_per_set(&eq.grid, reference, sets)?;
        for (u, e) in evm.into_iter().enumerate() {
            sets_out[u].mse[which] = e.mse;
            sets_out[u].evm_db[which] = e.evm_db;
            sets_out[u].flagged[which] = eq.flagged.iter().filter(|f| f.0 == u).map(|f| f.1).collect();
        }
    }
    Ok(EvmReport {
        sets: sets_out,
        n_evm: n_evm.to_vec(),
        timings,
    })
}

/// Sample spectrum, centered on DC.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsdEstimate {
    /// Linear power per bin, index `n_psd/2` is DC.
    pub values: Vec<f64>,
    pub rbw: f64,
    /// Averaging bandwidth, zero when unsmoothed.
    pub mbw: f64,
    pub n_psd: usize,
    pub sample_rate_hz: f64,
    /// Offset turning `10 log10(value)` into dBm, once calibrated.
    pub dbm_offset: Option<f64>,
}

impl PsdEstimate {
    pub fn freq(&self, k: usize) -> f64 {
        (k as f64 - (self.n_psd / 2) as f64) * self.rbw
    }

    pub fn freqs(&self) -> Vec<f64> {
        (0..self.n_psd).map(|k| self.freq(k)).collect()
    }

    /// Values in dB relative to the given linear reference.
    pub fn relative_db(&self, reference: f64) -> Vec<f64> {
        self.values.iter().map(|&v| to_db(v / reference)).collect()
    }

    fn bin_of(&self, f: f64) -> Result<usize> {
        let k = (f / self.rbw).round() as i64 + (self.n_psd / 2) as i64;
        if k < 0 || k >= self.n_psd as i64 {
            return Err(Error::Metric(format!(
                "{f} Hz lies outside the sampled band of +-{} Hz",
                self.sample_rate_hz / 2.0
            )));
        }
        Ok(k as usize)
    }

    /// Mean value over `|f| < f_ch_bw / 2`.
    pub fn in_band_mean(&self, f_ch_bw: f64) -> f64 {
        let (sum, n) = self
            .values
            .iter()
            .enumerate()
            .filter(|(k, _)| self.freq(*k).abs() < f_ch_bw / 2.0)
            .fold((0.0, 0usize), |(s, n), (_, v)| (s + v, n + 1));
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }

    /// Smoothed bins in dBm per measurement bandwidth.
    pub fn dbm_per_mbw(&self) -> Result<Vec<f64>> {
        let off = self
            .dbm_offset
            .ok_or_else(|| Error::Metric("PSD is not calibrated to absolute power".into()))?;
        let n_avg = averaging_length(self.mbw, self.rbw) as f64;
        Ok(self.values.iter().map(|&v| to_db(v * n_avg) + off).collect())
    }
}

/// `|W z_padded|^2 / n_psd` with a unitary DFT.
pub fn psd_estimate(z: &[Complex64], n_psd: usize, sample_rate_hz: f64) -> Result<PsdEstimate> {
    if n_psd < z.len() || !n_psd.is_power_of_two() {
        return Err(Error::range(format!(
            "PSD length {n_psd} must be a power of two of at least {}",
            z.len()
        )));
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); n_psd];
    buf[..z.len()].copy_from_slice(z);
    dft::forward(&mut buf);
    let scale = 1.0 / (n_psd as f64 * n_psd as f64);
    let values = (0..n_psd)
        .map(|k| buf[(k + n_psd / 2) % n_psd].norm_sqr() * scale)
        .collect();
    Ok(PsdEstimate {
        values,
        rbw: sample_rate_hz / n_psd as f64,
        mbw: 0.0,
        n_psd,
        sample_rate_hz,
        dbm_offset: None,
    })
}

fn averaging_length(mbw: f64, rbw: f64) -> usize {
    if mbw <= 0.0 {
        1
    } else {
        ((mbw / rbw).round() as usize).max(1)
    }
}

/// Circular moving average over `round(mbw / rbw)` bins, realized as a
/// product in the transform domain.
pub fn psd_smooth(s: &PsdEstimate, mbw: f64) -> Result<PsdEstimate> {
    if mbw < s.rbw * (1.0 - 1e-9) {
        return Err(Error::range(format!(
            "measurement bandwidth {mbw} Hz is below the resolution {} Hz",
            s.rbw
        )));
    }
    let n = s.n_psd;
    let n_avg = averaging_length(mbw, s.rbw).min(n);
    let mut kernel = vec![Complex64::new(0.0, 0.0); n];
    for v in kernel.iter_mut().take(n_avg.div_ceil(2)) {
        *v = Complex64::new(1.0, 0.0);
    }
    for v in kernel.iter_mut().skip(n - n_avg / 2) {
        *v = Complex64::new(1.0, 0.0);
    }
    let mut spec: Vec<Complex64> = s.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    dft::forward(&mut spec);
    dft::forward(&mut kernel);
    for (a, b) in spec.iter_mut().zip(&kernel) {
        *a *= b;
    }
    dft::inverse(&mut spec);
    let scale = 1.0 / (n as f64 * n_avg as f64);
    Ok(PsdEstimate {
        values: spec.iter().map(|v| v.re * scale).collect(),
        mbw,
        ..s.clone()
    })
}

/// Larger of the two channel-edge values relative to the in-band mean, dB.
pub fn channel_edge_level(s: &PsdEstimate, f_ch_bw: f64) -> Result<f64> {
    let lo = s.bin_of(-f_ch_bw / 2.0)?;
    let hi = s.bin_of(f_ch_bw / 2.0)?;
    let mean = s.in_band_mean(f_ch_bw);
    if mean <= 0.0 {
        return Ok(DB_FLOOR);
    }
    Ok(to_db(s.values[lo].max(s.values[hi]) / mean))
}

/// Sets the dBm offset so that the power within the channel equals `p_max`.
pub fn calibrate(s: &PsdEstimate, raw: &PsdEstimate, f_ch_bw: f64, p_max_dbm: f64) -> Result<PsdEstimate> {
    let in_band: f64 = raw
        .values
        .iter()
        .enumerate()
        .filter(|(k, _)| raw.freq(*k).abs() < f_ch_bw / 2.0)
        .map(|(_, v)| v)
        .sum();
    if in_band <= 0.0 {
        return Err(Error::Metric("no in-channel power to calibrate against".into()));
    }
    Ok(PsdEstimate {
        dbm_offset: Some(p_max_dbm - 10.0 * in_band.log10()),
        ..s.clone()
    })
}

/// Piecewise-linear emission limit versus offset from the channel edge.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmissionMask {
    /// `(offset_hz, limit_dbm)` breakpoints, offsets strictly increasing.
    pub points: Vec<(f64, f64)>,
    pub mbw: f64,
}

impl EmissionMask {
    pub fn new(points: Vec<(f64, f64)>, mbw: f64) -> Result<Self> {
        if points.len() < 2 || points.windows(2).any(|p| p[1].0 <= p[0].0) {
            return Err(Error::config("mask needs at least two strictly increasing offsets"));
        }
        Ok(Self { points, mbw })
    }

    /// Operating-band unwanted emission limits: -7 dBm at `mbw/2`, falling
    /// linearly to -14 dBm at 5 MHz + `mbw/2`, flat up to 10 MHz + `mbw/2`.
    pub fn obue(mbw: f64) -> Self {
        Self {
            points: vec![(mbw / 2.0, -7.0), (5e6 + mbw / 2.0, -14.0), (10e6 + mbw / 2.0, -14.0)],
            mbw,
        }
    }

    pub fn limit(&self, offset: f64) -> Option<f64> {
        let first = self.points.first()?;
        let last = self.points.last()?;
        if offset < first.0 || offset > last.0 {
            return None;
        }
        let i = self.points.partition_point(|p| p.0 <= offset).clamp(1, self.points.len() - 1);
        let (a, b) = (self.points[i - 1], self.points[i]);
        Some(a.1 + (b.1 - a.1) * (offset - a.0) / (b.0 - a.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaskReport {
    /// Smallest `limit - level` over the mask range, dB.
    pub worst_margin_db: f64,
    pub worst_freq_hz: f64,
    /// Offset from the channel edge of the violation closest to the edge.
    pub first_violation_offset_hz: Option<f64>,
    pub pass: bool,
}

pub fn mask_check(s: &PsdEstimate, mask: &EmissionMask, f_ch_bw: f64) -> Result<MaskReport> {
    let level = s.dbm_per_mbw()?;
    let mut worst = (f64::INFINITY, 0.0);
    let mut first: Option<f64> = None;
    for (k, &lv) in level.iter().enumerate() {
        let f = s.freq(k);
        let offset = f.abs() - f_ch_bw / 2.0;
        if let Some(lim) = mask.limit(offset) {
            let m = lim - lv;
            if m < worst.0 {
                worst = (m, f);
            }
            if m < 0.0 && first.is_none_or(|o| offset < o) {
                first = Some(offset);
            }
        }
    }
    if !worst.0.is_finite() {
        return Err(Error::Metric("mask range lies outside the sampled band".into()));
    }
    Ok(MaskReport {
        worst_margin_db: worst.0,
        worst_freq_hz: worst.1,
        first_violation_offset_hz: first,
        pass: first.is_none(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cpofdm::Modulation;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};
    use std::f64::consts::PI;

    fn grid(rng: &mut ChaCha8Rng, n_sym: usize, l: usize) -> GridSymbols {
        GridSymbols {
            symbols: (0..n_sym)
                .map(|_| {
                    (0..l)
                        .map(|_| {
                            let bits: Vec<u8> = (0..4).map(|_| rng.gen_range(0..2)).collect();
                            Modulation::Qam16.map(&bits)
                        })
                        .collect()
                })
                .collect(),
            modulation: vec![Modulation::Qam16; n_sym],
        }
    }

    fn add_noise(rng: &mut ChaCha8Rng, g: &GridSymbols, var: f64) -> GridSymbols {
        let d = Normal::new(0.0, (var / 2.0).sqrt()).unwrap();
        let mut out = g.clone();
        for s in &mut out.symbols {
            for v in s.iter_mut() {
                *v += Complex64::new(d.sample(rng), d.sample(rng));
            }
        }
        out
    }

    #[test]
    fn identical_grids_hit_the_floor() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = grid(&mut rng, 4, 24);
        let r = evm_per_set(&g, &g, &[vec![0, 1, 2, 3]]).unwrap();
        assert_eq!(r[0].evm_db, DB_FLOOR);
        assert!(evm_per_set(&g, &g, &[vec![]]).is_err());
    }

    #[test]
    fn noise_variance_is_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = grid(&mut rng, 20, 100);
        let noisy = add_noise(&mut rng, &g, 1e-4);
        let sets = vec![(0..20).collect::<Vec<_>>()];
        let r = evm_per_set(&noisy, &g, &sets).unwrap();
        assert!((r[0].evm_db + 40.0).abs() < 0.5, "{}", r[0].evm_db);
    }

    #[test]
    fn per_subcarrier_mse_matches_naive_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = grid(&mut rng, 6, 30);
        let noisy = add_noise(&mut rng, &g, 1e-2);
        let sets = vec![vec![0, 2, 4], vec![1, 3, 5]];
        let r = evm_per_set(&noisy, &g, &sets).unwrap();
        for (u, set) in sets.iter().enumerate() {
            for k in 0..30 {
                let mut acc = 0.0;
                for &n in set {
                    let e = noisy.symbols[n][k] - g.symbols[n][k];
                    acc += e.re * e.re + e.im * e.im;
                }
                assert!((r[u].mse[k] - acc / 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn zf_removes_gains() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = grid(&mut rng, 5, 40);
        let sets = vec![(0..5).collect::<Vec<_>>()];
        let c = Complex64::new(0.3, -1.7);
        let mut scaled = g.clone();
        scaled.symbols.iter_mut().flatten().for_each(|v| *v *= c);
        let eq = zf_equalize(&scaled, &g, &sets).unwrap();
        for (a, b) in eq.grid.symbols.iter().flatten().zip(g.symbols.iter().flatten()) {
            assert!((a - b).norm() < 1e-14);
        }
        let mut ramp = g.clone();
        for s in &mut ramp.symbols {
            for (k, v) in s.iter_mut().enumerate() {
                *v *= Complex64::from_polar(0.8, 0.1 * k as f64);
            }
        }
        let eq = zf_equalize(&ramp, &g, &sets).unwrap();
        assert!(evm_per_set(&eq.grid, &g, &sets).unwrap()[0].evm_db < -100.0);
        // random gains plus noise
        let mut distorted = g.clone();
        for k in 0..40 {
            let h = Complex64::from_polar(rng.gen_range(0.5..2.0), rng.gen_range(-PI..PI));
            distorted.symbols.iter_mut().for_each(|s| s[k] *= h);
        }
        let big = GridSymbols {
            symbols: (0..200).map(|i| g.symbols[i % 5].clone()).collect(),
            modulation: vec![Modulation::Qam16; 200],
        };
        let mut big_rx = GridSymbols {
            symbols: (0..200).map(|i| distorted.symbols[i % 5].clone()).collect(),
            modulation: vec![Modulation::Qam16; 200],
        };
        big_rx = add_noise(&mut rng, &big_rx, 1e-4);
        let sets = vec![(0..200).collect::<Vec<_>>()];
        let eq = zf_equalize(&big_rx, &big, &sets).unwrap();
        let evm = evm_per_set(&eq.grid, &big, &sets).unwrap()[0].evm_db;
        // noise is amplified by 1/|h|^2 on average, so allow a few dB
        assert!(evm > -43.0 && evm < -34.0, "{evm}");
    }

    #[test]
    fn zero_energy_subcarrier_is_flagged() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut g = grid(&mut rng, 3, 8);
        for s in &mut g.symbols {
            s[2] = Complex64::new(0.0, 0.0);
        }
        let eq = zf_equalize(&g, &g, &[vec![0, 1, 2]]).unwrap();
        assert_eq!(eq.flagged, vec![(0, 2)]);
    }

    #[test]
    fn timings() {
        let t = EvmTimings::new(72, 36).unwrap();
        assert_eq!(t.as_array(), [18, 36, 54]);
        let t = EvmTimings::new(9, 4).unwrap();
        assert_eq!(t.as_array(), [2, 4, 6]);
        assert!(EvmTimings::new(9, 10).is_err());
        let t = EvmTimings::new(80, 0).unwrap();
        assert_eq!(t.low, t.high);
    }

    #[test]
    fn windowed_evm_with_flat_demodulator() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let g = grid(&mut rng, 4, 16);
        let noisy = add_noise(&mut rng, &g, 1e-6);
        let r = evm_windowed(&g, &[vec![0, 1, 2, 3]], &[20; 4], &[0; 4], |_| Ok(noisy.clone())).unwrap();
        let e = r.sets[0].evm_db;
        assert_eq!(e[0], e[1]);
        assert_eq!(e[1], e[2]);
        assert!(evm_windowed(&g, &[vec![0]], &[20; 4], &[21; 4], |_| Ok(noisy.clone())).is_err());
    }

    #[test]
    fn psd_tone_and_parseval() {
        let n = 256;
        let z: Vec<Complex64> = (0..n)
            .map(|t| Complex64::from_polar(1.0, 2.0 * PI * 10.0 * t as f64 / n as f64))
            .collect();
        let s = psd_estimate(&z, n, 1.0).unwrap();
        let peak = s.values[n / 2 + 10];
        assert!((peak - 1.0).abs() < 1e-12);
        let total: f64 = s.values.iter().sum();
        assert!((total - peak).abs() < 1e-12);
        assert!(psd_estimate(&z, 128, 1.0).is_err());
        assert!(psd_estimate(&z, 300, 1.0).is_err());
    }

    #[test]
    fn white_noise_spectrum_level() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let d = Normal::new(0.0, (0.5f64).sqrt()).unwrap();
        let n = 1 << 14;
        let z: Vec<Complex64> = (0..n).map(|_| Complex64::new(d.sample(&mut rng), d.sample(&mut rng))).collect();
        let s = psd_estimate(&z, n, 1.0).unwrap();
        // unit variance: each unitary bin has expected power 1/n
        for chunk in s.values.chunks(1024) {
            let m = chunk.iter().sum::<f64>() / chunk.len() as f64 * n as f64;
            assert!(to_db(m).abs() < 1.0, "{}", to_db(m));
        }
        let sm = psd_smooth(&s, 64.0 / n as f64).unwrap();
        assert!(channel_edge_level(&sm, 0.5).unwrap().abs() < 1.5);
    }

    #[test]
    fn periodic_tone_spectrum_is_shift_invariant() {
        let n = 512;
        let tone = |shift: usize| -> Vec<Complex64> {
            (0..n)
                .map(|t| {
                    let a = Complex64::from_polar(1.0, 2.0 * PI * 7.0 * ((t + shift) % n) as f64 / n as f64);
                    let b = Complex64::from_polar(0.5, 2.0 * PI * 40.0 * ((t + shift) % n) as f64 / n as f64);
                    a + b
                })
                .collect()
        };
        let s0 = psd_estimate(&tone(0), n, 1.0).unwrap();
        let s1 = psd_estimate(&tone(77), n, 1.0).unwrap();
        for (a, b) in s0.values.iter().zip(&s1.values) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn smoothing_edge_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 64;
        let z: Vec<Complex64> = (0..n).map(|_| Complex64::new(rng.gen(), rng.gen())).collect();
        let s = psd_estimate(&z, n, 64.0).unwrap();
        let same = psd_smooth(&s, 1.0).unwrap();
        for (a, b) in same.values.iter().zip(&s.values) {
            assert!((a - b).abs() < 1e-12 * b.abs().max(1e-3));
        }
        let flat = PsdEstimate {
            values: vec![0.25; n],
            ..s.clone()
        };
        let sm = psd_smooth(&flat, 9.0).unwrap();
        assert!(sm.values.iter().all(|v| (v - 0.25).abs() < 1e-15));
        assert!(psd_smooth(&s, 0.5).is_err());
    }

    #[test]
    fn brick_wall_edge_level() {
        let n = 1024;
        let mut s = PsdEstimate {
            values: vec![1e-6; n],
            rbw: 1.0,
            mbw: 1.0,
            n_psd: n,
            sample_rate_hz: n as f64,
            dbm_offset: None,
        };
        for k in n / 2 - 99..n / 2 + 100 {
            s.values[k] = 1.0;
        }
        assert!((channel_edge_level(&s, 200.0).unwrap() + 60.0).abs() < 1e-9);
        assert!(channel_edge_level(&s, 2000.0).is_err());
    }

    #[test]
    fn mask_limits_and_margins() {
        let m = EmissionMask::obue(100e3);
        assert_eq!(m.limit(50e3), Some(-7.0));
        assert!((m.limit(2.55e6).unwrap() + 10.5).abs() < 1e-12);
        assert_eq!(m.limit(7e6), Some(-14.0));
        assert_eq!(m.limit(20e6), None);
        assert!(EmissionMask::new(vec![(1.0, 0.0), (1.0, 1.0)], 1.0).is_err());

        // flat spectrum, calibrated so that every bin reads -24 dBm/MBW
        let n = 4096;
        let fs = 40e6;
        let rbw = fs / n as f64;
        let mut s = PsdEstimate {
            values: vec![1.0; n],
            rbw,
            mbw: 100e3,
            n_psd: n,
            sample_rate_hz: fs,
            dbm_offset: None,
        };
        assert!(mask_check(&s, &m, 10e6).is_err());
        let n_avg = (100e3 / rbw).round();
        s.dbm_offset = Some(-24.0 - 10.0 * n_avg.log10());
        let r = mask_check(&s, &m, 10e6).unwrap();
        assert!((r.worst_margin_db - 10.0).abs() < 1e-9);
        assert!(r.pass);
        // a spur 3 MHz above the upper edge
        let k = ((8e6) / rbw).round() as usize + n / 2;
        s.values[k] = 1e3;
        let r = mask_check(&s, &m, 10e6).unwrap();
        assert!(!r.pass);
        let off = r.first_violation_offset_hz.unwrap();
        assert!((off - (s.freq(k) - 5e6)).abs() < 1e-6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn smoothing_matches_sliding_mean(seed in any::<u64>(), n_avg in 1usize..40) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 256;
            let z: Vec<Complex64> = (0..200).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let s = psd_estimate(&z, n, n as f64).unwrap();
            let sm = psd_smooth(&s, n_avg as f64).unwrap();
            let total: f64 = s.values.iter().sum();
            let norm2: f64 = z.iter().map(|v| v.norm_sqr()).sum();
            prop_assert!((total - norm2 / n as f64).abs() <= 1e-9 * total);
            let lo = n_avg.div_ceil(2) - 1;
            for k in 0..n {
                let mut acc = 0.0;
                for j in 0..n_avg {
                    acc += s.values[(k + n + j - lo) % n];
                }
                let naive = acc / n_avg as f64;
                prop_assert!((sm.values[k] - naive).abs() <= 1e-9 * naive.abs().max(1e-12));
            }
            let m0 = s.values.iter().sum::<f64>();
            let m1 = sm.values.iter().sum::<f64>();
            prop_assert!((m0 - m1).abs() <= 1e-9 * m0);
        }

        #[test]
        fn evm_ignores_global_scaling(seed in any::<u64>(), re in -3.0f64..3.0, im in -3.0f64..3.0) {
            prop_assume!(re.abs() + im.abs() > 1e-3);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = grid(&mut rng, 6, 12);
            let noisy = add_noise(&mut rng, &g, 1e-3);
            let sets = vec![vec![0, 1, 2], vec![3, 4, 5]];
            let c = Complex64::new(re, im);
            let mut scaled = noisy.clone();
            scaled.symbols.iter_mut().flatten().for_each(|v| *v *= c);
            let a = evm_per_set(&zf_equalize(&noisy, &g, &sets).unwrap().grid, &g, &sets).unwrap();
            let b = evm_per_set(&zf_equalize(&scaled, &g, &sets).unwrap().grid, &g, &sets).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x.evm_db - y.evm_db).abs() < 1e-10);
            }
        }
    }
}
