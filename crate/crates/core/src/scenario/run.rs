//! Transmit, receive and measure one scenario.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{PreparedSubband, RxKind, Scenario, TxKind};
use crate::cpofdm::{demodulate_symbol, modulate_subband, wola_demodulate, wola_symbol, GridSymbols};
use crate::error::{Error, Result};
use crate::metrics::{
    calibrate, channel_edge_level, evm_windowed, mask_check, psd_estimate, psd_smooth, EmissionMask,
    EvmReport, MaskReport, PsdEstimate,
};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, PartialEq)]
pub struct SubbandRun {
    pub name: String,
    pub reference: GridSymbols,
    /// `(scs_hz, l_act)` of each symbol set.
    pub set_keys: Vec<(u64, usize)>,
    pub evm: EvmReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    /// Transmitted signal; the data span starts at `head`.
    pub waveform: Vec<Complex64>,
    pub head: usize,
    pub psd: PsdEstimate,
    pub smoothed: PsdEstimate,
    /// Linear in-band mean of the smoothed PSD.
    pub in_band_mean: f64,
    pub edge_level_db: f64,
    pub mask: Option<MaskReport>,
    pub subbands: Vec<SubbandRun>,
}

impl RunResult {
    /// Frequency, raw and smoothed columns as written to `psd.csv`. Values
    /// are dBm when the spectrum is calibrated, otherwise dB relative to
    /// the in-band mean.
    pub fn psd_columns(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let freqs = self.psd.freqs();
        match self.smoothed.dbm_offset {
            Some(off) => (
                freqs,
                self.psd.values.iter().map(|&v| crate::metrics::to_db(v) + off).collect(),
                self.smoothed.dbm_per_mbw().expect("calibrated"),
            ),
            None => {
                let r = if self.in_band_mean > 0.0 { self.in_band_mean } else { 1.0 };
                (freqs, self.psd.relative_db(r), self.smoothed.relative_db(r))
            }
        }
    }
}

/// Random constellation points in subband, symbol, subcarrier order. Each
/// bit is the top bit of one 32-bit draw.
pub fn draw_grids(scenario: &Scenario, seed: u64) -> Vec<GridSymbols> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    scenario
        .subbands
        .iter()
        .map(|sb| {
            let mut g = GridSymbols::default();
            for s in &sb.symbols {
                let bits: Vec<u8> = (0..s.l_act * s.modulation.bits_per_symbol())
                    .map(|_| (rng.next_u32() >> 31) as u8)
                    .collect();
                g.symbols.push(s.modulation.map_bits(&bits));
                g.modulation.push(s.modulation);
            }
            g
        })
        .collect()
}

struct Mixer {
    table: Vec<Complex64>,
}

impl Mixer {
    fn new(n: usize) -> Self {
        Self {
            table: (0..n).map(|k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 / n as f64)).collect(),
        }
    }

    /// `exp(i 2 pi c t / N)` for a bin offset and a sample index referenced
    /// to the data start.
    fn at(&self, c: i64, t: i64) -> Complex64 {
        let n = self.table.len() as i64;
        self.table[((c % n) * (t % n)).rem_euclid(n) as usize]
    }
}

fn bin_offset(center_hz: i64, scenario: &Scenario) -> i64 {
    center_hz * scenario.config.fc.n_long as i64 / scenario.channel.sample_rate_hz as i64
}

fn transmit(scenario: &Scenario, grids: &[GridSymbols], kind: TxKind) -> Result<Vec<Complex64>> {
    let mut out = vec![ZERO; scenario.timeline_len()];
    let head = scenario.head as i64;
    let mixer = Mixer::new(scenario.config.fc.n_long);
    for (sb, grid) in scenario.subbands.iter().zip(grids) {
        match kind {
            TxKind::Fc => {
                let lo = modulate_subband(grid, &sb.lo_plan)?;
                let z = sb.filter.synthesize_padded(&lo.samples)?;
                let at = scenario.head - sb.interp() * sb.filter.schedule.l_l0;
                for (o, v) in out[at..].iter_mut().zip(z) {
                    *o += v;
                }
            }
            TxKind::Plain | TxKind::Wola => {
                let hi = modulate_subband(grid, &sb.hi_plan)?;
                let l_ext = if kind == TxKind::Wola { sb.l_ext } else { 0 };
                for (n, s) in sb.symbols.iter().enumerate() {
                    if s.l_act == 0 {
                        continue;
                    }
                    let seg = wola_symbol(hi.symbol(n), hi.symbol_lens[n].1, l_ext)?;
                    let c = bin_offset(s.center_hz, scenario);
                    let t0 = hi.symbol_starts[n] as i64 - l_ext as i64;
                    for (j, v) in seg.into_iter().enumerate() {
                        let t = t0 + j as i64;
                        out[(head + t) as usize] += v * mixer.at(c, t);
                    }
                }
            }
        }
    }
    Ok(out)
}

fn evm_window_lengths(scenario: &Scenario, cps: &[usize], interp: usize) -> Vec<usize> {
    cps.iter()
        .map(|&cp| scenario.config.metrics.evm_window.length(cp, interp))
        .collect()
}

fn receive(
    scenario: &Scenario,
    sb: &PreparedSubband,
    reference: &GridSymbols,
    rx: &[Complex64],
    kind: RxKind,
) -> Result<EvmReport> {
    match kind {
        RxKind::Fc => {
            let i = sb.interp();
            let at = scenario.head - i * sb.filter.schedule.l_l0;
            let seg = &rx[at..at + sb.filter.schedule.output_len()];
            let scale = 1.0 / i as f64;
            let y: Vec<Complex64> = sb.filter.analyze_padded(seg)?.into_iter().map(|v| v * scale).collect();
            let plan = &sb.lo_plan;
            let starts = plan.symbol_starts();
            let cps: Vec<usize> = plan.symbols.iter().map(|s| s.n_cp).collect();
            let n_evm = evm_window_lengths(scenario, &cps, i);
            evm_windowed(reference, &sb.sets, &cps, &n_evm, |taus| {
                let mut g = GridSymbols::default();
                for (n, s) in sb.symbols.iter().enumerate() {
                    let p = &plan.symbols[n];
                    g.symbols.push(if s.l_act == 0 {
                        Vec::new()
                    } else {
                        demodulate_symbol(&y[starts[n]..starts[n] + p.len()], p.n_ofdm, p.n_cp, s.l_act, taus[n])?
                    });
                    g.modulation.push(s.modulation);
                }
                Ok(g)
            })
        }
        RxKind::Ofdm | RxKind::Wola => {
            let l_ext = if kind == RxKind::Wola { sb.l_ext } else { 0 };
            let plan = &sb.hi_plan;
            let starts = plan.symbol_starts();
            let mixer = Mixer::new(scenario.config.fc.n_long);
            let head = scenario.head as i64;
            // Each symbol brought to baseband with its own center.
            let segs: Vec<Vec<Complex64>> = sb
                .symbols
                .iter()
                .enumerate()
                .map(|(n, s)| {
                    if s.l_act == 0 {
                        return Vec::new();
                    }
                    let c = bin_offset(s.center_hz, scenario);
                    let t0 = starts[n] as i64 - l_ext as i64;
                    (0..plan.symbols[n].len() + 2 * l_ext)
                        .map(|j| {
                            let t = t0 + j as i64;
                            rx[(head + t) as usize] * mixer.at(c, t).conj()
                        })
                        .collect()
                })
                .collect();
            let cps: Vec<usize> = plan.symbols.iter().map(|s| s.n_cp).collect();
            let n_evm = evm_window_lengths(scenario, &cps, 1);
            evm_windowed(reference, &sb.sets, &cps, &n_evm, |taus| {
                let mut g = GridSymbols::default();
                for (n, s) in sb.symbols.iter().enumerate() {
                    let p = &plan.symbols[n];
                    g.symbols.push(if s.l_act == 0 {
                        Vec::new()
                    } else {
                        wola_demodulate(&segs[n], l_ext, p.n_ofdm, p.n_cp, s.l_act, taus[n], l_ext)?
                    });
                    g.modulation.push(s.modulation);
                }
                Ok(g)
            })
        }
    }
}

/// Synthesizes the scenario, demodulates every subband and measures the
/// spectrum.
pub fn run_scenario(scenario: &Scenario) -> Result<RunResult> {
    let cfg = &scenario.config;
    let grids = draw_grids(scenario, cfg.seed);
    let waveform = transmit(scenario, &grids, cfg.tx)?;

    let mut subbands = Vec::new();
    for (sb, grid) in scenario.subbands.iter().zip(grids) {
        let evm = receive(scenario, sb, &grid, &waveform, cfg.rx)?;
        subbands.push(SubbandRun {
            name: sb.name.clone(),
            set_keys: (0..sb.sets.len()).map(|u| sb.set_key(u)).collect(),
            reference: grid,
            evm,
        });
    }

    let fs = scenario.channel.sample_rate_hz as f64;
    let bw = scenario.channel.bandwidth_hz as f64;
    let psd = psd_estimate(&waveform, scenario.n_psd(), fs)?;
    let mut smoothed = psd_smooth(&psd, cfg.metrics.mbw_hz)?;
    let in_band_mean = smoothed.in_band_mean(bw);
    let edge_level_db = channel_edge_level(&smoothed, bw)?;
    let mut mask = None;
    if cfg.metrics.mask {
        let p_max = scenario
            .channel
            .p_max_dbm
            .ok_or_else(|| Error::config("mask check requires a maximum output power"))?;
        smoothed = calibrate(&smoothed, &psd, bw, p_max)?;
        mask = Some(mask_check(&smoothed, &EmissionMask::obue(cfg.metrics.mbw_hz), bw)?);
    }
    Ok(RunResult {
        waveform,
        head: scenario.head,
        psd,
        smoothed,
        in_band_mean,
        edge_level_db,
        mask,
        subbands,
    })
}
