//! 5G NR FR1 timing arithmetic.
//!
//! Everything here is exact integer arithmetic on sample counts. A half
//! subframe (0.5 ms) is the common alignment unit of all normal-CP
//! numerologies: it holds `7 * 2^mu` symbols of subcarrier spacing
//! `2^mu * 15 kHz`, each with a cyclic prefix of `9/128` of the transform
//! length, and the handful of samples left over (`alpha`) is appended to the
//! cyclic prefix of the symbol that starts the half subframe.

use std::collections::HashMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Baseline subcarrier spacing (mu = 0) in Hz.
pub const BASE_SCS_HZ: u64 = 15_000;
/// Largest OFDM transform length allowed by NR.
pub const MAX_TRANSFORM_LEN: usize = 4096;
/// A normal-CP symbol is `CP_PERIOD / 128` transform lengths long.
pub const CP_PERIOD: usize = 137;
const CP_NUMERATOR: usize = 9;
const CP_DENOMINATOR: usize = 128;
const MAX_MU: u32 = 4;

const TABLE_SOURCE: &str = include_str!("../data/nr_fr1.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CyclicPrefix {
    Normal,
    Extended,
}

impl CyclicPrefix {
    pub fn ensure_supported(self) -> Result<()> {
        match self {
            CyclicPrefix::Normal => Ok(()),
            CyclicPrefix::Extended => Err(Error::ExtendedCp),
        }
    }
}

/// Channel-level parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    /// Channel bandwidth in Hz.
    pub bandwidth_hz: u64,
    /// Sample rate in Hz.
    pub sample_rate_hz: u64,
    /// Maximum carrier output power, the reference for absolute emission masks.
    pub p_max_dbm: Option<f64>,
}

impl ChannelConfig {
    /// Channel with the tabulated FR1 sample rate.
    pub fn standard(bandwidth_hz: u64) -> Result<Self> {
        Self::with_sample_rate(bandwidth_hz, sample_rate_for_channel(bandwidth_hz)?)
    }

    /// Channel with an explicit sample rate. Any rate giving a whole number of
    /// samples per half subframe is accepted.
    pub fn with_sample_rate(bandwidth_hz: u64, sample_rate_hz: u64) -> Result<Self> {
        half_subframe_samples(sample_rate_hz)?;
        if bandwidth_hz == 0 || bandwidth_hz > sample_rate_hz {
            return Err(Error::config(format!(
                "channel bandwidth {bandwidth_hz} Hz must be in (0, {sample_rate_hz}] Hz"
            )));
        }
        Ok(Self {
            bandwidth_hz,
            sample_rate_hz,
            p_max_dbm: None,
        })
    }

    pub fn with_p_max(mut self, p_max_dbm: f64) -> Self {
        self.p_max_dbm = Some(p_max_dbm);
        self
    }
}

/// Timing of one CP-OFDM symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SymbolNumerology {
    pub mu: u32,
    pub scs_hz: u64,
    /// Transform length in samples at the plan's sample rate.
    pub n_ofdm: usize,
    /// Cyclic prefix length in samples, including `alpha` for the first
    /// symbol of a half subframe.
    pub n_cp: usize,
    pub first_of_half_subframe: bool,
}

impl SymbolNumerology {
    pub fn len(&self) -> usize {
        self.n_ofdm + self.n_cp
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// CP length without the half-subframe excess.
    pub fn base_cp(&self) -> usize {
        self.n_ofdm * CP_NUMERATOR / CP_DENOMINATOR
    }
}

/// Symbol schedule tiling a whole number of half subframes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NumerologyPlan {
    pub sample_rate_hz: u64,
    pub symbols: Vec<SymbolNumerology>,
    /// Excess samples per half subframe.
    pub alpha: usize,
    /// Samples per half subframe.
    pub n_hsf: usize,
    pub half_subframes: usize,
}

impl NumerologyPlan {
    pub fn total_samples(&self) -> usize {
        self.n_hsf * self.half_subframes
    }

    /// Start index of every symbol (CP start) within the sample stream.
    pub fn symbol_starts(&self) -> Vec<usize> {
        let mut acc = 0;
        self.symbols
            .iter()
            .map(|s| {
                let start = acc;
                acc += s.len();
                start
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

struct Tables {
    sample_rates: HashMap<u64, u64>,
    max_prb: HashMap<(u64, u64), usize>,
}

fn tables() -> &'static Tables {
    static TABLES: OnceLock<Tables> = OnceLock::new();
    TABLES.get_or_init(|| parse_tables(TABLE_SOURCE).expect("bundled numerology table is valid"))
}

fn parse_tables(src: &str) -> Result<Tables> {
    let mut sample_rates = HashMap::new();
    let mut max_prb = HashMap::new();
    for (lineno, raw) in src.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = || Error::config(format!("numerology table line {}: `{raw}`", lineno + 1));
        let (key, value) = line.split_once('=').ok_or_else(bad)?;
        let value: u64 = value.trim().parse().map_err(|_| bad())?;
        let parts: Vec<&str> = key.trim().split('.').collect();
        match parts.as_slice() {
            ["fs", bw] => {
                sample_rates.insert(bw.parse().map_err(|_| bad())?, value);
            }
            ["nprb", bw, scs] => {
                let bw = bw.parse().map_err(|_| bad())?;
                let scs = scs.parse().map_err(|_| bad())?;
                max_prb.insert((bw, scs), value as usize);
            }
            _ => return Err(bad()),
        }
    }
    Ok(Tables {
        sample_rates,
        max_prb,
    })
}

/// Tabulated FR1 sample rate for a nominal channel bandwidth.
pub fn sample_rate_for_channel(bandwidth_hz: u64) -> Result<u64> {
    tables()
        .sample_rates
        .get(&bandwidth_hz)
        .copied()
        .ok_or(Error::UnsupportedChannel(bandwidth_hz))
}

/// Maximum number of PRBs for a bandwidth/SCS pair, when tabulated.
pub fn max_prb(bandwidth_hz: u64, scs_hz: u64) -> Option<usize> {
    tables().max_prb.get(&(bandwidth_hz, scs_hz)).copied()
}

/// All tabulated `(bandwidth, scs, n_prb_max)` entries, sorted.
pub fn max_prb_entries() -> Vec<(u64, u64, usize)> {
    let mut v: Vec<_> = tables()
        .max_prb
        .iter()
        .map(|(&(bw, scs), &n)| (bw, scs, n))
        .collect();
    v.sort_unstable();
    v
}

pub fn half_subframe_samples(sample_rate_hz: u64) -> Result<usize> {
    if sample_rate_hz == 0 || !sample_rate_hz.is_multiple_of(2000) {
        return Err(Error::config(format!(
            "sample rate {sample_rate_hz} Hz does not give a whole number of samples per 0.5 ms"
        )));
    }
    Ok((sample_rate_hz / 2000) as usize)
}

/// SCS exponent `mu` for `2^mu * 15 kHz`.
pub fn scs_exponent(scs_hz: u64) -> Result<u32> {
    (0..=MAX_MU)
        .find(|&mu| BASE_SCS_HZ << mu == scs_hz)
        .ok_or_else(|| Error::config(format!("subcarrier spacing {scs_hz} Hz is not 2^mu x 15 kHz")))
}

pub fn ofdm_transform_length(sample_rate_hz: u64, scs_hz: u64) -> Result<usize> {
    if scs_hz == 0 || !sample_rate_hz.is_multiple_of(scs_hz) {
        return Err(Error::config(format!(
            "sample rate {sample_rate_hz} Hz is not a multiple of the subcarrier spacing {scs_hz} Hz"
        )));
    }
    let n = (sample_rate_hz / scs_hz) as usize;
    if n > MAX_TRANSFORM_LEN {
        return Err(Error::config(format!(
            "transform length {n} exceeds the maximum of {MAX_TRANSFORM_LEN}"
        )));
    }
    Ok(n)
}

/// Excess samples per half subframe.
pub fn excess_samples(n_hsf: usize) -> usize {
    n_hsf % CP_PERIOD
}

/// Normal CP length for a transform length.
pub fn base_cp_length(n_ofdm: usize) -> Result<usize> {
    if !n_ofdm.is_multiple_of(CP_DENOMINATOR) {
        return Err(Error::config(format!(
            "transform length {n_ofdm} gives a fractional cyclic prefix (must be a multiple of 128)"
        )));
    }
    Ok(n_ofdm * CP_NUMERATOR / CP_DENOMINATOR)
}

/// Assigns CP lengths to a symbol sequence and checks that it tiles whole
/// half subframes exactly.
pub fn plan_half_subframe(sample_rate_hz: u64, scs_sequence: &[u64]) -> Result<NumerologyPlan> {
    let n_hsf = half_subframe_samples(sample_rate_hz)?;
    let alpha = excess_samples(n_hsf);
    let mut symbols = Vec::with_capacity(scs_sequence.len());
    let mut position = 0usize;
    let mut half_subframe = 0usize;
    for &scs in scs_sequence {
        let mu = scs_exponent(scs)?;
        let n_ofdm = ofdm_transform_length(sample_rate_hz, scs)?;
        let first = position == 0;
        let n_cp = base_cp_length(n_ofdm)? + if first { alpha } else { 0 };
        position += n_ofdm + n_cp;
        if position > n_hsf {
            return Err(Error::Tiling {
                half_subframe,
                detail: format!(
                    "symbol of {scs} Hz SCS crosses the boundary, {} samples in excess",
                    position - n_hsf
                ),
            });
        }
        symbols.push(SymbolNumerology {
            mu,
            scs_hz: scs,
            n_ofdm,
            n_cp,
            first_of_half_subframe: first,
        });
        if position == n_hsf {
            position = 0;
            half_subframe += 1;
        }
    }
    if position != 0 {
        return Err(Error::Tiling {
            half_subframe,
            detail: format!("{} samples missing", n_hsf - position),
        });
    }
    Ok(NumerologyPlan {
        sample_rate_hz,
        symbols,
        alpha,
        n_hsf,
        half_subframes: half_subframe,
    })
}

/// Minimum base-station guard band for a transmission bandwidth configuration.
pub fn guard_band(bandwidth_hz: u64, scs_hz: u64, l_act_max: usize) -> Result<f64> {
    if l_act_max == 0 {
        return Err(Error::config("active subcarrier count must be positive"));
    }
    let gb = 0.5 * (bandwidth_hz as f64 - scs_hz as f64 * (l_act_max as f64 + 1.0));
    if gb < 0.0 {
        return Err(Error::GuardBand(format!(
            "{l_act_max} subcarriers of {scs_hz} Hz do not fit in a {bandwidth_hz} Hz channel"
        )));
    }
    Ok(gb)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tabulated_sample_rates() {
        assert_eq!(sample_rate_for_channel(10_000_000).unwrap(), 15_360_000);
        assert_eq!(sample_rate_for_channel(100_000_000).unwrap(), 122_880_000);
        assert_eq!(sample_rate_for_channel(25_000_000).unwrap(), 30_720_000);
        assert!(matches!(
            sample_rate_for_channel(12_000_000),
            Err(Error::UnsupportedChannel(12_000_000))
        ));
    }

    #[test]
    fn half_subframe_counts() {
        assert_eq!(half_subframe_samples(15_360_000).unwrap(), 7680);
        assert_eq!(half_subframe_samples(7_680_000).unwrap(), 3840);
        assert_eq!(half_subframe_samples(61_440_000).unwrap(), 30720);
        assert!(half_subframe_samples(15_360_001).is_err());
    }

    #[test]
    fn transform_lengths() {
        assert_eq!(ofdm_transform_length(15_360_000, 15_000).unwrap(), 1024);
        assert_eq!(ofdm_transform_length(15_360_000, 60_000).unwrap(), 256);
        assert_eq!(ofdm_transform_length(61_440_000, 30_000).unwrap(), 2048);
        assert!(ofdm_transform_length(15_360_000, 7_000).is_err());
        // 122.88 MHz at 15 kHz needs 8192 > 4096
        assert!(ofdm_transform_length(122_880_000, 15_000).is_err());
    }

    #[test]
    fn ten_mhz_cp_schedule() {
        let plan = plan_half_subframe(15_360_000, &[15_000; 7]).unwrap();
        let cps: Vec<usize> = plan.symbols.iter().map(|s| s.n_cp).collect();
        assert_eq!(cps, vec![80, 72, 72, 72, 72, 72, 72]);
        assert_eq!(plan.alpha, 8);
        let total: usize = plan.symbols.iter().map(|s| s.len()).sum();
        assert_eq!(total, 7680);
    }

    #[test]
    fn five_mhz_cp_schedule_matches_tiling_oracle() {
        // Oracle: alpha = 3840 mod 137 = 4, and 7 * (512 + 36) + 4 = 3840.
        let n_hsf = 3840usize;
        let alpha = n_hsf - (n_hsf / 137) * 137;
        assert_eq!(alpha, 4);
        assert_eq!(7 * (512 + 36) + alpha, n_hsf);

        let plan = plan_half_subframe(7_680_000, &[15_000; 7]).unwrap();
        let cps: Vec<usize> = plan.symbols.iter().map(|s| s.n_cp).collect();
        assert_eq!(cps, vec![40, 36, 36, 36, 36, 36, 36]);
        assert_eq!(plan.total_samples(), 3840);
    }

    #[test]
    fn time_multiplexed_mixed_numerology_tiles() {
        // 30,30,15,60x4,15,30,30,15,60x4 kHz within one half subframe.
        let mut seq = vec![30_000, 30_000, 15_000];
        seq.extend([60_000; 4]);
        seq.extend([15_000, 30_000, 30_000, 15_000]);
        seq.extend([60_000; 4]);
        let plan = plan_half_subframe(15_360_000, &seq).unwrap();
        let lens: usize = plan.symbols.iter().map(|s| s.len()).sum();
        assert_eq!(lens, 7680);
        assert_eq!(plan.half_subframes, 1);
        assert_eq!(plan.symbols[0].n_cp, 36 + 8);
        assert!(plan.symbols[1..].iter().all(|s| !s.first_of_half_subframe));
    }

    #[test]
    fn tiling_errors_name_the_mismatch() {
        let err = plan_half_subframe(15_360_000, &[15_000; 6]).unwrap_err();
        assert!(err.to_string().contains("1096 samples missing"), "{err}");
        // 15 kHz after three 30 kHz symbols crosses nothing, but 15 kHz after
        // 13 30 kHz symbols does.
        let mut seq = vec![30_000; 13];
        seq.push(15_000);
        let err = plan_half_subframe(15_360_000, &seq).unwrap_err();
        assert!(err.to_string().contains("in excess"), "{err}");
    }

    #[test]
    fn multiple_half_subframes_each_get_alpha() {
        let plan = plan_half_subframe(15_360_000, &[30_000; 28]).unwrap();
        assert_eq!(plan.half_subframes, 2);
        let firsts: Vec<usize> = plan
            .symbols
            .iter()
            .enumerate()
            .filter(|(_, s)| s.first_of_half_subframe)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(firsts, vec![0, 14]);
        let starts = plan.symbol_starts();
        assert_eq!(starts[14], 7680);
    }

    #[test]
    fn doubling_scs_halves_lengths() {
        for fs in [15_360_000u64, 30_720_000, 61_440_000] {
            for mu in 0..2u32 {
                let a = ofdm_transform_length(fs, BASE_SCS_HZ << mu).unwrap();
                let b = ofdm_transform_length(fs, BASE_SCS_HZ << (mu + 1)).unwrap();
                assert_eq!(a, 2 * b);
                assert_eq!(base_cp_length(a).unwrap(), 2 * base_cp_length(b).unwrap());
            }
        }
    }

    #[test]
    fn alpha_for_standard_rates() {
        for bw in [5u64, 10, 15, 20, 25, 30, 40, 50, 60, 70, 80, 90, 100] {
            let fs = sample_rate_for_channel(bw * 1_000_000).unwrap();
            let n_hsf = half_subframe_samples(fs).unwrap();
            assert_eq!(excess_samples(n_hsf), n_hsf % 137);
            // The 7-symbol 15 kHz tiling balances exactly with that alpha.
            let n_ofdm = (fs / 15_000) as usize;
            if n_ofdm <= MAX_TRANSFORM_LEN {
                let plan = plan_half_subframe(fs, &[15_000; 7]).unwrap();
                assert_eq!(plan.total_samples(), n_hsf);
            }
        }
        assert_eq!(excess_samples(7680), 8);
    }

    #[test]
    fn guard_bands() {
        assert_eq!(guard_band(10_000_000, 15_000, 624).unwrap(), 312_500.0);
        assert_eq!(guard_band(15_000 * 625, 15_000, 624).unwrap(), 0.0);
        // (10e6 - 30e3 * 289) / 2
        assert_eq!(guard_band(10_000_000, 30_000, 288).unwrap(), 665_000.0);
        assert!(matches!(
            guard_band(5_000_000, 15_000, 624),
            Err(Error::GuardBand(_))
        ));
    }

    #[test]
    fn prb_table_lookup() {
        assert_eq!(max_prb(10_000_000, 15_000), Some(52));
        assert_eq!(max_prb(50_000_000, 60_000), Some(65));
        assert_eq!(max_prb(10_000_000, 120_000), None);
    }

    #[test]
    fn extended_cp_rejected() {
        assert!(matches!(
            CyclicPrefix::Extended.ensure_supported(),
            Err(Error::ExtendedCp)
        ));
        CyclicPrefix::Normal.ensure_supported().unwrap();
    }

    #[test]
    fn malformed_table_line_is_reported() {
        assert!(parse_tables("fs.5000000 = abc").is_err());
        assert!(parse_tables("foo = 1").is_err());
        assert!(parse_tables("# comment\n\nfs.1 = 2").is_ok());
    }
}
