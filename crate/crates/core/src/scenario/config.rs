//! Scenario file schema and eager validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cpofdm::{min_transform_length, Modulation};
use crate::error::{Error, Result};
use crate::fcfb::{plan_schedule, FcConfig, Scheme, SubbandFilter, MIN_SHORT_LEN};
use crate::numerology::{plan_half_subframe, ChannelConfig, CyclicPrefix, NumerologyPlan};
use crate::specwin::{apply_fractional_delay, band_edges, design_window, load_weights, Allocation, FreqWindow, WindowGrid};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TxKind {
    #[default]
    Fc,
    Wola,
    Plain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RxKind {
    #[default]
    Fc,
    Ofdm,
    Wola,
}

impl std::str::FromStr for TxKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fc" => Ok(TxKind::Fc),
            "wola" => Ok(TxKind::Wola),
            "plain" | "ofdm" => Ok(TxKind::Plain),
            _ => Err(Error::config(format!("unknown transmitter `{s}` (fc|wola|plain)"))),
        }
    }
}

impl std::str::FromStr for RxKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fc" => Ok(RxKind::Fc),
            "ofdm" | "plain" => Ok(RxKind::Ofdm),
            "wola" => Ok(RxKind::Wola),
            _ => Err(Error::config(format!("unknown receiver `{s}` (fc|ofdm|wola)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub bandwidth_hz: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_rate_hz: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_max_dbm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FcSpec {
    pub n_long: usize,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
}

fn default_scheme() -> Scheme {
    Scheme::Ola
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolSpec {
    pub scs_hz: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_act: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prb_count: Option<usize>,
    #[serde(default)]
    pub center_hz: i64,
    #[serde(default = "default_modulation")]
    pub modulation: Modulation,
    #[serde(default = "one")]
    pub count: usize,
}

fn default_modulation() -> Modulation {
    Modulation::Qpsk
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_tb: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights_file: Option<PathBuf>,
    #[serde(default)]
    pub phi_fd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubbandSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub symbols: Vec<SymbolSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_short: Option<usize>,
    #[serde(default)]
    pub window: WindowSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum EvmWindow {
    /// Fraction of each symbol's CP.
    Fraction(f64),
    /// Fixed length in high-rate samples.
    Samples(usize),
}

impl Default for EvmWindow {
    fn default() -> Self {
        EvmWindow::Fraction(0.5)
    }
}

impl EvmWindow {
    /// Window length for a CP of `l_cp` samples at `1/interp` of the high rate.
    pub fn length(&self, l_cp: usize, interp: usize) -> usize {
        match *self {
            EvmWindow::Fraction(f) => (f * l_cp as f64).floor() as usize,
            EvmWindow::Samples(n) => n / interp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_psd: Option<usize>,
    #[serde(default = "default_mbw")]
    pub mbw_hz: f64,
    #[serde(default)]
    pub evm_window: EvmWindow,
    #[serde(default)]
    pub mask: bool,
}

fn default_mbw() -> f64 {
    100e3
}

impl Default for MetricsSpec {
    fn default() -> Self {
        Self {
            n_psd: None,
            mbw_hz: default_mbw(),
            evm_window: EvmWindow::default(),
            mask: false,
        }
    }
}

/// Scenario file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub name: String,
    pub channel: ChannelSpec,
    #[serde(default = "normal_cp")]
    pub cp: CyclicPrefix,
    #[serde(default = "one")]
    pub half_subframes: usize,
    pub fc: FcSpec,
    pub subbands: Vec<SubbandSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tx: TxKind,
    #[serde(default)]
    pub rx: RxKind,
    #[serde(default)]
    pub metrics: MetricsSpec,
}

fn normal_cp() -> CyclicPrefix {
    CyclicPrefix::Normal
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Allocation of one CP-OFDM symbol of a subband.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SymbolAlloc {
    pub scs_hz: u64,
    pub l_act: usize,
    pub center_hz: i64,
    pub modulation: Modulation,
}

impl SymbolAlloc {
    fn allocation(&self) -> Allocation {
        Allocation {
            center_hz: self.center_hz as f64,
            scs_hz: self.scs_hz as f64,
            l_act: self.l_act,
        }
    }

    fn same_band(&self, other: &SymbolAlloc) -> bool {
        self.scs_hz == other.scs_hz && self.l_act == other.l_act && self.center_hz == other.center_hz
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreparedSubband {
    pub name: String,
    pub symbols: Vec<SymbolAlloc>,
    pub hi_plan: NumerologyPlan,
    pub lo_plan: NumerologyPlan,
    pub filter: SubbandFilter,
    /// Symbol owning each block's payload start.
    pub owners: Vec<usize>,
    /// Symbol sets with equal SCS and allocation size; blank symbols are
    /// left out.
    pub sets: Vec<Vec<usize>>,
    /// WOLA extension at the high rate.
    pub l_ext: usize,
}

impl PreparedSubband {
    pub fn interp(&self) -> usize {
        self.filter.cfg.interp
    }

    pub fn set_key(&self, set: usize) -> (u64, usize) {
        let s = &self.symbols[self.sets[set][0]];
        (s.scs_hz, s.l_act)
    }
}

/// A fully validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub channel: ChannelConfig,
    pub subbands: Vec<PreparedSubband>,
    /// High-rate samples of the data span.
    pub n_samp: usize,
    /// Samples reserved before the data span on the output timeline.
    pub head: usize,
    /// Samples reserved after it.
    pub tail: usize,
}

impl Scenario {
    pub fn timeline_len(&self) -> usize {
        self.head + self.n_samp + self.tail
    }

    pub fn n_psd(&self) -> usize {
        self.config
            .metrics
            .n_psd
            .unwrap_or_else(|| (4 * self.timeline_len()).max(1).next_power_of_two())
    }
}

fn expand_symbols(m: usize, spec: &SubbandSpec) -> Result<Vec<SymbolAlloc>> {
    let mut out = Vec::new();
    for (i, s) in spec.symbols.iter().enumerate() {
        let where_ = || format!("subband {m}, symbol entry {i}");
        let l_act = match (s.l_act, s.prb_count) {
            (Some(l), None) => l,
            (None, Some(p)) => 12 * p,
            (Some(l), Some(p)) if l == 12 * p => l,
            (Some(_), Some(_)) => {
                return Err(Error::config(format!("{}: l_act and prb_count disagree", where_())))
            }
            (None, None) => {
                return Err(Error::config(format!("{}: one of l_act or prb_count is required", where_())))
            }
        };
        if s.count == 0 {
            return Err(Error::config(format!("{}: count must be positive", where_())));
        }
        for _ in 0..s.count {
            out.push(SymbolAlloc {
                scs_hz: s.scs_hz,
                l_act,
                center_hz: s.center_hz,
                modulation: s.modulation,
            });
        }
    }
    if out.is_empty() {
        return Err(Error::config(format!("subband {m} has no symbols")));
    }
    Ok(out)
}

fn symbol_sets(symbols: &[SymbolAlloc]) -> Vec<Vec<usize>> {
    let mut keys: Vec<(u64, usize)> = Vec::new();
    let mut sets: Vec<Vec<usize>> = Vec::new();
    for (n, s) in symbols.iter().enumerate() {
        if s.l_act == 0 {
            continue;
        }
        match keys.iter().position(|&k| k == (s.scs_hz, s.l_act)) {
            Some(u) => sets[u].push(n),
            None => {
                keys.push((s.scs_hz, s.l_act));
                sets.push(vec![n]);
            }
        }
    }
    sets
}

/// Largest interpolation whose low-rate transforms still hold every symbol.
fn default_l_short(n_long: usize, fs: u64, scheme: Scheme, symbols: &[SymbolAlloc], hi: &NumerologyPlan) -> Result<usize> {
    let mut l = MIN_SHORT_LEN.min(n_long);
    while l <= n_long {
        let interp = n_long / l;
        let fits = symbols.iter().zip(&hi.symbols).all(|(s, h)| {
            h.n_ofdm % interp == 0 && (s.l_act == 0 || h.n_ofdm / interp >= min_transform_length(s.l_act))
                || (s.l_act == 0 && h.n_ofdm / interp >= 128)
        });
        if fits && FcConfig::new(n_long, l, fs, scheme).is_ok() {
            return Ok(l);
        }
        l *= 2;
    }
    Err(Error::config("no subband transform length satisfies the allocations"))
}

struct Draft {
    name: String,
    symbols: Vec<SymbolAlloc>,
    hi_plan: NumerologyPlan,
    lo_plan: NumerologyPlan,
    cfg: FcConfig,
    schedule: crate::fcfb::BlockSchedule,
    owners: Vec<usize>,
    weights: Option<Vec<f64>>,
}

impl Scenario {
    /// Validates a configuration. Relative weight-file paths are resolved
    /// against `base_dir`.
    pub fn prepare(config: ScenarioConfig, base_dir: Option<&Path>) -> Result<Self> {
        if config.schema_version != SCHEMA_VERSION {
            return Err(Error::Schema {
                path: "schema_version".into(),
                message: format!("unsupported version {}, expected {SCHEMA_VERSION}", config.schema_version),
            });
        }
        config.cp.ensure_supported()?;
        let ch = &config.channel;
        let mut channel = match ch.sample_rate_hz {
            Some(fs) => ChannelConfig::with_sample_rate(ch.bandwidth_hz, fs)?,
            None => ChannelConfig::standard(ch.bandwidth_hz)?,
        };
        if let Some(p) = ch.p_max_dbm {
            channel = channel.with_p_max(p);
        }
        let fs = channel.sample_rate_hz;
        if config.half_subframes == 0 {
            return Err(Error::config("half_subframes must be positive"));
        }
        let n_long = config.fc.n_long;
        let scheme = config.fc.scheme;
        let probe = FcConfig::new(n_long, n_long, fs, scheme)?;
        let n_samp = config.half_subframes * probe.hsf_low();

        let mut drafts = Vec::new();
        for (m, spec) in config.subbands.iter().enumerate() {
            let symbols = expand_symbols(m, spec)?;
            let seq: Vec<u64> = symbols.iter().map(|s| s.scs_hz).collect();
            let hi_plan = plan_half_subframe(fs, &seq).map_err(|e| Error::config(format!("subband {m}: {e}")))?;
            if hi_plan.half_subframes != config.half_subframes {
                return Err(Error::config(format!(
                    "subband {m} spans {} half subframes, scenario has {}",
                    hi_plan.half_subframes, config.half_subframes
                )));
            }
            for (n, s) in symbols.iter().enumerate() {
                if (s.center_hz as i128 * n_long as i128) % fs as i128 != 0 {
                    return Err(Error::config(format!(
                        "subband {m} symbol {n}: center {} Hz is not a multiple of the bin spacing {} Hz",
                        s.center_hz, probe.f_bs
                    )));
                }
            }
            let l_short = match spec.l_short {
                Some(l) => l,
                None => default_l_short(n_long, fs, scheme, &symbols, &hi_plan)?,
            };
            let cfg = FcConfig::new(n_long, l_short, fs, scheme).map_err(|e| Error::config(format!("subband {m}: {e}")))?;
            let lo_plan = plan_half_subframe(cfg.low_rate_hz(), &seq)
                .map_err(|e| Error::config(format!("subband {m} at the low rate: {e}")))?;
            for (n, (s, lo)) in symbols.iter().zip(&lo_plan.symbols).enumerate() {
                if s.l_act > 0 && lo.n_ofdm < min_transform_length(s.l_act) {
                    return Err(Error::config(format!(
                        "subband {m} symbol {n}: {} subcarriers need a transform of {}, L = {l_short} gives {}",
                        s.l_act,
                        min_transform_length(s.l_act),
                        lo.n_ofdm
                    )));
                }
            }
            let schedule = plan_schedule(&cfg, &lo_plan).map_err(|e| Error::config(format!("subband {m}: {e}")))?;
            let owners = schedule.owner_symbols(&lo_plan);
            // Allocations may change only at block boundaries.
            let starts = lo_plan.symbol_starts();
            for (r, b) in schedule.blocks.iter().enumerate() {
                let end = b.payload_start + b.l_s;
                let first = owners[r];
                let mut n = first;
                while n < starts.len() && starts[n] < end {
                    if !symbols[n].same_band(&symbols[first]) {
                        return Err(Error::config(format!(
                            "subband {m}: symbols {first} and {n} share FC block {r} but differ in allocation"
                        )));
                    }
                    n += 1;
                }
            }
            let weights = match &spec.window.weights_file {
                Some(p) => {
                    let path = match base_dir {
                        Some(b) if p.is_relative() => b.join(p),
                        _ => p.clone(),
                    };
                    Some(load_weights(&path)?)
                }
                None => None,
            };
            if !(0.0..=1.0).contains(&spec.window.phi_fd) {
                return Err(Error::config(format!("subband {m}: phi_fd must lie in [0, 1]")));
            }
            drafts.push(Draft {
                name: spec.name.clone().unwrap_or_else(|| format!("subband{m}")),
                symbols,
                hi_plan,
                lo_plan,
                cfg,
                schedule,
                owners,
                weights,
            });
        }

        // Per-block windows from the allocations active in that block.
        let n_blocks = probe.r_per_hsf * config.half_subframes;
        let mut windows: Vec<Vec<FreqWindow>> = drafts.iter().map(|_| Vec::with_capacity(n_blocks)).collect();
        let mut offsets: Vec<Vec<i64>> = drafts.iter().map(|_| Vec::with_capacity(n_blocks)).collect();
        for r in 0..n_blocks {
            let allocs: Vec<Allocation> = drafts.iter().map(|d| d.symbols[d.owners[r]].allocation()).collect();
            let edges = band_edges(&allocs, channel.bandwidth_hz as f64)
                .map_err(|e| Error::config(format!("FC block {r}: {e}")))?;
            for (m, d) in drafts.iter().enumerate() {
                let s = d.symbols[d.owners[r]];
                offsets[m].push(s.center_hz * n_long as i64 / fs as i64);
                let Some(e) = edges[m] else {
                    windows[m].push(FreqWindow::zeros(d.cfg.l_short));
                    continue;
                };
                let grid = WindowGrid {
                    n_long,
                    l_short: d.cfg.l_short,
                    sample_rate_hz: fs as f64,
                };
                let spec = &config.subbands[m].window;
                let n_tb = match spec.n_tb {
                    Some(n) => n,
                    None => grid.default_n_tb(&e, s.scs_hz as f64)?,
                };
                let w = design_window(&e, &grid, n_tb, d.weights.as_deref())
                    .map_err(|err| Error::config(format!("subband {m}, FC block {r}: {err}")))?;
                windows[m].push(apply_fractional_delay(&w, spec.phi_fd)?);
            }
        }

        let mut subbands = Vec::new();
        let mut head = 0;
        let mut tail = 0;
        for ((d, w), o) in drafts.into_iter().zip(windows).zip(offsets) {
            let filter = SubbandFilter::new(d.cfg, d.schedule, w, o)?;
            let i = d.cfg.interp;
            let min_cp = d.hi_plan.symbols.iter().map(|s| s.base_cp()).min().unwrap_or(0);
            let l_ext = min_cp / 4;
            head = head.max(i * filter.schedule.l_l0).max(l_ext);
            tail = tail.max(i * filter.schedule.l_t_last).max(l_ext);
            subbands.push(PreparedSubband {
                name: d.name,
                sets: symbol_sets(&d.symbols),
                symbols: d.symbols,
                hi_plan: d.hi_plan,
                lo_plan: d.lo_plan,
                filter,
                owners: d.owners,
                l_ext,
            });
        }

        let metrics = &config.metrics;
        if metrics.mbw_hz.is_nan() || metrics.mbw_hz <= 0.0 {
            return Err(Error::config("metrics.mbw_hz must be positive"));
        }
        if let EvmWindow::Fraction(f) = metrics.evm_window {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::config("metrics.evm_window.fraction must lie in [0, 1]"));
            }
        }
        for (m, sb) in subbands.iter().enumerate() {
            let (plan, interp) = match config.rx {
                RxKind::Fc => (&sb.lo_plan, sb.interp()),
                _ => (&sb.hi_plan, 1),
            };
            for (n, s) in plan.symbols.iter().enumerate() {
                if metrics.evm_window.length(s.n_cp, interp) > s.n_cp {
                    return Err(Error::config(format!(
                        "subband {m} symbol {n}: EVM window exceeds the cyclic prefix {}",
                        s.n_cp
                    )));
                }
            }
        }
        if metrics.mask && channel.p_max_dbm.is_none() {
            return Err(Error::config("metrics.mask requires channel.p_max_dbm"));
        }
        let scenario = Self {
            config,
            channel,
            subbands,
            n_samp,
            head,
            tail,
        };
        let n_psd = scenario.n_psd();
        if !n_psd.is_power_of_two() || n_psd < scenario.timeline_len() {
            return Err(Error::config(format!(
                "metrics.n_psd = {n_psd} must be a power of two of at least {}",
                scenario.timeline_len()
            )));
        }
        if scenario.config.metrics.mbw_hz < fs as f64 / n_psd as f64 {
            return Err(Error::config("metrics.mbw_hz is below the PSD resolution"));
        }
        Ok(scenario)
    }
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let config = read_config(path)?;
    Scenario::prepare(config, path.parent())
}

pub fn read_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ScenarioConfig::from_json(&text)
}
