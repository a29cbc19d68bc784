//! Result files. Output is a pure function of the run, so repeated runs
//! with the same seed give identical bytes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{Scenario, ScenarioConfig};
use super::run::RunResult;
use crate::error::{Error, Result};
use crate::metrics::MaskReport;

#[derive(Serialize)]
struct EvmTriple {
    low: f64,
    reference: f64,
    high: f64,
}

#[derive(Serialize)]
struct SetSummary {
    set: usize,
    scs_hz: u64,
    l_act: usize,
    symbols: Vec<usize>,
    evm_db: EvmTriple,
    /// Subcarriers whose reference energy was zero, per timing.
    flagged: [Vec<usize>; 3],
    file: String,
}

#[derive(Serialize)]
struct SubbandSummary {
    name: String,
    l_short: usize,
    interp: usize,
    blocks: usize,
    sets: Vec<SetSummary>,
}

#[derive(Serialize)]
struct PsdSummary {
    n_psd: usize,
    rbw_hz: f64,
    mbw_hz: f64,
    in_band_mean: f64,
    dbm_offset: Option<f64>,
    file: String,
}

#[derive(Serialize)]
struct Summary<'a> {
    crate_version: &'static str,
    config: &'a ScenarioConfig,
    sample_rate_hz: u64,
    timeline_samples: usize,
    data_start: usize,
    edge_level_db: f64,
    mask: Option<&'a MaskReport>,
    psd: PsdSummary,
    subbands: Vec<SubbandSummary>,
}

pub fn evm_file_name(m: usize, u: usize) -> String {
    format!("evm_subband{m}_set{u}.csv")
}

fn finite(x: f64) -> f64 {
    if x.is_finite() {
        x
    } else {
        crate::metrics::DB_FLOOR
    }
}

pub fn summary_json(scenario: &Scenario, result: &RunResult) -> String {
    let subbands = scenario
        .subbands
        .iter()
        .zip(&result.subbands)
        .enumerate()
        .map(|(m, (sb, r))| SubbandSummary {
            name: sb.name.clone(),
            l_short: sb.filter.cfg.l_short,
            interp: sb.interp(),
            blocks: sb.filter.schedule.blocks.len(),
            sets: r
                .evm
                .sets
                .iter()
                .enumerate()
                .map(|(u, s)| SetSummary {
                    set: u,
                    scs_hz: r.set_keys[u].0,
                    l_act: s.l_act,
                    symbols: s.symbols.clone(),
                    evm_db: EvmTriple {
                        low: finite(s.evm_db[0]),
                        reference: finite(s.evm_db[1]),
                        high: finite(s.evm_db[2]),
                    },
                    flagged: s.flagged.clone(),
                    file: evm_file_name(m, u),
                })
                .collect(),
        })
        .collect();
    let summary = Summary {
        crate_version: env!("CARGO_PKG_VERSION"),
        config: &scenario.config,
        sample_rate_hz: scenario.channel.sample_rate_hz,
        timeline_samples: result.waveform.len(),
        data_start: result.head,
        edge_level_db: finite(result.edge_level_db),
        mask: result.mask.as_ref(),
        psd: PsdSummary {
            n_psd: result.psd.n_psd,
            rbw_hz: result.psd.rbw,
            mbw_hz: result.smoothed.mbw,
            in_band_mean: result.in_band_mean,
            dbm_offset: result.smoothed.dbm_offset,
            file: "psd.csv".into(),
        },
        subbands,
    };
    let mut s = serde_json::to_string_pretty(&summary).expect("summary serializes");
    s.push('\n');
    s
}

pub fn psd_csv(result: &RunResult) -> String {
    let (f, raw, sm) = result.psd_columns();
    let mut s = String::with_capacity(f.len() * 72);
    s.push_str("freq_hz,raw_db,smoothed_db\n");
    for k in 0..f.len() {
        let _ = writeln!(s, "{:.16e},{:.16e},{:.16e}", f[k], raw[k], sm[k]);
    }
    s
}

pub fn evm_csv(result: &RunResult, m: usize, u: usize) -> String {
    let set = &result.subbands[m].evm.sets[u];
    let db = |v: f64| crate::metrics::to_db(v);
    let mut s = String::from("subcarrier_index,mse_db_low,mse_db_ref,mse_db_high\n");
    for k in 0..set.l_act {
        let _ = writeln!(
            s,
            "{k},{:.16e},{:.16e},{:.16e}",
            db(set.mse[0][k]),
            db(set.mse[1][k]),
            db(set.mse[2][k])
        );
    }
    s
}

fn svg_plot(title: &str, x: &[f64], series: &[(&str, &[f64])], y_floor: f64) -> String {
    const W: f64 = 800.0;
    const H: f64 = 400.0;
    const M: f64 = 50.0;
    let (x0, x1) = (x.first().copied().unwrap_or(0.0), x.last().copied().unwrap_or(1.0));
    let ys = series.iter().flat_map(|s| s.1.iter().copied()).filter(|v| v.is_finite());
    let y1 = ys.clone().fold(f64::NEG_INFINITY, f64::max).max(y_floor + 1.0);
    let y0 = ys.fold(f64::INFINITY, f64::min).max(y_floor).min(y1 - 1.0);
    let px = |v: f64| M + (v - x0) / (x1 - x0).max(f64::MIN_POSITIVE) * (W - 2.0 * M);
    let py = |v: f64| H - M - (v.clamp(y0, y1) - y0) / (y1 - y0) * (H - 2.0 * M);
    let colors = ["#1f77b4", "#d62728", "#2ca02c"];
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{M}\" y=\"30\" font-family=\"sans-serif\" font-size=\"14\">{title}</text>\n\
         <text x=\"5\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\">{y1:.1}</text>\n\
         <text x=\"5\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\">{y0:.1}</text>\n",
        M + 4.0,
        H - M
    );
    for (i, (name, ys)) in series.iter().enumerate() {
        let c = colors[i % colors.len()];
        // Decimate long traces to keep files small.
        let step = (x.len() / 4000).max(1);
        let pts: Vec<String> = (0..x.len())
            .step_by(step)
            .map(|k| format!("{:.1},{:.1}", px(x[k]), py(ys[k])))
            .collect();
        let _ = writeln!(
            s,
            "<polyline fill=\"none\" stroke=\"{c}\" stroke-width=\"1\" points=\"{}\"/>",
            pts.join(" ")
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" fill=\"{c}\">{name}</text>",
            W - M - 120.0,
            M + 14.0 * i as f64
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes all result files into `dir` and returns their paths.
pub fn export(scenario: &Scenario, result: &RunResult, dir: &Path, plots: bool) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let mut put = |name: &str, body: &str| -> Result<()> {
        let p = dir.join(name);
        std::fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        written.push(p);
        Ok(())
    };
    put("summary.json", &summary_json(scenario, result))?;
    put("psd.csv", &psd_csv(result))?;
    for (m, r) in result.subbands.iter().enumerate() {
        for u in 0..r.evm.sets.len() {
            put(&evm_file_name(m, u), &evm_csv(result, m, u))?;
        }
    }
    if plots {
        let (f, raw, sm) = result.psd_columns();
        let mhz: Vec<f64> = f.iter().map(|v| v / 1e6).collect();
        put(
            "psd.svg",
            &svg_plot("PSD (dB) versus frequency (MHz)", &mhz, &[("raw", &raw), ("smoothed", &sm)], sm.iter().cloned().fold(f64::INFINITY, f64::min).max(-160.0)),
        )?;
        for (m, r) in result.subbands.iter().enumerate() {
            for (u, set) in r.evm.sets.iter().enumerate() {
                let k: Vec<f64> = (0..set.l_act).map(|k| k as f64).collect();
                let db: Vec<Vec<f64>> = set.mse.iter().map(|v| v.iter().map(|&x| crate::metrics::to_db(x)).collect()).collect();
                put(
                    &format!("evm_subband{m}_set{u}.svg"),
                    &svg_plot(
                        &format!("{} set {u}: MSE (dB) per subcarrier", r.name),
                        &k,
                        &[("low", &db[0]), ("ref", &db[1]), ("high", &db[2])],
                        -120.0,
                    ),
                )?;
            }
        }
    }
    Ok(written)
}
