//! Scenario files, builtin examples, end-to-end runs and result export.

mod builtin;
mod config;
mod export;
mod run;

pub use builtin::{builtin_config, builtin_json, builtin_scenarios};
pub use config::{
    load_scenario, read_config, ChannelSpec, EvmWindow, FcSpec, MetricsSpec, PreparedSubband, RxKind, Scenario,
    ScenarioConfig, SubbandSpec, SymbolAlloc, SymbolSpec, TxKind, WindowSpec, SCHEMA_VERSION,
};
pub use export::{evm_csv, evm_file_name, export, psd_csv, summary_json};
pub use run::{draw_grids, run_scenario, RunResult, SubbandRun};

/// Validates a builtin by name.
pub fn builtin_scenario(name: &str) -> crate::Result<Scenario> {
    Scenario::prepare(builtin_config(name)?, None)
}
