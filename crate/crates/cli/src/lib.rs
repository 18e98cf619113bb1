//! Library half of the `scout` binary: argument types, config resolution,
//! and the implementation of every subcommand. `main` stays a thin shim so
//! integration tests can drive commands directly.

mod args;
mod commands;
mod config;
mod demo;

pub use args::{
    Cli, Command, ConvertVocArgs, DEFAULT_BROKER, DemoArgs, DetectArgs, DetectorArgs, EvalMapArgs,
    SweepArgs, parse_size, parse_sizes,
};
pub use commands::{detect_once, load_model};
pub use config::FileConfig;
pub use demo::{DemoSummary, run_pipeline_demo};

use std::fmt;

/// Exit code policy: 0 success, 1 usage/validation, 2 runtime failure.
#[derive(Debug)]
pub enum AppError {
    Usage(String),
    Runtime(String),
}

impl AppError {
    pub fn exit_code(&self) -> u8 {
        match self {
            AppError::Usage(_) => 1,
            AppError::Runtime(_) => 2,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        AppError::Usage(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        AppError::Runtime(msg.into())
    }
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AppError::Usage(m) => write!(f, "{m}"),
            AppError::Runtime(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for AppError {}

impl From<scout_core::nodes::NodeError> for AppError {
    fn from(e: scout_core::nodes::NodeError) -> Self {
        match e {
            scout_core::nodes::NodeError::InvalidConfig(m) => AppError::Usage(m),
            other => AppError::Runtime(other.to_string()),
        }
    }
}

impl From<scout_core::model::ModelError> for AppError {
    fn from(e: scout_core::model::ModelError) -> Self {
        AppError::Runtime(e.to_string())
    }
}

impl From<scout_core::model::CfgError> for AppError {
    fn from(e: scout_core::model::CfgError) -> Self {
        AppError::Runtime(e.to_string())
    }
}

impl From<scout_core::bench::BenchError> for AppError {
    fn from(e: scout_core::bench::BenchError) -> Self {
        AppError::Runtime(e.to_string())
    }
}

impl From<scout_core::imgio::ImageError> for AppError {
    fn from(e: scout_core::imgio::ImageError) -> Self {
        AppError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError::Runtime(e.to_string())
    }
}

/// Validates a probability-like threshold flag.
pub(crate) fn check_unit_interval(value: f32, flag: &str) -> Result<(), AppError> {
    if !(value > 0.0 && value < 1.0) {
        return Err(AppError::usage(format!(
            "--{flag} must lie in (0, 1), got {value}"
        )));
    }
    Ok(())
}

/// Runs one parsed command; `main` maps the result onto exit codes.
pub fn run(cli: Cli) -> Result<(), AppError> {
    let file = config::FileConfig::load(cli.config.as_deref())?;
    let log_level = cli
        .log
        .or_else(|| file.get("log").map(str::to_string))
        .unwrap_or_else(|| "info".to_string());
    init_logging(&log_level);
    log::debug!("config: log={log_level} (flags > file > defaults)");

    match cli.command {
        Command::Broker(args) => commands::run_broker(args, &file),
        Command::Camera(args) => commands::run_camera_cmd(args, &file),
        Command::Detector(args) => commands::run_detector_cmd(args, &file),
        Command::Sink(args) => commands::run_sink_cmd(args, &file),
        Command::Detect(args) => commands::run_detect(args),
        Command::Demo(args) => demo::run_demo_cmd(args),
        Command::Sweep(args) => commands::run_sweep(args),
        Command::EvalMap(args) => commands::run_eval_map(args),
        Command::ConvertVoc(args) => commands::run_convert_voc(args),
    }
}

fn init_logging(level: &str) {
    let _ = env_logger::Builder::new()
        .parse_filters(level)
        .format_timestamp_millis()
        .try_init();
}
