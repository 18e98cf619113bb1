use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Default broker endpoint when neither flag nor config file names one.
pub const DEFAULT_BROKER: &str = "127.0.0.1:7750";

#[derive(Parser, Debug)]
#[command(
    name = "scout",
    version,
    about = "Camera/detector offload pipeline over a small pub/sub broker"
)]
pub struct Cli {
    /// Optional key=value config file (keys: broker, log). Flags override
    /// the file; the file overrides defaults.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Log level (error, warn, info, debug, trace).
    #[arg(long, global = true, value_name = "LEVEL")]
    pub log: Option<String>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the pub/sub broker (the MASTER).
    Broker(BrokerArgs),
    /// Publish camera frames at a fixed rate.
    Camera(CameraArgs),
    /// Consume frames, run detection, publish results.
    Detector(DetectorArgs),
    /// Join detections to frames; write annotated images and a JSON log.
    Sink(SinkArgs),
    /// One-shot detection on a single image.
    Detect(DetectArgs),
    /// Run broker+camera+detector+sink locally for a fixed duration.
    Demo(DemoArgs),
    /// Throughput sweep across input sizes (in-process, no network).
    Sweep(SweepArgs),
    /// VOC-2007 11-point mAP of a detections file against ground truth.
    EvalMap(EvalMapArgs),
    /// Convert VOC annotation XMLs to ground-truth sidecar files.
    ConvertVoc(ConvertVocArgs),
}

#[derive(Args, Debug)]
pub struct BrokerArgs {
    /// Listen endpoint, host:port.
    #[arg(long, value_name = "H:P")]
    pub listen: Option<String>,
    /// Per-subscriber queue depth (oldest-drop on overflow).
    #[arg(long, default_value_t = 8)]
    pub queue_depth: usize,
}

#[derive(Args, Debug)]
pub struct CameraArgs {
    #[arg(long, value_name = "H:P")]
    pub broker: Option<String>,
    #[arg(long, default_value = "camera")]
    pub topic: String,
    /// Frame geometry, WxH.
    #[arg(long, default_value = "640x480")]
    pub size: String,
    /// Publish rate in Hz.
    #[arg(long, default_value_t = 30.0)]
    pub rate: f64,
    /// `pattern` or a directory of images (looped).
    #[arg(long, default_value = "pattern")]
    pub source: String,
}

#[derive(Args, Debug)]
pub struct DetectorArgs {
    #[arg(long, value_name = "H:P")]
    pub broker: Option<String>,
    #[arg(long, value_name = "FILE")]
    pub cfg: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub weights: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub names: Option<PathBuf>,
    /// Network input side (multiple of 32).
    #[arg(long, default_value_t = 416)]
    pub size: usize,
    /// Confidence threshold in (0,1).
    #[arg(long, default_value_t = scout_core::postproc::DEFAULT_CONF_THRESHOLD)]
    pub conf: f32,
    /// NMS IoU threshold in (0,1).
    #[arg(long, default_value_t = scout_core::postproc::DEFAULT_NMS_THRESHOLD)]
    pub nms: f32,
    #[arg(long = "in", default_value = "camera")]
    pub in_topic: String,
    #[arg(long = "out", default_value = "detections")]
    pub out_topic: String,
    /// Use a stub backend with this service time in ms instead of a model.
    #[arg(long, value_name = "MS")]
    pub stub: Option<u64>,
    /// Letterbox (aspect-preserving) resize instead of plain stretch.
    #[arg(long)]
    pub letterbox: bool,
}

#[derive(Args, Debug)]
pub struct SinkArgs {
    #[arg(long, value_name = "H:P")]
    pub broker: Option<String>,
    #[arg(long = "in", default_value = "detections")]
    pub in_topic: String,
    /// Topic carrying the camera frames for the seq join.
    #[arg(long, default_value = "camera")]
    pub frames: String,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Also write annotated images for empty detection sets.
    #[arg(long)]
    pub emit_empty: bool,
}

#[derive(Args, Debug)]
pub struct DetectArgs {
    #[arg(long, value_name = "FILE")]
    pub image: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub cfg: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub weights: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub names: Option<PathBuf>,
    #[arg(long, default_value_t = 416)]
    pub size: usize,
    #[arg(long, default_value_t = scout_core::postproc::DEFAULT_CONF_THRESHOLD)]
    pub conf: f32,
    #[arg(long, default_value_t = scout_core::postproc::DEFAULT_NMS_THRESHOLD)]
    pub nms: f32,
    /// Write an annotated copy of the image here.
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
    /// Write the resized network input as a PPM (for reference comparisons).
    #[arg(long, value_name = "FILE")]
    pub dump_input: Option<PathBuf>,
    /// Letterbox resize instead of plain stretch.
    #[arg(long)]
    pub letterbox: bool,
}

#[derive(Args, Debug)]
pub struct DemoArgs {
    /// Run duration in seconds.
    #[arg(long, default_value_t = 5.0)]
    pub duration: f64,
    /// Camera geometry, WxH.
    #[arg(long, default_value = "320x240")]
    pub size: String,
    /// Camera rate in Hz.
    #[arg(long, default_value_t = 30.0)]
    pub rate: f64,
    /// Stub detector service time in ms (default when no model given).
    #[arg(long, value_name = "MS")]
    pub stub: Option<u64>,
    #[arg(long, value_name = "FILE")]
    pub cfg: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub weights: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub names: Option<PathBuf>,
    /// Network input side for a real model.
    #[arg(long, default_value_t = 320)]
    pub model_size: usize,
    /// Directory for sink output (default: temp dir).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// Comma-separated input sides, multiples of 32.
    #[arg(long, default_value = "160,224,288,320,352,384")]
    pub sizes: String,
    /// Directory of workload images; a synthetic workload when omitted.
    #[arg(long, value_name = "DIR")]
    pub images: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub cfg: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub weights: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub names: Option<PathBuf>,
    #[arg(long, default_value_t = scout_core::postproc::DEFAULT_CONF_THRESHOLD)]
    pub conf: f32,
    #[arg(long, default_value_t = scout_core::postproc::DEFAULT_NMS_THRESHOLD)]
    pub nms: f32,
    /// Timed frames per size.
    #[arg(long, default_value_t = 30)]
    pub frames: usize,
    /// Warm-up frames per size (excluded from timing).
    #[arg(long, default_value_t = 3)]
    pub warmup: usize,
    /// Write the CSV here as well as printing the table.
    #[arg(long, value_name = "FILE")]
    pub csv: Option<PathBuf>,
    /// Time through the broker (camera -> detector over TCP) instead of
    /// in-process, for whole-pipeline figures.
    #[arg(long)]
    pub end_to_end: bool,
    /// Camera rate for --end-to-end runs.
    #[arg(long, default_value_t = 60.0)]
    pub rate: f64,
}

#[derive(Args, Debug)]
pub struct EvalMapArgs {
    /// Detections file: `image_id class_id prob x_min y_min x_max y_max`.
    #[arg(long, value_name = "FILE")]
    pub dets: PathBuf,
    /// Directory of per-image ground-truth sidecars.
    #[arg(long, value_name = "DIR")]
    pub truth: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub iou: f32,
    /// Names file, used for class count and table labels.
    #[arg(long, value_name = "FILE")]
    pub names: Option<PathBuf>,
    /// Evaluate classes on this many threads (same result as serial).
    #[arg(long, default_value_t = 1)]
    pub parallel: usize,
}

#[derive(Args, Debug)]
pub struct ConvertVocArgs {
    /// Directory of VOC annotation XML files.
    #[arg(long, value_name = "DIR")]
    pub xml: PathBuf,
    /// Output directory for sidecar files.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Names file mapping class names to ids.
    #[arg(long, value_name = "FILE")]
    pub names: PathBuf,
}

/// Parses "WxH" into a (width, height) pair.
pub fn parse_size(size: &str) -> Option<(u16, u16)> {
    let (w, h) = size.split_once(['x', 'X'])?;
    Some((w.trim().parse().ok()?, h.trim().parse().ok()?))
}

/// Parses a comma-separated list of input sides.
pub fn parse_sizes(sizes: &str) -> Option<Vec<usize>> {
    sizes
        .split(',')
        .map(|s| s.trim().parse::<usize>().ok())
        .collect()
}
