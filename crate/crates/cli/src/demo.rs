use std::path::PathBuf;
use std::sync::Arc;
use std::sync::atomic::Ordering;
use std::time::Duration;

use scout_core::nodes::{
    CameraConfig, CameraSource, CameraStats, DetectorConfig, DetectorStats, ModelBackend, Shutdown,
    SinkConfig, SinkStats, StubBackend, run_camera, run_detector, run_sink,
};
use scout_core::postproc::{BBox, Detection, ResizeMode};
use scout_core::wire::{Broker, BrokerConfig};

use crate::AppError;
use crate::args::{DemoArgs, parse_size};
use crate::commands::load_model;

#[derive(Debug, Clone, Copy)]
pub struct DemoSummary {
    pub frames_published: u64,
    pub frames_processed: u64,
    pub detections_published: u64,
    pub frames_replaced: u64,
    pub sink_records: u64,
    pub processed_fps: f64,
    pub wall_seconds: f64,
}

/// Spawns broker + camera + detector (stub or real model) + sink in-process,
/// runs for `duration`, and reports end-to-end throughput and drop counts.
pub fn run_pipeline_demo(args: &DemoArgs) -> Result<DemoSummary, AppError> {
    if args.duration <= 0.0 || !args.duration.is_finite() {
        return Err(AppError::usage(format!(
            "--duration must be positive, got {}",
            args.duration
        )));
    }
    let (width, height) = parse_size(&args.size)
        .ok_or_else(|| AppError::usage(format!("--size expects WxH, got `{}`", args.size)))?;

    // Build everything that can fail before spawning any flow, so a child
    // that cannot start tears the whole demo down.
    let backend: Box<dyn scout_core::nodes::DetectorBackend> =
        match (&args.cfg, &args.weights, args.stub) {
            (Some(cfg), Some(weights), None) => {
                let model = load_model(cfg, weights, args.names.as_deref(), args.model_size)?;
                Box::new(ModelBackend::new(
                    model,
                    scout_core::postproc::DEFAULT_CONF_THRESHOLD,
                    scout_core::postproc::DEFAULT_NMS_THRESHOLD,
                    ResizeMode::Stretch,
                ))
            }
            (_, _, stub) => {
                let service = Duration::from_millis(stub.unwrap_or(50));
                Box::new(StubBackend::new(
                    service,
                    vec![Detection {
                        bbox: BBox::new(0.5, 0.5, 0.25, 0.25),
                        class_id: 0,
                        label: "demo".into(),
                        prob: 0.9,
                    }],
                ))
            }
        };

    let broker = Broker::bind("127.0.0.1:0", BrokerConfig::default())
        .map_err(|e| AppError::runtime(format!("broker bind failed: {e}")))?
        .spawn();
    let endpoint = broker.addr().to_string();

    let out_dir: PathBuf = match &args.out {
        Some(dir) => dir.clone(),
        None => std::env::temp_dir().join(format!("scout-demo-{}", std::process::id())),
    };

    let camera_config = CameraConfig {
        broker: endpoint.clone(),
        topic: "camera".into(),
        width,
        height,
        rate_hz: args.rate,
        source: CameraSource::Pattern,
    };
    camera_config.validate()?;
    let detector_config = DetectorConfig {
        broker: endpoint.clone(),
        in_topic: "camera".into(),
        out_topic: "detections".into(),
    };
    let sink_config = SinkConfig {
        broker: endpoint.clone(),
        in_topic: "detections".into(),
        frames_topic: "camera".into(),
        out_dir: out_dir.clone(),
        emit_empty: false,
    };

    let shutdown = Shutdown::new();
    let cam_stats = Arc::new(CameraStats::default());
    let det_stats = Arc::new(DetectorStats::default());
    let sink_stats = Arc::new(SinkStats::default());

    let started = std::time::Instant::now();
    let sink_handle = {
        let shutdown = shutdown.clone();
        let stats = sink_stats.clone();
        std::thread::spawn(move || run_sink(&sink_config, &shutdown, &stats))
    };
    let det_handle = {
        let shutdown = shutdown.clone();
        let stats = det_stats.clone();
        std::thread::spawn(move || run_detector(&detector_config, backend, &shutdown, &stats))
    };
    let cam_handle = {
        let shutdown = shutdown.clone();
        let stats = cam_stats.clone();
        std::thread::spawn(move || run_camera(&camera_config, &shutdown, &stats))
    };

    std::thread::sleep(Duration::from_secs_f64(args.duration));
    let wall_seconds = started.elapsed().as_secs_f64();
    shutdown.stop();

    let mut first_error: Option<AppError> = None;
    for handle in [cam_handle, det_handle, sink_handle] {
        match handle.join() {
            Ok(Ok(())) => {}
            Ok(Err(e)) => {
                first_error.get_or_insert(e.into());
            }
            Err(_) => {
                first_error.get_or_insert(AppError::runtime("node panicked"));
            }
        }
    }
    broker.shutdown();
    if let Some(e) = first_error {
        return Err(e);
    }

    let frames_processed = det_stats.processed.load(Ordering::Relaxed);
    Ok(DemoSummary {
        frames_published: cam_stats.published.load(Ordering::Relaxed),
        frames_processed,
        detections_published: det_stats.published.load(Ordering::Relaxed),
        frames_replaced: det_stats.replaced.load(Ordering::Relaxed),
        sink_records: sink_stats.records.load(Ordering::Relaxed),
        processed_fps: frames_processed as f64 / wall_seconds,
        wall_seconds,
    })
}

pub fn run_demo_cmd(args: DemoArgs) -> Result<(), AppError> {
    let summary = run_pipeline_demo(&args)?;
    println!("demo finished after {:.1} s", summary.wall_seconds);
    println!("  frames in         : {}", summary.frames_published);
    println!("  frames processed  : {}", summary.frames_processed);
    println!("  detections out    : {}", summary.detections_published);
    println!("  frames dropped    : {}", summary.frames_replaced);
    println!("  sink records      : {}", summary.sink_records);
    println!("  processed FPS     : {:.2}", summary.processed_fps);
    Ok(())
}
