use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use scout_core::bench::{self, ModelEngine, SweepOptions};
use scout_core::imgio;
use scout_core::model::{InputResolution, NetworkModel, load_class_names, load_weights, parse_cfg};
use scout_core::nodes::{
    CameraConfig, CameraSource, CameraStats, DetectorConfig, DetectorStats, ModelBackend, Shutdown,
    SinkConfig, SinkStats, StubBackend, run_camera, run_detector, run_sink,
};
use scout_core::postproc::{Detection, ResizeMode, decode_region, nms, resize_to_input_mode};
use scout_core::wire::{Broker, BrokerConfig};

use crate::args::*;
use crate::config::FileConfig;
use crate::{AppError, check_unit_interval};

/// Loads cfg + weights (+ optional names) and retargets to `size`.
pub fn load_model(
    cfg: &Path,
    weights: &Path,
    names: Option<&Path>,
    size: usize,
) -> Result<NetworkModel, AppError> {
    let cfg_text = std::fs::read_to_string(cfg)
        .map_err(|e| AppError::runtime(format!("cannot read cfg {}: {e}", cfg.display())))?;
    let specs = parse_cfg(&cfg_text)?;
    let bytes = std::fs::read(weights).map_err(|e| {
        AppError::runtime(format!("cannot read weights {}: {e}", weights.display()))
    })?;
    let mut model = load_weights(&specs, &bytes)?;
    if let Some(names_path) = names {
        let text = std::fs::read_to_string(names_path).map_err(|e| {
            AppError::runtime(format!("cannot read names {}: {e}", names_path.display()))
        })?;
        model.set_class_names(load_class_names(&text))?;
    }
    let res = InputResolution::from_side(size).map_err(|e| AppError::usage(e.to_string()))?;
    Ok(model.set_input_size(res)?)
}

pub fn run_broker(args: BrokerArgs, file: &FileConfig) -> Result<(), AppError> {
    let listen = file.resolve(args.listen, "broker", DEFAULT_BROKER);
    let broker = Broker::bind(
        &listen,
        BrokerConfig {
            queue_depth: args.queue_depth,
            ..BrokerConfig::default()
        },
    )
    .map_err(|e| AppError::runtime(format!("cannot bind {listen}: {e}")))?;
    println!("broker listening on {}", broker.local_addr());
    let handle = broker.spawn();
    // Serve until the process is killed.
    loop {
        std::thread::sleep(Duration::from_secs(3600));
        let _ = &handle;
    }
}

pub fn run_camera_cmd(args: CameraArgs, file: &FileConfig) -> Result<(), AppError> {
    let (width, height) = parse_size(&args.size)
        .ok_or_else(|| AppError::usage(format!("--size expects WxH, got `{}`", args.size)))?;
    let source = match args.source.as_str() {
        "pattern" => CameraSource::Pattern,
        dir => CameraSource::Directory(dir.into()),
    };
    let config = CameraConfig {
        broker: file.resolve(args.broker, "broker", DEFAULT_BROKER),
        topic: args.topic,
        width,
        height,
        rate_hz: args.rate,
        source,
    };
    config.validate()?;
    let shutdown = Shutdown::new();
    let stats = Arc::new(CameraStats::default());
    run_camera(&config, &shutdown, &stats)?;
    Ok(())
}

pub fn run_detector_cmd(args: DetectorArgs, file: &FileConfig) -> Result<(), AppError> {
    check_unit_interval(args.conf, "conf")?;
    check_unit_interval(args.nms, "nms")?;
    let backend: Box<dyn scout_core::nodes::DetectorBackend> = match args.stub {
        Some(ms) => Box::new(StubBackend::new(Duration::from_millis(ms), Vec::new())),
        None => {
            let (cfg, weights) = match (&args.cfg, &args.weights) {
                (Some(c), Some(w)) => (c, w),
                _ => {
                    return Err(AppError::usage(
                        "--cfg and --weights are required unless --stub is set",
                    ));
                }
            };
            let model = load_model(cfg, weights, args.names.as_deref(), args.size)?;
            let mode = if args.letterbox {
                ResizeMode::Letterbox
            } else {
                ResizeMode::Stretch
            };
            Box::new(ModelBackend::new(model, args.conf, args.nms, mode))
        }
    };
    let config = DetectorConfig {
        broker: file.resolve(args.broker, "broker", DEFAULT_BROKER),
        in_topic: args.in_topic,
        out_topic: args.out_topic,
    };
    let shutdown = Shutdown::new();
    let stats = Arc::new(DetectorStats::default());
    run_detector(&config, backend, &shutdown, &stats)?;
    Ok(())
}

pub fn run_sink_cmd(args: SinkArgs, file: &FileConfig) -> Result<(), AppError> {
    let config = SinkConfig {
        broker: file.resolve(args.broker, "broker", DEFAULT_BROKER),
        in_topic: args.in_topic,
        frames_topic: args.frames,
        out_dir: args.out,
        emit_empty: args.emit_empty,
    };
    let shutdown = Shutdown::new();
    let stats = Arc::new(SinkStats::default());
    run_sink(&config, &shutdown, &stats)?;
    Ok(())
}

/// One-shot detection core. Deterministic for identical inputs and flags;
/// optionally writes an annotated image.
pub fn detect_once(args: &DetectArgs) -> Result<Vec<Detection>, AppError> {
    check_unit_interval(args.conf, "conf")?;
    check_unit_interval(args.nms, "nms")?;
    let model = load_model(&args.cfg, &args.weights, args.names.as_deref(), args.size)?;
    let image = imgio::load_image(&args.image)?;
    let frame = image.to_frame(0, 0)?;
    let mode = if args.letterbox {
        ResizeMode::Letterbox
    } else {
        ResizeMode::Stretch
    };
    let input = resize_to_input_mode(&frame, model.input_size(), mode)
        .map_err(|e| AppError::runtime(e.to_string()))?;
    if let Some(path) = &args.dump_input {
        let side = model.input_size();
        let plane = side * side;
        let mut pixels = vec![0u8; plane * 3];
        for y in 0..side {
            for x in 0..side {
                for c in 0..3 {
                    pixels[(y * side + x) * 3 + c] =
                        (input.data()[c * plane + y * side + x] * 255.0).round() as u8;
                }
            }
        }
        let dump = imgio::Image::new(side, side, pixels)?;
        imgio::save_ppm(&dump, path)?;
    }
    let pred = model.forward(&input)?;
    let candidates = decode_region(
        &pred,
        model.anchors(),
        model.num_classes(),
        args.conf,
        model.class_names(),
    );
    let detections = nms(&candidates, args.nms);

    if let Some(output) = &args.output {
        let mut annotated = image.clone();
        imgio::annotate(&mut annotated, &detections);
        imgio::save_ppm(&annotated, output)?;
    }
    Ok(detections)
}

pub fn run_detect(args: DetectArgs) -> Result<(), AppError> {
    let detections = detect_once(&args)?;
    for d in &detections {
        println!(
            "{} {:.6} {:.6} {:.6} {:.6} {:.6}",
            d.label, d.prob, d.bbox.cx, d.bbox.cy, d.bbox.w, d.bbox.h
        );
    }
    Ok(())
}

pub fn run_sweep(args: SweepArgs) -> Result<(), AppError> {
    check_unit_interval(args.conf, "conf")?;
    check_unit_interval(args.nms, "nms")?;
    let sizes = parse_sizes(&args.sizes).ok_or_else(|| {
        AppError::usage(format!(
            "--sizes expects a comma list, got `{}`",
            args.sizes
        ))
    })?;
    if sizes.is_empty() {
        return Err(AppError::usage("--sizes must name at least one size"));
    }
    if args.end_to_end {
        let rows = end_to_end_sweep(&args, &sizes)?;
        print!("{}", bench::sweep_table(&rows, None));
        if let Some(path) = &args.csv {
            std::fs::write(path, bench::sweep_csv(&rows, None))?;
            println!("csv written to {}", path.display());
        }
        return Ok(());
    }
    let max_side = *sizes.iter().max().unwrap();
    let start_side = sizes
        .iter()
        .find(|&&s| InputResolution::from_side(s).is_ok())
        .copied()
        .ok_or_else(|| AppError::usage("no valid size in --sizes"))?;
    let model = load_model(&args.cfg, &args.weights, args.names.as_deref(), start_side)?;

    let workload = match &args.images {
        Some(dir) => {
            let mut frames = Vec::new();
            let mut paths: Vec<_> = std::fs::read_dir(dir)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .collect();
            paths.sort();
            for path in paths {
                if let Ok(img) = imgio::load_image(&path) {
                    frames.push(img.to_frame(frames.len() as u32, 0)?);
                }
            }
            frames
        }
        None => (0..8)
            .map(|i| {
                imgio::test_pattern(i, max_side, max_side)
                    .to_frame(i, 0)
                    .map_err(AppError::from)
            })
            .collect::<Result<Vec<_>, _>>()?,
    };

    let mut engine = ModelEngine::new(model, args.conf, args.nms);
    let options = SweepOptions {
        warmup_frames: args.warmup,
        timed_frames: args.frames,
    };
    let rows = bench::sweep(&sizes, &workload, &mut engine, &options)?;
    print!("{}", bench::sweep_table(&rows, None));
    let csv = bench::sweep_csv(&rows, None);
    if let Some(path) = &args.csv {
        std::fs::write(path, &csv)?;
        println!("csv written to {}", path.display());
    }
    Ok(())
}

pub fn run_eval_map(args: EvalMapArgs) -> Result<(), AppError> {
    if !(args.iou > 0.0 && args.iou < 1.0) {
        return Err(AppError::usage(format!(
            "--iou must lie in (0, 1), got {}",
            args.iou
        )));
    }
    let dets_text = std::fs::read_to_string(&args.dets)
        .map_err(|e| AppError::runtime(format!("cannot read {}: {e}", args.dets.display())))?;
    let dets_by_image = bench::load_detections_file(&dets_text)?;
    let truth_by_image = bench::load_truth_dir(&args.truth)?;

    let class_names = match &args.names {
        Some(path) => load_class_names(&std::fs::read_to_string(path).map_err(|e| {
            AppError::runtime(format!("cannot read names {}: {e}", path.display()))
        })?),
        None => Vec::new(),
    };
    let num_classes = if class_names.is_empty() {
        let max_truth = truth_by_image
            .values()
            .flatten()
            .map(|t| t.class_id)
            .max()
            .unwrap_or(0);
        let max_det = dets_by_image
            .values()
            .flatten()
            .map(|d| d.class_id)
            .max()
            .unwrap_or(0);
        max_truth.max(max_det) + 1
    } else {
        class_names.len()
    };

    // Pair per image over the union of ids; detections on images without
    // truth become false positives against empty truth lists.
    let mut ids: Vec<&String> = truth_by_image.keys().chain(dets_by_image.keys()).collect();
    ids.sort();
    ids.dedup();
    let mut detections = Vec::with_capacity(ids.len());
    let mut truth = Vec::with_capacity(ids.len());
    for id in ids {
        detections.push(dets_by_image.get(id).cloned().unwrap_or_default());
        truth.push(truth_by_image.get(id).cloned().unwrap_or_default());
    }

    let result = bench::evaluate_map_with(
        &detections,
        &truth,
        args.iou,
        num_classes,
        args.parallel.max(1),
    )?;
    print!("{}", bench::map_table(&result, &class_names));
    Ok(())
}

pub fn run_convert_voc(args: ConvertVocArgs) -> Result<(), AppError> {
    let names = load_class_names(
        &std::fs::read_to_string(&args.names)
            .map_err(|e| AppError::runtime(format!("cannot read names: {e}")))?,
    );
    std::fs::create_dir_all(&args.out)?;
    let mut converted = 0usize;
    let mut entries: Vec<_> = std::fs::read_dir(&args.xml)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("xml"))
        .collect();
    entries.sort();
    for path in entries {
        let xml = std::fs::read_to_string(&path)?;
        let boxes = bench::convert_voc_xml(&xml, &names)?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("image");
        let lines: String = boxes
            .iter()
            .map(|b| bench::truth_sidecar_line(b) + "\n")
            .collect();
        std::fs::write(args.out.join(format!("{stem}.txt")), lines)?;
        converted += 1;
    }
    println!(
        "converted {converted} annotation files to {}",
        args.out.display()
    );
    Ok(())
}

/// Whole-pipeline sweep: for each size, a camera and a detector run against
/// a private broker; per-frame inference times come from the published
/// DetectionMsgs and FPS from their arrival times, warm-up excluded.
fn end_to_end_sweep(
    args: &SweepArgs,
    sizes: &[usize],
) -> Result<Vec<bench::SweepResult>, AppError> {
    use scout_core::wire::{Broker, BrokerConfig, Client, DetectionMsg, Message};
    use std::time::Instant;

    let warmup = args.warmup;
    let timed = args.frames.max(1);
    let mut rows = Vec::with_capacity(sizes.len());
    for &side in sizes {
        let model = match load_model(&args.cfg, &args.weights, args.names.as_deref(), side) {
            Ok(m) => m,
            Err(e) => {
                rows.push(bench::SweepResult {
                    input_side: side,
                    frames_processed: 0,
                    wall_seconds: 0.0,
                    fps: 0.0,
                    mean_inference_ms: 0.0,
                    p95_inference_ms: 0.0,
                    failed: Some(e.to_string()),
                });
                continue;
            }
        };
        let broker = Broker::bind("127.0.0.1:0", BrokerConfig::default())
            .map_err(|e| AppError::runtime(format!("broker bind failed: {e}")))?
            .spawn();
        let shutdown = Shutdown::new();

        let cam_config = CameraConfig {
            broker: broker.addr().to_string(),
            topic: "camera".into(),
            width: 320,
            height: 240,
            rate_hz: args.rate,
            source: CameraSource::Pattern,
        };
        let cam_stats = Arc::new(CameraStats::default());
        let cam = {
            let shutdown = shutdown.clone();
            let stats = cam_stats.clone();
            std::thread::spawn(move || run_camera(&cam_config, &shutdown, &stats))
        };
        let det_config = DetectorConfig {
            broker: broker.addr().to_string(),
            in_topic: "camera".into(),
            out_topic: "detections".into(),
        };
        let det_stats = Arc::new(DetectorStats::default());
        let backend = Box::new(ModelBackend::new(
            model,
            args.conf,
            args.nms,
            ResizeMode::Stretch,
        ));
        let det = {
            let shutdown = shutdown.clone();
            let stats = det_stats.clone();
            std::thread::spawn(move || run_detector(&det_config, backend, &shutdown, &stats))
        };

        let mut observer =
            Client::connect(broker.addr()).map_err(|e| AppError::runtime(e.to_string()))?;
        observer
            .subscribe("detections")
            .map_err(|e| AppError::runtime(e.to_string()))?;

        let mut seen = 0usize;
        let mut timing_start: Option<Instant> = None;
        let mut inference_ms = Vec::with_capacity(timed);
        let mut wall_seconds = 0.0f64;
        while seen < warmup + timed {
            match observer.recv_timeout(Duration::from_secs(30)) {
                Ok(Some(Message::Data { body, .. })) => {
                    let msg = DetectionMsg::decode(&body)
                        .map_err(|e| AppError::runtime(e.to_string()))?;
                    seen += 1;
                    if seen == warmup {
                        timing_start = Some(Instant::now());
                    } else if seen > warmup {
                        if timing_start.is_none() {
                            // warmup == 0: the window opens on first arrival.
                            timing_start = Some(Instant::now());
                        }
                        inference_ms.push(msg.inference_ms as f64);
                        if seen == warmup + timed {
                            wall_seconds = timing_start.unwrap().elapsed().as_secs_f64();
                        }
                    }
                }
                Ok(_) => {}
                Err(e) => {
                    shutdown.stop();
                    return Err(AppError::runtime(format!("end-to-end sweep stalled: {e}")));
                }
            }
        }
        shutdown.stop();
        let _ = cam.join();
        let _ = det.join();
        broker.shutdown();

        inference_ms.sort_by(f64::total_cmp);
        let mean = inference_ms.iter().sum::<f64>() / inference_ms.len() as f64;
        let p95 = inference_ms
            [((0.95 * inference_ms.len() as f64).ceil() as usize).clamp(1, inference_ms.len()) - 1];
        rows.push(bench::SweepResult {
            input_side: side,
            frames_processed: timed,
            wall_seconds,
            fps: timed as f64 / wall_seconds.max(1e-9),
            mean_inference_ms: mean,
            p95_inference_ms: p95,
            failed: None,
        });
    }
    Ok(rows)
}
