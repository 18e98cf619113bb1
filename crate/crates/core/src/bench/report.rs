use std::collections::BTreeMap;
use std::fmt::Write;

use super::map::MapResult;
use super::sweep::SweepResult;

/// CSV with columns `input_side,frames,wall_s,fps,mean_ms,p95_ms[,mAP]`.
/// Failed rows carry zeros and the reason in a trailing comment column-free
/// form is avoided: the table view names the failure instead.
pub fn sweep_csv(rows: &[SweepResult], map_by_side: Option<&BTreeMap<usize, f64>>) -> String {
    let mut out = String::new();
    let with_map = map_by_side.is_some();
    out.push_str("input_side,frames,wall_s,fps,mean_ms,p95_ms");
    if with_map {
        out.push_str(",mAP");
    }
    out.push('\n');
    for row in rows {
        let _ = write!(
            out,
            "{},{},{:.4},{:.3},{:.3},{:.3}",
            row.input_side,
            row.frames_processed,
            row.wall_seconds,
            row.fps,
            row.mean_inference_ms,
            row.p95_inference_ms
        );
        if let Some(maps) = map_by_side {
            match maps.get(&row.input_side) {
                Some(m) => {
                    let _ = write!(out, ",{:.4}", m);
                }
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}

/// Aligned text table over the same columns, one row per size.
pub fn sweep_table(rows: &[SweepResult], map_by_side: Option<&BTreeMap<usize, f64>>) -> String {
    let mut out = String::new();
    let with_map = map_by_side.is_some();
    let _ = writeln!(
        out,
        "{:>10} {:>8} {:>9} {:>8} {:>9} {:>9}{}",
        "input_side",
        "frames",
        "wall_s",
        "fps",
        "mean_ms",
        "p95_ms",
        if with_map { "      mAP" } else { "" }
    );
    for row in rows {
        if let Some(reason) = &row.failed {
            let _ = writeln!(out, "{:>10} failed: {}", row.input_side, reason);
            continue;
        }
        let _ = write!(
            out,
            "{:>10} {:>8} {:>9.3} {:>8.2} {:>9.2} {:>9.2}",
            row.input_side,
            row.frames_processed,
            row.wall_seconds,
            row.fps,
            row.mean_inference_ms,
            row.p95_inference_ms
        );
        if let Some(maps) = map_by_side {
            match maps.get(&row.input_side) {
                Some(m) => {
                    let _ = write!(out, " {:>8.2}%", m * 100.0);
                }
                None => {
                    let _ = write!(out, " {:>9}", "-");
                }
            }
        }
        out.push('\n');
    }
    out
}

/// Per-class AP table plus the aggregate mean.
pub fn map_table(result: &MapResult, class_names: &[String]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<16} {:>8}", "class", "AP");
    for r in &result.per_class {
        let name = class_names
            .get(r.class_id)
            .cloned()
            .unwrap_or_else(|| format!("class{}", r.class_id));
        let _ = writeln!(out, "{:<16} {:>7.2}%", name, r.ap * 100.0);
    }
    let _ = writeln!(out, "{:<16} {:>7.2}%", "mAP", result.map * 100.0);
    if result.unknown_class_detections > 0 {
        let _ = writeln!(
            out,
            "({} detections with unknown class ids ignored)",
            result.unknown_class_detections
        );
    }
    out
}
