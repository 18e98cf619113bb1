use std::collections::BTreeMap;
use std::path::Path;

use super::BenchError;
use super::map::{CornerBox, EvalDetection, GroundTruthBox};

/// Parses one ground-truth sidecar: per line,
/// `class_id x_min y_min x_max y_max difficult_flag`.
pub fn load_truth_sidecar(text: &str) -> Result<Vec<GroundTruthBox>, BenchError> {
    let mut boxes = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(BenchError::BadTruthLine {
                line,
                message: format!("expected 6 fields, got {}", fields.len()),
            });
        }
        let parse_f = |s: &str, what: &str| -> Result<f32, BenchError> {
            s.parse().map_err(|_| BenchError::BadTruthLine {
                line,
                message: format!("bad {what} `{s}`"),
            })
        };
        let class_id: usize = fields[0].parse().map_err(|_| BenchError::BadTruthLine {
            line,
            message: format!("bad class id `{}`", fields[0]),
        })?;
        let bbox = CornerBox::new(
            parse_f(fields[1], "x_min")?,
            parse_f(fields[2], "y_min")?,
            parse_f(fields[3], "x_max")?,
            parse_f(fields[4], "y_max")?,
        );
        let difficult = match fields[5] {
            "0" => false,
            "1" => true,
            other => {
                return Err(BenchError::BadTruthLine {
                    line,
                    message: format!("bad difficult flag `{other}`"),
                });
            }
        };
        boxes.push(GroundTruthBox {
            class_id,
            bbox,
            difficult,
        });
    }
    Ok(boxes)
}

/// Renders one sidecar line.
pub fn truth_sidecar_line(b: &GroundTruthBox) -> String {
    format!(
        "{} {} {} {} {} {}",
        b.class_id,
        b.bbox.x_min,
        b.bbox.y_min,
        b.bbox.x_max,
        b.bbox.y_max,
        u8::from(b.difficult)
    )
}

/// Loads every `*.txt` sidecar in `dir`, keyed by file stem (image id).
pub fn load_truth_dir(dir: &Path) -> Result<BTreeMap<String, Vec<GroundTruthBox>>, BenchError> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("txt") {
            continue;
        }
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_string();
        let boxes = load_truth_sidecar(&std::fs::read_to_string(&path)?)?;
        out.insert(stem, boxes);
    }
    Ok(out)
}

/// Detections file: per line, `image_id class_id prob x_min y_min x_max y_max`.
pub fn load_detections_file(
    text: &str,
) -> Result<BTreeMap<String, Vec<EvalDetection>>, BenchError> {
    let mut out: BTreeMap<String, Vec<EvalDetection>> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 7 {
            return Err(BenchError::BadTruthLine {
                line,
                message: format!("expected 7 fields, got {}", fields.len()),
            });
        }
        let parse_f = |s: &str, what: &str| -> Result<f32, BenchError> {
            s.parse().map_err(|_| BenchError::BadTruthLine {
                line,
                message: format!("bad {what} `{s}`"),
            })
        };
        let class_id: usize = fields[1].parse().map_err(|_| BenchError::BadTruthLine {
            line,
            message: format!("bad class id `{}`", fields[1]),
        })?;
        out.entry(fields[0].to_string())
            .or_default()
            .push(EvalDetection {
                class_id,
                prob: parse_f(fields[2], "prob")?,
                bbox: CornerBox::new(
                    parse_f(fields[3], "x_min")?,
                    parse_f(fields[4], "y_min")?,
                    parse_f(fields[5], "x_max")?,
                    parse_f(fields[6], "y_max")?,
                ),
            });
    }
    Ok(out)
}

/// Extracts the text content of the first `<tag>…</tag>` inside `xml`,
/// starting the scan at `from`. Returns (content, end-position).
fn xml_field<'a>(xml: &'a str, tag: &str, from: usize) -> Option<(&'a str, usize)> {
    let open = format!("<{tag}>");
    let close = format!("</{tag}>");
    let start = xml[from..].find(&open)? + from + open.len();
    let end = xml[start..].find(&close)? + start;
    Some((xml[start..end].trim(), end + close.len()))
}

/// Minimal converter from a VOC annotation XML to ground-truth boxes. Only
/// `<object>` name/bndbox/difficult fields are read; boxes are clamped to
/// the declared image size when present.
pub fn convert_voc_xml(
    xml: &str,
    class_names: &[String],
) -> Result<Vec<GroundTruthBox>, BenchError> {
    let (width, height) = match xml_field(xml, "size", 0) {
        Some((_, _)) => {
            let w = xml_field(xml, "width", 0)
                .and_then(|(v, _)| v.parse::<f32>().ok())
                .unwrap_or(f32::INFINITY);
            let h = xml_field(xml, "height", 0)
                .and_then(|(v, _)| v.parse::<f32>().ok())
                .unwrap_or(f32::INFINITY);
            (w, h)
        }
        None => (f32::INFINITY, f32::INFINITY),
    };

    let mut boxes = Vec::new();
    let mut pos = 0usize;
    while let Some(obj_start) = xml[pos..].find("<object>") {
        let obj_start = pos + obj_start;
        let obj_end = xml[obj_start..]
            .find("</object>")
            .map(|e| obj_start + e)
            .ok_or_else(|| BenchError::BadXml("unterminated <object>".into()))?;
        let body = &xml[obj_start..obj_end];

        let (name, _) = xml_field(body, "name", 0)
            .ok_or_else(|| BenchError::BadXml("<object> without <name>".into()))?;
        let class_id = class_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| BenchError::UnknownClassName(name.to_string()))?;
        let difficult = xml_field(body, "difficult", 0)
            .map(|(v, _)| v == "1")
            .unwrap_or(false);
        let coord = |tag: &str| -> Result<f32, BenchError> {
            xml_field(body, tag, 0)
                .and_then(|(v, _)| v.parse::<f32>().ok().map(|f| (f, 0)))
                .map(|(f, _)| f)
                .ok_or_else(|| BenchError::BadXml(format!("missing or bad <{tag}>")))
        };
        let bbox = CornerBox::new(
            coord("xmin")?,
            coord("ymin")?,
            coord("xmax")?,
            coord("ymax")?,
        )
        .clamped(width, height);
        boxes.push(GroundTruthBox {
            class_id,
            bbox,
            difficult,
        });
        pos = obj_end + "</object>".len();
    }
    Ok(boxes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sidecar_round_trip() {
        let text = "0 10 20 30 40 0\n5 1.5 2.5 3.5 4.5 1\n# comment\n\n";
        let boxes = load_truth_sidecar(text).unwrap();
        assert_eq!(boxes.len(), 2);
        assert_eq!(boxes[0].class_id, 0);
        assert!(!boxes[0].difficult);
        assert!(boxes[1].difficult);
        let rendered: String = boxes.iter().map(|b| truth_sidecar_line(b) + "\n").collect();
        assert_eq!(load_truth_sidecar(&rendered).unwrap(), boxes);
    }

    #[test]
    fn sidecar_bad_line_reports_position() {
        let err = load_truth_sidecar("0 1 2 3 4 0\n0 1 2 3\n").unwrap_err();
        assert!(matches!(err, BenchError::BadTruthLine { line: 2, .. }));
    }

    #[test]
    fn voc_xml_extraction() {
        let xml = r#"<annotation>
  <size><width>640</width><height>480</height><depth>3</depth></size>
  <object>
    <name>dog</name>
    <difficult>0</difficult>
    <bndbox><xmin>48</xmin><ymin>240</ymin><xmax>195</xmax><ymax>371</ymax></bndbox>
  </object>
  <object>
    <name>person</name>
    <difficult>1</difficult>
    <bndbox><xmin>8</xmin><ymin>12</ymin><xmax>700</xmax><ymax>200</ymax></bndbox>
  </object>
</annotation>"#;
        let names: Vec<String> = ["cat", "dog", "person"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let boxes = convert_voc_xml(xml, &names).unwrap();
        assert_eq!(boxes.len(), 2);
        assert_eq!(boxes[0].class_id, 1);
        assert_eq!(boxes[0].bbox, CornerBox::new(48.0, 240.0, 195.0, 371.0));
        assert!(boxes[1].difficult);
        // Clamped to the declared 640x480.
        assert_eq!(boxes[1].bbox.x_max, 640.0);
    }

    #[test]
    fn voc_xml_unknown_class_is_an_error() {
        let xml = "<object><name>zebra</name><bndbox><xmin>1</xmin><ymin>1</ymin><xmax>2</xmax><ymax>2</ymax></bndbox></object>";
        assert!(matches!(
            convert_voc_xml(xml, &["dog".to_string()]),
            Err(BenchError::UnknownClassName(_))
        ));
    }

    #[test]
    fn detections_file_grouped_by_image() {
        let text = "img1 0 0.9 1 2 3 4\nimg2 1 0.5 5 6 7 8\nimg1 0 0.3 0 0 1 1\n";
        let dets = load_detections_file(text).unwrap();
        assert_eq!(dets["img1"].len(), 2);
        assert_eq!(dets["img2"].len(), 1);
    }
}
