//! Detection files: one `image_id class_id confidence cx cy w h` line per
//! detection, nine decimals on write.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::head::{BBox, Detection};

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRecord {
    pub image_id: String,
    pub detection: Detection,
}

impl DetectionRecord {
    pub fn new(image_id: impl Into<String>, detection: Detection) -> Self {
        DetectionRecord {
            image_id: image_id.into(),
            detection,
        }
    }
}

pub fn format_detections(records: &[DetectionRecord]) -> String {
    records
        .iter()
        .map(|r| {
            let d = &r.detection;
            format!(
                "{} {} {:.9} {:.9} {:.9} {:.9} {:.9}\n",
                r.image_id, d.class_id, d.confidence, d.bbox.cx, d.bbox.cy, d.bbox.w, d.bbox.h
            )
        })
        .collect()
}

pub fn parse_detections(text: &str, context: &str) -> Result<Vec<DetectionRecord>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let err = |message: String| Error::Parse {
            context: context.to_string(),
            line: i + 1,
            message,
        };
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if tokens.len() != 7 {
            return Err(err(format!("expected 7 fields, found {}", tokens.len())));
        }
        let class_id: usize = tokens[1]
            .parse()
            .map_err(|_| err(format!("non-numeric class id {:?}", tokens[1])))?;
        let mut vals = [0.0f64; 5];
        for (v, tok) in vals.iter_mut().zip(&tokens[2..]) {
            *v = tok
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| err(format!("non-numeric value {tok:?}")))?;
        }
        let [confidence, cx, cy, w, h] = vals;
        if !(0.0..=1.0).contains(&confidence) {
            return Err(err(format!("confidence {confidence} outside [0, 1]")));
        }
        if w <= 0.0 || h <= 0.0 {
            return Err(err(format!("non-positive box size {w} x {h}")));
        }
        out.push(DetectionRecord::new(
            tokens[0],
            Detection {
                bbox: BBox::new(cx, cy, w, h),
                class_id,
                confidence,
            },
        ));
    }
    Ok(out)
}

pub fn read_detections(path: impl AsRef<Path>) -> Result<Vec<DetectionRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_detections(&text, &path.display().to_string())
}

pub fn write_detections(path: impl AsRef<Path>, records: &[DetectionRecord]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_detections(records)).map_err(|e| Error::io(path, e))
}
