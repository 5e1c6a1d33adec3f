//! Coarse annotation files: one `class_id cx cy w h` line per object,
//! normalized coordinates, six decimals on write.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::head::{BBox, IRIS, PERIOCULAR};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Annotation {
    pub class_id: usize,
    pub bbox: BBox,
}

pub fn parse_annotations(text: &str, context: &str) -> Result<Vec<Annotation>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let err = |message: String| Error::Parse {
            context: context.to_string(),
            line: line_no,
            message,
        };
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if tokens.len() != 5 {
            return Err(err(format!("expected 5 fields, found {}", tokens.len())));
        }
        let class_id: usize = tokens[0]
            .parse()
            .map_err(|_| err(format!("non-numeric class id {:?}", tokens[0])))?;
        if class_id != IRIS && class_id != PERIOCULAR {
            return Err(err(format!("class id {class_id} not in {{0, 1}}")));
        }
        let mut vals = [0.0f64; 4];
        for (v, tok) in vals.iter_mut().zip(&tokens[1..]) {
            *v = tok.parse().map_err(|_| err(format!("non-numeric value {tok:?}")))?;
            if !(0.0..=1.0).contains(v) {
                return Err(err(format!("value {tok} outside [0, 1]")));
            }
        }
        out.push(Annotation {
            class_id,
            bbox: BBox::new(vals[0], vals[1], vals[2], vals[3]),
        });
    }
    Ok(out)
}

pub fn format_annotations(annotations: &[Annotation]) -> String {
    annotations
        .iter()
        .map(|a| {
            format!(
                "{} {:.6} {:.6} {:.6} {:.6}\n",
                a.class_id, a.bbox.cx, a.bbox.cy, a.bbox.w, a.bbox.h
            )
        })
        .collect()
}

pub fn read_annotations(path: impl AsRef<Path>) -> Result<Vec<Annotation>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_annotations(&text, &path.display().to_string())
}

pub fn write_annotations(path: impl AsRef<Path>, annotations: &[Annotation]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_annotations(annotations)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_iris_line() {
        let a = parse_annotations("0 0.5 0.5 0.2 0.3\n", "t").unwrap();
        assert_eq!(a, vec![Annotation { class_id: 0, bbox: BBox::new(0.5, 0.5, 0.2, 0.3) }]);
    }

    #[test]
    fn empty_file_is_empty_list() {
        assert!(parse_annotations("", "t").unwrap().is_empty());
    }

    #[test]
    fn bad_class_reports_line() {
        match parse_annotations("2 0.5 0.5 0.1 0.1\n", "t") {
            Err(Error::Parse { line: 1, message, .. }) => assert!(message.contains("class")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_numeric_and_range_errors() {
        assert!(matches!(
            parse_annotations("0 0.5 0.5 0.1 0.1\n1 x 0.5 0.1 0.1\n", "t"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(parse_annotations("0 0.5 1.5 0.1 0.1\n", "t").is_err());
    }
}
