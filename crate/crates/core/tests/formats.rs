mod common;

use std::fs;

use common::*;
use ocular::data::{
    decode_pnm, encode_pnm, parse_annotations, read_annotations, read_pnm, write_annotations, write_pnm, Annotation,
    DatasetManifest, Image,
};
use ocular::detfile::{parse_detections, read_detections, write_detections, DetectionRecord};
use ocular::head::Detection;
use ocular::network::{read_weights_header, NetworkConfig};
use ocular::{Error, Model};
use rand::Rng;

fn tiny_model(classes: usize, seed: u64) -> Model {
    Model::build(&NetworkConfig::tiny(classes), seed).unwrap()
}

#[test]
fn weights_round_trip_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.weights");
    let mut model = tiny_model(2, 4);
    // perturb running statistics so every stored field is non-default
    for b in model.blocks_mut() {
        if let Some(bn) = b.bn.as_mut() {
            bn.running_mean.iter_mut().enumerate().for_each(|(i, v)| *v = i as f32 * 0.01);
            bn.running_var.iter_mut().for_each(|v| *v = 1.5);
        }
    }
    model.save_weights(&path).unwrap();
    let header = read_weights_header(&path).unwrap();
    assert_eq!((header.num_classes, header.num_anchors, header.input_size), (2, 5, 160));
    let mut loaded = tiny_model(2, 99);
    assert_ne!(loaded, model);
    loaded.load_weights(&path).unwrap();
    assert_eq!(loaded.to_weights_bytes(), model.to_weights_bytes());
    assert_eq!(loaded, model);
}

#[test]
fn malformed_weights_are_rejected() {
    let model = tiny_model(1, 0);
    let bytes = model.to_weights_bytes();

    let mut bad = bytes.clone();
    bad[..8].copy_from_slice(b"XXXXXXXX");
    let err = tiny_model(1, 0).load_weights_bytes(&bad).unwrap_err();
    assert_eq!(err.to_string(), "not a weights file");

    let err = tiny_model(2, 0).load_weights_bytes(&bytes).unwrap_err();
    assert!(matches!(err, Error::WeightsConfigMismatch { .. }), "{err}");

    let cut = &bytes[..bytes.len() / 2];
    match tiny_model(1, 0).load_weights_bytes(cut).unwrap_err() {
        Error::TruncatedWeights { layer, expected, actual } => {
            assert!(layer > 0);
            assert_eq!(expected, bytes.len());
            assert_eq!(actual, cut.len());
        }
        e => panic!("unexpected {e}"),
    }
}

#[test]
fn annotations_round_trip_within_serialization_precision() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = rng(21);
    for k in 0..50 {
        let anns: Vec<Annotation> = (0..r.random_range(0..5))
            .map(|_| Annotation {
                class_id: r.random_range(0..2),
                bbox: random_box(&mut r),
            })
            .collect();
        let path = dir.path().join(format!("{k}.txt"));
        write_annotations(&path, &anns).unwrap();
        let back = read_annotations(&path).unwrap();
        assert_eq!(back.len(), anns.len());
        for (a, b) in anns.iter().zip(&back) {
            assert_eq!(a.class_id, b.class_id);
            for (x, y) in [(a.bbox.cx, b.bbox.cx), (a.bbox.cy, b.bbox.cy), (a.bbox.w, b.bbox.w), (a.bbox.h, b.bbox.h)] {
                assert!((x - y).abs() <= 1e-6);
            }
        }
    }
}

#[test]
fn malformed_annotations_name_the_line() {
    let err = parse_annotations("0 0.5 0.5 0.2 0.3\n2 0.5 0.5 0.1 0.1\n", "a.txt").unwrap_err();
    assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    let err = parse_annotations("0 0.5 x 0.2 0.3\n", "a.txt").unwrap_err();
    assert!(matches!(err, Error::Parse { line: 1, .. }));
    let err = parse_annotations("1 0.5 0.5 1.2 0.3\n", "a.txt").unwrap_err();
    assert!(err.to_string().contains("outside [0, 1]"), "{err}");
    assert!(parse_annotations("", "a.txt").unwrap().is_empty());
}

#[test]
fn pnm_round_trip_for_colour_and_grey() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = rng(5);
    for (k, channels) in [1usize, 3].into_iter().enumerate() {
        let (w, h) = (r.random_range(1..40), r.random_range(1..40));
        let mut img = Image::new(w, h, channels).unwrap();
        img.pixels.iter_mut().for_each(|p| *p = r.random());
        let path = dir.path().join(format!("{k}.pnm"));
        write_pnm(&path, &img).unwrap();
        assert_eq!(read_pnm(&path).unwrap(), img);
    }
}

#[test]
fn pnm_comments_match_comment_free_twin() {
    let mut img = Image::new(2, 2, 3).unwrap();
    img.pixels.iter_mut().enumerate().for_each(|(i, p)| *p = (i * 20) as u8);
    let plain = encode_pnm(&img);
    let mut commented = b"P6 # colour\n# size follows\n2 # width\n 2\n# depth\n255\n".to_vec();
    commented.extend_from_slice(&img.pixels);
    assert_eq!(decode_pnm(&commented).unwrap(), decode_pnm(&plain).unwrap());
}

#[test]
fn malformed_pnm_is_rejected() {
    let err = decode_pnm(b"P7\n1 1\n255\n\0\0\0").unwrap_err();
    assert!(err.to_string().contains("magic"), "{err}");
    let err = decode_pnm(b"P5\n1 1\n65535\n\0\0").unwrap_err();
    assert!(err.to_string().contains("maxval"), "{err}");
    let err = decode_pnm(b"P6\n2 2\n255\n\0\0\0").unwrap_err();
    assert!(err.to_string().contains("truncated"), "{err}");
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.ppm");
    fs::write(&path, b"P6\n2 2\n255\n\0").unwrap();
    assert!(read_pnm(&path).unwrap_err().to_string().contains("bad.ppm"));
}

#[test]
fn detections_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.txt");
    let mut r = rng(8);
    let recs: Vec<DetectionRecord> = (0..40)
        .map(|i| {
            DetectionRecord::new(
                format!("img_{}", i % 7),
                Detection {
                    bbox: random_box(&mut r),
                    class_id: r.random_range(0..2),
                    confidence: r.random(),
                },
            )
        })
        .collect();
    write_detections(&path, &recs).unwrap();
    let back = read_detections(&path).unwrap();
    assert_eq!(back.len(), recs.len());
    for (a, b) in recs.iter().zip(&back) {
        assert_eq!(a.image_id, b.image_id);
        assert_eq!(a.detection.class_id, b.detection.class_id);
        assert!((a.detection.confidence - b.detection.confidence).abs() <= 1e-9);
        assert!((a.detection.bbox.cx - b.detection.bbox.cx).abs() <= 1e-9);
        assert!((a.detection.bbox.h - b.detection.bbox.h).abs() <= 1e-9);
    }
    // formatted text is a fixed point
    write_detections(dir.path().join("e.txt"), &back).unwrap();
    assert_eq!(fs::read(&path).unwrap(), fs::read(dir.path().join("e.txt")).unwrap());
}

#[test]
fn malformed_detections_name_the_line() {
    for (text, line) in [
        ("a 0 0.5 0.5 0.5 0.1 0.1\nb 0 0.5 0.5 0.5 0.1\n", 2),
        ("a 0 1.5 0.5 0.5 0.1 0.1\n", 1),
        ("a 0 0.5 0.5 0.5 0.0 0.1\n", 1),
        ("a x 0.5 0.5 0.5 0.1 0.1\n", 1),
        ("\na 0 0.5 NaN 0.5 0.1 0.1\n", 2),
    ] {
        let err = parse_detections(text, "d.txt").unwrap_err();
        assert!(matches!(err, Error::Parse { line: l, .. } if l == line), "{text:?}: {err}");
    }
}

#[test]
fn manifest_round_trip_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = ocular::data::synth_generate(10, 3, 64, dir.path()).unwrap();
    let back = DatasetManifest::read(dir.path().join("manifest.tsv")).unwrap();
    assert_eq!(back, manifest);
    assert_eq!(back.to_text(), fs::read_to_string(dir.path().join("manifest.tsv")).unwrap());
    let err = DatasetManifest::parse("# seed=1\na\tx.ppm\tx.txt\tsideways\n", ".", "m.tsv").unwrap_err();
    assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
}
