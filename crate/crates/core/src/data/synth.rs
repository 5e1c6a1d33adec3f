//! Synthetic ocular images with coarse annotations.
//!
//! Each image holds one periocular patch (a light rounded rectangle with
//! eyelid arcs) containing one iris (a dark ellipse with a pupil). The fine
//! regions are the patch rectangle and the ellipse's bounding box; the
//! written annotations expand each by a random 5–15 % margin per side.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};
use rand_xoshiro::Xoshiro256PlusPlus;

use super::annotation::{write_annotations, Annotation};
use super::manifest::{make_splits, DatasetManifest};
use super::pnm::{write_pnm, Image};
use crate::error::{Error, Result};
use crate::head::{BBox, IRIS, PERIOCULAR};

pub const MIN_IMAGE_SIZE: usize = 64;
pub const MARGIN_RANGE: (f64, f64) = (0.05, 0.15);

/// One rendered image with its coarse (annotated) and fine (true) boxes.
#[derive(Debug, Clone)]
pub struct SynthSample {
    pub image: Image,
    pub coarse: Vec<Annotation>,
    pub fine: Vec<Annotation>,
}

fn image_rng(seed: u64, index: usize) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn expand(fine: &BBox, margin: f64) -> BBox {
    BBox::new(fine.cx, fine.cy, fine.w * (1.0 + 2.0 * margin), fine.h * (1.0 + 2.0 * margin))
        .clipped()
        .expect("expanded box overlaps the image")
}

fn jitter(rng: &mut impl Rng, base: [f64; 3], spread: f64) -> [f64; 3] {
    let shift = rng.random_range(-spread..spread);
    base.map(|c| c + shift + rng.random_range(-spread / 3.0..spread / 3.0))
}

/// Renders image `index` of the set generated from `seed`.
pub fn render_sample(seed: u64, index: usize, size: usize) -> Result<SynthSample> {
    if size < MIN_IMAGE_SIZE {
        return Err(Error::invalid(format!("image size must be at least {MIN_IMAGE_SIZE}, got {size}")));
    }
    let mut rng = image_rng(seed, index);
    let s = size as f64;

    // Patch geometry in pixels. The patch plus its widest margin stays inside
    // the image so clipping never touches a coarse box.
    let pw = rng.random_range(0.5..0.72) * s;
    let ph = pw * rng.random_range(0.5..0.7);
    let reach_x = pw * (0.5 + MARGIN_RANGE.1) + 1.0;
    let reach_y = ph * (0.5 + MARGIN_RANGE.1) + 1.0;
    let pcx = rng.random_range(reach_x..s - reach_x);
    let pcy = rng.random_range(reach_y..s - reach_y);
    let corner = ph * rng.random_range(0.2..0.45);

    // Iris: radius from the patch height, centre kept far enough from the
    // patch border that the expanded iris box stays inside the patch.
    let ry = ph * rng.random_range(0.26..0.32);
    let rx = ry * rng.random_range(0.9..1.1);
    let slack_x = pw / 2.0 - rx * (1.0 + 2.0 * MARGIN_RANGE.1) - 1.0;
    let slack_y = ph / 2.0 - ry * (1.0 + 2.0 * MARGIN_RANGE.1) - 1.0;
    let icx = pcx + rng.random_range(-0.6..0.6) * slack_x.max(0.0);
    let icy = pcy + rng.random_range(-0.3..0.3) * slack_y.max(0.0);
    let pupil = rx.min(ry) * rng.random_range(0.3..0.5);

    let background = jitter(&mut rng, [70.0, 65.0, 60.0], 25.0);
    let skin = jitter(&mut rng, [195.0, 160.0, 140.0], 25.0);
    let lid = skin.map(|c| c * 0.55);
    let iris = jitter(&mut rng, [80.0, 70.0, 55.0], 30.0);
    let pupil_colour = [18.0, 15.0, 15.0];
    let lid_thickness = (ph * 0.04).max(1.0);
    let lid_span = pw * 0.45;
    let noise = Normal::new(0.0, 8.0).expect("valid normal");

    let mut image = Image::new(size, size, 3)?;
    for y in 0..size {
        for x in 0..size {
            let (fx, fy) = (x as f64 + 0.5, y as f64 + 0.5);
            let mut colour = background;
            // rounded rectangle
            let dx = ((fx - pcx).abs() - (pw / 2.0 - corner)).max(0.0);
            let dy = ((fy - pcy).abs() - (ph / 2.0 - corner)).max(0.0);
            let in_patch = (fx - pcx).abs() <= pw / 2.0
                && (fy - pcy).abs() <= ph / 2.0
                && dx * dx + dy * dy <= corner * corner;
            if in_patch {
                colour = skin;
                let t = ((fx - icx) / lid_span).clamp(-1.0, 1.0);
                let bow = 1.0 - t * t;
                let upper = icy - ry * (0.3 + 0.9 * bow);
                let lower = icy + ry * (0.3 + 0.8 * bow);
                if (fx - icx).abs() < lid_span
                    && ((fy - upper).abs() < lid_thickness || (fy - lower).abs() < lid_thickness)
                {
                    colour = lid;
                }
                let ex = (fx - icx) / rx;
                let ey = (fy - icy) / ry;
                if ex * ex + ey * ey <= 1.0 {
                    colour = iris;
                }
                if (fx - icx).hypot(fy - icy) <= pupil {
                    colour = pupil_colour;
                }
            }
            let px = image.pixel_mut(x, y);
            for (p, c) in px.iter_mut().zip(colour) {
                *p = (c + noise.sample(&mut rng)).round().clamp(0.0, 255.0) as u8;
            }
        }
    }

    let fine_patch = BBox::new(pcx / s, pcy / s, pw / s, ph / s);
    let fine_iris = BBox::new(icx / s, icy / s, 2.0 * rx / s, 2.0 * ry / s);
    let margin_iris = rng.random_range(MARGIN_RANGE.0..MARGIN_RANGE.1);
    let margin_patch = rng.random_range(MARGIN_RANGE.0..MARGIN_RANGE.1);
    let fine = vec![
        Annotation { class_id: IRIS, bbox: fine_iris },
        Annotation { class_id: PERIOCULAR, bbox: fine_patch },
    ];
    let coarse = vec![
        Annotation { class_id: IRIS, bbox: expand(&fine_iris, margin_iris) },
        Annotation { class_id: PERIOCULAR, bbox: expand(&fine_patch, margin_patch) },
    ];
    Ok(SynthSample { image, coarse, fine })
}

pub fn image_id(index: usize) -> String {
    format!("synth_{index:05}")
}

/// Writes `count` images under `output_dir` (`images/`, `labels/`, with the
/// fine boxes in `labels/*.fine.txt`) plus `manifest.tsv`, split with `seed`.
pub fn synth_generate(
    count: usize,
    seed: u64,
    image_size: usize,
    output_dir: impl AsRef<Path>,
) -> Result<DatasetManifest> {
    if count == 0 {
        return Err(Error::invalid("image count must be at least 1"));
    }
    if image_size < MIN_IMAGE_SIZE {
        return Err(Error::invalid(format!(
            "image size must be at least {MIN_IMAGE_SIZE}, got {image_size}"
        )));
    }
    let out = output_dir.as_ref();
    for dir in [out.join("images"), out.join("labels")] {
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    let mut items = Vec::with_capacity(count);
    for index in 0..count {
        let sample = render_sample(seed, index, image_size)?;
        let id = image_id(index);
        let image_rel = PathBuf::from("images").join(format!("{id}.ppm"));
        let label_rel = PathBuf::from("labels").join(format!("{id}.txt"));
        write_pnm(out.join(&image_rel), &sample.image)?;
        write_annotations(out.join(&label_rel), &sample.coarse)?;
        write_annotations(out.join("labels").join(format!("{id}.fine.txt")), &sample.fine)?;
        items.push((id, image_rel, label_rel));
    }
    let mut manifest = make_splits(items, seed)?;
    manifest.base_dir = out.to_path_buf();
    manifest.write(out.join("manifest.tsv"))?;
    Ok(manifest)
}
