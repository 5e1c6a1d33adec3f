//! Images, annotations, manifests and the synthetic generator.

pub mod annotation;
pub mod manifest;
pub mod pnm;
pub mod synth;

pub use annotation::{format_annotations, parse_annotations, read_annotations, write_annotations, Annotation};
pub use manifest::{make_splits, split_sizes, DatasetManifest, ImageItem, ManifestEntry, Split};
pub use pnm::{decode_pnm, encode_pnm, read_pnm, write_pnm, Image};
pub use synth::{image_id, render_sample, synth_generate, SynthSample, MARGIN_RANGE, MIN_IMAGE_SIZE};

use crate::error::{Error, Result};
use crate::tensor::{Shape, TensorT};

/// Converts an image to a `(1, channels, size, size)` tensor in [0, 1].
/// The image is stretched to the square input (bilinear, pixel-centre
/// aligned), so normalized annotations need no adjustment. Grey images are
/// replicated to three channels; colour images are averaged to one.
pub fn image_to_tensor(image: &Image, channels: usize, size: usize) -> Result<TensorT<f32>> {
    if !(channels == 1 || channels == 3) || size == 0 {
        return Err(Error::invalid(format!(
            "cannot convert image to {channels} channels at size {size}"
        )));
    }
    let sample = |x: usize, y: usize, c: usize| -> f32 {
        let px = image.pixel(x, y);
        let v = match (image.channels, channels) {
            (1, _) => px[0] as f32,
            (3, 3) => px[c] as f32,
            _ => (px[0] as f32 + px[1] as f32 + px[2] as f32) / 3.0,
        };
        v / 255.0
    };
    let axis = |out: usize, len: usize| -> (usize, usize, f32) {
        let pos = ((out as f32 + 0.5) * len as f32 / size as f32 - 0.5).max(0.0);
        let lo = (pos.floor() as usize).min(len - 1);
        let hi = (lo + 1).min(len - 1);
        (lo, hi, pos - lo as f32)
    };
    let mut t = TensorT::zeros(Shape::new(1, channels, size, size));
    for y in 0..size {
        let (y0, y1, fy) = axis(y, image.height);
        for x in 0..size {
            let (x0, x1, fx) = axis(x, image.width);
            for c in 0..channels {
                let top = sample(x0, y0, c) * (1.0 - fx) + sample(x1, y0, c) * fx;
                let bottom = sample(x0, y1, c) * (1.0 - fx) + sample(x1, y1, c) * fx;
                t.set(0, c, y, x, top * (1.0 - fy) + bottom * fy);
            }
        }
    }
    Ok(t)
}
