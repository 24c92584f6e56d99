//! PNG image round-tripping.
//!
//! Images are stored losslessly as 8-bit RGB PNG — recapture artefacts are
//! subtle and must not be polluted by a second round of lossy compression.
//! Storage quantizes the unit-range floats to 1/255 steps, so
//! save-then-load is the identity on any tensor that already came from a
//! PNG.

use std::path::Path;

use crate::data::ImageTensor;
use crate::error::Error;
use crate::Result;

/// Converts a `[0, 1]` float channel value to its 8-bit code.
fn to_byte(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Writes `img` as an 8-bit RGB PNG.
pub fn save_png(img: &ImageTensor, path: &Path) -> Result<()> {
    let mut out = image::RgbImage::new(img.w as u32, img.h as u32);
    for r in 0..img.h {
        for c in 0..img.w {
            let p = img.pixel(r, c);
            out.put_pixel(
                c as u32,
                r as u32,
                image::Rgb([to_byte(p[0]), to_byte(p[1]), to_byte(p[2])]),
            );
        }
    }
    out.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::Image { path: path.to_path_buf(), message: e.to_string() })
}

/// Loads a PNG (or any format the build enables) into unit-range floats.
pub fn load_png(path: &Path) -> Result<ImageTensor> {
    let img = image::open(path)
        .map_err(|e| Error::Image { path: path.to_path_buf(), message: e.to_string() })?
        .into_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<f32> = img.into_raw().into_iter().map(|b| b as f32 / 255.0).collect();
    ImageTensor::new(h, w, data)
}
