//! Saliency rendering with the hot colormap: black at 0, white at 1.

use std::path::Path;

use image::{ImageResult, RgbImage};

use crate::model::ProbMap;

/// End of the red ramp.
pub const RED_END: f64 = 0.365079;
/// End of the green ramp.
pub const GREEN_END: f64 = 0.746032;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("colormap input {0} is outside [0, 1]")]
pub struct OutOfRange(pub f64);

/// Row-major 8-bit RGB raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbRaster {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[u8; 3]>,
}

impl RgbRaster {
    pub fn to_image(&self) -> RgbImage {
        let flat: Vec<u8> = self.pixels.iter().flatten().copied().collect();
        RgbImage::from_raw(self.width as u32, self.height as u32, flat)
            .expect("raster length matches dimensions")
    }

    pub fn from_image(img: &RgbImage) -> Self {
        Self {
            width: img.width() as usize,
            height: img.height() as usize,
            pixels: img.pixels().map(|p| p.0).collect(),
        }
    }

    pub fn save_png(&self, path: &Path) -> ImageResult<()> {
        self.to_image()
            .save_with_format(path, image::ImageFormat::Png)
    }
}

fn quantize(c: f64) -> u8 {
    (255.0 * c.clamp(0.0, 1.0)).round() as u8
}

/// Piecewise-linear hot colormap.
pub fn hot_colormap(v: f64) -> Result<[u8; 3], OutOfRange> {
    if !(0.0..=1.0).contains(&v) {
        return Err(OutOfRange(v));
    }
    let r = v / RED_END;
    let g = (v - RED_END) / (GREEN_END - RED_END);
    let b = (v - GREEN_END) / (1.0 - GREEN_END);
    Ok([quantize(r), quantize(g), quantize(b)])
}

/// Applies [`hot_colormap`] to every pixel, without rescaling.
pub fn render_saliency(map: &ProbMap) -> RgbRaster {
    let pixels = map
        .values()
        .iter()
        .map(|v| hot_colormap(f64::from(*v)).expect("probability maps are validated"))
        .collect();
    RgbRaster {
        width: map.width(),
        height: map.height(),
        pixels,
    }
}

/// Grayscale display rendering, `round(255 v)` on every channel.
pub fn render_grayscale(map: &ProbMap) -> RgbRaster {
    let pixels = map
        .values()
        .iter()
        .map(|v| {
            let g = quantize(f64::from(*v));
            [g, g, g]
        })
        .collect();
    RgbRaster {
        width: map.width(),
        height: map.height(),
        pixels,
    }
}
