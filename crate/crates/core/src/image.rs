//! The `Image` raster: H×W×C interleaved `f64` values on the `[0, 1]` scale.
//!
//! All pipeline stages exchange this type. PNG files are 8-bit on disk and
//! converted on load; `save_png` quantizes with round-half-up so a
//! save/load round trip of already-quantized data is exact.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, channels: usize) -> Self {
        Self {
            height,
            width,
            channels,
            data: vec![0.0; height * width * channels],
        }
    }

    pub fn from_vec(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width * channels {
            return Err(Error::shape(format!(
                "expected {} values for {height}x{width}x{channels}, got {}",
                height * width * channels,
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn constant(height: usize, width: usize, channels: usize, value: f64) -> Self {
        Self {
            height,
            width,
            channels,
            data: vec![value; height * width * channels],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, v: f64) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.height == other.height && self.width == other.width && self.channels == other.channels
    }

    /// Clamp every value into `[0, 1]`.
    pub fn clamp01(&mut self) {
        for v in &mut self.data {
            *v = v.clamp(0.0, 1.0);
        }
    }

    /// Rec. 601 luma; single-channel images pass through.
    pub fn to_luma(&self) -> Image {
        if self.channels == 1 {
            return self.clone();
        }
        assert_eq!(self.channels, 3, "luma conversion expects 1 or 3 channels");
        let mut out = Image::new(self.height, self.width, 1);
        for i in 0..self.height * self.width {
            let r = self.data[i * 3];
            let g = self.data[i * 3 + 1];
            let b = self.data[i * 3 + 2];
            out.data[i] = 0.299 * r + 0.587 * g + 0.114 * b;
        }
        out
    }

    pub fn load_png(path: impl AsRef<Path>) -> Result<Image> {
        let img = image::open(path.as_ref())?;
        let rgb = img.to_rgb8();
        let (w, h) = (rgb.width() as usize, rgb.height() as usize);
        let mut out = Image::new(h, w, 3);
        for (i, px) in rgb.pixels().enumerate() {
            out.data[i * 3] = px.0[0] as f64 / 255.0;
            out.data[i * 3 + 1] = px.0[1] as f64 / 255.0;
            out.data[i * 3 + 2] = px.0[2] as f64 / 255.0;
        }
        Ok(out)
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let quant =
            |v: f64| -> u8 { (v.clamp(0.0, 1.0) * 255.0).round() as u8 };
        match self.channels {
            1 => {
                let mut buf = image::GrayImage::new(self.width as u32, self.height as u32);
                for (i, px) in buf.pixels_mut().enumerate() {
                    px.0[0] = quant(self.data[i]);
                }
                buf.save(path.as_ref())?;
            }
            3 => {
                let mut buf = image::RgbImage::new(self.width as u32, self.height as u32);
                for (i, px) in buf.pixels_mut().enumerate() {
                    px.0[0] = quant(self.data[i * 3]);
                    px.0[1] = quant(self.data[i * 3 + 1]);
                    px.0[2] = quant(self.data[i * 3 + 2]);
                }
                buf.save(path.as_ref())?;
            }
            c => return Err(Error::invalid(format!("cannot save {c}-channel image"))),
        }
        Ok(())
    }
}

/// Per-pixel integer class map stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMap {
    pub height: usize,
    pub width: usize,
    pub classes: Vec<u8>,
}

impl LabelMap {
    pub fn new(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            classes: vec![0; height * width],
        }
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> u8 {
        self.classes[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, v: u8) {
        self.classes[y * self.width + x] = v;
    }

    /// Load a single-channel 8-bit PNG of class ids.
    pub fn load_png(path: impl AsRef<Path>) -> Result<LabelMap> {
        let img = image::open(path.as_ref())?.to_luma8();
        let (w, h) = (img.width() as usize, img.height() as usize);
        Ok(LabelMap {
            height: h,
            width: w,
            classes: img.into_raw(),
        })
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let buf = image::GrayImage::from_raw(
            self.width as u32,
            self.height as u32,
            self.classes.clone(),
        )
        .expect("label buffer size");
        buf.save(path.as_ref())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip_is_exact_for_quantized_values() {
        let dir = tempfile::tempdir().unwrap();
        let mut img = Image::new(5, 7, 3);
        for (i, v) in img.data_mut().iter_mut().enumerate() {
            *v = ((i * 13) % 256) as f64 / 255.0;
        }
        let path = dir.path().join("t.png");
        img.save_png(&path).unwrap();
        let back = Image::load_png(&path).unwrap();
        assert!(img
            .data()
            .iter()
            .zip(back.data())
            .all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn luma_of_gray_is_identity() {
        let img = Image::constant(4, 4, 3, 0.25);
        let l = img.to_luma();
        assert!(l.data().iter().all(|v| (v - 0.25).abs() < 1e-12));
    }
}
