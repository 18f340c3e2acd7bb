//! Dense `f64` tensor with an explicit shape. Networks use NCHW layout.

use crate::error::{Error, Result};
use crate::image::Image;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Tensor {
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Tensor> {
        if shape.iter().product::<usize>() != data.len() {
            return Err(Error::shape(format!(
                "tensor shape {shape:?} needs {} values, got {}",
                shape.iter().product::<usize>(),
                data.len()
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn scalar(v: f64) -> Tensor {
        Tensor {
            shape: vec![],
            data: vec![v],
        }
    }

    pub fn filled(shape: &[usize], v: f64) -> Tensor {
        Tensor {
            shape: shape.to_vec(),
            data: vec![v; shape.iter().product()],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
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

    pub fn item(&self) -> f64 {
        debug_assert_eq!(self.data.len(), 1, "item() on non-scalar tensor");
        self.data[0]
    }

    /// Interpret as NCHW.
    pub fn dims4(&self) -> (usize, usize, usize, usize) {
        assert_eq!(self.shape.len(), 4, "expected 4-D tensor, got {:?}", self.shape);
        (self.shape[0], self.shape[1], self.shape[2], self.shape[3])
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Pack images (all same shape) into a [N, C, H, W] batch.
    pub fn from_images(images: &[&Image]) -> Tensor {
        assert!(!images.is_empty());
        let (h, w, c) = (images[0].height(), images[0].width(), images[0].channels());
        let n = images.len();
        let mut data = vec![0.0; n * c * h * w];
        for (i, img) in images.iter().enumerate() {
            assert!(img.height() == h && img.width() == w && img.channels() == c);
            for ch in 0..c {
                let base = ((i * c) + ch) * h * w;
                for p in 0..h * w {
                    data[base + p] = img.data()[p * c + ch];
                }
            }
        }
        Tensor {
            shape: vec![n, c, h, w],
            data,
        }
    }

    pub fn from_image(img: &Image) -> Tensor {
        Tensor::from_images(&[img])
    }

    /// Extract sample `n` of an NCHW batch as an H×W×C image.
    pub fn to_image(&self, n: usize) -> Image {
        let (nn, c, h, w) = self.dims4();
        assert!(n < nn);
        let mut img = Image::new(h, w, c);
        for ch in 0..c {
            let base = ((n * c) + ch) * h * w;
            for p in 0..h * w {
                img.data_mut()[p * c + ch] = self.data[base + p];
            }
        }
        img
    }
}
