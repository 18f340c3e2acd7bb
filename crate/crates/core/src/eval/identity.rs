//! Identity preservation: distances between face embeddings from a
//! pluggable backend. The default backend is a frozen fixed-seed conv
//! stack with global pooling; a real recognition network can stand in
//! behind the same trait.

use crate::dataset::manifest::derive_seed;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::nn::conv::conv2d_forward;
use crate::nn::{init, Tensor};

pub trait EmbeddingBackend {
    fn name(&self) -> &str;
    /// Unit-L2-norm feature vector.
    fn embed(&self, img: &Image) -> Result<Vec<f64>>;
}

/// Default backend: stride-2 conv + rectifier stack, global average
/// pooling, L2 normalization.
pub struct FrozenConvEmbedding {
    channels: Vec<usize>,
    weights: Vec<Tensor>,
    biases: Vec<Tensor>,
}

impl FrozenConvEmbedding {
    pub fn new(seed: u64) -> FrozenConvEmbedding {
        let channels = vec![8, 16, 32];
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        let mut prev = 3;
        for (i, &c) in channels.iter().enumerate() {
            weights.push(init::he_normal(
                &[c, prev, 3, 3],
                prev * 9,
                derive_seed(seed, i as u64),
            ));
            biases.push(Tensor::zeros(&[c]));
            prev = c;
        }
        FrozenConvEmbedding {
            channels,
            weights,
            biases,
        }
    }

    pub fn dim(&self) -> usize {
        *self.channels.last().unwrap()
    }
}

impl EmbeddingBackend for FrozenConvEmbedding {
    fn name(&self) -> &str {
        "frozen-conv"
    }

    fn embed(&self, img: &Image) -> Result<Vec<f64>> {
        if img.channels() != 3 {
            return Err(Error::invalid("embedding expects 3-channel images"));
        }
        let min_side = 1 << self.channels.len();
        if img.height() < min_side || img.width() < min_side {
            return Err(Error::invalid(format!(
                "embedding needs at least {min_side}x{min_side} input"
            )));
        }
        let mut t = Tensor::from_image(img);
        for (w, b) in self.weights.iter().zip(&self.biases) {
            t = conv2d_forward(&t, w, b, 2, 1);
            for v in t.data_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
        let (_, c, h, w) = t.dims4();
        let plane = h * w;
        let mut pooled = vec![0.0; c];
        for (ci, p) in pooled.iter_mut().enumerate() {
            *p = t.data()[ci * plane..(ci + 1) * plane].iter().sum::<f64>() / plane as f64;
        }
        let norm = pooled.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-12 {
            // degenerate all-dark activation; fall back to a fixed direction
            let mut out = vec![0.0; c];
            out[0] = 1.0;
            return Ok(out);
        }
        Ok(pooled.into_iter().map(|v| v / norm).collect())
    }
}

/// (L2 distance, cosine loss 1 - <f(a), f(b)>) between embeddings.
pub fn identity_distance(
    a: &Image,
    b: &Image,
    backend: &dyn EmbeddingBackend,
) -> Result<(f64, f64)> {
    let fa = checked_embed(backend, a)?;
    let fb = checked_embed(backend, b)?;
    if fa.len() != fb.len() {
        return Err(Error::shape("embedding dimensions differ"));
    }
    let l2 = fa
        .iter()
        .zip(&fb)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let dot: f64 = fa.iter().zip(&fb).map(|(x, y)| x * y).sum();
    Ok((l2, 1.0 - dot))
}

fn checked_embed(backend: &dyn EmbeddingBackend, img: &Image) -> Result<Vec<f64>> {
    let f = backend.embed(img)?;
    let norm = f.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(Error::invalid(format!(
            "backend {} returned non-unit embedding (norm {norm})",
            backend.name()
        )));
    }
    Ok(f)
}

/// Indices of the k gallery images closest to the probe (ascending cosine
/// loss; ties broken by index).
pub fn rank_topk(
    probe: &Image,
    gallery: &[Image],
    backend: &dyn EmbeddingBackend,
    k: usize,
) -> Result<Vec<usize>> {
    let mut scored = Vec::with_capacity(gallery.len());
    for (i, g) in gallery.iter().enumerate() {
        let (_, cos) = identity_distance(probe, g, backend)?;
        scored.push((i, cos));
    }
    scored.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
    Ok(scored.into_iter().take(k).map(|(i, _)| i).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::synthetic::synth_face;

    /// Stub backend with precomputed vectors keyed by the image's first
    /// pixel value.
    struct LookupBackend {
        table: Vec<(f64, Vec<f64>)>,
    }

    impl EmbeddingBackend for LookupBackend {
        fn name(&self) -> &str {
            "lookup"
        }
        fn embed(&self, img: &Image) -> Result<Vec<f64>> {
            let key = img.data()[0];
            Ok(self
                .table
                .iter()
                .find(|(k, _)| (k - key).abs() < 1e-9)
                .expect("key present")
                .1
                .clone())
        }
    }

    fn keyed_image(key: f64) -> Image {
        let mut img = Image::constant(4, 4, 3, 0.5);
        img.data_mut()[0] = key;
        img
    }

    #[test]
    fn identical_images_have_zero_distance() {
        let backend = FrozenConvEmbedding::new(7);
        let (img, _) = synth_face(32, 1);
        let (l2, cos) = identity_distance(&img, &img, &backend).unwrap();
        assert!(l2.abs() < 1e-9 && cos.abs() < 1e-9);
    }

    #[test]
    fn orthogonal_embeddings_closed_form() {
        let backend = LookupBackend {
            table: vec![
                (0.1, vec![1.0, 0.0, 0.0]),
                (0.2, vec![0.0, 1.0, 0.0]),
            ],
        };
        let (l2, cos) =
            identity_distance(&keyed_image(0.1), &keyed_image(0.2), &backend).unwrap();
        assert!((cos - 1.0).abs() < 1e-12);
        assert!((l2 - 2.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn default_backend_matches_direct_recomputation() {
        let backend = FrozenConvEmbedding::new(11);
        let (a, _) = synth_face(32, 2);
        let (b, _) = synth_face(32, 3);
        let (l2, cos) = identity_distance(&a, &b, &backend).unwrap();
        // independent recomputation from raw embeddings
        let fa = backend.embed(&a).unwrap();
        let fb = backend.embed(&b).unwrap();
        let mut dot = 0.0;
        let mut dist2 = 0.0;
        for i in 0..fa.len() {
            dot += fa[i] * fb[i];
            dist2 += (fa[i] - fb[i]) * (fa[i] - fb[i]);
        }
        assert!((l2 - dist2.sqrt()).abs() < 1e-12);
        assert!((cos - (1.0 - dot)).abs() < 1e-12);
        assert!(l2 >= 0.0 && cos >= 0.0);
    }

    #[test]
    fn non_unit_backend_is_rejected() {
        let backend = LookupBackend {
            table: vec![(0.1, vec![2.0, 0.0])],
        };
        assert!(identity_distance(&keyed_image(0.1), &keyed_image(0.1), &backend).is_err());
    }

    #[test]
    fn topk_ranking_with_synthetic_embeddings() {
        // gallery vectors at increasing angles from the probe
        let angles = [0.05f64, 0.6, 0.3, 1.2, 0.9];
        let mut table = vec![(0.9, vec![1.0, 0.0])]; // probe
        for (i, a) in angles.iter().enumerate() {
            table.push(((i as f64 + 1.0) / 10.0, vec![a.cos(), a.sin()]));
        }
        let backend = LookupBackend { table };
        let gallery: Vec<Image> = (0..5).map(|i| keyed_image((i as f64 + 1.0) / 10.0)).collect();
        let top3 = rank_topk(&keyed_image(0.9), &gallery, &backend, 3).unwrap();
        assert_eq!(top3, vec![0, 2, 1]); // angles 0.05 < 0.3 < 0.6
    }
}
