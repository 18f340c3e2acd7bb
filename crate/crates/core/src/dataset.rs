//! Dataset assembly: label schema and component masks, geometric
//! augmentation, sample manifests, and a procedural face generator for
//! the tiny profile.

pub mod augment;
pub mod manifest;
pub mod schema;
pub mod synthetic;

pub use augment::{augment, apply_geometric, AugmentConfig, GeomTransform};
pub use manifest::{
    build_manifest, derive_seed, load_sample, materialize_blurred, read_manifest,
    verify_disjoint_kernels, write_manifest, ManifestEntry, Sample, Split,
};
pub use schema::{extract_masks, ComponentMask, LabelSchema};
pub use synthetic::synth_face;
