//! The four function approximators: the two-scale coarse and fine
//! deblurring towers, the encoder-decoder parsing network, and the
//! strided-convolution discriminator. Only convolutions, rectifiers,
//! resampling, concatenation, residual adds and the final sigmoid appear
//! in any graph — no normalization layers.

pub mod cascade;
pub mod config;
pub mod deblur;
pub mod discriminator;
pub mod params;
pub mod parsing;
pub mod pipeline;
pub mod prob;

pub use cascade::FineCascade;
pub use config::{DeblurNetConfig, DiscriminatorConfig, NetworkConfig, ParsingNetConfig};
pub use deblur::{CoarseNet, FineNet};
pub use discriminator::Discriminator;
pub use params::{ModelParams, ParamSet, SubnetId};
pub use parsing::ParsingNet;
pub use pipeline::{Restored, Restorer};
pub use prob::SemanticProbMap;
