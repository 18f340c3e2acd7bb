//! Synthetic motion blur: random camera-shake trajectories, their
//! rasterization into point-spread functions, and image degradation
//! (blur + Gaussian noise + clipping).

pub mod degrade;
pub mod kernel;
pub mod trajectory;

pub use degrade::{apply_blur, convolve2d, BoundaryMode, DegradationConfig};
pub use kernel::{rasterize_kernel, BlurKernel, KernelMeta, DEFAULT_KERNEL_SIZES};
pub use trajectory::{generate_trajectory, Trajectory};
