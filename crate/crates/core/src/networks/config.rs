//! Architecture hyper-parameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of one two-scale deblurring tower (used by both the coarse and
/// fine networks).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DeblurNetConfig {
    /// The towers are built for exactly two scales.
    pub scales: usize,
    pub resblocks_per_scale: usize,
    pub base_channels: usize,
    /// Kernel of the first convolution at each scale (large receptive field).
    pub first_kernel: usize,
    /// Kernel of every other convolution.
    pub other_kernel: usize,
    /// Kernel of learned 2x upsampling layers (even); images travel
    /// between the two deblur scales bicubically, so this drives the
    /// parsing decoder's transposed convolutions.
    pub upsample_kernel: usize,
}

impl Default for DeblurNetConfig {
    fn default() -> Self {
        DeblurNetConfig {
            scales: 2,
            resblocks_per_scale: 6,
            base_channels: 64,
            first_kernel: 11,
            other_kernel: 5,
            upsample_kernel: 4,
        }
    }
}

impl DeblurNetConfig {
    pub fn tiny() -> Self {
        DeblurNetConfig {
            scales: 2,
            resblocks_per_scale: 2,
            base_channels: 8,
            first_kernel: 7,
            other_kernel: 3,
            upsample_kernel: 4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scales != 2 {
            return Err(Error::Config(format!(
                "deblur towers support exactly 2 scales, got {}",
                self.scales
            )));
        }
        if self.first_kernel % 2 == 0 || self.other_kernel % 2 == 0 {
            return Err(Error::Config("conv kernels must be odd".into()));
        }
        if self.upsample_kernel % 2 != 0 {
            return Err(Error::Config("upsample kernel must be even".into()));
        }
        if self.base_channels == 0 || self.resblocks_per_scale == 0 {
            return Err(Error::Config("channels and resblocks must be positive".into()));
        }
        Ok(())
    }
}

/// Encoder-decoder parsing network with skip connections.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ParsingNetConfig {
    /// Channels per stride-2 encoder stage (mirrored by the decoder).
    pub encoder_channels: Vec<usize>,
    /// Transposed-convolution kernel of the decoder (even).
    pub upsample_kernel: usize,
    pub num_classes: usize,
}

impl Default for ParsingNetConfig {
    fn default() -> Self {
        ParsingNetConfig {
            encoder_channels: vec![32, 64, 128, 256],
            upsample_kernel: 4,
            num_classes: 11,
        }
    }
}

impl ParsingNetConfig {
    pub fn tiny() -> Self {
        ParsingNetConfig {
            encoder_channels: vec![8, 16, 32],
            upsample_kernel: 4,
            num_classes: 11,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.encoder_channels.is_empty() {
            return Err(Error::Config("parsing needs at least one encoder stage".into()));
        }
        if self.upsample_kernel % 2 != 0 {
            return Err(Error::Config("parsing upsample kernel must be even".into()));
        }
        if self.num_classes < 2 {
            return Err(Error::Config("parsing needs at least 2 classes".into()));
        }
        Ok(())
    }

    /// Input dims must be divisible by this.
    pub fn stride_factor(&self) -> usize {
        1 << self.encoder_channels.len()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DiscriminatorConfig {
    pub input_size: usize,
    pub strided_layers: usize,
    /// Channel schedule, one entry per strided layer.
    pub channels: Vec<usize>,
    pub kernel: usize,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        DiscriminatorConfig {
            input_size: 128,
            strided_layers: 6,
            channels: vec![32, 64, 128, 256, 512, 512],
            kernel: 5,
        }
    }
}

impl DiscriminatorConfig {
    pub fn tiny() -> Self {
        DiscriminatorConfig {
            input_size: 32,
            strided_layers: 4,
            channels: vec![8, 16, 32, 64],
            kernel: 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels.len() != self.strided_layers {
            return Err(Error::Config(format!(
                "discriminator: {} channel entries for {} layers",
                self.channels.len(),
                self.strided_layers
            )));
        }
        if self.input_size < (1 << self.strided_layers) {
            return Err(Error::Config(format!(
                "discriminator input {} too small for {} stride-2 layers",
                self.input_size, self.strided_layers
            )));
        }
        if self.kernel % 2 == 0 {
            return Err(Error::Config("discriminator kernel must be odd".into()));
        }
        Ok(())
    }
}

/// Everything needed to rebuild the model graph.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NetworkConfig {
    pub deblur: DeblurNetConfig,
    pub parsing: ParsingNetConfig,
    pub discriminator: DiscriminatorConfig,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            deblur: DeblurNetConfig::default(),
            parsing: ParsingNetConfig::default(),
            discriminator: DiscriminatorConfig::default(),
        }
    }
}

impl NetworkConfig {
    pub fn tiny() -> Self {
        NetworkConfig {
            deblur: DeblurNetConfig::tiny(),
            parsing: ParsingNetConfig::tiny(),
            discriminator: DiscriminatorConfig::tiny(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.deblur.validate()?;
        self.parsing.validate()?;
        self.discriminator.validate()
    }
}
