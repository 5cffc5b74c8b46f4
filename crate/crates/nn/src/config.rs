use serde::{Deserialize, Serialize};

use crate::error::{NnError, Result};

/// Architecture of one residual dense network.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RdnConfig {
    pub n_blocks: usize,
    pub layers_per_block: usize,
    /// G0, width of the shallow and fused features.
    pub feature_channels: usize,
    /// G, channels added by each dense layer.
    pub growth_channels: usize,
    pub kernel_size: usize,
    /// Sub-pixel factor r. Only read by spatial models.
    pub upsample_ratio: usize,
    pub in_channels: usize,
    pub out_channels: usize,
}

impl Default for RdnConfig {
    fn default() -> Self {
        Self {
            n_blocks: 4,
            layers_per_block: 8,
            feature_channels: 32,
            growth_channels: 32,
            kernel_size: 3,
            upsample_ratio: 2,
            in_channels: 2,
            out_channels: 2,
        }
    }
}

impl RdnConfig {
    /// Default temporal network for `k` sub-steps: no upsampling, k+1 outputs.
    pub fn temporal(k: usize) -> Self {
        Self {
            upsample_ratio: 1,
            out_channels: k + 1,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_blocks", self.n_blocks),
            ("layers_per_block", self.layers_per_block),
            ("feature_channels", self.feature_channels),
            ("growth_channels", self.growth_channels),
            ("kernel_size", self.kernel_size),
            ("upsample_ratio", self.upsample_ratio),
            ("in_channels", self.in_channels),
            ("out_channels", self.out_channels),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(NnError::Config(format!("{name} must be positive")));
            }
        }
        if self.kernel_size.is_multiple_of(2) {
            return Err(NnError::Config(format!(
                "kernel_size must be odd, got {}",
                self.kernel_size
            )));
        }
        Ok(())
    }

    /// Smallest spatial extent the reflection padding can handle.
    pub fn min_extent(&self) -> usize {
        self.kernel_size / 2 + 1
    }
}
