use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::layers::DEFAULT_INIT_STD;
use crate::nn::AdamConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossVariant {
    /// Minimize `mean log(1 - D(G(z)))`.
    PaperSaturating,
    /// Minimize `-mean log D(G(z))`.
    #[default]
    NonSaturating,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GanConfig {
    pub z_dim: usize,
    /// Side of generated maps; a power of two >= 8.
    pub output_width: usize,
    /// Channels at the 4x4 stage; halved per upsampling block down to
    /// `min_channels`.
    pub base_channels: usize,
    pub min_channels: usize,
    pub loss_variant: LossVariant,
    pub d_steps_per_g_step: usize,
    pub batch_size: usize,
    pub adam_g: AdamConfig,
    pub adam_d: AdamConfig,
    pub init_std: f64,
    /// Pixel size stamped on generated maps, meters.
    pub pixel_size: f64,
    pub seed: u64,
}

impl GanConfig {
    pub fn adam_default() -> AdamConfig {
        AdamConfig {
            lr: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// Number of transposed-convolution blocks, `log2(width) - 2`.
    pub fn n_blocks(&self) -> usize {
        self.output_width.trailing_zeros() as usize - 2
    }

    /// Channel count at each resolution 4, 8, ..., width/2.
    pub fn channels(&self) -> Vec<usize> {
        (0..self.n_blocks())
            .map(|b| (self.base_channels >> b).max(self.min_channels.min(self.base_channels)))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let w = self.output_width;
        if w < 8 || !w.is_power_of_two() {
            return Err(Error::argument(format!("output width must be a power of two >= 8, got {w}")));
        }
        if self.z_dim == 0 || self.batch_size == 0 || self.base_channels == 0 || self.d_steps_per_g_step == 0 {
            return Err(Error::argument(
                "z_dim, batch_size, base_channels and d_steps_per_g_step must be at least 1",
            ));
        }
        if !(self.init_std > 0.0) || !(self.pixel_size > 0.0) {
            return Err(Error::argument("init_std and pixel_size must be positive"));
        }
        self.adam_g.validate()?;
        self.adam_d.validate()
    }
}

impl Default for GanConfig {
    fn default() -> Self {
        GanConfig {
            z_dim: 64,
            output_width: 32,
            base_channels: 64,
            min_channels: 8,
            loss_variant: LossVariant::NonSaturating,
            d_steps_per_g_step: 1,
            batch_size: 16,
            adam_g: Self::adam_default(),
            adam_d: Self::adam_default(),
            init_std: DEFAULT_INIT_STD,
            pixel_size: 750.0,
            seed: 0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_count_and_channels() {
        let c = GanConfig::default();
        assert_eq!(c.n_blocks(), 3);
        assert_eq!(c.channels(), vec![64, 32, 16]);
        let c = GanConfig { output_width: 128, base_channels: 32, ..Default::default() };
        assert_eq!(c.channels(), vec![32, 16, 8, 8, 8]);
    }

    #[test]
    fn rejects_bad_width() {
        for w in [0, 4, 12, 33] {
            assert!(GanConfig { output_width: w, ..Default::default() }.validate().is_err());
        }
        assert!(GanConfig { output_width: 8, ..Default::default() }.validate().is_ok());
    }

    #[test]
    fn json_defaults_fill_in() {
        let c: GanConfig = serde_json::from_str(r#"{"output_width": 16, "loss_variant": "paper_saturating"}"#).unwrap();
        assert_eq!(c.output_width, 16);
        assert_eq!(c.loss_variant, LossVariant::PaperSaturating);
        assert_eq!(c.z_dim, 64);
    }
}
