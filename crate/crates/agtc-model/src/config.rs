//! Model hyperparameters and the shape arithmetic they induce.

use crate::ModelError;

/// Full structural configuration of one model instance. Defaults are the
/// tuned values; presets adapt channels/samples/classes per dataset, and
/// [`ModelConfig::micro`] shrinks everything for fast end-to-end tests.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub num_channels: usize,
    pub num_samples: usize,
    pub num_classes: usize,

    pub ctc_filters: usize,
    pub ctc_kernel: usize,
    pub ctc_pool: usize,
    pub ctc_pool_stride: usize,

    pub gcat_heads: usize,
    pub gcat_out_features: usize,
    pub gcat_weight_kernel: usize,
    pub gcat_attn_kernel: usize,
    pub gcat_depth: usize,
    pub gcat_attn_dropout: f64,
    pub gcat_dropout: f64,

    pub gcap_depth: usize,

    pub gtc_filters: usize,
    pub gtc_kernel: usize,
    pub gtc_depth: usize,
    pub gtc_pool: usize,
    pub gtc_dropout: f64,

    pub mha_heads: usize,
    pub mha_key_dim: usize,
    pub mha_value_dim: usize,
    pub mha_dropout: f64,
    pub tce_mha_dropout: f64,
    pub tce_kernel: usize,
    pub tce_depth: usize,
    pub tce_dropout: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            num_channels: 22,
            num_samples: 375,
            num_classes: 4,
            ctc_filters: 8,
            ctc_kernel: 32,
            ctc_pool: 4,
            ctc_pool_stride: 2,
            gcat_heads: 2,
            gcat_out_features: 16,
            gcat_weight_kernel: 8,
            gcat_attn_kernel: 2,
            gcat_depth: 4,
            gcat_attn_dropout: 0.2,
            gcat_dropout: 0.25,
            gcap_depth: 2,
            gtc_filters: 96,
            gtc_kernel: 8,
            gtc_depth: 4,
            gtc_pool: 4,
            gtc_dropout: 0.25,
            mha_heads: 2,
            mha_key_dim: 8,
            mha_value_dim: 8,
            mha_dropout: 0.6,
            tce_mha_dropout: 0.3,
            tce_kernel: 2,
            tce_depth: 4,
            tce_dropout: 0.2,
        }
    }
}

impl ModelConfig {
    /// 22 channels, 3 s at 125 Hz, 4 motor-imagery classes.
    pub fn bciciv2a() -> Self {
        ModelConfig::default()
    }

    /// 64 channels, 4 s at 160 Hz.
    pub fn eegmmidb(num_classes: usize) -> Self {
        ModelConfig {
            num_channels: 64,
            num_samples: 640,
            num_classes,
            ..ModelConfig::default()
        }
    }

    /// Scaled-down instance for gradient checks and training smoke tests.
    /// Kernels and pools shrink along with the feature sizes so the short
    /// temporal axis survives both pooling stages.
    pub fn micro() -> Self {
        ModelConfig {
            num_channels: 4,
            num_samples: 64,
            num_classes: 4,
            ctc_filters: 4,
            ctc_kernel: 8,
            ctc_pool: 4,
            ctc_pool_stride: 2,
            gcat_heads: 2,
            gcat_out_features: 8,
            gcat_weight_kernel: 4,
            gcat_attn_kernel: 2,
            gcat_depth: 2,
            gcap_depth: 2,
            gtc_filters: 16,
            gtc_kernel: 4,
            gtc_depth: 2,
            gtc_pool: 4,
            mha_heads: 2,
            mha_key_dim: 4,
            mha_value_dim: 4,
            tce_kernel: 2,
            tce_depth: 2,
            ..ModelConfig::default()
        }
    }

    /// Even smaller variant whose every parameter can be finite-difference
    /// checked quickly.
    pub fn nano() -> Self {
        ModelConfig {
            num_channels: 3,
            num_samples: 40,
            num_classes: 2,
            ctc_filters: 2,
            ctc_kernel: 6,
            ctc_pool: 2,
            ctc_pool_stride: 2,
            gcat_heads: 1,
            gcat_out_features: 4,
            gcat_weight_kernel: 3,
            gcat_attn_kernel: 2,
            gcat_depth: 1,
            gcap_depth: 1,
            gtc_filters: 8,
            gtc_kernel: 3,
            gtc_depth: 1,
            gtc_pool: 2,
            mha_heads: 1,
            mha_key_dim: 2,
            mha_value_dim: 2,
            tce_kernel: 2,
            tce_depth: 1,
            ..ModelConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [
            self.num_channels,
            self.num_samples,
            self.num_classes,
            self.ctc_filters,
            self.ctc_kernel,
            self.ctc_pool,
            self.ctc_pool_stride,
            self.gcat_heads,
            self.gcat_out_features,
            self.gcat_weight_kernel,
            self.gcat_attn_kernel,
            self.gcat_depth,
            self.gcap_depth,
            self.gtc_filters,
            self.gtc_kernel,
            self.gtc_depth,
            self.gtc_pool,
            self.mha_heads,
            self.mha_key_dim,
            self.mha_value_dim,
            self.tce_kernel,
            self.tce_depth,
        ];
        if positive.contains(&0) {
            return Err(ModelError::BadConfig("all structural sizes must be positive".into()));
        }
        if !self.gtc_filters.is_multiple_of(2) {
            return Err(ModelError::BadConfig(
                "temporal feature dim must be even for the positional encoding".into(),
            ));
        }
        self.t_after_gtc()?;
        Ok(())
    }

    fn pooled(len: usize, pool: usize, stride: usize) -> Result<usize, ModelError> {
        if pool > len {
            return Err(ModelError::BadConfig(format!(
                "pool {pool} exceeds temporal extent {len}"
            )));
        }
        Ok((len - pool) / stride + 1)
    }

    /// Temporal length after the channel-wise temporal convolution module.
    pub fn t_after_ctc(&self) -> Result<usize, ModelError> {
        if self.num_samples < self.ctc_kernel {
            return Err(ModelError::BadConfig(format!(
                "{} samples shorter than the {}-wide temporal kernel",
                self.num_samples, self.ctc_kernel
            )));
        }
        Self::pooled(self.num_samples - self.ctc_kernel + 1, self.ctc_pool, self.ctc_pool_stride)
    }

    /// Temporal length after both global temporal pooling stages.
    pub fn t_after_gtc(&self) -> Result<usize, ModelError> {
        let t1 = self.t_after_ctc()?;
        let p1 = Self::pooled(t1, self.gtc_pool, self.gtc_pool)?;
        Self::pooled(p1, self.gtc_pool, self.gtc_pool)
    }

    /// Feature width after the GCAT residual concatenation.
    pub fn gcat_concat_features(&self) -> usize {
        self.ctc_filters + self.gcat_out_features
    }

    /// Feature width after channel collapse.
    pub fn gcap_features(&self) -> usize {
        self.gcat_concat_features() * self.gcap_depth
    }

    /// Flattened width entering the classifier.
    pub fn flatten_dim(&self) -> Result<usize, ModelError> {
        Ok(self.gtc_filters * self.t_after_gtc()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_shape_chain() {
        let cfg = ModelConfig::bciciv2a();
        assert_eq!(cfg.t_after_ctc().unwrap(), 171);
        assert_eq!(cfg.t_after_gtc().unwrap(), 10);
        assert_eq!(cfg.gcat_concat_features(), 24);
        assert_eq!(cfg.gcap_features(), 48);
        assert_eq!(cfg.flatten_dim().unwrap(), 960);
    }

    #[test]
    fn eegmmidb_shape_chain() {
        let cfg = ModelConfig::eegmmidb(4);
        assert_eq!(cfg.t_after_ctc().unwrap(), 303);
        assert_eq!(cfg.t_after_gtc().unwrap(), 18);
    }

    #[test]
    fn too_short_input_is_rejected() {
        let cfg = ModelConfig { num_samples: 34, ..ModelConfig::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn presets_validate() {
        for cfg in [
            ModelConfig::bciciv2a(),
            ModelConfig::eegmmidb(4),
            ModelConfig::eegmmidb(2),
            ModelConfig::micro(),
            ModelConfig::nano(),
        ] {
            cfg.validate().unwrap();
        }
    }
}
