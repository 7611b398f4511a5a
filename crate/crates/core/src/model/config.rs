use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::ingest::{FeatureSpace, Pair, ViewKind};

/// One input channel of the network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

impl ChannelSpec {
    pub fn new(name: impl Into<String>, rows: usize, cols: usize) -> Self {
        Self {
            name: name.into(),
            rows,
            cols,
        }
    }

    pub fn pooled(&self) -> (usize, usize) {
        (self.rows / 2, self.cols / 2)
    }
}

/// How a user's applicability assignment reaches the network.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Conditioning {
    /// One-hot over channels appended to the dense input.
    #[default]
    Indicator,
    /// Non-assigned channels are zeroed; the indicator is still appended.
    Mask,
}

impl std::str::FromStr for Conditioning {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "indicator" => Ok(Conditioning::Indicator),
            "mask" => Ok(Conditioning::Mask),
            _ => Err(format!("unknown conditioning {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub channels: Vec<ChannelSpec>,
    pub filters: usize,
    pub kernel: usize,
    pub hidden: usize,
    pub indicator_dim: usize,
    pub context_dim: usize,
    pub classes: usize,
    pub target: ViewKind,
    pub conditioning: Conditioning,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl ModelConfig {
    /// One channel per pair of the feature space, 8 filters of 3x3, a
    /// 128-wide hidden layer and plain SGD with lr 0.01 and batch 32.
    pub fn canonical(space: &FeatureSpace, pairs: &[Pair], target: ViewKind) -> Self {
        let channels = pairs
            .iter()
            .map(|&p| {
                let (r, c) = space.shape(p);
                ChannelSpec::new(p.code(), r, c)
            })
            .collect::<Vec<_>>();
        Self {
            indicator_dim: channels.len(),
            channels,
            filters: 8,
            kernel: 3,
            hidden: 128,
            context_dim: space.time.cardinality() + space.distance.cardinality(),
            classes: space.view(target).cardinality(),
            target,
            conditioning: Conditioning::Indicator,
            learning_rate: 0.01,
            batch_size: 32,
            epochs: 10,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::InvalidConfig(msg));
        if self.channels.is_empty() {
            return bad("no channels".into());
        }
        if self.filters == 0 || self.hidden == 0 || self.batch_size == 0 {
            return bad("filters, hidden width and batch size must be positive".into());
        }
        if self.classes < 2 {
            return bad(format!("need at least two classes, got {}", self.classes));
        }
        if self.kernel == 0 || self.kernel.is_multiple_of(2) {
            return bad(format!("kernel size must be odd, got {}", self.kernel));
        }
        for ch in &self.channels {
            let (h, w) = ch.pooled();
            if h == 0 || w == 0 {
                return bad(format!(
                    "channel {} ({}x{}) pools to an empty map",
                    ch.name, ch.rows, ch.cols
                ));
            }
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!(
                "learning rate {} is not positive",
                self.learning_rate
            ));
        }
        Ok(())
    }

    /// Length of the concatenated pooled channel maps.
    pub fn feature_len(&self) -> usize {
        self.channels
            .iter()
            .map(|c| {
                let (h, w) = c.pooled();
                self.filters * h * w
            })
            .sum()
    }

    pub fn dense_input_len(&self) -> usize {
        self.feature_len() + self.indicator_dim + self.context_dim
    }
}
