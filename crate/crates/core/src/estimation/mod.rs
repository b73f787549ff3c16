//! Expected counts, the smoothed M step, incremental EM training and model
//! persistence.

mod inside_outside;
mod model;
mod mstep;
mod persist;
mod smoothing;
mod train;

pub use inside_outside::{corpus_log_likelihood, inside, inside_outside, InsideChart, SentenceCounts};
pub use model::{LexPcfg, Unlexicalized};
pub use mstep::{m_step, MStepOptions};
pub use persist::{load_model, read_model, save_model, write_model};
pub use smoothing::{
    absolute_discount, estimate_discount, fit_smoothing_weights, heldout_samples, BucketSample,
};
pub use train::{
    e_step, train, train_with_progress, EStep, SegmentReport, TrainConfig, TrainOutcome,
    TrainReport,
};

use thiserror::Error;

/// How the lexicalized lexical-choice distribution backs off.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LexicalBackoff {
    /// Absolute discounting against the unlexicalized distribution.
    Discount,
    /// Bucketed linear interpolation with the same weights as rules.
    Interpolate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DiscountSetting {
    /// Estimated from count-of-counts, with `fallback` when undefined.
    Estimate { fallback: f64 },
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothingConfig {
    /// Upper bounds of the first four frequency buckets.
    pub bucket_bounds: [f64; 4],
    /// Weight of the lexicalized estimate per bucket.
    pub lambda: [f64; 5],
    pub discount: DiscountSetting,
    pub lexical_backoff: LexicalBackoff,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        SmoothingConfig {
            bucket_bounds: [1.0, 5.0, 25.0, 125.0],
            lambda: [0.0, 0.3, 0.6, 0.8, 0.95],
            discount: DiscountSetting::Estimate { fallback: 0.5 },
            lexical_backoff: LexicalBackoff::Discount,
        }
    }
}

impl SmoothingConfig {
    /// Pure relative frequencies: λ = 1 and no discount.
    pub fn frozen() -> Self {
        SmoothingConfig {
            lambda: [1.0; 5],
            discount: DiscountSetting::Fixed(0.0),
            ..Default::default()
        }
    }

    pub fn bucket(&self, frequency: f64) -> usize {
        self.bucket_bounds
            .iter()
            .position(|&b| frequency < b)
            .unwrap_or(4)
    }

    pub fn lambda_for(&self, frequency: f64) -> f64 {
        self.lambda[self.bucket(frequency)]
    }

    pub fn validate(&self) -> Result<(), EstimationError> {
        let b = &self.bucket_bounds;
        if !(b[0] > 0.0 && b.windows(2).all(|w| w[0] < w[1]) && b.iter().all(|x| x.is_finite())) {
            return Err(EstimationError::InvalidConfig(format!(
                "bucket bounds must be positive, finite and strictly ascending: {b:?}"
            )));
        }
        if self.lambda.iter().any(|l| !(0.0..=1.0).contains(l)) {
            return Err(EstimationError::InvalidConfig(format!(
                "lambda weights must lie in [0, 1]: {:?}",
                self.lambda
            )));
        }
        if self.lambda.windows(2).any(|w| w[0] > w[1]) {
            return Err(EstimationError::InvalidConfig(format!(
                "lambda weights must be nondecreasing: {:?}",
                self.lambda
            )));
        }
        let d = match self.discount {
            DiscountSetting::Estimate { fallback } => fallback,
            DiscountSetting::Fixed(d) => d,
        };
        if !(0.0..1.0).contains(&d) {
            return Err(EstimationError::InvalidConfig(format!(
                "discount must lie in [0, 1): {d}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum EstimationError {
    #[error("sentence has zero probability under the model")]
    ZeroInside,
    #[error("no counts to estimate from")]
    EmptyCounts,
    #[error("cannot normalize {0}")]
    NonNormalizable(String),
    #[error("no sentence of the corpus could be parsed")]
    NoParsableSentences,
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("model file line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("unsupported model version `{0}`")]
    Version(String),
    #[error("model does not match the grammar: {0}")]
    GrammarMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

pub(crate) fn log_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(f64::NEG_INFINITY, log_add)
}
