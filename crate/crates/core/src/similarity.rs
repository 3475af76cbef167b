//! Cross-entropy based similarity between unigram models.
//!
//! `S(x, y) = 2A - CE(x||y) - CE(y||x)`, where the shift `A` is the largest
//! symmetric cross-entropy sum over a scenario's base documents (organic
//! answer and ads, self-pairs included). Cross entropy uses natural logs.

use crate::error::{Error, Result};
use crate::text_lm::{SmoothingConfig, UnigramModel};

/// `-sum_t p(t) ln q(t)`, possibly infinite.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct CrossEntropy(f64);

impl CrossEntropy {
    pub const INFINITE: CrossEntropy = CrossEntropy(f64::INFINITY);

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }

    /// The finite value, or an error naming the two sides.
    pub fn finite(self, left: &str, right: &str) -> Result<f64> {
        if self.is_finite() {
            Ok(self.0)
        } else {
            Err(Error::InfiniteCrossEntropy {
                left: left.to_string(),
                right: right.to_string(),
            })
        }
    }
}

pub fn cross_entropy(px: &UnigramModel, py: &UnigramModel) -> Result<CrossEntropy> {
    px.check_same_vocab(py)?;
    let mut sum = 0.0;
    for (p, q) in px.probs().iter().zip(py.probs()) {
        if *p == 0.0 {
            continue;
        }
        if *q == 0.0 {
            return Ok(CrossEntropy::INFINITE);
        }
        sum -= p * q.ln();
    }
    Ok(CrossEntropy(sum))
}

/// Both directions of cross entropy between two models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetricTerms {
    pub forward: f64,
    pub backward: f64,
}

impl SymmetricTerms {
    pub fn sum(&self) -> f64 {
        self.forward + self.backward
    }
}

fn symmetric_terms(x: &UnigramModel, y: &UnigramModel, x_label: &str, y_label: &str) -> Result<SymmetricTerms> {
    Ok(SymmetricTerms {
        forward: cross_entropy(x, y)?.finite(x_label, y_label)?,
        backward: cross_entropy(y, x)?.finite(y_label, x_label)?,
    })
}

/// Largest `CE(j1||j2) + CE(j2||j1)` over all ordered pairs of the labelled
/// base models, including `j1 == j2`.
pub fn shift_constant_labeled(base: &[(&str, &UnigramModel)]) -> Result<f64> {
    if base.is_empty() {
        return Err(Error::NoBaseDocuments);
    }
    let mut best = 0.0f64;
    for (i, (li, mi)) in base.iter().enumerate() {
        for (lj, mj) in &base[i..] {
            best = best.max(symmetric_terms(mi, mj, li, lj)?.sum());
        }
    }
    Ok(best)
}

pub fn shift_constant(base: &[&UnigramModel]) -> Result<f64> {
    let labels: Vec<String> = (0..base.len()).map(|j| format!("base document {j}")).collect();
    let labeled: Vec<(&str, &UnigramModel)> = labels.iter().map(String::as_str).zip(base.iter().copied()).collect();
    shift_constant_labeled(&labeled)
}

/// Scenario-wide similarity parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityContext {
    shift_a: f64,
    smoothing: SmoothingConfig,
}

impl SimilarityContext {
    pub fn new(shift_a: f64, smoothing: SmoothingConfig) -> Result<Self> {
        if !(shift_a >= 0.0 && shift_a.is_finite()) {
            return Err(Error::Validation {
                field: "shift_a".into(),
                message: format!("must be finite and nonnegative, got {shift_a}"),
            });
        }
        Ok(SimilarityContext { shift_a, smoothing })
    }

    pub fn shift_a(&self) -> f64 {
        self.shift_a
    }

    pub fn smoothing(&self) -> SmoothingConfig {
        self.smoothing
    }
}

/// Similarity together with the two cross-entropy terms it was built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityBreakdown {
    pub terms: SymmetricTerms,
    pub value: f64,
}

pub fn similarity_breakdown(
    x: &UnigramModel,
    y: &UnigramModel,
    ctx: &SimilarityContext,
    x_label: &str,
    y_label: &str,
) -> Result<SimilarityBreakdown> {
    let terms = symmetric_terms(x, y, x_label, y_label)?;
    Ok(SimilarityBreakdown {
        terms,
        // Summing the terms first keeps S(x, y) == S(y, x) bit for bit.
        value: 2.0 * ctx.shift_a - terms.sum(),
    })
}

pub fn similarity(x: &UnigramModel, y: &UnigramModel, ctx: &SimilarityContext) -> Result<f64> {
    similarity_breakdown(x, y, ctx, "x", "y").map(|s| s.value)
}

/// Value an advertiser derives from a sponsored answer: its similarity to the ad.
pub fn advertiser_value(sponsored: &UnigramModel, ad: &UnigramModel, ctx: &SimilarityContext) -> Result<f64> {
    similarity_breakdown(sponsored, ad, ctx, "sponsored answer", "ad").map(|s| s.value)
}

/// Utility a user derives from a sponsored answer: its similarity to the organic answer.
pub fn user_utility(sponsored: &UnigramModel, organic: &UnigramModel, ctx: &SimilarityContext) -> Result<f64> {
    similarity_breakdown(sponsored, organic, ctx, "sponsored answer", "organic answer").map(|s| s.value)
}
