//! Documents and unigram language models over a shared vocabulary.
//!
//! Texts are lowercased and split on whitespace. A [`Document`] stores real
//! valued token counts so that the expected ("mean") document of a model can
//! be represented exactly. Models are plain probability vectors indexed by
//! token id; fusing an organic answer with an ad is a pointwise linear
//! mixture of their models.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type TokenId = usize;

/// Tolerance on the total mass of a probability vector.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

/// Ordered set of distinct tokens. Token ids are positions in the order.
#[derive(Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl Vocabulary {
    pub fn new<I, S>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = Vocabulary::empty();
        for token in tokens {
            let token = token.into();
            if vocab.index.contains_key(&token) {
                return Err(Error::DuplicateToken(token));
            }
            vocab.push(token);
        }
        if vocab.tokens.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        Ok(vocab)
    }

    fn empty() -> Self {
        Vocabulary {
            tokens: Vec::new(),
            index: HashMap::new(),
        }
    }

    /// A copy of this vocabulary with any unseen tokens appended in order.
    pub fn extended<I, S>(&self, tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = self.clone();
        for token in tokens {
            let token = token.into();
            if !vocab.index.contains_key(&token) {
                vocab.push(token);
            }
        }
        vocab
    }

    fn push(&mut self, token: String) {
        self.index.insert(token.clone(), self.tokens.len());
        self.tokens.push(token);
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }
}

impl fmt::Debug for Vocabulary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(&self.tokens).finish()
    }
}

pub(crate) fn same_vocab(a: &Arc<Vocabulary>, b: &Arc<Vocabulary>) -> bool {
    Arc::ptr_eq(a, b) || a.tokens == b.tokens
}

/// Token counts over a vocabulary. Counts may be fractional.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    vocab: Arc<Vocabulary>,
    counts: Vec<f64>,
    length: f64,
}

impl Document {
    pub fn from_counts(vocab: Arc<Vocabulary>, counts: Vec<f64>) -> Result<Self> {
        if counts.len() != vocab.len() {
            return Err(Error::InvalidCounts(format!(
                "{} counts for a vocabulary of {} tokens",
                counts.len(),
                vocab.len()
            )));
        }
        if let Some(bad) = counts.iter().find(|c| !c.is_finite() || **c < 0.0) {
            return Err(Error::InvalidCounts(format!(
                "count {bad} is not a finite nonnegative number"
            )));
        }
        let length: f64 = counts.iter().sum();
        if length <= 0.0 {
            return Err(Error::ZeroLengthDocument);
        }
        Ok(Document {
            vocab,
            counts,
            length,
        })
    }

    /// Builds a document from `(token, count)` pairs; every token must be in
    /// `vocab`, repeated tokens accumulate.
    pub fn from_token_counts<'a, I>(vocab: Arc<Vocabulary>, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, f64)>,
    {
        let mut counts = vec![0.0; vocab.len()];
        for (token, count) in pairs {
            let id = vocab
                .id(token)
                .ok_or_else(|| Error::InvalidCounts(format!("token {token:?} is not in the vocabulary")))?;
            counts[id] += count;
        }
        Document::from_counts(vocab, counts)
    }

    pub fn vocab(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn count(&self, id: TokenId) -> f64 {
        self.counts[id]
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Re-expresses this document over a vocabulary containing all of its tokens.
    pub fn reindexed(&self, vocab: &Arc<Vocabulary>) -> Result<Document> {
        if same_vocab(&self.vocab, vocab) {
            return Ok(Document {
                vocab: Arc::clone(vocab),
                ..self.clone()
            });
        }
        let pairs = self
            .vocab
            .tokens()
            .iter()
            .zip(&self.counts)
            .filter(|(_, c)| **c > 0.0)
            .map(|(t, c)| (t.as_str(), *c));
        Document::from_token_counts(Arc::clone(vocab), pairs)
    }
}

/// Lowercased whitespace-delimited tokens of `text`.
pub fn split_tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split_whitespace().map(str::to_lowercase)
}

pub enum VocabPolicy<'a> {
    BuildNew,
    Extend(&'a Vocabulary),
}

pub fn tokenize(text: &str, policy: VocabPolicy<'_>) -> Result<Document> {
    let tokens: Vec<String> = split_tokens(text).collect();
    if tokens.is_empty() {
        return Err(Error::EmptyText);
    }
    let vocab = match policy {
        VocabPolicy::BuildNew => Vocabulary::empty(),
        VocabPolicy::Extend(base) => base.clone(),
    }
    .extended(tokens.iter().cloned());
    let vocab = Arc::new(vocab);
    Document::from_token_counts(Arc::clone(&vocab), tokens.iter().map(|t| (t.as_str(), 1.0)))
}

/// Jelinek-Mercer interpolation weight against the uniform background model.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SmoothingConfig {
    mu: f64,
}

impl SmoothingConfig {
    pub const NONE: SmoothingConfig = SmoothingConfig { mu: 0.0 };

    pub fn new(mu: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&mu) {
            return Err(Error::InvalidSmoothing(mu));
        }
        Ok(SmoothingConfig { mu })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }
}

/// Weight of the organic answer in a fused sponsored answer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionWeight(f64);

impl FusionWeight {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidFusionWeight(lambda));
        }
        Ok(FusionWeight(lambda))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnigramModel {
    vocab: Arc<Vocabulary>,
    probs: Vec<f64>,
}

impl UnigramModel {
    pub fn new(vocab: Arc<Vocabulary>, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != vocab.len() {
            return Err(Error::InvalidProbabilities(format!(
                "{} probabilities for a vocabulary of {} tokens",
                probs.len(),
                vocab.len()
            )));
        }
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidProbabilities(format!("{p} is outside [0, 1]")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::InvalidProbabilities(format!("mass sums to {total}")));
        }
        Ok(UnigramModel { vocab, probs })
    }

    pub fn uniform(vocab: Arc<Vocabulary>) -> Self {
        let n = vocab.len();
        UnigramModel {
            vocab,
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn vocab(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, id: TokenId) -> f64 {
        self.probs[id]
    }

    pub fn entropy(&self) -> f64 {
        -self
            .probs
            .iter()
            .filter(|p| **p > 0.0)
            .map(|p| p * p.ln())
            .sum::<f64>()
    }

    pub(crate) fn check_same_vocab(&self, other: &UnigramModel) -> Result<()> {
        if same_vocab(&self.vocab, &other.vocab) {
            Ok(())
        } else {
            Err(Error::VocabularyMismatch)
        }
    }
}

/// Maximum-likelihood model of `doc`, interpolated with the uniform model
/// when smoothing is enabled.
pub fn induce_lm(doc: &Document, smoothing: SmoothingConfig) -> Result<UnigramModel> {
    if doc.length <= 0.0 {
        return Err(Error::ZeroLengthDocument);
    }
    let mu = smoothing.mu();
    let background = mu / doc.vocab.len() as f64;
    let probs = doc
        .counts
        .iter()
        .map(|c| (1.0 - mu) * (c / doc.length) + background)
        .collect();
    UnigramModel::new(Arc::clone(&doc.vocab), probs)
}

/// `lambda * organic + (1 - lambda) * ad`, pointwise.
pub fn mix_models(organic: &UnigramModel, ad: &UnigramModel, weight: FusionWeight) -> Result<UnigramModel> {
    organic.check_same_vocab(ad)?;
    let lambda = weight.value();
    let probs = organic
        .probs
        .iter()
        .zip(&ad.probs)
        .map(|(o, a)| lambda * o + (1.0 - lambda) * a)
        .collect();
    UnigramModel::new(Arc::clone(&organic.vocab), probs)
}

/// Expected token counts of a length-`n` document drawn from `model`.
pub fn mean_document(model: &UnigramModel, n: f64) -> Result<Document> {
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::NonPositiveLength(n));
    }
    let counts = model.probs.iter().map(|p| n * p).collect();
    Document::from_counts(Arc::clone(&model.vocab), counts)
}

/// Draws `k` i.i.d. tokens from `model` with a ChaCha8 stream keyed by `seed`.
pub fn sample_document(model: &UnigramModel, k: usize, seed: u64) -> Result<Document> {
    if k == 0 {
        return Err(Error::EmptySample);
    }
    let dist = WeightedIndex::new(&model.probs)
        .map_err(|e| Error::InvalidProbabilities(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0.0; model.vocab.len()];
    for _ in 0..k {
        counts[dist.sample(&mut rng)] += 1.0;
    }
    Document::from_counts(Arc::clone(&model.vocab), counts)
}

/// Anything that yields a next-token distribution given the tokens so far.
pub trait NextTokenDistribution {
    fn next_token_distribution(&self, prefix: &[TokenId]) -> Result<UnigramModel>;
}

impl NextTokenDistribution for UnigramModel {
    fn next_token_distribution(&self, _prefix: &[TokenId]) -> Result<UnigramModel> {
        Ok(self.clone())
    }
}

impl<F> NextTokenDistribution for F
where
    F: Fn(&[TokenId]) -> Result<UnigramModel>,
{
    fn next_token_distribution(&self, prefix: &[TokenId]) -> Result<UnigramModel> {
        self(prefix)
    }
}

/// Convex combination of several next-token distributions at `prefix`.
pub fn next_token_mixture(
    sources: &[&dyn NextTokenDistribution],
    weights: &[f64],
    prefix: &[TokenId],
) -> Result<UnigramModel> {
    let total: f64 = weights.iter().sum();
    if sources.is_empty()
        || sources.len() != weights.len()
        || weights.iter().any(|w| w.is_nan() || *w < 0.0)
        || (total - 1.0).abs() > NORMALIZATION_TOLERANCE
    {
        return Err(Error::WeightNormalization(total));
    }
    let dists = sources
        .iter()
        .map(|s| s.next_token_distribution(prefix))
        .collect::<Result<Vec<_>>>()?;
    let first = &dists[0];
    let mut probs = vec![0.0; first.vocab.len()];
    for (dist, w) in dists.iter().zip(weights) {
        first.check_same_vocab(dist)?;
        for (acc, p) in probs.iter_mut().zip(&dist.probs) {
            *acc += w * p;
        }
    }
    UnigramModel::new(Arc::clone(&first.vocab), probs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ab() -> Arc<Vocabulary> {
        Arc::new(Vocabulary::new(["a", "b"]).unwrap())
    }

    fn model(p: &[f64]) -> UnigramModel {
        UnigramModel::new(ab(), p.to_vec()).unwrap()
    }

    #[test]
    fn tokenize_counts_tokens() {
        let doc = tokenize("a a a b", VocabPolicy::BuildNew).unwrap();
        assert_eq!(doc.vocab().tokens(), ["a", "b"]);
        assert_eq!(doc.counts(), [3.0, 1.0]);
        assert_eq!(doc.length(), 4.0);
    }

    #[test]
    fn tokenize_lowercases() {
        let doc = tokenize("A a", VocabPolicy::BuildNew).unwrap();
        assert_eq!(doc.vocab().tokens(), ["a"]);
        assert_eq!(doc.counts(), [2.0]);
    }

    #[test]
    fn tokenize_long_text() {
        let text = format!("{} a", "b ".repeat(99));
        let base = Vocabulary::new(["a", "b"]).unwrap();
        let doc = tokenize(&text, VocabPolicy::Extend(&base)).unwrap();
        assert_eq!(doc.counts(), [1.0, 99.0]);
    }

    #[test]
    fn tokenize_extends_vocabulary() {
        let base = Vocabulary::new(["x"]).unwrap();
        let doc = tokenize("y x z", VocabPolicy::Extend(&base)).unwrap();
        assert_eq!(doc.vocab().tokens(), ["x", "y", "z"]);
        assert_eq!(doc.counts(), [1.0, 1.0, 1.0]);
    }

    #[test]
    fn tokenize_rejects_blank_text() {
        assert_eq!(tokenize("  \n\t", VocabPolicy::BuildNew), Err(Error::EmptyText));
    }

    #[test]
    fn vocabulary_rejects_duplicates_and_empty() {
        assert!(matches!(Vocabulary::new(["a", "a"]), Err(Error::DuplicateToken(_))));
        assert_eq!(Vocabulary::new(Vec::<String>::new()), Err(Error::EmptyVocabulary));
    }

    #[test]
    fn induce_mle() {
        let doc = Document::from_counts(ab(), vec![3.0, 1.0]).unwrap();
        assert_eq!(induce_lm(&doc, SmoothingConfig::NONE).unwrap().probs(), [0.75, 0.25]);

        let doc = Document::from_counts(ab(), vec![99.0, 1.0]).unwrap();
        assert_eq!(induce_lm(&doc, SmoothingConfig::NONE).unwrap().probs(), [0.99, 0.01]);
    }

    #[test]
    fn induce_smoothed() {
        let doc = Document::from_counts(ab(), vec![1.0, 0.0]).unwrap();
        let m = induce_lm(&doc, SmoothingConfig::new(0.1).unwrap()).unwrap();
        assert!((m.prob(0) - 0.95).abs() < 1e-15);
        assert!((m.prob(1) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn zero_length_document_rejected() {
        assert_eq!(Document::from_counts(ab(), vec![0.0, 0.0]), Err(Error::ZeroLengthDocument));
        assert!(Document::from_counts(ab(), vec![-1.0, 2.0]).is_err());
    }

    #[test]
    fn smoothing_and_fusion_ranges() {
        assert!(SmoothingConfig::new(1.0).is_err());
        assert!(SmoothingConfig::new(-0.1).is_err());
        assert!(FusionWeight::new(1.3).is_err());
        assert!(FusionWeight::new(f64::NAN).is_err());
        assert!(FusionWeight::new(1.0).is_ok());
    }

    #[test]
    fn mixture_examples() {
        let w = FusionWeight::new(0.5).unwrap();
        assert_eq!(mix_models(&model(&[1.0, 0.0]), &model(&[0.0, 1.0]), w).unwrap().probs(), [0.5, 0.5]);

        let eps = 0.01;
        let organic = model(&[1.0 - eps, eps]);
        let ad = model(&[eps, 1.0 - eps]);
        let fused = mix_models(&organic, &ad, FusionWeight::new(eps).unwrap()).unwrap();
        assert!((fused.prob(0) - 2.0 * eps * (1.0 - eps)).abs() < 1e-15);
        assert!((fused.prob(1) - (eps * eps + (1.0 - eps) * (1.0 - eps))).abs() < 1e-15);

        let same = mix_models(&organic, &ad, FusionWeight::new(1.0).unwrap()).unwrap();
        assert_eq!(same, organic);
    }

    #[test]
    fn mixture_rejects_foreign_vocabulary() {
        let other = UnigramModel::uniform(Arc::new(Vocabulary::new(["x", "y"]).unwrap()));
        assert_eq!(
            mix_models(&model(&[0.5, 0.5]), &other, FusionWeight::new(0.5).unwrap()),
            Err(Error::VocabularyMismatch)
        );
    }

    #[test]
    fn mean_document_examples() {
        let doc = mean_document(&model(&[0.75, 0.25]), 100.0).unwrap();
        assert_eq!(doc.counts(), [75.0, 25.0]);

        let eps: f64 = 0.01;
        let m = model(&[2.0 * eps * (1.0 - eps), eps * eps + (1.0 - eps).powi(2)]);
        assert_eq!(mean_document(&m, 1.0).unwrap().counts(), m.probs());

        let back = induce_lm(&mean_document(&m, 17.0).unwrap(), SmoothingConfig::NONE).unwrap();
        for (x, y) in back.probs().iter().zip(m.probs()) {
            assert!((x - y).abs() < 1e-12);
        }
        assert_eq!(mean_document(&m, 0.0), Err(Error::NonPositiveLength(0.0)));
    }

    #[test]
    fn sampling_degenerate_and_deterministic() {
        let doc = sample_document(&model(&[1.0, 0.0]), 37, 9).unwrap();
        assert_eq!(doc.counts(), [37.0, 0.0]);

        let m = model(&[0.3, 0.7]);
        assert_eq!(sample_document(&m, 500, 42).unwrap(), sample_document(&m, 500, 42).unwrap());
        assert_eq!(sample_document(&m, 0, 1), Err(Error::EmptySample));
    }

    #[test]
    fn sampling_law_of_large_numbers() {
        let k = 100_000;
        let doc = sample_document(&model(&[0.5, 0.5]), k, 42).unwrap();
        let freq = doc.count(0) / k as f64;
        // Standard error is 0.0016, so 0.01 is over six sigma.
        assert!((freq - 0.5).abs() < 0.01, "frequency {freq}");
        assert_eq!(doc.length(), k as f64);
    }

    #[test]
    fn next_token_mixture_reduces_to_fusion() {
        let organic = model(&[0.9, 0.1]);
        let ad = model(&[0.2, 0.8]);
        let lambda = 0.35;
        let mixed = next_token_mixture(&[&organic, &ad], &[lambda, 1.0 - lambda], &[0, 1]).unwrap();
        let fused = mix_models(&organic, &ad, FusionWeight::new(lambda).unwrap()).unwrap();
        for (x, y) in mixed.probs().iter().zip(fused.probs()) {
            assert!((x - y).abs() < 1e-15);
        }

        assert_eq!(next_token_mixture(&[&organic], &[1.0], &[]).unwrap(), organic);

        let mixed = next_token_mixture(&[&model(&[1.0, 0.0]), &model(&[0.0, 1.0])], &[0.3, 0.7], &[]).unwrap();
        assert_eq!(mixed.probs(), [0.3, 0.7]);
    }

    #[test]
    fn next_token_mixture_with_prefix_dependent_provider() {
        let echo = |prefix: &[TokenId]| -> Result<UnigramModel> {
            let last = prefix.last().copied().unwrap_or(0);
            let mut p = vec![0.0, 0.0];
            p[last] = 1.0;
            UnigramModel::new(ab(), p)
        };
        let flat = model(&[0.5, 0.5]);
        let mixed = next_token_mixture(&[&echo, &flat], &[0.5, 0.5], &[0, 1]).unwrap();
        assert_eq!(mixed.probs(), [0.25, 0.75]);
    }

    #[test]
    fn next_token_mixture_rejects_bad_weights() {
        let m = model(&[0.5, 0.5]);
        assert!(matches!(
            next_token_mixture(&[&m, &m], &[0.5, 0.6], &[]),
            Err(Error::WeightNormalization(_))
        ));
        assert!(next_token_mixture(&[&m, &m], &[-0.5, 1.5], &[]).is_err());
    }
}
