//! Scenario files, auction reports and sweep CSVs.
//!
//! Scenarios are JSON objects:
//!
//! ```json
//! {
//!   "question": "which laptop should I buy",
//!   "organic_answer": "a light laptop with a long battery life",
//!   "advertisers": [
//!     { "id": 1, "ad": "our laptop has the longest battery life", "lambda": 0.5, "bid": "truthful" },
//!     { "id": 2, "ad": { "counts": { "laptop": 2, "light": 1 } }, "lambda": 0.7, "bid": 3.5 }
//!   ],
//!   "smoothing_mu": 0.0,
//!   "options": { "clamp_payment_at_zero": false }
//! }
//! ```
//!
//! Documents are raw text or explicit (possibly fractional) token counts.
//! Models live on the union vocabulary of the organic answer and the ads;
//! the question is tokenized and carried along but never scored.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::auction::{AdvertiserId, AdvertiserInput, AuctionConfig, AuctionOutcome, AuctionSetup, BidProfile};
use crate::error::{Error, Result};
use crate::game_analysis::SweepRow;
use crate::text_lm::{split_tokens, tokenize, Document, FusionWeight, SmoothingConfig, VocabPolicy, Vocabulary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DocumentSource {
    Text(String),
    Counts { counts: BTreeMap<String, f64> },
}

impl DocumentSource {
    fn tokens(&self) -> Vec<String> {
        match self {
            DocumentSource::Text(text) => split_tokens(text).collect(),
            DocumentSource::Counts { counts } => counts.keys().map(|k| k.to_lowercase()).collect(),
        }
    }

    fn to_document(&self, vocab: &Arc<Vocabulary>) -> Result<Document> {
        match self {
            DocumentSource::Text(text) => {
                let tokens: Vec<String> = split_tokens(text).collect();
                Document::from_token_counts(Arc::clone(vocab), tokens.iter().map(|t| (t.as_str(), 1.0)))
            }
            DocumentSource::Counts { counts } => {
                let lowered: Vec<(String, f64)> = counts.iter().map(|(k, c)| (k.to_lowercase(), *c)).collect();
                Document::from_token_counts(Arc::clone(vocab), lowered.iter().map(|(k, c)| (k.as_str(), *c)))
            }
        }
    }

    fn validate(&self, field: &str) -> Result<()> {
        let invalid = |message: String| Error::Validation {
            field: field.to_string(),
            message,
        };
        match self {
            DocumentSource::Text(text) => {
                if split_tokens(text).next().is_none() {
                    return Err(invalid("text contains no tokens".into()));
                }
            }
            DocumentSource::Counts { counts } => {
                if let Some((token, c)) = counts.iter().find(|(_, c)| !(c.is_finite() && **c >= 0.0)) {
                    return Err(invalid(format!("count for {token:?} must be finite and nonnegative, got {c}")));
                }
                if counts.values().sum::<f64>() <= 0.0 {
                    return Err(invalid("counts must include a positive entry".into()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BidSpec {
    Truthful,
    Fixed(f64),
}

impl Serialize for BidSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            BidSpec::Truthful => serializer.serialize_str("truthful"),
            BidSpec::Fixed(b) => serializer.serialize_f64(*b),
        }
    }
}

impl<'de> Deserialize<'de> for BidSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Mode(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Number(b) => Ok(BidSpec::Fixed(b)),
            Raw::Mode(mode) if mode == "truthful" => Ok(BidSpec::Truthful),
            Raw::Mode(mode) => Err(serde::de::Error::custom(format!(
                "bid must be \"truthful\" or a number, got {mode:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdvertiserEntry {
    pub id: u32,
    pub ad: DocumentSource,
    pub lambda: f64,
    pub bid: BidSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioOptions {
    #[serde(default)]
    pub clamp_payment_at_zero: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub question: String,
    pub organic_answer: DocumentSource,
    pub advertisers: Vec<AdvertiserEntry>,
    #[serde(default)]
    pub smoothing_mu: f64,
    #[serde(default)]
    pub options: ScenarioOptions,
}

/// A validated scenario with everything derived from it.
#[derive(Debug, Clone)]
pub struct ParsedScenario {
    pub file: ScenarioFile,
    pub setup: AuctionSetup,
    pub bids: BidProfile,
    pub config: AuctionConfig,
}

impl ParsedScenario {
    pub fn is_truthful(&self) -> bool {
        self.file.advertisers.iter().all(|a| a.bid == BidSpec::Truthful)
    }
}

impl ScenarioFile {
    pub fn from_json(source: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(source);
        serde_path_to_error::deserialize(de).map_err(|err| {
            let path = err.path().to_string();
            Error::Schema {
                path,
                message: err.into_inner().to_string(),
            }
        })
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("scenario serializes");
        text.push('\n');
        text
    }

    /// Re-expresses a setup as an explicit-count scenario.
    pub fn from_setup(question: &str, setup: &AuctionSetup, bids: Vec<BidSpec>) -> Self {
        let counts = |doc: &Document| DocumentSource::Counts {
            counts: doc
                .vocab()
                .tokens()
                .iter()
                .zip(doc.counts())
                .filter(|(_, c)| **c > 0.0)
                .map(|(t, c)| (t.clone(), *c))
                .collect(),
        };
        ScenarioFile {
            question: question.to_string(),
            organic_answer: counts(setup.organic()),
            advertisers: setup
                .advertisers()
                .iter()
                .zip(bids)
                .map(|(adv, bid)| AdvertiserEntry {
                    id: adv.id.0,
                    ad: counts(&adv.ad),
                    lambda: adv.lambda.value(),
                    bid,
                })
                .collect(),
            smoothing_mu: setup.context().smoothing().mu(),
            options: ScenarioOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |field: String, message: String| Error::Validation { field, message };
        if split_tokens(&self.question).next().is_none() {
            return Err(invalid("question".into(), "text contains no tokens".into()));
        }
        self.organic_answer.validate("organic_answer")?;
        if self.advertisers.len() < 2 {
            return Err(invalid(
                "advertisers".into(),
                format!("at least two advertisers are required, got {}", self.advertisers.len()),
            ));
        }
        if !(0.0..1.0).contains(&self.smoothing_mu) {
            return Err(invalid(
                "smoothing_mu".into(),
                format!("must lie in [0, 1), got {}", self.smoothing_mu),
            ));
        }
        for (k, adv) in self.advertisers.iter().enumerate() {
            let field = |name: &str| format!("advertisers[{k}].{name}");
            if self.advertisers[..k].iter().any(|other| other.id == adv.id) {
                return Err(invalid(field("id"), format!("duplicate advertiser id {}", adv.id)));
            }
            if !(0.0..=1.0).contains(&adv.lambda) {
                return Err(invalid(
                    field("lambda"),
                    format!("advertiser {}: lambda must lie in [0, 1], got {}", adv.id, adv.lambda),
                ));
            }
            if let BidSpec::Fixed(b) = adv.bid {
                if !(b >= 0.0 && b.is_finite()) {
                    return Err(invalid(
                        field("bid"),
                        format!("advertiser {}: bid must be finite and nonnegative, got {b}", adv.id),
                    ));
                }
            }
            adv.ad.validate(&field("ad"))?;
        }
        Ok(())
    }

    /// Validates and derives the setup, bids and auction options.
    pub fn build(self) -> Result<ParsedScenario> {
        self.validate()?;
        let vocab = Vocabulary::new(
            self.organic_answer
                .tokens()
                .into_iter()
                .chain(self.advertisers.iter().flat_map(|a| a.ad.tokens()))
                .fold(Vec::<String>::new(), |mut acc, t| {
                    if !acc.contains(&t) {
                        acc.push(t);
                    }
                    acc
                }),
        )?;
        let vocab = Arc::new(vocab);
        let question = tokenize(&self.question, VocabPolicy::BuildNew)?;
        let organic = self.organic_answer.to_document(&vocab)?;
        let inputs = self
            .advertisers
            .iter()
            .map(|adv| {
                Ok(AdvertiserInput {
                    id: AdvertiserId(adv.id),
                    ad: adv.ad.to_document(&vocab)?,
                    lambda: FusionWeight::new(adv.lambda)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let setup = AuctionSetup::new(Some(question), organic, inputs, SmoothingConfig::new(self.smoothing_mu)?)?;
        let bids = self
            .advertisers
            .iter()
            .zip(setup.advertisers())
            .map(|(entry, adv)| match entry.bid {
                BidSpec::Truthful => adv.value,
                BidSpec::Fixed(b) => b,
            })
            .collect();
        let bids = BidProfile::new(&setup, bids)?;
        let config = AuctionConfig {
            clamp_payment_at_zero: self.options.clamp_payment_at_zero,
        };
        Ok(ParsedScenario {
            file: self,
            setup,
            bids,
            config,
        })
    }
}

pub fn parse_scenario(source: &str) -> Result<ParsedScenario> {
    ScenarioFile::from_json(source)?.build()
}

/// Rounds to 12 significant digits.
pub fn round_sig12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().expect("scientific notation parses")
}

/// Fixed-point decimal rendering with 12 significant digits.
pub fn format_sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.11e}");
    let exponent: i32 = sci[sci.find('e').expect("exponent marker") + 1..]
        .parse()
        .expect("integer exponent");
    let decimals = (11 - exponent).max(0) as usize;
    format!("{x:.decimals$}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvertiserReport {
    pub id: AdvertiserId,
    pub lambda: f64,
    pub bid: f64,
    pub value: f64,
    pub user_utility: f64,
    pub platform_value: f64,
    pub social_welfare: f64,
    pub utility: f64,
    pub ce_sponsored_ad: f64,
    pub ce_ad_sponsored: f64,
    pub ce_sponsored_organic: f64,
    pub ce_organic_sponsored: f64,
}

/// Everything reported about one auction run. Floats are stored rounded to
/// 12 significant digits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub question: String,
    pub smoothing_mu: f64,
    pub shift_a: f64,
    pub truthful: bool,
    pub winner: AdvertiserId,
    pub second: AdvertiserId,
    pub payment: f64,
    pub negative_payment_flag: bool,
    pub payment_clamped: bool,
    pub social_welfare_winner: f64,
    pub social_welfare_second: f64,
    pub social_welfare_gap: f64,
    pub winner_utility: f64,
    pub advertisers: Vec<AdvertiserReport>,
}

impl ReportRecord {
    pub fn new(question: &str, setup: &AuctionSetup, outcome: &AuctionOutcome, config: &AuctionConfig, truthful: bool) -> Self {
        let r = round_sig12;
        let advertisers = setup
            .advertisers()
            .iter()
            .zip(&outcome.advertisers)
            .map(|(adv, out)| AdvertiserReport {
                id: adv.id,
                lambda: r(adv.lambda.value()),
                bid: r(out.bid),
                value: r(out.value),
                user_utility: r(out.user_utility),
                platform_value: r(out.platform_value),
                social_welfare: r(adv.user_utility + adv.value),
                utility: r(out.utility),
                ce_sponsored_ad: r(adv.value_terms.forward),
                ce_ad_sponsored: r(adv.value_terms.backward),
                ce_sponsored_organic: r(adv.utility_terms.forward),
                ce_organic_sponsored: r(adv.utility_terms.backward),
            })
            .collect();
        ReportRecord {
            question: question.to_string(),
            smoothing_mu: r(setup.context().smoothing().mu()),
            shift_a: r(setup.shift_a()),
            truthful,
            winner: outcome.winner,
            second: outcome.second,
            payment: r(outcome.payment),
            negative_payment_flag: outcome.negative_payment_flag,
            payment_clamped: config.clamp_payment_at_zero && outcome.negative_payment_flag,
            social_welfare_winner: r(outcome.social_welfare_winner),
            social_welfare_second: r(outcome.social_welfare_second),
            social_welfare_gap: r(outcome.social_welfare_gap()),
            winner_utility: r(outcome.winner_outcome().utility),
            advertisers,
        }
    }

    pub fn from_json(source: &str) -> Result<Self> {
        serde_json::from_str(source).map_err(|e| Error::Schema {
            path: ".".into(),
            message: e.to_string(),
        })
    }
}

pub fn write_report(record: &ReportRecord) -> String {
    let mut text = serde_json::to_string_pretty(record).expect("report serializes");
    text.push('\n');
    text
}

pub const SWEEP_HEADER: [&str; 6] = ["epsilon", "value_gap", "utility_gap", "pv_gap", "winner", "payment"];

pub fn write_sweep_csv(rows: &[SweepRow]) -> String {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    writer.write_record(SWEEP_HEADER).expect("in-memory write");
    for row in rows {
        writer
            .write_record([
                format_sig12(row.epsilon),
                format_sig12(row.value_gap),
                format_sig12(row.utility_gap),
                format_sig12(row.pv_gap),
                row.winner.to_string(),
                format_sig12(row.payment),
            ])
            .expect("in-memory write");
    }
    let bytes = writer.into_inner().expect("in-memory flush");
    String::from_utf8(bytes).expect("csv output is utf-8")
}
