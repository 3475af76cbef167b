//! Single-slot sponsored-answer auction.
//!
//! Each advertiser's ad is fused with the organic answer into a sponsored
//! answer. The platform shows the sponsored answer with the largest platform
//! value (user utility plus bid) and charges the winner the smallest bid that
//! would still have won against the runner-up.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::similarity::{
    shift_constant_labeled, similarity_breakdown, SimilarityContext, SymmetricTerms,
};
use crate::text_lm::{induce_lm, mix_models, same_vocab, Document, FusionWeight, SmoothingConfig, UnigramModel};

/// Platform values closer than this are treated as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Absolute tolerance used when asserting algebraic identities.
pub const IDENTITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AdvertiserId(pub u32);

impl fmt::Display for AdvertiserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Raw per-advertiser input to [`AuctionSetup::new`].
#[derive(Debug, Clone)]
pub struct AdvertiserInput {
    pub id: AdvertiserId,
    pub ad: Document,
    pub lambda: FusionWeight,
}

#[derive(Debug, Clone)]
pub struct Advertiser {
    pub id: AdvertiserId,
    pub ad: Document,
    pub lambda: FusionWeight,
    pub ad_model: UnigramModel,
    pub sponsored_model: UnigramModel,
    /// `CE(sponsored||ad)` and `CE(ad||sponsored)`.
    pub value_terms: SymmetricTerms,
    /// `CE(sponsored||organic)` and `CE(organic||sponsored)`.
    pub utility_terms: SymmetricTerms,
    pub value: f64,
    pub user_utility: f64,
}

/// A question, its organic answer, and the competing advertisers with their
/// derived sponsored answers, values and user utilities.
#[derive(Debug, Clone)]
pub struct AuctionSetup {
    question: Option<Document>,
    organic: Document,
    organic_model: UnigramModel,
    advertisers: Vec<Advertiser>,
    ctx: SimilarityContext,
}

impl AuctionSetup {
    pub fn new(
        question: Option<Document>,
        organic: Document,
        inputs: Vec<AdvertiserInput>,
        smoothing: SmoothingConfig,
    ) -> Result<Self> {
        if inputs.len() < 2 {
            return Err(Error::TooFewAdvertisers(inputs.len()));
        }
        for (k, input) in inputs.iter().enumerate() {
            if inputs[..k].iter().any(|other| other.id == input.id) {
                return Err(Error::DuplicateAdvertiser(input.id.0));
            }
            if !same_vocab(organic.vocab(), input.ad.vocab()) {
                return Err(Error::VocabularyMismatch);
            }
        }

        let organic_model = induce_lm(&organic, smoothing)?;
        let ad_models = inputs
            .iter()
            .map(|input| induce_lm(&input.ad, smoothing))
            .collect::<Result<Vec<_>>>()?;

        let labels: Vec<String> = std::iter::once("organic answer".to_string())
            .chain(inputs.iter().map(|input| format!("ad {}", input.id)))
            .collect();
        let base: Vec<(&str, &UnigramModel)> = labels
            .iter()
            .map(String::as_str)
            .zip(std::iter::once(&organic_model).chain(&ad_models))
            .collect();
        let ctx = SimilarityContext::new(shift_constant_labeled(&base)?, smoothing)?;

        let advertisers = inputs
            .into_iter()
            .zip(ad_models)
            .map(|(input, ad_model)| {
                let sponsored_model = mix_models(&organic_model, &ad_model, input.lambda)?;
                let sponsored_label = format!("sponsored answer {}", input.id);
                let value = similarity_breakdown(&sponsored_model, &ad_model, &ctx, &sponsored_label, &format!("ad {}", input.id))?;
                let utility = similarity_breakdown(&sponsored_model, &organic_model, &ctx, &sponsored_label, "organic answer")?;
                Ok(Advertiser {
                    id: input.id,
                    ad: input.ad,
                    lambda: input.lambda,
                    ad_model,
                    sponsored_model,
                    value_terms: value.terms,
                    utility_terms: utility.terms,
                    value: value.value,
                    user_utility: utility.value,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        Ok(AuctionSetup {
            question,
            organic,
            organic_model,
            advertisers,
            ctx,
        })
    }

    /// The same setup evaluated with a different shift constant.
    pub fn with_shift(&self, shift_a: f64) -> Result<Self> {
        let ctx = SimilarityContext::new(shift_a, self.ctx.smoothing())?;
        let mut setup = self.clone();
        for adv in &mut setup.advertisers {
            adv.value = 2.0 * shift_a - adv.value_terms.sum();
            adv.user_utility = 2.0 * shift_a - adv.utility_terms.sum();
        }
        setup.ctx = ctx;
        Ok(setup)
    }

    pub fn question(&self) -> Option<&Document> {
        self.question.as_ref()
    }

    pub fn organic(&self) -> &Document {
        &self.organic
    }

    pub fn organic_model(&self) -> &UnigramModel {
        &self.organic_model
    }

    pub fn vocab(&self) -> &Arc<crate::text_lm::Vocabulary> {
        self.organic.vocab()
    }

    pub fn advertisers(&self) -> &[Advertiser] {
        &self.advertisers
    }

    pub fn len(&self) -> usize {
        self.advertisers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.advertisers.is_empty()
    }

    pub fn context(&self) -> &SimilarityContext {
        &self.ctx
    }

    pub fn shift_a(&self) -> f64 {
        self.ctx.shift_a()
    }

    pub fn index_of(&self, id: AdvertiserId) -> Result<usize> {
        self.advertisers
            .iter()
            .position(|a| a.id == id)
            .ok_or(Error::UnknownAdvertiser(id.0))
    }

    pub fn advertiser(&self, id: AdvertiserId) -> Result<&Advertiser> {
        self.index_of(id).map(|i| &self.advertisers[i])
    }

    pub fn ids(&self) -> impl Iterator<Item = AdvertiserId> + '_ {
        self.advertisers.iter().map(|a| a.id)
    }

    pub fn values(&self) -> Vec<f64> {
        self.advertisers.iter().map(|a| a.value).collect()
    }
}

/// One nonnegative bid per advertiser, in setup order.
#[derive(Debug, Clone, PartialEq)]
pub struct BidProfile {
    bids: Vec<f64>,
}

impl BidProfile {
    pub fn new(setup: &AuctionSetup, bids: Vec<f64>) -> Result<Self> {
        if bids.len() != setup.len() {
            return Err(Error::BidCountMismatch {
                expected: setup.len(),
                got: bids.len(),
            });
        }
        for (adv, bid) in setup.advertisers.iter().zip(&bids) {
            if !(*bid >= 0.0 && bid.is_finite()) {
                return Err(Error::InvalidBid { id: adv.id.0, bid: *bid });
            }
        }
        Ok(BidProfile { bids })
    }

    /// Every advertiser bids its value.
    pub fn truthful(setup: &AuctionSetup) -> Self {
        BidProfile { bids: setup.values() }
    }

    pub fn bids(&self) -> &[f64] {
        &self.bids
    }

    pub fn bid(&self, index: usize) -> f64 {
        self.bids[index]
    }

    pub fn with_bid(&self, index: usize, bid: f64) -> Self {
        let mut bids = self.bids.clone();
        bids[index] = bid;
        BidProfile { bids }
    }

    fn check(&self, setup: &AuctionSetup) -> Result<()> {
        if self.bids.len() != setup.len() {
            return Err(Error::BidCountMismatch {
                expected: setup.len(),
                got: self.bids.len(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AuctionConfig {
    /// Floor the winner's payment at zero. Off by default; verification
    /// always runs with the raw payment.
    pub clamp_payment_at_zero: bool,
}

pub fn platform_value(user_utility: f64, bid: f64) -> f64 {
    user_utility + bid
}

fn beats(setup: &AuctionSetup, pv: impl Fn(usize) -> f64, challenger: usize, incumbent: usize) -> bool {
    let (a, b) = (pv(challenger), pv(incumbent));
    a > b + TIE_TOLERANCE
        || ((a - b).abs() <= TIE_TOLERANCE && setup.advertisers[challenger].id < setup.advertisers[incumbent].id)
}

fn best_index(setup: &AuctionSetup, pv: impl Fn(usize) -> f64 + Copy, exclude: Option<usize>) -> usize {
    let mut best: Option<usize> = None;
    for i in 0..setup.len() {
        if Some(i) == exclude {
            continue;
        }
        best = match best {
            Some(b) if !beats(setup, pv, i, b) => Some(b),
            _ => Some(i),
        };
    }
    best.expect("setup has at least two advertisers")
}

/// Indices of the winner and runner-up for raw bids in setup order.
pub(crate) fn rank_top_two(setup: &AuctionSetup, bids: &[f64]) -> (usize, usize) {
    let pv = |i: usize| platform_value(setup.advertisers[i].user_utility, bids[i]);
    let winner = best_index(setup, pv, None);
    let second = best_index(setup, pv, Some(winner));
    (winner, second)
}

pub(crate) fn raw_payment(setup: &AuctionSetup, bids: &[f64], winner: usize, second: usize) -> f64 {
    bids[second] + setup.advertisers[second].user_utility - setup.advertisers[winner].user_utility
}

/// Utility of advertiser `index` with true value `value` under `bids`.
pub(crate) fn utility_at(setup: &AuctionSetup, bids: &[f64], index: usize, value: f64) -> f64 {
    let (winner, second) = rank_top_two(setup, bids);
    if winner == index {
        value - raw_payment(setup, bids, winner, second)
    } else {
        0.0
    }
}

/// Winner maximizes platform value; runner-up maximizes it among the rest.
/// Ties go to the lowest advertiser id.
pub fn select_winner(setup: &AuctionSetup, bids: &BidProfile) -> Result<(AdvertiserId, AdvertiserId)> {
    if setup.len() < 2 {
        return Err(Error::TooFewAdvertisers(setup.len()));
    }
    bids.check(setup)?;
    let (w, s) = rank_top_two(setup, &bids.bids);
    Ok((setup.advertisers[w].id, setup.advertisers[s].id))
}

/// `b_second + U_second - U_winner`: the bid at which the winner's platform
/// value equals the runner-up's. May be negative.
pub fn winner_payment(
    setup: &AuctionSetup,
    bids: &BidProfile,
    winner: AdvertiserId,
    second: AdvertiserId,
) -> Result<f64> {
    if winner == second {
        return Err(Error::SameWinnerAndSecond(winner.0));
    }
    bids.check(setup)?;
    let w = setup.index_of(winner)?;
    let s = setup.index_of(second)?;
    Ok(raw_payment(setup, &bids.bids, w, s))
}

pub fn advertiser_utility(setup: &AuctionSetup, bids: &BidProfile, id: AdvertiserId) -> Result<f64> {
    let index = setup.index_of(id)?;
    bids.check(setup)?;
    Ok(utility_at(setup, &bids.bids, index, setup.advertisers[index].value))
}

/// User utility plus advertiser value from showing `id`'s sponsored answer.
pub fn social_welfare(setup: &AuctionSetup, id: AdvertiserId) -> Result<f64> {
    let adv = setup.advertiser(id)?;
    Ok(adv.user_utility + adv.value)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdvertiserOutcome {
    pub id: AdvertiserId,
    pub bid: f64,
    pub platform_value: f64,
    pub user_utility: f64,
    pub value: f64,
    pub utility: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuctionOutcome {
    pub winner: AdvertiserId,
    pub second: AdvertiserId,
    pub payment: f64,
    pub negative_payment_flag: bool,
    pub advertisers: Vec<AdvertiserOutcome>,
    pub social_welfare_winner: f64,
    pub social_welfare_second: f64,
}

impl AuctionOutcome {
    pub fn get(&self, id: AdvertiserId) -> Option<&AdvertiserOutcome> {
        self.advertisers.iter().find(|a| a.id == id)
    }

    pub fn winner_outcome(&self) -> &AdvertiserOutcome {
        self.get(self.winner).expect("winner is a participant")
    }

    pub fn second_outcome(&self) -> &AdvertiserOutcome {
        self.get(self.second).expect("runner-up is a participant")
    }

    pub fn social_welfare_gap(&self) -> f64 {
        self.social_welfare_winner - self.social_welfare_second
    }
}

pub fn run_auction(setup: &AuctionSetup, bids: &BidProfile) -> Result<AuctionOutcome> {
    run_auction_with(setup, bids, &AuctionConfig::default())
}

pub fn run_auction_with(setup: &AuctionSetup, bids: &BidProfile, config: &AuctionConfig) -> Result<AuctionOutcome> {
    let (winner, second) = select_winner(setup, bids)?;
    let raw = winner_payment(setup, bids, winner, second)?;
    let payment = if config.clamp_payment_at_zero { raw.max(0.0) } else { raw };
    let advertisers = setup
        .advertisers
        .iter()
        .zip(&bids.bids)
        .map(|(adv, &bid)| AdvertiserOutcome {
            id: adv.id,
            bid,
            platform_value: platform_value(adv.user_utility, bid),
            user_utility: adv.user_utility,
            value: adv.value,
            utility: if adv.id == winner { adv.value - payment } else { 0.0 },
        })
        .collect();
    Ok(AuctionOutcome {
        winner,
        second,
        payment,
        negative_payment_flag: raw < 0.0,
        advertisers,
        social_welfare_winner: social_welfare(setup, winner)?,
        social_welfare_second: social_welfare(setup, second)?,
    })
}
