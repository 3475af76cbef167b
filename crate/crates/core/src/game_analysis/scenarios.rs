//! Raw scenario inputs shared by the main pipeline and the brute-force oracle.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::auction::{AdvertiserId, AdvertiserInput, AuctionSetup, BidProfile};
use crate::error::Result;
use crate::text_lm::{Document, FusionWeight, SmoothingConfig, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RawBid {
    Truthful,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawAd {
    pub id: u32,
    pub counts: Vec<f64>,
    pub lambda: f64,
    pub bid: RawBid,
}

/// Token counts over an anonymous vocabulary `t0..t{k-1}`, plus fusion
/// weights and bids.
#[derive(Debug, Clone, PartialEq)]
pub struct RawScenario {
    pub organic: Vec<f64>,
    pub ads: Vec<RawAd>,
    pub smoothing_mu: f64,
}

impl RawScenario {
    /// Vocabulary of 2 to 6 tokens, 2 to 4 advertisers, strictly positive
    /// gamma-distributed counts, uniform fusion weights, and a mix of
    /// truthful and uniformly random bids.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> RawScenario {
        let vocab_size = rng.random_range(2..=6);
        let n = rng.random_range(2..=4);
        let gamma = Gamma::new(2.0, 1.0).expect("valid gamma parameters");
        let counts = |rng: &mut R| -> Vec<f64> {
            let length = rng.random_range(5.0..50.0);
            let draws: Vec<f64> = (0..vocab_size).map(|_| gamma.sample(rng) + 1e-3).collect();
            let total: f64 = draws.iter().sum();
            draws.iter().map(|d| d / total * length).collect()
        };
        let organic = counts(rng);
        let ads = (0..n)
            .map(|k| RawAd {
                id: k as u32 + 1,
                counts: counts(rng),
                lambda: rng.random_range(0.0..=1.0),
                bid: if rng.random_bool(0.4) {
                    RawBid::Truthful
                } else {
                    RawBid::Fixed(rng.random_range(0.0..20.0))
                },
            })
            .collect();
        RawScenario {
            organic,
            ads,
            smoothing_mu: 0.0,
        }
    }

    /// Two advertisers with the same ad, weight and truthful bid.
    pub fn identical_pair() -> RawScenario {
        let ad = |id| RawAd {
            id,
            counts: vec![1.0, 3.0, 2.0],
            lambda: 0.4,
            bid: RawBid::Truthful,
        };
        RawScenario {
            organic: vec![4.0, 1.0, 1.0],
            ads: vec![ad(1), ad(2)],
            smoothing_mu: 0.0,
        }
    }

    /// Same scenario with every bid truthful.
    pub fn truthful(&self) -> RawScenario {
        let mut raw = self.clone();
        for ad in &mut raw.ads {
            ad.bid = RawBid::Truthful;
        }
        raw
    }

    pub fn vocab_size(&self) -> usize {
        self.organic.len()
    }

    /// Builds the setup and bid profile through the main pipeline.
    pub fn to_setup(&self) -> Result<(AuctionSetup, BidProfile)> {
        let vocab = Arc::new(Vocabulary::new((0..self.vocab_size()).map(|i| format!("t{i}")))?);
        let organic = Document::from_counts(Arc::clone(&vocab), self.organic.clone())?;
        let inputs = self
            .ads
            .iter()
            .map(|ad| {
                Ok(AdvertiserInput {
                    id: AdvertiserId(ad.id),
                    ad: Document::from_counts(Arc::clone(&vocab), ad.counts.clone())?,
                    lambda: FusionWeight::new(ad.lambda)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let setup = AuctionSetup::new(None, organic, inputs, SmoothingConfig::new(self.smoothing_mu)?)?;
        let bids = self
            .ads
            .iter()
            .zip(setup.advertisers())
            .map(|(ad, adv)| match ad.bid {
                RawBid::Truthful => adv.value,
                RawBid::Fixed(b) => b,
            })
            .collect();
        let bids = BidProfile::new(&setup, bids)?;
        Ok((setup, bids))
    }
}
