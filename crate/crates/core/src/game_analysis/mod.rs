//! Search-based verification of the auction's game-theoretic properties.
//!
//! Truthful bidding is checked for dominance against bid grids and sampled
//! opponent profiles, bid profiles are checked for pure Nash equilibrium by
//! single-player grid deviations, and the truthful winner's utility is
//! compared against the social-welfare gap it creates.

mod counterexample;
mod oracle;
mod scenarios;

pub use counterexample::{
    build_prop2_scenario, build_prop3_scenario, epsilon_sweep, verify_prop2, verify_prop3,
    CounterexampleScenario, Proposition, PropositionCheck, Sweep, SweepFlips, SweepRow,
};
pub use oracle::{oracle_winner_bruteforce, OracleOutcome};
pub use scenarios::{RawAd, RawBid, RawScenario};

use rand::Rng;
use serde::Serialize;

use crate::auction::{
    run_auction, utility_at, AdvertiserId, AuctionSetup, BidProfile, IDENTITY_TOLERANCE,
};
use crate::error::{Error, Result};

/// Sum of the players' utilities at a strategy profile.
pub fn profile_social_welfare(utilities: &[f64]) -> f64 {
    utilities.iter().sum()
}

/// Candidate bids per advertiser, in setup order. Each grid is sorted, lies
/// within `[0, 2 v_i]` and contains `v_i` exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct BidGrid {
    grids: Vec<Vec<f64>>,
}

impl BidGrid {
    pub fn new(setup: &AuctionSetup, grids: Vec<Vec<f64>>) -> Result<Self> {
        if grids.len() != setup.len() {
            return Err(Error::BidCountMismatch {
                expected: setup.len(),
                got: grids.len(),
            });
        }
        for (adv, grid) in setup.advertisers().iter().zip(&grids) {
            let bad = |reason: &str| Error::InvalidGrid {
                id: adv.id.0,
                reason: reason.to_string(),
            };
            if grid.is_empty() {
                return Err(bad("empty grid"));
            }
            if grid.iter().any(|b| b.is_nan()) || grid.windows(2).any(|w| w[0] > w[1]) {
                return Err(bad("grid is not sorted ascending"));
            }
            if grid[0] < 0.0 || grid[grid.len() - 1] > 2.0 * adv.value {
                return Err(bad("grid leaves [0, 2v]"));
            }
            if !grid.contains(&adv.value) {
                return Err(bad("grid does not contain the value"));
            }
        }
        Ok(BidGrid { grids })
    }

    /// `points` evenly spaced bids over `[0, 2 v_i]` for every advertiser,
    /// with `v_i` itself always present. A single point means just `v_i`.
    pub fn spanning(setup: &AuctionSetup, points: usize) -> Result<Self> {
        if points == 0 {
            return Err(Error::Validation {
                field: "grid_points".into(),
                message: "must be at least 1".into(),
            });
        }
        let grids = setup
            .advertisers()
            .iter()
            .map(|adv| {
                let v = adv.value;
                if points == 1 {
                    return vec![v];
                }
                let mut grid: Vec<f64> = (0..points)
                    .map(|k| 2.0 * v * (k as f64 / (points - 1) as f64))
                    .collect();
                if !grid.contains(&v) {
                    if points % 2 == 1 {
                        grid[points / 2] = v;
                    } else {
                        let at = grid.partition_point(|b| *b < v);
                        grid.insert(at, v);
                    }
                }
                grid
            })
            .collect();
        BidGrid::new(setup, grids)
    }

    pub fn for_index(&self, index: usize) -> &[f64] {
        &self.grids[index]
    }
}

/// Bids of every advertiser except one, in setup order.
#[derive(Debug, Clone, PartialEq)]
pub struct OpponentProfile {
    bids: Vec<f64>,
}

impl OpponentProfile {
    pub fn new(bids: Vec<f64>) -> Self {
        OpponentProfile { bids }
    }

    pub fn bids(&self) -> &[f64] {
        &self.bids
    }

    /// Full bid vector with `own` inserted at `index`.
    pub fn with_own_bid(&self, index: usize, own: f64) -> Vec<f64> {
        let mut full = Vec::with_capacity(self.bids.len() + 1);
        full.extend_from_slice(&self.bids[..index]);
        full.push(own);
        full.extend_from_slice(&self.bids[index..]);
        full
    }
}

/// Random opponent bids for advertiser `index`: mostly uniform on
/// `[0, 2 v_j]`, sometimes truthful, sometimes exactly matching the platform
/// value `index` reaches by bidding truthfully.
pub fn random_opponent_profiles<R: Rng + ?Sized>(
    setup: &AuctionSetup,
    index: usize,
    count: usize,
    rng: &mut R,
) -> Vec<OpponentProfile> {
    let advs = setup.advertisers();
    let target_pv = advs[index].user_utility + advs[index].value;
    (0..count)
        .map(|_| {
            let bids = advs
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != index)
                .map(|(_, adv)| {
                    let roll: f64 = rng.random();
                    if roll < 0.6 {
                        rng.random::<f64>() * 2.0 * adv.value
                    } else if roll < 0.8 {
                        adv.value
                    } else {
                        (target_pv - adv.user_utility).max(0.0)
                    }
                })
                .collect();
            OpponentProfile::new(bids)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceReport {
    pub advertiser: AdvertiserId,
    pub profiles_tested: usize,
    pub deviations_tested: usize,
    /// Largest `U(deviation) - U(truthful)` found.
    pub max_violation: f64,
    pub worst_bid: Option<f64>,
    pub passed: bool,
}

pub fn check_truthful_dominance(
    setup: &AuctionSetup,
    id: AdvertiserId,
    grid: &BidGrid,
    opponent_profiles: &[OpponentProfile],
) -> Result<DominanceReport> {
    let index = setup.index_of(id)?;
    let value = setup.advertisers()[index].value;
    let deviations = grid.for_index(index);
    let mut max_violation = f64::NEG_INFINITY;
    let mut worst_bid = None;
    for profile in opponent_profiles {
        if profile.bids.len() + 1 != setup.len() {
            return Err(Error::BidCountMismatch {
                expected: setup.len() - 1,
                got: profile.bids.len(),
            });
        }
        let mut bids = profile.with_own_bid(index, value);
        let truthful = utility_at(setup, &bids, index, value);
        for &bid in deviations {
            bids[index] = bid;
            let violation = utility_at(setup, &bids, index, value) - truthful;
            if violation > max_violation {
                max_violation = violation;
                worst_bid = Some(bid);
            }
        }
    }
    if max_violation == f64::NEG_INFINITY {
        max_violation = 0.0;
    }
    Ok(DominanceReport {
        advertiser: id,
        profiles_tested: opponent_profiles.len(),
        deviations_tested: opponent_profiles.len() * deviations.len(),
        max_violation,
        worst_bid,
        passed: max_violation <= IDENTITY_TOLERANCE,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Deviation {
    pub advertiser: AdvertiserId,
    pub bid: f64,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NashCheck {
    pub is_equilibrium: bool,
    /// Most profitable single-player grid deviation, if any was tried.
    pub worst: Option<Deviation>,
}

/// No advertiser can gain more than the identity tolerance by moving
/// alone to another bid on its grid.
pub fn check_nash(setup: &AuctionSetup, profile: &BidProfile, grid: &BidGrid) -> Result<NashCheck> {
    if profile.bids().len() != setup.len() {
        return Err(Error::BidCountMismatch {
            expected: setup.len(),
            got: profile.bids().len(),
        });
    }
    let mut worst: Option<Deviation> = None;
    let mut bids = profile.bids().to_vec();
    for (index, adv) in setup.advertisers().iter().enumerate() {
        let current = utility_at(setup, &bids, index, adv.value);
        let posted = bids[index];
        for &bid in grid.for_index(index) {
            bids[index] = bid;
            let gain = utility_at(setup, &bids, index, adv.value) - current;
            if worst.is_none_or(|w| gain > w.gain) {
                worst = Some(Deviation {
                    advertiser: adv.id,
                    bid,
                    gain,
                });
            }
        }
        bids[index] = posted;
    }
    Ok(NashCheck {
        is_equilibrium: worst.is_none_or(|w| w.gain <= IDENTITY_TOLERANCE),
        worst,
    })
}

/// `U_winner - (SW_winner - SW_second)` for the truthful auction; zero up to
/// rounding when truthful bidding yields a VCG outcome.
pub fn vcg_surplus_identity(setup: &AuctionSetup) -> Result<f64> {
    let outcome = run_auction(setup, &BidProfile::truthful(setup))?;
    Ok(outcome.winner_outcome().utility - outcome.social_welfare_gap())
}
