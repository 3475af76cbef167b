//! Two-advertiser, two-token constructions showing that the truthful winner
//! need not have the highest value, nor give the user the highest utility.
//!
//! Organic answer `(1-e, e)`, ad 1 `(e, 1-e)`, ad 2 `(1/2, 1/2)` over tokens
//! `a, b`. The value construction fuses with weights `(e, 1-e)`; the utility
//! construction with `(1-e, 1/2)`. Everything here is evaluated exactly,
//! without small-`e` approximations.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::auction::{run_auction, AdvertiserId, AdvertiserInput, AuctionSetup, BidProfile};
use crate::error::{Error, Result};
use crate::text_lm::{Document, FusionWeight, SmoothingConfig, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Proposition {
    /// The winner's value is not the largest.
    Prop2,
    /// The winner's sponsored answer is not the best for the user.
    Prop3,
}

impl Proposition {
    fn lambdas(self, eps: f64) -> (f64, f64) {
        match self {
            Proposition::Prop2 => (eps, 1.0 - eps),
            Proposition::Prop3 => (1.0 - eps, 0.5),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CounterexampleScenario {
    pub which: Proposition,
    pub epsilon: f64,
    pub setup: AuctionSetup,
}

fn check_epsilon(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 0.5 {
        Ok(())
    } else {
        Err(Error::EpsilonOutOfRange(eps))
    }
}

fn build(which: Proposition, eps: f64) -> Result<CounterexampleScenario> {
    check_epsilon(eps)?;
    let vocab = Arc::new(Vocabulary::new(["a", "b"])?);
    let doc = |a: f64, b: f64| Document::from_counts(Arc::clone(&vocab), vec![a, b]);
    let (lambda_1, lambda_2) = which.lambdas(eps);
    let inputs = vec![
        AdvertiserInput {
            id: AdvertiserId(1),
            ad: doc(eps, 1.0 - eps)?,
            lambda: FusionWeight::new(lambda_1)?,
        },
        AdvertiserInput {
            id: AdvertiserId(2),
            ad: doc(0.5, 0.5)?,
            lambda: FusionWeight::new(lambda_2)?,
        },
    ];
    let setup = AuctionSetup::new(None, doc(1.0 - eps, eps)?, inputs, SmoothingConfig::NONE)?;
    Ok(CounterexampleScenario {
        which,
        epsilon: eps,
        setup,
    })
}

pub fn build_prop2_scenario(epsilon: f64) -> Result<CounterexampleScenario> {
    build(Proposition::Prop2, epsilon)
}

pub fn build_prop3_scenario(epsilon: f64) -> Result<CounterexampleScenario> {
    build(Proposition::Prop3, epsilon)
}

/// Exact margins of a construction under truthful bids.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropositionCheck {
    pub which: Proposition,
    pub epsilon: f64,
    /// `v_1 > v_2` for the value construction, `U_1 > U_2` for the utility one.
    pub inequality_holds: bool,
    pub winner_is_2: bool,
    pub value_gap: f64,
    pub utility_gap: f64,
    pub pv_gap: f64,
    pub winner: AdvertiserId,
    pub payment: f64,
    pub shift_a: f64,
}

impl PropositionCheck {
    pub fn holds(&self) -> bool {
        self.inequality_holds && self.winner_is_2
    }

    /// Margin of the construction's own inequality.
    pub fn inequality_margin(&self) -> f64 {
        match self.which {
            Proposition::Prop2 => self.value_gap,
            Proposition::Prop3 => self.utility_gap,
        }
    }
}

fn verify(which: Proposition, eps: f64) -> Result<PropositionCheck> {
    let scenario = build(which, eps)?;
    let setup = &scenario.setup;
    let outcome = run_auction(setup, &BidProfile::truthful(setup))?;
    let (one, two) = (&setup.advertisers()[0], &setup.advertisers()[1]);
    let value_gap = one.value - two.value;
    let utility_gap = one.user_utility - two.user_utility;
    let pv_gap = (two.user_utility + two.value) - (one.user_utility + one.value);
    let inequality_holds = match which {
        Proposition::Prop2 => value_gap > 0.0,
        Proposition::Prop3 => utility_gap > 0.0,
    };
    Ok(PropositionCheck {
        which,
        epsilon: eps,
        inequality_holds,
        winner_is_2: outcome.winner == AdvertiserId(2),
        value_gap,
        utility_gap,
        pv_gap,
        winner: outcome.winner,
        payment: outcome.payment,
        shift_a: setup.shift_a(),
    })
}

pub fn verify_prop2(epsilon: f64) -> Result<PropositionCheck> {
    verify(Proposition::Prop2, epsilon)
}

pub fn verify_prop3(epsilon: f64) -> Result<PropositionCheck> {
    verify(Proposition::Prop3, epsilon)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub value_gap: f64,
    pub utility_gap: f64,
    pub pv_gap: f64,
    pub winner: AdvertiserId,
    pub payment: f64,
}

/// First swept epsilon at which each condition changes truth value.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct SweepFlips {
    /// `v_1 > v_2`.
    pub value_inequality: Option<f64>,
    /// `U_1 > U_2`.
    pub utility_inequality: Option<f64>,
    /// Truthful winner is advertiser 2.
    pub winner: Option<f64>,
    /// The construction's inequality and the winner condition together.
    pub proposition: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub which: Proposition,
    pub rows: Vec<SweepRow>,
    pub flips: SweepFlips,
}

fn first_flip(rows: &[SweepRow], condition: impl Fn(&SweepRow) -> bool) -> Option<f64> {
    let start = condition(rows.first()?);
    rows.iter().find(|r| condition(r) != start).map(|r| r.epsilon)
}

/// Exact evaluation at `steps` evenly spaced epsilons from `eps_start` to
/// `eps_end` inclusive. Rows are computed in parallel and returned in order.
pub fn epsilon_sweep(which: Proposition, eps_start: f64, eps_end: f64, steps: usize) -> Result<Sweep> {
    if !(eps_start > 0.0 && eps_start < eps_end && eps_end < 0.5) {
        return Err(Error::InvalidSweep(format!(
            "need 0 < eps_start < eps_end < 0.5, got [{eps_start}, {eps_end}]"
        )));
    }
    if steps < 2 {
        return Err(Error::InvalidSweep(format!("need at least 2 steps, got {steps}")));
    }
    let rows = (0..steps)
        .into_par_iter()
        .map(|k| {
            let eps = eps_start + (eps_end - eps_start) * k as f64 / (steps - 1) as f64;
            let check = verify(which, eps)?;
            Ok(SweepRow {
                epsilon: eps,
                value_gap: check.value_gap,
                utility_gap: check.utility_gap,
                pv_gap: check.pv_gap,
                winner: check.winner,
                payment: check.payment,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let own_inequality = |r: &SweepRow| match which {
        Proposition::Prop2 => r.value_gap > 0.0,
        Proposition::Prop3 => r.utility_gap > 0.0,
    };
    let winner_is_2 = |r: &SweepRow| r.winner == AdvertiserId(2);
    let flips = SweepFlips {
        value_inequality: first_flip(&rows, |r| r.value_gap > 0.0),
        utility_inequality: first_flip(&rows, |r| r.utility_gap > 0.0),
        winner: first_flip(&rows, winner_is_2),
        proposition: first_flip(&rows, |r| own_inequality(r) && winner_is_2(r)),
    };
    Ok(Sweep { which, rows, flips })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn prop2_sponsored_models() {
        let s = build_prop2_scenario(0.01).unwrap().setup;
        let p1 = s.advertisers()[0].sponsored_model.probs();
        let p2 = s.advertisers()[1].sponsored_model.probs();
        assert!(close(p1[0], 0.0198, 1e-15) && close(p1[1], 0.9802, 1e-15));
        assert!(close(p2[0], 0.9851, 1e-15) && close(p2[1], 0.0149, 1e-15));

        let s = build_prop2_scenario(0.25).unwrap().setup;
        assert!(close(s.advertisers()[0].sponsored_model.prob(0), 0.375, 1e-15));
    }

    #[test]
    fn prop2_small_epsilon_limits() {
        let s = build_prop2_scenario(1e-9).unwrap().setup;
        let d1 = s.advertisers()[0].ad_model.probs();
        let p1 = s.advertisers()[0].sponsored_model.probs();
        let p2 = s.advertisers()[1].sponsored_model.probs();
        let o = s.organic_model().probs();
        for t in 0..2 {
            assert!(close(p1[t], d1[t], 1e-8));
            assert!(close(p2[t], o[t], 1e-8));
        }
    }

    #[test]
    fn prop3_sponsored_models() {
        let s = build_prop3_scenario(0.01).unwrap().setup;
        let p1 = s.advertisers()[0].sponsored_model.probs();
        let p2 = s.advertisers()[1].sponsored_model.probs();
        assert!(close(p1[0], 0.9802, 1e-15) && close(p1[1], 0.0198, 1e-15));
        assert!(close(p2[0], 0.745, 1e-15) && close(p2[1], 0.255, 1e-15));

        let s = build_prop3_scenario(1e-9).unwrap().setup;
        assert!(close(s.advertisers()[0].sponsored_model.prob(0), s.organic_model().prob(0), 1e-8));
    }

    #[test]
    fn epsilon_range() {
        for eps in [0.0, 0.5, -0.1, 0.7, f64::NAN] {
            assert!(build_prop2_scenario(eps).is_err());
            assert!(build_prop3_scenario(eps).is_err());
        }
    }

    #[test]
    fn prop3_far_from_zero() {
        // The winner condition keeps holding at large epsilon; it is the
        // utility inequality that fails once the two sponsored answers
        // swap order at e = 1/4.
        let check = verify_prop3(0.45).unwrap();
        assert!(check.winner_is_2);
        assert!(!check.inequality_holds);
    }

    #[test]
    fn sweep_shape_and_validation() {
        let sweep = epsilon_sweep(Proposition::Prop2, 0.01, 0.05, 2).unwrap();
        assert_eq!(sweep.rows.len(), 2);
        assert_eq!(sweep.rows[0].epsilon, 0.01);
        assert_eq!(sweep.rows[1].epsilon, 0.05);
        assert!(sweep.rows.iter().all(|r| r.winner == AdvertiserId(2)));

        assert!(epsilon_sweep(Proposition::Prop2, 0.01, 0.5, 5).is_err());
        assert!(epsilon_sweep(Proposition::Prop2, 0.2, 0.1, 5).is_err());
        assert!(epsilon_sweep(Proposition::Prop2, 0.01, 0.2, 1).is_err());
    }

    #[test]
    fn sweep_matches_pointwise_verification() {
        let sweep = epsilon_sweep(Proposition::Prop3, 0.01, 0.49, 97).unwrap();
        assert_eq!(sweep.rows.len(), 97);
        for row in sweep.rows.iter().step_by(12) {
            let check = verify_prop3(row.epsilon).unwrap();
            assert_eq!(row.pv_gap, check.pv_gap);
            assert_eq!(row.utility_gap, check.utility_gap);
        }
    }
}
