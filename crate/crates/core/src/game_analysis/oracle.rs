//! Independent re-derivation of the auction outcome from raw counts.
//!
//! Shares nothing with the language-model, similarity or auction modules:
//! every quantity is recomputed with plain loops, and the payment is found
//! as the winner's critical bid (the largest competing platform value minus
//! the winner's user utility) rather than through the runner-up.

use super::scenarios::{RawBid, RawScenario};
use crate::auction::TIE_TOLERANCE;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOutcome {
    pub winner: u32,
    pub payment: f64,
    pub shift_a: f64,
}

fn normalized(counts: &[f64], mu: f64) -> Vec<f64> {
    let total: f64 = counts.iter().sum();
    let k = counts.len() as f64;
    counts.iter().map(|c| (1.0 - mu) * c / total + mu / k).collect()
}

fn ce(p: &[f64], q: &[f64]) -> Option<f64> {
    let mut total = 0.0;
    for t in 0..p.len() {
        if p[t] > 0.0 {
            if q[t] <= 0.0 {
                return None;
            }
            total += -p[t] * q[t].ln();
        }
    }
    Some(total)
}

fn symmetric(p: &[f64], q: &[f64], lp: &str, lq: &str) -> Result<f64> {
    let infinite = |l: &str, r: &str| Error::InfiniteCrossEntropy {
        left: l.to_string(),
        right: r.to_string(),
    };
    let forward = ce(p, q).ok_or_else(|| infinite(lp, lq))?;
    let backward = ce(q, p).ok_or_else(|| infinite(lq, lp))?;
    Ok(forward + backward)
}

pub fn oracle_winner_bruteforce(raw: &RawScenario) -> Result<OracleOutcome> {
    let n = raw.ads.len();
    if n < 2 {
        return Err(Error::TooFewAdvertisers(n));
    }
    let mu = raw.smoothing_mu;
    let organic = normalized(&raw.organic, mu);
    let ads: Vec<Vec<f64>> = raw.ads.iter().map(|a| normalized(&a.counts, mu)).collect();

    let mut base = vec![("organic answer".to_string(), organic.clone())];
    base.extend(raw.ads.iter().zip(&ads).map(|(a, p)| (format!("ad {}", a.id), p.clone())));
    let mut shift_a = 0.0f64;
    for (l1, p1) in &base {
        for (l2, p2) in &base {
            shift_a = shift_a.max(symmetric(p1, p2, l1, l2)?);
        }
    }

    let mut utility = Vec::with_capacity(n);
    let mut platform = Vec::with_capacity(n);
    for (ad, p_ad) in raw.ads.iter().zip(&ads) {
        let sponsored: Vec<f64> = organic
            .iter()
            .zip(p_ad)
            .map(|(o, a)| ad.lambda * o + (1.0 - ad.lambda) * a)
            .collect();
        let label = format!("sponsored answer {}", ad.id);
        let value = 2.0 * shift_a - symmetric(&sponsored, p_ad, &label, &format!("ad {}", ad.id))?;
        let u = 2.0 * shift_a - symmetric(&sponsored, &organic, &label, "organic answer")?;
        let bid = match ad.bid {
            RawBid::Truthful => value,
            RawBid::Fixed(b) => b,
        };
        utility.push(u);
        platform.push(u + bid);
    }

    let top = platform.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let winner = (0..n)
        .filter(|&j| platform[j] >= top - TIE_TOLERANCE)
        .min_by_key(|&j| raw.ads[j].id)
        .expect("the maximum is attained");
    let strongest_rival = (0..n)
        .filter(|&j| j != winner)
        .map(|j| platform[j])
        .fold(f64::NEG_INFINITY, f64::max);

    Ok(OracleOutcome {
        winner: raw.ads[winner].id,
        payment: strongest_rival - utility[winner],
        shift_a,
    })
}
