#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use sqa_core::text_lm::{UnigramModel, Vocabulary};

pub fn model(probs: &[f64]) -> UnigramModel {
    let vocab = Arc::new(Vocabulary::new((0..probs.len()).map(|i| format!("t{i}"))).unwrap());
    UnigramModel::new(vocab, probs.to_vec()).unwrap()
}

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

/// Closed-form evaluation of the two-token counterexamples, written out
/// scalar by scalar with no crate code involved.
#[derive(Debug, Clone, Copy)]
pub struct TwoTokenOracle {
    pub shift_a: f64,
    pub v1: f64,
    pub v2: f64,
    pub u1: f64,
    pub u2: f64,
}

impl TwoTokenOracle {
    pub fn new(eps: f64, lambda_1: f64, lambda_2: f64) -> Self {
        let ce = |p: (f64, f64), q: (f64, f64)| {
            let term = |x: f64, y: f64| if x == 0.0 { 0.0 } else { -x * y.ln() };
            term(p.0, q.0) + term(p.1, q.1)
        };
        let organic = (1.0 - eps, eps);
        let ad_1 = (eps, 1.0 - eps);
        let ad_2 = (0.5, 0.5);
        let base = [organic, ad_1, ad_2];
        let mut shift_a = 0.0f64;
        for x in base {
            for y in base {
                shift_a = shift_a.max(ce(x, y) + ce(y, x));
            }
        }
        let fuse = |l: f64, ad: (f64, f64)| (l * organic.0 + (1.0 - l) * ad.0, l * organic.1 + (1.0 - l) * ad.1);
        let s1 = fuse(lambda_1, ad_1);
        let s2 = fuse(lambda_2, ad_2);
        let sim = |x, y| 2.0 * shift_a - ce(x, y) - ce(y, x);
        TwoTokenOracle {
            shift_a,
            v1: sim(s1, ad_1),
            v2: sim(s2, ad_2),
            u1: sim(s1, organic),
            u2: sim(s2, organic),
        }
    }

    pub fn prop2(eps: f64) -> Self {
        Self::new(eps, eps, 1.0 - eps)
    }

    pub fn prop3(eps: f64) -> Self {
        Self::new(eps, 1.0 - eps, 0.5)
    }

    pub fn pv_gap(&self) -> f64 {
        (self.u2 + self.v2) - (self.u1 + self.v1)
    }

    /// Payment of advertiser 2 when it wins against truthful advertiser 1.
    pub fn payment_of_2(&self) -> f64 {
        self.v1 + self.u1 - self.u2
    }
}
