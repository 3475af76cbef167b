//! The checks behind `sqa verify`.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::auction::{platform_value, run_auction, BidProfile, IDENTITY_TOLERANCE};
use crate::game_analysis::{
    check_nash, check_truthful_dominance, epsilon_sweep, oracle_winner_bruteforce, random_opponent_profiles,
    vcg_surplus_identity, verify_prop2, verify_prop3, BidGrid, Proposition, RawScenario,
};
use crate::scenario_io::{write_report, write_sweep_csv, BidSpec, ScenarioFile};
use crate::similarity::cross_entropy;
use crate::text_lm::NORMALIZATION_TOLERANCE;
use crate::Result;

/// Reference margins of the two constructions at e = 0.01, from exact
/// cross-entropy evaluation outside this crate.
pub mod reference {
    pub const PROP2_SHIFT_A: f64 = 9.118437974973;
    pub const PROP2_VALUE_GAP: f64 = 2.643797171295;
    pub const PROP2_PV_GAP: f64 = 5.617998674794;
    /// `2A - payment`.
    pub const PROP2_PAYMENT_OFFSET: f64 = 8.421848948430;
    pub const PROP3_UTILITY_GAP: f64 = 1.326845062632;
    pub const PROP3_PV_GAP: f64 = 5.546815766884;
    /// Acceptance tolerance on margins, in nats.
    pub const MARGIN_TOLERANCE: f64 = 1e-3;
    pub const SHIFT_TOLERANCE: f64 = 1e-4;
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub seed: u64,
    pub scenarios: usize,
    pub dominance_scenarios: usize,
    pub opponent_profiles: usize,
    pub grid_points: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: 42,
            scenarios: 1000,
            dominance_scenarios: 200,
            opponent_profiles: 50,
            grid_points: 101,
        }
    }
}

#[derive(Debug, Clone)]
pub struct VerifyCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Generator for random scenario `k`: one ChaCha stream per scenario so
/// scenarios can be built in any order.
pub fn scenario_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream offset separating the dominance scenarios from the others.
const DOMINANCE_STREAM: u64 = 1 << 40;

pub fn random_scenarios(seed: u64, count: usize, stream_offset: u64) -> Vec<RawScenario> {
    (0..count as u64)
        .into_par_iter()
        .map(|k| RawScenario::random(&mut scenario_rng(seed, stream_offset + k)))
        .collect()
}

fn fold_max(values: impl ParallelIterator<Item = Result<f64>>) -> Result<f64> {
    values.try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

fn timed(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> VerifyCheck {
    let start = Instant::now();
    let (passed, detail) = match f() {
        Ok(result) => result,
        Err(e) => (false, format!("error: {e}")),
    };
    VerifyCheck {
        name,
        passed,
        detail: format!("{detail} [{:.2}s]", start.elapsed().as_secs_f64()),
    }
}

pub fn run_verification(opts: &VerifyOptions) -> Vec<VerifyCheck> {
    let scenarios = random_scenarios(opts.seed, opts.scenarios, 0);
    let dominance = random_scenarios(opts.seed, opts.dominance_scenarios, DOMINANCE_STREAM);
    vec![
        timed("payment identity", || payment_identity(&scenarios)),
        timed("vcg surplus", || vcg_surplus(&scenarios)),
        timed("truthful dominance", || truthful_dominance(&dominance, opts)),
        timed("truthful equilibrium", || truthful_equilibrium(&dominance, opts)),
        timed("value counterexample", || reproduction(Proposition::Prop2)),
        timed("utility counterexample", || reproduction(Proposition::Prop3)),
        timed("oracle equivalence", || oracle_equivalence(&scenarios)),
        timed("model invariants", || model_invariants(&scenarios)),
        timed("output determinism", output_determinism),
    ]
}

fn payment_identity(scenarios: &[RawScenario]) -> Result<(bool, String)> {
    let worst = fold_max(scenarios.par_iter().map(|raw| {
        let (setup, bids) = raw.to_setup()?;
        let out = run_auction(&setup, &bids)?;
        let (w, s) = (out.winner_outcome(), out.second_outcome());
        let identity = (platform_value(w.user_utility, out.payment) - s.platform_value).abs();
        let over_bid = (out.payment - w.bid).max(0.0);
        Ok(identity.max(over_bid))
    }))?;
    Ok((
        worst <= IDENTITY_TOLERANCE,
        format!("{} scenarios, max residual {worst:.3e}", scenarios.len()),
    ))
}

fn vcg_surplus(scenarios: &[RawScenario]) -> Result<(bool, String)> {
    let worst = fold_max(scenarios.par_iter().map(|raw| {
        let (setup, bids) = raw.truthful().to_setup()?;
        let residual = vcg_surplus_identity(&setup)?.abs();
        let out = run_auction(&setup, &bids)?;
        let negative = (-out.winner_outcome().utility).max(0.0);
        Ok(residual.max(negative))
    }))?;
    Ok((
        worst <= IDENTITY_TOLERANCE,
        format!("{} scenarios, max residual {worst:.3e}", scenarios.len()),
    ))
}

fn truthful_dominance(scenarios: &[RawScenario], opts: &VerifyOptions) -> Result<(bool, String)> {
    let results = scenarios
        .par_iter()
        .enumerate()
        .map(|(k, raw)| {
            let (setup, _) = raw.to_setup()?;
            let grid = BidGrid::spanning(&setup, opts.grid_points)?;
            let mut rng = scenario_rng(opts.seed ^ 0x5eed, k as u64);
            let mut worst = f64::NEG_INFINITY;
            let mut deviations = 0;
            for (index, adv) in setup.advertisers().iter().enumerate() {
                let profiles = random_opponent_profiles(&setup, index, opts.opponent_profiles, &mut rng);
                let report = check_truthful_dominance(&setup, adv.id, &grid, &profiles)?;
                worst = worst.max(report.max_violation);
                deviations += report.deviations_tested;
            }
            Ok((worst, deviations))
        })
        .collect::<Result<Vec<_>>>()?;
    let worst = results.iter().map(|r| r.0).fold(0.0, f64::max);
    let deviations: usize = results.iter().map(|r| r.1).sum();
    Ok((
        worst <= IDENTITY_TOLERANCE,
        format!(
            "{} scenarios, {deviations} deviations, max gain over truthful {worst:.3e}",
            scenarios.len()
        ),
    ))
}

fn truthful_equilibrium(scenarios: &[RawScenario], opts: &VerifyOptions) -> Result<(bool, String)> {
    let failures = scenarios
        .par_iter()
        .map(|raw| {
            let (setup, _) = raw.to_setup()?;
            let grid = BidGrid::spanning(&setup, opts.grid_points)?;
            Ok(!check_nash(&setup, &BidProfile::truthful(&setup), &grid)?.is_equilibrium as usize)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok((
        failures == 0,
        format!("{} scenarios, {failures} truthful profiles with a profitable deviation", scenarios.len()),
    ))
}

fn reproduction(which: Proposition) -> Result<(bool, String)> {
    use reference::*;
    let verify = match which {
        Proposition::Prop2 => verify_prop2,
        Proposition::Prop3 => verify_prop3,
    };
    let mut passed = true;
    for eps in [0.001, 0.01, 0.05] {
        passed &= verify(eps)?.holds();
    }
    let at = verify(0.01)?;
    let near = |x: f64, y: f64, tol: f64| (x - y).abs() <= tol;
    let detail = match which {
        Proposition::Prop2 => {
            passed &= near(at.value_gap, PROP2_VALUE_GAP, MARGIN_TOLERANCE)
                && near(at.pv_gap, PROP2_PV_GAP, MARGIN_TOLERANCE)
                && near(at.shift_a, PROP2_SHIFT_A, SHIFT_TOLERANCE)
                && near(2.0 * at.shift_a - at.payment, PROP2_PAYMENT_OFFSET, MARGIN_TOLERANCE);
            format!(
                "eps=0.01: v1-v2={:.4} PV2-PV1={:.4} A={:.5} payment=2A-{:.4}",
                at.value_gap,
                at.pv_gap,
                at.shift_a,
                2.0 * at.shift_a - at.payment
            )
        }
        Proposition::Prop3 => {
            passed &= near(at.utility_gap, PROP3_UTILITY_GAP, MARGIN_TOLERANCE)
                && near(at.pv_gap, PROP3_PV_GAP, MARGIN_TOLERANCE);
            format!("eps=0.01: U1-U2={:.4} PV2-PV1={:.4}", at.utility_gap, at.pv_gap)
        }
    };
    Ok((passed, detail))
}

fn oracle_equivalence(scenarios: &[RawScenario]) -> Result<(bool, String)> {
    let results = scenarios
        .par_iter()
        .map(|raw| {
            let (setup, bids) = raw.to_setup()?;
            let main = run_auction(&setup, &bids)?;
            let oracle = oracle_winner_bruteforce(raw)?;
            Ok((main.winner.0 != oracle.winner, (main.payment - oracle.payment).abs()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mismatches = results.iter().filter(|r| r.0).count();
    let worst = results.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok((
        mismatches == 0 && worst <= IDENTITY_TOLERANCE,
        format!(
            "{} scenarios, {mismatches} winner mismatches, max payment difference {worst:.3e}",
            scenarios.len()
        ),
    ))
}

fn model_invariants(scenarios: &[RawScenario]) -> Result<(bool, String)> {
    let violations = scenarios
        .par_iter()
        .map(|raw| {
            let (setup, _) = raw.to_setup()?;
            let mut bad = 0usize;
            let mut models = vec![setup.organic_model()];
            for adv in setup.advertisers() {
                models.push(&adv.ad_model);
                models.push(&adv.sponsored_model);
                bad += (adv.value < 0.0 || adv.user_utility < 0.0) as usize;
            }
            for m in &models {
                bad += ((m.probs().iter().sum::<f64>() - 1.0).abs() > NORMALIZATION_TOLERANCE) as usize;
                let self_ce = cross_entropy(m, m)?.value();
                for other in &models {
                    bad += (cross_entropy(m, other)?.value() < self_ce - 1e-12) as usize;
                }
            }
            Ok(bad)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok((
        violations == 0,
        format!("{} scenarios, {violations} violations", scenarios.len()),
    ))
}

/// Bytes of the value-counterexample report and the utility sweep CSV.
pub fn golden_outputs() -> Result<(String, String)> {
    let scenario = crate::game_analysis::build_prop2_scenario(0.01)?;
    let file = ScenarioFile::from_setup("value counterexample", &scenario.setup, vec![BidSpec::Truthful; 2]);
    let parsed = crate::scenario_io::parse_scenario(&file.to_json())?;
    let report = write_report(&super::scenario_report(&parsed)?);
    let sweep = epsilon_sweep(Proposition::Prop3, 0.01, 0.49, 97)?;
    Ok((report, write_sweep_csv(&sweep.rows)))
}

fn output_determinism() -> Result<(bool, String)> {
    let first = golden_outputs()?;
    let second = golden_outputs()?;
    Ok((
        first == second,
        format!("report {} bytes, sweep csv {} bytes", first.0.len(), first.1.len()),
    ))
}
