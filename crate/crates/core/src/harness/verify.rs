//! Randomized cross-checks of the planner and scheduler against the oracles.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::sweep::thread_pool;
use crate::delay::{min_transfer_delay, DelayOptions, HandoverProblem};
use crate::error::Result;
use crate::model::{BackhaulLink, Instance, PrefillProfile, UeContext};
use crate::oracle::{exhaustive_joint_optimum, oracle_transfer_delay, OracleConfig};
use crate::scenario::derive_seed;
use crate::scheduler::{build_schedule, verify_schedule};

/// A random planning problem. Trigger spreads and context ranges are drawn
/// from several regimes so that both starved and saturated links occur.
#[derive(Debug, Clone)]
pub struct RandomCase {
    pub instance: Instance,
    pub link: BackhaulLink,
    pub profile: PrefillProfile,
}

pub fn random_case(k: usize, seed: u64) -> Result<RandomCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spread = [0.0, 0.05, 0.5, 2.0][rng.gen_range(0..4)];
    let (c_lo, c_hi) = [(0u64, 500u64), (1024, 3072), (0, 8192)][rng.gen_range(0..3)];
    let ues = (0..k)
        .map(|id| UeContext::new(id, 1.0 + rng.gen::<f64>() * spread, rng.gen_range(c_lo..=c_hi)))
        .collect::<Result<Vec<_>>>()?;
    let instance = Instance::new(ues)?;
    let total: f64 = instance.ues().iter().map(|u| u.c()).sum();
    // between 0.2 s and 3 s of link work for the whole instance
    let rate = (total / rng.gen_range(0.2..3.0)).max(100.0);
    let link = BackhaulLink::with_token_rate(rate)?;
    let profile = PrefillProfile::new(rng.gen_range(0.0..3e-4), rng.gen_range(0.0..5e-3), 0.01)?;
    Ok(RandomCase { instance, link, profile })
}

/// Prefill length drawn uniformly on `[0, C_max]`, with the end points
/// over-represented.
pub fn random_length(instance: &Instance, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c_max = instance.c_max() as f64;
    match rng.gen_range(0..10) {
        0 => 0.0,
        1 => c_max,
        _ => rng.gen::<f64>() * c_max,
    }
}

/// A micro instance on the exhaustive-search grid: `R = 200` tokens/s and
/// `dt = 0.01` s, so one rate quantum moves one token per step.
pub fn random_micro_case(k: usize, seed: u64) -> Result<RandomCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ues = (0..k)
        .map(|id| UeContext::new(id, 1.0 + f64::from(rng.gen_range(0u32..=5)) * MICRO_DT, rng.gen_range(0u64..=8)))
        .collect::<Result<Vec<_>>>()?;
    Ok(RandomCase {
        instance: Instance::new(ues)?,
        link: BackhaulLink::with_token_rate(MICRO_RATE)?,
        profile: PrefillProfile::new(rng.gen_range(0.0..0.01), rng.gen_range(0.0..0.02), MICRO_DT)?,
    })
}

pub const MICRO_RATE: f64 = 200.0;
pub const MICRO_DT: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub instances: usize,
    /// Largest observed discrepancy (or violation count), in the check's unit.
    pub worst: f64,
    pub bound: f64,
    pub passed: bool,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: worst {:.3e} (bound {:.3e}) over {} instances",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.worst,
            self.bound,
            self.instances
        )
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        write!(f, "{}", if self.passed() { "all checks passed" } else { "verification FAILED" })
    }
}

fn max_over<F>(n: usize, f: F) -> Result<f64>
where
    F: Fn(u64) -> Result<f64> + Send + Sync,
{
    (0..n as u64)
        .into_par_iter()
        .map(f)
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

/// `|closed form - discrete-time simulation|` for one random case.
pub fn transfer_discrepancy(k: usize, seed: u64, cfg: &OracleConfig) -> Result<f64> {
    let case = random_case(k, seed)?;
    let l = random_length(&case.instance, seed ^ 1);
    let closed = min_transfer_delay(&case.instance, &case.link, l)?;
    let sim = oracle_transfer_delay(&case.instance, &case.link, l, cfg)?;
    // the simulation can only be late; an early oracle is a hard failure
    if sim < closed - 1e-9 {
        return Ok(f64::INFINITY);
    }
    Ok((sim - closed).abs())
}

/// Violations plus `|max_i (T_i - τ_i) - D*|` for one random case; any
/// verifier violation maps to infinity.
pub fn schedule_discrepancy(k: usize, seed: u64) -> Result<f64> {
    let case = random_case(k, seed)?;
    let l = random_length(&case.instance, seed ^ 2);
    let schedule = build_schedule(&case.instance, &case.link, l)?;
    if !verify_schedule(&schedule, &case.instance, &case.link, l)?.is_ok() {
        return Ok(f64::INFINITY);
    }
    let d_star = min_transfer_delay(&case.instance, &case.link, l)?;
    let worst = case
        .instance
        .ues()
        .iter()
        .zip(&schedule.completion)
        .map(|(u, t)| t - u.tau)
        .fold(0.0, f64::max);
    Ok((worst - d_star).abs())
}

/// How far `V(L*)` exceeds the best of a `points`-point grid, and the
/// equalization gap at an interior `L*`. Both must be `≤ 1e-9`.
pub fn optimality_gaps(k: usize, seed: u64, points: usize, options: DelayOptions) -> Result<(f64, f64)> {
    let case = random_case(k, seed)?;
    let problem = HandoverProblem::new(&case.instance, &case.link, &case.profile).with_options(options);
    let plan = problem.optimal_prefill_length()?;
    let c_max = problem.c_max();
    let step = c_max / (points - 1) as f64;
    let mut grid_min = f64::INFINITY;
    for n in 0..points {
        let l = if n + 1 == points { c_max } else { n as f64 * step };
        grid_min = grid_min.min(problem.value_function(l)?.v);
    }
    let excess = plan.breakdown.v - grid_min;
    let interior = plan.l_star > 0.0 && plan.l_star < c_max;
    let gap = if interior {
        (plan.breakdown.d_prefill - plan.breakdown.d_transfer).abs()
    } else {
        0.0
    };
    Ok((excess, gap))
}

/// `V(L*) - joint brute force` for a micro instance: never positive beyond
/// rounding since no quantized schedule beats the closed form.
pub fn joint_optimality_gap(k: usize, seed: u64, options: DelayOptions) -> Result<(f64, f64)> {
    let case = random_micro_case(k, seed)?;
    let problem = HandoverProblem::new(&case.instance, &case.link, &case.profile).with_options(options);
    let v_star = problem.optimal_prefill_length()?.breakdown.v;
    let (_, brute) = exhaustive_joint_optimum(&case.instance, &case.link, &case.profile, options, MICRO_DT, 1.0)?;
    Ok((v_star - brute, brute - v_star))
}

/// Runs every oracle check with `trials` random cases per UE count.
pub fn run_verify(trials: usize, base_seed: u64, threads: usize, options: DelayOptions) -> Result<VerifyReport> {
    let pool = thread_pool(threads)?;
    pool.install(|| verify_all(trials, base_seed, options))
}

fn verify_all(trials: usize, base_seed: u64, options: DelayOptions) -> Result<VerifyReport> {
    let oracle = OracleConfig::default();
    let mut checks = Vec::new();
    for k in [1usize, 2, 4, 8] {
        let seed = |n: u64| derive_seed(base_seed, (k as u64) << 32 | n);

        let bound = 2.0 * oracle.dt + 1e-12;
        let worst = max_over(trials, |n| transfer_discrepancy(k, seed(n), &oracle))?;
        checks.push(CheckResult {
            name: format!("transfer delay vs discrete-time simulation, K={k}"),
            instances: trials,
            worst,
            bound,
            passed: worst <= bound,
        });

        let worst = max_over(trials, |n| schedule_discrepancy(k, seed(n)))?;
        checks.push(CheckResult {
            name: format!("schedule feasibility and tightness, K={k}"),
            instances: trials,
            worst,
            bound: 1e-9,
            passed: worst <= 1e-9,
        });

        let (excess, gap) = (0..trials as u64)
            .into_par_iter()
            .map(|n| optimality_gaps(k, seed(n), 10_000, options))
            .try_reduce(|| (f64::NEG_INFINITY, 0.0), |a, b| Ok((a.0.max(b.0), a.1.max(b.1))))?;
        checks.push(CheckResult {
            name: format!("optimal L vs 10^4-point grid, K={k}"),
            instances: trials,
            worst: excess,
            bound: 1e-9,
            passed: excess <= 1e-9,
        });
        checks.push(CheckResult {
            name: format!("equalization at interior L*, K={k}"),
            instances: trials,
            worst: gap,
            bound: 1e-9,
            passed: gap <= 1e-9,
        });
    }
    for k in [1usize, 2, 3] {
        let seed = |n: u64| derive_seed(base_seed ^ 0xA5A5, (k as u64) << 32 | n);
        let (below, _) = (0..trials as u64)
            .into_par_iter()
            .map(|n| joint_optimality_gap(k, seed(n), options))
            .try_reduce(|| (f64::NEG_INFINITY, f64::NEG_INFINITY), |a, b| Ok((a.0.max(b.0), a.1.max(b.1))))?;
        checks.push(CheckResult {
            name: format!("exhaustive joint search never beats V(L*), K={k}"),
            instances: trials,
            worst: below,
            bound: 1e-9,
            passed: below <= 1e-9,
        });
    }
    Ok(VerifyReport { checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_verify_passes() {
        let report = run_verify(20, 3, 0, DelayOptions::default()).unwrap();
        assert!(report.passed(), "{report}");
        assert!(report.to_string().ends_with("all checks passed"));
    }

    #[test]
    fn random_cases_are_reproducible() {
        let a = random_case(4, 9).unwrap();
        let b = random_case(4, 9).unwrap();
        assert_eq!(a.instance, b.instance);
        assert_eq!(a.link, b.link);
    }
}
