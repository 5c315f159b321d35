//! Closed-form handover delays and the two-stage planner.
//!
//! For a fixed shared prefill length `L` the worst-user delay is
//! `V(L) = max(D_pf(L), D_tx*(L))`, where the prefill term is affine and
//! increasing in `L` and the minimum transfer term is convex, piecewise
//! linear and non-increasing. The planner intersects the two exactly,
//! segment by segment over the sorted context sizes.
//!
//! The minimum transfer delay is the worst FIFO flow time on the shared
//! link, `max_{j≤k} [(S_k(L) - S_{j-1}(L))/R - (τ_k - τ_j)]^+`. The `j = 1`
//! terms alone, `max_k [S_k(L)/R - (τ_k - τ_1)]^+`, are a lower bound that
//! is tight whenever the link never idles between `τ_1` and the last
//! completion; see [`first_arrival_bound`].

use std::fmt;

use crate::error::{Error, Result};
use crate::model::{token_split, transfer_tokens, BackhaulLink, Instance, PrefillProfile, TokenSplit};

/// Handover strategies compared by the harness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strategy {
    /// Joint prefill + transfer with the optimal `L`.
    Ctho,
    /// Token-only handover, `L = C_max`.
    Tho,
    /// Cache-only handover, `L = 0`.
    Cho,
    /// Caller-chosen `L`.
    FixedL(f64),
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Ctho => "ctHO",
            Strategy::Tho => "tHO",
            Strategy::Cho => "cHO",
            Strategy::FixedL(_) => "fixedL",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::FixedL(l) => write!(f, "fixedL({l})"),
            s => f.write_str(s.name()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DelayOptions {
    /// Charge `t_s + b - τ_1` at `L = 0` even though no batch runs.
    pub charge_prefill_overhead_at_zero: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayBreakdown {
    /// Worst-user prefill delay, seconds.
    pub d_prefill: f64,
    /// Minimum worst-user cache transfer delay, seconds.
    pub d_transfer: f64,
    /// `max(d_prefill, d_transfer)`.
    pub v: f64,
}

impl DelayBreakdown {
    fn new(d_prefill: f64, d_transfer: f64) -> Self {
        Self {
            d_prefill,
            d_transfer,
            v: d_prefill.max(d_transfer),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoPlan {
    pub strategy: Strategy,
    /// Shared prefill length, tokens (real-valued).
    pub l_star: f64,
    pub breakdown: DelayBreakdown,
    /// Per-UE split, in instance order.
    pub splits: Vec<TokenSplit>,
    /// Batch start time `t_s`.
    pub t_start_prefill: f64,
    /// Batch completion time, `None` when no batch is charged.
    pub t_prefill_done: Option<f64>,
}

impl HoPlan {
    /// `L*` rounded to whole tokens for reporting.
    pub fn l_rounded(&self) -> u64 {
        self.l_star.round() as u64
    }
}

/// `t_s = ceil(τ_K / T_c) · T_c`.
pub fn prefill_start_time(instance: &Instance, profile: &PrefillProfile) -> f64 {
    let tau_k = instance.last_trigger();
    let t_c = profile.t_cycle();
    let cycles = tau_k / t_c;
    // τ_K that sits on a boundary up to rounding maps to itself
    let nearest = cycles.round();
    let n = if (cycles - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest
    } else {
        cycles.ceil()
    };
    n * t_c
}

/// Whether a batch prefill is charged at length `l`.
fn batch_runs(l: f64, opts: DelayOptions) -> bool {
    l > 0.0 || opts.charge_prefill_overhead_at_zero
}

/// Worst-user prefill delay `t_s + a·L + b - τ_1`; zero at `L = 0` unless
/// the overhead is charged.
pub fn worst_prefill_delay(
    instance: &Instance,
    profile: &PrefillProfile,
    l: f64,
    opts: DelayOptions,
) -> Result<f64> {
    instance.check_prefill_length(l)?;
    if !batch_runs(l, opts) {
        return Ok(0.0);
    }
    Ok(prefill_start_time(instance, profile) + profile.delay(l) - instance.first_trigger())
}

/// `S_k(L) = Σ_{i≤k} (C_i - L)^+` for the first `k` UEs (1-based).
pub fn cumulative_remaining(instance: &Instance, l: f64, k: usize) -> Result<f64> {
    if k == 0 || k > instance.len() {
        return Err(Error::PrefixIndexOutOfRange { k, len: instance.len() });
    }
    Ok(instance.ues()[..k]
        .iter()
        .map(|u| transfer_tokens(u.c_tokens, l))
        .sum())
}

/// Minimum achievable worst-user cache transfer delay for a fixed `L`.
pub fn min_transfer_delay(instance: &Instance, link: &BackhaulLink, l: f64) -> Result<f64> {
    instance.check_prefill_length(l)?;
    Ok(transfer_bound(instance, link.normalized_rate(), l))
}

/// Cumulative-demand bound anchored at the first arrival,
/// `max_k [S_k(L)/R - (τ_k - τ_1)]^+`. Never exceeds [`min_transfer_delay`]
/// and equals it when the link is never starved.
pub fn first_arrival_bound(instance: &Instance, link: &BackhaulLink, l: f64) -> Result<f64> {
    instance.check_prefill_length(l)?;
    let rate = link.normalized_rate();
    let tau_1 = instance.first_trigger();
    let mut s_k = 0.0;
    let mut worst: f64 = 0.0;
    for ue in instance.ues() {
        s_k += transfer_tokens(ue.c_tokens, l);
        worst = worst.max(s_k / rate - (ue.tau - tau_1));
    }
    Ok(worst)
}

pub(crate) fn transfer_bound(instance: &Instance, rate: f64, l: f64) -> f64 {
    // delay of UE k = S_k/R - τ_k + max_{j≤k} (τ_j - S_{j-1}/R)
    let mut s_prev = 0.0;
    let mut best_start = f64::NEG_INFINITY;
    let mut worst: f64 = 0.0;
    for ue in instance.ues() {
        best_start = best_start.max(ue.tau - s_prev / rate);
        s_prev += transfer_tokens(ue.c_tokens, l);
        worst = worst.max(s_prev / rate - ue.tau + best_start);
    }
    worst
}

/// A planning problem: one instance with its backhaul and prefill models.
#[derive(Debug, Clone, Copy)]
pub struct HandoverProblem<'a> {
    pub instance: &'a Instance,
    pub link: &'a BackhaulLink,
    pub profile: &'a PrefillProfile,
    pub options: DelayOptions,
}

impl<'a> HandoverProblem<'a> {
    pub fn new(instance: &'a Instance, link: &'a BackhaulLink, profile: &'a PrefillProfile) -> Self {
        Self {
            instance,
            link,
            profile,
            options: DelayOptions::default(),
        }
    }

    pub fn with_options(mut self, options: DelayOptions) -> Self {
        self.options = options;
        self
    }

    pub fn c_max(&self) -> f64 {
        self.instance.c_max() as f64
    }

    pub fn worst_prefill_delay(&self, l: f64) -> Result<f64> {
        worst_prefill_delay(self.instance, self.profile, l, self.options)
    }

    pub fn min_transfer_delay(&self, l: f64) -> Result<f64> {
        min_transfer_delay(self.instance, self.link, l)
    }

    pub fn value_function(&self, l: f64) -> Result<DelayBreakdown> {
        Ok(DelayBreakdown::new(
            self.worst_prefill_delay(l)?,
            self.min_transfer_delay(l)?,
        ))
    }

    /// Minimizes `V(L)` over `[0, C_max]`, returning the smallest minimizer.
    pub fn optimal_prefill_length(&self) -> Result<HoPlan> {
        let l = self.equalizing_length();
        let v_l = self.value_function(l)?.v;
        let v_0 = self.value_function(0.0)?.v;
        let best = if v_0 <= v_l + 1e-12 * v_l.max(1.0) { 0.0 } else { l };
        self.plan_at(Strategy::Ctho, best)
    }

    pub fn plan_for_strategy(&self, strategy: Strategy) -> Result<HoPlan> {
        match strategy {
            Strategy::Ctho => self.optimal_prefill_length(),
            Strategy::Tho => self.plan_at(strategy, self.c_max()),
            Strategy::Cho => self.plan_at(strategy, 0.0),
            Strategy::FixedL(l) => self.plan_at(strategy, l),
        }
    }

    fn plan_at(&self, strategy: Strategy, l: f64) -> Result<HoPlan> {
        let breakdown = self.value_function(l)?;
        let splits = self
            .instance
            .ues()
            .iter()
            .map(|u| token_split(u, l))
            .collect::<Result<Vec<_>>>()?;
        let t_start_prefill = prefill_start_time(self.instance, self.profile);
        let t_prefill_done =
            batch_runs(l, self.options).then(|| t_start_prefill + self.profile.delay(l));
        Ok(HoPlan {
            strategy,
            l_star: l,
            breakdown,
            splits,
            t_start_prefill,
            t_prefill_done,
        })
    }

    /// Smallest `L` at which the continuous prefill branch
    /// `f(L) = t_s + a·L + b - τ_1` reaches the transfer bound `g(L)`, or
    /// `C_max` if it never does.
    fn equalizing_length(&self) -> f64 {
        let c_max = self.c_max();
        if c_max == 0.0 {
            return 0.0;
        }
        let rate = self.link.normalized_rate();
        let offset = prefill_start_time(self.instance, self.profile) + self.profile.b()
            - self.instance.first_trigger();
        let a = self.profile.a();
        let f = |l: f64| offset + a * l;
        let g = |l: f64| transfer_bound(self.instance, rate, l);

        if f(0.0) >= g(0.0) {
            return 0.0;
        }
        let mut breakpoints: Vec<u64> = self.instance.ues().iter().map(|u| u.c_tokens).collect();
        breakpoints.push(0);
        breakpoints.sort_unstable();
        breakpoints.dedup();

        for seg in breakpoints.windows(2) {
            let (lo, hi) = (seg[0] as f64, seg[1] as f64);
            if f(hi) < g(hi) {
                continue;
            }
            return self.segment_root(lo, hi, offset, rate);
        }
        c_max
    }

    /// On `[lo, hi]` every busy-period term is affine:
    /// `h_jk(L) = (A_jk - m_jk·L)/R - (τ_k - τ_j)` with `A_jk`, `m_jk` summed
    /// over UEs `j..=k` whose context extends past the segment. `f ≥ h_jk`
    /// holds from the root of each term onward, so the crossing is the
    /// largest root.
    fn segment_root(&self, lo: f64, hi: f64, offset: f64, rate: f64) -> f64 {
        let a = self.profile.a();
        let ues = self.instance.ues();
        let mut root = lo;
        for (j, first) in ues.iter().enumerate() {
            let mut sum_c = 0.0;
            let mut count = 0.0;
            for ue in &ues[j..] {
                if ue.c() >= hi {
                    sum_c += ue.c();
                    count += 1.0;
                }
                let slope = a + count / rate;
                let rhs = sum_c / rate - (ue.tau - first.tau) - offset;
                if slope > 0.0 {
                    root = root.max(rhs / slope);
                }
            }
        }
        root.clamp(lo, hi)
    }
}

pub fn value_function(
    instance: &Instance,
    link: &BackhaulLink,
    profile: &PrefillProfile,
    l: f64,
) -> Result<DelayBreakdown> {
    HandoverProblem::new(instance, link, profile).value_function(l)
}

pub fn optimal_prefill_length(
    instance: &Instance,
    link: &BackhaulLink,
    profile: &PrefillProfile,
) -> Result<HoPlan> {
    HandoverProblem::new(instance, link, profile).optimal_prefill_length()
}

pub fn plan_for_strategy(
    strategy: Strategy,
    instance: &Instance,
    link: &BackhaulLink,
    profile: &PrefillProfile,
) -> Result<HoPlan> {
    HandoverProblem::new(instance, link, profile).plan_for_strategy(strategy)
}
