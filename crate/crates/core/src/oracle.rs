//! Brute-force reference computations.
//!
//! None of these use the closed-form transfer delay. They exist to check
//! the planner and the scheduler and are not tuned for speed.

use std::collections::HashMap;

use crate::delay::{DelayOptions, HandoverProblem};
use crate::error::{Error, Result};
use crate::model::{transfer_tokens, BackhaulLink, Instance, PrefillProfile};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    /// Time step, seconds.
    pub dt: f64,
    /// Grid spacing for the search over `L`, tokens.
    pub l_grid: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { dt: 1e-4, l_grid: 1.0 }
    }
}

impl OracleConfig {
    pub fn new(dt: f64, l_grid: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid("dt", "must be > 0"));
        }
        if !(l_grid.is_finite() && l_grid > 0.0) {
            return Err(Error::invalid("l_grid", "must be > 0"));
        }
        Ok(Self { dt, l_grid })
    }
}

/// Worst-user transfer delay of earliest-deadline service simulated in
/// fixed steps of `cfg.dt`.
///
/// All UEs share the same delay target, so deadline order is trigger order
/// (ties by id) and the simulation needs no deadline values. A UE joins at
/// the first step boundary at or after its trigger; each step hands out
/// `R·dt` tokens in deadline order, and a UE completes at the end of the
/// step that drains it. The result never undershoots the continuous
/// optimum and overshoots it by at most `2·dt`.
pub fn oracle_transfer_delay(instance: &Instance, link: &BackhaulLink, l: f64, cfg: &OracleConfig) -> Result<f64> {
    instance.check_prefill_length(l)?;
    let rate = link.normalized_rate();
    let ues = instance.ues();
    let tau_1 = instance.first_trigger();
    let dt = cfg.dt;

    let arrival_step: Vec<u64> = ues
        .iter()
        .map(|u| ((u.tau - tau_1) / dt - 1e-9).ceil().max(0.0) as u64)
        .collect();
    let mut remaining: Vec<f64> = ues.iter().map(|u| transfer_tokens(u.c_tokens, l)).collect();
    let mut completion: Vec<f64> = ues.iter().map(|u| u.tau).collect();
    let mut pending = remaining.iter().filter(|&&r| r > 0.0).count();

    let mut step: u64 = 0;
    while pending > 0 {
        let mut budget = rate * dt;
        let mut served_any = false;
        for i in 0..ues.len() {
            if arrival_step[i] > step || remaining[i] <= 0.0 {
                continue;
            }
            served_any = true;
            if budget <= 0.0 {
                break;
            }
            let take = budget.min(remaining[i]);
            remaining[i] -= take;
            budget -= take;
            if remaining[i] <= 0.0 {
                completion[i] = tau_1 + (step + 1) as f64 * dt;
                pending -= 1;
            }
        }
        step = if served_any {
            step + 1
        } else {
            // idle: jump to the next arrival with outstanding demand
            (0..ues.len())
                .filter(|&i| remaining[i] > 0.0)
                .map(|i| arrival_step[i])
                .min()
                .unwrap_or(step + 1)
                .max(step + 1)
        };
    }

    Ok(ues
        .iter()
        .zip(&completion)
        .map(|(u, &t)| t - u.tau)
        .fold(0.0, f64::max))
}

/// Grid search of `V(L)` over `{0, l_grid, 2·l_grid, …, C_max}`; returns the
/// first grid minimizer and its value.
pub fn oracle_optimal_l(
    instance: &Instance,
    link: &BackhaulLink,
    profile: &PrefillProfile,
    options: DelayOptions,
    cfg: &OracleConfig,
) -> Result<(f64, f64)> {
    let problem = HandoverProblem::new(instance, link, profile).with_options(options);
    let c_max = problem.c_max();
    let steps = (c_max / cfg.l_grid).floor() as u64;
    let mut grid: Vec<f64> = (0..=steps).map(|n| n as f64 * cfg.l_grid).collect();
    if grid.last().is_some_and(|&l| l < c_max) {
        grid.push(c_max);
    }
    let mut best = (0.0, f64::INFINITY);
    for l in grid {
        let v = problem.value_function(l.min(c_max))?.v;
        if v < best.1 {
            best = (l, v);
        }
    }
    Ok(best)
}

const RATE_LEVELS: u16 = 2;

/// Minimum worst-user transfer delay over every schedule that, in each step
/// of length `dt`, splits the link among arrived UEs in multiples of `R/2`.
///
/// Requires `K ≤ 3`, trigger offsets on the `dt` grid and transfer demands
/// that are whole multiples of `R·dt/2`. Completion is charged at the end of
/// the step that drains a UE.
pub fn exhaustive_transfer_delay(instance: &Instance, link: &BackhaulLink, l: f64, dt: f64) -> Result<f64> {
    instance.check_prefill_length(l)?;
    let k = instance.len();
    if k > 3 {
        return Err(Error::Exhaustive(format!("{k} UEs; at most 3 supported")));
    }
    let unit = link.normalized_rate() * dt / f64::from(RATE_LEVELS);
    let tau_1 = instance.first_trigger();

    let mut arrival = [0u32; 3];
    let mut demand = [0u16; 3];
    for (i, ue) in instance.ues().iter().enumerate() {
        arrival[i] = on_grid((ue.tau - tau_1) / dt, "trigger offset")? as u32;
        demand[i] = on_grid(transfer_tokens(ue.c_tokens, l) / unit, "transfer demand")? as u16;
    }
    let horizon = arrival.iter().max().copied().unwrap_or(0)
        + demand.iter().map(|&d| u32::from(d)).sum::<u32>()
        + 2;

    let mut search = Search {
        k,
        arrival,
        horizon,
        memo: HashMap::new(),
    };
    let steps = search.best(0, demand);
    if steps == u32::MAX {
        return Err(Error::Exhaustive("no schedule completes within the horizon".into()));
    }
    Ok(f64::from(steps) * dt)
}

fn on_grid(x: f64, what: &str) -> Result<u64> {
    let n = x.round();
    if (x - n).abs() > 1e-6 || n < 0.0 || n > f64::from(u16::MAX) {
        return Err(Error::Exhaustive(format!("{what} {x} is not a small whole number of grid units")));
    }
    Ok(n as u64)
}

struct Search {
    k: usize,
    arrival: [u32; 3],
    horizon: u32,
    memo: HashMap<(u32, [u16; 3]), u32>,
}

impl Search {
    /// Smallest achievable max delay (in steps) over UEs still unfinished at
    /// the start of `step`.
    fn best(&mut self, step: u32, rem: [u16; 3]) -> u32 {
        if rem.iter().all(|&r| r == 0) {
            return 0;
        }
        if step > self.horizon {
            return u32::MAX;
        }
        if let Some(&v) = self.memo.get(&(step, rem)) {
            return v;
        }
        let mut caps = [0u16; 3];
        for i in 0..self.k {
            if self.arrival[i] <= step {
                caps[i] = rem[i].min(RATE_LEVELS);
            }
        }
        let mut best = u32::MAX;
        for x0 in 0..=caps[0] {
            for x1 in 0..=caps[1] {
                for x2 in 0..=caps[2] {
                    if x0 + x1 + x2 > RATE_LEVELS {
                        continue;
                    }
                    let alloc = [x0, x1, x2];
                    let mut next = rem;
                    let mut now = 0;
                    for i in 0..self.k {
                        next[i] -= alloc[i];
                        if rem[i] > 0 && next[i] == 0 {
                            now = now.max(step + 1 - self.arrival[i]);
                        }
                    }
                    if now >= best {
                        continue;
                    }
                    let rest = self.best(step + 1, next);
                    best = best.min(now.max(rest));
                }
            }
        }
        self.memo.insert((step, rem), best);
        best
    }
}

/// Joint brute force: for each `L` on a grid of `l_step`, the best quantized
/// schedule, combined with the prefill delay. Returns `(L, worst delay)`.
pub fn exhaustive_joint_optimum(
    instance: &Instance,
    link: &BackhaulLink,
    profile: &PrefillProfile,
    options: DelayOptions,
    dt: f64,
    l_step: f64,
) -> Result<(f64, f64)> {
    let problem = HandoverProblem::new(instance, link, profile).with_options(options);
    let c_max = problem.c_max();
    let steps = (c_max / l_step).round() as u64;
    let mut best = (0.0, f64::INFINITY);
    for n in 0..=steps {
        let l = (n as f64 * l_step).min(c_max);
        let v = problem
            .worst_prefill_delay(l)?
            .max(exhaustive_transfer_delay(instance, link, l, dt)?);
        if v < best.1 {
            best = (l, v);
        }
    }
    Ok(best)
}
