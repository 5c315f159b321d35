//! Earliest-deadline backhaul scheduling.
//!
//! For a fixed `L` every UE gets the deadline `d_i = τ_i + D_tx*(L)`. The
//! link is given in full to the active UE with the smallest deadline (ties
//! by id) and the choice is revisited only at arrivals and completions.

use std::io::Write;

use crate::delay::min_transfer_delay;
use crate::error::Result;
use crate::model::{transfer_tokens, BackhaulLink, Instance};

/// Slack allowed on completion-vs-deadline comparisons, seconds.
pub const COMPLETION_EPS: f64 = 1e-9;
/// Slack allowed on delivered token amounts.
pub const TOKEN_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSegment {
    pub t_start: f64,
    pub t_end: f64,
    pub ue_id: usize,
    /// Tokens/s.
    pub rate: f64,
}

impl RateSegment {
    pub fn tokens(&self) -> f64 {
        self.rate * (self.t_end - self.t_start)
    }
}

/// Piecewise-constant backhaul allocation. Per-UE vectors follow the
/// instance order.
#[derive(Debug, Clone, PartialEq)]
pub struct RateSchedule {
    pub segments: Vec<RateSegment>,
    /// Transfer completion time per UE, seconds.
    pub completion: Vec<f64>,
    /// Target completion time `τ_i + D_tx*(L)` per UE.
    pub deadlines: Vec<f64>,
    pub ue_ids: Vec<usize>,
}

impl RateSchedule {
    /// Tokens delivered to the UE with the given id.
    pub fn delivered(&self, ue_id: usize) -> f64 {
        self.segments
            .iter()
            .filter(|s| s.ue_id == ue_id)
            .map(RateSegment::tokens)
            .sum()
    }

    pub fn completion_of(&self, ue_id: usize) -> Option<f64> {
        self.ue_ids
            .iter()
            .position(|&id| id == ue_id)
            .map(|i| self.completion[i])
    }

    /// Total time the link carries traffic.
    pub fn busy_time(&self) -> f64 {
        self.segments.iter().map(|s| s.t_end - s.t_start).sum()
    }

    /// Writes `t_start,t_end,ue_id,rate_tokens_per_s` rows with a header.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t_start", "t_end", "ue_id", "rate_tokens_per_s"])?;
        for s in &self.segments {
            w.write_record([
                s.t_start.to_string(),
                s.t_end.to_string(),
                s.ue_id.to_string(),
                s.rate.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Builds the earliest-deadline schedule for prefill length `l`.
pub fn build_schedule(instance: &Instance, link: &BackhaulLink, l: f64) -> Result<RateSchedule> {
    let d_star = min_transfer_delay(instance, link, l)?;
    let rate = link.normalized_rate();
    let ues = instance.ues();
    let k = ues.len();

    let deadlines: Vec<f64> = ues.iter().map(|u| u.tau + d_star).collect();
    let mut remaining: Vec<f64> = ues.iter().map(|u| transfer_tokens(u.c_tokens, l)).collect();
    // zero-demand UEs complete on arrival and never join the active set
    let mut completion: Vec<f64> = ues.iter().map(|u| u.tau).collect();

    let mut segments: Vec<RateSegment> = Vec::new();
    let mut active: Vec<usize> = Vec::new();
    let mut next = 0;
    let mut t = instance.first_trigger();

    loop {
        while next < k && ues[next].tau <= t {
            if remaining[next] > 0.0 {
                active.push(next);
            }
            next += 1;
        }
        let next_arrival = if next < k { ues[next].tau } else { f64::INFINITY };

        let Some(pos) = (0..active.len()).min_by(|&x, &y| {
            let (i, j) = (active[x], active[y]);
            deadlines[i]
                .total_cmp(&deadlines[j])
                .then(ues[i].id.cmp(&ues[j].id))
        }) else {
            if next == k {
                break;
            }
            t = next_arrival;
            continue;
        };

        let i = active[pos];
        let finish = t + remaining[i] / rate;
        let end = finish.min(next_arrival);
        if end > t {
            push_segment(&mut segments, t, end, ues[i].id, rate);
        }
        if finish <= next_arrival {
            remaining[i] = 0.0;
            completion[i] = finish;
            active.swap_remove(pos);
        } else {
            remaining[i] -= rate * (end - t);
        }
        t = end;
    }

    Ok(RateSchedule {
        segments,
        completion,
        deadlines,
        ue_ids: ues.iter().map(|u| u.id).collect(),
    })
}

/// Extends the previous segment when the same UE keeps the link.
fn push_segment(segments: &mut Vec<RateSegment>, t_start: f64, t_end: f64, ue_id: usize, rate: f64) {
    if let Some(last) = segments.last_mut() {
        if last.ue_id == ue_id && last.t_end == t_start && last.rate == rate {
            last.t_end = t_end;
            return;
        }
    }
    segments.push(RateSegment {
        t_start,
        t_end,
        ue_id,
        rate,
    });
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    EmptySegment { index: usize },
    UnknownUe { ue_id: usize },
    /// Two segments overlap, or a rate exceeds capacity.
    Capacity { index: usize, detail: String },
    /// A segment starts before the UE's trigger time.
    Causality { ue_id: usize, t_start: f64, tau: f64 },
    Delivery { ue_id: usize, delivered: f64, required: f64 },
    Deadline { ue_id: usize, completion: f64, deadline: f64 },
    /// The link idles while some UE still has data to send.
    Idle { from: f64, to: f64, ue_id: usize },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VerificationReport {
    pub violations: Vec<Violation>,
}

impl VerificationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks capacity, causality, delivered amounts, deadlines and work
/// conservation of `schedule` against the problem it was built for.
pub fn verify_schedule(
    schedule: &RateSchedule,
    instance: &Instance,
    link: &BackhaulLink,
    l: f64,
) -> Result<VerificationReport> {
    let rate = link.normalized_rate();
    let d_star = min_transfer_delay(instance, link, l)?;
    let mut violations = Vec::new();

    let mut segs: Vec<(usize, &RateSegment)> = schedule.segments.iter().enumerate().collect();
    segs.sort_by(|a, b| a.1.t_start.total_cmp(&b.1.t_start));
    for (idx, s) in &segs {
        if !(s.t_end > s.t_start) {
            violations.push(Violation::EmptySegment { index: *idx });
        }
        if s.rate > rate * (1.0 + 1e-12) || s.rate < 0.0 {
            violations.push(Violation::Capacity {
                index: *idx,
                detail: format!("rate {} outside [0, {rate}]", s.rate),
            });
        }
        match instance.position_of(s.ue_id) {
            None => violations.push(Violation::UnknownUe { ue_id: s.ue_id }),
            Some(p) => {
                let tau = instance.ues()[p].tau;
                if s.t_start < tau {
                    violations.push(Violation::Causality {
                        ue_id: s.ue_id,
                        t_start: s.t_start,
                        tau,
                    });
                }
            }
        }
    }
    // single-UE-at-a-time: overlapping segments would exceed R in aggregate
    for w in segs.windows(2) {
        let (a, b) = (w[0].1, w[1].1);
        if b.t_start < a.t_end && a.rate + b.rate > rate * (1.0 + 1e-12) {
            violations.push(Violation::Capacity {
                index: w[1].0,
                detail: format!(
                    "overlaps previous segment on [{}, {}] with aggregate rate {}",
                    b.t_start,
                    a.t_end.min(b.t_end),
                    a.rate + b.rate
                ),
            });
        }
    }

    for (i, ue) in instance.ues().iter().enumerate() {
        let required = transfer_tokens(ue.c_tokens, l);
        let delivered = schedule.delivered(ue.id);
        if (delivered - required).abs() > TOKEN_EPS * required.max(1.0) {
            violations.push(Violation::Delivery {
                ue_id: ue.id,
                delivered,
                required,
            });
        }
        let completion = schedule.completion.get(i).copied().unwrap_or(f64::INFINITY);
        let deadline = ue.tau + d_star;
        if completion > deadline + COMPLETION_EPS {
            violations.push(Violation::Deadline {
                ue_id: ue.id,
                completion,
                deadline,
            });
        }
    }

    // gaps between consecutive busy intervals must not overlap any UE's
    // [τ_i, completion_i) window
    let mut gaps = Vec::new();
    let mut cursor = instance.first_trigger();
    for (_, s) in &segs {
        if s.t_start > cursor {
            gaps.push((cursor, s.t_start));
        }
        cursor = cursor.max(s.t_end);
    }
    for (from, to) in gaps {
        for (i, ue) in instance.ues().iter().enumerate() {
            let done = schedule.completion.get(i).copied().unwrap_or(f64::INFINITY);
            let lo = from.max(ue.tau);
            let hi = to.min(done);
            if transfer_tokens(ue.c_tokens, l) > 0.0 && hi - lo > COMPLETION_EPS {
                violations.push(Violation::Idle { from: lo, to: hi, ue_id: ue.id });
            }
        }
    }

    Ok(VerificationReport { violations })
}
