//! Detailed report for one seeded scenario.

use std::fmt::Write as _;

use super::config::ModelParams;
use super::sweep::Method;
use crate::delay::{HandoverProblem, HoPlan, Strategy};
use crate::error::Result;
use crate::scenario::{derive_seed, handover_delays, no_handover_delay, sample_scenario, total_streaming_delay, ScenarioSample};
use crate::scheduler::{build_schedule, RateSchedule};

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyDetail {
    pub plan: HoPlan,
    pub schedule: RateSchedule,
    /// Per-UE handover delay, instance order.
    pub ho_delays: Vec<f64>,
    /// Per-UE handover plus streaming delay, instance order.
    pub total_delays: Vec<f64>,
}

impl StrategyDetail {
    pub fn worst_ho_delay(&self) -> f64 {
        self.ho_delays.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingleReport {
    pub sample: ScenarioSample,
    pub rate_tokens_per_s: f64,
    pub strategies: Vec<StrategyDetail>,
    pub no_ho_delays: Vec<f64>,
    pub g_tokens: u64,
}

/// Plans, schedules and per-UE delays for trial 0 of `base_seed`.
pub fn run_single(params: &ModelParams, base_seed: u64) -> Result<SingleReport> {
    params.validate()?;
    let sample = sample_scenario(params.k, params.c_min, params.c_max, &params.mobility, derive_seed(base_seed, 0))?;
    let link = params.link()?;
    let profile = params.profile()?;
    let radio = params.radio()?;
    let opts = params.streaming();
    let problem = HandoverProblem::new(&sample.instance, &link, &profile).with_options(params.delay_options());
    let k = sample.instance.len();

    let strategies = [Strategy::Ctho, Strategy::Tho, Strategy::Cho]
        .into_iter()
        .map(|s| {
            let plan = problem.plan_for_strategy(s)?;
            let schedule = build_schedule(&sample.instance, &link, plan.l_star)?;
            let ho_delays = handover_delays(&plan, &schedule, &sample.instance);
            let total_delays = (0..k)
                .map(|i| {
                    total_streaming_delay(&plan, &schedule, &sample, i, &radio, &params.mobility, params.g_tokens, &opts)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(StrategyDetail {
                plan,
                schedule,
                ho_delays,
                total_delays,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let no_ho_delays = (0..k)
        .map(|i| no_handover_delay(&sample, i, &radio, &params.mobility, params.g_tokens, &opts))
        .collect::<Result<Vec<_>>>()?;

    Ok(SingleReport {
        sample,
        rate_tokens_per_s: link.normalized_rate(),
        strategies,
        no_ho_delays,
        g_tokens: params.g_tokens,
    })
}

impl SingleReport {
    pub fn render(&self) -> Result<String> {
        let inst = &self.sample.instance;
        let mut out = String::new();
        let _ = writeln!(out, "scenario seed {}", self.sample.seed);
        let _ = writeln!(
            out,
            "K = {}, C_max = {} tokens, R = {} tokens/s, batch start t_s = {} s",
            inst.len(),
            inst.c_max(),
            self.rate_tokens_per_s,
            self.strategies[0].plan.t_start_prefill
        );
        for d in &self.strategies {
            let b = d.plan.breakdown;
            let _ = writeln!(
                out,
                "{:<5} L = {:.3} ({} tokens)  prefill {:.6} s  transfer {:.6} s  worst {:.6} s",
                d.plan.strategy.name(),
                d.plan.l_star,
                d.plan.l_rounded(),
                b.d_prefill,
                b.d_transfer,
                b.v
            );
        }

        out.push_str("\n[scenario]\n");
        let mut buf = Vec::new();
        self.sample.write_csv(&mut buf)?;
        out.push_str(&String::from_utf8_lossy(&buf));

        out.push_str("\n[plans]\nstrategy,l_star,l_rounded,d_prefill_s,d_transfer_s,worst_delay_s\n");
        for d in &self.strategies {
            let b = d.plan.breakdown;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                d.plan.strategy.name(),
                d.plan.l_star,
                d.plan.l_rounded(),
                b.d_prefill,
                b.d_transfer,
                b.v
            );
        }

        let _ = writeln!(
            out,
            "\n[per_ue]\nstrategy,ue_id,tau_s,n_prefill,n_transfer,transfer_done_s,ho_delay_s,total_delay_g{}_s",
            self.g_tokens
        );
        for d in &self.strategies {
            for (i, ue) in inst.ues().iter().enumerate() {
                let split = d.plan.splits[i];
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    d.plan.strategy.name(),
                    ue.id,
                    ue.tau,
                    split.n_prefill,
                    split.n_transfer,
                    d.schedule.completion[i],
                    d.ho_delays[i],
                    d.total_delays[i]
                );
            }
        }
        for (i, ue) in inst.ues().iter().enumerate() {
            let _ = writeln!(out, "{},{},{},,,,0,{}", Method::NoHo.name(), ue.id, ue.tau, self.no_ho_delays[i]);
        }

        let _ = writeln!(out, "\n[schedule {}]", self.strategies[0].plan.strategy.name());
        let mut buf = Vec::new();
        self.strategies[0].schedule.write_csv(&mut buf)?;
        out.push_str(&String::from_utf8_lossy(&buf));
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_is_reproducible_and_consistent() {
        let params = ModelParams::default();
        let a = run_single(&params, 42).unwrap();
        let b = run_single(&params, 42).unwrap();
        assert_eq!(a.render().unwrap(), b.render().unwrap());
        for d in &a.strategies {
            assert!((d.worst_ho_delay() - d.plan.breakdown.v).abs() < 1e-9);
        }
        let ct = &a.strategies[0].plan;
        if ct.l_star > 0.0 && ct.l_star < ct.splits.iter().map(|s| s.n_prefill + s.n_transfer).fold(0.0, f64::max) {
            assert!((ct.breakdown.d_prefill - ct.breakdown.d_transfer).abs() <= 1e-9);
        }
        let text = a.render().unwrap();
        assert!(text.contains("[schedule ctHO]"));
        assert!(text.contains("t_start,t_end,ue_id,rate_tokens_per_s"));
    }
}
