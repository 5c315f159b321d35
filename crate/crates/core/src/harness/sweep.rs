//! Monte Carlo sweeps over one system parameter.
//!
//! Trial `n` of every sweep point uses the same derived seed, so scenarios
//! are coupled across the axis (common random numbers) and per-trial
//! comparisons between points are meaningful.

use std::io::Write;

use rayon::prelude::*;

use super::config::{ExperimentConfig, ModelParams, SweepKind};
use crate::delay::{HandoverProblem, Strategy};
use crate::error::{Error, Result};
use crate::scenario::{derive_seed, no_handover_delay, sample_scenario, total_streaming_delay};
use crate::scheduler::build_schedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Ctho,
    Tho,
    Cho,
    /// Source BS keeps serving; only for the BS-distance sweep.
    NoHo,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Ctho => "ctHO",
            Method::Tho => "tHO",
            Method::Cho => "cHO",
            Method::NoHo => "noHO",
        }
    }

    fn strategy(&self) -> Option<Strategy> {
        match self {
            Method::Ctho => Some(Strategy::Ctho),
            Method::Tho => Some(Strategy::Tho),
            Method::Cho => Some(Strategy::Cho),
            Method::NoHo => None,
        }
    }
}

pub fn methods_for(sweep: SweepKind) -> &'static [Method] {
    match sweep {
        SweepKind::BsDistance => &[Method::Ctho, Method::Tho, Method::Cho, Method::NoHo],
        _ => &[Method::Ctho, Method::Tho, Method::Cho],
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub sweep: SweepKind,
    pub sweep_value: f64,
    pub method: Method,
    pub mean_worst_delay: f64,
    pub std: f64,
    pub trials: usize,
}

/// Raw per-trial results: `points[p].trials[n][m]` is the worst-user delay
/// of method `m` in trial `n` at sweep value `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub sweep: SweepKind,
    pub methods: Vec<Method>,
    pub points: Vec<SweepPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub trials: Vec<Vec<f64>>,
}

impl SweepResult {
    pub fn method_index(&self, method: Method) -> Option<usize> {
        self.methods.iter().position(|&m| m == method)
    }

    /// Per-trial values of one method at one point.
    pub fn column(&self, point: usize, method: Method) -> Vec<f64> {
        let m = self.method_index(method).expect("method present in sweep");
        self.points[point].trials.iter().map(|t| t[m]).collect()
    }

    pub fn rows(&self) -> Vec<SweepRow> {
        let mut rows = Vec::new();
        for point in &self.points {
            for (m, &method) in self.methods.iter().enumerate() {
                let xs: Vec<f64> = point.trials.iter().map(|t| t[m]).collect();
                let (mean, std) = mean_std(&xs);
                rows.push(SweepRow {
                    sweep: self.sweep,
                    sweep_value: point.value,
                    method,
                    mean_worst_delay: mean,
                    std,
                    trials: xs.len(),
                });
            }
        }
        rows
    }
}

/// Worst-user delay of every method for one seeded scenario.
///
/// Handover delay for the parameter sweeps; handover plus streaming delay
/// (and the no-handover baseline) for the BS-distance sweep.
pub fn evaluate_trial(params: &ModelParams, sweep: SweepKind, seed: u64) -> Result<Vec<f64>> {
    let sample = sample_scenario(params.k, params.c_min, params.c_max, &params.mobility, seed)?;
    let link = params.link()?;
    let profile = params.profile()?;
    let problem = HandoverProblem::new(&sample.instance, &link, &profile).with_options(params.delay_options());
    let streaming = sweep == SweepKind::BsDistance;
    let radio = params.radio()?;
    let opts = params.streaming();
    let k = sample.instance.len();

    methods_for(sweep)
        .iter()
        .map(|method| match method.strategy() {
            Some(strategy) => {
                let plan = problem.plan_for_strategy(strategy)?;
                if !streaming {
                    return Ok(plan.breakdown.v);
                }
                let schedule = build_schedule(&sample.instance, &link, plan.l_star)?;
                (0..k).try_fold(0.0, |worst: f64, i| {
                    total_streaming_delay(&plan, &schedule, &sample, i, &radio, &params.mobility, params.g_tokens, &opts)
                        .map(|d| worst.max(d))
                })
            }
            None => (0..k).try_fold(0.0, |worst: f64, i| {
                no_handover_delay(&sample, i, &radio, &params.mobility, params.g_tokens, &opts).map(|d| worst.max(d))
            }),
        })
        .collect()
}

pub(crate) fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

pub fn run_sweep_trials(cfg: &ExperimentConfig) -> Result<SweepResult> {
    if !cfg.sweep.is_sweep() {
        return Err(Error::Config(format!("`{}` is not a sweep axis", cfg.sweep.name())));
    }
    cfg.validate()?;
    let pool = thread_pool(cfg.threads)?;
    let points = cfg
        .sweep_values
        .iter()
        .map(|&value| {
            let params = cfg.params.at(cfg.sweep, value)?;
            let trials = pool.install(|| {
                (0..cfg.trials as u64)
                    .into_par_iter()
                    .map(|n| evaluate_trial(&params, cfg.sweep, derive_seed(cfg.base_seed, n)))
                    .collect::<Result<Vec<_>>>()
            })?;
            Ok(SweepPoint { value, trials })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        sweep: cfg.sweep,
        methods: methods_for(cfg.sweep).to_vec(),
        points,
    })
}

pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    Ok(run_sweep_trials(cfg)?.rows())
}

pub const CSV_HEADER: [&str; 7] = [
    "sweep",
    "sweep_value",
    "strategy",
    "mean_worst_delay_s",
    "std_s",
    "trials",
    "base_seed",
];

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], base_seed: u64, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.sweep.name().to_string(),
            r.sweep_value.to_string(),
            r.method.name().to_string(),
            r.mean_worst_delay.to_string(),
            r.std.to_string(),
            r.trials.to_string(),
            base_seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Pairwise (cascade) summation; the result depends only on the order of
/// `xs`, never on how work was split across threads.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let (lo, hi) = xs.split_at(xs.len() / 2);
    pairwise_sum(lo) + pairwise_sum(hi)
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(xs) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = xs.iter().map(|x| (x - mean).powi(2)).collect();
    (mean, (pairwise_sum(&sq) / (n - 1) as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_std_basics() {
        assert_eq!(mean_std(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
        let xs: Vec<f64> = (0..1000).map(|i| i as f64 * 0.1).collect();
        assert!((pairwise_sum(&xs) - 49_950.0).abs() < 1e-9);
    }

    #[test]
    fn small_sweep_csv() {
        let mut cfg = ExperimentConfig::new(SweepKind::Rate);
        cfg.trials = 5;
        cfg.sweep_values = vec![2.0, 8.0];
        let rows = run_sweep(&cfg).unwrap();
        assert_eq!(rows.len(), 6);
        let mut buf = Vec::new();
        write_sweep_csv(&rows, cfg.base_seed, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "sweep,sweep_value,strategy,mean_worst_delay_s,std_s,trials,base_seed"
        );
        assert!(lines.next().unwrap().starts_with("rate,2,ctHO,"));
        for r in &rows {
            assert!(r.mean_worst_delay >= 0.0 && r.std >= 0.0);
            assert_eq!(r.trials, 5);
        }
    }

    #[test]
    fn non_sweep_kinds_are_rejected() {
        assert!(run_sweep(&ExperimentConfig::new(SweepKind::Single)).is_err());
    }

    #[test]
    fn distance_sweep_includes_no_handover() {
        let mut cfg = ExperimentConfig::new(SweepKind::BsDistance);
        cfg.trials = 2;
        cfg.sweep_values = vec![300.0];
        let res = run_sweep_trials(&cfg).unwrap();
        assert_eq!(res.methods.len(), 4);
        assert_eq!(res.points[0].trials[0].len(), 4);
    }
}
