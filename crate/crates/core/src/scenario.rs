//! Randomized mobility scenarios and the post-handover streaming model.
//!
//! UEs move along a line from the source BS (x = 0) toward the target BS
//! (x = `d_bs`) and trigger handover when they cross `x_boundary`. After the
//! handover completes, `G` generated tokens are streamed over a wireless
//! link whose rate follows a distance-based path-loss SNR.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::delay::HoPlan;
use crate::error::{Error, Result};
use crate::model::{Instance, UeContext};
use crate::scheduler::RateSchedule;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobilityConfig {
    /// Distance between source and target BS, meters.
    pub d_bs: f64,
    /// Handover trigger position, meters.
    pub x_boundary: f64,
    pub x0_min: f64,
    pub x0_max: f64,
    /// m/s.
    pub speed: f64,
}

impl Default for MobilityConfig {
    fn default() -> Self {
        Self {
            d_bs: 300.0,
            x_boundary: 150.0,
            x0_min: 120.0,
            x0_max: 130.0,
            speed: 20.0,
        }
    }
}

impl MobilityConfig {
    pub fn validate(&self) -> Result<()> {
        let all_finite = [self.d_bs, self.x_boundary, self.x0_min, self.x0_max, self.speed]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::invalid("mobility", "all values must be finite"));
        }
        if !(self.x_boundary > 0.0 && self.x_boundary < self.d_bs) {
            return Err(Error::invalid(
                "x_boundary",
                format!("{} must lie strictly between 0 and d_bs = {}", self.x_boundary, self.d_bs),
            ));
        }
        if self.x0_min > self.x0_max {
            return Err(Error::invalid("x0_range", "x0_min exceeds x0_max"));
        }
        if self.x0_max > self.x_boundary {
            return Err(Error::invalid("x0_range", "initial positions must not pass the boundary"));
        }
        if self.speed <= 0.0 {
            return Err(Error::invalid("speed", "must be > 0"));
        }
        Ok(())
    }

    /// Same geometry with the BS separation changed: the boundary stays at
    /// the midpoint and the start range keeps its offsets from the boundary,
    /// so trigger times are unchanged.
    pub fn with_bs_distance(&self, d_bs: f64) -> Self {
        let x_boundary = d_bs / 2.0;
        let shift = x_boundary - self.x_boundary;
        Self {
            d_bs,
            x_boundary,
            x0_min: self.x0_min + shift,
            x0_max: self.x0_max + shift,
            speed: self.speed,
        }
    }

    pub fn trigger_time(&self, x0: f64) -> f64 {
        (self.x_boundary - x0) / self.speed
    }

    pub fn bs_position(&self, bs: ServingBs) -> f64 {
        match bs {
            ServingBs::Source => 0.0,
            ServingBs::Target => self.d_bs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ServingBs {
    Source,
    Target,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioConfig {
    /// Linear SNR at `d_ref`.
    pub gamma_ref: f64,
    pub d_ref: f64,
    pub pathloss_exp: f64,
    /// Hz.
    pub bandwidth: f64,
    /// Bits per streamed token.
    pub token_bits: f64,
    /// Distances below this are clamped, meters.
    pub d_min: f64,
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self::from_db(10.0, 20.0, 3.5, 2e6, 12.0).expect("default radio config is valid")
    }
}

impl RadioConfig {
    /// Takes the reference SNR in dB; the distance floor defaults to `d_ref`.
    pub fn from_db(gamma_ref_db: f64, d_ref: f64, pathloss_exp: f64, bandwidth: f64, token_bits: f64) -> Result<Self> {
        let cfg = Self {
            gamma_ref: 10f64.powf(gamma_ref_db / 10.0),
            d_ref,
            pathloss_exp,
            bandwidth,
            token_bits,
            d_min: d_ref,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("gamma_ref", self.gamma_ref),
            ("d_ref", self.d_ref),
            ("pathloss_exp", self.pathloss_exp),
            ("bandwidth", self.bandwidth),
            ("token_bits", self.token_bits),
            ("d_min", self.d_min),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, format!("{v} must be finite and > 0")));
            }
        }
        Ok(())
    }
}

/// Linear SNR at `distance` meters, clamped at the distance floor.
pub fn snr_at(radio: &RadioConfig, distance: f64) -> f64 {
    let d = distance.abs().max(radio.d_min);
    radio.gamma_ref * (radio.d_ref / d).powf(radio.pathloss_exp)
}

/// Shannon rate in tokens/s.
pub fn token_rate(radio: &RadioConfig, snr: f64) -> f64 {
    radio.bandwidth * (1.0 + snr.max(0.0)).log2() / radio.token_bits
}

/// Constant-velocity motion on the line, `x(t) = x0 + speed·t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trajectory {
    pub x0: f64,
    pub speed: f64,
}

impl Trajectory {
    pub fn position(&self, t: f64) -> f64 {
        self.x0 + self.speed * t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamingOptions {
    /// Integration step, seconds.
    pub step: f64,
    /// Give up after this much streaming time, seconds.
    pub horizon: f64,
    /// Hold the rate at its value at the start of streaming.
    pub freeze_snr_at_handover: bool,
}

impl Default for StreamingOptions {
    fn default() -> Self {
        Self {
            step: 1e-3,
            horizon: 3600.0,
            freeze_snr_at_handover: false,
        }
    }
}

/// Time to stream `g_tokens` starting at `t0` from the BS at `bs_x`.
///
/// Integrates the instantaneous token rate with a fixed-step midpoint rule
/// and interpolates inside the last step so the budget is hit exactly.
pub fn streaming_delay(
    radio: &RadioConfig,
    trajectory: Trajectory,
    bs_x: f64,
    g_tokens: u64,
    t0: f64,
    opts: &StreamingOptions,
) -> Result<f64> {
    if g_tokens == 0 {
        return Ok(0.0);
    }
    let g = g_tokens as f64;
    let rate_at = |t: f64| token_rate(radio, snr_at(radio, trajectory.position(t) - bs_x));
    let horizon_err = Error::StreamingHorizon {
        g_tokens,
        horizon_s: opts.horizon,
    };

    if opts.freeze_snr_at_handover || trajectory.speed == 0.0 {
        let r = rate_at(t0);
        let d = g / r;
        return if r > 0.0 && d <= opts.horizon { Ok(d) } else { Err(horizon_err) };
    }

    let dt = opts.step;
    let mut sent = 0.0;
    let mut n: u64 = 0;
    loop {
        let elapsed = n as f64 * dt;
        if elapsed >= opts.horizon {
            return Err(horizon_err);
        }
        let r = rate_at(t0 + elapsed + 0.5 * dt);
        let step_tokens = r * dt;
        if sent + step_tokens >= g {
            return Ok(elapsed + (g - sent) / r);
        }
        sent += step_tokens;
        n += 1;
    }
}

/// One random draw of UE positions and context sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSample {
    pub instance: Instance,
    /// `x_i(0)` in instance order.
    pub initial_positions: Vec<f64>,
    pub speed: f64,
    pub seed: u64,
}

impl ScenarioSample {
    pub fn trajectory(&self, index: usize) -> Trajectory {
        Trajectory {
            x0: self.initial_positions[index],
            speed: self.speed,
        }
    }

    /// `ue_id,x0_m,tau_s,c_tokens,seed` rows with a header.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["ue_id", "x0_m", "tau_s", "c_tokens", "seed"])?;
        for (ue, x0) in self.instance.ues().iter().zip(&self.initial_positions) {
            w.write_record([
                ue.id.to_string(),
                x0.to_string(),
                ue.tau.to_string(),
                ue.c_tokens.to_string(),
                self.seed.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// SplitMix64 step: maps `(base, index)` to an independent seed.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draws `k` UEs. Each UE consumes two uniforms in id order (position, then
/// context size), so growing `k`, `c_max` or `d_bs` with a fixed seed
/// extends or stretches the same draw instead of replacing it.
pub fn sample_scenario(k: usize, c_min: u64, c_max: u64, mobility: &MobilityConfig, seed: u64) -> Result<ScenarioSample> {
    if k == 0 {
        return Err(Error::invalid("k", "at least one UE is required"));
    }
    if c_min > c_max {
        return Err(Error::invalid("c_range", format!("c_min {c_min} exceeds c_max {c_max}")));
    }
    mobility.validate()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let span = (c_max - c_min) as f64 + 1.0;
    let mut drawn = Vec::with_capacity(k);
    for id in 0..k {
        let u_x: f64 = rng.gen();
        let u_c: f64 = rng.gen();
        let x0 = mobility.x0_min + u_x * (mobility.x0_max - mobility.x0_min);
        let c = (c_min + (u_c * span).floor() as u64).min(c_max);
        // clamp guards the x0 == x_boundary rounding case
        let tau = mobility.trigger_time(x0).max(0.0);
        drawn.push((UeContext::new(id, tau, c)?, x0));
    }
    let instance = Instance::new(drawn.iter().map(|(u, _)| *u).collect())?;
    let initial_positions = instance
        .ues()
        .iter()
        .map(|u| drawn[u.id].1)
        .collect();
    Ok(ScenarioSample {
        instance,
        initial_positions,
        speed: mobility.speed,
        seed,
    })
}

/// Per-UE handover delay `max(T_pf - τ_i, T_i^tx - τ_i)` in instance order.
pub fn handover_delays(plan: &HoPlan, schedule: &RateSchedule, instance: &Instance) -> Vec<f64> {
    instance
        .ues()
        .iter()
        .zip(&schedule.completion)
        .map(|(ue, &done)| {
            let prefill = plan.t_prefill_done.map_or(0.0, |t| t - ue.tau);
            prefill.max(done - ue.tau)
        })
        .collect()
}

/// Handover delay plus the time to stream `g_tokens` from the target BS,
/// measured from the UE's trigger time. Streaming starts once the handover
/// completes.
#[allow(clippy::too_many_arguments)]
pub fn total_streaming_delay(
    plan: &HoPlan,
    schedule: &RateSchedule,
    sample: &ScenarioSample,
    index: usize,
    radio: &RadioConfig,
    mobility: &MobilityConfig,
    g_tokens: u64,
    opts: &StreamingOptions,
) -> Result<f64> {
    let ue = sample.instance.ues()[index];
    let prefill = plan.t_prefill_done.map_or(0.0, |t| t - ue.tau);
    let ho = prefill.max(schedule.completion[index] - ue.tau);
    let stream = streaming_delay(
        radio,
        sample.trajectory(index),
        mobility.bs_position(ServingBs::Target),
        g_tokens,
        ue.tau + ho,
        opts,
    )?;
    Ok(ho + stream)
}

/// Total delay without handover: the source BS keeps streaming from `τ_i`.
pub fn no_handover_delay(
    sample: &ScenarioSample,
    index: usize,
    radio: &RadioConfig,
    mobility: &MobilityConfig,
    g_tokens: u64,
    opts: &StreamingOptions,
) -> Result<f64> {
    let ue = sample.instance.ues()[index];
    streaming_delay(
        radio,
        sample.trajectory(index),
        mobility.bs_position(ServingBs::Source),
        g_tokens,
        ue.tau,
        opts,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delay::{HandoverProblem, Strategy};
    use crate::model::{BackhaulLink, PrefillProfile};
    use crate::scheduler::build_schedule;
    use proptest::prelude::*;

    #[test]
    fn sampling_is_deterministic() {
        let m = MobilityConfig::default();
        let a = sample_scenario(4, 1024, 3072, &m, 7).unwrap();
        let b = sample_scenario(4, 1024, 3072, &m, 7).unwrap();
        assert_eq!(a, b);
        let c = sample_scenario(4, 1024, 3072, &m, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn trigger_times_lie_in_mobility_interval() {
        let m = MobilityConfig::default();
        for seed in 0..200 {
            let s = sample_scenario(8, 1024, 3072, &m, seed).unwrap();
            for (ue, x0) in s.instance.ues().iter().zip(&s.initial_positions) {
                assert!((1.0..=1.5).contains(&ue.tau), "{}", ue.tau);
                assert!((ue.tau - (150.0 - x0) / 20.0).abs() < 1e-12);
                assert!((1024..=3072).contains(&ue.c_tokens));
            }
            // furthest-ahead UE triggers first
            for w in s.initial_positions.windows(2) {
                assert!(w[0] >= w[1]);
            }
        }
    }

    #[test]
    fn degenerate_context_range() {
        let s = sample_scenario(5, 2048, 2048, &MobilityConfig::default(), 3).unwrap();
        assert!(s.instance.ues().iter().all(|u| u.c_tokens == 2048));
    }

    #[test]
    fn invalid_sampling_inputs() {
        let m = MobilityConfig::default();
        assert!(sample_scenario(0, 1, 2, &m, 0).is_err());
        assert!(sample_scenario(2, 3, 2, &m, 0).is_err());
        let bad = MobilityConfig { x0_max: 160.0, ..m };
        assert!(sample_scenario(2, 1, 2, &bad, 0).is_err());
        let bad = MobilityConfig { x_boundary: 400.0, ..m };
        assert!(bad.validate().is_err());
        let bad = MobilityConfig { speed: 0.0, ..m };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn growing_k_extends_the_same_draw() {
        let m = MobilityConfig::default();
        let small = sample_scenario(4, 1024, 3072, &m, 11).unwrap();
        let large = sample_scenario(6, 1024, 3072, &m, 11).unwrap();
        for ue in small.instance.ues() {
            assert!(large.instance.ues().contains(ue));
        }
    }

    #[test]
    fn bs_distance_keeps_trigger_times() {
        let m = MobilityConfig::default();
        let far = m.with_bs_distance(500.0);
        far.validate().unwrap();
        assert_eq!(far.x_boundary, 250.0);
        assert_eq!((far.x0_min, far.x0_max), (220.0, 230.0));
        let a = sample_scenario(4, 1024, 3072, &m, 5).unwrap();
        let b = sample_scenario(4, 1024, 3072, &far, 5).unwrap();
        for (x, y) in a.instance.ues().iter().zip(b.instance.ues()) {
            assert!((x.tau - y.tau).abs() < 1e-12);
            assert_eq!(x.c_tokens, y.c_tokens);
        }
    }

    #[test]
    fn snr_reference_points() {
        let r = RadioConfig::default();
        assert!((snr_at(&r, 20.0) - 10.0).abs() < 1e-12);
        assert!((snr_at(&r, 40.0) - 10.0 * 2f64.powf(-3.5)).abs() < 1e-12);
        assert!((snr_at(&r, 40.0) - 0.883_883_476).abs() < 1e-8);
        assert_eq!(snr_at(&r, 0.0), snr_at(&r, 20.0));
        assert!(snr_at(&r, 0.0).is_finite());
    }

    #[test]
    fn token_rate_values() {
        let r = RadioConfig::default();
        // 2e6 · log2(11) / 12
        assert!((token_rate(&r, 10.0) - 576_571.936_44).abs() < 1e-2);
        assert_eq!(token_rate(&r, 0.0), 0.0);
        let wide = RadioConfig { bandwidth: 4e6, ..r };
        assert!((token_rate(&wide, 3.0) - 2.0 * token_rate(&r, 3.0)).abs() < 1e-9);
    }

    #[test]
    fn stationary_streaming_matches_constant_rate() {
        let r = RadioConfig::default();
        let rate = token_rate(&r, 10.0);
        let traj = Trajectory { x0: 280.0, speed: 0.0 };
        let g = rate.round() as u64;
        let d = streaming_delay(&r, traj, 300.0, g, 0.0, &StreamingOptions::default()).unwrap();
        assert!((d - g as f64 / rate).abs() < 1e-12);
        assert!((d - 1.0).abs() < 1e-5);
        assert_eq!(streaming_delay(&r, traj, 300.0, 0, 0.0, &StreamingOptions::default()).unwrap(), 0.0);
    }

    #[test]
    fn integration_matches_closed_form_at_floor() {
        // moving inside the distance floor keeps the rate constant, so the
        // integrator must reproduce G / rate
        let r = RadioConfig { d_min: 100.0, ..RadioConfig::default() };
        let traj = Trajectory { x0: 250.0, speed: 20.0 };
        let rate = token_rate(&r, snr_at(&r, 100.0));
        let g = 1000;
        let d = streaming_delay(&r, traj, 300.0, g, 0.0, &StreamingOptions::default()).unwrap();
        assert!((d - g as f64 / rate).abs() < 1e-9);
    }

    #[test]
    fn approaching_target_beats_frozen_rate() {
        let r = RadioConfig::default();
        let traj = Trajectory { x0: 150.0, speed: 20.0 };
        let opts = StreamingOptions::default();
        let moving = streaming_delay(&r, traj, 300.0, 1024, 0.0, &opts).unwrap();
        let frozen = streaming_delay(
            &r,
            traj,
            300.0,
            1024,
            0.0,
            &StreamingOptions { freeze_snr_at_handover: true, ..opts },
        )
        .unwrap();
        assert!(moving < frozen);
    }

    #[test]
    fn receding_forever_hits_the_horizon() {
        let r = RadioConfig::default();
        let traj = Trajectory { x0: 400.0, speed: 20.0 };
        let opts = StreamingOptions { horizon: 50.0, ..StreamingOptions::default() };
        let err = streaming_delay(&r, traj, 0.0, 1_000_000, 0.0, &opts).unwrap_err();
        assert!(err.to_string().contains("50 s horizon"), "{err}");
    }

    #[test]
    fn integration_converges() {
        let r = RadioConfig::default();
        let traj = Trajectory { x0: 125.0, speed: 20.0 };
        for bs in [0.0, 300.0] {
            let coarse = streaming_delay(&r, traj, bs, 1024, 1.3, &StreamingOptions::default()).unwrap();
            let fine = streaming_delay(
                &r,
                traj,
                bs,
                1024,
                1.3,
                &StreamingOptions { step: 5e-4, ..StreamingOptions::default() },
            )
            .unwrap();
            assert!(((coarse - fine) / fine).abs() < 1e-3);
        }
    }

    #[test]
    fn no_handover_grows_with_bs_distance() {
        let radio = RadioConfig::default();
        let opts = StreamingOptions::default();
        let base = MobilityConfig::default();
        let mut prev = 0.0;
        for d in [300.0, 350.0, 400.0, 450.0, 500.0] {
            let m = base.with_bs_distance(d);
            let s = sample_scenario(4, 1024, 3072, &m, 1).unwrap();
            let worst = (0..4)
                .map(|i| no_handover_delay(&s, i, &radio, &m, 1024, &opts).unwrap())
                .fold(0.0, f64::max);
            assert!(worst >= prev);
            prev = worst;
        }
    }

    #[test]
    fn zero_tokens_leaves_handover_delay() {
        let m = MobilityConfig::default();
        let s = sample_scenario(4, 1024, 3072, &m, 2).unwrap();
        let link = BackhaulLink::new(4.5e9, 458_752.0).unwrap();
        let p = PrefillProfile::new(9.4267e-5, 2.4e-3, 0.01).unwrap();
        let plan = HandoverProblem::new(&s.instance, &link, &p)
            .plan_for_strategy(Strategy::Ctho)
            .unwrap();
        let sched = build_schedule(&s.instance, &link, plan.l_star).unwrap();
        let ho = handover_delays(&plan, &sched, &s.instance);
        let worst_ho = ho.iter().copied().fold(0.0, f64::max);
        assert!((worst_ho - plan.breakdown.v).abs() < 1e-9);
        let radio = RadioConfig::default();
        let opts = StreamingOptions::default();
        let totals: Vec<f64> = (0..4)
            .map(|i| total_streaming_delay(&plan, &sched, &s, i, &radio, &m, 0, &opts).unwrap())
            .collect();
        assert_eq!(totals, ho);
    }

    #[test]
    fn sample_csv_layout() {
        let s = sample_scenario(2, 1024, 1024, &MobilityConfig::default(), 9).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "ue_id,x0_m,tau_s,c_tokens,seed");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].ends_with(",1024,9"));
    }

    proptest! {
        #[test]
        fn snr_strictly_decreasing_beyond_floor(d in 20.0f64..1000.0, dd in 0.01f64..100.0) {
            let r = RadioConfig::default();
            prop_assert!(snr_at(&r, d + dd) < snr_at(&r, d));
        }

        #[test]
        fn streaming_monotone_in_bandwidth_and_tokens(x0 in 100.0f64..160.0, g in 1u64..2000, extra in 1u64..500, bw in 1e6f64..4e6) {
            let r = RadioConfig { bandwidth: bw, ..RadioConfig::default() };
            let wider = RadioConfig { bandwidth: bw * 1.5, ..r };
            let traj = Trajectory { x0, speed: 20.0 };
            let o = StreamingOptions::default();
            let base = streaming_delay(&r, traj, 300.0, g, 0.5, &o).unwrap();
            prop_assert!(streaming_delay(&wider, traj, 300.0, g, 0.5, &o).unwrap() <= base);
            prop_assert!(streaming_delay(&r, traj, 300.0, g + extra, 0.5, &o).unwrap() >= base);
        }
    }
}
