//! Experiment configuration: defaults, `key=value` files and overrides.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::delay::DelayOptions;
use crate::error::{Error, Result};
use crate::model::{BackhaulLink, KvCacheSpec, PrefillProfile};
use crate::scenario::{MobilityConfig, RadioConfig, StreamingOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    /// Backhaul capacity, values in Gbps.
    Rate,
    /// Prefill speed `1/a`, values in tokens/s.
    Compute,
    /// Largest context size `C_max`, tokens.
    Cache,
    /// Number of UEs.
    Users,
    /// BS separation, meters; reports total streaming delay.
    BsDistance,
    Single,
    Verify,
}

impl SweepKind {
    pub fn name(&self) -> &'static str {
        match self {
            SweepKind::Rate => "rate",
            SweepKind::Compute => "compute",
            SweepKind::Cache => "cache",
            SweepKind::Users => "users",
            SweepKind::BsDistance => "bs_distance",
            SweepKind::Single => "single",
            SweepKind::Verify => "verify",
        }
    }

    pub fn is_sweep(&self) -> bool {
        !matches!(self, SweepKind::Single | SweepKind::Verify)
    }

    pub fn default_values(&self) -> Vec<f64> {
        match self {
            SweepKind::Rate => (2..=8).map(f64::from).collect(),
            SweepKind::Compute => (2..=8).map(|i| f64::from(i) * 2500.0).collect(),
            SweepKind::Cache => (1..=8).map(|i| f64::from(i) * 1024.0).collect(),
            SweepKind::Users => (1..=12).map(f64::from).collect(),
            SweepKind::BsDistance => (0..=8).map(|i| 300.0 + f64::from(i) * 25.0).collect(),
            SweepKind::Single | SweepKind::Verify => Vec::new(),
        }
    }
}

impl FromStr for SweepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "rate" => SweepKind::Rate,
            "compute" => SweepKind::Compute,
            "cache" => SweepKind::Cache,
            "users" => SweepKind::Users,
            "bs_distance" => SweepKind::BsDistance,
            "single" => SweepKind::Single,
            "verify" => SweepKind::Verify,
            other => return Err(Error::Config(format!("unknown sweep axis `{other}`"))),
        })
    }
}

/// Every physical and algorithmic constant of one experiment point.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub k: usize,
    pub c_min: u64,
    pub c_max: u64,
    pub t_cycle: f64,
    pub a: f64,
    pub b: f64,
    /// Backhaul capacity, bits/s.
    pub r_bh: f64,
    pub kv: KvCacheSpec,
    pub mobility: MobilityConfig,
    pub gamma_ref_db: f64,
    pub d_ref: f64,
    pub pathloss_exp: f64,
    pub bandwidth_hz: f64,
    pub token_bits: f64,
    pub d_min: f64,
    /// Tokens streamed after handover.
    pub g_tokens: u64,
    pub stream_step: f64,
    pub stream_horizon: f64,
    pub charge_prefill_overhead_at_zero: bool,
    pub freeze_snr_at_handover: bool,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            k: 4,
            c_min: 1024,
            c_max: 3072,
            t_cycle: 0.01,
            a: 9.4267e-5,
            b: 2.4e-3,
            r_bh: 4.5e9,
            kv: KvCacheSpec {
                n_layers: 28,
                n_kv_heads: 4,
                head_dim: 128,
                precision_bits: 16,
            },
            mobility: MobilityConfig::default(),
            gamma_ref_db: 10.0,
            d_ref: 20.0,
            pathloss_exp: 3.5,
            bandwidth_hz: 2e6,
            token_bits: 12.0,
            d_min: 20.0,
            g_tokens: 1024,
            stream_step: 1e-3,
            stream_horizon: 3600.0,
            charge_prefill_overhead_at_zero: false,
            freeze_snr_at_handover: false,
        }
    }
}

impl ModelParams {
    pub fn profile(&self) -> Result<PrefillProfile> {
        PrefillProfile::new(self.a, self.b, self.t_cycle)
    }

    pub fn link(&self) -> Result<BackhaulLink> {
        BackhaulLink::from_spec(self.r_bh, &self.kv)
    }

    pub fn radio(&self) -> Result<RadioConfig> {
        let mut radio = RadioConfig::from_db(
            self.gamma_ref_db,
            self.d_ref,
            self.pathloss_exp,
            self.bandwidth_hz,
            self.token_bits,
        )?;
        radio.d_min = self.d_min;
        radio.validate()?;
        Ok(radio)
    }

    pub fn streaming(&self) -> StreamingOptions {
        StreamingOptions {
            step: self.stream_step,
            horizon: self.stream_horizon,
            freeze_snr_at_handover: self.freeze_snr_at_handover,
        }
    }

    pub fn delay_options(&self) -> DelayOptions {
        DelayOptions {
            charge_prefill_overhead_at_zero: self.charge_prefill_overhead_at_zero,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be >= 1".into()));
        }
        if self.c_min > self.c_max {
            return Err(Error::Config(format!("c_min {} exceeds c_max {}", self.c_min, self.c_max)));
        }
        if self.g_tokens == 0 {
            return Err(Error::Config("g_tokens must be > 0".into()));
        }
        for (name, v) in [("stream_step", self.stream_step), ("stream_horizon", self.stream_horizon)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be > 0")));
            }
        }
        KvCacheSpec::new(self.kv.n_layers, self.kv.n_kv_heads, self.kv.head_dim, self.kv.precision_bits)?;
        self.profile()?;
        self.link()?;
        self.radio()?;
        self.mobility.validate()?;
        Ok(())
    }

    /// The parameters at one point of a sweep axis.
    pub fn at(&self, sweep: SweepKind, value: f64) -> Result<ModelParams> {
        let mut p = self.clone();
        let bad = |what: &str| Error::Config(format!("invalid {} sweep value {value}: {what}", sweep.name()));
        match sweep {
            SweepKind::Rate => {
                if !(value > 0.0) {
                    return Err(bad("must be > 0 Gbps"));
                }
                p.r_bh = value * 1e9;
            }
            SweepKind::Compute => {
                if !(value > 0.0) {
                    return Err(bad("must be > 0 tokens/s"));
                }
                p.a = 1.0 / value;
            }
            SweepKind::Cache => p.c_max = whole(value).ok_or_else(|| bad("must be a whole token count"))?,
            SweepKind::Users => {
                p.k = whole(value)
                    .filter(|&k| k >= 1)
                    .ok_or_else(|| bad("must be a positive integer"))? as usize
            }
            SweepKind::BsDistance => {
                if !(value > 0.0) {
                    return Err(bad("must be > 0 m"));
                }
                p.mobility = self.mobility.with_bs_distance(value);
            }
            SweepKind::Single | SweepKind::Verify => {
                return Err(Error::Config(format!("`{}` is not a sweep axis", sweep.name())))
            }
        }
        p.validate()?;
        Ok(p)
    }
}

fn whole(v: f64) -> Option<u64> {
    (v >= 0.0 && v.fract() == 0.0 && v < 1e15).then_some(v as u64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub sweep: SweepKind,
    pub sweep_values: Vec<f64>,
    pub trials: usize,
    pub base_seed: u64,
    /// Worker threads; 0 uses every core.
    pub threads: usize,
    pub params: ModelParams,
}

/// Recognized keys, in the order `--emit-config` prints them.
pub const CONFIG_KEYS: &[&str] = &[
    "sweep_values",
    "trials",
    "seed",
    "threads",
    "k",
    "c_min",
    "c_max",
    "t_cycle",
    "a",
    "b",
    "r_bh",
    "n_layers",
    "n_kv_heads",
    "head_dim",
    "precision_bits",
    "d_bs",
    "x_boundary",
    "x0_min",
    "x0_max",
    "speed",
    "gamma_ref_db",
    "d_ref",
    "pathloss_exp",
    "bandwidth_hz",
    "token_bits",
    "d_min",
    "g_tokens",
    "stream_step",
    "stream_horizon",
    "charge_prefill_overhead_at_zero",
    "freeze_snr_at_handover",
];

impl ExperimentConfig {
    pub fn new(sweep: SweepKind) -> Self {
        Self {
            sweep,
            sweep_values: sweep.default_values(),
            trials: 500,
            base_seed: 0,
            threads: 0,
            params: ModelParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if self.sweep.is_sweep() {
            if self.sweep_values.is_empty() {
                return Err(Error::Config("sweep_values must not be empty".into()));
            }
            for &v in &self.sweep_values {
                self.params.at(self.sweep, v)?;
            }
        }
        self.params.validate()
    }

    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        let p = &mut self.params;
        match key.as_str() {
            "sweep_values" => {
                self.sweep_values = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| parse::<f64>("sweep_values", s.trim()))
                    .collect::<Result<_>>()?
            }
            "trials" => self.trials = parse("trials", value)?,
            "seed" | "base_seed" => self.base_seed = parse("seed", value)?,
            "threads" => self.threads = parse("threads", value)?,
            "k" => p.k = parse("k", value)?,
            "c_min" => p.c_min = parse("c_min", value)?,
            "c_max" => p.c_max = parse("c_max", value)?,
            "t_cycle" => p.t_cycle = parse("t_cycle", value)?,
            "a" => p.a = parse("a", value)?,
            "b" => p.b = parse("b", value)?,
            "r_bh" => p.r_bh = parse("r_bh", value)?,
            "n_layers" => p.kv.n_layers = parse("n_layers", value)?,
            "n_kv_heads" => p.kv.n_kv_heads = parse("n_kv_heads", value)?,
            "head_dim" => p.kv.head_dim = parse("head_dim", value)?,
            "precision_bits" => p.kv.precision_bits = parse("precision_bits", value)?,
            "d_bs" => p.mobility.d_bs = parse("d_bs", value)?,
            "x_boundary" => p.mobility.x_boundary = parse("x_boundary", value)?,
            "x0_min" => p.mobility.x0_min = parse("x0_min", value)?,
            "x0_max" => p.mobility.x0_max = parse("x0_max", value)?,
            "speed" => p.mobility.speed = parse("speed", value)?,
            "gamma_ref_db" => p.gamma_ref_db = parse("gamma_ref_db", value)?,
            "d_ref" => p.d_ref = parse("d_ref", value)?,
            "pathloss_exp" => p.pathloss_exp = parse("pathloss_exp", value)?,
            "bandwidth_hz" => p.bandwidth_hz = parse("bandwidth_hz", value)?,
            "token_bits" => p.token_bits = parse("token_bits", value)?,
            "d_min" => p.d_min = parse("d_min", value)?,
            "g_tokens" => p.g_tokens = parse("g_tokens", value)?,
            "stream_step" => p.stream_step = parse("stream_step", value)?,
            "stream_horizon" => p.stream_horizon = parse("stream_horizon", value)?,
            "charge_prefill_overhead_at_zero" => {
                p.charge_prefill_overhead_at_zero = parse("charge_prefill_overhead_at_zero", value)?
            }
            "freeze_snr_at_handover" => p.freeze_snr_at_handover = parse("freeze_snr_at_handover", value)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Applies a flat `key=value` text; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value, got `{line}`", n + 1)))?;
            self.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        self.apply_text(&text)
    }

    /// Effective configuration in the same `key=value` format.
    pub fn emit(&self) -> String {
        let p = &self.params;
        let values: Vec<String> = self.sweep_values.iter().map(f64::to_string).collect();
        let mut out = String::new();
        let _ = writeln!(out, "# sweep={}", self.sweep.name());
        for key in CONFIG_KEYS {
            let v = match *key {
                "sweep_values" => values.join(","),
                "trials" => self.trials.to_string(),
                "seed" => self.base_seed.to_string(),
                "threads" => self.threads.to_string(),
                "k" => p.k.to_string(),
                "c_min" => p.c_min.to_string(),
                "c_max" => p.c_max.to_string(),
                "t_cycle" => p.t_cycle.to_string(),
                "a" => p.a.to_string(),
                "b" => p.b.to_string(),
                "r_bh" => p.r_bh.to_string(),
                "n_layers" => p.kv.n_layers.to_string(),
                "n_kv_heads" => p.kv.n_kv_heads.to_string(),
                "head_dim" => p.kv.head_dim.to_string(),
                "precision_bits" => p.kv.precision_bits.to_string(),
                "d_bs" => p.mobility.d_bs.to_string(),
                "x_boundary" => p.mobility.x_boundary.to_string(),
                "x0_min" => p.mobility.x0_min.to_string(),
                "x0_max" => p.mobility.x0_max.to_string(),
                "speed" => p.mobility.speed.to_string(),
                "gamma_ref_db" => p.gamma_ref_db.to_string(),
                "d_ref" => p.d_ref.to_string(),
                "pathloss_exp" => p.pathloss_exp.to_string(),
                "bandwidth_hz" => p.bandwidth_hz.to_string(),
                "token_bits" => p.token_bits.to_string(),
                "d_min" => p.d_min.to_string(),
                "g_tokens" => p.g_tokens.to_string(),
                "stream_step" => p.stream_step.to_string(),
                "stream_horizon" => p.stream_horizon.to_string(),
                "charge_prefill_overhead_at_zero" => p.charge_prefill_overhead_at_zero.to_string(),
                "freeze_snr_at_handover" => p.freeze_snr_at_handover.to_string(),
                _ => unreachable!("every listed key is emitted"),
            };
            let _ = writeln!(out, "{key}={v}");
        }
        out
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse `{value}` for `{key}`")))
}
