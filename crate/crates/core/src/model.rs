//! Domain types shared by the planner, the scheduler and the simulator.
//!
//! Token counts are integers, but the shared prefill length `L` is a real
//! decision variable, so token splits are carried as `f64`.

use crate::error::{Error, Result};

/// Handover state of one UE: trigger time and decoded-token count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UeContext {
    pub id: usize,
    /// Handover trigger time, seconds.
    pub tau: f64,
    /// Tokens decoded up to the trigger time.
    pub c_tokens: u64,
}

impl UeContext {
    pub fn new(id: usize, tau: f64, c_tokens: u64) -> Result<Self> {
        if !(tau.is_finite() && tau >= 0.0) {
            return Err(Error::invalid("tau", format!("{tau} must be finite and >= 0")));
        }
        Ok(Self { id, tau, c_tokens })
    }

    pub fn c(&self) -> f64 {
        self.c_tokens as f64
    }
}

/// A set of UEs handing over to the same target BS, sorted by trigger time
/// (ties broken by id).
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    ues: Vec<UeContext>,
    c_max: u64,
}

impl Instance {
    pub fn new(mut ues: Vec<UeContext>) -> Result<Self> {
        if ues.is_empty() {
            return Err(Error::invalid("instance", "at least one UE is required"));
        }
        ues.sort_by(|x, y| x.tau.total_cmp(&y.tau).then(x.id.cmp(&y.id)));
        let mut ids: Vec<usize> = ues.iter().map(|u| u.id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != ues.len() {
            return Err(Error::invalid("instance", "duplicate UE id"));
        }
        let c_max = ues.iter().map(|u| u.c_tokens).max().unwrap_or(0);
        Ok(Self { ues, c_max })
    }

    /// Builds an instance from `(tau, c_tokens)` pairs, assigning ids by position.
    pub fn from_pairs(pairs: &[(f64, u64)]) -> Result<Self> {
        let ues = pairs
            .iter()
            .enumerate()
            .map(|(id, &(tau, c))| UeContext::new(id, tau, c))
            .collect::<Result<Vec<_>>>()?;
        Self::new(ues)
    }

    pub fn ues(&self) -> &[UeContext] {
        &self.ues
    }

    pub fn len(&self) -> usize {
        self.ues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ues.is_empty()
    }

    pub fn c_max(&self) -> u64 {
        self.c_max
    }

    /// Earliest trigger time, τ_1.
    pub fn first_trigger(&self) -> f64 {
        self.ues[0].tau
    }

    /// Latest trigger time, τ_K.
    pub fn last_trigger(&self) -> f64 {
        self.ues[self.ues.len() - 1].tau
    }

    /// Position of the UE with the given id in the sorted order.
    pub fn position_of(&self, id: usize) -> Option<usize> {
        self.ues.iter().position(|u| u.id == id)
    }

    /// Checks `l ∈ [0, C_max]`.
    pub fn check_prefill_length(&self, l: f64) -> Result<()> {
        let c_max = self.c_max as f64;
        if l.is_nan() || l < 0.0 || l > c_max {
            return Err(Error::PrefillLengthOutOfRange { l, c_max });
        }
        Ok(())
    }
}

/// Affine batch-prefill delay `p(L) = a·L + b`, started on a cycle of length `t_cycle`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrefillProfile {
    a: f64,
    b: f64,
    t_cycle: f64,
}

impl PrefillProfile {
    pub fn new(a: f64, b: f64, t_cycle: f64) -> Result<Self> {
        if !(a.is_finite() && a >= 0.0) {
            return Err(Error::invalid("a", format!("{a} must be finite and >= 0")));
        }
        if !(b.is_finite() && b >= 0.0) {
            return Err(Error::invalid("b", format!("{b} must be finite and >= 0")));
        }
        if !(t_cycle.is_finite() && t_cycle > 0.0) {
            return Err(Error::invalid("t_cycle", format!("{t_cycle} must be > 0")));
        }
        Ok(Self { a, b, t_cycle })
    }

    /// Seconds per prefilled token.
    pub fn a(&self) -> f64 {
        self.a
    }

    /// Fixed per-batch overhead, seconds.
    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn t_cycle(&self) -> f64 {
        self.t_cycle
    }

    /// Batch prefill duration for a shared length `l`.
    pub fn delay(&self, l: f64) -> f64 {
        self.a * l + self.b
    }
}

/// Transformer shape that determines the KV payload per token.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KvCacheSpec {
    pub n_layers: u32,
    pub n_kv_heads: u32,
    pub head_dim: u32,
    pub precision_bits: u32,
}

impl KvCacheSpec {
    pub fn new(n_layers: u32, n_kv_heads: u32, head_dim: u32, precision_bits: u32) -> Result<Self> {
        for (name, v) in [
            ("n_layers", n_layers),
            ("n_kv_heads", n_kv_heads),
            ("head_dim", head_dim),
            ("precision_bits", precision_bits),
        ] {
            if v == 0 {
                return Err(Error::invalid(name, "must be > 0"));
            }
        }
        Ok(Self {
            n_layers,
            n_kv_heads,
            head_dim,
            precision_bits,
        })
    }

    pub fn bits_per_token(&self) -> Result<u128> {
        kv_bits_per_token(self)
    }
}

/// `2 · N_layers · N_kv · d_head · q` bits; the factor 2 counts keys and values.
pub fn kv_bits_per_token(spec: &KvCacheSpec) -> Result<u128> {
    [spec.n_layers, spec.n_kv_heads, spec.head_dim, spec.precision_bits]
        .into_iter()
        .try_fold(2u128, |acc, v| acc.checked_mul(u128::from(v)))
        .ok_or(Error::KvSizeOverflow)
}

/// Inter-BS backhaul: raw capacity and the KV payload it carries per token.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackhaulLink {
    capacity_bps: f64,
    kv_bits_per_token: f64,
}

impl BackhaulLink {
    pub fn new(capacity_bps: f64, kv_bits_per_token: f64) -> Result<Self> {
        if !(capacity_bps.is_finite() && capacity_bps > 0.0) {
            return Err(Error::invalid("capacity_bps", format!("{capacity_bps} must be > 0")));
        }
        if !(kv_bits_per_token.is_finite() && kv_bits_per_token > 0.0) {
            return Err(Error::invalid(
                "kv_bits_per_token",
                format!("{kv_bits_per_token} must be > 0"),
            ));
        }
        let rate = capacity_bps / kv_bits_per_token;
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::invalid("backhaul", format!("normalized rate {rate} not finite and positive")));
        }
        Ok(Self {
            capacity_bps,
            kv_bits_per_token,
        })
    }

    pub fn from_spec(capacity_bps: f64, spec: &KvCacheSpec) -> Result<Self> {
        Self::new(capacity_bps, spec.bits_per_token()? as f64)
    }

    /// A link with the given rate in tokens/s (one bit per token).
    pub fn with_token_rate(tokens_per_s: f64) -> Result<Self> {
        Self::new(tokens_per_s, 1.0)
    }

    pub fn capacity_bps(&self) -> f64 {
        self.capacity_bps
    }

    pub fn kv_bits_per_token(&self) -> f64 {
        self.kv_bits_per_token
    }

    pub fn normalized_rate(&self) -> f64 {
        normalized_rate(self)
    }
}

/// Backhaul capacity in tokens/s.
pub fn normalized_rate(link: &BackhaulLink) -> f64 {
    link.capacity_bps / link.kv_bits_per_token
}

/// How one UE's context is split between batch prefill and backhaul transfer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TokenSplit {
    pub n_prefill: f64,
    pub n_transfer: f64,
}

pub fn token_split(ue: &UeContext, l: f64) -> Result<TokenSplit> {
    if l.is_nan() || l < 0.0 {
        return Err(Error::invalid("prefill length", format!("{l} must be >= 0")));
    }
    let c = ue.c();
    Ok(TokenSplit {
        n_prefill: c.min(l),
        n_transfer: (c - l).max(0.0),
    })
}

/// Remaining tokens for the backhaul, `(C - L)^+`, without validation.
pub(crate) fn transfer_tokens(c_tokens: u64, l: f64) -> f64 {
    (c_tokens as f64 - l).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ue(c: u64) -> UeContext {
        UeContext::new(0, 0.0, c).unwrap()
    }

    #[test]
    fn split_boundaries() {
        let s = token_split(&ue(3072), 0.0).unwrap();
        assert_eq!((s.n_prefill, s.n_transfer), (0.0, 3072.0));
        let s = token_split(&ue(3072), 3072.0).unwrap();
        assert_eq!((s.n_prefill, s.n_transfer), (3072.0, 0.0));
        let s = token_split(&ue(1500), 2000.0).unwrap();
        assert_eq!((s.n_prefill, s.n_transfer), (1500.0, 0.0));
    }

    #[test]
    fn split_rejects_negative_length() {
        assert!(token_split(&ue(10), -1.0).is_err());
        assert!(token_split(&ue(10), f64::NAN).is_err());
    }

    #[test]
    fn normalized_rate_values() {
        let link = BackhaulLink::new(4.5e9, 458_752.0).unwrap();
        let r = link.normalized_rate();
        assert!((r * 458_752.0 - 4.5e9).abs() < 1e-3);
        assert!((r - 9809.2215).abs() < 1e-3);
        assert_eq!(BackhaulLink::new(458_752.0, 458_752.0).unwrap().normalized_rate(), 1.0);
        let r2 = BackhaulLink::new(2e9, 458_752.0).unwrap().normalized_rate();
        assert!((r2 - 4359.6540).abs() < 1e-3);
    }

    #[test]
    fn link_rejects_bad_values() {
        assert!(BackhaulLink::new(0.0, 1.0).is_err());
        assert!(BackhaulLink::new(1.0, 0.0).is_err());
        assert!(BackhaulLink::new(f64::INFINITY, 1.0).is_err());
        assert!(BackhaulLink::new(1e300, 1e-300).is_err());
    }

    #[test]
    fn kv_size_anchor() {
        let spec = KvCacheSpec::new(28, 4, 128, 16).unwrap();
        let bits = kv_bits_per_token(&spec).unwrap();
        assert_eq!(bits, 458_752);
        let megabytes = (bits * 3072) as f64 / 8.0 / 1e6;
        assert!((megabytes - 176.16).abs() < 0.01);
        assert_eq!(kv_bits_per_token(&KvCacheSpec::new(1, 1, 1, 1).unwrap()).unwrap(), 2);
    }

    #[test]
    fn kv_spec_rejects_zero_and_overflow() {
        assert!(KvCacheSpec::new(0, 1, 1, 1).is_err());
        let huge = KvCacheSpec::new(u32::MAX, u32::MAX, u32::MAX, u32::MAX).unwrap();
        assert!(matches!(kv_bits_per_token(&huge), Err(Error::KvSizeOverflow)));
    }

    #[test]
    fn instance_sorts_by_tau_then_id() {
        let ues = vec![
            UeContext::new(2, 1.2, 10).unwrap(),
            UeContext::new(1, 1.0, 30).unwrap(),
            UeContext::new(0, 1.2, 20).unwrap(),
        ];
        let inst = Instance::new(ues).unwrap();
        let ids: Vec<usize> = inst.ues().iter().map(|u| u.id).collect();
        assert_eq!(ids, vec![1, 0, 2]);
        assert_eq!(inst.c_max(), 30);
        assert_eq!(inst.first_trigger(), 1.0);
        assert_eq!(inst.last_trigger(), 1.2);
    }

    #[test]
    fn instance_rejects_empty_and_duplicates() {
        assert!(Instance::new(vec![]).is_err());
        let dup = vec![UeContext::new(0, 0.0, 1).unwrap(), UeContext::new(0, 1.0, 1).unwrap()];
        assert!(Instance::new(dup).is_err());
        assert!(UeContext::new(0, -0.1, 1).is_err());
    }

    #[test]
    fn prefill_profile_validation() {
        assert!(PrefillProfile::new(-1.0, 0.0, 0.01).is_err());
        assert!(PrefillProfile::new(0.0, 0.0, 0.0).is_err());
        let p = PrefillProfile::new(1e-4, 2e-3, 0.01).unwrap();
        assert!((p.delay(1000.0) - 0.102).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn split_sums_and_is_monotone(c in 0u64..10_000, l1 in 0.0f64..12_000.0, dl in 0.0f64..2_000.0) {
            let u = ue(c);
            let s1 = token_split(&u, l1).unwrap();
            let s2 = token_split(&u, l1 + dl).unwrap();
            prop_assert!(s1.n_prefill >= 0.0 && s1.n_transfer >= 0.0);
            prop_assert!((s1.n_prefill + s1.n_transfer - c as f64).abs() < 1e-9);
            prop_assert!(s1.n_prefill <= l1);
            prop_assert!(s2.n_prefill >= s1.n_prefill);
            prop_assert!(s2.n_transfer <= s1.n_transfer);
        }

        #[test]
        fn kv_size_is_multiplicative(n in 1u32..100, h in 1u32..64, d in 1u32..512, q in 1u32..64, which in 0usize..4) {
            let base = KvCacheSpec::new(n, h, d, q).unwrap();
            let mut fields = [n, h, d, q];
            fields[which] *= 2;
            let doubled = KvCacheSpec::new(fields[0], fields[1], fields[2], fields[3]).unwrap();
            prop_assert_eq!(doubled.bits_per_token().unwrap(), 2 * base.bits_per_token().unwrap());
        }
    }
}
