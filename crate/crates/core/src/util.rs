//! Small shared helpers.

/// SplitMix64 finalizer. Used to derive independent RNG stream seeds from a
/// master seed plus a stream index so that parallel generation stays
/// deterministic regardless of scheduling.
pub fn mix_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// FNV-1a over a string, for deriving per-row bootstrap seeds from labels.
pub fn hash_str(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mix_seed_spreads_streams() {
        let a = mix_seed(7, 0);
        let b = mix_seed(7, 1);
        let c = mix_seed(8, 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, mix_seed(7, 0));
    }

    #[test]
    fn sigmoid_logit_roundtrip() {
        for &p in &[0.01, 0.3, 0.5, 0.97] {
            assert!((sigmoid(logit(p)) - p).abs() < 1e-12);
        }
    }
}
