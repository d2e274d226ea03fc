//! Seeded xorshift64* generator used by consoles and agents.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Xorshift64 {
    state: u64,
}

/// One splitmix64 step; spreads nearby seeds over the state space.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Xorshift64 {
    pub fn new(seed: u64) -> Self {
        let s = splitmix64(seed);
        Xorshift64 {
            state: if s == 0 { 0x2545_F491_4F6C_DD1D } else { s },
        }
    }

    /// Independent stream for the same seed, e.g. an agent next to its environment.
    pub fn stream(seed: u64, stream: u64) -> Self {
        Self::new(seed ^ splitmix64(stream.wrapping_mul(0xA24B_AED4_963E_E407)))
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.state;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.state = x;
        x.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }

    /// Uniform integer in `0..n` (multiply-shift reduction). `n` must be nonzero.
    pub fn below(&mut self, n: u32) -> u32 {
        debug_assert!(n > 0);
        ((u128::from(self.next_u64()) * u128::from(n)) >> 64) as u32
    }

    pub fn bit(&mut self) -> bool {
        self.next_u64() >> 63 == 1
    }

    pub fn state(&self) -> u64 {
        self.state
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = Xorshift64::new(7);
        let mut b = Xorshift64::new(7);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        assert_ne!(Xorshift64::new(7).next_u64(), Xorshift64::new(8).next_u64());
        assert_ne!(
            Xorshift64::stream(7, 1).next_u64(),
            Xorshift64::stream(7, 2).next_u64()
        );
    }

    #[test]
    fn below_stays_in_range() {
        let mut r = Xorshift64::new(0);
        let mut seen = [0u32; 5];
        for _ in 0..5000 {
            let v = r.below(5);
            seen[v as usize] += 1;
        }
        assert!(seen.iter().all(|&c| c > 800));
    }
}
