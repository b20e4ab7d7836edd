//! Order-independent exact summation.
//!
//! [`ExactSum`] accumulates `f64` values into a fixed-point integer register
//! wide enough to hold any finite double exactly (a "superaccumulator").
//! Integer addition commutes, so the final [`ExactSum::total`] — the exact sum
//! rounded once to nearest-even — does not depend on the order in which values
//! were added. Two consequences the encoder relies on:
//!
//! * summing any permutation of the same multiset gives bitwise-identical
//!   results (exact permutation invariance), and
//! * duplicating every addend exactly doubles the result, because
//!   `round(2x) = 2 * round(x)` for binary floats.
//!
//! For `f32` pipelines the values are widened to `f64` (exact) before
//! accumulation and the rounded `f64` total is narrowed at the call site;
//! both properties above survive the extra rounding step.

/// Number of 32-bit limbs: the f64 magnitude range spans bits 0..=2097
/// relative to 2^-1074, plus carry headroom.
const LIMBS: usize = 70;

/// Exact accumulator for finite `f64` values.
#[derive(Clone)]
pub struct ExactSum {
    /// limbs[i] holds a signed partial count of 2^(32*i - 1074) units.
    limbs: [i64; LIMBS],
    /// Touched limb range, so reset is cheap for short sums.
    lo: usize,
    hi: usize,
    adds: u32,
}

impl Default for ExactSum {
    fn default() -> Self {
        Self::new()
    }
}

impl ExactSum {
    pub fn new() -> Self {
        ExactSum {
            limbs: [0; LIMBS],
            lo: LIMBS,
            hi: 0,
            adds: 0,
        }
    }

    /// Clear back to zero, touching only the used limb range.
    pub fn reset(&mut self) {
        if self.lo <= self.hi {
            for limb in &mut self.limbs[self.lo..=self.hi] {
                *limb = 0;
            }
        }
        self.lo = LIMBS;
        self.hi = 0;
        self.adds = 0;
    }

    /// Add one value. `x` must be finite.
    pub fn add(&mut self, x: f64) {
        debug_assert!(x.is_finite(), "ExactSum::add({x})");
        if x == 0.0 {
            return;
        }
        // Each limb tolerates ~2^30 raw adds before i64 overflow could occur.
        self.adds += 1;
        assert!(self.adds < (1 << 30), "ExactSum capacity exceeded");

        let bits = x.to_bits();
        let negative = bits >> 63 == 1;
        let biased = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & 0xf_ffff_ffff_ffff;
        // Mantissa value and its bit offset relative to 2^-1074.
        let (mantissa, offset) = if biased == 0 {
            (frac, 0i64) // subnormal
        } else {
            (frac | (1 << 52), biased - 1)
        };
        let limb = (offset / 32) as usize;
        let shift = (offset % 32) as u32;
        let wide = (mantissa as u128) << shift; // up to 84 bits
        let parts = [
            (wide & 0xffff_ffff) as i64,
            ((wide >> 32) & 0xffff_ffff) as i64,
            ((wide >> 64) & 0xffff_ffff) as i64,
        ];
        for (j, &p) in parts.iter().enumerate() {
            if p != 0 {
                if negative {
                    self.limbs[limb + j] -= p;
                } else {
                    self.limbs[limb + j] += p;
                }
            }
        }
        self.lo = self.lo.min(limb);
        self.hi = self.hi.max(limb + 2);
    }

    /// The exact sum, rounded once to the nearest `f64` (ties to even).
    pub fn total(&self) -> f64 {
        // Carry-propagate into canonical base-2^32 magnitude + sign.
        let mut mag = [0u32; LIMBS];
        let mut carry: i64 = 0;
        for i in 0..LIMBS {
            let v = self.limbs[i] + carry;
            mag[i] = (v as u64 & 0xffff_ffff) as u32;
            carry = v >> 32; // arithmetic shift: exact floor division by 2^32
        }
        let negative = carry < 0;
        debug_assert!(carry == 0 || carry == -1, "carry {carry}");
        if negative {
            // Two's complement negation to get the magnitude.
            let mut borrow_done = false;
            for limb in mag.iter_mut() {
                *limb = !*limb;
                if !borrow_done {
                    let (v, overflow) = limb.overflowing_add(1);
                    *limb = v;
                    borrow_done = !overflow;
                }
            }
        }

        let Some(top) = (0..LIMBS).rev().find(|&i| mag[i] != 0) else {
            return 0.0;
        };
        // Highest set bit position, in 2^-1074 units.
        let msb = top * 32 + (31 - mag[top].leading_zeros() as usize);

        let bit = |idx: usize| -> u64 { ((mag[idx / 32] >> (idx % 32)) & 1) as u64 };
        let sign = if negative { -1.0 } else { 1.0 };

        if msb <= 52 {
            // Fits in a mantissa: exact, possibly subnormal.
            let mut m: u64 = 0;
            for i in (0..=msb).rev() {
                m = (m << 1) | bit(i);
            }
            return sign * (m as f64) * f64::exp2(-1074.0);
        }

        // Extract the top 53 bits, then round to nearest-even on the rest.
        let mut m: u64 = 0;
        for i in ((msb - 52)..=msb).rev() {
            m = (m << 1) | bit(i);
        }
        let guard = bit(msb - 53) == 1;
        let sticky = (0..(msb - 53)).any(|i| bit(i) == 1);
        let mut exp = msb as i32 - 52;
        if guard && (sticky || m & 1 == 1) {
            m += 1;
            if m == 1 << 53 {
                m >>= 1;
                exp += 1;
            }
        }
        sign * (m as f64) * f64::exp2((exp - 1074) as f64)
    }
}

/// Convenience: exact sum of a slice.
pub fn exact_sum(values: &[f64]) -> f64 {
    let mut acc = ExactSum::new();
    for &v in values {
        acc.add(v);
    }
    acc.total()
}
