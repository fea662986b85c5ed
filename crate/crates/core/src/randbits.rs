//! The budgeted randomness resource: a finite bit string turned into
//! discretized standard Gaussians with exact accounting.
//!
//! A Gaussian at precision `t` reads `t` bits MSB-first as an integer
//! `k in [0, 2^t)` and returns the inverse normal CDF at the cell midpoint
//! `u = (k + 1/2) / 2^t`. No rejection, no stretching: each sample costs
//! exactly `t` bits.

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::special::inverse_normal_cdf;

/// A finite bit string read front to back.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitStream {
    bytes: Vec<u8>,
    len: u64,
    cursor: u64,
}

impl BitStream {
    /// All bits of `raw`, most significant bit of each byte first.
    pub fn from_bytes(raw: impl Into<Vec<u8>>) -> Self {
        let bytes = raw.into();
        let len = bytes.len() as u64 * 8;
        Self {
            bytes,
            len,
            cursor: 0,
        }
    }

    /// The first `bits` bits of `raw`.
    pub fn from_bytes_truncated(raw: impl Into<Vec<u8>>, bits: u64) -> Result<Self> {
        Self::from_bytes(raw).truncated(bits)
    }

    /// Keeps only the first `bits` bits.
    pub fn truncated(mut self, bits: u64) -> Result<Self> {
        if bits > self.len || bits < self.cursor {
            return Err(Error::domain(format!(
                "cannot take {bits} bits from a {}-bit seed",
                self.len
            )));
        }
        self.len = bits;
        Ok(self)
    }

    /// Parses a hexadecimal seed (whitespace ignored).
    pub fn from_hex(hex: &str) -> Result<Self> {
        let digits: Vec<u8> = hex.bytes().filter(|c| !c.is_ascii_whitespace()).collect();
        if !digits.len().is_multiple_of(2) {
            return Err(Error::domain("hex seed has an odd number of digits"));
        }
        let nibble = |c: u8| -> Result<u8> {
            (c as char)
                .to_digit(16)
                .map(|d| d as u8)
                .ok_or_else(|| Error::domain(format!("invalid hex digit {:?}", c as char)))
        };
        let bytes = digits
            .chunks_exact(2)
            .map(|p| Ok(nibble(p[0])? << 4 | nibble(p[1])?))
            .collect::<Result<Vec<u8>>>()?;
        Ok(Self::from_bytes(bytes))
    }

    /// Total number of bits in the stream.
    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Bits read so far (equal to the cursor position).
    pub fn consumed(&self) -> u64 {
        self.cursor
    }

    pub fn remaining(&self) -> u64 {
        self.len - self.cursor
    }

    /// Fails without consuming anything unless `needed` bits remain.
    pub fn ensure(&self, needed: u64, stage: &'static str) -> Result<()> {
        if self.remaining() < needed {
            return Err(Error::BudgetExhausted {
                stage,
                needed,
                available: self.remaining(),
            });
        }
        Ok(())
    }

    /// Reads `count <= 64` bits as an unsigned integer, MSB first.
    pub fn read_bits(&mut self, count: u32) -> Result<u64> {
        assert!(count <= 64);
        self.ensure(count as u64, "bit read")?;
        let mut out = 0u64;
        for _ in 0..count {
            let byte = self.bytes[(self.cursor / 8) as usize];
            let bit = (byte >> (7 - (self.cursor % 8))) & 1;
            out = (out << 1) | bit as u64;
            self.cursor += 1;
        }
        Ok(out)
    }

    /// One discretized standard Gaussian; consumes exactly `spec.bits()` bits.
    pub fn next_gaussian(&mut self, spec: GaussianSpec) -> Result<f64> {
        self.ensure(spec.bits() as u64, "gaussian sample")?;
        let k = self.read_bits(spec.bits())?;
        Ok(spec.quantile(k))
    }
}

/// Precision of a discretized Gaussian, in bits per sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GaussianSpec {
    t: u32,
}

impl GaussianSpec {
    pub const MIN_BITS: u32 = 16;
    pub const MAX_BITS: u32 = 52;

    pub fn new(t: u32) -> Result<Self> {
        if !(Self::MIN_BITS..=Self::MAX_BITS).contains(&t) {
            return Err(Error::domain(format!(
                "gaussian precision must be in [{}, {}] bits, got {t}",
                Self::MIN_BITS,
                Self::MAX_BITS
            )));
        }
        Ok(Self { t })
    }

    /// `t = clamp(ceil(log2(m n B / eps)) + 4, 16, 52)`.
    pub fn for_params(m: usize, n: usize, b: usize, eps: f64) -> Self {
        let scale = (m as f64) * (n as f64) * (b as f64) / eps;
        let t = scale.log2().ceil() + 4.0;
        let t = t.clamp(Self::MIN_BITS as f64, Self::MAX_BITS as f64) as u32;
        Self { t }
    }

    pub fn bits(&self) -> u32 {
        self.t
    }

    /// The Gaussian value for the integer `k in [0, 2^t)`.
    pub fn quantile(&self, k: u64) -> f64 {
        debug_assert!(k < 1u64 << self.t);
        // Exact: k + 1/2 needs at most t + 1 <= 53 significant bits.
        let u = (k as f64 + 0.5) * (-(self.t as f64)).exp2();
        inverse_normal_cdf(u)
    }

    /// Largest magnitude a sample can take, `|Phi^-1(2^-(t+1))|`.
    pub fn max_abs(&self) -> f64 {
        -self.quantile(0)
    }
}

/// Bits demanded by the randomness budget of the construction:
/// `ceil(max{N^gamma, (c eps gamma)^(-3/gamma)} * log2(N / (eps gamma)))`.
pub fn required_bits(n_target: u64, eps: f64, gamma: f64, c_univ: f64) -> Result<u64> {
    if n_target < 2 {
        return Err(Error::domain("required_bits needs N >= 2"));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::domain(format!("eps must lie in (0, 1), got {eps}")));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::domain(format!(
            "gamma must lie in (0, 1], got {gamma}"
        )));
    }
    if !(c_univ > 0.0 && c_univ.is_finite()) {
        return Err(Error::domain(format!(
            "c_univ must be positive, got {c_univ}"
        )));
    }
    let n = n_target as f64;
    let head = n.powf(gamma).max((c_univ * eps * gamma).powf(-3.0 / gamma));
    let bits = (head * (n / (eps * gamma)).log2()).ceil();
    if !bits.is_finite() || bits >= u64::MAX as f64 {
        return Err(Error::domain("bit budget overflows u64"));
    }
    Ok(bits as u64)
}

/// A fixed, publicly reproducible byte source: the ChaCha20 keystream
/// seeded with `index`. Used for test and benchmark seeds.
pub fn reference_seed_bytes(index: u64, len: usize) -> Vec<u8> {
    let mut rng = ChaCha20Rng::seed_from_u64(index);
    let mut out = vec![0u8; len];
    rng.fill_bytes(&mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn msb_first_bits() {
        let mut s = BitStream::from_bytes([0xFFu8]);
        assert_eq!(s.len(), 8);
        for _ in 0..8 {
            assert_eq!(s.read_bits(1).unwrap(), 1);
        }
        let mut s = BitStream::from_bytes([0x80u8]);
        let bits: Vec<u64> = (0..8).map(|_| s.read_bits(1).unwrap()).collect();
        assert_eq!(bits, vec![1, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(s.consumed(), 8);
    }

    #[test]
    fn empty_stream_errors() {
        let mut s = BitStream::from_bytes(Vec::new());
        assert!(s.is_empty());
        assert!(matches!(
            s.read_bits(1),
            Err(Error::BudgetExhausted {
                needed: 1,
                available: 0,
                ..
            })
        ));
        let spec = GaussianSpec::new(16).unwrap();
        assert!(matches!(
            s.next_gaussian(spec),
            Err(Error::BudgetExhausted {
                needed: 16,
                available: 0,
                ..
            })
        ));
    }

    #[test]
    fn exhausted_read_consumes_nothing() {
        let mut s = BitStream::from_bytes([0xAB, 0xCD, 0xEF]);
        let spec = GaussianSpec::new(16).unwrap();
        s.next_gaussian(spec).unwrap();
        assert_eq!(s.consumed(), 16);
        let err = s.next_gaussian(spec).unwrap_err();
        assert!(matches!(
            err,
            Error::BudgetExhausted {
                needed: 16,
                available: 8,
                ..
            }
        ));
        assert_eq!(s.consumed(), 16);
    }

    #[test]
    fn hex_and_truncation() {
        let s = BitStream::from_hex("ff 80").unwrap();
        assert_eq!(s, BitStream::from_bytes([0xFF, 0x80]));
        assert!(BitStream::from_hex("f").is_err());
        assert!(BitStream::from_hex("zz").is_err());
        let t = BitStream::from_bytes_truncated([0xFF, 0xFF], 15).unwrap();
        assert_eq!(t.len(), 15);
        assert!(BitStream::from_bytes_truncated([0xFF], 9).is_err());
    }

    #[test]
    fn multi_bit_reads() {
        let mut s = BitStream::from_bytes([0b1010_0101, 0b1100_0011]);
        assert_eq!(s.read_bits(4).unwrap(), 0b1010);
        assert_eq!(s.read_bits(8).unwrap(), 0b0101_1100);
        assert_eq!(s.read_bits(4).unwrap(), 0b0011);
    }

    #[test]
    fn midpoint_never_hits_half() {
        let spec = GaussianSpec::new(16).unwrap();
        let below = spec.quantile((1 << 15) - 1);
        let above = spec.quantile(1 << 15);
        assert!(below < 0.0 && above > 0.0);
        assert_eq!(below, -above);
    }

    #[test]
    fn spec_range() {
        assert!(GaussianSpec::new(15).is_err());
        assert!(GaussianSpec::new(53).is_err());
        assert_eq!(GaussianSpec::new(52).unwrap().bits(), 52);
    }

    #[test]
    fn precision_rule() {
        // 3 * 19 * 2 / 0.5 = 228 -> ceil(log2) = 8 -> 12 -> clamped to 16
        assert_eq!(GaussianSpec::for_params(3, 19, 2, 0.5).bits(), 16);
        // 2^20 / 0.5 = 2^21 -> 21 + 4
        assert_eq!(
            GaussianSpec::for_params(1 << 10, 1 << 10, 1, 0.5).bits(),
            25
        );
        assert_eq!(
            GaussianSpec::for_params(usize::MAX, usize::MAX, 1, 1e-9).bits(),
            52
        );
    }

    #[test]
    fn required_bits_domain() {
        assert!(required_bits(1, 0.5, 0.5, 1.0).is_err());
        assert!(required_bits(100, 0.0, 0.5, 1.0).is_err());
        assert!(required_bits(100, 0.5, 0.0, 1.0).is_err());
        assert!(required_bits(100, 0.5, 0.5, 0.0).is_err());
        assert!(required_bits(100, 0.5, 1.5, 1.0).is_err());
    }

    #[test]
    fn required_bits_example() {
        // max{100, 0.25^-6 = 4096} * log2(40000), frozen from a 50-digit evaluation.
        assert_eq!(required_bits(10_000, 0.5, 0.5, 1.0).unwrap(), 62_619);
    }

    #[test]
    fn required_bits_power_branch_dominates() {
        // Large c_univ makes the constant term negligible.
        let got = required_bits(1024, 0.5, 0.999_999, 1e6).unwrap();
        let want =
            (1024f64.powf(0.999_999) * (1024.0_f64 / (0.5 * 0.999_999)).log2()).ceil() as u64;
        assert_eq!(got, want);
    }

    #[test]
    fn reference_seed_is_stable() {
        assert_eq!(reference_seed_bytes(3, 64), reference_seed_bytes(3, 64));
        assert_ne!(reference_seed_bytes(3, 64), reference_seed_bytes(4, 64));
        assert_eq!(
            &reference_seed_bytes(3, 64)[..16],
            &reference_seed_bytes(3, 16)[..]
        );
    }
}
