//! Counter-based reproducible Gaussian noise.
//!
//! Every draw is a pure function of `(seed, stream, step, particle, coord)`:
//! a chain of splitmix64 finalizers produces a uniform in `(0,1)`, which is
//! mapped to a standard normal through a rational approximation of the normal
//! quantile function (Wichura's PPND16, absolute error far below `1e−9`).
//! There is no sequential generator state, so particle updates can run in any
//! order — or in parallel — and still reproduce bit-for-bit on any platform.

// Coefficients are transcribed at the reference precision.
#![allow(clippy::excessive_precision)]

/// Logical sub-streams of one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// Initial particle placement.
    Init = 1,
    /// Per-step Euler–Maruyama increments.
    Step = 2,
}

/// Deterministic noise source keyed by a 64-bit seed.
#[derive(Debug, Clone, Copy)]
pub struct NoiseSource {
    seed: u64,
}

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
fn absorb(h: u64, w: u64) -> u64 {
    mix(h.wrapping_add(GAMMA).wrapping_add(w))
}

impl NoiseSource {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    #[inline]
    fn word(&self, stream: Stream, step: u64, particle: u64, coord: u64) -> u64 {
        let mut h = mix(self.seed ^ GAMMA);
        h = absorb(h, stream as u64);
        h = absorb(h, step);
        h = absorb(h, particle);
        absorb(h, coord)
    }

    /// Uniform draw in the open interval `(0,1)`.
    #[inline]
    pub fn uniform(&self, stream: Stream, step: u64, particle: u64, coord: u64) -> f64 {
        let bits = self.word(stream, step, particle, coord);
        ((bits >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Standard normal draw.
    #[inline]
    pub fn standard_normal(&self, stream: Stream, step: u64, particle: u64, coord: u64) -> f64 {
        normal_quantile(self.uniform(stream, step, particle, coord))
    }

    /// Fill `buf` with the standard normal vector indexed by
    /// `(stream, step, particle)`.
    pub fn normal_vector(&self, stream: Stream, step: u64, particle: u64, buf: &mut [f64]) {
        for (j, slot) in buf.iter_mut().enumerate() {
            *slot = self.standard_normal(stream, step, particle, j as u64);
        }
    }
}

/// Normal quantile function Φ⁻¹(p) for `p ∈ (0,1)`.
///
/// Rational approximation AS 241 (PPND16): three regimes split on
/// `|p − 1/2|`, each a degree-7 rational in a transformed variable. Branch
/// structure and coefficients are fixed, so results are identical across
/// platforms.
pub fn normal_quantile(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180_625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-r.ln()).sqrt();
    let value = if r <= 5.0 {
        r -= 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        r -= 5.0;
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -value
    } else {
        value
    }
}

#[inline]
fn poly(coeffs: &[f64; 8], x: f64) -> f64 {
    // Horner evaluation, highest degree first.
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

const A: [f64; 8] = [
    3.387_132_872_796_366_608e0,
    1.331_416_678_917_843_774_5e2,
    1.971_590_950_306_551_442_7e3,
    1.373_169_376_550_946_112_5e4,
    4.592_195_393_154_987_145_7e4,
    6.726_577_092_700_870_085_3e4,
    3.343_057_558_358_812_810_5e4,
    2.509_080_928_730_122_672_7e3,
];
const B: [f64; 8] = [
    1.0,
    4.231_333_070_160_091_125_2e1,
    6.871_870_074_920_579_083e2,
    5.394_196_021_424_751_107_7e3,
    2.121_379_430_158_659_586_7e4,
    3.930_789_580_009_271_061e4,
    2.872_908_573_572_194_267_4e4,
    5.226_495_278_852_854_561e3,
];
const C: [f64; 8] = [
    1.423_437_110_749_683_577_34e0,
    4.630_337_846_156_545_295_9e0,
    5.769_497_221_460_691_405_5e0,
    3.647_848_324_763_204_605_04e0,
    1.270_458_252_452_368_382_58e0,
    2.417_807_251_774_506_117_7e-1,
    2.272_384_498_926_918_458_33e-2,
    7.745_450_142_783_414_076_4e-4,
];
const D: [f64; 8] = [
    1.0,
    2.053_191_626_637_758_821_87e0,
    1.676_384_830_183_803_849_4e0,
    6.897_673_349_851_000_045_5e-1,
    1.481_039_764_274_800_745_9e-1,
    1.519_866_656_361_645_719_66e-2,
    5.475_938_084_995_344_946e-4,
    1.050_750_071_644_416_843_24e-9,
];
const E: [f64; 8] = [
    6.657_904_643_501_103_777_2e0,
    5.463_784_911_164_114_369_9e0,
    1.784_826_539_917_291_335_8e0,
    2.965_605_718_285_048_912_3e-1,
    2.653_218_952_657_612_309_3e-2,
    1.242_660_947_388_078_438_6e-3,
    2.711_555_568_743_487_578_15e-5,
    2.010_334_399_292_288_132_65e-7,
];
const F: [f64; 8] = [
    1.0,
    5.998_322_065_558_879_376_9e-1,
    1.369_298_809_227_358_053_1e-1,
    1.487_536_129_085_061_485_25e-2,
    7.868_691_311_456_132_591e-4,
    1.846_318_317_510_054_681_8e-5,
    1.421_511_758_316_445_888_7e-7,
    2.044_263_103_389_939_785_64e-15,
];
