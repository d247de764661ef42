//! Scenery and walk-increment distributions.
//!
//! Strictly stable laws are given by their exponent `exp(-|u|^b (a1 + i a2 sgn u))`
//! and sampled with the Chambers-Mallows-Stuck transformation. Lattice laws are
//! the three canonical families used by the experiments: unit-step sceneries,
//! nearest-neighbour walks, and symmetric power-law tails `P(X = ±k) ∝ k^(-1-a)`.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Result};
use crate::rng::{coin, open_unit_f64, u32_threshold, unit_f64};

/// Strictly stable law with characteristic function
/// `exp(-|u|^beta (a1 + i a2 sgn u))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableParams {
    beta: f64,
    a1: f64,
    a2: f64,
}

impl StableParams {
    pub fn new(beta: f64, a1: f64, a2: f64) -> Result<Self> {
        if !(beta > 0.0 && beta <= 2.0) {
            return Err(invalid(format!("stable index must lie in (0, 2], got {beta}")));
        }
        if !(a1 > 0.0 && a1.is_finite()) {
            return Err(invalid(format!("stable scale a1 must be positive, got {a1}")));
        }
        if !a2.is_finite() {
            return Err(invalid("stable skew a2 must be finite"));
        }
        if (beta == 2.0 || beta == 1.0) && a2 != 0.0 {
            return Err(invalid(format!("index {beta} requires a2 = 0, got {a2}")));
        }
        let bound = a1 * (PI * beta / 2.0).tan().abs();
        if a2.abs() > bound * (1.0 + 1e-12) {
            return Err(invalid(format!(
                "|a2| = {} exceeds a1 |tan(pi beta / 2)| = {bound}",
                a2.abs()
            )));
        }
        Ok(Self { beta, a1, a2 })
    }

    /// Symmetric law with exponent `a1 |u|^beta`.
    pub fn symmetric(beta: f64, a1: f64) -> Result<Self> {
        Self::new(beta, a1, 0.0)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn a1(&self) -> f64 {
        self.a1
    }

    pub fn a2(&self) -> f64 {
        self.a2
    }

    /// Scale `sigma` of the (index, skew, scale) parameterization: `sigma^beta = a1`.
    pub fn scale(&self) -> f64 {
        self.a1.powf(1.0 / self.beta)
    }

    /// Skewness in [-1, 1] of the (index, skew, scale) parameterization, whose
    /// exponent reads `sigma^beta |u|^beta (1 - i skew sgn(u) tan(pi beta / 2))`.
    pub fn skewness(&self) -> f64 {
        if self.a2 == 0.0 {
            return 0.0;
        }
        let skew = -self.a2 / (self.a1 * (PI * self.beta / 2.0).tan());
        skew.clamp(-1.0, 1.0)
    }

    /// Real and imaginary parts of the characteristic function at `u`.
    pub fn characteristic_function(&self, u: f64) -> (f64, f64) {
        let m = u.abs().powf(self.beta);
        let modulus = (-self.a1 * m).exp();
        let phase = -self.a2 * m * u.signum();
        (modulus * phase.cos(), modulus * phase.sin())
    }

    /// One variate, Chambers-Mallows-Stuck.
    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        let v = PI * (open_unit_f64(rng) - 0.5);
        let w = -open_unit_f64(rng).ln();
        let sigma = self.scale();
        if self.beta == 2.0 {
            return sigma * 2.0 * v.sin() * w.sqrt();
        }
        if self.beta == 1.0 {
            return sigma * v.tan();
        }
        let b = self.beta;
        let t = self.skewness() * (PI * b / 2.0).tan();
        let shift = t.atan() / b;
        let stretch = (1.0 + t * t).powf(1.0 / (2.0 * b));
        let x = stretch * (b * (v + shift)).sin() / v.cos().powf(1.0 / b)
            * ((v - b * (v + shift)).cos() / w).powf((1.0 - b) / b);
        sigma * x
    }
}

pub fn sample_stable<R: RngCore + ?Sized>(params: &StableParams, rng: &mut R) -> f64 {
    params.sample(rng)
}

/// Largest magnitude a power-law walk increment can take.
pub const WALK_MAGNITUDE_CAP: u64 = 1 << 40;
/// Largest magnitude a power-law scenery value can take.
pub const SCENERY_MAGNITUDE_CAP: u64 = 1 << 62;

const TABLE_LEN: usize = 1024;

/// Symmetric lattice law `P(X = ±k) = k^(-1-a) / (2 zeta(1+a))`, `k >= 1`.
///
/// Magnitudes up to `TABLE_LEN` come from an inverse CDF over a normalized
/// table; beyond it, the conditional tail is drawn from the continuous
/// Pareto law matching `∫_{k-1/2}^∞ x^(-1-a) dx`, which agrees with the lattice
/// tail to relative order `k^-2`.
#[derive(Debug, Clone)]
pub struct PowerLawLattice {
    tail_index: f64,
    cap: u64,
    cdf: Arc<[f64]>,
    norm: f64,
}

impl PowerLawLattice {
    pub fn new(tail_index: f64, cap: u64) -> Result<Self> {
        if !(tail_index > 0.0 && tail_index < 2.0) {
            return Err(invalid(format!(
                "power-law tail index must lie in (0, 2), got {tail_index}"
            )));
        }
        let s = 1.0 + tail_index;
        let mut partial = Vec::with_capacity(TABLE_LEN);
        let mut acc = 0.0;
        for k in 1..=TABLE_LEN {
            acc += (k as f64).powf(-s);
            partial.push(acc);
        }
        let norm = acc + zeta_tail(s, TABLE_LEN as u64 + 1);
        let cdf: Vec<f64> = partial.iter().map(|c| c / norm).collect();
        Ok(Self {
            tail_index,
            cap,
            cdf: cdf.into(),
            norm,
        })
    }

    pub fn tail_index(&self) -> f64 {
        self.tail_index
    }

    /// `P(|X| = k)`.
    pub fn magnitude_pmf(&self, k: u64) -> f64 {
        if k == 0 {
            return 0.0;
        }
        (k as f64).powf(-1.0 - self.tail_index) / self.norm
    }

    /// `P(|X| > t)`.
    pub fn magnitude_tail(&self, t: u64) -> f64 {
        zeta_tail(1.0 + self.tail_index, t + 1) / self.norm
    }

    pub fn sample_magnitude<R: RngCore + ?Sized>(&self, rng: &mut R) -> u64 {
        let u = unit_f64(rng);
        let head = self.cdf[TABLE_LEN - 1];
        if u < head {
            return self.cdf.partition_point(|&c| c <= u) as u64 + 1;
        }
        let v = open_unit_f64(rng);
        let k = (TABLE_LEN as f64 + 0.5) * v.powf(-1.0 / self.tail_index) + 0.5;
        if k >= self.cap as f64 {
            self.cap
        } else {
            (k as u64).max(TABLE_LEN as u64 + 1)
        }
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> i64 {
        let k = self.sample_magnitude(rng) as i64;
        if coin(rng) {
            k
        } else {
            -k
        }
    }
}

/// `sum_{k >= start} k^(-s)` by Euler-Maclaurin, `s > 1`.
/// Short display form of a parameter: `1/3` rather than `0.3333333333333333`.
pub(crate) fn param(x: f64) -> String {
    match crate::oracle::small_rational(x, 100) {
        Some((a, b)) if b > 1 && x.to_string().len() > 6 => format!("{a}/{b}"),
        _ => x.to_string(),
    }
}

pub(crate) fn zeta_tail(s: f64, start: u64) -> f64 {
    // Sum the first few terms exactly so the expansion point is large.
    const DIRECT: u64 = 64;
    let mut acc = 0.0;
    let mut k = start;
    while k < start.max(DIRECT) {
        acc += (k as f64).powf(-s);
        k += 1;
    }
    let n = k as f64;
    let p = |e: f64| n.powf(e);
    acc + p(1.0 - s) / (s - 1.0) + p(-s) / 2.0 + s * p(-s - 1.0) / 12.0
        - s * (s + 1.0) * (s + 2.0) * p(-s - 3.0) / 720.0
        + s * (s + 1.0) * (s + 2.0) * (s + 3.0) * (s + 4.0) * p(-s - 5.0) / 30240.0
}

/// A scenery draw: lattice kinds are integers, the Gaussian kind is real.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SceneryValue {
    Int(i64),
    Real(f64),
}

#[derive(Debug, Clone)]
pub enum SceneryDist {
    /// ±1 with probability 1/2 each.
    Rademacher,
    /// 0 with probability `q`, ±1 with probability `(1-q)/2` each.
    Ternary { q: f64 },
    /// `P(ξ = ±k) ∝ k^(-1-beta)`, `k >= 1`.
    SymmetricZipf(PowerLawLattice),
    /// Centered normal with standard deviation `sd`; not a lattice law.
    Gaussian { sd: f64 },
}

impl SceneryDist {
    pub fn ternary(q: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&q) {
            return Err(invalid(format!("ternary q must lie in [0, 1), got {q}")));
        }
        Ok(Self::Ternary { q })
    }

    pub fn symmetric_zipf(beta: f64) -> Result<Self> {
        Ok(Self::SymmetricZipf(PowerLawLattice::new(
            beta,
            SCENERY_MAGNITUDE_CAP,
        )?))
    }

    pub fn gaussian(sd: f64) -> Result<Self> {
        if !(sd > 0.0 && sd.is_finite()) {
            return Err(invalid(format!("gaussian sd must be positive, got {sd}")));
        }
        Ok(Self::Gaussian { sd })
    }

    /// Stable index of the domain of attraction.
    pub fn index(&self) -> f64 {
        match self {
            Self::SymmetricZipf(law) => law.tail_index(),
            _ => 2.0,
        }
    }

    pub fn is_lattice(&self) -> bool {
        !matches!(self, Self::Gaussian { .. })
    }

    /// True when every value lies in {-1, 0, 1}.
    pub fn is_unit_valued(&self) -> bool {
        matches!(self, Self::Rademacher | Self::Ternary { .. })
    }

    /// Finite support with probabilities, when there is one.
    pub fn support(&self) -> Option<Vec<(i64, f64)>> {
        match *self {
            Self::Rademacher => Some(vec![(-1, 0.5), (1, 0.5)]),
            Self::Ternary { q: 0.0 } => Some(vec![(-1, 0.5), (1, 0.5)]),
            Self::Ternary { q } => Some(vec![(-1, (1.0 - q) / 2.0), (0, q), (1, (1.0 - q) / 2.0)]),
            _ => None,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Rademacher => "rademacher".into(),
            Self::Ternary { q } => format!("ternary(q={})", param(*q)),
            Self::SymmetricZipf(law) => format!("zipf(beta={})", law.tail_index()),
            Self::Gaussian { sd } => format!("gaussian(sd={sd})"),
        }
    }

    /// Integer draw for lattice kinds.
    ///
    /// Panics on the Gaussian kind; check [`SceneryDist::is_lattice`] first.
    #[inline]
    pub fn sample_lattice<R: RngCore + ?Sized>(&self, rng: &mut R) -> i64 {
        match self {
            Self::Rademacher => {
                if coin(rng) {
                    1
                } else {
                    -1
                }
            }
            Self::Ternary { q } => {
                let u = rng.next_u32() as u64;
                if u < u32_threshold(*q) {
                    0
                } else if coin(rng) {
                    1
                } else {
                    -1
                }
            }
            Self::SymmetricZipf(law) => law.sample(rng),
            Self::Gaussian { .. } => panic!("gaussian scenery has no lattice values"),
        }
    }

    #[inline]
    pub fn sample_real<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Gaussian { sd } => {
                let z: f64 = StandardNormal.sample(&mut RngAdapter(rng));
                sd * z
            }
            _ => self.sample_lattice(rng) as f64,
        }
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> SceneryValue {
        match self {
            Self::Gaussian { .. } => SceneryValue::Real(self.sample_real(rng)),
            _ => SceneryValue::Int(self.sample_lattice(rng)),
        }
    }
}

pub fn sample_scenery_value<R: RngCore + ?Sized>(dist: &SceneryDist, rng: &mut R) -> SceneryValue {
    dist.sample(rng)
}

#[derive(Debug, Clone)]
pub enum WalkIncrementDist {
    /// ±1 with probability 1/2 each. Period 2.
    Simple,
    /// 0 with probability `p`, ±1 with probability `(1-p)/2` each.
    Lazy { p: f64 },
    /// `P(X = ±k) ∝ k^(-1-alpha)`, `k >= 1`.
    SymmetricHeavyTail(PowerLawLattice),
}

impl WalkIncrementDist {
    pub fn lazy(p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(invalid(format!("lazy p must lie in (0, 1), got {p}")));
        }
        Ok(Self::Lazy { p })
    }

    pub fn heavy_tail(alpha: f64) -> Result<Self> {
        Ok(Self::SymmetricHeavyTail(PowerLawLattice::new(
            alpha,
            WALK_MAGNITUDE_CAP,
        )?))
    }

    pub fn index(&self) -> f64 {
        match self {
            Self::SymmetricHeavyTail(law) => law.tail_index(),
            _ => 2.0,
        }
    }

    pub fn period(&self) -> u32 {
        match self {
            Self::Simple => 2,
            _ => 1,
        }
    }

    pub fn is_nearest_neighbor(&self) -> bool {
        !matches!(self, Self::SymmetricHeavyTail(_))
    }

    pub fn support(&self) -> Option<Vec<(i64, f64)>> {
        match *self {
            Self::Simple => Some(vec![(-1, 0.5), (1, 0.5)]),
            Self::Lazy { p } => Some(vec![(-1, (1.0 - p) / 2.0), (0, p), (1, (1.0 - p) / 2.0)]),
            Self::SymmetricHeavyTail(_) => None,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Simple => "simple".into(),
            Self::Lazy { p } => format!("lazy(p={})", param(*p)),
            Self::SymmetricHeavyTail(law) => format!("heavy(alpha={})", law.tail_index()),
        }
    }

    #[inline]
    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> i64 {
        match self {
            Self::Simple => {
                if coin(rng) {
                    1
                } else {
                    -1
                }
            }
            Self::Lazy { p } => {
                let u = rng.next_u32() as u64;
                if u < u32_threshold(*p) {
                    0
                } else if coin(rng) {
                    1
                } else {
                    -1
                }
            }
            Self::SymmetricHeavyTail(law) => law.sample(rng),
        }
    }
}

pub fn sample_walk_increment<R: RngCore + ?Sized>(dist: &WalkIncrementDist, rng: &mut R) -> i64 {
    dist.sample(rng)
}

/// Lets `rand_distr` samplers draw from an unsized `RngCore`.
pub(crate) struct RngAdapter<'a, R: RngCore + ?Sized>(pub &'a mut R);

impl<R: RngCore + ?Sized> RngCore for RngAdapter<'_, R> {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}
