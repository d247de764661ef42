//! Exact small-`n` values by exhaustive enumeration and dynamic programming.
//!
//! Enumeration walks a tree whose edges are walk steps; when a step lands on
//! a site not seen before, the tree also branches over that site's scenery
//! value (or the line's orientation for the MdM walk). Prefix quantities are
//! accumulated at every depth, so one pass yields all `k <= n`.
//!
//! When every probability is a rational with a small denominator, weights are
//! integer numerators over the common denominator `(W_walk W_site)^k` at depth
//! `k` and results are exact rationals. Otherwise the same enumeration runs in
//! floating point.

use std::fmt;

use num_rational::Ratio;

use crate::error::{invalid, Error, Result};
use crate::samplers::{SceneryDist, WalkIncrementDist};

/// Largest horizon accepted by the enumerators.
pub const MAX_ENUMERATION_N: usize = 12;
pub const MAX_MDM_ENUMERATION_N: usize = 12;
pub const DEFAULT_BUDGET: u128 = 2_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Quantity {
    /// `E[R_k]`, distinct values of `Z_0..Z_k`.
    MeanRange,
    /// `P(T_0 > k)`.
    Survival,
    /// `E[V_k]` of the walk.
    MeanSelfIntersections,
    /// `P(S_k = 0)`.
    WalkReturn,
    /// `E[R^(1)_k]` of the MdM first coordinate.
    MeanRange1,
    /// `P(T^(1)_0 > k)`.
    Survival1,
    /// `P(M_k = (0, 0))`.
    MdmOrigin,
    /// `E[#{M_0..M_k}]`.
    MeanFullRange,
}

impl Quantity {
    pub fn id(&self) -> &'static str {
        match self {
            Self::MeanRange => "mean_range",
            Self::Survival => "survival",
            Self::MeanSelfIntersections => "mean_self_intersections",
            Self::WalkReturn => "walk_return",
            Self::MeanRange1 => "mean_range1",
            Self::Survival1 => "survival1",
            Self::MdmOrigin => "origin_return",
            Self::MeanFullRange => "mean_full_range",
        }
    }

    pub fn is_probability(&self) -> bool {
        matches!(self, Self::Survival | Self::WalkReturn | Self::Survival1 | Self::MdmOrigin)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExactValue {
    Rational(Ratio<u128>),
    Float(f64),
}

impl ExactValue {
    pub fn to_f64(&self) -> f64 {
        match self {
            Self::Rational(r) => *r.numer() as f64 / *r.denom() as f64,
            Self::Float(x) => *x,
        }
    }

    pub fn as_rational(&self) -> Option<Ratio<u128>> {
        match self {
            Self::Rational(r) => Some(*r),
            Self::Float(_) => None,
        }
    }
}

impl fmt::Display for ExactValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Rational(r) => write!(f, "{r}"),
            Self::Float(x) => write!(f, "{x}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arithmetic {
    Rational,
    /// Some probability had no small-denominator rational form.
    Float,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactRow {
    pub quantity: Quantity,
    pub n: u64,
    pub value: ExactValue,
}

#[derive(Debug, Clone)]
pub struct ExactTable {
    pub label: String,
    pub n: u64,
    pub arithmetic: Arithmetic,
    /// Number of complete configurations enumerated.
    pub enumeration_size: u128,
    /// Largest deviation of a depth's total weight from 1.
    pub normalization_error: f64,
    pub rows: Vec<ExactRow>,
}

impl ExactTable {
    pub fn get(&self, quantity: Quantity, n: u64) -> Option<ExactValue> {
        self.rows
            .iter()
            .find(|r| r.quantity == quantity && r.n == n)
            .map(|r| r.value)
    }

    pub fn value(&self, quantity: Quantity, n: u64) -> f64 {
        self.get(quantity, n)
            .unwrap_or_else(|| panic!("{} at n={n} not in table", quantity.id()))
            .to_f64()
    }
}

/// Rational `a / b` with `b <= max_den` equal to `x` up to rounding, if any.
pub(crate) fn small_rational(x: f64, max_den: u64) -> Option<(u64, u64)> {
    if !(0.0..=1.0).contains(&x) {
        return None;
    }
    // Continued-fraction convergents.
    let (mut h0, mut h1) = (0u64, 1u64);
    let (mut k0, mut k1) = (1u64, 0u64);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        let ai = a as u64;
        let h2 = ai.checked_mul(h1)?.checked_add(h0)?;
        let k2 = ai.checked_mul(k1)?.checked_add(k0)?;
        if k2 > max_den {
            return None;
        }
        if (h2 as f64 / k2 as f64 - x).abs() <= 4.0 * f64::EPSILON * x.max(1e-300) {
            return Some((h2, k2));
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let frac = r - a;
        if frac <= 0.0 {
            return None;
        }
        r = 1.0 / frac;
    }
    None
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// A finite law as integer numerators over a common denominator.
#[derive(Debug, Clone)]
struct IntLaw {
    values: Vec<i64>,
    numerators: Vec<u128>,
    denom: u128,
}

fn int_law(support: &[(i64, f64)]) -> Option<IntLaw> {
    let fracs: Vec<(u64, u64)> = support
        .iter()
        .map(|&(_, p)| small_rational(p, 10_000))
        .collect::<Option<_>>()?;
    let denom = fracs
        .iter()
        .fold(1u128, |l, &(_, b)| l / gcd(l, b as u128) * b as u128);
    let numerators: Vec<u128> = fracs.iter().map(|&(a, b)| a as u128 * (denom / b as u128)).collect();
    if numerators.iter().sum::<u128>() != denom {
        return None;
    }
    Some(IntLaw {
        values: support.iter().map(|s| s.0).collect(),
        numerators,
        denom,
    })
}

/// Weight arithmetic shared by the exact and floating-point enumerations.
trait Weight: Copy + std::ops::Add<Output = Self> + std::ops::Mul<Output = Self> {
    fn zero() -> Self;
    fn from_u64(x: u64) -> Self;
}

impl Weight for u128 {
    fn zero() -> Self {
        0
    }
    fn from_u64(x: u64) -> Self {
        x as u128
    }
}

impl Weight for f64 {
    fn zero() -> Self {
        0.0
    }
    fn from_u64(x: u64) -> Self {
        x as f64
    }
}

/// Prefix sums accumulated at every depth `k = 1..=n`.
#[derive(Debug, Clone)]
struct DepthSums<W> {
    total: Vec<W>,
    sums: Vec<Vec<W>>,
}

impl<W: Weight> DepthSums<W> {
    fn new(n: usize, quantities: usize) -> Self {
        Self {
            total: vec![W::zero(); n + 1],
            sums: vec![vec![W::zero(); n + 1]; quantities],
        }
    }
}

struct RwrsEnumerator<'a, W> {
    n: usize,
    walk: &'a [(i64, W)],
    scenery: &'a [(i64, W)],
    /// `pads[j]` lifts a depth-`k` weight with `k - j` materialized sites to the
    /// common denominator.
    pads: Vec<W>,
    /// (site, value, local time)
    sites: Vec<(i64, i64, u64)>,
    sums: DepthSums<W>,
}

const RANGE: usize = 0;
const SURVIVE: usize = 1;
const SELF_INT: usize = 2;

impl<W: Weight> RwrsEnumerator<'_, W> {
    fn record(&mut self, k: usize, weight: W, mask: u64, alive: bool, v: u64) {
        let w = weight * self.pads[k - self.sites.len()];
        self.sums.total[k] = self.sums.total[k] + w;
        let s = &mut self.sums.sums;
        s[RANGE][k] = s[RANGE][k] + w * W::from_u64(mask.count_ones() as u64);
        if alive {
            s[SURVIVE][k] = s[SURVIVE][k] + w;
        }
        s[SELF_INT][k] = s[SELF_INT][k] + w * W::from_u64(v);
    }

    #[allow(clippy::too_many_arguments)]
    fn descend(&mut self, k: usize, pos: i64, z: i64, mask: u64, alive: bool, v: u64, weight: W) {
        if k == self.n {
            return;
        }
        let offset = self.n as i64;
        for wi in 0..self.walk.len() {
            let (dx, ww) = self.walk[wi];
            let next = pos + dx;
            let w1 = weight * ww;
            if let Some(i) = self.sites.iter().position(|s| s.0 == next) {
                let (_, val, count) = self.sites[i];
                let z2 = z + val;
                let mask2 = mask | 1 << (z2 + offset);
                let alive2 = alive && z2 != 0;
                let v2 = v + 2 * count + 1;
                self.sites[i].2 += 1;
                self.record(k + 1, w1, mask2, alive2, v2);
                self.descend(k + 1, next, z2, mask2, alive2, v2, w1);
                self.sites[i].2 -= 1;
            } else {
                for si in 0..self.scenery.len() {
                    let (val, ws) = self.scenery[si];
                    let z2 = z + val;
                    let mask2 = mask | 1 << (z2 + offset);
                    let alive2 = alive && z2 != 0;
                    let w2 = w1 * ws;
                    self.sites.push((next, val, 1));
                    self.record(k + 1, w2, mask2, alive2, v + 1);
                    self.descend(k + 1, next, z2, mask2, alive2, v + 1, w2);
                    self.sites.pop();
                }
            }
        }
    }
}

/// Number of complete (walk path, scenery on visited sites) configurations.
fn count_rwrs_configurations(walk: &[i64], scenery_size: u128, n: usize) -> u128 {
    fn go(walk: &[i64], s: u128, n: usize, k: usize, pos: i64, visited: &mut Vec<i64>) -> u128 {
        if k == n {
            return s.pow(visited.len() as u32);
        }
        let mut total = 0u128;
        for &dx in walk {
            let p = pos + dx;
            if visited.contains(&p) {
                total += go(walk, s, n, k + 1, p, visited);
            } else {
                visited.push(p);
                total += go(walk, s, n, k + 1, p, visited);
                visited.pop();
            }
        }
        total
    }
    go(walk, scenery_size, n, 0, 0, &mut Vec::new())
}

fn finish_rows<W: Weight>(
    sums: &DepthSums<W>,
    quantities: &[Quantity],
    to_value: impl Fn(W, usize) -> ExactValue,
    skip: impl Fn(Quantity, usize) -> bool,
) -> Vec<ExactRow> {
    let n = sums.total.len() - 1;
    let mut rows = Vec::new();
    for (qi, &q) in quantities.iter().enumerate() {
        for k in 1..=n {
            if skip(q, k) {
                continue;
            }
            rows.push(ExactRow {
                quantity: q,
                n: k as u64,
                value: to_value(sums.sums[qi][k], k),
            });
        }
    }
    rows
}

/// Exact `E[R_k]`, `P(T_0 > k)` and `E[V_k]` for `k = 1..=n`.
pub fn exact_rwrs(n: usize, walk: &WalkIncrementDist, scenery: &SceneryDist, budget: u128) -> Result<ExactTable> {
    if n == 0 || n > MAX_ENUMERATION_N {
        return Err(invalid(format!("exact enumeration needs 1 <= n <= {MAX_ENUMERATION_N}, got {n}")));
    }
    let walk_support = walk
        .support()
        .ok_or_else(|| Error::Unsupported(format!("{} walk has infinite support", walk.label())))?;
    let scenery_support = scenery
        .support()
        .ok_or_else(|| Error::Unsupported(format!("{} scenery has infinite support", scenery.label())))?;
    let steps: Vec<i64> = walk_support.iter().map(|s| s.0).collect();
    let size = count_rwrs_configurations(&steps, scenery_support.len() as u128, n);
    if size > budget {
        return Err(Error::BudgetExceeded { needed: size, budget });
    }
    let label = format!("rwrs[{} walk, {} scenery]", walk.label(), scenery.label());
    let quantities = [Quantity::MeanRange, Quantity::Survival, Quantity::MeanSelfIntersections];

    let exact = match (int_law(&walk_support), int_law(&scenery_support)) {
        (Some(w), Some(s)) => {
            let unit = w.denom * s.denom;
            let fits = unit
                .checked_pow(n as u32)
                .and_then(|d| d.checked_mul((n * n + n + 2) as u128))
                .is_some();
            fits.then_some((w, s))
        }
        _ => None,
    };

    let (rows, arithmetic, normalization_error) = match exact {
        Some((w, s)) => {
            let walk_w: Vec<(i64, u128)> = w.values.iter().copied().zip(w.numerators.iter().copied()).collect();
            let scen_w: Vec<(i64, u128)> = s.values.iter().copied().zip(s.numerators.iter().copied()).collect();
            let pads = (0..=n).map(|j| s.denom.pow(j as u32)).collect();
            let mut e = RwrsEnumerator {
                n,
                walk: &walk_w,
                scenery: &scen_w,
                pads,
                sites: Vec::new(),
                sums: DepthSums::new(n, 3),
            };
            e.descend(0, 0, 0, 1 << n, true, 0, 1u128);
            let denom = |k: usize| (w.denom * s.denom).pow(k as u32);
            let norm_err = (1..=n)
                .map(|k| if e.sums.total[k] == denom(k) { 0.0 } else { 1.0 })
                .fold(0.0, f64::max);
            let rows = finish_rows(
                &e.sums,
                &quantities,
                |x, k| ExactValue::Rational(Ratio::new(x, denom(k))),
                |_, _| false,
            );
            (rows, Arithmetic::Rational, norm_err)
        }
        None => {
            let pads = vec![1.0; n + 1];
            let mut e = RwrsEnumerator {
                n,
                walk: &walk_support,
                scenery: &scenery_support,
                pads,
                sites: Vec::new(),
                sums: DepthSums::new(n, 3),
            };
            e.descend(0, 0, 0, 1 << n, true, 0, 1.0);
            let norm_err = (1..=n).map(|k| (e.sums.total[k] - 1.0).abs()).fold(0.0, f64::max);
            let rows = finish_rows(&e.sums, &quantities, |x, _| ExactValue::Float(x), |_, _| false);
            (rows, Arithmetic::Float, norm_err)
        }
    };
    Ok(ExactTable {
        label,
        n: n as u64,
        arithmetic,
        enumeration_size: size,
        normalization_error,
        rows,
    })
}

struct MdmEnumerator<W> {
    n: usize,
    /// Weights of (horizontal, up, down).
    moves: [W; 3],
    orientation: W,
    pads: Vec<W>,
    lines: Vec<(i64, i64)>,
    visited: Vec<(i64, i64)>,
    sums: DepthSums<W>,
}

const R1: usize = 0;
const SURV1: usize = 1;
const ORIGIN: usize = 2;
const FULL: usize = 3;

#[derive(Clone, Copy)]
struct MdmNode {
    x: i64,
    y: i64,
    x_max: i64,
    x_min: i64,
    alive: bool,
}

impl<W: Weight> MdmEnumerator<W> {
    fn record(&mut self, k: usize, weight: W, node: MdmNode) {
        let w = weight * self.pads[k - self.lines.len()];
        self.sums.total[k] = self.sums.total[k] + w;
        let s = &mut self.sums.sums;
        s[R1][k] = s[R1][k] + w * W::from_u64((node.x_max - node.x_min + 1) as u64);
        if node.alive {
            s[SURV1][k] = s[SURV1][k] + w;
        }
        if node.x == 0 && node.y == 0 {
            s[ORIGIN][k] = s[ORIGIN][k] + w;
        }
        s[FULL][k] = s[FULL][k] + w * W::from_u64(self.visited.len() as u64);
    }

    fn step(&mut self, k: usize, node: MdmNode, weight: W) {
        let point = (node.x, node.y);
        let fresh = !self.visited.contains(&point);
        if fresh {
            self.visited.push(point);
        }
        self.record(k, weight, node);
        self.descend(k, node, weight);
        if fresh {
            self.visited.pop();
        }
    }

    fn descend(&mut self, k: usize, node: MdmNode, weight: W) {
        if k == self.n {
            return;
        }
        // horizontal
        let wh = weight * self.moves[0];
        let move_along = |node: MdmNode, eps: i64| {
            let x = node.x + eps;
            MdmNode {
                x,
                x_max: node.x_max.max(x),
                x_min: node.x_min.min(x),
                alive: node.alive && x != 0,
                ..node
            }
        };
        match self.lines.iter().find(|l| l.0 == node.y) {
            Some(&(_, eps)) => self.step(k + 1, move_along(node, eps), wh),
            None => {
                for eps in [-1i64, 1] {
                    self.lines.push((node.y, eps));
                    self.step(k + 1, move_along(node, eps), wh * self.orientation);
                    self.lines.pop();
                }
            }
        }
        for (dy, wi) in [(1i64, 1usize), (-1, 2)] {
            let next = MdmNode {
                y: node.y + dy,
                alive: node.alive && node.x != 0,
                ..node
            };
            self.step(k + 1, next, weight * self.moves[wi]);
        }
    }
}

/// Exact `P(T^(1)_0 > k)`, `E[R^(1)_k]`, `P(M_k = 0)` and `E[#{M_0..M_k}]`.
pub fn exact_mdm(n: usize, p: f64, budget: u128) -> Result<ExactTable> {
    if n == 0 || n > MAX_MDM_ENUMERATION_N {
        return Err(invalid(format!(
            "exact MdM enumeration needs 1 <= n <= {MAX_MDM_ENUMERATION_N}, got {n}"
        )));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid(format!("p must lie in (0, 1), got {p}")));
    }
    // 3^n move sequences, times at most one orientation bit per step.
    let size = 6u128.pow(n as u32);
    if size > budget {
        return Err(Error::BudgetExceeded { needed: size, budget });
    }
    let quantities = [Quantity::MeanRange1, Quantity::Survival1, Quantity::MdmOrigin, Quantity::MeanFullRange];
    let skip = |q: Quantity, k: usize| q == Quantity::MdmOrigin && k % 2 == 1;
    let start = MdmNode {
        x: 0,
        y: 0,
        x_max: 0,
        x_min: 0,
        alive: true,
    };
    let law = int_law(&[(0, p), (1, (1.0 - p) / 2.0), (-1, (1.0 - p) / 2.0)]);
    let exact = law.filter(|l| (l.denom * 2).checked_pow(n as u32).and_then(|d| d.checked_mul(4 * (n as u128 + 1))).is_some());

    let (rows, arithmetic, normalization_error) = match exact {
        Some(l) => {
            let mut e = MdmEnumerator {
                n,
                moves: [l.numerators[0], l.numerators[1], l.numerators[2]],
                orientation: 1u128,
                pads: (0..=n).map(|j| 2u128.pow(j as u32)).collect(),
                lines: Vec::new(),
                visited: vec![(0, 0)],
                sums: DepthSums::new(n, 4),
            };
            e.descend(0, start, 1u128);
            let denom = |k: usize| (l.denom * 2).pow(k as u32);
            let norm_err = (1..=n)
                .map(|k| if e.sums.total[k] == denom(k) { 0.0 } else { 1.0 })
                .fold(0.0, f64::max);
            let rows = finish_rows(&e.sums, &quantities, |x, k| ExactValue::Rational(Ratio::new(x, denom(k))), skip);
            (rows, Arithmetic::Rational, norm_err)
        }
        None => {
            let mut e = MdmEnumerator {
                n,
                moves: [p, (1.0 - p) / 2.0, (1.0 - p) / 2.0],
                orientation: 0.5,
                pads: vec![1.0; n + 1],
                lines: Vec::new(),
                visited: vec![(0, 0)],
                sums: DepthSums::new(n, 4),
            };
            e.descend(0, start, 1.0);
            let norm_err = (1..=n).map(|k| (e.sums.total[k] - 1.0).abs()).fold(0.0, f64::max);
            let rows = finish_rows(&e.sums, &quantities, |x, _| ExactValue::Float(x), skip);
            (rows, Arithmetic::Float, norm_err)
        }
    };
    Ok(ExactTable {
        label: format!("mdm[p={}]", crate::samplers::param(p)),
        n: n as u64,
        arithmetic,
        enumeration_size: size,
        normalization_error,
        rows,
    })
}

/// `P(S_k = 0)` for `k = 0..=n_max` and `E[V_n]` for `n = 0..=n_max`.
#[derive(Debug, Clone)]
pub struct ReturnProbs {
    pub p_zero: Vec<f64>,
    pub expected_v: Vec<f64>,
}

/// Exact return probabilities by iterated convolution over the reachable
/// window, then `E[V_n] = n + 2 Σ_{k=1}^{n-1} (n - k) P(S_k = 0)`.
pub fn exact_return_probs(walk: &WalkIncrementDist, n_max: usize) -> Result<ReturnProbs> {
    let support = walk
        .support()
        .ok_or_else(|| Error::Unsupported(format!("{} walk has infinite support", walk.label())))?;
    let reach = support.iter().map(|s| s.0.unsigned_abs()).max().unwrap_or(0) as usize;
    let width = 2 * reach * n_max + 1;
    let center = reach * n_max;
    let mut dist = vec![0.0f64; width];
    let mut next = vec![0.0f64; width];
    dist[center] = 1.0;
    let mut p_zero = Vec::with_capacity(n_max + 1);
    p_zero.push(1.0);
    for k in 1..=n_max {
        let span = reach * (k - 1);
        next[center - span - reach..=center + span + reach].fill(0.0);
        for i in center - span..=center + span {
            let mass = dist[i];
            if mass == 0.0 {
                continue;
            }
            for &(dx, p) in &support {
                next[(i as i64 + dx) as usize] += mass * p;
            }
        }
        std::mem::swap(&mut dist, &mut next);
        p_zero.push(dist[center]);
    }
    // Σ_{k<n} (n-k) p_k = n Σ_{k<n} p_k - Σ_{k<n} k p_k over k >= 1
    let mut expected_v = Vec::with_capacity(n_max + 1);
    let (mut s1, mut s2) = (0.0, 0.0);
    for n in 0..=n_max {
        if n >= 2 {
            let k = n - 1;
            s1 += p_zero[k];
            s2 += k as f64 * p_zero[k];
        }
        expected_v.push(n as f64 + 2.0 * (n as f64 * s1 - s2));
    }
    Ok(ReturnProbs { p_zero, expected_v })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(a: u128, b: u128) -> ExactValue {
        ExactValue::Rational(Ratio::new(a, b))
    }

    #[test]
    fn rationals_are_recovered() {
        assert_eq!(small_rational(1.0 / 3.0, 1000), Some((1, 3)));
        assert_eq!(small_rational(0.35, 1000), Some((7, 20)));
        assert_eq!(small_rational(0.5, 10), Some((1, 2)));
        assert_eq!(small_rational(std::f64::consts::FRAC_1_PI, 10_000), None);
    }

    #[test]
    fn simple_rademacher_two_steps() {
        let t = exact_rwrs(2, &WalkIncrementDist::Simple, &SceneryDist::Rademacher, DEFAULT_BUDGET).unwrap();
        assert_eq!(t.arithmetic, Arithmetic::Rational);
        assert_eq!(t.get(Quantity::MeanRange, 2), Some(r(5, 2)));
        assert_eq!(t.get(Quantity::Survival, 2), Some(r(1, 2)));
        assert_eq!(t.get(Quantity::Survival, 1), Some(r(1, 1)));
        assert_eq!(t.get(Quantity::MeanRange, 1), Some(r(2, 1)));
        // S_2 != S_1 always: V_2 = 2
        assert_eq!(t.get(Quantity::MeanSelfIntersections, 2), Some(r(2, 1)));
        assert_eq!(t.normalization_error, 0.0);
    }

    fn finite_models() -> Vec<(WalkIncrementDist, SceneryDist)> {
        let walks = [WalkIncrementDist::Simple, WalkIncrementDist::lazy(1.0 / 3.0).unwrap()];
        let sceneries = [SceneryDist::Rademacher, SceneryDist::ternary(1.0 / 3.0).unwrap()];
        walks
            .iter()
            .flat_map(|w| sceneries.iter().map(move |s| (w.clone(), s.clone())))
            .collect()
    }

    #[test]
    fn range_return_identity_is_exact() {
        for (walk, scenery) in finite_models() {
            let t = exact_rwrs(8, &walk, &scenery, DEFAULT_BUDGET).unwrap();
            assert_eq!(t.arithmetic, Arithmetic::Rational);
            let mut acc = Ratio::from_integer(1u128);
            for k in 1..=8 {
                acc += t.get(Quantity::Survival, k).unwrap().as_rational().unwrap();
                let range = t.get(Quantity::MeanRange, k).unwrap().as_rational().unwrap();
                assert_eq!(range, acc, "{} k={k}", t.label);
            }
        }
    }

    #[test]
    fn float_mode_agrees_with_rational_mode() {
        // 1/pi has no small-denominator form, so this runs in floating point.
        let p = std::f64::consts::FRAC_1_PI;
        let t = exact_rwrs(6, &WalkIncrementDist::lazy(p).unwrap(), &SceneryDist::Rademacher, DEFAULT_BUDGET).unwrap();
        assert_eq!(t.arithmetic, Arithmetic::Float);
        assert!(t.normalization_error < 1e-12);
        let mut acc = 1.0;
        for k in 1..=6 {
            acc += t.value(Quantity::Survival, k);
            assert!((t.value(Quantity::MeanRange, k) - acc).abs() < 1e-12);
        }
        let t2 = exact_rwrs(6, &WalkIncrementDist::lazy(0.25).unwrap(), &SceneryDist::Rademacher, DEFAULT_BUDGET).unwrap();
        assert_eq!(t2.arithmetic, Arithmetic::Rational);
    }

    #[test]
    fn self_intersections_match_convolution() {
        for walk in [WalkIncrementDist::Simple, WalkIncrementDist::lazy(1.0 / 3.0).unwrap()] {
            let t = exact_rwrs(8, &walk, &SceneryDist::Rademacher, DEFAULT_BUDGET).unwrap();
            let dp = exact_return_probs(&walk, 8).unwrap();
            for k in 1..=8u64 {
                let a = t.value(Quantity::MeanSelfIntersections, k);
                let b = dp.expected_v[k as usize];
                assert!((a - b).abs() < 1e-12, "{} k={k}: {a} vs {b}", walk.label());
            }
        }
    }

    #[test]
    fn return_probabilities() {
        let dp = exact_return_probs(&WalkIncrementDist::Simple, 6).unwrap();
        assert_eq!(dp.p_zero[1], 0.0);
        assert_eq!(dp.p_zero[2], 0.5);
        assert_eq!(dp.p_zero[4], 6.0 / 16.0);
        assert_eq!(dp.expected_v[2], 2.0);
        let lazy = exact_return_probs(&WalkIncrementDist::lazy(1.0 / 3.0).unwrap(), 3).unwrap();
        assert!((lazy.p_zero[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn mdm_small_times() {
        let t = exact_mdm(6, 1.0 / 3.0, DEFAULT_BUDGET).unwrap();
        assert_eq!(t.arithmetic, Arithmetic::Rational);
        assert_eq!(t.normalization_error, 0.0);
        assert_eq!(t.get(Quantity::Survival1, 1), Some(r(1, 3)));
        assert_eq!(t.get(Quantity::MdmOrigin, 2), Some(r(2, 9)));
        assert_eq!(t.get(Quantity::MeanRange1, 1), Some(r(4, 3)));
        assert_eq!(t.get(Quantity::MdmOrigin, 3), None);
        let mut acc = Ratio::from_integer(1u128);
        for k in 1..=6 {
            acc += t.get(Quantity::Survival1, k).unwrap().as_rational().unwrap();
            assert_eq!(t.get(Quantity::MeanRange1, k).unwrap().as_rational().unwrap(), acc);
        }
        // general p: P(M_2 = 0) = (1 - p)^2 / 2
        let p = 0.3;
        let t = exact_mdm(2, p, DEFAULT_BUDGET).unwrap();
        assert!((t.value(Quantity::MdmOrigin, 2) - (1.0 - p) * (1.0 - p) / 2.0).abs() < 1e-15);
        assert!((t.value(Quantity::Survival1, 1) - p).abs() < 1e-15);
    }

    #[test]
    fn budget_is_enforced() {
        let lazy = WalkIncrementDist::lazy(1.0 / 3.0).unwrap();
        let ternary = SceneryDist::ternary(1.0 / 3.0).unwrap();
        let err = exact_rwrs(10, &lazy, &ternary, 1_000_000).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { .. }));
        assert!(exact_rwrs(3, &WalkIncrementDist::heavy_tail(1.5).unwrap(), &SceneryDist::Rademacher, DEFAULT_BUDGET).is_err());
    }

    #[test]
    fn probabilities_lie_in_unit_interval() {
        for (walk, scenery) in finite_models() {
            let t = exact_rwrs(7, &walk, &scenery, DEFAULT_BUDGET).unwrap();
            for row in &t.rows {
                if row.quantity.is_probability() {
                    let v = row.value.to_f64();
                    assert!((0.0..=1.0).contains(&v));
                }
            }
            let mut last = 1.0;
            for k in 1..=7 {
                let s = t.value(Quantity::Survival, k);
                assert!(s <= last);
                last = s;
            }
        }
    }
}
