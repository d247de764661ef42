//! Monte Carlo for the Kesten-Spitzer process `Δ_t = ∫ L_t(x) dU(x)` on `[0, 1]`.
//!
//! Two discretizations with different bias are provided:
//!
//! * `NormalizedRwrs` runs a lattice walk (simple for `α = 2`, power-law for
//!   `1 < α < 2`) over i.i.d. stable scenery with the law of `U(1)` and reports
//!   `max_k Z_k / a_m` and `min_k Z_k / a_m`.
//! * `DirectGrid` (only `α = 2`) runs a Gaussian walk with `m` steps on `[0, 1]`,
//!   bins its position into cells of width `m^(-1/2)` and integrates the
//!   occupation times against independent increments of `U` per cell.
//!
//! After rescaling both reduce to a sum of cell values along a path divided by
//! `m^δ`; they differ in the walk and in how sites are assigned.
//!
//! For `α <= 1` the limit is a multiple of `U` itself, so the estimators return
//! extrema of a discretized `U`.

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::ensemble::{run_ensemble, Merge, Moments, RunSpec};
use crate::error::{invalid, Error, Result};
use crate::mdm::k_p;
use crate::rng::{stream, StreamRole};
use crate::rwrs::norm_sequence;
use crate::samplers::{StableParams, WalkIncrementDist};
use crate::sites::SiteTable;

/// `(3/32)^(1/4)`, the factor between `E[sup Δ^(0)]` and the MdM survival
/// amplitude at `p = 1/3`.
pub fn kappa_prefactor() -> f64 {
    (3.0f64 / 32.0).powf(0.25)
}

/// `max(1 - 1/(2α), 1/2)`.
pub fn theta(alpha: f64) -> f64 {
    (1.0 - 1.0 / (2.0 * alpha)).max(0.5)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KsEstimator {
    NormalizedRwrs,
    DirectGrid,
}

impl KsEstimator {
    pub fn id(&self) -> &'static str {
        match self {
            Self::NormalizedRwrs => "normalized-rwrs",
            Self::DirectGrid => "direct-grid",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "normalized-rwrs" => Ok(Self::NormalizedRwrs),
            "direct-grid" => Ok(Self::DirectGrid),
            other => Err(Error::Config(format!(
                "unknown estimator {other:?}; expected normalized-rwrs or direct-grid"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsGrid {
    pub m: u64,
    pub alpha: f64,
    /// Law of `U(1)`.
    pub scenery: StableParams,
    pub estimator: KsEstimator,
}

impl KsGrid {
    pub fn new(m: u64, alpha: f64, scenery: StableParams, estimator: KsEstimator) -> Result<Self> {
        if m < 2 {
            return Err(invalid(format!("m must be at least 2, got {m}")));
        }
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(invalid(format!("alpha must lie in (0, 2], got {alpha}")));
        }
        if estimator == KsEstimator::DirectGrid && alpha != 2.0 {
            return Err(Error::Unsupported(format!("direct-grid needs alpha = 2, got {alpha}")));
        }
        Ok(Self {
            m,
            alpha,
            scenery,
            estimator,
        })
    }

    /// Both driving processes standard Brownian motions.
    pub fn brownian(m: u64, estimator: KsEstimator) -> Result<Self> {
        Self::new(m, 2.0, StableParams::symmetric(2.0, 0.5)?, estimator)
    }

    pub fn with_m(self, m: u64) -> Result<Self> {
        Self::new(m, self.alpha, self.scenery, self.estimator)
    }

    pub fn is_integral(&self) -> bool {
        self.alpha > 1.0
    }

    /// Normalization `a_m` of the lattice path.
    pub fn norm(&self) -> f64 {
        if self.is_integral() {
            norm_sequence(self.alpha, self.scenery.beta(), self.m).expect("validated indices")
        } else {
            (self.m as f64).powf(1.0 / self.scenery.beta())
        }
    }

    fn walk(&self) -> Result<WalkIncrementDist> {
        if self.alpha == 2.0 {
            Ok(WalkIncrementDist::Simple)
        } else {
            WalkIncrementDist::heavy_tail(self.alpha)
        }
    }
}

fn sample_site<R: RngCore>(law: &StableParams, rng: &mut R) -> f64 {
    if law.beta() == 2.0 {
        let z: f64 = StandardNormal.sample(rng);
        z * (2.0 * law.a1()).sqrt()
    } else {
        law.sample(rng)
    }
}

/// Running extrema of a path, reported at increasing checkpoints.
struct Extrema<'a> {
    checkpoints: &'a [u64],
    next: usize,
    max: f64,
    min: f64,
    out: Vec<(f64, f64)>,
}

impl<'a> Extrema<'a> {
    fn new(checkpoints: &'a [u64]) -> Self {
        Self {
            checkpoints,
            next: 0,
            max: 0.0,
            min: 0.0,
            out: Vec::with_capacity(checkpoints.len()),
        }
    }

    #[inline]
    fn push(&mut self, k: u64, z: f64) {
        self.max = self.max.max(z);
        self.min = self.min.min(z);
        while self.next < self.checkpoints.len() && self.checkpoints[self.next] == k {
            self.out.push((self.max, self.min));
            self.next += 1;
        }
    }
}

/// Raw (unnormalized) extrema of one path at every checkpoint `m` in `ms`
/// (sorted, last = horizon). Stopping at `m` consumes the same random numbers
/// as a standalone run of length `m`.
fn raw_extrema<R: RngCore>(grid: &KsGrid, ms: &[u64], rng: &mut R) -> Result<Vec<(f64, f64)>> {
    let horizon = *ms.last().expect("non-empty");
    let mut ext = Extrema::new(ms);
    if !grid.is_integral() {
        let mut u = 0.0;
        for k in 1..=horizon {
            u += sample_site(&grid.scenery, rng);
            ext.push(k, u);
        }
        return Ok(ext.out);
    }
    let mut scenery: SiteTable<f64> = SiteTable::new();
    let mut z = 0.0;
    match (grid.estimator, grid.walk()?) {
        (KsEstimator::NormalizedRwrs, WalkIncrementDist::Simple) => {
            let mut pos = 0i64;
            let mut bits = 0u64;
            for k in 1..=horizon {
                if (k - 1) % 64 == 0 {
                    bits = rng.next_u64();
                }
                pos += if bits & 1 == 1 { 1 } else { -1 };
                bits >>= 1;
                z += *scenery.get_or_insert_with(pos, || sample_site(&grid.scenery, rng));
                ext.push(k, z);
            }
        }
        (KsEstimator::NormalizedRwrs, walk) => {
            let mut pos = 0i64;
            for k in 1..=horizon {
                pos += walk.sample(rng);
                z += *scenery.get_or_insert_with(pos, || sample_site(&grid.scenery, rng));
                ext.push(k, z);
            }
        }
        (KsEstimator::DirectGrid, _) => {
            let mut y = 0.0f64;
            for k in 1..=horizon {
                let g: f64 = StandardNormal.sample(rng);
                y += g;
                let cell = y.floor() as i64;
                z += *scenery.get_or_insert_with(cell, || sample_site(&grid.scenery, rng));
                ext.push(k, z);
            }
        }
    }
    Ok(ext.out)
}

/// `(sup, inf)` of one discretized path of `Δ` on `[0, 1]`.
pub fn simulate_ks_sup<R: RngCore>(grid: &KsGrid, rng: &mut R) -> Result<(f64, f64)> {
    Ok(simulate_ks_sup_prefixes(grid, &[grid.m], rng)?[0])
}

/// `(sup, inf)` at each resolution in `ms` from one path of length `max(ms)`.
pub fn simulate_ks_sup_prefixes<R: RngCore>(grid: &KsGrid, ms: &[u64], rng: &mut R) -> Result<Vec<(f64, f64)>> {
    check_resolutions(ms)?;
    let raw = raw_extrema(grid, ms, rng)?;
    ms.iter()
        .zip(raw)
        .map(|(&m, (hi, lo))| {
            let a = grid.with_m(m)?.norm();
            Ok((hi / a, lo / a))
        })
        .collect()
}

fn check_resolutions(ms: &[u64]) -> Result<()> {
    if ms.is_empty() {
        return Err(invalid("at least one resolution m is required"));
    }
    if ms[0] < 2 || ms.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("resolutions must be strictly increasing and at least 2"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupEstimate {
    pub estimator: KsEstimator,
    pub m: u64,
    pub sup_mean: f64,
    pub sup_stderr: f64,
    pub neg_inf_mean: f64,
    pub neg_inf_stderr: f64,
    pub supminf_mean: f64,
    pub supminf_stderr: f64,
    pub replicas: u64,
    pub extrapolated: bool,
}

/// Per-resolution estimates plus the sampled `sup` and `sup - inf` values.
#[derive(Debug, Clone)]
pub struct KsRun {
    pub estimates: Vec<SupEstimate>,
    pub sup_samples: Vec<Vec<f64>>,
    pub supminf_samples: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
struct KsAcc {
    sup: Vec<Moments>,
    neg_inf: Vec<Moments>,
    width: Vec<Moments>,
    sup_samples: Vec<Vec<f64>>,
    width_samples: Vec<Vec<f64>>,
}

impl Merge for KsAcc {
    fn merge(&mut self, other: Self) {
        self.sup.merge(other.sup);
        self.neg_inf.merge(other.neg_inf);
        self.width.merge(other.width);
        for (a, b) in self.sup_samples.iter_mut().zip(other.sup_samples) {
            a.extend(b);
        }
        for (a, b) in self.width_samples.iter_mut().zip(other.width_samples) {
            a.extend(b);
        }
    }
}

/// Ensemble over replicas; each replica draws one path of length `max(ms)`.
pub fn ks_ensemble(grid: &KsGrid, ms: &[u64], run: &RunSpec) -> Result<KsRun> {
    check_resolutions(ms)?;
    let k = ms.len();
    let acc = run_ensemble(
        run,
        || KsAcc {
            sup: vec![Moments::default(); k],
            neg_inf: vec![Moments::default(); k],
            width: vec![Moments::default(); k],
            sup_samples: vec![Vec::new(); k],
            width_samples: vec![Vec::new(); k],
        },
        |replica, acc| {
            let mut rng = stream(run.seed, replica, StreamRole::Limit);
            let values = simulate_ks_sup_prefixes(grid, ms, &mut rng)?;
            for (i, (hi, lo)) in values.into_iter().enumerate() {
                acc.sup[i].push(hi);
                acc.neg_inf[i].push(-lo);
                acc.width[i].push(hi - lo);
                acc.sup_samples[i].push(hi);
                acc.width_samples[i].push(hi - lo);
            }
            Ok(())
        },
    )?;
    let estimates = ms
        .iter()
        .enumerate()
        .map(|(i, &m)| SupEstimate {
            estimator: grid.estimator,
            m,
            sup_mean: acc.sup[i].mean,
            sup_stderr: acc.sup[i].stderr(),
            neg_inf_mean: acc.neg_inf[i].mean,
            neg_inf_stderr: acc.neg_inf[i].stderr(),
            supminf_mean: acc.width[i].mean,
            supminf_stderr: acc.width[i].stderr(),
            replicas: acc.sup[i].count,
            extrapolated: false,
        })
        .collect();
    Ok(KsRun {
        estimates,
        sup_samples: acc.sup_samples,
        supminf_samples: acc.width_samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Extrapolation {
    pub value: f64,
    pub stderr: f64,
    /// Fitted `c` in `a + b m^(-c)`, when the fit was usable.
    pub exponent: Option<f64>,
    pub extrapolated: bool,
}

/// Fits `f(m) = a + b m^(-c)` exactly through three points on a geometric grid
/// `(m, value, stderr)` and returns `a`.
///
/// The fit is used only when successive differences shrink geometrically and
/// the first difference stands clear of Monte Carlo noise; otherwise the
/// finest value is returned with the last difference folded into its error.
/// The error combines propagated Monte Carlo error (treating the three values
/// as independent, which overstates it for nested paths) with half the size of
/// the correction.
pub fn extrapolate(points: &[(u64, f64, f64)]) -> Result<Extrapolation> {
    let [(m1, f1, s1), (m2, f2, s2), (m3, f3, s3)] = points else {
        return Err(invalid(format!("extrapolation needs three points, got {}", points.len())));
    };
    let r = *m2 as f64 / *m1 as f64;
    if r.is_nan() || r <= 1.0 || ((*m3 as f64 / *m2 as f64) - r).abs() > 1e-9 * r {
        return Err(invalid("extrapolation needs a geometric grid of resolutions"));
    }
    let fallback = || Extrapolation {
        value: *f3,
        stderr: (s3 * s3 + (f3 - f2) * (f3 - f2)).sqrt(),
        exponent: None,
        extrapolated: false,
    };
    let d1 = f2 - f1;
    let d2 = f3 - f2;
    let noise1 = (s1 * s1 + s2 * s2).sqrt();
    if d1 == 0.0 || d1.abs() <= 2.0 * noise1 {
        return Ok(fallback());
    }
    let q = d2 / d1;
    if !(q > 0.0 && q < 0.95) {
        return Ok(fallback());
    }
    let a = |f1: f64, f2: f64, f3: f64| {
        let (d1, d2) = (f2 - f1, f3 - f2);
        let q = d2 / d1;
        f3 + d2 * q / (1.0 - q)
    };
    let value = a(*f1, *f2, *f3);
    let mut var = 0.0;
    for (i, s) in [s1, s2, s3].into_iter().enumerate() {
        let h = s.max(1e-12) * 1e-3;
        let mut hi = [*f1, *f2, *f3];
        let mut lo = hi;
        hi[i] += h;
        lo[i] -= h;
        let grad = (a(hi[0], hi[1], hi[2]) - a(lo[0], lo[1], lo[2])) / (2.0 * h);
        var += (grad * s) * (grad * s);
    }
    let correction = value - f3;
    Ok(Extrapolation {
        value,
        stderr: (var + 0.25 * correction * correction).sqrt(),
        exponent: Some(-q.ln() / r.ln()),
        extrapolated: true,
    })
}

impl Extrapolation {
    pub fn as_estimate(&self, estimator: KsEstimator, m: u64, replicas: u64) -> SupEstimate {
        SupEstimate {
            estimator,
            m,
            sup_mean: self.value,
            sup_stderr: self.stderr,
            neg_inf_mean: self.value,
            neg_inf_stderr: self.stderr,
            supminf_mean: 2.0 * self.value,
            supminf_stderr: 2.0 * self.stderr,
            replicas,
            extrapolated: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KappaEstimate {
    /// `(3/32)^(1/4) s`.
    pub kappa: f64,
    /// `(3/2) K_p s`, the survival amplitude for general `p`.
    pub amplitude: f64,
    pub p: f64,
}

/// Constants of the MdM survival law from an estimate `s` of `E[sup Δ^(0)]`.
pub fn estimate_kappa(sup_mean: f64, p: f64) -> Result<KappaEstimate> {
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid(format!("p must lie in (0, 1), got {p}")));
    }
    Ok(KappaEstimate {
        kappa: kappa_prefactor() * sup_mean,
        amplitude: 1.5 * k_p(p) * sup_mean,
        p,
    })
}

/// Predicted limit of `(n / a_n) P(T_0 > n)` for unit-valued scenery.
pub fn rwrs_tail_constant(alpha: f64, sup_mean: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(invalid(format!("alpha must lie in (0, 2], got {alpha}")));
    }
    Ok((2.0 - 1.0 / alpha).max(1.0) * sup_mean)
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn kappa_constants() {
        let k = estimate_kappa(1.0, 1.0 / 3.0).unwrap();
        assert!((k.kappa - 0.553_35).abs() < 1e-5);
        assert!((k.amplitude - k.kappa).abs() < 1e-14);
        for s in [0.3, 1.7, 12.0] {
            let k = estimate_kappa(s, 1.0 / 3.0).unwrap();
            assert!((k.amplitude - k.kappa).abs() <= 1e-14 * s);
        }
        assert!(estimate_kappa(1.0, 1.0).is_err());
    }

    #[test]
    fn tail_constants() {
        assert_eq!(rwrs_tail_constant(2.0, 1.0).unwrap(), 1.5);
        assert_eq!(rwrs_tail_constant(1.0, 2.0).unwrap(), 2.0);
        assert_eq!(rwrs_tail_constant(2.0 / 3.0, 0.7).unwrap(), 0.7);
        assert_eq!(theta(2.0), 0.75);
        assert_eq!(theta(0.8), 0.5);
    }

    #[test]
    fn paths_start_at_zero() {
        for est in [KsEstimator::NormalizedRwrs, KsEstimator::DirectGrid] {
            let grid = KsGrid::brownian(256, est).unwrap();
            let mut rng = stream(3, 0, StreamRole::Limit);
            for _ in 0..200 {
                let (hi, lo) = simulate_ks_sup(&grid, &mut rng).unwrap();
                assert!(hi >= 0.0 && lo <= 0.0);
            }
        }
    }

    #[test]
    fn prefixes_match_standalone_runs() {
        let ms = [64, 256, 1024];
        for est in [KsEstimator::NormalizedRwrs, KsEstimator::DirectGrid] {
            let grid = KsGrid::brownian(1024, est).unwrap();
            let joint = simulate_ks_sup_prefixes(&grid, &ms, &mut stream(9, 4, StreamRole::Limit)).unwrap();
            for (i, &m) in ms.iter().enumerate() {
                let alone = simulate_ks_sup(&grid.with_m(m).unwrap(), &mut stream(9, 4, StreamRole::Limit)).unwrap();
                assert_eq!(joint[i], alone);
            }
        }
    }

    #[test]
    fn heavy_tailed_and_rescaled_paths_run() {
        let grid = KsGrid::new(512, 1.5, StableParams::symmetric(1.5, 1.0).unwrap(), KsEstimator::NormalizedRwrs).unwrap();
        let (hi, lo) = simulate_ks_sup(&grid, &mut stream(1, 0, StreamRole::Limit)).unwrap();
        assert!(hi.is_finite() && lo.is_finite() && hi >= lo);
        let grid = KsGrid::new(512, 0.8, StableParams::symmetric(2.0, 0.5).unwrap(), KsEstimator::NormalizedRwrs).unwrap();
        assert!(!grid.is_integral());
        assert_eq!(grid.norm(), 512f64.sqrt());
        assert!(KsGrid::new(512, 1.5, StableParams::symmetric(2.0, 0.5).unwrap(), KsEstimator::DirectGrid).is_err());
    }

    #[test]
    fn rescaled_brownian_sup_matches_reflection_principle() {
        // sup of standard Brownian motion on [0,1] has mean sqrt(2/pi); the
        // random-walk discretization falls short by about 0.5826/sqrt(m).
        let grid = KsGrid::new(4096, 0.5, StableParams::symmetric(2.0, 0.5).unwrap(), KsEstimator::NormalizedRwrs).unwrap();
        let run = ks_ensemble(&grid, &[4096], &RunSpec::new(11, 4000)).unwrap();
        let e = &run.estimates[0];
        let expected = (2.0 / std::f64::consts::PI).sqrt() - 0.5826 / 64.0;
        assert!((e.sup_mean - expected).abs() < 4.0 * e.sup_stderr, "{} vs {expected}", e.sup_mean);
    }

    #[test]
    fn symmetric_limit_has_symmetric_extrema() {
        let grid = KsGrid::brownian(1024, KsEstimator::NormalizedRwrs).unwrap();
        let run = ks_ensemble(&grid, &[256, 1024], &RunSpec::new(2, 3000)).unwrap();
        for e in &run.estimates {
            let se = (e.sup_stderr.powi(2) + e.neg_inf_stderr.powi(2)).sqrt();
            assert!((e.sup_mean - e.neg_inf_mean).abs() < 3.0 * se);
            assert!(e.sup_mean > 0.0 && e.sup_stderr > 0.0);
            assert!((e.supminf_mean - (e.sup_mean + e.neg_inf_mean)).abs() < 1e-9);
        }
    }

    #[test]
    fn extrapolation_recovers_exact_power_law() {
        let f = |m: f64| 1.3 - 0.8 * m.powf(-0.25);
        let pts: Vec<_> = [4096u64, 16384, 65536].iter().map(|&m| (m, f(m as f64), 1e-6)).collect();
        let e = extrapolate(&pts).unwrap();
        assert!(e.extrapolated);
        assert!((e.value - 1.3).abs() < 1e-9);
        assert!((e.exponent.unwrap() - 0.25).abs() < 1e-9);
        // noise-dominated differences fall back to the finest value
        let flat = [(4096, 1.0, 0.01), (16384, 1.001, 0.01), (65536, 1.002, 0.01)];
        let e = extrapolate(&flat).unwrap();
        assert!(!e.extrapolated);
        assert_eq!(e.value, 1.002);
        assert!(extrapolate(&pts[..2]).is_err());
    }

    #[test]
    fn ks_distance_basics() {
        let a = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(ks_distance(&a, &a), 0.0);
        assert_eq!(ks_distance(&a, &[10.0, 11.0]), 1.0);
        assert!((ks_distance(&a, &[2.5, 3.5, 4.5, 5.5]) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ensemble_is_deterministic_across_threads() {
        let grid = KsGrid::brownian(512, KsEstimator::DirectGrid).unwrap();
        let one = ks_ensemble(&grid, &[128, 512], &RunSpec::new(8, 700)).unwrap();
        let four = ks_ensemble(&grid, &[128, 512], &RunSpec::new(8, 700).threads(4)).unwrap();
        assert_eq!(one.estimates, four.estimates);
        assert_eq!(one.sup_samples, four.sup_samples);
    }
}
