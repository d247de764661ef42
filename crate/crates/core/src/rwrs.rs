//! Random walk in random scenery: `Z_n = Σ_{k=1..n} ξ_{S_k} = Σ_y ξ_y N_n(y)`.

use rand::RngCore;
use rustc_hash::{FxHashMap, FxHashSet};

use crate::error::{invalid, Error, Result};
use crate::rng::{stream, StreamRole};
use crate::samplers::{SceneryDist, WalkIncrementDist};
use crate::sites::SiteTable;

/// Default cap on the horizon when the `Z` path is retained.
pub const PATH_MODE_MAX_N: u64 = 1 << 14;

/// A lattice RWRS model: walk increments and an integer-valued scenery.
#[derive(Debug, Clone)]
pub struct RwrsModel {
    pub walk: WalkIncrementDist,
    pub scenery: SceneryDist,
}

impl RwrsModel {
    pub fn new(walk: WalkIncrementDist, scenery: SceneryDist) -> Result<Self> {
        if !scenery.is_lattice() {
            return Err(Error::Unsupported(format!(
                "range and return observables need a lattice scenery, got {}",
                scenery.label()
            )));
        }
        Ok(Self { walk, scenery })
    }

    pub fn label(&self) -> String {
        format!("rwrs[{} walk, {} scenery]", self.walk.label(), self.scenery.label())
    }

    /// Normalizing sequence `a_n` for this pair of indices.
    pub fn norm(&self, n: u64) -> f64 {
        norm_sequence(self.walk.index(), self.scenery.index(), n).expect("indices validated by the samplers")
    }
}

/// Scenery values materialized on first visit and then frozen for the replica.
#[derive(Debug, Clone)]
pub struct SceneryMap {
    pub dist: SceneryDist,
    realized: SiteTable<i64>,
}

impl SceneryMap {
    pub fn new(dist: SceneryDist) -> Self {
        Self {
            dist,
            realized: SiteTable::new(),
        }
    }

    #[inline]
    pub fn value_at<R: RngCore + ?Sized>(&mut self, site: i64, rng: &mut R) -> i64 {
        let dist = &self.dist;
        *self.realized.get_or_insert_with(site, || dist.sample_lattice(rng))
    }

    pub fn realized(&self) -> &SiteTable<i64> {
        &self.realized
    }
}

/// First return time to 0, censored at the simulated horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FirstReturn {
    At(u64),
    /// No return up to and including this horizon.
    Beyond(u64),
}

impl FirstReturn {
    /// Whether `T_0 > k`. Panics if `k` lies beyond a censored horizon.
    pub fn exceeds(&self, k: u64) -> bool {
        match *self {
            Self::At(t) => t > k,
            Self::Beyond(n) => {
                assert!(k <= n, "T_0 censored at {n}, asked about {k}");
                true
            }
        }
    }

    pub fn is_censored(&self) -> bool {
        matches!(self, Self::Beyond(_))
    }

    /// The observed time, or the censoring horizon.
    pub fn time(&self) -> u64 {
        match *self {
            Self::At(t) | Self::Beyond(t) => t,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RwrsOptions {
    /// Checkpoints (sorted, within the horizon) at which the range is recorded.
    pub grid: Vec<u64>,
    /// Keep `Z_0..Z_n` and compute the self-intersection count of `Z`.
    pub keep_path: bool,
    /// Stop at `T_0`; only the first return is then meaningful.
    pub stop_at_first_return: bool,
    /// Count distinct values with a set even when the scenery is unit valued.
    pub force_distinct_count: bool,
}

impl RwrsOptions {
    pub fn survival_only() -> Self {
        Self {
            stop_at_first_return: true,
            ..Self::default()
        }
    }

    pub fn with_grid(grid: Vec<u64>) -> Self {
        Self {
            grid,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct RwrsStats {
    pub n: u64,
    /// Steps actually simulated (`< n` only after an early stop).
    pub steps: u64,
    pub running_max: i128,
    pub running_min: i128,
    /// `#{Z_0, ..., Z_steps}`.
    pub range: u64,
    pub t0: FirstReturn,
    /// `Σ_{i,j=1..n} 1{Z_i = Z_j}`, path mode only.
    pub v_z: Option<u64>,
    pub final_z: i128,
    /// Range at each requested checkpoint.
    pub range_at: Vec<u64>,
    /// `Z_0..Z_n`, path mode only.
    pub z_path: Option<Vec<i128>>,
}

enum RangeCounter {
    Extrema,
    Distinct(FxHashSet<i128>),
}

/// Simulates one replica with independent walk and scenery streams.
pub fn simulate_rwrs<R1, R2>(
    n: u64,
    model: &RwrsModel,
    walk_rng: &mut R1,
    scenery_rng: &mut R2,
    opts: &RwrsOptions,
) -> Result<RwrsStats>
where
    R1: RngCore + ?Sized,
    R2: RngCore + ?Sized,
{
    if n == 0 {
        return Err(invalid("rwrs horizon must be at least 1"));
    }
    if opts.keep_path && n > PATH_MODE_MAX_N {
        return Err(invalid(format!(
            "path mode is limited to n <= {PATH_MODE_MAX_N}, got {n}"
        )));
    }
    if opts.grid.windows(2).any(|w| w[0] >= w[1]) || opts.grid.last().is_some_and(|&g| g > n) {
        return Err(invalid("grid must be strictly increasing and within the horizon"));
    }

    let mut counter = if model.scenery.is_unit_valued() && !opts.force_distinct_count {
        RangeCounter::Extrema
    } else {
        let mut set = FxHashSet::default();
        set.insert(0);
        RangeCounter::Distinct(set)
    };
    let mut scenery = SceneryMap::new(model.scenery.clone());
    let mut z_path = opts.keep_path.then(|| {
        let mut v = Vec::with_capacity(n as usize + 1);
        v.push(0i128);
        v
    });
    let mut range_at = Vec::with_capacity(opts.grid.len());
    let mut next_check = opts.grid.iter().copied().peekable();

    let mut pos = 0i64;
    let mut z: i128 = 0;
    let (mut hi, mut lo) = (0i128, 0i128);
    let mut t0 = None;
    let mut steps = 0;

    for k in 1..=n {
        pos += model.walk.sample(walk_rng);
        z += scenery.value_at(pos, scenery_rng) as i128;
        hi = hi.max(z);
        lo = lo.min(z);
        if let RangeCounter::Distinct(set) = &mut counter {
            set.insert(z);
        }
        if let Some(path) = z_path.as_mut() {
            path.push(z);
        }
        steps = k;
        if next_check.peek() == Some(&k) {
            next_check.next();
            range_at.push(match &counter {
                RangeCounter::Extrema => (hi - lo + 1) as u64,
                RangeCounter::Distinct(set) => set.len() as u64,
            });
        }
        if z == 0 && t0.is_none() {
            t0 = Some(k);
            if opts.stop_at_first_return {
                break;
            }
        }
    }

    let range = match &counter {
        RangeCounter::Extrema => (hi - lo + 1) as u64,
        RangeCounter::Distinct(set) => set.len() as u64,
    };
    let v_z = z_path.as_ref().map(|p| rwrs_self_intersections(&p[1..]));
    Ok(RwrsStats {
        n,
        steps,
        running_max: hi,
        running_min: lo,
        range,
        t0: t0.map_or(FirstReturn::Beyond(n), FirstReturn::At),
        v_z,
        final_z: z,
        range_at,
        z_path,
    })
}

/// Simulates replica `replica` of a run keyed by `seed`.
pub fn simulate_rwrs_replica(
    n: u64,
    model: &RwrsModel,
    seed: u64,
    replica: u64,
    opts: &RwrsOptions,
) -> Result<RwrsStats> {
    let mut walk_rng = stream(seed, replica, StreamRole::Walk);
    let mut scenery_rng = stream(seed, replica, StreamRole::Scenery);
    simulate_rwrs(n, model, &mut walk_rng, &mut scenery_rng, opts)
}

/// `Σ_{i,j} 1{Z_i = Z_j} = Σ_x 𝒩(x)^2` over the given values `Z_1..Z_n`.
pub fn rwrs_self_intersections(z_values: &[i128]) -> u64 {
    let mut counts: FxHashMap<i128, u64> = FxHashMap::default();
    for &z in z_values {
        *counts.entry(z).or_insert(0) += 1;
    }
    counts.values().map(|c| c * c).sum()
}

/// Number of distinct values in a path.
pub fn distinct_count(values: &[i128]) -> u64 {
    values.iter().collect::<FxHashSet<_>>().len() as u64
}

fn check_index(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v <= 2.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} must lie in (0, 2], got {v}")))
    }
}

/// Normalizing sequence `a_n` of `Z_n`:
/// `n^δ` for `α > 1`, `n^(1/β) (log n)^(1 - 1/β)` for `α = 1`, `n^(1/β)` for `α < 1`.
pub fn norm_sequence(alpha: f64, beta: f64, n: u64) -> Result<f64> {
    check_index("alpha", alpha)?;
    check_index("beta", beta)?;
    if n < 2 {
        return Err(invalid("a_n is defined for n >= 2"));
    }
    let nf = n as f64;
    Ok(if alpha > 1.0 {
        nf.powf(delta_exponent(alpha, beta)?)
    } else if alpha == 1.0 {
        nf.powf(1.0 / beta) * nf.ln().powf(1.0 - 1.0 / beta)
    } else {
        nf.powf(1.0 / beta)
    })
}

/// Kesten-Spitzer exponent `δ = 1 - 1/α + 1/(αβ)`, for `α ∈ (1, 2]`.
pub fn delta_exponent(alpha: f64, beta: f64) -> Result<f64> {
    if !(alpha > 1.0 && alpha <= 2.0) {
        return Err(invalid(format!("delta needs alpha in (1, 2], got {alpha}")));
    }
    check_index("beta", beta)?;
    Ok(1.0 - 1.0 / alpha + 1.0 / (alpha * beta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn simple_rademacher() -> RwrsModel {
        RwrsModel::new(WalkIncrementDist::Simple, SceneryDist::Rademacher).unwrap()
    }

    #[test]
    fn gaussian_scenery_is_rejected() {
        let err = RwrsModel::new(WalkIncrementDist::Simple, SceneryDist::gaussian(1.0).unwrap());
        assert!(err.is_err());
    }

    #[test]
    fn one_step_never_returns() {
        let model = simple_rademacher();
        for r in 0..1000 {
            let s = simulate_rwrs_replica(1, &model, 3, r, &RwrsOptions::default()).unwrap();
            assert_eq!(s.range, 2);
            assert!(s.t0.exceeds(1));
        }
    }

    #[test]
    fn two_steps_match_enumeration() {
        // Z_2 is a sum of two independent ±1 on every branch:
        // E[range] = 2.5 and P(T_0 > 2) = 1/2.
        let model = simple_rademacher();
        let reps = 200_000u64;
        let (mut range_sum, mut survive) = (0u64, 0u64);
        for r in 0..reps {
            let s = simulate_rwrs_replica(2, &model, 4, r, &RwrsOptions::default()).unwrap();
            range_sum += s.range;
            survive += s.t0.exceeds(2) as u64;
        }
        let mean_range = range_sum as f64 / reps as f64;
        let p = survive as f64 / reps as f64;
        let se = (0.25 / reps as f64).sqrt();
        assert!((mean_range - 2.5).abs() <= 4.0 * se, "{mean_range}");
        assert!((p - 0.5).abs() <= 4.0 * se, "{p}");
    }

    #[test]
    fn norm_sequence_cases() {
        let n = 10_000u64;
        let nf = n as f64;
        assert!((norm_sequence(2.0, 2.0, n).unwrap() - nf.powf(0.75)).abs() < 1e-9);
        assert!((norm_sequence(1.0, 2.0, n).unwrap() - (nf * nf.ln()).sqrt()).abs() < 1e-9);
        assert!((norm_sequence(0.5, 2.0, n).unwrap() - 100.0).abs() < 1e-9);
        assert!(norm_sequence(2.5, 2.0, n).is_err());
        assert!(norm_sequence(1.5, 0.0, n).is_err());
    }

    #[test]
    fn delta_cases() {
        assert_eq!(delta_exponent(2.0, 2.0).unwrap(), 0.75);
        assert_eq!(delta_exponent(2.0, 1.0).unwrap(), 1.0);
        let d = delta_exponent(1.5, 1.2).unwrap();
        assert!((d - (1.0 - 2.0 / 3.0 + 1.0 / 1.8)).abs() < 1e-12);
        assert!((d - 0.8889).abs() < 1e-4);
        assert!(delta_exponent(1.0, 2.0).is_err());
    }

    #[test]
    fn self_intersections_of_z() {
        assert_eq!(rwrs_self_intersections(&[1, 2, 3, 4]), 4);
        assert_eq!(rwrs_self_intersections(&[1, 0]), 2);
        assert_eq!(rwrs_self_intersections(&[1, 0, 1]), 5);
    }

    #[test]
    fn path_mode_limit() {
        let model = simple_rademacher();
        let opts = RwrsOptions {
            keep_path: true,
            ..Default::default()
        };
        assert!(simulate_rwrs_replica(PATH_MODE_MAX_N + 1, &model, 0, 0, &opts).is_err());
    }

    #[test]
    fn scenery_is_quenched() {
        let mut map = SceneryMap::new(SceneryDist::symmetric_zipf(0.8).unwrap());
        let mut rng = stream(1, 0, StreamRole::Scenery);
        let first: Vec<i64> = (-20..20).map(|s| map.value_at(s, &mut rng)).collect();
        let again: Vec<i64> = (-20..20).map(|s| map.value_at(s, &mut rng)).collect();
        assert_eq!(first, again);
    }

    fn any_model() -> impl Strategy<Value = RwrsModel> {
        let walks = prop_oneof![
            Just(WalkIncrementDist::Simple),
            Just(WalkIncrementDist::lazy(1.0 / 3.0).unwrap()),
            Just(WalkIncrementDist::heavy_tail(1.5).unwrap()),
        ];
        let sceneries = prop_oneof![
            Just(SceneryDist::Rademacher),
            Just(SceneryDist::ternary(0.5).unwrap()),
            Just(SceneryDist::symmetric_zipf(1.5).unwrap()),
            Just(SceneryDist::symmetric_zipf(0.5).unwrap()),
        ];
        (walks, sceneries).prop_map(|(w, s)| RwrsModel::new(w, s).unwrap())
    }

    proptest! {
        #[test]
        fn per_replica_invariants(model in any_model(), n in 1u64..200, seed in any::<u64>()) {
            let opts = RwrsOptions {
                keep_path: true,
                force_distinct_count: true,
                grid: (1..=n).collect(),
                ..Default::default()
            };
            let s = simulate_rwrs_replica(n, &model, seed, 0, &opts).unwrap();
            let path = s.z_path.as_ref().unwrap();
            prop_assert!(1 <= s.range && s.range <= n + 1);
            prop_assert!(s.running_min <= 0 && 0 <= s.running_max);
            prop_assert!(s.t0.time() >= 1);
            prop_assert_eq!(s.range, distinct_count(path));
            prop_assert_eq!(*path.last().unwrap(), s.final_z);
            if model.scenery.is_unit_valued() {
                prop_assert_eq!(s.range as i128, s.running_max - s.running_min + 1);
            }
            let vz = s.v_z.unwrap();
            prop_assert!((n as u128).pow(2) <= s.range as u128 * vz as u128);
            prop_assert!(s.range_at.windows(2).all(|w| w[0] <= w[1]));
            // survival-only mode sees the same first return
            let quick = simulate_rwrs_replica(n, &model, seed, 0, &RwrsOptions::survival_only()).unwrap();
            prop_assert_eq!(quick.t0, s.t0);
        }
    }
}
