//! The Matheron-de Marsily walk on `Z^2` with randomly oriented horizontal lines.
//!
//! Line `y` carries an orientation `ε_y = ±1`. From `(x, y)` the walker moves to
//! `(x + ε_y, y)` with probability `p` and to `(x, y ± 1)` with probability
//! `(1 - p) / 2` each. The first coordinate is a generalized RWRS driven by the
//! lazy vertical walk.

use rand::RngCore;
use rustc_hash::FxHashSet;
use serde::Serialize;

use crate::ensemble::{proportion_stderr, run_ensemble, Merge, Moments, RunSpec};
use crate::error::{invalid, Result};
use crate::rng::{coin, stream, StreamRole, StreamRng};
use crate::rwrs::FirstReturn;
use crate::sites::SiteTable;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MdmConfig {
    p: f64,
    pub n: u64,
}

impl MdmConfig {
    pub fn new(p: f64, n: u64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(invalid(format!("horizontal-move probability must lie in (0, 1), got {p}")));
        }
        Ok(Self { p, n })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    fn thresholds(&self) -> (u64, u64) {
        let h = crate::rng::u32_threshold(self.p);
        (h, h + ((1u64 << 32) - h) / 2)
    }
}

/// Where line orientations come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvironmentSource {
    /// Fresh fair coins per replica, drawn from the replica's environment stream.
    Annealed,
    /// One fixed environment shared by all replicas: `ε_y` is a function of
    /// `(seed, y)`.
    Quenched { seed: u64 },
}

/// Line orientations, materialized on first visit and cached.
#[derive(Debug, Clone)]
pub struct Environment {
    source: EnvironmentSource,
    realized: SiteTable<i8>,
}

impl Environment {
    pub fn new(source: EnvironmentSource) -> Self {
        Self {
            source,
            realized: SiteTable::new(),
        }
    }

    #[inline]
    pub fn orientation<R: RngCore + ?Sized>(&mut self, line: i64, rng: &mut R) -> i8 {
        let source = self.source;
        *self.realized.get_or_insert_with(line, || {
            let heads = match source {
                EnvironmentSource::Annealed => coin(rng),
                EnvironmentSource::Quenched { seed } => {
                    coin(&mut stream(seed, line as u64, StreamRole::Environment))
                }
            };
            if heads {
                1
            } else {
                -1
            }
        })
    }

    pub fn realized(&self) -> &SiteTable<i8> {
        &self.realized
    }
}

#[derive(Debug, Clone, Default)]
pub struct MdmOptions {
    /// Sorted checkpoints within the horizon.
    pub grid: Vec<u64>,
    pub stop_at_first_return: bool,
    pub track_full_range: bool,
    pub keep_path: bool,
}

#[derive(Debug, Clone)]
pub struct MdmStats {
    pub n: u64,
    pub steps: u64,
    pub x_max: i64,
    pub x_min: i64,
    /// Number of vertical lines visited: `x_max - x_min + 1`.
    pub range1: u64,
    pub t0_1: FirstReturn,
    /// `#{M_0, ..., M_steps}` when tracked.
    pub full_range: Option<u64>,
    pub at_origin: bool,
    pub horizontal_steps: u64,
    pub range1_at: Vec<u64>,
    pub full_range_at: Vec<u64>,
    pub origin_at: Vec<bool>,
    pub path: Option<Vec<(i64, i64)>>,
}

pub fn simulate_mdm<R1, R2>(
    cfg: &MdmConfig,
    env: &mut Environment,
    moves_rng: &mut R1,
    env_rng: &mut R2,
    opts: &MdmOptions,
) -> Result<MdmStats>
where
    R1: RngCore + ?Sized,
    R2: RngCore + ?Sized,
{
    let n = cfg.n;
    if opts.grid.windows(2).any(|w| w[0] >= w[1]) || opts.grid.last().is_some_and(|&g| g > n) {
        return Err(invalid("grid must be strictly increasing and within the horizon"));
    }
    let (horizontal, up) = cfg.thresholds();
    let mut visited = opts.track_full_range.then(|| {
        let mut s = FxHashSet::default();
        s.insert((0i64, 0i64));
        s
    });
    let mut path = opts.keep_path.then(|| {
        let mut v = Vec::with_capacity(n as usize + 1);
        v.push((0i64, 0i64));
        v
    });
    let mut checks = opts.grid.iter().copied().peekable();
    let (mut range1_at, mut full_range_at, mut origin_at) = (Vec::new(), Vec::new(), Vec::new());

    let (mut x, mut y) = (0i64, 0i64);
    let (mut x_max, mut x_min) = (0i64, 0i64);
    let mut t0 = None;
    let mut horizontal_steps = 0;
    let mut steps = 0;

    for k in 1..=n {
        let u = moves_rng.next_u32() as u64;
        if u < horizontal {
            x += env.orientation(y, env_rng) as i64;
            horizontal_steps += 1;
            x_max = x_max.max(x);
            x_min = x_min.min(x);
        } else if u < up {
            y += 1;
        } else {
            y -= 1;
        }
        if let Some(set) = visited.as_mut() {
            set.insert((x, y));
        }
        if let Some(p) = path.as_mut() {
            p.push((x, y));
        }
        steps = k;
        if checks.peek() == Some(&k) {
            checks.next();
            range1_at.push((x_max - x_min + 1) as u64);
            if let Some(set) = &visited {
                full_range_at.push(set.len() as u64);
            }
            origin_at.push(x == 0 && y == 0);
        }
        if x == 0 && t0.is_none() {
            t0 = Some(k);
            if opts.stop_at_first_return {
                break;
            }
        }
    }

    Ok(MdmStats {
        n,
        steps,
        x_max,
        x_min,
        range1: (x_max - x_min + 1) as u64,
        t0_1: t0.map_or(FirstReturn::Beyond(n), FirstReturn::At),
        full_range: visited.map(|s| s.len() as u64),
        at_origin: x == 0 && y == 0,
        horizontal_steps,
        range1_at,
        full_range_at,
        origin_at,
        path,
    })
}

/// One annealed replica of a run keyed by `seed`.
pub fn simulate_mdm_replica(cfg: &MdmConfig, seed: u64, replica: u64, opts: &MdmOptions) -> Result<MdmStats> {
    simulate_mdm_replica_in(cfg, EnvironmentSource::Annealed, seed, replica, opts)
}

pub fn simulate_mdm_replica_in(
    cfg: &MdmConfig,
    source: EnvironmentSource,
    seed: u64,
    replica: u64,
    opts: &MdmOptions,
) -> Result<MdmStats> {
    let mut moves: StreamRng = stream(seed, replica, StreamRole::Moves);
    let mut env_rng: StreamRng = stream(seed, replica, StreamRole::Environment);
    let mut env = Environment::new(source);
    simulate_mdm(cfg, &mut env, &mut moves, &mut env_rng, opts)
}

/// `K_p = p / (1 - p)^(1/4)`.
pub fn k_p(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "p must lie in (0, 1)");
    p / (1.0 - p).powf(0.25)
}

/// Every step moves exactly one coordinate by exactly one.
pub fn is_nearest_neighbor(path: &[(i64, i64)]) -> bool {
    path.windows(2).all(|w| {
        let dx = (w[1].0 - w[0].0).abs();
        let dy = (w[1].1 - w[0].1).abs();
        dx + dy == 1
    })
}

/// All horizontal displacements on a given line share one sign.
pub fn is_quenched_consistent(path: &[(i64, i64)]) -> bool {
    let mut seen: SiteTable<i64> = SiteTable::new();
    path.windows(2).all(|w| {
        let (a, b) = (w[0], w[1]);
        if a.1 != b.1 {
            return true;
        }
        let dx = b.0 - a.0;
        *seen.get_or_insert_with(a.1, || dx) == dx
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MdmRow {
    pub n: u64,
    pub survival: f64,
    pub survival_stderr: f64,
    pub mean_range1: f64,
    pub range1_stderr: f64,
    pub full_range_over_n: f64,
    pub full_range_over_n_stderr: f64,
    /// `P(M_n = (0, 0))`; `None` at odd times, where it vanishes by parity.
    pub return_freq: Option<f64>,
    pub return_stderr: Option<f64>,
    pub return_hits: u64,
    pub replicas: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MdmEnsemble {
    pub p: f64,
    pub rows: Vec<MdmRow>,
    pub horizontal_fraction: f64,
    pub horizontal_fraction_stderr: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Default)]
struct MdmAcc {
    survive: Vec<u64>,
    range1: Vec<Moments>,
    full: Vec<Moments>,
    origin: Vec<u64>,
    horizontal: u64,
    steps: u64,
}

impl Merge for MdmAcc {
    fn merge(&mut self, other: Self) {
        self.survive.merge(other.survive);
        self.range1.merge(other.range1);
        self.full.merge(other.full);
        self.origin.merge(other.origin);
        self.horizontal += other.horizontal;
        self.steps += other.steps;
    }
}

/// Annealed ensemble over a grid of checkpoints up to `cfg.n`.
pub fn mdm_ensemble(cfg: &MdmConfig, grid: &[u64], run: &RunSpec, track_full_range: bool) -> Result<MdmEnsemble> {
    if grid.is_empty() {
        return Err(invalid("mdm ensemble needs at least one grid point"));
    }
    let opts = MdmOptions {
        grid: grid.to_vec(),
        track_full_range,
        ..Default::default()
    };
    let g = grid.len();
    let init = || MdmAcc {
        survive: vec![0; g],
        range1: vec![Moments::default(); g],
        full: vec![Moments::default(); g],
        origin: vec![0; g],
        horizontal: 0,
        steps: 0,
    };
    let acc = run_ensemble(run, init, |replica, acc| {
        let s = simulate_mdm_replica(cfg, run.seed, replica, &opts)?;
        for (i, &n) in grid.iter().enumerate() {
            acc.survive[i] += s.t0_1.exceeds(n) as u64;
            acc.range1[i].push(s.range1_at[i] as f64);
            if track_full_range {
                acc.full[i].push(s.full_range_at[i] as f64 / n as f64);
            }
            acc.origin[i] += s.origin_at[i] as u64;
        }
        acc.horizontal += s.horizontal_steps;
        acc.steps += s.steps;
        Ok(())
    })?;

    let r = run.replicas;
    let mut warnings = Vec::new();
    let rows = grid
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let even = n % 2 == 0;
            if even && acc.origin[i] < 100 {
                warnings.push(format!(
                    "n={n}: only {} returns to the origin observed; P(M_n = 0) error bar is unreliable",
                    acc.origin[i]
                ));
            }
            MdmRow {
                n,
                survival: acc.survive[i] as f64 / r as f64,
                survival_stderr: proportion_stderr(acc.survive[i], r),
                mean_range1: acc.range1[i].mean,
                range1_stderr: acc.range1[i].stderr(),
                full_range_over_n: if track_full_range { acc.full[i].mean } else { f64::NAN },
                full_range_over_n_stderr: if track_full_range { acc.full[i].stderr() } else { f64::NAN },
                return_freq: even.then(|| acc.origin[i] as f64 / r as f64),
                return_stderr: even.then(|| proportion_stderr(acc.origin[i], r)),
                return_hits: acc.origin[i],
                replicas: r,
            }
        })
        .collect();
    let frac = acc.horizontal as f64 / acc.steps as f64;
    Ok(MdmEnsemble {
        p: cfg.p(),
        rows,
        horizontal_fraction: frac,
        horizontal_fraction_stderr: (frac * (1.0 - frac) / acc.steps as f64).sqrt(),
        warnings,
    })
}
