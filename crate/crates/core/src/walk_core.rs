//! The integer random walk `S` and its local times `N_n(y)`.

use std::io::{self, Write};

use rand::RngCore;

use crate::samplers::WalkIncrementDist;
use crate::sites::SiteTable;

/// A simulated walk path with its local-time table.
///
/// `local_times[y] = #{k in 1..=n : S_k = y}`; the starting point `S_0` is not
/// counted. In summary mode the position sequence is dropped.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub increments_dist: WalkIncrementDist,
    pub n: u64,
    positions: Option<Vec<i64>>,
    local_times: SiteTable<u32>,
    self_intersections: u64,
}

impl Trajectory {
    pub fn positions(&self) -> Option<&[i64]> {
        self.positions.as_deref()
    }

    pub fn local_times(&self) -> &SiteTable<u32> {
        &self.local_times
    }

    pub fn local_time(&self, site: i64) -> u32 {
        self.local_times.get(site).copied().unwrap_or(0)
    }

    /// Number of distinct sites among `S_1..S_n`.
    pub fn visited_sites(&self) -> usize {
        self.local_times.len()
    }

    /// Rebuilds the local-time table from the stored positions and compares.
    /// `None` in summary mode.
    pub fn recount_matches(&self) -> Option<bool> {
        let positions = self.positions.as_ref()?;
        let rebuilt = local_times_of(&positions[1..]);
        if rebuilt.len() != self.local_times.len() {
            return Some(false);
        }
        Some(
            self.local_times
                .iter()
                .all(|(site, &count)| rebuilt.get(site) == Some(&count)),
        )
    }

    /// One position per line.
    pub fn write_positions<W: Write>(&self, mut out: W) -> io::Result<()> {
        let Some(positions) = &self.positions else {
            return Err(io::Error::other("trajectory kept no positions"));
        };
        for p in positions {
            writeln!(out, "{p}")?;
        }
        Ok(())
    }
}

fn local_times_of(sites: &[i64]) -> SiteTable<u32> {
    let mut table = SiteTable::new();
    for &s in sites {
        *table.get_or_insert_with(s, || 0) += 1;
    }
    table
}

/// Incremental walk state: position, local times and `V_k = Σ_y N_k(y)^2`.
#[derive(Debug, Clone, Default)]
pub struct WalkState {
    pub position: i64,
    pub steps: u64,
    pub local_times: SiteTable<u32>,
    pub self_intersections: u64,
}

impl WalkState {
    /// Advances one step and returns the new position.
    #[inline]
    pub fn step<R: RngCore + ?Sized>(&mut self, dist: &WalkIncrementDist, rng: &mut R) -> i64 {
        self.position += dist.sample(rng);
        self.steps += 1;
        let count = self.local_times.get_or_insert_with(self.position, || 0);
        // (N + 1)^2 - N^2 = 2N + 1
        self.self_intersections += 2 * *count as u64 + 1;
        *count += 1;
        self.position
    }
}

fn run_walk<R: RngCore + ?Sized>(
    n: u64,
    dist: &WalkIncrementDist,
    rng: &mut R,
    keep_positions: bool,
) -> Trajectory {
    let mut state = WalkState::default();
    let mut positions = keep_positions.then(|| {
        let mut v = Vec::with_capacity(n as usize + 1);
        v.push(0);
        v
    });
    for _ in 0..n {
        let p = state.step(dist, rng);
        if let Some(v) = positions.as_mut() {
            v.push(p);
        }
    }
    Trajectory {
        increments_dist: dist.clone(),
        n,
        positions,
        local_times: state.local_times,
        self_intersections: state.self_intersections,
    }
}

pub fn simulate_walk<R: RngCore + ?Sized>(n: u64, dist: &WalkIncrementDist, rng: &mut R) -> Trajectory {
    run_walk(n, dist, rng, true)
}

/// Like [`simulate_walk`] but keeps only the local-time table.
pub fn simulate_walk_summary<R: RngCore + ?Sized>(
    n: u64,
    dist: &WalkIncrementDist,
    rng: &mut R,
) -> Trajectory {
    run_walk(n, dist, rng, false)
}

/// Builds a trajectory from explicit positions `S_0 = 0, S_1, ..., S_n`.
pub fn trajectory_from_positions(dist: WalkIncrementDist, positions: Vec<i64>) -> Trajectory {
    assert_eq!(positions.first(), Some(&0), "walks start at the origin");
    let local_times = local_times_of(&positions[1..]);
    let self_intersections = local_times.values().map(|&c| c as u64 * c as u64).sum();
    Trajectory {
        increments_dist: dist,
        n: positions.len() as u64 - 1,
        positions: Some(positions),
        local_times,
        self_intersections,
    }
}

/// `V_n = Σ_y N_n(y)^2`.
pub fn self_intersections(traj: &Trajectory) -> u64 {
    traj.self_intersections
}

/// `V_n(b) = Σ_y N_n(y)^b`.
pub fn self_intersections_beta(traj: &Trajectory, beta_prime: f64) -> f64 {
    assert!(beta_prime > 0.0, "exponent must be positive");
    traj.local_times
        .values()
        .map(|&c| (c as f64).powf(beta_prime))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, StreamRole};
    use proptest::prelude::*;

    #[test]
    fn empty_walk() {
        let mut rng = stream(0, 0, StreamRole::Walk);
        let t = simulate_walk(0, &WalkIncrementDist::Simple, &mut rng);
        assert_eq!(t.positions(), Some(&[0i64][..]));
        assert!(t.local_times().is_empty());
        assert_eq!(self_intersections(&t), 0);
    }

    #[test]
    fn forced_increments() {
        let t = trajectory_from_positions(WalkIncrementDist::Simple, vec![0, 1, 0, 1]);
        assert_eq!(t.local_time(1), 2);
        assert_eq!(t.local_time(0), 1);
        assert_eq!(self_intersections(&t), 5);
        assert_eq!(self_intersections_beta(&t, 1.0), 3.0);
        assert_eq!(self_intersections_beta(&t, 2.0), 5.0);
        let v = self_intersections_beta(&t, 1.5);
        assert!((v - (2f64.powf(1.5) + 1.0)).abs() < 1e-12);
        assert!((v - 3.8284).abs() < 1e-4);
    }

    #[test]
    fn injective_path_has_no_self_intersections() {
        let positions: Vec<i64> = (0..=50).collect();
        let t = trajectory_from_positions(WalkIncrementDist::Simple, positions);
        assert_eq!(self_intersections(&t), 50);
    }

    #[test]
    fn simple_walk_variance_is_linear() {
        let n = 10_000u64;
        let replicas = 10_000u64;
        let mut s2 = 0.0;
        for r in 0..replicas {
            let mut rng = stream(9, r, StreamRole::Walk);
            let t = simulate_walk(n, &WalkIncrementDist::Simple, &mut rng);
            let end = *t.positions().unwrap().last().unwrap();
            s2 += (end * end) as f64;
        }
        let ratio = s2 / replicas as f64 / n as f64;
        assert!((ratio - 1.0).abs() < 0.05, "Var(S_n)/n = {ratio}");
    }

    #[test]
    fn dump_one_position_per_line() {
        let t = trajectory_from_positions(WalkIncrementDist::Simple, vec![0, -1, 0]);
        let mut buf = Vec::new();
        t.write_positions(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "0\n-1\n0\n");
    }

    fn any_walk() -> impl Strategy<Value = WalkIncrementDist> {
        prop_oneof![
            Just(WalkIncrementDist::Simple),
            Just(WalkIncrementDist::lazy(0.4).unwrap()),
            Just(WalkIncrementDist::heavy_tail(0.75).unwrap()),
            Just(WalkIncrementDist::heavy_tail(1.5).unwrap()),
        ]
    }

    proptest! {
        #[test]
        fn local_time_invariants(dist in any_walk(), n in 0u64..400, seed in any::<u64>()) {
            let mut rng = stream(seed, 0, StreamRole::Walk);
            let t = simulate_walk(n, &dist, &mut rng);
            let total: u64 = t.local_times().values().map(|&c| c as u64).sum();
            prop_assert_eq!(total, n);
            prop_assert_eq!(t.positions().unwrap()[0], 0);
            prop_assert_eq!(t.recount_matches(), Some(true));
            let v = self_intersections(&t);
            prop_assert!(n <= v && v <= n * n.max(1));
            let direct: u64 = t.local_times().values().map(|&c| c as u64 * c as u64).sum();
            prop_assert_eq!(v, direct);
            let mut last = 0.0;
            for b in [0.25, 0.5, 1.0, 1.5, 2.0, 3.0] {
                let vb = self_intersections_beta(&t, b);
                prop_assert!(vb >= last - 1e-9);
                last = vb;
            }
        }

        #[test]
        fn summary_mode_agrees(n in 0u64..300, seed in any::<u64>()) {
            let dist = WalkIncrementDist::lazy(0.3).unwrap();
            let full = simulate_walk(n, &dist, &mut stream(seed, 1, StreamRole::Walk));
            let summary = simulate_walk_summary(n, &dist, &mut stream(seed, 1, StreamRole::Walk));
            prop_assert!(summary.positions().is_none());
            prop_assert_eq!(self_intersections(&full), self_intersections(&summary));
        }
    }
}
