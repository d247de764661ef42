//! Experiment drivers: survival curves, range growth, the range/return identity
//! and self-intersection moments, each as a replica ensemble.

use serde::Serialize;

use crate::ensemble::{run_ensemble, Merge, Moments, RunSpec};
use crate::error::{invalid, Result};
use crate::estimators::{
    fit_amplitude, fit_log_corrected, fit_power_law, quantiles, window, AmplitudeFit, EnsembleEstimate,
    LogCorrectedFit, PowerLawFit,
};
use crate::mdm::{simulate_mdm_replica, MdmConfig, MdmOptions};
use crate::rng::{derive_seed, stream, StreamRole};
use crate::rwrs::{delta_exponent, simulate_rwrs_replica, FirstReturn, RwrsModel, RwrsOptions};
use crate::samplers::WalkIncrementDist;
use crate::walk_core::WalkState;

/// Warn when fewer first returns than this land beyond the fit window start.
pub const MIN_TAIL_EVENTS: u64 = 100;

/// Probabilities reported for the distribution of `R_n / a_n`.
pub const RANGE_QUANTILES: [f64; 5] = [0.1, 0.25, 0.5, 0.75, 0.9];

#[derive(Debug, Clone)]
pub enum ExperimentModel {
    Rwrs(RwrsModel),
    /// The MdM walk's first coordinate.
    Mdm { p: f64 },
}

impl ExperimentModel {
    pub fn label(&self) -> String {
        match self {
            Self::Rwrs(m) => m.label(),
            Self::Mdm { p } => format!("mdm[p={}]", crate::samplers::param(*p)),
        }
    }

    /// Normalization of the range: `a_n` for RWRS, `n^(3/4)` for MdM.
    pub fn norm(&self, n: u64) -> f64 {
        match self {
            Self::Rwrs(m) => m.norm(n),
            Self::Mdm { .. } => (n as f64).powf(0.75),
        }
    }

    /// Exponent of `P(T_0 > n)` up to slowly varying factors, where known:
    /// `a_n / n` for unit-valued scenery, `-1/4` for MdM.
    pub fn predicted_survival_exponent(&self) -> Option<f64> {
        match self {
            Self::Mdm { .. } => Some(-0.25),
            Self::Rwrs(m) if m.scenery.is_unit_valued() => {
                let alpha = m.walk.index();
                Some(if alpha > 1.0 {
                    delta_exponent(alpha, 2.0).expect("valid index") - 1.0
                } else {
                    -0.5
                })
            }
            Self::Rwrs(_) => None,
        }
    }

    /// Exponent of `E[R_n]` for recurrent models.
    pub fn predicted_range_exponent(&self) -> Option<f64> {
        match self {
            Self::Mdm { .. } => Some(0.75),
            Self::Rwrs(m) => {
                let (alpha, beta) = (m.walk.index(), m.scenery.index());
                if alpha > 1.0 && beta > 1.0 {
                    delta_exponent(alpha, beta).ok()
                } else if beta < 1.0 {
                    Some(1.0)
                } else {
                    None
                }
            }
        }
    }

    /// Walk of unit index, whose survival carries a logarithmic correction.
    pub fn is_log_corrected(&self) -> bool {
        matches!(self, Self::Rwrs(m) if m.walk.index() == 1.0 && m.scenery.is_unit_valued())
    }

    fn first_return(&self, horizon: u64, seed: u64, replica: u64) -> Result<FirstReturn> {
        Ok(match self {
            Self::Rwrs(m) => simulate_rwrs_replica(horizon, m, seed, replica, &RwrsOptions::survival_only())?.t0,
            Self::Mdm { p } => {
                let opts = MdmOptions {
                    stop_at_first_return: true,
                    ..Default::default()
                };
                simulate_mdm_replica(&MdmConfig::new(*p, horizon)?, seed, replica, &opts)?.t0_1
            }
        })
    }

    /// Range at each grid point, the first return, and the full 2-d range
    /// at each grid point when requested (MdM only).
    fn range_path(
        &self,
        grid: &[u64],
        full_range: bool,
        seed: u64,
        replica: u64,
    ) -> Result<(Vec<u64>, FirstReturn, Vec<u64>)> {
        let horizon = *grid.last().expect("non-empty grid");
        Ok(match self {
            Self::Rwrs(m) => {
                let s = simulate_rwrs_replica(horizon, m, seed, replica, &RwrsOptions::with_grid(grid.to_vec()))?;
                (s.range_at, s.t0, Vec::new())
            }
            Self::Mdm { p } => {
                let opts = MdmOptions {
                    grid: grid.to_vec(),
                    track_full_range: full_range,
                    ..Default::default()
                };
                let s = simulate_mdm_replica(&MdmConfig::new(*p, horizon)?, seed, replica, &opts)?;
                (s.range1_at, s.t0_1, s.full_range_at)
            }
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentOptions {
    /// Fit window; defaults to the grid without its lowest two octaves.
    pub fit_window: Option<(u64, u64)>,
    /// Track the full two-dimensional range in MdM range runs.
    pub track_full_range: bool,
}

fn check_grid(grid: &[u64]) -> Result<()> {
    if grid.is_empty() {
        return Err(invalid("experiment grid is empty"));
    }
    if grid[0] == 0 || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("experiment grid must be strictly increasing and positive"));
    }
    Ok(())
}

fn resolve_window(grid: &[u64], opts: &ExperimentOptions) -> Result<(u64, u64)> {
    let last = *grid.last().expect("non-empty");
    let Some(w) = opts.fit_window else {
        let lo = grid
            .iter()
            .copied()
            .find(|&n| n >= grid[0].saturating_mul(4) && n < last)
            .unwrap_or(grid[0]);
        return Ok((lo, last));
    };
    if !grid.contains(&w.0) || !grid.contains(&w.1) || w.0 >= w.1 {
        return Err(invalid(format!("fit window [{}, {}] must have endpoints on the grid", w.0, w.1)));
    }
    Ok(w)
}

#[derive(Debug, Clone, Serialize)]
pub struct SurvivalReport {
    pub model: String,
    pub replicas: u64,
    /// `P(T_0 > n)` at each grid point.
    pub survival: Vec<EnsembleEstimate>,
    pub fit: Option<PowerLawFit>,
    pub predicted_exponent: Option<f64>,
    /// Amplitude of `n^(-predicted) P(T_0 > n)` over the fit window.
    pub amplitude: Option<AmplitudeFit>,
    pub log_corrected: Option<LogCorrectedFit>,
    pub fit_window: (u64, u64),
    /// First returns observed after the window start.
    pub tail_events: u64,
    pub mean_steps: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
struct SurvivalAcc {
    survive: Vec<u64>,
    tail_events: u64,
    steps: u64,
}

impl Merge for SurvivalAcc {
    fn merge(&mut self, other: Self) {
        self.survive.merge(other.survive);
        self.tail_events += other.tail_events;
        self.steps += other.steps;
    }
}

/// Empirical survival function of one first return per replica, each replica
/// censored at the top of the grid.
pub fn run_survival_experiment(
    model: &ExperimentModel,
    grid: &[u64],
    run: &RunSpec,
    opts: &ExperimentOptions,
) -> Result<SurvivalReport> {
    check_grid(grid)?;
    let horizon = *grid.last().expect("non-empty");
    let (lo, hi) = resolve_window(grid, opts)?;
    let acc = run_ensemble(
        run,
        || SurvivalAcc {
            survive: vec![0; grid.len()],
            tail_events: 0,
            steps: 0,
        },
        |replica, acc| {
            let t0 = model.first_return(horizon, run.seed, replica)?;
            for (i, &n) in grid.iter().enumerate() {
                acc.survive[i] += t0.exceeds(n) as u64;
            }
            if let FirstReturn::At(t) = t0 {
                acc.tail_events += (t > lo) as u64;
            }
            acc.steps += t0.time();
            Ok(())
        },
    )?;
    let label = "survival";
    let survival: Vec<EnsembleEstimate> = grid
        .iter()
        .zip(&acc.survive)
        .map(|(&n, &hits)| EnsembleEstimate::from_proportion(label, n, hits, run.replicas))
        .collect();
    let mut warnings = Vec::new();
    if acc.tail_events < MIN_TAIL_EVENTS {
        warnings.push(format!(
            "only {} first returns beyond n={lo}; tail estimates are unreliable",
            acc.tail_events
        ));
    }
    let points: Vec<_> = survival.iter().map(EnsembleEstimate::point).collect();
    let in_window: Vec<_> = window(&points, lo, hi).into_iter().filter(|p| p.1 > 0.0).collect();
    let fit = match fit_power_law(&in_window) {
        Ok(f) => {
            if f.poor_fit {
                warnings.push(format!("power-law fit has r^2 = {:.3}", f.r_squared));
            }
            Some(f)
        }
        Err(e) => {
            warnings.push(format!("no power-law fit: {e}"));
            None
        }
    };
    let predicted = model.predicted_survival_exponent();
    let amplitude = predicted.and_then(|e| fit_amplitude(&in_window, e).ok());
    let log_corrected = if model.is_log_corrected() {
        fit_log_corrected(&in_window, -0.5).ok()
    } else {
        None
    };
    Ok(SurvivalReport {
        model: model.label(),
        replicas: run.replicas,
        survival,
        fit,
        predicted_exponent: predicted,
        amplitude,
        log_corrected,
        fit_window: (lo, hi),
        tail_events: acc.tail_events,
        mean_steps: acc.steps as f64 / run.replicas as f64,
        warnings,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RangeReport {
    pub model: String,
    pub replicas: u64,
    pub mean_range: Vec<EnsembleEstimate>,
    /// `E[R_n] / a_n`.
    pub ratio: Vec<EnsembleEstimate>,
    /// `E[R_n] / n`.
    pub over_n: Vec<EnsembleEstimate>,
    /// `E[#{M_0..M_n}] / n` (MdM with full-range tracking only).
    pub full_range_over_n: Vec<EnsembleEstimate>,
    pub fit: Option<PowerLawFit>,
    pub predicted_exponent: Option<f64>,
    pub fit_window: (u64, u64),
    /// Quantiles of `R_n / a_n` at the top of the grid.
    pub ratio_quantiles: Vec<(f64, f64)>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
struct RangeAcc {
    range: Vec<Moments>,
    full: Vec<Moments>,
    top: Vec<f64>,
}

impl Merge for RangeAcc {
    fn merge(&mut self, other: Self) {
        self.range.merge(other.range);
        self.full.merge(other.full);
        self.top.extend(other.top);
    }
}

/// Range `R_n` at every grid point along full-horizon replicas.
pub fn run_range_experiment(
    model: &ExperimentModel,
    grid: &[u64],
    run: &RunSpec,
    opts: &ExperimentOptions,
) -> Result<RangeReport> {
    check_grid(grid)?;
    let (lo, hi) = resolve_window(grid, opts)?;
    let full = opts.track_full_range && matches!(model, ExperimentModel::Mdm { .. });
    let top_norm = model.norm((*grid.last().expect("non-empty")).max(2));
    let acc = run_ensemble(
        run,
        || RangeAcc {
            range: vec![Moments::default(); grid.len()],
            full: vec![Moments::default(); if full { grid.len() } else { 0 }],
            top: Vec::new(),
        },
        |replica, acc| {
            let (ranges, _, full_ranges) = model.range_path(grid, full, run.seed, replica)?;
            for (i, &r) in ranges.iter().enumerate() {
                acc.range[i].push(r as f64);
            }
            for (i, &r) in full_ranges.iter().enumerate() {
                acc.full[i].push(r as f64 / grid[i] as f64);
            }
            acc.top.push(*ranges.last().expect("non-empty") as f64 / top_norm);
            Ok(())
        },
    )?;
    let mean_range: Vec<EnsembleEstimate> = grid
        .iter()
        .zip(&acc.range)
        .map(|(&n, m)| EnsembleEstimate::from_moments("mean_range", n, m))
        .collect();
    let ratio = mean_range
        .iter()
        .map(|e| e.scaled("range_over_norm", model.norm(e.n.max(2))))
        .collect();
    let over_n = mean_range.iter().map(|e| e.scaled("range_over_n", e.n as f64)).collect();
    let full_range_over_n = grid
        .iter()
        .zip(&acc.full)
        .map(|(&n, m)| EnsembleEstimate::from_moments("full_range_over_n", n, m))
        .collect();
    let mut warnings = Vec::new();
    let points: Vec<_> = mean_range.iter().map(EnsembleEstimate::point).collect();
    let fit = match fit_power_law(&window(&points, lo, hi)) {
        Ok(f) => {
            if f.poor_fit {
                warnings.push(format!("power-law fit has r^2 = {:.3}", f.r_squared));
            }
            Some(f)
        }
        Err(e) => {
            warnings.push(format!("no power-law fit: {e}"));
            None
        }
    };
    Ok(RangeReport {
        model: model.label(),
        replicas: run.replicas,
        mean_range,
        ratio,
        over_n,
        full_range_over_n,
        fit,
        predicted_exponent: model.predicted_range_exponent(),
        fit_window: (lo, hi),
        ratio_quantiles: quantiles(&acc.top, &RANGE_QUANTILES),
        warnings,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub model: String,
    pub n: u64,
    /// `E[R_n]`.
    pub range: EnsembleEstimate,
    /// `1 + Σ_{k<=n} P(T_0 > k)`, from an independent batch.
    pub one_plus_survival_sum: EnsembleEstimate,
    pub z_score: f64,
    pub pass: bool,
}

/// Checks `E[R_n] = 1 + Σ_{k<=n} P(T_0 > k)` with two disjoint batches: one
/// for the range and one for the survival sum. Passes within 3 combined
/// standard errors.
pub fn mean_range_identity_check(model: &ExperimentModel, n: u64, run: &RunSpec) -> Result<IdentityReport> {
    if n == 0 {
        return Err(invalid("identity check needs n >= 1"));
    }
    let range = run_ensemble(run, Moments::default, |replica, acc| {
        let (r, _, _) = model.range_path(&[n], false, run.seed, replica)?;
        acc.push(r[0] as f64);
        Ok(())
    })?;
    let other = run.reseeded(derive_seed(run.seed, 0x1d));
    let sum = run_ensemble(&other, Moments::default, |replica, acc| {
        let t0 = model.first_return(n, other.seed, replica)?;
        // Σ_{k=1..n} 1{T_0 > k} = min(T_0, n + 1) - 1
        let t = match t0 {
            FirstReturn::At(t) => t,
            FirstReturn::Beyond(_) => n + 1,
        };
        acc.push(t as f64);
        Ok(())
    })?;
    let range = EnsembleEstimate::from_moments("mean_range", n, &range);
    let one_plus_survival_sum = EnsembleEstimate::from_moments("one_plus_survival_sum", n, &sum);
    let z = range.z_score(&one_plus_survival_sum);
    Ok(IdentityReport {
        model: model.label(),
        n,
        range,
        one_plus_survival_sum,
        z_score: z,
        pass: z <= 3.0,
    })
}

/// Monte Carlo `E[V_k]` of the walk at each grid point.
pub fn mean_self_intersections(walk: &WalkIncrementDist, grid: &[u64], run: &RunSpec) -> Result<Vec<EnsembleEstimate>> {
    check_grid(grid)?;
    let horizon = *grid.last().expect("non-empty");
    let acc = run_ensemble(
        run,
        || vec![Moments::default(); grid.len()],
        |replica, acc| {
            let mut rng = stream(run.seed, replica, StreamRole::Walk);
            let mut state = WalkState::default();
            let mut next = 0;
            for k in 1..=horizon {
                state.step(walk, &mut rng);
                if grid[next] == k {
                    acc[next].push(state.self_intersections as f64);
                    next += 1;
                }
            }
            Ok(())
        },
    )?;
    Ok(grid
        .iter()
        .zip(&acc)
        .map(|(&n, m)| EnsembleEstimate::from_moments("mean_self_intersections", n, m))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_window_drops_two_octaves_on_any_grid() {
        let opts = ExperimentOptions::default();
        assert_eq!(resolve_window(&dyadic_grid(8, 16), &opts).unwrap(), (1 << 10, 1 << 16));
        assert_eq!(resolve_window(&[100, 1000, 10_000], &opts).unwrap(), (1000, 10_000));
        assert_eq!(resolve_window(&[100, 200, 300], &opts).unwrap(), (100, 300));
        let bad = ExperimentOptions {
            fit_window: Some((200, 1000)),
            ..Default::default()
        };
        assert!(resolve_window(&[100, 1000], &bad).is_err());
    }
    use crate::estimators::dyadic_grid;
    use crate::samplers::SceneryDist;

    fn simple_rademacher() -> ExperimentModel {
        ExperimentModel::Rwrs(RwrsModel::new(WalkIncrementDist::Simple, SceneryDist::Rademacher).unwrap())
    }

    #[test]
    fn predicted_exponents() {
        assert_eq!(simple_rademacher().predicted_survival_exponent(), Some(-0.25));
        assert_eq!(ExperimentModel::Mdm { p: 0.3 }.predicted_survival_exponent(), Some(-0.25));
        let cauchy = ExperimentModel::Rwrs(
            RwrsModel::new(WalkIncrementDist::heavy_tail(1.0).unwrap(), SceneryDist::Rademacher).unwrap(),
        );
        assert_eq!(cauchy.predicted_survival_exponent(), Some(-0.5));
        assert!(cauchy.is_log_corrected());
        assert_eq!(simple_rademacher().predicted_range_exponent(), Some(0.75));
    }

    #[test]
    fn survival_curve_is_nonincreasing() {
        let grid = dyadic_grid(2, 8);
        let r = run_survival_experiment(&simple_rademacher(), &grid, &RunSpec::new(4, 4000), &Default::default())
            .unwrap();
        assert_eq!(r.fit_window, (16, 256));
        for w in r.survival.windows(2) {
            assert!(w[1].value <= w[0].value);
        }
        let fit = r.fit.unwrap();
        assert!((fit.exponent + 0.25).abs() < 0.1, "{}", fit.exponent);
    }

    #[test]
    fn range_curve_is_nondecreasing() {
        let grid = dyadic_grid(2, 8);
        let r = run_range_experiment(
            &ExperimentModel::Mdm { p: 1.0 / 3.0 },
            &grid,
            &RunSpec::new(5, 500),
            &ExperimentOptions {
                track_full_range: true,
                ..Default::default()
            },
        )
        .unwrap();
        for w in r.mean_range.windows(2) {
            assert!(w[1].value >= w[0].value);
        }
        assert_eq!(r.full_range_over_n.len(), grid.len());
        assert!(r.full_range_over_n.iter().all(|e| e.value > 0.0 && e.value <= 1.0 + 1.0 / e.n as f64));
        assert_eq!(r.ratio_quantiles.len(), RANGE_QUANTILES.len());
    }

    #[test]
    fn identity_holds_at_small_n() {
        for model in [simple_rademacher(), ExperimentModel::Mdm { p: 1.0 / 3.0 }] {
            let r = mean_range_identity_check(&model, 16, &RunSpec::new(6, 20_000)).unwrap();
            assert!(r.pass, "{r:?}");
        }
    }

    #[test]
    fn self_intersections_at_two_steps() {
        let e = mean_self_intersections(&WalkIncrementDist::Simple, &[1, 2], &RunSpec::new(1, 100)).unwrap();
        assert_eq!(e[0].value, 1.0);
        assert_eq!(e[1].value, 2.0);
        assert_eq!(e[1].stderr, 0.0);
    }

    #[test]
    fn window_must_lie_on_grid() {
        let opts = ExperimentOptions {
            fit_window: Some((3, 64)),
            ..Default::default()
        };
        assert!(run_survival_experiment(&simple_rademacher(), &dyadic_grid(1, 6), &RunSpec::new(1, 10), &opts).is_err());
    }
}
