use anyhow::{bail, Result};
use serde::Serialize;

use rwrs_core::config::{Mode, ModelSpec, RunConfig};
use rwrs_core::ensemble::{run_ensemble, Merge};
use rwrs_core::estimators::EnsembleEstimate;
use rwrs_core::experiments::{run_range_experiment, run_survival_experiment, ExperimentModel, ExperimentOptions};
use rwrs_core::ks_limit::{estimate_kappa, extrapolate, ks_ensemble, rwrs_tail_constant, theta, Extrapolation, KappaEstimate};
use rwrs_core::mdm::{mdm_ensemble, simulate_mdm_replica, MdmOptions};
use rwrs_core::oracle::{exact_mdm, exact_rwrs, ExactTable, Quantity};
use rwrs_core::output::{
    exact_rows, plot_points, range_rows, render_json, render_ks_table, render_mdm_table, render_plot_data,
    render_table, survival_rows, OutputDir, TableRow,
};
use rwrs_core::rwrs::simulate_rwrs_replica;
use rwrs_core::verify::{CriterionReport, Verifier, VerifyOptions};
use rwrs_core::{Error, MdmConfig, Moments, RwrsOptions, SupEstimate};

use crate::Verdict;

/// Largest distance between a fitted exponent and its prediction that counts as a pass.
const EXPONENT_TOLERANCE: f64 = 0.05;
const RANGE_SLOPE_TOLERANCE: f64 = 0.03;

fn start(cfg: &RunConfig) -> Result<OutputDir> {
    let mut out = OutputDir::create(&cfg.out)?;
    out.write("resolved.toml", &cfg.to_toml()?)?;
    Ok(out)
}

fn finish(out: &OutputDir) {
    for p in out.written() {
        println!("wrote {}", p.display());
    }
}

fn within(fit: Option<f64>, predicted: Option<f64>, tol: f64) -> Verdict {
    Some((fit? - predicted?).abs() <= tol)
}

#[derive(Serialize)]
struct Checked<'a, T> {
    pass: Verdict,
    tolerance: f64,
    #[serde(flatten)]
    report: &'a T,
}

#[derive(Debug, Clone, Default)]
struct SimAcc {
    range: Vec<Moments>,
    survive: Vec<u64>,
    records: Vec<String>,
}

impl Merge for SimAcc {
    fn merge(&mut self, other: Self) {
        self.range.merge(other.range);
        self.survive.merge(other.survive);
        self.records.extend(other.records);
    }
}

#[derive(Serialize)]
struct SimulateSummary {
    model: String,
    replicas: u64,
    horizon: u64,
    mc: Option<Vec<TableRow>>,
    exact: Option<ExactSummary>,
    warnings: Vec<String>,
}

#[derive(Serialize)]
struct ExactSummary {
    label: String,
    n: u64,
    rational: bool,
    enumeration_size: String,
    normalization_error: f64,
    identity_holds: bool,
    rows: Vec<TableRow>,
}

fn exact_table(cfg: &RunConfig) -> Result<ExactTable> {
    let budget = cfg.budget as u128;
    Ok(match &cfg.model {
        ModelSpec::Rwrs { walk, scenery } => exact_rwrs(cfg.oracle_n, &walk.build()?, &scenery.build()?, budget)?,
        ModelSpec::Mdm { p } => exact_mdm(cfg.oracle_n, *p, budget)?,
        ModelSpec::Ks { .. } => bail!(Error::Config("the oracle needs an rwrs or mdm model".into())),
    })
}

fn identity_holds(t: &ExactTable) -> bool {
    let (range, survival) = if t.get(Quantity::MeanRange, 1).is_some() {
        (Quantity::MeanRange, Quantity::Survival)
    } else {
        (Quantity::MeanRange1, Quantity::Survival1)
    };
    let mut acc = 1.0;
    (1..=t.n).all(|k| {
        acc += t.value(survival, k);
        let r = t.value(range, k);
        (r - acc).abs() <= 1e-12 * r.max(1.0)
    })
}

fn exact_summary(t: &ExactTable) -> ExactSummary {
    ExactSummary {
        label: t.label.clone(),
        n: t.n,
        rational: t.rows.iter().all(|r| r.value.as_rational().is_some()),
        enumeration_size: t.enumeration_size.to_string(),
        normalization_error: t.normalization_error,
        identity_holds: identity_holds(t),
        rows: exact_rows(t),
    }
}

pub fn simulate(cfg: &RunConfig) -> Result<Verdict> {
    let model = cfg.model.experiment_model()?;
    let grid = cfg.grid.points()?;
    let horizon = *grid.last().expect("grid is non-empty");
    let mut out = start(cfg)?;
    let run = cfg.run_spec();
    let mut summary = SimulateSummary {
        model: model.label(),
        replicas: cfg.replicas,
        horizon,
        mc: None,
        exact: None,
        warnings: Vec::new(),
    };
    let mut verdict = None;
    if cfg.mode != Mode::Oracle {
        let (rows, plot, records) = match &model {
            ExperimentModel::Rwrs(m) => {
                let opts = RwrsOptions::with_grid(grid.clone());
                let acc = run_ensemble(
                    &run,
                    || SimAcc {
                        range: vec![Moments::default(); grid.len()],
                        survive: vec![0; grid.len()],
                        records: Vec::new(),
                    },
                    |replica, acc| {
                        let s = simulate_rwrs_replica(horizon, m, run.seed, replica, &opts)?;
                        for (i, &n) in grid.iter().enumerate() {
                            acc.range[i].push(s.range_at[i] as f64);
                            acc.survive[i] += s.t0.exceeds(n) as u64;
                        }
                        if cfg.per_replica {
                            acc.records.push(format!(
                                "{replica},{},{},{},{},{},{}\n",
                                s.t0.time(),
                                s.t0.is_censored(),
                                s.range,
                                s.running_min,
                                s.running_max,
                                s.final_z
                            ));
                        }
                        Ok(())
                    },
                )?;
                let mut range = Vec::new();
                let mut rows = Vec::new();
                for (i, &n) in grid.iter().enumerate() {
                    range.push(EnsembleEstimate::from_moments("mean_range", n, &acc.range[i]));
                }
                rows.extend(range.iter().map(TableRow::from_estimate));
                rows.extend(grid.iter().enumerate().map(|(i, &n)| {
                    TableRow::from_estimate(&EnsembleEstimate::from_proportion("survival", n, acc.survive[i], run.replicas))
                }));
                let header = "replica,t0,censored,range,min_z,max_z,final_z\n";
                (rows, plot_points(&range), header.to_string() + &acc.records.concat())
            }
            ExperimentModel::Mdm { p } => {
                let mdm_cfg = MdmConfig::new(*p, horizon)?;
                let ens = mdm_ensemble(&mdm_cfg, &grid, &run, cfg.track_full_range)?;
                out.write("mdm.csv", &render_mdm_table(&ens.rows)?)?;
                summary.warnings.extend(ens.warnings.iter().cloned());
                let plot: Vec<_> = ens.rows.iter().map(|r| (r.n as f64, r.survival, r.survival_stderr)).collect();
                let mut records = String::from("replica,t0_1,censored,range1,full_range,at_origin\n");
                if cfg.per_replica {
                    let opts = MdmOptions {
                        track_full_range: cfg.track_full_range,
                        ..Default::default()
                    };
                    let acc = run_ensemble(
                        &run,
                        SimAcc::default,
                        |replica, acc| {
                            let s = simulate_mdm_replica(&mdm_cfg, run.seed, replica, &opts)?;
                            acc.records.push(format!(
                                "{replica},{},{},{},{},{}\n",
                                s.t0_1.time(),
                                s.t0_1.is_censored(),
                                s.range1,
                                s.full_range.map(|f| f.to_string()).unwrap_or_default(),
                                s.at_origin
                            ));
                            Ok(())
                        },
                    )?;
                    records += &acc.records.concat();
                }
                let rows = ens
                    .rows
                    .iter()
                    .flat_map(|r| {
                        [
                            TableRow::from_estimate(&EnsembleEstimate {
                                label: "survival1".into(),
                                n: r.n,
                                value: r.survival,
                                stderr: r.survival_stderr,
                                replicas: r.replicas,
                            }),
                            TableRow::from_estimate(&EnsembleEstimate {
                                label: "mean_range1".into(),
                                n: r.n,
                                value: r.mean_range1,
                                stderr: r.range1_stderr,
                                replicas: r.replicas,
                            }),
                        ]
                    })
                    .collect();
                (rows, plot, records)
            }
        };
        out.write("table.csv", &render_table(&rows)?)?;
        out.write("plot.csv", &render_plot_data(&plot)?)?;
        if cfg.per_replica {
            out.write("replicas.csv", &records)?;
        }
        summary.mc = Some(rows);
    }
    if cfg.mode != Mode::Mc {
        let t = exact_table(cfg)?;
        let s = exact_summary(&t);
        out.write("exact.csv", &render_table(&s.rows)?)?;
        verdict = Some(s.identity_holds);
        summary.exact = Some(s);
    }
    out.write("summary.json", &render_json(&summary)?)?;
    finish(&out);
    Ok(verdict)
}

pub fn survival(cfg: &RunConfig) -> Result<Verdict> {
    let model = cfg.model.experiment_model()?;
    let grid = cfg.grid.points()?;
    let opts = ExperimentOptions {
        fit_window: cfg.fit_window(),
        track_full_range: cfg.track_full_range,
    };
    let mut out = start(cfg)?;
    let r = run_survival_experiment(&model, &grid, &cfg.run_spec(), &opts)?;
    let pass = within(r.fit.as_ref().map(|f| f.exponent), r.predicted_exponent, EXPONENT_TOLERANCE);
    out.write("survival.csv", &render_table(&survival_rows(&r))?)?;
    out.write("plot.csv", &render_plot_data(&plot_points(&r.survival))?)?;
    out.write(
        "summary.json",
        &render_json(&Checked {
            pass,
            tolerance: EXPONENT_TOLERANCE,
            report: &r,
        })?,
    )?;
    match (&r.fit, r.predicted_exponent) {
        (Some(f), Some(p)) => println!(
            "{}: exponent {:.4} ± {:.4} (predicted {p:.4}) over [{}, {}]",
            r.model, f.exponent, f.exponent_stderr, f.n_lo, f.n_hi
        ),
        (Some(f), None) => println!("{}: exponent {:.4} ± {:.4}", r.model, f.exponent, f.exponent_stderr),
        (None, _) => println!("{}: no fit", r.model),
    }
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
    finish(&out);
    Ok(pass)
}

pub fn range(cfg: &RunConfig) -> Result<Verdict> {
    let model = cfg.model.experiment_model()?;
    let grid = cfg.grid.points()?;
    let opts = ExperimentOptions {
        fit_window: cfg.fit_window(),
        track_full_range: cfg.track_full_range,
    };
    let mut out = start(cfg)?;
    let r = run_range_experiment(&model, &grid, &cfg.run_spec(), &opts)?;
    let pass = within(r.fit.as_ref().map(|f| f.exponent), r.predicted_exponent, RANGE_SLOPE_TOLERANCE);
    out.write("range.csv", &render_table(&range_rows(&r))?)?;
    out.write("plot.csv", &render_plot_data(&plot_points(&r.mean_range))?)?;
    out.write(
        "summary.json",
        &render_json(&Checked {
            pass,
            tolerance: RANGE_SLOPE_TOLERANCE,
            report: &r,
        })?,
    )?;
    if let Some(f) = &r.fit {
        println!("{}: range exponent {:.4} ± {:.4}", r.model, f.exponent, f.exponent_stderr);
    }
    if let Some(top) = r.ratio.last() {
        println!("E[R_n]/a_n at n={}: {:.4} ± {:.4}", top.n, top.value, top.stderr);
    }
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
    finish(&out);
    Ok(pass)
}

#[derive(Serialize)]
struct KsSummary {
    estimator: String,
    alpha: f64,
    theta: f64,
    estimates: Vec<SupEstimate>,
    sup: Option<Extrapolation>,
    half_width: Option<Extrapolation>,
    /// The value used for the derived constants.
    sup_estimate: f64,
    sup_estimate_stderr: f64,
    kappa: Option<KappaEstimate>,
    rwrs_tail_constant: Option<f64>,
}

pub fn ks(cfg: &RunConfig) -> Result<Verdict> {
    let (grid, ms) = cfg.model.ks_grid()?;
    let ModelSpec::Ks { p, a2, .. } = &cfg.model else {
        unreachable!("ks_grid accepted the model")
    };
    let mut out = start(cfg)?;
    let run = ks_ensemble(&grid, &ms, &cfg.run_spec())?;
    let points = |f: fn(&SupEstimate) -> (f64, f64)| -> Vec<(u64, f64, f64)> {
        run.estimates
            .iter()
            .map(|e| {
                let (v, s) = f(e);
                (e.m, v, s)
            })
            .collect()
    };
    let sup = extrapolate(&points(|e| (e.sup_mean, e.sup_stderr))).ok();
    let half_width = extrapolate(&points(|e| (e.supminf_mean / 2.0, e.supminf_stderr / 2.0))).ok();
    let mut estimates = run.estimates.clone();
    if let Some(x) = sup.filter(|x| x.extrapolated) {
        estimates.push(x.as_estimate(grid.estimator, *ms.last().expect("non-empty"), cfg.replicas));
    }
    // A symmetric limit has sup and -inf equal in law, so their average halves the variance.
    let chosen = if *a2 == 0.0 { half_width } else { sup };
    let (value, stderr) = match chosen {
        Some(x) => (x.value, x.stderr),
        None => {
            let last = run.estimates.last().expect("non-empty");
            (last.sup_mean, last.sup_stderr)
        }
    };
    let integral = grid.is_integral();
    let summary = KsSummary {
        estimator: grid.estimator.id().into(),
        alpha: grid.alpha,
        theta: theta(grid.alpha),
        estimates: estimates.clone(),
        sup,
        half_width,
        sup_estimate: value,
        sup_estimate_stderr: stderr,
        kappa: (grid.alpha == 2.0).then(|| estimate_kappa(value, *p)).transpose()?,
        rwrs_tail_constant: integral.then(|| rwrs_tail_constant(grid.alpha, value)).transpose()?,
    };
    out.write("ks.csv", &render_ks_table(&estimates)?)?;
    let plot: Vec<_> = run.estimates.iter().map(|e| (e.m as f64, e.sup_mean, e.sup_stderr)).collect();
    out.write("plot.csv", &render_plot_data(&plot)?)?;
    out.write("summary.json", &render_json(&summary)?)?;
    println!("E[sup] = {value:.4} ± {stderr:.4}");
    if let Some(k) = summary.kappa {
        println!("kappa = {:.4}, survival amplitude at p = {:.4}: {:.4}", k.kappa, k.p, k.amplitude);
    }
    finish(&out);
    Ok(None)
}

pub fn oracle(cfg: &RunConfig) -> Result<Verdict> {
    let t = exact_table(cfg)?;
    let mut out = start(cfg)?;
    let s = exact_summary(&t);
    let table = render_table(&s.rows)?;
    out.write("exact.csv", &table)?;
    let range_q = if t.get(Quantity::MeanRange, 1).is_some() {
        Quantity::MeanRange
    } else {
        Quantity::MeanRange1
    };
    let plot: Vec<_> = (1..=t.n).map(|k| (k as f64, t.value(range_q, k), 0.0)).collect();
    out.write("plot.csv", &render_plot_data(&plot)?)?;
    out.write("summary.json", &render_json(&s)?)?;
    print!("{table}");
    println!("identity E[R_n] = 1 + sum P(T0 > k): {}", if s.identity_holds { "holds" } else { "violated" });
    finish(&out);
    Ok(Some(s.identity_holds))
}

pub fn verify(cfg: &RunConfig, seed: Option<u64>, criteria: &[u8]) -> Result<Verdict> {
    let opts = VerifyOptions {
        seed: seed.unwrap_or(VerifyOptions::default().seed),
        threads: cfg.threads,
    };
    let ids: Vec<u8> = if criteria.is_empty() { (1..=10).collect() } else { criteria.to_vec() };
    if let Some(bad) = ids.iter().find(|&&id| !(1..=10).contains(&id)) {
        bail!(Error::Config(format!("no criterion {bad}; expected 1..=10")));
    }
    let mut out = start(cfg)?;
    let verifier = Verifier::new(opts);
    let mut reports: Vec<CriterionReport> = Vec::new();
    for id in ids {
        let r = verifier.criterion(id)?;
        print!("{r}");
        reports.push(r);
    }
    let pass = reports.iter().all(|r| r.pass);
    println!();
    for r in &reports {
        println!("{}", r.line());
    }
    out.write("verify.json", &render_json(&reports)?)?;
    finish(&out);
    Ok(Some(pass))
}
