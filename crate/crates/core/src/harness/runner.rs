//! Experiment driver: dispatches a validated config, writes artifacts,
//! reports pass/fail per asserted inequality.

use std::path::PathBuf;

use serde_json::json;

use crate::builtin::BuiltinSystem;
use crate::coeffs::{validate_hypothesis, InitialLaw};
use crate::convolution::{
    bichteler_jacod_check, burkholder_ratio, ito_pth_residual, JumpMartingale, ResidualSeries,
};
use crate::error::{CoreError, Result};
use crate::estimate::RunningSum;
use crate::harness::config::{ExperimentConfig, ExperimentKind};
use crate::harness::report::{write_csv, write_summary, CheckResult, Summary};
use crate::hilbert::StateVector;
use crate::solver::{map_direct_paths, picard_solve, SolverSettings};
use crate::stability::{coupled_decay, HypothesisConstants};

/// Relative floor for pathwise residuals (`>= -1e-9 * scale`).
const RESIDUAL_FLOOR: f64 = 1e-9;

#[derive(Debug)]
pub struct RunSummary {
    pub passed: bool,
    pub checks: Vec<CheckResult>,
    pub out_dir: PathBuf,
    pub summary_path: PathBuf,
}

struct KindOutput {
    results: serde_json::Value,
    checks: Vec<CheckResult>,
    csvs: Vec<(String, Vec<&'static str>, Vec<Vec<f64>>)>,
}

/// Run one experiment: validates the config, executes the kind, writes
/// `summary.json` plus per-kind CSVs into the output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let system = cfg.build_system()?;
    let out = run_kind(cfg, &system)?;

    std::fs::create_dir_all(&cfg.experiment.out)?;
    for (name, header, rows) in &out.csvs {
        write_csv(&cfg.experiment.out, name, header, rows)?;
    }
    let constants = constants_json(&system);
    let passed = out.checks.iter().all(|c| c.passed);
    let summary = Summary {
        kind: cfg.experiment.kind.as_str(),
        passed,
        checks: &out.checks,
        constants,
        results: out.results,
        config: cfg,
        generated_at: chrono::Utc::now().to_rfc3339(),
    };
    let summary_path = write_summary(&cfg.experiment.out, &summary)?;
    Ok(RunSummary { passed, checks: out.checks, out_dir: cfg.experiment.out.clone(), summary_path })
}

fn constants_json(system: &BuiltinSystem) -> serde_json::Value {
    let hc = HypothesisConstants::of(&system.spec);
    json!({
        "p": hc.p,
        "alpha": hc.alpha,
        "m": hc.m,
        "c": hc.c,
        "f": hc.f,
        "d": system.spec.growth_constant(),
        "gamma": hc.gamma(),
        "gamma_proof": hc.gamma_proof(),
        "validity_radius": system.validity_radius,
    })
}

fn run_kind(cfg: &ExperimentConfig, system: &BuiltinSystem) -> Result<KindOutput> {
    match cfg.experiment.kind {
        ExperimentKind::Validate => run_validate(cfg, system),
        ExperimentKind::Simulate => run_simulate(cfg, system),
        ExperimentKind::Picard => run_picard(cfg, system),
        ExperimentKind::Stability => run_stability(cfg, system),
        ExperimentKind::ItoCheck => run_ito_check(cfg, system),
        ExperimentKind::BjCheck => run_bj_check(cfg, system),
        ExperimentKind::BurkholderCheck => run_burkholder_check(cfg, system),
    }
}

fn settings(cfg: &ExperimentConfig) -> SolverSettings {
    SolverSettings {
        resolution: cfg.experiment.grid,
        fp_tol: cfg.experiment.fp_tol,
        max_fp_iter: cfg.experiment.max_fp_iter,
    }
}

fn run_validate(cfg: &ExperimentConfig, system: &BuiltinSystem) -> Result<KindOutput> {
    let report = validate_hypothesis(
        &system.spec,
        cfg.experiment.n_samples,
        cfg.experiment.radius,
        cfg.experiment.seed,
    )?;
    let detail = if report.passed {
        format!(
            "empirical (M,C,D,F) = ({:.6e}, {:.6e}, {:.6e}, {:.6e}) within declared",
            report.empirical_m, report.empirical_c, report.empirical_d, report.empirical_f
        )
    } else {
        report.failures.join("; ")
    };
    let checks = vec![CheckResult::new("hypothesis-constants", report.passed, detail)];
    Ok(KindOutput { results: serde_json::to_value(&report)?, checks, csvs: vec![] })
}

fn run_simulate(cfg: &ExperimentConfig, system: &BuiltinSystem) -> Result<KindOutput> {
    let sys = &system.spec;
    let horizon = sys.horizon;
    let resolution = cfg.experiment.grid;
    let seed = cfg.experiment.seed;
    let uniform: Vec<f64> = (0..=resolution)
        .map(|i| i as f64 * horizon / resolution as f64)
        .collect();

    let per_path: Vec<Vec<f64>> =
        map_direct_paths(sys, cfg.experiment.n_paths, seed, &settings(cfg), |run| {
            let x = &run.trajectory;
            Ok(uniform
                .iter()
                .map(|t| x.value(x.index_of_time(*t).expect("uniform time")).norm_sq())
                .collect())
        })?;
    let mut sums = vec![RunningSum::new(); uniform.len()];
    for row in &per_path {
        for (s, v) in sums.iter_mut().zip(row) {
            s.push(*v);
        }
    }

    let mut checks = Vec::new();
    let mut rows = Vec::with_capacity(uniform.len());
    let oracle = system.second_moment.as_ref();
    for (t, s) in uniform.iter().zip(&sums) {
        let mut row = vec![*t, s.mean(), s.stderr()];
        if let Some(f) = oracle {
            row.push(f(*t));
        }
        rows.push(row);
    }
    let header: Vec<&'static str> = if oracle.is_some() {
        vec!["t", "second_moment", "stderr", "closed_form"]
    } else {
        vec!["t", "second_moment", "stderr"]
    };

    if let Some(f) = oracle {
        let mut worst: f64 = 0.0;
        for probe in [0.25, 0.5, 1.0] {
            let t = probe * horizon;
            let idx = uniform.iter().position(|u| (*u - t).abs() < 1e-12);
            if let Some(idx) = idx {
                let expected = f(t);
                let got = sums[idx].mean();
                let tol = 0.01 * expected + 3.0 * sums[idx].stderr();
                let rel = (got - expected).abs() / expected.max(1e-300);
                worst = worst.max(rel);
                if (got - expected).abs() > tol {
                    checks.push(CheckResult::new(
                        "moment-oracle",
                        false,
                        format!("at t = {t}: MC {got} vs closed form {expected} (tol {tol})"),
                    ));
                }
            }
        }
        if checks.is_empty() {
            checks.push(CheckResult::new(
                "moment-oracle",
                true,
                format!("worst relative deviation {worst:.3e} within 1% + 3 sigma"),
            ));
        }
    }

    let terminal = sums.last().expect("nonempty").estimate(seed);
    Ok(KindOutput {
        results: json!({
            "terminal_second_moment": terminal,
            "closed_form_terminal": oracle.map(|f| f(horizon)),
        }),
        checks,
        csvs: vec![("moments.csv".into(), header, rows)],
    })
}

fn run_picard(cfg: &ExperimentConfig, system: &BuiltinSystem) -> Result<KindOutput> {
    let sys = &system.spec;
    let run = picard_solve(
        sys,
        cfg.experiment.n_iters,
        cfg.experiment.n_paths,
        cfg.experiment.seed,
        &settings(cfg),
        0.0,
    )?;
    let trace = &run.trace;

    let rows: Vec<Vec<f64>> = (0..trace.n_iters)
        .map(|n| vec![n as f64, trace.h[n].mean, trace.bound[n]])
        .collect();

    let mut checks = Vec::new();
    if sys.semigroup.alpha() <= 0.0 {
        let mut failures = Vec::new();
        for n in 1..trace.n_iters {
            let h = &trace.h[n];
            if h.mean > trace.bound[n] + 3.0 * h.stderr {
                failures.push(format!("n = {n}: h = {} > bound {}", h.mean, trace.bound[n]));
            }
        }
        checks.push(CheckResult::new(
            "picard-rate-bound",
            failures.is_empty(),
            if failures.is_empty() {
                format!(
                    "h[n] below C0 C1^n T^n / n! + 3 sigma for n = 1..{} (C0 = {:.4e}, C1 = {:.4e})",
                    trace.n_iters - 1,
                    trace.c0,
                    trace.c1
                )
            } else {
                failures.join("; ")
            },
        ));
    } else {
        checks.push(CheckResult::new(
            "picard-rate-bound",
            true,
            "skipped: factorial envelope is asserted for contraction systems only",
        ));
    }

    Ok(KindOutput {
        results: serde_json::to_value(trace)?,
        checks,
        csvs: vec![("picard_trace.csv".into(), vec!["n", "h_n", "bound_n"], rows)],
    })
}

fn run_stability(cfg: &ExperimentConfig, system: &BuiltinSystem) -> Result<KindOutput> {
    let sys = &system.spec;
    let hc = HypothesisConstants::of(sys);
    let gamma = hc.gamma();
    let x0 = sys.initial.clone();
    let x0_norm = match &x0 {
        InitialLaw::PointMass(v) => v.norm(),
        InitialLaw::UniformBall { center, .. } => center.norm(),
    };
    let y0_norm = cfg.system.y0.unwrap_or(x0_norm + 1.0);
    let y0 = InitialLaw::PointMass(StateVector::uniform_with_norm(sys.dim(), y0_norm));

    let curve = coupled_decay(
        sys,
        &x0,
        &y0,
        cfg.experiment.n_paths,
        cfg.experiment.seed,
        &settings(cfg),
    )?;
    let m0 = curve.moment[0].mean;

    let mut rows = Vec::with_capacity(curve.times.len());
    let mut failures = Vec::new();
    for (t, m) in curve.times.iter().zip(&curve.moment) {
        let envelope = (gamma * t).exp() * m0;
        rows.push(vec![*t, m.mean, m.stderr, envelope]);
        if m.mean > envelope + 3.0 * m.stderr {
            failures.push(format!("t = {t}: moment {} > envelope {envelope}", m.mean));
        }
    }
    let checks = vec![CheckResult::new(
        "decay-exponent-bound",
        failures.is_empty(),
        if failures.is_empty() {
            format!("moment(t) <= e^(gamma t) moment(0) + 3 sigma with gamma = {gamma:.6}")
        } else {
            failures.join("; ")
        },
    )];

    Ok(KindOutput {
        results: json!({
            "gamma": gamma,
            "gamma_proof": hc.gamma_proof(),
            "fitted_rate": curve.fitted_rate,
            "moment0": m0,
        }),
        checks,
        csvs: vec![(
            "decay.csv".into(),
            vec!["t", "moment", "stderr", "paper_bound"],
            rows,
        )],
    })
}

fn run_ito_check(cfg: &ExperimentConfig, system: &BuiltinSystem) -> Result<KindOutput> {
    let sys = &system.spec;
    let flat = sys.semigroup.eigenvalues().iter().all(|l| *l == 0.0);

    struct PathOutcome {
        min_rel: f64,
        worst_jump_gap: f64,
        series: Option<ResidualSeries>,
    }

    let outcomes: Vec<PathOutcome> = map_direct_paths(
        sys,
        cfg.experiment.n_paths,
        cfg.experiment.seed,
        &settings(cfg),
        |run| -> Result<PathOutcome> {
            let x = &run.trajectory;
            let jumps: Vec<(f64, StateVector)> = x
                .jump_indices()
                .iter()
                .map(|&i| (x.times()[i], x.jump_increment(i)))
                .collect();
            let series = ito_pth_residual(&sys.semigroup, x, &jumps, sys.p)?;
            let min_rel = series.min_residual() / series.scale();

            // Flat p = 2 case: each jump's correction term closes the
            // square expansion exactly.
            let mut worst_jump_gap: f64 = 0.0;
            if flat && sys.p == 2.0 {
                for &i in x.jump_indices() {
                    let left = x.left_value(i);
                    let val = x.value(i);
                    let dz = x.jump_increment(i);
                    let gap = val.norm_sq()
                        - left.norm_sq()
                        - 2.0 * left.dot(&dz)
                        - dz.norm_sq();
                    worst_jump_gap = worst_jump_gap.max(gap.abs() / series.scale());
                }
            }
            Ok(PathOutcome { min_rel, worst_jump_gap, series: Some(series) })
        },
    )?;

    let min_rel = outcomes.iter().map(|o| o.min_rel).fold(f64::INFINITY, f64::min);
    let worst_jump_gap = outcomes.iter().map(|o| o.worst_jump_gap).fold(0.0, f64::max);
    let worst = outcomes
        .iter()
        .min_by(|a, b| a.min_rel.total_cmp(&b.min_rel))
        .expect("at least one path");
    let series = worst.series.as_ref().expect("series kept");
    let rows: Vec<Vec<f64>> = (0..series.times.len())
        .map(|i| vec![series.times[i], series.lhs[i], series.rhs[i], series.residual[i]])
        .collect();

    let mut checks = vec![CheckResult::new(
        "ito-residual-floor",
        min_rel >= -RESIDUAL_FLOOR,
        format!("min residual / scale = {min_rel:.3e} (floor -1e-9), {} paths", cfg.experiment.n_paths),
    )];
    if flat && sys.p == 2.0 {
        checks.push(CheckResult::new(
            "flat-jump-equality",
            worst_jump_gap <= 1e-10,
            format!("worst jump-correction gap {worst_jump_gap:.3e} (tolerance 1e-10)"),
        ));
    }

    Ok(KindOutput {
        results: json!({
            "min_residual_over_scale": min_rel,
            "worst_jump_gap": if flat && sys.p == 2.0 { Some(worst_jump_gap) } else { None },
            "n_paths": cfg.experiment.n_paths,
        }),
        checks,
        csvs: vec![(
            "residual.csv".into(),
            vec!["t", "lhs", "rhs", "residual"],
            rows,
        )],
    })
}

fn frozen_martingale(system: &BuiltinSystem) -> JumpMartingale {
    let sys = &system.spec;
    let x_ref = match &sys.initial {
        InitialLaw::PointMass(v) => v.clone(),
        InitialLaw::UniformBall { center, .. } => center.clone(),
    };
    JumpMartingale::frozen(sys, x_ref)
}

fn run_bj_check(cfg: &ExperimentConfig, system: &BuiltinSystem) -> Result<KindOutput> {
    let mart = frozen_martingale(system);
    let p = cfg.system.p;
    let check = bichteler_jacod_check(
        &mart,
        p,
        cfg.experiment.n_paths,
        cfg.experiment.grid,
        cfg.experiment.seed,
    )?;

    let mut checks = vec![CheckResult::new(
        "maximal-moment-constant",
        check.c_hat.is_finite(),
        format!(
            "implied constant {:.4} from lhs {:.6e} vs rhs terms ({:.6e}, {:.6e})",
            check.c_hat, check.lhs_sup.mean, check.rhs_linear_term, check.rhs_pth_term
        ),
    )];
    if p == 2.0 {
        let iso = mart.time_integrated_norm_moment(2.0);
        let ok = check.lhs_sup.mean <= 4.0 * iso + 3.0 * check.lhs_sup.stderr;
        checks.push(CheckResult::new(
            "doob-l2-bound",
            ok,
            format!(
                "E sup ||M||^2 = {:.6e} vs 4 * isometry {:.6e} + 3 sigma",
                check.lhs_sup.mean,
                4.0 * iso
            ),
        ));
    }

    Ok(KindOutput { results: serde_json::to_value(&check)?, checks, csvs: vec![] })
}

fn run_burkholder_check(cfg: &ExperimentConfig, system: &BuiltinSystem) -> Result<KindOutput> {
    let sys = &system.spec;
    if sys.semigroup.alpha() > 0.0 {
        return Err(CoreError::config(
            "system.overrides.lambda",
            format!(
                "burkholder-check needs a contraction semigroup, growth bound is {}",
                sys.semigroup.alpha()
            ),
        ));
    }
    let mart = frozen_martingale(system);
    let check = burkholder_ratio(
        &sys.semigroup,
        &mart,
        cfg.system.p,
        cfg.experiment.n_paths,
        cfg.experiment.grid,
        cfg.experiment.seed,
    )?;

    let mut checks = vec![CheckResult::new(
        "maximal-ratio-finite",
        check.ratio.is_finite(),
        format!(
            "E sup ||conv||^p = {:.6e}, E [M]^(p/2) = {:.6e}, ratio {:.4}",
            check.lhs.mean, check.rhs.mean, check.ratio
        ),
    )];
    let flat = sys.semigroup.eigenvalues().iter().all(|l| *l == 0.0);
    if flat && cfg.system.p == 2.0 {
        let margin = 3.0 * (check.lhs.stderr.powi(2) + 16.0 * check.rhs.stderr.powi(2)).sqrt();
        let ok = check.lhs.mean <= 4.0 * check.rhs.mean + margin;
        checks.push(CheckResult::new(
            "doob-l2-bound",
            ok,
            format!(
                "E sup ||M||^2 = {:.6e} vs 4 E [M] = {:.6e} + margin {margin:.3e}",
                check.lhs.mean,
                4.0 * check.rhs.mean
            ),
        ));
    }

    Ok(KindOutput { results: serde_json::to_value(&check)?, checks, csvs: vec![] })
}
