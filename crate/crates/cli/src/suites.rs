//! Verification suites behind `singular verify`.

use std::path::Path;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use singular_core::diagnostics::{
    energy_law, kato_residual, linear_fit, tail_exponents, torsion_function, ExponentFit, Verdict,
    ENERGY_LEVELS, KATO_TOL, TAIL_MIN_R2,
};
use singular_core::mesh::min_on_compact;
use singular_core::solver::{
    build_sub_super, comparison_check, distance_bound_stable, distance_lower_bound_check,
    monotone_check, solve_auxiliary_v, solve_clamped, solve_regularized, solve_sequence,
    uniqueness_probe, InitialGuess, SequenceResult,
};
use singular_core::{
    GridFunction, ProblemSpec, RadonMeasure, RegularizedProblem, ScalarField, SingularNonlinearity,
    SolverConfig,
};

use crate::commands::spec_for;
use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{num, write_dat, Table};

pub const SUITES: &[&str] = &[
    "lower_bound",
    "monotone",
    "energy_law",
    "tails",
    "kato",
    "uniqueness",
    "sandwich",
    "manufactured",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    NotApplicable,
    Inconclusive,
    /// Reported for context; never fails the run.
    Info,
}

impl Status {
    fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::NotApplicable => "n/a",
            Status::Inconclusive => "inconclusive",
            Status::Info => "info",
        }
    }

    fn of(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub observed: f64,
    pub bound: f64,
    pub status: Status,
}

impl Check {
    fn upper(name: impl Into<String>, observed: f64, bound: f64) -> Self {
        Check {
            name: name.into(),
            observed,
            bound,
            status: Status::of(observed <= bound),
        }
    }

    fn lower(name: impl Into<String>, observed: f64, bound: f64) -> Self {
        Check {
            name: name.into(),
            observed,
            bound,
            status: Status::of(observed > bound),
        }
    }

    fn with(name: impl Into<String>, observed: f64, bound: f64, status: Status) -> Self {
        Check {
            name: name.into(),
            observed,
            bound,
            status,
        }
    }
}

/// Finest regularization level in the schedule.
fn last_level(cfg: &RunConfig) -> u64 {
    *cfg.schedule.last().expect("schedule is validated non-empty")
}

fn sequence(spec: &ProblemSpec, cfg: &RunConfig) -> Result<SequenceResult, CliError> {
    let seq = solve_sequence(spec, &cfg.schedule, &cfg.solver)?;
    if seq.aborted {
        let last = seq.last().expect("aborted sequences hold the failing level");
        return Err(CliError::Nonconvergence(format!(
            "level n={} stopped after {} iterations (gap {:e})",
            last.n, last.result.iterations, last.result.residual
        )));
    }
    Ok(seq)
}

fn converged(r: singular_core::SolveResult, what: &str) -> Result<singular_core::SolveResult, CliError> {
    if r.converged {
        Ok(r)
    } else {
        Err(CliError::Nonconvergence(format!(
            "{what}: {} iterations (gap {:e})",
            r.iterations, r.residual
        )))
    }
}

fn top_half_spread(xs: &[f64]) -> (f64, f64) {
    let top = &xs[xs.len() / 2..];
    let lo = top.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = top.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, if hi > 0.0 { (hi - lo) / hi } else { f64::INFINITY })
}

fn lower_bound(cfg: &RunConfig, _out: &Path) -> Result<Vec<Check>, CliError> {
    let n = last_level(cfg);
    let mut checks = Vec::new();
    let mut ratios = Vec::new();
    for cells in [cfg.cells, 2 * cfg.cells] {
        let spec = spec_for(cfg, cfg.gamma, cells, 1.0)?.with_level(n);
        let v = converged(solve_auxiliary_v(&spec, &cfg.solver)?, "auxiliary solve")?;
        ratios.push(distance_lower_bound_check(&v.u));
    }
    checks.push(Check::lower(format!("min_v_over_d_cells{}", cfg.cells), ratios[0], 0.0));
    checks.push(Check::lower(format!("min_v_over_d_cells{}", 2 * cfg.cells), ratios[1], 0.0));
    let factor = ratios[0].max(ratios[1]) / ratios[0].min(ratios[1]);
    checks.push(Check::with(
        "refinement_factor",
        factor,
        2.0,
        Status::of(distance_bound_stable(ratios[0], ratios[1])),
    ));

    let spec = spec_for(cfg, cfg.gamma, cfg.cells, 1.0)?.with_level(n);
    let u = converged(solve_regularized(&spec, &cfg.solver)?, "solve")?;
    for &m in &cfg.margins {
        match min_on_compact(&u.u, m) {
            Ok(c) => checks.push(Check::lower(format!("compact_min_{m}"), c, 0.0)),
            Err(_) => checks.push(Check::with(format!("compact_min_{m}"), f64::NAN, 0.0, Status::NotApplicable)),
        }
    }
    Ok(checks)
}

fn monotone(cfg: &RunConfig, _out: &Path) -> Result<Vec<Check>, CliError> {
    let spec = spec_for(cfg, cfg.gamma, cfg.cells, 1.0)?;
    let v_seq = sequence(&spec.without_measure(), cfg)?;
    let u_seq = sequence(&spec, cfg)?;
    let tol = cfg.solver.tol_mono;
    let mut checks = Vec::new();
    if v_seq.levels.len() >= 2 {
        let report = monotone_check(&v_seq.solutions(), tol)?;
        checks.push(Check::upper("v_monotone_in_n", report.max_violation, tol));
    } else {
        checks.push(Check::with("v_monotone_in_n", f64::NAN, tol, Status::NotApplicable));
    }
    let mut violation: f64 = 0.0;
    let mut minima = vec![Vec::new(); cfg.margins.len()];
    for (u, v) in u_seq.levels.iter().zip(&v_seq.levels) {
        let report = comparison_check(&u.result.u, &v.result.u, &[], tol)?;
        violation = violation.max(report.violation);
        for (k, &m) in cfg.margins.iter().enumerate() {
            if let Ok(c) = min_on_compact(&u.result.u, m) {
                minima[k].push(c);
            }
        }
    }
    checks.push(Check::upper("u_dominates_v", violation, tol));
    for (k, &m) in cfg.margins.iter().enumerate() {
        if minima[k].len() != u_seq.levels.len() {
            checks.push(Check::with(format!("compact_min_{m}"), f64::NAN, 0.0, Status::NotApplicable));
            continue;
        }
        let (lo, spread) = top_half_spread(&minima[k]);
        checks.push(Check::lower(format!("compact_min_{m}"), lo, 0.0));
        checks.push(Check::upper(format!("compact_spread_{m}"), spread, 0.10));
    }
    Ok(checks)
}

fn energy(cfg: &RunConfig, out: &Path) -> Result<Vec<Check>, CliError> {
    let bound = cfg.gamma + 0.15;
    if cfg.gamma < 1.0 {
        return Ok(vec![Check::with("energy_slope", f64::NAN, bound, Status::NotApplicable)]);
    }
    let seq = sequence(&spec_for(cfg, cfg.gamma, cfg.cells, 1.0)?, cfg)?;
    let mut checks = Vec::new();
    let mut last = Vec::new();
    for level in &seq.levels {
        let (energies, fit) = energy_law(&level.result.u, &ENERGY_LEVELS, cfg.gamma, 0.15)?;
        checks.push(Check::upper(format!("energy_slope_n{}", level.n), fit.slope, bound));
        last = energies;
    }
    let rows: Vec<(f64, f64)> = ENERGY_LEVELS.iter().copied().zip(last).collect();
    write_dat(out, "energy_law.dat", &rows)?;
    Ok(checks)
}

fn fit_checks(prefix: &str, fit: &ExponentFit) -> Vec<Check> {
    let slope_status = match fit.verdict {
        Verdict::Pass => Status::Pass,
        Verdict::Fail => Status::Fail,
        Verdict::Inconclusive => Status::Inconclusive,
        Verdict::NotApplicable => Status::NotApplicable,
    };
    let r2_status = match slope_status {
        Status::Pass | Status::Fail => Status::of(fit.r_squared >= TAIL_MIN_R2),
        other => other,
    };
    vec![
        Check::with(format!("{prefix}_slope"), fit.slope, fit.bound, slope_status),
        Check::with(format!("{prefix}_r2"), fit.r_squared, TAIL_MIN_R2, r2_status),
    ]
}

fn tails(cfg: &RunConfig, _out: &Path) -> Result<Vec<Check>, CliError> {
    if cfg.dim != 3 {
        let na = ExponentFit::not_applicable(f64::NAN);
        let mut checks = fit_checks("gradient_tail", &na);
        checks.extend(fit_checks("u_tail", &na));
        return Ok(checks);
    }
    let seq = sequence(&spec_for(cfg, cfg.gamma, cfg.cells, 1.0)?, cfg)?;
    let u = &seq.last().expect("non-empty schedule").result.u;
    let report = tail_exponents(u)?;
    let mut checks = fit_checks("gradient_tail", &report.gradient);
    checks.extend(fit_checks("u_tail", &report.value));
    Ok(checks)
}

fn kato(cfg: &RunConfig, _out: &Path) -> Result<Vec<Check>, CliError> {
    let n = last_level(cfg);
    let spec = spec_for(cfg, cfg.gamma, cfg.cells, 1.0)?.with_level(n);
    let p1 = RegularizedProblem::new(&spec)?;
    let p2 = RegularizedProblem::new(&spec.with_measure(spec.mu.scaled(cfg.kato_mu2_scale)))?;
    let u1 = converged(p1.solve(&cfg.solver)?, "kato first solve")?;
    let u2 = converged(p2.solve(&cfg.solver)?, "kato second solve")?;
    let phi0 = torsion_function(&spec.grid)?;
    let f = p1.f_n_field();
    let h = |t: f64| p1.h_n(t);
    let forward = kato_residual(&u1, &u2, p1.measure(), p2.measure(), &f, &h, &phi0)?;
    let reverse = kato_residual(&u2, &u1, p2.measure(), p1.measure(), &f, &h, &phi0)?;
    Ok(vec![
        Check::with("residual_forward", forward.residual, -KATO_TOL, Status::of(forward.pass)),
        Check::with("residual_reverse", reverse.residual, -KATO_TOL, Status::of(reverse.pass)),
        Check::with("residual_forward_unrestricted", forward.residual_unrestricted, -KATO_TOL, Status::Info),
        Check::with("residual_reverse_unrestricted", reverse.residual_unrestricted, -KATO_TOL, Status::Info),
    ])
}

fn uniqueness(cfg: &RunConfig, _out: &Path) -> Result<Vec<Check>, CliError> {
    const BOUND: f64 = 1e-8;
    let h = cfg.nonlinearity(cfg.gamma)?;
    if !h.strictly_decreasing() {
        return Ok(vec![
            Check::with("cold_vs_super", f64::NAN, BOUND, Status::NotApplicable),
            Check::with("cold_vs_random", f64::NAN, BOUND, Status::NotApplicable),
        ]);
    }
    let spec = spec_for(cfg, cfg.gamma, cfg.cells, 1.0)?.with_level(last_level(cfg));
    let probe = uniqueness_probe(&spec, &cfg.solver)?;
    let cold = converged(probe.cold, "cold start")?;
    converged(probe.from_super, "supersolution start")?;

    let mut rng = StdRng::seed_from_u64(cfg.seed);
    let top = 2.0 * cold.u.max_value().max(1.0);
    let values = (0..spec.grid.interior_count()).map(|_| rng.random_range(0.0..top)).collect();
    let start = GridFunction::new(spec.grid.clone(), values)?;
    let random = converged(
        solve_regularized(
            &spec,
            &SolverConfig {
                initial: InitialGuess::Given(start),
                ..cfg.solver.clone()
            },
        )?,
        "random start",
    )?;
    Ok(vec![
        Check::upper("cold_vs_super", probe.max_diff, BOUND),
        Check::upper("cold_vs_random", cold.u.max_abs_diff(&random.u)?, BOUND),
    ])
}

fn sandwich(cfg: &RunConfig, _out: &Path) -> Result<Vec<Check>, CliError> {
    let tol = cfg.solver.tol_mono;
    let spec = spec_for(cfg, cfg.gamma, cfg.cells, 1.0)?.with_level(last_level(cfg));
    if spec.grid.points().any(|x| !(spec.f.eval(x) > 0.0)) {
        return Ok(vec![Check::with("clamped_breach", f64::NAN, tol, Status::NotApplicable)]);
    }
    let pair = build_sub_super(&spec, &cfg.solver)?;
    converged(pair.v.clone(), "subsolution")?;
    let breach = match solve_clamped(&spec, &pair.sandwich, &cfg.solver) {
        Ok(c) => converged(c.result, "clamped solve").map(|_| c.breach)?,
        Err(singular_core::Error::SandwichBreach { breach, .. }) => breach,
        Err(e) => return Err(e.into()),
    };
    let free = converged(solve_regularized(&spec, &cfg.solver)?, "unclamped solve")?;
    let (free_breach, _) = pair.sandwich.breach(&free.u)?;
    Ok(vec![
        Check::upper("clamped_breach", breach, tol),
        Check::upper("unclamped_breach", free_breach, tol),
    ])
}

fn manufactured(cfg: &RunConfig, out: &Path) -> Result<Vec<Check>, CliError> {
    const BOUND: f64 = 2e-3;
    let n = last_level(cfg).max(1 << 20);
    let h = SingularNonlinearity::pure_power(cfg.gamma)?;
    let mut rows = Vec::new();
    for cells in [cfg.cells / 2, cfg.cells, 2 * cfg.cells] {
        let grid = cfg.grid(cells.max(2))?;
        let spec = ProblemSpec::new(
            grid.clone(),
            h,
            ScalarField::Manufactured { gamma: cfg.gamma },
            RadonMeasure::zero(),
            n,
        );
        let r = converged(solve_regularized(&spec, &cfg.solver)?, "manufactured solve")?;
        let exact = GridFunction::from_fn(grid.clone(), |x| {
            x.iter().map(|&c| (std::f64::consts::PI * c).sin()).product()
        });
        rows.push((grid.spacing(), r.u.max_abs_diff(&exact)?));
    }
    write_dat(out, "manufactured_error.dat", &rows)?;
    let xs: Vec<f64> = rows.iter().map(|r| r.0.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.1.ln()).collect();
    let order = linear_fit(&xs, &ys).map_or(f64::NAN, |f| f.0);
    Ok(vec![
        Check::upper(format!("max_error_cells{}", cfg.cells), rows[1].1, BOUND),
        Check::with("order", order, 2.0, Status::of((order - 2.0).abs() <= 0.2)),
    ])
}

fn run_one(name: &str, cfg: &RunConfig, out: &Path) -> Result<Vec<Check>, CliError> {
    match name {
        "lower_bound" => lower_bound(cfg, out),
        "monotone" => monotone(cfg, out),
        "energy_law" => energy(cfg, out),
        "tails" => tails(cfg, out),
        "kato" => kato(cfg, out),
        "uniqueness" => uniqueness(cfg, out),
        "sandwich" => sandwich(cfg, out),
        "manufactured" => manufactured(cfg, out),
        other => Err(CliError::config("--suite", format!("unknown suite `{other}`"))),
    }
}

/// Runs a suite, writes `verify_<suite>.csv` and fails with an invariant
/// error if any check failed.
pub fn verify(cfg: &RunConfig, suite: &str, out: &Path) -> Result<(), CliError> {
    let checks = if suite == "all" {
        let mut all = Vec::new();
        for name in SUITES {
            for mut c in run_one(name, cfg, out)? {
                c.name = format!("{name}.{}", c.name);
                all.push(c);
            }
        }
        all
    } else {
        run_one(suite, cfg, out)?
    };
    let mut table = Table::create(out, &format!("verify_{suite}.csv"), &["name", "observed", "bound", "pass"])?;
    for c in &checks {
        table.row([c.name.clone(), num(c.observed), num(c.bound), c.status.as_str().to_string()])?;
    }
    table.finish()?;
    let failed: Vec<&str> = checks
        .iter()
        .filter(|c| c.status == Status::Fail)
        .map(|c| c.name.as_str())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Invariant(format!("failed checks: {}", failed.join(", "))))
    }
}
