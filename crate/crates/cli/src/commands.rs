use std::path::Path;

use rayon::prelude::*;
use singular_core::mesh::min_on_compact;
use singular_core::solver::solve_sequence;
use singular_core::{ProblemSpec, ScalarField};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{centre_profile, num, opt, write_dat, write_solution, Table};

/// Problem for one parameter point: the configured data with `γ`, cell count
/// and a measure scale substituted, at the first scheduled level.
pub fn spec_for(cfg: &RunConfig, gamma: f64, cells: usize, mass: f64) -> Result<ProblemSpec, CliError> {
    let f = match cfg.f {
        ScalarField::Manufactured { .. } => ScalarField::Manufactured { gamma },
        ref other => other.clone(),
    };
    let mu = if mass == 1.0 { cfg.measure.clone() } else { cfg.measure.scaled(mass) };
    Ok(ProblemSpec::new(
        cfg.grid(cells)?,
        cfg.nonlinearity(gamma)?,
        f,
        mu,
        cfg.schedule[0],
    ))
}

pub fn solve(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let spec = spec_for(cfg, cfg.gamma, cfg.cells, 1.0)?;
    let seq = solve_sequence(&spec, &cfg.schedule, &cfg.solver)?;

    let mut header = vec!["n", "iterations", "residual", "converged", "l1_diff", "max_diff"];
    let margin_cols: Vec<String> = cfg.margins.iter().map(|m| format!("min_compact_{m}")).collect();
    header.extend(margin_cols.iter().map(String::as_str));
    let mut table = Table::create(out, "sequence.csv", &header)?;
    let mut convergence = Vec::new();
    for level in &seq.levels {
        let u = &level.result.u;
        write_solution(out, &format!("solution_n{}.csv", level.n), u)?;
        let mut row = vec![
            level.n.to_string(),
            level.result.iterations.to_string(),
            num(level.result.residual),
            level.result.converged.to_string(),
            opt(level.l1_diff),
            opt(level.max_diff),
        ];
        row.extend(cfg.margins.iter().map(|&m| opt(min_on_compact(u, m).ok())));
        table.row(row)?;
        if let Some(d) = level.l1_diff {
            convergence.push((level.n as f64, d));
        }
    }
    table.finish()?;
    write_dat(out, "convergence.dat", &convergence)?;

    let last = seq.last().expect("schedule is validated non-empty");
    write_dat(out, "profile.dat", &centre_profile(&last.result.u))?;
    if seq.aborted {
        return Err(CliError::Nonconvergence(format!(
            "level n={} stopped after {} iterations (gap {:e})",
            last.n, last.result.iterations, last.result.residual
        )));
    }
    for level in &seq.levels {
        let min = level.result.u.min_value();
        if min < -cfg.solver.tol_mono {
            return Err(CliError::Invariant(format!("negative value {min:e} at level n={}", level.n)));
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
struct SweepRow {
    gamma: f64,
    cells: usize,
    mass: f64,
    status: &'static str,
    levels: usize,
    iterations: usize,
    residual: f64,
    l1_last: Option<f64>,
    u_max: f64,
    compact_min: Option<f64>,
    message: String,
}

fn sweep_point(cfg: &RunConfig, gamma: f64, cells: usize, mass: f64) -> SweepRow {
    let mut row = SweepRow {
        gamma,
        cells,
        mass,
        status: "error",
        levels: 0,
        iterations: 0,
        residual: f64::NAN,
        l1_last: None,
        u_max: f64::NAN,
        compact_min: None,
        message: String::new(),
    };
    let seq = match spec_for(cfg, gamma, cells, mass)
        .and_then(|spec| solve_sequence(&spec, &cfg.schedule, &cfg.solver).map_err(CliError::from))
    {
        Ok(seq) => seq,
        Err(e) => {
            row.message = e.to_string();
            return row;
        }
    };
    let last = seq.last().expect("schedule is validated non-empty");
    row.levels = seq.levels.len();
    row.iterations = seq.levels.iter().map(|l| l.result.iterations).sum();
    row.residual = last.result.residual;
    row.l1_last = last.l1_diff;
    row.u_max = last.result.u.max_value();
    row.compact_min = cfg.margins.last().and_then(|&m| min_on_compact(&last.result.u, m).ok());
    if seq.aborted {
        row.status = "nonconverged";
        row.message = format!("level n={} did not converge", last.n);
    } else {
        row.status = "ok";
    }
    row
}

pub fn sweep(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let grid = &cfg.sweep;
    for (key, empty) in [
        ("sweep.gamma", grid.gamma.is_empty()),
        ("sweep.cells", grid.cells.is_empty()),
        ("sweep.mass", grid.mass.is_empty()),
    ] {
        if empty {
            return Err(CliError::config(key, "empty parameter list"));
        }
    }
    let mut gammas = grid.gamma.clone();
    let mut cells = grid.cells.clone();
    let mut masses = grid.mass.clone();
    gammas.sort_by(f64::total_cmp);
    gammas.dedup();
    cells.sort_unstable();
    cells.dedup();
    masses.sort_by(f64::total_cmp);
    masses.dedup();
    for &g in &gammas {
        cfg.nonlinearity(g)?;
    }
    for &c in &cells {
        cfg.grid(c)?;
    }

    let mut points = Vec::with_capacity(gammas.len() * cells.len() * masses.len());
    for &g in &gammas {
        for &c in &cells {
            for &m in &masses {
                points.push((g, c, m));
            }
        }
    }
    let rows: Vec<SweepRow> = points
        .par_iter()
        .map(|&(g, c, m)| sweep_point(cfg, g, c, m))
        .collect();

    let mut table = Table::create(
        out,
        "sweep.csv",
        &[
            "gamma", "cells", "mass", "status", "levels", "iterations", "residual", "l1_last", "u_max",
            "compact_min", "message",
        ],
    )?;
    for r in rows {
        table.row([
            num(r.gamma),
            r.cells.to_string(),
            num(r.mass),
            r.status.to_string(),
            r.levels.to_string(),
            r.iterations.to_string(),
            num(r.residual),
            opt(r.l1_last),
            num(r.u_max),
            opt(r.compact_min),
            r.message,
        ])?;
    }
    table.finish()
}
