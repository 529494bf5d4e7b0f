//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//! Every tolerance and runtime limit is pinned here.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use singular_core::diagnostics::{
    energy_law, kato_residual, linear_fit, tail_exponents, torsion_function, ExponentFit,
    ENERGY_LEVELS,
};
use singular_core::singularity::{trunc_g, trunc_t};
use singular_core::solver::{
    build_sub_super, comparison_check, default_schedule, distance_bound_stable,
    distance_lower_bound_check, monotone_check, solve_auxiliary_v, solve_clamped,
    solve_regularized, solve_sequence, uniqueness_probe,
};
use singular_core::{
    Grid, GridFunction, ProblemSpec, RadonMeasure, RegularizedProblem, Result, ScalarField,
    SingularNonlinearity, SolverConfig,
};

struct Outcome {
    pass: bool,
    detail: String,
}

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Duration,
    run: fn() -> Result<Outcome>,
}

/// Large enough that the regularization error is negligible next to the
/// discretization error on the grids used below.
const N_FINE: u64 = 1 << 20;

fn line(cells: usize) -> Arc<Grid> {
    Grid::new(1, cells, 0.0).unwrap()
}

fn power(gamma: f64) -> SingularNonlinearity {
    SingularNonlinearity::pure_power(gamma).unwrap()
}

fn center(dim: usize) -> Vec<f64> {
    vec![0.5; dim]
}

fn green_exactness() -> Result<Outcome> {
    let g = line(64);
    let spec = ProblemSpec::new(g.clone(), power(0.5), ScalarField::Zero, RadonMeasure::dirac(&[0.5], 1.0), N_FINE);
    let r = solve_regularized(&spec, &SolverConfig::for_dim(1))?;
    let exact = GridFunction::from_fn(g, |x| x[0].min(1.0 - x[0]) / 2.0);
    let err = r.u.max_abs_diff(&exact)?;
    Ok(Outcome {
        pass: r.converged && err <= 1e-10,
        detail: format!("max error {err:.3e} (bound 1e-10)"),
    })
}

fn manufactured() -> Result<Outcome> {
    let mut errs = Vec::new();
    for cells in [32, 64, 128] {
        let g = line(cells);
        let spec = ProblemSpec::new(
            g.clone(),
            power(0.5),
            ScalarField::Manufactured { gamma: 0.5 },
            RadonMeasure::zero(),
            N_FINE,
        );
        let r = solve_regularized(&spec, &SolverConfig::for_dim(1))?;
        if !r.converged {
            return Ok(Outcome {
                pass: false,
                detail: format!("no convergence at cells={cells}"),
            });
        }
        let exact = GridFunction::from_fn(g, |x| (PI * x[0]).sin());
        errs.push(r.u.max_abs_diff(&exact)?);
    }
    let xs: Vec<f64> = [32.0f64, 64.0, 128.0].iter().map(|c| (1.0 / c).ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let slope = linear_fit(&xs, &ys).map_or(f64::NAN, |f| f.0);
    Ok(Outcome {
        pass: errs[1] <= 2e-3 && (slope - 2.0).abs() <= 0.2,
        detail: format!(
            "error at 64 cells {:.3e} (bound 2e-3), order {slope:.3} (2 ± 0.2)",
            errs[1]
        ),
    })
}

fn monotone_auxiliary() -> Result<Outcome> {
    let cases = [(1, 64, 0.5), (1, 64, 2.0), (2, 24, 0.5), (2, 24, 2.0)];
    let mut worst: f64 = 0.0;
    let mut pass = true;
    let mut notes = Vec::new();
    for (dim, cells, gamma) in cases {
        let g = Grid::new(dim, cells, 0.0)?;
        let spec = ProblemSpec::new(g, power(gamma), ScalarField::Constant(1.0), RadonMeasure::zero(), 2);
        let seq = solve_sequence(&spec, &default_schedule(), &SolverConfig::for_dim(dim))?;
        if seq.aborted {
            pass = false;
            notes.push(format!("{dim}D γ={gamma} aborted"));
            continue;
        }
        let report = monotone_check(&seq.solutions(), 1e-8)?;
        worst = worst.max(report.max_violation);
        pass &= report.pass;
    }
    notes.insert(0, format!("max (v_n - v_n+1)+ {worst:.3e} over n=2..1024, 1D and 2D (bound 1e-8)"));
    Ok(Outcome {
        pass,
        detail: notes.join("; "),
    })
}

fn domination() -> Result<Outcome> {
    let mut pass = true;
    let mut details = Vec::new();
    for (dim, cells) in [(1, 64), (2, 24)] {
        let g = Grid::new(dim, cells, 0.0)?;
        let spec = ProblemSpec::new(g, power(0.5), ScalarField::Constant(1.0), RadonMeasure::dirac(&center(dim), 1.0), 2);
        let cfg = SolverConfig::for_dim(dim);
        let schedule = default_schedule();
        let u_seq = solve_sequence(&spec, &schedule, &cfg)?;
        let v_seq = solve_sequence(&spec.without_measure(), &schedule, &cfg)?;
        if u_seq.aborted || v_seq.aborted {
            return Ok(Outcome {
                pass: false,
                detail: format!("{dim}D sequence aborted"),
            });
        }
        let mut violation: f64 = 0.0;
        let mut minima = Vec::new();
        for (u, v) in u_seq.levels.iter().zip(&v_seq.levels) {
            let report = comparison_check(&u.result.u, &v.result.u, &[0.25], 1e-8)?;
            violation = violation.max(report.violation);
            minima.push(report.compact_minima[0].1);
        }
        let top = &minima[minima.len() / 2..];
        let lo = top.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = top.iter().copied().fold(0.0, f64::max);
        let spread = (hi - lo) / hi;
        pass &= violation <= 1e-8 && lo > 0.0 && spread <= 0.10;
        details.push(format!(
            "{dim}D: max (v_n - u_n)+ {violation:.3e} (bound 1e-8), C_K {lo:.4} spread {:.2}% (bound 10%)",
            spread * 100.0
        ));
    }
    Ok(Outcome {
        pass,
        detail: details.join("; "),
    })
}

/// Limit solution of the 3D run shared by the energy law and tail checks.
fn three_d_solution() -> Result<Option<GridFunction>> {
    let g = Grid::new(3, 24, 0.0)?;
    let spec = ProblemSpec::new(g, power(2.0), ScalarField::Constant(1.0), RadonMeasure::dirac(&center(3), 1.0), 2);
    let seq = solve_sequence(&spec, &default_schedule(), &SolverConfig::for_dim(3))?;
    if seq.aborted {
        return Ok(None);
    }
    Ok(seq.last().map(|l| l.result.u.clone()))
}

fn energy_law_3d() -> Result<Outcome> {
    let Some(u) = three_d_solution()? else {
        return Ok(Outcome {
            pass: false,
            detail: "3D sequence aborted".into(),
        });
    };
    let (_, fit) = energy_law(&u, &ENERGY_LEVELS, 2.0, 0.15)?;
    Ok(Outcome {
        pass: fit.slope <= 2.15,
        detail: format!("slope {:.4} over k=1..16 (bound 2.15)", fit.slope),
    })
}

fn tails_3d() -> Result<Outcome> {
    let Some(u) = three_d_solution()? else {
        return Ok(Outcome {
            pass: false,
            detail: "3D sequence aborted".into(),
        });
    };
    let tails = tail_exponents(&u)?;
    let (g, v) = (&tails.gradient, &tails.value);
    let ok = |f: &ExponentFit, bound: f64| f.slope <= bound && f.r_squared >= 0.9;
    Ok(Outcome {
        pass: ok(g, -1.3) && ok(v, -2.7),
        detail: format!(
            "gradient slope {:.3} r² {:.3} (bound -1.3, 0.9); u slope {:.3} r² {:.3} (bound -2.7, 0.9)",
            g.slope, g.r_squared, v.slope, v.r_squared
        ),
    })
}

fn kato() -> Result<Outcome> {
    let g = line(64);
    let base = ProblemSpec::new(g.clone(), power(0.5), ScalarField::Constant(1.0), RadonMeasure::dirac(&[0.5], 2.0), N_FINE);
    let p1 = RegularizedProblem::new(&base)?;
    let p2 = RegularizedProblem::new(&base.with_measure(RadonMeasure::dirac(&[0.5], 1.0)))?;
    let cfg = SolverConfig::for_dim(1);
    let (u1, u2) = (p1.solve(&cfg)?, p2.solve(&cfg)?);
    let phi0 = torsion_function(&g)?;
    let f = p1.f_n_field();
    let h = |t: f64| p1.h_n(t);
    let forward = kato_residual(&u1, &u2, p1.measure(), p2.measure(), &f, &h, &phi0)?;
    let reverse = kato_residual(&u2, &u1, p2.measure(), p1.measure(), &f, &h, &phi0)?;
    Ok(Outcome {
        pass: forward.pass && reverse.pass,
        detail: format!(
            "residuals {:.3e} and {:.3e} (bound -1e-10); with the measure term over all of Ω: {:.3e} and {:.3e}",
            forward.residual, reverse.residual, forward.residual_unrestricted, reverse.residual_unrestricted
        ),
    })
}

fn uniqueness() -> Result<Outcome> {
    let spec = ProblemSpec::new(line(64), power(0.5), ScalarField::Constant(1.0), RadonMeasure::dirac(&[0.5], 1.0), N_FINE);
    let r = uniqueness_probe(&spec, &SolverConfig::for_dim(1))?;
    Ok(Outcome {
        pass: r.cold.converged && r.from_super.converged && r.max_diff <= 1e-8,
        detail: format!("cold vs supersolution start {:.3e} (bound 1e-8)", r.max_diff),
    })
}

fn sandwich() -> Result<Outcome> {
    let mut pass = true;
    let mut details = Vec::new();
    for (dim, cells) in [(1usize, 32usize), (2, 16)] {
        let cfg = SolverConfig::for_dim(dim);
        let mut ratios = Vec::new();
        for c in [cells, 2 * cells] {
            let g = Grid::new(dim, c, 0.0)?;
            let spec = ProblemSpec::new(g, power(0.5), ScalarField::Constant(1.0), RadonMeasure::dirac(&center(dim), 1.0), N_FINE);
            let ss = build_sub_super(&spec, &cfg)?;
            let clamped = solve_clamped(&spec, &ss.sandwich, &cfg)?;
            pass &= clamped.result.converged && clamped.breach <= 1e-8;
            details.push(format!("{dim}D cells={c} breach {:.3e}", clamped.breach));
            let v = solve_auxiliary_v(&spec, &cfg)?;
            ratios.push(distance_lower_bound_check(&v.u));
        }
        let stable = distance_bound_stable(ratios[0], ratios[1]);
        pass &= stable;
        details.push(format!("{dim}D min v/d {:.4} -> {:.4}", ratios[0], ratios[1]));
    }
    Ok(Outcome {
        pass,
        detail: format!("{} (breach bound 1e-8, ratio within x2)", details.join(", ")),
    })
}

fn truncation_identity() -> Result<Outcome> {
    // Lattice values keep every T_k(s), G_k(s) and their sum representable.
    let mut rng = StdRng::seed_from_u64(0x7a11);
    let scale = (1u64 << 20) as f64;
    let mut mismatches = 0;
    for _ in 0..10_000 {
        let k = rng.random_range(1..1i64 << 40) as f64 / scale;
        let s = rng.random_range(-(1i64 << 40)..1i64 << 40) as f64 / scale;
        if trunc_t(k, s) + trunc_g(k, s) != s {
            mismatches += 1;
        }
    }
    // Arbitrary doubles: reported only. A pair is unreachable when k lies
    // exactly half an ulp of s off the grid, so no double G can restore s.
    let mut off = 0;
    let mut off_ulp = 0;
    for _ in 0..10_000 {
        let k: f64 = rng.random_range(1e-6..1e6);
        let s: f64 = rng.random_range(-1e8..1e8);
        let sum = trunc_t(k, s) + trunc_g(k, s);
        if sum != s {
            off += 1;
            if (sum - s).abs() > s.abs().next_up() - s.abs() {
                off_ulp += 1;
            }
        }
    }
    Ok(Outcome {
        pass: mismatches == 0 && off_ulp == 0,
        detail: format!(
            "{mismatches} of 10000 lattice pairs inexact (bound 0); arbitrary doubles: {off} off by one ulp, {off_ulp} worse"
        ),
    })
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { id: 1, name: "Green's function exactness", limit: Duration::from_secs(1), run: green_exactness },
        Criterion { id: 2, name: "manufactured singular solve", limit: Duration::from_secs(10), run: manufactured },
        Criterion { id: 3, name: "monotone auxiliary sequence", limit: Duration::from_secs(30), run: monotone_auxiliary },
        Criterion { id: 4, name: "domination and compact positivity", limit: Duration::from_secs(30), run: domination },
        Criterion { id: 5, name: "truncation energy law", limit: Duration::from_secs(60), run: energy_law_3d },
        Criterion { id: 6, name: "Marcinkiewicz tails", limit: Duration::from_secs(60), run: tails_3d },
        Criterion { id: 7, name: "Kato inequality", limit: Duration::from_secs(5), run: kato },
        Criterion { id: 8, name: "uniqueness", limit: Duration::from_secs(10), run: uniqueness },
        Criterion { id: 9, name: "sandwich and distance bound", limit: Duration::from_secs(20), run: sandwich },
        Criterion { id: 10, name: "truncation identity", limit: Duration::from_secs(1), run: truncation_identity },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let (pass, detail) = match outcome {
            Ok(o) => (o.pass && elapsed <= c.limit, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{} criterion {:>2} {}: {}; {:.2}s (limit {}s)",
            if pass { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            detail,
            elapsed.as_secs_f64(),
            c.limit.as_secs()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
