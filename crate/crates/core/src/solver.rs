//! Fixed-point solvers for the regularized problems
//!
//! ```text
//! -Δu_n = h_n(u_n + 1/n) f_n + μ_n   in Ω,   u_n = 0 on ∂Ω,
//! ```
//!
//! the measure-free companion sequence `v_n`, and the clamped scheme that
//! traps a solution between a sub- and a supersolution.
//!
//! Every solve is a damped Picard iteration `u ← (1-ω) u + ω G(u)` where
//! `G(v)` solves the linear Dirichlet problem with the source frozen at `v`.

use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::field::ScalarField;
use crate::measures::{mollify, DiscretizedMeasure, RadonMeasure};
use crate::mesh::{build_laplacian, min_on_compact, solve_spd, solve_spd_from, DiscreteOperator, Grid, GridFunction};
use crate::singularity::SingularNonlinearity;

const STALL_WINDOW: usize = 10;
const MIN_DAMPING: f64 = 0.05;

/// Default regularization schedule `2, 4, ..., 1024`.
pub fn default_schedule() -> Vec<u64> {
    (1..=10).map(|k| 1u64 << k).collect()
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub grid: Arc<Grid>,
    pub h: SingularNonlinearity,
    pub f: ScalarField,
    pub mu: RadonMeasure,
    pub n: u64,
}

impl ProblemSpec {
    pub fn new(
        grid: Arc<Grid>,
        h: SingularNonlinearity,
        f: ScalarField,
        mu: RadonMeasure,
        n: u64,
    ) -> Self {
        ProblemSpec { grid, h, f, mu, n }
    }

    pub fn with_level(&self, n: u64) -> Self {
        ProblemSpec { n, ..self.clone() }
    }

    pub fn without_measure(&self) -> Self {
        ProblemSpec {
            mu: RadonMeasure::zero(),
            ..self.clone()
        }
    }

    pub fn with_measure(&self, mu: RadonMeasure) -> Self {
        ProblemSpec { mu, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("n", "regularization level must be >= 1"));
        }
        self.f.validate(self.grid.dim())?;
        self.mu.validate(self.grid.dim())?;
        if let Some(x) = self.grid.points().find(|x| !(self.f.eval(x) >= 0.0)) {
            return Err(invalid("f", format!("negative or non-finite at {x:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub enum InitialGuess {
    /// One Picard step from zero.
    OneStep,
    Zero,
    Given(GridFunction),
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Max-norm of `G(u) - u` at which the Picard iteration stops.
    pub tol_fp: f64,
    /// Relative residual for each linear solve.
    pub tol_lin: f64,
    pub max_iters: usize,
    /// `None` picks 1.0 for `γ < 1` and 0.7 otherwise.
    pub damping: Option<f64>,
    pub initial: InitialGuess,
    /// Halve the damping after three consecutive growing updates, or after
    /// ten iterations without a new smallest update.
    pub adaptive_damping: bool,
    /// Tolerance for nodewise order relations (monotonicity, sandwich).
    pub tol_mono: f64,
    /// Discrete L¹ gap below which a sequence counts as converged.
    pub tol_seq: f64,
}

impl SolverConfig {
    pub fn for_dim(dim: usize) -> Self {
        SolverConfig {
            tol_fp: if dim == 1 { 1e-10 } else { 1e-8 },
            tol_lin: 1e-12,
            max_iters: 5000,
            damping: None,
            initial: InitialGuess::OneStep,
            adaptive_damping: true,
            tol_mono: 1e-8,
            tol_seq: 1e-6,
        }
    }

    pub fn damping_for(&self, gamma: f64) -> f64 {
        self.damping.unwrap_or(if gamma < 1.0 { 1.0 } else { 0.7 })
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol_fp > 0.0) {
            return Err(invalid("solver.tol_fp", "must be positive"));
        }
        if !(self.tol_lin > 0.0) {
            return Err(invalid("solver.tol_lin", "must be positive"));
        }
        if self.max_iters == 0 {
            return Err(invalid("solver.max_iters", "must be >= 1"));
        }
        if let Some(d) = self.damping {
            if !(d > 0.0 && d <= 1.0) {
                return Err(invalid("solver.damping", format!("{d} is outside (0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub u: GridFunction,
    pub iterations: usize,
    /// Max-norm of `G(u) - u` at the last step.
    pub residual: f64,
    pub converged: bool,
    pub picard_history: Vec<f64>,
}

/// Level-`n` problem with `f_n`, `μ_n` and the operator assembled once.
#[derive(Debug, Clone)]
pub struct RegularizedProblem {
    grid: Arc<Grid>,
    op: DiscreteOperator,
    h: SingularNonlinearity,
    n: u64,
    f_n: Vec<f64>,
    mu_n: DiscretizedMeasure,
}

impl RegularizedProblem {
    pub fn new(spec: &ProblemSpec) -> Result<Self> {
        spec.validate()?;
        let cap = spec.n as f64;
        let f_n = spec
            .grid
            .points()
            .map(|x| spec.f.eval(x).min(cap))
            .collect();
        Ok(RegularizedProblem {
            grid: spec.grid.clone(),
            op: build_laplacian(&spec.grid),
            h: spec.h,
            n: spec.n,
            f_n,
            mu_n: mollify(&spec.mu, &spec.grid, spec.n)?,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn operator(&self) -> &DiscreteOperator {
        &self.op
    }

    pub fn level(&self) -> u64 {
        self.n
    }

    pub fn measure(&self) -> &DiscretizedMeasure {
        &self.mu_n
    }

    pub fn f_n(&self) -> &[f64] {
        &self.f_n
    }

    pub fn f_n_field(&self) -> GridFunction {
        GridFunction::from_raw(self.grid.clone(), self.f_n.clone())
    }

    /// `h_n(|t| + 1/n)`, the shifted and capped nonlinearity.
    pub fn h_n(&self, t: f64) -> f64 {
        let cap = self.n as f64;
        cap.min(self.h.eval_positive(t.abs() + 1.0 / cap))
    }

    /// `f_n(x) h_n(t + 1/n)`, skipping `h` where `f_n` vanishes.
    pub fn nonlinear_term(&self, node: usize, t: f64) -> f64 {
        let f = self.f_n[node];
        if f == 0.0 {
            return 0.0;
        }
        f * self.h_n(t)
    }

    fn source(&self, v: &[f64]) -> Vec<f64> {
        let mu = self.mu_n.values.values();
        v.iter()
            .enumerate()
            .map(|(i, &t)| self.nonlinear_term(i, t) + mu[i])
            .collect()
    }

    /// One damped application of the solution map `G`.
    pub fn picard_step(&self, v: &GridFunction, damping: f64, tol_lin: f64) -> Result<GridFunction> {
        picard(&self.op, v, damping, tol_lin, |x| self.source(x))
    }

    pub fn solve(&self, cfg: &SolverConfig) -> Result<SolveResult> {
        iterate(&self.op, &self.grid, cfg, self.h.gamma(), |x| self.source(x))
    }
}

fn picard(
    op: &DiscreteOperator,
    v: &GridFunction,
    damping: f64,
    tol_lin: f64,
    source: impl Fn(&[f64]) -> Vec<f64>,
) -> Result<GridFunction> {
    if !(damping > 0.0 && damping <= 1.0) {
        return Err(invalid("damping", format!("{damping} is outside (0, 1]")));
    }
    let rhs = GridFunction::new(v.grid().clone(), source(v.values()))?;
    let w = solve_spd_from(op, &rhs, v, tol_lin)?;
    if damping == 1.0 {
        return Ok(w);
    }
    w.zip_map(v, |w, v| (1.0 - damping) * v + damping * w)
}

fn iterate(
    op: &DiscreteOperator,
    grid: &Arc<Grid>,
    cfg: &SolverConfig,
    gamma: f64,
    source: impl Fn(&[f64]) -> Vec<f64>,
) -> Result<SolveResult> {
    cfg.validate()?;
    let mut damping = cfg.damping_for(gamma);
    let mut u = match &cfg.initial {
        InitialGuess::Zero => GridFunction::zeros(grid.clone()),
        InitialGuess::OneStep => {
            let rhs = GridFunction::new(grid.clone(), source(&vec![0.0; grid.interior_count()]))?;
            solve_spd(op, &rhs, cfg.tol_lin)?
        }
        InitialGuess::Given(g) => {
            grid.ensure_same(g.grid())?;
            g.clone()
        }
    };

    let mut history = Vec::new();
    let mut growth = 0;
    let mut best = f64::INFINITY;
    let mut since_best = 0;
    for it in 1..=cfg.max_iters {
        let next = picard(op, &u, damping, cfg.tol_lin, &source)?;
        if !next.is_finite() {
            return Err(Error::NonFinite { iteration: it });
        }
        // Undamped gap |G(u) - u|, independent of the current damping.
        let update = next.max_abs_diff(&u)? / damping;
        if cfg.adaptive_damping {
            match history.last() {
                Some(&prev) if update > prev => growth += 1,
                _ => growth = 0,
            }
            if update < best {
                best = update;
                since_best = 0;
            } else {
                since_best += 1;
            }
            // Steady growth or a cycle that stops making progress.
            if (growth >= 3 || since_best >= STALL_WINDOW) && damping > MIN_DAMPING {
                damping = (damping * 0.5).max(MIN_DAMPING);
                growth = 0;
                since_best = 0;
                best = update;
            }
        }
        history.push(update);
        u = next;
        if update <= cfg.tol_fp {
            return Ok(SolveResult {
                u,
                iterations: it,
                residual: update,
                converged: true,
                picard_history: history,
            });
        }
    }
    Ok(SolveResult {
        u,
        iterations: cfg.max_iters,
        residual: history.last().copied().unwrap_or(f64::NAN),
        converged: false,
        picard_history: history,
    })
}

/// `(1 - damping) v + damping G(v)` for the level-`n` problem of `spec`.
pub fn picard_step(spec: &ProblemSpec, v: &GridFunction, damping: f64, tol_lin: f64) -> Result<GridFunction> {
    if v.values().iter().any(|&x| x < 0.0) {
        return Err(invalid("v", "iterate must be nonnegative"));
    }
    RegularizedProblem::new(spec)?.picard_step(v, damping, tol_lin)
}

pub fn solve_regularized(spec: &ProblemSpec, cfg: &SolverConfig) -> Result<SolveResult> {
    RegularizedProblem::new(spec)?.solve(cfg)
}

/// The measure-free problem `-Δv_n = h_n(v_n + 1/n) f_n`.
pub fn solve_auxiliary_v(spec: &ProblemSpec, cfg: &SolverConfig) -> Result<SolveResult> {
    solve_regularized(&spec.without_measure(), cfg)
}

#[derive(Debug, Clone)]
pub struct LevelResult {
    pub n: u64,
    pub result: SolveResult,
    /// Discrete L¹ and max distance to the previous level.
    pub l1_diff: Option<f64>,
    pub max_diff: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SequenceResult {
    pub levels: Vec<LevelResult>,
    /// Last L¹ gap fell below `tol_seq`.
    pub sequence_converged: bool,
    /// A level failed to converge; `levels` holds everything up to it.
    pub aborted: bool,
}

impl SequenceResult {
    pub fn solutions(&self) -> Vec<GridFunction> {
        self.levels.iter().map(|l| l.result.u.clone()).collect()
    }

    pub fn last(&self) -> Option<&LevelResult> {
        self.levels.last()
    }
}

/// Solves along `schedule`, warm-starting each level from the previous one.
pub fn solve_sequence(spec: &ProblemSpec, schedule: &[u64], cfg: &SolverConfig) -> Result<SequenceResult> {
    if schedule.is_empty() {
        return Err(invalid("n_schedule", "must not be empty"));
    }
    if schedule.windows(2).any(|w| w[1] <= w[0]) || schedule[0] == 0 {
        return Err(invalid("n_schedule", "must be strictly increasing and start at >= 1"));
    }
    let mut levels: Vec<LevelResult> = Vec::with_capacity(schedule.len());
    let mut level_cfg = cfg.clone();
    for &n in schedule {
        if let Some(prev) = levels.last() {
            level_cfg.initial = InitialGuess::Given(prev.result.u.clone());
        }
        let result = solve_regularized(&spec.with_level(n), &level_cfg)?;
        let (l1_diff, max_diff) = match levels.last() {
            Some(prev) => (
                Some(result.u.l1_diff(&prev.result.u)?),
                Some(result.u.max_abs_diff(&prev.result.u)?),
            ),
            None => (None, None),
        };
        let converged = result.converged;
        levels.push(LevelResult {
            n,
            result,
            l1_diff,
            max_diff,
        });
        if !converged {
            return Ok(SequenceResult {
                levels,
                sequence_converged: false,
                aborted: true,
            });
        }
    }
    let sequence_converged = levels
        .last()
        .and_then(|l| l.l1_diff)
        .is_some_and(|d| d < cfg.tol_seq);
    Ok(SequenceResult {
        levels,
        sequence_converged,
        aborted: false,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneReport {
    /// `max (v_k - v_{k+1})⁺` over nodes and consecutive levels.
    pub max_violation: f64,
    /// `(level index, node)` of the worst violation.
    pub worst: Option<(usize, usize)>,
    pub pass: bool,
}

/// Checks `v_k <= v_{k+1}` nodewise along a sequence.
pub fn monotone_check(sequence: &[GridFunction], tol: f64) -> Result<MonotoneReport> {
    if sequence.len() < 2 {
        return Err(invalid("sequence", "need at least two levels"));
    }
    let mut max_violation = 0.0;
    let mut worst = None;
    for (k, pair) in sequence.windows(2).enumerate() {
        pair[0].grid().ensure_same(pair[1].grid())?;
        for (i, (a, b)) in pair[0].values().iter().zip(pair[1].values()).enumerate() {
            let v = a - b;
            if v > max_violation {
                max_violation = v;
                worst = Some((k, i));
            }
        }
    }
    Ok(MonotoneReport {
        max_violation,
        worst,
        pass: max_violation <= tol,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    /// `max (v - u)⁺`.
    pub violation: f64,
    pub worst_node: Option<usize>,
    /// `(margin, min of u over the band)`.
    pub compact_minima: Vec<(f64, f64)>,
    pub pass: bool,
}

/// Checks `u >= v` and records the compact lower bounds of `u`.
pub fn comparison_check(
    u: &GridFunction,
    v: &GridFunction,
    margins: &[f64],
    tol: f64,
) -> Result<ComparisonReport> {
    u.grid().ensure_same(v.grid())?;
    let mut violation = 0.0;
    let mut worst_node = None;
    for (i, (a, b)) in u.values().iter().zip(v.values()).enumerate() {
        if b - a > violation {
            violation = b - a;
            worst_node = Some(i);
        }
    }
    let compact_minima = margins
        .iter()
        .map(|&m| Ok((m, min_on_compact(u, m)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ComparisonReport {
        violation,
        worst_node,
        compact_minima,
        pass: violation <= tol,
    })
}

/// An ordered pair `sub <= sup` with `sub > 0`.
#[derive(Debug, Clone)]
pub struct SandwichSpec {
    sub: GridFunction,
    sup: GridFunction,
}

impl SandwichSpec {
    pub fn new(sub: GridFunction, sup: GridFunction) -> Result<Self> {
        sub.grid().ensure_same(sup.grid())?;
        for (i, (&a, &b)) in sub.values().iter().zip(sup.values()).enumerate() {
            if !(a > 0.0) {
                return Err(Error::NonPositiveSub { node: i, value: a });
            }
            if a > b {
                return Err(Error::InvertedSandwich {
                    node: i,
                    excess: a - b,
                });
            }
        }
        Ok(SandwichSpec { sub, sup })
    }

    pub fn sub(&self) -> &GridFunction {
        &self.sub
    }

    pub fn sup(&self) -> &GridFunction {
        &self.sup
    }

    /// Largest distance by which `u` leaves `[sub, sup]`, with its node.
    pub fn breach(&self, u: &GridFunction) -> Result<(f64, Option<usize>)> {
        self.sub.grid().ensure_same(u.grid())?;
        let mut worst = (0.0, None);
        for (i, ((&lo, &hi), &x)) in self
            .sub
            .values()
            .iter()
            .zip(self.sup.values())
            .zip(u.values())
            .enumerate()
        {
            let b = (lo - x).max(x - hi);
            if b > worst.0 {
                worst = (b, Some(i));
            }
        }
        Ok(worst)
    }
}

#[derive(Debug, Clone)]
pub struct ClampedSolve {
    pub result: SolveResult,
    pub breach: f64,
}

/// Fixed point of `-Δu = f_n h_n(clamp(u) + 1/n) + μ_n`, where `clamp`
/// projects onto `[sub, sup]` nodewise. Fails if the converged solution
/// leaves the sandwich by more than `tol_mono`.
pub fn solve_clamped(spec: &ProblemSpec, sandwich: &SandwichSpec, cfg: &SolverConfig) -> Result<ClampedSolve> {
    let problem = RegularizedProblem::new(spec)?;
    spec.grid.ensure_same(sandwich.sub.grid())?;
    let (lo, hi) = (sandwich.sub.values(), sandwich.sup.values());
    let mu = problem.mu_n.values.values();
    let source = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .enumerate()
            .map(|(i, &t)| problem.nonlinear_term(i, t.clamp(lo[i], hi[i])) + mu[i])
            .collect()
    };
    let result = iterate(&problem.op, &problem.grid, cfg, spec.h.gamma(), source)?;
    let (breach, node) = sandwich.breach(&result.u)?;
    if result.converged && breach > cfg.tol_mono {
        return Err(Error::SandwichBreach {
            node: node.unwrap_or(0),
            breach,
        });
    }
    Ok(ClampedSolve { result, breach })
}

#[derive(Debug, Clone)]
pub struct SubSuper {
    pub sandwich: SandwichSpec,
    /// Solution of the measure-free problem; the subsolution.
    pub v: SolveResult,
    /// Solution of `-Δw = μ_n`.
    pub w: GridFunction,
}

/// Subsolution `v` (measure dropped) and supersolution `z = v + w`.
pub fn build_sub_super(spec: &ProblemSpec, cfg: &SolverConfig) -> Result<SubSuper> {
    spec.validate()?;
    if let Some(x) = spec.grid.points().find(|x| !(spec.f.eval(x) > 0.0)) {
        return Err(invalid("f", format!("must be positive at every node; vanishes at {x:?}")));
    }
    let v = solve_auxiliary_v(spec, cfg)?;
    let mu_n = mollify(&spec.mu, &spec.grid, spec.n)?;
    let op = build_laplacian(&spec.grid);
    let w = solve_spd(&op, &mu_n.values, cfg.tol_lin)?;
    let z = v.u.zip_map(&w, |a, b| a + b)?;
    let sandwich = SandwichSpec::new(v.u.clone(), z)?;
    Ok(SubSuper { sandwich, v, w })
}

/// `min v(x) / d(x)` over interior nodes.
pub fn distance_lower_bound_check(v: &GridFunction) -> f64 {
    v.values()
        .iter()
        .zip(v.grid().distances())
        .map(|(u, d)| u / d)
        .fold(f64::INFINITY, f64::min)
}

/// Both ratios positive and within a factor of two of each other.
pub fn distance_bound_stable(coarse: f64, fine: f64) -> bool {
    coarse > 0.0 && fine > 0.0 && coarse.max(fine) <= 2.0 * coarse.min(fine)
}

#[derive(Debug, Clone)]
pub struct UniquenessReport {
    pub cold: SolveResult,
    pub from_super: SolveResult,
    pub max_diff: f64,
}

/// Solves the level-`n` problem from the one-step guess and from the
/// supersolution `v + w`, and measures how far the two limits differ.
pub fn uniqueness_probe(spec: &ProblemSpec, cfg: &SolverConfig) -> Result<UniquenessReport> {
    let problem = RegularizedProblem::new(spec)?;
    let cold = problem.solve(&SolverConfig {
        initial: InitialGuess::OneStep,
        ..cfg.clone()
    })?;
    let w = solve_spd(&problem.op, &problem.mu_n.values, cfg.tol_lin)?;
    let v = solve_auxiliary_v(spec, cfg)?;
    let sup = v.u.zip_map(&w, |a, b| a + b)?;
    let from_super = problem.solve(&SolverConfig {
        initial: InitialGuess::Given(sup),
        ..cfg.clone()
    })?;
    let max_diff = cold.u.max_abs_diff(&from_super.u)?;
    Ok(UniquenessReport {
        cold,
        from_super,
        max_diff,
    })
}
