//! Discrete counterparts of the a-priori estimates: Sobolev norms,
//! distribution functions and Marcinkiewicz tail exponents, the truncation
//! energy law, the `G_1`/`T_1` split, the torsion function, the Kato
//! inequality and the first Dirichlet eigenvalue.

use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::measures::DiscretizedMeasure;
use crate::mesh::{build_laplacian, solve_spd, Grid, GridFunction};
use crate::singularity::{trunc_g, trunc_power, trunc_t};
use crate::solver::SolveResult;

/// One value per grid cell (`cells^dim` of them), boundary cells included.
#[derive(Debug, Clone)]
pub struct CellField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl CellField {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Distance from the centre of cell `cell` to the boundary.
    pub fn center_distance(&self, cell: usize) -> f64 {
        cell_center_distance(&self.grid, cell)
    }
}

fn cell_corner(grid: &Grid, cell: usize) -> [usize; 3] {
    let m = grid.cells();
    let mut rest = cell;
    let mut out = [0; 3];
    for slot in out.iter_mut().take(grid.dim()) {
        *slot = rest % m;
        rest /= m;
    }
    out
}

fn cell_center_distance(grid: &Grid, cell: usize) -> f64 {
    let corner = cell_corner(grid, cell);
    let h = grid.spacing();
    corner[..grid.dim()]
        .iter()
        .map(|&i| {
            let c = (i as f64 + 0.5) * h;
            c.min(1.0 - c)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Per-cell gradient magnitude. Each component is the forward difference
/// along that axis averaged over the cell's parallel edges; boundary nodes
/// contribute their implicit zero.
pub fn discrete_gradient_magnitude(u: &GridFunction) -> CellField {
    let grid = u.grid().clone();
    let dim = grid.dim();
    let h = grid.spacing();
    let n_cells = grid.cell_count();
    let edges = (1usize << (dim - 1)) as f64;
    let mut values = Vec::with_capacity(n_cells);
    for cell in 0..n_cells {
        let corner = cell_corner(&grid, cell);
        let mut sq = 0.0;
        for axis in 0..dim {
            let mut acc = 0.0;
            for bits in 0..(1usize << dim) {
                if bits & (1 << axis) != 0 {
                    continue;
                }
                let mut lo = corner;
                for (k, c) in lo.iter_mut().enumerate().take(dim) {
                    *c += (bits >> k) & 1;
                }
                let mut hi = lo;
                hi[axis] += 1;
                acc += u.at_full(&hi[..dim]) - u.at_full(&lo[..dim]);
            }
            let g = acc / (edges * h);
            sq += g * g;
        }
        values.push(sq.sqrt());
    }
    CellField { grid, values }
}

/// `(Σ_cells |∇u|^q vol + Σ_nodes |u|^q vol)^(1/q)`.
pub fn sobolev_norm(u: &GridFunction, q: f64) -> Result<f64> {
    if !(q >= 1.0) {
        return Err(invalid("q", format!("{q} must be >= 1")));
    }
    let vol = u.grid().cell_volume();
    let grad = discrete_gradient_magnitude(u);
    let gsum: f64 = grad.values.iter().map(|g| g.powf(q)).sum();
    let usum: f64 = u.values().iter().map(|v| v.abs().powf(q)).sum();
    Ok(((gsum + usum) * vol).powf(1.0 / q))
}

/// Superlevel-set measures `m({|field| >= t})` at increasing thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionSample {
    pub thresholds: Vec<f64>,
    pub masses: Vec<f64>,
}

/// `values` are per-element samples, each representing `element_volume`.
pub fn distribution_function(
    values: &[f64],
    element_volume: f64,
    thresholds: &[f64],
) -> Result<DistributionSample> {
    if thresholds.iter().any(|&t| !(t > 0.0)) {
        return Err(invalid("thresholds", "must be positive"));
    }
    if thresholds.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("thresholds", "must be sorted ascending"));
    }
    let mut sorted: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    sorted.sort_by(f64::total_cmp);
    let masses = thresholds
        .iter()
        .map(|&t| {
            let below = sorted.partition_point(|&v| v < t);
            (sorted.len() - below) as f64 * element_volume
        })
        .collect();
    Ok(DistributionSample {
        thresholds: thresholds.to_vec(),
        masses,
    })
}

/// `count` log-spaced thresholds between two percentiles of the positive
/// entries of `values`. Empty when there is no spread to sample.
pub fn percentile_thresholds(values: &[f64], lo_pct: f64, hi_pct: f64, count: usize) -> Vec<f64> {
    let mut pos: Vec<f64> = values.iter().map(|v| v.abs()).filter(|&v| v > 0.0).collect();
    if pos.len() < 2 || count < 2 {
        return Vec::new();
    }
    pos.sort_by(f64::total_cmp);
    let pick = |p: f64| {
        let r = (p / 100.0 * (pos.len() - 1) as f64).round() as usize;
        pos[r.min(pos.len() - 1)]
    };
    let (a, b) = (pick(lo_pct), pick(hi_pct));
    if !(b > a) {
        return Vec::new();
    }
    log_space(a, b, count)
}

pub fn log_space(a: f64, b: f64, count: usize) -> Vec<f64> {
    let (la, lb) = (a.ln(), b.ln());
    (0..count)
        .map(|i| (la + (lb - la) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
    NotApplicable,
}

impl Verdict {
    pub fn is_failure(self) -> bool {
        self == Verdict::Fail
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
            Verdict::NotApplicable => "n/a",
        }
    }
}

/// Least-squares line through `(ln t, ln mass)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub t_range: (f64, f64),
    pub points: usize,
    /// Slope must not exceed this.
    pub bound: f64,
    pub verdict: Verdict,
}

impl ExponentFit {
    pub fn not_applicable(bound: f64) -> Self {
        ExponentFit {
            slope: f64::NAN,
            intercept: f64::NAN,
            r_squared: f64::NAN,
            t_range: (f64::NAN, f64::NAN),
            points: 0,
            bound,
            verdict: Verdict::NotApplicable,
        }
    }
}

/// Ordinary least squares; returns `(slope, intercept, r²)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64, f64)> {
    let n = xs.len();
    if n < 2 || n != ys.len() {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        ((sxy * sxy) / (sxx * syy)).clamp(0.0, 1.0)
    };
    Some((slope, intercept, r2))
}

fn power_fit(ts: &[f64], ms: &[f64], bound: f64, min_points: usize) -> ExponentFit {
    let pts: Vec<(f64, f64)> = ts
        .iter()
        .zip(ms)
        .filter(|(&t, &m)| t > 0.0 && m > 0.0)
        .map(|(&t, &m)| (t, m))
        .collect();
    let inconclusive = || ExponentFit {
        points: pts.len(),
        verdict: Verdict::Inconclusive,
        ..ExponentFit::not_applicable(bound)
    };
    if pts.len() < min_points {
        return inconclusive();
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    match linear_fit(&xs, &ys) {
        Some((slope, intercept, r_squared)) => ExponentFit {
            slope,
            intercept,
            r_squared,
            t_range: (pts[0].0, pts[pts.len() - 1].0),
            points: pts.len(),
            bound,
            verdict: if slope <= bound { Verdict::Pass } else { Verdict::Fail },
        },
        None => inconclusive(),
    }
}

/// Fits the decay of a distribution function and compares it with the
/// Marcinkiewicz exponent: passes when `slope <= -target + band`.
/// Fewer than four positive masses give an inconclusive fit.
pub fn marcinkiewicz_fit(sample: &DistributionSample, target_exponent: f64, band: f64) -> ExponentFit {
    power_fit(&sample.thresholds, &sample.masses, -target_exponent + band, 4)
}

/// Minimum `r²` for a tail fit to count.
pub const TAIL_MIN_R2: f64 = 0.9;

/// Tail fits of `|∇u|` against `N/(N-1)` and of `u` against `N/(N-2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TailReport {
    pub gradient: ExponentFit,
    pub value: ExponentFit,
}

impl TailReport {
    pub fn pass(&self) -> bool {
        [&self.gradient, &self.value]
            .iter()
            .all(|f| f.verdict == Verdict::Pass && f.r_squared >= TAIL_MIN_R2)
    }

    pub fn applicable(&self) -> bool {
        self.gradient.verdict != Verdict::NotApplicable
    }
}

/// Both exponents degenerate for `N <= 2`, so only 3D fields are fitted.
/// Thresholds span the 10th to 99.9th percentile of the positive values.
pub fn tail_exponents(u: &GridFunction) -> Result<TailReport> {
    const GRAD_BAND: f64 = 0.2;
    const VALUE_BAND: f64 = 0.3;
    let grid = u.grid();
    let n = grid.dim() as f64;
    if grid.dim() != 3 {
        return Ok(TailReport {
            gradient: ExponentFit::not_applicable(f64::NAN),
            value: ExponentFit::not_applicable(f64::NAN),
        });
    }
    let vol = grid.cell_volume();
    let fit = |values: &[f64], target: f64, band: f64| -> Result<ExponentFit> {
        let ts = percentile_thresholds(values, 10.0, 99.9, 16);
        let sample = distribution_function(values, vol, &ts)?;
        Ok(marcinkiewicz_fit(&sample, target, band))
    };
    let grad = discrete_gradient_magnitude(u);
    Ok(TailReport {
        gradient: fit(grad.values(), n / (n - 1.0), GRAD_BAND)?,
        value: fit(u.values(), n / (n - 2.0), VALUE_BAND)?,
    })
}

/// `Σ_cells |∇ T_k(u)^((γ+1)/2)|² vol`.
pub fn truncation_energy(u: &GridFunction, k: f64, gamma: f64) -> Result<f64> {
    if !(gamma >= 1.0) {
        return Err(invalid("gamma", format!("{gamma} must be >= 1")));
    }
    if !(k > 0.0) {
        return Err(invalid("k", format!("{k} must be positive")));
    }
    let w = u.map(|s| trunc_power(k, gamma, s));
    Ok(dirichlet_energy(&w, |_| true))
}

fn dirichlet_energy(u: &GridFunction, keep: impl Fn(usize) -> bool) -> f64 {
    let grad = discrete_gradient_magnitude(u);
    let vol = u.grid().cell_volume();
    grad.values
        .iter()
        .enumerate()
        .filter(|(i, _)| keep(*i))
        .map(|(_, g)| g * g)
        .sum::<f64>()
        * vol
}

/// Levels used for the energy law.
pub const ENERGY_LEVELS: [f64; 5] = [1.0, 2.0, 4.0, 8.0, 16.0];

/// Log-log slope of the truncation energy against `k`; passes when it does
/// not exceed `γ + band`.
pub fn energy_law(u: &GridFunction, ks: &[f64], gamma: f64, band: f64) -> Result<(Vec<f64>, ExponentFit)> {
    let energies = ks
        .iter()
        .map(|&k| truncation_energy(u, k, gamma))
        .collect::<Result<Vec<_>>>()?;
    let fit = power_fit(ks, &energies, gamma + band, 2);
    Ok((energies, fit))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitReport {
    /// `W^{1,q}` norm of `G_1(u)`.
    pub g1_norm: f64,
    pub q: f64,
    /// `(margin, Σ_{cells in band} |∇T_1(u)|² vol)`.
    pub t1_energy: Vec<(f64, f64)>,
}

/// Default `q` for the `G_1` part; below `N/(N-1)` for `N = 3`.
pub const SPLIT_Q: f64 = 1.2;

pub fn g1_t1_split_energies(u: &GridFunction, margins: &[f64], q: f64) -> Result<SplitReport> {
    let g1 = u.map(|s| trunc_g(1.0, s));
    let t1 = u.map(|s| trunc_t(1.0, s));
    let grid = u.grid().clone();
    let t1_energy = margins
        .iter()
        .map(|&m| {
            if !(0.0..0.5).contains(&m) {
                return Err(invalid("margin", format!("{m} is outside [0, 0.5)")));
            }
            let e = dirichlet_energy(&t1, |cell| cell_center_distance(&grid, cell) >= m);
            Ok((m, e))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SplitReport {
        g1_norm: sobolev_norm(&g1, q)?,
        q,
        t1_energy,
    })
}

/// Solution of `-Δφ₀ = 1` with zero boundary values.
pub fn torsion_function(grid: &Arc<Grid>) -> Result<GridFunction> {
    let op = build_laplacian(grid);
    solve_spd(&op, &GridFunction::constant(grid.clone(), 1.0), 1e-13)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KatoReport {
    /// `Σ (u1 - u2)⁺ vol`.
    pub lhs: f64,
    /// Nonlinear and measure terms, both restricted to `{u1 >= u2}`.
    pub rhs: f64,
    pub residual: f64,
    /// Right side with the measure term integrated over the whole domain.
    pub rhs_unrestricted: f64,
    pub residual_unrestricted: f64,
    pub pass: bool,
}

/// Tolerance for [`kato_residual`].
pub const KATO_TOL: f64 = 1e-10;

/// Evaluates the Kato inequality against the torsion function `phi0`:
///
/// ```text
/// Σ (u1-u2)⁺ <= Σ f (h(u1) - h(u2)) [u1 >= u2] φ₀ + Σ (μ1 - μ2) [u1 >= u2] φ₀
/// ```
///
/// `h` must be the nonlinearity the solutions were computed with, and `f`
/// the matching source weight.
pub fn kato_residual(
    u1: &SolveResult,
    u2: &SolveResult,
    mu1: &DiscretizedMeasure,
    mu2: &DiscretizedMeasure,
    f: &GridFunction,
    h: &dyn Fn(f64) -> f64,
    phi0: &GridFunction,
) -> Result<KatoReport> {
    if !(u1.converged && u2.converged) {
        return Err(Error::Unconverged);
    }
    let grid = phi0.grid();
    for g in [u1.u.grid(), u2.u.grid(), mu1.grid(), mu2.grid(), f.grid()] {
        grid.ensure_same(g)?;
    }
    let vol = grid.cell_volume();
    let (a, b) = (u1.u.values(), u2.u.values());
    let (m1, m2) = (mu1.values.values(), mu2.values.values());
    let (fv, p) = (f.values(), phi0.values());

    let mut lhs = 0.0;
    let mut nonlinear = 0.0;
    let mut measure_on_set = 0.0;
    let mut measure_all = 0.0;
    for i in 0..a.len() {
        let dm = (m1[i] - m2[i]) * p[i];
        measure_all += dm;
        if a[i] >= b[i] {
            lhs += a[i] - b[i];
            if fv[i] != 0.0 {
                nonlinear += fv[i] * (h(a[i]) - h(b[i])) * p[i];
            }
            measure_on_set += dm;
        }
    }
    let lhs = lhs * vol;
    let rhs = (nonlinear + measure_on_set) * vol;
    let rhs_unrestricted = (nonlinear + measure_all) * vol;
    Ok(KatoReport {
        lhs,
        rhs,
        residual: rhs - lhs,
        rhs_unrestricted,
        residual_unrestricted: rhs_unrestricted - lhs,
        pass: rhs - lhs >= -KATO_TOL,
    })
}

/// Smallest eigenvalue of the discrete Laplacian by inverse power iteration.
pub fn lambda1_estimate(grid: &Arc<Grid>) -> Result<f64> {
    const CAP: usize = 1000;
    let op = build_laplacian(grid);
    let mut x = GridFunction::constant(grid.clone(), 1.0);
    let mut lambda = f64::INFINITY;
    for it in 0..CAP {
        let norm = x.values().iter().map(|v| v * v).sum::<f64>().sqrt();
        x = x.map(|v| v / norm);
        let ax = op.apply(x.values());
        let rq: f64 = ax.iter().zip(x.values()).map(|(a, b)| a * b).sum();
        if it > 0 && (rq - lambda).abs() <= 1e-8 * rq {
            return Ok(rq);
        }
        lambda = rq;
        x = solve_spd(&op, &x, 1e-11)?;
    }
    Err(Error::Eigen { iterations: CAP })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{mollify, RadonMeasure};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn line(cells: usize) -> Arc<Grid> {
        Grid::new(1, cells, 0.0).unwrap()
    }

    fn green(g: &Arc<Grid>) -> GridFunction {
        GridFunction::from_fn(g.clone(), |x| x[0].min(1.0 - x[0]) / 2.0)
    }

    fn converged(u: GridFunction) -> SolveResult {
        SolveResult {
            u,
            iterations: 1,
            residual: 0.0,
            converged: true,
            picard_history: vec![0.0],
        }
    }

    #[test]
    fn gradient_examples() {
        let g = line(8);
        let z = discrete_gradient_magnitude(&GridFunction::zeros(g.clone()));
        assert_eq!(z.values().len(), 8);
        assert!(z.values().iter().all(|&v| v == 0.0));

        let tent = GridFunction::new(g.clone(), g.distances().to_vec()).unwrap();
        let t = discrete_gradient_magnitude(&tent);
        assert!(t.values().iter().all(|&v| (v - 1.0).abs() < 1e-12));

        let gr = discrete_gradient_magnitude(&green(&g));
        assert!(gr.values().iter().all(|&v| (v - 0.5).abs() < 1e-12));
    }

    #[test]
    fn gradient_of_linear_field_in_2d() {
        let g = Grid::new(2, 10, 0.0).unwrap();
        let u = GridFunction::from_fn(g.clone(), |x| 3.0 * x[0] + 4.0 * x[1]);
        let grad = discrete_gradient_magnitude(&u);
        // Interior cells (no boundary corner) see the exact slope.
        for (cell, &v) in grad.values().iter().enumerate() {
            if grad.center_distance(cell) > 0.1 {
                assert!((v - 5.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sobolev_examples() {
        let g = line(64);
        assert_eq!(sobolev_norm(&GridFunction::zeros(g.clone()), 1.5).unwrap(), 0.0);
        let n = sobolev_norm(&green(&g), 1.0).unwrap();
        assert!((n - 0.625).abs() <= g.spacing());
        let u = GridFunction::from_fn(g.clone(), |x| (PI * x[0]).sin());
        let a = sobolev_norm(&u, 1.7).unwrap();
        let b = sobolev_norm(&u.map(|v| 2.0 * v), 1.7).unwrap();
        assert!((b - 2.0 * a).abs() < 1e-12);
        assert!(sobolev_norm(&u, 0.5).is_err());
    }

    #[test]
    fn distribution_examples() {
        let c = vec![2.0; 100];
        let d = distribution_function(&c, 0.01, &[1.0, 3.0]).unwrap();
        assert_eq!(d.masses, vec![1.0, 0.0]);
        let g = line(32);
        let grad = discrete_gradient_magnitude(&green(&g));
        let d = distribution_function(grad.values(), g.cell_volume(), &[0.25, 0.4999, 0.5001, 1.0]).unwrap();
        assert_eq!(d.masses, vec![1.0, 1.0, 0.0, 0.0]);
        let e = distribution_function(&c, 0.01, &[]).unwrap();
        assert!(e.masses.is_empty());
        assert!(distribution_function(&c, 0.01, &[2.0, 1.0]).is_err());
        assert!(distribution_function(&c, 0.01, &[0.0]).is_err());
    }

    #[test]
    fn fit_examples() {
        let ts = log_space(1.0, 100.0, 10);
        let sample = DistributionSample {
            masses: ts.iter().map(|t| t.powi(-2)).collect(),
            thresholds: ts,
        };
        let fit = marcinkiewicz_fit(&sample, 2.0, 0.2);
        assert!((fit.slope + 2.0).abs() < 1e-6);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert_eq!(fit.verdict, Verdict::Pass);
        assert_eq!(marcinkiewicz_fit(&sample, 2.5, 0.2).verdict, Verdict::Fail);

        let sparse = DistributionSample {
            thresholds: vec![1.0, 2.0, 3.0, 4.0],
            masses: vec![0.5, 0.0, 0.0, 0.0],
        };
        assert_eq!(marcinkiewicz_fit(&sparse, 2.0, 0.2).verdict, Verdict::Inconclusive);
    }

    #[test]
    fn percentile_grid() {
        let vals: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        let t = percentile_thresholds(&vals, 10.0, 99.9, 16);
        assert_eq!(t.len(), 16);
        assert!((t[0] - 101.0).abs() < 1.0 && (t[15] - 999.0).abs() < 1.0);
        assert!(percentile_thresholds(&[1.0; 10], 10.0, 99.9, 16).is_empty());
    }

    #[test]
    fn tails_not_applicable_below_3d() {
        let u = GridFunction::from_fn(Grid::new(2, 8, 0.0).unwrap(), |x| x[0] * x[1]);
        let r = tail_exponents(&u).unwrap();
        assert!(!r.applicable());
        assert_eq!(r.value.verdict, Verdict::NotApplicable);
    }

    #[test]
    fn truncation_energy_examples() {
        let g = line(32);
        assert_eq!(truncation_energy(&GridFunction::zeros(g.clone()), 2.0, 1.0).unwrap(), 0.0);
        let u = green(&g);
        let plain: f64 = discrete_gradient_magnitude(&u).values().iter().map(|v| v * v).sum::<f64>() * g.spacing();
        assert!((truncation_energy(&u, 1.0, 1.0).unwrap() - plain).abs() < 1e-15);
        assert!(truncation_energy(&u, 1.0, 0.5).is_err());
        assert!(truncation_energy(&u, 0.0, 1.0).is_err());
    }

    #[test]
    fn split_examples() {
        let g = line(32);
        let small = green(&g);
        let r = g1_t1_split_energies(&small, &[0.125, 0.25], SPLIT_Q).unwrap();
        assert_eq!(r.g1_norm, 0.0);
        assert!(r.t1_energy[0].1 >= r.t1_energy[1].1);

        let big = small.map(|v| 8.0 * v);
        let g1 = big.map(|s| trunc_g(1.0, s));
        for (x, &v) in g.points().zip(g1.values()) {
            if v > 0.0 {
                assert!((x[0] - 0.5).abs() < 0.25);
            }
        }
        let t1 = big.map(|s| trunc_t(1.0, s));
        for i in 0..big.values().len() {
            assert_eq!(g1.values()[i] + t1.values()[i], big.values()[i]);
        }
    }

    #[test]
    fn torsion_examples() {
        let g = line(16);
        let phi = torsion_function(&g).unwrap();
        for (x, &v) in g.points().zip(phi.values()) {
            assert!((v - x[0] * (1.0 - x[0]) / 2.0).abs() < 1e-12);
        }
        assert!((phi.values()[7] - 0.125).abs() < 1e-12);

        let g2 = Grid::new(2, 32, 0.0).unwrap();
        let phi = torsion_function(&g2).unwrap();
        assert!(phi.min_value() > 0.0);
        let centre = g2.node_at(&[16, 16]).unwrap();
        assert_eq!(phi.values()[centre], phi.max_value());
        for node in 0..g2.interior_count() {
            let [i, j, _] = g2.full_index(node);
            let mirror = g2.node_at(&[32 - i, j]).unwrap();
            let swap = g2.node_at(&[j, i]).unwrap();
            assert!((phi.values()[node] - phi.values()[mirror]).abs() < 1e-12);
            assert!((phi.values()[node] - phi.values()[swap]).abs() < 1e-12);
        }
    }

    #[test]
    fn kato_identical_inputs() {
        let g = line(16);
        let mu = mollify(&RadonMeasure::dirac(&[0.5], 1.0), &g, 16).unwrap();
        let u = converged(green(&g));
        let phi = torsion_function(&g).unwrap();
        let f = GridFunction::constant(g.clone(), 1.0);
        let r = kato_residual(&u, &u, &mu, &mu, &f, &|s| s.powf(-0.5), &phi).unwrap();
        assert_eq!((r.lhs, r.rhs, r.residual), (0.0, 0.0, 0.0));
        assert!(r.pass);

        let mut bad = u.clone();
        bad.converged = false;
        assert!(matches!(
            kato_residual(&bad, &u, &mu, &mu, &f, &|s| s, &phi),
            Err(Error::Unconverged)
        ));
    }

    #[test]
    fn lambda1_examples() {
        let l = lambda1_estimate(&line(4)).unwrap();
        let exact = 32.0 * (1.0 - (PI / 4.0).cos());
        assert!((l - exact).abs() < 1e-6, "{l}");
        assert!((exact - 9.3726).abs() < 1e-4);

        let fine = lambda1_estimate(&line(128)).unwrap();
        assert!((fine - PI * PI).abs() < 1e-2);
        assert!(fine > l);

        let l2 = lambda1_estimate(&Grid::new(2, 16, 0.0).unwrap()).unwrap();
        let l1 = lambda1_estimate(&line(16)).unwrap();
        assert!((l2 - 2.0 * l1).abs() < 1e-6 * l2);
    }

    proptest! {
        #[test]
        fn distribution_is_nonincreasing(vals in proptest::collection::vec(-10.0f64..10.0, 1..200),
                                         ts in proptest::collection::vec(0.01f64..12.0, 1..20)) {
            let mut ts = ts;
            ts.sort_by(f64::total_cmp);
            let vol = 1.0 / vals.len() as f64;
            let d = distribution_function(&vals, vol, &ts).unwrap();
            prop_assert!(d.masses.windows(2).all(|w| w[1] <= w[0]));
            prop_assert!(d.masses.iter().all(|&m| (0.0..=1.0 + 1e-12).contains(&m)));
        }

        #[test]
        fn chebyshev_consistency(k in 0.05f64..0.3, t in 0.1f64..5.0, amp in 0.5f64..3.0) {
            let g = Grid::new(2, 16, 0.0).unwrap();
            let u = GridFunction::from_fn(g.clone(), |x| amp * (PI * x[0]).sin() * (PI * x[1]).sin());
            let tk = u.map(|s| trunc_t(k, s));
            let grad = discrete_gradient_magnitude(&tk);
            // A cell lies in {u < k} when all of its nodal values do.
            let count = grad.values().iter().enumerate().filter(|&(cell, &gv)| {
                let c = cell_corner(&g, cell);
                let below = (0..4).all(|bits| u.at_full(&[c[0] + (bits & 1), c[1] + (bits >> 1)]) < k);
                below && gv >= t
            }).count();
            let mass = count as f64 * g.cell_volume();
            let energy = truncation_energy(&u, k, 1.0).unwrap();
            prop_assert!(t * t * mass <= energy * (1.0 + 1e-12));
        }
    }
}
