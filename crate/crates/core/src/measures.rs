//! Nonnegative Radon measures made of point atoms plus a density, and their
//! smooth grid approximations `μ_n`.

use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::field::ScalarField;
use crate::mesh::{Grid, GridFunction};

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    /// Coordinates beyond the grid dimension are ignored.
    pub location: Vec<f64>,
    pub mass: f64,
}

#[derive(Debug, Clone)]
pub struct RadonMeasure {
    pub atoms: Vec<Atom>,
    pub density: ScalarField,
}

impl Default for RadonMeasure {
    fn default() -> Self {
        Self::zero()
    }
}

impl RadonMeasure {
    pub fn zero() -> Self {
        RadonMeasure {
            atoms: Vec::new(),
            density: ScalarField::Zero,
        }
    }

    /// Point mass at `location`.
    pub fn dirac(location: &[f64], mass: f64) -> Self {
        RadonMeasure {
            atoms: vec![Atom {
                location: location.to_vec(),
                mass,
            }],
            density: ScalarField::Zero,
        }
    }

    pub fn with_density(density: ScalarField) -> Self {
        RadonMeasure {
            atoms: Vec::new(),
            density,
        }
    }

    pub fn with_atom(mut self, location: &[f64], mass: f64) -> Self {
        self.atoms.push(Atom {
            location: location.to_vec(),
            mass,
        });
        self
    }

    /// Multiplies every atom mass and the density by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let density = if factor == 1.0 {
            self.density.clone()
        } else {
            let d = self.density.clone();
            ScalarField::Custom(Arc::new(move |x| factor * d.eval(x)))
        };
        RadonMeasure {
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom {
                    location: a.location.clone(),
                    mass: a.mass * factor,
                })
                .collect(),
            density,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.iter().all(|a| a.mass == 0.0) && self.density.is_zero()
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        for atom in &self.atoms {
            if !(atom.mass.is_finite() && atom.mass >= 0.0) {
                return Err(invalid("measure", format!("atom mass {} is negative", atom.mass)));
            }
            if atom.location.len() < dim {
                return Err(invalid("measure", "atom has fewer coordinates than the grid"));
            }
            if atom.location[..dim].iter().any(|&c| !(c > 0.0 && c < 1.0)) {
                return Err(invalid(
                    "measure",
                    format!("atom at {:?} is not inside the open unit box", &atom.location[..dim]),
                ));
            }
        }
        self.density.validate(dim)
    }

    /// Total variation `Σ masses + ∫ density`.
    pub fn total_variation(&self, dim: usize) -> Result<f64> {
        self.validate(dim)?;
        let atoms: f64 = self.atoms.iter().map(|a| a.mass).sum();
        let density = quadrature(dim, |x| self.density.eval(x))?;
        Ok(atoms + density)
    }

    /// Exact pairing `∫ φ dμ` (atoms exactly, density by quadrature).
    pub fn integrate(&self, dim: usize, phi: &dyn Fn(&[f64]) -> f64) -> Result<f64> {
        self.validate(dim)?;
        let atoms: f64 = self
            .atoms
            .iter()
            .map(|a| a.mass * phi(&a.location[..dim]))
            .sum();
        let mut negative = false;
        let density = midpoint(dim, |x| {
            let d = self.density.eval(x);
            negative |= d < 0.0;
            d * phi(x)
        });
        if negative {
            return Err(invalid("measure", "density takes negative values"));
        }
        Ok(atoms + density)
    }
}

/// Cells per side of the reference quadrature grid in each dimension.
pub fn quadrature_cells(dim: usize) -> usize {
    256 >> (dim - 1)
}

fn midpoint(dim: usize, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let m = quadrature_cells(dim);
    let h = 1.0 / m as f64;
    let total = m.pow(dim as u32);
    let mut x = vec![0.0; dim];
    let mut sum = 0.0;
    for idx in 0..total {
        let mut rest = idx;
        for xi in x.iter_mut() {
            *xi = (rest % m) as f64 * h + 0.5 * h;
            rest /= m;
        }
        sum += f(&x);
    }
    sum * h.powi(dim as i32)
}

fn quadrature(dim: usize, f: impl Fn(&[f64]) -> f64) -> Result<f64> {
    let mut negative = false;
    let v = midpoint(dim, |x| {
        let d = f(x);
        negative |= d < 0.0;
        d
    });
    if negative {
        return Err(invalid("measure", "density takes negative values"));
    }
    Ok(v)
}

/// Mollified measure `μ_n` sampled on a grid.
#[derive(Debug, Clone)]
pub struct DiscretizedMeasure {
    pub values: GridFunction,
    pub level: u64,
    /// Set when some atom kernel was clipped by the boundary.
    pub clipped: bool,
}

impl DiscretizedMeasure {
    pub fn grid(&self) -> &Arc<Grid> {
        self.values.grid()
    }

    /// Discrete mass `Σ μ_n · spacing^dim`.
    pub fn mass(&self) -> f64 {
        self.values.l1_norm()
    }
}

/// Kernel width at level `n`: never below one grid spacing.
pub fn mollifier_width(grid: &Grid, n: u64) -> f64 {
    grid.spacing().max(1.0 / n as f64)
}

fn bump(r: f64, width: f64) -> f64 {
    let t = r / width;
    if t < 1.0 {
        (1.0 - t * t).powi(2)
    } else {
        0.0
    }
}

/// Builds `μ_n`: atoms spread with a quartic bump of width
/// [`mollifier_width`], each renormalized to its exact discrete mass, plus
/// the density sampled at the nodes.
pub fn mollify(mu: &RadonMeasure, grid: &Arc<Grid>, n: u64) -> Result<DiscretizedMeasure> {
    if n == 0 {
        return Err(invalid("n", "level must be >= 1"));
    }
    let dim = grid.dim();
    mu.validate(dim)?;

    let mut values: Vec<f64> = if mu.density.is_zero() {
        vec![0.0; grid.interior_count()]
    } else {
        grid.points().map(|x| mu.density.eval(x)).collect()
    };
    if values.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
        return Err(invalid("measure", "density takes negative or non-finite values"));
    }

    let width = mollifier_width(grid, n);
    let h = grid.spacing();
    let vol = grid.cell_volume();
    let cells = grid.cells();
    let mut clipped = false;

    for atom in mu.atoms.iter().filter(|a| a.mass > 0.0) {
        let loc = &atom.location[..dim];
        if loc.iter().any(|&c| c.min(1.0 - c) < width) {
            clipped = true;
        }
        // Index box of nodes that can lie within `width` of the atom.
        let mut lo = [1usize; 3];
        let mut hi = [1usize; 3];
        for k in 0..dim {
            lo[k] = (((loc[k] - width) / h).ceil().max(1.0)) as usize;
            hi[k] = (((loc[k] + width) / h).floor() as usize).min(cells - 1);
        }
        let mut weights = Vec::new();
        let mut full = [1usize; 3];
        let mut nearest = (f64::INFINITY, 0usize);
        visit_box(&lo, &hi, dim, &mut full, &mut |full| {
            if let Some(node) = grid.node_at(full) {
                let x = grid.point(node);
                let r = x.iter().zip(loc).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                if r < nearest.0 {
                    nearest = (r, node);
                }
                let w = bump(r, width);
                if w > 0.0 {
                    weights.push((node, w));
                }
            }
        });
        let total: f64 = weights.iter().map(|(_, w)| w).sum();
        if total > 0.0 {
            for (node, w) in weights {
                values[node] += atom.mass * w / (total * vol);
            }
        } else {
            let node = if nearest.0.is_finite() {
                nearest.1
            } else {
                nearest_node(grid, loc)
            };
            values[node] += atom.mass / vol;
            clipped = true;
        }
    }

    Ok(DiscretizedMeasure {
        values: GridFunction::new(grid.clone(), values)?,
        level: n,
        clipped,
    })
}

fn visit_box(
    lo: &[usize; 3],
    hi: &[usize; 3],
    dim: usize,
    full: &mut [usize; 3],
    f: &mut dyn FnMut(&[usize]),
) {
    fn rec(
        axis: usize,
        lo: &[usize; 3],
        hi: &[usize; 3],
        dim: usize,
        full: &mut [usize; 3],
        f: &mut dyn FnMut(&[usize]),
    ) {
        if axis == dim {
            f(&full[..dim]);
            return;
        }
        for i in lo[axis]..=hi[axis] {
            full[axis] = i;
            rec(axis + 1, lo, hi, dim, full, f);
        }
    }
    if (0..dim).all(|k| lo[k] <= hi[k]) {
        rec(0, lo, hi, dim, full, f);
    }
}

fn nearest_node(grid: &Grid, loc: &[f64]) -> usize {
    let mut full = [1usize; 3];
    for (k, &c) in loc.iter().enumerate() {
        full[k] = ((c / grid.spacing()).round() as usize).clamp(1, grid.cells() - 1);
    }
    grid.node_at(&full[..grid.dim()]).expect("clamped index is interior")
}

/// `Σ μ_n(x) φ(x) spacing^dim`.
pub fn pair(mu_d: &DiscretizedMeasure, phi: &GridFunction) -> Result<f64> {
    mu_d.grid().ensure_same(phi.grid())?;
    let s: f64 = mu_d
        .values
        .values()
        .iter()
        .zip(phi.values())
        .map(|(m, p)| m * p)
        .sum();
    Ok(s * phi.grid().cell_volume())
}

/// A boundary-vanishing continuous test function.
pub struct TestFunction<'a> {
    pub name: &'a str,
    pub phi: &'a dyn Fn(&[f64]) -> f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairingTrace {
    pub name: String,
    pub exact: f64,
    /// `(level n, pairing, |pairing - exact|)`, one per grid.
    pub levels: Vec<(u64, f64, f64)>,
    /// Gaps never increase along the sequence.
    pub monotone: bool,
}

impl PairingTrace {
    pub fn final_gap(&self) -> f64 {
        self.levels.last().map_or(f64::NAN, |l| l.2)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeakConvergenceReport {
    pub traces: Vec<PairingTrace>,
}

/// Pairs `μ_n` against each test function along the grid sequence, with the
/// level tied to the resolution (`n = cells`).
pub fn weak_convergence_check(
    mu: &RadonMeasure,
    grids: &[Arc<Grid>],
    tests: &[TestFunction<'_>],
) -> Result<WeakConvergenceReport> {
    let mut traces = Vec::with_capacity(tests.len());
    for test in tests {
        let mut levels = Vec::with_capacity(grids.len());
        let dim = grids.first().map_or(1, |g| g.dim());
        let exact = mu.integrate(dim, test.phi)?;
        for grid in grids {
            let n = grid.cells() as u64;
            let mu_d = mollify(mu, grid, n)?;
            let phi = GridFunction::from_fn(grid.clone(), test.phi);
            let p = pair(&mu_d, &phi)?;
            levels.push((n, p, (p - exact).abs()));
        }
        let monotone = levels.windows(2).all(|w| w[1].2 <= w[0].2 + 1e-14);
        traces.push(PairingTrace {
            name: test.name.to_string(),
            exact,
            levels,
            monotone,
        });
    }
    Ok(WeakConvergenceReport { traces })
}
