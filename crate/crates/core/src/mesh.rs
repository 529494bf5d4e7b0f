//! Uniform grids on the unit box, the five/seven-point Dirichlet Laplacian and
//! a Jacobi-preconditioned conjugate-gradient solve.
//!
//! Only interior nodes carry unknowns. Boundary values are implicitly zero, so
//! every [`GridFunction`] encodes a homogeneous Dirichlet condition.

use std::sync::Arc;

use crate::error::{invalid, Error, Result};

/// Largest supported spatial dimension.
pub const MAX_DIM: usize = 3;

/// Node-aligned discretization of the unit box `(0, 1)^dim`.
#[derive(Debug, Clone)]
pub struct Grid {
    dim: usize,
    cells: usize,
    spacing: f64,
    boundary_margin: f64,
    coords: Vec<f64>,
    distance: Vec<f64>,
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.cells == other.cells
    }
}

impl Grid {
    /// Builds the grid with `cells` cells per side.
    ///
    /// `boundary_margin` is the default band width used for compact-subset
    /// checks; it must lie in `[0, 0.5)`.
    pub fn new(dim: usize, cells: usize, boundary_margin: f64) -> Result<Arc<Grid>> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(invalid("dim", format!("{dim} is not in {{1, 2, 3}}")));
        }
        if cells < 2 {
            return Err(invalid("cells", format!("{cells} leaves no interior node")));
        }
        check_margin(boundary_margin)?;

        let spacing = 1.0 / cells as f64;
        let per_side = cells - 1;
        let count = per_side.pow(dim as u32);
        let mut coords = Vec::with_capacity(count * dim);
        let mut distance = Vec::with_capacity(count);
        for idx in 0..count {
            let full = multi_index(idx, per_side, dim);
            let mut d = f64::INFINITY;
            for &i in &full[..dim] {
                let x = i as f64 * spacing;
                coords.push(x);
                // Integer form keeps d exact on node-aligned distances.
                let steps = i.min(cells - i);
                d = d.min(steps as f64 * spacing);
            }
            distance.push(d);
        }

        Ok(Arc::new(Grid {
            dim,
            cells,
            spacing,
            boundary_margin,
            coords,
            distance,
        }))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn boundary_margin(&self) -> f64 {
        self.boundary_margin
    }

    /// Interior nodes per coordinate direction.
    pub fn nodes_per_side(&self) -> usize {
        self.cells - 1
    }

    pub fn interior_count(&self) -> usize {
        self.distance.len()
    }

    /// Volume represented by one node or one cell, `spacing^dim`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    pub fn cell_count(&self) -> usize {
        self.cells.pow(self.dim as u32)
    }

    pub fn point(&self, node: usize) -> &[f64] {
        &self.coords[node * self.dim..(node + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    /// Distance from interior node `node` to the boundary of the box.
    pub fn distance(&self, node: usize) -> f64 {
        self.distance[node]
    }

    pub fn distances(&self) -> &[f64] {
        &self.distance
    }

    /// Full lattice index (each entry in `1..cells`) of an interior node.
    pub fn full_index(&self, node: usize) -> [usize; MAX_DIM] {
        multi_index(node, self.cells - 1, self.dim)
    }

    /// Maps a full lattice index (entries in `0..=cells`) to an interior node,
    /// or `None` for boundary nodes.
    pub fn node_at(&self, full: &[usize]) -> Option<usize> {
        let per_side = self.cells - 1;
        let mut idx = 0;
        let mut stride = 1;
        for &i in &full[..self.dim] {
            if i == 0 || i >= self.cells {
                return None;
            }
            idx += (i - 1) * stride;
            stride *= per_side;
        }
        Some(idx)
    }

    /// Interior nodes with `d(x) >= margin`, i.e. the compact `K` of that band.
    pub fn compact_nodes(&self, margin: f64) -> impl Iterator<Item = usize> + '_ {
        let cut = margin - 1e-12 * self.spacing;
        self.distance
            .iter()
            .enumerate()
            .filter(move |(_, &d)| d >= cut)
            .map(|(i, _)| i)
    }

    pub(crate) fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{}D/{} cells vs {}D/{} cells",
                self.dim, self.cells, other.dim, other.cells
            )))
        }
    }
}

fn multi_index(mut idx: usize, per_side: usize, dim: usize) -> [usize; MAX_DIM] {
    let mut out = [0; MAX_DIM];
    for slot in out.iter_mut().take(dim) {
        *slot = idx % per_side + 1;
        idx /= per_side;
    }
    out
}

fn check_margin(margin: f64) -> Result<()> {
    if !(0.0..0.5).contains(&margin) {
        return Err(invalid(
            "margin",
            format!("{margin} is outside [0, 0.5); the compact would be empty"),
        ));
    }
    Ok(())
}

/// Nodal values on the interior of a [`Grid`].
#[derive(Debug, Clone)]
pub struct GridFunction {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.interior_count() {
            return Err(invalid(
                "values",
                format!(
                    "length {} does not match {} interior nodes",
                    values.len(),
                    grid.interior_count()
                ),
            ));
        }
        Ok(GridFunction { grid, values })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.interior_count();
        GridFunction {
            grid,
            values: vec![0.0; n],
        }
    }

    pub fn constant(grid: Arc<Grid>, c: f64) -> Self {
        let n = grid.interior_count();
        GridFunction {
            grid,
            values: vec![c; n],
        }
    }

    /// Samples `f` at every interior node.
    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = grid.points().map(f).collect();
        GridFunction { grid, values }
    }

    pub(crate) fn from_raw(grid: Arc<Grid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.interior_count());
        GridFunction { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Value at a full lattice index; zero on the boundary.
    pub fn at_full(&self, full: &[usize]) -> f64 {
        self.grid.node_at(full).map_or(0.0, |i| self.values[i])
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        GridFunction {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        Ok(GridFunction {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn max_abs_diff(&self, other: &GridFunction) -> Result<f64> {
        self.grid.ensure_same(&other.grid)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Discrete L¹ norm, `Σ |u| · spacing^dim`.
    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn l1_diff(&self, other: &GridFunction) -> Result<f64> {
        self.grid.ensure_same(&other.grid)?;
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum();
        Ok(s * self.grid.cell_volume())
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Minimum of `u` over interior nodes with `d(x) >= margin`: the discrete `C_K`.
pub fn min_on_compact(u: &GridFunction, margin: f64) -> Result<f64> {
    check_margin(margin)?;
    u.grid
        .compact_nodes(margin)
        .map(|i| u.values[i])
        .reduce(f64::min)
        .ok_or(Error::EmptyCompact { margin })
}

/// Sparse symmetric matrix in CSR layout.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteOperator {
    size: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    diag: Vec<f64>,
}

/// Assembles `-Δ` with the `(2·dim + 1)`-point stencil.
pub fn build_laplacian(grid: &Grid) -> DiscreteOperator {
    let n = grid.interior_count();
    let dim = grid.dim();
    let inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(n * (2 * dim + 1));
    let mut vals = Vec::with_capacity(n * (2 * dim + 1));
    row_ptr.push(0);

    for node in 0..n {
        let full = grid.full_index(node);
        let mut row: Vec<(usize, f64)> = Vec::with_capacity(2 * dim + 1);
        row.push((node, 2.0 * dim as f64 * inv_h2));
        for axis in 0..dim {
            for step in [-1isize, 1] {
                let mut nb = full;
                nb[axis] = (nb[axis] as isize + step) as usize;
                if let Some(j) = grid.node_at(&nb) {
                    row.push((j, -inv_h2));
                }
            }
        }
        row.sort_unstable_by_key(|&(j, _)| j);
        for (j, v) in row {
            cols.push(j);
            vals.push(v);
        }
        row_ptr.push(cols.len());
    }

    DiscreteOperator {
        size: n,
        row_ptr,
        cols,
        vals,
        diag: vec![2.0 * dim as f64 * inv_h2; n],
    }
}

impl DiscreteOperator {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// `(col, value)` pairs of one row.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[range.clone()]
            .iter()
            .copied()
            .zip(self.vals[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *o = acc;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.size];
        self.apply_into(x, &mut out);
        out
    }

    pub fn transpose(&self) -> DiscreteOperator {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.size];
        for i in 0..self.size {
            for (j, v) in self.row(i) {
                rows[j].push((i, v));
            }
        }
        let mut row_ptr = vec![0];
        let mut cols = Vec::with_capacity(self.nnz());
        let mut vals = Vec::with_capacity(self.nnz());
        for mut r in rows {
            r.sort_unstable_by_key(|&(j, _)| j);
            for (j, v) in r {
                cols.push(j);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        let diag = (0..self.size).map(|i| self.get(i, i)).collect();
        DiscreteOperator {
            size: self.size,
            row_ptr,
            cols,
            vals,
            diag,
        }
    }

    /// Dense row-major copy; only sensible for small operators.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.size]; self.size];
        for (i, row) in dense.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        dense
    }
}

/// Iteration cap for [`solve_spd`]: twenty sweeps per unknown.
pub fn iteration_cap(op: &DiscreteOperator) -> usize {
    20 * op.size().max(1)
}

/// Solves `op · x = rhs` to relative residual `tol` starting from zero.
pub fn solve_spd(op: &DiscreteOperator, rhs: &GridFunction, tol: f64) -> Result<GridFunction> {
    let x = pcg(op, rhs.values(), None, tol)?;
    Ok(GridFunction::from_raw(rhs.grid.clone(), x))
}

/// As [`solve_spd`], warm-started from `guess`.
pub fn solve_spd_from(
    op: &DiscreteOperator,
    rhs: &GridFunction,
    guess: &GridFunction,
    tol: f64,
) -> Result<GridFunction> {
    rhs.grid.ensure_same(&guess.grid)?;
    let x = pcg(op, rhs.values(), Some(guess.values()), tol)?;
    Ok(GridFunction::from_raw(rhs.grid.clone(), x))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn pcg(op: &DiscreteOperator, b: &[f64], x0: Option<&[f64]>, tol: f64) -> Result<Vec<f64>> {
    if !(tol > 0.0) {
        return Err(invalid("tol", format!("{tol} must be positive")));
    }
    let n = op.size();
    if b.len() != n {
        return Err(invalid("rhs", "length does not match operator"));
    }
    let b_norm = dot(b, b).sqrt();
    let target = if b_norm > 0.0 { tol * b_norm } else { tol };
    let scale = if b_norm > 0.0 { b_norm } else { 1.0 };

    let mut x = match x0 {
        Some(g) => g.to_vec(),
        None => vec![0.0; n],
    };
    if b_norm == 0.0 && x0.is_none() {
        return Ok(x);
    }

    let inv_diag: Vec<f64> = op.diagonal().iter().map(|d| 1.0 / d).collect();
    let op_norm = (0..n)
        .map(|i| op.row(i).map(|(_, v)| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let cap = iteration_cap(op);
    let mut r = vec![0.0; n];
    let mut ap = vec![0.0; n];
    let mut iterations = 0;

    // The recursive residual drifts from the true one; restart from the true
    // residual until both agree on convergence.
    loop {
        op.apply_into(&x, &mut ap);
        for i in 0..n {
            r[i] = b[i] - ap[i];
        }
        let mut r_norm = dot(&r, &r).sqrt();
        // Below this the residual is rounding noise: the normwise backward
        // error is already at working precision.
        let floor = 64.0 * f64::EPSILON * (op_norm * dot(&x, &x).sqrt() + b_norm);
        if r_norm <= target.max(floor) {
            return Ok(x);
        }
        if iterations >= cap {
            return Err(Error::LinearSolve {
                iterations,
                residual: r_norm / scale,
            });
        }
        let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        while iterations < cap {
            iterations += 1;
            op.apply_into(&p, &mut ap);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                break;
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            r_norm = dot(&r, &r).sqrt();
            if r_norm <= target {
                break;
            }
            for i in 0..n {
                z[i] = r[i] * inv_diag[i];
            }
            let rz_next = dot(&r, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                iteration: iterations,
            });
        }
    }
}
