//! Exponentially weighted signals on a uniform causal time grid.
//!
//! A [`WeightedSignal`] is a vector-valued function sampled at the nodes of a
//! [`TimeGrid`], implicitly zero before the first node. Inner products use the
//! weight `e^{-2ρt}` and a left-rectangle rule,
//!
//! ```text
//! ⟨u, v⟩_ρ = Σ_k ⟨u_k, v_k⟩ e^{-2ρ t_k} dt
//! ```

use nalgebra::{DMatrix, DVector, DVectorView};

use crate::error::{ensure, Error, Result};

/// Uniform grid `t_k = t0 + k·dt`, `k = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t0: f64,
    dt: f64,
    n: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, dt: f64, n: usize) -> Result<Self> {
        ensure!(t0.is_finite(), "grid start must be finite, got {t0}");
        ensure!(dt.is_finite() && dt > 0.0, "grid step must be positive, got {dt}");
        ensure!(n >= 2, "grid needs at least two nodes, got {n}");
        Ok(Self { t0, dt, n })
    }

    /// Grid covering `[t0, t0 + horizon]` with step `dt`.
    pub fn with_horizon(t0: f64, dt: f64, horizon: f64) -> Result<Self> {
        ensure!(horizon > 0.0, "horizon must be positive, got {horizon}");
        ensure!(dt.is_finite() && dt > 0.0, "grid step must be positive, got {dt}");
        let n = (horizon / dt).round() as usize + 1;
        Self::new(t0, dt, n)
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn last_time(&self) -> f64 {
        self.time(self.n - 1)
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|k| self.time(k))
    }

    /// Weight `e^{-2ρ t_k}` at node `k`.
    pub fn weight(&self, k: usize, rho: f64) -> f64 {
        (-2.0 * rho * self.time(k)).exp()
    }

    /// Same grid with a different step (and node count covering the same horizon).
    pub fn refined(&self, factor: usize) -> Result<Self> {
        ensure!(factor >= 1, "refinement factor must be positive");
        Self::new(self.t0, self.dt / factor as f64, (self.n - 1) * factor + 1)
    }
}

/// Which side of the cut-off time survives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Keep nodes with `t_k <= a`.
    Past,
    /// Keep nodes with `t_k >= a`.
    Future,
}

/// Signal on a time grid with weight parameter `rho > 0`.
///
/// Values are stored column-wise: column `k` is the state at node `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSignal {
    grid: TimeGrid,
    values: DMatrix<f64>,
    rho: f64,
}

impl WeightedSignal {
    /// `values` must be `dim × grid.len()`.
    pub fn new(grid: TimeGrid, values: DMatrix<f64>, rho: f64) -> Result<Self> {
        ensure!(rho.is_finite() && rho > 0.0, "weight rho must be positive, got {rho}");
        ensure!(values.nrows() >= 1, "state dimension must be positive");
        ensure!(
            values.ncols() == grid.len(),
            "signal has {} nodes, grid has {}",
            values.ncols(),
            grid.len()
        );
        Ok(Self { grid, values, rho })
    }

    pub fn zeros(grid: TimeGrid, dim: usize, rho: f64) -> Result<Self> {
        ensure!(dim >= 1, "state dimension must be positive");
        Self::new(grid, DMatrix::zeros(dim, grid.len()), rho)
    }

    /// Samples `f(t_k)` at every node.
    pub fn from_fn<F>(grid: TimeGrid, dim: usize, rho: f64, mut f: F) -> Result<Self>
    where
        F: FnMut(f64) -> DVector<f64>,
    {
        let mut values = DMatrix::zeros(dim, grid.len());
        for k in 0..grid.len() {
            let x = f(grid.time(k));
            ensure!(x.len() == dim, "sample at node {k} has length {}, expected {dim}", x.len());
            values.set_column(k, &x);
        }
        Self::new(grid, values, rho)
    }

    /// Scalar signal `f(t_k)`.
    pub fn scalar<F>(grid: TimeGrid, rho: f64, mut f: F) -> Result<Self>
    where
        F: FnMut(f64) -> f64,
    {
        Self::from_fn(grid, 1, rho, |t| DVector::from_element(1, f(t)))
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn len(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut DMatrix<f64> {
        &mut self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    pub fn node(&self, k: usize) -> DVectorView<'_, f64> {
        self.values.column(k)
    }

    pub fn set_node(&mut self, k: usize, x: &DVector<f64>) {
        self.values.set_column(k, x);
    }

    /// Same values, different weight.
    pub fn with_rho(&self, rho: f64) -> Result<Self> {
        Self::new(self.grid, self.values.clone(), rho)
    }

    /// Same grid and weight, new values.
    pub fn with_values(&self, values: DMatrix<f64>) -> Result<Self> {
        Self::new(self.grid, values, self.rho)
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        ensure!(self.grid == other.grid, "signals live on different grids");
        ensure!(
            self.dim() == other.dim(),
            "state dimensions differ: {} vs {}",
            self.dim(),
            other.dim()
        );
        ensure!(self.rho == other.rho, "weights differ: {} vs {}", self.rho, other.rho);
        Ok(())
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        self.with_values(&self.values + &other.values)
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        self.with_values(&self.values - &other.values)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            grid: self.grid,
            values: &self.values * s,
            rho: self.rho,
        }
    }

    /// Largest node-wise Euclidean distance to `other`.
    pub fn sup_distance(&self, other: &Self) -> Result<f64> {
        self.check_compatible(other)?;
        Ok((0..self.len())
            .map(|k| (self.node(k) - other.node(k)).norm())
            .fold(0.0, f64::max))
    }

    /// Largest node-wise Euclidean norm.
    pub fn sup_norm(&self) -> f64 {
        (0..self.len()).map(|k| self.node(k).norm()).fold(0.0, f64::max)
    }

    /// Serializes as `t,x0,...,x{dim-1}` with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for i in 0..self.dim() {
            out.push_str(&format!(",x{i}"));
        }
        out.push('\n');
        for k in 0..self.len() {
            out.push_str(&format_full(self.grid.time(k)));
            for i in 0..self.dim() {
                out.push(',');
                out.push_str(&format_full(self.values[(i, k)]));
            }
            out.push('\n');
        }
        out
    }

    /// Parses the CSV layout written by [`WeightedSignal::to_csv`]. The grid is
    /// recovered from the time column, which must be uniform.
    pub fn from_csv(text: &str, rho: f64) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty signal file".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.first() != Some(&"t") || cols.len() < 2 {
            return Err(Error::Parse(format!("bad signal header `{header}`")));
        }
        for (i, c) in cols[1..].iter().enumerate() {
            if *c != format!("x{i}") {
                return Err(Error::Parse(format!("bad column name `{c}`, expected x{i}")));
            }
        }
        let dim = cols.len() - 1;
        let mut times = Vec::new();
        let mut data = Vec::new();
        for (row, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != dim + 1 {
                return Err(Error::Parse(format!("row {row}: expected {} fields", dim + 1)));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {row}: `{s}`: {e}")))
            };
            times.push(parse(fields[0])?);
            for f in &fields[1..] {
                data.push(parse(f)?);
            }
        }
        if times.len() < 2 {
            return Err(Error::Parse("signal needs at least two rows".into()));
        }
        let t0 = times[0];
        let dt = (times[times.len() - 1] - t0) / (times.len() - 1) as f64;
        for (k, t) in times.iter().enumerate() {
            if (t - (t0 + k as f64 * dt)).abs() > 1e-9 * dt.max(t.abs()) {
                return Err(Error::Parse(format!("time column is not uniform at row {k}")));
            }
        }
        let grid = TimeGrid::new(t0, dt, times.len())?;
        Self::new(grid, DMatrix::from_column_slice(dim, times.len(), &data), rho)
    }
}

pub(crate) fn format_full(x: f64) -> String {
    format!("{x:.16e}")
}

/// `Σ_k ⟨u_k, v_k⟩ e^{-2ρ t_k} dt`.
pub fn weighted_inner(u: &WeightedSignal, v: &WeightedSignal) -> Result<f64> {
    u.check_compatible(v)?;
    let g = u.grid();
    let sum: f64 = (0..u.len())
        .map(|k| u.node(k).dot(&v.node(k)) * g.weight(k, u.rho))
        .sum();
    Ok(sum * g.dt())
}

pub fn weighted_norm(u: &WeightedSignal) -> f64 {
    let g = u.grid();
    let sum: f64 = (0..u.len())
        .map(|k| u.node(k).norm_squared() * g.weight(k, u.rho))
        .sum();
    (sum * g.dt()).sqrt()
}

/// Multiplication by the indicator of `]-∞, a]` (past) or `[a, ∞[` (future).
pub fn cutoff(u: &WeightedSignal, a: f64, side: Side) -> WeightedSignal {
    let mut out = u.clone();
    for k in 0..u.len() {
        let t = u.grid.time(k);
        let drop = match side {
            Side::Past => t > a,
            Side::Future => t < a,
        };
        if drop {
            out.values.column_mut(k).fill(0.0);
        }
    }
    out
}
