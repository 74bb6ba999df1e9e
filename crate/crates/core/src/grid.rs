//! Structured grids, node-valued fields and seeded random fields.
//!
//! Every field is stored flat and row-major with `x` running fastest, so node
//! `(i, j)` lives at index `j * nx + i`. The second axis is either a second
//! spatial direction (`Spatial2D`) or time treated as a spatial coordinate
//! (`SpaceTime1Dp1`).

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GridKind {
    /// Unit square, Dirichlet data on all four edges.
    Spatial2D,
    /// One space dimension plus time as the second axis. Initial data on the
    /// bottom row and Dirichlet data on the two lateral columns; the top row
    /// is free.
    SpaceTime1Dp1,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    kind: GridKind,
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
    y_extent: f64,
    boundary_mask: Vec<bool>,
}

impl GridSpec {
    pub fn new(kind: GridKind, nx: usize, ny: usize, y_extent: f64) -> Result<Self> {
        if nx < 3 || ny < 3 {
            return Err(Error::InvalidGrid(format!(
                "need at least 3 nodes per axis, got {nx}x{ny}"
            )));
        }
        if !(y_extent > 0.0) || !y_extent.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "y extent must be positive and finite, got {y_extent}"
            )));
        }
        let hx = 1.0 / (nx - 1) as f64;
        let hy = y_extent / (ny - 1) as f64;
        let mut boundary_mask = vec![false; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let lateral = i == 0 || i == nx - 1;
                boundary_mask[j * nx + i] = match kind {
                    GridKind::Spatial2D => lateral || j == 0 || j == ny - 1,
                    GridKind::SpaceTime1Dp1 => lateral || j == 0,
                };
            }
        }
        Ok(Self {
            kind,
            nx,
            ny,
            hx,
            hy,
            y_extent,
            boundary_mask,
        })
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn hx(&self) -> f64 {
        self.hx
    }

    pub fn hy(&self) -> f64 {
        self.hy
    }

    pub fn y_extent(&self) -> f64 {
        self.y_extent
    }

    /// Total node count `nx * ny`.
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nx && j < self.ny);
        j * self.nx + i
    }

    #[inline]
    pub fn node(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    /// Physical coordinates of node `(i, j)`.
    #[inline]
    pub fn coords(&self, i: usize, j: usize) -> (f64, f64) {
        (
            i as f64 / (self.nx - 1) as f64,
            j as f64 / (self.ny - 1) as f64 * self.y_extent,
        )
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary_mask
    }

    pub fn is_boundary(&self, k: usize) -> bool {
        self.boundary_mask[k]
    }

    pub fn boundary_count(&self) -> usize {
        self.boundary_mask.iter().filter(|&&b| b).count()
    }

    pub fn interior_count(&self) -> usize {
        self.len() - self.boundary_count()
    }
}

/// Shorthand for [`GridSpec::new`].
pub fn make_grid(kind: GridKind, nx: usize, ny: usize, y_extent: f64) -> Result<Arc<GridSpec>> {
    GridSpec::new(kind, nx, ny, y_extent).map(Arc::new)
}

/// Node values over a grid.
#[derive(Debug, Clone)]
pub struct Field {
    grid: Arc<GridSpec>,
    values: Vec<f64>,
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        same_grid(&self.grid, &other.grid) && self.values == other.values
    }
}

pub(crate) fn same_grid(a: &Arc<GridSpec>, b: &Arc<GridSpec>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

impl Field {
    pub fn zeros(grid: &Arc<GridSpec>) -> Self {
        Self {
            grid: Arc::clone(grid),
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_values(grid: &Arc<GridSpec>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self {
            grid: Arc::clone(grid),
            values,
        })
    }

    /// Samples `f(x, y)` at every node.
    pub fn from_fn(grid: &Arc<GridSpec>, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                let (x, y) = grid.coords(i, j);
                values.push(f(x, y));
            }
        }
        Self {
            grid: Arc::clone(grid),
            values,
        }
    }

    pub fn grid(&self) -> &Arc<GridSpec> {
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

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn ensure_same_grid(&self, other: &Field) -> Result<()> {
        if same_grid(&self.grid, &other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{}x{} vs {}x{}",
                self.grid.nx(),
                self.grid.ny(),
                other.grid.nx(),
                other.grid.ny()
            )))
        }
    }

    pub fn norm(&self) -> f64 {
        norm(&self.values)
    }

    pub fn dot(&self, other: &Field) -> f64 {
        dot(&self.values, &other.values)
    }

    /// CSV text: a header `i0,i1,...`, then one line per row `j` (starting at
    /// `j = 0`) with values along `x` at 17 significant digits.
    pub fn to_csv_string(&self) -> String {
        let nx = self.grid.nx();
        let mut out = String::with_capacity(self.values.len() * 25);
        let header: Vec<String> = (0..nx).map(|i| format!("i{i}")).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for row in self.values.chunks(nx) {
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write!(out, "{v:.16e}").expect("writing to a String cannot fail");
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> io::Result<()> {
        let mut file = io::BufWriter::new(std::fs::File::create(path)?);
        file.write_all(self.to_csv_string().as_bytes())?;
        file.flush()
    }

    pub fn from_csv_str(grid: &Arc<GridSpec>, text: &str) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len());
        let mut lines = text.lines().filter(|l| !l.trim().is_empty()).peekable();
        if lines.peek().is_some_and(|l| l.trim_start().starts_with('i')) {
            lines.next();
        }
        for (line_no, line) in lines.enumerate() {
            let before = values.len();
            for cell in line.split(',') {
                let v: f64 = cell.trim().parse().map_err(|_| {
                    Error::Config(format!("line {}: cannot parse {cell:?}", line_no + 1))
                })?;
                values.push(v);
            }
            if values.len() - before != grid.nx() {
                return Err(Error::GridMismatch(format!(
                    "line {} has {} values, expected {}",
                    line_no + 1,
                    values.len() - before,
                    grid.nx()
                )));
            }
        }
        Self::from_values(grid, values)
    }

    pub fn to_envelope(&self) -> FieldEnvelope {
        FieldEnvelope {
            nx: self.grid.nx(),
            ny: self.grid.ny(),
            hx: self.grid.hx(),
            hy: self.grid.hy(),
            values: self.values.clone(),
        }
    }
}

/// JSON form of a field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldEnvelope {
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
    pub values: Vec<f64>,
}

impl FieldEnvelope {
    pub fn into_field(self, grid: &Arc<GridSpec>) -> Result<Field> {
        if self.nx != grid.nx() || self.ny != grid.ny() {
            return Err(Error::GridMismatch(format!(
                "envelope is {}x{}, grid is {}x{}",
                self.nx,
                self.ny,
                grid.nx(),
                grid.ny()
            )));
        }
        Field::from_values(grid, self.values)
    }
}

/// I.i.d. normal samples with standard deviation `sigma`, drawn from a
/// ChaCha8 stream seeded with `seed`.
pub fn random_field(grid: &Arc<GridSpec>, sigma: f64, seed: u64) -> Result<Field> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "sigma must be finite and non-negative, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(Field::zeros(grid));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..grid.len())
        .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Field::from_values(grid, values)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Independent partial sums let the loop vectorize.
    let mut acc = [0.0; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (xa, xb) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += xa[l] * xb[l];
        }
    }
    acc.iter().sum::<f64>() + tail
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
