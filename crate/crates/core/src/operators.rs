//! Matrix-free discrete differential operators.
//!
//! Every operator is applied as a stencil and never assembled. Rows of an
//! operator exist only at the nodes where the discrete equation is posed:
//! interior nodes for the 2D Laplacian, and nodes with `j >= 1` and
//! `1 <= i <= nx - 2` for the space-time operators. All other output entries
//! are zero. Adjoints are the exact transposes of those stencils in scatter
//! form, so they may write into constrained nodes.
//!
//! The time derivative on space-time grids is a backward difference: the
//! two-step second-order formula `(3u_j - 4u_{j-1} + u_{j-2}) / (2 hy)` for
//! `j >= 2`, and the one-step formula `(u_1 - u_0) / hy` on the first row.
//! Both are exact on fields linear in `y`, and the operator stays
//! lower-triangular in time.

use std::cell::RefCell;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{same_grid, Field, GridKind, GridSpec};

/// A linear map on fields over one grid, together with its adjoint under the
/// plain (unweighted) ℓ2 inner product.
pub trait LinearOperator {
    fn grid(&self) -> &Arc<GridSpec>;

    /// Writes `A x` into `out`. `out` is fully overwritten.
    fn apply_into(&self, x: &[f64], out: &mut [f64]);

    /// Writes `A^T x` into `out`. `out` is fully overwritten.
    fn apply_adjoint_into(&self, x: &[f64], out: &mut [f64]);

    fn apply(&self, u: &Field) -> Result<Field> {
        check_grid(self.grid(), u)?;
        let mut out = Field::zeros(self.grid());
        self.apply_into(u.values(), out.values_mut());
        Ok(out)
    }

    fn apply_adjoint(&self, u: &Field) -> Result<Field> {
        check_grid(self.grid(), u)?;
        let mut out = Field::zeros(self.grid());
        self.apply_adjoint_into(u.values(), out.values_mut());
        Ok(out)
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn grid(&self) -> &Arc<GridSpec> {
        (**self).grid()
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        (**self).apply_into(x, out)
    }

    fn apply_adjoint_into(&self, x: &[f64], out: &mut [f64]) {
        (**self).apply_adjoint_into(x, out)
    }
}

pub(crate) fn check_grid(grid: &Arc<GridSpec>, u: &Field) -> Result<()> {
    if same_grid(grid, u.grid()) {
        Ok(())
    } else {
        Err(Error::GridMismatch(format!(
            "operator grid is {}x{}, field grid is {}x{}",
            grid.nx(),
            grid.ny(),
            u.grid().nx(),
            u.grid().ny()
        )))
    }
}

fn require_kind(grid: &GridSpec, kind: GridKind, what: &str) -> Result<()> {
    if grid.kind() == kind {
        Ok(())
    } else {
        Err(Error::InvalidGrid(format!(
            "{what} needs a {kind:?} grid, got {:?}",
            grid.kind()
        )))
    }
}

// ---------------------------------------------------------------------------
// Five-point Laplacian

/// Five-point Laplacian on a square-spaced 2D grid, posed at interior nodes.
///
/// On fields that vanish on the boundary the operator is symmetric; the
/// adjoint below is the full transpose, which also spreads interior values
/// onto boundary neighbours.
#[derive(Debug, Clone)]
pub struct Laplacian2d {
    grid: Arc<GridSpec>,
    inv_h2: f64,
}

impl Laplacian2d {
    pub fn new(grid: &Arc<GridSpec>) -> Result<Self> {
        require_kind(grid, GridKind::Spatial2D, "the 2D Laplacian")?;
        let (hx, hy) = (grid.hx(), grid.hy());
        if (hx - hy).abs() > 1e-14 * hx.max(hy) {
            return Err(Error::InvalidGrid(format!(
                "the 2D Laplacian needs hx == hy, got {hx} and {hy}"
            )));
        }
        Ok(Self {
            grid: Arc::clone(grid),
            inv_h2: 1.0 / (hx * hx),
        })
    }
}

pub fn laplacian_2d(grid: &Arc<GridSpec>) -> Result<Laplacian2d> {
    Laplacian2d::new(grid)
}

#[inline]
fn row(x: &[f64], nx: usize, j: usize) -> &[f64] {
    &x[j * nx..][..nx]
}

impl LinearOperator for Laplacian2d {
    fn grid(&self) -> &Arc<GridSpec> {
        &self.grid
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let c = self.inv_h2;
        out[..nx].fill(0.0);
        out[(ny - 1) * nx..].fill(0.0);
        for j in 1..ny - 1 {
            let (down, mid, up) = (row(x, nx, j - 1), row(x, nx, j), row(x, nx, j + 1));
            let o = &mut out[j * nx..][..nx];
            o[0] = 0.0;
            o[nx - 1] = 0.0;
            five_point(c, down, mid, up, o);
        }
    }

    fn apply_adjoint_into(&self, w: &[f64], out: &mut [f64]) {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let c = self.inv_h2;
        // Only interior rows and columns of `w` carry equations; everything
        // else is read as zero.
        let zero = vec![0.0; nx];
        let eq_row = |j: usize| if j >= 1 && j + 2 <= ny { row(w, nx, j) } else { &zero[..] };
        for j in 0..ny {
            let mid = eq_row(j);
            let down = if j >= 1 { eq_row(j - 1) } else { &zero[..] };
            let up = eq_row(j + 1);
            let o = &mut out[j * nx..][..nx];
            vertical(c, -4.0 * c, down, mid, up, o);
            horizontal(c, c, mid, o);
        }
    }
}

/// `o[i] = c_v (down[i] + up[i]) + c_m mid[i]` on positions `1..nx-1`; the
/// two end positions are zeroed.
#[inline]
fn vertical(c_v: f64, c_m: f64, down: &[f64], mid: &[f64], up: &[f64], o: &mut [f64]) {
    let n = mid.len() - 2;
    o[0] = 0.0;
    o[n + 1] = 0.0;
    let (o, down, mid, up) = (&mut o[1..=n], &down[1..=n], &mid[1..=n], &up[1..=n]);
    for i in 0..n {
        o[i] = c_v * (down[i] + up[i]) + c_m * mid[i];
    }
}

/// Adds the transpose of a row stencil `x -> c_r x[i+1] + c_l x[i-1]` posed at
/// positions `1..nx-1`, applied to `q` restricted to those positions.
#[inline]
fn horizontal(c_l: f64, c_r: f64, q: &[f64], o: &mut [f64]) {
    let n = q.len() - 2;
    // Position m receives c_r q[m-1] (from equation m-1) and c_l q[m+1].
    let (src, dst) = (&q[1..=n], &mut o[2..]);
    for i in 0..n {
        dst[i] += c_r * src[i];
    }
    let dst = &mut o[..n];
    for i in 0..n {
        dst[i] += c_l * src[i];
    }
}

/// Five-point stencil on positions `1..nx-1` of one row.
#[inline]
fn five_point(c: f64, down: &[f64], mid: &[f64], up: &[f64], o: &mut [f64]) {
    let n = mid.len() - 2;
    let (o, down, up) = (&mut o[1..=n], &down[1..=n], &up[1..=n]);
    let (left, centre, right) = (&mid[..n], &mid[1..=n], &mid[2..]);
    for i in 0..n {
        o[i] = c * (left[i] + right[i] + down[i] + up[i] - 4.0 * centre[i]);
    }
}

// ---------------------------------------------------------------------------
// Space-time stencils
//
// One fused kernel covers every space-time operator:
//
//     out = D_y x + k_xx * D_xx-stencil(x) + [dxu * x + u * D_x x]
//
// where the bracket is present only for linearized advection. With `dxu = 0`
// and `u = x` it evaluates the nonlinear Burgers operator.

#[derive(Debug, Clone, Copy)]
struct SpaceTimeShape {
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
}

/// Linearized advection data: the frozen field and its `D_x` derivative.
#[derive(Clone, Copy)]
struct Advection<'a> {
    u: &'a [f64],
    dxu: Option<&'a [f64]>,
}

impl SpaceTimeShape {
    fn of(grid: &GridSpec) -> Self {
        Self {
            nx: grid.nx(),
            ny: grid.ny(),
            hx: grid.hx(),
            hy: grid.hy(),
        }
    }

    /// Time-derivative weights of the equation on row `j >= 1`:
    /// `(own row, one row back, two rows back)`.
    #[inline]
    fn dy_weights(&self, j: usize) -> (f64, f64, f64) {
        let inv = 1.0 / self.hy;
        if j == 1 {
            (inv, -inv, 0.0)
        } else {
            (1.5 * inv, -2.0 * inv, 0.5 * inv)
        }
    }

    /// `D_x x` at defined nodes, zero elsewhere.
    fn dx(&self, x: &[f64]) -> Vec<f64> {
        let nx = self.nx;
        let kx = 0.5 / self.hx;
        let mut out = vec![0.0; x.len()];
        for j in 1..self.ny {
            let cur = row(x, nx, j);
            let o = &mut out[j * nx..][..nx];
            for (i, oi) in o.iter_mut().enumerate().take(nx - 1).skip(1) {
                *oi = kx * (cur[i + 1] - cur[i - 1]);
            }
        }
        out
    }

    fn forward(&self, x: &[f64], out: &mut [f64], kxx: f64, adv: Option<Advection<'_>>) {
        let nx = self.nx;
        let cxx = kxx / (self.hx * self.hx);
        let kx = 0.5 / self.hx;
        out[..nx].fill(0.0);
        for j in 1..self.ny {
            let (a, b, c) = self.dy_weights(j);
            let cur = row(x, nx, j);
            let p1 = row(x, nx, j - 1);
            let p2 = if j >= 2 { row(x, nx, j - 2) } else { p1 };
            let o = &mut out[j * nx..][..nx];
            o[0] = 0.0;
            o[nx - 1] = 0.0;
            for i in 1..nx - 1 {
                o[i] = a * cur[i]
                    + b * p1[i]
                    + c * p2[i]
                    + cxx * (cur[i + 1] - 2.0 * cur[i] + cur[i - 1]);
            }
            if let Some(adv) = adv {
                let u = row(adv.u, nx, j);
                match adv.dxu {
                    Some(dxu) => {
                        let d = row(dxu, nx, j);
                        for i in 1..nx - 1 {
                            o[i] += d[i] * cur[i] + u[i] * kx * (cur[i + 1] - cur[i - 1]);
                        }
                    }
                    None => {
                        for i in 1..nx - 1 {
                            o[i] += u[i] * kx * (cur[i + 1] - cur[i - 1]);
                        }
                    }
                }
            }
        }
    }

    fn adjoint(&self, w: &[f64], out: &mut [f64], kxx: f64, adv: Option<(&[f64], &[f64])>) {
        let (nx, ny) = (self.nx, self.ny);
        let cxx = kxx / (self.hx * self.hx);
        let kx = 0.5 / self.hx;
        // Equations live on rows `j >= 1`; their end columns are masked below.
        let zero = vec![0.0; nx];
        let eq_row = |j: usize| if j >= 1 && j < ny { row(w, nx, j) } else { &zero[..] };
        let mut q = vec![0.0; nx];
        for j in 0..ny {
            // Row j is read by its own equation and by the equations one and
            // two rows later.
            let a = if j >= 1 { self.dy_weights(j).0 } else { 0.0 };
            let b = if j + 1 < ny { self.dy_weights(j + 1).1 } else { 0.0 };
            let c = if j + 2 < ny { self.dy_weights(j + 2).2 } else { 0.0 };
            let (cur, n1, n2) = (eq_row(j), eq_row(j + 1), eq_row(j + 2));
            let o = &mut out[j * nx..][..nx];
            o[0] = 0.0;
            o[nx - 1] = 0.0;
            {
                let m = nx - 2;
                let (o, cur, n1, n2) = (&mut o[1..=m], &cur[1..=m], &n1[1..=m], &n2[1..=m]);
                for i in 0..m {
                    o[i] = (a - 2.0 * cxx) * cur[i] + b * n1[i] + c * n2[i];
                }
            }
            horizontal(cxx, cxx, cur, o);
            if let Some((u, dxu)) = adv {
                if j == 0 {
                    continue;
                }
                let (u, d) = (row(u, nx, j), row(dxu, nx, j));
                let m = nx - 2;
                {
                    let (q, u, cur) = (&mut q[1..=m], &u[1..=m], &cur[1..=m]);
                    for i in 0..m {
                        q[i] = u[i] * cur[i];
                    }
                }
                {
                    let (o, d, cur) = (&mut o[1..=m], &d[1..=m], &cur[1..=m]);
                    for i in 0..m {
                        o[i] += d[i] * cur[i];
                    }
                }
                horizontal(-kx, kx, &q, o);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Heat

/// Space-time heat operator `D_y - alpha D_xx`.
#[derive(Debug, Clone)]
pub struct HeatOperator {
    grid: Arc<GridSpec>,
    shape: SpaceTimeShape,
    alpha: f64,
}

impl HeatOperator {
    pub fn new(grid: &Arc<GridSpec>, alpha: f64) -> Result<Self> {
        require_kind(grid, GridKind::SpaceTime1Dp1, "the heat operator")?;
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "diffusivity must be positive, got {alpha}"
            )));
        }
        Ok(Self {
            grid: Arc::clone(grid),
            shape: SpaceTimeShape::of(grid),
            alpha,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

pub fn heat_operator(grid: &Arc<GridSpec>, alpha: f64) -> Result<HeatOperator> {
    HeatOperator::new(grid, alpha)
}

impl LinearOperator for HeatOperator {
    fn grid(&self) -> &Arc<GridSpec> {
        &self.grid
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        self.shape.forward(x, out, -self.alpha, None);
    }

    fn apply_adjoint_into(&self, w: &[f64], out: &mut [f64]) {
        self.shape
            .adjoint(w, out, -self.alpha, None);
    }
}

// ---------------------------------------------------------------------------
// Burgers

/// Space-time viscous Burgers operator `D_y u + u (D_x u) - nu D_xx u`.
#[derive(Debug, Clone)]
pub struct BurgersOperator {
    grid: Arc<GridSpec>,
    shape: SpaceTimeShape,
    nu: f64,
}

impl BurgersOperator {
    pub fn new(grid: &Arc<GridSpec>, nu: f64) -> Result<Self> {
        require_kind(grid, GridKind::SpaceTime1Dp1, "the Burgers operator")?;
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "viscosity must be positive, got {nu}"
            )));
        }
        Ok(Self {
            grid: Arc::clone(grid),
            shape: SpaceTimeShape::of(grid),
            nu,
        })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn grid(&self) -> &Arc<GridSpec> {
        &self.grid
    }

    pub fn apply_f_into(&self, u: &[f64], out: &mut [f64]) {
        let adv = Advection { u, dxu: None };
        self.shape.forward(u, out, -self.nu, Some(adv));
    }

    /// The nonlinear residual operator `F(u)`.
    pub fn apply_f(&self, u: &Field) -> Result<Field> {
        check_grid(&self.grid, u)?;
        let mut out = Field::zeros(&self.grid);
        self.apply_f_into(u.values(), out.values_mut());
        Ok(out)
    }

    /// Freezes the Jacobian at `u`.
    pub fn jacobian_at(&self, u: &Field) -> Result<BurgersJacobian> {
        check_grid(&self.grid, u)?;
        Ok(self.jacobian_at_values(u.values()))
    }

    pub(crate) fn jacobian_at_values(&self, u: &[f64]) -> BurgersJacobian {
        BurgersJacobian {
            grid: Arc::clone(&self.grid),
            shape: self.shape,
            nu: self.nu,
            u: u.to_vec(),
            dxu: self.shape.dx(u),
        }
    }

    /// `J(u) v`.
    pub fn apply_j(&self, u: &Field, v: &Field) -> Result<Field> {
        self.jacobian_at(u)?.apply(v)
    }

    /// `J(u)^T v`.
    pub fn apply_jt(&self, u: &Field, v: &Field) -> Result<Field> {
        self.jacobian_at(u)?.apply_adjoint(v)
    }
}

pub fn burgers_operator(grid: &Arc<GridSpec>, nu: f64) -> Result<BurgersOperator> {
    BurgersOperator::new(grid, nu)
}

/// The Burgers Jacobian
/// `J(u) v = D_y v + (D_x u) v + u (D_x v) - nu D_xx v`
/// frozen at a linearization point.
#[derive(Debug, Clone)]
pub struct BurgersJacobian {
    grid: Arc<GridSpec>,
    shape: SpaceTimeShape,
    nu: f64,
    u: Vec<f64>,
    dxu: Vec<f64>,
}

impl BurgersJacobian {
    pub fn linearization_point(&self) -> &[f64] {
        &self.u
    }
}

impl LinearOperator for BurgersJacobian {
    fn grid(&self) -> &Arc<GridSpec> {
        &self.grid
    }

    fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        let adv = Advection {
            u: &self.u,
            dxu: Some(&self.dxu),
        };
        self.shape.forward(v, out, -self.nu, Some(adv));
    }

    fn apply_adjoint_into(&self, w: &[f64], out: &mut [f64]) {
        self.shape.adjoint(
            w,
            out,
            -self.nu,
            Some((&self.u, &self.dxu)),
        );
    }
}

// ---------------------------------------------------------------------------
// Normal operator

/// `v -> v + dtau * A^T A v`, optionally restricted to a subset of free nodes.
///
/// With a restriction mask the operator is `P (I + dtau A^T A) P + (I - P)`
/// where `P` zeroes the constrained nodes, which keeps it symmetric positive
/// definite on the whole space and leaves constrained entries untouched.
#[derive(Debug)]
pub struct NormalOperator<O> {
    op: O,
    dtau: f64,
    /// 0.0 at constrained nodes, 1.0 elsewhere.
    free: Option<Vec<f64>>,
    scratch: RefCell<(Vec<f64>, Vec<f64>)>,
}

impl<O: LinearOperator> NormalOperator<O> {
    pub fn new(op: O, dtau: f64) -> Result<Self> {
        if !(dtau > 0.0) || !dtau.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "pseudo-time step must be positive, got {dtau}"
            )));
        }
        let n = op.grid().len();
        Ok(Self {
            op,
            dtau,
            free: None,
            scratch: RefCell::new((vec![0.0; n], vec![0.0; n])),
        })
    }

    /// Holds the nodes where `mask` is true fixed.
    pub fn restricted(mut self, mask: &[bool]) -> Self {
        self.free = Some(mask.iter().map(|&m| if m { 0.0 } else { 1.0 }).collect());
        self
    }

    pub fn inner(&self) -> &O {
        &self.op
    }

    pub fn dtau(&self) -> f64 {
        self.dtau
    }
}

pub fn normal_operator<O: LinearOperator>(op: O, dtau: f64) -> Result<NormalOperator<O>> {
    NormalOperator::new(op, dtau)
}

impl<O: LinearOperator> LinearOperator for NormalOperator<O> {
    fn grid(&self) -> &Arc<GridSpec> {
        self.op.grid()
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let mut guard = self.scratch.borrow_mut();
        let (px, ax) = &mut *guard;
        let dtau = self.dtau;
        match &self.free {
            None => {
                self.op.apply_into(x, ax);
                self.op.apply_adjoint_into(ax, out);
                for (o, &xi) in out.iter_mut().zip(x) {
                    *o = xi + dtau * *o;
                }
            }
            Some(free) => {
                for ((p, &xi), &f) in px.iter_mut().zip(x).zip(free) {
                    *p = f * xi;
                }
                self.op.apply_into(px, ax);
                self.op.apply_adjoint_into(ax, out);
                for ((o, &xi), &f) in out.iter_mut().zip(x).zip(free) {
                    *o = xi + f * dtau * *o;
                }
            }
        }
    }

    fn apply_adjoint_into(&self, x: &[f64], out: &mut [f64]) {
        self.apply_into(x, out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, random_field};

    fn spatial(n: usize) -> Arc<GridSpec> {
        make_grid(GridKind::Spatial2D, n, n, 1.0).unwrap()
    }

    fn space_time(n: usize) -> Arc<GridSpec> {
        make_grid(GridKind::SpaceTime1Dp1, n, n, 1.0).unwrap()
    }

    fn interior_max(grid: &GridSpec, f: &Field, skip: impl Fn(usize, usize) -> bool) -> f64 {
        let mut m: f64 = 0.0;
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                if !skip(i, j) {
                    m = m.max(f.at(i, j).abs());
                }
            }
        }
        m
    }

    #[test]
    fn laplacian_kills_constants() {
        let g = spatial(9);
        let u = Field::from_fn(&g, |_, _| 3.7);
        let out = laplacian_2d(&g).unwrap().apply(&u).unwrap();
        assert!(out.values().iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn laplacian_exact_on_quadratics() {
        let g = spatial(11);
        let u = Field::from_fn(&g, |x, y| x * x + y * y);
        let out = laplacian_2d(&g).unwrap().apply(&u).unwrap();
        for j in 0..11 {
            for i in 0..11 {
                let expect = if i == 0 || j == 0 || i == 10 || j == 10 { 0.0 } else { 4.0 };
                assert!((out.at(i, j) - expect).abs() < 1e-10, "({i},{j}) {}", out.at(i, j));
            }
        }
    }

    #[test]
    fn laplacian_second_order_on_sine_mode() {
        // Taylor remainder of the 5-point stencil on sin(pi x) sin(pi y) is
        // bounded by 2 * (h^2 / 12) * pi^4 * max|u|.
        let pi = std::f64::consts::PI;
        let g = spatial(64);
        let h = g.hx();
        let u = Field::from_fn(&g, |x, y| (pi * x).sin() * (pi * y).sin());
        let lap = laplacian_2d(&g).unwrap().apply(&u).unwrap();
        let mut max_err: f64 = 0.0;
        for j in 1..63 {
            for i in 1..63 {
                max_err = max_err.max((lap.at(i, j) + 2.0 * pi * pi * u.at(i, j)).abs());
            }
        }
        let bound = 2.0 * pi.powi(4) / 12.0 * h * h;
        assert!(max_err <= bound, "{max_err} > {bound}");
        assert!(max_err >= 0.5 * bound, "{max_err} unexpectedly small vs {bound}");
    }

    #[test]
    fn laplacian_rejects_unequal_spacing_and_space_time() {
        let g = make_grid(GridKind::Spatial2D, 9, 5, 1.0).unwrap();
        assert!(laplacian_2d(&g).is_err());
        assert!(laplacian_2d(&space_time(5)).is_err());
    }

    #[test]
    fn heat_kills_constants_and_differentiates_linear_time() {
        let g = space_time(12);
        let op = heat_operator(&g, 0.3).unwrap();
        let c = op.apply(&Field::from_fn(&g, |_, _| -2.0)).unwrap();
        assert!(c.values().iter().all(|v| v.abs() < 1e-10));
        let lin = op.apply(&Field::from_fn(&g, |_, y| y)).unwrap();
        for j in 0..12 {
            for i in 0..12 {
                let defined = j >= 1 && (1..11).contains(&i);
                let expect = if defined { 1.0 } else { 0.0 };
                assert!((lin.at(i, j) - expect).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn heat_rejects_bad_input() {
        assert!(heat_operator(&spatial(5), 0.1).is_err());
        assert!(heat_operator(&space_time(5), 0.0).is_err());
        assert!(heat_operator(&space_time(5), -1.0).is_err());
    }

    #[test]
    fn burgers_trivial_fields() {
        let g = space_time(10);
        let op = burgers_operator(&g, 0.05).unwrap();
        let zero = op.apply_f(&Field::zeros(&g)).unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));
        let c = op.apply_f(&Field::from_fn(&g, |_, _| 0.8)).unwrap();
        assert!(interior_max(&g, &c, |_, _| false) < 1e-10);
        assert!(burgers_operator(&g, 0.0).is_err());
        assert!(burgers_operator(&spatial(5), 0.1).is_err());
    }

    #[test]
    fn adjoints_on_random_pairs() {
        let g2 = spatial(16);
        let gst = space_time(16);
        let lap = laplacian_2d(&g2).unwrap();
        let heat = heat_operator(&gst, 0.1).unwrap();
        let burgers = burgers_operator(&gst, 0.05).unwrap();
        let jac = burgers
            .jacobian_at(&random_field(&gst, 1.0, 3).unwrap())
            .unwrap();
        let check = |op: &dyn LinearOperator, g: &Arc<GridSpec>| {
            for s in 0..5 {
                let v = random_field(g, 1.0, 100 + s).unwrap();
                let w = random_field(g, 1.0, 200 + s).unwrap();
                let av = op.apply(&v).unwrap();
                let atw = op.apply_adjoint(&w).unwrap();
                let gap = (av.dot(&w) - v.dot(&atw)).abs();
                assert!(gap <= 1e-12 * av.norm() * w.norm(), "gap {gap}");
            }
        };
        check(&lap, &g2);
        check(&heat, &gst);
        check(&jac, &gst);
    }

    #[test]
    fn normal_operator_basics() {
        let g = spatial(8);
        let lap = laplacian_2d(&g).unwrap();
        assert!(normal_operator(&lap, 0.0).is_err());
        let m = normal_operator(&lap, 0.5).unwrap();
        let c = Field::from_fn(&g, |_, _| 1.25);
        // The constant is only in the kernel at interior rows; the adjoint
        // spreads nothing because every row output is zero.
        let out = m.apply(&c).unwrap();
        for (a, b) in out.values().iter().zip(c.values()) {
            assert!((a - b).abs() < 1e-9);
        }
        for s in 0..100 {
            let v = random_field(&g, 1.0, s).unwrap();
            let mv = m.apply(&v).unwrap();
            let lv = lap.apply(&v).unwrap();
            let lhs = v.dot(&mv) - v.dot(&v);
            let rhs = 0.5 * lv.dot(&lv);
            assert!((lhs - rhs).abs() <= 1e-10 * rhs.max(1.0));
            assert!(lhs >= 0.0);
        }
    }

    #[test]
    fn restricted_normal_operator_is_identity_on_constrained_nodes() {
        let g = space_time(7);
        let heat = heat_operator(&g, 0.2).unwrap();
        let m = normal_operator(&heat, 1.0)
            .unwrap()
            .restricted(g.boundary_mask());
        let v = random_field(&g, 1.0, 4).unwrap();
        let w = random_field(&g, 1.0, 5).unwrap();
        let mv = m.apply(&v).unwrap();
        for k in 0..g.len() {
            if g.is_boundary(k) {
                assert_eq!(mv.values()[k], v.values()[k]);
            }
        }
        let gap = (mv.dot(&w) - v.dot(&m.apply(&w).unwrap())).abs();
        assert!(gap <= 1e-12 * mv.norm() * w.norm());
    }
}
