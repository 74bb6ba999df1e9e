#![allow(dead_code)]

use std::sync::Arc;

use efp::grid::{GridSpec, GridKind};
use efp::operators::LinearOperator;
use nalgebra::DMatrix;

/// Dense matrix of `op`, one stencil application per unit vector.
pub fn assemble<O: LinearOperator>(op: &O) -> DMatrix<f64> {
    let n = op.grid().len();
    let mut m = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; n];
    for k in 0..n {
        e[k] = 1.0;
        op.apply_into(&e, &mut col);
        m.set_column(k, &nalgebra::DVector::from_column_slice(&col));
        e[k] = 0.0;
    }
    m
}

pub fn assemble_adjoint<O: LinearOperator>(op: &O) -> DMatrix<f64> {
    let n = op.grid().len();
    let mut m = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; n];
    for k in 0..n {
        e[k] = 1.0;
        op.apply_adjoint_into(&e, &mut col);
        m.set_column(k, &nalgebra::DVector::from_column_slice(&col));
        e[k] = 0.0;
    }
    m
}

/// Five-point Laplacian written entry by entry.
pub fn laplacian_matrix(g: &GridSpec) -> DMatrix<f64> {
    assert_eq!(g.kind(), GridKind::Spatial2D);
    let (nx, ny) = (g.nx(), g.ny());
    let c = 1.0 / (g.hx() * g.hx());
    let mut m = DMatrix::zeros(nx * ny, nx * ny);
    for j in 1..ny - 1 {
        for i in 1..nx - 1 {
            let k = j * nx + i;
            m[(k, k)] = -4.0 * c;
            for nb in [k - 1, k + 1, k - nx, k + nx] {
                m[(k, nb)] = c;
            }
        }
    }
    m
}

/// Rows at which the space-time equations are posed.
pub fn space_time_rows(g: &GridSpec) -> Vec<(usize, usize)> {
    let mut rows = Vec::new();
    for j in 1..g.ny() {
        for i in 1..g.nx() - 1 {
            rows.push((i, j));
        }
    }
    rows
}

/// Backward time difference: first order on row 1, three-point second order
/// above it.
pub fn dy_matrix(g: &GridSpec) -> DMatrix<f64> {
    let nx = g.nx();
    let hy = g.hy();
    let mut m = DMatrix::zeros(g.len(), g.len());
    for (i, j) in space_time_rows(g) {
        let k = j * nx + i;
        if j == 1 {
            m[(k, k)] = 1.0 / hy;
            m[(k, k - nx)] = -1.0 / hy;
        } else {
            m[(k, k)] = 3.0 / (2.0 * hy);
            m[(k, k - nx)] = -4.0 / (2.0 * hy);
            m[(k, k - 2 * nx)] = 1.0 / (2.0 * hy);
        }
    }
    m
}

pub fn dx_matrix(g: &GridSpec) -> DMatrix<f64> {
    let nx = g.nx();
    let hx = g.hx();
    let mut m = DMatrix::zeros(g.len(), g.len());
    for (i, j) in space_time_rows(g) {
        let k = j * nx + i;
        m[(k, k + 1)] = 1.0 / (2.0 * hx);
        m[(k, k - 1)] = -1.0 / (2.0 * hx);
    }
    m
}

pub fn dxx_matrix(g: &GridSpec) -> DMatrix<f64> {
    let nx = g.nx();
    let hx = g.hx();
    let mut m = DMatrix::zeros(g.len(), g.len());
    for (i, j) in space_time_rows(g) {
        let k = j * nx + i;
        m[(k, k + 1)] = 1.0 / (hx * hx);
        m[(k, k - 1)] = 1.0 / (hx * hx);
        m[(k, k)] = -2.0 / (hx * hx);
    }
    m
}

pub fn heat_matrix(g: &GridSpec, alpha: f64) -> DMatrix<f64> {
    dy_matrix(g) - dxx_matrix(g) * alpha
}

/// `J(u) = D_y + diag(D_x u) + diag(u) D_x - nu D_xx`.
pub fn burgers_jacobian_matrix(g: &GridSpec, nu: f64, u: &[f64]) -> DMatrix<f64> {
    let dx = dx_matrix(g);
    let uv = nalgebra::DVector::from_column_slice(u);
    let dxu = &dx * &uv;
    dy_matrix(g) + DMatrix::from_diagonal(&dxu) + DMatrix::from_diagonal(&uv) * &dx
        - dxx_matrix(g) * nu
}

/// `D_x` applied on defined space-time rows, written out pointwise.
pub fn dx_apply(g: &GridSpec, v: &[f64]) -> Vec<f64> {
    let nx = g.nx();
    let mut out = vec![0.0; v.len()];
    for (i, j) in space_time_rows(g) {
        let k = j * nx + i;
        out[k] = (v[k + 1] - v[k - 1]) / (2.0 * g.hx());
    }
    out
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let s: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    d / s
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn grid(kind: GridKind, nx: usize, ny: usize) -> Arc<GridSpec> {
    efp::grid::make_grid(kind, nx, ny, 1.0).unwrap()
}
