//! Concrete PDE instances with closed-form reference solutions.
//!
//! A [`ProblemSpec`] splits into the [`PdeSystem`] the solver is allowed to
//! see (operator, source, boundary data) and the exact solution, which only
//! the metrics read.
//!
//! | kind    | equation                     | reference solution                          |
//! |---------|------------------------------|---------------------------------------------|
//! | Poisson | `-Δu = f`, `u = 0` on ∂Ω      | `sin(πx) sin(πy)`                           |
//! | Heat    | `u_y - α u_xx = 0`            | `exp(-απ²y) sin(πx)`                        |
//! | Burgers | `u_y + u u_x - ν u_xx = 0`    | `½(1 - tanh((x - y/2 - x₀) / (4ν)))`        |

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{dot, same_grid, Field, GridKind, GridSpec};
use crate::operators::{
    burgers_operator, heat_operator, laplacian_2d, BurgersJacobian, BurgersOperator,
    HeatOperator, Laplacian2d, LinearOperator,
};

pub const DEFAULT_ALPHA: f64 = 0.1;
pub const DEFAULT_Y_EXTENT: f64 = 1.0;
pub const DEFAULT_FRONT_OFFSET: f64 = 0.25;
pub const BURGERS_WAVE_SPEED: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Poisson,
    Heat,
    Burgers,
}

impl ProblemKind {
    pub fn grid_kind(self) -> GridKind {
        match self {
            ProblemKind::Poisson => GridKind::Spatial2D,
            ProblemKind::Heat | ProblemKind::Burgers => GridKind::SpaceTime1Dp1,
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProblemKind::Poisson => "poisson",
            ProblemKind::Heat => "heat",
            ProblemKind::Burgers => "burgers",
        })
    }
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "poisson" => Ok(ProblemKind::Poisson),
            "heat" => Ok(ProblemKind::Heat),
            "burgers" => Ok(ProblemKind::Burgers),
            other => Err(Error::Config(format!("unknown problem kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub enum PdeOperator {
    Poisson(Laplacian2d),
    Heat(HeatOperator),
    Burgers(BurgersOperator),
}

/// Linearization of a residual map at a point: `-Δ` for Poisson, `A` for heat,
/// and the frozen Jacobian for Burgers.
pub enum ResidualJacobian<'a> {
    NegLaplacian(&'a Laplacian2d),
    Heat(&'a HeatOperator),
    Burgers(BurgersJacobian),
}

impl LinearOperator for ResidualJacobian<'_> {
    fn grid(&self) -> &Arc<GridSpec> {
        match self {
            ResidualJacobian::NegLaplacian(op) => op.grid(),
            ResidualJacobian::Heat(op) => op.grid(),
            ResidualJacobian::Burgers(op) => op.grid(),
        }
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            ResidualJacobian::NegLaplacian(op) => {
                op.apply_into(x, out);
                out.iter_mut().for_each(|v| *v = -*v);
            }
            ResidualJacobian::Heat(op) => op.apply_into(x, out),
            ResidualJacobian::Burgers(op) => op.apply_into(x, out),
        }
    }

    fn apply_adjoint_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            ResidualJacobian::NegLaplacian(op) => {
                op.apply_adjoint_into(x, out);
                out.iter_mut().for_each(|v| *v = -*v);
            }
            ResidualJacobian::Heat(op) => op.apply_adjoint_into(x, out),
            ResidualJacobian::Burgers(op) => op.apply_adjoint_into(x, out),
        }
    }
}

/// Everything the solver may see: operator, source and boundary data.
#[derive(Debug, Clone)]
pub struct PdeSystem {
    kind: ProblemKind,
    grid: Arc<GridSpec>,
    operator: PdeOperator,
    source_f: Field,
    boundary_g: Field,
}

impl PdeSystem {
    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn grid(&self) -> &Arc<GridSpec> {
        &self.grid
    }

    pub fn operator(&self) -> &PdeOperator {
        &self.operator
    }

    pub fn source(&self) -> &Field {
        &self.source_f
    }

    /// Prescribed values at constrained nodes; zero elsewhere.
    pub fn boundary(&self) -> &Field {
        &self.boundary_g
    }

    pub fn alpha(&self) -> Option<f64> {
        match &self.operator {
            PdeOperator::Heat(op) => Some(op.alpha()),
            _ => None,
        }
    }

    pub fn nu(&self) -> Option<f64> {
        match &self.operator {
            PdeOperator::Burgers(op) => Some(op.nu()),
            _ => None,
        }
    }

    fn check(&self, u: &Field) -> Result<()> {
        if same_grid(&self.grid, u.grid()) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "problem grid is {}x{}, field grid is {}x{}",
                self.grid.nx(),
                self.grid.ny(),
                u.grid().nx(),
                u.grid().ny()
            )))
        }
    }

    pub(crate) fn residual_into(&self, u: &[f64], out: &mut [f64]) {
        let f = self.source_f.values();
        let mask = self.grid.boundary_mask();
        match &self.operator {
            PdeOperator::Poisson(lap) => {
                lap.apply_into(u, out);
                for k in 0..out.len() {
                    out[k] = if mask[k] { 0.0 } else { -out[k] - f[k] };
                }
            }
            PdeOperator::Heat(op) => {
                op.apply_into(u, out);
                for k in 0..out.len() {
                    out[k] = if mask[k] { 0.0 } else { out[k] - f[k] };
                }
            }
            PdeOperator::Burgers(op) => {
                op.apply_f_into(u, out);
                for k in 0..out.len() {
                    out[k] = if mask[k] { 0.0 } else { out[k] - f[k] };
                }
            }
        }
    }

    /// Discrete PDE residual; zero at constrained nodes.
    pub fn residual(&self, u: &Field) -> Result<Field> {
        self.check(u)?;
        let mut out = Field::zeros(&self.grid);
        self.residual_into(u.values(), out.values_mut());
        Ok(out)
    }

    /// `½ ‖r(u)‖²` with the plain node sum.
    pub fn energy(&self, u: &Field) -> Result<f64> {
        let r = self.residual(u)?;
        Ok(0.5 * dot(r.values(), r.values()))
    }

    pub fn linearize(&self, u: &[f64]) -> ResidualJacobian<'_> {
        match &self.operator {
            PdeOperator::Poisson(lap) => ResidualJacobian::NegLaplacian(lap),
            PdeOperator::Heat(op) => ResidualJacobian::Heat(op),
            PdeOperator::Burgers(op) => ResidualJacobian::Burgers(op.jacobian_at_values(u)),
        }
    }

    /// `J(u)^T r(u)`. For Poisson this is `Δ*(Δu + f)`, for heat `A*(Au - f)`.
    pub fn energy_gradient(&self, u: &Field) -> Result<Field> {
        let r = self.residual(u)?;
        let jac = self.linearize(u.values());
        let mut out = Field::zeros(&self.grid);
        jac.apply_adjoint_into(r.values(), out.values_mut());
        Ok(out)
    }
}

/// A PDE instance together with its exact reference solution.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    system: PdeSystem,
    exact_u: Field,
}

impl ProblemSpec {
    /// Solver-facing view without the reference solution.
    pub fn system(&self) -> &PdeSystem {
        &self.system
    }

    pub fn exact(&self) -> &Field {
        &self.exact_u
    }

    pub fn kind(&self) -> ProblemKind {
        self.system.kind
    }

    pub fn grid(&self) -> &Arc<GridSpec> {
        &self.system.grid
    }

    pub fn residual(&self, u: &Field) -> Result<Field> {
        self.system.residual(u)
    }

    pub fn energy(&self, u: &Field) -> Result<f64> {
        self.system.energy(u)
    }

    pub fn energy_gradient(&self, u: &Field) -> Result<Field> {
        self.system.energy_gradient(u)
    }
}

fn boundary_from(grid: &Arc<GridSpec>, exact: &Field) -> Field {
    let mut g = Field::zeros(grid);
    for (k, (out, &e)) in g.values_mut().iter_mut().zip(exact.values()).enumerate() {
        if grid.is_boundary(k) {
            *out = e;
        }
    }
    g
}

fn require(grid: &GridSpec, kind: ProblemKind) -> Result<()> {
    if grid.kind() == kind.grid_kind() {
        Ok(())
    } else {
        Err(Error::InvalidGrid(format!(
            "{kind} needs a {:?} grid, got {:?}",
            kind.grid_kind(),
            grid.kind()
        )))
    }
}

/// `-Δu = 2π² sin(πx) sin(πy)` with homogeneous Dirichlet data.
pub fn make_poisson(grid: &Arc<GridSpec>) -> Result<ProblemSpec> {
    require(grid, ProblemKind::Poisson)?;
    let exact = Field::from_fn(grid, poisson_exact);
    let source = Field::from_fn(grid, |x, y| 2.0 * PI * PI * poisson_exact(x, y));
    Ok(ProblemSpec {
        system: PdeSystem {
            kind: ProblemKind::Poisson,
            grid: Arc::clone(grid),
            operator: PdeOperator::Poisson(laplacian_2d(grid)?),
            source_f: source,
            boundary_g: boundary_from(grid, &exact),
        },
        exact_u: exact,
    })
}

pub fn poisson_exact(x: f64, y: f64) -> f64 {
    sin_pi(x) * sin_pi(y)
}

/// `sin(πx)` on `[0, 1]`, folded about `x = ½` so both endpoints give exactly 0.
pub fn sin_pi(x: f64) -> f64 {
    if x > 0.5 {
        (PI * (1.0 - x)).sin()
    } else {
        (PI * x).sin()
    }
}

/// Decaying first sine mode of the heat equation, zero source.
pub fn make_heat(grid: &Arc<GridSpec>, alpha: f64) -> Result<ProblemSpec> {
    require(grid, ProblemKind::Heat)?;
    let op = heat_operator(grid, alpha)?;
    let exact = Field::from_fn(grid, |x, y| heat_exact(alpha, x, y));
    Ok(ProblemSpec {
        system: PdeSystem {
            kind: ProblemKind::Heat,
            grid: Arc::clone(grid),
            operator: PdeOperator::Heat(op),
            source_f: Field::zeros(grid),
            boundary_g: boundary_from(grid, &exact),
        },
        exact_u: exact,
    })
}

pub fn heat_exact(alpha: f64, x: f64, y: f64) -> f64 {
    (-alpha * PI * PI * y).exp() * sin_pi(x)
}

/// Right-moving tanh front, zero source, front centred at `x = 0.25` at `y = 0`.
pub fn make_burgers(grid: &Arc<GridSpec>, nu: f64) -> Result<ProblemSpec> {
    make_burgers_with_offset(grid, nu, DEFAULT_FRONT_OFFSET)
}

pub fn make_burgers_with_offset(grid: &Arc<GridSpec>, nu: f64, x0: f64) -> Result<ProblemSpec> {
    require(grid, ProblemKind::Burgers)?;
    let op = burgers_operator(grid, nu)?;
    let exact = Field::from_fn(grid, |x, y| burgers_exact(nu, x0, x, y));
    Ok(ProblemSpec {
        system: PdeSystem {
            kind: ProblemKind::Burgers,
            grid: Arc::clone(grid),
            operator: PdeOperator::Burgers(op),
            source_f: Field::zeros(grid),
            boundary_g: boundary_from(grid, &exact),
        },
        exact_u: exact,
    })
}

pub fn burgers_exact(nu: f64, x0: f64, x: f64, y: f64) -> f64 {
    0.5 * (1.0 - ((x - BURGERS_WAVE_SPEED * y - x0) / (4.0 * nu)).tanh())
}
