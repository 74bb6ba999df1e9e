//! Annealed semi-implicit energy descent.
//!
//! Each outer iteration linearizes the residual `r` at the current field,
//! takes one implicit (Levenberg–Marquardt) step on `½‖r‖²` with injected
//! Gaussian noise, smooths the result with a Gaussian kernel and overwrites
//! the constrained nodes with their prescribed values:
//!
//! ```text
//! (I + Δτ JᵀJ) u⁺ = uⁿ + Δτ Jᵀ(J uⁿ - r(uⁿ)) + sqrt(2 εₙ Δτ) ξ
//! u   = P_g[ G_σₙ * u⁺ ]
//! εₙ  = ε₀ γⁿ,   σₙ = σ₀ δⁿ
//! ```
//!
//! With boundary enforcement on, the implicit solve acts only on free nodes
//! and carries the prescribed values through unchanged, so the projection
//! after smoothing only undoes what the smoothing moved.

use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{dot, norm, random_field, same_grid, Field, GridSpec};
use crate::metrics::relative_l2_error;
use crate::operators::{normal_operator, LinearOperator};
use crate::problems::{PdeSystem, ProblemSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Pseudo-time step Δτ.
    pub dtau: f64,
    /// Initial noise intensity ε₀.
    pub eps0: f64,
    /// Per-iteration geometric decay γ of the noise intensity.
    pub eps_decay: f64,
    /// Standard deviation of the random initial field.
    pub sigma_init: f64,
    /// Initial Gaussian smoothing width in node units.
    pub sigma_smooth: f64,
    /// Per-iteration geometric decay of the smoothing width. `1.0` keeps it fixed.
    pub smooth_decay: f64,
    pub smoothing_enabled: bool,
    pub boundary_enabled: bool,
    pub max_iters: usize,
    /// Stop once `‖r‖ / ‖f‖` (or `‖r‖ / ‖r⁰‖` when `f ≡ 0`) drops below this.
    pub residual_tol: f64,
    pub cg_tol: f64,
    /// Inner iteration cap; `None` means `10 * nx * ny`.
    pub cg_max_iters: Option<usize>,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dtau: 1.0,
            eps0: 1e-4,
            eps_decay: 0.95,
            sigma_init: 1.0,
            sigma_smooth: 1.0,
            smooth_decay: 0.95f64.sqrt(),
            smoothing_enabled: true,
            boundary_enabled: true,
            max_iters: 200,
            residual_tol: 1e-8,
            cg_tol: 1e-10,
            cg_max_iters: None,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.dtau > 0.0) || !self.dtau.is_finite() {
            return bad(format!("dtau must be positive, got {}", self.dtau));
        }
        if !(self.eps0 >= 0.0) || !self.eps0.is_finite() {
            return bad(format!("eps0 must be non-negative, got {}", self.eps0));
        }
        if !(0.0..1.0).contains(&self.eps_decay) {
            return bad(format!("eps_decay must lie in [0, 1), got {}", self.eps_decay));
        }
        if !(self.sigma_init >= 0.0) || !self.sigma_init.is_finite() {
            return bad(format!("sigma_init must be non-negative, got {}", self.sigma_init));
        }
        if !(self.sigma_smooth >= 0.0) || !self.sigma_smooth.is_finite() {
            return bad(format!(
                "sigma_smooth must be non-negative, got {}",
                self.sigma_smooth
            ));
        }
        if !(0.0..=1.0).contains(&self.smooth_decay) {
            return bad(format!(
                "smooth_decay must lie in [0, 1], got {}",
                self.smooth_decay
            ));
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1".into());
        }
        if !(self.residual_tol >= 0.0) {
            return bad(format!("residual_tol must be non-negative, got {}", self.residual_tol));
        }
        if !(self.cg_tol > 0.0) {
            return bad(format!("cg_tol must be positive, got {}", self.cg_tol));
        }
        if self.cg_max_iters == Some(0) {
            return bad("cg_max_iters must be at least 1".into());
        }
        Ok(())
    }

    pub fn cg_cap(&self, grid: &GridSpec) -> usize {
        self.cg_max_iters.unwrap_or(10 * grid.len())
    }

    /// Noise intensity used by update `n` (zero-based).
    pub fn eps_at(&self, n: usize) -> f64 {
        self.eps0 * self.eps_decay.powi(n as i32)
    }

    /// Smoothing width applied after update `n` (zero-based).
    pub fn sigma_smooth_at(&self, n: usize) -> f64 {
        self.sigma_smooth * self.smooth_decay.powi(n as i32)
    }
}

// ---------------------------------------------------------------------------
// Conjugate gradient

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub solution: Field,
    pub iterations: usize,
    pub converged: bool,
    /// `‖Ax - b‖ / ‖b‖` of the returned iterate, from the recursive residual.
    pub relative_residual: f64,
}

/// Matrix-free conjugate gradient for a symmetric positive definite operator.
///
/// Stops when `‖Ax - b‖ <= tol ‖b‖`. Hitting the iteration cap is not an
/// error; the best saved iterate is returned with `converged = false`. An
/// iterate is saved whenever `‖r‖²` has halved since the last save, so the
/// fallback is within a factor `√2` of the smallest residual seen.
pub fn cg_solve<O: LinearOperator>(
    op: &O,
    rhs: &Field,
    x0: &Field,
    tol: f64,
    max_iters: usize,
) -> Result<CgOutcome> {
    let grid = op.grid();
    for f in [rhs, x0] {
        if !same_grid(grid, f.grid()) {
            return Err(Error::GridMismatch("cg_solve operands".into()));
        }
    }
    let b = rhs.values();
    let n = b.len();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok(CgOutcome {
            solution: Field::zeros(grid),
            iterations: 0,
            converged: true,
            relative_residual: 0.0,
        });
    }
    let target = tol * b_norm;

    let mut x = x0.values().to_vec();
    let mut ap = vec![0.0; n];
    op.apply_into(&x, &mut ap);
    let mut r: Vec<f64> = b.iter().zip(&ap).map(|(bi, ai)| bi - ai).collect();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    if !rr.is_finite() {
        return Err(Error::NonFiniteCg { iteration: 0 });
    }
    let mut best_rr = rr;
    let mut best_x = x.clone();
    let mut iterations = 0;

    while rr.sqrt() > target && iterations < max_iters {
        op.apply_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        let alpha = rr / pap;
        if !alpha.is_finite() {
            return Err(Error::NonFiniteCg {
                iteration: iterations + 1,
            });
        }
        let mut rr_next = 0.0;
        for (((xk, rk), &pk), &apk) in x.iter_mut().zip(r.iter_mut()).zip(&p).zip(&ap) {
            *xk += alpha * pk;
            *rk -= alpha * apk;
            rr_next += *rk * *rk;
        }
        iterations += 1;
        if !rr_next.is_finite() {
            return Err(Error::NonFiniteCg {
                iteration: iterations,
            });
        }
        let beta = rr_next / rr;
        for (pk, &rk) in p.iter_mut().zip(&r) {
            *pk = rk + beta * *pk;
        }
        rr = rr_next;
        if rr < 0.5 * best_rr {
            best_rr = rr;
            best_x.copy_from_slice(&x);
        }
    }

    let converged = rr.sqrt() <= target;
    let (final_rr, values) = if converged { (rr, x) } else { (best_rr, best_x) };
    Ok(CgOutcome {
        solution: Field::from_values(grid, values)?,
        iterations,
        converged,
        relative_residual: final_rr.sqrt() / b_norm,
    })
}

// ---------------------------------------------------------------------------
// Iteration pieces

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub field: Field,
    pub cg_iterations: usize,
    pub cg_converged: bool,
}

/// One stochastic semi-implicit update from `u_n` with noise intensity `eps_n`.
///
/// When `config.boundary_enabled` is set the constrained nodes of `u_n` are
/// held fixed during the solve.
pub fn implicit_step<R: Rng + ?Sized>(
    system: &PdeSystem,
    u_n: &Field,
    eps_n: f64,
    config: &SolverConfig,
    rng: &mut R,
) -> Result<StepOutcome> {
    if !same_grid(system.grid(), u_n.grid()) {
        return Err(Error::GridMismatch("implicit_step field".into()));
    }
    if !(eps_n >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "noise intensity must be non-negative, got {eps_n}"
        )));
    }
    let grid = system.grid();
    let n = grid.len();
    let dtau = config.dtau;
    let u = u_n.values();
    let mask = grid.boundary_mask();
    let constrained = config.boundary_enabled;

    let jac = system.linearize(u);
    let mut resid = vec![0.0; n];
    system.residual_into(u, &mut resid);

    // J P u - r(u): the affine part of the linearized residual, negated.
    let pu: Vec<f64> = if constrained {
        u.iter()
            .zip(mask)
            .map(|(&v, &fixed)| if fixed { 0.0 } else { v })
            .collect()
    } else {
        u.to_vec()
    };
    let mut lin = vec![0.0; n];
    jac.apply_into(&pu, &mut lin);
    for (l, r) in lin.iter_mut().zip(&resid) {
        *l -= r;
    }
    let mut rhs = vec![0.0; n];
    jac.apply_adjoint_into(&lin, &mut rhs);

    let noise_scale = (2.0 * eps_n * dtau).sqrt();
    for k in 0..n {
        let xi: f64 = rng.sample(StandardNormal);
        rhs[k] = u[k] + dtau * rhs[k] + noise_scale * xi;
    }

    if constrained {
        for (r, (&v, &fixed)) in rhs.iter_mut().zip(u.iter().zip(mask)) {
            if fixed {
                *r = v;
            }
        }
    }
    let rhs = Field::from_values(grid, rhs)?;

    let normal = normal_operator(&jac, dtau)?;
    let cap = config.cg_cap(grid);
    let outcome = if constrained {
        cg_solve(&normal.restricted(mask), &rhs, u_n, config.cg_tol, cap)?
    } else {
        cg_solve(&normal, &rhs, u_n, config.cg_tol, cap)?
    };
    let mut field = outcome.solution;
    if constrained {
        // CG leaves fixed entries alone in exact arithmetic; make it bitwise.
        for (k, v) in field.values_mut().iter_mut().enumerate() {
            if mask[k] {
                *v = u[k];
            }
        }
    }
    Ok(StepOutcome {
        field,
        cg_iterations: outcome.iterations,
        cg_converged: outcome.converged,
    })
}

/// Normalized 1D Gaussian taps `w_k ∝ exp(-k²/2σ²)` for `|k| <= ceil(3σ)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if !(sigma > 0.0) {
        return vec![1.0];
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let mut w: Vec<f64> = (-radius..=radius)
        .map(|k| (-((k * k) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

/// Separable Gaussian blur, x then y. Near the edges the kernel is
/// renormalized over the taps that fall inside the grid.
pub fn gaussian_smooth(u: &Field, sigma_smooth: f64) -> Field {
    if !(sigma_smooth > 0.0) {
        return u.clone();
    }
    let grid = u.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let w = gaussian_kernel(sigma_smooth);
    let radius = (w.len() / 2) as isize;

    let blur = |src: &[f64], dst: &mut [f64], len: usize, stride: usize, lines: usize, step: usize| {
        for line in 0..lines {
            let base = line * step;
            for i in 0..len as isize {
                let lo = (i - radius).max(0);
                let hi = (i + radius).min(len as isize - 1);
                let mut acc = 0.0;
                let mut wsum = 0.0;
                for t in lo..=hi {
                    let wk = w[(t - i + radius) as usize];
                    acc += wk * src[base + t as usize * stride];
                    wsum += wk;
                }
                dst[base + i as usize * stride] = acc / wsum;
            }
        }
    };

    let mut tmp = vec![0.0; u.values().len()];
    blur(u.values(), &mut tmp, nx, 1, ny, nx);
    let mut out = vec![0.0; tmp.len()];
    blur(&tmp, &mut out, ny, nx, nx, 1);
    Field::from_values(grid, out).expect("same length as input")
}

/// Overwrites constrained nodes with the prescribed values.
pub fn enforce_boundary(u: &Field, system: &PdeSystem) -> Result<Field> {
    if !same_grid(system.grid(), u.grid()) {
        return Err(Error::GridMismatch("enforce_boundary field".into()));
    }
    let mut out = u.clone();
    let g = system.boundary().values();
    let mask = system.grid().boundary_mask();
    for (k, v) in out.values_mut().iter_mut().enumerate() {
        if mask[k] {
            *v = g[k];
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Driver

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub energy: f64,
    pub residual_norm: f64,
    /// Percent.
    pub rel_l2_error: f64,
    pub eps: f64,
    pub cg_iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Tolerance,
    IterationCap,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub final_u: Field,
    /// State after the initial projection, before any update (`iter = 0`).
    pub initial: IterationRecord,
    /// One record per completed update, `iter = 1, 2, ...`.
    pub history: Vec<IterationRecord>,
    pub converged: bool,
    pub stop_reason: StopReason,
    pub seed: u64,
    pub wall_time: f64,
    /// Number of inner solves that hit the CG cap.
    pub cg_cap_hits: usize,
}

impl SolveResult {
    pub fn final_error(&self) -> f64 {
        self.history
            .last()
            .map_or(self.initial.rel_l2_error, |r| r.rel_l2_error)
    }

    pub fn final_residual(&self) -> f64 {
        self.history
            .last()
            .map_or(self.initial.residual_norm, |r| r.residual_norm)
    }

    pub fn iterations(&self) -> usize {
        self.history.len()
    }
}

const NOISE_STREAM: u64 = 1;

fn record(
    system: &PdeSystem,
    exact: &Field,
    u: &Field,
    iter: usize,
    eps: f64,
    cg_iterations: usize,
) -> Result<IterationRecord> {
    let r = system.residual(u)?;
    let rr = dot(r.values(), r.values());
    Ok(IterationRecord {
        iter,
        energy: 0.5 * rr,
        residual_norm: rr.sqrt(),
        rel_l2_error: relative_l2_error(u, exact)?,
        eps,
        cg_iterations,
    })
}

/// Runs the full annealed iteration from a seeded random field.
pub fn run_solver(problem: &ProblemSpec, config: &SolverConfig) -> Result<SolveResult> {
    run_solver_observed(problem, config, |_, _| {})
}

/// [`run_solver`] with a callback that sees every recorded iterate, starting
/// with the projected initial field at `iter = 0`.
pub fn run_solver_observed<F>(
    problem: &ProblemSpec,
    config: &SolverConfig,
    mut observe: F,
) -> Result<SolveResult>
where
    F: FnMut(usize, &Field),
{
    config.validate()?;
    let start = Instant::now();
    let system = problem.system();
    let exact = problem.exact();
    let grid: &Arc<GridSpec> = system.grid();

    let mut u = random_field(grid, config.sigma_init, config.seed)?;
    if config.boundary_enabled {
        u = enforce_boundary(&u, system)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(NOISE_STREAM);

    let initial = record(system, exact, &u, 0, config.eps_at(0), 0)?;
    observe(0, &u);
    let f_norm = system.source().norm();
    let scale = if f_norm > 0.0 { f_norm } else { initial.residual_norm };

    let mut result = SolveResult {
        final_u: u.clone(),
        initial,
        history: Vec::with_capacity(config.max_iters),
        converged: false,
        stop_reason: StopReason::IterationCap,
        seed: config.seed,
        wall_time: 0.0,
        cg_cap_hits: 0,
    };
    if scale == 0.0 {
        result.converged = true;
        result.stop_reason = StopReason::Tolerance;
        result.wall_time = start.elapsed().as_secs_f64();
        return Ok(result);
    }

    for n in 0..config.max_iters {
        let eps_n = config.eps_at(n);
        let step = match implicit_step(system, &u, eps_n, config, &mut rng) {
            Ok(step) => step,
            Err(Error::NonFiniteCg { .. }) => {
                return Err(diverged(result, u, n + 1, start, "inner solve produced NaN"))
            }
            Err(e) => return Err(e),
        };
        if !step.cg_converged {
            result.cg_cap_hits += 1;
        }
        let mut next = step.field;
        if config.smoothing_enabled {
            next = gaussian_smooth(&next, config.sigma_smooth_at(n));
        }
        if config.boundary_enabled {
            next = enforce_boundary(&next, system)?;
        }
        if !next.is_finite() {
            return Err(diverged(result, u, n + 1, start, "iterate is not finite"));
        }
        let rec = record(system, exact, &next, n + 1, eps_n, step.cg_iterations)?;
        if !rec.residual_norm.is_finite() {
            return Err(diverged(result, u, n + 1, start, "residual is not finite"));
        }
        observe(n + 1, &next);
        let done = rec.residual_norm <= config.residual_tol * scale;
        result.history.push(rec);
        u = next;
        if done {
            result.converged = true;
            result.stop_reason = StopReason::Tolerance;
            break;
        }
    }

    result.final_u = u;
    result.wall_time = start.elapsed().as_secs_f64();
    Ok(result)
}

fn diverged(
    mut partial: SolveResult,
    last_valid: Field,
    iteration: usize,
    start: Instant,
    reason: &str,
) -> Error {
    partial.final_u = last_valid;
    partial.wall_time = start.elapsed().as_secs_f64();
    Error::Diverged {
        iteration,
        reason: reason.to_string(),
        partial: Box::new(partial),
    }
}
