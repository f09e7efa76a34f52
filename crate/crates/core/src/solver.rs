//! Discrete fundamental frequency `λ^Q_{1,p}` on a P1 mesh.
//!
//! The discrete problem minimizes
//!
//! ```text
//! R(u) = Σ_T |T| · Q(∇u|_T)^{p/2}  /  ‖u‖_p^p
//! ```
//!
//! over nodal vectors vanishing on the boundary, where `‖u‖_p^p` uses the
//! edge-midpoint rule on every triangle (exact for `p = 2`). At `p = 2` the
//! minimizer is the ground state of `K u = λ M u`, computed by inverse
//! iteration with a sparse Cholesky factor of `K`. For other `p` the quotient
//! is minimized by projected descent on the unit `p`-sphere, preconditioned by
//! the stiffness matrix weighted with `Q(∇u)^{(p−2)/2}` at the current iterate,
//! and warm-started along a continuation path in `p`.
//!
//! Runs stop when `gᵀP⁻¹g / 4λ` drops below the tolerance. At `p = 2` with
//! `P = K` this bounds the relative eigenvalue error up to the spectral gap
//! factor; the value is reported as the result's `residual`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{DomainSpec, GeometryError};
use crate::linalg::{EnvelopeCholesky, SymSparse};
use crate::mesh::{DofMap, Mesh, MeshError};
use crate::quadform::{FormError, QuadForm};

/// Floor on `Q(∇u)` inside the `Q^{(p−2)/2}` factor of the gradient when `p < 2`.
const GRAD_FLOOR: f64 = 1e-12;
/// Number of continuation stages from `p = 2` to the target exponent.
const CONTINUATION_STAGES: usize = 6;
/// Tolerance used on intermediate continuation stages.
const STAGE_TOL: f64 = 1e-7;
const ARMIJO_C: f64 = 1e-4;
/// Relative floor on `Q(∇u)` when weighting the preconditioner.
const WEIGHT_FLOOR: f64 = 1e-4;
/// Nodes below this fraction of the maximum count as sitting on the bound.
const ACTIVE_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Form(#[from] FormError),
    #[error("exponent p = {0} must exceed 1")]
    BadExponent(f64),
    #[error("invalid solver options: {0}")]
    BadOptions(String),
    #[error("stiffness matrix is singular on the interior nodes")]
    Singular,
    #[error("no convergence after {} iterations (residual {:e})", best.iterations, best.residual)]
    NotConverged { best: Box<EigenResult> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum StepRule {
    Fixed,
    #[default]
    Backtracking,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Target for the relative error estimate `gᵀP⁻¹g / 4λ` (`P` the
    /// Hessian-weighted stiffness); for directional weights, the relative
    /// change of `λ` on two consecutive steps.
    pub tol: f64,
    pub max_iter: usize,
    /// Warm-start general `p` from the `p = 2` ground state; otherwise start
    /// from a random positive vector drawn with `seed`.
    pub continuation: bool,
    pub step_rule: StepRule,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-9,
            max_iter: 20_000,
            continuation: true,
            step_rule: StepRule::Backtracking,
            seed: 0,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(SolverError::BadOptions(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(SolverError::BadOptions("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// An eigenpair estimate: `u` is nonnegative with unit discrete `p`-norm and
/// `lambda` is its discrete energy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenResult {
    pub lambda: f64,
    pub u: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub p: f64,
    pub form: QuadForm,
}

/// Symmetric positive semidefinite 2×2 weight of the energy density
/// `(gᵀ D g)^{p/2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Metric {
    d11: f64,
    d12: f64,
    d22: f64,
}

impl Metric {
    fn from_form(q: &QuadForm) -> Self {
        Metric {
            d11: q.alpha(),
            d12: q.beta(),
            d22: q.gamma(),
        }
    }

    fn axis(axis: Axis) -> Self {
        match axis {
            Axis::X => Metric { d11: 1.0, d12: 0.0, d22: 0.0 },
            Axis::Y => Metric { d11: 0.0, d12: 0.0, d22: 1.0 },
        }
    }

    fn eval(&self, g: [f64; 2]) -> f64 {
        self.d11 * g[0] * g[0] + 2.0 * self.d12 * g[0] * g[1] + self.d22 * g[1] * g[1]
    }

    fn apply(&self, g: [f64; 2]) -> [f64; 2] {
        [self.d11 * g[0] + self.d12 * g[1], self.d12 * g[0] + self.d22 * g[1]]
    }
}

fn check_p(p: f64) -> Result<(), SolverError> {
    if p.is_finite() && p > 1.0 {
        Ok(())
    } else {
        Err(SolverError::BadExponent(p))
    }
}

fn check_len(mesh: &Mesh, u: &[f64]) -> Result<(), SolverError> {
    if u.len() != mesh.n_nodes() {
        return Err(MeshError::Dimension {
            expected: mesh.n_nodes(),
            got: u.len(),
        }
        .into());
    }
    Ok(())
}

fn energy_with(mesh: &Mesh, metric: &Metric, p: f64, u: &[f64]) -> f64 {
    let half = 0.5 * p;
    (0..mesh.n_triangles())
        .map(|t| {
            let q = metric.eval(mesh.gradient(t, u)).max(0.0);
            mesh.tri_areas()[t] * q.powf(half)
        })
        .sum()
}

/// `Σ_T |T| Q(∇u|_T)^{p/2}` over all nodes of `u` (boundary values included).
pub fn energy(mesh: &Mesh, form: &QuadForm, p: f64, u: &[f64]) -> Result<f64, SolverError> {
    check_p(p)?;
    check_len(mesh, u)?;
    Ok(energy_with(mesh, &Metric::from_form(form), p, u))
}

/// `‖u‖_p^p` by the edge-midpoint rule.
pub fn p_norm_pow(mesh: &Mesh, p: f64, u: &[f64]) -> Result<f64, SolverError> {
    check_p(p)?;
    check_len(mesh, u)?;
    Ok(norm_pow_nodal(mesh, p, u))
}

fn norm_pow_nodal(mesh: &Mesh, p: f64, u: &[f64]) -> f64 {
    mesh.triangles()
        .iter()
        .zip(mesh.tri_areas())
        .map(|(t, &area)| {
            let s: f64 = (0..3)
                .map(|e| (0.5 * (u[t[e]] + u[t[(e + 1) % 3]])).abs().powf(p))
                .sum();
            area / 3.0 * s
        })
        .sum()
}

/// Rayleigh quotient restricted to the interior nodes of a mesh.
#[derive(Debug, Clone)]
pub struct RayleighQuotient<'m> {
    mesh: &'m Mesh,
    dofs: DofMap,
    metric: Metric,
    p: f64,
}

impl<'m> RayleighQuotient<'m> {
    pub fn new(mesh: &'m Mesh, form: &QuadForm, p: f64) -> Result<Self, SolverError> {
        check_p(p)?;
        Ok(RayleighQuotient {
            mesh,
            dofs: mesh.interior_dof_map()?,
            metric: Metric::from_form(form),
            p,
        })
    }

    /// Quotient with energy density `|∂_axis u|^p`.
    pub fn directional(mesh: &'m Mesh, axis: Axis, p: f64) -> Result<Self, SolverError> {
        check_p(p)?;
        Ok(RayleighQuotient {
            mesh,
            dofs: mesh.interior_dof_map()?,
            metric: Metric::axis(axis),
            p,
        })
    }

    fn with_p(&self, p: f64) -> Self {
        RayleighQuotient { p, ..self.clone() }
    }

    pub fn dim(&self) -> usize {
        self.dofs.len()
    }

    pub fn dofs(&self) -> &DofMap {
        &self.dofs
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn energy(&self, x: &[f64]) -> f64 {
        energy_with(self.mesh, &self.metric, self.p, &self.dofs.scatter(x))
    }

    pub fn norm_pow(&self, x: &[f64]) -> f64 {
        norm_pow_nodal(self.mesh, self.p, &self.dofs.scatter(x))
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let u = self.dofs.scatter(x);
        energy_with(self.mesh, &self.metric, self.p, &u) / norm_pow_nodal(self.mesh, self.p, &u)
    }

    /// Value and gradient of the quotient with respect to the interior values.
    pub fn gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let mesh = self.mesh;
        let p = self.p;
        let u = self.dofs.scatter(x);
        let mut ge = vec![0.0; u.len()];
        let mut gn = vec![0.0; u.len()];
        let (mut e, mut nrm) = (0.0, 0.0);
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let area = mesh.tri_areas()[t];
            let g = mesh.gradient(t, &u);
            let q = self.metric.eval(g).max(0.0);
            e += area * q.powf(0.5 * p);
            let w = if p < 2.0 { q.max(GRAD_FLOOR) } else { q };
            let coef = area * p * if p == 2.0 { 1.0 } else { w.powf(0.5 * p - 1.0) };
            let dg = self.metric.apply(g);
            let gm = &mesh.grad_maps()[t];
            for (k, &node) in tri.iter().enumerate() {
                ge[node] += coef * (gm[0][k] * dg[0] + gm[1][k] * dg[1]);
            }
            for edge in 0..3 {
                let (i, j) = (tri[edge], tri[(edge + 1) % 3]);
                let m = 0.5 * (u[i] + u[j]);
                let am = m.abs();
                nrm += area / 3.0 * am.powf(p);
                let d = area / 3.0 * p * am.powf(p - 1.0) * m.signum() * 0.5;
                gn[i] += d;
                gn[j] += d;
            }
        }
        let r = e / nrm;
        let grad = self.dofs.nodes().iter().map(|&n| (ge[n] - r * gn[n]) / nrm).collect();
        (r, grad)
    }

    /// Stiffness matrix of the `p = 2` energy with the same weight.
    pub fn stiffness(&self) -> SymSparse {
        self.weighted_stiffness(None)
    }

    /// `(p/2)` times the stiffness matrix with per-triangle factors
    /// `Q(∇u)^{(p−2)/2}` taken at the iterate `x`: the part of the energy
    /// Hessian that is spectrally equivalent to the whole of it. Gradients
    /// below `WEIGHT_FLOOR` times their area mean are raised to that level.
    fn hessian_proxy(&self, x: &[f64]) -> SymSparse {
        let u = self.dofs.scatter(x);
        let q: Vec<f64> = (0..self.mesh.n_triangles())
            .map(|t| self.metric.eval(self.mesh.gradient(t, &u)).max(0.0))
            .collect();
        let areas = self.mesh.tri_areas();
        let mean = q.iter().zip(areas).map(|(a, b)| a * b).sum::<f64>() / self.mesh.total_area();
        let floor = WEIGHT_FLOOR * mean;
        let half = 0.5 * self.p;
        let w: Vec<f64> = q.iter().map(|&v| half * v.max(floor).powf(half - 1.0)).collect();
        self.weighted_stiffness(Some(&w))
    }

    fn weighted_stiffness(&self, weights: Option<&[f64]>) -> SymSparse {
        let mut e = Vec::with_capacity(9 * self.mesh.n_triangles());
        for (t, tri) in self.mesh.triangles().iter().enumerate() {
            let gm = &self.mesh.grad_maps()[t];
            let area = self.mesh.tri_areas()[t] * weights.map_or(1.0, |w| w[t]);
            for a in 0..3 {
                let Some(da) = self.dofs.dof(tri[a]) else { continue };
                let dga = self.metric.apply([gm[0][a], gm[1][a]]);
                for b in 0..3 {
                    let Some(db) = self.dofs.dof(tri[b]) else { continue };
                    e.push((da, db, 2.0 * area * (dga[0] * gm[0][b] + dga[1] * gm[1][b])));
                }
            }
        }
        SymSparse::from_triplets(self.dim(), e)
    }

    /// Consistent P1 mass matrix (twice the Gram matrix, matching `stiffness`).
    pub fn mass(&self) -> SymSparse {
        let mut e = Vec::with_capacity(9 * self.mesh.n_triangles());
        for (t, tri) in self.mesh.triangles().iter().enumerate() {
            let area = self.mesh.tri_areas()[t];
            for a in 0..3 {
                let Some(da) = self.dofs.dof(tri[a]) else { continue };
                for b in 0..3 {
                    let Some(db) = self.dofs.dof(tri[b]) else { continue };
                    let w = if a == b { 2.0 } else { 1.0 };
                    e.push((da, db, 2.0 * area * w / 12.0));
                }
            }
        }
        SymSparse::from_triplets(self.dim(), e)
    }

    fn normalize(&self, x: &mut [f64]) {
        let n = self.norm_pow(x).powf(1.0 / self.p);
        x.iter_mut().for_each(|v| *v /= n);
    }

    fn preconditioner(&self) -> Result<EnvelopeCholesky, SolverError> {
        let k = self.stiffness();
        match EnvelopeCholesky::factor(&k) {
            Ok(f) => Ok(f),
            Err(_) => {
                // degenerate weights: regularize with a small multiple of the full Laplacian
                let lap = RayleighQuotient {
                    metric: Metric::from_form(&QuadForm::identity()),
                    ..self.clone()
                }
                .stiffness();
                EnvelopeCholesky::factor(&k.add_scaled(1e-6, &lap)).map_err(|_| SolverError::Singular)
            }
        }
    }
}

/// How a descent run decides it is done.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stop {
    /// Gradient-based relative error estimate below `tol`.
    Estimate,
    /// Two consecutive relative changes of `λ` below `tol`. For degenerate
    /// (directional) weights, whose quotient has no coercive Hessian.
    Stall,
}

/// Outcome of one minimization run on interior values.
#[derive(Debug, Clone)]
struct Run {
    x: Vec<f64>,
    iterations: usize,
    residual: f64,
    converged: bool,
}

/// Inverse iteration for the smallest eigenpair of `K x = λ M x`.
fn inverse_iteration(rq: &RayleighQuotient, factor: &EnvelopeCholesky, x0: Vec<f64>, tol: f64, max_iter: usize) -> Run {
    let k = rq.stiffness();
    let m = rq.mass();
    let n = rq.dim();
    let mut x = x0;
    let mut mx = vec![0.0; n];
    let mut lambda = k.dot_form(&x, &x) / m.dot_form(&x, &x);
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        m.matvec(&x, &mut mx);
        factor.solve_in_place(&mut mx);
        std::mem::swap(&mut x, &mut mx);
        let nrm = m.dot_form(&x, &x).sqrt();
        x.iter_mut().for_each(|v| *v /= nrm);
        let next = k.dot_form(&x, &x);
        let change = ((lambda - next) / next).abs();
        lambda = next;
        if change < tol || it == max_iter {
            let (r, g) = rq.gradient(&x);
            residual = dual_norm_sq(factor, g) / (4.0 * r);
        }
        if change < tol && residual < tol {
            return Run {
                x,
                iterations: it,
                residual,
                converged: true,
            };
        }
    }
    Run {
        x,
        iterations: max_iter,
        residual,
        converged: false,
    }
}

/// Preconditioned projected descent on `{x ≥ 0, ‖x‖_p = 1}`.
///
/// The search direction is `−P⁻¹∇R` (Polak–Ribière corrected), with nodes
/// held at the bound `x = 0` frozen. Trial points follow the projected path
/// `max(x + s·d, 0)` and are renormalized.
fn projected_descent(
    rq: &RayleighQuotient,
    base: &EnvelopeCholesky,
    mut x: Vec<f64>,
    tol: f64,
    max_iter: usize,
    rule: StepRule,
    stop: Stop,
) -> Run {
    let n = rq.dim();
    x.iter_mut().for_each(|v| *v = v.abs());
    rq.normalize(&mut x);
    let t0 = 1.0 / rq.p();
    let mut t = t0;
    let (mut r, mut g) = rq.gradient(&x);
    let mut z_prev: Vec<f64> = Vec::new();
    let mut g_prev: Vec<f64> = Vec::new();
    let mut d_prev: Vec<f64> = Vec::new();
    let mut residual = f64::INFINITY;
    let mut small_steps = 0;
    // Hessian-weighted preconditioner, refreshed at every iterate
    let adaptive = stop == Stop::Estimate && rq.p() != 2.0;
    let mut local: Option<EnvelopeCholesky> = None;
    let done = |x, iterations, residual, converged| Run {
        x,
        iterations,
        residual,
        converged,
    };
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| u * v).sum::<f64>();
    for it in 1..=max_iter {
        if adaptive {
            local = EnvelopeCholesky::factor(&rq.hessian_proxy(&x)).ok();
        }
        let factor = local.as_ref().unwrap_or(base);
        if stop == Stop::Estimate {
            residual = error_estimate(factor, &x, &g, r);
            if residual < tol {
                return done(x, it - 1, residual, true);
            }
        }
        // candidate directions, tried in order until one gives sufficient decrease:
        // momentum, plain preconditioned gradient, then the fixed preconditioner
        let mut plans: Vec<(&EnvelopeCholesky, bool)> = vec![(factor, true), (factor, false)];
        if local.is_some() {
            plans.push((base, false));
        }
        let active = active_set(&x, &g);
        let gf: Vec<f64> = g.iter().zip(&active).map(|(&gi, &a)| if a { 0.0 } else { gi }).collect();
        let mut accepted = None;
        for (k, &(f, momentum)) in plans.iter().enumerate() {
            if momentum && (d_prev.is_empty() || rule == StepRule::Fixed) {
                continue;
            }
            let mut z = gf.clone();
            f.solve_in_place(&mut z);
            for (zi, &a) in z.iter_mut().zip(&active) {
                if a {
                    *zi = 0.0;
                }
            }
            if !(dot(&g, &z) > 0.0) {
                continue;
            }
            let mut d: Vec<f64> = z.iter().map(|v| -v).collect();
            if momentum {
                let beta = ((0..n).map(|i| (g[i] - g_prev[i]) * z[i]).sum::<f64>() / dot(&g_prev, &z_prev)).max(0.0);
                if !beta.is_finite() || beta == 0.0 {
                    continue;
                }
                for i in 0..n {
                    if !active[i] {
                        d[i] += beta * d_prev[i];
                    }
                }
            }
            let slope = dot(&g, &d);
            if !(slope < 0.0) {
                continue;
            }
            let trial = |step: f64| {
                let mut y: Vec<f64> = x.iter().zip(&d).map(|(a, b)| (a + step * b).max(0.0)).collect();
                rq.normalize(&mut y);
                let v = rq.value(&y);
                (y, v)
            };
            let found = match rule {
                StepRule::Fixed => Some(trial(t0)),
                StepRule::Backtracking => {
                    let mut s = if k == 0 || plans[k - 1].1 { (2.0 * t).min(64.0 * t0) } else { 64.0 * t0 };
                    let mut hit = None;
                    while s > 1e-12 * t0 {
                        let (y, v) = trial(s);
                        if v.is_finite() && v <= r + ARMIJO_C * s * slope {
                            hit = Some((y, v));
                            break;
                        }
                        s *= 0.5;
                    }
                    if hit.is_some() {
                        t = s;
                    }
                    hit
                }
            };
            if let Some((y, v)) = found {
                accepted = Some((y, v, z, d));
                break;
            }
        }
        let Some((y, v, z, d)) = accepted else {
            // no decrease along any descent direction: stationary to working precision
            let ok = match stop {
                Stop::Estimate => residual < tol.sqrt(),
                Stop::Stall => true,
            };
            return done(x, it, residual, ok);
        };
        if stop == Stop::Stall {
            residual = ((r - v) / v).abs();
        }
        x = y;
        g_prev = g;
        z_prev = z;
        d_prev = d;
        let (nr, ng) = rq.gradient(&x);
        r = nr;
        g = ng;
        if stop == Stop::Stall {
            // two consecutive small changes guard against a lucky short step
            small_steps = if residual < tol { small_steps + 1 } else { 0 };
            if small_steps >= 2 {
                return done(x, it, residual, true);
            }
        }
    }
    if stop == Stop::Estimate {
        residual = error_estimate(local.as_ref().unwrap_or(base), &x, &g, r);
    }
    let ok = residual < tol;
    done(x, max_iter, residual, ok)
}

/// Relative error estimate `gᵀK⁻¹g / 4λ` over the free nodes; at `p = 2` this
/// bounds `(λ − λ₁)/λ` up to the spectral gap factor. Nodes pinned at zero with
/// the gradient pushing outward are excluded.
fn error_estimate(factor: &EnvelopeCholesky, x: &[f64], g: &[f64], r: f64) -> f64 {
    let free: Vec<f64> = g
        .iter()
        .zip(active_set(x, g))
        .map(|(&gi, a)| if a { 0.0 } else { gi })
        .collect();
    dual_norm_sq(factor, free) / (4.0 * r)
}

/// Nodes on the bound `x = 0` whose gradient pushes them below it.
fn active_set(x: &[f64], g: &[f64]) -> Vec<bool> {
    let xmax = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    x.iter().zip(g).map(|(&xi, &gi)| xi <= ACTIVE_TOL * xmax && gi > 0.0).collect()
}

/// `gᵀK⁻¹g`.
fn dual_norm_sq(factor: &EnvelopeCholesky, g: Vec<f64>) -> f64 {
    let mut z = g.clone();
    factor.solve_in_place(&mut z);
    g.iter().zip(&z).map(|(a, b)| a * b).sum()
}

fn random_positive(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(0.5..1.5)).collect()
}

/// Flips to the nonnegative orientation; strays below zero are reflected.
fn fix_sign(x: &mut [f64]) {
    if x.iter().sum::<f64>() < 0.0 {
        x.iter_mut().for_each(|v| *v = -*v);
    }
    x.iter_mut().for_each(|v| *v = v.abs());
}

fn finish(rq: &RayleighQuotient, form: &QuadForm, run: Run) -> Result<EigenResult, SolverError> {
    let mut x = run.x;
    fix_sign(&mut x);
    rq.normalize(&mut x);
    let lambda = rq.energy(&x);
    let result = EigenResult {
        lambda,
        u: rq.dofs().scatter(&x),
        iterations: run.iterations,
        residual: run.residual,
        p: rq.p(),
        form: *form,
    };
    if run.converged {
        Ok(result)
    } else {
        Err(SolverError::NotConverged { best: Box::new(result) })
    }
}

fn p2_run(rq: &RayleighQuotient, opts: &SolverOptions) -> Result<Run, SolverError> {
    let factor = EnvelopeCholesky::factor(&rq.stiffness()).map_err(|_| SolverError::Singular)?;
    let x0 = vec![1.0; rq.dim()];
    Ok(inverse_iteration(rq, &factor, x0, opts.tol, opts.max_iter))
}

/// Ground state of the `p = 2` problem.
pub fn solve_p2(mesh: &Mesh, form: &QuadForm, opts: &SolverOptions) -> Result<EigenResult, SolverError> {
    opts.validate()?;
    let rq = RayleighQuotient::new(mesh, form, 2.0)?;
    let run = p2_run(&rq, opts)?;
    finish(&rq, form, run)
}

fn descend(rq: &RayleighQuotient, start: Option<Vec<f64>>, opts: &SolverOptions) -> Result<Run, SolverError> {
    let factor = rq.preconditioner()?;
    let p = rq.p();
    let directional = rq.metric == Metric::axis(Axis::X) || rq.metric == Metric::axis(Axis::Y);
    let stop = if directional { Stop::Stall } else { Stop::Estimate };
    let descent = |rq: &RayleighQuotient, x0, tol, budget| projected_descent(rq, &factor, x0, tol, budget, opts.step_rule, stop);
    if p == 2.0 && !directional {
        let x0 = start.unwrap_or_else(|| vec![1.0; rq.dim()]);
        return Ok(inverse_iteration(rq, &factor, x0, opts.tol, opts.max_iter));
    }
    match start {
        Some(x0) => Ok(descent(rq, x0, opts.tol, opts.max_iter)),
        None if opts.continuation => {
            let rq2 = rq.with_p(2.0);
            let stage_tol = STAGE_TOL.max(opts.tol);
            let first = if directional {
                descent(&rq2, vec![1.0; rq.dim()], stage_tol, opts.max_iter)
            } else {
                inverse_iteration(&rq2, &factor, vec![1.0; rq.dim()], stage_tol, opts.max_iter)
            };
            let mut used = first.iterations;
            let mut x = first.x;
            let mut last = None;
            for k in 1..=CONTINUATION_STAGES {
                let (pk, tol) = if k == CONTINUATION_STAGES {
                    (p, opts.tol)
                } else {
                    (2.0 * (0.5 * p).powf(k as f64 / CONTINUATION_STAGES as f64), stage_tol)
                };
                let budget = opts.max_iter.saturating_sub(used).max(1);
                let run = descent(&rq.with_p(pk), x, tol, budget);
                used += run.iterations;
                x = run.x.clone();
                last = Some(run);
            }
            let mut run = last.expect("at least one stage");
            run.iterations = used;
            run.converged = run.converged && used <= opts.max_iter;
            Ok(run)
        }
        None => Ok(descent(rq, random_positive(rq.dim(), opts.seed), opts.tol, opts.max_iter)),
    }
}

/// Minimizer of the discrete quotient for general `p > 1`.
pub fn solve_p(mesh: &Mesh, form: &QuadForm, p: f64, opts: &SolverOptions) -> Result<EigenResult, SolverError> {
    opts.validate()?;
    let rq = RayleighQuotient::new(mesh, form, p)?;
    let run = descend(&rq, None, opts)?;
    finish(&rq, form, run)
}

/// As [`solve_p`], starting the descent from the nodal vector `start`.
pub fn solve_p_from(
    mesh: &Mesh,
    form: &QuadForm,
    p: f64,
    start: &[f64],
    opts: &SolverOptions,
) -> Result<EigenResult, SolverError> {
    opts.validate()?;
    check_len(mesh, start)?;
    let rq = RayleighQuotient::new(mesh, form, p)?;
    let x0 = rq.dofs().gather(start);
    let run = descend(&rq, Some(x0), opts)?;
    finish(&rq, form, run)
}

/// Discrete `inf Σ_T |T| |∂_axis u|^p / ‖u‖_p^p` over zero-trace `u`.
pub fn directional_constant(mesh: &Mesh, p: f64, axis: Axis, opts: &SolverOptions) -> Result<EigenResult, SolverError> {
    opts.validate()?;
    let rq = RayleighQuotient::directional(mesh, axis, p)?;
    let run = if p == 2.0 {
        match EnvelopeCholesky::factor(&rq.stiffness()) {
            Ok(f) => inverse_iteration(&rq, &f, vec![1.0; rq.dim()], opts.tol, opts.max_iter),
            Err(_) => descend(&rq, None, opts)?,
        }
    } else {
        descend(&rq, None, opts)?
    };
    // the result carries the identity form as a placeholder for the weight
    finish(&rq, &QuadForm::identity(), run)
}

/// Isotropic `λ_{1,p}` of a domain on its own mesh at refinement `level`.
pub fn isotropic(domain: &DomainSpec, p: f64, level: usize, opts: &SolverOptions) -> Result<EigenResult, SolverError> {
    let mesh = Mesh::for_domain(domain, level)?;
    solve_p(&mesh, &QuadForm::identity(), p, opts)
}

/// `λ^{Q_a}_{1,p}(Ω_θ)` by two discretizations: `Q_a` on a mesh of the rotated
/// domain, and `a^{p/2}` times the isotropic value on a fresh mesh of the
/// rotated and sheared domain.
pub fn lambda_anisotropic_two_routes(
    domain: &DomainSpec,
    a: f64,
    theta: f64,
    p: f64,
    level: usize,
    opts: &SolverOptions,
) -> Result<(f64, f64), SolverError> {
    if !(a > 0.0 && a <= 1.0) {
        return Err(FormError::OutOfRange {
            name: "a",
            value: a,
            range: "(0, 1]",
        }
        .into());
    }
    let rotated = domain.rotate(theta)?;
    let form = QuadForm::new(a, 0.0, 1.0)?;
    let direct = solve_p(&Mesh::for_domain(&rotated, level)?, &form, p, opts)?.lambda;
    let sheared = rotated.shear_y(a)?;
    let via_shear = a.powf(0.5 * p) * isotropic(&sheared, p, level, opts)?.lambda;
    Ok((direct, via_shear))
}
