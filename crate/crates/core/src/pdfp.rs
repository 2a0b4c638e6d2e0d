//! Primal-dual fixed-point (PDFP) iteration for `min_x f(x) + g(B x)`.
//!
//! One step maps `(v_k, x_k)` to `(v_{k+1}, x_{k+1})`:
//!
//! ```text
//! y_{k+1} = x_k - gamma grad f(x_k) - gamma B^T v_k
//! v_{k+1} = prox_{(lambda/gamma) g*}((lambda/gamma) B y_{k+1} + v_k)
//! x_{k+1} = x_k - gamma grad f(x_k) - gamma B^T v_{k+1}
//! ```
//!
//! with `0 < lambda <= 1 / lambda_max(B B^T)` and `0 < gamma < 2 / M2`. The
//! gradient is evaluated once per step and `B^T v` is carried between steps.
//!
//! The same iteration solves the proximity subproblem
//! `argmin_x |x - theta|^2 / (2 rho) + f(x) + g(B x)` by replacing `f` with
//! `f + |. - theta|^2 / (2 rho)` (see [`kstep_prox_subproblem`]).

use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::operator::{LinearMap, MapKind};
use crate::prox::{ProxOutcome, SeparablePenalty};
use crate::scalar::Real;
use crate::smooth::Smooth;

/// `min_x f(x) + g(B x)` with the smoothness constants of `f`.
#[derive(Clone, Debug)]
pub struct CompositeProblem<T> {
    smooth: Arc<dyn Smooth<T>>,
    lipschitz: T,
    strong_convexity: T,
    op: LinearMap<T>,
    penalty: SeparablePenalty<T>,
    bbt_max: T,
    bbt_min: T,
}

impl<T: Real> CompositeProblem<T> {
    /// `lipschitz` is `M2` (Lipschitz constant of `grad f`), `strong_convexity`
    /// is `m` (0 when unknown).
    pub fn new(
        smooth: Arc<dyn Smooth<T>>,
        lipschitz: T,
        strong_convexity: T,
        op: LinearMap<T>,
        penalty: SeparablePenalty<T>,
    ) -> Result<Self> {
        if !(lipschitz > T::zero()) {
            return Err(Error::param("lipschitz_M2", "must be positive"));
        }
        if !(strong_convexity >= T::zero()) || strong_convexity > lipschitz {
            return Err(Error::param(
                "strong_convexity_m",
                "must lie in [0, lipschitz_M2]",
            ));
        }
        let SpectralBounds {
            min: bbt_min,
            max: bbt_max,
        } = spectral_bounds_bbt(&op)?;
        Ok(Self {
            smooth,
            lipschitz,
            strong_convexity,
            op,
            penalty,
            bbt_max,
            bbt_min,
        })
    }

    pub fn smooth(&self) -> &dyn Smooth<T> {
        self.smooth.as_ref()
    }

    pub fn smooth_arc(&self) -> Arc<dyn Smooth<T>> {
        Arc::clone(&self.smooth)
    }

    pub fn lipschitz(&self) -> T {
        self.lipschitz
    }

    pub fn strong_convexity(&self) -> T {
        self.strong_convexity
    }

    pub fn op(&self) -> &LinearMap<T> {
        &self.op
    }

    pub fn penalty(&self) -> &SeparablePenalty<T> {
        &self.penalty
    }

    /// `lambda_max(B B^T)`.
    pub fn bbt_max(&self) -> T {
        self.bbt_max
    }

    /// `rho_min(B B^T)`.
    pub fn bbt_min(&self) -> T {
        self.bbt_min
    }

    /// `f(x) + g(B x)`.
    pub fn objective(&self, x: &Field<T>) -> Result<T> {
        Ok(self.smooth.value(x)? + self.penalty.value(&self.op.apply(x)?))
    }

    /// Midpoint step `gamma = 1 / M2` and the largest dual step.
    pub fn default_params(&self) -> PdfpParams<T> {
        PdfpParams {
            gamma: T::one() / self.lipschitz,
            lambda: default_lambda(self.bbt_max),
        }
    }

    /// Defaults for the prox subproblem: `gamma = 1 / (M2 + 1/rho)`.
    pub fn default_prox_params(&self, rho: T) -> PdfpParams<T> {
        PdfpParams {
            gamma: T::one() / (self.lipschitz + T::one() / rho),
            lambda: default_lambda(self.bbt_max),
        }
    }

    /// Checks `0 < gamma < 2 / M2` and `0 < lambda <= 1 / lambda_max(B B^T)`.
    pub fn validate_params(&self, params: &PdfpParams<T>) -> Result<()> {
        params.validate(self.lipschitz, self.bbt_max)
    }

    /// Same as [`Self::validate_params`] for the subproblem (`M2 + 1/rho`).
    pub fn validate_prox_params(&self, params: &PdfpParams<T>, rho: T) -> Result<()> {
        if !(rho > T::zero()) {
            return Err(Error::param("rho", "must be positive"));
        }
        params.validate(self.lipschitz + T::one() / rho, self.bbt_max)
    }
}

fn default_lambda<T: Real>(bbt_max: T) -> T {
    if bbt_max > T::zero() {
        T::one() / bbt_max
    } else {
        T::one()
    }
}

/// Extreme eigenvalues of `B B^T`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralBounds<T> {
    pub min: T,
    pub max: T,
}

/// `lambda_max(B B^T)`.
pub fn spectral_radius_bbt<T: Real>(op: &LinearMap<T>) -> Result<T> {
    Ok(spectral_bounds_bbt(op)?.max)
}

/// `rho_min(B B^T)` and `lambda_max(B B^T)`: closed forms for identity,
/// gradient and convolution maps, a symmetric eigendecomposition of the Gram
/// matrix for dense maps.
pub fn spectral_bounds_bbt<T: Real>(op: &LinearMap<T>) -> Result<SpectralBounds<T>> {
    match op.kind() {
        MapKind::Identity => Ok(SpectralBounds {
            min: T::one(),
            max: T::one(),
        }),
        MapKind::Gradient => {
            // B B^T has a zero eigenvalue on the range; B^T B on the domain is
            // the Neumann Laplacian with eigenvalues 4 sin^2(pi p / 2H) + 4 sin^2(pi q / 2W)
            let s = op.domain_shape();
            let side = |n: usize| {
                let arg = std::f64::consts::PI * (n - 1) as f64 / (2.0 * n as f64);
                4.0 * arg.sin().powi(2)
            };
            Ok(SpectralBounds {
                min: T::zero(),
                max: T::lit(side(s[0]) + side(s[1])),
            })
        }
        MapKind::Convolution => convolution_spectrum(op),
        MapKind::Dense => dense_spectrum(op),
    }
}

/// Extremes of `|K^(w)|^2` over the discrete frequencies of the image grid.
fn convolution_spectrum<T: Real>(op: &LinearMap<T>) -> Result<SpectralBounds<T>> {
    let shape = op.domain_shape().to_vec();
    let (h, w) = (shape[0], shape[1]);
    // the impulse response is the kernel laid out on the periodic grid
    let mut impulse = Field::<T>::zeros(&shape);
    impulse.as_mut_slice()[0] = T::one();
    let response = op.apply(&impulse)?.to_f64_vec();
    let taps: Vec<(usize, usize, f64)> = response
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(idx, &v)| (idx / w, idx % w, v))
        .collect();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for p in 0..h {
        for q in 0..w {
            let (mut re, mut im) = (0.0, 0.0);
            for &(i, j, v) in &taps {
                let phase = -2.0
                    * std::f64::consts::PI
                    * ((p * i) as f64 / h as f64 + (q * j) as f64 / w as f64);
                re += v * phase.cos();
                im += v * phase.sin();
            }
            let mag = re * re + im * im;
            lo = lo.min(mag);
            hi = hi.max(mag);
        }
    }
    Ok(SpectralBounds {
        min: T::lit(lo),
        max: T::lit(hi),
    })
}

fn dense_spectrum<T: Real>(op: &LinearMap<T>) -> Result<SpectralBounds<T>> {
    let (rows, cols) = (op.range_len(), op.domain_len());
    // columns of B via unit vectors
    let mut b = nalgebra::DMatrix::<f64>::zeros(rows, cols);
    let mut e = Field::<T>::zeros(op.domain_shape());
    for j in 0..cols {
        e.as_mut_slice()[j] = T::one();
        let col = op.apply(&e)?;
        for (i, v) in col.as_slice().iter().enumerate() {
            b[(i, j)] = v.to_f64_lossy();
        }
        e.as_mut_slice()[j] = T::zero();
    }
    let gram = &b * b.transpose();
    let eig = gram.symmetric_eigenvalues();
    let max = eig.iter().copied().fold(0.0f64, f64::max);
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min).max(0.0);
    Ok(SpectralBounds {
        min: T::lit(min),
        max: T::lit(max),
    })
}

/// Step sizes `gamma` (primal) and `lambda` (dual).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PdfpParams<T> {
    pub gamma: T,
    pub lambda: T,
}

impl<T: Real> PdfpParams<T> {
    pub fn validate(&self, lipschitz: T, bbt_max: T) -> Result<()> {
        if !(self.gamma > T::zero()) || !(self.gamma < T::lit(2.0) / lipschitz) {
            return Err(Error::param(
                "gamma",
                format!(
                    "need 0 < gamma < 2/M = {}, got {}",
                    T::lit(2.0) / lipschitz,
                    self.gamma
                ),
            ));
        }
        let slack = T::one() + T::lit(1e-12);
        if !(self.lambda > T::zero()) || (bbt_max > T::zero() && self.lambda * bbt_max > slack) {
            return Err(Error::param(
                "lambda",
                format!(
                    "need 0 < lambda <= 1/lambda_max(BB^T) = {}, got {}",
                    default_lambda(bbt_max),
                    self.lambda
                ),
            ));
        }
        Ok(())
    }
}

/// Primal/dual pair with the cached product `B^T v`.
#[derive(Clone, Debug, PartialEq)]
pub struct PdfpState<T> {
    pub x: Field<T>,
    pub v: Field<T>,
    bt_v: Field<T>,
}

impl<T: Real> PdfpState<T> {
    pub fn new(x: Field<T>, v: Field<T>, op: &LinearMap<T>) -> Result<Self> {
        x.ensure_shape(op.domain_shape(), "primal variable")?;
        v.ensure_shape(op.range_shape(), "dual variable")?;
        let bt_v = op.adjoint(&v)?;
        Ok(Self { x, v, bt_v })
    }

    /// Primal start `x`, dual start `0`.
    pub fn cold(x: Field<T>, op: &LinearMap<T>) -> Result<Self> {
        Self::new(x, Field::zeros(op.range_shape()), op)
    }
}

/// Squared primal and dual step lengths of one iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepLengths<T> {
    pub primal_sq: T,
    pub dual_sq: T,
}

impl<T: Real> StepLengths<T> {
    /// `sqrt(|dx|^2 + (gamma^2 / lambda) |dv|^2)`.
    pub fn weighted(&self, params: &PdfpParams<T>) -> T {
        (self.primal_sq + params.gamma * params.gamma / params.lambda * self.dual_sq).sqrt()
    }
}

#[derive(Debug)]
pub(crate) struct Workspace<T> {
    phi: Field<T>,
    by: Field<T>,
    bt_v_next: Field<T>,
}

impl<T: Real> Workspace<T> {
    pub(crate) fn new(op: &LinearMap<T>) -> Self {
        Self {
            phi: Field::zeros(op.domain_shape()),
            by: Field::zeros(op.range_shape()),
            bt_v_next: Field::zeros(op.domain_shape()),
        }
    }
}

/// One application of `T = (T1, T2)` in place.
pub(crate) fn step_in_place<T: Real>(
    smooth: &dyn Smooth<T>,
    op: &LinearMap<T>,
    penalty: &SeparablePenalty<T>,
    params: &PdfpParams<T>,
    state: &mut PdfpState<T>,
    ws: &mut Workspace<T>,
) -> Result<StepLengths<T>> {
    let gamma = params.gamma;
    let ratio = params.lambda / gamma;

    // phi = x - gamma grad f(x)
    smooth.gradient_into(&state.x, &mut ws.phi)?;
    ws.phi.axpby(-gamma, T::one(), &state.x);

    // y = phi - gamma B^T v, reusing bt_v_next as scratch for y
    ws.bt_v_next.copy_from(&ws.phi);
    ws.bt_v_next.axpy(-gamma, &state.bt_v);
    op.apply_into(&ws.bt_v_next, &mut ws.by)?;

    // v+ = prox_{(lambda/gamma) g*}((lambda/gamma) B y + v)
    ws.by.axpby(ratio, T::one(), &state.v);
    penalty.prox_conjugate_in_place(&mut ws.by);
    op.adjoint_into(&ws.by, &mut ws.bt_v_next)?;

    let dual_sq = ws.by.dist_sq(&state.v);
    std::mem::swap(&mut state.v, &mut ws.by);
    std::mem::swap(&mut state.bt_v, &mut ws.bt_v_next);

    // x+ = phi - gamma B^T v+
    let mut primal_sq = T::zero();
    let mut finite = true;
    for ((x, &p), &b) in state
        .x
        .as_mut_slice()
        .iter_mut()
        .zip(ws.phi.as_slice())
        .zip(state.bt_v.as_slice())
    {
        let next = p - gamma * b;
        primal_sq += (next - *x) * (next - *x);
        finite &= next.is_finite();
        *x = next;
    }
    if !finite || !dual_sq.is_finite() {
        return Err(Error::Numerical {
            context: "pdfp step",
            iteration: 0,
            iterate: state.x.to_f64_vec(),
        });
    }
    Ok(StepLengths { primal_sq, dual_sq })
}

/// `(v_{k+1}, x_{k+1}) = T(v_k, x_k)`.
pub fn pdfp_step<T: Real>(
    state: &PdfpState<T>,
    prob: &CompositeProblem<T>,
    params: &PdfpParams<T>,
) -> Result<PdfpState<T>> {
    let mut next = state.clone();
    let mut ws = Workspace::new(&prob.op);
    step_in_place(prob.smooth(), &prob.op, &prob.penalty, params, &mut next, &mut ws)?;
    Ok(next)
}

/// When [`pdfp_solve`] stops.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Stopping<T> {
    /// Exactly this many iterations.
    Steps(usize),
    /// Until the weighted step norm drops below `tol`, at most `max_iters` iterations.
    Tolerance { tol: T, max_iters: usize },
}

#[derive(Clone, Debug)]
pub struct PdfpSolution<T> {
    pub x: Field<T>,
    pub v: Field<T>,
    /// `|T(v, x) - (v, x)|` in the weighted norm, at the returned pair.
    pub residual: T,
    pub iterations: usize,
    /// `false` only when a tolerance was requested and not reached.
    pub converged: bool,
}

/// One row of an optional per-iteration trace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow<T> {
    pub iteration: usize,
    pub weighted_step: T,
    pub objective: T,
}

/// Runs PDFP from `(x0, v0)`.
pub fn pdfp_solve<T: Real>(
    prob: &CompositeProblem<T>,
    params: &PdfpParams<T>,
    x0: Field<T>,
    v0: Field<T>,
    stopping: Stopping<T>,
) -> Result<PdfpSolution<T>> {
    pdfp_solve_traced(prob, params, x0, v0, stopping, None)
}

pub fn pdfp_solve_traced<T: Real>(
    prob: &CompositeProblem<T>,
    params: &PdfpParams<T>,
    x0: Field<T>,
    v0: Field<T>,
    stopping: Stopping<T>,
    mut trace: Option<&mut dyn FnMut(TraceRow<T>)>,
) -> Result<PdfpSolution<T>> {
    prob.validate_params(params)?;
    let mut state = PdfpState::new(x0, v0, &prob.op)?;
    let mut ws = Workspace::new(&prob.op);
    let (limit, tol) = match stopping {
        Stopping::Steps(k) => (k, None),
        Stopping::Tolerance { tol, max_iters } => (max_iters, Some(tol)),
    };
    let mut iterations = 0;
    let mut converged = tol.is_none();
    while iterations < limit {
        let lengths = step_in_place(prob.smooth(), &prob.op, &prob.penalty, params, &mut state, &mut ws)
            .map_err(|e| at_iteration(e, iterations))?;
        iterations += 1;
        let weighted = lengths.weighted(params);
        if let Some(cb) = trace.as_mut() {
            cb(TraceRow {
                iteration: iterations,
                weighted_step: weighted,
                objective: prob.objective(&state.x)?,
            });
        }
        if let Some(t) = tol {
            if weighted < t {
                converged = true;
                break;
            }
        }
    }
    let residual = fixed_point_residual(prob, params, &state)?;
    Ok(PdfpSolution {
        x: state.x,
        v: state.v,
        residual,
        iterations,
        converged,
    })
}

/// `|T(v, x) - (v, x)|` in the weighted norm.
pub fn fixed_point_residual<T: Real>(
    prob: &CompositeProblem<T>,
    params: &PdfpParams<T>,
    state: &PdfpState<T>,
) -> Result<T> {
    let mut probe = state.clone();
    let mut ws = Workspace::new(&prob.op);
    let lengths = step_in_place(prob.smooth(), &prob.op, &prob.penalty, params, &mut probe, &mut ws)?;
    Ok(lengths.weighted(params))
}

/// Writes a trace as CSV with header `iteration,weighted_step,objective`.
pub fn write_trace_csv<T: Real, W: Write>(rows: &[TraceRow<T>], mut out: W) -> std::io::Result<()> {
    writeln!(out, "iteration,weighted_step,objective")?;
    for r in rows {
        writeln!(out, "{},{:e},{:e}", r.iteration, r.weighted_step, r.objective)?;
    }
    Ok(())
}

fn at_iteration(e: Error, iteration: usize) -> Error {
    match e {
        Error::Numerical {
            context, iterate, ..
        } => Error::Numerical {
            context,
            iteration,
            iterate,
        },
        other => other,
    }
}

/// `f + |. - anchor|^2 / (2 rho)`.
#[derive(Debug)]
pub struct ProxSubproblem<'a, T> {
    base: &'a dyn Smooth<T>,
    anchor: &'a Field<T>,
    inv_rho: T,
}

impl<'a, T: Real> ProxSubproblem<'a, T> {
    pub fn new(base: &'a dyn Smooth<T>, anchor: &'a Field<T>, rho: T) -> Self {
        Self {
            base,
            anchor,
            inv_rho: T::one() / rho,
        }
    }
}

impl<T: Real> Smooth<T> for ProxSubproblem<'_, T> {
    fn value(&self, x: &Field<T>) -> Result<T> {
        Ok(self.base.value(x)? + x.dist_sq(self.anchor) * self.inv_rho / T::lit(2.0))
    }

    fn gradient_into(&self, x: &Field<T>, out: &mut Field<T>) -> Result<()> {
        self.base.gradient_into(x, out)?;
        let r = self.inv_rho;
        for ((o, &xi), &ai) in out
            .as_mut_slice()
            .iter_mut()
            .zip(x.as_slice())
            .zip(self.anchor.as_slice())
        {
            *o += r * (xi - ai);
        }
        Ok(())
    }
}

/// Final primal and dual iterates of a K-step subproblem solve.
#[derive(Clone, Debug, PartialEq)]
pub struct KStepOutput<T> {
    pub x: Field<T>,
    pub v: Field<T>,
}

/// `x_{n,K} = T_{n,2} T_n^{K-1}(0, theta_n)`: K PDFP iterations on the prox
/// subproblem anchored at `theta`, always from `x = theta` and `v = 0`.
pub fn kstep_prox_subproblem<T: Real>(
    theta: &Field<T>,
    rho: T,
    prob: &CompositeProblem<T>,
    params: &PdfpParams<T>,
    k: usize,
) -> Result<KStepOutput<T>> {
    let mut solver = KStepSolver::new(prob.op());
    solver.solve(theta, rho, prob, params, k)?;
    Ok(KStepOutput {
        x: solver.state.x,
        v: solver.state.v,
    })
}

/// Buffers for repeated K-step solves at different anchors.
///
/// Every call to [`KStepSolver::solve`] resets the dual to zero, so nothing
/// carries over between calls and a sampler built on it stays Markov.
#[derive(Debug)]
pub struct KStepSolver<T> {
    state: PdfpState<T>,
    ws: Workspace<T>,
}

impl<T: Real> KStepSolver<T> {
    pub fn new(op: &LinearMap<T>) -> Self {
        Self {
            state: PdfpState {
                x: Field::zeros(op.domain_shape()),
                v: Field::zeros(op.range_shape()),
                bt_v: Field::zeros(op.domain_shape()),
            },
            ws: Workspace::new(op),
        }
    }

    /// Runs `k` iterations and returns `x_{n,K}`.
    pub fn solve(
        &mut self,
        theta: &Field<T>,
        rho: T,
        prob: &CompositeProblem<T>,
        params: &PdfpParams<T>,
        k: usize,
    ) -> Result<&Field<T>> {
        prob.validate_prox_params(params, rho)?;
        theta.ensure_shape(prob.op().domain_shape(), "prox anchor")?;
        self.state.x.copy_from(theta);
        self.state.v.fill(T::zero());
        self.state.bt_v.fill(T::zero());
        let sub = ProxSubproblem::new(prob.smooth(), theta, rho);
        for it in 0..k {
            step_in_place(&sub, &prob.op, &prob.penalty, params, &mut self.state, &mut self.ws)
                .map_err(|e| at_iteration(e, it))?;
        }
        Ok(&self.state.x)
    }

    /// Dual iterate left by the last solve.
    pub fn dual(&self) -> &Field<T> {
        &self.state.v
    }
}

/// Prox subproblem solved until `|x_{k+1} - x_k| < tol` or `max_iters`.
pub fn solve_prox_subproblem<T: Real>(
    theta: &Field<T>,
    rho: T,
    prob: &CompositeProblem<T>,
    params: &PdfpParams<T>,
    tol: T,
    max_iters: usize,
) -> Result<ProxOutcome<T>> {
    prob.validate_prox_params(params, rho)?;
    let sub = ProxSubproblem::new(prob.smooth(), theta, rho);
    let mut state = PdfpState::cold(theta.clone(), &prob.op)?;
    let mut ws = Workspace::new(&prob.op);
    let tol_sq = tol * tol;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iters {
        let lengths = step_in_place(&sub, &prob.op, &prob.penalty, params, &mut state, &mut ws)
            .map_err(|e| at_iteration(e, iterations))?;
        iterations += 1;
        if lengths.primal_sq < tol_sq {
            converged = true;
            break;
        }
    }
    Ok(ProxOutcome {
        point: state.x,
        dual: state.v,
        iterations,
        converged,
    })
}

/// Linear rate `eta` of the K-step subproblem solve together with whether it is
/// a genuine contraction (`eta < 1`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContractionRate<T> {
    pub eta: T,
    pub valid: bool,
}

/// `max(1 - m^2 (2 gamma / M2 - gamma^2), 1 - lambda rho_min(B B^T))` for a
/// plain PDFP solve with `m`-strongly convex, `M2`-smooth `f`.
pub fn pdfp_contraction_rate<T: Real>(m: T, m2: T, gamma: T, lambda: T, rho_min_bbt: T) -> ContractionRate<T> {
    let primal = T::one() - m * m * (T::lit(2.0) * gamma / m2 - gamma * gamma);
    let dual = T::one() - lambda * rho_min_bbt;
    let eta = primal.max(dual).max(T::zero());
    ContractionRate {
        eta,
        valid: eta < T::one(),
    }
}

/// Rate of the prox subproblem, whose smooth part is `(m + 1/rho)`-strongly
/// convex with a `(M2 + 1/rho)`-Lipschitz gradient.
pub fn contraction_rate_eta<T: Real>(
    m: T,
    rho: T,
    m2: T,
    gamma: T,
    lambda: T,
    rho_min_bbt: T,
) -> ContractionRate<T> {
    let inv = T::one() / rho;
    pdfp_contraction_rate(m + inv, m2 + inv, gamma, lambda, rho_min_bbt)
}

/// `eta_1 = sqrt(1 - m^2 (2 gamma / M2 - gamma^2))`, a Lipschitz bound for
/// `x -> x - gamma grad f(x)`.
pub fn gradient_map_lipschitz<T: Real>(m: T, m2: T, gamma: T) -> T {
    (T::one() - m * m * (T::lit(2.0) * gamma / m2 - gamma * gamma))
        .max(T::zero())
        .sqrt()
}
