//! Langevin transition kernels.
//!
//! | kernel     | drift point                      | accept/reject |
//! |------------|----------------------------------|---------------|
//! | ULA        | `theta - delta grad U(theta)`    | no            |
//! | MALA       | same                             | yes           |
//! | prox ULA   | `(1-delta/rho) theta + (delta/rho) prox_{rho U}(theta)` | no |
//! | prox MALA  | same, prox cached across steps   | yes           |
//! | ULA-PDFP   | prox replaced by K PDFP steps    | no            |
//! | MALA-PDFP  | same, K-step output cached       | yes           |
//!
//! Acceptance probabilities are computed in log space from energy differences;
//! a proposal is accepted when the uniform draw `a` satisfies `a < A`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::pdfp::{KStepSolver, PdfpParams};
use crate::prox::{self, MoreauConfig, ProxMode};
use crate::rng::{ChainRng, NoiseSource};
use crate::scalar::Real;
use crate::smooth::Smooth;
use crate::target::CompositeTarget;

mod chain;
mod tuning;

pub use chain::{run_chain, ChainOutput, RunConfig};
pub use tuning::{tune_mala_pdfp, TuningOptions, TuningResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SamplerKind {
    Ula,
    Mala,
    ProxUla,
    ProxMala,
    UlaPdfp,
    MalaPdfp,
}

impl SamplerKind {
    pub const ALL: [SamplerKind; 6] = [
        SamplerKind::Ula,
        SamplerKind::Mala,
        SamplerKind::ProxUla,
        SamplerKind::ProxMala,
        SamplerKind::UlaPdfp,
        SamplerKind::MalaPdfp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SamplerKind::Ula => "ula",
            SamplerKind::Mala => "mala",
            SamplerKind::ProxUla => "prox_ula",
            SamplerKind::ProxMala => "prox_mala",
            SamplerKind::UlaPdfp => "ula_pdfp",
            SamplerKind::MalaPdfp => "mala_pdfp",
        }
    }

    pub fn is_metropolized(self) -> bool {
        matches!(self, SamplerKind::Mala | SamplerKind::ProxMala | SamplerKind::MalaPdfp)
    }

    pub fn is_proximal(self) -> bool {
        !matches!(self, SamplerKind::Ula | SamplerKind::Mala)
    }

    pub fn uses_pdfp(self) -> bool {
        matches!(self, SamplerKind::UlaPdfp | SamplerKind::MalaPdfp)
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SamplerKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::param(
                    "sampler",
                    format!(
                        "unknown sampler `{s}`, expected one of ula, mala, prox_ula, prox_mala, ula_pdfp, mala_pdfp"
                    ),
                )
            })
    }
}

/// Initial prox cache of MALA-PDFP.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum P0Init {
    /// `P_0 = theta_0`.
    #[default]
    Literal,
    /// `P_0` is the K-step output at `theta_0`.
    KStep,
}

/// Step sizes and inner-solver settings shared by all kernels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplerConfig<T> {
    pub delta: T,
    pub rho: T,
    pub k: usize,
    /// Inner primal step; defaults to `1 / (M2 + 1/rho)`.
    pub gamma: Option<T>,
    /// Inner dual step; defaults to `1 / lambda_max(B B^T)`.
    pub lambda: Option<T>,
    pub p0: P0Init,
}

impl<T: Real> SamplerConfig<T> {
    /// `delta = rho`, `K = 1`, default inner steps.
    pub fn new(delta: T) -> Self {
        Self {
            delta,
            rho: delta,
            k: 1,
            gamma: None,
            lambda: None,
            p0: P0Init::Literal,
        }
    }

    pub fn with_rho(mut self, rho: T) -> Self {
        self.rho = rho;
        self
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn pdfp_params(&self, target: &CompositeTarget<T>) -> PdfpParams<T> {
        let d = target.problem().default_prox_params(self.rho);
        PdfpParams {
            gamma: self.gamma.unwrap_or(d.gamma),
            lambda: self.lambda.unwrap_or(d.lambda),
        }
    }

    /// Checks the parameter box of `kind` on `target`.
    pub fn validate(&self, kind: SamplerKind, target: &CompositeTarget<T>) -> Result<()> {
        if !(self.delta > T::zero()) || !self.delta.is_finite() {
            return Err(Error::param("delta", "must be positive"));
        }
        let problem = target.problem();
        if kind.is_proximal() {
            if !(self.rho > T::zero()) || !self.rho.is_finite() {
                return Err(Error::param("rho", "must be positive"));
            }
            if self.delta > self.rho {
                return Err(Error::param(
                    "delta",
                    format!(
                        "proximal samplers need delta in (0, rho], got delta = {} > rho = {}",
                        self.delta, self.rho
                    ),
                ));
            }
            problem.validate_prox_params(&self.pdfp_params(target), self.rho)?;
            if kind.uses_pdfp() && self.k == 0 {
                return Err(Error::param("K", "must be at least 1"));
            }
        } else {
            if problem.penalty().weight() != T::zero() {
                return Err(Error::param(
                    "sampler",
                    format!("{kind} needs a smooth potential, but the penalty weight is nonzero"),
                ));
            }
            if kind == SamplerKind::Ula && self.delta > T::one() / problem.lipschitz() {
                return Err(Error::param(
                    "delta",
                    format!(
                        "ULA needs delta in (0, 1/L] = (0, {}], got {}",
                        T::one() / problem.lipschitz(),
                        self.delta
                    ),
                ));
            }
        }
        Ok(())
    }
}

/// Current point of one Markov chain.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainState<T, R = ChainRng> {
    pub theta: Field<T>,
    /// Cached proximal point at `theta` (prox MALA and MALA-PDFP).
    pub prox_cache: Option<Field<T>>,
    /// Dual iterate left by the most recent K-step solve. Recorded for
    /// inspection only; no kernel reads it.
    pub last_dual: Option<Field<T>>,
    pub rng: R,
    pub n: usize,
    pub accept_count: usize,
}

impl<T: Real, R: NoiseSource> ChainState<T, R> {
    pub fn new(theta: Field<T>, rng: R) -> Self {
        Self {
            theta,
            prox_cache: None,
            last_dual: None,
            rng,
            n: 0,
            accept_count: 0,
        }
    }
}

/// What happened in one transition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome<T> {
    pub accepted: bool,
    /// `log A` before truncation at 0, for Metropolized kernels.
    pub log_acceptance: Option<T>,
    /// `|Y - theta_n|^2` for the proposal `Y`.
    pub proposal_jump_sq: T,
    /// `|theta_{n+1} - theta_n|^2`.
    pub jump_sq: T,
}

/// A Markov transition kernel.
pub trait Kernel<T: Real> {
    fn kind(&self) -> SamplerKind;

    /// `U(theta)` of the target the kernel samples.
    fn energy(&self, theta: &Field<T>) -> Result<T>;

    /// Fills caches the first step needs. Idempotent.
    fn prepare<R: NoiseSource>(&mut self, _state: &mut ChainState<T, R>) -> Result<()> {
        Ok(())
    }

    fn step<R: NoiseSource>(&mut self, state: &mut ChainState<T, R>) -> Result<StepOutcome<T>>;
}

/// Scratch shared by the kernels.
#[derive(Debug)]
struct Scratch<T> {
    xi: Field<T>,
    drift: Field<T>,
    proposal: Field<T>,
    back: Field<T>,
}

impl<T: Real> Scratch<T> {
    fn new(shape: &[usize]) -> Self {
        Self {
            xi: Field::zeros(shape),
            drift: Field::zeros(shape),
            proposal: Field::zeros(shape),
            back: Field::zeros(shape),
        }
    }
}

/// `out = (1 - delta/rho) theta + (delta/rho) p`.
#[inline]
fn relaxed_mean<T: Real>(theta: &Field<T>, p: &Field<T>, delta: T, rho: T, out: &mut Field<T>) {
    let w = delta / rho;
    let a = T::one() - w;
    for ((o, &t), &q) in out
        .as_mut_slice()
        .iter_mut()
        .zip(theta.as_slice())
        .zip(p.as_slice())
    {
        *o = a * t + w * q;
    }
}

/// `out = mean + sqrt(2 delta) xi`.
#[inline]
fn add_noise<T: Real>(mean: &Field<T>, xi: &Field<T>, delta: T, out: &mut Field<T>) {
    let s = (T::lit(2.0) * delta).sqrt();
    for ((o, &m), &x) in out
        .as_mut_slice()
        .iter_mut()
        .zip(mean.as_slice())
        .zip(xi.as_slice())
    {
        *o = m + s * x;
    }
}

fn check_finite<T: Real>(x: &Field<T>, context: &'static str, n: usize) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::Numerical {
            context,
            iteration: n,
            iterate: x.to_f64_vec(),
        })
    }
}

/// Metropolis decision `a < min(1, exp(log_a))`.
fn metropolis<T: Real, R: NoiseSource>(rng: &mut R, log_a: T) -> bool {
    let a = rng.uniform();
    let threshold = log_a.min(T::zero()).to_f64_lossy().exp();
    a < threshold
}

fn accept_into<T: Real, R: NoiseSource>(state: &mut ChainState<T, R>, proposal: &Field<T>, accepted: bool) {
    if accepted {
        state.theta.copy_from(proposal);
        state.accept_count += 1;
    }
    state.n += 1;
}

/// Unadjusted Langevin: `theta' = theta - delta grad U(theta) + sqrt(2 delta) xi`.
#[derive(Debug)]
pub struct Ula<'a, T> {
    potential: &'a dyn Smooth<T>,
    delta: T,
    scratch: Scratch<T>,
}

impl<'a, T: Real> Ula<'a, T> {
    pub fn new(potential: &'a dyn Smooth<T>, delta: T, shape: &[usize]) -> Self {
        Self {
            potential,
            delta,
            scratch: Scratch::new(shape),
        }
    }
}

impl<T: Real> Kernel<T> for Ula<'_, T> {
    fn kind(&self) -> SamplerKind {
        SamplerKind::Ula
    }

    fn energy(&self, theta: &Field<T>) -> Result<T> {
        self.potential.value(theta)
    }

    fn step<R: NoiseSource>(&mut self, state: &mut ChainState<T, R>) -> Result<StepOutcome<T>> {
        let s = &mut self.scratch;
        self.potential.gradient_into(&state.theta, &mut s.drift)?;
        s.drift.axpby(-self.delta, T::one(), &state.theta);
        state.rng.fill_normal(&mut s.xi);
        add_noise(&s.drift, &s.xi, self.delta, &mut s.proposal);
        check_finite(&s.proposal, "ula step", state.n)?;
        let jump = s.proposal.dist_sq(&state.theta);
        accept_into(state, &s.proposal, true);
        Ok(StepOutcome {
            accepted: true,
            log_acceptance: None,
            proposal_jump_sq: jump,
            jump_sq: jump,
        })
    }
}

/// Metropolis-adjusted Langevin with the ULA proposal.
#[derive(Debug)]
pub struct Mala<'a, T> {
    potential: &'a dyn Smooth<T>,
    delta: T,
    scratch: Scratch<T>,
}

impl<'a, T: Real> Mala<'a, T> {
    pub fn new(potential: &'a dyn Smooth<T>, delta: T, shape: &[usize]) -> Self {
        Self {
            potential,
            delta,
            scratch: Scratch::new(shape),
        }
    }
}

impl<T: Real> Kernel<T> for Mala<'_, T> {
    fn kind(&self) -> SamplerKind {
        SamplerKind::Mala
    }

    fn energy(&self, theta: &Field<T>) -> Result<T> {
        self.potential.value(theta)
    }

    fn step<R: NoiseSource>(&mut self, state: &mut ChainState<T, R>) -> Result<StepOutcome<T>> {
        let delta = self.delta;
        let s = &mut self.scratch;
        // forward mean theta - delta grad U(theta)
        self.potential.gradient_into(&state.theta, &mut s.drift)?;
        s.drift.axpby(-delta, T::one(), &state.theta);
        state.rng.fill_normal(&mut s.xi);
        add_noise(&s.drift, &s.xi, delta, &mut s.proposal);
        check_finite(&s.proposal, "mala proposal", state.n)?;
        // backward mean Y - delta grad U(Y)
        self.potential.gradient_into(&s.proposal, &mut s.back)?;
        s.back.axpby(-delta, T::one(), &s.proposal);

        let four_delta = T::lit(4.0) * delta;
        let log_a = -(self.potential.value(&s.proposal)? - self.potential.value(&state.theta)?)
            - state.theta.dist_sq(&s.back) / four_delta
            + s.proposal.dist_sq(&s.drift) / four_delta;
        let accepted = metropolis(&mut state.rng, log_a);
        let jump = s.proposal.dist_sq(&state.theta);
        accept_into(state, &s.proposal, accepted);
        Ok(StepOutcome {
            accepted,
            log_acceptance: Some(log_a),
            proposal_jump_sq: jump,
            jump_sq: if accepted { jump } else { T::zero() },
        })
    }
}

/// Proximal ULA with the prox solved to tolerance.
#[derive(Debug)]
pub struct ProxUla<'a, T> {
    target: &'a CompositeTarget<T>,
    delta: T,
    moreau: MoreauConfig<T>,
    scratch: Scratch<T>,
}

impl<'a, T: Real> ProxUla<'a, T> {
    pub fn new(target: &'a CompositeTarget<T>, delta: T, moreau: MoreauConfig<T>) -> Self {
        Self {
            target,
            delta,
            moreau,
            scratch: Scratch::new(target.param_shape()),
        }
    }
}

impl<T: Real> Kernel<T> for ProxUla<'_, T> {
    fn kind(&self) -> SamplerKind {
        SamplerKind::ProxUla
    }

    fn energy(&self, theta: &Field<T>) -> Result<T> {
        self.target.energy(theta)
    }

    fn step<R: NoiseSource>(&mut self, state: &mut ChainState<T, R>) -> Result<StepOutcome<T>> {
        let p = prox::prox_energy(&state.theta, self.target, &self.moreau, ProxMode::Exact)?;
        let s = &mut self.scratch;
        relaxed_mean(&state.theta, &p.point, self.delta, self.moreau.rho, &mut s.drift);
        state.rng.fill_normal(&mut s.xi);
        add_noise(&s.drift, &s.xi, self.delta, &mut s.proposal);
        check_finite(&s.proposal, "prox ula step", state.n)?;
        let jump = s.proposal.dist_sq(&state.theta);
        accept_into(state, &s.proposal, true);
        Ok(StepOutcome {
            accepted: true,
            log_acceptance: None,
            proposal_jump_sq: jump,
            jump_sq: jump,
        })
    }
}

/// `log A` shared by the two Metropolized proximal kernels, with
/// `fwd = mean(theta, P(theta))` and `back = mean(Y, P(Y))`.
fn proximal_log_acceptance<T: Real>(
    target: &CompositeTarget<T>,
    theta: &Field<T>,
    proposal: &Field<T>,
    fwd: &Field<T>,
    back: &Field<T>,
    delta: T,
) -> Result<T> {
    let four_delta = T::lit(4.0) * delta;
    Ok(-(target.energy(proposal)? - target.energy(theta)?) - theta.dist_sq(back) / four_delta
        + proposal.dist_sq(fwd) / four_delta)
}

/// Proximal MALA: the prox at the current point is carried over from the
/// previous accept/reject step, so each iteration solves one prox at `Y`.
#[derive(Debug)]
pub struct ProxMala<'a, T> {
    target: &'a CompositeTarget<T>,
    delta: T,
    moreau: MoreauConfig<T>,
    scratch: Scratch<T>,
}

impl<'a, T: Real> ProxMala<'a, T> {
    pub fn new(target: &'a CompositeTarget<T>, delta: T, moreau: MoreauConfig<T>) -> Self {
        Self {
            target,
            delta,
            moreau,
            scratch: Scratch::new(target.param_shape()),
        }
    }
}

impl<T: Real> Kernel<T> for ProxMala<'_, T> {
    fn kind(&self) -> SamplerKind {
        SamplerKind::ProxMala
    }

    fn energy(&self, theta: &Field<T>) -> Result<T> {
        self.target.energy(theta)
    }

    fn prepare<R: NoiseSource>(&mut self, state: &mut ChainState<T, R>) -> Result<()> {
        if state.prox_cache.is_none() {
            let p = prox::prox_energy(&state.theta, self.target, &self.moreau, ProxMode::Exact)?;
            state.prox_cache = Some(p.point);
        }
        Ok(())
    }

    fn step<R: NoiseSource>(&mut self, state: &mut ChainState<T, R>) -> Result<StepOutcome<T>> {
        self.prepare(state)?;
        let (delta, rho) = (self.delta, self.moreau.rho);
        let s = &mut self.scratch;
        let cached = state.prox_cache.as_ref().expect("prepared");
        relaxed_mean(&state.theta, cached, delta, rho, &mut s.drift);
        state.rng.fill_normal(&mut s.xi);
        add_noise(&s.drift, &s.xi, delta, &mut s.proposal);
        check_finite(&s.proposal, "prox mala proposal", state.n)?;
        let p_y = prox::prox_energy(&s.proposal, self.target, &self.moreau, ProxMode::Exact)?.point;
        relaxed_mean(&s.proposal, &p_y, delta, rho, &mut s.back);
        let log_a = proximal_log_acceptance(self.target, &state.theta, &s.proposal, &s.drift, &s.back, delta)?;
        let accepted = metropolis(&mut state.rng, log_a);
        let jump = s.proposal.dist_sq(&state.theta);
        if accepted {
            state.prox_cache = Some(p_y);
        }
        accept_into(state, &s.proposal, accepted);
        Ok(StepOutcome {
            accepted,
            log_acceptance: Some(log_a),
            proposal_jump_sq: jump,
            jump_sq: if accepted { jump } else { T::zero() },
        })
    }
}

fn record_dual<T: Real, R: NoiseSource>(state: &mut ChainState<T, R>, dual: &Field<T>) {
    match &mut state.last_dual {
        Some(v) if v.same_shape(dual) => v.copy_from(dual),
        slot => *slot = Some(dual.clone()),
    }
}

/// ULA with the prox replaced by K PDFP iterations from `(theta, 0)`.
#[derive(Debug)]
pub struct UlaPdfp<'a, T> {
    target: &'a CompositeTarget<T>,
    delta: T,
    rho: T,
    k: usize,
    params: PdfpParams<T>,
    solver: KStepSolver<T>,
    scratch: Scratch<T>,
}

impl<'a, T: Real> UlaPdfp<'a, T> {
    pub fn new(target: &'a CompositeTarget<T>, cfg: &SamplerConfig<T>) -> Result<Self> {
        cfg.validate(SamplerKind::UlaPdfp, target)?;
        Ok(Self {
            target,
            delta: cfg.delta,
            rho: cfg.rho,
            k: cfg.k,
            params: cfg.pdfp_params(target),
            solver: KStepSolver::new(target.problem().op()),
            scratch: Scratch::new(target.param_shape()),
        })
    }
}

impl<T: Real> Kernel<T> for UlaPdfp<'_, T> {
    fn kind(&self) -> SamplerKind {
        SamplerKind::UlaPdfp
    }

    fn energy(&self, theta: &Field<T>) -> Result<T> {
        self.target.energy(theta)
    }

    fn step<R: NoiseSource>(&mut self, state: &mut ChainState<T, R>) -> Result<StepOutcome<T>> {
        let s = &mut self.scratch;
        let x_k = self
            .solver
            .solve(&state.theta, self.rho, self.target.problem(), &self.params, self.k)?;
        relaxed_mean(&state.theta, x_k, self.delta, self.rho, &mut s.drift);
        record_dual(state, self.solver.dual());
        state.rng.fill_normal(&mut s.xi);
        add_noise(&s.drift, &s.xi, self.delta, &mut s.proposal);
        check_finite(&s.proposal, "ula-pdfp step", state.n)?;
        let jump = s.proposal.dist_sq(&state.theta);
        accept_into(state, &s.proposal, true);
        Ok(StepOutcome {
            accepted: true,
            log_acceptance: None,
            proposal_jump_sq: jump,
            jump_sq: jump,
        })
    }
}

/// MALA with K-step PDFP proximal points and a cache `P_n`.
///
/// `P_n` is replaced by the K-step output at the proposal on acceptance and
/// kept on rejection. Once the chain has accepted a move, `P_n` is a
/// deterministic function of `theta_n`, so the acceptance ratio is an exact
/// Metropolis-Hastings ratio for the proposal it actually uses.
#[derive(Debug)]
pub struct MalaPdfp<'a, T> {
    target: &'a CompositeTarget<T>,
    delta: T,
    rho: T,
    k: usize,
    p0: P0Init,
    params: PdfpParams<T>,
    solver: KStepSolver<T>,
    scratch: Scratch<T>,
}

impl<'a, T: Real> MalaPdfp<'a, T> {
    pub fn new(target: &'a CompositeTarget<T>, cfg: &SamplerConfig<T>) -> Result<Self> {
        cfg.validate(SamplerKind::MalaPdfp, target)?;
        Ok(Self {
            target,
            delta: cfg.delta,
            rho: cfg.rho,
            k: cfg.k,
            p0: cfg.p0,
            params: cfg.pdfp_params(target),
            solver: KStepSolver::new(target.problem().op()),
            scratch: Scratch::new(target.param_shape()),
        })
    }

    /// Fresh K-step output at `theta`, as the cache would hold it.
    pub fn kstep_at(&mut self, theta: &Field<T>) -> Result<Field<T>> {
        Ok(self
            .solver
            .solve(theta, self.rho, self.target.problem(), &self.params, self.k)?
            .clone())
    }
}

impl<T: Real> Kernel<T> for MalaPdfp<'_, T> {
    fn kind(&self) -> SamplerKind {
        SamplerKind::MalaPdfp
    }

    fn energy(&self, theta: &Field<T>) -> Result<T> {
        self.target.energy(theta)
    }

    fn prepare<R: NoiseSource>(&mut self, state: &mut ChainState<T, R>) -> Result<()> {
        if state.prox_cache.is_none() {
            let p0 = match self.p0 {
                P0Init::Literal => state.theta.clone(),
                P0Init::KStep => self.kstep_at(&state.theta)?,
            };
            state.prox_cache = Some(p0);
        }
        Ok(())
    }

    fn step<R: NoiseSource>(&mut self, state: &mut ChainState<T, R>) -> Result<StepOutcome<T>> {
        self.prepare(state)?;
        let (delta, rho) = (self.delta, self.rho);
        let s = &mut self.scratch;
        let cached = state.prox_cache.as_ref().expect("prepared");
        relaxed_mean(&state.theta, cached, delta, rho, &mut s.drift);
        state.rng.fill_normal(&mut s.xi);
        add_noise(&s.drift, &s.xi, delta, &mut s.proposal);
        check_finite(&s.proposal, "mala-pdfp proposal", state.n)?;

        let p_tmp = self
            .solver
            .solve(&s.proposal, rho, self.target.problem(), &self.params, self.k)?;
        relaxed_mean(&s.proposal, p_tmp, delta, rho, &mut s.back);
        let log_a = proximal_log_acceptance(self.target, &state.theta, &s.proposal, &s.drift, &s.back, delta)?;
        let accepted = metropolis(&mut state.rng, log_a);
        let jump = s.proposal.dist_sq(&state.theta);
        if accepted {
            let cache = state.prox_cache.as_mut().expect("prepared");
            cache.copy_from(p_tmp);
        }
        record_dual(state, self.solver.dual());
        accept_into(state, &s.proposal, accepted);
        Ok(StepOutcome {
            accepted,
            log_acceptance: Some(log_a),
            proposal_jump_sq: jump,
            jump_sq: if accepted { jump } else { T::zero() },
        })
    }
}

/// Any of the six kernels, chosen at run time.
#[derive(Debug)]
pub enum AnyKernel<'a, T> {
    Ula(Ula<'a, T>),
    Mala(Mala<'a, T>),
    ProxUla(ProxUla<'a, T>),
    ProxMala(ProxMala<'a, T>),
    UlaPdfp(UlaPdfp<'a, T>),
    MalaPdfp(MalaPdfp<'a, T>),
}

impl<'a, T: Real> AnyKernel<'a, T> {
    /// Validates `cfg` for `kind` and builds the kernel. The exact-prox kernels
    /// solve to `moreau.exact_tol` with `moreau.rho = cfg.rho`.
    pub fn build(kind: SamplerKind, target: &'a CompositeTarget<T>, cfg: &SamplerConfig<T>) -> Result<Self> {
        cfg.validate(kind, target)?;
        let shape = target.param_shape();
        let moreau = || -> Result<MoreauConfig<T>> {
            let mut m = MoreauConfig::new(cfg.rho)?;
            m.gamma = cfg.gamma;
            m.lambda = cfg.lambda;
            Ok(m)
        };
        let smooth = target.problem().smooth();
        Ok(match kind {
            SamplerKind::Ula => AnyKernel::Ula(Ula::new(smooth, cfg.delta, shape)),
            SamplerKind::Mala => AnyKernel::Mala(Mala::new(smooth, cfg.delta, shape)),
            SamplerKind::ProxUla => AnyKernel::ProxUla(ProxUla::new(target, cfg.delta, moreau()?)),
            SamplerKind::ProxMala => AnyKernel::ProxMala(ProxMala::new(target, cfg.delta, moreau()?)),
            SamplerKind::UlaPdfp => AnyKernel::UlaPdfp(UlaPdfp::new(target, cfg)?),
            SamplerKind::MalaPdfp => AnyKernel::MalaPdfp(MalaPdfp::new(target, cfg)?),
        })
    }
}

macro_rules! dispatch {
    ($self:ident, $k:ident => $e:expr) => {
        match $self {
            AnyKernel::Ula($k) => $e,
            AnyKernel::Mala($k) => $e,
            AnyKernel::ProxUla($k) => $e,
            AnyKernel::ProxMala($k) => $e,
            AnyKernel::UlaPdfp($k) => $e,
            AnyKernel::MalaPdfp($k) => $e,
        }
    };
}

impl<T: Real> Kernel<T> for AnyKernel<'_, T> {
    fn kind(&self) -> SamplerKind {
        dispatch!(self, k => k.kind())
    }

    fn energy(&self, theta: &Field<T>) -> Result<T> {
        dispatch!(self, k => k.energy(theta))
    }

    fn prepare<R: NoiseSource>(&mut self, state: &mut ChainState<T, R>) -> Result<()> {
        dispatch!(self, k => k.prepare(state))
    }

    fn step<R: NoiseSource>(&mut self, state: &mut ChainState<T, R>) -> Result<StepOutcome<T>> {
        dispatch!(self, k => k.step(state))
    }
}
