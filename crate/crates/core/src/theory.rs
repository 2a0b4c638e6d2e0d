//! Closed-form error bounds for ULA-PDFP and a Monte-Carlo check of the
//! expectation and accumulated-gradient bounds.
//!
//! Notation: `m_rho = m / (1 + rho m)`, `eta` is the K-step contraction rate
//! from [`crate::pdfp::contraction_rate_eta`], `e = eta^K`, `C` bounds the
//! conjugate-prox output, `l = N delta` and `gap = E[U_rho(theta_0) - U_rho(x*)]`.

use std::io::Write;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::pdfp::{self, KStepSolver};
use crate::rng::{ChainRng, NoiseSource};
use crate::samplers::{ChainState, Kernel, SamplerConfig, UlaPdfp};
use crate::scalar::Real;
use crate::target::ToyTarget;

/// Every constant the bounds depend on.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TheoryInputs {
    pub m: f64,
    pub m2: f64,
    pub rho: f64,
    pub delta: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub k: u32,
    pub c: f64,
    pub d: f64,
    /// Total time `N delta`.
    pub l: f64,
    pub rho_min_bbt: f64,
    pub initial_gap: f64,
}

impl TheoryInputs {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("M2", self.m2),
            ("rho", self.rho),
            ("delta", self.delta),
            ("gamma", self.gamma),
            ("lambda", self.lambda),
            ("d", self.d),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::param(name, "must be positive and finite"));
            }
        }
        let nonneg = [
            ("m", self.m),
            ("C", self.c),
            ("l", self.l),
            ("rho_min_bbt", self.rho_min_bbt),
            ("initial_gap", self.initial_gap),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::param(name, "must be nonnegative and finite"));
            }
        }
        if self.delta > self.rho {
            return Err(Error::param("delta", "must not exceed rho"));
        }
        Ok(())
    }

    pub fn m_rho(&self) -> f64 {
        moreau_strong_convexity(self.m, self.rho)
    }

    pub fn eta(&self) -> f64 {
        pdfp::contraction_rate_eta(self.m, self.rho, self.m2, self.gamma, self.lambda, self.rho_min_bbt).eta
    }

    /// `eta^K`, or a hypothesis error when `eta >= 1`.
    pub fn eta_k(&self) -> Result<f64> {
        self.validate()?;
        let eta = self.eta();
        if !(eta < 1.0) {
            return Err(Error::Hypothesis(format!(
                "contraction rate eta = {eta} is not below 1 (needs m > 0 or rho_min(BB^T) > 0 and a valid gamma)"
            )));
        }
        Ok(eta.powi(self.k as i32))
    }

    fn require_strong_convexity(&self) -> Result<()> {
        if !(self.m > 0.0) {
            return Err(Error::Hypothesis("the bound needs m > 0".into()));
        }
        Ok(())
    }
}

/// `m / (1 + rho m)`, the strong-convexity constant of `U_rho`.
pub fn moreau_strong_convexity(m: f64, rho: f64) -> f64 {
    m / (1.0 + rho * m)
}

/// `(1 - m_rho delta (1 - e))^n gap + (2 d lambda rho + gamma^2 C^2 e) / (2 lambda rho^2 m_rho (1 - e))`.
pub fn expectation_bound(inp: &TheoryInputs, n: u64) -> Result<f64> {
    inp.require_strong_convexity()?;
    let e = inp.eta_k()?;
    let m_rho = inp.m_rho();
    let factor = (1.0 - m_rho * inp.delta * (1.0 - e)).powf(n as f64);
    Ok(factor * inp.initial_gap + expectation_floor(inp, e, m_rho))
}

/// Limit of [`expectation_bound`] as `n -> infinity`.
pub fn expectation_bound_limit(inp: &TheoryInputs) -> Result<f64> {
    inp.require_strong_convexity()?;
    let e = inp.eta_k()?;
    Ok(expectation_floor(inp, e, inp.m_rho()))
}

fn expectation_floor(inp: &TheoryInputs, e: f64, m_rho: f64) -> f64 {
    let TheoryInputs {
        d, lambda, rho, gamma, c, ..
    } = *inp;
    (2.0 * d * lambda * rho + gamma * gamma * c * c * e) / (2.0 * lambda * rho * rho * m_rho * (1.0 - e))
}

/// Right-hand sides of the three accumulated-sum bounds over `N = l / delta` steps:
/// `delta sum E|grad U_rho(theta_n)|^2`, `delta sum E|(x_K - prox)/rho|^2` and
/// `delta sum E|(theta_n - x_K)/rho|^2`.
pub fn gradient_sum_bounds(inp: &TheoryInputs) -> Result<[f64; 3]> {
    let e = inp.eta_k()?;
    let TheoryInputs {
        d,
        lambda,
        rho,
        gamma,
        c,
        l,
        initial_gap: gap,
        ..
    } = *inp;
    let g2c2 = gamma * gamma * c * c;
    let denom = lambda * rho * rho * (1.0 - e);
    // N delta = l
    let grad = 2.0 / (1.0 - e) * gap + l * (2.0 * d * lambda * rho + g2c2 * e) / denom;
    let err = 2.0 * e / (1.0 - e) * gap + l * e * (2.0 * d * lambda * rho + g2c2) / denom;
    let step = 4.0 * (1.0 + e) / (1.0 - e) * gap
        + 4.0 * l * (d * lambda * rho * (1.0 + e) + g2c2 * e) / denom;
    Ok([grad, err, step])
}

/// Bound on `KL(P_L || P_D)` over `[0, l]` started at a point with gap `gap`.
pub fn kl_bound(inp: &TheoryInputs) -> Result<f64> {
    let e = inp.eta_k()?;
    let TheoryInputs {
        d,
        lambda,
        rho,
        gamma,
        c,
        l,
        delta,
        initial_gap: gap,
        ..
    } = *inp;
    let (d2, r2) = (delta * delta, rho * rho);
    let first = (2.0 * d2 * (1.0 + e) + 3.0 * r2 * e) / (3.0 * r2 * (1.0 - e)) * gap;
    let num = l * d * lambda * rho * (4.0 * d2 * (1.0 + e) + 3.0 * delta * rho * (1.0 - e) + 6.0 * r2 * e)
        + l * gamma * gamma * c * c * e * (4.0 * d2 + 3.0 * r2);
    Ok(first + num / (6.0 * lambda * r2 * r2 * (1.0 - e)))
}

/// The two terms of the total-variation bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TvBound {
    /// `exp(-(d/4) log(rho m_rho) - l m_rho / 2) / 2`.
    pub mixing: f64,
    /// The square-root discretization and inexactness term.
    pub discretization: f64,
}

impl TvBound {
    pub fn total(&self) -> f64 {
        self.mixing + self.discretization
    }
}

/// Bound on the TV distance between the law of `theta_N` started from
/// `N(x*, rho I)` and `pi_rho`.
pub fn tv_bound(inp: &TheoryInputs) -> Result<TvBound> {
    inp.require_strong_convexity()?;
    let e = inp.eta_k()?;
    let m_rho = inp.m_rho();
    let TheoryInputs {
        d,
        lambda,
        rho,
        gamma,
        c,
        l,
        delta,
        ..
    } = *inp;
    let mixing = 0.5 * (-(d / 4.0) * (rho * m_rho).ln() - l * m_rho / 2.0).exp();
    let (d2, r2) = (delta * delta, rho * rho);
    let base = lambda * d * (2.0 * d2 * r2 + 4.0 * l * d2 * rho + 3.0 * l * delta * r2);
    let inexact = lambda
        * d
        * (2.0 * d2 * r2 + 3.0 * r2 * r2 + 4.0 * l * d2 * rho - 3.0 * l * delta * r2 + 6.0 * l * r2 * rho)
        + l * gamma * gamma * c * c * (4.0 * d2 + 3.0 * r2);
    let discretization = ((base + e * inexact) / (12.0 * lambda * r2 * r2 * (1.0 - e))).sqrt();
    Ok(TvBound {
        mixing,
        discretization,
    })
}

// a zero bound (eta = 0) is met only up to floating-point rounding
const ROUNDING: f64 = 1e-12;

/// Settings of [`empirical_bound_check`].
#[derive(Clone, Debug, PartialEq)]
pub struct BoundCheckConfig {
    pub delta: f64,
    pub rho: f64,
    pub k: usize,
    pub n_chains: usize,
    /// Steps at which `E[U_rho(theta_n) - U_rho(x*)]` is compared.
    pub checkpoints: Vec<usize>,
    pub seed: u64,
    /// Chains start at `x* + offset + spread * xi`.
    pub init_offset: f64,
    pub init_spread: f64,
    /// Width of the Monte-Carlo slack in standard errors.
    pub sigmas: f64,
    /// Multipliers on the default inner step sizes. At `1, 1` the toy with
    /// `B = I` has `eta = 0`, so one inner step is already exact.
    pub gamma_scale: f64,
    pub lambda_scale: f64,
}

impl BoundCheckConfig {
    pub fn new(delta: f64, rho: f64, k: usize) -> Self {
        Self {
            delta,
            rho,
            k,
            n_chains: 200,
            checkpoints: vec![0, 10, 100, 1000],
            seed: 0,
            init_offset: 2.0,
            init_spread: rho.sqrt(),
            sigmas: 3.0,
            gamma_scale: 1.0,
            lambda_scale: 1.0,
        }
    }
}

/// Empirical mean against a bound.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundRow {
    pub quantity: String,
    pub n: usize,
    pub empirical: f64,
    pub stderr: f64,
    pub bound: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundReport {
    pub inputs: TheoryInputs,
    pub rows: Vec<BoundRow>,
}

impl BoundReport {
    pub fn all_hold(&self) -> bool {
        self.rows.iter().all(|r| r.holds)
    }

    /// CSV with header `quantity,n,empirical,stderr,bound,holds`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "quantity,n,empirical,stderr,bound,holds")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{:.9e},{:.9e},{:.9e},{}",
                r.quantity, r.n, r.empirical, r.stderr, r.bound, r.holds
            )?;
        }
        Ok(())
    }
}

/// Runs independent ULA-PDFP chains on a toy target (with `B = I`, so every
/// hypothesis of the bounds holds) and compares Monte-Carlo estimates of
/// `E[U_rho(theta_n) - U_rho(x*)]` and of the three accumulated sums with
/// their bounds. The initial gap in the bounds is the Monte-Carlo estimate at
/// `n = 0`.
pub fn empirical_bound_check<T: Real>(toy: &ToyTarget<T>, cfg: &BoundCheckConfig) -> Result<BoundReport> {
    let target = &toy.target;
    let problem = target.problem();
    let m = problem.strong_convexity().to_f64_lossy();
    let rho_min = problem.bbt_min().to_f64_lossy();
    if !(m > 0.0) || !(rho_min > 0.0) {
        return Err(Error::Hypothesis(format!(
            "bounds need m > 0 and rho_min(BB^T) > 0, got m = {m}, rho_min = {rho_min}"
        )));
    }
    if cfg.n_chains < 2 || cfg.checkpoints.is_empty() {
        return Err(Error::param("n_chains", "need at least 2 chains and one checkpoint"));
    }
    let rho = T::lit(cfg.rho);
    let mut scfg = SamplerConfig::new(T::lit(cfg.delta)).with_rho(rho).with_k(cfg.k);
    let base = scfg.pdfp_params(target);
    scfg.gamma = Some(base.gamma * T::lit(cfg.gamma_scale));
    scfg.lambda = Some(base.lambda * T::lit(cfg.lambda_scale));
    let params = scfg.pdfp_params(target);
    let horizon = *cfg.checkpoints.iter().max().expect("non-empty");
    let shape = target.param_shape().to_vec();
    // both toys are minimized at the origin
    let x_star = Field::zeros(&shape);
    let env_star = envelope(toy, &x_star, rho)?;

    let mut gaps = vec![Vec::with_capacity(cfg.n_chains); cfg.checkpoints.len()];
    let mut sums = [
        Vec::with_capacity(cfg.n_chains),
        Vec::with_capacity(cfg.n_chains),
        Vec::with_capacity(cfg.n_chains),
    ];
    let mut solver = KStepSolver::new(problem.op());
    for chain in 0..cfg.n_chains {
        let mut rng = ChainRng::new(cfg.seed, chain as u64);
        let mut theta = x_star.clone();
        for v in theta.as_mut_slice() {
            *v += T::lit(cfg.init_offset + cfg.init_spread * rng.normal());
        }
        let mut kernel = UlaPdfp::new(target, &scfg)?;
        let mut state = ChainState::new(theta, rng);
        let mut acc = [0.0f64; 3];
        for n in 0..=horizon {
            if let Some(i) = cfg.checkpoints.iter().position(|&c| c == n) {
                gaps[i].push((envelope(toy, &state.theta, rho)? - env_star).to_f64_lossy());
            }
            if n == horizon {
                break;
            }
            let prox = toy.exact_prox(&state.theta, rho);
            let x_k = solver.solve(&state.theta, rho, problem, &params, cfg.k)?;
            let r2 = cfg.rho * cfg.rho;
            acc[0] += cfg.delta * state.theta.dist_sq(&prox).to_f64_lossy() / r2;
            acc[1] += cfg.delta * x_k.dist_sq(&prox).to_f64_lossy() / r2;
            acc[2] += cfg.delta * state.theta.dist_sq(x_k).to_f64_lossy() / r2;
            kernel.step(&mut state)?;
        }
        for (s, a) in sums.iter_mut().zip(acc) {
            s.push(a);
        }
    }

    let (gap0, _) = mean_stderr(&gaps[cfg.checkpoints.iter().position(|&c| c == 0).unwrap_or(0)]);
    let inputs = TheoryInputs {
        m,
        m2: problem.lipschitz().to_f64_lossy(),
        rho: cfg.rho,
        delta: cfg.delta,
        gamma: params.gamma.to_f64_lossy(),
        lambda: params.lambda.to_f64_lossy(),
        k: cfg.k as u32,
        c: target.dual_bound().to_f64_lossy(),
        d: target.dim() as f64,
        l: horizon as f64 * cfg.delta,
        rho_min_bbt: rho_min,
        initial_gap: gap0.max(0.0),
    };
    let mut rows = Vec::new();
    for (i, &n) in cfg.checkpoints.iter().enumerate() {
        let (mean, se) = mean_stderr(&gaps[i]);
        let bound = expectation_bound(&inputs, n as u64)?;
        rows.push(BoundRow {
            quantity: "expectation".into(),
            n,
            empirical: mean,
            stderr: se,
            bound,
            holds: mean <= bound + cfg.sigmas * se + ROUNDING,
        });
    }
    let bounds = gradient_sum_bounds(&inputs)?;
    for ((name, samples), bound) in ["grad_sum", "error_sum", "step_sum"].iter().zip(&sums).zip(bounds) {
        let (mean, se) = mean_stderr(samples);
        rows.push(BoundRow {
            quantity: (*name).into(),
            n: horizon,
            empirical: mean,
            stderr: se,
            bound,
            holds: mean <= bound + cfg.sigmas * se + ROUNDING,
        });
    }
    Ok(BoundReport { inputs, rows })
}

/// `U_rho(theta)` from the toy's closed-form prox.
fn envelope<T: Real>(toy: &ToyTarget<T>, theta: &Field<T>, rho: T) -> Result<T> {
    let p = toy.exact_prox(theta, rho);
    crate::prox::moreau_value_at(theta, &p, &toy.target, rho)
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
