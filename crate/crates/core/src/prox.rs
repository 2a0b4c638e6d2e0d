//! Proximity operators, conjugate proximity via the Moreau decomposition, and
//! the Moreau envelope of a composite potential.

use crate::error::{Error, Result};
use crate::field::Field;
use crate::pdfp::{self, PdfpParams};
use crate::scalar::Real;
use crate::target::CompositeTarget;

/// Componentwise `sign(x) * max(|x| - t, 0)`, the proximity operator of `t |.|_1`.
pub fn soft_threshold<T: Real>(x: &Field<T>, t: T) -> Result<Field<T>> {
    if !(t > T::zero()) {
        return Err(Error::param("t", "threshold must be positive"));
    }
    Ok(x.map(|v| shrink(v, t)))
}

#[inline]
fn shrink<T: Real>(v: T, t: T) -> T {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        T::zero()
    }
}

/// `g = weight * |.|_1`, applied after the linear operator `B`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeparablePenalty<T> {
    weight: T,
}

impl<T: Real> SeparablePenalty<T> {
    pub fn l1(weight: T) -> Result<Self> {
        if !(weight >= T::zero()) || !weight.is_finite() {
            return Err(Error::param("weight", "must be finite and nonnegative"));
        }
        Ok(Self { weight })
    }

    pub fn weight(&self) -> T {
        self.weight
    }

    pub fn value(&self, z: &Field<T>) -> T {
        self.weight * z.l1_norm()
    }

    /// `prox_{t g}(z)`. With a zero weight this is the identity.
    pub fn prox(&self, z: &Field<T>, t: T) -> Result<Field<T>> {
        if !(t > T::zero()) {
            return Err(Error::param("t", "prox scale must be positive"));
        }
        let thr = t * self.weight;
        Ok(z.map(|v| shrink(v, thr)))
    }

    /// `prox_{s g*}(v)`: the conjugate of a weighted L1 norm is the indicator of
    /// the box `[-weight, weight]`, so this is a clamp and does not depend on `s`.
    pub fn prox_conjugate(&self, v: &Field<T>, s: T) -> Result<Field<T>> {
        if !(s > T::zero()) {
            return Err(Error::param("s", "prox scale must be positive"));
        }
        let mut out = v.clone();
        self.prox_conjugate_in_place(&mut out);
        Ok(out)
    }

    #[inline]
    pub(crate) fn prox_conjugate_in_place(&self, v: &mut Field<T>) {
        let w = self.weight;
        v.as_mut_slice().iter_mut().for_each(|x| *x = x.max(-w).min(w));
    }

    /// `prox_{s g*}(v) = v - s prox_{g/s}(v/s)` computed through the primal prox.
    pub fn prox_conjugate_moreau(&self, v: &Field<T>, s: T) -> Result<Field<T>> {
        if !(s > T::zero()) {
            return Err(Error::param("s", "prox scale must be positive"));
        }
        let inner = self.prox(&v.scaled(T::one() / s), T::one() / s)?;
        Ok(v.lin_comb(T::one(), &inner, -s))
    }

    /// Uniform bound on the norm of any conjugate-prox output for a dual space of
    /// `dual_len` entries: `weight * sqrt(dual_len)`.
    pub fn dual_bound(&self, dual_len: usize) -> T {
        self.weight * T::from_usize_lossy(dual_len).sqrt()
    }
}

/// `prox_{s g*}(v)` for `g = penalty`.
pub fn prox_conjugate_scaled<T: Real>(
    v: &Field<T>,
    s: T,
    penalty: &SeparablePenalty<T>,
) -> Result<Field<T>> {
    penalty.prox_conjugate(v, s)
}

pub const EXACT_TOL: f64 = 1e-10;
pub const EXACT_MAX_INNER: usize = 500;

/// Moreau envelope parameter plus the inner-solver settings used to evaluate
/// `prox_{rho U}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MoreauConfig<T> {
    pub rho: T,
    pub exact_tol: T,
    pub max_inner: usize,
    /// Primal step of the inner solver; defaults to `1 / (M2 + 1/rho)`.
    pub gamma: Option<T>,
    /// Dual step of the inner solver; defaults to `1 / lambda_max(B B^T)`.
    pub lambda: Option<T>,
}

impl<T: Real> MoreauConfig<T> {
    pub fn new(rho: T) -> Result<Self> {
        let cfg = Self {
            rho,
            exact_tol: T::lit(EXACT_TOL),
            max_inner: EXACT_MAX_INNER,
            gamma: None,
            lambda: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_tolerance(mut self, tol: T, max_inner: usize) -> Self {
        self.exact_tol = tol;
        self.max_inner = max_inner;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > T::zero()) {
            return Err(Error::param("rho", "must be positive"));
        }
        if !(self.exact_tol > T::zero()) {
            return Err(Error::param("exact_tol", "must be positive"));
        }
        if self.max_inner == 0 {
            return Err(Error::param("max_inner", "must be positive"));
        }
        Ok(())
    }

    /// Inner PDFP parameters for `target`, filling defaults.
    pub fn pdfp_params(&self, target: &CompositeTarget<T>) -> PdfpParams<T> {
        let defaults = target.problem().default_prox_params(self.rho);
        PdfpParams {
            gamma: self.gamma.unwrap_or(defaults.gamma),
            lambda: self.lambda.unwrap_or(defaults.lambda),
        }
    }
}

/// How hard to solve the proximity subproblem.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProxMode {
    /// Iterate until the primal step falls below `exact_tol` (or `max_inner`).
    Exact,
    /// Exactly `K` inner iterations.
    KSteps(usize),
}

/// Output of [`prox_energy`].
#[derive(Clone, Debug)]
pub struct ProxOutcome<T> {
    pub point: Field<T>,
    pub dual: Field<T>,
    pub iterations: usize,
    pub converged: bool,
}

/// `prox_{rho U}(theta)` for `U = f + g(B .)`, solved by PDFP from the primal
/// start `theta` and dual start `0`.
pub fn prox_energy<T: Real>(
    theta: &Field<T>,
    target: &CompositeTarget<T>,
    cfg: &MoreauConfig<T>,
    mode: ProxMode,
) -> Result<ProxOutcome<T>> {
    cfg.validate()?;
    let params = cfg.pdfp_params(target);
    match mode {
        ProxMode::KSteps(k) => {
            let out = pdfp::kstep_prox_subproblem(theta, cfg.rho, target.problem(), &params, k)?;
            Ok(ProxOutcome {
                point: out.x,
                dual: out.v,
                iterations: k,
                converged: true,
            })
        }
        ProxMode::Exact => pdfp::solve_prox_subproblem(
            theta,
            cfg.rho,
            target.problem(),
            &params,
            cfg.exact_tol,
            cfg.max_inner,
        ),
    }
}

/// `U_rho(theta) = U(p) + |p - theta|^2 / (2 rho)` with `p = prox_{rho U}(theta)`.
pub fn moreau_value<T: Real>(
    theta: &Field<T>,
    target: &CompositeTarget<T>,
    cfg: &MoreauConfig<T>,
) -> Result<T> {
    let p = prox_energy(theta, target, cfg, ProxMode::Exact)?.point;
    moreau_value_at(theta, &p, target, cfg.rho)
}

/// Envelope value given an already computed proximal point.
pub fn moreau_value_at<T: Real>(
    theta: &Field<T>,
    prox_point: &Field<T>,
    target: &CompositeTarget<T>,
    rho: T,
) -> Result<T> {
    Ok(target.energy(prox_point)? + prox_point.dist_sq(theta) / (T::lit(2.0) * rho))
}

/// `grad U_rho(theta) = (theta - prox_{rho U}(theta)) / rho`.
pub fn moreau_gradient<T: Real>(theta: &Field<T>, prox_point: &Field<T>, rho: T) -> Result<Field<T>> {
    if !(rho > T::zero()) {
        return Err(Error::param("rho", "must be positive"));
    }
    prox_point.ensure_shape(theta.shape(), "prox point")?;
    let inv = T::one() / rho;
    Ok(theta.lin_comb(inv, prox_point, -inv))
}
