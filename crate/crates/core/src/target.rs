//! Concrete composite targets `pi ∝ exp(-U)` with `U = f + g(B .)`.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::operator::{self, LinearMap};
use crate::pdfp::{self, CompositeProblem};
use crate::prox::SeparablePenalty;
use crate::scalar::Real;
use crate::smooth::LeastSquares;

/// Energy `U(theta) = f(theta) + g(B theta)` together with the constants the
/// solvers need.
#[derive(Clone, Debug)]
pub struct CompositeTarget<T> {
    problem: CompositeProblem<T>,
    label: String,
}

impl<T: Real> CompositeTarget<T> {
    pub fn new(problem: CompositeProblem<T>, label: impl Into<String>) -> Self {
        Self {
            problem,
            label: label.into(),
        }
    }

    pub fn problem(&self) -> &CompositeProblem<T> {
        &self.problem
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn param_shape(&self) -> &[usize] {
        self.problem.op().domain_shape()
    }

    pub fn dim(&self) -> usize {
        self.problem.op().domain_len()
    }

    /// `U(theta)`.
    pub fn energy(&self, theta: &Field<T>) -> Result<T> {
        self.problem.objective(theta)
    }

    pub fn smooth_gradient(&self, theta: &Field<T>) -> Result<Field<T>> {
        self.problem.smooth().gradient(theta)
    }

    /// `C = weight * sqrt(dual dimension)`.
    pub fn dual_bound(&self) -> T {
        self.problem
            .penalty()
            .dual_bound(self.problem.op().range_len())
    }

    /// Minimizer of `U`, by PDFP with tolerance `tol` from `start`.
    pub fn minimizer(&self, start: &Field<T>, tol: T, max_iters: usize) -> Result<Field<T>> {
        let params = self.problem.default_params();
        let sol = pdfp::pdfp_solve(
            &self.problem,
            &params,
            start.clone(),
            Field::zeros(self.problem.op().range_shape()),
            pdfp::Stopping::Tolerance { tol, max_iters },
        )?;
        Ok(sol.x)
    }
}

/// How the deblurring observation is perturbed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Noise {
    /// `y = A x` exactly.
    None,
    /// `y = A x + sigma * xi`, `xi` standard normal from a ChaCha8 stream.
    Seeded(u64),
}

/// Gaussian deblurring posterior with a total-variation prior.
#[derive(Clone, Debug)]
pub struct DeblurModel<T> {
    pub observation: Field<T>,
    pub forward: LinearMap<T>,
    pub sigma: T,
    pub lambda_reg: T,
    pub ridge: T,
}

impl<T: Real> DeblurModel<T> {
    /// `lambda_max(A^T A) / sigma^2 + ridge`.
    pub fn lipschitz(&self) -> Result<T> {
        Ok(pdfp::spectral_radius_bbt(&self.forward)? / (self.sigma * self.sigma) + self.ridge)
    }
}

/// Builds `y = A(truth) + noise` and the posterior
/// `U(theta) = |y - A theta|^2 / (2 sigma^2) + ridge |theta|^2 / 2 + lambda_reg |grad theta|_1`.
pub fn make_deblur_model<T: Real>(
    truth: &Field<T>,
    kernel: &Field<T>,
    sigma: T,
    lambda_reg: T,
    ridge: T,
    noise: Noise,
) -> Result<(DeblurModel<T>, CompositeTarget<T>)> {
    if !(sigma > T::zero()) {
        return Err(Error::param("sigma", "must be positive"));
    }
    let forward = LinearMap::convolution(kernel, truth.shape())?;
    let mut observation = forward.apply(truth)?;
    if let Noise::Seeded(seed) = noise {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for y in observation.as_mut_slice() {
            let xi: f64 = StandardNormal.sample(&mut rng);
            *y += sigma * T::lit(xi);
        }
    }
    let model = DeblurModel {
        observation: observation.clone(),
        forward: forward.clone(),
        sigma,
        lambda_reg,
        ridge,
    };
    let lipschitz = model.lipschitz()?;
    let smooth = LeastSquares::new(forward, observation, sigma, ridge)?;
    let problem = CompositeProblem::new(
        Arc::new(smooth),
        lipschitz,
        ridge,
        LinearMap::gradient(truth.shape())?,
        SeparablePenalty::l1(lambda_reg)?,
    )?;
    Ok((model, CompositeTarget::new(problem, "deblur")))
}

/// `1 x len` horizontal motion blur with uniform weights.
pub fn motion_blur_kernel<T: Real>(len: usize) -> Result<Field<T>> {
    if len == 0 {
        return Err(Error::param("kernel_len", "must be positive"));
    }
    Ok(Field::filled(&[1, len], T::one() / T::from_usize_lossy(len)))
}

/// Piecewise-constant test image in `[0, 1]`: a background, a bright square, a
/// darker disc and a thin bar. Any size of at least `8 x 8`.
pub fn phantom<T: Real>(rows: usize, cols: usize) -> Result<Field<T>> {
    if rows < 8 || cols < 8 {
        return Err(Error::Shape(format!(
            "phantom needs at least 8x8, got {rows}x{cols}"
        )));
    }
    let mut data = Vec::with_capacity(rows * cols);
    let (h, w) = (rows as f64, cols as f64);
    for i in 0..rows {
        for j in 0..cols {
            let (y, x) = ((i as f64 + 0.5) / h, (j as f64 + 0.5) / w);
            let mut v = 0.1;
            if (0.15..0.55).contains(&y) && (0.12..0.5).contains(&x) {
                v = 0.9;
            }
            let (dy, dx) = (y - 0.62, x - 0.68);
            if dy * dy + dx * dx < 0.22 * 0.22 {
                v = 0.5;
            }
            if (0.8..0.88).contains(&y) && (0.1..0.9).contains(&x) {
                v = 0.7;
            }
            data.push(T::lit(v));
        }
    }
    Field::from_vec(&[rows, cols], data)
}

/// Analytic toy energies with `B = I`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ToyKind {
    /// `U(x) = |x|^2 / 2 + |x|_1`.
    LassoPosterior,
    /// `U(x) = |x|^2 / 2`.
    Gaussian,
}

/// A toy target whose coordinates are iid with a known one-dimensional law.
#[derive(Clone, Debug)]
pub struct ToyTarget<T> {
    pub kind: ToyKind,
    pub target: CompositeTarget<T>,
    cdf: CdfTable,
}

impl<T: Real> ToyTarget<T> {
    pub fn dim(&self) -> usize {
        self.target.dim()
    }

    /// Marginal CDF of one coordinate.
    pub fn cdf(&self, x: f64) -> f64 {
        self.cdf.eval(x)
    }

    pub fn cdf_table(&self) -> &CdfTable {
        &self.cdf
    }

    /// `prox_{rho U}(theta)` in closed form: `soft(theta, rho) / (1 + rho)` for
    /// the lasso toy and `theta / (1 + rho)` for the Gaussian.
    pub fn exact_prox(&self, theta: &Field<T>, rho: T) -> Field<T> {
        let scale = T::one() / (T::one() + rho);
        match self.kind {
            ToyKind::LassoPosterior => theta.map(|v| {
                let s = if v > rho {
                    v - rho
                } else if v < -rho {
                    v + rho
                } else {
                    T::zero()
                };
                s * scale
            }),
            ToyKind::Gaussian => theta.scaled(scale),
        }
    }
}

/// Composite Simpson range and panel count used for toy CDFs.
pub const TOY_QUAD_RANGE: f64 = 12.0;
pub const TOY_QUAD_PANELS: usize = 1_000_000;

/// One-dimensional toy with `m = M2 = 1`.
pub fn make_toy_1d<T: Real>(kind: ToyKind) -> Result<ToyTarget<T>> {
    make_toy(kind, 1)
}

/// Toy of dimension `dim` (iid coordinates).
pub fn make_toy<T: Real>(kind: ToyKind, dim: usize) -> Result<ToyTarget<T>> {
    if dim == 0 {
        return Err(Error::param("dim", "must be positive"));
    }
    let shape = [dim];
    let f = LeastSquares::new(LinearMap::identity(&shape), Field::zeros(&shape), T::one(), T::zero())?;
    let (weight, label) = match kind {
        ToyKind::LassoPosterior => (T::one(), "toy-lasso"),
        ToyKind::Gaussian => (T::zero(), "toy-gaussian"),
    };
    let problem = CompositeProblem::new(
        Arc::new(f),
        T::one(),
        T::one(),
        LinearMap::identity(&shape),
        SeparablePenalty::l1(weight)?,
    )?;
    let w = weight.to_f64_lossy();
    let cdf = CdfTable::simpson(
        move |x: f64| (-0.5 * x * x - w * x.abs()).exp(),
        TOY_QUAD_RANGE,
        TOY_QUAD_PANELS,
    );
    Ok(ToyTarget {
        kind,
        target: CompositeTarget::new(problem, label),
        cdf,
    })
}

/// Cumulative integral of an unnormalized density on `[-range, range]`, by
/// composite Simpson over panel pairs.
#[derive(Clone, Debug)]
pub struct CdfTable {
    lo: f64,
    step: f64,
    cumulative: Vec<f64>,
    density: Density,
    total: f64,
}

#[derive(Clone)]
struct Density(Arc<dyn Fn(f64) -> f64 + Send + Sync>);

impl std::fmt::Debug for Density {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("Density")
    }
}

impl CdfTable {
    pub fn simpson(density: impl Fn(f64) -> f64 + Send + Sync + 'static, range: f64, panels: usize) -> Self {
        let panels = panels + panels % 2;
        let h = 2.0 * range / panels as f64;
        let lo = -range;
        let pairs = panels / 2;
        let mut cumulative = Vec::with_capacity(pairs + 1);
        cumulative.push(0.0);
        let mut acc = 0.0;
        let mut left = density(lo);
        for k in 0..pairs {
            let x0 = lo + 2.0 * k as f64 * h;
            let mid = density(x0 + h);
            let right = density(x0 + 2.0 * h);
            acc += h / 3.0 * (left + 4.0 * mid + right);
            cumulative.push(acc);
            left = right;
        }
        Self {
            lo,
            step: 2.0 * h,
            cumulative,
            density: Density(Arc::new(density)),
            total: acc,
        }
    }

    /// Integral of the unnormalized density over the quadrature range.
    pub fn normalizer(&self) -> f64 {
        self.total
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.lo {
            return 0.0;
        }
        let last = self.cumulative.len() - 1;
        let pos = (x - self.lo) / self.step;
        if pos >= last as f64 {
            return 1.0;
        }
        let i = pos.floor() as usize;
        let x0 = self.lo + i as f64 * self.step;
        let dx = x - x0;
        let (d0, dm, d1) = (
            (self.density.0)(x0),
            (self.density.0)(x0 + dx / 2.0),
            (self.density.0)(x),
        );
        let partial = dx / 6.0 * (d0 + 4.0 * dm + d1);
        ((self.cumulative[i] + partial) / self.total).clamp(0.0, 1.0)
    }
}

/// Ill-posed linear inverse problem with a dense forward map whose singular
/// values decay geometrically from 1 to `1 / condition`.
///
/// `param_shape` is `[d]` (then `B = I`) or `[h, w]` (then `B` is the discrete
/// gradient). The rank of `A` is `min(dim_obs, d)`.
pub fn make_illposed_dense<T: Real>(
    dim_obs: usize,
    param_shape: &[usize],
    condition: f64,
    sigma: T,
    lambda_reg: T,
    ridge: T,
    seed: u64,
) -> Result<(DeblurModel<T>, CompositeTarget<T>)> {
    if !(condition >= 1.0) {
        return Err(Error::param("condition", "must be at least 1"));
    }
    if !(sigma > T::zero()) {
        return Err(Error::param("sigma", "must be positive"));
    }
    let d: usize = param_shape.iter().product();
    let rank = dim_obs.min(d);
    let singular = geometric_decay(rank, condition);
    let forward = operator::dense_with_singular_values::<T>(dim_obs, d, &singular, seed)?
        .with_domain_shape(param_shape)?;
    let penalty_op = match param_shape.len() {
        1 => LinearMap::identity(param_shape),
        2 => LinearMap::gradient(param_shape)?,
        _ => {
            return Err(Error::Shape(format!(
                "parameter shape must be 1-D or 2-D, got {param_shape:?}"
            )))
        }
    };
    // observation generated from a smooth bump
    let truth = Field::from_vec(
        param_shape,
        (0..d)
            .map(|i| T::lit((std::f64::consts::PI * (i as f64 + 0.5) / d as f64).sin()))
            .collect(),
    )?;
    let mut observation = forward.apply(&truth)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    for y in observation.as_mut_slice() {
        let xi: f64 = StandardNormal.sample(&mut rng);
        *y += sigma * T::lit(xi);
    }
    let s_max = T::lit(singular[0]);
    let lipschitz = s_max * s_max / (sigma * sigma) + ridge;
    let model = DeblurModel {
        observation: observation.clone(),
        forward: forward.clone(),
        sigma,
        lambda_reg,
        ridge,
    };
    let smooth = LeastSquares::new(forward, observation, sigma, ridge)?;
    let problem = CompositeProblem::new(
        Arc::new(smooth),
        lipschitz,
        ridge.min(lipschitz),
        penalty_op,
        SeparablePenalty::l1(lambda_reg)?,
    )?;
    Ok((model, CompositeTarget::new(problem, "illposed")))
}

/// `s_i = condition^(-i / (n - 1))`, `i = 0..n`.
pub fn geometric_decay(n: usize, condition: f64) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| condition.powf(-(i as f64) / (n - 1) as f64))
        .collect()
}
