//! Differentiable terms `f` of a composite potential `U = f + g(B .)`.

use std::fmt::Debug;

use crate::error::Result;
use crate::field::Field;
use crate::operator::LinearMap;
use crate::scalar::Real;

/// A convex, continuously differentiable function with Lipschitz gradient.
pub trait Smooth<T: Real>: Send + Sync + Debug {
    fn value(&self, x: &Field<T>) -> Result<T>;

    /// Writes `grad f(x)` into `out` (same shape as `x`).
    fn gradient_into(&self, x: &Field<T>, out: &mut Field<T>) -> Result<()>;

    fn gradient(&self, x: &Field<T>) -> Result<Field<T>> {
        let mut out = Field::zeros_like(x);
        self.gradient_into(x, &mut out)?;
        Ok(out)
    }
}

/// `f = 0`.
#[derive(Clone, Debug, Default)]
pub struct ZeroSmooth;

impl<T: Real> Smooth<T> for ZeroSmooth {
    fn value(&self, _x: &Field<T>) -> Result<T> {
        Ok(T::zero())
    }

    fn gradient_into(&self, _x: &Field<T>, out: &mut Field<T>) -> Result<()> {
        out.fill(T::zero());
        Ok(())
    }
}

/// Gaussian data fidelity with an optional ridge:
/// `f(x) = |y - A x|^2 / (2 sigma^2) + (ridge / 2) |x|^2`.
#[derive(Clone, Debug)]
pub struct LeastSquares<T> {
    pub forward: LinearMap<T>,
    pub observation: Field<T>,
    pub sigma: T,
    pub ridge: T,
}

impl<T: Real> LeastSquares<T> {
    pub fn new(forward: LinearMap<T>, observation: Field<T>, sigma: T, ridge: T) -> Result<Self> {
        observation.ensure_shape(forward.range_shape(), "observation")?;
        if !(sigma > T::zero()) {
            return Err(crate::Error::param("sigma", "must be positive"));
        }
        if ridge < T::zero() {
            return Err(crate::Error::param("ridge_eps", "must be nonnegative"));
        }
        Ok(Self {
            forward,
            observation,
            sigma,
            ridge,
        })
    }

    fn identity_forward(&self) -> bool {
        self.forward.kind() == crate::operator::MapKind::Identity
    }

    fn residual(&self, x: &Field<T>) -> Result<Field<T>> {
        let mut r = self.forward.apply(x)?;
        r.axpy(-T::one(), &self.observation);
        Ok(r)
    }
}

impl<T: Real> Smooth<T> for LeastSquares<T> {
    fn value(&self, x: &Field<T>) -> Result<T> {
        let two = T::lit(2.0);
        let misfit = if self.identity_forward() {
            x.ensure_shape(self.forward.domain_shape(), "apply input")?;
            x.dist_sq(&self.observation)
        } else {
            self.residual(x)?.norm_sq()
        };
        Ok(misfit / (two * self.sigma * self.sigma) + self.ridge / two * x.norm_sq())
    }

    fn gradient_into(&self, x: &Field<T>, out: &mut Field<T>) -> Result<()> {
        if self.identity_forward() {
            // allocation-free path for the scalar and denoising models
            x.ensure_shape(self.forward.domain_shape(), "apply input")?;
            out.ensure_shape(self.forward.domain_shape(), "gradient output")?;
            let inv_var = T::one() / (self.sigma * self.sigma);
            for ((o, &xi), &yi) in out
                .as_mut_slice()
                .iter_mut()
                .zip(x.as_slice())
                .zip(self.observation.as_slice())
            {
                *o = inv_var * (xi - yi) + self.ridge * xi;
            }
            return Ok(());
        }
        let r = self.residual(x)?;
        self.forward.adjoint_into(&r, out)?;
        let inv_var = T::one() / (self.sigma * self.sigma);
        out.axpby(inv_var, self.ridge, x);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_value_and_gradient() {
        // f(x) = (x - 2)^2 / 2 in 1-D
        let ls = LeastSquares::new(
            LinearMap::identity(&[1]),
            Field::scalar(2.0),
            1.0,
            0.0,
        )
        .unwrap();
        let x = Field::scalar(5.0);
        assert_eq!(ls.value(&x).unwrap(), 4.5);
        assert_eq!(ls.gradient(&x).unwrap().as_slice(), &[3.0]);
    }

    #[test]
    fn ridge_adds_to_gradient() {
        let ls = LeastSquares::new(LinearMap::identity(&[2]), Field::zeros(&[2]), 0.5, 3.0).unwrap();
        let x = Field::from_slice(&[1.0, -1.0]).unwrap();
        // grad = x / 0.25 + 3 x = 7 x
        assert_eq!(ls.gradient(&x).unwrap().as_slice(), &[7.0, -7.0]);
        assert_eq!(ls.value(&x).unwrap(), 2.0 / 0.5 + 3.0);
    }
}
