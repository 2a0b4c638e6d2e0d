//! Linear operators: dense matrices, periodic 2-D convolution, the discrete
//! forward-difference gradient, and the identity.
//!
//! Every operator exposes `apply` and `adjoint`; the adjoint of each kind is
//! exact, which the samplers and the PDFP solver rely on.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::scalar::Real;

/// Which concrete operator a [`LinearMap`] wraps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MapKind {
    Dense,
    Convolution,
    Gradient,
    Identity,
}

#[derive(Clone, Debug)]
enum Repr<T> {
    Dense {
        rows: usize,
        cols: usize,
        matrix: Vec<T>,
    },
    Convolution {
        kernel: Field<T>,
        center: (usize, usize),
    },
    Gradient,
    Identity,
}

/// Immutable linear operator between two shaped spaces.
#[derive(Clone, Debug)]
pub struct LinearMap<T> {
    domain_shape: Vec<usize>,
    range_shape: Vec<usize>,
    repr: Repr<T>,
}

impl<T: Real> LinearMap<T> {
    /// Dense operator `x -> M x` from a 2-D matrix field of shape `[rows, cols]`.
    pub fn dense(matrix: &Field<T>) -> Result<Self> {
        if matrix.shape().len() != 2 {
            return Err(Error::Shape(format!(
                "dense map needs a 2-D matrix, got shape {:?}",
                matrix.shape()
            )));
        }
        let (rows, cols) = (matrix.shape()[0], matrix.shape()[1]);
        Ok(Self {
            domain_shape: vec![cols],
            range_shape: vec![rows],
            repr: Repr::Dense {
                rows,
                cols,
                matrix: matrix.as_slice().to_vec(),
            },
        })
    }

    /// Periodic-boundary convolution with a normalized kernel, centered at
    /// `(rows / 2, cols / 2)` of the kernel.
    pub fn convolution(kernel: &Field<T>, image_shape: &[usize]) -> Result<Self> {
        if kernel.shape().len() != 2 || image_shape.len() != 2 {
            return Err(Error::Shape(
                "convolution needs a 2-D kernel and a 2-D image shape".into(),
            ));
        }
        let (kh, kw) = (kernel.shape()[0], kernel.shape()[1]);
        if kh > image_shape[0] || kw > image_shape[1] {
            return Err(Error::Shape(format!(
                "kernel {kh}x{kw} larger than image {image_shape:?}"
            )));
        }
        let total = kernel.sum().to_f64_lossy();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::param(
                "kernel",
                format!("entries must sum to 1, got {total}"),
            ));
        }
        Ok(Self {
            domain_shape: image_shape.to_vec(),
            range_shape: image_shape.to_vec(),
            repr: Repr::Convolution {
                kernel: kernel.clone(),
                center: (kh / 2, kw / 2),
            },
        })
    }

    /// Forward differences with a replicate (Neumann) boundary. The range is
    /// `[2, rows, cols]`: horizontal differences first, vertical second.
    pub fn gradient(image_shape: &[usize]) -> Result<Self> {
        if image_shape.len() != 2 || image_shape[0] < 2 || image_shape[1] < 2 {
            return Err(Error::Shape(format!(
                "gradient needs a 2-D image with both sides >= 2, got {image_shape:?}"
            )));
        }
        Ok(Self {
            domain_shape: image_shape.to_vec(),
            range_shape: vec![2, image_shape[0], image_shape[1]],
            repr: Repr::Gradient,
        })
    }

    /// Views the domain of a dense map under another shape with the same size,
    /// e.g. a `[rows, h * w]` matrix acting on `[h, w]` images.
    pub fn with_domain_shape(mut self, shape: &[usize]) -> Result<Self> {
        if self.kind() != MapKind::Dense || shape.iter().product::<usize>() != self.domain_len() {
            return Err(Error::Shape(format!(
                "cannot view domain {:?} of a {:?} map as {shape:?}",
                self.domain_shape,
                self.kind()
            )));
        }
        self.domain_shape = shape.to_vec();
        Ok(self)
    }

    pub fn identity(shape: &[usize]) -> Self {
        Self {
            domain_shape: shape.to_vec(),
            range_shape: shape.to_vec(),
            repr: Repr::Identity,
        }
    }

    pub fn kind(&self) -> MapKind {
        match self.repr {
            Repr::Dense { .. } => MapKind::Dense,
            Repr::Convolution { .. } => MapKind::Convolution,
            Repr::Gradient => MapKind::Gradient,
            Repr::Identity => MapKind::Identity,
        }
    }

    pub fn domain_shape(&self) -> &[usize] {
        &self.domain_shape
    }

    pub fn range_shape(&self) -> &[usize] {
        &self.range_shape
    }

    pub fn domain_len(&self) -> usize {
        self.domain_shape.iter().product()
    }

    pub fn range_len(&self) -> usize {
        self.range_shape.iter().product()
    }

    pub fn apply(&self, x: &Field<T>) -> Result<Field<T>> {
        let mut out = Field::zeros(&self.range_shape);
        self.apply_into(x, &mut out)?;
        Ok(out)
    }

    pub fn adjoint(&self, y: &Field<T>) -> Result<Field<T>> {
        let mut out = Field::zeros(&self.domain_shape);
        self.adjoint_into(y, &mut out)?;
        Ok(out)
    }

    /// Writes `A x` into `out`, which must already have the range shape.
    pub fn apply_into(&self, x: &Field<T>, out: &mut Field<T>) -> Result<()> {
        x.ensure_shape(&self.domain_shape, "apply input")?;
        out.ensure_shape(&self.range_shape, "apply output")?;
        let (src, dst) = (x.as_slice(), out.as_mut_slice());
        match &self.repr {
            Repr::Identity => dst.copy_from_slice(src),
            Repr::Dense { rows, cols, matrix } => {
                for r in 0..*rows {
                    let row = &matrix[r * cols..(r + 1) * cols];
                    dst[r] = row
                        .iter()
                        .zip(src)
                        .fold(T::zero(), |acc, (&m, &v)| acc + m * v);
                }
            }
            Repr::Convolution { kernel, center } => {
                convolve(src, dst, &self.domain_shape, kernel, *center, false)
            }
            Repr::Gradient => gradient_forward(src, dst, &self.domain_shape),
        }
        Ok(())
    }

    /// Writes `A^T y` into `out`, which must already have the domain shape.
    pub fn adjoint_into(&self, y: &Field<T>, out: &mut Field<T>) -> Result<()> {
        y.ensure_shape(&self.range_shape, "adjoint input")?;
        out.ensure_shape(&self.domain_shape, "adjoint output")?;
        let (src, dst) = (y.as_slice(), out.as_mut_slice());
        match &self.repr {
            Repr::Identity => dst.copy_from_slice(src),
            Repr::Dense { rows, cols, matrix } => {
                dst.iter_mut().for_each(|v| *v = T::zero());
                for r in 0..*rows {
                    let yr = src[r];
                    let row = &matrix[r * cols..(r + 1) * cols];
                    for (d, &m) in dst.iter_mut().zip(row) {
                        *d += m * yr;
                    }
                }
            }
            Repr::Convolution { kernel, center } => {
                convolve(src, dst, &self.domain_shape, kernel, *center, true)
            }
            Repr::Gradient => gradient_adjoint(src, dst, &self.domain_shape),
        }
        Ok(())
    }
}

/// Periodic convolution (or correlation with the flipped kernel when `adjoint`).
fn convolve<T: Real>(
    src: &[T],
    dst: &mut [T],
    shape: &[usize],
    kernel: &Field<T>,
    (ca, cb): (usize, usize),
    adjoint: bool,
) {
    let (h, w) = (shape[0], shape[1]);
    let (kh, kw) = (kernel.shape()[0], kernel.shape()[1]);
    dst.iter_mut().for_each(|v| *v = T::zero());
    for a in 0..kh {
        for b in 0..kw {
            let k = kernel.at2(a, b);
            if k == T::zero() {
                continue;
            }
            // forward: out[i, j] += k * x[i + ca - a, j + cb - b]
            // adjoint: out[i, j] += k * y[i - ca + a, j - cb + b]
            let (rs, cs) = if adjoint {
                ((a + h - ca) % h, (b + w - cb) % w)
            } else {
                ((ca + h - a) % h, (cb + w - b) % w)
            };
            for i in 0..h {
                let src_row = &src[((i + rs) % h) * w..((i + rs) % h + 1) * w];
                let dst_row = &mut dst[i * w..(i + 1) * w];
                let split = w - cs;
                for (d, &s) in dst_row[..split].iter_mut().zip(&src_row[cs..]) {
                    *d += k * s;
                }
                for (d, &s) in dst_row[split..].iter_mut().zip(&src_row[..cs]) {
                    *d += k * s;
                }
            }
        }
    }
}

fn gradient_forward<T: Real>(src: &[T], dst: &mut [T], shape: &[usize]) {
    let (h, w) = (shape[0], shape[1]);
    let (dx, dy) = dst.split_at_mut(h * w);
    for i in 0..h {
        for j in 0..w {
            let idx = i * w + j;
            dx[idx] = if j + 1 < w {
                src[idx + 1] - src[idx]
            } else {
                T::zero()
            };
            dy[idx] = if i + 1 < h {
                src[idx + w] - src[idx]
            } else {
                T::zero()
            };
        }
    }
}

/// Negative divergence, the exact adjoint of [`gradient_forward`].
fn gradient_adjoint<T: Real>(src: &[T], dst: &mut [T], shape: &[usize]) {
    let (h, w) = (shape[0], shape[1]);
    let (px, py) = src.split_at(h * w);
    for i in 0..h {
        for j in 0..w {
            let idx = i * w + j;
            let mut acc = T::zero();
            if j + 1 < w {
                acc -= px[idx];
            }
            if j > 0 {
                acc += px[idx - 1];
            }
            if i + 1 < h {
                acc -= py[idx];
            }
            if i > 0 {
                acc += py[idx - w];
            }
            dst[idx] = acc;
        }
    }
}

/// Result of [`power_iteration`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralEstimate<T> {
    /// Estimate of the largest eigenvalue of `B B^T`.
    pub value: T,
    pub converged: bool,
    pub iterations: usize,
}

pub const DEFAULT_POWER_ITERS: usize = 200;
pub const DEFAULT_POWER_TOL: f64 = 1e-8;

/// Estimates `lambda_max(B B^T)` by power iteration on `B^T B`, which has the same
/// nonzero spectrum. Stops once successive Rayleigh quotients differ by less
/// than `tol` relative to the current quotient.
pub fn power_iteration<T: Real>(
    op: &LinearMap<T>,
    max_iters: usize,
    tol: T,
) -> Result<SpectralEstimate<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0005_eed5_0f0b_b7e5);
    let start: Vec<T> = (0..op.domain_len())
        .map(|_| T::lit(rng.random::<f64>() - 0.5))
        .collect();
    let mut v = Field::from_vec(op.domain_shape(), start)?;
    let mut bv = Field::zeros(op.range_shape());
    let mut w = Field::zeros(op.domain_shape());

    let norm = v.norm();
    v.scale(T::one() / norm);
    let mut previous = T::zero();
    for it in 1..=max_iters {
        op.apply_into(&v, &mut bv)?;
        let quotient = bv.norm_sq();
        op.adjoint_into(&bv, &mut w)?;
        let wn = w.norm();
        if wn == T::zero() || quotient == T::zero() {
            return Ok(SpectralEstimate {
                value: T::zero(),
                converged: false,
                iterations: it,
            });
        }
        if it > 1 && (quotient - previous).abs() < tol * quotient {
            return Ok(SpectralEstimate {
                value: quotient,
                converged: true,
                iterations: it,
            });
        }
        previous = quotient;
        v.copy_from(&w);
        v.scale(T::one() / wn);
    }
    Ok(SpectralEstimate {
        value: previous,
        converged: false,
        iterations: max_iters,
    })
}

/// Dense `rows x cols` operator `U diag(s) V^T` with random orthonormal factors,
/// so its singular values are exactly `singular` (up to rounding).
pub fn dense_with_singular_values<T: Real>(
    rows: usize,
    cols: usize,
    singular: &[f64],
    seed: u64,
) -> Result<LinearMap<T>> {
    let r = singular.len();
    if r == 0 || r > rows.min(cols) {
        return Err(Error::param(
            "singular",
            format!("need between 1 and {} singular values, got {r}", rows.min(cols)),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = random_orthonormal_columns(rows, r, &mut rng);
    let v = random_orthonormal_columns(cols, r, &mut rng);
    let mut matrix = vec![0.0f64; rows * cols];
    for (k, &s) in singular.iter().enumerate() {
        for i in 0..rows {
            let us = u[k][i] * s;
            for j in 0..cols {
                matrix[i * cols + j] += us * v[k][j];
            }
        }
    }
    LinearMap::dense(&Field::from_f64(&[rows, cols], &matrix)?)
}

/// `count` orthonormal vectors of length `dim` from Gaussian draws, via modified
/// Gram-Schmidt applied twice.
fn random_orthonormal_columns(dim: usize, count: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(count);
    while basis.len() < count {
        let mut c: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        for _ in 0..2 {
            for q in &basis {
                let proj: f64 = q.iter().zip(&c).map(|(a, b)| a * b).sum();
                c.iter_mut().zip(q).for_each(|(ci, qi)| *ci -= proj * qi);
            }
        }
        let n = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 1e-8 {
            c.iter_mut().for_each(|v| *v /= n);
            basis.push(c);
        }
    }
    basis
}
