//! Flat real arrays with shape metadata.
//!
//! A [`Field`] stores its entries contiguously in row-major order. One-dimensional
//! fields hold parameter vectors, two-dimensional fields hold images, and the
//! gradient operator produces `[2, rows, cols]` fields.

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct Field<T> {
    data: Vec<T>,
    shape: Vec<usize>,
}

impl<T: Real> Field<T> {
    /// Builds a field from raw data, checking the shape and that every entry is finite.
    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Result<Self> {
        check_shape(shape)?;
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} needs {len} entries, got {}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical {
                context: "field construction",
                iteration: i,
                iterate: data.iter().map(|v| v.to_f64_lossy()).collect(),
            });
        }
        Ok(Self {
            data,
            shape: shape.to_vec(),
        })
    }

    /// 1-D field from a slice.
    pub fn from_slice(values: &[T]) -> Result<Self> {
        Self::from_vec(&[values.len()], values.to_vec())
    }

    pub fn from_f64(shape: &[usize], values: &[f64]) -> Result<Self> {
        Self::from_vec(shape, values.iter().map(|&v| T::lit(v)).collect())
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::filled(shape, T::zero())
    }

    pub fn filled(shape: &[usize], value: T) -> Self {
        assert!(
            check_shape(shape).is_ok(),
            "invalid shape {shape:?}: dimensions must be positive"
        );
        let len = shape.iter().product();
        Self {
            data: vec![value; len],
            shape: shape.to_vec(),
        }
    }

    pub fn scalar(value: T) -> Self {
        Self {
            data: vec![value],
            shape: vec![1],
        }
    }

    pub fn zeros_like(other: &Self) -> Self {
        Self::zeros(&other.shape)
    }

    #[inline]
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.data.iter().map(|v| v.to_f64_lossy()).collect()
    }

    /// Same data viewed under a different shape with the same number of entries.
    pub fn reshaped(mut self, shape: &[usize]) -> Result<Self> {
        check_shape(shape)?;
        if shape.iter().product::<usize>() != self.data.len() {
            return Err(Error::Shape(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            )));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.shape == other.shape
    }

    pub fn ensure_shape(&self, shape: &[usize], what: &str) -> Result<()> {
        if self.shape != shape {
            return Err(Error::Shape(format!(
                "{what}: expected shape {shape:?}, got {:?}",
                self.shape
            )));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn dot(&self, other: &Self) -> T {
        debug_assert_eq!(self.len(), other.len());
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
    }

    pub fn norm_sq(&self) -> T {
        self.dot(self)
    }

    pub fn norm(&self) -> T {
        self.norm_sq().sqrt()
    }

    pub fn l1_norm(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, v| acc + v.abs())
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn mean(&self) -> T {
        self.sum() / T::from_usize_lossy(self.len())
    }

    /// Squared Euclidean distance to `other`.
    pub fn dist_sq(&self, other: &Self) -> T {
        debug_assert_eq!(self.len(), other.len());
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b))
    }

    pub fn fill(&mut self, value: T) {
        self.data.iter_mut().for_each(|v| *v = value);
    }

    pub fn copy_from(&mut self, other: &Self) {
        debug_assert_eq!(self.len(), other.len());
        self.data.copy_from_slice(&other.data);
    }

    /// `self <- self + alpha * x`
    pub fn axpy(&mut self, alpha: T, x: &Self) {
        debug_assert_eq!(self.len(), x.len());
        for (s, &xi) in self.data.iter_mut().zip(&x.data) {
            *s += alpha * xi;
        }
    }

    /// `self <- a * self + b * x`
    pub fn axpby(&mut self, a: T, b: T, x: &Self) {
        debug_assert_eq!(self.len(), x.len());
        for (s, &xi) in self.data.iter_mut().zip(&x.data) {
            *s = a * *s + b * xi;
        }
    }

    pub fn scale(&mut self, alpha: T) {
        self.data.iter_mut().for_each(|v| *v *= alpha);
    }

    pub fn scaled(&self, alpha: T) -> Self {
        self.map(|v| alpha * v)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            data: self.data.iter().map(|&v| f(v)).collect(),
            shape: self.shape.clone(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        debug_assert_eq!(self.len(), other.len());
        Self {
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            shape: self.shape.clone(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    /// `a * self + b * other`
    pub fn lin_comb(&self, a: T, other: &Self, b: T) -> Self {
        self.zip_map(other, |x, y| a * x + b * y)
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |acc, (&a, &b)| acc.max((a - b).abs()))
    }

    /// Converts to another scalar type.
    pub fn cast<U: Real>(&self) -> Field<U> {
        Field {
            data: self.data.iter().map(|v| U::lit(v.to_f64_lossy())).collect(),
            shape: self.shape.clone(),
        }
    }

    /// Entry at a 2-D index of an image-shaped field.
    #[inline]
    pub fn at2(&self, row: usize, col: usize) -> T {
        self.data[row * self.shape[self.shape.len() - 1] + col]
    }
}

fn check_shape(shape: &[usize]) -> Result<()> {
    if shape.is_empty() || shape.contains(&0) {
        return Err(Error::Shape(format!(
            "shape {shape:?} must be non-empty with positive dimensions"
        )));
    }
    Ok(())
}
