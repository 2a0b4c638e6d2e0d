//! Random streams for Markov chains.
//!
//! Each chain owns a ChaCha8 generator keyed by `(seed, chain index)`: the seed
//! fills the 256-bit key and the chain index selects the 64-bit stream, so
//! chains never share variates and replays are bitwise identical on every
//! platform. Normal variates use the ziggurat sampler of `rand_distr`.

use std::fmt::Debug;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::field::Field;
use crate::scalar::Real;

/// Source of the Gaussian increments `xi` and the accept/reject uniforms `a`.
pub trait NoiseSource: Clone + Debug {
    fn normal(&mut self) -> f64;

    /// Uniform on `[0, 1)`.
    fn uniform(&mut self) -> f64;

    fn fill_normal<T: Real>(&mut self, out: &mut Field<T>) {
        for v in out.as_mut_slice() {
            *v = T::lit(self.normal());
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainRng {
    inner: ChaCha8Rng,
}

impl ChainRng {
    pub fn new(seed: u64, chain: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(chain);
        Self { inner }
    }
}

impl NoiseSource for ChainRng {
    #[inline]
    fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    #[inline]
    fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }
}

/// Deterministic replacement for [`ChainRng`] in tests: replays fixed
/// sequences, cycling when exhausted.
#[derive(Clone, Debug, PartialEq)]
pub struct ScriptedNoise {
    normals: Vec<f64>,
    uniforms: Vec<f64>,
    next_normal: usize,
    next_uniform: usize,
}

impl ScriptedNoise {
    pub fn new(normals: Vec<f64>, uniforms: Vec<f64>) -> Self {
        assert!(
            !normals.is_empty() && !uniforms.is_empty(),
            "scripted noise needs at least one value of each kind"
        );
        Self {
            normals,
            uniforms,
            next_normal: 0,
            next_uniform: 0,
        }
    }

    /// Every `xi` equals `normal`, every `a` equals `uniform`.
    pub fn constant(normal: f64, uniform: f64) -> Self {
        Self::new(vec![normal], vec![uniform])
    }
}

impl NoiseSource for ScriptedNoise {
    fn normal(&mut self) -> f64 {
        let v = self.normals[self.next_normal % self.normals.len()];
        self.next_normal += 1;
        v
    }

    fn uniform(&mut self) -> f64 {
        let v = self.uniforms[self.next_uniform % self.uniforms.len()];
        self.next_uniform += 1;
        v
    }
}
