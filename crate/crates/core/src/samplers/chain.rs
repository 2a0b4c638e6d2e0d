//! Chain driver: burn-in, thinning and streaming moments.

use super::{ChainState, Kernel};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::rng::NoiseSource;
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunConfig {
    /// Total transitions `N`, burn-in included.
    pub n_steps: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Keep every retained sample.
    pub store_samples: bool,
    /// Coordinates whose retained values are kept as scalar traces.
    pub track: Vec<usize>,
    /// Record `U` at every retained sample.
    pub energy_trace: bool,
}

impl RunConfig {
    pub fn new(n_steps: usize, burn_in: usize, thin: usize) -> Self {
        Self {
            n_steps,
            burn_in,
            thin,
            store_samples: false,
            track: Vec::new(),
            energy_trace: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(Error::param("thin", "must be positive"));
        }
        if self.burn_in > self.n_steps {
            return Err(Error::param("burn_in", "cannot exceed N"));
        }
        Ok(())
    }

    /// `floor((N - burn_in) / thin)`.
    pub fn retained(&self) -> usize {
        (self.n_steps - self.burn_in) / self.thin
    }
}

#[derive(Clone, Debug)]
pub struct ChainOutput<T> {
    pub samples: Vec<Field<T>>,
    pub tracked: Vec<usize>,
    /// `traces[i][j]`: coordinate `tracked[i]` of retained sample `j`.
    pub traces: Vec<Vec<f64>>,
    pub energy: Vec<f64>,
    pub mean: Field<T>,
    /// Unbiased sample variance per coordinate (zeros below two samples).
    pub variance: Field<T>,
    pub n_retained: usize,
    pub n_steps: usize,
    pub accepted: usize,
    /// Accepted transitions over all `N` transitions.
    pub acceptance_rate: f64,
    /// Mean `|theta_{n+1} - theta_n|^2` over the post-burn-in transitions.
    pub esjd: f64,
    /// Mean `|Y - theta_n|^2` over accepted post-burn-in proposals, weighted
    /// by the number of post-burn-in transitions (equals `esjd`).
    pub accepted_proposal_jump: f64,
}

/// Advances `state` by `cfg.n_steps` transitions of `kernel`.
///
/// On failure the error is [`Error::Chain`] carrying the step index and the
/// state the failing transition started from.
pub fn run_chain<T: Real, R: NoiseSource, K: Kernel<T>>(
    state: &mut ChainState<T, R>,
    kernel: &mut K,
    cfg: &RunConfig,
) -> Result<ChainOutput<T>> {
    cfg.validate()?;
    let shape = state.theta.shape().to_vec();
    let dim = state.theta.len();
    if let Some(&bad) = cfg.track.iter().find(|&&c| c >= dim) {
        return Err(Error::param(
            "track",
            format!("coordinate {bad} out of range for dimension {dim}"),
        ));
    }
    let wrap = |state: &ChainState<T, R>, e: Error| Error::Chain {
        step: state.n,
        theta: state.theta.to_f64_vec(),
        source: Box::new(e),
    };
    kernel.prepare(state).map_err(|e| wrap(state, e))?;

    let retained = cfg.retained();
    let mut samples = Vec::with_capacity(if cfg.store_samples { retained } else { 0 });
    let mut traces = vec![Vec::with_capacity(retained); cfg.track.len()];
    let mut energy = Vec::with_capacity(if cfg.energy_trace { retained } else { 0 });
    let mut mean = vec![0.0f64; dim];
    let mut m2 = vec![0.0f64; dim];
    let mut count = 0usize;
    let mut accepted = 0usize;
    let mut jump_sum = 0.0f64;
    let mut proposal_sum = 0.0f64;

    for i in 1..=cfg.n_steps {
        // kernels only write theta after every check passed, so on failure
        // the state still holds the point the transition started from
        let out = kernel.step(state).map_err(|e| wrap(state, e))?;
        if out.accepted {
            accepted += 1;
        }
        if i <= cfg.burn_in {
            continue;
        }
        jump_sum += out.jump_sq.to_f64_lossy();
        if out.accepted {
            proposal_sum += out.proposal_jump_sq.to_f64_lossy();
        }
        if !(i - cfg.burn_in).is_multiple_of(cfg.thin) {
            continue;
        }
        count += 1;
        let inv = 1.0 / count as f64;
        for ((mu, s2), &x) in mean.iter_mut().zip(m2.iter_mut()).zip(state.theta.as_slice()) {
            let x = x.to_f64_lossy();
            let d = x - *mu;
            *mu += d * inv;
            *s2 += d * (x - *mu);
        }
        for (trace, &c) in traces.iter_mut().zip(&cfg.track) {
            trace.push(state.theta.as_slice()[c].to_f64_lossy());
        }
        if cfg.energy_trace {
            let u = kernel.energy(&state.theta).map_err(|e| wrap(state, e))?;
            energy.push(u.to_f64_lossy());
        }
        if cfg.store_samples {
            samples.push(state.theta.clone());
        }
    }

    let post = cfg.n_steps - cfg.burn_in;
    let variance: Vec<f64> = if count >= 2 {
        m2.iter().map(|s| s / (count - 1) as f64).collect()
    } else {
        vec![0.0; dim]
    };
    Ok(ChainOutput {
        samples,
        tracked: cfg.track.clone(),
        traces,
        energy,
        mean: Field::from_f64(&shape, &mean)?,
        variance: Field::from_f64(&shape, &variance)?,
        n_retained: count,
        n_steps: cfg.n_steps,
        accepted,
        acceptance_rate: if cfg.n_steps == 0 {
            0.0
        } else {
            accepted as f64 / cfg.n_steps as f64
        },
        esjd: if post == 0 { 0.0 } else { jump_sum / post as f64 },
        accepted_proposal_jump: if post == 0 { 0.0 } else { proposal_sum / post as f64 },
    })
}
