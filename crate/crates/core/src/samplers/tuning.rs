//! Step-size search for MALA-PDFP with `delta = rho`.

use super::{run_chain, ChainState, MalaPdfp, P0Init, RunConfig, SamplerConfig};
use crate::error::{Error, Result};
use crate::rng::NoiseSource;
use crate::scalar::Real;
use crate::target::CompositeTarget;

#[derive(Clone, Debug, PartialEq)]
pub struct TuningOptions {
    pub initial_delta: f64,
    pub k: usize,
    pub probe_steps: usize,
    pub max_probes: usize,
    pub band: (f64, f64),
    /// Factor applied to `delta` while no bracket exists yet.
    pub expand: f64,
}

impl Default for TuningOptions {
    fn default() -> Self {
        Self {
            initial_delta: 1e-3,
            k: 1,
            probe_steps: 2000,
            max_probes: 8,
            band: (0.4, 0.6),
            expand: 10.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TuningResult {
    /// Last probed `delta` (the accepted one on success).
    pub delta: f64,
    pub acceptance: f64,
    /// `(delta, acceptance)` of every probe, in order.
    pub probes: Vec<(f64, f64)>,
    pub success: bool,
}

/// Log-scale bisection on `delta = rho` until a probe's acceptance rate lands
/// in `opts.band`.
///
/// Probes run back to back on `state`, so the first probes also serve as
/// burn-in. Without a bracket the step grows or shrinks by `opts.expand`; once
/// both a too-small and a too-large `delta` are known the next probe is their
/// geometric mean.
pub fn tune_mala_pdfp<T: Real, R: NoiseSource>(
    target: &CompositeTarget<T>,
    state: &mut ChainState<T, R>,
    opts: &TuningOptions,
) -> Result<TuningResult> {
    if !(opts.initial_delta > 0.0) || !(opts.expand > 1.0) || opts.max_probes == 0 || opts.probe_steps == 0 {
        return Err(Error::param(
            "tuning",
            "need initial_delta > 0, expand > 1 and positive probe counts",
        ));
    }
    let (lo_band, hi_band) = opts.band;
    let mut lo: Option<f64> = None; // acceptance too high
    let mut hi: Option<f64> = None; // acceptance too low
    let mut delta = opts.initial_delta;
    let mut probes = Vec::with_capacity(opts.max_probes);
    let run = RunConfig::new(opts.probe_steps, 0, 1);
    for _ in 0..opts.max_probes {
        let mut cfg = SamplerConfig::new(T::lit(delta)).with_k(opts.k);
        cfg.p0 = P0Init::KStep;
        let mut kernel = MalaPdfp::new(target, &cfg)?;
        // the cache belongs to the previous step size
        state.prox_cache = None;
        let out = run_chain(state, &mut kernel, &run)?;
        let rate = out.acceptance_rate;
        probes.push((delta, rate));
        if (lo_band..=hi_band).contains(&rate) {
            return Ok(TuningResult {
                delta,
                acceptance: rate,
                probes,
                success: true,
            });
        }
        if rate > hi_band {
            lo = Some(delta);
            delta = match hi {
                Some(h) => (delta * h).sqrt(),
                None => delta * opts.expand,
            };
        } else {
            hi = Some(delta);
            delta = match lo {
                Some(l) => (delta * l).sqrt(),
                None => delta / opts.expand,
            };
        }
    }
    let &(delta, acceptance) = probes.last().expect("at least one probe");
    Ok(TuningResult {
        delta,
        acceptance,
        probes,
        success: false,
    })
}
