//! `sample <config>`: one chain, one diagnostics row.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use pdfp_langevin::diagnostics::{ess_coordinates, ess_summary, ks_distance, psnr, DiagnosticsReport};
use pdfp_langevin::*;

use crate::config::{LoadedConfig, Model};
use crate::output::{atomic_write, fmt};
use crate::pgm;

/// Overrides from the command line.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
}

impl Overrides {
    pub fn seed(&self, loaded: &LoadedConfig) -> u64 {
        self.seed.unwrap_or(loaded.config.sampler.seed)
    }

    /// `--out-dir`, else `output.directory` relative to the config file.
    pub fn out_dir(&self, loaded: &LoadedConfig) -> PathBuf {
        match &self.out_dir {
            Some(d) => d.clone(),
            None => loaded.base_dir.join(&loaded.config.output.directory),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SampleSummary {
    pub report: DiagnosticsReport,
    pub out_dir: PathBuf,
    /// PSNR of the observation against the truth, for image models.
    pub psnr_observation: Option<f64>,
    pub seconds: f64,
}

/// Writes the state a failed chain stopped at; returns the dump path.
pub fn dump_chain_failure(dir: &Path, step: usize, theta: &[f64], source: &Error) -> Result<PathBuf> {
    let path = dir.join("chain_failure.csv");
    let mut text = format!("# {source}\n# step {step}\nindex,theta\n");
    for (i, v) in theta.iter().enumerate() {
        writeln!(text, "{i},{}", fmt(*v))?;
    }
    atomic_write(&path, text.as_bytes())?;
    Ok(path)
}

pub fn run(loaded: &LoadedConfig, ov: &Overrides) -> Result<SampleSummary> {
    let cfg = &loaded.config;
    let seed = ov.seed(loaded);
    let out_dir = ov.out_dir(loaded);
    let kind = cfg.sampler_kind()?;

    let t0 = Instant::now();
    let model = Model::build(loaded)?;
    let scfg = cfg.sampler_config(cfg.sampler.k, None);
    scfg.validate(kind, &model.target).context("sampler")?;
    let track = ess_coordinates(model.target.dim(), cfg.output.ess_coords, seed);
    let rc = cfg.run_config(track);
    let x0 = model.initial_point(cfg.sampler.init)?;
    let setup = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let mut kernel = AnyKernel::build(kind, &model.target, &scfg)?;
    let mut state = ChainState::new(x0, ChainRng::new(seed, 0));
    let out = match run_chain(&mut state, &mut kernel, &rc) {
        Ok(out) => out,
        Err(Error::Chain { step, theta, source }) => {
            let path = dump_chain_failure(&out_dir, step, &theta, &source)?;
            anyhow::bail!("chain failed at step {step}: {source}; state written to {}", path.display());
        }
        Err(e) => return Err(e.into()),
    };
    let seconds = t1.elapsed().as_secs_f64();

    let psnr_value = match &model.truth {
        Some(t) if model.is_image() => Some(psnr(t, &out.mean, 1.0)?),
        _ => None,
    };
    let psnr_observation = match (&model.truth, &model.observation) {
        (Some(t), Some(y)) if model.is_image() => Some(psnr(t, y, 1.0)?),
        _ => None,
    };
    let ks = match &model.toy {
        Some(toy) => Some(ks_distance(&out.traces[0], |x| toy.cdf(x))?),
        None => None,
    };
    let report = DiagnosticsReport {
        sampler: kind.name().to_string(),
        k: scfg.k,
        delta: scfg.delta,
        rho: scfg.rho,
        n_samples: out.n_retained,
        acceptance_rate: out.acceptance_rate,
        esjd: out.esjd,
        ess: ess_summary(&out.traces).ok(),
        psnr: psnr_value,
        ks,
    };

    let mut csv = Vec::new();
    DiagnosticsReport::write_header(&mut csv)?;
    report.write_row(&mut csv)?;
    atomic_write(&out_dir.join("diagnostics.csv"), &csv)?;

    if model.is_image() {
        let clamped = pgm::write(&out_dir.join("posterior_mean.pgm"), &out.mean, 255)?;
        if clamped {
            eprintln!("warning: posterior mean clamped into [0, 1] for posterior_mean.pgm");
        }
        if let Some(y) = &model.observation {
            pgm::write(&out_dir.join("observation.pgm"), y, 255)?;
        }
    } else {
        let mut text = String::from("index,mean,variance\n");
        for (i, (m, v)) in out.mean.as_slice().iter().zip(out.variance.as_slice()).enumerate() {
            writeln!(text, "{i},{},{}", fmt(*m), fmt(*v))?;
        }
        atomic_write(&out_dir.join("mean.csv"), text.as_bytes())?;
    }
    if cfg.output.traces {
        let mut text = String::from("sample,energy\n");
        for (i, e) in out.energy.iter().enumerate() {
            writeln!(text, "{i},{}", fmt(*e))?;
        }
        atomic_write(&out_dir.join("energy_trace.csv"), text.as_bytes())?;
    }
    let timing = format!("phase,seconds\nsetup,{setup:.3}\nsampling,{seconds:.3}\n");
    atomic_write(&out_dir.join("timing.csv"), timing.as_bytes())?;
    eprintln!("{kind}: {} transitions in {seconds:.2} s (setup {setup:.2} s)", rc.n_steps);

    Ok(SampleSummary {
        report,
        out_dir,
        psnr_observation,
        seconds,
    })
}
