//! `experiment-deblur <config>`: the sampler x K table on one deblurring model.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use pdfp_langevin::diagnostics::{ess_coordinates, ess_summary, psnr, EssSummary};
use pdfp_langevin::*;
use rayon::prelude::*;

use crate::config::{InitPoint, LoadedConfig, Model, ModelKind};
use crate::output::{atomic_write, fmt};
use crate::pgm;
use crate::sample::{dump_chain_failure, Overrides};

pub const HEADER: &str =
    "sampler,K,delta,rho,n_samples,acceptance_rate,esjd,ess_min,ess_mean,ess_median,ess_flagged,psnr,psnr_observation";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cell {
    pub kind: SamplerKind,
    /// `None` for the exact-prox samplers, which have no inner iteration count.
    pub k: Option<usize>,
}

impl Cell {
    pub fn label(&self) -> String {
        match self.k {
            Some(k) => format!("{} K={k}", self.kind),
            None => self.kind.to_string(),
        }
    }

    pub fn image_name(&self) -> String {
        match self.k {
            Some(k) => format!("mean_{}_k{k}.pgm", self.kind),
            None => format!("mean_{}.pgm", self.kind),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Row {
    pub cell: Cell,
    pub delta: f64,
    pub rho: f64,
    pub n_samples: usize,
    pub acceptance_rate: f64,
    pub esjd: f64,
    pub ess: Option<EssSummary>,
    pub psnr: f64,
    pub psnr_observation: f64,
    pub seconds: f64,
}

impl Row {
    fn csv(&self) -> String {
        let k = self.cell.k.map(|k| k.to_string()).unwrap_or_default();
        let ess = match &self.ess {
            Some(e) => format!("{:.3},{:.3},{:.3},{}", e.min, e.mean, e.median, e.flagged),
            None => ",,,".into(),
        };
        format!(
            "{},{k},{:e},{:e},{},{:.6},{},{ess},{:.6},{:.6}",
            self.cell.kind,
            self.delta,
            self.rho,
            self.n_samples,
            self.acceptance_rate,
            fmt(self.esjd),
            self.psnr,
            self.psnr_observation
        )
    }
}

/// Sampler x K product in config order; the exact-prox samplers appear once.
pub fn cells(loaded: &LoadedConfig) -> Result<Vec<Cell>> {
    let Some(exp) = &loaded.config.experiment else {
        bail!("experiment-deblur needs an [experiment] table");
    };
    let mut out = Vec::new();
    for name in &exp.samplers {
        let kind: SamplerKind = name.parse().with_context(|| "experiment.samplers".to_string())?;
        if kind.uses_pdfp() {
            out.extend(exp.k.iter().map(|&k| Cell { kind, k: Some(k) }));
        } else {
            out.push(Cell { kind, k: None });
        }
    }
    Ok(out)
}

/// Runs every cell with the same random stream. Cells with the same starting
/// point share it.
pub fn run(loaded: &LoadedConfig, ov: &Overrides, threads: usize) -> Result<Vec<Row>> {
    let cfg = &loaded.config;
    if cfg.model.kind != ModelKind::Deblur {
        bail!("model.kind: experiment-deblur needs a deblur model");
    }
    let cells = cells(loaded)?;
    let exp = cfg.experiment.as_ref().expect("checked by cells");
    let seed = ov.seed(loaded);
    let out_dir = ov.out_dir(loaded);

    let model = Model::build(loaded)?;
    let truth = model.truth.as_ref().expect("deblur model has a truth");
    let observation = model.observation.as_ref().expect("deblur model has an observation");
    let psnr_observation = psnr(truth, observation, 1.0)?;
    // validate every cell before spending time on any
    let configs: Vec<Config> = cells
        .iter()
        .map(|c| {
            let scfg = cfg.sampler_config(c.k.unwrap_or(1), exp.delta.get(c.kind.name()).copied());
            scfg.validate(c.kind, &model.target)
                .with_context(|| format!("sampler {}", c.kind))?;
            Ok(scfg)
        })
        .collect::<Result<_>>()?;
    let inits: Vec<InitPoint> = cells
        .iter()
        .map(|c| exp.init.get(c.kind.name()).copied().unwrap_or(cfg.sampler.init))
        .collect();
    let mut starts = BTreeMap::new();
    for &init in &inits {
        if let Entry::Vacant(slot) = starts.entry(init) {
            slot.insert(model.initial_point(init)?);
        }
    }
    let track = ess_coordinates(model.target.dim(), cfg.output.ess_coords, seed);
    let rc = cfg.run_config(track);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .context("building the worker pool")?;
    let results: Vec<Result<(Row, RealField)>> = pool.install(|| {
        cells
            .par_iter()
            .zip(configs.par_iter())
            .zip(inits.par_iter())
            .map(|((cell, scfg), init)| -> Result<(Row, RealField)> {
                let start = Instant::now();
                let mut kernel = AnyKernel::build(cell.kind, &model.target, scfg)?;
                let mut state = ChainState::new(starts[init].clone(), ChainRng::new(seed, 0));
                let out = match run_chain(&mut state, &mut kernel, &rc) {
                    Ok(out) => out,
                    Err(Error::Chain { step, theta, source }) => {
                        let dir = out_dir.join(format!("failure_{}", cell.image_name().trim_end_matches(".pgm")));
                        let path = dump_chain_failure(&dir, step, &theta, &source)?;
                        bail!("{}: chain failed at step {step}: {source}; state written to {}", cell.label(), path.display());
                    }
                    Err(e) => return Err(e.into()),
                };
                let seconds = start.elapsed().as_secs_f64();
                eprintln!("{}: {seconds:.1} s", cell.label());
                let row = Row {
                    cell: cell.clone(),
                    delta: scfg.delta,
                    rho: scfg.rho,
                    n_samples: out.n_retained,
                    acceptance_rate: out.acceptance_rate,
                    esjd: out.esjd,
                    ess: ess_summary(&out.traces).ok(),
                    psnr: psnr(truth, &out.mean, 1.0)?,
                    psnr_observation,
                    seconds,
                };
                Ok((row, out.mean))
            })
            .collect()
    });

    let mut rows = Vec::with_capacity(results.len());
    for r in results {
        let (row, mean) = r?;
        if pgm::write(&out_dir.join(row.cell.image_name()), &mean, 255)? {
            eprintln!("warning: {} clamped into [0, 1]", row.cell.image_name());
        }
        rows.push(row);
    }
    pgm::write(&out_dir.join("truth.pgm"), truth, 255)?;
    pgm::write(&out_dir.join("observation.pgm"), observation, 255)?;

    let mut table = format!("{HEADER}\n");
    let mut timings = String::from("sampler,K,seconds\n");
    for row in &rows {
        writeln!(table, "{}", row.csv())?;
        let k = row.cell.k.map(|k| k.to_string()).unwrap_or_default();
        writeln!(timings, "{},{k},{:.3}", row.cell.kind, row.seconds)?;
    }
    atomic_write(&out_dir.join("experiment.csv"), table.as_bytes())?;
    atomic_write(&out_dir.join("timings.csv"), timings.as_bytes())?;
    print!("{table}");
    Ok(rows)
}
