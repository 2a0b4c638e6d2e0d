//! Sample-quality measures: PSNR, ESJD, ESS, KS distance.

use std::io::Write;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::scalar::Real;

pub const PSNR_CAP_DB: f64 = 200.0;

/// `10 log10(peak^2 / MSE)` in dB, clamped to `[0, 200]`; identical images give 200.
pub fn psnr<T: Real>(reference: &Field<T>, estimate: &Field<T>, peak: f64) -> Result<f64> {
    estimate.ensure_shape(reference.shape(), "psnr estimate")?;
    if !(peak > 0.0) {
        return Err(Error::param("peak", "must be positive"));
    }
    let mse = reference.dist_sq(estimate).to_f64_lossy() / reference.len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (peak * peak / mse).log10()).clamp(0.0, PSNR_CAP_DB))
}

/// Mean of `|theta_{n+1} - theta_n|^2` over consecutive samples.
pub fn esjd<T: Real>(samples: &[Field<T>]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "esjd needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    let total: f64 = samples
        .windows(2)
        .map(|w| w[1].dist_sq(&w[0]).to_f64_lossy())
        .sum();
    Ok(total / (samples.len() - 1) as f64)
}

/// [`esjd`] for a scalar chain.
pub fn esjd_scalar(series: &[f64]) -> Result<f64> {
    if series.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "esjd needs at least 2 samples, got {}",
            series.len()
        )));
    }
    let total: f64 = series.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    Ok(total / (series.len() - 1) as f64)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EssEstimate {
    /// Reported value, within `[1, N]`.
    pub value: f64,
    /// `N / tau` before clamping.
    pub raw: f64,
    pub clamped: bool,
}

pub const ESS_MIN_SAMPLES: usize = 10;

/// Effective sample size `N / tau` with `tau = -1 + 2 sum_m (r_{2m} + r_{2m+1})`,
/// the sum running over the initial positive sequence of pair sums (Geyer).
/// Autocorrelations come from an FFT of the zero-padded centered series.
pub fn ess(series: &[f64]) -> Result<EssEstimate> {
    let n = series.len();
    if n < ESS_MIN_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "ess needs at least {ESS_MIN_SAMPLES} samples, got {n}"
        )));
    }
    let rho = autocorrelation(series)?;
    let mut tau = -1.0;
    let mut m = 0;
    while 2 * m + 1 < n {
        let pair = rho[2 * m] + rho[2 * m + 1];
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        m += 1;
    }
    let raw = n as f64 / tau;
    let value = if raw.is_finite() && tau > 0.0 {
        raw.clamp(1.0, n as f64)
    } else {
        n as f64
    };
    Ok(EssEstimate {
        value,
        raw,
        clamped: value != raw,
    })
}

/// Normalized autocorrelation `r_0 = 1, r_1, ..., r_{n-1}` (biased autocovariance).
pub fn autocorrelation(series: &[f64]) -> Result<Vec<f64>> {
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    let len = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = series
        .iter()
        .map(|&x| Complex::new(x - mean, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(len)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(len).process(&mut buf);
    buf.iter_mut().for_each(|c| *c = Complex::new(c.norm_sqr(), 0.0));
    planner.plan_fft_inverse(len).process(&mut buf);
    let c0 = buf[0].re;
    if !(c0 > 1e-300 * n as f64) {
        return Err(Error::InsufficientData(
            "series has zero variance; ess is undefined".into(),
        ));
    }
    Ok(buf[..n].iter().map(|c| c.re / c0).collect())
}

/// Min, mean and median ESS over several scalar traces.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EssSummary {
    pub min: f64,
    pub mean: f64,
    pub median: f64,
    /// Traces whose estimate was clamped or undefined.
    pub flagged: usize,
}

/// Summarizes [`ess`] over `traces`; undefined estimates (zero variance) are
/// flagged and left out of the statistics.
pub fn ess_summary(traces: &[Vec<f64>]) -> Result<EssSummary> {
    let mut values = Vec::with_capacity(traces.len());
    let mut flagged = 0;
    for t in traces {
        match ess(t) {
            Ok(e) => {
                flagged += usize::from(e.clamped);
                values.push(e.value);
            }
            Err(Error::InsufficientData(_)) if t.len() >= ESS_MIN_SAMPLES => flagged += 1,
            Err(e) => return Err(e),
        }
    }
    if values.is_empty() {
        return Err(Error::InsufficientData("no trace has a defined ess".into()));
    }
    values.sort_by(f64::total_cmp);
    let k = values.len();
    let median = if k % 2 == 1 {
        values[k / 2]
    } else {
        0.5 * (values[k / 2 - 1] + values[k / 2])
    };
    Ok(EssSummary {
        min: values[0],
        mean: values.iter().sum::<f64>() / k as f64,
        median,
        flagged,
    })
}

/// Fixed pseudo-random subset of `count` coordinates out of `dim`, sorted
/// (all coordinates when `dim <= count`).
pub fn ess_coordinates(dim: usize, count: usize, seed: u64) -> Vec<usize> {
    if dim <= count {
        return (0..dim).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, dim, count).into_vec();
    picked.sort_unstable();
    picked
}

/// `sup_x |F_n(x) - F(x)|` for the empirical CDF `F_n` of `samples`.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InsufficientData("ks distance of an empty sample".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    let mut i = 0;
    while i < sorted.len() {
        let x = sorted[i];
        let mut j = i;
        while j < sorted.len() && sorted[j] == x {
            j += 1;
        }
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs()).max((j as f64 / n - f).abs());
        i = j;
    }
    Ok(d)
}

/// One row of the diagnostics table.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsReport {
    pub sampler: String,
    pub k: usize,
    pub delta: f64,
    pub rho: f64,
    pub n_samples: usize,
    pub acceptance_rate: f64,
    pub esjd: f64,
    pub ess: Option<EssSummary>,
    pub psnr: Option<f64>,
    pub ks: Option<f64>,
}

impl DiagnosticsReport {
    pub const HEADER: &'static str =
        "sampler,K,delta,rho,n_samples,acceptance_rate,esjd,ess_min,ess_mean,ess_median,ess_flagged,psnr,ks";

    pub fn write_header<W: Write>(mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", Self::HEADER)
    }

    /// Fixed column order matching [`Self::HEADER`]; absent values are empty.
    pub fn write_row<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        let (emin, emean, emed, eflag) = match &self.ess {
            Some(e) => (
                format!("{:.3}", e.min),
                format!("{:.3}", e.mean),
                format!("{:.3}", e.median),
                e.flagged.to_string(),
            ),
            None => Default::default(),
        };
        writeln!(
            out,
            "{},{},{:e},{:e},{},{:.6},{:.6e},{},{},{},{},{},{}",
            self.sampler,
            self.k,
            self.delta,
            self.rho,
            self.n_samples,
            self.acceptance_rate,
            self.esjd,
            emin,
            emean,
            emed,
            eflag,
            opt(self.psnr),
            opt(self.ks)
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psnr_examples() {
        let a = Field::<f64>::zeros(&[4, 4]);
        assert_eq!(psnr(&a, &a, 1.0).unwrap(), PSNR_CAP_DB);
        let b = Field::filled(&[4, 4], 0.1);
        assert!((psnr(&a, &b, 1.0).unwrap() - 20.0).abs() < 1e-9);
        assert_eq!(psnr(&a, &b, 1.0).unwrap(), psnr(&b, &a, 1.0).unwrap());
        assert!(psnr(&a, &Field::zeros(&[2, 2]), 1.0).is_err());
    }

    #[test]
    fn esjd_examples() {
        assert_eq!(esjd_scalar(&[3.0; 5]).unwrap(), 0.0);
        assert_eq!(esjd_scalar(&[0.0, 1.0, 0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(esjd_scalar(&[0.0, 2.0, 3.0]).unwrap(), 2.5);
        let fields: Vec<Field<f64>> = [0.0, 2.0, 3.0].iter().map(|&v| Field::scalar(v)).collect();
        assert_eq!(esjd(&fields).unwrap(), 2.5);
        assert!(esjd_scalar(&[1.0]).is_err());
    }

    #[test]
    fn ess_rejects_constant_series() {
        assert!(matches!(ess(&[1.0; 50]), Err(Error::InsufficientData(_))));
        assert!(ess(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn ess_of_alternating_series_is_clamped() {
        let s: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let e = ess(&s).unwrap();
        assert!(e.clamped);
        assert_eq!(e.value, 100.0);
    }

    #[test]
    fn ks_examples() {
        let uniform = |x: f64| x.clamp(0.0, 1.0);
        let q: Vec<f64> = (1..=100).map(|i| (i as f64 - 0.5) / 100.0).collect();
        assert!(ks_distance(&q, uniform).unwrap() <= 0.01 + 1e-12);
        assert!((ks_distance(&[0.5; 20], uniform).unwrap() - 0.5).abs() < 1e-15);
        let mut rev = q.clone();
        rev.reverse();
        assert_eq!(ks_distance(&rev, uniform).unwrap(), ks_distance(&q, uniform).unwrap());
        assert!(ks_distance(&[], uniform).is_err());
    }

    #[test]
    fn coordinate_subset_is_fixed() {
        let a = ess_coordinates(4096, 64, 1);
        assert_eq!(a.len(), 64);
        assert_eq!(a, ess_coordinates(4096, 64, 1));
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(ess_coordinates(10, 64, 1), (0..10).collect::<Vec<_>>());
    }
}
