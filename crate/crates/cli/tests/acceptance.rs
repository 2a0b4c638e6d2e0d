//! The twelve acceptance criteria, one test each. Every test prints a single
//! `criterion N: PASS|FAIL` line with the measured quantities.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use pdfp_langevin::diagnostics::{ess, esjd, esjd_scalar, ks_distance};
use pdfp_langevin::operator::dense_with_singular_values;
use pdfp_langevin::pdfp::{
    contraction_rate_eta, fixed_point_residual, kstep_prox_subproblem, pdfp_contraction_rate, pdfp_solve, pdfp_step,
    solve_prox_subproblem,
};
use pdfp_langevin::prox::{moreau_gradient, moreau_value, prox_energy};
use pdfp_langevin::samplers::{tune_mala_pdfp, TuningOptions};
use pdfp_langevin::target::{motion_blur_kernel, phantom};
use pdfp_langevin::theory::{empirical_bound_check, BoundCheckConfig};
use pdfp_langevin::*;
use pdfp_langevin_cli::config::LoadedConfig;
use pdfp_langevin_cli::experiment;
use pdfp_langevin_cli::sample::Overrides;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn verdict(n: u32, ok: bool, detail: String) {
    println!("criterion {n}: {} ({detail})", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {n} failed: {detail}");
}

fn random_field(shape: &[usize], rng: &mut ChaCha8Rng, scale: f64) -> RealField {
    let n = shape.iter().product();
    RealField::from_vec(shape, (0..n).map(|_| rng.random_range(-scale..scale)).collect()).unwrap()
}

/// Mean of the Kolmogorov distribution over `sqrt(ess)`.
fn ks_noise(ess: f64) -> f64 {
    0.8687 / ess.sqrt()
}

fn lasso_toy() -> ToyTarget<f64> {
    make_toy_1d::<f64>(ToyKind::LassoPosterior).unwrap()
}

/// Coordinate-0 trace of a chain on the 1-D toy started at 0.
fn toy_trace(kind: SamplerKind, cfg: &Config, n: usize, burn: usize, thin: usize, seed: u64) -> Vec<f64> {
    let toy = lasso_toy();
    let mut kernel = AnyKernel::build(kind, &toy.target, cfg).unwrap();
    let mut state = ChainState::new(RealField::scalar(0.0), ChainRng::new(seed, 0));
    let mut rc = RunConfig::new(n + burn, burn, thin);
    rc.track = vec![0];
    run_chain(&mut state, &mut kernel, &rc).unwrap().traces.swap_remove(0)
}

#[test]
fn criterion_01_moreau_gradient_matches_finite_differences() {
    let start = Instant::now();
    let truth = phantom::<f64>(16, 16).unwrap();
    let (_, target) =
        make_deblur_model(&truth, &motion_blur_kernel(7).unwrap(), 0.01, 30.0, 1e-4, Noise::Seeded(1)).unwrap();
    let rho = 1e-4;
    let cfg = MoreauConfig::new(rho).unwrap();
    assert_eq!(cfg.exact_tol, 1e-10);
    let h = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let theta = truth.zip_map(&random_field(&[16, 16], &mut rng, 0.2), |a, b| a + b);
        let p = prox_energy(&theta, &target, &cfg, ProxMode::Exact).unwrap();
        assert!(p.converged);
        let grad = moreau_gradient(&theta, &p.point, rho).unwrap();
        let mut fd = RealField::zeros(theta.shape());
        for i in 0..theta.len() {
            let (mut a, mut b) = (theta.clone(), theta.clone());
            a.as_mut_slice()[i] += h;
            b.as_mut_slice()[i] -= h;
            fd.as_mut_slice()[i] =
                (moreau_value(&a, &target, &cfg).unwrap() - moreau_value(&b, &target, &cfg).unwrap()) / (2.0 * h);
        }
        worst = worst.max(fd.sub(&grad).norm() / grad.norm());
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(1, worst <= 1e-4, format!("worst relative error {worst:.2e} at 20 points, {secs:.1} s"));
}

/// Strongly convex least squares and a dense `B`, both 8 x 8.
fn dense_problem(seed: u64) -> Problem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sa: Vec<f64> = (0..8).map(|_| rng.random_range(0.3..2.0)).collect();
    let sb: Vec<f64> = (0..8).map(|_| rng.random_range(0.5..2.0)).collect();
    let a = dense_with_singular_values::<f64>(8, 8, &sa, seed ^ 0xa).unwrap();
    let b = dense_with_singular_values::<f64>(8, 8, &sb, seed ^ 0xb).unwrap();
    let ridge = 0.05;
    let smax = sa.iter().copied().fold(0.0, f64::max);
    let smin = sa.iter().copied().fold(f64::INFINITY, f64::min);
    let y = random_field(&[8], &mut rng, 2.0);
    let f = LeastSquares::new(a, y, 1.0, ridge).unwrap();
    Problem::new(Arc::new(f), smax * smax + ridge, smin * smin + ridge, b, Penalty::l1(0.4).unwrap()).unwrap()
}

#[test]
fn criterion_02_pdfp_contracts_at_rate_eta() {
    let start = Instant::now();
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_ratio: f64 = 0.0;
    let mut eta_max: f64 = 0.0;
    for seed in 0..5 {
        let prob = dense_problem(seed);
        assert!(prob.bbt_min() > 0.0);
        let params = prob.default_params();
        let rate = pdfp_contraction_rate(prob.strong_convexity(), prob.lipschitz(), params.gamma, params.lambda, prob.bbt_min());
        assert!(rate.valid);
        eta_max = eta_max.max(rate.eta);
        let star = pdfp_solve(
            &prob,
            &params,
            RealField::zeros(&[8]),
            RealField::zeros(&[8]),
            Stopping::Tolerance { tol: 1e-15, max_iters: 2_000_000 },
        )
        .unwrap();
        let w = params.gamma * params.gamma / params.lambda;
        let dist = |s: &State| s.x.dist_sq(&star.x) + w * s.v.dist_sq(&star.v);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 50);
        let mut state = State::new(random_field(&[8], &mut rng, 3.0), random_field(&[8], &mut rng, 0.4), prob.op()).unwrap();
        let mut d = dist(&state);
        for _ in 0..200 {
            state = pdfp_step(&state, &prob, &params).unwrap();
            let next = dist(&state);
            worst_excess = worst_excess.max(next - rate.eta * d);
            if d > 1e-20 {
                worst_ratio = worst_ratio.max(next / d);
            }
            d = next;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        2,
        worst_excess <= 1e-9,
        format!("max ratio {worst_ratio:.4} vs eta up to {eta_max:.4}, max excess {worst_excess:.1e}, {secs:.2} s"),
    );
}

#[test]
fn criterion_03_fixed_point_residual() {
    let mut worst: f64 = 0.0;
    for seed in 100..110 {
        let prob = dense_problem(seed);
        let params = prob.default_params();
        let sol = pdfp_solve(
            &prob,
            &params,
            RealField::zeros(&[8]),
            RealField::zeros(&[8]),
            Stopping::Tolerance { tol: 1e-13, max_iters: 1_000_000 },
        )
        .unwrap();
        assert!(sol.converged);
        let r = fixed_point_residual(&prob, &params, &State::new(sol.x, sol.v, prob.op()).unwrap()).unwrap();
        worst = worst.max(r);
    }
    verdict(3, worst <= 1e-8, format!("max weighted residual {worst:.2e} over 10 instances"));
}

#[test]
fn criterion_04_kstep_error_within_bound() {
    let mut worst_excess = f64::NEG_INFINITY;
    let mut cases = 0;
    let illposed = make_illposed_dense::<f64>(8, &[8], 10.0, 0.5, 0.3, 0.2, 4).unwrap().1;
    let toy = lasso_toy().target;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for target in [&toy, &illposed] {
        let prob = target.problem();
        for rho in [0.05, 0.5, 2.0] {
            // full default steps (eta = 0 on the toy) and halved steps (eta > 0)
            for scale in [1.0, 0.5] {
                let base = prob.default_prox_params(rho);
                let params = Params { gamma: base.gamma * scale, lambda: base.lambda * scale };
                let rate = contraction_rate_eta(prob.strong_convexity(), rho, prob.lipschitz(), params.gamma, params.lambda, prob.bbt_min());
                assert!(rate.valid);
                let theta = random_field(target.param_shape(), &mut rng, 3.0);
                let exact = solve_prox_subproblem(&theta, rho, prob, &params, 1e-14, 1_000_000).unwrap();
                assert!(exact.converged);
                let grad = moreau_gradient(&theta, &exact.point, rho).unwrap().norm_sq();
                let c = target.dual_bound();
                let tail = params.gamma * params.gamma * c * c / (params.lambda * rho * rho);
                for k in [1usize, 2, 5, 10] {
                    let xk = kstep_prox_subproblem(&theta, rho, prob, &params, k).unwrap().x;
                    let err = xk.dist_sq(&exact.point) / (rho * rho);
                    let bound = rate.eta.powi(k as i32) * (grad + tail) + 1e-8;
                    worst_excess = worst_excess.max(err - bound);
                    cases += 1;
                }
            }
        }
    }
    verdict(4, worst_excess <= 0.0, format!("{cases} cases, max error minus bound {worst_excess:.2e}"));
}

#[test]
fn criterion_05_mala_pdfp_stationarity() {
    let toy = lasso_toy();
    let mut results = Vec::new();
    for k in [1, 5] {
        let start = Instant::now();
        let cfg = SamplerConfig::new(0.1).with_rho(0.1).with_k(k);
        let trace = toy_trace(SamplerKind::MalaPdfp, &cfg, 200_000, 10_000, 1, 1);
        let ks = ks_distance(&trace, |x| toy.cdf(x)).unwrap();
        results.push((k, ks, start.elapsed().as_secs_f64()));
    }
    let ok = results.iter().all(|&(_, ks, secs)| ks <= 0.01 && secs < 60.0);
    let detail = results
        .iter()
        .map(|(k, ks, s)| format!("K={k}: KS {ks:.4} in {s:.2} s"))
        .collect::<Vec<_>>()
        .join("; ");
    verdict(5, ok, detail);
}

#[test]
fn criterion_06_ula_pdfp_bias_shrinks_with_delta() {
    let toy = lasso_toy();
    let mut rows = Vec::new();
    for (delta, thin) in [(0.1f64, 1), (0.01, 1), (0.001, 10)] {
        // 10^4 / delta transitions: the same simulated time at every step size
        let n = (1e4 / delta).round() as usize;
        let cfg = SamplerConfig::new(delta).with_rho(delta).with_k(10);
        let trace = toy_trace(SamplerKind::UlaPdfp, &cfg, n, n / 20, thin, 2);
        let ks = ks_distance(&trace, |x| toy.cdf(x)).unwrap();
        let noise = ks_noise(ess(&trace).unwrap().value);
        rows.push((delta, ks, noise));
    }
    let monotone = rows
        .windows(2)
        .all(|w| w[1].1 <= w[0].1 + 2.0 * w[0].2.max(w[1].2));
    let last = rows[2].1;
    let detail = rows
        .iter()
        .map(|(d, ks, noise)| format!("delta {d}: KS {ks:.4} (noise {noise:.4})"))
        .collect::<Vec<_>>()
        .join("; ");
    verdict(6, monotone && last <= 0.02, detail);
}

#[test]
fn criterion_07_expectation_bound_dominates() {
    let toy = lasso_toy();
    let cfg = BoundCheckConfig::new(0.05, 0.1, 1);
    assert_eq!(cfg.n_chains, 200);
    assert_eq!(cfg.checkpoints, vec![0, 10, 100, 1000]);
    let report = empirical_bound_check(&toy, &cfg).unwrap();
    let expectation: Vec<_> = report.rows.iter().filter(|r| r.quantity == "expectation").collect();
    assert_eq!(expectation.len(), 4);
    let ok = expectation.iter().all(|r| r.empirical <= r.bound + 3.0 * r.stderr);
    let detail = expectation
        .iter()
        .map(|r| format!("n={}: {:.4} +- {:.4} vs {:.4}", r.n, r.empirical, r.stderr, r.bound))
        .collect::<Vec<_>>()
        .join("; ");
    verdict(7, ok && report.all_hold(), detail);
}

fn config_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

#[test]
fn criterion_08_deblurring_table() {
    let start = Instant::now();
    let loaded = LoadedConfig::from_file(&config_dir().join("experiment.toml")).unwrap();
    assert_eq!(loaded.config.model.size, [64, 64]);
    assert_eq!(loaded.config.sampler.n, 10_000);
    let out = tempfile::tempdir().unwrap();
    let ov = Overrides { seed: None, out_dir: Some(out.path().to_path_buf()) };
    let rows = experiment::run(&loaded, &ov, 1).unwrap();
    let blurred = rows[0].psnr_observation;
    let gains_ok = rows.iter().all(|r| r.psnr >= blurred + 2.0);
    let ula = |k| {
        rows.iter()
            .find(|r| r.cell.kind == SamplerKind::UlaPdfp && r.cell.k == Some(k))
            .expect("ula_pdfp row")
    };
    let (k1, k100) = (ula(1), ula(100));
    let gap = (k1.psnr - k100.psnr).abs();
    let secs = start.elapsed().as_secs_f64();
    let table = rows
        .iter()
        .map(|r| format!("{}: {:.2} dB", r.cell.label(), r.psnr))
        .collect::<Vec<_>>()
        .join(", ");
    verdict(
        8,
        gains_ok && gap <= 0.2 && secs < 600.0,
        format!(
            "observation {blurred:.2} dB; {table}; K=1 vs K=100 gap {gap:.3} dB; wall K=1 {:.1} s, K=100 {:.1} s (reported); total {secs:.0} s",
            k1.seconds, k100.seconds
        ),
    );
}

#[test]
fn criterion_09_tuning_reaches_half_acceptance() {
    let truth = phantom::<f64>(64, 64).unwrap();
    let (model, target) =
        make_deblur_model(&truth, &motion_blur_kernel(7).unwrap(), 0.01, 30.0, 1e-4, Noise::Seeded(7)).unwrap();
    let mut state = ChainState::new(model.observation.clone(), ChainRng::new(3, 0));
    let opts = TuningOptions::default();
    assert_eq!((opts.max_probes, opts.probe_steps), (8, 2000));
    let r = tune_mala_pdfp(&target, &mut state, &opts).unwrap();
    let ok = r.success && r.probes.len() <= 8 && (0.4..=0.6).contains(&r.acceptance);
    verdict(
        9,
        ok,
        format!("delta = rho = {:.3e}, acceptance {:.3} after {} probes", r.delta, r.acceptance, r.probes.len()),
    );
}

#[test]
fn criterion_10_diagnostics_sanity() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let normal = box_muller(&mut rng, 100_000);
    let iid = ess(&normal).unwrap().value / normal.len() as f64;
    let phi: f64 = 0.5;
    let mut x = 0.0;
    let ar: Vec<f64> = normal
        .iter()
        .map(|&e| {
            x = phi * x + (1.0 - phi * phi).sqrt() * e;
            x
        })
        .collect();
    let ar_ratio = ess(&ar).unwrap().value / ar.len() as f64;
    // hand-worked: jumps 1 and 2 give (1 + 4) / 2; vectors jump by (3, 4) then not at all
    let e1 = esjd_scalar(&[0.0, 1.0, 3.0]).unwrap();
    let v = |a: f64, b: f64| RealField::from_slice(&[a, b]).unwrap();
    let e2 = esjd(&[v(0.0, 0.0), v(3.0, 4.0), v(3.0, 4.0)]).unwrap();
    let e3 = esjd_scalar(&[2.0, -1.0, -1.0, 1.0]).unwrap();
    let ok = (0.9..=1.1).contains(&iid)
        && (ar_ratio - 1.0 / 3.0).abs() <= 0.15 / 3.0
        && e1 == 2.5
        && e2 == 12.5
        && e3 == 13.0 / 3.0;
    verdict(
        10,
        ok,
        format!("iid ESS/N {iid:.3}; AR(1) ESS/N {ar_ratio:.3} vs 0.333; ESJD {e1}, {e2}, {e3:.6}"),
    );
}

/// Standard normals by Box-Muller, independent of the crate's generator.
fn box_muller(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let u1: f64 = 1.0 - rng.random::<f64>();
            let u2: f64 = rng.random();
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        })
        .collect()
}

const TOY_CONFIG: &str = r#"
[model]
kind = "toy1d"
[sampler]
kind = "mala_pdfp"
delta = 0.1
n = 20000
burn_in = 1000
[output]
traces = true
"#;

const DEBLUR_CONFIG: &str = r#"
[model]
kind = "deblur"
size = [16, 16]
noise_seed = 3
[sampler]
kind = "mala_pdfp"
delta = 2e-6
p0 = "kstep"
k = 2
n = 300
burn_in = 20
init = "observation"
[output]
traces = true
ess_coords = 10
"#;

const EXPERIMENT_CONFIG: &str = r#"
[model]
kind = "deblur"
size = [16, 16]
noise_seed = 3
[sampler]
kind = "ula_pdfp"
delta = 2e-6
n = 200
thin = 2
[experiment]
samplers = ["prox_ula", "ula_pdfp", "mala_pdfp"]
k = [1, 3]
init = { mala_pdfp = "observation" }
"#;

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

fn cli(args: &[&str]) -> (Vec<u8>, bool) {
    let out = Command::new(env!("CARGO_BIN_EXE_pdfp-langevin"))
        .args(args)
        .output()
        .expect("running the binary");
    (out.stdout, out.status.success())
}

#[test]
fn criterion_11_every_command_replays_bytewise() {
    let tmp = tempfile::tempdir().unwrap();
    let mut checked = Vec::new();
    let mut ok = true;
    for (name, text, cmd) in [
        ("toy1d", TOY_CONFIG, "sample"),
        ("deblur", DEBLUR_CONFIG, "sample"),
        ("experiment", EXPERIMENT_CONFIG, "experiment-deblur"),
    ] {
        let cfg = tmp.path().join(format!("{name}.toml"));
        std::fs::write(&cfg, text).unwrap();
        let mut runs = Vec::new();
        for rep in 0..2 {
            let dir = tmp.path().join(format!("{name}_{rep}"));
            let (stdout, success) = cli(&[
                cmd,
                cfg.to_str().unwrap(),
                "--seed",
                "5",
                "--threads",
                "1",
                "--out-dir",
                dir.to_str().unwrap(),
            ]);
            assert!(success, "{cmd} {name} failed");
            // wall-clock files are the only artifacts allowed to differ
            let artifacts: Vec<_> = files(&dir)
                .into_iter()
                .filter(|(f, _)| f != "timing.csv" && f != "timings.csv")
                .collect();
            runs.push((stdout, artifacts));
        }
        ok &= runs[0] == runs[1] && !runs[0].1.is_empty();
        checked.push(format!("{cmd} {name} ({} files)", runs[0].1.len()));
    }
    for suite in ["prox", "pdfp", "bounds", "samplers"] {
        let a = cli(&["verify", suite, "--seed", "5", "--threads", "1"]);
        let b = cli(&["verify", suite, "--seed", "5", "--threads", "1"]);
        ok &= a.1 && a == b;
        checked.push(format!("verify {suite}"));
    }
    verdict(11, ok, checked.join(", "));
}

#[test]
fn criterion_12_mala_pdfp_cache_is_a_fresh_kstep() {
    let truth = phantom::<f64>(8, 8).unwrap();
    let (model, deblur) =
        make_deblur_model(&truth, &motion_blur_kernel(3).unwrap(), 0.05, 2.0, 1e-3, Noise::Seeded(2)).unwrap();
    let toy = make_toy::<f64>(ToyKind::LassoPosterior, 3).unwrap();
    let mut detail = Vec::new();
    let mut ok = true;
    for (label, target, delta, k, x0) in [
        ("3-d toy", &toy.target, 0.3, 1, RealField::filled(&[3], 1.5)),
        ("8x8 deblur", &deblur, 1e-4, 4, model.observation.clone()),
    ] {
        let cfg = SamplerConfig::new(delta).with_k(k);
        let mut kernel = MalaPdfp::new(target, &cfg).unwrap();
        let mut state = ChainState::new(x0, ChainRng::new(12, 0));
        let mut mismatches = 0;
        for _ in 0..5000 {
            if kernel.step(&mut state).unwrap().accepted {
                let fresh = kernel.kstep_at(&state.theta).unwrap();
                mismatches += usize::from(state.prox_cache.as_ref() != Some(&fresh));
            }
        }
        ok &= mismatches == 0 && state.accept_count > 0 && state.accept_count < 5000;
        detail.push(format!("{label}: {} accepted, {mismatches} mismatches", state.accept_count));
    }
    verdict(12, ok, detail.join("; "));
}
