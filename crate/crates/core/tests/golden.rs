//! Frozen reference values. Every constant here comes from an oracle that does
//! not share code with the crate: closed forms through `statrs::erfc`, an
//! arbitrary-precision evaluation of the bound formulas, and hand-unrolled
//! iterations of the samplers on the scalar toy.

use std::sync::Arc;

use nalgebra::DMatrix;
use pdfp_langevin::operator::{dense_with_singular_values, power_iteration};
use pdfp_langevin::pdfp::{kstep_prox_subproblem, spectral_bounds_bbt, PdfpParams};
use pdfp_langevin::prox::{moreau_value, prox_energy};
use pdfp_langevin::target::geometric_decay;
use pdfp_langevin::theory::{
    expectation_bound, expectation_bound_limit, gradient_sum_bounds, kl_bound, tv_bound,
};
use pdfp_langevin::*;
use statrs::function::erf::erfc;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn s(v: f64) -> RealField {
    RealField::scalar(v)
}

#[test]
fn toy_cdf_matches_erfc_closed_form() {
    let toy = make_toy_1d::<f64>(ToyKind::LassoPosterior).unwrap();
    // int_0^x exp(-t^2/2 - t) dt = e^{1/2} sqrt(pi/2) (erfc(1/sqrt2) - erfc((x+1)/sqrt2))
    let r2 = std::f64::consts::SQRT_2;
    let half = |x: f64| (erfc(1.0 / r2) - erfc((x + 1.0) / r2)) / (2.0 * erfc(1.0 / r2));
    let cdf_1 = 0.5 + half(1.0);
    // statrs erfc carries about 1e-11 absolute error here; the frozen constant
    // is a 50-digit evaluation of the same expression
    assert!((cdf_1 - 0.928_303_250_650_596_7).abs() < 1e-10);
    assert!((toy.cdf(1.0) - 0.928_303_250_650_596_7).abs() < 1e-12);
    assert!((toy.cdf(-0.5) - (0.5 - half(0.5))).abs() < 1e-10);
    assert!((toy.cdf(-0.5) - 0.210_542_038_833_836_57).abs() < 1e-10);
    assert!((toy.cdf(0.0) - 0.5).abs() < 1e-12);

    let z = 2.0 * 0.5f64.exp() * (std::f64::consts::PI / 2.0).sqrt() * erfc(1.0 / r2);
    assert!(rel(toy.cdf_table().normalizer(), z) < 1e-8);
}

#[test]
fn gaussian_toy_cdf_is_the_normal_cdf() {
    let toy = make_toy_1d::<f64>(ToyKind::Gaussian).unwrap();
    for x in [-2.5, -1.0, 0.3, 1.7] {
        let phi = 0.5 * erfc(-x / std::f64::consts::SQRT_2);
        assert!((toy.cdf(x) - phi).abs() < 1e-10, "x = {x}");
    }
}

fn inputs_a() -> TheoryInputs {
    TheoryInputs {
        m: 1.0,
        m2: 1.0,
        rho: 0.1,
        delta: 0.05,
        gamma: 1.0 / 11.0,
        lambda: 1.0,
        k: 3,
        c: 1.0,
        d: 1.0,
        l: 10.0,
        rho_min_bbt: 1.0,
        initial_gap: 2.0,
    }
}

fn inputs_b() -> TheoryInputs {
    TheoryInputs {
        m: 0.5,
        m2: 4.0,
        rho: 0.3,
        delta: 0.2,
        gamma: 0.25,
        lambda: 0.125,
        k: 7,
        c: 2.5,
        d: 16.0,
        l: 3.0,
        rho_min_bbt: 0.5,
        initial_gap: 0.75,
    }
}

#[test]
fn bounds_at_pinned_inputs() {
    let a = inputs_a();
    assert!(a.eta() < 1e-15);
    assert!(rel(expectation_bound(&a, 0).unwrap(), 13.0) < 1e-12);
    assert!(rel(expectation_bound(&a, 10).unwrap(), 12.256_018_785_083_728) < 1e-12);
    assert!(rel(expectation_bound(&a, 1000).unwrap(), 11.0) < 1e-12);
    let sums = gradient_sum_bounds(&a).unwrap();
    assert!(rel(sums[0], 204.0) < 1e-12);
    assert!(sums[1] < 1e-90);
    assert!(rel(sums[2], 408.0) < 1e-12);
    assert!(rel(kl_bound(&a).unwrap(), 42.0) < 1e-12);
    let tv = tv_bound(&a).unwrap();
    assert!(rel(tv.mixing, 0.009_666_123_703_788_417_3) < 1e-12);
    assert!(rel(tv.discretization, 4.568_916_720_624_266_2) < 1e-12);

    let b = inputs_b();
    assert!(rel(b.eta(), 0.9375) < 1e-15);
    assert!(rel(expectation_bound(&b, 0).unwrap(), 408.130_496_950_801_58) < 1e-12);
    assert!(rel(expectation_bound(&b, 10).unwrap(), 407.924_461_221_713_36) < 1e-12);
    assert!(rel(expectation_bound(&b, 1000).unwrap(), 407.380_496_950_801_59) < 1e-12);
    assert!(rel(expectation_bound_limit(&b).unwrap(), 407.380_496_950_801_58) < 1e-12);
    let sums = gradient_sum_bounds(&b).unwrap();
    assert!(rel(sums[0], 1066.858_287_396_272_9) < 1e-12);
    assert!(rel(sums[1], 745.358_287_396_272_9) < 1e-12);
    assert!(rel(sums[2], 3624.433_149_585_091_6) < 1e-12);
    assert!(rel(kl_bound(&b).unwrap(), 694.489_006_630_365_51) < 1e-12);
    let tv = tv_bound(&b).unwrap();
    assert!(rel(tv.mixing, 899.830_682_833_615_96) < 1e-12);
    assert!(rel(tv.discretization, 18.932_183_608_218_342) < 1e-12);
}

#[test]
fn kstep_iterates_on_the_scalar_toy() {
    let toy = make_toy_1d::<f64>(ToyKind::LassoPosterior).unwrap();
    let prob = toy.target.problem();
    let p = PdfpParams {
        gamma: 0.5,
        lambda: 1.0,
    };
    let out = kstep_prox_subproblem(&s(2.0), 1.0, prob, &p, 1).unwrap();
    assert!((out.x.as_slice()[0] - 0.5).abs() < 1e-15);

    let p = PdfpParams {
        gamma: 0.2,
        lambda: 0.8,
    };
    for (k, want) in [(1, 0.36), (2, 0.224), (3, 0.1696), (10, 0.133_392_752_64)] {
        let out = kstep_prox_subproblem(&s(0.7), 0.5, prob, &p, k).unwrap();
        assert!((out.x.as_slice()[0] - want).abs() < 1e-14, "K = {k}");
    }
    let exact = toy.exact_prox(&s(0.7), 0.5).as_slice()[0];
    assert!((exact - 0.133_333_333_333_333_33).abs() < 1e-15);
}

#[test]
fn ula_pdfp_single_step() {
    let toy = make_toy_1d::<f64>(ToyKind::LassoPosterior).unwrap();
    let cfg = SamplerConfig::new(0.5).with_rho(1.0).with_k(1);
    let mut kernel = UlaPdfp::new(&toy.target, &cfg).unwrap();
    let mut state = ChainState::new(s(2.0), ScriptedNoise::constant(0.3, 0.5));
    kernel.step(&mut state).unwrap();
    assert!((state.theta.as_slice()[0] - 1.55).abs() < 1e-14);
}

#[test]
fn mala_pdfp_three_step_trajectory() {
    let toy = make_toy_1d::<f64>(ToyKind::LassoPosterior).unwrap();
    let cfg = SamplerConfig::new(0.4).with_rho(0.5).with_k(2);
    let mut kernel = MalaPdfp::new(&toy.target, &cfg).unwrap();
    let noise = ScriptedNoise::new(vec![0.3, -1.2, 0.7], vec![0.2, 0.9, 0.95]);
    let mut state = ChainState::new(s(1.0), noise);
    let expected = [
        (-0.598_451_437_697_739_64, true, 1.268_328_157_299_974_8, 0.512_218_771_533_316_51),
        (1.159_213_697_803_240_8, true, -0.409_871_980_513_250_89, 0.0),
        (-0.137_049_338_152_944_91, false, -0.409_871_980_513_250_89, 0.0),
    ];
    for (n, (log_a, accepted, theta, p)) in expected.into_iter().enumerate() {
        let out = kernel.step(&mut state).unwrap();
        assert!((out.log_acceptance.unwrap() - log_a).abs() < 1e-13, "step {n}");
        assert_eq!(out.accepted, accepted, "step {n}");
        assert!((state.theta.as_slice()[0] - theta).abs() < 1e-14, "step {n}");
        assert!((state.prox_cache.as_ref().unwrap().as_slice()[0] - p).abs() < 1e-14, "step {n}");
    }
    assert_eq!(state.accept_count, 2);
}

#[test]
fn mala_log_acceptance_on_a_gaussian() {
    let toy = make_toy_1d::<f64>(ToyKind::Gaussian).unwrap();
    let mut kernel = Mala::new(toy.target.problem().smooth(), 0.1, &[1]);
    let mut state = ChainState::new(s(1.0), ScriptedNoise::constant(0.5, 0.0));
    let out = kernel.step(&mut state).unwrap();
    assert!((out.log_acceptance.unwrap() - (-0.006_562_305_898_749_053_6)).abs() < 1e-15);
    assert!((state.theta.as_slice()[0] - 1.123_606_797_749_979).abs() < 1e-15);
}

#[test]
fn prox_ula_single_step_matches_grid_minimizer() {
    let toy = make_toy_1d::<f64>(ToyKind::LassoPosterior).unwrap();
    // argmin |y| + y^2/2 + (y - 2)^2/2 on a grid of step 1e-5
    let grid_min = (0..=400_000)
        .map(|i| -2.0 + i as f64 * 1e-5)
        .map(|y: f64| (y, y.abs() + y * y / 2.0 + (y - 2.0).powi(2) / 2.0))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap()
        .0;
    let mut kernel = ProxUla::new(&toy.target, 1.0, MoreauConfig::new(1.0).unwrap());
    let mut state = ChainState::new(s(2.0), ScriptedNoise::constant(0.0, 0.5));
    kernel.step(&mut state).unwrap();
    assert!((state.theta.as_slice()[0] - grid_min).abs() < 1e-5);
    assert!((state.theta.as_slice()[0] - 0.5).abs() < 1e-9);
}

#[test]
fn prox_energy_closed_forms() {
    let gauss = make_toy_1d::<f64>(ToyKind::Gaussian).unwrap();
    let cfg = MoreauConfig::new(1.0).unwrap();
    let p = prox_energy(&s(2.0), &gauss.target, &cfg, ProxMode::Exact).unwrap();
    assert!(p.converged);
    assert!((p.point.as_slice()[0] - 1.0).abs() < 1e-9);

    // U = |x| alone: Huber envelope value 1.5 at theta = 2
    let abs = CompositeTarget::new(
        CompositeProblem::new(
            Arc::new(ZeroSmooth),
            1.0,
            0.0,
            LinearMap::identity(&[1]),
            SeparablePenalty::l1(1.0).unwrap(),
        )
        .unwrap(),
        "abs",
    );
    let p = prox_energy(&s(2.0), &abs, &cfg, ProxMode::Exact).unwrap();
    assert!((p.point.as_slice()[0] - 1.0).abs() < 1e-9);
    assert!((moreau_value(&s(2.0), &abs, &cfg).unwrap() - 1.5).abs() < 1e-9);
    assert!(moreau_value(&s(0.0), &abs, &cfg).unwrap().abs() < 1e-12);
}

#[test]
fn dense_spectra_match_eigendecomposition_oracle() {
    for (rows, cols, seed) in [(8, 8, 1), (12, 20, 2), (32, 17, 3)] {
        let svals: Vec<f64> = (0..rows.min(cols)).map(|i| 1.0 + 0.37 * i as f64).collect();
        let map = dense_with_singular_values::<f64>(rows, cols, &svals, seed).unwrap();
        // reconstruct the matrix column by column and take its SVD
        let mut m = DMatrix::<f64>::zeros(rows, cols);
        for j in 0..cols {
            let mut e = RealField::zeros(&[cols]);
            e.as_mut_slice()[j] = 1.0;
            let col = map.apply(&e).unwrap();
            m.column_mut(j).copy_from_slice(col.as_slice());
        }
        let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        let mut want = svals.clone();
        want.sort_by(|a, b| b.total_cmp(a));
        for (a, b) in sv.iter().zip(&want) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
        let top = want[0] * want[0];
        let bounds = spectral_bounds_bbt(&map).unwrap();
        assert!(rel(bounds.max, top) < 1e-10);
        let est = power_iteration(&map, 20_000, 1e-14).unwrap();
        assert!(rel(est.value, top) < 1e-6, "{} vs {top}", est.value);
    }
}

#[test]
fn illposed_construction() {
    let decay = geometric_decay(45, 1e3);
    assert_eq!(decay[0], 1.0);
    assert!((decay[44] - 1e-3).abs() < 1e-15);
    let (model, target) = make_illposed_dense::<f64>(45, &[16, 16], 1e3, 0.05, 1.0, 0.0, 7).unwrap();
    assert_eq!(target.dim(), 256);
    let mut m = DMatrix::<f64>::zeros(45, 256);
    for j in 0..256 {
        let mut e = RealField::zeros(&[16, 16]);
        e.as_mut_slice()[j] = 1.0;
        m.column_mut(j).copy_from_slice(model.forward.apply(&e).unwrap().as_slice());
    }
    let svd = m.svd(false, false);
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    assert_eq!(sv.iter().filter(|&&x| x > 1e-8).count(), 45);
    for (a, b) in sv.iter().zip(&decay) {
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn deblur_lipschitz_for_identity_kernel() {
    let truth = RealField::filled(&[4, 4], 0.3);
    let delta = RealField::from_f64(&[1, 1], &[1.0]).unwrap();
    let (model, target) = make_deblur_model(&truth, &delta, 0.1, 1.0, 0.0, Noise::None).unwrap();
    assert!(rel(model.lipschitz().unwrap(), 100.0) < 1e-12);
    assert!(rel(target.problem().lipschitz(), 100.0) < 1e-12);
}
