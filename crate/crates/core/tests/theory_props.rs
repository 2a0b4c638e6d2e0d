use pdfp_langevin::theory::{
    empirical_bound_check, expectation_bound, expectation_bound_limit, gradient_sum_bounds, kl_bound, tv_bound,
    BoundCheckConfig, TheoryInputs,
};
use pdfp_langevin::*;
use proptest::prelude::*;

const FIXTURE: &str = include_str!("data/bounds_oracle.csv");

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1e-300)
}

#[test]
fn bounds_match_the_high_precision_fixture() {
    let mut lines = FIXTURE.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.len(), 21);
    let mut rows = 0;
    for line in lines.filter(|l| !l.is_empty()) {
        let v: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        let inp = TheoryInputs {
            m: v[0],
            m2: v[1],
            rho: v[2],
            delta: v[3],
            gamma: v[4],
            lambda: v[5],
            k: v[6] as u32,
            c: v[7],
            d: v[8],
            l: v[9],
            rho_min_bbt: v[10],
            initial_gap: v[11],
        };
        let n = v[12] as u64;
        let sums = gradient_sum_bounds(&inp).unwrap();
        let tv = tv_bound(&inp).unwrap();
        let got = [
            expectation_bound(&inp, n).unwrap(),
            expectation_bound_limit(&inp).unwrap(),
            sums[0],
            sums[1],
            sums[2],
            kl_bound(&inp).unwrap(),
            tv.mixing,
            tv.discretization,
        ];
        for (i, (g, want)) in got.iter().zip(&v[13..]).enumerate() {
            assert!(rel_close(*g, *want, 1e-12), "row {rows}, {}: {g} vs {want}", header[13 + i]);
        }
        rows += 1;
    }
    assert_eq!(rows, 100);
}

fn inputs() -> impl Strategy<Value = TheoryInputs> {
    (
        0.1f64..3.0,
        1.0f64..2.0,
        0.05f64..2.0,
        0.01f64..1.0,
        0.2f64..1.8,
        0.2f64..1.0,
        1u32..12,
        0.0f64..3.0,
        1.0f64..50.0,
        (0.5f64..60.0, 0.0f64..1.0, 0.0f64..10.0),
    )
        .prop_map(|(m, ratio, rho, dfrac, gfrac, lambda, k, c, d, (l, rmin, gap))| {
            let m2 = m * ratio;
            TheoryInputs {
                m,
                m2,
                rho,
                delta: dfrac * rho,
                gamma: gfrac / (m2 + 1.0 / rho),
                lambda,
                k,
                c,
                d: d.round(),
                l,
                rho_min_bbt: rmin,
                initial_gap: gap,
            }
        })
}

proptest! {
    #[test]
    fn expectation_bound_decreases_to_its_limit(inp in inputs(), n in 0u64..5000) {
        let now = expectation_bound(&inp, n).unwrap();
        let next = expectation_bound(&inp, n + 1).unwrap();
        let limit = expectation_bound_limit(&inp).unwrap();
        prop_assert!(next <= now * (1.0 + 1e-14));
        prop_assert!(limit <= next * (1.0 + 1e-14));
        prop_assert!(expectation_bound(&inp, 0).unwrap() >= inp.initial_gap);
    }

    #[test]
    fn accumulated_bounds_grow_with_l(inp in inputs(), extra in 0.1f64..20.0) {
        let longer = TheoryInputs { l: inp.l + extra, ..inp };
        let a = gradient_sum_bounds(&inp).unwrap();
        let b = gradient_sum_bounds(&longer).unwrap();
        for i in 0..3 {
            prop_assert!(b[i] >= a[i]);
        }
        prop_assert!(kl_bound(&longer).unwrap() >= kl_bound(&inp).unwrap());
        let (ta, tb) = (tv_bound(&inp).unwrap(), tv_bound(&longer).unwrap());
        prop_assert!(tb.mixing <= ta.mixing);
        prop_assert!(tb.discretization >= ta.discretization);
    }

    #[test]
    fn more_inner_steps_never_loosen_the_bounds(inp in inputs(), more in 1u32..10) {
        let deeper = TheoryInputs { k: inp.k + more, ..inp };
        prop_assert!(expectation_bound_limit(&deeper).unwrap() <= expectation_bound_limit(&inp).unwrap() * (1.0 + 1e-14));
        let a = gradient_sum_bounds(&inp).unwrap();
        let b = gradient_sum_bounds(&deeper).unwrap();
        prop_assert!(b[1] <= a[1] * (1.0 + 1e-14));
        prop_assert!(kl_bound(&deeper).unwrap() <= kl_bound(&inp).unwrap() * (1.0 + 1e-14));
        prop_assert!(tv_bound(&deeper).unwrap().discretization <= tv_bound(&inp).unwrap().discretization * (1.0 + 1e-14));
    }

    #[test]
    fn all_bounds_are_nonnegative(inp in inputs()) {
        prop_assert!(expectation_bound_limit(&inp).unwrap() >= 0.0);
        prop_assert!(gradient_sum_bounds(&inp).unwrap().iter().all(|b| *b >= 0.0));
        prop_assert!(kl_bound(&inp).unwrap() >= 0.0);
        let tv = tv_bound(&inp).unwrap();
        prop_assert!(tv.mixing >= 0.0 && tv.discretization >= 0.0);
    }
}

#[test]
fn bounds_reject_unmet_hypotheses() {
    let base = TheoryInputs {
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
        initial_gap: 1.0,
    };
    assert!(expectation_bound(&base, 5).is_ok());
    let no_convexity = TheoryInputs {
        m: 0.0,
        rho_min_bbt: 0.0,
        ..base
    };
    assert!(matches!(expectation_bound(&no_convexity, 5), Err(Error::Hypothesis(_))));
    assert!(matches!(tv_bound(&no_convexity), Err(Error::Hypothesis(_))));
    assert!(matches!(kl_bound(&no_convexity), Err(Error::Hypothesis(_))));
    let no_m = TheoryInputs { m: 0.0, ..base };
    assert!(matches!(expectation_bound(&no_m, 5), Err(Error::Hypothesis(_))));
    // without m the sums still hold as long as BB^T is invertible
    assert!(gradient_sum_bounds(&no_m).is_ok());
    let big_step = TheoryInputs { delta: 0.2, ..base };
    assert!(expectation_bound(&big_step, 5).is_err());
    let bad_gamma = TheoryInputs { gamma: 1.0, ..base };
    assert!(matches!(kl_bound(&bad_gamma), Err(Error::Hypothesis(_))));
}

#[test]
fn monte_carlo_respects_the_bounds_on_both_toys() {
    for kind in [ToyKind::LassoPosterior, ToyKind::Gaussian] {
        let toy = make_toy::<f64>(kind, 2).unwrap();
        for k in [1, 5] {
            let mut cfg = BoundCheckConfig::new(0.05, 0.1, k);
            cfg.seed = 11;
            let report = empirical_bound_check(&toy, &cfg).unwrap();
            for r in &report.rows {
                assert!(r.holds, "{kind:?} K={k} {}@{}: {} vs {}", r.quantity, r.n, r.empirical, r.bound);
            }
        }
    }
}

#[test]
fn inexactness_floor_shrinks_with_k() {
    let toy = make_toy_1d::<f64>(ToyKind::LassoPosterior).unwrap();
    let run = |k| {
        // shortened inner steps give eta = 0.7, so K matters
        let mut cfg = BoundCheckConfig::new(0.05, 0.1, k);
        cfg.gamma_scale = 0.3;
        cfg.lambda_scale = 0.3;
        cfg.checkpoints = vec![0, 1000, 2000];
        empirical_bound_check(&toy, &cfg).unwrap()
    };
    let (one, twenty) = (run(1), run(20));
    assert!((one.inputs.eta() - 0.7).abs() < 1e-12);
    assert!(one.all_hold() && twenty.all_hold());
    assert!(expectation_bound_limit(&twenty.inputs).unwrap() < expectation_bound_limit(&one.inputs).unwrap());
    let row = |r: &pdfp_langevin::theory::BoundReport, q: &str, n: usize| {
        r.rows.iter().find(|r| r.quantity == q && r.n == n).unwrap().clone()
    };
    let (g1, g20) = (row(&one, "expectation", 2000), row(&twenty, "expectation", 2000));
    println!("gap K=1 {} +- {}, K=20 {} +- {}", g1.empirical, g1.stderr, g20.empirical, g20.stderr);
    assert!(g20.empirical < g1.empirical);
    let (e1, e20) = (row(&one, "error_sum", 2000), row(&twenty, "error_sum", 2000));
    println!("error sum K=1 {}, K=20 {}", e1.empirical, e20.empirical);
    assert!(e20.empirical < e1.empirical);
}
