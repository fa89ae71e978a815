use std::path::Path;

use expfun::exec::Execution;
use expfun::mc::{self, Integrator, SimulationConfig};
use expfun::moments::{self, QuadratureOptions};
use expfun::process::{JumpMeasure, LaplaceExponent, LevyTriplet, Process};
use expfun::spec::SpecDocument;
use proptest::prelude::*;

fn corpus() -> Vec<(String, Process)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus");
    let mut out: Vec<(String, Process)> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .map(|p| {
            let doc = SpecDocument::load(&p).unwrap();
            (p.file_name().unwrap().to_string_lossy().into_owned(), doc.to_process().unwrap())
        })
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    assert!(out.len() >= 8, "corpus went missing");
    out
}

fn jumps() -> impl Strategy<Value = JumpMeasure> {
    prop_oneof![
        Just(JumpMeasure::None),
        (0.1..3.0f64, 0.2..2.0f64).prop_map(|(rate, x)| JumpMeasure::point_masses(&[(x, rate)]).unwrap()),
        (0.1..2.0f64, -0.5..0.5f64, 0.1..0.6f64)
            .prop_map(|(rate, mean, std)| JumpMeasure::gaussian(rate, mean, std).unwrap()),
        (0.2..2.0f64, 0.5..3.0f64, 0.1..0.9f64)
            .prop_map(|(c, m, beta)| JumpMeasure::tempered_stable(c, m, beta).unwrap()),
    ]
}

fn triplet() -> impl Strategy<Value = LevyTriplet> {
    (-1.0..2.0f64, 0.0..1.5f64, jumps()).prop_map(|(b0, c0, j)| LevyTriplet::new(b0, c0, j).unwrap())
}

fn concavity_defect(phi: &dyn LaplaceExponent) -> f64 {
    let vals: Vec<Option<f64>> = (-8..=8)
        .map(|i| phi.exponent(f64::from(i) * 0.375).unwrap().finite())
        .collect();
    vals.windows(3)
        .filter_map(|w| match w {
            [Some(a), Some(b), Some(c)] => Some((a + c - 2.0 * b) / a.abs().max(b.abs()).max(c.abs()).max(1.0)),
            _ => None,
        })
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exponent_vanishes_at_zero_and_is_concave(t in triplet()) {
        prop_assert!(t.exponent(0.0).unwrap().finite().unwrap().abs() < 1e-12);
        prop_assert!(concavity_defect(&t) < 1e-9);
    }

    #[test]
    fn ladder_is_positive_increasing_and_lyapunov(tr in triplet(), t in 0.1..2.0f64) {
        let full = moments::moments_auto(&tr, t, 3).unwrap();
        let half = moments::moments_auto(&tr, t / 2.0, 3).unwrap();
        for k in 1..=3 {
            let v = full.value(k).unwrap();
            prop_assert!(v > 0.0);
            prop_assert!(half.value(k).unwrap() < v);
        }
        for k in 2..=3 {
            let lo = full.value(k - 1).unwrap().powf(1.0 / f64::from(k - 1));
            let hi = full.value(k).unwrap().powf(1.0 / f64::from(k));
            prop_assert!(lo <= hi * (1.0 + 1e-9), "order {}: {} > {}", k, lo, hi);
        }
        // E(I_t) <= t e^{max(0, -Φ(1)) t}: Jensen on the integrand
        let p1 = tr.exponent(1.0).unwrap().finite().unwrap();
        prop_assert!(full.value(1).unwrap() <= t * ((-p1).max(0.0) * t).exp() * (1.0 + 1e-9));
    }

    #[test]
    fn laplace_carson_recurrence(tr in triplet(), q in prop::sample::select(vec![0.1, 1.0, 10.0])) {
        let mut n = 3;
        while n > 0 && moments::infinite_moment(&tr, n).unwrap().is_infinite() {
            n -= 1;
        }
        prop_assume!(n > 0);
        let lc = moments::laplace_carson_ladder(&tr, q, n).unwrap();
        for k in 1..=n as usize {
            let p = tr.exponent(k as f64).unwrap().finite().unwrap();
            prop_assert!(((q + p) * lc[k] - k as f64 * lc[k - 1]).abs() / lc[k - 1] < 1e-12);
        }
    }
}

#[test]
fn corpus_exponents() {
    for (name, p) in corpus() {
        match p.levy() {
            Some(phi) => {
                assert!(phi.exponent(0.0).unwrap().finite().unwrap().abs() < 1e-12, "{name}");
                assert!(concavity_defect(phi) < 1e-9, "{name}");
            }
            None => {
                let pii = p.pii().unwrap();
                assert!(pii.phi_t(1.0, 0.0).unwrap().finite().unwrap().abs() < 1e-12, "{name}");
                for s in [0.0, 0.5, 1.0] {
                    let h: Vec<Option<f64>> = (-4..=4)
                        .map(|i| pii.h_alpha(s, f64::from(i) * 0.5).unwrap().finite())
                        .collect();
                    for w in h.windows(3) {
                        if let [Some(a), Some(b), Some(c)] = w {
                            assert!(a + c - 2.0 * b < 1e-9 * b.abs().max(1.0), "{name} at s = {s}");
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn corpus_ladders() {
    for (name, p) in corpus() {
        let ladder = |t: f64| match p.levy() {
            Some(phi) => moments::moments_auto(phi, t, 3),
            None => moments::pii_moment_quadrature(p.pii().unwrap(), t, 3, QuadratureOptions::default()),
        };
        let full = ladder(1.0).unwrap();
        let half = ladder(0.5).unwrap();
        for k in 1..=3 {
            let v = full.value(k).unwrap();
            assert!(v > 0.0 && half.value(k).unwrap() < v, "{name} order {k}");
        }
        for k in 2..=3 {
            let lo = full.value(k - 1).unwrap().powf(1.0 / f64::from(k - 1));
            let hi = full.value(k).unwrap().powf(1.0 / f64::from(k));
            assert!(lo <= hi * (1.0 + 1e-9), "{name} order {k}");
        }
    }
}

#[test]
fn corpus_double_reversal() {
    for (name, p) in corpus() {
        let Some(pii) = p.pii() else { continue };
        let ito = pii.to_ito();
        for t in [0.7, 2.0] {
            let twice = ito.reflect(t).reflect(t);
            for j in 0..=10 {
                let s = t * f64::from(j) / 10.0;
                for alpha in [-1.0, 0.5, 2.0] {
                    let a = ito.h_alpha(s, alpha).unwrap().finite();
                    let b = twice.h_alpha(s, alpha).unwrap().finite();
                    match (a, b) {
                        (Some(a), Some(b)) => assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{name}"),
                        (a, b) => assert_eq!(a.is_none(), b.is_none(), "{name}"),
                    }
                }
            }
        }
    }
}

fn small(seed: u64, n: usize) -> SimulationConfig {
    SimulationConfig {
        n_paths: n,
        time_step: 1e-2,
        seed,
        ..SimulationConfig::default()
    }
}

#[test]
fn corpus_mc_reproducible() {
    for (name, p) in corpus() {
        let cfg = small(5, 400);
        let a = mc::estimate_functional_moment(&p, 1.0, 1.0, &cfg).unwrap();
        let b = mc::estimate_functional_moment(&p, 1.0, 1.0, &cfg).unwrap();
        assert_eq!(a, b, "{name}");
        let seq = SimulationConfig {
            execution: Execution::Sequential,
            ..cfg
        };
        let c = mc::estimate_functional_moment(&p, 1.0, 1.0, &seq).unwrap();
        assert_eq!(a.mean.to_bits(), c.mean.to_bits(), "{name}");
        assert_eq!(a.std_error.to_bits(), c.std_error.to_bits(), "{name}");
        let other = mc::estimate_functional_moment(&p, 1.0, 1.0, &small(6, 400)).unwrap();
        assert_ne!(a.mean, other.mean, "{name}");
    }
}

/// Largest order in {1, 1/2, 1/4} with `E e^{-4αX_1} <= e^2`, so that the
/// sample standard error is itself stable.
fn stable_order(p: &Process) -> f64 {
    let Some(phi) = p.levy() else { return 1.0 };
    [1.0, 0.5, 0.25]
        .into_iter()
        .find(|a| phi.exponent(4.0 * a).unwrap().finite().is_some_and(|v| v >= -2.0))
        .unwrap_or(0.25)
}

#[test]
fn corpus_mc_standard_error_scales() {
    for (name, p) in corpus() {
        let n = 4_000;
        let alpha = stable_order(&p);
        let a = mc::estimate_functional_moment(&p, 1.0, alpha, &small(1, n)).unwrap();
        let b = mc::estimate_functional_moment(&p, 1.0, alpha, &small(1, 4 * n)).unwrap();
        let ratio = b.std_error / a.std_error;
        assert!((ratio - 0.5).abs() < 0.1, "{name}: {ratio}");
    }
}

#[test]
fn exact_and_grid_integrators_agree() {
    let p: Process = LevyTriplet::poisson(2.0).unwrap().into();
    let base = small(9, 40_000);
    let exact = mc::estimate_functional_moment(&p, 1.0, 1.0, &base).unwrap();
    assert_eq!(exact.integrator, Integrator::Exact);
    let grid = SimulationConfig {
        integrator: Integrator::Grid,
        time_step: 1e-3,
        ..base
    };
    let g = mc::estimate_functional_moment(&p, 1.0, 1.0, &grid).unwrap();
    assert!(mc::combined_z(&exact, &g) < 4.0);
}
