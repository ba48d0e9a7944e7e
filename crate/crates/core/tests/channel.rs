use jscsi::channel::*;
use jscsi::optim::rate_grid;
use jscsi::probkit::binary_entropy;
use jscsi::{ConditionalDistribution, Distribution};
use proptest::prelude::*;

fn bdiv(a: f64, b: f64) -> f64 {
    let t = |x: f64, y: f64| if x > 0.0 { x * (x / y).log2() } else { 0.0 };
    t(a, b) + t(1.0 - a, 1.0 - b)
}

/// Sphere packing of the BSC: `D(δ‖ε)` with `h(δ) = 1 - R`.
fn bsc_sphere_oracle(r: f64, eps: f64) -> f64 {
    if r >= 1.0 - binary_entropy(eps) {
        return 0.0;
    }
    let (mut lo, mut hi) = (eps, 0.5);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if binary_entropy(mid) < 1.0 - r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    bdiv(0.5 * (lo + hi), eps)
}

/// Random coding of the BSC: straight line `R_0 - R` below the critical rate.
fn bsc_random_oracle(r: f64, eps: f64) -> f64 {
    let d = eps.sqrt() / (eps.sqrt() + (1.0 - eps).sqrt());
    let r_cr = 1.0 - binary_entropy(d);
    if r >= r_cr {
        bsc_sphere_oracle(r, eps)
    } else {
        let r0 = 1.0 - 2.0 * (eps.sqrt() + (1.0 - eps).sqrt()).log2();
        r0 - r
    }
}

#[test]
fn e0_matches_bsc_closed_form() {
    let eps: f64 = 0.025;
    let w = ConditionalDistribution::bsc(eps).unwrap();
    for rho in [0.0, 0.3, 1.0, 4.0] {
        let t = 1.0 / (1.0 + rho);
        let expect = rho - (1.0 + rho) * (eps.powf(t) + (1.0 - eps).powf(t)).log2();
        let got = gallager_e0(rho, &Distribution::uniform(2), &w).unwrap();
        assert!((got - expect).abs() < 1e-12, "rho {rho}: {got} vs {expect}");
    }
    assert!(gallager_e0(-0.1, &Distribution::uniform(2), &w).is_err());
}

#[test]
fn bsc_exponents_match_closed_forms() {
    for eps in [0.025, 0.11] {
        let w = ConditionalDistribution::bsc(eps).unwrap();
        let u = Distribution::uniform(2);
        for r in [0.05, 0.2, 0.4, 0.6, 0.8] {
            let er = random_coding_exponent(r, &u, &w, Method::GallagerDual)
                .unwrap()
                .value;
            let esp = sphere_packing_exponent(r, &u, &w, Method::GallagerDual)
                .unwrap()
                .value;
            assert!(
                (er - bsc_random_oracle(r, eps)).abs() < 1e-7,
                "E_r eps {eps} r {r}: {er}"
            );
            assert!(
                (esp - bsc_sphere_oracle(r, eps)).abs() < 1e-7,
                "E_sp eps {eps} r {r}: {esp}"
            );
        }
    }
}

#[test]
fn input_optimized_curves_match_bsc_and_critical_rate() {
    let eps: f64 = 0.025;
    let w = ConditionalDistribution::bsc(eps).unwrap();
    let rates = rate_grid(0.01, 1.0);
    let curves = InputOptimized::new(&w).curves(&rates);
    for (i, &r) in rates.iter().enumerate() {
        assert!(
            (curves.random[i] - bsc_random_oracle(r, eps)).abs() < 1e-7,
            "r {r}"
        );
        if r < 1.0 {
            assert!(
                (curves.sphere[i] - bsc_sphere_oracle(r, eps)).abs() < 1e-6,
                "r {r}"
            );
        }
    }
    let d = eps.sqrt() / (eps.sqrt() + (1.0 - eps).sqrt());
    let r_cr = 1.0 - binary_entropy(d);
    let cr = critical_rate(&w).unwrap();
    assert!((cr.analytic - r_cr).abs() < 1e-6);
    assert!(
        cr.value >= r_cr - 1e-3 && cr.value <= r_cr + 2e-3,
        "{}",
        cr.value
    );
}

#[test]
fn primal_grid_tracks_dual() {
    let w = ConditionalDistribution::new(vec![vec![0.8, 0.2], vec![0.3, 0.7]]).unwrap();
    let s = Distribution::new(vec![0.4, 0.6]).unwrap();
    for r in [0.02, 0.05, 0.1] {
        let dual = random_coding_exponent(r, &s, &w, Method::GallagerDual)
            .unwrap()
            .value;
        let primal = random_coding_exponent(r, &s, &w, Method::PrimalGrid { step: 0.005 })
            .unwrap()
            .value;
        assert!(primal >= dual - 1e-9, "primal {primal} below dual {dual}");
        assert!(primal - dual < 5e-3, "r {r}: {primal} vs {dual}");
    }
}

#[test]
fn capacity_closed_forms() {
    let c = capacity(&ConditionalDistribution::bsc(0.025).unwrap());
    assert!((c - (1.0 - binary_entropy(0.025))).abs() < 1e-8);
    let c = capacity(&ConditionalDistribution::bec(0.3).unwrap());
    assert!((c - 0.7).abs() < 1e-8);
    // Z channel: C = log2(1 + (1-p) p^{p/(1-p)}).
    let p: f64 = 0.3;
    let z = ConditionalDistribution::new(vec![vec![1.0, 0.0], vec![p, 1.0 - p]]).unwrap();
    let expect = (1.0 + (1.0 - p) * p.powf(p / (1.0 - p))).log2();
    assert!((capacity(&z) - expect).abs() < 1e-8);
}

#[test]
fn exponents_positive_exactly_below_capacity() {
    let w = ConditionalDistribution::bsc(0.025).unwrap();
    let c = capacity(&w);
    let opt = InputOptimized::new(&w);
    let rates = rate_grid(1e-3, 1.0);
    let curves = opt.curves(&rates);
    for (i, &r) in rates.iter().enumerate() {
        if r < c - 1e-3 {
            assert!(curves.random[i] > 0.0 && curves.sphere[i] > 0.0, "r {r}");
        } else if r > c + 1e-9 {
            assert_eq!(curves.random[i], 0.0, "r {r}");
            assert_eq!(curves.sphere[i], 0.0, "r {r}");
        }
    }
}

#[test]
fn gallager_symmetry_detection() {
    assert!(is_gallager_symmetric(&ConditionalDistribution::bsc(0.1).unwrap()).symmetric);
    assert!(is_gallager_symmetric(&ConditionalDistribution::bec(0.3).unwrap()).symmetric);
    assert!(is_gallager_symmetric(&ConditionalDistribution::identity(3)).symmetric);
    let z = ConditionalDistribution::new(vec![vec![1.0, 0.0], vec![0.3, 0.7]]).unwrap();
    assert!(!is_gallager_symmetric(&z).symmetric);
}

#[test]
fn noiseless_channel_has_equal_random_coding_and_sphere_packing() {
    let w = ConditionalDistribution::identity(2);
    let u = Distribution::uniform(2);
    for r in [0.2, 0.5, 0.9] {
        let er = random_coding_exponent(r, &u, &w, Method::GallagerDual)
            .unwrap()
            .value;
        let esp = sphere_packing_exponent(r, &u, &w, Method::GallagerDual)
            .unwrap()
            .value;
        // E_0(ρ) = ρ for the noiseless binary channel, so E_r = 1 - R; E_sp diverges.
        assert!((er - (1.0 - r)).abs() < 1e-9);
        assert!(esp.is_infinite());
    }
}

#[test]
fn rate_domain_errors() {
    let w = ConditionalDistribution::bsc(0.1).unwrap();
    let u = Distribution::uniform(2);
    assert!(random_coding_exponent(-0.1, &u, &w, Method::GallagerDual).is_err());
    assert!(sphere_packing_exponent(0.0, &u, &w, Method::GallagerDual).is_err());
    assert!(critical_rate(&ConditionalDistribution::bsc(0.5).unwrap()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn curves_are_convex_and_ordered(a in 0.01f64..0.99, b in 0.01f64..0.99) {
        let w = ConditionalDistribution::new(vec![vec![a, 1.0 - a], vec![b, 1.0 - b]]).unwrap();
        let rates = rate_grid(0.01, 1.0);
        let curves = InputOptimized::new(&w).curves(&rates);
        for i in 1..rates.len() - 1 {
            let d2 = |v: &[f64]| v[i - 1] - 2.0 * v[i] + v[i + 1];
            prop_assert!(d2(&curves.random) >= -1e-8);
            if curves.sphere[i - 1].is_finite() {
                prop_assert!(d2(&curves.sphere) >= -1e-8);
            }
        }
        for i in 0..rates.len() {
            prop_assert!(curves.random[i] <= curves.sphere[i] + 1e-9);
        }
    }
}
