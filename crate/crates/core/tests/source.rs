use jscsi::channel::sphere_packing_exponent;
use jscsi::optim::rate_grid;
use jscsi::probkit::{binary_entropy, conditional_entropy};
use jscsi::source::*;
use jscsi::{ConditionalDistribution, Distribution, JointDistribution};

fn example_pair() -> JointDistribution {
    JointDistribution::new(vec![vec![0.5, 0.0], vec![0.05, 0.45]]).unwrap()
}

fn bdiv(a: f64, b: f64) -> f64 {
    let t = |x: f64, y: f64| if x > 0.0 { x * (x / y).log2() } else { 0.0 };
    t(a, b) + t(1.0 - a, 1.0 - b)
}

/// `min D(q‖p)` over binary `q` with `h(q) ≥ r`: zero when `h(p) ≥ r`,
/// otherwise attained where `h(q) = r` on the side of `p`, found by bisection.
fn independent_oracle(r: f64, p: f64) -> f64 {
    if binary_entropy(p) >= r {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.5, p.max(1.0 - p));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if binary_entropy(mid) >= r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let q = if p >= 0.5 { lo } else { 1.0 - lo };
    bdiv(q, p)
}

/// `max_{ρ∈[0,1]} ρr - E_s(ρ)` by scanning ρ on a fine grid with the
/// source function written out directly.
fn lower_oracle(r: f64, m: &[[f64; 2]; 2]) -> f64 {
    (0..=20_000)
        .map(|i| i as f64 / 20_000.0)
        .map(|rho| {
            let t = 1.0 / (1.0 + rho);
            let es: f64 = (0..2)
                .map(|b| {
                    (0..2)
                        .map(|a| if m[a][b] > 0.0 { m[a][b].powf(t) } else { 0.0 })
                        .sum::<f64>()
                        .powf(1.0 + rho)
                })
                .sum::<f64>()
                .log2();
            rho * r - es
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn upper_vanishes_below_conditional_entropy() {
    let p = example_pair();
    let h = conditional_entropy(&p);
    let rates = rate_grid(1e-3, 1.0);
    let e = SourceCurves::new(&p).e_upper(&rates);
    for (r, v) in rates.iter().zip(&e) {
        if *r <= h {
            assert_eq!(*v, 0.0, "r {r}");
        } else if *r < 1.0 {
            assert!(*v > 0.0 && v.is_finite(), "r {r}");
        } else {
            assert!(v.is_infinite());
        }
    }
}

#[test]
fn lower_matches_scanned_dual() {
    let m = [[0.5, 0.0], [0.05, 0.45]];
    let p = example_pair();
    let rates = [0.1, 0.3, 0.5, 0.7, 0.9];
    let e = SourceCurves::new(&p).e_lower(&rates);
    for (&r, v) in rates.iter().zip(&e) {
        let o = lower_oracle(r, &m);
        assert!((v - o).abs() < 1e-7, "r {r}: {v} vs {o}");
        assert!((e_lower_dual(r, &p).unwrap().value - o).abs() < 1e-7);
    }
}

#[test]
fn independent_source_reduces_to_entropy_constraint() {
    let pa = Distribution::new(vec![0.8, 0.2]).unwrap();
    let pb = Distribution::new(vec![0.3, 0.7]).unwrap();
    let p = JointDistribution::product(&pa, &pb);
    let rates = [0.2, 0.75, 0.8, 0.9, 0.99];
    let curve = SourceCurves::new(&p).e_upper(&rates);
    for (&r, v) in rates.iter().zip(&curve) {
        let o = independent_oracle(r, 0.8);
        assert!(
            (independent_si_exponent(r, &pa).unwrap() - o).abs() < 1e-6,
            "r {r}"
        );
        assert!((v - o).abs() < 1e-6, "r {r}: {v} vs {o}");
    }
    assert!((independent_si_exponent(1.0, &pa).unwrap() - bdiv(0.5, 0.8)).abs() < 1e-12);
    assert!(independent_si_exponent(1.1, &pa).unwrap().is_infinite());
}

#[test]
fn primal_grid_upper_tracks_dual_and_refines() {
    let p = example_pair();
    let dual = e_upper_dual(0.6, &p).unwrap().value;
    let mut last = f64::INFINITY;
    for step in [0.02, 0.01, 0.005] {
        let primal = SourceGrid::new(&p, step).unwrap().e_upper(0.6).value;
        assert!(primal >= dual - 1e-9);
        assert!(primal <= last + 1e-12);
        last = primal;
    }
    assert!(last - dual < 5e-3);
}

#[test]
fn source_function_slope_at_zero_is_conditional_entropy() {
    let p = example_pair();
    assert!(source_e_s(0.0, &p).abs() < 1e-15);
    let h = 1e-6;
    let slope = (source_e_s(h, &p) - source_e_s(0.0, &p)) / h;
    assert!((slope - conditional_entropy(&p)).abs() < 1e-5);
}

#[test]
fn fixed_marginal_minimum_recovers_upper() {
    let p = example_pair();
    let rates = [0.3, 0.5, 0.7];
    let direct = SourceCurves::new(&p).e_upper(&rates);
    let mut best = vec![f64::INFINITY; rates.len()];
    for i in 1..200 {
        let q = Distribution::new(vec![i as f64 / 200.0, 1.0 - i as f64 / 200.0]).unwrap();
        let e = FixedMarginalCurve::new(&p, &q).unwrap().e_upper(&rates);
        for k in 0..rates.len() {
            best[k] = best[k].min(e[k]);
        }
    }
    for k in 0..rates.len() {
        assert!(best[k] >= direct[k] - 1e-6, "r {}", rates[k]);
        assert!(
            best[k] - direct[k] < 2e-3,
            "r {}: {} vs {}",
            rates[k],
            best[k],
            direct[k]
        );
    }
}

#[test]
fn fixed_marginal_is_sphere_packing_at_complementary_rate() {
    let q = Distribution::new(vec![0.6, 0.4]).unwrap();
    let k = ConditionalDistribution::new(vec![vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
    for r in [0.1, 0.3, 0.5] {
        let rep = duality_check(r, &q, &k, 0.01).unwrap();
        assert!(rep.discrepancy < 1e-2, "{rep:?}");
        assert!(rep.discrepancy_dual < 1e-2, "{rep:?}");
        let esp = sphere_packing_exponent(
            binary_entropy(0.6) - r,
            &q,
            &k,
            jscsi::channel::Method::GallagerDual,
        )
        .unwrap();
        assert!((esp.value - rep.rhs_dual).abs() < 1e-12);
    }
    assert!(duality_check(0.98, &q, &k, 0.01).is_err());
}

#[test]
fn negative_rates_rejected() {
    let p = example_pair();
    assert!(e_upper_dual(-0.1, &p).is_err());
    assert!(e_lower(-0.1, &p).is_err());
    assert!(independent_si_exponent(-0.1, &p.row_marginal()).is_err());
}
