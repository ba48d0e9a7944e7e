//! Scalar and simplex optimization primitives shared by the exponent solvers.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Maximizes a unimodal function on `[lo, hi]` by golden-section search.
///
/// Both endpoints are also evaluated so that boundary optima are returned
/// exactly rather than to within the bracket tolerance.
pub fn golden_max<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let mut best = if fc >= fd { (c, fc) } else { (d, fd) };
    for x in [lo, hi] {
        let fx = f(x);
        if fx > best.1 {
            best = (x, fx);
        }
    }
    best
}

/// Outcome of maximizing a concave function on `[0, cap]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HalfLineMax {
    pub argmax: f64,
    pub value: f64,
    /// The objective was still increasing at `cap`.
    pub diverged: bool,
}

/// Maximizes a concave function on `[0, cap]`, growing the bracket
/// geometrically from `[0, 1]` until the objective turns down.
pub fn maximize_concave_halfline<F: FnMut(f64) -> f64>(
    mut f: F,
    cap: f64,
    tol: f64,
) -> HalfLineMax {
    let mut hi = 1.0f64.min(cap);
    let mut f_hi = f(hi);
    loop {
        if hi >= cap {
            // Concavity: increasing just below cap means the sup is beyond it.
            let probe = cap * (1.0 - 1e-6);
            let diverged = f_hi > f(probe) + 1e-12 * f_hi.abs().max(1.0);
            if diverged {
                return HalfLineMax {
                    argmax: cap,
                    value: f_hi,
                    diverged: true,
                };
            }
            break;
        }
        let next = (hi * 2.0).min(cap);
        let f_next = f(next);
        if f_next <= f_hi {
            hi = next;
            break;
        }
        hi = next;
        f_hi = f_next;
    }
    let (argmax, value) = golden_max(&mut f, 0.0, hi, tol * hi.max(1.0));
    HalfLineMax {
        argmax,
        value,
        diverged: false,
    }
}

/// Minimizes a convex function on the probability simplex by pairwise mass
/// exchange: each step moves mass between two coordinates along the segment
/// that keeps the point on the simplex, with a golden-section line search.
///
/// Returns the minimizer and its value. `init` must lie on the simplex.
pub fn minimize_convex_on_simplex<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    init: Vec<f64>,
    tol: f64,
    max_sweeps: usize,
) -> (Vec<f64>, f64) {
    let n = init.len();
    let mut x = init;
    let mut fx = f(&x);
    if n < 2 {
        return (x, fx);
    }
    let mut trial = x.clone();
    for _ in 0..max_sweeps {
        let start = fx;
        for i in 0..n {
            for j in (i + 1)..n {
                let total = x[i] + x[j];
                if total <= 0.0 {
                    continue;
                }
                let (t, ft) = golden_max(
                    |t| {
                        trial.copy_from_slice(&x);
                        trial[i] = t;
                        trial[j] = total - t;
                        -f(&trial)
                    },
                    0.0,
                    total,
                    1e-13 * total.max(1e-300),
                );
                if -ft < fx {
                    x[i] = t;
                    x[j] = total - t;
                    fx = -ft;
                }
            }
        }
        if start - fx <= tol * fx.abs().max(1.0) {
            break;
        }
    }
    (x, fx)
}

/// All points of the simplex lattice `{k / denom : Σ k = denom}` over
/// `dim` coordinates whose nonzero entries lie inside `support`.
///
/// Points are produced in a fixed lexicographic order, so grids built with
/// denominators `d` and `2d` nest exactly (`k/d` and `2k/2d` are the same
/// double).
pub fn simplex_lattice(dim: usize, denom: u32, support: &[bool]) -> Vec<Vec<u32>> {
    let free: Vec<usize> = (0..dim).filter(|&i| support[i]).collect();
    let mut out = Vec::new();
    if free.is_empty() {
        return out;
    }
    let mut counts = vec![0u32; free.len()];
    fn rec(
        pos: usize,
        left: u32,
        counts: &mut [u32],
        free: &[usize],
        dim: usize,
        out: &mut Vec<Vec<u32>>,
    ) {
        if pos + 1 == counts.len() {
            counts[pos] = left;
            let mut full = vec![0u32; dim];
            for (c, &i) in counts.iter().zip(free) {
                full[i] = *c;
            }
            out.push(full);
            return;
        }
        for k in 0..=left {
            counts[pos] = k;
            rec(pos + 1, left - k, counts, free, dim, out);
        }
    }
    rec(0, denom, &mut counts, &free, dim, &mut out);
    out
}

/// Number of lattice points [`simplex_lattice`] would produce for `free`
/// supported coordinates.
pub fn simplex_lattice_size(free: usize, denom: u32) -> u128 {
    if free == 0 {
        return 0;
    }
    // C(denom + free - 1, free - 1)
    let (n, k) = (denom as u128 + free as u128 - 1, free as u128 - 1);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) / (i + 1);
    }
    c
}

/// Converts a step such as `0.005` into the lattice denominator `200`.
pub fn step_denominator(step: f64) -> Option<u32> {
    if !(step > 0.0 && step <= 1.0) {
        return None;
    }
    let d = (1.0 / step).round();
    if ((1.0 / d) - step).abs() > 1e-12 * step.max(1e-300) * 1e3 {
        return None;
    }
    Some(d as u32)
}

/// Samples of a concave function `f(ρ)` summarized by their upper hull, for
/// evaluating `sup_ρ f(ρ) - ρ R` at many rates at once.
#[derive(Clone, Debug)]
pub struct LegendreHull {
    rho: Vec<f64>,
    value: Vec<f64>,
    /// Largest sampled ρ; a supporting vertex here with positive slope means
    /// the supremum was not reached.
    cap: f64,
}

/// Result of evaluating a [`LegendreHull`] at one rate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HullPoint {
    pub value: f64,
    pub rho: f64,
    pub diverged: bool,
}

impl LegendreHull {
    /// `samples` must be sorted by ρ, starting at ρ = 0.
    pub fn new(samples: &[(f64, f64)]) -> Self {
        let mut hull: Vec<(f64, f64)> = Vec::with_capacity(samples.len());
        for &p in samples {
            while hull.len() >= 2 {
                let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
                // Pop b if it lies on or below the chord a -> p.
                let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
                if cross >= 0.0 {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(p);
        }
        let cap = samples.last().map_or(0.0, |p| p.0);
        Self {
            rho: hull.iter().map(|p| p.0).collect(),
            value: hull.iter().map(|p| p.1).collect(),
            cap,
        }
    }

    /// `max_k f(ρ_k) - ρ_k R` for each rate; `rates` must be ascending.
    /// Divergence is reported when the supporting vertex is the last sample
    /// and the hull is still rising there faster than `R`.
    pub fn eval_sorted(&self, rates: &[f64]) -> Vec<HullPoint> {
        let last = self.rho.len() - 1;
        let mut k = last;
        let mut out = Vec::with_capacity(rates.len());
        for &r in rates {
            // Supporting vertex moves toward ρ = 0 as R grows.
            while k > 0
                && self.value[k - 1] - self.rho[k - 1] * r >= self.value[k] - self.rho[k] * r
            {
                k -= 1;
            }
            let value = self.value[k] - self.rho[k] * r;
            let diverged = k == last && last > 0 && {
                let slope = (self.value[last] - self.value[last - 1])
                    / (self.rho[last] - self.rho[last - 1]);
                slope > r + 1e-9 * r.abs().max(1.0) && self.rho[last] >= self.cap
            };
            out.push(HullPoint {
                value,
                rho: self.rho[k],
                diverged,
            });
        }
        out
    }
}

/// Rates `step, 2·step, …` up to and including `max` (to within 1e-9).
pub fn rate_grid(step: f64, max: f64) -> Vec<f64> {
    let count = (max / step + 1e-9).floor() as usize;
    (1..=count).map(|i| i as f64 * step).collect()
}

/// A function `f(ρ)` sampled on [`rho_samples`], answering
/// `sup_ρ f(ρ) - ρ r` over `[0, 1]` or `[0, cap]` for many rates.
#[derive(Clone, Debug)]
pub struct Profile {
    unit: LegendreHull,
    full: LegendreHull,
    rho_unit: Vec<f64>,
    rho_full: Vec<f64>,
}

impl Profile {
    pub fn sample<F: Fn(f64) -> f64 + Sync>(f: F, cap: f64) -> Self {
        Self::sample_at(f, rho_samples(cap))
    }

    /// Samples at the given ascending ρ values, which must start at 0.
    pub fn sample_at<F: Fn(f64) -> f64 + Sync>(f: F, rho_full: Vec<f64>) -> Self {
        use rayon::prelude::*;
        let samples: Vec<(f64, f64)> = rho_full.par_iter().map(|&rho| (rho, f(rho))).collect();
        let unit: Vec<(f64, f64)> = samples.iter().copied().filter(|p| p.0 <= 1.0).collect();
        Self {
            unit: LegendreHull::new(&unit),
            full: LegendreHull::new(&samples),
            rho_unit: unit.iter().map(|p| p.0).collect(),
            rho_full,
        }
    }

    /// `sup_ρ f(ρ) - ρ r` at each rate, in any order. `unit` restricts ρ to
    /// `[0, 1]`. With `refine`, the supporting sample is polished by a golden
    /// search over its neighbors. Divergent suprema are `f64::INFINITY`.
    pub fn eval<F: Fn(f64) -> f64 + Sync>(
        &self,
        f: Option<&F>,
        rates: &[f64],
        unit: bool,
    ) -> Vec<HullPoint> {
        use rayon::prelude::*;
        let (hull, grid) = if unit {
            (&self.unit, &self.rho_unit)
        } else {
            (&self.full, &self.rho_full)
        };
        let mut order: Vec<usize> = (0..rates.len()).collect();
        order.sort_by(|&a, &b| rates[a].total_cmp(&rates[b]));
        let sorted: Vec<f64> = order.iter().map(|&i| rates[i]).collect();
        let mut pts = hull.eval_sorted(&sorted);
        if unit {
            // ρ = 1 is an admissible maximizer here, not a truncation.
            pts.iter_mut().for_each(|p| p.diverged = false);
        }
        let refined: Vec<HullPoint> = sorted
            .par_iter()
            .zip(pts)
            .map(|(&r, h)| {
                if h.diverged {
                    return HullPoint {
                        value: f64::INFINITY,
                        ..h
                    };
                }
                match f {
                    Some(f) => {
                        let k = grid.partition_point(|&g| g < h.rho);
                        let lo = grid[k.saturating_sub(1)];
                        let hi = grid[(k + 1).min(grid.len() - 1)];
                        if hi <= lo {
                            return h;
                        }
                        let (rho, v) = golden_max(|p| f(p) - p * r, lo, hi, 1e-9);
                        if v > h.value {
                            HullPoint {
                                value: v,
                                rho,
                                diverged: false,
                            }
                        } else {
                            h
                        }
                    }
                    None => h,
                }
            })
            .collect();
        let mut out = vec![refined[0]; rates.len()];
        for (pos, &i) in order.iter().enumerate() {
            out[i] = refined[pos];
        }
        out
    }
}

/// ρ samples: dense on `[0, 1]`, coarser out to `cap`.
pub fn rho_samples(cap: f64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..=1000).map(|i| i as f64 * 1e-3).collect();
    if cap > 1.0 {
        v.extend(
            (1..=900)
                .map(|i| 1.0 + i as f64 * 1e-2)
                .take_while(|&r| r <= cap.min(10.0)),
        );
        if cap > 10.0 {
            v.extend(
                (1..)
                    .map(|i| 10.0 + i as f64 * 0.1)
                    .take_while(|&r| r <= cap + 1e-9),
            );
        }
    }
    v
}

/// A sparser version of [`rho_samples`] for curves that only need about
/// 1e-5 accuracy.
pub fn rho_samples_coarse(cap: f64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..=100).map(|i| i as f64 * 1e-2).collect();
    v.extend(
        (1..=180)
            .map(|i| 1.0 + i as f64 * 0.05)
            .take_while(|&r| r <= cap.min(10.0) + 1e-9),
    );
    if cap > 10.0 {
        v.extend(
            (1..)
                .map(|i| 10.0 + i as f64 * 0.5)
                .take_while(|&r| r <= cap + 1e-9),
        );
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_interior_and_boundary_optima() {
        let (x, fx) = golden_max(|x| -(x - 0.3) * (x - 0.3), 0.0, 1.0, 1e-12);
        assert!((x - 0.3).abs() < 1e-6 && fx.abs() < 1e-12);
        let (x, _) = golden_max(|x| x, 0.0, 1.0, 1e-12);
        assert_eq!(x, 1.0);
        let (x, _) = golden_max(|x| -x, 0.0, 1.0, 1e-12);
        assert_eq!(x, 0.0);
    }

    #[test]
    fn halfline_detects_divergence() {
        let r = maximize_concave_halfline(|x| 0.5 * x, 100.0, 1e-12);
        assert!(r.diverged);
        let r = maximize_concave_halfline(|x| 3.0 * x - x * x, 100.0, 1e-12);
        assert!(!r.diverged && (r.argmax - 1.5).abs() < 1e-6);
        let r = maximize_concave_halfline(|x| -(x - 40.0).powi(2), 100.0, 1e-12);
        assert!(!r.diverged && (r.argmax - 40.0).abs() < 1e-4);
    }

    #[test]
    fn simplex_minimizer_matches_closed_form() {
        // min Σ (x_i - c_i)^2 with c on the simplex interior: x = c.
        let c = [0.2, 0.5, 0.3];
        let (x, fx) = minimize_convex_on_simplex(
            |x| x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum(),
            vec![1.0 / 3.0; 3],
            1e-15,
            200,
        );
        assert!(fx < 1e-12);
        for (a, b) in x.iter().zip(&c) {
            assert!((a - b).abs() < 1e-6);
        }
        // Optimum on a face.
        let (x, _) = minimize_convex_on_simplex(
            |x| x[0] * 3.0 + x[1] * 1.0 + x[2] * 2.0,
            vec![1.0 / 3.0; 3],
            1e-15,
            50,
        );
        assert!((x[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn lattice_counts_and_nesting() {
        let all = [true; 3];
        let pts = simplex_lattice(3, 4, &all);
        assert_eq!(pts.len() as u128, simplex_lattice_size(3, 4));
        assert_eq!(pts.len(), 15);
        assert!(pts.iter().all(|p| p.iter().sum::<u32>() == 4));
        let masked = simplex_lattice(3, 4, &[true, false, true]);
        assert_eq!(masked.len(), 5);
        assert!(masked.iter().all(|p| p[1] == 0));
        // k/d and 2k/2d coincide bitwise.
        for k in 0..=50u32 {
            assert_eq!(k as f64 / 50.0, (2 * k) as f64 / 100.0);
        }
        assert_eq!(step_denominator(0.005), Some(200));
        assert_eq!(step_denominator(0.02), Some(50));
        assert_eq!(step_denominator(0.3), None);
    }

    #[test]
    fn hull_matches_direct_maximization() {
        let f = |r: f64| (1.0 + r).ln() * 0.8;
        let samples: Vec<(f64, f64)> = rho_samples(1.0).into_iter().map(|r| (r, f(r))).collect();
        let hull = LegendreHull::new(&samples);
        let rates: Vec<f64> = (0..100).map(|i| i as f64 * 0.01).collect();
        for (r, p) in rates.iter().zip(hull.eval_sorted(&rates)) {
            let brute = samples
                .iter()
                .map(|&(x, v)| v - x * r)
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(
                (p.value - brute).abs() < 1e-14,
                "{r}: {} vs {brute}",
                p.value
            );
        }
    }
}
