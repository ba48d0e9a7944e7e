//! Channel coding exponents of a discrete memoryless channel.
//!
//! Two evaluation paths exist for the fixed-composition exponents:
//!
//! * `PrimalGrid` enumerates test channels `V` on a simplex lattice and
//!   minimizes the divergence objective directly. It is slow but has no
//!   moving parts, and serves as the oracle.
//! * `GallagerDual` maximizes over ρ the constant-composition function
//!   `F(ρ, S) = min_Q -(1+ρ) Σ_x S(x) log2 Σ_y W(y|x)^{1/(1+ρ)} Q(y)^{ρ/(1+ρ)}`.
//!
//! Input-optimized curves `E_r(R, W)` and `E_sp(R, W)` use Gallager's
//! `E_0(ρ, S, W)` maximized over `S`, which gives the same exponents once the
//! outer maximum over compositions is taken.

use crate::error::{Error, Result};
use crate::optim::{
    golden_max, maximize_concave_halfline, minimize_convex_on_simplex, rate_grid,
    rho_samples_coarse, simplex_lattice, simplex_lattice_size, step_denominator, Profile,
};
use crate::probkit::{
    conditional_kl_of, entropy_of, kl_of, mutual_information_of, output_marginal,
    ConditionalDistribution, Distribution,
};
use crate::tradeoff::{KernelGrid, TradeoffTable};

/// Largest ρ explored by the sphere-packing dual before declaring divergence.
pub const RHO_MAX: f64 = 100.0;
/// Exponents below this are numerical noise and reported as 0.
pub const NOISE_FLOOR: f64 = 1e-13;
/// `E_sp` and `E_r` closer than this count as equal for the critical rate.
pub const CRITICAL_TOL: f64 = 1e-6;
/// Default rate grid step.
pub const RATE_STEP: f64 = 1e-3;

pub(crate) fn floor_noise(v: f64) -> f64 {
    if v < NOISE_FLOOR {
        0.0
    } else {
        v
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Method {
    /// Primal minimization over test channels on a simplex lattice of this step.
    PrimalGrid {
        step: f64,
    },
    GallagerDual,
}

impl Method {
    /// Default primal step: 0.02 for up to 3 outputs, coarser beyond.
    pub fn primal_default(outputs: usize) -> Self {
        let step = match outputs {
            0..=3 => 0.02,
            4 => 0.05,
            _ => 0.1,
        };
        Method::PrimalGrid { step }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ChannelOptimizer {
    Rho(f64),
    Channel(ConditionalDistribution),
    /// No candidate with finite objective exists.
    None,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelExponentResult {
    pub rate: f64,
    pub value: f64,
    pub optimizer: ChannelOptimizer,
    pub method: Method,
    /// The dual supremum was unbounded, or no primal candidate was feasible.
    pub diverged: bool,
    /// The rate sits within one grid step of the smallest achievable mutual
    /// information, where the closed and open constraint sets can disagree.
    pub at_threshold: bool,
}

fn check_pair(s: &Distribution, w: &ConditionalDistribution) -> Result<()> {
    if s.alphabet_size() != w.inputs() {
        return Err(Error::AlphabetMismatch {
            left: s.alphabet_size(),
            right: w.inputs(),
        });
    }
    Ok(())
}

fn powered(w: &ConditionalDistribution, s: f64) -> Vec<f64> {
    w.probs()
        .iter()
        .map(|&p| if p > 0.0 { p.powf(s) } else { 0.0 })
        .collect()
}

/// Gallager's `E_0(ρ, S, W) = -log2 Σ_y [Σ_x S(x) W(y|x)^{1/(1+ρ)}]^{1+ρ}`.
pub fn gallager_e0(rho: f64, s: &Distribution, w: &ConditionalDistribution) -> Result<f64> {
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "rho must be finite and nonnegative, got {rho}"
        )));
    }
    check_pair(s, w)?;
    Ok(e0_raw(
        rho,
        s.probs(),
        &powered(w, 1.0 / (1.0 + rho)),
        w.outputs(),
    ))
}

fn e0_sum(rho: f64, s: &[f64], ws: &[f64], outputs: usize) -> f64 {
    let mut total = 0.0;
    for y in 0..outputs {
        let inner: f64 = s
            .iter()
            .enumerate()
            .map(|(x, &sx)| sx * ws[x * outputs + y])
            .sum();
        if inner > 0.0 {
            total += inner.powf(1.0 + rho);
        }
    }
    total
}

fn e0_raw(rho: f64, s: &[f64], ws: &[f64], outputs: usize) -> f64 {
    if rho == 0.0 {
        return 0.0;
    }
    (-e0_sum(rho, s, ws, outputs).log2()).max(0.0)
}

/// `max_S E_0(ρ, S, W)` and its maximizer.
pub fn gallager_e0_optimized(rho: f64, w: &ConditionalDistribution) -> (Distribution, f64) {
    let n = w.inputs();
    if rho == 0.0 {
        return (Distribution::uniform(n), 0.0);
    }
    let ws = powered(w, 1.0 / (1.0 + rho));
    let (s, g) = minimize_convex_on_simplex(
        |s| e0_sum(rho, s, &ws, w.outputs()),
        vec![1.0 / n as f64; n],
        1e-15,
        200,
    );
    (Distribution::from_raw(s), (-g.log2()).max(0.0))
}

/// The constant-composition function `F(ρ, S)`; concave in ρ with `F(0) = 0`.
pub fn fixed_composition_e0(
    rho: f64,
    s: &Distribution,
    w: &ConditionalDistribution,
) -> Result<f64> {
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "rho must be finite and nonnegative, got {rho}"
        )));
    }
    check_pair(s, w)?;
    Ok(FixedComposition::new(s, w).f(rho))
}

/// Precomputed data for evaluating `F(ρ, S)` repeatedly.
struct FixedComposition<'a> {
    s: &'a [f64],
    w: &'a [f64],
    outputs: usize,
    /// Outputs reachable from some input with positive weight.
    reach: Vec<usize>,
}

impl<'a> FixedComposition<'a> {
    fn new(s: &'a Distribution, w: &'a ConditionalDistribution) -> Self {
        let outputs = w.outputs();
        let reach = (0..outputs)
            .filter(|&y| (0..w.inputs()).any(|x| s.get(x) > 0.0 && w.get(x, y) > 0.0))
            .collect();
        Self {
            s: s.probs(),
            w: w.probs(),
            outputs,
            reach,
        }
    }

    // -(1+ρ) Σ_x S(x) log2 Σ_y W^t Q^{1-t}, with Q given on `reach`.
    fn objective(&self, rho: f64, ws: &[f64], q: &[f64]) -> f64 {
        let t = 1.0 / (1.0 + rho);
        let mut total = 0.0;
        for (x, &sx) in self.s.iter().enumerate() {
            if sx == 0.0 {
                continue;
            }
            let g: f64 = self
                .reach
                .iter()
                .zip(q)
                .map(|(&y, &qy)| {
                    let v = ws[x * self.outputs + y];
                    if v > 0.0 && qy > 0.0 {
                        v * qy.powf(1.0 - t)
                    } else {
                        0.0
                    }
                })
                .sum();
            if g <= 0.0 {
                return f64::INFINITY;
            }
            total -= sx * g.log2();
        }
        (1.0 + rho) * total
    }

    fn f(&self, rho: f64) -> f64 {
        if rho == 0.0 {
            return 0.0;
        }
        let t = 1.0 / (1.0 + rho);
        let ws: Vec<f64> = self
            .w
            .iter()
            .map(|&p| if p > 0.0 { p.powf(t) } else { 0.0 })
            .collect();
        let m = self.reach.len();
        if m == 1 {
            return self.objective(rho, &ws, &[1.0]).max(0.0);
        }
        if m == 2 {
            let (_, neg) = golden_max(
                |a| -self.objective(rho, &ws, &[a, 1.0 - a]),
                0.0,
                1.0,
                1e-13,
            );
            return (-neg).max(0.0);
        }
        // Majorize-minimize fixed point Q ← Σ_x S(x) W^t Q^{1-t} / g_x(Q),
        // started from the output marginal and polished by pairwise search.
        let marg = output_marginal(self.s, self.w, self.outputs);
        let mut q: Vec<f64> = self.reach.iter().map(|&y| marg[y]).collect();
        let mut next = vec![0.0; m];
        for _ in 0..20 {
            next.iter_mut().for_each(|v| *v = 0.0);
            for (x, &sx) in self.s.iter().enumerate() {
                if sx == 0.0 {
                    continue;
                }
                let terms: Vec<f64> = self
                    .reach
                    .iter()
                    .zip(&q)
                    .map(|(&y, &qy)| {
                        let v = ws[x * self.outputs + y];
                        if v > 0.0 && qy > 0.0 {
                            v * qy.powf(1.0 - t)
                        } else {
                            0.0
                        }
                    })
                    .collect();
                let g: f64 = terms.iter().sum();
                if g > 0.0 {
                    for (n, term) in next.iter_mut().zip(&terms) {
                        *n += sx * term / g;
                    }
                }
            }
            let total: f64 = next.iter().sum();
            next.iter_mut().for_each(|v| *v /= total);
            let delta = q
                .iter()
                .zip(&next)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            std::mem::swap(&mut q, &mut next);
            if delta < 1e-14 {
                break;
            }
        }
        let (q, converged) = self.newton(rho, &ws, q);
        let value = if converged {
            self.objective(rho, &ws, &q)
        } else {
            minimize_convex_on_simplex(|q| self.objective(rho, &ws, q), q, 1e-15, 50).1
        };
        value.max(0.0)
    }

    // Damped Newton on the first m-1 coordinates of Q (the last one is
    // 1 - Σ others). The minimizer is interior because the objective's
    // derivative diverges as any Q(y) -> 0 on the reachable set.
    fn newton(&self, rho: f64, ws: &[f64], mut q: Vec<f64>) -> (Vec<f64>, bool) {
        let t = 1.0 / (1.0 + rho);
        let m = q.len();
        let c = (1.0 + rho) / std::f64::consts::LN_2;
        let mut f = self.objective(rho, ws, &q);
        for _ in 0..60 {
            let mut grad = vec![0.0; m];
            let mut hess = vec![0.0; m * m];
            let mut a = vec![0.0; m];
            for (x, &sx) in self.s.iter().enumerate() {
                if sx == 0.0 {
                    continue;
                }
                let mut g = 0.0;
                for (k, (&y, &qy)) in self.reach.iter().zip(&q).enumerate() {
                    let v = ws[x * self.outputs + y];
                    g += v * qy.powf(1.0 - t);
                    a[k] = (1.0 - t) * v * qy.powf(-t);
                }
                for k in 0..m {
                    grad[k] -= c * sx * a[k] / g;
                    for l in 0..m {
                        hess[k * m + l] += c * sx * a[k] * a[l] / (g * g);
                    }
                    let v = ws[x * self.outputs + self.reach[k]];
                    hess[k * m + k] += c * sx * t * (1.0 - t) * v * q[k].powf(-t - 1.0) / g;
                }
            }
            // Reduced system in the first m-1 coordinates.
            let n = m - 1;
            let mut sys = vec![0.0; n * (n + 1)];
            for i in 0..n {
                for j in 0..n {
                    sys[i * (n + 1) + j] =
                        hess[i * m + j] - hess[i * m + n] - hess[n * m + j] + hess[n * m + n];
                }
                sys[i * (n + 1) + n] = -(grad[i] - grad[n]);
            }
            let Some(dir) = solve(&mut sys, n) else {
                return (q, false);
            };
            let dlast: f64 = -dir.iter().sum::<f64>();
            let step_dir: Vec<f64> = dir.iter().copied().chain(std::iter::once(dlast)).collect();
            let decrement: f64 = -step_dir.iter().zip(&grad).map(|(d, g)| d * g).sum::<f64>();
            if !(decrement > 1e-16 * f.abs().max(1.0)) {
                return (q, true);
            }
            // Stay strictly inside the simplex, then backtrack on the objective.
            let mut alpha: f64 = 1.0;
            for (qk, dk) in q.iter().zip(&step_dir) {
                if *dk < 0.0 {
                    alpha = alpha.min(0.9 * qk / -dk);
                }
            }
            let mut accepted = false;
            for _ in 0..40 {
                let trial: Vec<f64> = q
                    .iter()
                    .zip(&step_dir)
                    .map(|(a, d)| a + alpha * d)
                    .collect();
                let ft = self.objective(rho, ws, &trial);
                if ft <= f {
                    q = trial;
                    f = ft;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                return (q, decrement < 1e-12 * f.abs().max(1.0));
            }
        }
        (q, false)
    }
}

// Gaussian elimination with partial pivoting on an n × (n+1) augmented matrix.
fn solve(a: &mut [f64], n: usize) -> Option<Vec<f64>> {
    let w = n + 1;
    for col in 0..n {
        let pivot =
            (col..n).max_by(|&i, &j| a[i * w + col].abs().total_cmp(&a[j * w + col].abs()))?;
        if a[pivot * w + col].abs() < 1e-300 {
            return None;
        }
        for k in 0..w {
            a.swap(col * w + k, pivot * w + k);
        }
        for row in (col + 1)..n {
            let factor = a[row * w + col] / a[col * w + col];
            for k in col..w {
                a[row * w + k] -= factor * a[col * w + k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let tail: f64 = ((i + 1)..n).map(|k| a[i * w + k] * x[k]).sum();
        x[i] = (a[i * w + n] - tail) / a[i * w + i];
    }
    Some(x)
}

/// Fixed-composition random coding exponent `E_r(r, S, W)`.
pub fn random_coding_exponent(
    r: f64,
    s: &Distribution,
    w: &ConditionalDistribution,
    method: Method,
) -> Result<ChannelExponentResult> {
    if !(r >= 0.0) {
        return Err(Error::RateOutOfDomain {
            rate: r,
            reason: "random coding exponent needs r >= 0",
        });
    }
    check_pair(s, w)?;
    match method {
        Method::PrimalGrid { step } => Ok(ChannelGrid::new(s, w, step)?.random_coding(r)),
        Method::GallagerDual => {
            let fc = FixedComposition::new(s, w);
            let (rho, value) = golden_max(|rho| fc.f(rho) - rho * r, 0.0, 1.0, 1e-10);
            Ok(ChannelExponentResult {
                rate: r,
                value: floor_noise(value),
                optimizer: ChannelOptimizer::Rho(rho),
                method,
                diverged: false,
                at_threshold: false,
            })
        }
    }
}

/// Fixed-composition sphere-packing exponent `E_sp(r, S, W)`.
pub fn sphere_packing_exponent(
    r: f64,
    s: &Distribution,
    w: &ConditionalDistribution,
    method: Method,
) -> Result<ChannelExponentResult> {
    if !(r > 0.0) {
        return Err(Error::RateOutOfDomain {
            rate: r,
            reason: "sphere packing exponent needs r > 0",
        });
    }
    check_pair(s, w)?;
    sphere_packing_closure(r, s, w, method)
}

/// Sphere packing on the closed constraint set, also defined at `r = 0`.
pub(crate) fn sphere_packing_closure(
    r: f64,
    s: &Distribution,
    w: &ConditionalDistribution,
    method: Method,
) -> Result<ChannelExponentResult> {
    match method {
        Method::PrimalGrid { step } => Ok(ChannelGrid::new(s, w, step)?.sphere_packing(r)),
        Method::GallagerDual => {
            let fc = FixedComposition::new(s, w);
            let best = maximize_concave_halfline(|rho| fc.f(rho) - rho * r, RHO_MAX, 1e-10);
            Ok(ChannelExponentResult {
                rate: r,
                value: if best.diverged {
                    f64::INFINITY
                } else {
                    floor_noise(best.value)
                },
                optimizer: ChannelOptimizer::Rho(best.argmax),
                method,
                diverged: best.diverged,
                at_threshold: false,
            })
        }
    }
}

/// Primal oracle: every lattice test channel `V` with its `(I(S;V), D(V‖W|S))`.
pub struct ChannelGrid {
    grid: KernelGrid,
    table: TradeoffTable,
    inputs: usize,
    outputs: usize,
    step: f64,
}

impl ChannelGrid {
    pub fn new(s: &Distribution, w: &ConditionalDistribution, step: f64) -> Result<Self> {
        check_pair(s, w)?;
        let denom = step_denominator(step).ok_or_else(|| {
            Error::InvalidParameter(format!("grid step {step} is not 1/k for an integer k"))
        })?;
        let anchors = w.to_matrix();
        let active: Vec<bool> = s.probs().iter().map(|&p| p > 0.0).collect();
        let grid = KernelGrid::new(&anchors, &active, denom)?;
        let (sp, wp, outputs) = (s.probs(), w.probs(), w.outputs());
        let table = TradeoffTable::new(grid.map(|v| {
            (
                mutual_information_of(sp, v, outputs),
                conditional_kl_of(v, wp, sp, outputs),
            )
        }));
        Ok(Self {
            grid,
            table,
            inputs: w.inputs(),
            outputs,
            step,
        })
    }

    fn channel(&self, index: usize) -> ConditionalDistribution {
        ConditionalDistribution::from_raw(self.inputs, self.outputs, self.grid.kernel(index))
    }

    fn result(&self, r: f64, hit: Option<crate::tradeoff::Hit>) -> ChannelExponentResult {
        let at_threshold = self
            .table
            .min_stat()
            .is_some_and(|m| (r - m).abs() <= self.step);
        match hit {
            Some(h) => ChannelExponentResult {
                rate: r,
                value: h.value.max(0.0),
                optimizer: ChannelOptimizer::Channel(self.channel(h.index)),
                method: Method::PrimalGrid { step: self.step },
                diverged: false,
                at_threshold,
            },
            None => ChannelExponentResult {
                rate: r,
                value: f64::INFINITY,
                optimizer: ChannelOptimizer::None,
                method: Method::PrimalGrid { step: self.step },
                diverged: true,
                at_threshold,
            },
        }
    }

    /// `min_V D(V‖W|S) + |I(S;V) - r|^+`.
    pub fn random_coding(&self, r: f64) -> ChannelExponentResult {
        self.result(r, self.table.min_excess(r))
    }

    /// `min_V D(V‖W|S)` over `I(S;V) ≤ r`.
    pub fn sphere_packing(&self, r: f64) -> ChannelExponentResult {
        self.result(r, self.table.min_at_most(r))
    }
}

/// Which exponent an input optimization targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Which {
    Random,
    Sphere,
}

fn fixed_composition_value(
    r: f64,
    s: &Distribution,
    w: &ConditionalDistribution,
    which: Which,
) -> f64 {
    let fc = FixedComposition::new(s, w);
    match which {
        Which::Random => floor_noise(golden_max(|rho| fc.f(rho) - rho * r, 0.0, 1.0, 1e-10).1),
        Which::Sphere => {
            let best = maximize_concave_halfline(|rho| fc.f(rho) - rho * r, RHO_MAX, 1e-10);
            if best.diverged {
                f64::INFINITY
            } else {
                floor_noise(best.value)
            }
        }
    }
}

fn distance_to_uniform(s: &[f64]) -> f64 {
    let u = 1.0 / s.len() as f64;
    s.iter().map(|v| (v - u) * (v - u)).sum()
}

/// Tolerance under which two exponent values count as a tie.
const TIE_TOL: f64 = 1e-9;

/// Maximizes the fixed-composition exponent over input compositions: a
/// simplex grid of step 0.05, then pairwise golden-section refinement. Ties go
/// to the composition nearest uniform.
pub fn optimize_input(
    r: f64,
    w: &ConditionalDistribution,
    which: Which,
) -> Result<(Distribution, f64)> {
    if !(r >= 0.0) || (which == Which::Sphere && r <= 0.0) {
        return Err(Error::RateOutOfDomain {
            rate: r,
            reason: "input optimization needs r >= 0 (r > 0 for sphere packing)",
        });
    }
    let n = w.inputs();
    if n == 1 {
        let s = Distribution::uniform(1);
        let v = fixed_composition_value(r, &s, w, which);
        return Ok((s, v));
    }
    let denom = 20;
    let size = simplex_lattice_size(n, denom);
    if size > crate::tradeoff::GRID_BUDGET {
        return Err(Error::GridTooLarge {
            points: size,
            budget: crate::tradeoff::GRID_BUDGET,
        });
    }
    let eval =
        |p: &[f64]| fixed_composition_value(r, &Distribution::from_raw(p.to_vec()), w, which);
    let uniform = vec![1.0 / n as f64; n];
    let mut best = (uniform.clone(), eval(&uniform));
    for k in simplex_lattice(n, denom, &vec![true; n]) {
        let p: Vec<f64> = k.iter().map(|&c| c as f64 / denom as f64).collect();
        let v = eval(&p);
        if better(v, &p, best.1, &best.0) {
            best = (p, v);
        }
    }
    if best.1.is_finite() {
        let (p, neg) = minimize_convex_on_simplex(|p| -eval(p), best.0.clone(), 1e-12, 20);
        if better(-neg, &p, best.1, &best.0) {
            best = (p, -neg);
        }
    }
    Ok((Distribution::from_raw(best.0), best.1))
}

fn better(v: f64, p: &[f64], best_v: f64, best_p: &[f64]) -> bool {
    if v.is_infinite() && best_v.is_infinite() {
        return distance_to_uniform(p) < distance_to_uniform(best_p);
    }
    if v > best_v + TIE_TOL {
        return true;
    }
    (v - best_v).abs() <= TIE_TOL && distance_to_uniform(p) < distance_to_uniform(best_p)
}

/// Capacity by Blahut–Arimoto, stopped when the standard upper and lower
/// bounds agree to 1e-9 relative.
pub fn capacity(w: &ConditionalDistribution) -> f64 {
    capacity_achieving(w).1
}

/// Capacity together with a capacity-achieving input.
pub fn capacity_achieving(w: &ConditionalDistribution) -> (Distribution, f64) {
    let (n, m) = (w.inputs(), w.outputs());
    let wp = w.probs();
    let mut p = vec![1.0 / n as f64; n];
    let mut d = vec![0.0; n];
    for _ in 0..100_000 {
        let q = output_marginal(&p, wp, m);
        for (x, dx) in d.iter_mut().enumerate() {
            *dx = kl_of(&wp[x * m..(x + 1) * m], &q);
        }
        let lower: f64 = p.iter().zip(&d).map(|(a, b)| a * b).sum();
        let upper = d.iter().copied().fold(0.0, f64::max);
        if upper - lower <= 1e-9 * lower.max(1e-300) || upper <= 1e-15 {
            break;
        }
        let mut z = 0.0;
        for (px, dx) in p.iter_mut().zip(&d) {
            *px *= dx.exp2();
            z += *px;
        }
        p.iter_mut().for_each(|v| *v /= z);
    }
    let c = mutual_information_of(&p, wp, m);
    (Distribution::from_raw(p), c)
}

/// Exponents optimized over the input composition, evaluated on a rate grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelCurves {
    pub rates: Vec<f64>,
    pub random: Vec<f64>,
    pub sphere: Vec<f64>,
}

/// `max_S E_0(ρ, S, W)` sampled in ρ; rates are answered by Legendre
/// evaluation refined with golden-section search between samples.
pub struct InputOptimized<'a> {
    w: &'a ConditionalDistribution,
    profile: Profile,
}

impl<'a> InputOptimized<'a> {
    pub fn new(w: &'a ConditionalDistribution) -> Self {
        Self {
            w,
            profile: Profile::sample(|rho| gallager_e0_optimized(rho, w).1, RHO_MAX),
        }
    }

    fn eval(&self, rates: &[f64], unit: bool) -> Vec<f64> {
        let f = |rho: f64| gallager_e0_optimized(rho, self.w).1;
        self.profile
            .eval(Some(&f), rates, unit)
            .into_iter()
            .map(|h| floor_noise(h.value))
            .collect()
    }

    /// `E_r(R, W) = max_{ρ ∈ [0,1]} E_0*(ρ) - ρR`.
    pub fn random_coding(&self, rates: &[f64]) -> Vec<f64> {
        self.eval(rates, true)
    }

    /// `E_sp(R, W) = sup_{ρ ≥ 0} E_0*(ρ) - ρR`.
    pub fn sphere_packing(&self, rates: &[f64]) -> Vec<f64> {
        self.eval(rates, false)
    }

    pub fn curves(&self, rates: &[f64]) -> ChannelCurves {
        ChannelCurves {
            rates: rates.to_vec(),
            random: self.random_coding(rates),
            sphere: self.sphere_packing(rates),
        }
    }
}

/// `F(ρ, S)` sampled in ρ for a fixed composition, answering the
/// fixed-composition exponents at many rates. Unrefined answers come straight
/// from a sparse sample hull (accurate to about 1e-5); refined ones are
/// polished by golden-section search.
pub struct FixedCompositionCurve {
    s: Distribution,
    w: ConditionalDistribution,
    profile: Profile,
    refine: bool,
}

impl FixedCompositionCurve {
    pub fn new(s: &Distribution, w: &ConditionalDistribution) -> Result<Self> {
        check_pair(s, w)?;
        let fc = FixedComposition::new(s, w);
        Ok(Self {
            s: s.clone(),
            w: w.clone(),
            profile: Profile::sample_at(|rho| fc.f(rho), rho_samples_coarse(RHO_MAX)),
            refine: false,
        })
    }

    pub fn refined(mut self) -> Self {
        self.refine = true;
        self
    }

    fn eval(&self, rates: &[f64], unit: bool) -> Vec<f64> {
        let fc = FixedComposition::new(&self.s, &self.w);
        let f = |rho: f64| fc.f(rho);
        let f = self.refine.then_some(&f);
        self.profile
            .eval(f, rates, unit)
            .into_iter()
            .map(|h| floor_noise(h.value))
            .collect()
    }

    pub fn random_coding(&self, rates: &[f64]) -> Vec<f64> {
        self.eval(rates, true)
    }

    /// Closed-constraint sphere packing; rate 0 is allowed.
    pub fn sphere_packing(&self, rates: &[f64]) -> Vec<f64> {
        self.eval(rates, false)
    }
}

/// Critical rate certified on a rate grid.
#[derive(Clone, Debug, PartialEq)]
pub struct CriticalRate {
    /// Smallest grid rate from which `|E_sp - E_r| ≤ 1e-6` at every grid rate.
    pub value: f64,
    /// Grid step, the precision of `value`.
    pub step: f64,
    /// `d/dρ max_S E_0(ρ, S, W)` at ρ = 1, by central differences.
    pub analytic: f64,
    /// Grid rates below `value` where the curves also coincide.
    pub earlier_coincidences: Vec<f64>,
}

pub fn critical_rate(w: &ConditionalDistribution) -> Result<CriticalRate> {
    critical_rate_with_step(w, RATE_STEP)
}

pub fn critical_rate_with_step(w: &ConditionalDistribution, step: f64) -> Result<CriticalRate> {
    if capacity(w) <= 1e-12 {
        return Err(Error::ZeroCapacity);
    }
    let opt = InputOptimized::new(w);
    let rates = rate_grid(step, (w.inputs() as f64).log2());
    let curves = opt.curves(&rates);
    Ok(critical_rate_from(&curves, step, &opt))
}

pub(crate) fn critical_rate_from(
    curves: &ChannelCurves,
    step: f64,
    opt: &InputOptimized,
) -> CriticalRate {
    let close: Vec<bool> = curves
        .random
        .iter()
        .zip(&curves.sphere)
        .map(|(a, b)| (b - a).abs() <= CRITICAL_TOL)
        .collect();
    let mut start = close.len();
    while start > 0 && close[start - 1] {
        start -= 1;
    }
    let value = curves.rates.get(start).copied().unwrap_or(f64::NAN);
    let earlier = (0..start)
        .filter(|&i| close[i])
        .map(|i| curves.rates[i])
        .collect();
    let h = 1e-5;
    let analytic = (gallager_e0_optimized(1.0 + h, opt.w).1
        - gallager_e0_optimized(1.0 - h, opt.w).1)
        / (2.0 * h);
    CriticalRate {
        value,
        step,
        analytic,
        earlier_coincidences: earlier,
    }
}

/// Output partition certifying Gallager symmetry, if one exists.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Symmetry {
    pub symmetric: bool,
    /// Blocks of output indices, coarsest partition found.
    pub partition: Vec<Vec<usize>>,
}

const SYMMETRY_TOL: f64 = 1e-9;

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

fn same_multiset(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= SYMMETRY_TOL)
}

fn block_is_symmetric(w: &ConditionalDistribution, block: &[usize]) -> bool {
    let rows: Vec<Vec<f64>> = (0..w.inputs())
        .map(|x| sorted(block.iter().map(|&y| w.get(x, y)).collect()))
        .collect();
    let cols: Vec<Vec<f64>> = block
        .iter()
        .map(|&y| sorted((0..w.inputs()).map(|x| w.get(x, y)).collect()))
        .collect();
    rows.windows(2).all(|p| same_multiset(&p[0], &p[1]))
        && cols.windows(2).all(|p| same_multiset(&p[0], &p[1]))
}

/// Searches all partitions of the output alphabet, fewest blocks first.
pub fn is_gallager_symmetric(w: &ConditionalDistribution) -> Symmetry {
    let m = w.outputs();
    let mut partitions = Vec::new();
    // Restricted growth strings enumerate each set partition once.
    fn rec(i: usize, m: usize, label: &mut Vec<usize>, blocks: usize, out: &mut Vec<Vec<usize>>) {
        if i == m {
            out.push(label.clone());
            return;
        }
        for b in 0..=blocks {
            label[i] = b;
            rec(i + 1, m, label, blocks.max(b + 1), out);
        }
    }
    if m <= 10 {
        rec(0, m, &mut vec![0; m], 0, &mut partitions);
    }
    let parts = |label: &Vec<usize>| {
        let k = label.iter().max().map_or(0, |v| v + 1);
        (0..k)
            .map(|b| (0..m).filter(|&y| label[y] == b).collect::<Vec<_>>())
            .collect::<Vec<_>>()
    };
    partitions.sort_by_key(|l| l.iter().max().copied());
    for label in &partitions {
        let blocks = parts(label);
        if blocks.iter().all(|b| block_is_symmetric(w, b)) {
            return Symmetry {
                symmetric: true,
                partition: blocks,
            };
        }
    }
    Symmetry {
        symmetric: false,
        partition: Vec::new(),
    }
}

/// `H(output)` for a given input; convenience for reports.
pub fn output_entropy(s: &Distribution, w: &ConditionalDistribution) -> f64 {
    entropy_of(&output_marginal(s.probs(), w.probs(), w.outputs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bsc() -> ConditionalDistribution {
        ConditionalDistribution::bsc(0.025).unwrap()
    }

    #[test]
    fn e0_values() {
        let u = Distribution::uniform(2);
        assert_eq!(gallager_e0(0.0, &u, &bsc()).unwrap(), 0.0);
        // -log2((sqrt(.025)+sqrt(.975))^2 / 2)
        let direct = -(((0.025f64).sqrt() + (0.975f64).sqrt()).powi(2) / 2.0).log2();
        assert!((gallager_e0(1.0, &u, &bsc()).unwrap() - direct).abs() < 1e-14);
        assert!((direct - 0.607_957_5).abs() < 1e-6);
        let id = ConditionalDistribution::identity(2);
        assert!((gallager_e0(1.0, &u, &id).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn fixed_composition_f_matches_gallager_at_uniform_on_symmetric_channel() {
        let u = Distribution::uniform(2);
        for rho in [0.1, 0.5, 1.0, 3.0] {
            let a = fixed_composition_e0(rho, &u, &bsc()).unwrap();
            let b = gallager_e0(rho, &u, &bsc()).unwrap();
            assert!((a - b).abs() < 1e-10, "{rho}: {a} vs {b}");
        }
    }

    #[test]
    fn symmetry_detection() {
        assert_eq!(is_gallager_symmetric(&bsc()).partition, vec![vec![0, 1]]);
        let bec = ConditionalDistribution::bec(0.3).unwrap();
        let s = is_gallager_symmetric(&bec);
        assert!(s.symmetric);
        assert_eq!(s.partition, vec![vec![0, 1], vec![2]]);
        let w = ConditionalDistribution::new(vec![vec![0.9, 0.1], vec![0.3, 0.7]]).unwrap();
        assert!(!is_gallager_symmetric(&w).symmetric);
    }

    #[test]
    fn capacity_closed_forms() {
        assert!((capacity(&bsc()) - 0.831_339_068_503_329_7).abs() < 1e-9);
        assert!((capacity(&ConditionalDistribution::bec(0.3).unwrap()) - 0.7).abs() < 1e-9);
        let c = ConditionalDistribution::constant(3, &Distribution::new(vec![0.2, 0.8]).unwrap());
        assert_eq!(capacity(&c), 0.0);
    }
}
