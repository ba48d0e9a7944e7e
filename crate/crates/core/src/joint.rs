//! Joint source-channel exponents with decoder side information: the flat
//! bounds `min_R e_U(R) + E(R, W)`, the nested bounds over source marginals
//! and input compositions, separate coding, matching diagnostics and the
//! inner min-max game.

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;

use crate::channel::{
    capacity, capacity_achieving, critical_rate_with_step, is_gallager_symmetric, optimize_input,
    FixedCompositionCurve, InputOptimized, Which, RATE_STEP,
};
use crate::error::{Error, Result};
use crate::optim::{simplex_lattice, step_denominator};
use crate::probkit::{
    conditional_entropy, ConditionalDistribution, Distribution, JointDistribution,
};
use crate::source::{FixedMarginalCurve, SourceCurves};

/// `|upper - lower|` at or below this counts as matched.
pub const MATCHING_TOL: f64 = 1e-4;
/// Largest min-max gap certified as an interchange on the finite grids.
pub const GAP_TOL: f64 = 1e-4;
/// Tolerance of the constant-optimal-input premise check.
pub const PREMISE_TOL: f64 = 1e-6;

/// Grids of the nested optimizations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridOptions {
    pub rate_step: f64,
    /// Coarse simplex step for source marginals and input compositions.
    pub simplex_step: f64,
    /// Each level refines around the incumbent with a step five times finer.
    pub refinement_levels: u32,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            rate_step: RATE_STEP,
            simplex_step: 0.05,
            refinement_levels: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct JointBoundResult {
    pub lower: f64,
    pub upper: f64,
    pub r_star_lower: f64,
    pub r_star_upper: f64,
    /// Adversarial source marginal (nested form only).
    pub q_a_star: Option<Distribution>,
    pub s_x_star: Option<Distribution>,
    pub matched: bool,
    pub complete_characterization: bool,
    /// `H(P_{A|B}) < C(W)`; otherwise the exponents degenerate.
    pub reliable: bool,
    pub rate_step: f64,
}

/// Rates `step, 2·step, …` strictly below `log2|A|`.
pub fn joint_rates(step: f64, rows: usize) -> Vec<f64> {
    let top = (rows as f64).log2();
    let count = (top / step + 1e-9).floor() as usize;
    (1..=count)
        .map(|i| i as f64 * step)
        .filter(|&r| r < top - 1e-12)
        .collect()
}

/// Every curve of the flat problem on one rate grid.
#[derive(Clone, Debug, PartialEq)]
pub struct JointCurves {
    pub rates: Vec<f64>,
    pub e_lower: Vec<f64>,
    pub e_upper: Vec<f64>,
    pub random: Vec<f64>,
    pub sphere: Vec<f64>,
}

impl JointCurves {
    pub fn new(p: &JointDistribution, w: &ConditionalDistribution, rate_step: f64) -> Self {
        Self::on_rates(p, w, joint_rates(rate_step, p.rows()))
    }

    pub fn on_rates(p: &JointDistribution, w: &ConditionalDistribution, rates: Vec<f64>) -> Self {
        let source = SourceCurves::new(p);
        let channel = InputOptimized::new(w).curves(&rates);
        Self {
            e_lower: source.e_lower(&rates),
            e_upper: source.e_upper(&rates),
            random: channel.random,
            sphere: channel.sphere,
            rates,
        }
    }

    pub fn lower_sum(&self) -> Vec<f64> {
        self.e_upper
            .iter()
            .zip(&self.random)
            .map(|(a, b)| a + b)
            .collect()
    }

    pub fn upper_sum(&self) -> Vec<f64> {
        self.e_upper
            .iter()
            .zip(&self.sphere)
            .map(|(a, b)| a + b)
            .collect()
    }
}

/// Minimum and its smallest minimizing rate; `(inf, NaN)` if nothing is finite.
fn argmin(rates: &[f64], values: &[f64]) -> (f64, f64) {
    let mut best = (f64::INFINITY, f64::NAN);
    for (&r, &v) in rates.iter().zip(values) {
        if v < best.0 {
            best = (v, r);
        }
    }
    best
}

/// Maximum and its smallest maximizing rate.
fn argmax(rates: &[f64], values: &[f64]) -> (f64, f64) {
    let mut best = (f64::NEG_INFINITY, f64::NAN);
    for (&r, &v) in rates.iter().zip(values) {
        if v > best.0 {
            best = (v, r);
        }
    }
    best
}

fn flat_bounds(
    p: &JointDistribution,
    w: &ConditionalDistribution,
    curves: &JointCurves,
    step: f64,
) -> JointBoundResult {
    let (lower, r_lo) = argmin(&curves.rates, &curves.lower_sum());
    let (upper, r_up) = argmin(&curves.rates, &curves.upper_sum());
    let s_x_star = if r_lo.is_finite() {
        optimize_input(r_lo, w, Which::Random).ok().map(|(s, _)| s)
    } else {
        None
    };
    JointBoundResult {
        lower,
        upper,
        r_star_lower: r_lo,
        r_star_upper: r_up,
        q_a_star: None,
        s_x_star,
        matched: false,
        complete_characterization: false,
        reliable: conditional_entropy(p) < capacity(w),
        rate_step: step,
    }
}

/// Bounds on the exponent with side information at both ends:
/// `min_R e_U(R) + E_r(R, W)` and `min_R e_U(R) + E_sp(R, W)` over `(0, log2|A|)`.
pub fn both_si_bounds(
    p: &JointDistribution,
    w: &ConditionalDistribution,
    rate_step: f64,
) -> Result<JointBoundResult> {
    let curves = JointCurves::new(p, w, rate_step);
    let result = flat_bounds(p, w, &curves, rate_step);
    Ok(matching_check(result, w).0)
}

/// Checks that one input composition is optimal at every rate: trivially
/// for Gallager-symmetric channels, numerically otherwise.
pub fn check_constant_optimal_input(w: &ConditionalDistribution, rate_step: f64) -> Result<()> {
    if is_gallager_symmetric(w).symmetric {
        return Ok(());
    }
    let (s0, _) = capacity_achieving(w);
    let rates = crate::optim::rate_grid(rate_step, (w.inputs() as f64).log2());
    let fixed = FixedCompositionCurve::new(&s0, w)?.refined();
    let opt = InputOptimized::new(w);
    let pairs = [
        (
            "random coding",
            fixed.random_coding(&rates),
            opt.random_coding(&rates),
        ),
        (
            "sphere packing",
            fixed.sphere_packing(&rates),
            opt.sphere_packing(&rates),
        ),
    ];
    for (name, at_s0, best) in pairs {
        for ((&r, a), b) in rates.iter().zip(at_s0).zip(best) {
            let same = (a.is_infinite() && b.is_infinite())
                || (a - b).abs() <= PREMISE_TOL * b.abs().max(1.0);
            if !same {
                return Err(Error::PremiseViolated(format!(
                    "the {name} exponent at R = {r} needs an input other than the capacity-achieving one ({a} < {b})"
                )));
            }
        }
    }
    Ok(())
}

/// The flattened bounds valid when the optimal input does not depend on the
/// rate. The formulas and code path are those of [`both_si_bounds`].
pub fn symmetric_flat_bounds(
    p: &JointDistribution,
    w: &ConditionalDistribution,
    rate_step: f64,
) -> Result<JointBoundResult> {
    check_constant_optimal_input(w, rate_step)?;
    both_si_bounds(p, w, rate_step)
}

/// Outcome of [`matching_check`].
#[derive(Clone, Debug, PartialEq)]
pub struct MatchingDiagnostics {
    pub matched: bool,
    pub complete_characterization: bool,
    pub critical_rate: Option<f64>,
    /// `e_U(R*) + E_r(R*)` when the characterization is complete.
    pub exponent: Option<f64>,
}

/// Marks `result` matched when `|upper - lower| ≤ 1e-4` and complete when it is
/// also minimized at or above the critical rate (one grid step of slack).
pub fn matching_check(
    result: JointBoundResult,
    w: &ConditionalDistribution,
) -> (JointBoundResult, MatchingDiagnostics) {
    matching_check_with(result, w, MATCHING_TOL)
}

/// [`matching_check`] with a caller-chosen matching tolerance.
pub fn matching_check_with(
    mut result: JointBoundResult,
    w: &ConditionalDistribution,
    tol: f64,
) -> (JointBoundResult, MatchingDiagnostics) {
    let matched = (result.lower.is_infinite() && result.upper.is_infinite())
        || (result.upper - result.lower).abs() <= tol;
    let critical = critical_rate_with_step(w, result.rate_step)
        .ok()
        .map(|c| c.value);
    let complete = matched
        && critical.is_some_and(|rc| {
            result.r_star_lower.is_finite() && result.r_star_lower >= rc - result.rate_step
        });
    result.matched = matched;
    result.complete_characterization = complete;
    let diag = MatchingDiagnostics {
        matched,
        complete_characterization: complete,
        critical_rate: critical,
        exponent: complete.then_some(result.lower),
    };
    (result, diag)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeparateResult {
    pub value: f64,
    pub rate: f64,
}

/// `E_s = max_R min{E_r(R, W), e_L(R)}` and its smallest maximizing rate.
pub fn separate_exponent(
    p: &JointDistribution,
    w: &ConditionalDistribution,
    rate_step: f64,
) -> SeparateResult {
    separate_from_curves(&JointCurves::new(p, w, rate_step))
}

pub fn separate_from_curves(curves: &JointCurves) -> SeparateResult {
    let m: Vec<f64> = curves
        .random
        .iter()
        .zip(&curves.e_lower)
        .map(|(a, b)| a.min(*b))
        .collect();
    let (value, rate) = argmax(&curves.rates, &m);
    SeparateResult { value, rate }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeparationCase {
    /// `R* = R̄` within one grid step: the joint exponent is at least `2 E_s`.
    Equal,
    /// `R* < R̄`: joint exceeds `E_r(R̄) = E_s`.
    JointBelow,
    /// `R* > R̄`: joint exceeds `e_U(R̄) ≥ E_s`.
    JointAbove,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeparationReport {
    pub r_star: f64,
    pub r_bar: f64,
    pub case: SeparationCase,
    pub joint_lower: f64,
    pub separate: f64,
    /// `joint_lower - E_s`.
    pub margin: f64,
    /// The inequality the case predicts holds numerically.
    pub claim_holds: bool,
}

/// Tolerance used when checking the case inequalities.
const CASE_TOL: f64 = 1e-6;

pub fn separate_vs_joint(
    p: &JointDistribution,
    w: &ConditionalDistribution,
    rate_step: f64,
) -> SeparationReport {
    let curves = JointCurves::new(p, w, rate_step);
    separation_from_curves(&curves, rate_step)
}

pub fn separation_from_curves(curves: &JointCurves, rate_step: f64) -> SeparationReport {
    let (joint_lower, r_star) = argmin(&curves.rates, &curves.lower_sum());
    let sep = separate_from_curves(curves);
    let case = if (r_star - sep.rate).abs() <= rate_step + 1e-12 {
        SeparationCase::Equal
    } else if r_star < sep.rate {
        SeparationCase::JointBelow
    } else {
        SeparationCase::JointAbove
    };
    let margin = joint_lower - sep.value;
    let claim_holds = if sep.value <= 0.0 {
        margin >= 0.0
    } else {
        match case {
            SeparationCase::Equal => joint_lower >= 2.0 * sep.value - CASE_TOL,
            SeparationCase::JointBelow | SeparationCase::JointAbove => margin > 0.0,
        }
    };
    SeparationReport {
        r_star,
        r_bar: sep.rate,
        case,
        joint_lower,
        separate: sep.value,
        margin,
        claim_holds,
    }
}

// Lattice of a simplex as distributions, optionally restricted to an L∞ ball.
fn simplex_points(
    dim: usize,
    step: f64,
    around: Option<(&[f64], f64)>,
) -> Vec<(Vec<u32>, Distribution)> {
    let denom = step_denominator(step).unwrap_or(20);
    simplex_lattice(dim, denom, &vec![true; dim])
        .into_iter()
        .map(|k| {
            let p: Vec<f64> = k.iter().map(|&c| c as f64 / denom as f64).collect();
            (k, p)
        })
        .filter(|(_, p)| {
            around.is_none_or(|(c, radius)| {
                p.iter()
                    .zip(c)
                    .all(|(a, b)| (a - b).abs() <= radius + 1e-12)
            })
        })
        .map(|(k, p)| (k, Distribution::from_raw(p)))
        .collect()
}

fn distance_to_uniform(p: &[f64]) -> f64 {
    let u = 1.0 / p.len() as f64;
    p.iter().map(|v| (v - u) * (v - u)).sum()
}

/// Memoized fixed-composition channel curves keyed by the composition.
struct ChannelCache<'a> {
    w: &'a ConditionalDistribution,
    rates: &'a [f64],
    curves: HashMap<Vec<u64>, CurvePair>,
}

/// Random coding and sphere packing values on the shared rate grid.
type CurvePair = (Vec<f64>, Vec<f64>);

impl<'a> ChannelCache<'a> {
    fn key(s: &Distribution) -> Vec<u64> {
        s.probs().iter().map(|v| v.to_bits()).collect()
    }

    fn fill(&mut self, comps: &[Distribution]) {
        let missing: Vec<&Distribution> = comps
            .iter()
            .filter(|s| !self.curves.contains_key(&Self::key(s)))
            .collect();
        let (w, rates) = (self.w, self.rates);
        let computed: Vec<(Vec<u64>, CurvePair)> = missing
            .par_iter()
            .map(|s| {
                let c =
                    FixedCompositionCurve::new(s, w).expect("composition matches channel inputs");
                (
                    Self::key(s),
                    (c.random_coding(rates), c.sphere_packing(rates)),
                )
            })
            .collect();
        self.curves.extend(computed);
    }

    fn get(&self, s: &Distribution, which: Which) -> &[f64] {
        let c = &self.curves[&Self::key(s)];
        match which {
            Which::Random => &c.0,
            Which::Sphere => &c.1,
        }
    }
}

fn min_sum(a: &[f64], b: &[f64], rates: &[f64]) -> (f64, f64) {
    let sum: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + y).collect();
    argmin(rates, &sum)
}

struct Inner {
    value: f64,
    rate: f64,
    s: Distribution,
}

/// Candidates for the next refinement level: the finer lattice within one
/// coarse step of each center, without repeats, in center order.
fn refine_around(
    dim: usize,
    step: f64,
    radius: f64,
    centers: &[&Distribution],
) -> Vec<Distribution> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for c in centers {
        for (_, d) in simplex_points(dim, step, Some((c.probs(), radius))) {
            if seen.insert(ChannelCache::key(&d)) {
                out.push(d);
            }
        }
    }
    out
}

/// Keeps the larger value, and on a tie the composition closer to uniform.
fn offer_max(best: &mut Option<Inner>, value: f64, rate: f64, s: &Distribution) {
    let replace = match best {
        None => true,
        Some(b) => {
            value > b.value + 1e-12
                || ((value == b.value || (value - b.value).abs() <= 1e-12)
                    && distance_to_uniform(s.probs()) < distance_to_uniform(b.s.probs()))
        }
    };
    if replace {
        *best = Some(Inner {
            value,
            rate,
            s: s.clone(),
        });
    }
}

/// `max_s min_R e_U(R, P, q) + E(R, s, W)` for `E = E_r` and `E = E_sp` over
/// one refined composition grid. Both payoffs see the same candidates, so the
/// first value never exceeds the second by more than the tie tolerance.
fn inner_pair(source: &[f64], cache: &mut ChannelCache, opts: &GridOptions) -> (Inner, Inner) {
    let n = cache.w.inputs();
    let mut step = opts.simplex_step;
    let mut cands: Vec<Distribution> = simplex_points(n, step, None)
        .into_iter()
        .map(|(_, d)| d)
        .collect();
    let (mut lo, mut up): (Option<Inner>, Option<Inner>) = (None, None);
    for level in 0..=opts.refinement_levels {
        if level > 0 {
            let radius = step;
            step /= 5.0;
            let centers = [
                &lo.as_ref().expect("coarse level sets an incumbent").s,
                &up.as_ref().expect("coarse level sets an incumbent").s,
            ];
            cands = refine_around(n, step, radius, &centers);
        }
        cache.fill(&cands);
        for s in &cands {
            let (v, r) = min_sum(source, cache.get(s, Which::Random), cache.rates);
            offer_max(&mut lo, v, r, s);
            let (v, r) = min_sum(source, cache.get(s, Which::Sphere), cache.rates);
            offer_max(&mut up, v, r, s);
        }
    }
    (
        lo.expect("composition grid is nonempty"),
        up.expect("composition grid is nonempty"),
    )
}

/// `max_s min_R e_U(R, P, q) + E(R, s, W)` for one payoff.
fn inner_max(source: &[f64], cache: &mut ChannelCache, which: Which, opts: &GridOptions) -> Inner {
    let (lo, up) = inner_pair(source, cache, opts);
    match which {
        Which::Random => lo,
        Which::Sphere => up,
    }
}

struct Outer {
    value: f64,
    rate: f64,
    q: Distribution,
    s: Distribution,
}

fn offer_min(best: &mut Option<Outer>, inner: &Inner, q: &Distribution) {
    if best.as_ref().is_none_or(|b| inner.value < b.value) {
        *best = Some(Outer {
            value: inner.value,
            rate: inner.rate,
            q: q.clone(),
            s: inner.s.clone(),
        });
    }
}

/// Outer minimization over source marginals for both payoffs on one shared,
/// refined marginal grid.
fn outer_pair(
    p: &JointDistribution,
    cache: &mut ChannelCache,
    opts: &GridOptions,
) -> Result<(Outer, Outer)> {
    let m = p.rows();
    let mut step = opts.simplex_step;
    let mut cands: Vec<Distribution> = simplex_points(m, step, None)
        .into_iter()
        .map(|(_, d)| d)
        .collect();
    let (mut lo, mut up): (Option<Outer>, Option<Outer>) = (None, None);
    let mut sources: HashMap<Vec<u64>, Vec<f64>> = HashMap::new();
    for level in 0..=opts.refinement_levels {
        if level > 0 {
            let radius = step;
            step /= 5.0;
            let centers = [
                &lo.as_ref().expect("coarse level sets an incumbent").q,
                &up.as_ref().expect("coarse level sets an incumbent").q,
            ];
            cands = refine_around(m, step, radius, &centers);
        }
        let missing: Vec<&Distribution> = cands
            .iter()
            .filter(|q| !sources.contains_key(&ChannelCache::key(q)))
            .collect();
        let rates = cache.rates;
        let computed: Vec<(Vec<u64>, Vec<f64>)> = missing
            .par_iter()
            .map(|q| {
                Ok((
                    ChannelCache::key(q),
                    FixedMarginalCurve::new(p, q)?.e_upper(rates),
                ))
            })
            .collect::<Result<_>>()?;
        sources.extend(computed);
        for q in &cands {
            let (l, u) = inner_pair(&sources[&ChannelCache::key(q)], cache, opts);
            offer_min(&mut lo, &l, q);
            offer_min(&mut up, &u, q);
        }
    }
    Ok((
        lo.expect("marginal grid is nonempty"),
        up.expect("marginal grid is nonempty"),
    ))
}

/// Nested bounds: `min_{q_a} max_{s_x} min_R e_U(R, P, q_a) + E(R, s_x, W)` with
/// `E = E_r` for the lower bound and `E = E_sp` for the upper bound.
pub fn theorem1_bounds(
    p: &JointDistribution,
    w: &ConditionalDistribution,
    opts: &GridOptions,
) -> Result<JointBoundResult> {
    let rates = joint_rates(opts.rate_step, p.rows());
    let mut cache = ChannelCache {
        w,
        rates: &rates,
        curves: HashMap::new(),
    };
    let (lower, upper) = outer_pair(p, &mut cache, opts)?;
    let result = JointBoundResult {
        lower: lower.value,
        upper: upper.value,
        r_star_lower: lower.rate,
        r_star_upper: upper.rate,
        q_a_star: Some(lower.q),
        s_x_star: Some(lower.s),
        matched: false,
        complete_characterization: false,
        reliable: conditional_entropy(p) < capacity(w),
        rate_step: opts.rate_step,
    };
    Ok(matching_check(result, w).0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SaddleCandidate {
    pub q_a: Distribution,
    pub s_x: Distribution,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GameReport {
    /// `min_q max_s min_R` of the payoff.
    pub maxmin_value: f64,
    /// `min_q min_R max_s` of the payoff.
    pub minmax_value: f64,
    pub gap: f64,
    /// Largest inner gap over the source marginals examined.
    pub max_inner_gap: f64,
    pub saddle_candidate: SaddleCandidate,
    /// Gap certified as an interchange when at most [`GAP_TOL`].
    pub interchange_certified: bool,
}

fn gap_of(minmax: f64, maxmin: f64) -> f64 {
    if minmax == maxmin {
        0.0
    } else {
        minmax - maxmin
    }
}

/// The inner game over `(s_x, R)` at every source marginal on the coarse grid.
pub fn game_solve(
    p: &JointDistribution,
    w: &ConditionalDistribution,
    payoff: Which,
    opts: &GridOptions,
) -> Result<GameReport> {
    let rates = joint_rates(opts.rate_step, p.rows());
    let mut cache = ChannelCache {
        w,
        rates: &rates,
        curves: HashMap::new(),
    };
    let comps: Vec<Distribution> = simplex_points(w.inputs(), opts.simplex_step, None)
        .into_iter()
        .map(|(_, s)| s)
        .collect();
    cache.fill(&comps);
    let marginals: Vec<Distribution> = simplex_points(p.rows(), opts.simplex_step, None)
        .into_iter()
        .map(|(_, q)| q)
        .collect();
    let mut best: Option<(f64, f64, SaddleCandidate)> = None;
    let mut max_inner_gap = 0.0f64;
    for q in &marginals {
        let source = FixedMarginalCurve::new(p, q)?.e_upper(&rates);
        // max_s min_R
        let mut maxmin = (f64::NEG_INFINITY, f64::NAN, 0usize);
        // max_s for every R, then min_R
        let mut upper_env = vec![f64::NEG_INFINITY; rates.len()];
        for (k, s) in comps.iter().enumerate() {
            let ch = cache.get(s, payoff);
            let sum: Vec<f64> = source.iter().zip(ch).map(|(a, b)| a + b).collect();
            let (v, r) = argmin(&rates, &sum);
            if v > maxmin.0 + 1e-12
                || ((v - maxmin.0).abs() <= 1e-12
                    && distance_to_uniform(s.probs())
                        < distance_to_uniform(comps[maxmin.2].probs()))
            {
                maxmin = (v, r, k);
            }
            for (e, x) in upper_env.iter_mut().zip(&sum) {
                *e = e.max(*x);
            }
        }
        let (minmax, _) = argmin(&rates, &upper_env);
        max_inner_gap = max_inner_gap.max(gap_of(minmax, maxmin.0));
        let cand = SaddleCandidate {
            q_a: q.clone(),
            s_x: comps[maxmin.2].clone(),
            rate: maxmin.1,
        };
        best = Some(match best {
            None => (maxmin.0, minmax, cand),
            Some((a, b, c)) => {
                let keep = if a <= maxmin.0 { c } else { cand };
                (a.min(maxmin.0), b.min(minmax), keep)
            }
        });
    }
    let (maxmin_value, minmax_value, saddle_candidate) = best.expect("marginal grid is nonempty");
    let gap = gap_of(minmax_value, maxmin_value);
    Ok(GameReport {
        maxmin_value,
        minmax_value,
        gap,
        max_inner_gap,
        saddle_candidate,
        interchange_certified: gap <= GAP_TOL,
    })
}

/// The composition maximizing `min_R e_U(R, P, q) + E_r(R, s, W)` for each
/// source marginal `q`, sharing channel curves across marginals.
pub fn best_compositions(
    p: &JointDistribution,
    w: &ConditionalDistribution,
    marginals: &[Distribution],
    opts: &GridOptions,
) -> Result<Vec<Distribution>> {
    let rates = joint_rates(opts.rate_step, p.rows());
    let mut cache = ChannelCache {
        w,
        rates: &rates,
        curves: HashMap::new(),
    };
    marginals
        .iter()
        .map(|q| {
            let source = FixedMarginalCurve::new(p, q)?.e_upper(&rates);
            Ok(inner_max(&source, &mut cache, Which::Random, opts).s)
        })
        .collect()
}
