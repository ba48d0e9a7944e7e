//! Exponents of source coding with side information at the decoder.
//!
//! `e_L(R) = min_Q D(Q_AB‖P_AB) + |R - H(Q_{A|B})|^+` and
//! `e_U(R) = min_{H(Q_{A|B}) ≥ R} D(Q_AB‖P_AB)`, the latter infinite for
//! `R ≥ log2|A|`. The primal paths enumerate `Q` on a simplex lattice; the
//! dual paths use `E_s(ρ) = log2 Σ_b [Σ_a P(a,b)^{1/(1+ρ)}]^{1+ρ}`, with
//! `e_U(R) = sup_{ρ≥0} ρR - E_s(ρ)` and `e_L(R) = max_{ρ∈[0,1]} ρR - E_s(ρ)`.

use crate::channel::{floor_noise, sphere_packing_closure, FixedCompositionCurve, Method, RHO_MAX};
use crate::error::{Error, Result};
use crate::optim::{maximize_concave_halfline, simplex_lattice_size, step_denominator, Profile};
use crate::probkit::{
    conditional_entropy_of, conditional_kl_of, entropy, entropy_of, kl_of, ConditionalDistribution,
    Distribution, JointDistribution,
};
use crate::tradeoff::{Hit, KernelGrid, TradeoffTable, GRID_BUDGET};

/// Rates this close to `log2|A|` count as reaching it.
const EDGE_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub enum SourceOptimizer {
    Joint(JointDistribution),
    Rho(f64),
    None,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SourceExponentResult {
    pub rate: f64,
    pub value: f64,
    pub optimizer: SourceOptimizer,
    pub method: Method,
    /// The value is infinite: no feasible `Q`, or an unbounded dual.
    pub diverged: bool,
}

impl SourceExponentResult {
    fn infinite(rate: f64, method: Method) -> Self {
        Self {
            rate,
            value: f64::INFINITY,
            optimizer: SourceOptimizer::None,
            method,
            diverged: true,
        }
    }
}

fn check_rate(r: f64) -> Result<()> {
    if !(r >= 0.0) {
        return Err(Error::RateOutOfDomain {
            rate: r,
            reason: "source exponents need r >= 0",
        });
    }
    Ok(())
}

/// `E_s(ρ) = log2 Σ_b [Σ_a P(a,b)^{1/(1+ρ)}]^{1+ρ}`; convex, `E_s(0) = 0`.
pub fn source_e_s(rho: f64, p: &JointDistribution) -> f64 {
    if rho == 0.0 {
        return 0.0;
    }
    let t = 1.0 / (1.0 + rho);
    let total: f64 = (0..p.cols())
        .map(|b| {
            let inner: f64 = (0..p.rows())
                .map(|a| p.get(a, b))
                .filter(|&v| v > 0.0)
                .map(|v| v.powf(t))
                .sum();
            if inner > 0.0 {
                inner.powf(1.0 + rho)
            } else {
                0.0
            }
        })
        .sum();
    total.log2().max(0.0)
}

/// Finest default step for a lattice with `free` cells within the grid budget.
fn default_step(free: usize, preferred: f64) -> f64 {
    const STEPS: [f64; 8] = [0.005, 0.01, 0.02, 0.025, 0.05, 0.1, 0.2, 0.5];
    STEPS
        .iter()
        .copied()
        .filter(|&s| s >= preferred)
        .find(|&s| simplex_lattice_size(free, step_denominator(s).unwrap_or(1)) <= GRID_BUDGET / 16)
        .unwrap_or(1.0)
}

/// Primal oracle over joint distributions `Q_AB ≪ P_AB` on a simplex lattice.
pub struct SourceGrid {
    p: JointDistribution,
    grid: KernelGrid,
    table: TradeoffTable,
    step: f64,
}

impl SourceGrid {
    pub fn new(p: &JointDistribution, step: f64) -> Result<Self> {
        let denom = step_denominator(step).ok_or_else(|| {
            Error::InvalidParameter(format!("grid step {step} is not 1/k for an integer k"))
        })?;
        let grid = KernelGrid::new(&[p.probs().to_vec()], &[true], denom)?;
        let (pp, cols) = (p.probs(), p.cols());
        let table =
            TradeoffTable::new(grid.map(|q| (conditional_entropy_of(q, cols), kl_of(q, pp))));
        Ok(Self {
            p: p.clone(),
            grid,
            table,
            step,
        })
    }

    /// Default step: 0.01 when it fits the grid budget, coarser otherwise.
    pub fn with_default_step(p: &JointDistribution) -> Result<Self> {
        let free = p.probs().iter().filter(|&&v| v > 0.0).count();
        Self::new(p, default_step(free, 0.01))
    }

    fn result(&self, r: f64, hit: Option<Hit>) -> SourceExponentResult {
        let method = Method::PrimalGrid { step: self.step };
        match hit {
            Some(h) => SourceExponentResult {
                rate: r,
                value: h.value.max(0.0),
                optimizer: SourceOptimizer::Joint(JointDistribution::from_raw(
                    self.p.rows(),
                    self.p.cols(),
                    self.grid.kernel(h.index),
                )),
                method,
                diverged: false,
            },
            None => SourceExponentResult::infinite(r, method),
        }
    }

    pub fn e_lower(&self, r: f64) -> SourceExponentResult {
        self.result(r, self.table.min_shortfall(r))
    }

    pub fn e_upper(&self, r: f64) -> SourceExponentResult {
        if r >= (self.p.rows() as f64).log2() - EDGE_TOL {
            return SourceExponentResult::infinite(r, Method::PrimalGrid { step: self.step });
        }
        self.result(r, self.table.min_at_least(r))
    }
}

/// `e_L(r)` on the default primal grid.
pub fn e_lower(r: f64, p: &JointDistribution) -> Result<SourceExponentResult> {
    check_rate(r)?;
    Ok(SourceGrid::with_default_step(p)?.e_lower(r))
}

/// `e_U(r)` on the default primal grid.
pub fn e_upper(r: f64, p: &JointDistribution) -> Result<SourceExponentResult> {
    check_rate(r)?;
    Ok(SourceGrid::with_default_step(p)?.e_upper(r))
}

/// `e_U(r) = sup_{ρ≥0} ρr - E_s(ρ)`.
pub fn e_upper_dual(r: f64, p: &JointDistribution) -> Result<SourceExponentResult> {
    check_rate(r)?;
    if r >= (p.rows() as f64).log2() - EDGE_TOL {
        return Ok(SourceExponentResult::infinite(r, Method::GallagerDual));
    }
    let best = maximize_concave_halfline(|rho| rho * r - source_e_s(rho, p), RHO_MAX, 1e-10);
    if best.diverged {
        return Ok(SourceExponentResult::infinite(r, Method::GallagerDual));
    }
    Ok(SourceExponentResult {
        rate: r,
        value: floor_noise(best.value),
        optimizer: SourceOptimizer::Rho(best.argmax),
        method: Method::GallagerDual,
        diverged: false,
    })
}

/// `e_L(r) = max_{ρ∈[0,1]} ρr - E_s(ρ)`.
pub fn e_lower_dual(r: f64, p: &JointDistribution) -> Result<SourceExponentResult> {
    check_rate(r)?;
    let (rho, value) =
        crate::optim::golden_max(|rho| rho * r - source_e_s(rho, p), 0.0, 1.0, 1e-10);
    Ok(SourceExponentResult {
        rate: r,
        value: floor_noise(value),
        optimizer: SourceOptimizer::Rho(rho),
        method: Method::GallagerDual,
        diverged: false,
    })
}

/// `e_L` and `e_U` on a rate grid from the sampled `E_s`.
pub struct SourceCurves<'a> {
    p: &'a JointDistribution,
    profile: Profile,
}

impl<'a> SourceCurves<'a> {
    pub fn new(p: &'a JointDistribution) -> Self {
        Self {
            p,
            profile: Profile::sample(|rho| -source_e_s(rho, p), RHO_MAX),
        }
    }

    fn eval(&self, rates: &[f64], unit: bool) -> Vec<f64> {
        let f = |rho: f64| -source_e_s(rho, self.p);
        let neg: Vec<f64> = rates.iter().map(|r| -r).collect();
        self.profile
            .eval(Some(&f), &neg, unit)
            .into_iter()
            .map(|h| floor_noise(h.value))
            .collect()
    }

    pub fn e_lower(&self, rates: &[f64]) -> Vec<f64> {
        self.eval(rates, true)
    }

    pub fn e_upper(&self, rates: &[f64]) -> Vec<f64> {
        let edge = (self.p.rows() as f64).log2() - EDGE_TOL;
        self.eval(rates, false)
            .into_iter()
            .zip(rates)
            .map(|(v, &r)| if r >= edge { f64::INFINITY } else { v })
            .collect()
    }
}

/// Primal oracle for `e_U(R, P_AB, Q_A)`: kernels `Q_{B|A}` on a lattice,
/// with `Q_AB = Q_A × Q_{B|A}`.
pub struct FixedMarginalGrid {
    q_a: Distribution,
    cols: usize,
    grid: KernelGrid,
    table: TradeoffTable,
    step: f64,
}

impl FixedMarginalGrid {
    /// Divergence `D(Q_A‖P_A) + D(Q_{B|A}‖P_{B|A}|Q_A)` against statistic `H(Q_{A|B})`.
    pub fn new(p: &JointDistribution, q_a: &Distribution, step: f64) -> Result<Self> {
        if q_a.alphabet_size() != p.rows() {
            return Err(Error::AlphabetMismatch {
                left: q_a.alphabet_size(),
                right: p.rows(),
            });
        }
        let offset = kl_of(q_a.probs(), p.row_marginal().probs());
        Self::build(q_a, &p.kernel_b_given_a(), offset, step)
    }

    fn build(
        q_a: &Distribution,
        kernel: &ConditionalDistribution,
        offset: f64,
        step: f64,
    ) -> Result<Self> {
        let denom = step_denominator(step).ok_or_else(|| {
            Error::InvalidParameter(format!("grid step {step} is not 1/k for an integer k"))
        })?;
        let active: Vec<bool> = q_a.probs().iter().map(|&v| v > 0.0).collect();
        let grid = KernelGrid::new(&kernel.to_matrix(), &active, denom)?;
        let (qa, kp, cols) = (q_a.probs(), kernel.probs(), kernel.outputs());
        let table = TradeoffTable::new(grid.map(|v| {
            let joint: Vec<f64> = v
                .chunks(cols)
                .zip(qa)
                .flat_map(|(row, &w)| row.iter().map(move |x| x * w))
                .collect();
            (
                conditional_entropy_of(&joint, cols),
                offset + conditional_kl_of(v, kp, qa, cols),
            )
        }));
        Ok(Self {
            q_a: q_a.clone(),
            cols,
            grid,
            table,
            step,
        })
    }

    pub fn e_upper(&self, r: f64) -> SourceExponentResult {
        let method = Method::PrimalGrid { step: self.step };
        match self.table.min_at_least(r) {
            Some(h) => {
                let v = self.grid.kernel(h.index);
                let probs = v
                    .chunks(self.cols)
                    .zip(self.q_a.probs())
                    .flat_map(|(row, &w)| row.iter().map(move |x| x * w))
                    .collect();
                SourceExponentResult {
                    rate: r,
                    value: h.value.max(0.0),
                    optimizer: SourceOptimizer::Joint(JointDistribution::from_raw(
                        self.q_a.alphabet_size(),
                        self.cols,
                        probs,
                    )),
                    method,
                    diverged: false,
                }
            }
            None => SourceExponentResult::infinite(r, method),
        }
    }
}

/// `e_U(r, P_AB, Q_A)` on a primal grid of step 0.01.
pub fn e_upper_fixed_marginal(
    r: f64,
    p: &JointDistribution,
    q_a: &Distribution,
) -> Result<SourceExponentResult> {
    check_rate(r)?;
    let free = p
        .kernel_b_given_a()
        .probs()
        .iter()
        .filter(|&&v| v > 0.0)
        .count();
    let step = default_step(free, 0.01);
    Ok(FixedMarginalGrid::new(p, q_a, step)?.e_upper(r))
}

/// `e_U(R, P_AB, Q_A)` on a rate grid through the channel-side identity
/// `D(Q_A‖P_A) + E_sp(H(Q_A) - R, Q_A, P_{B|A})`, infinite for `R > H(Q_A)`.
pub struct FixedMarginalCurve {
    offset: f64,
    h_qa: f64,
    curve: Option<FixedCompositionCurve>,
}

impl FixedMarginalCurve {
    pub fn new(p: &JointDistribution, q_a: &Distribution) -> Result<Self> {
        if q_a.alphabet_size() != p.rows() {
            return Err(Error::AlphabetMismatch {
                left: q_a.alphabet_size(),
                right: p.rows(),
            });
        }
        let offset = kl_of(q_a.probs(), p.row_marginal().probs());
        let curve = if offset.is_finite() {
            Some(FixedCompositionCurve::new(q_a, &p.kernel_b_given_a())?)
        } else {
            None
        };
        Ok(Self {
            offset,
            h_qa: entropy(q_a),
            curve,
        })
    }

    pub fn e_upper(&self, rates: &[f64]) -> Vec<f64> {
        let Some(curve) = &self.curve else {
            return vec![f64::INFINITY; rates.len()];
        };
        let channel_rates: Vec<f64> = rates.iter().map(|r| (self.h_qa - r).max(0.0)).collect();
        curve
            .sphere_packing(&channel_rates)
            .into_iter()
            .zip(rates)
            .map(|(v, &r)| {
                if r > self.h_qa + EDGE_TOL {
                    f64::INFINITY
                } else {
                    self.offset + v
                }
            })
            .collect()
    }
}

/// `min_{H(Q_A) ≥ r} D(Q_A‖P_A)` on the closed constraint set: 0 for
/// `r ≤ H(P_A)`, `D(uniform‖P_A)` at `r = log2|A|`, infinite beyond. The
/// minimizer lies on the tilted family `Q ∝ P_A^λ`, `λ ∈ [0, 1]`, found by
/// bisection on `H(Q_λ) = r`.
pub fn independent_si_exponent(r: f64, p_a: &Distribution) -> Result<f64> {
    check_rate(r)?;
    let p = p_a.probs();
    if r <= entropy(p_a) {
        return Ok(0.0);
    }
    let support = p.iter().filter(|&&v| v > 0.0).count() as f64;
    if r > support.log2() + EDGE_TOL {
        return Ok(f64::INFINITY);
    }
    if r >= support.log2() - EDGE_TOL {
        // Only the uniform law on the support is feasible.
        let q: Vec<f64> = p
            .iter()
            .map(|&v| if v > 0.0 { 1.0 / support } else { 0.0 })
            .collect();
        return Ok(kl_of(&q, p));
    }
    let tilt = |lambda: f64| {
        let q: Vec<f64> = p
            .iter()
            .map(|&v| if v > 0.0 { v.powf(lambda) } else { 0.0 })
            .collect();
        let z: f64 = q.iter().sum();
        q.into_iter().map(|v| v / z).collect::<Vec<f64>>()
    };
    // H(Q_λ) decreases from log2|supp| at λ = 0 to H(P_A) at λ = 1.
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if entropy_of(&tilt(mid)) >= r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(kl_of(&tilt(lo), p))
}

/// Both faces of `e(R, Q_A, P_{B|A}) = E_sp(H(Q_A) - R, Q_A, P_{B|A})`.
#[derive(Clone, Debug, PartialEq)]
pub struct DualityReport {
    pub rate: f64,
    /// `min D(Q_{B|A}‖P_{B|A}|Q_A)` over lattice kernels with `H(Q_{A|B}) ≥ R`.
    pub lhs: f64,
    /// Primal sphere packing at rate `H(Q_A) - R` on the same lattice.
    pub rhs: f64,
    /// Dual sphere packing at the same rate.
    pub rhs_dual: f64,
    pub discrepancy: f64,
    pub discrepancy_dual: f64,
}

pub fn duality_check(
    r: f64,
    q_a: &Distribution,
    p_b_given_a: &ConditionalDistribution,
    step: f64,
) -> Result<DualityReport> {
    check_rate(r)?;
    let h = entropy(q_a);
    if r > h + EDGE_TOL {
        return Err(Error::RateOutOfDomain {
            rate: r,
            reason: "duality check needs r <= H(q_a)",
        });
    }
    let lhs = FixedMarginalGrid::build(q_a, p_b_given_a, 0.0, step)?
        .e_upper(r)
        .value;
    let channel_rate = (h - r).max(0.0);
    let rhs =
        sphere_packing_closure(channel_rate, q_a, p_b_given_a, Method::PrimalGrid { step })?.value;
    let rhs_dual =
        sphere_packing_closure(channel_rate, q_a, p_b_given_a, Method::GallagerDual)?.value;
    let diff = |a: f64, b: f64| if a == b { 0.0 } else { (a - b).abs() };
    Ok(DualityReport {
        rate: r,
        lhs,
        rhs,
        rhs_dual,
        discrepancy: diff(lhs, rhs),
        discrepancy_dual: diff(lhs, rhs_dual),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn e_s_slope_at_zero_is_conditional_entropy() {
        let p = JointDistribution::new(vec![vec![0.5, 0.0], vec![0.05, 0.45]]).unwrap();
        let h = 1e-6;
        let slope = (source_e_s(h, &p) - source_e_s(0.0, &p)) / h;
        assert!((slope - 0.241_723_342_806_832_4).abs() < 1e-5);
    }

    #[test]
    fn independent_boundary_value() {
        let p = Distribution::new(vec![0.9, 0.1]).unwrap();
        let v = independent_si_exponent(1.0, &p).unwrap();
        let direct = 0.5 * (0.5f64 / 0.9).log2() + 0.5 * (0.5f64 / 0.1).log2();
        assert!((v - direct).abs() < 1e-9);
        assert!((v - 0.736_965_594).abs() < 1e-6);
        assert_eq!(independent_si_exponent(1.01, &p).unwrap(), f64::INFINITY);
        assert_eq!(independent_si_exponent(0.3, &p).unwrap(), 0.0);
    }
}
