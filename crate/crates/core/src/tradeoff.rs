//! Precomputed `(constraint, divergence)` clouds for grid oracles.
//!
//! Every primal exponent in this crate is a minimization of a divergence `d`
//! subject to, or penalized by, a scalar statistic `c` of the same candidate
//! (a mutual information or a conditional entropy). Once the candidate grid
//! is enumerated, each of the four query shapes below is answered from
//! sorted prefix/suffix minima without touching the grid again:
//!
//! | query              | value                          |
//! |--------------------|--------------------------------|
//! | `min_at_most(t)`   | `min d  s.t. c ≤ t`            |
//! | `min_at_least(t)`  | `min d  s.t. c ≥ t`            |
//! | `min_excess(t)`    | `min d + |c − t|^+`            |
//! | `min_shortfall(t)` | `min d + |t − c|^+`            |

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::optim::{simplex_lattice, simplex_lattice_size};

/// Constraints are evaluated on their closure with this slack.
pub const CLOSURE_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    pub value: f64,
    /// Index of the candidate in the order it was supplied.
    pub index: usize,
    /// Statistic `c` of that candidate.
    pub stat: f64,
}

#[derive(Clone, Debug)]
pub struct TradeoffTable {
    stat: Vec<f64>,
    div: Vec<f64>,
    origin: Vec<usize>,
    // Running minima over the stat-sorted order, each storing a sorted position.
    prefix_div: Vec<usize>,
    suffix_div: Vec<usize>,
    suffix_div_plus: Vec<usize>,
    prefix_div_minus: Vec<usize>,
}

impl TradeoffTable {
    /// Builds the table from `(stat, divergence)` pairs. Candidates with an
    /// infinite divergence are dropped.
    pub fn new(points: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let mut rows: Vec<(f64, f64, usize)> = points
            .into_iter()
            .enumerate()
            .filter(|(_, (_, d))| d.is_finite())
            .map(|(i, (c, d))| (c, d, i))
            .collect();
        rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
        let stat: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let div: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let origin: Vec<usize> = rows.iter().map(|r| r.2).collect();
        let n = rows.len();

        let running = |key: &dyn Fn(usize) -> f64, forward: bool| -> Vec<usize> {
            let mut out = vec![0usize; n];
            let order: Box<dyn Iterator<Item = usize>> = if forward {
                Box::new(0..n)
            } else {
                Box::new((0..n).rev())
            };
            let mut best: Option<usize> = None;
            for i in order {
                // Strict improvement keeps the earliest-supplied candidate on ties
                // in the forward direction; ties going backward prefer the
                // lower stat.
                best = match best {
                    Some(b) if key(b) < key(i) || (key(b) == key(i) && forward) => Some(b),
                    _ => Some(i),
                };
                out[i] = best.unwrap();
            }
            out
        };
        let prefix_div = running(&|i| div[i], true);
        let suffix_div = running(&|i| div[i], false);
        let suffix_div_plus = running(&|i| div[i] + stat[i], false);
        let prefix_div_minus = running(&|i| div[i] - stat[i], true);
        Self {
            stat,
            div,
            origin,
            prefix_div,
            suffix_div,
            suffix_div_plus,
            prefix_div_minus,
        }
    }

    pub fn len(&self) -> usize {
        self.stat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stat.is_empty()
    }

    /// Smallest statistic among finite-divergence candidates.
    pub fn min_stat(&self) -> Option<f64> {
        self.stat.first().copied()
    }

    pub fn max_stat(&self) -> Option<f64> {
        self.stat.last().copied()
    }

    fn hit(&self, pos: usize, value: f64) -> Hit {
        Hit {
            value,
            index: self.origin[pos],
            stat: self.stat[pos],
        }
    }

    // Number of candidates with stat ≤ t (+ slack).
    fn count_le(&self, t: f64) -> usize {
        self.stat.partition_point(|&c| c <= t + CLOSURE_SLACK)
    }

    // First position with stat ≥ t (- slack).
    fn first_ge(&self, t: f64) -> usize {
        self.stat.partition_point(|&c| c < t - CLOSURE_SLACK)
    }

    pub fn min_at_most(&self, t: f64) -> Option<Hit> {
        let k = self.count_le(t);
        (k > 0).then(|| {
            let p = self.prefix_div[k - 1];
            self.hit(p, self.div[p])
        })
    }

    pub fn min_at_least(&self, t: f64) -> Option<Hit> {
        let k = self.first_ge(t);
        (k < self.len()).then(|| {
            let p = self.suffix_div[k];
            self.hit(p, self.div[p])
        })
    }

    pub fn min_excess(&self, t: f64) -> Option<Hit> {
        let k = self.count_le(t);
        let below = self.min_at_most(t);
        let above = (k < self.len()).then(|| {
            let p = self.suffix_div_plus[k];
            self.hit(p, self.div[p] + (self.stat[p] - t))
        });
        pick(below, above)
    }

    pub fn min_shortfall(&self, t: f64) -> Option<Hit> {
        let k = self.first_ge(t);
        let above = self.min_at_least(t);
        let below = (k > 0).then(|| {
            let p = self.prefix_div_minus[k - 1];
            self.hit(p, self.div[p] + (t - self.stat[p]))
        });
        pick(above, below)
    }
}

/// Cap on enumerated grid points for any primal oracle.
pub const GRID_BUDGET: u128 = 1 << 24;

/// Candidate row-stochastic kernels: each row ranges over a simplex lattice
/// on its allowed support plus an anchor row, and the grid is their product.
#[derive(Clone, Debug)]
pub struct KernelGrid {
    outputs: usize,
    rows: Vec<Vec<Vec<f64>>>,
}

impl KernelGrid {
    /// `active[x] = false` pins row `x` to its anchor.
    pub fn new(anchors: &[Vec<f64>], active: &[bool], denom: u32) -> Result<Self> {
        let outputs = anchors.first().map_or(0, Vec::len);
        let mut rows = Vec::with_capacity(anchors.len());
        let mut total: u128 = 1;
        for (anchor, &on) in anchors.iter().zip(active) {
            let mut cands = Vec::new();
            if on {
                let support: Vec<bool> = anchor.iter().map(|&v| v > 0.0).collect();
                let free = support.iter().filter(|&&b| b).count();
                let size = simplex_lattice_size(free, denom);
                if size.saturating_mul(total) > GRID_BUDGET {
                    return Err(Error::GridTooLarge {
                        points: size.saturating_mul(total),
                        budget: GRID_BUDGET,
                    });
                }
                cands = simplex_lattice(outputs, denom, &support)
                    .into_iter()
                    .map(|k| k.iter().map(|&c| c as f64 / denom as f64).collect())
                    .collect();
            }
            if !cands.iter().any(|c: &Vec<f64>| c == anchor) {
                cands.push(anchor.clone());
            }
            total *= cands.len() as u128;
            rows.push(cands);
        }
        Ok(Self { outputs, rows })
    }

    pub fn len(&self) -> usize {
        self.rows.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major kernel at a mixed-radix index (last row varies fastest).
    pub fn kernel_into(&self, mut index: usize, out: &mut Vec<f64>) {
        out.clear();
        out.resize(self.rows.len() * self.outputs, 0.0);
        for (x, cands) in self.rows.iter().enumerate().rev() {
            let c = &cands[index % cands.len()];
            index /= cands.len();
            out[x * self.outputs..(x + 1) * self.outputs].copy_from_slice(c);
        }
    }

    pub fn kernel(&self, index: usize) -> Vec<f64> {
        let mut out = Vec::new();
        self.kernel_into(index, &mut out);
        out
    }

    /// Evaluates `f` on every kernel, in index order.
    pub fn map<F>(&self, f: F) -> Vec<(f64, f64)>
    where
        F: Fn(&[f64]) -> (f64, f64) + Sync,
    {
        (0..self.len())
            .into_par_iter()
            .map_init(Vec::new, |buf, i| {
                self.kernel_into(i, buf);
                f(buf)
            })
            .collect()
    }
}

fn pick(first: Option<Hit>, second: Option<Hit>) -> Option<Hit> {
    match (first, second) {
        (Some(a), Some(b)) => Some(if b.value < a.value { b } else { a }),
        (a, b) => a.or(b),
    }
}
