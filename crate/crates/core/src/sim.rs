//! Exact evaluation of composition-constrained random codes at small blocklengths.
//!
//! A source sequence `a^n` of type `Q_A` is mapped to a channel input drawn
//! uniformly from the type class of a composition `S_X(Q_A)`. Decoding uses
//! either the empirical rule `argmax I(x^n(a^n); y^n) - H(a^n|b^n)` or MAP, and
//! the error probability is summed exactly over all `(a^n, b^n, y^n)`.
//!
//! Sequences are indexed as base-`|alphabet|` numbers, first symbol most
//! significant.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution as _;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::joint::{best_compositions, GridOptions};
use crate::probkit::{ConditionalDistribution, Distribution, JointDistribution};

/// Default cap on `|A|^n |B|^n |Y|^n` for exact summation.
pub const STATE_BUDGET: u128 = 1 << 24;
/// Default blocklength cap.
pub const MAX_BLOCKLENGTH: usize = 8;
/// Blocklength cap that no configuration can raise.
pub const HARD_MAX_BLOCKLENGTH: usize = 10;
/// Decoder scores within this distance are a tie.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CompositionRule {
    /// Per source type, the composition maximizing the inner exponent.
    Optimized,
    /// The balanced composition for every source type.
    Uniform,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decoder {
    MmiSi,
    Map,
}

/// Composition assigned to one source type.
#[derive(Clone, Debug, PartialEq)]
pub struct CompositionEntry {
    /// Symbol counts of the source type.
    pub source_type: Vec<u32>,
    /// Target composition before rounding.
    pub target: Vec<f64>,
    /// Symbol counts after largest-remainder rounding.
    pub counts: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Codebook {
    pub n: usize,
    pub source_alphabet: usize,
    pub input_alphabet: usize,
    /// Codeword of each source sequence, by sequence index.
    pub entries: Vec<Vec<u8>>,
    pub compositions: Vec<CompositionEntry>,
    /// `None` for codebooks supplied entry by entry.
    pub rule: Option<CompositionRule>,
    pub seed: u64,
}

fn pow(base: usize, n: usize) -> u128 {
    (base as u128).saturating_pow(n as u32)
}

/// Digits of `index` in base `q`, most significant first.
fn digits(mut index: usize, q: usize, n: usize) -> Vec<u8> {
    let mut out = vec![0u8; n];
    for slot in out.iter_mut().rev() {
        *slot = (index % q) as u8;
        index /= q;
    }
    out
}

fn type_of(seq: &[u8], q: usize) -> Vec<u32> {
    let mut c = vec![0u32; q];
    for &s in seq {
        c[s as usize] += 1;
    }
    c
}

/// Rounds `n · target` to integer counts summing to `n`: floors first, then
/// the largest fractional parts (lower index first on ties) get one more.
pub fn largest_remainder(target: &[f64], n: usize) -> Vec<u32> {
    let scaled: Vec<f64> = target.iter().map(|t| t * n as f64).collect();
    let mut counts: Vec<u32> = scaled.iter().map(|v| v.floor() as u32).collect();
    let assigned: u32 = counts.iter().sum();
    let mut order: Vec<usize> = (0..target.len()).collect();
    order.sort_by(|&i, &j| {
        (scaled[j] - scaled[j].floor())
            .total_cmp(&(scaled[i] - scaled[i].floor()))
            .then(i.cmp(&j))
    });
    for &i in order
        .iter()
        .take((n as u32).saturating_sub(assigned) as usize)
    {
        counts[i] += 1;
    }
    counts
}

impl Codebook {
    /// Wraps explicit codewords; every codeword must have length `n` and
    /// symbols below `input_alphabet`.
    pub fn from_entries(
        n: usize,
        source_alphabet: usize,
        input_alphabet: usize,
        entries: Vec<Vec<u8>>,
    ) -> Result<Self> {
        if pow(source_alphabet, n) != entries.len() as u128 {
            return Err(Error::InvalidParameter(format!(
                "expected {} codewords, got {}",
                pow(source_alphabet, n),
                entries.len()
            )));
        }
        if entries
            .iter()
            .any(|c| c.len() != n || c.iter().any(|&x| x as usize >= input_alphabet))
        {
            return Err(Error::InvalidParameter(
                "codeword of wrong length or symbol out of range".into(),
            ));
        }
        Ok(Self {
            n,
            source_alphabet,
            input_alphabet,
            entries,
            compositions: Vec::new(),
            rule: None,
            seed: 0,
        })
    }

    pub fn codeword(&self, source_index: usize) -> &[u8] {
        &self.entries[source_index]
    }
}

/// Draws a codebook: for each source sequence in index order, a uniform
/// shuffle of the rounded composition assigned to its type.
pub fn build_codebook(
    n: usize,
    p: &JointDistribution,
    w: &ConditionalDistribution,
    rule: CompositionRule,
    seed: u64,
) -> Result<Codebook> {
    build_codebook_with(n, p, w, rule, seed, MAX_BLOCKLENGTH)
}

pub fn build_codebook_with(
    n: usize,
    p: &JointDistribution,
    w: &ConditionalDistribution,
    rule: CompositionRule,
    seed: u64,
    max_n: usize,
) -> Result<Codebook> {
    let (qa, qx) = (p.rows(), w.inputs());
    if n == 0 {
        return Err(Error::InvalidParameter(
            "blocklength must be positive".into(),
        ));
    }
    if qx > 256 || qa > 256 {
        return Err(Error::InvalidParameter(
            "alphabets above 256 symbols are not supported".into(),
        ));
    }
    let sequences = pow(qa, n);
    let max_n = max_n.min(HARD_MAX_BLOCKLENGTH);
    if n > max_n {
        return Err(Error::BudgetExceeded {
            needed: n as u128,
            budget: max_n as u128,
            detail: "the blocklength".into(),
        });
    }
    if sequences > STATE_BUDGET {
        return Err(Error::BudgetExceeded {
            needed: sequences,
            budget: STATE_BUDGET,
            detail: format!("enumerating the {qa}^{n} source sequences"),
        });
    }
    let count = sequences as usize;
    let sources: Vec<Vec<u8>> = (0..count).map(|i| digits(i, qa, n)).collect();
    let mut types: Vec<Vec<u32>> = sources.iter().map(|s| type_of(s, qa)).collect();
    types.sort();
    types.dedup();
    let targets: Vec<Vec<f64>> = match rule {
        CompositionRule::Uniform => vec![vec![1.0 / qx as f64; qx]; types.len()],
        CompositionRule::Optimized => {
            let marginals: Vec<Distribution> = types
                .iter()
                .map(|t| Distribution::from_raw(t.iter().map(|&c| c as f64 / n as f64).collect()))
                .collect();
            let opts = GridOptions {
                rate_step: 1e-2,
                ..GridOptions::default()
            };
            best_compositions(p, w, &marginals, &opts)?
                .into_iter()
                .map(|d| d.probs().to_vec())
                .collect()
        }
    };
    let compositions: Vec<CompositionEntry> = types
        .into_iter()
        .zip(targets)
        .map(|(source_type, target)| CompositionEntry {
            counts: largest_remainder(&target, n),
            source_type,
            target,
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entries = sources
        .iter()
        .map(|s| {
            let t = type_of(s, qa);
            let comp = compositions
                .iter()
                .find(|c| c.source_type == t)
                .expect("every type has a composition");
            let mut word: Vec<u8> = comp
                .counts
                .iter()
                .enumerate()
                .flat_map(|(x, &c)| std::iter::repeat_n(x as u8, c as usize))
                .collect();
            word.shuffle(&mut rng);
            word
        })
        .collect();
    Ok(Codebook {
        n,
        source_alphabet: qa,
        input_alphabet: qx,
        entries,
        compositions,
        rule: Some(rule),
        seed,
    })
}

// Σ_k c_k log2 c_k over nonzero counts, for empirical entropies.
fn count_entropy_sum(counts: &[u32]) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| c as f64 * (c as f64).log2())
        .sum()
}

/// Empirical conditional entropy `H(u|v)` of two sequences.
fn empirical_conditional_entropy(u: &[u8], v: &[u8], qu: usize, qv: usize) -> f64 {
    let n = u.len() as f64;
    let mut joint = vec![0u32; qu * qv];
    let mut marg = vec![0u32; qv];
    for (&a, &b) in u.iter().zip(v) {
        joint[a as usize * qv + b as usize] += 1;
        marg[b as usize] += 1;
    }
    ((count_entropy_sum(&marg) - count_entropy_sum(&joint)) / n).max(0.0)
}

/// Empirical mutual information between two sequences.
fn empirical_mutual_information(u: &[u8], v: &[u8], qu: usize, qv: usize) -> f64 {
    let n = u.len() as f64;
    let mut joint = vec![0u32; qu * qv];
    let mut mu = vec![0u32; qu];
    let mut mv = vec![0u32; qv];
    for (&a, &b) in u.iter().zip(v) {
        joint[a as usize * qv + b as usize] += 1;
        mu[a as usize] += 1;
        mv[b as usize] += 1;
    }
    let nlogn = n * n.log2();
    ((count_entropy_sum(&joint) + nlogn - count_entropy_sum(&mu) - count_entropy_sum(&mv)) / n)
        .max(0.0)
}

/// Index of the unique maximum, or `None` when another score is within
/// [`TIE_TOL`] of it.
fn unique_argmax(scores: impl Iterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    let mut tied = false;
    for (i, s) in scores.enumerate() {
        match best {
            None => best = Some((i, s)),
            Some((_, b)) if s > b + TIE_TOL => {
                best = Some((i, s));
                tied = false;
            }
            Some((_, b)) if (s - b).abs() <= TIE_TOL => tied = true,
            _ => {}
        }
    }
    if tied {
        None
    } else {
        best.map(|b| b.0)
    }
}

fn check_lengths(codebook: &Codebook, b: &[u8], y: &[u8]) -> Result<()> {
    if b.len() != codebook.n || y.len() != codebook.n {
        return Err(Error::InvalidParameter(format!(
            "sequences must have length {}, got {} and {}",
            codebook.n,
            b.len(),
            y.len()
        )));
    }
    Ok(())
}

/// The empirical decoder. `None` is a tie, which counts as an error.
pub fn mmi_si_decode(
    codebook: &Codebook,
    b: &[u8],
    y: &[u8],
    b_alphabet: usize,
    y_alphabet: usize,
) -> Result<Option<usize>> {
    check_lengths(codebook, b, y)?;
    let (qa, qx) = (codebook.source_alphabet, codebook.input_alphabet);
    Ok(unique_argmax((0..codebook.entries.len()).map(|i| {
        let a = digits(i, qa, codebook.n);
        empirical_mutual_information(&codebook.entries[i], y, qx, y_alphabet)
            - empirical_conditional_entropy(&a, b, qa, b_alphabet)
    })))
}

/// `P(a^n, b^n) W(y^n | x^n(a^n))` as a left-to-right product of per-letter factors.
fn joint_probability(
    a: &[u8],
    x: &[u8],
    b: &[u8],
    y: &[u8],
    p: &JointDistribution,
    w: &ConditionalDistribution,
) -> f64 {
    let mut prob = 1.0;
    for i in 0..a.len() {
        prob *= p.get(a[i] as usize, b[i] as usize) * w.get(x[i] as usize, y[i] as usize);
    }
    prob
}

/// MAP decoding: the first source sequence with the largest posterior, or
/// `None` when `(b^n, y^n)` has probability zero.
pub fn map_decode(
    codebook: &Codebook,
    p: &JointDistribution,
    w: &ConditionalDistribution,
    b: &[u8],
    y: &[u8],
) -> Result<Option<usize>> {
    check_lengths(codebook, b, y)?;
    let qa = codebook.source_alphabet;
    let mut best: Option<(usize, f64)> = None;
    for i in 0..codebook.entries.len() {
        let a = digits(i, qa, codebook.n);
        let s = joint_probability(&a, &codebook.entries[i], b, y, p, w);
        if s > 0.0 && best.is_none_or(|(_, v)| s > v) {
            best = Some((i, s));
        }
    }
    Ok(best.map(|b| b.0))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimulationResult {
    pub n: usize,
    pub error_probability: f64,
    /// `-(1/n) log2 Pe`; infinite when `Pe = 0`.
    pub empirical_exponent: f64,
    pub decoder: Decoder,
}

impl SimulationResult {
    fn new(n: usize, pe: f64, decoder: Decoder) -> Self {
        let pe = pe.clamp(0.0, 1.0);
        Self {
            n,
            error_probability: pe,
            empirical_exponent: if pe > 0.0 {
                -pe.log2() / n as f64
            } else {
                f64::INFINITY
            },
            decoder,
        }
    }
}

/// Exact error probability: for every `(b^n, y^n)` the decoder output `â`
/// contributes `Σ_a P(a,b,y) - P(â,b,y)`, summed in a fixed order.
pub fn exact_error_probability(
    codebook: &Codebook,
    decoder: Decoder,
    p: &JointDistribution,
    w: &ConditionalDistribution,
) -> Result<SimulationResult> {
    exact_error_probability_with(codebook, decoder, p, w, STATE_BUDGET)
}

pub fn exact_error_probability_with(
    codebook: &Codebook,
    decoder: Decoder,
    p: &JointDistribution,
    w: &ConditionalDistribution,
    budget: u128,
) -> Result<SimulationResult> {
    let n = codebook.n;
    let (qa, qb, qx, qy) = (p.rows(), p.cols(), w.inputs(), w.outputs());
    if codebook.source_alphabet != qa || codebook.input_alphabet != qx {
        return Err(Error::AlphabetMismatch {
            left: codebook.source_alphabet * codebook.input_alphabet,
            right: qa * qx,
        });
    }
    let states = pow(qa, n)
        .saturating_mul(pow(qb, n))
        .saturating_mul(pow(qy, n));
    if states > budget {
        return Err(Error::BudgetExceeded {
            needed: states,
            budget,
            detail: format!("exact summation over |A|^n |B|^n |Y|^n states at n = {n}"),
        });
    }
    let (na, nb, ny) = (
        pow(qa, n) as usize,
        pow(qb, n) as usize,
        pow(qy, n) as usize,
    );
    let sources: Vec<Vec<u8>> = (0..na).map(|i| digits(i, qa, n)).collect();
    let per_b: Vec<f64> = (0..nb)
        .into_par_iter()
        .map(|bi| {
            let b = digits(bi, qb, n);
            let h_ab: Vec<f64> = sources
                .iter()
                .map(|a| empirical_conditional_entropy(a, &b, qa, qb))
                .collect();
            let mut err = 0.0;
            let mut probs = vec![0.0; na];
            for yi in 0..ny {
                let y = digits(yi, qy, n);
                for (ai, a) in sources.iter().enumerate() {
                    probs[ai] = joint_probability(a, &codebook.entries[ai], &b, &y, p, w);
                }
                let total: f64 = probs.iter().sum();
                if total == 0.0 {
                    continue;
                }
                let decided = match decoder {
                    Decoder::Map => {
                        let mut best: Option<(usize, f64)> = None;
                        for (ai, &s) in probs.iter().enumerate() {
                            if s > 0.0 && best.is_none_or(|(_, v)| s > v) {
                                best = Some((ai, s));
                            }
                        }
                        best.map(|b| b.0)
                    }
                    Decoder::MmiSi => unique_argmax((0..na).map(|ai| {
                        empirical_mutual_information(&codebook.entries[ai], &y, qx, qy) - h_ab[ai]
                    })),
                };
                let correct = decided.map_or(0.0, |ai| probs[ai]);
                err += total - correct;
            }
            err
        })
        .collect();
    let pe: f64 = per_b.iter().sum();
    Ok(SimulationResult::new(n, pe, decoder))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonteCarloEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub samples: u64,
}

/// Estimates the error probability by sampling `(a^n, b^n)` from the source
/// and `y^n` from the channel, then decoding.
pub fn monte_carlo_error_probability(
    codebook: &Codebook,
    decoder: Decoder,
    p: &JointDistribution,
    w: &ConditionalDistribution,
    samples: u64,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    let n = codebook.n;
    let (qa, qb) = (p.rows(), p.cols());
    let pair = WeightedIndex::new(p.probs()).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let rows: Vec<WeightedIndex<f64>> = (0..w.inputs())
        .map(|x| WeightedIndex::new(w.row(x)).map_err(|e| Error::InvalidParameter(e.to_string())))
        .collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut errors = 0u64;
    let (mut a, mut b, mut y) = (vec![0u8; n], vec![0u8; n], vec![0u8; n]);
    for _ in 0..samples {
        let mut index = 0usize;
        for i in 0..n {
            let k = pair.sample(&mut rng);
            a[i] = (k / qb) as u8;
            b[i] = (k % qb) as u8;
            index = index * qa + a[i] as usize;
        }
        let x = codebook.codeword(index);
        for i in 0..n {
            y[i] = rows[x[i] as usize].sample(&mut rng) as u8;
        }
        let decided = match decoder {
            Decoder::Map => map_decode(codebook, p, w, &b, &y)?,
            Decoder::MmiSi => mmi_si_decode(codebook, &b, &y, qb, w.outputs())?,
        };
        if decided != Some(index) {
            errors += 1;
        }
    }
    let estimate = errors as f64 / samples as f64;
    Ok(MonteCarloEstimate {
        estimate,
        std_error: (estimate * (1.0 - estimate) / samples as f64).sqrt(),
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_and_digits() {
        assert_eq!(largest_remainder(&[0.5, 0.5], 3), vec![2, 1]);
        assert_eq!(largest_remainder(&[0.2, 0.3, 0.5], 4), vec![1, 1, 2]);
        assert_eq!(digits(5, 2, 4), vec![0, 1, 0, 1]);
    }

    #[test]
    fn empirical_measures() {
        let u = [0u8, 0, 1, 1];
        assert!((empirical_mutual_information(&u, &u, 2, 2) - 1.0).abs() < 1e-12);
        assert!((empirical_conditional_entropy(&u, &[0, 1, 0, 1], 2, 2) - 1.0).abs() < 1e-12);
        assert!(empirical_conditional_entropy(&u, &u, 2, 2).abs() < 1e-12);
    }
}
