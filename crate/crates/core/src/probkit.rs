//! Finite probability containers and the information measures built on them.
//!
//! All logarithms are base 2 and every quantity is reported in bits. The
//! conventions `0·log 0 = 0` and `0·log(0/p) = 0` hold everywhere. A
//! divergence with a support violation is `f64::INFINITY`; sums propagate it
//! and `min(x, inf) = x`, which is exactly IEEE behavior. User-facing output
//! renders it through [`fmt_bits`].

use crate::error::{Error, Result};

/// Simplex constraints hold to this tolerance after construction.
pub const SIMPLEX_TOL: f64 = 1e-12;
/// Inputs whose total is within this distance of 1 are renormalized; anything
/// further off is rejected.
pub const RENORMALIZE_TOL: f64 = 1e-9;

fn normalize(values: &mut [f64]) -> std::result::Result<(), f64> {
    let sum: f64 = values.iter().sum();
    if (sum - 1.0).abs() > RENORMALIZE_TOL {
        return Err(sum);
    }
    if sum != 1.0 {
        values.iter_mut().for_each(|v| *v /= sum);
    }
    Ok(())
}

fn check_entries(values: &[f64]) -> Result<()> {
    for (index, &value) in values.iter().enumerate() {
        if !value.is_finite() || value < 0.0 {
            return Err(Error::InvalidProbability { index, value });
        }
    }
    Ok(())
}

/// A point on a finite probability simplex.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    pub fn new(mut probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::EmptyAlphabet);
        }
        check_entries(&probs)?;
        normalize(&mut probs).map_err(|sum| Error::NotNormalized { sum })?;
        Ok(Self { probs })
    }

    pub fn uniform(size: usize) -> Self {
        assert!(size > 0, "uniform distribution needs a nonempty alphabet");
        Self {
            probs: vec![1.0 / size as f64; size],
        }
    }

    pub fn point_mass(size: usize, index: usize) -> Self {
        assert!(index < size);
        let mut probs = vec![0.0; size];
        probs[index] = 1.0;
        Self { probs }
    }

    /// Binary distribution `(1 - p, p)`.
    pub fn bernoulli(p: f64) -> Result<Self> {
        Self::new(vec![1.0 - p, p])
    }

    pub(crate) fn from_raw(probs: Vec<f64>) -> Self {
        debug_assert!((probs.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn alphabet_size(&self) -> usize {
        self.probs.len()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.probs[i]
    }

    pub fn is_uniform(&self, tol: f64) -> bool {
        let u = 1.0 / self.probs.len() as f64;
        self.probs.iter().all(|p| (p - u).abs() <= tol)
    }
}

/// A nonnegative `rows × cols` matrix summing to 1, indexed `(a, b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct JointDistribution {
    rows: usize,
    cols: usize,
    probs: Vec<f64>,
}

impl JointDistribution {
    pub fn new(matrix: Vec<Vec<f64>>) -> Result<Self> {
        let (rows, cols, probs) = flatten(matrix)?;
        Self::from_flat(rows, cols, probs)
    }

    pub fn from_flat(rows: usize, cols: usize, mut probs: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyAlphabet);
        }
        if probs.len() != rows * cols {
            return Err(Error::InvalidParameter(format!(
                "expected {} entries, got {}",
                rows * cols,
                probs.len()
            )));
        }
        check_entries(&probs)?;
        normalize(&mut probs).map_err(|sum| Error::NotNormalized { sum })?;
        Ok(Self { rows, cols, probs })
    }

    pub(crate) fn from_raw(rows: usize, cols: usize, probs: Vec<f64>) -> Self {
        Self { rows, cols, probs }
    }

    /// `P_A × P_B`.
    pub fn product(p_a: &Distribution, p_b: &Distribution) -> Self {
        let probs = p_a
            .probs
            .iter()
            .flat_map(|&x| p_b.probs.iter().map(move |&y| x * y))
            .collect();
        Self::from_raw(p_a.alphabet_size(), p_b.alphabet_size(), probs)
    }

    /// `Q_A × Q_{B|A}`: the joint distribution of an input marginal and a kernel.
    pub fn compose(q_a: &Distribution, kernel: &ConditionalDistribution) -> Result<Self> {
        if q_a.alphabet_size() != kernel.inputs() {
            return Err(Error::AlphabetMismatch {
                left: q_a.alphabet_size(),
                right: kernel.inputs(),
            });
        }
        let probs = (0..kernel.inputs())
            .flat_map(|a| kernel.row(a).iter().map(move |&v| q_a.get(a) * v))
            .collect();
        Ok(Self::from_raw(kernel.inputs(), kernel.outputs(), probs))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.probs[a * self.cols + b]
    }

    /// Row-major entries.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn row(&self, a: usize) -> &[f64] {
        &self.probs[a * self.cols..(a + 1) * self.cols]
    }

    pub fn to_matrix(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|a| self.row(a).to_vec()).collect()
    }

    /// Marginal of the row variable `A`.
    pub fn row_marginal(&self) -> Distribution {
        Distribution::from_raw((0..self.rows).map(|a| self.row(a).iter().sum()).collect())
    }

    /// Marginal of the column variable `B`.
    pub fn col_marginal(&self) -> Distribution {
        let mut m = vec![0.0; self.cols];
        for a in 0..self.rows {
            for (acc, v) in m.iter_mut().zip(self.row(a)) {
                *acc += v;
            }
        }
        Distribution::from_raw(m)
    }

    /// `P_{B|A}`. Rows of zero-probability symbols are set uniform.
    pub fn kernel_b_given_a(&self) -> ConditionalDistribution {
        let mut probs = Vec::with_capacity(self.probs.len());
        for a in 0..self.rows {
            let row = self.row(a);
            let mass: f64 = row.iter().sum();
            if mass > 0.0 {
                probs.extend(row.iter().map(|v| v / mass));
            } else {
                probs.extend(std::iter::repeat_n(1.0 / self.cols as f64, self.cols));
            }
        }
        ConditionalDistribution::from_raw(self.rows, self.cols, probs)
    }

    pub fn is_product(&self, tol: f64) -> bool {
        let pa = self.row_marginal();
        let pb = self.col_marginal();
        (0..self.rows)
            .all(|a| (0..self.cols).all(|b| (self.get(a, b) - pa.get(a) * pb.get(b)).abs() <= tol))
    }
}

/// A row-stochastic matrix indexed `(x, y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalDistribution {
    inputs: usize,
    outputs: usize,
    probs: Vec<f64>,
}

impl ConditionalDistribution {
    pub fn new(matrix: Vec<Vec<f64>>) -> Result<Self> {
        let (inputs, outputs, mut probs) = flatten(matrix)?;
        check_entries(&probs)?;
        for (row, chunk) in probs.chunks_mut(outputs).enumerate() {
            normalize(chunk).map_err(|sum| Error::RowNotNormalized { row, sum })?;
        }
        Ok(Self {
            inputs,
            outputs,
            probs,
        })
    }

    pub(crate) fn from_raw(inputs: usize, outputs: usize, probs: Vec<f64>) -> Self {
        Self {
            inputs,
            outputs,
            probs,
        }
    }

    /// Binary symmetric channel with crossover probability `eps ∈ [0, 1/2]`.
    pub fn bsc(eps: f64) -> Result<Self> {
        if !(0.0..=0.5).contains(&eps) {
            return Err(Error::InvalidParameter(format!(
                "BSC crossover {eps} outside [0, 0.5]"
            )));
        }
        Self::new(vec![vec![1.0 - eps, eps], vec![eps, 1.0 - eps]])
    }

    /// Binary erasure channel; output 2 is the erasure symbol.
    pub fn bec(erasure: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&erasure) {
            return Err(Error::InvalidParameter(format!(
                "BEC erasure probability {erasure} outside [0, 1]"
            )));
        }
        Self::new(vec![
            vec![1.0 - erasure, 0.0, erasure],
            vec![0.0, 1.0 - erasure, erasure],
        ])
    }

    /// Noiseless channel on `size` symbols.
    pub fn identity(size: usize) -> Self {
        let mut probs = vec![0.0; size * size];
        for i in 0..size {
            probs[i * size + i] = 1.0;
        }
        Self::from_raw(size, size, probs)
    }

    /// Every input maps to the same output distribution.
    pub fn constant(inputs: usize, output: &Distribution) -> Self {
        let probs = (0..inputs)
            .flat_map(|_| output.probs().iter().copied())
            .collect();
        Self::from_raw(inputs, output.alphabet_size(), probs)
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.probs[x * self.outputs + y]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.probs[x * self.outputs..(x + 1) * self.outputs]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn to_matrix(&self) -> Vec<Vec<f64>> {
        (0..self.inputs).map(|x| self.row(x).to_vec()).collect()
    }

    /// Output distribution induced by input `s`.
    pub fn output_marginal(&self, s: &Distribution) -> Distribution {
        Distribution::from_raw(output_marginal(s.probs(), &self.probs, self.outputs))
    }
}

fn flatten(matrix: Vec<Vec<f64>>) -> Result<(usize, usize, Vec<f64>)> {
    let rows = matrix.len();
    let cols = matrix.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Err(Error::EmptyAlphabet);
    }
    let mut probs = Vec::with_capacity(rows * cols);
    for (row, r) in matrix.into_iter().enumerate() {
        if r.len() != cols {
            return Err(Error::RaggedMatrix {
                row,
                len: r.len(),
                expected: cols,
            });
        }
        probs.extend(r);
    }
    Ok((rows, cols, probs))
}

// Slice-level kernels. The grid oracles call these in tight loops, so they
// work on raw row-major slices without revalidation.

#[inline]
pub(crate) fn xlog2x(p: f64) -> f64 {
    if p > 0.0 {
        p * p.log2()
    } else {
        0.0
    }
}

/// `-Σ p log2 p` of a raw slice.
pub fn entropy_of(p: &[f64]) -> f64 {
    let h = -p.iter().map(|&v| xlog2x(v)).sum::<f64>();
    h.max(0.0)
}

/// `Σ q log2(q/p)` of raw slices; infinite on a support violation.
pub fn kl_of(q: &[f64], p: &[f64]) -> f64 {
    let mut d = 0.0;
    for (&qi, &pi) in q.iter().zip(p) {
        if qi > 0.0 {
            if pi <= 0.0 {
                return f64::INFINITY;
            }
            d += qi * (qi / pi).log2();
        }
    }
    d.max(0.0)
}

pub(crate) fn output_marginal(s: &[f64], v: &[f64], outputs: usize) -> Vec<f64> {
    let mut q = vec![0.0; outputs];
    for (x, &sx) in s.iter().enumerate() {
        if sx > 0.0 {
            for (qy, &vy) in q.iter_mut().zip(&v[x * outputs..(x + 1) * outputs]) {
                *qy += sx * vy;
            }
        }
    }
    q
}

/// `I(S; V)` over raw slices.
pub(crate) fn mutual_information_of(s: &[f64], v: &[f64], outputs: usize) -> f64 {
    let q = output_marginal(s, v, outputs);
    let mut i = 0.0;
    for (x, &sx) in s.iter().enumerate() {
        if sx > 0.0 {
            let row = &v[x * outputs..(x + 1) * outputs];
            for (y, &vy) in row.iter().enumerate() {
                if vy > 0.0 {
                    i += sx * vy * (vy / q[y]).log2();
                }
            }
        }
    }
    i.max(0.0)
}

/// `D(V‖W|S)` over raw slices.
pub(crate) fn conditional_kl_of(v: &[f64], w: &[f64], s: &[f64], outputs: usize) -> f64 {
    let mut d = 0.0;
    for (x, &sx) in s.iter().enumerate() {
        if sx > 0.0 {
            let row = x * outputs..(x + 1) * outputs;
            d += sx * kl_of(&v[row.clone()], &w[row]);
        }
    }
    d
}

/// `H(A|B) = H(A,B) - H(B)` of a raw row-major joint.
pub(crate) fn conditional_entropy_of(q: &[f64], cols: usize) -> f64 {
    let h_ab = entropy_of(q);
    let mut col = vec![0.0; cols];
    for row in q.chunks(cols) {
        for (c, v) in col.iter_mut().zip(row) {
            *c += v;
        }
    }
    (h_ab - entropy_of(&col)).max(0.0)
}

/// Shannon entropy in bits.
pub fn entropy(p: &Distribution) -> f64 {
    entropy_of(p.probs())
}

/// Binary entropy function `h(p)`.
pub fn binary_entropy(p: f64) -> f64 {
    entropy_of(&[p, 1.0 - p])
}

pub fn joint_entropy(q: &JointDistribution) -> f64 {
    entropy_of(q.probs())
}

/// `H(A|B)` of a joint distribution over `(A, B)`.
pub fn conditional_entropy(q: &JointDistribution) -> f64 {
    conditional_entropy_of(q.probs(), q.cols())
}

/// `I(S; V)`: mutual information between an input law and a channel.
pub fn mutual_information(s: &Distribution, v: &ConditionalDistribution) -> Result<f64> {
    if s.alphabet_size() != v.inputs() {
        return Err(Error::AlphabetMismatch {
            left: s.alphabet_size(),
            right: v.inputs(),
        });
    }
    Ok(mutual_information_of(s.probs(), v.probs(), v.outputs()))
}

/// `D(q‖p)`; `f64::INFINITY` when `q` is not absolutely continuous w.r.t. `p`.
pub fn kl_divergence(q: &Distribution, p: &Distribution) -> Result<f64> {
    if q.alphabet_size() != p.alphabet_size() {
        return Err(Error::AlphabetMismatch {
            left: q.alphabet_size(),
            right: p.alphabet_size(),
        });
    }
    Ok(kl_of(q.probs(), p.probs()))
}

/// `D(V‖W|S) = Σ_x S(x) D(V_x‖W_x)`. Rows with `S(x) = 0` contribute nothing,
/// even when their row divergence is infinite.
pub fn conditional_kl(
    v: &ConditionalDistribution,
    w: &ConditionalDistribution,
    s: &Distribution,
) -> Result<f64> {
    if v.inputs() != w.inputs() || v.outputs() != w.outputs() {
        return Err(Error::AlphabetMismatch {
            left: v.inputs() * v.outputs(),
            right: w.inputs() * w.outputs(),
        });
    }
    if s.alphabet_size() != v.inputs() {
        return Err(Error::AlphabetMismatch {
            left: s.alphabet_size(),
            right: v.inputs(),
        });
    }
    Ok(conditional_kl_of(
        v.probs(),
        w.probs(),
        s.probs(),
        v.outputs(),
    ))
}

/// Format a value in bits with 9 significant digits; infinity prints as `inf`.
pub fn fmt_bits(x: f64) -> String {
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x.is_nan() {
        return "nan".into();
    }
    fmt_sig(x, 9)
}

/// `%.{digits}g`-style formatting.
fn fmt_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if exp < -5 || exp >= digits as i32 {
        let mantissa = trim_zeros(mantissa);
        format!(
            "{mantissa}e{}{:02}",
            if exp < 0 { '-' } else { '+' },
            exp.abs()
        )
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent oracle: textbook sums written out longhand.
    fn h2(p: f64) -> f64 {
        -(p * p.log2() + (1.0 - p) * (1.0 - p).log2())
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy(&Distribution::new(vec![0.5, 0.5]).unwrap()), 1.0);
        assert_eq!(entropy(&Distribution::new(vec![1.0, 0.0]).unwrap()), 0.0);
        let h = entropy(&Distribution::new(vec![0.025, 0.975]).unwrap());
        assert!((h - 0.168_660_931_496_670_3).abs() < 1e-12, "{h}");
        assert!((h - h2(0.025)).abs() < 1e-15);
    }

    #[test]
    fn conditional_entropy_examples() {
        let fair = JointDistribution::new(vec![vec![0.25, 0.25], vec![0.25, 0.25]]).unwrap();
        assert!((conditional_entropy(&fair) - 1.0).abs() < 1e-15);
        let det = JointDistribution::new(vec![vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap();
        assert_eq!(conditional_entropy(&det), 0.0);
        let ex = JointDistribution::new(vec![vec![0.5, 0.0], vec![0.05, 0.45]]).unwrap();
        // Column b=0 holds (0.5, 0.05), column b=1 holds (0, 0.45).
        let oracle = 0.55 * h2(0.5 / 0.55);
        let h = conditional_entropy(&ex);
        assert!((h - oracle).abs() < 1e-14);
        assert!((h - 0.241_723_342_806_832_4).abs() < 1e-12);
    }

    #[test]
    fn mutual_information_examples() {
        let s = Distribution::uniform(2);
        let constant =
            ConditionalDistribution::constant(2, &Distribution::new(vec![0.3, 0.7]).unwrap());
        assert_eq!(mutual_information(&s, &constant).unwrap(), 0.0);
        let id = ConditionalDistribution::identity(2);
        assert!((mutual_information(&s, &id).unwrap() - 1.0).abs() < 1e-15);
        let bsc = ConditionalDistribution::bsc(0.025).unwrap();
        let i = mutual_information(&s, &bsc).unwrap();
        assert!((i - (1.0 - h2(0.025))).abs() < 1e-14);
        assert!((i - 0.831_339_068_503_329_7).abs() < 1e-12);
    }

    #[test]
    fn kl_examples() {
        let q = Distribution::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(kl_divergence(&q, &q).unwrap(), 0.0);
        let p = Distribution::new(vec![0.25, 0.75]).unwrap();
        let oracle = 0.5 * (0.5f64 / 0.25).log2() + 0.5 * (0.5f64 / 0.75).log2();
        let d = kl_divergence(&q, &p).unwrap();
        assert!((d - oracle).abs() < 1e-15);
        assert!((d - 0.207_518_749_639_422).abs() < 1e-12);
        let degenerate = Distribution::new(vec![1.0, 0.0]).unwrap();
        assert_eq!(kl_divergence(&q, &degenerate).unwrap(), f64::INFINITY);
        assert!(kl_divergence(&q, &Distribution::uniform(3)).is_err());
    }

    #[test]
    fn conditional_kl_examples() {
        let w = ConditionalDistribution::bsc(0.025).unwrap();
        let s = Distribution::uniform(2);
        assert_eq!(conditional_kl(&w, &w, &s).unwrap(), 0.0);

        let v = ConditionalDistribution::new(vec![vec![0.975, 0.025], vec![0.0, 1.0]]).unwrap();
        let ignore_row_1 = Distribution::new(vec![1.0, 0.0]).unwrap();
        assert_eq!(conditional_kl(&v, &w, &ignore_row_1).unwrap(), 0.0);

        let v = ConditionalDistribution::bsc(0.1).unwrap();
        let oracle = 0.1 * (0.1f64 / 0.025).log2() + 0.9 * (0.9f64 / 0.975).log2();
        let d = conditional_kl(&v, &w, &s).unwrap();
        assert!((d - oracle).abs() < 1e-15);
        assert!((d - 0.096_070_504_322_057_7).abs() < 1e-12, "{d}");

        // An infinite row that carries weight is infinite overall.
        let z = ConditionalDistribution::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(conditional_kl(&w, &z, &s).unwrap(), f64::INFINITY);
        assert!(conditional_kl(&w, &ConditionalDistribution::identity(3), &s).is_err());
    }

    #[test]
    fn constructors_renormalize_or_reject() {
        let d = Distribution::new(vec![0.5, 0.5 + 5e-10]).unwrap();
        assert!((d.probs().iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOL);
        assert!(matches!(
            Distribution::new(vec![0.5, 0.499]),
            Err(Error::NotNormalized { .. })
        ));
        assert!(matches!(
            Distribution::new(vec![1.5, -0.5]),
            Err(Error::InvalidProbability { index: 1, .. })
        ));
        assert!(matches!(
            Distribution::new(vec![]),
            Err(Error::EmptyAlphabet)
        ));
        assert!(matches!(
            ConditionalDistribution::new(vec![vec![0.5, 0.5], vec![0.3, 0.699]]),
            Err(Error::RowNotNormalized { row: 1, .. })
        ));
        assert!(matches!(
            JointDistribution::new(vec![vec![0.5, 0.5], vec![0.0]]),
            Err(Error::RaggedMatrix { row: 1, .. })
        ));
        assert!(ConditionalDistribution::bsc(0.6).is_err());
        assert!(ConditionalDistribution::bec(1.2).is_err());
    }

    #[test]
    fn marginals_and_kernels() {
        let p = JointDistribution::new(vec![vec![0.5, 0.0], vec![0.05, 0.45]]).unwrap();
        assert_eq!(p.row_marginal().probs(), &[0.5, 0.5]);
        let pb = p.col_marginal();
        assert!((pb.get(0) - 0.55).abs() < 1e-15);
        let k = p.kernel_b_given_a();
        assert_eq!(k.row(0), &[1.0, 0.0]);
        let back = JointDistribution::compose(&p.row_marginal(), &k).unwrap();
        for (x, y) in back.probs().iter().zip(p.probs()) {
            assert!((x - y).abs() < 1e-15);
        }
        let prod = JointDistribution::product(&Distribution::uniform(2), &pb);
        assert!(prod.is_product(1e-15));
        assert!(!p.is_product(1e-3));
    }

    #[test]
    fn formatting() {
        assert_eq!(fmt_bits(f64::INFINITY), "inf");
        assert_eq!(fmt_bits(0.0), "0");
        assert_eq!(fmt_bits(1.0), "1");
        assert_eq!(fmt_bits(0.831_339_068_503_329_7), "0.831339069");
        assert_eq!(fmt_bits(0.001), "0.001");
        assert_eq!(fmt_bits(1.234_567_891_23e-7), "1.23456789e-07");
        assert_eq!(fmt_bits(123.456), "123.456");
    }
}
