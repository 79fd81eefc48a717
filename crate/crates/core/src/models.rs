//! 1-dependent summands built as functionals of an independent Bernoulli chain.
//!
//! Every model is a chain `η₁, η₂, …` of independent Bernoulli variables and a
//! list of summands `X_k = f(η over window_k)`. Windows are monotone and the
//! windows of `X_k` and `X_{k+2}` never share an η, which makes the sequence
//! 1-dependent by construction and lets every joint law be computed exactly.
//!
//! Summand indices in the public API are 1-based. Indices `k ≤ 0` (and
//! `k > n`) denote the constant summand 0.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::measures::SignedMeasure;
use crate::scalar::{CompensatedSum, Real};

/// Longest η-window a single summand may read.
pub const MAX_WINDOW: usize = 20;
/// Maximum number of η variables enumerated by [`brute_force_sum`].
pub const MAX_BRUTE_FORCE_ETAS: usize = 24;
/// Default cap on `(history states) × (sum support)` entries in the DP.
pub const DEFAULT_DP_BUDGET: usize = 100_000_000;

type KernelFn = dyn Fn(&[bool]) -> u32 + Send + Sync;

/// Map from the η-values of a window to a nonnegative integer summand.
#[derive(Clone)]
pub enum Kernel {
    /// `X = η` on a window of length one.
    Identity,
    /// `X = ∏ η` over the window.
    AllOnes,
    /// Indicator that the window equals the given pattern exactly.
    Pattern(Vec<bool>),
    /// Sum of `inner` over every length-`y_window` sub-window: groups
    /// consecutive m-dependent summands into one block.
    BlockSum {
        y_window: usize,
        inner: Box<Kernel>,
    },
    Custom(Arc<KernelFn>),
}

impl Kernel {
    pub fn eval(&self, bits: &[bool]) -> u32 {
        match self {
            Kernel::Identity => bits.first().copied().unwrap_or(false) as u32,
            Kernel::AllOnes => bits.iter().all(|&b| b) as u32,
            Kernel::Pattern(pattern) => (bits == pattern.as_slice()) as u32,
            Kernel::BlockSum { y_window, inner } => {
                if bits.len() < *y_window {
                    0
                } else {
                    bits.windows(*y_window).map(|w| inner.eval(w)).sum()
                }
            }
            Kernel::Custom(f) => f(bits),
        }
    }

    /// `(k₁, k₂)`-event indicator: `k₁` failures followed by `k₂` successes.
    pub fn k1k2_event(k1: usize, k2: usize) -> Self {
        let mut pattern = vec![false; k1];
        pattern.extend(std::iter::repeat_n(true, k2));
        Kernel::Pattern(pattern)
    }
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kernel::Identity => f.write_str("Identity"),
            Kernel::AllOnes => f.write_str("AllOnes"),
            Kernel::Pattern(p) => {
                let s: String = p.iter().map(|&b| if b { '1' } else { '0' }).collect();
                write!(f, "Pattern({s})")
            }
            Kernel::BlockSum { y_window, inner } => f
                .debug_struct("BlockSum")
                .field("y_window", y_window)
                .field("inner", inner)
                .finish(),
            Kernel::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// Sequence `X₁..X_n` of 1-dependent summands over an independent Bernoulli chain.
#[derive(Debug, Clone)]
pub struct OneDependentModel<T> {
    eta_probs: Vec<T>,
    windows: Vec<Range<usize>>,
    kernel: Kernel,
    c0_bound: u32,
}

impl<T: Real> OneDependentModel<T> {
    /// Builds a model from η success probabilities and 0-based η windows.
    ///
    /// `c0_bound` is the maximum of the kernel over all windows, computed by
    /// enumeration.
    pub fn new(eta_probs: Vec<T>, windows: Vec<Range<usize>>, kernel: Kernel) -> Result<Self> {
        if windows.is_empty() {
            return Err(Error::domain("n", "model needs at least one summand"));
        }
        for (i, &p) in eta_probs.iter().enumerate() {
            if !(p >= T::zero() && p <= T::one()) {
                return Err(Error::domain(
                    "p",
                    format!("η{} probability {p} not in [0, 1]", i + 1),
                ));
            }
        }
        for (k, w) in windows.iter().enumerate() {
            if w.start >= w.end || w.end > eta_probs.len() {
                return Err(Error::domain(
                    "window",
                    format!("summand {} has window {w:?}", k + 1),
                ));
            }
            if w.len() > MAX_WINDOW {
                return Err(Error::Resource(format!(
                    "summand {} reads {} η-values (max {MAX_WINDOW})",
                    k + 1,
                    w.len()
                )));
            }
        }
        for pair in windows.windows(2) {
            if pair[1].start < pair[0].start || pair[1].end < pair[0].end {
                return Err(Error::domain("window", "windows must be monotone"));
            }
        }
        for triple in windows.windows(3) {
            if triple[2].start < triple[0].end {
                return Err(Error::domain(
                    "window",
                    "windows of X_k and X_{k+2} overlap; sequence is not 1-dependent",
                ));
            }
        }
        let c0_bound = windows
            .iter()
            .map(|w| w.len())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .map(|len| max_kernel_value(&kernel, len))
            .max()
            .unwrap_or(0);
        Ok(Self {
            eta_probs,
            windows,
            kernel,
            c0_bound,
        })
    }

    /// Number of summands `n`.
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn eta_probs(&self) -> &[T] {
        &self.eta_probs
    }

    /// 0-based η window of the 1-based summand `k`.
    pub fn window(&self, k: usize) -> Range<usize> {
        self.windows[k - 1].clone()
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    /// Structural bound `C₀` with `0 ≤ X_k ≤ C₀`.
    pub fn c0_bound(&self) -> u32 {
        self.c0_bound
    }

    fn in_range(&self, k: i64) -> bool {
        k >= 1 && k as usize <= self.len()
    }

    /// Exact joint law of `(X_{k₁}, …, X_{k_r})` (1-based; out-of-range
    /// coordinates are the constant 0), as sorted `(outcome, probability)` atoms.
    pub fn joint_pmf(&self, indices: &[i64]) -> Vec<(Vec<u32>, T)> {
        let mut etas: Vec<usize> = indices
            .iter()
            .filter(|&&k| self.in_range(k))
            .flat_map(|&k| self.windows[k as usize - 1].clone())
            .collect();
        etas.sort_unstable();
        etas.dedup();
        assert!(
            etas.len() <= MAX_BRUTE_FORCE_ETAS,
            "joint law over {} η-values",
            etas.len()
        );

        let mut bits = vec![false; self.eta_probs.len()];
        let mut acc: BTreeMap<Vec<u32>, T> = BTreeMap::new();
        for assignment in 0u64..(1u64 << etas.len()) {
            let mut prob = T::one();
            for (i, &e) in etas.iter().enumerate() {
                let b = (assignment >> i) & 1 == 1;
                bits[e] = b;
                prob *= if b {
                    self.eta_probs[e]
                } else {
                    T::one() - self.eta_probs[e]
                };
            }
            if prob.is_zero() {
                continue;
            }
            let outcome: Vec<u32> = indices
                .iter()
                .map(|&k| {
                    if self.in_range(k) {
                        let w = self.windows[k as usize - 1].clone();
                        self.kernel.eval(&bits[w])
                    } else {
                        0
                    }
                })
                .collect();
            *acc.entry(outcome).or_insert_with(T::zero) += prob;
        }
        acc.into_iter().collect()
    }

    /// Law of `X_k` as a probability vector on `0..=C₀`.
    pub fn marginal(&self, k: i64) -> Vec<T> {
        let mut pmf = vec![T::zero(); self.c0_bound as usize + 1];
        for (x, p) in self.joint_pmf(&[k]) {
            pmf[x[0] as usize] += p;
        }
        pmf
    }

    /// Exact joint law of `(X_{k−2}, X_{k−1}, X_k)`.
    pub fn joint_triple_pmf(&self, k: i64) -> TripleLaw<T> {
        let atoms = self
            .joint_pmf(&[k - 2, k - 1, k])
            .into_iter()
            .map(|(x, p)| ([x[0], x[1], x[2]], p))
            .collect();
        TripleLaw { atoms }
    }
}

fn max_kernel_value(kernel: &Kernel, len: usize) -> u32 {
    let mut bits = vec![false; len];
    (0u64..(1u64 << len))
        .map(|a| {
            for (i, b) in bits.iter_mut().enumerate() {
                *b = (a >> i) & 1 == 1;
            }
            kernel.eval(&bits)
        })
        .max()
        .unwrap_or(0)
}

/// Joint law of three consecutive summands.
#[derive(Debug, Clone, PartialEq)]
pub struct TripleLaw<T> {
    pub atoms: Vec<([u32; 3], T)>,
}

impl<T: Real> TripleLaw<T> {
    pub fn expect(&self, f: impl Fn([u32; 3]) -> T) -> T {
        crate::scalar::compensated_sum(self.atoms.iter().map(|&(x, p)| f(x) * p))
    }
}

/// m-dependent summands `Y_j` regrouped into 1-dependent blocks of `m`.
///
/// For `(k₁, k₂)`-events, `Y_j` (for `j = m..n`) indicates that
/// `η_{j−m+1}..η_j` reads `k₁` failures then `k₂` successes, and
/// `X_i = Y_{im} + … + Y_{(i+1)m−1}`; the last block may be shorter.
#[derive(Debug, Clone)]
pub struct BlockedModel<T> {
    model: OneDependentModel<T>,
    n: usize,
    k1: usize,
    k2: usize,
    p: T,
}

impl<T: Real> BlockedModel<T> {
    pub fn model(&self) -> &OneDependentModel<T> {
        &self.model
    }

    pub fn into_model(self) -> OneDependentModel<T> {
        self.model
    }

    /// Block length `m = k₁ + k₂`.
    pub fn block_len(&self) -> usize {
        self.k1 + self.k2
    }

    /// Number of m-dependent summands `Y_m..Y_n`.
    pub fn y_count(&self) -> usize {
        self.n - self.block_len() + 1
    }

    pub fn block_count(&self) -> usize {
        self.model.len()
    }

    /// `a(p) = (1−p)^{k₁} p^{k₂}`.
    pub fn a_p(&self) -> T {
        (T::one() - self.p).powi(self.k1 as i32) * self.p.powi(self.k2 as i32)
    }

    /// `λ = (n − m + 1) a(p)`.
    pub fn lambda_closed_form(&self) -> T {
        T::from_usize_lossy(self.y_count()) * self.a_p()
    }

    fn dispersion_count(&self) -> T {
        let m = T::from_usize_lossy(self.block_len());
        let y = T::from_usize_lossy(self.y_count());
        y * (m + m - T::one()) - m * (m - T::one())
    }

    /// `Γ₂ = −a²(p)/2 · [(n−m+1)(2m−1) − m(m−1)]`.
    pub fn gamma2_closed_form(&self) -> T {
        let a = self.a_p();
        -(a * a) / T::c(2.0) * self.dispersion_count()
    }

    /// `Ñ = (n−m+1)² / [(n−m+1)(2m−1) − m(m−1)]`.
    pub fn n_tilde(&self) -> T {
        let y = T::from_usize_lossy(self.y_count());
        y * y / self.dispersion_count()
    }

    /// `p̄ = (n−m+1) a(p) / ⌊Ñ⌋`.
    pub fn p_bar(&self) -> T {
        self.lambda_closed_form() / self.n_tilde().floor()
    }
}

/// Independent Bernoulli summands `X_i = ξ_i`, `P(ξ_i = 1) = p_i`.
pub fn poisson_binomial_model<T: Real>(p: &[T]) -> Result<OneDependentModel<T>> {
    if p.is_empty() {
        return Err(Error::domain(
            "p",
            "Poisson binomial needs at least one probability",
        ));
    }
    let windows = (0..p.len()).map(|i| i..i + 1).collect();
    OneDependentModel::new(p.to_vec(), windows, Kernel::Identity)
}

/// 2-runs: `X_i = η_iη_{i+1}`, `i = 1..n`, over `n + 1` Bernoulli(p) variables.
pub fn two_runs_model<T: Real>(n: usize, p: T) -> Result<OneDependentModel<T>> {
    if n == 0 {
        return Err(Error::domain("n", "2-runs needs n ≥ 1"));
    }
    if !(p > T::zero() && p < T::one()) {
        return Err(Error::domain(
            "p",
            format!("2-runs needs 0 < p < 1, got {p}"),
        ));
    }
    let windows = (0..n).map(|i| i..i + 2).collect();
    OneDependentModel::new(vec![p; n + 1], windows, Kernel::AllOnes)
}

/// Number of `(k₁, k₂)`-events in `η₁..η_n`, blocked into 1-dependent sums of
/// `m = k₁ + k₂` consecutive indicators.
pub fn k1k2_events_model<T: Real>(n: usize, k1: usize, k2: usize, p: T) -> Result<BlockedModel<T>> {
    if k1 == 0 || k2 == 0 {
        return Err(Error::domain("k1, k2", "both must be positive"));
    }
    let m = k1 + k2;
    if m > n {
        return Err(Error::domain(
            "n",
            format!("need m = k1 + k2 = {m} ≤ n = {n}"),
        ));
    }
    if !(p > T::zero() && p < T::one()) {
        return Err(Error::domain("p", format!("need 0 < p < 1, got {p}")));
    }
    // Block b (0-based) holds Y_j for 1-based j in [m(b+1), min(m(b+2) − 1, n)];
    // Y_j reads η_{j−m+1}..η_j, i.e. 0-based η indices j−m..j.
    let y_count = n - m + 1;
    let blocks = y_count.div_ceil(m);
    let windows = (0..blocks)
        .map(|b| b * m..((b + 2) * m - 1).min(n))
        .collect();
    let kernel = Kernel::BlockSum {
        y_window: m,
        inner: Box::new(Kernel::k1k2_event(k1, k2)),
    };
    let model = OneDependentModel::new(vec![p; n], windows, kernel)?;
    Ok(BlockedModel {
        model,
        n,
        k1,
        k2,
        p,
    })
}

/// Exact law of `S_n = X₁ + … + X_n`.
///
/// Dynamic program over the chain: the state is the block of η-values still
/// needed by unevaluated summands, each carrying a probability vector over
/// partial sums. Two layers alternate as η-values are appended.
pub fn exact_sum_distribution<T: Real>(model: &OneDependentModel<T>) -> Result<SignedMeasure<T>> {
    exact_sum_distribution_with_budget(model, DEFAULT_DP_BUDGET)
}

pub fn exact_sum_distribution_with_budget<T: Real>(
    model: &OneDependentModel<T>,
    budget: usize,
) -> Result<SignedMeasure<T>> {
    let windows = &model.windows;
    let mut layer: Vec<Vec<T>> = vec![vec![T::one()]];
    let mut history = 0usize;
    let mut next = 0usize;
    let mut bits = Vec::with_capacity(MAX_WINDOW);

    for (j, &q) in model.eta_probs.iter().enumerate() {
        let mut grown: Vec<Vec<T>> = vec![Vec::new(); layer.len() * 2];
        for (mask, sums) in layer.iter().enumerate() {
            if sums.is_empty() {
                continue;
            }
            for (bit, prob) in [(0usize, T::one() - q), (1, q)] {
                if prob.is_zero() {
                    continue;
                }
                add_scaled(&mut grown[(mask << 1) | bit], sums, prob, 0);
            }
        }
        history += 1;

        while next < windows.len() && windows[next].end == j + 1 {
            let w = windows[next].clone();
            for (mask, sums) in grown.iter_mut().enumerate() {
                if sums.is_empty() {
                    continue;
                }
                bits.clear();
                bits.extend(w.clone().map(|i| (mask >> (j - i)) & 1 == 1));
                let x = model.kernel.eval(&bits) as usize;
                if x > 0 {
                    sums.splice(0..0, std::iter::repeat_n(T::zero(), x));
                }
            }
            next += 1;
        }

        let needed_from = if next < windows.len() {
            windows[next].start
        } else {
            j + 1
        };
        let keep = (j + 1).saturating_sub(needed_from).min(history);
        layer = if keep < history {
            let keep_mask = (1usize << keep) - 1;
            let mut merged: Vec<Vec<T>> = vec![Vec::new(); 1 << keep];
            for (mask, sums) in grown.iter().enumerate() {
                if !sums.is_empty() {
                    add_scaled(&mut merged[mask & keep_mask], sums, T::one(), 0);
                }
            }
            history = keep;
            merged
        } else {
            grown
        };

        let mut widest = 0;
        for sums in layer.iter_mut() {
            while sums.last().is_some_and(|v| v.is_zero()) {
                sums.pop();
            }
            widest = widest.max(sums.len());
        }
        if layer.len().saturating_mul(widest) > budget {
            return Err(Error::Resource(format!(
                "DP state {} × {} exceeds budget {budget}",
                layer.len(),
                widest
            )));
        }
    }

    let mut total: Vec<T> = Vec::new();
    for sums in &layer {
        add_scaled(&mut total, sums, T::one(), 0);
    }
    Ok(SignedMeasure::new(0, total))
}

fn add_scaled<T: Real>(dst: &mut Vec<T>, src: &[T], factor: T, shift: usize) {
    if dst.len() < src.len() + shift {
        dst.resize(src.len() + shift, T::zero());
    }
    for (d, &s) in dst[shift..].iter_mut().zip(src) {
        *d += s * factor;
    }
}

/// Law of `S_n` by enumerating all `2^L` η assignments (`L ≤ 24`); reference
/// oracle for [`exact_sum_distribution`].
pub fn brute_force_sum<T: Real>(model: &OneDependentModel<T>) -> Result<SignedMeasure<T>> {
    let l = model.eta_probs.len();
    if l > MAX_BRUTE_FORCE_ETAS {
        return Err(Error::Resource(format!(
            "brute force over {l} η-values (max {MAX_BRUTE_FORCE_ETAS})"
        )));
    }
    let mut ends: Vec<Vec<usize>> = vec![Vec::new(); l];
    for (k, w) in model.windows.iter().enumerate() {
        ends[w.end - 1].push(k);
    }
    let max_sum = model.c0_bound as usize * model.len();
    // Up to 2^24 terms land in each bin, so bins are compensated.
    let mut out = vec![CompensatedSum::new(); max_sum + 1];
    let mut bits = vec![false; l];
    enumerate(model, &ends, 0, T::one(), 0, &mut bits, &mut out);
    Ok(SignedMeasure::new(
        0,
        out.iter().map(CompensatedSum::value).collect(),
    ))
}

fn enumerate<T: Real>(
    model: &OneDependentModel<T>,
    ends: &[Vec<usize>],
    depth: usize,
    prob: T,
    sum: usize,
    bits: &mut Vec<bool>,
    out: &mut [CompensatedSum<T>],
) {
    if depth == bits.len() {
        out[sum].add(prob);
        return;
    }
    let q = model.eta_probs[depth];
    for (b, pb) in [(false, T::one() - q), (true, q)] {
        bits[depth] = b;
        let s = sum
            + ends[depth]
                .iter()
                .map(|&k| model.kernel.eval(&bits[model.windows[k].clone()]) as usize)
                .sum::<usize>();
        enumerate(model, ends, depth + 1, prob * pb, s, bits, out);
    }
}
