//! Factorial moments, centered mixed moments and the summary parameters of a
//! 1-dependent sum.

use serde::Serialize;

use crate::measures::delta_tilde;
use crate::models::{OneDependentModel, TripleLaw};
use crate::scalar::{compensated_sum, CompensatedSum, Real};

/// Largest arity accepted by the centered mixed moment recursions.
pub const MAX_ARITY: usize = 4;

/// Relative slack when comparing against the regularity thresholds, so that
/// e.g. `0.1²` is not rejected against `1/100` by rounding alone.
const CONDITION_SLACK: f64 = 1e-12;

/// Finite joint law of real random vectors `(Y₁, …, Y_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointLaw<T> {
    arity: usize,
    atoms: Vec<(Vec<T>, T)>,
}

impl<T: Real> JointLaw<T> {
    /// # Panics
    /// If atoms have differing lengths or arity exceeds [`MAX_ARITY`].
    pub fn new(atoms: Vec<(Vec<T>, T)>) -> Self {
        let arity = atoms.first().map_or(0, |(v, _)| v.len());
        assert!(
            atoms.iter().all(|(v, _)| v.len() == arity),
            "atoms must share one arity"
        );
        assert!(
            (1..=MAX_ARITY).contains(&arity),
            "arity {arity} not in 1..={MAX_ARITY}"
        );
        Self { arity, atoms }
    }

    /// Law of `(f₁(X_{k−2}), f₂(X_{k−1}), f₃(X_k))`-style images of a triple,
    /// choosing and transforming coordinates through `map`.
    pub fn from_triple(triple: &TripleLaw<T>, map: impl Fn([u32; 3]) -> Vec<T>) -> Self {
        Self::new(triple.atoms.iter().map(|&(x, p)| (map(x), p)).collect())
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    /// `E Y_a ⋯ Y_{b−1}` for the 0-based coordinate range `a..b`.
    pub fn product_moment(&self, range: std::ops::Range<usize>) -> T {
        compensated_sum(
            self.atoms
                .iter()
                .map(|(v, p)| v[range.clone()].iter().fold(*p, |acc, &y| acc * y)),
        )
    }
}

fn mixed_recursion<T: Real>(law: &JointLaw<T>, sign: T) -> T {
    let k = law.arity();
    let mut prefix = Vec::with_capacity(k);
    for i in 1..=k {
        let mut acc = CompensatedSum::new();
        acc.add(law.product_moment(0..i));
        for (j, &e) in prefix.iter().enumerate() {
            acc.add(sign * e * law.product_moment(j + 1..i));
        }
        prefix.push(acc.value());
    }
    prefix[k - 1]
}

/// Centered mixed moment `Ê(Y₁,…,Y_k) = E Y₁⋯Y_k − Σ_{j<k} Ê(Y₁,…,Y_j) E Y_{j+1}⋯Y_k`,
/// with `Ê(Y₁) = E Y₁`.
pub fn centered_mixed_e<T: Real>(law: &JointLaw<T>) -> T {
    mixed_recursion(law, -T::one())
}

/// `Ê⁺`, the same recursion with every sign positive.
pub fn e_plus<T: Real>(law: &JointLaw<T>) -> T {
    mixed_recursion(law, T::one())
}

fn falling<T: Real>(x: u32, order: u32) -> T {
    (0..order).fold(T::one(), |acc, i| {
        acc * (T::from_usize_lossy(x as usize) - T::from_usize_lossy(i as usize))
    })
}

fn int<T: Real>(x: u32) -> T {
    T::from_usize_lossy(x as usize)
}

/// `Ê₂⁺(X_{k−1},X_k) = Ê(X_{k−1}(X_{k−1}−1), X_k) + Ê(X_{k−1}, X_k(X_k−1))`,
/// evaluated on the last two coordinates of a triple.
pub fn e_plus_2<T: Real>(triple: &TripleLaw<T>) -> T {
    let first = JointLaw::from_triple(triple, |x| vec![falling(x[1], 2), int(x[2])]);
    let second = JointLaw::from_triple(triple, |x| vec![int(x[1]), falling(x[2], 2)]);
    centered_mixed_e(&first) + centered_mixed_e(&second)
}

/// `Ê₂(X_{k−2},X_{k−1},X_k) = Ê(X_{k−2}(X_{k−2}−1), X_{k−1}, X_k) + Ê(X_{k−2}, X_{k−1}(X_{k−1}−1), X_k)`.
pub fn e_2_triple<T: Real>(triple: &TripleLaw<T>) -> T {
    let first = JointLaw::from_triple(triple, |x| vec![falling(x[0], 2), int(x[1]), int(x[2])]);
    let second = JointLaw::from_triple(triple, |x| vec![int(x[0]), falling(x[1], 2), int(x[2])]);
    centered_mixed_e(&first) + centered_mixed_e(&second)
}

/// `ν_j(k) = E X_k(X_k−1)⋯(X_k−j+1)`; zero for `k ≤ 0` or `k > n`.
pub fn factorial_moment<T: Real>(model: &OneDependentModel<T>, k: i64, order: u32) -> T {
    if k < 1 || k as usize > model.len() {
        return T::zero();
    }
    compensated_sum(
        model
            .marginal(k)
            .into_iter()
            .enumerate()
            .map(|(x, p)| falling::<T>(x as u32, order) * p),
    )
}

/// Outcome of one regularity clause; `first_violation` is the 1-based
/// summand index where a per-summand clause first fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ClauseCheck {
    pub pass: bool,
    pub first_violation: Option<usize>,
}

impl ClauseCheck {
    fn global(pass: bool) -> Self {
        Self {
            pass,
            first_violation: None,
        }
    }
}

/// The six regularity clauses under which the error bounds hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ConditionFlags {
    /// `ν₁(k) ≤ 1/100` for all k.
    pub nu1_small: ClauseCheck,
    /// `ν₂(k) ≤ ν₁(k)` for all k.
    pub nu2_le_nu1: ClauseCheck,
    /// `|X_k| ≤ C₀` for all k.
    pub bounded_by_c0: ClauseCheck,
    /// `λ ≥ 1`.
    pub lambda_at_least_one: ClauseCheck,
    /// `Σ ν₂(k) ≤ λ/20`.
    pub sum_nu2_small: ClauseCheck,
    /// `Σ |Cov(X_{k−1}, X_k)| ≤ λ/20`.
    pub cov_sum_small: ClauseCheck,
}

impl ConditionFlags {
    pub fn all_pass(&self) -> bool {
        [
            self.nu1_small,
            self.nu2_le_nu1,
            self.bounded_by_c0,
            self.lambda_at_least_one,
            self.sum_nu2_small,
            self.cov_sum_small,
        ]
        .iter()
        .all(|c| c.pass)
    }
}

fn at_most<T: Real>(value: T, bound: T) -> bool {
    value <= bound + bound.abs() * T::c(CONDITION_SLACK)
}

/// Everything the error bounds need from a model, computed exactly.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentSummary<T> {
    pub n: usize,
    pub lambda: T,
    pub variance: T,
    pub gamma2: T,
    /// `⌊−2Γ₂⌋`.
    pub shift: i64,
    pub delta_tilde: T,
    /// `[ν₁(k), ν₂(k), ν₃(k)]` for `k = 1..=n`.
    pub nu: Vec<[T; 3]>,
    /// `Σ_{k=2}^n |Cov(X_{k−1}, X_k)|`.
    pub cov_sum: T,
    pub r0: T,
    pub r1: T,
    pub c0_bound: u32,
    pub conditions: ConditionFlags,
}

impl<T: Real> MomentSummary<T> {
    pub fn compute(model: &OneDependentModel<T>) -> Self {
        let n = model.len();
        let mut nu: Vec<[T; 3]> = Vec::with_capacity(n);
        let mut lambda = CompensatedSum::new();
        let mut variance = CompensatedSum::new();
        let mut cov_sum = CompensatedSum::new();
        let mut r0 = CompensatedSum::new();
        let mut r1 = CompensatedSum::new();
        let mut sum_nu2 = CompensatedSum::new();
        let mut nu1_violation = None;
        let mut nu2_violation = None;
        let mut c0_violation = None;
        let hundredth = T::c(0.01);

        for k in 1..=n {
            let triple = model.joint_triple_pmf(k as i64);
            let moments: [T; 3] = [1, 2, 3].map(|j| triple.expect(|x| falling(x[2], j)));
            let [nu1, nu2, nu3] = moments;
            let nu1_prev = if k >= 2 { nu[k - 2][0] } else { T::zero() };
            let nu1_prev2 = if k >= 3 { nu[k - 3][0] } else { T::zero() };
            nu.push(moments);

            let cross = triple.expect(|x| int::<T>(x[1]) * int(x[2]));
            let cov = cross - nu1_prev * nu1;

            lambda.add(nu1);
            variance.add(nu2 + nu1 - nu1 * nu1);
            if k >= 2 {
                variance.add(cov + cov);
                cov_sum.add(cov.abs());
            }
            sum_nu2.add(nu2);

            r0.add(nu2 + nu1 * nu1 + cross);

            let ep3 = e_plus(&JointLaw::from_triple(&triple, |x| {
                vec![int(x[0]), int(x[1]), int(x[2])]
            }));
            let terms = [
                nu1 * nu1 * nu1,
                nu1 * nu2,
                nu3,
                (nu1_prev2 + nu1_prev + nu1) * cross,
                e_plus_2(&triple),
                ep3,
            ];
            for t in terms {
                r1.add(t);
            }

            if nu1_violation.is_none() && !at_most(nu1, hundredth) {
                nu1_violation = Some(k);
            }
            if nu2_violation.is_none() && !at_most(nu2, nu1) {
                nu2_violation = Some(k);
            }
            if c0_violation.is_none() && triple.atoms.iter().any(|(x, _)| x[2] > model.c0_bound()) {
                c0_violation = Some(k);
            }
        }

        let lambda = lambda.value();
        let variance = variance.value();
        let gamma2 = (variance - lambda) / T::c(2.0);
        let (shift, delta) = delta_tilde(gamma2);
        let cov_sum = cov_sum.value();
        let twentieth = lambda / T::c(20.0);
        let per_k = |v: Option<usize>| ClauseCheck {
            pass: v.is_none(),
            first_violation: v,
        };
        let conditions = ConditionFlags {
            nu1_small: per_k(nu1_violation),
            nu2_le_nu1: per_k(nu2_violation),
            bounded_by_c0: per_k(c0_violation),
            lambda_at_least_one: ClauseCheck::global(at_most(T::one(), lambda)),
            sum_nu2_small: ClauseCheck::global(at_most(sum_nu2.value(), twentieth)),
            cov_sum_small: ClauseCheck::global(at_most(cov_sum, twentieth)),
        };

        Self {
            n,
            lambda,
            variance,
            gamma2,
            shift,
            delta_tilde: delta,
            nu,
            cov_sum,
            r0: r0.value(),
            r1: r1.value(),
            c0_bound: model.c0_bound(),
            conditions,
        }
    }

    /// `ν_j(k)` from the table, with the out-of-range convention.
    pub fn nu(&self, k: i64, order: usize) -> T {
        if k < 1 || k as usize > self.n || !(1..=3).contains(&order) {
            T::zero()
        } else {
            self.nu[k as usize - 1][order - 1]
        }
    }
}

/// `(R₀, R₁)` for a model.
pub fn remainders<T: Real>(model: &OneDependentModel<T>) -> (T, T) {
    let s = MomentSummary::compute(model);
    (s.r0, s.r1)
}

pub fn check_conditions<T: Real>(model: &OneDependentModel<T>) -> ConditionFlags {
    MomentSummary::compute(model).conditions
}
