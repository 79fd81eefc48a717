//! Discrepancies between a law and its approximation.
//!
//! All four functionals act on the difference of two finitely supported
//! measures and scan the union of their supports. Cdfs are accumulated with
//! compensated summation before subtracting, which keeps every metric exactly
//! symmetric in its arguments.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::SignedMeasure;
use crate::scalar::{CompensatedSum, Real};

/// Mass mismatch tolerated before the Wasserstein sum is declared divergent.
pub const MASS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiscrepancyResult<T> {
    pub value: T,
    /// Maximising integer for sup-type metrics.
    pub argmax_x: Option<i64>,
    /// Residual not covered by the scanned range: the cdf difference beyond
    /// the last support point, i.e. the total mass mismatch.
    pub truncation_error_bound: T,
}

/// Weight applied to each point before taking the supremum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weighting<T> {
    /// `1 + (x − λ)²/λ`.
    NonUniform { lambda: T },
    /// Constant 1, giving the classical Kolmogorov and local distances.
    Uniform,
}

impl<T: Real> Weighting<T> {
    pub fn at(&self, x: i64) -> T {
        match *self {
            Weighting::NonUniform { lambda } => {
                let d = T::from_i64_lossy(x) - lambda;
                T::one() + d * d / lambda
            }
            Weighting::Uniform => T::one(),
        }
    }
}

fn scan_range<T: Real>(f: &SignedMeasure<T>, a: &SignedMeasure<T>) -> (i64, i64) {
    let (lf, hf) = f.support();
    let (la, ha) = a.support();
    (lf.min(la), hf.max(ha))
}

/// Paired cdf values `(F(x), A(x))` for `x` in `from..=to`.
fn paired_cdfs<'a, T: Real>(
    f: &'a SignedMeasure<T>,
    a: &'a SignedMeasure<T>,
    from: i64,
    to: i64,
) -> impl Iterator<Item = (i64, T, T)> + 'a {
    let mut cf = CompensatedSum::new();
    let mut ca = CompensatedSum::new();
    (from..=to).map(move |x| {
        cf.add(f.mass_at(x));
        ca.add(a.mass_at(x));
        (x, cf.value(), ca.value())
    })
}

fn mass_gap<T: Real>(f: &SignedMeasure<T>, a: &SignedMeasure<T>) -> T {
    (f.total_mass() - a.total_mass()).abs()
}

fn sup_of<T: Real>(values: impl Iterator<Item = (i64, T)>) -> (T, Option<i64>) {
    let mut best = T::zero();
    let mut arg = None;
    for (x, v) in values {
        if arg.is_none() || v > best {
            best = v;
            arg = Some(x);
        }
    }
    (best, arg)
}

/// `sup_x w(x)·|F(x) − A(x)|` over the support union plus one sentinel point
/// on each side.
///
/// Past the last support point the cdf difference is the constant mass
/// mismatch. If that exceeds [`MASS_TOL`] under non-uniform weighting the
/// supremum is unbounded and reported as infinite.
pub fn kolmogorov<T: Real>(
    f: &SignedMeasure<T>,
    a: &SignedMeasure<T>,
    weighting: Weighting<T>,
) -> DiscrepancyResult<T> {
    let (lo, hi) = scan_range(f, a);
    let gap = mass_gap(f, a);
    let (mut value, mut argmax) = sup_of(
        paired_cdfs(f, a, lo - 1, hi + 1).map(|(x, fx, ax)| (x, weighting.at(x) * (fx - ax).abs())),
    );
    if matches!(weighting, Weighting::NonUniform { .. }) && gap > T::c(MASS_TOL) {
        value = T::infinity();
        argmax = None;
    }
    DiscrepancyResult {
        value,
        argmax_x: argmax,
        truncation_error_bound: gap,
    }
}

/// `sup_x (1 + (x − λ)²/λ)·|F(x) − A(x)|`.
pub fn nonuniform_kolmogorov<T: Real>(
    f: &SignedMeasure<T>,
    a: &SignedMeasure<T>,
    lambda: T,
) -> DiscrepancyResult<T> {
    kolmogorov(f, a, Weighting::NonUniform { lambda })
}

/// `sup_x w(x)·|F{x} − A{x}|`.
pub fn local<T: Real>(
    f: &SignedMeasure<T>,
    a: &SignedMeasure<T>,
    weighting: Weighting<T>,
) -> DiscrepancyResult<T> {
    let (lo, hi) = scan_range(f, a);
    let (value, argmax) = sup_of(
        (lo - 1..=hi + 1).map(|x| (x, weighting.at(x) * (f.mass_at(x) - a.mass_at(x)).abs())),
    );
    DiscrepancyResult {
        value,
        argmax_x: argmax,
        truncation_error_bound: T::zero(),
    }
}

/// `sup_x (1 + (x − λ)²/λ)·|F{x} − A{x}|`.
pub fn nonuniform_local<T: Real>(
    f: &SignedMeasure<T>,
    a: &SignedMeasure<T>,
    lambda: T,
) -> DiscrepancyResult<T> {
    local(f, a, Weighting::NonUniform { lambda })
}

/// The norm `Σ_x |F{x} − A{x}|` (twice the total variation distance for
/// probability laws).
pub fn total_variation<T: Real>(
    f: &SignedMeasure<T>,
    a: &SignedMeasure<T>,
) -> DiscrepancyResult<T> {
    let (lo, hi) = scan_range(f, a);
    let value = (lo..=hi)
        .map(|x| (f.mass_at(x) - a.mass_at(x)).abs())
        .collect::<CompensatedSum<T>>()
        .value();
    DiscrepancyResult {
        value,
        argmax_x: None,
        truncation_error_bound: T::zero(),
    }
}

/// The Wasserstein norm `Σ_x |F(x) − A(x)|`.
///
/// Requires equal total masses (within [`MASS_TOL`]); otherwise the sum over
/// all integers diverges.
pub fn wasserstein_norm<T: Real>(
    f: &SignedMeasure<T>,
    a: &SignedMeasure<T>,
) -> Result<DiscrepancyResult<T>> {
    let (mf, ma) = (f.total_mass(), a.total_mass());
    let gap = (mf - ma).abs();
    if gap > T::c(MASS_TOL) {
        return Err(Error::MassMismatch {
            left: mf.to_f64_lossy(),
            right: ma.to_f64_lossy(),
        });
    }
    let (lo, hi) = scan_range(f, a);
    let value = paired_cdfs(f, a, lo, hi)
        .map(|(_, fx, ax)| (fx - ax).abs())
        .collect::<CompensatedSum<T>>()
        .value();
    Ok(DiscrepancyResult {
        value,
        argmax_x: None,
        truncation_error_bound: gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{poisson, FamilyParams};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    type M = SignedMeasure<f64>;
    type MetricFn<'a> = dyn Fn(&M, &M) -> f64 + 'a;

    #[test]
    fn identical_inputs_give_zero() {
        let m = M::new(0, vec![0.2, 0.5, 0.3]);
        assert_eq!(nonuniform_kolmogorov(&m, &m, 1.5).value, 0.0);
        assert_eq!(nonuniform_local(&m, &m, 1.5).value, 0.0);
        assert_eq!(total_variation(&m, &m).value, 0.0);
        assert_eq!(wasserstein_norm(&m, &m).unwrap().value, 0.0);
    }

    #[test]
    fn two_point_masses() {
        let (d0, d1) = (M::dirac(0), M::dirac(1));
        let k = nonuniform_kolmogorov(&d0, &d1, 1.0);
        assert_eq!(k.value, 2.0);
        assert_eq!(k.argmax_x, Some(0));
        let l = nonuniform_local(&d0, &d1, 1.0);
        assert_eq!(l.value, 2.0);
        assert_eq!(l.argmax_x, Some(0));
        assert_eq!(total_variation(&d0, &d1).value, 2.0);
        assert_eq!(wasserstein_norm(&d0, &d1).unwrap().value, 1.0);
    }

    #[test]
    fn wasserstein_rejects_mass_mismatch() {
        let a = M::new(0, vec![0.5, 0.5]);
        let b = M::new(0, vec![0.5]);
        assert!(matches!(
            wasserstein_norm(&a, &b),
            Err(Error::MassMismatch { .. })
        ));
        assert!(nonuniform_kolmogorov(&a, &b, 1.0).value.is_infinite());
        assert_eq!(kolmogorov(&a, &b, Weighting::Uniform).value, 0.5);
    }

    #[test]
    fn total_variation_summation_order() {
        let a = poisson(&FamilyParams::<f64>::new(1.0, 0.0)).unwrap();
        let b = poisson(&FamilyParams::<f64>::new(1.1, 0.0)).unwrap();
        let forward = total_variation(&a, &b).value;
        let hi = a.support().1.max(b.support().1);
        let backward: f64 = (0..=hi)
            .rev()
            .map(|x| (a.mass_at(x) - b.mass_at(x)).abs())
            .sum();
        assert_abs_diff_eq!(forward, backward, epsilon = 1e-14);
    }

    #[test]
    fn negative_support_is_scanned() {
        let a = M::dirac(-2);
        let b = M::dirac(1);
        assert_eq!(wasserstein_norm(&a, &b).unwrap().value, 3.0);
        assert_eq!(kolmogorov(&a, &b, Weighting::Uniform).argmax_x, Some(-2));
    }

    fn probability() -> impl Strategy<Value = M> {
        (-2i64..3, prop::collection::vec(0.0f64..1.0, 1..6)).prop_filter_map(
            "positive mass",
            |(o, w)| {
                let s: f64 = w.iter().sum();
                (s > 1e-3).then(|| M::new(o, w.iter().map(|x: &f64| x / s).collect()))
            },
        )
    }

    proptest! {
        #[test]
        fn metric_axioms(a in probability(), b in probability(), c in probability(), lambda in 0.5f64..5.0) {
            let tol = 1e-12;
            let metrics: [&MetricFn; 4] = [
                &|x, y| nonuniform_kolmogorov(x, y, lambda).value,
                &|x, y| nonuniform_local(x, y, lambda).value,
                &|x, y| total_variation(x, y).value,
                &|x, y| wasserstein_norm(x, y).unwrap().value,
            ];
            for d in metrics {
                prop_assert_eq!(d(&a, &b), d(&b, &a));
                prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + tol);
            }
            let plain = kolmogorov(&a, &b, Weighting::Uniform).value;
            prop_assert!(wasserstein_norm(&a, &b).unwrap().value + tol >= plain);
            prop_assert!(total_variation(&a, &b).value + tol >= 2.0 * plain);
        }
    }
}
