//! Signed measures on the integers and the approximating families.

mod families;
mod inversion;

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex;

use crate::scalar::{compensated_sum, CompensatedSum, Real};

pub use families::{
    binomial_approx, compound_poisson_g, delta_tilde, negative_binomial, poisson,
    poisson_second_order, second_order_correction, translated_poisson, ApproximationFamily,
    BinomialParams, FamilyParams, NegativeBinomialParams, DEFAULT_TRUNCATION_EPS,
};
pub use inversion::{invert_cf, invert_cf_shifted};

/// Finitely supported signed measure on the integers.
///
/// `weights[i]` is the mass at `offset + i`. Leading and trailing exact zeros
/// are trimmed on construction; the zero measure is stored as a single zero
/// weight at offset 0.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedMeasure<T> {
    offset: i64,
    weights: Vec<T>,
}

impl<T: Real> SignedMeasure<T> {
    pub fn new(offset: i64, weights: Vec<T>) -> Self {
        let first = weights.iter().position(|w| !w.is_zero());
        match first {
            None => Self::zero(),
            Some(first) => {
                let last = weights.iter().rposition(|w| !w.is_zero()).unwrap_or(first);
                let weights = if first == 0 && last + 1 == weights.len() {
                    weights
                } else {
                    weights[first..=last].to_vec()
                };
                Self {
                    offset: offset + first as i64,
                    weights,
                }
            }
        }
    }

    pub fn zero() -> Self {
        Self {
            offset: 0,
            weights: vec![T::zero()],
        }
    }

    /// Unit mass at `k`.
    pub fn dirac(k: i64) -> Self {
        Self {
            offset: k,
            weights: vec![T::one()],
        }
    }

    /// The measure `Z = δ₁ − δ₀` whose transform is `e^{it} − 1`.
    pub fn unit_difference() -> Self {
        Self::new(0, vec![-T::one(), T::one()])
    }

    pub fn is_zero(&self) -> bool {
        self.weights.len() == 1 && self.weights[0].is_zero()
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// Smallest and largest support point (inclusive).
    pub fn support(&self) -> (i64, i64) {
        (self.offset, self.offset + self.weights.len() as i64 - 1)
    }

    pub fn mass_at(&self, k: i64) -> T {
        let i = k - self.offset;
        if i < 0 || i >= self.weights.len() as i64 {
            T::zero()
        } else {
            self.weights[i as usize]
        }
    }

    /// `(k, mass)` pairs over the stored support.
    pub fn iter(&self) -> impl Iterator<Item = (i64, T)> + '_ {
        self.weights
            .iter()
            .enumerate()
            .map(move |(i, &w)| (self.offset + i as i64, w))
    }

    pub fn total_mass(&self) -> T {
        compensated_sum(self.weights.iter().copied())
    }

    /// Total variation `Σ |M{k}|`.
    pub fn abs_mass(&self) -> T {
        compensated_sum(self.weights.iter().map(|w| w.abs()))
    }

    pub fn is_nonnegative(&self) -> bool {
        self.weights.iter().all(|w| *w >= T::zero())
    }

    /// `M(x) = Σ_{k ≤ x} M{k}`.
    pub fn cdf(&self, x: i64) -> T {
        let (lo, hi) = self.support();
        if x < lo {
            T::zero()
        } else if x >= hi {
            self.total_mass()
        } else {
            compensated_sum(self.weights[..=(x - lo) as usize].iter().copied())
        }
    }

    /// Cumulative values `M(x)` for every `x` in `from..=to`.
    pub fn cdf_range(&self, from: i64, to: i64) -> Vec<T> {
        let mut acc = CompensatedSum::new();
        let (lo, _) = self.support();
        for k in lo.min(from)..from {
            acc.add(self.mass_at(k));
        }
        (from..=to)
            .map(|x| {
                acc.add(self.mass_at(x));
                acc.value()
            })
            .collect()
    }

    /// Fourier–Stieltjes transform `Σ e^{itk} M{k}`.
    pub fn cf_eval(&self, t: T) -> Complex<T> {
        let mut re = CompensatedSum::new();
        let mut im = CompensatedSum::new();
        for (k, w) in self.iter() {
            let phase = t * T::from_i64_lossy(k);
            re.add(w * phase.cos());
            im.add(w * phase.sin());
        }
        Complex::new(re.value(), im.value())
    }

    /// Raw moment `Σ k^order M{k}`.
    pub fn raw_moment(&self, order: i32) -> T {
        compensated_sum(
            self.iter()
                .map(|(k, w)| T::from_i64_lossy(k).powi(order) * w),
        )
    }

    /// Mean of the measure normalised by its total mass.
    pub fn mean(&self) -> T {
        self.raw_moment(1) / self.total_mass()
    }

    /// Variance of the measure normalised by its total mass.
    pub fn variance(&self) -> T {
        let mass = self.total_mass();
        let mean = self.raw_moment(1) / mass;
        compensated_sum(self.iter().map(|(k, w)| {
            let d = T::from_i64_lossy(k) - mean;
            d * d * w
        })) / mass
    }

    /// Exact discrete convolution; offsets add and total masses multiply.
    pub fn convolve(&self, other: &Self) -> Self {
        let n = self.weights.len();
        let m = other.weights.len();
        let mut out = vec![T::zero(); n + m - 1];
        for (i, &a) in self.weights.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, &b) in other.weights.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(self.offset + other.offset, out)
    }

    pub fn shift(&self, by: i64) -> Self {
        Self {
            offset: self.offset + by,
            weights: self.weights.clone(),
        }
    }

    pub fn scale(&self, factor: T) -> Self {
        Self::new(
            self.offset,
            self.weights.iter().map(|&w| w * factor).collect(),
        )
    }

    fn combine(&self, other: &Self, sign: T) -> Self {
        let (lo_a, hi_a) = self.support();
        let (lo_b, hi_b) = other.support();
        let lo = lo_a.min(lo_b);
        let hi = hi_a.max(hi_b);
        let weights = (lo..=hi)
            .map(|k| self.mass_at(k) + sign * other.mass_at(k))
            .collect();
        Self::new(lo, weights)
    }
}

impl<T: Real> Add for &SignedMeasure<T> {
    type Output = SignedMeasure<T>;
    fn add(self, rhs: Self) -> SignedMeasure<T> {
        self.combine(rhs, T::one())
    }
}

impl<T: Real> Sub for &SignedMeasure<T> {
    type Output = SignedMeasure<T>;
    fn sub(self, rhs: Self) -> SignedMeasure<T> {
        self.combine(rhs, -T::one())
    }
}

impl<T: Real> Neg for &SignedMeasure<T> {
    type Output = SignedMeasure<T>;
    fn neg(self) -> SignedMeasure<T> {
        self.scale(-T::one())
    }
}

impl<T: Real> Mul<T> for &SignedMeasure<T> {
    type Output = SignedMeasure<T>;
    fn mul(self, rhs: T) -> SignedMeasure<T> {
        self.scale(rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    type M = SignedMeasure<f64>;

    fn max_abs_diff(a: &M, b: &M) -> f64 {
        let (la, ha) = a.support();
        let (lb, hb) = b.support();
        (la.min(lb)..=ha.max(hb))
            .map(|k| (a.mass_at(k) - b.mass_at(k)).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn trims_zeros_and_keeps_offset() {
        let m = M::new(-2, vec![0.0, 0.0, 0.5, 0.0, 0.5, 0.0]);
        assert_eq!(m.support(), (0, 2));
        assert_eq!(m.weights(), &[0.5, 0.0, 0.5]);
        assert!(M::new(3, vec![0.0; 4]).is_zero());
    }

    #[test]
    fn dirac_is_convolution_identity() {
        let m = M::new(1, vec![0.2, -0.3, 0.6]);
        assert_eq!(M::dirac(0).convolve(&m), m);
        assert_eq!(M::dirac(2).convolve(&m), m.shift(2));
    }

    #[test]
    fn cdf_outside_support() {
        let m = M::new(0, vec![0.25, 0.5, 0.25]);
        assert_eq!(m.cdf(-1), 0.0);
        assert_eq!(m.cdf(1), 0.75);
        assert_eq!(m.cdf(100), 1.0);
        assert_eq!(m.cdf_range(-1, 3), vec![0.0, 0.25, 0.75, 1.0, 1.0]);
    }

    #[test]
    fn cf_of_unit_mass_at_one() {
        let v = M::dirac(1).cf_eval(std::f64::consts::PI);
        assert!((v.re + 1.0).abs() < 1e-15 && v.im.abs() < 1e-15);
        let m = M::new(-1, vec![0.3, -0.1, 0.5]);
        assert!((m.cf_eval(0.0).re - m.total_mass()).abs() < 1e-15);
    }

    #[test]
    fn unit_difference_squared_is_second_difference() {
        let z = M::unit_difference();
        let z2 = z.convolve(&z);
        assert_eq!(z2.weights(), &[1.0, -2.0, 1.0]);
        assert_eq!(z2.total_mass(), 0.0);
    }

    fn small_measure() -> impl Strategy<Value = M> {
        (-3i64..3, prop::collection::vec(-1.0f64..1.0, 1..6)).prop_map(|(o, w)| M::new(o, w))
    }

    proptest! {
        #[test]
        fn convolution_commutes_and_associates(a in small_measure(), b in small_measure(), c in small_measure()) {
            prop_assert!(max_abs_diff(&a.convolve(&b), &b.convolve(&a)) <= 1e-12);
            let left = a.convolve(&b).convolve(&c);
            let right = a.convolve(&b.convolve(&c));
            prop_assert!(max_abs_diff(&left, &right) <= 1e-12);
        }

        #[test]
        fn convolution_multiplies_mass(a in small_measure(), b in small_measure()) {
            let prod = a.convolve(&b).total_mass();
            prop_assert!((prod - a.total_mass() * b.total_mass()).abs() <= 1e-12);
        }
    }
}
