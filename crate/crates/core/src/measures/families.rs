use std::fmt;
use std::str::FromStr;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::SignedMeasure;
use crate::error::{Error, Result};
use crate::scalar::{compensated_sum, Real};

pub const DEFAULT_TRUNCATION_EPS: f64 = 1e-12;

/// Rescaling threshold for the unnormalised compound Poisson recursion.
const RESCALE_AT: f64 = 1e150;

/// Parameters shared by every approximating family.
///
/// `lambda` is the mean of the approximated sum and `gamma2` half its
/// variance-minus-mean. Infinite-support families are truncated once a
/// certified tail bound drops below `truncation_eps`, and never extend past
/// `max_support`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FamilyParams<T> {
    pub lambda: T,
    pub gamma2: T,
    pub truncation_eps: T,
    pub max_support: usize,
}

impl<T: Real> FamilyParams<T> {
    pub fn new(lambda: T, gamma2: T) -> Self {
        Self {
            lambda,
            gamma2,
            truncation_eps: T::c(DEFAULT_TRUNCATION_EPS),
            max_support: default_max_support(lambda),
        }
    }

    pub fn with_truncation_eps(mut self, eps: T) -> Self {
        self.truncation_eps = eps;
        self
    }

    pub fn with_max_support(mut self, max_support: usize) -> Self {
        self.max_support = max_support;
        self
    }

    fn check_lambda(&self) -> Result<()> {
        if !(self.lambda > T::zero()) || !self.lambda.is_finite() {
            return Err(Error::domain(
                "lambda",
                format!("must be positive, got {}", self.lambda),
            ));
        }
        if !(self.truncation_eps > T::zero()) {
            return Err(Error::domain(
                "truncation_eps",
                format!("must be positive, got {}", self.truncation_eps),
            ));
        }
        if !self.gamma2.is_finite() {
            return Err(Error::domain("gamma2", "must be finite"));
        }
        Ok(())
    }
}

/// `10·λ + 200`, the default hard cap on the support of truncated families.
pub fn default_max_support<T: Real>(lambda: T) -> usize {
    let lam = lambda.to_f64_lossy();
    if lam.is_finite() && lam > 0.0 {
        (10.0 * lam + 200.0).floor() as usize
    } else {
        200
    }
}

/// Splits `−2Γ₂` into its integer part and fractional part `δ̃ ∈ [0, 1)`.
pub fn delta_tilde<T: Real>(gamma2: T) -> (i64, T) {
    let v = -(gamma2 + gamma2);
    let floor = v.floor();
    (floor.to_i64().expect("finite gamma2"), v - floor)
}

/// Poisson pmf with certified upper-tail truncation, seeded at the mode.
/// Bound on `Σ_{m≥1} w ρ^m (1 + (j+m)²)`: the mass plus second moment left
/// beyond index `j` when successive weights shrink by at most `ρ < 1`.
fn geometric_tail<T: Real>(w: T, rho: T, j: usize) -> T {
    let one = T::one();
    let jt = T::from_usize_lossy(j);
    let q = one - rho;
    let s0 = rho / q;
    let s1 = rho / (q * q);
    let s2 = rho * (one + rho) / (q * q * q);
    w.abs() * (s0 * (one + jt * jt) + T::c(2.0) * jt * s1 + s2)
}

fn poisson_weights<T: Real>(rate: T, eps: T, cap: usize) -> Result<Vec<T>> {
    let mode = rate.floor().to_usize().unwrap_or(0);
    if mode > cap {
        return Err(Error::NonConvergence {
            family: "poisson",
            cap,
            tail_bound: 1.0,
            partial_abs_mass: 0.0,
        });
    }
    let mode_t = T::from_usize_lossy(mode);
    let seed = (mode_t * rate.ln() - rate - (mode_t + T::one()).lgamma()).exp();

    let mut weights = vec![T::zero(); mode + 1];
    weights[mode] = seed;
    for k in (1..=mode).rev() {
        weights[k - 1] = weights[k] * T::from_usize_lossy(k) / rate;
    }

    let mut k = mode;
    loop {
        let ratio = rate / T::from_usize_lossy(k + 1);
        let tail = geometric_tail(weights[k], ratio, k);
        if tail < eps {
            break;
        }
        if k >= cap {
            return Err(Error::NonConvergence {
                family: "poisson",
                cap,
                tail_bound: tail.to_f64_lossy(),
                partial_abs_mass: compensated_sum(weights.iter().copied()).to_f64_lossy(),
            });
        }
        weights.push(weights[k] * ratio);
        k += 1;
    }
    Ok(weights)
}

/// Poisson law with mean `λ`.
pub fn poisson<T: Real>(params: &FamilyParams<T>) -> Result<SignedMeasure<T>> {
    params.check_lambda()?;
    let w = poisson_weights(params.lambda, params.truncation_eps, params.max_support)?;
    Ok(SignedMeasure::new(0, w))
}

/// `Π₁`: the second difference of the Poisson law scaled by `Γ₂`.
pub fn second_order_correction<T: Real>(params: &FamilyParams<T>) -> Result<SignedMeasure<T>> {
    params.check_lambda()?;
    let pi = poisson_weights(params.lambda, params.truncation_eps, params.max_support)?;
    let at = |j: isize| -> T {
        if j < 0 || j as usize >= pi.len() {
            T::zero()
        } else {
            pi[j as usize]
        }
    };
    let two = T::c(2.0);
    let weights = (0..pi.len() as isize + 2)
        .map(|k| params.gamma2 * (at(k - 2) - two * at(k - 1) + at(k)))
        .collect();
    Ok(SignedMeasure::new(0, weights))
}

/// `Π + Π₁`, the two-parameter Poisson expansion.
pub fn poisson_second_order<T: Real>(params: &FamilyParams<T>) -> Result<SignedMeasure<T>> {
    Ok(&poisson(params)? + &second_order_correction(params)?)
}

/// Compound Poisson measure with transform `exp{λz + Γ₂z²}`; signed when
/// `λ − 2Γ₂ < 0` or `Γ₂ < 0`.
///
/// Uses `k·g{k} = a₁g{k−1} + 2a₂g{k−2}` with `a₁ = λ − 2Γ₂`, `a₂ = Γ₂`,
/// `g{0} = exp(−a₁ − a₂)`. The recursion runs unnormalised and rescaled so
/// that large `λ` does not underflow the seed.
pub fn compound_poisson_g<T: Real>(params: &FamilyParams<T>) -> Result<SignedMeasure<T>> {
    params.check_lambda()?;
    let a1 = params.lambda - params.gamma2 - params.gamma2;
    let a2 = params.gamma2;
    let two = T::c(2.0);
    let growth = a1.abs() + two * a2.abs();
    let big = T::c(RESCALE_AT);
    let ln_big = big.ln();

    let mut h: Vec<T> = vec![T::one()];
    let mut log_scale = -a1 - a2;
    let mut k = 0usize;
    loop {
        let ratio = growth / T::from_usize_lossy(k + 1);
        if ratio < T::one() {
            let prev = if k == 0 { T::zero() } else { h[k - 1].abs() };
            let m = h[k].abs().max(prev) * log_scale.exp();
            let tail = two * geometric_tail(m, ratio, k);
            if tail < params.truncation_eps {
                break;
            }
        }
        if k >= params.max_support {
            let scale = log_scale.exp();
            return Err(Error::NonConvergence {
                family: "compound_poisson",
                cap: params.max_support,
                tail_bound: f64::INFINITY,
                partial_abs_mass: (compensated_sum(h.iter().map(|v| v.abs())) * scale)
                    .to_f64_lossy(),
            });
        }
        k += 1;
        let prev2 = if k >= 2 { h[k - 2] } else { T::zero() };
        let next = (a1 * h[k - 1] + two * a2 * prev2) / T::from_usize_lossy(k);
        if !next.is_finite() {
            return Err(Error::NonConvergence {
                family: "compound_poisson",
                cap: k,
                tail_bound: f64::INFINITY,
                partial_abs_mass: f64::INFINITY,
            });
        }
        h.push(next);
        if next.abs() > big {
            for v in h.iter_mut() {
                *v /= big;
            }
            log_scale += ln_big;
        }
    }
    let scale = log_scale.exp();
    Ok(SignedMeasure::new(
        0,
        h.into_iter().map(|v| v * scale).collect(),
    ))
}

/// Poisson law with rate `λ + 2Γ₂ + δ̃` shifted by `⌊−2Γ₂⌋`.
///
/// The shift is negative when `Γ₂ > 0`; the resulting measure then has mass
/// on negative integers.
pub fn translated_poisson<T: Real>(params: &FamilyParams<T>) -> Result<SignedMeasure<T>> {
    params.check_lambda()?;
    let (shift, _) = delta_tilde(params.gamma2);
    let rate = params.lambda - T::from_i64_lossy(shift);
    if !(rate > T::zero()) {
        return Err(Error::domain(
            "lambda + 2*gamma2 + delta_tilde",
            format!("translated Poisson rate must be positive, got {rate}"),
        ));
    }
    let w = poisson_weights(rate, params.truncation_eps, params.max_support)?;
    Ok(SignedMeasure::new(shift, w))
}

/// Solution `(r, q̄)` of `r(1−q̄)/q̄ = λ`, `r((1−q̄)/q̄)² = 2Γ₂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NegativeBinomialParams<T> {
    pub r: T,
    pub q_bar: T,
}

impl<T: Real> NegativeBinomialParams<T> {
    pub fn solve(lambda: T, gamma2: T) -> Result<Self> {
        if !(gamma2 > T::zero()) {
            return Err(Error::domain(
                "gamma2",
                format!("negative binomial requires gamma2 > 0, got {gamma2}"),
            ));
        }
        let two_g = gamma2 + gamma2;
        Ok(Self {
            r: lambda * lambda / two_g,
            q_bar: lambda / (lambda + two_g),
        })
    }
}

/// `ln Γ(a + m) − ln Γ(a)` as a finite sum, avoiding cancellation for large `a`.
fn ln_rising<T: Real>(a: T, m: usize) -> T {
    compensated_sum((0..m).map(|i| (a + T::from_usize_lossy(i)).ln()))
}

/// Negative binomial law matching mean `λ` and variance `λ + 2Γ₂`.
pub fn negative_binomial<T: Real>(params: &FamilyParams<T>) -> Result<SignedMeasure<T>> {
    params.check_lambda()?;
    let NegativeBinomialParams { r, q_bar } =
        NegativeBinomialParams::solve(params.lambda, params.gamma2)?;
    let two_g = params.gamma2 + params.gamma2;
    let ln_q = -(two_g / params.lambda).ln_1p();
    let ln_1mq = (two_g / (params.lambda + two_g)).ln();
    let odds = T::one() - q_bar;

    let mode = if r > T::one() {
        ((r - T::one()) * odds / q_bar)
            .floor()
            .to_usize()
            .unwrap_or(0)
    } else {
        0
    };
    if mode > params.max_support {
        return Err(Error::NonConvergence {
            family: "negative_binomial",
            cap: params.max_support,
            tail_bound: 1.0,
            partial_abs_mass: 0.0,
        });
    }
    let mode_t = T::from_usize_lossy(mode);
    let seed =
        (ln_rising(r, mode) - (mode_t + T::one()).lgamma() + r * ln_q + mode_t * ln_1mq).exp();

    let mut weights = vec![T::zero(); mode + 1];
    weights[mode] = seed;
    for j in (1..=mode).rev() {
        let jt = T::from_usize_lossy(j);
        weights[j - 1] = weights[j] * jt / ((r + jt - T::one()) * odds);
    }
    let mut j = mode;
    loop {
        let jt = T::from_usize_lossy(j);
        let step = (r + jt) * odds / (jt + T::one());
        let bound = step.max(odds);
        let tail = geometric_tail(weights[j], bound, j);
        if tail < params.truncation_eps {
            break;
        }
        if j >= params.max_support {
            return Err(Error::NonConvergence {
                family: "negative_binomial",
                cap: params.max_support,
                tail_bound: tail.to_f64_lossy(),
                partial_abs_mass: compensated_sum(weights.iter().copied()).to_f64_lossy(),
            });
        }
        weights.push(weights[j] * step);
        j += 1;
    }
    Ok(SignedMeasure::new(0, weights))
}

/// Relative distance from an integer below which `Ñ` is taken to be that
/// integer.
const INTEGER_SLACK: f64 = 1e-12;

/// `N = ⌊Ñ⌋`, `Ñ = λ²/(2|Γ₂|)`, `p̄ = λ/N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinomialParams<T> {
    pub n_tilde: T,
    pub n_trials: usize,
    pub p_bar: T,
}

impl<T: Real> BinomialParams<T> {
    pub fn solve(lambda: T, gamma2: T) -> Result<Self> {
        if !(gamma2 < T::zero()) {
            return Err(Error::domain(
                "gamma2",
                format!("binomial approximation requires gamma2 < 0, got {gamma2}"),
            ));
        }
        let n_tilde = lambda * lambda / (-(gamma2 + gamma2));
        // Ñ that is an integer up to rounding (e.g. equal Bernoulli summands)
        // must not drop to the integer below.
        let nearest = n_tilde.round();
        let snapped = if (n_tilde - nearest).abs() <= T::c(INTEGER_SLACK) * nearest {
            nearest
        } else {
            n_tilde.floor()
        };
        let n_trials = snapped
            .to_usize()
            .ok_or_else(|| Error::domain("N", format!("Ñ = {n_tilde} is not representable")))?;
        if n_trials == 0 {
            return Err(Error::domain("N", format!("N = ⌊{n_tilde}⌋ = 0")));
        }
        let p_bar = lambda / T::from_usize_lossy(n_trials);
        if p_bar > T::one() {
            return Err(Error::domain(
                "p_bar",
                format!("p̄ = λ/N = {p_bar} exceeds 1"),
            ));
        }
        Ok(Self {
            n_tilde,
            n_trials,
            p_bar,
        })
    }
}

/// Binomial law `Bi(N, p̄)` matching mean `λ`, with certified upper truncation.
pub fn binomial_approx<T: Real>(params: &FamilyParams<T>) -> Result<SignedMeasure<T>> {
    params.check_lambda()?;
    let BinomialParams {
        n_trials: n, p_bar, ..
    } = BinomialParams::solve(params.lambda, params.gamma2)?;
    if p_bar == T::one() {
        return Ok(SignedMeasure::dirac(n as i64));
    }
    let nt = T::from_usize_lossy(n);
    let odds = p_bar / (T::one() - p_bar);
    let mode = ((nt + T::one()) * p_bar)
        .floor()
        .to_usize()
        .unwrap_or(0)
        .min(n);
    if mode > params.max_support {
        return Err(Error::NonConvergence {
            family: "binomial",
            cap: params.max_support,
            tail_bound: 1.0,
            partial_abs_mass: 0.0,
        });
    }
    let mode_t = T::from_usize_lossy(mode);
    // ln C(N, m) = Σ_{i<m} ln(N − i) − ln m!
    let ln_choose = compensated_sum((0..mode).map(|i| (nt - T::from_usize_lossy(i)).ln()))
        - (mode_t + T::one()).lgamma();
    let seed = (ln_choose + mode_t * p_bar.ln() + (nt - mode_t) * (-p_bar).ln_1p()).exp();

    let mut weights = vec![T::zero(); mode + 1];
    weights[mode] = seed;
    for k in (1..=mode).rev() {
        let kt = T::from_usize_lossy(k);
        weights[k - 1] = weights[k] * kt / ((nt - kt + T::one()) * odds);
    }
    let mut k = mode;
    while k < n {
        let kt = T::from_usize_lossy(k);
        let step = (nt - kt) / (kt + T::one()) * odds;
        if step < T::one() {
            let tail = geometric_tail(weights[k], step, k);
            if tail < params.truncation_eps {
                break;
            }
        }
        if k >= params.max_support {
            return Err(Error::NonConvergence {
                family: "binomial",
                cap: params.max_support,
                tail_bound: f64::INFINITY,
                partial_abs_mass: compensated_sum(weights.iter().copied()).to_f64_lossy(),
            });
        }
        weights.push(weights[k] * step);
        k += 1;
    }
    Ok(SignedMeasure::new(0, weights))
}

/// The six approximations to the law of a sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ApproximationFamily {
    /// Poisson, `Π`.
    #[serde(rename = "pi")]
    Poisson,
    /// Second-order Poisson expansion, `Π + Π₁`.
    #[serde(rename = "pi2")]
    PoissonSecondOrder,
    /// Compound Poisson `𝔊`.
    #[serde(rename = "g")]
    CompoundPoisson,
    #[serde(rename = "tp")]
    TranslatedPoisson,
    #[serde(rename = "nb")]
    NegativeBinomial,
    #[serde(rename = "bi")]
    Binomial,
}

impl ApproximationFamily {
    pub const ALL: [ApproximationFamily; 6] = [
        ApproximationFamily::Poisson,
        ApproximationFamily::PoissonSecondOrder,
        ApproximationFamily::CompoundPoisson,
        ApproximationFamily::TranslatedPoisson,
        ApproximationFamily::NegativeBinomial,
        ApproximationFamily::Binomial,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ApproximationFamily::Poisson => "pi",
            ApproximationFamily::PoissonSecondOrder => "pi2",
            ApproximationFamily::CompoundPoisson => "g",
            ApproximationFamily::TranslatedPoisson => "tp",
            ApproximationFamily::NegativeBinomial => "nb",
            ApproximationFamily::Binomial => "bi",
        }
    }

    /// Sign requirement on `Γ₂`: negative binomial needs `Γ₂ > 0`, binomial
    /// needs `Γ₂ < 0`; the others accept any sign.
    pub fn admits_gamma2<T: Real>(self, gamma2: T) -> bool {
        match self {
            ApproximationFamily::NegativeBinomial => gamma2 > T::zero(),
            ApproximationFamily::Binomial => gamma2 < T::zero(),
            _ => true,
        }
    }

    pub fn build<T: Real>(self, params: &FamilyParams<T>) -> Result<SignedMeasure<T>> {
        match self {
            ApproximationFamily::Poisson => poisson(params),
            ApproximationFamily::PoissonSecondOrder => poisson_second_order(params),
            ApproximationFamily::CompoundPoisson => compound_poisson_g(params),
            ApproximationFamily::TranslatedPoisson => translated_poisson(params),
            ApproximationFamily::NegativeBinomial => negative_binomial(params),
            ApproximationFamily::Binomial => binomial_approx(params),
        }
    }

    /// The defining Fourier–Stieltjes transform of the family, without
    /// truncation. Used to cross-check constructors by inversion.
    pub fn transform<T: Real>(
        self,
        params: &FamilyParams<T>,
    ) -> Result<Box<dyn Fn(T) -> Complex<T> + Send + Sync>> {
        params.check_lambda()?;
        let lambda = params.lambda;
        let gamma2 = params.gamma2;
        let z = |t: T| Complex::new(t.cos() - T::one(), t.sin());
        Ok(match self {
            ApproximationFamily::Poisson => Box::new(move |t| (z(t) * lambda).exp()),
            ApproximationFamily::PoissonSecondOrder => Box::new(move |t| {
                let zt = z(t);
                (zt * lambda).exp() * (zt * zt * gamma2 + T::one())
            }),
            ApproximationFamily::CompoundPoisson => Box::new(move |t| {
                let zt = z(t);
                (zt * lambda + zt * zt * gamma2).exp()
            }),
            ApproximationFamily::TranslatedPoisson => {
                let (shift, _) = delta_tilde(gamma2);
                let rate = lambda - T::from_i64_lossy(shift);
                if !(rate > T::zero()) {
                    return Err(Error::domain(
                        "lambda + 2*gamma2 + delta_tilde",
                        "rate must be positive",
                    ));
                }
                let shift = T::from_i64_lossy(shift);
                Box::new(move |t| (Complex::new(T::zero(), shift * t) + z(t) * rate).exp())
            }
            ApproximationFamily::NegativeBinomial => {
                let NegativeBinomialParams { r, q_bar } =
                    NegativeBinomialParams::solve(lambda, gamma2)?;
                let c = (T::one() - q_bar) / q_bar;
                Box::new(move |t| (Complex::new(T::one(), T::zero()) - z(t) * c).powf(-r))
            }
            ApproximationFamily::Binomial => {
                let BinomialParams {
                    n_trials, p_bar, ..
                } = BinomialParams::solve(lambda, gamma2)?;
                let n = i32::try_from(n_trials)
                    .map_err(|_| Error::domain("N", "too large for the closed-form transform"))?;
                Box::new(move |t| (z(t) * p_bar + T::one()).powi(n))
            }
        })
    }
}

impl fmt::Display for ApproximationFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ApproximationFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown family `{s}`; expected one of pi, pi2, g, tp, nb, bi"
                ))
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    type P = FamilyParams<f64>;

    fn max_abs_diff(a: &SignedMeasure<f64>, b: &SignedMeasure<f64>) -> f64 {
        let (la, ha) = a.support();
        let (lb, hb) = b.support();
        (la.min(lb)..=ha.max(hb))
            .map(|k| (a.mass_at(k) - b.mass_at(k)).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn poisson_closed_form_points() {
        let p1 = poisson(&P::new(1.0, 0.0)).unwrap();
        assert_abs_diff_eq!(p1.mass_at(0), (-1.0f64).exp(), epsilon = 1e-15);
        let p2 = poisson(&P::new(2.0, 0.0)).unwrap();
        assert_abs_diff_eq!(p2.mass_at(2), 2.0 * (-2.0f64).exp(), epsilon = 1e-15);
        let p4 = poisson(&P::new(4.0, 0.0)).unwrap();
        assert_abs_diff_eq!(p4.total_mass(), 1.0, epsilon = 1e-12);
        assert!(p4.is_nonnegative());
    }

    #[test]
    fn poisson_rejects_nonpositive_rate() {
        assert!(matches!(
            poisson(&P::new(0.0, 0.0)),
            Err(Error::Domain { .. })
        ));
        assert!(matches!(
            poisson(&P::new(-1.0, 0.0)),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn poisson_large_rate_does_not_underflow() {
        let p = poisson(&P::new(1.0e4, 0.0)).unwrap();
        assert_abs_diff_eq!(p.total_mass(), 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(p.mean(), 1.0e4, epsilon = 1e-6);
    }

    #[test]
    fn correction_zero_when_gamma2_zero() {
        assert!(second_order_correction(&P::new(1.0, 0.0))
            .unwrap()
            .is_zero());
    }

    #[test]
    fn correction_has_zero_mass_and_known_head() {
        let c = second_order_correction(&P::new(2.0, 0.5)).unwrap();
        assert_abs_diff_eq!(c.total_mass(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.mass_at(0), 0.5 * (-2.0f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn correction_equals_scaled_second_difference() {
        let params = P::new(3.0, -0.7);
        let pi = poisson(&params).unwrap();
        let z = SignedMeasure::unit_difference();
        let via_conv = pi.convolve(&z).convolve(&z).scale(params.gamma2);
        assert!(max_abs_diff(&via_conv, &second_order_correction(&params).unwrap()) < 1e-15);
    }

    #[test]
    fn compound_poisson_degenerates_to_poisson() {
        let g = compound_poisson_g(&P::new(3.0, 0.0)).unwrap();
        let p = poisson(&P::new(3.0, 0.0)).unwrap();
        assert!(max_abs_diff(&g, &p) < 1e-12);
    }

    #[test]
    fn compound_poisson_seed() {
        let g = compound_poisson_g(&P::new(2.0, 0.3)).unwrap();
        assert_abs_diff_eq!(g.mass_at(0), (-1.7f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(g.total_mass(), 1.0, epsilon = 1e-11);
    }

    #[test]
    fn compound_poisson_recursion_identity() {
        for &(lambda, gamma2) in &[(2.0, 0.3), (5.0, -1.2), (1.0, 1.5), (40.0, -3.0)] {
            let params = P::new(lambda, gamma2);
            let g = compound_poisson_g(&params).unwrap();
            let (a1, a2) = (lambda - 2.0 * gamma2, gamma2);
            let scale = g.abs_mass();
            for k in 1..=g.support().1 {
                let r =
                    k as f64 * g.mass_at(k) - a1 * g.mass_at(k - 1) - 2.0 * a2 * g.mass_at(k - 2);
                assert!(r.abs() <= 1e-13 * scale * (1.0 + k as f64), "k={k} r={r}");
            }
            assert_abs_diff_eq!(g.total_mass(), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn compound_poisson_moments() {
        let params = P::new(6.0, 0.8);
        let g = compound_poisson_g(&params).unwrap();
        assert_abs_diff_eq!(g.mean(), 6.0, epsilon = 1e-9);
        assert_abs_diff_eq!(g.variance(), 6.0 + 1.6, epsilon = 1e-9);
    }

    #[test]
    fn compound_poisson_large_lambda() {
        let g = compound_poisson_g(&P::new(2000.0, -5.0)).unwrap();
        assert_abs_diff_eq!(g.total_mass(), 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(g.mean(), 2000.0, epsilon = 1e-6);
    }

    #[test]
    fn compound_poisson_reports_divergence() {
        let params = P::new(1.0, 50.0).with_max_support(20);
        match compound_poisson_g(&params) {
            Err(Error::NonConvergence {
                partial_abs_mass, ..
            }) => assert!(partial_abs_mass > 0.0),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn delta_tilde_split() {
        assert_eq!(delta_tilde(0.0f64), (0, 0.0));
        assert_eq!(delta_tilde(-0.75f64), (1, 0.5));
        assert_eq!(delta_tilde(-0.5f64), (1, 0.0));
        assert_eq!(delta_tilde(0.3f64).0, -1);
        let (s, d) = delta_tilde(0.3f64);
        assert_eq!(s as f64 + d, -0.6);
    }

    #[test]
    fn translated_poisson_shift_and_rate() {
        let tp = translated_poisson(&P::new(5.0, 0.0)).unwrap();
        assert!(max_abs_diff(&tp, &poisson(&P::new(5.0, 0.0)).unwrap()) < 1e-15);

        let tp = translated_poisson(&P::new(5.0, -0.75)).unwrap();
        let expected = poisson(&P::new(4.0, 0.0)).unwrap().shift(1);
        assert!(max_abs_diff(&tp, &expected) < 1e-15);

        let tp = translated_poisson(&P::new(5.0, -0.5)).unwrap();
        let expected = poisson(&P::new(4.0, 0.0)).unwrap().shift(1);
        assert!(max_abs_diff(&tp, &expected) < 1e-15);
    }

    #[test]
    fn translated_poisson_negative_shift() {
        let tp = translated_poisson(&P::new(3.0, 1.2)).unwrap();
        assert_eq!(tp.offset(), -3);
        assert_abs_diff_eq!(tp.mean(), -3.0 + 6.0, epsilon = 1e-10);
        assert_abs_diff_eq!(tp.variance(), 6.0, epsilon = 1e-9);
    }

    #[test]
    fn translated_poisson_rejects_nonpositive_rate() {
        assert!(matches!(
            translated_poisson(&P::new(1.0, -4.0)),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn negative_binomial_solution() {
        let nb = NegativeBinomialParams::solve(2.0, 1.0).unwrap();
        assert_abs_diff_eq!(nb.q_bar, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(nb.r, 2.0, epsilon = 1e-15);
        let m = negative_binomial(&P::new(2.0, 1.0)).unwrap();
        assert_abs_diff_eq!(m.mass_at(0), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(m.mean(), 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(m.variance(), 4.0, epsilon = 1e-9);
    }

    #[test]
    fn negative_binomial_small_shape() {
        // r = 1/2
        let m = negative_binomial(&P::new(1.0, 1.0)).unwrap();
        assert_abs_diff_eq!(m.total_mass(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.mean(), 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(m.variance(), 3.0, epsilon = 1e-9);
        // heavy tail beyond the default cap
        assert!(matches!(
            negative_binomial(&P::new(0.5, 2.0)),
            Err(Error::NonConvergence { .. })
        ));
    }

    #[test]
    fn negative_binomial_requires_positive_gamma2() {
        assert!(matches!(
            negative_binomial(&P::new(2.0, 0.0)),
            Err(Error::Domain {
                quantity: "gamma2",
                ..
            })
        ));
        assert!(negative_binomial(&P::new(2.0, -1.0)).is_err());
    }

    #[test]
    fn binomial_recovers_equal_bernoulli_count() {
        // n = 300 summands with p = 0.01: Ñ = (np)²/(np²) = n
        let lambda = 300.0 * 0.01;
        let gamma2 = -0.5 * 300.0 * 0.01 * 0.01;
        let b = BinomialParams::solve(lambda, gamma2).unwrap();
        assert_eq!(b.n_trials, 300);
        let b = BinomialParams::solve(2.0, -0.5 * (1.0 + 1e-9)).unwrap();
        assert_eq!(b.n_trials, 3);
    }

    #[test]
    fn binomial_parameters() {
        let b = BinomialParams::solve(2.0, -0.5).unwrap();
        assert_abs_diff_eq!(b.n_tilde, 4.0, epsilon = 1e-15);
        assert_eq!(b.n_trials, 4);
        assert_abs_diff_eq!(b.p_bar, 0.5, epsilon = 1e-15);
        let m = binomial_approx(&P::new(2.0, -0.5)).unwrap();
        assert_eq!(m.support(), (0, 4));
        assert_abs_diff_eq!(m.total_mass(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.mass_at(2), 6.0 / 16.0, epsilon = 1e-15);

        let b = BinomialParams::solve(1.0, -0.3).unwrap();
        assert_abs_diff_eq!(b.n_tilde, 1.0 / 0.6, epsilon = 1e-15);
        assert_eq!(b.n_trials, 1);
        assert_eq!(b.p_bar, 1.0);
        assert_eq!(
            binomial_approx(&P::new(1.0, -0.3)).unwrap(),
            SignedMeasure::dirac(1)
        );
    }

    #[test]
    fn binomial_errors_name_quantity() {
        match binomial_approx(&P::new(1.0, -4.0)) {
            Err(Error::Domain { quantity, .. }) => assert_eq!(quantity, "N"),
            other => panic!("{other:?}"),
        }
        // Ñ = 1/1.9 < 1
        match binomial_approx(&P::new(1.0, -0.95)) {
            Err(Error::Domain { quantity, .. }) => assert_eq!(quantity, "N"),
            other => panic!("{other:?}"),
        }
        // Ñ = 6.25/2.4 ≈ 2.6, N = 2, p̄ = 1.25
        match binomial_approx(&P::new(2.5, -1.2)) {
            Err(Error::Domain { quantity, .. }) => assert_eq!(quantity, "p_bar"),
            other => panic!("{other:?}"),
        }
        assert!(binomial_approx(&P::new(2.0, 0.5)).is_err());
    }

    #[test]
    fn binomial_large_n_is_truncated() {
        let params = P::new(10.0, -0.01);
        let m = binomial_approx(&params).unwrap();
        assert!(m.support().1 < 200);
        assert_abs_diff_eq!(m.total_mass(), 1.0, epsilon = 1e-12);
        let b = BinomialParams::solve(10.0, -0.01).unwrap();
        assert_abs_diff_eq!(m.mean(), b.n_trials as f64 * b.p_bar, epsilon = 1e-9);
    }

    #[test]
    fn family_names_round_trip() {
        for f in ApproximationFamily::ALL {
            assert_eq!(f.name().parse::<ApproximationFamily>().unwrap(), f);
        }
        assert!("zz".parse::<ApproximationFamily>().is_err());
    }

    #[test]
    fn f32_constructors() {
        let p = poisson(&FamilyParams::<f32>::new(3.0, 0.0).with_truncation_eps(1e-7)).unwrap();
        assert!((p.total_mass() - 1.0).abs() < 1e-5);
    }
}
