use num_complex::Complex;
use rustfft::{FftNum, FftPlanner};

use super::SignedMeasure;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Relative size of the wrap-around band that must be empty.
const BOUNDARY_FRACTION: usize = 8;
const ALIAS_TOL: f64 = 1e-10;

/// Recovers an integer-supported measure from its characteristic function,
/// `M{k} = (1/2π) ∫_{−π}^{π} M̂(t) e^{−itk} dt`, by a DFT on `grid_size`
/// equispaced points of `[0, 2π)`. The support is assumed to start at 0.
pub fn invert_cf<T, F>(cf: F, grid_size: usize) -> Result<SignedMeasure<T>>
where
    T: Real + FftNum,
    F: Fn(T) -> Complex<T>,
{
    invert_cf_shifted(cf, grid_size, 0)
}

/// As [`invert_cf`], for a measure whose support starts at `offset`.
///
/// The grid covers `offset..offset + grid_size`; the last eighth of that
/// window must carry no mass, otherwise the grid is reported as too small.
pub fn invert_cf_shifted<T, F>(cf: F, grid_size: usize, offset: i64) -> Result<SignedMeasure<T>>
where
    T: Real + FftNum,
    F: Fn(T) -> Complex<T>,
{
    if !grid_size.is_power_of_two() || grid_size < 2 * BOUNDARY_FRACTION {
        return Err(Error::domain(
            "grid_size",
            format!(
                "must be a power of two ≥ {}, got {grid_size}",
                2 * BOUNDARY_FRACTION
            ),
        ));
    }
    let n = T::from_usize_lossy(grid_size);
    let step = T::TAU() / n;
    let off = T::from_i64_lossy(offset);
    let mut scale = T::zero();
    let mut buffer: Vec<Complex<T>> = (0..grid_size)
        .map(|j| {
            let t = step * T::from_usize_lossy(j);
            let v = cf(t);
            scale = scale.max(v.norm());
            // Move the support start to index 0.
            v * Complex::new(T::zero(), -t * off).exp()
        })
        .collect();

    let mut planner = FftPlanner::<T>::new();
    planner.plan_fft_forward(grid_size).process(&mut buffer);

    let weights: Vec<T> = buffer.iter().map(|c| c.re / n).collect();

    let band = grid_size / BOUNDARY_FRACTION;
    let boundary_mass = weights[grid_size - band..]
        .iter()
        .fold(T::zero(), |acc, w| acc.max(w.abs()));
    if boundary_mass > T::c(ALIAS_TOL) * scale.max(T::one()) {
        return Err(Error::GridTooSmall {
            grid_size,
            boundary_mass: boundary_mass.to_f64_lossy(),
        });
    }
    // No clipping: rounding noise stays visible in the result, so callers
    // comparing against it see the oracle's own error.
    Ok(SignedMeasure::new(offset, weights))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{poisson, FamilyParams};

    fn max_abs_diff(a: &SignedMeasure<f64>, b: &SignedMeasure<f64>) -> f64 {
        let (la, ha) = a.support();
        let (lb, hb) = b.support();
        (la.min(lb)..=ha.max(hb))
            .map(|k| (a.mass_at(k) - b.mass_at(k)).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn constant_one_inverts_to_dirac_at_zero() {
        let m = invert_cf(|_t: f64| Complex::new(1.0, 0.0), 64).unwrap();
        assert!(max_abs_diff(&m, &SignedMeasure::dirac(0)) < 1e-15);
    }

    #[test]
    fn poisson_self_check() {
        let lambda = 2.0;
        let m = invert_cf(
            |t: f64| (Complex::new(t.cos() - 1.0, t.sin()) * lambda).exp(),
            4096,
        )
        .unwrap();
        let p = poisson(&FamilyParams::new(lambda, 0.0)).unwrap();
        assert!(max_abs_diff(&m, &p) < 1e-9);
    }

    #[test]
    fn negative_support_needs_offset() {
        let cf = |t: f64| Complex::new(0.0, -3.0 * t).exp();
        assert!(matches!(invert_cf(cf, 64), Err(Error::GridTooSmall { .. })));
        let m = invert_cf_shifted(cf, 64, -5).unwrap();
        assert!(max_abs_diff(&m, &SignedMeasure::dirac(-3)) < 1e-14);
    }

    #[test]
    fn rejects_bad_grid() {
        assert!(invert_cf(|_t: f64| Complex::new(1.0, 0.0), 100).is_err());
    }

    #[test]
    fn round_trip_of_signed_measure() {
        let m = SignedMeasure::new(0, vec![0.3, -0.2, 0.9, 0.0, -0.1]);
        let back = invert_cf(|t| m.cf_eval(t), 256).unwrap();
        assert!(max_abs_diff(&m, &back) < 1e-13);
    }
}
