//! FitzHugh-Nagumo model constants, the cubic nonlinearity and its potential,
//! and the decay rates used by the asymptotic boundary conditions.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Physical constants plus the trial wave speed `c`.
///
/// `strip_half_width` is the physical half-width `L` of the strip; `None`
/// selects the 1D problem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams<T> {
    pub d: T,
    pub gamma: T,
    pub beta: T,
    pub c: T,
    pub strip_half_width: Option<T>,
}

impl<T: Real> ModelParams<T> {
    pub fn line(d: T, gamma: T, beta: T, c: T) -> Result<Self> {
        let p = Self {
            d,
            gamma,
            beta,
            c,
            strip_half_width: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn strip(d: T, gamma: T, beta: T, c: T, half_width: T) -> Result<Self> {
        let p = Self {
            d,
            gamma,
            beta,
            c,
            strip_half_width: Some(half_width),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        if self.strip_half_width.is_some() {
            2
        } else {
            1
        }
    }

    pub fn with_speed(&self, c: T) -> Result<Self> {
        let p = Self { c, ..*self };
        p.validate()?;
        Ok(p)
    }

    pub fn with_d(&self, d: T) -> Result<Self> {
        let p = Self { d, ..*self };
        p.validate()?;
        Ok(p)
    }

    /// `d c^2`, the diffusion coefficient of the activator in co-moving coordinates.
    pub fn dc2(&self) -> T {
        self.d * self.c * self.c
    }

    /// Half-width of the rescaled strip the descent works on (`c L`).
    pub fn solver_half_width(&self) -> Option<T> {
        self.strip_half_width.map(|l| self.c * l)
    }

    pub fn validate(&self) -> Result<()> {
        let zero = T::zero();
        let finite = |key: &str, x: T| {
            if x.is_finite() {
                Ok(())
            } else {
                Err(Error::validation(key, "must be finite"))
            }
        };
        finite("d", self.d)?;
        finite("gamma", self.gamma)?;
        finite("beta", self.beta)?;
        finite("c", self.c)?;
        if self.d <= zero {
            return Err(Error::validation("d", format!("must be positive, got {}", self.d)));
        }
        if !(self.beta > zero && self.beta < T::lit(0.5)) {
            return Err(Error::validation("beta", format!("must lie in (0, 1/2), got {}", self.beta)));
        }
        let one_minus_beta = T::one() - self.beta;
        let gamma_max = T::lit(4.0) / (one_minus_beta * one_minus_beta);
        if !(self.gamma > zero && self.gamma < gamma_max) {
            return Err(Error::validation(
                "gamma",
                format!("must lie in (0, 4/(1-beta)^2 = {gamma_max}), got {}", self.gamma),
            ));
        }
        if self.c <= zero {
            return Err(Error::validation("c", format!("must be positive, got {}", self.c)));
        }
        if let Some(l) = self.strip_half_width {
            if !(l > zero && l.is_finite()) {
                return Err(Error::validation("L", format!("must be positive, got {l}")));
            }
        }
        Ok(())
    }
}

/// Roots of `r^2 + r - kappa = 0`: `nu1 < 0 < nu2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenPair<T> {
    pub nu1: T,
    pub nu2: T,
}

impl<T: Real> EigenPair<T> {
    fn from_kappa(kappa: T) -> Self {
        let half = T::lit(0.5);
        let root = (T::one() + T::lit(4.0) * kappa).sqrt();
        Self {
            nu1: -half * (T::one() + root),
            nu2: half * (root - T::one()),
        }
    }
}

/// `f(xi) = xi (xi - beta) (1 - xi)`.
#[inline]
pub fn f_cubic<T: Real>(xi: T, beta: T) -> T {
    xi * (xi - beta) * (T::one() - xi)
}

/// `f'(xi) = -3 xi^2 + 2 (1 + beta) xi - beta`.
#[inline]
pub fn f_cubic_prime<T: Real>(xi: T, beta: T) -> T {
    let two = T::lit(2.0);
    -T::lit(3.0) * xi * xi + two * (T::one() + beta) * xi - beta
}

/// `F(xi) = -integral_0^xi f = xi^4/4 - (1+beta) xi^3/3 + beta xi^2/2`.
#[inline]
pub fn f_potential<T: Real>(xi: T, beta: T) -> T {
    let xi2 = xi * xi;
    xi2 * (xi2 / T::lit(4.0) - (T::one() + beta) * xi / T::lit(3.0) + beta / T::lit(2.0))
}

/// Smallest `M1 >= 1` with `f(xi) >= 1/gamma` for every `xi <= -M1`.
///
/// `f` is decreasing on `(-inf, 0]` and unbounded, so the threshold is the
/// unique negative root of `f(xi) = 1/gamma`, found by bisection.
pub fn compute_m1<T: Real>(gamma: T, beta: T) -> T {
    let target = gamma.recip();
    let g = |m: T| f_cubic(-m, beta) - target;
    let (mut lo, mut hi) = (T::zero(), T::one());
    while g(hi) < T::zero() {
        lo = hi;
        hi = hi + hi;
    }
    let tol = T::lit(1e-10).max(T::epsilon() * hi * T::lit(4.0));
    while hi - lo > tol {
        let mid = T::lit(0.5) * (lo + hi);
        if g(mid) < T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi.max(T::one())
}

/// Decay rates for `v = L_c w`: `r^2 + r - (gamma/c^2 + pi^2/(4 l^2)) = 0`,
/// where `l = c L` is the strip half-width in solver coordinates.
pub fn eigen_nu<T: Real>(params: &ModelParams<T>) -> EigenPair<T> {
    let c2 = params.c * params.c;
    EigenPair::from_kappa(params.gamma / c2 + transverse_kappa(params))
}

/// Decay rates for the auxiliary problem: `r^2 + r - (1 + pi^2/(4 l^2)) = 0`.
pub fn eigen_nu_star<T: Real>(params: &ModelParams<T>) -> EigenPair<T> {
    EigenPair::from_kappa(T::one() + transverse_kappa(params))
}

fn transverse_kappa<T: Real>(params: &ModelParams<T>) -> T {
    match params.solver_half_width() {
        Some(l) => {
            let k = T::PI() / (l + l);
            k * k
        }
        None => T::zero(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cubic_values() {
        let b = 0.25;
        assert_eq!(f_cubic(0.0, b), 0.0);
        assert_eq!(f_cubic(b, b), 0.0);
        assert_eq!(f_cubic(1.0, b), 0.0);
        assert_relative_eq!(f_cubic(0.5, b), 1.0 / 16.0, max_relative = 1e-15);
        assert_relative_eq!(f_cubic(-2.2, b), 17.248, max_relative = 1e-13);
    }

    #[test]
    fn potential_values_and_derivative() {
        let b = 0.25;
        assert_eq!(f_potential(0.0, b), 0.0);
        assert_relative_eq!(f_potential(1.0, b), -1.0 / 24.0, max_relative = 1e-14);
        // F' = -f by central differences on a deterministic sweep of [-3, 2]
        let eps = 1e-5;
        for i in 0..100 {
            let xi = -3.0 + 5.0 * (i as f64 + 0.37) / 100.0;
            let fd = (f_potential(xi + eps, b) - f_potential(xi - eps, b)) / (2.0 * eps);
            let exact = -f_cubic(xi, b);
            assert!((fd - exact).abs() <= 1e-8 * exact.abs().max(1.0), "xi={xi}");
        }
    }

    #[test]
    fn cubic_prime_matches_difference_quotient() {
        let b = 0.25;
        for i in 0..50 {
            let xi = -2.0 + 0.08 * i as f64;
            let fd = (f_cubic(xi + 1e-6, b) - f_cubic(xi - 1e-6, b)) / 2e-6;
            assert!((fd - f_cubic_prime(xi, b)).abs() < 1e-7);
        }
    }

    #[test]
    fn m1_for_table_parameters() {
        let m1: f64 = compute_m1(1.0 / 16.0, 0.25);
        // frozen from an independent bisection on M(M + 1/4)(1 + M) = 16
        assert!((m1 - 2.136_901_69).abs() < 1e-8, "m1 = {m1}");
        assert!((f_cubic(-m1, 0.25) - 16.0).abs() < 1e-8);
        // small forcing threshold: clamp to 1
        assert_eq!(compute_m1(3.0, 0.25), 1.0);
    }

    #[test]
    fn line_eigenpair() {
        let p = ModelParams::line(5e-4, 1.0 / 16.0, 0.25, 2.0).unwrap();
        let e = eigen_nu(&p);
        assert_relative_eq!(e.nu1, -1.015_388_2, epsilon = 1e-7);
        assert_relative_eq!(e.nu2, 0.015_388_2, epsilon = 1e-7);
        assert_relative_eq!(e.nu1 + e.nu2, -1.0, epsilon = 1e-12);
        assert_relative_eq!(e.nu1 * e.nu2, -p.gamma / 4.0, epsilon = 1e-12);
        let s = eigen_nu_star(&p);
        assert_relative_eq!(s.nu1, -0.5 * (1.0 + 5f64.sqrt()), epsilon = 1e-15);
        assert_relative_eq!(s.nu2, 0.5 * (5f64.sqrt() - 1.0), epsilon = 1e-15);
        assert_relative_eq!(s.nu1 * s.nu2, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn strip_eigenpair() {
        let p = ModelParams::strip(8.8e-4, 1.0 / 16.0, 0.25, 7.4067, 1.0).unwrap();
        let s = eigen_nu_star(&p);
        let l2 = 7.4067f64 * 7.4067;
        assert_relative_eq!(s.nu2, 0.5 * (-1.0 + (5.0 + std::f64::consts::PI.powi(2) / l2).sqrt()), epsilon = 1e-14);
        assert!((s.nu2 - 0.637_970_55).abs() < 1e-8);
        // a very wide strip recovers the 1D pair
        let wide = ModelParams::strip(5e-4, 1.0 / 16.0, 0.25, 2.0, 1e7).unwrap();
        let line = ModelParams::line(5e-4, 1.0 / 16.0, 0.25, 2.0).unwrap();
        assert_relative_eq!(eigen_nu(&wide).nu2, eigen_nu(&line).nu2, epsilon = 1e-12);
        for pair in [eigen_nu(&p), s] {
            assert!(pair.nu1 < -0.5 && pair.nu2 > 0.0);
        }
    }

    #[test]
    fn validation_rejects_bad_constants() {
        assert!(ModelParams::line(5e-4, 1.0 / 16.0, 0.6, 1.0).is_err());
        assert!(ModelParams::line(5e-4, 8.0, 0.25, 1.0).is_err());
        assert!(ModelParams::line(-1.0, 1.0 / 16.0, 0.25, 1.0).is_err());
        assert!(ModelParams::line(5e-4, 1.0 / 16.0, 0.25, 0.0).is_err());
        match ModelParams::line(5e-4, 1.0 / 16.0, 0.6, 1.0) {
            Err(Error::Validation { key, .. }) => assert_eq!(key, "beta"),
            other => panic!("{other:?}"),
        }
    }
}
