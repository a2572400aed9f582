//! The weighted energy functional, its directional derivative and the
//! multiplier of the norm constraint.

use crate::error::Result;
use crate::grid::{check_same_grid, gradient_product, inner_l2exp, weighted_integral, Profile};
use crate::model::{f_cubic, f_potential, ModelParams};
use crate::scalar::Real;

/// The three quadrature terms of the energy and their sum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyBreakdown<T> {
    /// `integral e^x (d c^2 / 2) |grad w|^2`
    pub gradient_term: T,
    /// `integral e^x w (L_c w) / 2`
    pub nonlocal_term: T,
    /// `integral e^x F(w)`
    pub potential_term: T,
    pub total: T,
}

impl<T: Real> EnergyBreakdown<T> {
    fn new(gradient_term: T, nonlocal_term: T, potential_term: T) -> Self {
        Self {
            gradient_term,
            nonlocal_term,
            potential_term,
            total: gradient_term + nonlocal_term + potential_term,
        }
    }
}

/// Energy of `w` given `v = L_c w`.
pub fn energy_jc<T: Real>(w: &Profile<T>, v: &Profile<T>, params: &ModelParams<T>) -> Result<EnergyBreakdown<T>> {
    check_same_grid(w, v)?;
    let half = T::lit(0.5);
    let gradient = half * params.dc2() * gradient_product(w, w)?;
    let nonlocal = half * inner_l2exp(w, v)?;
    let potential = weighted_integral(&w.map(|x| f_potential(x, params.beta)))?;
    Ok(EnergyBreakdown::new(gradient, nonlocal, potential))
}

/// Derivative of the energy at `w` in direction `phi`:
/// `integral e^x (d c^2 grad w . grad phi + v phi - f(w) phi)`.
pub fn djc_dir<T: Real>(w: &Profile<T>, v: &Profile<T>, phi: &Profile<T>, params: &ModelParams<T>) -> Result<T> {
    check_same_grid(w, v)?;
    check_same_grid(w, phi)?;
    let beta = params.beta;
    // v - f(w) pairs with phi under one quadrature
    let forcing = Profile::from_parts(
        w.grid().clone(),
        w.samples()
            .iter()
            .zip(v.samples())
            .map(|(&wi, &vi)| vi - f_cubic(wi, beta))
            .collect(),
    );
    Ok(params.dc2() * gradient_product(w, phi)? + inner_l2exp(&forcing, phi)?)
}

/// Multiplier of the constraint `|w|^2 = 2`: `-dJ(w) w / 2`.
pub fn mu_multiplier<T: Real>(w: &Profile<T>, v: &Profile<T>, params: &ModelParams<T>) -> Result<T> {
    Ok(-T::lit(0.5) * djc_dir(w, v, w, params)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::nonlocal::apply_lc;

    fn params(c: f64) -> ModelParams<f64> {
        ModelParams::line(5e-4, 1.0 / 16.0, 0.25, c).unwrap()
    }

    fn bump(g: &Grid<f64>, center: f64, width: f64) -> Profile<f64> {
        Profile::from_fn(g.clone(), |x: f64, _| (-((x - center) / width).powi(2)).exp()).unwrap()
    }

    #[test]
    fn zero_profile_has_zero_energy() {
        let g = Grid::line(-40.0, 0.05, 800).unwrap();
        let p = params(5.0);
        let w = Profile::zeros(g);
        let v = apply_lc(&w, &p).unwrap();
        let e = energy_jc(&w, &v, &p).unwrap();
        assert_eq!(e.total, 0.0);
        assert_eq!(mu_multiplier(&w, &v, &p).unwrap(), 0.0);
    }

    #[test]
    fn flipping_a_negative_profile_lowers_the_energy() {
        let g = Grid::line(-40.0, 0.05, 800).unwrap();
        let p = params(5.0);
        let w = bump(&g, -5.0, 2.0).map(|x| -0.8 * x);
        let flipped = w.map(|x| -x);
        let e = energy_jc(&w, &apply_lc(&w, &p).unwrap(), &p).unwrap();
        let ef = energy_jc(&flipped, &apply_lc(&flipped, &p).unwrap(), &p).unwrap();
        assert!(ef.total < e.total);
        assert!((ef.gradient_term - e.gradient_term).abs() <= 1e-14 * e.gradient_term);
        assert!((ef.nonlocal_term - e.nonlocal_term).abs() <= 1e-12 * e.nonlocal_term.abs());
    }

    #[test]
    fn gradient_term_is_linear_in_d() {
        let g = Grid::line(-40.0, 0.05, 800).unwrap();
        let (p1, p2) = (params(5.0), params(5.0).with_d(8e-4).unwrap());
        let w = bump(&g, -3.0, 1.5);
        let v = apply_lc(&w, &p1).unwrap();
        let (e1, e2) = (energy_jc(&w, &v, &p1).unwrap(), energy_jc(&w, &v, &p2).unwrap());
        let expected = (8e-4 - 5e-4) / 5e-4 * e1.gradient_term;
        assert!(((e2.total - e1.total) - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn derivative_is_linear_in_direction() {
        let g = Grid::line(-40.0, 0.05, 800).unwrap();
        let p = params(5.0);
        let w = bump(&g, -3.0, 1.5);
        let v = apply_lc(&w, &p).unwrap();
        let (a, b) = (bump(&g, -6.0, 3.0), bump(&g, 0.0, 0.7));
        let combo = a.lin_comb(2.5, &b, 1.0).unwrap();
        let lhs = djc_dir(&w, &v, &combo, &p).unwrap();
        let rhs = 2.5 * djc_dir(&w, &v, &a, &p).unwrap() + djc_dir(&w, &v, &b, &p).unwrap();
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs());
        assert_eq!(djc_dir(&w, &v, &Profile::zeros(g), &p).unwrap(), 0.0);
    }
}
