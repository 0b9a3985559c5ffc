//! Null coordinates and the weight functions Λ(u), Λ̄(ū).
//!
//! The optical functions are `u = (t - x)/2` and `ū = (t + x)/2`, so
//! `t = u + ū` and `x = ū - u`. On the characteristic grid (`dt = h`) the
//! level sets of `u` and `ū` are the lattice diagonals.
//!
//! Both weights are the same function of their argument,
//! `Λ(s) = (1 + s²)^{1+δ}`, evaluated as `exp((1+δ) log1p(s²))`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NullCoords {
    pub u: f64,
    pub ubar: f64,
}

impl NullCoords {
    pub fn t(&self) -> f64 {
        self.u + self.ubar
    }

    pub fn x(&self) -> f64 {
        self.ubar - self.u
    }
}

pub fn to_null_coords(t: f64, x: f64) -> Result<NullCoords> {
    if !t.is_finite() || !x.is_finite() {
        return Err(Error::Domain(format!("non-finite point (t, x) = ({t}, {x})")));
    }
    Ok(NullCoords {
        u: 0.5 * (t - x),
        ubar: 0.5 * (t + x),
    })
}

/// Decay exponent of the weights.
///
/// `WeightSpec::unit()` is a testing override with `Λ ≡ Λ̄ ≡ 1`, used to
/// check plain energy conservation of the linear scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightSpec {
    delta: f64,
    unit: bool,
}

impl WeightSpec {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Domain(format!(
                "delta must lie strictly inside (0, 1), got {delta}"
            )));
        }
        Ok(Self { delta, unit: false })
    }

    pub fn unit() -> Self {
        Self {
            delta: 0.0,
            unit: true,
        }
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn is_unit(&self) -> bool {
        self.unit
    }

    fn exponent(&self) -> f64 {
        if self.unit {
            0.0
        } else {
            1.0 + self.delta
        }
    }

    /// `Λ(s)^power`, without range checks. Hot-loop form.
    #[inline]
    pub fn lambda_pow(&self, s: f64, power: f64) -> f64 {
        if self.unit {
            return 1.0;
        }
        (power * self.exponent() * (s * s).ln_1p()).exp()
    }

    #[inline]
    pub fn lambda(&self, s: f64) -> f64 {
        self.lambda_pow(s, 1.0)
    }

    /// `∫_ℝ Λ(s)^{-1/2} ds = √π Γ(a - 1/2) / Γ(a)` with `a = (1+δ)/2`.
    ///
    /// Infinite for the unit weight.
    pub fn inverse_sqrt_integral(&self) -> f64 {
        if self.unit {
            return f64::INFINITY;
        }
        let a = 0.5 * self.exponent();
        std::f64::consts::PI.sqrt() * libm::tgamma(a - 0.5) / libm::tgamma(a)
    }
}

/// `Λ(s) = (1 + s²)^{1+δ}`; serves both Λ and Λ̄.
pub fn weight_value(w: &WeightSpec, s: f64) -> Result<f64> {
    if !s.is_finite() {
        return Err(Error::Domain(format!("non-finite optical coordinate {s}")));
    }
    let v = w.lambda(s);
    if !v.is_finite() {
        return Err(Error::WeightOverflow { s });
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn null_coords_examples() {
        assert_eq!(to_null_coords(0.0, 0.0).unwrap(), NullCoords { u: 0.0, ubar: 0.0 });
        assert_eq!(to_null_coords(2.0, 1.0).unwrap(), NullCoords { u: 0.5, ubar: 1.5 });
        assert_eq!(to_null_coords(1.0, 1.0).unwrap(), NullCoords { u: 0.0, ubar: 1.0 });
        assert!(to_null_coords(f64::NAN, 0.0).is_err());
        assert!(to_null_coords(0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn weight_examples() {
        let w = WeightSpec::new(0.5).unwrap();
        assert_eq!(weight_value(&w, 0.0).unwrap(), 1.0);
        let v = weight_value(&w, 1.0).unwrap();
        assert!((v - 2.0 * 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(weight_value(&w, -1.0).unwrap(), v);
    }

    #[test]
    fn delta_range_enforced() {
        assert!(WeightSpec::new(0.0).is_err());
        assert!(WeightSpec::new(1.0).is_err());
        assert!(WeightSpec::new(1.5).is_err());
        assert!(WeightSpec::new(f64::NAN).is_err());
        assert!(WeightSpec::new(0.999).is_ok());
    }

    #[test]
    fn overflow_is_reported() {
        let w = WeightSpec::new(0.9).unwrap();
        assert_eq!(
            weight_value(&w, 1e200),
            Err(Error::WeightOverflow { s: 1e200 })
        );
        assert!(weight_value(&w, 1e50).is_ok());
    }

    #[test]
    fn unit_weight_is_one() {
        let w = WeightSpec::unit();
        assert_eq!(weight_value(&w, 123.0).unwrap(), 1.0);
        assert!(w.inverse_sqrt_integral().is_infinite());
    }

    #[test]
    fn inverse_sqrt_integral_closed_form() {
        // δ = 1 limit is ∫ (1+s²)^{-1} = π; check a value inside the range
        // against brute-force midpoint sums with an analytic tail.
        let w = WeightSpec::new(0.5).unwrap();
        let n = 4_000_000;
        let r = 4000.0;
        let ds = 2.0 * r / n as f64;
        let mut sum = 0.0;
        for i in 0..n {
            let s = -r + (i as f64 + 0.5) * ds;
            sum += w.lambda_pow(s, -0.5) * ds;
        }
        // tail beyond R: ∫_R^∞ s^{-1.5}(1 + s^{-2})^{-0.75} ≈ 2 R^{-1/2}
        sum += 2.0 * 2.0 / r.sqrt();
        assert!((sum - w.inverse_sqrt_integral()).abs() < 1e-4, "{sum}");
    }

    proptest! {
        #[test]
        fn round_trip(t in -1e6f64..1e6, x in -1e6f64..1e6) {
            let c = to_null_coords(t, x).unwrap();
            let ulp_t = f64::EPSILON * t.abs().max(x.abs()).max(f64::MIN_POSITIVE);
            prop_assert!((c.t() - t).abs() <= ulp_t);
            prop_assert!((c.x() - x).abs() <= ulp_t);
        }

        #[test]
        fn weight_even_monotone(delta in 0.01f64..0.99, a in 0.0f64..1e3, b in 0.0f64..1e3) {
            let w = WeightSpec::new(delta).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let wl = weight_value(&w, lo).unwrap();
            let wh = weight_value(&w, hi).unwrap();
            prop_assert!(wl >= 1.0);
            prop_assert!(wh >= wl);
            prop_assert_eq!(weight_value(&w, -hi).unwrap(), wh);
        }
    }
}
