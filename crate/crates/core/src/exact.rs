//! Exact energies for `alpha = 0` and rational `J(1)`.
//!
//! Every coupling `1/n^2` is rational and every half-line tail equals
//! `zeta(2)` minus a rational partial sum, so a relative energy is exactly
//! `q + k zeta(2)` with `q` rational and `k` an integer.

use std::ops::{Add, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::model::SpinConfiguration;
use crate::triangle::TriangleConfiguration;

/// Largest window handled in exact mode.
pub const EXACT_MAX_SITES: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactEnergy {
    pub rational: BigRational,
    pub zeta2: i64,
}

impl ExactEnergy {
    pub fn zero() -> Self {
        Self {
            rational: BigRational::zero(),
            zeta2: 0,
        }
    }

    pub fn to_f64(&self) -> f64 {
        let zeta2 = std::f64::consts::PI * std::f64::consts::PI / 6.0;
        self.rational.to_f64().unwrap_or(f64::NAN) + self.zeta2 as f64 * zeta2
    }
}

impl Add for ExactEnergy {
    type Output = ExactEnergy;
    fn add(self, rhs: ExactEnergy) -> ExactEnergy {
        ExactEnergy {
            rational: self.rational + rhs.rational,
            zeta2: self.zeta2 + rhs.zeta2,
        }
    }
}

impl Sub for ExactEnergy {
    type Output = ExactEnergy;
    fn sub(self, rhs: ExactEnergy) -> ExactEnergy {
        ExactEnergy {
            rational: self.rational - rhs.rational,
            zeta2: self.zeta2 - rhs.zeta2,
        }
    }
}

/// Exact couplings `J(n) = 1/n^2`, `J(1) = j1`, and tails for windows up to
/// [`EXACT_MAX_SITES`].
#[derive(Debug, Clone)]
pub struct ExactCouplings {
    couplings: Vec<BigRational>,
    // rational part of tail(d); each tail also carries one zeta(2)
    tail_rational: Vec<BigRational>,
}

impl ExactCouplings {
    pub fn new(j1: BigRational) -> Self {
        let n = EXACT_MAX_SITES;
        let mut couplings = vec![BigRational::zero(); n + 1];
        couplings[1] = j1.clone();
        for (k, slot) in couplings.iter_mut().enumerate().skip(2) {
            *slot = BigRational::new(BigInt::from(1), BigInt::from(k * k));
        }
        let mut tail_rational = vec![BigRational::zero(); n + 2];
        // tail(1) = j1 + zeta(2) - 1
        tail_rational[1] = j1 - BigRational::from_integer(BigInt::from(1));
        let mut partial = BigRational::zero();
        for (d, slot) in tail_rational.iter_mut().enumerate().skip(2) {
            partial += BigRational::new(BigInt::from(1), BigInt::from((d - 1) * (d - 1)));
            *slot = -partial.clone();
        }
        Self {
            couplings,
            tail_rational,
        }
    }

    pub fn energy(&self, values: &[i8]) -> Result<ExactEnergy> {
        let len = values.len();
        if len > EXACT_MAX_SITES {
            return Err(Error::ExactModeUnsupported {
                alpha: 0.0,
                sites: len,
                max: EXACT_MAX_SITES,
            });
        }
        let mut e = ExactEnergy::zero();
        for i in 0..len {
            if values[i] == -1 {
                e.rational += &self.tail_rational[i + 1];
                e.rational += &self.tail_rational[len - i];
                e.zeta2 += 2;
            }
            for j in i + 1..len {
                if values[i] != values[j] {
                    e.rational += &self.couplings[j - i];
                }
            }
        }
        Ok(e)
    }

    pub fn triangle_energy(&self, tris: &TriangleConfiguration) -> Result<ExactEnergy> {
        let Some(window) = tris.hull() else {
            return Ok(ExactEnergy::zero());
        };
        let sigma = crate::triangle::spins_from_triangles(tris, window)?;
        self.energy(sigma.values())
    }
}

/// `h(sigma)` in exact arithmetic; requires `alpha = 0`.
pub fn exact_relative_energy(sigma: &SpinConfiguration, alpha: f64, j1: &BigRational) -> Result<ExactEnergy> {
    let sites = sigma.window().len();
    if alpha != 0.0 || sites > EXACT_MAX_SITES {
        return Err(Error::ExactModeUnsupported {
            alpha,
            sites,
            max: EXACT_MAX_SITES,
        });
    }
    ExactCouplings::new(j1.clone()).energy(sigma.values())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{relative_energy, ModelParams, Window};
    use approx::assert_abs_diff_eq;

    fn rational(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn single_flip_is_two_zeta2() {
        let sigma = SpinConfiguration::with_minus(Window::new(-2, 2).unwrap(), [0]);
        let e = exact_relative_energy(&sigma, 0.0, &rational(1, 1)).unwrap();
        assert_eq!(e.rational, BigRational::zero());
        assert_eq!(e.zeta2, 2);
    }

    #[test]
    fn agrees_with_floating_point() {
        let window = Window::new(0, 11).unwrap();
        let params = ModelParams::new(0.0, 2.5).unwrap();
        for bits in [0b1u64, 0b110, 0b1011_0110_0101, 0b1000_0000_0001] {
            let sigma = SpinConfiguration::from_bits(window, bits);
            let exact = exact_relative_energy(&sigma, 0.0, &rational(5, 2)).unwrap();
            assert_abs_diff_eq!(exact.to_f64(), relative_energy(&sigma, &params), epsilon = 1e-11);
        }
    }

    #[test]
    fn rejects_unsupported_inputs() {
        let sigma = SpinConfiguration::with_minus(Window::new(0, 3).unwrap(), [1]);
        assert!(exact_relative_energy(&sigma, 0.5, &rational(1, 1)).is_err());
        let big = SpinConfiguration::all_plus(Window::new(0, 40).unwrap());
        assert!(exact_relative_energy(&big, 0.0, &rational(1, 1)).is_err());
    }
}
