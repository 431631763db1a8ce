//! 2x2 matrices of rational functions.

use super::factored::{Factored, FactoredMatrix2};
use super::rational::RationalFunction;
use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// 2x2 rational matrix. The s-domain system here is strictly 2x2, so no
/// generic dimension machinery is warranted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatMatrix2 {
    pub e: [[RationalFunction; 2]; 2],
}

impl RatMatrix2 {
    pub fn new(e: [[RationalFunction; 2]; 2]) -> Self {
        RatMatrix2 { e }
    }

    pub fn identity() -> Self {
        RatMatrix2::new([
            [RationalFunction::one(), RationalFunction::zero()],
            [RationalFunction::zero(), RationalFunction::one()],
        ])
    }

    pub fn zero() -> Self {
        RatMatrix2::new([
            [RationalFunction::zero(), RationalFunction::zero()],
            [RationalFunction::zero(), RationalFunction::zero()],
        ])
    }

    pub fn add(&self, rhs: &RatMatrix2) -> RatMatrix2 {
        let f = |i: usize, j: usize| self.e[i][j].add(&rhs.e[i][j]);
        RatMatrix2::new([[f(0, 0), f(0, 1)], [f(1, 0), f(1, 1)]])
    }

    pub fn sub(&self, rhs: &RatMatrix2) -> RatMatrix2 {
        let f = |i: usize, j: usize| self.e[i][j].sub(&rhs.e[i][j]);
        RatMatrix2::new([[f(0, 0), f(0, 1)], [f(1, 0), f(1, 1)]])
    }

    /// Matrix product, carried in factored form so shared denominator
    /// factors stay exact (coefficient-domain products of the same content
    /// drift apart and then refuse to cancel).
    pub fn mul(&self, rhs: &RatMatrix2) -> RatMatrix2 {
        match (|| -> Result<RatMatrix2> {
            let p = self.to_factored()?.mul(&rhs.to_factored()?)?;
            RatMatrix2::from_factored(&p)
        })() {
            Ok(m) => m,
            // zero denominators cannot arise from valid operands
            Err(_) => {
                let f = |i: usize, j: usize| {
                    self.e[i][0]
                        .mul(&rhs.e[0][j])
                        .add(&self.e[i][1].mul(&rhs.e[1][j]))
                };
                RatMatrix2::new([[f(0, 0), f(0, 1)], [f(1, 0), f(1, 1)]])
            }
        }
    }

    pub fn det(&self) -> RationalFunction {
        self.e[0][0]
            .mul(&self.e[1][1])
            .sub(&self.e[0][1].mul(&self.e[1][0]))
    }

    /// Adjugate-over-determinant inverse, evaluated on factored carriers
    /// with cleanup at 1e-9.
    pub fn inv(&self) -> Result<RatMatrix2> {
        let m = self.to_factored()?;
        let inv = m.inv().map_err(|_| Error::SingularMatrix {
            det_norm: self.det().num().max_abs_coeff(),
        })?;
        RatMatrix2::from_factored(&inv)
    }

    pub fn minreal(&self, tol: f64) -> Result<RatMatrix2> {
        let f = |i: usize, j: usize| self.e[i][j].minreal(tol);
        Ok(RatMatrix2::new([
            [f(0, 0)?, f(0, 1)?],
            [f(1, 0)?, f(1, 1)?],
        ]))
    }

    pub fn evaluate(&self, s: Complex64) -> Result<[[Complex64; 2]; 2]> {
        Ok([
            [self.e[0][0].evaluate(s)?, self.e[0][1].evaluate(s)?],
            [self.e[1][0].evaluate(s)?, self.e[1][1].evaluate(s)?],
        ])
    }

    pub(crate) fn to_factored(&self) -> Result<FactoredMatrix2> {
        Ok(FactoredMatrix2::new([
            [
                Factored::from_rational(&self.e[0][0])?,
                Factored::from_rational(&self.e[0][1])?,
            ],
            [
                Factored::from_rational(&self.e[1][0])?,
                Factored::from_rational(&self.e[1][1])?,
            ],
        ]))
    }

    pub(crate) fn from_factored(m: &FactoredMatrix2) -> Result<RatMatrix2> {
        Ok(RatMatrix2::new([
            [m.e[0][0].to_rational()?, m.e[0][1].to_rational()?],
            [m.e[1][0].to_rational()?, m.e[1][1].to_rational()?],
        ]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratpoly::Polynomial;
    use approx::assert_abs_diff_eq;

    fn rf(num: &[f64], den: &[f64]) -> RationalFunction {
        RationalFunction::new(Polynomial::new(num.to_vec()), Polynomial::new(den.to_vec()))
            .unwrap()
    }

    #[test]
    fn identity_inverts_to_identity() {
        let m = RatMatrix2::identity();
        let mi = m.inv().unwrap();
        assert_eq!(mi, RatMatrix2::identity());
    }

    #[test]
    fn diagonal_inverse_is_reciprocal() {
        // diag(1/(1+s), 2) -> diag(1+s, 1/2)
        let m = RatMatrix2::new([
            [rf(&[1.0], &[1.0, 1.0]), RationalFunction::zero()],
            [RationalFunction::zero(), RationalFunction::constant(2.0)],
        ]);
        let mi = m.inv().unwrap();
        assert_eq!(mi.e[0][0].num().coeffs(), &[1.0, 1.0]);
        assert_eq!(mi.e[0][0].den().coeffs(), &[1.0]);
        assert_abs_diff_eq!(mi.e[1][1].num().coeffs()[0], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn product_with_inverse_reduces_to_identity() {
        let m = RatMatrix2::new([
            [rf(&[1.0, 2.0, 1.0], &[2.0, 1.0, 1.0]), rf(&[0.5, 0.2], &[1.0, 1.0])],
            [rf(&[1.0], &[1.0, 3.0, 1.0]), rf(&[2.0, 0.0, 1.0], &[1.0, 1.0, 1.0])],
        ]);
        let mi = m.inv().unwrap();
        let prod = m.mul(&mi).minreal(1e-8).unwrap();
        let s = Complex64::new(0.21, 1.3);
        let v = prod.evaluate(s).unwrap();
        assert_abs_diff_eq!(v[0][0].re, 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(v[0][0].im, 0.0, epsilon = 1e-8);
        assert_abs_diff_eq!(v[0][1].norm(), 0.0, epsilon = 1e-8);
        assert_abs_diff_eq!(v[1][0].norm(), 0.0, epsilon = 1e-8);
        assert_abs_diff_eq!(v[1][1].re, 1.0, epsilon = 1e-8);
    }
}
