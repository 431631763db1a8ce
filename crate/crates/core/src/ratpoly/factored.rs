//! Rational arithmetic on factored carriers.
//!
//! The interconnection algebra chains 2x2 rational inverses; carried as
//! coefficient ratios, the intermediate degrees grow into the hundreds and
//! the common factors that must cancel drift apart numerically. Keeping
//! every function as `gain * prod(s - z) / prod(s - p)` makes products and
//! inverses exact on the shared factors, so only additions touch the
//! coefficient domain - and those run through the dd expansion in
//! [`super::dd`] before re-rooting.

use super::dd::{self, Dd};
use super::poly::COEFF_FLUSH_REL;
use super::rational::{cancel_pairs, sort_roots, RationalFunction};
use super::roots::{expand_from_roots_dd, roots, roots_of_dd};
use crate::error::{Error, Result};
use num_complex::Complex64;

/// Tolerance for cancelling coincident factors produced by the build chain.
pub const REDUCE_TOL: f64 = 1e-9;

/// `gain * prod(s - zeros) / prod(s - poles)`. The zero function is
/// `gain == 0` with empty root lists.
#[derive(Clone, Debug)]
pub struct Factored {
    zeros: Vec<Complex64>,
    poles: Vec<Complex64>,
    gain: f64,
}

impl Factored {
    pub fn new(zeros: Vec<Complex64>, poles: Vec<Complex64>, gain: f64) -> Factored {
        if gain == 0.0 {
            return Factored::zero();
        }
        Factored { zeros, poles, gain }
    }

    pub fn zero() -> Factored {
        Factored {
            zeros: vec![],
            poles: vec![],
            gain: 0.0,
        }
    }

    pub fn constant(c: f64) -> Factored {
        Factored::new(vec![], vec![], c)
    }

    /// The monomial `s`.
    pub fn s() -> Factored {
        Factored::new(vec![Complex64::new(0.0, 0.0)], vec![], 1.0)
    }

    pub fn is_zero(&self) -> bool {
        self.gain == 0.0
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn zeros(&self) -> &[Complex64] {
        &self.zeros
    }

    pub fn poles(&self) -> &[Complex64] {
        &self.poles
    }

    pub fn from_rational(rf: &RationalFunction) -> Result<Factored> {
        if rf.is_zero() {
            return Ok(Factored::zero());
        }
        let zeros = if rf.num().degree() == 0 {
            vec![]
        } else {
            roots(rf.num())?
        };
        let poles = if rf.den().degree() == 0 {
            vec![]
        } else {
            roots(rf.den())?
        };
        Ok(Factored::new(
            zeros,
            poles,
            rf.num().leading() / rf.den().leading(),
        ))
    }

    pub fn to_rational(&self) -> Result<RationalFunction> {
        if self.is_zero() {
            return Ok(RationalFunction::zero());
        }
        let num = super::roots::expand_from_roots(&self.zeros, self.gain);
        let den = super::roots::expand_from_roots(&self.poles, 1.0);
        RationalFunction::new(num, den)
    }

    pub fn mul(&self, rhs: &Factored) -> Factored {
        if self.is_zero() || rhs.is_zero() {
            return Factored::zero();
        }
        let mut zeros = self.zeros.clone();
        zeros.extend_from_slice(&rhs.zeros);
        let mut poles = self.poles.clone();
        poles.extend_from_slice(&rhs.poles);
        let mut out = Factored::new(zeros, poles, self.gain * rhs.gain);
        out.reduce(REDUCE_TOL);
        out
    }

    pub fn inv(&self) -> Result<Factored> {
        if self.is_zero() {
            return Err(Error::DivisionByZero);
        }
        Ok(Factored::new(
            self.poles.clone(),
            self.zeros.clone(),
            1.0 / self.gain,
        ))
    }

    pub fn neg(&self) -> Factored {
        Factored::new(self.zeros.clone(), self.poles.clone(), -self.gain)
    }

    pub fn scale(&self, k: f64) -> Factored {
        Factored::new(self.zeros.clone(), self.poles.clone(), self.gain * k)
    }

    /// Multiply by the monomial `s`.
    pub fn mul_s(&self) -> Factored {
        self.mul(&Factored::s())
    }

    pub fn add(&self, rhs: &Factored) -> Result<Factored> {
        if self.is_zero() {
            return Ok(rhs.clone());
        }
        if rhs.is_zero() {
            return Ok(self.clone());
        }
        // split denominators into shared and private factors
        let mut pa = self.poles.clone();
        let mut pb = rhs.poles.clone();
        let mut common: Vec<Complex64> = vec![];
        loop {
            let mut best: Option<(usize, usize, f64)> = None;
            for (i, x) in pa.iter().enumerate() {
                for (j, y) in pb.iter().enumerate() {
                    let d = (x - y).norm() / 1.0f64.max(y.norm());
                    if best.map_or(true, |(_, _, bd)| d < bd) {
                        best = Some((i, j, d));
                    }
                }
            }
            match best {
                Some((i, j, d)) if d <= REDUCE_TOL => {
                    let x = pa.remove(i);
                    pb.remove(j);
                    common.push(x);
                }
                _ => break,
            }
        }
        // numerator = ga * Za * Pb' + gb * Zb * Pa', in dd
        let na = dd::convolve(
            &expand_from_roots_dd(&self.zeros, self.gain),
            &expand_from_roots_dd(&pb, 1.0),
        );
        let nb = dd::convolve(
            &expand_from_roots_dd(&rhs.zeros, rhs.gain),
            &expand_from_roots_dd(&pa, 1.0),
        );
        let mut sum = dd::add_vec(&na, &nb);
        // relative flush against the pre-cancellation scale
        let scale = na
            .iter()
            .chain(nb.iter())
            .fold(0.0f64, |m, c| m.max(c.abs_hi()));
        if scale == 0.0 {
            return Ok(Factored::zero());
        }
        for c in &mut sum {
            if c.abs_hi() < COEFF_FLUSH_REL * COEFF_FLUSH_REL * scale {
                *c = Dd::ZERO;
            }
        }
        let max_sum = sum.iter().fold(0.0f64, |m, c| m.max(c.abs_hi()));
        if max_sum == 0.0 || max_sum < 1e-25 * scale {
            return Ok(Factored::zero());
        }
        while sum.len() > 1 && sum.last().unwrap().to_f64() == 0.0 {
            sum.pop();
        }
        let gain = sum.last().unwrap().to_f64();
        let zeros = if sum.len() == 1 {
            vec![]
        } else {
            roots_of_dd(&sum)?
        };
        let mut poles = common;
        poles.extend(pa);
        poles.extend(pb);
        let mut out = Factored::new(zeros, poles, gain);
        out.reduce(REDUCE_TOL);
        Ok(out)
    }

    pub fn sub(&self, rhs: &Factored) -> Result<Factored> {
        self.add(&rhs.neg())
    }

    /// Cancel zero/pole pairs closer than `tol` relative to `max(1, |pole|)`.
    pub fn reduce(&mut self, tol: f64) {
        if self.is_zero() {
            return;
        }
        sort_roots(&mut self.zeros);
        sort_roots(&mut self.poles);
        cancel_pairs(&mut self.zeros, &mut self.poles, tol);
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        let mut v = Complex64::new(self.gain, 0.0);
        for z in &self.zeros {
            v *= s - z;
        }
        for p in &self.poles {
            v /= s - p;
        }
        v
    }
}

/// 2x2 matrix of factored rationals; the workhorse of the interconnection
/// build. Entry reductions run after every operation.
#[derive(Clone, Debug)]
pub struct FactoredMatrix2 {
    pub e: [[Factored; 2]; 2],
}

impl FactoredMatrix2 {
    pub fn new(e: [[Factored; 2]; 2]) -> Self {
        FactoredMatrix2 { e }
    }

    pub fn add(&self, rhs: &FactoredMatrix2) -> Result<FactoredMatrix2> {
        Ok(FactoredMatrix2::new([
            [
                self.e[0][0].add(&rhs.e[0][0])?,
                self.e[0][1].add(&rhs.e[0][1])?,
            ],
            [
                self.e[1][0].add(&rhs.e[1][0])?,
                self.e[1][1].add(&rhs.e[1][1])?,
            ],
        ]))
    }

    pub fn sub(&self, rhs: &FactoredMatrix2) -> Result<FactoredMatrix2> {
        Ok(FactoredMatrix2::new([
            [
                self.e[0][0].sub(&rhs.e[0][0])?,
                self.e[0][1].sub(&rhs.e[0][1])?,
            ],
            [
                self.e[1][0].sub(&rhs.e[1][0])?,
                self.e[1][1].sub(&rhs.e[1][1])?,
            ],
        ]))
    }

    pub fn mul(&self, rhs: &FactoredMatrix2) -> Result<FactoredMatrix2> {
        let mut out = [
            [Factored::zero(), Factored::zero()],
            [Factored::zero(), Factored::zero()],
        ];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = self.e[i][0]
                    .mul(&rhs.e[0][j])
                    .add(&self.e[i][1].mul(&rhs.e[1][j]))?;
            }
        }
        Ok(FactoredMatrix2::new(out))
    }

    pub fn det(&self) -> Result<Factored> {
        self.e[0][0]
            .mul(&self.e[1][1])
            .sub(&self.e[0][1].mul(&self.e[1][0]))
    }

    /// Adjugate-over-determinant inverse.
    pub fn inv(&self) -> Result<FactoredMatrix2> {
        let det = self.det()?;
        if det.is_zero() {
            return Err(Error::SingularMatrix { det_norm: 0.0 });
        }
        let di = det.inv()?;
        Ok(FactoredMatrix2::new([
            [self.e[1][1].mul(&di), self.e[0][1].neg().mul(&di)],
            [self.e[1][0].neg().mul(&di), self.e[0][0].mul(&di)],
        ]))
    }

    /// Multiply every entry by the monomial `s`.
    pub fn mul_s(&self) -> FactoredMatrix2 {
        FactoredMatrix2::new([
            [self.e[0][0].mul_s(), self.e[0][1].mul_s()],
            [self.e[1][0].mul_s(), self.e[1][1].mul_s()],
        ])
    }

    pub fn eval(&self, s: Complex64) -> [[Complex64; 2]; 2] {
        [
            [self.e[0][0].eval(s), self.e[0][1].eval(s)],
            [self.e[1][0].eval(s), self.e[1][1].eval(s)],
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn product_cancels_shared_factor() {
        // (s+1)/(s+2) * (s+2)/(s+3) = (s+1)/(s+3)
        let a = Factored::new(vec![c(-1.0)], vec![c(-2.0)], 1.0);
        let b = Factored::new(vec![c(-2.0)], vec![c(-3.0)], 1.0);
        let p = a.mul(&b);
        assert_eq!(p.zeros().len(), 1);
        assert_eq!(p.poles().len(), 1);
        assert_abs_diff_eq!(p.zeros()[0].re, -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(p.poles()[0].re, -3.0, epsilon = 1e-14);
    }

    #[test]
    fn addition_extracts_common_denominator() {
        // 1/(s+1) + 1/(s+1) = 2/(s+1): degree must not double
        let a = Factored::new(vec![], vec![c(-1.0)], 1.0);
        let s = a.add(&a).unwrap();
        assert_eq!(s.poles().len(), 1);
        assert_abs_diff_eq!(s.gain(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn exact_cancellation_yields_zero() {
        let a = Factored::new(vec![c(-1.0)], vec![c(-2.0)], 3.0);
        let d = a.sub(&a).unwrap();
        assert!(d.is_zero());
    }

    #[test]
    fn structural_origin_zero_survives_addition() {
        // s/(s+1) + s/(s+2): numerator s(2s+3) keeps the exact origin root
        let a = Factored::new(vec![c(0.0)], vec![c(-1.0)], 1.0);
        let b = Factored::new(vec![c(0.0)], vec![c(-2.0)], 1.0);
        let s = a.add(&b).unwrap();
        assert!(s.zeros().iter().any(|z| z.re == 0.0 && z.im == 0.0));
    }

    #[test]
    fn matrix_inverse_times_itself_is_identity() {
        let m = FactoredMatrix2::new([
            [
                Factored::new(vec![c(-1.0)], vec![c(-2.0)], 1.0),
                Factored::constant(0.5),
            ],
            [
                Factored::new(vec![], vec![c(-3.0)], 2.0),
                Factored::new(vec![c(-4.0)], vec![c(-5.0)], 1.5),
            ],
        ]);
        let mi = m.inv().unwrap();
        let prod = m.mul(&mi).unwrap();
        let s = Complex64::new(0.3, 0.7);
        let v = prod.eval(s);
        assert_abs_diff_eq!(v[0][0].re, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(v[0][1].norm(), 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(v[1][0].norm(), 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(v[1][1].re, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn round_trip_through_rational() {
        let a = Factored::new(vec![c(-1.0), c(-6.0)], vec![c(-2.0), c(-4.0)], 2.5);
        let rf = a.to_rational().unwrap();
        let back = Factored::from_rational(&rf).unwrap();
        let s = Complex64::new(0.0, 1.3);
        assert_abs_diff_eq!(a.eval(s).re, back.eval(s).re, epsilon = 1e-12);
        assert_abs_diff_eq!(a.eval(s).im, back.eval(s).im, epsilon = 1e-12);
    }
}
