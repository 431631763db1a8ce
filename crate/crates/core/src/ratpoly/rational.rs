//! Rational functions as polynomial ratios with a monic denominator.

use super::poly::Polynomial;
use super::roots::{expand_from_roots, roots};
use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// `num(s) / den(s)` with `den` monic. No implicit cancellation: common
/// factors survive arithmetic and are only removed by [`RationalFunction::minreal`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RationalFunction {
    num: Polynomial,
    den: Polynomial,
}

impl RationalFunction {
    pub fn new(num: Polynomial, den: Polynomial) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::DivisionByZero);
        }
        let lead = den.leading();
        Ok(RationalFunction {
            num: num.scale(1.0 / lead),
            den: den.scale(1.0 / lead),
        })
    }

    pub fn zero() -> Self {
        RationalFunction {
            num: Polynomial::zero(),
            den: Polynomial::one(),
        }
    }

    pub fn one() -> Self {
        RationalFunction {
            num: Polynomial::one(),
            den: Polynomial::one(),
        }
    }

    pub fn constant(c: f64) -> Self {
        RationalFunction {
            num: Polynomial::constant(c),
            den: Polynomial::one(),
        }
    }

    pub fn from_poly(p: Polynomial) -> Self {
        RationalFunction {
            num: p,
            den: Polynomial::one(),
        }
    }

    pub fn num(&self) -> &Polynomial {
        &self.num
    }

    pub fn den(&self) -> &Polynomial {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    /// `num` degree <= `den` degree.
    pub fn is_proper(&self) -> bool {
        self.is_zero() || self.num.degree() <= self.den.degree()
    }

    pub fn add(&self, rhs: &RationalFunction) -> RationalFunction {
        let num = &(&self.num * &rhs.den) + &(&rhs.num * &self.den);
        let den = &self.den * &rhs.den;
        RationalFunction::new(num, den).expect("nonzero denominators")
    }

    pub fn sub(&self, rhs: &RationalFunction) -> RationalFunction {
        self.add(&rhs.neg())
    }

    pub fn mul(&self, rhs: &RationalFunction) -> RationalFunction {
        RationalFunction::new(&self.num * &rhs.num, &self.den * &rhs.den)
            .expect("nonzero denominators")
    }

    pub fn div(&self, rhs: &RationalFunction) -> Result<RationalFunction> {
        if rhs.is_zero() {
            return Err(Error::DivisionByZero);
        }
        RationalFunction::new(&self.num * &rhs.den, &self.den * &rhs.num)
    }

    pub fn inv(&self) -> Result<RationalFunction> {
        if self.is_zero() {
            return Err(Error::DivisionByZero);
        }
        RationalFunction::new(self.den.clone(), self.num.clone())
    }

    pub fn neg(&self) -> RationalFunction {
        RationalFunction {
            num: -&self.num,
            den: self.den.clone(),
        }
    }

    pub fn scale(&self, k: f64) -> RationalFunction {
        RationalFunction {
            num: self.num.scale(k),
            den: self.den.clone(),
        }
    }

    /// Horner evaluation; errors when `s` is too close to a pole.
    pub fn evaluate(&self, s: Complex64) -> Result<Complex64> {
        let d = self.den.eval_complex(s);
        let scale = self.den.max_abs_coeff() * (1.0 + s.norm()).powi(self.den.degree() as i32);
        if d.norm() <= 1e-12 * scale.max(1.0) * 1e-2 {
            return Err(Error::PoleProximity {
                point: format!("{s}"),
            });
        }
        Ok(self.num.eval_complex(s) / d)
    }

    /// Cancel pole/zero pairs closer than `tol` relative to `max(1, |root|)`,
    /// greedily by ascending pair distance, then re-expand from the
    /// surviving roots.
    pub fn minreal(&self, tol: f64) -> Result<RationalFunction> {
        if self.is_zero() || self.num.degree() == 0 || self.den.degree() == 0 {
            return Ok(self.clone());
        }
        let mut zeros = roots(&self.num)?;
        let mut poles = roots(&self.den)?;
        sort_roots(&mut zeros);
        sort_roots(&mut poles);
        cancel_pairs(&mut zeros, &mut poles, tol);
        let num = expand_from_roots(&zeros, self.num.leading());
        let den = expand_from_roots(&poles, self.den.leading());
        RationalFunction::new(num, den)
    }

    pub fn degrees(&self) -> (usize, usize) {
        (self.num.degree(), self.den.degree())
    }
}

/// Deterministic ordering: by real part, then imaginary part.
pub(crate) fn sort_roots(rts: &mut [Complex64]) {
    rts.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
}

/// Repeatedly remove the globally nearest (zero, pole) pair while its
/// distance is within `tol * max(1, |pole|)`. Conjugate partners of a
/// cancelled complex pair are removed with it to preserve symmetry.
pub(crate) fn cancel_pairs(zeros: &mut Vec<Complex64>, poles: &mut Vec<Complex64>, tol: f64) {
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for (i, z) in zeros.iter().enumerate() {
            for (j, p) in poles.iter().enumerate() {
                let d = (z - p).norm() / 1.0f64.max(p.norm());
                if best.map_or(true, |(_, _, bd)| d < bd) {
                    best = Some((i, j, d));
                }
            }
        }
        match best {
            Some((i, j, d)) if d <= tol => {
                let z = zeros.remove(i);
                let p = poles.remove(j);
                if z.im != 0.0 || p.im != 0.0 {
                    remove_nearest(zeros, z.conj());
                    remove_nearest(poles, p.conj());
                }
            }
            _ => return,
        }
    }
}

fn remove_nearest(list: &mut Vec<Complex64>, target: Complex64) {
    if let Some((idx, _)) = list
        .iter()
        .enumerate()
        .map(|(i, r)| (i, (r - target).norm()))
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
    {
        list.remove(idx);
    }
}

/// Factored view of a rational function: poles, zeros and the ratio of
/// leading coefficients after monic factorization.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PoleZeroSet {
    pub poles: Vec<Complex64>,
    pub zeros: Vec<Complex64>,
    pub gain: f64,
}

impl PoleZeroSet {
    pub fn from_rational(rf: &RationalFunction) -> Result<PoleZeroSet> {
        let zeros = if rf.num().degree() == 0 {
            vec![]
        } else {
            let mut z = roots(rf.num())?;
            sort_roots(&mut z);
            z
        };
        let poles = if rf.den().degree() == 0 {
            vec![]
        } else {
            let mut p = roots(rf.den())?;
            sort_roots(&mut p);
            p
        };
        Ok(PoleZeroSet {
            poles,
            zeros,
            gain: rf.num().leading() / rf.den().leading(),
        })
    }

    pub fn to_rational(&self) -> Result<RationalFunction> {
        RationalFunction::new(
            expand_from_roots(&self.zeros, self.gain),
            expand_from_roots(&self.poles, 1.0),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn rf(num: &[f64], den: &[f64]) -> RationalFunction {
        RationalFunction::new(Polynomial::new(num.to_vec()), Polynomial::new(den.to_vec()))
            .unwrap()
    }

    #[test]
    fn self_division_reduces_to_one() {
        let a = rf(&[1.0, 2.0], &[3.0, 1.0]);
        let q = a.div(&a).unwrap().minreal(1e-9).unwrap();
        assert_eq!(q.num().coeffs(), &[1.0]);
        assert_eq!(q.den().coeffs(), &[1.0]);
    }

    #[test]
    fn like_denominator_addition() {
        // 1/(1+Ts) + 1/(1+Ts) = 2/(1+Ts), T = 0.5
        let a = rf(&[1.0], &[1.0, 0.5]);
        let s = a.add(&a).minreal(1e-9).unwrap();
        let expect = rf(&[2.0], &[1.0, 0.5]);
        for (c, e) in s.num().coeffs().iter().zip(expect.num().coeffs()) {
            assert_abs_diff_eq!(c, e, epsilon = 1e-12);
        }
        assert_eq!(s.den().degree(), 1);
    }

    #[test]
    fn reciprocal_swaps() {
        let a = rf(&[2.0, 1.0], &[3.0, 1.0]);
        let inv = a.inv().unwrap();
        assert_eq!(inv.num().coeffs(), &[3.0, 1.0]);
        assert_eq!(inv.den().coeffs(), &[2.0, 1.0]);
    }

    #[test]
    fn minreal_exact_common_root() {
        // (s+1)(s+2) / (s+1)(s+3) -> (s+2)/(s+3)
        let num = &Polynomial::new(vec![1.0, 1.0]) * &Polynomial::new(vec![2.0, 1.0]);
        let den = &Polynomial::new(vec![1.0, 1.0]) * &Polynomial::new(vec![3.0, 1.0]);
        let r = RationalFunction::new(num, den).unwrap().minreal(1e-3).unwrap();
        assert_abs_diff_eq!(r.num().coeffs()[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.den().coeffs()[0], 3.0, epsilon = 1e-12);
        assert_eq!(r.degrees(), (1, 1));
    }

    #[test]
    fn minreal_near_root_within_tol() {
        // (s+1.0005)(s+2) / ((s+1)(s+3)) at tol 1e-3 cancels the near pair
        let num = &Polynomial::new(vec![1.0005, 1.0]) * &Polynomial::new(vec![2.0, 1.0]);
        let den = &Polynomial::new(vec![1.0, 1.0]) * &Polynomial::new(vec![3.0, 1.0]);
        let r = RationalFunction::new(num.clone(), den.clone()).unwrap();
        let reduced = r.minreal(1e-3).unwrap();
        assert_eq!(reduced.degrees(), (1, 1));
        assert_abs_diff_eq!(reduced.den().coeffs()[0], 3.0, epsilon = 1e-9);
        // below tolerance the function is untouched
        let untouched = r.minreal(1e-5).unwrap();
        assert_eq!(untouched.degrees(), (2, 2));
    }

    #[test]
    fn evaluate_first_order() {
        let a = rf(&[1.0], &[1.0, 1.0]);
        let v = a.evaluate(Complex64::new(0.0, 1.0)).unwrap();
        assert_abs_diff_eq!(v.re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(v.im, -0.5, epsilon = 1e-15);
    }

    #[test]
    fn evaluate_near_pole_is_rejected() {
        let a = rf(&[1.0], &[1.0, 1.0]);
        assert!(a.evaluate(Complex64::new(-1.0, 0.0)).is_err());
    }

    #[test]
    fn dc_is_ratio_of_constants() {
        let a = rf(&[2.0, 1.0], &[4.0, 1.0]);
        let v = a.evaluate(Complex64::new(0.0, 0.0)).unwrap();
        assert_abs_diff_eq!(v.re, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn two_path_evaluation_agrees() {
        // (s+2)/(s^2+s+1) at 2i via coefficients and via factored form
        let a = rf(&[2.0, 1.0], &[1.0, 1.0, 1.0]);
        let s = Complex64::new(0.0, 2.0);
        let direct = a.evaluate(s).unwrap();
        let pz = PoleZeroSet::from_rational(&a).unwrap();
        let mut v = Complex64::new(pz.gain, 0.0);
        for z in &pz.zeros {
            v *= s - z;
        }
        for p in &pz.poles {
            v /= s - p;
        }
        assert_abs_diff_eq!(direct.re, v.re, epsilon = 1e-12);
        assert_abs_diff_eq!(direct.im, v.im, epsilon = 1e-12);
    }
}
