//! Compensated double-double arithmetic for polynomial expansion.
//!
//! Coefficient construction from root products, and the additions inside
//! rational-function sums, suffer catastrophic cancellation in plain f64:
//! a structurally zero constant term comes out as O(eps) noise, which a
//! subsequent root extraction turns into a spurious ~sqrt(eps) root pair.
//! Carrying ~106 bits through expansion and addition pushes that noise to
//! ~1e-30 of the coefficient scale, where the relative flush threshold
//! removes it exactly.

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let err = b - (s - a);
    (s, err)
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let err = a.mul_add(b, -p);
    (p, err)
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    #[inline]
    pub fn from_f64(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    #[inline]
    pub fn add(self, rhs: Dd) -> Dd {
        let (s1, s2) = two_sum(self.hi, rhs.hi);
        let s2 = s2 + self.lo + rhs.lo;
        let (hi, lo) = quick_two_sum(s1, s2);
        Dd { hi, lo }
    }

    #[inline]
    pub fn sub(self, rhs: Dd) -> Dd {
        self.add(rhs.neg())
    }

    #[inline]
    pub fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    #[inline]
    pub fn mul(self, rhs: Dd) -> Dd {
        let (p1, p2) = two_prod(self.hi, rhs.hi);
        let p2 = p2 + self.hi * rhs.lo + self.lo * rhs.hi;
        let (hi, lo) = quick_two_sum(p1, p2);
        Dd { hi, lo }
    }

    #[inline]
    pub fn mul_f64(self, rhs: f64) -> Dd {
        let (p1, p2) = two_prod(self.hi, rhs);
        let p2 = p2 + self.lo * rhs;
        let (hi, lo) = quick_two_sum(p1, p2);
        Dd { hi, lo }
    }

    #[inline]
    pub fn abs_hi(self) -> f64 {
        self.hi.abs()
    }
}

/// Multiply two dd coefficient vectors (ascending degree).
pub fn convolve(a: &[Dd], b: &[Dd]) -> Vec<Dd> {
    if a.is_empty() || b.is_empty() {
        return vec![];
    }
    let mut out = vec![Dd::ZERO; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] = out[i + j].add(ai.mul(bj));
        }
    }
    out
}

/// Elementwise sum, padding the shorter operand.
pub fn add_vec(a: &[Dd], b: &[Dd]) -> Vec<Dd> {
    let n = a.len().max(b.len());
    let mut out = vec![Dd::ZERO; n];
    for (i, slot) in out.iter_mut().enumerate() {
        let x = a.get(i).copied().unwrap_or(Dd::ZERO);
        let y = b.get(i).copied().unwrap_or(Dd::ZERO);
        *slot = x.add(y);
    }
    out
}

/// Horner evaluation of a dd-coefficient polynomial at a complex point,
/// in dd precision componentwise. Used for root polishing.
pub fn eval_complex(coeffs: &[Dd], re: f64, im: f64) -> (f64, f64) {
    let mut acc_re = Dd::ZERO;
    let mut acc_im = Dd::ZERO;
    for &c in coeffs.iter().rev() {
        // acc = acc * s + c
        let nre = acc_re.mul_f64(re).sub(acc_im.mul_f64(im)).add(c);
        let nim = acc_re.mul_f64(im).add(acc_im.mul_f64(re));
        acc_re = nre;
        acc_im = nim;
    }
    (acc_re.to_f64(), acc_im.to_f64())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cancellation_is_exact() {
        // (1 + 2^-60) - 1 is lost in f64 but kept in dd
        let a = Dd::from_f64(1.0).add(Dd {
            hi: (2f64).powi(-60),
            lo: 0.0,
        });
        let d = a.sub(Dd::from_f64(1.0));
        assert_eq!(d.to_f64(), (2f64).powi(-60));
    }

    #[test]
    fn convolution_matches_f64_for_benign_input() {
        let a = [Dd::from_f64(1.0), Dd::from_f64(2.0)];
        let b = [Dd::from_f64(3.0), Dd::from_f64(4.0)];
        let c = convolve(&a, &b);
        let got: Vec<f64> = c.iter().map(|d| d.to_f64()).collect();
        assert_eq!(got, vec![3.0, 10.0, 8.0]);
    }

    #[test]
    fn structural_zero_survives_expansion() {
        // (x - 1)(x + 1) + (1 - x^2) must be exactly zero in every coefficient
        let p = convolve(
            &[Dd::from_f64(-1.0), Dd::from_f64(1.0)],
            &[Dd::from_f64(1.0), Dd::from_f64(1.0)],
        );
        let q = [Dd::from_f64(1.0), Dd::ZERO, Dd::from_f64(-1.0)];
        let s = add_vec(&p, &q);
        assert!(s.iter().all(|d| d.to_f64() == 0.0));
    }
}
