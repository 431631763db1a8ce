//! Polynomial root extraction and stable re-expansion.
//!
//! Companion-matrix eigenvalues with balancing, two Newton polish steps
//! against a compensated Horner evaluation, and an Aberth-Ehrlich fallback
//! when the QR iteration does not converge. Real coefficients guarantee a
//! conjugate-symmetric root set; symmetry is enforced by explicit pairing.

use super::dd::{self, Dd};
use super::poly::Polynomial;
use crate::error::{Error, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;

/// All complex roots of `p`, origin roots exact, conjugate pairs enforced.
pub fn roots(p: &Polynomial) -> Result<Vec<Complex64>> {
    if p.degree() == 0 {
        return Err(Error::DegreeZero);
    }
    let dd_coeffs: Vec<Dd> = p.coeffs().iter().map(|&c| Dd::from_f64(c)).collect();
    roots_of_dd(&dd_coeffs)
}

/// Root extraction from dd coefficients (used by the factored engine so the
/// polish step sees the full-precision coefficients).
pub(crate) fn roots_of_dd(coeffs: &[Dd]) -> Result<Vec<Complex64>> {
    let f64_coeffs: Vec<f64> = coeffs.iter().map(|d| d.to_f64()).collect();
    let p = Polynomial::new(f64_coeffs);
    if p.is_zero() {
        return Err(Error::DegreeZero);
    }
    let k = p.origin_multiplicity();
    let mut out = vec![Complex64::new(0.0, 0.0); k];
    let reduced: Vec<f64> = p.coeffs()[k..].to_vec();
    if reduced.len() <= 1 {
        return Ok(out);
    }
    // dd copy of the flushed polynomial, index-aligned with `reduced`
    let reduced_dd: Vec<Dd> = reduced
        .iter()
        .enumerate()
        .map(|(i, &c)| if c == 0.0 { Dd::ZERO } else { coeffs[k + i] })
        .collect();

    let mut rts = companion_eigenvalues(&reduced)
        .unwrap_or_else(|| aberth(&reduced));
    for r in &mut rts {
        *r = polish(&reduced_dd, *r);
    }
    symmetrize(&mut rts);
    out.extend(rts);
    Ok(out)
}

/// Eigenvalues of the balanced companion matrix of a monic polynomial.
fn companion_eigenvalues(coeffs: &[f64]) -> Option<Vec<Complex64>> {
    let n = coeffs.len() - 1;
    let lead = coeffs[n];
    if n == 1 {
        return Some(vec![Complex64::new(-coeffs[0] / lead, 0.0)]);
    }
    if n == 2 {
        // quadratic formula with the numerically stable branch
        let (c, b, a) = (coeffs[0] / lead, coeffs[1] / lead, 1.0);
        let disc = b * b - 4.0 * a * c;
        if disc >= 0.0 {
            let q = -0.5 * (b + b.signum() * disc.sqrt());
            let r1 = if q != 0.0 { c / q } else { 0.0 };
            let r2 = if a != 0.0 && q != 0.0 { q / a } else { -b - r1 };
            return Some(vec![Complex64::new(r1, 0.0), Complex64::new(r2, 0.0)]);
        }
        let re = -b / 2.0;
        let im = (-disc).sqrt() / 2.0;
        return Some(vec![Complex64::new(re, im), Complex64::new(re, -im)]);
    }
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        m[(i, i - 1)] = 1.0;
    }
    for i in 0..n {
        m[(i, n - 1)] = -coeffs[i] / lead;
    }
    balance(&mut m);
    let schur = nalgebra::linalg::Schur::try_new(m, 1e-14, 100_000)?;
    let eig = schur.complex_eigenvalues();
    Some(eig.iter().copied().collect())
}

/// Parlett-Reinsch balancing in base 2 (exact scalings).
fn balance(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for _ in 0..32 {
        let mut converged = true;
        for i in 0..n {
            let mut r = 0.0f64;
            let mut c = 0.0f64;
            for j in 0..n {
                if j != i {
                    r += m[(i, j)].abs();
                    c += m[(j, i)].abs();
                }
            }
            if r == 0.0 || c == 0.0 {
                continue;
            }
            let mut f = 1.0f64;
            let s = c + r;
            let mut cc = c;
            let mut rr = r;
            while cc < rr / 2.0 {
                cc *= 2.0;
                rr /= 2.0;
                f *= 2.0;
            }
            while cc >= rr * 2.0 {
                cc /= 2.0;
                rr *= 2.0;
                f /= 2.0;
            }
            if cc + rr < 0.95 * s {
                converged = false;
                for j in 0..n {
                    m[(i, j)] /= f;
                    m[(j, i)] *= f;
                }
            }
        }
        if converged {
            break;
        }
    }
}

/// Two Newton steps against the dd coefficients.
fn polish(coeffs: &[Dd], mut r: Complex64) -> Complex64 {
    let deriv: Vec<Dd> = coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, c)| c.mul_f64(i as f64))
        .collect();
    for _ in 0..3 {
        let (pr, pi) = dd::eval_complex(coeffs, r.re, r.im);
        let (dr, di) = dd::eval_complex(&deriv, r.re, r.im);
        let p = Complex64::new(pr, pi);
        let d = Complex64::new(dr, di);
        if d.norm() == 0.0 {
            break;
        }
        let step = p / d;
        if !step.re.is_finite() || !step.im.is_finite() {
            break;
        }
        let next = r - step;
        if (next - r).norm() <= 1e-16 * (1.0 + r.norm()) {
            r = next;
            break;
        }
        r = next;
    }
    r
}

/// Aberth-Ehrlich iteration, started on a Cauchy-bound circle.
fn aberth(coeffs: &[f64]) -> Vec<Complex64> {
    let n = coeffs.len() - 1;
    let lead = coeffs[n];
    let radius = 1.0
        + coeffs[..n]
            .iter()
            .fold(0.0f64, |m, &c| m.max((c / lead).abs()));
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| {
            let th = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / n as f64 + 0.4;
            Complex64::from_polar(radius * 0.8, th)
        })
        .collect();
    let poly = Polynomial::new(coeffs.to_vec());
    let deriv = poly.derivative();
    for _ in 0..200 {
        let mut max_step = 0.0f64;
        let snapshot = z.clone();
        for i in 0..n {
            let zi = snapshot[i];
            let p = poly.eval_complex(zi);
            let d = deriv.eval_complex(zi);
            let newton = if d.norm() > 0.0 { p / d } else { p };
            let mut repulsion = Complex64::new(0.0, 0.0);
            for (j, &zj) in snapshot.iter().enumerate() {
                if j != i {
                    repulsion += 1.0 / (zi - zj);
                }
            }
            let denom = Complex64::new(1.0, 0.0) - newton * repulsion;
            let step = if denom.norm() > 1e-300 { newton / denom } else { newton };
            z[i] = zi - step;
            max_step = max_step.max(step.norm() / (1.0 + zi.norm()));
        }
        if max_step < 1e-14 {
            break;
        }
    }
    z
}

/// Enforce exact conjugate symmetry by pairing and averaging.
fn symmetrize(rts: &mut [Complex64]) {
    let n = rts.len();
    let mut used = vec![false; n];
    for i in 0..n {
        if used[i] {
            continue;
        }
        if rts[i].im == 0.0 {
            used[i] = true;
            continue;
        }
        // nearest unused candidate to the conjugate
        let target = rts[i].conj();
        let mut best: Option<(usize, f64)> = None;
        for (j, r) in rts.iter().enumerate() {
            if j == i || used[j] {
                continue;
            }
            let d = (r - target).norm();
            if best.map_or(true, |(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        match best {
            Some((j, d)) if d <= 1e-6 * (1.0 + target.norm()) => {
                let re = 0.5 * (rts[i].re + rts[j].re);
                let im = 0.5 * (rts[i].im.abs() + rts[j].im.abs());
                rts[i] = Complex64::new(re, if rts[i].im > 0.0 { im } else { -im });
                rts[j] = rts[i].conj();
                used[i] = true;
                used[j] = true;
            }
            _ => {
                // no partner: snap a stray imaginary part to the real axis
                if rts[i].im.abs() <= 1e-9 * (1.0 + rts[i].re.abs()) {
                    rts[i] = Complex64::new(rts[i].re, 0.0);
                }
                used[i] = true;
            }
        }
    }
}

/// Expand `lead * prod (s - r_i)` into a real polynomial, pairing conjugate
/// roots into real quadratics and accumulating in dd precision.
pub fn expand_from_roots(rts: &[Complex64], lead: f64) -> Polynomial {
    Polynomial::new(
        expand_from_roots_dd(rts, lead)
            .iter()
            .map(|d| d.to_f64())
            .collect(),
    )
}

pub(crate) fn expand_from_roots_dd(rts: &[Complex64], lead: f64) -> Vec<Dd> {
    let mut sorted: Vec<Complex64> = rts.to_vec();
    sorted.sort_by(|a, b| {
        (a.norm(), a.re, a.im.abs())
            .partial_cmp(&(b.norm(), b.re, b.im.abs()))
            .unwrap()
    });
    let mut acc = vec![Dd::from_f64(lead)];
    let mut used = vec![false; sorted.len()];
    for i in 0..sorted.len() {
        if used[i] {
            continue;
        }
        let r = sorted[i];
        if r.im == 0.0 {
            // (s - r)
            acc = dd::convolve(&acc, &[Dd::from_f64(-r.re), Dd::from_f64(1.0)]);
            used[i] = true;
        } else {
            let mut partner = None;
            for (j, c) in sorted.iter().enumerate().skip(i + 1) {
                if !used[j] && c.im == -r.im && c.re == r.re {
                    partner = Some(j);
                    break;
                }
            }
            let j = partner.unwrap_or_else(|| {
                // fall back to nearest conjugate (roots from symmetrize are exact)
                let mut best = (usize::MAX, f64::INFINITY);
                for (j, c) in sorted.iter().enumerate() {
                    if j != i && !used[j] {
                        let d = (c - r.conj()).norm();
                        if d < best.1 {
                            best = (j, d);
                        }
                    }
                }
                best.0
            });
            if j == usize::MAX {
                // genuinely unpaired: multiply the complex monomial's real part
                acc = dd::convolve(&acc, &[Dd::from_f64(-r.re), Dd::from_f64(1.0)]);
                used[i] = true;
                continue;
            }
            // (s^2 - 2 Re(r) s + |r|^2)
            let q = [
                Dd::from_f64(r.re).mul_f64(r.re).add(Dd::from_f64(r.im).mul_f64(r.im)),
                Dd::from_f64(-2.0 * r.re),
                Dd::from_f64(1.0),
            ];
            acc = dd::convolve(&acc, &q);
            used[i] = true;
            used[j] = true;
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn unit_imaginary_pair() {
        let p = Polynomial::new(vec![1.0, 0.0, 1.0]);
        let mut r = roots(&p).unwrap();
        r.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap());
        assert_abs_diff_eq!(r[0].im, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r[1].im, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r[0].re, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn damped_quadratic() {
        // s^2 + 2 zeta w s + w^2, zeta = 0.5, w = 2
        let p = Polynomial::new(vec![4.0, 2.0, 1.0]);
        let r = roots(&p).unwrap();
        let expect_im = 3.0f64.sqrt();
        for root in r {
            assert_abs_diff_eq!(root.re, -1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(root.im.abs(), expect_im, epsilon = 1e-12);
        }
    }

    #[test]
    fn cubic_with_known_real_roots() {
        // (s+1)(s+2)(s+3) = 6 + 11 s + 6 s^2 + s^3
        let p = Polynomial::new(vec![6.0, 11.0, 6.0, 1.0]);
        let mut r = roots(&p).unwrap();
        r.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        for (root, expect) in r.iter().zip([-3.0, -2.0, -1.0]) {
            assert_abs_diff_eq!(root.re, expect, epsilon = 1e-10);
            assert_abs_diff_eq!(root.im, 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn origin_roots_are_exact() {
        // s^2 (s + 5)
        let p = Polynomial::new(vec![0.0, 0.0, 5.0, 1.0]);
        let r = roots(&p).unwrap();
        assert_eq!(r.iter().filter(|z| z.re == 0.0 && z.im == 0.0).count(), 2);
    }

    #[test]
    fn degree_zero_rejected() {
        assert!(roots(&Polynomial::constant(3.0)).is_err());
    }

    #[test]
    fn expansion_round_trip() {
        let rts = [
            Complex64::new(-1.0, 2.0),
            Complex64::new(-1.0, -2.0),
            Complex64::new(-3.0, 0.0),
        ];
        let p = expand_from_roots(&rts, 2.0);
        // 2 (s+3)(s^2+2s+5) = 2 s^3 + 10 s^2 + 22 s + 30
        assert_abs_diff_eq!(p.coeffs()[0], 30.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.coeffs()[1], 22.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.coeffs()[2], 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.coeffs()[3], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn aberth_agrees_with_companion() {
        let p = vec![6.0, 11.0, 6.0, 1.0];
        let mut r = aberth(&p);
        r.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        assert_abs_diff_eq!(r[0].re, -3.0, epsilon = 1e-8);
        assert_abs_diff_eq!(r[2].re, -1.0, epsilon = 1e-8);
    }
}
