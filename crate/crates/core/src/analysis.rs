//! Engineering quantities extracted from transfer functions: pole/zero
//! sets with slow/fast mode classification, Bode magnitude sampling, step
//! responses and DC gains, plus the CSV emitters for plot-ready data.

use crate::error::{Error, Result};
use crate::ratpoly::{PoleZeroSet, RationalFunction};
use crate::tfbuild::ChannelId;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

/// Presentation-time cancellation tolerance used in the study plots.
pub const DISPLAY_TOL: f64 = 1e-3;

/// Cancel near-coincident pole/zero pairs at `display_tol`, then extract
/// roots and gain.
pub fn pole_zero(channel: &RationalFunction, display_tol: f64) -> Result<PoleZeroSet> {
    let reduced = if display_tol > 0.0 {
        channel.minreal(display_tol)?
    } else {
        channel.clone()
    };
    PoleZeroSet::from_rational(&reduced)
}

/// Mode taxonomy: the slow resonant pair is primary, the fast one secondary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeClass {
    Primary,
    Secondary,
    Real,
    Other,
}

impl ModeClass {
    pub fn label(&self) -> &'static str {
        match self {
            ModeClass::Primary => "primary",
            ModeClass::Secondary => "secondary",
            ModeClass::Real => "real",
            ModeClass::Other => "other",
        }
    }
}

/// One classified mode of a channel.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ModeReport {
    /// The pole pair; both entries equal for a real mode.
    pub pair: [Complex64; 2],
    /// rad/s in the active frequency convention.
    pub natural_frequency: f64,
    pub damping_ratio: f64,
    pub classification: ModeClass,
}

/// Classify the poles of a channel. Complex pairs are ordered by natural
/// frequency; the slowest is primary and the fastest secondary (when at
/// least two pairs exist). Near-ties (1e-9) break by ascending damping.
pub fn classify_modes(pz: &PoleZeroSet) -> Vec<ModeReport> {
    let mut pairs: Vec<Complex64> = pz.poles.iter().copied().filter(|p| p.im > 0.0).collect();
    pairs.sort_by(|a, b| {
        let (wa, wb) = (a.norm(), b.norm());
        if (wa - wb).abs() <= 1e-9 {
            let (za, zb) = (-a.re / wa, -b.re / wb);
            za.partial_cmp(&zb).unwrap()
        } else {
            wa.partial_cmp(&wb).unwrap()
        }
    });
    let n = pairs.len();
    let mut out = Vec::new();
    for (i, p) in pairs.iter().enumerate() {
        let class = if i == 0 {
            ModeClass::Primary
        } else if i == n - 1 {
            ModeClass::Secondary
        } else {
            ModeClass::Other
        };
        let wn = p.norm();
        out.push(ModeReport {
            pair: [*p, p.conj()],
            natural_frequency: wn,
            damping_ratio: -p.re / wn,
            classification: class,
        });
    }
    for p in pz.poles.iter().filter(|p| p.im == 0.0) {
        out.push(ModeReport {
            pair: [*p, *p],
            natural_frequency: p.norm(),
            damping_ratio: 1.0,
            classification: ModeClass::Real,
        });
    }
    out
}

/// Log-spaced magnitude sweep; `20 log10 |H(jw)|` per sample.
pub fn bode_magnitude(
    channel: &RationalFunction,
    w_min: f64,
    w_max: f64,
    n: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(w_min > 0.0 && w_max > w_min && n >= 2) {
        return Err(Error::InvalidArgument {
            detail: "bode grid requires w_min > 0, w_max > w_min, n >= 2".into(),
        });
    }
    let ln_min = w_min.ln();
    let step = (w_max.ln() - ln_min) / (n - 1) as f64;
    let mut freq = Vec::with_capacity(n);
    let mut mag = Vec::with_capacity(n);
    for i in 0..n {
        let w = (ln_min + i as f64 * step).exp();
        let h = channel.evaluate(Complex64::new(0.0, w))?;
        freq.push(w);
        mag.push(20.0 * h.norm().log10());
    }
    Ok((freq, mag))
}

/// Sampled step response of one channel.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StepResponse {
    pub time: Vec<f64>,
    pub value: Vec<f64>,
    pub input_channel: ChannelId,
    pub step_size: f64,
    /// Set when a pole with real part above 1e-9 was present; the response
    /// is still computed.
    pub unstable: bool,
}

/// Exact zero-order-hold step response on a fixed grid.
///
/// The channel is realized in controllable canonical form and discretized
/// with one matrix exponential of the augmented `[A b; 0 0]` block.
pub fn step_response(
    channel: &RationalFunction,
    step_size: f64,
    t_end: f64,
    dt: f64,
    input_channel: ChannelId,
) -> Result<StepResponse> {
    if !(dt > 0.0 && t_end > dt) {
        return Err(Error::InvalidArgument {
            detail: "step grid requires dt > 0 and t_end > dt".into(),
        });
    }
    if !channel.is_proper() {
        return Err(Error::InvalidArgument {
            detail: "step response requires a proper channel".into(),
        });
    }
    let n_steps = (t_end / dt).round() as usize;
    let time: Vec<f64> = (0..=n_steps).map(|i| i as f64 * dt).collect();

    if channel.is_zero() || channel.den().degree() == 0 {
        // pure gain (or zero): instantaneous response
        let g = channel.num().coeffs()[0] / channel.den().coeffs()[0];
        let value = vec![g * step_size; time.len()];
        return Ok(StepResponse {
            time,
            value,
            input_channel,
            step_size,
            unstable: false,
        });
    }

    let den = channel.den().monic();
    let n = den.degree();
    // biproper split: h = d + strictly proper remainder
    let (feed, num_sp) = if channel.num().degree() == n {
        let d = channel.num().leading() / den.leading();
        let rem = channel.num() - &den.scale(d);
        (d, rem)
    } else {
        (0.0, channel.num().clone())
    };

    let unstable = {
        let poles = crate::ratpoly::roots(channel.den())?;
        poles.iter().any(|p| p.re > 1e-9)
    };

    // controllable canonical form
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n.saturating_sub(1) {
        a[(i, i + 1)] = 1.0;
    }
    for j in 0..n {
        a[(n - 1, j)] = -den.coeffs()[j];
    }
    let mut b = DMatrix::<f64>::zeros(n, 1);
    b[(n - 1, 0)] = 1.0;
    let mut c = DMatrix::<f64>::zeros(1, n);
    for j in 0..=num_sp.degree().min(n - 1) {
        c[(0, j)] = num_sp.coeffs().get(j).copied().unwrap_or(0.0);
    }

    // ZOH pair from one augmented exponential
    let mut aug = DMatrix::<f64>::zeros(n + 1, n + 1);
    aug.view_mut((0, 0), (n, n)).copy_from(&a);
    aug.view_mut((0, n), (n, 1)).copy_from(&b);
    let phi = expm(&(aug * dt));
    let ad = phi.view((0, 0), (n, n)).into_owned();
    let bd = phi.view((0, n), (n, 1)).into_owned();

    let mut x = DMatrix::<f64>::zeros(n, 1);
    let mut value = Vec::with_capacity(time.len());
    for _ in &time {
        let y = (&c * &x)[(0, 0)] + feed * step_size;
        value.push(y);
        x = &ad * &x + &bd * step_size;
    }
    Ok(StepResponse {
        time,
        value,
        input_channel,
        step_size,
        unstable,
    })
}

/// Partial-fraction reconstruction of the step response; valid when the
/// poles are simple (pairwise separation above 1e-6). Serves as the
/// independent cross-check of the matrix-exponential path.
pub fn step_response_residues(
    channel: &RationalFunction,
    step_size: f64,
    time: &[f64],
) -> Result<Vec<f64>> {
    if channel.is_zero() {
        return Ok(vec![0.0; time.len()]);
    }
    let poles = crate::ratpoly::roots(channel.den())?;
    for (i, a) in poles.iter().enumerate() {
        for b in poles.iter().skip(i + 1) {
            if (a - b).norm() <= 1e-6 {
                return Err(Error::InvalidArgument {
                    detail: "residue oracle needs pairwise separated poles".into(),
                });
            }
        }
        if a.norm() <= 1e-9 {
            return Err(Error::IntegratorAtDc);
        }
    }
    let dc = dc_gain(channel)?;
    let dden = channel.den().derivative();
    let residues: Vec<(Complex64, Complex64)> = poles
        .iter()
        .map(|&p| {
            let r = channel.num().eval_complex(p) / dden.eval_complex(p);
            (p, r / p)
        })
        .collect();
    Ok(time
        .iter()
        .map(|&t| {
            let sum: Complex64 = residues
                .iter()
                .map(|&(p, rp)| rp * (p * t).exp())
                .sum();
            step_size * (dc + sum.re)
        })
        .collect())
}

/// `num(0) / den(0)`.
pub fn dc_gain(channel: &RationalFunction) -> Result<f64> {
    let d0 = channel.den().coeffs()[0];
    if d0.abs() <= 1e-12 * channel.den().max_abs_coeff() {
        return Err(Error::IntegratorAtDc);
    }
    Ok(channel.num().coeffs()[0] / d0)
}

/// Dense matrix exponential, Pade(13) with scaling and squaring.
pub fn expm(m: &DMatrix<f64>) -> DMatrix<f64> {
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    let n = m.nrows();
    let norm = m.abs().row_sum().max();
    let theta13 = 5.371920351148152;
    let squarings = if norm > theta13 {
        (norm / theta13).log2().ceil() as i32
    } else {
        0
    };
    let a = m / 2f64.powi(squarings);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;
    let id = DMatrix::<f64>::identity(n, n);
    let u_inner = &a6 * (&a6 * B[13] + &a4 * B[11] + &a2 * B[9])
        + &a6 * B[7]
        + &a4 * B[5]
        + &a2 * B[3]
        + &id * B[1];
    let u = &a * &u_inner;
    let v = &a6 * (&a6 * B[12] + &a4 * B[10] + &a2 * B[8])
        + &a6 * B[6]
        + &a4 * B[4]
        + &a2 * B[2]
        + &id * B[0];
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.lu().solve(&p).expect("Pade denominator is invertible");
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}

// ---------------------------------------------------------------------------
// CSV emission
// ---------------------------------------------------------------------------

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    Ok(std::io::BufWriter::new(std::fs::File::create(path)?))
}

pub fn write_pz_csv(pz: &PoleZeroSet, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "re,im,kind")?;
    for p in &pz.poles {
        writeln!(w, "{},{},pole", p.re, p.im)?;
    }
    for z in &pz.zeros {
        writeln!(w, "{},{},zero", z.re, z.im)?;
    }
    Ok(())
}

pub fn write_bode_csv(freq: &[f64], mag_db: &[f64], path: &Path) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "omega_rad_s,mag_db")?;
    for (f, m) in freq.iter().zip(mag_db) {
        writeln!(w, "{f},{m}")?;
    }
    Ok(())
}

pub fn write_step_csv(step: &StepResponse, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "t_s,value_pu")?;
    for (t, v) in step.time.iter().zip(&step.value) {
        writeln!(w, "{t},{v}")?;
    }
    Ok(())
}

pub fn write_modes_csv(modes: &[ModeReport], path: &Path) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "class,wn,zeta")?;
    for m in modes {
        writeln!(
            w,
            "{},{},{}",
            m.classification.label(),
            m.natural_frequency,
            m.damping_ratio
        )?;
    }
    Ok(())
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
    fn first_order_pole_zero() {
        let pz = pole_zero(&rf(&[1.0], &[1.0, 1.0]), 0.0).unwrap();
        assert_eq!(pz.poles.len(), 1);
        assert!(pz.zeros.is_empty());
        assert_abs_diff_eq!(pz.poles[0].re, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pz.gain, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn display_cancellation_drops_near_pairs() {
        // (s + 1.0004)(s + 5) / ((s + 1)(s + 7))
        let num = &Polynomial::new(vec![1.0004, 1.0]) * &Polynomial::new(vec![5.0, 1.0]);
        let den = &Polynomial::new(vec![1.0, 1.0]) * &Polynomial::new(vec![7.0, 1.0]);
        let ch = RationalFunction::new(num, den).unwrap();
        let full = pole_zero(&ch, 0.0).unwrap();
        let disp = pole_zero(&ch, DISPLAY_TOL).unwrap();
        assert_eq!(full.poles.len(), 2);
        assert_eq!(disp.poles.len(), 1);
        assert_abs_diff_eq!(disp.poles[0].re, -7.0, epsilon = 1e-9);
    }

    #[test]
    fn classification_orders_by_natural_frequency() {
        let pz = PoleZeroSet {
            poles: vec![
                Complex64::new(-0.3, 2.0),
                Complex64::new(-0.3, -2.0),
                Complex64::new(-1.0, 15.0),
                Complex64::new(-1.0, -15.0),
                Complex64::new(-10.0, 0.0),
            ],
            zeros: vec![],
            gain: 1.0,
        };
        let modes = classify_modes(&pz);
        assert_eq!(modes.len(), 3);
        assert_eq!(modes[0].classification, ModeClass::Primary);
        assert_abs_diff_eq!(modes[0].pair[0].im.abs(), 2.0, epsilon = 1e-12);
        assert_eq!(modes[1].classification, ModeClass::Secondary);
        assert_abs_diff_eq!(modes[1].pair[0].im.abs(), 15.0, epsilon = 1e-12);
        assert_eq!(modes[2].classification, ModeClass::Real);
        assert_abs_diff_eq!(modes[2].damping_ratio, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn single_pair_is_primary() {
        let pz = PoleZeroSet {
            poles: vec![Complex64::new(-0.5, 1.5), Complex64::new(-0.5, -1.5)],
            zeros: vec![],
            gain: 1.0,
        };
        let modes = classify_modes(&pz);
        assert_eq!(modes.len(), 1);
        assert_eq!(modes[0].classification, ModeClass::Primary);
        assert_abs_diff_eq!(modes[0].natural_frequency, (2.5f64).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn classification_is_permutation_invariant() {
        let poles = vec![
            Complex64::new(-1.0, 15.0),
            Complex64::new(-10.0, 0.0),
            Complex64::new(-0.3, 2.0),
            Complex64::new(-0.3, -2.0),
            Complex64::new(-1.0, -15.0),
        ];
        let a = classify_modes(&PoleZeroSet {
            poles: poles.clone(),
            zeros: vec![],
            gain: 1.0,
        });
        let mut rev = poles;
        rev.reverse();
        let b = classify_modes(&PoleZeroSet {
            poles: rev,
            zeros: vec![],
            gain: 1.0,
        });
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.classification, y.classification);
            assert_abs_diff_eq!(x.natural_frequency, y.natural_frequency, epsilon = 1e-12);
        }
    }

    #[test]
    fn first_order_corner_is_minus_3db() {
        let (f, m) = bode_magnitude(&rf(&[1.0], &[1.0, 1.0]), 1.0, 10.0, 2).unwrap();
        assert_abs_diff_eq!(f[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m[0], -3.0103, epsilon = 1e-4);
    }

    #[test]
    fn refined_bode_grid_shares_points() {
        let ch = rf(&[1.0], &[1.0, 0.3, 1.0]);
        let n = 17;
        let (f1, m1) = bode_magnitude(&ch, 1e-2, 1e3, n).unwrap();
        let (f2, m2) = bode_magnitude(&ch, 1e-2, 1e3, 2 * n - 1).unwrap();
        for i in 0..n {
            assert_eq!(f1[i], f2[2 * i], "grid point {i} must be bit-identical");
            assert_abs_diff_eq!(m1[i], m2[2 * i], epsilon = 1e-12);
        }
    }

    #[test]
    fn first_order_step_is_analytic() {
        // k/(1 + T s): y(t) = k (1 - exp(-t/T))
        let t_const = 0.7;
        let ch = rf(&[2.0], &[1.0, t_const]);
        let resp = step_response(&ch, 1.0, 5.0, 0.01, ChannelId::PToW).unwrap();
        for (t, v) in resp.time.iter().zip(&resp.value) {
            let expect = 2.0 * (1.0 - (-t / t_const).exp());
            assert_abs_diff_eq!(*v, expect, epsilon = 1e-9);
        }
        assert!(!resp.unstable);
        assert_eq!(resp.value[0], 0.0);
    }

    #[test]
    fn residue_oracle_matches_matrix_exponential() {
        let ch = rf(&[0.3, 1.0], &[2.0, 0.8, 1.0]);
        let resp = step_response(&ch, 0.05, 10.0, 0.005, ChannelId::QToV).unwrap();
        let recon = step_response_residues(&ch, 0.05, &resp.time).unwrap();
        for (a, b) in resp.value.iter().zip(&recon) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-7);
        }
    }

    #[test]
    fn final_value_matches_dc_gain() {
        let ch = rf(&[0.3, 1.0], &[2.0, 0.8, 1.0]);
        let resp = step_response(&ch, 0.05, 60.0, 0.01, ChannelId::QToV).unwrap();
        let expect = dc_gain(&ch).unwrap() * 0.05;
        assert_abs_diff_eq!(*resp.value.last().unwrap(), expect, epsilon = 1e-6);
    }

    #[test]
    fn unstable_channel_is_flagged() {
        let ch = rf(&[1.0], &[-1.0, 1.0]);
        let resp = step_response(&ch, 1.0, 1.0, 0.1, ChannelId::PToW).unwrap();
        assert!(resp.unstable);
    }

    #[test]
    fn dc_gain_values() {
        assert_abs_diff_eq!(dc_gain(&rf(&[2.0, 1.0], &[4.0, 1.0])).unwrap(), 0.5, epsilon = 1e-15);
        assert!(matches!(
            dc_gain(&rf(&[1.0], &[0.0, 1.0])),
            Err(Error::IntegratorAtDc)
        ));
    }

    #[test]
    fn biproper_channel_has_instant_response() {
        // (s + 2)/(s + 4): feedthrough 1, dc 0.5
        let ch = rf(&[2.0, 1.0], &[4.0, 1.0]);
        let resp = step_response(&ch, 1.0, 8.0, 0.01, ChannelId::PToW).unwrap();
        assert_abs_diff_eq!(resp.value[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(*resp.value.last().unwrap(), 0.5, epsilon = 1e-6);
    }

    #[test]
    fn expm_matches_scalar_exponential() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -4.0, -0.4]);
        let e1 = expm(&(m.clone() * 0.25));
        let e4 = &e1 * &e1 * &e1 * &e1;
        let e = expm(&m);
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(e[(i, j)], e4[(i, j)], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn csv_headers_are_stable() {
        let dir = tempfile::tempdir().unwrap();
        let pz = PoleZeroSet {
            poles: vec![Complex64::new(-1.0, 0.0)],
            zeros: vec![],
            gain: 1.0,
        };
        let path = dir.path().join("pz.csv");
        write_pz_csv(&pz, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("re,im,kind\n"));
        assert!(text.contains("-1,0,pole"));
    }
}
