//! Transfer-object construction: stand-alone machine matrices, the
//! intermediate bus-coupling matrices, the interconnected load-to-machine
//! transfer matrix, and an independent descriptor realization used as a
//! numeric oracle.

mod descriptor;

pub use descriptor::{build_descriptor, DescriptorSystem};

use crate::error::{Error, Result};
use crate::model::{FreqConvention, Machine, MachineParams, OperatingPoint, SystemConfig};
use crate::powerflow::{build_a_coeffs, build_k_matrix, ACoeffs, PowerFlowMatrix};
use crate::ratpoly::factored::FactoredMatrix2;
use crate::ratpoly::{Polynomial, RatMatrix2, RationalFunction};
use serde::{Deserialize, Serialize};

/// Cancellation tolerance applied while assembling transfer matrices.
/// Presentation-level cancellation (0.001) happens in the analysis layer.
pub const BUILD_TOL: f64 = 1e-9;

/// Stand-alone machine transfer matrix `(dp, dq) -> (dw, dv)`.
#[derive(Clone, Debug)]
pub struct StandaloneTF {
    pub g: RatMatrix2,
}

/// Input/output channel of the interconnected transfer matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelId {
    PToW,
    QToW,
    PToV,
    QToV,
}

impl ChannelId {
    pub const ALL: [ChannelId; 4] = [
        ChannelId::PToW,
        ChannelId::QToW,
        ChannelId::PToV,
        ChannelId::QToV,
    ];

    /// Short form used on the command line.
    pub fn short(&self) -> &'static str {
        match self {
            ChannelId::PToW => "pw",
            ChannelId::QToW => "qw",
            ChannelId::PToV => "pv",
            ChannelId::QToV => "qv",
        }
    }

    pub fn from_short(s: &str) -> Option<ChannelId> {
        match s {
            "pw" => Some(ChannelId::PToW),
            "qw" => Some(ChannelId::QToW),
            "pv" => Some(ChannelId::PToV),
            "qv" => Some(ChannelId::QToV),
            _ => None,
        }
    }

    /// (row, column) in the 2x2 layout `[p->w q->w; p->v q->v]`.
    pub fn index(&self) -> (usize, usize) {
        match self {
            ChannelId::PToW => (0, 0),
            ChannelId::QToW => (0, 1),
            ChannelId::PToV => (1, 0),
            ChannelId::QToV => (1, 1),
        }
    }
}

/// Labeled channels of the interconnected transfer matrix for one target
/// machine: `(dp_L, dq_L) -> (dw_target, dv_target)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TransferMatrix {
    pub p_to_w: RationalFunction,
    pub q_to_w: RationalFunction,
    pub p_to_v: RationalFunction,
    pub q_to_v: RationalFunction,
    pub target: Machine,
}

impl TransferMatrix {
    pub fn channel(&self, id: ChannelId) -> &RationalFunction {
        match id {
            ChannelId::PToW => &self.p_to_w,
            ChannelId::QToW => &self.q_to_w,
            ChannelId::PToV => &self.p_to_v,
            ChannelId::QToV => &self.q_to_v,
        }
    }

    pub fn channels(&self) -> impl Iterator<Item = (ChannelId, &RationalFunction)> {
        ChannelId::ALL.iter().map(move |&id| (id, self.channel(id)))
    }

    /// Every channel proper (zero channels count as proper).
    pub fn is_proper(&self) -> bool {
        self.channels().all(|(_, c)| c.is_proper())
    }
}

/// Transfer-matrix document with construction provenance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TransferExport {
    pub target: Machine,
    pub channels: TransferChannelsExport,
    pub params: SystemConfig,
    pub operating_point: OperatingPoint,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TransferChannelsExport {
    pub p_to_w: RationalFunction,
    pub q_to_w: RationalFunction,
    pub p_to_v: RationalFunction,
    pub q_to_v: RationalFunction,
}

impl TransferExport {
    pub fn new(tf: &TransferMatrix, cfg: &SystemConfig, op: &OperatingPoint) -> Self {
        TransferExport {
            target: tf.target,
            channels: TransferChannelsExport {
                p_to_w: tf.p_to_w.clone(),
                q_to_w: tf.q_to_w.clone(),
                p_to_v: tf.p_to_v.clone(),
                q_to_v: tf.q_to_v.clone(),
            },
            params: *cfg,
            operating_point: *op,
        }
    }
}

/// Stand-alone transfer matrix of one machine.
///
/// With the per-unit frequency convention the angle equation contributes a
/// factor `omega_n` wherever `s dtheta` was substituted, so the closed
/// forms use the scaled sensitivity `k11' = angle_gain * k11`:
///
/// ```text
/// g11 = -(1 + d/k11' (1 - k13 a_p) s) / (m s + kp/(1 + tp s))
/// g12 =  (d/k11') (k13 a_q - kq/(1+tq s) (k12 + k13 a_v)) s / (m s + kp/(1+tp s))
/// g21 = 0
/// g22 = -kq / (1 + tq s)
/// ```
pub fn build_standalone(
    params: &MachineParams,
    k: &PowerFlowMatrix,
    a: &ACoeffs,
    convention: FreqConvention,
    omega_n: f64,
) -> Result<StandaloneTF> {
    let m = convention.momentum(params.h, omega_n);
    let ag = convention.angle_gain(omega_n);
    let k11e = ag * k.k11();
    if k11e == 0.0 {
        return Err(Error::InvalidArgument {
            detail: "k11 must be nonzero for the stand-alone elimination".into(),
        });
    }
    let tp = Polynomial::new(vec![1.0, params.tp]);
    let tq = Polynomial::new(vec![1.0, params.tq]);
    // m s (1 + tp s) + kp
    let den_sw = &(&Polynomial::new(vec![0.0, m]) * &tp) + &Polynomial::constant(params.kp);

    let c1 = params.d / k11e * (1.0 - k.k13() * a.a_p);
    let num11 = &Polynomial::new(vec![1.0, c1]) * &tp;
    let g11 = RationalFunction::new(-&num11, den_sw.clone())?;

    // (d/k11') s (1 + tp s) [k13 a_q (1 + tq s) - kq (k12 + k13 a_v)]
    let inner = &(&Polynomial::new(vec![k.k13() * a.a_q]) * &tq)
        - &Polynomial::constant(params.kq * (k.k12() + k.k13() * a.a_v));
    let num12 = (&(&Polynomial::new(vec![0.0, params.d / k11e]) * &tp) * &inner).clone();
    let g12 = RationalFunction::new(num12, &den_sw * &tq)?;

    let g22 = RationalFunction::new(Polynomial::constant(-params.kq), tq)?;

    Ok(StandaloneTF {
        g: RatMatrix2::new([[g11, g12], [RationalFunction::zero(), g22]]),
    })
}

/// Split the s-scaled linearized power flow into the machine-side and
/// bus-side coefficient matrices:
///
/// ```text
/// b_self = [k11   k12 s]    b_bus = [-k11   k13 s]
///          [k21   k22 s]            [-k21   k23 s]
/// ```
///
/// The returned matrices are in the literal (rad/s) form; apply
/// [`scale_angle_column`] before combining them with a per-unit
/// [`StandaloneTF`].
pub fn build_b_matrices(k: &PowerFlowMatrix) -> (RatMatrix2, RatMatrix2) {
    let lin = |c: f64| RationalFunction::from_poly(Polynomial::new(vec![0.0, c]));
    let b_self = RatMatrix2::new([
        [RationalFunction::constant(k.k11()), lin(k.k12())],
        [RationalFunction::constant(k.k21()), lin(k.k22())],
    ]);
    let b_bus = RatMatrix2::new([
        [RationalFunction::constant(-k.k11()), lin(k.k13())],
        [RationalFunction::constant(-k.k21()), lin(k.k23())],
    ]);
    (b_self, b_bus)
}

/// Scale the frequency column (the first one) by the angle-equation gain of
/// the active convention.
pub fn scale_angle_column(b: &RatMatrix2, gain: f64) -> RatMatrix2 {
    RatMatrix2::new([
        [b.e[0][0].scale(gain), b.e[0][1].clone()],
        [b.e[1][0].scale(gain), b.e[1][1].clone()],
    ])
}

/// Bus-to-machine power coupling `F = (sI - b_self g)^-1 b_bus`, reduced
/// entrywise at [`BUILD_TOL`].
pub fn build_f_matrix(
    g: &StandaloneTF,
    b_self: &RatMatrix2,
    b_bus: &RatMatrix2,
) -> Result<RatMatrix2> {
    let g = g.g.to_factored()?;
    let b_self = b_self.to_factored()?;
    let b_bus = b_bus.to_factored()?;
    let m = s_identity().sub(&b_self.mul(&g)?)?;
    let minv = m.inv().map_err(|_| Error::SingularIntermediate {
        which: "sI - b_self * g",
    })?;
    let f = minv.mul(&b_bus)?;
    RatMatrix2::from_factored(&f)
}

fn s_identity() -> FactoredMatrix2 {
    use crate::ratpoly::factored::Factored;
    FactoredMatrix2::new([
        [Factored::s(), Factored::zero()],
        [Factored::zero(), Factored::s()],
    ])
}

/// Interconnected transfer matrix toward the target machine.
///
/// The defining expression
/// `[(f_v + f_s) f_t^-1 (sI - b_bus_t f_t^-1)^-1 b_self_t]^-1`
/// is evaluated in the algebraically identical regrouped form
/// `b_self_t^-1 (s f_t - b_bus_t) (f_v + f_s)^-1`, which needs two
/// inversions instead of four and keeps intermediate degrees (and therefore
/// rounding noise) far lower. Channels are laid out as
/// `[p->w q->w; p->v q->v]` and reduced entrywise at [`BUILD_TOL`].
pub fn build_interconnected(
    f_v: &RatMatrix2,
    f_s: &RatMatrix2,
    b_self_target: &RatMatrix2,
    b_bus_target: &RatMatrix2,
    target: Machine,
) -> Result<TransferMatrix> {
    let f_v = f_v.to_factored()?;
    let f_s = f_s.to_factored()?;
    let f_t = match target {
        Machine::Sg => &f_s,
        Machine::Vsg => &f_v,
    };
    let b_self_t = b_self_target.to_factored()?;
    let b_bus_t = b_bus_target.to_factored()?;

    let sum = f_v.add(&f_s)?;
    let sum_inv = sum.inv().map_err(|_| Error::SingularIntermediate {
        which: "f_v + f_s",
    })?;
    let w = f_t.mul_s().sub(&b_bus_t)?;
    let b_inv = b_self_t.inv().map_err(|_| Error::SingularIntermediate {
        which: "b_self_target",
    })?;
    let h = b_inv.mul(&w)?.mul(&sum_inv)?;

    let tf = TransferMatrix {
        p_to_w: h.e[0][0].to_rational()?,
        q_to_w: h.e[0][1].to_rational()?,
        p_to_v: h.e[1][0].to_rational()?,
        q_to_v: h.e[1][1].to_rational()?,
        target,
    };
    debug_assert!(tf.is_proper());
    Ok(tf)
}

/// Full pipeline from a configuration and operating point to the
/// load-to-machine transfer matrix.
pub fn build_load_to_machine(
    cfg: &SystemConfig,
    op: &OperatingPoint,
    target: Machine,
) -> Result<TransferMatrix> {
    let ag = cfg.freq_convention.angle_gain(cfg.omega_n);
    let mut parts = Vec::with_capacity(2);
    for which in [Machine::Vsg, Machine::Sg] {
        let params = match which {
            Machine::Vsg => &cfg.vsg,
            Machine::Sg => &cfg.sg,
        };
        let k = build_k_matrix(params, &op.machine(which));
        let a = build_a_coeffs(&k)?;
        let g = build_standalone(params, &k, &a, cfg.freq_convention, cfg.omega_n)?;
        let (b_self, b_bus) = build_b_matrices(&k);
        let b_self = scale_angle_column(&b_self, ag);
        let b_bus = scale_angle_column(&b_bus, ag);
        let f = build_f_matrix(&g, &b_self, &b_bus)?;
        parts.push((b_self, b_bus, f));
    }
    let (b_self_t, b_bus_t, _) = &parts[match target {
        Machine::Vsg => 0,
        Machine::Sg => 1,
    }];
    build_interconnected(&parts[0].2, &parts[1].2, b_self_t, b_bus_t, target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::default_base_case;
    use crate::powerflow::solve_operating_point;
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;

    fn base_parts() -> (SystemConfig, OperatingPoint) {
        let cfg = default_base_case();
        let op = solve_operating_point(&cfg).unwrap();
        (cfg, op)
    }

    fn standalone_vsg(cfg: &SystemConfig, op: &OperatingPoint) -> (StandaloneTF, PowerFlowMatrix) {
        let k = build_k_matrix(&cfg.vsg, &op.machine(Machine::Vsg));
        let a = build_a_coeffs(&k).unwrap();
        let g = build_standalone(&cfg.vsg, &k, &a, cfg.freq_convention, cfg.omega_n).unwrap();
        (g, k)
    }

    #[test]
    fn standalone_dc_gain_is_droop() {
        let (cfg, op) = base_parts();
        let (g, _) = standalone_vsg(&cfg, &op);
        let dc = g.g.e[0][0].evaluate(Complex64::new(0.0, 0.0)).unwrap();
        assert_abs_diff_eq!(dc.re, -0.05, epsilon = 1e-12);
        // s factor in the numerator of g12
        let dc12 = g.g.e[0][1].evaluate(Complex64::new(0.0, 0.0)).unwrap();
        assert_abs_diff_eq!(dc12.norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn standalone_structure() {
        let (cfg, op) = base_parts();
        let (g, _) = standalone_vsg(&cfg, &op);
        assert!(g.g.e[1][0].is_zero());
        // g22 = -kq/(1 + tq s)
        assert_eq!(g.g.e[1][1].num().coeffs(), &[-0.1 / 0.1]);
        assert_eq!(g.g.e[1][1].den().coeffs(), &[1.0 / 0.1, 1.0]);
    }

    #[test]
    fn zero_damper_reduces_degrees() {
        let (cfg, op) = base_parts();
        let mut vsg = cfg.vsg;
        vsg.d = 0.0;
        let k = build_k_matrix(&vsg, &op.machine(Machine::Vsg));
        let a = build_a_coeffs(&k).unwrap();
        let g = build_standalone(&vsg, &k, &a, cfg.freq_convention, cfg.omega_n).unwrap();
        // g11 = -(1 + tp s) / (m s (1 + tp s) + kp)
        assert_eq!(g.g.e[0][0].degrees(), (1, 2));
        assert!(g.g.e[0][1].is_zero());
    }

    #[test]
    fn b_matrices_sparse_k() {
        let k = PowerFlowMatrix {
            k: [[5.0, 0.0, 0.0], [0.0, 5.0, -5.0]],
        };
        let (b_self, b_bus) = build_b_matrices(&k);
        assert_eq!(b_self.e[0][0].num().coeffs(), &[5.0]);
        assert!(b_self.e[0][1].is_zero());
        assert!(b_self.e[1][0].is_zero());
        assert_eq!(b_self.e[1][1].num().coeffs(), &[0.0, 5.0]);
        assert_eq!(b_bus.e[0][0].num().coeffs(), &[-5.0]);
        assert_eq!(b_bus.e[1][1].num().coeffs(), &[0.0, -5.0]);
    }

    #[test]
    fn b_matrices_first_columns_cancel() {
        let (cfg, op) = base_parts();
        let k = build_k_matrix(&cfg.vsg, &op.machine(Machine::Vsg));
        let (b_self, b_bus) = build_b_matrices(&k);
        let sum = b_self.add(&b_bus);
        assert!(sum.e[0][0].is_zero());
        assert!(sum.e[1][0].is_zero());
    }

    #[test]
    fn f_matrix_zero_g_limit() {
        // with g = 0, F = b_bus / s entrywise
        let (cfg, op) = base_parts();
        let k = build_k_matrix(&cfg.vsg, &op.machine(Machine::Vsg));
        let zero_g = StandaloneTF {
            g: RatMatrix2::zero(),
        };
        let (b_self, b_bus) = build_b_matrices(&k);
        let f = build_f_matrix(&zero_g, &b_self, &b_bus).unwrap();
        let s = Complex64::new(0.4, 1.1);
        let fv = f.evaluate(s).unwrap();
        let bv = b_bus.evaluate(s).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let expect = bv[i][j] / s;
                assert_abs_diff_eq!(fv[i][j].re, expect.re, epsilon = 1e-10);
                assert_abs_diff_eq!(fv[i][j].im, expect.im, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn f_matrix_inverse_property() {
        let (cfg, op) = base_parts();
        let (g, k) = standalone_vsg(&cfg, &op);
        let ag = cfg.freq_convention.angle_gain(cfg.omega_n);
        let (b_self, b_bus) = build_b_matrices(&k);
        let f = build_f_matrix(
            &g,
            &scale_angle_column(&b_self, ag),
            &scale_angle_column(&b_bus, ag),
        )
        .unwrap();
        let finv = f.inv().unwrap();
        let prod = f.mul(&finv).minreal(1e-8).unwrap();
        let s = Complex64::new(0.0, 2.2);
        let v = prod.evaluate(s).unwrap();
        assert_abs_diff_eq!(v[0][0].re, 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(v[1][1].re, 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(v[0][1].norm(), 0.0, epsilon = 1e-8);
        assert_abs_diff_eq!(v[1][0].norm(), 0.0, epsilon = 1e-8);
    }

    #[test]
    fn identical_machines_have_identical_f() {
        let mut cfg = default_base_case();
        cfg.sg = cfg.vsg;
        let op = solve_operating_point(&cfg).unwrap();
        let ag = cfg.freq_convention.angle_gain(cfg.omega_n);
        let mut fs = Vec::new();
        for which in [Machine::Vsg, Machine::Sg] {
            let params = match which {
                Machine::Vsg => &cfg.vsg,
                Machine::Sg => &cfg.sg,
            };
            let k = build_k_matrix(params, &op.machine(which));
            let a = build_a_coeffs(&k).unwrap();
            let g = build_standalone(params, &k, &a, cfg.freq_convention, cfg.omega_n).unwrap();
            let (b_self, b_bus) = build_b_matrices(&k);
            fs.push(
                build_f_matrix(
                    &g,
                    &scale_angle_column(&b_self, ag),
                    &scale_angle_column(&b_bus, ag),
                )
                .unwrap(),
            );
        }
        let s = Complex64::new(0.1, 0.9);
        let a = fs[0].evaluate(s).unwrap();
        let b = fs[1].evaluate(s).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(a[i][j].re, b[i][j].re, epsilon = 1e-9);
                assert_abs_diff_eq!(a[i][j].im, b[i][j].im, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn interconnected_dc_gain_is_shared_droop() {
        let (cfg, op) = base_parts();
        let tf = build_load_to_machine(&cfg, &op, Machine::Sg).unwrap();
        let dc = tf
            .p_to_w
            .evaluate(Complex64::new(0.0, 0.0))
            .unwrap();
        assert_abs_diff_eq!(dc.re, -0.025, epsilon = 1e-10);
        assert!(tf.is_proper());
    }

    #[test]
    fn matched_parameters_zero_p_to_v() {
        let mut cfg = default_base_case();
        cfg.vsg = cfg.sg;
        let op = solve_operating_point(&cfg).unwrap();
        let tf = build_load_to_machine(&cfg, &op, Machine::Sg).unwrap();
        let den_scale = tf.p_to_v.den().max_abs_coeff();
        assert!(
            tf.p_to_v.num().max_abs_coeff() <= 1e-9 * den_scale.max(1.0),
            "p_to_v should vanish, got {:?}",
            tf.p_to_v
        );
    }

    #[test]
    fn swap_symmetry() {
        // exchanging machine blocks and toggling the target keeps channels
        let cfg = default_base_case();
        let op = solve_operating_point(&cfg).unwrap();
        let tf_sg = build_load_to_machine(&cfg, &op, Machine::Sg).unwrap();

        let mut swapped = cfg;
        std::mem::swap(&mut swapped.vsg, &mut swapped.sg);
        swapped.dispatch = crate::model::Dispatch {
            p_v0: cfg.dispatch.p_s0,
            q_v0: cfg.dispatch.q_s0,
            p_s0: cfg.dispatch.p_v0,
            q_s0: cfg.dispatch.q_v0,
            v_b0: cfg.dispatch.v_b0,
        };
        let op2 = solve_operating_point(&swapped).unwrap();
        let tf_vsg = build_load_to_machine(&swapped, &op2, Machine::Vsg).unwrap();

        let s = Complex64::new(0.0, 1.7);
        for id in ChannelId::ALL {
            let a = tf_sg.channel(id).evaluate(s).unwrap();
            let b = tf_vsg.channel(id).evaluate(s).unwrap();
            assert_abs_diff_eq!(a.re, b.re, epsilon = 1e-9);
            assert_abs_diff_eq!(a.im, b.im, epsilon = 1e-9);
        }
    }
}
