//! Descriptor (implicit state-space) realization of the interconnected
//! small-signal model.
//!
//! Assembles the same swing, droop-filter, angle and linearized power-flow
//! equations as the rational construction, but as one linear DAE
//! `E dx/dt = A x + B u`, `y = C x` - without any symbolic elimination.
//! Because the two constructions share nothing beyond the K matrices, the
//! descriptor serves as a numeric oracle for the rational path.
//!
//! Variable ordering (documented artifact convention):
//! states `[dw_v, gov_v, qvf_v, dtheta_v, dw_s, gov_s, qvf_s, dtheta_s]`,
//! then algebraic `[dw_b, dv_b, dv_v, dv_s, dp_v, dq_v, dp_s, dq_s]`.
//! Inputs are `(dp_L, dq_L)`; outputs `(dw_target, dv_target)`.

use crate::error::{Error, Result};
use crate::model::{Machine, OperatingPoint, SystemConfig};
use crate::powerflow::build_k_matrix;
use nalgebra::DMatrix;
use num_complex::Complex64;

const N: usize = 16;

/// Threshold beyond which a generalized eigenvalue is treated as infinite.
const FINITE_CUTOFF: f64 = 1e7;

#[derive(Clone, Debug)]
pub struct DescriptorSystem {
    pub e_matrix: DMatrix<f64>,
    pub a_matrix: DMatrix<f64>,
    pub b_matrix: DMatrix<f64>,
    pub c_matrix: DMatrix<f64>,
    pub d_matrix: DMatrix<f64>,
}

/// Assemble the descriptor realization for the chosen output machine.
pub fn build_descriptor(
    cfg: &SystemConfig,
    op: &OperatingPoint,
    target: Machine,
) -> Result<DescriptorSystem> {
    let mut e = DMatrix::<f64>::zeros(N, N);
    let mut a = DMatrix::<f64>::zeros(N, N);
    let mut b = DMatrix::<f64>::zeros(N, 2);
    let mut c = DMatrix::<f64>::zeros(2, N);

    let ag = cfg.freq_convention.angle_gain(cfg.omega_n);
    // algebraic variable indices
    let (iw_b, iv_b, iv_v, iv_s, ip_v, iq_v, ip_s, iq_s) = (8, 9, 10, 11, 12, 13, 14, 15);

    for (base, which, iv_m, ip_m, iq_m) in [
        (0usize, Machine::Vsg, iv_v, ip_v, iq_v),
        (4usize, Machine::Sg, iv_s, ip_s, iq_s),
    ] {
        let params = match which {
            Machine::Vsg => &cfg.vsg,
            Machine::Sg => &cfg.sg,
        };
        let m = cfg.freq_convention.momentum(params.h, cfg.omega_n);
        let (iw, ig, ih, ith) = (base, base + 1, base + 2, base + 3);
        // m dw' = -gov - dp - d (dw - dw_b)
        e[(iw, iw)] = m;
        a[(iw, ig)] = -1.0;
        a[(iw, ip_m)] = -1.0;
        a[(iw, iw)] = -params.d;
        a[(iw, iw_b)] = params.d;
        // tp gov' = kp dw - gov
        e[(ig, ig)] = params.tp;
        a[(ig, iw)] = params.kp;
        a[(ig, ig)] = -1.0;
        // tq qvf' = -kq dq - qvf
        e[(ih, ih)] = params.tq;
        a[(ih, iq_m)] = -params.kq;
        a[(ih, ih)] = -1.0;
        // dtheta' = angle_gain (dw - dw_b)
        e[(ith, ith)] = 1.0;
        a[(ith, iw)] = ag;
        a[(ith, iw_b)] = -ag;
        // dv_m = qvf state
        let row = 8 + base / 4;
        a[(row, iv_m)] = 1.0;
        a[(row, ih)] = -1.0;
        // linearized power flow rows
        let k = build_k_matrix(params, &op.machine(which));
        let rowp = 10 + base / 2;
        a[(rowp, ip_m)] = 1.0;
        a[(rowp, ith)] = -k.k11();
        a[(rowp, iv_m)] = -k.k12();
        a[(rowp, iv_b)] = -k.k13();
        a[(rowp + 1, iq_m)] = 1.0;
        a[(rowp + 1, ith)] = -k.k21();
        a[(rowp + 1, iv_m)] = -k.k22();
        a[(rowp + 1, iv_b)] = -k.k23();
    }
    // load balance: dp_v + dp_s - dp_L = 0, dq_v + dq_s - dq_L = 0
    a[(14, ip_v)] = 1.0;
    a[(14, ip_s)] = 1.0;
    b[(14, 0)] = -1.0;
    a[(15, iq_v)] = 1.0;
    a[(15, iq_s)] = 1.0;
    b[(15, 1)] = -1.0;

    match target {
        Machine::Vsg => {
            c[(0, 0)] = 1.0;
            c[(1, iv_v)] = 1.0;
        }
        Machine::Sg => {
            c[(0, 4)] = 1.0;
            c[(1, iv_s)] = 1.0;
        }
    }

    let sys = DescriptorSystem {
        e_matrix: e,
        a_matrix: a,
        b_matrix: b,
        c_matrix: c,
        d_matrix: DMatrix::zeros(2, 2),
    };
    // regularity probe: the pencil must be invertible off the eigenvalues
    sys.solve_at(Complex64::new(0.37, 1.23))
        .map_err(|_| Error::SingularPencil {
            detail: "det(sE - A) vanished at a generic probe point".into(),
        })?;
    Ok(sys)
}

impl DescriptorSystem {
    /// Finite generalized eigenvalues of the pencil (A, E) via shift-invert:
    /// the eigenvalues mu of `(A - sigma E)^-1 E` map to
    /// `lambda = sigma + 1/mu`, with `mu -> 0` for the infinite fan.
    pub fn finite_eigenvalues(&self) -> Result<Vec<Complex64>> {
        let n = self.a_matrix.nrows();
        // generic shifts; retried when sigma happens to sit on an eigenvalue
        for sigma in [0.7330081, -0.41779, 1.9332, 3.71001_f64] {
            let shifted = &self.a_matrix - &(self.e_matrix.clone() * sigma);
            let lu = shifted.clone().lu();
            let det = lu.determinant();
            if det.abs() < 1e-200 {
                continue;
            }
            let Some(t) = lu.solve(&self.e_matrix) else {
                continue;
            };
            let eig = t.complex_eigenvalues();
            let mut out = Vec::with_capacity(n);
            for mu in eig.iter() {
                if mu.norm() > 1.0 / FINITE_CUTOFF {
                    let lambda = sigma + 1.0 / mu;
                    if lambda.norm() < FINITE_CUTOFF {
                        out.push(lambda);
                    }
                }
            }
            return Ok(out);
        }
        Err(Error::SingularPencil {
            detail: "no admissible shift found".into(),
        })
    }

    fn solve_at(&self, s: Complex64) -> Result<DMatrix<Complex64>> {
        let n = self.a_matrix.nrows();
        let mut m = DMatrix::<Complex64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = s * self.e_matrix[(i, j)] - self.a_matrix[(i, j)];
            }
        }
        let rhs = self.b_matrix.map(|x| Complex64::new(x, 0.0));
        m.lu().solve(&rhs).ok_or(Error::SingularPencil {
            detail: format!("sE - A singular at s = {s}"),
        })
    }

    /// Transfer evaluation `C (sE - A)^-1 B + D`.
    pub fn frequency_response(&self, s: Complex64) -> Result<[[Complex64; 2]; 2]> {
        let x = self.solve_at(s)?;
        let c = self.c_matrix.map(|v| Complex64::new(v, 0.0));
        let y = &c * &x;
        Ok([[y[(0, 0)], y[(0, 1)]], [y[(1, 0)], y[(1, 1)]]])
    }
}
