//! Nonlinear phasor-domain time simulation of the two machines behind
//! resistive-inductive lines feeding a switched impedance load, used to
//! validate the linear model.
//!
//! Topology: machine source - stator impedance - terminal node - line
//! impedance - common load node - `z_load0` (parallel `z_load_step` once
//! the switch closes). Powers are measured at the terminal nodes, so the
//! analytic common-bus model is recovered as the line impedance goes to
//! zero.
//!
//! Integration is classic fixed-step RK4 with the algebraic network solved
//! at every stage. Angles live in a frame rotating at the pre-switch
//! equilibrium speed, which makes the initial state an exact fixed point.
//! The bus frequency seen by the damper terms is the load-node angle pushed
//! through a first-order washout with time constant
//! [`SimScenario::bus_freq_filter_tc`].

use crate::analysis::step_response;
use crate::error::{Error, Result};
use crate::model::{MachineParams, OperatingPoint, SystemConfig};
use crate::powerflow::{machine_pq, solve_operating_point};
use crate::tfbuild::{ChannelId, TransferMatrix};
use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

mod complex_json {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Parts {
        re: f64,
        im: f64,
    }

    pub fn serialize<S: Serializer>(c: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        Parts { re: c.re, im: c.im }.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
        let p = Parts::deserialize(d)?;
        Ok(Complex64::new(p.re, p.im))
    }
}

/// Scenario description; mirrors the JSON schema in `docs/`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimScenario {
    pub cfg: SystemConfig,
    /// Line impedance per machine branch (pu).
    #[serde(rename = "z_line_pu", with = "complex_json")]
    pub z_line: Complex64,
    /// Pre-step load impedance (pu).
    #[serde(rename = "z_load0_pu", with = "complex_json")]
    pub z_load0: Complex64,
    /// Switched-in impedance (pu).
    #[serde(rename = "z_load_step_pu", with = "complex_json")]
    pub z_load_step: Complex64,
    #[serde(rename = "t_switch_s")]
    pub t_switch: f64,
    #[serde(rename = "t_end_s")]
    pub t_end: f64,
    #[serde(rename = "dt_s")]
    pub dt: f64,
    /// Washout time constant for the bus-frequency estimate (s).
    #[serde(rename = "bus_freq_filter_tc_s", default = "default_tc")]
    pub bus_freq_filter_tc: f64,
}

fn default_tc() -> f64 {
    1e-3
}

/// Impedance that draws `delta_s = (dp, dq)` at voltage magnitude `v_pre`:
/// `z = |v|^2 / conj(dp + j dq)`.
pub fn step_impedance_for(delta_s: (f64, f64), v_pre: f64) -> Complex64 {
    let s = Complex64::new(delta_s.0, -delta_s.1);
    v_pre * v_pre / s
}

impl SimScenario {
    /// Scenario with the switched impedance sized from a target load step
    /// at the dispatch bus voltage.
    pub fn with_target_step(
        cfg: SystemConfig,
        z_line: Complex64,
        z_load0: Complex64,
        target_delta_s: (f64, f64),
        t_switch: f64,
        t_end: f64,
        dt: f64,
    ) -> SimScenario {
        SimScenario {
            cfg,
            z_line,
            z_load0,
            z_load_step: step_impedance_for(target_delta_s, cfg.dispatch.v_b0),
            t_switch,
            t_end,
            dt,
            bus_freq_filter_tc: default_tc(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.cfg.validate()?;
        if !(self.dt > 0.0) {
            return Err(Error::InvalidArgument {
                detail: "dt_s must be > 0".into(),
            });
        }
        if !(self.t_switch < self.t_end) {
            return Err(Error::InvalidArgument {
                detail: "t_switch_s must be < t_end_s".into(),
            });
        }
        if !(self.bus_freq_filter_tc > 0.0) {
            return Err(Error::InvalidArgument {
                detail: "bus_freq_filter_tc_s must be > 0".into(),
            });
        }
        for (name, z) in [
            ("z_load0_pu", self.z_load0),
            ("z_load_step_pu", self.z_load_step),
        ] {
            if z.norm() == 0.0 || z.re < 0.0 {
                return Err(Error::InvalidArgument {
                    detail: format!("{name} must have nonnegative real part and nonzero magnitude"),
                });
            }
        }
        if self.z_line.re < 0.0 {
            return Err(Error::InvalidArgument {
                detail: "z_line_pu must have nonnegative real part".into(),
            });
        }
        Ok(())
    }
}

/// Sampled simulation output on the uniform grid.
#[derive(Clone, Debug)]
pub struct TimeSeries {
    pub t: Vec<f64>,
    pub omega_v: Vec<f64>,
    pub omega_s: Vec<f64>,
    pub v_v: Vec<f64>,
    pub v_s: Vec<f64>,
    pub p_v: Vec<f64>,
    pub q_v: Vec<f64>,
    pub p_s: Vec<f64>,
    pub q_s: Vec<f64>,
    pub v_bus: Vec<f64>,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn dt(&self) -> f64 {
        if self.t.len() >= 2 {
            self.t[1] - self.t[0]
        } else {
            0.0
        }
    }

    fn columns(&self) -> [(&'static str, &[f64]); 9] {
        [
            ("omega_v_pu", &self.omega_v),
            ("omega_s_pu", &self.omega_s),
            ("v_v_pu", &self.v_v),
            ("v_s_pu", &self.v_s),
            ("p_v_pu", &self.p_v),
            ("q_v_pu", &self.q_v),
            ("p_s_pu", &self.p_s),
            ("q_s_pu", &self.q_s),
            ("v_bus_pu", &self.v_bus),
        ]
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(
            w,
            "t_s,omega_v_pu,omega_s_pu,v_v_pu,v_s_pu,p_v_pu,q_v_pu,p_s_pu,q_s_pu,v_bus_pu"
        )?;
        for i in 0..self.len() {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                self.t[i],
                self.omega_v[i],
                self.omega_s[i],
                self.v_v[i],
                self.v_s[i],
                self.p_v[i],
                self.q_v[i],
                self.p_s[i],
                self.q_s[i],
                self.v_bus[i]
            )?;
        }
        Ok(())
    }
}

/// Run diagnostics for equilibrium quality checks.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SimDiagnostics {
    pub equilibrium_residual: f64,
    /// Max |dx/dt| over all states at t = 0 with the switch open.
    pub initial_derivative_norm: f64,
    /// Rotating-frame speed (convention units).
    pub omega_frame: f64,
}

/// Phasor solution of the network at one instant.
#[derive(Clone, Copy, Debug)]
pub struct NetworkSolution {
    pub v_term_v: Complex64,
    pub v_term_s: Complex64,
    pub v_load: Complex64,
    /// Machine complex powers measured at the terminal nodes.
    pub s_v: Complex64,
    pub s_s: Complex64,
}

/// Immutable impedance data of the nodal solve.
pub struct Network {
    pub z_v: Complex64,
    pub z_s: Complex64,
    pub z_line: Complex64,
    pub y_load0: Complex64,
    pub y_step: Complex64,
}

impl Network {
    pub fn from_scenario(sc: &SimScenario) -> Network {
        Network {
            z_v: Complex64::new(sc.cfg.vsg.r, sc.cfg.vsg.x),
            z_s: Complex64::new(sc.cfg.sg.r, sc.cfg.sg.x),
            z_line: sc.z_line,
            y_load0: 1.0 / sc.z_load0,
            y_step: 1.0 / sc.z_load_step,
        }
    }
}

/// Solve the linear complex nodal system for the given internal sources.
pub fn solve_network(
    e_v: Complex64,
    e_s: Complex64,
    net: &Network,
    switch_closed: bool,
) -> Result<NetworkSolution> {
    let y_l = net.y_load0 + if switch_closed { net.y_step } else { Complex64::new(0.0, 0.0) };
    let y_v = 1.0 / net.z_v;
    let y_s = 1.0 / net.z_s;
    if net.z_line.norm() < 1e-12 {
        // terminal nodes coincide with the load node
        let v = (y_v * e_v + y_s * e_s) / (y_v + y_s + y_l);
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(Error::SingularNetwork {
                detail: "degenerate single-node divider".into(),
            });
        }
        let i_v = (e_v - v) * y_v;
        let i_s = (e_s - v) * y_s;
        return Ok(NetworkSolution {
            v_term_v: v,
            v_term_s: v,
            v_load: v,
            s_v: v * i_v.conj(),
            s_s: v * i_s.conj(),
        });
    }
    let y_ln = 1.0 / net.z_line;
    let zero = Complex64::new(0.0, 0.0);
    let a = Matrix3::new(
        y_v + y_ln,
        zero,
        -y_ln,
        zero,
        y_s + y_ln,
        -y_ln,
        -y_ln,
        -y_ln,
        2.0 * y_ln + y_l,
    );
    let b = Vector3::new(y_v * e_v, y_s * e_s, zero);
    let sol = a.lu().solve(&b).ok_or(Error::SingularNetwork {
        detail: "nodal matrix is singular".into(),
    })?;
    let (v_tv, v_ts, v_l) = (sol[0], sol[1], sol[2]);
    let i_v = (e_v - v_tv) * y_v;
    let i_s = (e_s - v_ts) * y_s;
    Ok(NetworkSolution {
        v_term_v: v_tv,
        v_term_s: v_ts,
        v_load: v_l,
        s_v: v_tv * i_v.conj(),
        s_s: v_ts * i_s.conj(),
    })
}

/// Droop references: operating-point anchored, so the perturbation
/// variables of the analytic model are zero at the pre-switch equilibrium.
#[derive(Clone, Copy, Debug)]
struct References {
    p_v: f64,
    q_v: f64,
    v_v: f64,
    p_s: f64,
    q_s: f64,
    v_s: f64,
}

impl References {
    fn from_config(cfg: &SystemConfig) -> Result<References> {
        let op = solve_operating_point(cfg)?;
        Ok(References {
            p_v: cfg.dispatch.p_v0,
            q_v: cfg.dispatch.q_v0,
            v_v: op.v_v0,
            p_s: cfg.dispatch.p_s0,
            q_s: cfg.dispatch.q_s0,
            v_s: op.v_s0,
        })
    }
}

struct Equilibrium {
    v_v: f64,
    v_s: f64,
    psi_v: f64,
    psi_s: f64,
    omega_sys: f64,
    residual: f64,
}

/// Newton solve of the closed-loop pre-switch equilibrium:
/// unknowns (v_v, v_s, psi_v, psi_s, omega_sys) with the load-node angle
/// gauged to zero.
fn solve_equilibrium(sc: &SimScenario, net: &Network, refs: &References) -> Result<Equilibrium> {
    let cfg = &sc.cfg;
    let omega_ref = match cfg.freq_convention {
        crate::model::FreqConvention::PerUnit => 1.0,
        crate::model::FreqConvention::RadPerSec => cfg.omega_n,
    };
    let residual = |x: &[f64; 5]| -> Result<[f64; 5]> {
        let [v_v, v_s, psi_v, psi_s, w] = *x;
        let e_v = Complex64::from_polar(v_v, psi_v);
        let e_s = Complex64::from_polar(v_s, psi_s);
        let sol = solve_network(e_v, e_s, net, false)?;
        Ok([
            sol.s_v.re - (refs.p_v - cfg.vsg.kp * (w - omega_ref)),
            sol.s_s.re - (refs.p_s - cfg.sg.kp * (w - omega_ref)),
            v_v - (refs.v_v + cfg.vsg.kq * (refs.q_v - sol.s_v.im)),
            v_s - (refs.v_s + cfg.sg.kq * (refs.q_s - sol.s_s.im)),
            sol.v_load.im,
        ])
    };
    let mut x = [refs.v_v, refs.v_s, 0.1, 0.1, omega_ref];
    let mut res_norm = f64::INFINITY;
    for _ in 0..100 {
        let r = residual(&x)?;
        res_norm = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if res_norm < 1e-13 {
            break;
        }
        // finite-difference Jacobian
        let mut jac = [[0.0f64; 5]; 5];
        for j in 0..5 {
            let h = 1e-7 * (1.0 + x[j].abs());
            let mut xp = x;
            xp[j] += h;
            let mut xm = x;
            xm[j] -= h;
            let rp = residual(&xp)?;
            let rm = residual(&xm)?;
            for i in 0..5 {
                jac[i][j] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
        let a = nalgebra::Matrix5::from_fn(|i, j| jac[i][j]);
        let b = nalgebra::Vector5::from_fn(|i, _| -r[i]);
        let dx = a.lu().solve(&b).ok_or(Error::SingularJacobian { cond: f64::NAN })?;
        for i in 0..5 {
            x[i] += dx[i];
        }
    }
    if res_norm > 1e-10 {
        return Err(Error::EquilibriumFailed { residual: res_norm });
    }
    Ok(Equilibrium {
        v_v: x[0],
        v_s: x[1],
        psi_v: x[2],
        psi_s: x[3],
        omega_sys: x[4],
        residual: res_norm,
    })
}

// state vector layout
const W_V: usize = 0;
const G_V: usize = 1;
const U_V: usize = 2;
const D_V: usize = 3;
const W_S: usize = 4;
const G_S: usize = 5;
const U_S: usize = 6;
const D_S: usize = 7;
const WASH: usize = 8;
const NSTATE: usize = 9;

struct Dynamics<'a> {
    cfg: &'a SystemConfig,
    net: &'a Network,
    refs: &'a References,
    tc: f64,
    omega_frame: f64,
    omega_ref: f64,
    angle_gain: f64,
}

impl Dynamics<'_> {
    fn machine_terms(
        &self,
        m: &MachineParams,
        w: f64,
        gov: f64,
        p: f64,
        w_b: f64,
    ) -> (f64, f64) {
        let momentum = self.cfg.freq_convention.momentum(m.h, self.cfg.omega_n);
        let dw = (gov - p - m.d * (w - w_b)) / momentum;
        (momentum, dw)
    }

    /// Derivative and auxiliary outputs at one stage. `prev_angle` anchors
    /// the branch of the load-node angle.
    fn eval(
        &self,
        x: &[f64; NSTATE],
        closed: bool,
        prev_angle: f64,
    ) -> Result<([f64; NSTATE], NetworkSolution, f64)> {
        let e_v = Complex64::from_polar(self.refs.v_v + x[U_V], x[D_V]);
        let e_s = Complex64::from_polar(self.refs.v_s + x[U_S], x[D_S]);
        let sol = solve_network(e_v, e_s, self.net, closed)?;
        let mut ang = sol.v_load.arg();
        while ang - prev_angle > std::f64::consts::PI {
            ang -= 2.0 * std::f64::consts::PI;
        }
        while ang - prev_angle < -std::f64::consts::PI {
            ang += 2.0 * std::f64::consts::PI;
        }
        let w_b = self.omega_frame + (ang - x[WASH]) / (self.tc * self.angle_gain);
        let mut dx = [0.0; NSTATE];
        let (_, dw_v) = self.machine_terms(&self.cfg.vsg, x[W_V], x[G_V], sol.s_v.re, w_b);
        let (_, dw_s) = self.machine_terms(&self.cfg.sg, x[W_S], x[G_S], sol.s_s.re, w_b);
        dx[W_V] = dw_v;
        dx[G_V] = ((self.refs.p_v - self.cfg.vsg.kp * (x[W_V] - self.omega_ref)) - x[G_V])
            / self.cfg.vsg.tp;
        dx[U_V] = (self.cfg.vsg.kq * (self.refs.q_v - sol.s_v.im) - x[U_V]) / self.cfg.vsg.tq;
        dx[D_V] = self.angle_gain * (x[W_V] - self.omega_frame);
        dx[W_S] = dw_s;
        dx[G_S] = ((self.refs.p_s - self.cfg.sg.kp * (x[W_S] - self.omega_ref)) - x[G_S])
            / self.cfg.sg.tp;
        dx[U_S] = (self.cfg.sg.kq * (self.refs.q_s - sol.s_s.im) - x[U_S]) / self.cfg.sg.tq;
        dx[D_S] = self.angle_gain * (x[W_S] - self.omega_frame);
        dx[WASH] = (ang - x[WASH]) / self.tc;
        Ok((dx, sol, ang))
    }
}

/// Integrate the scenario and sample every state/output on the `dt` grid.
pub fn run_simulation(sc: &SimScenario) -> Result<(TimeSeries, SimDiagnostics)> {
    sc.validate()?;
    let cfg = &sc.cfg;
    let net = Network::from_scenario(sc);
    let refs = References::from_config(cfg)?;
    let eq = solve_equilibrium(sc, &net, &refs)?;
    let omega_ref = match cfg.freq_convention {
        crate::model::FreqConvention::PerUnit => 1.0,
        crate::model::FreqConvention::RadPerSec => cfg.omega_n,
    };
    let dyn_ = Dynamics {
        cfg,
        net: &net,
        refs: &refs,
        tc: sc.bus_freq_filter_tc,
        omega_frame: eq.omega_sys,
        omega_ref,
        angle_gain: cfg.freq_convention.angle_gain(cfg.omega_n),
    };

    // exact fixed point of the open-switch dynamics
    let e_v = Complex64::from_polar(eq.v_v, eq.psi_v);
    let e_s = Complex64::from_polar(eq.v_s, eq.psi_s);
    let sol0 = solve_network(e_v, e_s, &net, false)?;
    let mut x = [0.0; NSTATE];
    x[W_V] = eq.omega_sys;
    x[G_V] = refs.p_v - cfg.vsg.kp * (eq.omega_sys - omega_ref);
    x[U_V] = cfg.vsg.kq * (refs.q_v - sol0.s_v.im);
    x[D_V] = eq.psi_v;
    x[W_S] = eq.omega_sys;
    x[G_S] = refs.p_s - cfg.sg.kp * (eq.omega_sys - omega_ref);
    x[U_S] = cfg.sg.kq * (refs.q_s - sol0.s_s.im);
    x[D_S] = eq.psi_s;
    x[WASH] = sol0.v_load.arg();

    let mut prev_angle = sol0.v_load.arg();
    let (dx0, _, _) = dyn_.eval(&x, false, prev_angle)?;
    let diag = SimDiagnostics {
        equilibrium_residual: eq.residual,
        initial_derivative_norm: dx0.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        omega_frame: eq.omega_sys,
    };

    let n = (sc.t_end / sc.dt).round() as usize;
    let mut ts = TimeSeries {
        t: Vec::with_capacity(n + 1),
        omega_v: Vec::with_capacity(n + 1),
        omega_s: Vec::with_capacity(n + 1),
        v_v: Vec::with_capacity(n + 1),
        v_s: Vec::with_capacity(n + 1),
        p_v: Vec::with_capacity(n + 1),
        q_v: Vec::with_capacity(n + 1),
        p_s: Vec::with_capacity(n + 1),
        q_s: Vec::with_capacity(n + 1),
        v_bus: Vec::with_capacity(n + 1),
    };
    let dt = sc.dt;
    let switch_eps = 0.25 * dt;
    for i in 0..=n {
        let t = i as f64 * dt;
        let closed = t >= sc.t_switch - switch_eps;
        let (d1, sol, ang) = dyn_.eval(&x, closed, prev_angle)?;
        prev_angle = ang;
        ts.t.push(t);
        ts.omega_v.push(x[W_V]);
        ts.omega_s.push(x[W_S]);
        ts.v_v.push(refs.v_v + x[U_V]);
        ts.v_s.push(refs.v_s + x[U_S]);
        ts.p_v.push(sol.s_v.re);
        ts.q_v.push(sol.s_v.im);
        ts.p_s.push(sol.s_s.re);
        ts.q_s.push(sol.s_s.im);
        ts.v_bus.push(sol.v_load.norm());
        if i == n {
            break;
        }
        let mid_closed = t + 0.5 * dt >= sc.t_switch - switch_eps;
        let end_closed = t + dt >= sc.t_switch - switch_eps;
        let step = |x: &[f64; NSTATE], d: &[f64; NSTATE], h: f64| {
            let mut y = *x;
            for k in 0..NSTATE {
                y[k] += h * d[k];
            }
            y
        };
        let (d2, _, _) = dyn_.eval(&step(&x, &d1, 0.5 * dt), mid_closed, prev_angle)?;
        let (d3, _, _) = dyn_.eval(&step(&x, &d2, 0.5 * dt), mid_closed, prev_angle)?;
        let (d4, _, _) = dyn_.eval(&step(&x, &d3, dt), end_closed, prev_angle)?;
        for k in 0..NSTATE {
            x[k] += dt / 6.0 * (d1[k] + 2.0 * d2[k] + 2.0 * d3[k] + d4[k]);
        }
        let norm = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !norm.is_finite() || norm > 1e6 {
            return Err(Error::Divergence { t, norm });
        }
    }
    Ok((ts, diag))
}

/// Powers measured per machine over an averaging window.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct MeasuredPowers {
    pub p_v: f64,
    pub q_v: f64,
    pub p_s: f64,
    pub q_s: f64,
}

fn window_indices(ts: &TimeSeries, window: (f64, f64)) -> Result<(usize, usize)> {
    let dt = ts.dt();
    if dt <= 0.0 {
        return Err(Error::UnsettledWindow {
            detail: "time series too short".into(),
        });
    }
    let i0 = (window.0 / dt).round() as usize;
    let i1 = (window.1 / dt).round() as usize;
    if i0 >= i1 || i1 >= ts.len() {
        return Err(Error::UnsettledWindow {
            detail: format!("window ({}, {}) outside the sampled range", window.0, window.1),
        });
    }
    Ok((i0, i1))
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Time-average the pre-switch window into an operating point usable by the
/// linearization, recovering the stator angles from the measured active
/// powers. Errors when the window is not settled.
pub fn extract_operating_point(
    ts: &TimeSeries,
    window: (f64, f64),
    cfg: &SystemConfig,
) -> Result<(OperatingPoint, MeasuredPowers)> {
    let (i0, i1) = window_indices(ts, window)?;
    let dt = ts.dt();
    // settledness: every signal's discrete slope below threshold
    let max_slope = ts
        .columns()
        .iter()
        .map(|(_, col)| {
            col[i0..i1]
                .windows(2)
                .map(|w| (w[1] - w[0]).abs() / dt)
                .fold(0.0f64, f64::max)
        })
        .fold(0.0f64, f64::max);
    if max_slope > 1e-4 {
        return Err(Error::UnsettledWindow {
            detail: format!("max signal slope {max_slope:.3e} pu/s in window"),
        });
    }
    let powers = MeasuredPowers {
        p_v: mean(&ts.p_v[i0..i1]),
        q_v: mean(&ts.q_v[i0..i1]),
        p_s: mean(&ts.p_s[i0..i1]),
        q_s: mean(&ts.q_s[i0..i1]),
    };
    let v_v0 = mean(&ts.v_v[i0..i1]);
    let v_s0 = mean(&ts.v_s[i0..i1]);
    let v_b0 = mean(&ts.v_bus[i0..i1]);
    let theta_v0 = solve_theta(&cfg.vsg, powers.p_v, v_v0, v_b0)?;
    let theta_s0 = solve_theta(&cfg.sg, powers.p_s, v_s0, v_b0)?;
    Ok((
        OperatingPoint {
            v_v0,
            v_s0,
            theta_v0,
            theta_s0,
            v_b0,
        },
        powers,
    ))
}

/// Invert the active-power flow equation for the stator angle.
fn solve_theta(m: &MachineParams, p: f64, v: f64, v_b: f64) -> Result<f64> {
    let mut theta = 0.1f64;
    for _ in 0..60 {
        let (pc, _) = machine_pq(m, v, v_b, theta);
        let r = pc - p;
        if r.abs() < 1e-13 {
            return Ok(theta);
        }
        let d = m.r * m.r + m.x * m.x;
        let dp = (-m.r * v * v_b * theta.sin() + m.x * v * v_b * theta.cos()) / d;
        if dp.abs() < 1e-12 {
            break;
        }
        theta -= r / dp;
        if theta.abs() > std::f64::consts::FRAC_PI_2 {
            theta = theta.signum() * 1.4;
        }
    }
    let (pc, _) = machine_pq(m, v, v_b, theta);
    if (pc - p).abs() < 1e-10 {
        Ok(theta)
    } else {
        Err(Error::NonConvergence {
            iterations: 60,
            residual: (pc - p).abs(),
        })
    }
}

/// Realized load step: settled machine-power totals minus the pre-switch
/// totals. A constant-impedance load draws less than its nominal sizing
/// once the bus voltage sags, so this measured jump is the input amplitude
/// the linear model should be driven with.
pub fn measured_load_jump(ts: &TimeSeries, t_switch: f64) -> Result<(f64, f64)> {
    let t_end = *ts.t.last().unwrap_or(&0.0);
    let (pre0, pre1) = window_indices(ts, (0.5 * t_switch, t_switch))?;
    let settle = (t_end - t_switch) * 0.25;
    let (post0, post1) = window_indices(ts, (t_end - settle.min(2.0), t_end))?;
    let p_pre = mean(&ts.p_v[pre0..pre1]) + mean(&ts.p_s[pre0..pre1]);
    let q_pre = mean(&ts.q_v[pre0..pre1]) + mean(&ts.q_s[pre0..pre1]);
    let p_post = mean(&ts.p_v[post0..post1]) + mean(&ts.p_s[post0..post1]);
    let q_post = mean(&ts.q_v[post0..post1]) + mean(&ts.q_s[post0..post1]);
    Ok((p_post - p_pre, q_post - q_pre))
}

/// Deviation between the simulated traces and the linear prediction.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DeviationReport {
    pub max_abs_omega: f64,
    pub max_abs_v: f64,
    /// Max deviation normalized by the peak linear excursion.
    pub normalized_omega: f64,
    pub normalized_v: f64,
    pub peak_linear_omega: f64,
    pub peak_linear_v: f64,
    pub resampled: bool,
}

/// Compare the simulated target-machine traces after the switch against the
/// superposed linear step responses driven by `step = (dp_L, dq_L)`.
pub fn compare_with_linear(
    ts: &TimeSeries,
    tf: &TransferMatrix,
    step: (f64, f64),
    t_switch: f64,
) -> Result<DeviationReport> {
    let dt = ts.dt();
    let isw = (t_switch / dt).round() as usize;
    if isw == 0 || isw + 2 >= ts.len() {
        return Err(Error::InvalidArgument {
            detail: "switch time outside sampled range".into(),
        });
    }
    let (pre0, pre1) = window_indices(ts, (0.5 * t_switch, t_switch))?;
    let (w_sig, v_sig) = match tf.target {
        crate::model::Machine::Sg => (&ts.omega_s, &ts.v_s),
        crate::model::Machine::Vsg => (&ts.omega_v, &ts.v_v),
    };
    let w_base = mean(&w_sig[pre0..pre1]);
    let v_base = mean(&v_sig[pre0..pre1]);

    let n_post = ts.len() - 1 - isw;
    let t_end_post = n_post as f64 * dt;
    let mut dw_lin = vec![0.0; n_post + 1];
    let mut dv_lin = vec![0.0; n_post + 1];
    let accumulate = |chan: ChannelId, scale: f64, acc: &mut [f64]| -> Result<()> {
        if scale == 0.0 {
            return Ok(());
        }
        let resp = step_response(tf.channel(chan), scale, t_end_post, dt, chan)?;
        for (a, v) in acc.iter_mut().zip(resp.value.iter()) {
            *a += v;
        }
        Ok(())
    };
    accumulate(ChannelId::PToW, step.0, &mut dw_lin)?;
    accumulate(ChannelId::QToW, step.1, &mut dw_lin)?;
    accumulate(ChannelId::PToV, step.0, &mut dv_lin)?;
    accumulate(ChannelId::QToV, step.1, &mut dv_lin)?;
    let mut max_w = 0.0f64;
    let mut max_v = 0.0f64;
    let mut peak_w = 0.0f64;
    let mut peak_v = 0.0f64;
    for i in 0..=n_post {
        let sim_w = w_sig[isw + i] - w_base;
        let sim_v = v_sig[isw + i] - v_base;
        max_w = max_w.max((sim_w - dw_lin[i]).abs());
        max_v = max_v.max((sim_v - dv_lin[i]).abs());
        peak_w = peak_w.max(dw_lin[i].abs());
        peak_v = peak_v.max(dv_lin[i].abs());
    }
    Ok(DeviationReport {
        max_abs_omega: max_w,
        max_abs_v: max_v,
        normalized_omega: if peak_w > 0.0 { max_w / peak_w } else { 0.0 },
        normalized_v: if peak_v > 0.0 { max_v / peak_v } else { 0.0 },
        peak_linear_omega: peak_w,
        peak_linear_v: peak_v,
        resampled: false,
    })
}

/// Apparent power the step branch draws at a given voltage magnitude.
pub fn step_branch_power(sc: &SimScenario, v_mag: f64) -> Complex64 {
    v_mag * v_mag * (1.0 / sc.z_load_step).conj()
}
