//! Domain types, unit conventions and configuration parsing.
//!
//! All electrical quantities are per-unit on the bases `(s_n, v_n, omega_n)`.
//! Internally the small-signal frequency deviation is per-unit as well
//! ([`FreqConvention::PerUnit`], the default): the swing equation then uses
//! an angular momentum of `2H` seconds and the angle integrates
//! `s*dtheta = omega_n * (dw - dw_b)`, which makes a frequency droop of
//! 20 pu the conventional 5% droop. [`FreqConvention::RadPerSec`] keeps the
//! deviation in rad/s (momentum `2H/omega_n`, unscaled angle equation) for
//! comparison.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Per-machine physical and control constants, per-unit except the time
/// constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MachineParams {
    /// Inertia constant (s).
    #[serde(rename = "h_s")]
    pub h: f64,
    /// Damper winding constant (pu).
    #[serde(rename = "d_pu")]
    pub d: f64,
    /// Frequency droop (pu).
    #[serde(rename = "kp_pu")]
    pub kp: f64,
    /// Governor lag (s).
    #[serde(rename = "tp_s")]
    pub tp: f64,
    /// QV droop (pu).
    #[serde(rename = "kq_pu")]
    pub kq: f64,
    /// QV droop lag (s).
    #[serde(rename = "tq_s")]
    pub tq: f64,
    /// Stator resistance (pu).
    #[serde(rename = "r_pu")]
    pub r: f64,
    /// Stator reactance (pu).
    #[serde(rename = "x_pu")]
    pub x: f64,
}

impl MachineParams {
    /// VSG defaults (damper winding constant 17 pu).
    pub fn default_vsg() -> Self {
        MachineParams {
            h: 4.0,
            d: 17.0,
            kp: 20.0,
            tp: 1.0,
            kq: 0.1,
            tq: 0.1,
            r: 0.0,
            x: 0.2,
        }
    }

    /// SG defaults (damper winding constant 3 pu).
    pub fn default_sg() -> Self {
        MachineParams {
            d: 3.0,
            ..Self::default_vsg()
        }
    }

    pub fn validate(&self, prefix: &str) -> Result<()> {
        let check = |name: &str, value: f64, ok: bool, bound: &str| -> Result<()> {
            if ok && value.is_finite() {
                Ok(())
            } else {
                Err(Error::Invariant {
                    field: format!("{prefix}.{name}"),
                    bound: bound.to_string(),
                    value,
                })
            }
        };
        check("h_s", self.h, self.h > 0.0, "must be > 0")?;
        check("x_pu", self.x, self.x > 0.0, "must be > 0")?;
        check("r_pu", self.r, self.r >= 0.0, "must be >= 0")?;
        check("tp_s", self.tp, self.tp > 0.0, "must be > 0")?;
        check("tq_s", self.tq, self.tq > 0.0, "must be > 0")?;
        check("kp_pu", self.kp, self.kp >= 0.0, "must be >= 0")?;
        check("kq_pu", self.kq, self.kq >= 0.0, "must be >= 0")?;
        check("d_pu", self.d, self.d >= 0.0, "must be >= 0")?;
        Ok(())
    }
}

/// Steady-state power setpoints and the bus voltage target.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dispatch {
    #[serde(rename = "p_v0_pu")]
    pub p_v0: f64,
    #[serde(rename = "q_v0_pu")]
    pub q_v0: f64,
    #[serde(rename = "p_s0_pu")]
    pub p_s0: f64,
    #[serde(rename = "q_s0_pu")]
    pub q_s0: f64,
    #[serde(rename = "v_b0_pu")]
    pub v_b0: f64,
}

impl Dispatch {
    pub fn validate(&self) -> Result<()> {
        if self.v_b0 > 0.0 && self.v_b0.is_finite() {
            Ok(())
        } else {
            Err(Error::Invariant {
                field: "dispatch.v_b0_pu".into(),
                bound: "must be > 0".into(),
                value: self.v_b0,
            })
        }
    }
}

impl Default for Dispatch {
    fn default() -> Self {
        Dispatch {
            p_v0: 0.5,
            q_v0: 0.5,
            p_s0: 0.5,
            q_s0: 0.5,
            v_b0: 1.0,
        }
    }
}

/// Unit of the small-signal frequency deviation variables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FreqConvention {
    #[default]
    PerUnit,
    RadPerSec,
}

impl FreqConvention {
    /// Effective angular momentum in the swing equation.
    pub fn momentum(&self, h: f64, omega_n: f64) -> f64 {
        match self {
            FreqConvention::PerUnit => 2.0 * h,
            FreqConvention::RadPerSec => 2.0 * h / omega_n,
        }
    }

    /// Gain of the angle equation `s*dtheta = gain * (dw - dw_b)`.
    pub fn angle_gain(&self, omega_n: f64) -> f64 {
        match self {
            FreqConvention::PerUnit => omega_n,
            FreqConvention::RadPerSec => 1.0,
        }
    }
}

/// Full system description shared by every pipeline stage.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub vsg: MachineParams,
    pub sg: MachineParams,
    /// Nominal angular frequency (rad/s).
    #[serde(rename = "omega_n_rad_s")]
    pub omega_n: f64,
    /// Power base (VA).
    #[serde(rename = "s_n_va")]
    pub s_n: f64,
    /// Voltage base (V, phase-phase RMS).
    #[serde(rename = "v_n_v")]
    pub v_n: f64,
    pub dispatch: Dispatch,
    pub freq_convention: FreqConvention,
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        self.vsg.validate("vsg")?;
        self.sg.validate("sg")?;
        self.dispatch.validate()?;
        let check = |name: &str, value: f64| -> Result<()> {
            if value > 0.0 && value.is_finite() {
                Ok(())
            } else {
                Err(Error::Invariant {
                    field: name.into(),
                    bound: "must be > 0".into(),
                    value,
                })
            }
        };
        check("omega_n_rad_s", self.omega_n)?;
        check("s_n_va", self.s_n)?;
        check("v_n_v", self.v_n)?;
        Ok(())
    }
}

/// The default study: 1 MVA / 6.6 kV / 60 Hz bases, equal dispatch of
/// 0.5 + j0.5 pu per machine at a 1 pu bus.
pub fn default_base_case() -> SystemConfig {
    SystemConfig {
        vsg: MachineParams::default_vsg(),
        sg: MachineParams::default_sg(),
        omega_n: 2.0 * std::f64::consts::PI * 60.0,
        s_n: 1.0e6,
        v_n: 6.6e3,
        dispatch: Dispatch::default(),
        freq_convention: FreqConvention::PerUnit,
    }
}

/// Steady-state solution of the two-machine power flow.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    /// Internal voltage magnitudes (pu).
    #[serde(rename = "v_v0_pu")]
    pub v_v0: f64,
    #[serde(rename = "v_s0_pu")]
    pub v_s0: f64,
    /// Angle differences over the stator impedance (rad).
    #[serde(rename = "theta_v0_rad")]
    pub theta_v0: f64,
    #[serde(rename = "theta_s0_rad")]
    pub theta_s0: f64,
    /// Bus voltage magnitude (pu).
    #[serde(rename = "v_b0_pu")]
    pub v_b0: f64,
}

/// One machine's view of the operating point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MachinePoint {
    pub v0: f64,
    pub theta0: f64,
    pub v_b0: f64,
}

/// Which machine a quantity belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Machine {
    Vsg,
    Sg,
}

impl OperatingPoint {
    pub fn machine(&self, which: Machine) -> MachinePoint {
        match which {
            Machine::Vsg => MachinePoint {
                v0: self.v_v0,
                theta0: self.theta_v0,
                v_b0: self.v_b0,
            },
            Machine::Sg => MachinePoint {
                v0: self.v_s0,
                theta0: self.theta_s0,
                v_b0: self.v_b0,
            },
        }
    }
}

// ---------------------------------------------------------------------------
// configuration document
// ---------------------------------------------------------------------------

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawMachine {
    h_s: Option<f64>,
    d_pu: Option<f64>,
    kp_pu: Option<f64>,
    tp_s: Option<f64>,
    kq_pu: Option<f64>,
    tq_s: Option<f64>,
    r_pu: Option<f64>,
    x_pu: Option<f64>,
}

impl RawMachine {
    fn fill(&self, defaults: MachineParams) -> MachineParams {
        MachineParams {
            h: self.h_s.unwrap_or(defaults.h),
            d: self.d_pu.unwrap_or(defaults.d),
            kp: self.kp_pu.unwrap_or(defaults.kp),
            tp: self.tp_s.unwrap_or(defaults.tp),
            kq: self.kq_pu.unwrap_or(defaults.kq),
            tq: self.tq_s.unwrap_or(defaults.tq),
            r: self.r_pu.unwrap_or(defaults.r),
            x: self.x_pu.unwrap_or(defaults.x),
        }
    }
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawDispatch {
    p_v0_pu: Option<f64>,
    q_v0_pu: Option<f64>,
    p_s0_pu: Option<f64>,
    q_s0_pu: Option<f64>,
    v_b0_pu: Option<f64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    vsg: Option<RawMachine>,
    sg: Option<RawMachine>,
    omega_n_rad_s: Option<f64>,
    s_n_va: Option<f64>,
    v_n_v: Option<f64>,
    dispatch: Option<RawDispatch>,
    freq_convention: Option<FreqConvention>,
}

/// Parse a JSON configuration document; missing fields fall back to the
/// defaults of [`default_base_case`], everything else is validated.
pub fn load_config(text: &str) -> Result<SystemConfig> {
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| Error::Schema {
        path: format!("line {}, column {}", e.line(), e.column()),
        detail: e.to_string(),
    })?;
    let defaults = default_base_case();
    let d = raw.dispatch.unwrap_or_default();
    let cfg = SystemConfig {
        vsg: raw.vsg.unwrap_or_default().fill(defaults.vsg),
        sg: raw.sg.unwrap_or_default().fill(defaults.sg),
        omega_n: raw.omega_n_rad_s.unwrap_or(defaults.omega_n),
        s_n: raw.s_n_va.unwrap_or(defaults.s_n),
        v_n: raw.v_n_v.unwrap_or(defaults.v_n),
        dispatch: Dispatch {
            p_v0: d.p_v0_pu.unwrap_or(defaults.dispatch.p_v0),
            q_v0: d.q_v0_pu.unwrap_or(defaults.dispatch.q_v0),
            p_s0: d.p_s0_pu.unwrap_or(defaults.dispatch.p_s0),
            q_s0: d.q_s0_pu.unwrap_or(defaults.dispatch.q_s0),
            v_b0: d.v_b0_pu.unwrap_or(defaults.dispatch.v_b0),
        },
        freq_convention: raw.freq_convention.unwrap_or_default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Serialize a configuration so that [`load_config`] round-trips it.
pub fn serialize_config(cfg: &SystemConfig) -> Result<String> {
    Ok(serde_json::to_string_pretty(cfg)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn base_case_matches_table_defaults() {
        let cfg = default_base_case();
        assert_abs_diff_eq!(cfg.omega_n, 376.991, epsilon = 1e-3);
        assert_eq!(cfg.vsg.d, 17.0);
        assert_eq!(cfg.sg.d, 3.0);
        assert_eq!(cfg.vsg.h, 4.0);
        assert_eq!(cfg.sg.h, 4.0);
        assert_eq!(cfg.vsg.kp, 20.0);
        assert_eq!(cfg.vsg.tp, 1.0);
        assert_eq!(cfg.vsg.kq, 0.1);
        assert_eq!(cfg.vsg.tq, 0.1);
        assert_eq!(cfg.vsg.r, 0.0);
        assert_eq!(cfg.vsg.x, 0.2);
        assert_eq!(cfg.s_n, 1.0e6);
        assert_eq!(cfg.v_n, 6.6e3);
        assert_eq!(cfg.dispatch, Dispatch::default());
    }

    #[test]
    fn full_document_round_trips() {
        let cfg = default_base_case();
        let text = serialize_config(&cfg).unwrap();
        let parsed = load_config(&text).unwrap();
        assert_eq!(parsed, cfg);
    }

    #[test]
    fn empty_document_gives_defaults() {
        let parsed = load_config("{}").unwrap();
        assert_eq!(parsed, default_base_case());
    }

    #[test]
    fn machine_fields_fall_back_individually() {
        let parsed = load_config(r#"{"vsg": {"h_s": 6.0}}"#).unwrap();
        assert_eq!(parsed.vsg.h, 6.0);
        assert_eq!(parsed.vsg.d, 17.0);
        assert_eq!(parsed.sg, MachineParams::default_sg());
    }

    #[test]
    fn negative_inertia_names_the_field() {
        let err = load_config(r#"{"vsg": {"h_s": -1.0}}"#).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("vsg.h_s"), "{msg}");
    }

    #[test]
    fn unknown_field_is_a_schema_error() {
        let err = load_config(r#"{"vsg": {"inertia": 4.0}}"#).unwrap_err();
        assert!(matches!(err, Error::Schema { .. }));
        assert!(err.to_string().contains("inertia"));
    }

    #[test]
    fn convention_parses_both_variants() {
        let pu = load_config(r#"{"freq_convention": "per_unit"}"#).unwrap();
        assert_eq!(pu.freq_convention, FreqConvention::PerUnit);
        let rs = load_config(r#"{"freq_convention": "rad_per_sec"}"#).unwrap();
        assert_eq!(rs.freq_convention, FreqConvention::RadPerSec);
    }
}
