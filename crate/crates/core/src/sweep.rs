//! Single-parameter sensitivity studies with automated qualitative-trend
//! verdicts.
//!
//! Each study varies one VSG parameter over a preset grid (the SG stays at
//! its defaults), rebuilds the load-to-SG transfer matrix per point, and
//! checks the expected qualitative behaviour. Verdict semantics are
//! deliberately operational and documented per claim:
//!
//! * monotone claims allow a relative wiggle of `MONOTONE_TOL` of the series
//!   scale but require a strict net change;
//! * "unchanged" claims compare presentation-cancelled pole sets against
//!   the reference grid point within `UNCHANGED_TOL` relative (the exact
//!   `XV_PRIMARY_TOL` applies to the stator-reactance study, where the slow
//!   pair is insensitive to machine precision);
//! * the QV-droop-gain study checks that dc-normalized step responses
//!   coincide within `SHAPE_TOL`, which is the measurable content of "only
//!   the steady-state value differs".

use crate::analysis::{
    bode_magnitude, classify_modes, dc_gain, pole_zero, step_response, write_bode_csv,
    write_modes_csv, write_pz_csv, write_step_csv, ModeClass, DISPLAY_TOL,
};
use crate::error::{Error, Result};
use crate::model::{Machine, OperatingPoint, SystemConfig};
use crate::powerflow::solve_operating_point;
use crate::ratpoly::PoleZeroSet;
use crate::tfbuild::{build_load_to_machine, ChannelId, TransferMatrix};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const MONOTONE_TOL: f64 = 1e-3;
pub const UNCHANGED_TOL: f64 = 1e-2;
pub const XV_PRIMARY_TOL: f64 = 1e-6;
pub const SHAPE_TOL: f64 = 5e-2;

/// Step-response grid used by trend evidence and artifact emission.
pub const STEP_SIZE: f64 = 0.05;
pub const STEP_T_END: f64 = 30.0;
pub const STEP_DT: f64 = 1e-3;

/// Swept VSG parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParameter {
    /// Inertia constant (s).
    Hv,
    /// Governor lag (s).
    Tpv,
    /// Reactance-to-resistance ratio (dimensionless; infinity = zero R).
    XRv,
    /// Damper winding constant (pu); run with doubled VSG inertia.
    Dv,
    /// QV droop gain (pu).
    Kqv,
    /// QV droop lag (s).
    Tqv,
    /// Stator reactance (pu); operating point recomputed per value.
    Xv,
}

impl SweepParameter {
    pub fn name(&self) -> &'static str {
        match self {
            SweepParameter::Hv => "Hv",
            SweepParameter::Tpv => "Tpv",
            SweepParameter::XRv => "XRv",
            SweepParameter::Dv => "Dv",
            SweepParameter::Kqv => "Kqv",
            SweepParameter::Tqv => "Tqv",
            SweepParameter::Xv => "Xv",
        }
    }

    pub fn from_name(s: &str) -> Option<SweepParameter> {
        match s {
            "Hv" => Some(SweepParameter::Hv),
            "Tpv" => Some(SweepParameter::Tpv),
            "XRv" => Some(SweepParameter::XRv),
            "Dv" => Some(SweepParameter::Dv),
            "Kqv" => Some(SweepParameter::Kqv),
            "Tqv" => Some(SweepParameter::Tqv),
            "Xv" => Some(SweepParameter::Xv),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    Pz,
    Bode,
    Step,
    Modes,
}

impl ArtifactKind {
    pub const ALL: [ArtifactKind; 4] = [
        ArtifactKind::Pz,
        ArtifactKind::Bode,
        ArtifactKind::Step,
        ArtifactKind::Modes,
    ];
}

/// One sensitivity study.
#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    /// Strictly monotone grid; `f64::INFINITY` marks the zero-resistance
    /// end of the XR study.
    pub values: Vec<f64>,
    pub base: SystemConfig,
    /// Re-solve the operating point per value (forced for `Xv`).
    pub recompute_op: bool,
    pub channels: Vec<ChannelId>,
    pub outputs: Vec<ArtifactKind>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::InvalidSweep {
                detail: "empty value grid".into(),
            });
        }
        let increasing = self.values.windows(2).all(|w| w[0] < w[1]);
        let decreasing = self.values.windows(2).all(|w| w[0] > w[1]);
        if !(increasing || decreasing) {
            return Err(Error::InvalidSweep {
                detail: "grid must be strictly monotone".into(),
            });
        }
        if self.parameter == SweepParameter::XRv && self.values.iter().any(|v| *v <= 0.0) {
            return Err(Error::InvalidSweep {
                detail: "XR ratios must be positive (or the infinity marker)".into(),
            });
        }
        if self.parameter == SweepParameter::Xv && !self.recompute_op {
            return Err(Error::InvalidSweep {
                detail: "the stator-reactance study must recompute the operating point".into(),
            });
        }
        if self.parameter != SweepParameter::XRv
            && self.values.iter().any(|v| !v.is_finite())
        {
            return Err(Error::InvalidSweep {
                detail: "only the XR study admits the infinity marker".into(),
            });
        }
        self.base.validate()
    }
}

/// Apply one grid value to the VSG block of the base configuration.
pub fn apply_parameter(
    base: &SystemConfig,
    parameter: SweepParameter,
    value: f64,
) -> SystemConfig {
    let mut cfg = *base;
    match parameter {
        SweepParameter::Hv => cfg.vsg.h = value,
        SweepParameter::Tpv => cfg.vsg.tp = value,
        SweepParameter::XRv => {
            // X stays at its default, R realizes the ratio
            cfg.vsg.r = if value.is_infinite() {
                0.0
            } else {
                cfg.vsg.x / value
            };
        }
        SweepParameter::Dv => {
            // damper effects are pronounced at doubled inertia
            cfg.vsg.h = 2.0 * base.vsg.h;
            cfg.vsg.d = value;
        }
        SweepParameter::Kqv => cfg.vsg.kq = value,
        SweepParameter::Tqv => cfg.vsg.tq = value,
        SweepParameter::Xv => cfg.vsg.x = value,
    }
    cfg
}

/// Outcome of one automated qualitative check.
#[derive(Clone, Debug, Serialize)]
pub struct TrendVerdict {
    pub claim_id: String,
    pub holds: bool,
    /// One scalar per grid point.
    pub evidence: Vec<f64>,
}

/// One evaluated grid point.
#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub value: f64,
    pub config: SystemConfig,
    pub operating_point: OperatingPoint,
    pub tf: TransferMatrix,
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub points: Vec<SweepPoint>,
    /// `(value, message)` for points that failed to build.
    pub failures: Vec<(f64, String)>,
    pub verdicts: Vec<TrendVerdict>,
}

/// Run a study: rebuild the load-to-SG transfer matrix per grid value and
/// evaluate the registered trend checks for the swept parameter.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let base_op = solve_operating_point(&spec.base)?;
    let mut points = Vec::with_capacity(spec.values.len());
    let mut failures = Vec::new();
    for &value in &spec.values {
        let cfg = apply_parameter(&spec.base, spec.parameter, value);
        let built = (|| -> Result<SweepPoint> {
            let op = if spec.recompute_op {
                solve_operating_point(&cfg)?
            } else {
                base_op
            };
            let tf = build_load_to_machine(&cfg, &op, Machine::Sg)?;
            Ok(SweepPoint {
                value,
                config: cfg,
                operating_point: op,
                tf,
            })
        })();
        match built {
            Ok(p) => points.push(p),
            Err(e) => failures.push((value, e.to_string())),
        }
    }
    let verdicts = evaluate_trends(spec, &points)?;
    Ok(SweepResult {
        spec: spec.clone(),
        points,
        failures,
        verdicts,
    })
}

/// The named studies on their preset grids: log-spaced 7-point ranges
/// (whose centers coincide with the defaults where the range is symmetric)
/// and the fixed XR ratio set.
pub fn preset_sweeps(base: &SystemConfig) -> Vec<SweepSpec> {
    let spec = |parameter, values, recompute_op| SweepSpec {
        parameter,
        values,
        base: *base,
        recompute_op,
        channels: ChannelId::ALL.to_vec(),
        outputs: ArtifactKind::ALL.to_vec(),
    };
    vec![
        spec(SweepParameter::Hv, geometric_grid(2.0, 8.0, 7), false),
        spec(SweepParameter::Tpv, geometric_grid(0.03, 1.3, 7), false),
        spec(
            SweepParameter::XRv,
            vec![2.0, 3.0, 5.0, 10.0, 20.0, f64::INFINITY],
            false,
        ),
        spec(SweepParameter::Dv, geometric_grid(0.3, 34.0, 7), false),
        spec(SweepParameter::Kqv, geometric_grid(0.05, 0.2, 7), false),
        spec(SweepParameter::Tqv, geometric_grid(0.05, 0.2, 7), false),
        spec(SweepParameter::Xv, geometric_grid(0.1, 0.4, 7), true),
    ]
}

/// Log-spaced grid with exact endpoints; odd lengths pin the middle point
/// to the geometric mean of the range.
pub fn geometric_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    let (la, lb) = (a.ln(), b.ln());
    let mut out: Vec<f64> = (0..n)
        .map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp())
        .collect();
    out[0] = a;
    out[n - 1] = b;
    if n % 2 == 1 {
        out[n / 2] = (a * b).sqrt();
    }
    out
}

// ---------------------------------------------------------------------------
// trend evaluation
// ---------------------------------------------------------------------------

struct ModePair {
    pole: Complex64,
    wn: f64,
    zeta: f64,
}

fn mode_of(pz: &PoleZeroSet, class: ModeClass) -> Option<ModePair> {
    classify_modes(pz)
        .into_iter()
        .find(|m| m.classification == class)
        .map(|m| ModePair {
            pole: m.pair[0],
            wn: m.natural_frequency,
            zeta: m.damping_ratio,
        })
}

fn cancelled(tf: &TransferMatrix, id: ChannelId) -> Result<PoleZeroSet> {
    pole_zero(tf.channel(id), DISPLAY_TOL)
}

/// Monotone up to a relative wiggle, with a strict net change.
fn monotone_increasing(series: &[f64], tol: f64) -> bool {
    if series.len() < 2 {
        return false;
    }
    let scale = series.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let slack = tol * scale;
    series.windows(2).all(|w| w[1] >= w[0] - slack)
        && series.last().unwrap() > &(series[0] + slack)
}

fn monotone_decreasing(series: &[f64], tol: f64) -> bool {
    let neg: Vec<f64> = series.iter().map(|v| -v).collect();
    monotone_increasing(&neg, tol)
}

/// Distance from the secondary pair to its nearest zero, the cancellation
/// mismatch measure.
fn secondary_mismatch(pz: &PoleZeroSet) -> Option<f64> {
    let sec = mode_of(pz, ModeClass::Secondary)?;
    pz.zeros
        .iter()
        .map(|z| (z - sec.pole).norm())
        .min_by(|a, b| a.partial_cmp(b).unwrap())
}

/// Greedy matched-pair distance between two pole sets; `None` when the
/// cardinalities differ.
fn pole_set_distance(a: &[Complex64], b: &[Complex64]) -> Option<f64> {
    if a.len() != b.len() {
        return None;
    }
    let mut rem: Vec<Complex64> = b.to_vec();
    let mut worst = 0.0f64;
    for p in a {
        let (idx, d) = rem
            .iter()
            .enumerate()
            .map(|(i, q)| (i, (p - q).norm() / 1.0f64.max(q.norm())))
            .min_by(|x, y| x.1.partial_cmp(&y.1).unwrap())?;
        worst = worst.max(d);
        rem.remove(idx);
    }
    Some(worst)
}

fn settle_time_2pct(values: &[f64], time: &[f64]) -> f64 {
    let final_v = *values.last().unwrap();
    let band = 0.02 * final_v.abs().max(1e-12);
    for i in (0..values.len()).rev() {
        if (values[i] - final_v).abs() > band {
            return time.get(i + 1).copied().unwrap_or(*time.last().unwrap());
        }
    }
    0.0
}

fn verdict(claim_id: &str, holds: bool, evidence: Vec<f64>) -> TrendVerdict {
    TrendVerdict {
        claim_id: claim_id.to_string(),
        holds,
        evidence,
    }
}

fn evaluate_trends(spec: &SweepSpec, points: &[SweepPoint]) -> Result<Vec<TrendVerdict>> {
    if points.len() < 2 {
        return Ok(vec![]);
    }
    let mut out = Vec::new();
    match spec.parameter {
        SweepParameter::Hv => {
            let mut prim_zeta = vec![];
            let mut prim_wn = vec![];
            let mut sec_zeta = vec![];
            let mut sec_wn = vec![];
            let mut mismatch = vec![];
            for p in points {
                let pz = cancelled(&p.tf, ChannelId::PToW)?;
                let prim = mode_of(&pz, ModeClass::Primary).ok_or(missing("primary"))?;
                let sec = mode_of(&pz, ModeClass::Secondary).ok_or(missing("secondary"))?;
                prim_zeta.push(prim.zeta);
                prim_wn.push(prim.wn);
                sec_zeta.push(sec.zeta);
                sec_wn.push(sec.wn);
                mismatch.push(secondary_mismatch(&pz).ok_or(missing("secondary zero"))?);
            }
            out.push(verdict(
                "hv_primary_damping_increases",
                monotone_increasing(&prim_zeta, MONOTONE_TOL),
                prim_zeta,
            ));
            out.push(verdict(
                "hv_primary_frequency_decreases",
                monotone_decreasing(&prim_wn, MONOTONE_TOL),
                prim_wn,
            ));
            out.push(verdict(
                "hv_secondary_frequency_decreases",
                monotone_decreasing(&sec_wn, MONOTONE_TOL),
                sec_wn,
            ));
            out.push(verdict(
                "hv_secondary_damping_decreases",
                monotone_decreasing(&sec_zeta, MONOTONE_TOL),
                sec_zeta,
            ));
            // best cancellation where the inertias match
            let h_s = spec.base.sg.h;
            let argmin = mismatch
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(i, _)| i);
            let match_idx = points
                .iter()
                .position(|p| (p.value - h_s).abs() <= 1e-9 * h_s.max(1.0));
            out.push(verdict(
                "hv_cancellation_best_at_match",
                argmin.is_some() && argmin == match_idx,
                mismatch,
            ));
        }
        SweepParameter::Tpv => {
            let mut prim_zeta = vec![];
            let mut mismatch = vec![];
            for p in points {
                let pz = cancelled(&p.tf, ChannelId::PToW)?;
                let prim = mode_of(&pz, ModeClass::Primary).ok_or(missing("primary"))?;
                prim_zeta.push(prim.zeta);
                mismatch.push(secondary_mismatch(&pz).ok_or(missing("secondary zero"))?);
            }
            out.push(verdict(
                "tpv_small_lag_damps_primary",
                monotone_decreasing(&prim_zeta, MONOTONE_TOL),
                prim_zeta,
            ));
            out.push(verdict(
                "tpv_large_lag_reduces_secondary_mismatch",
                monotone_decreasing(&mismatch, MONOTONE_TOL),
                mismatch,
            ));
        }
        SweepParameter::XRv => {
            // peak of the q->w step grows as the ratio shrinks
            let mut peaks = vec![];
            for p in points {
                let resp = step_response(
                    p.tf.channel(ChannelId::QToW),
                    STEP_SIZE,
                    STEP_T_END,
                    STEP_DT,
                    ChannelId::QToW,
                )?;
                peaks.push(resp.value.iter().fold(0.0f64, |m, v| m.max(v.abs())));
            }
            out.push(verdict(
                "xrv_low_ratio_grows_qw_oscillations",
                monotone_decreasing(&peaks, MONOTONE_TOL),
                peaks,
            ));
        }
        SweepParameter::Dv => {
            let mut sec_zeta = vec![];
            let mut prim_poles = vec![];
            for p in points {
                let pz = cancelled(&p.tf, ChannelId::PToW)?;
                let prim = mode_of(&pz, ModeClass::Primary).ok_or(missing("primary"))?;
                let sec = mode_of(&pz, ModeClass::Secondary).ok_or(missing("secondary"))?;
                sec_zeta.push(sec.zeta);
                prim_poles.push(prim.pole);
            }
            out.push(verdict(
                "dv_secondary_damping_increases",
                monotone_increasing(&sec_zeta, MONOTONE_TOL),
                sec_zeta,
            ));
            let reference = prim_poles[0];
            let displacement: Vec<f64> = prim_poles
                .iter()
                .map(|p| (p - reference).norm() / 1.0f64.max(reference.norm()))
                .collect();
            let holds = displacement.iter().all(|d| *d <= UNCHANGED_TOL);
            out.push(verdict("dv_primary_unchanged", holds, displacement));
        }
        SweepParameter::Kqv => {
            let mut dc_mag = vec![];
            for p in points {
                dc_mag.push(dc_gain(p.tf.channel(ChannelId::QToV))?.abs());
            }
            out.push(verdict(
                "kqv_dc_gain_magnitude_increases",
                monotone_increasing(&dc_mag, MONOTONE_TOL),
                dc_mag,
            ));
            // dc-normalized q->v step shapes coincide across the grid
            let reference_idx = nearest_index(points, spec.base.vsg.kq);
            let reference = normalized_step(&points[reference_idx].tf)?;
            let mut shape_dev = vec![];
            for p in points {
                let shape = normalized_step(&p.tf)?;
                let dev = shape
                    .iter()
                    .zip(&reference)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max);
                shape_dev.push(dev);
            }
            let holds = shape_dev.iter().all(|d| *d <= SHAPE_TOL);
            out.push(verdict("kqv_dynamics_invariant", holds, shape_dev));
        }
        SweepParameter::Tqv => {
            let reference_idx = nearest_index(points, spec.base.vsg.tq);
            let ref_pz = cancelled(&points[reference_idx].tf, ChannelId::PToW)?;
            let mut pw_dist = vec![];
            let mut settle = vec![];
            for p in points {
                let pz = cancelled(&p.tf, ChannelId::PToW)?;
                let d = pole_set_distance(&pz.poles, &ref_pz.poles).unwrap_or(f64::INFINITY);
                pw_dist.push(d);
                let resp = step_response(
                    p.tf.channel(ChannelId::QToV),
                    STEP_SIZE,
                    STEP_T_END,
                    STEP_DT,
                    ChannelId::QToV,
                )?;
                settle.push(settle_time_2pct(&resp.value, &resp.time));
            }
            let holds = pw_dist.iter().all(|d| *d <= UNCHANGED_TOL);
            out.push(verdict("tqv_p_to_w_unchanged", holds, pw_dist));
            out.push(verdict(
                "tqv_small_lag_faster_qv_settling",
                monotone_increasing(&settle, MONOTONE_TOL),
                settle,
            ));
        }
        SweepParameter::Xv => {
            let mut prim_poles = vec![];
            let mut dc_mag = vec![];
            for p in points {
                let pz = cancelled(&p.tf, ChannelId::PToW)?;
                let prim = mode_of(&pz, ModeClass::Primary).ok_or(missing("primary"))?;
                prim_poles.push(prim.pole);
                dc_mag.push(dc_gain(p.tf.channel(ChannelId::QToV))?.abs());
            }
            let reference = prim_poles[0];
            let displacement: Vec<f64> = prim_poles
                .iter()
                .map(|p| (p - reference).norm() / 1.0f64.max(reference.norm()))
                .collect();
            let holds = displacement.iter().all(|d| *d <= XV_PRIMARY_TOL);
            out.push(verdict("xv_primary_poles_unchanged", holds, displacement));
            out.push(verdict(
                "xv_qv_dc_magnitude_increases",
                monotone_increasing(&dc_mag, MONOTONE_TOL),
                dc_mag,
            ));
        }
    }
    Ok(out)
}

fn missing(what: &str) -> Error {
    Error::InvalidSweep {
        detail: format!("expected a {what} mode in the cancelled pole set"),
    }
}

fn nearest_index(points: &[SweepPoint], target: f64) -> usize {
    points
        .iter()
        .enumerate()
        .min_by(|a, b| {
            (a.1.value - target)
                .abs()
                .partial_cmp(&(b.1.value - target).abs())
                .unwrap()
        })
        .map(|(i, _)| i)
        .unwrap()
}

/// The q->v step response scaled by its dc value.
fn normalized_step(tf: &TransferMatrix) -> Result<Vec<f64>> {
    let ch = tf.channel(ChannelId::QToV);
    let dc = dc_gain(ch)?;
    if dc == 0.0 {
        return Err(Error::IntegratorAtDc);
    }
    let resp = step_response(ch, STEP_SIZE, STEP_T_END, STEP_DT, ChannelId::QToV)?;
    Ok(resp
        .value
        .iter()
        .map(|v| v / (dc * STEP_SIZE))
        .collect())
}

// ---------------------------------------------------------------------------
// artifact emission
// ---------------------------------------------------------------------------

/// Shortest round-trip formatting; the infinity marker prints as `inf`.
pub fn format_value(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v}")
    }
}

fn value_json(v: f64) -> serde_json::Value {
    if v.is_finite() {
        serde_json::json!(v)
    } else {
        serde_json::json!("inf")
    }
}

/// Write `manifest.json` plus one `<param>=<value>/` directory of analysis
/// CSVs per grid point.
pub fn write_sweep_outputs(result: &SweepResult, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for point in &result.points {
        let sub = dir.join(format!(
            "{}={}",
            result.spec.parameter.name(),
            format_value(point.value)
        ));
        for &chan in &result.spec.channels {
            let ch = point.tf.channel(chan);
            for &artifact in &result.spec.outputs {
                match artifact {
                    ArtifactKind::Pz => {
                        let pz = pole_zero(ch, DISPLAY_TOL)?;
                        write_pz_csv(&pz, &sub.join(format!("{}_pz.csv", chan.short())))?;
                    }
                    ArtifactKind::Bode => {
                        let (f, m) = bode_magnitude(ch, 1e-2, 1e3, 200)?;
                        write_bode_csv(&f, &m, &sub.join(format!("{}_bode.csv", chan.short())))?;
                    }
                    ArtifactKind::Step => {
                        let resp =
                            step_response(ch, STEP_SIZE, STEP_T_END, STEP_DT, chan)?;
                        write_step_csv(&resp, &sub.join(format!("{}_step.csv", chan.short())))?;
                    }
                    ArtifactKind::Modes => {
                        let pz = pole_zero(ch, DISPLAY_TOL)?;
                        let modes = classify_modes(&pz);
                        write_modes_csv(&modes, &sub.join(format!("{}_modes.csv", chan.short())))?;
                    }
                }
            }
        }
    }
    let manifest = serde_json::json!({
        "parameter": result.spec.parameter.name(),
        "values": result.spec.values.iter().map(|&v| value_json(v)).collect::<Vec<_>>(),
        "recompute_op": result.spec.recompute_op,
        "base": result.spec.base,
        "channels": result.spec.channels.iter().map(|c| c.short()).collect::<Vec<_>>(),
        "verdicts": result.verdicts,
        "failures": result.failures.iter().map(|(v, m)|serde_json::json!({
            "value": value_json(*v),
            "error": m,
        })).collect::<Vec<_>>(),
    });
    std::fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::default_base_case;
    use approx::assert_abs_diff_eq;

    #[test]
    fn preset_grids_cover_the_ranges() {
        let presets = preset_sweeps(&default_base_case());
        assert_eq!(presets.len(), 7);
        let hv = &presets[0];
        assert_eq!(hv.parameter, SweepParameter::Hv);
        assert_eq!(hv.values.len(), 7);
        assert_eq!(hv.values[0], 2.0);
        assert_eq!(hv.values[6], 8.0);
        assert!(hv.values.iter().any(|v| (*v - 4.0).abs() < 1e-12));
        let xr = &presets[2];
        assert_eq!(xr.values[..5], [2.0, 3.0, 5.0, 10.0, 20.0]);
        assert!(xr.values[5].is_infinite());
        let xv = &presets[6];
        assert!(xv.recompute_op);
        assert_abs_diff_eq!(xv.values[3], 0.2, epsilon = 1e-15);
    }

    #[test]
    fn xr_ratio_sets_resistance() {
        let base = default_base_case();
        let cfg = apply_parameter(&base, SweepParameter::XRv, 5.0);
        assert_abs_diff_eq!(cfg.vsg.r, 0.04, epsilon = 1e-15);
        assert_eq!(cfg.vsg.x, 0.2);
        let inf = apply_parameter(&base, SweepParameter::XRv, f64::INFINITY);
        assert_eq!(inf.vsg.r, 0.0);
    }

    #[test]
    fn damper_study_doubles_inertia() {
        let base = default_base_case();
        let cfg = apply_parameter(&base, SweepParameter::Dv, 0.3);
        assert_eq!(cfg.vsg.h, 8.0);
        assert_eq!(cfg.vsg.d, 0.3);
        assert_eq!(cfg.sg, base.sg);
    }

    #[test]
    fn monotonicity_allows_small_wiggles() {
        assert!(monotone_increasing(&[1.0, 2.0, 1.9999, 3.0], 1e-3));
        assert!(!monotone_increasing(&[1.0, 2.0, 1.5, 3.0], 1e-3));
        assert!(!monotone_increasing(&[1.0, 1.0, 1.0], 1e-3));
        assert!(monotone_decreasing(&[3.0, 2.0, 1.0], 1e-3));
    }

    #[test]
    fn invalid_grids_are_rejected() {
        let base = default_base_case();
        let mut spec = SweepSpec {
            parameter: SweepParameter::Hv,
            values: vec![2.0, 1.0, 3.0],
            base,
            recompute_op: false,
            channels: vec![ChannelId::PToW],
            outputs: vec![ArtifactKind::Pz],
        };
        assert!(spec.validate().is_err());
        spec.values = vec![];
        assert!(spec.validate().is_err());
        spec.values = vec![1.0, 2.0];
        assert!(spec.validate().is_ok());
        spec.parameter = SweepParameter::Xv;
        assert!(spec.validate().is_err());
        spec.recompute_op = true;
        assert!(spec.validate().is_ok());
    }

    #[test]
    fn settle_time_detects_band_exit() {
        let t: Vec<f64> = (0..100).map(|i| i as f64 * 0.1).collect();
        let v: Vec<f64> = t.iter().map(|t| 1.0 - (-t).exp()).collect();
        let ts = settle_time_2pct(&v, &t);
        // 1 - exp(-t) enters the 2% band near t = ln(50) = 3.91
        assert!(ts > 3.5 && ts < 4.3, "settle {ts}");
    }

    #[test]
    fn hv_sweep_trends_hold_on_a_coarse_grid() {
        let base = default_base_case();
        let spec = SweepSpec {
            parameter: SweepParameter::Hv,
            values: vec![2.0, 4.0, 8.0],
            base,
            recompute_op: false,
            channels: vec![ChannelId::PToW],
            outputs: vec![],
        };
        let result = run_sweep(&spec).unwrap();
        assert!(result.failures.is_empty());
        assert_eq!(result.points.len(), 3);
        for v in &result.verdicts {
            assert!(v.holds, "claim {} failed: {:?}", v.claim_id, v.evidence);
            assert_eq!(v.evidence.len(), 3);
        }
    }
}
