//! `vsgss` - command-line front end for the VSG/SG small-signal toolkit.
//!
//! Every subcommand reads a JSON configuration (or scenario), writes its
//! plot-ready outputs under `--out`, and drops a `run_manifest.json` with
//! the tool version, a configuration hash and the invocation next to them.

use clap::{Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use vsg_smallsignal::analysis::{
    bode_magnitude, classify_modes, dc_gain, pole_zero, step_response, write_bode_csv,
    write_modes_csv, write_pz_csv, write_step_csv, DISPLAY_TOL,
};
use vsg_smallsignal::model::{default_base_case, load_config, Machine, SystemConfig};
use vsg_smallsignal::powerflow::{build_a_coeffs, build_k_matrix, solve_operating_point};
use vsg_smallsignal::simulate::{
    compare_with_linear, extract_operating_point, measured_load_jump, run_simulation, SimScenario,
};
use vsg_smallsignal::sweep::{format_value, preset_sweeps, run_sweep, write_sweep_outputs};
use vsg_smallsignal::tfbuild::{
    build_descriptor, build_load_to_machine, ChannelId, TransferExport,
};

#[derive(Parser)]
#[command(name = "vsgss", version, about = "VSG/SG small-signal analysis toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetArg {
    Sg,
    Vsg,
}

impl From<TargetArg> for Machine {
    fn from(t: TargetArg) -> Machine {
        match t {
            TargetArg::Sg => Machine::Sg,
            TargetArg::Vsg => Machine::Vsg,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ChannelArg {
    Pw,
    Qw,
    Pv,
    Qv,
}

impl From<ChannelArg> for ChannelId {
    fn from(c: ChannelArg) -> ChannelId {
        match c {
            ChannelArg::Pw => ChannelId::PToW,
            ChannelArg::Qw => ChannelId::QToW,
            ChannelArg::Pv => ChannelId::PToV,
            ChannelArg::Qv => ChannelId::QToV,
        }
    }
}

#[derive(clap::Args)]
struct CommonArgs {
    /// JSON configuration path; omit for the built-in base case.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the nonlinear operating point and write op.json.
    Opsolve {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Evaluate the linearized power-flow matrices and bus elimination
    /// coefficients for both machines.
    Kmatrix {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Build the load-to-machine transfer matrix (rational coefficients and
    /// descriptor matrices).
    Tf {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum, default_value = "sg")]
        target: TargetArg,
    },
    /// Pole/zero sets per channel (pz.csv per channel).
    Pz {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum)]
        channel: Option<ChannelArg>,
        #[arg(long, value_enum, default_value = "sg")]
        target: TargetArg,
        /// Display-time cancellation tolerance.
        #[arg(long, default_value_t = DISPLAY_TOL)]
        tol: f64,
    },
    /// Bode magnitude sweep per channel.
    Bode {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum)]
        channel: Option<ChannelArg>,
        #[arg(long, value_enum, default_value = "sg")]
        target: TargetArg,
        #[arg(long, default_value_t = 1e-2)]
        w_min: f64,
        #[arg(long, default_value_t = 1e3)]
        w_max: f64,
        #[arg(long, default_value_t = 400)]
        points: usize,
    },
    /// Step responses per channel.
    Step {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum)]
        channel: Option<ChannelArg>,
        #[arg(long, value_enum, default_value = "sg")]
        target: TargetArg,
        #[arg(long, default_value_t = 0.05)]
        step_size: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 30.0)]
        t_end: f64,
    },
    /// DC gains of all four channels.
    Dcgain {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum, default_value = "sg")]
        target: TargetArg,
    },
    /// Run a preset sensitivity study.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Preset name: Hv, Tpv, XRv, Dv, Kqv, Tqv or Xv.
        #[arg(long)]
        preset: String,
    },
    /// Nonlinear phasor-domain simulation of a scenario.
    Sim {
        /// Scenario JSON path.
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Simulate, rebuild the linear model at the extracted operating point
    /// and report the deviation between the two.
    Compare {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// List the preset sweeps.
    Presets,
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<(), Box<dyn std::error::Error>> {
    match cli.command {
        Command::Opsolve { common } => {
            let (cfg, raw) = read_config(&common.config)?;
            let op = solve_operating_point(&cfg)?;
            std::fs::create_dir_all(&common.out)?;
            std::fs::write(
                common.out.join("op.json"),
                serde_json::to_string_pretty(&op)?,
            )?;
            println!("v_v0     = {} pu", op.v_v0);
            println!("v_s0     = {} pu", op.v_s0);
            println!("v_b0     = {} pu", op.v_b0);
            println!("theta_v0 = {} rad", op.theta_v0);
            println!("theta_s0 = {} rad", op.theta_s0);
            write_manifest(&common.out, &raw, "opsolve")?;
        }
        Command::Kmatrix { common } => {
            let (cfg, raw) = read_config(&common.config)?;
            let op = solve_operating_point(&cfg)?;
            let mut doc = serde_json::Map::new();
            for (name, which, params) in [
                ("vsg", Machine::Vsg, &cfg.vsg),
                ("sg", Machine::Sg, &cfg.sg),
            ] {
                let k = build_k_matrix(params, &op.machine(which));
                let a = build_a_coeffs(&k)?;
                doc.insert(
                    name.to_string(),
                    serde_json::json!({"k": k.k, "a_coeffs": a}),
                );
                println!("{name}: k = {:?}", k.k);
            }
            std::fs::create_dir_all(&common.out)?;
            std::fs::write(
                common.out.join("kmatrix.json"),
                serde_json::to_string_pretty(&serde_json::Value::Object(doc))?,
            )?;
            write_manifest(&common.out, &raw, "kmatrix")?;
        }
        Command::Tf { common, target } => {
            let (cfg, raw) = read_config(&common.config)?;
            let op = solve_operating_point(&cfg)?;
            let tf = build_load_to_machine(&cfg, &op, target.into())?;
            let desc = build_descriptor(&cfg, &op, target.into())?;
            std::fs::create_dir_all(&common.out)?;
            std::fs::write(
                common.out.join("tf.json"),
                serde_json::to_string_pretty(&TransferExport::new(&tf, &cfg, &op))?,
            )?;
            let desc_doc = serde_json::json!({
                "e": matrix_rows(&desc.e_matrix),
                "a": matrix_rows(&desc.a_matrix),
                "b": matrix_rows(&desc.b_matrix),
                "c": matrix_rows(&desc.c_matrix),
                "d": matrix_rows(&desc.d_matrix),
            });
            std::fs::write(
                common.out.join("descriptor.json"),
                serde_json::to_string_pretty(&desc_doc)?,
            )?;
            for (id, ch) in tf.channels() {
                println!("{}: degree {:?}", id.short(), ch.degrees());
            }
            write_manifest(&common.out, &raw, "tf")?;
        }
        Command::Pz {
            common,
            channel,
            target,
            tol,
        } => {
            let (cfg, raw) = read_config(&common.config)?;
            let op = solve_operating_point(&cfg)?;
            let tf = build_load_to_machine(&cfg, &op, target.into())?;
            std::fs::create_dir_all(&common.out)?;
            for id in selected(channel) {
                let pz = pole_zero(tf.channel(id), tol)?;
                write_pz_csv(&pz, &common.out.join(format!("{}_pz.csv", id.short())))?;
                let modes = classify_modes(&pz);
                write_modes_csv(&modes, &common.out.join(format!("{}_modes.csv", id.short())))?;
                println!(
                    "{}: {} poles, {} zeros, gain {}",
                    id.short(),
                    pz.poles.len(),
                    pz.zeros.len(),
                    pz.gain
                );
            }
            write_manifest(&common.out, &raw, "pz")?;
        }
        Command::Bode {
            common,
            channel,
            target,
            w_min,
            w_max,
            points,
        } => {
            let (cfg, raw) = read_config(&common.config)?;
            let op = solve_operating_point(&cfg)?;
            let tf = build_load_to_machine(&cfg, &op, target.into())?;
            std::fs::create_dir_all(&common.out)?;
            for id in selected(channel) {
                let (f, m) = bode_magnitude(tf.channel(id), w_min, w_max, points)?;
                write_bode_csv(&f, &m, &common.out.join(format!("{}_bode.csv", id.short())))?;
            }
            write_manifest(&common.out, &raw, "bode")?;
        }
        Command::Step {
            common,
            channel,
            target,
            step_size,
            dt,
            t_end,
        } => {
            let (cfg, raw) = read_config(&common.config)?;
            let op = solve_operating_point(&cfg)?;
            let tf = build_load_to_machine(&cfg, &op, target.into())?;
            std::fs::create_dir_all(&common.out)?;
            for id in selected(channel) {
                let resp = step_response(tf.channel(id), step_size, t_end, dt, id)?;
                write_step_csv(&resp, &common.out.join(format!("{}_step.csv", id.short())))?;
                if resp.unstable {
                    eprintln!("warning: channel {} has an unstable pole", id.short());
                }
            }
            write_manifest(&common.out, &raw, "step")?;
        }
        Command::Dcgain { common, target } => {
            let (cfg, raw) = read_config(&common.config)?;
            let op = solve_operating_point(&cfg)?;
            let tf = build_load_to_machine(&cfg, &op, target.into())?;
            let mut doc = serde_json::Map::new();
            for (id, ch) in tf.channels() {
                let g = dc_gain(ch)?;
                println!("{}: {}", id.short(), g);
                doc.insert(id.short().to_string(), serde_json::json!(g));
            }
            std::fs::create_dir_all(&common.out)?;
            std::fs::write(
                common.out.join("dcgain.json"),
                serde_json::to_string_pretty(&serde_json::Value::Object(doc))?,
            )?;
            write_manifest(&common.out, &raw, "dcgain")?;
        }
        Command::Sweep { common, preset } => {
            let (cfg, raw) = read_config(&common.config)?;
            let specs = preset_sweeps(&cfg);
            let spec = specs
                .into_iter()
                .find(|s| s.parameter.name() == preset)
                .ok_or_else(|| format!("unknown preset `{preset}`"))?;
            let result = run_sweep(&spec)?;
            write_sweep_outputs(&result, &common.out)?;
            for v in &result.verdicts {
                println!(
                    "{}: {}",
                    v.claim_id,
                    if v.holds { "holds" } else { "VIOLATED" }
                );
            }
            if !result.failures.is_empty() {
                for (value, msg) in &result.failures {
                    eprintln!("point {} failed: {msg}", format_value(*value));
                }
            }
            write_manifest(&common.out, &raw, "sweep")?;
        }
        Command::Sim { scenario, out } => {
            let raw = std::fs::read_to_string(&scenario)?;
            let sc: SimScenario = serde_json::from_str(&raw)?;
            let (ts, diag) = run_simulation(&sc)?;
            std::fs::create_dir_all(&out)?;
            ts.write_csv(&out.join("timeseries.csv"))?;
            println!(
                "equilibrium residual {:.3e}, initial |dx/dt| {:.3e}",
                diag.equilibrium_residual, diag.initial_derivative_norm
            );
            write_manifest(&out, &raw, "sim")?;
        }
        Command::Compare { scenario, out } => {
            let raw = std::fs::read_to_string(&scenario)?;
            let sc: SimScenario = serde_json::from_str(&raw)?;
            let (ts, _) = run_simulation(&sc)?;
            std::fs::create_dir_all(&out)?;
            ts.write_csv(&out.join("timeseries.csv"))?;
            let (op, _) = extract_operating_point(&ts, (0.5 * sc.t_switch, sc.t_switch), &sc.cfg)?;
            let tf = build_load_to_machine(&sc.cfg, &op, Machine::Sg)?;
            let jump = measured_load_jump(&ts, sc.t_switch)?;
            let report = compare_with_linear(&ts, &tf, jump, sc.t_switch)?;
            std::fs::write(
                out.join("deviation.json"),
                serde_json::to_string_pretty(&serde_json::json!({
                    "measured_step_pu": {"dp": jump.0, "dq": jump.1},
                    "extracted_operating_point": op,
                    "report": report,
                }))?,
            )?;
            println!(
                "normalized deviation: omega {:.4}, v {:.4}",
                report.normalized_omega, report.normalized_v
            );
            write_manifest(&out, &raw, "compare")?;
        }
        Command::Presets => {
            let cfg = default_base_case();
            for spec in preset_sweeps(&cfg) {
                let values: Vec<String> =
                    spec.values.iter().map(|v| format_value(*v)).collect();
                println!(
                    "{}: [{}]{}",
                    spec.parameter.name(),
                    values.join(", "),
                    if spec.recompute_op {
                        " (recomputes operating point)"
                    } else {
                        ""
                    }
                );
            }
        }
    }
    Ok(())
}

fn selected(channel: Option<ChannelArg>) -> Vec<ChannelId> {
    match channel {
        Some(c) => vec![c.into()],
        None => ChannelId::ALL.to_vec(),
    }
}

/// Load the configuration and keep the raw text for hashing.
fn read_config(path: &Option<PathBuf>) -> Result<(SystemConfig, String), Box<dyn std::error::Error>> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            let cfg = load_config(&text)?;
            Ok((cfg, text))
        }
        None => {
            let cfg = default_base_case();
            let text = vsg_smallsignal::model::serialize_config(&cfg)?;
            Ok((cfg, text))
        }
    }
}

fn matrix_rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn write_manifest(out: &Path, config_text: &str, verb: &str) -> std::io::Result<()> {
    let mut hasher = Sha256::new();
    hasher.update(config_text.as_bytes());
    let hash = hasher.finalize();
    let hex: String = hash.iter().map(|b| format!("{b:02x}")).collect();
    let timestamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let manifest = serde_json::json!({
        "tool_version": env!("CARGO_PKG_VERSION"),
        "verb": verb,
        "config_sha256": hex,
        "timestamp_unix_s": timestamp,
    });
    std::fs::write(
        out.join("run_manifest.json"),
        serde_json::to_string_pretty(&manifest).expect("manifest is serializable"),
    )
}
