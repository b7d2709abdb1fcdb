//! `kerrcat` — the command-line front end.
//!
//! Subcommands cover the full workflow: `derive` prints the design-table
//! quantities computed from the configured circuit, `find-null` and
//! `zz-sweep` map the residual-ZZ landscape over the coupler bias,
//! `residual` runs the idle-evolution experiment, `gate` / `gate-sweep`
//! simulate the R_ZZ(−π/2) gate, `verify` runs the bundled suite against the
//! published numbers, and `echo-config` round-trips the effective
//! configuration.
//!
//! Primary outputs (CSV for the sweep-like commands, text for the rest) go
//! to stdout, or to `--out` when given; progress summaries accompanying a
//! CSV stream go to stderr so the stream stays machine-readable. Exit codes:
//! 0 ok, 2 configuration error, 3 numerical failure or inconclusive
//! verification, 4 verification failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use kerrcat::config::RunConfig;
use kerrcat::fock::FockSpace;
use kerrcat::gate::{
    gate_sweep, gate_sweep_csv, residual_infidelity_with_tolerances, run_gate, GateReport,
    ResidualSeries, ScheduleMode,
};
use kerrcat::params::{rotating_frame_params, CircuitDesign, Subsystem};
use kerrcat::perturb::{cat_amplitudes, find_null_bias, sweep_csv, zeta_values, zz_sweep,
    LogicalBasisMode};
use kerrcat::verify::run_suite;
use kerrcat::{Error, Result, TAU};

/// Truncation dimensions as a `d1,d2,dc` flag value.
#[derive(Debug, Clone, Copy)]
struct Dims([usize; 3]);

fn parse_dims(text: &str) -> std::result::Result<Dims, String> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected d1,d2,dc, got '{text}'"));
    }
    let mut dims = [0usize; 3];
    for (slot, part) in dims.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse()
            .map_err(|_| format!("invalid dimension '{part}'"))?;
    }
    Ok(Dims(dims))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    /// Both KPO detunings track the level-degeneracy condition.
    #[value(name = "both", alias = "both-tuned")]
    Both,
    /// Only the coupler flux moves; the KPO biases stay put.
    #[value(name = "coupler-only")]
    CouplerOnly,
}

impl From<ModeArg> for ScheduleMode {
    fn from(arg: ModeArg) -> Self {
        match arg {
            ModeArg::Both => ScheduleMode::BothTuned,
            ModeArg::CouplerOnly => ScheduleMode::CouplerOnly,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BasisArg {
    /// Löwdin-orthonormalized coherent products (the perturbative basis).
    Coherent,
    /// Eigenvectors of the static Hamiltonian, aligned to the products.
    Numerical,
}

impl From<BasisArg> for LogicalBasisMode {
    fn from(arg: BasisArg) -> Self {
        match arg {
            BasisArg::Coherent => LogicalBasisMode::Coherent,
            BasisArg::Numerical => LogicalBasisMode::Numerical,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "kerrcat",
    version,
    about = "Two Kerr-cat qubits through a flux-tunable coupler: design values in, \
             ZZ nulls and gate fidelities out"
)]
struct Cli {
    /// JSON run configuration; the bundled published design is used if omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Worker threads for the sweep commands (defaults to all cores).
    #[arg(long, global = true, env = "KERRCAT_JOBS", value_name = "N")]
    jobs: Option<usize>,

    /// Override space.dims from the configuration.
    #[arg(long, global = true, value_name = "D1,D2,DC", value_parser = parse_dims)]
    dims: Option<Dims>,

    /// Write the primary output here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print every design quantity derived from the configured circuit.
    Derive,
    /// Run the bundled verification suite against the published values.
    Verify,
    /// Print the effective configuration as JSON.
    EchoConfig,
    /// Sweep ζ_ZZ over the coupler static bias (CSV).
    ZzSweep {
        /// Window start, φ̃_c^bias/2π.
        #[arg(long, value_name = "FLUX", allow_hyphen_values = true)]
        from: Option<f64>,
        /// Window end, φ̃_c^bias/2π.
        #[arg(long, value_name = "FLUX", allow_hyphen_values = true)]
        to: Option<f64>,
        /// Number of equally spaced points.
        #[arg(long, value_name = "N")]
        points: Option<usize>,
    },
    /// Locate the coupler biases (and mirror) where ζ_ZZ crosses zero.
    FindNull,
    /// Idle-evolution residual infidelity at the static bias (CSV).
    Residual {
        /// Hold duration in ns.
        #[arg(long, value_name = "NS")]
        duration: Option<f64>,
        /// Number of recorded samples.
        #[arg(long, value_name = "N")]
        samples: Option<usize>,
        /// Logical-basis construction.
        #[arg(long, value_enum, default_value_t = BasisArg::Coherent)]
        basis: BasisArg,
        /// Re-run at (d1+5, d2+5, dc+1) and report the shift.
        #[arg(long)]
        convergence_check: bool,
    },
    /// Synthesize and simulate one R_ZZ(−π/2) gate (summary; CSV via --out).
    Gate {
        /// Gate duration in ns.
        #[arg(long = "t-g", value_name = "NS")]
        t_g: Option<f64>,
        /// Flux schedule.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Re-run at (d1+5, d2+5, dc+1) and report the shift.
        #[arg(long)]
        convergence_check: bool,
    },
    /// Gate infidelity across a set of gate times (CSV).
    GateSweep {
        /// Comma-separated gate times in ns.
        #[arg(long = "t-g", value_name = "NS,...", value_delimiter = ',')]
        t_g: Option<Vec<f64>>,
        /// Flux schedule.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::table1(),
    };
    if let Some(Dims(dims)) = cli.dims {
        config.space.dims = dims;
        config.validate()?;
    }
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Error::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::Config(format!("--jobs: {e}")))?;
    }

    match cli.command {
        Command::Derive => cmd_derive(&config, &cli.out),
        Command::Verify => cmd_verify(&config, &cli.out),
        Command::EchoConfig => {
            emit(&cli.out, &config.to_json_pretty())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::ZzSweep { from, to, points } => cmd_zz_sweep(&config, &cli.out, from, to, points),
        Command::FindNull => cmd_find_null(&config, &cli.out),
        Command::Residual {
            duration,
            samples,
            basis,
            convergence_check,
        } => cmd_residual(&config, &cli.out, duration, samples, basis, convergence_check),
        Command::Gate {
            t_g,
            mode,
            convergence_check,
        } => cmd_gate(&config, &cli.out, t_g, mode, convergence_check),
        Command::GateSweep { t_g, mode } => cmd_gate_sweep(&config, &cli.out, t_g, mode),
    }
}

/// Write the primary output to `--out` or stdout.
fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            eprintln!("wrote {}", path.display());
            Ok(())
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Engineering rendering of an `E/h` value in GHz.
fn fmt_freq(ghz: f64) -> String {
    let abs = ghz.abs();
    if abs == 0.0 {
        "0 Hz".into()
    } else if abs >= 1.0 {
        format!("{ghz:.6} GHz")
    } else if abs >= 1e-3 {
        format!("{:.6} MHz", ghz * 1e3)
    } else if abs >= 1e-6 {
        format!("{:.6} kHz", ghz * 1e6)
    } else {
        format!("{:.6} Hz", ghz * 1e9)
    }
}

fn cmd_derive(config: &RunConfig, out: &Option<PathBuf>) -> Result<ExitCode> {
    let design: &CircuitDesign = &config.circuit;
    let params = rotating_frame_params(design, design.static_fluxes_rad())?;
    let cats = cat_amplitudes(&params)?;
    let mut rows: Vec<(String, String)> = Vec::new();
    let mut freq = |name: &str, ghz: f64| rows.push((name.into(), fmt_freq(ghz)));
    for (i, label) in ["1", "2", "c"].into_iter().enumerate() {
        freq(&format!("K_{label}/2π"), params.kerr_ghz[i]);
    }
    for (i, label) in ["1", "2", "c"].into_iter().enumerate() {
        freq(&format!("ω_{label}/2π"), params.dressed_frequency_ghz[i]);
    }
    for (i, label) in ["1", "2"].into_iter().enumerate() {
        freq(&format!("p_{label}/2π"), params.pump_ghz[i]);
    }
    freq("g_1c/2π", params.g_1c_ghz);
    freq("g_2c/2π", params.g_2c_ghz);
    freq("g_12/2π", params.g_12_ghz);
    for (i, label) in ["1", "2", "c"].into_iter().enumerate() {
        freq(&format!("Δ_{label}/2π"), params.detuning_ghz[i]);
    }
    freq(
        "(Δ_1 − g_1c²/Δ_c)/2π",
        params.x_coefficient_ghz(Subsystem::Kpo1)?,
    );
    freq(
        "(Δ_2 − g_2c²/Δ_c)/2π",
        params.x_coefficient_ghz(Subsystem::Kpo2)?,
    );
    for (name, value) in [
        ("α_1", cats.alpha_1),
        ("α_2", cats.alpha_2),
        ("α_c⁺", cats.alpha_c_plus),
        ("α_c⁻", cats.alpha_c_minus),
    ] {
        rows.push((name.into(), format!("{value:.6}")));
    }

    let mut text = String::from("derived parameters at the static bias\n");
    for (name, value) in rows {
        text.push_str(&format!("  {name:<22} {value}\n"));
    }
    emit(out, &text)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(config: &RunConfig, out: &Option<PathBuf>) -> Result<ExitCode> {
    let report = run_suite(config);
    emit(out, &report.render())?;
    Ok(ExitCode::from(report.exit_code() as u8))
}

fn cmd_zz_sweep(
    config: &RunConfig,
    out: &Option<PathBuf>,
    from: Option<f64>,
    to: Option<f64>,
    points: Option<usize>,
) -> Result<ExitCode> {
    let (config_from, config_to) = config.sweep_window_over_2pi();
    let window = (
        from.unwrap_or(config_from) * TAU,
        to.unwrap_or(config_to) * TAU,
    );
    let points = points.unwrap_or_else(|| config.sweep_points());
    let sweep = zz_sweep(&config.circuit, window, points)?;
    let worst = sweep
        .iter()
        .map(|p| p.zeta_zz_hz.abs())
        .fold(0.0f64, f64::max);
    eprintln!(
        "zz-sweep: {points} points over φ̃_c/2π ∈ [{:.4e}, {:.4e}], max |ζ_ZZ| = {worst:.4e} Hz",
        window.0 / TAU,
        window.1 / TAU
    );
    emit(out, &sweep_csv(&sweep))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_find_null(config: &RunConfig, out: &Option<PathBuf>) -> Result<ExitCode> {
    let design = &config.circuit;
    let zeta_at = |bias_rad: f64| -> Result<f64> {
        let biased = design.with_coupler_bias_over_2pi(bias_rad / TAU);
        let params = rotating_frame_params(&biased, biased.static_fluxes_rad())?;
        Ok(zeta_values(&params)?.zeta_zz_hz())
    };
    let mut text = String::new();
    for (label, bracket) in [
        ("null", (0.0, 0.01 * TAU)),
        ("mirror", (-0.01 * TAU, 0.0)),
    ] {
        let root = find_null_bias(design, bracket)?;
        text.push_str(&format!(
            "{label}: phi_c_bias_over_2pi = {:.6e}  (zeta_zz = {:.3e} Hz)\n",
            root / TAU,
            zeta_at(root)?
        ));
    }
    emit(out, &text)?;
    Ok(ExitCode::SUCCESS)
}

fn residual_at(config: &RunConfig, space: FockSpace, duration: f64, samples: usize, basis: BasisArg)
    -> Result<ResidualSeries> {
    residual_infidelity_with_tolerances(
        &config.circuit,
        space,
        duration,
        samples,
        basis.into(),
        config.numerics.rel_tol,
        config.numerics.abs_tol,
    )
}

fn cmd_residual(
    config: &RunConfig,
    out: &Option<PathBuf>,
    duration: Option<f64>,
    samples: Option<usize>,
    basis: BasisArg,
    convergence_check: bool,
) -> Result<ExitCode> {
    let duration = duration.unwrap_or_else(|| config.duration_ns());
    let samples = samples.unwrap_or_else(|| config.samples());
    let space = config.space()?;
    let series = residual_at(config, space, duration, samples, basis)?;
    eprintln!(
        "residual: max infidelity {:.6e} over {duration} ns at dims {:?}",
        series.max_infidelity,
        space.dims()
    );
    if convergence_check || config.space.convergence_check {
        let enlarged = config.enlarged_space()?;
        let check = residual_at(config, enlarged, duration, samples, basis)?;
        eprintln!(
            "convergence check at dims {:?}: max infidelity {:.6e} (shift {:.3e})",
            enlarged.dims(),
            check.max_infidelity,
            (series.max_infidelity - check.max_infidelity).abs()
        );
    }
    emit(out, &series.dump_csv())?;
    Ok(ExitCode::SUCCESS)
}

fn gate_summary(report: &GateReport, dims: [usize; 3]) -> String {
    format!(
        "gate: t_g = {} ns, {} schedule, dims {:?}\n\
         \x20 infidelity (1 − F̄)     {:.6e}\n\
         \x20 F̄ at measured Θ        {:.9}\n\
         \x20 Θ measured             {:.7} rad  (target {:.7})\n\
         \x20 Θ perturbative         {:.7} rad\n\
         \x20 global phase           {:.7} rad\n\
         \x20 degeneracy residual    {:.3e} Hz (max over interior)\n\
         \x20 norm drift             {:.3e}\n\
         \x20 truncation deficit     {:.3e}\n\
         \x20 steps                  {} accepted, {} rejected\n",
        report.t_g_ns,
        report.mode.label(),
        dims,
        report.infidelity(),
        report.avg_fidelity_at_measured,
        report.theta_measured_rad,
        report.theta_target_rad,
        report.theta_perturbative_rad,
        report.global_phase_rad,
        report.eq36_residual_hz_max,
        report.norm_drift,
        report.truncation_deficit,
        report.diagnostics.steps_accepted,
        report.diagnostics.steps_rejected,
    )
}

fn cmd_gate(
    config: &RunConfig,
    out: &Option<PathBuf>,
    t_g: Option<f64>,
    mode: Option<ModeArg>,
    convergence_check: bool,
) -> Result<ExitCode> {
    let t_g = t_g.unwrap_or_else(|| config.gate_time_ns());
    let mode: ScheduleMode = match mode {
        Some(arg) => arg.into(),
        None => config.gate_mode()?,
    };
    let space = config.space()?;
    let spec = config.propagation(0.0, t_g)?;
    let report = run_gate(&config.circuit, space, t_g, mode, &spec)?;
    print!("{}", gate_summary(&report, space.dims()));
    if convergence_check || config.space.convergence_check {
        let enlarged = config.enlarged_space()?;
        let check = run_gate(&config.circuit, enlarged, t_g, mode, &spec)?;
        println!(
            "convergence check at dims {:?}: infidelity {:.6e} (shift {:.3e})",
            enlarged.dims(),
            check.infidelity(),
            (report.infidelity() - check.infidelity()).abs()
        );
    }
    if out.is_some() {
        emit(out, &gate_sweep_csv(std::slice::from_ref(&report)))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_gate_sweep(
    config: &RunConfig,
    out: &Option<PathBuf>,
    t_g: Option<Vec<f64>>,
    mode: Option<ModeArg>,
) -> Result<ExitCode> {
    let times = t_g.unwrap_or_else(|| config.gate_times_ns());
    let mode: ScheduleMode = match mode {
        Some(arg) => arg.into(),
        None => config.gate_mode()?,
    };
    let space = config.space()?;
    let spec = config.propagation(0.0, 1.0)?;
    let reports = gate_sweep(&config.circuit, space, &times, mode, &spec)?;
    if let Some(best) = reports
        .iter()
        .min_by(|a, b| a.infidelity().total_cmp(&b.infidelity()))
    {
        eprintln!(
            "gate-sweep: best infidelity {:.6e} at t_g = {} ns ({} schedule)",
            best.infidelity(),
            best.t_g_ns,
            mode.label()
        );
    }
    emit(out, &gate_sweep_csv(&reports))?;
    Ok(ExitCode::SUCCESS)
}
