use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use spinbench_core::calibration::{measure_crosstalk_phase, CalibrationState, PairCalibration};
use spinbench_core::campaign::{cal_context, calibrate_simultaneous, run_campaign, with_workers, Campaign, Experiment};
use spinbench_core::config::Config;
use spinbench_core::pulse::{make_shape, normalize_area, spectrum, Shape, DEFAULT_SAMPLE_STEP_NS};
use spinbench_core::Error;

const SHIPPED_CONFIG: &str = include_str!("../../../configs/five_qubit.toml");

#[derive(Parser)]
#[command(
    name = "spinbench",
    version,
    about = "Simulated benchmarking and calibration of a shared-line spin-qubit register"
)]
struct Cli {
    /// TOML configuration; the shipped five-qubit register if omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for sequences and noise; the config value if omitted.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 lets the pool decide.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// Output directory.
    #[arg(long, global = true, env = "SPINBENCH_OUT", default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pulse envelopes and their spectra.
    #[command(subcommand)]
    Pulse(PulseCmd),
    /// Randomized benchmarking.
    #[command(subcommand)]
    Rb(RbCmd),
    /// Calibration steps.
    #[command(subcommand)]
    Cal(CalCmd),
    /// Run a named campaign: rb, irb, srb, detuning-sweep, tg-sweep,
    /// cal-ladder, fig2d or fig5c.
    Run {
        #[arg(value_parser = parse_experiment)]
        experiment: Experiment,
        #[command(flatten)]
        opts: RbOpts,
    },
}

#[derive(Args, Clone)]
struct PulseOpts {
    #[arg(long, value_parser = parse_shape, default_value = "kaiser")]
    shape: Shape,
    #[arg(long, visible_alias = "tg", default_value_t = 83.0)]
    gate_time: f64,
    /// Kaiser beta, sech or Gaussian width, or flat fraction.
    #[arg(long, visible_alias = "beta")]
    param: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_SAMPLE_STEP_NS)]
    step: f64,
    /// Rectangular-equivalent amplitude.
    #[arg(long, default_value_t = 1.0)]
    amplitude: f64,
}

#[derive(Subcommand)]
enum PulseCmd {
    /// Write the sampled envelope.
    Synth(PulseOpts),
    /// Write the power spectrum and report the sidelobes.
    Spectrum {
        #[command(flatten)]
        pulse: PulseOpts,
        /// Bin spacing (MHz).
        #[arg(long, default_value_t = 0.01)]
        resolution: f64,
        /// Carrier the frequency axis is centred on (MHz).
        #[arg(long, default_value_t = 0.0)]
        carrier: f64,
    },
}

#[derive(Args, Clone, Default)]
struct RbOpts {
    #[arg(long, value_delimiter = ',')]
    qubits: Option<Vec<usize>>,
    #[arg(long)]
    gate_time: Option<f64>,
    #[arg(long)]
    chi: Option<f64>,
    #[arg(long)]
    randomizations: Option<usize>,
    #[arg(long)]
    shots: Option<usize>,
    /// Longest sequence is 2^this Cliffords.
    #[arg(long)]
    max_length_log2: Option<u32>,
    /// Start from this calibration file instead of nominal values.
    #[arg(long)]
    calibration: Option<PathBuf>,
    /// Skip crosstalk calibration and compensation in simultaneous runs.
    #[arg(long)]
    uncalibrated: bool,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    detunings: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    gate_times: Option<Vec<f64>>,
    /// Interleaved word over X and Y.
    #[arg(long)]
    word: Option<String>,
}

#[derive(Subcommand)]
enum RbCmd {
    /// Single-qubit benchmarking of each selected qubit.
    Run(RbOpts),
    /// Interleaved benchmarking of one word.
    Irb(RbOpts),
    /// Simultaneous benchmarking.
    Srb(RbOpts),
    SweepDetuning(RbOpts),
    SweepTg(RbOpts),
}

#[derive(Subcommand)]
enum CalCmd {
    /// Frequency and amplitude ladder for each qubit.
    RunLadder(RbOpts),
    /// Crosstalk phase of one ordered pair: TARGET DRIVER.
    Xtalk {
        #[arg(long, num_args = 2, value_names = ["TARGET", "DRIVER"], required = true)]
        pair: Vec<usize>,
        #[arg(long)]
        gate_time: Option<f64>,
        #[arg(long)]
        calibration: Option<PathBuf>,
    },
    /// Crosstalk phases of every pair, then the simultaneous amplitudes.
    Optimize {
        #[arg(long, value_delimiter = ',', required = true)]
        qubits: Vec<usize>,
        #[arg(long)]
        gate_time: Option<f64>,
        #[arg(long)]
        calibration: Option<PathBuf>,
    },
}

fn parse_experiment(s: &str) -> Result<Experiment, String> {
    Experiment::parse(s).map_err(|_| {
        let names: Vec<&str> = Experiment::ALL.iter().map(|e| e.name()).collect();
        format!("expected one of {}", names.join(", "))
    })
}

fn parse_shape(s: &str) -> Result<Shape, String> {
    Shape::parse(s).map_err(|e| e.to_string())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::FitFailure { .. } | Error::NonConvergence { .. } | Error::FringeContrastTooLow { .. } | Error::NoIntersection { .. } => 3,
        _ => 4,
    }
}

fn kind(code: u8) -> &'static str {
    match code {
        2 => "config",
        3 => "fit",
        _ => "runtime",
    }
}

fn load_config(path: Option<&Path>) -> Result<Config, Error> {
    match path {
        Some(p) => Config::load(p),
        None => Config::parse(SHIPPED_CONFIG),
    }
}

fn load_calibration(path: Option<&Path>) -> Result<Option<CalibrationState>, Error> {
    path.map(CalibrationState::load).transpose()
}

fn campaign(experiment: Experiment, seed: Option<u64>, o: &RbOpts) -> Result<Campaign, Error> {
    Ok(Campaign {
        seed,
        qubits: o.qubits.clone(),
        gate_time_ns: o.gate_time,
        chi: o.chi,
        randomizations: o.randomizations,
        shots: o.shots,
        max_length_log2: o.max_length_log2,
        detunings_mhz: o.detunings.clone(),
        gate_times_ns: o.gate_times.clone(),
        word: o.word.clone(),
        calibrate: !o.uncalibrated,
        calibration: load_calibration(o.calibration.as_deref())?,
        ..Campaign::new(experiment)
    })
}

fn print(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).unwrap_or_default());
}

fn pulse(cmd: &PulseCmd, out: &Path) -> Result<(), Error> {
    let opts = match cmd {
        PulseCmd::Synth(p) | PulseCmd::Spectrum { pulse: p, .. } => p,
    };
    let param = opts.param.unwrap_or_else(|| opts.shape.default_param());
    let unit = make_shape(opts.shape, opts.gate_time, param, opts.step)?;
    let env = normalize_area(&unit, opts.amplitude, opts.gate_time)?;
    let dir = out.join("pulse");
    std::fs::create_dir_all(&dir)?;
    match cmd {
        PulseCmd::Synth(_) => {
            let path = dir.join("envelope.csv");
            env.write_csv(std::fs::File::create(&path)?)?;
            print(&json!({
                "shape": env.shape,
                "gate_time_ns": env.gate_time_ns,
                "peak": env.peak(),
                "area": env.area(),
                "segments": env.n_segments(),
                "output": path,
            }));
        }
        PulseCmd::Spectrum { resolution, carrier, .. } => {
            let s = spectrum(&env, *carrier, *resolution)?;
            let path = dir.join("spectrum.csv");
            s.write_csv(std::fs::File::create(&path)?)?;
            let first = s.first_sidelobe();
            print(&json!({
                "shape": env.shape,
                "gate_time_ns": env.gate_time_ns,
                "first_sidelobe": first.map(|(f, db)| json!({"offset_mhz": f, "level_db": db})),
                "max_sidelobe_db": s.max_sidelobe_db(),
                "output": path,
            }));
        }
    }
    Ok(())
}

fn cal(cmd: &CalCmd, config: &Config, seed: Option<u64>, out: &Path) -> Result<(), Error> {
    let seed = seed.unwrap_or(config.rb.seed);
    let dir = out.join("cal");
    match cmd {
        CalCmd::RunLadder(o) => {
            let m = run_campaign(config, &campaign(Experiment::CalLadder, Some(seed), o)?, &dir.join("ladder"))?;
            print(&serde_json::to_value(&m)?);
        }
        CalCmd::Xtalk {
            pair,
            gate_time,
            calibration,
        } => {
            let (target, driver) = (pair[0], pair[1]);
            let mut rb = config.rb.clone();
            if let Some(t) = gate_time {
                rb.gate_time_ns = *t;
            }
            let mut state = load_calibration(calibration.as_deref())?
                .map(|c| c.at_gate_time(rb.gate_time_ns))
                .unwrap_or_else(|| CalibrationState::ideal(&config.register, rb.gate_time_ns));
            let ctx = cal_context(config, &rb, seed);
            let m = measure_crosstalk_phase(&ctx, &state, target, driver, None)?;
            state.set_pair(PairCalibration {
                target,
                driver,
                delta_phi: m.delta_phi,
                stderr: m.stderr,
                n_blocks: m.n_blocks,
                scaling: None,
            });
            state.touch();
            std::fs::create_dir_all(&dir)?;
            let path = dir.join("calibration.json");
            state.save(&path)?;
            print(&json!({ "measurement": m, "calibration": path }));
        }
        CalCmd::Optimize {
            qubits,
            gate_time,
            calibration,
        } => {
            let mut rb = config.rb.clone();
            rb.qubits = qubits.clone();
            if let Some(t) = gate_time {
                rb.gate_time_ns = *t;
            }
            rb.validate()?;
            let mut state = load_calibration(calibration.as_deref())?
                .map(|c| c.at_gate_time(rb.gate_time_ns))
                .unwrap_or_else(|| CalibrationState::ideal(&config.register, rb.gate_time_ns));
            let sc = calibrate_simultaneous(config, &rb, &mut state, seed)?;
            std::fs::create_dir_all(&dir)?;
            let path = dir.join("calibration.json");
            state.save(&path)?;
            let r = &sc.amplitudes.result;
            print(&json!({
                "qubits": qubits,
                "amplitudes": sc.amplitudes.amplitudes,
                "objective": r.value,
                "iterations": r.iterations,
                "converged": r.converged,
                "delta_phi": sc.crosstalk.iter().map(|m| json!({"target": m.target, "driver": m.drivers[0], "delta_phi": m.delta_phi})).collect::<Vec<_>>(),
                "calibration": path,
            }));
        }
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<(), Error> {
    let config = || load_config(cli.config.as_deref());
    let run = |e: Experiment, o: &RbOpts| -> Result<(), Error> {
        let c = campaign(e, cli.seed, o)?;
        let m = run_campaign(&config()?, &c, &cli.out.join(e.name()))?;
        print(&serde_json::to_value(&m)?);
        Ok(())
    };
    match &cli.command {
        Command::Pulse(p) => pulse(p, &cli.out),
        Command::Run { experiment, opts } => run(*experiment, opts),
        Command::Rb(cmd) => match cmd {
            RbCmd::Run(o) => run(Experiment::Rb, o),
            RbCmd::Irb(o) => run(Experiment::Irb, o),
            RbCmd::Srb(o) => run(Experiment::Srb, o),
            RbCmd::SweepDetuning(o) => run(Experiment::DetuningSweep, o),
            RbCmd::SweepTg(o) => run(Experiment::TgSweep, o),
        },
        Command::Cal(cmd) => cal(cmd, &config()?, cli.seed, &cli.out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match with_workers(cli.workers, || dispatch(&cli)).and_then(|r| r) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = exit_code(&e);
            let doc = json!({ "error": kind(code), "message": e.to_string(), "exit_code": code });
            eprintln!("{doc}");
            ExitCode::from(code)
        }
    }
}
