//! Named experiment campaigns that write result, table and plot files.
//!
//! Every campaign writes into one output directory:
//!
//! * `result.json`: the typed result, free of timestamps, so two runs with
//!   the same configuration and seed produce identical bytes;
//! * `data.csv`: the summary table;
//! * `plot.csv`: `series,x,y,yerr` rows for plotting;
//! * `calibration.json` when the campaign calibrates;
//! * `manifest.json`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::calibration::{
    calibrate_crosstalk, default_optimizer_options, optimize_simultaneous_amplitudes, run_ladder, AmplitudeOptimization, CalContext,
    CalibrationState, CrosstalkMeasurement, LadderStep,
};
use crate::clifford::parse_word;
use crate::config::Config;
use crate::error::{invalid, Error, Result};
use crate::experiments::{
    detuning_sweep, run_interleaved, run_rb, run_srb, tg_sweep, InterleavedResult, RBConfig, RBResult, ReadoutMode, SrbResult, SweepTable,
};
use crate::manifest::RunManifest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Rb,
    Irb,
    Srb,
    DetuningSweep,
    TgSweep,
    CalLadder,
    /// Infidelity against gate time at 83, 125, 250 and 500 ns.
    Fig2d,
    /// Five-qubit simultaneous benchmarking with tomographic readout at 250 ns.
    Fig5c,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::Rb,
        Experiment::Irb,
        Experiment::Srb,
        Experiment::DetuningSweep,
        Experiment::TgSweep,
        Experiment::CalLadder,
        Experiment::Fig2d,
        Experiment::Fig5c,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Rb => "rb",
            Experiment::Irb => "irb",
            Experiment::Srb => "srb",
            Experiment::DetuningSweep => "detuning-sweep",
            Experiment::TgSweep => "tg-sweep",
            Experiment::CalLadder => "cal-ladder",
            Experiment::Fig2d => "fig2d",
            Experiment::Fig5c => "fig5c",
        }
    }

    pub fn parse(name: &str) -> Result<Experiment> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == name)
            .ok_or_else(|| invalid(format!("unknown experiment '{name}'")))
    }
}

pub const FIG2D_GATE_TIMES_NS: [f64; 4] = [83.0, 125.0, 250.0, 500.0];
pub const FIG5C_GATE_TIME_NS: f64 = 250.0;
pub const DEFAULT_DETUNINGS_MHZ: [f64; 9] = [-1.0, -0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75, 1.0];

/// One campaign and its overrides of the configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Campaign {
    pub experiment: Experiment,
    /// Replaces both the benchmarking and the noise seed.
    pub seed: Option<u64>,
    pub qubits: Option<Vec<usize>>,
    pub gate_time_ns: Option<f64>,
    pub chi: Option<f64>,
    pub randomizations: Option<usize>,
    pub shots: Option<usize>,
    /// Sequence lengths run over 1, 2, 4, ... up to 2^this.
    pub max_length_log2: Option<u32>,
    pub detunings_mhz: Option<Vec<f64>>,
    pub gate_times_ns: Option<Vec<f64>>,
    /// Interleaved word, e.g. "X" or "XY".
    pub word: Option<String>,
    /// Simultaneous campaigns measure crosstalk phases and optimize
    /// amplitudes before benchmarking; without it no compensation is applied.
    pub calibrate: bool,
    /// Starting calibration; the register's nominal values otherwise.
    pub calibration: Option<CalibrationState>,
}

impl Campaign {
    pub fn new(experiment: Experiment) -> Self {
        Campaign {
            experiment,
            seed: None,
            qubits: None,
            gate_time_ns: None,
            chi: None,
            randomizations: None,
            shots: None,
            max_length_log2: None,
            detunings_mhz: None,
            gate_times_ns: None,
            word: None,
            calibrate: true,
            calibration: None,
        }
    }

    /// Benchmarking settings after presets and overrides.
    pub fn rb_config(&self, config: &Config) -> RBConfig {
        let mut rb = config.rb.clone();
        if self.experiment == Experiment::Fig5c {
            rb.qubits = config.register.labels();
            rb.gate_time_ns = FIG5C_GATE_TIME_NS;
            rb.readout = ReadoutMode::Tomographic;
            rb.lengths = (0..=9).map(|k| 1usize << k).collect();
        }
        if let Some(s) = self.seed {
            rb.seed = s;
        }
        if let Some(q) = &self.qubits {
            rb.qubits = q.clone();
        }
        if let Some(t) = self.gate_time_ns {
            rb.gate_time_ns = t;
        }
        if self.chi.is_some() {
            rb.chi = self.chi;
        }
        if let Some(r) = self.randomizations {
            rb.randomizations = r;
        }
        if let Some(s) = self.shots {
            rb.shots = s;
        }
        if let Some(m) = self.max_length_log2 {
            rb.lengths = (0..=m).map(|k| 1usize << k).collect();
        }
        rb.simultaneous = matches!(self.experiment, Experiment::Srb | Experiment::Fig5c);
        rb.compensate = rb.simultaneous && self.calibrate;
        rb
    }

    pub fn seed(&self, config: &Config) -> u64 {
        self.seed.unwrap_or(config.rb.seed)
    }
}

/// Calibration measurements made on the way to a simultaneous run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimultaneousCalibration {
    pub crosstalk: Vec<CrosstalkMeasurement>,
    pub amplitudes: AmplitudeOptimization,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CampaignResult {
    Rb(Vec<RBResult>),
    Irb(InterleavedResult),
    Srb {
        calibration: Option<SimultaneousCalibration>,
        result: SrbResult,
    },
    Sweep(SweepTable),
    Ladder(Vec<LadderStep>),
}

/// Content of `result.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub experiment: Experiment,
    pub seed: u64,
    pub config_digest: String,
    pub rb: RBConfig,
    /// Calibration the benchmarks ran with, timestamp removed.
    pub calibration: CalibrationState,
    pub result: CampaignResult,
}

impl ResultDocument {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Run `f` on a pool of `workers` threads; 0 uses the global pool.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| invalid(e.to_string()))?;
    Ok(pool.install(f))
}

/// Calibration context matching the pulse settings of `rb`.
pub fn cal_context<'a>(config: &'a Config, rb: &RBConfig, seed: u64) -> CalContext<'a> {
    let mut ctx = CalContext::new(&config.register).with_seed(seed);
    ctx.shape = rb.shape;
    ctx.shape_param = rb.shape_param();
    ctx.sample_step_ns = rb.sample_step_ns;
    ctx.idle_ns = rb.idle_ns;
    ctx.cycle_time_s = rb.cycle_time_s;
    ctx
}

/// Noiseless crosstalk and amplitude calibration of `rb.qubits`.
pub fn calibrate_simultaneous(config: &Config, rb: &RBConfig, cal: &mut CalibrationState, seed: u64) -> Result<SimultaneousCalibration> {
    let ctx = cal_context(config, rb, seed);
    let crosstalk = calibrate_crosstalk(&ctx, cal, &rb.qubits)?;
    let amplitudes = optimize_simultaneous_amplitudes(&ctx, cal, &rb.qubits, &default_optimizer_options(rb.qubits.len()))?;
    Ok(SimultaneousCalibration { crosstalk, amplitudes })
}

fn starting_calibration(config: &Config, campaign: &Campaign, gate_time_ns: f64) -> CalibrationState {
    match &campaign.calibration {
        Some(c) if (c.gate_time_ns - gate_time_ns).abs() < 1e-9 => c.clone(),
        Some(c) => c.at_gate_time(gate_time_ns),
        None => CalibrationState::ideal(&config.register, gate_time_ns),
    }
}

fn execute(config: &Config, campaign: &Campaign, rb: &RBConfig) -> Result<(CalibrationState, CampaignResult)> {
    let seed = campaign.seed(config);
    let mut noise = config.noise.clone();
    noise.seed = seed;
    let mut cal = starting_calibration(config, campaign, rb.gate_time_ns);
    let result = match campaign.experiment {
        Experiment::Rb => CampaignResult::Rb(run_rb(rb, &config.register, &noise, &cal)?),
        Experiment::Irb => {
            let word = parse_word(campaign.word.as_deref().unwrap_or("X"))?;
            CampaignResult::Irb(run_interleaved(rb, &config.register, &noise, &cal, &word)?)
        }
        Experiment::Srb | Experiment::Fig5c => {
            let calibration = if campaign.calibrate {
                Some(calibrate_simultaneous(config, rb, &mut cal, seed)?)
            } else {
                None
            };
            let result = run_srb(rb, &config.register, &noise, &cal, &config.readout)?;
            CampaignResult::Srb { calibration, result }
        }
        Experiment::DetuningSweep => {
            let d = campaign.detunings_mhz.clone().unwrap_or_else(|| DEFAULT_DETUNINGS_MHZ.to_vec());
            CampaignResult::Sweep(detuning_sweep(rb, &config.register, &noise, &cal, &d)?)
        }
        Experiment::TgSweep | Experiment::Fig2d => {
            let t = match (campaign.experiment, &campaign.gate_times_ns) {
                (Experiment::TgSweep, Some(t)) => t.clone(),
                _ => FIG2D_GATE_TIMES_NS.to_vec(),
            };
            CampaignResult::Sweep(tg_sweep(rb, &config.register, &noise, &cal, &t)?)
        }
        Experiment::CalLadder => {
            let ctx = cal_context(config, rb, seed).with_noise(Some(noise.clone())).with_shots(rb.shots);
            let f_rabi = 0.25 / (rb.gate_time_ns * 1e-3);
            CampaignResult::Ladder(run_ladder(&ctx, &mut cal, &rb.qubits, f_rabi)?)
        }
    };
    Ok((cal, result))
}

fn data_csv(result: &CampaignResult) -> String {
    let mut s = String::new();
    let rb_rows = |s: &mut String, rs: &[&RBResult]| {
        s.push_str("qubit,gate_time_ns,p,sigma_p,f_clifford,f_primitive,sigma_f_primitive\n");
        for r in rs {
            let _ = writeln!(
                s,
                "{},{},{:.12},{:.3e},{:.12},{:.12},{:.3e}",
                r.qubit, r.gate_time_ns, r.fit.p, r.fit.sigma_p, r.fit.f_clifford, r.fit.f_primitive, r.fit.sigma_f_primitive
            );
        }
    };
    match result {
        CampaignResult::Rb(rs) => rb_rows(&mut s, &rs.iter().collect::<Vec<_>>()),
        CampaignResult::Srb { result, .. } => rb_rows(&mut s, &result.per_qubit.iter().collect::<Vec<_>>()),
        CampaignResult::Irb(r) => {
            rb_rows(&mut s, &[&r.reference, &r.interleaved]);
            let _ = writeln!(s, "# interleaved {} fidelity {:.12} +- {:.3e}", r.word, r.fidelity, r.sigma);
        }
        CampaignResult::Sweep(t) => {
            s.push_str("x,f_primitive,sigma,infidelity\n");
            for r in &t.rows {
                let _ = writeln!(s, "{},{:.12},{:.3e},{:.6e}", r.x, r.f_primitive, r.sigma, r.infidelity);
            }
        }
        CampaignResult::Ladder(steps) => {
            s.push_str("qubit,f_res_coarse_mhz,f_mw_fine_mhz,f_det_mhz,amplitude_coarse,amplitude_fine\n");
            for st in steps {
                let _ = writeln!(
                    s,
                    "{},{:.6},{:.6},{:.6},{:.8},{:.8}",
                    st.qubit,
                    st.coarse.f_res_mhz,
                    st.fine_frequency.f_mw_mhz,
                    st.fine_frequency.f_det_mhz,
                    st.amplitude.amplitude,
                    st.fine_amplitude.amplitude
                );
            }
        }
    }
    s
}

fn plot_csv(result: &CampaignResult) -> String {
    let mut s = String::from("series,x,y,yerr\n");
    let decay = |s: &mut String, tag: &str, r: &RBResult| {
        for p in &r.points {
            let _ = writeln!(s, "Q{}{tag},{},{:.10},{:.10}", r.qubit, p.length, p.mean, p.ci95);
        }
        for p in &r.points {
            let y = r.fit.a * r.fit.p.powf(p.length as f64);
            let _ = writeln!(s, "Q{}{tag} fit,{},{:.10},0", r.qubit, p.length, y);
        }
    };
    match result {
        CampaignResult::Rb(rs) => rs.iter().for_each(|r| decay(&mut s, "", r)),
        CampaignResult::Srb { result, .. } => result.per_qubit.iter().for_each(|r| decay(&mut s, "", r)),
        CampaignResult::Irb(r) => {
            decay(&mut s, " reference", &r.reference);
            decay(&mut s, " interleaved", &r.interleaved);
        }
        CampaignResult::Sweep(t) => {
            for r in &t.rows {
                let _ = writeln!(s, "Q{},{},{:.6e},{:.3e}", t.qubit, r.x, r.infidelity, r.sigma);
            }
        }
        CampaignResult::Ladder(steps) => {
            for st in steps {
                let fa = &st.fine_amplitude;
                for ((v, p), m) in fa.sweep.iter().zip(&fa.p_plus).zip(&fa.p_minus) {
                    let _ = writeln!(s, "Q{} 16+1,{v:.8},{p:.8},0", st.qubit);
                    let _ = writeln!(s, "Q{} 16+3,{v:.8},{m:.8},0", st.qubit);
                }
            }
        }
    }
    s
}

/// Run `campaign` and write its files into `out_dir`, which is created if
/// needed. The manifest is returned and also written to `manifest.json`.
pub fn run_campaign(config: &Config, campaign: &Campaign, out_dir: &Path) -> Result<RunManifest> {
    let rb = campaign.rb_config(config);
    // overrides that break the settings are configuration errors too
    rb.validate().map_err(|e| Error::Config(format!("rb: {e}")))?;
    let seed = campaign.seed(config);
    let mut manifest = RunManifest::begin(campaign.experiment.name(), &(config, campaign), seed)?;
    let (cal, result) = execute(config, campaign, &rb)?;
    std::fs::create_dir_all(out_dir)?;
    let mut write = |name: &str, text: &str| -> Result<PathBuf> {
        let p = out_dir.join(name);
        std::fs::write(&p, text).map_err(Error::from)?;
        manifest.outputs.push(p.clone());
        Ok(p)
    };
    let mut stripped = cal.clone();
    stripped.updated = None;
    let doc = ResultDocument {
        experiment: campaign.experiment,
        seed,
        config_digest: manifest.config_digest.clone(),
        rb,
        calibration: stripped,
        result,
    };
    write("result.json", &serde_json::to_string_pretty(&doc)?)?;
    write("data.csv", &data_csv(&doc.result))?;
    write("plot.csv", &plot_csv(&doc.result))?;
    if campaign.calibrate && matches!(campaign.experiment, Experiment::Srb | Experiment::Fig5c | Experiment::CalLadder) {
        write("calibration.json", &cal.to_json()?)?;
    }
    let path = out_dir.join("manifest.json");
    manifest.outputs.push(path.clone());
    manifest.finish();
    manifest.save(&path)?;
    Ok(manifest)
}
