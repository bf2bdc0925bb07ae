//! Command-line interface: argument grammar, unit handling, and the
//! dispatch from parsed commands to the library.
//!
//! Every command prints a `key = value` report on stdout; commands that
//! produce curves write plot-ready CSV files instead of drawing anything.
//! Exit codes are stable: 0 success, 1 usage or input error, 2 a fit the
//! data could not support (no signal, rank deficiency, non-convergence).
//!
//! Numeric flags accept unit suffixes: frequencies in Hz..THz normalize
//! to MHz, times in ns..s normalize to ns, fields are Gauss. Stochastic
//! commands all take `--seed`. Defaults come from a config file when
//! `--config` or `SPINPHOTON_CONFIG` names one; explicit flags win over
//! the file, the file wins over built-ins.

mod units;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use spinphoton::config::Config;
use spinphoton::csv::{
    is_photon_stream, photon_record_from_table, photon_record_to_table, series_from_table,
    CsvTable,
};
use spinphoton::fit::{fit, CiLevel, DataSeries, FitOptions, ModelId, ModelSpec};
use spinphoton::kinetics::{decay_eigenvalues, g2_analytic, steady_state, ThreeLevelRates};
use spinphoton::photon::{correlate_ensemble, simulate_ensemble};
use spinphoton::pulse::{simulate_sequence, simulate_sequence_mc, SequenceKind, SequenceSpec};
use spinphoton::purcell::{
    consistency_report, entanglement_rate_gain, purcell_from_cavity, purcell_from_intensity,
    purcell_from_lifetimes, purcell_from_zpl_fractions, zpl_fraction_on_resonance, CavityParams,
    EmissionBudget, ModeVolume, DEFAULT_CONSISTENCY_THRESHOLD, DEFAULT_INTRINSIC_ZPL_FRACTION,
};
use spinphoton::report::{fit_report, Report};
use spinphoton::spin::{
    odmr_spectrum, transition_frequencies, zeeman_fan, SpinSystem, BULK_HH_D_MHZ,
    GYROMAGNETIC_MHZ_PER_G, NANOBEAM_HH_D_MHZ,
};
use spinphoton::{Error, Result};

/// Stock emitter kinetics (per-ns rates) used as defaults by the g2
/// commands: 15.7 ns radiative lifetime, 75 ns shelf lifetime.
const DEFAULT_PUMP: f64 = 0.015;
const DEFAULT_RADIATIVE: f64 = 1.0 / 15.7;
const DEFAULT_SHELVE: f64 = 0.005;
const DEFAULT_DESHELVE: f64 = 1.0 / 75.0;

#[derive(Parser)]
#[command(
    name = "spinphoton",
    version,
    about = "Simulate and fit cavity-coupled color-center photon statistics, spin spectra, and coherence decays"
)]
struct Cli {
    /// Config file with default settings (overrides SPINPHOTON_CONFIG).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model to a CSV data series.
    Fit(FitArgs),
    /// Purcell enhancement from one measurement route.
    #[command(subcommand)]
    Purcell(PurcellCmd),
    /// Zero-phonon fraction on resonance from an enhancement factor.
    DwInvert(DwInvertArgs),
    /// Two-photon entanglement-rate gain from the ZPL fractions.
    EntanglementGain(GainArgs),
    /// ODMR spectrum, transition frequencies, or a Zeeman fan.
    Odmr(OdmrArgs),
    /// Second-order photon correlation of the three-level emitter.
    #[command(subcommand)]
    G2(G2Cmd),
    /// Spin-control pulse sequences (populations vs sweep).
    #[command(subcommand)]
    Pulse(PulseCmd),
}

#[derive(Args)]
struct FitArgs {
    /// Model name: lorentzian, gaussian, exp_decay, stretched_exp,
    /// damped_sinusoid, sin2_stretched, g2_three_level.
    #[arg(long)]
    model: String,
    /// Input CSV (x, y, optional sigma columns).
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    columns: ColumnArgs,
    #[command(flatten)]
    fitopts: FitOptArgs,
}

#[derive(Args)]
struct ColumnArgs {
    /// Column holding x (name or index; default: first column).
    #[arg(long, value_name = "COL")]
    x_col: Option<String>,
    /// Column holding y (name or index; default: second column).
    #[arg(long, value_name = "COL")]
    y_col: Option<String>,
    /// Column holding per-point uncertainties (default: a column named
    /// `sigma`, when present).
    #[arg(long, value_name = "COL")]
    sigma_col: Option<String>,
}

#[derive(Args)]
struct FitOptArgs {
    /// Override an initial parameter, e.g. --init tau=15.7 (repeatable).
    #[arg(long = "init", value_parser = units::key_value, value_name = "KEY=VALUE", allow_hyphen_values = true)]
    init: Vec<(String, f64)>,
    /// Differentiate numerically instead of with analytic gradients.
    #[arg(long)]
    numeric_jacobian: bool,
    /// Report one-standard-error intervals instead of 95% intervals.
    #[arg(long)]
    one_sigma: bool,
    #[arg(long, default_value_t = 200)]
    max_iterations: usize,
}

#[derive(Subcommand)]
enum PurcellCmd {
    /// From on/off-resonance and dark lifetimes.
    Lifetimes {
        /// On-resonance excited-state lifetime (ns unless suffixed).
        #[arg(long, value_parser = units::time_ns)]
        tau_on: f64,
        /// Off-resonance excited-state lifetime.
        #[arg(long, value_parser = units::time_ns)]
        tau_off: f64,
        /// Dark (shelf) lifetime.
        #[arg(long, value_parser = units::time_ns)]
        tau_dark: f64,
        /// Intrinsic zero-phonon fraction.
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// From the zero-phonon intensity ratio.
    Intensity {
        /// ZPL intensity on resonance.
        #[arg(long)]
        on: f64,
        /// ZPL intensity with the cavity detuned.
        #[arg(long)]
        off: f64,
    },
    /// From cavity figures of merit.
    Cavity {
        /// Quality factor.
        #[arg(long)]
        q: f64,
        /// Mode volume in (wavelength / index)^3.
        #[arg(long, group = "volume", required = true)]
        mode_volume: Option<f64>,
        /// Mode volume in cubic micrometers.
        #[arg(long, group = "volume", requires = "wavelength_um", requires = "index")]
        mode_volume_um3: Option<f64>,
        /// Free-space emission wavelength in micrometers.
        #[arg(long)]
        wavelength_um: Option<f64>,
        /// Host refractive index.
        #[arg(long)]
        index: Option<f64>,
        /// Emitter-field overlap factor, in [0, 1].
        #[arg(long, default_value_t = 1.0)]
        overlap: f64,
        /// Spectral match factor, in [0, 1].
        #[arg(long, default_value_t = 1.0)]
        spectral_match: f64,
    },
    /// From the zero-phonon fractions off and on resonance.
    Dw {
        /// Off-resonance (intrinsic) ZPL fraction.
        #[arg(long)]
        alpha: Option<f64>,
        /// On-resonance ZPL fraction.
        #[arg(long)]
        beta: f64,
    },
    /// Cross-check every route the given inputs support.
    Consistency {
        #[arg(long)]
        intensity_on: Option<f64>,
        #[arg(long)]
        intensity_off: Option<f64>,
        #[arg(long, value_parser = units::time_ns)]
        tau_on: Option<f64>,
        #[arg(long, value_parser = units::time_ns)]
        tau_off: Option<f64>,
        #[arg(long, value_parser = units::time_ns)]
        tau_dark: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        /// Externally determined factor to include in the comparison.
        #[arg(long)]
        external: Option<f64>,
        /// Relative spread above which the routes are flagged.
        #[arg(long)]
        threshold: Option<f64>,
    },
}

#[derive(Args)]
struct DwInvertArgs {
    /// Purcell factor of the zero-phonon channel.
    #[arg(long)]
    f: f64,
    /// Intrinsic zero-phonon fraction.
    #[arg(long)]
    alpha: Option<f64>,
}

#[derive(Args)]
struct GainArgs {
    /// On-resonance zero-phonon fraction.
    #[arg(long)]
    beta: f64,
    /// Intrinsic zero-phonon fraction.
    #[arg(long)]
    alpha: Option<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Preset {
    /// Nanobeam-strained hh site (D = 1328 MHz).
    NanobeamHh,
    /// Bulk hh site (D = 1336 MHz).
    BulkHh,
}

#[derive(Args)]
struct OdmrArgs {
    #[arg(long, value_enum, default_value_t = Preset::NanobeamHh)]
    preset: Preset,
    /// Axial zero-field splitting (overrides preset and config).
    #[arg(long, value_parser = units::freq_mhz)]
    d: Option<f64>,
    /// Transverse zero-field splitting.
    #[arg(long, value_parser = units::freq_mhz)]
    e: Option<f64>,
    /// Gyromagnetic ratio in MHz per Gauss.
    #[arg(long)]
    gamma: Option<f64>,
    /// Field components in Gauss.
    #[arg(long, value_parser = units::field_gauss, default_value = "0", allow_hyphen_values = true)]
    bx: f64,
    #[arg(long, value_parser = units::field_gauss, default_value = "0", allow_hyphen_values = true)]
    by: f64,
    #[arg(long, value_parser = units::field_gauss, default_value = "0", allow_hyphen_values = true)]
    bz: f64,
    /// Sweep the axial field: min,max,step in Gauss; writes the
    /// transition branches instead of a spectrum.
    #[arg(long, value_parser = units::sweep_triple, requires = "out", value_name = "MIN,MAX,STEP")]
    b_sweep: Option<(f64, f64, f64)>,
    /// Line full width at half maximum.
    #[arg(long, value_parser = units::freq_mhz)]
    linewidth: Option<f64>,
    /// Peak contrast; negative for the usual PL dip.
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    contrast: f64,
    /// Spectrum grid start (default: just below the lower transition).
    #[arg(long, value_parser = units::freq_mhz)]
    from: Option<f64>,
    /// Spectrum grid end (default: just above the upper transition).
    #[arg(long, value_parser = units::freq_mhz)]
    to: Option<f64>,
    #[arg(long, default_value_t = 1201)]
    points: usize,
    /// Write the spectrum (or fan) as CSV here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RateArgs {
    /// Ground -> excited pump rate, 1/ns.
    #[arg(long, default_value_t = DEFAULT_PUMP)]
    pump: f64,
    /// Excited -> ground radiative rate, 1/ns.
    #[arg(long, default_value_t = DEFAULT_RADIATIVE)]
    radiative: f64,
    /// Excited -> dark shelving rate, 1/ns.
    #[arg(long, default_value_t = DEFAULT_SHELVE)]
    shelve: f64,
    /// Dark -> ground deshelving rate, 1/ns.
    #[arg(long, default_value_t = DEFAULT_DESHELVE)]
    deshelve: f64,
}

impl RateArgs {
    fn rates(&self) -> Result<ThreeLevelRates> {
        ThreeLevelRates::new(self.pump, self.radiative, self.shelve, self.deshelve)
    }
}

#[derive(Subcommand)]
enum G2Cmd {
    /// Closed-form g2(tau) from the rate equations.
    Analytic {
        #[command(flatten)]
        rates: RateArgs,
        /// Largest delay on the grid.
        #[arg(long, value_parser = units::time_ns, default_value = "400")]
        tau_max: f64,
        #[arg(long, default_value_t = 801)]
        points: usize,
        /// Write tau_ns,g2 CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Photon-stream simulation and start-stop correlation.
    Montecarlo {
        #[command(flatten)]
        rates: RateArgs,
        /// Observation window per trajectory.
        #[arg(long, value_parser = units::time_ns, default_value = "1ms")]
        duration: f64,
        #[arg(long, default_value_t = 8)]
        trajectories: usize,
        /// Photon detection probability.
        #[arg(long, default_value_t = 1.0)]
        efficiency: f64,
        #[arg(long, value_parser = units::time_ns, default_value = "2")]
        bin_width: f64,
        #[arg(long, value_parser = units::time_ns, default_value = "400")]
        tau_max: f64,
        #[arg(long)]
        seed: Option<u64>,
        /// Write the tau_ns,g2,sigma histogram here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also dump the first trajectory's photon timestamps.
        #[arg(long)]
        stream_out: Option<PathBuf>,
    },
    /// Fit the three-level g2 model to a histogram or photon stream.
    Fit {
        /// Histogram CSV (tau, g2) or a `# timestamps_ns` photon stream.
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        columns: ColumnArgs,
        #[command(flatten)]
        fitopts: FitOptArgs,
        /// Correlator bin width, used when the input is a photon stream.
        #[arg(long, value_parser = units::time_ns, default_value = "2")]
        bin_width: f64,
        /// Correlator range, used when the input is a photon stream.
        #[arg(long, value_parser = units::time_ns, default_value = "400")]
        tau_max: f64,
    },
}

#[derive(Args)]
struct NoiseArgs {
    /// Quasi-static Gaussian detuning spread; enables Monte Carlo.
    #[arg(long, value_parser = units::freq_mhz)]
    noise_sigma: Option<f64>,
    /// Monte Carlo samples when --noise-sigma is set.
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    /// Exponential transverse damping time for white noise.
    #[arg(long, value_parser = units::time_ns)]
    t2_white: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum PulseCmd {
    /// Single drive pulse, sweeping drive amplitude.
    Rabi {
        /// Rabi frequency at unit drive amplitude.
        #[arg(long, value_parser = units::freq_mhz, default_value = "1.25")]
        rabi: f64,
        /// Drive pulse length.
        #[arg(long, value_parser = units::time_ns, default_value = "400")]
        pulse_length: f64,
        /// Drive detuning.
        #[arg(long, value_parser = units::freq_mhz, default_value = "0", allow_hyphen_values = true)]
        detuning: f64,
        /// Amplitude sweep start.
        #[arg(long, default_value_t = 0.0)]
        from: f64,
        /// Amplitude sweep end.
        #[arg(long, default_value_t = 1.0)]
        to: f64,
        #[arg(long, default_value_t = 201)]
        points: usize,
        #[command(flatten)]
        noise: NoiseArgs,
        /// Write amplitude,p_plus CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// pi/2 - free evolution - pi/2, sweeping the free time.
    Ramsey {
        /// Deliberate drive detuning (sets the fringe frequency).
        #[arg(long, value_parser = units::freq_mhz, default_value = "0", allow_hyphen_values = true)]
        detuning: f64,
        #[arg(long, value_parser = units::time_ns, default_value = "0")]
        from: f64,
        #[arg(long, value_parser = units::time_ns, default_value = "4us")]
        to: f64,
        #[arg(long, default_value_t = 401)]
        points: usize,
        #[command(flatten)]
        noise: NoiseArgs,
        /// Write time_ns,p_plus CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Single-echo sequence, sweeping the total free time.
    Hahn {
        #[arg(long, value_parser = units::freq_mhz, default_value = "0", allow_hyphen_values = true)]
        detuning: f64,
        #[arg(long, value_parser = units::time_ns, default_value = "0")]
        from: f64,
        #[arg(long, value_parser = units::time_ns, default_value = "20us")]
        to: f64,
        #[arg(long, default_value_t = 401)]
        points: usize,
        #[command(flatten)]
        noise: NoiseArgs,
        /// Write time_us,p_plus CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Multi-echo train, sweeping the total free time.
    Cpmg {
        /// Number of refocusing pulses.
        #[arg(long, default_value_t = 1)]
        n_pi: usize,
        #[arg(long, value_parser = units::freq_mhz, default_value = "0", allow_hyphen_values = true)]
        detuning: f64,
        #[arg(long, value_parser = units::time_ns, default_value = "0")]
        from: f64,
        #[arg(long, value_parser = units::time_ns, default_value = "40us")]
        to: f64,
        #[arg(long, default_value_t = 401)]
        points: usize,
        #[command(flatten)]
        noise: NoiseArgs,
        /// Write time_us,p_plus CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parse `argv` and run it, writing reports to `out` and diagnostics to
/// `err`. `config_env` is the value of `SPINPHOTON_CONFIG`, when set.
/// Returns the process exit code.
pub fn dispatch<I, T>(
    argv: I,
    config_env: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let rendered = e.render().to_string();
            return if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{rendered}");
                0
            } else {
                let _ = write!(err, "{rendered}");
                1
            };
        }
    };
    match run(&cli, config_env, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_fit_quality() {
                2
            } else {
                1
            }
        }
    }
}

/// Defaults resolved from the config file, with built-in fallbacks.
struct Settings {
    config: Config,
}

impl Settings {
    fn load(flag: Option<&Path>, env: Option<&Path>) -> Result<Self> {
        let config = match flag.or(env) {
            Some(path) => Config::load(path)?,
            None => Config::default(),
        };
        Ok(Self { config })
    }

    fn alpha(&self, flag: Option<f64>) -> f64 {
        flag.or(self.config.alpha)
            .unwrap_or(DEFAULT_INTRINSIC_ZPL_FRACTION)
    }

    fn threshold(&self, flag: Option<f64>) -> f64 {
        flag.or(self.config.consistency_threshold)
            .unwrap_or(DEFAULT_CONSISTENCY_THRESHOLD)
    }

    fn gamma(&self, flag: Option<f64>) -> f64 {
        flag.or(self.config.gyromagnetic_mhz_per_g)
            .unwrap_or(GYROMAGNETIC_MHZ_PER_G)
    }

    fn d_mhz(&self, flag: Option<f64>, preset: Preset) -> f64 {
        flag.or(self.config.d_mhz).unwrap_or(match preset {
            Preset::NanobeamHh => NANOBEAM_HH_D_MHZ,
            Preset::BulkHh => BULK_HH_D_MHZ,
        })
    }

    fn e_mhz(&self, flag: Option<f64>) -> f64 {
        flag.or(self.config.e_mhz).unwrap_or(0.0)
    }

    fn linewidth(&self, flag: Option<f64>) -> f64 {
        flag.or(self.config.linewidth_mhz).unwrap_or(10.0)
    }

    fn seed(&self, flag: Option<u64>) -> u64 {
        flag.or(self.config.seed).unwrap_or(0)
    }
}

fn run(
    cli: &Cli,
    config_env: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<()> {
    let settings = Settings::load(cli.config.as_deref(), config_env)?;
    match &cli.command {
        Command::Fit(args) => run_fit(args, out, err),
        Command::Purcell(cmd) => run_purcell(cmd, &settings, out),
        Command::DwInvert(args) => {
            let alpha = settings.alpha(args.alpha);
            let beta = zpl_fraction_on_resonance(args.f, alpha)?;
            let mut report = Report::new();
            report
                .float("purcell_factor", args.f)
                .float("zpl_fraction_off", alpha)
                .float("zpl_fraction_on", beta);
            emit(out, &report)
        }
        Command::EntanglementGain(args) => {
            let alpha = settings.alpha(args.alpha);
            let gain = entanglement_rate_gain(args.beta, alpha)?;
            let mut report = Report::new();
            report
                .float("zpl_fraction_on", args.beta)
                .float("zpl_fraction_off", alpha)
                .float("gain", gain);
            emit(out, &report)
        }
        Command::Odmr(args) => run_odmr(args, &settings, out, err),
        Command::G2(cmd) => run_g2(cmd, &settings, out, err),
        Command::Pulse(cmd) => run_pulse(cmd, &settings, out),
    }
}

fn emit(out: &mut dyn Write, report: &Report) -> Result<()> {
    out.write_all(report.to_text().as_bytes())?;
    Ok(())
}

/// Build the optimizer start: `None` for the data-driven guess, explicit
/// values when `--init` covers every parameter, guess-with-overrides
/// otherwise.
fn assemble_initial(
    model: ModelId,
    inits: &[(String, f64)],
    data: &DataSeries,
) -> Result<Option<Vec<f64>>> {
    if inits.is_empty() {
        return Ok(None);
    }
    let names = model.param_names();
    let mut values: Vec<Option<f64>> = vec![None; names.len()];
    for (key, value) in inits {
        let Some(pos) = names.iter().position(|n| n == key) else {
            return Err(Error::InvalidParameter(format!(
                "model `{}` has no parameter `{key}` (parameters: {})",
                model.name(),
                names.join(", ")
            )));
        };
        values[pos] = Some(*value);
    }
    let full = if values.iter().all(Option::is_some) {
        values.into_iter().flatten().collect()
    } else {
        let mut guess = model.initial_guess(data)?;
        for (slot, value) in guess.iter_mut().zip(values) {
            if let Some(v) = value {
                *slot = v;
            }
        }
        guess
    };
    Ok(Some(full))
}

/// Shared fit pipeline: fit a prepared series, print the report, and
/// turn non-convergence into the exit-2 error after the report is out.
fn fit_and_report(
    model: ModelId,
    data: &DataSeries,
    fitopts: &FitOptArgs,
    source: &Path,
    out: &mut dyn Write,
) -> Result<()> {
    let spec = ModelSpec {
        id: model,
        analytic_jacobian: !fitopts.numeric_jacobian,
    };
    let options = FitOptions {
        max_iterations: fitopts.max_iterations,
        ci_level: if fitopts.one_sigma {
            CiLevel::OneSigma
        } else {
            CiLevel::NinetyFive
        },
        ..FitOptions::default()
    };
    let initial = assemble_initial(model, &fitopts.init, data)?;
    let result = fit(&spec, data, initial.as_deref(), &options)?;
    let mut report = fit_report(&result);
    report.int("points", data.len() as i64);
    let mut full = Report::new();
    full.comment(&format!("fit of {}", source.display()));
    emit(out, &full)?;
    emit(out, &report)?;
    if !result.converged {
        return Err(Error::DidNotConverge(format!(
            "no improvement after {} iterations; best parameters reported above",
            result.iterations
        )));
    }
    Ok(())
}

fn load_series(
    input: &Path,
    columns: &ColumnArgs,
    err: &mut dyn Write,
) -> Result<DataSeries> {
    let table = CsvTable::read(input)?;
    let (mut series, merged) = series_from_table(
        &table,
        columns.x_col.as_deref(),
        columns.y_col.as_deref(),
        columns.sigma_col.as_deref(),
    )?;
    if merged > 0 {
        writeln!(
            err,
            "warning: {}: averaged {merged} duplicate-x row{}",
            input.display(),
            if merged == 1 { "" } else { "s" }
        )?;
    }
    series.metadata.source = Some(input.display().to_string());
    Ok(series)
}

fn run_fit(args: &FitArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let model = ModelId::parse(&args.model)?;
    let series = load_series(&args.input, &args.columns, err)?;
    fit_and_report(model, &series, &args.fitopts, &args.input, out)
}

fn run_purcell(cmd: &PurcellCmd, settings: &Settings, out: &mut dyn Write) -> Result<()> {
    let mut report = Report::new();
    match cmd {
        PurcellCmd::Lifetimes {
            tau_on,
            tau_off,
            tau_dark,
            alpha,
        } => {
            let alpha = settings.alpha(*alpha);
            let factor = purcell_from_lifetimes(*tau_on, *tau_off, *tau_dark, alpha)?;
            report
                .float("tau_on_ns", *tau_on)
                .float("tau_off_ns", *tau_off)
                .float("tau_dark_ns", *tau_dark)
                .float("zpl_fraction_off", alpha)
                .float("purcell_factor", factor)
                .float(
                    "zpl_fraction_on",
                    zpl_fraction_on_resonance(factor, alpha)?,
                );
        }
        PurcellCmd::Intensity { on, off } => {
            report
                .float("intensity_on", *on)
                .float("intensity_off", *off)
                .float("purcell_factor", purcell_from_intensity(*on, *off)?);
        }
        PurcellCmd::Cavity {
            q,
            mode_volume,
            mode_volume_um3,
            wavelength_um,
            index,
            overlap,
            spectral_match,
        } => {
            let volume = match (mode_volume, mode_volume_um3) {
                (Some(v), None) => ModeVolume::CubicWavelengths(*v),
                (None, Some(v)) => ModeVolume::CubicMicrons(*v),
                _ => unreachable!("clap group enforces exactly one volume flag"),
            };
            let cavity = CavityParams {
                quality_factor: *q,
                mode_volume: volume,
                // Wavelength and index cancel when the volume is given in
                // cubic wavelengths; any valid pair will do there.
                wavelength_um: wavelength_um.unwrap_or(1.0),
                refractive_index: index.unwrap_or(1.0),
                field_overlap: *overlap,
                spectral_match: *spectral_match,
            };
            report
                .float("quality_factor", *q)
                .float("purcell_factor", purcell_from_cavity(&cavity)?);
        }
        PurcellCmd::Dw { alpha, beta } => {
            let alpha = settings.alpha(*alpha);
            report
                .float("zpl_fraction_off", alpha)
                .float("zpl_fraction_on", *beta)
                .float("purcell_factor", purcell_from_zpl_fractions(alpha, *beta)?);
        }
        PurcellCmd::Consistency {
            intensity_on,
            intensity_off,
            tau_on,
            tau_off,
            tau_dark,
            alpha,
            beta,
            external,
            threshold,
        } => {
            let budget = EmissionBudget {
                zpl_fraction_off: Some(settings.alpha(*alpha)),
                zpl_fraction_on: *beta,
                intensity_on: *intensity_on,
                intensity_off: *intensity_off,
                tau_on_ns: *tau_on,
                tau_off_ns: *tau_off,
                tau_dark_ns: *tau_dark,
                purcell_external: *external,
            };
            let check = consistency_report(&budget, settings.threshold(*threshold))?;
            for (name, value) in check.values() {
                report.float(&format!("purcell_{name}"), value);
            }
            for (route, reason) in &check.route_errors {
                report.comment(&format!("route {route} failed: {reason}"));
            }
            if let Some(spread) = check.relative_spread {
                report.float("relative_spread", spread);
            }
            report
                .float("threshold", check.threshold)
                .text("flagged", if check.flagged { "true" } else { "false" });
        }
    }
    emit(out, &report)
}

fn run_odmr(
    args: &OdmrArgs,
    settings: &Settings,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<()> {
    let system = SpinSystem {
        d_mhz: settings.d_mhz(args.d, args.preset),
        e_mhz: settings.e_mhz(args.e),
        gamma_mhz_per_g: settings.gamma(args.gamma),
        b_gauss: [args.bx, args.by, args.bz],
    };
    for warning in system.warnings() {
        writeln!(err, "warning: {warning}")?;
    }

    let mut report = Report::new();
    report
        .float("d_mhz", system.d_mhz)
        .float("e_mhz", system.e_mhz)
        .float("gamma_mhz_per_g", system.gamma_mhz_per_g);

    if let Some(triple) = args.b_sweep {
        let grid = units::sweep_grid(triple);
        let fan = zeeman_fan(&system, &grid)?;
        let mut table = CsvTable::with_header(&["bz_gauss", "to_minus_mhz", "to_plus_mhz"]);
        let mut any_degenerate = false;
        for (bz, transitions) in grid.iter().zip(&fan) {
            table.push_row(&[*bz, transitions.to_minus_mhz, transitions.to_plus_mhz]);
            any_degenerate |= transitions.degenerate_labeling;
        }
        table.write(args.out.as_deref().expect("clap requires --out with --b-sweep"))?;
        report
            .float("bz_from_gauss", triple.0)
            .float("bz_to_gauss", triple.1)
            .float("bz_step_gauss", triple.2)
            .int("rows", grid.len() as i64)
            .text(
                "degenerate_labeling",
                if any_degenerate { "true" } else { "false" },
            );
        if let Some(path) = &args.out {
            report.text("out", &path.display().to_string());
        }
        return emit(out, &report);
    }

    let transitions = transition_frequencies(&system)?;
    report
        .float("bx_gauss", args.bx)
        .float("by_gauss", args.by)
        .float("bz_gauss", args.bz)
        .float("to_minus_mhz", transitions.to_minus_mhz)
        .float("to_plus_mhz", transitions.to_plus_mhz)
        .text(
            "degenerate_labeling",
            if transitions.degenerate_labeling {
                "true"
            } else {
                "false"
            },
        );
    if let Some(path) = &args.out {
        let linewidth = settings.linewidth(args.linewidth);
        let lo = transitions.to_minus_mhz.min(transitions.to_plus_mhz);
        let hi = transitions.to_minus_mhz.max(transitions.to_plus_mhz);
        let from = args.from.unwrap_or(lo - 8.0 * linewidth);
        let to = args.to.unwrap_or(hi + 8.0 * linewidth);
        if to <= from {
            return Err(Error::InvalidParameter(format!(
                "grid end {to} MHz does not exceed start {from} MHz"
            )));
        }
        let grid = units::linspace(from, to, args.points.max(2));
        let spectrum = odmr_spectrum(&system, &grid, linewidth, args.contrast)?;
        let mut table = CsvTable::with_header(&["frequency_mhz", "contrast"]);
        for (f, c) in spectrum.frequencies_mhz.iter().zip(&spectrum.contrast) {
            table.push_row(&[*f, *c]);
        }
        table.write(path)?;
        report
            .float("linewidth_mhz", linewidth)
            .int("points", grid.len() as i64)
            .text("out", &path.display().to_string());
    }
    emit(out, &report)
}

fn run_g2(
    cmd: &G2Cmd,
    settings: &Settings,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<()> {
    match cmd {
        G2Cmd::Analytic {
            rates,
            tau_max,
            points,
            out: out_path,
        } => {
            let rates = rates.rates()?;
            let (fast, slow) = decay_eigenvalues(&rates)?;
            let stationary = steady_state(&rates)?;
            let mut report = Report::new();
            report
                .float("pump_per_ns", rates.pump)
                .float("radiative_per_ns", rates.radiative)
                .float("shelve_per_ns", rates.shelve)
                .float("deshelve_per_ns", rates.deshelve)
                .float("antibunching_ns", -1.0 / fast.re)
                .float("bunching_ns", -1.0 / slow.re)
                .float("steady_excited", stationary.excited)
                .float("g2_zero", g2_analytic(&rates, 0.0)?);
            if let Some(path) = out_path {
                let grid = units::linspace(0.0, *tau_max, (*points).max(2));
                let mut table = CsvTable::with_header(&["tau_ns", "g2"]);
                for &tau in &grid {
                    table.push_row(&[tau, g2_analytic(&rates, tau)?]);
                }
                table.write(path)?;
                report
                    .int("points", grid.len() as i64)
                    .text("out", &path.display().to_string());
            }
            emit(out, &report)
        }
        G2Cmd::Montecarlo {
            rates,
            duration,
            trajectories,
            efficiency,
            bin_width,
            tau_max,
            seed,
            out: out_path,
            stream_out,
        } => {
            let rates = rates.rates()?;
            let seed = settings.seed(*seed);
            let records =
                simulate_ensemble(&rates, *trajectories, *duration, *efficiency, seed)?;
            let histogram = correlate_ensemble(&records, *bin_width, *tau_max)?;
            let photons: usize = records.iter().map(|r| r.timestamps.len()).sum();
            let pairs: u64 = histogram.counts.iter().sum();

            let mut report = Report::new();
            report
                .int("trajectories", *trajectories as i64)
                .float("duration_ns", *duration)
                .float("detection_efficiency", *efficiency)
                .int("seed", seed as i64)
                .int("photons", photons as i64)
                .int("pairs", pairs as i64)
                .float("bin_width_ns", *bin_width);
            if let Some(path) = out_path {
                let mut table = CsvTable::with_header(&["tau_ns", "g2", "sigma"]);
                let centers = histogram.centers();
                let values = histogram.normalized();
                let sigmas = histogram.standard_errors();
                for ((tau, g2), sigma) in centers.iter().zip(&values).zip(&sigmas) {
                    table.push_row(&[*tau, *g2, *sigma]);
                }
                table.write(path)?;
                report
                    .int("bins", centers.len() as i64)
                    .text("out", &path.display().to_string());
            }
            if let Some(path) = stream_out {
                photon_record_to_table(&records[0]).write(path)?;
                report.text("stream_out", &path.display().to_string());
            }
            emit(out, &report)
        }
        G2Cmd::Fit {
            input,
            columns,
            fitopts,
            bin_width,
            tau_max,
        } => {
            let table = CsvTable::read(input)?;
            let series = if is_photon_stream(&table) {
                let record = photon_record_from_table(&table)?;
                let histogram = spinphoton::photon::correlate(&record, *bin_width, *tau_max)?;
                writeln!(
                    err,
                    "note: {}: correlated {} photons into {} bins",
                    input.display(),
                    record.timestamps.len(),
                    histogram.counts.len()
                )?;
                DataSeries::new(
                    histogram.centers(),
                    histogram.normalized(),
                    Some(histogram.standard_errors()),
                    spinphoton::fit::SeriesMetadata {
                        source: Some(input.display().to_string()),
                        x_name: Some("tau_ns".into()),
                        y_name: Some("g2".into()),
                    },
                )?
            } else {
                load_series(input, columns, err)?
            };
            fit_and_report(ModelId::G2ThreeLevel, &series, fitopts, input, out)
        }
    }
}

fn run_pulse(cmd: &PulseCmd, settings: &Settings, out: &mut dyn Write) -> Result<()> {
    let (kind, n_pi, detuning, from, to, points, noise, out_path, rabi_pulse) = match cmd {
        PulseCmd::Rabi {
            rabi,
            pulse_length,
            detuning,
            from,
            to,
            points,
            noise,
            out,
        } => (
            SequenceKind::Rabi,
            0,
            *detuning,
            *from,
            *to,
            *points,
            noise,
            out,
            Some((*rabi, *pulse_length)),
        ),
        PulseCmd::Ramsey {
            detuning,
            from,
            to,
            points,
            noise,
            out,
        } => (
            SequenceKind::Ramsey,
            0,
            *detuning,
            *from,
            *to,
            *points,
            noise,
            out,
            None,
        ),
        PulseCmd::Hahn {
            detuning,
            from,
            to,
            points,
            noise,
            out,
        } => (
            SequenceKind::Hahn,
            1,
            *detuning,
            *from,
            *to,
            *points,
            noise,
            out,
            None,
        ),
        PulseCmd::Cpmg {
            n_pi,
            detuning,
            from,
            to,
            points,
            noise,
            out,
        } => (
            SequenceKind::Cpmg,
            *n_pi,
            *detuning,
            *from,
            *to,
            *points,
            noise,
            out,
            None,
        ),
    };

    let sweep = units::linspace(from, to, points.max(2));
    let mut spec = SequenceSpec::new(kind, sweep.clone());
    spec.detuning_mhz = detuning;
    spec.n_pi = n_pi.max(1);
    if let Some((rabi, pulse_length)) = rabi_pulse {
        spec.rabi_frequency_mhz = rabi;
        spec.pulse_length_ns = pulse_length;
    }

    let mut report = Report::new();
    report.text(
        "sequence",
        match kind {
            SequenceKind::Rabi => "rabi",
            SequenceKind::Ramsey => "ramsey",
            SequenceKind::Hahn => "hahn",
            SequenceKind::Cpmg => "cpmg",
        },
    );
    if kind == SequenceKind::Cpmg {
        report.int("n_pi", spec.n_pi as i64);
    }
    report.float("detuning_mhz", detuning);
    if let Some((rabi, pulse_length)) = rabi_pulse {
        report
            .float("rabi_mhz", rabi)
            .float("pulse_length_ns", pulse_length);
    }

    let signal = match noise.noise_sigma {
        Some(sigma) => {
            let seed = settings.seed(noise.seed);
            report
                .float("noise_sigma_mhz", sigma)
                .int("samples", noise.samples as i64)
                .int("seed", seed as i64);
            // Quasi-static Gaussian detuning noise dephases a free
            // evolution with a Gaussian envelope; this is its 1/e time.
            let t2_star_ns =
                std::f64::consts::SQRT_2 * 1e3 / (2.0 * std::f64::consts::PI * sigma);
            report.float("quasi_static_t2_star_ns", t2_star_ns);
            simulate_sequence_mc(&spec, sigma, noise.samples, noise.t2_white, seed)?
        }
        None => simulate_sequence(&spec, noise.t2_white)?,
    };
    if let Some(t2) = noise.t2_white {
        report.float("t2_white_ns", t2);
    }

    if let Some(path) = out_path {
        // Long echo sequences plot naturally in microseconds.
        let microseconds = matches!(kind, SequenceKind::Hahn | SequenceKind::Cpmg);
        let (x_name, scale) = match kind {
            SequenceKind::Rabi => ("amplitude", 1.0),
            SequenceKind::Ramsey => ("time_ns", 1.0),
            SequenceKind::Hahn | SequenceKind::Cpmg => ("time_us", 1e-3),
        };
        debug_assert_eq!(microseconds, scale != 1.0);
        let mut table = CsvTable::with_header(&[x_name, "p_plus"]);
        for (x, p) in sweep.iter().zip(&signal) {
            table.push_row(&[x * scale, *p]);
        }
        table.write(path)?;
        report
            .int("points", sweep.len() as i64)
            .text("out", &path.display().to_string());
    }
    emit(out, &report)
}
