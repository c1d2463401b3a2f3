//! `srp-phat` command-line tool.
//!
//! Exit codes: 0 success, 1 invalid arguments or configuration, 2 I/O
//! failure, 3 numerical failure.

mod config;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use srp_phat::experiment::{run_experiment, trial_rng, ExperimentConfig, SignalBank};
use srp_phat::roomsim::{default_max_order, image_method_rir, schroeder_rt60, simulate_event, SimulationOptions};
use srp_phat::srpmap::{build_grid, compute_map, localize};
use srp_phat::{gcc, wav, Band, Error, GccMode, Signal};

use config::{MapConfig, RirConfig};

#[derive(Parser, Debug)]
#[command(name = "srp-phat", version, about = "SRP-PHAT localization with band-limited GCC")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Image-method room impulse response: writes rir.wav and rir.csv, prints T60.
    Rir(ConfigArgs),
    /// GCC-PHAT between two WAV files as a dense (tau, value) table.
    Gcc(GccArgs),
    /// SRP map of one simulated event: writes map.csv and slice.csv.
    Map(ConfigArgs),
    /// Randomized localization experiment: writes the CSV suite.
    Experiment(ConfigArgs),
}

#[derive(Args, Debug)]
struct ConfigArgs {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Existing output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct GccArgs {
    /// Reference channel.
    wav_k: PathBuf,
    /// Second channel; the peak sits at its delay relative to the first.
    wav_l: PathBuf,
    /// Output CSV file.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "standard")]
    mode: GccMode,
    /// Lower band edge in Hz.
    #[arg(long, default_value_t = 100.0)]
    f_min: f64,
    /// Upper band edge in Hz.
    #[arg(long, default_value_t = 6000.0)]
    f_max: f64,
    /// Band-limited cutoff in Hz; required for the band-limited modes.
    #[arg(long)]
    f_hat: Option<f64>,
    /// Largest lag scanned in each direction, seconds.
    #[arg(long, default_value_t = 0.01)]
    max_lag: f64,
}

/// Error carrying the process exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io(_) | Error::Wav(_) => 2,
            Error::InvalidArgument(_)
            | Error::SampleRateMismatch(..)
            | Error::PositionOutsideRoom(..)
            | Error::AbsorptionOutOfRange(_) => 1,
            _ => 3,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e).into()
    }
}

type CliResult = Result<(), Failure>;

fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure {
        code: 2,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    serde_json::from_str(&text).map_err(|e| Failure {
        code: 1,
        message: format!("invalid config {}: {e}", path.display()),
    })
}

fn require_dir(dir: &Path) -> CliResult {
    if dir.is_dir() {
        Ok(())
    } else {
        Err(Failure {
            code: 2,
            message: format!("output directory {} does not exist", dir.display()),
        })
    }
}

fn cmd_rir(args: &ConfigArgs) -> CliResult {
    let cfg: RirConfig = read_config(&args.config)?;
    require_dir(&args.out)?;
    cfg.room.validate()?;
    let order = cfg.max_order.unwrap_or_else(|| default_max_order(&cfg.room));
    let rir = image_method_rir(&cfg.room, cfg.source, cfg.mic, cfg.sample_rate, order)?;
    let signal = Signal::new(rir.sample_rate, rir.taps.clone())?;
    wav::write_wav_f32(args.out.join("rir.wav"), &signal)?;
    let mut w = BufWriter::new(File::create(args.out.join("rir.csv"))?);
    writeln!(w, "index,time,tap")?;
    for (i, t) in rir.taps.iter().enumerate() {
        writeln!(w, "{i},{},{t}", i as f64 / rir.sample_rate)?;
    }
    w.flush()?;
    println!("taps: {}", rir.taps.len());
    println!("max_order: {order}");
    match schroeder_rt60(&rir) {
        Ok(t60) => println!("t60: {t60}"),
        Err(Error::InsufficientDecay) => println!("t60: n/a (no decay to -35 dB)"),
        Err(e) => return Err(e.into()),
    }
    Ok(())
}

fn cmd_gcc(args: &GccArgs) -> CliResult {
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        require_dir(parent)?;
    }
    let band = Band::from_hz(args.f_min, args.f_max)?;
    let s_k = wav::read_wav(&args.wav_k)?;
    let s_l = wav::read_wav(&args.wav_l)?;
    let spec = gcc::pair_spectrum(&s_k, &s_l)?;
    if band.omega_max > spec.nyquist() {
        return Err(Error::InvalidArgument(format!("--f-max {} exceeds Nyquist", args.f_max)).into());
    }
    let omega_hat = match (args.mode, args.f_hat) {
        (GccMode::Standard, _) => band.omega_max,
        (_, Some(f)) => 2.0 * std::f64::consts::PI * f,
        (_, None) => {
            return Err(Failure {
                code: 1,
                message: format!("--f-hat is required in {} mode", args.mode),
            })
        }
    };
    let step = 0.1 / s_k.sample_rate();
    let n = (args.max_lag / step).floor() as i64;
    let mut w = BufWriter::new(File::create(&args.out)?);
    writeln!(w, "tau,value")?;
    let mut best = (0.0, f64::NEG_INFINITY);
    for i in -n..=n {
        let tau = i as f64 * step;
        let v = match args.mode {
            GccMode::Standard | GccMode::BandLimited => gcc::gcc_eval(&spec, band.omega_min, omega_hat, tau)?,
            GccMode::BandLimitedNormalized => gcc::gcc_eval_normalized(&spec, band, omega_hat, tau)?,
        };
        if v > best.1 {
            best = (tau, v);
        }
        writeln!(w, "{tau},{v}")?;
    }
    w.flush()?;
    println!("peak_tau: {}", best.0);
    println!("peak_value: {}", best.1);
    Ok(())
}

fn cmd_map(args: &ConfigArgs) -> CliResult {
    let cfg: MapConfig = read_config(&args.config)?;
    require_dir(&args.out)?;
    cfg.room.validate()?;
    let array = cfg.array.build(&cfg.room)?;
    let bank = SignalBank::new(cfg.signal.clone(), cfg.sample_rate)?;
    let signal = bank.draw(&mut trial_rng(cfg.seed, 0, 1))?;
    let options = SimulationOptions {
        attenuate: false,
        max_order: cfg.max_order,
    };
    let mics = simulate_event(&cfg.room, cfg.source, &array, &signal, options)?;
    let grid = build_grid(cfg.room.bounds(), cfg.delta_r)?;
    let band = Band::from_hz(cfg.band.f_min, cfg.band.f_max)?;
    let map = compute_map(&grid, &mics, &array, cfg.mode, band, cfg.room.c)?;
    let mut w = BufWriter::new(File::create(args.out.join("map.csv"))?);
    map.write_csv(&mut w)?;
    w.flush()?;
    let mut w = BufWriter::new(File::create(args.out.join("slice.csv"))?);
    map.write_slice_csv(cfg.slice_z.unwrap_or(cfg.source.z), &mut w)?;
    w.flush()?;
    let result = localize(&map)?;
    let e = result.estimate;
    println!("mode: {}", cfg.mode);
    println!("estimate: {},{},{}", e.x, e.y, e.z);
    println!("peak_value: {}", result.peak_value);
    println!("peak_index: {}", result.peak_index);
    println!("error: {}", e.distance(cfg.source));
    Ok(())
}

fn cmd_experiment(args: &ConfigArgs) -> CliResult {
    let text = fs::read_to_string(&args.config).map_err(|e| Failure {
        code: 2,
        message: format!("cannot read {}: {e}", args.config.display()),
    })?;
    let cfg = ExperimentConfig::from_json(&text)?;
    require_dir(&args.out)?;
    let report = run_experiment(&cfg)?;
    report.write_csv_files(&args.out)?;
    println!("trials: {}", report.trials.len());
    println!("r_m: {}", report.r_m);
    for row in report.stats.iter().filter(|r| r.bucket.is_none()) {
        if let Some(s) = row.stats {
            println!(
                "rt60={} delta_r={} {}: mean_error={:.4} mean_deviation={:.4} n={}",
                row.rt60, row.delta_r, row.mode, s.mean_error, s.mean_deviation, s.n
            );
        }
    }
    Ok(())
}

fn run(cli: &Cli) -> CliResult {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure {
                code: 1,
                message: "--threads must be at least 1".into(),
            });
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure {
                code: 1,
                message: e.to_string(),
            })?;
    }
    match &cli.command {
        Command::Rir(a) => cmd_rir(a),
        Command::Gcc(a) => cmd_gcc(a),
        Command::Map(a) => cmd_map(a),
        Command::Experiment(a) => cmd_experiment(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
