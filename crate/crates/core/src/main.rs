use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use holofocus::runner::{self, ExperimentConfig, QuadraticArgs};
use holofocus::{Error, Result};

/// Untrained in-line hologram reconstruction with reverse-attention autofocusing.
///
/// Default output root is taken from HOLOFOCUS_OUTPUT_ROOT when `--out` is not given.
#[derive(Parser, Debug)]
#[command(name = "holofocus", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize an in-line hologram of a sample image.
    Simulate(ConfigFlags),
    /// Reconstruct the object (and its distance) from a simulated hologram.
    Reconstruct(ConfigFlags),
    /// Run the synthetic noisy-quadratic convergence sweep.
    Quadratic(QuadraticFlags),
    /// PSNR and SSIM of a test image against a reference, or of a results directory.
    Evaluate(EvaluateFlags),
}

/// Every flag mirrors a key of the `key = value` config file and overrides it.
#[derive(Args, Debug)]
struct ConfigFlags {
    /// Flat key = value file applied before the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    /// bar-target, cells, dendrite, or an image path.
    #[arg(long)]
    sample: Option<String>,
    /// Directory written by `simulate`.
    #[arg(long)]
    hologram: Option<String>,
    /// Meters.
    #[arg(long)]
    wavelength: Option<String>,
    /// Sensor pixel pitch in meters.
    #[arg(long)]
    pitch: Option<String>,
    #[arg(long)]
    size: Option<String>,
    /// True object distance in meters.
    #[arg(long)]
    z: Option<String>,
    #[arg(long)]
    zmin: Option<String>,
    #[arg(long)]
    zmax: Option<String>,
    #[arg(long)]
    zstep: Option<String>,
    /// known, random:<index>, non-weighted, alternating or reverse-attention.
    #[arg(long)]
    strategy: Option<String>,
    /// include or exclude.
    #[arg(long)]
    random_mode: Option<String>,
    /// Also run the random-distance expectation (one run per candidate).
    #[arg(long)]
    random_expectation: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    learning_rate: Option<String>,
    /// Comma-separated encoder widths, e.g. 16,32,64,128.
    #[arg(long)]
    encoder_channels: Option<String>,
    #[arg(long)]
    kernel_size: Option<String>,
    #[arg(long)]
    leaky_slope: Option<String>,
    /// f32 or f64.
    #[arg(long)]
    precision: Option<String>,
    /// Gaussian noise standard deviation relative to the mean intensity.
    #[arg(long)]
    noise: Option<String>,
    #[arg(long)]
    normalize: Option<String>,
    /// none or double.
    #[arg(long)]
    padding: Option<String>,
    /// Amplitude object with this absorption.
    #[arg(long)]
    absorption: Option<String>,
    /// Phase object with this maximum phase in radians.
    #[arg(long)]
    phase: Option<String>,
    #[arg(long)]
    log_every: Option<String>,
    #[arg(long)]
    out: Option<String>,
}

impl ConfigFlags {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        let pairs = [
            ("sample", &self.sample),
            ("hologram", &self.hologram),
            ("wavelength", &self.wavelength),
            ("pitch", &self.pitch),
            ("size", &self.size),
            ("z", &self.z),
            ("zmin", &self.zmin),
            ("zmax", &self.zmax),
            ("zstep", &self.zstep),
            ("strategy", &self.strategy),
            ("random-mode", &self.random_mode),
            ("random-expectation", &self.random_expectation),
            ("epochs", &self.epochs),
            ("seed", &self.seed),
            ("learning-rate", &self.learning_rate),
            ("encoder-channels", &self.encoder_channels),
            ("kernel-size", &self.kernel_size),
            ("leaky-slope", &self.leaky_slope),
            ("precision", &self.precision),
            ("noise", &self.noise),
            ("normalize", &self.normalize),
            ("padding", &self.padding),
            ("absorption", &self.absorption),
            ("phase", &self.phase),
            ("log-every", &self.log_every),
            ("out", &self.out),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct QuadraticFlags {
    /// Ensemble sizes.
    #[arg(long = "n", value_delimiter = ',', default_values_t = [2usize, 5, 20, 100])]
    ns: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    seeds: usize,
    #[arg(long, default_value_t = 0)]
    first_seed: u64,
    #[arg(long, default_value_t = 500)]
    iterations: usize,
    #[arg(long, default_value_t = 10.0)]
    x0: f64,
    #[arg(long, default_value_t = 1)]
    dim: usize,
    /// Ground-loss gap that counts as converged.
    #[arg(long, default_value_t = 1e-4)]
    threshold: f64,
    /// Export sampled loss curves for the first seed of each n.
    #[arg(long)]
    surface: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvaluateFlags {
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long, conflicts_with = "batch")]
    test: Option<PathBuf>,
    /// Directory of reconstruct outputs; writes evaluation.csv there.
    #[arg(long)]
    batch: Option<PathBuf>,
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("plain data serializes")
}

fn run(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Simulate(flags) => {
            let out = runner::simulate(&flags.resolve()?)?;
            Ok(to_json(&serde_json::json!({
                "dir": out.dir,
                "true_distance": out.hologram.true_distance,
                "normalization": out.hologram.normalization,
            })))
        }
        Command::Reconstruct(flags) => {
            let out = runner::reconstruct(&flags.resolve()?)?;
            Ok(to_json(&serde_json::json!({ "dir": out.dir, "summary": out.summary })))
        }
        Command::Quadratic(f) => {
            let args = QuadraticArgs {
                ns: f.ns,
                seeds: f.seeds,
                first_seed: f.first_seed,
                iterations: f.iterations,
                x0: f.x0,
                dim: f.dim,
                threshold: f.threshold,
                surface: f.surface,
                out: f.out,
            };
            let report = runner::quadratic(&args)?;
            Ok(to_json(&serde_json::json!({ "dir": report.dir, "runs": report.rows.len() })))
        }
        Command::Evaluate(f) => match (f.batch, f.reference, f.test) {
            (Some(dir), reference, _) => Ok(to_json(&runner::evaluate_batch(&dir, reference.as_deref())?)),
            (None, Some(reference), Some(test)) => Ok(to_json(&runner::evaluate(&reference, &test)?)),
            _ => Err(Error::Config("evaluate needs --reference and --test, or --batch".into())),
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(text) => {
            // a closed pipe (e.g. `| head`) is not a failure of the command
            let _ = writeln!(std::io::stdout(), "{text}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            let line = serde_json::json!({ "error": { "kind": err.kind(), "message": err.to_string() } });
            eprintln!("{line}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
