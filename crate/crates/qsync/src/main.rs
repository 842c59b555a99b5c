use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use qsync::config::Config;
use qsync::formats;
use qsync_core::channel::simulate;
use qsync_core::fast_xcorr::{find_offset, AliceReference};
use qsync_core::period::ArrivalTimes;
use qsync_core::pipeline::{bench_csv, estimate_period, run_bench, run_sweep, run_sync, sweep_csv, BlockPolicy, SweepGrid, SyncError, SyncInput};
use qsync_core::sync_string::{generate_string, StringParams, SyncString};

#[derive(Parser)]
#[command(name = "qsync", version, about = "Period and offset recovery for sparse pulse-train detections")]
struct Cli {
    /// Seed for every random choice of the subcommand.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

/// Settings shared with the config file; flags override `--config`.
#[derive(Args, Default)]
struct Settings {
    /// Flat key=value file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "tauA", alias = "tau_A")]
    tau_a: Option<f64>,
    #[arg(long = "fractional_offset")]
    fractional_offset: Option<f64>,
    #[arg(long = "drift_rate")]
    drift_rate: Option<f64>,
    #[arg(long = "jitter_sigma")]
    jitter_sigma: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    qber: Option<f64>,
    #[arg(long = "background_rate")]
    background_rate: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long = "z_basis_prob")]
    z_basis_prob: Option<f64>,
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long = "start_time")]
    start_time: Option<f64>,
    #[arg(long)]
    resolution: Option<f64>,
    #[arg(long = "L")]
    len: Option<usize>,
    #[arg(long = "N1")]
    blocks: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long = "string_seed")]
    string_seed: Option<u64>,
    #[arg(long = "Tacq", alias = "T_acq")]
    t_acq: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    trim: Option<f64>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long = "eta_hint")]
    eta_hint: Option<f64>,
    #[arg(long = "N")]
    n_samples: Option<usize>,
}

impl Settings {
    fn load(&self, seed: Option<u64>) -> Result<Config> {
        let mut config = match &self.config {
            Some(path) => Config::parse(&read_text(path)?).with_context(|| format!("parsing {}", path.display()))?,
            None => Config::default(),
        };
        let pairs: [(&str, Option<String>); 23] = [
            ("tauA", self.tau_a.map(|v| v.to_string())),
            ("fractional_offset", self.fractional_offset.map(|v| v.to_string())),
            ("drift_rate", self.drift_rate.map(|v| v.to_string())),
            ("jitter_sigma", self.jitter_sigma.map(|v| v.to_string())),
            ("eta", self.eta.map(|v| v.to_string())),
            ("qber", self.qber.map(|v| v.to_string())),
            ("background_rate", self.background_rate.map(|v| v.to_string())),
            ("mu", self.mu.map(|v| v.to_string())),
            ("z_basis_prob", self.z_basis_prob.map(|v| v.to_string())),
            ("duration", self.duration.map(|v| v.to_string())),
            ("start_time", self.start_time.map(|v| v.to_string())),
            ("resolution", self.resolution.map(|v| v.to_string())),
            ("L", self.len.map(|v| v.to_string())),
            ("N1", self.blocks.map(|v| v.to_string())),
            ("lambda", self.lambda.map(|v| v.to_string())),
            ("string_seed", self.string_seed.map(|v| v.to_string())),
            ("Tacq", self.t_acq.map(|v| v.to_string())),
            ("sigma", self.sigma.map(|v| v.to_string())),
            ("trim", self.trim.map(|v| v.to_string())),
            ("threshold", self.threshold.map(|v| v.to_string())),
            ("eta_hint", self.eta_hint.map(|v| v.to_string())),
            ("n_samples", self.n_samples.map(|v| v.to_string())),
            ("seed", seed.map(|v| v.to_string())),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                config.set(key, v)?;
            }
        }
        Ok(config)
    }
}

/// The subset of [`Settings`] a sweep does not take from its grid axes.
#[derive(Args)]
struct SweepSettings {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "tauA", alias = "tau_A")]
    tau_a: Option<f64>,
    #[arg(long = "fractional_offset")]
    fractional_offset: Option<f64>,
    #[arg(long = "jitter_sigma")]
    jitter_sigma: Option<f64>,
    #[arg(long = "background_rate")]
    background_rate: Option<f64>,
    #[arg(long = "L")]
    len: Option<usize>,
    #[arg(long = "N1")]
    blocks: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
}

impl SweepSettings {
    fn load(&self, seed: Option<u64>) -> Result<Config> {
        Settings {
            config: self.config.clone(),
            tau_a: self.tau_a,
            fractional_offset: self.fractional_offset,
            jitter_sigma: self.jitter_sigma,
            background_rate: self.background_rate,
            len: self.len,
            blocks: self.blocks,
            lambda: self.lambda,
            ..Settings::default()
        }
        .load(seed)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a sync string file.
    GenString {
        #[arg(long = "L")]
        len: usize,
        #[arg(long = "N1")]
        blocks: usize,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        /// Write the packed binary variant.
        #[arg(long)]
        binary: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate detections; writes timestamps and a truth sidecar.
    Simulate {
        #[command(flatten)]
        settings: Settings,
        /// Sync string file; generated from L, N1, lambda, string_seed if absent.
        #[arg(long)]
        string: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Truth sidecar path; defaults to `<out>.truth.csv`.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Estimate the receiver-frame period of every acquisition window.
    Period {
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        settings: Settings,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Offset search between a sync string and a ternary receiver string.
    Xcorr {
        #[arg(long)]
        alice: PathBuf,
        #[arg(long)]
        bob: PathBuf,
        /// Defaults to the string file's N1.
        #[arg(long = "N1")]
        blocks: Option<usize>,
        #[arg(long, default_value_t = 10.0)]
        threshold: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full synchronization of a timestamp file.
    Sync {
        #[arg(long)]
        alice: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        /// Truth sidecar, for alignment accuracy.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[command(flatten)]
        settings: Settings,
        /// Per-detection absolute indices.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-window period estimates.
        #[arg(long)]
        windows: Option<PathBuf>,
    },
    /// Success map over QBER and sifted sync bits.
    Sweep {
        /// Comma-separated QBER values.
        #[arg(long, value_delimiter = ',', required = true)]
        qber: Vec<f64>,
        /// Comma-separated sifted sync bit counts `L·η`.
        #[arg(long, value_delimiter = ',', required = true)]
        bits: Vec<f64>,
        #[arg(long, default_value_t = 10)]
        reps: usize,
        #[command(flatten)]
        settings: SweepSettings,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Operation counts and wall time of the fast search against the full FFT.
    Bench {
        /// Comma-separated string lengths.
        #[arg(long = "L", value_delimiter = ',', required = true)]
        lens: Vec<usize>,
        /// A fixed N1 or `log2`.
        #[arg(long = "N1", default_value = "log2")]
        blocks: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn read_string(path: &Path) -> Result<SyncString> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    formats::string_from_bytes(&bytes).with_context(|| format!("parsing {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read_arrivals(path: &Path, resolution: f64) -> Result<(ArrivalTimes, Vec<qsync_core::Outcome>)> {
    let (ts, outcomes) = formats::timestamps_from_csv(&read_text(path)?).with_context(|| format!("parsing {}", path.display()))?;
    let arrivals = ArrivalTimes::spanning(ts, resolution)?;
    Ok((arrivals, outcomes))
}

fn run(cli: Cli) -> Result<ExitCode> {
    let seed = cli.seed;
    match cli.command {
        Command::GenString { len, blocks, lambda, binary, out } => {
            let s = generate_string(StringParams::new(len, blocks, lambda, seed.unwrap_or(0))?)?;
            if binary {
                fs::write(&out, formats::string_to_binary(&s))?;
            } else {
                fs::write(&out, formats::string_to_text(&s))?;
            }
        }
        Command::Simulate { settings, string, out, truth } => {
            let config = settings.load(seed)?;
            let s = match string {
                Some(path) => read_string(&path)?,
                None => generate_string(config.string_params()?)?,
            };
            let mut chan = config.channel()?;
            if config.get::<f64>("duration")?.is_none() {
                let clock = config.clock()?;
                chan.duration = chan.start_time + s.len() as f64 * clock.tau_a * (1.0 + clock.fractional_offset.abs()) * 1.02;
            }
            let sim = simulate(&config.clock()?, &chan, &s)?;
            let ts = sim.arrivals.timestamps();
            fs::write(&out, formats::timestamps_to_csv(ts, &sim.outcomes))?;
            let truth = truth.unwrap_or_else(|| out.with_extension("truth.csv"));
            fs::write(&truth, formats::truth_to_csv(ts, &sim.truth))?;
            eprintln!("{} detections written to {}", ts.len(), out.display());
        }
        Command::Period { input, settings, out } => {
            let config = settings.load(seed)?;
            let cfg = config.sync()?;
            let (arrivals, _) = read_arrivals(&input, config.get_or("resolution", 0.0)?)?;
            let ts = arrivals.timestamps();
            let mut text = format!("{}\n", formats::PERIOD_HEADER);
            let mut start = ts.first().copied().unwrap_or(0.0);
            let end = ts.last().copied().unwrap_or(0.0);
            let mut window = 0;
            while start <= end {
                let lo = ts.partition_point(|&t| t < start);
                let hi = ts.partition_point(|&t| t < start + cfg.t_acq);
                let sub = ArrivalTimes::new(ts[lo..hi].to_vec(), start, cfg.t_acq, arrivals.resolution())?;
                if !sub.is_empty() {
                    match estimate_period(&sub, &cfg) {
                        Ok(est) => {
                            text.push_str(&formats::period_row(window, start, cfg.t_acq, sub.len(), &est));
                            text.push('\n');
                        }
                        Err(e) => eprintln!("window {window} skipped: {e}"),
                    }
                }
                window += 1;
                start += cfg.t_acq;
            }
            emit(out.as_deref(), &text)?;
        }
        Command::Xcorr { alice, bob, blocks, threshold, out } => {
            let s = read_string(&alice)?;
            let bob = formats::ternary_from_csv(&read_text(&bob)?)?;
            let reference = AliceReference::new(s.symbols(), blocks.unwrap_or(s.params().blocks))?;
            let r = find_offset(&reference, &bob, threshold)?;
            emit(out.as_deref(), &format!("{}\n{}\n", formats::OFFSET_HEADER, formats::offset_row(&r)))?;
        }
        Command::Sync { alice, input, truth, settings, out, windows } => {
            let config = settings.load(seed)?;
            let cfg = config.sync()?;
            let s = read_string(&alice)?;
            let reference = AliceReference::from_sync_string(&s)?;
            let (arrivals, outcomes) = read_arrivals(&input, config.get_or("resolution", 0.0)?)?;
            let truth = match truth {
                Some(path) => Some(formats::truth_from_csv(&read_text(&path)?)?),
                None => None,
            };
            let sync_input = SyncInput { arrivals: &arrivals, outcomes: &outcomes, truth: truth.as_deref() };
            let (report, failure) = match run_sync(&cfg, &reference, sync_input) {
                Ok(r) => (r, None),
                Err(SyncError::Failed { cause, report }) => (*report, Some(cause)),
                Err(e) => return Err(e.into()),
            };
            if let Some(path) = &out {
                fs::write(path, formats::alignment_csv(arrivals.timestamps(), &report.absolute_index))?;
            }
            if let Some(path) = &windows {
                fs::write(path, formats::windows_csv(&report.windows))?;
            }
            println!("synchronized,{}", report.synchronized);
            println!("windows,{}", report.windows.len());
            if let Some(o) = &report.offset {
                println!("{}", formats::OFFSET_HEADER);
                println!("{}", formats::offset_row(o));
            }
            if let Some(a) = report.alignment_accuracy {
                println!("alignment_accuracy,{a}");
            }
            if let Some(cause) = failure {
                eprintln!("sync failed: {cause}");
                return Ok(ExitCode::from(2));
            }
        }
        Command::Sweep { qber, bits, reps, settings, out } => {
            let config = settings.load(seed)?;
            let clock = config.clock()?;
            let params = config.string_params()?;
            let grid = SweepGrid {
                background_rate: config.get_or("background_rate", 200.0)?,
                len: params.len,
                blocks: params.blocks,
                lambda: params.lambda,
                tau_a: clock.tau_a,
                sigma: clock.jitter_sigma,
                fractional_offset: clock.fractional_offset,
                seed: seed.unwrap_or(0),
                ..SweepGrid::new(qber, bits, reps)
            };
            emit(out.as_deref(), &sweep_csv(&run_sweep(&grid)?))?;
        }
        Command::Bench { lens, blocks, out } => {
            let policy = match blocks.as_str() {
                "log2" => BlockPolicy::Log2,
                n => match n.parse() {
                    Ok(n) if n > 0 => BlockPolicy::Fixed(n),
                    _ => bail!("--N1 must be a positive integer or log2, got {n:?}"),
                },
            };
            emit(out.as_deref(), &bench_csv(&run_bench(&lens, policy, seed.unwrap_or(0))?))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
