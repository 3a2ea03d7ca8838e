use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;

use aircomp_cli::config::{parse_methods, ExperimentConfig, Preset};
use aircomp_cli::harness::{self, SweepVariable};
use aircomp_core::SensorData;
use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

/// Multi-function over-the-air computation simulator.
#[derive(Parser)]
#[command(name = "aircomp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// MSE against the number of functions L.
    SweepL(RunArgs),
    /// MSE against the receive array size N_r.
    SweepNr(RunArgs),
    /// MSE against the number of sensors K.
    SweepK(RunArgs),
    /// Centroid multicast vs ADMM-SDR with single-antenna sensors.
    DualityBench(RunArgs),
    /// Both feedback phases on one channel draw.
    FeedbackDemo {
        #[command(flatten)]
        run: RunArgs,
        /// Also write the per-round protocol transcript here.
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
    /// Sensor data through preprocessing, the channel and postprocessing.
    E2e {
        #[command(flatten)]
        run: RunArgs,
        /// Sensor CSV: header of function tags, one row per sensor.
        #[arg(long)]
        data: Option<PathBuf>,
    },
}

/// Precedence: preset, then config file, then flags.
#[derive(Args)]
struct RunArgs {
    /// Flat `key = value` file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated: centroid, antenna-selection, eigenmode.
    #[arg(long)]
    methods: Option<String>,
    /// Comma-separated sweep values.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    draws: Option<usize>,
    /// Monte-Carlo symbol trials per draw.
    #[arg(long)]
    trials: Option<usize>,
    /// Record wall-clock times (output is then no longer reproducible).
    #[arg(long)]
    timing: bool,
}

impl RunArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::preset(self.preset.unwrap_or(Preset::Desk));
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        // an explicit flag wins over a preset key in the file
        if let (Some(p), Some(path)) = (self.preset, &self.config) {
            let text = std::fs::read_to_string(path)?;
            let kept: String = text
                .lines()
                .filter(|l| l.split('=').next().map(str::trim) != Some("preset"))
                .map(|l| format!("{l}\n"))
                .collect();
            cfg = ExperimentConfig::preset(p);
            cfg.apply_text(&kept)?;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(m) = &self.methods {
            cfg.methods = parse_methods(m)?;
        }
        if let Some(g) = &self.grid {
            cfg.grid = Some(aircomp_cli::config::parse_grid(g)?);
        }
        if let Some(d) = self.draws {
            cfg.draws = d;
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        cfg.timing |= self.timing;
        cfg.validate()?;
        Ok(cfg)
    }

    fn output(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(p) => Box::new(BufWriter::new(
                File::create(p).with_context(|| format!("creating {}", p.display()))?,
            )),
            None => Box::new(BufWriter::new(std::io::stdout().lock())),
        })
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::SweepL(a) => sweep(&a, SweepVariable::L),
        Command::SweepNr(a) => sweep(&a, SweepVariable::Nr),
        Command::SweepK(a) => sweep(&a, SweepVariable::K),
        Command::DualityBench(a) => {
            let rows = harness::run_duality_bench(&a.config()?)?;
            let mut w = a.output()?;
            harness::write_rows(&mut w, &rows)?;
            Ok(w.flush()?)
        }
        Command::FeedbackDemo { run, transcript } => {
            let cfg = run.config()?;
            let report = harness::run_feedback_demo(&cfg)?;
            let mut w = run.output()?;
            harness::write_feedback_report(&mut w, &report, cfg.seed)?;
            w.flush()?;
            if let Some(path) = transcript {
                let mut t =
                    BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
                aircomp_core::feedback::write_transcript_rows(&mut t, &report.transcript)?;
                t.flush()?;
            }
            Ok(())
        }
        Command::E2e { run, data } => {
            let cfg = run.config()?;
            let data = match data {
                Some(p) => {
                    let f = File::open(&p).with_context(|| format!("opening {}", p.display()))?;
                    Some(SensorData::read_csv(BufReader::new(f))?)
                }
                None => None,
            };
            let (funcs, result) = harness::run_e2e(&cfg, data)?;
            let mut w = run.output()?;
            harness::write_e2e(&mut w, &funcs, &result)?;
            Ok(w.flush()?)
        }
    }
}

fn sweep(a: &RunArgs, var: SweepVariable) -> Result<()> {
    let rows = harness::run_sweep(&a.config()?, var)?;
    let mut w = a.output()?;
    harness::write_rows(&mut w, &rows)?;
    Ok(w.flush()?)
}
