//! `ocular`: synthetic data, training, detection and evaluation of the
//! iris/periocular detector.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ocular::config::{ClassSelection, RunConfig};
use ocular::data::{synth_generate, DatasetManifest, Split};
use ocular::detfile::{read_detections, write_detections};
use ocular::experiment::{compare, detect_split, load_truth, TrainedDetector};
use ocular::metrics::{evaluate, merge_single_class, EvalOptions, Interpolation};
use ocular::training::loss_history_csv;
use ocular::Error;

#[derive(Parser)]
#[command(name = "ocular", version, about = "Iris and periocular region detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Classes {
    Iris,
    Periocular,
    Both,
}

impl From<Classes> for ClassSelection {
    fn from(c: Classes) -> Self {
        match c {
            Classes::Iris => ClassSelection::Iris,
            Classes::Periocular => ClassSelection::Periocular,
            Classes::Both => ClassSelection::Both,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Val,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Val => Split::Val,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(clap::Args)]
struct EvalArgs {
    /// Confidence cut for precision, recall and F-score.
    #[arg(long, default_value_t = ocular::head::DEFAULT_CONF_THRESHOLD)]
    conf_threshold: f64,
    /// 11-point interpolated AP instead of all-point.
    #[arg(long)]
    eleven_point: bool,
}

impl EvalArgs {
    fn options(&self) -> EvalOptions {
        EvalOptions {
            conf_threshold: self.conf_threshold,
            interpolation: if self.eleven_point {
                Interpolation::ElevenPoint
            } else {
                Interpolation::AllPoint
            },
            ..EvalOptions::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic dataset and its manifest.
    Synth {
        #[arg(long)]
        count: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        size: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reassign the train/test/val split of a manifest in place.
    Split {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        seed: u64,
    },
    /// Train a detector on the training split.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum)]
        classes: Classes,
        /// key = value configuration; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        weights_out: PathBuf,
        /// Defaults to `<weights-out>.loss.csv`.
        #[arg(long)]
        loss_out: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
    /// Write detections for one split of a manifest.
    Detect {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Defaults to the `<weights>.cfg` file written by `train`.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
    },
    /// Evaluate a detection file (or two merged single-class files) on the test split.
    Eval {
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        detections2: Option<PathBuf>,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        report: PathBuf,
        /// Also write the per-class table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        eval: EvalArgs,
    },
    /// Compare simultaneous and single detection on the test split.
    Compare {
        #[arg(long)]
        multi: PathBuf,
        #[arg(long)]
        single_iris: PathBuf,
        #[arg(long)]
        single_peri: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        report: PathBuf,
        #[command(flatten)]
        eval: EvalArgs,
    },
}

fn write_text(path: &Path, text: &str) -> ocular::Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn run(command: Command) -> ocular::Result<()> {
    match command {
        Command::Synth { count, seed, size, out } => {
            let m = synth_generate(count, seed, size, &out)?;
            eprintln!("wrote {} images to {}", m.entries.len(), out.display());
        }
        Command::Split { manifest, seed } => {
            let m = DatasetManifest::read(&manifest)?.resplit(seed)?;
            m.write(&manifest)?;
        }
        Command::Train {
            manifest,
            classes,
            config,
            weights_out,
            loss_out,
            quiet,
        } => {
            let cfg = match config {
                Some(p) => RunConfig::read(p)?,
                None => RunConfig::default(),
            };
            let m = DatasetManifest::read(&manifest)?;
            let trained = ocular::experiment::train_detector(&m, classes.into(), &cfg, |epoch, loss| {
                if !quiet || !loss.is_finite() {
                    eprintln!("epoch {epoch}: mean loss {loss:.6}");
                }
            })?;
            trained.save(&weights_out)?;
            let loss_path = loss_out.unwrap_or_else(|| with_suffix(&weights_out, ".loss.csv"));
            write_text(&loss_path, &loss_history_csv(&trained.history))?;
        }
        Command::Detect {
            weights,
            manifest,
            out,
            config,
            split,
        } => {
            let detector = TrainedDetector::load(&weights, config.as_deref())?;
            let m = DatasetManifest::read(&manifest)?;
            write_detections(&out, &detect_split(&detector, &m, split.into())?)?;
        }
        Command::Eval {
            detections,
            detections2,
            manifest,
            report,
            csv,
            eval,
        } => {
            let mut dets = read_detections(&detections)?;
            if let Some(second) = detections2 {
                dets = merge_single_class(dets, read_detections(&second)?)?;
            }
            let m = DatasetManifest::read(&manifest)?;
            let truth = load_truth(&m, Split::Test)?;
            let r = evaluate(&dets, &truth, &[ocular::head::IRIS, ocular::head::PERIOCULAR], &eval.options())?;
            write_text(&report, &r.to_text())?;
            if let Some(csv) = csv {
                write_text(&csv, &r.to_csv())?;
            }
        }
        Command::Compare {
            multi,
            single_iris,
            single_peri,
            manifest,
            report,
            eval,
        } => {
            let m = DatasetManifest::read(&manifest)?;
            let truth = load_truth(&m, Split::Test)?;
            let r = compare(
                &read_detections(&multi)?,
                read_detections(&single_iris)?,
                read_detections(&single_peri)?,
                &truth,
                &eval.options(),
            )?;
            write_text(&report, &r.to_text())?;
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        e if e.is_numerical() => 3,
        Error::InvalidArgument(_) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, Error::Degenerate) {
                eprintln!("the paired IoU series are identical, so the signed-rank test has nothing to rank");
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
