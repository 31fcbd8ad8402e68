use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mrnn::cells::CellKind;
use mrnn::checkpoint::load_checkpoint;
use mrnn::data::{generate_synthetic, write_dataset_dump, TOY_CORPUS};
use mrnn::experiment::{
    build_dataset, compare, read_reports, run_experiment, write_outputs, ExperimentConfig, MixtureMode, Task,
};
use mrnn::{Error, Result};

#[derive(Parser)]
#[command(name = "mrnn", version, about = "Mixture-augmented recurrent networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a dataset file to the output directory.
    GenerateData(Flags),
    /// Train every configured variant and write reports.
    Train(Flags),
    /// Score a checkpoint on the configured test split.
    Evaluate {
        checkpoint: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
    /// Tabulate one or more `runs.json` files (or run directories).
    Compare {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rewrite the report files of a finished run directory.
    Report { run: PathBuf },
}

#[derive(Args, Clone, Default)]
struct Flags {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    model: Option<String>,
    /// Comma-separated variants: none, single, bucketed.
    #[arg(long, value_delimiter = ',')]
    mixture: Option<Vec<String>>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    lr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
}

impl Flags {
    /// Config file (if any) with flags layered on top.
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(t) = &self.task {
            c.task = t.parse()?;
        }
        if let Some(m) = &self.model {
            c.model = m.parse::<CellKind>()?;
        }
        if let Some(ms) = &self.mixture {
            c.mixture = ms.iter().map(|m| m.parse::<MixtureMode>()).collect::<Result<_>>()?;
        }
        macro_rules! set {
            ($($f:ident => $dst:ident),*) => {$(
                if let Some(v) = self.$f.clone() {
                    c.$dst = v;
                }
            )*};
        }
        set!(hidden => hidden, m => m, n => n, epochs => epochs, batch => batch, lr => lr, seed => seed, repeats => repeats);
        if self.out.is_some() {
            c.out = self.out.clone();
        }
        if self.data.is_some() {
            c.data = self.data.clone();
        }
        c.validate()?;
        Ok(c)
    }
}

fn out_dir(c: &ExperimentConfig) -> PathBuf {
    c.out.clone().unwrap_or_else(|| PathBuf::from("runs"))
}

fn reports_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join("runs.json")
    } else {
        p.to_path_buf()
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenerateData(flags) => {
            let c = flags.resolve()?;
            let dir = out_dir(&c);
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            let path = match c.task {
                Task::Synthetic => {
                    let path = dir.join("synthetic.csv");
                    let f = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
                    write_dataset_dump(&generate_synthetic(c.sequences, c.length)?, std::io::BufWriter::new(f))?;
                    path
                }
                Task::LanguageModel => {
                    let path = dir.join("toy_corpus.tsv");
                    std::fs::write(&path, TOY_CORPUS).map_err(|e| Error::io(&path, e))?;
                    path
                }
                Task::TimeseriesCsv => {
                    return Err(Error::Config {
                        field: "task".into(),
                        reason: "time series are read from --data, not generated".into(),
                    })
                }
            };
            println!("{}", path.display());
        }
        Command::Train(flags) => {
            let c = flags.resolve()?;
            let reports = run_experiment(&c)?;
            let files = write_outputs(&reports, &out_dir(&c))?;
            print!("{}", compare(&reports)?.to_text());
            for r in &reports {
                eprintln!("{}: {:.1}s", r.label, r.wall_clock_seconds);
            }
            eprintln!("wrote {} files to {}", files.len(), out_dir(&c).display());
        }
        Command::Evaluate { checkpoint, flags } => {
            let c = flags.resolve()?;
            let model = load_checkpoint(&checkpoint)?;
            let data = build_dataset(&c)?;
            let value = model.evaluate(&data.test, c.metric())?;
            println!("{} {value}", c.metric().name());
        }
        Command::Compare { runs, out } => {
            let mut all = Vec::new();
            for p in &runs {
                all.extend(read_reports(&reports_path(p))?);
            }
            let table = compare(&all)?;
            print!("{}", table.to_text());
            if let Some(path) = out {
                std::fs::write(&path, table.to_csv()?).map_err(|e| Error::io(&path, e))?;
            }
        }
        Command::Report { run } => {
            let reports = read_reports(&reports_path(&run))?;
            let dir = if run.is_dir() { run } else { run.parent().map(Path::to_path_buf).unwrap_or_default() };
            let mut reports = reports;
            // Checkpoints are left as written by `train`.
            for r in &mut reports {
                r.config.checkpoints = false;
            }
            write_outputs(&reports, &dir)?;
            print!("{}", compare(&reports)?.to_text());
            for r in &reports {
                if let Some((a, b)) = r.mean_dispersion() {
                    println!("{}: dispersion {a:.4} -> {b:.4}", r.label);
                }
            }
        }
    }
    Ok(())
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
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
