//! Train LSTM, M-LSTM and PM-LSTM on the synthetic regression task and
//! write the run directory.
//!
//!     cargo run --release --example synthetic_experiment -- [sequences] [repeats] [out-dir]
//!
//! Defaults to the full 25600 sequences with one repeat (a few minutes);
//! pass `25600 5` for five repeats or a smaller count for a quick look.

use std::path::PathBuf;

use mrnn::experiment::{compare, run_experiment, write_outputs, ExperimentConfig, Task};
use mrnn::Result;

fn main() -> Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: usize| args.get(i).and_then(|a| a.parse().ok()).unwrap_or(default);
    let config = ExperimentConfig {
        task: Task::Synthetic,
        sequences: arg(0, 25_600),
        repeats: arg(1, 1),
        out: Some(args.get(2).map(PathBuf::from).unwrap_or_else(|| "runs/synthetic".into())),
        ..ExperimentConfig::default()
    };

    let reports = run_experiment(&config)?;
    print!("{}", compare(&reports)?.to_text());
    for r in &reports {
        let (before, after) = r.mean_metric_change();
        print!("{:<8} {:>6.1}s  mae {before:.4} -> {after:.4}", r.label, r.wall_clock_seconds);
        if let Some((d0, d1)) = r.mean_dispersion() {
            print!("  dispersion {d0:.3} -> {d1:.3}");
        }
        println!();
    }
    let dir = config.out.as_deref().expect("set above");
    let files = write_outputs(&reports, dir)?;
    println!("{} files in {}", files.len(), dir.display());
    Ok(())
}
