//! Word-level language models on the bundled category-tagged corpus.
//!
//!     cargo run --release --example language_model -- [epochs] [repeats] [batch]
//!
//! Each document's group label selects the prototype matrix of PM-LSTM.

use mrnn::experiment::{build_dataset, compare, run_experiment_on, ExperimentConfig, Task};
use mrnn::Result;

fn main() -> Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: usize| args.get(i).and_then(|a| a.parse().ok()).unwrap_or(default);
    let config = ExperimentConfig {
        task: Task::LanguageModel,
        hidden: 128,
        embed: 32,
        m: 16,
        n: 10,
        epochs: arg(0, 20),
        repeats: arg(1, 1),
        batch: arg(2, 4),
        checkpoints: false,
        ..ExperimentConfig::default()
    };
    let data = build_dataset(&config)?;
    let tokens: usize = data.train.iter().map(|s| s.inputs.len()).sum();
    println!(
        "{} train documents ({tokens} tokens), {} test, vocabulary {}, {} groups",
        data.train.len(),
        data.test.len(),
        data.vocab.unwrap_or(0),
        data.buckets
    );

    let reports = run_experiment_on(&config, &data)?;
    for r in &reports {
        let curve: Vec<String> = r
            .rows
            .iter()
            .filter(|row| row.repeat == 1)
            .filter_map(|row| row.report.eval_metric)
            .map(|p| format!("{p:.1}"))
            .collect();
        println!("{:<8} {:>6.1}s  {}", r.label, r.wall_clock_seconds, curve.join(" "));
    }
    print!("{}", compare(&reports)?.to_text());
    Ok(())
}
