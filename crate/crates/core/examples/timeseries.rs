//! Hourly consumption forecasting: ingest a CSV with gaps, window it by
//! day, and compare the three LSTM variants by RMAE.
//!
//!     cargo run --release --example timeseries

use std::fmt::Write as _;

use chrono::{Duration, NaiveDate};
use mrnn::data::{read_hourly_csv, window_timeseries, HIGH_CONSUMPTION_BUCKET};
use mrnn::experiment::{compare, run_experiment, ExperimentConfig, Task};
use mrnn::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Three weeks of a daily load curve with noise, one dropped hour and one
/// unreadable value.
fn household_csv() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let start = NaiveDate::from_ymd_opt(2024, 3, 1).expect("valid").and_hms_opt(0, 0, 0).expect("valid");
    let mut csv = String::from("timestamp,value\n");
    for i in 0..21 * 24 {
        if i == 100 {
            continue;
        }
        let t = start + Duration::hours(i);
        let hour = (i % 24) as f64;
        let load = 1.0 + 0.8 * (-(hour - 9.0).powi(2) / 6.0).exp() + 1.1 * (-(hour - 20.0).powi(2) / 4.0).exp();
        let value = if i == 200 { "?".to_string() } else { format!("{:.3}", load + rng.gen_range(-0.1..0.1)) };
        writeln!(csv, "{},{value}", t.format("%Y-%m-%d %H:%M:%S")).expect("string");
    }
    csv
}

fn main() -> Result<()> {
    let csv = household_csv();
    let (series, warnings) = read_hourly_csv(csv.as_bytes(), "household.csv")?;
    println!(
        "{} hours from {}, filled {} missing hours and {} bad values",
        series.values.len(),
        series.start,
        warnings.filled_hours,
        warnings.filled_values
    );
    let windows = window_timeseries(&series, 7)?;
    let high = windows.samples.iter().filter(|s| s.bucket == HIGH_CONSUMPTION_BUCKET).count();
    println!(
        "{} samples of 7 steps x 3 hours ({high} in high-consumption hours), first target {}",
        windows.samples.len(),
        windows.target_times[0]
    );

    let path = std::env::temp_dir().join("mrnn-household.csv");
    std::fs::write(&path, &csv).map_err(|e| Error::io(&path, e))?;
    let config = ExperimentConfig {
        task: Task::TimeseriesCsv,
        data: Some(path),
        history_days: 7,
        test_days: 3,
        epochs: 30,
        batch: 8,
        lr: 0.01,
        repeats: 1,
        checkpoints: false,
        ..ExperimentConfig::default()
    };
    let reports = run_experiment(&config)?;
    print!("{}", compare(&reports)?.to_text());
    Ok(())
}
