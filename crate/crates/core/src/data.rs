//! Datasets: the multi-cycle synthetic generator, hourly time-series
//! windowing and whitespace-tokenized corpora.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use chrono::{Duration, NaiveDateTime, Timelike};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Per-step inputs of one sequence.
#[derive(Clone, Debug, PartialEq)]
pub enum StepInputs {
    /// `len` steps of `width` reals, stored row-major.
    Dense { width: usize, values: Vec<f64> },
    Tokens(Vec<usize>),
}

impl StepInputs {
    pub fn len(&self) -> usize {
        match self {
            StepInputs::Dense { width, values } => values.len() / width,
            StepInputs::Tokens(t) => t.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dense_step(&self, t: usize) -> Option<&[f64]> {
        match self {
            StepInputs::Dense { width, values } => values.get(t * width..(t + 1) * width),
            StepInputs::Tokens(_) => None,
        }
    }

    pub fn dense_steps(&self) -> Vec<Vec<f64>> {
        (0..self.len())
            .filter_map(|t| self.dense_step(t).map(<[f64]>::to_vec))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Target {
    /// Final-value regression.
    Scalar(f64),
    /// Next-token ids, one per input step.
    Tokens(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SequenceSample {
    pub inputs: StepInputs,
    pub target: Target,
    /// 1-based prior-knowledge label.
    pub bucket: usize,
}

/// `s_ij = ((i + j) mod 3) * sin((i + j) / ((i mod 3) + 1))`, 1-based.
pub fn synthetic_value(i: usize, j: usize) -> f64 {
    let k = (i + j) as f64;
    ((i + j) % 3) as f64 * (k / ((i % 3) + 1) as f64).sin()
}

/// `count` sequences of `length` values; the first `length - 1` are inputs
/// and the last is the target. Sequence `i` belongs to bucket `(i mod 3) + 1`.
pub fn generate_synthetic(count: usize, length: usize) -> Result<Vec<SequenceSample>> {
    if count == 0 {
        return Err(Error::Config {
            field: "synthetic count".into(),
            reason: "need at least one sequence".into(),
        });
    }
    if length < 2 {
        return Err(Error::Config {
            field: "synthetic length".into(),
            reason: "need at least two steps".into(),
        });
    }
    Ok((1..=count)
        .map(|i| SequenceSample {
            inputs: StepInputs::Dense {
                width: 1,
                values: (1..length).map(|j| synthetic_value(i, j)).collect(),
            },
            target: Target::Scalar(synthetic_value(i, length)),
            bucket: (i % 3) + 1,
        })
        .collect())
}

/// Seeded split; the first returned half (rounded down) is the test set.
pub fn split_half<T: Clone>(samples: &[T], seed: u64) -> (Vec<T>, Vec<T>) {
    split_fraction(samples, 0.5, seed)
}

/// Seeded split returning `(held_out, rest)` with
/// `floor(len * fraction)` held-out items.
pub fn split_fraction<T: Clone>(samples: &[T], fraction: f64, seed: u64) -> (Vec<T>, Vec<T>) {
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = (samples.len() as f64 * fraction).floor() as usize;
    let pick = |idx: &[usize]| idx.iter().map(|&i| samples[i].clone()).collect::<Vec<_>>();
    (pick(&order[..cut]), pick(&order[cut..]))
}

/// Write sequences as `seq-id,bucket-id,step-index,value` rows; the target
/// is the last step of each sequence.
pub fn write_dataset_dump<W: Write>(samples: &[SequenceSample], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["seq-id", "bucket-id", "step-index", "value"])?;
    for (id, s) in samples.iter().enumerate() {
        let (StepInputs::Dense { width: 1, values }, Target::Scalar(y)) = (&s.inputs, &s.target) else {
            return Err(Error::Data("dataset dumps hold scalar sequences only".into()));
        };
        for (step, v) in values.iter().chain(std::iter::once(y)).enumerate() {
            w.write_record([
                (id + 1).to_string(),
                s.bucket.to_string(),
                (step + 1).to_string(),
                v.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<dump>", e))?;
    Ok(())
}

/// Inverse of [`write_dataset_dump`].
pub fn read_dataset_dump<R: Read>(input: R) -> Result<Vec<SequenceSample>> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut seqs: Vec<(usize, usize, Vec<f64>)> = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = row as u64 + 2;
        let bad = |reason: &str| Error::MalformedRow {
            path: "<dump>".into(),
            line,
            reason: reason.into(),
        };
        if rec.len() != 4 {
            return Err(bad("expected 4 columns"));
        }
        let id: usize = rec[0].parse().map_err(|_| bad("seq-id"))?;
        let bucket: usize = rec[1].parse().map_err(|_| bad("bucket-id"))?;
        let step: usize = rec[2].parse().map_err(|_| bad("step-index"))?;
        let value: f64 = rec[3].parse().map_err(|_| bad("value"))?;
        match seqs.last_mut() {
            Some((last, b, vals)) if *last == id => {
                if *b != bucket || step != vals.len() + 1 {
                    return Err(bad("steps out of order"));
                }
                vals.push(value);
            }
            _ => {
                if step != 1 {
                    return Err(bad("sequence must start at step 1"));
                }
                seqs.push((id, bucket, vec![value]));
            }
        }
    }
    seqs.into_iter()
        .map(|(id, bucket, mut vals)| {
            if vals.len() < 2 {
                return Err(Error::Data(format!("sequence {id} has fewer than two steps")));
            }
            let y = vals.pop().expect("non-empty");
            Ok(SequenceSample {
                inputs: StepInputs::Dense { width: 1, values: vals },
                target: Target::Scalar(y),
                bucket,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Hourly time series

pub const HIGH_CONSUMPTION_BUCKET: usize = 1;
pub const LOW_CONSUMPTION_BUCKET: usize = 2;

/// High-consumption hours are 7:00-13:00 and 18:00-22:00 inclusive.
pub fn consumption_bucket(hour: u32) -> usize {
    if (7..=13).contains(&hour) || (18..=22).contains(&hour) {
        HIGH_CONSUMPTION_BUCKET
    } else {
        LOW_CONSUMPTION_BUCKET
    }
}

/// Contiguous hourly values starting at `start`.
#[derive(Clone, Debug, PartialEq)]
pub struct HourlySeries {
    pub start: NaiveDateTime,
    pub values: Vec<f64>,
}

impl HourlySeries {
    pub fn time(&self, index: usize) -> NaiveDateTime {
        self.start + Duration::hours(index as i64)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct IngestWarnings {
    /// Values forward-filled because they were blank, `?` or non-finite.
    pub filled_values: usize,
    /// Whole hours forward-filled because their row was absent.
    pub filled_hours: usize,
}

fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    const FORMATS: [&str; 4] = [
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ];
    FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s.trim(), f).ok())
}

/// Read a `timestamp,value` CSV (header required, one row per hour).
pub fn read_hourly_csv<R: Read>(input: R, path: &str) -> Result<(HourlySeries, IngestWarnings)> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim().eq_ignore_ascii_case(name));
    let (Some(ts_col), Some(val_col)) = (col("timestamp"), col("value")) else {
        return Err(Error::MalformedRow {
            path: path.into(),
            line: 1,
            reason: "header must name `timestamp` and `value` columns".into(),
        });
    };
    let mut warnings = IngestWarnings::default();
    let mut start: Option<NaiveDateTime> = None;
    let mut values: Vec<f64> = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let line = row as u64 + 2;
        let rec = rec?;
        let bad = |reason: String| Error::MalformedRow {
            path: path.into(),
            line,
            reason,
        };
        let ts_text = rec.get(ts_col).ok_or_else(|| bad("missing timestamp".into()))?;
        let ts = parse_timestamp(ts_text).ok_or_else(|| bad(format!("bad timestamp `{ts_text}`")))?;
        if ts.minute() != 0 || ts.second() != 0 {
            return Err(bad(format!("timestamp `{ts_text}` is not on the hour")));
        }
        let raw = rec.get(val_col).unwrap_or("").trim();
        let value = match raw {
            "" | "?" => None,
            text => {
                let v: f64 = text.parse().map_err(|_| bad(format!("bad value `{text}`")))?;
                v.is_finite().then_some(v)
            }
        };
        let index = match start {
            None => {
                start = Some(ts);
                0
            }
            Some(s) => {
                let hours = (ts - s).num_hours();
                if hours < values.len() as i64 {
                    return Err(bad(format!("timestamp `{ts_text}` is not increasing")));
                }
                hours as usize
            }
        };
        while values.len() < index {
            let last = *values.last().expect("gap after first row");
            values.push(last);
            warnings.filled_hours += 1;
        }
        match (value, values.last()) {
            (Some(v), _) => values.push(v),
            (None, Some(&last)) => {
                values.push(last);
                warnings.filled_values += 1;
            }
            (None, None) => return Err(bad("first row has no value to forward-fill from".into())),
        }
    }
    let start = start.ok_or_else(|| Error::Data(format!("{path}: no rows")))?;
    Ok((HourlySeries { start, values }, warnings))
}

/// One windowed sample per target hour.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowedSeries {
    pub samples: Vec<SequenceSample>,
    /// Target hour of each sample.
    pub target_times: Vec<NaiveDateTime>,
    /// Target hours skipped for lack of history.
    pub skipped: usize,
}

/// For each target hour `T`, a `history_days`-step sequence whose step `k`
/// holds the values at the three hours centred on the same hour of one of
/// the preceding days (oldest first); the target is the value at `T`.
pub fn window_timeseries(series: &HourlySeries, history_days: usize) -> Result<WindowedSeries> {
    if history_days == 0 {
        return Err(Error::Config {
            field: "history-days".into(),
            reason: "must be at least 1".into(),
        });
    }
    let first_target = 24 * history_days + 1;
    if series.values.len() <= first_target {
        return Err(Error::Data(format!(
            "series of {} hours is too short for a {history_days}-day window",
            series.values.len()
        )));
    }
    let v = &series.values;
    let mut out = WindowedSeries {
        samples: Vec::new(),
        target_times: Vec::new(),
        skipped: first_target,
    };
    for t in first_target..v.len() {
        let mut steps = Vec::with_capacity(3 * history_days);
        for back in (1..=history_days).rev() {
            let centre = t - 24 * back;
            steps.extend_from_slice(&v[centre - 1..=centre + 1]);
        }
        let time = series.time(t);
        out.samples.push(SequenceSample {
            inputs: StepInputs::Dense { width: 3, values: steps },
            target: Target::Scalar(v[t]),
            bucket: consumption_bucket(time.hour()),
        });
        out.target_times.push(time);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Corpora

pub const UNKNOWN_TOKEN: &str = "<unk>";

/// Most-frequent-first vocabulary. The last id is reserved for
/// [`UNKNOWN_TOKEN`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    ids: HashMap<String, usize>,
    tokens: Vec<String>,
}

impl Vocabulary {
    /// Keep the `size - 1` most frequent tokens (ties broken
    /// lexicographically) and append the unknown token.
    pub fn build<'a>(tokens: impl IntoIterator<Item = &'a str>, size: usize) -> Result<Self> {
        if size < 2 {
            return Err(Error::Config {
                field: "vocab-size".into(),
                reason: "must be at least 2".into(),
            });
        }
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for t in tokens {
            *counts.entry(t).or_default() += 1;
        }
        if counts.is_empty() {
            return Err(Error::Data("empty corpus".into()));
        }
        let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
        // BTreeMap order is lexicographic; the stable sort keeps it for ties.
        ranked.sort_by(|a, b| b.1.cmp(&a.1));
        let mut tokens: Vec<String> = ranked
            .into_iter()
            .filter(|(t, _)| *t != UNKNOWN_TOKEN)
            .take(size - 1)
            .map(|(t, _)| t.to_string())
            .collect();
        tokens.push(UNKNOWN_TOKEN.to_string());
        let ids = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Ok(Vocabulary { ids, tokens })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn unknown_id(&self) -> usize {
        self.tokens.len() - 1
    }

    pub fn id(&self, token: &str) -> usize {
        self.ids.get(token).copied().unwrap_or(self.unknown_id())
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn encode(&self, text: &str) -> Vec<usize> {
        text.split_whitespace().map(|t| self.id(t)).collect()
    }

    pub fn decode(&self, ids: &[usize]) -> Vec<&str> {
        ids.iter().filter_map(|&i| self.token(i)).collect()
    }
}

/// A labelled document: `(group label, text)`.
pub type Document = (String, String);

/// Tokenized corpus with group labels mapped to 1-based bucket ids in
/// lexicographic label order.
#[derive(Clone, Debug)]
pub struct TokenizedCorpus {
    pub vocabulary: Vocabulary,
    pub groups: Vec<String>,
    pub samples: Vec<SequenceSample>,
}

impl TokenizedCorpus {
    /// Encode further documents with this corpus's vocabulary and groups.
    pub fn encode(&self, documents: &[Document]) -> Result<Vec<SequenceSample>> {
        encode_documents(&self.vocabulary, &self.groups, documents)
    }
}

fn encode_documents(vocabulary: &Vocabulary, groups: &[String], documents: &[Document]) -> Result<Vec<SequenceSample>> {
    let mut samples = Vec::new();
    for (group, text) in documents {
        let bucket = groups
            .binary_search(group)
            .map_err(|_| Error::Data(format!("unknown group `{group}`")))?
            + 1;
        let ids = vocabulary.encode(text);
        if ids.len() >= 2 {
            samples.push(SequenceSample {
                inputs: StepInputs::Tokens(ids[..ids.len() - 1].to_vec()),
                target: Target::Tokens(ids[1..].to_vec()),
                bucket,
            });
        }
    }
    Ok(samples)
}

/// Documents with fewer than two tokens yield no sample.
pub fn tokenize_corpus(documents: &[Document], vocab_size: usize) -> Result<TokenizedCorpus> {
    if documents.is_empty() {
        return Err(Error::Data("empty corpus".into()));
    }
    let vocabulary = Vocabulary::build(
        documents.iter().flat_map(|(_, text)| text.split_whitespace()),
        vocab_size,
    )?;
    let mut groups: Vec<String> = documents.iter().map(|(g, _)| g.clone()).collect();
    groups.sort();
    groups.dedup();
    let samples = encode_documents(&vocabulary, &groups, documents)?;
    Ok(TokenizedCorpus {
        vocabulary,
        groups,
        samples,
    })
}

/// Parse `group-label<TAB>text` lines; blank lines are ignored.
pub fn read_corpus<R: Read>(input: R, path: &str) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let (label, text) = line.split_once('\t').ok_or_else(|| Error::MalformedRow {
            path: path.into(),
            line: i as u64 + 1,
            reason: "expected `group<TAB>text`".into(),
        })?;
        docs.push((label.trim().to_string(), text.to_string()));
    }
    Ok(docs)
}

pub fn read_corpus_file(path: &Path) -> Result<Vec<Document>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_corpus(f, &path.display().to_string())
}

/// The category-tagged toy corpus shipped with the crate.
pub fn bundled_corpus() -> Vec<Document> {
    read_corpus(TOY_CORPUS.as_bytes(), "toy_corpus.tsv").expect("bundled corpus parses")
}

pub const TOY_CORPUS: &str = include_str!("../data/toy_corpus.tsv");

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn synthetic_golden_values() {
        assert_eq!(synthetic_value(3, 3), 0.0);
        assert!((synthetic_value(1, 1) - 2.0 * 1f64.sin()).abs() < 1e-15);
        assert!((synthetic_value(1, 1) - 1.68294).abs() < 1e-5);
    }

    #[test]
    fn synthetic_shapes_and_buckets() {
        let data = generate_synthetic(10, 5).unwrap();
        assert_eq!(data.len(), 10);
        assert!(data.iter().all(|s| s.inputs.len() == 4));
        assert_eq!(data[0].bucket, 2);
        assert_eq!(data[2].bucket, 1);
        let Target::Scalar(y) = data[0].target else { panic!() };
        assert_eq!(y, synthetic_value(1, 5));
        assert!(generate_synthetic(0, 5).is_err());
        assert!(generate_synthetic(5, 1).is_err());
    }

    #[test]
    fn paper_scale_lengths() {
        let data = generate_synthetic(25_600, 128).unwrap();
        assert_eq!(data.len(), 25_600);
        assert!(data.iter().all(|s| s.inputs.len() == 127));
        let (test, train) = split_half(&data, 7);
        assert_eq!((test.len(), train.len()), (12_800, 12_800));
    }

    #[test]
    fn split_is_seeded() {
        let data: Vec<u32> = (0..100).collect();
        assert_eq!(split_half(&data, 3), split_half(&data, 3));
        assert_ne!(split_half(&data, 3), split_half(&data, 4));
        let (a, b) = split_half(&data, 3);
        let mut all = [a, b].concat();
        all.sort();
        assert_eq!(all, data);
    }

    #[test]
    fn dump_roundtrip() {
        let data = generate_synthetic(7, 6).unwrap();
        let mut buf = Vec::new();
        write_dataset_dump(&data, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("seq-id,bucket-id,step-index,value\n1,2,1,"));
        assert_eq!(read_dataset_dump(&buf[..]).unwrap(), data);
    }

    #[test]
    fn bucket_rule() {
        assert_eq!(consumption_bucket(8), HIGH_CONSUMPTION_BUCKET);
        assert_eq!(consumption_bucket(3), LOW_CONSUMPTION_BUCKET);
        assert_eq!(consumption_bucket(13), HIGH_CONSUMPTION_BUCKET);
        assert_eq!(consumption_bucket(14), LOW_CONSUMPTION_BUCKET);
        assert_eq!(consumption_bucket(22), HIGH_CONSUMPTION_BUCKET);
        assert_eq!(consumption_bucket(23), LOW_CONSUMPTION_BUCKET);
    }

    fn hourly_csv(hours: usize, value: impl Fn(usize) -> String) -> String {
        let start = NaiveDateTime::parse_from_str("2007-04-08 00:00:00", "%Y-%m-%d %H:%M:%S").unwrap();
        let mut s = String::from("timestamp,value\n");
        for h in 0..hours {
            let t = start + Duration::hours(h as i64);
            s.push_str(&format!("{},{}\n", t.format("%Y-%m-%dT%H:%M:%S"), value(h)));
        }
        s
    }

    #[test]
    fn constant_series_windows() {
        let csv = hourly_csv(24 * 60, |_| "1.25".into());
        let (series, warn) = read_hourly_csv(csv.as_bytes(), "t.csv").unwrap();
        assert_eq!(warn, IngestWarnings::default());
        let w = window_timeseries(&series, 56).unwrap();
        assert_eq!(w.skipped, 24 * 56 + 1);
        assert_eq!(w.samples.len(), 24 * 60 - w.skipped);
        for s in &w.samples {
            assert_eq!(s.inputs.len(), 56);
            let StepInputs::Dense { width: 3, values } = &s.inputs else { panic!() };
            assert!(values.iter().all(|&v| v == 1.25));
            assert_eq!(s.target, Target::Scalar(1.25));
        }
    }

    #[test]
    fn window_layout() {
        let csv = hourly_csv(24 * 3 + 5, |h| h.to_string());
        let (series, _) = read_hourly_csv(csv.as_bytes(), "t.csv").unwrap();
        let w = window_timeseries(&series, 2).unwrap();
        // first target index is 49 (2007-04-10 01:00)
        let s = &w.samples[0];
        assert_eq!(s.target, Target::Scalar(49.0));
        assert_eq!(s.inputs.dense_step(0).unwrap(), &[0.0, 1.0, 2.0]);
        assert_eq!(s.inputs.dense_step(1).unwrap(), &[24.0, 25.0, 26.0]);
        assert_eq!(s.bucket, LOW_CONSUMPTION_BUCKET);
        assert_eq!(w.target_times[7].hour(), 8);
        assert_eq!(w.samples[7].bucket, HIGH_CONSUMPTION_BUCKET);
    }

    #[test]
    fn ingestion_fills_and_errors() {
        let text = "timestamp,value\n2010-01-01 00:00,1\n2010-01-01 01:00,?\n2010-01-01 03:00,4\n";
        let (s, w) = read_hourly_csv(text.as_bytes(), "x.csv").unwrap();
        assert_eq!(s.values, vec![1.0, 1.0, 1.0, 4.0]);
        assert_eq!(w, IngestWarnings { filled_values: 1, filled_hours: 1 });

        let text = "timestamp,value\n2010-01-01 00:00,1\n2010-01-01 01:00,abc\n";
        let err = read_hourly_csv(text.as_bytes(), "x.csv").unwrap_err();
        assert!(matches!(err, Error::MalformedRow { line: 3, .. }), "{err}");

        let text = "timestamp,value\nyesterday,1\n";
        assert!(matches!(
            read_hourly_csv(text.as_bytes(), "x.csv"),
            Err(Error::MalformedRow { line: 2, .. })
        ));
        let text = "time,v\n2010-01-01 00:00,1\n";
        assert!(read_hourly_csv(text.as_bytes(), "x.csv").is_err());

        let short = hourly_csv(24 * 3, |_| "1".into());
        let (s, _) = read_hourly_csv(short.as_bytes(), "x.csv").unwrap();
        assert!(window_timeseries(&s, 56).is_err());
    }

    #[test]
    fn vocabulary_examples() {
        let docs = vec![("g".to_string(), "a b a".to_string())];
        let c = tokenize_corpus(&docs, 2).unwrap();
        assert_eq!(c.vocabulary.id("a"), 0);
        assert_eq!(c.vocabulary.id("b"), 1);
        assert_eq!(c.samples[0].inputs, StepInputs::Tokens(vec![0, 1]));
        assert_eq!(c.samples[0].target, Target::Tokens(vec![1, 0]));

        let docs = vec![("g".to_string(), "y x y x z z z w".to_string())];
        let c = tokenize_corpus(&docs, 3).unwrap();
        assert_eq!(c.vocabulary.id("z"), 0);
        assert_eq!(c.vocabulary.id("x"), 1);
        assert_eq!(c.vocabulary.id("y"), c.vocabulary.unknown_id());
        assert_eq!(c.vocabulary.id("w"), c.vocabulary.unknown_id());

        assert!(tokenize_corpus(&[], 10).is_err());
        assert!(tokenize_corpus(&docs, 1).is_err());
    }

    #[test]
    fn groups_become_buckets() {
        let docs = vec![
            ("sports".to_string(), "ball game".to_string()),
            ("arts".to_string(), "paint brush".to_string()),
            ("sports".to_string(), "goal net".to_string()),
        ];
        let c = tokenize_corpus(&docs, 100).unwrap();
        assert_eq!(c.groups, vec!["arts", "sports"]);
        let buckets: Vec<usize> = c.samples.iter().map(|s| s.bucket).collect();
        assert_eq!(buckets, vec![2, 1, 2]);
    }

    #[test]
    fn corpus_format() {
        let text = "a\tone two\n\nb\tthree\n";
        let docs = read_corpus(text.as_bytes(), "c.tsv").unwrap();
        assert_eq!(docs, vec![("a".into(), "one two".into()), ("b".into(), "three".into())]);
        assert!(matches!(
            read_corpus("no tab here\n".as_bytes(), "c.tsv"),
            Err(Error::MalformedRow { line: 1, .. })
        ));
    }

    #[test]
    fn bundled_corpus_has_groups() {
        let docs = bundled_corpus();
        let mut groups: Vec<&str> = docs.iter().map(|(g, _)| g.as_str()).collect();
        groups.sort();
        groups.dedup();
        assert!(groups.len() >= 3);
    }

    proptest! {
        #[test]
        fn synthetic_bounded(i in 1usize..100_000, j in 1usize..500) {
            prop_assert!(synthetic_value(i, j).abs() <= 2.0);
        }

        #[test]
        fn bucket_counts_balanced(n in 1usize..300) {
            let data = generate_synthetic(n, 3).unwrap();
            let mut counts = [0usize; 3];
            for s in &data {
                counts[s.bucket - 1] += 1;
            }
            let max = *counts.iter().max().unwrap();
            let min = *counts.iter().min().unwrap();
            prop_assert!(max - min <= 1);
            if n >= 3 {
                prop_assert!(min > 0);
            }
        }

        #[test]
        fn in_vocabulary_roundtrip(words in proptest::collection::vec("[a-e]{1,3}", 1..30)) {
            let text = words.join(" ");
            let vocab = Vocabulary::build(text.split_whitespace(), 1000).unwrap();
            let ids = vocab.encode(&text);
            prop_assert_eq!(vocab.decode(&ids), words.iter().map(String::as_str).collect::<Vec<_>>());
        }
    }
}
