//! Initialization, Adam, losses and the epoch loop.

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cells::{HeadSpec, ModelDescription};
use crate::data::{split_fraction, SequenceSample};
use crate::error::{Error, Result};
use crate::metrics::Metric;
use crate::model::Model;
use crate::tape::{log_sum_exp, Tape};
use crate::tensor::Tensor;

pub const DEFAULT_INIT_RANGE: (f64, f64) = (-0.05, 0.05);
pub const DEFAULT_LEARNING_RATE: f64 = 0.001;
pub const DEFAULT_BATCH_SIZE: usize = 32;

// Independent generator streams derived from one seed.
const INIT_STREAM: u64 = 0;
const SPLIT_STREAM: u64 = 1;
const SHUFFLE_STREAM: u64 = 2;

pub(crate) fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Freshly initialized model: i.i.d. uniform scalars on `range`, identity
/// precision factor.
pub fn init_params(desc: ModelDescription, seed: u64, range: (f64, f64)) -> Result<Model> {
    Model::init_uniform(desc, &mut rng_stream(seed, INIT_STREAM), range.0, range.1)
}

/// Adam moments and hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub t: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl OptimizerState {
    pub fn new(lengths: impl IntoIterator<Item = usize>, learning_rate: f64) -> Self {
        let m: Vec<Vec<f64>> = lengths.into_iter().map(|n| vec![0.0; n]).collect();
        OptimizerState {
            v: m.clone(),
            m,
            t: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn for_model(model: &Model, learning_rate: f64) -> Self {
        Self::new(model.named_tensors().iter().map(|(_, t)| t.len()), learning_rate)
    }
}

/// One bias-corrected Adam update.
pub fn adam_step<G: AsRef<[f64]>>(
    params: &mut [&mut Tensor],
    grads: &[G],
    opt: &mut OptimizerState,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != opt.m.len() {
        return Err(Error::shape(
            "adam",
            format!(
                "{} parameters, {} gradients, {} moment slots",
                params.len(),
                grads.len(),
                opt.m.len()
            ),
        ));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        let g = g.as_ref();
        if p.len() != g.len() || opt.m[i].len() != g.len() {
            return Err(Error::shape(
                "adam",
                format!("parameter {i}: {} values, gradient of {}", p.len(), g.len()),
            ));
        }
    }
    opt.t += 1;
    let t = opt.t as i32;
    let (b1, b2) = (opt.beta1, opt.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(opt.m.iter_mut().zip(opt.v.iter_mut())) {
        let g = g.as_ref();
        for (k, w) in p.data_mut().iter_mut().enumerate() {
            m[k] = b1 * m[k] + (1.0 - b1) * g[k];
            v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
            let mh = m[k] / c1;
            let vh = v[k] / c2;
            *w -= opt.learning_rate * mh / (vh.sqrt() + opt.epsilon);
        }
    }
    Ok(())
}

/// Mean absolute error as a training objective.
pub fn loss_l1(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    crate::metrics::mae(predictions, targets)
}

/// Mean over positions of `-log softmax(logits)[target]`.
pub fn loss_cross_entropy(logits: &[Vec<f64>], targets: &[usize]) -> Result<f64> {
    if logits.is_empty() {
        return Err(Error::Empty { op: "cross entropy" });
    }
    if logits.len() != targets.len() {
        return Err(Error::shape(
            "cross entropy",
            format!("{} positions, {} targets", logits.len(), targets.len()),
        ));
    }
    let mut total = 0.0;
    for (z, &t) in logits.iter().zip(targets) {
        if t >= z.len() {
            return Err(Error::TargetOutOfRange { id: t, vocab: z.len() });
        }
        total += log_sum_exp(z) - z[t];
    }
    Ok(total / logits.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    L1,
    CrossEntropy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub init_range: (f64, f64),
    pub learning_rate: f64,
    pub loss: LossKind,
    /// Fraction of the training data held out for per-epoch validation.
    pub validation_fraction: f64,
    /// Metric for validation and monitoring; defaults to the head's natural one.
    pub metric: Option<Metric>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: DEFAULT_BATCH_SIZE,
            seed: 0,
            init_range: DEFAULT_INIT_RANGE,
            learning_rate: DEFAULT_LEARNING_RATE,
            loss: LossKind::L1,
            validation_fraction: 0.0,
            metric: None,
        }
    }
}

fn bad(field: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        field: field.into(),
        reason: reason.into(),
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(bad("epochs", "epochs ≥ 1"));
        }
        if self.batch_size < 1 {
            return Err(bad("batch", "batch size ≥ 1"));
        }
        // A zero rate is allowed: it freezes the parameters.
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(bad("lr", "learning rate must be finite and non-negative"));
        }
        if !(self.init_range.0 < self.init_range.1) {
            return Err(bad("init-range", "need lo < hi"));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(bad("validation-fraction", "must lie in [0, 1)"));
        }
        Ok(())
    }

    fn check_against(&self, model: &Model) -> Result<()> {
        match (self.loss, model.description.head) {
            (LossKind::L1, HeadSpec::Regression { .. }) | (LossKind::CrossEntropy, HeadSpec::Classifier { .. }) => {
                Ok(())
            }
            _ => Err(bad("loss", "l1 needs a regression head, cross-entropy a classifier")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    pub train_loss: f64,
    /// Validation metric, or the monitor-set metric when no validation
    /// split is configured.
    pub eval_metric: Option<f64>,
    /// Average prototype distance; absent without a mixture.
    pub dispersion: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub reports: Vec<EpochReport>,
    /// Values before the first update.
    pub initial_metric: Option<f64>,
    pub initial_dispersion: Option<f64>,
}

/// Train `model` in place with minibatch Adam.
///
/// When `validation_fraction > 0` a seeded subset of `data` is held out and
/// scored each epoch; otherwise `monitor`, if given, is scored instead.
pub fn train(
    model: &mut Model,
    data: &[SequenceSample],
    config: &TrainConfig,
    monitor: Option<&[SequenceSample]>,
) -> Result<TrainOutcome> {
    config.validate()?;
    config.check_against(model)?;
    if data.is_empty() {
        return Err(Error::Empty { op: "train" });
    }
    let (held_out, fit) = if config.validation_fraction > 0.0 {
        let (val, rest) = split_fraction(data, config.validation_fraction, rng_stream(config.seed, SPLIT_STREAM).next_u64());
        if val.is_empty() || rest.is_empty() {
            return Err(bad("validation-fraction", "leaves an empty split"));
        }
        (Some(val), rest)
    } else {
        (None, data.to_vec())
    };
    let eval_set = held_out.as_deref().or(monitor);
    let metric = config.metric.unwrap_or(model.default_metric());
    let score = |m: &Model| eval_set.map(|s| m.evaluate(s, metric)).transpose();

    let initial_metric = score(model)?;
    let initial_dispersion = model.dispersion();
    let mut opt = OptimizerState::for_model(model, config.learning_rate);
    let mut rng = rng_stream(config.seed, SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..fit.len()).collect();
    let mut sample_loss = vec![0.0; fit.len()];
    let mut tape = Tape::new();
    let mut reports = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut total_terms = 0usize;
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            tape.clear();
            let vars = model.record(&mut tape)?;
            let mut losses = Vec::with_capacity(batch.len());
            let mut terms = 0;
            for &i in batch {
                let out = vars.forward(&mut tape, &fit[i])?;
                losses.push(out.loss);
                terms += out.count;
            }
            for (&i, &l) in batch.iter().zip(&losses) {
                sample_loss[i] = tape.scalar(l);
            }
            total_terms += terms;
            let stacked = tape.concat(&losses)?;
            let summed = tape.sum(stacked)?;
            let loss = tape.scale(summed, 1.0 / terms as f64)?;
            if !tape.scalar(loss).is_finite() {
                return Err(Error::Diverged { epoch, batch: b + 1 });
            }
            tape.backward(loss)?;
            let grads: Vec<&[f64]> = vars
                .params
                .iter()
                .map(|&v| tape.grad(v).expect("parameters are trainable"))
                .collect();
            adam_step(&mut model.tensors_mut(), &grads, &mut opt)?;
            model.project_constraints();
            if !model.is_finite() {
                return Err(Error::Diverged { epoch, batch: b + 1 });
            }
        }
        // Summed in sample order so a frozen model reports identical losses.
        let train_loss = sample_loss.iter().sum::<f64>() / total_terms as f64;
        reports.push(EpochReport {
            epoch,
            train_loss,
            eval_metric: score(model)?,
            dispersion: model.dispersion(),
        });
    }
    Ok(TrainOutcome {
        reports,
        initial_metric,
        initial_dispersion,
    })
}

/// Initialize from `config.seed` and train.
pub fn fit(
    desc: ModelDescription,
    data: &[SequenceSample],
    config: &TrainConfig,
    monitor: Option<&[SequenceSample]>,
) -> Result<(Model, TrainOutcome)> {
    config.validate()?;
    let mut model = init_params(desc, config.seed, config.init_range)?;
    let outcome = train(&mut model, data, config, monitor)?;
    Ok((model, outcome))
}

/// Score every candidate on a validation split, then retrain the one with
/// the lowest final validation metric on all of `data`. Returns the index
/// of the chosen candidate.
pub fn tune_then_retrain(
    desc: ModelDescription,
    data: &[SequenceSample],
    candidates: &[TrainConfig],
    monitor: Option<&[SequenceSample]>,
) -> Result<(usize, Model, TrainOutcome)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, cfg) in candidates.iter().enumerate() {
        if cfg.validation_fraction <= 0.0 {
            return Err(bad("validation-fraction", "tuning needs a positive validation fraction"));
        }
        let (_, outcome) = fit(desc, data, cfg, None)?;
        let last = outcome
            .reports
            .last()
            .and_then(|r| r.eval_metric)
            .expect("validation metric recorded");
        if best.is_none_or(|(_, b)| last < b) {
            best = Some((i, last));
        }
    }
    let (chosen, _) = best.ok_or_else(|| bad("candidates", "need at least one"))?;
    let final_cfg = TrainConfig {
        validation_fraction: 0.0,
        ..candidates[chosen].clone()
    };
    let (model, outcome) = fit(desc, data, &final_cfg, monitor)?;
    Ok((chosen, model, outcome))
}
