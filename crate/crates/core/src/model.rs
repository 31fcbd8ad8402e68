//! A complete sequence model: cell, optional mixture, output head and
//! optional token embedding, with its parameters as named tensors.

use rand::Rng;

use crate::cells::{
    parameter_count, CellKind, CellParameters, CellState, CellVars, HeadSpec, MixtureDims,
    MixtureSource, ModelDescription, ParameterCount, StateVars,
};
use crate::data::{SequenceSample, StepInputs, Target};
use crate::error::{Error, Result};
use crate::metrics::{self, Metric};
use crate::mixture::{center_dispersion, BucketedMixture, LatentMixture, MixtureVars, Similarity};
use crate::tape::{Tape, Var};
use crate::tensor::{Shape, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub description: ModelDescription,
    pub cell: CellParameters,
    pub mixture: MixtureSource,
    /// `outputs x hidden` (regression) or `classes x hidden` (classifier).
    pub head_weight: Tensor,
    /// Regression heads only.
    pub head_bias: Option<Tensor>,
    /// `input x vocab`; column `j` embeds token `j`.
    pub embedding: Option<Tensor>,
}

fn check_desc(desc: &ModelDescription) -> Result<()> {
    let positive = |field: &str, v: usize| {
        if v == 0 {
            Err(Error::Config {
                field: field.into(),
                reason: "must be positive".into(),
            })
        } else {
            Ok(())
        }
    };
    positive("hidden", desc.hidden)?;
    positive("input", desc.input)?;
    if let Some(mx) = desc.mixture {
        positive("m", mx.m)?;
        positive("n", mx.n)?;
        if mx.bucketed {
            positive("buckets", mx.buckets)?;
        }
    }
    match desc.head {
        HeadSpec::Regression { outputs } => positive("outputs", outputs)?,
        HeadSpec::Classifier { classes } => positive("classes", classes)?,
    }
    if let Some(v) = desc.embedding_vocab {
        positive("vocab", v)?;
    }
    Ok(())
}

impl Model {
    /// A model with every scalar drawn from `init` and the precision factor
    /// set to the identity.
    pub fn new(desc: ModelDescription, mut init: impl FnMut() -> f64) -> Result<Self> {
        check_desc(&desc)?;
        let h = desc.hidden;
        let mut fill = |r: usize, c: usize| {
            Tensor::new(Shape::new(r, c), (0..r * c).map(|_| init()).collect()).expect("positive dims")
        };
        let m_dim = desc.mixture.map_or(0, |mx| mx.m);
        let mut cell = CellParameters::zeros(desc.cell, h, desc.input, m_dim);
        for g in &mut cell.gates {
            g.weight = fill(g.weight.rows(), g.weight.cols());
            g.bias = fill(h, 1);
        }
        let mixture = match desc.mixture {
            None => MixtureSource::None,
            Some(mx) if mx.bucketed => {
                let protos = (0..mx.buckets).map(|_| fill(mx.m, mx.n)).collect();
                MixtureSource::Bucketed(BucketedMixture::new(
                    protos,
                    fill(h, mx.m),
                    Tensor::identity(h),
                    mx.similarity,
                )?)
            }
            Some(mx) => MixtureSource::Single(LatentMixture::new(
                fill(mx.m, mx.n),
                fill(h, mx.m),
                Tensor::identity(h),
                mx.similarity,
            )?),
        };
        let (head_weight, head_bias) = match desc.head {
            HeadSpec::Regression { outputs } => (fill(outputs, h), Some(fill(outputs, 1))),
            HeadSpec::Classifier { classes } => (fill(classes, h), None),
        };
        let embedding = desc.embedding_vocab.map(|v| fill(desc.input, v));
        Ok(Model {
            description: desc,
            cell,
            mixture,
            head_weight,
            head_bias,
            embedding,
        })
    }

    /// Seeded i.i.d. uniform initialization on `[lo, hi]`.
    pub fn init_uniform(desc: ModelDescription, rng: &mut impl Rng, lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::Config {
                field: "init-range".into(),
                reason: format!("need lo < hi, got [{lo}, {hi}]"),
            });
        }
        Self::new(desc, || rng.gen_range(lo..=hi))
    }

    pub fn parameter_count(&self) -> ParameterCount {
        parameter_count(&self.description)
    }

    pub fn similarity(&self) -> Option<Similarity> {
        self.description.mixture.map(|m| m.similarity)
    }

    /// Parameters in their canonical order, with their checkpoint names.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out: Vec<(String, &Tensor)> = Vec::new();
        for g in &self.cell.gates {
            out.push((format!("W_{}", g.name), &g.weight));
            out.push((format!("b_{}", g.name), &g.bias));
        }
        let mahalanobis = self.similarity() == Some(Similarity::Mahalanobis);
        match &self.mixture {
            MixtureSource::None => {}
            MixtureSource::Single(mix) => {
                out.push(("M".into(), &mix.prototypes));
                out.push(("D".into(), &mix.projection));
                if mahalanobis {
                    out.push(("L".into(), &mix.precision_factor));
                }
            }
            MixtureSource::Bucketed(bm) => {
                for (k, m) in bm.prototypes.iter().enumerate() {
                    out.push((format!("M_{}", k + 1), m));
                }
                out.push(("D".into(), &bm.projection));
                if mahalanobis {
                    out.push(("L".into(), &bm.precision_factor));
                }
            }
        }
        out.push(("W_out".into(), &self.head_weight));
        if let Some(b) = &self.head_bias {
            out.push(("b_out".into(), b));
        }
        if let Some(e) = &self.embedding {
            out.push(("E".into(), e));
        }
        out
    }

    /// Mutable view in the same order as [`Model::named_tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mahalanobis = self.similarity() == Some(Similarity::Mahalanobis);
        let mut out: Vec<&mut Tensor> = Vec::new();
        for g in &mut self.cell.gates {
            out.push(&mut g.weight);
            out.push(&mut g.bias);
        }
        match &mut self.mixture {
            MixtureSource::None => {}
            MixtureSource::Single(mix) => {
                out.push(&mut mix.prototypes);
                out.push(&mut mix.projection);
                if mahalanobis {
                    out.push(&mut mix.precision_factor);
                }
            }
            MixtureSource::Bucketed(bm) => {
                out.extend(bm.prototypes.iter_mut());
                out.push(&mut bm.projection);
                if mahalanobis {
                    out.push(&mut bm.precision_factor);
                }
            }
        }
        out.push(&mut self.head_weight);
        if let Some(b) = &mut self.head_bias {
            out.push(b);
        }
        if let Some(e) = &mut self.embedding {
            out.push(e);
        }
        out
    }

    /// Keep the precision factor lower triangular after an update.
    pub(crate) fn project_constraints(&mut self) {
        let factor = match &mut self.mixture {
            MixtureSource::Single(m) => &mut m.precision_factor,
            MixtureSource::Bucketed(b) => &mut b.precision_factor,
            MixtureSource::None => return,
        };
        let h = factor.rows();
        for r in 0..h {
            for c in r + 1..h {
                factor.set(r, c, 0.0);
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.named_tensors().iter().all(|(_, t)| t.is_finite())
    }

    /// Average pairwise prototype distance (averaged over buckets).
    pub fn dispersion(&self) -> Option<f64> {
        match &self.mixture {
            MixtureSource::None => None,
            MixtureSource::Single(m) => center_dispersion(&m.prototypes).ok(),
            MixtureSource::Bucketed(b) => {
                let ds: Option<Vec<f64>> =
                    b.prototypes.iter().map(|m| center_dispersion(m).ok()).collect();
                ds.map(|d| d.iter().sum::<f64>() / d.len() as f64)
            }
        }
    }

    /// Evaluation metric natural to the head.
    pub fn default_metric(&self) -> Metric {
        match self.description.head {
            HeadSpec::Regression { .. } => Metric::Mae,
            HeadSpec::Classifier { .. } => Metric::Perplexity,
        }
    }

    pub fn record(&self, tape: &mut Tape) -> Result<ModelVars> {
        ModelVars::record(tape, self)
    }

    /// Scalar prediction for each regression sample.
    pub fn predict(&self, samples: &[SequenceSample]) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let mut out = Vec::with_capacity(samples.len());
        for s in samples {
            tape.clear();
            let vars = self.record(&mut tape)?;
            let pred = vars.forward(&mut tape, s)?.prediction;
            let pred = pred.ok_or_else(|| Error::Config {
                field: "task".into(),
                reason: "predictions need a regression head".into(),
            })?;
            out.push(tape.scalar(pred));
        }
        Ok(out)
    }

    /// Per-token negative log-likelihoods over token samples.
    pub fn token_nlls(&self, samples: &[SequenceSample]) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let mut out = Vec::new();
        for s in samples {
            tape.clear();
            let vars = self.record(&mut tape)?;
            let terms = vars.forward(&mut tape, s)?.terms.ok_or_else(|| Error::Config {
                field: "metric".into(),
                reason: "perplexity needs a classifier head".into(),
            })?;
            out.extend_from_slice(tape.value(terms));
        }
        Ok(out)
    }

    pub fn evaluate(&self, samples: &[SequenceSample], metric: Metric) -> Result<f64> {
        if samples.is_empty() {
            return Err(Error::Empty { op: "evaluate" });
        }
        match metric {
            Metric::Mae | Metric::Rmae => {
                let preds = self.predict(samples)?;
                let targets: Vec<f64> = samples
                    .iter()
                    .map(|s| match s.target {
                        Target::Scalar(y) => Ok(y),
                        Target::Tokens(_) => Err(Error::Data("token target for a regression metric".into())),
                    })
                    .collect::<Result<_>>()?;
                if metric == Metric::Mae {
                    metrics::mae(&preds, &targets)
                } else {
                    metrics::rmae(&preds, &targets)
                }
            }
            Metric::Perplexity => metrics::perplexity(&self.token_nlls(samples)?),
        }
    }

    /// Final hidden state for a sample; useful for inspecting the cell.
    pub fn final_state(&self, sample: &SequenceSample) -> Result<CellState> {
        let mut tape = Tape::new();
        let vars = self.record(&mut tape)?;
        let state = vars.run(&mut tape, sample)?;
        Ok(state.last().expect("non-empty").read(&tape))
    }
}

enum MixVars {
    None,
    Single(MixtureVars),
    Bucketed(Vec<MixtureVars>),
}

/// A model's parameters placed on one tape.
pub struct ModelVars {
    /// Same order as [`Model::named_tensors`].
    pub params: Vec<Var>,
    cell: CellVars,
    mixture: MixVars,
    head_weight: Var,
    head_bias: Option<Var>,
    embedding: Option<Var>,
    kind: CellKind,
    hidden: usize,
    classes: Option<usize>,
}

/// Loss of one sample (summed over tokens for classifiers).
pub struct SampleOutput {
    pub loss: Var,
    /// Regression prediction; `None` for classifiers.
    pub prediction: Option<Var>,
    /// Per-token losses of a classifier.
    pub terms: Option<Var>,
    /// Number of loss terms: 1 for regression, tokens for classifiers.
    pub count: usize,
}

impl ModelVars {
    pub fn record(tape: &mut Tape, model: &Model) -> Result<Self> {
        let params: Vec<Var> = model
            .named_tensors()
            .into_iter()
            .map(|(_, t)| tape.param(t))
            .collect();
        Self::bind(tape, model, params)
    }

    /// Wire up a model from leaves already on the tape, given in
    /// [`Model::named_tensors`] order.
    pub fn bind(tape: &mut Tape, model: &Model, params: Vec<Var>) -> Result<Self> {
        let expected = model.named_tensors().len();
        if params.len() != expected {
            return Err(Error::shape(
                "model",
                format!("{} parameter leaves for {expected} tensors", params.len()),
            ));
        }
        let mut next = params.iter().copied();
        let mut take = || next.next().expect("counted");
        let gates = (0..model.cell.gates.len()).map(|_| (take(), take())).collect();
        let cell = CellVars::bind(tape, &model.cell, gates)?;
        let mixture = match &model.mixture {
            MixtureSource::None => MixVars::None,
            MixtureSource::Single(mix) => {
                let (m, d) = (take(), take());
                let l = (mix.similarity == Similarity::Mahalanobis).then(&mut take);
                MixVars::Single(MixtureVars::record(tape, m, d, l, mix.similarity)?)
            }
            MixtureSource::Bucketed(bm) => {
                let ms: Vec<Var> = bm.prototypes.iter().map(|_| take()).collect();
                let d = take();
                let l = (bm.similarity == Similarity::Mahalanobis).then(&mut take);
                let vars = ms
                    .into_iter()
                    .map(|m| MixtureVars::record(tape, m, d, l, bm.similarity))
                    .collect::<Result<_>>()?;
                MixVars::Bucketed(vars)
            }
        };
        let head_weight = take();
        let head_bias = model.head_bias.as_ref().map(|_| take());
        let embedding = model.embedding.as_ref().map(|_| take());
        let classes = match model.description.head {
            HeadSpec::Classifier { classes } => Some(classes),
            HeadSpec::Regression { .. } => None,
        };
        Ok(ModelVars {
            params,
            cell,
            mixture,
            head_weight,
            head_bias,
            embedding,
            kind: model.description.cell,
            hidden: model.description.hidden,
            classes,
        })
    }

    fn mixture_for(&self, bucket: usize) -> Result<Option<&MixtureVars>> {
        match &self.mixture {
            MixVars::None => Ok(None),
            MixVars::Single(m) => Ok(Some(m)),
            MixVars::Bucketed(ms) => bucket
                .checked_sub(1)
                .and_then(|k| ms.get(k))
                .map(Some)
                .ok_or(Error::UnknownBucket {
                    bucket,
                    buckets: ms.len(),
                }),
        }
    }

    /// Unroll the cell over a sample's inputs from the zero state.
    pub fn run(&self, tape: &mut Tape, sample: &SequenceSample) -> Result<Vec<StateVars>> {
        if sample.inputs.is_empty() {
            return Err(Error::EmptySequence);
        }
        let mixture = self.mixture_for(sample.bucket)?;
        let xs: Vec<Var> = match &sample.inputs {
            StepInputs::Dense { .. } => {
                if self.embedding.is_some() {
                    return Err(Error::Data("dense inputs for a token model".into()));
                }
                (0..sample.inputs.len())
                    .map(|t| tape.constant_vector(sample.inputs.dense_step(t).expect("in range")))
                    .collect()
            }
            StepInputs::Tokens(ids) => {
                let e = self
                    .embedding
                    .ok_or_else(|| Error::Data("token inputs for a model without embedding".into()))?;
                ids.iter().map(|&id| tape.column(e, id)).collect::<Result<_>>()?
            }
        };
        let init = StateVars::constant(tape, &CellState::zeros(self.kind, self.hidden));
        self.cell.unroll(tape, init, &xs, mixture)
    }

    pub fn forward(&self, tape: &mut Tape, sample: &SequenceSample) -> Result<SampleOutput> {
        let states = self.run(tape, sample)?;
        match (&sample.target, self.classes) {
            (Target::Scalar(y), None) => {
                let h = states.last().expect("non-empty").h;
                let z = tape.matmul(self.head_weight, h)?;
                let pred = match self.head_bias {
                    Some(b) => tape.add(z, b)?,
                    None => z,
                };
                if tape.shape(pred).len() != 1 {
                    return Err(Error::Config {
                        field: "outputs".into(),
                        reason: "scalar targets need a single-output head".into(),
                    });
                }
                let y = tape.constant_vector(&[*y]);
                let diff = tape.sub(pred, y)?;
                Ok(SampleOutput {
                    loss: tape.abs(diff)?,
                    prediction: Some(pred),
                    terms: None,
                    count: 1,
                })
            }
            (Target::Tokens(ids), Some(classes)) => {
                if ids.len() != states.len() {
                    return Err(Error::Data(format!(
                        "{} targets for {} steps",
                        ids.len(),
                        states.len()
                    )));
                }
                let mut terms = Vec::with_capacity(ids.len());
                for (s, &t) in states.iter().zip(ids) {
                    if t >= classes {
                        return Err(Error::TargetOutOfRange { id: t, vocab: classes });
                    }
                    let logits = tape.matmul(self.head_weight, s.h)?;
                    terms.push(tape.softmax_cross_entropy(logits, t)?);
                }
                let all = tape.concat(&terms)?;
                Ok(SampleOutput {
                    loss: tape.sum(all)?,
                    prediction: None,
                    terms: Some(all),
                    count: ids.len(),
                })
            }
            (Target::Scalar(_), Some(_)) => Err(Error::Data("scalar target for a classifier".into())),
            (Target::Tokens(_), None) => Err(Error::Data("token targets for a regression head".into())),
        }
    }
}

/// Regression model over `input`-wide steps.
pub fn regression_description(
    cell: CellKind,
    hidden: usize,
    input: usize,
    mixture: Option<MixtureDims>,
) -> ModelDescription {
    ModelDescription {
        cell,
        hidden,
        input,
        mixture,
        head: HeadSpec::Regression { outputs: 1 },
        embedding_vocab: None,
    }
}

/// Next-token model with a `vocab x hidden` bias-free head.
pub fn language_model_description(
    cell: CellKind,
    hidden: usize,
    embed: usize,
    vocab: usize,
    mixture: Option<MixtureDims>,
) -> ModelDescription {
    ModelDescription {
        cell,
        hidden,
        input: embed,
        mixture,
        head: HeadSpec::Classifier { classes: vocab },
        embedding_vocab: Some(vocab),
    }
}
