//! Vanilla, LSTM and GRU cells, optionally fed with a mixture retrieval.
//!
//! Every gate of a cell reads the concatenation `[h_{t-1}, x_t, p_t]`,
//! where `p_t` is the mixture retrieval for `h_{t-1}` (absent for plain
//! cells). LSTM:
//!
//! ```text
//! f = sigmoid(W_f z + b_f)   i = sigmoid(W_i z + b_i)   o = sigmoid(W_o z + b_o)
//! c' = f * c + i * tanh(W_c z + b_c)                     h' = o * tanh(c')
//! ```
//!
//! GRU (`z` is the update gate, `r` the reset gate):
//!
//! ```text
//! u = sigmoid(W_z [h, x, p] + b_z)   r = sigmoid(W_r [h, x, p] + b_r)
//! n = tanh(W_n [r * h, x, p] + b_n)  h' = (1 - u) * h + u * n
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixture::{BucketedMixture, LatentMixture, MixtureVars, Similarity};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Rnn,
    Lstm,
    Gru,
}

impl CellKind {
    pub fn gate_names(self) -> &'static [&'static str] {
        match self {
            CellKind::Rnn => &["h"],
            CellKind::Lstm => &["f", "i", "c", "o"],
            CellKind::Gru => &["z", "r", "n"],
        }
    }

    pub fn gates(self) -> usize {
        self.gate_names().len()
    }

    pub fn name(self) -> &'static str {
        match self {
            CellKind::Rnn => "rnn",
            CellKind::Lstm => "lstm",
            CellKind::Gru => "gru",
        }
    }
}

impl std::str::FromStr for CellKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rnn" => Ok(CellKind::Rnn),
            "lstm" => Ok(CellKind::Lstm),
            "gru" => Ok(CellKind::Gru),
            other => Err(Error::Config {
                field: "model".into(),
                reason: format!("unknown cell `{other}` (expected rnn, lstm or gru)"),
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gate {
    pub name: &'static str,
    /// `hidden x (hidden + input + mixture_dim)`
    pub weight: Tensor,
    /// `hidden x 1`
    pub bias: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellParameters {
    pub kind: CellKind,
    pub hidden: usize,
    pub input: usize,
    /// Width of the retrieval `p`; zero for plain cells.
    pub mixture_dim: usize,
    pub gates: Vec<Gate>,
}

impl CellParameters {
    pub fn zeros(kind: CellKind, hidden: usize, input: usize, mixture_dim: usize) -> Self {
        let width = hidden + input + mixture_dim;
        let gates = kind
            .gate_names()
            .iter()
            .map(|&name| Gate {
                name,
                weight: Tensor::zeros(hidden, width),
                bias: Tensor::zeros(hidden, 1),
            })
            .collect();
        CellParameters {
            kind,
            hidden,
            input,
            mixture_dim,
            gates,
        }
    }

    pub fn width(&self) -> usize {
        self.hidden + self.input + self.mixture_dim
    }

    pub fn validate(&self) -> Result<()> {
        if self.gates.len() != self.kind.gates() {
            return Err(Error::Cell(format!(
                "{} cell needs {} gates, got {}",
                self.kind.name(),
                self.kind.gates(),
                self.gates.len()
            )));
        }
        for g in &self.gates {
            if g.weight.rows() != self.hidden || g.weight.cols() != self.width() {
                return Err(Error::Cell(format!(
                    "W_{} is {}, expected [{}x{}]",
                    g.name,
                    g.weight.shape(),
                    self.hidden,
                    self.width()
                )));
            }
            if g.bias.rows() != self.hidden || g.bias.cols() != 1 {
                return Err(Error::Cell(format!("b_{} is {}", g.name, g.bias.shape())));
            }
        }
        Ok(())
    }

    /// Zero the weight columns that read the retrieval `p`.
    pub fn null_mixture_columns(&mut self) {
        let start = self.hidden + self.input;
        let width = self.width();
        for g in &mut self.gates {
            for r in 0..self.hidden {
                for c in start..width {
                    g.weight.set(r, c, 0.0);
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellState {
    pub h: Vec<f64>,
    /// Memory cell, LSTM only.
    pub c: Option<Vec<f64>>,
}

impl CellState {
    pub fn zeros(kind: CellKind, hidden: usize) -> Self {
        CellState {
            h: vec![0.0; hidden],
            c: (kind == CellKind::Lstm).then(|| vec![0.0; hidden]),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum MixtureSource {
    None,
    Single(LatentMixture),
    Bucketed(BucketedMixture),
}

impl MixtureSource {
    pub fn retrieval_dim(&self) -> usize {
        match self {
            MixtureSource::None => 0,
            MixtureSource::Single(m) => m.prototype_dim(),
            MixtureSource::Bucketed(b) => b.prototypes[0].rows(),
        }
    }

    /// Place the parameters needed for one sequence on the tape.
    pub fn record(&self, tape: &mut Tape, bucket: Option<usize>) -> Result<Option<MixtureVars>> {
        match self {
            MixtureSource::None => Ok(None),
            MixtureSource::Single(mix) => Ok(Some(MixtureVars::from_mixture(tape, mix)?)),
            MixtureSource::Bucketed(bm) => {
                let bucket = bucket.ok_or(Error::MissingBucket)?;
                let m = tape.param(bm.bucket_prototypes(bucket)?);
                let d = tape.param(&bm.projection);
                let l = (bm.similarity == Similarity::Mahalanobis)
                    .then(|| tape.param(&bm.precision_factor));
                Ok(Some(MixtureVars::record(tape, m, d, l, bm.similarity)?))
            }
        }
    }
}

/// A cell paired with where its retrieval comes from.
#[derive(Clone, Debug, PartialEq)]
pub struct MixtureCellBinding {
    pub kind: CellKind,
    pub source: MixtureSource,
}

/// Cell parameters placed on a tape.
#[derive(Clone, Debug)]
pub struct CellVars {
    pub kind: CellKind,
    pub hidden: usize,
    pub input: usize,
    pub mixture_dim: usize,
    /// `(weight, bias)` per gate in [`CellKind::gate_names`] order.
    pub gates: Vec<(Var, Var)>,
    ones: Option<Var>,
}

#[derive(Clone, Copy, Debug)]
pub struct StateVars {
    pub h: Var,
    pub c: Option<Var>,
}

impl StateVars {
    pub fn constant(tape: &mut Tape, state: &CellState) -> Self {
        StateVars {
            h: tape.constant_vector(&state.h),
            c: state.c.as_ref().map(|c| tape.constant_vector(c)),
        }
    }

    pub fn read(&self, tape: &Tape) -> CellState {
        CellState {
            h: tape.value(self.h).to_vec(),
            c: self.c.map(|c| tape.value(c).to_vec()),
        }
    }
}

impl CellVars {
    pub fn record(tape: &mut Tape, params: &CellParameters) -> Result<Self> {
        let gates = params
            .gates
            .iter()
            .map(|g| (tape.param(&g.weight), tape.param(&g.bias)))
            .collect();
        Self::bind(tape, params, gates)
    }

    /// Use `(weight, bias)` leaves already on the tape.
    pub fn bind(tape: &mut Tape, params: &CellParameters, gates: Vec<(Var, Var)>) -> Result<Self> {
        params.validate()?;
        if gates.len() != params.gates.len() {
            return Err(Error::Cell(format!("{} gate leaves for {} gates", gates.len(), params.gates.len())));
        }
        let ones = (params.kind == CellKind::Gru).then(|| tape.constant_filled(params.hidden, 1, 1.0));
        Ok(CellVars {
            kind: params.kind,
            hidden: params.hidden,
            input: params.input,
            mixture_dim: params.mixture_dim,
            gates,
            ones,
        })
    }

    fn affine(&self, tape: &mut Tape, gate: usize, z: Var) -> Result<Var> {
        let (w, b) = self.gates[gate];
        let a = tape.matmul(w, z)?;
        tape.add(a, b)
    }

    /// One transition; `mixture` must be present exactly when the cell was
    /// built with a non-zero mixture width.
    pub fn step(
        &self,
        tape: &mut Tape,
        state: StateVars,
        x: Var,
        mixture: Option<&MixtureVars>,
    ) -> Result<StateVars> {
        let xs = tape.shape(x);
        if !xs.is_vector() || xs.rows != self.input {
            return Err(Error::shape(
                "cell step",
                format!("input {xs} for a {}-input cell", self.input),
            ));
        }
        let p = match (mixture, self.mixture_dim) {
            (None, 0) => None,
            (Some(mix), m) if m > 0 => {
                let r = mix.lookup(tape, state.h)?;
                if tape.shape(r.retrieval).rows != m {
                    return Err(Error::shape(
                        "cell step",
                        format!("retrieval {} for a {m}-wide mixture input", tape.shape(r.retrieval)),
                    ));
                }
                Some(r.retrieval)
            }
            (None, m) => {
                return Err(Error::Cell(format!("cell expects a {m}-dim retrieval but has no mixture")))
            }
            (Some(_), _) => return Err(Error::Cell("plain cell given a mixture".into())),
        };
        let mut parts = vec![state.h, x];
        parts.extend(p);
        let z = tape.concat(&parts)?;
        match self.kind {
            CellKind::Rnn => {
                let a = self.affine(tape, 0, z)?;
                Ok(StateVars {
                    h: tape.tanh(a)?,
                    c: None,
                })
            }
            CellKind::Lstm => {
                let c = state
                    .c
                    .ok_or_else(|| Error::Cell("lstm state without memory cell".into()))?;
                let f = self.affine(tape, 0, z)?;
                let f = tape.sigmoid(f)?;
                let i = self.affine(tape, 1, z)?;
                let i = tape.sigmoid(i)?;
                let cand = self.affine(tape, 2, z)?;
                let cand = tape.tanh(cand)?;
                let o = self.affine(tape, 3, z)?;
                let o = tape.sigmoid(o)?;
                let keep = tape.mul(f, c)?;
                let write = tape.mul(i, cand)?;
                let c_next = tape.add(keep, write)?;
                let squashed = tape.tanh(c_next)?;
                Ok(StateVars {
                    h: tape.mul(o, squashed)?,
                    c: Some(c_next),
                })
            }
            CellKind::Gru => {
                let u = self.affine(tape, 0, z)?;
                let u = tape.sigmoid(u)?;
                let r = self.affine(tape, 1, z)?;
                let r = tape.sigmoid(r)?;
                let reset = tape.mul(r, state.h)?;
                parts[0] = reset;
                let zr = tape.concat(&parts)?;
                let n = self.affine(tape, 2, zr)?;
                let n = tape.tanh(n)?;
                let ones = self.ones.expect("gru records ones");
                let keep = tape.sub(ones, u)?;
                let keep = tape.mul(keep, state.h)?;
                let write = tape.mul(u, n)?;
                Ok(StateVars {
                    h: tape.add(keep, write)?,
                    c: None,
                })
            }
        }
    }

    /// Apply [`CellVars::step`] left to right and return every state.
    pub fn unroll(
        &self,
        tape: &mut Tape,
        initial: StateVars,
        inputs: &[Var],
        mixture: Option<&MixtureVars>,
    ) -> Result<Vec<StateVars>> {
        if inputs.is_empty() {
            return Err(Error::EmptySequence);
        }
        let mut states = Vec::with_capacity(inputs.len());
        let mut state = initial;
        for &x in inputs {
            state = self.step(tape, state, x, mixture)?;
            states.push(state);
        }
        Ok(states)
    }
}

fn check_binding(params: &CellParameters, binding: &MixtureCellBinding) -> Result<()> {
    if params.kind != binding.kind {
        return Err(Error::Cell(format!(
            "binding is for a {} cell, parameters are {}",
            binding.kind.name(),
            params.kind.name()
        )));
    }
    if binding.source.retrieval_dim() != params.mixture_dim {
        return Err(Error::Cell(format!(
            "mixture width {} does not match cell mixture width {}",
            binding.source.retrieval_dim(),
            params.mixture_dim
        )));
    }
    Ok(())
}

/// Run a (possibly mixture-augmented) cell over a sequence and return all
/// intermediate states.
pub fn unroll(
    binding: &MixtureCellBinding,
    params: &CellParameters,
    sequence: &[Vec<f64>],
    bucket: Option<usize>,
    initial: &CellState,
) -> Result<Vec<CellState>> {
    check_binding(params, binding)?;
    if sequence.is_empty() {
        return Err(Error::EmptySequence);
    }
    let mut tape = Tape::new();
    let cell = CellVars::record(&mut tape, params)?;
    let mix = binding.source.record(&mut tape, bucket)?;
    let init = StateVars::constant(&mut tape, initial);
    let xs: Vec<Var> = sequence.iter().map(|x| tape.constant_vector(x)).collect();
    let states = cell.unroll(&mut tape, init, &xs, mix.as_ref())?;
    Ok(states.iter().map(|s| s.read(&tape)).collect())
}

fn single_step(
    binding: &MixtureCellBinding,
    params: &CellParameters,
    state: &CellState,
    x: &[f64],
    bucket: Option<usize>,
) -> Result<CellState> {
    let mut states = unroll(binding, params, std::slice::from_ref(&x.to_vec()), bucket, state)?;
    Ok(states.pop().expect("one step"))
}

fn plain(kind: CellKind) -> MixtureCellBinding {
    MixtureCellBinding {
        kind,
        source: MixtureSource::None,
    }
}

pub fn lstm_step(params: &CellParameters, state: &CellState, x: &[f64]) -> Result<CellState> {
    single_step(&plain(CellKind::Lstm), params, state, x, None)
}

pub fn gru_step(params: &CellParameters, state: &CellState, x: &[f64]) -> Result<CellState> {
    single_step(&plain(CellKind::Gru), params, state, x, None)
}

pub fn mixture_lstm_step(
    params: &CellParameters,
    state: &CellState,
    x: &[f64],
    binding: &MixtureCellBinding,
    bucket: Option<usize>,
) -> Result<CellState> {
    if binding.kind != CellKind::Lstm {
        return Err(Error::Cell("mixture_lstm_step needs an lstm binding".into()));
    }
    single_step(binding, params, state, x, bucket)
}

pub fn mixture_gru_step(
    params: &CellParameters,
    state: &CellState,
    x: &[f64],
    binding: &MixtureCellBinding,
    bucket: Option<usize>,
) -> Result<CellState> {
    if binding.kind != CellKind::Gru {
        return Err(Error::Cell("mixture_gru_step needs a gru binding".into()));
    }
    single_step(binding, params, state, x, bucket)
}

/// Shape of the mixture attached to a model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixtureDims {
    /// Prototype dimension `m`.
    pub m: usize,
    /// Number of components `n`.
    pub n: usize,
    /// 1 for a single mixture, B for a bucketed one.
    pub buckets: usize,
    pub bucketed: bool,
    pub similarity: Similarity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum HeadSpec {
    /// `y = w^T h + b` per output.
    Regression { outputs: usize },
    /// Bias-free `V x hidden` projection followed by a softmax.
    Classifier { classes: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDescription {
    pub cell: CellKind,
    pub hidden: usize,
    /// Per-step input width (the embedding width for token models).
    pub input: usize,
    pub mixture: Option<MixtureDims>,
    pub head: HeadSpec,
    /// Vocabulary size when inputs are token ids.
    pub embedding_vocab: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParameterCount {
    /// Gate weights over `[h, x]` and biases.
    pub cell: usize,
    /// Prototypes, projection, precision factor and the gate columns that
    /// read the retrieval.
    pub mixture: usize,
    pub head: usize,
    /// Token embeddings, kept out of [`ParameterCount::network`].
    pub embedding: usize,
}

impl ParameterCount {
    pub fn network(&self) -> usize {
        self.cell + self.mixture + self.head
    }

    pub fn total(&self) -> usize {
        self.network() + self.embedding
    }
}

/// Exact number of trainable scalars by category.
pub fn parameter_count(desc: &ModelDescription) -> ParameterCount {
    let g = desc.cell.gates();
    let h = desc.hidden;
    let cell = g * h * (h + desc.input) + g * h;
    let mixture = desc.mixture.map_or(0, |mx| {
        let buckets = if mx.bucketed { mx.buckets } else { 1 };
        let factor = match mx.similarity {
            Similarity::Cosine => 0,
            Similarity::Mahalanobis => h * (h + 1) / 2,
        };
        buckets * mx.m * mx.n + h * mx.m + factor + g * h * mx.m
    });
    let head = match desc.head {
        HeadSpec::Regression { outputs } => outputs * (h + 1),
        HeadSpec::Classifier { classes } => classes * h,
    };
    let embedding = desc.embedding_vocab.map_or(0, |v| v * desc.input);
    ParameterCount {
        cell,
        mixture,
        head,
        embedding,
    }
}
