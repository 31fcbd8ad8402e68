//! Check reverse-mode gradients against central finite differences.
//!
//!     cargo run --example gradient_check

use mrnn::cells::{CellKind, CellParameters, CellState, CellVars, MixtureSource, StateVars};
use mrnn::mixture::{LatentMixture, MixtureVars, Similarity};
use mrnn::{grad_check, grad_check_many, Result, Shape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Tensor::new(Shape::new(rows, cols), data).expect("sized")
}

fn main() -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    // A scalar function of one tensor: sum(tanh(W x) * sigmoid(W x)).
    let w = random(&mut rng, 4, 3);
    let x = random(&mut rng, 3, 1);
    let err = grad_check(
        |tape, w| {
            let xv = tape.constant(&x);
            let z = tape.matmul(w, xv)?;
            let a = tape.tanh(z)?;
            let b = tape.sigmoid(z)?;
            let p = tape.mul(a, b)?;
            tape.sum(p)
        },
        &w,
        1e-5,
    )?;
    println!("tanh*sigmoid layer   max rel err {err:.2e}");

    // Mixture retrieval followed by a softmax cross-entropy.
    let (hidden, m, n) = (5, 3, 4);
    let points = [random(&mut rng, hidden, 1), random(&mut rng, m, n), random(&mut rng, hidden, m)];
    let report = grad_check_many(
        |tape, v| {
            let mix = MixtureVars::record(tape, v[1], v[2], None, Similarity::Cosine)?;
            let r = mix.lookup(tape, v[0])?;
            tape.softmax_cross_entropy(r.retrieval, 1)
        },
        &points,
        1e-5,
    )?;
    println!("cosine lookup + CE   max rel err {:.2e} over {} coords", report.max_relative_error, report.coordinates);

    // Three steps of an M-LSTM; the gradient flows into the first gate.
    let mut params = CellParameters::zeros(CellKind::Lstm, hidden, 2, m);
    for g in &mut params.gates {
        g.weight = random(&mut rng, g.weight.rows(), g.weight.cols());
        g.bias = random(&mut rng, hidden, 1);
    }
    let mixture = LatentMixture::with_projection(random(&mut rng, m, n), random(&mut rng, hidden, m), Similarity::Cosine)?;
    let xs: Vec<Tensor> = (0..3).map(|_| random(&mut rng, 2, 1)).collect();
    let err = grad_check(
        |tape, w0| {
            let mut gates = vec![(w0, tape.constant(&params.gates[0].bias))];
            for g in &params.gates[1..] {
                gates.push((tape.constant(&g.weight), tape.constant(&g.bias)));
            }
            let cell = CellVars::bind(tape, &params, gates)?;
            let source = MixtureSource::Single(mixture.clone());
            let mix = source.record(tape, None)?;
            let mut state = StateVars::constant(tape, &CellState::zeros(CellKind::Lstm, hidden));
            for x in &xs {
                let xv = tape.constant(x);
                state = cell.step(tape, state, xv, mix.as_ref())?;
            }
            tape.sum(state.h)
        },
        &params.gates[0].weight,
        1e-5,
    )?;
    println!("3-step M-LSTM        max rel err {err:.2e}");
    Ok(())
}
