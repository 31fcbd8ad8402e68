//! Single steps of plain and mixture-fed cells, and the nulling property:
//! with the retrieval columns zeroed a mixture cell is a plain cell.
//!
//!     cargo run --example mixture_cells

use mrnn::cells::{
    gru_step, lstm_step, mixture_gru_step, mixture_lstm_step, CellKind, CellParameters, CellState,
    MixtureCellBinding, MixtureSource,
};
use mrnn::mixture::{LatentMixture, Similarity};
use mrnn::{Result, Shape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const HIDDEN: usize = 4;
const INPUT: usize = 2;
const M: usize = 3;

fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.gen_range(-0.5..0.5)).collect();
    Tensor::new(Shape::new(rows, cols), data).expect("sized")
}

fn randomized(kind: CellKind, mixture_dim: usize, rng: &mut ChaCha8Rng) -> CellParameters {
    let mut p = CellParameters::zeros(kind, HIDDEN, INPUT, mixture_dim);
    for g in &mut p.gates {
        g.weight = random(rng, g.weight.rows(), g.weight.cols());
        g.bias = random(rng, HIDDEN, 1);
    }
    p
}

/// The plain cell obtained by dropping the retrieval columns.
fn without_mixture(p: &CellParameters) -> CellParameters {
    let mut plain = CellParameters::zeros(p.kind, HIDDEN, INPUT, 0);
    for (dst, src) in plain.gates.iter_mut().zip(&p.gates) {
        for r in 0..HIDDEN {
            for c in 0..HIDDEN + INPUT {
                dst.weight.set(r, c, src.weight.get(r, c));
            }
        }
        dst.bias = src.bias.clone();
    }
    plain
}

fn main() -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mixture = LatentMixture::with_projection(random(&mut rng, M, 5), random(&mut rng, HIDDEN, M), Similarity::Cosine)?;
    let xs: Vec<Vec<f64>> = (0..6).map(|_| (0..INPUT).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();

    for kind in [CellKind::Lstm, CellKind::Gru] {
        let binding = MixtureCellBinding {
            kind,
            source: MixtureSource::Single(mixture.clone()),
        };
        let mut params = randomized(kind, M, &mut rng);
        let step = |p: &CellParameters, s: &CellState, x: &[f64]| match kind {
            CellKind::Lstm => mixture_lstm_step(p, s, x, &binding, None),
            _ => mixture_gru_step(p, s, x, &binding, None),
        };

        let mut s = CellState::zeros(kind, HIDDEN);
        for x in &xs {
            s = step(&params, &s, x)?;
        }
        println!("m-{} h after {} steps: {:?}", kind.name(), xs.len(), s.h);

        params.null_mixture_columns();
        let plain = without_mixture(&params);
        let (mut a, mut b) = (CellState::zeros(kind, HIDDEN), CellState::zeros(kind, HIDDEN));
        for x in &xs {
            a = step(&params, &a, x)?;
            b = match kind {
                CellKind::Lstm => lstm_step(&plain, &b, x)?,
                _ => gru_step(&plain, &b, x)?,
            };
        }
        let same = a.h.iter().zip(&b.h).all(|(x, y)| x.to_bits() == y.to_bits());
        println!("nulled m-{0} == {0}: {same}", kind.name());
    }
    Ok(())
}
