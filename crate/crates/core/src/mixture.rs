//! The mixture layer: prototype matrix, similarity measures and the
//! softmax-weighted lookup, plus closed-form posterior oracles.
//!
//! A [`LatentMixture`] holds
//! - `prototypes` (`m x n`): column `i` is the prototype vector of
//!   component `i`,
//! - `projection` (`h x m`): maps prototypes into hidden-state space,
//! - `precision_factor` (`h x h`, lower triangular): the precision matrix
//!   is `L L^T`; only used by [`Similarity::Mahalanobis`].
//!
//! Looking up the mixture for a hidden state `h` scores every projected
//! prototype, turns the scores into weights with a softmax and returns the
//! weighted prototype combination. With Mahalanobis scores the weights are
//! exactly the posterior of a shared-covariance Gaussian mixture with a
//! uniform prior ([`gaussian_posterior_oracle`]); with cosine scores on the
//! unit sphere they are the posterior of a unit-concentration von
//! Mises-Fisher mixture ([`vmf_posterior_oracle`]).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tape::{Tape, Var};
use crate::tensor::{dot, Tensor};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Similarity {
    #[default]
    Cosine,
    Mahalanobis,
}

impl std::str::FromStr for Similarity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(Similarity::Cosine),
            "mahalanobis" => Ok(Similarity::Mahalanobis),
            other => Err(Error::Config {
                field: "similarity".into(),
                reason: format!("unknown similarity `{other}`"),
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LatentMixture {
    pub prototypes: Tensor,
    pub projection: Tensor,
    pub precision_factor: Tensor,
    pub similarity: Similarity,
}

fn check_shared(projection: &Tensor, factor: &Tensor, m: usize) -> Result<()> {
    if projection.cols() != m {
        return Err(Error::Mixture(format!(
            "projection {} does not map {m}-dim prototypes",
            projection.shape()
        )));
    }
    let h = projection.rows();
    if factor.rows() != h || factor.cols() != h {
        return Err(Error::Mixture(format!(
            "precision factor {} must be {h}x{h}",
            factor.shape()
        )));
    }
    for r in 0..h {
        for c in r + 1..h {
            if factor.get(r, c) != 0.0 {
                return Err(Error::Mixture(
                    "precision factor must be lower triangular".into(),
                ));
            }
        }
    }
    if !projection.is_finite() || !factor.is_finite() {
        return Err(Error::Mixture("non-finite entries".into()));
    }
    Ok(())
}

impl LatentMixture {
    pub fn new(
        prototypes: Tensor,
        projection: Tensor,
        precision_factor: Tensor,
        similarity: Similarity,
    ) -> Result<Self> {
        check_shared(&projection, &precision_factor, prototypes.rows())?;
        if !prototypes.is_finite() {
            return Err(Error::Mixture("non-finite prototypes".into()));
        }
        Ok(LatentMixture {
            prototypes,
            projection,
            precision_factor,
            similarity,
        })
    }

    /// Mixture with an identity precision factor.
    pub fn with_projection(
        prototypes: Tensor,
        projection: Tensor,
        similarity: Similarity,
    ) -> Result<Self> {
        let h = projection.rows();
        Self::new(prototypes, projection, Tensor::identity(h), similarity)
    }

    /// Prototype dimension `m`.
    pub fn prototype_dim(&self) -> usize {
        self.prototypes.rows()
    }

    /// Number of components `n`.
    pub fn components(&self) -> usize {
        self.prototypes.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.projection.rows()
    }
}

/// Per-bucket prototype matrices sharing one projection and precision.
#[derive(Clone, Debug, PartialEq)]
pub struct BucketedMixture {
    pub prototypes: Vec<Tensor>,
    pub projection: Tensor,
    pub precision_factor: Tensor,
    pub similarity: Similarity,
}

impl BucketedMixture {
    pub fn new(
        prototypes: Vec<Tensor>,
        projection: Tensor,
        precision_factor: Tensor,
        similarity: Similarity,
    ) -> Result<Self> {
        let first = prototypes
            .first()
            .ok_or_else(|| Error::Mixture("at least one bucket required".into()))?;
        if prototypes.iter().any(|m| m.shape() != first.shape()) {
            return Err(Error::Mixture(
                "all buckets must share prototype dimensions".into(),
            ));
        }
        check_shared(&projection, &precision_factor, first.rows())?;
        Ok(BucketedMixture {
            prototypes,
            projection,
            precision_factor,
            similarity,
        })
    }

    pub fn buckets(&self) -> usize {
        self.prototypes.len()
    }

    /// Prototype matrix of a 1-based bucket id.
    pub fn bucket_prototypes(&self, bucket: usize) -> Result<&Tensor> {
        bucket
            .checked_sub(1)
            .and_then(|k| self.prototypes.get(k))
            .ok_or(Error::UnknownBucket {
                bucket,
                buckets: self.prototypes.len(),
            })
    }

    /// The member mixture of a 1-based bucket id.
    pub fn bucket(&self, bucket: usize) -> Result<LatentMixture> {
        Ok(LatentMixture {
            prototypes: self.bucket_prototypes(bucket)?.clone(),
            projection: self.projection.clone(),
            precision_factor: self.precision_factor.clone(),
            similarity: self.similarity,
        })
    }
}

/// Scores, weights and retrieval of one lookup.
#[derive(Clone, Debug, PartialEq)]
pub struct MixtureReadout {
    pub scores: Vec<f64>,
    pub weights: Vec<f64>,
    pub retrieval: Vec<f64>,
}

/// Mixture parameters placed on a tape, with the projected prototypes
/// `D M` precomputed once per forward pass.
#[derive(Clone, Copy, Debug)]
pub struct MixtureVars {
    pub prototypes: Var,
    pub projected: Var,
    pub precision_factor: Option<Var>,
    ones: Option<Var>,
    pub similarity: Similarity,
}

/// Tape handles of one lookup.
#[derive(Clone, Copy, Debug)]
pub struct ReadoutVars {
    pub scores: Var,
    pub weights: Var,
    pub retrieval: Var,
}

impl MixtureVars {
    pub fn record(
        tape: &mut Tape,
        prototypes: Var,
        projection: Var,
        precision_factor: Option<Var>,
        similarity: Similarity,
    ) -> Result<Self> {
        let projected = tape.matmul(projection, prototypes)?;
        let (factor, ones) = match similarity {
            Similarity::Cosine => (None, None),
            Similarity::Mahalanobis => {
                let factor = precision_factor.ok_or_else(|| {
                    Error::Mixture("mahalanobis similarity needs a precision factor".into())
                })?;
                let n = tape.shape(prototypes).cols;
                (Some(factor), Some(tape.constant_filled(1, n, 1.0)))
            }
        };
        Ok(MixtureVars {
            prototypes,
            projected,
            precision_factor: factor,
            ones,
            similarity,
        })
    }

    /// Place a mixture's parameters on the tape as trainable leaves.
    pub fn from_mixture(tape: &mut Tape, mix: &LatentMixture) -> Result<Self> {
        let m = tape.param(&mix.prototypes);
        let d = tape.param(&mix.projection);
        let l = match mix.similarity {
            Similarity::Mahalanobis => Some(tape.param(&mix.precision_factor)),
            Similarity::Cosine => None,
        };
        Self::record(tape, m, d, l, mix.similarity)
    }

    pub fn scores(&self, tape: &mut Tape, h: Var) -> Result<Var> {
        let hs = tape.shape(h);
        let ps = tape.shape(self.projected);
        if !hs.is_vector() || hs.rows != ps.rows {
            return Err(Error::shape(
                "mixture lookup",
                format!("hidden state {hs} against projected prototypes {ps}"),
            ));
        }
        match self.similarity {
            Similarity::Cosine => tape.cosine(h, self.projected),
            Similarity::Mahalanobis => {
                let ones = self.ones.expect("recorded with mahalanobis");
                let tiled = tape.matmul(h, ones)?;
                let residuals = tape.sub(tiled, self.projected)?;
                tape.quadratic_form(residuals, self.precision_factor.expect("factor"))
            }
        }
    }

    pub fn lookup(&self, tape: &mut Tape, h: Var) -> Result<ReadoutVars> {
        let scores = self.scores(tape, h)?;
        let weights = tape.softmax(scores)?;
        let retrieval = tape.matmul(self.prototypes, weights)?;
        Ok(ReadoutVars {
            scores,
            weights,
            retrieval,
        })
    }
}

fn check_hidden(h: &[f64], mix: &LatentMixture) -> Result<()> {
    if h.len() != mix.hidden_dim() {
        return Err(Error::shape(
            "mixture lookup",
            format!(
                "hidden state of length {} against {}-dim projection",
                h.len(),
                mix.hidden_dim()
            ),
        ));
    }
    Ok(())
}

fn scores_with(h: &[f64], mix: &LatentMixture, kind: Similarity) -> Result<Vec<f64>> {
    check_hidden(h, mix)?;
    let mut tape = Tape::new();
    let vars = MixtureVars::from_mixture(
        &mut tape,
        &LatentMixture {
            similarity: kind,
            ..mix.clone()
        },
    )?;
    let hv = tape.constant_vector(h);
    let s = vars.scores(&mut tape, hv)?;
    Ok(tape.value(s).to_vec())
}

/// `s_i = -1/2 (h - D M_i)^T L L^T (h - D M_i)`.
pub fn similarity_mahalanobis(h: &[f64], mix: &LatentMixture) -> Result<Vec<f64>> {
    scores_with(h, mix, Similarity::Mahalanobis)
}

/// `s_i = h^T D M_i / (max(|h|, eps) max(|D M_i|, eps))`.
pub fn similarity_cosine(h: &[f64], mix: &LatentMixture) -> Result<Vec<f64>> {
    scores_with(h, mix, Similarity::Cosine)
}

pub fn mixture_lookup(h: &[f64], mix: &LatentMixture) -> Result<MixtureReadout> {
    check_hidden(h, mix)?;
    let mut tape = Tape::new();
    let vars = MixtureVars::from_mixture(&mut tape, mix)?;
    let hv = tape.constant_vector(h);
    let r = vars.lookup(&mut tape, hv)?;
    Ok(MixtureReadout {
        scores: tape.value(r.scores).to_vec(),
        weights: tape.value(r.weights).to_vec(),
        retrieval: tape.value(r.retrieval).to_vec(),
    })
}

pub fn bucketed_lookup(h: &[f64], bucket: usize, bm: &BucketedMixture) -> Result<MixtureReadout> {
    mixture_lookup(h, &bm.bucket(bucket)?)
}

/// Posterior `P(z = i | h)` of a Gaussian mixture with means `means`,
/// shared precision `precision` and uniform prior, evaluated as an
/// explicit density ratio.
pub fn gaussian_posterior_oracle(h: &[f64], means: &[Vec<f64>], precision: &Tensor) -> Result<Vec<f64>> {
    let d = h.len();
    if precision.rows() != d || precision.cols() != d {
        return Err(Error::shape(
            "gaussian posterior",
            format!("precision {} for {d}-dim state", precision.shape()),
        ));
    }
    if means.is_empty() || means.iter().any(|mu| mu.len() != d) {
        return Err(Error::shape("gaussian posterior", "means must match the state dimension"));
    }
    check_psd(precision)?;

    // Mahalanobis distances with the full precision matrix.
    let dist: Vec<f64> = means
        .iter()
        .map(|mu| {
            let r: Vec<f64> = h.iter().zip(mu).map(|(a, b)| a - b).collect();
            let mut q = 0.0;
            for a in 0..d {
                for b in 0..d {
                    q += r[a] * precision.get(a, b) * r[b];
                }
            }
            q
        })
        .collect();
    let prior = 1.0 / means.len() as f64;
    // The Gaussian normalizer (2 pi)^{-d/2} det(P)^{1/2} and the factor
    // exp(-q_min / 2) are shared by every component and cancel in the ratio.
    let q_min = dist.iter().copied().fold(f64::INFINITY, f64::min);
    let joint: Vec<f64> = dist
        .iter()
        .map(|q| prior * (-0.5 * (q - q_min)).exp())
        .collect();
    let evidence: f64 = joint.iter().sum();
    Ok(joint.into_iter().map(|p| p / evidence).collect())
}

/// Posterior of a von Mises-Fisher mixture with concentration 1 and uniform
/// prior; all vectors must lie on the unit sphere.
pub fn vmf_posterior_oracle(h: &[f64], means: &[Vec<f64>]) -> Result<Vec<f64>> {
    const TOL: f64 = 1e-9;
    let unit = |v: &[f64]| -> Result<()> {
        let n = dot(v, v).sqrt();
        if (n - 1.0).abs() > TOL {
            return Err(Error::NotUnitNorm(n));
        }
        Ok(())
    };
    unit(h)?;
    if means.is_empty() || means.iter().any(|mu| mu.len() != h.len()) {
        return Err(Error::shape("vmf posterior", "means must match the state dimension"));
    }
    for mu in means {
        unit(mu)?;
    }
    // exp(h^T mu) lies in [1/e, e] on the sphere; the normalizer cancels.
    let density: Vec<f64> = means.iter().map(|mu| dot(h, mu).exp()).collect();
    let total: f64 = density.iter().sum();
    Ok(density.into_iter().map(|p| p / total).collect())
}

/// Reject matrices that are asymmetric or have a clearly negative
/// eigenvalue (cyclic Jacobi sweeps).
fn check_psd(p: &Tensor) -> Result<()> {
    let d = p.rows();
    let scale = p.data().iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
    for a in 0..d {
        for b in 0..a {
            if (p.get(a, b) - p.get(b, a)).abs() > 1e-12 * scale {
                return Err(Error::NotPsd);
            }
        }
    }
    let eig = symmetric_eigenvalues(p);
    if eig.iter().any(|&l| l < -1e-10 * scale) {
        return Err(Error::NotPsd);
    }
    Ok(())
}

fn symmetric_eigenvalues(p: &Tensor) -> Vec<f64> {
    let d = p.rows();
    let mut a: Vec<f64> = p.data().to_vec();
    for _sweep in 0..100 {
        let off: f64 = (0..d)
            .flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * d + j].powi(2))
            .sum();
        if off < 1e-30 {
            break;
        }
        for i in 0..d {
            for j in i + 1..d {
                let aij = a[i * d + j];
                if aij.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[j * d + j] - a[i * d + i]) / (2.0 * aij);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let (aki, akj) = (a[k * d + i], a[k * d + j]);
                    a[k * d + i] = c * aki - s * akj;
                    a[k * d + j] = s * aki + c * akj;
                }
                for k in 0..d {
                    let (aik, ajk) = (a[i * d + k], a[j * d + k]);
                    a[i * d + k] = c * aik - s * ajk;
                    a[j * d + k] = s * aik + c * ajk;
                }
            }
        }
    }
    (0..d).map(|i| a[i * d + i]).collect()
}

/// Average Euclidean distance over all pairs of prototype columns.
pub fn center_dispersion(prototypes: &Tensor) -> Result<f64> {
    let n = prototypes.cols();
    if n < 2 {
        return Err(Error::TooFewComponents("center dispersion"));
    }
    let cols: Vec<Vec<f64>> = (0..n).map(|j| prototypes.column(j)).collect();
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            total += cols[i]
                .iter()
                .zip(&cols[j])
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
        }
    }
    Ok(2.0 * total / (n * (n - 1)) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tape::grad_check_many;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mix2(m_cols: &[Vec<f64>], d: Tensor, sim: Similarity) -> LatentMixture {
        LatentMixture::with_projection(Tensor::from_columns(m_cols).unwrap(), d, sim).unwrap()
    }

    fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Tensor {
        Tensor::new(
            crate::Shape::new(r, c),
            (0..r * c).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap()
    }

    fn random_lower(rng: &mut ChaCha8Rng, d: usize) -> Tensor {
        let mut l = Tensor::zeros(d, d);
        for a in 0..d {
            for b in 0..=a {
                let v: f64 = rng.gen_range(-0.5..0.5);
                l.set(a, b, if a == b { v.abs() + 0.2 } else { v });
            }
        }
        l
    }

    #[test]
    fn mahalanobis_examples() {
        let mix = mix2(&[vec![1.0, 2.0], vec![0.0, 0.0]], Tensor::identity(2), Similarity::Mahalanobis);
        let s = similarity_mahalanobis(&[1.0, 2.0], &mix).unwrap();
        assert_eq!(s[0], 0.0);
        assert!(s[1] < 0.0);

        let s = similarity_mahalanobis(&[2.0, 3.0], &mix).unwrap();
        assert_eq!(s[0], -1.0);

        let zero = LatentMixture::new(mix.prototypes.clone(), Tensor::identity(2), Tensor::zeros(2, 2), Similarity::Mahalanobis).unwrap();
        let r = mixture_lookup(&[5.0, -3.0], &zero).unwrap();
        assert_eq!(r.scores, vec![0.0, 0.0]);
        assert_eq!(r.weights, vec![0.5, 0.5]);
    }

    #[test]
    fn cosine_examples() {
        let mix = mix2(&[vec![1.0, 0.0], vec![0.0, 1.0]], Tensor::identity(2), Similarity::Cosine);
        assert_eq!(similarity_cosine(&[1.0, 0.0], &mix).unwrap(), vec![1.0, 0.0]);
        let s = similarity_cosine(&[3.0, 0.0], &mix).unwrap();
        assert!((s[0] - 1.0).abs() < 1e-15 && s[1] == 0.0);
        let s = similarity_cosine(&[0.0, 0.0], &mix).unwrap();
        assert_eq!(s, vec![0.0, 0.0]);
        assert!(similarity_cosine(&[1.0, 0.0, 0.0], &mix).is_err());
    }

    #[test]
    fn lookup_examples() {
        let m = vec![vec![1.0, 2.0], vec![3.0, -4.0], vec![0.5, 0.5]];
        let mix = mix2(&m, Tensor::identity(2), Similarity::Cosine);
        // h = 0 gives equal scores
        let r = mixture_lookup(&[0.0, 0.0], &mix).unwrap();
        for w in &r.weights {
            assert!((w - 1.0 / 3.0).abs() < 1e-15);
        }
        assert!((r.retrieval[0] - 1.5).abs() < 1e-15);
        assert!((r.retrieval[1] + 0.5).abs() < 1e-15);

        let single = mix2(&[vec![0.3, -0.7]], Tensor::identity(2), Similarity::Cosine);
        let r = mixture_lookup(&[1.0, 1.0], &single).unwrap();
        assert_eq!(r.weights, vec![1.0]);
        assert_eq!(r.retrieval, vec![0.3, -0.7]);
    }

    #[test]
    fn lookup_ln2_scores() {
        // Mahalanobis with L = sqrt(2 ln 2) I and h at M_1, M_2 one unit
        // away: scores [0, -ln 2] shifted form -> weights [2/3, 1/3].
        let k = (2.0 * 2f64.ln()).sqrt();
        let mut l = Tensor::identity(1);
        l.set(0, 0, k);
        let m = Tensor::from_columns(&[vec![0.0], vec![1.0]]).unwrap();
        let mix = LatentMixture::new(m, Tensor::identity(1), l, Similarity::Mahalanobis).unwrap();
        let r = mixture_lookup(&[0.0], &mix).unwrap();
        assert!((r.scores[1] + 2f64.ln()).abs() < 1e-15);
        assert!((r.weights[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.retrieval[0] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn bucketed_examples() {
        let d = Tensor::identity(2);
        let b1 = Tensor::from_columns(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let b2 = Tensor::from_columns(&[vec![-1.0, 2.0], vec![0.5, 0.5]]).unwrap();
        let single = BucketedMixture::new(vec![b1.clone()], d.clone(), Tensor::identity(2), Similarity::Cosine).unwrap();
        let plain = LatentMixture::with_projection(b1.clone(), d.clone(), Similarity::Cosine).unwrap();
        let h = [0.3, 0.9];
        assert_eq!(bucketed_lookup(&h, 1, &single).unwrap(), mixture_lookup(&h, &plain).unwrap());

        let two = BucketedMixture::new(vec![b1, b2], d, Tensor::identity(2), Similarity::Cosine).unwrap();
        assert_ne!(bucketed_lookup(&h, 1, &two).unwrap(), bucketed_lookup(&h, 2, &two).unwrap());
        assert!(matches!(
            bucketed_lookup(&h, 3, &two),
            Err(Error::UnknownBucket { bucket: 3, buckets: 2 })
        ));
        assert!(bucketed_lookup(&h, 0, &two).is_err());
    }

    #[test]
    fn gaussian_oracle_examples() {
        let means = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]];
        let post = gaussian_posterior_oracle(&[0.0, 0.0], &means, &Tensor::identity(2)).unwrap();
        for p in post {
            assert!((p - 0.25).abs() < 1e-15);
        }
        let far = vec![vec![0.0, 0.0], vec![10.0, 0.0], vec![0.0, -10.0]];
        let post = gaussian_posterior_oracle(&[0.0, 0.0], &far, &Tensor::identity(2)).unwrap();
        assert!(post[0] >= 1.0 - 1e-10);

        let mut bad = Tensor::identity(2);
        bad.set(1, 1, -1.0);
        assert!(matches!(
            gaussian_posterior_oracle(&[0.0, 0.0], &means, &bad),
            Err(Error::NotPsd)
        ));
    }

    #[test]
    fn vmf_oracle_examples() {
        let post = vmf_posterior_oracle(&[1.0, 0.0], &[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let e = std::f64::consts::E;
        assert!((post[0] - e / (e + 1.0)).abs() < 1e-15);
        assert!((post[0] - 0.7311).abs() < 1e-4 && (post[1] - 0.2689).abs() < 1e-4);
        let same = vmf_posterior_oracle(&[0.0, 1.0], &vec![vec![0.6, 0.8]; 3]).unwrap();
        assert!(same.iter().all(|p| (p - 1.0 / 3.0).abs() < 1e-15));
        assert!(matches!(
            vmf_posterior_oracle(&[2.0, 0.0], &[vec![1.0, 0.0]]),
            Err(Error::NotUnitNorm(_))
        ));
    }

    #[test]
    fn dispersion_examples() {
        let same = Tensor::from_columns(&[vec![1.0, 2.0], vec![1.0, 2.0]]).unwrap();
        assert_eq!(center_dispersion(&same).unwrap(), 0.0);
        let basis = Tensor::from_columns(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(center_dispersion(&basis).unwrap(), 2f64.sqrt());
        let line = Tensor::from_columns(&[vec![0.0], vec![1.0], vec![3.0]]).unwrap();
        assert_eq!(center_dispersion(&line).unwrap(), 2.0);
        let one = Tensor::from_columns(&[vec![0.0]]).unwrap();
        assert!(center_dispersion(&one).is_err());
    }

    #[test]
    fn rejects_upper_triangular_factor() {
        let mut l = Tensor::identity(2);
        l.set(0, 1, 0.5);
        let m = Tensor::zeros(2, 2);
        assert!(LatentMixture::new(m, Tensor::identity(2), l, Similarity::Mahalanobis).is_err());
    }

    #[test]
    fn eq9_equivalence_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let n = rng.gen_range(2..=10);
            let m = rng.gen_range(1..=6);
            let mix = LatentMixture::new(random(&mut rng, m, n), random(&mut rng, 8, m), random_lower(&mut rng, 8), Similarity::Mahalanobis).unwrap();
            let h: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let w = mixture_lookup(&h, &mix).unwrap().weights;
            let dm = mix.projection.matmul(&mix.prototypes).unwrap();
            let means: Vec<Vec<f64>> = (0..n).map(|j| dm.column(j)).collect();
            let prec = mix.precision_factor.matmul(&mix.precision_factor.transpose()).unwrap();
            let post = gaussian_posterior_oracle(&h, &means, &prec).unwrap();
            for (a, b) in w.iter().zip(&post) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn lookup_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for sim in [Similarity::Cosine, Similarity::Mahalanobis] {
            let pts = vec![
                random(&mut rng, 5, 1),
                random(&mut rng, 3, 4),
                random(&mut rng, 5, 3),
                random_lower(&mut rng, 5),
            ];
            let weights = random(&mut rng, 3, 1);
            let report = grad_check_many(
                |t, v| {
                    let mix = MixtureVars::record(t, v[1], v[2], Some(v[3]), sim)?;
                    let r = mix.lookup(t, v[0])?;
                    let c = t.constant(&weights);
                    let proj = t.mul(r.retrieval, c)?;
                    let a = t.sum(proj)?;
                    let b = t.sum(r.scores)?;
                    let b = t.scale(b, 0.3)?;
                    t.add(a, b)
                },
                &pts,
                1e-5,
            )
            .unwrap();
            assert!(report.max_relative_error < 1e-5, "{sim:?}: {report:?}");
        }
    }

    proptest! {
        #[test]
        fn weights_on_simplex_and_retrieval_in_hull(
            seed in any::<u64>(),
            n in 2usize..8,
            m in 1usize..5,
            mahal in any::<bool>(),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sim = if mahal { Similarity::Mahalanobis } else { Similarity::Cosine };
            let mix = LatentMixture::new(random(&mut rng, m, n), random(&mut rng, 4, m), random_lower(&mut rng, 4), sim).unwrap();
            let h: Vec<f64> = (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let r = mixture_lookup(&h, &mix).unwrap();
            let total: f64 = r.weights.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!(r.weights.iter().all(|&w| w > 0.0 && w <= 1.0));
            for row in 0..m {
                let vals: Vec<f64> = (0..n).map(|j| mix.prototypes.get(row, j)).collect();
                let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(r.retrieval[row] >= lo - 1e-12 && r.retrieval[row] <= hi + 1e-12);
            }
        }

        #[test]
        fn softmax_shift_invariance(
            scores in proptest::collection::vec(-20.0f64..20.0, 2..10),
            shift in -50.0f64..50.0,
        ) {
            let mut t = Tape::new();
            let a = t.constant_vector(&scores);
            let shifted: Vec<f64> = scores.iter().map(|s| s + shift).collect();
            let b = t.constant_vector(&shifted);
            let wa = t.softmax(a).unwrap();
            let wb = t.softmax(b).unwrap();
            for (x, y) in t.value(wa).iter().zip(t.value(wb)) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
