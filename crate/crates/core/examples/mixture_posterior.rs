//! Soft assignments of the mixture layer next to the closed-form
//! posteriors they correspond to.
//!
//!     cargo run --example mixture_posterior

use mrnn::mixture::{
    bucketed_lookup, center_dispersion, gaussian_posterior_oracle, mixture_lookup, vmf_posterior_oracle,
    BucketedMixture, LatentMixture, Similarity,
};
use mrnn::{Result, Tensor};

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn show(label: &str, w: &[f64]) {
    let cells: Vec<String> = w.iter().map(|p| format!("{p:.6}")).collect();
    println!("{label:<22} [{}]", cells.join(", "));
}

fn main() -> Result<()> {
    // Three prototypes in a 2-d latent space, projected into a 3-d hidden space.
    let prototypes = Tensor::from_columns(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, -1.0]])?;
    let projection = Tensor::from_rows(&[vec![1.0, 0.5], vec![0.0, 1.0], vec![0.5, 0.0]])?;
    let factor = Tensor::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.3, 0.8, 0.0], vec![-0.2, 0.1, 1.2]])?;
    let h = [0.4, -0.1, 0.7];

    let gauss = LatentMixture::new(prototypes.clone(), projection.clone(), factor.clone(), Similarity::Mahalanobis)?;
    let r = mixture_lookup(&h, &gauss)?;
    let dm = projection.matmul(&prototypes)?;
    let means: Vec<Vec<f64>> = (0..dm.cols()).map(|j| dm.column(j)).collect();
    let precision = factor.matmul(&factor.transpose())?;
    show("mahalanobis softmax", &r.weights);
    show("gaussian posterior", &gaussian_posterior_oracle(&h, &means, &precision)?);
    println!("retrieval p            {:?}", r.retrieval);

    // On the unit sphere cosine scores give a von Mises-Fisher posterior.
    let mus = [unit(vec![1.0, 0.2, 0.0]), unit(vec![0.0, 1.0, 1.0]), unit(vec![-1.0, 0.0, 0.3])];
    let sphere = LatentMixture::with_projection(Tensor::from_columns(&mus)?, Tensor::identity(3), Similarity::Cosine)?;
    let hu = unit(h.to_vec());
    show("cosine softmax", &mixture_lookup(&hu, &sphere)?.weights);
    show("vmf posterior", &vmf_posterior_oracle(&hu, &mus)?);

    // Bucketed mixtures share the projection; only the prototypes differ.
    let shifted = Tensor::from_columns(&[vec![2.0, 2.0], vec![-2.0, 0.5], vec![0.0, -3.0]])?;
    let bucketed = BucketedMixture::new(vec![prototypes.clone(), shifted], projection, factor, Similarity::Cosine)?;
    for bucket in 1..=2 {
        let r = bucketed_lookup(&h, bucket, &bucketed)?;
        show(&format!("bucket {bucket} weights"), &r.weights);
        println!("bucket {bucket} dispersion    {:.4}", center_dispersion(bucketed.bucket_prototypes(bucket)?)?);
    }
    Ok(())
}
