//! Evaluation metrics: Fréchet distance over probe embeddings, an
//! inception-score analog from probe class posteriors, mean embedding
//! cosine similarity, raw MSE/PSNR, and CSV embedding export.

use crate::datasets::{Dataset, ImageBatch, Split, Splits};
use crate::models::{DecoderParams, EncoderParams, ProbeParams};
use crate::numerics::{sqrtm_psd, Tensor};
use crate::transforms::{apply_mask_rows, make_mask, MaskSpec};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

/// Ridge added to fitted covariances; heldout splits are small relative to
/// the embedding dimension and near-singular fits destabilize the matrix
/// root inside the Fréchet distance.
const COV_SHRINKAGE: f64 = 1e-6;

/// Mean and covariance of a set of embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMoments {
    pub mean: Vec<f64>,
    pub cov: Tensor,
    pub count: usize,
}

impl GaussianMoments {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// True when too few samples were available for a full-rank estimate.
    pub fn rank_deficient(&self) -> bool {
        self.count < self.dim() + 1
    }
}

/// Per-split metric values for one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    pub fid_analog: f64,
    pub is_analog: f64,
    pub clip_analog: f64,
    pub mse: f64,
    pub psnr: f64,
    pub sample_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub model_tag: String,
    pub config_hash: String,
    pub retain: SplitMetrics,
    pub forget: SplitMetrics,
}

/// Sample mean and unbiased covariance (divide by n−1), symmetrized, with
/// the stabilizing ridge on the diagonal.
pub fn fit_moments(embeddings: &Tensor) -> Result<GaussianMoments> {
    let (n, d) = embeddings.dims2()?;
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "fit_moments: need at least 2 samples, got {}",
            n
        )));
    }
    let mut mean = vec![0.0; d];
    for i in 0..n {
        for (m, v) in mean.iter_mut().zip(embeddings.row(i)) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    let mut cov = vec![0.0; d * d];
    for i in 0..n {
        let row = embeddings.row(i);
        for a in 0..d {
            let da = row[a] - mean[a];
            for b in a..d {
                cov[a * d + b] += da * (row[b] - mean[b]);
            }
        }
    }
    let denom = (n - 1) as f64;
    for a in 0..d {
        for b in a..d {
            let v = cov[a * d + b] / denom;
            cov[a * d + b] = v;
            cov[b * d + a] = v;
        }
    }
    for a in 0..d {
        cov[a * d + a] += COV_SHRINKAGE;
    }
    Ok(GaussianMoments { mean, cov: Tensor::new(vec![d, d], cov)?, count: n })
}

/// Fréchet distance between two Gaussians:
/// ‖μ₁−μ₂‖² + Tr(Σ₁+Σ₂−2(Σ₁Σ₂)^{1/2}), with the cross term computed as
/// sqrtm(Σ₁^{1/2} Σ₂ Σ₁^{1/2}). Clamped at zero against roundoff.
pub fn frechet_distance(a: &GaussianMoments, b: &GaussianMoments) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::ShapeMismatch {
            op: "frechet_distance",
            detail: format!("{} vs {} dims", a.dim(), b.dim()),
        });
    }
    let d = a.dim();
    let mean_term: f64 = a
        .mean
        .iter()
        .zip(&b.mean)
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    let s1 = sqrtm_psd(&a.cov)?;
    let inner = s1.matmul2(&b.cov)?.matmul2(&s1)?;
    // symmetrize away the product roundoff before taking the root
    let mut sym = inner.clone();
    for i in 0..d {
        for j in 0..d {
            let v = 0.5 * (inner.get2(i, j) + inner.get2(j, i));
            sym.set2(i, j, v);
        }
    }
    let cross = sqrtm_psd(&sym)?;
    let mut trace = 0.0;
    for i in 0..d {
        trace += a.cov.get2(i, i) + b.cov.get2(i, i) - 2.0 * cross.get2(i, i);
    }
    Ok((mean_term + trace).max(0.0))
}

/// Inception-score analog from a table of class posteriors:
/// exp of the mean KL between each row and the marginal row.
pub fn inception_score_from_posteriors(posteriors: &Tensor) -> Result<f64> {
    let (n, _) = posteriors.dims2()?;
    if n == 0 {
        return Err(Error::InvalidArgument("inception score needs at least one row".into()));
    }
    let c = posteriors.shape()[1];
    let mut marginal = vec![0.0; c];
    for i in 0..n {
        for (m, p) in marginal.iter_mut().zip(posteriors.row(i)) {
            *m += p / n as f64;
        }
    }
    let mut mean_kl = 0.0;
    for i in 0..n {
        let mut kl = 0.0;
        for (p, q) in posteriors.row(i).iter().zip(&marginal) {
            if *p > 0.0 {
                kl += p * (p / q).ln();
            }
        }
        mean_kl += kl / n as f64;
    }
    Ok(mean_kl.exp())
}

/// IS-analog of a set of images under the probe.
pub fn is_analog(probe: &ProbeParams, images: &ImageBatch, patch: usize) -> Result<f64> {
    let flat = images.patch_flatten(patch)?;
    inception_score_from_posteriors(&probe.posteriors(&flat)?)
}

/// Mean cosine similarity between paired rows.
pub fn mean_cosine(a: &Tensor, b: &Tensor) -> Result<f64> {
    let (n, d) = a.dims2()?;
    let (n2, d2) = b.dims2()?;
    if n != n2 || d != d2 {
        return Err(Error::ShapeMismatch {
            op: "mean_cosine",
            detail: format!("{:?} vs {:?}", a.shape(), b.shape()),
        });
    }
    let mut total = 0.0;
    for i in 0..n {
        let (ra, rb) = (a.row(i), b.row(i));
        let dot: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
        let na: f64 = ra.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = rb.iter().map(|x| x * x).sum::<f64>().sqrt();
        if na == 0.0 || nb == 0.0 {
            // zero embeddings contribute zero similarity
            continue;
        }
        total += dot / (na * nb);
    }
    Ok(total / n as f64)
}

/// Mean probe-embedding cosine similarity between paired generated and
/// reference images.
pub fn clip_analog(
    probe: &ProbeParams,
    generated: &ImageBatch,
    reference: &ImageBatch,
    patch: usize,
) -> Result<f64> {
    if generated.len() != reference.len() {
        return Err(Error::ShapeMismatch {
            op: "clip_analog",
            detail: format!("{} generated vs {} reference", generated.len(), reference.len()),
        });
    }
    let eg = probe.embed(&generated.patch_flatten(patch)?)?;
    let er = probe.embed(&reference.patch_flatten(patch)?)?;
    mean_cosine(&eg, &er)
}

pub fn mse_between(a: &ImageBatch, b: &ImageBatch) -> Result<f64> {
    if a.len() != b.len() || a.height() != b.height() || a.width() != b.width() {
        return Err(Error::ShapeMismatch {
            op: "mse_between",
            detail: "image stacks differ in shape".into(),
        });
    }
    let n = a.pixels().len() as f64;
    let s: f64 = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(s / n)
}

/// PSNR with peak value 1.0.
pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    }
}

/// Runs the model over masked heldout images of one split and scores the
/// reconstructions against the ground truth.
pub fn evaluate_split(
    encoder: &EncoderParams,
    decoder: &DecoderParams,
    probe: &ProbeParams,
    ground_truth: &ImageBatch,
    mask_spec: &MaskSpec,
    patch: usize,
) -> Result<SplitMetrics> {
    if ground_truth.is_empty() {
        return Err(Error::InvalidArgument("evaluate_split: empty heldout".into()));
    }
    let grid = (ground_truth.height() / patch, ground_truth.width() / patch);
    let mask = make_mask(mask_spec, grid)?;
    let flat = ground_truth.patch_flatten(patch)?;
    let masked = apply_mask_rows(&flat, &mask, patch * patch)?;
    let recon_flat = decoder.decode_clamped(&encoder.encode(&masked)?)?;
    let recon = ImageBatch::from_patch_flat(
        &recon_flat,
        ground_truth.labels().to_vec(),
        ground_truth.height(),
        ground_truth.width(),
        patch,
    )?;

    let emb_recon = probe.embed(&recon_flat)?;
    let emb_truth = probe.embed(&flat)?;
    let fid = frechet_distance(&fit_moments(&emb_recon)?, &fit_moments(&emb_truth)?)?;
    let is_score = inception_score_from_posteriors(&probe.posteriors(&recon_flat)?)?;
    let clip = mean_cosine(&emb_recon, &emb_truth)?;
    let mse = mse_between(&recon, ground_truth)?;
    Ok(SplitMetrics {
        fid_analog: fid,
        is_analog: is_score,
        clip_analog: clip,
        mse,
        psnr: psnr_from_mse(mse),
        sample_count: ground_truth.len(),
    })
}

/// Full retain/forget heldout evaluation of one model.
pub fn evaluate_model(
    encoder: &EncoderParams,
    decoder: &DecoderParams,
    probe: &ProbeParams,
    dataset: &Dataset,
    splits: &Splits,
    mask_spec: &MaskSpec,
    model_tag: &str,
    config_hash: &str,
) -> Result<MetricReport> {
    let patch = dataset.config.patch_size;
    let retain = evaluate_split(
        encoder,
        decoder,
        probe,
        &splits.heldout(dataset, Split::Retain),
        mask_spec,
        patch,
    )?;
    let forget = evaluate_split(
        encoder,
        decoder,
        probe,
        &splits.heldout(dataset, Split::Forget),
        mask_spec,
        patch,
    )?;
    Ok(MetricReport {
        model_tag: model_tag.to_string(),
        config_hash: config_hash.to_string(),
        retain,
        forget,
    })
}

/// Writes one row per image: split tag, label, then the probe embedding.
/// Values use the shortest round-trip decimal form.
pub fn export_embeddings(
    probe: &ProbeParams,
    groups: &[(&str, &ImageBatch)],
    patch: usize,
    path: &Path,
) -> Result<usize> {
    let p = path.display().to_string();
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(&p, e))?;
    let d = probe.embed_dim();
    let header: Vec<String> = (0..d).map(|i| format!("e{}", i)).collect();
    let mut out = format!("split,label,{}\n", header.join(","));
    let mut rows = 0;
    for (tag, batch) in groups {
        let emb = probe.embed(&batch.patch_flatten(patch)?)?;
        for i in 0..batch.len() {
            let values: Vec<String> = emb.row(i).iter().map(|v| format!("{}", v)).collect();
            out.push_str(&format!("{},{},{}\n", tag, batch.labels()[i], values.join(",")));
            rows += 1;
        }
    }
    file.write_all(out.as_bytes()).map_err(|e| Error::io(&p, e))?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    fn moments(mean: Vec<f64>, diag: Vec<f64>) -> GaussianMoments {
        let d = mean.len();
        let mut cov = Tensor::zeros(vec![d, d]);
        for i in 0..d {
            cov.set2(i, i, diag[i]);
        }
        GaussianMoments { mean, cov, count: 1000 }
    }

    #[test]
    fn fit_moments_two_points() {
        // {0, 2} in 1-D: mean 1, unbiased variance 2
        let e = Tensor::new(vec![2, 1], vec![0.0, 2.0]).unwrap();
        let m = fit_moments(&e).unwrap();
        assert_eq!(m.mean, vec![1.0]);
        assert!((m.cov.get2(0, 0) - 2.0).abs() < 1e-5);
    }

    #[test]
    fn fit_moments_identical_points_and_shift() {
        let e = Tensor::new(vec![3, 2], vec![1.0, 2.0, 1.0, 2.0, 1.0, 2.0]).unwrap();
        let m = fit_moments(&e).unwrap();
        assert!(m.cov.get2(0, 0).abs() < 1e-5 && m.cov.get2(1, 1).abs() < 1e-5);

        let mut rng = Rng::new(8);
        let a = rng.standard_normal(vec![20, 3]);
        let shifted = Tensor::new(
            vec![20, 3],
            a.data().iter().enumerate().map(|(i, v)| v + (i % 3) as f64).collect(),
        )
        .unwrap();
        let ma = fit_moments(&a).unwrap();
        let ms = fit_moments(&shifted).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((ma.cov.get2(i, j) - ms.cov.get2(i, j)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn frechet_identity_and_symmetry() {
        let a = moments(vec![0.5, -1.0], vec![1.0, 2.0]);
        let b = moments(vec![1.5, 0.0], vec![2.0, 0.5]);
        assert_eq!(frechet_distance(&a, &a).unwrap(), 0.0);
        let ab = frechet_distance(&a, &b).unwrap();
        let ba = frechet_distance(&b, &a).unwrap();
        assert!((ab - ba).abs() < 1e-10);
        assert!(ab > 0.0);
    }

    #[test]
    fn frechet_mean_shift_closed_form() {
        // equal covariances: distance is exactly the squared mean gap
        let a = moments(vec![0.0, 0.0, 0.0], vec![1.0, 1.0, 1.0]);
        let b = moments(vec![1.0, -2.0, 0.5], vec![1.0, 1.0, 1.0]);
        let want = 1.0 + 4.0 + 0.25;
        assert!((frechet_distance(&a, &b).unwrap() - want).abs() < 1e-8);
    }

    #[test]
    fn frechet_one_dimensional_closed_form() {
        // (μ₁−μ₂)² + (σ₁−σ₂)²
        let a = moments(vec![0.3], vec![1.44]);
        let b = moments(vec![-0.7], vec![4.0]);
        let want = 1.0 + (1.2f64 - 2.0).powi(2);
        assert!((frechet_distance(&a, &b).unwrap() - want).abs() < 1e-8);
    }

    #[test]
    fn inception_score_bounds_and_hand_cases() {
        // all rows equal the marginal: score 1
        let uniform = Tensor::new(vec![4, 3], vec![1.0 / 3.0; 12]).unwrap();
        assert!((inception_score_from_posteriors(&uniform).unwrap() - 1.0).abs() < 1e-9);

        // one-hot rows covering all classes: score = #classes
        let mut onehot = Tensor::zeros(vec![3, 3]);
        for i in 0..3 {
            onehot.set2(i, i, 1.0);
        }
        assert!((inception_score_from_posteriors(&onehot).unwrap() - 3.0).abs() < 1e-9);
    }

    #[test]
    fn cosine_hand_cases() {
        let a = Tensor::new(vec![1, 2], vec![1.0, 0.0]).unwrap();
        let b = Tensor::new(vec![1, 2], vec![0.5f64.sqrt(), 0.5f64.sqrt()]).unwrap();
        let got = mean_cosine(&a, &b).unwrap();
        assert!((got - 0.5f64.sqrt()).abs() < 1e-12);

        let o = Tensor::new(vec![1, 2], vec![0.0, 1.0]).unwrap();
        assert!(mean_cosine(&a, &o).unwrap().abs() < 1e-12);
        assert!((mean_cosine(&a, &a).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn psnr_conventions() {
        assert!((psnr_from_mse(0.01) - 20.0).abs() < 1e-12);
        assert!(psnr_from_mse(0.0).is_infinite());
    }

    #[test]
    fn export_embeddings_roundtrip() {
        use crate::datasets::{gen_dataset, DatasetConfig};
        use crate::models::{ProbeConfig, ProbeParams};
        let cfg = DatasetConfig { num_classes: 4, samples_per_class: 8, ..Default::default() };
        let d = gen_dataset(&cfg, 5).unwrap();
        let probe_cfg = ProbeConfig { num_classes: 4, ..Default::default() };
        let probe = ProbeParams::init(&probe_cfg, &mut Rng::new(3));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.csv");
        let rows = export_embeddings(&probe, &[("retain", d.images())], 4, &path).unwrap();
        assert_eq!(rows, 32);

        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        assert_eq!(header.split(',').count(), 2 + probe.embed_dim());
        // values reparse exactly (shortest round-trip formatting)
        let emb = probe.embed(&d.images().patch_flatten(4).unwrap()).unwrap();
        let first = lines.next().unwrap();
        let parsed: Vec<f64> = first.split(',').skip(2).map(|t| t.parse().unwrap()).collect();
        assert_eq!(parsed, emb.row(0));
        assert_eq!(text.lines().count(), 33);
    }
}
