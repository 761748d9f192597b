//! InfoNCE lower-bound estimator with an inner-product critic, the
//! per-sample quantities of the embedding-space mutual-information bound,
//! and the check that the bound holds (with equality at the original
//! encoder).

use crate::models::EncoderParams;
use crate::numerics::Tensor;
use crate::{Error, Result};
use serde::Serialize;

fn check_unit_rows(name: &'static str, t: &Tensor) -> Result<()> {
    let (n, _) = t.dims2()?;
    for i in 0..n {
        let norm: f64 = t.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidArgument(format!(
                "{}: row {} has norm {} (unit expected)",
                name, i, norm
            )));
        }
    }
    Ok(())
}

/// InfoNCE estimate over K paired unit-norm embeddings:
/// log K − (1/K) Σ_i [log Σ_j e^{a_i·b_j} − a_i·b_i]. Never exceeds log K.
pub fn infonce_estimate(a: &Tensor, b: &Tensor) -> Result<f64> {
    let (k, d) = a.dims2()?;
    let (k2, d2) = b.dims2()?;
    if k != k2 || d != d2 {
        return Err(Error::ShapeMismatch {
            op: "infonce_estimate",
            detail: format!("{:?} vs {:?}", a.shape(), b.shape()),
        });
    }
    if k == 0 {
        return Err(Error::InvalidArgument("infonce_estimate: empty batch".into()));
    }
    check_unit_rows("infonce_estimate lhs", a)?;
    check_unit_rows("infonce_estimate rhs", b)?;

    let mut total = 0.0;
    for i in 0..k {
        let ai = a.row(i);
        let mut diag = 0.0;
        let mut logsum = f64::NEG_INFINITY;
        let mut sums = Vec::with_capacity(k);
        for j in 0..k {
            let dot: f64 = ai.iter().zip(b.row(j)).map(|(x, y)| x * y).sum();
            if j == i {
                diag = dot;
            }
            sums.push(dot);
            logsum = logsum.max(dot);
        }
        let z: f64 = sums.iter().map(|s| (s - logsum).exp()).sum();
        total += logsum + z.ln() - diag;
    }
    Ok((k as f64).ln() - total / k as f64)
}

/// Per-sample bound components for one (target, original) encoder pair:
/// `eps[i]` is the embedding distance between the two encoders on the
/// i-th masked image; `delta[i]` the distance between the target encoding
/// of the i-th masked image and the original encoding of the i-th masked
/// noise draw; `r[i][j]` and `f[i][j]` are the original-encoder Gram
/// matrices of the images and the noise draws.
#[derive(Debug, Clone)]
pub struct BoundComponents {
    pub eps: Vec<f64>,
    pub delta: Vec<f64>,
    pub r_matrix: Vec<Vec<f64>>,
    pub f_matrix: Vec<Vec<f64>>,
}

fn row_distance(a: &Tensor, b: &Tensor, i: usize) -> f64 {
    a.row(i)
        .iter()
        .zip(b.row(i))
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn gram(t: &Tensor) -> Vec<Vec<f64>> {
    let (n, _) = (t.shape()[0], t.shape()[1]);
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| t.row(i).iter().zip(t.row(j)).map(|(x, y)| x * y).sum())
                .collect()
        })
        .collect()
}

/// Computes the bound quantities from masked image and noise batches.
pub fn bound_components(
    encoder: &EncoderParams,
    original: &EncoderParams,
    images_masked: &Tensor,
    noise_masked: &Tensor,
) -> Result<BoundComponents> {
    if images_masked.shape() != noise_masked.shape() {
        return Err(Error::ShapeMismatch {
            op: "bound_components",
            detail: format!("{:?} vs {:?}", images_masked.shape(), noise_masked.shape()),
        });
    }
    let target = encoder.encode(images_masked)?;
    let anchor = original.encode(images_masked)?;
    let anchor_noise = original.encode(noise_masked)?;
    let k = target.shape()[0];
    let eps = (0..k).map(|i| row_distance(&target, &anchor, i)).collect();
    let delta = (0..k).map(|i| row_distance(&target, &anchor_noise, i)).collect();
    Ok(BoundComponents {
        eps,
        delta,
        r_matrix: gram(&anchor),
        f_matrix: gram(&anchor_noise),
    })
}

/// One side of the bound: the InfoNCE value (left) against its
/// embedding-distance relaxation (right).
#[derive(Debug, Clone, Serialize)]
pub struct TheoremSide {
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Theorem1Report {
    pub k: usize,
    pub retain: TheoremSide,
    pub forget: TheoremSide,
    /// Maximum |lhs − rhs| on the retain side when the encoders coincide.
    pub holds: bool,
}

fn relaxed_rhs(dist: &[f64], gram: &[Vec<f64>]) -> f64 {
    let k = dist.len();
    let mut total = 0.0;
    for i in 0..k {
        let mut logsum = f64::NEG_INFINITY;
        let exps: Vec<f64> = (0..k).map(|j| dist[j] + gram[i][j]).collect();
        for &e in &exps {
            logsum = logsum.max(e);
        }
        let z: f64 = exps.iter().map(|e| (e - logsum).exp()).sum();
        // log( e^{d_i^2/2 - 1} Σ_j e^{d_j + G_ij} )
        total += dist[i] * dist[i] / 2.0 - 1.0 + logsum + z.ln();
    }
    (k as f64).ln() - total / k as f64
}

/// Evaluates both sides of the bound on one batch. The same batch feeds
/// the estimator and the relaxation, so the inequality must hold exactly
/// (up to roundoff), with equality on the retain side when `encoder` and
/// `original` coincide.
pub fn verify_theorem1(
    encoder: &EncoderParams,
    original: &EncoderParams,
    retain_masked: &Tensor,
    forget_masked: &Tensor,
    noise_masked: &Tensor,
    tolerance: f64,
) -> Result<Theorem1Report> {
    let k = retain_masked.shape()[0];
    if forget_masked.shape()[0] != k || noise_masked.shape()[0] != k {
        return Err(Error::ShapeMismatch {
            op: "verify_theorem1",
            detail: "batch sizes differ".into(),
        });
    }

    // retain: positives pair the original and target encodings of x_r
    let retain_parts = bound_components(encoder, original, retain_masked, noise_masked)?;
    let anchor_r = original.encode(retain_masked)?;
    let target_r = encoder.encode(retain_masked)?;
    let lhs_r = infonce_estimate(&anchor_r, &target_r)?;
    let rhs_r = relaxed_rhs(&retain_parts.eps, &retain_parts.r_matrix);

    // forget: positives pair the original encoding of noise with the
    // target encoding of x_f
    let forget_parts = bound_components(encoder, original, forget_masked, noise_masked)?;
    let anchor_n = original.encode(noise_masked)?;
    let target_f = encoder.encode(forget_masked)?;
    let lhs_f = infonce_estimate(&anchor_n, &target_f)?;
    let rhs_f = relaxed_rhs(&forget_parts.delta, &forget_parts.f_matrix);

    let retain = TheoremSide { lhs: lhs_r, rhs: rhs_r, margin: lhs_r - rhs_r };
    let forget = TheoremSide { lhs: lhs_f, rhs: rhs_f, margin: lhs_f - rhs_f };
    let holds = retain.margin >= -tolerance && forget.margin >= -tolerance;
    Ok(Theorem1Report { k, retain, forget, holds })
}
