//! The information-removal operator: patch-grid masks applied to image
//! batches. A mask marks whole patches as removed; applying it zero-fills
//! the removed patches and leaves everything else untouched, so application
//! is idempotent.

use crate::datasets::ImageBatch;
use crate::numerics::{Rng, Tensor};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Mask pattern over a patch grid.
///
/// * `CenterCrop { size }` removes a centered `size`×`size` patch block.
/// * `Random { ratio, seed }` removes exactly `round(ratio·rows·cols)`
///   patches drawn without replacement.
/// * `Extend*` remove whole rows/columns on one side, turning
///   reconstruction into a directional extension task.
/// * `Outpaint { size }` keeps only the centered block and removes the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MaskSpec {
    CenterCrop { size: usize },
    Random { ratio: f64, seed: u64, #[serde(default)] per_image: bool },
    ExtendUp { rows: usize },
    ExtendDown { rows: usize },
    ExtendLeft { cols: usize },
    ExtendRight { cols: usize },
    Outpaint { size: usize },
}

impl MaskSpec {
    pub fn name(&self) -> &'static str {
        match self {
            MaskSpec::CenterCrop { .. } => "center_crop",
            MaskSpec::Random { .. } => "random",
            MaskSpec::ExtendUp { .. } => "extend_up",
            MaskSpec::ExtendDown { .. } => "extend_down",
            MaskSpec::ExtendLeft { .. } => "extend_left",
            MaskSpec::ExtendRight { .. } => "extend_right",
            MaskSpec::Outpaint { .. } => "outpaint",
        }
    }
}

/// Boolean bitmap over the patch grid; `true` means the patch is removed.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchMask {
    rows: usize,
    cols: usize,
    removed: Vec<bool>,
}

impl PatchMask {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_removed(&self, r: usize, c: usize) -> bool {
        self.removed[r * self.cols + c]
    }

    pub fn removed_count(&self) -> usize {
        self.removed.iter().filter(|&&b| b).count()
    }

    /// True when `other` removes exactly the patches this mask keeps.
    pub fn is_complement_of(&self, other: &PatchMask) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self
                .removed
                .iter()
                .zip(&other.removed)
                .all(|(a, b)| a != b)
    }

    pub fn complement(&self) -> PatchMask {
        PatchMask {
            rows: self.rows,
            cols: self.cols,
            removed: self.removed.iter().map(|b| !b).collect(),
        }
    }
}

/// Builds the patch bitmap for a spec on the given grid. Non-random kinds
/// are pure functions of the spec; the random kind is a pure function of
/// the spec's own seed.
pub fn make_mask(spec: &MaskSpec, grid: (usize, usize)) -> Result<PatchMask> {
    let (rows, cols) = grid;
    let mut removed = vec![false; rows * cols];
    let mut set = |r: usize, c: usize| removed[r * cols + c] = true;
    match spec {
        MaskSpec::CenterCrop { size } | MaskSpec::Outpaint { size } => {
            if *size > rows || *size > cols {
                return Err(Error::InvalidArgument(format!(
                    "{}: block {} exceeds {}x{} grid",
                    spec.name(),
                    size,
                    rows,
                    cols
                )));
            }
            let r0 = (rows - size) / 2;
            let c0 = (cols - size) / 2;
            for r in r0..r0 + size {
                for c in c0..c0 + size {
                    set(r, c);
                }
            }
            if matches!(spec, MaskSpec::Outpaint { .. }) {
                for b in removed.iter_mut() {
                    *b = !*b;
                }
            }
        }
        MaskSpec::Random { ratio, seed, .. } => {
            if !(0.0..=1.0).contains(ratio) {
                return Err(Error::InvalidArgument(format!(
                    "random mask ratio {} outside [0,1]",
                    ratio
                )));
            }
            let k = (ratio * (rows * cols) as f64).round() as usize;
            let mut rng = Rng::new(*seed);
            for idx in rng.choose_k(rows * cols, k) {
                removed[idx] = true;
            }
        }
        MaskSpec::ExtendUp { rows: k } | MaskSpec::ExtendDown { rows: k } => {
            if *k > rows {
                return Err(Error::InvalidArgument(format!(
                    "{}: {} rows exceed grid of {}",
                    spec.name(),
                    k,
                    rows
                )));
            }
            let range = if matches!(spec, MaskSpec::ExtendUp { .. }) {
                0..*k
            } else {
                rows - k..rows
            };
            for r in range {
                for c in 0..cols {
                    set(r, c);
                }
            }
        }
        MaskSpec::ExtendLeft { cols: k } | MaskSpec::ExtendRight { cols: k } => {
            if *k > cols {
                return Err(Error::InvalidArgument(format!(
                    "{}: {} cols exceed grid of {}",
                    spec.name(),
                    k,
                    cols
                )));
            }
            let range = if matches!(spec, MaskSpec::ExtendLeft { .. }) {
                0..*k
            } else {
                cols - k..cols
            };
            for c in range {
                for r in 0..rows {
                    set(r, c);
                }
            }
        }
    }
    Ok(PatchMask { rows, cols, removed })
}

/// Mask application for patch-flattened rows (see
/// [`ImageBatch::patch_flatten`]): removed patches are contiguous runs of
/// `patch_pixels` values, zeroed per row. Works on any row matrix in that
/// layout, including unclipped noise images that are not a valid
/// [`ImageBatch`].
pub fn apply_mask_rows(x: &Tensor, mask: &PatchMask, patch_pixels: usize) -> Result<Tensor> {
    let (_, w) = x.dims2()?;
    let patches = mask.rows * mask.cols;
    if patches * patch_pixels != w {
        return Err(Error::ShapeMismatch {
            op: "apply_mask_rows",
            detail: format!(
                "{} patches of {} pixels vs row width {}",
                patches, patch_pixels, w
            ),
        });
    }
    let mut out = x.clone();
    let n = out.shape()[0];
    for img in 0..n {
        for p in 0..patches {
            if mask.removed[p] {
                let start = img * w + p * patch_pixels;
                out.data_mut()[start..start + patch_pixels].fill(0.0);
            }
        }
    }
    Ok(out)
}

/// Zero-fills the removed patches of every image in the batch.
pub fn apply_mask(batch: &ImageBatch, mask: &PatchMask) -> Result<ImageBatch> {
    let (h, w) = (batch.height(), batch.width());
    if h % mask.rows != 0 || w % mask.cols != 0 {
        return Err(Error::ShapeMismatch {
            op: "apply_mask",
            detail: format!("{}x{} image vs {}x{} grid", h, w, mask.rows, mask.cols),
        });
    }
    let (ph, pw) = (h / mask.rows, w / mask.cols);
    let mut out = batch.clone();
    for img in 0..out.len() {
        for gr in 0..mask.rows {
            for gc in 0..mask.cols {
                if !mask.is_removed(gr, gc) {
                    continue;
                }
                for dy in 0..ph {
                    for dx in 0..pw {
                        out.set_pixel(img, gr * ph + dy, gc * pw + dx, 0.0);
                    }
                }
            }
        }
    }
    Ok(out)
}
