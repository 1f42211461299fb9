//! Synthetic smooth tensors and seeded mask generators.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SpcError};
use crate::scalar::Scalar;
use crate::tensor::{DenseTensor, Mask};

/// One axis-aligned Gaussian bump. Centers and widths are in index units
/// (0-based grid coordinates).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBlob {
    pub center: Vec<f64>,
    pub width: Vec<f64>,
    pub weight: f64,
}

/// `scale * sum_k w_k exp(-sum_n (i_n - c_kn)^2 / (2 s_kn^2))`.
pub fn gaussian_mixture_tensor<T: Scalar>(
    dims: &[usize],
    blobs: &[GaussianBlob],
    scale: f64,
) -> Result<DenseTensor<T>> {
    for (k, blob) in blobs.iter().enumerate() {
        if blob.center.len() != dims.len() || blob.width.len() != dims.len() {
            return Err(SpcError::InvalidParameter(format!(
                "blob {k} has {} center / {} width entries for order {}",
                blob.center.len(),
                blob.width.len(),
                dims.len()
            )));
        }
        for (n, (&c, &d)) in blob.center.iter().zip(dims).enumerate() {
            if !(0.0..=(d as f64 - 1.0)).contains(&c) {
                return Err(SpcError::InvalidParameter(format!(
                    "blob {k} center {c} outside mode {n} range [0, {}]",
                    d - 1
                )));
            }
        }
        if blob.width.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(SpcError::InvalidParameter(format!(
                "blob {k} widths must be positive, got {:?}",
                blob.width
            )));
        }
        if !blob.weight.is_finite() {
            return Err(SpcError::InvalidParameter(format!("blob {k} weight is not finite")));
        }
    }
    // Each blob is separable: precompute its 1-D profiles.
    let profiles: Vec<Vec<Vec<f64>>> = blobs
        .iter()
        .map(|b| {
            dims.iter()
                .enumerate()
                .map(|(n, &d)| {
                    (0..d)
                        .map(|i| {
                            let z = (i as f64 - b.center[n]) / b.width[n];
                            (-0.5 * z * z).exp()
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    DenseTensor::from_fn(dims, |idx| {
        let v: f64 = blobs
            .iter()
            .zip(&profiles)
            .map(|(b, p)| {
                b.weight
                    * idx
                        .iter()
                        .enumerate()
                        .map(|(n, &i)| p[n][i])
                        .product::<f64>()
            })
            .sum();
        T::lit(scale * v)
    })
}

pub const PHANTOM_BLOBS: usize = 4;

/// Blob parameters of the default phantom: four bumps with seeded centers in
/// the middle 60% of each axis, widths between 8% and 20% of the extent, and
/// weights in `[0.5, 1]`.
pub fn phantom_blobs(dims: &[usize], seed: u64) -> Vec<GaussianBlob> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..PHANTOM_BLOBS)
        .map(|_| {
            let center = dims
                .iter()
                .map(|&d| {
                    let span = (d as f64 - 1.0).max(0.0);
                    span * rng.random_range(0.2..=0.8)
                })
                .collect();
            let width = dims
                .iter()
                .map(|&d| (d as f64 * rng.random_range(0.08..=0.2)).max(0.5))
                .collect();
            GaussianBlob {
                center,
                width,
                weight: rng.random_range(0.5..=1.0),
            }
        })
        .collect()
}

/// Seeded four-Gaussian phantom with unit scale.
pub fn phantom<T: Scalar>(dims: &[usize], seed: u64) -> Result<DenseTensor<T>> {
    gaussian_mixture_tensor(dims, &phantom_blobs(dims, seed), 1.0)
}

fn missing_count(total: usize, ratio: f64) -> Result<usize> {
    if !(0.0..1.0).contains(&ratio) {
        return Err(SpcError::InvalidParameter(format!(
            "missing ratio {ratio} must lie in [0, 1)"
        )));
    }
    let missing = (ratio * total as f64).round() as usize;
    if missing >= total {
        return Err(SpcError::EmptyObservedSet);
    }
    Ok(missing)
}

/// Exactly `round(ratio * N)` entries unobserved, drawn uniformly without
/// replacement.
pub fn random_mask(dims: &[usize], missing_ratio: f64, seed: u64) -> Result<Mask> {
    let mut mask = Mask::all_observed(dims)?;
    let missing = missing_count(mask.len(), missing_ratio)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in sample(&mut rng, mask.len(), missing) {
        mask.set(i, false);
    }
    Ok(mask)
}

/// Removes whole pixels of a `height x width x channels` image: every
/// channel of a selected pixel is unobserved.
pub fn dead_pixel_mask(
    height: usize,
    width: usize,
    channels: usize,
    missing_ratio: f64,
    seed: u64,
) -> Result<Mask> {
    let dims = [height, width, channels];
    let mut mask = Mask::all_observed(&dims)?;
    let plane = height * width;
    let missing = missing_count(plane, missing_ratio)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for p in sample(&mut rng, plane, missing) {
        for c in 0..channels {
            mask.set(p + c * plane, false);
        }
    }
    Ok(mask)
}
