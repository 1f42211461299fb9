//! Reconstruction quality measures: MSE, PSNR, SSIM, and SDR.

use crate::error::{Result, SpcError};
use crate::scalar::Scalar;
use crate::tensor::{DenseTensor, Mask, Region};

/// Entries a metric is evaluated over.
#[derive(Debug, Clone, Copy)]
pub enum EvalRegion<'a> {
    All,
    Observed(&'a Mask),
    Missing(&'a Mask),
}

impl<'a> EvalRegion<'a> {
    fn selects(&self, linear: usize) -> bool {
        match self {
            Self::All => true,
            Self::Observed(m) => m.in_region(linear, Region::Observed),
            Self::Missing(m) => m.in_region(linear, Region::Unobserved),
        }
    }

    fn check(&self, dims: &[usize]) -> Result<()> {
        match self {
            Self::All => Ok(()),
            Self::Observed(m) | Self::Missing(m) => {
                if m.dims() == dims {
                    Ok(())
                } else {
                    Err(SpcError::DimensionMismatch {
                        expected: dims.to_vec(),
                        found: m.dims().to_vec(),
                    })
                }
            }
        }
    }
}

/// Sum over the region of `f(a_i, b_i)` and the number of entries visited.
fn region_fold<T: Scalar>(
    a: &DenseTensor<T>,
    b: &DenseTensor<T>,
    region: EvalRegion<'_>,
    f: impl Fn(T, T) -> T,
) -> Result<(T, usize)> {
    a.require_same_dims(b.dims())?;
    region.check(a.dims())?;
    let mut sum = T::zero();
    let mut count = 0;
    for (i, (&x, &y)) in a.as_slice().iter().zip(b.as_slice()).enumerate() {
        if region.selects(i) {
            sum += f(x, y);
            count += 1;
        }
    }
    if count == 0 {
        return Err(SpcError::EmptyRegion);
    }
    Ok((sum, count))
}

/// Mean squared difference over the region.
pub fn mse<T: Scalar>(a: &DenseTensor<T>, b: &DenseTensor<T>, region: EvalRegion<'_>) -> Result<T> {
    let (sum, count) = region_fold(a, b, region, |x, y| (x - y) * (x - y))?;
    Ok(sum / T::lit(count as f64))
}

/// `10 log10(255^2 / MSE)`; `+inf` when the MSE is zero.
pub fn psnr<T: Scalar>(a: &DenseTensor<T>, b: &DenseTensor<T>, region: EvalRegion<'_>) -> Result<T> {
    let m = mse(a, b, region)?;
    Ok(psnr_from_mse(m))
}

pub fn psnr_from_mse<T: Scalar>(mse: T) -> T {
    if mse == T::zero() {
        return T::infinity();
    }
    T::lit(10.0) * (T::lit(255.0 * 255.0) / mse).log10()
}

/// `10 log10(||truth||^2 / ||truth - estimate||^2)` over the region; `+inf`
/// for an exact estimate.
pub fn sdr<T: Scalar>(
    truth: &DenseTensor<T>,
    estimate: &DenseTensor<T>,
    region: EvalRegion<'_>,
) -> Result<T> {
    let (signal, _) = region_fold(truth, estimate, region, |x, _| x * x)?;
    let (error, _) = region_fold(truth, estimate, region, |x, y| (x - y) * (x - y))?;
    if signal == T::zero() {
        return Err(SpcError::ZeroSignal);
    }
    if error == T::zero() {
        return Ok(T::infinity());
    }
    Ok(T::lit(10.0) * (signal / error).log10())
}

pub const SSIM_WINDOW: usize = 8;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;
pub const SSIM_DYNAMIC_RANGE: f64 = 255.0;

/// SSIM of two gray images stored as `height x width` slices in canonical
/// order (row index fastest). Uses an 8x8 uniform window at stride 1 and
/// population statistics, averaged over all window positions.
pub fn ssim_gray<T: Scalar>(a: &[T], b: &[T], height: usize, width: usize) -> Result<T> {
    if a.len() != height * width || b.len() != height * width {
        return Err(SpcError::LengthMismatch {
            expected: height * width,
            found: a.len().min(b.len()),
        });
    }
    let win = SSIM_WINDOW;
    if height < win || width < win {
        return Err(SpcError::ImageTooSmall {
            height,
            width,
            window: win,
        });
    }
    let c1 = T::lit((SSIM_K1 * SSIM_DYNAMIC_RANGE).powi(2));
    let c2 = T::lit((SSIM_K2 * SSIM_DYNAMIC_RANGE).powi(2));
    let two = T::lit(2.0);
    let n = T::lit((win * win) as f64);
    let mut total = T::zero();
    let mut windows = 0usize;
    for w0 in 0..=width - win {
        for h0 in 0..=height - win {
            let (mut sa, mut sb) = (T::zero(), T::zero());
            for w in w0..w0 + win {
                for h in h0..h0 + win {
                    sa += a[h + w * height];
                    sb += b[h + w * height];
                }
            }
            let (ma, mb) = (sa / n, sb / n);
            let (mut vaa, mut vbb, mut vab) = (T::zero(), T::zero(), T::zero());
            for w in w0..w0 + win {
                for h in h0..h0 + win {
                    let da = a[h + w * height] - ma;
                    let db = b[h + w * height] - mb;
                    vaa += da * da;
                    vbb += db * db;
                    vab += da * db;
                }
            }
            let (vaa, vbb, vab) = (vaa / n, vbb / n, vab / n);
            let s = (two * ma * mb + c1) * (two * vab + c2)
                / ((ma * ma + mb * mb + c1) * (vaa + vbb + c2));
            total += s;
            windows += 1;
        }
    }
    Ok(total / T::lit(windows as f64))
}

/// SSIM of `height x width` gray images or the channel average of
/// `height x width x channels` images.
pub fn ssim<T: Scalar>(a: &DenseTensor<T>, b: &DenseTensor<T>) -> Result<T> {
    a.require_same_dims(b.dims())?;
    let dims = a.dims();
    let (h, w, c) = match *dims {
        [h, w] => (h, w, 1),
        [h, w, c] => (h, w, c),
        _ => {
            return Err(SpcError::InvalidParameter(format!(
                "SSIM needs a 2-D or 3-D image, got dims {dims:?}"
            )))
        }
    };
    let plane = h * w;
    let mut total = T::zero();
    for ch in 0..c {
        let range = ch * plane..(ch + 1) * plane;
        total += ssim_gray(&a.as_slice()[range.clone()], &b.as_slice()[range], h, w)?;
    }
    Ok(total / T::lit(c as f64))
}
