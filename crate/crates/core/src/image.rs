//! Low-rank approximation of RGB images, one SVD per channel.

use crate::error::{Error, Result};
use crate::io::RgbImage;
use crate::linalg::{reconstruct_rank, svd, Matrix};
use crate::par;

/// One colour channel as a `height × width` matrix.
pub fn channel_matrix(img: &RgbImage, channel: usize) -> Matrix {
    let data = img.pixels.iter().map(|p| f64::from(p[channel])).collect();
    Matrix::new(img.height, img.width, data).expect("image dimensions are consistent")
}

/// Truncate a channel to rank `k` (or its own rank when that is lower).
fn approx_channel(m: &Matrix, k: usize) -> Result<Matrix> {
    let f = svd(m)?;
    if f.rank() == 0 {
        return Ok(Matrix::zeros(m.rows(), m.cols()));
    }
    reconstruct_rank(&f, k.min(f.rank()))
}

/// Replace every channel by its rank-`k` approximation, rounded and clamped
/// to `0..=255`. Channels are processed in parallel when enabled.
pub fn image_rank_approx(img: &RgbImage, k: usize) -> Result<RgbImage> {
    let max = img.width.min(img.height);
    if k == 0 || k > max {
        return Err(Error::RankOutOfRange { requested: k, rank: max });
    }
    let channels = par::try_map(&[0usize, 1, 2], |&c| approx_channel(&channel_matrix(img, c), k))?;
    let pixels = (0..img.width * img.height)
        .map(|i| {
            let px = |c: usize| channels[c].as_slice()[i].round().clamp(0.0, 255.0) as u8;
            [px(0), px(1), px(2)]
        })
        .collect();
    RgbImage::new(img.width, img.height, pixels)
}

/// Frobenius distance between two images, per channel.
pub fn channel_errors(a: &RgbImage, b: &RgbImage) -> Result<[f64; 3]> {
    if (a.width, a.height) != (b.width, b.height) {
        return Err(Error::shape(
            format!("{}x{}", a.width, a.height),
            format!("{}x{}", b.width, b.height),
        ));
    }
    let mut out = [0.0; 3];
    for (p, q) in a.pixels.iter().zip(&b.pixels) {
        for c in 0..3 {
            let d = f64::from(p[c]) - f64::from(q[c]);
            out[c] += d * d;
        }
    }
    Ok(out.map(f64::sqrt))
}
