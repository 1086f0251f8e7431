//! Image quality metrics and the update rate.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{l2_norm, ImageBuffer};

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

/// `10 log10(peak^2 / MSE)` with the MSE taken over all channels jointly;
/// `+inf` for identical images.
pub fn psnr<T: Scalar>(x: &ImageBuffer<T>, reference: &ImageBuffer<T>, peak: f64) -> Result<f64> {
    x.ensure_shape(reference.shape())?;
    if !(peak > 0.0) {
        return Err(Error::invalid("psnr peak must be positive"));
    }
    let sse: f64 = x
        .as_slice()
        .iter()
        .zip(reference.as_slice())
        .map(|(&a, &b)| {
            let d = a.as_f64() - b.as_f64();
            d * d
        })
        .sum();
    if sse == 0.0 {
        return Ok(f64::INFINITY);
    }
    let mse = sse / x.len() as f64;
    Ok(10.0 * (peak * peak / mse).log10())
}

/// `|x_n - x_prev| / |x_prev|`.
pub fn update_rate<T: Scalar>(x_n: &ImageBuffer<T>, x_prev: &ImageBuffer<T>) -> Result<f64> {
    let denom = l2_norm(x_prev).as_f64();
    if denom == 0.0 {
        return Err(Error::invalid("update rate undefined for a zero previous iterate"));
    }
    Ok(x_n.distance(x_prev)?.as_f64() / denom)
}

fn gaussian_window() -> Vec<f64> {
    let half = (SSIM_WINDOW / 2) as f64;
    let w: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| {
            let d = i as f64 - half;
            (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()
        })
        .collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Separable "valid" filtering of one plane by the 11-tap window.
fn filter_valid(plane: &[f64], width: usize, height: usize, w: &[f64]) -> Vec<f64> {
    let n = w.len();
    let ow = width - n + 1;
    let oh = height - n + 1;
    let mut rows = vec![0.0; height * ow];
    for r in 0..height {
        for c in 0..ow {
            rows[r * ow + c] = (0..n).map(|k| w[k] * plane[r * width + c + k]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for r in 0..oh {
        for c in 0..ow {
            out[r * ow + c] = (0..n).map(|k| w[k] * rows[(r + k) * ow + c]).sum();
        }
    }
    out
}

/// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), constants
/// `(0.01 peak)^2` and `(0.03 peak)^2`, mean over valid windows and channels.
pub fn ssim<T: Scalar>(x: &ImageBuffer<T>, reference: &ImageBuffer<T>, peak: f64) -> Result<f64> {
    x.ensure_shape(reference.shape())?;
    let s = x.shape();
    if s.width < SSIM_WINDOW || s.height < SSIM_WINDOW {
        return Err(Error::invalid(format!(
            "ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, image is {}x{}",
            s.width, s.height
        )));
    }
    let c1 = (SSIM_K1 * peak).powi(2);
    let c2 = (SSIM_K2 * peak).powi(2);
    let w = gaussian_window();
    let mut total = 0.0;
    for ch in 0..s.channels {
        let a: Vec<f64> = x.plane(ch).iter().map(|v| v.as_f64()).collect();
        let b: Vec<f64> = reference.plane(ch).iter().map(|v| v.as_f64()).collect();
        let prod = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(u, v)| u * v).collect::<Vec<_>>();
        let mu_a = filter_valid(&a, s.width, s.height, &w);
        let mu_b = filter_valid(&b, s.width, s.height, &w);
        let aa = filter_valid(&prod(&a, &a), s.width, s.height, &w);
        let bb = filter_valid(&prod(&b, &b), s.width, s.height, &w);
        let ab = filter_valid(&prod(&a, &b), s.width, s.height, &w);
        let mut sum = 0.0;
        for i in 0..mu_a.len() {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = aa[i] - ma * ma;
            let vb = bb[i] - mb * mb;
            let cov = ab[i] - ma * mb;
            sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        }
        total += sum / mu_a.len() as f64;
    }
    Ok(total / s.channels as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use crate::tensor::Shape;

    #[test]
    fn psnr_examples() {
        let shape = Shape::new(4, 4, 3);
        let r = ImageBuffer::<f64>::filled(shape, 0.5);
        let x = r.map(|v| v + 0.1);
        assert!((psnr(&x, &r, 1.0).unwrap() - 20.0).abs() < 1e-9);
        assert_eq!(psnr(&r, &r, 1.0).unwrap(), f64::INFINITY);
        assert!(psnr(&r, &ImageBuffer::zeros(Shape::gray(4, 4)), 1.0).is_err());
    }

    #[test]
    fn psnr_matches_two_pass_oracle_and_is_symmetric() {
        let shape = Shape::new(9, 7, 2);
        let mut rng = Rng::new(1);
        let x = rng.uniform_image::<f64>(shape, 0.0, 1.0);
        let r = rng.uniform_image::<f64>(shape, 0.0, 1.0);
        let diffs: Vec<f64> = x.as_slice().iter().zip(r.as_slice()).map(|(a, b)| a - b).collect();
        let mean_sq = diffs.iter().map(|d| d * d / diffs.len() as f64).sum::<f64>();
        let oracle = -10.0 * mean_sq.log10();
        assert!((psnr(&x, &r, 1.0).unwrap() - oracle).abs() < 1e-10);
        assert_eq!(psnr(&x, &r, 1.0).unwrap(), psnr(&r, &x, 1.0).unwrap());
    }

    #[test]
    fn update_rate_examples() {
        let a = ImageBuffer::from_vec(vec![1.0, 0.0]);
        let b = ImageBuffer::from_vec(vec![1.0, 1.0]);
        assert_eq!(update_rate(&a, &a).unwrap(), 0.0);
        assert_eq!(update_rate(&b, &a).unwrap(), 1.0);
        assert!(update_rate(&a, &ImageBuffer::zeros(a.shape())).is_err());
    }

    fn fixture() -> ImageBuffer<f64> {
        // checkerboard of 4x4 tiles with a ramp, 24x24
        ImageBuffer::from_fn(Shape::gray(24, 24), |_, r, c| {
            let tile = ((r / 4) + (c / 4)) % 2;
            if tile == 0 { 0.9 - 0.01 * r as f64 } else { 0.05 + 0.01 * c as f64 }
        })
    }

    #[test]
    fn ssim_identity_and_constants() {
        let x = fixture();
        assert!((ssim(&x, &x, 1.0).unwrap() - 1.0).abs() < 1e-12);
        let c = ImageBuffer::<f64>::filled(Shape::new(12, 12, 2), 0.3);
        assert!((ssim(&c, &c, 1.0).unwrap() - 1.0).abs() < 1e-12);
        assert!(ssim(&ImageBuffer::<f64>::zeros(Shape::gray(10, 12)), &ImageBuffer::zeros(Shape::gray(10, 12)), 1.0).is_err());
    }

    #[test]
    fn ssim_of_inverted_image_is_low_and_frozen() {
        let x = fixture();
        let inv = x.map(|v| 1.0 - v);
        let s = ssim(&inv, &x, 1.0).unwrap();
        assert!(s < 0.2);
        assert!((s - ssim(&x, &inv, 1.0).unwrap()).abs() < 1e-15);
        assert!((s - SSIM_INVERTED_FIXTURE).abs() < 1e-12, "{s:.17}");
    }

    // regression value from this implementation
    const SSIM_INVERTED_FIXTURE: f64 = -0.939_509_957_642_882_9;

    #[test]
    fn ssim_drops_with_noise() {
        let x = fixture();
        let noise = Rng::new(2).normal_image::<f64>(x.shape());
        let at = |level: f64| ssim(&x.add(&noise.scale(level)).unwrap(), &x, 1.0).unwrap();
        let (small, large) = (at(0.05), at(0.2));
        assert!(large < small && small < 1.0 && large > 0.0, "{small} {large}");
    }

    /// Direct 2-D window sums with explicit means and variances.
    fn ssim_brute(x: &ImageBuffer<f64>, r: &ImageBuffer<f64>) -> f64 {
        let s = x.shape();
        let g: Vec<f64> = (0..11).map(|i| (-((i as f64 - 5.0).powi(2)) / 4.5).exp()).collect();
        let norm: f64 = g.iter().sum::<f64>().powi(2);
        let (c1, c2) = (1e-4, 9e-4);
        let mut acc = 0.0;
        let mut count = 0.0;
        for ch in 0..s.channels {
            for r0 in 0..=s.height - 11 {
                for c0 in 0..=s.width - 11 {
                    let (mut ma, mut mb) = (0.0, 0.0);
                    for i in 0..11 {
                        for j in 0..11 {
                            let w = g[i] * g[j] / norm;
                            ma += w * x.get(ch, r0 + i, c0 + j);
                            mb += w * r.get(ch, r0 + i, c0 + j);
                        }
                    }
                    let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
                    for i in 0..11 {
                        for j in 0..11 {
                            let w = g[i] * g[j] / norm;
                            let da = x.get(ch, r0 + i, c0 + j) - ma;
                            let db = r.get(ch, r0 + i, c0 + j) - mb;
                            va += w * da * da;
                            vb += w * db * db;
                            cov += w * da * db;
                        }
                    }
                    acc += (2.0 * ma * mb + c1) * (2.0 * cov + c2)
                        / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                    count += 1.0;
                }
            }
        }
        acc / count
    }

    #[test]
    fn ssim_matches_brute_force_windows() {
        let mut rng = Rng::new(3);
        let shape = Shape::new(14, 13, 2);
        let x = rng.uniform_image::<f64>(shape, 0.0, 1.0);
        let r = rng.uniform_image::<f64>(shape, 0.0, 1.0);
        assert!((ssim(&x, &r, 1.0).unwrap() - ssim_brute(&x, &r)).abs() < 1e-12);
        let f = fixture();
        let inv = f.map(|v| 1.0 - v);
        assert!((ssim(&inv, &f, 1.0).unwrap() - ssim_brute(&inv, &f)).abs() < 1e-12);
    }
}
