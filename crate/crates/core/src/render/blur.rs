use crate::frame::Frame;

/// Normalized Gaussian taps for offsets `-r..=r`, `r = ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f32> {
    let r = (3.0 * sigma).ceil() as i64;
    let taps: Vec<f64> = (-r..=r).map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let sum: f64 = taps.iter().sum();
    taps.iter().map(|t| (t / sum) as f32).collect()
}

/// Separable Gaussian blur with clamp-to-edge borders. `sigma == 0` returns the input.
pub fn gaussian_blur(frame: &Frame, sigma: f64) -> Frame {
    blur_crop(frame, sigma, 0, 0, frame.width(), frame.height())
}

/// The `width x height` window at `(x0, y0)` of `gaussian_blur(frame, sigma)`,
/// computed without blurring anything outside the window's kernel footprint.
pub fn blur_crop(frame: &Frame, sigma: f64, x0: u32, y0: u32, width: u32, height: u32) -> Frame {
    assert!(sigma >= 0.0, "sigma must be non-negative");
    assert!(x0 + width <= frame.width() && y0 + height <= frame.height());
    if sigma == 0.0 {
        return image::imageops::crop_imm(frame, x0, y0, width, height).to_image();
    }
    let kernel = gaussian_kernel(sigma);
    let r = (kernel.len() / 2) as i64;
    let (fw, fh) = (frame.width() as i64, frame.height() as i64);
    let src = frame.as_raw();
    let (w, h) = (width as usize, height as usize);

    // Horizontal pass over the rows the vertical pass will read.
    let rows: Vec<i64> = (y0 as i64 - r..y0 as i64 + height as i64 + r)
        .map(|y| y.clamp(0, fh - 1))
        .collect();
    let mut tmp = vec![0.0f32; rows.len() * w * 3];
    for (ri, &y) in rows.iter().enumerate() {
        let row = &src[(y * fw * 3) as usize..((y + 1) * fw * 3) as usize];
        let out = &mut tmp[ri * w * 3..(ri + 1) * w * 3];
        for x in 0..w {
            let cx = x0 as i64 + x as i64;
            let mut acc = [0.0f32; 3];
            for (k, &wt) in kernel.iter().enumerate() {
                let sx = (cx + k as i64 - r).clamp(0, fw - 1) as usize * 3;
                acc[0] += wt * row[sx] as f32;
                acc[1] += wt * row[sx + 1] as f32;
                acc[2] += wt * row[sx + 2] as f32;
            }
            out[x * 3..x * 3 + 3].copy_from_slice(&acc);
        }
    }

    let mut out = vec![0u8; w * h * 3];
    let stride = w * 3;
    for y in 0..h {
        let dst = &mut out[y * stride..(y + 1) * stride];
        let mut acc = vec![0.0f32; stride];
        for (k, &wt) in kernel.iter().enumerate() {
            let src_row = &tmp[(y + k) * stride..(y + k + 1) * stride];
            for (a, &v) in acc.iter_mut().zip(src_row) {
                *a += wt * v;
            }
        }
        for (d, a) in dst.iter_mut().zip(acc) {
            *d = a.round().clamp(0.0, 255.0) as u8;
        }
    }
    Frame::from_raw(width, height, out).expect("buffer sized to frame")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::solid;

    /// Direct 2-D convolution with the outer-product kernel.
    fn direct_blur(frame: &Frame, sigma: f64) -> Vec<f64> {
        let r = (3.0 * sigma).ceil() as i64;
        let g: Vec<f64> = (-r..=r).map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp()).collect();
        let norm: f64 = g.iter().sum::<f64>().powi(2);
        let (w, h) = (frame.width() as i64, frame.height() as i64);
        let mut out = Vec::new();
        for y in 0..h {
            for x in 0..w {
                for c in 0..3 {
                    let mut acc = 0.0;
                    for dy in -r..=r {
                        for dx in -r..=r {
                            let sx = (x + dx).clamp(0, w - 1) as u32;
                            let sy = (y + dy).clamp(0, h - 1) as u32;
                            acc += g[(dx + r) as usize] * g[(dy + r) as usize]
                                * frame.get_pixel(sx, sy).0[c] as f64;
                        }
                    }
                    out.push(acc / norm);
                }
            }
        }
        out
    }

    #[test]
    fn zero_sigma_is_identity() {
        let f = Frame::from_fn(9, 7, |x, y| image::Rgb([x as u8 * 20, y as u8 * 30, 5]));
        assert_eq!(gaussian_blur(&f, 0.0), f);
    }

    #[test]
    fn uniform_frame_unchanged() {
        let f = solid(40, 30, [200, 17, 99]);
        assert_eq!(gaussian_blur(&f, 4.3), f);
    }

    #[test]
    fn impulse_matches_direct_convolution() {
        let mut f = solid(21, 17, [0, 0, 0]);
        f.put_pixel(10, 8, image::Rgb([255, 255, 255]));
        f.put_pixel(1, 1, image::Rgb([255, 0, 128]));
        for sigma in [0.8, 1.5, 2.0] {
            let fast = gaussian_blur(&f, sigma);
            let slow = direct_blur(&f, sigma);
            for (a, b) in fast.as_raw().iter().zip(&slow) {
                assert!((*a as f64 - b).abs() <= 1.0, "sigma {sigma}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn crop_equals_blur_then_crop() {
        let f = Frame::from_fn(50, 40, |x, y| image::Rgb([(x * 5) as u8, (y * 6) as u8, ((x * y) % 256) as u8]));
        let full = gaussian_blur(&f, 2.5);
        let crop = blur_crop(&f, 2.5, 7, 3, 30, 25);
        assert_eq!(crop, image::imageops::crop_imm(&full, 7, 3, 30, 25).to_image());
    }
}
