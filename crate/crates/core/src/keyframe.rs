//! Perceptual hashing and hash-based shot segmentation.

use std::f64::consts::PI;
use std::fmt;

use image::{ImageBuffer, Luma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{luma601, Frame};

/// Similarity below which a sampled frame opens a new segment.
pub const DEFAULT_THRESHOLD: f64 = 0.6;

const HASH_INPUT: u32 = 32;
const HASH_BLOCK: usize = 8;

/// 64-bit DCT perceptual hash. Bit `u * 8 + v` holds coefficient `(u, v)` of
/// the low-frequency block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PerceptualHash(pub u64);

impl PerceptualHash {
    pub fn hamming(self, other: PerceptualHash) -> u32 {
        (self.0 ^ other.0).count_ones()
    }
}

impl fmt::Display for PerceptualHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

fn dct_table() -> [[f64; HASH_INPUT as usize]; HASH_BLOCK] {
    let n = HASH_INPUT as usize;
    let mut table = [[0.0; HASH_INPUT as usize]; HASH_BLOCK];
    for (k, row) in table.iter_mut().enumerate() {
        let scale = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
        for (x, c) in row.iter_mut().enumerate() {
            *c = scale * (PI * (2 * x + 1) as f64 * k as f64 / (2 * n) as f64).cos();
        }
    }
    table
}

/// Low-frequency 8x8 block of the orthonormal 2-D DCT-II of a 32x32 luma thumbnail.
fn dct_block(frame: &Frame) -> [f64; 64] {
    let n = HASH_INPUT as usize;
    let gray: ImageBuffer<Luma<f32>, Vec<f32>> =
        ImageBuffer::from_fn(frame.width(), frame.height(), |x, y| {
            let p = frame.get_pixel(x, y).0;
            Luma([luma601(p[0], p[1], p[2]) / 255.0])
        });
    let small =
        image::imageops::resize(&gray, HASH_INPUT, HASH_INPUT, image::imageops::FilterType::Triangle);
    // Rounded to 1e-3 grey levels so f32 resampling jitter cannot flip bits.
    let px: Vec<f64> = small
        .as_raw()
        .iter()
        .map(|&v| (v as f64 * 255_000.0).round() / 1000.0)
        .collect();
    let table = dct_table();

    // Rows first (only the 8 horizontal frequencies we keep), then columns.
    let mut rows = vec![[0.0f64; HASH_BLOCK]; n];
    for (y, row) in rows.iter_mut().enumerate() {
        for (v, out) in row.iter_mut().enumerate() {
            *out = (0..n).map(|x| px[y * n + x] * table[v][x]).sum();
        }
    }
    let mut block = [0.0f64; 64];
    for u in 0..HASH_BLOCK {
        for v in 0..HASH_BLOCK {
            block[u * HASH_BLOCK + v] = (0..n).map(|y| rows[y][v] * table[u][y]).sum();
        }
    }
    block
}

/// Luma -> 32x32 linear resize -> DCT-II -> 8x8 low block -> threshold at the AC median.
pub fn phash(frame: &Frame) -> PerceptualHash {
    let block = dct_block(frame);
    let mut ac: Vec<f64> = block[1..].to_vec();
    ac.sort_by(f64::total_cmp);
    let median = ac[ac.len() / 2];
    // Float residue of a constant signal must not turn into set bits.
    let scale = block.iter().fold(1.0f64, |m, c| m.max(c.abs()));
    let tol = scale * 1e-9;
    let bits = block
        .iter()
        .enumerate()
        .filter(|(_, &c)| c - median > tol)
        .fold(0u64, |acc, (i, _)| acc | 1 << i);
    PerceptualHash(bits)
}

/// `1 - hamming / 64`.
pub fn similarity(a: PerceptualHash, b: PerceptualHash) -> f64 {
    1.0 - a.hamming(b) as f64 / 64.0
}

/// Half-second sampling: `max(1, round(fps / 2))`.
pub fn default_stride(frame_rate: f64) -> usize {
    ((frame_rate / 2.0).round() as usize).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VideoSegment {
    pub start_frame: usize,
    /// Inclusive.
    pub end_frame: usize,
    pub keyframe_index: usize,
}

impl VideoSegment {
    pub fn len(&self) -> usize {
        self.end_frame - self.start_frame + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Segments a sequence of `(frame index, hash)` samples covering frames `0..total_frames`.
///
/// Each sample is compared with the first sample of the open segment; a
/// similarity below `threshold` starts a new segment at that sample.
pub fn segment_hashes(
    samples: &[(usize, PerceptualHash)],
    total_frames: usize,
    threshold: f64,
) -> Result<Vec<VideoSegment>> {
    if samples.is_empty() || total_frames == 0 {
        return Err(Error::EmptyFrames);
    }
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidArgument(format!("threshold {threshold} not in (0, 1]")));
    }

    // Indices into `samples` where segments open.
    let mut starts = vec![0usize];
    let mut anchor = samples[0].1;
    for (i, &(_, hash)) in samples.iter().enumerate().skip(1) {
        if similarity(anchor, hash) < threshold {
            starts.push(i);
            anchor = hash;
        }
    }

    let segments = starts
        .iter()
        .enumerate()
        .map(|(k, &first)| {
            let last = starts.get(k + 1).map_or(samples.len(), |&s| s) - 1;
            let start_frame = if k == 0 { 0 } else { samples[first].0 };
            let end_frame = match starts.get(k + 1) {
                Some(&next) => samples[next].0 - 1,
                None => total_frames - 1,
            };
            let mid = (start_frame + end_frame) as f64 / 2.0;
            let keyframe_index = samples[first..=last]
                .iter()
                .map(|&(idx, _)| idx)
                .min_by(|&a, &b| (a as f64 - mid).abs().total_cmp(&(b as f64 - mid).abs()))
                .unwrap_or(start_frame);
            VideoSegment {
                start_frame,
                end_frame,
                keyframe_index,
            }
        })
        .collect();
    Ok(segments)
}

/// Hashes every `sample_stride`-th frame (in parallel) and segments the video.
pub fn segment_video(frames: &[Frame], threshold: f64, sample_stride: usize) -> Result<Vec<VideoSegment>> {
    if frames.is_empty() {
        return Err(Error::EmptyFrames);
    }
    if sample_stride == 0 {
        return Err(Error::InvalidArgument("sample stride must be at least 1".into()));
    }
    let samples: Vec<(usize, PerceptualHash)> = (0..frames.len())
        .step_by(sample_stride)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|i| (i, phash(&frames[i])))
        .collect();
    segment_hashes(&samples, frames.len(), threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::solid;

    fn h(bits: u64) -> PerceptualHash {
        PerceptualHash(bits)
    }

    #[test]
    fn identical_frames_hash_identically() {
        let f = Frame::from_fn(40, 30, |x, y| image::Rgb([(x * 6) as u8, (y * 8) as u8, 77]));
        assert_eq!(phash(&f), phash(&f.clone()));
        assert_eq!(similarity(phash(&f), phash(&f)), 1.0);
    }

    #[test]
    fn uniform_gray_has_no_ac_bits() {
        let hash = phash(&solid(64, 48, [128, 128, 128]));
        assert_eq!(hash.0 & !1, 0, "AC bits set: {hash}");
    }

    #[test]
    fn similarity_arithmetic() {
        assert_eq!(similarity(h(0xdead_beef), h(0xdead_beef)), 1.0);
        assert_eq!(similarity(h(0x1234), h(!0x1234)), 0.0);
        assert_eq!(similarity(h(0), h(0xffff)), 0.75);
    }

    #[test]
    fn constant_video_is_one_segment_with_midpoint_keyframe() {
        let frames = vec![solid(16, 16, [10, 200, 30]); 30];
        let segs = segment_video(&frames, DEFAULT_THRESHOLD, 1).unwrap();
        assert_eq!(
            segs,
            vec![VideoSegment {
                start_frame: 0,
                end_frame: 29,
                keyframe_index: 14
            }]
        );
    }

    #[test]
    fn threshold_one_cuts_every_distinct_run() {
        let samples: Vec<_> = [1u64, 1, 2, 2, 2, 3, 1]
            .iter()
            .enumerate()
            .map(|(i, &b)| (i, h(b)))
            .collect();
        let segs = segment_hashes(&samples, 7, 1.0).unwrap();
        let starts: Vec<_> = segs.iter().map(|s| s.start_frame).collect();
        assert_eq!(starts, vec![0, 2, 5, 6]);
    }

    #[test]
    fn strided_segments_cover_every_frame() {
        let samples: Vec<_> = (0..10).map(|i| (i * 3, h(if i < 4 { 0 } else { u64::MAX }))).collect();
        let segs = segment_hashes(&samples, 29, 0.6).unwrap();
        assert_eq!(segs.len(), 2);
        assert_eq!((segs[0].start_frame, segs[0].end_frame), (0, 11));
        assert_eq!((segs[1].start_frame, segs[1].end_frame), (12, 28));
        assert!(segs.iter().all(|s| s.start_frame <= s.keyframe_index && s.keyframe_index <= s.end_frame));
        assert_eq!(segs[1].keyframe_index % 3, 0);
    }

    #[test]
    fn anchor_segmentation_is_not_monotone_in_general() {
        // d(A,B)=8, d(A,C)=14, d(B,C)=6, d(B,D)=6, d(C,D)=12.
        let a = h(0);
        let b = h(0xff);
        let c = h(0xff ^ 0b11_1111 << 8);
        let d = h(0xff ^ 0b11_1111);
        assert_eq!(
            (a.hamming(b), a.hamming(c), b.hamming(c), b.hamming(d), c.hamming(d)),
            (8, 14, 6, 6, 12)
        );
        let samples = [(0, a), (1, b), (2, c), (3, d)];
        let strict = segment_hashes(&samples, 4, 0.9).unwrap().len();
        let loose = segment_hashes(&samples, 4, 0.85).unwrap().len();
        assert_eq!((strict, loose), (2, 3));
    }

    #[test]
    fn errors_on_empty_or_bad_arguments() {
        assert!(matches!(segment_video(&[], 0.6, 1), Err(Error::EmptyFrames)));
        let frames = vec![solid(4, 4, [0, 0, 0])];
        assert!(segment_video(&frames, 0.0, 1).is_err());
        assert!(segment_video(&frames, 0.6, 0).is_err());
    }

    #[test]
    fn default_stride_is_half_second() {
        assert_eq!(default_stride(25.0), 13);
        assert_eq!(default_stride(30.0), 15);
        assert_eq!(default_stride(1.0), 1);
    }
}
