//! Dynamic-programming beat tracking.
//!
//! Onset strength is the half-wave rectified spectral flux of a log-magnitude
//! STFT. The global tempo is the autocorrelation peak of that envelope under a
//! log-normal prior around 120 BPM, and beats are the path through the
//! envelope that maximises onset strength plus a penalty on log deviations of
//! each inter-beat interval from the tempo period.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ANALYSIS_RATE: u32 = 22_050;
pub const WINDOW: usize = 2048;
pub const HOP: usize = 512;
pub const PRIOR_BPM: f64 = 120.0;
/// Weight of the interval-regularity term against onset strength.
pub const TIGHTNESS: f64 = 100.0;
pub const MIN_TRACK_SECONDS: f64 = 5.0;
/// Spacing used when a track has no detectable beat.
pub const FALLBACK_SPACING: f64 = 4.0;

const TOP_DB: f64 = 80.0;
const MIN_BPM: f64 = 30.0;
const MAX_BPM: f64 = 320.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeatGrid {
    /// Strictly increasing beat times in seconds.
    pub beats: Vec<f64>,
    /// Beats per minute.
    pub tempo: f64,
}

impl BeatGrid {
    pub fn is_empty(&self) -> bool {
        self.beats.is_empty()
    }

    /// Evenly spaced beats from 0 through `duration`.
    pub fn fixed(spacing: f64, duration: f64) -> BeatGrid {
        let n = (duration / spacing).floor() as usize;
        BeatGrid {
            beats: (0..=n).map(|i| i as f64 * spacing).collect(),
            tempo: 60.0 / spacing,
        }
    }

    pub fn median_interval(&self) -> Option<f64> {
        let mut iv: Vec<f64> = self.beats.windows(2).map(|w| w[1] - w[0]).collect();
        if iv.is_empty() {
            return None;
        }
        iv.sort_by(f64::total_cmp);
        Some(iv[iv.len() / 2])
    }

    /// Beat times for a track of `duration` seconds looped back to back with a
    /// `crossfade` overlap, up to `horizon` seconds. Each copy starts
    /// `duration - crossfade` after the previous one; inside a seam only the
    /// beats before its midpoint are kept from the outgoing copy.
    pub fn looped(&self, duration: f64, crossfade: f64, horizon: f64) -> BeatGrid {
        let period = duration - crossfade;
        if period <= 0.0 || self.beats.is_empty() {
            return self.clone();
        }
        let half = crossfade / 2.0;
        let mut beats: Vec<f64> = self
            .beats
            .iter()
            .copied()
            .filter(|&b| b < duration - half)
            .collect();
        let mut k = 1;
        while (k as f64) * period <= horizon {
            let offset = k as f64 * period;
            beats.extend(
                self.beats
                    .iter()
                    .filter(|&&b| b > half && b < duration - half)
                    .map(|b| b + offset),
            );
            k += 1;
        }
        BeatGrid {
            beats,
            tempo: self.tempo,
        }
    }

    /// Strictly increasing, inside `[0, duration]`, positive tempo.
    pub fn is_valid(&self, duration: f64) -> bool {
        self.tempo > 0.0
            && self.beats.windows(2).all(|w| w[0] < w[1])
            && self.beats.iter().all(|&b| (0.0..=duration).contains(&b))
    }
}

fn resample_linear(samples: &[f32], from: u32, to: u32) -> Vec<f32> {
    if from == to || samples.is_empty() {
        return samples.to_vec();
    }
    let ratio = from as f64 / to as f64;
    let n = ((samples.len() as f64) / ratio).floor() as usize;
    (0..n)
        .map(|i| {
            let pos = i as f64 * ratio;
            let j = pos.floor() as usize;
            let frac = (pos - j as f64) as f32;
            let a = samples[j];
            let b = samples.get(j + 1).copied().unwrap_or(a);
            a + (b - a) * frac
        })
        .collect()
}

fn hann(n: usize) -> Vec<f32> {
    (0..n)
        .map(|i| {
            let s = (std::f64::consts::PI * i as f64 / n as f64).sin();
            (s * s) as f32
        })
        .collect()
}

/// Log-magnitude spectrogram (dB, clipped 80 dB below the peak), centered frames.
fn log_spectrogram(signal: &[f32]) -> Vec<Vec<f32>> {
    let pad = WINDOW / 2;
    let mut padded = vec![0.0f32; pad];
    padded.extend_from_slice(signal);
    padded.extend(std::iter::repeat_n(0.0, pad));
    let frames = 1 + (padded.len() - WINDOW) / HOP;
    let window = hann(WINDOW);
    let fft: Arc<dyn Fft<f32>> = FftPlanner::new().plan_fft_forward(WINDOW);
    let bins = WINDOW / 2 + 1;

    let mut spec = Vec::with_capacity(frames);
    let mut buf = vec![Complex::new(0.0f32, 0.0); WINDOW];
    let mut scratch = vec![Complex::new(0.0f32, 0.0); fft.get_inplace_scratch_len()];
    let mut peak = f32::MIN;
    for t in 0..frames {
        let chunk = &padded[t * HOP..t * HOP + WINDOW];
        for ((b, &x), &w) in buf.iter_mut().zip(chunk).zip(&window) {
            *b = Complex::new(x * w, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        let row: Vec<f32> = buf[..bins]
            .iter()
            .map(|c| 10.0 * c.norm_sqr().max(1e-10).log10())
            .collect();
        peak = row.iter().copied().fold(peak, f32::max);
        spec.push(row);
    }
    let floor = peak - TOP_DB as f32;
    for row in &mut spec {
        for v in row.iter_mut() {
            *v = v.max(floor);
        }
    }
    spec
}

/// Mean positive first difference of the log spectrogram across frequency.
pub fn onset_envelope(signal: &[f32]) -> Vec<f64> {
    let spec = log_spectrogram(signal);
    let mut env = vec![0.0f64; spec.len()];
    for t in 1..spec.len() {
        let flux: f64 = spec[t]
            .iter()
            .zip(&spec[t - 1])
            .map(|(&a, &b)| (a - b).max(0.0) as f64)
            .sum();
        env[t] = flux / spec[t].len() as f64;
    }
    env
}

fn frame_rate() -> f64 {
    ANALYSIS_RATE as f64 / HOP as f64
}

fn gaussian_smooth(x: &[f64], sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-r..=r).map(|i| (-0.5 * (i as f64 / sigma).powi(2)).exp()).collect();
    let n = x.len() as isize;
    (0..n)
        .map(|i| {
            (-r..=r)
                .filter(|k| (0..n).contains(&(i + k)))
                .map(|k| x[(i + k) as usize] * kernel[(k + r) as usize])
                .sum()
        })
        .collect()
}

/// Tempo in BPM from the autocorrelation of the onset envelope.
pub fn estimate_tempo(envelope: &[f64]) -> Option<f64> {
    let fps = frame_rate();
    let smooth = gaussian_smooth(envelope, 1.0);
    let mean = smooth.iter().sum::<f64>() / smooth.len().max(1) as f64;
    let centered: Vec<f64> = smooth.iter().map(|v| v - mean).collect();
    let min_lag = (60.0 * fps / MAX_BPM).floor().max(1.0) as usize;
    let max_lag = ((60.0 * fps / MIN_BPM).ceil() as usize).min(centered.len().saturating_sub(2));
    if max_lag <= min_lag + 1 {
        return None;
    }
    let energy: f64 = centered.iter().map(|v| v * v).sum();
    if energy <= 0.0 {
        return None;
    }
    let ac: Vec<f64> = (0..=max_lag + 1)
        .map(|lag| {
            let s: f64 = centered[..centered.len() - lag]
                .iter()
                .zip(&centered[lag..])
                .map(|(a, b)| a * b)
                .sum();
            s / energy
        })
        .collect();

    let score = |lag: usize| -> f64 {
        let bpm = 60.0 * fps / lag as f64;
        let prior = -0.5 * (bpm.log2() - PRIOR_BPM.log2()).powi(2);
        (1.0 + 1e6 * ac[lag].max(0.0)).ln() + prior
    };
    let best = (min_lag..=max_lag).max_by(|&a, &b| score(a).total_cmp(&score(b)))?;
    if ac[best] <= 0.0 {
        return None;
    }
    // Parabolic refinement of the peak lag.
    let (y0, y1, y2) = (ac[best - 1], ac[best], ac[best + 1]);
    let denom = y0 - 2.0 * y1 + y2;
    let offset = if denom < 0.0 { (0.5 * (y0 - y2) / denom).clamp(-0.5, 0.5) } else { 0.0 };
    Some(60.0 * fps / (best as f64 + offset))
}

/// Dynamic-programming beat placement over onset frames. Returns beat frame indices.
fn track(envelope: &[f64], period: f64) -> Vec<usize> {
    let n = envelope.len();
    let sd = {
        let mean = envelope.iter().sum::<f64>() / n as f64;
        (envelope.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1).max(1) as f64).sqrt()
    };
    let onset: Vec<f64> = envelope.iter().map(|v| v / sd.max(1e-12)).collect();

    // Local score: onset envelope smoothed with a Gaussian whose width tracks the period.
    let half = period.round() as isize;
    let kernel: Vec<f64> = (-half..=half)
        .map(|i| (-0.5 * (i as f64 * 32.0 / period).powi(2)).exp())
        .collect();
    let local: Vec<f64> = (0..n as isize)
        .map(|i| {
            (-half..=half)
                .filter(|k| (0..n as isize).contains(&(i - k)))
                .map(|k| onset[(i - k) as usize] * kernel[(k + half) as usize])
                .sum()
        })
        .collect();

    let min_back = (period / 2.0).round().max(1.0) as usize;
    let max_back = (2.0 * period).round() as usize;
    let local_max = local.iter().copied().fold(0.0f64, f64::max);
    let mut cum = vec![0.0f64; n];
    let mut backlink: Vec<Option<usize>> = vec![None; n];
    let mut started = false;
    for i in 0..n {
        let mut best: Option<(f64, usize)> = None;
        if i >= min_back {
            let lo = i.saturating_sub(max_back);
            for j in lo..=i - min_back {
                let interval = (i - j) as f64;
                let penalty = -TIGHTNESS * (interval / period).ln().powi(2);
                let s = cum[j] + penalty;
                if best.is_none_or(|(b, _)| s > b) {
                    best = Some((s, j));
                }
            }
        }
        // Before the first real onset there is nothing to link back to.
        if !started && local[i] < 0.01 * local_max {
            cum[i] = local[i];
            continue;
        }
        started = true;
        match best {
            Some((s, j)) => {
                cum[i] = local[i] + s;
                backlink[i] = Some(j);
            }
            None => cum[i] = local[i],
        }
    }

    // Last beat: final local maximum of the cumulative score above half the median peak.
    let peaks: Vec<usize> = (1..n.saturating_sub(1))
        .filter(|&i| cum[i] > cum[i - 1] && cum[i] >= cum[i + 1])
        .collect();
    if peaks.is_empty() {
        return Vec::new();
    }
    let mut peak_values: Vec<f64> = peaks.iter().map(|&i| cum[i]).collect();
    peak_values.sort_by(f64::total_cmp);
    let median = peak_values[peak_values.len() / 2];
    let last = peaks
        .iter()
        .rev()
        .copied()
        .find(|&i| cum[i] >= 0.5 * median)
        .unwrap_or(peaks[peaks.len() - 1]);

    let mut beats = vec![last];
    let mut cur = last;
    while let Some(prev) = backlink[cur] {
        beats.push(prev);
        cur = prev;
    }
    beats.reverse();

    // Drop weak beats at either end (fade-in/out regions).
    let strength: Vec<f64> = beats.iter().map(|&b| local[b]).collect();
    let rms = (strength.iter().map(|v| v * v).sum::<f64>() / strength.len() as f64).sqrt();
    let threshold = 0.5 * rms;
    let first = strength.iter().position(|&s| s >= threshold).unwrap_or(0);
    let end = strength.iter().rposition(|&s| s >= threshold).map_or(beats.len(), |p| p + 1);
    beats[first..end].to_vec()
}

/// Detects beats in mono samples. Silent input yields an empty grid and a warning.
pub fn detect_beats(samples: &[f32], sample_rate: u32) -> Result<(BeatGrid, Vec<String>)> {
    if sample_rate == 0 {
        return Err(Error::InvalidArgument("sample rate must be positive".into()));
    }
    let duration = samples.len() as f64 / sample_rate as f64;
    if duration < MIN_TRACK_SECONDS {
        return Err(Error::TrackTooShort(duration));
    }
    let silent = BeatGrid {
        beats: Vec::new(),
        tempo: 0.0,
    };
    let peak = samples.iter().fold(0.0f32, |m, s| m.max(s.abs()));
    if peak < 1e-6 {
        return Ok((silent, vec!["music: silent track, no beats detected".into()]));
    }

    let signal = resample_linear(samples, sample_rate, ANALYSIS_RATE);
    let envelope = onset_envelope(&signal);
    let max_onset = envelope.iter().copied().fold(0.0f64, f64::max);
    let Some(tempo) = estimate_tempo(&envelope).filter(|_| max_onset > 1e-6) else {
        return Ok((silent, vec!["music: no periodic onsets, no beats detected".into()]));
    };

    let period = 60.0 * frame_rate() / tempo;
    let frames = track(&envelope, period);
    let seconds_per_frame = HOP as f64 / ANALYSIS_RATE as f64;
    let mut beats: Vec<f64> = Vec::with_capacity(frames.len());
    for f in frames {
        let t = (f as f64 * seconds_per_frame).min(duration);
        if beats.last().is_none_or(|&last| t > last) {
            beats.push(t);
        }
    }
    let grid = BeatGrid { beats, tempo };
    debug_assert!(grid.is_valid(duration));
    Ok((grid, Vec::new()))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Short decaying 1 kHz bursts at the given times.
    fn clicks(times: &[f64], sr: u32, seconds: f64) -> Vec<f32> {
        let mut out = vec![0.0f32; (seconds * sr as f64) as usize];
        for &t in times {
            let start = (t * sr as f64).round() as usize;
            for i in 0..(0.02 * sr as f64) as usize {
                if let Some(s) = out.get_mut(start + i) {
                    let tt = i as f64 / sr as f64;
                    *s += (0.8 * (-tt * 200.0).exp() * (2.0 * std::f64::consts::PI * 1000.0 * tt).sin()) as f32;
                }
            }
        }
        out
    }

    #[test]
    fn short_track_rejected() {
        let err = detect_beats(&vec![0.1; 3 * 22050], 22050).unwrap_err();
        assert!(matches!(err, Error::TrackTooShort(_)));
    }

    #[test]
    fn silence_gives_empty_grid_with_warning() {
        let (grid, warnings) = detect_beats(&vec![0.0; 6 * 22050], 22050).unwrap();
        assert!(grid.is_empty());
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn shifted_clicks_keep_intervals() {
        let times: Vec<f64> = (0..20).map(|k| 0.5 + k as f64 * 0.5).collect();
        let shifted: Vec<f64> = times.iter().map(|t| t + 0.1).collect();
        let (a, _) = detect_beats(&clicks(&times, 22050, 11.0), 22050).unwrap();
        let (b, _) = detect_beats(&clicks(&shifted, 22050, 11.0), 22050).unwrap();
        let ia = a.median_interval().unwrap();
        let ib = b.median_interval().unwrap();
        assert!((ia - ib).abs() < 0.03, "{ia} vs {ib}");
        assert!((a.tempo - b.tempo).abs() < 1.0);
    }

    #[test]
    fn click_track_tempo_and_alignment() {
        let times: Vec<f64> = (0..60).map(|k| k as f64 * 0.5).collect();
        let (g, _) = detect_beats(&clicks(&times, 22050, 30.0), 22050).unwrap();
        assert!((g.tempo - 120.0).abs() <= 2.0, "tempo {}", g.tempo);
        let matched = times
            .iter()
            .filter(|&&c| g.beats.iter().any(|b| (b - c).abs() <= 0.05))
            .count();
        assert!(matched * 100 >= 95 * times.len(), "{matched}/60");
        assert!(g.is_valid(30.0));
    }

    #[test]
    fn looped_grid_stays_increasing() {
        let g = BeatGrid {
            beats: vec![0.0, 0.25, 2.0, 4.0, 5.9],
            tempo: 30.0,
        };
        let l = g.looped(6.0, 1.0, 20.0);
        assert!(l.beats.windows(2).all(|w| w[0] < w[1]), "{:?}", l.beats);
        // Copy 1 starts at 5.0: 0.25 -> 5.25 is dropped (inside the seam), 2.0 -> 7.0 kept.
        assert_eq!(&l.beats[..5], &[0.0, 0.25, 2.0, 4.0, 7.0]);
        assert!(*l.beats.last().unwrap() > 20.0);
    }

    #[test]
    fn fixed_grid() {
        let g = BeatGrid::fixed(4.0, 10.0);
        assert_eq!(g.beats, vec![0.0, 4.0, 8.0]);
        assert!(g.is_valid(10.0));
    }
}
