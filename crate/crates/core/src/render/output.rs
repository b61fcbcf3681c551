use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assets::FrameStore;
use crate::audio::{read_wav, write_wav16, Pcm};
use crate::codec::CodecConfig;
use crate::error::{Error, Result};
use crate::frame::{load_frame, save_png};
use crate::timeline::{loop_crossfade, Timeline};

use super::compose::Compositor;
use super::style::StyleAdapter;

pub const AUDIO_FILE: &str = "audio.wav";
pub const META_FILE: &str = "meta";
const SILENCE_RATE: u32 = 44_100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum OutputKind {
    FrameDirectory,
    /// Frame directory plus an encoded file written by the external transcoder.
    ContainerFile(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderConfig {
    pub width: u32,
    pub height: u32,
    pub frame_rate: f64,
    pub output: OutputKind,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl RenderConfig {
    pub fn new(width: u32, height: u32, frame_rate: f64) -> Self {
        RenderConfig {
            width,
            height,
            frame_rate,
            output: OutputKind::FrameDirectory,
            workers: None,
        }
    }

    fn validate(&self, timeline: &Timeline) -> Result<()> {
        if self.width == 0 || self.height == 0 || self.frame_rate.is_nan() || self.frame_rate <= 0.0 {
            return Err(Error::InvalidArgument("render size and frame rate must be positive".into()));
        }
        if (self.width, self.height) != (timeline.width, timeline.height) {
            return Err(Error::InvalidArgument(format!(
                "render size {}x{} differs from timeline {}x{}",
                self.width, self.height, timeline.width, timeline.height
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderReport {
    pub frames: usize,
    pub duration: f64,
    pub directory: PathBuf,
    pub container: Option<PathBuf>,
    pub warnings: Vec<String>,
}

/// `round(duration * frame_rate)`.
pub fn frame_count(duration: f64, frame_rate: f64) -> usize {
    (duration * frame_rate).round() as usize
}

pub fn frame_path(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("frame_{index:06}.png"))
}

fn frame_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("frame_") && n.ends_with(".png"))
        })
        .collect();
    files.sort();
    Ok(files)
}

/// Repeats `pcm` back to back with a linear crossfade at each seam and cuts it to `seconds`.
pub fn loop_audio(pcm: &Pcm, seconds: f64, crossfade: f64) -> Pcm {
    let ch = pcm.channels.max(1) as usize;
    let src_frames = pcm.frames();
    let needed = (seconds * pcm.sample_rate as f64).round() as usize;
    let xf = ((crossfade * pcm.sample_rate as f64).round() as usize).min(src_frames / 2);
    let mut out: Vec<f32> = Vec::with_capacity(needed * ch);
    if src_frames == 0 {
        out.resize(needed * ch, 0.0);
    } else {
        out.extend_from_slice(&pcm.samples);
        while out.len() / ch < needed {
            let tail = out.len() / ch - xf;
            for i in 0..xf {
                let w = (i as f32 + 0.5) / xf as f32;
                for c in 0..ch {
                    let o = &mut out[(tail + i) * ch + c];
                    *o = *o * (1.0 - w) + pcm.samples[i * ch + c] * w;
                }
            }
            out.extend_from_slice(&pcm.samples[xf * ch..]);
        }
    }
    out.truncate(needed * ch);
    Pcm {
        samples: out,
        sample_rate: pcm.sample_rate,
        channels: pcm.channels,
    }
}

/// Music for the whole timeline: the track, looped if needed, cut to the edit length.
pub fn soundtrack(timeline: &Timeline) -> Result<Pcm> {
    match &timeline.music {
        Some(track) => {
            let pcm = read_wav(&track.path)?;
            Ok(loop_audio(&pcm, timeline.total_duration, loop_crossfade(pcm.duration())))
        }
        None => Ok(Pcm {
            samples: vec![0.0; (timeline.total_duration * SILENCE_RATE as f64).round() as usize],
            sample_rate: SILENCE_RATE,
            channels: 1,
        }),
    }
}

fn write_meta(dir: &Path, cfg: &RenderConfig, frames: usize, duration: f64) -> Result<()> {
    let path = dir.join(META_FILE);
    let text = format!(
        "fps = {}\nwidth = {}\nheight = {}\nframes = {frames}\nduration = {duration:.6}\n",
        cfg.frame_rate, cfg.width, cfg.height
    );
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

fn with_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}"))),
        None => Ok(f()),
    }
}

/// Renders every frame of `timeline` into `out_dir` as `frame_%06d.png`, with
/// the soundtrack in `audio.wav` and a `meta` file. Frames pass through `style`
/// after compositing.
pub fn render_video(
    timeline: &Timeline,
    frames: &FrameStore,
    cfg: &RenderConfig,
    style: &StyleAdapter,
    out_dir: &Path,
    codec: &CodecConfig,
) -> Result<RenderReport> {
    cfg.validate(timeline)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    for stale in frame_files(out_dir)? {
        std::fs::remove_file(&stale).map_err(|e| Error::io(&stale, e))?;
    }

    let n = frame_count(timeline.total_duration, cfg.frame_rate);
    let compositor = Compositor::new(timeline, frames);
    let warnings = Mutex::new(Vec::new());
    with_pool(cfg.workers, || {
        (0..n).into_par_iter().try_for_each(|k| -> Result<()> {
            let t = k as f64 / cfg.frame_rate;
            let frame = compositor.frame_at(t)?;
            let (frame, warning) = style.apply_or_identity(&frame);
            if let Some(w) = warning {
                warnings.lock().unwrap().push((k, w));
            }
            save_png(&frame_path(out_dir, k), &frame)
        })
    })??;

    let audio_path = out_dir.join(AUDIO_FILE);
    write_wav16(&audio_path, &soundtrack(timeline)?)?;
    write_meta(out_dir, cfg, n, timeline.total_duration)?;

    let mut indexed = warnings.into_inner().unwrap();
    indexed.sort();
    let mut warnings: Vec<String> = indexed.into_iter().map(|(k, w)| format!("frame {k}: {w}")).collect();

    let container = match &cfg.output {
        OutputKind::FrameDirectory => None,
        OutputKind::ContainerFile(path) => {
            let (written, warning) = encode_container(out_dir, cfg.frame_rate, path, codec)?;
            warnings.extend(warning);
            written
        }
    };

    Ok(RenderReport {
        frames: n,
        duration: timeline.total_duration,
        directory: out_dir.to_path_buf(),
        container,
        warnings,
    })
}

/// Encodes a frame directory with the external transcoder. A missing tool
/// is not fatal: the frame directory stays the output and a warning is returned.
pub fn encode_container(
    dir: &Path,
    frame_rate: f64,
    output: &Path,
    codec: &CodecConfig,
) -> Result<(Option<PathBuf>, Option<String>)> {
    match codec.encode(dir, &dir.join(AUDIO_FILE), frame_rate, output) {
        Ok(()) => Ok((Some(output.to_path_buf()), None)),
        Err(Error::Codec(msg)) if msg.contains("not found") => {
            Ok((None, Some(format!("{msg}; kept the frame directory only"))))
        }
        Err(e) => Err(e),
    }
}

/// Styles every frame of a rendered directory into `out_dir`. Audio and meta
/// are copied byte for byte.
pub fn stylize_directory(
    in_dir: &Path,
    out_dir: &Path,
    style: &StyleAdapter,
    workers: Option<usize>,
) -> Result<Vec<String>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    for stale in frame_files(out_dir)? {
        std::fs::remove_file(&stale).map_err(|e| Error::io(&stale, e))?;
    }
    let inputs = frame_files(in_dir)?;
    let results: Vec<Option<String>> = with_pool(workers, || {
        inputs
            .par_iter()
            .map(|path| -> Result<Option<String>> {
                let frame = load_frame(path)?;
                let (styled, warning) = style.apply_or_identity(&frame);
                let name = path.file_name().expect("frame files have names");
                save_png(&out_dir.join(name), &styled)?;
                Ok(warning.map(|w| format!("{}: {w}", name.to_string_lossy())))
            })
            .collect::<Result<Vec<_>>>()
    })??;
    for name in [AUDIO_FILE, META_FILE] {
        let (src, dst) = (in_dir.join(name), out_dir.join(name));
        if src.exists() {
            std::fs::copy(&src, &dst).map_err(|e| Error::io(&dst, e))?;
        }
    }
    Ok(results.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_count_rounds() {
        assert_eq!(frame_count(10.0, 25.0), 250);
        assert_eq!(frame_count(3.98, 25.0), 100);
    }

    #[test]
    fn loop_covers_and_crossfades() {
        let pcm = Pcm {
            samples: vec![1.0; 100],
            sample_rate: 10,
            channels: 1,
        };
        let out = loop_audio(&pcm, 25.0, 1.0);
        assert_eq!(out.frames(), 250);
        // Constant input stays constant through a linear crossfade.
        assert!(out.samples.iter().all(|&s| (s - 1.0).abs() < 1e-6));

        let ramp = Pcm {
            samples: (0..100).map(|i| i as f32).collect(),
            sample_rate: 10,
            channels: 1,
        };
        let out = loop_audio(&ramp, 12.0, 1.0);
        // Second copy starts at frame 90 and plays its own frame 10 at frame 100.
        assert_eq!(out.samples[100], 10.0);
        assert_eq!(out.samples[89], 89.0);
    }
}
