//! External transcoder integration.
//!
//! Container files are never decoded in-process. An external tool (ffmpeg by
//! default) is run with an explicit argument template; `{input}`, `{output}`,
//! `{frames}`, `{audio}` and `{fps}` are substituted per call.

use std::path::Path;
use std::process::Command;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CodecConfig {
    pub transcoder: String,
    pub prober: String,
    pub encode_args: Vec<String>,
    pub decode_args: Vec<String>,
    pub probe_args: Vec<String>,
}

impl Default for CodecConfig {
    fn default() -> Self {
        let args = |s: &[&str]| s.iter().map(|a| a.to_string()).collect();
        CodecConfig {
            transcoder: "ffmpeg".into(),
            prober: "ffprobe".into(),
            encode_args: args(&[
                "-y", "-v", "error", "-framerate", "{fps}", "-start_number", "0", "-i",
                "{frames}", "-i", "{audio}", "-c:v", "libx264", "-pix_fmt", "yuv420p", "-c:a",
                "aac", "-shortest", "{output}",
            ]),
            decode_args: args(&[
                "-v", "error", "-i", "{input}", "-vsync", "0", "-start_number", "0", "{frames}",
            ]),
            probe_args: args(&[
                "-v",
                "error",
                "-select_streams",
                "v:0",
                "-show_entries",
                "stream=width,height,r_frame_rate,duration",
                "-of",
                "default=noprint_wrappers=1",
                "{input}",
            ]),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeInfo {
    pub width: u32,
    pub height: u32,
    pub frame_rate: f64,
    pub duration: f64,
}

#[derive(Default)]
struct Substitutions<'a> {
    input: Option<&'a Path>,
    output: Option<&'a Path>,
    frames: Option<&'a Path>,
    audio: Option<&'a Path>,
    fps: Option<f64>,
}

fn expand(template: &[String], subs: &Substitutions<'_>) -> Vec<String> {
    let path = |p: Option<&Path>| p.map(|p| p.display().to_string()).unwrap_or_default();
    template
        .iter()
        .map(|arg| {
            arg.replace("{input}", &path(subs.input))
                .replace("{output}", &path(subs.output))
                .replace("{frames}", &path(subs.frames))
                .replace("{audio}", &path(subs.audio))
                .replace("{fps}", &subs.fps.map(|f| f.to_string()).unwrap_or_default())
        })
        .collect()
}

fn run(program: &str, args: &[String]) -> Result<String> {
    let output = Command::new(program).args(args).output().map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::Codec(format!("transcoder `{program}` not found"))
        } else {
            Error::Codec(format!("failed to run `{program}`: {e}"))
        }
    })?;
    if !output.status.success() {
        return Err(Error::Codec(format!(
            "`{program}` exited with {}: {}",
            output.status,
            String::from_utf8_lossy(&output.stderr).trim()
        )));
    }
    Ok(String::from_utf8_lossy(&output.stdout).into_owned())
}

impl CodecConfig {
    pub fn with_tools(transcoder: impl Into<String>, prober: impl Into<String>) -> Self {
        CodecConfig {
            transcoder: transcoder.into(),
            prober: prober.into(),
            ..CodecConfig::default()
        }
    }

    pub fn probe(&self, input: &Path) -> Result<ProbeInfo> {
        let args = expand(
            &self.probe_args,
            &Substitutions {
                input: Some(input),
                ..Default::default()
            },
        );
        parse_probe(&run(&self.prober, &args)?)
    }

    /// Decodes `input` into numbered PNG frames under `frames_dir`.
    pub fn decode(&self, input: &Path, frames_dir: &Path) -> Result<()> {
        let pattern = frames_dir.join("frame_%06d.png");
        let args = expand(
            &self.decode_args,
            &Substitutions {
                input: Some(input),
                frames: Some(&pattern),
                ..Default::default()
            },
        );
        run(&self.transcoder, &args).map(|_| ())
    }

    pub fn encode(&self, frames_dir: &Path, audio: &Path, fps: f64, output: &Path) -> Result<()> {
        let pattern = frames_dir.join("frame_%06d.png");
        let args = expand(
            &self.encode_args,
            &Substitutions {
                output: Some(output),
                frames: Some(&pattern),
                audio: Some(audio),
                fps: Some(fps),
                ..Default::default()
            },
        );
        run(&self.transcoder, &args).map(|_| ())
    }
}

fn parse_probe(text: &str) -> Result<ProbeInfo> {
    let mut width = None;
    let mut height = None;
    let mut fps = None;
    let mut duration = None;
    for line in text.lines() {
        let Some((key, value)) = line.split_once('=') else {
            continue;
        };
        let value = value.trim();
        match key.trim() {
            "width" => width = value.parse().ok(),
            "height" => height = value.parse().ok(),
            "duration" => duration = value.parse().ok(),
            "r_frame_rate" => {
                fps = match value.split_once('/') {
                    Some((n, d)) => match (n.parse::<f64>(), d.parse::<f64>()) {
                        (Ok(n), Ok(d)) if d > 0.0 => Some(n / d),
                        _ => None,
                    },
                    None => value.parse().ok(),
                }
            }
            _ => {}
        }
    }
    match (width, height, fps, duration) {
        (Some(width), Some(height), Some(frame_rate), Some(duration))
            if width > 0 && height > 0 && frame_rate > 0.0 && duration > 0.0 =>
        {
            Ok(ProbeInfo {
                width,
                height,
                frame_rate,
                duration,
            })
        }
        _ => Err(Error::Codec(format!("incomplete probe output: {text:?}"))),
    }
}
