//! Python bindings for storycut.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use storycut::assets::{decode_frames_with, probe, AssetKind, StyleChoice, UserRequirements};
use storycut::codec::CodecConfig;
use storycut::narration::AssetDescription;
use storycut::pipeline::{ComposeOptions, Stage};

create_exception!(storycut, StorycutError, PyException);

fn err(e: impl std::fmt::Display) -> PyErr {
    StorycutError::new_err(e.to_string())
}

/// 64-bit perceptual hash of an image file.
#[pyfunction]
fn phash(path: PathBuf) -> PyResult<u64> {
    let frame = storycut::frame::load_frame(&path).map_err(err)?;
    Ok(storycut::keyframe::phash(&frame).0)
}

/// Fraction of equal bits between two hashes.
#[pyfunction]
fn similarity(a: u64, b: u64) -> f64 {
    storycut::keyframe::similarity(storycut::keyframe::PerceptualHash(a), storycut::keyframe::PerceptualHash(b))
}

/// Scene segments of a video as `(start_frame, end_frame, keyframe_index)`.
#[pyfunction]
#[pyo3(signature = (path, threshold = storycut::keyframe::DEFAULT_THRESHOLD, stride = None))]
fn segment_video(path: PathBuf, threshold: f64, stride: Option<usize>) -> PyResult<Vec<(usize, usize, usize)>> {
    let codec = CodecConfig::default();
    let asset = probe(&path, &codec).map_err(err)?;
    let frames = decode_frames_with(&asset, &codec).map_err(err)?.frames;
    let stride = stride.unwrap_or_else(|| storycut::keyframe::default_stride(asset.frame_rate.unwrap_or(25.0)));
    let segments = storycut::keyframe::segment_video(&frames, threshold, stride).map_err(err)?;
    Ok(segments
        .into_iter()
        .map(|s| (s.start_frame, s.end_frame, s.keyframe_index))
        .collect())
}

/// Tempo and beat times of a PCM track.
#[pyfunction]
fn detect_beats(path: PathBuf) -> PyResult<(f64, Vec<f64>)> {
    let pcm = storycut::audio::read_wav(&path).map_err(err)?;
    let (grid, _) = storycut::music::detect_beats(&pcm.to_mono(), pcm.sample_rate).map_err(err)?;
    Ok((grid.tempo, grid.beats))
}

#[pyclass(frozen, get_all, module = "storycut")]
struct Placement {
    mode: String,
    fg_width: u32,
    fg_height: u32,
    fg_offset_x: u32,
    fg_offset_y: u32,
    bg_width: u32,
    bg_height: u32,
    bg_blur_sigma: f64,
}

#[pymethods]
impl Placement {
    fn __repr__(&self) -> String {
        format!(
            "Placement(mode={}, fg={}x{}+{}+{}, bg={}x{})",
            self.mode, self.fg_width, self.fg_height, self.fg_offset_x, self.fg_offset_y, self.bg_width, self.bg_height
        )
    }
}

/// Foreground and background geometry for a source in a target frame (height first).
#[pyfunction]
fn fit_material(h_o: u32, w_o: u32, h_t: u32, w_t: u32) -> PyResult<Placement> {
    if h_o == 0 || w_o == 0 || h_t == 0 || w_t == 0 {
        return Err(err("dimensions must be positive"));
    }
    let p = storycut::timeline::fit_material(h_o, w_o, h_t, w_t);
    Ok(Placement {
        mode: format!("{:?}", p.mode),
        fg_width: p.fg_width,
        fg_height: p.fg_height,
        fg_offset_x: p.fg_offset_x,
        fg_offset_y: p.fg_offset_y,
        bg_width: p.bg_width,
        bg_height: p.bg_height,
        bg_blur_sigma: p.bg_blur_sigma,
    })
}

/// Director prompt. `descriptions` holds `(asset_id, "image" | "video", lines)`.
#[pyfunction]
#[pyo3(signature = (descriptions, theme = String::new(), time = String::new(), location = String::new(), requirement = String::new()))]
fn build_prompt(
    descriptions: Vec<(u32, String, Vec<String>)>,
    theme: String,
    time: String,
    location: String,
    requirement: String,
) -> PyResult<String> {
    let reqs = UserRequirements {
        theme,
        time,
        location,
        requirement,
        ..UserRequirements::default()
    };
    let descriptions = descriptions
        .into_iter()
        .map(|(asset_id, kind, lines)| {
            let kind = match kind.to_ascii_lowercase().as_str() {
                "image" => AssetKind::Image,
                "video" => AssetKind::Video,
                other => return Err(err(format!("unknown asset kind {other:?}"))),
            };
            Ok(AssetDescription { asset_id, kind, lines })
        })
        .collect::<PyResult<Vec<_>>>()?;
    Ok(storycut::narration::build_prompt(&reqs, &descriptions))
}

#[pyclass(frozen, get_all, module = "storycut")]
struct DirectorPlan {
    order: Vec<u32>,
    title: String,
    captions: BTreeMap<u32, String>,
    closing: String,
    music_name: String,
    warnings: Vec<String>,
}

#[pymethods]
impl DirectorPlan {
    fn __repr__(&self) -> String {
        format!("DirectorPlan(order={:?}, title={:?})", self.order, self.title)
    }
}

/// Parses a director response; the order is repaired into a permutation of `expected_ids`.
#[pyfunction]
fn parse_plan(response: &str, expected_ids: Vec<u32>) -> PyResult<DirectorPlan> {
    let p = storycut::narration::parse_plan(response, &expected_ids).map_err(err)?;
    Ok(DirectorPlan {
        order: p.order,
        title: p.title,
        captions: p.captions,
        closing: p.closing,
        music_name: p.music_name,
        warnings: p.warnings,
    })
}

/// Type-token ratio over all texts.
#[pyfunction]
fn ttr(texts: Vec<String>) -> PyResult<f64> {
    storycut::eval::ttr(&texts).map_err(err)
}

#[pyfunction]
fn build_judge_prompt(script: &str, frames: Vec<String>) -> PyResult<String> {
    Ok(storycut::eval::build_judge_prompt(script, &frames).map_err(err)?.text)
}

#[pyclass(frozen, get_all, module = "storycut")]
struct JudgeScores {
    consistency: u8,
    logicality: u8,
    vividness: u8,
    aesthetic: u8,
    overall: u8,
    average: f64,
    reasons: BTreeMap<String, String>,
}

#[pyfunction]
fn parse_judge_response(text: &str) -> PyResult<JudgeScores> {
    let s = storycut::eval::parse_judge_response(text).map_err(err)?;
    Ok(JudgeScores {
        consistency: s.consistency,
        logicality: s.logicality,
        vividness: s.vividness,
        aesthetic: s.aesthetic,
        overall: s.overall,
        average: s.average,
        reasons: s.reasons,
    })
}

/// Runs the compose pipeline and returns the run report as JSON text.
#[pyfunction]
#[pyo3(signature = (manifest, out, mock_adapters = false, seed = None, style = None, stop_after = None, resume_from = None))]
fn compose(
    py: Python<'_>,
    manifest: PathBuf,
    out: PathBuf,
    mock_adapters: bool,
    seed: Option<u64>,
    style: Option<String>,
    stop_after: Option<String>,
    resume_from: Option<String>,
) -> PyResult<String> {
    let mut opts = ComposeOptions::new(manifest, out);
    opts.mock_adapters = mock_adapters;
    opts.seed = seed;
    opts.style = style.map(|s| s.parse::<StyleChoice>()).transpose().map_err(err)?;
    opts.stop_after = stop_after.map(|s| s.parse::<Stage>()).transpose().map_err(err)?;
    opts.resume_from = resume_from.map(|s| s.parse::<Stage>()).transpose().map_err(err)?;
    let result = py.detach(|| storycut::pipeline::compose(&opts));
    match result {
        Ok(report) => serde_json::to_string(&report).map_err(err),
        Err((e, report)) => {
            let stage = report.failed_stage.map(|s| s.to_string()).unwrap_or_default();
            Err(err(format!("stage {stage} failed: {e}")))
        }
    }
}

/// Samples clips per class and writes manifests; returns their paths.
#[pyfunction]
#[pyo3(signature = (root, out, per_class = storycut::dataset::DEFAULT_PER_CLASS, seed = 0))]
fn sample_dataset(root: PathBuf, out: PathBuf, per_class: usize, seed: u64) -> PyResult<Vec<PathBuf>> {
    let (samples, _) = storycut::dataset::sample_dataset(&root, per_class, seed).map_err(err)?;
    storycut::dataset::write_manifests(&samples, &out, seed, None).map_err(err)
}

#[pymodule(name = "storycut")]
fn storycut_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("StorycutError", m.py().get_type::<StorycutError>())?;
    m.add_class::<Placement>()?;
    m.add_class::<DirectorPlan>()?;
    m.add_class::<JudgeScores>()?;
    m.add_function(wrap_pyfunction!(phash, m)?)?;
    m.add_function(wrap_pyfunction!(similarity, m)?)?;
    m.add_function(wrap_pyfunction!(segment_video, m)?)?;
    m.add_function(wrap_pyfunction!(detect_beats, m)?)?;
    m.add_function(wrap_pyfunction!(fit_material, m)?)?;
    m.add_function(wrap_pyfunction!(build_prompt, m)?)?;
    m.add_function(wrap_pyfunction!(parse_plan, m)?)?;
    m.add_function(wrap_pyfunction!(ttr, m)?)?;
    m.add_function(wrap_pyfunction!(build_judge_prompt, m)?)?;
    m.add_function(wrap_pyfunction!(parse_judge_response, m)?)?;
    m.add_function(wrap_pyfunction!(compose, m)?)?;
    m.add_function(wrap_pyfunction!(sample_dataset, m)?)?;
    Ok(())
}
