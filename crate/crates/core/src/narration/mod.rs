//! Asset descriptions, the director prompt, and the structured story plan.

pub mod adapter;
mod plan;
mod prompt;

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::assets::{AssetKind, FrameStore, MediaAsset};
use crate::error::{Error, Result};
use crate::keyframe::VideoSegment;

pub use adapter::{CaptionRequest, Captioner, ChatModel, CAPTION_QUESTION};
pub use plan::{parse_plan, DirectorPlan, CAPTION_WORD_LIMIT, CLOSING_WORD_LIMIT, TITLE_WORD_LIMIT};
pub use prompt::{build_prompt, detailed_requirements, input_descriptions, task_description};

/// Substituted when the captioner fails on an image or keyframe.
pub const PLACEHOLDER_DESCRIPTION: &str = "an unrecognized scene";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssetDescription {
    pub asset_id: u32,
    pub kind: AssetKind,
    /// One line for an image, one per keyframe for a video.
    pub lines: Vec<String>,
}

fn single_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Captions every image and every video keyframe, at most `max_in_flight` calls at once.
///
/// Adapter failures never abort the run: the affected line becomes
/// [`PLACEHOLDER_DESCRIPTION`] and a warning is returned.
pub fn describe_assets(
    assets: &[MediaAsset],
    segments: &BTreeMap<u32, Vec<VideoSegment>>,
    frames: &FrameStore,
    captioner: &dyn Captioner,
    max_in_flight: usize,
) -> Result<(Vec<AssetDescription>, Vec<String>)> {
    // (asset index, keyframe number, frame index)
    let mut jobs = Vec::new();
    for (i, asset) in assets.iter().enumerate() {
        match asset.kind {
            AssetKind::Image => jobs.push((i, None, 0usize)),
            AssetKind::Video => {
                let segs = segments.get(&asset.id).filter(|s| !s.is_empty());
                let segs = segs.ok_or(Error::NoKeyframes(asset.id))?;
                jobs.extend(
                    segs.iter()
                        .enumerate()
                        .map(|(k, s)| (i, Some(k + 1), s.keyframe_index)),
                );
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(max_in_flight.max(1))
        .build()
        .map_err(|e| Error::Adapter(format!("cannot build caption pool: {e}")))?;
    let results: Vec<(String, Option<String>)> = pool.install(|| {
        jobs.par_iter()
            .map(|&(i, keyframe, frame_index)| {
                let asset = &assets[i];
                let Some(frame) = frames.frame(asset.id, frame_index) else {
                    return (
                        PLACEHOLDER_DESCRIPTION.to_string(),
                        Some(format!("asset {}: no decoded frame for captioning", asset.id)),
                    );
                };
                let request = CaptionRequest {
                    asset_id: asset.id,
                    keyframe,
                    question: CAPTION_QUESTION,
                    frame,
                };
                match captioner.caption(&request).map(|t| single_line(&t)) {
                    Ok(text) if !text.is_empty() => (text, None),
                    Ok(_) => (
                        PLACEHOLDER_DESCRIPTION.to_string(),
                        Some(format!("asset {}: captioner returned empty text", asset.id)),
                    ),
                    Err(e) => (
                        PLACEHOLDER_DESCRIPTION.to_string(),
                        Some(format!("asset {}: captioner failed: {e}", asset.id)),
                    ),
                }
            })
            .collect()
    });

    let mut descriptions: Vec<AssetDescription> = assets
        .iter()
        .map(|a| AssetDescription {
            asset_id: a.id,
            kind: a.kind,
            lines: Vec::new(),
        })
        .collect();
    let mut warnings = Vec::new();
    for (&(i, _, _), (text, warning)) in jobs.iter().zip(results) {
        descriptions[i].lines.push(text);
        warnings.extend(warning);
    }
    descriptions.sort_by_key(|d| d.asset_id);
    Ok((descriptions, warnings))
}

/// Append-only JSON-lines record of adapter traffic.
pub struct RunLog {
    path: PathBuf,
    lock: Mutex<()>,
}

impl RunLog {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(RunLog {
            path: dir.join("adapter_log.jsonl"),
            lock: Mutex::new(()),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn record(&self, kind: &str, request: &str, response: &str) -> Result<()> {
        let _guard = self.lock.lock().unwrap_or_else(|p| p.into_inner());
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| Error::io(&self.path, e))?;
        let line = json!({ "kind": kind, "request": request, "response": response });
        writeln!(file, "{line}").map_err(|e| Error::io(&self.path, e))
    }
}

/// Sends the director prompt. The response is returned verbatim.
pub fn plan_story(prompt: &str, chat: &dyn ChatModel, log: Option<&RunLog>) -> Result<String> {
    let response = chat.complete(prompt)?;
    if let Some(log) = log {
        log.record("plan", prompt, &response)?;
    }
    if response.trim().is_empty() {
        return Err(Error::EmptyPlan);
    }
    Ok(response)
}
