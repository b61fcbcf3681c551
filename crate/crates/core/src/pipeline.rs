//! Stage-persisting compose pipeline.
//!
//! Every stage writes its artifact under the output directory, so a run can
//! stop after any stage and a later run can resume from any stage.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::assets::{load_manifest_with, AssetKind, FrameStore, LoadedProject, StyleChoice};
use crate::audio::read_wav;
use crate::codec::CodecConfig;
use crate::error::{Error, Result};
use crate::keyframe::{default_stride, segment_video, VideoSegment, DEFAULT_THRESHOLD};
use crate::music::{detect_beats, index_library, retrieve_music, BeatGrid, MatchTier, MusicMatch, FALLBACK_SPACING};
use crate::narration::adapter::{MockChat, RemoteCaptioner, RemoteChat, TemplateCaptioner, Transport};
use crate::narration::{
    build_prompt, describe_assets, parse_plan, plan_story, AssetDescription, Captioner, ChatModel, DirectorPlan,
    RunLog,
};
use crate::render::{encode_container, render_video, stylize_directory, RenderConfig, StyleAdapter, StyleKind};
use crate::timeline::{assemble_timeline, Timeline, TimelineConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Load,
    Keyframes,
    Describe,
    Prompt,
    Plan,
    Parse,
    Retrieve,
    Beats,
    Timeline,
    Render,
    Style,
}

impl Stage {
    pub const ALL: [Stage; 11] = [
        Stage::Load,
        Stage::Keyframes,
        Stage::Describe,
        Stage::Prompt,
        Stage::Plan,
        Stage::Parse,
        Stage::Retrieve,
        Stage::Beats,
        Stage::Timeline,
        Stage::Render,
        Stage::Style,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Load => "load",
            Stage::Keyframes => "keyframes",
            Stage::Describe => "describe",
            Stage::Prompt => "prompt",
            Stage::Plan => "plan",
            Stage::Parse => "parse",
            Stage::Retrieve => "retrieve",
            Stage::Beats => "beats",
            Stage::Timeline => "timeline",
            Stage::Render => "render",
            Stage::Style => "style",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| format!("unknown stage {s:?}"))
    }
}

/// Artifact file names, relative to the output directory.
pub mod artifacts {
    pub const PROJECT: &str = "project.json";
    pub const KEYFRAMES: &str = "keyframes.json";
    pub const DESCRIPTIONS: &str = "descriptions.json";
    pub const PROMPT: &str = "prompt.txt";
    pub const RESPONSE: &str = "response.txt";
    pub const PLAN: &str = "plan.json";
    pub const MUSIC: &str = "music.json";
    pub const BEATS: &str = "beats.json";
    pub const TIMELINE: &str = "timeline.json";
    pub const RENDER_DIR: &str = "render";
    pub const VIDEO_DIR: &str = "video";
    pub const REPORT: &str = "report.json";
}

#[derive(Debug, Clone)]
pub struct ComposeOptions {
    pub manifest: PathBuf,
    pub out: PathBuf,
    /// Deterministic local captioner and chat model instead of remote endpoints.
    pub mock_adapters: bool,
    /// Replayed chat response for mock runs; otherwise a plan is synthesized.
    pub mock_response: Option<PathBuf>,
    pub seed: Option<u64>,
    pub style: Option<StyleChoice>,
    pub stop_after: Option<Stage>,
    pub resume_from: Option<Stage>,
    pub codec: CodecConfig,
    /// Encoded output written after the last frame stage, if the transcoder exists.
    pub container: Option<PathBuf>,
    pub max_in_flight: usize,
    pub workers: Option<usize>,
}

impl ComposeOptions {
    pub fn new(manifest: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        ComposeOptions {
            manifest: manifest.into(),
            out: out.into(),
            mock_adapters: false,
            mock_response: None,
            seed: None,
            style: None,
            stop_after: None,
            resume_from: None,
            codec: CodecConfig::default(),
            container: None,
            max_in_flight: 4,
            workers: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSummary {
    pub title: String,
    pub order: Vec<u32>,
    pub closing: String,
    pub music_name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MusicSummary {
    pub title: String,
    pub path: PathBuf,
    pub tier: MatchTier,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRow {
    pub asset_id: u32,
    pub start: f64,
    pub end: f64,
    pub transition: String,
    pub caption: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub manifest: PathBuf,
    pub output_path: Option<PathBuf>,
    pub success: bool,
    pub failed_stage: Option<Stage>,
    pub error: Option<String>,
    pub completed_stages: Vec<Stage>,
    pub plan: Option<PlanSummary>,
    pub music: Option<MusicSummary>,
    pub tempo: Option<f64>,
    pub segments: Vec<SegmentRow>,
    pub frames: Option<usize>,
    pub warnings: Vec<String>,
    pub wall_time_seconds: f64,
}

impl RunReport {
    fn new(manifest: &Path) -> Self {
        RunReport {
            manifest: manifest.to_path_buf(),
            output_path: None,
            success: false,
            failed_stage: None,
            error: None,
            completed_stages: Vec::new(),
            plan: None,
            music: None,
            tempo: None,
            segments: Vec::new(),
            frames: None,
            warnings: Vec::new(),
            wall_time_seconds: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct BeatsArtifact {
    grid: BeatGrid,
    fallback: bool,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n").map_err(|e| Error::io(path, e))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

#[derive(Default)]
struct RunState {
    project: Option<LoadedProject>,
    frames: Option<FrameStore>,
    keyframes: Option<BTreeMap<u32, Vec<VideoSegment>>>,
    descriptions: Option<Vec<AssetDescription>>,
    prompt: Option<String>,
    response: Option<String>,
    plan: Option<DirectorPlan>,
    music: Option<MusicMatch>,
    beats: Option<BeatGrid>,
    timeline: Option<Timeline>,
}

struct Runner<'a> {
    opts: &'a ComposeOptions,
    state: RunState,
    report: RunReport,
    log: RunLog,
}

fn missing(what: &str) -> Error {
    Error::InvalidArgument(format!("{what} is not available; run the earlier stages first"))
}

impl Runner<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.opts.out.join(name)
    }

    fn warn(&mut self, warnings: impl IntoIterator<Item = String>) {
        self.report.warnings.extend(warnings);
    }

    fn project(&self) -> Result<&LoadedProject> {
        self.state.project.as_ref().ok_or_else(|| missing("project"))
    }

    fn seed(&self) -> Result<u64> {
        Ok(self.opts.seed.unwrap_or(self.project()?.manifest.requirements.seed))
    }

    fn style_choice(&self) -> Result<StyleChoice> {
        Ok(self.opts.style.unwrap_or(self.project()?.manifest.requirements.style))
    }

    fn frames(&mut self) -> Result<&FrameStore> {
        if self.state.frames.is_none() {
            let project = self.project()?;
            let (store, warnings) = FrameStore::decode_all(&project.assets, &self.opts.codec)?;
            self.warn(warnings);
            self.state.frames = Some(store);
        }
        Ok(self.state.frames.as_ref().expect("just decoded"))
    }

    /// Runs `stage`, or reloads its artifact when resuming past it.
    fn step(&mut self, stage: Stage) -> Result<()> {
        let replay = stage != Stage::Load && self.opts.resume_from.is_some_and(|r| stage < r);
        if replay {
            self.reload(stage)
        } else {
            self.run(stage)
        }
    }

    fn reload(&mut self, stage: Stage) -> Result<()> {
        use artifacts::*;
        match stage {
            Stage::Load => {}
            Stage::Keyframes => self.state.keyframes = Some(read_json(&self.path(KEYFRAMES))?),
            Stage::Describe => self.state.descriptions = Some(read_json(&self.path(DESCRIPTIONS))?),
            Stage::Prompt => self.state.prompt = Some(read_text(&self.path(PROMPT))?),
            Stage::Plan => self.state.response = Some(read_text(&self.path(RESPONSE))?),
            Stage::Parse => self.state.plan = Some(read_json(&self.path(PLAN))?),
            Stage::Retrieve => self.state.music = Some(read_json(&self.path(MUSIC))?),
            Stage::Beats => {
                let art: BeatsArtifact = read_json(&self.path(BEATS))?;
                self.state.beats = Some(art.grid);
            }
            Stage::Timeline => self.state.timeline = Some(Timeline::load(&self.path(TIMELINE))?),
            Stage::Render | Stage::Style => {}
        }
        self.summarize();
        Ok(())
    }

    fn summarize(&mut self) {
        if let Some(plan) = &self.state.plan {
            self.report.plan = Some(PlanSummary {
                title: plan.title.clone(),
                order: plan.order.clone(),
                closing: plan.closing.clone(),
                music_name: plan.music_name.clone(),
            });
        }
        if let Some(m) = &self.state.music {
            self.report.music = Some(MusicSummary {
                title: m.track.title.clone(),
                path: m.track.path.clone(),
                tier: m.tier,
                distance: m.distance,
            });
        }
        if let Some(b) = &self.state.beats {
            self.report.tempo = Some(b.tempo);
        }
        if let Some(t) = &self.state.timeline {
            self.report.segments = t
                .segments
                .iter()
                .map(|s| SegmentRow {
                    asset_id: s.asset_id,
                    start: s.start,
                    end: s.end,
                    transition: s.transition_in.to_string(),
                    caption: s.caption.clone(),
                })
                .collect();
        }
    }

    fn captioner(&self) -> Result<Box<dyn Captioner>> {
        if self.opts.mock_adapters {
            return Ok(Box::new(TemplateCaptioner::default()));
        }
        let transport = Transport::from_env("STORYCUT_CAPTIONER")?.ok_or_else(|| {
            Error::Adapter(
                "no captioner configured: set STORYCUT_CAPTIONER_URL or STORYCUT_CAPTIONER_CMD, or use mock adapters"
                    .into(),
            )
        })?;
        Ok(Box::new(RemoteCaptioner(transport)))
    }

    fn chat(&self) -> Result<Box<dyn ChatModel>> {
        if self.opts.mock_adapters {
            if let Some(path) = &self.opts.mock_response {
                return Ok(Box::new(MockChat::from_fixture(path)?));
            }
            // The synthesized plan recommends the library's first title when one exists.
            let music_name = index_library(&self.project()?.manifest.music_library_path)
                .ok()
                .and_then(|(lib, _)| lib.first().map(|t| t.title.clone()))
                .unwrap_or_else(|| "Unknown Track".to_string());
            return Ok(Box::new(MockChat::Synthesize { music_name }));
        }
        let transport = Transport::from_env("STORYCUT_CHAT")?.ok_or_else(|| {
            Error::Adapter(
                "no chat model configured: set STORYCUT_CHAT_URL or STORYCUT_CHAT_CMD, or use mock adapters".into(),
            )
        })?;
        Ok(Box::new(RemoteChat(transport)))
    }

    fn run(&mut self, stage: Stage) -> Result<()> {
        use artifacts::*;
        match stage {
            Stage::Load => {
                let project = load_manifest_with(&self.opts.manifest, &self.opts.codec)?;
                self.warn(project.warnings.clone());
                write_json(&self.path(PROJECT), &project)?;
                self.state.project = Some(project);
            }
            Stage::Keyframes => {
                let videos: Vec<(u32, f64)> = self
                    .project()?
                    .assets
                    .iter()
                    .filter(|a| a.kind == AssetKind::Video)
                    .map(|a| (a.id, a.frame_rate.unwrap_or(25.0)))
                    .collect();
                let mut keyframes = BTreeMap::new();
                for (id, fps) in videos {
                    let frames = self.frames()?.frames(id);
                    keyframes.insert(id, segment_video(frames, DEFAULT_THRESHOLD, default_stride(fps))?);
                }
                write_json(&self.path(KEYFRAMES), &keyframes)?;
                self.state.keyframes = Some(keyframes);
            }
            Stage::Describe => {
                let captioner = self.captioner()?;
                self.frames()?;
                let project = self.project()?;
                let keyframes = self.state.keyframes.as_ref().ok_or_else(|| missing("keyframes"))?;
                let frames = self.state.frames.as_ref().expect("decoded above");
                let (descriptions, warnings) =
                    describe_assets(&project.assets, keyframes, frames, captioner.as_ref(), self.opts.max_in_flight)?;
                self.warn(warnings);
                write_json(&self.path(DESCRIPTIONS), &descriptions)?;
                self.state.descriptions = Some(descriptions);
            }
            Stage::Prompt => {
                let descriptions = self.state.descriptions.as_ref().ok_or_else(|| missing("descriptions"))?;
                let prompt = build_prompt(&self.project()?.manifest.requirements, descriptions);
                write_text(&self.path(PROMPT), &prompt)?;
                self.state.prompt = Some(prompt);
            }
            Stage::Plan => {
                let chat = self.chat()?;
                let prompt = self.state.prompt.as_ref().ok_or_else(|| missing("prompt"))?;
                let response = plan_story(prompt, chat.as_ref(), Some(&self.log))?;
                write_text(&self.path(RESPONSE), &response)?;
                self.state.response = Some(response);
            }
            Stage::Parse => {
                let response = self.state.response.as_ref().ok_or_else(|| missing("chat response"))?;
                let plan = parse_plan(response, &self.project()?.ids())?;
                self.warn(plan.warnings.clone());
                write_json(&self.path(PLAN), &plan)?;
                self.state.plan = Some(plan);
            }
            Stage::Retrieve => {
                let plan = self.state.plan.as_ref().ok_or_else(|| missing("plan"))?;
                let dir = &self.project()?.manifest.music_library_path;
                let (library, mut warnings) = index_library(dir)?;
                let found = match retrieve_music(&plan.music_name, &library) {
                    Err(Error::NoPlausibleMatch { name, distance }) => {
                        let track = library.first().ok_or(Error::NoMusic)?.clone();
                        warnings.push(format!(
                            "music: no plausible match for {name:?} (distance {distance:.3}); using {:?}",
                            track.title
                        ));
                        MusicMatch {
                            distance: crate::music::title_distance(
                                &crate::music::normalize_title(&name),
                                &crate::music::normalize_title(&track.title),
                            ),
                            track,
                            tier: MatchTier::EditDistance,
                        }
                    }
                    other => other?,
                };
                self.warn(warnings);
                write_json(&self.path(MUSIC), &found)?;
                self.state.music = Some(found);
            }
            Stage::Beats => {
                let music = self.state.music.as_ref().ok_or_else(|| missing("music"))?;
                let pcm = read_wav(&music.track.path)?;
                let duration = pcm.duration();
                let fallback = |why: String| {
                    (
                        BeatGrid::fixed(FALLBACK_SPACING, duration),
                        vec![format!("{why}; using a fixed {FALLBACK_SPACING} s beat grid")],
                    )
                };
                let (grid, warnings, is_fallback) = match detect_beats(&pcm.to_mono(), pcm.sample_rate) {
                    Ok((grid, mut warnings)) if grid.is_empty() => {
                        let (g, w) = fallback("music: no beats detected".into());
                        warnings.extend(w);
                        (g, warnings, true)
                    }
                    Ok((grid, warnings)) => (grid, warnings, false),
                    Err(e @ Error::TrackTooShort(_)) => {
                        let (g, w) = fallback(format!("music: {e}"));
                        (g, w, true)
                    }
                    Err(e) => return Err(e),
                };
                self.warn(warnings);
                write_json(
                    &self.path(BEATS),
                    &BeatsArtifact {
                        grid: grid.clone(),
                        fallback: is_fallback,
                    },
                )?;
                self.state.beats = Some(grid);
            }
            Stage::Timeline => {
                let project = self.project()?;
                let reqs = &project.manifest.requirements;
                let cfg = TimelineConfig {
                    width: reqs.target_width,
                    height: reqs.target_height,
                    seed: self.seed()?,
                    ..TimelineConfig::default()
                };
                let plan = self.state.plan.as_ref().ok_or_else(|| missing("plan"))?;
                let beats = self.state.beats.as_ref().ok_or_else(|| missing("beats"))?;
                let music = self.state.music.as_ref().map(|m| &m.track);
                let timeline = assemble_timeline(plan, &project.assets, beats, music, &cfg)?;
                timeline.save(&self.opts.out)?;
                self.state.timeline = Some(timeline);
            }
            Stage::Render => {
                let fps = self.project()?.manifest.requirements.frame_rate;
                self.frames()?;
                let timeline = self.state.timeline.as_ref().ok_or_else(|| missing("timeline"))?;
                let mut cfg = RenderConfig::new(timeline.width, timeline.height, fps);
                cfg.workers = self.opts.workers;
                let dir = self.path(RENDER_DIR);
                let frames = self.state.frames.as_ref().expect("decoded above");
                let report = render_video(
                    timeline,
                    frames,
                    &cfg,
                    &StyleAdapter::builtin(StyleKind::Identity),
                    &dir,
                    &self.opts.codec,
                )?;
                self.warn(report.warnings);
                self.report.frames = Some(report.frames);
                self.report.output_path = Some(dir);
            }
            Stage::Style => {
                let choice = self.style_choice()?;
                let render_dir = self.path(RENDER_DIR);
                let final_dir = if choice == StyleChoice::None {
                    render_dir
                } else {
                    let adapter = StyleAdapter::for_choice(choice)?;
                    let dir = self.path(VIDEO_DIR);
                    let warnings = stylize_directory(&render_dir, &dir, &adapter, self.opts.workers)?;
                    self.warn(warnings);
                    dir
                };
                if let Some(container) = &self.opts.container {
                    let fps = self.project()?.manifest.requirements.frame_rate;
                    let (written, warning) = encode_container(&final_dir, fps, container, &self.opts.codec)?;
                    self.warn(warning);
                    if let Some(path) = written {
                        self.report.output_path = Some(path);
                        return Ok(());
                    }
                }
                self.report.output_path = Some(final_dir);
            }
        }
        self.summarize();
        Ok(())
    }
}

/// Runs the pipeline. `report.json` is written in every case; on failure it
/// names the stage that failed and the error is returned with the report.
pub fn compose(opts: &ComposeOptions) -> std::result::Result<RunReport, (Error, RunReport)> {
    let started = Instant::now();
    let mut report = RunReport::new(&opts.manifest);
    if let Err(e) = std::fs::create_dir_all(&opts.out) {
        report.error = Some(format!("cannot create {}: {e}", opts.out.display()));
        report.failed_stage = Some(Stage::Load);
        return Err((Error::io(&opts.out, e), report));
    }
    let log = match RunLog::new(&opts.out) {
        Ok(log) => log,
        Err(e) => return Err((e, report)),
    };
    let mut runner = Runner {
        opts,
        state: RunState::default(),
        report,
        log,
    };
    // A plan response is only useful once parsed, so stopping after `plan` includes `parse`.
    let stop = opts.stop_after.map(|s| if s == Stage::Plan { Stage::Parse } else { s });

    let mut failure = None;
    for stage in Stage::ALL {
        if let Err(e) = runner.step(stage) {
            runner.report.failed_stage = Some(stage);
            runner.report.error = Some(e.to_string());
            failure = Some(e);
            break;
        }
        runner.report.completed_stages.push(stage);
        if stop == Some(stage) {
            break;
        }
    }

    let mut report = runner.report;
    report.success = failure.is_none();
    report.wall_time_seconds = started.elapsed().as_secs_f64();
    let written = write_json(&opts.out.join(artifacts::REPORT), &report);
    match (failure, written) {
        (Some(e), _) => Err((e, report)),
        (None, Err(e)) => Err((e, report)),
        (None, Ok(())) => Ok(report),
    }
}
