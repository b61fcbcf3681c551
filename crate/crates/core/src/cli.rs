//! Command-line interface.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::assets::{decode_frames_with, probe, StyleChoice};
use crate::audio::read_wav;
use crate::codec::CodecConfig;
use crate::dataset::{sample_dataset, write_manifests, DEFAULT_PER_CLASS};
use crate::error::{Error, Result};
use crate::eval::{build_judge_prompt, mean_ttr, parse_judge_response, plan_texts, ttr};
use crate::keyframe::{default_stride, segment_video, DEFAULT_THRESHOLD};
use crate::music::detect_beats;
use crate::narration::adapter::{encode_png_base64, RemoteChat, Transport};
use crate::narration::DirectorPlan;
use crate::pipeline::{compose, ComposeOptions, Stage};

#[derive(Debug, Parser)]
#[command(name = "storycut", version, about = "Compose story videos from photos, clips and a music library")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct ToolArgs {
    /// External transcoder used to decode videos and encode containers.
    #[arg(long, default_value = "ffmpeg", global = true)]
    pub transcoder: String,
    /// External prober used to read video metadata.
    #[arg(long, default_value = "ffprobe", global = true)]
    pub prober: String,
}

impl ToolArgs {
    fn codec(&self) -> CodecConfig {
        CodecConfig::with_tools(&self.transcoder, &self.prober)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the full pipeline on a project manifest.
    Compose(ComposeArgs),
    /// Segment a video into scenes and print `start end keyframe` per segment.
    Keyframes {
        video: PathBuf,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
        /// Compare every n-th frame; defaults to about five comparisons per second.
        #[arg(long)]
        stride: Option<usize>,
        #[command(flatten)]
        tools: ToolArgs,
    },
    /// Print the tempo and beat times of a PCM track.
    Beats { track: PathBuf },
    #[command(subcommand)]
    Eval(EvalCommand),
    #[command(subcommand)]
    Dataset(DatasetCommand),
}

#[derive(Debug, Args)]
pub struct ComposeArgs {
    pub manifest: PathBuf,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub mock_adapters: bool,
    /// Chat response replayed by the mock adapter instead of a synthesized plan.
    #[arg(long, requires = "mock_adapters")]
    pub mock_response: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub stop_after: Option<Stage>,
    #[arg(long)]
    pub resume_from: Option<Stage>,
    /// none, gray, sepia or external.
    #[arg(long)]
    pub style: Option<StyleChoice>,
    /// Also encode the result into this container file.
    #[arg(long)]
    pub container: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    pub max_in_flight: usize,
    #[arg(long)]
    pub workers: Option<usize>,
    #[command(flatten)]
    pub tools: ToolArgs,
}

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// Type-token ratio per file and the mean. JSON files are read as plans,
    /// other files as one text per line.
    Ttr {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Count only per-asset captions, not the title and closing.
        #[arg(long)]
        captions_only: bool,
    },
    /// Build the judge prompt; with STORYCUT_JUDGE_URL or STORYCUT_JUDGE_CMD set,
    /// send it with the frames and print the scores.
    Judge {
        #[arg(long)]
        script: PathBuf,
        #[arg(long)]
        frames_dir: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum DatasetCommand {
    /// Sample clips per class directory and write one manifest per class.
    Sample {
        root: PathBuf,
        #[arg(long, default_value_t = DEFAULT_PER_CLASS)]
        per_class: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Music library written into every manifest.
        #[arg(long)]
        music: Option<PathBuf>,
    },
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn image_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
        })
        .collect();
    files.sort();
    Ok(files)
}

fn texts_of(path: &Path, captions_only: bool) -> Result<Vec<String>> {
    let text = read_text(path)?;
    if path.extension().is_some_and(|e| e == "json") {
        let plan: DirectorPlan = serde_json::from_str(&text)?;
        return Ok(plan_texts(&plan, captions_only));
    }
    Ok(text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect())
}

fn warn_all(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn run_compose(args: &ComposeArgs) -> Result<()> {
    let mut opts = ComposeOptions::new(&args.manifest, &args.out);
    opts.mock_adapters = args.mock_adapters;
    opts.mock_response = args.mock_response.clone();
    opts.seed = args.seed;
    opts.style = args.style;
    opts.stop_after = args.stop_after;
    opts.resume_from = args.resume_from;
    opts.codec = args.tools.codec();
    opts.container = args.container.clone();
    opts.max_in_flight = args.max_in_flight.max(1);
    opts.workers = args.workers;
    match compose(&opts) {
        Ok(report) => {
            warn_all(&report.warnings);
            let stages: Vec<String> = report.completed_stages.iter().map(|s| s.to_string()).collect();
            println!("completed: {}", stages.join(" "));
            if let Some(path) = &report.output_path {
                println!("output: {}", path.display());
            }
            println!("report: {}", args.out.join(crate::pipeline::artifacts::REPORT).display());
            Ok(())
        }
        Err((e, report)) => {
            warn_all(&report.warnings);
            let stage = report.failed_stage.map(|s| s.to_string()).unwrap_or_default();
            Err(Error::InvalidArgument(format!("stage {stage} failed: {e}")))
        }
    }
}

/// Runs one parsed command, writing results to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let io = |e| Error::io("<stdout>", e);
    match cli.command {
        Command::Compose(args) => run_compose(&args),
        Command::Keyframes {
            video,
            threshold,
            stride,
            tools,
        } => {
            let codec = tools.codec();
            let asset = probe(&video, &codec)?;
            let decoded = decode_frames_with(&asset, &codec)?;
            warn_all(&decoded.warnings);
            let stride = stride.unwrap_or_else(|| default_stride(asset.frame_rate.unwrap_or(25.0)));
            let segments = segment_video(&decoded.frames, threshold, stride)?;
            for s in segments {
                writeln!(out, "{} {} {}", s.start_frame, s.end_frame, s.keyframe_index).map_err(io)?;
            }
            Ok(())
        }
        Command::Beats { track } => {
            let pcm = read_wav(&track)?;
            let (grid, warnings) = detect_beats(&pcm.to_mono(), pcm.sample_rate)?;
            warn_all(&warnings);
            writeln!(out, "tempo {:.2}", grid.tempo).map_err(io)?;
            for b in &grid.beats {
                writeln!(out, "{b:.4}").map_err(io)?;
            }
            Ok(())
        }
        Command::Eval(EvalCommand::Ttr { files, captions_only }) => {
            let mut values = Vec::with_capacity(files.len());
            for f in &files {
                let v = ttr(&texts_of(f, captions_only)?)?;
                writeln!(out, "{}\t{v:.4}", f.display()).map_err(io)?;
                values.push(v);
            }
            writeln!(out, "mean\t{:.4}", mean_ttr(&values)?).map_err(io)?;
            Ok(())
        }
        Command::Eval(EvalCommand::Judge { script, frames_dir }) => {
            let frames = match &frames_dir {
                Some(dir) => image_files(dir)?,
                None => Vec::new(),
            };
            let refs: Vec<String> = frames
                .iter()
                .map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned())
                .collect();
            let prompt = build_judge_prompt(&read_text(&script)?, &refs)?;
            warn_all(&prompt.warnings);
            match Transport::from_env("STORYCUT_JUDGE")? {
                None => write!(out, "{}", prompt.text).map_err(io),
                Some(transport) => {
                    let images = frames
                        .iter()
                        .map(|p| crate::frame::load_frame(p).and_then(|f| encode_png_base64(&f)))
                        .collect::<Result<Vec<_>>>()?;
                    let response = RemoteChat(transport).complete_with_images(&prompt.text, &images)?;
                    let scores = parse_judge_response(&response)?;
                    writeln!(out, "{}", serde_json::to_string_pretty(&scores)?).map_err(io)
                }
            }
        }
        Command::Dataset(DatasetCommand::Sample {
            root,
            per_class,
            seed,
            out: dir,
            music,
        }) => {
            let (samples, warnings) = sample_dataset(&root, per_class, seed)?;
            warn_all(&warnings);
            let paths = write_manifests(&samples, &dir, seed, music.as_deref())?;
            let clips: usize = samples.iter().map(|s| s.clips.len()).sum();
            writeln!(out, "{} manifests, {clips} clips in {}", paths.len(), dir.display()).map_err(io)
        }
    }
}
