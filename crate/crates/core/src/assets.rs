//! Project manifests and the uniform media asset model.
//!
//! A manifest is a small sectioned text file:
//!
//! ```text
//! [requirements]
//! theme = trip
//! width = 1280
//! height = 720
//!
//! [assets]
//! photos/lake.jpg
//! clips/river/
//!
//! [music]
//! library_path = music/
//! ```
//!
//! Asset paths are resolved relative to the manifest. A directory asset holds
//! `frame_%06d` images plus a `meta` sidecar (`fps = 25`, optionally
//! `frames = N`), and is treated as a video without needing a codec.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::CodecConfig;
use crate::error::{Error, Result};
use crate::frame::{load_frame, Frame};

pub const IMAGE_EXTENSIONS: &[&str] = &["png", "jpg", "jpeg", "bmp", "ppm", "pnm"];
pub const VIDEO_EXTENSIONS: &[&str] = &["mp4", "mov", "mkv", "avi", "webm", "m4v"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AssetKind {
    Image,
    Video,
}

impl fmt::Display for AssetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AssetKind::Image => f.write_str("Image"),
            AssetKind::Video => f.write_str("Video"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediaAsset {
    /// 1-based; images are numbered before videos.
    pub id: u32,
    pub kind: AssetKind,
    pub source_path: PathBuf,
    pub width: u32,
    pub height: u32,
    /// Seconds; videos only.
    pub duration: Option<f64>,
    /// Frames per second; videos only.
    pub frame_rate: Option<f64>,
}

impl MediaAsset {
    pub fn is_video(&self) -> bool {
        self.kind == AssetKind::Video
    }

    /// Number of frames `decode_frames` is expected to produce.
    pub fn frame_count(&self) -> usize {
        match (self.kind, self.duration, self.frame_rate) {
            (AssetKind::Video, Some(d), Some(fps)) => (d * fps).round() as usize,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum StyleChoice {
    #[default]
    None,
    ReferenceGray,
    ReferenceSepia,
    External,
}

impl FromStr for StyleChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace(['-', ' '], "_").as_str() {
            "" | "none" | "identity" => Ok(StyleChoice::None),
            "gray" | "grey" | "reference_gray" | "referencegray" => Ok(StyleChoice::ReferenceGray),
            "sepia" | "reference_sepia" | "referencesepia" => Ok(StyleChoice::ReferenceSepia),
            "external" => Ok(StyleChoice::External),
            other => Err(format!("unknown style {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserRequirements {
    pub theme: String,
    pub time: String,
    pub location: String,
    pub requirement: String,
    pub target_width: u32,
    pub target_height: u32,
    pub frame_rate: f64,
    pub seed: u64,
    pub style: StyleChoice,
}

impl Default for UserRequirements {
    fn default() -> Self {
        UserRequirements {
            theme: String::new(),
            time: String::new(),
            location: String::new(),
            requirement: String::new(),
            target_width: 1280,
            target_height: 720,
            frame_rate: 25.0,
            seed: 0,
            style: StyleChoice::None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectManifest {
    /// Asset paths in manifest order, already resolved against the manifest directory.
    pub assets: Vec<PathBuf>,
    pub requirements: UserRequirements,
    pub music_library_path: PathBuf,
}

/// A manifest with every asset probed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadedProject {
    pub manifest: ProjectManifest,
    pub assets: Vec<MediaAsset>,
    pub warnings: Vec<String>,
}

impl LoadedProject {
    pub fn asset(&self, id: u32) -> Option<&MediaAsset> {
        self.assets.iter().find(|a| a.id == id)
    }

    pub fn ids(&self) -> Vec<u32> {
        self.assets.iter().map(|a| a.id).collect()
    }
}

fn unquote(s: &str) -> &str {
    let s = s.trim();
    for q in ['"', '\''] {
        if s.len() >= 2 && s.starts_with(q) && s.ends_with(q) {
            return &s[1..s.len() - 1];
        }
    }
    s
}

/// Parses manifest text. Relative paths are resolved against `base_dir`.
pub fn parse_manifest(text: &str, base_dir: &Path, origin: &Path) -> Result<(ProjectManifest, Vec<String>)> {
    let bad = |message: String| Error::Manifest {
        path: origin.to_path_buf(),
        message,
    };
    let mut warnings = Vec::new();
    let mut reqs = UserRequirements::default();
    let mut assets = Vec::new();
    let mut library = None;
    let mut section = String::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if line.starts_with('[') && line.ends_with(']') {
            section = line[1..line.len() - 1].trim().to_ascii_lowercase();
            continue;
        }
        if section == "assets" {
            assets.push(base_dir.join(unquote(line)));
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(bad(format!("line {}: expected `key = value`", lineno + 1)));
        };
        let key = key.trim().to_ascii_lowercase();
        let value = unquote(value);
        let number = |v: &str| -> Result<u64> {
            v.parse::<u64>()
                .map_err(|_| bad(format!("line {}: {key} must be a non-negative integer", lineno + 1)))
        };
        match (section.as_str(), key.as_str()) {
            ("requirements", "theme") => reqs.theme = value.to_string(),
            ("requirements", "time") => reqs.time = value.to_string(),
            ("requirements", "location") => reqs.location = value.to_string(),
            ("requirements", "requirement") => reqs.requirement = value.to_string(),
            ("requirements", "width") => reqs.target_width = number(value)? as u32,
            ("requirements", "height") => reqs.target_height = number(value)? as u32,
            ("requirements", "fps") => {
                reqs.frame_rate = value
                    .parse::<f64>()
                    .ok()
                    .filter(|f| *f > 0.0)
                    .ok_or_else(|| bad(format!("line {}: fps must be positive", lineno + 1)))?
            }
            ("requirements", "seed") => reqs.seed = number(value)?,
            ("requirements", "style") => reqs.style = value.parse().map_err(bad)?,
            ("music", "library_path") => library = Some(base_dir.join(value)),
            (section, key) => warnings.push(format!("manifest: unknown key `{key}` in [{section}]")),
        }
    }

    let (w, h) = (reqs.target_width, reqs.target_height);
    if w == 0 || h == 0 || w % 2 == 1 || h % 2 == 1 {
        return Err(bad(format!("odd target dimension {w}x{h}")));
    }
    if assets.is_empty() {
        return Err(Error::EmptyProject);
    }
    let music_library_path = library.unwrap_or_else(|| base_dir.join("music"));
    Ok((
        ProjectManifest {
            assets,
            requirements: reqs,
            music_library_path,
        },
        warnings,
    ))
}

/// Reads a manifest and probes every referenced asset.
pub fn load_manifest(path: &Path) -> Result<LoadedProject> {
    load_manifest_with(path, &CodecConfig::default())
}

pub fn load_manifest_with(path: &Path, codec: &CodecConfig) -> Result<LoadedProject> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let (manifest, warnings) = parse_manifest(&text, base, path)?;
    let assets = probe_assets(&manifest.assets, codec)?;
    Ok(LoadedProject {
        manifest,
        assets,
        warnings,
    })
}

/// Probes assets concurrently and numbers them images-first, manifest order within each kind.
pub fn probe_assets(paths: &[PathBuf], codec: &CodecConfig) -> Result<Vec<MediaAsset>> {
    let probed = paths
        .par_iter()
        .map(|p| probe(p, codec))
        .collect::<Result<Vec<_>>>()?;
    let (images, videos): (Vec<_>, Vec<_>) =
        probed.into_iter().partition(|a| a.kind == AssetKind::Image);
    Ok(images
        .into_iter()
        .chain(videos)
        .enumerate()
        .map(|(i, mut a)| {
            a.id = i as u32 + 1;
            a
        })
        .collect())
}

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .unwrap_or_default()
        .to_ascii_lowercase()
}

fn unreadable(path: &Path, message: impl Into<String>) -> Error {
    Error::UnreadableMedia {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

pub fn probe(path: &Path, codec: &CodecConfig) -> Result<MediaAsset> {
    if !path.exists() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "asset not found"),
        ));
    }
    if path.is_dir() {
        let dir = DirectoryVideo::open(path)?;
        let (width, height) = image::image_dimensions(&dir.frame_paths[0])
            .map_err(|e| unreadable(&dir.frame_paths[0], e.to_string()))?;
        return Ok(MediaAsset {
            id: 0,
            kind: AssetKind::Video,
            source_path: path.to_path_buf(),
            width,
            height,
            duration: Some(dir.frame_count as f64 / dir.fps),
            frame_rate: Some(dir.fps),
        });
    }
    let ext = extension(path);
    if IMAGE_EXTENSIONS.contains(&ext.as_str()) {
        let (width, height) =
            image::image_dimensions(path).map_err(|e| unreadable(path, e.to_string()))?;
        if width == 0 || height == 0 {
            return Err(unreadable(path, "zero-sized image"));
        }
        return Ok(MediaAsset {
            id: 0,
            kind: AssetKind::Image,
            source_path: path.to_path_buf(),
            width,
            height,
            duration: None,
            frame_rate: None,
        });
    }
    if VIDEO_EXTENSIONS.contains(&ext.as_str()) {
        let info = codec.probe(path).map_err(|e| unreadable(path, e.to_string()))?;
        return Ok(MediaAsset {
            id: 0,
            kind: AssetKind::Video,
            source_path: path.to_path_buf(),
            width: info.width,
            height: info.height,
            duration: Some(info.duration),
            frame_rate: Some(info.frame_rate),
        });
    }
    Err(unreadable(path, format!("unsupported media type `.{ext}`")))
}

/// `key = value` sidecar used by directory assets and frame-directory outputs.
pub fn parse_meta(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_ascii_lowercase(), v.trim().to_string()))
        .collect()
}

/// A video stored as numbered frame images plus a `meta` sidecar.
#[derive(Debug, Clone)]
pub struct DirectoryVideo {
    pub fps: f64,
    pub frame_count: usize,
    /// Frame files found on disk, indexed contiguously from 0.
    pub frame_paths: Vec<PathBuf>,
}

impl DirectoryVideo {
    pub fn open(dir: &Path) -> Result<Self> {
        let meta_path = dir.join("meta");
        let meta_text = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let meta = parse_meta(&meta_text);
        let fps = meta
            .get("fps")
            .and_then(|v| v.parse::<f64>().ok())
            .filter(|f| *f > 0.0)
            .ok_or_else(|| unreadable(dir, "meta is missing a positive fps"))?;

        let mut indexed = BTreeMap::new();
        let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        for entry in entries {
            let path = entry.map_err(|e| Error::io(dir, e))?.path();
            let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
                continue;
            };
            if let Some(index) = stem.strip_prefix("frame_").and_then(|n| n.parse::<usize>().ok()) {
                indexed.insert(index, path);
            }
        }
        let frame_paths: Vec<PathBuf> = indexed
            .into_iter()
            .enumerate()
            .take_while(|(expected, (index, _))| expected == index)
            .map(|(_, (_, p))| p)
            .collect();
        if frame_paths.is_empty() {
            return Err(unreadable(dir, "no frame_000000 image"));
        }

        let frame_count = if let Some(n) = meta.get("frames").and_then(|v| v.parse::<usize>().ok()) {
            n
        } else if let Some(d) = meta.get("duration").and_then(|v| v.parse::<f64>().ok()) {
            (d * fps).round() as usize
        } else {
            frame_paths.len()
        };
        if frame_count == 0 {
            return Err(unreadable(dir, "zero-length video"));
        }
        Ok(DirectoryVideo {
            fps,
            frame_count,
            frame_paths,
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct DecodedFrames {
    pub frames: Vec<Frame>,
    pub warnings: Vec<String>,
}

/// Decodes every frame of an asset in order. Images yield exactly one frame.
///
/// A truncated or corrupt stream returns the frames decoded before the damage
/// together with a warning.
pub fn decode_frames(asset: &MediaAsset) -> Result<DecodedFrames> {
    decode_frames_with(asset, &CodecConfig::default())
}

pub fn decode_frames_with(asset: &MediaAsset, codec: &CodecConfig) -> Result<DecodedFrames> {
    match asset.kind {
        AssetKind::Image => Ok(DecodedFrames {
            frames: vec![load_frame(&asset.source_path)?],
            warnings: Vec::new(),
        }),
        AssetKind::Video if asset.source_path.is_dir() => decode_directory(asset, &asset.source_path),
        AssetKind::Video => {
            let scratch = tempfile::tempdir().map_err(|e| Error::io(std::env::temp_dir(), e))?;
            codec.decode(&asset.source_path, scratch.path())?;
            std::fs::write(
                scratch.path().join("meta"),
                format!("fps = {}\n", asset.frame_rate.unwrap_or(25.0)),
            )
            .map_err(|e| Error::io(scratch.path(), e))?;
            decode_directory(asset, scratch.path())
        }
    }
}

fn decode_directory(asset: &MediaAsset, dir: &Path) -> Result<DecodedFrames> {
    let video = DirectoryVideo::open(dir)?;
    let expected = asset.frame_count().max(1);
    let mut out = DecodedFrames::default();
    for index in 0..expected {
        let decoded = video
            .frame_paths
            .get(index)
            .ok_or_else(|| format!("frame {index} missing"))
            .and_then(|p| load_frame(p).map_err(|e| e.to_string()));
        match decoded {
            Ok(frame) => out.frames.push(frame),
            Err(reason) => {
                out.warnings.push(format!(
                    "asset {}: truncated stream, decoded {index} of {expected} frames ({reason})",
                    asset.id
                ));
                break;
            }
        }
    }
    if out.frames.is_empty() {
        return Err(Error::Codec(format!(
            "asset {}: no decodable frames in {}",
            asset.id,
            dir.display()
        )));
    }
    Ok(out)
}

/// Decoded frames for every asset of a project, shared read-only across stages.
#[derive(Debug, Clone, Default)]
pub struct FrameStore {
    frames: BTreeMap<u32, Arc<Vec<Frame>>>,
}

impl FrameStore {
    /// Decodes all assets concurrently. Truncation warnings are returned in asset order.
    pub fn decode_all(assets: &[MediaAsset], codec: &CodecConfig) -> Result<(Self, Vec<String>)> {
        let decoded = assets
            .par_iter()
            .map(|a| decode_frames_with(a, codec).map(|d| (a.id, d)))
            .collect::<Result<Vec<_>>>()?;
        let mut store = FrameStore::default();
        let mut warnings = Vec::new();
        for (id, d) in decoded {
            warnings.extend(d.warnings);
            store.frames.insert(id, Arc::new(d.frames));
        }
        Ok((store, warnings))
    }

    pub fn insert(&mut self, asset_id: u32, frames: Vec<Frame>) {
        self.frames.insert(asset_id, Arc::new(frames));
    }

    pub fn frames(&self, asset_id: u32) -> &[Frame] {
        self.frames.get(&asset_id).map_or(&[], |f| f.as_slice())
    }

    /// Frame `index` of an asset, clamped to the decoded range.
    pub fn frame(&self, asset_id: u32, index: usize) -> Option<&Frame> {
        let frames = self.frames(asset_id);
        frames.get(index.min(frames.len().saturating_sub(1)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{save_png, solid};

    fn write_video_dir(dir: &Path, frames: usize, fps: f64) {
        std::fs::create_dir_all(dir).unwrap();
        for i in 0..frames {
            save_png(&dir.join(format!("frame_{i:06}.png")), &solid(8, 6, [i as u8, 0, 0])).unwrap();
        }
        std::fs::write(dir.join("meta"), format!("fps = {fps}\nframes = {frames}\n")).unwrap();
    }

    fn write_manifest(dir: &Path, body: &str) -> PathBuf {
        let path = dir.join("project.manifest");
        std::fs::write(&path, body).unwrap();
        path
    }

    #[test]
    fn images_numbered_before_videos() {
        let tmp = tempfile::tempdir().unwrap();
        write_video_dir(&tmp.path().join("clip"), 4, 2.0);
        for name in ["a.png", "b.png", "c.png"] {
            save_png(&tmp.path().join(name), &solid(1920, 1080, [1, 2, 3])).unwrap();
        }
        let path = write_manifest(tmp.path(), "[assets]\nclip\na.png\nb.png\nc.png\n");
        let project = load_manifest(&path).unwrap();
        assert_eq!(project.ids(), vec![1, 2, 3, 4]);
        assert_eq!(project.assets[3].kind, AssetKind::Video);
        assert!(project.assets[3].source_path.ends_with("clip"));
        assert_eq!((project.assets[0].width, project.assets[0].height), (1920, 1080));
        assert_eq!(project.assets[3].duration, Some(2.0));
        // Reloading gives identical records.
        assert_eq!(load_manifest(&path).unwrap(), project);
    }

    #[test]
    fn empty_asset_list_is_empty_project() {
        let tmp = tempfile::tempdir().unwrap();
        let path = write_manifest(tmp.path(), "[requirements]\ntheme = x\n[assets]\n");
        assert!(matches!(load_manifest(&path), Err(Error::EmptyProject)));
    }

    #[test]
    fn odd_dimension_rejected_and_unknown_key_warned() {
        let base = Path::new("/x");
        let err = parse_manifest("[requirements]\nwidth = 1279\n[assets]\na.png\n", base, base).unwrap_err();
        assert!(err.to_string().contains("odd target dimension"));
        let (m, warnings) = parse_manifest(
            "[requirements]\ntheme = \"city walk\"\nmood = calm\nstyle = sepia\n[assets]\na.png\n[music]\nlibrary_path = lib\n",
            base,
            base,
        )
        .unwrap();
        assert_eq!(m.requirements.theme, "city walk");
        assert_eq!(m.requirements.style, StyleChoice::ReferenceSepia);
        assert_eq!(m.music_library_path, PathBuf::from("/x/lib"));
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn missing_asset_file_errors() {
        let tmp = tempfile::tempdir().unwrap();
        let path = write_manifest(tmp.path(), "[assets]\nnope.png\n");
        assert!(matches!(load_manifest(&path), Err(Error::Io { .. })));
    }

    #[test]
    fn directory_video_decodes_all_frames_deterministically() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("clip");
        write_video_dir(&dir, 50, 25.0);
        let asset = probe(&dir, &CodecConfig::default()).unwrap();
        assert_eq!(asset.frame_count(), 50);
        let a = decode_frames(&asset).unwrap();
        let b = decode_frames(&asset).unwrap();
        assert_eq!(a.frames.len(), 50);
        assert!(a.warnings.is_empty());
        assert!(a.frames.iter().zip(&b.frames).all(|(x, y)| x == y));
    }

    #[test]
    fn corrupt_tail_yields_prefix_and_warning() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("clip");
        write_video_dir(&dir, 50, 25.0);
        std::fs::write(dir.join("frame_000030.png"), b"not a png at all").unwrap();
        let asset = probe(&dir, &CodecConfig::default()).unwrap();
        let decoded = decode_frames(&asset).unwrap();
        assert_eq!(decoded.frames.len(), 30);
        assert_eq!(decoded.warnings.len(), 1);
        assert!(decoded.warnings[0].contains("truncated"));
    }

    #[test]
    fn image_asset_is_one_frame() {
        let tmp = tempfile::tempdir().unwrap();
        let p = tmp.path().join("a.png");
        save_png(&p, &solid(4, 4, [9, 9, 9])).unwrap();
        let asset = probe(&p, &CodecConfig::default()).unwrap();
        assert_eq!(decode_frames(&asset).unwrap().frames.len(), 1);
    }
}
