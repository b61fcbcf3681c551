//! Per-class clip sampling into project manifests.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_PER_CLASS: usize = 8;

const MEDIA_EXTENSIONS: &[&str] = &[
    "mp4", "avi", "mov", "mkv", "webm", "m4v", "mpg", "mpeg", "png", "jpg", "jpeg", "bmp",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassSample {
    pub class: String,
    pub clips: Vec<PathBuf>,
}

impl ClassSample {
    /// Project manifest with the class name as the theme.
    pub fn to_manifest(&self, seed: u64, music_library: Option<&Path>) -> String {
        let mut out = String::from("[requirements]\n");
        let _ = writeln!(out, "theme = {}", self.class);
        let _ = writeln!(out, "seed = {seed}");
        if let Some(lib) = music_library {
            let _ = write!(out, "\n[music]\nlibrary_path = {}\n", lib.display());
        }
        out.push_str("\n[assets]\n");
        for clip in &self.clips {
            let _ = writeln!(out, "{}", clip.display());
        }
        out
    }
}

fn is_clip(path: &Path) -> bool {
    let hidden = path
        .file_name()
        .and_then(|n| n.to_str())
        .is_none_or(|n| n.starts_with('.'));
    if hidden {
        return false;
    }
    if path.is_dir() {
        return path.join("meta").is_file();
    }
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| MEDIA_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    Ok(entries)
}

/// Samples `per_class` clips without replacement from every class directory
/// under `root`. Classes are visited in name order from one seeded generator.
pub fn sample_dataset(root: &Path, per_class: usize, seed: u64) -> Result<(Vec<ClassSample>, Vec<String>)> {
    let classes: Vec<PathBuf> = sorted_entries(root)?
        .into_iter()
        .filter(|p| p.is_dir() && !p.join("meta").is_file())
        .collect();
    if classes.is_empty() {
        return Err(Error::Dataset(format!("no class directories under {}", root.display())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(classes.len());
    let mut warnings = Vec::new();
    for dir in classes {
        let class = dir.file_name().unwrap_or_default().to_string_lossy().into_owned();
        let clips: Vec<PathBuf> = sorted_entries(&dir)?.into_iter().filter(|p| is_clip(p)).collect();
        let chosen = if clips.len() < per_class {
            warnings.push(format!(
                "dataset: class {class} has {} clips, fewer than {per_class}; using all",
                clips.len()
            ));
            clips
        } else {
            let mut picked: Vec<usize> = rand::seq::index::sample(&mut rng, clips.len(), per_class).into_vec();
            picked.sort_unstable();
            picked.into_iter().map(|i| clips[i].clone()).collect()
        };
        samples.push(ClassSample { class, clips: chosen });
    }
    Ok((samples, warnings))
}

fn manifest_name(class: &str) -> String {
    let safe: String = class
        .chars()
        .map(|c| if c.is_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    format!("{safe}.manifest")
}

/// Writes one manifest per class into `out_dir`; returns the paths in class order.
pub fn write_manifests(
    samples: &[ClassSample],
    out_dir: &Path,
    seed: u64,
    music_library: Option<&Path>,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    samples
        .iter()
        .map(|s| {
            let path = out_dir.join(manifest_name(&s.class));
            std::fs::write(&path, s.to_manifest(seed, music_library)).map_err(|e| Error::io(&path, e))?;
            Ok(path)
        })
        .collect()
}
