use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Edit distances above this are not treated as a match.
pub const MAX_MATCH_DISTANCE: f64 = 0.7;

const COMPRESSED_AUDIO: &[&str] = &["mp3", "flac", "ogg", "m4a", "aac", "opus"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MusicTrack {
    pub title: String,
    pub path: PathBuf,
    pub duration: f64,
    pub sample_rate: u32,
    pub channels: u16,
}

/// Lowercase, punctuation removed (`_` and `-` count as spaces), whitespace collapsed.
pub fn normalize_title(s: &str) -> String {
    s.chars()
        .map(|c| if c == '_' || c == '-' { ' ' } else { c })
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .flat_map(char::to_lowercase)
        .collect::<String>()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MusicLibrary {
    tracks: BTreeMap<String, MusicTrack>,
}

impl MusicLibrary {
    pub fn len(&self) -> usize {
        self.tracks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tracks.is_empty()
    }

    pub fn get(&self, normalized: &str) -> Option<&MusicTrack> {
        self.tracks.get(normalized)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.tracks.keys().map(String::as_str)
    }

    /// Track with the lexicographically smallest normalized title.
    pub fn first(&self) -> Option<&MusicTrack> {
        self.tracks.values().next()
    }

    pub fn insert(&mut self, track: MusicTrack) -> bool {
        let key = normalize_title(&track.title);
        if self.tracks.contains_key(&key) {
            return false;
        }
        self.tracks.insert(key, track);
        true
    }
}

fn read_titles(dir: &Path) -> BTreeMap<String, String> {
    std::fs::read_to_string(dir.join("titles.tsv"))
        .map(|text| {
            text.lines()
                .filter_map(|l| l.split_once('\t'))
                .map(|(f, t)| (f.trim().to_string(), t.trim().to_string()))
                .collect()
        })
        .unwrap_or_default()
}

fn probe_wav(path: &Path) -> std::result::Result<(f64, u32, u16), String> {
    let reader = hound::WavReader::open(path).map_err(|e| e.to_string())?;
    let spec = reader.spec();
    if !(1..=2).contains(&spec.channels) {
        return Err(format!("{} channels (expected 1 or 2)", spec.channels));
    }
    let frames = reader.duration();
    if frames == 0 || spec.sample_rate == 0 {
        return Err("empty waveform".into());
    }
    Ok((frames as f64 / spec.sample_rate as f64, spec.sample_rate, spec.channels))
}

/// Indexes every waveform file in `dir`. Undecodable files are skipped with a warning.
pub fn index_library(dir: &Path) -> Result<(MusicLibrary, Vec<String>)> {
    let titles = read_titles(dir);
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    paths.sort();

    let probed: Vec<(PathBuf, std::result::Result<MusicTrack, String>)> = paths
        .into_par_iter()
        .filter_map(|path| {
            let ext = path
                .extension()
                .and_then(|e| e.to_str())
                .unwrap_or_default()
                .to_ascii_lowercase();
            let file_name = path.file_name()?.to_string_lossy().into_owned();
            let result = if ext == "wav" {
                probe_wav(&path).map(|(duration, sample_rate, channels)| MusicTrack {
                    title: titles.get(&file_name).cloned().unwrap_or_else(|| {
                        path.file_stem().unwrap_or_default().to_string_lossy().into_owned()
                    }),
                    path: path.clone(),
                    duration,
                    sample_rate,
                    channels,
                })
            } else if COMPRESSED_AUDIO.contains(&ext.as_str()) {
                Err("compressed audio is not decoded in-process".into())
            } else {
                return None;
            };
            Some((path, result))
        })
        .collect();

    let mut library = MusicLibrary::default();
    let mut warnings = Vec::new();
    for (path, result) in probed {
        match result {
            Ok(track) => {
                let title = track.title.clone();
                if !library.insert(track) {
                    warnings.push(format!(
                        "music: duplicate title {title:?} from {} skipped",
                        path.display()
                    ));
                }
            }
            Err(reason) => warnings.push(format!("music: skipped {}: {reason}", path.display())),
        }
    }
    Ok((library, warnings))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MatchTier {
    Exact = 1,
    Containment = 2,
    EditDistance = 3,
}

impl fmt::Display for MatchTier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            MatchTier::Exact => "exact",
            MatchTier::Containment => "containment",
            MatchTier::EditDistance => "edit-distance",
        };
        write!(f, "{name} (tier {})", *self as u8)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MusicMatch {
    pub track: MusicTrack,
    pub tier: MatchTier,
    /// Normalized Levenshtein distance between the query and the matched title.
    pub distance: f64,
}

/// `levenshtein / max(len)` over characters.
pub fn title_distance(a: &str, b: &str) -> f64 {
    1.0 - strsim::normalized_levenshtein(a, b)
}

/// Finds the best track for a recommended name: exact normalized title, then
/// containment in either direction, then smallest edit distance. Ties go to
/// the lexicographically smaller title.
pub fn retrieve_music(name: &str, library: &MusicLibrary) -> Result<MusicMatch> {
    if library.is_empty() {
        return Err(Error::NoMusic);
    }
    let query = normalize_title(name);
    if query.is_empty() {
        return Err(Error::InvalidArgument("empty music name".into()));
    }
    if let Some(track) = library.get(&query) {
        return Ok(MusicMatch {
            track: track.clone(),
            tier: MatchTier::Exact,
            distance: 0.0,
        });
    }

    let closest = |keys: &mut dyn Iterator<Item = &str>| -> Option<(f64, String)> {
        keys.map(|k| (title_distance(&query, k), k.to_string()))
            .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)))
    };

    let mut containing = library
        .keys()
        .filter(|k| k.contains(query.as_str()) || query.contains(*k));
    if let Some((distance, key)) = closest(&mut containing) {
        return Ok(MusicMatch {
            track: library.tracks[&key].clone(),
            tier: MatchTier::Containment,
            distance,
        });
    }

    let (distance, key) = closest(&mut library.keys()).ok_or(Error::NoMusic)?;
    if distance > MAX_MATCH_DISTANCE {
        return Err(Error::NoPlausibleMatch {
            name: name.to_string(),
            distance,
        });
    }
    Ok(MusicMatch {
        track: library.tracks[&key].clone(),
        tier: MatchTier::EditDistance,
        distance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::{write_wav16, Pcm};

    fn track(title: &str) -> MusicTrack {
        MusicTrack {
            title: title.into(),
            path: PathBuf::from(format!("{title}.wav")),
            duration: 10.0,
            sample_rate: 8000,
            channels: 1,
        }
    }

    fn library(titles: &[&str]) -> MusicLibrary {
        let mut lib = MusicLibrary::default();
        for t in titles {
            lib.insert(track(t));
        }
        lib
    }

    /// Textbook dynamic-programming edit distance.
    fn levenshtein_oracle(a: &str, b: &str) -> usize {
        let a: Vec<char> = a.chars().collect();
        let b: Vec<char> = b.chars().collect();
        let mut prev: Vec<usize> = (0..=b.len()).collect();
        for i in 1..=a.len() {
            let mut cur = vec![i; b.len() + 1];
            for j in 1..=b.len() {
                let sub = prev[j - 1] + usize::from(a[i - 1] != b[j - 1]);
                cur[j] = sub.min(prev[j] + 1).min(cur[j - 1] + 1);
            }
            prev = cur;
        }
        prev[b.len()]
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_title("River Flows In You"), "river flows in you");
        assert_eq!(normalize_title("  Clair_de-Lune!! (Live) "), "clair de lune live");
    }

    #[test]
    fn exact_then_containment_then_edit_distance() {
        let lib = library(&["River Flows In You", "Clair de Lune"]);
        let m = retrieve_music("river flows in you", &lib).unwrap();
        assert_eq!((m.tier, m.track.title.as_str()), (MatchTier::Exact, "River Flows In You"));
        let m = retrieve_music("River Flows", &lib).unwrap();
        assert_eq!(m.tier, MatchTier::Containment);
        assert_eq!(m.track.title, "River Flows In You");

        let q = normalize_title("Rivr Flws in Yu");
        let d_river = levenshtein_oracle(&q, "river flows in you");
        let d_clair = levenshtein_oracle(&q, "clair de lune");
        assert_eq!((d_river, d_clair), (3, 13));
        let m = retrieve_music("Rivr Flws in Yu", &lib).unwrap();
        assert_eq!(m.tier, MatchTier::EditDistance);
        assert_eq!(m.track.title, "River Flows In You");
        assert!((m.distance - 3.0 / 18.0).abs() < 1e-12);
    }

    #[test]
    fn ties_go_to_smaller_title_and_far_names_fail() {
        let lib = library(&["abd", "abc"]);
        assert_eq!(retrieve_music("abx", &lib).unwrap().track.title, "abc");
        assert!(matches!(
            retrieve_music("zzzzzzzz", &lib),
            Err(Error::NoPlausibleMatch { .. })
        ));
        assert!(matches!(
            retrieve_music("x", &MusicLibrary::default()),
            Err(Error::NoMusic)
        ));
    }

    #[test]
    fn distance_matches_oracle() {
        for (a, b) in [("kitten", "sitting"), ("", "abc"), ("flaw", "lawn"), ("same", "same")] {
            let n = a.chars().count().max(b.chars().count()).max(1);
            let expected = levenshtein_oracle(a, b) as f64 / n as f64;
            assert!((title_distance(a, b) - expected).abs() < 1e-12, "{a} {b}");
        }
    }

    #[test]
    fn index_skips_undecodable_and_reads_sidecar_titles() {
        let tmp = tempfile::tempdir().unwrap();
        let pcm = Pcm {
            samples: vec![0.0; 8000],
            sample_rate: 8000,
            channels: 1,
        };
        write_wav16(&tmp.path().join("River Flows In You.wav"), &pcm).unwrap();
        write_wav16(&tmp.path().join("t2.wav"), &pcm).unwrap();
        std::fs::write(tmp.path().join("broken.wav"), b"RIFF nonsense").unwrap();
        std::fs::write(tmp.path().join("titles.tsv"), "t2.wav\tGymnopedie No. 1\n").unwrap();
        let (lib, warnings) = index_library(tmp.path()).unwrap();
        assert_eq!(lib.len(), 2);
        assert_eq!(warnings.len(), 1, "{warnings:?}");
        assert!(lib.get("river flows in you").is_some());
        assert_eq!(lib.get("gymnopedie no 1").unwrap().duration, 1.0);

        let empty = tempfile::tempdir().unwrap();
        assert!(index_library(empty.path()).unwrap().0.is_empty());
    }
}
