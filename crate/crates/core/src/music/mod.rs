//! Music retrieval from a local library and beat detection.

mod beats;
mod library;

pub use beats::{
    detect_beats, estimate_tempo, onset_envelope, BeatGrid, ANALYSIS_RATE, FALLBACK_SPACING, HOP,
    MIN_TRACK_SECONDS, PRIOR_BPM, TIGHTNESS, WINDOW,
};
pub use library::{
    index_library, normalize_title, retrieve_music, title_distance, MatchTier, MusicLibrary,
    MusicMatch, MusicTrack, MAX_MATCH_DISTANCE,
};
