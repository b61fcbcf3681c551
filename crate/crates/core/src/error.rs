use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },

    #[error("empty project")]
    EmptyProject,

    #[error("unreadable media {path}: {message}")]
    UnreadableMedia { path: PathBuf, message: String },

    #[error("codec failure: {0}")]
    Codec(String),

    #[error("no keyframes for asset {0}")]
    NoKeyframes(u32),

    #[error("empty frame sequence")]
    EmptyFrames,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("adapter error: {0}")]
    Adapter(String),

    #[error("adapter returned HTTP status {status}: {body}")]
    AdapterStatus { status: u16, body: String },

    #[error("empty plan")]
    EmptyPlan,

    #[error("plan missing order")]
    PlanMissingOrder,

    #[error("plan missing captions")]
    PlanMissingCaptions,

    #[error("no music available")]
    NoMusic,

    #[error("no plausible match for {name:?} (best distance {distance:.3})")]
    NoPlausibleMatch { name: String, distance: f64 },

    #[error("track too short for tempo estimation ({0:.2} s)")]
    TrackTooShort(f64),

    #[error("audio error: {0}")]
    Audio(String),

    #[error("timeline error: {0}")]
    Timeline(String),

    #[error("time {t} out of range [0, {total})")]
    TimeOutOfRange { t: f64, total: f64 },

    #[error("style adapter error: {0}")]
    Style(String),

    #[error("empty text")]
    EmptyText,

    #[error("{0}")]
    Judge(String),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("image error on {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
