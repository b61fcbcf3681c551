//! Automatic storytelling video composition.
//!
//! The pipeline takes a set of photos and clips plus a few lines of user
//! requirements, captions the material, asks a chat model for a story plan,
//! picks music from a local library, snaps every cut to the music's beats and
//! renders a captioned, optionally stylised video.

pub mod assets;
pub mod audio;
pub mod cli;
pub mod codec;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod frame;
pub mod keyframe;
pub mod music;
pub mod narration;
pub mod pipeline;
pub mod render;
pub mod timeline;

pub use error::{Error, Result};
