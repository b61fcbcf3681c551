//! Frame rasterization, transitions, captions, audio and the style stage.

mod blur;
mod compose;
mod output;
mod style;
mod text;

pub use blur::{blur_crop, gaussian_blur, gaussian_kernel};
pub use compose::{blend, compose_frame, place, Compositor, CAPTION_MARGIN, CARD_BACKGROUND};
pub use output::{
    encode_container, frame_count, frame_path, loop_audio, render_video, soundtrack, stylize_directory, OutputKind,
    RenderConfig, RenderReport, AUDIO_FILE, META_FILE,
};
pub use style::{StyleAdapter, StyleKind};
pub use text::{draw_text, text_scale, wrap, Anchor, TEXT_FILL, TEXT_OUTLINE};
