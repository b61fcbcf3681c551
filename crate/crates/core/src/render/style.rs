use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde_json::json;

use crate::assets::StyleChoice;
use crate::error::{Error, Result};
use crate::frame::{luma601, Frame};
use crate::narration::adapter::Transport;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StyleKind {
    Identity,
    Gray,
    Sepia,
    External,
}

/// Per-frame restyling. Built-in kinds are pure pixel maps; `External` sends
/// each frame to a remote stylizer.
pub struct StyleAdapter {
    pub kind: StyleKind,
    endpoint: Option<Transport>,
}

impl StyleAdapter {
    pub fn builtin(kind: StyleKind) -> Self {
        assert!(kind != StyleKind::External, "external styles need an endpoint");
        StyleAdapter {
            kind,
            endpoint: None,
        }
    }

    pub fn external(endpoint: Transport) -> Self {
        StyleAdapter {
            kind: StyleKind::External,
            endpoint: Some(endpoint),
        }
    }

    /// Adapter for a requirements style choice. `None` maps to `Identity`;
    /// `External` reads `STORYCUT_STYLE_URL` or `STORYCUT_STYLE_CMD`.
    pub fn for_choice(choice: StyleChoice) -> Result<Self> {
        Ok(match choice {
            StyleChoice::None => StyleAdapter::builtin(StyleKind::Identity),
            StyleChoice::ReferenceGray => StyleAdapter::builtin(StyleKind::Gray),
            StyleChoice::ReferenceSepia => StyleAdapter::builtin(StyleKind::Sepia),
            StyleChoice::External => {
                let endpoint = Transport::from_env("STORYCUT_STYLE")?.ok_or_else(|| {
                    Error::Style("external style needs STORYCUT_STYLE_URL or STORYCUT_STYLE_CMD".into())
                })?;
                StyleAdapter::external(endpoint)
            }
        })
    }

    pub fn apply(&self, frame: &Frame) -> Result<Frame> {
        match self.kind {
            StyleKind::Identity => Ok(frame.clone()),
            StyleKind::Gray => Ok(map_pixels(frame, |[r, g, b]| {
                let y = luma601(r, g, b).round().clamp(0.0, 255.0) as u8;
                [y, y, y]
            })),
            StyleKind::Sepia => Ok(map_pixels(frame, |[r, g, b]| {
                let (r, g, b) = (r as f32, g as f32, b as f32);
                let c = |v: f32| v.round().clamp(0.0, 255.0) as u8;
                [
                    c(0.393 * r + 0.769 * g + 0.189 * b),
                    c(0.349 * r + 0.686 * g + 0.168 * b),
                    c(0.272 * r + 0.534 * g + 0.131 * b),
                ]
            })),
            StyleKind::External => {
                let endpoint = self.endpoint.as_ref().expect("external adapter has an endpoint");
                remote_stylize(endpoint, frame)
            }
        }
    }

    /// Applies the style, retrying once; a second failure keeps the frame as is.
    pub fn apply_or_identity(&self, frame: &Frame) -> (Frame, Option<String>) {
        match self.apply(frame).or_else(|_| self.apply(frame)) {
            Ok(styled) => (styled, None),
            Err(e) => (frame.clone(), Some(format!("style failed twice, frame left unstyled: {e}"))),
        }
    }
}

fn map_pixels(frame: &Frame, f: impl Fn([u8; 3]) -> [u8; 3]) -> Frame {
    let mut out = frame.clone();
    for p in out.pixels_mut() {
        p.0 = f(p.0);
    }
    out
}

fn remote_stylize(endpoint: &Transport, frame: &Frame) -> Result<Frame> {
    let request = json!({
        "frame": {
            "width": frame.width(),
            "height": frame.height(),
            "data": B64.encode(frame.as_raw()),
        }
    });
    let response = endpoint.exchange(&request)?;
    let data = response
        .pointer("/frame/data")
        .or_else(|| response.get("frame"))
        .and_then(|v| v.as_str())
        .ok_or_else(|| Error::Style("response has no frame data".into()))?;
    let raw = B64
        .decode(data)
        .map_err(|e| Error::Style(format!("frame data is not base64: {e}")))?;
    Frame::from_raw(frame.width(), frame.height(), raw)
        .ok_or_else(|| Error::Style("styled frame has the wrong size".into()))
}
