use std::sync::{Arc, OnceLock};

use image::imageops;

use crate::assets::{AssetKind, FrameStore};
use crate::error::{Error, Result};
use crate::frame::{resize_linear, solid, Frame};
use crate::timeline::{Card, PlacementMode, Shot, Timeline, TimelineSegment, Transition};

use super::blur::blur_crop;
use super::text::{draw_text, Anchor};

pub const CARD_BACKGROUND: [u8; 3] = [18, 18, 24];
/// Caption block sits this fraction of the frame height above the bottom edge.
pub const CAPTION_MARGIN: f64 = 0.05;

/// Scales a source per its placement: blurred background, then foreground on top.
pub fn place(source: &Frame, seg: &TimelineSegment, width: u32, height: u32) -> Frame {
    let p = seg.placement;
    if p.mode == PlacementMode::ExactFit {
        return resize_linear(source, width, height);
    }
    let bg = resize_linear(source, p.bg_width, p.bg_height);
    let x0 = (p.bg_width - width) / 2;
    let y0 = (p.bg_height - height) / 2;
    let mut canvas = blur_crop(&bg, p.bg_blur_sigma, x0, y0, width, height);
    let fg = resize_linear(source, p.fg_width, p.fg_height);
    imageops::replace(&mut canvas, &fg, p.fg_offset_x as i64, p.fg_offset_y as i64);
    canvas
}

fn card_plate(card: &Card, width: u32, height: u32) -> Frame {
    let mut f = solid(width, height, CARD_BACKGROUND);
    draw_text(&mut f, &card.text, Anchor::Center);
    f
}

fn smoothstep(a: f64) -> f64 {
    a * a * (3.0 - 2.0 * a)
}

fn mix(a: &Frame, wa: f64, b: Option<(&Frame, f64)>) -> Frame {
    let mut out = a.clone();
    match b {
        Some((b, wb)) => {
            for ((o, &x), &y) in out.iter_mut().zip(a.as_raw()).zip(b.as_raw()) {
                *o = (x as f64 * wa + y as f64 * wb).round().clamp(0.0, 255.0) as u8;
            }
        }
        None => {
            for (o, &x) in out.iter_mut().zip(a.as_raw()) {
                *o = (x as f64 * wa).round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    out
}

/// Blends the outgoing frame `a` into the incoming frame `b` at progress `alpha` in [0, 1).
pub fn blend(a: &Frame, b: &Frame, alpha: f64, kind: Transition) -> Frame {
    let (w, h) = (a.width(), a.height());
    match kind {
        Transition::Cut => {
            if alpha < 0.5 {
                a.clone()
            } else {
                b.clone()
            }
        }
        Transition::CrossfadeIn => mix(a, 1.0 - alpha, Some((b, alpha))),
        Transition::CrossfadeOut => {
            if alpha < 0.5 {
                mix(a, 1.0 - 2.0 * alpha, None)
            } else {
                mix(b, 2.0 * alpha - 1.0, None)
            }
        }
        Transition::TranslateUp => {
            let shift = (smoothstep(alpha) * h as f64).round() as u32;
            let row = w as usize * 3;
            let mut out = Frame::new(w, h);
            for y in 0..h {
                let (src, sy) = if y + shift < h { (a, y + shift) } else { (b, y + shift - h) };
                let s = sy as usize * row;
                out.as_mut()[y as usize * row..(y as usize + 1) * row]
                    .copy_from_slice(&src.as_raw()[s..s + row]);
            }
            out
        }
        Transition::TranslateLateral => {
            let shift = (smoothstep(alpha) * w as f64).round() as u32;
            Frame::from_fn(w, h, |x, y| {
                if x + shift < w {
                    *a.get_pixel(x + shift, y)
                } else {
                    *b.get_pixel(x + shift - w, y)
                }
            })
        }
    }
}

/// Renders timeline frames. Still shots (cards, images) are composed once and reused.
pub struct Compositor<'a> {
    timeline: &'a Timeline,
    frames: &'a FrameStore,
    plates: Vec<OnceLock<Arc<Frame>>>,
}

impl<'a> Compositor<'a> {
    pub fn new(timeline: &'a Timeline, frames: &'a FrameStore) -> Self {
        let plates = (0..timeline.segments.len() + 2).map(|_| OnceLock::new()).collect();
        Compositor {
            timeline,
            frames,
            plates,
        }
    }

    fn caption(&self, mut frame: Frame, text: &str) -> Frame {
        let margin = (self.timeline.height as f64 * CAPTION_MARGIN).round() as u32;
        draw_text(&mut frame, text, Anchor::BottomCenter { margin });
        frame
    }

    fn segment_frame(&self, seg: &TimelineSegment, t: f64) -> Result<Frame> {
        let index = match (seg.kind, seg.source_trim, seg.source_frame_rate) {
            (AssetKind::Video, Some(trim), Some(fps)) => {
                let local = (t - seg.start).clamp(0.0, trim.length);
                let last = ((trim.offset + trim.length) * fps - 1e-6).ceil().max(1.0) as usize - 1;
                (((trim.offset + local) * fps + 1e-6).floor() as usize).min(last)
            }
            _ => 0,
        };
        let source = self.frames.frame(seg.asset_id, index).ok_or_else(|| {
            Error::Timeline(format!("no decoded frames for asset {}", seg.asset_id))
        })?;
        let placed = place(source, seg, self.timeline.width, self.timeline.height);
        Ok(self.caption(placed, &seg.caption))
    }

    fn shot_frame(&self, index: usize, shot: Shot<'_>, t: f64) -> Result<Arc<Frame>> {
        let still = match shot {
            Shot::Card(_) => true,
            Shot::Segment(s) => s.kind == AssetKind::Image,
        };
        if !still {
            let Shot::Segment(seg) = shot else { unreachable!() };
            return self.segment_frame(seg, t).map(Arc::new);
        }
        if let Some(plate) = self.plates[index].get() {
            return Ok(plate.clone());
        }
        let plate = match shot {
            Shot::Card(c) => card_plate(c, self.timeline.width, self.timeline.height),
            Shot::Segment(s) => self.segment_frame(s, t)?,
        };
        Ok(self.plates[index].get_or_init(|| Arc::new(plate)).clone())
    }

    /// The frame shown at `t` seconds.
    pub fn frame_at(&self, t: f64) -> Result<Frame> {
        let total = self.timeline.total_duration;
        if !(0.0..total).contains(&t) {
            return Err(Error::TimeOutOfRange { t, total });
        }
        let shots = self.timeline.shots();
        let i = shots.iter().rposition(|s| s.start() <= t).unwrap_or(0);

        let (kind, d) = shots[i].transition();
        if i > 0 && d > 0.0 && t < shots[i].start() + d / 2.0 {
            let alpha = (t - (shots[i].start() - d / 2.0)) / d;
            let a = self.shot_frame(i - 1, shots[i - 1], t)?;
            let b = self.shot_frame(i, shots[i], t)?;
            return Ok(blend(&a, &b, alpha, kind));
        }
        if let Some(next) = shots.get(i + 1) {
            let (kind, d) = next.transition();
            if d > 0.0 && t >= next.start() - d / 2.0 {
                let alpha = (t - (next.start() - d / 2.0)) / d;
                let a = self.shot_frame(i, shots[i], t)?;
                let b = self.shot_frame(i + 1, *next, t)?;
                return Ok(blend(&a, &b, alpha, kind));
            }
        }
        Ok((*self.shot_frame(i, shots[i], t)?).clone())
    }
}

/// One-off frame lookup; prefer a long-lived [`Compositor`] when rendering many frames.
pub fn compose_frame(timeline: &Timeline, t: f64, frames: &FrameStore) -> Result<Frame> {
    Compositor::new(timeline, frames).frame_at(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dissolve_midpoint_black_to_white() {
        let a = solid(8, 4, [0, 0, 0]);
        let b = solid(8, 4, [255, 255, 255]);
        let m = blend(&a, &b, 0.5, Transition::CrossfadeIn);
        assert!(m.as_raw().iter().all(|&v| v == 127 || v == 128));
    }

    #[test]
    fn translations_start_on_outgoing_frame() {
        let a = Frame::from_fn(10, 6, |x, y| image::Rgb([x as u8, y as u8, 1]));
        let b = solid(10, 6, [9, 9, 9]);
        for kind in [Transition::TranslateUp, Transition::TranslateLateral] {
            assert_eq!(blend(&a, &b, 0.0, kind), a);
            assert_eq!(blend(&a, &b, 0.999_999, kind), b);
        }
    }

    #[test]
    fn fade_through_black() {
        let a = solid(4, 4, [200, 100, 50]);
        let b = solid(4, 4, [10, 20, 30]);
        assert_eq!(blend(&a, &b, 0.5, Transition::CrossfadeOut), solid(4, 4, [0, 0, 0]));
        assert_eq!(blend(&a, &b, 0.0, Transition::CrossfadeOut), a);
    }
}
