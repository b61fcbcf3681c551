//! Bitmap text from the public-domain 8x8 font.

use font8x8::{UnicodeFonts, BASIC_FONTS, LATIN_FONTS};
use image::Rgb;

use crate::frame::Frame;

pub const TEXT_FILL: [u8; 3] = [255, 255, 255];
pub const TEXT_OUTLINE: [u8; 3] = [16, 16, 16];
pub const OUTLINE_PX: i64 = 2;
const GLYPH: u32 = 8;

fn glyph(c: char) -> [u8; 8] {
    BASIC_FONTS
        .get(c)
        .or_else(|| LATIN_FONTS.get(c))
        .or_else(|| BASIC_FONTS.get('?'))
        .unwrap_or([0; 8])
}

/// Integer glyph scale giving a cap height of about `frame_height / 18` px.
pub fn text_scale(frame_height: u32) -> u32 {
    ((frame_height as f64 / 18.0 / GLYPH as f64).round() as u32).max(1)
}

/// Greedy word wrap to at most `max_chars` per line; overlong words are split.
pub fn wrap(text: &str, max_chars: usize) -> Vec<String> {
    let max_chars = max_chars.max(1);
    let mut lines = Vec::new();
    let mut line = String::new();
    for word in text.split_whitespace() {
        let mut word: Vec<char> = word.chars().collect();
        while word.len() > max_chars {
            if !line.is_empty() {
                lines.push(std::mem::take(&mut line));
            }
            lines.push(word.drain(..max_chars).collect());
        }
        let word: String = word.into_iter().collect();
        let needed = line.chars().count() + usize::from(!line.is_empty()) + word.chars().count();
        if needed > max_chars && !line.is_empty() {
            lines.push(std::mem::take(&mut line));
        }
        if !line.is_empty() {
            line.push(' ');
        }
        line.push_str(&word);
    }
    if !line.is_empty() {
        lines.push(line);
    }
    lines
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Anchor {
    /// Block bottom sits `margin` px above the frame bottom.
    BottomCenter { margin: u32 },
    Center,
}

/// Draws wrapped, outlined text onto `frame`. Lines are at most 90% of the frame width.
pub fn draw_text(frame: &mut Frame, text: &str, anchor: Anchor) {
    if text.trim().is_empty() {
        return;
    }
    let (fw, fh) = (frame.width(), frame.height());
    let scale = text_scale(fh);
    let advance = GLYPH * scale;
    let line_height = (GLYPH + 2) * scale;
    let max_chars = ((fw as f64 * 0.9) / advance as f64).floor() as usize;
    let lines = wrap(text, max_chars);
    let block_h = lines.len() as u32 * line_height - 2 * scale;
    let top = match anchor {
        Anchor::BottomCenter { margin } => fh as i64 - margin as i64 - block_h as i64,
        Anchor::Center => (fh as i64 - block_h as i64) / 2,
    };

    // Glyph coverage mask over the text block plus the outline border.
    let pad = OUTLINE_PX;
    let mask_w = fw as i64;
    let mask_h = block_h as i64 + 2 * pad;
    let mut mask = vec![false; (mask_w * mask_h) as usize];
    for (li, line) in lines.iter().enumerate() {
        let n = line.chars().count() as i64;
        let left = (fw as i64 - n * advance as i64) / 2;
        let y_line = pad + li as i64 * line_height as i64;
        for (ci, c) in line.chars().enumerate() {
            let bits = glyph(c);
            let x_char = left + ci as i64 * advance as i64;
            for (gy, row) in bits.iter().enumerate() {
                for gx in 0..GLYPH as i64 {
                    if row >> gx & 1 == 0 {
                        continue;
                    }
                    for sy in 0..scale as i64 {
                        for sx in 0..scale as i64 {
                            let x = x_char + gx * scale as i64 + sx;
                            let y = y_line + gy as i64 * scale as i64 + sy;
                            if (0..mask_w).contains(&x) && (0..mask_h).contains(&y) {
                                mask[(y * mask_w + x) as usize] = true;
                            }
                        }
                    }
                }
            }
        }
    }

    let origin_y = top - pad;
    for my in 0..mask_h {
        let y = origin_y + my;
        if !(0..fh as i64).contains(&y) {
            continue;
        }
        for x in 0..mask_w {
            let inside = mask[(my * mask_w + x) as usize];
            let outline = !inside
                && (-pad..=pad).any(|dy| {
                    (-pad..=pad).any(|dx| {
                        let (nx, ny) = (x + dx, my + dy);
                        (0..mask_w).contains(&nx)
                            && (0..mask_h).contains(&ny)
                            && mask[(ny * mask_w + nx) as usize]
                    })
                });
            if inside {
                frame.put_pixel(x as u32, y as u32, Rgb(TEXT_FILL));
            } else if outline {
                frame.put_pixel(x as u32, y as u32, Rgb(TEXT_OUTLINE));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::solid;

    #[test]
    fn scale_tracks_height() {
        assert_eq!(text_scale(720), 5);
        assert_eq!(text_scale(1080), 8);
        assert_eq!(text_scale(10), 1);
    }

    #[test]
    fn wrapping() {
        assert_eq!(wrap("a bb ccc dddd", 6), vec!["a bb", "ccc", "dddd"]);
        assert_eq!(wrap("abcdefgh", 3), vec!["abc", "def", "gh"]);
        assert!(wrap("   ", 5).is_empty());
    }

    #[test]
    fn caption_stays_in_bottom_band_and_is_outlined() {
        let mut f = solid(320, 180, [100, 100, 100]);
        draw_text(&mut f, "Hello there", Anchor::BottomCenter { margin: 9 });
        let mut white = 0;
        let mut dark = 0;
        for (_, y, p) in f.enumerate_pixels() {
            if p.0 == TEXT_FILL {
                white += 1;
                assert!(y >= 150 && y < 171, "row {y}");
            }
            if p.0 == TEXT_OUTLINE {
                dark += 1;
            }
        }
        assert!(white > 0 && dark > 0);
    }

    #[test]
    fn empty_text_draws_nothing() {
        let mut f = solid(64, 36, [1, 2, 3]);
        draw_text(&mut f, "", Anchor::Center);
        assert_eq!(f, solid(64, 36, [1, 2, 3]));
    }
}
