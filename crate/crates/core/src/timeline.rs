//! Beat-snapped edit timeline.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assets::{AssetKind, MediaAsset};
use crate::error::{Error, Result};
use crate::music::{BeatGrid, MusicTrack};
use crate::narration::DirectorPlan;

/// Nominal on-screen time of a still image before snapping.
pub const IMAGE_DURATION: f64 = 4.0;
/// Overlap at each seam when music is looped.
pub const LOOP_CROSSFADE: f64 = 1.0;

const EPS: f64 = 1e-9;

/// Seam overlap for a looped track of `duration` seconds.
pub fn loop_crossfade(duration: f64) -> f64 {
    LOOP_CROSSFADE.min(duration / 4.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlacementMode {
    FitWidthLimited,
    FitHeightLimited,
    ExactFit,
}

/// Where a source lands in the target frame: a sharp foreground over a
/// blurred, center-cropped background.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub fg_width: u32,
    pub fg_height: u32,
    pub fg_offset_x: u32,
    pub fg_offset_y: u32,
    /// Size of the background before cropping; zero for `ExactFit`.
    pub bg_width: u32,
    pub bg_height: u32,
    pub bg_blur_sigma: f64,
    pub mode: PlacementMode,
}

/// Scales a `w_o x h_o` source into a `w_t x h_t` frame. Arguments are height first.
pub fn fit_material(h_o: u32, w_o: u32, h_t: u32, w_t: u32) -> Placement {
    assert!(h_o > 0 && w_o > 0 && h_t > 0 && w_t > 0, "dimensions must be positive");
    let scaled = |num: u64, den: u64| -> u32 { ((num as f64 / den as f64).round() as u32).max(1) };
    // M1 matches the target height, M2 matches the target width.
    let m1_w = scaled(w_o as u64 * h_t as u64, h_o as u64);
    let m2_h = scaled(h_o as u64 * w_t as u64, w_o as u64);
    let sigma = default_blur_sigma(w_t);
    if m1_w == w_t {
        Placement {
            fg_width: w_t,
            fg_height: h_t,
            fg_offset_x: 0,
            fg_offset_y: 0,
            bg_width: 0,
            bg_height: 0,
            bg_blur_sigma: 0.0,
            mode: PlacementMode::ExactFit,
        }
    } else if m1_w < w_t {
        Placement {
            fg_width: m1_w,
            fg_height: h_t,
            fg_offset_x: (w_t - m1_w) / 2,
            fg_offset_y: 0,
            bg_width: w_t,
            bg_height: m2_h,
            bg_blur_sigma: sigma,
            mode: PlacementMode::FitWidthLimited,
        }
    } else {
        Placement {
            fg_width: w_t,
            fg_height: m2_h,
            fg_offset_x: 0,
            fg_offset_y: (h_t - m2_h) / 2,
            bg_width: m1_w,
            bg_height: h_t,
            bg_blur_sigma: sigma,
            mode: PlacementMode::FitHeightLimited,
        }
    }
}

/// `width / 64`.
pub fn default_blur_sigma(target_width: u32) -> f64 {
    target_width as f64 / 64.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Transition {
    Cut,
    CrossfadeIn,
    CrossfadeOut,
    TranslateUp,
    TranslateLateral,
}

impl Transition {
    pub const ANIMATED: [Transition; 4] = [
        Transition::CrossfadeIn,
        Transition::CrossfadeOut,
        Transition::TranslateUp,
        Transition::TranslateLateral,
    ];
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Transition::Cut => "cut",
            Transition::CrossfadeIn => "crossfade-in",
            Transition::CrossfadeOut => "crossfade-out",
            Transition::TranslateUp => "translate-up",
            Transition::TranslateLateral => "translate-lateral",
        })
    }
}

/// Portion of a clip that is played; anything past `length` holds the last frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceTrim {
    pub offset: f64,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineSegment {
    pub asset_id: u32,
    pub kind: AssetKind,
    pub start: f64,
    pub end: f64,
    pub caption: String,
    pub transition_in: Transition,
    /// Centered on `start`.
    pub transition_duration: f64,
    pub placement: Placement,
    pub source_trim: Option<SourceTrim>,
    /// Frames per second of a video source.
    pub source_frame_rate: Option<f64>,
}

impl TimelineSegment {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// Title or closing card: centered text on a dark background.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Card {
    pub text: String,
    pub start: f64,
    pub end: f64,
    pub transition_in: Transition,
    pub transition_duration: f64,
}

impl Card {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timeline {
    pub width: u32,
    pub height: u32,
    pub opening: Card,
    pub segments: Vec<TimelineSegment>,
    pub closing: Card,
    pub music: Option<MusicTrack>,
    /// True when the timeline outlasts the music and the track repeats.
    pub music_loops: bool,
    /// Beat times used for snapping, including repeats of a looped track.
    pub beats: Vec<f64>,
    pub total_duration: f64,
}

/// One entry of the flattened shot list: the opening card, every segment, the closing card.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shot<'a> {
    Card(&'a Card),
    Segment(&'a TimelineSegment),
}

impl Shot<'_> {
    pub fn start(&self) -> f64 {
        match self {
            Shot::Card(c) => c.start,
            Shot::Segment(s) => s.start,
        }
    }

    pub fn end(&self) -> f64 {
        match self {
            Shot::Card(c) => c.end,
            Shot::Segment(s) => s.end,
        }
    }

    pub fn transition(&self) -> (Transition, f64) {
        match self {
            Shot::Card(c) => (c.transition_in, c.transition_duration),
            Shot::Segment(s) => (s.transition_in, s.transition_duration),
        }
    }
}

impl Timeline {
    pub fn shots(&self) -> Vec<Shot<'_>> {
        let mut shots = Vec::with_capacity(self.segments.len() + 2);
        shots.push(Shot::Card(&self.opening));
        shots.extend(self.segments.iter().map(Shot::Segment));
        shots.push(Shot::Card(&self.closing));
        shots
    }

    /// Start times of every shot after the first.
    pub fn boundaries(&self) -> Vec<f64> {
        self.shots()[1..].iter().map(Shot::start).collect()
    }

    pub fn order(&self) -> Vec<u32> {
        self.segments.iter().map(|s| s.asset_id).collect()
    }

    /// Human-readable edit decision list, one shot per line.
    pub fn to_edl(&self) -> String {
        let mut out = String::new();
        let music = self.music.as_ref().map_or("none", |m| m.title.as_str());
        let _ = writeln!(
            out,
            "# {}x{} total={:.6} music={:?} loop={}",
            self.width, self.height, self.total_duration, music, self.music_loops
        );
        let card_line = |out: &mut String, name: &str, c: &Card| {
            let _ = writeln!(
                out,
                "{name}\tstart={:.6}\tend={:.6}\ttransition={}\tduration={:.6}\ttext={:016x}",
                c.start,
                c.end,
                c.transition_in,
                c.transition_duration,
                fnv1a(&c.text)
            );
        };
        card_line(&mut out, "opening", &self.opening);
        for s in &self.segments {
            let trim = s
                .source_trim
                .map_or("-".to_string(), |t| format!("{:.6}+{:.6}", t.offset, t.length));
            let _ = writeln!(
                out,
                "asset={}\tstart={:.6}\tend={:.6}\ttransition={}\tduration={:.6}\ttrim={trim}\tcaption={:016x}",
                s.asset_id,
                s.start,
                s.end,
                s.transition_in,
                s.transition_duration,
                fnv1a(&s.caption)
            );
        }
        card_line(&mut out, "closing", &self.closing);
        out
    }

    /// Writes `timeline.edl` and `timeline.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let edl = dir.join("timeline.edl");
        std::fs::write(&edl, self.to_edl()).map_err(|e| Error::io(&edl, e))?;
        let json = dir.join("timeline.json");
        std::fs::write(&json, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(&json, e))
    }

    pub fn load(path: &Path) -> Result<Timeline> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineConfig {
    pub width: u32,
    pub height: u32,
    pub card_duration: f64,
    pub image_duration: f64,
    pub min_duration: f64,
    /// Longest last-frame hold for a video that ends before its beat.
    pub max_hold: f64,
    /// Longest extra tail trim when searching for a video's beat.
    pub max_trim: f64,
    pub transition_duration: f64,
    pub blur_sigma: Option<f64>,
    pub seed: u64,
}

impl Default for TimelineConfig {
    fn default() -> Self {
        TimelineConfig {
            width: 1280,
            height: 720,
            card_duration: 3.0,
            image_duration: IMAGE_DURATION,
            min_duration: 1.5,
            max_hold: 0.5,
            max_trim: 1.0,
            transition_duration: 0.5,
            blur_sigma: None,
            seed: 0,
        }
    }
}

/// Beat nearest to `target` (ties to the earlier one) among beats that keep
/// the shot at least `min_duration` long.
fn snap(beats: &[f64], start: f64, target: f64, min_duration: f64) -> Option<f64> {
    let nearest = beats
        .iter()
        .copied()
        .min_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs()).then(a.total_cmp(b)))?;
    if nearest - start >= min_duration - EPS {
        return Some(nearest);
    }
    beats.iter().copied().find(|&b| b - start >= min_duration - EPS)
}

fn snap_video(beats: &[f64], start: f64, clip: f64, cfg: &TimelineConfig) -> f64 {
    let nominal = start + clip.max(cfg.min_duration);
    let Some(end) = snap(beats, start, nominal, cfg.min_duration) else {
        return nominal;
    };
    if end - start <= clip + cfg.max_hold + EPS {
        return end;
    }
    // Too long to hold: look for a beat inside the trim/hold window instead.
    let lo = start + clip - cfg.max_trim - EPS;
    let hi = start + clip + cfg.max_hold + EPS;
    beats
        .iter()
        .copied()
        .filter(|&b| b >= lo && b <= hi && b - start >= cfg.min_duration - EPS)
        .min_by(|a, b| (a - nominal).abs().total_cmp(&(b - nominal).abs()).then(a.total_cmp(b)))
        .unwrap_or(end)
}

/// Lays the plan out on the beat grid. When `music` is given and the edit
/// outlasts it, the grid is extended over looped repeats of the track.
pub fn assemble_timeline(
    plan: &DirectorPlan,
    assets: &[MediaAsset],
    beats: &BeatGrid,
    music: Option<&MusicTrack>,
    cfg: &TimelineConfig,
) -> Result<Timeline> {
    if beats.is_empty() {
        return Err(Error::Timeline("empty beat grid".into()));
    }
    let ids: BTreeSet<u32> = assets.iter().map(|a| a.id).collect();
    let planned: BTreeSet<u32> = plan.order.iter().copied().collect();
    if planned.len() != plan.order.len() || planned != ids {
        return Err(Error::Timeline(format!(
            "plan order {:?} is not a permutation of the asset ids {:?}",
            plan.order, ids
        )));
    }
    let asset = |id: u32| assets.iter().find(|a| a.id == id).expect("id checked above");
    let clip_length = |a: &MediaAsset| match a.kind {
        AssetKind::Image => cfg.image_duration,
        AssetKind::Video => a.duration.unwrap_or(cfg.image_duration),
    };

    let grid = match music {
        Some(track) => {
            let nominal: f64 = plan.order.iter().map(|&id| clip_length(asset(id))).sum::<f64>()
                + 2.0 * cfg.card_duration;
            // Generous horizon: snapping can add at most one beat gap plus the minimum per shot.
            let gap = beats.beats.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
            let horizon = nominal + (plan.order.len() + 2) as f64 * (gap + cfg.min_duration);
            let crossfade = loop_crossfade(track.duration);
            beats.looped(track.duration, crossfade, horizon)
        }
        None => beats.clone(),
    };
    let grid = &grid.beats;

    let card_end = |start: f64| {
        snap(grid, start, start + cfg.card_duration, cfg.min_duration)
            .unwrap_or(start + cfg.card_duration.max(cfg.min_duration))
    };
    let opening_end = card_end(0.0);
    let opening = Card {
        text: plan.title.clone(),
        start: 0.0,
        end: opening_end,
        transition_in: Transition::Cut,
        transition_duration: 0.0,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut draw = || Transition::ANIMATED[rng.random_range(0..Transition::ANIMATED.len())];
    let mut segments = Vec::with_capacity(plan.order.len());
    let mut cursor = opening_end;
    let mut prev_len = opening.duration();
    for &id in &plan.order {
        let a = asset(id);
        let (end, trim) = match a.kind {
            AssetKind::Image => {
                let nominal = cursor + cfg.image_duration;
                let end = snap(grid, cursor, nominal, cfg.min_duration).unwrap_or(nominal);
                (end, None)
            }
            AssetKind::Video => {
                let clip = clip_length(a);
                let end = snap_video(grid, cursor, clip, cfg);
                let trim = SourceTrim {
                    offset: 0.0,
                    length: (end - cursor).min(clip),
                };
                (end, Some(trim))
            }
        };
        let len = end - cursor;
        let sigma = cfg.blur_sigma;
        let mut placement = fit_material(a.height, a.width, cfg.height, cfg.width);
        if let (Some(s), true) = (sigma, placement.mode != PlacementMode::ExactFit) {
            placement.bg_blur_sigma = s;
        }
        segments.push(TimelineSegment {
            asset_id: id,
            kind: a.kind,
            start: cursor,
            end,
            caption: plan.caption(id).to_string(),
            transition_in: draw(),
            transition_duration: cfg.transition_duration.min(prev_len / 2.0).min(len / 2.0),
            placement,
            source_trim: trim,
            source_frame_rate: a.frame_rate.filter(|_| a.kind == AssetKind::Video),
        });
        cursor = end;
        prev_len = len;
    }

    let closing_end = card_end(cursor);
    let closing_len = closing_end - cursor;
    let closing = Card {
        text: plan.closing.clone(),
        start: cursor,
        end: closing_end,
        transition_in: draw(),
        transition_duration: cfg.transition_duration.min(prev_len / 2.0).min(closing_len / 2.0),
    };

    let total_duration = closing_end;
    let used: Vec<f64> = grid.iter().copied().filter(|&b| b <= total_duration + EPS).collect();
    Ok(Timeline {
        width: cfg.width,
        height: cfg.height,
        opening,
        segments,
        closing,
        music: music.cloned(),
        music_loops: music.is_some_and(|m| total_duration > m.duration + EPS),
        beats: used,
        total_duration,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn image(id: u32) -> MediaAsset {
        MediaAsset {
            id,
            kind: AssetKind::Image,
            source_path: PathBuf::from(format!("{id}.png")),
            width: 1280,
            height: 720,
            duration: None,
            frame_rate: None,
        }
    }

    fn video(id: u32, seconds: f64) -> MediaAsset {
        MediaAsset {
            kind: AssetKind::Video,
            duration: Some(seconds),
            frame_rate: Some(25.0),
            ..image(id)
        }
    }

    fn plan(order: &[u32]) -> DirectorPlan {
        DirectorPlan {
            order: order.to_vec(),
            title: "Title".into(),
            captions: order.iter().map(|&i| (i, format!("caption {i}"))).collect(),
            closing: "The end".into(),
            music_name: "x".into(),
            warnings: Vec::new(),
        }
    }

    fn grid(spacing: f64, until: f64) -> BeatGrid {
        BeatGrid::fixed(spacing, until)
    }

    #[test]
    fn worked_placements() {
        let p = fit_material(1080, 1920, 720, 1280);
        assert_eq!(p.mode, PlacementMode::ExactFit);
        assert_eq!((p.fg_width, p.fg_height), (1280, 720));

        let p = fit_material(1920, 1080, 720, 1280);
        assert_eq!(p.mode, PlacementMode::FitWidthLimited);
        assert_eq!((p.fg_width, p.fg_height, p.fg_offset_x, p.fg_offset_y), (405, 720, 437, 0));
        assert_eq!((p.bg_width, p.bg_height), (1280, 2276));
        assert_eq!(p.bg_blur_sigma, 20.0);

        let p = fit_material(720, 2560, 720, 1280);
        assert_eq!(p.mode, PlacementMode::FitHeightLimited);
        assert_eq!((p.fg_width, p.fg_height, p.fg_offset_x, p.fg_offset_y), (1280, 360, 0, 180));
        assert_eq!((p.bg_width, p.bg_height), (2560, 720));
    }

    #[test]
    fn two_images_on_half_second_grid() {
        let t = assemble_timeline(
            &plan(&[2, 1]),
            &[image(1), image(2)],
            &grid(0.5, 30.0),
            None,
            &TimelineConfig::default(),
        )
        .unwrap();
        assert_eq!(t.boundaries(), vec![3.0, 7.0, 11.0]);
        assert_eq!(t.total_duration, 14.0);
        assert_eq!(t.order(), vec![2, 1]);
    }

    #[test]
    fn snaps_to_nearest_beat() {
        // Beats at multiples of 0.52: opening -> 3.12, nominal end 7.12 -> 7.28.
        let beats = BeatGrid {
            beats: (0..40).map(|k| k as f64 * 0.52).collect(),
            tempo: 60.0 / 0.52,
        };
        let t = assemble_timeline(&plan(&[1]), &[image(1)], &beats, None, &TimelineConfig::default())
            .unwrap();
        assert!((t.opening.end - 3.12).abs() < 1e-9);
        assert!((t.segments[0].end - 7.28).abs() < 1e-9);
    }

    #[test]
    fn min_duration_takes_next_beat() {
        // After a 3.0 opening, the nearest beat to 7.0 is 3.9 (a 0.9 s shot); 10.5 is next.
        let beats = BeatGrid {
            beats: vec![0.0, 3.0, 3.9, 10.5, 20.0],
            tempo: 60.0,
        };
        let t = assemble_timeline(&plan(&[1]), &[image(1)], &beats, None, &TimelineConfig::default())
            .unwrap();
        assert_eq!(t.segments[0].end, 10.5);
    }

    #[test]
    fn video_trim_and_hold() {
        let cfg = TimelineConfig::default();
        let beats = grid(1.0, 40.0);
        // 4.3 s clip -> nearest beat 7.0 after a 3.0 start: 4.0 s, tail trimmed.
        let t = assemble_timeline(&plan(&[1]), &[video(1, 4.3)], &beats, None, &cfg).unwrap();
        assert_eq!(t.segments[0].end, 7.0);
        assert_eq!(t.segments[0].source_trim.unwrap().length, 4.0);
        // 4.6 s clip -> 8.0: held 0.4 s past the clip.
        let t = assemble_timeline(&plan(&[1]), &[video(1, 4.6)], &beats, None, &cfg).unwrap();
        assert_eq!(t.segments[0].end, 8.0);
        assert!((t.segments[0].source_trim.unwrap().length - 4.6).abs() < 1e-12);
    }

    #[test]
    fn transitions_depend_only_on_seed() {
        let assets: Vec<MediaAsset> = (1..=6).map(image).collect();
        let p = plan(&[3, 1, 2, 6, 5, 4]);
        let beats = grid(0.5, 60.0);
        let a = assemble_timeline(&p, &assets, &beats, None, &TimelineConfig::default()).unwrap();
        let b = assemble_timeline(&p, &assets, &beats, None, &TimelineConfig::default()).unwrap();
        assert_eq!(a.to_edl(), b.to_edl());
        let c = assemble_timeline(
            &p,
            &assets,
            &beats,
            None,
            &TimelineConfig {
                seed: 99,
                ..TimelineConfig::default()
            },
        )
        .unwrap();
        assert_eq!(a.boundaries(), c.boundaries());
        let kinds = |t: &Timeline| t.segments.iter().map(|s| s.transition_in).collect::<Vec<_>>();
        assert_ne!(kinds(&a), kinds(&c));
    }

    #[test]
    fn short_music_loops() {
        let track = MusicTrack {
            title: "short".into(),
            path: PathBuf::from("short.wav"),
            duration: 8.0,
            sample_rate: 8000,
            channels: 1,
        };
        let assets: Vec<MediaAsset> = (1..=4).map(image).collect();
        let t = assemble_timeline(
            &plan(&[1, 2, 3, 4]),
            &assets,
            &grid(0.5, 8.0),
            Some(&track),
            &TimelineConfig::default(),
        )
        .unwrap();
        assert!(t.music_loops);
        for b in t.boundaries() {
            assert!(t.beats.iter().any(|x| (x - b).abs() < 1e-9));
        }
    }

    #[test]
    fn mismatched_plan_rejected() {
        let err = assemble_timeline(
            &plan(&[1, 1]),
            &[image(1), image(2)],
            &grid(0.5, 30.0),
            None,
            &TimelineConfig::default(),
        );
        assert!(matches!(err, Err(Error::Timeline(_))));
    }

    #[test]
    fn edl_round_trip_through_json() {
        let tmp = tempfile::tempdir().unwrap();
        let t = assemble_timeline(
            &plan(&[1, 2]),
            &[image(1), video(2, 5.0)],
            &grid(0.5, 30.0),
            None,
            &TimelineConfig::default(),
        )
        .unwrap();
        t.save(tmp.path()).unwrap();
        assert_eq!(Timeline::load(&tmp.path().join("timeline.json")).unwrap(), t);
        let edl = std::fs::read_to_string(tmp.path().join("timeline.edl")).unwrap();
        assert_eq!(edl.lines().count(), 5);
    }
}
