#![allow(dead_code)]

use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use storycut::audio::{write_wav16, Pcm};

pub const CLICK_RATE: u32 = 22_050;

/// Frame `k` of scene `scene`: a per-scene random 8x8 grid of colors,
/// bilinearly interpolated, with a slow drift and light noise so consecutive
/// frames are never identical.
pub fn scene_frame(scene: usize, k: usize, width: u32, height: u32, rng: &mut ChaCha8Rng) -> RgbImage {
    const CELLS: usize = 8;
    let mut layout = ChaCha8Rng::seed_from_u64(1000 + scene as u64);
    let grid: Vec<[f32; 3]> = (0..(CELLS + 1) * (CELLS + 1))
        .map(|_| [0, 1, 2].map(|_| layout.random_range(20.0..235.0)))
        .collect();
    let drift = k as f32 * 0.005;
    RgbImage::from_fn(width, height, |x, y| {
        let u = ((x as f32 + 0.5) / width as f32 * CELLS as f32 + drift).min(CELLS as f32 - 1e-3);
        let v = (y as f32 + 0.5) / height as f32 * CELLS as f32;
        let (i, j) = (u as usize, v as usize);
        let (a, b) = (u - i as f32, v - j as f32);
        let at = |i: usize, j: usize| grid[j * (CELLS + 1) + i];
        let n: f32 = rng.random_range(-4.0..4.0);
        let px: [f32; 3] = std::array::from_fn(|c| {
            let top = at(i, j)[c] * (1.0 - a) + at(i + 1, j)[c] * a;
            let bottom = at(i, j + 1)[c] * (1.0 - a) + at(i + 1, j + 1)[c] * a;
            top * (1.0 - b) + bottom * b + n
        });
        Rgb(px.map(|p| p.clamp(0.0, 255.0) as u8))
    })
}

/// Writes a frame-directory video with scenes of the given lengths. Returns
/// the first frame index of each scene.
pub fn write_scene_video(dir: &Path, scene_lengths: &[usize], fps: f64, width: u32, height: u32) -> Vec<usize> {
    std::fs::create_dir_all(dir).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut starts = Vec::new();
    let mut index = 0;
    for (scene, &len) in scene_lengths.iter().enumerate() {
        starts.push(index);
        for k in 0..len {
            let frame = scene_frame(scene, k, width, height, &mut rng);
            frame.save(dir.join(format!("frame_{index:06}.png"))).unwrap();
            index += 1;
        }
    }
    std::fs::write(dir.join("meta"), format!("fps = {fps}\nframes = {index}\n")).unwrap();
    starts
}

/// Decaying 1 kHz clicks at `times`.
pub fn clicks(times: &[f64], sample_rate: u32, seconds: f64) -> Vec<f32> {
    let mut out = vec![0.0f32; (seconds * sample_rate as f64) as usize];
    for &t in times {
        let start = (t * sample_rate as f64).round() as usize;
        for i in 0..(0.02 * sample_rate as f64) as usize {
            if let Some(s) = out.get_mut(start + i) {
                let tt = i as f64 / sample_rate as f64;
                *s += (0.8 * (-tt * 200.0).exp() * (2.0 * std::f64::consts::PI * 1000.0 * tt).sin()) as f32;
            }
        }
    }
    out
}

pub fn click_times(bpm: f64, seconds: f64) -> Vec<f64> {
    let period = 60.0 / bpm;
    (0..).map(|k| k as f64 * period).take_while(|&t| t < seconds).collect()
}

pub fn write_click_track(path: &Path, bpm: f64, seconds: f64) {
    let pcm = Pcm {
        samples: clicks(&click_times(bpm, seconds), CLICK_RATE, seconds),
        sample_rate: CLICK_RATE,
        channels: 1,
    };
    write_wav16(path, &pcm).unwrap();
}

fn write_image(path: &Path, width: u32, height: u32, tint: [u8; 3]) {
    RgbImage::from_fn(width, height, |x, y| {
        let fx = x as f32 / width as f32;
        let fy = y as f32 / height as f32;
        Rgb([
            (tint[0] as f32 * (0.5 + 0.5 * fx)) as u8,
            (tint[1] as f32 * (0.5 + 0.5 * fy)) as u8,
            (tint[2] as f32 * (1.0 - 0.4 * fx * fy)) as u8,
        ])
    })
    .save(path)
    .unwrap();
}

/// End-to-end project: three images of different shapes, one two-scene
/// video and a music library holding a 120 BPM click track.
pub fn write_project(root: &Path, fps: f64) -> PathBuf {
    let media = root.join("media");
    std::fs::create_dir_all(&media).unwrap();
    write_image(&media.join("lake.png"), 320, 180, [90, 160, 230]);
    write_image(&media.join("tower.png"), 120, 200, [200, 120, 80]);
    write_image(&media.join("ridge.png"), 400, 100, [120, 200, 110]);
    write_scene_video(&media.join("walk"), &[40, 40], 25.0, 320, 180);

    let music = root.join("music");
    std::fs::create_dir_all(&music).unwrap();
    write_click_track(&music.join("Click Track.wav"), 120.0, 30.0);

    let manifest = root.join("project.manifest");
    std::fs::write(
        &manifest,
        format!(
            "[requirements]\ntheme = a weekend hike\nlocation = the lakeside\nfps = {fps}\nseed = 7\n\n\
             [assets]\nmedia/lake.png\nmedia/tower.png\nmedia/walk\nmedia/ridge.png\n"
        ),
    )
    .unwrap();
    manifest
}

/// Every file under `dir` with its bytes, sorted by relative path.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}
