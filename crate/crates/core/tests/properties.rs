//! Property tests for the module invariants.

mod common;

use std::collections::{BTreeMap, HashSet};

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use storycut::assets::{AssetKind, FrameStore, MediaAsset, UserRequirements};
use storycut::eval::{parse_judge_response, tokenize, ttr, JudgeScores, JUDGE_ASPECTS};
use storycut::frame::solid;
use storycut::keyframe::{segment_hashes, similarity, PerceptualHash};
use storycut::music::{detect_beats, retrieve_music, BeatGrid, MatchTier, MusicLibrary, MusicTrack};
use storycut::narration::{build_prompt, AssetDescription, DirectorPlan};
use storycut::render::{compose_frame, gaussian_blur};
use storycut::timeline::{assemble_timeline, TimelineConfig, Transition};

fn word() -> impl Strategy<Value = String> {
    "[a-zA-Z]{1,8}"
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn similarity_is_symmetric_and_bounded(a in any::<u64>(), b in any::<u64>()) {
        let s = similarity(PerceptualHash(a), PerceptualHash(b));
        prop_assert_eq!(s, similarity(PerceptualHash(b), PerceptualHash(a)));
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert_eq!(similarity(PerceptualHash(a), PerceptualHash(a)), 1.0);
    }

    #[test]
    fn segmentation_is_a_partition(
        hashes in prop::collection::vec(any::<u64>(), 1..60),
        stride in 1usize..6,
        extra in 0usize..6,
        threshold in 0.05f64..1.0,
    ) {
        let samples: Vec<(usize, PerceptualHash)> =
            hashes.iter().enumerate().map(|(i, &h)| (i * stride, PerceptualHash(h))).collect();
        let total = (hashes.len() - 1) * stride + 1 + extra;
        let segs = segment_hashes(&samples, total, threshold).unwrap();
        prop_assert_eq!(segs[0].start_frame, 0);
        prop_assert_eq!(segs.last().unwrap().end_frame, total - 1);
        for w in segs.windows(2) {
            prop_assert_eq!(w[0].end_frame + 1, w[1].start_frame);
        }
        for s in &segs {
            prop_assert!(s.start_frame <= s.keyframe_index && s.keyframe_index <= s.end_frame);
            prop_assert!(s.keyframe_index % stride == 0);
        }
    }

    #[test]
    fn ttr_is_a_ratio_invariant_to_order_and_case(words in prop::collection::vec(word(), 1..40), seed in any::<u64>()) {
        let text = words.join(" ");
        let v = ttr(&[&text]).unwrap();
        prop_assert!(v > 0.0 && v <= 1.0);
        let distinct: HashSet<String> = words.iter().map(|w| w.to_lowercase()).collect();
        prop_assert_eq!(v == 1.0, distinct.len() == words.len());

        let mut shuffled = words.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let upper: Vec<String> = shuffled.iter().map(|w| w.to_uppercase()).collect();
        prop_assert_eq!(ttr(&[upper.join(" ")]).unwrap(), v);
        prop_assert_eq!(tokenize(&text).len(), words.len());
    }

    #[test]
    fn judge_scores_round_trip(
        scores in prop::array::uniform5(1u8..=5),
        reasons in prop::collection::vec("[a-z ,.'\"]{0,30}", 5),
    ) {
        let reasons: BTreeMap<String, String> = JUDGE_ASPECTS
            .iter()
            .zip(&reasons)
            .filter(|(_, r)| !r.is_empty())
            .map(|((_, name), r)| (name.to_string(), r.clone()))
            .collect();
        let original = JudgeScores::new(scores, reasons).unwrap();
        let parsed = parse_judge_response(&original.to_response_json()).unwrap();
        prop_assert_eq!(parsed, original);
    }

    #[test]
    fn distinct_descriptions_give_distinct_prompts(a in "[a-z]{1,6}( [a-z]{1,6}){0,5}", b in "[a-z]{1,6}( [a-z]{1,6}){0,5}") {
        prop_assume!(a != b);
        let reqs = UserRequirements { theme: "travel".into(), ..UserRequirements::default() };
        let d = |text: &str| vec![AssetDescription { asset_id: 1, kind: AssetKind::Image, lines: vec![text.to_string()] }];
        prop_assert_ne!(build_prompt(&reqs, &d(&a)), build_prompt(&reqs, &d(&b)));
    }

    #[test]
    fn seed_changes_only_transitions(n in 2u32..8, seed_a in any::<u64>(), seed_b in any::<u64>(), spacing in 0.35f64..1.1) {
        let assets: Vec<MediaAsset> = (1..=n)
            .map(|id| MediaAsset {
                id,
                kind: AssetKind::Image,
                source_path: format!("{id}.png").into(),
                width: 800,
                height: 600,
                duration: None,
                frame_rate: None,
            })
            .collect();
        let plan = DirectorPlan { order: (1..=n).rev().collect(), title: "T".into(), closing: "C".into(), ..Default::default() };
        let grid = BeatGrid::fixed(spacing, 200.0);
        let build = |seed| assemble_timeline(&plan, &assets, &grid, None, &TimelineConfig { seed, ..TimelineConfig::default() }).unwrap();
        let (a, a2, b) = (build(seed_a), build(seed_a), build(seed_b));
        prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&a2).unwrap());
        prop_assert_eq!(a.boundaries(), b.boundaries());
        prop_assert_eq!(a.opening.transition_in, Transition::Cut);
        let strip = |t: &storycut::timeline::Timeline| {
            let mut t = t.clone();
            for s in &mut t.segments { s.transition_in = Transition::Cut; }
            t.closing.transition_in = Transition::Cut;
            serde_json::to_string(&t).unwrap()
        };
        prop_assert_eq!(strip(&a), strip(&b));
    }

    #[test]
    fn blur_keeps_uniform_interiors(level in 0u8..=255, sigma in 0.5f64..6.0) {
        let frame = solid(48, 40, [level, level / 2, 255 - level]);
        let blurred = gaussian_blur(&frame, sigma);
        for (a, b) in frame.pixels().zip(blurred.pixels()) {
            for c in 0..3 {
                prop_assert!((a[c] as i32 - b[c] as i32).abs() <= 1);
            }
        }
    }
}

#[test]
fn retrieval_tiers_are_ordered() {
    assert!(MatchTier::Exact < MatchTier::Containment && MatchTier::Containment < MatchTier::EditDistance);
    let mut lib = MusicLibrary::default();
    for title in ["Morning Light", "Morning Light Extended", "Evening Rain"] {
        lib.insert(MusicTrack {
            title: title.into(),
            path: format!("{title}.wav").into(),
            duration: 60.0,
            sample_rate: 44_100,
            channels: 2,
        });
    }
    assert_eq!(retrieve_music("morning light", &lib).unwrap().tier, MatchTier::Exact);
    let m = retrieve_music("Light Extended", &lib).unwrap();
    assert_eq!((m.tier, m.track.title.as_str()), (MatchTier::Containment, "Morning Light Extended"));
    assert_eq!(retrieve_music("Evenin Rian", &lib).unwrap().tier, MatchTier::EditDistance);
}

#[test]
fn beat_grid_is_increasing_in_span_and_deterministic() {
    let times = common::click_times(96.0, 20.0);
    let samples = common::clicks(&times, common::CLICK_RATE, 20.0);
    let (a, _) = detect_beats(&samples, common::CLICK_RATE).unwrap();
    let (b, _) = detect_beats(&samples, common::CLICK_RATE).unwrap();
    assert_eq!(a, b);
    assert!(a.beats.windows(2).all(|w| w[0] < w[1]));
    assert!(a.beats.iter().all(|&t| (0.0..=20.0).contains(&t)));
    assert!((a.tempo - 96.0).abs() <= 2.0, "tempo {}", a.tempo);
}

#[test]
fn compose_frame_is_order_independent() {
    let assets: Vec<MediaAsset> = (1..=2)
        .map(|id| MediaAsset {
            id,
            kind: AssetKind::Image,
            source_path: format!("{id}.png").into(),
            width: 64,
            height: if id == 1 { 36 } else { 64 },
            duration: None,
            frame_rate: None,
        })
        .collect();
    let mut store = FrameStore::default();
    store.insert(1, vec![solid(64, 36, [200, 40, 40])]);
    store.insert(2, vec![solid(64, 64, [40, 200, 40])]);
    let plan = DirectorPlan {
        order: vec![2, 1],
        title: "Title".into(),
        captions: [(1, "one".to_string()), (2, "two".to_string())].into(),
        closing: "End".into(),
        ..Default::default()
    };
    let cfg = TimelineConfig {
        width: 160,
        height: 90,
        ..TimelineConfig::default()
    };
    let t = assemble_timeline(&plan, &assets, &BeatGrid::fixed(0.5, 40.0), None, &cfg).unwrap();
    let times: Vec<f64> = (0..t.total_duration as usize * 4).map(|k| k as f64 * 0.25).collect();
    let forward: Vec<_> = times.iter().map(|&s| compose_frame(&t, s, &store).unwrap()).collect();
    let backward: Vec<_> = times.iter().rev().map(|&s| compose_frame(&t, s, &store).unwrap()).collect();
    for (f, b) in forward.iter().zip(backward.iter().rev()) {
        assert_eq!(f, b);
        assert_eq!(f.dimensions(), (160, 90));
    }
}
