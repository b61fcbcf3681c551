//! Director prompt assembly: task description + input descriptions + detailed requirements.

use crate::assets::{AssetKind, UserRequirements};

use super::AssetDescription;

const TASK_OPENING: &str = "I have a collection of photos and videos, but their order is chaotic.";
const TASK_ARRANGE: &str = "I hope you can help me arrange these materials in a certain order to create a video";
const TASK_THEME: &str = " centered around the theme {theme}";
const TASK_SCRIPT: &str = "Additionally, I'd like you to provide a smoothly written script that connects these images and videos into a cohesive story.";
const TASK_LOCATION: &str = "The photos and videos were taken at {location}.";
const TASK_TIME: &str = "They were captured at {time}.";
const TASK_CLOSING: &str =
    "I will provide descriptions for each image or video to give you an understanding of their content.";

const REQ_HEADER: &str = "I need you to do two things:";
const REQ_REARRANGE: &str = "(1) Rearrange the materials, grouping similar images together. If there's a clear timeline, arrange them in chronological order, otherwise, organize them based on your logical sequence.";
const REQ_SCRIPT: &str = "(2) Write a script according to the adjusted material sequence.";
const REQ_USER: &str = " I hope your script meets the following requirements: {requirement}.";
const REQ_STYLE: &str = " It should be concise, fluent, vivid, and the transitions between different materials should be natural. Each caption for the materials should not exceed 20 words.";
const REQ_TAIL: &str = "Also, please recommend a piece of instrumental music that suits this video.
Finally, you should first rearrange the materials and then write corresponding captions based on the rearranged sequence. Below is an example output format:
Order: (A sequence of Arabic numbers separated by commas, indicating the adjusted order of materials in your script)
Title: A title for the beginning of the video, not exceeding 5 words
Materials: Content of the materials rearranged in order
Captions: A specific Arabic number (indicating the corresponding section of the material): The specific content of the caption
Closing: A closing statement at the end of the video, not exceeding 8 words
Music Recommendation: (Only provide the name of the music, no other words)";

/// Single-pass slot fill; substituted text is never rescanned.
fn fill(template: &str, slot: &str, value: &str) -> String {
    template.replacen(slot, value.trim(), 1)
}

pub fn task_description(reqs: &UserRequirements) -> String {
    let mut arrange = TASK_ARRANGE.to_string();
    if !reqs.theme.trim().is_empty() {
        arrange.push_str(&fill(TASK_THEME, "{theme}", &reqs.theme));
    }
    arrange.push('.');

    let mut lines = vec![format!("{TASK_OPENING} {arrange} {TASK_SCRIPT}")];
    if !reqs.location.trim().is_empty() {
        lines.push(fill(TASK_LOCATION, "{location}", &reqs.location));
    }
    if !reqs.time.trim().is_empty() {
        lines.push(fill(TASK_TIME, "{time}", &reqs.time));
    }
    lines.push(TASK_CLOSING.to_string());
    lines.join("\n")
}

/// One line per asset: `Image k: ...` or `Video k: key frame 1: ...; key frame 2: ...`.
pub fn input_descriptions(descriptions: &[AssetDescription]) -> String {
    let mut sorted: Vec<&AssetDescription> = descriptions.iter().collect();
    sorted.sort_by_key(|d| d.asset_id);
    sorted
        .iter()
        .map(|d| match d.kind {
            AssetKind::Image => format!("Image {}: {}", d.asset_id, d.lines.join(" ")),
            AssetKind::Video => {
                let frames: Vec<String> = d
                    .lines
                    .iter()
                    .enumerate()
                    .map(|(j, line)| format!("key frame {}: {}", j + 1, line))
                    .collect();
                format!("Video {}: {}", d.asset_id, frames.join("; "))
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn detailed_requirements(reqs: &UserRequirements) -> String {
    let mut script = REQ_SCRIPT.to_string();
    if !reqs.requirement.trim().is_empty() {
        script.push_str(&fill(REQ_USER, "{requirement}", &reqs.requirement));
    }
    script.push_str(REQ_STYLE);
    [REQ_HEADER, REQ_REARRANGE, &script, REQ_TAIL].join("\n")
}

/// Full director prompt. Empty `theme`, `location`, `time` or `requirement`
/// slots drop the sentence or clause that would carry them.
pub fn build_prompt(reqs: &UserRequirements, descriptions: &[AssetDescription]) -> String {
    format!(
        "{}\n\n{}\n\n{}\n",
        task_description(reqs),
        input_descriptions(descriptions),
        detailed_requirements(reqs)
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desc(id: u32, kind: AssetKind, lines: &[&str]) -> AssetDescription {
        AssetDescription {
            asset_id: id,
            kind,
            lines: lines.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn theme_only_omits_location_and_time() {
        let reqs = UserRequirements {
            theme: "trip".into(),
            ..Default::default()
        };
        let p = build_prompt(&reqs, &[desc(1, AssetKind::Image, &["a lake"])]);
        assert!(p.contains("centered around the theme trip."));
        assert!(!p.contains("taken at"));
        assert!(!p.contains("captured at"));
        assert!(!p.contains("{"));
    }

    #[test]
    fn empty_slots_keep_requirement_block() {
        let p = build_prompt(&UserRequirements::default(), &[desc(1, AssetKind::Image, &["x"])]);
        assert!(p.contains("to create a video. Additionally"));
        assert!(p.contains("I need you to do two things:\n(1) Rearrange the materials"));
        assert!(p.contains("(2) Write a script according to the adjusted material sequence. It should be concise"));
        assert!(!p.contains("following requirements"));
    }

    #[test]
    fn input_block_has_one_line_per_asset_in_id_order() {
        let block = input_descriptions(&[
            desc(3, AssetKind::Video, &["a river"]),
            desc(1, AssetKind::Image, &["a lake"]),
            desc(2, AssetKind::Image, &["a stream"]),
        ]);
        assert_eq!(
            block,
            "Image 1: a lake\nImage 2: a stream\nVideo 3: key frame 1: a river"
        );
    }

    #[test]
    fn multi_keyframe_video_stays_on_one_line() {
        let block = input_descriptions(&[desc(4, AssetKind::Video, &["red", "blue"])]);
        assert_eq!(block, "Video 4: key frame 1: red; key frame 2: blue");
    }

    #[test]
    fn slot_values_are_not_rescanned() {
        let reqs = UserRequirements {
            theme: "{location}".into(),
            location: "Paris".into(),
            ..Default::default()
        };
        let p = task_description(&reqs);
        assert!(p.contains("the theme {location}."));
        assert!(p.contains("taken at Paris."));
    }
}
