//! Caption diversity (type-token ratio) and the LLM judge protocol.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::narration::DirectorPlan;

/// Lowercased alphanumeric runs.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Distinct tokens over total tokens across all `texts`.
pub fn ttr<S: AsRef<str>>(texts: &[S]) -> Result<f64> {
    let tokens: Vec<String> = texts.iter().flat_map(|t| tokenize(t.as_ref())).collect();
    if tokens.is_empty() {
        return Err(Error::EmptyText);
    }
    let distinct: HashSet<&str> = tokens.iter().map(String::as_str).collect();
    Ok(distinct.len() as f64 / tokens.len() as f64)
}

pub fn mean_ttr(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("no TTR values to average".into()));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Title, captions in story order, closing. With `captions_only` just the captions.
pub fn plan_texts(plan: &DirectorPlan, captions_only: bool) -> Vec<String> {
    let captions = plan.order.iter().map(|&id| plan.caption(id).to_string());
    if captions_only {
        return captions.collect();
    }
    std::iter::once(plan.title.clone())
        .chain(captions)
        .chain(std::iter::once(plan.closing.clone()))
        .collect()
}

const JUDGE_TEMPLATE: &str = r#"You are an impartial judge tasked with evaluating the quality of edited video based on textual and visual elements. Your assessment should consider the overall coherence, creativity, and effectiveness of the content.
You will rate the quality of the output on multiple aspects such as Consistency of text and video, Logicality, Vividness, and Overall.

Evaluate

Aspects

Consistency of text and video: Rate the Consistency of text and video on how well the text aligns with the visuals in the video clip, according to the consistency between what is described in the text and what is presented visually. A score of 5 indicates complete alignment, while a score of 1 suggests significant inconsistency.

Logicality: Evaluate the logical flow of the text, examining how it contributes to a cohesive and sensible storyline. A score of 5 indicates a text that is logically sound, while a score of 1 suggests a lack of coherence and logic.

Vividness: Rate the Vividness on how well the text brings the video to life and enhances the viewer's experience. A score of 5 indicates highly vivid text, while a score of 1 suggests a lack of vividness and engagement.

Overall: Rate the overall assessment on how effectively the text and visuals work together to create a compelling and coherent story. A score of 5 indicates good integration, while a score of 1 suggests poor integration.

Format
Please rate the quality of the edited video by scoring it from 1 to 5 individually on each aspect.
- 1: strongly disagree
- 2: disagree
- 3: neutral
- 4: agree
- 5: strongly agree

Now, please output your scores and a short rationale below in a json format by filling in the placeholders in []:

{
    "consistency of text and video": {
        "reason": "[your rationale]",
        "score": "[score from 1 to 5]"
    },
    "logicality": {
        "reason": "[your rationale]",
        "score": "[score from 1 to 5]"
    },
    "vividness": {
        "reason": "[your rationale]",
        "score": "[score from 1 to 5]"
    },
    "aesthetic": {
        "reason": "[your rationale]",
        "score": "[score from 1 to 5]"
    },
    "overall": {
        "reason": "[your rationale]",
        "score": "[score from 1 to 5]"
    }
}

Material

The following is provided for your evaluation: an edited video, encompassing both the script within the video and a series of video frames.

Text Script:
{text}

Video Frames:
Video Frames are shown below."#;

const TEXT_SLOT: &str = "{text}";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgePrompt {
    pub text: String,
    /// Frame references in attachment order.
    pub frames: Vec<String>,
    pub warnings: Vec<String>,
}

/// Fills the judge template with `script` and lists the attached frames.
/// The script is inserted in one pass, so braces inside it are kept literally.
pub fn build_judge_prompt<S: AsRef<str>>(script: &str, frames: &[S]) -> Result<JudgePrompt> {
    if script.trim().is_empty() {
        return Err(Error::EmptyText);
    }
    let (head, tail) = JUDGE_TEMPLATE.split_once(TEXT_SLOT).expect("template has a text slot");
    let mut text = format!("{head}{script}{tail}\n");
    let mut warnings = Vec::new();
    if frames.is_empty() {
        text.push_str("(no frames attached: 0 frames)\n");
        warnings.push("judge: no video frames attached".to_string());
    }
    for (i, f) in frames.iter().enumerate() {
        text.push_str(&format!("Frame {}: {}\n", i + 1, f.as_ref()));
    }
    Ok(JudgePrompt {
        text,
        frames: frames.iter().map(|f| f.as_ref().to_string()).collect(),
        warnings,
    })
}

/// Response keys in template order with their short names.
pub const JUDGE_ASPECTS: [(&str, &str); 5] = [
    ("consistency of text and video", "consistency"),
    ("logicality", "logicality"),
    ("vividness", "vividness"),
    ("aesthetic", "aesthetic"),
    ("overall", "overall"),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeScores {
    pub consistency: u8,
    pub logicality: u8,
    pub vividness: u8,
    pub aesthetic: u8,
    pub overall: u8,
    /// Short aspect name to rationale.
    pub reasons: BTreeMap<String, String>,
    /// Mean of consistency, logicality, vividness and overall.
    pub average: f64,
}

impl JudgeScores {
    pub fn new(scores: [u8; 5], reasons: BTreeMap<String, String>) -> Result<Self> {
        for ((_, name), s) in JUDGE_ASPECTS.iter().zip(scores) {
            if !(1..=5).contains(&s) {
                return Err(Error::Judge(format!("{name} out of range")));
            }
        }
        let [consistency, logicality, vividness, aesthetic, overall] = scores;
        Ok(JudgeScores {
            consistency,
            logicality,
            vividness,
            aesthetic,
            overall,
            reasons,
            average: (consistency + logicality + vividness + overall) as f64 / 4.0,
        })
    }

    pub fn scores(&self) -> [u8; 5] {
        [self.consistency, self.logicality, self.vividness, self.aesthetic, self.overall]
    }

    /// The response layout the judge is asked to produce.
    pub fn to_response_json(&self) -> String {
        let mut map = serde_json::Map::new();
        for ((key, name), score) in JUDGE_ASPECTS.iter().zip(self.scores()) {
            let reason = self.reasons.get(*name).cloned().unwrap_or_default();
            map.insert(key.to_string(), json!({"reason": reason, "score": score.to_string()}));
        }
        serde_json::to_string_pretty(&Value::Object(map)).expect("plain JSON")
    }
}

/// First JSON object in `text` that carries any judge aspect key.
fn find_object(text: &str) -> Option<serde_json::Map<String, Value>> {
    text.char_indices().filter(|&(_, c)| c == '{').find_map(|(i, _)| {
        let mut stream = serde_json::Deserializer::from_str(&text[i..]).into_iter::<Value>();
        match stream.next() {
            Some(Ok(Value::Object(map))) => {
                let has_aspect = map.keys().any(|k| {
                    let k = k.trim().to_lowercase();
                    JUDGE_ASPECTS.iter().any(|(key, name)| k == *key || k == *name)
                });
                has_aspect.then_some(map)
            }
            _ => None,
        }
    })
}

fn parse_score(value: &Value) -> Option<i64> {
    match value {
        Value::Number(n) => n.as_i64().or_else(|| n.as_f64().map(|f| f.round() as i64)),
        Value::String(s) => {
            let digits: String = s
                .chars()
                .skip_while(|c| !c.is_ascii_digit())
                .take_while(char::is_ascii_digit)
                .collect();
            digits.parse().ok()
        }
        _ => None,
    }
}

/// Reads the five aspect scores from a judge reply. Prose and code fences around
/// the JSON are ignored.
pub fn parse_judge_response(text: &str) -> Result<JudgeScores> {
    let map = find_object(text).ok_or_else(|| Error::Judge("no JSON object in response".into()))?;
    let lookup: BTreeMap<String, &Value> = map.iter().map(|(k, v)| (k.trim().to_lowercase(), v)).collect();
    let mut scores = [0u8; 5];
    let mut reasons = BTreeMap::new();
    for (slot, (key, name)) in scores.iter_mut().zip(JUDGE_ASPECTS) {
        let entry = lookup
            .get(key)
            .or_else(|| lookup.get(name))
            .ok_or_else(|| Error::Judge(format!("{name} missing")))?;
        let (score, reason) = match entry {
            Value::Object(o) => (o.get("score").and_then(parse_score), o.get("reason")),
            other => (parse_score(other), None),
        };
        let score = score.ok_or_else(|| Error::Judge(format!("{name} has no score")))?;
        if !(1..=5).contains(&score) {
            return Err(Error::Judge(format!("{name} out of range")));
        }
        *slot = score as u8;
        if let Some(r) = reason.and_then(Value::as_str).filter(|r| !r.is_empty()) {
            reasons.insert(name.to_string(), r.to_string());
        }
    }
    JudgeScores::new(scores, reasons)
}
