//! Parsing and repair of the director's structured response.

use std::collections::{BTreeMap, HashSet};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TITLE_WORD_LIMIT: usize = 5;
pub const CLOSING_WORD_LIMIT: usize = 8;
pub const CAPTION_WORD_LIMIT: usize = 20;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DirectorPlan {
    /// Arrangement of asset ids; a permutation of the expected ids after parsing.
    pub order: Vec<u32>,
    pub title: String,
    pub captions: BTreeMap<u32, String>,
    pub closing: String,
    pub music_name: String,
    /// Repair notes produced while parsing.
    pub warnings: Vec<String>,
}

impl DirectorPlan {
    pub fn caption(&self, id: u32) -> &str {
        self.captions.get(&id).map(String::as_str).unwrap_or("")
    }

    /// Writes the plan in the response layout the director prompt asks for.
    pub fn to_response_text(&self) -> String {
        let order: Vec<String> = self.order.iter().map(u32::to_string).collect();
        let materials: Vec<String> = self.order.iter().map(|id| format!("material {id}")).collect();
        let mut out = format!(
            "Order: {}\nTitle: {}\nMaterials: {}\nCaptions:\n",
            order.join(", "),
            self.title,
            materials.join(", ")
        );
        for id in &self.order {
            out.push_str(&format!("{}: {}\n", id, self.caption(*id)));
        }
        out.push_str(&format!(
            "Closing: {}\nMusic Recommendation: {}\n",
            self.closing, self.music_name
        ));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Order,
    Title,
    Materials,
    Captions,
    Closing,
    Music,
}

static HEADER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)^\s*(?:#{1,6}\s*)?(?:[-*+>]\s*)?(?:\(?\d{1,2}[.)]\s*)?(?:\*\*|__)?\s*(order|title|materials?|captions?|closing|music\s+recommendations?|music)\s*(?:\*\*|__)?\s*[:：]\s*(?:\*\*|__)?\s*(.*)$",
    )
    .unwrap()
});

static CAPTION_ENTRY: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)^\s*(?:[-*+]\s*)?(?:\*\*|__)?\s*(?:(?:image|video|material|section|caption)\s*)?(?:\(\s*(\d+)\s*\)\s*[:.\-–—]?|(\d+)\s*(?:\*\*|__)?\s*[:.)\-–—])\s*(?:\*\*|__)?\s*(.*)$",
    )
    .unwrap()
});

static INTEGER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\d+").unwrap());

fn classify(keyword: &str) -> Section {
    let k = keyword.to_ascii_lowercase();
    if k.starts_with("order") {
        Section::Order
    } else if k.starts_with("title") {
        Section::Title
    } else if k.starts_with("material") {
        Section::Materials
    } else if k.starts_with("caption") {
        Section::Captions
    } else if k.starts_with("closing") {
        Section::Closing
    } else {
        Section::Music
    }
}

const WRAPPING: &[char] = &[
    '"', '\'', '“', '”', '‘', '’', '«', '»', '《', '》', '「', '」', '*', '_', '`',
];

fn clean_text(s: &str) -> String {
    s.trim().trim_matches(WRAPPING).trim().to_string()
}

fn clean_music(s: &str) -> String {
    let punct: &[char] = &['.', ',', ';', ':', '!', '?', '-', '–', '—'];
    s.trim()
        .trim_matches(|c: char| c.is_whitespace() || WRAPPING.contains(&c) || punct.contains(&c))
        .to_string()
}

fn word_count(s: &str) -> usize {
    s.split_whitespace().count()
}

/// Parses a director response against the asset ids it must cover.
///
/// Section labels are matched case-insensitively and may carry markdown
/// bullets, numbering or bold markers. The order is repaired into a true
/// permutation of `expected_ids`: out-of-range and duplicate entries are
/// dropped and missing ids are appended in `expected_ids` order.
pub fn parse_plan(response: &str, expected_ids: &[u32]) -> Result<DirectorPlan> {
    if expected_ids.is_empty() {
        return Err(Error::InvalidArgument("expected_ids must be non-empty".into()));
    }
    let mut sections: Vec<(Section, Vec<String>)> = Vec::new();
    for line in response.lines() {
        if line.trim_start().starts_with("```") {
            continue;
        }
        if let Some(caps) = HEADER.captures(line) {
            let section = classify(&caps[1]);
            let rest = caps[2].trim();
            let body = if rest.is_empty() { Vec::new() } else { vec![rest.to_string()] };
            sections.push((section, body));
        } else if let Some((_, body)) = sections.last_mut() {
            if !line.trim().is_empty() {
                body.push(line.trim().to_string());
            }
        }
    }
    let first = |s: Section| sections.iter().find(|(k, _)| *k == s).map(|(_, b)| b);

    let order_lines = first(Section::Order).ok_or(Error::PlanMissingOrder)?;
    let caption_lines = first(Section::Captions).ok_or(Error::PlanMissingCaptions)?;

    let mut warnings = Vec::new();
    let order = repair_order(order_lines, expected_ids, &mut warnings);
    let captions = collect_captions(caption_lines, expected_ids, &mut warnings);

    let single = |s: Section, label: &str, warnings: &mut Vec<String>| match first(s) {
        Some(lines) if !lines.is_empty() => lines.join(" "),
        _ => {
            warnings.push(format!("plan: missing {label}"));
            String::new()
        }
    };
    let title = clean_text(&single(Section::Title, "title", &mut warnings));
    let closing = clean_text(&single(Section::Closing, "closing", &mut warnings));
    let music_name = clean_music(&single(Section::Music, "music recommendation", &mut warnings));

    if word_count(&title) > TITLE_WORD_LIMIT {
        warnings.push(format!("plan: title exceeds {TITLE_WORD_LIMIT} words"));
    }
    if word_count(&closing) > CLOSING_WORD_LIMIT {
        warnings.push(format!("plan: closing exceeds {CLOSING_WORD_LIMIT} words"));
    }
    for (id, text) in &captions {
        if word_count(text) > CAPTION_WORD_LIMIT {
            warnings.push(format!("plan: caption {id} exceeds {CAPTION_WORD_LIMIT} words"));
        }
    }

    Ok(DirectorPlan {
        order,
        title,
        captions,
        closing,
        music_name,
        warnings,
    })
}

fn repair_order(lines: &[String], expected_ids: &[u32], warnings: &mut Vec<String>) -> Vec<u32> {
    let allowed: HashSet<u32> = expected_ids.iter().copied().collect();
    let mut seen = HashSet::new();
    let mut order = Vec::new();
    let mut dropped = Vec::new();
    for m in lines.iter().flat_map(|l| INTEGER.find_iter(l)) {
        match m.as_str().parse::<u32>() {
            Ok(id) if allowed.contains(&id) && seen.insert(id) => order.push(id),
            Ok(id) if allowed.contains(&id) => dropped.push(format!("{id} (duplicate)")),
            _ => dropped.push(format!("{} (out of range)", m.as_str())),
        }
    }
    let appended: Vec<u32> = expected_ids
        .iter()
        .copied()
        .filter(|id| !seen.contains(id))
        .collect();
    order.extend(&appended);
    if !dropped.is_empty() || !appended.is_empty() {
        warnings.push(format!(
            "plan: order repaired; dropped [{}], appended {:?}",
            dropped.join(", "),
            appended
        ));
    }
    order
}

fn collect_captions(
    lines: &[String],
    expected_ids: &[u32],
    warnings: &mut Vec<String>,
) -> BTreeMap<u32, String> {
    let mut entries: Vec<(u32, String)> = Vec::new();
    for line in lines {
        match CAPTION_ENTRY.captures(line) {
            Some(caps) => {
                let digits = caps.get(1).or_else(|| caps.get(2)).map_or("", |m| m.as_str());
                let id = digits.parse::<u32>().unwrap_or(u32::MAX);
                entries.push((id, caps[3].trim().to_string()));
            }
            None => {
                if let Some((_, text)) = entries.last_mut() {
                    if !text.is_empty() {
                        text.push(' ');
                    }
                    text.push_str(line.trim());
                }
            }
        }
    }

    let allowed: HashSet<u32> = expected_ids.iter().copied().collect();
    let mut captions = BTreeMap::new();
    for (id, text) in entries {
        if !allowed.contains(&id) {
            warnings.push(format!("plan: caption for unknown asset {id} ignored"));
        } else if captions.contains_key(&id) {
            warnings.push(format!("plan: duplicate caption for asset {id} ignored"));
        } else {
            captions.insert(id, clean_text(&text));
        }
    }
    for &id in expected_ids {
        captions.entry(id).or_insert_with(|| {
            warnings.push(format!("plan: no caption for asset {id}"));
            String::new()
        });
    }
    captions
}
