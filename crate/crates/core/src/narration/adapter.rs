//! Model adapters.
//!
//! Every adapter speaks the same wire protocol: one JSON object per request
//! and one per response, either as an HTTP POST body or as a single line on a
//! child process's stdin/stdout. Responses carry `text` (or `frame` for style
//! adapters) and an optional `error`.

use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;
use std::time::Duration;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine as _;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::frame::{luma601, Frame};

/// Question put to the captioner for every image and keyframe.
pub const CAPTION_QUESTION: &str = "What is the image about";

pub struct CaptionRequest<'a> {
    pub asset_id: u32,
    /// 1-based keyframe number for videos.
    pub keyframe: Option<usize>,
    pub question: &'a str,
    pub frame: &'a Frame,
}

pub trait Captioner: Send + Sync {
    fn caption(&self, request: &CaptionRequest<'_>) -> Result<String>;
}

pub trait ChatModel: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String>;
}

pub enum Transport {
    Http {
        url: String,
        api_key: Option<String>,
        timeout: Duration,
    },
    Process(Mutex<ProcessChannel>),
}

pub struct ProcessChannel {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

impl Drop for ProcessChannel {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Transport {
    pub fn http(url: impl Into<String>, api_key: Option<String>) -> Self {
        Transport::Http {
            url: url.into(),
            api_key,
            timeout: Duration::from_secs(120),
        }
    }

    /// Spawns `command` through the shell and keeps it alive for all requests.
    pub fn spawn(command: &str) -> Result<Self> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Adapter(format!("cannot start `{command}`: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(Transport::Process(Mutex::new(ProcessChannel {
            child,
            stdin,
            stdout,
        })))
    }

    /// Resolves `<PREFIX>_URL` or `<PREFIX>_CMD` from the environment.
    pub fn from_env(prefix: &str) -> Result<Option<Self>> {
        if let Ok(url) = std::env::var(format!("{prefix}_URL")) {
            let key = std::env::var("STORYCUT_API_KEY").ok();
            return Ok(Some(Transport::http(url, key)));
        }
        if let Ok(cmd) = std::env::var(format!("{prefix}_CMD")) {
            return Transport::spawn(&cmd).map(Some);
        }
        Ok(None)
    }

    pub fn exchange(&self, request: &Value) -> Result<Value> {
        let response = match self {
            Transport::Http {
                url,
                api_key,
                timeout,
            } => {
                let mut req = ureq::post(url).timeout(*timeout);
                if let Some(key) = api_key {
                    req = req.set("Authorization", &format!("Bearer {key}"));
                }
                match req.send_json(request.clone()) {
                    Ok(resp) => resp
                        .into_json::<Value>()
                        .map_err(|e| Error::Adapter(format!("bad response body: {e}")))?,
                    Err(ureq::Error::Status(status, resp)) => {
                        let body = resp.into_string().unwrap_or_default();
                        return Err(Error::AdapterStatus { status, body });
                    }
                    Err(e) => return Err(Error::Adapter(format!("{url}: {e}"))),
                }
            }
            Transport::Process(channel) => {
                let mut ch = channel.lock().unwrap_or_else(|p| p.into_inner());
                let line = serde_json::to_string(request)?;
                writeln!(ch.stdin, "{line}")
                    .and_then(|_| ch.stdin.flush())
                    .map_err(|e| Error::Adapter(format!("adapter stdin: {e}")))?;
                let mut reply = String::new();
                let n = ch
                    .stdout
                    .read_line(&mut reply)
                    .map_err(|e| Error::Adapter(format!("adapter stdout: {e}")))?;
                if n == 0 {
                    return Err(Error::Adapter("adapter process closed its output".into()));
                }
                serde_json::from_str(&reply)?
            }
        };
        if let Some(err) = response.get("error").and_then(Value::as_str) {
            if !err.is_empty() {
                return Err(Error::Adapter(err.to_string()));
            }
        }
        Ok(response)
    }

    fn exchange_text(&self, request: &Value) -> Result<String> {
        let response = self.exchange(request)?;
        response
            .get("text")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| Error::Adapter("response has no `text` field".into()))
    }
}

pub fn encode_png_base64(frame: &Frame) -> Result<String> {
    let mut bytes = Vec::new();
    frame
        .write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageFormat::Png)
        .map_err(|source| Error::Image {
            path: PathBuf::from("<memory>"),
            source,
        })?;
    Ok(BASE64.encode(bytes))
}

pub struct RemoteCaptioner(pub Transport);

impl Captioner for RemoteCaptioner {
    fn caption(&self, request: &CaptionRequest<'_>) -> Result<String> {
        self.0.exchange_text(&json!({
            "question": request.question,
            "image": encode_png_base64(request.frame)?,
        }))
    }
}

pub struct RemoteChat(pub Transport);

impl ChatModel for RemoteChat {
    fn complete(&self, prompt: &str) -> Result<String> {
        self.0.exchange_text(&json!({ "prompt": prompt }))
    }
}

impl RemoteChat {
    /// Sends a prompt with base64 PNG attachments.
    pub fn complete_with_images(&self, prompt: &str, images: &[String]) -> Result<String> {
        self.0.exchange_text(&json!({ "prompt": prompt, "images": images }))
    }
}

fn color_name(frame: &Frame) -> (&'static str, &'static str) {
    let n = (frame.width() as u64 * frame.height() as u64).max(1);
    let mut sum = [0u64; 3];
    for p in frame.pixels() {
        for c in 0..3 {
            sum[c] += p.0[c] as u64;
        }
    }
    let mean = sum.map(|s| (s / n) as u8);
    const PALETTE: &[(&str, [u8; 3])] = &[
        ("red", [200, 40, 40]),
        ("orange", [230, 130, 30]),
        ("yellow", [220, 210, 50]),
        ("green", [50, 170, 60]),
        ("teal", [40, 160, 160]),
        ("blue", [40, 70, 200]),
        ("purple", [130, 50, 170]),
        ("pink", [230, 130, 180]),
        ("white", [235, 235, 235]),
        ("gray", [128, 128, 128]),
        ("black", [20, 20, 20]),
        ("brown", [120, 80, 40]),
    ];
    let dist = |c: [u8; 3]| -> i32 { (0..3).map(|i| (c[i] as i32 - mean[i] as i32).pow(2)).sum() };
    let name = PALETTE
        .iter()
        .min_by_key(|(_, c)| dist(*c))
        .map(|(n, _)| *n)
        .unwrap_or("gray");
    let tone = if luma601(mean[0], mean[1], mean[2]) > 110.0 { "bright" } else { "dim" };
    (name, tone)
}

/// Deterministic captioner that fills a template from the frame.
///
/// Slots: `{id}`, `{keyframe}`, `{color}` (nearest named mean color) and
/// `{tone}` (bright or dim).
pub struct TemplateCaptioner {
    pub template: String,
    /// Asset ids for which the captioner reports a failure.
    pub fail_on: Vec<u32>,
}

impl Default for TemplateCaptioner {
    fn default() -> Self {
        TemplateCaptioner {
            template: "a {tone} {color} scene in material {id}".into(),
            fail_on: Vec::new(),
        }
    }
}

impl Captioner for TemplateCaptioner {
    fn caption(&self, request: &CaptionRequest<'_>) -> Result<String> {
        if self.fail_on.contains(&request.asset_id) {
            return Err(Error::Adapter(format!("mock failure for asset {}", request.asset_id)));
        }
        let (color, tone) = color_name(request.frame);
        Ok(self
            .template
            .replace("{id}", &request.asset_id.to_string())
            .replace("{keyframe}", &request.keyframe.unwrap_or(1).to_string())
            .replace("{color}", color)
            .replace("{tone}", tone))
    }
}

/// Chat stand-in: either replays a fixture or writes a plan from the prompt's
/// input descriptions.
pub enum MockChat {
    Fixture(String),
    Synthesize { music_name: String },
}

impl MockChat {
    pub fn from_fixture(path: &Path) -> Result<Self> {
        std::fs::read_to_string(path)
            .map(MockChat::Fixture)
            .map_err(|e| Error::io(path, e))
    }
}

const LINKS: &[&str] = &[
    "We begin with {d}.",
    "Next, {d} catches our eye.",
    "Then {d} unfolds before us.",
    "Soon after, {d} comes into view.",
    "Along the way, {d} lingers.",
    "Later, {d} fills the frame.",
];

fn synthesize_plan(prompt: &str, music_name: &str) -> String {
    let mut items: Vec<(u32, String)> = prompt
        .lines()
        .filter_map(|line| {
            let rest = line
                .strip_prefix("Image ")
                .or_else(|| line.strip_prefix("Video "))?;
            let (id, desc) = rest.split_once(": ")?;
            let id: u32 = id.trim().parse().ok()?;
            let desc = desc
                .split("; ")
                .next()
                .unwrap_or(desc)
                .trim_start_matches("key frame 1: ")
                .to_string();
            Some((id, desc))
        })
        .collect();
    // Group similar descriptions, keep id order within a group.
    items.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)));

    let theme = prompt
        .split("centered around the theme ")
        .nth(1)
        .and_then(|s| s.split('.').next())
        .map(str::trim)
        .filter(|t| !t.is_empty() && t.split_whitespace().count() <= 3);
    let title = match theme {
        Some(t) => format!("Our {t} Story"),
        None => "Our Story".to_string(),
    };

    let mut out = format!(
        "Order: {}\nTitle: {}\nCaptions:\n",
        items.iter().map(|(id, _)| id.to_string()).collect::<Vec<_>>().join(", "),
        title
    );
    for (i, (id, desc)) in items.iter().enumerate() {
        let line = if i + 1 == items.len() && items.len() > 1 {
            format!("Finally, {desc} ends the day.")
        } else {
            LINKS[i % LINKS.len()].replace("{d}", desc)
        };
        out.push_str(&format!("{id}: {line}\n"));
    }
    out.push_str(&format!(
        "Closing: Thanks for sharing this journey\nMusic Recommendation: {music_name}\n"
    ));
    out
}

impl ChatModel for MockChat {
    fn complete(&self, prompt: &str) -> Result<String> {
        match self {
            MockChat::Fixture(text) => Ok(text.clone()),
            MockChat::Synthesize { music_name } => Ok(synthesize_plan(prompt, music_name)),
        }
    }
}
