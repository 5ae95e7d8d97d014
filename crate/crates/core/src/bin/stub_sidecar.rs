//! Weight-free sidecar speaking the detector wire protocol over stdio.
//!
//! Replies come from a script file: a default reply for every image plus
//! optional replies keyed by the SHA-256 of the request's PNG bytes. Fault
//! injection flags exist for exercising the client.

use anyhow::{Context, Result};
use base64::Engine;
use clap::Parser;
use dpark::detector::protocol::{self, Request, Task};
use dpark::detector::{Detection, ObbDetection};
use serde::Deserialize;
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::PathBuf;
use std::time::Duration;

#[derive(Parser, Debug)]
#[command(name = "dpark-stub-sidecar", version, about = "Scripted sidecar for protocol testing")]
struct Args {
    /// JSON script: {"default": {"locate": [...], "orient": [...]}, "images": {"<sha256>": {...}}}
    #[arg(long)]
    script: Option<PathBuf>,
    /// Sleep before every reply.
    #[arg(long, default_value_t = 0)]
    delay_ms: u64,
    /// Reply with a record whose detections violate the schema.
    #[arg(long)]
    malformed: bool,
    /// Reply with a line that is not JSON.
    #[arg(long)]
    garbage: bool,
    /// Collect this many requests, then answer them in reverse order.
    #[arg(long, default_value_t = 1)]
    reverse_batch: usize,
    /// Answer the handshake without advertising the orient task.
    #[arg(long)]
    bad_hello: bool,
}

#[derive(Debug, Default, Deserialize)]
struct Replies {
    #[serde(default)]
    locate: Vec<Detection>,
    #[serde(default)]
    orient: Vec<ObbDetection>,
}

#[derive(Debug, Default, Deserialize)]
struct Script {
    #[serde(default)]
    default: Replies,
    #[serde(default)]
    images: BTreeMap<String, Replies>,
}

fn image_hash(req: &Request) -> String {
    let bytes = base64::engine::general_purpose::STANDARD.decode(&req.image_png_base64).unwrap_or_default();
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn answer(line: &str, script: &Script, args: &Args) -> String {
    let value: Value = match serde_json::from_str(line) {
        Ok(v) => v,
        Err(e) => return serde_json::json!({"id": null, "error": format!("malformed request: {e}")}).to_string(),
    };
    let id = protocol::reply_id(&value).unwrap_or_default().to_string();
    let req: Request = match serde_json::from_value(value) {
        Ok(r) => r,
        Err(e) => return protocol::error_reply(&id, &format!("malformed request: {e}")),
    };
    if let Err(e) = req.decode_image() {
        return protocol::error_reply(&id, &e);
    }
    if args.garbage {
        return "this is not json".into();
    }
    if args.malformed {
        return serde_json::json!({"id": id, "detections": [{"class": "dp_one_aisle", "bbox": [1, 2, 3], "confidence": 0.5}]})
            .to_string();
    }
    let replies = script.images.get(&image_hash(&req)).unwrap_or(&script.default);
    match req.task {
        Task::Locate => protocol::locate_reply(&id, &replies.locate),
        Task::Orient => protocol::orient_reply(&id, &replies.orient),
    }
}

fn main() -> Result<()> {
    let args = Args::parse();
    let script: Script = match &args.script {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => Script::default(),
    };
    let stdin = std::io::stdin();
    let mut stdout = std::io::stdout().lock();
    let mut batch: Vec<String> = Vec::new();
    for line in stdin.lock().lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if serde_json::from_str::<Value>(&line).ok().and_then(|v| v.get("hello").cloned()).is_some() {
            let hello = if args.bad_hello { r#"{"hello":1,"tasks":["locate"]}"# } else { protocol::HELLO_REPLY };
            writeln!(stdout, "{hello}")?;
            stdout.flush()?;
            continue;
        }
        batch.push(answer(&line, &script, &args));
        if batch.len() >= args.reverse_batch.max(1) {
            if args.delay_ms > 0 {
                std::thread::sleep(Duration::from_millis(args.delay_ms));
            }
            for reply in batch.drain(..).rev() {
                writeln!(stdout, "{reply}")?;
            }
            stdout.flush()?;
        }
    }
    Ok(())
}
