//! JSON, CSV and plain-text artifacts.

use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

/// Git-style object id of the report body: SHA-256 over `blob <len>\0<bytes>`.
pub fn content_id(body: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", body.len()).as_bytes());
    h.update(body);
    format!("{:x}", h.finalize())
}

pub struct Report {
    pub command: String,
    pub pass: bool,
    pub result: Value,
    pub summary: String,
    /// (file name, contents)
    pub csv: Vec<(String, String)>,
}

impl Report {
    /// Body without the volatile fields, serialized deterministically.
    pub fn body(&self, cfg: &RunConfig) -> Value {
        json!({
            "command": self.command,
            "version": env!("CARGO_PKG_VERSION"),
            "config": cfg,
            "config_hash": cfg.hash(),
            "pass": self.pass,
            "result": self.result,
        })
    }

    /// Writes `<command>.json`, the CSV files and `<command>.txt`; returns the JSON path.
    pub fn write(&self, cfg: &RunConfig, timings: Value) -> std::io::Result<PathBuf> {
        std::fs::create_dir_all(&cfg.out)?;
        let body = self.body(cfg);
        let bytes = serde_json::to_vec(&body).expect("report serializes");
        let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let mut doc = body;
        doc["content_id"] = json!(content_id(&bytes));
        doc["meta"] = json!({ "timestamp_unix": stamp, "timings_s": timings });
        let path = cfg.out.join(format!("{}.json", self.command));
        std::fs::write(&path, serde_json::to_string_pretty(&doc).expect("report serializes") + "\n")?;
        for (name, text) in &self.csv {
            std::fs::write(cfg.out.join(name), text)?;
        }
        std::fs::write(cfg.out.join(format!("{}.txt", self.command)), &self.summary)?;
        Ok(path)
    }
}

pub fn csv<I, R>(header: &str, rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut s = String::from(header);
    s.push('\n');
    for r in rows {
        s.push_str(&r.into_iter().collect::<Vec<_>>().join(","));
        s.push('\n');
    }
    s
}
