//! Machine-readable results: `key = value` lines with a fixed key set per command.

use std::fmt::Write as _;
use std::path::Path;

/// Placeholder for keys a failed run never reached.
pub const MISSING: &str = "na";

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    entries: Vec<(&'static str, String)>,
}

/// Nine-decimal fixed point, the only number format in results files.
pub fn fixed(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        let s = format!("{v:.9}");
        // no negative zero in the output
        if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
            s.trim_start_matches('-').to_string()
        } else {
            s
        }
    }
}

pub fn scientific(v: f64) -> String {
    format!("{v:.3e}")
}

impl Report {
    pub fn new(command: &str, keys: &[&'static str]) -> Self {
        let mut entries = vec![
            ("tool_version", env!("CARGO_PKG_VERSION").to_string()),
            ("command", command.to_string()),
        ];
        entries.extend(keys.iter().map(|&k| (k, MISSING.to_string())));
        entries.push(("stage", MISSING.to_string()));
        entries.push(("error", "none".to_string()));
        Report { entries }
    }

    pub fn set(&mut self, key: &'static str, value: impl Into<String>) {
        let value = value.into();
        match self.entries.iter_mut().find(|(k, _)| *k == key) {
            Some(e) => e.1 = value,
            None => {
                // keep stage and error last
                let at = self.entries.len() - 2;
                self.entries.insert(at, (key, value));
            }
        }
    }

    pub fn number(&mut self, key: &'static str, value: f64) {
        self.set(key, fixed(value));
    }

    pub fn count(&mut self, key: &'static str, value: usize) {
        self.set(key, value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| *k == key).map(|(_, v)| v.as_str())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(k, _)| *k)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            // values never span lines
            let v = v.replace(['\n', '\r'], " ");
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.render())
    }
}

/// Read a results file back into ordered key/value pairs.
pub fn parse_results(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|line| line.split_once(" = "))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}
