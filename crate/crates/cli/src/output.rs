use std::io::Write;

use serde::Serialize;

/// Text for people, or one JSON object per line for scripts.
pub struct Out {
    json: bool,
}

impl Out {
    pub fn new(json: bool) -> Self {
        Self { json }
    }

    pub fn is_json(&self) -> bool {
        self.json
    }

    /// Human-readable line; suppressed in JSON mode.
    pub fn line(&self, text: impl AsRef<str>) {
        if !self.json {
            println!("{}", text.as_ref());
        }
    }

    /// Machine-readable record; suppressed in text mode.
    pub fn emit<T: Serialize>(&self, value: &T) {
        if self.json {
            let mut stdout = std::io::stdout().lock();
            serde_json::to_writer(&mut stdout, value).expect("serializable output");
            let _ = writeln!(stdout);
        }
    }
}
