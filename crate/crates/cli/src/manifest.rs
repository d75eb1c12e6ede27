use serde::Serialize;
use serde_json::Value;

use crate::input::InputDigest;

/// Everything needed to reproduce a report. Embedded in every report.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub inputs: Vec<InputDigest>,
    pub config: Value,
    pub tool_version: String,
    pub seed: u64,
}

impl RunManifest {
    pub fn new(command: &str, inputs: Vec<InputDigest>, config: Value, seed: u64) -> Self {
        Self {
            command: command.into(),
            inputs,
            config,
            tool_version: format!("volentropy {}", env!("CARGO_PKG_VERSION")),
            seed,
        }
    }

    /// `# key: value` header lines for text reports.
    pub fn text_header(&self) -> String {
        let mut out = format!("# command: {}\n", self.command);
        for i in &self.inputs {
            out.push_str(&format!("# input: {} sha256={}\n", i.path, i.sha256));
        }
        out.push_str(&format!("# config: {}\n", self.config));
        out.push_str(&format!("# version: {}\n", self.tool_version));
        out.push_str(&format!("# seed: {}\n", self.seed));
        out
    }
}
