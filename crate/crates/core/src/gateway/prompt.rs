use std::fmt::Write as _;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::GatewayError;

static TAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[A-Za-z_][A-Za-z0-9_.\-]*$").unwrap());

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ResourceBody {
    Json(Value),
    Text(String),
}

/// Named context block rendered as `<tag>body</tag>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resource {
    tag: String,
    body: ResourceBody,
}

impl Resource {
    pub fn new(tag: impl Into<String>, body: ResourceBody) -> Result<Self, GatewayError> {
        let tag = tag.into();
        if !TAG.is_match(&tag) {
            return Err(GatewayError::InvalidTag(tag));
        }
        Ok(Self { tag, body })
    }

    pub fn text(tag: impl Into<String>, body: impl Into<String>) -> Result<Self, GatewayError> {
        Self::new(tag, ResourceBody::Text(body.into()))
    }

    pub fn json(tag: impl Into<String>, body: Value) -> Result<Self, GatewayError> {
        Self::new(tag, ResourceBody::Json(body))
    }

    /// Parses `raw` as JSON when possible, else keeps it as text.
    pub fn json_or_text(tag: impl Into<String>, raw: &str) -> Result<Self, GatewayError> {
        match serde_json::from_str::<Value>(raw) {
            Ok(v) => Self::json(tag, v),
            Err(_) => Self::text(tag, raw),
        }
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn body(&self) -> &ResourceBody {
        &self.body
    }

    fn render_body(&self) -> String {
        match &self.body {
            ResourceBody::Text(t) => t.trim_end().to_string(),
            ResourceBody::Json(v) => serde_json::to_string_pretty(v).expect("Value always serializes"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRow {
    pub req_id: String,
    pub text: String,
}

impl PromptRow {
    pub fn new(req_id: impl Into<String>, text: impl Into<String>) -> Self {
        Self { req_id: req_id.into(), text: text.into() }
    }

    /// A row built from several data columns, one `column: value` line each.
    pub fn labeled<'a>(req_id: impl Into<String>, columns: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        let text = columns.into_iter().map(|(c, v)| format!("{c}: {v}")).collect::<Vec<_>>().join("\n");
        Self { req_id: req_id.into(), text }
    }
}

/// Everything one LLM call sees, in render order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptEnvelope {
    pub instructions: String,
    pub resources: Vec<Resource>,
    pub dataset_name: String,
    pub id_label: String,
    pub rows: Vec<PromptRow>,
}

impl PromptEnvelope {
    pub fn new(instructions: impl Into<String>) -> Self {
        Self {
            instructions: instructions.into(),
            resources: Vec::new(),
            dataset_name: String::new(),
            id_label: "ReqID".to_string(),
            rows: Vec::new(),
        }
    }

    pub fn resource(mut self, resource: Resource) -> Self {
        self.resources.push(resource);
        self
    }

    pub fn dataset(mut self, name: impl Into<String>, rows: Vec<PromptRow>) -> Self {
        self.dataset_name = name.into();
        self.rows = rows;
        self
    }

    /// Renders instructions, then `<RESOURCES>`, then the dataset block.
    ///
    /// Output is a pure function of the envelope. Empty sections are
    /// omitted, except the dataset block which is kept (possibly empty)
    /// whenever a dataset name is set.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(self.instructions.trim());
        out.push('\n');
        if !self.resources.is_empty() {
            out.push_str("\n<RESOURCES>\n");
            for r in &self.resources {
                let _ = writeln!(out, "<{tag}>\n{body}\n</{tag}>", tag = r.tag, body = r.render_body());
            }
            out.push_str("</RESOURCES>\n");
        }
        if !self.dataset_name.is_empty() {
            let _ = writeln!(out, "\n<{}>", self.dataset_name);
            for row in &self.rows {
                let mut lines = row.text.trim().lines();
                let first = lines.next().unwrap_or("");
                let _ = writeln!(out, "{} {}: {}", self.id_label, row.req_id, first);
                for line in lines {
                    let _ = writeln!(out, "    {}", line.trim_end());
                }
            }
            let _ = writeln!(out, "</{}>", self.dataset_name);
        }
        out
    }
}
