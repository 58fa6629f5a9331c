//! Extraction of the `"results"` payload from free-form model replies.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::GatewayError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldKind {
    String,
    Integer,
    Any,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub name: String,
    pub kind: FieldKind,
    pub required: bool,
}

impl FieldSpec {
    pub fn required(name: &str, kind: FieldKind) -> Self {
        Self { name: name.to_string(), kind, required: true }
    }

    pub fn optional(name: &str, kind: FieldKind) -> Self {
        Self { name: name.to_string(), kind, required: false }
    }
}

/// Caller-supplied record shape.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordSchema {
    /// Field holding the record id. Map-shaped results inject their keys here.
    pub id_field: Option<String>,
    pub fields: Vec<FieldSpec>,
}

impl RecordSchema {
    pub fn new(id_field: Option<&str>, fields: Vec<FieldSpec>) -> Self {
        Self { id_field: id_field.map(str::to_string), fields }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordViolation {
    pub index: usize,
    pub id: Option<String>,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParsedResults {
    pub records: Vec<Map<String, Value>>,
    pub violations: Vec<RecordViolation>,
    /// Syntax repairs applied to get a parse, if the payload was not strict JSON.
    pub repairs: Vec<String>,
}

/// Locates the outermost JSON object in `raw` and parses it.
///
/// Code fences and surrounding prose are ignored. Strict JSON is tried
/// first; failing that, a tolerant reader accepts missing commas, trailing
/// commas, raw newlines inside strings, mismatched closing brackets and an
/// object brace opening a bare list of objects.
pub fn extract_json(raw: &str) -> Result<(Value, Vec<String>), GatewayError> {
    let Some(start) = raw.find('{') else {
        return Err(GatewayError::NoJsonFound);
    };
    let body = &raw[start..];
    let end = balanced_end(body).unwrap_or(body.len());
    if let Ok(v) = serde_json::from_str::<Value>(&body[..end]) {
        return Ok((v, Vec::new()));
    }
    let mut reader = Lenient { src: body.as_bytes(), pos: 0, repairs: Vec::new() };
    let v = reader.value().map_err(GatewayError::MalformedJson)?;
    Ok((v, reader.repairs))
}

/// Extracts the value under the root key `"results"`.
pub fn extract_results(raw: &str) -> Result<(Value, Vec<String>), GatewayError> {
    let (mut v, repairs) = extract_json(raw)?;
    match v.as_object_mut().and_then(|o| o.remove("results")) {
        Some(results) => Ok((results, repairs)),
        None => Err(GatewayError::MissingResultsRoot),
    }
}

/// Parses the records under `"results"` and validates each one against `schema`.
///
/// `results` may be a list of objects or an object keyed by record id.
/// Invalid records are dropped from `records` and listed in `violations`.
pub fn parse_results_json(raw: &str, schema: &RecordSchema) -> Result<ParsedResults, GatewayError> {
    let (results, repairs) = extract_results(raw)?;
    let items: Vec<(Option<String>, Value)> = match results {
        Value::Array(list) => list.into_iter().map(|v| (None, v)).collect(),
        Value::Object(map) if map.values().all(Value::is_object) => {
            map.into_iter().map(|(k, v)| (Some(k), v)).collect()
        }
        Value::Object(map) => vec![(None, Value::Object(map))],
        Value::Null => Vec::new(),
        other => {
            return Err(GatewayError::MalformedJson(format!("`results` must be a list or object, got {other}")));
        }
    };
    let mut out = ParsedResults { repairs, ..Default::default() };
    for (index, (key, item)) in items.into_iter().enumerate() {
        match validate(item, key, schema) {
            Ok(record) => out.records.push(record),
            Err((id, reason)) => out.violations.push(RecordViolation { index, id, reason }),
        }
    }
    Ok(out)
}

/// Inverse of [`parse_results_json`] for schema-valid records.
pub fn render_results_json(records: &[Map<String, Value>]) -> String {
    let results: Vec<Value> = records.iter().cloned().map(Value::Object).collect();
    let mut root = Map::new();
    root.insert("results".into(), Value::Array(results));
    serde_json::to_string_pretty(&Value::Object(root)).expect("Value always serializes")
}

fn validate(
    item: Value,
    key: Option<String>,
    schema: &RecordSchema,
) -> Result<Map<String, Value>, (Option<String>, String)> {
    let Value::Object(mut record) = item else {
        return Err((key, "record is not an object".into()));
    };
    for name in schema.id_field.iter().chain(schema.fields.iter().map(|f| &f.name)) {
        canonicalize_key(&mut record, name);
    }
    if let (Some(id_field), Some(k)) = (&schema.id_field, &key) {
        record.entry(id_field.clone()).or_insert_with(|| Value::String(k.clone()));
    }
    let id = schema.id_field.as_ref().and_then(|f| record.get(f)).and_then(scalar_string);
    if let Some(id_field) = &schema.id_field {
        match &id {
            Some(s) if !s.trim().is_empty() => {
                record.insert(id_field.clone(), Value::String(s.trim().to_string()));
            }
            _ => return Err((None, format!("missing or empty `{id_field}`"))),
        }
    }
    for spec in &schema.fields {
        let Some(value) = record.get_mut(&spec.name) else {
            if spec.required {
                return Err((id, format!("missing field `{}`", spec.name)));
            }
            continue;
        };
        match spec.kind {
            FieldKind::Any => {}
            FieldKind::String => match scalar_string(value) {
                Some(s) => *value = Value::String(s),
                None => return Err((id, format!("field `{}` must be a string", spec.name))),
            },
            FieldKind::Integer => match as_integer(value) {
                Some(n) => *value = Value::from(n),
                None => return Err((id, format!("field `{}` must be an integer, got {value}", spec.name))),
            },
        }
    }
    Ok(record)
}

fn normalized(key: &str) -> String {
    key.chars().filter(|c| c.is_alphanumeric()).flat_map(char::to_lowercase).collect()
}

/// Renames a key spelled `system requirement`, `SYSTEM_REQUIREMENT`, ... to `name`.
fn canonicalize_key(record: &mut Map<String, Value>, name: &str) {
    if record.contains_key(name) {
        return;
    }
    let want = normalized(name);
    if let Some(found) = record.keys().find(|k| normalized(k) == want).cloned() {
        if let Some(v) = record.remove(&found) {
            record.insert(name.to_string(), v);
        }
    }
}

fn scalar_string(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

fn as_integer(v: &Value) -> Option<i64> {
    match v {
        Value::Number(n) => n.as_i64().or_else(|| n.as_f64().filter(|f| f.fract() == 0.0).map(|f| f as i64)),
        Value::String(s) => {
            let s = s.trim().trim_end_matches('%').trim();
            s.parse::<i64>().ok().or_else(|| s.parse::<f64>().ok().filter(|f| f.fract() == 0.0).map(|f| f as i64))
        }
        _ => None,
    }
}

/// Byte offset just past the bracket closing `s[0]`, honoring strings.
fn balanced_end(s: &str) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_str = false;
    let mut escaped = false;
    for (i, b) in s.bytes().enumerate() {
        if in_str {
            match b {
                _ if escaped => escaped = false,
                b'\\' => escaped = true,
                b'"' => in_str = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_str = true,
            b'{' | b'[' => depth += 1,
            b'}' | b']' => {
                depth = depth.checked_sub(1)?;
                if depth == 0 {
                    return Some(i + 1);
                }
            }
            _ => {}
        }
    }
    None
}

struct Lenient<'a> {
    src: &'a [u8],
    pos: usize,
    repairs: Vec<String>,
}

impl Lenient<'_> {
    fn peek(&mut self) -> Option<u8> {
        while let Some(&b) = self.src.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                return Some(b);
            }
        }
        None
    }

    fn repair(&mut self, what: &str) {
        self.repairs.push(format!("{what} at byte {}", self.pos));
    }

    fn value(&mut self) -> Result<Value, String> {
        match self.peek() {
            Some(b'{') => {
                self.pos += 1;
                if self.peek() == Some(b'{') {
                    self.repair("`{` opening a list of objects read as `[`");
                    self.list()
                } else {
                    self.object()
                }
            }
            Some(b'[') => {
                self.pos += 1;
                self.list()
            }
            Some(b'"') => self.string().map(Value::String),
            Some(_) => self.scalar(),
            None => Err("unexpected end of input".into()),
        }
    }

    /// Consumes a closing bracket, tolerating the wrong kind or its absence.
    fn close(&mut self, want: u8) {
        match self.peek() {
            Some(b) if b == want => self.pos += 1,
            Some(b @ (b'}' | b']')) => {
                self.repair(&format!("`{}` closed by `{}`", if want == b'}' { '{' } else { '[' }, b as char));
                self.pos += 1;
            }
            _ => self.repair("missing closing bracket"),
        }
    }

    fn separator(&mut self, closers: &[u8]) {
        match self.peek() {
            Some(b',') => {
                self.pos += 1;
                if self.peek().is_some_and(|b| closers.contains(&b)) {
                    self.repair("trailing comma");
                }
            }
            Some(b) if closers.contains(&b) => {}
            Some(_) => self.repair("missing comma"),
            None => {}
        }
    }

    fn object(&mut self) -> Result<Value, String> {
        let mut map = Map::new();
        loop {
            match self.peek() {
                None | Some(b'}' | b']') => break,
                Some(b'"') => {}
                Some(b) => return Err(format!("expected key at byte {}, found `{}`", self.pos, b as char)),
            }
            let key = self.string()?;
            if self.peek() != Some(b':') {
                return Err(format!("expected `:` after key `{key}`"));
            }
            self.pos += 1;
            let v = self.value()?;
            map.insert(key, v);
            self.separator(b"}]");
        }
        self.close(b'}');
        Ok(Value::Object(map))
    }

    fn list(&mut self) -> Result<Value, String> {
        let mut items = Vec::new();
        loop {
            match self.peek() {
                None | Some(b'}' | b']') => break,
                _ => items.push(self.value()?),
            }
            self.separator(b"}]");
        }
        self.close(b']');
        Ok(Value::Array(items))
    }

    fn string(&mut self) -> Result<String, String> {
        debug_assert_eq!(self.src.get(self.pos), Some(&b'"'));
        let start = self.pos;
        self.pos += 1;
        let mut raw = Vec::new();
        let mut escaped = false;
        let mut raw_control = false;
        while let Some(&b) = self.src.get(self.pos) {
            self.pos += 1;
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                let text = String::from_utf8(raw).map_err(|e| e.to_string())?;
                if raw_control {
                    self.repairs.push(format!("raw control character in string at byte {start}"));
                }
                let quoted = format!("\"{}\"", text.replace('\n', "\\n").replace('\r', "\\r").replace('\t', "\\t"));
                return serde_json::from_str::<String>(&quoted).map_err(|e| format!("bad string at byte {start}: {e}"));
            } else if b < 0x20 {
                raw_control = true;
            }
            raw.push(b);
        }
        Err(format!("unterminated string at byte {start}"))
    }

    fn scalar(&mut self) -> Result<Value, String> {
        let start = self.pos;
        while let Some(&b) = self.src.get(self.pos) {
            if b.is_ascii_whitespace() || matches!(b, b',' | b'}' | b']' | b':') {
                break;
            }
            self.pos += 1;
        }
        let token = std::str::from_utf8(&self.src[start..self.pos]).map_err(|e| e.to_string())?;
        serde_json::from_str::<Value>(token).map_err(|_| format!("unexpected token `{token}` at byte {start}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn schema() -> RecordSchema {
        RecordSchema::new(
            Some("ReqID"),
            vec![FieldSpec::required("Function", FieldKind::String), FieldSpec::optional("Confidence", FieldKind::Integer)],
        )
    }

    #[test]
    fn fenced_empty_results() {
        let parsed = parse_results_json("```json {\"results\": []} ```", &schema()).unwrap();
        assert!(parsed.records.is_empty() && parsed.violations.is_empty() && parsed.repairs.is_empty());
    }

    #[test]
    fn prose_without_braces() {
        assert!(matches!(parse_results_json("no json here", &schema()), Err(GatewayError::NoJsonFound)));
    }

    #[test]
    fn missing_results_root() {
        assert!(matches!(parse_results_json("{\"data\": []}", &schema()), Err(GatewayError::MissingResultsRoot)));
    }

    #[test]
    fn leading_prose_and_trailing_text() {
        let raw = "Sure! Here you go:\n{\"results\": [{\"ReqID\": 5, \"Function\": \"NAV\"}]}\nHope this helps {:}";
        let parsed = parse_results_json(raw, &schema()).unwrap();
        assert_eq!(parsed.records[0]["ReqID"], json!("5"));
    }

    #[test]
    fn map_shaped_results_inject_ids() {
        let raw = r#"{"results": {"1000": {"Function": "NAV"}, "1001": {"Function": "EN"}}}"#;
        let parsed = parse_results_json(raw, &schema()).unwrap();
        let ids: Vec<_> = parsed.records.iter().map(|r| r["ReqID"].clone()).collect();
        assert_eq!(ids, [json!("1000"), json!("1001")]);
    }

    #[test]
    fn invalid_records_reported_individually() {
        let raw = r#"{"results": [{"ReqID": "1", "Function": "NAV", "Confidence": "high"},
                                  {"ReqID": "2"}, 7, {"ReqID": "3", "Function": "EN", "Confidence": "85"}]}"#;
        let parsed = parse_results_json(raw, &schema()).unwrap();
        assert_eq!(parsed.records.len(), 1);
        assert_eq!(parsed.records[0]["Confidence"], json!(85));
        let reasons: Vec<_> = parsed.violations.iter().map(|v| (v.index, v.id.clone())).collect();
        assert_eq!(reasons, [(0, Some("1".into())), (1, Some("2".into())), (2, None)]);
    }

    #[test]
    fn tolerant_reader_repairs() {
        let raw = "{\"results\":{\n {\"ReqID\": \"a\" \"Function\": \"X\",},\n {\"ReqID\": \"b\", \"Function\": \"line\nbreak\"}\n ]\n}";
        let parsed = parse_results_json(raw, &RecordSchema::new(Some("ReqID"), vec![])).unwrap();
        assert_eq!(parsed.records.len(), 2);
        assert_eq!(parsed.records[1]["Function"], json!("line\nbreak"));
        assert!(parsed.repairs.len() >= 3, "{:?}", parsed.repairs);
    }

    #[test]
    fn key_spelling_is_canonicalized() {
        let raw = r#"{"results": [{"reqid": "1", "function": "NAV", "CONFIDENCE": 90}]}"#;
        let parsed = parse_results_json(raw, &schema()).unwrap();
        assert_eq!(parsed.records[0]["Function"], json!("NAV"));
        assert_eq!(parsed.records[0]["ReqID"], json!("1"));
    }

    #[test]
    fn hopeless_input_is_malformed() {
        assert!(matches!(extract_json("{\"a\" 1}"), Err(GatewayError::MalformedJson(_))));
    }

    #[test]
    fn render_round_trip() {
        let rec = json!({"ReqID": "9", "Function": "NAV", "Confidence": 90});
        let records = vec![rec.as_object().unwrap().clone()];
        let parsed = parse_results_json(&render_results_json(&records), &schema()).unwrap();
        assert_eq!(parsed.records, records);
    }
}
