use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{Dataset, Example, Label, LabelSpace};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataFormat {
    Tsv,
    Jsonl,
}

impl DataFormat {
    /// Guess from the file extension (`.tsv` / `.jsonl`).
    pub fn from_path(path: &Path) -> Option<DataFormat> {
        match path.extension()?.to_str()? {
            "tsv" => Some(DataFormat::Tsv),
            "jsonl" | "json" => Some(DataFormat::Jsonl),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoadOptions {
    /// TSV only: skip the first row.
    pub header: bool,
    /// TSV only: rows carry a second segment before the label column.
    pub pair: bool,
}

/// Load a dataset from TSV or JSONL, preserving file order.
///
/// TSV rows are `segment_a<TAB>[segment_b<TAB>]label`; the label column is
/// optional per row. JSONL objects use `text_a`, optional `text_b`, optional
/// `label` and optional `id`. Missing ids become the 0-based data row index.
pub fn load_dataset(
    path: &Path,
    format: DataFormat,
    label_space: LabelSpace,
    options: &LoadOptions,
) -> Result<Dataset> {
    let text = fs::read_to_string(path)?;
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("dataset")
        .to_owned();
    let examples = match format {
        DataFormat::Tsv => parse_tsv(&text, &label_space, options),
        DataFormat::Jsonl => parse_jsonl(&text, &label_space),
    }
    .map_err(|e| match e {
        Error::Parse { line, message, .. } => Error::Parse {
            path: Some(path.to_owned()),
            line,
            message,
        },
        other => other,
    })?;
    Dataset::new(name, label_space, examples)
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: None,
        line,
        message: message.into(),
    }
}

fn label_at(space: &LabelSpace, raw: &str, line: usize) -> Result<Label> {
    space
        .parse_label(raw)
        .map_err(|e| Error::Validation(format!("line {line}: {e}")))
}

fn parse_tsv(text: &str, space: &LabelSpace, options: &LoadOptions) -> Result<Vec<Example>> {
    let mut examples = Vec::new();
    let mut row = 0usize;
    for (i, raw_line) in text.lines().enumerate() {
        let line_no = i + 1;
        if i == 0 && options.header {
            continue;
        }
        let line = raw_line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let (a, b, label) = match (options.pair, cols.len()) {
            (false, 1) => (cols[0], None, None),
            (false, 2) => (cols[0], None, Some(cols[1])),
            (true, 2) => (cols[0], Some(cols[1]), None),
            (true, 3) => (cols[0], Some(cols[1]), Some(cols[2])),
            (_, n) => {
                return Err(parse_err(
                    line_no,
                    format!("expected {} columns, found {n}", if options.pair { "2 or 3" } else { "1 or 2" }),
                ))
            }
        };
        if a.trim().is_empty() {
            return Err(parse_err(line_no, "empty segment_a"));
        }
        let label = label.map(|l| label_at(space, l, line_no)).transpose()?;
        examples.push(Example {
            id: row.to_string(),
            segment_a: a.to_owned(),
            segment_b: b.map(str::to_owned),
            label,
        });
        row += 1;
    }
    Ok(examples)
}

fn parse_jsonl(text: &str, space: &LabelSpace) -> Result<Vec<Example>> {
    let mut examples = Vec::new();
    let mut row = 0usize;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(line)
            .map_err(|e| parse_err(line_no, format!("invalid JSON: {e}")))?;
        let obj = value
            .as_object()
            .ok_or_else(|| parse_err(line_no, "expected a JSON object"))?;
        let text_a = match obj.get("text_a") {
            Some(Value::String(s)) if !s.trim().is_empty() => s.clone(),
            Some(Value::String(_)) => return Err(parse_err(line_no, "empty `text_a`")),
            Some(_) => return Err(parse_err(line_no, "`text_a` must be a string")),
            None => return Err(parse_err(line_no, "missing `text_a`")),
        };
        let text_b = match obj.get("text_b") {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => return Err(parse_err(line_no, "`text_b` must be a string")),
        };
        let label = match obj.get("label") {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => Some(label_at(space, s, line_no)?),
            Some(Value::Number(n)) => Some(label_at(space, &n.to_string(), line_no)?),
            Some(_) => return Err(parse_err(line_no, "`label` must be a string or number")),
        };
        let id = match obj.get("id") {
            None | Some(Value::Null) => row.to_string(),
            Some(Value::String(s)) => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            Some(_) => return Err(parse_err(line_no, "`id` must be a string or number")),
        };
        examples.push(Example {
            id,
            segment_a: text_a,
            segment_b: text_b,
            label,
        });
        row += 1;
    }
    Ok(examples)
}

/// One JSONL line for an example (`id`, `text_a`, `text_b`, `label`).
pub(crate) fn example_to_json(ex: &Example, space: &LabelSpace) -> Value {
    let mut obj = Map::new();
    obj.insert("id".into(), Value::String(ex.id.clone()));
    obj.insert("text_a".into(), Value::String(ex.segment_a.clone()));
    if let Some(b) = &ex.segment_b {
        obj.insert("text_b".into(), Value::String(b.clone()));
    }
    match ex.label {
        Some(Label::Class(c)) => {
            obj.insert(
                "label".into(),
                Value::String(space.format_label(&Label::Class(c))),
            );
        }
        Some(Label::Value(v)) => {
            obj.insert("label".into(), serde_json::json!(v));
        }
        None => {}
    }
    Value::Object(obj)
}

/// Write a dataset in the given format. TSV output carries no ids, so ids
/// only survive a JSONL round trip.
pub fn save_dataset(dataset: &Dataset, path: &Path, format: DataFormat) -> Result<()> {
    let mut out = Vec::new();
    for ex in &dataset.examples {
        match format {
            DataFormat::Jsonl => {
                serde_json::to_writer(&mut out, &example_to_json(ex, &dataset.label_space))?;
                out.push(b'\n');
            }
            DataFormat::Tsv => {
                let clean = |s: &str| s.replace(['\t', '\n', '\r'], " ");
                write!(out, "{}", clean(&ex.segment_a))?;
                if let Some(b) = &ex.segment_b {
                    write!(out, "\t{}", clean(b))?;
                }
                if let Some(l) = &ex.label {
                    write!(out, "\t{}", dataset.label_space.format_label(l))?;
                }
                out.push(b'\n');
            }
        }
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(contents: &str, ext: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(ext).tempfile().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn three_line_tsv() {
        let f = write_tmp("great film\tpos\nawful plot\tneg\nloved it\tpos\n", ".tsv");
        let space = LabelSpace::categorical(["pos", "neg"]).unwrap();
        let ds = load_dataset(f.path(), DataFormat::Tsv, space, &LoadOptions::default()).unwrap();
        assert_eq!(ds.len(), 3);
        assert!(ds.label_space.is_categorical());
        assert_eq!(ds.examples[1].label, Some(Label::Class(1)));
        assert_eq!(ds.examples[2].id, "2");
    }

    #[test]
    fn tsv_header_and_pairs() {
        let f = write_tmp("a\tb\tlabel\nx y\tx\tentailment\np q\tr s\n", ".tsv");
        let space = LabelSpace::categorical(["entailment", "neutral"]).unwrap();
        let opts = LoadOptions {
            header: true,
            pair: true,
        };
        let ds = load_dataset(f.path(), DataFormat::Tsv, space, &opts).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.examples[0].segment_b.as_deref(), Some("x"));
        assert_eq!(ds.examples[1].label, None);
        assert_eq!(ds.examples[0].id, "0");
    }

    #[test]
    fn jsonl_missing_text_a_names_line() {
        let f = write_tmp(
            "{\"text_a\": \"ok\", \"label\": \"pos\"}\n{\"text_b\": \"no a\"}\n",
            ".jsonl",
        );
        let space = LabelSpace::categorical(["pos", "neg"]).unwrap();
        let err = load_dataset(f.path(), DataFormat::Jsonl, space, &LoadOptions::default())
            .unwrap_err();
        match err {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 2);
                assert!(message.contains("text_a"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn continuous_label_out_of_range() {
        let f = write_tmp("a b\t1.5\nc d\t7.2\n", ".tsv");
        let space = LabelSpace::continuous(0.0, 5.0).unwrap();
        let err =
            load_dataset(f.path(), DataFormat::Tsv, space, &LoadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Validation(ref m) if m.contains("line 2")), "{err}");
    }

    #[test]
    fn malformed_tsv_row() {
        let f = write_tmp("a\tpos\nb\tc\td\tpos\n", ".tsv");
        let space = LabelSpace::categorical(["pos", "neg"]).unwrap();
        let err =
            load_dataset(f.path(), DataFormat::Tsv, space, &LoadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn jsonl_round_trip_preserves_order_and_ids() {
        let space = LabelSpace::categorical(["pos", "neg"]).unwrap();
        let ds = Dataset::new(
            "d",
            space.clone(),
            vec![
                Example::single("b", "second", Some(Label::Class(1))),
                Example::pair("a", "first", "pair", Some(Label::Class(0))),
                Example::single("c", "third", None),
            ],
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        save_dataset(&ds, &path, DataFormat::Jsonl).unwrap();
        let back = load_dataset(&path, DataFormat::Jsonl, space, &LoadOptions::default()).unwrap();
        assert_eq!(back.examples, ds.examples);
    }
}
