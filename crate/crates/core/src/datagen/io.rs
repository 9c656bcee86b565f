//! JSON-Lines persistence: a header line, then one sample per line.

use std::collections::HashSet;

use serde_json::Value;

use super::{DataError, Dataset, DatasetHeader, LabeledSample, DATASET_SCHEMA_VERSION};
use crate::jsonfmt;
use crate::opf::FormulationKind;

const SAMPLE_FIELDS: [&str; 10] = ["id", "seed", "alpha", "formulation", "pd", "qd", "z", "y", "status", "split"];
const HEADER_FIELDS: [&str; 3] = ["schema_version", "case", "config_hash"];

pub fn write_dataset(d: &Dataset) -> String {
    let mut out = jsonfmt::to_line(&d.header).expect("header serializes");
    out.push('\n');
    for s in &d.samples {
        out.push_str(&jsonfmt::to_line(s).expect("sample serializes"));
        out.push('\n');
    }
    out
}

fn schema(path: String, message: impl Into<String>) -> DataError {
    DataError::Schema { path, message: message.into() }
}

fn exact_fields(v: &Value, fields: &[&str], at: &str) -> Result<(), DataError> {
    let obj = v.as_object().ok_or_else(|| schema(at.to_string(), "expected a JSON object"))?;
    for f in fields {
        if !obj.contains_key(*f) {
            return Err(schema(format!("{at}.{f}"), "missing field"));
        }
    }
    if let Some(extra) = obj.keys().find(|k| !fields.contains(&k.as_str())) {
        return Err(schema(format!("{at}.{extra}"), "unknown field"));
    }
    Ok(())
}

fn check_sample(s: &LabeledSample, at: &str) -> Result<(), DataError> {
    let field = |f: &str| format!("{at}.{f}");
    if s.pd.iter().any(|v| !v.is_finite()) {
        return Err(schema(field("pd"), "non-finite load"));
    }
    match (&s.qd, s.formulation) {
        (None, FormulationKind::Soc | FormulationKind::Ac) => {
            return Err(schema(field("qd"), "required for soc and ac samples"));
        }
        (Some(qd), _) if qd.len() != s.pd.len() || qd.iter().any(|v| !v.is_finite()) => {
            return Err(schema(field("qd"), "must be finite and as long as pd"));
        }
        _ => {}
    }
    if s.is_optimal() {
        let y = s.y.as_ref().ok_or_else(|| schema(field("y"), "missing on an optimal sample"))?;
        if y.len() != s.input().len() {
            return Err(schema(field("y"), format!("length {} differs from input length {}", y.len(), s.input().len())));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(schema(field("y"), "non-finite entry"));
        }
        if !s.z.is_some_and(f64::is_finite) {
            return Err(schema(field("z"), "missing or non-finite on an optimal sample"));
        }
    } else {
        if s.y.is_some() {
            return Err(schema(field("y"), "present on a non-optimal sample"));
        }
        if s.split.is_some() {
            return Err(schema(field("split"), "non-optimal samples cannot be assigned a split"));
        }
    }
    Ok(())
}

/// Parses and validates a dataset file. Errors name the offending line and field.
pub fn import_labeled(text: &str) -> Result<Dataset, DataError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or_else(|| schema("line 1".into(), "empty dataset file"))?;
    let hv: Value = serde_json::from_str(first).map_err(|e| schema("line 1".into(), e.to_string()))?;
    exact_fields(&hv, &HEADER_FIELDS, "line 1")?;
    let header: DatasetHeader = serde_json::from_value(hv).map_err(|e| schema("line 1".into(), e.to_string()))?;
    if header.schema_version != DATASET_SCHEMA_VERSION {
        return Err(schema(
            "line 1.schema_version".into(),
            format!("unsupported version {}, expected {DATASET_SCHEMA_VERSION}", header.schema_version),
        ));
    }

    let mut samples = Vec::new();
    let mut ids = HashSet::new();
    let mut dims: Option<(FormulationKind, usize)> = None;
    for (n, line) in lines {
        let at = format!("line {}", n + 1);
        let v: Value = serde_json::from_str(line).map_err(|e| schema(at.clone(), e.to_string()))?;
        exact_fields(&v, &SAMPLE_FIELDS, &at)?;
        let s: LabeledSample = serde_json::from_value(v).map_err(|e| schema(at.clone(), e.to_string()))?;
        check_sample(&s, &at)?;
        if !ids.insert(s.id) {
            return Err(schema(format!("{at}.id"), format!("duplicate id {}", s.id)));
        }
        match dims {
            None => dims = Some((s.formulation, s.pd.len())),
            Some((f, len)) if f != s.formulation || len != s.pd.len() => {
                return Err(schema(at, "formulation or load dimension differs from earlier samples"));
            }
            _ => {}
        }
        samples.push(s);
    }
    Ok(Dataset { header, samples })
}
