use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::TreeError;
use crate::compare::CompareMode;

/// Encoded feature vector, one `t`-bit integer per schema attribute.
pub type FeatureVector = Vec<u64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributeKind {
    Numeric,
    Categorical,
}

impl AttributeKind {
    /// Numeric attributes take `≤` tests, categorical ones take `==`.
    pub fn admits(self, mode: CompareMode) -> bool {
        matches!(
            (self, mode),
            (AttributeKind::Numeric, CompareMode::Numeric) | (AttributeKind::Categorical, CompareMode::Equality)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Attribute {
    pub name: String,
    pub kind: AttributeKind,
    /// Label encoder for categorical attributes.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub encoding: BTreeMap<String, u64>,
}

impl Attribute {
    pub fn numeric(name: impl Into<String>) -> Self {
        Self { name: name.into(), kind: AttributeKind::Numeric, encoding: BTreeMap::new() }
    }

    /// Categorical attribute with categories coded `0, 1, 2, …` in order.
    pub fn categorical<S: Into<String>>(name: impl Into<String>, categories: impl IntoIterator<Item = S>) -> Self {
        let encoding = categories.into_iter().zip(0u64..).map(|(c, i)| (c.into(), i)).collect();
        Self { name: name.into(), kind: AttributeKind::Categorical, encoding }
    }

    /// Encodes one raw value as a `t`-bit integer.
    pub fn encode(&self, raw: &str, t: u32) -> Result<u64, TreeError> {
        let raw = raw.trim();
        match self.kind {
            AttributeKind::Categorical => self
                .encoding
                .get(raw)
                .copied()
                .ok_or_else(|| TreeError::UnknownCategory { attribute: self.name.clone(), value: raw.to_string() }),
            AttributeKind::Numeric => raw
                .parse::<u64>()
                .ok()
                .filter(|&v| t >= 64 || v < 1u64 << t)
                .ok_or_else(|| TreeError::Range { attribute: self.name.clone(), value: raw.to_string(), t }),
        }
    }

    /// Inverse of [`encode`](Self::encode).
    pub fn decode(&self, code: u64) -> Option<String> {
        match self.kind {
            AttributeKind::Numeric => Some(code.to_string()),
            AttributeKind::Categorical => self.encoding.iter().find(|(_, &c)| c == code).map(|(k, _)| k.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeSchema {
    pub attributes: Vec<Attribute>,
    /// Class labels; the position is the class id.
    pub classes: Vec<String>,
}

impl AttributeSchema {
    pub fn attribute_index(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    /// Problems that make the schema unusable for `t`-bit features.
    pub fn violations(&self, t: u32) -> Vec<String> {
        let mut out = Vec::new();
        if self.classes.is_empty() {
            out.push("class list is empty".to_string());
        }
        let mut names = HashSet::new();
        for attr in &self.attributes {
            if !names.insert(attr.name.as_str()) {
                out.push(format!("duplicate attribute {}", attr.name));
            }
            match attr.kind {
                AttributeKind::Numeric if !attr.encoding.is_empty() => {
                    out.push(format!("numeric attribute {} has a category encoding", attr.name));
                }
                AttributeKind::Categorical => {
                    let mut codes = HashSet::new();
                    for (category, &code) in &attr.encoding {
                        if !codes.insert(code) {
                            out.push(format!("attribute {}: code {code} assigned twice", attr.name));
                        }
                        if t < 64 && code >= 1u64 << t {
                            out.push(format!("attribute {}: code {code} for {category:?} exceeds {t} bits", attr.name));
                        }
                    }
                }
                AttributeKind::Numeric => {}
            }
        }
        out
    }

    /// Encodes a record given as attribute name → raw value. Extra keys are
    /// ignored.
    pub fn encode_feature_vector(&self, raw: &HashMap<String, String>, t: u32) -> Result<FeatureVector, TreeError> {
        self.attributes
            .iter()
            .map(|a| {
                let value = raw.get(&a.name).ok_or_else(|| TreeError::MissingAttribute(a.name.clone()))?;
                a.encode(value, t)
            })
            .collect()
    }

    /// As [`encode_feature_vector`](Self::encode_feature_vector) for a JSON
    /// object whose values are strings or non-negative integers.
    pub fn encode_json(&self, raw: &serde_json::Value, t: u32) -> Result<FeatureVector, TreeError> {
        let obj = raw.as_object().ok_or_else(|| TreeError::Dataset("feature record must be a JSON object".into()))?;
        let record = obj
            .iter()
            .map(|(k, v)| {
                let text = match v {
                    serde_json::Value::String(s) => s.clone(),
                    other => other.to_string(),
                };
                (k.clone(), text)
            })
            .collect();
        self.encode_feature_vector(&record, t)
    }
}

/// Reads a CSV dataset with a header row of attribute names. Columns not in
/// the schema (such as the class column) are ignored.
pub fn read_dataset<R: Read>(reader: R, schema: &AttributeSchema, t: u32) -> Result<Vec<FeatureVector>, TreeError> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = csv.headers().map_err(|e| TreeError::Dataset(e.to_string()))?.clone();
    let columns = schema
        .attributes
        .iter()
        .map(|a| headers.iter().position(|h| h == a.name).ok_or_else(|| TreeError::MissingAttribute(a.name.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::new();
    for (line, record) in csv.records().enumerate() {
        let record = record.map_err(|e| TreeError::Dataset(e.to_string()))?;
        let fv = schema
            .attributes
            .iter()
            .zip(&columns)
            .map(|(a, &col)| {
                let value = record
                    .get(col)
                    .ok_or_else(|| TreeError::Dataset(format!("row {}: missing column {}", line + 1, a.name)))?;
                a.encode(value, t)
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(fv);
    }
    Ok(rows)
}
