//! Feature vectors from the command line or a CSV file.

use std::path::Path;

use ppdt::tree::{read_dataset, AttributeSchema, FeatureVector};

use crate::error::CliError;

/// A JSON object mapping attribute names to raw values, or a CSV dataset
/// with one column per attribute.
pub fn feature_vectors(
    schema: &AttributeSchema,
    t: u32,
    json: Option<&str>,
    csv: Option<&Path>,
) -> Result<Vec<FeatureVector>, CliError> {
    match (json, csv) {
        (Some(text), None) => {
            let value: serde_json::Value = serde_json::from_str(text).map_err(|e| CliError::format("--input", e))?;
            let fv = schema.encode_json(&value, t).map_err(|e| CliError::format("--input", e))?;
            Ok(vec![fv])
        }
        (None, Some(path)) => {
            let file = std::fs::File::open(path).map_err(|e| CliError::file(path, e))?;
            read_dataset(file, schema, t).map_err(|e| CliError::format(path.display(), e))
        }
        _ => Err(CliError::Parameter("give exactly one of --input and --csv".into())),
    }
}
