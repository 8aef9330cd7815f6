//! Reading and writing the on-disk artifacts.

use std::path::Path;

use ppdt::he::{ClientKeys, PublicKeys};
use ppdt::tree::{AttributeSchema, LevelSlice, TreeModel};
use ppdt::wire::{self, Message};

use crate::error::CliError;

pub fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::file(path, e))
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::file(path, e))
}

pub fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::file(path, e))
}

fn frame(path: &Path) -> Result<Message, CliError> {
    wire::decode(&read(path)?).map_err(|e| CliError::format(path.display(), e))
}

pub fn public_keys(path: &Path) -> Result<PublicKeys, CliError> {
    match frame(path)? {
        Message::KeyMaterial(k) => Ok(k),
        other => {
            Err(CliError::format(path.display(), format!("expected KEY_MATERIAL, found {}", other.msg_type().name())))
        }
    }
}

pub fn private_keys(path: &Path) -> Result<ClientKeys, CliError> {
    ClientKeys::from_private_bytes(&read(path)?).map_err(|e| CliError::format(path.display(), e))
}

pub fn slice(path: &Path) -> Result<LevelSlice, CliError> {
    match frame(path)? {
        Message::Setup(s) => Ok(s),
        other => Err(CliError::format(path.display(), format!("expected SETUP, found {}", other.msg_type().name()))),
    }
}

pub fn slice_name(level: usize) -> String {
    format!("slice-{level}.bin")
}

/// Parses a tree file and validates it for `t`-bit features.
pub fn tree(path: &Path, t: u32) -> Result<TreeModel, CliError> {
    let model = TreeModel::from_json(&read_text(path)?).map_err(|e| CliError::format(path.display(), e))?;
    let violations = model.validate(t);
    if !violations.is_empty() {
        let list: Vec<String> = violations.iter().map(ToString::to_string).collect();
        return Err(CliError::format(path.display(), format!("invalid tree: {}", list.join("; "))));
    }
    Ok(model)
}

pub fn schema(path: &Path) -> Result<AttributeSchema, CliError> {
    serde_json::from_str(&read_text(path)?).map_err(|e| CliError::format(path.display(), e))
}
