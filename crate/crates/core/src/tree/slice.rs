use num_bigint::BigUint;

use super::{TreeError, TreeModel, TreeNode};
use crate::compare::CompareMode;
use crate::he::{Ciphertext, HeError, HomomorphicKey, ProtocolParams, PublicKeys};

/// One node of a level slice. Thresholds and class ids are encrypted under
/// the client's Paillier key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EncNode {
    Internal {
        attribute: usize,
        /// `⟦−T⟧`, ready to be added to `⟦x⟧`.
        enc_neg_threshold: Ciphertext,
        mode: CompareMode,
        true_child: usize,
        false_child: usize,
    },
    Leaf {
        enc_class: Ciphertext,
    },
}

/// Everything a level-site holds about the tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelSlice {
    pub level: usize,
    /// Number of levels in the whole tree.
    pub depth: usize,
    /// Length of the feature vector queries carry.
    pub attributes: usize,
    pub nodes: Vec<EncNode>,
    pub params: ProtocolParams,
    /// Fingerprint of the client public keys the slice is encrypted under.
    pub key_fingerprint: String,
}

impl LevelSlice {
    pub fn is_last(&self) -> bool {
        self.level + 1 == self.depth
    }

    /// Checks that the slice belongs to `keys` and is internally consistent.
    pub fn check(&self, keys: &PublicKeys) -> Result<(), TreeError> {
        if self.key_fingerprint != keys.fingerprint() {
            return Err(TreeError::Parameter(format!(
                "slice encrypted for key {} but site holds key {}",
                self.key_fingerprint,
                keys.fingerprint()
            )));
        }
        if self.params != keys.params {
            return Err(TreeError::Parameter("slice parameters differ from key parameters".into()));
        }
        if self.level >= self.depth {
            return Err(TreeError::Parameter(format!("level {} outside depth {}", self.level, self.depth)));
        }
        if self.nodes.is_empty() {
            return Err(TreeError::Parameter(format!("level {} slice has no nodes", self.level)));
        }
        for node in &self.nodes {
            match node {
                EncNode::Leaf { enc_class } => keys.paillier.check(enc_class)?,
                EncNode::Internal { attribute, enc_neg_threshold, .. } => {
                    keys.paillier.check(enc_neg_threshold)?;
                    if *attribute >= self.attributes {
                        return Err(TreeError::Parameter(format!("attribute index {attribute} out of range")));
                    }
                    if self.is_last() {
                        return Err(TreeError::Parameter("internal node on the last level".into()));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Splits a valid tree into one slice per level, encrypting every threshold
/// as `⟦encode_signed(−T)⟧` and every class id as `⟦class_id⟧` with fresh
/// randomness.
pub fn partition_and_encrypt(
    model: &TreeModel,
    keys: &PublicKeys,
    params: &ProtocolParams,
) -> Result<Vec<LevelSlice>, TreeError> {
    if keys.params != *params {
        return Err(TreeError::Parameter("public keys were generated for different parameters".into()));
    }
    keys.validate()?;
    model.check(params.t)?;
    let pk = &keys.paillier;
    let fingerprint = keys.fingerprint();
    let depth = model.depth();
    model
        .levels
        .iter()
        .enumerate()
        .map(|(level, nodes)| {
            let nodes = nodes
                .iter()
                .map(|node| {
                    Ok(match node {
                        TreeNode::Leaf { class_id } => {
                            EncNode::Leaf { enc_class: pk.encrypt(&BigUint::from(*class_id))? }
                        }
                        TreeNode::Internal { attribute, threshold, mode, true_child, false_child } => {
                            let neg = pk.encode_signed(&-num_bigint::BigInt::from(*threshold))?;
                            EncNode::Internal {
                                attribute: *attribute,
                                enc_neg_threshold: pk.encrypt(&neg)?,
                                mode: *mode,
                                true_child: true_child.expect("validated"),
                                false_child: false_child.expect("validated"),
                            }
                        }
                    })
                })
                .collect::<Result<Vec<_>, HeError>>()?;
            Ok(LevelSlice {
                level,
                depth,
                attributes: model.schema.attributes.len(),
                nodes,
                params: *params,
                key_fingerprint: fingerprint.clone(),
            })
        })
        .collect()
}
