//! Fixed instances of every catalog message. Their encodings are checked in
//! as golden vectors and seed the decoder fuzz corpus.

use num_bigint::BigUint;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::{codes, Message};
use crate::compare::{CompareMessage, CompareMode, SessionId};
use crate::he::{Ciphertext, ClientKeys, ProtocolParams, Scheme};
use crate::levelsite::TraversalToken;
use crate::tree::{EncNode, LevelSlice};

const SESSION: SessionId =
    SessionId([0x00, 0x11, 0x22, 0x33, 0x44, 0x55, 0x66, 0x77, 0x88, 0x99, 0xaa, 0xbb, 0xcc, 0xdd, 0xee, 0xff]);

fn ct(scheme: Scheme, hex: &str) -> Ciphertext {
    Ciphertext::from_raw(scheme, BigUint::parse_bytes(hex.as_bytes(), 16).expect("hex literal"))
}

/// Deterministic `t = 4` test keys, generated from a fixed seed.
pub fn reference_keys() -> ClientKeys {
    let mut rng = ChaCha20Rng::seed_from_u64(0x5eed);
    ClientKeys::generate_with(ProtocolParams::testing(4), &mut rng).expect("test parameters are valid")
}

/// `(file stem, message)` for one instance of each message type.
pub fn reference_messages() -> Vec<(&'static str, Message)> {
    let public = reference_keys().public();
    let p = |hex| ct(Scheme::Paillier, hex);
    let d = |hex| ct(Scheme::Dgk, hex);
    let token = TraversalToken {
        session: SESSION,
        next_index: 0,
        enc_features: vec![p("0123456789abcdef"), p("fedcba9876543210")],
        client_endpoint: "127.0.0.1:7000".into(),
        bogus: false,
    };
    let slice = LevelSlice {
        level: 0,
        depth: 2,
        attributes: 2,
        nodes: vec![EncNode::Internal {
            attribute: 1,
            enc_neg_threshold: p("c0ffee"),
            mode: CompareMode::Equality,
            true_child: 1,
            false_child: 0,
        }],
        params: public.params,
        key_fingerprint: public.fingerprint(),
    };
    let leaves = LevelSlice {
        level: 1,
        depth: 2,
        attributes: 2,
        nodes: vec![EncNode::Leaf { enc_class: p("0badf00d") }, EncNode::Leaf { enc_class: p("01") }],
        ..slice.clone()
    };
    vec![
        ("key_material", Message::KeyMaterial(public)),
        ("setup", Message::Setup(slice)),
        ("setup_leaves", Message::Setup(leaves)),
        ("setup_ack", Message::SetupAck),
        ("classify_start", Message::ClassifyStart(token.clone())),
        ("traversal", Message::Traversal(TraversalToken { next_index: 1, bogus: true, ..token })),
        (
            "blinded_value",
            Message::Compare(CompareMessage::BlindedValue {
                session: SESSION,
                value: p("1f2e3d4c5b6a7988"),
                mode: CompareMode::Numeric,
            }),
        ),
        (
            "bit_vector",
            Message::Compare(CompareMessage::BitVector {
                session: SESSION,
                bits: ["01", "02", "03", "04", "05"].into_iter().map(d).collect(),
            }),
        ),
        (
            "masked_sequence",
            Message::Compare(CompareMessage::MaskedSequence {
                session: SESSION,
                items: ["0a", "0b", "0c", "0d", "0e", "0f"].into_iter().map(d).collect(),
            }),
        ),
        ("share_v", Message::Compare(CompareMessage::ShareV { session: SESSION, v: 0x8000_0001 })),
        ("share_w", Message::Compare(CompareMessage::ShareW { session: SESSION, w: 0x8000_0000 })),
        ("result", Message::Result { session: SESSION, enc_class: p("00ff00ff00ff") }),
        ("error", Message::error(SESSION, codes::BAD_INDEX, "level 3: node index 9 outside level of 4 nodes")),
    ]
}
