use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;
use num_bigint::BigUint;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{Message, MsgType, WireError};
use crate::compare::{CompareMessage, CompareMode, SessionId};
use crate::he::{Ciphertext, ProtocolParams, PublicKeys, Scheme};
use crate::levelsite::TraversalToken;
use crate::tree::{EncNode, LevelSlice};

#[derive(Serialize, Deserialize)]
struct KeyMaterialP {
    params: ProtocolParams,
    paillier: String,
    dgk: String,
}

#[derive(Serialize, Deserialize)]
struct SetupP {
    level: usize,
    depth: usize,
    attributes: usize,
    key_fingerprint: String,
    params: ProtocolParams,
    nodes: Vec<NodeP>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum NodeP {
    Leaf { leaf: String },
    Internal { attr: usize, threshold: String, mode: CompareMode, true_child: usize, false_child: usize },
}

#[derive(Serialize, Deserialize)]
struct TokenP {
    session: String,
    next_index: usize,
    features: Vec<String>,
    client: String,
    bogus: bool,
}

#[derive(Serialize, Deserialize)]
struct BlindedP {
    session: String,
    mode: CompareMode,
    value: String,
}

#[derive(Serialize, Deserialize)]
struct BitsP {
    session: String,
    bits: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct SequenceP {
    session: String,
    items: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct ShareVP {
    session: String,
    v: u64,
}

#[derive(Serialize, Deserialize)]
struct ShareWP {
    session: String,
    w: u64,
}

#[derive(Serialize, Deserialize)]
struct ResultP {
    session: String,
    class: String,
}

#[derive(Serialize, Deserialize)]
struct ErrorP {
    session: String,
    code: u16,
    text: String,
}

fn b64(bytes: &[u8]) -> String {
    URL_SAFE_NO_PAD.encode(bytes)
}

fn int(v: &BigUint) -> String {
    if v.bits() == 0 {
        String::new()
    } else {
        b64(&v.to_bytes_be())
    }
}

fn ct(c: &Ciphertext) -> String {
    int(c.value())
}

fn cts(cs: &[Ciphertext]) -> Vec<String> {
    cs.iter().map(ct).collect()
}

fn sid(s: SessionId) -> String {
    s.to_string()
}

fn token_p(t: &TraversalToken) -> TokenP {
    TokenP {
        session: sid(t.session),
        next_index: t.next_index,
        features: cts(&t.enc_features),
        client: t.client_endpoint.clone(),
        bogus: t.bogus,
    }
}

fn json<T: Serialize>(v: &T) -> Vec<u8> {
    serde_json::to_vec(v).expect("payload structs serialize")
}

pub(super) fn encode(msg: &Message) -> Vec<u8> {
    match msg {
        Message::KeyMaterial(k) => {
            json(&KeyMaterialP { params: k.params, paillier: b64(&k.paillier_bytes()), dgk: b64(&k.dgk_bytes()) })
        }
        Message::Setup(s) => json(&SetupP {
            level: s.level,
            depth: s.depth,
            attributes: s.attributes,
            key_fingerprint: s.key_fingerprint.clone(),
            params: s.params,
            nodes: s
                .nodes
                .iter()
                .map(|n| match n {
                    EncNode::Leaf { enc_class } => NodeP::Leaf { leaf: ct(enc_class) },
                    EncNode::Internal { attribute, enc_neg_threshold, mode, true_child, false_child } => {
                        NodeP::Internal {
                            attr: *attribute,
                            threshold: ct(enc_neg_threshold),
                            mode: *mode,
                            true_child: *true_child,
                            false_child: *false_child,
                        }
                    }
                })
                .collect(),
        }),
        Message::SetupAck => Vec::new(),
        Message::ClassifyStart(t) | Message::Traversal(t) => json(&token_p(t)),
        Message::Compare(m) => match m {
            CompareMessage::BlindedValue { session, value, mode } => {
                json(&BlindedP { session: sid(*session), mode: *mode, value: ct(value) })
            }
            CompareMessage::BitVector { session, bits } => json(&BitsP { session: sid(*session), bits: cts(bits) }),
            CompareMessage::MaskedSequence { session, items } => {
                json(&SequenceP { session: sid(*session), items: cts(items) })
            }
            CompareMessage::ShareV { session, v } => json(&ShareVP { session: sid(*session), v: *v }),
            CompareMessage::ShareW { session, w } => json(&ShareWP { session: sid(*session), w: *w }),
        },
        Message::Result { session, enc_class } => json(&ResultP { session: sid(*session), class: ct(enc_class) }),
        Message::Error { session, code, text } => {
            json(&ErrorP { session: sid(*session), code: *code, text: text.clone() })
        }
    }
}

struct Ctx {
    kind: &'static str,
}

impl Ctx {
    fn err(&self, reason: impl ToString) -> WireError {
        WireError::Payload { kind: self.kind, reason: reason.to_string() }
    }

    fn parse<T: DeserializeOwned>(&self, body: &[u8]) -> Result<T, WireError> {
        serde_json::from_slice(body).map_err(|e| self.err(e))
    }

    fn bytes(&self, s: &str) -> Result<Vec<u8>, WireError> {
        URL_SAFE_NO_PAD.decode(s).map_err(|e| self.err(e))
    }

    fn int(&self, s: &str) -> Result<BigUint, WireError> {
        Ok(BigUint::from_bytes_be(&self.bytes(s)?))
    }

    fn ct(&self, scheme: Scheme, s: &str) -> Result<Ciphertext, WireError> {
        Ok(Ciphertext::from_raw(scheme, self.int(s)?))
    }

    fn cts(&self, scheme: Scheme, v: &[String]) -> Result<Vec<Ciphertext>, WireError> {
        v.iter().map(|s| self.ct(scheme, s)).collect()
    }

    fn session(&self, s: &str) -> Result<SessionId, WireError> {
        if s.len() != 32 {
            return Err(self.err("session id must be 32 hex digits"));
        }
        let mut id = [0u8; 16];
        for (i, byte) in id.iter_mut().enumerate() {
            *byte = u8::from_str_radix(&s[2 * i..2 * i + 2], 16).map_err(|_| self.err("session id is not hex"))?;
        }
        Ok(SessionId(id))
    }

    fn token(&self, p: TokenP) -> Result<TraversalToken, WireError> {
        Ok(TraversalToken {
            session: self.session(&p.session)?,
            next_index: p.next_index,
            enc_features: self.cts(Scheme::Paillier, &p.features)?,
            client_endpoint: p.client,
            bogus: p.bogus,
        })
    }
}

pub(super) fn decode(kind: MsgType, body: &[u8]) -> Result<Message, WireError> {
    let cx = Ctx { kind: kind.name() };
    let msg = match kind {
        MsgType::KeyMaterial => {
            let p: KeyMaterialP = cx.parse(body)?;
            let keys =
                PublicKeys::from_bytes(p.params, &cx.bytes(&p.paillier)?, &cx.bytes(&p.dgk)?).map_err(|e| cx.err(e))?;
            Message::KeyMaterial(keys)
        }
        MsgType::Setup => {
            let p: SetupP = cx.parse(body)?;
            let nodes = p
                .nodes
                .iter()
                .map(|n| {
                    Ok(match n {
                        NodeP::Leaf { leaf } => EncNode::Leaf { enc_class: cx.ct(Scheme::Paillier, leaf)? },
                        NodeP::Internal { attr, threshold, mode, true_child, false_child } => EncNode::Internal {
                            attribute: *attr,
                            enc_neg_threshold: cx.ct(Scheme::Paillier, threshold)?,
                            mode: *mode,
                            true_child: *true_child,
                            false_child: *false_child,
                        },
                    })
                })
                .collect::<Result<Vec<_>, WireError>>()?;
            Message::Setup(LevelSlice {
                level: p.level,
                depth: p.depth,
                attributes: p.attributes,
                nodes,
                params: p.params,
                key_fingerprint: p.key_fingerprint,
            })
        }
        MsgType::SetupAck => {
            if !body.is_empty() {
                return Err(cx.err("SETUP_ACK carries no payload"));
            }
            return Ok(Message::SetupAck);
        }
        MsgType::ClassifyStart => Message::ClassifyStart(cx.token(cx.parse(body)?)?),
        MsgType::Traversal => Message::Traversal(cx.token(cx.parse(body)?)?),
        MsgType::BlindedValue => {
            let p: BlindedP = cx.parse(body)?;
            Message::Compare(CompareMessage::BlindedValue {
                session: cx.session(&p.session)?,
                value: cx.ct(Scheme::Paillier, &p.value)?,
                mode: p.mode,
            })
        }
        MsgType::BitVector => {
            let p: BitsP = cx.parse(body)?;
            Message::Compare(CompareMessage::BitVector {
                session: cx.session(&p.session)?,
                bits: cx.cts(Scheme::Dgk, &p.bits)?,
            })
        }
        MsgType::MaskedSequence => {
            let p: SequenceP = cx.parse(body)?;
            Message::Compare(CompareMessage::MaskedSequence {
                session: cx.session(&p.session)?,
                items: cx.cts(Scheme::Dgk, &p.items)?,
            })
        }
        MsgType::ShareV => {
            let p: ShareVP = cx.parse(body)?;
            Message::Compare(CompareMessage::ShareV { session: cx.session(&p.session)?, v: p.v })
        }
        MsgType::ShareW => {
            let p: ShareWP = cx.parse(body)?;
            Message::Compare(CompareMessage::ShareW { session: cx.session(&p.session)?, w: p.w })
        }
        MsgType::Result => {
            let p: ResultP = cx.parse(body)?;
            Message::Result { session: cx.session(&p.session)?, enc_class: cx.ct(Scheme::Paillier, &p.class)? }
        }
        MsgType::Error => {
            let p: ErrorP = cx.parse(body)?;
            Message::Error { session: cx.session(&p.session)?, code: p.code, text: p.text }
        }
    };
    if encode(&msg) != body {
        return Err(WireError::NonCanonical(cx.kind));
    }
    Ok(msg)
}
