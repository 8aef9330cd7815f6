//! The querying party: encrypts a feature vector, starts the traversal at
//! level 0, answers comparison rounds from level-sites, and decrypts the
//! class that comes back.

use std::collections::HashMap;
use std::sync::mpsc::{self, Sender};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use num_traits::ToPrimitive;
use thiserror::Error;

use crate::compare::{ClientSession, CompareError, CompareMessage, SessionId};
use crate::he::{ClientKeys, HeError, HomomorphicKey};
use crate::levelsite::TraversalToken;
use crate::net::{serve, Conn, Network, ServerHandle};
use crate::wire::{codes, read_message, write_message, Message, WireError};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("level 0 at {endpoint} unreachable: {source}")]
    Connect { endpoint: String, source: std::io::Error },
    #[error("level-site error {code}: {text}")]
    Remote { code: u16, text: String },
    #[error("no result within {0:?}")]
    Timeout(Duration),
    #[error("result decrypts to {0}, not a class id")]
    BadClass(String),
    #[error("feature {index} = {value} does not fit {t} bits")]
    FeatureRange { index: usize, value: u64, t: u32 },
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    He(#[from] HeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Classification {
    pub session: SessionId,
    pub class_id: usize,
    /// Comparison rounds the client took part in.
    pub comparisons: u32,
    /// From encrypting the features to decrypting the result.
    pub wall: Duration,
}

enum Outcome {
    Class(Result<usize, ClientError>),
    Remote(u16, String),
}

struct Pending {
    comparisons: u32,
    done: Sender<Outcome>,
}

struct Inner {
    keys: Arc<ClientKeys>,
    pending: Mutex<HashMap<SessionId, Pending>>,
}

pub struct Client<N: Network + Clone> {
    inner: Arc<Inner>,
    net: N,
    level0: String,
    server: ServerHandle,
    timeout: Duration,
}

impl<N: Network + Clone> Client<N> {
    /// Starts listening on `listen` for comparison rounds and results.
    pub fn start(keys: Arc<ClientKeys>, net: N, listen: &str, level0: impl Into<String>) -> std::io::Result<Self> {
        let inner = Arc::new(Inner { keys, pending: Mutex::new(HashMap::new()) });
        let listener = net.listen(listen)?;
        let handler = inner.clone();
        let server = serve(net.clone(), listener, move |conn| handler.handle_connection(conn));
        Ok(Self { inner, net, level0: level0.into(), server, timeout: Duration::from_secs(120) })
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn endpoint(&self) -> &str {
        self.server.endpoint()
    }

    pub fn keys(&self) -> &Arc<ClientKeys> {
        &self.inner.keys
    }

    /// Runs one private classification of an encoded feature vector.
    pub fn classify(&self, features: &[u64]) -> Result<Classification, ClientError> {
        let start = Instant::now();
        let keys = &self.inner.keys;
        let t = keys.params.t;
        if let Some((index, &value)) = features.iter().enumerate().find(|(_, &v)| v >> t != 0) {
            return Err(ClientError::FeatureRange { index, value, t });
        }
        let pk = &keys.paillier.public;
        let enc_features = features.iter().map(|&v| pk.encrypt_u64(v)).collect::<Result<Vec<_>, _>>()?;
        let session = SessionId::random();
        let (tx, rx) = mpsc::channel();
        self.inner.pending.lock().expect("pending").insert(session, Pending { comparisons: 0, done: tx });

        let token = TraversalToken {
            session,
            next_index: 0,
            enc_features,
            client_endpoint: self.endpoint().to_string(),
            bogus: false,
        };
        let sent = self
            .net
            .connect(&self.level0)
            .map_err(|source| ClientError::Connect { endpoint: self.level0.clone(), source })
            .and_then(|mut conn| Ok(write_message(&mut conn, &Message::ClassifyStart(token))?));
        let outcome = match sent {
            Ok(()) => rx.recv_timeout(self.timeout).map_err(|_| ClientError::Timeout(self.timeout)),
            Err(e) => Err(e),
        };
        let pending = self.inner.pending.lock().expect("pending").remove(&session);
        let comparisons = pending.map_or(0, |p| p.comparisons);
        let class_id = match outcome? {
            Outcome::Class(c) => c?,
            Outcome::Remote(code, text) => return Err(ClientError::Remote { code, text }),
        };
        Ok(Classification { session, class_id, comparisons, wall: start.elapsed() })
    }
}

impl Inner {
    fn handle_connection(&self, mut conn: Box<dyn Conn>) {
        let msg = match read_message(&mut conn) {
            Ok(m) => m,
            Err(e) => {
                log::debug!("client: dropped connection: {e}");
                return;
            }
        };
        match msg {
            Message::Compare(first @ CompareMessage::BlindedValue { .. }) => {
                let session = first.session();
                if !self.pending.lock().expect("pending").contains_key(&session) {
                    let _ = write_message(&mut conn, &Message::error(session, codes::PROTOCOL, "unknown session"));
                    return;
                }
                if let Err(e) = self.answer_comparison(&mut conn, first) {
                    log::warn!("client session {session}: comparison failed: {e}");
                    let _ = write_message(&mut conn, &Message::error(session, codes::COMPARISON, e.to_string()));
                }
            }
            Message::Result { session, enc_class } => {
                let class = self
                    .keys
                    .paillier
                    .private
                    .decrypt(&enc_class)
                    .map_err(ClientError::from)
                    .and_then(|m| m.to_usize().ok_or_else(|| ClientError::BadClass(m.to_string())));
                self.finish(session, Outcome::Class(class));
            }
            Message::Error { session, code, text } => self.finish(session, Outcome::Remote(code, text)),
            other => log::debug!("client: ignoring unsolicited {}", other.msg_type().name()),
        }
    }

    fn finish(&self, session: SessionId, outcome: Outcome) {
        if let Some(p) = self.pending.lock().expect("pending").get(&session) {
            let _ = p.done.send(outcome);
        }
    }

    fn answer_comparison(&self, conn: &mut Box<dyn Conn>, first: CompareMessage) -> Result<(), CompareError> {
        let session = first.session();
        let mut state = ClientSession::new(self.keys.clone(), session);
        let rng = &mut rand::rngs::OsRng;
        let mut msg = first;
        loop {
            let reply = state.handle(&msg, rng)?;
            if state.is_done() {
                // Counted before the reply so the level-site cannot finish the
                // query before the count is visible.
                if let Some(p) = self.pending.lock().expect("pending").get_mut(&session) {
                    p.comparisons += 1;
                }
            }
            if let Some(reply) = reply {
                write_message(conn, &Message::Compare(reply)).map_err(|_| CompareError::Aborted)?;
            }
            if state.is_done() {
                return Ok(());
            }
            msg = match read_message(conn) {
                Ok(Message::Compare(m)) => m,
                _ => return Err(CompareError::Aborted),
            };
        }
    }
}
