use std::sync::{Arc, RwLock};

use rand::Rng;

use super::{apply_padding, plan_traversal, SiteConfig, SiteError, Step, Telemetry, Trace, TraversalToken};
use crate::compare::{CompareMessage, CompareMode, SessionId, SiteSession};
use crate::he::{Ciphertext, HomomorphicKey, PublicKeys};
use crate::net::{serve, Conn, Network, ServerHandle};
use crate::tree::LevelSlice;
use crate::wire::{codes, read_message, write_message, Message};

#[derive(Default)]
struct Installed {
    keys: Option<Arc<PublicKeys>>,
    slice: Option<Arc<LevelSlice>>,
}

/// One level-site: holds a slice and serves traversals over a network.
pub struct LevelSite<N: Network + Clone> {
    config: SiteConfig,
    net: N,
    state: RwLock<Installed>,
    telemetry: Option<Arc<Telemetry>>,
}

impl<N: Network + Clone> LevelSite<N> {
    pub fn new(config: SiteConfig, net: N) -> Arc<Self> {
        Arc::new(Self { config, net, state: RwLock::default(), telemetry: None })
    }

    pub fn with_telemetry(config: SiteConfig, net: N, telemetry: Arc<Telemetry>) -> Arc<Self> {
        Arc::new(Self { config, net, state: RwLock::default(), telemetry: Some(telemetry) })
    }

    pub fn config(&self) -> &SiteConfig {
        &self.config
    }

    /// Accepts the client's public keys. A different key set drops any
    /// installed slice.
    pub fn install_keys(&self, keys: PublicKeys) -> Result<(), SiteError> {
        keys.validate()?;
        let mut state = self.state.write().expect("site state");
        let changed = state.keys.as_ref().is_none_or(|k| k.fingerprint() != keys.fingerprint());
        if changed {
            state.keys = Some(Arc::new(keys));
            state.slice = None;
        }
        Ok(())
    }

    /// Installs this level's slice. Re-installing a slice for the same key
    /// replaces the previous one.
    pub fn install_slice(&self, slice: LevelSlice) -> Result<(), SiteError> {
        let mut state = self.state.write().expect("site state");
        let keys = state.keys.clone().ok_or_else(|| SiteError::Setup("key material must precede the slice".into()))?;
        slice.check(&keys).map_err(|e| SiteError::Setup(e.to_string()))?;
        if slice.level != self.config.level {
            return Err(SiteError::Setup(format!(
                "slice for level {} sent to level {}",
                slice.level, self.config.level
            )));
        }
        if slice.is_last() != self.config.downstream.is_none() {
            return Err(SiteError::Setup(format!(
                "level {} of {} configured {} a downstream endpoint",
                slice.level,
                slice.depth,
                if slice.is_last() { "with" } else { "without" }
            )));
        }
        state.slice = Some(Arc::new(slice));
        Ok(())
    }

    pub fn install(&self, keys: PublicKeys, slice: LevelSlice) -> Result<(), SiteError> {
        self.install_keys(keys)?;
        self.install_slice(slice)
    }

    fn installed(&self) -> Result<(Arc<PublicKeys>, Arc<LevelSlice>), SiteError> {
        let state = self.state.read().expect("site state");
        match (&state.keys, &state.slice) {
            (Some(k), Some(s)) => Ok((k.clone(), s.clone())),
            _ => Err(SiteError::NotReady),
        }
    }

    pub fn serve(self: &Arc<Self>, endpoint: &str) -> std::io::Result<ServerHandle> {
        let listener = self.net.listen(endpoint)?;
        let site = self.clone();
        Ok(serve(self.net.clone(), listener, move |conn| site.handle_connection(conn)))
    }

    /// Serves one inbound connection: setup messages are answered on the
    /// same connection, traversals are processed and the connection closed.
    pub fn handle_connection(&self, mut conn: Box<dyn Conn>) {
        let msg = match read_message(&mut conn) {
            Ok(m) => m,
            Err(e) => {
                log::debug!("level {}: dropped connection: {e}", self.config.level);
                return;
            }
        };
        match msg {
            Message::KeyMaterial(keys) => self.reply_setup(&mut conn, self.install_keys(keys)),
            Message::Setup(slice) => self.reply_setup(&mut conn, self.install_slice(slice)),
            Message::ClassifyStart(token) | Message::Traversal(token) => {
                drop(conn);
                self.handle_traversal(token);
            }
            other => {
                let session = other.session().unwrap_or_default();
                let text = format!("level-site does not accept {}", other.msg_type().name());
                let _ = write_message(&mut conn, &Message::error(session, codes::PROTOCOL, text));
            }
        }
    }

    fn reply_setup(&self, conn: &mut Box<dyn Conn>, result: Result<(), SiteError>) {
        let reply = match result {
            Ok(()) => Message::SetupAck,
            Err(e) => Message::error(SessionId::default(), codes::SETUP, e.to_string()),
        };
        if let Err(e) = write_message(conn, &reply) {
            log::debug!("level {}: setup reply failed: {e}", self.config.level);
        }
    }

    fn trace(&self, session: SessionId, f: impl FnOnce(&mut Trace)) {
        if let Some(t) = &self.telemetry {
            t.update(session, f);
        }
    }

    /// Runs one traversal to completion. Failures on real traversals are
    /// reported to the client.
    pub fn handle_traversal(&self, token: TraversalToken) {
        let session = token.session;
        let bogus = token.bogus;
        let client = token.client_endpoint.clone();
        if let Err(e) = self.process(token) {
            log::warn!("level {} session {session}: {e}", self.config.level);
            self.trace(session, |t| {
                t.error = Some(e.to_string());
                t.ended = true;
            });
            if !bogus {
                let code = match e {
                    SiteError::BadIndex { .. } | SiteError::FeatureCount { .. } => codes::BAD_INDEX,
                    SiteError::Downstream { .. } => codes::DOWNSTREAM,
                    SiteError::Compare(_) | SiteError::Remote { .. } => codes::COMPARISON,
                    SiteError::NotReady => codes::NOT_READY,
                    _ => codes::PROTOCOL,
                };
                let msg = Message::error(session, code, format!("level {}: {e}", self.config.level));
                if let Ok(mut conn) = self.net.connect(&client) {
                    let _ = write_message(&mut conn, &msg);
                }
            }
        }
    }

    fn process(&self, token: TraversalToken) -> Result<(), SiteError> {
        let (keys, slice) = self.installed()?;
        let session = token.session;
        match plan_traversal(&slice, &token)? {
            Step::Reply { enc_class } => {
                let enc_class = keys.paillier.rerandomize(enc_class)?;
                apply_padding(&self.config);
                let mut conn = self
                    .net
                    .connect(&token.client_endpoint)
                    .map_err(|source| SiteError::Client { endpoint: token.client_endpoint.clone(), source })?;
                self.trace(session, |t| t.results += 1);
                write_message(&mut conn, &Message::Result { session, enc_class })?;
                if self.config.bogus_continuation && !slice.is_last() {
                    self.forward(&keys, token, rand::thread_rng().gen(), true)
                } else {
                    self.trace(session, |t| t.ended = true);
                    Ok(())
                }
            }
            Step::Compare { attribute, enc_neg_threshold, mode, true_child, false_child } => {
                let mut conn = self
                    .net
                    .connect(&token.client_endpoint)
                    .map_err(|source| SiteError::Client { endpoint: token.client_endpoint.clone(), source })?;
                let beta = run_site_comparison(
                    &mut conn,
                    keys.clone(),
                    session,
                    &token.enc_features[attribute],
                    enc_neg_threshold,
                    mode,
                )?;
                drop(conn);
                self.trace(session, |t| t.comparisons += 1);
                let next = if beta { true_child } else { false_child };
                self.forward(&keys, token, next, false)
            }
            Step::Bogus { mode } => {
                SiteSession::dummy_round(keys.clone(), mode, &mut rand::rngs::OsRng)?;
                self.trace(session, |t| t.dummy_rounds += 1);
                if slice.is_last() {
                    self.trace(session, |t| t.ended = true);
                    Ok(())
                } else {
                    self.forward(&keys, token, rand::thread_rng().gen(), true)
                }
            }
        }
    }

    /// Sends the traversal on with re-randomized features.
    fn forward(
        &self,
        keys: &PublicKeys,
        token: TraversalToken,
        next_index: usize,
        bogus: bool,
    ) -> Result<(), SiteError> {
        let downstream =
            self.config.downstream.as_ref().ok_or_else(|| SiteError::Protocol("no downstream level".into()))?;
        let enc_features =
            token.enc_features.iter().map(|c| keys.paillier.rerandomize(c)).collect::<Result<Vec<Ciphertext>, _>>()?;
        let next = TraversalToken { next_index, enc_features, bogus, ..token };
        apply_padding(&self.config);
        // Counted before sending: the next site may end the chain before this
        // thread runs again.
        self.trace(next.session, |t| {
            t.forwards += 1;
            if bogus {
                t.bogus_forwards += 1;
            }
        });
        let mut conn = self
            .net
            .connect(downstream)
            .map_err(|source| SiteError::Downstream { endpoint: downstream.clone(), source })?;
        write_message(&mut conn, &Message::Traversal(next))
            .map_err(|e| SiteError::Protocol(format!("forward to {downstream}: {e}")))?;
        Ok(())
    }
}

fn expect_compare(msg: Message) -> Result<CompareMessage, SiteError> {
    match msg {
        Message::Compare(m) => Ok(m),
        Message::Error { code, text, .. } => Err(SiteError::Remote { code, text }),
        other => Err(SiteError::Protocol(format!("unexpected {} during comparison", other.msg_type().name()))),
    }
}

/// Level-site side of one comparison over an open connection to the client.
pub fn run_site_comparison(
    conn: &mut Box<dyn Conn>,
    keys: Arc<PublicKeys>,
    session: SessionId,
    enc_x: &Ciphertext,
    enc_neg_threshold: &Ciphertext,
    mode: CompareMode,
) -> Result<bool, SiteError> {
    let rng = &mut rand::rngs::OsRng;
    let (mut site, blinded) = SiteSession::begin(keys, session, enc_x, enc_neg_threshold, mode, rng)?;
    write_message(conn, &Message::Compare(blinded))?;
    let bits = expect_compare(read_message(conn)?)?;
    let sequence = match site.on_bit_vector(&bits, rng) {
        Ok(s) => s,
        Err(e) => {
            let _ = write_message(conn, &Message::error(session, codes::COMPARISON, e.to_string()));
            return Err(e.into());
        }
    };
    write_message(conn, &Message::Compare(sequence))?;
    write_message(conn, &Message::Compare(site.share_reveal()?))?;
    let reply = expect_compare(read_message(conn)?)?;
    Ok(site.finish(&reply)?)
}
