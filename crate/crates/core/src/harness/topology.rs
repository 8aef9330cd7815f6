//! A full deployment in one process: `d` level-sites and a client over any
//! network.

use std::sync::Arc;
use std::time::Duration;

use thiserror::Error;

use crate::client::{Classification, Client, ClientError};
use crate::he::{ClientKeys, PublicKeys};
use crate::levelsite::{LevelSite, SiteConfig, SiteError, Telemetry, Trace};
use crate::net::{Network, ServerHandle};
use crate::tree::{partition_and_encrypt, LevelSlice, TreeError, TreeModel};
use crate::wire::{read_message, write_message, Message, WireError};

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("endpoint {endpoint}: {source}")]
    Io { endpoint: String, source: std::io::Error },
    #[error("setup of {endpoint} rejected: {text}")]
    Rejected { endpoint: String, text: String },
    #[error("chain for the query did not finish")]
    Incomplete,
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Site(#[from] SiteError),
    #[error(transparent)]
    Client(#[from] ClientError),
}

#[derive(Debug, Clone, Default)]
pub struct TopologyOptions {
    pub padding: Option<(u64, u64)>,
    pub bogus_continuation: bool,
}

/// Sends key material and a slice to a level-site over the wire and waits
/// for both acknowledgements.
pub fn deploy_slice<N: Network>(
    net: &N,
    endpoint: &str,
    keys: &PublicKeys,
    slice: &LevelSlice,
) -> Result<(), TopologyError> {
    for msg in [Message::KeyMaterial(keys.clone()), Message::Setup(slice.clone())] {
        let io = |source| TopologyError::Io { endpoint: endpoint.to_string(), source };
        let mut conn = net.connect(endpoint).map_err(io)?;
        write_message(&mut conn, &msg)?;
        match read_message(&mut conn)? {
            Message::SetupAck => {}
            Message::Error { text, .. } => {
                return Err(TopologyError::Rejected { endpoint: endpoint.to_string(), text })
            }
            other => {
                return Err(TopologyError::Rejected {
                    endpoint: endpoint.to_string(),
                    text: format!("unexpected {}", other.msg_type().name()),
                })
            }
        }
    }
    Ok(())
}

pub struct Topology<N: Network + Clone> {
    pub client: Client<N>,
    pub telemetry: Arc<Telemetry>,
    pub endpoints: Vec<String>,
    depth: usize,
    _servers: Vec<ServerHandle>,
}

impl<N: Network + Clone> Topology<N> {
    /// Starts one level-site per tree level on `host:0`-style endpoints,
    /// deploys the partitioned tree over the wire, and starts the client.
    pub fn launch(
        net: N,
        host: &str,
        keys: Arc<ClientKeys>,
        model: &TreeModel,
        options: &TopologyOptions,
    ) -> Result<Self, TopologyError> {
        let public = keys.public();
        let slices = partition_and_encrypt(model, &public, &keys.params)?;
        let telemetry = Arc::new(Telemetry::default());
        let listen = format!("{host}:0");
        let mut servers = Vec::new();
        let mut endpoints = vec![String::new(); slices.len()];
        let mut downstream = None;
        for level in (0..slices.len()).rev() {
            let config = SiteConfig {
                level,
                downstream: downstream.clone(),
                padding: options.padding,
                bogus_continuation: options.bogus_continuation,
            };
            let site = LevelSite::with_telemetry(config, net.clone(), telemetry.clone());
            let handle =
                site.serve(&listen).map_err(|source| TopologyError::Io { endpoint: listen.clone(), source })?;
            endpoints[level] = handle.endpoint().to_string();
            downstream = Some(handle.endpoint().to_string());
            servers.push(handle);
        }
        for (endpoint, slice) in endpoints.iter().zip(&slices) {
            deploy_slice(&net, endpoint, &public, slice)?;
        }
        let client = Client::start(keys, net, &listen, endpoints[0].clone())
            .map_err(|source| TopologyError::Io { endpoint: listen.clone(), source })?;
        Ok(Self { client, telemetry, endpoints, depth: slices.len(), _servers: servers })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Classifies one vector and waits for the whole chain, including any
    /// bogus continuation, to finish.
    pub fn classify(&self, features: &[u64]) -> Result<(Classification, Trace), TopologyError> {
        let result = self.client.classify(features)?;
        let trace =
            self.telemetry.wait_end(result.session, Duration::from_secs(120)).ok_or(TopologyError::Incomplete)?;
        Ok((result, trace))
    }
}
