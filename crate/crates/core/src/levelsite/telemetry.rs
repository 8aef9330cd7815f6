use std::collections::HashMap;
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use crate::compare::SessionId;

/// Per-query record of what the level-sites did.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    /// Traversals sent downstream, real and bogus.
    pub forwards: u32,
    pub bogus_forwards: u32,
    pub comparisons: u32,
    pub dummy_rounds: u32,
    pub results: u32,
    /// Set by the site where the chain stops.
    pub ended: bool,
    pub error: Option<String>,
}

/// Hop counters shared by in-process level-sites, used by tests and the
/// benchmark to observe chain length.
#[derive(Debug, Default)]
pub struct Telemetry {
    traces: Mutex<HashMap<SessionId, Trace>>,
    changed: Condvar,
}

impl Telemetry {
    pub fn update(&self, session: SessionId, f: impl FnOnce(&mut Trace)) {
        let mut traces = self.traces.lock().expect("telemetry lock");
        f(traces.entry(session).or_default());
        self.changed.notify_all();
    }

    pub fn get(&self, session: SessionId) -> Option<Trace> {
        self.traces.lock().expect("telemetry lock").get(&session).cloned()
    }

    /// Waits until the chain for `session` has ended and removes its trace.
    pub fn wait_end(&self, session: SessionId, timeout: Duration) -> Option<Trace> {
        let deadline = Instant::now() + timeout;
        let mut traces = self.traces.lock().expect("telemetry lock");
        loop {
            if traces.get(&session).is_some_and(|t| t.ended) {
                return traces.remove(&session);
            }
            let now = Instant::now();
            if now >= deadline {
                return None;
            }
            traces = self.changed.wait_timeout(traces, deadline - now).expect("telemetry lock").0;
        }
    }
}
