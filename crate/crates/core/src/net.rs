//! Byte-stream transports. Level-sites and clients speak framed messages
//! over any [`Network`]; TCP is the real deployment, [`MemNetwork`] the
//! in-process simulation.

use std::collections::HashMap;
use std::io::{self, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

pub trait Conn: Read + Write + Send {}

impl<T: Read + Write + Send> Conn for T {}

pub trait Listener: Send {
    fn accept(&self) -> io::Result<Box<dyn Conn>>;
    /// Address peers use to reach this listener.
    fn endpoint(&self) -> String;
}

pub trait Network: Send + Sync + 'static {
    fn connect(&self, endpoint: &str) -> io::Result<Box<dyn Conn>>;
    /// Binds `endpoint`; a port of 0 picks a free one.
    fn listen(&self, endpoint: &str) -> io::Result<Box<dyn Listener>>;
}

impl<N: Network + ?Sized> Network for Arc<N> {
    fn connect(&self, endpoint: &str) -> io::Result<Box<dyn Conn>> {
        (**self).connect(endpoint)
    }

    fn listen(&self, endpoint: &str) -> io::Result<Box<dyn Listener>> {
        (**self).listen(endpoint)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct TcpNetwork;

struct TcpAcceptor(TcpListener);

impl Listener for TcpAcceptor {
    fn accept(&self) -> io::Result<Box<dyn Conn>> {
        let (stream, _) = self.0.accept()?;
        stream.set_nodelay(true)?;
        Ok(Box::new(stream))
    }

    fn endpoint(&self) -> String {
        self.0.local_addr().map(|a| a.to_string()).unwrap_or_default()
    }
}

impl Network for TcpNetwork {
    fn connect(&self, endpoint: &str) -> io::Result<Box<dyn Conn>> {
        let stream = TcpStream::connect(endpoint)?;
        stream.set_nodelay(true)?;
        Ok(Box::new(stream))
    }

    fn listen(&self, endpoint: &str) -> io::Result<Box<dyn Listener>> {
        Ok(Box::new(TcpAcceptor(TcpListener::bind(endpoint)?)))
    }
}

/// One end of an in-memory duplex pipe.
pub struct MemConn {
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
    pending: Vec<u8>,
    pos: usize,
}

impl MemConn {
    pub fn pair() -> (MemConn, MemConn) {
        let (a_tx, a_rx) = mpsc::channel();
        let (b_tx, b_rx) = mpsc::channel();
        (
            MemConn { tx: a_tx, rx: b_rx, pending: Vec::new(), pos: 0 },
            MemConn { tx: b_tx, rx: a_rx, pending: Vec::new(), pos: 0 },
        )
    }
}

impl Read for MemConn {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        if buf.is_empty() {
            return Ok(0);
        }
        while self.pos == self.pending.len() {
            match self.rx.recv() {
                Ok(chunk) => {
                    self.pending = chunk;
                    self.pos = 0;
                }
                Err(_) => return Ok(0),
            }
        }
        let n = buf.len().min(self.pending.len() - self.pos);
        buf[..n].copy_from_slice(&self.pending[self.pos..self.pos + n]);
        self.pos += n;
        Ok(n)
    }
}

impl Write for MemConn {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        if buf.is_empty() {
            return Ok(0);
        }
        self.tx.send(buf.to_vec()).map_err(|_| io::Error::from(io::ErrorKind::BrokenPipe))?;
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

/// Named in-process endpoints connected by channel pipes. Clones share the
/// same namespace.
#[derive(Clone, Default)]
pub struct MemNetwork {
    inner: Arc<MemInner>,
}

#[derive(Default)]
struct MemInner {
    listeners: Mutex<HashMap<String, Sender<MemConn>>>,
    next: AtomicU64,
}

struct MemAcceptor {
    name: String,
    incoming: Mutex<Receiver<MemConn>>,
    net: MemNetwork,
}

impl Listener for MemAcceptor {
    fn accept(&self) -> io::Result<Box<dyn Conn>> {
        let conn = self
            .incoming
            .lock()
            .expect("acceptor lock")
            .recv()
            .map_err(|_| io::Error::from(io::ErrorKind::NotConnected))?;
        Ok(Box::new(conn))
    }

    fn endpoint(&self) -> String {
        self.name.clone()
    }
}

impl Drop for MemAcceptor {
    fn drop(&mut self) {
        self.net.inner.listeners.lock().expect("listener table").remove(&self.name);
    }
}

impl MemNetwork {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Network for MemNetwork {
    fn connect(&self, endpoint: &str) -> io::Result<Box<dyn Conn>> {
        let table = self.inner.listeners.lock().expect("listener table");
        let tx = table.get(endpoint).ok_or_else(|| io::Error::from(io::ErrorKind::ConnectionRefused))?;
        let (near, far) = MemConn::pair();
        tx.send(far).map_err(|_| io::Error::from(io::ErrorKind::ConnectionRefused))?;
        Ok(Box::new(near))
    }

    fn listen(&self, endpoint: &str) -> io::Result<Box<dyn Listener>> {
        let name = match endpoint.strip_suffix(":0") {
            Some(prefix) => format!("{prefix}:{}", self.inner.next.fetch_add(1, Ordering::Relaxed) + 1),
            None => endpoint.to_string(),
        };
        let mut table = self.inner.listeners.lock().expect("listener table");
        if table.contains_key(&name) {
            return Err(io::Error::from(io::ErrorKind::AddrInUse));
        }
        let (tx, rx) = mpsc::channel();
        table.insert(name.clone(), tx);
        Ok(Box::new(MemAcceptor { name, incoming: Mutex::new(rx), net: self.clone() }))
    }
}

/// Adds a fixed latency to every connection set-up, standing in for one
/// network hop between roles.
#[derive(Clone)]
pub struct DelayedNetwork<N> {
    inner: N,
    delay: Duration,
}

impl<N: Network> DelayedNetwork<N> {
    pub fn new(inner: N, delay: Duration) -> Self {
        Self { inner, delay }
    }

    pub fn delay(&self) -> Duration {
        self.delay
    }
}

impl<N: Network> Network for DelayedNetwork<N> {
    fn connect(&self, endpoint: &str) -> io::Result<Box<dyn Conn>> {
        if !self.delay.is_zero() {
            std::thread::sleep(self.delay);
        }
        self.inner.connect(endpoint)
    }

    fn listen(&self, endpoint: &str) -> io::Result<Box<dyn Listener>> {
        self.inner.listen(endpoint)
    }
}

/// Accept loop running on its own thread; each connection gets a thread.
pub struct ServerHandle {
    endpoint: String,
    stop: Arc<AtomicBool>,
    wake: Box<dyn Fn() + Send + Sync>,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    /// Stops accepting. Connections already accepted run to completion.
    pub fn shutdown(mut self) {
        self.stop_now();
    }

    fn stop_now(&mut self) {
        if let Some(thread) = self.thread.take() {
            self.stop.store(true, Ordering::SeqCst);
            (self.wake)();
            let _ = thread.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop_now();
    }
}

pub fn serve<N, F>(net: N, listener: Box<dyn Listener>, handler: F) -> ServerHandle
where
    N: Network + Clone,
    F: Fn(Box<dyn Conn>) + Send + Sync + 'static,
{
    let endpoint = listener.endpoint();
    let stop = Arc::new(AtomicBool::new(false));
    let handler = Arc::new(handler);
    let thread = {
        let stop = stop.clone();
        std::thread::spawn(move || loop {
            let conn = listener.accept();
            if stop.load(Ordering::SeqCst) {
                break;
            }
            match conn {
                Ok(conn) => {
                    let handler = handler.clone();
                    std::thread::spawn(move || handler(conn));
                }
                Err(e) => {
                    log::warn!("accept on {} failed: {e}", listener.endpoint());
                    if e.kind() == io::ErrorKind::NotConnected {
                        break;
                    }
                }
            }
        })
    };
    let wake_endpoint = endpoint.clone();
    let wake = Box::new(move || {
        let _ = net.connect(&wake_endpoint);
    });
    ServerHandle { endpoint, stop, wake, thread: Some(thread) }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn echo<N: Network>(net: N) {
        let listener = net.listen("127.0.0.1:0").unwrap();
        let endpoint = listener.endpoint();
        let server = std::thread::spawn(move || {
            let mut conn = listener.accept().unwrap();
            let mut buf = [0u8; 5];
            conn.read_exact(&mut buf).unwrap();
            conn.write_all(&buf).unwrap();
        });
        let mut conn = net.connect(&endpoint).unwrap();
        conn.write_all(b"he").unwrap();
        conn.write_all(b"llo").unwrap();
        let mut back = Vec::new();
        conn.read_to_end(&mut back).unwrap();
        assert_eq!(back, b"hello");
        server.join().unwrap();
    }

    #[test]
    fn tcp_echo() {
        echo(TcpNetwork);
    }

    #[test]
    fn mem_echo_and_refusal() {
        let net = MemNetwork::new();
        echo(net.clone());
        assert_eq!(net.connect("127.0.0.1:1").err().unwrap().kind(), io::ErrorKind::ConnectionRefused);
        let a = net.listen("site:7").unwrap();
        assert!(net.listen("site:7").is_err());
        drop(a);
        assert!(net.connect("site:7").is_err());
    }

    #[test]
    fn delayed_connect() {
        let net = DelayedNetwork::new(MemNetwork::new(), Duration::from_millis(30));
        let listener = net.listen("x:0").unwrap();
        let start = std::time::Instant::now();
        let _conn = net.connect(&listener.endpoint()).unwrap();
        assert!(start.elapsed() >= Duration::from_millis(30));
    }
}
