//! WebSocket bridge between the tick loop and browser clients.
//!
//! The tick loop owns the simulation. At each tick boundary it hands the
//! tick's envelopes to [`Bridge::publish`] and collects client events with
//! [`Bridge::take_inbound`]. Each client has its own thread and a bounded
//! outbound queue that drops its oldest frames when the client falls behind.
//! Plain HTTP requests on the same port get the static UI.

use std::collections::{BTreeSet, VecDeque};
use std::io::{self, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::path::{Component, Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use diffbot_core::bus::{Envelope, Inbound};
use log::{debug, info, warn};
use tungstenite::{Message, WebSocket};

use crate::frames::{self, ClientMessage};

const CONSOLE_PAGE: &str = include_str!("../assets/console.html");
const POLL: Duration = Duration::from_millis(10);

#[derive(Debug, Clone)]
pub struct BridgeConfig {
    /// Outbound frames buffered per client before the oldest are dropped.
    pub queue_capacity: usize,
    /// Directory served over HTTP; the built-in console page when absent.
    pub ui_dir: Option<PathBuf>,
}

impl Default for BridgeConfig {
    fn default() -> Self {
        Self {
            queue_capacity: 512,
            ui_dir: None,
        }
    }
}

/// Outbound side of one client.
#[derive(Debug)]
pub struct ClientQueue {
    frames: Mutex<VecDeque<String>>,
    capacity: usize,
    dropped: AtomicU64,
    /// `None` means every topic.
    filter: Mutex<Option<BTreeSet<String>>>,
    closed: AtomicBool,
}

impl ClientQueue {
    pub fn new(capacity: usize) -> Self {
        Self {
            frames: Mutex::new(VecDeque::new()),
            capacity: capacity.max(1),
            dropped: AtomicU64::new(0),
            filter: Mutex::new(None),
            closed: AtomicBool::new(false),
        }
    }

    pub fn wants(&self, topic: &str) -> bool {
        match &*self.filter.lock().unwrap() {
            Some(f) => f.contains(topic),
            None => true,
        }
    }

    pub fn set_filter(&self, topics: BTreeSet<String>) {
        *self.filter.lock().unwrap() = Some(topics);
    }

    /// Appends a frame, evicting the oldest one when full.
    pub fn push(&self, frame: String) {
        let mut q = self.frames.lock().unwrap();
        if q.len() >= self.capacity {
            q.pop_front();
            self.dropped.fetch_add(1, Ordering::Relaxed);
        }
        q.push_back(frame);
    }

    pub fn take(&self) -> Vec<String> {
        self.frames.lock().unwrap().drain(..).collect()
    }

    pub fn dropped(&self) -> u64 {
        self.dropped.load(Ordering::Relaxed)
    }
}

struct Shared {
    clients: Mutex<Vec<Arc<ClientQueue>>>,
    shutdown: AtomicBool,
    tick: AtomicU64,
    cfg: BridgeConfig,
}

pub struct Bridge {
    addr: SocketAddr,
    shared: Arc<Shared>,
    inbound: Receiver<Inbound>,
    accept: Option<JoinHandle<()>>,
}

impl Bridge {
    /// Binds the listener; fails if the port is taken.
    pub fn bind(addr: impl ToSocketAddrs, cfg: BridgeConfig) -> io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let shared = Arc::new(Shared {
            clients: Mutex::new(Vec::new()),
            shutdown: AtomicBool::new(false),
            tick: AtomicU64::new(0),
            cfg,
        });
        let (tx, rx) = mpsc::channel();
        let accept = {
            let shared = Arc::clone(&shared);
            thread::Builder::new()
                .name("bridge-accept".into())
                .spawn(move || accept_loop(listener, shared, tx))?
        };
        info!("bridge listening on {addr}");
        Ok(Self {
            addr,
            shared,
            inbound: rx,
            accept: Some(accept),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn client_count(&self) -> usize {
        self.shared.clients.lock().unwrap().len()
    }

    /// Queues one tick's envelopes for every connected client.
    pub fn publish(&self, envelopes: &[Envelope]) {
        if let Some(last) = envelopes.last() {
            self.shared.tick.store(last.tick, Ordering::Relaxed);
        }
        let mut clients = self.shared.clients.lock().unwrap();
        clients.retain(|c| !c.closed.load(Ordering::Relaxed));
        if clients.is_empty() {
            return;
        }
        for env in envelopes {
            let mut encoded = None;
            for c in clients.iter().filter(|c| c.wants(&env.topic)) {
                let frame = encoded.get_or_insert_with(|| frames::encode(env));
                c.push(frame.clone());
            }
        }
    }

    /// Client events received since the previous call, in arrival order.
    pub fn take_inbound(&self) -> Vec<Inbound> {
        self.inbound.try_iter().collect()
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        self.shared.shutdown.store(true, Ordering::Relaxed);
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }
}

impl Drop for Bridge {
    fn drop(&mut self) {
        self.stop();
    }
}

fn accept_loop(listener: TcpListener, shared: Arc<Shared>, tx: Sender<Inbound>) {
    let mut workers: Vec<JoinHandle<()>> = Vec::new();
    while !shared.shutdown.load(Ordering::Relaxed) {
        match listener.accept() {
            Ok((stream, peer)) => {
                let shared = Arc::clone(&shared);
                let tx = tx.clone();
                let spawned = thread::Builder::new().name(format!("bridge-{peer}")).spawn(move || {
                    if let Err(e) = serve_connection(stream, &shared, tx) {
                        debug!("connection {peer} ended: {e}");
                    }
                });
                match spawned {
                    Ok(h) => workers.push(h),
                    Err(e) => warn!("cannot spawn client thread: {e}"),
                }
                workers.retain(|h| !h.is_finished());
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(POLL),
            Err(e) => {
                warn!("accept failed: {e}");
                thread::sleep(POLL);
            }
        }
    }
    for h in workers {
        let _ = h.join();
    }
}

/// Peeks at the request head without consuming it.
fn peek_head(stream: &TcpStream) -> io::Result<String> {
    let mut buf = [0u8; 4096];
    for _ in 0..200 {
        let n = stream.peek(&mut buf)?;
        if n == 0 {
            return Err(io::ErrorKind::UnexpectedEof.into());
        }
        if buf[..n].windows(4).any(|w| w == b"\r\n\r\n") || n == buf.len() {
            return Ok(String::from_utf8_lossy(&buf[..n]).into_owned());
        }
        thread::sleep(Duration::from_millis(5));
    }
    Err(io::ErrorKind::TimedOut.into())
}

fn serve_connection(stream: TcpStream, shared: &Shared, tx: Sender<Inbound>) -> io::Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_read_timeout(Some(Duration::from_secs(5)))?;
    let head = peek_head(&stream)?;
    if head.to_ascii_lowercase().contains("upgrade: websocket") {
        let ws = tungstenite::accept(stream).map_err(|e| io::Error::other(e.to_string()))?;
        serve_websocket(ws, shared, tx)
    } else {
        serve_http(stream, &head, shared)
    }
}

fn serve_websocket(mut ws: WebSocket<TcpStream>, shared: &Shared, tx: Sender<Inbound>) -> io::Result<()> {
    ws.get_ref().set_read_timeout(Some(POLL))?;
    let queue = Arc::new(ClientQueue::new(shared.cfg.queue_capacity));
    shared.clients.lock().unwrap().push(Arc::clone(&queue));
    info!("websocket client connected");
    let result = client_loop(&mut ws, &queue, shared, &tx);
    queue.closed.store(true, Ordering::Relaxed);
    let _ = ws.close(None);
    let _ = ws.flush();
    info!("websocket client disconnected");
    result
}

fn ws_err(e: tungstenite::Error) -> io::Error {
    match e {
        tungstenite::Error::Io(e) => e,
        other => io::Error::other(other.to_string()),
    }
}

fn is_timeout(e: &io::Error) -> bool {
    matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut)
}

fn client_loop(ws: &mut WebSocket<TcpStream>, queue: &ClientQueue, shared: &Shared, tx: &Sender<Inbound>) -> io::Result<()> {
    let mut reported_drops = 0;
    while !shared.shutdown.load(Ordering::Relaxed) {
        for frame in queue.take() {
            ws.write(Message::Text(frame)).map_err(ws_err)?;
        }
        let dropped = queue.dropped();
        if dropped != reported_drops {
            reported_drops = dropped;
            let tick = shared.tick.load(Ordering::Relaxed);
            ws.write(Message::Text(frames::drops_frame(tick, dropped))).map_err(ws_err)?;
        }
        match ws.flush() {
            Ok(()) => {}
            Err(tungstenite::Error::Io(e)) if is_timeout(&e) => {}
            Err(e) => return Err(ws_err(e)),
        }

        match ws.read() {
            Ok(Message::Text(text)) => match frames::decode(&text) {
                Ok(ClientMessage::Event(ev)) => {
                    if tx.send(ev).is_err() {
                        return Ok(());
                    }
                }
                Ok(ClientMessage::Subscribe(topics)) => queue.set_filter(topics),
                Err(msg) => {
                    let tick = shared.tick.load(Ordering::Relaxed);
                    ws.write(Message::Text(frames::error_frame(tick, &msg))).map_err(ws_err)?;
                }
            },
            Ok(Message::Binary(_)) => {
                let tick = shared.tick.load(Ordering::Relaxed);
                ws.write(Message::Text(frames::error_frame(tick, "binary frames are not accepted")))
                    .map_err(ws_err)?;
            }
            Ok(Message::Close(_)) => return Ok(()),
            Ok(_) => {}
            Err(tungstenite::Error::Io(e)) if is_timeout(&e) => {}
            Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => return Ok(()),
            Err(e) => return Err(ws_err(e)),
        }
    }
    Ok(())
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html; charset=utf-8",
        Some("js" | "mjs") => "text/javascript",
        Some("css") => "text/css",
        Some("json" | "map") => "application/json",
        Some("svg") => "image/svg+xml",
        Some("png") => "image/png",
        Some("ico") => "image/x-icon",
        _ => "application/octet-stream",
    }
}

/// Maps a request path onto `root`, refusing anything that climbs out.
fn resolve_static(root: &Path, request_path: &str) -> Option<PathBuf> {
    let path = request_path.split(['?', '#']).next().unwrap_or("/");
    let rel = Path::new(path.trim_start_matches('/'));
    if rel.components().any(|c| !matches!(c, Component::Normal(_))) {
        return None;
    }
    let mut full = root.join(rel);
    if full.is_dir() {
        full.push("index.html");
    }
    full.is_file().then_some(full)
}

fn serve_http(mut stream: TcpStream, head: &str, shared: &Shared) -> io::Result<()> {
    // Consume the request head we peeked at.
    let end = head.find("\r\n\r\n").map(|i| i + 4).unwrap_or(head.len());
    let mut sink = vec![0u8; end];
    stream.read_exact(&mut sink)?;

    let mut parts = head.lines().next().unwrap_or_default().split_whitespace();
    let (method, path) = (parts.next().unwrap_or(""), parts.next().unwrap_or("/"));
    let (status, ctype, body): (&str, &str, Vec<u8>) = if method != "GET" && method != "HEAD" {
        ("405 Method Not Allowed", "text/plain", b"method not allowed\n".to_vec())
    } else {
        match &shared.cfg.ui_dir {
            Some(root) => match resolve_static(root, path) {
                Some(file) => match std::fs::read(&file) {
                    Ok(bytes) => ("200 OK", content_type(&file), bytes),
                    Err(_) => ("500 Internal Server Error", "text/plain", b"read failed\n".to_vec()),
                },
                None => ("404 Not Found", "text/plain", b"not found\n".to_vec()),
            },
            None if path == "/" || path.starts_with("/?") || path == "/index.html" => {
                ("200 OK", "text/html; charset=utf-8", CONSOLE_PAGE.as_bytes().to_vec())
            }
            None => ("404 Not Found", "text/plain", b"not found\n".to_vec()),
        }
    };
    write!(
        stream,
        "HTTP/1.1 {status}\r\nContent-Type: {ctype}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
        body.len()
    )?;
    if method != "HEAD" {
        stream.write_all(&body)?;
    }
    stream.flush()
}
