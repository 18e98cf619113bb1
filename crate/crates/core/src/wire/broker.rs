use std::collections::HashMap;
use std::io::{Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use log::{debug, info, warn};

use super::frame::{DEFAULT_MAX_PAYLOAD, FrameDecoder};
use super::message::{MSG_ADVERTISE, MSG_DATA, MSG_NACK, MSG_SUBSCRIBE, Message};
use super::registry::{SessionId, TopicRegistry};
use super::{WireError, encode_frame};

#[derive(Debug, Clone)]
pub struct BrokerConfig {
    /// Per-subscriber outgoing queue depth; overflow drops the oldest frame
    /// so slow subscribers never block publishers.
    pub queue_depth: usize,
    pub max_payload: usize,
}

impl Default for BrokerConfig {
    fn default() -> Self {
        Self {
            queue_depth: 8,
            max_payload: DEFAULT_MAX_PAYLOAD,
        }
    }
}

/// Bounded outgoing queue with oldest-drop overflow.
struct OutQueue {
    state: Mutex<OutState>,
    cv: Condvar,
    depth: usize,
}

#[derive(Default)]
struct OutState {
    queue: std::collections::VecDeque<Vec<u8>>,
    closed: bool,
}

impl OutQueue {
    fn new(depth: usize) -> Self {
        Self {
            state: Mutex::new(OutState::default()),
            cv: Condvar::new(),
            depth: depth.max(1),
        }
    }

    fn push(&self, frame: Vec<u8>, dropped: &AtomicU64) {
        let mut st = self.state.lock().unwrap();
        if st.closed {
            return;
        }
        if st.queue.len() >= self.depth {
            st.queue.pop_front();
            dropped.fetch_add(1, Ordering::Relaxed);
        }
        st.queue.push_back(frame);
        self.cv.notify_one();
    }

    /// Drains everything queued into one contiguous buffer so the writer
    /// makes few large writes instead of many tiny segments. Returns false
    /// once closed and empty.
    fn pop_batch(&self, out: &mut Vec<u8>) -> bool {
        out.clear();
        let mut st = self.state.lock().unwrap();
        loop {
            if !st.queue.is_empty() {
                for frame in st.queue.drain(..) {
                    out.extend_from_slice(&frame);
                }
                return true;
            }
            if st.closed {
                return false;
            }
            st = self.cv.wait(st).unwrap();
        }
    }

    fn close(&self) {
        self.state.lock().unwrap().closed = true;
        self.cv.notify_all();
    }
}

struct Session {
    queue: Arc<OutQueue>,
    stream: TcpStream,
}

/// Registry plus live sessions behind one lock: control messages and fan-out
/// lookups are serialized, which makes the registry linearizable.
#[derive(Default)]
struct SharedState {
    registry: TopicRegistry,
    sessions: HashMap<SessionId, Session>,
}

/// Counters exposed for tests and the demo summary.
#[derive(Debug, Default)]
pub struct BrokerStats {
    pub sessions_opened: AtomicU64,
    pub data_forwarded: AtomicU64,
    pub frames_dropped: AtomicU64,
    pub nacks_sent: AtomicU64,
}

pub struct Broker {
    listener: TcpListener,
    addr: SocketAddr,
    config: BrokerConfig,
    shutdown: Arc<AtomicBool>,
    stats: Arc<BrokerStats>,
}

/// Handle to a running broker: address, stats, shutdown.
pub struct BrokerHandle {
    addr: SocketAddr,
    shutdown: Arc<AtomicBool>,
    stats: Arc<BrokerStats>,
    join: Option<JoinHandle<()>>,
}

impl Broker {
    pub fn bind<A: ToSocketAddrs>(addr: A, config: BrokerConfig) -> std::io::Result<Broker> {
        let listener = TcpListener::bind(addr)?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        Ok(Broker {
            listener,
            addr,
            config,
            shutdown: Arc::new(AtomicBool::new(false)),
            stats: Arc::new(BrokerStats::default()),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Starts the accept loop on a background thread.
    pub fn spawn(self) -> BrokerHandle {
        let shutdown = self.shutdown.clone();
        let stats = self.stats.clone();
        let addr = self.addr;
        let join = std::thread::Builder::new()
            .name("broker-accept".into())
            .spawn(move || self.accept_loop())
            .expect("spawn broker thread");
        info!("broker listening on {addr}");
        BrokerHandle {
            addr,
            shutdown,
            stats,
            join: Some(join),
        }
    }

    fn accept_loop(self) {
        let state = Arc::new(Mutex::new(SharedState::default()));
        let mut next_id: SessionId = 1;
        let mut readers: Vec<JoinHandle<()>> = Vec::new();
        while !self.shutdown.load(Ordering::Relaxed) {
            match self.listener.accept() {
                Ok((stream, peer)) => {
                    let id = next_id;
                    next_id += 1;
                    debug!("session {id} connected from {peer}");
                    self.stats.sessions_opened.fetch_add(1, Ordering::Relaxed);
                    if let Some(handle) = self.start_session(id, stream, &state) {
                        readers.push(handle);
                    }
                }
                Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                    std::thread::sleep(Duration::from_millis(10));
                }
                Err(e) => {
                    warn!("broker accept error: {e}");
                    break;
                }
            }
        }
        // Tear down every live session so reader/writer threads drain out.
        {
            let mut st = state.lock().unwrap();
            for (_, session) in st.sessions.drain() {
                session.queue.close();
                let _ = session.stream.shutdown(Shutdown::Both);
            }
            st.registry = TopicRegistry::new();
        }
        for handle in readers {
            let _ = handle.join();
        }
    }

    fn start_session(
        &self,
        id: SessionId,
        stream: TcpStream,
        state: &Arc<Mutex<SharedState>>,
    ) -> Option<JoinHandle<()>> {
        if super::tune_stream(&stream).is_err() {
            return None;
        }
        let queue = Arc::new(OutQueue::new(self.config.queue_depth));
        let writer_stream = match stream.try_clone() {
            Ok(s) => s,
            Err(e) => {
                warn!("session {id}: clone failed: {e}");
                return None;
            }
        };
        state.lock().unwrap().sessions.insert(
            id,
            Session {
                queue: queue.clone(),
                stream: match stream.try_clone() {
                    Ok(s) => s,
                    Err(_) => return None,
                },
            },
        );

        // Writer: drains the session's queue.
        let writer_queue = queue.clone();
        let writer = std::thread::Builder::new()
            .name(format!("broker-w{id}"))
            .spawn(move || {
                let mut stream = writer_stream;
                let mut batch = Vec::new();
                while writer_queue.pop_batch(&mut batch) {
                    if stream.write_all(&batch).is_err() {
                        break;
                    }
                }
                let _ = stream.shutdown(Shutdown::Both);
            })
            .ok()?;

        // Reader: decodes frames and applies them to shared state.
        let state = state.clone();
        let stats = self.stats.clone();
        let max_payload = self.config.max_payload;
        std::thread::Builder::new()
            .name(format!("broker-r{id}"))
            .spawn(move || {
                let mut decoder = FrameDecoder::new(max_payload);
                let mut buf = vec![0u8; 64 * 1024];
                let mut stream = stream;
                'session: loop {
                    let n = match stream.read(&mut buf) {
                        Ok(0) => break 'session,
                        Ok(n) => n,
                        Err(_) => break 'session,
                    };
                    decoder.push(&buf[..n]);
                    loop {
                        match decoder.next_frame() {
                            Ok(Some((msg_type, payload))) => {
                                handle_message(id, msg_type, payload, &state, &stats);
                            }
                            Ok(None) => break,
                            Err(e) => {
                                // Protocol error: tear the connection down.
                                warn!("session {id}: protocol error: {e}");
                                break 'session;
                            }
                        }
                    }
                }
                debug!("session {id} disconnected");
                let mut st = state.lock().unwrap();
                st.registry.remove_session(id);
                if let Some(session) = st.sessions.remove(&id) {
                    session.queue.close();
                    let _ = session.stream.shutdown(Shutdown::Both);
                }
                drop(st);
                let _ = writer.join();
            })
            .ok()
    }
}

fn nack(state: &SharedState, id: SessionId, stats: &BrokerStats, reason: &str) {
    if let Some(session) = state.sessions.get(&id) {
        let msg = Message::Nack {
            reason: reason.to_string(),
        };
        if let Ok(frame) = msg.to_frame() {
            session.queue.push(frame, &stats.frames_dropped);
            stats.nacks_sent.fetch_add(1, Ordering::Relaxed);
        }
    }
}

fn handle_message(
    id: SessionId,
    msg_type: u8,
    payload: Vec<u8>,
    state: &Arc<Mutex<SharedState>>,
    stats: &BrokerStats,
) {
    // DATA is the hot path: forward the payload bytes untouched.
    if msg_type == MSG_DATA {
        let topic = match Message::decode(MSG_DATA, &payload) {
            Ok(Message::Data { topic, .. }) => topic,
            _ => {
                let st = state.lock().unwrap();
                nack(&st, id, stats, "malformed DATA message");
                return;
            }
        };
        let frame = match encode_frame(MSG_DATA, &payload) {
            Ok(f) => f,
            Err(_) => return,
        };
        let st = state.lock().unwrap();
        if !st.registry.is_advertised_by(id, &topic) {
            nack(&st, id, stats, &format!("not advertised: {topic}"));
            return;
        }
        for sub in st.registry.subscribers_of(&topic) {
            if sub == id {
                continue;
            }
            if let Some(session) = st.sessions.get(&sub) {
                session.queue.push(frame.clone(), &stats.frames_dropped);
                stats.data_forwarded.fetch_add(1, Ordering::Relaxed);
            }
        }
        return;
    }

    match Message::decode(msg_type, &payload) {
        Ok(Message::Advertise { topic, type_name }) if msg_type == MSG_ADVERTISE => {
            let mut st = state.lock().unwrap();
            if let Err(conflict) = st.registry.advertise(id, &topic, &type_name) {
                let reason = format!(
                    "type conflict: topic '{}' is {}, got {}",
                    conflict.topic, conflict.existing, conflict.offered
                );
                nack(&st, id, stats, &reason);
            }
        }
        Ok(Message::Subscribe { topic }) if msg_type == MSG_SUBSCRIBE => {
            state.lock().unwrap().registry.subscribe(id, &topic);
        }
        Ok(Message::Nack { reason }) if msg_type == MSG_NACK => {
            debug!("session {id} sent NACK: {reason}");
        }
        Ok(_) | Err(WireError::UnknownMessageType(_)) => {
            let st = state.lock().unwrap();
            nack(
                &st,
                id,
                stats,
                &format!("unknown message type 0x{msg_type:02x}"),
            );
        }
        Err(e) => {
            let st = state.lock().unwrap();
            nack(&st, id, stats, &format!("malformed message: {e}"));
        }
    }
}

impl BrokerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn stats(&self) -> &BrokerStats {
        &self.stats
    }

    /// Signals shutdown and joins the accept loop.
    pub fn shutdown(mut self) {
        self.stop();
        if let Some(join) = self.join.take() {
            let _ = join.join();
        }
    }

    fn stop(&self) {
        self.shutdown.store(true, Ordering::Relaxed);
    }
}

impl Drop for BrokerHandle {
    fn drop(&mut self) {
        self.stop();
        if let Some(join) = self.join.take() {
            let _ = join.join();
        }
    }
}
