//! TCP server relaying oracle queries to one console session.
//!
//! The training loop and the connection reader meet in a single-slot
//! handoff: [`BridgeHandle::request_action`] publishes the pending step,
//! writes a `query_request`, then waits for a step-matched
//! `oracle_response`, a disconnect, a shutdown, or the timeout.

use std::fmt;
use std::io::{BufRead, BufReader, ErrorKind, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use crate::env::EnvState;
use crate::error::{Error, Result};
use crate::oracle::wire::{Message, WireState};

const ACCEPT_POLL: Duration = Duration::from_millis(10);

/// Identity stamped on outgoing queries and required on incoming responses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionPolicy {
    pub session_id: String,
    pub run_id: String,
}

#[derive(Default)]
struct Slot {
    connection: Option<(u64, TcpStream)>,
    next_connection: u64,
    pending_step: Option<u64>,
    answer: Option<[f64; 2]>,
    shutdown: bool,
}

struct Shared {
    policy: SessionPolicy,
    slot: Mutex<Slot>,
    changed: Condvar,
}

impl Shared {
    fn lock(&self) -> MutexGuard<'_, Slot> {
        self.slot.lock().unwrap_or_else(|e| e.into_inner())
    }
}

fn write_line(stream: &mut TcpStream, msg: &Message) -> std::io::Result<()> {
    let mut line = msg.to_line();
    line.push('\n');
    stream.write_all(line.as_bytes())?;
    stream.flush()
}

/// Cloneable handle used by the training loop.
#[derive(Clone)]
pub struct BridgeHandle {
    shared: Arc<Shared>,
}

impl fmt::Debug for BridgeHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BridgeHandle")
            .field("session_id", &self.shared.policy.session_id)
            .field("connected", &self.is_connected())
            .finish()
    }
}

impl BridgeHandle {
    pub fn is_connected(&self) -> bool {
        self.shared.lock().connection.is_some()
    }

    /// Blocks until the connected session answers `step` or `timeout`
    /// passes. `None` means no answer: no session, timeout, disconnect or
    /// shutdown.
    pub fn request_action(
        &self,
        step: u64,
        state: &EnvState,
        budget_remaining: u64,
        timeout: Duration,
    ) -> Option<[f64; 2]> {
        let deadline = Instant::now() + timeout;
        let mut slot = self.shared.lock();
        if slot.shutdown {
            return None;
        }
        let (conn_id, mut stream) = match &slot.connection {
            Some((id, s)) => (*id, s.try_clone().ok()?),
            None => return None,
        };
        slot.pending_step = Some(step);
        slot.answer = None;
        let request = Message::QueryRequest {
            session: self.shared.policy.session_id.clone(),
            run_id: self.shared.policy.run_id.clone(),
            step,
            state: WireState::from(state),
            budget_remaining,
            timeout_ms: timeout.as_millis() as u64,
        };
        if write_line(&mut stream, &request).is_err() {
            slot.pending_step = None;
            slot.connection = None;
            return None;
        }
        let answer = loop {
            if let Some(a) = slot.answer.take() {
                break Some(a);
            }
            let live = slot.connection.as_ref().is_some_and(|(id, _)| *id == conn_id);
            if slot.shutdown || !live {
                break None;
            }
            let now = Instant::now();
            if now >= deadline {
                break None;
            }
            slot = self
                .shared
                .changed
                .wait_timeout(slot, deadline - now)
                .unwrap_or_else(|e| e.into_inner())
                .0;
        };
        slot.pending_step = None;
        answer
    }

    /// Best-effort telemetry; dropped silently without a session.
    pub fn send_step_update(&self, step: u64, state: &EnvState, queried: bool, reward: f64, episode_return: f64) {
        let slot = self.shared.lock();
        if let Some((_, stream)) = &slot.connection {
            if let Ok(mut s) = stream.try_clone() {
                let msg = Message::StepUpdate {
                    step,
                    state: WireState::from(state),
                    queried,
                    reward,
                    episode_return,
                };
                let _ = write_line(&mut s, &msg);
            }
        }
    }
}

/// Running bridge server. Dropping it shuts it down.
pub struct OracleBridge {
    handle: BridgeHandle,
    local_addr: SocketAddr,
    acceptor: Option<JoinHandle<()>>,
    stop: Arc<AtomicBool>,
}

impl fmt::Debug for OracleBridge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OracleBridge").field("local_addr", &self.local_addr).finish()
    }
}

impl OracleBridge {
    /// Binds `127.0.0.1:port` (`0` picks a free port) and starts accepting.
    pub fn serve(port: u16, policy: SessionPolicy) -> Result<Self> {
        Self::serve_on(SocketAddr::from(([127, 0, 0, 1], port)), policy)
    }

    pub fn serve_on(addr: SocketAddr, policy: SessionPolicy) -> Result<Self> {
        let listener =
            TcpListener::bind(addr).map_err(|e| Error::Bridge(format!("cannot bind {addr}: {e}")))?;
        listener.set_nonblocking(true)?;
        let local_addr = listener.local_addr()?;
        let shared = Arc::new(Shared {
            policy,
            slot: Mutex::new(Slot::default()),
            changed: Condvar::new(),
        });
        let stop = Arc::new(AtomicBool::new(false));
        let acceptor = {
            let shared = Arc::clone(&shared);
            let stop = Arc::clone(&stop);
            thread::Builder::new()
                .name("oracle-bridge".into())
                .spawn(move || accept_loop(listener, shared, stop))?
        };
        Ok(Self {
            handle: BridgeHandle { shared },
            local_addr,
            acceptor: Some(acceptor),
            stop,
        })
    }

    pub fn handle(&self) -> BridgeHandle {
        self.handle.clone()
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    /// Stops accepting, drops the session and releases any waiting query.
    pub fn shutdown(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        {
            let mut slot = self.handle.shared.lock();
            slot.shutdown = true;
            if let Some((_, s)) = slot.connection.take() {
                let _ = s.shutdown(Shutdown::Both);
            }
        }
        self.handle.shared.changed.notify_all();
        if let Some(t) = self.acceptor.take() {
            let _ = t.join();
        }
    }
}

impl Drop for OracleBridge {
    fn drop(&mut self) {
        self.shutdown();
    }
}

fn accept_loop(listener: TcpListener, shared: Arc<Shared>, stop: Arc<AtomicBool>) {
    while !stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, peer)) => {
                let _ = stream.set_nonblocking(false);
                let _ = stream.set_nodelay(true);
                attach(stream, peer, &shared);
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(ACCEPT_POLL),
            Err(e) => {
                log::warn!("oracle bridge accept failed: {e}");
                thread::sleep(ACCEPT_POLL);
            }
        }
    }
}

fn attach(mut stream: TcpStream, peer: SocketAddr, shared: &Arc<Shared>) {
    let id = {
        let mut slot = shared.lock();
        if slot.connection.is_some() || slot.shutdown {
            drop(slot);
            let _ = write_line(&mut stream, &Message::error("a console session is already attached"));
            let _ = stream.shutdown(Shutdown::Both);
            return;
        }
        let Ok(keep) = stream.try_clone() else {
            return;
        };
        let id = slot.next_connection;
        slot.next_connection += 1;
        slot.connection = Some((id, keep));
        id
    };
    log::info!("oracle console attached from {peer}");
    let shared = Arc::clone(shared);
    let spawned = thread::Builder::new()
        .name("oracle-session".into())
        .spawn(move || read_loop(stream, id, shared));
    if let Err(e) = spawned {
        log::warn!("cannot start session reader: {e}");
    }
}

fn read_loop(stream: TcpStream, id: u64, shared: Arc<Shared>) {
    let Ok(mut writer) = stream.try_clone() else {
        return;
    };
    let reader = BufReader::new(stream);
    for line in reader.lines() {
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        let reply = match Message::parse(&line) {
            Ok(Message::OracleResponse { session, step, action }) => {
                let mut slot = shared.lock();
                if session != shared.policy.session_id {
                    Some(Message::error(format!("unknown session `{session}`")))
                } else if slot.pending_step != Some(step) {
                    Some(Message::error(format!("no pending query for step {step}")))
                } else if !action.iter().all(|v| v.is_finite()) {
                    Some(Message::error("action must be finite"))
                } else {
                    slot.answer = Some(action);
                    drop(slot);
                    shared.changed.notify_all();
                    None
                }
            }
            Ok(_) => Some(Message::error("only oracle_response messages are accepted")),
            Err(e) => Some(Message::error(format!("malformed message: {e}"))),
        };
        if let Some(msg) = reply {
            if write_line(&mut writer, &msg).is_err() {
                break;
            }
        }
    }
    let mut slot = shared.lock();
    if slot.connection.as_ref().is_some_and(|(cid, _)| *cid == id) {
        slot.connection = None;
    }
    drop(slot);
    shared.changed.notify_all();
    log::info!("oracle console detached");
}
