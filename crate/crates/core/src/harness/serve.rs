//! Live session over plain TCP, one JSON message per line.
//!
//! The server sends a `snapshot` every tick, acknowledges each applied
//! command with a `command` message echoing it, and answers malformed input
//! with an `error` message. Every message carries `tick`. Commands are
//! queued and applied by the tick thread before the next tick runs.

use super::sim::{Command, Simulation};
use super::HarnessError;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, ErrorKind, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ServeConfig {
    /// e.g. `127.0.0.1:7878`; port 0 picks a free one.
    pub addr: String,
    /// Ticks per wall-clock second.
    pub rate: f64,
    /// Transcript file appended to as ticks run.
    pub transcript: Option<PathBuf>,
}

impl Default for ServeConfig {
    fn default() -> Self {
        ServeConfig { addr: "127.0.0.1:7878".into(), rate: 10.0, transcript: None }
    }
}

/// What a client may send.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClientMessage {
    Command(Command),
}

impl ClientMessage {
    pub fn parse(line: &str) -> Result<ClientMessage, String> {
        let v: Value = serde_json::from_str(line).map_err(|e| format!("malformed JSON: {e}"))?;
        match v.get("kind").and_then(Value::as_str) {
            Some("command") => {}
            Some(other) => return Err(format!("unexpected message kind '{other}'")),
            None => return Err("message has no kind".into()),
        }
        let mut body = v;
        body.as_object_mut().expect("checked above").remove("kind");
        serde_json::from_value(body).map(ClientMessage::Command).map_err(|e| format!("bad command: {e}"))
    }
}

enum Msg {
    Join(u64, TcpStream),
    Line(u64, String),
    Leave(u64),
}

pub struct ServeHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    threads: Vec<JoinHandle<()>>,
}

impl ServeHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stops the session and waits for the tick and accept threads.
    pub fn stop(self) {
        self.stop.store(true, Ordering::SeqCst);
        for t in self.threads {
            let _ = t.join();
        }
    }

    /// Blocks for as long as the session runs.
    pub fn wait(self) {
        for t in self.threads {
            let _ = t.join();
        }
    }
}

/// Binds `config.addr` and runs `sim` in real time on a background thread.
pub fn serve(sim: Simulation, config: ServeConfig) -> Result<ServeHandle, HarnessError> {
    let bind_err = |source| HarnessError::Bind { addr: config.addr.clone(), source };
    let listener = TcpListener::bind(&config.addr).map_err(bind_err)?;
    listener.set_nonblocking(true).map_err(bind_err)?;
    let addr = listener.local_addr().map_err(bind_err)?;
    let rate = if config.rate > 0.0 && config.rate.is_finite() { config.rate } else { 10.0 };
    let transcript = match &config.transcript {
        Some(p) => Some(std::fs::File::create(p).map_err(bind_err)?),
        None => None,
    };
    let stop = Arc::new(AtomicBool::new(false));
    let (tx, rx) = mpsc::channel();
    let accept = {
        let stop = stop.clone();
        thread::spawn(move || accept_loop(listener, tx, stop))
    };
    let ticker = {
        let stop = stop.clone();
        thread::spawn(move || tick_loop(sim, rx, stop, rate, transcript))
    };
    Ok(ServeHandle { addr, stop, threads: vec![ticker, accept] })
}

fn accept_loop(listener: TcpListener, tx: Sender<Msg>, stop: Arc<AtomicBool>) {
    let mut next_id = 1u64;
    while !stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, _)) => {
                let id = next_id;
                next_id += 1;
                let Ok(reader) = stream.try_clone() else { continue };
                if stream.set_nonblocking(false).is_err() || reader.set_nonblocking(false).is_err() {
                    continue;
                }
                let _ = stream.set_write_timeout(Some(Duration::from_millis(200)));
                if tx.send(Msg::Join(id, stream)).is_err() {
                    return;
                }
                let tx = tx.clone();
                thread::spawn(move || {
                    for line in BufReader::new(reader).lines() {
                        let Ok(line) = line else { break };
                        if line.trim().is_empty() {
                            continue;
                        }
                        if tx.send(Msg::Line(id, line)).is_err() {
                            return;
                        }
                    }
                    let _ = tx.send(Msg::Leave(id));
                });
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(5)),
            Err(_) => thread::sleep(Duration::from_millis(5)),
        }
    }
}

fn send(stream: &mut TcpStream, msg: &Value) -> bool {
    let mut line = serde_json::to_string(msg).expect("messages serialize");
    line.push('\n');
    stream.write_all(line.as_bytes()).and_then(|_| stream.flush()).is_ok()
}

fn tick_loop(mut sim: Simulation, rx: Receiver<Msg>, stop: Arc<AtomicBool>, rate: f64, mut transcript: Option<std::fs::File>) {
    let period = Duration::from_secs_f64(1.0 / rate);
    let mut clients: BTreeMap<u64, TcpStream> = BTreeMap::new();
    let mut deadline = Instant::now();
    while !stop.load(Ordering::SeqCst) {
        while let Ok(msg) = rx.try_recv() {
            match msg {
                Msg::Join(id, stream) => {
                    clients.insert(id, stream);
                }
                Msg::Leave(id) => {
                    clients.remove(&id);
                }
                Msg::Line(id, line) => {
                    let reply = match ClientMessage::parse(&line) {
                        Ok(ClientMessage::Command(cmd)) => match sim.apply(&cmd) {
                            Ok(()) => json!({"kind": "command", "tick": sim.tick(), "command": cmd}),
                            Err(e) => json!({"kind": "error", "tick": sim.tick(), "message": e}),
                        },
                        Err(e) => json!({"kind": "error", "tick": sim.tick(), "message": e}),
                    };
                    if let Some(s) = clients.get_mut(&id) {
                        if !send(s, &reply) {
                            clients.remove(&id);
                        }
                    }
                }
            }
        }
        if !sim.finished() {
            let records = sim.step();
            if let Some(f) = transcript.as_mut() {
                for r in &records {
                    let _ = writeln!(f, "{}", serde_json::to_string(r).expect("records serialize"));
                }
            }
        }
        let mut snap = sim.snapshot();
        snap["protocol"] = json!(PROTOCOL_VERSION);
        clients.retain(|_, s| send(s, &snap));

        deadline += period;
        let now = Instant::now();
        if deadline > now {
            thread::sleep(deadline - now);
        } else {
            deadline = now;
        }
    }
    for s in clients.values() {
        let _ = s.shutdown(std::net::Shutdown::Both);
    }
}
