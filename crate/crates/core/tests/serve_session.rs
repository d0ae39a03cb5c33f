//! Live session over TCP: commands in, snapshots out.

use guidebot_core::harness::{serve, Scenario, ServeConfig, Simulation, PROTOCOL_VERSION};
use serde_json::{json, Value};
use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::time::{Duration, Instant};

struct Client {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

impl Client {
    fn connect(addr: std::net::SocketAddr) -> Client {
        let stream = TcpStream::connect(addr).unwrap();
        stream.set_read_timeout(Some(Duration::from_secs(10))).unwrap();
        Client { reader: BufReader::new(stream.try_clone().unwrap()), writer: stream }
    }

    fn send(&mut self, msg: &str) {
        writeln!(self.writer, "{msg}").unwrap();
    }

    fn next(&mut self) -> Value {
        let mut line = String::new();
        self.reader.read_line(&mut line).unwrap();
        serde_json::from_str(&line).unwrap_or_else(|e| panic!("bad line {line:?}: {e}"))
    }

    fn next_kind(&mut self, kind: &str) -> Value {
        let deadline = Instant::now() + Duration::from_secs(10);
        loop {
            let m = self.next();
            if m["kind"] == kind {
                return m;
            }
            assert!(Instant::now() < deadline, "no {kind} message");
        }
    }
}

fn session(rate: f64) -> (guidebot_core::harness::ServeHandle, Client) {
    let s = Scenario::from_json(
        r#"{"name": "live", "seed": 9, "max_ticks": 100000,
            "persons": [{"id": "p1", "label": "visitor", "start": [12.5, 10.3]}]}"#,
    )
    .unwrap();
    let handle = serve(Simulation::new(s).unwrap(), ServeConfig { addr: "127.0.0.1:0".into(), rate, transcript: None }).unwrap();
    let client = Client::connect(handle.local_addr());
    (handle, client)
}

#[test]
fn utterance_starts_guidance_within_three_seconds() {
    for text in ["where is the cafe", "where is the toy shop"] {
        let (handle, mut c) = session(200.0);
        let first = c.next_kind("snapshot");
        assert_eq!(first["protocol"], json!(PROTOCOL_VERSION));
        c.send(&json!({"kind": "command", "command": "utter", "person": "p1", "text": text}).to_string());
        let ack = c.next_kind("command");
        assert_eq!(ack["command"]["text"], text);
        let sent_at = ack["tick"].as_u64().unwrap();
        loop {
            let s = c.next_kind("snapshot");
            let tick = s["tick"].as_u64().unwrap();
            if s["task"]["goal"]["kind"] == "guidance" {
                assert!(tick - sent_at <= 30, "guidance after {} ticks", tick - sent_at);
                break;
            }
            assert!(tick - sent_at <= 30, "no guidance task within 30 ticks for {text:?}");
        }
        handle.stop();
    }
}

#[test]
fn malformed_input_gets_an_error_and_the_session_goes_on() {
    let (handle, mut c) = session(200.0);
    c.next_kind("snapshot");
    c.send("{this is not json");
    let e = c.next_kind("error");
    assert!(e["message"].as_str().unwrap().contains("malformed"));
    assert!(e["tick"].is_u64());
    c.send(r#"{"kind": "command", "command": "utter", "person": "nobody", "text": "hi"}"#);
    c.next_kind("error");
    let a = c.next_kind("snapshot")["tick"].as_u64().unwrap();
    let b = c.next_kind("snapshot")["tick"].as_u64().unwrap();
    assert!(b > a);
    handle.stop();
}

#[test]
fn pause_freezes_and_resume_continues() {
    let (handle, mut c) = session(200.0);
    c.next_kind("snapshot");
    c.send(r#"{"kind": "command", "command": "pause"}"#);
    c.next_kind("command");
    let frozen = c.next_kind("snapshot");
    assert_eq!(frozen["paused"], true);
    for _ in 0..5 {
        assert_eq!(c.next_kind("snapshot")["tick"], frozen["tick"]);
    }
    c.send(r#"{"kind": "command", "command": "resume"}"#);
    c.next_kind("command");
    let t0 = frozen["tick"].as_u64().unwrap();
    loop {
        let s = c.next_kind("snapshot");
        if s["tick"].as_u64().unwrap() > t0 {
            assert_eq!(s["paused"], false);
            break;
        }
    }
    handle.stop();
}

#[test]
fn spawned_person_moves_on_command() {
    let (handle, mut c) = session(200.0);
    c.send(r#"{"kind": "command", "command": "spawn", "person": "v2", "at": [8.0, 8.0]}"#);
    assert_eq!(c.next_kind("command")["command"]["command"], "spawn");
    c.send(r#"{"kind": "command", "command": "move", "person": "v2", "to": [8.0, 9.0]}"#);
    c.next_kind("command");
    let deadline = Instant::now() + Duration::from_secs(10);
    loop {
        let s = c.next_kind("snapshot");
        let v2 = s["persons"].as_array().unwrap().iter().find(|p| p["id"] == "v2").cloned();
        if v2.as_ref().is_some_and(|p| p["position"] == json!([8.0, 9.0])) {
            break;
        }
        assert!(Instant::now() < deadline, "v2 never arrived: {v2:?}");
    }
    handle.stop();
}
