//! Drives a real listening server over plain TCP, the way a browser client
//! would.

use std::io::{Read, Write};
use std::net::{SocketAddr, TcpStream};
use std::path::Path;

use scenemem_core::game::{GameConfig, GameEngine};
use scenemem_core::simulate::synthetic_pools;
use scenemem_server::{serve, AppState};
use serde_json::{json, Value};

fn request(addr: SocketAddr, method: &str, path: &str, body: Option<&Value>) -> (u16, Value) {
    let mut stream = TcpStream::connect(addr).unwrap();
    let payload = body.map(Value::to_string).unwrap_or_default();
    write!(
        stream,
        "{method} {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{payload}",
        payload.len()
    )
    .unwrap();
    let mut raw = Vec::new();
    stream.read_to_end(&mut raw).unwrap();
    let text = String::from_utf8(raw).unwrap();
    let (head, body) = text.split_once("\r\n\r\n").unwrap();
    let status: u16 = head.split(' ').nth(1).unwrap().parse().unwrap();
    let value = if body.is_empty() { Value::Null } else { serde_json::from_str(body).unwrap() };
    (status, value)
}

struct Server {
    addr: SocketAddr,
    stop: Option<tokio::sync::oneshot::Sender<()>>,
    handle: Option<std::thread::JoinHandle<()>>,
}

impl Server {
    fn start(log: &Path) -> Server {
        let cfg = GameConfig {
            master_seed: 77,
            ..GameConfig::default()
        };
        let engine = GameEngine::open(cfg, synthetic_pools(300, 150, 50), log).unwrap();
        let std_listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        std_listener.set_nonblocking(true).unwrap();
        let addr = std_listener.local_addr().unwrap();
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        let handle = std::thread::spawn(move || {
            let rt = tokio::runtime::Runtime::new().unwrap();
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(std_listener).unwrap();
                serve(listener, AppState::new(engine), async {
                    rx.await.ok();
                })
                .await
                .unwrap();
            });
        });
        Server {
            addr,
            stop: Some(tx),
            handle: Some(handle),
        }
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        if let Some(tx) = self.stop.take() {
            tx.send(()).ok();
        }
        if let Some(h) = self.handle.take() {
            h.join().unwrap();
        }
    }
}

fn start_session(addr: SocketAddr, subject: &str) -> String {
    let (status, body) = request(addr, "POST", "/sessions", Some(&json!({ "subject_id": subject })));
    assert_eq!(status, 201, "{body}");
    body["session_id"].as_str().unwrap().to_owned()
}

/// Plays until the service reports completion; returns classification counts.
fn play(addr: SocketAddr, id: &str, press: bool, stop_after: Option<usize>) -> Vec<Value> {
    let mut events = Vec::new();
    loop {
        let (status, stim) = request(addr, "GET", &format!("/sessions/{id}/next"), None);
        if status == 409 {
            assert_eq!(stim["error"], "session_completed");
            return events;
        }
        assert_eq!(status, 200, "{stim}");
        let slot = stim["slot"].as_u64().unwrap();
        let body = if press {
            json!({ "slot": slot, "pressed": true, "reaction_time_ms": 610 })
        } else {
            json!({ "slot": slot, "pressed": false })
        };
        let (status, ev) = request(addr, "POST", &format!("/sessions/{id}/responses"), Some(&body));
        assert_eq!(status, 200, "{ev}");
        events.push(ev);
        if stop_after == Some(events.len()) {
            return events;
        }
    }
}

fn count(events: &[Value], kind: &str) -> usize {
    events.iter().filter(|e| e["classification"] == kind).count()
}

#[test]
fn all_press_and_no_press_counts() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::start(&dir.path().join("events.jsonl"));
    let addr = server.addr;

    let id = start_session(addr, "presser");
    let events = play(addr, &id, true, None);
    assert_eq!(events.len(), 186);
    assert_eq!((count(&events, "hit"), count(&events, "false_alarm")), (78, 108));
    let (status, summary) = request(addr, "GET", &format!("/sessions/{id}/summary"), None);
    assert_eq!(status, 200);
    assert_eq!(summary["counts"], json!({ "hits": 78, "misses": 0, "false_alarms": 108, "correct_rejections": 0 }));
    assert_eq!(summary["vigilance_hit_rate"], 1.0);

    let id = start_session(addr, "idle");
    let events = play(addr, &id, false, None);
    assert_eq!((count(&events, "miss"), count(&events, "correct_rejection")), (78, 108));
    let (_, summary) = request(addr, "GET", &format!("/sessions/{id}/summary"), None);
    assert_eq!(summary["vigilance_hit_rate"], 0.0);
    assert_eq!(summary["false_alarm_rate"], 0.0);
    assert_eq!(summary["valid"], false);
}

#[test]
fn restart_mid_session_resumes_at_cursor() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("events.jsonl");
    let id = {
        let server = Server::start(&log);
        let id = start_session(server.addr, "resumer");
        assert_eq!(play(server.addr, &id, false, Some(70)).len(), 70);
        id
    };

    let server = Server::start(&log);
    let addr = server.addr;
    let (_, stim) = request(addr, "GET", &format!("/sessions/{id}/next"), None);
    assert_eq!(stim["slot"], 70);
    // a client replaying its last submission is rejected, not double counted
    let (status, body) = request(
        addr,
        "POST",
        &format!("/sessions/{id}/responses"),
        Some(&json!({ "slot": 69, "pressed": false })),
    );
    assert_eq!(status, 409);
    assert_eq!(body["error"], "duplicate_response");
    let rest = play(addr, &id, false, None);
    assert_eq!(rest.len(), 116);
    let (_, summary) = request(addr, "GET", &format!("/sessions/{id}/summary"), None);
    assert_eq!(summary["responses"], 186);
    assert_eq!(summary["status"], "completed");
}

#[test]
fn concurrent_starts_for_one_subject_get_disjoint_targets() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("events.jsonl");
    let server = Server::start(&log);
    let addr = server.addr;
    let ids: Vec<String> = std::thread::scope(|s| {
        let hs: Vec<_> = (0..4).map(|_| s.spawn(|| start_session(addr, "twin"))).collect();
        hs.into_iter().map(|h| h.join().unwrap()).collect()
    });
    drop(server);
    let engine = GameEngine::replay(GameConfig::default(), synthetic_pools(300, 150, 50), &log).unwrap();
    let mut seen = std::collections::BTreeSet::new();
    for id in &ids {
        let plan = &engine.session(id).unwrap().plan;
        for t in plan.slots.iter().filter(|s| s.role == scenemem_core::sequencer::SlotRole::TargetFirst) {
            assert!(seen.insert(t.image_id.clone()), "target {} reused", t.image_id);
        }
    }
    assert_eq!(seen.len(), 4 * 66);
}
