//! In-process captioning server implementing the caption contract, for
//! tests and offline runs. Captions echo the prompt as `cap:<prompt>`.

use std::collections::hash_map::DefaultHasher;
use std::collections::BTreeSet;
use std::hash::{Hash, Hasher};
use std::io;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use tiny_http::{Header, Method, Response, Server};

use crate::caption::{CaptionRequest, CAPTION_PATH};

#[derive(Debug, Clone, Default)]
pub struct MockBehavior {
    /// The first `fail_first` requests (in arrival order) get a 500.
    pub fail_first: usize,
    /// Images whose requests always get a 500.
    pub fail_ids: BTreeSet<String>,
    /// Images whose requests get a 200 with a non-JSON body.
    pub malformed_ids: BTreeSet<String>,
    /// Upper bound of a per-request delay, derived from the request
    /// contents and `delay_seed`, used to scramble completion order.
    pub max_delay: Duration,
    pub delay_seed: u64,
}

struct State {
    behavior: MockBehavior,
    served: AtomicUsize,
    log: Mutex<Vec<CaptionRequest>>,
    stop: AtomicBool,
}

/// Running mock server; shuts down when dropped.
pub struct MockCaptionServer {
    addr: SocketAddr,
    state: Arc<State>,
    workers: Vec<JoinHandle<()>>,
}

impl MockCaptionServer {
    /// Binds an ephemeral local port and serves with `threads` handlers.
    pub fn start(behavior: MockBehavior, threads: usize) -> io::Result<Self> {
        let server = Server::http("127.0.0.1:0").map_err(io::Error::other)?;
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| io::Error::other("mock server has no IP address"))?;
        let server = Arc::new(server);
        let state = Arc::new(State {
            behavior,
            served: AtomicUsize::new(0),
            log: Mutex::new(Vec::new()),
            stop: AtomicBool::new(false),
        });
        let workers = (0..threads.max(1))
            .map(|_| {
                let (server, state) = (Arc::clone(&server), Arc::clone(&state));
                thread::spawn(move || serve(&server, &state))
            })
            .collect();
        Ok(Self {
            addr,
            state,
            workers,
        })
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Number of caption requests received so far.
    pub fn request_count(&self) -> usize {
        self.state.served.load(Ordering::SeqCst)
    }

    /// Parsed request bodies in arrival order.
    pub fn requests(&self) -> Vec<CaptionRequest> {
        self.state.log.lock().expect("mock log lock").clone()
    }
}

impl Drop for MockCaptionServer {
    fn drop(&mut self) {
        self.state.stop.store(true, Ordering::SeqCst);
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

fn serve(server: &Server, state: &State) {
    while !state.stop.load(Ordering::SeqCst) {
        let mut request = match server.recv_timeout(Duration::from_millis(20)) {
            Ok(Some(r)) => r,
            Ok(None) => continue,
            Err(_) => break,
        };
        if request.method() != &Method::Post || request.url() != CAPTION_PATH {
            let _ = request.respond(Response::from_string("not found").with_status_code(404));
            continue;
        }
        let mut body = String::new();
        let parsed = request
            .as_reader()
            .read_to_string(&mut body)
            .ok()
            .and_then(|_| serde_json::from_str::<CaptionRequest>(&body).ok());
        let Some(parsed) = parsed else {
            let _ = request.respond(Response::from_string("bad request").with_status_code(400));
            continue;
        };
        let arrival = state.served.fetch_add(1, Ordering::SeqCst);
        state
            .log
            .lock()
            .expect("mock log lock")
            .push(parsed.clone());

        let b = &state.behavior;
        if !b.max_delay.is_zero() {
            thread::sleep(delay_for(&parsed, b));
        }
        let response = if arrival < b.fail_first || b.fail_ids.contains(&parsed.image_id) {
            Response::from_string("internal error").with_status_code(500)
        } else if b.malformed_ids.contains(&parsed.image_id) {
            Response::from_string("<html>not json</html>").with_status_code(200)
        } else {
            let body =
                serde_json::json!({ "caption": format!("cap:{}", parsed.prompt) }).to_string();
            Response::from_string(body)
                .with_status_code(200)
                .with_header(
                    Header::from_bytes("Content-Type", "application/json").expect("static header"),
                )
        };
        let _ = request.respond(response);
    }
}

fn delay_for(req: &CaptionRequest, b: &MockBehavior) -> Duration {
    let mut h = DefaultHasher::new();
    (b.delay_seed, &req.image_id, &req.prompt).hash(&mut h);
    let max = b.max_delay.as_micros().max(1) as u64;
    Duration::from_micros(h.finish() % max)
}
