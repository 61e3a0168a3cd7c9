//! A minimal in-process HTTP server speaking the provider wire protocol.
//!
//! Tests point a real [`crate::providers::EmbeddingClient`] or
//! [`crate::providers::ChatClient`] at [`MockServer::url`], so the whole
//! client stack — serialization, retries, backoff, the concurrency gate —
//! runs against genuine sockets instead of being stubbed out. The server
//! also records the maximum number of requests it ever saw in flight at
//! once, which is how the concurrency-limit invariant is asserted.

use super::mock::{MockChat, MockEmbedder};
use crate::providers::{ChatMessage, ChatRequest, Role};
use std::collections::VecDeque;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

/// One canned reply, consumed before normal handling.
#[derive(Debug, Clone)]
struct Scripted {
    status: u16,
    body: String,
}

struct ServerState {
    embedder: MockEmbedder,
    chat: MockChat,
    in_flight: AtomicUsize,
    max_in_flight: AtomicUsize,
    handled: AtomicUsize,
    latency: Mutex<Duration>,
    script: Mutex<VecDeque<Scripted>>,
}

/// The in-process provider server. Dropping it shuts the listener down.
pub struct MockServer {
    addr: SocketAddr,
    shutdown: Arc<AtomicBool>,
    state: Arc<ServerState>,
    acceptor: Option<JoinHandle<()>>,
}

impl MockServer {
    /// Bind to an ephemeral localhost port and start serving.
    pub fn start(embedder: MockEmbedder, chat: MockChat) -> std::io::Result<Self> {
        Self::start_on(embedder, chat, 0)
    }

    /// Bind to a specific localhost port (0 picks an ephemeral one).
    pub fn start_on(embedder: MockEmbedder, chat: MockChat, port: u16) -> std::io::Result<Self> {
        let listener = TcpListener::bind(("127.0.0.1", port))?;
        let addr = listener.local_addr()?;
        let shutdown = Arc::new(AtomicBool::new(false));
        let state = Arc::new(ServerState {
            embedder,
            chat,
            in_flight: AtomicUsize::new(0),
            max_in_flight: AtomicUsize::new(0),
            handled: AtomicUsize::new(0),
            latency: Mutex::new(Duration::ZERO),
            script: Mutex::new(VecDeque::new()),
        });
        let acceptor = {
            let shutdown = Arc::clone(&shutdown);
            let state = Arc::clone(&state);
            std::thread::spawn(move || {
                for stream in listener.incoming() {
                    if shutdown.load(Ordering::SeqCst) {
                        break;
                    }
                    let Ok(stream) = stream else { continue };
                    let state = Arc::clone(&state);
                    std::thread::spawn(move || handle_connection(stream, &state));
                }
            })
        };
        Ok(Self { addr, shutdown, state, acceptor: Some(acceptor) })
    }

    /// Base URL clients should use, e.g. `http://127.0.0.1:49152`.
    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Highest number of simultaneously open requests observed so far.
    pub fn max_in_flight(&self) -> usize {
        self.state.max_in_flight.load(Ordering::SeqCst)
    }

    /// Requests handled so far (scripted replies included).
    pub fn handled(&self) -> usize {
        self.state.handled.load(Ordering::SeqCst)
    }

    /// Hold every request open for `latency` before answering, so
    /// overlapping requests actually overlap.
    pub fn set_latency(&self, latency: Duration) {
        *self.state.latency.lock().expect("latency lock") = latency;
    }

    /// Queue a canned reply; the next request pops it instead of being
    /// answered normally.
    pub fn push_response(&self, status: u16, body: &str) {
        self.state
            .script
            .lock()
            .expect("script lock")
            .push_back(Scripted { status, body: body.into() });
    }

    /// Queue `n` copies of the same failure status.
    pub fn fail_next(&self, n: usize, status: u16) {
        for _ in 0..n {
            self.push_response(status, r#"{"error":"scripted failure"}"#);
        }
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        // Poke the listener so `incoming()` wakes up and sees the flag.
        let _ = TcpStream::connect(self.addr);
        if let Some(handle) = self.acceptor.take() {
            let _ = handle.join();
        }
    }
}

fn handle_connection(stream: TcpStream, state: &ServerState) {
    let _ = serve_one(stream, state);
}

fn serve_one(mut stream: TcpStream, state: &ServerState) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut request_line = String::new();
    if reader.read_line(&mut request_line)? == 0 {
        return Ok(()); // shutdown poke or dropped connection
    }
    let mut parts = request_line.split_whitespace();
    let method = parts.next().unwrap_or_default().to_string();
    let path = parts.next().unwrap_or_default().to_string();

    let mut content_length = 0usize;
    loop {
        let mut line = String::new();
        reader.read_line(&mut line)?;
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        if let Some(value) = line.to_ascii_lowercase().strip_prefix("content-length:") {
            content_length = value.trim().parse().unwrap_or(0);
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body)?;

    let current = state.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
    state.max_in_flight.fetch_max(current, Ordering::SeqCst);
    state.handled.fetch_add(1, Ordering::SeqCst);
    let latency = *state.latency.lock().expect("latency lock");
    if !latency.is_zero() {
        std::thread::sleep(latency);
    }

    let scripted = state.script.lock().expect("script lock").pop_front();
    let (status, reply) = match scripted {
        Some(s) => (s.status, s.body),
        None => route(&method, &path, &body, state),
    };
    let result = write_response(&mut stream, status, &reply);
    state.in_flight.fetch_sub(1, Ordering::SeqCst);
    result
}

fn route(method: &str, path: &str, body: &[u8], state: &ServerState) -> (u16, String) {
    if method != "POST" {
        return (405, r#"{"error":"method not allowed"}"#.into());
    }
    match path {
        "/v1/embeddings" => embeddings_route(body, state),
        "/v1/chat/completions" => chat_route(body, state),
        _ => (404, r#"{"error":"no such route"}"#.into()),
    }
}

fn embeddings_route(body: &[u8], state: &ServerState) -> (u16, String) {
    let Ok(request) = serde_json::from_slice::<serde_json::Value>(body) else {
        return (400, r#"{"error":"bad json"}"#.into());
    };
    let model = request.get("model").and_then(|m| m.as_str()).unwrap_or("mock-embed");
    let Some(inputs) = request.get("input").and_then(|i| i.as_array()) else {
        return (400, r#"{"error":"missing input"}"#.into());
    };
    let data: Vec<serde_json::Value> = inputs
        .iter()
        .enumerate()
        .map(|(index, text)| {
            let text = text.as_str().unwrap_or_default();
            serde_json::json!({
                "object": "embedding",
                "index": index,
                "embedding": state.embedder.embed_one(text),
            })
        })
        .collect();
    let reply = serde_json::json!({
        "object": "list",
        "data": data,
        "model": model,
        "usage": {"prompt_tokens": 0, "total_tokens": 0},
    });
    (200, reply.to_string())
}

fn chat_route(body: &[u8], state: &ServerState) -> (u16, String) {
    let Ok(request) = serde_json::from_slice::<serde_json::Value>(body) else {
        return (400, r#"{"error":"bad json"}"#.into());
    };
    let model = request.get("model").and_then(|m| m.as_str()).unwrap_or("mock-chat");
    let Some(raw_messages) = request.get("messages").and_then(|m| m.as_array()) else {
        return (400, r#"{"error":"missing messages"}"#.into());
    };
    let messages: Vec<ChatMessage> = raw_messages
        .iter()
        .map(|m| {
            let role = match m.get("role").and_then(|r| r.as_str()) {
                Some("system") => Role::System,
                Some("assistant") => Role::Assistant,
                _ => Role::User,
            };
            let content = m.get("content").and_then(|c| c.as_str()).unwrap_or_default();
            ChatMessage { role, content: content.to_string() }
        })
        .collect();
    let chat_request = ChatRequest {
        model_id: model.to_string(),
        messages,
        temperature: request.get("temperature").and_then(|t| t.as_f64()).unwrap_or(0.0),
        max_tokens: request.get("max_tokens").and_then(|t| t.as_u64()).unwrap_or(256) as u32,
    };
    let response = state.chat.respond(&chat_request);
    let reply = serde_json::json!({
        "model": model,
        "choices": [{
            "index": 0,
            "message": {"role": "assistant", "content": response.content},
            "finish_reason": response.finish_reason,
        }],
        "usage": {
            "prompt_tokens": response.usage.prompt_tokens,
            "completion_tokens": response.usage.completion_tokens,
        },
    });
    (200, reply.to_string())
}

fn write_response(stream: &mut TcpStream, status: u16, body: &str) -> std::io::Result<()> {
    let reason = match status {
        200 => "OK",
        400 => "Bad Request",
        401 => "Unauthorized",
        404 => "Not Found",
        405 => "Method Not Allowed",
        429 => "Too Many Requests",
        500 => "Internal Server Error",
        503 => "Service Unavailable",
        _ => "Response",
    };
    write!(
        stream,
        "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )?;
    stream.flush()
}
