use std::io::{BufReader, BufWriter};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use embed_router_core::matcher::{route, MatchError, SharedIndex};
use embed_router_core::Embedding;

use crate::codec::{read_message, write_message, MatchRequest, MatchResult, Message, Status, NO_ID};
use crate::{ErrorCode, WireError};

/// Registry server: one thread per connection over a shared index.
pub struct Server {
    listener: TcpListener,
    index: SharedIndex,
    stop: Arc<AtomicBool>,
}

impl Server {
    pub fn bind(addr: impl ToSocketAddrs, index: SharedIndex) -> std::io::Result<Server> {
        Ok(Server {
            listener: TcpListener::bind(addr)?,
            index,
            stop: Arc::new(AtomicBool::new(false)),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.listener.local_addr().expect("bound listener has an address")
    }

    pub fn index(&self) -> &SharedIndex {
        &self.index
    }

    /// Accepts connections until stopped through a [`ServerHandle`].
    pub fn run(self) -> std::io::Result<()> {
        log::info!("listening on {}", self.local_addr());
        for conn in self.listener.incoming() {
            if self.stop.load(Ordering::SeqCst) {
                break;
            }
            match conn {
                Ok(stream) => {
                    let index = self.index.clone();
                    std::thread::spawn(move || {
                        let peer = stream.peer_addr().ok();
                        if let Err(e) = handle_connection(stream, &index) {
                            log::debug!("connection {peer:?}: {e}");
                        }
                    });
                }
                Err(e) => log::warn!("accept failed: {e}"),
            }
        }
        Ok(())
    }

    /// Runs the accept loop on a background thread.
    pub fn spawn(self) -> ServerHandle {
        let addr = self.local_addr();
        let stop = Arc::clone(&self.stop);
        let index = self.index.clone();
        let thread = std::thread::spawn(move || {
            if let Err(e) = self.run() {
                log::error!("server stopped: {e}");
            }
        });
        ServerHandle {
            addr,
            index,
            stop,
            thread: Some(thread),
        }
    }
}

/// Handle to a spawned server; stops it on drop.
pub struct ServerHandle {
    addr: SocketAddr,
    index: SharedIndex,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn index(&self) -> &SharedIndex {
        &self.index
    }

    /// Stops accepting new connections. Open connections finish on their own.
    pub fn shutdown(mut self) {
        self.stop_now();
    }

    fn stop_now(&mut self) {
        if let Some(t) = self.thread.take() {
            self.stop.store(true, Ordering::SeqCst);
            // wake the blocking accept
            let _ = TcpStream::connect(self.addr);
            let _ = t.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop_now();
    }
}

fn handle_connection(stream: TcpStream, index: &SharedIndex) -> Result<(), WireError> {
    stream.set_nodelay(true)?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream);
    loop {
        let msg = match read_message(&mut reader) {
            Ok(m) => m,
            Err(WireError::Closed) => return Ok(()),
            Err(e @ (WireError::Protocol(_) | WireError::Truncation { .. } | WireError::Size(_))) => {
                let reply = Message::Error {
                    code: e.code(),
                    message: e.to_string(),
                };
                let _ = write_message(&mut writer, &reply);
                return Err(e);
            }
            Err(e) => return Err(e),
        };
        let (reply, keep_open) = respond(msg, index);
        write_message(&mut writer, &reply)?;
        if !keep_open {
            return Ok(());
        }
    }
}

/// Computes the reply to one request and whether the connection stays open.
pub(crate) fn respond(msg: Message, index: &SharedIndex) -> (Message, bool) {
    match msg {
        Message::Register(entry) => {
            let id = entry.expert_id;
            let (replaced, entries) = index.register(entry);
            log::info!("registered expert {id} (replaced: {replaced}), {entries} entries");
            let status = Status {
                entries: entries as u32,
                replaced,
            };
            (Message::Pong(status), true)
        }
        Message::Ping => {
            let status = Status {
                entries: index.len() as u32,
                replaced: false,
            };
            (Message::Pong(status), true)
        }
        Message::Match(req) => match answer(&req, index) {
            Ok(r) => (Message::MatchResult(r), true),
            Err((code, message)) => (Message::Error { code, message }, true),
        },
        other => (
            Message::Error {
                code: ErrorCode::PROTOCOL,
                message: format!("{:?} is not a request", other.msg_type()),
            },
            false,
        ),
    }
}

fn answer(req: &MatchRequest, index: &SharedIndex) -> Result<MatchResult, (ErrorCode, String)> {
    if req.threshold.is_nan() {
        return Err((ErrorCode::INVALID_REQUEST, "threshold is NaN".into()));
    }
    let x = Embedding::from_f32(&req.embedding).map_err(|e| (ErrorCode::INVALID_REQUEST, e.to_string()))?;
    let snapshot = index.snapshot();
    let a = route(&x, &snapshot, f64::from(req.threshold), req.want_fine).map_err(|e| match e {
        MatchError::EmptyIndex => (ErrorCode::EMPTY_INDEX, e.to_string()),
        other => (ErrorCode::INTERNAL, other.to_string()),
    })?;
    Ok(MatchResult {
        request_id: req.request_id,
        expert_id: a.expert_id.unwrap_or(NO_ID),
        class_id: a.class_id.unwrap_or(NO_ID),
        rejected: a.rejected,
        score: a.top_score() as f32,
    })
}
