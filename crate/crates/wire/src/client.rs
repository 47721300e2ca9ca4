use std::io::{BufReader, BufWriter};
use std::net::{TcpStream, ToSocketAddrs};
use std::time::Duration;

use embed_router_core::ExpertEntry;

use crate::codec::{read_message, write_message, MatchRequest, MatchResult, Message, Status};
use crate::WireError;

/// Synchronous single-connection client.
pub struct Client {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
    next_id: u64,
}

impl Client {
    /// Connects with `timeout` bounding the connect and every later read
    /// and write.
    pub fn connect(addr: &str, timeout: Duration) -> Result<Client, WireError> {
        let connect_err = |source| WireError::Connect {
            addr: addr.to_string(),
            source,
        };
        let mut last = None;
        let mut stream = None;
        for sa in addr.to_socket_addrs().map_err(connect_err)? {
            match TcpStream::connect_timeout(&sa, timeout) {
                Ok(s) => {
                    stream = Some(s);
                    break;
                }
                Err(e) => last = Some(e),
            }
        }
        let stream = match (stream, last) {
            (Some(s), _) => s,
            (None, Some(e)) if matches!(e.kind(), std::io::ErrorKind::TimedOut | std::io::ErrorKind::WouldBlock) => {
                return Err(WireError::Timeout)
            }
            (None, Some(e)) => return Err(connect_err(e)),
            (None, None) => {
                return Err(connect_err(std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    "address resolved to nothing",
                )))
            }
        };
        stream.set_read_timeout(Some(timeout))?;
        stream.set_write_timeout(Some(timeout))?;
        stream.set_nodelay(true)?;
        Ok(Client {
            reader: BufReader::new(stream.try_clone()?),
            writer: BufWriter::new(stream),
            next_id: 1,
        })
    }

    /// Sends one frame and waits for the reply. ERROR replies become
    /// [`WireError::Server`].
    pub fn request(&mut self, msg: &Message) -> Result<Message, WireError> {
        write_message(&mut self.writer, msg)?;
        match read_message(&mut self.reader)? {
            Message::Error { code, message } => Err(WireError::Server { code, message }),
            reply => Ok(reply),
        }
    }

    pub fn match_embedding(
        &mut self,
        embedding: &[f32],
        threshold: f32,
        want_fine: bool,
    ) -> Result<MatchResult, WireError> {
        let request_id = self.next_id;
        self.next_id += 1;
        let req = MatchRequest {
            request_id,
            embedding: embedding.to_vec(),
            threshold,
            want_fine,
        };
        match self.request(&Message::Match(req))? {
            Message::MatchResult(r) if r.request_id == request_id => Ok(r),
            Message::MatchResult(r) => Err(WireError::Protocol(format!(
                "reply to request {} answered {request_id}",
                r.request_id
            ))),
            other => Err(unexpected(&other)),
        }
    }

    pub fn register(&mut self, entry: &ExpertEntry) -> Result<Status, WireError> {
        match self.request(&Message::Register(entry.clone()))? {
            Message::Pong(s) => Ok(s),
            other => Err(unexpected(&other)),
        }
    }

    pub fn ping(&mut self) -> Result<Status, WireError> {
        match self.request(&Message::Ping)? {
            Message::Pong(s) => Ok(s),
            other => Err(unexpected(&other)),
        }
    }
}

fn unexpected(m: &Message) -> WireError {
    WireError::Protocol(format!("unexpected {:?} reply", m.msg_type()))
}

/// One-shot match over a fresh connection.
pub fn client_match(
    addr: &str,
    embedding: &[f32],
    threshold: f32,
    want_fine: bool,
    timeout: Duration,
) -> Result<MatchResult, WireError> {
    Client::connect(addr, timeout)?.match_embedding(embedding, threshold, want_fine)
}
