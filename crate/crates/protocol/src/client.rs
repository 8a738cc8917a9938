use std::io::{self, Read};
use std::net::{TcpStream, ToSocketAddrs};
use std::sync::Arc;
use std::time::Duration;

use edoc_core::sig::{Purpose, SigError, Signer, TrustStore};
use edoc_core::time::{self, Timestamp};
use thiserror::Error;

use crate::frame::{decode, read_frame, ProtocolError, MAX_FRAME};
use crate::message::{AMessage, Command, Direction, Response};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("timed out waiting for the platform")]
    Timeout,
    #[error("connection closed by the platform")]
    ConnectionClosed,
    #[error("response signature does not verify under the platform trust store")]
    BadResponseSignature,
    #[error("response does not answer the command: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("gateway returned HTTP {0}")]
    Http(u16),
    #[error("transport: {0}")]
    Transport(String),
    #[error(transparent)]
    Sig(#[from] SigError),
}

impl From<io::Error> for ClientError {
    fn from(e: io::Error) -> Self {
        match e.kind() {
            io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut => ClientError::Timeout,
            io::ErrorKind::UnexpectedEof | io::ErrorKind::ConnectionReset | io::ErrorKind::BrokenPipe => {
                ClientError::ConnectionClosed
            }
            _ => ClientError::Transport(e.to_string()),
        }
    }
}

/// Where commands go: a platform TCP port or a gateway tunnel URL.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    Tcp(String),
    Gateway(String),
}

impl Endpoint {
    /// `tcp://host:port`, bare `host:port`, or an `http://` tunnel URL.
    pub fn parse(s: &str) -> Result<Self, String> {
        if s.starts_with("http://") || s.starts_with("https://") {
            return Ok(Endpoint::Gateway(s.to_string()));
        }
        let addr = s.strip_prefix("tcp://").unwrap_or(s);
        match addr.rsplit_once(':') {
            Some((host, port)) if !host.is_empty() && port.parse::<u16>().is_ok() => Ok(Endpoint::Tcp(addr.to_string())),
            _ => Err(format!("bad endpoint `{s}`: expected host:port or an http:// URL")),
        }
    }
}

pub type Clock = Arc<dyn Fn() -> Timestamp + Send + Sync>;

/// A lockstep client holding the role key that signs its commands.
pub struct Client {
    endpoint: Endpoint,
    conn: Option<TcpStream>,
    signer: Signer,
    platform_trust: TrustStore,
    timeout: Duration,
    clock: Clock,
}

impl Client {
    pub fn new(endpoint: Endpoint, signer: Signer, platform_trust: TrustStore) -> Self {
        Client {
            endpoint,
            conn: None,
            signer,
            platform_trust,
            timeout: Duration::from_secs(30),
            clock: Arc::new(time::now),
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    /// Source of command timestamps.
    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    pub fn endpoint(&self) -> &Endpoint {
        &self.endpoint
    }

    pub fn signer(&self) -> &Signer {
        &self.signer
    }

    /// Signs `cmd` with a fresh msgId, nonce and timestamp.
    pub fn sign(&self, cmd: Command) -> Result<AMessage, ClientError> {
        Ok(AMessage::command(cmd, &self.signer, (self.clock)())?)
    }

    pub fn call(&mut self, cmd: Command) -> Result<Response, ClientError> {
        let msg = self.sign(cmd)?;
        let resp = self.call_message(&msg)?;
        Ok(resp.as_response().cloned().expect("checked by call_message"))
    }

    /// Sends a prepared command and checks the response: msgId echo,
    /// direction and a valid platform signature.
    pub fn call_message(&mut self, msg: &AMessage) -> Result<AMessage, ClientError> {
        let frame = crate::frame::encode(msg);
        let bytes = self.send_frame(&frame)?;
        let resp = decode(&bytes, MAX_FRAME)?;
        if resp.header.direction != Direction::Response {
            return Err(ClientError::Mismatch("not a response".into()));
        }
        if resp.header.msg_id != msg.header.msg_id {
            return Err(ClientError::Mismatch(format!(
                "msgId {} answers {}",
                resp.header.msg_id, msg.header.msg_id
            )));
        }
        let report = resp.verify(&self.platform_trust, &time::now());
        if !report.is_valid() || resp.signature.purpose != Purpose::Platform {
            return Err(ClientError::BadResponseSignature);
        }
        Ok(resp)
    }

    /// Sends one complete frame and returns the complete response frame,
    /// both verbatim.
    pub fn send_frame(&mut self, frame: &[u8]) -> Result<Vec<u8>, ClientError> {
        match self.endpoint.clone() {
            Endpoint::Tcp(addr) => {
                let result = self.send_tcp(&addr, frame);
                if result.is_err() {
                    self.conn = None;
                }
                result
            }
            Endpoint::Gateway(url) => self.send_http(&url, frame),
        }
    }

    fn send_tcp(&mut self, addr: &str, frame: &[u8]) -> Result<Vec<u8>, ClientError> {
        if self.conn.is_none() {
            let sock = addr
                .to_socket_addrs()?
                .next()
                .ok_or_else(|| ClientError::Transport(format!("cannot resolve {addr}")))?;
            let s = TcpStream::connect_timeout(&sock, self.timeout)?;
            s.set_read_timeout(Some(self.timeout))?;
            s.set_write_timeout(Some(self.timeout))?;
            s.set_nodelay(true)?;
            self.conn = Some(s);
        }
        let conn = self.conn.as_mut().unwrap();
        io::Write::write_all(conn, frame)?;
        let payload = match read_frame(conn, MAX_FRAME) {
            Ok(Some(p)) => p,
            Ok(None) => return Err(ClientError::ConnectionClosed),
            Err(ProtocolError::Io(e)) => return Err(e.into()),
            Err(e) => return Err(e.into()),
        };
        let mut out = Vec::with_capacity(4 + payload.len());
        out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
        out.extend_from_slice(&payload);
        Ok(out)
    }

    fn send_http(&self, url: &str, frame: &[u8]) -> Result<Vec<u8>, ClientError> {
        let agent = ureq::AgentBuilder::new().timeout(self.timeout).build();
        match agent
            .post(url)
            .set("Content-Type", "application/octet-stream")
            .send_bytes(frame)
        {
            Ok(resp) => {
                let mut out = Vec::new();
                resp.into_reader()
                    .take((MAX_FRAME + 5) as u64)
                    .read_to_end(&mut out)?;
                Ok(out)
            }
            Err(ureq::Error::Status(code, _)) => Err(ClientError::Http(code)),
            Err(e) => Err(ClientError::Transport(e.to_string())),
        }
    }
}
