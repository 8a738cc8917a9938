//! HTTP tunnel: `POST /aida/tunnel` carries one frame to a platform port
//! and returns the response frame. Bytes pass through untouched; the
//! gateway only reads length prefixes to find frame boundaries.

use std::io::{self, Read, Write};
use std::net::{SocketAddr, TcpStream, ToSocketAddrs};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use tiny_http::{Header, Method, Request, Response, Server, StatusCode};

use crate::frame::MAX_FRAME;

pub const TUNNEL_PATH: &str = "/aida/tunnel";

/// Request bodies up to this size are drained before a 413 so clients see
/// the status instead of a reset.
const DRAIN_LIMIT: u64 = 16 << 20;

pub struct Gateway {
    addr: SocketAddr,
    server: Arc<Server>,
    thread: Option<JoinHandle<()>>,
}

#[derive(Clone)]
struct Upstream {
    addr: String,
    cap: usize,
    timeout: Duration,
}

impl Gateway {
    /// Listens on `listen` and forwards to the platform port `upstream`.
    pub fn start(listen: &str, upstream: &str) -> io::Result<Gateway> {
        Self::start_with_cap(listen, upstream, MAX_FRAME)
    }

    pub fn start_with_cap(listen: &str, upstream: &str, cap: usize) -> io::Result<Gateway> {
        let server = Arc::new(Server::http(listen).map_err(|e| io::Error::other(e.to_string()))?);
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| io::Error::other("gateway must listen on an IP address"))?;
        let up = Upstream {
            addr: upstream.to_string(),
            cap,
            timeout: Duration::from_secs(30),
        };
        let srv = server.clone();
        let thread = thread::spawn(move || {
            for req in srv.incoming_requests() {
                let up = up.clone();
                thread::spawn(move || handle(req, &up));
            }
        });
        Ok(Gateway {
            addr,
            server,
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}{}", self.addr, TUNNEL_PATH)
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        self.server.unblock();
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for Gateway {
    fn drop(&mut self) {
        self.stop();
    }
}

fn status(req: Request, code: u16, msg: &str) {
    let _ = req.respond(Response::from_string(msg).with_status_code(StatusCode(code)));
}

fn handle(mut req: Request, up: &Upstream) {
    if req.url() != TUNNEL_PATH {
        return status(req, 404, "not found");
    }
    if *req.method() != Method::Post {
        return status(req, 405, "POST only");
    }
    let limit = up.cap + 4;
    if req.body_length().is_some_and(|n| n as u64 > DRAIN_LIMIT) {
        return status(req, 413, "frame too large");
    }
    let mut body = Vec::new();
    if let Err(e) = req.as_reader().take(DRAIN_LIMIT).read_to_end(&mut body) {
        return status(req, 400, &e.to_string());
    }
    if body.len() > limit {
        return status(req, 413, "frame too large");
    }
    match forward(&body, up) {
        Ok(bytes) => {
            let ct = Header::from_bytes(&b"Content-Type"[..], &b"application/octet-stream"[..]).unwrap();
            let _ = req.respond(Response::from_data(bytes).with_header(ct));
        }
        Err(e) => {
            log::warn!("tunnel to {} failed: {e}", up.addr);
            status(req, 502, "upstream unavailable")
        }
    }
}

fn forward(frame: &[u8], up: &Upstream) -> io::Result<Vec<u8>> {
    let addr = up
        .addr
        .to_socket_addrs()?
        .next()
        .ok_or_else(|| io::Error::new(io::ErrorKind::NotFound, "cannot resolve upstream"))?;
    let mut s = TcpStream::connect_timeout(&addr, up.timeout)?;
    s.set_read_timeout(Some(up.timeout))?;
    s.write_all(frame)?;
    s.flush()?;
    let mut len = [0u8; 4];
    s.read_exact(&mut len)?;
    let n = u32::from_be_bytes(len) as usize;
    if n > up.cap {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "upstream frame over cap"));
    }
    let mut out = Vec::with_capacity(4 + n);
    out.extend_from_slice(&len);
    out.resize(4 + n, 0);
    s.read_exact(&mut out[4..])?;
    Ok(out)
}
