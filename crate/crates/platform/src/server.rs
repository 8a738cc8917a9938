use std::collections::BTreeMap;
use std::io::{self, BufReader, BufWriter, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, Weak};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use edoc_core::xml::Element;
use edoc_protocol::frame::{read_frame, write_frame, ProtocolError, MAX_FRAME};
use edoc_protocol::codes;

use crate::platform::{Platform, PortController};
use crate::ports::{PortSpec, Visibility, ADMIN_PORT};

struct Listener {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    conns: Arc<Mutex<Vec<TcpStream>>>,
    thread: Option<JoinHandle<()>>,
}

impl Listener {
    fn halt(mut self) {
        self.stop.store(true, Ordering::SeqCst);
        for c in self.conns.lock().unwrap().drain(..) {
            let _ = c.shutdown(Shutdown::Both);
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

/// Runs the TCP listeners of the configured ports.
pub struct Server {
    platform: Arc<Platform>,
    listeners: Mutex<BTreeMap<String, Listener>>,
    /// Addresses assigned on first start, reused on restart.
    bound: Mutex<BTreeMap<String, SocketAddr>>,
}

impl Server {
    /// Starts every configured port and attaches itself to the platform for
    /// PortControl.
    pub fn start(platform: Arc<Platform>) -> io::Result<Arc<Server>> {
        let server = Arc::new(Server {
            platform: platform.clone(),
            listeners: Mutex::new(BTreeMap::new()),
            bound: Mutex::new(BTreeMap::new()),
        });
        for p in &platform.ports().ports {
            server.start_port(&p.name)?;
        }
        let weak: Weak<dyn PortController> = Arc::downgrade(&(server.clone() as Arc<dyn PortController>));
        platform.set_port_controller(weak);
        Ok(server)
    }

    pub fn platform(&self) -> &Arc<Platform> {
        &self.platform
    }

    pub fn addr(&self, port: &str) -> Option<SocketAddr> {
        self.listeners.lock().unwrap().get(port).map(|l| l.addr)
    }

    pub fn is_running(&self, port: &str) -> bool {
        self.listeners.lock().unwrap().contains_key(port)
    }

    pub fn start_port(&self, name: &str) -> io::Result<SocketAddr> {
        let spec = self
            .platform
            .ports()
            .get(name)
            .cloned()
            .ok_or_else(|| io::Error::new(io::ErrorKind::NotFound, format!("unknown port {name}")))?;
        let mut listeners = self.listeners.lock().unwrap();
        if let Some(l) = listeners.get(name) {
            return Ok(l.addr);
        }
        let addr = match self.bound.lock().unwrap().get(name) {
            Some(a) => *a,
            None => {
                let host = if spec.visibility == Visibility::Loopback { "127.0.0.1" } else { "0.0.0.0" };
                format!("{host}:{}", spec.tcp_port).parse().expect("valid socket address")
            }
        };
        let listener = TcpListener::bind(addr)?;
        let addr = listener.local_addr()?;
        listener.set_nonblocking(true)?;
        self.bound.lock().unwrap().insert(name.to_string(), addr);
        let stop = Arc::new(AtomicBool::new(false));
        let conns = Arc::new(Mutex::new(Vec::new()));
        let thread = {
            let (stop, conns, platform) = (stop.clone(), conns.clone(), self.platform.clone());
            thread::spawn(move || accept_loop(listener, spec, platform, stop, conns))
        };
        log::info!("port {name} listening on {addr}");
        listeners.insert(
            name.to_string(),
            Listener {
                addr,
                stop,
                conns,
                thread: Some(thread),
            },
        );
        Ok(addr)
    }

    pub fn stop_port(&self, name: &str) {
        let l = self.listeners.lock().unwrap().remove(name);
        if let Some(l) = l {
            l.halt();
            log::info!("port {name} stopped");
        }
    }

    pub fn shutdown(&self) {
        let all: Vec<_> = std::mem::take(&mut *self.listeners.lock().unwrap()).into_values().collect();
        for l in all {
            l.halt();
        }
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        self.shutdown();
    }
}

impl PortController for Server {
    fn control(&self, name: &str, action: &str) -> Result<Element, (&'static str, String)> {
        if self.platform.ports().get(name).is_none() {
            return Err((codes::UNKNOWN_PORT, format!("no port named {name}")));
        }
        match action {
            "start" => {
                self.start_port(name).map_err(|e| (codes::INTERNAL, e.to_string()))?;
            }
            "stop" => {
                if name == ADMIN_PORT {
                    return Err((codes::CANNOT_STOP_ADMIN, "the admin port cannot be stopped".into()));
                }
                self.stop_port(name);
            }
            "status" => {}
            other => return Err((codes::INVALID_ARGUMENT, format!("unknown action {other}"))),
        }
        let mut e = Element::new("port")
            .attr("name", name)
            .attr("running", self.is_running(name).to_string());
        if let Some(a) = self.addr(name) {
            e.set_attr("addr", a.to_string());
        }
        Ok(e)
    }
}

fn accept_loop(
    listener: TcpListener,
    spec: PortSpec,
    platform: Arc<Platform>,
    stop: Arc<AtomicBool>,
    conns: Arc<Mutex<Vec<TcpStream>>>,
) {
    let mut workers: Vec<JoinHandle<()>> = Vec::new();
    while !stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, peer)) => {
                if !spec.visibility.allows(peer.ip()) {
                    log::warn!("port {}: refused connection from {peer}", spec.name);
                    let _ = stream.shutdown(Shutdown::Both);
                    continue;
                }
                let _ = stream.set_nonblocking(false);
                if let Ok(c) = stream.try_clone() {
                    conns.lock().unwrap().push(c);
                }
                let (platform, name) = (platform.clone(), spec.name.clone());
                workers.push(thread::spawn(move || serve_connection(stream, &name, &platform)));
                workers.retain(|w| !w.is_finished());
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(10)),
            Err(e) => {
                log::warn!("port {}: accept failed: {e}", spec.name);
                thread::sleep(Duration::from_millis(50));
            }
        }
    }
    for c in conns.lock().unwrap().drain(..) {
        let _ = c.shutdown(Shutdown::Both);
    }
    for w in workers {
        let _ = w.join();
    }
}

fn serve_connection(stream: TcpStream, port: &str, platform: &Platform) {
    let Ok(write_half) = stream.try_clone() else { return };
    let mut reader = BufReader::new(stream);
    let mut writer = BufWriter::new(write_half);
    loop {
        match read_frame(&mut reader, MAX_FRAME) {
            Ok(Some(payload)) => {
                let resp = platform.handle_payload(port, &payload);
                if write_frame(&mut writer, &resp).and_then(|_| writer.flush()).is_err() {
                    return;
                }
            }
            Ok(None) => return,
            Err(e @ ProtocolError::FrameTooLarge { .. }) | Err(e @ ProtocolError::MalformedFrame(_)) => {
                // The stream cannot be resynchronised: answer once and close.
                let resp = platform.handle_payload(port, e.to_string().as_bytes());
                let _ = write_frame(&mut writer, &resp).and_then(|_| writer.flush());
                return;
            }
            Err(_) => return,
        }
    }
}
