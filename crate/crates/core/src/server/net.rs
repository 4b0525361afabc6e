//! WebSocket and HTTP front door for a [`Rig`].
//!
//! `GET /status` answers with the status JSON. Any request carrying
//! `Upgrade: websocket` becomes a session: text frames in are control
//! messages (each answered with one text reply), binary frames out are
//! broadcast wire messages.

use std::io::{self, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use tungstenite::{Error as WsError, Message};

use super::rig::Rig;

pub const DEFAULT_PORT: u16 = 9271;
pub const PORT_ENV: &str = "NEURIG_PORT";

const POLL: Duration = Duration::from_millis(10);
const MAX_REQUEST: usize = 16 * 1024;

/// Port from `NEURIG_PORT`, else [`DEFAULT_PORT`].
pub fn default_port() -> u16 {
    std::env::var(PORT_ENV)
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(DEFAULT_PORT)
}

pub struct Server {
    local_addr: SocketAddr,
    stop: Arc<AtomicBool>,
    accept: Option<JoinHandle<()>>,
}

impl Server {
    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    pub fn shutdown(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        self.shutdown();
    }
}

pub fn serve(rig: Arc<Rig>, addr: impl ToSocketAddrs) -> io::Result<Server> {
    let listener = TcpListener::bind(addr)?;
    listener.set_nonblocking(true)?;
    let local_addr = listener.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let flag = stop.clone();
    let accept = std::thread::Builder::new()
        .name("neurig-accept".into())
        .spawn(move || {
            let mut conns: Vec<JoinHandle<()>> = Vec::new();
            while !flag.load(Ordering::SeqCst) {
                match listener.accept() {
                    Ok((stream, peer)) => {
                        let rig = rig.clone();
                        let flag = flag.clone();
                        log::debug!("connection from {peer}");
                        conns.push(std::thread::spawn(move || {
                            if let Err(e) = handle(stream, &rig, &flag) {
                                log::debug!("connection {peer} closed: {e}");
                            }
                        }));
                        conns.retain(|h| !h.is_finished());
                    }
                    Err(e) if e.kind() == io::ErrorKind::WouldBlock => std::thread::sleep(POLL),
                    Err(e) => {
                        log::warn!("accept failed: {e}");
                        std::thread::sleep(POLL);
                    }
                }
            }
            for h in conns {
                let _ = h.join();
            }
        })?;
    Ok(Server {
        local_addr,
        stop,
        accept: Some(accept),
    })
}

/// Peek the request head without consuming it, so the WebSocket handshake
/// can reread it.
fn peek_head(stream: &TcpStream, stop: &AtomicBool) -> io::Result<String> {
    let mut buf = vec![0u8; MAX_REQUEST];
    loop {
        let n = match stream.peek(&mut buf) {
            Ok(n) => n,
            Err(e)
                if matches!(
                    e.kind(),
                    io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut
                ) =>
            {
                0
            }
            Err(e) => return Err(e),
        };
        if let Some(end) = buf[..n].windows(4).position(|w| w == b"\r\n\r\n") {
            return Ok(String::from_utf8_lossy(&buf[..end]).into_owned());
        }
        if n == MAX_REQUEST {
            return Err(io::Error::new(
                io::ErrorKind::InvalidData,
                "request head too large",
            ));
        }
        if stop.load(Ordering::SeqCst) {
            return Err(io::Error::new(
                io::ErrorKind::Interrupted,
                "server stopping",
            ));
        }
        std::thread::sleep(Duration::from_millis(1));
    }
}

fn handle(stream: TcpStream, rig: &Rig, stop: &AtomicBool) -> io::Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_read_timeout(Some(POLL))?;
    let head = peek_head(&stream, stop)?;
    let mut lines = head.lines();
    let request_line = lines.next().unwrap_or_default().to_string();
    let upgrade = lines.any(|l| {
        l.split_once(':').is_some_and(|(k, v)| {
            k.trim().eq_ignore_ascii_case("upgrade") && v.trim().eq_ignore_ascii_case("websocket")
        })
    });
    if upgrade {
        websocket(stream, rig, stop)
    } else {
        http(stream, &head, &request_line, rig)
    }
}

fn http(mut stream: TcpStream, head: &str, request_line: &str, rig: &Rig) -> io::Result<()> {
    let mut consumed = vec![0u8; head.len() + 4];
    stream.read_exact(&mut consumed)?;
    let mut parts = request_line.split_whitespace();
    let (method, path) = (parts.next().unwrap_or(""), parts.next().unwrap_or(""));
    let (status, body) = match (method, path) {
        ("GET", "/status") => match rig.status() {
            Some(s) => ("200 OK", serde_json::to_string(&s).unwrap_or_default()),
            None => (
                "503 Service Unavailable",
                r#"{"error":"rig has shut down"}"#.to_string(),
            ),
        },
        ("GET", _) => ("404 Not Found", r#"{"error":"not found"}"#.to_string()),
        _ => (
            "405 Method Not Allowed",
            r#"{"error":"method not allowed"}"#.to_string(),
        ),
    };
    write!(
        stream,
        "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )?;
    stream.flush()
}

fn ws_io(e: WsError) -> io::Error {
    match e {
        WsError::Io(e) => e,
        other => io::Error::other(other.to_string()),
    }
}

fn websocket(stream: TcpStream, rig: &Rig, stop: &AtomicBool) -> io::Result<()> {
    stream.set_read_timeout(None)?;
    let mut ws = tungstenite::accept(stream).map_err(|e| io::Error::other(e.to_string()))?;
    ws.get_ref().set_read_timeout(Some(POLL))?;
    let sub = rig.subscribe();
    loop {
        if stop.load(Ordering::SeqCst) {
            let _ = ws.close(None);
            let _ = ws.flush();
            return Ok(());
        }
        match ws.read() {
            Ok(Message::Text(text)) => {
                let reply = rig.control_text(text.as_str());
                ws.send(Message::text(reply)).map_err(ws_io)?;
            }
            Ok(Message::Close(_)) => return Ok(()),
            Ok(_) => {}
            Err(WsError::Io(e))
                if matches!(
                    e.kind(),
                    io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut
                ) => {}
            Err(WsError::ConnectionClosed | WsError::AlreadyClosed) => return Ok(()),
            Err(e) => return Err(ws_io(e)),
        }
        let mut wrote = false;
        while let Some(frame) = sub.try_recv() {
            ws.write(Message::binary(frame.as_ref().clone()))
                .map_err(ws_io)?;
            wrote = true;
        }
        if wrote {
            ws.flush().map_err(ws_io)?;
        }
    }
}
