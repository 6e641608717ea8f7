//! TCP and WebSocket front ends. Both carry identical frames; on WebSocket
//! each binary message holds exactly one frame.

use std::io::{self, ErrorKind, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::mpsc::{Receiver, RecvTimeoutError, TryRecvError};
use std::thread;
use std::time::Duration;

use log::{debug, info, warn};
use tungstenite::handshake::server::{ErrorResponse, Request, Response};
use tungstenite::http::StatusCode;

use crate::codec::{decode, err_code, DecodeError, FrameReader};
use crate::runtime::{Inbound, RuntimeHandle, SessionControl};

pub const DEFAULT_TCP_PORT: u16 = 4501;
pub const DEFAULT_WS_PORT: u16 = 4502;
pub const WS_PATH: &str = "/ws";

/// Give up on a client that stops reading for this long.
const WRITE_TIMEOUT: Duration = Duration::from_secs(10);
const POLL: Duration = Duration::from_millis(20);

/// Map a decode failure to (error code, close connection?).
fn violation(session: u32, e: &DecodeError) -> Inbound {
    let (code, close) = match e {
        DecodeError::BadMagic => (err_code::BAD_MAGIC, true),
        DecodeError::UnsupportedVersion(_) => (err_code::BAD_VERSION, true),
        DecodeError::OversizedFrame(_) => (err_code::OVERSIZED, true),
        DecodeError::UnknownType { .. } => (err_code::UNKNOWN_TYPE, false),
        DecodeError::Malformed { .. } | DecodeError::TruncatedFrame { .. } => (err_code::MALFORMED, false),
    };
    Inbound::Violation { session, code, message: e.to_string(), close }
}

/// Bind a TCP listener and serve connections on a background thread.
pub fn listen_tcp(addr: impl ToSocketAddrs, handle: RuntimeHandle) -> io::Result<SocketAddr> {
    let listener = TcpListener::bind(addr)?;
    let local = listener.local_addr()?;
    info!("tcp listening on {local}");
    thread::Builder::new().name("nbca-tcp-accept".into()).spawn(move || {
        for stream in listener.incoming() {
            match stream {
                Ok(s) => {
                    let h = handle.clone();
                    if let Err(e) = serve_tcp(s, h) {
                        warn!("tcp connection setup failed: {e}");
                    }
                }
                Err(e) => warn!("tcp accept failed: {e}"),
            }
        }
    })?;
    Ok(local)
}

fn serve_tcp(stream: TcpStream, handle: RuntimeHandle) -> io::Result<()> {
    stream.set_nodelay(true)?;
    stream.set_write_timeout(Some(WRITE_TIMEOUT))?;
    let mut writer = stream.try_clone()?;
    let mut reader = stream;
    let (session, outbox, control) = handle.open();
    debug!("tcp session {session} from {:?}", reader.peer_addr());

    thread::Builder::new().name(format!("nbca-tcp-w{session}")).spawn(move || {
        pump(&outbox, &control, |bytes| writer.write_all(bytes));
        let _ = writer.shutdown(std::net::Shutdown::Both);
    })?;

    thread::Builder::new().name(format!("nbca-tcp-r{session}")).spawn(move || {
        let mut frames = FrameReader::new();
        let mut buf = [0u8; 16 * 1024];
        'conn: loop {
            let n = match reader.read(&mut buf) {
                Ok(0) | Err(_) => break,
                Ok(n) => n,
            };
            frames.push(&buf[..n]);
            loop {
                match frames.next_message() {
                    Ok(Some(msg)) => handle.send(Inbound::Message { session, msg }),
                    Ok(None) => break,
                    Err(e) => {
                        let v = violation(session, &e);
                        let fatal = matches!(v, Inbound::Violation { close: true, .. });
                        handle.send(v);
                        if fatal {
                            break 'conn;
                        }
                    }
                }
            }
        }
        handle.send(Inbound::Closed { session });
    })?;
    Ok(())
}

/// Forward queued frames until the runtime closes the session or the
/// socket fails, then deliver any parting frame.
fn pump(outbox: &Receiver<Vec<u8>>, control: &SessionControl, mut write: impl FnMut(&[u8]) -> io::Result<()>) {
    loop {
        if control.is_closing() {
            break;
        }
        match outbox.recv_timeout(POLL) {
            Ok(bytes) => {
                if write(&bytes).is_err() {
                    return;
                }
            }
            Err(RecvTimeoutError::Timeout) => {}
            Err(RecvTimeoutError::Disconnected) => break,
        }
    }
    if let Some(last) = control.take_last_words() {
        let _ = write(&last);
    }
}

/// Bind a WebSocket listener (path [`WS_PATH`]) on a background thread.
pub fn listen_ws(addr: impl ToSocketAddrs, handle: RuntimeHandle) -> io::Result<SocketAddr> {
    let listener = TcpListener::bind(addr)?;
    let local = listener.local_addr()?;
    info!("websocket listening on ws://{local}{WS_PATH}");
    thread::Builder::new().name("nbca-ws-accept".into()).spawn(move || {
        for stream in listener.incoming() {
            let Ok(stream) = stream else { continue };
            let h = handle.clone();
            let _ = thread::Builder::new().name("nbca-ws".into()).spawn(move || serve_ws(stream, h));
        }
    })?;
    Ok(local)
}

fn serve_ws(stream: TcpStream, handle: RuntimeHandle) {
    let _ = stream.set_nodelay(true);
    let _ = stream.set_write_timeout(Some(WRITE_TIMEOUT));
    let check_path = |req: &Request, resp: Response| -> Result<Response, ErrorResponse> {
        if req.uri().path() == WS_PATH {
            Ok(resp)
        } else {
            let mut err = ErrorResponse::new(Some(format!("no endpoint at {}", req.uri().path())));
            *err.status_mut() = StatusCode::NOT_FOUND;
            Err(err)
        }
    };
    let mut ws = match tungstenite::accept_hdr(stream, check_path) {
        Ok(ws) => ws,
        Err(e) => {
            debug!("websocket handshake failed: {e}");
            return;
        }
    };
    if ws.get_mut().set_read_timeout(Some(POLL)).is_err() {
        return;
    }
    let (session, outbox, control) = handle.open();
    debug!("websocket session {session}");
    let send = |ws: &mut tungstenite::WebSocket<TcpStream>, bytes: Vec<u8>| ws.send(tungstenite::Message::binary(bytes));

    'conn: loop {
        loop {
            match outbox.try_recv() {
                Ok(bytes) => {
                    if send(&mut ws, bytes).is_err() {
                        break 'conn;
                    }
                }
                Err(TryRecvError::Empty) => break,
                Err(TryRecvError::Disconnected) => {
                    if !control.is_closing() {
                        break 'conn;
                    }
                    break;
                }
            }
        }
        if control.is_closing() {
            if let Some(last) = control.take_last_words() {
                let _ = send(&mut ws, last);
            }
            let _ = ws.close(None);
            let _ = ws.flush();
            break;
        }
        match ws.read() {
            Ok(tungstenite::Message::Binary(data)) => {
                // One frame per message; a short or padded message is malformed.
                match decode(&data) {
                    Ok((msg, used)) if used == data.len() => handle.send(Inbound::Message { session, msg }),
                    Ok(_) => handle.send(Inbound::Violation {
                        session,
                        code: err_code::MALFORMED,
                        message: "more than one frame in a message".into(),
                        close: false,
                    }),
                    Err(e) => {
                        let v = violation(session, &e);
                        let fatal = matches!(v, Inbound::Violation { close: true, .. });
                        handle.send(v);
                        if fatal {
                            // Let the runtime's parting ERR go out first.
                            continue;
                        }
                    }
                }
            }
            Ok(tungstenite::Message::Close(_)) => break,
            Ok(_) => {}
            Err(tungstenite::Error::Io(e)) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
            Err(_) => break,
        }
    }
    handle.send(Inbound::Closed { session });
}
