//! Session transports. Each connection gets its own solver thread running
//! [`run_channel`]; the transport thread only moves text between the socket
//! and the solver's queues, so a slow client never blocks a solve.

use std::io::{self, BufRead, ErrorKind, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::mpsc::{self, Receiver, Sender, TryRecvError};
use std::thread;
use std::time::Duration;

use smooth_arap::session::{run_channel, SessionConfig};
use tungstenite::{Message, WebSocket};

const POLL: Duration = Duration::from_millis(5);

fn spawn_solver(config: SessionConfig) -> (Sender<String>, Receiver<String>, thread::JoinHandle<()>) {
    let (to_solver, incoming) = mpsc::channel();
    let (outgoing, from_solver) = mpsc::channel();
    let handle = thread::spawn(move || run_channel(config, incoming, outgoing));
    (to_solver, from_solver, handle)
}

/// Newline-delimited JSON: one request per stdin line, one reply per stdout
/// line.
pub fn stdio(config: SessionConfig) -> io::Result<()> {
    let (to_solver, from_solver, solver) = spawn_solver(config);
    let writer = thread::spawn(move || {
        let mut out = io::stdout().lock();
        for reply in from_solver {
            if writeln!(out, "{reply}").and_then(|_| out.flush()).is_err() {
                break;
            }
        }
    });
    for line in io::stdin().lock().lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if to_solver.send(line).is_err() {
            break;
        }
    }
    drop(to_solver);
    solver.join().ok();
    writer.join().ok();
    Ok(())
}

/// Accepts WebSocket clients on `host:port`, one isolated session each.
pub fn websocket(host: &str, port: u16, config: SessionConfig) -> io::Result<()> {
    let listener = TcpListener::bind((host, port))?;
    log::info!("listening on ws://{}", listener.local_addr()?);
    for stream in listener.incoming() {
        let stream = match stream {
            Ok(s) => s,
            Err(e) => {
                log::warn!("accept failed: {e}");
                continue;
            }
        };
        thread::spawn(move || {
            let peer = stream.peer_addr().map(|a| a.to_string()).unwrap_or_default();
            log::info!("client {peer} connected");
            if let Err(e) = connection(stream, config) {
                log::warn!("client {peer}: {e}");
            }
            log::info!("client {peer} disconnected");
        });
    }
    Ok(())
}

fn connection(stream: TcpStream, config: SessionConfig) -> Result<(), tungstenite::Error> {
    let mut socket = tungstenite::accept(stream).map_err(|e| match e {
        tungstenite::HandshakeError::Failure(e) => e,
        tungstenite::HandshakeError::Interrupted(_) => tungstenite::Error::ConnectionClosed,
    })?;
    socket.get_ref().set_read_timeout(Some(POLL))?;
    let (to_solver, from_solver, solver) = spawn_solver(config);
    let result = pump(&mut socket, &to_solver, &from_solver);
    drop(to_solver);
    solver.join().ok();
    if result.is_ok() {
        socket.close(None).ok();
        socket.flush().ok();
    }
    result
}

// Alternates between forwarding solver replies and reading client frames.
// Returns once the solver has finished (after `Shutdown`) or the client
// disconnects.
fn pump(
    socket: &mut WebSocket<TcpStream>,
    to_solver: &Sender<String>,
    from_solver: &Receiver<String>,
) -> Result<(), tungstenite::Error> {
    loop {
        loop {
            match from_solver.try_recv() {
                Ok(reply) => socket.send(Message::text(reply))?,
                Err(TryRecvError::Empty) => break,
                Err(TryRecvError::Disconnected) => return Ok(()),
            }
        }
        match socket.read() {
            Ok(Message::Text(text)) => {
                if to_solver.send(text.to_string()).is_err() {
                    return Ok(());
                }
            }
            Ok(Message::Binary(bytes)) => {
                let text = String::from_utf8_lossy(&bytes).into_owned();
                if to_solver.send(text).is_err() {
                    return Ok(());
                }
            }
            Ok(Message::Close(_)) => return Ok(()),
            Ok(_) => {}
            Err(tungstenite::Error::Io(e)) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
            Err(tungstenite::Error::ConnectionClosed) => return Ok(()),
            Err(e) => return Err(e),
        }
    }
}
