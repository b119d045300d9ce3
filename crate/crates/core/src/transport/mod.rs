//! Channels that carry framed protocol messages, and the session drivers
//! that run the protocol state machines over them.

use std::io::{BufReader, BufWriter};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::mpsc::{channel, Receiver, Sender};
use std::time::Duration;

use crate::error::{Error, Result};
use crate::protocol::{MessageType, ProtocolMessage};

pub mod session;

pub use session::{
    alice_run_training, bob_serve_eval, bob_serve_shared, bob_serve_training, carol_run_eval, run_eval_session,
    run_training_session, serve_eval_sessions, serve_training_sessions, AliceReport, EvalReport, Party, TrainingReport, TrainingSession, Transport, CONNECT_PATIENCE,
};

pub use crate::protocol::message::DEFAULT_MAX_FRAME;

/// A bidirectional, ordered message pipe.
///
/// Once an abort has been sent or received the channel is closed: every
/// later `send` fails without emitting a frame.
pub trait Channel {
    fn send(&mut self, msg: &ProtocolMessage) -> Result<()>;
    fn recv(&mut self) -> Result<ProtocolMessage>;
    fn is_closed(&self) -> bool;

    /// Sends an abort (once) and closes the channel.
    fn abort(&mut self, session_id: u64, reason: &str) {
        if !self.is_closed() {
            let _ = self.send(&ProtocolMessage::abort(session_id, reason));
        }
    }
}

fn closed() -> Error {
    Error::Aborted("channel closed after abort".into())
}

/// Frames passed between threads of one process.
pub struct InProcChannel {
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
    max_frame: usize,
    timeout: Option<Duration>,
    closed: bool,
}

/// Two connected endpoints.
pub fn inproc_pair() -> (InProcChannel, InProcChannel) {
    let (a_tx, b_rx) = channel();
    let (b_tx, a_rx) = channel();
    let make = |tx, rx| InProcChannel {
        tx,
        rx,
        max_frame: DEFAULT_MAX_FRAME,
        timeout: None,
        closed: false,
    };
    (make(a_tx, a_rx), make(b_tx, b_rx))
}

impl InProcChannel {
    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = Some(timeout);
        self
    }
}

impl Channel for InProcChannel {
    fn send(&mut self, msg: &ProtocolMessage) -> Result<()> {
        if self.closed {
            return Err(closed());
        }
        if msg.kind == MessageType::Abort {
            self.closed = true;
        }
        self.tx
            .send(msg.to_frame())
            .map_err(|_| Error::Io(std::io::Error::new(std::io::ErrorKind::BrokenPipe, "peer hung up")))
    }

    fn recv(&mut self) -> Result<ProtocolMessage> {
        if self.closed {
            return Err(closed());
        }
        let frame = match self.timeout {
            Some(t) => self.rx.recv_timeout(t).map_err(|e| {
                Error::Io(std::io::Error::new(std::io::ErrorKind::TimedOut, e.to_string()))
            })?,
            None => self.rx.recv().map_err(|_| {
                Error::Io(std::io::Error::new(std::io::ErrorKind::UnexpectedEof, "peer hung up"))
            })?,
        };
        if frame.len() > self.max_frame + 4 {
            return Err(Error::Frame("frame exceeds limit".into()));
        }
        let msg = ProtocolMessage::from_frame(&frame)?;
        if msg.kind == MessageType::Abort {
            self.closed = true;
        }
        Ok(msg)
    }

    fn is_closed(&self) -> bool {
        self.closed
    }
}

/// Frames over a TCP stream.
pub struct TcpChannel {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
    max_frame: usize,
    closed: bool,
}

impl TcpChannel {
    pub fn from_stream(stream: TcpStream, timeout: Option<Duration>) -> Result<Self> {
        stream.set_nodelay(true)?;
        stream.set_read_timeout(timeout)?;
        stream.set_write_timeout(timeout)?;
        Ok(TcpChannel {
            reader: BufReader::new(stream.try_clone()?),
            writer: BufWriter::new(stream),
            max_frame: DEFAULT_MAX_FRAME,
            closed: false,
        })
    }

    pub fn connect<A: ToSocketAddrs>(addr: A, timeout: Option<Duration>) -> Result<Self> {
        Self::from_stream(TcpStream::connect(addr)?, timeout)
    }

    /// Like [`TcpChannel::connect`], but keeps retrying a refused connection
    /// for up to `patience`, for a client started before its server.
    pub fn connect_patiently(addr: &str, timeout: Option<Duration>, patience: Duration) -> Result<Self> {
        let deadline = std::time::Instant::now() + patience;
        loop {
            match TcpStream::connect(addr) {
                Ok(stream) => return Self::from_stream(stream, timeout),
                Err(e) if e.kind() == std::io::ErrorKind::ConnectionRefused && std::time::Instant::now() < deadline => {
                    std::thread::sleep(Duration::from_millis(100));
                }
                Err(e) => return Err(e.into()),
            }
        }
    }

    /// Accepts one connection on `listener`.
    pub fn accept(listener: &TcpListener, timeout: Option<Duration>) -> Result<Self> {
        let (stream, _) = listener.accept()?;
        Self::from_stream(stream, timeout)
    }

    pub fn set_max_frame(&mut self, max_frame: usize) {
        self.max_frame = max_frame;
    }
}

impl Channel for TcpChannel {
    fn send(&mut self, msg: &ProtocolMessage) -> Result<()> {
        if self.closed {
            return Err(closed());
        }
        if msg.kind == MessageType::Abort {
            self.closed = true;
        }
        msg.write_to(&mut self.writer)
    }

    fn recv(&mut self) -> Result<ProtocolMessage> {
        if self.closed {
            return Err(closed());
        }
        let msg = ProtocolMessage::read_from(&mut self.reader, self.max_frame)?;
        if msg.kind == MessageType::Abort {
            self.closed = true;
        }
        Ok(msg)
    }

    fn is_closed(&self) -> bool {
        self.closed
    }
}

/// Wraps a channel and keeps a copy of every frame in both directions.
pub struct RecordingChannel<C> {
    inner: C,
    pub sent: Vec<Vec<u8>>,
    pub received: Vec<Vec<u8>>,
}

impl<C: Channel> RecordingChannel<C> {
    pub fn new(inner: C) -> Self {
        RecordingChannel {
            inner,
            sent: Vec::new(),
            received: Vec::new(),
        }
    }

    pub fn into_inner(self) -> C {
        self.inner
    }
}

impl<C: Channel> Channel for RecordingChannel<C> {
    fn send(&mut self, msg: &ProtocolMessage) -> Result<()> {
        self.inner.send(msg)?;
        self.sent.push(msg.to_frame());
        Ok(())
    }

    fn recv(&mut self) -> Result<ProtocolMessage> {
        let msg = self.inner.recv()?;
        self.received.push(msg.to_frame());
        Ok(msg)
    }

    fn is_closed(&self) -> bool {
        self.inner.is_closed()
    }
}
