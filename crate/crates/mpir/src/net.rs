//! TCP server holding a read-only message store, and the retrieval client
//! that runs one protocol round against `N` such servers.
//!
//! Every round uses one connection per server: the client sends a single
//! QUERY frame carrying `K` field elements and reads a single reply.

use std::io::{self, BufReader, BufWriter};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use mpir_core::gf::{CoeffVector, MessageStore};
use mpir_core::protocol::server_answer;
use mpir_core::{Answer, DemandSet, Scheme, Transcript};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::frame::{decode_elements, Frame, FrameError, MsgType};

const IO_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, thiserror::Error)]
pub enum NetError {
    #[error("expected {expected} endpoints, got {actual}")]
    EndpointCount { expected: usize, actual: usize },
    #[error("{endpoint}: {source}")]
    Io { endpoint: String, source: io::Error },
    #[error("{endpoint}: {source}")]
    Frame { endpoint: String, source: FrameError },
    #[error("{endpoint}: server error: {message}")]
    Server { endpoint: String, message: String },
    #[error("{endpoint}: unexpected {msg_type:?} reply")]
    UnexpectedReply { endpoint: String, msg_type: MsgType },
    #[error("{endpoint}: answer has {actual} elements, expected {expected} (inconsistent store)")]
    AnswerLength { endpoint: String, expected: usize, actual: usize },
    #[error("{endpoint}: answer element {value} is not below q = {q} (inconsistent store)")]
    ElementOutOfRange { endpoint: String, value: u64, q: u64 },
    #[error("{endpoint}: no reply")]
    NoReply { endpoint: String },
    #[error(transparent)]
    Protocol(#[from] mpir_core::Error),
}

/// Answers queries from an immutable store.
#[derive(Clone, Debug)]
pub struct Server {
    store: Arc<MessageStore>,
}

impl Server {
    pub fn new(store: MessageStore) -> Self {
        Server { store: Arc::new(store) }
    }

    pub fn store(&self) -> &MessageStore {
        &self.store
    }

    /// Reply to one frame. `Err` carries the text of an ERROR frame, after
    /// which the connection is closed.
    pub fn respond(&self, frame: &Frame) -> Result<Frame, String> {
        if frame.msg_type != MsgType::Query {
            return Err(format!("expected QUERY, got {:?}", frame.msg_type));
        }
        let coeffs = decode_elements(&frame.payload).map_err(|e| e.to_string())?;
        let k = self.store.k();
        if coeffs.len() != k {
            return Err(format!("query has {} coefficients, store holds {k} messages", coeffs.len()));
        }
        let field = self.store.field();
        if let Some(&c) = coeffs.iter().find(|&&c| !field.contains(c)) {
            return Err(format!("coefficient {c} is not below q = {}", field.order()));
        }
        Ok(match server_answer(&self.store, &CoeffVector(coeffs)) {
            Answer::Empty => Frame::new(MsgType::EmptyAnswer, Vec::new()),
            Answer::Combination(x) => Frame::elements(MsgType::Answer, &x),
        })
    }

    /// Serves one connection until the peer closes it or sends garbage.
    pub fn handle(&self, stream: TcpStream) -> io::Result<()> {
        stream.set_read_timeout(Some(IO_TIMEOUT))?;
        let mut reader = BufReader::new(stream.try_clone()?);
        let mut writer = BufWriter::new(stream);
        loop {
            let reply = match Frame::read_from(&mut reader) {
                Ok(None) => return Ok(()),
                Ok(Some(frame)) => self.respond(&frame),
                Err(FrameError::Io(e)) if e.kind() != io::ErrorKind::UnexpectedEof => return Err(e),
                Err(e) => Err(e.to_string()),
            };
            match reply {
                Ok(frame) => frame.write_to(&mut writer)?,
                Err(msg) => {
                    Frame::error(&msg).write_to(&mut writer)?;
                    return Ok(());
                }
            }
        }
    }

    /// Accepts connections forever, one thread each.
    pub fn run(&self, listener: TcpListener) -> io::Result<()> {
        for stream in listener.incoming() {
            let stream = match stream {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("accept failed: {e}");
                    continue;
                }
            };
            let server = self.clone();
            thread::spawn(move || {
                if let Err(e) = server.handle(stream) {
                    eprintln!("connection error: {e}");
                }
            });
        }
        Ok(())
    }
}

/// Result of a networked round.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Retrieval {
    pub transcript: Transcript,
    /// Payload bytes of all ANSWER frames.
    pub downloaded_bytes: usize,
}

fn query_server(endpoint: &str, query: &CoeffVector, m: usize, q: u64) -> Result<Answer, NetError> {
    let io_err = |source| NetError::Io { endpoint: endpoint.to_string(), source };
    let addr = endpoint
        .to_socket_addrs()
        .map_err(io_err)?
        .next()
        .ok_or_else(|| io_err(io::Error::new(io::ErrorKind::NotFound, "no address")))?;
    let mut stream = TcpStream::connect_timeout(&addr, IO_TIMEOUT).map_err(io_err)?;
    stream.set_read_timeout(Some(IO_TIMEOUT)).map_err(io_err)?;
    stream.set_nodelay(true).map_err(io_err)?;
    Frame::elements(MsgType::Query, &query.0).write_to(&mut stream).map_err(io_err)?;
    let reply = Frame::read_from(&mut stream)
        .map_err(|source| NetError::Frame { endpoint: endpoint.to_string(), source })?
        .ok_or_else(|| NetError::NoReply { endpoint: endpoint.to_string() })?;
    match reply.msg_type {
        MsgType::EmptyAnswer if reply.payload.is_empty() => Ok(Answer::Empty),
        MsgType::Answer => {
            let x =
                reply.decode_elements().map_err(|source| NetError::Frame { endpoint: endpoint.to_string(), source })?;
            if x.len() != m {
                return Err(NetError::AnswerLength { endpoint: endpoint.to_string(), expected: m, actual: x.len() });
            }
            if let Some(&value) = x.iter().find(|&&v| v >= q) {
                return Err(NetError::ElementOutOfRange { endpoint: endpoint.to_string(), value, q });
            }
            Ok(Answer::Combination(x))
        }
        MsgType::Error => Err(NetError::Server {
            endpoint: endpoint.to_string(),
            message: String::from_utf8_lossy(&reply.payload).into_owned(),
        }),
        msg_type => Err(NetError::UnexpectedReply { endpoint: endpoint.to_string(), msg_type }),
    }
}

/// One networked round. `endpoints[s]` is server `s`; the query set is
/// drawn from ChaCha20 seeded with `seed`, exactly as [`simulate_round`].
pub fn retrieve<A: AsRef<str> + Sync>(
    scheme: &Scheme,
    endpoints: &[A],
    w: &DemandSet,
    seed: u64,
) -> Result<Retrieval, NetError> {
    let params = scheme.params();
    if endpoints.len() != params.n() {
        return Err(NetError::EndpointCount { expected: params.n(), actual: endpoints.len() });
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let query_set = scheme.make_query_set(w, &mut rng)?;
    let queries = query_set.by_server();
    let (m, q) = (params.m(), params.q());
    let answers: Vec<Answer> = thread::scope(|s| {
        let handles: Vec<_> = endpoints
            .iter()
            .zip(&queries)
            .map(|(ep, query)| s.spawn(move || query_server(ep.as_ref(), query, m, q)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("query thread panicked")).collect::<Result<_, _>>()
    })?;
    let transcript = scheme.transcript(query_set, answers)?;
    let downloaded_bytes = 8 * transcript.download_elements;
    Ok(Retrieval { transcript, downloaded_bytes })
}

/// In-memory counterpart of [`retrieve`] with the same seeding.
pub fn simulate_round(
    scheme: &Scheme,
    w: &DemandSet,
    store: &MessageStore,
    seed: u64,
) -> Result<Transcript, mpir_core::Error> {
    scheme.run_round(w, store, &mut ChaCha20Rng::seed_from_u64(seed))
}
