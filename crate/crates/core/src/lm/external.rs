//! Client for a language model served over a byte stream.
//!
//! Newline-delimited JSON. Each request is
//! `{"id": "<string>", "context": [<token ids>]}` and each response is
//! `{"id": "<string>", "logprobs": [<V floats>], "eos_logprob": <float>}`.
//! Responses are matched to requests by id; unmatched lines are kept until
//! a request asks for them.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, ErrorKind, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::num::NonZeroUsize;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use lru::LruCache;
use serde::{Deserialize, Serialize};

use super::{check_tokens, LmError, NextTokenDistribution, TokenLm};
use crate::codec::TokenId;

/// Environment variable holding the `host:port` of the model server.
pub const ENDPOINT_ENV: &str = "CHARSURP_LM_ENDPOINT";

#[derive(Debug, Clone)]
pub struct ExternalLmConfig {
    pub endpoint: String,
    pub timeout: Duration,
    /// Extra attempts after a timeout or connection failure.
    pub retries: usize,
    /// Allowed `|sum p - 1|`; servers usually compute in single precision.
    pub tolerance: f64,
    pub cache_capacity: usize,
}

impl ExternalLmConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            timeout: Duration::from_secs(30),
            retries: 2,
            tolerance: 1e-6,
            cache_capacity: 65_536,
        }
    }

    pub fn from_env() -> Option<Self> {
        std::env::var(ENDPOINT_ENV).ok().filter(|s| !s.is_empty()).map(Self::new)
    }
}

#[derive(Serialize)]
struct Request<'a> {
    id: String,
    context: &'a [TokenId],
}

#[derive(Deserialize)]
struct Response {
    id: String,
    logprobs: Option<Vec<f64>>,
    eos_logprob: Option<f64>,
}

struct Connection {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
    pending: HashMap<String, Response>,
}

pub struct ExternalLm {
    config: ExternalLmConfig,
    vocab_size: usize,
    conn: Mutex<Option<Connection>>,
    next_id: AtomicU64,
    cache: Mutex<LruCache<Vec<TokenId>, Arc<NextTokenDistribution>>>,
}

impl ExternalLm {
    /// `vocab_size` is the size of the local codec; every response must match it.
    pub fn new(config: ExternalLmConfig, vocab_size: usize) -> Self {
        let cap = NonZeroUsize::new(config.cache_capacity.max(1)).unwrap();
        Self {
            config,
            vocab_size,
            conn: Mutex::new(None),
            next_id: AtomicU64::new(0),
            cache: Mutex::new(LruCache::new(cap)),
        }
    }

    fn connect(&self) -> Result<Connection, LmError> {
        let addr = self
            .config
            .endpoint
            .to_socket_addrs()?
            .next()
            .ok_or_else(|| LmError::InvalidParameter(format!("cannot resolve {}", self.config.endpoint)))?;
        let stream = TcpStream::connect_timeout(&addr, self.config.timeout).map_err(|e| self.io_error(e))?;
        stream.set_read_timeout(Some(self.config.timeout))?;
        stream.set_write_timeout(Some(self.config.timeout))?;
        stream.set_nodelay(true)?;
        Ok(Connection { reader: BufReader::new(stream.try_clone()?), writer: stream, pending: HashMap::new() })
    }

    fn io_error(&self, e: std::io::Error) -> LmError {
        match e.kind() {
            ErrorKind::WouldBlock | ErrorKind::TimedOut => LmError::Timeout(self.config.timeout),
            _ => LmError::Io(e),
        }
    }

    fn round_trip(&self, conn: &mut Connection, context: &[TokenId]) -> Result<Response, LmError> {
        let id = format!("r{}", self.next_id.fetch_add(1, Ordering::Relaxed));
        let mut line = serde_json::to_string(&Request { id: id.clone(), context }).expect("request serializes");
        line.push('\n');
        conn.writer.write_all(line.as_bytes()).map_err(|e| self.io_error(e))?;
        conn.writer.flush().map_err(|e| self.io_error(e))?;
        loop {
            if let Some(resp) = conn.pending.remove(&id) {
                return Ok(resp);
            }
            let mut buf = String::new();
            let n = conn.reader.read_line(&mut buf).map_err(|e| self.io_error(e))?;
            if n == 0 {
                return Err(LmError::Io(std::io::Error::new(ErrorKind::UnexpectedEof, "server closed the stream")));
            }
            let resp: Response =
                serde_json::from_str(buf.trim_end()).map_err(|e| LmError::Malformed(format!("{e}: {}", buf.trim_end())))?;
            if resp.id == id {
                return Ok(resp);
            }
            conn.pending.insert(resp.id.clone(), resp);
        }
    }

    fn request(&self, context: &[TokenId]) -> Result<NextTokenDistribution, LmError> {
        let mut attempt = 0;
        loop {
            let result = {
                let mut guard = self.conn.lock().unwrap();
                if guard.is_none() {
                    match self.connect() {
                        Ok(c) => *guard = Some(c),
                        Err(e) => {
                            drop(guard);
                            if attempt < self.config.retries && retryable(&e) {
                                attempt += 1;
                                continue;
                            }
                            return Err(e);
                        }
                    }
                }
                let r = self.round_trip(guard.as_mut().unwrap(), context);
                if r.as_ref().is_err_and(retryable) {
                    *guard = None;
                }
                r
            };
            match result {
                Ok(resp) => return self.validate(resp),
                Err(e) if attempt < self.config.retries && retryable(&e) => attempt += 1,
                Err(e) => return Err(e),
            }
        }
    }

    fn validate(&self, resp: Response) -> Result<NextTokenDistribution, LmError> {
        let logprobs = resp.logprobs.ok_or_else(|| LmError::Malformed(format!("response {} lacks logprobs", resp.id)))?;
        let eos = resp.eos_logprob.ok_or_else(|| LmError::Malformed(format!("response {} lacks eos_logprob", resp.id)))?;
        if logprobs.len() != self.vocab_size {
            return Err(LmError::VocabMismatch { expected: self.vocab_size, got: logprobs.len() });
        }
        NextTokenDistribution::with_tolerance(logprobs, eos, self.config.tolerance)
    }
}

fn retryable(e: &LmError) -> bool {
    matches!(e, LmError::Timeout(_) | LmError::Io(_))
}

impl TokenLm for ExternalLm {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_distribution(&self, context: &[TokenId]) -> Result<Arc<NextTokenDistribution>, LmError> {
        check_tokens(context, self.vocab_size)?;
        if let Some(hit) = self.cache.lock().unwrap().get(context) {
            return Ok(Arc::clone(hit));
        }
        let dist = Arc::new(self.request(context)?);
        self.cache.lock().unwrap().put(context.to_vec(), Arc::clone(&dist));
        Ok(dist)
    }
}
