//! Client for an external language-model process speaking newline-delimited
//! JSON over stdio.
//!
//! Every request carries a client-chosen `id` that the server echoes; replies
//! come back in request order. Probability vectors travel as base64 of
//! little-endian `f32`s. See `docs/bridge-protocol.md` for the frame grammar.
//!
//! Determinism only holds within one server process on one device: hide and
//! seek across machines need the same model weights, serving code and
//! hardware class.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, Command, Stdio};
use std::sync::Mutex;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::lm::{LanguageModel, LmError, NextTokenDistribution, TokenId};

pub const PROTOCOL_VERSION: u32 = 1;

/// Allowed deviation of the raw bridge mass from 1 before renormalization.
pub const BRIDGE_MASS_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Serialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum Request<'a> {
    Hello { protocol: u32 },
    Tokenize { text: &'a str },
    Detokenize { ids: Vec<u32> },
    Dist { prefix: Vec<u32> },
    Shutdown,
}

#[derive(Debug, Serialize)]
struct Frame<'a> {
    id: u64,
    #[serde(flatten)]
    request: Request<'a>,
}

#[derive(Debug, Default, Deserialize)]
struct Response {
    id: u64,
    #[serde(default)]
    error: Option<String>,
    #[serde(default)]
    vocab_size: Option<usize>,
    #[serde(default)]
    model: Option<String>,
    #[serde(default)]
    protocol: Option<u32>,
    #[serde(default)]
    ids: Option<Vec<u32>>,
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    probs: Option<String>,
}

struct Connection {
    reader: Box<dyn BufRead + Send>,
    writer: Box<dyn Write + Send>,
    next_id: u64,
}

impl Connection {
    fn call(&mut self, request: Request<'_>) -> Result<Response, LmError> {
        let id = self.next_id;
        self.next_id += 1;
        let mut line = serde_json::to_string(&Frame { id, request })
            .map_err(|e| LmError::Backend(e.to_string()))?;
        line.push('\n');
        self.writer.write_all(line.as_bytes())?;
        self.writer.flush()?;

        let mut reply = String::new();
        if self.reader.read_line(&mut reply)? == 0 {
            return Err(LmError::Backend("bridge closed its output".into()));
        }
        let resp: Response = serde_json::from_str(reply.trim_end())
            .map_err(|e| LmError::Backend(format!("malformed bridge frame: {e}")))?;
        if resp.id != id {
            return Err(LmError::Backend(format!(
                "bridge answered id {} to request {id}",
                resp.id
            )));
        }
        if let Some(err) = resp.error {
            return Err(LmError::Backend(format!("bridge error: {err}")));
        }
        Ok(resp)
    }
}

/// A language model served by an external process.
pub struct BridgeModel {
    conn: Mutex<Connection>,
    child: Option<Child>,
    vocab_size: usize,
    model_name: String,
}

impl std::fmt::Debug for BridgeModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BridgeModel")
            .field("vocab_size", &self.vocab_size)
            .field("model_name", &self.model_name)
            .finish()
    }
}

impl BridgeModel {
    /// Spawns `command` through `sh -c` and performs the `hello` handshake.
    pub fn spawn(command: &str) -> Result<Self, LmError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let mut model = Self::handshake(Box::new(BufReader::new(stdout)), Box::new(stdin))?;
        model.child = Some(child);
        Ok(model)
    }

    /// Connects over arbitrary streams and performs the `hello` handshake.
    pub fn from_streams<R, W>(reader: R, writer: W) -> Result<Self, LmError>
    where
        R: BufRead + Send + 'static,
        W: Write + Send + 'static,
    {
        Self::handshake(Box::new(reader), Box::new(writer))
    }

    fn handshake(
        reader: Box<dyn BufRead + Send>,
        writer: Box<dyn Write + Send>,
    ) -> Result<Self, LmError> {
        let mut conn = Connection {
            reader,
            writer,
            next_id: 1,
        };
        let hello = conn.call(Request::Hello {
            protocol: PROTOCOL_VERSION,
        })?;
        if hello.protocol != Some(PROTOCOL_VERSION) {
            return Err(LmError::Backend(format!(
                "bridge speaks protocol {:?}, expected {PROTOCOL_VERSION}",
                hello.protocol
            )));
        }
        let vocab_size = hello
            .vocab_size
            .filter(|&v| v > 0)
            .ok_or_else(|| LmError::Backend("hello reply lacks vocab_size".into()))?;
        Ok(Self {
            conn: Mutex::new(conn),
            child: None,
            vocab_size,
            model_name: hello.model.unwrap_or_default(),
        })
    }

    pub fn model_name(&self) -> &str {
        &self.model_name
    }

    fn call(&self, request: Request<'_>) -> Result<Response, LmError> {
        let mut conn = self
            .conn
            .lock()
            .map_err(|_| LmError::Backend("bridge connection poisoned".into()))?;
        conn.call(request)
    }
}

impl Drop for BridgeModel {
    fn drop(&mut self) {
        if let Ok(conn) = self.conn.get_mut() {
            let _ = conn.call(Request::Shutdown);
        }
        if let Some(child) = self.child.as_mut() {
            let _ = child.wait();
        }
    }
}

/// Decodes a base64 little-endian `f32` vector of length `vocab_size`.
pub fn decode_probs(encoded: &str, vocab_size: usize) -> Result<Vec<f64>, LmError> {
    let bytes = B64
        .decode(encoded)
        .map_err(|e| LmError::Backend(format!("bad base64 probability vector: {e}")))?;
    if bytes.len() != 4 * vocab_size {
        return Err(LmError::LengthMismatch {
            got: bytes.len() / 4,
            expected: vocab_size,
        });
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect())
}

/// Inverse of [`decode_probs`].
pub fn encode_probs(probs: &[f32]) -> String {
    let bytes: Vec<u8> = probs.iter().flat_map(|p| p.to_le_bytes()).collect();
    B64.encode(bytes)
}

impl LanguageModel for BridgeModel {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_distribution(&self, context: &[TokenId]) -> Result<NextTokenDistribution, LmError> {
        self.check_context(context)?;
        let resp = self.call(Request::Dist {
            prefix: context.iter().map(|t| t.0).collect(),
        })?;
        let encoded = resp
            .probs
            .ok_or_else(|| LmError::Backend("dist reply lacks probs".into()))?;
        let raw = decode_probs(&encoded, self.vocab_size)?;
        let mass: f64 = raw.iter().sum();
        if (mass - 1.0).abs() > BRIDGE_MASS_TOLERANCE {
            return Err(LmError::BadMass(mass));
        }
        NextTokenDistribution::from_weights(raw)
    }

    fn tokenize(&self, text: &str) -> Result<Vec<TokenId>, LmError> {
        let resp = self.call(Request::Tokenize { text })?;
        let ids = resp
            .ids
            .ok_or_else(|| LmError::Backend("tokenize reply lacks ids".into()))?;
        let ids: Vec<TokenId> = ids.into_iter().map(TokenId).collect();
        self.check_context(&ids)?;
        Ok(ids)
    }

    fn detokenize(&self, tokens: &[TokenId]) -> Result<String, LmError> {
        self.check_context(tokens)?;
        let resp = self.call(Request::Detokenize {
            ids: tokens.iter().map(|t| t.0).collect(),
        })?;
        resp.text
            .ok_or_else(|| LmError::Backend("detokenize reply lacks text".into()))
    }
}
