//! Protocol frames, transports, and the JSON-lines transcript format.
//!
//! Every protocol message is one [`Frame`]: direction, iteration index,
//! run tag, sample/component index, kind, and a base64 ciphertext. A
//! transcript file holds one JSON object per line; the first line is a
//! session meta record (backend, parameters, cloud seed) so a session can
//! be replayed offline and audited byte-for-byte.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::net::TcpStream;
use std::path::Path;
use std::sync::mpsc::{Receiver, Sender};

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::hecore::{serial, BackendKind, Ciphertext, HeParams};

use super::CloudError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dir {
    C2s,
    S2c,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunTag {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrameKind {
    PrecompPerturbation,
    PrecompStepFactor,
    PrecompInvRef,
    PrecompOne,
    PrecompZero,
    Perturbation,
    Sample,
    Delta,
}

/// One protocol message. For precomp tables `k` is the mask index and `n`
/// the vector component; for samples `n` is the sample counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub dir: Dir,
    pub k: usize,
    pub j: Option<RunTag>,
    pub n: Option<usize>,
    pub kind: FrameKind,
    pub ciphertext: String,
}

impl Frame {
    pub fn with_ciphertext(
        dir: Dir,
        k: usize,
        j: Option<RunTag>,
        n: Option<usize>,
        kind: FrameKind,
        ct: &Ciphertext,
    ) -> Self {
        Self {
            dir,
            k,
            j,
            n,
            kind,
            ciphertext: BASE64.encode(serial::to_bytes(ct)),
        }
    }

    pub fn decode_ciphertext(&self) -> Result<Ciphertext, CloudError> {
        let bytes = BASE64
            .decode(&self.ciphertext)
            .map_err(|e| CloudError::Protocol(format!("bad base64 ciphertext: {e}")))?;
        Ok(serial::from_bytes(&bytes)?)
    }
}

/// First line of a transcript: everything needed to reconstruct the cloud
/// role offline. Contains no secret material.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub kind: String,
    pub backend: BackendKind,
    pub he_params: HeParams,
    pub n_samples: usize,
    pub k_max: usize,
    pub cloud_seed: u64,
}

impl SessionMeta {
    pub fn new(
        backend: BackendKind,
        he_params: HeParams,
        n_samples: usize,
        k_max: usize,
        cloud_seed: u64,
    ) -> Self {
        Self {
            kind: "meta".into(),
            backend,
            he_params,
            n_samples,
            k_max,
            cloud_seed,
        }
    }
}

pub trait FrameTransport {
    fn send(&mut self, frame: &Frame) -> Result<(), CloudError>;
    fn recv(&mut self) -> Result<Frame, CloudError>;
}

/// Bidirectional in-process channel; the default transport.
pub struct InProcessPipe {
    tx: Sender<Frame>,
    rx: Receiver<Frame>,
}

impl InProcessPipe {
    pub fn pair() -> (InProcessPipe, InProcessPipe) {
        let (tx_a, rx_b) = std::sync::mpsc::channel();
        let (tx_b, rx_a) = std::sync::mpsc::channel();
        (
            InProcessPipe { tx: tx_a, rx: rx_a },
            InProcessPipe { tx: tx_b, rx: rx_b },
        )
    }
}

impl FrameTransport for InProcessPipe {
    fn send(&mut self, frame: &Frame) -> Result<(), CloudError> {
        self.tx
            .send(frame.clone())
            .map_err(|_| CloudError::Protocol("peer hung up".into()))
    }

    fn recv(&mut self) -> Result<Frame, CloudError> {
        self.rx
            .recv()
            .map_err(|_| CloudError::Protocol("peer hung up".into()))
    }
}

/// Length-prefixed JSON frames over a socket (loopback transport).
pub struct TcpFrameTransport {
    stream: TcpStream,
}

impl TcpFrameTransport {
    pub fn new(stream: TcpStream) -> Self {
        Self { stream }
    }
}

impl FrameTransport for TcpFrameTransport {
    fn send(&mut self, frame: &Frame) -> Result<(), CloudError> {
        let body = serde_json::to_vec(frame)?;
        self.stream.write_all(&(body.len() as u32).to_le_bytes())?;
        self.stream.write_all(&body)?;
        Ok(())
    }

    fn recv(&mut self) -> Result<Frame, CloudError> {
        let mut len = [0u8; 4];
        self.stream.read_exact(&mut len)?;
        let mut body = vec![0u8; u32::from_le_bytes(len) as usize];
        self.stream.read_exact(&mut body)?;
        Ok(serde_json::from_slice(&body)?)
    }
}

/// Wraps a transport and appends every frame that passes through to a
/// JSON-lines transcript.
pub struct RecordingTransport<T: FrameTransport, W: Write> {
    inner: T,
    sink: W,
}

impl<T: FrameTransport, W: Write> RecordingTransport<T, W> {
    pub fn new(inner: T, mut sink: W, meta: &SessionMeta) -> Result<Self, CloudError> {
        serde_json::to_writer(&mut sink, meta)?;
        sink.write_all(b"\n")?;
        Ok(Self { inner, sink })
    }

    fn record(&mut self, frame: &Frame) -> Result<(), CloudError> {
        serde_json::to_writer(&mut self.sink, frame)?;
        self.sink.write_all(b"\n")?;
        Ok(())
    }
}

impl<T: FrameTransport, W: Write> FrameTransport for RecordingTransport<T, W> {
    fn send(&mut self, frame: &Frame) -> Result<(), CloudError> {
        self.record(frame)?;
        self.inner.send(frame)
    }

    fn recv(&mut self) -> Result<Frame, CloudError> {
        let frame = self.inner.recv()?;
        self.record(&frame)?;
        Ok(frame)
    }
}

/// A parsed transcript: the meta line plus all frames in wire order.
pub struct Transcript {
    pub meta: SessionMeta,
    pub frames: Vec<Frame>,
}

pub fn read_transcript(path: &Path) -> Result<Transcript, CloudError> {
    let file = std::fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    let meta_line = lines
        .next()
        .ok_or_else(|| CloudError::Protocol("empty transcript".into()))??;
    let meta: SessionMeta = serde_json::from_str(&meta_line)?;
    if meta.kind != "meta" {
        return Err(CloudError::Protocol(
            "transcript must start with a meta line".into(),
        ));
    }
    let mut frames = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        frames.push(serde_json::from_str(&line)?);
    }
    Ok(Transcript { meta, frames })
}

pub fn transcript_writer(path: &Path) -> Result<BufWriter<std::fs::File>, CloudError> {
    Ok(BufWriter::new(std::fs::File::create(path)?))
}
