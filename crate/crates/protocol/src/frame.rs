use std::io::{self, Read, Write};

use edoc_core::xml::parse;
use thiserror::Error;

use crate::message::AMessage;

/// Default cap on the payload of one frame (1 MiB).
pub const MAX_FRAME: usize = 1 << 20;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("frame declares {declared} bytes, cap is {cap}")]
    FrameTooLarge { declared: usize, cap: usize },
    #[error("malformed frame: {0}")]
    MalformedFrame(String),
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
}

pub fn write_frame<W: Write>(w: &mut W, payload: &[u8]) -> io::Result<()> {
    let len = u32::try_from(payload.len()).map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "payload too large"))?;
    let mut buf = Vec::with_capacity(4 + payload.len());
    buf.extend_from_slice(&len.to_be_bytes());
    buf.extend_from_slice(payload);
    w.write_all(&buf)?;
    w.flush()
}

/// Reads one frame payload. Returns `None` on a clean end of stream before
/// the first length byte. The length is checked against `cap` before any
/// of the body is read.
pub fn read_frame<R: Read>(r: &mut R, cap: usize) -> Result<Option<Vec<u8>>, ProtocolError> {
    let mut len = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match r.read(&mut len[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => return Err(ProtocolError::MalformedFrame("truncated length prefix".into())),
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let declared = u32::from_be_bytes(len) as usize;
    if declared > cap {
        return Err(ProtocolError::FrameTooLarge { declared, cap });
    }
    let mut body = vec![0u8; declared];
    r.read_exact(&mut body).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => ProtocolError::MalformedFrame(format!("truncated body, expected {declared} bytes")),
        _ => ProtocolError::Io(e),
    })?;
    Ok(Some(body))
}

/// Frame bytes for `msg`: length prefix plus canonical XML.
pub fn encode(msg: &AMessage) -> Vec<u8> {
    let payload = msg.canonical_bytes();
    let mut out = Vec::with_capacity(4 + payload.len());
    out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    out.extend_from_slice(&payload);
    out
}

/// Decodes a complete frame (prefix included).
pub fn decode(frame: &[u8], cap: usize) -> Result<AMessage, ProtocolError> {
    let mut r = frame;
    let payload = read_frame(&mut r, cap)?.ok_or_else(|| ProtocolError::MalformedFrame("empty input".into()))?;
    if !r.is_empty() {
        return Err(ProtocolError::MalformedFrame(format!("{} trailing bytes", r.len())));
    }
    decode_payload(&payload)
}

/// Decodes the XML payload of a frame.
pub fn decode_payload(payload: &[u8]) -> Result<AMessage, ProtocolError> {
    let root = parse(payload).map_err(|e| ProtocolError::MalformedFrame(e.to_string()))?;
    AMessage::from_xml(&root)
}
