//! Wire format shared by every transport: a fixed header of message tag,
//! per-pair sequence number, and payload length, followed by the payload as
//! little-endian 64-bit floats. Floats travel bit-for-bit; NaN payloads and
//! signed zeros survive unchanged.

use crate::error::{CommError, Result};
use std::io::{Read, Write};

/// Header: tag (u32 LE) + sequence number (u64 LE) + element count (u64 LE).
pub const HEADER_LEN: usize = 4 + 8 + 8;

/// Refuse to allocate for absurd element counts (corrupt or hostile header).
const MAX_ELEMS: u64 = 1 << 32;

/// One message: a protocol tag, the sender's per-receiver sequence number,
/// and the data.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub tag: u32,
    pub seq: u64,
    pub payload: Vec<f64>,
}

/// Serializes the header into a fixed buffer.
pub fn encode_header(tag: u32, seq: u64, n_elems: u64) -> [u8; HEADER_LEN] {
    let mut h = [0u8; HEADER_LEN];
    h[0..4].copy_from_slice(&tag.to_le_bytes());
    h[4..12].copy_from_slice(&seq.to_le_bytes());
    h[12..20].copy_from_slice(&n_elems.to_le_bytes());
    h
}

/// Parses a header buffer into (tag, seq, element count).
pub fn decode_header(h: &[u8; HEADER_LEN]) -> (u32, u64, u64) {
    let tag = u32::from_le_bytes(h[0..4].try_into().unwrap());
    let seq = u64::from_le_bytes(h[4..12].try_into().unwrap());
    let n = u64::from_le_bytes(h[12..20].try_into().unwrap());
    (tag, seq, n)
}

/// Writes a whole frame to a byte sink.
pub fn write_frame(w: &mut impl Write, peer: &str, frame: &Frame) -> Result<()> {
    let io_err = |source| CommError::Io {
        peer: peer.to_string(),
        source,
    };
    w.write_all(&encode_header(frame.tag, frame.seq, frame.payload.len() as u64))
        .map_err(io_err)?;
    // Stream the payload through a bounded buffer instead of materializing
    // one byte image of a possibly multi-megabyte vector.
    let mut buf = [0u8; 8192];
    for chunk in frame.payload.chunks(buf.len() / 8) {
        let mut used = 0;
        for v in chunk {
            buf[used..used + 8].copy_from_slice(&v.to_le_bytes());
            used += 8;
        }
        w.write_all(&buf[..used]).map_err(io_err)?;
    }
    w.flush().map_err(io_err)?;
    Ok(())
}

/// Reads a whole frame from a byte source.
pub fn read_frame(r: &mut impl Read, peer: &str) -> Result<Frame> {
    let io_err = |peer: &str, source: std::io::Error| match source.kind() {
        std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut => CommError::Timeout {
            peer: peer.to_string(),
            millis: 0,
        },
        std::io::ErrorKind::UnexpectedEof => CommError::Disconnected {
            peer: peer.to_string(),
        },
        _ => CommError::Io {
            peer: peer.to_string(),
            source,
        },
    };
    let mut header = [0u8; HEADER_LEN];
    r.read_exact(&mut header).map_err(|e| io_err(peer, e))?;
    let (tag, seq, n) = decode_header(&header);
    if n > MAX_ELEMS {
        return Err(CommError::Protocol {
            peer: peer.to_string(),
            msg: format!("claimed payload of {n} elements"),
        });
    }
    let mut payload = Vec::with_capacity(n as usize);
    let mut buf = [0u8; 8192];
    let mut remaining = n as usize;
    while remaining > 0 {
        let take = remaining.min(buf.len() / 8);
        r.read_exact(&mut buf[..take * 8]).map_err(|e| io_err(peer, e))?;
        for k in 0..take {
            payload.push(f64::from_le_bytes(buf[k * 8..k * 8 + 8].try_into().unwrap()));
        }
        remaining -= take;
    }
    Ok(Frame { tag, seq, payload })
}
