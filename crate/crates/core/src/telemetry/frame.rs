use super::crc::crc16_ccitt_false;
use super::{Message, TelemetryError};

pub const SYNC: [u8; 2] = [0xA5, 0x5A];
pub const VERSION: u8 = 1;
pub const MTU: usize = 240;
/// Sync, version, type, seq, length.
pub const HEADER_LEN: usize = 8;
pub const CRC_LEN: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub seq: u16,
    pub msg: Message,
}

/// `A5 5A | ver | type | seq:BE16 | len:BE16 | payload | crc:BE16`, with the
/// CRC taken over version through the end of the payload.
pub fn encode_frame(seq: u16, msg: &Message) -> Result<Vec<u8>, TelemetryError> {
    let payload = msg.encode_payload();
    if payload.len() > MTU {
        return Err(TelemetryError::PayloadTooLarge(payload.len()));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len() + CRC_LEN);
    out.extend_from_slice(&SYNC);
    out.push(VERSION);
    out.push(msg.type_code());
    out.extend_from_slice(&seq.to_be_bytes());
    out.extend_from_slice(&(payload.len() as u16).to_be_bytes());
    out.extend_from_slice(&payload);
    let crc = crc16_ccitt_false(&out[2..]);
    out.extend_from_slice(&crc.to_be_bytes());
    Ok(out)
}

/// Decodes exactly one frame occupying all of `bytes`.
pub fn decode_frame(bytes: &[u8]) -> Result<Frame, TelemetryError> {
    if bytes.len() < 2 || bytes[..2] != SYNC {
        return Err(TelemetryError::BadSync);
    }
    if bytes.len() < HEADER_LEN + CRC_LEN {
        return Err(TelemetryError::BadLength);
    }
    let len = u16::from_be_bytes([bytes[6], bytes[7]]) as usize;
    if len > MTU || bytes.len() != HEADER_LEN + len + CRC_LEN {
        return Err(TelemetryError::BadLength);
    }
    let body_end = HEADER_LEN + len;
    let crc = u16::from_be_bytes([bytes[body_end], bytes[body_end + 1]]);
    if crc16_ccitt_false(&bytes[2..body_end]) != crc {
        return Err(TelemetryError::BadCrc);
    }
    if bytes[2] != VERSION {
        return Err(TelemetryError::BadVersion(bytes[2]));
    }
    let seq = u16::from_be_bytes([bytes[4], bytes[5]]);
    let msg = Message::decode_payload(bytes[3], &bytes[HEADER_LEN..body_end])?;
    Ok(Frame { seq, msg })
}
