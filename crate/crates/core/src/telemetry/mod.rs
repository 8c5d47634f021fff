//! Framed telemetry/command codec and a distance-dependent radio link model.

mod crc;
mod frame;
mod link;
mod messages;

pub use crc::crc16_ccitt_false;
pub use frame::{decode_frame, encode_frame, Frame, CRC_LEN, HEADER_LEN, MTU, SYNC, VERSION};
pub use link::{link_transmit, Dedup, Delivery, LinkModel, LinkQueue, SeqCounter};
pub use messages::{CommandMode, Message, SampleRecordMsg, TelemetryMsg};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TelemetryError {
    #[error("bad sync bytes")]
    BadSync,
    #[error("CRC mismatch")]
    BadCrc,
    #[error("frame or payload length mismatch")]
    BadLength,
    #[error("unknown message type 0x{0:02X}")]
    UnknownType(u8),
    #[error("unsupported protocol version {0}")]
    BadVersion(u8),
    #[error("payload of {0} bytes exceeds the MTU")]
    PayloadTooLarge(usize),
    #[error("malformed payload: {0}")]
    BadPayload(String),
}
