use serde::{Deserialize, Serialize};

use super::TelemetryError;
use crate::sampler::{MotorAction, MotorCommand, SamplerStatus, MotorStatus, MOTORS_PER_MODULE, N_MOTORS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandMode {
    #[default]
    Autonomous,
    Manual,
    Hold,
}

impl CommandMode {
    pub fn code(self) -> u8 {
        match self {
            CommandMode::Autonomous => 0,
            CommandMode::Manual => 1,
            CommandMode::Hold => 2,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(CommandMode::Autonomous),
            1 => Some(CommandMode::Manual),
            2 => Some(CommandMode::Hold),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryMsg {
    pub x: f32,
    pub y: f32,
    pub theta: f32,
    pub voltage: f32,
    pub current: f32,
    pub soc_wh: f32,
    pub mission_state: u8,
    pub motor_bitmap: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecordMsg {
    pub label: String,
    pub volume: f32,
    pub t_start: f32,
    pub t_end: f32,
    pub lat: f32,
    pub lon: f32,
}

/// Application messages. Payloads are little-endian with f32 floats.
///
/// | type | payload |
/// |------|---------|
/// | 0x01 Telemetry | x, y, theta, V, I, soc: f32; mission_state: u8; motor_bitmap: u32 (29 B) |
/// | 0x02 Command | mode: u8; v_x, w_z: f32 (9 B) |
/// | 0x03 MotorCommand | module, motor, action: u8 (3 B) |
/// | 0x04 EStop | engage: u8 (1 B) |
/// | 0x05 Ack | acked_seq: u16 (2 B) |
/// | 0x06 SampleRecord | label_len: u8; label; volume, t_start, t_end, lat, lon: f32 |
/// | 0x07 SamplerStatus | estop: u8; 24 x (action: u8, home: u8, travel: f32) (145 B) |
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Message {
    Telemetry(TelemetryMsg),
    Command { mode: CommandMode, v_x: f32, w_z: f32 },
    MotorCommand(MotorCommand),
    #[serde(rename = "estop")]
    EStop { engage: bool },
    Ack { acked_seq: u16 },
    SampleRecord(SampleRecordMsg),
    SamplerStatus(SamplerStatus),
}

impl Message {
    pub fn type_code(&self) -> u8 {
        match self {
            Message::Telemetry(_) => 0x01,
            Message::Command { .. } => 0x02,
            Message::MotorCommand(_) => 0x03,
            Message::EStop { .. } => 0x04,
            Message::Ack { .. } => 0x05,
            Message::SampleRecord(_) => 0x06,
            Message::SamplerStatus(_) => 0x07,
        }
    }

    pub fn encode_payload(&self) -> Vec<u8> {
        let mut out = Vec::new();
        let f = |out: &mut Vec<u8>, v: f32| out.extend_from_slice(&v.to_le_bytes());
        match self {
            Message::Telemetry(t) => {
                for v in [t.x, t.y, t.theta, t.voltage, t.current, t.soc_wh] {
                    f(&mut out, v);
                }
                out.push(t.mission_state);
                out.extend_from_slice(&t.motor_bitmap.to_le_bytes());
            }
            Message::Command { mode, v_x, w_z } => {
                out.push(mode.code());
                f(&mut out, *v_x);
                f(&mut out, *w_z);
            }
            Message::MotorCommand(c) => out.extend_from_slice(&c.encode()),
            Message::EStop { engage } => out.push(u8::from(*engage)),
            Message::Ack { acked_seq } => out.extend_from_slice(&acked_seq.to_le_bytes()),
            Message::SampleRecord(r) => {
                let label = r.label.as_bytes();
                out.push(label.len().min(255) as u8);
                out.extend_from_slice(&label[..label.len().min(255)]);
                for v in [r.volume, r.t_start, r.t_end, r.lat, r.lon] {
                    f(&mut out, v);
                }
            }
            Message::SamplerStatus(s) => {
                out.push(u8::from(s.estop));
                for m in &s.motors {
                    out.push(m.action.code());
                    out.push(u8::from(m.home));
                    f(&mut out, m.travel as f32);
                }
            }
        }
        out
    }

    pub fn decode_payload(msg_type: u8, p: &[u8]) -> Result<Self, TelemetryError> {
        let mut r = Reader { buf: p, pos: 0 };
        let msg = match msg_type {
            0x01 => Message::Telemetry(TelemetryMsg {
                x: r.f32()?,
                y: r.f32()?,
                theta: r.f32()?,
                voltage: r.f32()?,
                current: r.f32()?,
                soc_wh: r.f32()?,
                mission_state: r.u8()?,
                motor_bitmap: u32::from_le_bytes(r.take::<4>()?),
            }),
            0x02 => {
                let code = r.u8()?;
                let mode = CommandMode::from_code(code).ok_or_else(|| bad(format!("unknown mode {code}")))?;
                Message::Command { mode, v_x: r.f32()?, w_z: r.f32()? }
            }
            0x03 => Message::MotorCommand(MotorCommand::decode(r.take::<3>()?).map_err(|e| bad(e.to_string()))?),
            0x04 => Message::EStop { engage: r.flag()? },
            0x05 => Message::Ack { acked_seq: u16::from_le_bytes(r.take::<2>()?) },
            0x06 => {
                let n = r.u8()? as usize;
                let label = r.bytes(n)?;
                let label = String::from_utf8(label.to_vec()).map_err(|_| bad("label is not UTF-8".into()))?;
                Message::SampleRecord(SampleRecordMsg {
                    label,
                    volume: r.f32()?,
                    t_start: r.f32()?,
                    t_end: r.f32()?,
                    lat: r.f32()?,
                    lon: r.f32()?,
                })
            }
            0x07 => {
                let estop = r.flag()?;
                let mut motors = Vec::with_capacity(N_MOTORS);
                for i in 0..N_MOTORS {
                    let code = r.u8()?;
                    let action = MotorAction::from_code(code).ok_or_else(|| bad(format!("unknown action {code}")))?;
                    motors.push(MotorStatus {
                        module: (i / MOTORS_PER_MODULE) as u8,
                        motor: (i % MOTORS_PER_MODULE) as u8,
                        action,
                        home: r.flag()?,
                        travel: r.f32()? as f64,
                    });
                }
                Message::SamplerStatus(SamplerStatus { estop, motors })
            }
            other => return Err(TelemetryError::UnknownType(other)),
        };
        if r.pos != p.len() {
            return Err(TelemetryError::BadLength);
        }
        Ok(msg)
    }
}

fn bad(m: String) -> TelemetryError {
    TelemetryError::BadPayload(m)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn bytes(&mut self, n: usize) -> Result<&'a [u8], TelemetryError> {
        let s = self.buf.get(self.pos..self.pos + n).ok_or(TelemetryError::BadLength)?;
        self.pos += n;
        Ok(s)
    }

    fn take<const N: usize>(&mut self) -> Result<[u8; N], TelemetryError> {
        Ok(self.bytes(N)?.try_into().expect("slice has length N"))
    }

    fn u8(&mut self) -> Result<u8, TelemetryError> {
        Ok(self.take::<1>()?[0])
    }

    fn flag(&mut self) -> Result<bool, TelemetryError> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            v => Err(bad(format!("flag byte {v}"))),
        }
    }

    fn f32(&mut self) -> Result<f32, TelemetryError> {
        Ok(f32::from_le_bytes(self.take::<4>()?))
    }
}
