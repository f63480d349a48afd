//! Fixed-width big-endian datagram layout:
//!
//! ```text
//! offset  size  field
//!      0     4  magic "AOI1"
//!      4     1  msg_type (0x01 data, 0x02 echo reply,
//!                         0x03 time request, 0x04 time response)
//!      5     8  id
//!     13     8  gen_ts, ns
//!     21     8  extra_ts, ns (responder stamp in 0x04, else 0)
//!     29     2  payload_len
//!     31     n  zero padding, n = payload_len
//! ```

pub const MAGIC: [u8; 4] = *b"AOI1";
pub const HEADER_LEN: usize = 31;
/// Data datagram size including headers.
pub const DEFAULT_DATA_SIZE: usize = 1058;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MsgType {
    Data = 0x01,
    EchoReply = 0x02,
    TimeRequest = 0x03,
    TimeResponse = 0x04,
}

impl TryFrom<u8> for MsgType {
    type Error = WireError;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            0x01 => Ok(Self::Data),
            0x02 => Ok(Self::EchoReply),
            0x03 => Ok(Self::TimeRequest),
            0x04 => Ok(Self::TimeResponse),
            other => Err(WireError::UnknownType(other)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WireError {
    #[error("datagram of {0} bytes is shorter than the header")]
    Short(usize),
    #[error("bad magic")]
    BadMagic,
    #[error("unknown message type {0:#04x}")]
    UnknownType(u8),
    #[error("payload_len {declared} does not match {actual} trailing bytes")]
    LengthMismatch { declared: usize, actual: usize },
    #[error("datagram size {0} not representable")]
    BadSize(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WirePacket {
    pub msg_type: MsgType,
    pub id: u64,
    pub gen_ts: u64,
    pub extra_ts: u64,
    pub payload_len: u16,
}

impl WirePacket {
    /// A data packet padded to `total_size` bytes on the wire.
    pub fn data(id: u64, gen_ts: u64, total_size: usize) -> Result<Self, WireError> {
        Ok(Self {
            msg_type: MsgType::Data,
            id,
            gen_ts,
            extra_ts: 0,
            payload_len: payload_for(total_size)?,
        })
    }

    pub fn time_request(id: u64, send_ts: u64) -> Self {
        Self {
            msg_type: MsgType::TimeRequest,
            id,
            gen_ts: send_ts,
            extra_ts: 0,
            payload_len: 0,
        }
    }

    pub fn wire_len(&self) -> usize {
        HEADER_LEN + self.payload_len as usize
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(self.wire_len());
        self.encode_into(&mut buf);
        buf
    }

    pub fn encode_into(&self, buf: &mut Vec<u8>) {
        buf.clear();
        buf.extend_from_slice(&MAGIC);
        buf.push(self.msg_type as u8);
        buf.extend_from_slice(&self.id.to_be_bytes());
        buf.extend_from_slice(&self.gen_ts.to_be_bytes());
        buf.extend_from_slice(&self.extra_ts.to_be_bytes());
        buf.extend_from_slice(&self.payload_len.to_be_bytes());
        buf.resize(self.wire_len(), 0);
    }

    pub fn decode(buf: &[u8]) -> Result<Self, WireError> {
        if buf.len() < HEADER_LEN {
            return Err(WireError::Short(buf.len()));
        }
        if buf[0..4] != MAGIC {
            return Err(WireError::BadMagic);
        }
        let u64_at = |o: usize| u64::from_be_bytes(buf[o..o + 8].try_into().expect("8 bytes"));
        let msg_type = MsgType::try_from(buf[4])?;
        let payload_len = u16::from_be_bytes([buf[29], buf[30]]);
        let actual = buf.len() - HEADER_LEN;
        if payload_len as usize != actual {
            return Err(WireError::LengthMismatch {
                declared: payload_len as usize,
                actual,
            });
        }
        Ok(Self {
            msg_type,
            id: u64_at(5),
            gen_ts: u64_at(13),
            extra_ts: u64_at(21),
            payload_len,
        })
    }
}

fn payload_for(total: usize) -> Result<u16, WireError> {
    total
        .checked_sub(HEADER_LEN)
        .and_then(|p| u16::try_from(p).ok())
        .ok_or(WireError::BadSize(total))
}
