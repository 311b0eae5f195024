//! Length-prefixed frames: `length: u32 LE` (payload bytes), `type: u8`,
//! then the payload.

use std::io::{self, Read, Write};

/// Upper bound on accepted payloads.
pub const MAX_PAYLOAD: usize = 64 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum MsgType {
    Query = 1,
    Answer = 2,
    EmptyAnswer = 3,
    Error = 4,
}

impl TryFrom<u8> for MsgType {
    type Error = FrameError;

    fn try_from(b: u8) -> Result<Self, FrameError> {
        match b {
            1 => Ok(MsgType::Query),
            2 => Ok(MsgType::Answer),
            3 => Ok(MsgType::EmptyAnswer),
            4 => Ok(MsgType::Error),
            other => Err(FrameError::UnknownType(other)),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FrameError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("unknown message type {0}")]
    UnknownType(u8),
    #[error("payload of {0} bytes exceeds the limit")]
    TooLarge(usize),
    #[error("payload of {len} bytes is not a whole number of field elements")]
    Misaligned { len: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub msg_type: MsgType,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(msg_type: MsgType, payload: Vec<u8>) -> Self {
        Frame { msg_type, payload }
    }

    pub fn elements(msg_type: MsgType, elems: &[u64]) -> Self {
        Frame::new(msg_type, encode_elements(elems))
    }

    pub fn error(msg: &str) -> Self {
        Frame::new(MsgType::Error, msg.as_bytes().to_vec())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(5 + self.payload.len());
        out.extend_from_slice(&(self.payload.len() as u32).to_le_bytes());
        out.push(self.msg_type as u8);
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> io::Result<()> {
        w.write_all(&self.to_bytes())?;
        w.flush()
    }

    /// Reads one frame; `Ok(None)` on a clean end of stream before a header.
    pub fn read_from<R: Read>(r: &mut R) -> Result<Option<Frame>, FrameError> {
        let mut header = [0u8; 5];
        let mut got = 0;
        while got < header.len() {
            match r.read(&mut header[got..])? {
                0 if got == 0 => return Ok(None),
                0 => return Err(io::Error::from(io::ErrorKind::UnexpectedEof).into()),
                n => got += n,
            }
        }
        let len = u32::from_le_bytes(header[..4].try_into().expect("4 bytes")) as usize;
        let msg_type = MsgType::try_from(header[4])?;
        if len > MAX_PAYLOAD {
            return Err(FrameError::TooLarge(len));
        }
        let mut payload = vec![0u8; len];
        r.read_exact(&mut payload)?;
        Ok(Some(Frame { msg_type, payload }))
    }

    pub fn decode_elements(&self) -> Result<Vec<u64>, FrameError> {
        decode_elements(&self.payload)
    }
}

pub fn encode_elements(elems: &[u64]) -> Vec<u8> {
    elems.iter().flat_map(|x| x.to_le_bytes()).collect()
}

pub fn decode_elements(bytes: &[u8]) -> Result<Vec<u64>, FrameError> {
    if !bytes.len().is_multiple_of(8) {
        return Err(FrameError::Misaligned { len: bytes.len() });
    }
    Ok(bytes.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
}
