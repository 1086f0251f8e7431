//! Framing for the external-denoiser wire protocol.
//!
//! Every frame starts with an 18-byte header:
//!
//! ```text
//! "PNPD" | version 0x01 | opcode | u32 width | u32 height | u32 channels
//! ```
//!
//! All integers and floats are little-endian. A denoise request (0x01) and an
//! ok response (0x81) carry `width * height * channels` f32 values, planar and
//! row-major. An error response (0xFF) carries a u32 byte length followed by a
//! UTF-8 message.

use std::io::{ErrorKind, Read, Write};

use crate::error::{Error, Result};
use crate::tensor::{ImageBuffer, Shape};

pub const MAGIC: [u8; 4] = *b"PNPD";
pub const VERSION: u8 = 0x01;
pub const HEADER_LEN: usize = 18;

/// Refuse payloads above this many values (1 GiB of f32).
pub const MAX_VALUES: usize = 1 << 28;
pub const MAX_MESSAGE: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Opcode {
    Denoise = 0x01,
    Ok = 0x81,
    Error = 0xFF,
}

impl Opcode {
    pub fn from_byte(b: u8) -> Result<Self> {
        match b {
            0x01 => Ok(Opcode::Denoise),
            0x81 => Ok(Opcode::Ok),
            0xFF => Ok(Opcode::Error),
            other => Err(Error::Protocol(format!("unknown opcode 0x{other:02x}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Frame {
    Denoise(ImageBuffer<f32>),
    Ok(ImageBuffer<f32>),
    Error { shape: Shape, message: String },
}

impl Frame {
    pub fn opcode(&self) -> Opcode {
        match self {
            Frame::Denoise(_) => Opcode::Denoise,
            Frame::Ok(_) => Opcode::Ok,
            Frame::Error { .. } => Opcode::Error,
        }
    }

    pub fn shape(&self) -> Shape {
        match self {
            Frame::Denoise(x) | Frame::Ok(x) => x.shape(),
            Frame::Error { shape, .. } => *shape,
        }
    }

    /// Exact encoded size in bytes.
    pub fn encoded_len(&self) -> usize {
        HEADER_LEN
            + match self {
                Frame::Denoise(x) | Frame::Ok(x) => 4 * x.len(),
                Frame::Error { message, .. } => 4 + message.len(),
            }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        let shape = self.shape();
        out.extend_from_slice(&MAGIC);
        out.push(VERSION);
        out.push(self.opcode() as u8);
        for dim in [shape.width, shape.height, shape.channels] {
            out.extend_from_slice(&(dim as u32).to_le_bytes());
        }
        match self {
            Frame::Denoise(x) | Frame::Ok(x) => {
                for v in x.as_slice() {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
            Frame::Error { message, .. } => {
                out.extend_from_slice(&(message.len() as u32).to_le_bytes());
                out.extend_from_slice(message.as_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Frame> {
        let mut cursor = bytes;
        let frame = read_frame(&mut cursor)?;
        if !cursor.is_empty() {
            return Err(Error::Protocol(format!(
                "{} trailing bytes after frame",
                cursor.len()
            )));
        }
        Ok(frame)
    }
}

pub fn write_frame(w: &mut impl Write, frame: &Frame) -> Result<()> {
    w.write_all(&frame.encode())?;
    w.flush()?;
    Ok(())
}

fn read_exact_or(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        ErrorKind::UnexpectedEof => Error::Protocol(format!("stream ended inside {what}")),
        _ => Error::Io(e),
    })
}

/// Reads one frame. A clean end of stream before the first byte yields
/// [`Error::PeerClosed`].
pub fn read_frame(r: &mut impl Read) -> Result<Frame> {
    let mut header = [0u8; HEADER_LEN];
    let mut first = [0u8; 1];
    loop {
        match r.read(&mut first) {
            Ok(0) => return Err(Error::PeerClosed),
            Ok(_) => break,
            Err(e) if e.kind() == ErrorKind::Interrupted => continue,
            Err(e) => return Err(Error::Io(e)),
        }
    }
    header[0] = first[0];
    read_exact_or(r, &mut header[1..], "frame header")?;
    if header[..4] != MAGIC {
        return Err(Error::Protocol(format!("bad magic {:02x?}", &header[..4])));
    }
    if header[4] != VERSION {
        return Err(Error::Protocol(format!("unsupported version 0x{:02x}", header[4])));
    }
    let opcode = Opcode::from_byte(header[5])?;
    let dim = |i: usize| u32::from_le_bytes(header[6 + 4 * i..10 + 4 * i].try_into().unwrap()) as usize;
    let shape = Shape::new(dim(0), dim(1), dim(2));
    match opcode {
        Opcode::Denoise | Opcode::Ok => {
            let n = shape
                .width
                .checked_mul(shape.height)
                .and_then(|v| v.checked_mul(shape.channels))
                .filter(|&n| n <= MAX_VALUES)
                .ok_or_else(|| Error::Protocol(format!("payload for {shape} too large")))?;
            let mut raw = vec![0u8; 4 * n];
            read_exact_or(r, &mut raw, "payload")?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            let x = ImageBuffer::new(shape, data)?;
            Ok(if opcode == Opcode::Denoise {
                Frame::Denoise(x)
            } else {
                Frame::Ok(x)
            })
        }
        Opcode::Error => {
            let mut len = [0u8; 4];
            read_exact_or(r, &mut len, "error length")?;
            let len = u32::from_le_bytes(len) as usize;
            if len > MAX_MESSAGE {
                return Err(Error::Protocol(format!("error message of {len} bytes")));
            }
            let mut msg = vec![0u8; len];
            read_exact_or(r, &mut msg, "error message")?;
            let message = String::from_utf8(msg)
                .map_err(|_| Error::Protocol("error message is not UTF-8".into()))?;
            Ok(Frame::Error { shape, message })
        }
    }
}

/// Answers denoise requests with `f` until the peer closes the stream.
///
/// A failing `f` produces an error frame and the loop continues; a malformed
/// request is answered with an error frame and ends the loop.
pub fn serve<R, W, F>(mut reader: R, mut writer: W, mut f: F) -> Result<usize>
where
    R: Read,
    W: Write,
    F: FnMut(ImageBuffer<f32>) -> std::result::Result<ImageBuffer<f32>, String>,
{
    let mut served = 0;
    loop {
        let frame = match read_frame(&mut reader) {
            Ok(frame) => frame,
            Err(Error::PeerClosed) => return Ok(served),
            Err(e) => {
                let reply = Frame::Error {
                    shape: Shape::new(0, 0, 0),
                    message: e.to_string(),
                };
                let _ = write_frame(&mut writer, &reply);
                return Err(e);
            }
        };
        let reply = match frame {
            Frame::Denoise(x) => {
                let shape = x.shape();
                match f(x) {
                    Ok(y) => Frame::Ok(y),
                    Err(message) => Frame::Error { shape, message },
                }
            }
            other => Frame::Error {
                shape: other.shape(),
                message: format!("expected a denoise request, got {:?}", other.opcode()),
            },
        };
        write_frame(&mut writer, &reply)?;
        served += 1;
    }
}
