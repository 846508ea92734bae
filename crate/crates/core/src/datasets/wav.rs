//! RIFF/WAVE PCM16 audio.

use std::fs;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Location, Result};
use crate::signal::AudioWindow;

const PCM: u16 = 1;
const EXTENSIBLE: u16 = 0xfffe;
const FULL_SCALE: f64 = 32767.0;

/// Decoded audio: one sample vector per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct WavData {
    pub channels: Vec<Vec<f64>>,
    pub sample_rate_hz: u32,
}

fn chunk_err(chunk: &str, msg: impl Into<String>) -> Error {
    Error::format(Location::Chunk(chunk.to_string()), msg)
}

/// Encodes channels as interleaved PCM16. Samples must lie in [-1, 1].
pub fn wav_bytes(channels: &[&[f64]], sample_rate_hz: u32) -> Result<Vec<u8>> {
    let n_ch = channels.len();
    if n_ch == 0 || n_ch > u16::MAX as usize {
        return Err(Error::invalid("need at least one channel"));
    }
    let len = channels[0].len();
    if channels.iter().any(|c| c.len() != len) {
        return Err(Error::invalid("channels differ in length"));
    }
    if sample_rate_hz == 0 {
        return Err(Error::invalid("sample rate must be positive"));
    }
    for (ci, c) in channels.iter().enumerate() {
        if let Some(i) = c.iter().position(|s| !(-1.0..=1.0).contains(s)) {
            return Err(Error::invalid(format!(
                "channel {ci} sample {i} = {} outside [-1, 1]",
                c[i]
            )));
        }
    }
    let block_align = 2 * n_ch as u32;
    let data_len = u32::try_from(len as u64 * u64::from(block_align))
        .ok()
        .filter(|&d| d <= u32::MAX - 36)
        .ok_or_else(|| Error::invalid("audio too long for a WAV file"))?;

    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&PCM.to_le_bytes());
    out.extend_from_slice(&(n_ch as u16).to_le_bytes());
    out.extend_from_slice(&sample_rate_hz.to_le_bytes());
    out.extend_from_slice(&(sample_rate_hz * block_align).to_le_bytes());
    out.extend_from_slice(&(block_align as u16).to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for i in 0..len {
        for c in channels {
            let q = (c[i] * FULL_SCALE).round() as i16;
            out.extend_from_slice(&q.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn write_wav(path: &Path, channels: &[&[f64]], sample_rate_hz: u32) -> Result<()> {
    fs::write(path, wav_bytes(channels, sample_rate_hz)?)?;
    Ok(())
}

struct Fmt {
    channels: u16,
    rate: u32,
    block_align: u16,
}

fn u16_at(b: &[u8], i: usize) -> u16 {
    u16::from_le_bytes([b[i], b[i + 1]])
}

fn u32_at(b: &[u8], i: usize) -> u32 {
    u32::from_le_bytes([b[i], b[i + 1], b[i + 2], b[i + 3]])
}

fn parse_fmt(body: &[u8]) -> Result<Fmt> {
    if body.len() < 16 {
        return Err(chunk_err(
            "fmt ",
            format!("chunk is {} bytes, need at least 16", body.len()),
        ));
    }
    let mut tag = u16_at(body, 0);
    let channels = u16_at(body, 2);
    let rate = u32_at(body, 4);
    let byte_rate = u32_at(body, 8);
    let block_align = u16_at(body, 12);
    let bits = u16_at(body, 14);
    if tag == EXTENSIBLE {
        if body.len() < 40 {
            return Err(chunk_err("fmt ", "extensible format chunk too short"));
        }
        tag = u16_at(body, 24);
    } else if body.len() > 16 {
        let extra = u16_at(body, 16.min(body.len() - 2)) as usize;
        if body.len() < 18 || 18 + extra != body.len() {
            return Err(chunk_err("fmt ", "inconsistent extension size"));
        }
    }
    if tag != PCM || bits != 16 {
        return Err(chunk_err(
            "fmt ",
            format!("unsupported encoding (format tag {tag}, {bits} bits); only PCM16 is read"),
        ));
    }
    if channels == 0 {
        return Err(chunk_err("fmt ", "zero channels"));
    }
    if rate == 0 {
        return Err(chunk_err("fmt ", "zero sample rate"));
    }
    if u32::from(block_align) != 2 * u32::from(channels) {
        return Err(chunk_err(
            "fmt ",
            format!("block align {block_align} does not match {channels} channels"),
        ));
    }
    if u64::from(byte_rate) != u64::from(rate) * u64::from(block_align) {
        return Err(chunk_err(
            "fmt ",
            format!("byte rate {byte_rate} inconsistent with {rate} Hz"),
        ));
    }
    Ok(Fmt {
        channels,
        rate,
        block_align,
    })
}

pub fn parse_wav(bytes: &[u8]) -> Result<WavData> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(chunk_err("RIFF", "not a RIFF/WAVE file"));
    }
    let riff_len = u32_at(bytes, 4) as u64;
    if riff_len + 8 != bytes.len() as u64 {
        return Err(chunk_err(
            "RIFF",
            format!(
                "declared size {} does not match file size {}",
                riff_len + 8,
                bytes.len()
            ),
        ));
    }
    let mut pos = 12;
    let mut fmt: Option<Fmt> = None;
    let mut data: Option<&[u8]> = None;
    while pos < bytes.len() {
        if bytes.len() - pos < 8 {
            return Err(Error::format(
                Location::Offset(pos as u64),
                "truncated chunk header",
            ));
        }
        let id = &bytes[pos..pos + 4];
        let name = String::from_utf8_lossy(id).into_owned();
        let size = u32_at(bytes, pos + 4) as usize;
        let start = pos + 8;
        let padded = size + (size & 1);
        if bytes.len() - start < size
            || (bytes.len() - start < padded && start + size != bytes.len())
        {
            return Err(chunk_err(
                &name,
                format!("chunk of {size} bytes runs past end of file"),
            ));
        }
        let body = &bytes[start..start + size];
        match id {
            b"fmt " => {
                if fmt.is_some() {
                    return Err(chunk_err("fmt ", "duplicate chunk"));
                }
                fmt = Some(parse_fmt(body)?);
            }
            b"data" => {
                if data.is_some() {
                    return Err(chunk_err("data", "duplicate chunk"));
                }
                data = Some(body);
            }
            _ if id.iter().all(|b| b.is_ascii_graphic() || *b == b' ') => {}
            _ => {
                return Err(Error::format(
                    Location::Offset(pos as u64),
                    "invalid chunk identifier",
                ))
            }
        }
        pos = (start + padded).min(bytes.len());
    }
    let fmt = fmt.ok_or_else(|| chunk_err("fmt ", "missing chunk"))?;
    let data = data.ok_or_else(|| chunk_err("data", "missing chunk"))?;
    let block = fmt.block_align as usize;
    if data.len() % block != 0 {
        return Err(chunk_err(
            "data",
            format!(
                "{} bytes is not a whole number of {block}-byte frames",
                data.len()
            ),
        ));
    }
    let n_ch = fmt.channels as usize;
    let mut channels = vec![Vec::with_capacity(data.len() / block); n_ch];
    for frame in data.chunks_exact(block) {
        for (c, s) in frame.chunks_exact(2).enumerate() {
            let v = i16::from_le_bytes([s[0], s[1]]);
            channels[c].push((f64::from(v) / FULL_SCALE).max(-1.0));
        }
    }
    Ok(WavData {
        channels,
        sample_rate_hz: fmt.rate,
    })
}

pub fn read_wav(path: &Path) -> Result<WavData> {
    parse_wav(&fs::read(path)?)
}

/// Writes a stereo PCM16 file.
pub fn write_audio(path: &Path, win: &AudioWindow) -> Result<()> {
    write_wav(path, &[win.left(), win.right()], win.sample_rate_hz())
}

/// Reads a mono or stereo file; mono is duplicated into both channels.
pub fn read_audio(path: &Path, start_ts_ms: u64) -> Result<AudioWindow> {
    let w = read_wav(path)?;
    let at = || Location::File(path.to_path_buf());
    let mut ch = w.channels.into_iter();
    let (left, right) = match (ch.next(), ch.next(), ch.next()) {
        (Some(l), None, None) => (l.clone(), l),
        (Some(l), Some(r), None) => (l, r),
        _ => return Err(Error::format(at(), "expected 1 or 2 channels")),
    };
    if left.is_empty() {
        return Err(Error::format(at(), "no audio samples"));
    }
    AudioWindow::new(left, right, w.sample_rate_hz, start_ts_ms)
        .map_err(|e| Error::format(at(), e.to_string()))
}

/// Incremental PCM16 reader for pipes: parses the header up front, then
/// hands out sample frames as they arrive. A data size of 0 or `u32::MAX`
/// means "until end of stream".
pub struct WavStream<R> {
    inner: R,
    channels: u16,
    sample_rate_hz: u32,
    remaining: Option<u64>,
}

fn read_exact_or<R: Read>(r: &mut R, buf: &mut [u8], chunk: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => chunk_err(chunk, "stream ended inside the header"),
        _ => Error::Io(e),
    })
}

impl<R: Read> WavStream<R> {
    pub fn new(mut inner: R) -> Result<Self> {
        let mut head = [0u8; 12];
        read_exact_or(&mut inner, &mut head, "RIFF")?;
        if &head[0..4] != b"RIFF" || &head[8..12] != b"WAVE" {
            return Err(chunk_err("RIFF", "not a RIFF/WAVE stream"));
        }
        let mut fmt = None;
        loop {
            let mut ch = [0u8; 8];
            read_exact_or(&mut inner, &mut ch, "data")?;
            let size = u32_at(&ch, 4);
            let name = String::from_utf8_lossy(&ch[0..4]).into_owned();
            if &ch[0..4] == b"data" {
                let fmt: Fmt = fmt.ok_or_else(|| chunk_err("fmt ", "missing chunk before data"))?;
                let remaining = (size != 0 && size != u32::MAX).then_some(u64::from(size));
                if remaining.is_some_and(|r| r % u64::from(fmt.block_align) != 0) {
                    return Err(chunk_err("data", "size is not a whole number of frames"));
                }
                return Ok(Self {
                    inner,
                    channels: fmt.channels,
                    sample_rate_hz: fmt.rate,
                    remaining,
                });
            }
            if size > 1 << 20 {
                return Err(chunk_err(
                    &name,
                    format!("header chunk of {size} bytes is implausibly large"),
                ));
            }
            let mut body = vec![0u8; (size + (size & 1)) as usize];
            read_exact_or(&mut inner, &mut body, &name)?;
            body.truncate(size as usize);
            if &ch[0..4] == b"fmt " {
                fmt = Some(parse_fmt(&body)?);
            }
        }
    }

    pub fn channels(&self) -> u16 {
        self.channels
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    /// Up to `max_frames` frames as (left, right); mono is duplicated.
    /// Returns empty vectors at end of stream.
    pub fn read_frames(&mut self, max_frames: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let block = 2 * self.channels as usize;
        let mut want = max_frames * block;
        if let Some(r) = self.remaining {
            want = want.min(r as usize);
        }
        let mut buf = vec![0u8; want];
        let mut got = 0;
        while got < want {
            match self.inner.read(&mut buf[got..]) {
                Ok(0) => break,
                Ok(n) => got += n,
                Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
        if let Some(r) = self.remaining.as_mut() {
            *r -= got as u64;
        }
        if got % block != 0 {
            return Err(chunk_err(
                "data",
                format!("stream ended inside a {block}-byte frame"),
            ));
        }
        let mut left = Vec::with_capacity(got / block);
        let mut right = Vec::with_capacity(got / block);
        for frame in buf[..got].chunks_exact(block) {
            let s = |c: usize| {
                (f64::from(i16::from_le_bytes([frame[2 * c], frame[2 * c + 1]])) / FULL_SCALE)
                    .max(-1.0)
            };
            left.push(s(0));
            right.push(if self.channels > 1 { s(1) } else { s(0) });
        }
        Ok((left, right))
    }
}
