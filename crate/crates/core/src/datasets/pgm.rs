//! 8-bit binary PGM (P5) thermal frames and numbered frame directories.

use std::fs;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use crate::error::{Error, Location, Result};
use crate::signal::ThermalFrame;

/// Intensity in [0,1] to a byte, rounding half up.
pub fn quantize(v: f64) -> u8 {
    (v * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

pub fn pgm_bytes(frame: &ThermalFrame) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", frame.width(), frame.height()).into_bytes();
    out.extend(frame.pixels().iter().map(|&v| quantize(v)));
    out
}

pub fn write_pgm(path: &Path, frame: &ThermalFrame) -> Result<()> {
    fs::write(path, pgm_bytes(frame))?;
    Ok(())
}

fn is_space(b: u8) -> bool {
    matches!(b, b' ' | b'\t' | b'\n' | b'\r')
}

/// Byte source that tracks its offset for error messages.
struct Source<R> {
    inner: R,
    pos: u64,
}

impl<R: BufRead> Source<R> {
    fn peek(&mut self) -> Result<Option<u8>> {
        Ok(self.inner.fill_buf()?.first().copied())
    }

    fn next(&mut self) -> Result<Option<u8>> {
        let b = self.peek()?;
        if b.is_some() {
            self.inner.consume(1);
            self.pos += 1;
        }
        Ok(b)
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::format(Location::Offset(self.pos), msg)
    }

    /// Skips whitespace and `#` comments, then reads a decimal field.
    fn number(&mut self, what: &str) -> Result<usize> {
        loop {
            match self.peek()? {
                Some(b) if is_space(b) => {
                    self.next()?;
                }
                Some(b'#') => while !matches!(self.next()?, None | Some(b'\n')) {},
                _ => break,
            }
        }
        let mut digits = String::new();
        while let Some(b) = self.peek()? {
            if b.is_ascii_digit() && digits.len() < 9 {
                digits.push(b as char);
                self.next()?;
            } else {
                break;
            }
        }
        if digits.is_empty() {
            return Err(self.err(format!("expected {what}")));
        }
        match self.peek()? {
            Some(b) if is_space(b) || b == b'#' => {}
            _ => return Err(self.err(format!("malformed {what}"))),
        }
        Ok(digits.parse().expect("ascii digits"))
    }
}

/// Reads one P5 image. Returns `None` at a clean end of stream.
fn read_frame<R: BufRead>(src: &mut Source<R>, ts_ms: u64) -> Result<Option<ThermalFrame>> {
    let first = match src.next()? {
        None => return Ok(None),
        Some(b) => b,
    };
    if first != b'P' || src.next()? != Some(b'5') {
        return Err(Error::format(
            Location::Offset(src.pos.saturating_sub(2)),
            "expected P5 (binary graymap)",
        ));
    }
    let width = src.number("width")?;
    let height = src.number("height")?;
    let maxval = src.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(src.err("zero image dimension"));
    }
    if maxval != 255 {
        return Err(src.err(format!("unsupported maxval {maxval} (only 255)")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    src.next()?;
    let n = width
        .checked_mul(height)
        .filter(|&n| n <= 1 << 26)
        .ok_or_else(|| src.err("image dimensions too large"))?;
    let mut raster = vec![0u8; n];
    let start = src.pos;
    let mut got = 0;
    while got < n {
        let k = src.inner.read(&mut raster[got..])?;
        if k == 0 {
            return Err(Error::format(
                Location::Offset(start + got as u64),
                format!("raster truncated: {got} of {n} bytes for {width}x{height}"),
            ));
        }
        got += k;
    }
    src.pos += n as u64;
    let pixels = raster.into_iter().map(|b| f64::from(b) / 255.0).collect();
    Ok(Some(ThermalFrame::new(pixels, width, height, ts_ms)?))
}

/// Exactly one frame; trailing bytes are an error.
pub fn parse_pgm(bytes: &[u8], ts_ms: u64) -> Result<ThermalFrame> {
    let mut src = Source {
        inner: bytes,
        pos: 0,
    };
    let frame = read_frame(&mut src, ts_ms)?
        .ok_or_else(|| Error::format(Location::Offset(0), "empty file"))?;
    if src.pos as usize != bytes.len() {
        return Err(Error::format(
            Location::Offset(src.pos),
            format!("{} bytes after the raster", bytes.len() - src.pos as usize),
        ));
    }
    Ok(frame)
}

pub fn read_pgm(path: &Path, ts_ms: u64) -> Result<ThermalFrame> {
    parse_pgm(&fs::read(path)?, ts_ms).map_err(|e| in_file(path, e))
}

fn in_file(path: &Path, e: Error) -> Error {
    match e {
        Error::Format { at, message } => Error::Format {
            at: Location::File(path.to_path_buf()),
            message: format!("{at}: {message}"),
        },
        other => other,
    }
}

/// Back-to-back P5 images from a byte stream such as a named pipe. Frame
/// `k` is stamped `k * 1000 / fps` ms.
pub struct PgmStream<R> {
    src: Source<BufReader<R>>,
    fps: u32,
    index: u64,
    done: bool,
}

impl<R: Read> PgmStream<R> {
    pub fn new(reader: R, fps: u32) -> Result<Self> {
        if fps == 0 {
            return Err(Error::invalid("frame rate must be positive"));
        }
        Ok(Self {
            src: Source {
                inner: BufReader::new(reader),
                pos: 0,
            },
            fps,
            index: 0,
            done: false,
        })
    }
}

impl<R: Read> Iterator for PgmStream<R> {
    type Item = Result<ThermalFrame>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let ts = self.index * 1000 / u64::from(self.fps);
        match read_frame(&mut self.src, ts) {
            Ok(Some(f)) => {
                self.index += 1;
                Some(Ok(f))
            }
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:04}.pgm")
}

fn frame_number(name: &str) -> Option<usize> {
    let digits = name.strip_prefix("frame_")?.strip_suffix(".pgm")?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

/// Writes frames as `frame_0000.pgm`, `frame_0001.pgm`, ...
pub fn write_thermal_dir(dir: &Path, frames: &[ThermalFrame]) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (i, f) in frames.iter().enumerate() {
        write_pgm(&dir.join(frame_file_name(i)), f)?;
    }
    Ok(())
}

/// Frames read from a directory, in frame-number order.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalSequence {
    pub frames: Vec<ThermalFrame>,
    /// Gaps in the numbering and ignored files.
    pub warnings: Vec<String>,
}

/// Frame `n` is stamped `n * 1000 / fps` ms. All frames must share one size.
pub fn read_thermal_dir(dir: &Path, fps: u32) -> Result<ThermalSequence> {
    if fps == 0 {
        return Err(Error::invalid("frame rate must be positive"));
    }
    let mut numbered = Vec::new();
    let mut warnings = Vec::new();
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().into_owned();
        match frame_number(&name) {
            Some(n) => numbered.push((n, entry.path())),
            None => warnings.push(format!("ignored {name}")),
        }
    }
    numbered.sort();
    if let Some(w) = numbered.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::format(
            Location::File(w[1].1.clone()),
            format!("duplicate frame number {}", w[0].0),
        ));
    }
    for w in numbered.windows(2) {
        if w[1].0 > w[0].0 + 1 {
            warnings.push(format!("missing frames {}..{}", w[0].0 + 1, w[1].0 - 1));
        }
    }
    let mut frames: Vec<ThermalFrame> = Vec::with_capacity(numbered.len());
    for (n, path) in &numbered {
        let f = read_pgm(path, *n as u64 * 1000 / u64::from(fps))?;
        if let Some(first) = frames.first() {
            if (f.width(), f.height()) != (first.width(), first.height()) {
                return Err(Error::format(
                    Location::File(path.clone()),
                    format!(
                        "dimension mismatch: {}x{} vs {}x{}",
                        f.width(),
                        f.height(),
                        first.width(),
                        first.height()
                    ),
                ));
            }
        }
        frames.push(f);
    }
    warnings.sort();
    Ok(ThermalSequence { frames, warnings })
}
