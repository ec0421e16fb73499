//! Binary portable anymap (P5 graymap, P6 pixmap) with 8-bit samples.
//!
//! A frame stream is zero or more such images concatenated on one byte
//! stream; [`PnmFrames`] walks it one frame at a time without buffering the
//! whole stream.

use std::io::{BufRead, BufReader, ErrorKind, Read};

use thiserror::Error;

use super::{AnyImage, GrayImage, RgbImage};

#[derive(Debug, Error)]
pub enum PnmError {
    #[error("bad magic number {0:?}: only binary P5 and P6 are supported")]
    BadMagic(String),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("unsupported maxval {0}: only 255 is supported")]
    UnsupportedMaxval(u32),
    #[error("truncated payload: expected {expected} bytes, got {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Decode the first image in `bytes`. Trailing bytes are ignored.
pub fn read_pnm(bytes: &[u8]) -> Result<AnyImage, PnmError> {
    let mut frames = PnmFrames::new(bytes);
    match frames.next() {
        Some(r) => r,
        None => Err(PnmError::MalformedHeader("empty input".into())),
    }
}

/// Encode as P5 (gray) or P6 (rgb) with a canonical `P5\n<w> <h>\n255\n` header.
pub fn write_pnm(img: &AnyImage) -> Vec<u8> {
    let (magic, w, h, payload) = match img {
        AnyImage::Gray(g) => ("P5", g.width(), g.height(), g.samples()),
        AnyImage::Rgb(c) => ("P6", c.width(), c.height(), c.samples()),
    };
    let mut out = format!("{magic}\n{w} {h}\n255\n").into_bytes();
    out.extend_from_slice(payload);
    out
}

pub fn write_pgm(img: &GrayImage) -> Vec<u8> {
    write_pnm(&AnyImage::Gray(img.clone()))
}

/// Iterator over the images of a concatenated PNM stream.
///
/// After the first error the iterator is exhausted.
pub struct PnmFrames<R: Read> {
    reader: BufReader<R>,
    failed: bool,
}

impl<R: Read> PnmFrames<R> {
    pub fn new(inner: R) -> Self {
        PnmFrames {
            reader: BufReader::new(inner),
            failed: false,
        }
    }

    fn peek(&mut self) -> Result<Option<u8>, PnmError> {
        let buf = self.reader.fill_buf()?;
        Ok(buf.first().copied())
    }

    fn bump(&mut self) {
        self.reader.consume(1);
    }

    /// Skip whitespace and `#` comments; returns false on end of input.
    fn skip_separators(&mut self) -> Result<bool, PnmError> {
        loop {
            match self.peek()? {
                None => return Ok(false),
                Some(b'#') => loop {
                    match self.peek()? {
                        None => return Ok(false),
                        Some(b'\n') | Some(b'\r') => break,
                        Some(_) => self.bump(),
                    }
                },
                Some(c) if c.is_ascii_whitespace() => self.bump(),
                Some(_) => return Ok(true),
            }
        }
    }

    fn token(&mut self, what: &str) -> Result<String, PnmError> {
        if !self.skip_separators()? {
            return Err(PnmError::MalformedHeader(format!("missing {what}")));
        }
        let mut tok = String::new();
        while let Some(c) = self.peek()? {
            if c.is_ascii_whitespace() || c == b'#' {
                break;
            }
            tok.push(c as char);
            self.bump();
            if tok.len() > 20 {
                return Err(PnmError::MalformedHeader(format!("{what} token too long")));
            }
        }
        Ok(tok)
    }

    fn number(&mut self, what: &str) -> Result<u32, PnmError> {
        let tok = self.token(what)?;
        tok.parse::<u32>()
            .map_err(|_| PnmError::MalformedHeader(format!("{what} is not a number: {tok:?}")))
    }

    fn read_frame(&mut self) -> Result<Option<AnyImage>, PnmError> {
        // leading whitespace between frames is tolerated; EOF here ends the stream
        loop {
            match self.peek()? {
                None => return Ok(None),
                Some(c) if c.is_ascii_whitespace() => self.bump(),
                Some(_) => break,
            }
        }
        let magic = self.token("magic")?;
        let channels = match magic.as_str() {
            "P5" => 1,
            "P6" => 3,
            _ => return Err(PnmError::BadMagic(magic)),
        };
        let width = self.number("width")?;
        let height = self.number("height")?;
        let maxval = self.number("maxval")?;
        if width == 0 || height == 0 {
            return Err(PnmError::MalformedHeader(format!("zero dimension {width}x{height}")));
        }
        if maxval != 255 {
            return Err(PnmError::UnsupportedMaxval(maxval));
        }
        // exactly one whitespace byte separates the header from the payload
        match self.peek()? {
            Some(c) if c.is_ascii_whitespace() => self.bump(),
            _ => return Err(PnmError::MalformedHeader("missing separator after maxval".into())),
        }
        let expected = channels * width as usize * height as usize;
        let mut payload = vec![0u8; expected];
        let mut filled = 0;
        while filled < expected {
            match self.reader.read(&mut payload[filled..]) {
                Ok(0) => {
                    return Err(PnmError::Truncated {
                        expected,
                        actual: filled,
                    })
                }
                Ok(n) => filled += n,
                Err(e) if e.kind() == ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
        let img = if channels == 1 {
            AnyImage::Gray(GrayImage::new(width, height, payload).expect("payload sized from header"))
        } else {
            AnyImage::Rgb(RgbImage::new(width, height, payload).expect("payload sized from header"))
        };
        Ok(Some(img))
    }
}

impl<R: Read> Iterator for PnmFrames<R> {
    type Item = Result<AnyImage, PnmError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        match self.read_frame() {
            Ok(Some(img)) => Some(Ok(img)),
            Ok(None) => None,
            Err(e) => {
                self.failed = true;
                Some(Err(e))
            }
        }
    }
}
