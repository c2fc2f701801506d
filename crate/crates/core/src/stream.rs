//! Single-pass readers and writers for line-delimited demonstration files.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::frame::{serialize_frame, Frame, FrameError};
use crate::Timestamp;

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("line {line}: {source}")]
    Frame { line: usize, source: FrameError },
    #[error("line {line}: timestamp {current} not greater than previous {previous}")]
    NonMonotonicTimestamp { line: usize, previous: Timestamp, current: Timestamp },
}

/// Iterator over the frames of a demonstration stream.
///
/// Frames are yielded in stored order, one at a time; only the current line
/// is buffered, so peak memory is independent of stream length. Timestamps
/// must strictly increase.
pub struct FrameReader<R> {
    reader: R,
    path: PathBuf,
    line_no: usize,
    last_timestamp: Option<Timestamp>,
    buf: String,
}

impl FrameReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StreamError> {
        let path = path.as_ref().to_path_buf();
        let file = File::open(&path).map_err(|source| StreamError::Io { path: path.clone(), source })?;
        Ok(FrameReader::from_reader_named(BufReader::new(file), path))
    }
}

impl<R: BufRead> FrameReader<R> {
    pub fn from_reader(reader: R) -> Self {
        Self::from_reader_named(reader, PathBuf::from("<memory>"))
    }

    fn from_reader_named(reader: R, path: PathBuf) -> Self {
        FrameReader { reader, path, line_no: 0, last_timestamp: None, buf: String::new() }
    }

    fn next_frame(&mut self) -> Result<Option<Frame>, StreamError> {
        loop {
            self.buf.clear();
            let n = self
                .reader
                .read_line(&mut self.buf)
                .map_err(|source| StreamError::Io { path: self.path.clone(), source })?;
            if n == 0 {
                return Ok(None);
            }
            self.line_no += 1;
            let line = self.buf.trim();
            if line.is_empty() {
                continue;
            }
            let frame = crate::frame::parse_frame(line)
                .map_err(|source| StreamError::Frame { line: self.line_no, source })?;
            if let Some(prev) = self.last_timestamp {
                if frame.timestamp <= prev {
                    return Err(StreamError::NonMonotonicTimestamp {
                        line: self.line_no,
                        previous: prev,
                        current: frame.timestamp,
                    });
                }
            }
            self.last_timestamp = Some(frame.timestamp);
            return Ok(Some(frame));
        }
    }
}

impl<R: BufRead> Iterator for FrameReader<R> {
    type Item = Result<Frame, StreamError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_frame().transpose()
    }
}

/// Opens a demonstration file as a lazy frame iterator.
pub fn open_stream(path: impl AsRef<Path>) -> Result<FrameReader<BufReader<File>>, StreamError> {
    FrameReader::open(path)
}

/// Writes frames as one record per line.
pub struct FrameWriter<W: Write> {
    writer: W,
    path: PathBuf,
}

impl FrameWriter<BufWriter<File>> {
    pub fn create(path: impl AsRef<Path>) -> Result<Self, StreamError> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(|source| StreamError::Io { path: path.clone(), source })?;
        Ok(FrameWriter { writer: BufWriter::new(file), path })
    }
}

impl<W: Write> FrameWriter<W> {
    pub fn from_writer(writer: W) -> Self {
        FrameWriter { writer, path: PathBuf::from("<memory>") }
    }

    pub fn write_frame(&mut self, frame: &Frame) -> Result<(), StreamError> {
        let line = serialize_frame(frame);
        self.writer
            .write_all(line.as_bytes())
            .and_then(|_| self.writer.write_all(b"\n"))
            .map_err(|source| StreamError::Io { path: self.path.clone(), source })
    }

    pub fn finish(mut self) -> Result<(), StreamError> {
        self.writer.flush().map_err(|source| StreamError::Io { path: self.path.clone(), source })
    }
}
