use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use super::{SessionError, SessionMetadata};
use crate::signal::{Marker, SignalChunk};
use crate::CHANNELS;

pub const MAGIC: &[u8; 4] = b"NREC";
pub const VERSION: u16 = 1;
/// Sample-count value that marks a marker block.
pub const MARKER_SENTINEL: u32 = u32::MAX;
/// Seconds a marker is held back before it is written.
pub const MARKER_HOLDBACK_S: u64 = 10;

const MAX_BLOCK_SAMPLES: u32 = 1 << 20;
const MAX_JSON: u32 = 16 << 20;

fn write_err(path: &Path) -> impl FnOnce(std::io::Error) -> SessionError + '_ {
    move |source| SessionError::Write {
        path: path.to_path_buf(),
        source,
    }
}

/// Outcome of a closed recording.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionSummary {
    pub path: PathBuf,
    pub first_sample: Option<u64>,
    pub samples: u64,
    pub markers: usize,
}

/// Append-only `.neurec` writer.
pub struct SessionWriter {
    path: PathBuf,
    out: BufWriter<File>,
    block_len: usize,
    first: Option<u64>,
    pending_start: u64,
    pending: Vec<f32>,
    markers: Vec<Marker>,
    samples: u64,
    marker_count: usize,
}

/// Create the next free `session-NNN.neurec` in `dir`.
pub fn open_session(
    dir: impl AsRef<Path>,
    metadata: &SessionMetadata,
) -> Result<SessionWriter, SessionError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(write_err(dir))?;
    let path = (1..)
        .map(|i| dir.join(format!("session-{i:03}.neurec")))
        .find(|p| !p.exists())
        .expect("unbounded search");
    SessionWriter::create(path, metadata)
}

/// Most recently numbered `.neurec` in `dir`, or `path` itself if it is a file.
pub fn latest_session(path: impl AsRef<Path>) -> Result<PathBuf, SessionError> {
    let path = path.as_ref();
    if path.is_file() {
        return Ok(path.to_path_buf());
    }
    let entries = std::fs::read_dir(path).map_err(|source| SessionError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let mut found: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "neurec"))
        .collect();
    found.sort();
    found
        .pop()
        .ok_or_else(|| SessionError::NotFound(path.to_path_buf()))
}

impl SessionWriter {
    pub fn create(
        path: impl Into<PathBuf>,
        metadata: &SessionMetadata,
    ) -> Result<Self, SessionError> {
        let path = path.into();
        let file = File::create(&path).map_err(write_err(&path))?;
        let mut w = SessionWriter {
            out: BufWriter::new(file),
            block_len: (metadata.fs().round() as usize).max(1),
            first: None,
            pending_start: 0,
            pending: Vec::new(),
            markers: Vec::new(),
            samples: 0,
            marker_count: 0,
            path,
        };
        let json = serde_json::to_vec(metadata)?;
        let mut head = Vec::with_capacity(json.len() + 14);
        head.extend_from_slice(MAGIC);
        head.extend_from_slice(&VERSION.to_le_bytes());
        head.extend_from_slice(&(json.len() as u32).to_le_bytes());
        head.extend_from_slice(&json);
        let crc = crc32fast::hash(&head);
        head.extend_from_slice(&crc.to_le_bytes());
        w.emit(&head)?;
        w.flush()?;
        Ok(w)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn samples(&self) -> u64 {
        self.samples
    }

    /// Index the next appended chunk must start at.
    pub fn next_index(&self) -> Option<u64> {
        self.first.map(|f| f + self.samples)
    }

    fn emit(&mut self, bytes: &[u8]) -> Result<(), SessionError> {
        self.out.write_all(bytes).map_err(write_err(&self.path))
    }

    fn flush(&mut self) -> Result<(), SessionError> {
        self.out.flush().map_err(write_err(&self.path))
    }

    pub fn append(&mut self, chunk: &SignalChunk) -> Result<(), SessionError> {
        if chunk.n_channels() != CHANNELS {
            return Err(SessionError::Shape {
                expected: CHANNELS,
                got: chunk.n_channels(),
            });
        }
        if chunk.is_empty() {
            return Ok(());
        }
        match self.next_index() {
            None => {
                self.first = Some(chunk.start);
                self.pending_start = chunk.start;
            }
            Some(expected) if expected != chunk.start => {
                return Err(SessionError::Gap {
                    expected,
                    got: chunk.start,
                });
            }
            _ => {}
        }
        for i in 0..chunk.len() {
            for ch in &chunk.data {
                self.pending.push(ch[i] as f32);
            }
            self.samples += 1;
            if self.pending.len() == self.block_len * CHANNELS {
                self.write_block()?;
            }
        }
        Ok(())
    }

    pub fn add_marker(&mut self, marker: Marker) {
        self.markers.push(marker);
    }

    fn write_markers_before(&mut self, end: u64) -> Result<(), SessionError> {
        self.markers.sort_by_key(|m| m.sample);
        let n = self.markers.partition_point(|m| m.sample < end);
        let due: Vec<Marker> = self.markers.drain(..n).collect();
        for m in due {
            let json = serde_json::to_vec(&m)?;
            let mut b = Vec::with_capacity(json.len() + 20);
            b.extend_from_slice(&m.sample.to_le_bytes());
            b.extend_from_slice(&MARKER_SENTINEL.to_le_bytes());
            b.extend_from_slice(&(json.len() as u32).to_le_bytes());
            b.extend_from_slice(&json);
            let crc = crc32fast::hash(&b);
            b.extend_from_slice(&crc.to_le_bytes());
            self.emit(&b)?;
            self.marker_count += 1;
        }
        Ok(())
    }

    fn write_block(&mut self) -> Result<(), SessionError> {
        let n = self.pending.len() / CHANNELS;
        if n == 0 {
            return Ok(());
        }
        let holdback = self.block_len as u64 * MARKER_HOLDBACK_S;
        self.write_markers_before(self.pending_start.saturating_sub(holdback))?;
        let mut b = Vec::with_capacity(16 + self.pending.len() * 4);
        b.extend_from_slice(&self.pending_start.to_le_bytes());
        b.extend_from_slice(&(n as u32).to_le_bytes());
        for v in &self.pending {
            b.extend_from_slice(&v.to_le_bytes());
        }
        let crc = crc32fast::hash(&b);
        b.extend_from_slice(&crc.to_le_bytes());
        self.emit(&b)?;
        self.flush()?;
        self.pending_start += n as u64;
        self.pending.clear();
        Ok(())
    }

    /// Write the partial block and any remaining markers. Markers past the
    /// end of the recording are clamped onto its last sample.
    pub fn close(mut self) -> Result<SessionSummary, SessionError> {
        self.write_block()?;
        if let Some(end) = self.next_index().filter(|_| self.samples > 0) {
            for m in &mut self.markers {
                m.sample = m.sample.min(end - 1);
            }
        }
        self.write_markers_before(u64::MAX)?;
        self.flush()?;
        self.out
            .get_ref()
            .sync_all()
            .map_err(write_err(&self.path))?;
        Ok(SessionSummary {
            path: self.path.clone(),
            first_sample: self.first,
            samples: self.samples,
            markers: self.marker_count,
        })
    }
}

/// One decoded block.
#[derive(Debug, Clone, PartialEq)]
pub enum Block {
    Samples {
        first: u64,
        data: Vec<[f32; CHANNELS]>,
    },
    Marker(Marker),
}

/// Block-at-a-time reader.
pub struct SessionReader<R: Read> {
    input: R,
    metadata: SessionMetadata,
    offset: u64,
}

fn read_exact_or<R: Read>(r: &mut R, buf: &mut [u8], offset: u64) -> Result<bool, SessionError> {
    let mut got = 0;
    while got < buf.len() {
        match r.read(&mut buf[got..]) {
            Ok(0) if got == 0 => return Ok(false),
            Ok(0) => return Err(SessionError::Truncated { offset }),
            Ok(n) => got += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(_) => return Err(SessionError::Truncated { offset }),
        }
    }
    Ok(true)
}

fn le_u32(b: &[u8]) -> u32 {
    u32::from_le_bytes(b[..4].try_into().unwrap())
}

impl SessionReader<std::io::BufReader<File>> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, SessionError> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|source| SessionError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        SessionReader::new(std::io::BufReader::new(f))
    }
}

impl<R: Read> SessionReader<R> {
    pub fn new(mut input: R) -> Result<Self, SessionError> {
        let mut fixed = [0u8; 10];
        if !read_exact_or(&mut input, &mut fixed, 0)? {
            return Err(SessionError::Truncated { offset: 0 });
        }
        if &fixed[..4] != MAGIC {
            return Err(SessionError::BadMagic);
        }
        let version = u16::from_le_bytes([fixed[4], fixed[5]]);
        if version != VERSION {
            return Err(SessionError::Version(version));
        }
        let len = le_u32(&fixed[6..]);
        if len > MAX_JSON {
            return Err(SessionError::HeaderChecksum);
        }
        let mut rest = vec![0u8; len as usize + 4];
        if !read_exact_or(&mut input, &mut rest, 10)? {
            return Err(SessionError::Truncated { offset: 10 });
        }
        let (json, crc) = rest.split_at(len as usize);
        let mut h = crc32fast::Hasher::new();
        h.update(&fixed);
        h.update(json);
        if h.finalize() != le_u32(crc) {
            return Err(SessionError::HeaderChecksum);
        }
        let metadata = serde_json::from_slice(json)?;
        Ok(SessionReader {
            input,
            metadata,
            offset: 14 + len as u64,
        })
    }

    pub fn metadata(&self) -> &SessionMetadata {
        &self.metadata
    }

    pub fn next_block(&mut self) -> Result<Option<Block>, SessionError> {
        let offset = self.offset;
        let mut head = [0u8; 12];
        if !read_exact_or(&mut self.input, &mut head, offset)? {
            return Ok(None);
        }
        let index = u64::from_le_bytes(head[..8].try_into().unwrap());
        let n = le_u32(&head[8..]);
        let mut hasher = crc32fast::Hasher::new();
        hasher.update(&head);
        let block = if n == MARKER_SENTINEL {
            let mut len = [0u8; 4];
            if !read_exact_or(&mut self.input, &mut len, offset)? {
                return Err(SessionError::Truncated { offset });
            }
            let len_v = le_u32(&len);
            if len_v > MAX_JSON {
                return Err(SessionError::BlockChecksum { offset });
            }
            let mut body = vec![0u8; len_v as usize + 4];
            if !read_exact_or(&mut self.input, &mut body, offset)? {
                return Err(SessionError::Truncated { offset });
            }
            hasher.update(&len);
            hasher.update(&body[..len_v as usize]);
            if hasher.finalize() != le_u32(&body[len_v as usize..]) {
                return Err(SessionError::BlockChecksum { offset });
            }
            self.offset += 16 + len_v as u64 + 4;
            let mut m: Marker = serde_json::from_slice(&body[..len_v as usize])
                .map_err(|_| SessionError::BlockChecksum { offset })?;
            m.sample = index;
            Block::Marker(m)
        } else {
            if n > MAX_BLOCK_SAMPLES {
                return Err(SessionError::BlockChecksum { offset });
            }
            let bytes = n as usize * CHANNELS * 4;
            let mut body = vec![0u8; bytes + 4];
            if !read_exact_or(&mut self.input, &mut body, offset)? {
                return Err(SessionError::Truncated { offset });
            }
            hasher.update(&body[..bytes]);
            if hasher.finalize() != le_u32(&body[bytes..]) {
                return Err(SessionError::BlockChecksum { offset });
            }
            self.offset += 12 + bytes as u64 + 4;
            let data = body[..bytes]
                .chunks_exact(CHANNELS * 4)
                .map(|s| {
                    let mut row = [0f32; CHANNELS];
                    for (ch, v) in row.iter_mut().enumerate() {
                        *v = f32::from_le_bytes(s[ch * 4..ch * 4 + 4].try_into().unwrap());
                    }
                    row
                })
                .collect();
            Block::Samples { first: index, data }
        };
        Ok(Some(block))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReadMode {
    /// Any damaged block is an error.
    Strict,
    /// Stop at the last valid block and report why in [`Recording::damage`].
    Lossy,
}

/// A fully loaded recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub metadata: SessionMetadata,
    /// Samples as stored (f32 widened to f64).
    pub samples: SignalChunk,
    pub markers: Vec<Marker>,
    /// Why reading stopped early, in lossy mode.
    pub damage: Option<String>,
}

impl Recording {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Load a recording. The header checksum is always enforced.
pub fn read_session(path: impl AsRef<Path>, mode: ReadMode) -> Result<Recording, SessionError> {
    let mut reader = SessionReader::open(path)?;
    let metadata = reader.metadata().clone();
    let fs = metadata.fs();
    let mut data: Vec<Vec<f64>> = vec![Vec::new(); CHANNELS];
    let mut start = None;
    let mut markers = Vec::new();
    let mut damage = None;
    loop {
        let block = match reader.next_block() {
            Ok(Some(b)) => b,
            Ok(None) => break,
            Err(e) if mode == ReadMode::Lossy => {
                damage = Some(e.to_string());
                break;
            }
            Err(e) => return Err(e),
        };
        match block {
            Block::Marker(m) => markers.push(m),
            Block::Samples { first, data: rows } => {
                let expected = start
                    .map(|s: u64| s + data[0].len() as u64)
                    .unwrap_or(first);
                if first != expected {
                    let e = SessionError::Gap {
                        expected,
                        got: first,
                    };
                    if mode == ReadMode::Lossy {
                        damage = Some(e.to_string());
                        break;
                    }
                    return Err(e);
                }
                start.get_or_insert(first);
                for row in rows {
                    for (ch, v) in row.iter().enumerate() {
                        data[ch].push(*v as f64);
                    }
                }
            }
        }
    }
    let samples = SignalChunk::from_channels(start.unwrap_or(0), fs, data);
    markers.sort_by_key(|m| m.sample);
    Ok(Recording {
        metadata,
        samples,
        markers,
        damage,
    })
}
