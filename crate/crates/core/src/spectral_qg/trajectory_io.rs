//! Binary trajectory files.
//!
//! Little-endian layout:
//!
//! ```text
//! magic        4 bytes  "QGTJ"
//! version      u32
//! nx           u32
//! n_layers     u32      always 2
//! n_snapshots  u64
//! sample_every f64
//! dt           f64
//! params       7 × f64  r, beta, kd2, nu, u, f0, h2
//! payload      n_snapshots × n_layers × nx × nx × f64, row-major (layer, y, x)
//! ```
//!
//! Writers stream into a temporary sibling and rename on [`TrajectoryWriter::finish`].

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use super::model::LAYERS;
use super::{GridSpec, QgError, QgParams, Trajectory};

pub const MAGIC: &[u8; 4] = b"QGTJ";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: u64 = 4 + 4 + 4 + 4 + 8 + 8 + 8 + 7 * 8;
const COUNT_OFFSET: u64 = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryHeader {
    pub grid: GridSpec,
    pub n_snapshots: u64,
    pub sample_every: f64,
    pub dt: f64,
    pub params: QgParams,
}

impl TrajectoryHeader {
    pub fn of(traj: &Trajectory) -> Self {
        Self {
            grid: traj.grid,
            n_snapshots: traj.len() as u64,
            sample_every: traj.sample_every,
            dt: traj.dt,
            params: traj.params,
        }
    }

    pub fn snapshot_len(&self) -> usize {
        LAYERS * self.grid.len()
    }

    fn encode(&self) -> Vec<u8> {
        let mut b = Vec::with_capacity(HEADER_LEN as usize);
        b.extend_from_slice(MAGIC);
        b.extend_from_slice(&VERSION.to_le_bytes());
        b.extend_from_slice(&(self.grid.nx() as u32).to_le_bytes());
        b.extend_from_slice(&(LAYERS as u32).to_le_bytes());
        b.extend_from_slice(&self.n_snapshots.to_le_bytes());
        b.extend_from_slice(&self.sample_every.to_le_bytes());
        b.extend_from_slice(&self.dt.to_le_bytes());
        for v in self.params.to_record() {
            b.extend_from_slice(&v.to_le_bytes());
        }
        b
    }

    fn decode(b: &[u8; HEADER_LEN as usize]) -> Result<Self, QgError> {
        if &b[0..4] != MAGIC {
            return Err(QgError::Format("bad trajectory magic".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(b[o..o + 4].try_into().unwrap());
        let f64_at = |o: usize| f64::from_le_bytes(b[o..o + 8].try_into().unwrap());
        let version = u32_at(4);
        if version != VERSION {
            return Err(QgError::Format(format!("unsupported trajectory version {version}")));
        }
        let nx = u32_at(8) as usize;
        let layers = u32_at(12) as usize;
        if layers != LAYERS {
            return Err(QgError::Format(format!("expected {LAYERS} layers, found {layers}")));
        }
        let n_snapshots = u64::from_le_bytes(b[16..24].try_into().unwrap());
        let mut rec = [0.0; 7];
        for (i, r) in rec.iter_mut().enumerate() {
            *r = f64_at(40 + 8 * i);
        }
        Ok(Self {
            grid: GridSpec::new(nx)?,
            n_snapshots,
            sample_every: f64_at(24),
            dt: f64_at(32),
            params: QgParams::from_record(rec),
        })
    }
}

/// Streaming writer; the snapshot count is patched into the header on finish.
pub struct TrajectoryWriter {
    header: TrajectoryHeader,
    out: BufWriter<File>,
    tmp: PathBuf,
    dest: PathBuf,
    written: u64,
    buf: Vec<u8>,
}

impl TrajectoryWriter {
    pub fn create(path: impl AsRef<Path>, grid: GridSpec, sample_every: f64, dt: f64, params: QgParams) -> Result<Self, QgError> {
        let dest = path.as_ref().to_path_buf();
        let tmp = temp_sibling(&dest);
        let header = TrajectoryHeader { grid, n_snapshots: 0, sample_every, dt, params };
        let mut out = BufWriter::new(File::create(&tmp)?);
        out.write_all(&header.encode())?;
        Ok(Self { header, out, tmp, dest, written: 0, buf: Vec::new() })
    }

    pub fn header(&self) -> &TrajectoryHeader {
        &self.header
    }

    pub fn push(&mut self, snapshot: &[f64]) -> Result<(), QgError> {
        let n = self.header.snapshot_len();
        if snapshot.len() != n {
            return Err(QgError::SizeMismatch { expected: n, found: snapshot.len() });
        }
        self.buf.clear();
        for v in snapshot {
            self.buf.extend_from_slice(&v.to_le_bytes());
        }
        self.out.write_all(&self.buf)?;
        self.written += 1;
        Ok(())
    }

    pub fn finish(self) -> Result<u64, QgError> {
        let Self { mut out, tmp, dest, written, .. } = self;
        out.flush()?;
        let mut file = out.into_inner().map_err(|e| e.into_error())?;
        file.seek(SeekFrom::Start(COUNT_OFFSET))?;
        file.write_all(&written.to_le_bytes())?;
        file.sync_all()?;
        drop(file);
        fs::rename(&tmp, &dest)?;
        Ok(written)
    }
}

pub(crate) fn temp_sibling(dest: &Path) -> PathBuf {
    let name = dest
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    dest.with_file_name(format!(".{name}.tmp{}", std::process::id()))
}

/// Streaming reader yielding one snapshot at a time.
pub struct TrajectoryReader {
    header: TrajectoryHeader,
    input: BufReader<File>,
    read: u64,
    bytes: Vec<u8>,
}

impl TrajectoryReader {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, QgError> {
        let path = path.as_ref();
        let file = File::open(path)?;
        let len = file.metadata()?.len();
        let mut input = BufReader::new(file);
        let mut hb = [0u8; HEADER_LEN as usize];
        input.read_exact(&mut hb)?;
        let header = TrajectoryHeader::decode(&hb)?;
        let expect = HEADER_LEN + header.n_snapshots * header.snapshot_len() as u64 * 8;
        if len != expect {
            return Err(QgError::Format(format!(
                "{}: length {len} does not match header ({expect})",
                path.display()
            )));
        }
        let bytes = vec![0u8; header.snapshot_len() * 8];
        Ok(Self { header, input, read: 0, bytes })
    }

    pub fn header(&self) -> &TrajectoryHeader {
        &self.header
    }

    /// Fill `out` with the next snapshot; `Ok(false)` at end of file.
    pub fn next_into(&mut self, out: &mut [f64]) -> Result<bool, QgError> {
        if self.read == self.header.n_snapshots {
            return Ok(false);
        }
        if out.len() != self.header.snapshot_len() {
            return Err(QgError::SizeMismatch { expected: self.header.snapshot_len(), found: out.len() });
        }
        self.input.read_exact(&mut self.bytes)?;
        for (o, c) in out.iter_mut().zip(self.bytes.chunks_exact(8)) {
            *o = f64::from_le_bytes(c.try_into().unwrap());
        }
        self.read += 1;
        Ok(true)
    }
}

pub fn read_header(path: impl AsRef<Path>) -> Result<TrajectoryHeader, QgError> {
    Ok(*TrajectoryReader::open(path)?.header())
}

pub fn read_trajectory(path: impl AsRef<Path>) -> Result<Trajectory, QgError> {
    let mut reader = TrajectoryReader::open(path)?;
    let h = *reader.header();
    let mut traj = Trajectory::new(h.grid, h.sample_every, h.dt, h.params);
    traj.data = vec![0.0; h.n_snapshots as usize * h.snapshot_len()];
    let n = h.snapshot_len();
    for chunk in traj.data.chunks_mut(n) {
        reader.next_into(chunk)?;
    }
    Ok(traj)
}

pub fn write_trajectory(path: impl AsRef<Path>, traj: &Trajectory) -> Result<(), QgError> {
    let mut w = TrajectoryWriter::create(path, traj.grid, traj.sample_every, traj.dt, traj.params)?;
    for s in traj.snapshots() {
        w.push(s)?;
    }
    w.finish()?;
    Ok(())
}

/// Write `bytes` to a temporary sibling, then rename over `path`.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> std::io::Result<()> {
    let dest = path.as_ref();
    let tmp = temp_sibling(dest);
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, dest)
}
