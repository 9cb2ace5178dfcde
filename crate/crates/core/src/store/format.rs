//! Little-endian binary container for videos and texts.
//!
//! ```text
//! header   magic "EERCF\0" (6) | version u16 | dim u32 | count u64
//! video    id_len u16 | id | T u16 | P u16 | T*D f32 frames | T*P*D f32 patches
//! text     id_len u16 | id | D f32
//! ```

use std::collections::HashSet;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Counts, Gallery, Manifest, TextRecord, VideoRecord};
use crate::error::{Error, Result};

pub const MAGIC: [u8; 6] = *b"EERCF\0";
pub const FORMAT_VERSION: u16 = 1;
pub const HEADER_LEN: usize = 6 + 2 + 4 + 8;

pub const VIDEOS_FILE: &str = "videos.bin";
pub const TEXTS_FILE: &str = "texts.bin";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Videos, texts and manifest loaded from one directory.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub gallery: Gallery,
    pub texts: Vec<TextRecord>,
    pub manifest: Manifest,
}

fn write_header<W: Write>(w: &mut W, dim: usize, count: usize) -> Result<()> {
    let dim = u32::try_from(dim)
        .map_err(|_| Error::ShapeMismatch(format!("dimension {dim} exceeds u32")))?;
    w.write_all(&MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&dim.to_le_bytes())?;
    w.write_all(&(count as u64).to_le_bytes())?;
    Ok(())
}

fn write_u16_field<W: Write>(w: &mut W, value: usize, what: &str) -> Result<()> {
    let v = u16::try_from(value)
        .map_err(|_| Error::ShapeMismatch(format!("{what} {value} exceeds u16")))?;
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_id<W: Write>(w: &mut W, id: &str) -> Result<()> {
    write_u16_field(w, id.len(), "id length")?;
    w.write_all(id.as_bytes())?;
    Ok(())
}

fn write_f32s<W: Write>(w: &mut W, values: &[f32]) -> Result<()> {
    let mut buf = Vec::with_capacity(values.len() * 4);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn write_videos<W: Write>(w: &mut W, dim: usize, videos: &[VideoRecord]) -> Result<()> {
    if let Some(v) = videos.iter().find(|v| v.dim() != dim) {
        return Err(Error::ShapeMismatch(format!(
            "video {:?} has dimension {}, expected {dim}",
            v.id(),
            v.dim()
        )));
    }
    write_header(w, dim, videos.len())?;
    for v in videos {
        write_id(w, v.id())?;
        write_u16_field(w, v.num_frames(), "frame count")?;
        write_u16_field(w, v.patches_per_frame(), "patches per frame")?;
        write_f32s(w, v.frames())?;
        write_f32s(w, v.patches())?;
    }
    Ok(())
}

pub fn write_texts<W: Write>(w: &mut W, dim: usize, texts: &[TextRecord]) -> Result<()> {
    if let Some(t) = texts.iter().find(|t| t.dim() != dim) {
        return Err(Error::ShapeMismatch(format!(
            "text {:?} has dimension {}, expected {dim}",
            t.id(),
            t.dim()
        )));
    }
    write_header(w, dim, texts.len())?;
    for t in texts {
        write_id(w, t.id())?;
        write_f32s(w, t.raw())?;
    }
    Ok(())
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn exact(&mut self, buf: &mut [u8], what: &'static str) -> Result<()> {
        self.inner.read_exact(buf).map_err(|e| match e.kind() {
            io::ErrorKind::UnexpectedEof => Error::Truncated(what),
            _ => Error::Io(e),
        })
    }

    fn u16(&mut self, what: &'static str) -> Result<u16> {
        let mut b = [0u8; 2];
        self.exact(&mut b, what)?;
        Ok(u16::from_le_bytes(b))
    }

    fn id(&mut self) -> Result<String> {
        let len = self.u16("id length")? as usize;
        let mut bytes = vec![0u8; len];
        self.exact(&mut bytes, "id")?;
        String::from_utf8(bytes).map_err(|_| Error::ShapeMismatch("id is not valid UTF-8".into()))
    }

    fn f32s(&mut self, count: usize, what: &'static str) -> Result<Vec<f32>> {
        let mut bytes = vec![0u8; count * 4];
        self.exact(&mut bytes, what)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }

    /// Returns `(dim, count)`.
    fn header(&mut self) -> Result<(usize, u64)> {
        let mut magic = [0u8; 6];
        self.exact(&mut magic, "header")?;
        if magic != MAGIC {
            return Err(Error::BadMagic);
        }
        let version = self.u16("header")?;
        if version != FORMAT_VERSION {
            return Err(Error::VersionUnsupported(version));
        }
        let mut dim = [0u8; 4];
        self.exact(&mut dim, "header")?;
        let mut count = [0u8; 8];
        self.exact(&mut count, "header")?;
        let dim = u32::from_le_bytes(dim) as usize;
        if dim == 0 {
            return Err(Error::ShapeMismatch("header dimension is zero".into()));
        }
        Ok((dim, u64::from_le_bytes(count)))
    }

    fn finish(mut self) -> Result<()> {
        let mut probe = [0u8; 1];
        match self.inner.read(&mut probe)? {
            0 => Ok(()),
            _ => Err(Error::ShapeMismatch("trailing bytes after last record".into())),
        }
    }
}

/// Reads a video container and builds the gallery, deriving coarse vectors.
pub fn read_videos<R: Read>(r: R) -> Result<Gallery> {
    let mut rd = Reader { inner: r };
    let (dim, count) = rd.header()?;
    let mut videos = Vec::new();
    for _ in 0..count {
        let id = rd.id()?;
        let t = rd.u16("frame count")? as usize;
        let p = rd.u16("patch count")? as usize;
        let frames = rd.f32s(t * dim, "frame rows")?;
        let patches = rd.f32s(t * p * dim, "patch rows")?;
        videos.push(VideoRecord::new(id, dim, t, p, frames, patches)?);
    }
    rd.finish()?;
    Gallery::new(dim, videos)
}

/// Reads a text container. Returns the header dimension and the records.
pub fn read_texts<R: Read>(r: R) -> Result<(usize, Vec<TextRecord>)> {
    let mut rd = Reader { inner: r };
    let (dim, count) = rd.header()?;
    let mut texts = Vec::new();
    let mut seen = HashSet::new();
    for _ in 0..count {
        let id = rd.id()?;
        let feature = rd.f32s(dim, "text feature")?;
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId(id));
        }
        texts.push(TextRecord::new(id, feature)?);
    }
    rd.finish()?;
    Ok((dim, texts))
}

pub fn load_gallery(path: &Path) -> Result<Gallery> {
    read_videos(BufReader::new(File::open(path)?))
}

pub fn load_texts(path: &Path) -> Result<(usize, Vec<TextRecord>)> {
    read_texts(BufReader::new(File::open(path)?))
}

pub fn save_videos(path: &Path, dim: usize, videos: &[VideoRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_videos(&mut w, dim, videos)?;
    w.flush()?;
    Ok(())
}

pub fn save_texts(path: &Path, dim: usize, texts: &[TextRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_texts(&mut w, dim, texts)?;
    w.flush()?;
    Ok(())
}

/// Writes `videos.bin`, `texts.bin` and `manifest.json` into `dir`.
///
/// The manifest's `counts` are filled in from the records.
pub fn write_gallery(
    videos: &[VideoRecord],
    texts: &[TextRecord],
    manifest: &Manifest,
    dir: &Path,
) -> Result<()> {
    let dim = manifest.dim;
    // validate everything before touching the disk
    if let Some(v) = videos.iter().find(|v| v.dim() != dim) {
        return Err(Error::ShapeMismatch(format!(
            "video {:?} has dimension {}, manifest has {dim}",
            v.id(),
            v.dim()
        )));
    }
    if let Some(t) = texts.iter().find(|t| t.dim() != dim) {
        return Err(Error::ShapeMismatch(format!(
            "text {:?} has dimension {}, manifest has {dim}",
            t.id(),
            t.dim()
        )));
    }
    fs::create_dir_all(dir)?;
    save_videos(&dir.join(VIDEOS_FILE), dim, videos)?;
    save_texts(&dir.join(TEXTS_FILE), dim, texts)?;
    let mut manifest = manifest.clone();
    manifest.counts = Some(Counts { videos: videos.len(), texts: texts.len() });
    manifest.save(&dir.join(MANIFEST_FILE))
}

/// Loads and cross-validates the three files written by [`write_gallery`].
pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let gallery = load_gallery(&dir.join(VIDEOS_FILE))?;
    let (text_dim, texts) = load_texts(&dir.join(TEXTS_FILE))?;
    if text_dim != gallery.dim() {
        return Err(Error::ShapeMismatch(format!(
            "texts have dimension {text_dim}, videos {}",
            gallery.dim()
        )));
    }
    let manifest = Manifest::load(&dir.join(MANIFEST_FILE))?;
    manifest.validate(&gallery, &texts)?;
    Ok(Dataset { gallery, texts, manifest })
}
