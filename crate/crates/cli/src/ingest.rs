//! Reading external features: JSON lines or an existing binary container.
//!
//! Videos, one object per line:
//! `{"id": "v1", "frames": [[..D..], ..T..], "patches": [[[..D..], ..P..], ..T..]}`
//!
//! Texts, one object per line: `{"id": "t1", "feature": [..D..]}` with an
//! optional `"caption"`.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use eercf_core::store::{load_gallery, load_texts};
use eercf_core::{Error, Gallery, TextRecord, VideoRecord};
use serde::Deserialize;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct VideoLine {
    id: String,
    frames: Vec<Vec<f32>>,
    patches: Vec<Vec<Vec<f32>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TextLine {
    id: String,
    feature: Vec<f32>,
    #[serde(default)]
    caption: Option<String>,
}

fn is_json_lines(path: &Path) -> bool {
    matches!(path.extension().and_then(|e| e.to_str()), Some("jsonl" | "json"))
}

fn at_line(path: &Path, line: usize, err: Error) -> Error {
    let msg = format!("{}:{line}: {err}", path.display());
    match err {
        Error::Io(e) => Error::Io(std::io::Error::new(e.kind(), msg)),
        _ => Error::InvalidConfig(msg),
    }
}

/// Non-empty lines of a JSON-lines file, parsed as `T`, with 1-based line numbers.
fn read_lines<T: for<'de> Deserialize<'de>>(path: &Path) -> eercf_core::Result<Vec<(usize, T)>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| at_line(path, i + 1, e.into()))?;
        out.push((i + 1, item));
    }
    Ok(out)
}

fn flatten_rows(rows: &[Vec<f32>], dim: usize, what: &str) -> eercf_core::Result<Vec<f32>> {
    if let Some(r) = rows.iter().find(|r| r.len() != dim) {
        return Err(Error::ShapeMismatch(format!("{what} row has {} values, expected {dim}", r.len())));
    }
    Ok(rows.concat())
}

fn video_from_line(v: VideoLine) -> eercf_core::Result<VideoRecord> {
    let dim = v.frames.first().map_or(0, Vec::len);
    let t = v.frames.len();
    if v.patches.len() != t {
        return Err(Error::ShapeMismatch(format!(
            "video {:?}: {t} frames but patches for {} frames",
            v.id,
            v.patches.len()
        )));
    }
    let p = v.patches.first().map_or(0, Vec::len);
    if let Some(f) = v.patches.iter().find(|f| f.len() != p) {
        return Err(Error::ShapeMismatch(format!(
            "video {:?}: frames carry {p} and {} patches",
            v.id,
            f.len()
        )));
    }
    let frames = flatten_rows(&v.frames, dim, "frame")?;
    let patches = flatten_rows(&v.patches.concat(), dim, "patch")?;
    VideoRecord::new(v.id, dim, t, p, frames, patches)
}

pub fn read_videos(path: &Path) -> eercf_core::Result<Gallery> {
    if !is_json_lines(path) {
        return load_gallery(path);
    }
    let lines: Vec<(usize, VideoLine)> = read_lines(path)?;
    let mut videos = Vec::with_capacity(lines.len());
    for (n, line) in lines {
        videos.push(video_from_line(line).map_err(|e| at_line(path, n, e))?);
    }
    let dim = videos.first().map(VideoRecord::dim).ok_or(Error::EmptyGallery)?;
    Gallery::new(dim, videos)
}

/// Texts and their shared dimension.
pub fn read_texts(path: &Path) -> eercf_core::Result<(usize, Vec<TextRecord>)> {
    if !is_json_lines(path) {
        return load_texts(path);
    }
    let lines: Vec<(usize, TextLine)> = read_lines(path)?;
    let dim = lines.first().map_or(0, |(_, t)| t.feature.len());
    let mut seen = std::collections::HashSet::new();
    let mut texts = Vec::with_capacity(lines.len());
    for (n, line) in lines {
        if line.feature.len() != dim {
            let err = Error::ShapeMismatch(format!("text has {} values, expected {dim}", line.feature.len()));
            return Err(at_line(path, n, err));
        }
        if !seen.insert(line.id.clone()) {
            return Err(at_line(path, n, Error::DuplicateId(line.id)));
        }
        let mut text = TextRecord::new(line.id, line.feature).map_err(|e| at_line(path, n, e))?;
        if let Some(c) = line.caption {
            text = text.with_caption(c);
        }
        texts.push(text);
    }
    Ok((dim, texts))
}

#[cfg(test)]
mod tests {
    use std::io::Write;

    use super::*;

    fn file(name: &str, body: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(name);
        File::create(&path).unwrap().write_all(body.as_bytes()).unwrap();
        (dir, path)
    }

    #[test]
    fn parses_nested_video_rows() {
        let (_d, path) = file(
            "v.jsonl",
            r#"{"id": "a", "frames": [[1, 0], [0, 1]], "patches": [[[1, 0]], [[0, 2]]]}

{"id": "b", "frames": [[3, 4]], "patches": [[[1, 1]]]}
"#,
        );
        let g = read_videos(&path).unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g.videos()[0].patches(), &[1.0, 0.0, 0.0, 2.0]);
        assert_eq!(g.videos()[1].coarse(), &[0.6, 0.8]);
    }

    #[test]
    fn ragged_rows_report_the_line() {
        let (_d, path) = file(
            "v.jsonl",
            "{\"id\": \"a\", \"frames\": [[1, 0]], \"patches\": [[[1, 0]]]}\n{\"id\": \"b\", \"frames\": [[1, 0, 0]], \"patches\": [[[1, 0]]]}\n",
        );
        let err = read_videos(&path).unwrap_err().to_string();
        assert!(err.contains(":2:"), "{err}");
    }

    #[test]
    fn texts_keep_captions_and_reject_duplicates() {
        let (_d, path) = file("t.jsonl", "{\"id\": \"x\", \"feature\": [0, 2], \"caption\": \"a dog\"}\n");
        let (dim, texts) = read_texts(&path).unwrap();
        assert_eq!(dim, 2);
        assert_eq!(texts[0].caption(), Some("a dog"));
        assert_eq!(texts[0].feature(), &[0.0, 1.0]);

        let (_d, path) = file("t.jsonl", "{\"id\": \"x\", \"feature\": [1]}\n{\"id\": \"x\", \"feature\": [2]}\n");
        assert!(read_texts(&path).is_err());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let (_d, path) = file("t.jsonl", "{\"id\": \"x\", \"feature\": [1], \"extra\": 1}\n");
        assert!(read_texts(&path).is_err());
    }
}
