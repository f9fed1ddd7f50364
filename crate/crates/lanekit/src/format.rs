//! The canonical frame file: UTF-8 JSON, one frame per line.
//!
//! ```text
//! {"version":1,"frame_id":"000000",
//!  "camera":{"fx":..,"fy":..,"cx":..,"cy":..,"height":..,"pitch":..,"image_h":..,"image_w":..},
//!  "lanes":[{"points":[[x,y,z],..],"visibility":[1,1,0,..],"score":0.9,
//!            "curve":{..},"uncertainty":[[w,h],..]}]}
//! ```
//!
//! `score`, `curve` and `uncertainty` are optional. Visibility values are
//! numbers: labels in ground-truth files, probabilities in prediction files.
//! A point counts as visible for evaluation when its value is at least 0.5.
//! Floats are written in shortest round-trip form, so reading a written file
//! reproduces every coordinate bit for bit.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use lanekit_core::{CameraModel, Curve2D, Lane3D, Point3};
use serde::{Deserialize, Serialize};
use tempfile::NamedTempFile;

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaneRecord {
    pub points: Vec<[f64; 3]>,
    pub visibility: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve: Option<Curve2D>,
    /// Per-segment `[lambda_w, lambda_h]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uncertainty: Option<Vec<[f64; 2]>>,
}

impl LaneRecord {
    pub fn from_lane(lane: &Lane3D) -> Self {
        Self {
            points: lane.points().iter().map(|p| [p.x, p.y, p.z]).collect(),
            visibility: lane.visibility().iter().map(|v| if *v { 1.0 } else { 0.0 }).collect(),
            score: lane.score(),
            curve: None,
            uncertainty: None,
        }
    }

    pub fn points3(&self) -> Vec<Point3> {
        self.points.iter().map(|p| Point3::from(*p)).collect()
    }

    pub fn visible_flags(&self) -> Vec<bool> {
        self.visibility.iter().map(|v| *v >= 0.5).collect()
    }

    pub fn to_lane(&self) -> lanekit_core::Result<Lane3D> {
        Lane3D::new(self.points3(), self.visible_flags(), self.score)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub version: u64,
    pub frame_id: String,
    pub camera: CameraModel,
    pub lanes: Vec<LaneRecord>,
}

impl FrameRecord {
    pub fn new(frame_id: impl Into<String>, camera: CameraModel, lanes: Vec<LaneRecord>) -> Self {
        Self {
            version: SCHEMA_VERSION,
            frame_id: frame_id.into(),
            camera,
            lanes,
        }
    }

    pub fn lanes3d(&self) -> lanekit_core::Result<Vec<Lane3D>> {
        self.lanes.iter().map(LaneRecord::to_lane).collect()
    }
}

#[derive(Deserialize)]
struct VersionProbe {
    version: Option<u64>,
}

/// Parses one line. `path` and `line` only label errors.
pub fn parse_record(text: &str, path: &Path, line: usize) -> Result<FrameRecord> {
    let parse_error = |field: String, message: String| Error::Parse {
        path: path.to_owned(),
        line,
        field,
        message,
    };
    // Check the version before the structure so that a future layout is
    // reported as such.
    if let Ok(VersionProbe { version: Some(found) }) = serde_json::from_str::<VersionProbe>(text) {
        if found != SCHEMA_VERSION {
            return Err(Error::SchemaVersionMismatch {
                path: path.to_owned(),
                line,
                found,
                expected: SCHEMA_VERSION,
            });
        }
    }
    let mut de = serde_json::Deserializer::from_str(text);
    let record: FrameRecord = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let field = e.path().to_string();
        parse_error(field, e.into_inner().to_string())
    })?;
    de.end().map_err(|e| parse_error(".".into(), e.to_string()))?;
    for (i, lane) in record.lanes.iter().enumerate() {
        if lane.visibility.len() != lane.points.len() {
            return Err(parse_error(
                format!("lanes[{i}].visibility"),
                format!("{} values for {} points", lane.visibility.len(), lane.points.len()),
            ));
        }
    }
    Ok(record)
}

/// Streams records from a frame file, one line at a time.
pub struct FrameReader<R> {
    path: PathBuf,
    lines: std::io::Lines<R>,
    line: usize,
    seen: HashSet<String>,
}

impl FrameReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::new(BufReader::new(file), path))
    }
}

impl<R: BufRead> FrameReader<R> {
    pub fn new(reader: R, path: impl Into<PathBuf>) -> Self {
        Self {
            path: path.into(),
            lines: reader.lines(),
            line: 0,
            seen: HashSet::new(),
        }
    }
}

impl<R: BufRead> Iterator for FrameReader<R> {
    type Item = Result<FrameRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let text = match self.lines.next()? {
                Ok(t) => t,
                Err(e) => return Some(Err(Error::io(&self.path, e))),
            };
            self.line += 1;
            if text.trim().is_empty() {
                continue;
            }
            let record = parse_record(&text, &self.path, self.line);
            return Some(record.and_then(|r| {
                if self.seen.insert(r.frame_id.clone()) {
                    Ok(r)
                } else {
                    Err(Error::DuplicateFrame {
                        path: self.path.clone(),
                        line: self.line,
                        frame_id: r.frame_id,
                    })
                }
            }));
        }
    }
}

pub fn read_frames(path: impl AsRef<Path>) -> Result<Vec<FrameRecord>> {
    FrameReader::open(path)?.collect()
}

/// Writes to a temporary file beside the destination; the destination only
/// appears, complete, on [`AtomicFile::commit`]. Dropping without committing
/// leaves nothing behind.
pub struct AtomicFile {
    path: PathBuf,
    out: BufWriter<NamedTempFile>,
}

impl AtomicFile {
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_owned();
        let dir = match path.parent() {
            Some(d) if !d.as_os_str().is_empty() => d.to_owned(),
            _ => PathBuf::from("."),
        };
        let tmp = NamedTempFile::new_in(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Self {
            path,
            out: BufWriter::new(tmp),
        })
    }

    pub fn writer(&mut self) -> &mut impl Write {
        &mut self.out
    }

    pub fn commit(self) -> Result<()> {
        let path = self.path;
        let tmp = self.out.into_inner().map_err(|e| Error::io(&path, e.into_error()))?;
        tmp.as_file().sync_all().map_err(|e| Error::io(&path, e))?;
        tmp.persist(&path).map_err(|e| Error::io(&path, e.error))?;
        Ok(())
    }
}

pub struct FrameWriter {
    file: AtomicFile,
    seen: HashSet<String>,
}

impl FrameWriter {
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        Ok(Self {
            file: AtomicFile::create(path)?,
            seen: HashSet::new(),
        })
    }

    pub fn write(&mut self, record: &FrameRecord) -> Result<()> {
        if !self.seen.insert(record.frame_id.clone()) {
            return Err(Error::DuplicateFrame {
                path: self.file.path.clone(),
                line: self.seen.len() + 1,
                frame_id: record.frame_id.clone(),
            });
        }
        let path = self.file.path.clone();
        let w = self.file.writer();
        serde_json::to_writer(&mut *w, record).map_err(|e| Error::io(&path, e.into()))?;
        w.write_all(b"\n").map_err(|e| Error::io(&path, e))
    }

    pub fn finish(self) -> Result<()> {
        self.file.commit()
    }
}

pub fn write_frames<'a>(path: impl AsRef<Path>, records: impl IntoIterator<Item = &'a FrameRecord>) -> Result<()> {
    let mut w = FrameWriter::create(path)?;
    for r in records {
        w.write(r)?;
    }
    w.finish()
}
