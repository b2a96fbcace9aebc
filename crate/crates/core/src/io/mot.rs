//! MOT CSV reading and writing.
//!
//! Row layout: `frame,id,left,top,width,height,conf,class,visibility` with
//! 1-based integer frame and id. Results are written as
//! `frame,id,left,top,width,height,conf,-1,-1,-1`. Trailing fields beyond the
//! first seven are optional on read.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;

use super::FormatError;
use crate::geometry::{BBox, ScoredDetection, PEDESTRIAN_CLASS};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotRecord {
    pub frame: u32,
    /// Track identity; -1 for raw detections.
    pub id: i64,
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
    pub confidence: f64,
    pub class_id: i32,
    pub visibility: f64,
}

impl MotRecord {
    pub fn bbox(&self) -> BBox {
        BBox::new(self.left, self.top, self.width, self.height)
    }
}

/// Parses a MOT CSV file into records grouped by frame, frames ascending.
pub fn parse_mot(path: &Path) -> Result<BTreeMap<u32, Vec<MotRecord>>, FormatError> {
    let display = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|source| FormatError::Unreadable {
        path: display.clone(),
        source,
    })?;
    parse_mot_reader(std::io::BufReader::new(file), &display)
}

pub fn parse_mot_reader(
    reader: impl BufRead,
    path: &str,
) -> Result<BTreeMap<u32, Vec<MotRecord>>, FormatError> {
    let mut frames: BTreeMap<u32, Vec<MotRecord>> = BTreeMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| FormatError::Unreadable {
            path: path.to_string(),
            source,
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let record = parse_line(trimmed).map_err(|reason| FormatError::Malformed {
            path: path.to_string(),
            line: line_no,
            reason,
        })?;
        frames.entry(record.frame).or_default().push(record);
    }
    Ok(frames)
}

fn parse_line(line: &str) -> Result<MotRecord, String> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() < 7 {
        return Err(format!(
            "expected at least 7 comma-separated fields, found {}",
            fields.len()
        ));
    }
    let num = |idx: usize, name: &str| -> Result<f64, String> {
        fields[idx]
            .parse::<f64>()
            .map_err(|_| format!("non-numeric {name} field '{}'", fields[idx]))
    };

    let frame_raw = num(0, "frame")?;
    if frame_raw.fract() != 0.0 || frame_raw < 1.0 {
        return Err(format!(
            "frame must be a 1-based integer, found '{}'",
            fields[0]
        ));
    }
    let id_raw = num(1, "id")?;
    if id_raw.fract() != 0.0 {
        return Err(format!("id must be an integer, found '{}'", fields[1]));
    }
    let width = num(4, "width")?;
    let height = num(5, "height")?;
    if width <= 0.0 || height <= 0.0 {
        return Err(format!("box size must be positive, found {width}x{height}"));
    }

    Ok(MotRecord {
        frame: frame_raw as u32,
        id: id_raw as i64,
        left: num(2, "left")?,
        top: num(3, "top")?,
        width,
        height,
        confidence: num(6, "conf")?,
        class_id: if fields.len() > 7 {
            num(7, "class")? as i32
        } else {
            -1
        },
        visibility: if fields.len() > 8 {
            num(8, "visibility")?
        } else {
            -1.0
        },
    })
}

/// Writes tracker output rows, frames ascending, `frame,id,l,t,w,h,conf,-1,-1,-1`.
/// Index `i` of the slice is frame `i + 1`. Detections without an id are
/// written with id -1.
pub fn write_results(path: &Path, frames: &[Vec<ScoredDetection>]) -> Result<(), FormatError> {
    let mut out = String::new();
    for (i, dets) in frames.iter().enumerate() {
        for d in dets {
            writeln!(
                out,
                "{},{},{},{},{},{},{},-1,-1,-1",
                i + 1,
                d.track_id.unwrap_or(-1),
                d.bbox.left,
                d.bbox.top,
                d.bbox.width,
                d.bbox.height,
                d.confidence
            )
            .expect("string write");
        }
    }
    std::fs::write(path, out).map_err(|source| FormatError::Unwritable {
        path: path.display().to_string(),
        source,
    })
}

/// Writes ground truth rows `frame,id,l,t,w,h,1,1,visibility` for a scripted
/// world, frames ascending.
pub fn write_gt(path: &Path, frames: &[Vec<(i64, BBox, f64)>]) -> Result<(), FormatError> {
    let mut out = String::new();
    for (i, rows) in frames.iter().enumerate() {
        for (id, bbox, visibility) in rows {
            writeln!(
                out,
                "{},{},{},{},{},{},1,1,{}",
                i + 1,
                id,
                bbox.left,
                bbox.top,
                bbox.width,
                bbox.height,
                visibility
            )
            .expect("string write");
        }
    }
    std::fs::write(path, out).map_err(|source| FormatError::Unwritable {
        path: path.display().to_string(),
        source,
    })
}

/// Densifies parsed records into per-frame detection lists covering frames
/// `1..=max_frame` (index 0 holds frame 1).
pub fn detections_by_frame(records: &BTreeMap<u32, Vec<MotRecord>>) -> Vec<Vec<ScoredDetection>> {
    let max_frame = records.keys().next_back().copied().unwrap_or(0);
    let mut frames = vec![Vec::new(); max_frame as usize];
    for (&frame, rows) in records {
        frames[frame as usize - 1] = rows
            .iter()
            .map(|r| ScoredDetection {
                bbox: r.bbox(),
                confidence: r.confidence,
                class_id: if r.class_id >= 0 {
                    r.class_id
                } else {
                    PEDESTRIAN_CLASS
                },
                track_id: if r.id >= 0 { Some(r.id) } else { None },
            })
            .collect();
    }
    frames
}
