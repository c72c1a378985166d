//! MOTChallenge CSV rows: `frame,id,bb_left,bb_top,bb_width,bb_height,conf,x,y,z`.
//!
//! Frames are 1-based on disk and 0-based everywhere else; this module is the
//! only place that converts. Boxes are corner-based on disk and center-based
//! in memory. Numbers are written with the shortest representation that
//! parses back to the same `f64`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::state::BoundingBox;
use crate::tracker::TrackHistory;

/// One detector output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    /// 0-based frame index.
    pub frame: u64,
    pub bbox: BoundingBox,
    pub confidence: f64,
}

/// A parsed row before grouping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotRow {
    /// 1-based line number in the source file.
    pub line: usize,
    pub frame: u64,
    pub id: i64,
    pub bbox: BoundingBox,
    pub confidence: f64,
}

/// A skipped input row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowWarning {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MotDetections {
    /// Detections keyed by 0-based frame, ascending.
    pub frames: BTreeMap<u64, Vec<Detection>>,
    pub warnings: Vec<RowWarning>,
}

impl MotDetections {
    pub fn first_frame(&self) -> Option<u64> {
        self.frames.keys().next().copied()
    }

    pub fn last_frame(&self) -> Option<u64> {
        self.frames.keys().next_back().copied()
    }

    pub fn len(&self) -> usize {
        self.frames.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses every data row; rows with non-positive width or height are skipped
/// with a warning, anything malformed is an error.
pub fn parse_rows(path: &Path, text: &str) -> Result<(Vec<MotRow>, Vec<RowWarning>)> {
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    let mut saw_data = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        saw_data = true;
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        let err = |column: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            column,
            message,
        };
        if fields.len() < 7 || fields.len() > 10 {
            return Err(err(
                fields.len().min(10) + 1,
                format!(
                    "expected 7 to 10 comma-separated fields, got {}",
                    fields.len()
                ),
            ));
        }
        let num = |column: usize| -> Result<f64> {
            let s = fields[column - 1];
            let v: f64 = s
                .parse()
                .map_err(|_| err(column, format!("'{s}' is not a number")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(err(column, format!("'{s}' is not finite")))
            }
        };
        let frame = num(1)?;
        if frame.fract() != 0.0 || frame < 1.0 {
            return Err(err(
                1,
                format!("frame must be an integer ≥ 1, got {}", fields[0]),
            ));
        }
        let id = num(2)?;
        if id.fract() != 0.0 {
            return Err(err(2, format!("id must be an integer, got {}", fields[1])));
        }
        let (left, top, w, h) = (num(3)?, num(4)?, num(5)?, num(6)?);
        let confidence = num(7)?;
        for column in 8..=fields.len() {
            num(column)?;
        }
        if w <= 0.0 || h <= 0.0 {
            let message = format!("skipping box with non-positive size {w}x{h}");
            log::warn!("{}:{line}: {message}", path.display());
            warnings.push(RowWarning { line, message });
            continue;
        }
        let bbox = BoundingBox::from_corner(left, top, w, h).map_err(|e| err(3, e.to_string()))?;
        rows.push(MotRow {
            line,
            frame: frame as u64 - 1,
            id: id as i64,
            bbox,
            confidence,
        });
    }
    if !saw_data {
        return Err(Error::EmptyInput {
            path: path.to_path_buf(),
        });
    }
    Ok((rows, warnings))
}

/// Reads a detection file, grouping rows by frame. Ids are ignored.
pub fn read_mot_detections(path: impl AsRef<Path>) -> Result<MotDetections> {
    let path = path.as_ref();
    let (rows, warnings) = parse_rows(path, &read_text(path)?)?;
    let mut frames: BTreeMap<u64, Vec<Detection>> = BTreeMap::new();
    for row in rows {
        frames.entry(row.frame).or_default().push(Detection {
            frame: row.frame,
            bbox: row.bbox,
            confidence: row.confidence,
        });
    }
    Ok(MotDetections { frames, warnings })
}

/// Reads a results file back into per-id histories ordered by id then frame.
pub fn read_mot_results(path: impl AsRef<Path>) -> Result<Vec<TrackHistory>> {
    let path = path.as_ref();
    let (rows, _) = parse_rows(path, &read_text(path)?)?;
    let mut by_id: BTreeMap<i64, Vec<(u64, BoundingBox)>> = BTreeMap::new();
    for row in rows {
        if row.id < 1 {
            return Err(Error::Parse {
                path: PathBuf::from(path),
                line: row.line,
                column: 2,
                message: format!("result rows need a positive id, got {}", row.id),
            });
        }
        by_id.entry(row.id).or_default().push((row.frame, row.bbox));
    }
    Ok(by_id
        .into_iter()
        .map(|(id, mut boxes)| {
            boxes.sort_by_key(|(f, _)| *f);
            TrackHistory {
                id: id as u64,
                boxes,
            }
        })
        .collect())
}

fn push_row(out: &mut String, frame: u64, id: i64, bbox: &BoundingBox, conf: f64) {
    let _ = writeln!(
        out,
        "{},{},{},{},{},{},{},-1,-1,-1",
        frame + 1,
        id,
        bbox.left(),
        bbox.top(),
        bbox.w,
        bbox.h,
        conf
    );
}

/// Formats histories as result rows sorted by (frame, id), confidence 1.
pub fn format_mot_results(histories: &[TrackHistory]) -> String {
    let mut rows: Vec<(u64, u64, &BoundingBox)> = histories
        .iter()
        .flat_map(|h| h.boxes.iter().map(move |(f, b)| (*f, h.id, b)))
        .collect();
    rows.sort_by_key(|&(f, id, _)| (f, id));
    let mut out = String::new();
    for (frame, id, bbox) in rows {
        push_row(&mut out, frame, id as i64, bbox, 1.0);
    }
    out
}

pub fn write_mot_results(path: impl AsRef<Path>, histories: &[TrackHistory]) -> Result<()> {
    write_text(path.as_ref(), &format_mot_results(histories))
}

/// Detection rows (id −1) in frame order, keeping the input order within a frame.
pub fn format_mot_detections<'a>(detections: impl IntoIterator<Item = &'a Detection>) -> String {
    let mut rows: Vec<&Detection> = detections.into_iter().collect();
    rows.sort_by_key(|d| d.frame);
    let mut out = String::new();
    for d in rows {
        push_row(&mut out, d.frame, -1, &d.bbox, d.confidence);
    }
    out
}

pub fn write_mot_detections<'a>(
    path: impl AsRef<Path>,
    detections: impl IntoIterator<Item = &'a Detection>,
) -> Result<()> {
    write_text(path.as_ref(), &format_mot_detections(detections))
}
