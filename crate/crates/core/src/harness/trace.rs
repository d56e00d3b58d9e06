//! Line-delimited JSON trace files.
//!
//! Line 1 is a [`TraceHeader`]; every following line is one
//! [`FrameObservation`] with 1-based, contiguous frame indices:
//!
//! ```text
//! {"format":"aaa-trace","version":1,"sequence_id":"seq","n_experts":2,"feature_dim":2,
//!  "template":[1.0,0.0],"initial_box":[10.0,10.0,4.0,4.0]}
//! {"frame":1,"boxes":[[10,10,4,4],[10,10,4,4]],"features":[[1,0],[1,0]],"gt":[10,10,4,4]}
//! ```
//!
//! Experts must emit a box on every frame; producers fill tracker dropouts
//! (e.g. by repeating the last box) before writing.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::FrameObservation;
use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, FeatureVector};

pub const TRACE_FORMAT: &str = "aaa-trace";
pub const TRACE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub format: String,
    pub version: u32,
    pub sequence_id: String,
    pub n_experts: usize,
    pub feature_dim: usize,
    pub template: FeatureVector,
    /// `f_0`, the target location given at the first frame.
    pub initial_box: BoundingBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames: Option<usize>,
}

impl TraceHeader {
    pub fn new(
        sequence_id: impl Into<String>,
        n_experts: usize,
        template: FeatureVector,
        initial_box: BoundingBox,
    ) -> Self {
        Self {
            format: TRACE_FORMAT.into(),
            version: TRACE_VERSION,
            sequence_id: sequence_id.into(),
            n_experts,
            feature_dim: template.dim(),
            template,
            initial_box,
            frames: None,
        }
    }

    fn validate(&self) -> Result<()> {
        let fail = |message: String| Err(Error::Trace { line: 1, message });
        if self.format != TRACE_FORMAT {
            return fail(format!("unknown format {:?}", self.format));
        }
        if self.version != TRACE_VERSION {
            return fail(format!("unsupported version {}", self.version));
        }
        if self.n_experts < 2 {
            return fail(format!("need at least two experts, header says {}", self.n_experts));
        }
        if self.template.dim() != self.feature_dim {
            return fail(format!(
                "template has dimension {}, header says {}",
                self.template.dim(),
                self.feature_dim
            ));
        }
        Ok(())
    }
}

/// A fully loaded trace.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub header: TraceHeader,
    pub frames: Vec<FrameObservation>,
}

impl Trace {
    pub fn has_ground_truth(&self) -> bool {
        !self.frames.is_empty() && self.frames.iter().all(|f| f.gt.is_some())
    }

    pub fn ground_truth(&self) -> Option<Vec<BoundingBox>> {
        self.frames.iter().map(|f| f.gt).collect()
    }

    /// The first `frames` frames.
    pub fn truncated(&self, frames: usize) -> Trace {
        let mut header = self.header.clone();
        header.frames = None;
        Trace {
            header,
            frames: self.frames[..frames.min(self.frames.len())].to_vec(),
        }
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<()> {
        let mut w = BufWriter::new(w);
        serde_json::to_writer(&mut w, &self.header)?;
        w.write_all(b"\n")?;
        for f in &self.frames {
            serde_json::to_writer(&mut w, f)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        Ok(buf)
    }
}

/// Streaming, validating reader over trace records.
pub struct TraceReader<R> {
    lines: std::io::Lines<R>,
    header: TraceHeader,
    line: usize,
    next_frame: usize,
    failed: bool,
}

impl<R: BufRead> TraceReader<R> {
    pub fn new(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let first = lines.next().ok_or(Error::Trace {
            line: 1,
            message: "missing header".into(),
        })??;
        let header: TraceHeader = serde_json::from_str(&first).map_err(|e| Error::Trace {
            line: 1,
            message: format!("bad header: {e}"),
        })?;
        header.validate()?;
        Ok(Self {
            lines,
            header,
            line: 1,
            next_frame: 1,
            failed: false,
        })
    }

    pub fn header(&self) -> &TraceHeader {
        &self.header
    }

    fn parse(&self, text: &str) -> Result<FrameObservation> {
        let line = self.line;
        let fail = |message: String| Error::Trace { line, message };
        let obs: FrameObservation =
            serde_json::from_str(text).map_err(|e| fail(format!("bad record: {e}")))?;
        if obs.frame != self.next_frame {
            return Err(fail(format!(
                "non-contiguous at line {line}: expected frame {}, found {}",
                self.next_frame, obs.frame
            )));
        }
        let n = self.header.n_experts;
        if obs.boxes.len() != n || obs.features.len() != n {
            return Err(fail(format!(
                "frame {} has {} boxes and {} features, header says {n} experts",
                obs.frame,
                obs.boxes.len(),
                obs.features.len()
            )));
        }
        if let Some(f) = obs.features.iter().find(|f| f.dim() != self.header.feature_dim) {
            return Err(fail(format!(
                "frame {} has a feature of dimension {}, header says {}",
                obs.frame,
                f.dim(),
                self.header.feature_dim
            )));
        }
        Ok(obs)
    }
}

impl<R: BufRead> Iterator for TraceReader<R> {
    type Item = Result<FrameObservation>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        loop {
            let text = match self.lines.next()? {
                Ok(t) => t,
                Err(e) => {
                    self.failed = true;
                    return Some(Err(e.into()));
                }
            };
            self.line += 1;
            if text.trim().is_empty() {
                continue;
            }
            let res = self.parse(&text);
            match &res {
                Ok(_) => self.next_frame += 1,
                Err(_) => self.failed = true,
            }
            return Some(res);
        }
    }
}

/// Reads and validates a whole trace; fails on the first malformed record.
pub fn read_trace<R: BufRead>(reader: R) -> Result<Trace> {
    let mut r = TraceReader::new(reader)?;
    let mut frames = Vec::new();
    for obs in &mut r {
        frames.push(obs?);
    }
    let header = r.header.clone();
    if frames.is_empty() {
        return Err(Error::Trace {
            line: r.line + 1,
            message: "trace has no frames".into(),
        });
    }
    if let Some(expected) = header.frames {
        if expected != frames.len() {
            return Err(Error::Trace {
                line: r.line + 1,
                message: format!("missing frames: header says {expected}, found {}", frames.len()),
            });
        }
    }
    Ok(Trace { header, frames })
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<Trace> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_trace(BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = r#"{"format":"aaa-trace","version":1,"sequence_id":"s","n_experts":2,"feature_dim":2,"template":[1.0,0.0],"initial_box":[0,0,4,4]}"#;

    fn frame(k: usize) -> String {
        format!(r#"{{"frame":{k},"boxes":[[0,0,4,4],[1,0,4,4]],"features":[[1,0],[0,1]],"gt":[0,0,4,4]}}"#)
    }

    fn parse(lines: &[String]) -> Result<Trace> {
        read_trace(lines.join("\n").as_bytes())
    }

    #[test]
    fn well_formed() {
        let t = parse(&[HEADER.into(), frame(1), frame(2), frame(3)]).unwrap();
        assert_eq!(t.frames.len(), 3);
        assert_eq!(t.header.n_experts, 2);
        assert!(t.has_ground_truth());
        let again = read_trace(t.to_bytes().unwrap().as_slice()).unwrap();
        assert_eq!(again, t);
    }

    #[test]
    fn non_contiguous_reports_line() {
        let err = parse(&[HEADER.into(), frame(1), frame(2), frame(4)]).unwrap_err();
        match err {
            Error::Trace { line, message } => {
                assert_eq!(line, 4);
                assert!(message.contains("non-contiguous at line 4"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn degenerate_box_rejected() {
        let bad = r#"{"frame":2,"boxes":[[0,0,0,4],[1,0,4,4]],"features":[[1,0],[0,1]]}"#;
        let err = parse(&[HEADER.into(), frame(1), bad.into()]).unwrap_err();
        match err {
            Error::Trace { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("degenerate"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn other_rejections() {
        let zero = r#"{"frame":1,"boxes":[[0,0,4,4],[1,0,4,4]],"features":[[0,0],[0,1]]}"#;
        assert!(parse(&[HEADER.into(), zero.into()]).is_err());
        let three = r#"{"frame":1,"boxes":[[0,0,4,4],[1,0,4,4],[1,0,4,4]],"features":[[1,0],[0,1],[0,1]]}"#;
        assert!(parse(&[HEADER.into(), three.into()]).is_err());
        let dim = r#"{"frame":1,"boxes":[[0,0,4,4],[1,0,4,4]],"features":[[1,0,0],[0,1,0]]}"#;
        assert!(parse(&[HEADER.into(), dim.into()]).is_err());
        let with_count = HEADER.replace("}", r#","frames":3}"#);
        let err = parse(&[with_count, frame(1), frame(2)]).unwrap_err();
        assert!(err.to_string().contains("missing frames"), "{err}");
        assert!(parse(&[HEADER.into()]).is_err());
        assert!(read_trace("".as_bytes()).is_err());
        let late_start = parse(&[HEADER.into(), frame(2)]).unwrap_err();
        assert!(late_start.to_string().contains("non-contiguous"));
    }
}
