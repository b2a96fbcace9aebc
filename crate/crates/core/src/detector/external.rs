//! Client for an external second stage speaking newline-delimited JSON over a
//! byte stream.
//!
//! Request:  `{"frame": int, "proposals": [[l,t,w,h,objectness], ...]}`
//! Response: `{"detections": [[l,t,w,h,conf], ...]}`
//!
//! One response per request, order-preserving. A refine response must carry
//! exactly one detection per proposal. Timeouts and malformed responses abort
//! the run with a protocol error.

use std::io::{BufRead, BufReader, Read, Write};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{DetectorError, Proposal, TwoStageDetector};
use crate::geometry::{BBox, ScoredDetection, PEDESTRIAN_CLASS};

#[derive(Serialize)]
struct Request {
    frame: usize,
    proposals: Vec<[f64; 5]>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Response {
    detections: Vec<[f64; 5]>,
}

pub struct ExternalDetector {
    writer: Mutex<Box<dyn Write + Send>>,
    lines: Mutex<Receiver<std::io::Result<String>>>,
    timeout: Duration,
}

impl ExternalDetector {
    /// Wraps a byte stream pair. A background thread reads response lines so
    /// requests can time out instead of blocking forever.
    pub fn new(
        writer: impl Write + Send + 'static,
        reader: impl Read + Send + 'static,
        timeout: Duration,
    ) -> Self {
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            let buf = BufReader::new(reader);
            for line in buf.lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        ExternalDetector {
            writer: Mutex::new(Box::new(writer)),
            lines: Mutex::new(rx),
            timeout,
        }
    }

    fn roundtrip(&self, frame: usize, proposals: &[Proposal]) -> Result<Response, DetectorError> {
        let request = Request {
            frame,
            proposals: proposals
                .iter()
                .map(|p| {
                    [
                        p.bbox.left,
                        p.bbox.top,
                        p.bbox.width,
                        p.bbox.height,
                        p.objectness,
                    ]
                })
                .collect(),
        };
        {
            let mut writer = self.writer.lock().expect("writer lock");
            serde_json::to_writer(&mut *writer, &request)
                .map_err(|e| DetectorError::Protocol(format!("failed to encode request: {e}")))?;
            writer.write_all(b"\n")?;
            writer.flush()?;
        }

        let line = match self
            .lines
            .lock()
            .expect("reader lock")
            .recv_timeout(self.timeout)
        {
            Ok(Ok(line)) => line,
            Ok(Err(e)) => return Err(DetectorError::Io(e)),
            Err(RecvTimeoutError::Timeout) => return Err(DetectorError::Timeout(self.timeout)),
            Err(RecvTimeoutError::Disconnected) => {
                return Err(DetectorError::Protocol(
                    "stream closed before response".into(),
                ))
            }
        };
        serde_json::from_str(&line)
            .map_err(|e| DetectorError::Protocol(format!("malformed response: {e}")))
    }
}

impl TwoStageDetector for ExternalDetector {
    /// An empty proposal list asks the remote end to run its own proposal
    /// stage for the frame.
    fn propose(&self, frame: usize) -> Result<Vec<Proposal>, DetectorError> {
        let response = self.roundtrip(frame, &[])?;
        Ok(response
            .detections
            .into_iter()
            .map(|[l, t, w, h, conf]| Proposal::new(BBox::new(l, t, w, h), conf.clamp(0.0, 1.0)))
            .collect())
    }

    fn refine(
        &self,
        frame: usize,
        proposals: &[Proposal],
    ) -> Result<Vec<ScoredDetection>, DetectorError> {
        if proposals.is_empty() {
            return Ok(Vec::new());
        }
        let response = self.roundtrip(frame, proposals)?;
        if response.detections.len() != proposals.len() {
            return Err(DetectorError::Protocol(format!(
                "expected {} detections, got {}",
                proposals.len(),
                response.detections.len()
            )));
        }
        Ok(response
            .detections
            .into_iter()
            .map(|[l, t, w, h, conf]| ScoredDetection {
                bbox: BBox::new(l, t, w, h),
                confidence: conf,
                class_id: PEDESTRIAN_CLASS,
                track_id: None,
            })
            .collect())
    }
}
