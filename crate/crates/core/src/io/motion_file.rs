//! Line-delimited JSON motion files.
//!
//! Each non-blank line holds one clip:
//!
//! ```json
//! {"fps":30.0,"dataset":"AMASS","parts_present":[true,...],"rotation_source":"measured","frames":[[...669 floats...],...]}
//! ```
//!
//! Floats are written in shortest round-trip form, so save followed by load
//! reproduces every finite value bit for bit. Keypoint files use the same
//! framing with a `positions` field of `F × 52 × 3` world coordinates.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::repr::{KeypointFrame, MotionSequence, RotationSource, UnifiedFrame, FRAME_DIM, NUM_JOINTS, NUM_PARTS};

#[derive(Serialize, Deserialize)]
struct MotionRecord {
    fps: f64,
    dataset: String,
    parts_present: [bool; NUM_PARTS],
    #[serde(default = "measured")]
    rotation_source: RotationSource,
    frames: Vec<Vec<f64>>,
}

fn measured() -> RotationSource {
    RotationSource::Measured
}

/// One clip of world-space keypoints.
#[derive(Clone, Debug, PartialEq)]
pub struct KeypointClip {
    pub fps: f64,
    pub dataset: Option<String>,
    pub positions: Vec<KeypointFrame>,
}

#[derive(Serialize, Deserialize)]
struct KeypointRecord {
    fps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dataset: Option<String>,
    positions: Vec<Vec<[f64; 3]>>,
}

fn records<'a>(text: &'a str) -> impl Iterator<Item = (usize, &'a str)> + 'a {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn parse_error(line: usize, e: impl std::fmt::Display) -> Error {
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

pub fn parse_motions(text: &str) -> Result<Vec<MotionSequence>> {
    let mut out = Vec::new();
    for (line, body) in records(text) {
        let rec: MotionRecord = serde_json::from_str(body).map_err(|e| parse_error(line, e))?;
        let mut frames = Vec::with_capacity(rec.frames.len());
        for (frame, row) in rec.frames.iter().enumerate() {
            if row.len() != FRAME_DIM {
                return Err(Error::RowWidth {
                    line,
                    frame,
                    width: row.len(),
                });
            }
            frames.push(UnifiedFrame::unpack(row)?);
        }
        let mut seq =
            MotionSequence::new(frames, rec.fps, rec.parts_present, rec.dataset).map_err(|e| parse_error(line, e))?;
        seq.rotation_source = rec.rotation_source;
        out.push(seq);
    }
    Ok(out)
}

fn check_finite(values: impl IntoIterator<Item = f64>, what: &str) -> Result<()> {
    if values.into_iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation(format!("{what} contains non-finite values")));
    }
    Ok(())
}

pub fn format_motions(seqs: &[MotionSequence]) -> Result<String> {
    let mut out = String::new();
    for seq in seqs {
        let frames: Vec<Vec<f64>> = seq.frames().iter().map(|f| f.pack().to_vec()).collect();
        check_finite(frames.iter().flatten().copied(), "motion")?;
        let rec = MotionRecord {
            fps: seq.fps(),
            dataset: seq.dataset.clone(),
            parts_present: seq.parts_present,
            rotation_source: seq.rotation_source,
            frames,
        };
        out.push_str(&serde_json::to_string(&rec).map_err(|e| Error::Validation(e.to_string()))?);
        out.push('\n');
    }
    Ok(out)
}

pub fn load(path: impl AsRef<Path>) -> Result<Vec<MotionSequence>> {
    parse_motions(&fs::read_to_string(path)?)
}

pub fn save(seqs: &[MotionSequence], path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_motions(seqs)?)?;
    Ok(())
}

pub fn parse_keypoints(text: &str) -> Result<Vec<KeypointClip>> {
    let mut out = Vec::new();
    for (line, body) in records(text) {
        let rec: KeypointRecord = serde_json::from_str(body).map_err(|e| parse_error(line, e))?;
        if !(rec.fps.is_finite() && rec.fps > 0.0) {
            return Err(parse_error(line, format!("fps must be positive, got {}", rec.fps)));
        }
        let mut positions = Vec::with_capacity(rec.positions.len());
        for (frame, joints) in rec.positions.into_iter().enumerate() {
            let n = joints.len();
            let kp: KeypointFrame = joints
                .try_into()
                .map_err(|_| parse_error(line, format!("frame {frame} has {n} joints, expected {NUM_JOINTS}")))?;
            positions.push(kp);
        }
        out.push(KeypointClip {
            fps: rec.fps,
            dataset: rec.dataset,
            positions,
        });
    }
    Ok(out)
}

pub fn format_keypoints(clips: &[KeypointClip]) -> Result<String> {
    let mut out = String::new();
    for clip in clips {
        check_finite(clip.positions.iter().flatten().flatten().copied(), "keypoints")?;
        let rec = KeypointRecord {
            fps: clip.fps,
            dataset: clip.dataset.clone(),
            positions: clip.positions.iter().map(|f| f.to_vec()).collect(),
        };
        out.push_str(&serde_json::to_string(&rec).map_err(|e| Error::Validation(e.to_string()))?);
        out.push('\n');
    }
    Ok(out)
}

pub fn load_keypoints(path: impl AsRef<Path>) -> Result<Vec<KeypointClip>> {
    parse_keypoints(&fs::read_to_string(path)?)
}

pub fn save_keypoints(clips: &[KeypointClip], path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_keypoints(clips)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng;

    fn random_seq(seed: u64, frames: usize) -> MotionSequence {
        let mut r = seeded(seed);
        let rows = (0..frames)
            .map(|_| {
                let v: Vec<f64> = (0..FRAME_DIM).map(|_| r.random_range(-1e3..1e3) * r.random::<f64>()).collect();
                UnifiedFrame::unpack(&v).unwrap()
            })
            .collect();
        let mut present = [true; NUM_PARTS];
        present[1] = false;
        let mut s = MotionSequence::new(rows, 29.97, present, "BEAT").unwrap();
        s.rotation_source = RotationSource::Identity;
        s
    }

    #[test]
    fn round_trip_is_exact() {
        let seqs = vec![random_seq(1, 3), random_seq(2, 1)];
        let text = format_motions(&seqs).unwrap();
        assert_eq!(text.lines().count(), 2);
        let back = parse_motions(&text).unwrap();
        assert_eq!(back, seqs);
        for (a, b) in back[0].frames().iter().zip(seqs[0].frames()) {
            for (x, y) in a.pack().iter().zip(b.pack().iter()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn empty_input_is_empty_list() {
        assert!(parse_motions("").unwrap().is_empty());
        assert!(parse_motions("\n  \n").unwrap().is_empty());
    }

    #[test]
    fn short_row_names_line_and_frame() {
        let mut text = format_motions(&[random_seq(1, 2)]).unwrap();
        let mut rec: serde_json::Value = serde_json::from_str(text.trim()).unwrap();
        rec["frames"][1].as_array_mut().unwrap().pop();
        text = format!("\n{}\n", rec);
        match parse_motions(&text) {
            Err(Error::RowWidth { line, frame, width }) => assert_eq!((line, frame, width), (2, 1, 668)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_line_reports_number() {
        let good = format_motions(&[random_seq(1, 1)]).unwrap();
        let text = format!("{good}{{not json\n");
        assert!(matches!(parse_motions(&text), Err(Error::Parse { line: 2, .. })));
        let bad_fps = good.replacen("\"fps\":29.97", "\"fps\":-1.0", 1);
        assert!(matches!(parse_motions(&bad_fps), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn non_finite_values_refused() {
        let mut s = random_seq(1, 1);
        s.frames_mut()[0].face[3] = f64::NAN;
        assert!(format_motions(&[s]).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("clip.jsonl");
        let seqs = vec![random_seq(5, 4)];
        save(&seqs, &path).unwrap();
        assert_eq!(load(&path).unwrap(), seqs);
    }

    #[test]
    fn keypoint_files() {
        let clip = KeypointClip {
            fps: 20.0,
            dataset: None,
            positions: vec![[[0.5, 1.0, -0.25]; NUM_JOINTS]; 2],
        };
        let text = format_keypoints(std::slice::from_ref(&clip)).unwrap();
        assert_eq!(parse_keypoints(&text).unwrap(), vec![clip]);
        let v: serde_json::Value = serde_json::from_str(text.trim()).unwrap();
        let mut v2 = v.clone();
        v2["positions"][1].as_array_mut().unwrap().pop();
        assert!(matches!(parse_keypoints(&v2.to_string()), Err(Error::Parse { line: 1, .. })));
    }
}
