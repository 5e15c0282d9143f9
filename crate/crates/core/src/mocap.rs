//! AMC motion-capture clips: parsing, flattening and change-point scenarios.
//!
//! An AMC body is a sequence of frames. Each frame starts with a line holding
//! only its integer index, followed by one `bone v1 v2 …` line per bone.
//! Lines starting with `#` are comments and lines starting with `:` are header
//! directives; both are skipped wherever they occur.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{Error, Result};
use crate::score::{StateVector, TransitionPair};
use crate::simulate::ChangePoint;
use crate::standardize::Standardization;

/// Line numbers are 1-based.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum AmcError {
    #[error("line {line}: non-numeric channel value {token:?}")]
    NonNumeric { line: usize, token: String },

    #[error("line {line}: frame {found} follows frame {previous}, expected {}", previous + 1)]
    FrameGap { line: usize, previous: u64, found: u64 },

    #[error("line {line}: frame {frame} {detail}")]
    BoneMismatch { line: usize, frame: u64, detail: String },

    #[error("line {line}: {detail}")]
    Malformed { line: usize, detail: String },
}

/// Coarse grouping of [`AmcError`]: value-level versus structural problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmcErrorKind {
    NonNumeric,
    FrameGap,
    BoneMismatch,
    Malformed,
}

impl AmcError {
    pub fn kind(&self) -> AmcErrorKind {
        match self {
            AmcError::NonNumeric { .. } => AmcErrorKind::NonNumeric,
            AmcError::FrameGap { .. } => AmcErrorKind::FrameGap,
            AmcError::BoneMismatch { .. } => AmcErrorKind::BoneMismatch,
            AmcError::Malformed { .. } => AmcErrorKind::Malformed,
        }
    }

    pub fn line(&self) -> usize {
        match self {
            AmcError::NonNumeric { line, .. }
            | AmcError::FrameGap { line, .. }
            | AmcError::BoneMismatch { line, .. }
            | AmcError::Malformed { line, .. } => *line,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AmcClip {
    pub bone_order: Vec<String>,
    pub channel_counts: Vec<usize>,
    /// `frames[f][k]` holds the channels of bone `k` in frame `f`.
    pub frames: Vec<Vec<Vec<f64>>>,
    pub frame_indices: Vec<u64>,
}

impl AmcClip {
    pub fn dim(&self) -> usize {
        self.channel_counts.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

fn is_frame_index(line: &str) -> Option<u64> {
    let mut tokens = line.split_whitespace();
    let first = tokens.next()?;
    if tokens.next().is_some() {
        return None;
    }
    first.parse().ok()
}

struct FrameBuilder {
    index: u64,
    line: usize,
    bones: Vec<(String, Vec<f64>)>,
}

impl AmcClip {
    fn push_frame(&mut self, frame: FrameBuilder) -> std::result::Result<(), AmcError> {
        if frame.bones.is_empty() {
            return Err(AmcError::Malformed {
                line: frame.line,
                detail: format!("frame {} has no bone lines", frame.index),
            });
        }
        if self.frames.is_empty() {
            self.bone_order = frame.bones.iter().map(|(n, _)| n.clone()).collect();
            self.channel_counts = frame.bones.iter().map(|(_, v)| v.len()).collect();
        } else {
            let names: Vec<&str> = frame.bones.iter().map(|(n, _)| n.as_str()).collect();
            if names != self.bone_order.iter().map(String::as_str).collect::<Vec<_>>() {
                return Err(AmcError::BoneMismatch {
                    line: frame.line,
                    frame: frame.index,
                    detail: format!("lists bones [{}], expected [{}]", names.join(" "), self.bone_order.join(" ")),
                });
            }
            for ((name, vals), &count) in frame.bones.iter().zip(&self.channel_counts) {
                if vals.len() != count {
                    return Err(AmcError::BoneMismatch {
                        line: frame.line,
                        frame: frame.index,
                        detail: format!("gives bone {name} {} channels, expected {count}", vals.len()),
                    });
                }
            }
        }
        self.frame_indices.push(frame.index);
        self.frames.push(frame.bones.into_iter().map(|(_, v)| v).collect());
        Ok(())
    }
}

pub fn parse_amc(text: &str) -> std::result::Result<AmcClip, AmcError> {
    let mut clip = AmcClip::default();
    let mut current: Option<FrameBuilder> = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(':') {
            continue;
        }
        if let Some(index) = is_frame_index(line) {
            if let Some(done) = current.take() {
                clip.push_frame(done)?;
            }
            if let Some(&previous) = clip.frame_indices.last() {
                if index != previous + 1 {
                    return Err(AmcError::FrameGap {
                        line: line_no,
                        previous,
                        found: index,
                    });
                }
            }
            current = Some(FrameBuilder {
                index,
                line: line_no,
                bones: Vec::new(),
            });
            continue;
        }
        let frame = current.as_mut().ok_or_else(|| AmcError::Malformed {
            line: line_no,
            detail: "bone line before the first frame index".into(),
        })?;
        let mut tokens = line.split_whitespace();
        let name = tokens.next().expect("line is nonempty").to_string();
        let values = tokens
            .map(|t| match t.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(AmcError::NonNumeric {
                    line: line_no,
                    token: t.to_string(),
                }),
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        if values.is_empty() {
            return Err(AmcError::Malformed {
                line: line_no,
                detail: format!("bone {name} has no channel values"),
            });
        }
        if frame.bones.iter().any(|(n, _)| *n == name) {
            return Err(AmcError::BoneMismatch {
                line: line_no,
                frame: frame.index,
                detail: format!("repeats bone {name}"),
            });
        }
        frame.bones.push((name, values));
    }
    if let Some(done) = current.take() {
        clip.push_frame(done)?;
    }
    Ok(clip)
}

/// AMC text that [`parse_amc`] reads back to an identical clip.
pub fn to_amc_string(clip: &AmcClip) -> String {
    let mut out = String::from(":FULLY-SPECIFIED\n:DEGREES\n");
    for (index, frame) in clip.frame_indices.iter().zip(&clip.frames) {
        writeln!(out, "{index}").unwrap();
        for (name, vals) in clip.bone_order.iter().zip(frame) {
            out.push_str(name);
            for v in vals {
                write!(out, " {v}").unwrap();
            }
            out.push('\n');
        }
    }
    out
}

pub fn read_amc_file(path: &Path) -> Result<AmcClip> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_amc(&text).map_err(|source| Error::AmcFile {
        path: path.to_path_buf(),
        source,
    })
}

/// One vector per kept frame: the bones' channels concatenated in bone order,
/// keeping frames `0, stride, 2·stride, …`.
pub fn clip_to_vectors(clip: &AmcClip, stride: usize) -> Result<Vec<StateVector>> {
    if stride == 0 {
        return Err(Error::Usage("stride must be >= 1".into()));
    }
    if clip.is_empty() {
        return Err(Error::Usage("clip has no frames".into()));
    }
    Ok(clip
        .frames
        .iter()
        .step_by(stride)
        .map(|frame| StateVector::from_vec_unchecked(frame.concat()))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub pre_clip: PathBuf,
    /// `None` yields a pre-change-only stream.
    #[serde(default)]
    pub post_clip: Option<PathBuf>,
    /// Number of pre-clip vectors kept; the first post vector sits at this index.
    pub splice_index: usize,
    #[serde(default = "one")]
    pub stride: usize,
    #[serde(default = "yes")]
    pub standardize: bool,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub states: Vec<StateVector>,
    /// `(X_{n−1}, X_n)` for `n = 1 … len−1`.
    pub pairs: Vec<TransitionPair>,
    /// Index of the first post-change state.
    pub change: ChangePoint,
    /// Fitted on the pre segment when standardization was requested.
    pub standardization: Option<Standardization>,
}

impl Scenario {
    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, StateVector::dim)
    }
}

/// Splices the first `splice_index` vectors of `pre` onto all of `post`.
pub fn build_scenario_from_clips(
    pre: &AmcClip,
    post: Option<&AmcClip>,
    splice_index: usize,
    stride: usize,
    standardize: bool,
) -> Result<Scenario> {
    if splice_index == 0 {
        return Err(Error::Usage("splice_index must be >= 1".into()));
    }
    let mut states = clip_to_vectors(pre, stride)?;
    if splice_index > states.len() {
        return Err(Error::Usage(format!(
            "splice_index {splice_index} exceeds the {} pre-change vectors available",
            states.len()
        )));
    }
    states.truncate(splice_index);
    let mut change = ChangePoint::Never;
    if let Some(post) = post.filter(|c| !c.is_empty()) {
        if post.dim() != pre.dim() {
            return Err(Error::Usage(format!(
                "clip dimensions differ: pre-change {} vs post-change {}",
                pre.dim(),
                post.dim()
            )));
        }
        states.extend(clip_to_vectors(post, stride)?);
        change = ChangePoint::At(splice_index);
    }
    let standardization = if standardize {
        let st = Standardization::fit(&states[..splice_index])?;
        for s in &mut states {
            *s = StateVector::from_vec_unchecked(st.apply(s.as_slice()));
        }
        Some(st)
    } else {
        None
    };
    let pairs = crate::score::pairs_from_path(&states);
    Ok(Scenario {
        states,
        pairs,
        change,
        standardization,
    })
}

pub fn build_scenario(spec: &ScenarioSpec) -> Result<Scenario> {
    let pre = read_amc_file(&spec.pre_clip)?;
    let post = spec.post_clip.as_deref().map(read_amc_file).transpose()?;
    build_scenario_from_clips(&pre, post.as_ref(), spec.splice_index, spec.stride, spec.standardize)
}

/// One row per vector, columns `c0 … c{d−1}`.
pub fn write_frames_csv<W: Write>(out: W, vectors: &[StateVector]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let d = vectors.first().map_or(0, StateVector::dim);
    w.write_record((0..d).map(|i| format!("c{i}")))?;
    for v in vectors {
        w.write_record(v.as_slice().iter().map(|x| x.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
