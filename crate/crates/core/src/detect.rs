//! Score-based CUSUM stopping rules and run-length harnesses.
//!
//! The statistic follows `W_n = φ(s_n) + max(0, W_{n−1})` with `W_0 = 0`,
//! which equals `max_{1≤k≤n} Σ_{i=k}^n φ(s_i)`. An alarm is raised at the
//! first `n` with `W_n ≥ b`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Clipping applied to each increment before it enters the statistic.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum TruncationSpec {
    #[default]
    None,
    Level(f64),
}

impl TruncationSpec {
    pub fn level(m: f64) -> Result<Self> {
        let spec = TruncationSpec::Level(m);
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            TruncationSpec::Level(m) if !(m > 0.0 && m.is_finite()) => {
                Err(Error::Usage(format!("truncation level must be positive and finite, got {m}")))
            }
            _ => Ok(()),
        }
    }

    pub fn as_level(&self) -> Option<f64> {
        match *self {
            TruncationSpec::Level(m) => Some(m),
            TruncationSpec::None => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            TruncationSpec::None => "untruncated",
            TruncationSpec::Level(_) => "truncated",
        }
    }
}

impl Serialize for TruncationSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            TruncationSpec::None => s.serialize_str("none"),
            TruncationSpec::Level(m) => s.serialize_f64(*m),
        }
    }
}

impl<'de> Deserialize<'de> for TruncationSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Level(f64),
            Word(String),
        }
        match Repr::deserialize(d)? {
            Repr::Level(m) => TruncationSpec::level(m).map_err(serde::de::Error::custom),
            Repr::Word(w) if w == "none" => Ok(TruncationSpec::None),
            Repr::Word(w) => Err(serde::de::Error::custom(format!(
                "truncation must be a positive number or \"none\", got {w:?}"
            ))),
        }
    }
}

/// `φ(s)`: `s` clipped to `[−M, M]`, or `s` itself without truncation.
pub fn truncate(spec: TruncationSpec, s: f64) -> f64 {
    match spec {
        TruncationSpec::None => s,
        TruncationSpec::Level(m) => s.clamp(-m, m),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    pub threshold: f64,
    #[serde(default)]
    pub truncation: TruncationSpec,
}

impl DetectorConfig {
    pub fn new(threshold: f64, truncation: TruncationSpec) -> Result<Self> {
        let config = DetectorConfig { threshold, truncation };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return Err(Error::Usage(format!("threshold must be positive and finite, got {}", self.threshold)));
        }
        self.truncation.validate()
    }

    pub fn with_threshold(&self, threshold: f64) -> Result<Self> {
        DetectorConfig::new(threshold, self.truncation)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DetectorState {
    pub statistic: f64,
    pub time: usize,
    pub alarmed: bool,
}

impl DetectorState {
    pub fn reset(&mut self) {
        *self = DetectorState::default();
    }
}

/// One step of the recursion. Does not check whether `state` already alarmed.
pub fn detector_update(state: &DetectorState, increment: f64, config: &DetectorConfig) -> Result<DetectorState> {
    if !increment.is_finite() {
        return Err(Error::non_finite(format!("detector increment at step {}", state.time + 1)));
    }
    let statistic = truncate(config.truncation, increment) + state.statistic.max(0.0);
    Ok(DetectorState {
        statistic,
        time: state.time + 1,
        alarmed: statistic >= config.threshold,
    })
}

/// Smallest `n ≥ 1` with `W_n ≥ b`, or `None` if the stream runs out first.
pub fn run_detector(increments: &[f64], config: &DetectorConfig) -> Result<Option<usize>> {
    let mut state = DetectorState::default();
    for &s in increments {
        state = detector_update(&state, s, config)?;
        if state.alarmed {
            return Ok(Some(state.time));
        }
    }
    Ok(None)
}

/// Alarm intervals from a detect-and-reset pass over one stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLengthReport {
    pub intervals: Vec<usize>,
    /// Mean of `intervals`; 0 when there were no alarms.
    pub mean: f64,
    pub count: usize,
    /// Samples consumed after the last alarm without a further alarm.
    pub residual: usize,
}

impl RunLengthReport {
    pub fn consumed(&self) -> usize {
        self.intervals.iter().sum::<usize>() + self.residual
    }

    /// `mean` when there was at least one alarm. Otherwise the number of
    /// samples consumed, which the true mean run length exceeds on this path.
    pub fn censored_mean(&self) -> f64 {
        if self.count > 0 {
            self.mean
        } else {
            self.residual as f64
        }
    }
}

fn measure_run_lengths(increments: &[f64], config: &DetectorConfig) -> Result<RunLengthReport> {
    config.validate()?;
    let mut intervals = Vec::new();
    let mut state = DetectorState::default();
    for &s in increments {
        state = detector_update(&state, s, config)?;
        if state.alarmed {
            intervals.push(state.time);
            state.reset();
        }
    }
    let count = intervals.len();
    let mean = if count > 0 {
        intervals.iter().sum::<usize>() as f64 / count as f64
    } else {
        0.0
    };
    Ok(RunLengthReport {
        intervals,
        mean,
        count,
        residual: state.time,
    })
}

/// Alarm intervals on a stream drawn entirely under the pre-change law.
/// The statistic resets after each alarm; the stream itself continues.
pub fn measure_false_alarms(increments: &[f64], config: &DetectorConfig) -> Result<RunLengthReport> {
    measure_run_lengths(increments, config)
}

/// Detection delays on a stream drawn entirely under the post-change law,
/// counting the change at the first sample.
pub fn measure_delays(increments: &[f64], config: &DetectorConfig) -> Result<RunLengthReport> {
    measure_run_lengths(increments, config)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub threshold: f64,
    pub report: RunLengthReport,
}

/// Runs the reset harness once per threshold over the same stream.
/// Thresholds are evaluated on separate threads; row order follows `thresholds`.
pub fn threshold_sweep(increments: &[f64], thresholds: &[f64], truncation: TruncationSpec) -> Result<Vec<SweepRow>> {
    if thresholds.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Usage("sweep thresholds must be strictly increasing".into()));
    }
    let configs = thresholds
        .iter()
        .map(|&b| DetectorConfig::new(b, truncation))
        .collect::<Result<Vec<_>>>()?;
    std::thread::scope(|scope| {
        let handles: Vec<_> = configs
            .iter()
            .map(|config| scope.spawn(move || measure_run_lengths(increments, config)))
            .collect();
        handles
            .into_iter()
            .zip(&configs)
            .map(|(h, config)| {
                let report = h.join().expect("sweep worker panicked")?;
                Ok(SweepRow {
                    threshold: config.threshold,
                    report,
                })
            })
            .collect()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub n: usize,
    pub score_diff: f64,
    pub cusum_stat: f64,
}

/// The statistic after every sample, without resets.
pub fn detector_trace(increments: &[f64], truncation: TruncationSpec) -> Result<Vec<TraceRow>> {
    truncation.validate()?;
    // The threshold plays no part in the trace itself.
    let config = DetectorConfig {
        threshold: f64::INFINITY,
        truncation,
    };
    let mut state = DetectorState::default();
    increments
        .iter()
        .map(|&s| {
            state = detector_update(&state, s, &config)?;
            Ok(TraceRow {
                n: state.time,
                score_diff: s,
                cusum_stat: state.statistic,
            })
        })
        .collect()
}

pub fn write_trace_csv<W: Write>(out: W, rows: &[TraceRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    if rows.is_empty() {
        w.write_record(["n", "score_diff", "cusum_stat"])?;
    }
    w.flush()?;
    Ok(())
}

/// `threshold,mean_run_length,count`, using [`RunLengthReport::censored_mean`].
pub fn write_sweep_csv<W: Write>(out: W, rows: &[SweepRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["threshold", "mean_run_length", "count"])?;
    for row in rows {
        w.write_record([
            row.threshold.to_string(),
            row.report.censored_mean().to_string(),
            row.report.count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
