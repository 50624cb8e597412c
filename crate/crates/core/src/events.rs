//! Event-stream data model shared by every other module.
//!
//! An event camera reports asynchronous per-pixel brightness changes as
//! `(x, y, t, p)` tuples. Streams are kept timestamp-sorted and immutable
//! after construction; every operation here is a pure function.

use std::fmt;

use thiserror::Error;

/// A single DVS event: pixel location, timestamp in microseconds, polarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Event {
    /// Column index.
    pub x: u16,
    /// Row index.
    pub y: u16,
    /// Timestamp in microseconds.
    pub t: u64,
    /// Polarity of the brightness change: +1 (ON) or -1 (OFF).
    pub p: i8,
}

/// An ordered event stream together with its sensor geometry.
///
/// Invariants (checked by [`validate_stream`], relied on elsewhere):
/// timestamps nondecreasing, coordinates inside `width`/`height`,
/// polarity in `{-1, +1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventStream {
    pub width: u16,
    pub height: u16,
    pub events: Vec<Event>,
}

impl EventStream {
    /// Empty stream with the given geometry.
    pub fn new(width: u16, height: u16) -> Self {
        Self { width, height, events: Vec::new() }
    }

    pub fn from_events(width: u16, height: u16, events: Vec<Event>) -> Self {
        Self { width, height, events }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// First timestamp, if any. Streams are sorted, so this is the minimum.
    pub fn t_min(&self) -> Option<u64> {
        self.events.first().map(|e| e.t)
    }

    /// Last timestamp, if any. Streams are sorted, so this is the maximum.
    pub fn t_max(&self) -> Option<u64> {
        self.events.last().map(|e| e.t)
    }

    /// `t_max - t_min`; zero for streams with fewer than two events.
    pub fn duration_us(&self) -> u64 {
        match (self.t_min(), self.t_max()) {
            (Some(a), Some(b)) => b - a,
            _ => 0,
        }
    }
}

/// Summary statistics of a stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventStats {
    pub count: u64,
    pub duration_us: u64,
    /// Events per second over the stream duration; 0 when the duration is 0.
    pub mean_rate_hz: f64,
    /// Fraction of ON events; 0 for an empty stream.
    pub positive_fraction: f64,
}

/// Which stream invariant a [`Violation`] refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    Unsorted,
    XOutOfBounds,
    YOutOfBounds,
    BadPolarity,
}

/// One violated invariant with the first offending event index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub index: usize,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ViolationKind::Unsorted => write!(f, "unsorted at index {}", self.index),
            ViolationKind::XOutOfBounds => write!(f, "x out of bounds at index {}", self.index),
            ViolationKind::YOutOfBounds => write!(f, "y out of bounds at index {}", self.index),
            ViolationKind::BadPolarity => write!(f, "bad polarity at index {}", self.index),
        }
    }
}

/// Outcome of [`validate_stream`]: empty iff all invariants hold.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "ok");
        }
        let msgs: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", msgs.join("; "))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EventError {
    #[error("stream has no events")]
    EmptyStream,
    #[error("invalid window: t0 {t0} > t1 {t1}")]
    InvalidWindow { t0: u64, t1: u64 },
}

/// Check every stream invariant, reporting the first offending index per
/// invariant. Reporting, not rejection: an empty report means the stream is
/// valid.
pub fn validate_stream(stream: &EventStream) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut unsorted = None;
    let mut x_oob = None;
    let mut y_oob = None;
    let mut bad_pol = None;
    let mut prev_t = None;
    for (i, e) in stream.events.iter().enumerate() {
        if let Some(pt) = prev_t {
            if e.t < pt && unsorted.is_none() {
                unsorted = Some(i);
            }
        }
        prev_t = Some(e.t);
        if e.x >= stream.width && x_oob.is_none() {
            x_oob = Some(i);
        }
        if e.y >= stream.height && y_oob.is_none() {
            y_oob = Some(i);
        }
        if e.p != 1 && e.p != -1 && bad_pol.is_none() {
            bad_pol = Some(i);
        }
    }
    if let Some(i) = unsorted {
        report.violations.push(Violation { kind: ViolationKind::Unsorted, index: i });
    }
    if let Some(i) = x_oob {
        report.violations.push(Violation { kind: ViolationKind::XOutOfBounds, index: i });
    }
    if let Some(i) = y_oob {
        report.violations.push(Violation { kind: ViolationKind::YOutOfBounds, index: i });
    }
    if let Some(i) = bad_pol {
        report.violations.push(Violation { kind: ViolationKind::BadPolarity, index: i });
    }
    report
}

/// Scale timestamps into `[0, bins-1]`:
/// `t* = (t - t_min) * (bins - 1) / (t_max - t_min)`.
///
/// When all timestamps coincide (including the single-event stream) every
/// `t*` is 0, keeping downstream representations total.
pub fn normalize_timestamps(stream: &EventStream, bins: usize) -> Result<Vec<f64>, EventError> {
    assert!(bins >= 1, "bin count must be >= 1");
    if stream.is_empty() {
        return Err(EventError::EmptyStream);
    }
    let t_min = stream.t_min().unwrap();
    let t_max = stream.t_max().unwrap();
    if t_max == t_min {
        return Ok(vec![0.0; stream.len()]);
    }
    let span = (t_max - t_min) as f64;
    let scale = (bins - 1) as f64 / span;
    Ok(stream.events.iter().map(|e| (e.t - t_min) as f64 * scale).collect())
}

/// Events with `t0 <= t < t1`, order and geometry preserved.
pub fn slice_window(stream: &EventStream, t0: u64, t1: u64) -> Result<EventStream, EventError> {
    if t0 > t1 {
        return Err(EventError::InvalidWindow { t0, t1 });
    }
    let events = stream.events.iter().copied().filter(|e| e.t >= t0 && e.t < t1).collect();
    Ok(EventStream { width: stream.width, height: stream.height, events })
}

/// Count, duration, mean rate and ON fraction of a stream.
pub fn stream_stats(stream: &EventStream) -> EventStats {
    let count = stream.len() as u64;
    let duration_us = stream.duration_us();
    let mean_rate_hz = if duration_us > 0 {
        count as f64 / (duration_us as f64 / 1e6)
    } else {
        0.0
    };
    let positive_fraction = if count > 0 {
        stream.events.iter().filter(|e| e.p == 1).count() as f64 / count as f64
    } else {
        0.0
    };
    EventStats { count, duration_us, mean_rate_hz, positive_fraction }
}
