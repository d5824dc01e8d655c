//! Time-tag streams: validated containers, binary and CSV serialization,
//! and the sync-referenced coincidence engine.
//!
//! # Binary format (`TTB1`)
//!
//! ```text
//! offset 0   4 bytes   magic b"TTB1"
//! offset 4   u32 LE    channel count
//! offset 8.. records   u64 LE timestamp_ps, u8 channel   (9 bytes each)
//! ```
//!
//! Records must be non-decreasing in timestamp and every channel must be
//! below the declared channel count. Parse errors carry the byte offset of
//! the offending field.
//!
//! # Coincidence analysis
//!
//! Tags are referenced to the most recent sync tag. Within a period the
//! offset `dt` is assigned to arrival slot `k = round(dt / delay)` clamped
//! to `{0, 1, 2}` and accepted only if `|dt - k * delay| < window`; anything
//! else is counted as unassigned. Every pairing of an assigned side-1 tag
//! with an assigned side-2 tag in the same period increments one cell of
//! the 6 x 6 joint histogram (detector-major outcome order, matching
//! [`crate::analyzer::DetectionOutcome::ALL`]).

use std::collections::BTreeSet;
use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TTB1_MAGIC: [u8; 4] = *b"TTB1";
const RECORD_BYTES: usize = 9;

/// One detection record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeTag {
    pub timestamp_ps: u64,
    pub channel: u8,
}

/// A validated, time-ordered tag stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeTagStream {
    channel_count: u32,
    tags: Vec<TimeTag>,
}

impl TimeTagStream {
    /// Validates ordering (non-decreasing timestamps) and channel range.
    pub fn new(channel_count: u32, tags: Vec<TimeTag>) -> Result<Self> {
        let mut prev = 0u64;
        for (i, tag) in tags.iter().enumerate() {
            if (tag.channel as u32) >= channel_count {
                return Err(Error::InvalidInput(format!(
                    "tag {i} uses channel {} but the stream declares {channel_count} channels",
                    tag.channel
                )));
            }
            if tag.timestamp_ps < prev {
                return Err(Error::UnsortedStream { index: i });
            }
            prev = tag.timestamp_ps;
        }
        Ok(Self { channel_count, tags })
    }

    pub fn channel_count(&self) -> u32 {
        self.channel_count
    }

    pub fn tags(&self) -> &[TimeTag] {
        &self.tags
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn into_tags(self) -> Vec<TimeTag> {
        self.tags
    }

    /// The sub-stream carrying only the given channels (declared channel
    /// count is preserved).
    pub fn select_channels(&self, channels: &[u8]) -> TimeTagStream {
        let tags = self
            .tags
            .iter()
            .filter(|t| channels.contains(&t.channel))
            .copied()
            .collect();
        TimeTagStream { channel_count: self.channel_count, tags }
    }

    /// Merge several streams into one time-ordered stream. Ties keep the
    /// order of the input list, so merging is deterministic.
    pub fn merge(streams: &[&TimeTagStream]) -> Result<TimeTagStream> {
        let channel_count = streams.iter().map(|s| s.channel_count).max().unwrap_or(0);
        let mut tags: Vec<TimeTag> = Vec::with_capacity(streams.iter().map(|s| s.len()).sum());
        for s in streams {
            tags.extend_from_slice(&s.tags);
        }
        tags.sort_by_key(|t| t.timestamp_ps); // stable: ties keep input order
        TimeTagStream::new(channel_count, tags)
    }
}

/// Serialize a stream in the binary format.
pub fn write_ttb1<W: Write>(mut w: W, stream: &TimeTagStream) -> std::io::Result<()> {
    w.write_all(&TTB1_MAGIC)?;
    w.write_all(&stream.channel_count().to_le_bytes())?;
    for tag in stream.tags() {
        w.write_all(&tag.timestamp_ps.to_le_bytes())?;
        w.write_all(&[tag.channel])?;
    }
    Ok(())
}

/// Parse a binary stream, reporting the byte offset of any malformed field.
pub fn read_ttb1<R: Read>(mut r: R) -> Result<TimeTagStream> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf).map_err(|e| Error::BadFormat {
        offset: 0,
        reason: format!("io error: {e}"),
    })?;
    if buf.len() < 4 {
        return Err(Error::BadFormat { offset: 0, reason: "truncated magic".into() });
    }
    if buf[0..4] != TTB1_MAGIC {
        return Err(Error::BadFormat {
            offset: 0,
            reason: format!("bad magic {:02x?}, expected {:02x?}", &buf[0..4], TTB1_MAGIC),
        });
    }
    if buf.len() < 8 {
        return Err(Error::BadFormat { offset: 4, reason: "truncated channel count".into() });
    }
    let channel_count = u32::from_le_bytes(buf[4..8].try_into().expect("4 bytes"));
    let body = &buf[8..];
    if body.len() % RECORD_BYTES != 0 {
        let full = body.len() / RECORD_BYTES;
        return Err(Error::BadFormat {
            offset: 8 + (full * RECORD_BYTES) as u64,
            reason: format!("truncated record ({} trailing bytes)", body.len() % RECORD_BYTES),
        });
    }
    let mut tags = Vec::with_capacity(body.len() / RECORD_BYTES);
    let mut prev = 0u64;
    for (i, rec) in body.chunks_exact(RECORD_BYTES).enumerate() {
        let offset = 8 + (i * RECORD_BYTES) as u64;
        let timestamp_ps = u64::from_le_bytes(rec[0..8].try_into().expect("8 bytes"));
        let channel = rec[8];
        if (channel as u32) >= channel_count {
            return Err(Error::BadFormat {
                offset: offset + 8,
                reason: format!("channel {channel} out of range (stream declares {channel_count})"),
            });
        }
        if timestamp_ps < prev {
            return Err(Error::UnsortedStream { index: i });
        }
        prev = timestamp_ps;
        tags.push(TimeTag { timestamp_ps, channel });
    }
    Ok(TimeTagStream { channel_count, tags })
}

/// Write a stream as CSV with header `timestamp_ps,channel`.
pub fn write_tags_csv<W: Write>(mut w: W, stream: &TimeTagStream) -> std::io::Result<()> {
    writeln!(w, "timestamp_ps,channel")?;
    for tag in stream.tags() {
        writeln!(w, "{},{}", tag.timestamp_ps, tag.channel)?;
    }
    Ok(())
}

/// Read the CSV form. The channel count is inferred as `max(channel) + 1`.
pub fn read_tags_csv<R: BufRead>(r: R) -> Result<TimeTagStream> {
    let mut lines = r.lines().enumerate();
    let header = match lines.next() {
        Some((_, Ok(h))) => h,
        Some((_, Err(e))) => {
            return Err(Error::BadFormat { offset: 0, reason: format!("io error: {e}") })
        }
        None => return Err(Error::BadFormat { offset: 0, reason: "empty file".into() }),
    };
    if header.trim() != "timestamp_ps,channel" {
        return Err(Error::BadFormat {
            offset: 0,
            reason: format!("bad header {header:?}, expected \"timestamp_ps,channel\""),
        });
    }
    let mut tags = Vec::new();
    let mut channel_count = 0u32;
    let mut prev = 0u64;
    for (lineno, line) in lines {
        let line = line.map_err(|e| Error::BadFormat {
            offset: lineno as u64,
            reason: format!("io error: {e}"),
        })?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = |reason: String| Error::BadFormat { offset: lineno as u64, reason };
        let (ts, ch) = line
            .split_once(',')
            .ok_or_else(|| bad(format!("line {}: expected two comma-separated fields", lineno + 1)))?;
        let timestamp_ps: u64 = ts
            .trim()
            .parse()
            .map_err(|e| bad(format!("line {}: bad timestamp: {e}", lineno + 1)))?;
        let channel: u8 = ch
            .trim()
            .parse()
            .map_err(|e| bad(format!("line {}: bad channel: {e}", lineno + 1)))?;
        if timestamp_ps < prev {
            return Err(Error::UnsortedStream { index: tags.len() });
        }
        prev = timestamp_ps;
        channel_count = channel_count.max(channel as u32 + 1);
        tags.push(TimeTag { timestamp_ps, channel });
    }
    Ok(TimeTagStream { channel_count, tags })
}

/// Counting result of one coincidence run. Outcome indices are
/// detector-major (`detector * 3 + slot`), detectors ordered by channel
/// number within each side stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceHistogram {
    /// Number of sync periods analyzed.
    pub n_periods: u64,
    pub delay_ps: u64,
    pub window_ps: u64,
    /// joint[o1][o2]: coincidences of side-1 outcome o1 with side-2 outcome o2.
    pub joint: [[u64; 6]; 6],
    /// Assigned tags per side-1 outcome.
    pub singles1: [u64; 6],
    /// Assigned tags per side-2 outcome.
    pub singles2: [u64; 6],
    /// Tags that fell outside every slot window (or before the first sync).
    pub unassigned1: u64,
    pub unassigned2: u64,
}

impl CoincidenceHistogram {
    /// Coincidences per sync period.
    pub fn joint_fraction(&self, o1: usize, o2: usize) -> f64 {
        self.joint[o1][o2] as f64 / self.n_periods as f64
    }

    /// Assigned side tags per sync period.
    pub fn singles_fraction(&self, side: usize, o: usize) -> f64 {
        let s = match side {
            0 => &self.singles1,
            _ => &self.singles2,
        };
        s[o] as f64 / self.n_periods as f64
    }

    pub fn total_coincidences(&self) -> u64 {
        self.joint.iter().flatten().sum()
    }
}

fn detector_map(stream: &TimeTagStream, label: &str) -> Result<[Option<u8>; 2]> {
    let channels: BTreeSet<u8> = stream.tags().iter().map(|t| t.channel).collect();
    if channels.len() > 2 {
        return Err(Error::InvalidInput(format!(
            "{label} stream carries {} distinct channels; a side has at most two detectors",
            channels.len()
        )));
    }
    let mut map = [None, None];
    for (slot, ch) in channels.into_iter().enumerate() {
        map[slot] = Some(ch);
    }
    Ok(map)
}

fn classify(dt: u64, delay: u64, window: u64) -> Option<usize> {
    let k = ((dt as f64 / delay as f64).round() as i64).clamp(0, 2) as u64;
    if dt.abs_diff(k * delay) < window {
        Some(k as usize)
    } else {
        None
    }
}

/// Cross-correlate two side streams against a sync stream.
///
/// `window_ps` must satisfy `2 * window < delay` so the three slot windows
/// cannot overlap. The lower channel number in each side stream maps to
/// detector A (outcome indices 0..3), the higher to detector B (3..6).
pub fn coincidences(
    side1: &TimeTagStream,
    side2: &TimeTagStream,
    sync: &TimeTagStream,
    delay_ps: u64,
    window_ps: u64,
) -> Result<CoincidenceHistogram> {
    if delay_ps == 0 {
        return Err(Error::InvalidInput("delay_ps must be positive".into()));
    }
    if window_ps == 0 || 2 * window_ps >= delay_ps {
        return Err(Error::InvalidInput(format!(
            "window_ps must satisfy 0 < 2 * window < delay; got window {window_ps}, delay {delay_ps}"
        )));
    }
    if sync.is_empty() {
        return Err(Error::InvalidInput("sync stream is empty".into()));
    }
    for w in sync.tags().windows(2) {
        if w[1].timestamp_ps <= w[0].timestamp_ps {
            return Err(Error::InvalidInput(
                "sync timestamps must be strictly increasing".into(),
            ));
        }
    }
    let map1 = detector_map(side1, "side-1")?;
    let map2 = detector_map(side2, "side-2")?;
    let det = |map: &[Option<u8>; 2], ch: u8| -> usize {
        if map[0] == Some(ch) {
            0
        } else {
            1
        }
    };

    let syncs = sync.tags();
    let mut hist = CoincidenceHistogram {
        n_periods: syncs.len() as u64,
        delay_ps,
        window_ps,
        joint: [[0; 6]; 6],
        singles1: [0; 6],
        singles2: [0; 6],
        unassigned1: 0,
        unassigned2: 0,
    };

    let tags1 = side1.tags();
    let tags2 = side2.tags();
    let (mut i1, mut i2) = (0usize, 0usize);
    // tags before the first sync belong to no period
    while i1 < tags1.len() && tags1[i1].timestamp_ps < syncs[0].timestamp_ps {
        hist.unassigned1 += 1;
        i1 += 1;
    }
    while i2 < tags2.len() && tags2[i2].timestamp_ps < syncs[0].timestamp_ps {
        hist.unassigned2 += 1;
        i2 += 1;
    }

    let mut assigned1: Vec<usize> = Vec::with_capacity(4);
    let mut assigned2: Vec<usize> = Vec::with_capacity(4);
    for (p, s) in syncs.iter().enumerate() {
        let start = s.timestamp_ps;
        let end = syncs.get(p + 1).map(|n| n.timestamp_ps);
        assigned1.clear();
        assigned2.clear();

        while i1 < tags1.len() && end.map_or(true, |e| tags1[i1].timestamp_ps < e) {
            let t = &tags1[i1];
            match classify(t.timestamp_ps - start, delay_ps, window_ps) {
                Some(slot) => {
                    let o = det(&map1, t.channel) * 3 + slot;
                    hist.singles1[o] += 1;
                    assigned1.push(o);
                }
                None => hist.unassigned1 += 1,
            }
            i1 += 1;
        }
        while i2 < tags2.len() && end.map_or(true, |e| tags2[i2].timestamp_ps < e) {
            let t = &tags2[i2];
            match classify(t.timestamp_ps - start, delay_ps, window_ps) {
                Some(slot) => {
                    let o = det(&map2, t.channel) * 3 + slot;
                    hist.singles2[o] += 1;
                    assigned2.push(o);
                }
                None => hist.unassigned2 += 1,
            }
            i2 += 1;
        }
        for &o1 in &assigned1 {
            for &o2 in &assigned2 {
                hist.joint[o1][o2] += 1;
            }
        }
    }
    Ok(hist)
}
