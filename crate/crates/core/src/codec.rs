//! Event-file codecs: EVT1 (canonical binary), ATIS-style N-Caltech `.bin`,
//! and plain CSV.
//!
//! Readers reject rather than emit invalid streams: anything returned by
//! [`read_events`] passes [`validate_stream`] with an empty report.
//!
//! EVT1 layout (little-endian): magic `EVT1`, version `u16 = 1`, width `u16`,
//! height `u16`, count `u64`, then `count` records of
//! `{x: u16, y: u16, t: u64, p: i8, pad: u8 = 0}` (14 bytes each).
//!
//! N-Caltech records are 5 bytes, big-endian bit order: `byte0 = x`,
//! `byte1 = y`, bit 7 of `byte2` is the polarity (1 = ON), and the remaining
//! 23 bits (`byte2` bits 6..0, `byte3`, `byte4`) are the timestamp in
//! microseconds. The file itself carries no geometry, so the reader takes it
//! as an argument.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use thiserror::Error;

use crate::events::{validate_stream, Event, EventStream, ViolationKind};

const EVT1_MAGIC: &[u8; 4] = b"EVT1";
const EVT1_VERSION: u16 = 1;
/// Magic + version + width + height + count.
pub const EVT1_HEADER_BYTES: u64 = 4 + 2 + 2 + 2 + 8;
/// x + y + t + p + pad.
pub const EVT1_RECORD_BYTES: u64 = 14;
const NCALTECH_RECORD_BYTES: usize = 5;
const CSV_HEADER: &str = "x,y,t_us,p";

/// On-disk event formats understood by [`read_events`] / [`write_events`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventFormat {
    Evt1,
    NcaltechBin,
    Csv,
}

impl EventFormat {
    /// File extension conventionally used for this format.
    pub fn extension(self) -> &'static str {
        match self {
            EventFormat::Evt1 => "evt1",
            EventFormat::NcaltechBin => "bin",
            EventFormat::Csv => "csv",
        }
    }
}

impl fmt::Display for EventFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EventFormat::Evt1 => "evt1",
            EventFormat::NcaltechBin => "ncaltech",
            EventFormat::Csv => "csv",
        };
        write!(f, "{s}")
    }
}

impl FromStr for EventFormat {
    type Err = CodecError;

    fn from_str(s: &str) -> Result<Self, CodecError> {
        match s.to_ascii_lowercase().as_str() {
            "evt1" => Ok(EventFormat::Evt1),
            "ncaltech" | "bin" | "ncaltech_bin" => Ok(EventFormat::NcaltechBin),
            "csv" => Ok(EventFormat::Csv),
            other => Err(CodecError::Format(format!("unknown event format '{other}'"))),
        }
    }
}

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("format error: {0}")]
    Format(String),
    #[error("event outside declared geometry: {0}")]
    Bounds(String),
    #[error("format {0} requires explicit sensor geometry")]
    MissingGeometry(EventFormat),
}

/// Read an event stream from `path`.
///
/// `geometry` is required for `NcaltechBin` (the format is headerless);
/// for `Csv` it is optional and inferred as `(max_x + 1, max_y + 1)` when
/// absent; `Evt1` carries its own geometry and ignores the argument.
pub fn read_events(
    path: &Path,
    format: EventFormat,
    geometry: Option<(u16, u16)>,
) -> Result<EventStream, CodecError> {
    let stream = match format {
        EventFormat::Evt1 => read_evt1(path)?,
        EventFormat::NcaltechBin => {
            let (w, h) = geometry.ok_or(CodecError::MissingGeometry(format))?;
            read_ncaltech(path, w, h)?
        }
        EventFormat::Csv => read_csv(path, geometry)?,
    };
    reject_invalid(stream)
}

/// Write `stream` to `path`, returning the number of bytes written.
pub fn write_events(
    stream: &EventStream,
    path: &Path,
    format: EventFormat,
) -> Result<u64, CodecError> {
    match format {
        EventFormat::Evt1 => write_evt1(stream, path),
        EventFormat::NcaltechBin => write_ncaltech(stream, path),
        EventFormat::Csv => write_csv(stream, path),
    }
}

fn reject_invalid(stream: EventStream) -> Result<EventStream, CodecError> {
    let report = validate_stream(&stream);
    if let Some(v) = report.violations.first() {
        return match v.kind {
            ViolationKind::XOutOfBounds | ViolationKind::YOutOfBounds => {
                Err(CodecError::Bounds(v.to_string()))
            }
            _ => Err(CodecError::Format(report.to_string())),
        };
    }
    Ok(stream)
}

fn read_evt1(path: &Path) -> Result<EventStream, CodecError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| CodecError::Format("truncated EVT1 header".into()))?;
    if &magic != EVT1_MAGIC {
        return Err(CodecError::Format("bad EVT1 magic".into()));
    }
    let version = r.read_u16::<LittleEndian>()?;
    if version != EVT1_VERSION {
        return Err(CodecError::Format(format!("unsupported EVT1 version {version}")));
    }
    let width = r.read_u16::<LittleEndian>()?;
    let height = r.read_u16::<LittleEndian>()?;
    let count = r.read_u64::<LittleEndian>()?;
    let mut events = Vec::with_capacity(count.min(1 << 24) as usize);
    for i in 0..count {
        let mut rec = [0u8; EVT1_RECORD_BYTES as usize];
        r.read_exact(&mut rec)
            .map_err(|_| CodecError::Format(format!("truncated EVT1 record {i}")))?;
        let x = u16::from_le_bytes([rec[0], rec[1]]);
        let y = u16::from_le_bytes([rec[2], rec[3]]);
        let t = u64::from_le_bytes([rec[4], rec[5], rec[6], rec[7], rec[8], rec[9], rec[10], rec[11]]);
        let p = rec[12] as i8;
        events.push(Event { x, y, t, p });
    }
    Ok(EventStream { width, height, events })
}

fn write_evt1(stream: &EventStream, path: &Path) -> Result<u64, CodecError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(EVT1_MAGIC)?;
    w.write_u16::<LittleEndian>(EVT1_VERSION)?;
    w.write_u16::<LittleEndian>(stream.width)?;
    w.write_u16::<LittleEndian>(stream.height)?;
    w.write_u64::<LittleEndian>(stream.len() as u64)?;
    for e in &stream.events {
        w.write_u16::<LittleEndian>(e.x)?;
        w.write_u16::<LittleEndian>(e.y)?;
        w.write_u64::<LittleEndian>(e.t)?;
        w.write_i8(e.p)?;
        w.write_u8(0)?;
    }
    w.flush()?;
    Ok(EVT1_HEADER_BYTES + EVT1_RECORD_BYTES * stream.len() as u64)
}

fn read_ncaltech(path: &Path, width: u16, height: u16) -> Result<EventStream, CodecError> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if !bytes.len().is_multiple_of(NCALTECH_RECORD_BYTES) {
        return Err(CodecError::Format(format!(
            "N-Caltech file length {} is not a multiple of {}",
            bytes.len(),
            NCALTECH_RECORD_BYTES
        )));
    }
    let mut events = Vec::with_capacity(bytes.len() / NCALTECH_RECORD_BYTES);
    for rec in bytes.chunks_exact(NCALTECH_RECORD_BYTES) {
        let x = rec[0] as u16;
        let y = rec[1] as u16;
        let p = if rec[2] & 0x80 != 0 { 1 } else { -1 };
        let t = ((rec[2] as u64 & 0x7F) << 16) | ((rec[3] as u64) << 8) | rec[4] as u64;
        events.push(Event { x, y, t, p });
    }
    Ok(EventStream { width, height, events })
}

fn write_ncaltech(stream: &EventStream, path: &Path) -> Result<u64, CodecError> {
    let mut w = BufWriter::new(File::create(path)?);
    for (i, e) in stream.events.iter().enumerate() {
        if e.x > 0xFF || e.y > 0xFF {
            return Err(CodecError::Format(format!(
                "event {i} coordinates ({}, {}) exceed the 8-bit N-Caltech range",
                e.x, e.y
            )));
        }
        if e.t >= 1 << 23 {
            return Err(CodecError::Format(format!(
                "event {i} timestamp {} exceeds the 23-bit N-Caltech range",
                e.t
            )));
        }
        let pol_bit = if e.p == 1 { 0x80u8 } else { 0 };
        let rec = [
            e.x as u8,
            e.y as u8,
            pol_bit | ((e.t >> 16) as u8 & 0x7F),
            (e.t >> 8) as u8,
            e.t as u8,
        ];
        w.write_all(&rec)?;
    }
    w.flush()?;
    Ok((NCALTECH_RECORD_BYTES * stream.len()) as u64)
}

fn read_csv(path: &Path, geometry: Option<(u16, u16)>) -> Result<EventStream, CodecError> {
    let r = BufReader::new(File::open(path)?);
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| CodecError::Format("empty CSV file".into()))??;
    if header.trim() != CSV_HEADER {
        return Err(CodecError::Format(format!(
            "bad CSV header '{}', expected '{CSV_HEADER}'",
            header.trim()
        )));
    }
    let mut events = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let mut next = |name: &str| -> Result<&str, CodecError> {
            fields
                .next()
                .ok_or_else(|| CodecError::Format(format!("line {}: missing {name}", lineno + 2)))
        };
        let x = parse_field::<u16>(next("x")?, "x", lineno)?;
        let y = parse_field::<u16>(next("y")?, "y", lineno)?;
        let t = parse_field::<u64>(next("t_us")?, "t_us", lineno)?;
        let p = parse_field::<i8>(next("p")?, "p", lineno)?;
        events.push(Event { x, y, t, p });
    }
    let (width, height) = match geometry {
        Some(g) => g,
        None => infer_geometry(&events),
    };
    Ok(EventStream { width, height, events })
}

fn parse_field<T: FromStr>(s: &str, name: &str, lineno: usize) -> Result<T, CodecError> {
    s.trim()
        .parse()
        .map_err(|_| CodecError::Format(format!("line {}: bad {name} value '{s}'", lineno + 2)))
}

fn infer_geometry(events: &[Event]) -> (u16, u16) {
    let w = events.iter().map(|e| e.x).max().map_or(0, |m| m + 1);
    let h = events.iter().map(|e| e.y).max().map_or(0, |m| m + 1);
    (w, h)
}

fn write_csv(stream: &EventStream, path: &Path) -> Result<u64, CodecError> {
    let mut w = BufWriter::new(File::create(path)?);
    let mut bytes = 0u64;
    let header = format!("{CSV_HEADER}\n");
    w.write_all(header.as_bytes())?;
    bytes += header.len() as u64;
    for e in &stream.events {
        let line = format!("{},{},{},{}\n", e.x, e.y, e.t, e.p);
        w.write_all(line.as_bytes())?;
        bytes += line.len() as u64;
    }
    w.flush()?;
    Ok(bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn ev(x: u16, y: u16, t: u64, p: i8) -> Event {
        Event { x, y, t, p }
    }

    #[test]
    fn evt1_header_only_for_empty_stream() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.evt1");
        let s = EventStream::new(16, 12);
        let n = write_events(&s, &path, EventFormat::Evt1).unwrap();
        assert_eq!(n, EVT1_HEADER_BYTES);
        assert_eq!(fs::metadata(&path).unwrap().len(), EVT1_HEADER_BYTES);
        let back = read_events(&path, EventFormat::Evt1, None).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn evt1_three_records_size_and_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("three.evt1");
        let s = EventStream::from_events(
            8,
            8,
            vec![ev(0, 0, 5, 1), ev(3, 2, 10, -1), ev(7, 7, 10, 1)],
        );
        let n = write_events(&s, &path, EventFormat::Evt1).unwrap();
        assert_eq!(n, EVT1_HEADER_BYTES + 3 * EVT1_RECORD_BYTES);
        assert_eq!(read_events(&path, EventFormat::Evt1, None).unwrap(), s);
    }

    #[test]
    fn evt1_rejects_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.evt1");
        fs::write(&path, b"NOPE\x01\x00\x08\x00\x08\x00\x00\x00\x00\x00\x00\x00\x00\x00").unwrap();
        let err = read_events(&path, EventFormat::Evt1, None).unwrap_err();
        assert!(matches!(err, CodecError::Format(_)), "{err}");
    }

    #[test]
    fn evt1_rejects_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trunc.evt1");
        let s = EventStream::from_events(8, 8, vec![ev(1, 1, 1, 1)]);
        write_events(&s, &path, EventFormat::Evt1).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(
            read_events(&path, EventFormat::Evt1, None),
            Err(CodecError::Format(_))
        ));
    }

    #[test]
    fn evt1_reader_rejects_out_of_bounds() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("oob.evt1");
        // Write with a roomy geometry, then shrink the declared width bytes.
        let s = EventStream::from_events(8, 8, vec![ev(7, 0, 1, 1)]);
        write_events(&s, &path, EventFormat::Evt1).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes[6] = 4; // width LE low byte
        bytes[7] = 0;
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            read_events(&path, EventFormat::Evt1, None),
            Err(CodecError::Bounds(_))
        ));
    }

    #[test]
    fn ncaltech_decodes_hand_packed_record() {
        // Polarity bit set, 23-bit timestamp field = 1000 us, at (5, 9).
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("one.bin");
        let t = 1000u64;
        let rec = [5u8, 9u8, 0x80 | ((t >> 16) as u8 & 0x7F), (t >> 8) as u8, t as u8];
        fs::write(&path, rec).unwrap();
        let s = read_events(&path, EventFormat::NcaltechBin, Some((304, 240))).unwrap();
        assert_eq!(s.events, vec![ev(5, 9, 1000, 1)]);
        assert_eq!((s.width, s.height), (304, 240));
    }

    #[test]
    fn ncaltech_requires_geometry() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("one.bin");
        fs::write(&path, [0u8; 5]).unwrap();
        assert!(matches!(
            read_events(&path, EventFormat::NcaltechBin, None),
            Err(CodecError::MissingGeometry(EventFormat::NcaltechBin))
        ));
    }

    #[test]
    fn ncaltech_rejects_partial_record() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("short.bin");
        fs::write(&path, [0u8; 7]).unwrap();
        assert!(matches!(
            read_events(&path, EventFormat::NcaltechBin, Some((304, 240))),
            Err(CodecError::Format(_))
        ));
    }

    #[test]
    fn ncaltech_roundtrip_within_range() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rt.bin");
        let s = EventStream::from_events(
            240,
            180,
            vec![ev(0, 0, 0, -1), ev(120, 90, 4000, 1), ev(239, 179, (1 << 23) - 1, 1)],
        );
        write_events(&s, &path, EventFormat::NcaltechBin).unwrap();
        let back = read_events(&path, EventFormat::NcaltechBin, Some((240, 180))).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn ncaltech_write_rejects_wide_coordinates() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("wide.bin");
        let s = EventStream::from_events(400, 100, vec![ev(300, 0, 0, 1)]);
        assert!(matches!(
            write_events(&s, &path, EventFormat::NcaltechBin),
            Err(CodecError::Format(_))
        ));
    }

    #[test]
    fn csv_roundtrip_with_geometry() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rt.csv");
        let s = EventStream::from_events(32, 24, vec![ev(1, 2, 3, 1), ev(4, 5, 6, -1)]);
        write_events(&s, &path, EventFormat::Csv).unwrap();
        let back = read_events(&path, EventFormat::Csv, Some((32, 24))).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn csv_infers_geometry_when_absent() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("infer.csv");
        let s = EventStream::from_events(6, 8, vec![ev(5, 7, 3, 1)]);
        write_events(&s, &path, EventFormat::Csv).unwrap();
        let back = read_events(&path, EventFormat::Csv, None).unwrap();
        assert_eq!((back.width, back.height), (6, 8));
    }

    #[test]
    fn csv_rejects_bad_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "a,b,c,d\n1,2,3,1\n").unwrap();
        assert!(matches!(
            read_events(&path, EventFormat::Csv, None),
            Err(CodecError::Format(_))
        ));
    }

    #[test]
    fn reader_rejects_unsorted_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("unsorted.csv");
        fs::write(&path, "x,y,t_us,p\n0,0,5,1\n0,0,2,1\n").unwrap();
        assert!(matches!(
            read_events(&path, EventFormat::Csv, None),
            Err(CodecError::Format(_))
        ));
    }

    #[test]
    fn format_parses_from_str() {
        assert_eq!("evt1".parse::<EventFormat>().unwrap(), EventFormat::Evt1);
        assert_eq!("ncaltech".parse::<EventFormat>().unwrap(), EventFormat::NcaltechBin);
        assert_eq!("CSV".parse::<EventFormat>().unwrap(), EventFormat::Csv);
        assert!("aedat".parse::<EventFormat>().is_err());
    }
}
