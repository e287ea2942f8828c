use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use flate2::read::GzDecoder;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const MAX_RATING: i8 = 10;

/// One timestamped rating from `source` to `target`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RatingEvent {
    pub source: u64,
    pub target: u64,
    pub rating: i8,
    /// Seconds since the Unix epoch.
    pub timestamp: i64,
}

/// Parsed rating file, sorted by timestamp (ties keep file order).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RatingLog {
    pub events: Vec<RatingEvent>,
    pub rows_read: usize,
    pub self_loops_dropped: usize,
}

/// Reads a `source,target,rating,time` CSV, plain or gzip-compressed.
pub fn parse_ratings(path: impl AsRef<Path>) -> Result<RatingLog> {
    let path = path.as_ref();
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut magic = [0u8; 2];
    let n = file.read(&mut magic).map_err(|e| Error::io(path, e))?;
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    if n == 2 && magic == [0x1f, 0x8b] {
        parse_ratings_from(BufReader::new(GzDecoder::new(file)))
    } else {
        parse_ratings_from(BufReader::new(file))
    }
    .map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

/// Parses rating rows from any reader. Blank lines and `#` comments are
/// skipped, as is a leading header whose first field is `source`.
pub fn parse_ratings_from<R: BufRead>(reader: R) -> Result<RatingLog> {
    let mut events = Vec::new();
    let mut rows_read = 0;
    let mut self_loops_dropped = 0;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io("<ratings>", e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if rows_read == 0
            && events.is_empty()
            && line
                .split(',')
                .next()
                .is_some_and(|f| f.trim().eq_ignore_ascii_case("source"))
        {
            continue;
        }
        rows_read += 1;
        let event = parse_row(line, line_no)?;
        if event.source == event.target {
            self_loops_dropped += 1;
            continue;
        }
        events.push(event);
    }
    // Stable: equal timestamps keep their file order.
    events.sort_by_key(|e| e.timestamp);
    Ok(RatingLog {
        events,
        rows_read,
        self_loops_dropped,
    })
}

fn parse_row(line: &str, line_no: usize) -> Result<RatingEvent> {
    let err = |message: String| Error::Parse {
        line: line_no,
        message,
    };
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != 4 {
        return Err(err(format!("expected 4 fields, found {}", fields.len())));
    }
    let source = fields[0]
        .parse::<u64>()
        .map_err(|_| err(format!("source `{}` is not a non-negative integer", fields[0])))?;
    let target = fields[1]
        .parse::<u64>()
        .map_err(|_| err(format!("target `{}` is not a non-negative integer", fields[1])))?;
    let rating = fields[2]
        .parse::<i64>()
        .map_err(|_| err(format!("rating `{}` is not an integer", fields[2])))?;
    if rating == 0 || rating.abs() > MAX_RATING as i64 {
        return Err(err(format!("rating {rating} outside [-10, 10] \\ {{0}}")));
    }
    let timestamp = parse_timestamp(fields[3]).ok_or_else(|| err(format!("bad timestamp `{}`", fields[3])))?;
    Ok(RatingEvent {
        source,
        target,
        rating: rating as i8,
        timestamp,
    })
}

/// Integer seconds; fractional seconds (present in some public dumps) are
/// floored.
fn parse_timestamp(field: &str) -> Option<i64> {
    if let Ok(t) = field.parse::<i64>() {
        return Some(t);
    }
    let f = field.parse::<f64>().ok()?;
    (f.is_finite() && f.abs() < 9.0e15).then(|| f.floor() as i64)
}
