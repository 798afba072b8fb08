use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{
    align_to_minute_grid, assemble_recording, format_utc, parse_utc, ChannelId,
    ParticipantRecording, RawSeries, SampleSeries,
};
use crate::error::{Error, Result};

const HEADER: &str = "timestamp_utc,value";

/// Result of parsing one channel file.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedChannel {
    pub series: RawSeries,
    /// Rows dropped for an unparseable timestamp or a non-finite value.
    pub skipped: usize,
}

/// Parses a `timestamp_utc,value` CSV document.
pub fn parse_channel_csv(text: &str, channel: ChannelId) -> Result<ParsedChannel> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .unwrap_or("")
        .trim_start_matches('\u{feff}')
        .trim_end_matches('\r');
    if header != HEADER {
        return Err(Error::HeaderMismatch {
            expected: HEADER.to_string(),
            found: header.to_string(),
        });
    }
    let mut points = Vec::new();
    let mut skipped = 0;
    for line in lines {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let parsed = line.split_once(',').and_then(|(ts, v)| {
            let secs = parse_utc(ts).ok()?;
            let v: f64 = v.trim().parse().ok()?;
            v.is_finite().then_some((secs, v))
        });
        match parsed {
            Some(p) => points.push(p),
            None => skipped += 1,
        }
    }
    if points.is_empty() {
        return Err(Error::EmptyFile);
    }
    if skipped > 0 {
        log::warn!("{channel}: skipped {skipped} malformed rows");
    }
    Ok(ParsedChannel {
        series: RawSeries::new(channel, points),
        skipped,
    })
}

/// Serializes the valid slots of a series in the input CSV layout.
pub fn write_series_csv(s: &SampleSeries) -> String {
    let mut out = String::with_capacity(32 * s.valid_count() + 32);
    out.push_str(HEADER);
    out.push('\n');
    for (t, v) in s.valid_points() {
        let _ = writeln!(out, "{},{}", format_utc(t.to_seconds()), v);
    }
    out
}

/// Loads `<dir>/<channel>.csv` files for one participant and aligns them onto
/// a grid starting at the earliest minute seen in any channel.
pub fn load_participant_dir(dir: &Path) -> Result<ParticipantRecording> {
    let participant_id = dir
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::Config(format!("bad participant directory {}", dir.display())))?
        .to_string();
    let mut raws = Vec::new();
    for ch in ChannelId::INGESTED {
        let path = dir.join(format!("{}.csv", ch.name()));
        if !path.exists() {
            continue;
        }
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        raws.push(parse_channel_csv(&text, ch)?.series);
    }
    if !raws.iter().any(|r| r.channel == ChannelId::Cbt) {
        return Err(Error::Io {
            path: dir.join("cbt.csv").display().to_string(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "missing CBT file"),
        });
    }
    let origin = raws
        .iter()
        .filter_map(|r| r.first_minute())
        .min()
        .ok_or(Error::EmptyFile)?;
    let last = raws
        .iter()
        .filter_map(|r| r.last_minute())
        .max()
        .ok_or(Error::EmptyFile)?;
    let len = (last.0 - origin.0 + 1) as usize;

    let mut series = Vec::new();
    let mut cbt = None;
    for raw in &raws {
        let s = align_to_minute_grid(raw, origin, len)?;
        if raw.channel == ChannelId::Cbt {
            cbt = Some(s);
        } else {
            series.push(s);
        }
    }
    assemble_recording(&participant_id, series, cbt.expect("checked above"))
}

/// Loads every participant directory under `data_dir`, sorted by id.
pub fn load_cohort(data_dir: &Path) -> Result<Vec<ParticipantRecording>> {
    let mut dirs: Vec<_> = fs::read_dir(data_dir)
        .map_err(|e| Error::io(data_dir, e))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::EmptyFile);
    }
    dirs.iter().map(|d| load_participant_dir(d)).collect()
}

/// Writes a recording as `<dir>/<participant_id>/<channel>.csv`. Derived
/// channels are not written.
pub fn write_recording(dir: &Path, rec: &ParticipantRecording) -> Result<()> {
    let pdir = dir.join(&rec.participant_id);
    fs::create_dir_all(&pdir).map_err(|e| Error::io(&pdir, e))?;
    for s in rec
        .channels
        .values()
        .filter(|s| !s.channel.is_derived())
        .chain(std::iter::once(&rec.cbt))
    {
        let path = pdir.join(format!("{}.csv", s.channel.name()));
        fs::write(&path, write_series_csv(s)).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
