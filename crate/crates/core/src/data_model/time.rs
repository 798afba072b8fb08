use std::fmt;

use chrono::{DateTime, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MINUTES_PER_DAY: i64 = 1440;

const FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";

/// Whole minutes since the Unix epoch, UTC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Timestamp(pub i64);

impl Timestamp {
    pub fn minutes(self) -> i64 {
        self.0
    }

    /// Minute of the UTC day, in `0..1440`.
    pub fn minute_of_day(self) -> i64 {
        self.0.rem_euclid(MINUTES_PER_DAY)
    }

    /// Floors a second-resolution instant to its minute.
    pub fn from_seconds_floor(seconds: i64) -> Self {
        Timestamp(seconds.div_euclid(60))
    }

    pub fn to_seconds(self) -> i64 {
        self.0 * 60
    }

    pub fn offset(self, minutes: i64) -> Self {
        Timestamp(self.0 + minutes)
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_utc(self.to_seconds()))
    }
}

/// Parses `YYYY-MM-DDTHH:MM:SSZ` into seconds since the epoch.
pub fn parse_utc(s: &str) -> Result<i64> {
    let dt = NaiveDateTime::parse_from_str(s.trim(), FORMAT)
        .map_err(|_| Error::BadTimestamp(s.to_string()))?;
    let secs = dt.and_utc().timestamp();
    if secs < 0 {
        return Err(Error::BadTimestamp(s.to_string()));
    }
    Ok(secs)
}

pub fn format_utc(seconds: i64) -> String {
    DateTime::from_timestamp(seconds, 0)
        .map(|d| d.format(FORMAT).to_string())
        .unwrap_or_else(|| format!("invalid({seconds})"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_format_round_trip() {
        let s = "2021-03-01T07:05:09Z";
        let secs = parse_utc(s).unwrap();
        assert_eq!(format_utc(secs), s);
        assert_eq!(
            Timestamp::from_seconds_floor(secs).minute_of_day(),
            7 * 60 + 5
        );
    }

    #[test]
    fn rejects_garbage_and_pre_epoch() {
        assert!(parse_utc("yesterday").is_err());
        assert!(parse_utc("1969-12-31T23:59:00Z").is_err());
        assert!(parse_utc("2021-03-01 07:05:09").is_err());
    }

    #[test]
    fn display_is_iso() {
        assert_eq!(Timestamp(0).to_string(), "1970-01-01T00:00:00Z");
        assert_eq!(Timestamp(1441).to_string(), "1970-01-02T00:01:00Z");
    }
}
