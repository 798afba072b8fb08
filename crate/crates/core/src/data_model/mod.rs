//! Time-series types, CSV ingestion and alignment onto a shared UTC minute grid.

mod channel;
mod io;
mod recording;
mod series;
mod time;

pub use channel::ChannelId;
pub use io::{
    load_cohort, load_participant_dir, parse_channel_csv, write_recording, write_series_csv,
    ParsedChannel,
};
pub use recording::{assemble_recording, coverage_intervals, Interval, ParticipantRecording};
pub use series::{align_to_minute_grid, RawSeries, SampleSeries};
pub use time::{format_utc, parse_utc, Timestamp, MINUTES_PER_DAY};
