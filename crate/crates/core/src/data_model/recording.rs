use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ChannelId, SampleSeries, Timestamp};
use crate::error::{Error, Result};

/// Native CBT sampling interval; raw CBT arrives every 5 minutes.
pub(crate) const CBT_NATIVE_STEP: i64 = 5;

/// Closed interval `[start, end]` of grid minutes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval {
    pub start: Timestamp,
    pub end: Timestamp,
}

impl Interval {
    pub fn contains(&self, t: Timestamp) -> bool {
        self.start <= t && t <= self.end
    }

    pub fn span_minutes(&self) -> i64 {
        self.end.0 - self.start.0
    }
}

/// All channels of one participant on one shared minute grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantRecording {
    pub participant_id: String,
    pub channels: BTreeMap<ChannelId, SampleSeries>,
    pub cbt: SampleSeries,
    pub cbt_coverage: Vec<Interval>,
}

impl ParticipantRecording {
    pub fn channel(&self, id: ChannelId) -> Option<&SampleSeries> {
        if id == ChannelId::Cbt {
            Some(&self.cbt)
        } else {
            self.channels.get(&id)
        }
    }

    pub fn origin(&self) -> Timestamp {
        self.cbt.start
    }

    pub fn len(&self) -> usize {
        self.cbt.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cbt.is_empty()
    }

    /// Recomputes coverage from the current CBT validity with no gap tolerance.
    pub fn refresh_coverage(&mut self) {
        self.cbt_coverage = coverage_intervals(&self.cbt, 0);
    }
}

/// Maximal runs of valid samples, allowing up to `max_gap` consecutive invalid
/// minutes inside a run.
pub fn coverage_intervals(s: &SampleSeries, max_gap: usize) -> Vec<Interval> {
    let mut out = Vec::new();
    let mut current: Option<(usize, usize)> = None;
    for i in (0..s.len()).filter(|&i| s.valid()[i]) {
        current = match current {
            Some((a, last)) if i - last - 1 <= max_gap => Some((a, i)),
            Some((a, last)) => {
                out.push(Interval {
                    start: s.timestamp(a),
                    end: s.timestamp(last),
                });
                Some((i, i))
            }
            None => Some((i, i)),
        };
    }
    if let Some((a, last)) = current {
        out.push(Interval {
            start: s.timestamp(a),
            end: s.timestamp(last),
        });
    }
    out
}

/// Groups aligned series into a recording. CBT coverage tolerates the gaps of
/// the native 5-minute CBT sampling.
pub fn assemble_recording(
    participant_id: &str,
    series: Vec<SampleSeries>,
    cbt: SampleSeries,
) -> Result<ParticipantRecording> {
    let cbt = cbt.to_minute_grid().with_channel(ChannelId::Cbt);
    let mut channels = BTreeMap::new();
    for s in series {
        if s.channel == ChannelId::Cbt {
            return Err(Error::DuplicateChannel(ChannelId::Cbt));
        }
        if !s.same_grid(&cbt) {
            return Err(Error::GridMismatch(format!(
                "{} grid (start {}, step {}, len {}) differs from cbt (start {}, step {}, len {})",
                s.channel,
                s.start.0,
                s.step_minutes,
                s.len(),
                cbt.start.0,
                cbt.step_minutes,
                cbt.len()
            )));
        }
        let ch = s.channel;
        if channels.insert(ch, s).is_some() {
            return Err(Error::DuplicateChannel(ch));
        }
    }
    let cbt_coverage = coverage_intervals(&cbt, (CBT_NATIVE_STEP - 1) as usize);
    Ok(ParticipantRecording {
        participant_id: participant_id.to_string(),
        channels,
        cbt,
        cbt_coverage,
    })
}
