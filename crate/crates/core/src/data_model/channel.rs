use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Sensor channels known to the pipeline. `AccNet` is derived from the three
/// accelerometer axes and is never read from disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelId {
    LightLux,
    MotionCounts,
    AccX,
    AccY,
    AccZ,
    AccNet,
    HeartRate,
    SkinTemp,
    Cbt,
}

impl ChannelId {
    pub const ALL: [ChannelId; 9] = [
        ChannelId::LightLux,
        ChannelId::MotionCounts,
        ChannelId::AccX,
        ChannelId::AccY,
        ChannelId::AccZ,
        ChannelId::AccNet,
        ChannelId::HeartRate,
        ChannelId::SkinTemp,
        ChannelId::Cbt,
    ];

    /// Channels that may appear as input files.
    pub const INGESTED: [ChannelId; 8] = [
        ChannelId::LightLux,
        ChannelId::MotionCounts,
        ChannelId::AccX,
        ChannelId::AccY,
        ChannelId::AccZ,
        ChannelId::HeartRate,
        ChannelId::SkinTemp,
        ChannelId::Cbt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ChannelId::LightLux => "light_lux",
            ChannelId::MotionCounts => "motion_counts",
            ChannelId::AccX => "acc_x",
            ChannelId::AccY => "acc_y",
            ChannelId::AccZ => "acc_z",
            ChannelId::AccNet => "acc_net",
            ChannelId::HeartRate => "heart_rate",
            ChannelId::SkinTemp => "skin_temp",
            ChannelId::Cbt => "cbt",
        }
    }

    pub fn is_derived(self) -> bool {
        self == ChannelId::AccNet
    }
}

impl fmt::Display for ChannelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ChannelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ChannelId::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::UnknownChannel(s.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for c in ChannelId::ALL {
            assert_eq!(c.name().parse::<ChannelId>().unwrap(), c);
        }
        assert!("lux".parse::<ChannelId>().is_err());
    }

    #[test]
    fn acc_net_is_not_ingested() {
        assert!(!ChannelId::INGESTED.contains(&ChannelId::AccNet));
        assert!(ChannelId::AccNet.is_derived());
    }
}
