use std::str::FromStr;

use chrono::{DateTime, Datelike, Duration, NaiveTime, TimeZone, Utc, Weekday};
use chrono_tz::Tz;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScheduleError {
    #[error("unknown weekday {0:?}")]
    Weekday(String),
    #[error("release time {0:?} is not HH:MM")]
    Time(String),
    #[error("unknown timezone {0:?}")]
    Timezone(String),
}

/// Written form, as it appears in configuration files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReleaseScheduleConfig {
    pub weekday: String,
    pub time: String,
    pub timezone: String,
}

impl Default for ReleaseScheduleConfig {
    fn default() -> Self {
        Self { weekday: "Mon".into(), time: "00:00".into(), timezone: "UTC".into() }
    }
}

/// Weekly release instant for delayed feedback.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReleaseSchedule {
    pub weekday: Weekday,
    pub time: NaiveTime,
    pub timezone: Tz,
}

impl Default for ReleaseSchedule {
    fn default() -> Self {
        Self { weekday: Weekday::Mon, time: NaiveTime::MIN, timezone: Tz::UTC }
    }
}

impl TryFrom<&ReleaseScheduleConfig> for ReleaseSchedule {
    type Error = ScheduleError;

    fn try_from(c: &ReleaseScheduleConfig) -> Result<Self, ScheduleError> {
        let weekday = Weekday::from_str(&c.weekday).map_err(|_| ScheduleError::Weekday(c.weekday.clone()))?;
        let time = NaiveTime::parse_from_str(&c.time, "%H:%M")
            .or_else(|_| NaiveTime::parse_from_str(&c.time, "%H:%M:%S"))
            .map_err(|_| ScheduleError::Time(c.time.clone()))?;
        let timezone = Tz::from_str(&c.timezone).map_err(|_| ScheduleError::Timezone(c.timezone.clone()))?;
        Ok(Self { weekday, time, timezone })
    }
}

impl ReleaseSchedule {
    /// First release instant strictly after `now`.
    pub fn next_after(&self, now: DateTime<Utc>) -> DateTime<Utc> {
        let local_date = now.with_timezone(&self.timezone).date_naive();
        for offset in 0..=14 {
            let date = local_date + Duration::days(offset);
            if date.weekday() != self.weekday {
                continue;
            }
            // A release time inside a DST gap moves to the first valid minute after it.
            let mut naive = date.and_time(self.time);
            let instant = loop {
                if let Some(t) = self.timezone.from_local_datetime(&naive).earliest() {
                    break t.with_timezone(&Utc);
                }
                naive += Duration::minutes(1);
            };
            if instant > now {
                return instant;
            }
        }
        unreachable!("a matching weekday occurs within two weeks")
    }
}
