//! Wall-clock helpers. Timestamps are stored in UTC; every calendar quantity
//! (day, hour, weekday, ISO week) is taken in the corpus' local time zone.

use chrono::{DateTime, Datelike, NaiveDateTime, TimeZone, Timelike, Utc};
use num_traits::Euclid;

/// Maps UTC instants to local wall-clock time.
///
/// Implemented for every [`chrono::TimeZone`], so `Utc`, `FixedOffset` and
/// IANA zones from `chrono-tz` can all be used directly.
pub trait LocalClock {
    fn local(&self, t: DateTime<Utc>) -> NaiveDateTime;

    /// Days since 0001-01-01 in local time.
    fn day(&self, t: DateTime<Utc>) -> i64 {
        i64::from(self.local(t).date().num_days_from_ce())
    }

    /// Local hour of day with minutes as a fraction, in `[0, 24)`.
    fn hour_of_day(&self, t: DateTime<Utc>) -> f64 {
        let l = self.local(t);
        f64::from(l.hour()) + f64::from(l.minute()) / 60.0 + f64::from(l.second()) / 3600.0
    }
}

impl<Tz: TimeZone> LocalClock for Tz {
    fn local(&self, t: DateTime<Utc>) -> NaiveDateTime {
        t.with_timezone(self).naive_local()
    }
}

/// Hour of day shifted back by six hours, modulo 24, so that night shifts
/// starting at 23:00 and 00:00 map to 17 and 18 instead of straddling the
/// midnight wrap.
pub fn adjusted_start_hour(hour_of_day: f64) -> f64 {
    Euclid::rem_euclid(&(hour_of_day - 6.0), &24.0)
}

/// Calendar components used as categorical time controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeBins {
    pub hour: u32,
    pub weekday: u32,
    pub iso_week: u32,
    pub year: i32,
}

impl TimeBins {
    pub fn of(clock: &impl LocalClock, t: DateTime<Utc>) -> Self {
        let l = clock.local(t);
        Self {
            hour: l.hour(),
            weekday: l.weekday().num_days_from_monday(),
            iso_week: l.iso_week().week(),
            year: l.year(),
        }
    }
}
