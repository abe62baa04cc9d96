use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::Shift;
use crate::stats::sample_variance;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircadianMeasure {
    pub shift_id: String,
    /// Sample variance of adjusted start hours over the physician's shifts
    /// starting in the seven days ending with this shift's day.
    pub start_time_variance: f64,
}

pub fn circadian_variance(shifts: &[Shift]) -> Vec<CircadianMeasure> {
    let mut by_physician: BTreeMap<&str, Vec<&Shift>> = BTreeMap::new();
    for s in shifts {
        by_physician.entry(&s.physician_id).or_default().push(s);
    }
    shifts
        .iter()
        .map(|s| {
            let hours: Vec<f64> = by_physician[s.physician_id.as_str()]
                .iter()
                .filter(|o| o.day >= s.day - 6 && (o.day < s.day || (o.day == s.day && o.start <= s.start)))
                .map(|o| o.start_hour_adjusted)
                .collect();
            CircadianMeasure { shift_id: s.shift_id.clone(), start_time_variance: sample_variance(&hours) }
        })
        .collect()
}
