use crate::error::{PrefError, Result};

/// Coarse-to-fine frequency release.
///
/// Frequencies are expressed as an equivalent grid resolution: at a limit of
/// `R`, a coefficient is trainable when every component satisfies
/// `2 |f| <= R`. A volume of resolution `N` is fully released at `R = N`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct UnlockSchedule {
    /// `(first step, limit)` pairs, sorted by step.
    stages: Vec<(u64, usize)>,
}

impl UnlockSchedule {
    /// No masking at any step.
    pub fn disabled() -> Self {
        Self::default()
    }

    /// Start at `initial` and switch to each `(step, limit)` in turn.
    pub fn new(initial: usize, stages: &[(u64, usize)]) -> Result<Self> {
        let mut all = vec![(0u64, initial)];
        all.extend_from_slice(stages);
        Self::from_stages(all)
    }

    fn from_stages(stages: Vec<(u64, usize)>) -> Result<Self> {
        for w in stages.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(PrefError::Usage(
                    "unlock steps must be strictly increasing".into(),
                ));
            }
            if w[1].1 < w[0].1 {
                return Err(PrefError::Usage(
                    "unlock limits must not decrease".into(),
                ));
            }
        }
        Ok(Self { stages })
    }

    /// Radiance-field schedule: 128 at the start, 256 from step 7000, with the
    /// intermediate limits spaced evenly between the listed release steps.
    pub fn coarse_to_fine_128_256() -> Self {
        let steps = [2000u64, 3000, 4000, 5500, 7000];
        let stages: Vec<(u64, usize)> = steps
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                let limit = 128.0 + 128.0 * (i as f64 + 1.0) / steps.len() as f64;
                (s, limit.round() as usize)
            })
            .collect();
        Self::new(128, &stages).expect("static schedule is valid")
    }

    /// Parse `"s1:f1,s2:f2,..."`. Without a step-0 entry the first limit
    /// applies from the start.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        if text.is_empty() {
            return Ok(Self::disabled());
        }
        let mut stages = Vec::new();
        for part in text.split(',') {
            let (s, f) = part
                .split_once(':')
                .ok_or_else(|| PrefError::Usage(format!("bad unlock entry '{part}'")))?;
            let s: u64 = s
                .trim()
                .parse()
                .map_err(|_| PrefError::Usage(format!("bad unlock step '{s}'")))?;
            let f: usize = f
                .trim()
                .parse()
                .map_err(|_| PrefError::Usage(format!("bad unlock limit '{f}'")))?;
            stages.push((s, f));
        }
        if stages[0].0 != 0 {
            stages[0].0 = 0;
        }
        Self::from_stages(stages)
    }

    pub fn is_disabled(&self) -> bool {
        self.stages.is_empty()
    }

    /// Limit in force at `step`, or `None` when nothing is masked.
    pub fn max_frequency(&self, step: u64) -> Option<usize> {
        self.stages
            .iter()
            .take_while(|(s, _)| *s <= step)
            .last()
            .map(|(_, f)| *f)
    }

    /// Whether a frequency vector is trainable under `limit`.
    pub fn admits(limit: usize, freq: &[i64]) -> bool {
        freq.iter().all(|&f| 2 * f.unsigned_abs() as usize <= limit)
    }

    pub fn stages(&self) -> &[(u64, usize)] {
        &self.stages
    }
}

/// Piecewise-constant learning rate.
#[derive(Debug, Clone, PartialEq)]
pub struct LrSchedule {
    base: f64,
    changes: Vec<(u64, f64)>,
}

impl LrSchedule {
    pub fn constant(lr: f64) -> Self {
        Self {
            base: lr,
            changes: Vec::new(),
        }
    }

    /// `lr` until `step`, then `later`.
    pub fn step_decay(lr: f64, step: u64, later: f64) -> Self {
        Self {
            base: lr,
            changes: vec![(step, later)],
        }
    }

    pub fn at(&self, step: u64) -> f64 {
        self.changes
            .iter()
            .take_while(|(s, _)| *s <= step)
            .last()
            .map_or(self.base, |(_, lr)| *lr)
    }

    pub fn base(&self) -> f64 {
        self.base
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_schedule_endpoints() {
        let s = UnlockSchedule::coarse_to_fine_128_256();
        assert_eq!(s.max_frequency(0), Some(128));
        assert_eq!(s.max_frequency(1999), Some(128));
        assert_eq!(s.max_frequency(2000), Some(154));
        assert_eq!(s.max_frequency(7000), Some(256));
        assert_eq!(s.max_frequency(1_000_000), Some(256));
    }

    #[test]
    fn empty_schedule_masks_nothing() {
        let s = UnlockSchedule::disabled();
        assert_eq!(s.max_frequency(0), None);
        assert_eq!(UnlockSchedule::parse("").unwrap().max_frequency(5), None);
    }

    #[test]
    fn parse_round_trip() {
        let s = UnlockSchedule::parse("0:8, 100:16,200:32").unwrap();
        assert_eq!(s.max_frequency(50), Some(8));
        assert_eq!(s.max_frequency(150), Some(16));
        assert!(UnlockSchedule::parse("0:8,0:16").is_err());
        assert!(UnlockSchedule::parse("0:8,5").is_err());
    }

    #[test]
    fn admits_by_resolution() {
        assert!(UnlockSchedule::admits(16, &[8, -8, 0]));
        assert!(!UnlockSchedule::admits(16, &[9, 0, 0]));
    }

    #[test]
    fn lr_decay() {
        let s = LrSchedule::step_decay(1e-4, 10, 1e-5);
        assert_eq!(s.at(9), 1e-4);
        assert_eq!(s.at(10), 1e-5);
    }
}
