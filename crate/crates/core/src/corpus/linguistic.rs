use std::fmt;
use std::str::FromStr;

use super::types::{Speaker, WordToken};
use crate::error::{Error, Result};
use crate::multiscale::{TimedInput, Timescale};

/// Words reach the model this long after they end.
pub const DEFAULT_WORD_DELAY_MS: f64 = 100.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Deserialize, serde::Serialize)]
#[serde(try_from = "String", into = "String")]
pub enum LinguisticMode {
    Regular50ms,
    Regular10ms,
    Asynchronous,
}

impl LinguisticMode {
    pub fn period_ms(self) -> Option<f64> {
        match self {
            LinguisticMode::Regular50ms => Some(50.0),
            LinguisticMode::Regular10ms => Some(10.0),
            LinguisticMode::Asynchronous => None,
        }
    }

    pub fn timescale(self) -> Timescale {
        self.period_ms().map_or(Timescale::Asynchronous, Timescale::regular)
    }
}

impl fmt::Display for LinguisticMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LinguisticMode::Regular50ms => "50ms",
            LinguisticMode::Regular10ms => "10ms",
            LinguisticMode::Asynchronous => "async",
        })
    }
}

impl TryFrom<String> for LinguisticMode {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<LinguisticMode> for String {
    fn from(m: LinguisticMode) -> String {
        m.to_string()
    }
}

impl FromStr for LinguisticMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "50ms" | "regular_50ms" => Ok(LinguisticMode::Regular50ms),
            "10ms" | "regular_10ms" => Ok(LinguisticMode::Regular10ms),
            "async" | "asynchronous" => Ok(LinguisticMode::Asynchronous),
            other => Err(Error::Config(format!("unknown linguistic mode `{other}`"))),
        }
    }
}

const TOL: f64 = 1e-9;

/// Turns word tokens into timed token events, one slot per entry of `slots`.
///
/// A word becomes available `delay_ms` after it ends. Regular modes snap that
/// instant up to the next grid point and emit an event at every grid point
/// (empty slots where no word arrived); when two words of one speaker land on
/// the same grid point the later-ending one wins. Asynchronous mode emits at
/// the exact arrival times only. Arrivals after `duration_s` are dropped.
pub fn linguistic_events(
    words: &[WordToken],
    slots: &[Speaker],
    mode: LinguisticMode,
    delay_ms: f64,
    duration_s: f64,
) -> Vec<TimedInput> {
    let delay = delay_ms / 1000.0;
    let mut sorted: Vec<&WordToken> = words.iter().filter(|w| slots.contains(&w.speaker)).collect();
    sorted.sort_by(|a, b| a.end_s.total_cmp(&b.end_s));
    let slot_of = |sp: Speaker| slots.iter().position(|&s| s == sp).expect("filtered");

    match mode.period_ms() {
        Some(period_ms) => {
            let p = period_ms / 1000.0;
            let n = (duration_s / p + TOL).floor() as usize;
            let mut grid: Vec<Vec<Option<(usize, f64)>>> = vec![vec![None; slots.len()]; n + 1];
            for w in sorted {
                let k = ((w.end_s + delay) / p - TOL).ceil().max(1.0) as usize;
                if k > n {
                    continue;
                }
                let cell = &mut grid[k][slot_of(w.speaker)];
                if let Some((prev, prev_end)) = *cell {
                    log::warn!(
                        "word {prev} (ends {prev_end}s) collides with word {} on the {period_ms}ms grid; keeping the later one",
                        w.vocab_id
                    );
                }
                *cell = Some((w.vocab_id, w.end_s));
            }
            (1..=n)
                .map(|k| TimedInput::tokens(k as f64 * p, grid[k].iter().map(|c| c.map(|(id, _)| id)).collect()))
                .collect()
        }
        None => {
            let mut events: Vec<TimedInput> = Vec::new();
            for w in sorted {
                let t = w.end_s + delay;
                if t > duration_s + TOL {
                    continue;
                }
                let slot = slot_of(w.speaker);
                match events.last_mut() {
                    Some(last) if (last.timestamp - t).abs() <= TOL => {
                        if let crate::multiscale::Payload::Tokens(ids) = &mut last.features {
                            ids[slot] = Some(w.vocab_id);
                        }
                    }
                    _ => {
                        let mut ids = vec![None; slots.len()];
                        ids[slot] = Some(w.vocab_id);
                        events.push(TimedInput::tokens(t, ids));
                    }
                }
            }
            events
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multiscale::Payload;

    fn word(speaker: Speaker, id: usize, start: f64, end: f64) -> WordToken {
        WordToken {
            speaker,
            vocab_id: id,
            start_s: start,
            end_s: end,
        }
    }

    fn arrivals(events: &[TimedInput]) -> Vec<(f64, Vec<Option<usize>>)> {
        events
            .iter()
            .filter_map(|e| match &e.features {
                Payload::Tokens(ids) if ids.iter().any(Option::is_some) => Some((e.timestamp, ids.clone())),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn regular_50ms_word_arrives_100ms_after_end() {
        let ev = linguistic_events(&[word(Speaker::A, 4, 0.7, 1.0)], &[Speaker::A, Speaker::B], LinguisticMode::Regular50ms, 100.0, 2.0);
        assert_eq!(ev.len(), 40);
        let a = arrivals(&ev);
        assert_eq!(a.len(), 1);
        assert!((a[0].0 - 1.10).abs() < 1e-9);
        assert_eq!(a[0].1, vec![Some(4), None]);
    }

    #[test]
    fn asynchronous_word_arrives_exactly() {
        let ev = linguistic_events(&[word(Speaker::B, 2, 0.7, 1.0)], &[Speaker::A, Speaker::B], LinguisticMode::Asynchronous, 100.0, 2.0);
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].timestamp, 1.0 + 0.1);
        assert_eq!(ev[0].features, Payload::Tokens(vec![None, Some(2)]));
    }

    #[test]
    fn nearby_words_snap_to_distinct_grid_points() {
        let words = [word(Speaker::A, 3, 0.8, 1.00), word(Speaker::A, 5, 1.0, 1.02)];
        let a = arrivals(&linguistic_events(&words, &[Speaker::A], LinguisticMode::Regular50ms, 100.0, 2.0));
        assert_eq!(a.len(), 2);
        assert!((a[0].0 - 1.10).abs() < 1e-9);
        assert!((a[1].0 - 1.15).abs() < 1e-9);
    }

    #[test]
    fn colliding_words_keep_the_later_one() {
        let words = [word(Speaker::A, 3, 0.9, 1.01), word(Speaker::A, 5, 1.01, 1.04)];
        let a = arrivals(&linguistic_events(&words, &[Speaker::A], LinguisticMode::Regular50ms, 100.0, 2.0));
        assert_eq!(a, vec![(a[0].0, vec![Some(5)])]);
        assert!((a[0].0 - 1.15).abs() < 1e-9);
    }

    #[test]
    fn ten_ms_grid_and_no_event_before_delay() {
        let words = [word(Speaker::A, 1, 0.5, 0.733), word(Speaker::B, 2, 0.2, 0.4)];
        for mode in [LinguisticMode::Regular10ms, LinguisticMode::Regular50ms, LinguisticMode::Asynchronous] {
            let ev = linguistic_events(&words, &[Speaker::A, Speaker::B], mode, 100.0, 1.5);
            for (t, ids) in arrivals(&ev) {
                for (slot, id) in ids.iter().enumerate() {
                    if id.is_some() {
                        let end = if slot == 0 { 0.733 } else { 0.4 };
                        assert!(t >= end + 0.1 - 1e-9, "{mode:?}: {t}");
                    }
                }
            }
        }
        let a = arrivals(&linguistic_events(&words, &[Speaker::A, Speaker::B], LinguisticMode::Regular10ms, 100.0, 1.5));
        assert!((a[1].0 - 0.84).abs() < 1e-9);
    }

    #[test]
    fn late_words_are_dropped() {
        let ev = linguistic_events(&[word(Speaker::A, 1, 0.5, 0.95)], &[Speaker::A], LinguisticMode::Asynchronous, 100.0, 1.0);
        assert!(ev.is_empty());
    }
}
