//! Synthetic two-party conversations with controllable turn-taking cues.
//!
//! Turns alternate between the speakers. Each turn is one or more inter-pausal
//! units (IPUs) separated by short holds; the next speaker starts after a gap
//! drawn around `gap_mean_s`, possibly overlapping the end of the turn. The
//! listener occasionally backchannels. Turn ends are marked by a falling pitch
//! feature in the final 500ms and, with probability `p_cue`, by a dedicated
//! last word.

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use super::types::{Conversation, FeatureStream, Span, SpeechActivity, Speaker, Vocabulary, WordToken};
use crate::error::{Error, Result};

pub const TURN_FINAL_WORD: &str = "okay";
pub const BACKCHANNEL_WORD: &str = "mhm";
pub const ACOUSTIC_MODALITY: &str = "acoustic";
pub const GAZE_MODALITY: &str = "gaze";
pub const ACOUSTIC_DIM: usize = 3;
pub const GAZE_DIM: usize = 7;

const PROSODY_WINDOW_S: f64 = 0.5;
const GAZE_WINDOW_S: f64 = 1.0;
const BACKCHANNEL_WINDOW_S: f64 = 1.5;
const MIN_GAP_TO_SELF_S: f64 = 0.1;
const WORD_MIN_S: f64 = 0.2;
const WORD_MAX_S: f64 = 0.6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub duration_s: f64,
    pub mean_turn_s: f64,
    pub min_turn_s: f64,
    /// Chance of each further hold pause inside a turn (geometric count).
    pub p_hold_pause: f64,
    pub max_hold_pauses: usize,
    pub hold_pause_min_s: f64,
    pub hold_pause_max_s: f64,
    pub min_ipu_s: f64,
    pub gap_mean_s: f64,
    pub gap_sd_s: f64,
    pub max_overlap_s: f64,
    pub p_backchannel: f64,
    pub backchannel_min_s: f64,
    pub backchannel_max_s: f64,
    pub p_cue: f64,
    pub regular_words: usize,
    pub acoustic_period_ms: f64,
    pub energy_level: f64,
    pub prosody_strength: f64,
    pub noise: f64,
    pub gaze: bool,
    pub gaze_rate_hz: f64,
    pub gaze_strength: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            duration_s: 60.0,
            mean_turn_s: 4.0,
            min_turn_s: 1.2,
            p_hold_pause: 0.5,
            max_hold_pauses: 3,
            hold_pause_min_s: 0.2,
            hold_pause_max_s: 1.2,
            min_ipu_s: 0.3,
            gap_mean_s: 0.3,
            gap_sd_s: 0.35,
            max_overlap_s: 0.3,
            p_backchannel: 0.5,
            backchannel_min_s: 0.3,
            backchannel_max_s: 0.8,
            p_cue: 0.8,
            regular_words: 20,
            acoustic_period_ms: 10.0,
            energy_level: 1.0,
            prosody_strength: 1.0,
            noise: 0.5,
            gaze: false,
            gaze_rate_hz: 58.0,
            gaze_strength: 1.0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("duration_s", self.duration_s),
            ("mean_turn_s", self.mean_turn_s),
            ("min_turn_s", self.min_turn_s),
            ("hold_pause_min_s", self.hold_pause_min_s),
            ("min_ipu_s", self.min_ipu_s),
            ("backchannel_min_s", self.backchannel_min_s),
            ("acoustic_period_ms", self.acoustic_period_ms),
            ("gaze_rate_hz", self.gaze_rate_hz),
        ];
        if let Some((name, v)) = positive.iter().find(|(_, v)| !(*v > 0.0)) {
            return Err(Error::Config(format!("generator `{name}` must be positive, got {v}")));
        }
        let probs = [
            ("p_hold_pause", self.p_hold_pause),
            ("p_backchannel", self.p_backchannel),
            ("p_cue", self.p_cue),
        ];
        if let Some((name, v)) = probs.iter().find(|(_, v)| !(0.0..=1.0).contains(v)) {
            return Err(Error::Config(format!("generator `{name}` must lie in [0, 1], got {v}")));
        }
        if self.mean_turn_s < self.min_turn_s {
            return Err(Error::Config("mean_turn_s below min_turn_s".into()));
        }
        if self.hold_pause_max_s < self.hold_pause_min_s || self.backchannel_max_s < self.backchannel_min_s {
            return Err(Error::Config("generator range with max below min".into()));
        }
        if self.min_turn_s < 2.0 * self.max_overlap_s + MIN_GAP_TO_SELF_S + self.min_ipu_s {
            return Err(Error::Config(format!(
                "min_turn_s {} too short for max_overlap_s {}",
                self.min_turn_s, self.max_overlap_s
            )));
        }
        if !(self.max_overlap_s >= 0.0 && self.gap_sd_s >= 0.0 && self.noise >= 0.0) {
            return Err(Error::Config("negative generator spread".into()));
        }
        if self.regular_words == 0 {
            return Err(Error::Config("generator needs at least one regular word".into()));
        }
        Ok(())
    }

    pub fn vocabulary(&self) -> Vocabulary {
        let mut words = vec![TURN_FINAL_WORD.to_string(), BACKCHANNEL_WORD.to_string()];
        words.extend((0..self.regular_words).map(|i| format!("w{i}")));
        Vocabulary::new(words).expect("generated words are distinct")
    }
}

/// One speaker's floor-holding stretch, from first onset to last offset.
#[derive(Clone, Debug, PartialEq)]
pub struct Turn {
    pub speaker: Speaker,
    pub ipus: Vec<Span>,
    /// Cut short by the end of the conversation.
    pub truncated: bool,
}

impl Turn {
    pub fn start_s(&self) -> f64 {
        self.ipus[0].start_s
    }

    pub fn end_s(&self) -> f64 {
        self.ipus[self.ipus.len() - 1].end_s
    }
}

pub fn synth_generate<R: Rng + ?Sized>(cfg: &GenConfig, id: &str, rng: &mut R) -> Result<Conversation> {
    synth_generate_with_turns(cfg, id, rng).map(|(c, _)| c)
}

/// Like [`synth_generate`] but also returns the turn plan.
pub fn synth_generate_with_turns<R: Rng + ?Sized>(
    cfg: &GenConfig,
    id: &str,
    rng: &mut R,
) -> Result<(Conversation, Vec<Turn>)> {
    cfg.validate()?;
    let vocab_final = 1;
    let vocab_backchannel = 2;
    let first_regular = 3;

    let turns = plan_turns(cfg, rng);
    let mut spans: [Vec<Span>; 2] = [Vec::new(), Vec::new()];
    let mut words = Vec::new();
    let mut final_ipus: [Vec<Span>; 2] = [Vec::new(), Vec::new()];
    for turn in &turns {
        let sp = turn.speaker.index();
        for (j, ipu) in turn.ipus.iter().enumerate() {
            spans[sp].push(*ipu);
            let last = j + 1 == turn.ipus.len() && !turn.truncated;
            let mut tiles = tile_words(ipu, rng);
            let n = tiles.len();
            for (k, (s, e)) in tiles.drain(..).enumerate() {
                let vocab_id = if last && k + 1 == n && rng.random::<f64>() < cfg.p_cue {
                    vocab_final
                } else {
                    first_regular + rng.random_range(0..cfg.regular_words)
                };
                words.push(WordToken {
                    speaker: turn.speaker,
                    vocab_id,
                    start_s: s,
                    end_s: e,
                });
            }
            if last {
                final_ipus[sp].push(*ipu);
            }
        }
    }

    for bc in plan_backchannels(cfg, &turns, rng) {
        spans[bc.0.index()].push(bc.1);
        words.push(WordToken {
            speaker: bc.0,
            vocab_id: vocab_backchannel,
            start_s: bc.1.start_s,
            end_s: bc.1.end_s,
        });
    }
    for s in &mut spans {
        s.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
    }
    words.sort_by(|a, b| a.end_s.total_cmp(&b.end_s).then(a.start_s.total_cmp(&b.start_s)));

    let [a, b] = spans;
    let activity = SpeechActivity::new(a, b, cfg.duration_s)?;
    let mut streams = Vec::new();
    for sp in Speaker::BOTH {
        streams.push(acoustic_stream(cfg, &activity, sp, &final_ipus[sp.index()], rng)?);
    }
    if cfg.gaze {
        let yield_dir: Vec<f64> = (0..GAZE_DIM).map(|_| rng.random_range(-1.0..1.0)).collect();
        for sp in Speaker::BOTH {
            streams.push(gaze_stream(cfg, sp, &turns, &yield_dir, rng)?);
        }
    }

    let conv = Conversation {
        id: id.to_string(),
        duration_s: cfg.duration_s,
        activity,
        words,
        streams,
    };
    conv.validate()?;
    Ok((conv, turns))
}

fn plan_turns<R: Rng + ?Sized>(cfg: &GenConfig, rng: &mut R) -> Vec<Turn> {
    let turn_len = Exp::new(1.0 / (cfg.mean_turn_s - cfg.min_turn_s).max(1e-9)).expect("positive rate");
    let gap = Normal::new(cfg.gap_mean_s, cfg.gap_sd_s).expect("finite spread");
    let mut speaker = if rng.random::<bool>() { Speaker::A } else { Speaker::B };
    let mut t = rng.random_range(0.0..1.0);
    let mut turns = Vec::new();
    while t + cfg.min_ipu_s < cfg.duration_s {
        let length = cfg.min_turn_s + turn_len.sample(rng);
        let mut ipus = split_turn(cfg, t, length, rng);
        let mut truncated = false;
        if ipus.last().is_some_and(|s| s.end_s > cfg.duration_s) {
            truncated = true;
            ipus.retain(|s| s.start_s + cfg.min_ipu_s <= cfg.duration_s);
            if let Some(last) = ipus.last_mut() {
                last.end_s = last.end_s.min(cfg.duration_s);
            }
        }
        if ipus.is_empty() {
            break;
        }
        let end = ipus[ipus.len() - 1].end_s;
        turns.push(Turn {
            speaker,
            ipus,
            truncated,
        });
        if truncated {
            break;
        }
        let g = gap.sample(rng).clamp(-cfg.max_overlap_s, 2.0);
        t = end + g;
        speaker = speaker.other();
    }
    turns
}

/// Splits a turn of total extent `length` into IPUs separated by hold pauses.
fn split_turn<R: Rng + ?Sized>(cfg: &GenConfig, start: f64, length: f64, rng: &mut R) -> Vec<Span> {
    let mut pauses = Vec::new();
    while pauses.len() < cfg.max_hold_pauses && rng.random::<f64>() < cfg.p_hold_pause {
        pauses.push(rng.random_range(cfg.hold_pause_min_s..=cfg.hold_pause_max_s));
    }
    while !pauses.is_empty() {
        let speech = length - pauses.iter().sum::<f64>();
        if speech >= (pauses.len() + 1) as f64 * cfg.min_ipu_s {
            break;
        }
        pauses.pop();
    }
    let n = pauses.len() + 1;
    let spare = length - pauses.iter().sum::<f64>() - n as f64 * cfg.min_ipu_s;
    let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let mut t = start;
    let mut ipus = Vec::with_capacity(n);
    for (i, w) in weights.iter().enumerate() {
        let len = cfg.min_ipu_s + spare * w / total;
        let end = if i + 1 == n { start + length } else { t + len };
        ipus.push(Span::new(t, end));
        if i < pauses.len() {
            t = end + pauses[i];
        }
    }
    ipus
}

/// Word boundaries covering `ipu`; a leftover shorter than a word is merged
/// into the last one.
fn tile_words<R: Rng + ?Sized>(ipu: &Span, rng: &mut R) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut t = ipu.start_s;
    while ipu.end_s - t > 1e-9 {
        let len = rng.random_range(WORD_MIN_S..=WORD_MAX_S);
        let end = if ipu.end_s - (t + len) < WORD_MIN_S { ipu.end_s } else { t + len };
        out.push((t, end));
        t = end;
    }
    out
}

fn plan_backchannels<R: Rng + ?Sized>(cfg: &GenConfig, turns: &[Turn], rng: &mut R) -> Vec<(Speaker, Span)> {
    let mut out = Vec::new();
    for (i, turn) in turns.iter().enumerate() {
        if rng.random::<f64>() >= cfg.p_backchannel {
            continue;
        }
        let listener = turn.speaker.other();
        let len = rng.random_range(cfg.backchannel_min_s..=cfg.backchannel_max_s);
        // clear of the listener's neighbouring turns, which may overlap this one
        let lo = turn.start_s() + cfg.max_overlap_s + MIN_GAP_TO_SELF_S;
        let hi = turn.end_s() - cfg.max_overlap_s - MIN_GAP_TO_SELF_S - len;
        if let Some(prev) = i.checked_sub(1).map(|p| &turns[p]) {
            if prev.end_s() + MIN_GAP_TO_SELF_S > lo {
                continue;
            }
        }
        if hi <= lo {
            continue;
        }
        // early in the turn, so that a long silence can follow
        let start = rng.random_range(lo..hi.min(lo + BACKCHANNEL_WINDOW_S));
        out.push((listener, Span::new(start, start + len)));
    }
    out
}

fn acoustic_stream<R: Rng + ?Sized>(
    cfg: &GenConfig,
    activity: &SpeechActivity,
    speaker: Speaker,
    final_ipus: &[Span],
    rng: &mut R,
) -> Result<FeatureStream> {
    let p = cfg.acoustic_period_ms / 1000.0;
    let n = (cfg.duration_s / p + 1e-9).floor() as usize;
    let noise = Normal::new(0.0, cfg.noise).expect("finite noise");
    let spans = activity.spans(speaker);
    let mut timestamps = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n);
    let mut cursor = 0;
    let mut final_cursor = 0;
    for k in 1..=n {
        let t = k as f64 * p;
        let mid = t - 0.5 * p;
        while cursor < spans.len() && spans[cursor].end_s <= mid {
            cursor += 1;
        }
        while final_cursor < final_ipus.len() && final_ipus[final_cursor].end_s <= mid {
            final_cursor += 1;
        }
        let speaking = spans.get(cursor).is_some_and(|s| s.start_s <= mid);
        let pitch = if speaking {
            match final_ipus.get(final_cursor).filter(|s| s.start_s <= mid) {
                Some(s) => cfg.prosody_strength * ((s.end_s - mid) / PROSODY_WINDOW_S).min(1.0),
                None => cfg.prosody_strength,
            }
        } else {
            0.0
        };
        let energy = if speaking { cfg.energy_level } else { 0.0 };
        timestamps.push(t);
        vectors.push(vec![
            energy + noise.sample(rng),
            pitch + noise.sample(rng),
            noise.sample(rng),
        ]);
    }
    FeatureStream::new(speaker, ACOUSTIC_MODALITY, timestamps, vectors)
}

fn gaze_stream<R: Rng + ?Sized>(
    cfg: &GenConfig,
    speaker: Speaker,
    turns: &[Turn],
    yield_dir: &[f64],
    rng: &mut R,
) -> Result<FeatureStream> {
    let n = (cfg.duration_s * cfg.gaze_rate_hz + 1e-9).floor() as usize;
    let noise = Normal::new(0.0, cfg.noise).expect("finite noise");
    let own: Vec<&Turn> = turns.iter().filter(|t| t.speaker == speaker).collect();
    let mut timestamps = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n);
    let mut cursor = 0;
    for k in 1..=n {
        let t = k as f64 / cfg.gaze_rate_hz;
        while cursor < own.len() && own[cursor].end_s() < t {
            cursor += 1;
        }
        let pull = own
            .get(cursor)
            .filter(|turn| turn.start_s() <= t && !turn.truncated)
            .map_or(0.0, |turn| (1.0 - (turn.end_s() - t) / GAZE_WINDOW_S).max(0.0));
        timestamps.push(t);
        vectors.push(
            yield_dir
                .iter()
                .map(|y| cfg.gaze_strength * pull * y + noise.sample(rng))
                .collect(),
        );
    }
    FeatureStream::new(speaker, GAZE_MODALITY, timestamps, vectors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multiscale::derived_rng;

    #[test]
    fn default_config_is_valid_and_round_trips_as_text() {
        let cfg = GenConfig::default();
        cfg.validate().unwrap();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(toml::from_str::<GenConfig>(&text).unwrap(), cfg);
        let partial: GenConfig = toml::from_str("p_cue = 1.0\nduration_s = 20.0").unwrap();
        assert_eq!(partial.p_cue, 1.0);
        assert_eq!(partial.mean_turn_s, cfg.mean_turn_s);
    }

    #[test]
    fn full_cue_marks_every_turn_end() {
        let cfg = GenConfig {
            p_cue: 1.0,
            noise: 0.0,
            ..GenConfig::default()
        };
        let vocab = cfg.vocabulary();
        let okay = vocab.id(TURN_FINAL_WORD);
        for seed in 0..20 {
            let (conv, turns) = synth_generate_with_turns(&cfg, "c", &mut derived_rng(seed, &[])).unwrap();
            for turn in turns.iter().filter(|t| !t.truncated) {
                let last = conv
                    .words
                    .iter()
                    .filter(|w| w.speaker == turn.speaker && (w.end_s - turn.end_s()).abs() < 1e-12)
                    .collect::<Vec<_>>();
                assert_eq!(last.len(), 1);
                assert_eq!(last[0].vocab_id, okay);
            }
            // the cue never appears anywhere else
            let n_cues = conv.words.iter().filter(|w| w.vocab_id == okay).count();
            assert_eq!(n_cues, turns.iter().filter(|t| !t.truncated).count());
        }
    }

    #[test]
    fn activity_invariants_hold_over_many_seeds() {
        let cfg = GenConfig {
            duration_s: 30.0,
            gaze: true,
            ..GenConfig::default()
        };
        for seed in 0..1000 {
            let (conv, turns) = synth_generate_with_turns(&cfg, "c", &mut derived_rng(seed, &[])).unwrap();
            for sp in Speaker::BOTH {
                let spans = conv.activity.spans(sp);
                for s in spans {
                    assert!(0.0 <= s.start_s && s.start_s < s.end_s && s.end_s <= cfg.duration_s);
                }
                for w in spans.windows(2) {
                    assert!(w[0].end_s + MIN_GAP_TO_SELF_S - 1e-9 <= w[1].start_s, "seed {seed}");
                }
            }
            for w in turns.windows(2) {
                assert_ne!(w[0].speaker, w[1].speaker);
            }
            for w in &conv.words {
                assert!(w.end_s > w.start_s);
                let spans = conv.activity.spans(w.speaker);
                assert!(spans.iter().any(|s| s.start_s <= w.start_s + 1e-12 && w.end_s <= s.end_s + 1e-12));
            }
            conv.validate().unwrap();
        }
    }

    #[test]
    fn mean_turn_duration_matches_configuration() {
        let cfg = GenConfig {
            duration_s: 120.0,
            ..GenConfig::default()
        };
        let durations: Vec<f64> = (0..100)
            .flat_map(|seed| {
                let (_, turns) = synth_generate_with_turns(&cfg, "c", &mut derived_rng(seed, &[])).unwrap();
                turns
                    .into_iter()
                    .filter(|t| !t.truncated)
                    .map(|t| t.end_s() - t.start_s())
                    .collect::<Vec<_>>()
            })
            .collect();
        let mean = durations.iter().sum::<f64>() / durations.len() as f64;
        assert!((mean - cfg.mean_turn_s).abs() < 0.1 * cfg.mean_turn_s, "mean {mean}");
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let cfg = GenConfig::default();
        let a = synth_generate(&cfg, "x", &mut derived_rng(7, &[])).unwrap();
        let b = synth_generate(&cfg, "x", &mut derived_rng(7, &[])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pitch_falls_only_before_turn_ends() {
        let cfg = GenConfig {
            noise: 0.0,
            p_backchannel: 0.0,
            ..GenConfig::default()
        };
        let (conv, turns) = synth_generate_with_turns(&cfg, "c", &mut derived_rng(3, &[])).unwrap();
        let turn = turns.iter().find(|t| !t.truncated && t.ipus.len() > 1).expect("some multi-IPU turn");
        let stream = conv.stream(ACOUSTIC_MODALITY, turn.speaker).unwrap();
        let at = |t: f64| {
            let k = ((t / 0.01).ceil() as usize).max(1) - 1;
            stream.vectors[k][1]
        };
        let hold_end = turn.ipus[0].end_s;
        assert_eq!(at(hold_end - 0.1), cfg.prosody_strength);
        let end = turn.end_s();
        assert!(at(end - 0.1) < 0.3 * cfg.prosody_strength);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        for cfg in [
            GenConfig { duration_s: 0.0, ..GenConfig::default() },
            GenConfig { p_cue: 1.5, ..GenConfig::default() },
            GenConfig { max_overlap_s: 1.0, ..GenConfig::default() },
        ] {
            assert!(cfg.validate().is_err());
        }
    }
}
