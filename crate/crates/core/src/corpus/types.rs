use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::nn::OOV_INDEX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Speaker {
    A,
    B,
}

impl Speaker {
    pub const BOTH: [Speaker; 2] = [Speaker::A, Speaker::B];

    pub fn other(self) -> Speaker {
        match self {
            Speaker::A => Speaker::B,
            Speaker::B => Speaker::A,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Speaker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Speaker::A => "A",
            Speaker::B => "B",
        })
    }
}

impl FromStr for Speaker {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" => Ok(Speaker::A),
            "B" => Ok(Speaker::B),
            other => Err(Error::Data(format!("unknown speaker `{other}`"))),
        }
    }
}

/// Half-open time span `[start_s, end_s)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Span {
    pub start_s: f64,
    pub end_s: f64,
}

impl Span {
    pub fn new(start_s: f64, end_s: f64) -> Self {
        Self { start_s, end_s }
    }

    pub fn duration(&self) -> f64 {
        self.end_s - self.start_s
    }

    pub fn overlap(&self, lo: f64, hi: f64) -> f64 {
        (self.end_s.min(hi) - self.start_s.max(lo)).max(0.0)
    }
}

/// Voice activity of both speakers.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SpeechActivity {
    spans: [Vec<Span>; 2],
}

impl SpeechActivity {
    /// Validates ordering and bounds; spans of one speaker may not overlap.
    pub fn new(a: Vec<Span>, b: Vec<Span>, duration_s: f64) -> Result<Self> {
        for (speaker, spans) in Speaker::BOTH.iter().zip([&a, &b]) {
            validate_spans(*speaker, spans, duration_s)?;
        }
        Ok(Self { spans: [a, b] })
    }

    pub fn spans(&self, speaker: Speaker) -> &[Span] {
        &self.spans[speaker.index()]
    }

    pub fn swapped(&self) -> Self {
        Self {
            spans: [self.spans[1].clone(), self.spans[0].clone()],
        }
    }
}

pub(crate) fn validate_spans(speaker: Speaker, spans: &[Span], duration_s: f64) -> Result<()> {
    let mut prev_end = f64::NEG_INFINITY;
    for (i, s) in spans.iter().enumerate() {
        if !(s.start_s >= 0.0 && s.end_s > s.start_s && s.end_s <= duration_s + 1e-9) {
            return Err(Error::Data(format!(
                "speaker {speaker} interval #{i} [{}, {}) invalid within duration {duration_s}",
                s.start_s, s.end_s
            )));
        }
        if s.start_s < prev_end {
            return Err(Error::Data(format!(
                "speaker {speaker} interval #{i} starting {} overlaps or precedes the previous one",
                s.start_s
            )));
        }
        prev_end = s.end_s;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct WordToken {
    pub speaker: Speaker,
    pub vocab_id: usize,
    pub start_s: f64,
    pub end_s: f64,
}

/// One speaker's feature stream of one modality.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureStream {
    pub speaker: Speaker,
    pub modality: String,
    pub timestamps: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub nominal_rate_ms: Option<f64>,
}

impl FeatureStream {
    pub fn new(speaker: Speaker, modality: &str, timestamps: Vec<f64>, vectors: Vec<Vec<f64>>) -> Result<Self> {
        if timestamps.len() != vectors.len() {
            return Err(Error::Data(format!(
                "{modality}/{speaker}: {} timestamps but {} vectors",
                timestamps.len(),
                vectors.len()
            )));
        }
        if let Some(first) = vectors.first() {
            if let Some(i) = vectors.iter().position(|v| v.len() != first.len()) {
                return Err(Error::Data(format!("{modality}/{speaker}: row {i} has a different dimension")));
            }
        }
        if let Some(i) = timestamps.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::Data(format!(
                "{modality}/{speaker}: timestamps not strictly increasing at row {}",
                i + 1
            )));
        }
        let nominal_rate_ms = infer_rate_ms(&timestamps);
        Ok(Self {
            speaker,
            modality: modality.to_string(),
            timestamps,
            vectors,
            nominal_rate_ms,
        })
    }

    pub fn dim(&self) -> usize {
        self.vectors.first().map_or(0, Vec::len)
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }
}

/// Median frame spacing in milliseconds, if every spacing agrees with it to
/// within 1%.
pub fn infer_rate_ms(timestamps: &[f64]) -> Option<f64> {
    let mut diffs: Vec<f64> = timestamps.windows(2).map(|w| (w[1] - w[0]) * 1000.0).collect();
    if diffs.is_empty() {
        return None;
    }
    diffs.sort_by(f64::total_cmp);
    let median = diffs[diffs.len() / 2];
    if diffs.iter().all(|d| (d - median).abs() <= 0.01 * median) {
        // snap near-integral rates (10.0000001ms) to the integer
        let rounded = (median * 1000.0).round() / 1000.0;
        Some(rounded)
    } else {
        None
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Conversation {
    pub id: String,
    pub duration_s: f64,
    pub activity: SpeechActivity,
    pub words: Vec<WordToken>,
    pub streams: Vec<FeatureStream>,
}

impl Conversation {
    pub fn stream(&self, modality: &str, speaker: Speaker) -> Option<&FeatureStream> {
        self.streams
            .iter()
            .find(|s| s.modality == modality && s.speaker == speaker)
    }

    /// Same conversation with speaker labels exchanged.
    pub fn swapped(&self) -> Self {
        let mut c = self.clone();
        c.activity = self.activity.swapped();
        for w in &mut c.words {
            w.speaker = w.speaker.other();
        }
        for s in &mut c.streams {
            s.speaker = s.speaker.other();
        }
        c
    }

    pub fn validate(&self) -> Result<()> {
        for sp in Speaker::BOTH {
            validate_spans(sp, self.activity.spans(sp), self.duration_s)?;
        }
        for (i, w) in self.words.iter().enumerate() {
            if !(w.end_s > w.start_s) || w.end_s > self.duration_s + 1e-9 || w.start_s < 0.0 {
                return Err(Error::Data(format!("{}: word #{i} has invalid timing", self.id)));
            }
        }
        for s in &self.streams {
            if s.timestamps.last().is_some_and(|&t| t > self.duration_s + 1e-9) {
                return Err(Error::Data(format!(
                    "{}: {}/{} extends past the conversation end",
                    self.id, s.modality, s.speaker
                )));
            }
        }
        Ok(())
    }
}

/// Word to id map; id 0 is the out-of-vocabulary token.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

pub const OOV_WORD: &str = "<oov>";

impl Vocabulary {
    /// `words` must not contain the OOV marker; ids are assigned from 1.
    pub fn new<I, S>(words: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut v = Self {
            words: vec![OOV_WORD.to_string()],
            index: HashMap::from([(OOV_WORD.to_string(), OOV_INDEX)]),
        };
        for w in words {
            let w = w.into();
            if v.index.contains_key(&w) {
                return Err(Error::Data(format!("duplicate vocabulary entry `{w}`")));
            }
            v.index.insert(w.clone(), v.words.len());
            v.words.push(w);
        }
        Ok(v)
    }

    /// From explicit `(word, id)` pairs; ids must be dense in `[0, n)` with
    /// 0 bound to the OOV marker.
    pub fn from_pairs(mut pairs: Vec<(String, usize)>) -> Result<Self> {
        pairs.sort_by_key(|(_, id)| *id);
        if pairs.first().map(|(w, id)| (w.as_str(), *id)) != Some((OOV_WORD, OOV_INDEX)) {
            return Err(Error::Data(format!("vocabulary must map {OOV_WORD} to id 0")));
        }
        for (expected, (w, id)) in pairs.iter().enumerate() {
            if *id != expected {
                return Err(Error::Data(format!("vocabulary ids not dense at `{w}`={id}")));
            }
        }
        Self::new(pairs.into_iter().skip(1).map(|(w, _)| w))
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, word: &str) -> usize {
        self.index.get(word).copied().unwrap_or(OOV_INDEX)
    }

    pub fn word(&self, id: usize) -> &str {
        self.words.get(id).map_or(OOV_WORD, String::as_str)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, usize)> {
        self.words.iter().enumerate().map(|(i, w)| (w.as_str(), i))
    }
}
