use serde::{Deserialize, Serialize};

use super::linguistic::{linguistic_events, LinguisticMode, DEFAULT_WORD_DELAY_MS};
use super::normalize::{resample_mean, zscore_normalize};
use super::targets::{frame_labels, frame_targets, n_frames};
use super::types::{Conversation, FeatureStream, Speaker};
use crate::error::{Error, Result};
use crate::multiscale::{InputKind, SequenceInputs, TimedInput, Timescale, TrainSequence};

/// Where a network modality draws its events from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModalitySource {
    Stream {
        stream: String,
        #[serde(default)]
        resample_ms: Option<f64>,
        #[serde(default = "yes")]
        normalize: bool,
    },
    Words {
        mode: LinguisticMode,
        #[serde(default = "default_delay")]
        delay_ms: f64,
    },
}

fn yes() -> bool {
    true
}

fn default_delay() -> f64 {
    DEFAULT_WORD_DELAY_MS
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModalitySpec {
    pub name: String,
    pub source: ModalitySource,
}

/// Shape of one built modality: what the network config needs to know.
#[derive(Clone, Debug, PartialEq)]
pub struct ModalityShape {
    pub name: String,
    pub input: InputKind,
    pub timescale: Timescale,
}

#[derive(Clone, Debug)]
pub struct DatasetItem {
    pub conversation: String,
    /// Whose future activity is predicted.
    pub speaker: Speaker,
    pub n_frames: usize,
    /// Frame labels of `speaker` over the whole conversation.
    pub labels: Vec<bool>,
    pub sequence: TrainSequence,
}

#[derive(Clone, Debug, Default)]
pub struct Dataset {
    pub items: Vec<DatasetItem>,
    pub shapes: Vec<ModalityShape>,
}

impl Dataset {
    pub fn sequences(&self) -> Vec<TrainSequence> {
        self.items.iter().map(|i| i.sequence.clone()).collect()
    }
}

/// Builds one sequence per conversation and target speaker. Every modality's
/// features are the target speaker's followed by the interlocutor's.
/// Conversations lacking a required stream are skipped with a warning.
pub fn build_dataset(conversations: &[Conversation], specs: &[ModalitySpec]) -> Result<Dataset> {
    if specs.is_empty() {
        return Err(Error::Config("dataset needs at least one modality".into()));
    }
    let mut out = Dataset::default();
    for conv in conversations {
        let Some(prepared) = prepare_streams(conv, specs)? else {
            continue;
        };
        let shapes: Vec<ModalityShape> = specs
            .iter()
            .zip(&prepared)
            .map(|(spec, p)| shape_of(spec, p.as_ref()))
            .collect::<Result<_>>()?;
        if out.shapes.is_empty() {
            out.shapes = shapes;
        } else if out.shapes != shapes {
            return Err(Error::Data(format!(
                "{}: modality shapes differ from earlier conversations",
                conv.id
            )));
        }
        let frames = n_frames(conv.duration_s);
        for speaker in Speaker::BOTH {
            let streams = specs
                .iter()
                .zip(&prepared)
                .map(|(spec, p)| perspective_events(conv, spec, p.as_ref(), speaker))
                .collect::<Result<Vec<_>>>()?;
            let labels = frame_labels(&conv.activity, speaker, frames);
            out.items.push(DatasetItem {
                conversation: conv.id.clone(),
                speaker,
                n_frames: frames,
                sequence: TrainSequence {
                    inputs: SequenceInputs {
                        duration_s: conv.duration_s,
                        streams,
                    },
                    targets: frame_targets(&labels),
                },
                labels,
            });
        }
    }
    Ok(out)
}

/// Per-speaker streams after resampling and normalization, `None` for word
/// modalities. Returns `Ok(None)` when the conversation must be skipped.
fn prepare_streams(conv: &Conversation, specs: &[ModalitySpec]) -> Result<Option<Vec<Option<[FeatureStream; 2]>>>> {
    let mut out = Vec::with_capacity(specs.len());
    for spec in specs {
        let ModalitySource::Stream {
            stream,
            resample_ms,
            normalize,
        } = &spec.source
        else {
            out.push(None);
            continue;
        };
        let mut pair = Vec::with_capacity(2);
        for sp in Speaker::BOTH {
            let Some(s) = conv.stream(stream, sp).filter(|s| !s.is_empty()) else {
                log::warn!("{}: no `{stream}` stream for speaker {sp}; skipping conversation", conv.id);
                return Ok(None);
            };
            let mut s = s.clone();
            if let Some(ms) = resample_ms {
                s = resample_mean(&s, *ms, conv.duration_s);
            }
            if *normalize {
                s = zscore_normalize(&s);
            }
            pair.push(s);
        }
        let [a, b]: [FeatureStream; 2] = pair.try_into().expect("two speakers");
        let aligned = a.len() == b.len()
            && a.dim() == b.dim()
            && a.timestamps.iter().zip(&b.timestamps).all(|(x, y)| (x - y).abs() <= 1e-9);
        if !aligned {
            return Err(Error::Data(format!(
                "{}: `{stream}` streams of the two speakers are not frame-aligned",
                conv.id
            )));
        }
        out.push(Some([a, b]));
    }
    Ok(Some(out))
}

fn shape_of(spec: &ModalitySpec, prepared: Option<&[FeatureStream; 2]>) -> Result<ModalityShape> {
    let (input, timescale) = match (&spec.source, prepared) {
        (ModalitySource::Stream { .. }, Some([a, _])) => (
            InputKind::Dense { dim: 2 * a.dim() },
            a.nominal_rate_ms.map_or(Timescale::Asynchronous, Timescale::from_rate),
        ),
        (ModalitySource::Words { mode, .. }, _) => (InputKind::Tokens { slots: 2 }, mode.timescale()),
        _ => unreachable!("streams prepared for every stream modality"),
    };
    Ok(ModalityShape {
        name: spec.name.clone(),
        input,
        timescale,
    })
}

fn perspective_events(
    conv: &Conversation,
    spec: &ModalitySpec,
    prepared: Option<&[FeatureStream; 2]>,
    speaker: Speaker,
) -> Result<Vec<TimedInput>> {
    match (&spec.source, prepared) {
        (ModalitySource::Stream { .. }, Some(pair)) => {
            let own = &pair[speaker.index()];
            let other = &pair[speaker.other().index()];
            Ok(own
                .timestamps
                .iter()
                .zip(own.vectors.iter().zip(&other.vectors))
                .map(|(&t, (x, y))| {
                    let mut v = x.clone();
                    v.extend_from_slice(y);
                    TimedInput::dense(t, v)
                })
                .collect())
        }
        (ModalitySource::Words { mode, delay_ms }, _) => Ok(linguistic_events(
            &conv.words,
            &[speaker, speaker.other()],
            *mode,
            *delay_ms,
            conv.duration_s,
        )),
        _ => unreachable!("streams prepared for every stream modality"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::synth::{synth_generate, GenConfig, ACOUSTIC_DIM, ACOUSTIC_MODALITY, GAZE_DIM, GAZE_MODALITY};
    use crate::multiscale::{derived_rng, Payload};

    fn specs() -> Vec<ModalitySpec> {
        vec![
            ModalitySpec {
                name: "acous".into(),
                source: ModalitySource::Stream {
                    stream: ACOUSTIC_MODALITY.into(),
                    resample_ms: None,
                    normalize: true,
                },
            },
            ModalitySpec {
                name: "ling".into(),
                source: ModalitySource::Words {
                    mode: LinguisticMode::Regular50ms,
                    delay_ms: 100.0,
                },
            },
        ]
    }

    fn conv(seed: u64) -> Conversation {
        let cfg = GenConfig {
            duration_s: 20.0,
            ..GenConfig::default()
        };
        synth_generate(&cfg, &format!("c{seed}"), &mut derived_rng(seed, &[])).unwrap()
    }

    #[test]
    fn one_conversation_gives_two_sequences_with_doubled_dims() {
        let ds = build_dataset(&[conv(1)], &specs()).unwrap();
        assert_eq!(ds.items.len(), 2);
        assert_eq!(ds.shapes[0].input, InputKind::Dense { dim: 2 * ACOUSTIC_DIM });
        assert_eq!(ds.shapes[0].timescale, Timescale::regular(10.0));
        assert_eq!(ds.shapes[1].input, InputKind::Tokens { slots: 2 });
        assert_eq!(ds.items[0].sequence.targets.len(), 400 - 60);
    }

    #[test]
    fn perspectives_swap_vector_halves() {
        let ds = build_dataset(&[conv(2)], &specs()).unwrap();
        let (a, b) = (&ds.items[0].sequence.inputs, &ds.items[1].sequence.inputs);
        for (ea, eb) in a.streams[0].iter().zip(&b.streams[0]) {
            let (Payload::Dense(x), Payload::Dense(y)) = (&ea.features, &eb.features) else {
                panic!("dense expected");
            };
            assert_eq!(x[..ACOUSTIC_DIM], y[ACOUSTIC_DIM..]);
            assert_eq!(x[ACOUSTIC_DIM..], y[..ACOUSTIC_DIM]);
        }
        for (ea, eb) in a.streams[1].iter().zip(&b.streams[1]) {
            let (Payload::Tokens(x), Payload::Tokens(y)) = (&ea.features, &eb.features) else {
                panic!("tokens expected");
            };
            assert_eq!((x[0], x[1]), (y[1], y[0]));
        }
    }

    #[test]
    fn missing_modality_skips_conversation() {
        let mut c = conv(3);
        c.streams.retain(|s| s.speaker == Speaker::A);
        let ds = build_dataset(&[c, conv(4)], &specs()).unwrap();
        assert_eq!(ds.items.len(), 2);
        assert_eq!(ds.items[0].conversation, "c4");
    }

    #[test]
    fn resampled_stream_runs_at_master_rate() {
        let mut s = specs();
        s[0].source = ModalitySource::Stream {
            stream: ACOUSTIC_MODALITY.into(),
            resample_ms: Some(50.0),
            normalize: true,
        };
        let ds = build_dataset(&[conv(5)], &s).unwrap();
        assert_eq!(ds.shapes[0].timescale, Timescale::regular(50.0));
        assert_eq!(ds.items[0].sequence.inputs.streams[0].len(), 400);
    }

    #[test]
    fn unresampled_gaze_is_asynchronous() {
        let cfg = GenConfig {
            duration_s: 10.0,
            gaze: true,
            ..GenConfig::default()
        };
        let c = synth_generate(&cfg, "g", &mut derived_rng(8, &[])).unwrap();
        let spec = ModalitySpec {
            name: "gaze".into(),
            source: ModalitySource::Stream {
                stream: GAZE_MODALITY.into(),
                resample_ms: None,
                normalize: true,
            },
        };
        let ds = build_dataset(&[c], &[spec]).unwrap();
        assert_eq!(ds.shapes[0].timescale, Timescale::Asynchronous);
        assert_eq!(ds.shapes[0].input, InputKind::Dense { dim: 2 * GAZE_DIM });
    }

    #[test]
    fn source_parses_from_toml() {
        #[derive(Deserialize)]
        struct Wrap {
            m: Vec<ModalitySource>,
        }
        let w: Wrap = toml::from_str(
            r#"
            m = [
              { source = "stream", stream = "acoustic", resample_ms = 50 },
              { source = "words", mode = "async" },
            ]
            "#,
        )
        .unwrap();
        assert_eq!(
            w.m[0],
            ModalitySource::Stream {
                stream: "acoustic".into(),
                resample_ms: Some(50.0),
                normalize: true
            }
        );
        assert_eq!(
            w.m[1],
            ModalitySource::Words {
                mode: LinguisticMode::Asynchronous,
                delay_ms: 100.0
            }
        );
    }
}
