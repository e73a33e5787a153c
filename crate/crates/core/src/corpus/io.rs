//! On-disk conversation layout:
//!
//! ```text
//! <dir>/conversation.txt     id=..., duration_s=...
//! <dir>/activity.csv         speaker,start_s,end_s
//! <dir>/words.csv            speaker,word,start_s,end_s
//! <dir>/<modality>_<A|B>.csv t_s,f1,f2,...
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::types::{Conversation, FeatureStream, Span, SpeechActivity, Speaker, Vocabulary, WordToken};
use crate::error::{Error, Result};

pub const CONVERSATION_FILE: &str = "conversation.txt";
pub const ACTIVITY_FILE: &str = "activity.csv";
pub const WORDS_FILE: &str = "words.csv";

/// Parses `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_key_values(text: &str, origin: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            path: origin.to_string(),
            line: i + 1,
            message: format!("expected key=value, found `{line}`"),
        })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub fn render_key_values<'a>(pairs: impl IntoIterator<Item = (&'a str, String)>) -> String {
    pairs.into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

pub fn load_vocabulary(path: &Path) -> Result<Vocabulary> {
    let origin = path.display().to_string();
    let pairs = parse_key_values(&fs::read_to_string(path)?, &origin)?
        .into_iter()
        .map(|(w, id)| {
            id.parse::<usize>()
                .map(|id| (w, id))
                .map_err(|_| Error::Data(format!("{origin}: bad id `{id}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    Vocabulary::from_pairs(pairs)
}

pub fn write_vocabulary(path: &Path, vocab: &Vocabulary) -> Result<()> {
    fs::write(path, render_key_values(vocab.entries().map(|(w, i)| (w, i.to_string()))))?;
    Ok(())
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line: line as usize,
        message: message.into(),
    }
}

fn reader(path: &Path, header: &[&str]) -> Result<csv::Reader<fs::File>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let got: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if !header.is_empty() && got != header {
        return Err(parse_err(path, 1, format!("expected header {header:?}, found {got:?}")));
    }
    Ok(rdr)
}

fn field<T: std::str::FromStr>(path: &Path, line: u64, rec: &csv::StringRecord, i: usize, name: &str) -> Result<T> {
    rec.get(i)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| parse_err(path, line, format!("bad or missing `{name}`")))
}

fn load_activity(path: &Path, duration_s: f64) -> Result<SpeechActivity> {
    let mut spans: [Vec<Span>; 2] = [Vec::new(), Vec::new()];
    for rec in reader(path, &["speaker", "start_s", "end_s"])?.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let speaker: Speaker = field(path, line, &rec, 0, "speaker")?;
        let start: f64 = field(path, line, &rec, 1, "start_s")?;
        let end: f64 = field(path, line, &rec, 2, "end_s")?;
        if end <= start {
            return Err(parse_err(path, line, format!("end {end} not after start {start}")));
        }
        if start < 0.0 || end > duration_s + 1e-9 {
            return Err(parse_err(path, line, format!("[{start}, {end}) outside [0, {duration_s}]")));
        }
        let list = &mut spans[speaker.index()];
        if let Some(prev) = list.last() {
            if start < prev.end_s {
                return Err(parse_err(
                    path,
                    line,
                    format!("speaker {speaker} interval overlaps or precedes the previous one"),
                ));
            }
        }
        list.push(Span::new(start, end));
    }
    let [a, b] = spans;
    SpeechActivity::new(a, b, duration_s)
}

fn load_words(path: &Path, vocab: &Vocabulary, duration_s: f64) -> Result<Vec<WordToken>> {
    let mut words = Vec::new();
    for rec in reader(path, &["speaker", "word", "start_s", "end_s"])?.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let speaker: Speaker = field(path, line, &rec, 0, "speaker")?;
        let word: String = field(path, line, &rec, 1, "word")?;
        let start: f64 = field(path, line, &rec, 2, "start_s")?;
        let end: f64 = field(path, line, &rec, 3, "end_s")?;
        if end <= start || start < 0.0 || end > duration_s + 1e-9 {
            return Err(parse_err(path, line, format!("word `{word}` has invalid timing [{start}, {end})")));
        }
        words.push(WordToken {
            speaker,
            vocab_id: vocab.id(&word),
            start_s: start,
            end_s: end,
        });
    }
    Ok(words)
}

fn load_stream(path: &Path, speaker: Speaker, modality: &str) -> Result<FeatureStream> {
    let mut rdr = reader(path, &[])?;
    if rdr.headers()?.get(0) != Some("t_s") {
        return Err(parse_err(path, 1, "feature header must start with t_s"));
    }
    let mut timestamps = Vec::new();
    let mut vectors = Vec::new();
    let mut last = f64::NEG_INFINITY;
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let t: f64 = field(path, line, &rec, 0, "t_s")?;
        if t <= last {
            return Err(parse_err(path, line, format!("timestamp {t} not after {last}")));
        }
        last = t;
        let v = (1..rec.len())
            .map(|i| field::<f64>(path, line, &rec, i, "feature"))
            .collect::<Result<Vec<_>>>()?;
        timestamps.push(t);
        vectors.push(v);
    }
    FeatureStream::new(speaker, modality, timestamps, vectors)
}

/// Loads and validates one conversation directory.
pub fn load_conversation(dir: &Path, vocab: &Vocabulary) -> Result<Conversation> {
    let meta_path = dir.join(CONVERSATION_FILE);
    let meta: BTreeMap<String, String> =
        parse_key_values(&fs::read_to_string(&meta_path)?, &meta_path.display().to_string())?
            .into_iter()
            .collect();
    let id = meta
        .get("id")
        .cloned()
        .unwrap_or_else(|| dir.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned()));
    let duration_s: f64 = meta
        .get("duration_s")
        .and_then(|d| d.parse().ok())
        .ok_or_else(|| Error::Data(format!("{}: missing duration_s", meta_path.display())))?;

    let activity = load_activity(&dir.join(ACTIVITY_FILE), duration_s)?;
    let words_path = dir.join(WORDS_FILE);
    let words = if words_path.exists() {
        load_words(&words_path, vocab, duration_s)?
    } else {
        Vec::new()
    };

    let mut names: Vec<String> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with("_A.csv") || n.ends_with("_B.csv"))
        .collect();
    names.sort();
    let mut streams = Vec::new();
    for name in names {
        let stem = &name[..name.len() - ".csv".len()];
        let (modality, speaker) = stem.rsplit_once('_').expect("filtered on suffix");
        streams.push(load_stream(&dir.join(&name), speaker.parse()?, modality)?);
    }

    let conv = Conversation {
        id,
        duration_s,
        activity,
        words,
        streams,
    };
    conv.validate()?;
    Ok(conv)
}

pub fn write_conversation(dir: &Path, conv: &Conversation, vocab: &Vocabulary) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(
        dir.join(CONVERSATION_FILE),
        render_key_values([("id", conv.id.clone()), ("duration_s", conv.duration_s.to_string())]),
    )?;

    let mut w = csv::Writer::from_path(dir.join(ACTIVITY_FILE))?;
    w.write_record(["speaker", "start_s", "end_s"])?;
    for sp in Speaker::BOTH {
        for s in conv.activity.spans(sp) {
            w.write_record([sp.to_string(), s.start_s.to_string(), s.end_s.to_string()])?;
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join(WORDS_FILE))?;
    w.write_record(["speaker", "word", "start_s", "end_s"])?;
    for t in &conv.words {
        w.write_record([
            t.speaker.to_string(),
            vocab.word(t.vocab_id).to_string(),
            t.start_s.to_string(),
            t.end_s.to_string(),
        ])?;
    }
    w.flush()?;

    for s in &conv.streams {
        let mut w = csv::Writer::from_path(dir.join(format!("{}_{}.csv", s.modality, s.speaker)))?;
        let mut header = vec!["t_s".to_string()];
        header.extend((1..=s.dim()).map(|i| format!("f{i}")));
        w.write_record(&header)?;
        for (t, v) in s.timestamps.iter().zip(&s.vectors) {
            let mut row = vec![t.to_string()];
            row.extend(v.iter().map(f64::to_string));
            w.write_record(&row)?;
        }
        w.flush()?;
    }
    Ok(())
}
