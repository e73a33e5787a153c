//! Plain-text checkpoint container.
//!
//! ```text
//! turntake-checkpoint 1
//! arrangement=two_subnets
//! master_hidden=32
//! ...
//! modality=acous;dense:6;regular:10;16
//! meta.onset_threshold=0.43
//! tensor master.w 128 48
//! <rows x cols f64 values as 16-digit hex bit patterns>
//! end
//! ```
//!
//! Values are stored as raw IEEE-754 bit patterns so a save/load round trip
//! is bit exact.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::config::{EmbeddingConfig, InputKind, ModalityConfig, NetworkConfig};
use super::network::NetworkParams;
use crate::error::{Error, Result};
use crate::nn::Parameters;

const MAGIC: &str = "turntake-checkpoint";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: NetworkConfig,
    pub params: NetworkParams,
    pub meta: BTreeMap<String, String>,
}

fn input_kind_text(kind: InputKind) -> String {
    match kind {
        InputKind::Dense { dim } => format!("dense:{dim}"),
        InputKind::Tokens { slots } => format!("tokens:{slots}"),
    }
}

fn parse_input_kind(s: &str) -> Option<InputKind> {
    let (kind, n) = s.split_once(':')?;
    let n = n.parse().ok()?;
    match kind {
        "dense" => Some(InputKind::Dense { dim: n }),
        "tokens" => Some(InputKind::Tokens { slots: n }),
        _ => None,
    }
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    fs::write(path, render(ckpt))?;
    Ok(())
}

pub fn render(ckpt: &Checkpoint) -> String {
    let c = &ckpt.config;
    let mut out = format!("{MAGIC} {VERSION}\n");
    out += &format!("arrangement={}\n", c.arrangement);
    out += &format!("master_hidden={}\n", c.master_hidden);
    out += &format!("dropout={:016x}\n", c.dropout_p.to_bits());
    out += &format!("l2={:016x}\n", c.l2_lambda.to_bits());
    out += &format!("budget_check={}\n", c.hidden_budget_check);
    match c.embedding {
        Some(e) => out += &format!("embedding={},{}\n", e.vocab_size, e.dim),
        None => out += "embedding=none\n",
    }
    for m in &c.modalities {
        out += &format!(
            "modality={};{};{};{}\n",
            m.name,
            input_kind_text(m.input),
            m.timescale,
            m.subnet_hidden
        );
    }
    for (k, v) in &ckpt.meta {
        out += &format!("meta.{k}={v}\n");
    }
    for (name, t) in ckpt.params.tensors() {
        out += &format!("tensor {name} {} {}\n", t.rows(), t.cols());
        let words: Vec<String> = t.as_slice().iter().map(|v| format!("{:016x}", v.to_bits())).collect();
        out += &words.join(" ");
        out += "\n";
    }
    out += "end\n";
    out
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = fs::read_to_string(path)?;
    parse(&text, &path.display().to_string())
}

pub fn parse(text: &str, origin: &str) -> Result<Checkpoint> {
    let err = |line: usize, message: String| Error::Parse {
        path: origin.to_string(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

    match lines.next() {
        Some((_, header)) if header == format!("{MAGIC} {VERSION}") => {}
        Some((n, header)) => return Err(err(n, format!("unsupported checkpoint header `{header}`"))),
        None => return Err(err(0, "empty checkpoint".into())),
    }

    let mut fields: BTreeMap<&str, &str> = BTreeMap::new();
    let mut modalities = Vec::new();
    let mut meta = BTreeMap::new();
    let mut tensors: Vec<(String, usize, usize, Vec<f64>)> = Vec::new();
    let mut finished = false;

    while let Some((n, line)) = lines.next() {
        if line == "end" {
            finished = true;
            break;
        }
        if let Some(rest) = line.strip_prefix("tensor ") {
            let parts: Vec<&str> = rest.split_whitespace().collect();
            let [name, rows, cols] = parts[..] else {
                return Err(err(n, format!("bad tensor header `{line}`")));
            };
            let rows: usize = rows.parse().map_err(|_| err(n, "bad row count".into()))?;
            let cols: usize = cols.parse().map_err(|_| err(n, "bad column count".into()))?;
            let (vn, values_line) = lines.next().ok_or_else(|| err(n, "missing tensor values".into()))?;
            let values = values_line
                .split_whitespace()
                .map(|w| u64::from_str_radix(w, 16).map(f64::from_bits))
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| err(vn, format!("bad tensor value: {e}")))?;
            if values.len() != rows * cols {
                return Err(err(vn, format!("expected {} values, found {}", rows * cols, values.len())));
            }
            tensors.push((name.to_string(), rows, cols, values));
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(n, format!("expected key=value, found `{line}`")))?;
        if key == "modality" {
            let parts: Vec<&str> = value.split(';').collect();
            let [name, kind, ts, hidden] = parts[..] else {
                return Err(err(n, format!("bad modality `{value}`")));
            };
            modalities.push(ModalityConfig {
                name: name.to_string(),
                input: parse_input_kind(kind).ok_or_else(|| err(n, format!("bad input kind `{kind}`")))?,
                timescale: ts.parse().map_err(|e: Error| err(n, e.to_string()))?,
                subnet_hidden: hidden.parse().map_err(|_| err(n, "bad subnet size".into()))?,
            });
        } else if let Some(k) = key.strip_prefix("meta.") {
            meta.insert(k.to_string(), value.to_string());
        } else {
            fields.insert(key, value);
        }
    }
    if !finished {
        return Err(err(0, "truncated checkpoint (no `end` marker)".into()));
    }

    let field = |k: &str| fields.get(k).copied().ok_or_else(|| err(0, format!("missing `{k}`")));
    let bits = |k: &str| -> Result<f64> {
        u64::from_str_radix(field(k)?, 16)
            .map(f64::from_bits)
            .map_err(|_| err(0, format!("bad `{k}`")))
    };
    let embedding = match field("embedding")? {
        "none" => None,
        s => {
            let (v, d) = s.split_once(',').ok_or_else(|| err(0, "bad embedding".into()))?;
            Some(EmbeddingConfig {
                vocab_size: v.parse().map_err(|_| err(0, "bad vocabulary size".into()))?,
                dim: d.parse().map_err(|_| err(0, "bad embedding dim".into()))?,
            })
        }
    };
    let config = NetworkConfig {
        arrangement: field("arrangement")?.parse()?,
        modalities,
        master_hidden: field("master_hidden")?
            .parse()
            .map_err(|_| err(0, "bad master_hidden".into()))?,
        dropout_p: bits("dropout")?,
        l2_lambda: bits("l2")?,
        hidden_budget_check: field("budget_check")? == "true",
        embedding,
    };

    let mut params = NetworkParams::zeros(&config)?;
    let names: Vec<String> = params.tensors().into_iter().map(|(n, _)| n).collect();
    if names.len() != tensors.len() {
        return Err(err(0, format!("expected {} tensors, found {}", names.len(), tensors.len())));
    }
    for ((expected, dst), (name, rows, cols, values)) in names.iter().zip(params.tensors_mut()).zip(tensors) {
        if *expected != name || dst.shape() != (rows, cols) {
            return Err(err(
                0,
                format!("tensor `{name}` {rows}x{cols} does not match `{expected}` {:?}", dst.shape()),
            ));
        }
        dst.as_mut_slice().copy_from_slice(&values);
    }
    Ok(Checkpoint { config, params, meta })
}
