use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Master prediction period.
pub const MASTER_PERIOD_MS: f64 = 50.0;

/// Upper bound on the summed hidden sizes of one network.
pub const HIDDEN_BUDGET: usize = 150;

const PERIOD_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Timescale {
    Regular { period_ms: f64 },
    /// Event driven; also used for irregular clocks such as 58Hz video.
    Asynchronous,
}

impl Timescale {
    pub fn regular(period_ms: f64) -> Self {
        Timescale::Regular { period_ms }
    }

    /// Regular if `period_ms` is commensurate with the master clock,
    /// otherwise asynchronous (timestamps compared directly).
    pub fn from_rate(period_ms: f64) -> Self {
        if commensurate(period_ms) {
            Timescale::regular(period_ms)
        } else {
            Timescale::Asynchronous
        }
    }

    fn validate(&self) -> Result<()> {
        if let Timescale::Regular { period_ms } = *self {
            if !(period_ms > 0.0) || !period_ms.is_finite() {
                return Err(Error::Config(format!("clock period {period_ms}ms must be positive")));
            }
            if !commensurate(period_ms) {
                return Err(Error::Config(format!(
                    "clock period {period_ms}ms neither divides nor is divided by the \
                     {MASTER_PERIOD_MS}ms master period; declare it asynchronous"
                )));
            }
        }
        Ok(())
    }
}

fn commensurate(period_ms: f64) -> bool {
    if !(period_ms > 0.0) || !period_ms.is_finite() {
        return false;
    }
    let ratio = if period_ms <= MASTER_PERIOD_MS {
        MASTER_PERIOD_MS / period_ms
    } else {
        period_ms / MASTER_PERIOD_MS
    };
    (ratio - ratio.round()).abs() <= PERIOD_TOL
}

impl fmt::Display for Timescale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Timescale::Regular { period_ms } => write!(f, "regular:{period_ms}"),
            Timescale::Asynchronous => write!(f, "async"),
        }
    }
}

impl FromStr for Timescale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "async" || s == "asynchronous" {
            return Ok(Timescale::Asynchronous);
        }
        let period = s.strip_prefix("regular:").unwrap_or(s).trim_end_matches("ms");
        period
            .parse::<f64>()
            .map(Timescale::regular)
            .map_err(|_| Error::Config(format!("bad timescale `{s}`")))
    }
}

/// What a modality's events carry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InputKind {
    /// Real-valued feature vectors.
    Dense { dim: usize },
    /// One optional vocabulary index per slot, each mapped through the shared
    /// embedding table (absent slots contribute a zero vector).
    Tokens { slots: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModalityConfig {
    pub name: String,
    pub input: InputKind,
    pub timescale: Timescale,
    /// 0 routes the modality straight into the master cell.
    pub subnet_hidden: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EmbeddingConfig {
    pub vocab_size: usize,
    pub dim: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Arrangement {
    /// Early fusion: raw features go straight into a single LSTM.
    NoSubnets,
    /// One sub-network over the concatenation of all modalities.
    OneSubnet,
    /// One sub-network per modality, each on its own clock.
    TwoSubnets,
}

impl fmt::Display for Arrangement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arrangement::NoSubnets => "no_subnets",
            Arrangement::OneSubnet => "one_subnet",
            Arrangement::TwoSubnets => "two_subnets",
        })
    }
}

impl FromStr for Arrangement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "no_subnets" => Ok(Arrangement::NoSubnets),
            "one_subnet" => Ok(Arrangement::OneSubnet),
            "two_subnets" => Ok(Arrangement::TwoSubnets),
            other => Err(Error::Config(format!("unknown arrangement `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkConfig {
    pub arrangement: Arrangement,
    pub modalities: Vec<ModalityConfig>,
    pub master_hidden: usize,
    pub dropout_p: f64,
    pub l2_lambda: f64,
    pub hidden_budget_check: bool,
    pub embedding: Option<EmbeddingConfig>,
}

/// A set of modalities that share one recurrent cell and one clock.
#[derive(Clone, Debug, PartialEq)]
pub struct Group {
    pub modalities: Vec<usize>,
    pub timescale: Timescale,
    pub input_dim: usize,
    /// 0 when the group feeds the master cell directly.
    pub hidden: usize,
}

impl Group {
    pub fn is_direct(&self) -> bool {
        self.hidden == 0
    }
}

impl ModalityConfig {
    pub fn feature_dim(&self, embedding: Option<EmbeddingConfig>) -> usize {
        match self.input {
            InputKind::Dense { dim } => dim,
            InputKind::Tokens { slots } => slots * embedding.map_or(0, |e| e.dim),
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.modalities.is_empty() {
            return Err(Error::Config("network needs at least one modality".into()));
        }
        if self.master_hidden == 0 {
            return Err(Error::Config("master hidden size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout_p)));
        }
        if !(self.l2_lambda >= 0.0) {
            return Err(Error::Config(format!("negative L2 strength {}", self.l2_lambda)));
        }
        if let Some(e) = self.embedding {
            if e.dim == 0 || e.vocab_size == 0 {
                return Err(Error::Config("embedding needs positive vocabulary and dimension".into()));
            }
        }
        for m in &self.modalities {
            m.timescale.validate()?;
            if matches!(m.input, InputKind::Tokens { .. }) && self.embedding.is_none() {
                return Err(Error::Config(format!(
                    "token modality `{}` needs an embedding table",
                    m.name
                )));
            }
            if m.feature_dim(self.embedding) == 0 {
                return Err(Error::Config(format!("modality `{}` has zero feature dimension", m.name)));
            }
        }

        let first = &self.modalities[0];
        let shared_clock = self.modalities.iter().all(|m| m.timescale == first.timescale);
        match self.arrangement {
            Arrangement::NoSubnets => {
                if let Some(m) = self.modalities.iter().find(|m| m.subnet_hidden != 0) {
                    return Err(Error::Config(format!(
                        "no_subnets arrangement routes `{}` directly; subnet_hidden must be 0",
                        m.name
                    )));
                }
                if !shared_clock {
                    return Err(Error::Config("no_subnets requires one shared timescale".into()));
                }
            }
            Arrangement::OneSubnet => {
                if first.subnet_hidden == 0
                    || self.modalities.iter().any(|m| m.subnet_hidden != first.subnet_hidden)
                {
                    return Err(Error::Config(
                        "one_subnet requires the same positive subnet_hidden on every modality".into(),
                    ));
                }
                if !shared_clock {
                    return Err(Error::Config("one_subnet requires one shared timescale".into()));
                }
            }
            Arrangement::TwoSubnets => {
                if let Some(m) = self.modalities.iter().find(|m| m.subnet_hidden == 0) {
                    return Err(Error::Config(format!(
                        "two_subnets needs a sub-network for `{}`",
                        m.name
                    )));
                }
            }
        }

        if self.hidden_budget_check && self.total_hidden() > HIDDEN_BUDGET {
            return Err(Error::Config(format!(
                "hidden sizes sum to {} which exceeds the budget of {HIDDEN_BUDGET}",
                self.total_hidden()
            )));
        }
        Ok(())
    }

    /// Master plus every distinct sub-network.
    pub fn total_hidden(&self) -> usize {
        self.master_hidden + self.groups().iter().map(|g| g.hidden).sum::<usize>()
    }

    pub fn groups(&self) -> Vec<Group> {
        let dim = |i: usize| self.modalities[i].feature_dim(self.embedding);
        match self.arrangement {
            Arrangement::NoSubnets | Arrangement::OneSubnet => {
                let all: Vec<usize> = (0..self.modalities.len()).collect();
                vec![Group {
                    input_dim: all.iter().map(|&i| dim(i)).sum(),
                    modalities: all,
                    timescale: self.modalities[0].timescale,
                    hidden: match self.arrangement {
                        Arrangement::NoSubnets => 0,
                        _ => self.modalities[0].subnet_hidden,
                    },
                }]
            }
            Arrangement::TwoSubnets => (0..self.modalities.len())
                .map(|i| Group {
                    modalities: vec![i],
                    timescale: self.modalities[i].timescale,
                    input_dim: dim(i),
                    hidden: self.modalities[i].subnet_hidden,
                })
                .collect(),
        }
    }

    pub fn master_input_dim(&self) -> usize {
        let groups = self.groups();
        match self.arrangement {
            Arrangement::NoSubnets => groups[0].input_dim,
            _ => groups.iter().map(|g| g.hidden).sum(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn modality(name: &str, dim: usize, ts: Timescale, hidden: usize) -> ModalityConfig {
        ModalityConfig {
            name: name.into(),
            input: InputKind::Dense { dim },
            timescale: ts,
            subnet_hidden: hidden,
        }
    }

    fn two_subnets(master: usize, a: usize, b: usize) -> NetworkConfig {
        NetworkConfig {
            arrangement: Arrangement::TwoSubnets,
            modalities: vec![
                modality("acous", 4, Timescale::regular(10.0), a),
                modality("visual", 3, Timescale::Asynchronous, b),
            ],
            master_hidden: master,
            dropout_p: 0.0,
            l2_lambda: 0.0,
            hidden_budget_check: true,
            embedding: None,
        }
    }

    #[test]
    fn budget_is_enforced() {
        assert!(two_subnets(50, 50, 50).validate().is_ok());
        let err = two_subnets(60, 50, 50).validate().unwrap_err();
        assert!(err.to_string().contains("budget"));
        let mut unchecked = two_subnets(60, 50, 50);
        unchecked.hidden_budget_check = false;
        assert!(unchecked.validate().is_ok());
    }

    #[test]
    fn one_subnet_counts_shared_cell_once() {
        let cfg = NetworkConfig {
            arrangement: Arrangement::OneSubnet,
            modalities: vec![
                modality("a", 2, Timescale::regular(50.0), 75),
                modality("b", 2, Timescale::regular(50.0), 75),
            ],
            master_hidden: 75,
            dropout_p: 0.0,
            l2_lambda: 0.0,
            hidden_budget_check: true,
            embedding: None,
        };
        assert_eq!(cfg.total_hidden(), 150);
        assert!(cfg.validate().is_ok());
        assert_eq!(cfg.master_input_dim(), 75);
    }

    #[test]
    fn arrangement_invariants() {
        let mut cfg = two_subnets(20, 10, 10);
        cfg.arrangement = Arrangement::NoSubnets;
        assert!(cfg.validate().is_err());
        for m in &mut cfg.modalities {
            m.subnet_hidden = 0;
        }
        // mixed clocks cannot share one cell
        assert!(cfg.validate().is_err());
        cfg.modalities[1].timescale = Timescale::regular(10.0);
        assert!(cfg.validate().is_ok());
        assert_eq!(cfg.master_input_dim(), 7);
    }

    #[test]
    fn irregular_regular_period_rejected() {
        let mut cfg = two_subnets(20, 10, 10);
        cfg.modalities[1].timescale = Timescale::regular(1000.0 / 58.0);
        assert!(cfg.validate().is_err());
        cfg.modalities[1].timescale = Timescale::regular(100.0);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn timescale_text_round_trip() {
        for ts in [Timescale::regular(10.0), Timescale::regular(50.0), Timescale::Asynchronous] {
            assert_eq!(ts.to_string().parse::<Timescale>().unwrap(), ts);
        }
        assert_eq!("10ms".parse::<Timescale>().unwrap(), Timescale::regular(10.0));
    }
}
