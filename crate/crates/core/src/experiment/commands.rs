use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::config::ExperimentConfig;
use super::metrics::{
    dump_predictions, predict, score_predictions, tune_onset_threshold, Baselines, ConversationPrediction, Metrics,
};
use super::table::Table;
use crate::corpus::{
    build_dataset, load_conversation, load_vocabulary, parse_key_values, render_key_values, synth_generate,
    write_conversation, write_vocabulary, Conversation, Dataset, Vocabulary,
};
use crate::error::{Error, Result};
use crate::eval::ttest_two_tailed;
use crate::multiscale::gradcheck::{check_case, standard_cases, Fault, GRADCHECK_TOL};
use crate::multiscale::{
    derived_rng, load_checkpoint, save_checkpoint, train, Checkpoint, NetworkConfig, NetworkParams, TrainConfig,
    TrainReport,
};
use crate::nn::{AdamConfig, Parameters};
use crate::par::{self, Execution};

pub const MANIFEST_FILE: &str = "manifest.txt";
pub const VOCAB_FILE: &str = "vocab.txt";
pub const GENERATOR_FILE: &str = "generator.toml";
pub const REPORT_STEM: &str = "report";
pub const GRID_STEM: &str = "grid";
pub const EVAL_STEM: &str = "eval";
pub const COMPARE_STEM: &str = "compare";
pub const GRADCHECK_STEM: &str = "gradcheck";
pub const BCE_COLUMN: &str = "BCE loss";
pub const ONSET_COLUMN: &str = "f1 onset";
pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

/// Settings shared by all subcommands.
#[derive(Clone, Debug)]
pub struct RunOptions {
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub exec: Execution,
}

impl RunOptions {
    pub fn new(out: impl Into<PathBuf>) -> Self {
        Self {
            out: out.into(),
            seed: None,
            exec: Execution::available(),
        }
    }
}

pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        x.to_string()
    }
}

fn parse_num(s: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Data(format!("`{s}` is not a number")))
}

fn pause_columns(cfg: &ExperimentConfig) -> [String; 2] {
    [
        format!("f1 {}ms", cfg.eval.pause_short_ms),
        format!("f1 {}ms", cfg.eval.pause_long_ms),
    ]
}

fn metric_cells(m: &Metrics) -> Vec<String> {
    vec![fmt_num(m.bce), fmt_num(m.f1_pause[0]), fmt_num(m.f1_pause[1]), fmt_num(m.f1_onset)]
}

// ---------------------------------------------------------------- corpus

#[derive(Clone, Debug)]
pub struct Corpus {
    pub vocab: Vocabulary,
    pub train: Vec<Conversation>,
    pub test: Vec<Conversation>,
}

pub fn load_corpus(dir: &Path, exec: Execution) -> Result<Corpus> {
    load_splits(dir, exec, true)
}

/// Like [`load_corpus`], leaving the test split unread unless `with_test`.
pub fn load_splits(dir: &Path, exec: Execution, with_test: bool) -> Result<Corpus> {
    let vocab = load_vocabulary(&dir.join(VOCAB_FILE))?;
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest = parse_key_values(&fs::read_to_string(&manifest_path)?, &manifest_path.display().to_string())?;
    let mut split: BTreeMap<&str, Vec<PathBuf>> = BTreeMap::new();
    for (k, v) in &manifest {
        match k.as_str() {
            "train" | "test" => split.entry(k.as_str()).or_default().push(dir.join(v)),
            other => return Err(Error::Data(format!("{}: unknown split `{other}`", manifest_path.display()))),
        }
    }
    let load = |paths: Option<&Vec<PathBuf>>| -> Result<Vec<Conversation>> {
        let paths = paths.cloned().unwrap_or_default();
        par::map(exec, &paths, |p| load_conversation(p, &vocab)).into_iter().collect()
    };
    Ok(Corpus {
        train: load(split.get("train"))?,
        test: if with_test { load(split.get("test"))? } else { Vec::new() },
        vocab: vocab.clone(),
    })
}

/// Splits training conversations into (fit, held-out) with the held-out
/// share taken from the end.
pub fn dev_split(train: &[Conversation], fraction: f64) -> (&[Conversation], &[Conversation]) {
    let n_dev = ((train.len() as f64 * fraction).round() as usize).min(train.len().saturating_sub(1));
    train.split_at(train.len() - n_dev)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GenerateSummary {
    pub dir: PathBuf,
    pub train: Vec<String>,
    pub test: Vec<String>,
}

/// Writes a synthetic corpus: one directory per conversation plus the
/// vocabulary, generator settings and the train/test manifest.
pub fn cmd_generate(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<GenerateSummary> {
    let seed = opts.seed.unwrap_or(cfg.corpus.seed);
    let dir = opts.out.clone();
    let n = cfg.corpus.train + cfg.corpus.test;
    if n == 0 {
        return Err(Error::Config("corpus.train + corpus.test must be positive".into()));
    }
    fs::create_dir_all(&dir)?;
    let vocab = cfg.generator.vocabulary();
    let ids: Vec<String> = (0..n).map(|i| format!("conv_{i:03}")).collect();
    let indexed: Vec<(usize, &String)> = ids.iter().enumerate().collect();
    par::map(opts.exec, &indexed, |&(i, id)| -> Result<()> {
        let conv = synth_generate(&cfg.generator, id, &mut derived_rng(seed, &[i as u64]))?;
        write_conversation(&dir.join(id), &conv, &vocab)
    })
    .into_iter()
    .collect::<Result<()>>()?;
    write_vocabulary(&dir.join(VOCAB_FILE), &vocab)?;
    fs::write(
        dir.join(GENERATOR_FILE),
        toml::to_string(&cfg.generator).map_err(|e| Error::Config(e.to_string()))?,
    )?;
    let (train, test) = ids.split_at(cfg.corpus.train);
    let manifest = train
        .iter()
        .map(|id| ("train", id.clone()))
        .chain(test.iter().map(|id| ("test", id.clone())));
    fs::write(
        dir.join(MANIFEST_FILE),
        format!("# seed={seed}\n{}", render_key_values(manifest)),
    )?;
    Ok(GenerateSummary {
        dir,
        train: train.to_vec(),
        test: test.to_vec(),
    })
}

// ----------------------------------------------------------------- train

/// Datasets for the fit, held-out and test splits plus the network built
/// for them.
pub struct Prepared {
    pub vocab: Vocabulary,
    pub fit: Dataset,
    pub dev: Dataset,
    pub test: Dataset,
}

/// The test dataset stays empty unless `with_test`.
pub fn prepare(cfg: &ExperimentConfig, exec: Execution, with_test: bool) -> Result<Prepared> {
    let corpus = load_splits(&cfg.corpus_dir(), exec, with_test)?;
    let specs = cfg.modality_specs();
    let (fit, dev) = dev_split(&corpus.train, cfg.eval.dev_fraction);
    let fit = build_dataset(fit, &specs)?;
    if fit.items.is_empty() {
        return Err(Error::Data("no usable training conversations".into()));
    }
    Ok(Prepared {
        dev: build_dataset(dev, &specs)?,
        test: build_dataset(&corpus.test, &specs)?,
        fit,
        vocab: corpus.vocab,
    })
}

pub fn train_config(cfg: &ExperimentConfig, seed: u64, exec: Execution) -> TrainConfig {
    TrainConfig {
        epochs: cfg.training.epochs,
        t_bptt: cfg.training.t_bptt,
        batch_size: cfg.training.batch_size,
        adam: AdamConfig {
            learning_rate: cfg.training.learning_rate,
            ..AdamConfig::default()
        },
        seed,
        exec,
    }
}

/// Fresh parameters for `seed`, trained on `data`.
pub fn fit_model(
    net: &NetworkConfig,
    data: &Dataset,
    tc: &TrainConfig,
) -> Result<(NetworkParams, TrainReport)> {
    let mut params = NetworkParams::new(net, &mut derived_rng(tc.seed, &[0x1417]))?;
    let report = train(&mut params, net, &data.sequences(), tc)?;
    if !params.all_finite() {
        return Err(Error::Numeric("training produced non-finite parameters".into()));
    }
    Ok((params, report))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeedResult {
    pub seed: u64,
    pub metrics: Metrics,
    pub threshold: f64,
    pub final_train_bce: f64,
    pub checkpoint: PathBuf,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub seeds: Vec<SeedResult>,
    pub mean: Metrics,
    pub baselines: Baselines,
    pub best_seed: u64,
    pub table: Table,
}

fn mean_metrics(rows: &[SeedResult]) -> Metrics {
    let n = rows.len() as f64;
    let avg = |f: &dyn Fn(&Metrics) -> f64| rows.iter().map(|r| f(&r.metrics)).sum::<f64>() / n;
    Metrics {
        bce: avg(&|m| m.bce),
        f1_pause: [avg(&|m| m.f1_pause[0]), avg(&|m| m.f1_pause[1])],
        f1_onset: avg(&|m| m.f1_onset),
        n_pause: rows[0].metrics.n_pause,
        n_onset: rows[0].metrics.n_onset,
    }
}

pub fn checkpoint_path(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed_{seed}.ckpt"))
}

/// Trains once per configured seed, scores each run on the test split and
/// writes checkpoints plus `report.csv` / `report.txt`.
pub fn cmd_train(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunReport> {
    let seeds = opts.seed.map_or_else(|| cfg.training.seeds.clone(), |s| vec![s]);
    let data = prepare(cfg, opts.exec, true)?;
    if data.test.items.is_empty() {
        return Err(Error::Data("test split is empty".into()));
    }
    let net = cfg.network_config(&data.fit.shapes, data.vocab.len())?;
    fs::create_dir_all(&opts.out)?;
    let started = std::time::Instant::now();

    let results = par::map(opts.exec, &seeds, |&seed| -> Result<(SeedResult, Baselines)> {
        let tc = train_config(cfg, seed, opts.exec);
        let (params, report) = fit_model(&net, &data.fit, &tc)?;
        let threshold = if data.dev.items.is_empty() {
            tune_onset_threshold(&predict(&params, &net, &data.fit, opts.exec)?)?
        } else {
            tune_onset_threshold(&predict(&params, &net, &data.dev, opts.exec)?)?
        };
        let preds = predict(&params, &net, &data.test, opts.exec)?;
        let (metrics, baselines) = score_predictions(&preds, cfg.eval.pause_frames(), threshold)?;
        if !metrics.bce.is_finite() {
            return Err(Error::Numeric(format!("seed {seed}: test BCE is {}", metrics.bce)));
        }
        let final_train_bce = report.loss_curve.last().copied().unwrap_or(f64::NAN);
        let checkpoint = checkpoint_path(&opts.out, seed);
        let meta = BTreeMap::from([
            ("seed".to_string(), seed.to_string()),
            ("onset_threshold".to_string(), threshold.to_string()),
            ("epochs".to_string(), tc.epochs.to_string()),
            ("final_train_bce".to_string(), fmt_num(final_train_bce)),
        ]);
        save_checkpoint(
            &checkpoint,
            &Checkpoint {
                config: net.clone(),
                params,
                meta,
            },
        )?;
        Ok((
            SeedResult {
                seed,
                metrics,
                threshold,
                final_train_bce,
                checkpoint,
            },
            baselines,
        ))
    });
    let mut rows = Vec::with_capacity(seeds.len());
    let mut baselines = None;
    for r in results {
        let (row, b) = r?;
        rows.push(row);
        baselines.get_or_insert(b);
    }
    let baselines = baselines.expect("at least one seed");
    let mean = mean_metrics(&rows);
    let best_seed = rows
        .iter()
        .min_by(|a, b| a.metrics.bce.total_cmp(&b.metrics.bce))
        .map(|r| r.seed)
        .expect("at least one seed");

    let [p_short, p_long] = pause_columns(cfg);
    let mut table = Table::new(["run", "seed", BCE_COLUMN, &p_short, &p_long, ONSET_COLUMN, "onset threshold", "best"]);
    for r in &rows {
        let mut row = vec![format!("seed {}", r.seed), r.seed.to_string()];
        row.extend(metric_cells(&r.metrics));
        row.push(fmt_num(r.threshold));
        row.push(if r.seed == best_seed { "*".into() } else { String::new() });
        table.push(row);
    }
    let mut row = vec!["mean".to_string(), String::new()];
    row.extend(metric_cells(&mean));
    row.extend([String::new(), String::new()]);
    table.push(row);
    table.push(vec![
        "majority baseline".into(),
        String::new(),
        String::new(),
        fmt_num(baselines.f1_pause[0]),
        fmt_num(baselines.f1_pause[1]),
        fmt_num(baselines.f1_onset),
        String::new(),
        String::new(),
    ]);
    table.write(&opts.out, REPORT_STEM)?;
    fs::write(
        opts.out.join("config.toml"),
        toml::to_string(cfg).map_err(|e| Error::Config(e.to_string()))?,
    )?;
    fs::write(
        opts.out.join("timing.txt"),
        format!("wall_seconds={:.3}\n", started.elapsed().as_secs_f64()),
    )?;
    Ok(RunReport {
        seeds: rows,
        mean,
        baselines,
        best_seed,
        table,
    })
}

// ------------------------------------------------------------ gridsearch

#[derive(Clone, Debug, PartialEq)]
pub struct GridCell {
    pub master_hidden: usize,
    pub subnet_hidden: Vec<usize>,
    pub dropout: f64,
    pub l2: f64,
    pub num_params: usize,
    pub heldout_bce: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridReport {
    pub cells: Vec<GridCell>,
    pub best: usize,
    pub table: Table,
}

/// Trains every combination of the grid on the fit split and ranks them by
/// held-out BCE; ties go to the smaller network. The test split is never
/// touched.
pub fn cmd_gridsearch(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<GridReport> {
    let grid = &cfg.grid;
    let hidden = if grid.hidden.is_empty() {
        let mut h = vec![cfg.network.master_hidden];
        h.extend(cfg.modalities.iter().map(|m| m.subnet_hidden));
        vec![h]
    } else {
        grid.hidden.clone()
    };
    if grid.dropout.is_empty() || grid.l2.is_empty() {
        return Err(Error::Config("grid dropout and l2 sets must be non-empty".into()));
    }
    let data = prepare(cfg, opts.exec, false)?;
    if data.dev.items.is_empty() {
        return Err(Error::Data("grid search needs held-out conversations (eval.dev_fraction)".into()));
    }

    let mut nets = Vec::new();
    for h in &hidden {
        let (&master, subnets) = h
            .split_first()
            .ok_or_else(|| Error::Config("empty hidden partition in grid".into()))?;
        for &d in &grid.dropout {
            for &l2 in &grid.l2 {
                let net = cfg.network_config_with(&data.fit.shapes, data.vocab.len(), master, subnets, d, l2)?;
                nets.push((master, subnets.to_vec(), d, l2, net));
            }
        }
    }
    let seed = opts.seed.unwrap_or(cfg.training.seeds[0]);
    let results = par::map(opts.exec, &nets, |(master, subnets, d, l2, net)| -> Result<GridCell> {
        let (params, _) = fit_model(net, &data.fit, &train_config(cfg, seed, opts.exec))?;
        let preds = predict(&params, net, &data.dev, opts.exec)?;
        let (m, _) = score_predictions(&preds, cfg.eval.pause_frames(), super::metrics::FALLBACK_ONSET_THRESHOLD)?;
        Ok(GridCell {
            master_hidden: *master,
            subnet_hidden: subnets.clone(),
            dropout: *d,
            l2: *l2,
            num_params: params.num_params(),
            heldout_bce: m.bce,
        })
    });
    let cells = results.into_iter().collect::<Result<Vec<_>>>()?;
    let best = best_cell(&cells);

    let mut table = Table::new(["cell", "master", "subnets", "dropout", "l2", "params", "held-out BCE", "best"]);
    for (i, c) in cells.iter().enumerate() {
        table.push(vec![
            i.to_string(),
            c.master_hidden.to_string(),
            c.subnet_hidden.iter().map(usize::to_string).collect::<Vec<_>>().join("/"),
            fmt_num(c.dropout),
            fmt_num(c.l2),
            c.num_params.to_string(),
            fmt_num(c.heldout_bce),
            if i == best { "*".into() } else { String::new() },
        ]);
    }
    table.write(&opts.out, GRID_STEM)?;
    Ok(GridReport { cells, best, table })
}

/// Lowest held-out BCE, then fewest parameters, then earliest.
pub fn best_cell(cells: &[GridCell]) -> usize {
    (0..cells.len())
        .min_by(|&a, &b| {
            cells[a]
                .heldout_bce
                .total_cmp(&cells[b].heldout_bce)
                .then(cells[a].num_params.cmp(&cells[b].num_params))
                .then(a.cmp(&b))
        })
        .expect("non-empty grid")
}

// -------------------------------------------------------------- evaluate

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub metrics: Metrics,
    pub baselines: Baselines,
    pub predictions: Vec<ConversationPrediction>,
    pub table: Table,
}

pub fn onset_threshold_of(ckpt: &Checkpoint) -> Result<f64> {
    ckpt.meta
        .get("onset_threshold")
        .map_or(Ok(super::metrics::FALLBACK_ONSET_THRESHOLD), |s| parse_num(s))
}

/// Scores a checkpoint on the test split, writing the metric table and one
/// prediction dump per conversation under `predictions/`.
pub fn cmd_evaluate(cfg: &ExperimentConfig, checkpoint: &Path, opts: &RunOptions) -> Result<EvalReport> {
    let ckpt = load_checkpoint(checkpoint)?;
    let corpus = load_corpus(&cfg.corpus_dir(), opts.exec)?;
    let test = build_dataset(&corpus.test, &cfg.modality_specs())?;
    if test.items.is_empty() {
        return Err(Error::Data("test split is empty".into()));
    }
    let names: Vec<&str> = ckpt.config.modalities.iter().map(|m| m.name.as_str()).collect();
    let built: Vec<&str> = test.shapes.iter().map(|s| s.name.as_str()).collect();
    if names != built {
        return Err(Error::Config(format!(
            "checkpoint modalities {names:?} do not match configured {built:?}"
        )));
    }
    let threshold = onset_threshold_of(&ckpt)?;
    let predictions = predict(&ckpt.params, &ckpt.config, &test, opts.exec)?;
    let (metrics, baselines) = score_predictions(&predictions, cfg.eval.pause_frames(), threshold)?;
    dump_predictions(&opts.out.join("predictions"), &predictions)?;

    let [p_short, p_long] = pause_columns(cfg);
    let mut table = Table::new(["run", BCE_COLUMN, &p_short, &p_long, ONSET_COLUMN]);
    let name = checkpoint.file_name().map_or_else(|| checkpoint.display().to_string(), |n| n.to_string_lossy().into());
    let mut row = vec![format!("{} {name}", ckpt.config.arrangement)];
    row.extend(metric_cells(&metrics));
    table.push(row);
    table.push(vec![
        "majority baseline".into(),
        String::new(),
        fmt_num(baselines.f1_pause[0]),
        fmt_num(baselines.f1_pause[1]),
        fmt_num(baselines.f1_onset),
    ]);
    table.push(vec![
        "events".into(),
        String::new(),
        metrics.n_pause[0].to_string(),
        metrics.n_pause[1].to_string(),
        metrics.n_onset.to_string(),
    ]);
    table.write(&opts.out, EVAL_STEM)?;
    Ok(EvalReport {
        metrics,
        baselines,
        predictions,
        table,
    })
}

// ------------------------------------------------------------- gradcheck

#[derive(Clone, Debug)]
pub struct GradcheckReport {
    pub passed: bool,
    pub table: Table,
}

/// Finite-difference check of every trainable tensor for each arrangement
/// and clock combination, unrolled over 1 and 10 master ticks.
pub fn cmd_gradcheck(opts: &RunOptions, fault: Fault) -> Result<GradcheckReport> {
    let seed = opts.seed.unwrap_or(0);
    let mut cases = Vec::new();
    for n_steps in [1, 10] {
        for case in standard_cases(n_steps, seed)? {
            cases.push((n_steps, case));
        }
    }
    let reports = par::map(opts.exec, &cases, |(n, case)| check_case(case, fault).map(|r| (*n, r)));
    let mut table = Table::new(["case", "steps", "tensor", "max relative error", "status"]);
    let mut passed = true;
    for r in reports {
        let (n, report) = r?;
        for (tensor, err) in &report.tensors {
            let ok = *err < GRADCHECK_TOL;
            passed &= ok;
            table.push(vec![
                report.name.clone(),
                n.to_string(),
                tensor.clone(),
                format!("{err:.3e}"),
                if ok { "ok" } else { "FAIL" }.into(),
            ]);
        }
    }
    table.write(&opts.out, GRADCHECK_STEM)?;
    Ok(GradcheckReport { passed, table })
}

// --------------------------------------------------------------- compare

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub metric: String,
    pub mean_a: f64,
    pub mean_b: f64,
    pub p_value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompareReport {
    pub rows: Vec<Comparison>,
    pub table: Table,
}

/// Per-seed values of every metric column in a training report.
pub fn seed_columns(report: &Table) -> Result<Vec<(String, Vec<f64>)>> {
    let run = report.column("run").ok_or_else(|| Error::Data("report lacks a `run` column".into()))?;
    let metrics: Vec<usize> = (0..report.header.len())
        .filter(|&c| report.header[c] == BCE_COLUMN || report.header[c].starts_with("f1 "))
        .collect();
    metrics
        .into_iter()
        .map(|c| {
            let values = report
                .rows
                .iter()
                .filter(|r| r[run].starts_with("seed "))
                .map(|r| parse_num(&r[c]))
                .collect::<Result<Vec<_>>>()?;
            Ok((report.header[c].clone(), values))
        })
        .collect()
}

/// Welch t-test per metric between the seeds of two training reports.
pub fn cmd_compare(report_a: &Path, report_b: &Path, opts: &RunOptions) -> Result<CompareReport> {
    let a = seed_columns(&Table::read_csv(report_a)?)?;
    let b = seed_columns(&Table::read_csv(report_b)?)?;
    let mut rows = Vec::new();
    let mut table = Table::new(["metric", "mean A", "mean B", "t", "df", "p", "significant"]);
    for (name, va) in &a {
        let Some((_, vb)) = b.iter().find(|(n, _)| n == name) else {
            continue;
        };
        if va.iter().chain(vb).any(|v| v.is_nan()) {
            log::warn!("skipping `{name}`: undefined values");
            continue;
        }
        let t = ttest_two_tailed(va, vb)?;
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let row = Comparison {
            metric: name.clone(),
            mean_a: mean(va),
            mean_b: mean(vb),
            p_value: t.p_value,
        };
        table.push(vec![
            name.clone(),
            fmt_num(row.mean_a),
            fmt_num(row.mean_b),
            fmt_num(t.t),
            fmt_num(t.df),
            fmt_num(t.p_value),
            if t.p_value < SIGNIFICANCE_LEVEL { "yes" } else { "no" }.into(),
        ]);
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Data("reports share no comparable metric".into()));
    }
    table.write(&opts.out, COMPARE_STEM)?;
    Ok(CompareReport { rows, table })
}
