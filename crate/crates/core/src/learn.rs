//! Log-linear ranking of candidates and training from answers alone.
//!
//! The probability of a candidate is the softmax of `θ·φ` over the candidate
//! list. Training maximizes the log of the total probability of candidates
//! whose denotation matches the gold answer, one example at a time, with
//! AdaGrad steps followed by an L1 shrink of every touched weight.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::exec::Denotation;
use crate::feat::{Context, FeatureVector};
use crate::graph::KnowledgeGraph;
use crate::parser::{parse_in, Derivation, ParserConfig, Utterance};
use crate::text;
use crate::value::Value;

pub const MODEL_HEADER: &str = "tablequery-model v1";

/// Graphs by table reference, as written in a dataset file.
pub type Tables = BTreeMap<String, KnowledgeGraph>;

pub type Gradient = BTreeMap<String, f64>;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("no candidates to score")]
    EmptyCandidates,
    #[error("no candidate matches the gold answer")]
    NoReachableGold,
    #[error("example {id} refers to unknown table {table}")]
    UnresolvedTable { id: String, table: String },
    #[error("invalid training configuration: {0}")]
    BadConfig(String),
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("missing model header {MODEL_HEADER:?}")]
    BadHeader,
    #[error("line {line}: expected feature<TAB>weight, found {content:?}")]
    BadLine { line: usize, content: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Model {
    pub weights: BTreeMap<String, f64>,
    /// Sum of squared gradients per feature.
    pub accum: BTreeMap<String, f64>,
    pub steps: u64,
}

impl Model {
    pub fn weight(&self, name: &str) -> f64 {
        self.weights.get(name).copied().unwrap_or(0.0)
    }

    pub fn score(&self, f: &FeatureVector) -> f64 {
        f.iter().map(|(k, v)| self.weight(k) * v).sum()
    }

    /// The header line, then `feature<TAB>weight` for every nonzero weight.
    pub fn to_text(&self) -> String {
        let mut out = format!("{}\n", MODEL_HEADER);
        for (k, v) in &self.weights {
            if *v != 0.0 {
                out.push_str(&format!("{}\t{:e}\n", k, v));
            }
        }
        out
    }

    pub fn from_text(s: &str) -> Result<Model, ModelError> {
        let mut lines = s.lines();
        if lines.next().map(str::trim_end) != Some(MODEL_HEADER) {
            return Err(ModelError::BadHeader);
        }
        let mut weights = BTreeMap::new();
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = || ModelError::BadLine {
                line: i + 2,
                content: line.to_string(),
            };
            let (k, v) = line.rsplit_once('\t').ok_or_else(bad)?;
            let v: f64 = v.trim().parse().map_err(|_| bad())?;
            if !v.is_finite() {
                return Err(bad());
            }
            weights.insert(k.to_string(), v);
        }
        Ok(Model {
            weights,
            ..Model::default()
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        Ok(std::fs::write(path, self.to_text())?)
    }

    pub fn load(path: &Path) -> Result<Model, ModelError> {
        Model::from_text(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub id: String,
    pub utterance: Utterance,
    pub table: String,
    /// Answer strings as written in the dataset.
    pub gold: Vec<String>,
}

impl Example {
    pub fn new(id: &str, question: &str, table: &str, gold: &[&str]) -> Example {
        Example {
            id: id.to_string(),
            utterance: Utterance::new(question),
            table: table.to_string(),
            gold: gold.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn graph<'t>(&self, tables: &'t Tables) -> Result<&'t KnowledgeGraph, LearnError> {
        tables.get(&self.table).ok_or_else(|| LearnError::UnresolvedTable {
            id: self.id.clone(),
            table: self.table.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub l1: f64,
    pub passes: usize,
    pub eta0: f64,
    pub seed: u64,
    /// Feature-name prefixes to drop, e.g. `pp` or `hd::lex`.
    pub ablate: Vec<String>,
    pub skip_unreachable: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            l1: 3e-5,
            passes: 3,
            eta0: 1.0,
            seed: 0,
            ablate: Vec::new(),
            skip_unreachable: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), LearnError> {
        if !(self.l1 >= 0.0 && self.l1.is_finite()) {
            return Err(LearnError::BadConfig(format!("l1 must be >= 0, got {}", self.l1)));
        }
        if self.passes == 0 {
            return Err(LearnError::BadConfig("passes must be >= 1".into()));
        }
        if !(self.eta0 > 0.0 && self.eta0.is_finite()) {
            return Err(LearnError::BadConfig(format!("eta0 must be > 0, got {}", self.eta0)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Metrics {
    pub correct: usize,
    pub oracle: usize,
    pub total: usize,
}

impl Metrics {
    pub fn accuracy(&self) -> f64 {
        ratio(self.correct, self.total)
    }

    pub fn oracle_rate(&self) -> f64 {
        ratio(self.oracle, self.total)
    }

    fn add(&mut self, correct: bool, reachable: bool) {
        self.total += 1;
        self.correct += correct as usize;
        self.oracle += reachable as usize;
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

impl fmt::Display for Metrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "accuracy={:.4} oracle={:.4} n={}",
            self.accuracy(),
            self.oracle_rate(),
            self.total
        )
    }
}

/// What one training pass saw.
#[derive(Debug, Clone, PartialEq)]
pub struct PassReport {
    /// Predictions made before each update.
    pub online: Metrics,
    /// Mean marginal log-likelihood over reachable examples, before each
    /// update.
    pub mean_loglik: f64,
    pub unreachable: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub passes: Vec<PassReport>,
    /// The trained model evaluated on the training examples.
    pub final_metrics: Metrics,
}

// Answer matching

/// Whether a denotation equals the gold answer strings as sets.
pub fn answer_matches(den: &Denotation, gold: &[String]) -> bool {
    if den.is_empty() || gold.is_empty() {
        return false;
    }
    den.iter().all(|v| gold.iter().any(|g| value_matches(v, g)))
        && gold.iter().all(|g| den.iter().any(|v| value_matches(v, g)))
}

/// Case-insensitive text, numbers within 1e-6, and a bare year equal to
/// the same number.
pub fn value_matches(v: &Value, gold: &str) -> bool {
    let gold = gold.trim();
    let num = text::parse_exact_number(gold);
    let close = |x: f64| num.map_or(false, |n| (n.get() - x).abs() <= 1e-6);
    match v {
        Value::Num(n) => close(n.get()),
        Value::Date(d) => {
            d.bare_year().map_or(false, |y| close(y as f64))
                || text::parse_date(gold) == Some(*d)
                || d.to_string() == gold
        }
        Value::Text(s) => {
            s.trim().to_lowercase() == gold.to_lowercase()
                || text::parse_exact_number(s).map_or(false, |n| close(n.get()))
        }
        Value::Row(_) => v.render() == gold,
    }
}

// The objective

/// Log-softmax of `θ·φ` over the candidates.
pub fn candidate_logprobs(m: &Model, feats: &[FeatureVector]) -> Result<Vec<f64>, LearnError> {
    let scores: Vec<f64> = feats.iter().map(|f| m.score(f)).collect();
    log_softmax(&scores)
}

fn log_softmax(scores: &[f64]) -> Result<Vec<f64>, LearnError> {
    let max = scores
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(LearnError::EmptyCandidates);
    }
    let log_z = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
    Ok(scores.iter().map(|s| s - log_z).collect())
}

fn log_sum_exp(xs: impl Iterator<Item = f64>) -> f64 {
    let xs: Vec<f64> = xs.collect();
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return f64::NEG_INFINITY;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Log of the total probability of the candidates flagged correct;
/// negative infinity when none is.
pub fn log_marginal(m: &Model, feats: &[FeatureVector], correct: &[bool]) -> f64 {
    match candidate_logprobs(m, feats) {
        Ok(lp) => log_sum_exp(lp.into_iter().zip(correct).filter(|(_, c)| **c).map(|(l, _)| l)),
        Err(_) => f64::NEG_INFINITY,
    }
}

/// `E[φ | correct] − E[φ]` under the model's candidate distribution.
pub fn expectation_gradient(
    m: &Model,
    feats: &[FeatureVector],
    correct: &[bool],
) -> Result<Gradient, LearnError> {
    let lp = candidate_logprobs(m, feats)?;
    let log_good = log_sum_exp(lp.iter().zip(correct).filter(|(_, c)| **c).map(|(l, _)| *l));
    if !log_good.is_finite() {
        return Err(LearnError::NoReachableGold);
    }
    let mut g = Gradient::new();
    for ((f, l), c) in feats.iter().zip(&lp).zip(correct) {
        let p = l.exp();
        let q = if *c { (l - log_good).exp() } else { 0.0 };
        let w = q - p;
        if w == 0.0 {
            continue;
        }
        for (k, v) in f.iter() {
            *g.entry(k.to_string()).or_default() += w * v;
        }
    }
    g.retain(|_, v| *v != 0.0);
    Ok(g)
}

fn correctness(ex: &Example, candidates: &[Derivation]) -> Vec<bool> {
    candidates
        .iter()
        .map(|d| answer_matches(&d.denotation, &ex.gold))
        .collect()
}

fn features_of(candidates: &[Derivation]) -> Vec<FeatureVector> {
    candidates.iter().map(|d| d.features.clone()).collect()
}

/// Marginal log-likelihood of the gold answer over parsed candidates.
pub fn marginal_loglik(m: &Model, ex: &Example, candidates: &[Derivation]) -> f64 {
    log_marginal(m, &features_of(candidates), &correctness(ex, candidates))
}

pub fn gradient(m: &Model, ex: &Example, candidates: &[Derivation]) -> Result<Gradient, LearnError> {
    expectation_gradient(m, &features_of(candidates), &correctness(ex, candidates))
}

/// One AdaGrad ascent step on every coordinate of `grad`, then the L1
/// shrink of those coordinates.
pub fn adagrad_step(m: &mut Model, grad: &Gradient, cfg: &TrainConfig) {
    for (k, g) in grad {
        if *g == 0.0 || !g.is_finite() {
            continue;
        }
        let acc = m.accum.entry(k.clone()).or_default();
        *acc += g * g;
        let eta = cfg.eta0 / acc.sqrt();
        let w = m.weight(k) + eta * g;
        let shrunk = w.signum() * (w.abs() - eta * cfg.l1).max(0.0);
        if shrunk == 0.0 {
            m.weights.remove(k);
        } else {
            m.weights.insert(k.clone(), shrunk);
        }
    }
    m.steps += 1;
}

// Training and prediction

fn candidates(
    ex: &Example,
    tables: &Tables,
    m: &Model,
    pcfg: &ParserConfig,
    ablate: &[String],
) -> Result<Vec<Derivation>, LearnError> {
    let w = ex.graph(tables)?;
    let ctx = Context::new(&ex.utterance, w).ablate(ablate);
    Ok(parse_in(&ctx, m, pcfg))
}

/// The highest-scoring candidate; candidates come sorted from the parser.
pub fn best(candidates: &[Derivation]) -> Option<&Derivation> {
    candidates.first()
}

pub fn predict(x: &Utterance, w: &KnowledgeGraph, m: &Model, pcfg: &ParserConfig) -> Denotation {
    let ctx = Context::new(x, w);
    best(&parse_in(&ctx, m, pcfg))
        .map(|d| d.denotation.clone())
        .unwrap_or_default()
}

fn shuffled(n: usize, seed: u64, pass: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(pass as u64));
    order.shuffle(&mut rng);
    order
}

/// Train from scratch; see [`train_from`].
pub fn train(
    data: &[Example],
    tables: &Tables,
    pcfg: &ParserConfig,
    tcfg: &TrainConfig,
) -> Result<(Model, TrainReport), LearnError> {
    train_from(Model::default(), data, tables, pcfg, tcfg)
}

/// `tcfg.passes` passes over `data` in a seeded shuffled order, one update
/// per example with a reachable answer.
pub fn train_from(
    mut m: Model,
    data: &[Example],
    tables: &Tables,
    pcfg: &ParserConfig,
    tcfg: &TrainConfig,
) -> Result<(Model, TrainReport), LearnError> {
    tcfg.validate()?;
    for ex in data {
        ex.graph(tables)?;
    }
    let mut passes = Vec::with_capacity(tcfg.passes);
    for pass in 0..tcfg.passes {
        let mut online = Metrics::default();
        let mut logliks = Vec::new();
        let mut unreachable = Vec::new();
        for i in shuffled(data.len(), tcfg.seed, pass) {
            let ex = &data[i];
            let cands = candidates(ex, tables, &m, pcfg, &tcfg.ablate)?;
            let correct = correctness(ex, &cands);
            let reachable = correct.iter().any(|c| *c);
            online.add(!correct.is_empty() && correct[0], reachable);
            if !reachable {
                log::debug!("{}: no candidate reaches the answer", ex.id);
                unreachable.push(ex.id.clone());
                continue;
            }
            let feats = features_of(&cands);
            logliks.push(log_marginal(&m, &feats, &correct));
            let g = expectation_gradient(&m, &feats, &correct)?;
            adagrad_step(&mut m, &g, tcfg);
        }
        let mean_loglik = if logliks.is_empty() {
            0.0
        } else {
            logliks.iter().sum::<f64>() / logliks.len() as f64
        };
        log::info!("pass {}: online {} loglik={:.4}", pass + 1, online, mean_loglik);
        passes.push(PassReport {
            online,
            mean_loglik,
            unreachable,
        });
    }
    let final_metrics = evaluate(data, tables, &m, pcfg)?;
    Ok((
        m,
        TrainReport {
            passes,
            final_metrics,
        },
    ))
}

/// Accuracy of the top candidate and oracle over all candidates.
pub fn evaluate(
    data: &[Example],
    tables: &Tables,
    m: &Model,
    pcfg: &ParserConfig,
) -> Result<Metrics, LearnError> {
    let mut metrics = Metrics::default();
    for ex in data {
        let cands = candidates(ex, tables, m, pcfg, &[])?;
        let correct = correctness(ex, &cands);
        metrics.add(correct.first() == Some(&true), correct.iter().any(|c| *c));
    }
    Ok(metrics)
}

// IR baseline

/// Table cells as answer candidates, each with the answer-side features of
/// the main system.
fn cell_candidates(ctx: &Context<'_>) -> Vec<(Value, FeatureVector)> {
    let w = ctx.w;
    let mut cells: BTreeMap<Value, BTreeSet<String>> = BTreeMap::new();
    for c in w.columns() {
        if let Ok(edges) = w.edges(c) {
            for (_, cell) in edges {
                cells.entry(cell.clone()).or_default().insert(c.clone());
            }
        }
    }
    cells
        .into_iter()
        .map(|(cell, cols)| {
            let typed = cell_value(&cell);
            let column = (cols.len() == 1).then(|| cols.iter().next().unwrap().as_str());
            let f = ctx.denotation(&Denotation::new([typed]), column);
            (cell, f)
        })
        .collect()
}

/// A cell read as a date or number when it is exactly one.
fn cell_value(cell: &Value) -> Value {
    let Value::Text(s) = cell else { return cell.clone() };
    if let Some(d) = text::parse_date(s) {
        return Value::Date(d);
    }
    match text::parse_exact_number(s) {
        Some(n) => Value::Num(n),
        None => cell.clone(),
    }
}

/// Train and evaluate a ranker over table cells instead of logical forms.
pub fn ir_baseline(data: &[Example], tables: &Tables, tcfg: &TrainConfig) -> Result<(Model, Metrics), LearnError> {
    tcfg.validate()?;
    let mut prepared = Vec::with_capacity(data.len());
    for ex in data {
        let w = ex.graph(tables)?;
        let ctx = Context::new(&ex.utterance, w).ablate(&tcfg.ablate);
        let cands = cell_candidates(&ctx);
        let correct: Vec<bool> = cands
            .iter()
            .map(|(v, _)| answer_matches(&Denotation::new([v.clone()]), &ex.gold))
            .collect();
        let feats: Vec<FeatureVector> = cands.into_iter().map(|(_, f)| f).collect();
        prepared.push((feats, correct));
    }
    let mut m = Model::default();
    for pass in 0..tcfg.passes {
        for i in shuffled(data.len(), tcfg.seed, pass) {
            let (feats, correct) = &prepared[i];
            if let Ok(g) = expectation_gradient(&m, feats, correct) {
                adagrad_step(&mut m, &g, tcfg);
            }
        }
    }
    let mut metrics = Metrics::default();
    for (feats, correct) in &prepared {
        let top = top_index(&m, feats);
        metrics.add(
            top.map_or(false, |i| correct[i]),
            correct.iter().any(|c| *c),
        );
    }
    Ok((m, metrics))
}

/// Index of the best-scoring item; the earliest wins ties.
fn top_index(m: &Model, feats: &[FeatureVector]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, f) in feats.iter().enumerate() {
        let s = m.score(f);
        if best.map_or(true, |(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| i)
}
