//! The `tablequery` command line.
//!
//! ```text
//! tablequery train --dataset mini.tsv --model-out m.model
//! tablequery evaluate --dataset mini.tsv --model m.model
//! tablequery predict --question "How many events were in Athens, Greece?" --table olympics.tsv --model m.model
//! tablequery repl --table olympics.tsv
//! tablequery dump-graph --table olympics.tsv
//! tablequery dump-candidates --question "..." --table olympics.tsv
//! ```
//!
//! Exit status is 0 on success, 1 when a file cannot be read or written,
//! and 2 for bad arguments or malformed input.

use std::ffi::OsString;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::dataset::{self, DatasetError};
use crate::dcs;
use crate::exec;
use crate::feat::Context;
use crate::graph::{build_graph, KnowledgeGraph, Table, TableError};
use crate::learn::{self, Example, Model, ModelError, Tables, TrainConfig};
use crate::parser::{self, ParserConfig, RuleSet, Utterance};

#[derive(Debug, Parser)]
#[command(name = "tablequery", version, about = "Answer questions about tables")]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model on a dataset and save it.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        model_out: Option<PathBuf>,
        #[command(flatten)]
        parser: ParserArgs,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Report accuracy and oracle on a dataset.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, alias = "model-in")]
        model: Option<PathBuf>,
        #[command(flatten)]
        parser: ParserArgs,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Answer one question.
    Predict {
        #[arg(long)]
        question: String,
        #[arg(long)]
        table: PathBuf,
        #[arg(long, alias = "model-in")]
        model: Option<PathBuf>,
        #[command(flatten)]
        parser: ParserArgs,
    },
    /// Ask questions interactively; `:lf <form>` executes a logical form.
    Repl {
        #[arg(long)]
        table: PathBuf,
        #[arg(long, alias = "model-in")]
        model: Option<PathBuf>,
        #[command(flatten)]
        parser: ParserArgs,
    },
    /// Print the knowledge graph, one edge per line.
    DumpGraph {
        #[arg(long)]
        table: PathBuf,
    },
    /// Print every candidate for a question with its score and answer.
    DumpCandidates {
        #[arg(long)]
        question: String,
        #[arg(long)]
        table: PathBuf,
        #[arg(long, alias = "model-in")]
        model: Option<PathBuf>,
        #[command(flatten)]
        parser: ParserArgs,
    },
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Examples as `id<TAB>utterance<TAB>table<TAB>answer|answer`.
    #[arg(long)]
    dataset: PathBuf,
    /// Directory table paths are relative to [default: the dataset's directory].
    #[arg(long)]
    tables_root: Option<PathBuf>,
    /// Public-dataset layout: tables resolve against the dataset directory's
    /// parent, and examples whose table cannot be loaded are skipped.
    #[arg(long)]
    full_run: bool,
}

#[derive(Debug, Args)]
struct ParserArgs {
    #[arg(long, default_value_t = 200)]
    beam_size: usize,
    #[arg(long, default_value_t = 7)]
    max_size: usize,
    /// full, join_only, join_count, join_count_superlative or no_union_intersect.
    #[arg(long, default_value = "full")]
    rule_set: String,
    /// Fire operator rules only when a trigger word occurs.
    #[arg(long)]
    trigger_words: bool,
    #[arg(long)]
    no_pruning: bool,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Comma-separated feature families to drop, e.g. `pp,hd`.
    #[arg(long, value_delimiter = ',')]
    ablate_features: Vec<String>,
    #[arg(long, default_value_t = 3e-5)]
    l1: f64,
    #[arg(long, default_value_t = 3)]
    passes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum)]
    baseline: Option<Baseline>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Baseline {
    /// Rank table cells instead of logical forms.
    Ir,
    /// Joins and counts only.
    Wq,
}

/// A failure tied to a file rather than to its contents.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct IoFailure(String);

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).try_init();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match dispatch(cli.command, &mut out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            exit_code(&e)
        }
    }
}

fn describe(e: &anyhow::Error) -> String {
    let mut msg = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !msg.contains(&text) {
            if !msg.is_empty() {
                msg.push_str(": ");
            }
            msg.push_str(&text);
        }
    }
    msg
}

fn exit_code(e: &anyhow::Error) -> i32 {
    let io = e.chain().any(|c| {
        c.is::<io::Error>()
            || c.is::<IoFailure>()
            || matches!(c.downcast_ref::<ModelError>(), Some(ModelError::Io(_)))
            || matches!(c.downcast_ref::<DatasetError>(), Some(DatasetError::Io { .. }))
            || matches!(c.downcast_ref::<TableError>(), Some(TableError::Io { .. }))
    });
    if io {
        1
    } else {
        2
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Train {
            data,
            model_out,
            parser,
            train,
        } => {
            let (examples, tables) = load_data(&data)?;
            let pcfg = parser_config(&parser, train.baseline)?;
            let tcfg = train_config(&train, &data)?;
            if train.baseline == Some(Baseline::Ir) {
                let (model, metrics) = learn::ir_baseline(&examples, &tables, &tcfg)?;
                save(&model, model_out.as_deref())?;
                writeln!(out, "{}", metrics)?;
                return Ok(());
            }
            let (model, report) = learn::train(&examples, &tables, &pcfg, &tcfg)?;
            for (i, pass) in report.passes.iter().enumerate() {
                writeln!(
                    out,
                    "pass {} online {} loglik={:.6}",
                    i + 1,
                    pass.online,
                    pass.mean_loglik
                )?;
            }
            save(&model, model_out.as_deref())?;
            writeln!(out, "{}", report.final_metrics)?;
        }
        Command::Evaluate {
            data,
            model,
            parser,
            train,
        } => {
            let (examples, tables) = load_data(&data)?;
            let pcfg = parser_config(&parser, train.baseline)?;
            let metrics = if train.baseline == Some(Baseline::Ir) {
                let tcfg = train_config(&train, &data)?;
                learn::ir_baseline(&examples, &tables, &tcfg)?.1
            } else {
                learn::evaluate(&examples, &tables, &load_model(model.as_deref())?, &pcfg)?
            };
            writeln!(out, "{}", metrics)?;
        }
        Command::Predict {
            question,
            table,
            model,
            parser,
        } => {
            let w = load_graph(&table)?;
            let m = load_model(model.as_deref())?;
            let den = learn::predict(&Utterance::new(&question), &w, &m, &parser_config(&parser, None)?);
            writeln!(out, "{}", den.render())?;
        }
        Command::Repl {
            table,
            model,
            parser,
        } => {
            let w = load_graph(&table)?;
            let m = load_model(model.as_deref())?;
            let pcfg = parser_config(&parser, None)?;
            let stdin = io::stdin();
            repl(&w, &m, &pcfg, &mut stdin.lock(), out)?;
        }
        Command::DumpGraph { table } => {
            write!(out, "{}", load_graph(&table)?.dump())?;
        }
        Command::DumpCandidates {
            question,
            table,
            model,
            parser,
        } => {
            let w = load_graph(&table)?;
            let m = load_model(model.as_deref())?;
            let x = Utterance::new(&question);
            let candidates = parser::parse(&x, &w, &m, &parser_config(&parser, None)?);
            write!(out, "{}", parser::dump_candidates(&candidates))?;
        }
    }
    Ok(())
}

fn repl(
    w: &KnowledgeGraph,
    m: &Model,
    pcfg: &ParserConfig,
    input: &mut dyn BufRead,
    out: &mut dyn Write,
) -> Result<()> {
    let mut line = String::new();
    loop {
        write!(out, "> ")?;
        out.flush()?;
        line.clear();
        if input.read_line(&mut line)? == 0 {
            writeln!(out)?;
            return Ok(());
        }
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line == ":quit" || line == ":q" {
            return Ok(());
        }
        if let Some(src) = line.strip_prefix(":lf") {
            match dcs::parse(src.trim()) {
                Ok(z) => match exec::execute(&z, w) {
                    Ok(d) => writeln!(out, "{}", d.render())?,
                    Err(e) => writeln!(out, "error: {}", e)?,
                },
                Err(e) => writeln!(out, "error: {}", e)?,
            }
            continue;
        }
        let x = Utterance::new(line);
        let ctx = Context::new(&x, w);
        let candidates = parser::parse_in(&ctx, m, pcfg);
        match learn::best(&candidates) {
            Some(d) => writeln!(out, "{}\t{}", d.denotation.render(), d.canonical)?,
            None => writeln!(out, "(no candidates)")?,
        }
    }
}

fn parser_config(args: &ParserArgs, baseline: Option<Baseline>) -> Result<ParserConfig> {
    let mut rule_set: RuleSet = args.rule_set.parse()?;
    if baseline == Some(Baseline::Wq) {
        rule_set = RuleSet::JoinCount;
    }
    let cfg = ParserConfig {
        beam_size: args.beam_size,
        max_size: args.max_size,
        rule_set,
        trigger_words: args.trigger_words,
        pruning: !args.no_pruning,
        ..ParserConfig::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

fn train_config(args: &TrainArgs, data: &DataArgs) -> Result<TrainConfig> {
    for family in &args.ablate_features {
        if !crate::feat::FAMILIES.contains(&family.as_str()) {
            bail!(
                "unknown feature family {:?} (expected one of {})",
                family,
                crate::feat::FAMILIES.join(", ")
            );
        }
    }
    let cfg = TrainConfig {
        l1: args.l1,
        passes: args.passes,
        seed: args.seed,
        ablate: args.ablate_features.clone(),
        skip_unreachable: true,
        ..TrainConfig::default()
    };
    cfg.validate()?;
    if data.full_run {
        log::info!("full run: {} passes, l1={}", cfg.passes, cfg.l1);
    }
    Ok(cfg)
}

fn load_data(args: &DataArgs) -> Result<(Vec<Example>, Tables)> {
    let examples = dataset::load_dataset(&args.dataset)?;
    let dir = dataset::tables_root(&args.dataset);
    let root = match (&args.tables_root, args.full_run) {
        (Some(r), _) => r.clone(),
        (None, true) => dir.parent().map(Path::to_path_buf).unwrap_or(dir),
        (None, false) => dir,
    };
    if !args.full_run {
        let tables = dataset::load_tables(&examples, &root)?;
        return Ok((examples, tables));
    }
    let mut tables = Tables::new();
    let mut kept = Vec::with_capacity(examples.len());
    for ex in examples {
        if !tables.contains_key(&ex.table) {
            match Table::load(&root.join(&ex.table)) {
                Ok(t) => {
                    tables.insert(ex.table.clone(), build_graph(&t));
                }
                Err(e) => {
                    log::warn!("{}: skipped, {}", ex.id, e);
                    continue;
                }
            }
        }
        kept.push(ex);
    }
    log::info!("{} examples over {} tables", kept.len(), tables.len());
    Ok((kept, tables))
}

fn load_graph(path: &Path) -> Result<KnowledgeGraph> {
    let table = Table::load(path)?;
    let w = build_graph(&table);
    for warning in w.warnings() {
        log::warn!("{}", warning);
    }
    Ok(w)
}

fn load_model(path: Option<&Path>) -> Result<Model> {
    match path {
        Some(p) => Model::load(p).with_context(|| format!("loading model {}", p.display())),
        None => Ok(Model::default()),
    }
}

fn save(model: &Model, path: Option<&Path>) -> Result<()> {
    if let Some(p) = path {
        model
            .save(p)
            .map_err(|e| IoFailure(format!("writing model {}: {}", p.display(), e)))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run(["tablequery", "frobnicate"]), 2);
        assert_eq!(run(["tablequery", "predict", "--table", "x.tsv"]), 2);
    }

    #[test]
    fn missing_files_exit_1() {
        assert_eq!(run(["tablequery", "dump-graph", "--table", "/nonexistent/t.tsv"]), 1);
    }

    #[test]
    fn repl_answers_forms_and_questions() {
        let w = crate::fixture::olympics_graph();
        let mut input = io::Cursor::new(":lf count(City.Athens)\n:lf count(\nwhich city hosted in 2008?\n");
        let mut out = Vec::new();
        repl(&w, &Model::default(), &ParserConfig::default(), &mut input, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "> 2");
        assert!(lines[1].starts_with("> error: "));
        assert!(lines[2].starts_with("> "));
        assert!(lines[2].contains('\t'));
    }

    #[test]
    fn wq_forces_join_count() {
        let args = ParserArgs {
            beam_size: 200,
            max_size: 7,
            rule_set: "full".into(),
            trigger_words: false,
            no_pruning: false,
        };
        assert_eq!(parser_config(&args, Some(Baseline::Wq)).unwrap().rule_set, RuleSet::JoinCount);
        assert_eq!(parser_config(&args, None).unwrap().rule_set, RuleSet::Full);
    }
}
