//! The `topicsent` command line: a pipeline of subcommands sharing one
//! working directory.
//!
//! ```text
//! <workdir>/
//!   data/        train.tsv validation.tsv test.tsv manifest.json
//!                vocab.tsv topics.tsv labels.json
//!   embed/       checkpoint.json embeddings.tsv outputs.tsv history.json
//!   classifier-<k>class/   checkpoint.json history.json
//!   eval-<k>class/<split>/ report.json confusion.csv metrics.csv
//!   baseline/    report.json confusion_<arm>.csv
//!   report/      insight grids and rankings
//!   manifests/   <command>.json
//! ```

pub mod config;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use topicsent::baseline::compare_embeddings;
use topicsent::checkpoint::Checkpoint;
use topicsent::classifier::{
    make_examples, predict_all_topics_with, train_classifier_with, ClassifierModel, Prediction,
};
use topicsent::corpus::{duplicate_ids, parse_dataset, rebalance, split, SplitSet};
use topicsent::evalkit::{class_names, EvalReport};
use topicsent::files::write_atomic;
use topicsent::insight::{default_grid_shape, export_report, top_words, top_words_csv, word_grid, Sign};
use topicsent::vocab::{build_label_matrix, TopicIndex, Vocabulary};
use topicsent::word2topic::{export_table_with, train_word2topic_with, EmbeddingTable, WordVectors};
use topicsent::Execution;

use crate::config::{Config, Seeds};

#[derive(Debug, Parser)]
#[command(name = "topicsent", version, about = "Topic-conditioned tweet sentiment")]
pub struct Cli {
    /// TOML configuration; defaults apply to anything it leaves out.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Directory holding all artifacts.
    #[arg(long, global = true, default_value = "work")]
    pub workdir: PathBuf,

    /// Process minibatch chunks one after another instead of in parallel.
    /// Results are identical either way.
    #[arg(long, global = true)]
    pub sequential: bool,

    /// More log output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    /// Only log errors.
    #[arg(short, long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Clean, rebalance and split a TSV corpus; build vocabulary, topic index
    /// and the word-topic label matrix.
    Preprocess {
        /// Corpus TSV (`id<TAB>text<TAB>topic<TAB>score`); overrides `data.input`.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Train the word-topic model and export its embedding table.
    TrainEmbed,
    /// Train the topic-conditioned classifier.
    TrainClf,
    /// Compare word-topic embeddings with another table under logistic regression.
    Baseline {
        /// `word<TAB>floats` comparison table; overrides `baseline.vectors`.
        #[arg(long)]
        vectors: Option<PathBuf>,
    },
    /// Score a trained classifier on one split.
    Evaluate {
        #[arg(long, value_enum, default_value_t = SplitName::Test)]
        split: SplitName,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Predict sentiment of one tweet toward a topic, or toward every topic.
    Predict {
        #[arg(long)]
        tweet: String,
        #[arg(long, required_unless_present = "all_topics", conflicts_with = "all_topics")]
        topic: Option<String>,
        /// One prediction per known topic.
        #[arg(long)]
        all_topics: bool,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Print a word's topic scores as a grid CSV.
    ExplainWord {
        word: String,
        #[arg(long, requires = "cols")]
        rows: Option<usize>,
        #[arg(long, requires = "rows")]
        cols: Option<usize>,
        /// Write the grid here (and the topic-name grid next to it) instead
        /// of printing it.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        table: TableArgs,
    },
    /// Rank the most positive or negative words for a topic.
    TopWords {
        #[arg(long)]
        topic: String,
        #[arg(short)]
        k: Option<usize>,
        #[arg(long, default_value = "positive")]
        sign: Sign,
        /// Also rank words never seen with the topic in training.
        #[arg(long)]
        include_unsupported: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        table: TableArgs,
    },
    /// Write word grids and top-word lists for several words and topics,
    /// plus an index, into `<workdir>/report`.
    Report {
        #[arg(long, value_delimiter = ',', required = true)]
        words: Vec<String>,
        #[arg(long, value_delimiter = ',', required = true)]
        topics: Vec<String>,
        #[command(flatten)]
        table: TableArgs,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitName {
    Train,
    Validation,
    Test,
}

impl SplitName {
    fn as_str(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Validation => "validation",
            SplitName::Test => "test",
        }
    }
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Classifier checkpoint; defaults to the one `train-clf` writes.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    /// Embedding checkpoint; defaults to the one `train-embed` writes.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config_hash: String,
    config: &'a Config,
    seeds: Seeds,
    /// Input files with their SHA-256.
    inputs: BTreeMap<String, String>,
    outputs: Vec<String>,
}

/// Shared state of one invocation.
struct Run {
    cfg: Config,
    workdir: PathBuf,
    exec: Execution,
    inputs: BTreeMap<String, String>,
    outputs: Vec<String>,
}

impl Run {
    fn path(&self, rel: &str) -> PathBuf {
        self.workdir.join(rel)
    }

    fn display(&self, path: &Path) -> String {
        path.strip_prefix(&self.workdir)
            .unwrap_or(path)
            .to_string_lossy()
            .replace('\\', "/")
    }

    fn read(&mut self, path: &Path) -> Result<String> {
        let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        self.inputs.insert(self.display(path), sha256_hex(&bytes));
        String::from_utf8(bytes).with_context(|| format!("{} is not UTF-8", path.display()))
    }

    fn note_input(&mut self, path: &Path) -> Result<()> {
        self.read(path).map(|_| ())
    }

    fn write(&mut self, path: &Path, body: impl AsRef<[u8]>) -> Result<()> {
        write_atomic(path, body).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.push(self.display(path));
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, path: &Path, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value)? + "\n";
        self.write(path, text)
    }

    fn finish(mut self, command: &str) -> Result<()> {
        let manifest = Manifest {
            command,
            config_hash: self.cfg.hash(),
            config: &self.cfg,
            seeds: self.cfg.seeds(),
            inputs: std::mem::take(&mut self.inputs),
            outputs: std::mem::take(&mut self.outputs),
        };
        let path = self.path(&format!("manifests/{command}.json"));
        let text = serde_json::to_string_pretty(&manifest)? + "\n";
        write_atomic(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }

    fn classifier_dir(&self) -> String {
        format!("classifier-{}class", self.cfg.classifier.num_classes)
    }

    fn load_checkpoint(&mut self, path: &Path, what: &str) -> Result<Checkpoint> {
        if !path.exists() {
            bail!("{what} checkpoint {} not found; run the training step first", path.display());
        }
        let text = self.read(path)?;
        Checkpoint::from_json(&text).with_context(|| format!("loading {}", path.display()))
    }

    fn load_table(&mut self, args: &TableArgs) -> Result<EmbeddingTable> {
        let path = args.checkpoint.clone().unwrap_or_else(|| self.path("embed/checkpoint.json"));
        let ck = self.load_checkpoint(&path, "embedding")?;
        Ok(EmbeddingTable::from_checkpoint(&ck)?)
    }

    fn load_classifier(&mut self, args: &ModelArgs) -> Result<(ClassifierModel, EmbeddingTable)> {
        let path = args
            .checkpoint
            .clone()
            .unwrap_or_else(|| self.path(&format!("{}/checkpoint.json", self.classifier_dir())));
        let ck = self.load_checkpoint(&path, "classifier")?;
        Ok((ClassifierModel::from_checkpoint(&ck)?, EmbeddingTable::from_checkpoint(&ck)?))
    }

    fn load_splits(&mut self) -> Result<SplitSet> {
        let dir = self.path("data");
        if !dir.join(topicsent::corpus::SPLIT_MANIFEST_FILE).exists() {
            bail!("no splits in {}; run `preprocess` first", dir.display());
        }
        for name in [
            topicsent::corpus::SPLIT_MANIFEST_FILE,
            topicsent::corpus::TRAIN_FILE,
            topicsent::corpus::VALIDATION_FILE,
            topicsent::corpus::TEST_FILE,
        ] {
            self.note_input(&dir.join(name))?;
        }
        Ok(SplitSet::load(&dir)?)
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Runs one parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    match &cli.command {
        Command::Preprocess { input: Some(p) } => cfg.data.input = Some(p.clone()),
        Command::Baseline { vectors: Some(v) } => cfg.baseline.vectors = Some(v.clone()),
        _ => {}
    }
    let mut run = Run {
        cfg,
        workdir: cli.workdir.clone(),
        exec: if cli.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        },
        inputs: BTreeMap::new(),
        outputs: Vec::new(),
    };
    let name = match cli.command {
        Command::Preprocess { .. } => {
            preprocess(&mut run)?;
            "preprocess"
        }
        Command::TrainEmbed => {
            train_embed(&mut run)?;
            "train-embed"
        }
        Command::TrainClf => {
            train_clf(&mut run)?;
            "train-clf"
        }
        Command::Baseline { .. } => {
            baseline(&mut run)?;
            "baseline"
        }
        Command::Evaluate { split, model } => {
            evaluate(&mut run, split, &model)?;
            "evaluate"
        }
        Command::Predict {
            tweet,
            topic,
            all_topics,
            model,
        } => {
            predict(&mut run, &tweet, topic.as_deref(), all_topics, &model)?;
            "predict"
        }
        Command::ExplainWord {
            word,
            rows,
            cols,
            out,
            table,
        } => {
            explain_word(&mut run, &word, rows.zip(cols), out.as_deref(), &table)?;
            "explain-word"
        }
        Command::TopWords {
            topic,
            k,
            sign,
            include_unsupported,
            out,
            table,
        } => {
            let k = k.unwrap_or(run.cfg.insight.k);
            let include = include_unsupported || run.cfg.insight.include_unsupported;
            top_words_cmd(&mut run, &topic, k, sign, include, out.as_deref(), &table)?;
            "top-words"
        }
        Command::Report { words, topics, table } => {
            report(&mut run, &words, &topics, &table)?;
            "report"
        }
    };
    run.finish(name)
}

fn preprocess(run: &mut Run) -> Result<()> {
    let input = run
        .cfg
        .data
        .input
        .clone()
        .context("no input corpus: pass --input or set data.input in the config")?;
    let text = run.read(&input)?;
    let all = parse_dataset(&text).with_context(|| format!("parsing {}", input.display()))?;
    let dups = duplicate_ids(&all);
    if !dups.is_empty() {
        log::warn!("{} duplicate tweet ids, first {:?}", dups.len(), dups[0]);
    }
    let records: Vec<_> = all.into_iter().filter(|r| !r.dropped).collect();
    let seeds = run.cfg.seeds();
    let balanced = rebalance(&records, run.cfg.data.drop_fraction, seeds.rebalance)?;
    log::info!("{} usable tweets, {} after rebalancing", records.len(), balanced.len());
    let (train_n, val_n) = run.cfg.split_sizes(balanced.len())?;
    let splits = split(&balanced, train_n, val_n, seeds.split)?;
    let vocab = Vocabulary::build(&splits.train, run.cfg.vocab.min_freq)?;
    let topics = TopicIndex::build(&balanced)?;
    let labels = build_label_matrix(&splits.train, &vocab, &topics, run.cfg.vocab.repeat_counting)?;
    log::info!(
        "splits {}/{}/{}, {} words, {} topics",
        splits.train.len(),
        splits.validation.len(),
        splits.test.len(),
        vocab.len(),
        topics.len()
    );

    let dir = run.path("data");
    splits.save(&dir)?;
    for name in [
        topicsent::corpus::TRAIN_FILE,
        topicsent::corpus::VALIDATION_FILE,
        topicsent::corpus::TEST_FILE,
        topicsent::corpus::SPLIT_MANIFEST_FILE,
    ] {
        run.outputs.push(format!("data/{name}"));
    }
    run.write(&dir.join("vocab.tsv"), vocab.to_tsv())?;
    run.write(&dir.join("topics.tsv"), topics.to_tsv())?;
    let mut ck = Checkpoint::new();
    ck.set_vocab(&vocab);
    ck.set_topics(&topics);
    ck.put_labels(&labels);
    run.write(&dir.join("labels.json"), ck.to_json()?)?;
    Ok(())
}

#[derive(Serialize)]
struct EmbedHistory<'a> {
    losses: &'a [f64],
}

fn train_embed(run: &mut Run) -> Result<()> {
    let path = run.path("data/labels.json");
    if !path.exists() {
        bail!("{} not found; run `preprocess` first", path.display());
    }
    let ck = Checkpoint::from_json(&run.read(&path)?)?;
    let (vocab, topics, labels) = (ck.vocabulary()?, ck.topic_index()?, ck.labels()?);
    let cfg = run.cfg.word2topic_config();
    log::info!(
        "training word2topic on {} words x {} topics for {} epochs",
        labels.words,
        labels.topics,
        cfg.epochs
    );
    let trained = train_word2topic_with(&labels, &cfg, run.exec)?;
    if let (Some(first), Some(last)) = (trained.losses.first(), trained.losses.last()) {
        log::info!("loss {first:.6} -> {last:.6}");
    }
    let table = export_table_with(&trained.model, &vocab, &topics, run.exec)?.with_support(&labels)?;

    let mut out = Checkpoint::new();
    trained.model.to_checkpoint(&mut out)?;
    out.put_config("word2topic", &cfg)?;
    table.to_checkpoint(&mut out);
    let dir = run.path("embed");
    run.write(&dir.join("checkpoint.json"), out.to_json()?)?;
    run.write(&dir.join("embeddings.tsv"), table.embeddings_tsv())?;
    run.write(&dir.join("outputs.tsv"), table.outputs_tsv())?;
    run.write_json(
        &dir.join("history.json"),
        &EmbedHistory {
            losses: &trained.losses,
        },
    )?;
    Ok(())
}

fn train_clf(run: &mut Run) -> Result<()> {
    let splits = run.load_splits()?;
    let table = run.load_table(&TableArgs { checkpoint: None })?;
    let cfg = run.cfg.classifier_config();
    log::info!(
        "training {}-class classifier on {} tweets for {} epochs",
        cfg.num_classes,
        splits.train.len(),
        cfg.epochs
    );
    let trained = train_classifier_with(&splits.train, &splits.validation, &table, &cfg, run.exec)?;
    let mut ck = Checkpoint::new();
    trained.model.to_checkpoint(&mut ck)?;
    table.to_checkpoint(&mut ck);
    let dir = run.path(&run.classifier_dir());
    run.write(&dir.join("checkpoint.json"), ck.to_json()?)?;
    run.write_json(&dir.join("history.json"), &trained.history)?;
    Ok(())
}

#[derive(Serialize)]
struct Summary<'a> {
    split: &'a str,
    num_classes: usize,
    total: u64,
    accuracy: f64,
    macro_f1: f64,
}

fn evaluate(run: &mut Run, split: SplitName, model: &ModelArgs) -> Result<()> {
    let splits = run.load_splits()?;
    let (clf, table) = run.load_classifier(model)?;
    let records = match split {
        SplitName::Train => &splits.train,
        SplitName::Validation => &splits.validation,
        SplitName::Test => &splits.test,
    };
    if records.is_empty() {
        bail!("the {} split is empty", split.as_str());
    }
    let k = clf.config().num_classes;
    let examples = make_examples(records, &table, clf.config());
    let probs = clf.predict_probs(&table, &examples, run.exec)?;
    let golds: Vec<usize> = examples.iter().map(|e| e.label).collect();
    let preds: Vec<usize> = probs.iter().map(|p| topicsent::classifier::argmax(p)).collect();
    let report = EvalReport::new(&golds, &preds, k)?;
    let dir = run.path(&format!("eval-{k}class/{}", split.as_str()));
    run.write_json(&dir.join("report.json"), &report)?;
    run.write(&dir.join("confusion.csv"), report.confusion.to_csv(&report.class_names))?;
    run.write(&dir.join("metrics.csv"), report.metrics_csv())?;
    let summary = Summary {
        split: split.as_str(),
        num_classes: k,
        total: report.metrics.total,
        accuracy: report.metrics.accuracy,
        macro_f1: report.metrics.macro_f1,
    };
    println!("{}", serde_json::to_string(&summary)?);
    Ok(())
}

fn baseline(run: &mut Run) -> Result<()> {
    let splits = run.load_splits()?;
    let table = run.load_table(&TableArgs { checkpoint: None })?;
    let ours = WordVectors::from_table(&table);
    let (name, other) = match run.cfg.baseline.vectors.clone() {
        Some(path) => {
            let text = run.read(&path)?;
            ("external", WordVectors::from_tsv(&text, table.vocab())?)
        }
        None => (
            "random",
            WordVectors::random(table.num_words(), table.embed_dim(), run.cfg.seeds().random_vectors),
        ),
    };
    let report = compare_embeddings(
        &[("word2topic", &ours), (name, &other)],
        table.vocab(),
        table.topics(),
        &splits,
        run.cfg.classifier.pad_len,
        &run.cfg.logreg_config(),
        run.exec,
    )?;
    let dir = run.path("baseline");
    run.write_json(&dir.join("report.json"), &report)?;
    for arm in &report.arms {
        run.write(
            &dir.join(format!("confusion_{}.csv", arm.name)),
            arm.confusion.to_csv(&report.class_names),
        )?;
    }
    let accuracies: BTreeMap<&str, f64> = report.arms.iter().map(|a| (a.name.as_str(), a.accuracy)).collect();
    println!("{}", serde_json::to_string(&accuracies)?);
    Ok(())
}

#[derive(Serialize)]
struct PredictionLine<'a> {
    topic: &'a str,
    label: &'a str,
    probs: &'a [f64],
}

fn print_prediction(p: &Prediction, names: &[String]) -> Result<()> {
    let line = PredictionLine {
        topic: &p.topic,
        label: &names[p.label],
        probs: &p.probs,
    };
    println!("{}", serde_json::to_string(&line)?);
    Ok(())
}

fn predict(run: &mut Run, tweet: &str, topic: Option<&str>, all_topics: bool, model: &ModelArgs) -> Result<()> {
    let (clf, table) = run.load_classifier(model)?;
    let names = class_names(clf.config().num_classes);
    let tokens = topicsent::corpus::clean_tweet(tweet);
    if all_topics {
        let ids = table.encode(&tokens, clf.config().pad_len);
        let grid = predict_all_topics_with(&clf, &table, &ids, run.exec)?;
        for (a, topic) in table.topics().names().iter().enumerate() {
            print_prediction(&Prediction::new(grid.row(a).to_vec(), topic), &names)?;
        }
    } else {
        let topic = topic.context("--topic is required without --all-topics")?;
        print_prediction(&clf.predict(&table, &tokens, topic)?, &names)?;
    }
    Ok(())
}

fn explain_word(
    run: &mut Run,
    word: &str,
    shape: Option<(usize, usize)>,
    out: Option<&Path>,
    args: &TableArgs,
) -> Result<()> {
    let table = run.load_table(args)?;
    let (rows, cols) = shape.unwrap_or_else(|| default_grid_shape(table.num_topics()));
    let grid = word_grid(&table, word, rows, cols)?;
    match out {
        Some(path) => {
            run.write(path, grid.to_csv())?;
            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            run.write(&path.with_file_name(format!("{stem}_topics.csv")), grid.names_csv())?;
        }
        None => print!("{}", grid.to_csv()),
    }
    Ok(())
}

fn top_words_cmd(
    run: &mut Run,
    topic: &str,
    k: usize,
    sign: Sign,
    include_unsupported: bool,
    out: Option<&Path>,
    args: &TableArgs,
) -> Result<()> {
    let table = run.load_table(args)?;
    let list = top_words(&table, topic, k, sign, include_unsupported)?;
    let csv = top_words_csv(&list);
    match out {
        Some(path) => run.write(path, csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn report(run: &mut Run, words: &[String], topics: &[String], args: &TableArgs) -> Result<()> {
    let table = run.load_table(args)?;
    let dir = run.path("report");
    let index = export_report(
        &table,
        words,
        topics,
        run.cfg.insight.k,
        run.cfg.insight.include_unsupported,
        &dir,
    )?;
    let mut files: Vec<String> = vec![index.topic_names_grid.clone()];
    files.extend(index.word_grids.iter().map(|g| g.file.clone()));
    files.extend(index.top_words.iter().map(|t| t.file.clone()));
    files.push(topicsent::insight::REPORT_INDEX_FILE.to_string());
    for f in files {
        run.outputs.push(format!("report/{f}"));
    }
    Ok(())
}

/// Logging setup for the binary: `info` by default, `debug`/`trace` with
/// `-v`/`-vv`, errors only with `-q`. `RUST_LOG` still wins when set.
pub fn init_logging(verbose: u8, quiet: bool) {
    let level = match (quiet, verbose) {
        (true, _) => "error",
        (false, 0) => "info",
        (false, 1) => "debug",
        _ => "trace",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .try_init();
}
