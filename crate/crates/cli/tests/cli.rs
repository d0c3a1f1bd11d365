use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;
use topicsent::corpus::to_tsv;
use topicsent::synthetic::{planted_corpus, PlantedConfig};

const TINY: &str = "\
[word2topic]
epochs = 5
embed_dim = 8
[classifier]
epochs = 2
pad_len = 6
sentence_hidden = 4
topic_proj = 4
stack_hidden = 4
[baseline]
epochs = 3
";

struct Env {
    dir: TempDir,
}

impl Env {
    fn new() -> Self {
        let dir = TempDir::new().unwrap();
        let corpus = planted_corpus(&PlantedConfig {
            tweets: 300,
            topics: 4,
            vocab_size: 80,
            ..PlantedConfig::default()
        })
        .unwrap();
        fs::write(dir.path().join("tweets.tsv"), to_tsv(&corpus.records)).unwrap();
        fs::write(dir.path().join("cfg.toml"), TINY).unwrap();
        Env { dir }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn run_in(&self, workdir: &str, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_topicsent"))
            .arg("--config")
            .arg(self.path("cfg.toml"))
            .arg("--workdir")
            .arg(self.path(workdir))
            .arg("-q")
            .args(args)
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let out = self.run_in("work", args);
        assert!(
            out.status.success(),
            "{args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    }

    fn prepared(self) -> Self {
        let input = self.path("tweets.tsv");
        self.ok(&["preprocess", "--input", input.to_str().unwrap()]);
        self.ok(&["train-embed"]);
        self
    }

    fn first_field(&self, file: &str) -> String {
        let text = fs::read_to_string(self.path(file)).unwrap();
        text.lines().next().unwrap().split('\t').next().unwrap().to_string()
    }

    fn first_topic(&self) -> String {
        self.first_field("work/data/topics.tsv")
    }

    fn first_word(&self) -> String {
        self.first_field("work/data/vocab.tsv")
    }
}

fn read_tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push((path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn unknown_subcommand_fails_with_usage() {
    let out = Command::new(env!("CARGO_BIN_EXE_topicsent")).arg("frobnicate").output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn missing_checkpoint_is_a_clear_error() {
    let env = Env::new();
    let out = env.run_in("work", &["predict", "--tweet", "hello", "--topic", "x"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("not found"), "{err}");
    assert!(!env.path("work/manifests/predict.json").exists());
}

#[test]
fn bad_config_is_rejected() {
    let env = Env::new();
    fs::write(env.path("cfg.toml"), "[classifier]\nnum_classes = 4\n").unwrap();
    let input = env.path("tweets.tsv");
    let out = env.run_in("work", &["preprocess", "--input", input.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(!env.path("work/data").exists());
}

#[test]
fn preprocess_and_train_embed_are_byte_reproducible() {
    let env = Env::new();
    let input = env.path("tweets.tsv");
    for work in ["a", "b"] {
        for args in [&["preprocess", "--input", input.to_str().unwrap()][..], &["train-embed"]] {
            let out = env.run_in(work, args);
            assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        }
    }
    let (a, b) = (read_tree(&env.path("a")), read_tree(&env.path("b")));
    assert!(a.iter().any(|(p, _)| p.ends_with("embed/checkpoint.json")));
    assert_eq!(a, b);
}

#[test]
fn full_pipeline_outputs() {
    let env = Env::new().prepared();
    let topic = env.first_topic();
    env.ok(&["train-clf"]);

    let line = env.ok(&["predict", "--tweet", "what a day for it", "--topic", &topic]);
    let v: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
    let probs: Vec<f64> = serde_json::from_value(v["probs"].clone()).unwrap();
    assert_eq!(probs.len(), 3);
    assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    assert_eq!(
        env.ok(&["predict", "--tweet", "what a day for it", "--topic", &topic]),
        line
    );

    let all = env.ok(&["predict", "--tweet", "what a day", "--all-topics"]);
    assert_eq!(all.lines().count(), 4);

    let summary = env.ok(&["evaluate", "--split", "test"]);
    let v: serde_json::Value = serde_json::from_str(summary.trim()).unwrap();
    assert_eq!(v["split"], "test");
    for f in ["report.json", "confusion.csv", "metrics.csv"] {
        assert!(env.path("work/eval-3class/test").join(f).is_file(), "{f}");
    }

    env.ok(&["baseline"]);
    assert!(env.path("work/baseline/report.json").is_file());

    let word = env.first_word();
    env.ok(&["report", "--words", &word, "--topics", &topic]);
    assert!(env.path("work/report/index.json").is_file());
    for cmd in ["preprocess", "train-embed", "train-clf", "evaluate", "baseline", "report"] {
        let m: serde_json::Value =
            serde_json::from_slice(&fs::read(env.path(&format!("work/manifests/{cmd}.json"))).unwrap()).unwrap();
        assert_eq!(m["command"], cmd);
        assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
    }
}

#[test]
fn train_clf_is_byte_reproducible() {
    let env = Env::new().prepared();
    env.ok(&["train-clf"]);
    let first = fs::read(env.path("work/classifier-3class/checkpoint.json")).unwrap();
    env.ok(&["train-clf"]);
    assert_eq!(fs::read(env.path("work/classifier-3class/checkpoint.json")).unwrap(), first);
}

#[test]
fn top_words_match_a_full_sort_of_the_table() {
    let env = Env::new().prepared();
    let topic = env.first_topic();
    let outputs = fs::read_to_string(env.path("work/embed/outputs.tsv")).unwrap();
    let mut column: Vec<(String, f64)> = outputs
        .lines()
        .map(|l| {
            let mut f = l.split('\t');
            let word = f.next().unwrap().to_string();
            (word, f.next().unwrap().parse().unwrap())
        })
        .collect();
    column.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));

    let csv = env.ok(&["top-words", "--topic", &topic, "-k", "5", "--sign", "negative", "--include-unsupported"]);
    let got: Vec<(String, f64)> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[1].to_string(), f[2].parse().unwrap())
        })
        .collect();
    assert_eq!(got, column[..5].to_vec());
    assert!(got.windows(2).all(|w| w[0].1 <= w[1].1));
}

#[test]
fn explain_word_prints_a_grid_and_rejects_unknown_words() {
    let env = Env::new().prepared();
    let grid = env.ok(&["explain-word", &env.first_word()]);
    let cells: usize = grid.lines().map(|l| l.split(',').count()).sum();
    assert!(cells >= 4);
    let out = env.run_in("work", &["explain-word", "zzzunknownzzz"]);
    assert!(!out.status.success());
}
