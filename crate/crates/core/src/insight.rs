//! Reading the phase-1 table: per-word topic grids and per-topic word
//! rankings. Scores are the raw final-layer outputs of the word-topic
//! model, so sign and magnitude read directly as sentiment.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::word2topic::EmbeddingTable;

/// A word's topic scores laid out row-major on a `rows x cols` grid; cells
/// past the last topic are `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WordGrid {
    pub word: String,
    pub rows: usize,
    pub cols: usize,
    pub cells: Vec<Option<f64>>,
    pub names: Vec<Option<String>>,
}

/// 11 x 7 for 77 topics, otherwise the squarest grid with enough cells.
pub fn default_grid_shape(topics: usize) -> (usize, usize) {
    if topics == 77 {
        return (11, 7);
    }
    let cols = (topics as f64).sqrt().ceil().max(1.0) as usize;
    (topics.div_ceil(cols).max(1), cols)
}

pub fn word_grid(table: &EmbeddingTable, word: &str, rows: usize, cols: usize) -> Result<WordGrid> {
    let t = table.num_topics();
    if rows * cols < t {
        return Err(Error::InvalidArgument(format!(
            "a {rows}x{cols} grid cannot hold {t} topics"
        )));
    }
    let id = table.word_id(word)?;
    let scores = table.outputs(id);
    let names = table.topics().names();
    Ok(WordGrid {
        word: word.to_string(),
        rows,
        cols,
        cells: (0..rows * cols).map(|i| scores.get(i).copied()).collect(),
        names: (0..rows * cols).map(|i| names.get(i).cloned()).collect(),
    })
}

fn grid_csv<T>(cells: &[Option<T>], cols: usize, fmt: impl Fn(&T) -> String) -> String {
    let mut out = String::new();
    for row in cells.chunks(cols) {
        let line: Vec<String> = row.iter().map(|c| c.as_ref().map(&fmt).unwrap_or_default()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl WordGrid {
    /// Scores in topic-id order, dropping absent cells.
    pub fn flatten(&self) -> Vec<f64> {
        self.cells.iter().flatten().copied().collect()
    }

    /// Score grid; absent cells are empty.
    pub fn to_csv(&self) -> String {
        grid_csv(&self.cells, self.cols, |v| v.to_string())
    }

    pub fn names_csv(&self) -> String {
        grid_csv(&self.names, self.cols, |n| quote(n))
    }

    /// Parses a score grid written by [`WordGrid::to_csv`]. Topic names are
    /// not part of that file and come back empty.
    pub fn from_csv(word: &str, text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_reader(text.as_bytes());
        let mut cells = Vec::new();
        let mut rows = 0;
        let mut cols = None;
        for rec in reader.records() {
            let rec = rec?;
            match cols {
                None => cols = Some(rec.len()),
                Some(c) if c != rec.len() => {
                    return Err(Error::MalformedRow {
                        line: rows + 1,
                        reason: format!("expected {c} cells, found {}", rec.len()),
                    })
                }
                _ => {}
            }
            for field in rec.iter() {
                cells.push(if field.is_empty() {
                    None
                } else {
                    Some(field.parse::<f64>().map_err(|e| Error::MalformedRow {
                        line: rows + 1,
                        reason: e.to_string(),
                    })?)
                });
            }
            rows += 1;
        }
        let cols = cols.ok_or_else(|| Error::Empty("grid file is empty".into()))?;
        Ok(WordGrid {
            word: word.to_string(),
            rows,
            cols,
            names: vec![None; cells.len()],
            cells,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    pub fn as_str(self) -> &'static str {
        match self {
            Sign::Positive => "positive",
            Sign::Negative => "negative",
        }
    }
}

impl std::str::FromStr for Sign {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "positive" | "pos" => Ok(Sign::Positive),
            "negative" | "neg" => Ok(Sign::Negative),
            other => Err(Error::InvalidArgument(format!("unknown sign {other:?}"))),
        }
    }
}

/// The `k` words scoring highest (positive) or lowest (negative) for
/// `topic`, ties broken by word. Unless `include_unsupported` is set, words
/// never seen with the topic in training are skipped when the table carries
/// support counts.
pub fn top_words(
    table: &EmbeddingTable,
    topic: &str,
    k: usize,
    sign: Sign,
    include_unsupported: bool,
) -> Result<Vec<(String, f64)>> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let a = table.topic_id(topic)?;
    let mut ranked: Vec<(&str, f64)> = table
        .vocab()
        .words()
        .iter()
        .enumerate()
        .filter(|&(w, _)| include_unsupported || table.support(w, a).is_none_or(|s| s > 0))
        .map(|(w, word)| (word.as_str(), table.score(w, a)))
        .collect();
    ranked.sort_by(|x, y| {
        let by_score = match sign {
            Sign::Positive => y.1.total_cmp(&x.1),
            Sign::Negative => x.1.total_cmp(&y.1),
        };
        by_score.then_with(|| x.0.cmp(y.0))
    });
    Ok(ranked
        .into_iter()
        .take(k)
        .map(|(w, s)| (w.to_string(), s))
        .collect())
}

/// `rank,word,score` with a header row; ranks start at 1.
pub fn top_words_csv(list: &[(String, f64)]) -> String {
    let mut out = String::from("rank,word,score\n");
    for (i, (w, s)) in list.iter().enumerate() {
        out.push_str(&format!("{},{},{}\n", i + 1, quote(w), s));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    pub word: String,
    pub file: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopEntry {
    pub topic: String,
    pub sign: Sign,
    pub file: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportIndex {
    pub rows: usize,
    pub cols: usize,
    pub k: usize,
    pub topic_names_grid: String,
    pub word_grids: Vec<GridEntry>,
    pub top_words: Vec<TopEntry>,
}

pub const REPORT_INDEX_FILE: &str = "index.json";

fn slug(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect()
}

/// Writes one score grid per word, a shared topic-name grid, a positive and
/// a negative top-`k` list per topic, and an `index.json` naming them all.
pub fn export_report(
    table: &EmbeddingTable,
    words: &[String],
    topics: &[String],
    k: usize,
    include_unsupported: bool,
    dir: &Path,
) -> Result<ReportIndex> {
    if words.is_empty() || topics.is_empty() {
        return Err(Error::InvalidArgument("report needs at least one word and one topic".into()));
    }
    let (rows, cols) = default_grid_shape(table.num_topics());
    let write = |name: &str, body: &str| -> Result<()> {
        let path = dir.join(name);
        crate::files::write_atomic(&path, body)
    };
    fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;

    let mut index = ReportIndex {
        rows,
        cols,
        k,
        topic_names_grid: "topic_names.csv".into(),
        word_grids: Vec::new(),
        top_words: Vec::new(),
    };
    let mut names_written = false;
    for (i, word) in words.iter().enumerate() {
        let grid = word_grid(table, word, rows, cols)?;
        if !names_written {
            write(&index.topic_names_grid, &grid.names_csv())?;
            names_written = true;
        }
        let file = format!("grid_{i:03}_{}.csv", slug(word));
        write(&file, &grid.to_csv())?;
        index.word_grids.push(GridEntry {
            word: word.clone(),
            file,
        });
    }
    for (i, topic) in topics.iter().enumerate() {
        for sign in [Sign::Positive, Sign::Negative] {
            let list = top_words(table, topic, k, sign, include_unsupported)?;
            let file = format!("top_{i:03}_{}_{}.csv", slug(topic), sign.as_str());
            write(&file, &top_words_csv(&list))?;
            index.top_words.push(TopEntry {
                topic: topic.clone(),
                sign,
                file,
            });
        }
    }
    write(REPORT_INDEX_FILE, &(serde_json::to_string_pretty(&index)? + "\n"))?;
    Ok(index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autograd::Tensor;
    use crate::vocab::{TopicIndex, Vocabulary};
    use proptest::prelude::*;

    fn table(words: &[&str], topics: &[&str], scores: Vec<f64>) -> EmbeddingTable {
        let tsv: String = words
            .iter()
            .enumerate()
            .map(|(i, w)| format!("{w}\t{i}\t1\n"))
            .collect();
        let vocab = Vocabulary::from_tsv(&tsv, 1).unwrap();
        let topics = TopicIndex::from_names(topics).unwrap();
        let (n, t) = (vocab.len(), topics.len());
        let mut out = scores;
        out.extend(vec![0.0; t]);
        EmbeddingTable::new(
            vocab,
            topics,
            Tensor::zeros(&[n + 1, 2]),
            Tensor::matrix(n + 1, t, out).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn grid_fill_and_absent_cells() {
        let tb = table(&["w"], &["a", "b", "c", "d", "e"], vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        let g = word_grid(&tb, "w", 2, 3).unwrap();
        assert_eq!(g.cells, vec![Some(1.0), Some(2.0), Some(3.0), Some(4.0), Some(5.0), None]);
        assert_eq!(g.names[5], None);
        assert_eq!(g.names[3].as_deref(), Some("d"));
        assert_eq!(g.flatten(), vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(g.to_csv(), "1,2,3\n4,5,\n");
        assert!(word_grid(&tb, "w", 2, 2).is_err());
        assert!(matches!(word_grid(&tb, "zz", 2, 3), Err(Error::UnknownWord(_))));
        let back = WordGrid::from_csv("w", &g.to_csv()).unwrap();
        assert_eq!(back.cells, g.cells);
    }

    #[test]
    fn grid_shapes() {
        assert_eq!(default_grid_shape(77), (11, 7));
        assert_eq!(default_grid_shape(8), (3, 3));
        assert_eq!(default_grid_shape(1), (1, 1));
        let names: Vec<String> = (0..77).map(|i| format!("t{i:02}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let tb = table(&["w"], &refs, (0..77).map(f64::from).collect());
        let g = word_grid(&tb, "w", 11, 7).unwrap();
        assert!(g.cells.iter().all(Option::is_some));
    }

    #[test]
    fn top_words_example() {
        let tb = table(&["a", "b", "c"], &["x"], vec![0.9, -0.8, 0.1]);
        assert_eq!(top_words(&tb, "x", 1, Sign::Positive, true).unwrap(), vec![("a".to_string(), 0.9)]);
        assert_eq!(top_words(&tb, "x", 1, Sign::Negative, true).unwrap(), vec![("b".to_string(), -0.8)]);
        assert_eq!(top_words(&tb, "x", 10, Sign::Positive, true).unwrap().len(), 3);
        assert!(top_words(&tb, "x", 0, Sign::Positive, true).is_err());
        assert!(top_words(&tb, "y", 1, Sign::Positive, true).is_err());
    }

    #[test]
    fn unsupported_words_are_skipped_by_default() {
        use crate::vocab::LabelMatrix;
        let tb = table(&["a", "b", "c"], &["x"], vec![0.9, -0.8, 0.1]);
        let labels = LabelMatrix {
            words: 3,
            topics: 1,
            values: vec![0.0; 3],
            support: vec![0, 2, 1],
        };
        let tb = tb.with_support(&labels).unwrap();
        let top = top_words(&tb, "x", 3, Sign::Positive, false).unwrap();
        assert_eq!(top.iter().map(|p| p.0.as_str()).collect::<Vec<_>>(), ["c", "b"]);
        assert_eq!(top_words(&tb, "x", 3, Sign::Positive, true).unwrap().len(), 3);
    }

    #[test]
    fn report_files() {
        let tb = table(&["a", "b", "c", "d"], &["x", "y", "z"], (0..12).map(|i| f64::from(i) - 6.0).collect());
        let dir = tempfile::tempdir().unwrap();
        let words = vec!["a".to_string(), "c".to_string()];
        let topics = vec!["x".to_string(), "y".to_string(), "z".to_string()];
        let idx = export_report(&tb, &words, &topics, 2, true, dir.path()).unwrap();
        assert_eq!(idx.word_grids.len(), 2);
        assert_eq!(idx.top_words.len(), 6);
        let files = fs::read_dir(dir.path()).unwrap().count();
        assert_eq!(files, 2 + 6 + 2);
        let text = fs::read_to_string(dir.path().join(&idx.word_grids[1].file)).unwrap();
        let grid = word_grid(&tb, "c", idx.rows, idx.cols).unwrap();
        assert_eq!(WordGrid::from_csv("c", &text).unwrap().cells, grid.cells);
        let again = tempfile::tempdir().unwrap();
        export_report(&tb, &words, &topics, 2, true, again.path()).unwrap();
        for entry in fs::read_dir(dir.path()).unwrap() {
            let name = entry.unwrap().file_name();
            assert_eq!(
                fs::read(dir.path().join(&name)).unwrap(),
                fs::read(again.path().join(&name)).unwrap()
            );
        }
        assert!(export_report(&tb, &[], &topics, 2, true, dir.path()).is_err());
    }

    proptest! {
        #[test]
        fn top_words_matches_naive_sort(
            scores in prop::collection::vec(-3i32..3, 1..25),
            k in 1usize..30,
            positive in any::<bool>(),
        ) {
            let words: Vec<String> = (0..scores.len()).map(|i| format!("w{:02}", (i * 7) % 97)).collect();
            let refs: Vec<&str> = words.iter().map(String::as_str).collect();
            let vals: Vec<f64> = scores.iter().map(|&s| f64::from(s) / 2.0).collect();
            let tb = table(&refs, &["x"], vals.clone());
            let sign = if positive { Sign::Positive } else { Sign::Negative };
            let got = top_words(&tb, "x", k, sign, true).unwrap();

            // Oracle: repeatedly pick the best remaining pair.
            let mut pool: Vec<(String, f64)> = words.iter().cloned().zip(vals).collect();
            let mut want = Vec::new();
            while want.len() < k && !pool.is_empty() {
                let mut best = 0;
                for i in 1..pool.len() {
                    let (better, tie) = if positive {
                        (pool[i].1 > pool[best].1, pool[i].1 == pool[best].1)
                    } else {
                        (pool[i].1 < pool[best].1, pool[i].1 == pool[best].1)
                    };
                    if better || (tie && pool[i].0 < pool[best].0) {
                        best = i;
                    }
                }
                want.push(pool.remove(best));
            }
            prop_assert_eq!(&got, &want);

            let n = words.len();
            let distinct = {
                let mut v: Vec<i32> = scores.clone();
                v.sort();
                v.dedup();
                v.len() == n
            };
            if 2 * k <= n && distinct {
                let neg = top_words(&tb, "x", k, Sign::Negative, true).unwrap();
                let pos = top_words(&tb, "x", k, Sign::Positive, true).unwrap();
                prop_assert!(pos.iter().all(|p| !neg.iter().any(|q| q.0 == p.0)));
            }
        }

        #[test]
        fn grid_flatten_is_identity(vals in prop::collection::vec(-5.0f64..5.0, 1..20), extra in 0usize..4) {
            let names: Vec<String> = (0..vals.len()).map(|i| format!("t{i:02}")).collect();
            let refs: Vec<&str> = names.iter().map(String::as_str).collect();
            let tb = table(&["w"], &refs, vals.clone());
            let cols = 3;
            let rows = (vals.len() + extra).div_ceil(cols);
            let g = word_grid(&tb, "w", rows, cols).unwrap();
            prop_assert_eq!(g.flatten(), vals);
        }
    }
}
