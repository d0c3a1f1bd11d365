use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use topicsent::classifier::{make_examples, ClassifierConfig, ClassifierModel, Example};
use topicsent::synthetic::{planted_corpus, PlantedConfig};
use topicsent::vocab::{build_label_matrix, RepeatCounting, TopicIndex, Vocabulary, WordId};
use topicsent::word2topic::{export_table, Arch, Word2TopicModel};
use topicsent::Execution;

const STRATEGIES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn batch_gradient(c: &mut Criterion) {
    let corpus = planted_corpus(&PlantedConfig {
        tweets: 400,
        ..Default::default()
    })
    .unwrap();
    let vocab = Vocabulary::build(&corpus.records, 1).unwrap();
    let topics = TopicIndex::build(&corpus.records).unwrap();
    let labels = build_label_matrix(&corpus.records, &vocab, &topics, RepeatCounting::PerTweet).unwrap();
    let w2t = Word2TopicModel::new(Arch::Conv, vocab.len(), topics.len(), 100, 0).unwrap();
    let words: Vec<WordId> = (0..32).collect();

    let mut group = c.benchmark_group("word2topic_batch32");
    for (name, exec) in STRATEGIES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| w2t.batch_gradient(&labels, &words, exec).unwrap())
        });
    }
    group.finish();

    let table = export_table(&w2t, &vocab, &topics).unwrap();
    let cfg = ClassifierConfig::default();
    let examples = make_examples(&corpus.records[..cfg.batch_size], &table, &cfg);
    let batch: Vec<&Example> = examples.iter().collect();
    let clf = ClassifierModel::new(cfg).unwrap();

    let mut group = c.benchmark_group("classifier_batch64");
    group.sample_size(10);
    for (name, exec) in STRATEGIES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| clf.batch_gradient(&table, &batch, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, batch_gradient);
criterion_main!(benches);
