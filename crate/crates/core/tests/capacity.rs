use topicsent::corpus::TweetRecord;
use topicsent::vocab::{build_label_matrix, LabelMatrix, RepeatCounting, TopicIndex, Vocabulary};
use topicsent::word2topic::{export_table, train_word2topic, Word2TopicConfig};
use topicsent::Execution;

/// Words in the first half are +1 for topic 0 and -1 for topic 1; the second
/// half the other way round.
fn block_labels(n: usize, t: usize) -> LabelMatrix {
    let values = (0..n * t)
        .map(|i| if (i / t < n / 2) == (i % t == 0) { 1.0 } else { -1.0 })
        .collect();
    LabelMatrix {
        words: n,
        topics: t,
        values,
        support: vec![1; n * t],
    }
}

fn toy_config() -> Word2TopicConfig {
    Word2TopicConfig {
        epochs: 500,
        seed: 3,
        ..Word2TopicConfig::default()
    }
}

#[test]
fn toy_task_is_fitted_deterministically() {
    let labels = block_labels(8, 2);
    let a = train_word2topic(&labels, &toy_config()).unwrap();
    let b = train_word2topic(&labels, &toy_config()).unwrap();
    assert_eq!(a.losses, b.losses);
    assert!(a.losses.iter().all(|l| l.is_finite()));
    let last = *a.losses.last().unwrap();
    assert!(last < 0.01, "final mse {last}");
    assert!(last <= a.losses[0]);
    assert!(a.model.mse(&labels, Execution::Sequential).unwrap() < 0.01);
}

#[test]
fn exported_scores_follow_the_labels() {
    // Each word appears only under one topic, with score +2 or -2.
    let mut records = Vec::new();
    for w in 0..8 {
        let topic = if w % 2 == 0 { "red" } else { "blue" };
        let score = if w < 4 { 2 } else { -2 };
        records.push(TweetRecord::new(format!("{w}"), format!("word{w}"), topic, score));
    }
    let vocab = Vocabulary::build(&records, 1).unwrap();
    let topics = TopicIndex::build(&records).unwrap();
    let labels = build_label_matrix(&records, &vocab, &topics, RepeatCounting::PerTweet).unwrap();
    let model = train_word2topic(&labels, &toy_config()).unwrap().model;
    let table = export_table(&model, &vocab, &topics).unwrap();
    for r in &records {
        let word = &r.tokens[0];
        let s = table.word_topic_score(word, &r.topic).unwrap();
        assert_eq!(s > 0.0, r.score > 0, "{word} @ {}: {s}", r.topic);
        let id = vocab.id(word).unwrap();
        for (got, want) in table.outputs(id).iter().zip(labels.row(id)) {
            assert!((got - want).abs() < 0.2, "{word}: {got} vs {want}");
        }
    }
}
