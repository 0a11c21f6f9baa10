//! Seeded fixtures shared by the benchmarks.

use linecond::corpus::{generate, split, CorpusConfig, Split, SplitSpec};
use linecond::imputation::ObservedMatrix;
use linecond::numerics::DenseMatrix;
use linecond::{GradeLabel, PrototypeSet};
use rand::Rng;

const STREAM: u64 = 9_100;

/// `rows×cols` matrix of rank `rank` with a `hidden` share of entries masked.
pub fn low_rank_observed(rows: usize, cols: usize, rank: usize, hidden: f64, seed: u64) -> ObservedMatrix {
    let mut rng = linecond::rng::stream(seed, STREAM);
    let a: Vec<f64> = (0..rows * rank).map(|_| rng.random_range(-1.0..1.0)).collect();
    let b: Vec<f64> = (0..rank * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    let full = DenseMatrix::from_fn(rows, cols, |i, j| (0..rank).map(|k| a[i * rank + k] * b[k * cols + j]).sum());
    let mask = (0..rows * cols).map(|_| rng.random::<f64>() >= hidden).collect();
    ObservedMatrix::new(full, mask).expect("mask matches shape")
}

/// Uniform points in `[-1, 1)^dim` with cycling grade labels.
pub fn labeled_points(n: usize, dim: usize, seed: u64) -> Vec<(Vec<f64>, GradeLabel)> {
    let mut rng = linecond::rng::stream(seed, STREAM + 1);
    (0..n)
        .map(|i| {
            let v = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            (v, GradeLabel::ALL[i % 4])
        })
        .collect()
}

pub fn random_prototypes(dim: usize, seed: u64) -> PrototypeSet {
    let mut rng = linecond::rng::stream(seed, STREAM + 2);
    PrototypeSet {
        centers: (0..4).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect(),
        support_counts: [1; 4],
    }
}

/// Synthetic corpus of `n_records` with `labeled` labels, split in halves.
pub fn corpus_split(n_records: usize, labeled: usize, seed: u64) -> Split {
    let config = CorpusConfig {
        n_records,
        labeled_count: labeled,
        seed,
        ..CorpusConfig::default()
    };
    let corpus = generate(&config).expect("valid corpus config");
    let spec = SplitSpec::for_corpus(n_records, labeled, &config.class_mix);
    split(&corpus.records, &corpus.grades, &spec, seed).expect("split fits corpus")
}
