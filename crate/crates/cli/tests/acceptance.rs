//! Acceptance criteria, one verdict line each. Runs without the libtest
//! harness so every line is printed whether or not a criterion fails.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use linecond::assessment::{ahp_weights, grade_of, AhpMatrix};
use linecond::corpus::{generate, reference_codebook, split, CorpusConfig, SplitSpec};
use linecond::embedding::{prototype_loss_and_grads, MlpArchitecture, MlpParams};
use linecond::eval::{confusion, f1_report, ConfusionMatrix};
use linecond::imputation::{factorize, impute, FactorizeConfig, ObservedMatrix};
use linecond::numerics::DenseMatrix;
use linecond::ssl::{class_posteriors, classify, refine_prototypes, softmax_neg_distances, RefineConfig};
use linecond::{DefectRecord, GradeLabel, ModelBundle, PipelineConfig, PrototypeSet};
use rand::Rng;
use rand_distr::StandardNormal;

const SUPERVISED_COUNTS: [[u64; 4]; 4] = [[287, 25, 8, 0], [14, 85, 15, 0], [0, 12, 29, 8], [0, 0, 8, 20]];
const SEMI_SUPERVISED_COUNTS: [[u64; 4]; 4] = [[298, 18, 4, 0], [10, 102, 2, 0], [0, 4, 43, 2], [0, 0, 4, 24]];
const UNIT_WEIGHTS: [f64; 8] = [0.062, 0.198, 0.198, 0.110, 0.110, 0.062, 0.062, 0.198];

type Check<'a> = Box<dyn Fn() -> Verdict + 'a>;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    // Stream ids far from the library's own.
    linecond::rng::stream(seed, 9_000)
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_linecond"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("linecond runs");
    assert!(
        out.status.success(),
        "{cmd:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn synth(dir: &Path, seed: u64) {
    run_ok(bin().args(["synth", "--seed", &seed.to_string(), "--out"]).arg(dir));
}

/// Per-class F1 recomputed from raw counts as `2·TP / (row + column)`.
fn f1_oracle(counts: &[[u64; 4]; 4]) -> [f64; 4] {
    std::array::from_fn(|k| {
        let row: u64 = counts[k].iter().sum();
        let col: u64 = counts.iter().map(|r| r[k]).sum();
        2.0 * counts[k][k] as f64 / (row + col) as f64
    })
}

fn criterion_1() -> Verdict {
    let sup = f1_report(&ConfusionMatrix { counts: SUPERVISED_COUNTS });
    let ssl = f1_report(&ConfusionMatrix {
        counts: SEMI_SUPERVISED_COUNTS,
    });
    let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-3);
    let ok = close(&sup.per_class, &[0.924, 0.720, 0.532, 0.714])
        && close(&ssl.per_class, &[0.949, 0.857, 0.843, 0.889])
        && close(&sup.per_class, &f1_oracle(&SUPERVISED_COUNTS))
        && close(&ssl.per_class, &f1_oracle(&SEMI_SUPERVISED_COUNTS))
        && (sup.macro_f1 - 0.723).abs() <= 1e-3
        && (ssl.macro_f1 - 0.885).abs() <= 1e-3
        && (ssl.macro_f1 - sup.macro_f1 - 0.162).abs() <= 1e-3;
    verdict(
        ok,
        format!(
            "macro {:.4} / {:.4}, difference {:.4}",
            sup.macro_f1,
            ssl.macro_f1,
            ssl.macro_f1 - sup.macro_f1
        ),
    )
}

fn criterion_2() -> Verdict {
    let cases = [
        (88.4, GradeLabel::Attention),
        (92.1, GradeLabel::Attention),
        (80.7, GradeLabel::Abnormal),
    ];
    let got: Vec<GradeLabel> = cases.iter().map(|(s, _)| grade_of(*s).unwrap()).collect();
    let ok = cases.iter().zip(&got).all(|((_, want), g)| want == g);
    verdict(ok, format!("{got:?}"))
}

fn criterion_3() -> Verdict {
    let w = ahp_weights(&AhpMatrix::from_weights(&UNIT_WEIGHTS).unwrap()).unwrap();
    let sum: f64 = UNIT_WEIGHTS.iter().sum();
    let max_err = w
        .weights
        .iter()
        .zip(UNIT_WEIGHTS)
        .map(|(a, b)| (a - b / sum).abs())
        .fold(0.0, f64::max);
    let literal_err = w.weights.iter().zip(UNIT_WEIGHTS).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let ok = literal_err <= 1e-3 && max_err <= 1e-9 && w.consistency_ratio < 0.01;
    verdict(
        ok,
        format!("max component error {literal_err:.2e}, CR {:.2e}", w.consistency_ratio),
    )
}

fn criterion_4() -> Verdict {
    let (m, n, rank) = (2250, 18, 6);
    let config = FactorizeConfig {
        rank,
        lambda: 0.1,
        ..FactorizeConfig::default()
    };
    let start = Instant::now();
    let (mut wins, mut monotone) = (0, 0);
    for trial in 0..20u64 {
        let mut r = rng(trial);
        let a: Vec<f64> = (0..m * rank).map(|_| r.sample(StandardNormal)).collect();
        let b: Vec<f64> = (0..rank * n).map(|_| r.sample(StandardNormal)).collect();
        let full = DenseMatrix::from_fn(m, n, |i, j| (0..rank).map(|k| a[i * rank + k] * b[k * n + j]).sum());
        let mask: Vec<bool> = (0..m * n).map(|_| r.random::<f64>() >= 0.3).collect();
        let obs = ObservedMatrix::new(full.clone(), mask.clone()).unwrap();
        let factors = factorize(&obs, &config, trial).unwrap();
        let filled = impute(&obs, &factors).unwrap();

        let mut col_mean = vec![0.0; n];
        let mut col_n = vec![0usize; n];
        for i in 0..m {
            for j in 0..n {
                if mask[i * n + j] {
                    col_mean[j] += full[(i, j)];
                    col_n[j] += 1;
                }
            }
        }
        for j in 0..n {
            col_mean[j] /= col_n[j] as f64;
        }
        let (mut als_se, mut mean_se, mut hidden) = (0.0, 0.0, 0usize);
        for i in 0..m {
            for j in 0..n {
                if !mask[i * n + j] {
                    als_se += (filled[(i, j)] - full[(i, j)]).powi(2);
                    mean_se += (col_mean[j] - full[(i, j)]).powi(2);
                    hidden += 1;
                }
            }
        }
        if (als_se / hidden as f64).sqrt() < (mean_se / hidden as f64).sqrt() {
            wins += 1;
        }
        // Relative slack of 1e-12 absorbs summation rounding at convergence.
        if factors.objective_trace.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)) {
            monotone += 1;
        }
    }
    let elapsed = start.elapsed();
    let ok = wins >= 18 && monotone == 20 && elapsed < Duration::from_secs(30);
    verdict(
        ok,
        format!("beats column mean {wins}/20, monotone {monotone}/20, {:.1}s", elapsed.as_secs_f64()),
    )
}

fn criterion_5() -> Verdict {
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for point in 0..10u64 {
        let mut r = rng(100 + point);
        let params = MlpParams::random(MlpArchitecture::default(), 0.5, &mut r).unwrap();
        let inputs: Vec<Vec<f64>> = (0..8).map(|_| (0..18).map(|_| r.random::<f64>()).collect()).collect();
        let batch: Vec<(&[f64], GradeLabel)> = inputs
            .iter()
            .map(|x| (x.as_slice(), GradeLabel::ALL[r.random_range(0..4)]))
            .collect();
        let prototypes = PrototypeSet {
            centers: (0..4).map(|_| (0..6).map(|_| r.random_range(-1.0..1.0)).collect()).collect(),
            support_counts: [1; 4],
        };
        let (_, grads) = prototype_loss_and_grads(&params, &batch, &prototypes).unwrap();
        let analytic = grads.flat();
        let theta = params.flat();
        let mut probe = params.clone();
        for (i, a) in analytic.iter().enumerate() {
            let mut at = theta.clone();
            at[i] = theta[i] + h;
            probe.set_flat(&at);
            let up = prototype_loss_and_grads(&probe, &batch, &prototypes).unwrap().0;
            at[i] = theta[i] - h;
            probe.set_flat(&at);
            let down = prototype_loss_and_grads(&probe, &batch, &prototypes).unwrap().0;
            let numeric = (up - down) / (2.0 * h);
            let scale = a.abs().max(numeric.abs());
            // Both sides vanish on parameters feeding inactive units.
            if scale > 1e-10 {
                worst = worst.max((a - numeric).abs() / scale);
            }
        }
    }
    verdict(worst < 1e-4, format!("max relative error {worst:.2e}"))
}

fn macro_f1_of(truth: &[GradeLabel], predicted: &[linecond::corpus::Prediction]) -> f64 {
    let p: Vec<GradeLabel> = predicted.iter().map(|p| p.grade).collect();
    f1_report(&confusion(truth, &p).unwrap()).macro_f1
}

fn criterion_6() -> Verdict {
    let mut gains = Vec::new();
    let mut identity = true;
    for seed in 0..10u64 {
        let corpus = generate(&CorpusConfig {
            seed,
            ..CorpusConfig::default()
        })
        .unwrap();
        let s = split(&corpus.records, &corpus.grades, &SplitSpec::reference(), seed).unwrap();
        let config = PipelineConfig {
            seed,
            ..PipelineConfig::default()
        };
        let bundle = linecond::fit(&s.train, &s.unlabeled, &reference_codebook(), &config).unwrap();
        let test: Vec<DefectRecord> = s.test.iter().map(|r| r.record.clone()).collect();
        let truth: Vec<GradeLabel> = s.test.iter().map(|r| r.grade).collect();
        let ssl = macro_f1_of(&truth, &bundle.predict(&test).unwrap());
        let sup = macro_f1_of(&truth, &bundle.predict_supervised(&test).unwrap());
        gains.push(ssl - sup);

        if seed == 0 {
            let pool = bundle.embed(&s.unlabeled).unwrap();
            let at_one = refine_prototypes(
                &bundle.classifier.prototypes,
                &pool,
                &RefineConfig {
                    alpha: 1.0,
                    ..config.refine
                },
            )
            .unwrap();
            identity &= at_one.centers == bundle.classifier.prototypes.centers;
            let plain = PipelineConfig {
                refine: RefineConfig {
                    alpha: 1.0,
                    ..config.refine
                },
                ..config.clone()
            };
            let alpha_one = linecond::fit(&s.train, &s.unlabeled, &reference_codebook(), &plain).unwrap();
            identity &= alpha_one.predict(&test).unwrap() == bundle.predict_supervised(&test).unwrap();
        }
    }
    let mean = gains.iter().sum::<f64>() / gains.len() as f64;
    let non_negative = gains.iter().filter(|g| **g >= 0.0).count();
    verdict(
        mean > 0.0 && identity,
        format!(
            "mean gain {mean:+.4}, ssl >= supervised on {non_negative}/10 seeds, alpha=1 identity {identity}; gains {:?}",
            gains.iter().map(|g| format!("{g:+.4}")).collect::<Vec<_>>()
        ),
    )
}

fn sweep_scores(path: &Path) -> Vec<(f64, u64, f64)> {
    let mut reader = csv::Reader::from_path(path).unwrap();
    reader
        .records()
        .map(|row| {
            let row = row.unwrap();
            (row[0].parse().unwrap(), row[2].parse().unwrap(), row[3].parse().unwrap())
        })
        .collect()
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (mean, (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

fn criterion_7(data: &Path) -> Verdict {
    let ssl_csv = data.join("sweep_ssl.csv");
    let sup_csv = data.join("sweep_sup.csv");
    run_ok(
        bin()
            .arg("sweep")
            .args(["--train-records", &p(data, "train_records.csv")])
            .args(["--train-labels", &p(data, "train_labels.csv")])
            .args(["--test-records", &p(data, "test_records.csv")])
            .args(["--test-labels", &p(data, "test_labels.csv")])
            .args(["--unlabeled", &p(data, "unlabeled_records.csv")])
            .args(["--codebook", &p(data, "codebook.json")])
            .args(["--fractions", "0.1,0.25,0.5,1", "--seeds", "0,1,2,3,4,5,6,7,8,9"])
            .arg("--out")
            .arg(&ssl_csv)
            .arg("--supervised-out")
            .arg(&sup_csv),
    );
    let ssl = sweep_scores(&ssl_csv);
    let sup = sweep_scores(&sup_csv);
    let fractions = [0.1, 0.25, 0.5, 1.0];
    let stats: Vec<(f64, f64)> = fractions
        .iter()
        .map(|f| mean_std(&ssl.iter().filter(|r| r.0 == *f).map(|r| r.2).collect::<Vec<_>>()))
        .collect();
    let monotone = stats.windows(2).all(|w| {
        let pooled = ((w[0].1.powi(2) + w[1].1.powi(2)) / 2.0).sqrt();
        w[1].0 >= w[0].0 - pooled
    });
    let low = |rows: &[(f64, u64, f64)], seed: u64| rows.iter().find(|r| r.0 == 0.1 && r.1 == seed).unwrap().2;
    let wins = (0..10u64).filter(|s| low(&ssl, *s) > low(&sup, *s)).count();
    verdict(
        monotone && wins >= 7,
        format!(
            "means {:?}, monotone {monotone}, ssl beats supervised at 0.1 on {wins}/10 seeds",
            stats.iter().map(|s| format!("{:.4}", s.0)).collect::<Vec<_>>()
        ),
    )
}

fn criterion_8() -> Verdict {
    let mut r = rng(7);
    let mut worst_sum: f64 = 0.0;
    let mut agree = true;
    for _ in 0..10_000 {
        let centers: Vec<Vec<f64>> = (0..4).map(|_| (0..6).map(|_| r.random_range(-3.0..3.0)).collect()).collect();
        let v: Vec<f64> = (0..6).map(|_| r.random_range(-3.0..3.0)).collect();
        let post = class_posteriors(&v, &centers).unwrap();
        worst_sum = worst_sum.max((post.probs.iter().sum::<f64>() - 1.0).abs());
        let dist: Vec<f64> = centers
            .iter()
            .map(|c| c.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
            .collect();
        let nearest = (0..4).min_by(|a, b| dist[*a].total_cmp(&dist[*b])).unwrap();
        agree &= post.argmax().index() == nearest && classify(&v, &centers).index() == nearest;
    }
    let centers = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]];
    let even = class_posteriors(&[0.0, 0.0], &centers).unwrap();
    let flat = softmax_neg_distances(&[2.5; 4]);
    let even_err = even.probs.iter().chain(&flat).map(|p| (p - 0.25).abs()).fold(0.0, f64::max);
    verdict(
        worst_sum <= 1e-9 && even_err <= 1e-12 && agree,
        format!("max |sum - 1| {worst_sum:.1e}, equidistant error {even_err:.1e}, argmax = nearest {agree}"),
    )
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

/// Every command run twice in separate directories; outputs and standard
/// output must match byte for byte.
fn criterion_9(scratch: &Path) -> Verdict {
    let run_all = |root: &Path| -> Vec<(String, Vec<u8>)> {
        let data = root.join("data");
        let mut captured = Vec::new();
        let mut record = |label: &str, out: Output| captured.push((format!("{label} stdout"), out.stdout));
        record(
            "synth",
            run_ok(bin().args(["synth", "--seed", "4", "--n-records", "600", "--labeled", "300", "--out"]).arg(&data)),
        );
        record(
            "assess",
            run_ok(
                bin()
                    .args(["assess", "--deductions", &p(&data, "deductions.csv"), "--out", &p(root, "assess.csv")]),
            ),
        );
        record(
            "fit",
            run_ok(bin().args([
                "fit",
                "--records",
                &p(&data, "train_records.csv"),
                "--labels",
                &p(&data, "train_labels.csv"),
                "--unlabeled",
                &p(&data, "unlabeled_records.csv"),
                "--codebook",
                &p(&data, "codebook.json"),
                "--model",
                &p(root, "model.json"),
                "--seed",
                "4",
            ])),
        );
        record(
            "predict",
            run_ok(bin().args([
                "predict",
                "--model",
                &p(root, "model.json"),
                "--records",
                &p(&data, "test_records.csv"),
                "--out",
                &p(root, "pred.csv"),
            ])),
        );
        record(
            "predict stdout",
            run_ok(bin().args(["predict", "--model", &p(root, "model.json"), "--records", &p(&data, "test_records.csv")])),
        );
        record(
            "predict supervised",
            run_ok(bin().args([
                "predict",
                "--supervised",
                "--model",
                &p(root, "model.json"),
                "--records",
                &p(&data, "test_records.csv"),
                "--out",
                &p(root, "pred_sup.csv"),
            ])),
        );
        record(
            "evaluate",
            run_ok(bin().args([
                "evaluate",
                "--predictions",
                &p(root, "pred.csv"),
                "--truth",
                &p(&data, "test_labels.csv"),
                "--compare",
                &p(root, "pred_sup.csv"),
                "--report",
                &p(root, "report.json"),
            ])),
        );
        record(
            "sweep",
            run_ok(bin().args([
                "sweep",
                "--train-records",
                &p(&data, "train_records.csv"),
                "--train-labels",
                &p(&data, "train_labels.csv"),
                "--test-records",
                &p(&data, "test_records.csv"),
                "--test-labels",
                &p(&data, "test_labels.csv"),
                "--unlabeled",
                &p(&data, "unlabeled_records.csv"),
                "--codebook",
                &p(&data, "codebook.json"),
                "--fractions",
                "0.5,1",
                "--seeds",
                "0,1",
                "--epochs",
                "10",
                "--out",
                &p(root, "sweep.csv"),
                "--supervised-out",
                &p(root, "sweep_sup.csv"),
            ])),
        );
        record(
            "project",
            run_ok(bin().args([
                "project",
                "--model",
                &p(root, "model.json"),
                "--records",
                &p(&data, "test_records.csv"),
                "--labels",
                &p(&data, "test_labels.csv"),
                "--out",
                &p(root, "projection.csv"),
            ])),
        );
        let mut files: Vec<PathBuf> = walk(root);
        files.sort();
        for f in files {
            let rel = f.strip_prefix(root).unwrap().to_string_lossy().into_owned();
            captured.push((rel, std::fs::read(&f).unwrap()));
        }
        captured
    };
    let first = run_all(&scratch.join("a"));
    let second = run_all(&scratch.join("b"));
    // Stdout of fit and project names its output paths; compare those with
    // the run directory masked.
    let mask = |items: Vec<(String, Vec<u8>)>, root: &Path| -> Vec<(String, Vec<u8>)> {
        let needle = root.to_string_lossy().into_owned();
        items
            .into_iter()
            .map(|(k, v)| (k, String::from_utf8_lossy(&v).replace(&needle, "<root>").into_bytes()))
            .collect()
    };
    let first = mask(first, &scratch.join("a"));
    let second = mask(second, &scratch.join("b"));
    let differing: Vec<&str> = first
        .iter()
        .zip(&second)
        .filter(|(a, b)| a != b)
        .map(|(a, _)| a.0.as_str())
        .collect();
    let same_shape = first.len() == second.len() && first.len() > 15;

    let model = scratch.join("a").join("model.json");
    let bundle = ModelBundle::load(&model).unwrap();
    let reloaded = ModelBundle::from_json(&bundle.to_json()).unwrap();
    let resaved = scratch.join("resaved.json");
    reloaded.save(&resaved).unwrap();
    let round_trip = reloaded == bundle && std::fs::read(&model).unwrap() == std::fs::read(&resaved).unwrap();

    verdict(
        same_shape && differing.is_empty() && round_trip,
        format!(
            "{} outputs compared, differing {differing:?}, bundle round-trip {round_trip}",
            first.len()
        ),
    )
}

fn walk(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            out.extend(walk(&path));
        } else {
            out.push(path);
        }
    }
    out
}

fn criterion_10(scratch: &Path) -> Verdict {
    let data = scratch.join("data");
    let single = |cmd: &mut Command| -> Output { run_ok(cmd.env("RAYON_NUM_THREADS", "1")) };
    let start = Instant::now();
    single(bin().args(["synth", "--seed", "0", "--out"]).arg(&data));
    single(bin().args([
        "fit",
        "--records",
        &p(&data, "train_records.csv"),
        "--labels",
        &p(&data, "train_labels.csv"),
        "--unlabeled",
        &p(&data, "unlabeled_records.csv"),
        "--codebook",
        &p(&data, "codebook.json"),
        "--model",
        &p(scratch, "model.json"),
    ]));
    single(bin().args([
        "predict",
        "--model",
        &p(scratch, "model.json"),
        "--records",
        &p(&data, "test_records.csv"),
        "--out",
        &p(scratch, "pred.csv"),
    ]));
    let eval = single(bin().args([
        "evaluate",
        "--predictions",
        &p(scratch, "pred.csv"),
        "--truth",
        &p(&data, "test_labels.csv"),
    ]));
    let elapsed = start.elapsed();
    let text = String::from_utf8_lossy(&eval.stdout);
    let summary = text.lines().find(|l| l.starts_with("macro F1")).unwrap_or("").to_string();
    verdict(
        elapsed < Duration::from_secs(120) && !summary.is_empty(),
        format!("{:.1}s single-threaded, {summary}", elapsed.as_secs_f64()),
    )
}

fn main() {
    let scratch = tempfile::tempdir().unwrap();
    let sweep_data = scratch.path().join("sweep_data");
    synth(&sweep_data, 0);

    let criteria: Vec<(&str, Check<'_>)> = vec![
        ("metric fidelity", Box::new(criterion_1)),
        ("grade mapping", Box::new(criterion_2)),
        ("AHP weights", Box::new(criterion_3)),
        ("imputation", Box::new(criterion_4)),
        ("gradient check", Box::new(criterion_5)),
        ("SSL benefit", Box::new(criterion_6)),
        ("label efficiency", Box::new(|| criterion_7(&sweep_data))),
        ("posterior invariants", Box::new(criterion_8)),
        ("determinism", Box::new(|| criterion_9(&scratch.path().join("determinism")))),
        ("end-to-end scale", Box::new(|| criterion_10(&scratch.path().join("e2e")))),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        println!(
            "criterion {:>2} {:<22} {}  {}",
            i + 1,
            name,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
        if !v.pass {
            failed.push(i + 1);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria pass");
    } else {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}
