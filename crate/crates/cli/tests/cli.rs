use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_linecond"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("linecond runs")
}

fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A small synthetic corpus shared by the model tests.
struct Fixture {
    _dir: TempDir,
    root: PathBuf,
}

impl Fixture {
    fn new(seed: u64) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        run_ok(&[
            "synth",
            "--seed",
            &seed.to_string(),
            "--n-records",
            "500",
            "--labeled",
            "260",
            "--out",
            s(&root.join("data")),
        ]);
        Self { _dir: dir, root }
    }

    fn data(&self, name: &str) -> String {
        self.root.join("data").join(name).to_string_lossy().into_owned()
    }

    fn path(&self, name: &str) -> String {
        self.root.join(name).to_string_lossy().into_owned()
    }

    fn fit(&self, model: &str, extra: &[&str]) {
        let mut args = vec![
            "fit".to_string(),
            "--records".into(),
            self.data("train_records.csv"),
            "--labels".into(),
            self.data("train_labels.csv"),
            "--unlabeled".into(),
            self.data("unlabeled_records.csv"),
            "--codebook".into(),
            self.data("codebook.json"),
            "--model".into(),
            self.path(model),
            "--epochs".into(),
            "20".into(),
        ];
        args.extend(extra.iter().map(|a| a.to_string()));
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        run_ok(&refs);
    }

    fn predict(&self, model: &str, out: &str, extra: &[&str]) {
        let mut args = vec![
            "predict".to_string(),
            "--model".into(),
            self.path(model),
            "--records".into(),
            self.data("test_records.csv"),
            "--out".into(),
            self.path(out),
        ];
        args.extend(extra.iter().map(|a| a.to_string()));
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        run_ok(&refs);
    }
}

fn csv_rows(path: &str) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(Result::unwrap).collect()
}

#[test]
fn synth_is_reproducible_and_sized() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        run_ok(&["synth", "--seed", "11", "--n-records", "100", "--labeled", "40", "--out", s(dir.path())]);
    }
    let mut names: Vec<_> = std::fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 10);
    for name in names {
        assert_eq!(
            std::fs::read(a.path().join(&name)).unwrap(),
            std::fs::read(b.path().join(&name)).unwrap(),
            "{name:?} differs"
        );
    }
    let records = csv_rows(&a.path().join("records.csv").to_string_lossy());
    assert_eq!(records.len(), 100);
    let train = csv_rows(&a.path().join("train_labels.csv").to_string_lossy()).len();
    let test = csv_rows(&a.path().join("test_labels.csv").to_string_lossy()).len();
    let unlabeled = csv_rows(&a.path().join("unlabeled_records.csv").to_string_lossy()).len();
    assert_eq!((train + test, unlabeled), (40, 60));
}

#[test]
fn assess_scores_and_grades_crafted_sections() {
    let dir = tempfile::tempdir().unwrap();
    let deductions = dir.path().join("deductions.csv");
    std::fs::write(
        &deductions,
        "segment_id,week,unit,indicator,weight,demerit\n\
         A,1,,,,\n\
         B,1,2,1,1,50\n\
         C,1,8,3,0.5,40\n\
         C,1,8,4,1,38\n\
         D,1,2,1,1,100\n\
         E,1,3,2,1,200\n",
    )
    .unwrap();
    let report = dir.path().join("grades.csv");
    let out = run_ok(&["assess", "--deductions", s(&deductions), "--out", s(&report)]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    // Score = 100 − unit weight × Σ(indicator weight × demerit).
    let expected = [
        ("A", 100.0, "Normal"),
        ("B", 100.0 - 0.198 * 50.0, "Attention"),
        ("C", 100.0 - 0.198 * (20.0 + 38.0), "Attention"),
        ("D", 100.0 - 0.198 * 100.0, "Abnormal"),
        ("E", 100.0 - 0.198 * 200.0, "Serious"),
    ];
    assert_eq!(lines.len(), expected.len());
    let rows = csv_rows(s(&report));
    for ((line, row), (id, score, grade)) in lines.iter().zip(&rows).zip(expected) {
        let cells: Vec<&str> = line.split('\t').collect();
        assert_eq!(cells[0], id);
        assert!((cells[2].parse::<f64>().unwrap() - score).abs() < 5e-4, "{line}");
        assert_eq!(cells[3], grade);
        assert_eq!(&row[0], id);
        assert_eq!(&row[3], grade);
    }

    let bad = run(&["assess", "--deductions", s(&deductions), "--weights", "0.5,0.5"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn fit_and_predict_are_deterministic() {
    let f = Fixture::new(2);
    f.fit("m1.json", &["--seed", "3"]);
    f.fit("m2.json", &["--seed", "3"]);
    assert_eq!(std::fs::read(f.path("m1.json")).unwrap(), std::fs::read(f.path("m2.json")).unwrap());
    f.predict("m1.json", "p1.csv", &[]);
    f.predict("m2.json", "p2.csv", &[]);
    assert_eq!(std::fs::read(f.path("p1.csv")).unwrap(), std::fs::read(f.path("p2.csv")).unwrap());

    let grades = ["Normal", "Attention", "Abnormal", "Serious"];
    let rows = csv_rows(&f.path("p1.csv"));
    assert_eq!(rows.len(), csv_rows(&f.data("test_labels.csv")).len());
    for row in rows {
        let p: Vec<f64> = (3..7).map(|i| row[i].parse().unwrap()).collect();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let best = (0..4).max_by(|a, b| p[*a].total_cmp(&p[*b])).unwrap();
        assert_eq!(&row[2], grades[best]);
    }
}

#[test]
fn alpha_one_matches_supervised_prediction() {
    let f = Fixture::new(4);
    f.fit("m.json", &["--alpha", "1"]);
    f.predict("m.json", "ssl.csv", &[]);
    f.predict("m.json", "sup.csv", &["--supervised"]);
    assert_eq!(std::fs::read(f.path("ssl.csv")).unwrap(), std::fs::read(f.path("sup.csv")).unwrap());
    let bundle: serde_json::Value = serde_json::from_slice(&std::fs::read(f.path("m.json")).unwrap()).unwrap();
    assert_eq!(
        bundle["classifier"]["corrected"]["centers"],
        bundle["classifier"]["prototypes"]["centers"]
    );
}

/// Truth and predictions laid out from a confusion table.
fn write_from_counts(counts: &[[u64; 4]; 4], truth: &Path, predictions: &Path) {
    let grades = ["Normal", "Attention", "Abnormal", "Serious"];
    let mut t = String::from("segment_id,week,grade\n");
    let mut p = String::from("segment_id,week,grade,p_normal,p_attention,p_abnormal,p_serious\n");
    let mut week = 0;
    for (a, row) in counts.iter().enumerate() {
        for (k, &n) in row.iter().enumerate() {
            for _ in 0..n {
                week += 1;
                t.push_str(&format!("S,{week},{}\n", grades[a]));
                let mut probs = ["0"; 4];
                probs[k] = "1";
                p.push_str(&format!("S,{week},{},{}\n", grades[k], probs.join(",")));
            }
        }
    }
    std::fs::write(truth, t).unwrap();
    std::fs::write(predictions, p).unwrap();
}

#[test]
fn evaluate_scores_crafted_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let (truth, pred, report) = (dir.path().join("t.csv"), dir.path().join("p.csv"), dir.path().join("r.json"));
    let counts = [[298, 18, 4, 0], [10, 102, 2, 0], [0, 4, 43, 2], [0, 0, 4, 24]];
    write_from_counts(&counts, &truth, &pred);
    run_ok(&["evaluate", "--predictions", s(&pred), "--truth", s(&truth), "--report", s(&report)]);
    let doc: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    let macro_f1 = doc["scores"]["f1"]["macro_f1"].as_f64().unwrap();
    // 2·TP / (row + column) per class, averaged.
    let oracle: f64 = (0..4)
        .map(|k| {
            let row: u64 = counts[k].iter().sum();
            let col: u64 = counts.iter().map(|r| r[k]).sum();
            2.0 * counts[k][k] as f64 / (row + col) as f64
        })
        .sum::<f64>()
        / 4.0;
    assert!((macro_f1 - oracle).abs() < 1e-12);
    assert!((macro_f1 - 0.885).abs() < 1e-3);
    assert_eq!(doc["scores"]["samples"], 511);

    let perfect = [[5, 0, 0, 0], [0, 4, 0, 0], [0, 0, 3, 0], [0, 0, 0, 2]];
    write_from_counts(&perfect, &truth, &pred);
    let out = run_ok(&["evaluate", "--predictions", s(&pred), "--truth", s(&truth), "--compare", s(&pred)]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("macro F1 1.0000 over 14 samples"), "{text}");
    assert!(text.contains("macro F1 difference +0.0000"), "{text}");
}

#[test]
fn sweep_at_full_fraction_matches_fit_and_evaluate() {
    let f = Fixture::new(6);
    f.fit("m.json", &["--seed", "5"]);
    f.predict("m.json", "p.csv", &[]);
    let report = f.path("r.json");
    run_ok(&["evaluate", "--predictions", &f.path("p.csv"), "--truth", &f.data("test_labels.csv"), "--report", &report]);
    let doc: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();

    let sweep = |out: &str| {
        run_ok(&[
            "sweep",
            "--train-records",
            &f.data("train_records.csv"),
            "--train-labels",
            &f.data("train_labels.csv"),
            "--test-records",
            &f.data("test_records.csv"),
            "--test-labels",
            &f.data("test_labels.csv"),
            "--unlabeled",
            &f.data("unlabeled_records.csv"),
            "--codebook",
            &f.data("codebook.json"),
            "--fractions",
            "0.5,1",
            "--seeds",
            "5",
            "--seed",
            "5",
            "--epochs",
            "20",
            "--out",
            &f.path(out),
        ]);
    };
    sweep("s1.csv");
    sweep("s2.csv");
    assert_eq!(std::fs::read(f.path("s1.csv")).unwrap(), std::fs::read(f.path("s2.csv")).unwrap());
    let rows = csv_rows(&f.path("s1.csv"));
    assert_eq!(rows.len(), 2);
    let full = rows.iter().find(|r| &r[0] == "1").unwrap();
    assert_eq!(full[3].parse::<f64>().unwrap(), doc["scores"]["f1"]["macro_f1"].as_f64().unwrap());
}

#[test]
fn projection_lies_in_unit_square() {
    let f = Fixture::new(8);
    f.fit("m.json", &[]);
    let out = f.path("proj.csv");
    run_ok(&[
        "project",
        "--model",
        &f.path("m.json"),
        "--records",
        &f.data("test_records.csv"),
        "--labels",
        &f.data("test_labels.csv"),
        "--out",
        &out,
    ]);
    let rows = csv_rows(&out);
    let samples = csv_rows(&f.data("test_labels.csv")).len();
    assert_eq!(rows.len(), samples + 8);
    for row in &rows {
        for i in 0..2 {
            let x: f64 = row[i].parse().unwrap();
            assert!((0.0..=1.0).contains(&x), "{row:?}");
        }
    }
}

#[test]
fn exit_codes_distinguish_usage_and_data_errors() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["predict", "--records", "x.csv"]).status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.json");
    let records = dir.path().join("r.csv");
    assert_eq!(run(&["predict", "--model", s(&missing), "--records", s(&records)]).status.code(), Some(3));

    let truth = dir.path().join("t.csv");
    let pred = dir.path().join("p.csv");
    std::fs::write(&truth, "segment_id,week,grade\nS,1,Normal\nS,2,Serious\n").unwrap();
    std::fs::write(
        &pred,
        "segment_id,week,grade,p_normal,p_attention,p_abnormal,p_serious\nS,1,Normal,1,0,0,0\n",
    )
    .unwrap();
    let out = run(&["evaluate", "--predictions", s(&pred), "--truth", s(&truth)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no prediction"));

    std::fs::write(&truth, "segment_id,week,grade\nS,1,Excellent\n").unwrap();
    assert_eq!(run(&["evaluate", "--predictions", s(&pred), "--truth", s(&truth)]).status.code(), Some(3));
}
