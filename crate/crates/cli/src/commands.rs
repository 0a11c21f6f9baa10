use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use linecond::assessment::assess_line;
use linecond::corpus::{
    attach_labels, generate, read_deductions, read_labels, read_predictions, read_records, split, write_deductions,
    write_labels, write_predictions, write_predictions_to, write_records, CorpusConfig, SplitSpec,
};
use linecond::eval::{
    export_projection, label_efficiency_sweep, summarize_sweep, write_projection_csv, write_sweep_csv, SweepVariant,
};
use linecond::{Codebook, DefectRecord, Error, GradeLabel, LabeledRecord, ModelBundle, PipelineConfig, RecordKey};

use crate::report::{render, score, EvaluationReport, REPORT_FORMAT_VERSION};
use crate::CliError;

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    File::create(path).map(BufWriter::new).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn labeled(records: &Path, labels: &Path) -> Result<Vec<LabeledRecord>, Error> {
    attach_labels(read_records(records)?, &read_labels(labels)?)
}

fn keyed(rows: &[LabeledRecord]) -> Vec<(RecordKey, GradeLabel)> {
    rows.iter().map(|r| (r.record.key(), r.grade)).collect()
}

pub fn synth(
    out: &Path,
    seed: u64,
    n_records: usize,
    labeled_count: usize,
    missing_rate: f64,
    window: usize,
) -> Result<(), CliError> {
    let config = CorpusConfig {
        n_records,
        labeled_count,
        missing_record_rate: missing_rate,
        window_length: window,
        seed,
        ..CorpusConfig::default()
    };
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let corpus = generate(&config)?;
    let spec = SplitSpec::for_corpus(n_records, labeled_count, &config.class_mix);
    let parts = split(&corpus.records, &corpus.grades, &spec, seed)?;

    std::fs::create_dir_all(out).map_err(|source| Error::Io {
        path: out.to_path_buf(),
        source,
    })?;
    let all_labels: Vec<(RecordKey, GradeLabel)> =
        corpus.records.iter().map(DefectRecord::key).zip(corpus.grades.iter().copied()).collect();
    write_records(&corpus.records, &out.join("records.csv"))?;
    write_labels(&all_labels, &out.join("labels.csv"))?;
    let train: Vec<DefectRecord> = parts.train.iter().map(|r| r.record.clone()).collect();
    write_records(&train, &out.join("train_records.csv"))?;
    write_labels(&keyed(&parts.train), &out.join("train_labels.csv"))?;
    let test: Vec<DefectRecord> = parts.test.iter().map(|r| r.record.clone()).collect();
    write_records(&test, &out.join("test_records.csv"))?;
    write_labels(&keyed(&parts.test), &out.join("test_labels.csv"))?;
    write_records(&parts.unlabeled, &out.join("unlabeled_records.csv"))?;
    let truth: Vec<(RecordKey, GradeLabel)> =
        parts.unlabeled.iter().map(DefectRecord::key).zip(parts.unlabeled_truth.iter().copied()).collect();
    write_labels(&truth, &out.join("unlabeled_truth.csv"))?;
    let sections: Vec<_> = corpus.records.iter().map(DefectRecord::key).zip(corpus.deductions).collect();
    write_deductions(&sections, &out.join("deductions.csv"))?;
    write_text(&out.join("codebook.json"), &linecond::corpus::reference_codebook().to_json())?;

    println!(
        "wrote {} records to {}: {} train, {} test, {} unlabeled",
        corpus.records.len(),
        out.display(),
        parts.train.len(),
        parts.test.len(),
        parts.unlabeled.len()
    );
    Ok(())
}

pub fn assess(deductions: &Path, out: Option<&Path>, config: &PipelineConfig) -> Result<(), CliError> {
    let sections = read_deductions(deductions)?;
    let mut rows = Vec::with_capacity(sections.len());
    for (key, list) in &sections {
        let a = assess_line(list, &config.unit_weights, &config.grade_scale)
            .map_err(|e| Error::InvalidInput(format!("section {key}: {e}")))?;
        rows.push((key, a.score, a.grade));
    }
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    for (key, s, g) in &rows {
        let _ = writeln!(lock, "{}\t{}\t{s:.3}\t{g}", key.segment_id, key.week);
    }
    if let Some(path) = out {
        let wrap = |source| Error::Csv {
            path: path.to_path_buf(),
            source,
        };
        let mut w = csv::Writer::from_writer(create(path)?);
        w.write_record(["segment_id", "week", "score", "grade"]).map_err(wrap)?;
        for (key, s, g) in &rows {
            w.write_record([key.segment_id.as_str(), &key.week.to_string(), &format!("{s:.3}"), g.name()])
                .map_err(wrap)?;
        }
        w.flush().map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
    }
    Ok(())
}

pub fn fit(
    records: &Path,
    labels: &Path,
    unlabeled: Option<&Path>,
    codebook: &Path,
    model: &Path,
    config: &PipelineConfig,
) -> Result<(), CliError> {
    let train = labeled(records, labels)?;
    let pool = match unlabeled {
        Some(p) => read_records(p)?,
        None => Vec::new(),
    };
    let codebook = Codebook::load(codebook)?;
    let bundle = linecond::fit(&train, &pool, &codebook, config)?;
    bundle.save(model)?;

    let trace = &bundle.classifier.loss_trace;
    println!("fitted on {} labeled and {} unlabeled records", train.len(), pool.len());
    for (i, loss) in trace.iter().enumerate() {
        if i % 10 == 0 || i + 1 == trace.len() {
            println!("epoch {:>4}  loss {loss:.6}", i + 1);
        }
    }
    let c = &bundle.classifier.corrected;
    println!(
        "center correction: alpha {}, {} iterations, pseudo-labels {:?}",
        c.alpha, c.iterations_run, c.pseudo_counts
    );
    for (i, d) in c.displacement_trace.iter().enumerate() {
        println!("iteration {:>3}  displacement {d:.3e}", i + 1);
    }
    println!("saved {}", model.display());
    Ok(())
}

pub fn predict(model: &Path, records: &Path, out: Option<&Path>, supervised: bool) -> Result<(), CliError> {
    let bundle = ModelBundle::load(model)?;
    let records = read_records(records)?;
    let predictions = if supervised {
        bundle.predict_supervised(&records)?
    } else {
        bundle.predict(&records)?
    };
    match out {
        Some(path) => write_predictions(&predictions, path)?,
        None => write_predictions_to(&predictions, std::io::stdout().lock(), Path::new("<stdout>"))?,
    }
    Ok(())
}

pub fn evaluate(predictions: &Path, truth: &Path, compare: Option<&Path>, report: Option<&Path>) -> Result<(), CliError> {
    let truth = read_labels(truth)?;
    let grades = |path: &Path| -> Result<Vec<(RecordKey, GradeLabel)>, Error> {
        Ok(read_predictions(path)?.into_iter().map(|p| (p.key, p.grade)).collect())
    };
    let scores = score(&grades(predictions)?, &truth)?;
    print!("{}", render(&scores));
    let baseline = compare.map(|p| grades(p).and_then(|g| score(&g, &truth))).transpose()?;
    let macro_f1_delta = baseline.as_ref().map(|b| scores.f1.macro_f1 - b.f1.macro_f1);
    if let (Some(b), Some(delta)) = (&baseline, macro_f1_delta) {
        println!("\nbaseline");
        print!("{}", render(b));
        println!("\nmacro F1 difference {delta:+.4}");
    }
    if let Some(path) = report {
        let doc = EvaluationReport {
            format_version: REPORT_FORMAT_VERSION,
            scores,
            baseline,
            macro_f1_delta,
        };
        let text = serde_json::to_string_pretty(&doc).expect("report serializes");
        write_text(path, &text)?;
    }
    Ok(())
}

pub struct SweepInputs<'a> {
    pub train_records: &'a Path,
    pub train_labels: &'a Path,
    pub test_records: &'a Path,
    pub test_labels: &'a Path,
    pub unlabeled: Option<&'a Path>,
    pub codebook: &'a Path,
}

pub fn sweep(
    inputs: SweepInputs<'_>,
    fractions: &[f64],
    seeds: &[u64],
    out: &Path,
    supervised_out: Option<&Path>,
    config: &PipelineConfig,
) -> Result<(), CliError> {
    let train = labeled(inputs.train_records, inputs.train_labels)?;
    let test = labeled(inputs.test_records, inputs.test_labels)?;
    let pool = match inputs.unlabeled {
        Some(p) => read_records(p)?,
        None => Vec::new(),
    };
    let codebook = Codebook::load(inputs.codebook)?;
    let runs = label_efficiency_sweep(&train, &test, &pool, &codebook, fractions, seeds, config)?;
    write_sweep_csv(&runs, SweepVariant::SemiSupervised, create(out)?)?;
    if let Some(path) = supervised_out {
        write_sweep_csv(&runs, SweepVariant::Supervised, create(path)?)?;
    }
    println!("{:<10}{:>10}{:>12}{:>10}{:>12}{:>10}", "fraction", "labeled", "ssl mean", "ssl std", "sup mean", "sup std");
    let ssl = summarize_sweep(&runs, SweepVariant::SemiSupervised);
    let sup = summarize_sweep(&runs, SweepVariant::Supervised);
    for (a, b) in ssl.iter().zip(&sup) {
        println!(
            "{:<10}{:>10.1}{:>12.4}{:>10.4}{:>12.4}{:>10.4}{}",
            a.fraction,
            a.labeled_count,
            a.mean,
            a.std,
            b.mean,
            b.std,
            if a.skipped > 0 { format!("  ({} skipped)", a.skipped) } else { String::new() }
        );
    }
    Ok(())
}

pub fn project(model: &Path, records: &Path, labels: &Path, out: &Path) -> Result<(), CliError> {
    let bundle = ModelBundle::load(model)?;
    let rows = labeled(records, labels)?;
    let plain: Vec<DefectRecord> = rows.iter().map(|r| r.record.clone()).collect();
    let embedded = bundle.embed(&plain)?;
    let samples: Vec<(Vec<f64>, GradeLabel)> = embedded.into_iter().zip(rows.iter().map(|r| r.grade)).collect();
    let points = export_projection(
        &samples,
        &bundle.classifier.prototypes.centers,
        &bundle.classifier.corrected.centers,
    )?;
    write_projection_csv(&points, create(out)?)?;
    println!("wrote {} points to {}", points.len(), out.display());
    Ok(())
}
