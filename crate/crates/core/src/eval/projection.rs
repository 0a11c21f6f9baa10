use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::assessment::GradeLabel;
use crate::error::{Error, Result};
use crate::numerics::{pca_fit, DenseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointKind {
    Sample,
    CenterSupervised,
    CenterSemisupervised,
}

impl PointKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PointKind::Sample => "sample",
            PointKind::CenterSupervised => "center_supervised",
            PointKind::CenterSemisupervised => "center_semisupervised",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionRow {
    pub pc1: f64,
    pub pc2: f64,
    pub class: GradeLabel,
    pub kind: PointKind,
}

/// Two-component PCA of the sample embeddings with both center sets
/// projected alongside; coordinates are min-max scaled to `[0, 1]` over all
/// emitted rows.
pub fn export_projection(
    samples: &[(Vec<f64>, GradeLabel)],
    supervised_centers: &[Vec<f64>],
    semisupervised_centers: &[Vec<f64>],
) -> Result<Vec<ProjectionRow>> {
    if samples.len() < 2 {
        return Err(Error::insufficient(format!(
            "projection needs at least 2 embeddings, got {}",
            samples.len()
        )));
    }
    let data = DenseMatrix::from_rows(&samples.iter().map(|(v, _)| v.as_slice()).collect::<Vec<_>>())?;
    let k = 2.min(data.rows() - 1).min(data.cols());
    let model = pca_fit(&data, k)?;

    let mut points: Vec<([f64; 2], GradeLabel, PointKind)> = Vec::new();
    let mut push = |v: &[f64], class: GradeLabel, kind: PointKind| -> Result<()> {
        let p = model.transform_row(v)?;
        points.push(([p[0], p.get(1).copied().unwrap_or(0.0)], class, kind));
        Ok(())
    };
    for (v, class) in samples {
        push(v, *class, PointKind::Sample)?;
    }
    for (k, c) in supervised_centers.iter().enumerate() {
        push(c, GradeLabel::ALL[k], PointKind::CenterSupervised)?;
    }
    for (k, c) in semisupervised_centers.iter().enumerate() {
        push(c, GradeLabel::ALL[k], PointKind::CenterSemisupervised)?;
    }

    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for (p, _, _) in &points {
        for a in 0..2 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let norm = |x: f64, a: usize| {
        let span = hi[a] - lo[a];
        if span > 0.0 {
            ((x - lo[a]) / span).clamp(0.0, 1.0)
        } else {
            0.0
        }
    };
    Ok(points
        .into_iter()
        .map(|(p, class, kind)| ProjectionRow {
            pc1: norm(p[0], 0),
            pc2: norm(p[1], 1),
            class,
            kind,
        })
        .collect())
}

pub fn write_projection_csv<W: Write>(rows: &[ProjectionRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let wrap = |e: csv::Error| Error::Csv {
        path: "projection".into(),
        source: e,
    };
    w.write_record(["pc1", "pc2", "class", "kind"]).map_err(wrap)?;
    for r in rows {
        w.write_record([r.pc1.to_string(), r.pc2.to_string(), r.class.name().to_string(), r.kind.as_str().to_string()])
            .map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io("projection", e))?;
    Ok(())
}
