use std::collections::BTreeMap;

use crate::featureset::{Band, Codebook, CodebookEntry, METEO_FEATURES};

/// Raw-value domain of one hierarchically coded column of the reference
/// codebook.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Domain {
    Categories(&'static [&'static str]),
    /// Band lower edges; the last band is unbounded and sampled over the
    /// width of the band before it.
    Bands(&'static [f64]),
}

impl Domain {
    pub(crate) fn levels(self) -> usize {
        match self {
            Domain::Categories(c) => c.len(),
            Domain::Bands(b) => b.len(),
        }
    }
}

/// Column, value domain and how strongly the level depends on the grade.
pub(crate) const CODED_COLUMNS: [(&str, Domain, f64); 12] = [
    ("s1", Domain::Categories(&["110kV", "220kV", "500kV"]), 0.3),
    ("s2", Domain::Categories(&["1", "2", "4"]), 0.4),
    ("s3", Domain::Categories(&["ACSR", "AACSR", "ACCC"]), 0.6),
    ("s4", Domain::Bands(&[0.0, 24.0, 30.0, 36.0]), 0.7),
    ("s5", Domain::Bands(&[0.0, 35.0, 45.0, 55.0]), 0.7),
    ("s6", Domain::Bands(&[0.0, 300.0, 400.0, 500.0]), 0.75),
    ("s7", Domain::Categories(&["tangent", "angle", "tension", "terminal"]), 0.7),
    ("s8", Domain::Bands(&[0.0, 5.0, 15.0, 25.0]), 0.9),
    ("t1", Domain::Categories(&["Q1", "Q2", "Q3", "Q4"]), 0.4),
    ("t2", Domain::Categories(&["plain", "hill", "mountain", "river"]), 0.75),
    ("t3", Domain::Bands(&[0.0, 200.0, 500.0, 1000.0]), 0.7),
    ("t4", Domain::Categories(&["none", "heavy_ice", "bird", "pollution", "lightning"]), 0.8),
];

/// Level, spread and grade dependence of each meteorological series.
pub(crate) struct MeteoProfile {
    pub base: f64,
    pub scale: f64,
    pub floor: Option<f64>,
    pub strength: f64,
}

pub(crate) const METEO_PROFILES: [MeteoProfile; METEO_FEATURES] = [
    MeteoProfile { base: 25.0, scale: 4.0, floor: None, strength: 0.75 },
    MeteoProfile { base: 70.0, scale: 12.0, floor: Some(0.0), strength: 0.75 },
    MeteoProfile { base: 3.0, scale: 1.2, floor: Some(0.0), strength: 0.75 },
    MeteoProfile { base: 40.0, scale: 25.0, floor: Some(0.0), strength: 0.75 },
    MeteoProfile { base: 1.5, scale: 1.2, floor: Some(0.0), strength: 0.75 },
    MeteoProfile { base: 2.0, scale: 1.0, floor: Some(0.0), strength: 0.75 },
];

/// Unit-free daily shapes; a window is `base + scale·shape + noise`.
pub(crate) const ARCHETYPES: [[f64; 5]; 5] = [
    [-1.0, -1.0, -1.0, -1.0, -1.0],
    [-1.0, -0.5, 0.0, 0.5, 1.0],
    [1.0, -1.0, 1.0, -1.0, 1.0],
    [1.0, 0.5, 0.0, -0.5, -1.0],
    [1.0, 1.0, 1.0, 1.0, 1.0],
];

/// Relative noise of a meteorological reading.
pub(crate) const METEO_NOISE: f64 = 0.25;

/// Width, in levels, of the grade bump.
pub(crate) const BUMP_WIDTH: f64 = 0.35;

/// `P(level | grade)` over `levels` ordered levels: a mix of the uniform
/// distribution and a bump centred where the grade sits on the level axis.
pub fn level_distribution(levels: usize, grade_index: usize, strength: f64) -> Vec<f64> {
    let centre = if levels > 1 {
        grade_index as f64 * (levels - 1) as f64 / 3.0
    } else {
        0.0
    };
    let bump: Vec<f64> = (0..levels)
        .map(|l| (-(l as f64 - centre).powi(2) / (2.0 * BUMP_WIDTH * BUMP_WIDTH)).exp())
        .collect();
    let total: f64 = bump.iter().sum();
    bump.iter()
        .map(|b| (1.0 - strength) / levels as f64 + strength * b / total)
        .collect()
}

/// The codebook matching the synthetic corpus.
pub fn reference_codebook() -> Codebook {
    let mut entries = BTreeMap::new();
    for (column, domain, _) in CODED_COLUMNS {
        let entry = match domain {
            Domain::Categories(names) => CodebookEntry::Categories(
                names.iter().enumerate().map(|(i, n)| (n.to_string(), i as u32)).collect(),
            ),
            Domain::Bands(edges) => CodebookEntry::Bands(
                edges
                    .iter()
                    .enumerate()
                    .map(|(i, &lower)| Band {
                        lower,
                        upper: edges.get(i + 1).copied(),
                        code: i as u32,
                    })
                    .collect(),
            ),
        };
        entries.insert(column.to_string(), entry);
    }
    Codebook::new(entries).expect("reference codebook is well formed")
}
