//! Record ingestion and the seeded synthetic corpus.
//!
//! The generator draws a latent grade per record, then every coded column
//! and meteorological archetype from grade-conditioned tables
//! ([`level_distribution`]), blanks slots in a fixed share of records and
//! emits inspection deductions that score into the latent grade's band.

mod generate;
mod io;
mod reference;
mod split;

pub use generate::{generate, largest_remainder, Corpus, CorpusConfig};
pub use io::{
    attach_labels, read_deductions, read_labels, read_predictions, read_records, read_records_from, record_header,
    write_deductions, write_labels, write_predictions, write_predictions_to, write_records, write_records_to,
    Prediction, DEDUCTION_HEADER, LABEL_HEADER, PREDICTION_HEADER,
};
pub use reference::{level_distribution, reference_codebook};
pub use split::{split, Split, SplitSpec};
