//! Alphabets, sequences, alignment and elementary edits.

mod align;
mod alphabet;
mod edit;
mod fasta;
mod scoring;

pub use align::{alignment_score, nw_align, AlignedPair, GlobalAlignment};
pub use alphabet::{ungap, Alphabet, Sequence, AMINO_ACIDS, DEFAULT_GAP};
pub use edit::{
    apply_edits, augmented_to_ungapped, column_label, extract_edit_labels, levenshtein, EditKind,
    EditLabel, EditLabels, EditOp, UngappedIndex,
};
pub use fasta::{read_fasta, read_fasta_file, write_fasta, FastaMode, FastaRecord};
pub use scoring::{background_frequencies, ScoringScheme, BLOSUM62, BLOSUM62_BACKGROUND};
