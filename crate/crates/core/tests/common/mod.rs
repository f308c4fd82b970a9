#![allow(dead_code)]

use std::fs::File;
use std::path::{Path, PathBuf};

use lexstrata::corpus::{load_corpus, IngestConfig};
use lexstrata::labeler::{read_loans, read_rescues, subtract, LabeledCorpus, RescueMatch};

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn fixture(name: &str) -> PathBuf {
    fixture_dir().join(name)
}

/// The bundled corpus labeled with its loan and rescue lists.
pub fn labeled_fixture() -> LabeledCorpus {
    labeled_from(&fixture("forms.csv"))
}

/// Any form table labeled with the fixture sidecars.
pub fn labeled_from(forms: &Path) -> LabeledCorpus {
    let parsed = load_corpus(
        forms,
        &IngestConfig::default(),
        Some(&fixture("swadesh100.txt")),
        Some(&fixture("domains.csv")),
    )
    .unwrap();
    let loans = read_loans(File::open(fixture("loans.csv")).unwrap()).unwrap();
    let rescues = read_rescues(File::open(fixture("rescues.csv")).unwrap()).unwrap();
    subtract(&parsed.corpus, &loans, &rescues, RescueMatch::Exact)
}
