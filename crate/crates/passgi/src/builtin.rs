//! Built-in pass catalog and baseline snapshot.
//!
//! Both are plain line files compiled into the binary. They reflect the
//! legacy pass manager around LLVM 8; substitute files captured from your
//! own toolchain for real runs.

use passgi_core::{load_catalog, load_sequence, CatalogError, PassCatalog, PassSequence};

pub const CATALOG_TEXT: &str = include_str!("../data/legacy_o3_catalog.txt");
pub const BASELINE_TEXT: &str = include_str!("../data/legacy_o3_baseline.txt");
pub const CATALOG_LABEL: &str = "built-in legacy pass catalog";
pub const BASELINE_LABEL: &str = "legacy -O3 snapshot";

pub fn catalog() -> PassCatalog {
    let mut c = load_catalog(CATALOG_TEXT).expect("built-in catalog is valid");
    c.source_label = CATALOG_LABEL.into();
    c
}

pub fn baseline(catalog: &PassCatalog) -> Result<PassSequence, CatalogError> {
    let mut s = load_sequence(BASELINE_TEXT, catalog)?;
    s.label = BASELINE_LABEL.into();
    Ok(s)
}
