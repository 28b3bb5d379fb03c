//! Bundled seed pool used to start runs when no seed file is configured.

use crate::molgraph::{MolError, Molecule};

const BUNDLED: &str = include_str!("../data/seeds.smi");

/// Parse a seed-molecule listing: one SMILES per line, `#` comments and
/// blank lines ignored.
pub fn parse_seed_file(text: &str) -> Result<Vec<Molecule>, MolError> {
    let mut out = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        out.push(Molecule::parse(line)?);
    }
    Ok(out)
}

/// The 250-molecule pool shipped with the crate.
pub fn bundled_seed_pool() -> Vec<Molecule> {
    parse_seed_file(BUNDLED).expect("bundled seed pool is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn bundled_pool_is_valid_and_distinct() {
        let pool = bundled_seed_pool();
        assert_eq!(pool.len(), 250);
        let canonicals: HashSet<&str> =
            pool.iter().map(|m| m.canonical_smiles()).collect();
        assert_eq!(canonicals.len(), 250, "duplicate canonical forms in pool");
    }

    #[test]
    fn comments_and_blanks_ignored() {
        let pool = parse_seed_file("# header\n\nCCO\n  CCN\n").unwrap();
        assert_eq!(pool.len(), 2);
    }
}
