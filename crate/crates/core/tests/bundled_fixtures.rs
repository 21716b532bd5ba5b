//! The checked-in fixture bundle must stay byte-identical to what the
//! generator produces, so nobody edits one side and silently forks the
//! reference deployment.

use std::fs;
use std::path::{Path, PathBuf};

use vigil_core::fixtures;

fn repo_fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

#[test]
fn checked_in_bundle_matches_the_generator() {
    let fresh = tempfile::tempdir().unwrap();
    fixtures::write_all(fresh.path()).unwrap();

    let bundled = repo_fixtures();
    for name in [
        "wsn_config.json",
        "museum_24h.csv",
        "rate_card.json",
        "usage_free_tier.json",
        "usage_full_deployment.json",
    ] {
        let generated = fs::read(fresh.path().join(name)).unwrap();
        let checked_in = fs::read(bundled.join(name))
            .unwrap_or_else(|e| panic!("fixtures/{name} is missing: {e}"));
        assert_eq!(
            generated, checked_in,
            "fixtures/{name} no longer matches `vigil fixtures` output"
        );
    }
}
