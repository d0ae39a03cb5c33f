//! Bundled scenarios against their recorded transcripts.
//! `UPDATE_GOLDEN=1 cargo test --test golden` rewrites them.

mod common;

use common::{golden_path, timed_run};
use guidebot_core::harness::BUNDLED;

#[test]
fn bundled_transcripts_match_golden() {
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    for (name, _) in BUNDLED {
        let (text, secs) = timed_run(name);
        assert!(secs < 5.0, "{name} took {secs:.2}s");
        let path = golden_path(name);
        if update {
            std::fs::write(&path, &text).unwrap();
            continue;
        }
        let golden = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        if text != golden {
            let line = text.lines().zip(golden.lines()).position(|(a, b)| a != b);
            panic!("{name} differs from golden at line {:?}", line.map(|l| l + 1));
        }
    }
}
