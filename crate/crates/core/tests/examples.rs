//! Runs every example program built alongside the tests.

use std::path::PathBuf;
use std::process::Command;

const EXAMPLES: [&str; 7] = [
    "parse_and_canonicalize",
    "tokenize_roundtrip",
    "random_token_validity",
    "build_vocab",
    "pretraining_instances",
    "evaluate_generations",
    "confidence_ensemble",
];

fn example_dir() -> PathBuf {
    // target/<profile>/deps/<this test> -> target/<profile>/examples
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().join("examples")
}

#[test]
fn examples_run() {
    let dir = example_dir();
    for name in EXAMPLES {
        let path = dir.join(format!("{name}{}", std::env::consts::EXE_SUFFIX));
        assert!(path.exists(), "{} not built", path.display());
        let out = Command::new(&path).output().unwrap();
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stdout.is_empty(), "{name} printed nothing");
    }
}
