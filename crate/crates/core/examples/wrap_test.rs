//! Duplicates a generated test so each copy is pinned to one API level.
//!
//!     cargo run --example wrap_test [OLD:NEW]

use evolve::harness::wrap_test;
use evolve::LevelPair;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let levels = match std::env::args().nth(1) {
        Some(text) => LevelPair::parse(&text)?,
        None => LevelPair::new(22, 23)?,
    };
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data/replies/generated_test.java");
    let wrapped = wrap_test(&std::fs::read_to_string(path)?, levels)?;
    eprintln!("{} -> {}", wrapped.fully_qualified_name(), wrapped.relative_path().display());
    eprintln!("methods: {}", wrapped.methods.join(", "));
    print!("{}", wrapped.source);
    Ok(())
}
