//! Lists deprecated API usages in the sample project.
//!
//!     cargo run --example scan_usages [CATALOG] [PROJECT]

use std::path::PathBuf;

use evolve::cli::scan_project;
use evolve::Catalog;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/data");
    let mut args = std::env::args().skip(1);
    let catalog_path = args.next().map(PathBuf::from).unwrap_or(data.join("catalog.jsonl"));
    let project = args.next().map(PathBuf::from).unwrap_or(data.join("clock-app"));

    let catalog = Catalog::load_path(&catalog_path)?;
    println!("{} catalog records", catalog.len());
    for (record, usage) in scan_project(&catalog, &project).map_err(|e| e.0)? {
        println!(
            "{}:{}:{}  {}  in {}()",
            usage.unit_path,
            usage.line,
            usage.column,
            record.deprecated.display(),
            usage.enclosing_function.as_deref().unwrap_or("?"),
        );
    }
    Ok(())
}
