//! Runs the structural update checks over the canned model replies.

use evolve::analysis::validate_update;
use evolve::Catalog;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data");
    let catalog = Catalog::load_path(&data.join("catalog.jsonl"))?;
    let record = catalog.lookup("android.widget.TimePicker#getCurrentHour()")?.expect("in the sample catalog");

    for name in ["guarded_update", "replacement_only_update"] {
        let text = std::fs::read_to_string(data.join(format!("replies/{name}.java")))?;
        let v = validate_update(&text, record);
        println!(
            "{name:<24} replacement={} guard={} deprecated_kept={} -> {:?}",
            v.replacement_present, v.guard_present, v.deprecated_retained, v.verdict
        );
    }
    Ok(())
}
