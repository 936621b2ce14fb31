//! Renders every prompt kind for the sample TimePicker usage.

use evolve::prompts::{render, PromptContext, PromptKind};
use evolve::Catalog;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data");
    let catalog = Catalog::load_path(&data.join("catalog.jsonl"))?;
    let record = catalog.lookup("TimePicker.getCurrentHour()")?.expect("in the sample catalog");
    let code = std::fs::read_to_string(data.join("clock-app/app/src/main/java/com/example/clock/ClockActivity.java"))?;
    let test = std::fs::read_to_string(data.join("replies/generated_test.java"))?;

    let ctx = PromptContext {
        deprecated_display: Some(record.deprecated.display()),
        deprecation_level: Some(record.deprecation_level),
        replacements_display: record.replacements_display(),
        code_snippet: Some(code.clone()),
        function_name: Some("readHour".into()),
        test_name: Some("readHourReturnsPickerHour_newApi".into()),
        error_message: Some("java.lang.AssertionError: expected:<0> but was:<12>".into()),
        test_code_snippet: Some(test),
        trailing_context: Some(code),
        ..Default::default()
    };
    for kind in PromptKind::ALL {
        let prompt = render(kind, &ctx)?;
        println!("=== {} ({})", kind.as_str(), &prompt.fingerprint[..12]);
        println!("{}\n", prompt.text);
    }
    Ok(())
}
