//! Sends one update prompt to a chat-completions endpoint.
//!
//!     EVOLVE_API_KEY=... cargo run --example live_chat [BASE_URL] [MODEL]

use std::time::Duration;

use evolve::gateway::{extract_code, Gateway, HttpTransport, DEFAULT_BASE_URL, DEFAULT_MODEL};
use evolve::prompts::{render, PromptContext, PromptKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let base_url = args.next().unwrap_or_else(|| DEFAULT_BASE_URL.into());
    let model = args.next().unwrap_or_else(|| DEFAULT_MODEL.into());
    let transport = match HttpTransport::from_env(&base_url, Duration::from_secs(300)) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("{e}; nothing sent");
            return Ok(());
        }
    };
    let prompt = render(
        PromptKind::UpdateFull,
        &PromptContext {
            deprecated_display: Some("TimePicker.getCurrentHour()".into()),
            deprecation_level: Some(23),
            replacements_display: vec!["TimePicker.getHour()".into()],
            code_snippet: Some("int hour = timePicker.getCurrentHour();".into()),
            ..Default::default()
        },
    )?;
    let exchange = Gateway::live(transport, model).complete("live-demo", &prompt)?;
    println!("{} ms, usage {:?}", exchange.latency_ms, exchange.token_usage);
    match extract_code(&exchange.response_text) {
        Ok(code) => println!("{}", code.text),
        Err(e) => println!("{e}:\n{}", exchange.response_text),
    }
    Ok(())
}
