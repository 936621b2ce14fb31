//! Aggregates a synthetic batch of session results and prints every format.

use evolve::report::{aggregate, render_report, ReportFormat};
use evolve::session::{PhaseTimings, SessionResult};
use evolve::SessionStatus;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let apis = [
        "android.widget.TimePicker#getCurrentHour()",
        "android.net.ConnectivityManager#getAllNetworkInfo()",
        "android.location.LocationManager#addGpsStatusListener(android.location.GpsStatus.Listener)",
    ];
    let mut results = Vec::new();
    for i in 0..40usize {
        let (status, iterations) = match i % 10 {
            0 => (SessionStatus::FailedBoundReached, 5),
            1 => (SessionStatus::SucceededValidatorFlagged, 2),
            k => (SessionStatus::Succeeded, k % 4),
        };
        results.push(SessionResult {
            session: format!("s{i}"),
            api: apis[i % apis.len()].to_string(),
            status,
            iterations,
            validation: None,
            timings_ms: PhaseTimings {
                update: Some(9000 + 100 * i as u64),
                test_gen: Some(14000),
                refinements: vec![11000; iterations],
            },
        });
    }
    let agg = aggregate(&results)?;
    for format in [ReportFormat::PlainTable, ReportFormat::DelimitedValues, ReportFormat::StructuredDocument] {
        println!("--- {format:?}");
        println!("{}", String::from_utf8(render_report(&agg, format))?);
    }
    Ok(())
}
