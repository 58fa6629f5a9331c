//! Checks a set of scores against the default thresholds.
//!
//! ```bash
//! cargo run --example metrics_gate -- classification=82.72 stability=71.43
//! ```

use safer::report::{metrics_summary, Scores};
use safer::MetricsThresholds;

fn main() {
    let mut scores = Scores::default();
    for arg in std::env::args().skip(1) {
        let Some((name, value)) = arg.split_once('=') else {
            eprintln!("ignoring `{arg}` (expected metric=value)");
            continue;
        };
        let Ok(value) = value.parse::<f64>() else {
            eprintln!("ignoring `{arg}`: not a number");
            continue;
        };
        let slot = match name {
            "subsystem_identification" => &mut scores.subsystem_identification,
            "classification" => &mut scores.classification,
            "duplicates" => &mut scores.duplicates,
            "contradictions" => &mut scores.contradictions,
            "stability" => &mut scores.stability,
            other => {
                eprintln!("unknown metric `{other}`");
                continue;
            }
        };
        *slot = Some(value);
    }
    if scores == Scores::default() {
        scores.classification = Some(82.72);
        scores.stability = Some(71.43);
    }
    for row in metrics_summary(&scores, &MetricsThresholds::default()) {
        let verdict = if row.passed { "pass" } else { "fail" };
        println!("{:<26} {:>7.2} > {:>6.2}  {verdict}", row.metric, row.value, row.threshold);
    }
}
