//! Detect rebounds (local minima of a centred window) on the bundled slice.
//!
//! cargo run --release --example rebounds [-- PRICES.csv]

use rebound_alarm::data::load_price_csv;
use rebound_alarm::rebound::{detect_rebounds_with, EdgePolicy, ReboundRule, SpanUnit};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/data/sp500_1999_2009.csv").into());
    let prices = load_price_csv(&path)?;

    let rules = [
        ReboundRule::default(),
        ReboundRule::with_half_width(365),
        ReboundRule::with_half_width(60),
        ReboundRule { unit: SpanUnit::CalendarDays, ..ReboundRule::default() },
        ReboundRule { trailing_edge: EdgePolicy::Exclude, ..ReboundRule::default() },
    ];
    for rule in rules {
        let set = detect_rebounds_with(&prices, &rule);
        let dates: Vec<String> = set.dates.iter().map(|d| d.to_string()).collect();
        println!(
            "±{} {:?}, trailing {:?}: {} [{}]",
            rule.half_width,
            rule.unit,
            rule.trailing_edge,
            set.len(),
            dates.join(", ")
        );
    }
    Ok(())
}
