//! Enumerate fit windows over the bundled S&P 500 slice.
//!
//! cargo run --release --example windows [-- PRICES.csv]

use rebound_alarm::data::{generate_windows, load_price_csv, WindowRules};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/data/sp500_1999_2009.csv").into());
    let prices = load_price_csv(&path)?;
    println!("{} prices, {} .. {}", prices.len(), prices.first_date().unwrap(), prices.last_date().unwrap());

    for rules in [WindowRules::default(), WindowRules { dt1_step: 100, dt2_step: 100, ..WindowRules::default() }] {
        let w = generate_windows(&prices, &rules);
        println!(
            "steps {}/{} days, length {}..{}: {} windows",
            rules.dt1_step,
            rules.dt2_step,
            rules.dt_min,
            rules.dt_max,
            w.len()
        );
        for spec in w.iter().take(3) {
            println!("  {} .. {} ({} days)", spec.t1, spec.t2, spec.length_days());
        }
    }
    Ok(())
}
