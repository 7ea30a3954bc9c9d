//! Fit every window of the bundled slice, learn informative parameters and
//! features before a cutoff, and build the out-of-sample alarm index.
//!
//! cargo run --release --example learn_patterns

use chrono::NaiveDate;
use rayon::prelude::*;
use rebound_alarm::data::{generate_windows, load_price_csv, log_prices, WindowRules};
use rebound_alarm::optimizer::{fit_series_window, OptimizerConfig};
use rebound_alarm::pattern::{learn, predict_series, FitSummary, LearnConfig, Qualification};
use rebound_alarm::rebound::{detect_rebounds_with, ReboundRule};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let prices = load_price_csv(concat!(env!("CARGO_MANIFEST_DIR"), "/data/sp500_1999_2009.csv"))?;
    let logp = log_prices(&prices);
    let windows = generate_windows(&prices, &WindowRules { dt1_step: 100, dt2_step: 100, ..WindowRules::default() });
    let opt = OptimizerConfig { tabu_iterations: 25, initial_samples: 100, restarts: 1, seed: 42, ..OptimizerConfig::default() };
    let fits: Vec<_> = windows.par_iter().filter_map(|w| fit_series_window(&logp, *w, &opt).ok()).collect();
    println!("{} of {} windows fitted", fits.len(), windows.len());

    let rebounds = detect_rebounds_with(&prices, &ReboundRule::with_half_width(60));
    let cutoff = NaiveDate::from_ymd_opt(2005, 7, 1).unwrap();
    let cfg = LearnConfig {
        cutoff,
        near_days: 20.0,
        qualifications: vec![Qualification { alpha: 10, beta: 200 }],
        ..LearnConfig::default()
    };
    let model = learn(&fits, &rebounds, &cfg)?;
    println!(
        "learning set: {} fits, {} Class I, {} rebounds before {cutoff}",
        model.learning_fits,
        model.class_i_fits,
        rebounds.before(cutoff).len()
    );
    for ip in model.informative.iter().take(8) {
        println!("  IP {:>3}: group {:>2} {:<5} KS {:.3}", ip.id, ip.group, ip.param.name(), ip.ks_distance);
    }
    println!("  ... {} informative parameters", model.informative.len());

    let fs = &model.feature_sets[0];
    println!("features: {} Class I, {} Class II", fs.class_i.len(), fs.class_ii.len());

    let summaries = fits.iter().map(FitSummary::from_fit).collect::<Result<Vec<_>, _>>()?;
    let end = NaiveDate::from_ymd_opt(2009, 6, 3).unwrap();
    let (alarms, audit) = predict_series(&summaries, &model.informative, fs, model.cutoff, model.near_days, cutoff, end, 50);
    println!("leakage audit passed: {}", audit.passed());
    for r in rebounds.between(cutoff, end).dates {
        let peak = alarms
            .between(r - chrono::Duration::days(20), r + chrono::Duration::days(20))
            .values
            .iter()
            .cloned()
            .fold(0.0, f64::max);
        println!("  rebound {r}: max RI within ±20 days {peak:.2}");
    }
    Ok(())
}
