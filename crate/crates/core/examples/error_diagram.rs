//! Error diagram and Bayesian posterior for a random alarm index, which
//! should sit on the no-skill diagonal.
//!
//! cargo run --release --example error_diagram

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rebound_alarm::data::load_price_csv;
use rebound_alarm::evaluation::{bayes_posterior, error_diagram, BayesConfig, DiagramConfig};
use rebound_alarm::pattern::{AlarmMode, AlarmSeries};
use rebound_alarm::rebound::{detect_rebounds_with, ReboundRule, ReboundTimeline};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let prices = load_price_csv(concat!(env!("CARGO_MANIFEST_DIR"), "/data/sp500_1999_2009.csv"))?;
    let rule = ReboundRule::with_half_width(60);
    let rebounds = detect_rebounds_with(&prices, &rule);
    let start = NaiveDate::from_ymd_opt(2000, 1, 3).unwrap();
    let end = prices.last_date().unwrap();
    let days = (end - start).num_days() as usize + 1;

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let alarms = AlarmSeries::new(AlarmMode::Prediction, start, (0..days).map(|_| rng.gen::<f64>()).collect());
    let points = error_diagram(&alarms, &rebounds.between(start, end), &DiagramConfig::default());
    println!("{} rebounds, {} diagram points", rebounds.between(start, end).len(), points.len());
    println!("{:>10} {:>8} {:>8} {:>9}", "threshold", "alarm", "miss", "distance");
    for p in &points {
        println!("{:>10.4} {:>8.3} {:>8.3} {:>9.3}", p.threshold, p.alarm_fraction, p.miss_fraction, p.skill_distance());
    }

    let cfg = BayesConfig { history_start: start, first_evaluation: start, ..BayesConfig::default() };
    let timeline = ReboundTimeline::new(&prices, &rule);
    let d = NaiveDate::from_ymd_opt(2008, 11, 28).unwrap();
    let b = bayes_posterior(&alarms, &timeline.as_of(d), d, &cfg)?;
    println!(
        "{d}: Lv {:.3}, prior {:.4}, likelihood {:.3}, P(RI>=Lv) {:.4}, posterior {:.4}",
        b.lv, b.prior, b.likelihood, b.p_ri, b.posterior
    );
    Ok(())
}
