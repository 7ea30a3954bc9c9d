//! Threshold strategy on an alarm index, scored against random strategies
//! with the same trade count and total holding time.
//!
//! cargo run --release --example backtest

use chrono::{Duration, NaiveDate};
use rebound_alarm::data::load_price_csv;
use rebound_alarm::pattern::{AlarmMode, AlarmSeries};
use rebound_alarm::rebound::{detect_rebounds_with, ReboundRule};
use rebound_alarm::trading::{add_significance, generate_trades, score_trades, summarize, Market, RiskFree, StrategyParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let prices = load_price_csv(concat!(env!("CARGO_MANIFEST_DIR"), "/data/sp500_1999_2009.csv"))?;
    let start = NaiveDate::from_ymd_opt(2000, 1, 3).unwrap();
    let end = prices.last_date().unwrap();

    // hindsight index: high during the 15 days before each ±60-day rebound
    let rebounds = detect_rebounds_with(&prices, &ReboundRule::with_half_width(60));
    let days = (end - start).num_days() as usize + 1;
    let values = (0..days)
        .map(|i| {
            let d = start + Duration::days(i as i64);
            if rebounds.dates.iter().any(|&r| r >= d && r - d <= Duration::days(15)) {
                0.9
            } else {
                0.1
            }
        })
        .collect();
    let alarms = AlarmSeries::new(AlarmMode::Prediction, start, values);

    let market = Market::new(&prices, &RiskFree::Constant(2.0), start, end)?;
    for params in [
        StrategyParams { threshold: 0.5, offset: 0, holding: 30 },
        StrategyParams { threshold: 0.5, offset: 10, holding: 10 },
    ] {
        let trades = score_trades(&generate_trades(&alarms, &params), &market)?;
        let mut r = summarize(&params, trades, market.period_days());
        add_significance(&mut r, &market, 1000, 11)?;
        println!(
            "Th {} Os {} Hp {}: {} trades, {} days held, success {:.2}, cum excess {:.3} (p {:.3}), Sharpe {:.3} (p {:?}), bias {:.2} (p {:.3})",
            params.threshold,
            params.offset,
            params.holding,
            r.number_of_trades,
            r.total_holding_days,
            r.success_rate,
            r.cumulative_excess_log_return,
            r.p_value_cumulative_excess_return.unwrap_or(f64::NAN),
            r.sharpe_per_trade.unwrap_or(f64::NAN),
            r.p_value_sharpe,
            r.bias_ratio,
            r.p_value_bias_ratio.unwrap_or(f64::NAN),
        );
    }
    Ok(())
}
