//! Every pipeline stage on the bundled slice with the desk configuration.
//!
//! cargo run --release --example pipeline [-- OUT_DIR]

use rebound_alarm::config::PipelineConfig;
use rebound_alarm::pipeline::Pipeline;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = PipelineConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/config/desk.toml"))?;
    if let Some(out) = std::env::args().nth(1) {
        cfg.out = out.into();
    }
    let p = Pipeline::new(cfg)?;

    println!("windows:  {:?}", p.windows()?.count);
    let fits = p.fit_all()?;
    println!("fit-all:  {} fitted, {} failed, {} negative bubbles", fits.fitted, fits.failures, fits.negative_bubbles);
    let l = p.learn()?;
    println!("learn:    {} rebounds, {} informative parameters, features {:?}", l.rebounds, l.informative_params, l.features);
    for s in p.predict()? {
        println!("predict:  {} days, leakage audit passed: {}", s.days, s.leakage_audit_passed);
    }
    for e in p.evaluate()? {
        println!(
            "evaluate: ({}, {}) {} diagram points, best gap below diagonal {:.3}",
            e.qualification.alpha,
            e.qualification.beta,
            e.diagram_points,
            e.best_vertical_gap.unwrap_or(0.0)
        );
    }
    for (q, r) in p.backtest()? {
        println!(
            "backtest: ({}, {}) Th {} -> {} trades, cum excess {:.3}, p {:?}",
            q.alpha, q.beta, r.threshold, r.number_of_trades, r.cumulative_excess_log_return, r.p_value_cumulative_excess_return
        );
    }
    p.report()?;
    println!("outputs in {}", p.cfg.out.display());
    Ok(())
}
