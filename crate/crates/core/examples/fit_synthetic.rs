//! Fit an LPPL to a noisy synthetic negative bubble and compare with the truth.
//!
//! cargo run --release --example fit_synthetic

use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rebound_alarm::data::{day_number, WindowSpec};
use rebound_alarm::lppl::{evaluate_lppl, FitData, LpplParams};
use rebound_alarm::optimizer::{fit_window, OptimizerConfig, SearchBounds};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let t1 = NaiveDate::from_ymd_opt(2008, 1, 2).unwrap();
    let window = WindowSpec { t1, t2: t1 + chrono::Duration::days(299) };
    let (a, b) = (day_number(window.t1) as f64, day_number(window.t2) as f64);

    // B > 0 with a falling log-price: an accelerating decline into tc
    let truth = LpplParams { a: 7.0, b: 0.02, c: 0.003, m: 0.45, omega: 9.0, phi: 1.3, tc: b + 40.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let noise = Normal::new(0.0, 0.01)?;
    let t: Vec<f64> = (0..300).map(|i| a + i as f64).collect();
    let y: Vec<f64> = t.iter().map(|&x| evaluate_lppl(&truth, x).map(|v| v + noise.sample(&mut rng))).collect::<Result<_, _>>()?;
    let data = FitData::new(t, y);

    let cfg = OptimizerConfig { seed: 1, ..OptimizerConfig::default() };
    let fit = fit_window(&data, window, &SearchBounds::for_window(a, b), &cfg)?;

    let p = fit.params;
    println!("{:>6} {:>10} {:>10}", "", "true", "fitted");
    for (name, x, y) in [
        ("m", truth.m, p.m),
        ("omega", truth.omega, p.omega),
        ("phi", truth.phi, p.phi),
        ("tc-t2", truth.tc - b, p.tc - b),
        ("B", truth.b, p.b),
        ("C", truth.c, p.c),
    ] {
        println!("{name:>6} {x:>10.4} {y:>10.4}");
    }
    println!("rms residual {:.5}, hazard b {:.4}, class {:?}", fit.residual_q, fit.b, fit.classify());
    Ok(())
}
