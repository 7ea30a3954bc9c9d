//! The log-periodic power law, its hazard rate, linear-parameter slaving and
//! bubble classification.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::data::{PriceSeries, WindowSpec};
use crate::error::ModelError;

/// Largest accepted condition number of the (column-equilibrated) normal matrix.
pub const MAX_CONDITION: f64 = 1e12;

/// Observation times (days since 1970-01-01) and log-prices of one window.
#[derive(Debug, Clone, PartialEq)]
pub struct FitData {
    pub t: Vec<f64>,
    pub y: Vec<f64>,
}

impl FitData {
    pub fn new(t: Vec<f64>, y: Vec<f64>) -> Self {
        assert_eq!(t.len(), y.len(), "times and values differ in length");
        Self { t, y }
    }

    /// From a log-scale series.
    pub fn from_series(log_series: &PriceSeries) -> Self {
        Self::new(log_series.times(), log_series.values().to_vec())
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn last_time(&self) -> Option<f64> {
        self.t.last().copied()
    }
}

/// The four nonlinear parameters searched by the optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Nonlinear {
    pub m: f64,
    pub omega: f64,
    pub phi: f64,
    pub tc: f64,
}

impl Nonlinear {
    pub fn to_array(self) -> [f64; 4] {
        [self.m, self.omega, self.phi, self.tc]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self {
            m: a[0],
            omega: a[1],
            phi: a[2],
            tc: a[3],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpplParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub m: f64,
    pub omega: f64,
    pub phi: f64,
    pub tc: f64,
}

impl LpplParams {
    pub fn nonlinear(&self) -> Nonlinear {
        Nonlinear {
            m: self.m,
            omega: self.omega,
            phi: self.phi,
            tc: self.tc,
        }
    }

    pub fn hazard_positivity(&self) -> f64 {
        hazard_positivity(self.b, self.c, self.m, self.omega)
    }
}

/// `A + B (tc-t)^m + C (tc-t)^m cos(omega ln(tc-t) - phi)`.
pub fn evaluate_lppl(p: &LpplParams, t: f64) -> Result<f64, ModelError> {
    let dt = p.tc - t;
    if !(dt > 0.0) {
        return Err(ModelError::Domain { t, tc: p.tc });
    }
    let ln_dt = dt.ln();
    let pow = (p.m * ln_dt).exp();
    Ok(p.a + pow * (p.b + p.c * (p.omega * ln_dt - p.phi).cos()))
}

/// Hazard rate `B'(tc-t)^(m-1) + C'(tc-t)^(m-1) cos(omega ln(tc-t) - phi')`.
pub fn hazard_rate(
    b_prime: f64,
    c_prime: f64,
    m: f64,
    omega: f64,
    phi_prime: f64,
    tc: f64,
    t: f64,
) -> Result<f64, ModelError> {
    let dt = tc - t;
    if !(dt > 0.0) {
        return Err(ModelError::Domain { t, tc });
    }
    let pow = dt.powf(m - 1.0);
    Ok(pow * (b_prime + c_prime * (omega * dt.ln() - phi_prime).cos()))
}

/// `b = -B m - |C| sqrt(m^2 + omega^2)`; non-negative for a positive hazard rate.
pub fn hazard_positivity(b: f64, c: f64, m: f64, omega: f64) -> f64 {
    -b * m - c.abs() * (m * m + omega * omega).sqrt()
}

/// Least-squares linear parameters for fixed nonlinear ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSolution {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Root-mean-square residual.
    pub rms: f64,
    pub sse: f64,
}

/// Solves for `(A, B, C)` by least squares on the regressors
/// `{1, (tc-t)^m, (tc-t)^m cos(omega ln(tc-t) - phi)}`.
///
/// The normal matrix is equilibrated to unit diagonal before the condition
/// check so the guard reacts to collinearity rather than column scale.
pub fn slave_linear_params(data: &FitData, nl: &Nonlinear) -> Result<LinearSolution, ModelError> {
    if data.is_empty() {
        return Err(ModelError::EmptyWindow);
    }
    let n = data.len();
    let mut f1 = Vec::with_capacity(n);
    let mut f2 = Vec::with_capacity(n);
    for &t in &data.t {
        let dt = nl.tc - t;
        if !(dt > 0.0) {
            return Err(ModelError::Domain { t, tc: nl.tc });
        }
        let ln_dt = dt.ln();
        let pow = (nl.m * ln_dt).exp();
        f1.push(pow);
        f2.push(pow * (nl.omega * ln_dt - nl.phi).cos());
    }

    let mut xtx = Matrix3::<f64>::zeros();
    let mut xty = Vector3::<f64>::zeros();
    for i in 0..n {
        let row = Vector3::new(1.0, f1[i], f2[i]);
        xtx += row * row.transpose();
        xty += row * data.y[i];
    }

    let mut scale = Vector3::zeros();
    for k in 0..3 {
        let d = xtx[(k, k)];
        if !(d > 0.0) || !d.is_finite() {
            return Err(ModelError::DegenerateBasis(f64::INFINITY));
        }
        scale[k] = 1.0 / d.sqrt();
    }
    let scaled = Matrix3::from_fn(|i, j| xtx[(i, j)] * scale[i] * scale[j]);
    let eig = SymmetricEigen::new(scaled).eigenvalues;
    let (lo, hi) = eig
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(lo, hi), &v| (lo.min(v.abs()), hi.max(v.abs())));
    let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(cond <= MAX_CONDITION) {
        return Err(ModelError::DegenerateBasis(cond));
    }
    let rhs = Vector3::from_fn(|i, _| xty[i] * scale[i]);
    let z = scaled
        .cholesky()
        .map(|ch| ch.solve(&rhs))
        .or_else(|| scaled.lu().solve(&rhs))
        .ok_or(ModelError::DegenerateBasis(cond))?;
    let (a, b, c) = (z[0] * scale[0], z[1] * scale[1], z[2] * scale[2]);

    let sse: f64 = (0..n)
        .map(|i| {
            let r = data.y[i] - (a + b * f1[i] + c * f2[i]);
            r * r
        })
        .sum();
    Ok(LinearSolution {
        a,
        b,
        c,
        rms: (sse / n as f64).sqrt(),
        sse,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BubbleClass {
    PositiveBubble,
    NegativeBubble,
    Neither,
}

/// One window's calibrated LPPL.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpplFit {
    pub window: WindowSpec,
    pub params: LpplParams,
    pub residual_q: f64,
    pub b: f64,
}

impl LpplFit {
    /// Computes the hazard-positivity value from `params`.
    pub fn new(window: WindowSpec, params: LpplParams, residual_q: f64) -> Self {
        Self {
            window,
            params,
            residual_q,
            b: params.hazard_positivity(),
        }
    }

    pub fn length_days(&self) -> i64 {
        self.window.length_days()
    }

    /// True when omega is above the cutoff used to discard high-frequency fits (20).
    pub fn exceeds_omega(&self, cutoff: f64) -> bool {
        self.params.omega > cutoff
    }

    pub fn classify(&self) -> BubbleClass {
        classify_fit(self)
    }
}

/// Negative bubble iff `B > 0` and `b < 0`; positive bubble iff `B < 0`,
/// `b >= 0` and `0 < m < 1`.
pub fn classify_fit(fit: &LpplFit) -> BubbleClass {
    let p = &fit.params;
    if p.b > 0.0 && fit.b < 0.0 {
        BubbleClass::NegativeBubble
    } else if p.b < 0.0 && fit.b >= 0.0 && p.m > 0.0 && p.m < 1.0 {
        BubbleClass::PositiveBubble
    } else {
        BubbleClass::Neither
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(a: f64, b: f64, c: f64, m: f64, omega: f64, phi: f64, tc: f64) -> LpplParams {
        LpplParams { a, b, c, m, omega, phi, tc }
    }

    fn window() -> WindowSpec {
        let d = NaiveDate::from_ymd_opt(2000, 1, 1).unwrap();
        WindowSpec { t1: d, t2: d + chrono::Duration::days(300) }
    }

    fn fit_with(b_lin: f64, m: f64, b: f64) -> LpplFit {
        LpplFit {
            window: window(),
            params: params(0.0, b_lin, 0.0, m, 6.0, 1.0, 10.0),
            residual_q: 0.0,
            b,
        }
    }

    #[test]
    fn constant_when_no_power_law() {
        let p = params(3.5, 0.0, 0.0, 0.4, 7.0, 1.0, 100.0);
        assert_eq!(evaluate_lppl(&p, 12.0).unwrap(), 3.5);
    }

    #[test]
    fn square_root_case() {
        let p = params(0.0, 1.0, 0.0, 0.5, 7.0, 1.0, 10.0);
        assert!((evaluate_lppl(&p, 6.0).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn undefined_at_and_after_tc() {
        let p = params(0.0, 1.0, 0.0, 0.5, 7.0, 1.0, 10.0);
        assert!(matches!(evaluate_lppl(&p, 10.0), Err(ModelError::Domain { .. })));
        assert!(evaluate_lppl(&p, 11.0).is_err());
        assert!(hazard_rate(1.0, 0.0, 0.5, 1.0, 0.0, 10.0, 10.0).is_err());
    }

    #[test]
    fn matches_direct_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let p = params(
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.001..0.999),
                rng.gen_range(0.01..40.0),
                rng.gen_range(0.001..std::f64::consts::TAU),
                rng.gen_range(100.0..1000.0),
            );
            let t = rng.gen_range(-500.0..99.0);
            let x = p.tc - t;
            let direct = p.a + p.b * x.powf(p.m) + p.c * x.powf(p.m) * (p.omega * x.ln() - p.phi).cos();
            let got = evaluate_lppl(&p, t).unwrap();
            assert!((got - direct).abs() <= 1e-12 * direct.abs().max(1.0), "{got} vs {direct}");
        }
    }

    #[test]
    fn phase_periodicity() {
        let p = params(1.0, -0.3, 0.05, 0.6, 9.0, 2.0, 500.0);
        let q = LpplParams { phi: p.phi + std::f64::consts::TAU, ..p };
        for t in [0.0, 100.0, 250.0, 499.0] {
            assert!((evaluate_lppl(&p, t).unwrap() - evaluate_lppl(&q, t).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn hazard_trivial_cases() {
        for t in [0.0, 5.0, 9.9] {
            assert!((hazard_rate(1.0, 0.0, 1.0, 3.0, 0.5, 10.0, t).unwrap() - 1.0).abs() < 1e-15);
            assert_eq!(hazard_rate(0.0, 0.0, 0.4, 3.0, 0.5, 10.0, t).unwrap(), 0.0);
        }
    }

    /// kappa * integral of the hazard over [t0, t] equals the LPPL increment
    /// with B = -kappa B'/m, C = -kappa C'/sqrt(m^2+w^2), phi = phi' + atan2(w, m).
    #[test]
    fn integrated_hazard_reproduces_lppl() {
        let (bp, cp, m, w, php, tc, kappa) = (0.02, 0.008, 0.45, 6.5, 0.7, 400.0, 1.3);
        let p = LpplParams {
            a: 0.0,
            b: -kappa * bp / m,
            c: -kappa * cp / (m * m + w * w).sqrt(),
            m,
            omega: w,
            phi: php + w.atan2(m),
            tc,
        };
        let t0 = 0.0;
        for &t in &[50.0, 150.0, 300.0, 390.0] {
            // composite Simpson on [t0, t]
            let n = 20_000;
            let h = (t - t0) / n as f64;
            let mut s = 0.0;
            for i in 0..=n {
                let x = t0 + i as f64 * h;
                let wgt = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                s += wgt * hazard_rate(bp, cp, m, w, php, tc, x).unwrap();
            }
            let integral = kappa * s * h / 3.0;
            let lppl_inc = evaluate_lppl(&p, t).unwrap() - evaluate_lppl(&p, t0).unwrap();
            assert!((integral - lppl_inc).abs() < 1e-3, "t={t}: {integral} vs {lppl_inc}");
        }
    }

    fn synthetic(p: &LpplParams, n: usize) -> FitData {
        let t: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let y = t.iter().map(|&x| evaluate_lppl(p, x).unwrap()).collect();
        FitData::new(t, y)
    }

    #[test]
    fn slaving_recovers_exact_linear_params() {
        let p = params(7.1, 0.02, -0.004, 0.55, 8.0, 1.7, 360.0);
        let data = synthetic(&p, 300);
        let s = slave_linear_params(&data, &p.nonlinear()).unwrap();
        assert!((s.a - p.a).abs() < 1e-9, "{}", s.a);
        assert!((s.b - p.b).abs() < 1e-9);
        assert!((s.c - p.c).abs() < 1e-9);
        assert!(s.rms < 1e-10);
    }

    #[test]
    fn slaving_constant_series() {
        let data = FitData::new((0..200).map(f64::from).collect(), vec![4.25; 200]);
        let nl = Nonlinear { m: 0.6, omega: 7.0, phi: 2.0, tc: 230.0 };
        let s = slave_linear_params(&data, &nl).unwrap();
        assert!((s.a - 4.25).abs() < 1e-9);
        assert!(s.b.abs() < 1e-9 && s.c.abs() < 1e-9);
    }

    #[test]
    fn slaving_rejects_tc_inside_window() {
        let data = FitData::new(vec![0.0, 1.0, 2.0, 3.0], vec![1.0; 4]);
        let nl = Nonlinear { m: 0.5, omega: 5.0, phi: 1.0, tc: 3.0 };
        assert!(matches!(slave_linear_params(&data, &nl), Err(ModelError::Domain { .. })));
    }

    #[test]
    fn slaving_guards_degenerate_basis() {
        // omega = 0 and phi = 0 make the oscillating column equal to the power-law column.
        let data = FitData::new((0..100).map(f64::from).collect(), (0..100).map(|i| i as f64 * 0.01).collect());
        let nl = Nonlinear { m: 0.5, omega: 0.0, phi: 0.0, tc: 120.0 };
        assert!(matches!(slave_linear_params(&data, &nl), Err(ModelError::DegenerateBasis(_))));
    }

    #[test]
    fn classification_rules() {
        assert_eq!(fit_with(1.0, 0.5, -0.5).classify(), BubbleClass::NegativeBubble);
        assert_eq!(fit_with(-1.0, 0.5, 0.2).classify(), BubbleClass::PositiveBubble);
        assert_eq!(fit_with(1.0, 0.5, 0.1).classify(), BubbleClass::Neither);
    }

    #[test]
    fn stored_b_matches_recomputation() {
        let f = LpplFit::new(window(), params(1.0, 0.3, -0.02, 0.4, 9.0, 1.0, 10.0), 0.01);
        let expect = -0.3 * 0.4 - 0.02 * (0.16f64 + 81.0).sqrt();
        assert!((f.b - expect).abs() < 1e-12);
    }
}
