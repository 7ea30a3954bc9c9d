//! Calibration of the nonlinear LPPL parameters `(m, omega, phi, tc)`.
//!
//! A tabu search over the bounded 4-D space proposes starting points, each of
//! which is refined by Levenberg-Marquardt. The linear parameters are re-slaved
//! at every evaluation, so both stages only ever see the nonlinear four.

use std::collections::{HashSet, VecDeque};
use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector, Matrix4, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{day_number, slice_window, PriceSeries, WindowSpec};
use crate::error::{FitError, ModelError};
use crate::lppl::{slave_linear_params, FitData, LpplFit, LpplParams, Nonlinear};

/// Fewest observations a window needs (more than the 7 model parameters).
pub const MIN_OBSERVATIONS: usize = 8;

/// Smallest gap kept between the last observation and `tc`, in days.
pub const TC_GAP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchBounds {
    pub m: (f64, f64),
    pub omega: (f64, f64),
    pub phi: (f64, f64),
    pub tc: (f64, f64),
}

impl SearchBounds {
    /// Standard bounds for a window `[t1, t2]` given in days since 1970-01-01.
    pub fn for_window(t1: f64, t2: f64) -> Self {
        Self {
            m: (0.001, 0.999),
            omega: (0.01, 40.0),
            phi: (0.001, TAU),
            tc: (t2, t2 + 0.375 * (t2 - t1)),
        }
    }

    pub fn for_spec(w: &WindowSpec) -> Self {
        Self::for_window(day_number(w.t1) as f64, day_number(w.t2) as f64)
    }

    /// Degenerate bounds containing one point.
    pub fn point(nl: Nonlinear) -> Self {
        Self {
            m: (nl.m, nl.m),
            omega: (nl.omega, nl.omega),
            phi: (nl.phi, nl.phi),
            tc: (nl.tc, nl.tc),
        }
    }

    pub fn lower(&self) -> [f64; 4] {
        [self.m.0, self.omega.0, self.phi.0, self.tc.0]
    }

    pub fn upper(&self) -> [f64; 4] {
        [self.m.1, self.omega.1, self.phi.1, self.tc.1]
    }

    pub fn range(&self) -> [f64; 4] {
        let (lo, hi) = (self.lower(), self.upper());
        [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2], hi[3] - lo[3]]
    }

    pub fn contains(&self, nl: &Nonlinear) -> bool {
        let (lo, hi) = (self.lower(), self.upper());
        nl.to_array()
            .iter()
            .enumerate()
            .all(|(k, &v)| v >= lo[k] && v <= hi[k])
    }

    /// Clamps to the box, except that a phase range spanning a full period
    /// wraps instead (the model is 2pi-periodic in phi).
    pub fn project(&self, x: [f64; 4]) -> [f64; 4] {
        let (lo, hi) = (self.lower(), self.upper());
        let mut out = x;
        for k in 0..4 {
            out[k] = x[k].clamp(lo[k], hi[k]);
        }
        if self.phi_wraps() {
            out[2] = wrap_phase(x[2], self.phi.0, self.phi.1);
        }
        out
    }

    fn phi_wraps(&self) -> bool {
        self.phi.1 - self.phi.0 >= TAU - 0.01
    }

    /// Raises the `tc` floor so the model is defined at `last_time`.
    pub fn clamp_to_data(mut self, last_time: f64) -> Self {
        let floor = last_time + TC_GAP;
        if self.tc.0 < floor {
            self.tc.0 = floor;
        }
        if self.tc.1 < self.tc.0 {
            self.tc.1 = self.tc.0;
        }
        self
    }

    fn validate(&self) -> Result<(), FitError> {
        let (lo, hi) = (self.lower(), self.upper());
        if (0..4).any(|k| !(lo[k] <= hi[k]) || !lo[k].is_finite() || !hi[k].is_finite()) {
            return Err(FitError::InvalidConfig("search bounds must satisfy lower <= upper".into()));
        }
        Ok(())
    }
}

/// Tabu and Levenberg-Marquardt settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub tabu_iterations: usize,
    pub tabu_neighbors: usize,
    pub tabu_list_size: usize,
    /// Uniform samples drawn before the tabu walk starts.
    pub initial_samples: usize,
    /// Gaussian proposal scale as a fraction of each bound range.
    pub step_fraction: f64,
    /// Cells per axis of the (m, omega, tc) tabu grid.
    pub grid_cells: usize,
    /// Iterations without improvement before jumping to a fresh random point.
    pub diversify_after: usize,
    pub lm_max_iterations: usize,
    pub lm_tolerance: f64,
    /// Forward-difference step as a fraction of each bound range.
    pub fd_step: f64,
    pub seed: u64,
    pub restarts: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            tabu_iterations: 60,
            tabu_neighbors: 20,
            tabu_list_size: 50,
            initial_samples: 200,
            step_fraction: 0.05,
            grid_cells: 32,
            diversify_after: 15,
            lm_max_iterations: 100,
            lm_tolerance: 1e-8,
            fd_step: 1e-6,
            seed: 0,
            restarts: 4,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<(), FitError> {
        let counts = [
            self.tabu_iterations,
            self.tabu_neighbors,
            self.tabu_list_size,
            self.grid_cells,
            self.lm_max_iterations,
            self.restarts,
        ];
        if counts.contains(&0) {
            return Err(FitError::InvalidConfig("all counts must be at least 1".into()));
        }
        if !(self.lm_tolerance > 0.0) || !(self.step_fraction > 0.0) || !(self.fd_step > 0.0) {
            return Err(FitError::InvalidConfig("tolerances and step sizes must be positive".into()));
        }
        Ok(())
    }

    /// Same settings with the seed replaced by one derived for `window`.
    pub fn for_window(&self, window: &WindowSpec) -> Self {
        let mut cfg = self.clone();
        cfg.seed = window_seed(self.seed, window);
        cfg
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-window seed, independent of the order windows are processed in.
pub fn window_seed(master: u64, window: &WindowSpec) -> u64 {
    let a = day_number(window.t1) as u64;
    let b = day_number(window.t2) as u64;
    splitmix64(splitmix64(master ^ splitmix64(a)) ^ b.rotate_left(32))
}

/// Sum of squared log-price residuals with slaved `(A, B, C)`.
pub fn objective(data: &FitData, nl: &Nonlinear) -> Result<f64, ModelError> {
    slave_linear_params(data, nl).map(|s| s.sse)
}

fn residuals(data: &FitData, x: [f64; 4]) -> Result<DVector<f64>, ModelError> {
    let nl = Nonlinear::from_array(x);
    let s = slave_linear_params(data, &nl)?;
    let p = LpplParams { a: s.a, b: s.b, c: s.c, m: nl.m, omega: nl.omega, phi: nl.phi, tc: nl.tc };
    Ok(DVector::from_iterator(
        data.len(),
        data.t.iter().zip(&data.y).map(|(&t, &y)| {
            let dt = p.tc - t;
            let ln_dt = dt.ln();
            let pow = (p.m * ln_dt).exp();
            y - (p.a + pow * (p.b + p.c * (p.omega * ln_dt - p.phi).cos()))
        }),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub nonlinear: Nonlinear,
    pub objective: f64,
}

type Cell = (u16, u16, u16);

struct Walker<'a> {
    data: &'a FitData,
    bounds: SearchBounds,
    cfg: &'a OptimizerConfig,
    rng: ChaCha8Rng,
}

impl Walker<'_> {
    fn cell(&self, x: &[f64; 4]) -> Cell {
        let (lo, range) = (self.bounds.lower(), self.bounds.range());
        let cells = self.cfg.grid_cells;
        let bin = |k: usize| -> u16 {
            if range[k] <= 0.0 {
                return 0;
            }
            let f = ((x[k] - lo[k]) / range[k] * cells as f64).floor() as i64;
            f.clamp(0, cells as i64 - 1) as u16
        };
        (bin(0), bin(1), bin(3))
    }

    fn uniform(&mut self) -> [f64; 4] {
        let (lo, range) = (self.bounds.lower(), self.bounds.range());
        let mut x = [0.0; 4];
        for k in 0..4 {
            x[k] = lo[k] + range[k] * self.rng.gen::<f64>();
        }
        x
    }

    fn neighbor(&mut self, x: &[f64; 4]) -> [f64; 4] {
        let (lo, hi, range) = (self.bounds.lower(), self.bounds.upper(), self.bounds.range());
        let mut y = *x;
        let wraps = self.bounds.phi_wraps();
        for k in 0..4 {
            let z: f64 = self.rng.sample(StandardNormal);
            let v = x[k] + z * self.cfg.step_fraction * range[k];
            y[k] = if k == 2 && wraps { wrap_phase(v, lo[k], hi[k]) } else { reflect(v, lo[k], hi[k]) };
        }
        y
    }

    fn eval(&self, x: &[f64; 4]) -> Option<f64> {
        objective(self.data, &Nonlinear::from_array(*x))
            .ok()
            .filter(|v| v.is_finite())
    }
}

/// Maps `v` into `[lo, hi]` modulo 2pi; the sliver above `hi` is clamped.
fn wrap_phase(v: f64, lo: f64, hi: f64) -> f64 {
    (lo + (v - lo).rem_euclid(TAU)).min(hi)
}

fn reflect(v: f64, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return lo;
    }
    let w = hi - lo;
    let mut u = (v - lo).rem_euclid(2.0 * w);
    if u > w {
        u = 2.0 * w - u;
    }
    lo + u
}

/// Best-per-cell pool of the `cap` lowest objectives seen.
struct Pool {
    cap: usize,
    items: Vec<(Cell, Candidate)>,
}

impl Pool {
    fn offer(&mut self, cell: Cell, cand: Candidate) {
        if let Some(slot) = self.items.iter_mut().find(|(c, _)| *c == cell) {
            if cand.objective < slot.1.objective {
                slot.1 = cand;
            }
        } else {
            self.items.push((cell, cand));
        }
        self.items
            .sort_by(|a, b| a.1.objective.total_cmp(&b.1.objective));
        self.items.truncate(self.cap);
    }
}

/// Tabu search over the nonlinear parameters.
///
/// Returns up to `cfg.restarts` candidates from distinct `(m, omega, tc)`
/// cells, best first. Deterministic for a given `cfg.seed`.
pub fn tabu_search(
    data: &FitData,
    bounds: &SearchBounds,
    cfg: &OptimizerConfig,
) -> Result<Vec<Candidate>, FitError> {
    cfg.validate()?;
    bounds.validate()?;
    if data.len() < MIN_OBSERVATIONS {
        return Err(FitError::InsufficientData { needed: MIN_OBSERVATIONS, found: data.len() });
    }
    let mut w = Walker {
        data,
        bounds: *bounds,
        cfg,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
    };
    let mut pool = Pool { cap: cfg.restarts, items: Vec::new() };

    let mut current: Option<([f64; 4], f64)> = None;
    for _ in 0..cfg.initial_samples.max(1) {
        let x = w.uniform();
        if let Some(v) = w.eval(&x) {
            pool.offer(w.cell(&x), Candidate { nonlinear: Nonlinear::from_array(x), objective: v });
            if current.is_none_or(|(_, cv)| v < cv) {
                current = Some((x, v));
            }
        }
    }
    let Some(mut current) = current else {
        return Ok(Vec::new());
    };
    let mut best = current.1;
    let mut tabu: VecDeque<Cell> = VecDeque::with_capacity(cfg.tabu_list_size + 1);
    let mut tabu_set: HashSet<Cell> = HashSet::new();
    let mut stale = 0;

    for _ in 0..cfg.tabu_iterations {
        let mut chosen: Option<([f64; 4], f64)> = None;
        for _ in 0..cfg.tabu_neighbors {
            let x = w.neighbor(&current.0);
            let Some(v) = w.eval(&x) else { continue };
            let cell = w.cell(&x);
            pool.offer(cell, Candidate { nonlinear: Nonlinear::from_array(x), objective: v });
            let allowed = !tabu_set.contains(&cell) || v < best;
            if allowed && chosen.is_none_or(|(_, cv)| v < cv) {
                chosen = Some((x, v));
            }
        }
        let improved = chosen.is_some_and(|(_, v)| v < best);
        current = match chosen {
            Some(c) => c,
            None => {
                let x = w.uniform();
                match w.eval(&x) {
                    Some(v) => (x, v),
                    None => current,
                }
            }
        };
        let cell = w.cell(&current.0);
        if tabu_set.insert(cell) {
            tabu.push_back(cell);
            if tabu.len() > cfg.tabu_list_size {
                if let Some(old) = tabu.pop_front() {
                    tabu_set.remove(&old);
                }
            }
        }
        if improved {
            best = current.1;
            stale = 0;
        } else {
            stale += 1;
            if cfg.diversify_after > 0 && stale >= cfg.diversify_after {
                stale = 0;
                let mut fresh: Option<([f64; 4], f64)> = None;
                for _ in 0..cfg.tabu_neighbors {
                    let x = w.uniform();
                    if let Some(v) = w.eval(&x) {
                        if fresh.is_none_or(|(_, fv)| v < fv) {
                            fresh = Some((x, v));
                        }
                    }
                }
                if let Some(f) = fresh {
                    current = f;
                }
            }
        }
    }
    Ok(pool.items.into_iter().map(|(_, c)| c).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmResult {
    pub nonlinear: Nonlinear,
    pub objective: f64,
    pub iterations: usize,
    /// Objective after the start and after every accepted step.
    pub trace: Vec<f64>,
}

/// Levenberg-Marquardt refinement with forward-difference Jacobian and
/// projection onto the bounds after every step.
pub fn lm_refine(
    data: &FitData,
    init: Nonlinear,
    bounds: &SearchBounds,
    cfg: &OptimizerConfig,
) -> Result<LmResult, FitError> {
    cfg.validate()?;
    bounds.validate()?;
    if data.len() < MIN_OBSERVATIONS {
        return Err(FitError::InsufficientData { needed: MIN_OBSERVATIONS, found: data.len() });
    }
    let range = bounds.range();
    let upper = bounds.upper();
    let mut x = bounds.project(init.to_array());
    let mut r = residuals(data, x)?;
    let mut f = r.norm_squared();
    if !f.is_finite() {
        return Err(FitError::NumericFailure { last_good: x });
    }
    let mut trace = vec![f];
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let n = data.len();

    'outer: while iterations < cfg.lm_max_iterations {
        iterations += 1;
        let mut jac = DMatrix::<f64>::zeros(n, 4);
        for k in 0..4 {
            let h = cfg.fd_step * range[k];
            if h <= 0.0 {
                continue;
            }
            let mut xp = x;
            let step = if x[k] + h <= upper[k] { h } else { -h };
            xp[k] += step;
            let rp = match residuals(data, xp) {
                Ok(v) => v,
                Err(_) => continue,
            };
            let col = (rp - &r) / step;
            if col.iter().any(|v| !v.is_finite()) {
                return Err(FitError::NumericFailure { last_good: x });
            }
            jac.set_column(k, &col);
        }
        let jt = jac.transpose();
        let h4: Matrix4<f64> = (&jt * &jac).fixed_view::<4, 4>(0, 0).into_owned();
        let g4: Vector4<f64> = (&jt * &r).fixed_view::<4, 1>(0, 0).into_owned();
        if g4.iter().all(|v| *v == 0.0) {
            break;
        }
        loop {
            let mut a = h4;
            for k in 0..4 {
                a[(k, k)] += lambda * h4[(k, k)].max(1e-12);
            }
            // J = dr/dx with r = y - model: solve (J'J + lambda D) d = -J'r
            let delta = match a.lu().solve(&(-g4)) {
                Some(d) => d,
                None => {
                    lambda *= 10.0;
                    if lambda > 1e12 {
                        break 'outer;
                    }
                    continue;
                }
            };
            let mut xn = x;
            for k in 0..4 {
                xn[k] += delta[k];
            }
            let xn = bounds.project(xn);
            let trial = residuals(data, xn).ok().map(|rn| {
                let fv = rn.norm_squared();
                (rn, fv)
            });
            match trial {
                Some((rn, fv)) if fv.is_finite() && fv < f => {
                    let rel = (f - fv) / f.max(f64::MIN_POSITIVE);
                    x = xn;
                    r = rn;
                    f = fv;
                    trace.push(f);
                    lambda = (lambda / 10.0).max(1e-12);
                    if rel < cfg.lm_tolerance {
                        break 'outer;
                    }
                    break;
                }
                _ => {
                    lambda *= 10.0;
                    if lambda > 1e12 {
                        break 'outer;
                    }
                }
            }
        }
    }
    Ok(LmResult {
        nonlinear: Nonlinear::from_array(x),
        objective: f,
        iterations,
        trace,
    })
}

/// Tabu search followed by refinement of every candidate; keeps the best.
pub fn fit_window(
    data: &FitData,
    window: WindowSpec,
    bounds: &SearchBounds,
    cfg: &OptimizerConfig,
) -> Result<LpplFit, FitError> {
    let last = data.last_time().ok_or(FitError::InsufficientData {
        needed: MIN_OBSERVATIONS,
        found: 0,
    })?;
    let bounds = bounds.clamp_to_data(last);
    let candidates = tabu_search(data, &bounds, cfg)?;
    let mut best: Option<LmResult> = None;
    for cand in candidates {
        let refined = match lm_refine(data, cand.nonlinear, &bounds, cfg) {
            Ok(r) => r,
            Err(FitError::NumericFailure { last_good }) => match objective(data, &Nonlinear::from_array(last_good)) {
                Ok(v) if v.is_finite() => LmResult {
                    nonlinear: Nonlinear::from_array(last_good),
                    objective: v,
                    iterations: 0,
                    trace: vec![v],
                },
                _ => continue,
            },
            Err(_) => continue,
        };
        if best.as_ref().is_none_or(|b| refined.objective < b.objective) {
            best = Some(refined);
        }
    }
    let best = best.ok_or(FitError::AllCandidatesFailed(window))?;
    let nl = best.nonlinear;
    let lin = slave_linear_params(data, &nl)?;
    let params = LpplParams { a: lin.a, b: lin.b, c: lin.c, m: nl.m, omega: nl.omega, phi: nl.phi, tc: nl.tc };
    Ok(LpplFit::new(window, params, lin.rms))
}

/// Slices `window` out of a log-price series and fits it with a per-window seed.
pub fn fit_series_window(
    log_series: &PriceSeries,
    window: WindowSpec,
    cfg: &OptimizerConfig,
) -> Result<LpplFit, FitError> {
    let slice = slice_window(log_series, &window).map_err(|_| FitError::InsufficientData {
        needed: MIN_OBSERVATIONS,
        found: 0,
    })?;
    let data = FitData::from_series(&slice);
    fit_window(&data, window, &SearchBounds::for_spec(&window), &cfg.for_window(&window))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lppl::evaluate_lppl;

    fn synthetic(p: &LpplParams, n: usize) -> FitData {
        let t: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let y = t.iter().map(|&x| evaluate_lppl(p, x).unwrap()).collect();
        FitData::new(t, y)
    }

    fn truth() -> LpplParams {
        LpplParams { a: 5.0, b: 0.03, c: 0.004, m: 0.5, omega: 8.0, phi: 2.0, tc: 340.0 }
    }

    #[test]
    fn objective_zero_at_truth_and_matches_rms() {
        let p = truth();
        let data = synthetic(&p, 300);
        assert!(objective(&data, &p.nonlinear()).unwrap() < 1e-18);
        let nl = Nonlinear { m: 0.3, omega: 5.0, phi: 1.0, tc: 330.0 };
        let sse = objective(&data, &nl).unwrap();
        let rms = slave_linear_params(&data, &nl).unwrap().rms;
        assert!(sse >= 0.0);
        assert!((sse - 300.0 * rms * rms).abs() < 1e-9);
    }

    #[test]
    fn too_few_observations() {
        let data = FitData::new((0..7).map(f64::from).collect(), vec![1.0; 7]);
        let b = SearchBounds::for_window(0.0, 6.0).clamp_to_data(6.0);
        assert_eq!(
            tabu_search(&data, &b, &OptimizerConfig::default()),
            Err(FitError::InsufficientData { needed: 8, found: 7 })
        );
    }

    #[test]
    fn collapsed_bounds_return_the_point() {
        let p = truth();
        let data = synthetic(&p, 120);
        let b = SearchBounds::point(p.nonlinear());
        let c = tabu_search(&data, &b, &OptimizerConfig::default()).unwrap();
        assert!(!c.is_empty());
        assert!(c.iter().all(|c| c.nonlinear == p.nonlinear()));
    }

    #[test]
    fn tabu_is_deterministic() {
        let data = synthetic(&truth(), 200);
        let b = SearchBounds::for_window(0.0, 199.0).clamp_to_data(199.0);
        let cfg = OptimizerConfig { seed: 42, ..Default::default() };
        let a = tabu_search(&data, &b, &cfg).unwrap();
        let c = tabu_search(&data, &b, &cfg).unwrap();
        assert_eq!(a, c);
        assert!(a.iter().all(|c| b.contains(&c.nonlinear)));
        assert!(a.windows(2).all(|w| w[0].objective <= w[1].objective));
    }

    #[test]
    fn lm_stays_at_optimum() {
        let p = truth();
        let data = synthetic(&p, 300);
        let b = SearchBounds::for_window(0.0, 299.0).clamp_to_data(299.0);
        let r = lm_refine(&data, p.nonlinear(), &b, &OptimizerConfig::default()).unwrap();
        let f0 = objective(&data, &p.nonlinear()).unwrap();
        assert!(r.objective <= f0);
        assert!((r.nonlinear.m - p.m).abs() < 1e-6);
    }

    #[test]
    fn lm_recovers_from_five_percent_perturbation() {
        let p = truth();
        let data = synthetic(&p, 300);
        let b = SearchBounds::for_window(0.0, 299.0).clamp_to_data(299.0);
        let init = Nonlinear { m: p.m * 1.05, omega: p.omega * 1.05, phi: p.phi * 1.05, tc: p.tc * 1.05 };
        let cfg = OptimizerConfig { lm_max_iterations: 500, lm_tolerance: 1e-14, ..Default::default() };
        let r = lm_refine(&data, init, &b, &cfg).unwrap();
        assert!((r.nonlinear.m - p.m).abs() < 1e-3, "m = {} {:?} it={} f={}", r.nonlinear.m, r.nonlinear, r.iterations, r.objective);
        assert!((r.nonlinear.tc - p.tc).abs() < 0.5, "tc = {}", r.nonlinear.tc);
    }

    #[test]
    fn reflect_keeps_values_inside() {
        assert_eq!(reflect(1.5, 0.0, 1.0), 0.5);
        assert_eq!(reflect(-0.25, 0.0, 1.0), 0.25);
        assert_eq!(reflect(3.0, 2.0, 2.0), 2.0);
    }
}
