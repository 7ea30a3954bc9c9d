//! Stage runner: windows → fit-all → learn → predict → evaluate / backtest → report.
//!
//! Every stage reads its inputs from, and writes its outputs to, the output
//! directory, so stages can be rerun independently.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ConfigError, PipelineConfig};
use crate::data::{day_number, generate_windows, load_price_csv, log_prices, write_windows_csv, PriceSeries, WindowSpec};
use crate::error::{DataError, EvalError, FitError, PatternError, TradingError};
use crate::evaluation::{bayes_posterior, bayes_report, error_diagram, write_bayes_csv, write_diagram_csv};
use crate::lppl::{BubbleClass, LpplFit};
use crate::optimizer::fit_series_window;
use crate::pattern::{
    informative::write_informative_csv, learn, learning_series, predict_series, AlarmMode, AlarmSeries, FitSummary,
    LearnedModel, Qualification, ScanIndex,
};
use crate::rebound::{detect_rebounds_with, ReboundSet, ReboundTimeline};
use crate::trading::{
    add_significance, generate_trades, load_risk_free_csv, score_trades, summarize, write_trades_csv, Market, RiskFree,
    StrategyReport,
};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Trading(#[from] TradingError),
    #[error("stage `{stage}` needs {missing}; run `{run_first}` first")]
    StageOrder { stage: &'static str, missing: String, run_first: &'static str },
    #[error("{path}: corrupt cache: {message}")]
    Cache { path: PathBuf, message: String },
}

impl PipelineError {
    /// Process exit code for the error's category.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Data(_) | PipelineError::Io { .. } => 3,
            PipelineError::Fit(_) | PipelineError::Cache { .. } => 4,
            PipelineError::Pattern(_) => 5,
            PipelineError::Eval(_) => 6,
            PipelineError::Trading(_) => 7,
            PipelineError::StageOrder { .. } => 8,
        }
    }
}

type Result<T> = std::result::Result<T, PipelineError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.to_path_buf(), source }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let mut w = create(path)?;
    f(&mut w).and_then(|_| w.flush()).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    write_with(path, |w| writeln!(w, "{text}"))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Cache { path: path.to_path_buf(), message: e.to_string() })
}

/// One fit-cache record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub window: WindowSpec,
    pub fit: Option<LpplFit>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowsSummary {
    pub count: usize,
    pub first: Option<WindowSpec>,
    pub last: Option<WindowSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitAllSummary {
    pub windows: usize,
    pub new_fits: usize,
    pub fitted: usize,
    pub failures: usize,
    pub negative_bubbles: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnSummary {
    pub rebounds: usize,
    pub learning_rebounds: usize,
    pub learning_fits: usize,
    pub class_i_fits: usize,
    pub informative_params: usize,
    pub features: Vec<(Qualification, usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictSummary {
    pub days: usize,
    pub blocks: usize,
    pub leakage_audit_passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluateSummary {
    pub qualification: Qualification,
    pub prediction_rebounds: usize,
    pub diagram_points: usize,
    pub best_vertical_gap: Option<f64>,
    pub bayes_rows: usize,
}

pub struct Pipeline {
    pub cfg: PipelineConfig,
}

pub fn qualification_tag(q: &Qualification) -> String {
    format!("{}_{}", q.alpha, q.beta)
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg })
    }

    pub fn out(&self, name: &str) -> PathBuf {
        self.cfg.out.join(name)
    }

    fn require(&self, stage: &'static str, name: &str, run_first: &'static str) -> Result<PathBuf> {
        let p = self.out(name);
        if p.exists() {
            Ok(p)
        } else {
            Err(PipelineError::StageOrder { stage, missing: p.display().to_string(), run_first })
        }
    }

    pub fn prices(&self) -> Result<PriceSeries> {
        Ok(load_price_csv(&self.cfg.data.prices)?)
    }

    pub fn windows(&self) -> Result<WindowsSummary> {
        let prices = self.prices()?;
        let windows = generate_windows(&prices, &self.cfg.windows);
        let path = self.out("windows.csv");
        let mut w = create(&path)?;
        write_windows_csv(&windows, &mut w).map_err(|e| PipelineError::Io { path: path.clone(), source: e.into() })?;
        w.flush().map_err(io_err(&path))?;
        info!("{} windows", windows.len());
        Ok(WindowsSummary { count: windows.len(), first: windows.first().copied(), last: windows.last().copied() })
    }

    fn read_windows(&self, stage: &'static str) -> Result<Vec<WindowSpec>> {
        let path = self.require(stage, "windows.csv", "windows")?;
        let mut rdr = csv::Reader::from_path(&path).map_err(|e| PipelineError::Cache { path: path.clone(), message: e.to_string() })?;
        rdr.deserialize()
            .collect::<std::result::Result<Vec<WindowSpec>, _>>()
            .map_err(|e| PipelineError::Cache { path, message: e.to_string() })
    }

    /// Hash of the price file, the optimizer settings and the master seed.
    fn fit_context_hash(&self) -> Result<Vec<u8>> {
        let bytes = fs::read(&self.cfg.data.prices).map_err(io_err(&self.cfg.data.prices))?;
        let mut h = Sha256::new();
        h.update(&bytes);
        h.update(serde_json::to_vec(&self.cfg.optimizer).expect("serializable"));
        h.update(self.cfg.seed.to_le_bytes());
        Ok(h.finalize().to_vec())
    }

    fn cache_key(context: &[u8], w: &WindowSpec) -> String {
        let mut h = Sha256::new();
        h.update(context);
        h.update(format!("{}|{}", w.t1, w.t2).as_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    fn read_cache(path: &Path) -> Result<HashMap<String, CacheEntry>> {
        let mut map = HashMap::new();
        if !path.exists() {
            return Ok(map);
        }
        let f = File::open(path).map_err(io_err(path))?;
        for (n, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(io_err(path))?;
            if line.trim().is_empty() {
                continue;
            }
            let e: CacheEntry = serde_json::from_str(&line).map_err(|e| PipelineError::Cache {
                path: path.to_path_buf(),
                message: format!("line {}: {e}", n + 1),
            })?;
            map.insert(e.key.clone(), e);
        }
        Ok(map)
    }

    /// Fits every window missing from the append-only cache, then rewrites
    /// the `fits.csv` table in window order.
    pub fn fit_all(&self) -> Result<FitAllSummary> {
        let windows = self.read_windows("fit-all")?;
        let prices = self.prices()?;
        let logp = log_prices(&prices);
        let context = self.fit_context_hash()?;
        let cache_path = self.out("fits.jsonl");
        let mut cache = Self::read_cache(&cache_path)?;
        let todo: Vec<(String, WindowSpec)> = windows
            .iter()
            .map(|w| (Self::cache_key(&context, w), *w))
            .filter(|(k, _)| !cache.contains_key(k))
            .collect();
        let mut opt = self.cfg.optimizer.clone();
        opt.seed = self.cfg.seed;
        let fresh: Vec<CacheEntry> = todo
            .par_iter()
            .map(|(key, w)| match fit_series_window(&logp, *w, &opt) {
                Ok(fit) => CacheEntry { key: key.clone(), window: *w, fit: Some(fit), error: None },
                Err(e) => CacheEntry { key: key.clone(), window: *w, fit: None, error: Some(e.to_string()) },
            })
            .collect();
        if !fresh.is_empty() {
            let f = OpenOptions::new().create(true).append(true).open(&cache_path).map_err(io_err(&cache_path))?;
            let mut w = BufWriter::new(f);
            for e in &fresh {
                writeln!(w, "{}", serde_json::to_string(e).expect("serializable")).map_err(io_err(&cache_path))?;
            }
            w.flush().map_err(io_err(&cache_path))?;
        }
        let new_fits = fresh.len();
        for e in fresh {
            cache.insert(e.key.clone(), e);
        }
        let entries: Vec<&CacheEntry> = windows.iter().map(|w| &cache[&Self::cache_key(&context, w)]).collect();
        for e in entries.iter().filter(|e| e.error.is_some()) {
            warn!("fit failed for {}..{}: {}", e.window.t1, e.window.t2, e.error.as_deref().unwrap_or(""));
        }
        let fits: Vec<LpplFit> = entries.iter().filter_map(|e| e.fit).collect();
        write_with(&self.out("fits.csv"), |w| {
            writeln!(w, "t1,t2,A,B,C,m,omega,phi,tc,q,b,negative_bubble")?;
            for f in &fits {
                let p = &f.params;
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{},{},{},{},{}",
                    f.window.t1,
                    f.window.t2,
                    p.a,
                    p.b,
                    p.c,
                    p.m,
                    p.omega,
                    p.phi,
                    p.tc,
                    f.residual_q,
                    f.b,
                    (f.classify() == BubbleClass::NegativeBubble) as u8
                )?;
            }
            Ok(())
        })?;
        let negative = fits.iter().filter(|f| f.classify() == BubbleClass::NegativeBubble).count();
        Ok(FitAllSummary {
            windows: windows.len(),
            new_fits,
            fitted: fits.len(),
            failures: entries.len() - fits.len(),
            negative_bubbles: negative,
        })
    }

    /// Successful fits for the current windows, in window order.
    pub fn load_fits(&self, stage: &'static str) -> Result<Vec<LpplFit>> {
        let windows = self.read_windows(stage)?;
        let path = self.require(stage, "fits.jsonl", "fit-all")?;
        let context = self.fit_context_hash()?;
        let cache = Self::read_cache(&path)?;
        let mut fits = Vec::with_capacity(windows.len());
        for w in &windows {
            match cache.get(&Self::cache_key(&context, w)) {
                Some(e) => fits.extend(e.fit),
                None => {
                    return Err(PipelineError::StageOrder {
                        stage,
                        missing: format!("a fit for window {}..{}", w.t1, w.t2),
                        run_first: "fit-all",
                    })
                }
            }
        }
        Ok(fits)
    }

    pub fn rebounds(&self, prices: &PriceSeries) -> ReboundSet {
        detect_rebounds_with(prices, &self.cfg.rebounds)
    }

    pub fn learn(&self) -> Result<LearnSummary> {
        let fits = self.load_fits("learn")?;
        let prices = self.prices()?;
        let rebounds = self.rebounds(&prices);
        write_with(&self.out("rebounds.csv"), |w| rebounds.write_csv(w))?;
        let model = learn(&fits, &rebounds, &self.cfg.learning)?;
        write_with(&self.out("informative.csv"), |w| write_informative_csv(&model.informative, w))?;
        let learning = crate::pattern::learning_subset(&fits, &self.cfg.learning);
        let index = ScanIndex::new(learning.iter().map(FitSummary::from_fit).collect::<std::result::Result<_, _>>()?);
        let last_day = day_number(model.cutoff) - 1;
        let mut features = Vec::new();
        for fs in &model.feature_sets {
            let tag = qualification_tag(&fs.qualification);
            write_with(&self.out(&format!("features_{tag}.csv")), |w| fs.write_csv(w))?;
            if model.first_scan_day <= last_day {
                let series = learning_series(&index, &model.informative, fs, model.near_days, model.first_scan_day, last_day);
                write_with(&self.out(&format!("learning_alarm_{tag}.csv")), |w| series.write_csv(w))?;
            }
            features.push((fs.qualification, fs.class_i.len(), fs.class_ii.len()));
        }
        write_json(&self.out("model.json"), &model)?;
        Ok(LearnSummary {
            rebounds: rebounds.len(),
            learning_rebounds: rebounds.before(model.cutoff).len(),
            learning_fits: model.learning_fits,
            class_i_fits: model.class_i_fits,
            informative_params: model.informative.len(),
            features,
        })
    }

    pub fn load_model(&self, stage: &'static str) -> Result<LearnedModel> {
        read_json(&self.require(stage, "model.json", "learn")?)
    }

    pub fn predict(&self) -> Result<Vec<PredictSummary>> {
        let model = self.load_model("predict")?;
        let fits = self.load_fits("predict")?;
        let summaries = fits.iter().map(FitSummary::from_fit).collect::<std::result::Result<Vec<_>, _>>()?;
        let p = &self.cfg.prediction;
        let mut out = Vec::new();
        let mut audits = Vec::new();
        for fs in &model.feature_sets {
            let (series, audit) = predict_series(
                &summaries,
                &model.informative,
                fs,
                model.cutoff,
                model.near_days,
                p.start,
                p.end,
                p.step,
            );
            let tag = qualification_tag(&fs.qualification);
            write_with(&self.out(&format!("alarm_{tag}.csv")), |w| series.write_csv(w))?;
            out.push(PredictSummary { days: series.len(), blocks: audit.blocks, leakage_audit_passed: audit.passed() });
            audits.push((fs.qualification, audit));
        }
        write_json(&self.out("leakage_audit.json"), &audits)?;
        Ok(out)
    }

    pub fn load_alarm(&self, stage: &'static str, q: &Qualification) -> Result<AlarmSeries> {
        let path = self.require(stage, &format!("alarm_{}.csv", qualification_tag(q)), "predict")?;
        let f = File::open(&path).map_err(io_err(&path))?;
        Ok(AlarmSeries::read_csv(AlarmMode::Prediction, BufReader::new(f))?)
    }

    pub fn evaluate(&self) -> Result<Vec<EvaluateSummary>> {
        let prices = self.prices()?;
        let rebounds = self.rebounds(&prices);
        let timeline = ReboundTimeline::new(&prices, &self.cfg.rebounds);
        let mut out = Vec::new();
        for q in self.cfg.qualifications() {
            let alarms = self.load_alarm("evaluate", q)?;
            let end = alarms.end().unwrap_or(self.cfg.prediction.end);
            let in_range = rebounds.between(alarms.start, end);
            if in_range.is_empty() {
                warn!("no rebounds in the prediction period; the error diagram is empty");
            }
            let points = error_diagram(&alarms, &in_range, &self.cfg.evaluation.diagram);
            let tag = qualification_tag(q);
            write_with(&self.out(&format!("error_diagram_{tag}.csv")), |w| write_diagram_csv(&points, w))?;
            let rows = bayes_report(&alarms, &timeline, prices.dates(), &self.cfg.evaluation.bayes);
            write_with(&self.out(&format!("bayes_{tag}.csv")), |w| write_bayes_csv(&rows, w))?;
            out.push(EvaluateSummary {
                qualification: *q,
                prediction_rebounds: in_range.len(),
                diagram_points: points.len(),
                best_vertical_gap: points.iter().map(|p| p.vertical_gap()).reduce(f64::max),
                bayes_rows: rows.len(),
            });
        }
        Ok(out)
    }

    fn risk_free(&self) -> Result<RiskFree> {
        match (&self.cfg.data.risk_free, self.cfg.data.risk_free_constant_percent) {
            (Some(p), _) => Ok(load_risk_free_csv(p)?),
            (None, Some(r)) => Ok(RiskFree::Constant(r)),
            (None, None) => Err(ConfigError::Invalid(
                "backtest needs data.risk_free or data.risk_free_constant_percent for excess returns".into(),
            )
            .into()),
        }
    }

    pub fn backtest(&self) -> Result<Vec<(Qualification, StrategyReport)>> {
        let prices = self.prices()?;
        let rf = self.risk_free()?;
        let p = &self.cfg.prediction;
        let mut out = Vec::new();
        for q in self.cfg.qualifications() {
            let alarms = self.load_alarm("backtest", q)?;
            let last = prices.last_date().unwrap_or(p.end);
            let alarms = alarms.between(alarms.start, last.min(p.end));
            let mut market = Market::new(&prices, &rf, alarms.start, alarms.end().unwrap_or(alarms.start))?;
            market.cost_bps = self.cfg.trading.cost_bps;
            for (k, s) in self.cfg.trading.strategies.iter().enumerate() {
                let intervals = generate_trades(&alarms, s);
                let trades = score_trades(&intervals, &market)?;
                let mut report = summarize(s, trades, market.period_days());
                let seed = self.cfg.seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(k as u64 + 1));
                add_significance(&mut report, &market, self.cfg.trading.draws, seed)?;
                let tag = format!("{}_s{}", qualification_tag(q), k + 1);
                write_with(&self.out(&format!("trades_{tag}.csv")), |w| write_trades_csv(&report.trades, w))?;
                write_json(&self.out(&format!("strategy_{tag}.json")), &report)?;
                out.push((*q, report));
            }
        }
        Ok(out)
    }

    /// Collects the headline numbers of every finished stage into `report.json`.
    pub fn report(&self) -> Result<serde_json::Value> {
        let mut r = serde_json::Map::new();
        let windows = self.read_windows("report")?;
        r.insert("windows".into(), windows.len().into());
        if let Ok(fits) = self.load_fits("report") {
            r.insert("fits".into(), fits.len().into());
            let neg = fits.iter().filter(|f| f.classify() == BubbleClass::NegativeBubble).count();
            r.insert("negative_bubble_fits".into(), neg.into());
        }
        let prices = self.prices()?;
        let rebounds = self.rebounds(&prices);
        r.insert("rebounds".into(), rebounds.dates.iter().map(|d| d.to_string()).collect::<Vec<_>>().into());
        if let Ok(model) = self.load_model("report") {
            r.insert("learning_fits".into(), model.learning_fits.into());
            r.insert("class_i_fits".into(), model.class_i_fits.into());
            r.insert("informative_params".into(), model.informative.len().into());
        }
        let mut quals = Vec::new();
        for q in self.cfg.qualifications() {
            let tag = qualification_tag(q);
            let mut e = serde_json::Map::new();
            e.insert("qualification".into(), serde_json::to_value(q).expect("serializable"));
            if let Ok(alarms) = self.load_alarm("report", q) {
                let end = alarms.end().unwrap_or(alarms.start);
                let points = error_diagram(&alarms, &rebounds.between(alarms.start, end), &self.cfg.evaluation.diagram);
                e.insert("diagram_points".into(), points.len().into());
                let nov = NaiveDate::from_ymd_opt(2008, 11, 28).unwrap();
                if alarms.get(nov).is_some() {
                    let tl = ReboundTimeline::new(&prices, &self.cfg.rebounds);
                    if let Ok(b) = bayes_posterior(&alarms, &tl.as_of(nov), nov, &self.cfg.evaluation.bayes) {
                        e.insert("posterior_2008_11_28".into(), b.posterior.into());
                    }
                }
            }
            let mut strategies = Vec::new();
            for k in 0..self.cfg.trading.strategies.len() {
                let path = self.out(&format!("strategy_{tag}_s{}.json", k + 1));
                if path.exists() {
                    let mut s: serde_json::Value = read_json(&path)?;
                    if let Some(o) = s.as_object_mut() {
                        o.remove("trades");
                    }
                    strategies.push(s);
                }
            }
            e.insert("strategies".into(), strategies.into());
            quals.push(serde_json::Value::Object(e));
        }
        r.insert("qualifications".into(), quals.into());
        let value = serde_json::Value::Object(r);
        write_json(&self.out("report.json"), &value)?;
        Ok(value)
    }
}
