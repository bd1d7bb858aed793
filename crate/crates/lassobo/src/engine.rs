//! The optimization loop and baselines.
//!
//! One run consumes a single seeded RNG stream in a fixed order: the
//! initialization points, then per iteration a fit seed, (dropout only) the
//! random coordinate selection, the imputation draws, the acquisition start
//! draws, and finally any observation-noise draw. This makes whole traces
//! reproducible bitwise from the run seed.
//!
//! Baselines share the machinery: random search skips modeling entirely;
//! vanilla UCB fits with the L1 rate forced to zero and optimizes the full
//! cube; dropout selects a random coordinate subset each iteration and imputes
//! the rest from the incumbent only.

use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;

use crate::acquisition::{beta_t, maximize_over_space, AcqConfig};
use crate::gp::{fit_posterior, Dataset, KernelHyperparams};
use crate::lasso::{fit_hyperparams, FitConfig};
use crate::search_space::{build_search_space, build_search_space_with};
use crate::selection::ImportanceState;
use crate::{Error, Result, RunRng};

/// Floor inside the log-regret transform so exact optimum hits stay finite.
pub const REGRET_FLOOR: f64 = 1e-12;

/// A black-box objective on the unit cube. Noisy objectives draw from the
/// caller's RNG so runs stay deterministic.
pub trait Objective {
    fn dim(&self) -> usize;
    fn evaluate(&self, x: &[f64], rng: &mut RunRng) -> Result<f64>;
    /// Known maximum, when available, for regret reporting.
    fn optimum_value(&self) -> Option<f64> {
        None
    }
}

/// A closure-backed objective, mostly for tests.
pub struct FnObjective<F: Fn(&[f64]) -> f64> {
    pub dim: usize,
    pub f: F,
    pub f_max: Option<f64>,
}

impl<F: Fn(&[f64]) -> f64> Objective for FnObjective<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn evaluate(&self, x: &[f64], _rng: &mut RunRng) -> Result<f64> {
        Ok((self.f)(x))
    }

    fn optimum_value(&self) -> Option<f64> {
        self.f_max
    }
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Method {
    LassoBo,
    RandomSearch,
    VanillaBo,
    DropoutBo { d: usize },
}

impl Method {
    /// Short name used in file names and summary rows.
    pub fn name(&self) -> String {
        match self {
            Method::LassoBo => "lassobo".into(),
            Method::RandomSearch => "random".into(),
            Method::VanillaBo => "vanilla".into(),
            Method::DropoutBo { d } => format!("dropout{d}"),
        }
    }

    /// Parse `lassobo`, `random`, `vanilla`, or `dropout<d>`.
    pub fn parse(s: &str) -> Result<Method> {
        match s {
            "lassobo" => Ok(Method::LassoBo),
            "random" => Ok(Method::RandomSearch),
            "vanilla" => Ok(Method::VanillaBo),
            _ => {
                if let Some(rest) = s.strip_prefix("dropout") {
                    let d: usize = rest
                        .parse()
                        .map_err(|_| Error::Config(format!("bad dropout dimension in '{s}'")))?;
                    Ok(Method::DropoutBo { d })
                } else {
                    Err(Error::Config(format!(
                        "unknown method '{s}' (expected lassobo|random|vanilla|dropout<d>)"
                    )))
                }
            }
        }
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RunConfig {
    pub method: Method,
    /// Optimization iterations after initialization.
    pub budget_t: usize,
    /// Uniform-random initialization points.
    pub n_init: usize,
    pub fit: FitConfig,
    pub acq: AcqConfig,
    /// Root order `n` of the `M_t = ceil(t^{1/n})` schedule.
    pub schedule_n: u32,
    /// Window size for the rho median classifier.
    pub window_w: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            method: Method::LassoBo,
            budget_t: 300,
            n_init: 30,
            fit: FitConfig::default(),
            acq: AcqConfig::default(),
            schedule_n: 3,
            window_w: 1,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.n_init < 2 {
            return Err(Error::Config("n_init must be >= 2".into()));
        }
        if self.schedule_n < 2 {
            return Err(Error::Config("schedule_n must be >= 2".into()));
        }
        if self.window_w == 0 {
            return Err(Error::Config("window_w must be >= 1".into()));
        }
        if let Method::DropoutBo { d } = self.method {
            if d == 0 || d > dim {
                return Err(Error::Config(format!("dropout d must lie in [1, {dim}]")));
            }
        }
        self.fit.validate()?;
        self.acq.validate()
    }
}

/// One objective evaluation with its bookkeeping. Initialization rows carry
/// `d_t = 0` and an empty important set.
#[derive(Debug, Clone, serde::Serialize)]
pub struct IterationRecord {
    /// 1-based evaluation index across initialization and iterations.
    pub iter: usize,
    pub x: Vec<f64>,
    pub y: f64,
    pub best_y: f64,
    /// `f_max - best_y`; NaN when the optimum is unknown.
    pub simple_regret: f64,
    /// `ln(max(simple_regret, 1e-12))`; NaN when the optimum is unknown.
    pub log_regret: f64,
    pub d_t: usize,
    pub important: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<Vec<f64>>,
    pub fit_ms: f64,
    pub acq_ms: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct RunResult {
    pub method: Method,
    pub seed: u64,
    pub records: Vec<IterationRecord>,
    pub best_x: Vec<f64>,
    pub best_y: f64,
    pub total_wall_ms: f64,
    /// Set when an objective evaluation failed; the trace up to that point is
    /// preserved.
    pub aborted: Option<String>,
}

impl RunResult {
    pub fn final_simple_regret(&self) -> Option<f64> {
        self.records.last().map(|r| r.simple_regret)
    }
}

/// Run the full variable-selection optimizer (the method must be `LassoBo`).
pub fn run_lassobo(objective: &dyn Objective, cfg: &RunConfig) -> Result<RunResult> {
    if cfg.method != Method::LassoBo {
        return Err(Error::Config("run_lassobo requires method = lassobo".into()));
    }
    run(objective, cfg)
}

/// Run one of the comparison baselines (any method except `LassoBo`).
pub fn run_baseline(objective: &dyn Objective, cfg: &RunConfig) -> Result<RunResult> {
    if cfg.method == Method::LassoBo {
        return Err(Error::Config("run_baseline requires a baseline method".into()));
    }
    run(objective, cfg)
}

/// Run any configured method. Deterministic given `cfg.seed`; an objective
/// failure aborts the loop and returns the partial trace with `aborted` set.
pub fn run(objective: &dyn Objective, cfg: &RunConfig) -> Result<RunResult> {
    let dim = objective.dim();
    cfg.validate(dim)?;
    let wall_start = Instant::now();
    let f_max = objective.optimum_value();
    let mut rng = RunRng::seed_from_u64(cfg.seed);
    let mut data = Dataset::new(dim);
    let mut records: Vec<IterationRecord> = Vec::with_capacity(cfg.n_init + cfg.budget_t);
    let mut aborted = None;

    let regrets = |best_y: f64| -> (f64, f64) {
        match f_max {
            Some(fm) => {
                let simple = (fm - best_y).max(0.0);
                (simple, simple.max(REGRET_FLOOR).ln())
            }
            None => (f64::NAN, f64::NAN),
        }
    };

    'outer: {
        for i in 0..cfg.n_init {
            let x: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
            let y = match objective.evaluate(&x, &mut rng) {
                Ok(y) => y,
                Err(e) => {
                    aborted = Some(e.to_string());
                    break 'outer;
                }
            };
            data.push(&x, y)?;
            let (simple, log) = regrets(data.best_output());
            records.push(IterationRecord {
                iter: i + 1,
                x,
                y,
                best_y: data.best_output(),
                simple_regret: simple,
                log_regret: log,
                d_t: 0,
                important: Vec::new(),
                rho: None,
                fit_ms: 0.0,
                acq_ms: 0.0,
            });
        }

        let mut importance = ImportanceState::new(cfg.window_w)?;
        let mut warm: Option<KernelHyperparams> = None;

        for t in 1..=cfg.budget_t as u64 {
            let fit_seed = rng.gen::<u64>();
            let mut fit_ms = 0.0;
            let mut acq_ms = 0.0;
            let mut d_t = 0usize;
            let mut important: Vec<usize> = Vec::new();
            let mut rho: Option<Vec<f64>> = None;

            let x = match &cfg.method {
                Method::RandomSearch => (0..dim).map(|_| rng.gen::<f64>()).collect::<Vec<f64>>(),
                method => {
                    let fit_cfg = FitConfig {
                        seed: fit_seed,
                        lambda: if *method == Method::VanillaBo { 0.0 } else { cfg.fit.lambda },
                        ..cfg.fit.clone()
                    };
                    let fit_start = Instant::now();
                    let (params, _) = fit_hyperparams(&data, &fit_cfg, warm.as_ref())?;
                    fit_ms = fit_start.elapsed().as_secs_f64() * 1e3;

                    important = match method {
                        Method::LassoBo => importance.push_and_classify(&params.rho)?.0,
                        Method::VanillaBo => (0..dim).collect(),
                        Method::DropoutBo { d } => {
                            let mut idx =
                                rand::seq::index::sample(&mut rng, dim, *d).into_vec();
                            idx.sort_unstable();
                            idx
                        }
                        Method::RandomSearch => unreachable!(),
                    };
                    d_t = important.len();
                    rho = Some(params.rho.clone());

                    let model = fit_posterior(&data, &params)?;
                    warm = Some(params);
                    let spec = match method {
                        Method::LassoBo => build_search_space(
                            &important,
                            data.best_input(),
                            t,
                            cfg.schedule_n,
                            &mut rng,
                        )?,
                        // full cube / incumbent-only imputation
                        _ => build_search_space_with(&important, data.best_input(), 0, &mut rng)?,
                    };
                    let beta = beta_t(t, &cfg.acq);
                    let acq_start = Instant::now();
                    let (x, _) = maximize_over_space(&model, &spec, beta, &cfg.acq, &mut rng)?;
                    acq_ms = acq_start.elapsed().as_secs_f64() * 1e3;
                    x
                }
            };

            let y = match objective.evaluate(&x, &mut rng) {
                Ok(y) => y,
                Err(e) => {
                    aborted = Some(e.to_string());
                    break 'outer;
                }
            };
            data.push(&x, y)?;
            let (simple, log) = regrets(data.best_output());
            records.push(IterationRecord {
                iter: cfg.n_init + t as usize,
                x,
                y,
                best_y: data.best_output(),
                simple_regret: simple,
                log_regret: log,
                d_t,
                important,
                rho,
                fit_ms,
                acq_ms,
            });
        }
    }

    let (best_x, best_y) = if data.is_empty() {
        (Vec::new(), f64::NAN)
    } else {
        (data.best_input().to_vec(), data.best_output())
    };
    Ok(RunResult {
        method: cfg.method.clone(),
        seed: cfg.seed,
        records,
        best_x,
        best_y,
        total_wall_ms: wall_start.elapsed().as_secs_f64() * 1e3,
        aborted,
    })
}

// ---------------------------------------------------------------------------
// Repeated runs
// ---------------------------------------------------------------------------

/// Per-iteration aggregate over repeated runs.
#[derive(Debug, Clone, serde::Serialize)]
pub struct Summary {
    pub iters: Vec<usize>,
    pub median_log_regret: Vec<f64>,
    pub q25_log_regret: Vec<f64>,
    pub q75_log_regret: Vec<f64>,
}

#[derive(Debug)]
pub struct RepeatOutcome {
    pub runs: Vec<RunResult>,
    pub summary: Summary,
}

/// Execute `n_repeats` runs with seeds `cfg.seed + 0 .. cfg.seed + n - 1` and
/// aggregate the aligned log-regret traces (aborted runs are excluded from
/// the summary).
pub fn repeat_runs(
    objective: &dyn Objective,
    cfg: &RunConfig,
    n_repeats: usize,
) -> Result<RepeatOutcome> {
    if n_repeats == 0 {
        return Err(Error::Config("n_repeats must be >= 1".into()));
    }
    let mut runs = Vec::with_capacity(n_repeats);
    for r in 0..n_repeats {
        let run_cfg = RunConfig { seed: cfg.seed + r as u64, ..cfg.clone() };
        runs.push(run(objective, &run_cfg)?);
    }
    let summary = summarize(&runs, cfg.n_init + cfg.budget_t);
    Ok(RepeatOutcome { runs, summary })
}

/// Median and interquartile band of log regret at each evaluation index.
pub fn summarize(runs: &[RunResult], expected_len: usize) -> Summary {
    let complete: Vec<&RunResult> =
        runs.iter().filter(|r| r.aborted.is_none() && r.records.len() == expected_len).collect();
    let mut summary = Summary {
        iters: (1..=expected_len).collect(),
        median_log_regret: Vec::with_capacity(expected_len),
        q25_log_regret: Vec::with_capacity(expected_len),
        q75_log_regret: Vec::with_capacity(expected_len),
    };
    for i in 0..expected_len {
        let mut vals: Vec<f64> =
            complete.iter().map(|r| r.records[i].log_regret).filter(|v| v.is_finite()).collect();
        vals.sort_unstable_by(|a, b| a.total_cmp(b));
        summary.median_log_regret.push(quantile_sorted(&vals, 0.5));
        summary.q25_log_regret.push(quantile_sorted(&vals, 0.25));
        summary.q75_log_regret.push(quantile_sorted(&vals, 0.75));
    }
    summary
}

/// Linear-interpolation quantile of pre-sorted values (NaN when empty).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            let frac = pos - lo as f64;
            sorted[lo] + (sorted[hi] - sorted[lo]) * frac
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::benchmark_by_id;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn quick_cfg(method: Method) -> RunConfig {
        RunConfig {
            method,
            budget_t: 4,
            n_init: 4,
            fit: FitConfig {
                n_init_samples: 4,
                n_refine: 2,
                adam_steps: 10,
                ..FitConfig::default()
            },
            acq: AcqConfig { restarts_total: 12, refine_steps: 8, n_keep: 2, ..AcqConfig::default() },
            schedule_n: 3,
            window_w: 1,
            seed: 5,
        }
    }

    struct CountingObjective {
        dim: usize,
        calls: AtomicUsize,
    }

    impl Objective for CountingObjective {
        fn dim(&self) -> usize {
            self.dim
        }

        fn evaluate(&self, x: &[f64], _rng: &mut RunRng) -> Result<f64> {
            self.calls.fetch_add(1, Ordering::Relaxed);
            Ok(-(x[0] - 0.3).powi(2) - x[1].powi(2))
        }

        fn optimum_value(&self) -> Option<f64> {
            Some(0.0)
        }
    }

    #[test]
    fn zero_budget_keeps_only_initialization() {
        let obj = benchmark_by_id("sumsq-d3-e2").unwrap();
        let cfg = RunConfig { budget_t: 0, ..quick_cfg(Method::LassoBo) };
        let res = run_lassobo(&obj, &cfg).unwrap();
        assert_eq!(res.records.len(), cfg.n_init);
        assert!(res.records.iter().all(|r| r.d_t == 0));
        assert!(!res.best_x.is_empty());
    }

    #[test]
    fn evaluation_budget_is_exact() {
        let obj = CountingObjective { dim: 3, calls: AtomicUsize::new(0) };
        let cfg = quick_cfg(Method::LassoBo);
        let res = run_lassobo(&obj, &cfg).unwrap();
        assert_eq!(obj.calls.load(Ordering::Relaxed), cfg.n_init + cfg.budget_t);
        assert_eq!(res.records.len(), cfg.n_init + cfg.budget_t);
    }

    #[test]
    fn traces_are_bitwise_reproducible() {
        let obj = benchmark_by_id("levy-d5-e3").unwrap();
        for method in [Method::LassoBo, Method::RandomSearch, Method::VanillaBo, Method::DropoutBo { d: 2 }] {
            let cfg = quick_cfg(method);
            let a = run(&obj, &cfg).unwrap();
            let b = run(&obj, &cfg).unwrap();
            for (ra, rb) in a.records.iter().zip(&b.records) {
                assert_eq!(ra.x, rb.x);
                assert_eq!(ra.y.to_bits(), rb.y.to_bits());
                assert_eq!(ra.important, rb.important);
            }
        }
    }

    #[test]
    fn incumbent_is_monotone_and_regret_nonincreasing() {
        let obj = benchmark_by_id("ackley-d30-e5").unwrap();
        let cfg = RunConfig {
            budget_t: 40,
            n_init: 10,
            ..quick_cfg(Method::RandomSearch)
        };
        let res = run_baseline(&obj, &cfg).unwrap();
        for w in res.records.windows(2) {
            assert!(w[1].best_y >= w[0].best_y);
            assert!(w[1].simple_regret <= w[0].simple_regret);
            assert!(w[1].simple_regret >= 0.0);
        }
    }

    #[test]
    fn lassobo_records_carry_nonempty_selection() {
        let obj = benchmark_by_id("sumsq-d5-e2").unwrap();
        let cfg = quick_cfg(Method::LassoBo);
        let res = run_lassobo(&obj, &cfg).unwrap();
        for rec in res.records.iter().skip(cfg.n_init) {
            assert!(rec.d_t >= 1);
            assert_eq!(rec.important.len(), rec.d_t);
            assert!(rec.rho.as_ref().is_some_and(|r| r.len() == 5));
        }
    }

    #[test]
    fn dropout_full_dimension_selects_everything() {
        let obj = benchmark_by_id("sumsq-d4-e2").unwrap();
        let cfg = quick_cfg(Method::DropoutBo { d: 4 });
        let res = run_baseline(&obj, &cfg).unwrap();
        for rec in res.records.iter().skip(cfg.n_init) {
            assert_eq!(rec.important, vec![0, 1, 2, 3]);
        }
    }

    #[test]
    fn method_dispatch_is_enforced() {
        let obj = benchmark_by_id("sumsq-d3-e2").unwrap();
        assert!(run_lassobo(&obj, &quick_cfg(Method::RandomSearch)).is_err());
        assert!(run_baseline(&obj, &quick_cfg(Method::LassoBo)).is_err());
    }

    #[test]
    fn objective_failure_preserves_partial_trace() {
        struct FailingObjective;
        impl Objective for FailingObjective {
            fn dim(&self) -> usize {
                2
            }
            fn evaluate(&self, _x: &[f64], rng: &mut RunRng) -> Result<f64> {
                let v: f64 = rng.gen();
                if v < 0.2 {
                    Err(Error::Objective("simulated failure".into()))
                } else {
                    Ok(v)
                }
            }
        }
        let cfg = RunConfig { budget_t: 50, n_init: 4, ..quick_cfg(Method::RandomSearch) };
        let res = run(&FailingObjective, &cfg).unwrap();
        assert!(res.aborted.is_some());
        assert!(res.records.len() < cfg.n_init + cfg.budget_t);
    }

    #[test]
    fn single_repeat_summary_equals_trace() {
        let obj = benchmark_by_id("sumsq-d3-e2").unwrap();
        let cfg = quick_cfg(Method::RandomSearch);
        let out = repeat_runs(&obj, &cfg, 1).unwrap();
        assert_eq!(out.runs.len(), 1);
        let expect: Vec<f64> = out.runs[0].records.iter().map(|r| r.log_regret).collect();
        assert_eq!(out.summary.median_log_regret, expect);
        assert_eq!(out.summary.q25_log_regret, expect);
    }

    #[test]
    fn repeat_summaries_align() {
        let obj = benchmark_by_id("sumsq-d4-e2").unwrap();
        let cfg = quick_cfg(Method::RandomSearch);
        let out = repeat_runs(&obj, &cfg, 3).unwrap();
        let n = cfg.n_init + cfg.budget_t;
        assert_eq!(out.summary.iters.len(), n);
        assert_eq!(out.summary.median_log_regret.len(), n);
        for i in 0..n {
            assert!(out.summary.q25_log_regret[i] <= out.summary.median_log_regret[i] + 1e-12);
            assert!(out.summary.median_log_regret[i] <= out.summary.q75_log_regret[i] + 1e-12);
        }
        // distinct seeds were used
        assert_eq!(out.runs.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![5, 6, 7]);
    }

    #[test]
    fn quantiles_interpolate() {
        let vals = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&vals, 0.5), 2.5);
        assert_eq!(quantile_sorted(&vals, 0.0), 1.0);
        assert_eq!(quantile_sorted(&vals, 1.0), 4.0);
        assert_eq!(quantile_sorted(&[7.0], 0.25), 7.0);
        assert!(quantile_sorted(&[], 0.5).is_nan());
        // median of constant traces is the constant
        assert_eq!(quantile_sorted(&[2.0, 2.0, 2.0], 0.5), 2.0);
    }

    #[test]
    fn method_names_round_trip() {
        for m in [Method::LassoBo, Method::RandomSearch, Method::VanillaBo, Method::DropoutBo { d: 10 }] {
            assert_eq!(Method::parse(&m.name()).unwrap(), m);
        }
        assert!(Method::parse("saasbo").is_err());
    }
}
