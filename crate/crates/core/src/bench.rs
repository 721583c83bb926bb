//! Experiment harness: comparisons, basis ablation, parameter sweeps, value
//! curve exports and the regression of exact values onto the basis.
//!
//! Result tables contain only seeded, deterministic quantities. Wall-clock
//! timings are collected separately so the result files are reproducible
//! byte for byte.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::action_solver::{basis, FeatureMask, WeightVector, FEATURES};
use crate::crl::{greedy_policy, train, FeatureScale, TrainerConfig};
use crate::dynamics::{simulate, CostBreakdown, Policy, SimOptions, SimReport, ZeroPolicy};
use crate::error::{Error, Result};
use crate::heuristics::{po2_heuristic, ss_heuristic, EvalProtocol, Po2Config, SsConfig};
use crate::instance::{generate, Family, GenOptions, Instance};
use crate::lcrl::{Lookahead, LookaheadConfig};
use crate::rng::derive_seed;
use crate::vi::{value_iteration, PolicyTable, StateIndex, TablePolicy, ViConfig};

const EXPERIMENT_FORMAT: &str = "dirp-experiment/1";
const TAG_SIM: u64 = 0x7369_6d75;

/// The eight basis masks of the ablation, in `s, s2, s3, sqrt` order.
pub const ABLATION_MASKS: [&str; 8] = ["1111", "1011", "0111", "1101", "1110", "1000", "1100", "0100"];

pub const EPS_DECAYS: [f64; 3] = [0.999966, 0.999983, 0.999991];
pub const HORIZONS: [u32; 3] = [1, 2, 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Zero,
    Crl,
    Lcrl,
    Ss,
    Po2,
    Vi,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Zero => "zero",
            Method::Crl => "crl",
            Method::Lcrl => "lcrl",
            Method::Ss => "ss",
            Method::Po2 => "po2",
            Method::Vi => "vi",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(Method::Zero),
            "crl" => Ok(Method::Crl),
            "lcrl" => Ok(Method::Lcrl),
            "ss" => Ok(Method::Ss),
            "po2" => Ok(Method::Po2),
            "vi" => Ok(Method::Vi),
            _ => Err(Error::Config(format!("unknown method {s:?}"))),
        }
    }
}

/// Budgets and parameters shared by every experiment cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Protocol {
    pub train_periods: u64,
    pub alpha_num: f64,
    pub alpha_den: f64,
    pub lambda: f64,
    pub eps_decay: f64,
    /// `demand`, `capacity`, `raw` or a positive constant.
    pub feature_scale: String,
    pub sim_periods: u64,
    pub sim_warmup: u64,
    pub lcrl_sim_periods: u64,
    pub lcrl_warmup: u64,
    pub scenarios: usize,
    pub horizon: u32,
    pub time_limit_secs: f64,
    pub workers: usize,
    pub ss_eval_periods: u64,
    pub ss_eval_episodes: u64,
    pub ss_eval_warmup: u64,
    pub ss_step: u32,
    pub ss_tstar: u32,
    pub tau: u32,
    pub vi_eps: f64,
    pub max_states: u64,
}

impl Default for Protocol {
    fn default() -> Self {
        Protocol {
            train_periods: 20_000,
            alpha_num: 40.0,
            alpha_den: 5000.0,
            lambda: 0.9,
            eps_decay: 0.999983,
            feature_scale: "demand".into(),
            sim_periods: 10_000,
            sim_warmup: 1000,
            lcrl_sim_periods: 2000,
            lcrl_warmup: 500,
            scenarios: 20,
            horizon: 1,
            time_limit_secs: 120.0,
            workers: 1,
            ss_eval_periods: 100_000,
            ss_eval_episodes: 10,
            ss_eval_warmup: 1000,
            ss_step: 1,
            ss_tstar: 20,
            tau: 4,
            vi_eps: 0.01,
            max_states: 2_000_000,
        }
    }
}

impl Protocol {
    /// Full-length budgets: 100K training periods, 60K/1K simulation, LCRL
    /// 3K/20, 1M-period (s,S) evaluation in 50 episodes.
    pub fn full() -> Self {
        Protocol {
            train_periods: 100_000,
            sim_periods: 61_000,
            sim_warmup: 1000,
            lcrl_sim_periods: 3020,
            lcrl_warmup: 20,
            ss_eval_periods: 1_000_000,
            ss_eval_episodes: 50,
            ..Protocol::default()
        }
    }

    pub fn trainer(&self, seed: u64) -> Result<TrainerConfig> {
        Ok(TrainerConfig {
            periods: self.train_periods,
            lambda: self.lambda,
            alpha_num: self.alpha_num,
            alpha_den: self.alpha_den,
            eps_decay: self.eps_decay,
            seed,
            scale: self.feature_scale.parse::<FeatureScale>()?,
            log_interval: 0,
            ..TrainerConfig::default()
        })
    }

    pub fn lookahead(&self, seed: u64) -> LookaheadConfig {
        LookaheadConfig {
            horizon: self.horizon,
            n_scenarios: self.scenarios,
            time_limit: Duration::from_secs_f64(self.time_limit_secs.max(0.0)),
            seed,
            workers: self.workers.max(1),
            ..LookaheadConfig::default()
        }
    }

    pub fn ss(&self, seed: u64) -> SsConfig {
        SsConfig {
            protocol: EvalProtocol {
                periods: self.ss_eval_periods,
                episodes: self.ss_eval_episodes,
                warmup: self.ss_eval_warmup,
                seed: 0,
            },
            step: self.ss_step,
            tstar: self.ss_tstar,
            sim_periods: self.sim_periods,
            sim_warmup: self.sim_warmup,
            seed,
            ..SsConfig::default()
        }
    }

    pub fn po2(&self, seed: u64) -> Po2Config {
        Po2Config {
            tau: self.tau,
            sim_periods: self.sim_periods,
            sim_warmup: self.sim_warmup,
            seed,
        }
    }

    pub fn vi(&self) -> ViConfig {
        ViConfig {
            eps: self.vi_eps,
            max_states: self.max_states,
            ..ViConfig::default()
        }
    }
}

/// A family, a grid of sizes and seeds, the methods to run and their
/// protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub format: String,
    pub family: String,
    pub sizes: Vec<(usize, u32)>,
    pub seeds: Vec<u64>,
    pub methods: Vec<Method>,
    #[serde(default)]
    pub capacity_mult: Option<f64>,
    #[serde(default)]
    pub protocol: Protocol,
}

impl ExperimentSpec {
    pub fn new(family: Family, sizes: Vec<(usize, u32)>, seeds: Vec<u64>, methods: Vec<Method>) -> Self {
        ExperimentSpec {
            format: EXPERIMENT_FORMAT.into(),
            family: family.name().into(),
            sizes,
            seeds,
            methods,
            capacity_mult: None,
            protocol: Protocol::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: ExperimentSpec = toml::from_str(text).map_err(|e| Error::Parse {
            what: "experiment spec".into(),
            message: e.to_string(),
        })?;
        if spec.format != EXPERIMENT_FORMAT {
            return Err(Error::Parse {
                what: "experiment spec".into(),
                message: format!("unsupported format {:?}, expected {EXPERIMENT_FORMAT:?}", spec.format),
            });
        }
        spec.family.parse::<Family>()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Every instance of the grid, in (size, seed) order.
    pub fn instances(&self) -> Result<Vec<Instance>> {
        let family: Family = self.family.parse()?;
        let opts = GenOptions {
            capacity_mult: self.capacity_mult.unwrap_or(1.0),
            ..GenOptions::default()
        };
        let mut out = Vec::new();
        for &(n, q) in &self.sizes {
            for &seed in &self.seeds {
                out.push(generate(family, n, q, seed, opts)?);
            }
        }
        Ok(out)
    }

    /// Rejects grids the protocol cannot run within its guards.
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() || self.sizes.is_empty() || self.seeds.is_empty() {
            return Err(Error::Config("an experiment needs methods, sizes and seeds".into()));
        }
        if self.protocol.sim_periods <= self.protocol.sim_warmup {
            return Err(Error::Config("sim_periods must exceed sim_warmup".into()));
        }
        if self.methods.contains(&Method::Lcrl) && self.protocol.lcrl_sim_periods <= self.protocol.lcrl_warmup {
            return Err(Error::Config("lcrl_sim_periods must exceed lcrl_warmup".into()));
        }
        self.protocol.feature_scale.parse::<FeatureScale>()?;
        if self.methods.contains(&Method::Vi) {
            for inst in self.instances()? {
                let states = inst.state_space_size();
                if states > self.protocol.max_states {
                    return Err(Error::StateSpaceTooLarge {
                        states,
                        bound: self.protocol.max_states,
                    });
                }
            }
        }
        Ok(())
    }

    /// The method percentage gaps are measured against.
    pub fn reference(&self) -> Method {
        if self.methods.contains(&Method::Lcrl) {
            Method::Lcrl
        } else if self.methods.contains(&Method::Crl) {
            Method::Crl
        } else {
            self.methods[0]
        }
    }
}

/// Seed of the shared realization stream for an instance.
pub fn simulation_seed(instance_seed: u64) -> u64 {
    derive_seed(instance_seed, TAG_SIM)
}

/// One method on one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub n: usize,
    pub q: u32,
    pub seed: u64,
    pub method: Method,
    pub average: CostBreakdown,
    pub periods: u64,
    /// Percentage cost difference to the reference method.
    pub delta_pct: f64,
    /// Percentage cost difference to value iteration, when it ran.
    pub gap_vs_vi_pct: Option<f64>,
    /// Per-component percentage differences to the reference method.
    pub component_delta_pct: [Option<f64>; 5],
}

impl ResultRow {
    pub fn cost(&self) -> f64 {
        self.average.total()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub n: usize,
    pub q: u32,
    pub seed: u64,
    pub label: String,
    pub train_secs: f64,
    pub sim_secs_per_period: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Comparison {
    pub rows: Vec<ResultRow>,
    pub timings: Vec<TimingRow>,
}

pub fn pct(value: f64, reference: f64) -> f64 {
    if reference == 0.0 {
        if value == 0.0 {
            0.0
        } else {
            f64::NAN
        }
    } else {
        (value - reference) / reference.abs() * 100.0
    }
}

fn fmt_f(v: f64) -> String {
    format!("{v:.6}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f).unwrap_or_default()
}

fn csv_flush<W: Write>(w: &mut csv::Writer<W>) -> Result<()> {
    w.flush().map_err(|e| Error::io("<csv>", e))
}

impl Comparison {
    pub fn write_results<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let comps = CostBreakdown::default().components().map(|(n, _)| n);
        let mut header = vec!["n", "q", "seed", "method", "periods", "avg_cost", "delta_pct", "gap_vs_vi_pct"];
        header.extend(comps);
        let delta_names: Vec<String> = comps.iter().map(|c| format!("delta_{c}_pct")).collect();
        let mut header: Vec<String> = header.into_iter().map(String::from).collect();
        header.extend(delta_names);
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![
                r.n.to_string(),
                r.q.to_string(),
                r.seed.to_string(),
                r.method.to_string(),
                r.periods.to_string(),
                fmt_f(r.cost()),
                fmt_f(r.delta_pct),
                fmt_opt(r.gap_vs_vi_pct),
            ];
            rec.extend(r.average.components().iter().map(|(_, v)| fmt_f(*v)));
            rec.extend(r.component_delta_pct.iter().map(|v| fmt_opt(*v)));
            w.write_record(&rec)?;
        }
        csv_flush(&mut w)
    }

    pub fn write_timings<W: Write>(&self, out: W) -> Result<()> {
        write_timings(&self.timings, out)
    }

    /// Mean cost per method over all instances, in first-seen method order.
    pub fn mean_costs(&self) -> Vec<(Method, f64)> {
        let mut order: Vec<Method> = Vec::new();
        for r in &self.rows {
            if !order.contains(&r.method) {
                order.push(r.method);
            }
        }
        order
            .into_iter()
            .map(|m| {
                let costs: Vec<f64> = self.rows.iter().filter(|r| r.method == m).map(ResultRow::cost).collect();
                (m, costs.iter().sum::<f64>() / costs.len() as f64)
            })
            .collect()
    }

    /// Writes `results.csv` and `timings.csv` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<(PathBuf, PathBuf)> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let results = dir.join("results.csv");
        let timings = dir.join("timings.csv");
        self.write_results(create(&results)?)?;
        self.write_timings(create(&timings)?)?;
        Ok((results, timings))
    }
}

pub fn write_timings<W: Write>(rows: &[TimingRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "q", "seed", "label", "train_secs", "sim_secs_per_period"])?;
    for t in rows {
        w.write_record([
            t.n.to_string(),
            t.q.to_string(),
            t.seed.to_string(),
            t.label.clone(),
            format!("{:.6}", t.train_secs),
            format!("{:.9}", t.sim_secs_per_period),
        ])?;
    }
    csv_flush(&mut w)
}

fn create(path: &Path) -> Result<std::fs::File> {
    std::fs::File::create(path).map_err(|e| Error::io(path, e))
}

struct Cell {
    method: Method,
    report: SimReport,
    train: Duration,
    sim: Duration,
}

fn timed_sim(inst: &Instance, policy: &mut dyn Policy, periods: u64, warmup: u64, seed: u64) -> Result<(SimReport, Duration)> {
    let t = Instant::now();
    let rep = simulate(inst, policy, periods, warmup, simulation_seed(seed), &SimOptions::default())?;
    Ok((rep, t.elapsed()))
}

fn run_instance(inst: &Instance, methods: &[Method], p: &Protocol) -> Result<Vec<Cell>> {
    let seed = inst.seed;
    let mut weights: Option<(WeightVector, Duration)> = None;
    let mut cells = Vec::new();
    for &m in methods {
        let cell = match m {
            Method::Zero => {
                let (report, sim) = timed_sim(inst, &mut ZeroPolicy { customers: inst.n_customers() }, p.sim_periods, p.sim_warmup, seed)?;
                Cell { method: m, report, train: Duration::ZERO, sim }
            }
            Method::Crl | Method::Lcrl => {
                if weights.is_none() {
                    let t = Instant::now();
                    let w = train(inst, &p.trainer(seed)?)?.weights;
                    weights = Some((w, t.elapsed()));
                }
                let (w, train_time) = weights.as_ref().expect("trained above");
                if m == Method::Crl {
                    let (report, sim) = timed_sim(inst, &mut greedy_policy(inst, w), p.sim_periods, p.sim_warmup, seed)?;
                    Cell { method: m, report, train: *train_time, sim }
                } else {
                    let mut la = Lookahead::new(inst, w, p.lookahead(seed))?;
                    let (report, sim) = timed_sim(inst, &mut la, p.lcrl_sim_periods, p.lcrl_warmup, seed)?;
                    Cell { method: m, report, train: *train_time, sim }
                }
            }
            Method::Ss => {
                let t = Instant::now();
                let out = ss_heuristic(inst, &p.ss(seed))?;
                let train_time = t.elapsed();
                let (report, sim) = timed_sim(inst, &mut out.policy(inst, seed), p.sim_periods, p.sim_warmup, seed)?;
                Cell { method: m, report, train: train_time, sim }
            }
            Method::Po2 => {
                let t = Instant::now();
                let out = po2_heuristic(inst, &p.po2(seed))?;
                let train_time = t.elapsed();
                let (report, sim) = timed_sim(inst, &mut out.policy(inst, seed), p.sim_periods, p.sim_warmup, seed)?;
                Cell { method: m, report, train: train_time, sim }
            }
            Method::Vi => {
                let t = Instant::now();
                let table = value_iteration(inst, &p.vi())?;
                let train_time = t.elapsed();
                let (report, sim) = timed_sim(inst, &mut TablePolicy { table: &table }, p.sim_periods, p.sim_warmup, seed)?;
                Cell { method: m, report, train: train_time, sim }
            }
        };
        cells.push(cell);
    }
    Ok(cells)
}

/// Runs every method on every instance of the grid with paired
/// realization streams.
pub fn compare(spec: &ExperimentSpec) -> Result<Comparison> {
    spec.validate()?;
    let instances = spec.instances()?;
    let reference = spec.reference();
    let per_instance: Vec<Vec<Cell>> = instances
        .par_iter()
        .map(|inst| run_instance(inst, &spec.methods, &spec.protocol))
        .collect::<Result<_>>()?;
    let mut out = Comparison::default();
    for (inst, cells) in instances.iter().zip(per_instance) {
        let reference_avg = cells
            .iter()
            .find(|c| c.method == reference)
            .map(|c| c.report.average)
            .expect("reference method is in the list");
        let vi_cost = cells.iter().find(|c| c.method == Method::Vi).map(|c| c.report.average_cost());
        for c in cells {
            let avg = c.report.average;
            let comps = avg.components();
            let refs = reference_avg.components();
            let mut component_delta_pct = [None; 5];
            for k in 0..5 {
                component_delta_pct[k] = (refs[k].1 != 0.0).then(|| pct(comps[k].1, refs[k].1));
            }
            out.rows.push(ResultRow {
                n: inst.n_customers(),
                q: inst.q,
                seed: inst.seed,
                method: c.method,
                periods: c.report.periods,
                delta_pct: pct(avg.total(), reference_avg.total()),
                gap_vs_vi_pct: vi_cost.map(|v| pct(avg.total(), v)),
                component_delta_pct,
                average: avg,
            });
            out.timings.push(TimingRow {
                n: inst.n_customers(),
                q: inst.q,
                seed: inst.seed,
                label: c.method.to_string(),
                train_secs: c.train.as_secs_f64(),
                sim_secs_per_period: c.sim.as_secs_f64() / (c.report.periods.max(1)) as f64,
            });
        }
    }
    Ok(out)
}

/// Least-squares fit of a value array over a state space onto the
/// per-location basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Regression {
    pub weights: WeightVector,
    pub intercept: f64,
    pub residual_norm: f64,
}

/// Fits `values[k] ~ intercept + sum_i w_i . psi(s_i / scale_i)` over every
/// state of `index`. Columns are standardized and a ridge term of `1e-8`
/// conditions the normal equations.
pub fn fit_values(index: &StateIndex, values: &[f64], scale: Vec<f64>, mask: FeatureMask) -> Result<Regression> {
    let n_loc = index.caps().len();
    if values.len() != index.len() || scale.len() != n_loc {
        return Err(Error::Config("values and scale must match the state space".into()));
    }
    let template = WeightVector::with_scale(scale.clone(), mask)?;
    let cols: Vec<(usize, usize)> = (0..n_loc)
        .flat_map(|i| (0..FEATURES).filter(move |&f| mask.0[f]).map(move |f| (i, f)))
        .collect();
    let rows = index.len();
    let mut x = DMatrix::<f64>::zeros(rows, cols.len());
    for k in 0..rows {
        for (c, &(i, f)) in cols.iter().enumerate() {
            x[(k, c)] = basis(f64::from(index.component(k, i)) / scale[i])[f];
        }
    }
    let y = DVector::from_column_slice(values);
    let means: Vec<f64> = (0..cols.len()).map(|c| x.column(c).mean()).collect();
    let stds: Vec<f64> = (0..cols.len())
        .map(|c| {
            let m = means[c];
            (x.column(c).iter().map(|v| (v - m) * (v - m)).sum::<f64>() / rows as f64).sqrt()
        })
        .collect();
    let keep: Vec<usize> = (0..cols.len()).filter(|&c| stds[c] > 1e-12).collect();
    let mut z = DMatrix::<f64>::zeros(rows, keep.len());
    for (j, &c) in keep.iter().enumerate() {
        for k in 0..rows {
            z[(k, j)] = (x[(k, c)] - means[c]) / stds[c];
        }
    }
    let y_mean = y.mean();
    let yc = y.add_scalar(-y_mean);
    let mut gram = z.transpose() * &z;
    for j in 0..keep.len() {
        gram[(j, j)] += 1e-8;
    }
    let rhs = z.transpose() * &yc;
    let beta = gram
        .cholesky()
        .ok_or_else(|| Error::Config("regression normal equations are not positive definite".into()))?
        .solve(&rhs);
    let mut weights = template;
    let mut intercept = y_mean;
    for (j, &c) in keep.iter().enumerate() {
        let (i, f) = cols[c];
        let w = beta[j] / stds[c];
        weights.set(i, f, w);
        intercept -= w * means[c];
    }
    let fitted = z * &beta;
    let residual_norm = (yc - fitted).norm();
    Ok(Regression {
        weights,
        intercept,
        residual_norm,
    })
}

/// Regresses the exact post-decision values of a solved instance onto the
/// basis with the given scale.
pub fn fit_vi_regression(table: &PolicyTable, scale: Vec<f64>, mask: FeatureMask) -> Result<Regression> {
    fit_values(&table.index, &table.post_values, scale, mask)
}

/// Profit curves `-w_i . psi(k)` for one location, one column per labelled
/// weight vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueCurves {
    pub location: usize,
    pub labels: Vec<String>,
    /// `(level, values per label)`.
    pub points: Vec<(u32, Vec<f64>)>,
}

pub fn value_curves(weights: &[(String, WeightVector)], location: usize, max_level: u32) -> Result<ValueCurves> {
    if weights.iter().any(|(_, w)| location >= w.locations()) {
        return Err(Error::Config(format!("location {location} out of range")));
    }
    let points = (0..=max_level)
        .map(|k| (k, weights.iter().map(|(_, w)| -w.value_at(location, k)).collect()))
        .collect();
    Ok(ValueCurves {
        location,
        labels: weights.iter().map(|(l, _)| l.clone()).collect(),
        points,
    })
}

impl ValueCurves {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["level".to_string()];
        header.extend(self.labels.iter().cloned());
        w.write_record(&header)?;
        for (k, vals) in &self.points {
            let mut rec = vec![k.to_string()];
            rec.extend(vals.iter().map(|v| fmt_f(*v)));
            w.write_record(&rec)?;
        }
        csv_flush(&mut w)
    }
}

/// Trains with each learning-rate numerator, regresses the exact values with
/// the same basis and returns the profit curves at `location` side by side
/// (regression curve shifted to start at zero like the trained ones).
pub fn learning_rate_curves(inst: &Instance, p: &Protocol, alpha_nums: &[f64], location: usize, seed: u64) -> Result<ValueCurves> {
    let table = value_iteration(inst, &p.vi())?;
    let scale = p.feature_scale.parse::<FeatureScale>()?.scales(inst);
    let reg = fit_vi_regression(&table, scale, FeatureMask::FULL)?;
    let mut labelled = vec![("vi_regression".to_string(), reg.weights)];
    for &a in alpha_nums {
        let cfg = TrainerConfig {
            alpha_num: a,
            ..p.trainer(seed)?
        };
        labelled.push((format!("crl_alpha_{a}"), train(inst, &cfg)?.weights));
    }
    value_curves(&labelled, location, inst.capacity(location))
}

/// One trained variant evaluated on every instance.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantRow {
    pub label: String,
    pub costs: Vec<f64>,
    pub mean_cost: f64,
    /// Mean of the per-instance percentage differences to the reference.
    pub delta_pct: f64,
}

#[derive(Debug, Clone, Default)]
pub struct VariantTable {
    pub seeds: Vec<u64>,
    pub rows: Vec<VariantRow>,
    pub timings: Vec<TimingRow>,
}

impl VariantTable {
    fn from_costs(seeds: Vec<u64>, labelled: Vec<(String, Vec<f64>)>, reference: usize, timings: Vec<TimingRow>) -> Self {
        let base = labelled[reference].1.clone();
        let rows = labelled
            .into_iter()
            .map(|(label, costs)| {
                let mean_cost = costs.iter().sum::<f64>() / costs.len() as f64;
                let delta_pct = costs.iter().zip(&base).map(|(c, b)| pct(*c, *b)).sum::<f64>() / costs.len() as f64;
                VariantRow {
                    label,
                    costs,
                    mean_cost,
                    delta_pct,
                }
            })
            .collect();
        VariantTable { seeds, rows, timings }
    }

    pub fn row(&self, label: &str) -> Option<&VariantRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["variant".to_string(), "mean_cost".into(), "delta_pct".into()];
        header.extend(self.seeds.iter().map(|s| format!("cost_seed_{s}")));
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.label.clone(), fmt_f(r.mean_cost), fmt_f(r.delta_pct)];
            rec.extend(r.costs.iter().map(|c| fmt_f(*c)));
            w.write_record(&rec)?;
        }
        csv_flush(&mut w)
    }
}

fn crl_cost(inst: &Instance, cfg: &TrainerConfig, p: &Protocol) -> Result<(f64, Duration, Duration)> {
    let t = Instant::now();
    let w = train(inst, cfg)?.weights;
    let train_time = t.elapsed();
    let (rep, sim) = timed_sim(inst, &mut greedy_policy(inst, &w), p.sim_periods, p.sim_warmup, inst.seed)?;
    Ok((rep.average_cost(), train_time, sim))
}

fn timing(inst: &Instance, label: &str, train: Duration, sim: Duration, periods: u64) -> TimingRow {
    TimingRow {
        n: inst.n_customers(),
        q: inst.q,
        seed: inst.seed,
        label: label.to_string(),
        train_secs: train.as_secs_f64(),
        sim_secs_per_period: sim.as_secs_f64() / periods.max(1) as f64,
    }
}

/// Trains CRL once per basis mask on every instance; the full basis is the
/// reference row and must be among the masks.
pub fn ablate_basis(spec: &ExperimentSpec, masks: &[FeatureMask]) -> Result<VariantTable> {
    let reference = masks
        .iter()
        .position(|m| *m == FeatureMask::FULL)
        .ok_or_else(|| Error::Config("the full basis must be one of the masks".into()))?;
    let instances = spec.instances()?;
    let p = &spec.protocol;
    let mut labelled = Vec::new();
    let mut timings = Vec::new();
    for mask in masks {
        let results: Vec<(f64, Duration, Duration)> = instances
            .par_iter()
            .map(|inst| {
                let cfg = TrainerConfig {
                    mask: *mask,
                    ..p.trainer(inst.seed)?
                };
                crl_cost(inst, &cfg, p)
            })
            .collect::<Result<_>>()?;
        for (inst, r) in instances.iter().zip(&results) {
            timings.push(timing(inst, &mask.label(), r.1, r.2, p.sim_periods - p.sim_warmup));
        }
        labelled.push((mask.label(), results.into_iter().map(|r| r.0).collect()));
    }
    Ok(VariantTable::from_costs(instances.iter().map(|i| i.seed).collect(), labelled, reference, timings))
}

/// Reruns CRL for each exploration decay; the protocol's own decay is the
/// reference and is always included.
pub fn sweep_eps(spec: &ExperimentSpec, decays: &[f64]) -> Result<VariantTable> {
    let p = &spec.protocol;
    let mut all: Vec<f64> = decays.to_vec();
    if !all.contains(&p.eps_decay) {
        all.push(p.eps_decay);
    }
    let reference = all.iter().position(|&d| d == p.eps_decay).expect("inserted above");
    let instances = spec.instances()?;
    let mut labelled = Vec::new();
    let mut timings = Vec::new();
    for &d in &all {
        let label = format!("eps_decay_{d}");
        let results: Vec<(f64, Duration, Duration)> = instances
            .par_iter()
            .map(|inst| {
                let cfg = TrainerConfig {
                    eps_decay: d,
                    ..p.trainer(inst.seed)?
                };
                crl_cost(inst, &cfg, p)
            })
            .collect::<Result<_>>()?;
        for (inst, r) in instances.iter().zip(&results) {
            timings.push(timing(inst, &label, r.1, r.2, p.sim_periods - p.sim_warmup));
        }
        labelled.push((label, results.into_iter().map(|r| r.0).collect()));
    }
    Ok(VariantTable::from_costs(instances.iter().map(|i| i.seed).collect(), labelled, reference, timings))
}

/// Simulates the lookahead policy for each horizon with one set of trained
/// weights per instance; the protocol's own horizon is the reference.
pub fn sweep_horizon(spec: &ExperimentSpec, horizons: &[u32]) -> Result<VariantTable> {
    let p = &spec.protocol;
    let mut all: Vec<u32> = horizons.to_vec();
    if !all.contains(&p.horizon) {
        all.push(p.horizon);
    }
    let reference = all.iter().position(|&h| h == p.horizon).expect("inserted above");
    let instances = spec.instances()?;
    let trained: Vec<(WeightVector, Duration)> = instances
        .par_iter()
        .map(|inst| {
            let t = Instant::now();
            Ok((train(inst, &p.trainer(inst.seed)?)?.weights, t.elapsed()))
        })
        .collect::<Result<_>>()?;
    let mut labelled = Vec::new();
    let mut timings = Vec::new();
    for &h in &all {
        let label = format!("horizon_{h}");
        let results: Vec<(f64, Duration)> = instances
            .par_iter()
            .zip(&trained)
            .map(|(inst, (w, _))| {
                let cfg = LookaheadConfig {
                    horizon: h,
                    ..p.lookahead(inst.seed)
                };
                let mut la = Lookahead::new(inst, w, cfg)?;
                let (rep, sim) = timed_sim(inst, &mut la, p.lcrl_sim_periods, p.lcrl_warmup, inst.seed)?;
                Ok((rep.average_cost(), sim))
            })
            .collect::<Result<_>>()?;
        for ((inst, r), (_, tr)) in instances.iter().zip(&results).zip(&trained) {
            timings.push(timing(inst, &label, *tr, r.1, p.lcrl_sim_periods - p.lcrl_warmup));
        }
        labelled.push((label, results.into_iter().map(|r| r.0).collect()));
    }
    Ok(VariantTable::from_costs(instances.iter().map(|i| i.seed).collect(), labelled, reference, timings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::PostDecisionState;

    fn toy_spec(methods: Vec<Method>) -> ExperimentSpec {
        let mut spec = ExperimentSpec::new(Family::Toy, vec![(2, 1)], vec![1, 2], methods);
        spec.protocol = Protocol {
            train_periods: 2000,
            sim_periods: 1500,
            sim_warmup: 100,
            lcrl_sim_periods: 150,
            lcrl_warmup: 20,
            scenarios: 4,
            ss_eval_periods: 4000,
            ss_eval_episodes: 2,
            ss_eval_warmup: 100,
            ss_tstar: 3,
            ..Protocol::default()
        };
        spec
    }

    #[test]
    fn single_method_has_zero_deltas() {
        let spec = toy_spec(vec![Method::Po2]);
        let cmp = compare(&spec).unwrap();
        assert_eq!(cmp.rows.len(), 2);
        for r in &cmp.rows {
            assert_eq!(r.delta_pct, 0.0);
            assert!(r.component_delta_pct.iter().flatten().all(|&d| d == 0.0));
        }
    }

    #[test]
    fn results_are_reproducible_and_components_recompute() {
        let spec = toy_spec(vec![Method::Crl, Method::Ss, Method::Zero, Method::Vi]);
        let a = compare(&spec).unwrap();
        let b = compare(&spec).unwrap();
        let (mut ca, mut cb) = (Vec::new(), Vec::new());
        a.write_results(&mut ca).unwrap();
        b.write_results(&mut cb).unwrap();
        assert_eq!(ca, cb);
        assert_eq!(spec.reference(), Method::Crl);
        for r in &a.rows {
            let base = a.rows.iter().find(|x| x.seed == r.seed && x.method == Method::Crl).unwrap();
            for (k, d) in r.component_delta_pct.iter().enumerate() {
                if let Some(d) = d {
                    let raw = pct(r.average.components()[k].1, base.average.components()[k].1);
                    assert!((raw - d).abs() <= 0.1);
                }
            }
            assert!(r.gap_vs_vi_pct.is_some());
        }
        let text = String::from_utf8(ca).unwrap();
        assert!(text.lines().next().unwrap().starts_with("n,q,seed,method,periods,avg_cost,delta_pct"));
    }

    #[test]
    fn spec_round_trip_and_guard() {
        let spec = toy_spec(vec![Method::Crl, Method::Vi]);
        let back = ExperimentSpec::from_toml(&spec.to_toml().unwrap()).unwrap();
        assert_eq!(back, spec);
        let mut big = spec.clone();
        big.protocol.max_states = 5;
        assert!(matches!(compare(&big), Err(Error::StateSpaceTooLarge { .. })));
        assert!(ExperimentSpec::from_toml("format = \"other\"").is_err());
    }

    #[test]
    fn regression_recovers_exact_fit() {
        let caps = [6, 4, 5];
        let index = StateIndex::new(&caps);
        let scale = vec![3.0; 3];
        let rows = vec![[1.0, -0.5, 0.2, 2.0], [0.3, 0.1, -0.05, -1.0], [-2.0, 0.4, 0.0, 0.7]];
        let truth = WeightVector::from_rows(rows, scale.clone(), FeatureMask::FULL).unwrap();
        let values: Vec<f64> = (0..index.len())
            .map(|k| 4.0 + truth.value(&PostDecisionState::new(index.state(k))))
            .collect();
        let reg = fit_values(&index, &values, scale.clone(), FeatureMask::FULL).unwrap();
        for (a, b) in reg.weights.rows().iter().flatten().zip(truth.rows().iter().flatten()) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
        assert!((reg.intercept - 4.0).abs() < 1e-6);
        let flat = fit_values(&index, &vec![7.5; index.len()], scale, FeatureMask::FULL).unwrap();
        assert!(flat.weights.max_abs() < 1e-9);
        assert!((flat.intercept - 7.5).abs() < 1e-9);
    }

    #[test]
    fn regression_beats_single_feature_fits() {
        let inst = crate::instance::gen_toy(2, 1, 6).unwrap();
        let table = value_iteration(&inst, &ViConfig::default()).unwrap();
        let scale = vec![inst.expected_demand(); inst.n_locations()];
        let full = fit_vi_regression(&table, scale.clone(), FeatureMask::FULL).unwrap();
        for f in 0..FEATURES {
            let mut bits = [false; FEATURES];
            bits[f] = true;
            let single = fit_vi_regression(&table, scale.clone(), FeatureMask(bits)).unwrap();
            assert!(full.residual_norm <= single.residual_norm + 1e-9);
        }
    }

    #[test]
    fn curves() {
        let zero = WeightVector::zeros(2);
        let c = value_curves(&[("z".into(), zero)], 1, 5).unwrap();
        assert!(c.points.iter().all(|(_, v)| v[0] == 0.0));
        let lin = WeightVector::from_rows(vec![[0.0; 4], [-1.0, 0.0, 0.0, 0.0]], vec![1.0, 1.0], FeatureMask::FULL).unwrap();
        let c = value_curves(&[("lin".into(), lin)], 1, 5).unwrap();
        assert!(c.points.windows(2).all(|w| w[1].1[0] > w[0].1[0]));
        assert!(value_curves(&[("z".into(), WeightVector::zeros(2))], 3, 5).is_err());
    }

    #[test]
    fn ablation_reference_and_masked_weights() {
        let spec = toy_spec(vec![Method::Crl]);
        let masks: Vec<FeatureMask> = ["1111", "1000"].iter().map(|m| m.parse().unwrap()).collect();
        let table = ablate_basis(&spec, &masks).unwrap();
        assert_eq!(table.row("1111").unwrap().delta_pct, 0.0);
        assert!(ablate_basis(&spec, &masks[1..]).is_err());
        let sweep = sweep_eps(&spec, &[0.999966]).unwrap();
        assert!(sweep.row("eps_decay_0.999983").is_some());
        assert_eq!(sweep.row("eps_decay_0.999983").unwrap().delta_pct, 0.0);
    }
}
