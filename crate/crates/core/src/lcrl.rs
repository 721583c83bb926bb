//! Scenario lookahead on top of trained weights.
//!
//! A first-stage action is scored by its own cost plus the average, over
//! sampled scenarios, of the realized stage cost and the best continuation
//! valued with the trained weights. At a one-period horizon the continuation
//! is the exact one-step action selection at each scenario's successor
//! state, so the score matches the two-stage program for that first-stage
//! action. Longer horizons roll forward with one-step greedy decisions.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;

use crate::action_solver::{best_action_with_table, ValueTable, WeightVector};
use crate::dynamics::{action_cost, check_feasible, post_decision, stage_cost, transition, Action, Policy, Realization, State};
use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::rng::{derive_seed, policy_rng};

const TAG_SCENARIO: u64 = 0x7363_656e;

/// Which first-stage moves the local search tries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MoveSet {
    /// One unit more or less for a single customer.
    pub unit: bool,
    /// One unit more or less direct sale.
    pub sale: bool,
    /// One unit from one customer to another.
    pub shift: bool,
    /// One full vehicle load more or less for a single customer.
    pub load: bool,
}

impl Default for MoveSet {
    fn default() -> Self {
        MoveSet {
            unit: true,
            sale: true,
            shift: true,
            load: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LookaheadConfig {
    pub horizon: u32,
    pub n_scenarios: usize,
    pub time_limit: Duration,
    pub moves: MoveSet,
    pub seed: u64,
    /// Threads for scenario evaluation; 1 evaluates inline.
    pub workers: usize,
}

impl Default for LookaheadConfig {
    fn default() -> Self {
        LookaheadConfig {
            horizon: 1,
            n_scenarios: 20,
            time_limit: Duration::from_secs(120),
            moves: MoveSet::default(),
            seed: 0,
            workers: 1,
        }
    }
}

impl LookaheadConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_scenarios == 0 {
            return Err(Error::Config("at least one scenario is required".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be >= 1".into()));
        }
        Ok(())
    }
}

/// Realizations for each lookahead period of one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub phi: Vec<Realization>,
}

fn state_tag(x: &State) -> u64 {
    x.inv.iter().fold(0x5eed, |h, &v| derive_seed(h, u64::from(v)))
}

/// Scenarios for decisions at `x`; the same state always gets the same
/// draws.
pub fn sample_scenarios(inst: &Instance, x: &State, cfg: &LookaheadConfig) -> Vec<Scenario> {
    let mut rng = policy_rng(derive_seed(cfg.seed, state_tag(x)), TAG_SCENARIO);
    (0..cfg.n_scenarios)
        .map(|_| Scenario {
            phi: (0..cfg.horizon)
                .map(|_| Realization {
                    phi: (0..inst.n_locations())
                        .map(|i| inst.distribution(i).quantile(rng.random::<f64>()))
                        .collect(),
                })
                .collect(),
        })
        .collect()
}

fn continuation(inst: &Instance, table: &ValueTable, x: &State, a: &Action, scenario: &Scenario) -> f64 {
    let mut s = post_decision(x, a);
    let mut cost = 0.0;
    let periods = scenario.phi.len();
    for (t, phi) in scenario.phi.iter().enumerate() {
        cost += stage_cost(inst, &s, phi);
        let next = transition(inst, &s, phi);
        let sol = best_action_with_table(inst, table, &next);
        if t + 1 == periods {
            cost += sol.objective;
        } else {
            cost += action_cost(inst, &sol.action);
            s = post_decision(&next, &sol.action);
        }
    }
    cost
}

/// Lookahead score of the first-stage action `a` at `x`. With scenarios of
/// zero periods this is `c_x(a) + v(s'(x, a))`.
pub fn lookahead_objective(
    inst: &Instance,
    x: &State,
    a: &Action,
    scenarios: &[Scenario],
    table: &ValueTable,
    pool: Option<&rayon::ThreadPool>,
) -> Result<f64> {
    check_feasible(inst, x, a).map_err(|violation| Error::InfeasibleAction { period: 0, violation })?;
    if scenarios.is_empty() {
        return Err(Error::Config("at least one scenario is required".into()));
    }
    if scenarios[0].phi.is_empty() {
        let s = post_decision(x, a);
        let v: f64 = s.inv.iter().enumerate().map(|(i, &k)| table.get(i, k)).sum();
        return Ok(action_cost(inst, a) + v);
    }
    let parts: Vec<f64> = match pool {
        Some(pool) => pool.install(|| {
            scenarios
                .par_iter()
                .map(|sc| continuation(inst, table, x, a, sc))
                .collect()
        }),
        None => scenarios.iter().map(|sc| continuation(inst, table, x, a, sc)).collect(),
    };
    let total: f64 = parts.iter().sum();
    Ok(action_cost(inst, a) + total / scenarios.len() as f64)
}

/// What the local search did at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchReport {
    pub start: Action,
    pub start_objective: Option<f64>,
    /// Incumbent objective after each accepted move (first entry is the start).
    pub trajectory: Vec<f64>,
    pub evaluations: usize,
    pub timed_out: bool,
}

/// Lookahead decision maker with frozen weights.
pub struct Lookahead<'a> {
    inst: &'a Instance,
    table: ValueTable,
    cfg: LookaheadConfig,
    pool: Option<rayon::ThreadPool>,
}

impl<'a> Lookahead<'a> {
    pub fn new(inst: &'a Instance, wv: &WeightVector, cfg: LookaheadConfig) -> Result<Self> {
        cfg.validate()?;
        let pool = if cfg.workers > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(cfg.workers)
                    .build()
                    .map_err(|e| Error::Config(format!("thread pool: {e}")))?,
            )
        } else {
            None
        };
        Ok(Lookahead {
            inst,
            table: ValueTable::new(inst, wv),
            cfg,
            pool,
        })
    }

    pub fn config(&self) -> &LookaheadConfig {
        &self.cfg
    }

    pub fn table(&self) -> &ValueTable {
        &self.table
    }

    pub fn decide(&self, x: &State) -> Action {
        self.decide_with_report(x).0
    }

    pub fn decide_with_report(&self, x: &State) -> (Action, SearchReport) {
        let inst = self.inst;
        let start = best_action_with_table(inst, &self.table, x).action;
        let mut report = SearchReport {
            start: start.clone(),
            start_objective: None,
            trajectory: Vec::new(),
            evaluations: 0,
            timed_out: false,
        };
        if self.cfg.horizon == 0 {
            return (start, report);
        }
        let began = Instant::now();
        let limit = self.cfg.time_limit;
        if limit.is_zero() {
            report.timed_out = true;
            return (start, report);
        }
        let scenarios = sample_scenarios(inst, x, &self.cfg);
        let mut memo: HashMap<Action, f64> = HashMap::new();
        let mut eval = |a: &Action, report: &mut SearchReport| -> f64 {
            if let Some(&v) = memo.get(a) {
                return v;
            }
            report.evaluations += 1;
            let v = lookahead_objective(inst, x, a, &scenarios, &self.table, self.pool.as_ref())
                .expect("candidates are feasible by construction");
            memo.insert(a.clone(), v);
            v
        };
        let mut incumbent = start;
        let mut best = eval(&incumbent, &mut report);
        report.start_objective = Some(best);
        report.trajectory.push(best);
        'search: loop {
            let mut improved: Option<(Action, f64)> = None;
            for cand in neighbors(inst, x, &incumbent, self.cfg.moves) {
                if began.elapsed() >= limit {
                    report.timed_out = true;
                    break 'search;
                }
                let v = eval(&cand, &mut report);
                if v < improved.as_ref().map_or(best, |b| b.1) {
                    improved = Some((cand, v));
                }
            }
            match improved {
                Some((a, v)) => {
                    incumbent = a;
                    best = v;
                    report.trajectory.push(best);
                }
                None => break,
            }
        }
        (incumbent, report)
    }
}

impl Policy for Lookahead<'_> {
    fn act(&mut self, _period: u64, x: &State) -> Action {
        self.decide(x)
    }
}

/// Feasible neighbors of `a` at `x`, all using minimal vehicles.
pub fn neighbors(inst: &Instance, x: &State, a: &Action, moves: MoveSet) -> Vec<Action> {
    let n = inst.n_customers();
    let cap = inst.vehicle_capacity;
    let mut out = Vec::new();
    let mut push = |sell: u32, deliver: Vec<u32>| {
        let cand = Action::with_min_vehicles(sell, deliver, cap);
        if cand != *a && check_feasible(inst, x, &cand).is_ok() {
            out.push(cand);
        }
    };
    if moves.unit {
        for j in 0..n {
            let mut d = a.deliver.clone();
            d[j] += 1;
            push(a.sell, d);
            if a.deliver[j] > 0 {
                let mut d = a.deliver.clone();
                d[j] -= 1;
                push(a.sell, d);
            }
        }
    }
    if moves.sale {
        push(a.sell + 1, a.deliver.clone());
        if a.sell > 0 {
            push(a.sell - 1, a.deliver.clone());
        }
    }
    if moves.shift {
        for j in 0..n {
            if a.deliver[j] == 0 {
                continue;
            }
            for k in 0..n {
                if k != j {
                    let mut d = a.deliver.clone();
                    d[j] -= 1;
                    d[k] += 1;
                    push(a.sell, d);
                }
            }
        }
    }
    if moves.load {
        for j in 0..n {
            let mut d = a.deliver.clone();
            d[j] += cap;
            push(a.sell, d);
            if a.deliver[j] > 0 {
                let mut d = a.deliver.clone();
                d[j] = d[j].saturating_sub(cap);
                push(a.sell, d);
            }
        }
    }
    out
}
