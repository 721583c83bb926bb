//! Iterative (s,S) heuristic: evaluate every reorder/order-up-to pair per
//! customer in isolation, then repeatedly select one pair per customer under
//! a shrinking vehicle budget and test the selection in the full system.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::mckp::{self, Item};
use crate::dynamics::{simulate, Action, Policy, SimOptions, SimReport, State};
use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::rng::{derive_seed, policy_rng, RealizationStream};

const TAG_ORDER: u64 = 0x7373_6f72;
const TAG_EVAL: u64 = 0x7373_6576;

/// One evaluated (s,S) pair for one customer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsCandidate {
    pub customer: usize,
    pub s: u32,
    pub big_s: u32,
    /// Holding, lost sales and transport per period.
    pub cost: f64,
    /// Vehicles dispatched per period.
    pub veh: f64,
}

/// Single-customer evaluation protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalProtocol {
    pub periods: u64,
    pub episodes: u64,
    pub warmup: u64,
    pub seed: u64,
}

impl Default for EvalProtocol {
    fn default() -> Self {
        EvalProtocol {
            periods: 1_000_000,
            episodes: 50,
            warmup: 1000,
            seed: 0,
        }
    }
}

impl EvalProtocol {
    fn per_episode(&self) -> Result<u64> {
        if self.episodes == 0 {
            return Err(Error::Config("episodes must be >= 1".into()));
        }
        let per = self.periods / self.episodes;
        if per <= self.warmup {
            return Err(Error::Config(format!(
                "{per} periods per episode do not exceed the warmup of {}",
                self.warmup
            )));
        }
        Ok(per)
    }

    /// Demand paths for one customer, one vector per episode.
    fn demand_paths(&self, inst: &Instance, customer: usize) -> Result<Vec<Vec<u32>>> {
        let per = self.per_episode()?;
        let dist = inst.distribution(customer);
        Ok((0..self.episodes)
            .map(|e| {
                let mut stream = RealizationStream::new(derive_seed(derive_seed(self.seed, TAG_EVAL), e), customer + 1);
                (0..per).map(|t| stream.sample(t, customer, dist)).collect()
            })
            .collect())
    }
}

fn eval_on_paths(inst: &Instance, customer: usize, s: u32, big_s: u32, paths: &[Vec<u32>], warmup: u64) -> SsCandidate {
    let c = &inst.costs;
    let cap = inst.vehicle_capacity;
    let trip = inst.trip_cost(customer);
    let mut cost = 0.0;
    let mut vehicles = 0u64;
    let mut kept = 0u64;
    for path in paths {
        let mut x = 0u32;
        for (t, &phi) in path.iter().enumerate() {
            let counted = t as u64 >= warmup;
            if x <= s {
                let b = (big_s - x).div_ceil(cap);
                if counted {
                    vehicles += u64::from(b);
                    cost += f64::from(b) * trip;
                }
                x = big_s;
            }
            if counted {
                cost += c.h_c * f64::from(x.saturating_sub(phi)) + c.ell * f64::from(phi.saturating_sub(x));
                kept += 1;
            }
            x = x.saturating_sub(phi);
        }
    }
    SsCandidate {
        customer,
        s,
        big_s,
        cost: cost / kept as f64,
        veh: vehicles as f64 / kept as f64,
    }
}

/// Simulates `(s, S)` at one customer with unlimited supply and fleet,
/// starting each episode empty.
pub fn eval_ss_candidate(inst: &Instance, customer: usize, s: u32, big_s: u32, protocol: &EvalProtocol) -> Result<SsCandidate> {
    if customer == 0 || customer > inst.n_customers() {
        return Err(Error::Config(format!("no customer {customer}")));
    }
    if s >= big_s || big_s > inst.capacity(customer) {
        return Err(Error::Config(format!(
            "need s < S <= U, got s={s}, S={big_s}, U={}",
            inst.capacity(customer)
        )));
    }
    let paths = protocol.demand_paths(inst, customer)?;
    Ok(eval_on_paths(inst, customer, s, big_s, &paths, protocol.warmup))
}

/// Every pair `0 <= s < S <= U_i` on a grid of the given step (the top
/// level `U_i` is always included for S).
pub fn enumerate_candidates(inst: &Instance, customer: usize, protocol: &EvalProtocol, step: u32) -> Result<Vec<SsCandidate>> {
    let u = inst.capacity(customer);
    let step = step.max(1);
    let mut levels: Vec<u32> = (0..=u).step_by(step as usize).collect();
    if levels.last() != Some(&u) {
        levels.push(u);
    }
    let paths = protocol.demand_paths(inst, customer)?;
    let pairs: Vec<(u32, u32)> = levels
        .iter()
        .flat_map(|&big| levels.iter().filter(move |&&s| s < big).map(move |&s| (s, big)))
        .collect();
    Ok(pairs
        .par_iter()
        .map(|&(s, big)| eval_on_paths(inst, customer, s, big, &paths, protocol.warmup))
        .collect())
}

/// Grid units per vehicle in the selection budget.
pub const BUDGET_GRID: f64 = 1000.0;

fn grid_weight(veh: f64) -> u64 {
    (veh * BUDGET_GRID - 1e-9).ceil().max(0.0) as u64
}

fn grid_budget(budget: f64) -> Option<u64> {
    let b = (budget * BUDGET_GRID + 1e-9).floor();
    (b >= 0.0).then_some(b as u64)
}

/// One candidate per customer minimizing total cost with total vehicle
/// usage within `budget`. Returns the chosen index in each customer's list.
pub fn select_policies(candidates: &[Vec<SsCandidate>], budget: f64) -> Result<Vec<usize>> {
    let infeasible = || Error::SelectionInfeasible { budget };
    let b = grid_budget(budget).ok_or_else(infeasible)?;
    let mut groups = Vec::with_capacity(candidates.len());
    let mut maps = Vec::with_capacity(candidates.len());
    for list in candidates {
        let items: Vec<Item> = list
            .iter()
            .map(|c| Item {
                cost: c.cost,
                weight: grid_weight(c.veh),
            })
            .collect();
        let front = mckp::pareto_front(&items);
        groups.push(front.iter().map(|&k| items[k]).collect::<Vec<_>>());
        maps.push(front);
    }
    let choice = mckp::solve(&groups, b).ok_or_else(infeasible)?;
    Ok(choice.picks.iter().zip(&maps).map(|(&k, m)| m[k]).collect())
}

/// Replenishes every customer at or below its reorder level up to its
/// order-up-to level, serving customers in random order and capping each
/// delivery by what supply and fleet have left.
#[derive(Debug, Clone)]
pub struct SsPolicy<'a> {
    inst: &'a Instance,
    levels: Vec<(u32, u32)>,
    rng: ChaCha8Rng,
}

impl<'a> SsPolicy<'a> {
    pub fn new(inst: &'a Instance, levels: Vec<(u32, u32)>, seed: u64) -> Self {
        SsPolicy {
            inst,
            levels,
            rng: policy_rng(seed, TAG_ORDER),
        }
    }

    pub fn levels(&self) -> &[(u32, u32)] {
        &self.levels
    }
}

/// Serves the requested order-up-to quantities in random order under the
/// supply and fleet limits. `targets[j]` is `Some(S)` when customer `j + 1`
/// is due.
pub(crate) fn capped_orders(inst: &Instance, x: &State, targets: &[Option<u32>], rng: &mut ChaCha8Rng) -> Action {
    let n = inst.n_customers();
    let cap = inst.vehicle_capacity;
    let mut order: Vec<usize> = (0..n).filter(|&j| targets[j].is_some()).collect();
    order.shuffle(rng);
    let mut supply = x.inv[0];
    let mut fleet = inst.q;
    let mut deliver = vec![0u32; n];
    for j in order {
        let target = targets[j].expect("filtered");
        let want = target.saturating_sub(x.inv[j + 1]);
        let a = want.min(supply).min(fleet.saturating_mul(cap));
        deliver[j] = a;
        supply -= a;
        fleet -= a.div_ceil(cap);
    }
    Action::with_min_vehicles(0, deliver, cap)
}

impl Policy for SsPolicy<'_> {
    fn act(&mut self, _period: u64, x: &State) -> Action {
        let targets: Vec<Option<u32>> = self
            .levels
            .iter()
            .enumerate()
            .map(|(j, &(s, big))| (x.inv[j + 1] <= s).then_some(big))
            .collect();
        capped_orders(self.inst, x, &targets, &mut self.rng)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SsConfig {
    pub protocol: EvalProtocol,
    /// Grid step for s and S.
    pub step: u32,
    /// Initial budget decrement as a fraction of the fleet.
    pub xi0_frac: f64,
    pub m: f64,
    pub tstar: u32,
    pub sim_periods: u64,
    pub sim_warmup: u64,
    pub seed: u64,
}

impl Default for SsConfig {
    fn default() -> Self {
        SsConfig {
            protocol: EvalProtocol::default(),
            step: 1,
            xi0_frac: 0.01,
            m: 1.1,
            tstar: 20,
            sim_periods: 10_000,
            sim_warmup: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SsIteration {
    pub budget: f64,
    pub cost: f64,
    pub improved: bool,
}

#[derive(Debug, Clone)]
pub struct SsOutcome {
    pub levels: Vec<(u32, u32)>,
    pub cost: f64,
    pub candidates: Vec<Vec<SsCandidate>>,
    pub iterations: Vec<SsIteration>,
    pub report: SimReport,
}

impl SsOutcome {
    pub fn policy<'a>(&self, inst: &'a Instance, seed: u64) -> SsPolicy<'a> {
        SsPolicy::new(inst, self.levels.clone(), seed)
    }
}

/// Index of each customer's cheapest candidate, lower vehicle usage first
/// on ties.
fn cheapest(list: &[SsCandidate]) -> usize {
    let mut best = 0;
    for (k, c) in list.iter().enumerate() {
        let b = &list[best];
        if c.cost < b.cost || (c.cost == b.cost && c.veh < b.veh) {
            best = k;
        }
    }
    best
}

/// Runs the selection loop on already evaluated candidates.
pub fn ss_search(inst: &Instance, candidates: Vec<Vec<SsCandidate>>, cfg: &SsConfig) -> Result<SsOutcome> {
    if candidates.len() != inst.n_customers() || candidates.iter().any(Vec::is_empty) {
        return Err(Error::Config("need a non-empty candidate list per customer".into()));
    }
    let xi0 = cfg.xi0_frac * f64::from(inst.q);
    let mut xi = xi0;
    // Start from the cheapest candidates' usage on the budget grid, so the
    // first selection is always feasible.
    let mut budget = candidates.iter().map(|l| grid_weight(l[cheapest(l)].veh)).sum::<u64>() as f64 / BUDGET_GRID;
    let mut best: Option<(Vec<(u32, u32)>, f64, SimReport)> = None;
    let mut iterations = Vec::new();
    let mut idle = 0;
    loop {
        let picks = match select_policies(&candidates, budget) {
            Ok(p) => p,
            Err(Error::SelectionInfeasible { .. }) => break,
            Err(e) => return Err(e),
        };
        let levels: Vec<(u32, u32)> = picks.iter().zip(&candidates).map(|(&k, l)| (l[k].s, l[k].big_s)).collect();
        let mut policy = SsPolicy::new(inst, levels.clone(), cfg.seed);
        let report = simulate(inst, &mut policy, cfg.sim_periods, cfg.sim_warmup, cfg.seed, &SimOptions::default())?;
        let cost = report.average_cost();
        let improved = best.as_ref().is_none_or(|b| cost < b.1);
        iterations.push(SsIteration { budget, cost, improved });
        if improved {
            best = Some((levels, cost, report));
            xi *= cfg.m;
            idle = 0;
        } else {
            xi = xi0;
            idle += 1;
        }
        if idle >= cfg.tstar || !(xi > 0.0) {
            break;
        }
        budget -= xi;
    }
    let (levels, cost, report) = best.ok_or(Error::SelectionInfeasible { budget })?;
    Ok(SsOutcome {
        levels,
        cost,
        candidates,
        iterations,
        report,
    })
}

/// Full heuristic: evaluate candidates for every customer, then search.
pub fn ss_heuristic(inst: &Instance, cfg: &SsConfig) -> Result<SsOutcome> {
    let protocol = EvalProtocol {
        seed: derive_seed(cfg.seed, cfg.protocol.seed),
        ..cfg.protocol
    };
    let candidates = (1..=inst.n_customers())
        .map(|i| enumerate_candidates(inst, i, &protocol, cfg.step))
        .collect::<Result<Vec<_>>>()?;
    ss_search(inst, candidates, cfg)
}
