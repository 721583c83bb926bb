//! Power-of-two cyclic heuristic: each customer is visited every `t`
//! periods (`t` a power of two) and replenished up to a fixed level; the
//! intervals are chosen jointly so that one vehicle per visit fits the
//! fleet, and visits are staggered into a cyclic schedule.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::mckp::{self, Item};
use super::ss::capped_orders;
use crate::dynamics::{simulate, Action, Policy, SimOptions, SimReport, State};
use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::rng::policy_rng;

const TAG_ORDER: u64 = 0x706f_326f;

/// Expected per-period cost and vehicle usage of visiting a customer every
/// `t` periods and filling up to `big_s`, computed by propagating the
/// inventory distribution over one cycle.
pub fn po2_expected_cost(inst: &Instance, customer: usize, t: u64, big_s: u32) -> Result<(f64, f64)> {
    let (cost, veh, _) = propagate(inst, customer, t, big_s)?;
    Ok((cost, veh))
}

/// As [`po2_expected_cost`], also returning the total probability mass after
/// each period of the cycle.
pub fn propagate(inst: &Instance, customer: usize, t: u64, big_s: u32) -> Result<(f64, f64, Vec<f64>)> {
    if t == 0 {
        return Err(Error::Config("visit interval must be >= 1".into()));
    }
    if big_s > inst.capacity(customer) {
        return Err(Error::Config(format!("order-up-to level {big_s} exceeds capacity")));
    }
    let c = &inst.costs;
    let dist = inst.distribution(customer);
    let mut p = vec![0.0; big_s as usize + 1];
    p[big_s as usize] = 1.0;
    let mut total = 0.0;
    let mut masses = Vec::with_capacity(t as usize);
    for _ in 0..t {
        let mut next = vec![0.0; p.len()];
        for (x, &px) in p.iter().enumerate() {
            if px == 0.0 {
                continue;
            }
            let x = x as u32;
            for (phi, pp) in dist.iter() {
                let w = px * pp;
                let left = x.saturating_sub(phi);
                total += w * (c.h_c * f64::from(left) + c.ell * f64::from(phi.saturating_sub(x)));
                next[left as usize] += w;
            }
        }
        p = next;
        masses.push(p.iter().sum());
    }
    let cap = inst.vehicle_capacity;
    let vehicles: f64 = p
        .iter()
        .enumerate()
        .map(|(x, &px)| px * f64::from((big_s - x as u32).div_ceil(cap)))
        .sum();
    total += vehicles * inst.trip_cost(customer);
    let tf = t as f64;
    Ok((total / tf, vehicles / tf, masses))
}

/// Cheapest order-up-to level for an interval; smaller levels win ties.
pub fn best_level(inst: &Instance, customer: usize, t: u64) -> Result<(u32, f64, f64)> {
    let mut best: Option<(u32, f64, f64)> = None;
    for big_s in 0..=inst.capacity(customer) {
        let (cost, veh) = po2_expected_cost(inst, customer, t, big_s)?;
        if best.is_none_or(|b| cost < b.1) {
            best = Some((big_s, cost, veh));
        }
    }
    Ok(best.expect("capacity range is non-empty"))
}

/// One evaluated interval for one customer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Po2Candidate {
    pub customer: usize,
    pub interval: u64,
    pub order_up_to: u32,
    pub cost: f64,
    pub veh: f64,
}

/// Visit offsets for a set of intervals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    pub intervals: Vec<u64>,
    pub offsets: Vec<u64>,
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl Schedule {
    pub fn cycle(&self) -> u64 {
        self.intervals.iter().fold(1, |l, &t| l / gcd(l, t) * t)
    }

    pub fn due(&self, customer_index: usize, period: u64) -> bool {
        let t = self.intervals[customer_index];
        period % t == self.offsets[customer_index] % t
    }

    pub fn visits(&self, period: u64) -> u32 {
        (0..self.intervals.len()).filter(|&j| self.due(j, period)).count() as u32
    }

    /// Checks every period of the cycle against the fleet size.
    pub fn verify(&self, fleet: u32) -> Result<()> {
        for p in 0..self.cycle() {
            let v = self.visits(p);
            if v > fleet {
                return Err(Error::ScheduleInfeasible {
                    period: p,
                    visits: v,
                    fleet,
                });
            }
        }
        Ok(())
    }

    /// Assigns offsets greedily, shortest interval first, each to the offset
    /// whose worst period load stays lowest (earliest offset on ties).
    pub fn build(intervals: &[u64]) -> Result<Schedule> {
        if intervals.contains(&0) {
            return Err(Error::Config("visit interval must be >= 1".into()));
        }
        let probe = Schedule {
            intervals: intervals.to_vec(),
            offsets: vec![0; intervals.len()],
        };
        let cycle = probe.cycle() as usize;
        let mut load = vec![0u32; cycle];
        let mut order: Vec<usize> = (0..intervals.len()).collect();
        order.sort_by_key(|&j| (intervals[j], j));
        let mut offsets = vec![0; intervals.len()];
        for j in order {
            let t = intervals[j] as usize;
            let mut best = (u32::MAX, u32::MAX, 0usize);
            for o in 0..t {
                let peak = (o..cycle).step_by(t).map(|p| load[p] + 1).max().unwrap_or(0);
                let sum: u32 = (o..cycle).step_by(t).map(|p| load[p]).sum();
                if (peak, sum) < (best.0, best.1) {
                    best = (peak, sum, o);
                }
            }
            offsets[j] = best.2 as u64;
            for p in (best.2..cycle).step_by(t) {
                load[p] += 1;
            }
        }
        Ok(Schedule {
            intervals: intervals.to_vec(),
            offsets,
        })
    }
}

/// Replenishes the customers due this period up to their levels.
#[derive(Debug, Clone)]
pub struct Po2Policy<'a> {
    inst: &'a Instance,
    schedule: Schedule,
    levels: Vec<u32>,
    rng: ChaCha8Rng,
}

impl<'a> Po2Policy<'a> {
    pub fn new(inst: &'a Instance, schedule: Schedule, levels: Vec<u32>, seed: u64) -> Self {
        Po2Policy {
            inst,
            schedule,
            levels,
            rng: policy_rng(seed, TAG_ORDER),
        }
    }
}

impl Policy for Po2Policy<'_> {
    fn act(&mut self, period: u64, x: &State) -> Action {
        let targets: Vec<Option<u32>> = (0..self.levels.len())
            .map(|j| self.schedule.due(j, period).then_some(self.levels[j]))
            .collect();
        capped_orders(self.inst, x, &targets, &mut self.rng)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Po2Config {
    pub tau: u32,
    pub sim_periods: u64,
    pub sim_warmup: u64,
    pub seed: u64,
}

impl Default for Po2Config {
    fn default() -> Self {
        Po2Config {
            tau: 4,
            sim_periods: 10_000,
            sim_warmup: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Po2Outcome {
    pub selected: Vec<Po2Candidate>,
    pub candidates: Vec<Vec<Po2Candidate>>,
    pub schedule: Schedule,
    pub report: SimReport,
}

impl Po2Outcome {
    pub fn policy<'a>(&self, inst: &'a Instance, seed: u64) -> Po2Policy<'a> {
        Po2Policy::new(inst, self.schedule.clone(), self.selected.iter().map(|c| c.order_up_to).collect(), seed)
    }
}

/// Candidates for the given intervals: per customer and interval, the best
/// order-up-to level.
pub fn po2_candidates(inst: &Instance, intervals: &[u64]) -> Result<Vec<Vec<Po2Candidate>>> {
    (1..=inst.n_customers())
        .map(|i| {
            intervals
                .par_iter()
                .map(|&t| {
                    let (level, cost, veh) = best_level(inst, i, t)?;
                    Ok(Po2Candidate {
                        customer: i,
                        interval: t,
                        order_up_to: level,
                        cost,
                        veh,
                    })
                })
                .collect()
        })
        .collect()
}

/// One interval per customer minimizing expected cost subject to
/// `sum 1/t <= q`, solved exactly with weights `L/t` and budget `L q` where
/// `L` is the least common multiple of the intervals.
pub fn select_intervals(candidates: &[Vec<Po2Candidate>], fleet: u32) -> Result<Vec<usize>> {
    let cycle = candidates
        .iter()
        .flatten()
        .fold(1u64, |l, c| l / gcd(l, c.interval) * c.interval);
    let groups: Vec<Vec<Item>> = candidates
        .iter()
        .map(|l| {
            l.iter()
                .map(|c| Item {
                    cost: c.cost,
                    weight: cycle / c.interval,
                })
                .collect()
        })
        .collect();
    let budget = cycle * u64::from(fleet);
    mckp::solve(&groups, budget)
        .map(|c| c.picks)
        .ok_or(Error::SelectionInfeasible {
            budget: f64::from(fleet),
        })
}

/// Full heuristic with intervals `1, 2, ..., 2^tau`.
pub fn po2_heuristic(inst: &Instance, cfg: &Po2Config) -> Result<Po2Outcome> {
    if cfg.tau > 20 {
        return Err(Error::Config("tau above 20 is not supported".into()));
    }
    let intervals: Vec<u64> = (0..=cfg.tau).map(|k| 1u64 << k).collect();
    let candidates = po2_candidates(inst, &intervals)?;
    let picks = select_intervals(&candidates, inst.q)?;
    let selected: Vec<Po2Candidate> = picks.iter().zip(&candidates).map(|(&k, l)| l[k]).collect();
    let schedule = Schedule::build(&selected.iter().map(|c| c.interval).collect::<Vec<_>>())?;
    schedule.verify(inst.q)?;
    let mut policy = Po2Policy::new(inst, schedule.clone(), selected.iter().map(|c| c.order_up_to).collect(), cfg.seed);
    let report = simulate(inst, &mut policy, cfg.sim_periods, cfg.sim_warmup, cfg.seed, &SimOptions::default())?;
    Ok(Po2Outcome {
        selected,
        candidates,
        schedule,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::is_feasible;
    use crate::instance::{gen_toy, DiscreteDistribution};

    #[test]
    fn deterministic_single_period() {
        let mut inst = gen_toy(2, 1, 3).unwrap();
        inst.locations[1].distribution = DiscreteDistribution::point(2);
        let big_s = inst.capacity(1);
        let (cost, veh) = po2_expected_cost(&inst, 1, 1, big_s).unwrap();
        let b = 2u32.div_ceil(inst.vehicle_capacity);
        let expect = inst.costs.h_c * f64::from(big_s - 2) + f64::from(b) * inst.trip_cost(1);
        assert!((cost - expect).abs() < 1e-9);
        assert_eq!(veh, f64::from(b));
    }

    #[test]
    fn never_stocking_loses_all_demand() {
        let inst = gen_toy(2, 1, 3).unwrap();
        for t in [1, 2, 4] {
            let (cost, veh) = po2_expected_cost(&inst, 2, t, 0).unwrap();
            assert!((cost - inst.costs.ell * inst.distribution(2).mean()).abs() < 1e-9);
            assert_eq!(veh, 0.0);
        }
    }

    #[test]
    fn mass_is_conserved() {
        let inst = gen_toy(3, 2, 1).unwrap();
        let (_, _, masses) = propagate(&inst, 3, 16, inst.capacity(3)).unwrap();
        assert!(masses.iter().all(|m| (m - 1.0).abs() < 1e-9));
    }

    #[test]
    fn fleet_of_one_per_customer_when_tau_zero() {
        let inst = gen_toy(3, 2, 1).unwrap();
        let cfg = Po2Config {
            tau: 0,
            sim_periods: 200,
            sim_warmup: 10,
            ..Po2Config::default()
        };
        assert!(matches!(po2_heuristic(&inst, &cfg), Err(Error::SelectionInfeasible { .. })));
        let inst = gen_toy(2, 2, 1).unwrap();
        let out = po2_heuristic(&inst, &cfg).unwrap();
        assert!(out.selected.iter().all(|c| c.interval == 1));
    }

    #[test]
    fn non_power_of_two_counterexample_fails() {
        let sched = Schedule::build(&[1, 2, 3]).unwrap();
        let average_use: f64 = [1.0, 2.0, 3.0].iter().map(|t: &f64| 1.0 / t).sum();
        assert!(average_use <= 2.0);
        assert!(matches!(sched.verify(2), Err(Error::ScheduleInfeasible { fleet: 2, .. })));
        // no offsets at all would work
        for o2 in 0..2 {
            for o3 in 0..3 {
                let s = Schedule {
                    intervals: vec![1, 2, 3],
                    offsets: vec![0, o2, o3],
                };
                assert!(s.verify(2).is_err());
            }
        }
    }

    #[test]
    fn power_of_two_schedules_verify() {
        // many customers on long intervals, load exactly at the fleet size
        let intervals = [1, 2, 4, 8, 16, 16];
        let total: f64 = intervals.iter().map(|&t| 1.0 / t as f64).sum();
        assert!(total <= 2.0);
        Schedule::build(&intervals).unwrap().verify(2).unwrap();
    }

    proptest::proptest! {
        #[test]
        fn feasible_power_of_two_sets_always_schedule(
            exps in proptest::collection::vec(0u32..=5, 1..=12),
            fleet in 1u32..=4,
        ) {
            let intervals: Vec<u64> = exps.iter().map(|&k| 1u64 << k).collect();
            let load: u64 = intervals.iter().map(|&t| 32 / t).sum();
            proptest::prop_assume!(load <= 32 * u64::from(fleet));
            let sched = Schedule::build(&intervals).unwrap();
            proptest::prop_assert!(sched.verify(fleet).is_ok());
        }
    }

    #[test]
    fn heuristic_runs_feasibly() {
        let inst = gen_toy(3, 2, 6).unwrap();
        let out = po2_heuristic(
            &inst,
            &Po2Config {
                sim_periods: 3000,
                sim_warmup: 100,
                ..Po2Config::default()
            },
        )
        .unwrap();
        let used: f64 = out.selected.iter().map(|c| 1.0 / c.interval as f64).sum();
        assert!(used <= f64::from(inst.q) + 1e-12);
        let mut policy = out.policy(&inst, 3);
        let mut check = |t: u64, x: &State| {
            let a = policy.act(t, x);
            assert!(is_feasible(&inst, x, &a));
            a
        };
        simulate(&inst, &mut check, 2000, 0, 5, &SimOptions::default()).unwrap();
    }
}
