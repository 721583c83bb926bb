//! MDP mechanics: feasibility, costs, transitions and period simulation.
//!
//! A period runs as: observe pre-decision state `x`, choose an action,
//! pay `c_x(a)`, reach post-decision state `s`, realize supply and demand,
//! pay `c_s(phi)` and move to the next pre-decision state.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};
use crate::instance::Instance;
use crate::rng::RealizationStream;

/// Pre-decision inventories, index 0 is the supplier.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct State {
    pub inv: Vec<u32>,
}

impl State {
    pub fn new(inv: Vec<u32>) -> Self {
        State { inv }
    }

    pub fn zeros(locations: usize) -> Self {
        State { inv: vec![0; locations] }
    }

    pub fn supply(&self) -> u32 {
        self.inv[0]
    }

    /// The post-decision state reached by doing nothing.
    pub fn as_post_decision(&self) -> PostDecisionState {
        PostDecisionState { inv: self.inv.clone() }
    }
}

/// Inventories right after the action, before uncertainty resolves.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PostDecisionState {
    pub inv: Vec<u32>,
}

impl PostDecisionState {
    pub fn new(inv: Vec<u32>) -> Self {
        PostDecisionState { inv }
    }

    pub fn zeros(locations: usize) -> Self {
        PostDecisionState { inv: vec![0; locations] }
    }
}

/// A replenishment decision. `deliver[j]` and `vehicles[j]` refer to
/// customer `j + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Action {
    pub sell: u32,
    pub deliver: Vec<u32>,
    pub vehicles: Vec<u32>,
}

impl Action {
    pub fn zero(customers: usize) -> Self {
        Action {
            sell: 0,
            deliver: vec![0; customers],
            vehicles: vec![0; customers],
        }
    }

    /// Builds an action using the fewest vehicles for each delivery.
    pub fn with_min_vehicles(sell: u32, deliver: Vec<u32>, vehicle_capacity: u32) -> Self {
        let vehicles = deliver.iter().map(|&a| a.div_ceil(vehicle_capacity)).collect();
        Action { sell, deliver, vehicles }
    }

    pub fn total_delivered(&self) -> u64 {
        self.deliver.iter().map(|&a| u64::from(a)).sum()
    }

    pub fn total_vehicles(&self) -> u64 {
        self.vehicles.iter().map(|&b| u64::from(b)).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.sell == 0 && self.deliver.iter().all(|&a| a == 0) && self.vehicles.iter().all(|&b| b == 0)
    }
}

/// One period's supply (index 0) and demands.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Realization {
    pub phi: Vec<u32>,
}

/// Checks the feasible action set constraints, reporting the first
/// violated one.
pub fn check_feasible(inst: &Instance, x: &State, a: &Action) -> std::result::Result<(), Violation> {
    let n = inst.n_customers();
    if x.inv.len() != n + 1 {
        return Err(Violation::Dimension {
            expected: n + 1,
            found: x.inv.len(),
        });
    }
    if a.deliver.len() != n || a.vehicles.len() != n {
        return Err(Violation::Dimension {
            expected: n,
            found: a.deliver.len().min(a.vehicles.len()),
        });
    }
    let shipped = a.total_delivered() + u64::from(a.sell);
    if shipped > u64::from(x.inv[0]) {
        return Err(Violation::SupplyExceeded {
            shipped,
            available: x.inv[0],
        });
    }
    for j in 0..n {
        let level = u64::from(x.inv[j + 1]) + u64::from(a.deliver[j]);
        let capacity = inst.capacity(j + 1);
        if level > u64::from(capacity) {
            return Err(Violation::CustomerCapacity {
                customer: j + 1,
                level,
                capacity,
            });
        }
        let carried = u64::from(inst.vehicle_capacity) * u64::from(a.vehicles[j]);
        if u64::from(a.deliver[j]) > carried {
            return Err(Violation::VehicleCapacity {
                customer: j + 1,
                quantity: a.deliver[j],
                carried,
            });
        }
    }
    let used = a.total_vehicles();
    if used > u64::from(inst.q) {
        return Err(Violation::FleetSize { used, fleet: inst.q });
    }
    Ok(())
}

pub fn is_feasible(inst: &Instance, x: &State, a: &Action) -> bool {
    check_feasible(inst, x, a).is_ok()
}

/// Transport cost of the dispatched vehicles.
pub fn transport_cost(inst: &Instance, a: &Action) -> f64 {
    a.vehicles
        .iter()
        .enumerate()
        .map(|(j, &b)| f64::from(b) * inst.trip_cost(j + 1))
        .sum()
}

/// Immediate action cost `-rho a_0 + sum_i b_i (W + 2 w d_i)`.
pub fn action_cost(inst: &Instance, a: &Action) -> f64 {
    -inst.costs.rho * f64::from(a.sell) + transport_cost(inst, a)
}

/// Applies a feasible action.
pub fn post_decision(x: &State, a: &Action) -> PostDecisionState {
    let mut inv = x.inv.clone();
    inv[0] -= a.sell + a.deliver.iter().sum::<u32>();
    for (j, &d) in a.deliver.iter().enumerate() {
        inv[j + 1] += d;
    }
    PostDecisionState { inv }
}

/// Per-period cost components of the stochastic stage plus transport.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub transport: f64,
    pub supplier_holding: f64,
    pub customer_holding: f64,
    pub lost_sales: f64,
    /// Revenue from direct and forced sales, as a negative cost.
    pub sales: f64,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.transport + self.supplier_holding + self.customer_holding + self.lost_sales + self.sales
    }

    pub fn add(&mut self, other: &CostBreakdown) {
        self.transport += other.transport;
        self.supplier_holding += other.supplier_holding;
        self.customer_holding += other.customer_holding;
        self.lost_sales += other.lost_sales;
        self.sales += other.sales;
    }

    pub fn scale(&self, f: f64) -> CostBreakdown {
        CostBreakdown {
            transport: self.transport * f,
            supplier_holding: self.supplier_holding * f,
            customer_holding: self.customer_holding * f,
            lost_sales: self.lost_sales * f,
            sales: self.sales * f,
        }
    }

    pub fn components(&self) -> [(&'static str, f64); 5] {
        [
            ("transport", self.transport),
            ("supplier_holding", self.supplier_holding),
            ("customer_holding", self.customer_holding),
            ("lost_sales", self.lost_sales),
            ("sales", self.sales),
        ]
    }
}

/// Stage cost components; `transport` is zero.
pub fn stage_breakdown(inst: &Instance, s: &PostDecisionState, phi: &Realization) -> CostBreakdown {
    let c = &inst.costs;
    let u0 = inst.capacity(0);
    let arrived = s.inv[0] + phi.phi[0];
    let overflow = arrived.saturating_sub(u0);
    let mut out = CostBreakdown {
        sales: -c.rho * f64::from(overflow),
        supplier_holding: c.h_s * f64::from(arrived.min(u0)),
        ..CostBreakdown::default()
    };
    for i in 1..s.inv.len() {
        let (level, demand) = (s.inv[i], phi.phi[i]);
        out.customer_holding += c.h_c * f64::from(level.saturating_sub(demand));
        out.lost_sales += c.ell * f64::from(demand.saturating_sub(level));
    }
    out
}

/// Stochastic stage cost `c_s(phi)` at post-decision state `s`.
pub fn stage_cost(inst: &Instance, s: &PostDecisionState, phi: &Realization) -> f64 {
    stage_breakdown(inst, s, phi).total()
}

/// Next pre-decision state: the supplier keeps at most `U_0`, customers
/// lose unmet demand.
pub fn transition(inst: &Instance, s: &PostDecisionState, phi: &Realization) -> State {
    let mut inv = Vec::with_capacity(s.inv.len());
    inv.push((s.inv[0] + phi.phi[0]).min(inst.capacity(0)));
    for i in 1..s.inv.len() {
        inv.push(s.inv[i].saturating_sub(phi.phi[i]));
    }
    State { inv }
}

/// A decision rule mapping the period index and pre-decision state to an
/// action. The period index lets cyclic policies follow their schedule.
pub trait Policy {
    fn act(&mut self, period: u64, x: &State) -> Action;
}

impl<F> Policy for F
where
    F: FnMut(u64, &State) -> Action,
{
    fn act(&mut self, period: u64, x: &State) -> Action {
        self(period, x)
    }
}

/// Always does nothing.
#[derive(Debug, Clone, Copy)]
pub struct ZeroPolicy {
    pub customers: usize,
}

impl Policy for ZeroPolicy {
    fn act(&mut self, _period: u64, _x: &State) -> Action {
        Action::zero(self.customers)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodTrace {
    pub period: u64,
    pub state: State,
    pub action: Action,
    pub realization: Realization,
    pub costs: CostBreakdown,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimOptions {
    /// Record every period (including warmup).
    pub trace: bool,
    pub initial: Option<State>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    /// Number of periods averaged over (after warmup).
    pub periods: u64,
    pub average: CostBreakdown,
    pub trace: Vec<PeriodTrace>,
}

impl SimReport {
    pub fn average_cost(&self) -> f64 {
        self.average.total()
    }

    /// One row per component plus the total.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["component", "value"])?;
        for (name, v) in self.average.components() {
            w.write_record([name.to_string(), format!("{v}")])?;
        }
        w.write_record(["total".to_string(), format!("{}", self.average.total())])?;
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(file)
    }
}

/// Runs `periods` periods and averages the costs of the ones after `warmup`.
///
/// Realizations come from [`RealizationStream`] seeded with `seed`, so all
/// policies run with the same seed face the same supply and demand.
pub fn simulate(
    inst: &Instance,
    policy: &mut dyn Policy,
    periods: u64,
    warmup: u64,
    seed: u64,
    opts: &SimOptions,
) -> Result<SimReport> {
    if periods <= warmup {
        return Err(Error::Config(format!(
            "periods ({periods}) must exceed warmup ({warmup})"
        )));
    }
    let mut stream = RealizationStream::new(seed, inst.n_locations());
    let mut x = opts.initial.clone().unwrap_or_else(|| State::zeros(inst.n_locations()));
    let mut sum = CostBreakdown::default();
    let mut trace = Vec::new();
    for t in 0..periods {
        let a = policy.act(t, &x);
        check_feasible(inst, &x, &a).map_err(|violation| Error::InfeasibleAction { period: t, violation })?;
        let s = post_decision(&x, &a);
        let phi = stream.realization(t, inst);
        let mut costs = stage_breakdown(inst, &s, &phi);
        costs.transport = transport_cost(inst, &a);
        costs.sales -= inst.costs.rho * f64::from(a.sell);
        let next = transition(inst, &s, &phi);
        check_period(inst, t, &x, &a, &s, &phi, &next)?;
        if t >= warmup {
            sum.add(&costs);
        }
        if opts.trace {
            trace.push(PeriodTrace {
                period: t,
                state: x.clone(),
                action: a,
                realization: phi,
                costs,
            });
        }
        x = next;
    }
    let kept = periods - warmup;
    Ok(SimReport {
        periods: kept,
        average: sum.scale(1.0 / kept as f64),
        trace,
    })
}

/// Averages independent episodes, each started from empty inventories with
/// its own derived seed.
pub fn simulate_episodes(
    inst: &Instance,
    policy: &mut dyn Policy,
    total_periods: u64,
    episodes: u64,
    warmup: u64,
    seed: u64,
) -> Result<SimReport> {
    if episodes == 0 {
        return Err(Error::Config("episodes must be >= 1".into()));
    }
    let per_episode = total_periods / episodes;
    let mut sum = CostBreakdown::default();
    let mut kept = 0;
    for e in 0..episodes {
        let rep = simulate(
            inst,
            policy,
            per_episode,
            warmup,
            crate::rng::derive_seed(seed, e),
            &SimOptions::default(),
        )?;
        sum.add(&rep.average.scale(rep.periods as f64));
        kept += rep.periods;
    }
    Ok(SimReport {
        periods: kept,
        average: sum.scale(1.0 / kept as f64),
        trace: Vec::new(),
    })
}

fn check_period(
    inst: &Instance,
    period: u64,
    x: &State,
    a: &Action,
    s: &PostDecisionState,
    phi: &Realization,
    next: &State,
) -> Result<()> {
    let fail = |message: String| Err(Error::Invariant { period, message });
    let out = u64::from(a.sell) + a.total_delivered();
    if u64::from(x.inv[0]) != out + u64::from(s.inv[0]) {
        return fail("supplier flow conservation broken".into());
    }
    for (i, &v) in next.inv.iter().enumerate() {
        if v > inst.capacity(i) || s.inv[i] > inst.capacity(i) {
            return fail(format!("inventory at location {i} exceeds capacity"));
        }
    }
    for (i, &d) in phi.phi.iter().enumerate() {
        if !inst.distribution(i).contains(d) {
            return fail(format!("realization {d} outside the support of location {i}"));
        }
    }
    Ok(())
}
