//! Relative value iteration over the full pre-decision state space.
//!
//! Each iteration turns the current pre-decision values `V` into
//! post-decision values with one expectation sweep per location (customers
//! `N..1`, then the supplier), and minimizes over the feasible action set.
//! The decomposition relies on the per-location randomness being
//! independent.

use std::io::{Read, Write};
use std::path::Path;

use crate::dynamics::{Action, Policy, State};
use crate::error::{Error, Result};
use crate::instance::Instance;

/// Mixed-radix indexing of inventory vectors; location 0 is the most
/// significant digit, so `index = x_0 * customer_states + customer_index`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateIndex {
    caps: Vec<u32>,
    strides: Vec<usize>,
    len: usize,
}

impl StateIndex {
    pub fn new(caps: &[u32]) -> Self {
        let mut strides = vec![0; caps.len()];
        let mut acc = 1usize;
        for i in (0..caps.len()).rev() {
            strides[i] = acc;
            acc *= caps[i] as usize + 1;
        }
        StateIndex {
            caps: caps.to_vec(),
            strides,
            len: acc,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn caps(&self) -> &[u32] {
        &self.caps
    }

    pub fn stride(&self, loc: usize) -> usize {
        self.strides[loc]
    }

    /// Number of joint customer inventory vectors.
    pub fn customer_states(&self) -> usize {
        self.strides[0]
    }

    pub fn index(&self, inv: &[u32]) -> usize {
        inv.iter().zip(&self.strides).map(|(&v, &s)| v as usize * s).sum()
    }

    pub fn component(&self, idx: usize, loc: usize) -> u32 {
        ((idx / self.strides[loc]) % (self.caps[loc] as usize + 1)) as u32
    }

    pub fn state(&self, idx: usize) -> Vec<u32> {
        (0..self.caps.len()).map(|i| self.component(idx, i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViConfig {
    pub eps: f64,
    pub max_iters: u32,
    /// Refuse state spaces larger than this.
    pub max_states: u64,
}

impl Default for ViConfig {
    fn default() -> Self {
        ViConfig {
            eps: 0.01,
            max_iters: 10_000,
            max_states: 2_000_000,
        }
    }
}

/// Optimal policy, values and gain of an instance.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTable {
    pub index: StateIndex,
    /// Relative pre-decision values.
    pub values: Vec<f64>,
    /// Post-decision values consistent with `values`.
    pub post_values: Vec<f64>,
    pub actions: Vec<Action>,
    pub gain: f64,
    pub iterations: u32,
    pub span: f64,
    pub converged: bool,
}

const POLICY_MAGIC: &[u8; 8] = b"DIRPPOL1";

impl PolicyTable {
    pub fn action(&self, x: &State) -> &Action {
        &self.actions[self.index.index(&x.inv)]
    }

    pub fn n_customers(&self) -> usize {
        self.index.caps().len() - 1
    }

    /// Little-endian binary: magic, location count, capacities, gain,
    /// iteration count, span, then per state `V`, post-decision value, sale
    /// and deliveries.
    pub fn write_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(POLICY_MAGIC)?;
        let caps = self.index.caps();
        out.write_all(&(caps.len() as u32).to_le_bytes())?;
        for c in caps {
            out.write_all(&c.to_le_bytes())?;
        }
        out.write_all(&self.gain.to_le_bytes())?;
        out.write_all(&self.iterations.to_le_bytes())?;
        out.write_all(&self.span.to_le_bytes())?;
        out.write_all(&[u8::from(self.converged)])?;
        for k in 0..self.index.len() {
            out.write_all(&self.values[k].to_le_bytes())?;
            out.write_all(&self.post_values[k].to_le_bytes())?;
            let a = &self.actions[k];
            out.write_all(&a.sell.to_le_bytes())?;
            for d in &a.deliver {
                out.write_all(&d.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R, vehicle_capacity: u32) -> Result<Self> {
        let perr = |m: &str| Error::Parse {
            what: "policy file".into(),
            message: m.into(),
        };
        let mut buf = Vec::new();
        input.read_to_end(&mut buf).map_err(|e| Error::io("<policy>", e))?;
        let mut cur = &buf[..];
        let mut take = |n: usize| -> Result<&[u8]> {
            if cur.len() < n {
                return Err(perr("truncated"));
            }
            let (head, tail) = cur.split_at(n);
            cur = tail;
            Ok(head)
        };
        if take(8)? != POLICY_MAGIC {
            return Err(perr("bad magic"));
        }
        let u32_at = |b: &[u8]| u32::from_le_bytes(b.try_into().unwrap());
        let f64_at = |b: &[u8]| f64::from_le_bytes(b.try_into().unwrap());
        let n_loc = u32_at(take(4)?) as usize;
        if n_loc < 2 {
            return Err(perr("fewer than two locations"));
        }
        let caps: Vec<u32> = (0..n_loc).map(|_| take(4).map(u32_at)).collect::<Result<_>>()?;
        let gain = f64_at(take(8)?);
        let iterations = u32_at(take(4)?);
        let span = f64_at(take(8)?);
        let converged = take(1)?[0] != 0;
        let index = StateIndex::new(&caps);
        let mut values = Vec::with_capacity(index.len());
        let mut post_values = Vec::with_capacity(index.len());
        let mut actions = Vec::with_capacity(index.len());
        for _ in 0..index.len() {
            values.push(f64_at(take(8)?));
            post_values.push(f64_at(take(8)?));
            let sell = u32_at(take(4)?);
            let deliver = (1..n_loc).map(|_| take(4).map(u32_at)).collect::<Result<Vec<_>>>()?;
            actions.push(Action::with_min_vehicles(sell, deliver, vehicle_capacity));
        }
        if !cur.is_empty() {
            return Err(perr("trailing bytes"));
        }
        Ok(PolicyTable {
            index,
            values,
            post_values,
            actions,
            gain,
            iterations,
            span,
            converged,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(std::io::BufWriter::new(file)).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>, vehicle_capacity: u32) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(std::io::BufReader::new(file), vehicle_capacity)
    }
}

/// Table lookup policy.
pub struct TablePolicy<'a> {
    pub table: &'a PolicyTable,
}

impl Policy for TablePolicy<'_> {
    fn act(&mut self, _period: u64, x: &State) -> Action {
        self.table.action(x).clone()
    }
}

/// One delivery option for a joint customer inventory vector.
#[derive(Debug, Clone)]
struct Delivery {
    deliver: Vec<u32>,
    /// Customer part of the post-decision index.
    post_customer: usize,
    units: u32,
    vehicles: u32,
    transport: f64,
}

/// Feasible delivery vectors (ignoring supply) for every customer inventory
/// vector, sorted by (vehicles, units, lexicographic delivery).
fn delivery_options(inst: &Instance, index: &StateIndex) -> Vec<Vec<Delivery>> {
    let n = inst.n_customers();
    let cap = inst.vehicle_capacity;
    let nc = index.customer_states();
    let mut out = Vec::with_capacity(nc);
    for c in 0..nc {
        let x: Vec<u32> = (1..=n).map(|i| index.component(c, i)).collect();
        let mut opts = Vec::new();
        let mut cur = vec![0u32; n];
        fn rec(
            inst: &Instance,
            index: &StateIndex,
            x: &[u32],
            j: usize,
            fleet: u32,
            cap: u32,
            cur: &mut Vec<u32>,
            opts: &mut Vec<Delivery>,
        ) {
            let n = x.len();
            if j == n {
                let post_customer = (0..n).map(|k| (x[k] + cur[k]) as usize * index.stride(k + 1)).sum();
                let mut transport = 0.0;
                let mut vehicles = 0;
                for k in 0..n {
                    let b = cur[k].div_ceil(cap);
                    vehicles += b;
                    transport += f64::from(b) * inst.trip_cost(k + 1);
                }
                opts.push(Delivery {
                    deliver: cur.clone(),
                    post_customer,
                    units: cur.iter().sum(),
                    vehicles,
                    transport,
                });
                return;
            }
            let room = inst.capacity(j + 1) - x[j];
            let max = room.min(fleet.saturating_mul(cap));
            for a in 0..=max {
                cur[j] = a;
                rec(inst, index, x, j + 1, fleet - a.div_ceil(cap), cap, cur, opts);
            }
            cur[j] = 0;
        }
        rec(inst, index, &x, 0, inst.q, cap, &mut cur, &mut opts);
        opts.sort_by(|a, b| {
            (a.vehicles, a.units)
                .cmp(&(b.vehicles, b.units))
                .then_with(|| a.deliver.cmp(&b.deliver))
        });
        out.push(opts);
    }
    out
}

/// Post-decision values from pre-decision values.
fn expectation(inst: &Instance, index: &StateIndex, v: &[f64], scratch: &mut Vec<f64>) -> Vec<f64> {
    let c = &inst.costs;
    let mut cur = v.to_vec();
    scratch.resize(cur.len(), 0.0);
    for i in (1..=inst.n_customers()).rev() {
        let stride = index.stride(i);
        let dist = inst.distribution(i);
        for (k, out) in scratch.iter_mut().enumerate() {
            let s = index.component(k, i);
            let base = k - s as usize * stride;
            let mut acc = 0.0;
            for (phi, p) in dist.iter() {
                let left = s.saturating_sub(phi);
                let cost = c.h_c * f64::from(left) + c.ell * f64::from(phi.saturating_sub(s));
                acc += p * (cost + cur[base + left as usize * stride]);
            }
            *out = acc;
        }
        std::mem::swap(&mut cur, scratch);
    }
    let stride = index.stride(0);
    let u0 = inst.capacity(0);
    let dist = inst.distribution(0);
    for (k, out) in scratch.iter_mut().enumerate() {
        let s = index.component(k, 0);
        let base = k - s as usize * stride;
        let mut acc = 0.0;
        for (phi, p) in dist.iter() {
            let total = s + phi;
            let kept = total.min(u0);
            let cost = -c.rho * f64::from(total - kept) + c.h_s * f64::from(kept);
            acc += p * (cost + cur[base + kept as usize * stride]);
        }
        *out = acc;
    }
    std::mem::swap(&mut cur, scratch);
    cur
}

/// Prefix minimum of the sale step: for each customer part and remaining
/// supply `R`, the best `-rho a0 + W(R - a0, .)` and its `a0` (smallest on
/// ties).
fn sale_minima(inst: &Instance, index: &StateIndex, post: &[f64]) -> (Vec<f64>, Vec<u32>) {
    let nc = index.customer_states();
    let u0 = inst.capacity(0) as usize;
    let rho = inst.costs.rho;
    let mut best = vec![0.0; post.len()];
    let mut arg = vec![0u32; post.len()];
    for c in 0..nc {
        best[c] = post[c];
        for r in 1..=u0 {
            let k = r * nc + c;
            let keep = post[k];
            let sell_more = best[k - nc] - rho;
            if keep <= sell_more {
                best[k] = keep;
                arg[k] = 0;
            } else {
                best[k] = sell_more;
                arg[k] = arg[k - nc] + 1;
            }
        }
    }
    (best, arg)
}

fn minimize(
    inst: &Instance,
    index: &StateIndex,
    options: &[Vec<Delivery>],
    sale_best: &[f64],
    sale_arg: &[u32],
    values: &mut [f64],
    choice: Option<&mut [Action]>,
) {
    let nc = index.customer_states();
    let n_states = index.len();
    let mut picks = vec![(0usize, 0u32); if choice.is_some() { n_states } else { 0 }];
    for k in 0..n_states {
        let x0 = (k / nc) as u32;
        let c = k % nc;
        let mut best = f64::INFINITY;
        let mut key = (u32::MAX, u32::MAX, u32::MAX);
        let mut pick = (0usize, 0u32);
        for (oi, o) in options[c].iter().enumerate() {
            if o.units > x0 {
                continue;
            }
            let r = (x0 - o.units) as usize;
            let slot = r * nc + o.post_customer;
            let obj = o.transport + sale_best[slot];
            let a0 = sale_arg[slot];
            let cand = (o.vehicles, o.units, a0);
            if obj < best || (obj == best && cand < key) {
                best = obj;
                key = cand;
                pick = (oi, a0);
            }
        }
        values[k] = best;
        if !picks.is_empty() {
            picks[k] = pick;
        }
    }
    if let Some(actions) = choice {
        for k in 0..n_states {
            let (oi, a0) = picks[k];
            let o = &options[k % nc][oi];
            actions[k] = Action::with_min_vehicles(a0, o.deliver.clone(), inst.vehicle_capacity);
        }
    }
}

/// Relative value iteration until the span of the increment drops below
/// `cfg.eps`.
pub fn value_iteration(inst: &Instance, cfg: &ViConfig) -> Result<PolicyTable> {
    value_iteration_from(inst, cfg, None)
}

/// As [`value_iteration`], starting from the given pre-decision values.
pub fn value_iteration_from(inst: &Instance, cfg: &ViConfig, initial: Option<Vec<f64>>) -> Result<PolicyTable> {
    if !(cfg.eps > 0.0) {
        return Err(Error::Config("eps must be positive".into()));
    }
    let states = inst.state_space_size();
    if states > cfg.max_states {
        return Err(Error::StateSpaceTooLarge {
            states,
            bound: cfg.max_states,
        });
    }
    let index = StateIndex::new(&inst.capacities());
    let options = delivery_options(inst, &index);
    let mut v = initial.unwrap_or_else(|| vec![0.0; index.len()]);
    if v.len() != index.len() {
        return Err(Error::Config("initial values have the wrong length".into()));
    }
    let mut next = vec![0.0; index.len()];
    let mut scratch = Vec::new();
    let mut span = f64::INFINITY;
    let mut previous_span = f64::INFINITY;
    let mut gain = 0.0;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iters {
        iterations += 1;
        let post = expectation(inst, &index, &v, &mut scratch);
        let (sb, sa) = sale_minima(inst, &index, &post);
        minimize(inst, &index, &options, &sb, &sa, &mut next, None);
        let (mut lo, mut hi, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
        for (a, b) in next.iter().zip(&v) {
            let d = a - b;
            lo = lo.min(d);
            hi = hi.max(d);
            sum += d;
        }
        span = hi - lo;
        gain = sum / index.len() as f64;
        if iterations > 2 && span > previous_span * (1.0 + 1e-9) + 1e-12 {
            log::warn!("value iteration span increased at iteration {iterations}: {previous_span} -> {span}");
        }
        previous_span = span;
        let offset = next[0];
        for (dst, src) in v.iter_mut().zip(&next) {
            *dst = src - offset;
        }
        if span < cfg.eps {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("value iteration stopped after {iterations} iterations with span {span}");
    }
    let post = expectation(inst, &index, &v, &mut scratch);
    let (sb, sa) = sale_minima(inst, &index, &post);
    let mut actions = vec![Action::zero(inst.n_customers()); index.len()];
    let mut final_values = vec![0.0; index.len()];
    minimize(inst, &index, &options, &sb, &sa, &mut final_values, Some(&mut actions));
    Ok(PolicyTable {
        index,
        values: v,
        post_values: post,
        actions,
        gain,
        iterations,
        span,
        converged,
    })
}

/// One Bellman backup `min_a c_x(a) + E[c_s + V(x')]` at every state, using
/// the table's values.
pub fn bellman_backup(inst: &Instance, table: &PolicyTable) -> Vec<f64> {
    let index = &table.index;
    let options = delivery_options(inst, index);
    let post = expectation(inst, index, &table.values, &mut Vec::new());
    let (sb, sa) = sale_minima(inst, index, &post);
    let mut out = vec![0.0; index.len()];
    minimize(inst, index, &options, &sb, &sa, &mut out, None);
    out
}

/// A 2-D cut through the policy: two varying locations, all others fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicySlice {
    pub axes: (usize, usize),
    /// `cells[i][j]` is the action with `x[axes.0] = i`, `x[axes.1] = j`.
    pub cells: Vec<Vec<Action>>,
}

impl PolicySlice {
    pub fn dims(&self) -> (usize, usize) {
        (self.cells.len(), self.cells.first().map_or(0, Vec::len))
    }

    pub fn zero_cells(&self) -> usize {
        self.cells.iter().flatten().filter(|a| a.total_delivered() == 0).count()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let n = self.cells.first().and_then(|r| r.first()).map_or(0, |a| a.deliver.len());
        let mut header = vec![format!("x{}", self.axes.0), format!("x{}", self.axes.1), "sell".into()];
        header.extend((1..=n).map(|i| format!("a{i}")));
        w.write_record(&header)?;
        for (i, row) in self.cells.iter().enumerate() {
            for (j, a) in row.iter().enumerate() {
                let mut rec = vec![i.to_string(), j.to_string(), a.sell.to_string()];
                rec.extend(a.deliver.iter().map(u32::to_string));
                w.write_record(&rec)?;
            }
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Extracts the slice through `fixed` (location, level) pairs. With no axes
/// every location must be fixed and the slice is 1x1.
pub fn policy_slice(table: &PolicyTable, fixed: &[(usize, u32)], axes: Option<(usize, usize)>) -> Result<PolicySlice> {
    let caps = table.index.caps();
    let mut base = vec![None; caps.len()];
    for &(loc, lvl) in fixed {
        if loc >= caps.len() || lvl > caps[loc] {
            return Err(Error::Config(format!("fixed level x{loc}={lvl} is outside the state space")));
        }
        base[loc] = Some(lvl);
    }
    let (a, b) = match axes {
        Some((a, b)) => {
            if a == b || a >= caps.len() || b >= caps.len() || base[a].is_some() || base[b].is_some() {
                return Err(Error::Config("slice axes must be two distinct unfixed locations".into()));
            }
            (Some(a), Some(b))
        }
        None => (None, None),
    };
    let free = base
        .iter()
        .enumerate()
        .filter(|(i, v)| v.is_none() && Some(*i) != a && Some(*i) != b)
        .count();
    if free > 0 {
        return Err(Error::Config("every location must be fixed or an axis".into()));
    }
    let (na, nb) = (a.map_or(1, |a| caps[a] + 1), b.map_or(1, |b| caps[b] + 1));
    let mut cells = Vec::new();
    for i in 0..na {
        let mut row = Vec::new();
        for j in 0..nb {
            let mut inv: Vec<u32> = base.iter().map(|v| v.unwrap_or(0)).collect();
            if let Some(a) = a {
                inv[a] = i;
            }
            if let Some(b) = b {
                inv[b] = j;
            }
            row.push(table.action(&State::new(inv)).clone());
        }
        cells.push(row);
    }
    Ok(PolicySlice {
        axes: (a.unwrap_or(0), b.unwrap_or(0)),
        cells,
    })
}

/// Parses `x0=14,x1=0`.
pub fn parse_fixed(spec: &str) -> Result<Vec<(usize, u32)>> {
    spec.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|part| {
            let (k, v) = part
                .trim()
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected xI=V, got {part:?}")))?;
            Ok((parse_axis(k)?, v.trim().parse().map_err(|_| Error::Config(format!("bad level in {part:?}")))?))
        })
        .collect()
}

pub fn parse_axis(s: &str) -> Result<usize> {
    s.trim()
        .strip_prefix('x')
        .and_then(|d| d.parse().ok())
        .ok_or_else(|| Error::Config(format!("expected a location like x2, got {s:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{action_cost, is_feasible, post_decision, stage_cost, transition, Realization};
    use crate::instance::{gen_toy, CostVector, DiscreteDistribution, Location};
    use nalgebra::DMatrix;

    fn tiny() -> Instance {
        let loc = |x: f64, cap: u32, support: Vec<u32>, probs: Vec<f64>| Location {
            coords: [x, 0.0],
            capacity: cap,
            dist: x,
            distribution: DiscreteDistribution::new(support, probs).unwrap(),
        };
        Instance {
            family: "tiny".into(),
            seed: 0,
            q: 1,
            vehicle_capacity: 3,
            costs: CostVector::new(4.0, 0.5, 0.3, 0.5, 6.0, 1.0),
            locations: vec![
                loc(0.0, 6, vec![0, 1, 2, 3], vec![0.2, 0.3, 0.3, 0.2]),
                loc(2.0, 4, vec![0, 1, 2], vec![0.3, 0.4, 0.3]),
            ],
        }
    }

    /// Expected per-period cost of a stationary policy from its stationary
    /// distribution, computed by enumerating the Markov chain.
    fn stationary_gain(inst: &Instance, table: &PolicyTable) -> f64 {
        let index = &table.index;
        let n = index.len();
        let mut p = DMatrix::<f64>::zeros(n, n);
        let mut cost = vec![0.0; n];
        for k in 0..n {
            let x = State::new(index.state(k));
            let a = table.action(&x);
            let s = post_decision(&x, a);
            let d0 = inst.distribution(0);
            let d1 = inst.distribution(1);
            for (f0, p0) in d0.iter() {
                for (f1, p1) in d1.iter() {
                    let phi = Realization { phi: vec![f0, f1] };
                    let next = transition(inst, &s, &phi);
                    p[(k, index.index(&next.inv))] += p0 * p1;
                    cost[k] += p0 * p1 * (stage_cost(inst, &s, &phi) + action_cost(inst, a));
                }
            }
        }
        // pi (P - I) = 0 with sum(pi) = 1: replace one equation by the norm.
        let mut m = p.transpose() - DMatrix::<f64>::identity(n, n);
        for j in 0..n {
            m[(n - 1, j)] = 1.0;
        }
        let mut rhs = nalgebra::DVector::<f64>::zeros(n);
        rhs[n - 1] = 1.0;
        let pi = m.lu().solve(&rhs).unwrap();
        pi.iter().zip(&cost).map(|(a, b)| a * b).sum()
    }

    #[test]
    fn index_round_trip() {
        let idx = StateIndex::new(&[3, 1, 2]);
        assert_eq!(idx.len(), 24);
        for k in 0..idx.len() {
            assert_eq!(idx.index(&idx.state(k)), k);
        }
        assert_eq!(idx.customer_states(), 6);
    }

    #[test]
    fn gain_matches_stationary_oracle() {
        let inst = tiny();
        assert!(inst.state_space_size() <= 50);
        let cfg = ViConfig {
            eps: 1e-9,
            ..ViConfig::default()
        };
        let table = value_iteration(&inst, &cfg).unwrap();
        assert!(table.converged);
        let oracle = stationary_gain(&inst, &table);
        assert!((oracle - table.gain).abs() < 1e-6, "gain {} vs oracle {oracle}", table.gain);
    }

    #[test]
    fn zero_costs_give_zero_gain_and_zero_actions() {
        let mut inst = gen_toy(2, 1, 3).unwrap();
        inst.costs = CostVector::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        let table = value_iteration(&inst, &ViConfig::default()).unwrap();
        assert_eq!(table.gain, 0.0);
        assert!(table.actions.iter().all(Action::is_zero));
    }

    #[test]
    fn actions_feasible_and_bellman_residual_small() {
        let inst = gen_toy(2, 1, 5).unwrap();
        let cfg = ViConfig {
            eps: 1e-4,
            ..ViConfig::default()
        };
        let table = value_iteration(&inst, &cfg).unwrap();
        for k in 0..table.index.len() {
            let x = State::new(table.index.state(k));
            assert!(is_feasible(&inst, &x, &table.actions[k]));
        }
        let backup = bellman_backup(&inst, &table);
        let worst = backup
            .iter()
            .zip(&table.values)
            .map(|(b, v)| (b - (v + table.gain)).abs())
            .fold(0.0, f64::max);
        assert!(worst <= cfg.eps * (1.0 + table.gain.abs()), "residual {worst}");
    }

    #[test]
    fn gain_invariant_to_constant_shift() {
        let inst = gen_toy(2, 1, 8).unwrap();
        let cfg = ViConfig {
            eps: 1e-5,
            ..ViConfig::default()
        };
        let a = value_iteration(&inst, &cfg).unwrap();
        let shifted = vec![123.0; inst.state_space_size() as usize];
        let b = value_iteration_from(&inst, &cfg, Some(shifted)).unwrap();
        assert!((a.gain - b.gain).abs() < cfg.eps);
    }

    #[test]
    fn state_space_guard() {
        let inst = gen_toy(3, 2, 1).unwrap();
        let cfg = ViConfig {
            max_states: 10,
            ..ViConfig::default()
        };
        assert!(matches!(
            value_iteration(&inst, &cfg),
            Err(Error::StateSpaceTooLarge { bound: 10, .. })
        ));
    }

    #[test]
    fn binary_round_trip() {
        let inst = gen_toy(2, 1, 2).unwrap();
        let table = value_iteration(&inst, &ViConfig::default()).unwrap();
        let mut buf = Vec::new();
        table.write_to(&mut buf).unwrap();
        let back = PolicyTable::read_from(&buf[..], inst.vehicle_capacity).unwrap();
        assert_eq!(back, table);
        assert!(PolicyTable::read_from(&buf[..buf.len() - 1], inst.vehicle_capacity).is_err());
    }

    #[test]
    fn slices() {
        let inst = gen_toy(3, 2, 1).unwrap();
        let table = value_iteration(&inst, &ViConfig::default()).unwrap();
        let caps = inst.capacities();
        let grid = policy_slice(&table, &[(0, 5), (1, 0)], Some((2, 3))).unwrap();
        assert_eq!(grid.dims(), (caps[2] as usize + 1, caps[3] as usize + 1));
        let point = policy_slice(&table, &[(0, 5), (1, 0), (2, 1), (3, 2)], None).unwrap();
        assert_eq!(point.dims(), (1, 1));
        assert_eq!(&point.cells[0][0], table.action(&State::new(vec![5, 0, 1, 2])));
        assert!(policy_slice(&table, &[(0, 5)], Some((2, 3))).is_err());
        assert_eq!(parse_fixed("x0=14, x1=0").unwrap(), vec![(0, 14), (1, 0)]);
        let mut out = Vec::new();
        grid.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("x2,x3,sell,a1,a2,a3\n"));
    }
}
