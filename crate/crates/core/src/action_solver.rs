//! Per-state action selection over the feasible action set.
//!
//! The value approximation is separable across locations, so
//! `min_a c_x(a) + v(s'(x, a))` decomposes into a dynamic program over
//! customers whose state is (units shipped, vehicles used). The final
//! stage picks the direct sale quantity against the supplier's value curve.
//!
//! Every objective is evaluated in one canonical order,
//! `sell_term + (c_1 + (c_2 + (... + (c_N + 0))))`, by both the dynamic
//! program and the enumeration oracle, so their objectives agree bit for bit.

use std::cmp::Ordering;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::dynamics::{Action, PostDecisionState, State};
use crate::error::{Error, Result};
use crate::instance::Instance;

/// Number of basis terms per location: `s, s^2, s^3, sqrt(s)`.
pub const FEATURES: usize = 4;
pub const FEATURE_NAMES: [&str; FEATURES] = ["s", "s2", "s3", "sqrt"];

const WEIGHTS_FORMAT: &str = "dirp-weights/1";

/// Which basis terms are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FeatureMask(pub [bool; FEATURES]);

impl FeatureMask {
    pub const FULL: FeatureMask = FeatureMask([true; FEATURES]);
    pub const LINEAR: FeatureMask = FeatureMask([true, false, false, false]);

    pub fn label(&self) -> String {
        self.0.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }
}

impl std::str::FromStr for FeatureMask {
    type Err = Error;

    /// Parses four 0/1 digits in `s, s2, s3, sqrt` order, e.g. `1011`.
    fn from_str(s: &str) -> Result<Self> {
        let bits: Vec<bool> = s
            .chars()
            .map(|c| match c {
                '1' => Ok(true),
                '0' => Ok(false),
                _ => Err(Error::Config(format!("bad feature mask {s:?}"))),
            })
            .collect::<Result<_>>()?;
        let arr: [bool; FEATURES] = bits
            .try_into()
            .map_err(|_| Error::Config(format!("feature mask {s:?} must have 4 digits")))?;
        Ok(FeatureMask(arr))
    }
}

/// Basis terms of a (scaled) inventory level.
#[inline]
pub fn basis(level: f64) -> [f64; FEATURES] {
    [level, level * level, level * level * level, level.sqrt()]
}

/// Linear weights over the per-location basis, `v(s) = sum_i w_i . psi(s_i / scale_i)`.
///
/// `scale` normalizes inventories before the basis is applied; a scale of
/// one evaluates the raw basis. Disabled mask columns hold exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    rows: Vec<[f64; FEATURES]>,
    scale: Vec<f64>,
    mask: FeatureMask,
}

impl WeightVector {
    pub fn zeros(locations: usize) -> Self {
        WeightVector {
            rows: vec![[0.0; FEATURES]; locations],
            scale: vec![1.0; locations],
            mask: FeatureMask::FULL,
        }
    }

    pub fn with_scale(scale: Vec<f64>, mask: FeatureMask) -> Result<Self> {
        if scale.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::Config("feature scales must be positive".into()));
        }
        Ok(WeightVector {
            rows: vec![[0.0; FEATURES]; scale.len()],
            scale,
            mask,
        })
    }

    /// Builds from explicit rows; entries in disabled columns are zeroed.
    pub fn from_rows(rows: Vec<[f64; FEATURES]>, scale: Vec<f64>, mask: FeatureMask) -> Result<Self> {
        if rows.len() != scale.len() {
            return Err(Error::Config("one scale per weight row required".into()));
        }
        let mut wv = WeightVector::with_scale(scale, mask)?;
        for (i, row) in rows.into_iter().enumerate() {
            for f in 0..FEATURES {
                wv.set(i, f, row[f]);
            }
        }
        Ok(wv)
    }

    pub fn locations(&self) -> usize {
        self.rows.len()
    }

    pub fn dim(&self) -> usize {
        self.rows.len() * FEATURES
    }

    pub fn mask(&self) -> FeatureMask {
        self.mask
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    pub fn row(&self, loc: usize) -> &[f64; FEATURES] {
        &self.rows[loc]
    }

    pub fn rows(&self) -> &[[f64; FEATURES]] {
        &self.rows
    }

    pub fn set(&mut self, loc: usize, feature: usize, value: f64) {
        self.rows[loc][feature] = if self.mask.0[feature] { value } else { 0.0 };
    }

    /// Masked feature values of one location at an inventory level.
    #[inline]
    pub fn features(&self, loc: usize, level: u32) -> [f64; FEATURES] {
        let mut psi = basis(f64::from(level) / self.scale[loc]);
        for f in 0..FEATURES {
            if !self.mask.0[f] {
                psi[f] = 0.0;
            }
        }
        psi
    }

    /// Flattened feature vector `psi(s)` of dimension `4 (N + 1)`.
    pub fn feature_vector(&self, s: &PostDecisionState) -> Vec<f64> {
        s.inv
            .iter()
            .enumerate()
            .flat_map(|(i, &lvl)| self.features(i, lvl))
            .collect()
    }

    #[inline]
    pub fn value_at(&self, loc: usize, level: u32) -> f64 {
        let psi = self.features(loc, level);
        let w = &self.rows[loc];
        w[0] * psi[0] + w[1] * psi[1] + w[2] * psi[2] + w[3] * psi[3]
    }

    /// `w^T psi(s)`.
    pub fn value(&self, s: &PostDecisionState) -> f64 {
        s.inv.iter().enumerate().map(|(i, &lvl)| self.value_at(i, lvl)).sum()
    }

    /// `w += coef * z` over the flattened layout, respecting the mask.
    pub fn add_scaled(&mut self, z: &[f64], coef: f64) {
        for (i, row) in self.rows.iter_mut().enumerate() {
            for f in 0..FEATURES {
                if self.mask.0[f] {
                    row[f] += coef * z[i * FEATURES + f];
                }
            }
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for row in &mut out.rows {
            for v in row.iter_mut() {
                *v *= factor;
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.rows.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.rows.iter().flatten().all(|v| v.is_finite())
    }

    /// Text grid: a header, then one line per location with its scale and
    /// four weights.
    pub fn to_text(&self) -> String {
        let mut out = format!("{WEIGHTS_FORMAT}\nmask {}\n", self.mask.label());
        out.push_str("# location scale s s2 s3 sqrt\n");
        for (i, row) in self.rows.iter().enumerate() {
            out.push_str(&format!(
                "{i} {} {} {} {} {}\n",
                self.scale[i], row[0], row[1], row[2], row[3]
            ));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let perr = |message: String| Error::Parse {
            what: "weights".into(),
            message,
        };
        let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
        match lines.next() {
            Some(h) if h.trim() == WEIGHTS_FORMAT => {}
            other => return Err(perr(format!("expected header {WEIGHTS_FORMAT:?}, found {other:?}"))),
        }
        let mask: FeatureMask = match lines.next().map(|l| l.split_whitespace().collect::<Vec<_>>()) {
            Some(parts) if parts.len() == 2 && parts[0] == "mask" => parts[1].parse()?,
            _ => return Err(perr("expected `mask <digits>` line".into())),
        };
        let mut rows = Vec::new();
        let mut scale = Vec::new();
        for (k, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 + FEATURES {
                return Err(perr(format!("row {k}: expected 6 fields, found {}", fields.len())));
            }
            let idx: usize = fields[0].parse().map_err(|_| perr(format!("row {k}: bad location index")))?;
            if idx != k {
                return Err(perr(format!("row {k}: location index {idx} out of order")));
            }
            let nums: Vec<f64> = fields[1..]
                .iter()
                .map(|f| f.parse::<f64>().map_err(|_| perr(format!("row {k}: bad number {f:?}"))))
                .collect::<Result<_>>()?;
            scale.push(nums[0]);
            rows.push([nums[1], nums[2], nums[3], nums[4]]);
        }
        if rows.is_empty() {
            return Err(perr("no weight rows".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            for f in 0..FEATURES {
                if !mask.0[f] && row[f] != 0.0 {
                    return Err(perr(format!("row {i}: disabled column {} is non-zero", FEATURE_NAMES[f])));
                }
            }
        }
        WeightVector::from_rows(rows, scale, mask)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

/// Tabulated per-location values `v_i(k)` for `k` in `[0, U_i]`.
#[derive(Debug, Clone)]
pub struct ValueTable {
    values: Vec<Vec<f64>>,
}

impl ValueTable {
    pub fn new(inst: &Instance, wv: &WeightVector) -> Self {
        let values = (0..inst.n_locations())
            .map(|i| (0..=inst.capacity(i)).map(|k| wv.value_at(i, k)).collect())
            .collect();
        ValueTable { values }
    }

    #[inline]
    pub fn get(&self, loc: usize, level: u32) -> f64 {
        self.values[loc][level as usize]
    }

    pub fn location(&self, loc: usize) -> &[f64] {
        &self.values[loc]
    }
}

/// An action with its objective `c_x(a) + v(s'(x, a))`.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub action: Action,
    pub objective: f64,
}

#[inline]
fn sell_term(table: &ValueTable, rho: f64, sell: u32, remaining: u32) -> f64 {
    -rho * f64::from(sell) + table.get(0, remaining)
}

#[inline]
fn customer_term(table: &ValueTable, trip: f64, customer: usize, level: u32, vehicles: u32) -> f64 {
    f64::from(vehicles) * trip + table.get(customer, level)
}

/// Objective of `a` at `x` in the canonical evaluation order.
pub fn objective(inst: &Instance, x: &State, a: &Action, wv: &WeightVector) -> f64 {
    let table = ValueTable::new(inst, wv);
    objective_with_table(inst, &table, x, a)
}

fn objective_with_table(inst: &Instance, table: &ValueTable, x: &State, a: &Action) -> f64 {
    let n = inst.n_customers();
    let mut acc = 0.0;
    for j in (0..n).rev() {
        acc += customer_term(table, inst.trip_cost(j + 1), j + 1, x.inv[j + 1] + a.deliver[j], a.vehicles[j]);
    }
    let remaining = x.inv[0] - a.sell - a.deliver.iter().sum::<u32>();
    sell_term(table, inst.costs.rho, a.sell, remaining) + acc
}

/// Tie-break order: objective, total vehicles, units delivered, units sold,
/// then the delivery vector lexicographically.
fn compare(a: (&Action, f64), b: (&Action, f64)) -> Ordering {
    a.1.partial_cmp(&b.1)
        .unwrap_or(Ordering::Equal)
        .then(a.0.total_vehicles().cmp(&b.0.total_vehicles()))
        .then(a.0.total_delivered().cmp(&b.0.total_delivered()))
        .then(a.0.sell.cmp(&b.0.sell))
        .then(a.0.deliver.cmp(&b.0.deliver))
}

/// Exact minimizer of `c_x(a) + v(s'(x, a))` over the feasible action set.
pub fn best_action(inst: &Instance, x: &State, wv: &WeightVector) -> Solution {
    let table = ValueTable::new(inst, wv);
    best_action_with_table(inst, &table, x)
}

/// [`best_action`] with a prebuilt value table.
pub fn best_action_with_table(inst: &Instance, table: &ValueTable, x: &State) -> Solution {
    let n = inst.n_customers();
    let supply = x.inv[0] as usize;
    let q = inst.q as usize;
    let cap = inst.vehicle_capacity;
    let width = q + 1;
    let cells = (supply + 1) * width;

    // next[u * width + r]: best cost of customers j+1..N using exactly u
    // units and r vehicles.
    let mut next = vec![f64::INFINITY; cells];
    next[0] = 0.0;
    let mut choices: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut terms: Vec<f64> = Vec::new();
    for j in (0..n).rev() {
        let customer = j + 1;
        let room = (inst.capacity(customer) - x.inv[customer]) as usize;
        let amax_total = room.min(supply);
        let trip = inst.trip_cost(customer);
        terms.clear();
        terms.extend((0..=amax_total).map(|a| {
            let a = a as u32;
            customer_term(table, trip, customer, x.inv[customer] + a, a.div_ceil(cap))
        }));
        let mut cur = vec![f64::INFINITY; cells];
        let mut arg = vec![0u32; cells];
        for u in 0..=supply {
            for r in 0..=q {
                let amax = amax_total.min(u).min(r * cap as usize);
                let mut best = f64::INFINITY;
                let mut best_a = 0u32;
                for a in 0..=amax {
                    let b = (a as u32).div_ceil(cap) as usize;
                    let prev = next[(u - a) * width + (r - b)];
                    if prev == f64::INFINITY {
                        continue;
                    }
                    let v = terms[a] + prev;
                    if v < best {
                        best = v;
                        best_a = a as u32;
                    }
                }
                cur[u * width + r] = best;
                arg[u * width + r] = best_a;
            }
        }
        choices[j] = arg;
        next = cur;
    }

    // Best direct sale for each amount left after deliveries.
    let rho = inst.costs.rho;
    let sell_best: Vec<(f64, u32)> = (0..=supply as u32)
        .map(|left| {
            let mut best = (f64::INFINITY, 0u32);
            for a0 in 0..=left {
                let v = sell_term(table, rho, a0, left - a0);
                if v < best.0 {
                    best = (v, a0);
                }
            }
            best
        })
        .collect();

    let mut best: Option<(f64, usize, usize, u32)> = None;
    for r in 0..=q {
        for u in 0..=supply {
            let g = next[u * width + r];
            if g == f64::INFINITY {
                continue;
            }
            let (sv, a0) = sell_best[supply - u];
            let obj = sv + g;
            if best.is_none_or(|b| obj < b.0) {
                best = Some((obj, u, r, a0));
            }
        }
    }
    let (objective, mut u, mut r, sell) = best.expect("the zero action is always feasible");
    let mut deliver = Vec::with_capacity(n);
    for arg in &choices {
        let a = arg[u * width + r];
        deliver.push(a);
        u -= a as usize;
        r -= a.div_ceil(cap) as usize;
    }
    Solution {
        action: Action::with_min_vehicles(sell, deliver, cap),
        objective,
    }
}

/// Exhaustive enumeration of the feasible action set (including surplus
/// vehicles) with the same tie-breaking as [`best_action`]. Refuses to run
/// past `bound` enumerated actions.
pub fn brute_force_action(inst: &Instance, x: &State, wv: &WeightVector, bound: u64) -> Result<Solution> {
    let table = ValueTable::new(inst, wv);
    let n = inst.n_customers();
    let mut best: Option<Solution> = None;
    let mut count = 0u64;
    let mut deliver = vec![0u32; n];
    let mut vehicles = vec![0u32; n];
    enumerate(
        inst, &table, x, 0, x.inv[0], inst.q, &mut deliver, &mut vehicles, &mut best, &mut count, bound,
    )?;
    Ok(best.expect("the zero action is always feasible"))
}

#[allow(clippy::too_many_arguments)]
fn enumerate(
    inst: &Instance,
    table: &ValueTable,
    x: &State,
    j: usize,
    supply_left: u32,
    fleet_left: u32,
    deliver: &mut Vec<u32>,
    vehicles: &mut Vec<u32>,
    best: &mut Option<Solution>,
    count: &mut u64,
    bound: u64,
) -> Result<()> {
    let n = inst.n_customers();
    if j == n {
        for sell in 0..=supply_left {
            *count += 1;
            if *count > bound {
                return Err(Error::ActionSetTooLarge { bound });
            }
            let a = Action {
                sell,
                deliver: deliver.clone(),
                vehicles: vehicles.clone(),
            };
            let obj = objective_with_table(inst, table, x, &a);
            if best.as_ref().is_none_or(|b| compare((&a, obj), (&b.action, b.objective)) == Ordering::Less) {
                *best = Some(Solution { action: a, objective: obj });
            }
        }
        return Ok(());
    }
    let customer = j + 1;
    let room = inst.capacity(customer) - x.inv[customer];
    let cap = inst.vehicle_capacity;
    for a in 0..=room.min(supply_left) {
        let bmin = a.div_ceil(cap);
        for b in bmin..=fleet_left {
            deliver[j] = a;
            vehicles[j] = b;
            enumerate(
                inst,
                table,
                x,
                j + 1,
                supply_left - a,
                fleet_left - b,
                deliver,
                vehicles,
                best,
                count,
                bound,
            )?;
        }
    }
    deliver[j] = 0;
    vehicles[j] = 0;
    Ok(())
}

/// Samples a feasible action: customers in shuffled order, each delivery
/// uniform on what supply, storage and the remaining fleet allow, then a
/// uniform direct sale. Feasible by construction but not uniform over the
/// action set.
pub fn random_action<R: Rng + ?Sized>(inst: &Instance, x: &State, rng: &mut R) -> Action {
    let n = inst.n_customers();
    let cap = inst.vehicle_capacity;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut supply = x.inv[0];
    let mut fleet = inst.q;
    let mut deliver = vec![0u32; n];
    for j in order {
        let room = inst.capacity(j + 1) - x.inv[j + 1];
        let hi = room.min(supply).min(fleet.saturating_mul(cap));
        let a = rng.random_range(0..=hi);
        deliver[j] = a;
        supply -= a;
        fleet -= a.div_ceil(cap);
    }
    let sell = rng.random_range(0..=supply);
    Action::with_min_vehicles(sell, deliver, cap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{action_cost, is_feasible, post_decision};
    use crate::instance::Instance;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn micro_instance(rng: &mut ChaCha8Rng) -> (Instance, State) {
        crate::fixtures::micro_instance(rng)
    }

    pub(crate) fn random_weights(inst: &Instance, rng: &mut ChaCha8Rng) -> WeightVector {
        crate::fixtures::random_weights(inst, rng)
    }

    #[test]
    fn value_examples() {
        let zero = WeightVector::zeros(2);
        assert_eq!(zero.value(&PostDecisionState::new(vec![4, 7])), 0.0);
        let lin = WeightVector::from_rows(vec![[1.0, 0.0, 0.0, 0.0]], vec![1.0], FeatureMask::FULL).unwrap();
        assert_eq!(lin.value(&PostDecisionState::new(vec![5])), 5.0);
        let root = WeightVector::from_rows(vec![[0.0, 0.0, 0.0, 2.0]], vec![1.0], FeatureMask::FULL).unwrap();
        assert_eq!(root.value(&PostDecisionState::new(vec![9])), 6.0);
        assert_eq!(root.value(&PostDecisionState::new(vec![0])), 0.0);
    }

    #[test]
    fn value_table_matches_dot_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (inst, _) = micro_instance(&mut rng);
        let wv = random_weights(&inst, &mut rng);
        let table = ValueTable::new(&inst, &wv);
        for i in 0..inst.n_locations() {
            for k in 0..=inst.capacity(i) {
                let psi = basis(f64::from(k) / wv.scale()[i]);
                let dot: f64 = wv.row(i).iter().zip(psi).map(|(w, p)| w * p).sum();
                assert!((table.get(i, k) - dot).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn mask_zeroes_disabled_columns() {
        let mut wv = WeightVector::with_scale(vec![1.0, 1.0], FeatureMask::LINEAR).unwrap();
        wv.set(0, 2, 5.0);
        wv.add_scaled(&[1.0; 8], 2.0);
        assert_eq!(wv.row(0), &[2.0, 0.0, 0.0, 0.0]);
        assert_eq!(wv.features(1, 4), [4.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn weight_text_round_trip_and_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (inst, _) = micro_instance(&mut rng);
        let wv = random_weights(&inst, &mut rng);
        assert_eq!(WeightVector::from_text(&wv.to_text()).unwrap(), wv);
        assert!(WeightVector::from_text("nonsense").is_err());
        let bad = wv.to_text().replace("mask 1111", "mask 1000");
        assert!(WeightVector::from_text(&bad).unwrap_err().to_string().contains("disabled column"));
    }

    #[test]
    fn zero_weights_sell_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let (mut inst, x) = micro_instance(&mut rng);
            inst.locations.truncate(3.min(inst.locations.len()));
            inst.costs.rho = 2.5;
            inst.costs.vehicle_fixed = 15.0;
            let wv = WeightVector::zeros(inst.n_locations());
            let sol = best_action(&inst, &x, &wv);
            assert_eq!(sol.action.sell, x.inv[0]);
            assert_eq!(sol.action.total_delivered(), 0);
            let brute = brute_force_action(&inst, &x, &wv, 10_000_000).unwrap();
            assert_eq!(sol, brute);
        }
    }

    #[test]
    fn empty_supply_gives_zero_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (inst, mut x) = micro_instance(&mut rng);
        x.inv[0] = 0;
        let wv = random_weights(&inst, &mut rng);
        assert!(best_action(&inst, &x, &wv).action.is_zero());
    }

    #[test]
    fn dp_matches_enumeration_on_micro_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..60 {
            let (inst, x) = micro_instance(&mut rng);
            let wv = random_weights(&inst, &mut rng);
            let dp = best_action(&inst, &x, &wv);
            let bf = brute_force_action(&inst, &x, &wv, 50_000_000).unwrap();
            assert_eq!(dp.objective, bf.objective);
            assert_eq!(dp.action, bf.action);
            assert!(is_feasible(&inst, &x, &dp.action));
            let direct = action_cost(&inst, &dp.action) + wv.value(&post_decision(&x, &dp.action));
            assert!((direct - dp.objective).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_trip_cost_ties_prefer_fewer_vehicles() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (mut inst, x) = micro_instance(&mut rng);
        inst.costs.vehicle_fixed = 0.0;
        inst.costs.per_distance = 0.0;
        let wv = random_weights(&inst, &mut rng);
        let bf = brute_force_action(&inst, &x, &wv, 50_000_000).unwrap();
        assert_eq!(bf.action, best_action(&inst, &x, &wv).action);
    }

    #[test]
    fn enumeration_guard() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (inst, mut x) = micro_instance(&mut rng);
        x.inv[0] = inst.capacity(0);
        let wv = WeightVector::zeros(inst.n_locations());
        assert!(matches!(
            brute_force_action(&inst, &x, &wv, 3),
            Err(Error::ActionSetTooLarge { bound: 3 })
        ));
    }

    #[test]
    fn random_action_edge_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (mut inst, mut x) = micro_instance(&mut rng);
        x.inv[0] = 0;
        for _ in 0..100 {
            assert!(random_action(&inst, &x, &mut rng).is_zero());
        }
        x.inv[0] = inst.capacity(0);
        inst.q = 0;
        for _ in 0..100 {
            let a = random_action(&inst, &x, &mut rng);
            assert!(a.deliver.iter().all(|&d| d == 0));
        }
    }

    #[test]
    fn random_actions_are_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let inst = crate::instance::gen_toy(3, 2, 1).unwrap();
        for _ in 0..100_000 {
            let x = State::new(inst.locations.iter().map(|l| rng.random_range(0..=l.capacity)).collect());
            let a = random_action(&inst, &x, &mut rng);
            assert!(is_feasible(&inst, &x, &a));
        }
    }

    proptest! {
        #[test]
        fn objective_bounded_by_idle_action(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (inst, x) = micro_instance(&mut rng);
            let wv = random_weights(&inst, &mut rng);
            let sol = best_action(&inst, &x, &wv);
            prop_assert!(sol.objective <= wv.value(&x.as_post_decision()) + 1e-9);
            prop_assert_eq!(best_action(&inst, &x, &wv), sol);
        }

        #[test]
        fn argmin_invariant_to_common_scaling(seed in any::<u64>(), pow in -2i32..=3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (inst, x) = micro_instance(&mut rng);
            let wv = random_weights(&inst, &mut rng);
            let factor = 2f64.powi(pow);
            let mut scaled = inst.clone();
            scaled.costs = inst.costs.scaled(factor);
            let a = best_action(&inst, &x, &wv).action;
            let b = best_action(&scaled, &x, &wv.scaled(factor)).action;
            prop_assert_eq!(a, b);
        }
    }
}
