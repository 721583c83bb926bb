//! Problem instances: network, fleet, costs and discretized uncertainty.
//!
//! Two seeded generator families are provided. [`gen_main`] produces the
//! mid-sized benchmark family (demand means in `[6, 12]`, generous storage),
//! [`gen_toy`] the small family on which value iteration is tractable.
//! Instances are stored as versioned TOML so they can be diffed and checked
//! into test fixtures.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Format tag written at the top of every instance file. Generator
/// capacities are rounded to the nearest integer with a floor of one.
pub const INSTANCE_FORMAT: &str = "dirp-instance/1; capacities=nearest-min1";

const PROB_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostVector {
    /// Fixed cost per dispatched vehicle.
    #[serde(rename = "W")]
    pub vehicle_fixed: f64,
    /// Cost per distance unit travelled.
    #[serde(rename = "w")]
    pub per_distance: f64,
    /// Holding cost per unit at the supplier per period.
    pub h_s: f64,
    /// Holding cost per unit at a customer per period.
    pub h_c: f64,
    /// Penalty per unit of lost sales.
    pub ell: f64,
    /// Revenue per unit sold outside the network.
    pub rho: f64,
}

impl CostVector {
    pub fn new(w_fixed: f64, w_dist: f64, h_s: f64, h_c: f64, ell: f64, rho: f64) -> Self {
        CostVector {
            vehicle_fixed: w_fixed,
            per_distance: w_dist,
            h_s,
            h_c,
            ell,
            rho,
        }
    }

    pub fn as_array(&self) -> [f64; 6] {
        [
            self.vehicle_fixed,
            self.per_distance,
            self.h_s,
            self.h_c,
            self.ell,
            self.rho,
        ]
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let [a, b, c, d, e, f] = self.as_array().map(|v| v * factor);
        CostVector::new(a, b, c, d, e, f)
    }

    fn validate(&self) -> Result<()> {
        let names = ["W", "w", "h_s", "h_c", "ell", "rho"];
        for (name, v) in names.iter().zip(self.as_array()) {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Instance(format!("cost {name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// A finite distribution over non-negative integers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution", into = "RawDistribution")]
pub struct DiscreteDistribution {
    support: Vec<u32>,
    probs: Vec<f64>,
    cdf: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawDistribution {
    support: Vec<u32>,
    probs: Vec<f64>,
}

impl TryFrom<RawDistribution> for DiscreteDistribution {
    type Error = Error;

    fn try_from(raw: RawDistribution) -> Result<Self> {
        DiscreteDistribution::new(raw.support, raw.probs)
    }
}

impl From<DiscreteDistribution> for RawDistribution {
    fn from(d: DiscreteDistribution) -> Self {
        RawDistribution {
            support: d.support,
            probs: d.probs,
        }
    }
}

impl DiscreteDistribution {
    pub fn new(support: Vec<u32>, probs: Vec<f64>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::Distribution("empty support".into()));
        }
        if support.len() != probs.len() {
            return Err(Error::Distribution(format!(
                "{} support values but {} probabilities",
                support.len(),
                probs.len()
            )));
        }
        if support.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Distribution("support must be strictly increasing".into()));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::Distribution("probabilities must be finite and >= 0".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_TOLERANCE {
            return Err(Error::Distribution(format!("probabilities sum to {total}, expected 1")));
        }
        let mut acc = 0.0;
        let cdf = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(DiscreteDistribution { support, probs, cdf })
    }

    /// Point mass at `value`.
    pub fn point(value: u32) -> Self {
        DiscreteDistribution::new(vec![value], vec![1.0]).expect("point mass is valid")
    }

    pub fn support(&self) -> &[u32] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.support.iter().copied().zip(self.probs.iter().copied())
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(k, p)| f64::from(k) * p).sum()
    }

    pub fn max_value(&self) -> u32 {
        *self.support.last().expect("non-empty support")
    }

    pub fn contains(&self, value: u32) -> bool {
        self.support.binary_search(&value).is_ok()
    }

    /// Inverse CDF for `u` in `[0, 1)`.
    pub fn quantile(&self, u: f64) -> u32 {
        let idx = self.cdf.partition_point(|&c| c <= u);
        self.support[idx.min(self.support.len() - 1)]
    }
}

/// Discretizes a normal distribution onto unit cells `[k - 0.5, k + 0.5]`
/// over `[max(0, floor(mean - 3 std)), min(cap, ceil(mean + 3 std))]`.
///
/// The two boundary cells absorb the clipped tails, cells carrying exactly
/// zero mass at either end are dropped, and the result is renormalized.
pub fn discretize_normal(mean: f64, std: f64, cap: u32) -> Result<DiscreteDistribution> {
    if !(mean.is_finite() && mean >= 0.0) {
        return Err(Error::Distribution(format!("mean must be >= 0, got {mean}")));
    }
    if !(std.is_finite() && std > 0.0) {
        return Err(Error::Distribution(format!("std must be > 0, got {std}")));
    }
    if cap < 1 {
        return Err(Error::Distribution("cap must be >= 1".into()));
    }
    let lo = (mean - 3.0 * std).floor().max(0.0);
    let hi = (mean + 3.0 * std).ceil().min(f64::from(cap));
    if lo > hi {
        return Err(Error::Distribution(format!(
            "empty support: mean {mean} with std {std} lies above cap {cap}"
        )));
    }
    let (lo, hi) = (lo as u32, hi as u32);
    let normal = Normal::new(mean, std).map_err(|e| Error::Distribution(e.to_string()))?;
    let mut cells: Vec<(u32, f64)> = (lo..=hi)
        .map(|k| {
            let kf = f64::from(k);
            let mass = if lo == hi {
                1.0
            } else if k == lo {
                normal.cdf(kf + 0.5)
            } else if k == hi {
                normal.sf(kf - 0.5)
            } else {
                normal.cdf(kf + 0.5) - normal.cdf(kf - 0.5)
            };
            (k, mass.max(0.0))
        })
        .collect();
    while cells.len() > 1 && cells.last().is_some_and(|c| c.1 == 0.0) {
        cells.pop();
    }
    let first = cells.iter().position(|c| c.1 > 0.0).unwrap_or(0);
    cells.drain(..first);
    let total: f64 = cells.iter().map(|c| c.1).sum();
    if total <= 0.0 {
        return Err(Error::Distribution("discretization produced no mass".into()));
    }
    let (support, probs) = cells.into_iter().map(|(k, m)| (k, m / total)).unzip();
    DiscreteDistribution::new(support, probs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub coords: [f64; 2],
    pub capacity: u32,
    /// Euclidean distance from the supplier.
    pub dist: f64,
    /// Supply distribution at the supplier, demand distribution elsewhere.
    pub distribution: DiscreteDistribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub family: String,
    pub seed: u64,
    /// Fleet size.
    pub q: u32,
    /// Capacity of one vehicle.
    pub vehicle_capacity: u32,
    pub costs: CostVector,
    /// Index 0 is the supplier, 1..=N the customers.
    pub locations: Vec<Location>,
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    format: String,
    #[serde(flatten)]
    instance: Instance,
}

impl Instance {
    /// Number of customers `N`.
    pub fn n_customers(&self) -> usize {
        self.locations.len() - 1
    }

    pub fn n_locations(&self) -> usize {
        self.locations.len()
    }

    pub fn capacity(&self, loc: usize) -> u32 {
        self.locations[loc].capacity
    }

    pub fn capacities(&self) -> Vec<u32> {
        self.locations.iter().map(|l| l.capacity).collect()
    }

    pub fn distribution(&self, loc: usize) -> &DiscreteDistribution {
        &self.locations[loc].distribution
    }

    /// Cost of one vehicle trip to `customer` and back, `W + 2 w d`.
    pub fn trip_cost(&self, customer: usize) -> f64 {
        self.costs.vehicle_fixed + 2.0 * self.costs.per_distance * self.locations[customer].dist
    }

    /// Expected total customer demand per period.
    pub fn expected_demand(&self) -> f64 {
        self.locations[1..].iter().map(|l| l.distribution.mean()).sum()
    }

    /// Size of the pre-decision state space.
    pub fn state_space_size(&self) -> u64 {
        self.locations
            .iter()
            .map(|l| u64::from(l.capacity) + 1)
            .fold(1u64, |acc, k| acc.saturating_mul(k))
    }

    pub fn validate(&self) -> Result<()> {
        if self.locations.len() < 2 {
            return Err(Error::Instance("need a supplier and at least one customer".into()));
        }
        if self.q < 1 {
            return Err(Error::Instance("fleet size q must be >= 1".into()));
        }
        if self.vehicle_capacity < 1 {
            return Err(Error::Instance("vehicle_capacity must be >= 1".into()));
        }
        self.costs.validate()?;
        let origin = self.locations[0].coords;
        for (i, loc) in self.locations.iter().enumerate() {
            if loc.capacity < 1 {
                return Err(Error::Instance(format!("location {i}: capacity must be >= 1")));
            }
            let d = euclid(origin, loc.coords);
            if (d - loc.dist).abs() > 1e-9 * (1.0 + d) {
                return Err(Error::Instance(format!(
                    "location {i}: dist {} does not match coordinates ({d})",
                    loc.dist
                )));
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        if self.seed > i64::MAX as u64 {
            return Err(Error::Instance("seed must be below 2^63 to be stored".into()));
        }
        let file = InstanceFile {
            format: INSTANCE_FORMAT.to_string(),
            instance: self.clone(),
        };
        toml::to_string(&file).map_err(|e| Error::Parse {
            what: "instance".into(),
            message: e.to_string(),
        })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: InstanceFile = toml::from_str(text).map_err(|e| Error::Parse {
            what: "instance".into(),
            message: e.to_string(),
        })?;
        if file.format != INSTANCE_FORMAT {
            return Err(Error::Parse {
                what: "instance".into(),
                message: format!("field `format`: unsupported format {:?}", file.format),
            });
        }
        file.instance.validate()?;
        Ok(file.instance)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_toml()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }
}

fn euclid(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Generator knobs shared by both families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenOptions {
    /// Multiplies every customer's demand standard deviation.
    pub demand_std_mult: f64,
    /// Multiplies the supply standard deviation.
    pub supply_std_mult: f64,
    /// Multiplies all storage capacities.
    pub capacity_mult: f64,
}

impl Default for GenOptions {
    fn default() -> Self {
        GenOptions {
            demand_std_mult: 1.0,
            supply_std_mult: 1.0,
            capacity_mult: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Main,
    Toy,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Main => "main",
            Family::Toy => "toy",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "main" => Ok(Family::Main),
            "toy" => Ok(Family::Toy),
            other => Err(Error::Config(format!("unknown instance family {other:?}"))),
        }
    }
}

struct FamilyParams {
    mean_range: (u32, u32),
    std_frac: (f64, f64),
    supply_std_frac: f64,
    customer_cap_factor: f64,
    supplier_cap_factor: f64,
    vehicle_cap_factor: f64,
    costs: CostVector,
}

impl Family {
    fn params(self) -> FamilyParams {
        match self {
            Family::Main => FamilyParams {
                mean_range: (6, 12),
                std_frac: (0.25, 0.75),
                supply_std_frac: 0.6,
                customer_cap_factor: 10.0,
                supplier_cap_factor: 2.5,
                vehicle_cap_factor: 2.0,
                costs: CostVector::new(15.0, 1.5, 0.1, 0.2, 30.0, 2.5),
            },
            Family::Toy => FamilyParams {
                mean_range: (2, 4),
                std_frac: (0.25, 0.75),
                supply_std_frac: 0.6,
                customer_cap_factor: 2.0,
                supplier_cap_factor: 1.5,
                vehicle_cap_factor: 1.25,
                costs: CostVector::new(15.0, 1.5, 2.0, 4.0, 15.0, 2.5),
            },
        }
    }
}

fn round_min1(v: f64) -> u32 {
    (v.round() as u32).max(1)
}

/// Draws an instance of the given family. Pure function of its arguments.
pub fn generate(family: Family, n: usize, q: u32, seed: u64, opts: GenOptions) -> Result<Instance> {
    if n < 1 {
        return Err(Error::Instance("need at least one customer".into()));
    }
    if q < 1 {
        return Err(Error::Instance("fleet size q must be >= 1".into()));
    }
    let p = family.params();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords: Vec<[f64; 2]> = (0..=n)
        .map(|_| [rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)])
        .collect();
    let demand: Vec<(f64, f64)> = (0..n)
        .map(|_| {
            let mean = f64::from(rng.random_range(p.mean_range.0..=p.mean_range.1));
            let frac = rng.random_range(p.std_frac.0..=p.std_frac.1);
            (mean, frac * mean * opts.demand_std_mult)
        })
        .collect();
    let total_mean: f64 = demand.iter().map(|d| d.0).sum();
    let supply_std = p.supply_std_frac * total_mean * opts.supply_std_mult;

    let mut locations = Vec::with_capacity(n + 1);
    let u0 = round_min1(p.supplier_cap_factor * total_mean * opts.capacity_mult);
    locations.push(Location {
        coords: coords[0],
        capacity: u0,
        dist: 0.0,
        distribution: discretize_normal(total_mean, supply_std, u0)?,
    });
    for (i, &(mean, std)) in demand.iter().enumerate() {
        let cap = round_min1(p.customer_cap_factor * mean * opts.capacity_mult);
        locations.push(Location {
            coords: coords[i + 1],
            capacity: cap,
            dist: euclid(coords[0], coords[i + 1]),
            distribution: discretize_normal(mean, std, cap)?,
        });
    }
    let inst = Instance {
        family: family.name().to_string(),
        seed,
        q,
        vehicle_capacity: round_min1(p.vehicle_cap_factor * total_mean / f64::from(q)),
        costs: p.costs,
        locations,
    };
    inst.validate()?;
    Ok(inst)
}

/// Benchmark family instance with default options.
pub fn gen_main(n: usize, q: u32, seed: u64) -> Result<Instance> {
    generate(Family::Main, n, q, seed, GenOptions::default())
}

/// Small family instance with default options.
pub fn gen_toy(n: usize, q: u32, seed: u64) -> Result<Instance> {
    generate(Family::Toy, n, q, seed, GenOptions::default())
}
