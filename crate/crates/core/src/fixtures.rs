//! Small hand-built instances shared by tests, examples and the guide.

use rand::Rng;

use crate::action_solver::{FeatureMask, WeightVector, FEATURES};
use crate::dynamics::{Action, Realization, State};
use crate::instance::{CostVector, DiscreteDistribution, Instance, Location};

/// The three-customer worked example: toy costs, point demands, supplier
/// capacity 18.
pub fn worked_example() -> Instance {
    let loc = |x: f64, cap: u32, d: u32| Location {
        coords: [x, 0.0],
        capacity: cap,
        dist: x,
        distribution: DiscreteDistribution::point(d),
    };
    Instance {
        family: "custom".into(),
        seed: 0,
        q: 3,
        vehicle_capacity: 4,
        costs: CostVector::new(15.0, 1.5, 2.0, 4.0, 15.0, 2.5),
        locations: vec![loc(0.0, 18, 16), loc(2.0, 9, 4), loc(1.0, 8, 5), loc(3.0, 7, 3)],
    }
}

/// Pre-decision state of the worked example.
pub fn worked_state() -> State {
    State::new(vec![13, 3, 4, 1])
}

/// Deliveries (6, 0, 4) on (2, 0, 1) vehicles, nothing sold.
pub fn worked_action() -> Action {
    Action {
        sell: 0,
        deliver: vec![6, 0, 4],
        vehicles: vec![2, 0, 1],
    }
}

/// Supply 16 and demands (4, 5, 3).
pub fn worked_realization() -> Realization {
    Realization { phi: vec![16, 4, 5, 3] }
}

/// A random instance with N <= 3, x0 <= 10, q <= 2 and U_i <= 8, small
/// enough to enumerate every action, with a random state.
pub fn micro_instance<R: Rng>(rng: &mut R) -> (Instance, State) {
    let n = rng.random_range(1..=3usize);
    let q = rng.random_range(1..=2u32);
    let mut locations = Vec::new();
    let u0 = rng.random_range(1..=10u32);
    locations.push(Location {
        coords: [0.0, 0.0],
        capacity: u0,
        dist: 0.0,
        distribution: DiscreteDistribution::point(1),
    });
    for _ in 0..n {
        let x = rng.random_range(0.0..5.0);
        locations.push(Location {
            coords: [x, 0.0],
            capacity: rng.random_range(1..=8u32),
            dist: x,
            distribution: DiscreteDistribution::point(1),
        });
    }
    let inst = Instance {
        family: "micro".into(),
        seed: 0,
        q,
        vehicle_capacity: rng.random_range(1..=5u32),
        costs: CostVector::new(
            rng.random_range(0.0..20.0),
            rng.random_range(0.0..2.0),
            1.0,
            1.0,
            10.0,
            rng.random_range(0.0..5.0),
        ),
        locations,
    };
    let inv = inst.locations.iter().map(|l| rng.random_range(0..=l.capacity)).collect();
    (inst, State::new(inv))
}

/// Uniform weights in [-3, 3) on the full basis, scaled by capacity.
pub fn random_weights<R: Rng>(inst: &Instance, rng: &mut R) -> WeightVector {
    let rows = (0..inst.n_locations())
        .map(|_| [0; FEATURES].map(|_| rng.random_range(-3.0..3.0)))
        .collect();
    WeightVector::from_rows(rows, inst.capacities().iter().map(|&c| f64::from(c)).collect(), FeatureMask::FULL)
        .expect("capacities are positive")
}
