//! Online differential semi-gradient TD(lambda) over post-decision states
//! with epsilon-greedy constrained action selection.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::action_solver::{best_action_with_table, random_action, FeatureMask, ValueTable, WeightVector};
use crate::dynamics::{action_cost, post_decision, stage_cost, transition, Action, PostDecisionState, Policy, State};
use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::rng::{derive_seed, policy_rng, RealizationStream};

const TAG_REALIZATION: u64 = 0x7261_696e;
const TAG_EXPLORE: u64 = 0x6578_706c;

const DELTA_LIMIT: f64 = 1e9;
const WEIGHT_LIMIT: f64 = 1e12;

/// How inventories are normalized before the basis is applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeatureScale {
    /// Raw unit counts.
    Raw,
    /// Divide every inventory by the expected total demand per period.
    Demand,
    /// Divide each location's inventory by its capacity.
    Capacity,
    /// Divide every inventory by the same constant.
    Constant(f64),
}

impl FeatureScale {
    pub fn scales(self, inst: &Instance) -> Vec<f64> {
        match self {
            FeatureScale::Raw => vec![1.0; inst.n_locations()],
            FeatureScale::Capacity => inst.capacities().iter().map(|&u| f64::from(u.max(1))).collect(),
            FeatureScale::Demand => vec![inst.expected_demand().max(1.0); inst.n_locations()],
            FeatureScale::Constant(c) => vec![c; inst.n_locations()],
        }
    }
}

impl std::str::FromStr for FeatureScale {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(FeatureScale::Raw),
            "demand" => Ok(FeatureScale::Demand),
            "capacity" => Ok(FeatureScale::Capacity),
            other => other
                .parse::<f64>()
                .ok()
                .filter(|c| c.is_finite() && *c > 0.0)
                .map(FeatureScale::Constant)
                .ok_or_else(|| Error::Config(format!("unknown feature scale {s:?} (raw|demand|capacity|<positive number>)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainerConfig {
    pub periods: u64,
    pub lambda: f64,
    pub alpha_num: f64,
    pub alpha_den: f64,
    pub eps_decay: f64,
    pub seed: u64,
    pub mask: FeatureMask,
    pub scale: FeatureScale,
    /// Log every this many periods; 0 disables the log.
    pub log_interval: u64,
    /// Starting post-decision state; all zeros when unset.
    pub initial: Option<PostDecisionState>,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            periods: 100_000,
            lambda: 0.9,
            alpha_num: 40.0,
            alpha_den: 5000.0,
            eps_decay: 0.999983,
            seed: 0,
            mask: FeatureMask::FULL,
            scale: FeatureScale::Demand,
            log_interval: 1000,
            initial: None,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config(format!("lambda must lie in [0, 1], got {}", self.lambda)));
        }
        if !(self.alpha_num > 0.0) || !(self.alpha_den > 0.0) {
            return Err(Error::Config("learning-rate numerator and denominator must be positive".into()));
        }
        if !(self.eps_decay > 0.0 && self.eps_decay <= 1.0) {
            return Err(Error::Config(format!("eps_decay must lie in (0, 1], got {}", self.eps_decay)));
        }
        Ok(())
    }

    /// Learning rate at period counter `t >= 1`.
    pub fn alpha(&self, t: u64) -> f64 {
        self.alpha_num / (self.alpha_den + t as f64 - 1.0)
    }

    /// Exploration probability at period counter `t`.
    pub fn epsilon(&self, t: u64) -> f64 {
        self.eps_decay.powf(t as f64)
    }
}

/// Everything the trainer carries between periods.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub w: WeightVector,
    pub cbar: f64,
    pub z: Vec<f64>,
    pub t: u64,
    pub s: PostDecisionState,
}

impl TrainState {
    pub fn new(w: WeightVector, s: PostDecisionState) -> Self {
        let d = w.dim();
        TrainState {
            w,
            cbar: 0.0,
            z: vec![0.0; d],
            t: 0,
            s,
        }
    }

    /// The TD update for one observed transition `s -> s_next` with stage
    /// cost `c_s` and action cost `c_x`. Returns the TD error.
    pub fn apply_td(&mut self, c_s: f64, c_x: f64, s_next: PostDecisionState, alpha: f64, lambda: f64) -> f64 {
        let delta = c_s + c_x + self.w.value(&s_next) - self.cbar - self.w.value(&self.s);
        self.cbar += alpha * delta;
        let psi = self.w.feature_vector(&self.s);
        for (z, p) in self.z.iter_mut().zip(psi) {
            *z = lambda * *z + p;
        }
        self.w.add_scaled(&self.z, alpha * delta);
        self.s = s_next;
        delta
    }
}

/// What happened in one training period.
#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub period: u64,
    /// Post-decision state the period started from.
    pub from: PostDecisionState,
    pub action: Action,
    pub explored: bool,
    pub stage_cost: f64,
    pub action_cost: f64,
    pub delta: f64,
    pub alpha: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub period: u64,
    pub cbar: f64,
    pub epsilon: f64,
    pub alpha: f64,
    pub delta: f64,
}

pub fn write_log<W: Write>(rows: &[LogRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["period", "cbar", "epsilon", "alpha", "delta"])?;
    for r in rows {
        w.write_record([
            r.period.to_string(),
            r.cbar.to_string(),
            r.epsilon.to_string(),
            r.alpha.to_string(),
            r.delta.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// A single online trainer over one instance.
pub struct Trainer<'a> {
    inst: &'a Instance,
    cfg: TrainerConfig,
    stream: RealizationStream,
    explore: ChaCha8Rng,
    state: TrainState,
}

impl<'a> Trainer<'a> {
    pub fn new(inst: &'a Instance, cfg: TrainerConfig) -> Result<Self> {
        cfg.validate()?;
        let w = WeightVector::with_scale(cfg.scale.scales(inst), cfg.mask)?;
        let s = cfg.initial.clone().unwrap_or_else(|| PostDecisionState::zeros(inst.n_locations()));
        if s.inv.len() != inst.n_locations() {
            return Err(Error::Config("initial state has the wrong dimension".into()));
        }
        Ok(Trainer {
            inst,
            stream: RealizationStream::new(derive_seed(cfg.seed, TAG_REALIZATION), inst.n_locations()),
            explore: policy_rng(cfg.seed, TAG_EXPLORE),
            state: TrainState::new(w, s),
            cfg,
        })
    }

    pub fn state(&self) -> &TrainState {
        &self.state
    }

    pub fn into_state(self) -> TrainState {
        self.state
    }

    /// One pass of the training loop body.
    pub fn step(&mut self) -> Result<StepInfo> {
        let inst = self.inst;
        let st = &mut self.state;
        let period = st.t;
        st.t += 1;
        let alpha = self.cfg.alpha(st.t);
        let epsilon = self.cfg.epsilon(st.t);
        let phi = self.stream.realization(period, inst);
        let c_s = stage_cost(inst, &st.s, &phi);
        let x: State = transition(inst, &st.s, &phi);
        let explored = self.explore.random::<f64>() < epsilon;
        let action = if explored {
            random_action(inst, &x, &mut self.explore)
        } else {
            best_action_with_table(inst, &ValueTable::new(inst, &st.w), &x).action
        };
        let c_x = action_cost(inst, &action);
        let from = st.s.clone();
        let delta = st.apply_td(c_s, c_x, post_decision(&x, &action), alpha, self.cfg.lambda);
        if !delta.is_finite() || delta.abs() > DELTA_LIMIT {
            return Err(Error::Divergence {
                period,
                alpha,
                message: format!("TD error {delta} beyond {DELTA_LIMIT}"),
            });
        }
        if !st.w.is_finite() || st.w.max_abs() > WEIGHT_LIMIT {
            return Err(Error::Divergence {
                period,
                alpha,
                message: format!("weight magnitude {} beyond {WEIGHT_LIMIT}", st.w.max_abs()),
            });
        }
        Ok(StepInfo {
            period,
            from,
            action,
            explored,
            stage_cost: c_s,
            action_cost: c_x,
            delta,
            alpha,
            epsilon,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub weights: WeightVector,
    pub cbar: f64,
    pub log: Vec<LogRow>,
}

impl Trained {
    pub fn save_log(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        write_log(&self.log, file)
    }
}

/// Runs `cfg.periods` training periods.
pub fn train(inst: &Instance, cfg: &TrainerConfig) -> Result<Trained> {
    let mut trainer = Trainer::new(inst, cfg.clone())?;
    let mut log = Vec::new();
    for _ in 0..cfg.periods {
        let info = trainer.step()?;
        let t = info.period + 1;
        if cfg.log_interval > 0 && (t % cfg.log_interval == 0 || t == cfg.periods) {
            log.push(LogRow {
                period: t,
                cbar: trainer.state.cbar,
                epsilon: info.epsilon,
                alpha: info.alpha,
                delta: info.delta,
            });
        }
    }
    let st = trainer.into_state();
    Ok(Trained {
        weights: st.w,
        cbar: st.cbar,
        log,
    })
}

/// Acts greedily with frozen weights.
#[derive(Debug, Clone)]
pub struct GreedyPolicy<'a> {
    inst: &'a Instance,
    table: ValueTable,
}

impl<'a> GreedyPolicy<'a> {
    pub fn decide(&self, x: &State) -> Action {
        best_action_with_table(self.inst, &self.table, x).action
    }
}

impl Policy for GreedyPolicy<'_> {
    fn act(&mut self, _period: u64, x: &State) -> Action {
        self.decide(x)
    }
}

pub fn greedy_policy<'a>(inst: &'a Instance, wv: &WeightVector) -> GreedyPolicy<'a> {
    GreedyPolicy {
        inst,
        table: ValueTable::new(inst, wv),
    }
}
