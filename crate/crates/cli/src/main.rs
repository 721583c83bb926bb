use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use dirp::action_solver::{FeatureMask, WeightVector};
use dirp::bench::{self, ExperimentSpec, Protocol, ABLATION_MASKS, EPS_DECAYS, HORIZONS};
use dirp::crl::{greedy_policy, train, FeatureScale, TrainerConfig};
use dirp::dynamics::{simulate, Policy, SimOptions, SimReport, ZeroPolicy};
use dirp::heuristics::{po2_heuristic, ss_heuristic, EvalProtocol, Po2Config, SsConfig};
use dirp::instance::{generate, Family, GenOptions, Instance};
use dirp::lcrl::{Lookahead, LookaheadConfig};
use dirp::vi::{parse_axis, parse_fixed, policy_slice, value_iteration, PolicyTable, TablePolicy, ViConfig};

#[derive(Parser)]
#[command(name = "dirp", version, about = "Dynamic inventory routing solver laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded instance file.
    Gen(GenArgs),
    /// Train value function weights with CRL.
    TrainCrl(TrainArgs),
    /// Solve a small instance exactly and write the policy table.
    Vi(ViArgs),
    /// Export a 2-D slice of a solved policy table.
    Slice(SliceArgs),
    /// Run the (s,S) selection heuristic.
    Ss(SsArgs),
    /// Run the power-of-two cyclic heuristic.
    Po2(Po2Args),
    /// Simulate a policy and write its cost report.
    Simulate(SimulateArgs),
    /// Compare methods over an experiment grid.
    Compare(ExperimentArgs),
    /// Train CRL once per basis mask.
    Ablate(AblateArgs),
    /// Sweep the exploration decay or the lookahead horizon.
    Sweep(SweepArgs),
    /// Export value curves of CRL weights next to the exact-value regression.
    Curves(CurvesArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Toy,
    Main,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Toy => Family::Toy,
            FamilyArg::Main => Family::Main,
        }
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    family: FamilyArg,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    q: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    dstd_mult: f64,
    #[arg(long, default_value_t = 1.0)]
    sstd_mult: f64,
    #[arg(long, default_value_t = 1.0)]
    cap_mult: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value_t = 100_000)]
    periods: u64,
    #[arg(long, default_value_t = 0.9)]
    lambda: f64,
    #[arg(long, default_value_t = 40.0)]
    alpha_num: f64,
    #[arg(long, default_value_t = 5000.0)]
    alpha_den: f64,
    #[arg(long, default_value_t = 0.999983)]
    eps_decay: f64,
    /// Basis mask over (s, s2, s3, sqrt), e.g. 1011.
    #[arg(long, default_value = "1111")]
    mask: String,
    /// Feature scale: demand, capacity, raw or a positive number.
    #[arg(long, default_value = "demand")]
    scale: String,
    #[arg(long, default_value_t = 1000)]
    log_interval: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct ViArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value_t = 0.01)]
    eps: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iters: u32,
    #[arg(long, default_value_t = 2_000_000)]
    max_states: u64,
    /// Unused by the deterministic solver; accepted for uniformity.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SliceArgs {
    /// Policy table written by `vi`.
    #[arg(long)]
    policy: PathBuf,
    /// Instance the table was solved for.
    #[arg(long)]
    instance: PathBuf,
    /// Fixed levels, e.g. "x0=14,x1=0".
    #[arg(long, default_value = "")]
    fix: String,
    /// Two varying locations, e.g. "x2,x3".
    #[arg(long)]
    axes: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimFlags {
    #[arg(long, default_value_t = 10_000)]
    sim_periods: u64,
    #[arg(long, default_value_t = 1000)]
    sim_warmup: u64,
}

#[derive(Args)]
struct SsArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Initial budget decrement as a fraction of the fleet.
    #[arg(long, default_value_t = 0.01)]
    xi0: f64,
    #[arg(long, default_value_t = 1.1)]
    m: f64,
    #[arg(long, default_value_t = 20)]
    tstar: u32,
    #[arg(long, default_value_t = 1)]
    step: u32,
    #[arg(long, default_value_t = 1_000_000)]
    eval_periods: u64,
    #[arg(long, default_value_t = 50)]
    eval_episodes: u64,
    #[command(flatten)]
    sim: SimFlags,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Selected (s,S) levels as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Simulation report CSV.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct Po2Args {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value_t = 4)]
    tau: u32,
    #[command(flatten)]
    sim: SimFlags,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Selected intervals, levels and offsets as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Simulation report CSV.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyKind {
    Zero,
    Crl,
    Lcrl,
    Ss,
    Po2,
    Vi,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_enum)]
    policy: PolicyKind,
    /// Weight file for crl and lcrl.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Policy table for vi; solved on the fly when omitted.
    #[arg(long)]
    table: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    periods: u64,
    #[arg(long, default_value_t = 1000)]
    warmup: u64,
    #[arg(long, default_value_t = 20)]
    scenarios: usize,
    #[arg(long, default_value_t = 1)]
    horizon: u32,
    /// Search time limit per decision in seconds.
    #[arg(long, default_value_t = 120.0)]
    time_limit: f64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Record every period in the report.
    #[arg(long)]
    trace: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment spec (TOML).
    #[arg(long)]
    spec: PathBuf,
    /// Replace the protocol with the full-length budgets.
    #[arg(long)]
    full: bool,
    /// Run only this seed instead of the spec's list.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
    /// Comma-separated masks; defaults to the eight standard rows.
    #[arg(long)]
    masks: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepKind {
    Eps,
    Horizon,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
    #[arg(long, value_enum)]
    kind: SweepKind,
    /// Comma-separated values; defaults to the standard grid.
    #[arg(long)]
    values: Option<String>,
}

#[derive(Args)]
struct CurvesArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value_t = 1)]
    location: usize,
    #[arg(long, default_value = "16,40,100")]
    alpha_nums: String,
    #[arg(long, default_value_t = 100_000)]
    periods: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn writer(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn emit_report(report: &SimReport, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => report.save_csv(p)?,
        None => report.write_csv(std::io::stdout().lock())?,
    }
    Ok(())
}

fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse::<T>().map_err(|e| anyhow::anyhow!("bad list entry {t:?}: {e}")))
        .collect()
}

fn load_spec(args: &ExperimentArgs) -> Result<ExperimentSpec> {
    let mut spec = ExperimentSpec::load(&args.spec)?;
    if args.full {
        spec.protocol = Protocol::full();
    }
    if let Some(seed) = args.seed {
        spec.seeds = vec![seed];
    }
    Ok(spec)
}

fn write_variants(table: &bench::VariantTable, dir: &Path, name: &str) -> Result<()> {
    table.write_csv(writer(&dir.join(format!("{name}.csv")))?)?;
    bench::write_timings(&table.timings, writer(&dir.join(format!("{name}_timings.csv")))?)?;
    for r in &table.rows {
        println!("{:<24} mean {:>12.4}  delta {:>8.2}%", r.label, r.mean_cost, r.delta_pct);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(a) => {
            let opts = GenOptions {
                demand_std_mult: a.dstd_mult,
                supply_std_mult: a.sstd_mult,
                capacity_mult: a.cap_mult,
            };
            let inst = generate(a.family.into(), a.n, a.q, a.seed, opts)?;
            inst.save(&a.out)?;
            println!("wrote {} ({} states)", a.out.display(), inst.state_space_size());
        }
        Command::TrainCrl(a) => {
            let inst = Instance::load(&a.instance)?;
            let mask: FeatureMask = a.mask.parse()?;
            let cfg = TrainerConfig {
                periods: a.periods,
                lambda: a.lambda,
                alpha_num: a.alpha_num,
                alpha_den: a.alpha_den,
                eps_decay: a.eps_decay,
                seed: a.seed,
                mask,
                scale: a.scale.parse::<FeatureScale>()?,
                log_interval: a.log_interval,
                ..TrainerConfig::default()
            };
            let trained = train(&inst, &cfg)?;
            trained.weights.save(&a.out)?;
            if let Some(log) = &a.log {
                trained.save_log(log)?;
            }
            println!("wrote {} (average cost estimate {:.4})", a.out.display(), trained.cbar);
        }
        Command::Vi(a) => {
            let inst = Instance::load(&a.instance)?;
            let cfg = ViConfig {
                eps: a.eps,
                max_iters: a.max_iters,
                max_states: a.max_states,
            };
            let table = value_iteration(&inst, &cfg)?;
            table.save(&a.out)?;
            println!(
                "gain {:.6} after {} iterations (span {:.3e}, converged {})",
                table.gain, table.iterations, table.span, table.converged
            );
            if !table.converged {
                bail!("value iteration did not converge within {} iterations", a.max_iters);
            }
        }
        Command::Slice(a) => {
            let inst = Instance::load(&a.instance)?;
            let table = PolicyTable::load(&a.policy, inst.vehicle_capacity)?;
            let fixed = parse_fixed(&a.fix)?;
            let axes = match &a.axes {
                Some(s) => {
                    let parts: Vec<&str> = s.split(',').collect();
                    if parts.len() != 2 {
                        bail!("--axes needs two locations, e.g. x2,x3");
                    }
                    Some((parse_axis(parts[0])?, parse_axis(parts[1])?))
                }
                None => None,
            };
            let slice = policy_slice(&table, &fixed, axes)?;
            slice.write_csv(writer(&a.out)?)?;
        }
        Command::Ss(a) => {
            let inst = Instance::load(&a.instance)?;
            let cfg = SsConfig {
                protocol: EvalProtocol {
                    periods: a.eval_periods,
                    episodes: a.eval_episodes,
                    ..EvalProtocol::default()
                },
                step: a.step,
                xi0_frac: a.xi0,
                m: a.m,
                tstar: a.tstar,
                sim_periods: a.sim.sim_periods,
                sim_warmup: a.sim.sim_warmup,
                seed: a.seed,
            };
            let out = ss_heuristic(&inst, &cfg)?;
            let mut w: Box<dyn Write> = match &a.out {
                Some(p) => Box::new(writer(p)?),
                None => Box::new(std::io::stdout().lock()),
            };
            writeln!(w, "customer,s,S")?;
            for (i, (s, big_s)) in out.levels.iter().enumerate() {
                writeln!(w, "{},{s},{big_s}", i + 1)?;
            }
            w.flush()?;
            drop(w);
            emit_report(&out.report, a.report.as_deref())?;
        }
        Command::Po2(a) => {
            let inst = Instance::load(&a.instance)?;
            let cfg = Po2Config {
                tau: a.tau,
                sim_periods: a.sim.sim_periods,
                sim_warmup: a.sim.sim_warmup,
                seed: a.seed,
            };
            let out = po2_heuristic(&inst, &cfg)?;
            let mut w: Box<dyn Write> = match &a.out {
                Some(p) => Box::new(writer(p)?),
                None => Box::new(std::io::stdout().lock()),
            };
            writeln!(w, "customer,interval,order_up_to,offset,expected_cost")?;
            for (k, c) in out.selected.iter().enumerate() {
                writeln!(w, "{},{},{},{},{:.6}", c.customer, c.interval, c.order_up_to, out.schedule.offsets[k], c.cost)?;
            }
            w.flush()?;
            drop(w);
            emit_report(&out.report, a.report.as_deref())?;
        }
        Command::Simulate(a) => {
            let inst = Instance::load(&a.instance)?;
            let opts = SimOptions {
                trace: a.trace,
                ..SimOptions::default()
            };
            let weights = || -> Result<WeightVector> {
                let p = a.weights.as_ref().context("--weights is required for this policy")?;
                Ok(WeightVector::load(p)?)
            };
            let table;
            let wv;
            let ss_out;
            let po2_out;
            let mut policy: Box<dyn Policy + '_> = match a.policy {
                PolicyKind::Zero => Box::new(ZeroPolicy {
                    customers: inst.n_customers(),
                }),
                PolicyKind::Crl => {
                    wv = weights()?;
                    Box::new(greedy_policy(&inst, &wv))
                }
                PolicyKind::Lcrl => {
                    wv = weights()?;
                    let cfg = LookaheadConfig {
                        horizon: a.horizon,
                        n_scenarios: a.scenarios,
                        time_limit: Duration::from_secs_f64(a.time_limit.max(0.0)),
                        seed: a.seed,
                        workers: a.workers,
                        ..LookaheadConfig::default()
                    };
                    Box::new(Lookahead::new(&inst, &wv, cfg)?)
                }
                PolicyKind::Ss => {
                    ss_out = ss_heuristic(&inst, &SsConfig { seed: a.seed, ..SsConfig::default() })?;
                    Box::new(ss_out.policy(&inst, a.seed))
                }
                PolicyKind::Po2 => {
                    po2_out = po2_heuristic(&inst, &Po2Config { seed: a.seed, ..Po2Config::default() })?;
                    Box::new(po2_out.policy(&inst, a.seed))
                }
                PolicyKind::Vi => {
                    table = match &a.table {
                        Some(p) => PolicyTable::load(p, inst.vehicle_capacity)?,
                        None => value_iteration(&inst, &ViConfig::default())?,
                    };
                    Box::new(TablePolicy { table: &table })
                }
            };
            let report = simulate(&inst, policy.as_mut(), a.periods, a.warmup, a.seed, &opts)?;
            emit_report(&report, a.out.as_deref())?;
            eprintln!("average cost {:.6}", report.average_cost());
        }
        Command::Compare(a) => {
            let spec = load_spec(&a)?;
            let cmp = bench::compare(&spec)?;
            let (results, timings) = cmp.save(&a.out_dir)?;
            for (m, c) in cmp.mean_costs() {
                println!("{m:<6} mean cost {c:.4}");
            }
            println!("wrote {} and {}", results.display(), timings.display());
        }
        Command::Ablate(a) => {
            let spec = load_spec(&a.exp)?;
            let masks: Vec<FeatureMask> = match &a.masks {
                Some(s) => parse_list(s)?,
                None => ABLATION_MASKS.iter().map(|m| m.parse()).collect::<dirp::Result<_>>()?,
            };
            let table = bench::ablate_basis(&spec, &masks)?;
            write_variants(&table, &a.exp.out_dir, "ablation")?;
        }
        Command::Sweep(a) => {
            let spec = load_spec(&a.exp)?;
            let table = match a.kind {
                SweepKind::Eps => {
                    let decays = match &a.values {
                        Some(s) => parse_list(s)?,
                        None => EPS_DECAYS.to_vec(),
                    };
                    bench::sweep_eps(&spec, &decays)?
                }
                SweepKind::Horizon => {
                    let hs = match &a.values {
                        Some(s) => parse_list(s)?,
                        None => HORIZONS.to_vec(),
                    };
                    bench::sweep_horizon(&spec, &hs)?
                }
            };
            let name = match a.kind {
                SweepKind::Eps => "sweep_eps",
                SweepKind::Horizon => "sweep_horizon",
            };
            write_variants(&table, &a.exp.out_dir, name)?;
        }
        Command::Curves(a) => {
            let inst = Instance::load(&a.instance)?;
            let protocol = Protocol {
                train_periods: a.periods,
                ..Protocol::default()
            };
            let alphas: Vec<f64> = parse_list(&a.alpha_nums)?;
            let curves = bench::learning_rate_curves(&inst, &protocol, &alphas, a.location, a.seed)?;
            curves.write_csv(writer(&a.out)?)?;
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
