//! Acceptance run: one PASS/FAIL line per criterion, exit code 1 if any fail.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dirp::action_solver::{best_action, brute_force_action, random_action, FeatureMask};
use dirp::bench::{ablate_basis, simulation_seed, ExperimentSpec, Method, Protocol};
use dirp::crl::{greedy_policy, train, Trainer, TrainerConfig};
use dirp::dynamics::{
    is_feasible, post_decision, simulate, stage_breakdown, stage_cost, transition, Policy, SimOptions, State,
};
use dirp::fixtures;
use dirp::heuristics::{po2_heuristic, ss_heuristic, EvalProtocol, Po2Config, Schedule, SsConfig};
use dirp::instance::{gen_main, gen_toy, Family, Instance};
use dirp::lcrl::{Lookahead, LookaheadConfig};
use dirp::vi::{value_iteration, TablePolicy, ViConfig};

type Check = Result<(bool, String), String>;

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn sim(inst: &Instance, policy: &mut dyn Policy, periods: u64, warmup: u64) -> Result<f64, String> {
    simulate(inst, policy, periods, warmup, simulation_seed(inst.seed), &SimOptions::default())
        .map(|r| r.average_cost())
        .map_err(err)
}

fn gap(cost: f64, reference: f64) -> f64 {
    (cost - reference) / reference.abs() * 100.0
}

fn random_state<R: Rng>(inst: &Instance, rng: &mut R) -> State {
    State::new(inst.capacities().iter().map(|&c| rng.random_range(0..=c)).collect())
}

fn toy_trainer(seed: u64, periods: u64) -> TrainerConfig {
    TrainerConfig {
        periods,
        seed,
        log_interval: 0,
        ..TrainerConfig::default()
    }
}

fn c1_action_solver() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let started = Instant::now();
    let mut mismatches = 0;
    for _ in 0..200 {
        let (inst, x) = fixtures::micro_instance(&mut rng);
        let wv = fixtures::random_weights(&inst, &mut rng);
        let dp = best_action(&inst, &x, &wv);
        let bf = brute_force_action(&inst, &x, &wv, 5_000_000).map_err(err)?;
        if dp.objective != bf.objective || dp.action != bf.action {
            mismatches += 1;
        }
    }
    let secs = started.elapsed().as_secs_f64();
    Ok((mismatches == 0 && secs < 60.0, format!("{mismatches} mismatches on 200 instances in {secs:.2}s")))
}

fn c2_cost_formula() -> Check {
    let inst = fixtures::worked_example();
    let s = post_decision(&fixtures::worked_state(), &fixtures::worked_action());
    let phi = fixtures::worked_realization();
    let c = stage_cost(&inst, &s, &phi);
    let next = transition(&inst, &s, &phi);
    let sold = -stage_breakdown(&inst, &s, &phi).sales / inst.costs.rho;
    let pass = c == 76.5 && next.inv == vec![18, 5, 0, 2] && sold == 1.0;
    Ok((pass, format!("c_s = {c}, x' = {:?}, overflow sold = {sold}", next.inv)))
}

fn c3_vi_consistency() -> Check {
    let mut worst: f64 = 0.0;
    let mut detail = Vec::new();
    for seed in 0..3 {
        let inst = gen_toy(3, 2, seed).map_err(err)?;
        let started = Instant::now();
        let table = value_iteration(&inst, &ViConfig::default()).map_err(err)?;
        let avg = sim(&inst, &mut TablePolicy { table: &table }, 1_000_000, 1000)?;
        let g = gap(avg, table.gain).abs();
        worst = worst.max(g);
        detail.push(format!("g={:.3} sim={avg:.3} ({:.1}s)", table.gain, started.elapsed().as_secs_f64()));
        if started.elapsed() > Duration::from_secs(600) {
            return Ok((false, format!("seed {seed} exceeded 10 minutes")));
        }
    }
    Ok((worst <= 2.0, format!("max |gap| {worst:.3}%: {}", detail.join(", "))))
}

struct ToyRun {
    gaps: [f64; 4],
    lcrl: f64,
    crl_window: f64,
}

/// Full budgets on one toy instance: 100K training, 60K/1K simulation,
/// 1M-period (s,S) candidate evaluation. LCRL runs 10K/20 periods and is
/// compared to VI and CRL over that same window.
fn toy_run(seed: u64) -> Result<ToyRun, String> {
    let inst = gen_toy(3, 2, seed).map_err(err)?;
    let table = value_iteration(&inst, &ViConfig::default()).map_err(err)?;
    let vi = sim(&inst, &mut TablePolicy { table: &table }, 61_000, 1000)?;
    let w = train(&inst, &toy_trainer(seed, 100_000)).map_err(err)?.weights;
    let crl = sim(&inst, &mut greedy_policy(&inst, &w), 61_000, 1000)?;
    let ss = ss_heuristic(&inst, &SsConfig { seed, ..SsConfig::default() }).map_err(err)?;
    let ss_cost = sim(&inst, &mut ss.policy(&inst, seed), 61_000, 1000)?;
    let po2 = po2_heuristic(&inst, &Po2Config { seed, ..Po2Config::default() }).map_err(err)?;
    let po2_cost = sim(&inst, &mut po2.policy(&inst, seed), 61_000, 1000)?;
    let cfg = LookaheadConfig { seed, ..LookaheadConfig::default() };
    let mut la = Lookahead::new(&inst, &w, cfg).map_err(err)?;
    let lcrl = sim(&inst, &mut la, 10_020, 20)?;
    let vi_window = sim(&inst, &mut TablePolicy { table: &table }, 10_020, 20)?;
    let crl_window = sim(&inst, &mut greedy_policy(&inst, &w), 10_020, 20)?;
    Ok(ToyRun {
        gaps: [gap(crl, vi), gap(lcrl, vi_window), gap(ss_cost, vi), gap(po2_cost, vi)],
        lcrl,
        crl_window,
    })
}

fn c4_c6_toy_gaps() -> (Check, Check) {
    let runs: Result<Vec<ToyRun>, String> = (0..10).map(toy_run).collect();
    let runs = match runs {
        Ok(r) => r,
        Err(e) => return (Err(e.clone()), Err(e)),
    };
    let mean = |k: usize| runs.iter().map(|r| r.gaps[k]).sum::<f64>() / runs.len() as f64;
    let m = [mean(0), mean(1), mean(2), mean(3)];
    let c4 = Ok((
        m[0] <= 5.0 && m[1] <= 5.0 && m[2] <= 8.0 && m[3] <= 12.0,
        format!("mean gap vs VI: CRL {:.2}%, LCRL {:.2}%, (s,S) {:.2}%, PO2 {:.2}%", m[0], m[1], m[2], m[3]),
    ));
    let lcrl = runs.iter().map(|r| r.lcrl).sum::<f64>() / runs.len() as f64;
    let crl = runs.iter().map(|r| r.crl_window).sum::<f64>() / runs.len() as f64;
    let better = runs.iter().filter(|r| r.lcrl <= r.crl_window).count();
    let c6 = Ok((
        lcrl <= crl,
        format!("mean LCRL {lcrl:.3} vs CRL {crl:.3} over 10 instances (LCRL no worse on {better})"),
    ));
    (c4, c6)
}

fn c5_empty_horizon() -> Check {
    let inst = gen_toy(3, 2, 11).map_err(err)?;
    let w = train(&inst, &toy_trainer(11, 20_000)).map_err(err)?.weights;
    let la = Lookahead::new(&inst, &w, LookaheadConfig { horizon: 0, ..LookaheadConfig::default() }).map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut differ = 0;
    for _ in 0..100 {
        let x = random_state(&inst, &mut rng);
        if la.decide(&x) != best_action(&inst, &x, &w).action {
            differ += 1;
        }
    }
    Ok((differ == 0, format!("{differ} of 100 states differ")))
}

fn c7_ordering() -> Check {
    let mut ordered = 0;
    let mut detail = Vec::new();
    for seed in 0..3 {
        let inst = gen_main(9, 5, seed).map_err(err)?;
        let w = train(&inst, &TrainerConfig { periods: 100_000, seed, log_interval: 0, ..TrainerConfig::default() })
            .map_err(err)?
            .weights;
        let crl = sim(&inst, &mut greedy_policy(&inst, &w), 11_000, 1000)?;
        let cfg = SsConfig {
            protocol: EvalProtocol { periods: 50_000, episodes: 5, ..EvalProtocol::default() },
            step: 2,
            seed,
            ..SsConfig::default()
        };
        let ss = ss_heuristic(&inst, &cfg).map_err(err)?;
        let ss_cost = sim(&inst, &mut ss.policy(&inst, seed), 11_000, 1000)?;
        let po2 = po2_heuristic(&inst, &Po2Config { seed, ..Po2Config::default() }).map_err(err)?;
        let po2_cost = sim(&inst, &mut po2.policy(&inst, seed), 11_000, 1000)?;
        if crl < ss_cost && ss_cost < po2_cost {
            ordered += 1;
        }
        detail.push(format!("{crl:.1}/{ss_cost:.1}/{po2_cost:.1}"));
    }
    Ok((ordered >= 2, format!("ordered on {ordered} of 3 seeds (CRL/(s,S)/PO2: {})", detail.join(", "))))
}

fn c8_po2_schedules() -> Check {
    let mut verified = 0;
    for seed in 0..20 {
        let inst = if seed % 2 == 0 { gen_toy(3, 2, seed) } else { gen_main(9, 5, seed) }.map_err(err)?;
        let out = po2_heuristic(&inst, &Po2Config { seed, sim_periods: 2000, sim_warmup: 100, ..Po2Config::default() })
            .map_err(err)?;
        out.schedule.verify(inst.q).map_err(err)?;
        verified += 1;
    }
    let mut any_offsets_fit = false;
    for o2 in 0..2 {
        for o3 in 0..3 {
            let s = Schedule { intervals: vec![1, 2, 3], offsets: vec![0, o2, o3] };
            any_offsets_fit |= s.verify(2).is_ok();
        }
    }
    let built_fails = Schedule::build(&[1, 2, 3]).map_err(err)?.verify(2).is_err();
    let pass = verified == 20 && !any_offsets_fit && built_fails;
    Ok((pass, format!("{verified} of 20 schedules verified; intervals (1,2,3) with q=2 fit under some offsets: {any_offsets_fit}")))
}

fn c9_ablation() -> Check {
    let mut spec = ExperimentSpec::new(Family::Main, vec![(9, 5)], vec![0, 1, 2], vec![Method::Crl]);
    spec.protocol = Protocol { train_periods: 50_000, ..Protocol::default() };
    let masks = [FeatureMask::FULL, "1000".parse().map_err(err)?];
    let table = ablate_basis(&spec, &masks).map_err(err)?;
    let full = table.row("1111").expect("full row");
    let lin = table.row("1000").expect("linear row");
    Ok((
        lin.mean_cost > full.mean_cost,
        format!("full {:.2}, s-only {:.2} ({:+.1}%)", full.mean_cost, lin.mean_cost, lin.delta_pct),
    ))
}

fn c10_invariants() -> Check {
    let started = Instant::now();
    let mut notes = Vec::new();

    // Every policy over simulated periods; simulate rejects infeasible
    // actions, broken inventory bounds and flow imbalance.
    let inst = gen_toy(3, 2, 21).map_err(err)?;
    let w = train(&inst, &toy_trainer(21, 20_000)).map_err(err)?.weights;
    let table = value_iteration(&inst, &ViConfig::default()).map_err(err)?;
    let ss = ss_heuristic(
        &inst,
        &SsConfig { protocol: EvalProtocol { periods: 20_000, episodes: 4, ..EvalProtocol::default() }, ..SsConfig::default() },
    )
    .map_err(err)?;
    let po2 = po2_heuristic(&inst, &Po2Config::default()).map_err(err)?;
    let la_cfg = LookaheadConfig { n_scenarios: 5, ..LookaheadConfig::default() };
    let la = Lookahead::new(&inst, &w, la_cfg.clone()).map_err(err)?;
    let explorer = {
        let inst = &inst;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        move |_t: u64, x: &State| random_action(inst, x, &mut rng)
    };
    let policies: Vec<(&str, Box<dyn Policy + '_>, u64)> = vec![
        ("crl", Box::new(greedy_policy(&inst, &w)), 10_000),
        ("vi", Box::new(TablePolicy { table: &table }), 10_000),
        ("ss", Box::new(ss.policy(&inst, 1)), 10_000),
        ("po2", Box::new(po2.policy(&inst, 1)), 10_000),
        ("lcrl", Box::new(la), 500),
        ("random", Box::new(explorer), 10_000),
    ];
    for (name, mut p, periods) in policies {
        simulate(&inst, p.as_mut(), periods, 0, 3, &SimOptions::default()).map_err(|e| format!("{name}: {e}"))?;
    }
    notes.push("6 policies feasible".to_string());

    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..100_000 {
        let (m, x) = fixtures::micro_instance(&mut rng);
        let a = random_action(&m, &x, &mut rng);
        if !is_feasible(&m, &x, &a) {
            return Ok((false, "infeasible random action".into()));
        }
    }

    for seed in 0..20 {
        for inst in [gen_toy(3, 2, seed).map_err(err)?, gen_main(9, 5, seed).map_err(err)?] {
            for i in 0..inst.n_locations() {
                let total: f64 = inst.distribution(i).probs().iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Ok((false, format!("distribution sums to {total}")));
                }
            }
        }
    }
    notes.push("distributions normalized".into());

    let lambda = 0.9;
    let mut trainer = Trainer::new(&inst, TrainerConfig { lambda, ..toy_trainer(4, 100) }).map_err(err)?;
    let mut froms = Vec::new();
    for _ in 0..100 {
        froms.push(trainer.step().map_err(err)?.from);
    }
    let state = trainer.into_state();
    let mut expected = vec![0.0; state.z.len()];
    for (k, s) in froms.iter().enumerate() {
        let decay = lambda.powi((froms.len() - 1 - k) as i32);
        for (e, f) in expected.iter_mut().zip(state.w.feature_vector(s)) {
            *e += decay * f;
        }
    }
    let trace_err = expected.iter().zip(&state.z).map(|(a, b)| (a - b).abs() / a.abs().max(1.0)).fold(0.0, f64::max);
    if trace_err > 1e-9 {
        return Ok((false, format!("trace deviates by {trace_err:e}")));
    }
    notes.push("trace closed form".into());

    let again = gen_toy(3, 2, 21).map_err(err)?;
    let w2 = train(&again, &toy_trainer(21, 20_000)).map_err(err)?.weights;
    let ss2 = ss_heuristic(
        &again,
        &SsConfig { protocol: EvalProtocol { periods: 20_000, episodes: 4, ..EvalProtocol::default() }, ..SsConfig::default() },
    )
    .map_err(err)?;
    let po2b = po2_heuristic(&again, &Po2Config::default()).map_err(err)?;
    let la1 = Lookahead::new(&inst, &w, la_cfg.clone()).map_err(err)?;
    let la2 = Lookahead::new(&again, &w2, la_cfg).map_err(err)?;
    let x = State::new(vec![3, 1, 0, 2]);
    let deterministic = again == inst
        && w2 == w
        && ss2.levels == ss.levels
        && po2b.selected == po2.selected
        && la2.decide(&x) == la1.decide(&x)
        && value_iteration(&again, &ViConfig::default()).map_err(err)?.post_values == table.post_values;
    if !deterministic {
        return Ok((false, "a seeded entry point is not deterministic".into()));
    }
    notes.push("seeded entry points deterministic".into());
    let secs = started.elapsed().as_secs_f64();
    Ok((secs < 300.0, format!("{} in {secs:.1}s", notes.join(", "))))
}

fn report(id: u32, name: &str, check: Check, elapsed: Duration, failures: &mut u32) {
    let (pass, detail) = match check {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    if !pass {
        *failures += 1;
    }
    println!(
        "criterion {id:>2} {}: {name}: {detail} [{:.1}s]",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
}

fn main() {
    let mut failures = 0;
    let timed = |f: fn() -> Check| {
        let t = Instant::now();
        let r = f();
        (r, t.elapsed())
    };
    let (r, t) = timed(c1_action_solver);
    report(1, "action solver matches enumeration", r, t, &mut failures);
    let (r, t) = timed(c2_cost_formula);
    report(2, "worked example costs", r, t, &mut failures);
    let (r, t) = timed(c3_vi_consistency);
    report(3, "VI gain matches simulation", r, t, &mut failures);
    let started = Instant::now();
    let (c4, c6) = c4_c6_toy_gaps();
    let t46 = started.elapsed();
    report(4, "toy optimality gaps", c4, t46, &mut failures);
    let (r, t) = timed(c5_empty_horizon);
    report(5, "empty lookahead equals greedy", r, t, &mut failures);
    report(6, "lookahead no worse than greedy", c6, t46, &mut failures);
    let (r, t) = timed(c7_ordering);
    report(7, "CRL < (s,S) < PO2 on N=9", r, t, &mut failures);
    let (r, t) = timed(c8_po2_schedules);
    report(8, "PO2 schedules fit the fleet", r, t, &mut failures);
    let (r, t) = timed(c9_ablation);
    report(9, "s-only basis worse than full", r, t, &mut failures);
    let (r, t) = timed(c10_invariants);
    report(10, "invariant suite", r, t, &mut failures);
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
