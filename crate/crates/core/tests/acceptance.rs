//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use thermokernel::carnot::{
    build_carnot, carnot_cycle, temperature_ratio, temperature_ratio_with, CarnotConfig,
};
use thermokernel::entropy::{clausius_sum, EntropyLedger};
use thermokernel::gas::{conduct, GasAtom, GasModel, GasState};
use thermokernel::process::{join, JointState};
use thermokernel::quasistatic::QuasistaticFamily;
use thermokernel::reservoir::Reservoir;
use thermokernel::scaling::{check_concavity, entropy_uv, max_entropy_split, UvState};
use thermokernel::{EnergyLedger, System, Tolerances, World};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

const SEED: u64 = 0x7e57;

fn log_grid(n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect()
}

fn grid_states(n: usize) -> Vec<GasState> {
    let axis = log_grid(n, 0.25, 4.0);
    axis.iter()
        .flat_map(|&p| axis.iter().map(move |&v| GasState::new(p, v).unwrap()))
        .collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn fresh() -> EnergyLedger {
    EnergyLedger::new(Arc::new(World::new()))
}

fn gas_state(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> GasState {
    let (a, b) = (lo.ln(), hi.ln());
    GasState::new(rng.random_range(a..b).exp(), rng.random_range(a..b).exp()).unwrap()
}

fn end_of(g: &GasAtom, f: &QuasistaticFamily) -> GasState {
    f.final_state().get(g.atom).and_then(|s| s.as_gas()).unwrap()
}

fn internal_energy_grid() -> Outcome {
    let l = fresh();
    let g = GasAtom::new(l.world(), GasModel::default()).unwrap();
    let mut worst = 0.0f64;
    for s in grid_states(20) {
        let u = l
            .internal_energy(&g.system(), &JointState::single(g.atom, s))
            .map_err(|e| e.to_string())?;
        worst = worst.max(rel(u, g.model.internal_energy(&s)));
    }
    if worst <= 1e-6 {
        Ok(format!("400 states, max relative error {worst:.2e}"))
    } else {
        Err(format!("max relative error {worst:.2e}"))
    }
}

fn entropy_grid() -> Outcome {
    let energy = fresh();
    let g = GasAtom::new(energy.world(), GasModel::default()).unwrap();
    let l = EntropyLedger::new(&energy).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut worst_abs, mut worst_spread) = (0.0f64, 0.0f64);
    for s in grid_states(20) {
        let oracle = g.model.entropy(&s) / g.model.nr();
        let mut values = Vec::new();
        for _ in 0..3 {
            let theta = rng.random_range(0.2f64.ln()..5f64.ln()).exp();
            let v = l.atom_entropy_via(g.atom, &s, theta).map_err(|e| e.to_string())? / g.model.nr();
            worst_abs = worst_abs.max((v - oracle).abs());
            values.push(v);
        }
        let spread = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - values.iter().cloned().fold(f64::INFINITY, f64::min);
        worst_spread = worst_spread.max(spread);
    }
    let msg = format!("1200 evaluations, max error {worst_abs:.2e}, max spread across reservoirs {worst_spread:.2e}");
    if worst_abs <= 1e-6 && worst_spread <= 1e-8 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn carnot_universality() -> Outcome {
    let l = fresh();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 3);
    let configs = [(0.5, 1.5), (1.0, 2.0), (2.0, 3.0)]
        .map(|(n, ratio)| CarnotConfig::default().with_amount(n).unwrap().with_volume_ratio(ratio).unwrap());
    let (mut worst_spread, mut worst_theta) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let t1 = rng.random_range(0.2f64.ln()..5f64.ln()).exp();
        let t2 = rng.random_range(0.2f64.ln()..5f64.ln()).exp();
        let r1 = Reservoir::new(l.world(), t1).unwrap();
        let r2 = Reservoir::new(l.world(), t2).unwrap();
        let ratios = configs
            .iter()
            .map(|c| temperature_ratio_with(&l, &r1, &r2, c))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        for r in &ratios {
            worst_spread = worst_spread.max(rel(*r, ratios[0]));
            worst_theta = worst_theta.max(rel(*r, t1 / t2));
        }
    }
    let msg = format!("60 runs, config spread {worst_spread:.2e}, deviation from parameter ratio {worst_theta:.2e}");
    if worst_spread <= 1e-6 && worst_theta <= 1e-6 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn tau_algebra() -> Outcome {
    let l = fresh();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 4);
    let tau = |a: &Reservoir, b: &Reservoir| temperature_ratio(&l, a, b).map_err(|e| e.to_string());
    let (mut clone_err, mut inverse_err, mut chain_err) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..50 {
        let rs: Vec<Reservoir> = (0..3)
            .map(|_| Reservoir::new(l.world(), rng.random_range(0.2f64.ln()..5f64.ln()).exp()).unwrap())
            .collect();
        clone_err = clone_err.max((tau(&rs[0], &rs[0])? - 1.0).abs());
        let copy = rs[1].duplicate(l.world()).unwrap();
        clone_err = clone_err.max((tau(&rs[1], &copy)? - 1.0).abs());
        let t01 = tau(&rs[0], &rs[1])?;
        inverse_err = inverse_err.max((tau(&rs[1], &rs[0])? * t01 - 1.0).abs());
        chain_err = chain_err.max(rel(t01 * tau(&rs[1], &rs[2])?, tau(&rs[0], &rs[2])?));
    }
    let msg = format!("50 triples, clone {clone_err:.2e}, inverse {inverse_err:.2e}, chain {chain_err:.2e}");
    if clone_err <= 1e-8 && inverse_err <= 1e-8 && chain_err <= 1e-6 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// A random cycle of the gas `g` starting at `a`: a walk of adiabats,
/// reservoir contacts and (optionally) friction steps, closed by the
/// reversible adiabat–isotherm–adiabat template.
fn random_cycle(
    rng: &mut ChaCha8Rng,
    world: &World,
    g: &GasAtom,
    a: GasState,
    friction: bool,
) -> Vec<QuasistaticFamily> {
    let steps = rng.random_range(2..=5);
    let friction_at = if friction { Some(rng.random_range(0..steps)) } else { None };
    let mut x = a;
    let mut families = Vec::new();
    for i in 0..steps {
        let f = if Some(i) == friction_at {
            g.type1(x, x.p * rng.random_range(1.05..2.0)).unwrap()
        } else if rng.random_bool(0.5) {
            g.type2(x, x.v * rng.random_range(-0.7f64..0.7).exp()).unwrap()
        } else {
            let r = Reservoir::new(world, x.pv() / g.model.nr()).unwrap();
            let x_on = GasState::new(r.theta * g.model.nr() / x.v, x.v).unwrap();
            g.type3(&r, x_on, x.v * rng.random_range(-0.7f64..0.7).exp()).unwrap()
        };
        x = end_of(g, &f);
        families.push(f);
    }
    let closing = Reservoir::new(world, rng.random_range(0.3..3.0)).unwrap();
    families.extend(g.connect_reversible(&closing, x, a).unwrap());
    families
}

fn clausius() -> Outcome {
    let energy = fresh();
    let l = EntropyLedger::new(&energy).map_err(|e| e.to_string())?;
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 5);
    let gases: Vec<GasAtom> = [0.5, 1.0, 2.0]
        .iter()
        .map(|&n| GasAtom::new(energy.world(), GasModel::default().with_amount(n).unwrap()).unwrap())
        .collect();
    let (mut worst_rev, mut worst_irrev) = (0.0f64, f64::NEG_INFINITY);
    let mut failures = 0;
    for i in 0..500 {
        let friction = i % 2 == 1;
        let g = &gases[i % gases.len()];
        let a = gas_state(&mut rng, 0.5, 2.0);
        let families = random_cycle(&mut rng, energy.world(), g, a, friction);
        let records = families
            .iter()
            .map(|f| l.record(&g.system(), &f.process().unwrap()))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        let sum = clausius_sum(&g.system(), &records, &tol).map_err(|e| e.to_string())?;
        if friction {
            worst_irrev = worst_irrev.max(sum);
            failures += usize::from(!(sum < -1e-8));
        } else {
            worst_rev = worst_rev.max(sum.abs());
            failures += usize::from(sum.abs() > 1e-8);
        }
    }
    let msg = format!(
        "500 cycles, max |sum| reversible {worst_rev:.2e}, max sum with friction {worst_irrev:.3e}, {failures} failures"
    );
    if failures == 0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn entropy_theorem() -> Outcome {
    let energy = fresh();
    let l = EntropyLedger::new(&energy).map_err(|e| e.to_string())?;
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 6);
    let gases: Vec<GasAtom> = [0.5, 1.0, 2.0]
        .iter()
        .map(|&n| GasAtom::new(energy.world(), GasModel::default().with_amount(n).unwrap()).unwrap())
        .collect();
    let (mut min_ds, mut worst_rev) = (f64::INFINITY, 0.0f64);
    let (mut failures, mut reversible_count) = (0, 0);
    for i in 0..1000 {
        let g = &gases[i % gases.len()];
        let only_adiabats = rng.random_bool(0.4);
        let mut x = gas_state(&mut rng, 0.3, 3.0);
        let mut family: Option<QuasistaticFamily> = None;
        for _ in 0..rng.random_range(1..=4) {
            let f = match if only_adiabats { 1 } else { rng.random_range(0..3) } {
                0 => g.type1(x, x.p * rng.random_range(1.0..3.0)),
                1 => g.type2(x, x.v * rng.random_range(-1.0f64..1.0).exp()),
                _ => g.friction_isotherm(x, x.v * rng.random_range(1.0..2.5)),
            }
            .unwrap();
            x = end_of(g, &f);
            family = Some(match family {
                None => f,
                Some(prev) => prev.then(&f, &tol).unwrap(),
            });
        }
        let p = family.unwrap().process().unwrap();
        let v = l.check_entropy_theorem(&g.system(), &p).map_err(|e| e.to_string())?;
        min_ds = min_ds.min(v.delta_s);
        if v.reversible {
            reversible_count += 1;
            worst_rev = worst_rev.max(v.delta_s.abs());
            failures += usize::from(v.delta_s.abs() > 1e-9);
        } else {
            failures += usize::from(v.delta_s < -1e-9);
        }
    }
    let msg = format!(
        "1000 processes ({reversible_count} reversible), min dS {min_ds:.2e}, max |dS| reversible {worst_rev:.2e}, {failures} failures"
    );
    if failures == 0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn sign_lemma() -> Outcome {
    let l = fresh();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 7);
    let mut checked = 0;
    for i in 0..60 {
        let t1 = rng.random_range(0.2f64.ln()..5f64.ln()).exp();
        let t2 = if i % 10 == 0 { t1 } else { rng.random_range(0.2f64.ln()..5f64.ln()).exp() };
        let r1 = Reservoir::new(l.world(), t1).unwrap();
        let r2 = Reservoir::new(l.world(), t2).unwrap();
        let q = rng.random_range(0.1..5.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let runs = [
            build_carnot(&l, &r1, &r2, q),
            carnot_cycle(&l, &r1, &r2, &CarnotConfig::default()),
        ];
        for run in runs {
            let run = run.map_err(|e| e.to_string())?;
            if !run.reversible() {
                return Err("constructor produced an irreversible run".into());
            }
            if !(run.q1 * run.q2 < 0.0) {
                return Err(format!("q1 = {}, q2 = {} between {t1} and {t2}", run.q1, run.q2));
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} reversible runs, all with opposite heat flows"))
}

fn heat_interval() -> Outcome {
    let energy = fresh();
    let l = EntropyLedger::new(&energy).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 8);
    let mut worst = 0.0f64;
    for _ in 0..30 {
        let hot = GasAtom::new(energy.world(), GasModel::default().with_amount(rng.random_range(0.5..2.0)).unwrap()).unwrap();
        let cold = GasAtom::new(energy.world(), GasModel::default().with_amount(rng.random_range(0.5..2.0)).unwrap()).unwrap();
        let (sh, sc) = loop {
            let (a, b) = (gas_state(&mut rng, 0.3, 3.0), gas_state(&mut rng, 0.3, 3.0));
            if hot.model.temperature(&a) > 1.05 * cold.model.temperature(&b) {
                break (a, b);
            }
        };
        let (t1, t2) = (hot.model.temperature(&sh), cold.model.temperature(&sc));
        // heat that would equalise the temperatures, times a fraction
        let (ch, cc) = (hot.model.heat_capacity_factor() * hot.model.nr(), cold.model.heat_capacity_factor() * cold.model.nr());
        let q_eq = (t1 - t2) * ch * cc / (ch + cc);
        let p = conduct(&hot, sh, &cold, sc, q_eq * rng.random_range(0.1..0.9)).map_err(|e| e.to_string())?;
        let set = l
            .assign_heat_temperature(&hot.system(), &cold.system(), &p)
            .map_err(|e| e.to_string())?;
        worst = worst.max(rel(set.lo, t2)).max(rel(set.hi, t1));
    }
    if worst <= 1e-6 {
        Ok(format!("30 conductions, max endpoint error {worst:.2e}"))
    } else {
        Err(format!("max endpoint error {worst:.2e}"))
    }
}

fn maximum_entropy() -> Outcome {
    let base = GasModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 9);
    let (mut worst_arg, mut worst_s) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let lambda = rng.random_range(0.05..0.95);
        let total = UvState::new(rng.random_range(0.5..10.0), rng.random_range(0.5..10.0));
        let r = max_entropy_split(&base, lambda, total).map_err(|e| e.to_string())?;
        worst_arg = worst_arg
            .max((r.first.u - lambda * total.u).abs())
            .max((r.first.v - lambda * total.v).abs());
        let unconstrained = entropy_uv(&base, &total).map_err(|e| e.to_string())?;
        worst_s = worst_s.max((r.s_max - unconstrained).abs());
    }
    let pairs: Vec<(UvState, UvState)> = (0..1000)
        .map(|_| {
            let mut draw = || UvState::new(rng.random_range(0.05..10.0), rng.random_range(0.05..10.0));
            (draw(), draw())
        })
        .collect();
    let report = check_concavity(|s| entropy_uv(&base, s), &pairs).map_err(|e| e.to_string())?;
    let msg = format!(
        "100 splits, argmax error {worst_arg:.2e}, S_max error {worst_s:.2e}; {} concavity checks, min gap {:.2e}",
        report.checked, report.min_gap
    );
    if worst_arg <= 1e-6 && worst_s <= 1e-8 && report.passed() {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn algebra_laws() -> Outcome {
    let l = fresh();
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 10);
    let g = GasAtom::new(l.world(), GasModel::default()).unwrap();
    let h = GasAtom::new(l.world(), GasModel::default().with_amount(2.0).unwrap()).unwrap();
    let r = Reservoir::new(l.world(), 1.3).unwrap();
    let mut worst = 0.0f64;
    let fail = |what: &str| Err(format!("{what} violated"));
    for _ in 0..200 {
        let a = gas_state(&mut rng, 0.3, 3.0);
        let p = g.type2(a, a.v * rng.random_range(0.5..2.0)).unwrap().process().unwrap();
        let b = p.entry(g.atom).unwrap().fin.as_gas().unwrap();
        let q = g.type1(b, b.p * rng.random_range(1.0..2.0)).unwrap().process().unwrap();
        let pq = p.then(&q, &tol).map_err(|e| e.to_string())?;
        if pq.work(g.atom) != p.work(g.atom) + q.work(g.atom) {
            return fail("work additivity under concatenation");
        }
        if pq.initial_state() != p.initial_state() || pq.final_state() != q.final_state() {
            return fail("concatenation state rule");
        }
        let other = h.type1(a, a.p * 1.5).unwrap().process().unwrap();
        let joint = join(&pq, &other, &tol).map_err(|e| e.to_string())?;
        let both = g.system().compose(&h.system());
        worst = worst.max((joint.work_of(&both) - (pq.work(g.atom) + other.work(h.atom))).abs());
        let back = p.reverse().map_err(|e| e.to_string())?;
        if back.work(g.atom) != -p.work(g.atom) {
            return fail("reverse-work negation");
        }

        // clone invariance of work and heat for a gas–reservoir contact
        let x = GasState::new(r.theta * g.model.nr() / a.v, a.v).unwrap();
        let contact = g.type3(&r, x, a.v * rng.random_range(0.5..2.0)).unwrap().process().unwrap();
        let pair = g.system().compose(&r.system());
        let (copy, map) = l.world().clone_system(&pair).map_err(|e| e.to_string())?;
        let cloned = contact.relabel(&map).map_err(|e| e.to_string())?;
        if cloned.work_of(&copy) != contact.work_of(&pair) {
            return fail("clone invariance of work");
        }
        for atom in pair.atoms() {
            let (s, s_copy) = (System::atom(atom), System::atom(map[&atom]));
            let (q0, q1) = (
                l.heat_of(&s, &contact).map_err(|e| e.to_string())?,
                l.heat_of(&s_copy, &cloned).map_err(|e| e.to_string())?,
            );
            worst = worst.max((q0 - q1).abs());
        }
    }
    if worst <= 1e-12 {
        Ok(format!("200 samples, exact laws hold, max deviation {worst:.2e}"))
    } else {
        Err(format!("max deviation {worst:.2e}"))
    }
}

fn temperature_derivative() -> Outcome {
    let energy = fresh();
    let l = EntropyLedger::new(&energy).map_err(|e| e.to_string())?;
    let g = GasAtom::new(energy.world(), GasModel::default()).unwrap();
    let (mut worst_engine, mut worst_usv) = (0.0f64, 0.0f64);
    let h = 1e-4;
    for s in grid_states(10) {
        let t = s.pv() / g.model.nr();
        let lo = GasState::new(s.p * (1.0 - h), s.v).unwrap();
        let hi = GasState::new(s.p * (1.0 + h), s.v).unwrap();
        let u = |x: GasState| energy.internal_energy(&g.system(), &JointState::single(g.atom, x));
        let du = u(hi).map_err(|e| e.to_string())? - u(lo).map_err(|e| e.to_string())?;
        let ds = l.atom_entropy(g.atom, &hi).map_err(|e| e.to_string())?
            - l.atom_entropy(g.atom, &lo).map_err(|e| e.to_string())?;
        worst_engine = worst_engine.max(rel(du / ds, t));

        let s_mid = l.atom_entropy(g.atom, &s).map_err(|e| e.to_string())?;
        let step = 1e-5;
        let d = (g.model.energy_from_entropy(s_mid + step, s.v) - g.model.energy_from_entropy(s_mid - step, s.v))
            / (2.0 * step);
        worst_usv = worst_usv.max(rel(d, t));
    }
    let msg = format!("100 states, ledger dU/dS error {worst_engine:.2e}, U(S,V) derivative error {worst_usv:.2e}");
    if worst_engine <= 1e-4 && worst_usv <= 1e-4 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("ideal-gas internal energy from work processes", internal_energy_grid),
        ("ideal-gas entropy from reversible contacts", entropy_grid),
        ("Carnot universality", carnot_universality),
        ("temperature ratio algebra", tau_algebra),
        ("Clausius inequality", clausius),
        ("entropy theorem", entropy_theorem),
        ("opposite heat flows of reversible engines", sign_lemma),
        ("conduction temperature interval", heat_interval),
        ("maximum entropy and concavity", maximum_entropy),
        ("process algebra laws", algebra_laws),
        ("temperature as dU/dS at fixed volume", temperature_derivative),
    ];
    let start = Instant::now();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = check();
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {:>2}: {name}: {detail} [{secs:.2}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {:>2}: {name}: {detail} [{secs:.2}s]", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria passed in {:.1}s",
        criteria.len() - failed,
        criteria.len(),
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
