//! Randomized invariant suites over the gas and reservoir models.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use thermokernel::carnot::{carnot_cycle, check_second_law, temperature_ratio, temperature_ratio_with, CarnotConfig};
use thermokernel::energy::{check_first_law, ModelCatalog};
use thermokernel::entropy::{clausius_sum, EntropyLedger};
use thermokernel::quasistatic::QuasistaticFamily;
use thermokernel::scaling::{
    check_concavity, classify_variable, entropy_uv, max_entropy_split, remove_constraint, scale, GasVariable, Scale,
    ScaledAtom, UvState, VariableClass,
};
use thermokernel::{EnergyLedger, GasAtom, GasModel, GasState, Reservoir, Result, StateValue, Tolerances, World};

/// At most this many counterexamples are kept per suite.
const MAX_COUNTEREXAMPLES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    FirstLaw,
    SecondLaw,
    Carnot,
    Clausius,
    EntropyTheorem,
    MaxEntropy,
    Scaling,
    All,
}

impl Suite {
    pub const EACH: [Suite; 7] = [
        Suite::FirstLaw,
        Suite::SecondLaw,
        Suite::Carnot,
        Suite::Clausius,
        Suite::EntropyTheorem,
        Suite::MaxEntropy,
        Suite::Scaling,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::FirstLaw => "first-law",
            Suite::SecondLaw => "second-law",
            Suite::Carnot => "carnot",
            Suite::Clausius => "clausius",
            Suite::EntropyTheorem => "entropy-theorem",
            Suite::MaxEntropy => "max-entropy",
            Suite::Scaling => "scaling",
            Suite::All => "all",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: &'static str,
    pub checked: usize,
    pub failures: usize,
    pub summary: String,
    pub counterexamples: Vec<String>,
}

impl SuiteReport {
    fn new(suite: Suite) -> Self {
        SuiteReport {
            suite: suite.name(),
            checked: 0,
            failures: 0,
            summary: String::new(),
            counterexamples: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, describe: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok {
            self.failures += 1;
            if self.counterexamples.len() < MAX_COUNTEREXAMPLES {
                self.counterexamples.push(describe());
            }
        }
    }

    fn error(&mut self, context: &str, e: thermokernel::ThermoError) {
        self.check(false, || format!("{context}: {e}"));
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Runs one suite, or every suite for [`Suite::All`]. Each suite draws from
/// its own stream of a ChaCha generator seeded with `seed`.
pub fn run_suite(suite: Suite, seed: u64) -> Vec<SuiteReport> {
    if suite == Suite::All {
        return Suite::EACH.iter().flat_map(|s| run_suite(*s, seed)).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(suite as u64);
    let mut report = SuiteReport::new(suite);
    match suite {
        Suite::FirstLaw => first_law(&mut rng, &mut report),
        Suite::SecondLaw => second_law(&mut rng, &mut report),
        Suite::Carnot => carnot(&mut rng, &mut report),
        Suite::Clausius => clausius(&mut rng, &mut report),
        Suite::EntropyTheorem => entropy_theorem(&mut rng, &mut report),
        Suite::MaxEntropy => max_entropy(&mut rng, &mut report),
        Suite::Scaling => scaling(&mut rng, &mut report),
        Suite::All => unreachable!(),
    }
    vec![report]
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo.ln()..hi.ln()).exp()
}

pub fn random_state(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> GasState {
    GasState::new(log_uniform(rng, lo, hi), log_uniform(rng, lo, hi)).expect("positive state")
}

fn end_of(g: &GasAtom, f: &QuasistaticFamily) -> GasState {
    f.final_state().get(g.atom).and_then(StateValue::as_gas).expect("family moves the gas")
}

fn gases(world: &World) -> Result<Vec<GasAtom>> {
    [0.5, 1.0, 2.0]
        .iter()
        .map(|&n| GasAtom::new(world, GasModel::default().with_amount(n)?))
        .collect()
}

/// A random cycle on `g` starting and ending at `a`.
///
/// Between two and five random steps (adiabats and reservoir contacts at the
/// gas's current temperature, plus one type-1 step when `friction` is set)
/// are followed by a reversible return through a reservoir of random
/// parameter.
pub fn random_cycle(
    rng: &mut ChaCha8Rng,
    world: &World,
    g: &GasAtom,
    a: GasState,
    friction: bool,
) -> Result<Vec<QuasistaticFamily>> {
    let steps = rng.random_range(2..=5);
    let friction_at = friction.then(|| rng.random_range(0..steps));
    let mut x = a;
    let mut families = Vec::with_capacity(steps + 3);
    for i in 0..steps {
        let f = if Some(i) == friction_at {
            g.type1(x, x.p * rng.random_range(1.05..2.0))?
        } else if rng.random_bool(0.5) {
            g.type2(x, x.v * rng.random_range(-0.7f64..0.7).exp())?
        } else {
            let r = Reservoir::new(world, x.pv() / g.model.nr())?;
            g.type3(&r, x, x.v * rng.random_range(-0.7f64..0.7).exp())?
        };
        x = end_of(g, &f);
        families.push(f);
    }
    let closing = Reservoir::new(world, rng.random_range(0.3..3.0))?;
    families.extend(g.connect_reversible(&closing, x, a)?);
    Ok(families)
}

fn first_law(rng: &mut ChaCha8Rng, report: &mut SuiteReport) {
    let world = Arc::new(World::new());
    let gs = match gases(&world) {
        Ok(g) => g,
        Err(e) => return report.error("setup", e),
    };
    let sample: Vec<_> = (0..300)
        .map(|i| {
            let g = &gs[i % gs.len()];
            let (a, b) = (random_state(rng, 0.25, 4.0), random_state(rng, 0.25, 4.0));
            (g.atom, StateValue::Gas(a), StateValue::Gas(b))
        })
        .collect();
    let result = check_first_law(&ModelCatalog::new(world), &sample, 4, &Tolerances::from_env());
    report.checked = result.pairs_checked;
    report.failures = result.violations.len();
    report.counterexamples = result
        .violations
        .iter()
        .take(MAX_COUNTEREXAMPLES)
        .map(|v| format!("{:?} -> {:?}: {} {:?}", v.sigma1, v.sigma2, v.reason, v.works))
        .collect();
    report.summary = format!(
        "{} state pairs on a [0.25, 4] log range, {} inconclusive",
        result.pairs_checked, result.inconclusive
    );
}

fn second_law(rng: &mut ChaCha8Rng, report: &mut SuiteReport) {
    let ledger = EnergyLedger::new(Arc::new(World::new()));
    let mut min_work = f64::INFINITY;
    for i in 0..200 {
        let outcome = (|| -> Result<(f64, bool)> {
            let g = GasAtom::new(ledger.world(), GasModel::default().with_amount(rng.random_range(0.5..2.0))?)?;
            let r0 = Reservoir::new(ledger.world(), log_uniform(rng, 0.3, 3.0))?;
            let tol = *ledger.tolerances();
            let mut r = r0;
            let a = GasState::new(rng.random_range(0.5..2.0), 1.0)?;
            let a = GasState::new(r.theta * g.model.nr() / a.v, a.v)?;
            let mut x = a;
            let mut family: Option<QuasistaticFamily> = None;
            let push = |f: QuasistaticFamily, family: &mut Option<QuasistaticFamily>| -> Result<()> {
                *family = Some(match family.take() {
                    None => f,
                    Some(prev) => prev.then(&f, &tol)?,
                });
                Ok(())
            };
            for _ in 0..rng.random_range(1..=4) {
                let f = match rng.random_range(0..3) {
                    0 => g.type1(x, x.p * rng.random_range(1.05..2.0))?,
                    1 => g.type2(x, x.v * rng.random_range(-0.7f64..0.7).exp())?,
                    _ => {
                        let legs = g.connect_reversible(&r, x, x)?;
                        let on = end_of(&g, &legs[0]);
                        let contact = g.type3(&r, on, on.v * rng.random_range(-0.7f64..0.7).exp())?;
                        r = r.at_energy(contact.final_state().get(r.atom).and_then(StateValue::as_energy).unwrap_or(r.energy));
                        legs[0].then(&contact, &tol)?
                    }
                };
                x = end_of(&g, &f);
                push(f, &mut family)?;
            }
            for f in g.connect_reversible(&r, x, a)? {
                push(f, &mut family)?;
            }
            let p = family.expect("at least one step").process()?;
            let verdict = check_second_law(&ledger, &r0, &g.system(), &p)?;
            Ok((verdict.work, verdict.pass))
        })();
        match outcome {
            Ok((w, pass)) => {
                min_work = min_work.min(w);
                report.check(pass, || format!("cycle {i}: work {w:e} extracted from one reservoir"));
            }
            Err(e) => report.error(&format!("cycle {i}"), e),
        }
    }
    report.summary = format!("200 single-reservoir cycles, minimum work on the gas {min_work:.3e}");
}

fn carnot(rng: &mut ChaCha8Rng, report: &mut SuiteReport) {
    let ledger = EnergyLedger::new(Arc::new(World::new()));
    let mut worst = 0.0f64;
    for i in 0..20 {
        let outcome = (|| -> Result<()> {
            let (t1, t2) = (log_uniform(rng, 0.2, 5.0), log_uniform(rng, 0.2, 5.0));
            let r1 = Reservoir::new(ledger.world(), t1)?;
            let r2 = Reservoir::new(ledger.world(), t2)?;
            for (n, ratio) in [(1.0, 2.0), (0.5, 1.5), (2.0, 3.0)] {
                let cfg = CarnotConfig::default().with_amount(n)?.with_volume_ratio(ratio)?;
                let run = carnot_cycle(&ledger, &r1, &r2, &cfg)?;
                let err = (run.ratio() - t1 / t2).abs() / (t1 / t2);
                worst = worst.max(err);
                report.check(err <= 1e-6, || format!("pair {i}: -q1/q2 = {} for {t1}/{t2}", run.ratio()));
                report.check(run.reversible() && run.q1 * run.q2 < 0.0, || {
                    format!("pair {i}: q1 = {}, q2 = {}", run.q1, run.q2)
                });
            }
            let clone = r1.duplicate(ledger.world())?;
            let tau = temperature_ratio(&ledger, &r1, &clone)?;
            report.check((tau - 1.0).abs() <= 1e-8, || format!("pair {i}: tau with a clone {tau}"));
            let r3 = Reservoir::new(ledger.world(), log_uniform(rng, 0.2, 5.0))?;
            let cfg = CarnotConfig::default();
            let chain = temperature_ratio_with(&ledger, &r1, &r2, &cfg)? * temperature_ratio_with(&ledger, &r2, &r3, &cfg)?;
            let direct = temperature_ratio_with(&ledger, &r1, &r3, &cfg)?;
            report.check((chain - direct).abs() <= 1e-6 * direct, || {
                format!("pair {i}: tau chain {chain} against {direct}")
            });
            Ok(())
        })();
        if let Err(e) = outcome {
            report.error(&format!("pair {i}"), e);
        }
    }
    report.summary = format!("20 reservoir pairs, 3 machines each, max ratio error {worst:.2e}");
}

fn clausius(rng: &mut ChaCha8Rng, report: &mut SuiteReport) {
    let energy = EnergyLedger::new(Arc::new(World::new()));
    let setup = EntropyLedger::new(&energy).and_then(|l| Ok((l, gases(energy.world())?)));
    let (l, gs) = match setup {
        Ok(v) => v,
        Err(e) => return report.error("setup", e),
    };
    let tol = Tolerances::from_env();
    let (mut worst_rev, mut worst_irrev) = (0.0f64, f64::NEG_INFINITY);
    for i in 0..500 {
        let friction = i % 2 == 1;
        let g = &gs[i % gs.len()];
        let a = random_state(rng, 0.5, 2.0);
        let outcome = random_cycle(rng, energy.world(), g, a, friction).and_then(|families| {
            let records = families
                .iter()
                .map(|f| l.record(&g.system(), &f.process()?))
                .collect::<Result<Vec<_>>>()?;
            clausius_sum(&g.system(), &records, &tol)
        });
        match outcome {
            Ok(sum) if friction => {
                worst_irrev = worst_irrev.max(sum);
                report.check(sum < -1e-8, || format!("cycle {i} with friction: sum {sum:e}"));
            }
            Ok(sum) => {
                worst_rev = worst_rev.max(sum.abs());
                report.check(sum.abs() <= 1e-8, || format!("reversible cycle {i}: sum {sum:e}"));
            }
            Err(e) => report.error(&format!("cycle {i}"), e),
        }
    }
    report.summary = format!(
        "500 cycles, max |sum Q/T| reversible {worst_rev:.2e}, max sum with friction {worst_irrev:.3e}"
    );
}

fn entropy_theorem(rng: &mut ChaCha8Rng, report: &mut SuiteReport) {
    let energy = EnergyLedger::new(Arc::new(World::new()));
    let setup = EntropyLedger::new(&energy).and_then(|l| Ok((l, gases(energy.world())?)));
    let (l, gs) = match setup {
        Ok(v) => v,
        Err(e) => return report.error("setup", e),
    };
    let tol = Tolerances::from_env();
    let (mut min_ds, mut reversible) = (f64::INFINITY, 0);
    for i in 0..1000 {
        let g = &gs[i % gs.len()];
        let only_adiabats = rng.random_bool(0.4);
        let outcome = (|| -> Result<_> {
            let mut x = random_state(rng, 0.3, 3.0);
            let mut family: Option<QuasistaticFamily> = None;
            for _ in 0..rng.random_range(1..=4) {
                let f = match if only_adiabats { 1 } else { rng.random_range(0..3) } {
                    0 => g.type1(x, x.p * rng.random_range(1.0..3.0))?,
                    1 => g.type2(x, x.v * rng.random_range(-1.0f64..1.0).exp())?,
                    _ => g.friction_isotherm(x, x.v * rng.random_range(1.0..2.5))?,
                };
                x = end_of(g, &f);
                family = Some(match family {
                    None => f,
                    Some(prev) => prev.then(&f, &tol)?,
                });
            }
            l.check_entropy_theorem(&g.system(), &family.expect("nonempty").process()?)
        })();
        match outcome {
            Ok(v) => {
                min_ds = min_ds.min(v.delta_s);
                if v.reversible {
                    reversible += 1;
                    report.check(v.delta_s.abs() <= 1e-9, || format!("reversible process {i}: dS {:e}", v.delta_s));
                } else {
                    report.check(v.delta_s >= -1e-9, || format!("process {i}: dS {:e}", v.delta_s));
                }
            }
            Err(e) => report.error(&format!("process {i}"), e),
        }
    }
    report.summary = format!("1000 work processes ({reversible} reversible), min dS {min_ds:.2e}");
}

fn max_entropy(rng: &mut ChaCha8Rng, report: &mut SuiteReport) {
    let base = GasModel::default();
    let (mut worst_arg, mut worst_s) = (0.0f64, 0.0f64);
    for i in 0..100 {
        let lambda = rng.random_range(0.05..0.95);
        let total = UvState::new(rng.random_range(0.5..10.0), rng.random_range(0.5..10.0));
        let outcome = max_entropy_split(&base, lambda, total).and_then(|r| Ok((r, entropy_uv(&base, &total)?)));
        match outcome {
            Ok((r, s)) => {
                let arg = (r.first.u - lambda * total.u).abs().max((r.first.v - lambda * total.v).abs());
                worst_arg = worst_arg.max(arg);
                worst_s = worst_s.max((r.s_max - s).abs());
                report.check(arg <= 1e-6 && (r.s_max - s).abs() <= 1e-8, || {
                    format!("split {i}: lambda {lambda}, maximiser {:?}, S_max {} against {s}", r.first, r.s_max)
                });
            }
            Err(e) => report.error(&format!("split {i}"), e),
        }
    }
    let pairs: Vec<(UvState, UvState)> = (0..1000)
        .map(|_| {
            let mut draw = || UvState::new(rng.random_range(0.05..10.0), rng.random_range(0.05..10.0));
            (draw(), draw())
        })
        .collect();
    match check_concavity(|s| entropy_uv(&base, s), &pairs) {
        Ok(c) => {
            report.checked += c.checked;
            report.failures += c.violations.len();
            for v in c.violations.iter().take(MAX_COUNTEREXAMPLES.saturating_sub(report.counterexamples.len())) {
                report.counterexamples.push(format!("{v:?}"));
            }
            report.summary = format!(
                "100 splits (argmax error {worst_arg:.2e}, S_max error {worst_s:.2e}), {} concavity checks with min gap {:.2e}",
                c.checked, c.min_gap
            );
        }
        Err(e) => report.error("concavity", e),
    }
}

fn scaling(rng: &mut ChaCha8Rng, report: &mut SuiteReport) {
    let base = GasModel::default();
    let states: Vec<GasState> = (0..20).map(|_| random_state(rng, 0.25, 4.0)).collect();
    for (name, expected) in [
        ("p", VariableClass::Intensive),
        ("V", VariableClass::Extensive),
        ("U", VariableClass::Extensive),
        ("S", VariableClass::Extensive),
        ("T", VariableClass::Intensive),
    ] {
        let var = GasVariable::parse(name).expect("known variable");
        match classify_variable(&base, &states, |m, s| Ok(var.eval(m, s))) {
            Ok(class) => report.check(class == expected, || format!("{name} classified as {class:?}")),
            Err(e) => report.error(name, e),
        }
    }
    let world = World::new();
    for i in 0..200 {
        let k = rng.random_range(1..4);
        let outcome = (|| -> Result<(f64, f64)> {
            let a = ScaledAtom::new(&world, scale(&base, Scale::new(k, 4))?);
            let b = ScaledAtom::new(&world, scale(&base, Scale::new(4 - k, 4))?);
            let s1 = UvState::new(rng.random_range(0.2..5.0), rng.random_range(0.2..5.0));
            let s2 = UvState::new(rng.random_range(0.2..5.0), rng.random_range(0.2..5.0));
            let (_, total) = remove_constraint(&a, s1, &b, s2)?;
            let before = entropy_uv(&a.gas.model(), &s1)? + entropy_uv(&b.gas.model(), &s2)?;
            Ok((before, entropy_uv(&base, &total)?))
        })();
        match outcome {
            Ok((before, after)) => report.check(after >= before - 1e-12, || {
                format!("relaxation {i}: entropy {before} -> {after}")
            }),
            Err(e) => report.error(&format!("relaxation {i}"), e),
        }
    }
    report.summary = "p, V, U, S, T classified under factors 1/2, 2, 3; 200 constraint removals".into();
}
