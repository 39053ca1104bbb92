//! Declarative scenarios: a JSON description of atoms, an ordered script of
//! commands and the artifacts to write.
//!
//! Every command starts from the declared atoms as given. Reservoirs begin
//! at energy 0 in each command, and nothing a command does carries over to
//! the next one.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use thermokernel::carnot::{build_carnot_with, carnot_cycle, degraded_carnot, CarnotConfig, CarnotRun};
use thermokernel::energy::{check_first_law, ModelCatalog};
use thermokernel::entropy::{clausius_sum, EntropyLedger};
use thermokernel::export::{entropy_table, format_sig, family_polyline, write_table, ENTROPY_HEADERS, POLYLINE_HEADERS};
use thermokernel::quasistatic::QuasistaticFamily;
use thermokernel::{
    AtomId, EnergyLedger, GasAtom, GasModel, GasState, Process, Reservoir, StateValue, ThermoError, Tolerances, World,
};

use crate::error::CliError;
use crate::verify::{random_cycle, random_state};
use crate::DEFAULT_SEED;

pub const FORMAT_VERSION: u32 = 1;

/// Output name that selects the aggregated run report.
pub const REPORT_OUTPUT: &str = "report";

const DEFAULT_SAMPLES: usize = 32;
const MAX_GRID: usize = 1000;
const MAX_CYCLES: usize = 100_000;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub version: u32,
    #[serde(default)]
    pub world: WorldConfig,
    pub atoms: Vec<AtomSpec>,
    pub script: Vec<Command>,
    #[serde(default)]
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldConfig {
    /// Parameter of the intermediate reservoir used for entropies.
    pub theta_prime: Option<f64>,
    /// Depth bound of the work-process search.
    pub depth: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct AtomSpec {
    pub name: String,
    #[serde(flatten)]
    pub body: AtomBody,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "lowercase")]
pub enum AtomBody {
    Gas(GasParams),
    Reservoir(ReservoirParams),
}

fn one() -> f64 {
    1.0
}

fn monatomic() -> f64 {
    5.0 / 3.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GasParams {
    #[serde(default = "one")]
    pub n: f64,
    #[serde(rename = "R", default = "one")]
    pub r: f64,
    #[serde(default = "monatomic")]
    pub gamma: f64,
    pub sigma0: Option<GasState>,
    pub u0: Option<f64>,
    pub s0: Option<f64>,
}

impl GasParams {
    fn model(&self) -> thermokernel::Result<GasModel> {
        let m = GasModel::new(self.n, self.r, self.gamma)?;
        m.with_reference(
            self.sigma0.unwrap_or(m.sigma0),
            self.u0.unwrap_or(m.u0),
            self.s0.unwrap_or(m.s0),
        )
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReservoirParams {
    pub theta: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "cmd", rename_all = "snake_case")]
pub enum Command {
    Carnot(CarnotCmd),
    Path(PathCmd),
    Connect(ConnectCmd),
    EntropyTable(EntropyTableCmd),
    FirstLaw(FirstLawCmd),
    Clausius(ClausiusCmd),
    Temperature(TemperatureCmd),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarnotCmd {
    pub id: String,
    pub hot: String,
    pub cold: String,
    pub q_target: Option<f64>,
    pub n: Option<f64>,
    pub volume_ratio: Option<f64>,
    pub friction: Option<f64>,
    pub expect: Option<CarnotExpect>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarnotExpect {
    pub ratio: Option<f64>,
    pub reversible: Option<bool>,
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SegmentSpec {
    /// Isochoric friction heating to pressure `p`.
    #[serde(alias = "1")]
    Friction { p: f64 },
    /// Reversible adiabat to volume `V`.
    #[serde(alias = "2")]
    Adiabat {
        #[serde(rename = "V")]
        v: f64,
    },
    /// Reversible isotherm in contact with `reservoir` to volume `V`. The gas
    /// first follows its adiabat onto the reservoir's isotherm if needed.
    #[serde(alias = "3")]
    Isotherm {
        reservoir: String,
        #[serde(rename = "V")]
        v: f64,
    },
    /// Isotherm driven by friction alone, to volume `V`.
    FrictionIsotherm {
        #[serde(rename = "V")]
        v: f64,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathCmd {
    pub id: String,
    pub gas: String,
    pub start: GasState,
    pub segments: Vec<SegmentSpec>,
    pub samples: Option<usize>,
    pub expect: Option<ProcessExpect>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessExpect {
    pub work: Option<f64>,
    pub heat: Option<f64>,
    pub delta_u: Option<f64>,
    pub delta_s: Option<f64>,
    pub reversible: Option<bool>,
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConnectCmd {
    pub id: String,
    pub gas: String,
    pub from: GasState,
    pub to: GasState,
    /// When set, the connection is the reversible route through this
    /// reservoir instead of a work process on the gas alone.
    pub reservoir: Option<String>,
    pub expect: Option<ProcessExpect>,
}

#[derive(Debug, Clone, Copy, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    #[default]
    Log,
    Linear,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub p: [f64; 2],
    #[serde(rename = "V")]
    pub v: [f64; 2],
    pub n: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomStates {
    pub count: usize,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntropyTableCmd {
    pub id: String,
    pub gas: String,
    pub grid: Option<Grid>,
    pub states: Option<Vec<GasState>>,
    pub random: Option<RandomStates>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FirstLawCmd {
    pub id: String,
    pub gas: String,
    pub states: Vec<GasState>,
    pub depth: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClausiusCmd {
    pub id: String,
    pub gas: String,
    pub cycles: usize,
    #[serde(default)]
    pub friction: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemperatureCmd {
    pub id: String,
    pub reservoir: String,
    pub expect: Option<ValueExpect>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValueExpect {
    pub value: f64,
    pub tol: Option<f64>,
}

impl Command {
    pub fn id(&self) -> &str {
        match self {
            Command::Carnot(c) => &c.id,
            Command::Path(c) => &c.id,
            Command::Connect(c) => &c.id,
            Command::EntropyTable(c) => &c.id,
            Command::FirstLaw(c) => &c.id,
            Command::Clausius(c) => &c.id,
            Command::Temperature(c) => &c.id,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Command::Carnot(_) => "carnot",
            Command::Path(_) => "path",
            Command::Connect(_) => "connect",
            Command::EntropyTable(_) => "entropy_table",
            Command::FirstLaw(_) => "first_law",
            Command::Clausius(_) => "clausius",
            Command::Temperature(_) => "temperature",
        }
    }

    /// Declared atoms the command refers to, with the kind each must have.
    fn references(&self) -> Vec<(&str, Kind)> {
        match self {
            Command::Carnot(c) => vec![(&c.hot, Kind::Reservoir), (&c.cold, Kind::Reservoir)],
            Command::Path(c) => {
                let mut refs = vec![(c.gas.as_str(), Kind::Gas)];
                for s in &c.segments {
                    if let SegmentSpec::Isotherm { reservoir, .. } = s {
                        refs.push((reservoir, Kind::Reservoir));
                    }
                }
                refs
            }
            Command::Connect(c) => {
                let mut refs = vec![(c.gas.as_str(), Kind::Gas)];
                if let Some(r) = &c.reservoir {
                    refs.push((r, Kind::Reservoir));
                }
                refs
            }
            Command::EntropyTable(c) => vec![(&c.gas, Kind::Gas)],
            Command::FirstLaw(c) => vec![(&c.gas, Kind::Gas)],
            Command::Clausius(c) => vec![(&c.gas, Kind::Gas)],
            Command::Temperature(c) => vec![(&c.reservoir, Kind::Reservoir)],
        }
    }

    fn atoms(&self) -> BTreeSet<&str> {
        self.references().into_iter().map(|(n, _)| n).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Gas,
    Reservoir,
}

impl std::fmt::Display for Kind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Kind::Gas => "gas",
            Kind::Reservoir => "reservoir",
        })
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
}

pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse_scenario(&text)
}

fn positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

fn check_state(ctx: &str, s: &GasState) -> Result<(), String> {
    GasState::new(s.p, s.v).map(|_| ()).map_err(|e| format!("{ctx}: {e}"))
}

fn check_expect_tol(ctx: &str, tol: Option<f64>) -> Result<(), String> {
    match tol {
        Some(t) if !(t.is_finite() && t >= 0.0) => Err(format!("{ctx}: tolerance {t} must be a nonnegative number")),
        _ => Ok(()),
    }
}

impl Scenario {
    /// Checks everything that can be decided without running the script.
    pub fn validate(&self) -> Result<(), CliError> {
        self.validate_inner().map_err(CliError::Validation)
    }

    fn validate_inner(&self) -> Result<(), String> {
        if self.version != FORMAT_VERSION {
            return Err(format!("unsupported scenario version {}", self.version));
        }
        if let Some(t) = self.world.theta_prime {
            if !positive(t) {
                return Err(format!("world.theta_prime {t} must be positive"));
            }
        }
        if self.world.depth == Some(0) {
            return Err("world.depth must be at least 1".into());
        }
        let mut kinds = HashMap::new();
        for a in &self.atoms {
            if a.name.is_empty() {
                return Err("atom names must be nonempty".into());
            }
            let kind = match &a.body {
                AtomBody::Gas(g) => {
                    g.model().map_err(|e| format!("atom {}: {e}", a.name))?;
                    Kind::Gas
                }
                AtomBody::Reservoir(r) => {
                    if !positive(r.theta) {
                        return Err(format!("atom {}: reservoir parameter {} must be positive", a.name, r.theta));
                    }
                    Kind::Reservoir
                }
            };
            if kinds.insert(a.name.as_str(), kind).is_some() {
                return Err(format!("atom {} declared twice", a.name));
            }
        }
        let mut ids = BTreeSet::new();
        for c in &self.script {
            let id = c.id();
            if id.is_empty() || id == REPORT_OUTPUT || id.contains(['/', '\\']) || id.starts_with('.') {
                return Err(format!("command id {id:?} is not usable as a file name"));
            }
            if !ids.insert(id) {
                return Err(format!("command id {id} used twice"));
            }
            for (name, want) in c.references() {
                match kinds.get(name) {
                    None => return Err(format!("command {id}: unknown atom {name}")),
                    Some(k) if *k != want => return Err(format!("command {id}: atom {name} is not a {want}")),
                    _ => {}
                }
            }
            validate_command(c).map_err(|e| format!("command {id}: {e}"))?;
        }
        for out in &self.outputs {
            if out != REPORT_OUTPUT && !ids.contains(out.as_str()) {
                return Err(format!("output {out} names no command"));
            }
        }
        Ok(())
    }
}

fn validate_command(c: &Command) -> Result<(), String> {
    match c {
        Command::Carnot(c) => {
            if c.hot == c.cold {
                return Err("hot and cold must be different reservoirs".into());
            }
            for (name, x) in [("n", c.n), ("volume_ratio", c.volume_ratio), ("friction", c.friction)] {
                if let Some(x) = x {
                    if !positive(x) {
                        return Err(format!("{name} {x} must be positive"));
                    }
                }
            }
            if c.friction.is_some() && c.q_target.is_some() {
                return Err("friction and q_target cannot be combined".into());
            }
            if let Some(q) = c.q_target {
                if !q.is_finite() {
                    return Err(format!("q_target {q} must be finite"));
                }
            }
            if let Some(e) = &c.expect {
                check_expect_tol("expect", e.tol)?;
            }
        }
        Command::Path(c) => {
            check_state("start", &c.start)?;
            if c.segments.is_empty() {
                return Err("a path needs at least one segment".into());
            }
            for (i, s) in c.segments.iter().enumerate() {
                let x = match s {
                    SegmentSpec::Friction { p } => *p,
                    SegmentSpec::Adiabat { v } | SegmentSpec::Isotherm { v, .. } | SegmentSpec::FrictionIsotherm { v } => *v,
                };
                if !positive(x) {
                    return Err(format!("segment {i}: target {x} must be positive"));
                }
            }
            if c.samples == Some(0) {
                return Err("samples must be at least 1".into());
            }
            if let Some(e) = &c.expect {
                check_expect_tol("expect", e.tol)?;
            }
        }
        Command::Connect(c) => {
            check_state("from", &c.from)?;
            check_state("to", &c.to)?;
            if let Some(e) = &c.expect {
                check_expect_tol("expect", e.tol)?;
            }
        }
        Command::EntropyTable(c) => {
            let sources = [c.grid.is_some(), c.states.is_some(), c.random.is_some()];
            if sources.iter().filter(|x| **x).count() != 1 {
                return Err("give exactly one of grid, states or random".into());
            }
            if let Some(g) = &c.grid {
                if g.n == 0 || g.n > MAX_GRID {
                    return Err(format!("grid size {} outside 1..={MAX_GRID}", g.n));
                }
                for [lo, hi] in [g.p, g.v] {
                    if !(positive(lo) && positive(hi) && lo <= hi) {
                        return Err(format!("grid range [{lo}, {hi}] must be positive and ordered"));
                    }
                }
            }
            if let Some(states) = &c.states {
                for (i, s) in states.iter().enumerate() {
                    check_state(&format!("state {i}"), s)?;
                }
            }
            if let Some(r) = &c.random {
                if r.count == 0 || r.count > MAX_GRID * MAX_GRID {
                    return Err(format!("random count {} out of range", r.count));
                }
                if !(positive(r.lo) && positive(r.hi) && r.lo < r.hi) {
                    return Err(format!("random range [{}, {}] must be positive and ordered", r.lo, r.hi));
                }
            }
        }
        Command::FirstLaw(c) => {
            if c.states.len() < 2 {
                return Err("first_law needs at least two states".into());
            }
            for (i, s) in c.states.iter().enumerate() {
                check_state(&format!("state {i}"), s)?;
            }
            if c.depth == Some(0) {
                return Err("depth must be at least 1".into());
            }
        }
        Command::Clausius(c) => {
            if c.cycles == 0 || c.cycles > MAX_CYCLES {
                return Err(format!("cycles {} outside 1..={MAX_CYCLES}", c.cycles));
            }
        }
        Command::Temperature(c) => {
            if let Some(e) = &c.expect {
                check_expect_tol("expect", e.tol)?;
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub parallel: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            out: None,
            seed: DEFAULT_SEED,
            parallel: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CommandResult {
    pub id: String,
    pub cmd: &'static str,
    pub pass: bool,
    pub summary: String,
    pub failures: Vec<String>,
    pub data: Value,
    #[serde(skip)]
    pub table: Option<Table>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub seed: u64,
    pub results: Vec<CommandResult>,
    pub artifacts: Vec<PathBuf>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| r.pass)
    }

    /// The assertion failure to report, if any command failed.
    pub fn failure(&self) -> Option<CliError> {
        let failed: Vec<&str> = self.results.iter().filter(|r| !r.pass).map(|r| r.id.as_str()).collect();
        (!failed.is_empty()).then(|| CliError::Assertion(format!("commands failed: {}", failed.join(", "))))
    }

    pub fn to_json(&self) -> Value {
        json!({
            "version": FORMAT_VERSION,
            "seed": self.seed,
            "pass": self.passed(),
            "commands": self.results,
        })
    }
}

struct Context<'a> {
    energy: &'a EnergyLedger,
    entropy: &'a EntropyLedger<'a>,
    gases: HashMap<String, GasAtom>,
    reservoirs: HashMap<String, Reservoir>,
    names: HashMap<AtomId, String>,
    tol: Tolerances,
    seed: u64,
}

impl Context<'_> {
    fn gas(&self, name: &str) -> &GasAtom {
        &self.gases[name]
    }

    fn reservoir(&self, name: &str) -> Reservoir {
        self.reservoirs[name]
    }

    fn name_of(&self, atom: AtomId, fallback: &str) -> String {
        self.names.get(&atom).cloned().unwrap_or_else(|| fallback.to_string())
    }

    fn process_json(&self, p: &Process, fallback: &str) -> Value {
        let atoms: BTreeMap<String, Value> = p
            .entries()
            .map(|(a, e)| (self.name_of(a, fallback), serde_json::to_value(e).unwrap_or(Value::Null)))
            .collect();
        json!({ "tags": p.tags(), "reversible": p.is_reversible(), "atoms": atoms })
    }
}

/// Collects failed expectations for one command.
struct Checks {
    tol: f64,
    failures: Vec<String>,
}

impl Checks {
    fn new(tol: Option<f64>, default: f64) -> Self {
        Checks {
            tol: tol.unwrap_or(default),
            failures: Vec::new(),
        }
    }

    fn close(&mut self, what: &str, got: f64, want: Option<f64>) {
        if let Some(want) = want {
            if !((got - want).abs() <= self.tol * want.abs().max(1.0)) {
                self.failures.push(format!("{what} = {got}, expected {want} within {:e}", self.tol));
            }
        }
    }

    fn flag(&mut self, what: &str, got: bool, want: Option<bool>) {
        if let Some(want) = want {
            if got != want {
                self.failures.push(format!("{what} = {got}, expected {want}"));
            }
        }
    }
}

struct Outcome {
    summary: String,
    failures: Vec<String>,
    data: Value,
    table: Option<Table>,
}

/// Validates and runs `scenario`, then writes the requested outputs.
///
/// Failed expectations are reported through [`RunReport::failure`]; an `Err`
/// means the scenario could not be run at all.
pub fn run_scenario(scenario: &Scenario, opts: &RunOptions) -> Result<RunReport, CliError> {
    scenario.validate()?;
    let world = Arc::new(World::new());
    let tol = Tolerances::from_env();
    let mut energy = EnergyLedger::new(world.clone()).with_tolerances(tol);
    if let Some(d) = scenario.world.depth {
        energy = energy.with_depth(d);
    }
    let mut gases = HashMap::new();
    let mut reservoirs = HashMap::new();
    let mut names = HashMap::new();
    let invalid = |e: ThermoError| CliError::Validation(e.to_string());
    for a in &scenario.atoms {
        let atom = match &a.body {
            AtomBody::Gas(g) => {
                let gas = GasAtom::new(&world, g.model().map_err(invalid)?).map_err(invalid)?;
                gases.insert(a.name.clone(), gas);
                gas.atom
            }
            AtomBody::Reservoir(r) => {
                let res = Reservoir::new(&world, r.theta).map_err(invalid)?;
                reservoirs.insert(a.name.clone(), res);
                res.atom
            }
        };
        names.insert(atom, a.name.clone());
    }
    let mut entropy = EntropyLedger::new(&energy).map_err(invalid)?;
    if let Some(t) = scenario.world.theta_prime {
        entropy = entropy.with_theta_prime(t).map_err(invalid)?;
    }
    let ctx = Context {
        energy: &energy,
        entropy: &entropy,
        gases,
        reservoirs,
        names,
        tol,
        seed: opts.seed,
    };

    let indexed: Vec<(usize, &Command)> = scenario.script.iter().enumerate().collect();
    let mut results = Vec::with_capacity(indexed.len());
    if opts.parallel {
        for batch in disjoint_batches(&indexed) {
            let out: Vec<_> = batch.par_iter().map(|(i, c)| execute(&ctx, *i, c)).collect();
            for r in out {
                results.push(r?);
            }
        }
    } else {
        for (i, c) in &indexed {
            results.push(execute(&ctx, *i, c)?);
        }
    }

    let mut report = RunReport {
        seed: opts.seed,
        results,
        artifacts: Vec::new(),
    };
    if !scenario.outputs.is_empty() {
        let dir = opts.out.clone().unwrap_or_else(|| PathBuf::from("."));
        report.artifacts = write_outputs(&report, &scenario.outputs, &dir)?;
    }
    Ok(report)
}

/// Splits the script into runs of consecutive commands that touch pairwise
/// disjoint sets of declared atoms.
fn disjoint_batches<'a>(commands: &'a [(usize, &'a Command)]) -> Vec<Vec<(usize, &'a Command)>> {
    let mut batches: Vec<Vec<(usize, &Command)>> = Vec::new();
    let mut used: BTreeSet<&str> = BTreeSet::new();
    for &(i, c) in commands {
        let atoms = c.atoms();
        let fits = batches.last().is_some() && atoms.is_disjoint(&used);
        if !fits {
            batches.push(Vec::new());
            used.clear();
        }
        used.extend(atoms);
        batches.last_mut().expect("batch pushed").push((i, c));
    }
    batches
}

fn execute(ctx: &Context, index: usize, c: &Command) -> Result<CommandResult, CliError> {
    let outcome = match c {
        Command::Carnot(c) => run_carnot(ctx, c),
        Command::Path(c) => run_path(ctx, c),
        Command::Connect(c) => run_connect(ctx, c),
        Command::EntropyTable(c) => run_entropy_table(ctx, index, c),
        Command::FirstLaw(c) => run_first_law(ctx, c),
        Command::Clausius(c) => run_clausius(ctx, index, c),
        Command::Temperature(c) => run_temperature(ctx, c),
    }
    .map_err(|e| CliError::Validation(format!("command {}: {e}", c.id())))?;
    Ok(CommandResult {
        id: c.id().to_string(),
        cmd: c.name(),
        pass: outcome.failures.is_empty(),
        summary: outcome.summary,
        failures: outcome.failures,
        data: outcome.data,
        table: outcome.table,
    })
}

fn carnot_json(ctx: &Context, run: &CarnotRun) -> thermokernel::Result<Value> {
    let t1 = ctx.entropy.reservoir_temperature(&run.r1)?;
    let t2 = ctx.entropy.reservoir_temperature(&run.r2)?;
    let segments: Vec<Value> = run.segments.iter().map(|p| ctx.process_json(p, "machine")).collect();
    Ok(json!({
        "theta1": run.r1.theta,
        "theta2": run.r2.theta,
        "T1": t1,
        "T2": t2,
        "q1": run.q1,
        "q2": run.q2,
        "w": run.w,
        "ratio": run.ratio(),
        "reversible": run.reversible(),
        "segments": segments,
    }))
}

fn run_carnot(ctx: &Context, c: &CarnotCmd) -> thermokernel::Result<Outcome> {
    let (r1, r2) = (ctx.reservoir(&c.hot), ctx.reservoir(&c.cold));
    let mut cfg = CarnotConfig::default();
    if let Some(n) = c.n {
        cfg = cfg.with_amount(n)?;
    }
    if let Some(v) = c.volume_ratio {
        cfg = cfg.with_volume_ratio(v)?;
    }
    let run = match (c.friction, c.q_target) {
        (Some(f), _) => degraded_carnot(ctx.energy, &r1, &r2, &cfg, f)?,
        (None, Some(q)) => build_carnot_with(ctx.energy, &r1, &r2, q, &cfg)?,
        (None, None) => carnot_cycle(ctx.energy, &r1, &r2, &cfg)?,
    };
    let mut checks = Checks::new(c.expect.as_ref().and_then(|e| e.tol), ctx.tol.assertion);
    if let Some(e) = &c.expect {
        checks.close("-q1/q2", run.ratio(), e.ratio);
        checks.flag("reversible", run.reversible(), e.reversible);
    }
    Ok(Outcome {
        summary: format!(
            "-q1/q2 = {:.9} (q1 = {}, q2 = {}, w = {})",
            run.ratio(),
            format_sig(run.q1),
            format_sig(run.q2),
            format_sig(run.w)
        ),
        failures: checks.failures,
        data: carnot_json(ctx, &run)?,
        table: None,
    })
}

fn gas_end(g: &GasAtom, f: &QuasistaticFamily) -> GasState {
    f.final_state().get(g.atom).and_then(StateValue::as_gas).expect("family moves the gas")
}

fn process_outcome(ctx: &Context, g: &GasAtom, p: &Process, expect: Option<&ProcessExpect>) -> thermokernel::Result<(String, Vec<String>, Value)> {
    let s = g.system();
    let work = p.work(g.atom);
    let delta_u = ctx.energy.delta_u(&s, p)?;
    let heat = delta_u - work;
    let delta_s = ctx.entropy.delta_s(&s, p)?;
    let mut reservoir_heat = BTreeMap::new();
    for (a, _) in p.entries() {
        if a != g.atom {
            reservoir_heat.insert(ctx.name_of(a, "other"), ctx.energy.heat_of(&a.into(), p)?);
        }
    }
    let mut checks = Checks::new(expect.and_then(|e| e.tol), ctx.tol.assertion);
    if let Some(e) = expect {
        checks.close("work", work, e.work);
        checks.close("heat", heat, e.heat);
        checks.close("delta_u", delta_u, e.delta_u);
        checks.close("delta_s", delta_s, e.delta_s);
        checks.flag("reversible", p.is_reversible(), e.reversible);
    }
    let fin = p.entry(g.atom).map(|e| e.fin.clone());
    let data = json!({
        "work": work,
        "heat": heat,
        "delta_u": delta_u,
        "delta_s": delta_s,
        "reversible": p.is_reversible(),
        "final": fin,
        "reservoir_heat": reservoir_heat,
    });
    let summary = format!(
        "W = {}, Q = {}, dU = {}, dS = {}",
        format_sig(work),
        format_sig(heat),
        format_sig(delta_u),
        format_sig(delta_s)
    );
    Ok((summary, checks.failures, data))
}

fn run_path(ctx: &Context, c: &PathCmd) -> thermokernel::Result<Outcome> {
    let g = ctx.gas(&c.gas);
    let mut reservoirs: HashMap<&str, Reservoir> = HashMap::new();
    let mut x = c.start;
    let mut family: Option<QuasistaticFamily> = None;
    for seg in &c.segments {
        let f = match seg {
            SegmentSpec::Friction { p } => g.type1(x, *p)?,
            SegmentSpec::Adiabat { v } => g.type2(x, *v)?,
            SegmentSpec::FrictionIsotherm { v } => g.friction_isotherm(x, *v)?,
            SegmentSpec::Isotherm { reservoir, v } => {
                let r = *reservoirs.entry(reservoir.as_str()).or_insert_with(|| ctx.reservoir(reservoir));
                let c_iso = g.model.nr() * r.theta;
                let v_on = g.model.adiabat_isotherm_volume(g.model.adiabat_invariant(&x), c_iso);
                let on = GasState::new(c_iso / v_on, v_on)?;
                let contact = g.type3(&r, on, *v)?;
                if let Some(e) = contact.final_state().get(r.atom).and_then(StateValue::as_energy) {
                    reservoirs.insert(reservoir.as_str(), r.at_energy(e));
                }
                if on == x {
                    contact
                } else {
                    g.type2_to(x, on)?.then(&contact, &ctx.tol)?
                }
            }
        };
        x = gas_end(g, &f);
        family = Some(match family {
            None => f,
            Some(prev) => prev.then(&f, &ctx.tol)?,
        });
    }
    let family = family.expect("validated nonempty");
    let p = family.process()?;
    let (summary, failures, data) = process_outcome(ctx, g, &p, c.expect.as_ref())?;
    let rows = family_polyline(&family, g.atom, &g.model.energy_differential(), c.samples.unwrap_or(DEFAULT_SAMPLES))?;
    Ok(Outcome {
        summary,
        failures,
        data,
        table: Some(Table {
            headers: POLYLINE_HEADERS.iter().map(|s| s.to_string()).collect(),
            rows,
        }),
    })
}

fn run_connect(ctx: &Context, c: &ConnectCmd) -> thermokernel::Result<Outcome> {
    let g = ctx.gas(&c.gas);
    let (p, table) = match &c.reservoir {
        None => (g.connect(c.from, c.to)?, None),
        Some(name) => {
            let r = ctx.reservoir(name);
            let legs = g.connect_reversible(&r, c.from, c.to)?;
            let mut family = legs[0].clone();
            for f in &legs[1..] {
                family = family.then(f, &ctx.tol)?;
            }
            let rows = family_polyline(&family, g.atom, &g.model.energy_differential(), DEFAULT_SAMPLES)?;
            let headers = POLYLINE_HEADERS.iter().map(|s| s.to_string()).collect();
            (family.process()?, Some(Table { headers, rows }))
        }
    };
    let (summary, failures, data) = process_outcome(ctx, g, &p, c.expect.as_ref())?;
    Ok(Outcome {
        summary,
        failures,
        data,
        table,
    })
}

fn axis(lo: f64, hi: f64, n: usize, spacing: Spacing) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| {
            let t = i as f64 / (n - 1) as f64;
            match spacing {
                Spacing::Log => (lo.ln() + t * (hi.ln() - lo.ln())).exp(),
                Spacing::Linear => lo + t * (hi - lo),
            }
        })
        .collect()
}

fn command_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn run_entropy_table(ctx: &Context, index: usize, c: &EntropyTableCmd) -> thermokernel::Result<Outcome> {
    let g = ctx.gas(&c.gas);
    let states: Vec<GasState> = if let Some(grid) = &c.grid {
        let ps = axis(grid.p[0], grid.p[1], grid.n, grid.spacing);
        let vs = axis(grid.v[0], grid.v[1], grid.n, grid.spacing);
        ps.iter()
            .flat_map(|&p| vs.iter().map(move |&v| GasState::new(p, v)))
            .collect::<thermokernel::Result<_>>()?
    } else if let Some(r) = &c.random {
        let mut rng = command_rng(ctx.seed, index);
        (0..r.count).map(|_| random_state(&mut rng, r.lo, r.hi)).collect()
    } else {
        c.states.clone().unwrap_or_default()
    };
    let rows = entropy_table(ctx.energy, ctx.entropy, g.atom, &states)?;
    Ok(Outcome {
        summary: format!("{} states", rows.len()),
        failures: Vec::new(),
        data: json!({ "rows": rows.len() }),
        table: Some(Table {
            headers: ENTROPY_HEADERS.iter().map(|s| s.to_string()).collect(),
            rows,
        }),
    })
}

fn run_first_law(ctx: &Context, c: &FirstLawCmd) -> thermokernel::Result<Outcome> {
    let g = ctx.gas(&c.gas);
    let mut sample = Vec::new();
    for (i, a) in c.states.iter().enumerate() {
        for b in &c.states[i + 1..] {
            sample.push((g.atom, StateValue::Gas(*a), StateValue::Gas(*b)));
        }
    }
    let catalog = ModelCatalog::new(ctx.energy.world().clone());
    let report = check_first_law(&catalog, &sample, c.depth.unwrap_or(ctx.energy.depth()), &ctx.tol);
    let failures = report
        .violations
        .iter()
        .map(|v| format!("{:?} -> {:?}: {} {:?}", v.sigma1, v.sigma2, v.reason, v.works))
        .collect();
    Ok(Outcome {
        summary: format!(
            "{} pairs, {} violations, {} inconclusive",
            report.pairs_checked,
            report.violations.len(),
            report.inconclusive
        ),
        failures,
        data: serde_json::to_value(&report).unwrap_or(Value::Null),
        table: None,
    })
}

fn run_clausius(ctx: &Context, index: usize, c: &ClausiusCmd) -> thermokernel::Result<Outcome> {
    let g = ctx.gas(&c.gas);
    let mut rng = command_rng(ctx.seed, index);
    let mut sums = Vec::with_capacity(c.cycles);
    let mut failures = Vec::new();
    for i in 0..c.cycles {
        let a = random_state(&mut rng, 0.5, 2.0);
        let families = random_cycle(&mut rng, ctx.energy.world(), g, a, c.friction)?;
        let records = families
            .iter()
            .map(|f| ctx.entropy.record(&g.system(), &f.process()?))
            .collect::<thermokernel::Result<Vec<_>>>()?;
        let sum = clausius_sum(&g.system(), &records, &ctx.tol)?;
        let ok = if c.friction { sum < -1e-8 } else { sum.abs() <= 1e-8 };
        if !ok {
            failures.push(format!("cycle {i}: sum Q/T = {sum:e}"));
        }
        sums.push(sum);
    }
    let worst = if c.friction {
        sums.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    } else {
        sums.iter().map(|s| s.abs()).fold(0.0, f64::max)
    };
    Ok(Outcome {
        summary: format!("{} cycles, extreme sum {worst:.3e}, {} failures", c.cycles, failures.len()),
        failures,
        data: json!({ "cycles": c.cycles, "friction": c.friction, "sums": sums }),
        table: None,
    })
}

fn run_temperature(ctx: &Context, c: &TemperatureCmd) -> thermokernel::Result<Outcome> {
    let r = ctx.reservoir(&c.reservoir);
    let t = ctx.entropy.reservoir_temperature(&r)?;
    let mut checks = Checks::new(c.expect.as_ref().and_then(|e| e.tol), ctx.tol.assertion);
    checks.close("T", t, c.expect.as_ref().map(|e| e.value));
    Ok(Outcome {
        summary: format!("T = {}", format_sig(t)),
        failures: checks.failures,
        data: json!({ "theta": r.theta, "T": t }),
        table: None,
    })
}

fn write_outputs(report: &RunReport, outputs: &[String], dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let io = |p: &Path, e: std::io::Error| CliError::Io(format!("{}: {e}", p.display()));
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let mut written = Vec::new();
    for name in outputs {
        let (path, bytes) = if name == REPORT_OUTPUT {
            let text = serde_json::to_string_pretty(&report.to_json()).map_err(|e| CliError::Io(e.to_string()))?;
            (dir.join("report.json"), text.into_bytes())
        } else {
            let r = report.results.iter().find(|r| &r.id == name).expect("validated output");
            match &r.table {
                Some(t) => {
                    let mut buf = Vec::new();
                    let headers: Vec<&str> = t.headers.iter().map(String::as_str).collect();
                    write_table(&mut buf, &headers, &t.rows).map_err(|e| CliError::Io(e.to_string()))?;
                    (dir.join(format!("{name}.csv")), buf)
                }
                None => {
                    let text = serde_json::to_string_pretty(&r.data).map_err(|e| CliError::Io(e.to_string()))?;
                    (dir.join(format!("{name}.json")), text.into_bytes())
                }
            }
        };
        fs::write(&path, bytes).map_err(|e| io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(script: &str) -> Scenario {
        parse_scenario(&format!(
            r#"{{"version": 1,
                "atoms": [
                  {{"name": "g", "kind": "gas", "params": {{}}}},
                  {{"name": "hot", "kind": "reservoir", "params": {{"theta": 2}}}},
                  {{"name": "cold", "kind": "reservoir", "params": {{"theta": 1}}}}
                ],
                "script": [{script}]}}"#
        ))
        .unwrap()
    }

    #[test]
    fn unknown_atoms_and_wrong_kinds_are_rejected() {
        let s = scenario(r#"{"cmd": "carnot", "id": "c", "hot": "g", "cold": "cold"}"#);
        assert!(matches!(s.validate(), Err(CliError::Validation(m)) if m.contains("not a reservoir")));
        let s = scenario(r#"{"cmd": "temperature", "id": "t", "reservoir": "warm"}"#);
        assert!(matches!(s.validate(), Err(CliError::Validation(m)) if m.contains("unknown atom")));
    }

    #[test]
    fn batches_split_on_shared_atoms() {
        let s = scenario(
            r#"{"cmd": "temperature", "id": "a", "reservoir": "hot"},
               {"cmd": "temperature", "id": "b", "reservoir": "cold"},
               {"cmd": "carnot", "id": "c", "hot": "hot", "cold": "cold"},
               {"cmd": "clausius", "id": "d", "gas": "g", "cycles": 2}"#,
        );
        let indexed: Vec<_> = s.script.iter().enumerate().collect();
        let sizes: Vec<usize> = disjoint_batches(&indexed).iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![2, 2]);
    }

    #[test]
    fn axis_endpoints_are_exact() {
        let a = axis(0.25, 4.0, 5, Spacing::Log);
        assert_eq!(a.len(), 5);
        assert!((a[2] - 1.0).abs() < 1e-15);
        assert!((a[4] - 4.0).abs() < 1e-15);
        assert_eq!(axis(1.0, 3.0, 3, Spacing::Linear), vec![1.0, 2.0, 3.0]);
    }
}
