//! Reachability, internal energy and heat.
//!
//! Internal energy is never read off a closed form. For a state `σ` of an atom
//! the ledger asks its [`WorkCatalog`] for a work process joining the
//! reference state `σ0` and `σ` (in either direction) and sets
//! `U(σ) = U0 + W` or `U(σ) = U0 - W`. Composite systems sum their atoms.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use serde::Serialize;

use crate::error::{Result, ThermoError};
use crate::gas::{GasAtom, SegmentTypes};
use crate::process::{JointState, Process, StateValue};
use crate::reservoir::Reservoir;
use crate::system::{AtomId, Binding, System, World};
use crate::tolerance::Tolerances;

/// Default number of primitive segments a catalog may chain.
pub const DEFAULT_DEPTH: usize = 4;

/// Outcome of a bounded search for work processes between two atom states.
#[derive(Debug, Clone)]
pub enum Reach {
    /// At least one work process from the first state to the second.
    Found(Vec<Process>),
    /// No work process exists at any depth.
    Unreachable,
    /// None was found within the depth bound.
    Inconclusive,
}

/// A source of work processes on single atoms.
pub trait WorkCatalog: Send + Sync {
    /// All catalogued work processes on `atom` from `from` to `to` using at
    /// most `depth` primitive segments.
    fn atom_paths(&self, atom: AtomId, from: &StateValue, to: &StateValue, depth: usize) -> Result<Reach>;

    /// The shortest catalogued work process, searching depths `1..=depth`.
    /// `None` when there is none within the bound.
    fn first_path(&self, atom: AtomId, from: &StateValue, to: &StateValue, depth: usize) -> Result<Option<Process>> {
        for d in 1..=depth {
            match self.atom_paths(atom, from, to, d)? {
                Reach::Found(mut ps) if !ps.is_empty() => return Ok(Some(ps.swap_remove(0))),
                Reach::Unreachable => return Ok(None),
                _ => {}
            }
        }
        Ok(None)
    }
}

/// The catalog of the built-in models: the gas work templates, and friction
/// on reservoirs.
pub struct ModelCatalog {
    world: Arc<World>,
    gas_segments: SegmentTypes,
}

impl ModelCatalog {
    pub fn new(world: Arc<World>) -> Self {
        ModelCatalog {
            world,
            gas_segments: SegmentTypes::ALL,
        }
    }

    /// Restricts the gas segment types the catalog may use.
    pub fn with_gas_segments(mut self, allowed: SegmentTypes) -> Self {
        self.gas_segments = allowed;
        self
    }
}

fn state_mismatch(atom: AtomId) -> ThermoError {
    ThermoError::InvalidState(format!("state does not belong to {atom}"))
}

impl WorkCatalog for ModelCatalog {
    fn atom_paths(&self, atom: AtomId, from: &StateValue, to: &StateValue, depth: usize) -> Result<Reach> {
        match self.world.binding(atom)? {
            Binding::Gas(_) => {
                let g = GasAtom::from_world(&self.world, atom)?;
                let (a, b) = (
                    from.as_gas().ok_or_else(|| state_mismatch(atom))?,
                    to.as_gas().ok_or_else(|| state_mismatch(atom))?,
                );
                g.work_paths(a, b, depth, self.gas_segments)
            }
            Binding::Reservoir { .. } => {
                let (e1, e2) = (
                    from.as_energy().ok_or_else(|| state_mismatch(atom))?,
                    to.as_energy().ok_or_else(|| state_mismatch(atom))?,
                );
                if e1 == e2 {
                    let id = Process::identity(&System::atom(atom), &JointState::single(atom, from.clone()))?;
                    return Ok(Reach::Found(vec![id]));
                }
                if e2 < e1 {
                    return Ok(Reach::Unreachable);
                }
                if depth == 0 {
                    return Ok(Reach::Inconclusive);
                }
                let r = Reservoir::from_world(&self.world, atom, e1)?;
                Ok(Reach::Found(vec![r.friction(e2 - e1)?]))
            }
            Binding::Abstract => Ok(if from == to {
                let id = Process::identity(&System::atom(atom), &JointState::single(atom, from.clone()))?;
                Reach::Found(vec![id])
            } else {
                Reach::Inconclusive
            }),
        }
    }
}

/// Whether the catalog holds a work process on `s` from `from` to `to`.
///
/// Atoms are searched independently and the per-atom processes joined. A
/// definitive "no" on any atom settles the answer; otherwise an atom without
/// a found path makes the search inconclusive.
pub fn reaches(
    catalog: &dyn WorkCatalog,
    s: &System,
    from: &JointState,
    to: &JointState,
    depth: usize,
) -> Result<bool> {
    let mut inconclusive = false;
    for atom in s.atoms() {
        let a = from.get(atom).ok_or(ThermoError::MissingState(atom))?;
        let b = to.get(atom).ok_or(ThermoError::MissingState(atom))?;
        match catalog.atom_paths(atom, a, b, depth)? {
            Reach::Found(_) => {}
            Reach::Unreachable => return Ok(false),
            Reach::Inconclusive => inconclusive = true,
        }
    }
    if inconclusive {
        Err(ThermoError::DepthExceeded(depth))
    } else {
        Ok(true)
    }
}

/// `Z(final) - Z(initial)` for a state function `Z`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateDelta {
    pub initial: JointState,
    #[serde(rename = "final")]
    pub fin: JointState,
    pub delta: f64,
}

type CacheKey = (AtomId, Vec<u64>);

fn cache_key(atom: AtomId, s: &StateValue) -> CacheKey {
    (atom, s.components().iter().map(|x| x.to_bits()).collect())
}

/// Internal energy as a state function built from work processes.
pub struct EnergyLedger {
    world: Arc<World>,
    catalog: Arc<dyn WorkCatalog>,
    references: BTreeMap<AtomId, (StateValue, f64)>,
    depth: usize,
    tol: Tolerances,
    cache: Mutex<HashMap<CacheKey, f64>>,
}

impl std::fmt::Debug for EnergyLedger {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EnergyLedger")
            .field("references", &self.references)
            .field("depth", &self.depth)
            .finish_non_exhaustive()
    }
}

impl EnergyLedger {
    pub fn new(world: Arc<World>) -> Self {
        let catalog = Arc::new(ModelCatalog::new(world.clone()));
        EnergyLedger::with_catalog(world, catalog)
    }

    pub fn with_catalog(world: Arc<World>, catalog: Arc<dyn WorkCatalog>) -> Self {
        EnergyLedger {
            world,
            catalog,
            references: BTreeMap::new(),
            depth: DEFAULT_DEPTH,
            tol: Tolerances::from_env(),
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn with_depth(mut self, depth: usize) -> Self {
        self.depth = depth;
        self
    }

    pub fn with_tolerances(mut self, tol: Tolerances) -> Self {
        self.tol = tol;
        self
    }

    /// Overrides the reference state and energy of one atom.
    pub fn set_reference(&mut self, atom: AtomId, state: StateValue, u0: f64) {
        self.references.insert(atom, (state, u0));
        self.cache.lock().expect("cache lock").retain(|k, _| k.0 != atom);
    }

    pub fn world(&self) -> &Arc<World> {
        &self.world
    }

    pub fn catalog(&self) -> &dyn WorkCatalog {
        self.catalog.as_ref()
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Reference state and energy of `atom`.
    ///
    /// Gases default to their model reference state with the model's energy
    /// convention there; reservoirs default to `E = 0` with `U = 0`.
    pub fn reference(&self, atom: AtomId) -> Result<(StateValue, f64)> {
        if let Some(r) = self.references.get(&atom) {
            return Ok(r.clone());
        }
        match self.world.binding(atom)? {
            Binding::Gas(m) => Ok((StateValue::Gas(m.sigma0), m.internal_energy(&m.sigma0))),
            Binding::Reservoir { .. } => Ok((StateValue::Reservoir { energy: 0.0 }, 0.0)),
            Binding::Abstract => Err(ThermoError::PreconditionNotMet(format!(
                "abstract atom {atom} has no reference state"
            ))),
        }
    }

    /// Internal energy of a single atom at `state`.
    pub fn atom_energy(&self, atom: AtomId, state: &StateValue) -> Result<f64> {
        let key = cache_key(atom, state);
        if let Some(u) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(*u);
        }
        let (sigma0, u0) = self.reference(atom)?;
        let u = if let Some(p) = self.catalog.first_path(atom, &sigma0, state, self.depth)? {
            u0 + p.work(atom)
        } else if let Some(p) = self.catalog.first_path(atom, state, &sigma0, self.depth)? {
            u0 - p.work(atom)
        } else {
            return Err(ThermoError::Unreachable(atom));
        };
        self.cache.lock().expect("cache lock").insert(key, u);
        Ok(u)
    }

    /// `U_S(σ)`, summed over the atoms of `s`.
    pub fn internal_energy(&self, s: &System, state: &JointState) -> Result<f64> {
        s.atoms()
            .map(|a| self.atom_energy(a, state.get(a).ok_or(ThermoError::MissingState(a))?))
            .sum()
    }

    /// `ΔU_S(p)`, summed over the atoms of `s` that `p` involves.
    pub fn delta_u(&self, s: &System, p: &Process) -> Result<f64> {
        let mut total = 0.0;
        for atom in s.atoms() {
            if let Some(e) = p.entry(atom) {
                if e.initial != e.fin {
                    total += self.atom_energy(atom, &e.fin)? - self.atom_energy(atom, &e.initial)?;
                }
            }
        }
        Ok(total)
    }

    pub fn energy_delta(&self, s: &System, p: &Process) -> Result<StateDelta> {
        let involved: Vec<AtomId> = s.atoms().filter(|a| p.involves(*a)).collect();
        let pick = |j: JointState| -> JointState {
            j.iter().filter(|(a, _)| involved.contains(a)).map(|(a, v)| (a, v.clone())).collect()
        };
        Ok(StateDelta {
            initial: pick(p.initial_state()),
            fin: pick(p.final_state()),
            delta: self.delta_u(s, p)?,
        })
    }

    /// Heat `Q_S(p) = ΔU_S(p) - W_S(p)`.
    pub fn heat_of(&self, s: &System, p: &Process) -> Result<f64> {
        Ok(self.delta_u(s, p)? - p.work_of(s))
    }

    pub fn reaches(&self, s: &System, from: &JointState, to: &JointState) -> Result<bool> {
        reaches(self.catalog.as_ref(), s, from, to, self.depth)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FirstLawViolation {
    pub atom: AtomId,
    pub sigma1: StateValue,
    pub sigma2: StateValue,
    pub paths: Vec<String>,
    pub works: Vec<f64>,
    pub reason: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct FirstLawReport {
    pub pairs_checked: usize,
    pub violations: Vec<FirstLawViolation>,
    /// Pairs for which neither direction was settled within the depth bound.
    pub inconclusive: usize,
}

impl FirstLawReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

fn describe(p: &Process) -> String {
    let tags: Vec<&str> = p.tags().iter().map(String::as_str).filter(|t| t.starts_with("path:")).collect();
    if tags.is_empty() {
        p.tags().join("+")
    } else {
        tags.join("+")
    }
}

/// Checks, for every sampled pair of atom states, that a work process exists
/// in at least one direction and that all catalogued work processes between
/// the pair agree on the work.
pub fn check_first_law(
    catalog: &dyn WorkCatalog,
    sample: &[(AtomId, StateValue, StateValue)],
    depth: usize,
    tol: &Tolerances,
) -> FirstLawReport {
    let mut report = FirstLawReport {
        pairs_checked: sample.len(),
        ..Default::default()
    };
    for (atom, s1, s2) in sample {
        let violation = |paths: Vec<String>, works: Vec<f64>, reason: &str| FirstLawViolation {
            atom: *atom,
            sigma1: s1.clone(),
            sigma2: s2.clone(),
            paths,
            works,
            reason: reason.to_string(),
        };
        let forward = catalog.atom_paths(*atom, s1, s2, depth);
        let backward = catalog.atom_paths(*atom, s2, s1, depth);
        let (forward, backward) = match (forward, backward) {
            (Ok(f), Ok(b)) => (f, b),
            (Err(e), _) | (_, Err(e)) => {
                report.violations.push(violation(vec![], vec![], &e.to_string()));
                continue;
            }
        };
        let mut found = false;
        let mut inconclusive = false;
        for reach in [forward, backward] {
            match reach {
                Reach::Found(paths) => {
                    found = true;
                    let works: Vec<f64> = paths.iter().map(|p| p.work(*atom)).collect();
                    let w0 = works[0];
                    if works.iter().any(|w| !tol.works_agree(*w, w0)) {
                        report.violations.push(violation(
                            paths.iter().map(describe).collect(),
                            works,
                            "work depends on the path",
                        ));
                    }
                }
                Reach::Inconclusive => inconclusive = true,
                Reach::Unreachable => {}
            }
        }
        if !found {
            if inconclusive {
                report.inconclusive += 1;
            } else {
                report
                    .violations
                    .push(violation(vec![], vec![], "no work process in either direction"));
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gas::{GasModel, GasState};
    use approx::assert_relative_eq;

    fn setup() -> (Arc<World>, GasAtom, EnergyLedger) {
        let w = Arc::new(World::new());
        let g = GasAtom::new(&w, GasModel::default()).unwrap();
        let l = EnergyLedger::new(w.clone());
        (w, g, l)
    }

    fn gs(p: f64, v: f64) -> StateValue {
        StateValue::Gas(GasState::new(p, v).unwrap())
    }

    #[test]
    fn reaches_examples() {
        let (_, g, l) = setup();
        let s = g.system();
        let j = |p, v| JointState::single(g.atom, gs(p, v));
        assert!(l.reaches(&s, &j(1.0, 1.0), &j(2.0, 1.0)).unwrap());
        assert!(l.reaches(&s, &j(1.0, 1.0), &j(1.0, 1.0)).unwrap());
        assert!(!l.reaches(&s, &j(2.0, 1.0), &j(1.0, 1.0)).unwrap());
        let friction_only = ModelCatalog::new(l.world().clone()).with_gas_segments(SegmentTypes::FRICTION_ONLY);
        assert!(!reaches(&friction_only, &s, &j(2.0, 1.0), &j(1.0, 1.0), 4).unwrap());
        assert!(matches!(
            reaches(l.catalog(), &s, &j(1.0, 1.0), &j(2.0, 3.0), 1),
            Err(ThermoError::DepthExceeded(1))
        ));
    }

    #[test]
    fn internal_energy_matches_closed_form() {
        let (_, g, l) = setup();
        let u = l.internal_energy(&g.system(), &JointState::single(g.atom, gs(2.0, 3.0))).unwrap();
        assert_relative_eq!(u, 9.0, max_relative = 1e-9);
        let u0 = l.internal_energy(&g.system(), &JointState::single(g.atom, gs(1.0, 1.0))).unwrap();
        assert_relative_eq!(u0, 1.5, max_relative = 1e-14);
    }

    #[test]
    fn heat_of_examples() {
        let (w, g, l) = setup();
        let s = g.system();
        let p = g.type1(GasState::new(1.0, 1.0).unwrap(), 2.0).unwrap().process().unwrap();
        assert!(l.heat_of(&s, &p).unwrap().abs() < 1e-9);

        let r = Reservoir::new(&w, 1.0).unwrap();
        let iso = g.type3(&r, GasState::new(1.0, 1.0).unwrap(), 2.0).unwrap().process().unwrap();
        let q_gas = l.heat_of(&s, &iso).unwrap();
        assert_relative_eq!(q_gas, std::f64::consts::LN_2, max_relative = 1e-9);
        let q_res = l.heat_of(&r.system(), &iso).unwrap();
        assert_relative_eq!(q_res, -q_gas, max_relative = 1e-9);
        let back = iso.reverse().unwrap();
        assert_relative_eq!(l.heat_of(&s, &back).unwrap(), -q_gas, max_relative = 1e-9);

        let id = Process::identity(&s, &JointState::single(g.atom, gs(1.0, 1.0))).unwrap();
        assert_eq!(l.heat_of(&s, &id).unwrap(), 0.0);
    }

    struct Corrupted(ModelCatalog);

    impl WorkCatalog for Corrupted {
        fn atom_paths(&self, atom: AtomId, from: &StateValue, to: &StateValue, depth: usize) -> Result<Reach> {
            Ok(match self.0.atom_paths(atom, from, to, depth)? {
                Reach::Found(mut ps) if ps.len() > 1 => {
                    let e = ps[1].entry(atom).unwrap().clone();
                    ps[1] = Process::new(
                        [(atom, crate::process::Entry::new(e.initial, e.fin, e.work + 0.1))],
                        false,
                    )?;
                    Reach::Found(ps)
                }
                other => other,
            })
        }
    }

    #[test]
    fn first_law_checker() {
        let (w, g, _) = setup();
        let tol = Tolerances::default();
        let sample: Vec<_> = [(0.5, 0.5), (2.0, 3.0), (1.0, 4.0)]
            .iter()
            .flat_map(|&(p, v)| [(g.atom, gs(1.0, 1.0), gs(p, v)), (g.atom, gs(p, v), gs(3.0, 0.25))])
            .collect();
        let good = check_first_law(&ModelCatalog::new(w.clone()), &sample, 4, &tol);
        assert!(good.passed(), "{good:?}");
        assert_eq!(good.pairs_checked, 6);

        let bad = check_first_law(&Corrupted(ModelCatalog::new(w.clone())), &sample, 4, &tol);
        assert!(!bad.passed());

        let empty = check_first_law(&ModelCatalog::new(w), &[], 4, &tol);
        assert_eq!(empty.pairs_checked, 0);
        assert!(empty.violations.is_empty());
    }
}
