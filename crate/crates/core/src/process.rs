//! Processes as thermodynamic footprints.
//!
//! A [`Process`] records, for every involved atom, the initial state, the
//! final state and the work done on it. Atoms that are not involved have work
//! zero. Two processes with identical footprints are still distinct values:
//! each carries its own process id.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Result, ThermoError};
use crate::gas::GasState;
use crate::system::{AtomId, AtomKind, System};
use crate::tolerance::Tolerances;

static NEXT_PID: AtomicU64 = AtomicU64::new(1);

fn fresh_pid() -> u64 {
    NEXT_PID.fetch_add(1, Ordering::Relaxed)
}

/// Model-specific state payload of a single atom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateValue {
    Gas(GasState),
    Reservoir {
        #[serde(rename = "E")]
        energy: f64,
    },
    Abstract(Vec<f64>),
}

impl StateValue {
    pub fn kind(&self) -> AtomKind {
        match self {
            StateValue::Gas(_) => AtomKind::IdealGas,
            StateValue::Reservoir { .. } => AtomKind::Reservoir,
            StateValue::Abstract(_) => AtomKind::Abstract,
        }
    }

    /// Numeric coordinates of the payload.
    pub fn components(&self) -> Vec<f64> {
        match self {
            StateValue::Gas(g) => vec![g.p, g.v],
            StateValue::Reservoir { energy } => vec![*energy],
            StateValue::Abstract(v) => v.clone(),
        }
    }

    /// Same variant and every component within the state tolerance.
    pub fn close_to(&self, other: &StateValue, tol: &Tolerances) -> bool {
        if self.kind() != other.kind() {
            return false;
        }
        let (a, b) = (self.components(), other.components());
        a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| tol.states_close(*x, *y))
    }

    pub fn as_gas(&self) -> Option<GasState> {
        match self {
            StateValue::Gas(g) => Some(*g),
            _ => None,
        }
    }

    pub fn as_energy(&self) -> Option<f64> {
        match self {
            StateValue::Reservoir { energy } => Some(*energy),
            _ => None,
        }
    }
}

impl From<GasState> for StateValue {
    fn from(g: GasState) -> Self {
        StateValue::Gas(g)
    }
}

/// A state tagged with the atom it belongs to. Distinct atoms never share states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomState {
    pub atom: AtomId,
    pub value: StateValue,
}

/// A state of a (possibly composite) system: one atom state per atom.
///
/// Serializes as a list of `{atom, value}` records sorted by atom.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<AtomState>", from = "Vec<AtomState>")]
pub struct JointState(BTreeMap<AtomId, StateValue>);

impl From<JointState> for Vec<AtomState> {
    fn from(j: JointState) -> Self {
        j.0.into_iter().map(|(atom, value)| AtomState { atom, value }).collect()
    }
}

impl From<Vec<AtomState>> for JointState {
    fn from(v: Vec<AtomState>) -> Self {
        JointState(v.into_iter().map(|s| (s.atom, s.value)).collect())
    }
}

impl JointState {
    pub fn new() -> Self {
        JointState::default()
    }

    pub fn single(atom: AtomId, value: impl Into<StateValue>) -> Self {
        let mut j = JointState::new();
        j.insert(atom, value);
        j
    }

    pub fn insert(&mut self, atom: AtomId, value: impl Into<StateValue>) {
        self.0.insert(atom, value.into());
    }

    pub fn with(mut self, atom: AtomId, value: impl Into<StateValue>) -> Self {
        self.insert(atom, value);
        self
    }

    pub fn get(&self, atom: AtomId) -> Option<&StateValue> {
        self.0.get(&atom)
    }

    pub fn iter(&self) -> impl Iterator<Item = (AtomId, &StateValue)> {
        self.0.iter().map(|(a, v)| (*a, v))
    }

    pub fn atoms(&self) -> impl Iterator<Item = AtomId> + '_ {
        self.0.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn covers(&self, s: &System) -> bool {
        s.atoms().all(|a| self.0.contains_key(&a))
    }

    /// Restriction to the atoms of `s`.
    pub fn restrict(&self, s: &System) -> Result<JointState> {
        s.atoms()
            .map(|a| {
                self.0
                    .get(&a)
                    .cloned()
                    .map(|v| (a, v))
                    .ok_or(ThermoError::MissingState(a))
            })
            .collect::<Result<BTreeMap<_, _>>>()
            .map(JointState)
    }

    /// Joint state of a composition of systems with disjoint atoms.
    pub fn compose(&self, other: &JointState) -> Result<JointState> {
        let mut out = self.0.clone();
        for (a, v) in &other.0 {
            if out.insert(*a, v.clone()).is_some() {
                return Err(ThermoError::Overlap(*a));
            }
        }
        Ok(JointState(out))
    }

    pub fn close_to(&self, other: &JointState, tol: &Tolerances) -> bool {
        self.0.len() == other.0.len()
            && self
                .0
                .iter()
                .all(|(a, v)| other.0.get(a).is_some_and(|w| v.close_to(w, tol)))
    }
}

impl FromIterator<(AtomId, StateValue)> for JointState {
    fn from_iter<I: IntoIterator<Item = (AtomId, StateValue)>>(iter: I) -> Self {
        JointState(iter.into_iter().collect())
    }
}

/// Footprint of a process on one atom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub initial: StateValue,
    #[serde(rename = "final")]
    pub fin: StateValue,
    pub work: f64,
}

impl Entry {
    pub fn new(initial: impl Into<StateValue>, fin: impl Into<StateValue>, work: f64) -> Self {
        Entry {
            initial: initial.into(),
            fin: fin.into(),
            work,
        }
    }
}

/// Cyclic / catalytic classification of a process on a system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Classification {
    pub cyclic: bool,
    pub catalytic: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Process {
    pid: u64,
    entries: BTreeMap<AtomId, Entry>,
    reversible: bool,
    tags: Vec<String>,
}

impl Process {
    /// Builds a process from its per-atom footprint. `reversible` is the
    /// reverse witness: set it only when the constructing model can run the
    /// swapped footprint.
    pub fn new<I>(entries: I, reversible: bool) -> Result<Self>
    where
        I: IntoIterator<Item = (AtomId, Entry)>,
    {
        let entries: BTreeMap<AtomId, Entry> = entries.into_iter().collect();
        if entries.is_empty() {
            return Err(ThermoError::EmptyProcess);
        }
        for (atom, e) in &entries {
            for s in [&e.initial, &e.fin] {
                if s.kind() != atom.kind && atom.kind != AtomKind::Abstract {
                    return Err(ThermoError::InvalidState(format!(
                        "{atom} is {:?} but carries a {:?} state",
                        atom.kind,
                        s.kind()
                    )));
                }
            }
        }
        Ok(Process {
            pid: fresh_pid(),
            entries,
            reversible,
            tags: Vec::new(),
        })
    }

    /// Identity process on `s` at joint state `state`: zero work everywhere,
    /// its own reverse.
    pub fn identity(s: &System, state: &JointState) -> Result<Self> {
        let entries = s
            .atoms()
            .map(|a| {
                let v = state.get(a).ok_or(ThermoError::MissingState(a))?;
                Ok((a, Entry::new(v.clone(), v.clone(), 0.0)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Process::new(entries, true)?.with_tag("identity"))
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        let tag = tag.into();
        if !self.tags.contains(&tag) {
            self.tags.push(tag);
        }
        self
    }

    pub fn pid(&self) -> u64 {
        self.pid
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn has_tag(&self, tag: &str) -> bool {
        self.tags.iter().any(|t| t == tag)
    }

    pub fn entries(&self) -> impl Iterator<Item = (AtomId, &Entry)> {
        self.entries.iter().map(|(a, e)| (*a, e))
    }

    pub fn entry(&self, atom: AtomId) -> Option<&Entry> {
        self.entries.get(&atom)
    }

    pub fn involves(&self, atom: AtomId) -> bool {
        self.entries.contains_key(&atom)
    }

    /// The system of involved atoms.
    pub fn involved(&self) -> System {
        System::new(self.entries.keys().copied()).expect("processes are never empty")
    }

    /// `W_A(p)`; zero for uninvolved atoms.
    pub fn work(&self, atom: AtomId) -> f64 {
        self.entries.get(&atom).map_or(0.0, |e| e.work)
    }

    /// `W_S(p)`: sum of per-atom works over the atoms of `s`.
    pub fn work_of(&self, s: &System) -> f64 {
        s.atoms().map(|a| self.work(a)).sum()
    }

    pub fn initial_state(&self) -> JointState {
        self.entries
            .iter()
            .map(|(a, e)| (*a, e.initial.clone()))
            .collect()
    }

    pub fn final_state(&self) -> JointState {
        self.entries
            .iter()
            .map(|(a, e)| (*a, e.fin.clone()))
            .collect()
    }

    /// True iff the involved atoms are exactly the atoms of `s`.
    pub fn is_work_process(&self, s: &System) -> bool {
        self.entries.len() == s.len() && s.atoms().all(|a| self.entries.contains_key(&a))
    }

    pub fn is_reversible(&self) -> bool {
        self.reversible
    }

    /// Swapped footprint with negated works.
    pub fn reverse(&self) -> Result<Process> {
        if !self.reversible {
            return Err(ThermoError::NoReverseWitness);
        }
        let entries = self
            .entries
            .iter()
            .map(|(a, e)| (*a, Entry::new(e.fin.clone(), e.initial.clone(), -e.work)));
        let mut rev = Process::new(entries, true)?;
        rev.tags = self.tags.clone();
        Ok(rev.with_tag("reverse"))
    }

    /// Zero work and unchanged state on every involved atom.
    pub fn is_identity(&self, tol: &Tolerances) -> bool {
        self.entries
            .values()
            .all(|e| e.work == 0.0 && e.initial.close_to(&e.fin, tol))
    }

    /// Cyclic iff every atom of `c` ends where it started; catalytic iff
    /// additionally the total work on `c` vanishes.
    pub fn classify(&self, c: &System, tol: &Tolerances) -> Classification {
        let cyclic = c.atoms().all(|a| match self.entries.get(&a) {
            Some(e) => e.initial.close_to(&e.fin, tol),
            None => true,
        });
        let scale: f64 = c.atoms().map(|a| self.work(a).abs()).sum::<f64>().max(1.0);
        let catalytic = cyclic && self.work_of(c).abs() <= tol.sign * scale;
        Classification { cyclic, catalytic }
    }

    /// `next ∘ self`: run `self`, then `next`.
    pub fn then(&self, next: &Process, tol: &Tolerances) -> Result<Process> {
        for (atom, e) in &self.entries {
            if let Some(n) = next.entries.get(atom) {
                if !e.fin.close_to(&n.initial, tol) {
                    return Err(ThermoError::StateMismatch(*atom));
                }
            }
        }
        let mut entries = self.entries.clone();
        for (atom, n) in &next.entries {
            entries
                .entry(*atom)
                .and_modify(|e| {
                    e.fin = n.fin.clone();
                    e.work += n.work;
                })
                .or_insert_with(|| n.clone());
        }
        let mut out = Process::new(entries, self.reversible && next.reversible)?;
        for t in self.tags.iter().chain(&next.tags) {
            out = out.with_tag(t.clone());
        }
        Ok(out)
    }

    /// Copy of the footprint on relabeled atoms. Atoms missing from the map keep their id.
    pub fn relabel(&self, mapping: &BTreeMap<AtomId, AtomId>) -> Result<Process> {
        let entries = self
            .entries
            .iter()
            .map(|(a, e)| (*mapping.get(a).unwrap_or(a), e.clone()));
        let mut p = Process::new(entries, self.reversible)?;
        p.tags = self.tags.clone();
        Ok(p)
    }

    /// Footprint restricted to the atoms of `s` (must involve at least one).
    pub fn project(&self, s: &System) -> Result<Process> {
        let entries = self
            .entries
            .iter()
            .filter(|(a, _)| s.contains(**a))
            .map(|(a, e)| (*a, e.clone()));
        let mut p = Process::new(entries, self.reversible)?;
        p.tags = self.tags.clone();
        Ok(p)
    }
}

/// `q ∘ p`.
pub fn concatenate(p: &Process, q: &Process, tol: &Tolerances) -> Result<Process> {
    p.then(q, tol)
}

/// Joint work process of two processes on disjoint atoms.
pub fn join(p1: &Process, p2: &Process, tol: &Tolerances) -> Result<Process> {
    if let Some(a) = p1.entries.keys().find(|a| p2.entries.contains_key(a)) {
        return Err(ThermoError::Overlap(*a));
    }
    p1.then(p2, tol)
}

/// Drops a catalyst `c` from a work process on `s ∨ c`.
pub fn eliminate_catalyst(
    s: &System,
    c: &System,
    p: &Process,
    tol: &Tolerances,
) -> Result<Process> {
    if !s.is_disjoint_from(c) {
        return Err(ThermoError::PreconditionNotMet(
            "system and catalyst overlap".into(),
        ));
    }
    if !p.is_work_process(&s.compose(c)) {
        return Err(ThermoError::NotWorkProcess);
    }
    if !p.classify(c, tol).catalytic {
        return Err(ThermoError::NotCatalytic);
    }
    Ok(p.project(s)?.with_tag("catalyst-eliminated"))
}

#[derive(Serialize, Deserialize)]
struct EntryRecord {
    atom: AtomId,
    initial: StateValue,
    #[serde(rename = "final")]
    fin: StateValue,
    work: f64,
}

#[derive(Serialize, Deserialize)]
struct ProcessRecord {
    pid: u64,
    entries: Vec<EntryRecord>,
    reversible: bool,
    tags: Vec<String>,
}

impl Serialize for Process {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        ProcessRecord {
            pid: self.pid,
            entries: self
                .entries
                .iter()
                .map(|(a, e)| EntryRecord {
                    atom: *a,
                    initial: e.initial.clone(),
                    fin: e.fin.clone(),
                    work: e.work,
                })
                .collect(),
            reversible: self.reversible,
            tags: self.tags.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Process {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rec = ProcessRecord::deserialize(deserializer)?;
        if rec.entries.is_empty() {
            return Err(serde::de::Error::custom("process has no entries"));
        }
        Ok(Process {
            pid: rec.pid,
            entries: rec
                .entries
                .into_iter()
                .map(|e| (e.atom, Entry::new(e.initial, e.fin, e.work)))
                .collect(),
            reversible: rec.reversible,
            tags: rec.tags,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::World;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn abs(v: f64) -> StateValue {
        StateValue::Abstract(vec![v])
    }

    fn step(atom: AtomId, from: f64, to: f64, work: f64) -> (AtomId, Entry) {
        (atom, Entry::new(abs(from), abs(to), work))
    }

    #[test]
    fn concatenation_state_rule_and_work_sum() {
        let w = World::new();
        let (a1, a2, a3) = (w.add_abstract(), w.add_abstract(), w.add_abstract());
        let p = Process::new([step(a1, 0.0, 1.0, 2.0), step(a2, 0.0, 5.0, 1.0)], false).unwrap();
        let q = Process::new([step(a2, 5.0, 6.0, -0.25), step(a3, 7.0, 8.0, 3.0)], false).unwrap();
        let qp = p.then(&q, &tol()).unwrap();

        assert_eq!(qp.involved(), System::new([a1, a2, a3]).unwrap());
        assert_eq!(qp.entry(a1).unwrap(), &Entry::new(abs(0.0), abs(1.0), 2.0));
        assert_eq!(qp.entry(a2).unwrap(), &Entry::new(abs(0.0), abs(6.0), 0.75));
        assert_eq!(qp.entry(a3).unwrap(), &Entry::new(abs(7.0), abs(8.0), 3.0));
    }

    #[test]
    fn disjoint_concatenation_commutes() {
        let w = World::new();
        let (a1, a2) = (w.add_abstract(), w.add_abstract());
        let p = Process::new([step(a1, 0.0, 1.0, 2.0)], false).unwrap();
        let q = Process::new([step(a2, 3.0, 4.0, -1.0)], false).unwrap();
        let qp = p.then(&q, &tol()).unwrap();
        let pq = q.then(&p, &tol()).unwrap();
        assert_eq!(qp.initial_state(), pq.initial_state());
        assert_eq!(qp.final_state(), pq.final_state());
        assert_eq!(qp.work(a1), pq.work(a1));
        assert_eq!(qp.work(a2), pq.work(a2));
    }

    #[test]
    fn mismatched_overlap_is_rejected() {
        let w = World::new();
        let a = w.add_abstract();
        let p = Process::new([step(a, 0.0, 1.0, 0.0)], false).unwrap();
        let q = Process::new([step(a, 1.5, 2.0, 0.0)], false).unwrap();
        assert_eq!(p.then(&q, &tol()), Err(ThermoError::StateMismatch(a)));
    }

    #[test]
    fn work_of_examples() {
        let w = World::new();
        let (a1, a2, a3) = (w.add_abstract(), w.add_abstract(), w.add_abstract());
        let p = Process::new([step(a1, 0.0, 1.0, 2.0), step(a2, 0.0, 1.0, -0.5)], false).unwrap();
        assert_eq!(p.work_of(&System::new([a1, a2]).unwrap()), 1.5);
        assert_eq!(p.work_of(&System::atom(a3)), 0.0);
        let s1 = System::atom(a1);
        let s2 = System::new([a2, a3]).unwrap();
        assert_eq!(p.work_of(&s1.compose(&s2)), p.work_of(&s1) + p.work_of(&s2));
    }

    #[test]
    fn work_process_predicate() {
        let w = World::new();
        let (a1, a2, a3) = (w.add_abstract(), w.add_abstract(), w.add_abstract());
        let p = Process::new([step(a1, 0.0, 1.0, 0.0), step(a2, 0.0, 1.0, 0.0)], false).unwrap();
        assert!(p.is_work_process(&System::new([a1, a2]).unwrap()));
        assert!(!p.is_work_process(&System::atom(a1)));
        assert!(!p.is_work_process(&System::new([a1, a2, a3]).unwrap()));
    }

    #[test]
    fn identity_examples() {
        let w = World::new();
        let g = w.add_gas(crate::gas::GasModel::default());
        let s = System::atom(g);
        let sigma = JointState::single(g, GasState::new(1.0, 1.0).unwrap());
        let id = Process::identity(&s, &sigma).unwrap();
        assert_eq!(
            id.entry(g).unwrap(),
            &Entry::new(GasState::new(1.0, 1.0).unwrap(), GasState::new(1.0, 1.0).unwrap(), 0.0)
        );
        assert!(id.is_identity(&tol()));
        assert_eq!(id.work_of(&s), 0.0);
        let idid = id.then(&id, &tol()).unwrap();
        assert!(idid.is_identity(&tol()));
        assert_eq!(idid.initial_state(), id.initial_state());
        assert!(id.reverse().unwrap().is_identity(&tol()));
        assert_eq!(
            Process::identity(&s, &JointState::new()),
            Err(ThermoError::MissingState(g))
        );
    }

    #[test]
    fn classify_examples() {
        let w = World::new();
        let (a1, a2) = (w.add_abstract(), w.add_abstract());
        let c = System::new([a1, a2]).unwrap();
        let p = Process::new([step(a1, 1.0, 1.0, 1.0)], false).unwrap();
        assert_eq!(
            p.classify(&System::atom(a1), &tol()),
            Classification { cyclic: true, catalytic: false }
        );
        let q = Process::new([step(a1, 1.0, 1.0, 1.0), step(a2, 2.0, 2.0, -1.0)], false).unwrap();
        assert_eq!(
            q.classify(&c, &tol()),
            Classification { cyclic: true, catalytic: true }
        );
        let r = Process::new([step(a1, 1.0, 2.0, 0.0)], false).unwrap();
        assert!(!r.classify(&c, &tol()).cyclic);
    }

    #[test]
    fn catalyst_elimination() {
        let w = World::new();
        let (s1, c1, c2) = (w.add_abstract(), w.add_abstract(), w.add_abstract());
        let s = System::atom(s1);
        let c = System::new([c1, c2]).unwrap();
        let p = Process::new(
            [step(s1, 0.0, 3.0, 4.0), step(c1, 1.0, 1.0, 2.0), step(c2, 5.0, 5.0, -2.0)],
            false,
        )
        .unwrap();
        let reduced = eliminate_catalyst(&s, &c, &p, &tol()).unwrap();
        assert!(reduced.is_work_process(&s));
        assert_eq!(reduced.entry(s1), p.entry(s1));

        let noisy = Process::new(
            [step(s1, 0.0, 3.0, 4.0), step(c1, 1.0, 1.5, 2.0), step(c2, 5.0, 5.0, -2.0)],
            false,
        )
        .unwrap();
        assert_eq!(
            eliminate_catalyst(&s, &c, &noisy, &tol()),
            Err(ThermoError::NotCatalytic)
        );
        let partial = Process::new([step(s1, 0.0, 3.0, 4.0)], false).unwrap();
        assert_eq!(
            eliminate_catalyst(&s, &c, &partial, &tol()),
            Err(ThermoError::NotWorkProcess)
        );
    }

    #[test]
    fn reverse_requires_witness() {
        let w = World::new();
        let a = w.add_abstract();
        let friction = Process::new([step(a, 0.0, 1.0, 1.5)], false).unwrap();
        assert!(!friction.is_reversible());
        assert_eq!(friction.reverse(), Err(ThermoError::NoReverseWitness));

        let p = Process::new([step(a, 0.0, 1.0, 1.5)], true).unwrap();
        let r = p.reverse().unwrap();
        assert_eq!(r.work(a), -1.5);
        assert!(r.then(&p, &tol()).unwrap().is_identity(&tol()));
        let rr = r.reverse().unwrap();
        assert_eq!(rr.entry(a), p.entry(a));
    }

    #[test]
    fn join_rejects_overlap() {
        let w = World::new();
        let (a1, a2) = (w.add_abstract(), w.add_abstract());
        let p1 = Process::new([step(a1, 0.0, 1.0, 2.0)], false).unwrap();
        let p2 = Process::new([step(a2, 0.0, 1.0, 3.0)], false).unwrap();
        let j = join(&p1, &p2, &tol()).unwrap();
        assert_eq!(j.work_of(&System::new([a1, a2]).unwrap()), 5.0);
        assert_eq!(join(&p1, &p1, &tol()), Err(ThermoError::Overlap(a1)));
    }

    #[test]
    fn footprint_json_shape() {
        let w = World::new();
        let a = w.add_reservoir(1.0).unwrap();
        let p = Process::new(
            [(a, Entry::new(StateValue::Reservoir { energy: 0.0 }, StateValue::Reservoir { energy: 1.0 }, 0.0))],
            true,
        )
        .unwrap()
        .with_tag("type3");
        let v: serde_json::Value = serde_json::to_value(&p).unwrap();
        assert_eq!(v["reversible"], true);
        assert_eq!(v["tags"][0], "type3");
        assert_eq!(v["entries"][0]["final"]["E"], 1.0);
        let back: Process = serde_json::from_value(v).unwrap();
        assert_eq!(back, p);
    }
}
