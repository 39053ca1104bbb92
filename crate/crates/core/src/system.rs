//! Systems as finite, non-empty sets of atoms drawn from a [`World`].
//!
//! Composition is set union and intersection is set intersection. The empty
//! set is not a system, so an empty intersection is reported as
//! [`Meet::Disjoint`] rather than as a value of type [`System`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use crate::error::{Result, ThermoError};
use crate::gas::GasModel;

/// Largest system whose subsystems are enumerated eagerly.
pub const MAX_ENUMERABLE_ATOMS: usize = 16;

/// Model tag carried by every atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AtomKind {
    IdealGas,
    Reservoir,
    Abstract,
}

/// World-scoped identifier of an atomic system.
///
/// Equality, ordering and hashing look at `id` only.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AtomId {
    pub id: u64,
    pub kind: AtomKind,
}

impl PartialEq for AtomId {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}

impl Eq for AtomId {}

impl Hash for AtomId {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.id.hash(state);
    }
}

impl PartialOrd for AtomId {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for AtomId {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.id.cmp(&other.id)
    }
}

impl fmt::Display for AtomId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "A{}", self.id)
    }
}

/// Result of intersecting two systems.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Meet {
    System(System),
    Disjoint,
}

impl Meet {
    pub fn is_disjoint(&self) -> bool {
        matches!(self, Meet::Disjoint)
    }

    pub fn system(self) -> Option<System> {
        match self {
            Meet::System(s) => Some(s),
            Meet::Disjoint => None,
        }
    }
}

/// A finite non-empty set of atoms. Immutable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<AtomId>", into = "Vec<AtomId>")]
pub struct System(BTreeSet<AtomId>);

impl TryFrom<Vec<AtomId>> for System {
    type Error = ThermoError;

    fn try_from(atoms: Vec<AtomId>) -> Result<Self> {
        System::new(atoms)
    }
}

impl From<System> for Vec<AtomId> {
    fn from(s: System) -> Self {
        s.0.into_iter().collect()
    }
}

impl From<AtomId> for System {
    fn from(atom: AtomId) -> Self {
        System::atom(atom)
    }
}

impl System {
    pub fn new<I: IntoIterator<Item = AtomId>>(atoms: I) -> Result<Self> {
        let set: BTreeSet<AtomId> = atoms.into_iter().collect();
        if set.is_empty() {
            return Err(ThermoError::EmptySystem);
        }
        Ok(System(set))
    }

    /// The atomic system `{atom}`.
    pub fn atom(atom: AtomId) -> Self {
        System(BTreeSet::from([atom]))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// Always false; kept for API symmetry with collections.
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn atoms(&self) -> impl Iterator<Item = AtomId> + '_ {
        self.0.iter().copied()
    }

    pub fn contains(&self, atom: AtomId) -> bool {
        self.0.contains(&atom)
    }

    pub fn is_atomic(&self) -> bool {
        self.0.len() == 1
    }

    /// `self ∨ other`.
    pub fn compose(&self, other: &System) -> System {
        System(self.0.union(&other.0).copied().collect())
    }

    /// `self ∧ other`.
    pub fn intersect(&self, other: &System) -> Meet {
        let set: BTreeSet<AtomId> = self.0.intersection(&other.0).copied().collect();
        if set.is_empty() {
            Meet::Disjoint
        } else {
            Meet::System(System(set))
        }
    }

    pub fn is_disjoint_from(&self, other: &System) -> bool {
        self.0.is_disjoint(&other.0)
    }

    pub fn is_subsystem_of(&self, whole: &System) -> bool {
        self.0.is_subset(&whole.0)
    }

    pub fn is_proper_subsystem_of(&self, whole: &System) -> bool {
        self.is_subsystem_of(whole) && self.0.len() < whole.0.len()
    }

    /// Singleton decomposition; composing the result gives back `self`.
    pub fn atoms_of(&self) -> Vec<System> {
        self.0.iter().map(|&a| System::atom(a)).collect()
    }

    /// All `2^n - 1` non-empty subsets, in bitmask order.
    pub fn subsystems(&self) -> Result<Vec<System>> {
        let n = self.0.len();
        if n > MAX_ENUMERABLE_ATOMS {
            return Err(ThermoError::SizeLimit(n));
        }
        let atoms: Vec<AtomId> = self.atoms().collect();
        Ok((1u32..(1u32 << n))
            .map(|mask| {
                System(
                    atoms
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| mask & (1 << i) != 0)
                        .map(|(_, &a)| a)
                        .collect(),
                )
            })
            .collect())
    }

    /// The unique `S''` with `part ∨ S'' = self` and `part ∧ S'' = Disjoint`.
    pub fn disjoint_complement(&self, part: &System) -> Result<System> {
        if !part.is_proper_subsystem_of(self) {
            return Err(ThermoError::NotProperSubsystem);
        }
        Ok(System(self.0.difference(&part.0).copied().collect()))
    }
}

/// Join of an iterator of systems; `None` for an empty iterator.
pub fn compose_all<'a, I: IntoIterator<Item = &'a System>>(systems: I) -> Option<System> {
    systems
        .into_iter()
        .fold(None, |acc: Option<System>, s| match acc {
            None => Some(s.clone()),
            Some(a) => Some(a.compose(s)),
        })
}

/// Model parameters attached to an atom.
#[derive(Debug, Clone, PartialEq)]
pub enum Binding {
    Gas(GasModel),
    Reservoir { theta: f64 },
    Abstract,
}

impl Binding {
    pub fn kind(&self) -> AtomKind {
        match self {
            Binding::Gas(_) => AtomKind::IdealGas,
            Binding::Reservoir { .. } => AtomKind::Reservoir,
            Binding::Abstract => AtomKind::Abstract,
        }
    }
}

/// The registry of atoms.
///
/// Allocation goes through an atomic counter and the binding table sits
/// behind a lock, so a `World` can be shared between threads.
#[derive(Debug, Default)]
pub struct World {
    next: AtomicU64,
    bindings: RwLock<BTreeMap<AtomId, Binding>>,
}

impl World {
    pub fn new() -> Self {
        World::default()
    }

    fn allocate(&self, binding: Binding) -> AtomId {
        let id = self.next.fetch_add(1, Ordering::SeqCst) + 1;
        let atom = AtomId {
            id,
            kind: binding.kind(),
        };
        self.bindings
            .write()
            .expect("world lock poisoned")
            .insert(atom, binding);
        atom
    }

    pub fn add_gas(&self, model: GasModel) -> AtomId {
        self.allocate(Binding::Gas(model))
    }

    pub fn add_reservoir(&self, theta: f64) -> Result<AtomId> {
        if !(theta.is_finite() && theta > 0.0) {
            return Err(ThermoError::InvalidParameter(format!(
                "reservoir parameter must be positive, got {theta}"
            )));
        }
        Ok(self.allocate(Binding::Reservoir { theta }))
    }

    pub fn add_abstract(&self) -> AtomId {
        self.allocate(Binding::Abstract)
    }

    pub fn contains(&self, atom: AtomId) -> bool {
        self.bindings
            .read()
            .expect("world lock poisoned")
            .contains_key(&atom)
    }

    pub fn binding(&self, atom: AtomId) -> Result<Binding> {
        self.bindings
            .read()
            .expect("world lock poisoned")
            .get(&atom)
            .cloned()
            .ok_or(ThermoError::UnknownAtom(atom))
    }

    pub fn gas_model(&self, atom: AtomId) -> Result<GasModel> {
        match self.binding(atom)? {
            Binding::Gas(m) => Ok(m),
            _ => Err(ThermoError::NotAGas(atom)),
        }
    }

    pub fn reservoir_theta(&self, atom: AtomId) -> Result<f64> {
        match self.binding(atom)? {
            Binding::Reservoir { theta } => Ok(theta),
            _ => Err(ThermoError::NotAReservoir(atom)),
        }
    }

    pub fn atom_count(&self) -> usize {
        self.bindings.read().expect("world lock poisoned").len()
    }

    /// Checks that every atom of `s` is registered here.
    pub fn owns(&self, s: &System) -> Result<()> {
        let table = self.bindings.read().expect("world lock poisoned");
        match s.atoms().find(|a| !table.contains_key(a)) {
            Some(a) => Err(ThermoError::UnknownAtom(a)),
            None => Ok(()),
        }
    }

    /// Allocates an equivalent, disjoint copy of `s` with duplicated model
    /// bindings. Returns the copy and the atom bijection.
    pub fn clone_system(&self, s: &System) -> Result<(System, BTreeMap<AtomId, AtomId>)> {
        let mut mapping = BTreeMap::new();
        for atom in s.atoms() {
            let binding = self.binding(atom)?;
            mapping.insert(atom, self.allocate(binding));
        }
        let copy = System::new(mapping.values().copied())?;
        Ok((copy, mapping))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atoms(world: &World, n: usize) -> Vec<AtomId> {
        (0..n).map(|_| world.add_abstract()).collect()
    }

    fn sys(ids: &[AtomId]) -> System {
        System::new(ids.iter().copied()).unwrap()
    }

    #[test]
    fn compose_examples() {
        let w = World::new();
        let a = atoms(&w, 3);
        assert_eq!(sys(&[a[0]]).compose(&sys(&[a[1]])), sys(&[a[0], a[1]]));
        assert_eq!(
            sys(&[a[0], a[1]]).compose(&sys(&[a[1], a[2]])),
            sys(&[a[0], a[1], a[2]])
        );
        let s = sys(&[a[0], a[2]]);
        assert_eq!(s.compose(&s), s);
    }

    #[test]
    fn intersect_examples() {
        let w = World::new();
        let a = atoms(&w, 3);
        assert_eq!(
            sys(&[a[0], a[1]]).intersect(&sys(&[a[1], a[2]])),
            Meet::System(sys(&[a[1]]))
        );
        assert!(sys(&[a[0]]).intersect(&sys(&[a[1]])).is_disjoint());
        let s = sys(&[a[0], a[1]]);
        assert_eq!(s.intersect(&s), Meet::System(s.clone()));
    }

    #[test]
    fn empty_system_rejected() {
        assert_eq!(System::new(vec![]), Err(ThermoError::EmptySystem));
    }

    #[test]
    fn subsystems_and_atoms() {
        let w = World::new();
        let a = atoms(&w, 2);
        let s = sys(&a);
        assert_eq!(s.atoms_of(), vec![sys(&[a[0]]), sys(&[a[1]])]);
        let subs = s.subsystems().unwrap();
        assert_eq!(subs.len(), 3);
        assert!(subs.contains(&sys(&[a[0]])));
        assert!(subs.contains(&sys(&[a[1]])));
        assert!(subs.contains(&s));
        assert_eq!(compose_all(&s.atoms_of()), Some(s));
    }

    #[test]
    fn subsystem_enumeration_capped() {
        let w = World::new();
        let big = sys(&atoms(&w, 17));
        assert_eq!(big.subsystems(), Err(ThermoError::SizeLimit(17)));
        let ok = sys(&atoms(&w, 4));
        assert_eq!(ok.subsystems().unwrap().len(), 15);
    }

    #[test]
    fn disjoint_complement_examples() {
        let w = World::new();
        let a = atoms(&w, 3);
        let whole = sys(&a);
        let rest = whole.disjoint_complement(&sys(&[a[1]])).unwrap();
        assert_eq!(rest, sys(&[a[0], a[2]]));
        assert!(rest.intersect(&sys(&[a[1]])).is_disjoint());

        let pair = sys(&[a[0], a[1]]);
        assert_eq!(
            pair.disjoint_complement(&pair),
            Err(ThermoError::NotProperSubsystem)
        );
        assert_eq!(
            pair.disjoint_complement(&sys(&[a[2]])),
            Err(ThermoError::NotProperSubsystem)
        );
    }

    #[test]
    fn clone_allocates_fresh_equivalent_atoms() {
        let w = World::new();
        let g = w.add_gas(GasModel::default().with_amount(2.0).unwrap());
        let r = w.add_reservoir(1.5).unwrap();
        let s = sys(&[g, r]);
        let (copy, map) = w.clone_system(&s).unwrap();
        assert!(copy.intersect(&s).is_disjoint());
        assert_eq!(map.len(), 2);
        assert_eq!(map[&g].kind, AtomKind::IdealGas);
        assert_eq!(w.gas_model(map[&g]).unwrap().n, 2.0);
        assert_eq!(w.reservoir_theta(map[&r]).unwrap(), 1.5);
    }

    #[test]
    fn system_json_is_sorted_descriptor_array() {
        let w = World::new();
        let a = atoms(&w, 2);
        let s = sys(&[a[1], a[0]]);
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(
            json,
            format!(
                r#"[{{"id":{},"kind":"abstract"}},{{"id":{},"kind":"abstract"}}]"#,
                a[0].id, a[1].id
            )
        );
        let back: System = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
        assert!(serde_json::from_str::<System>("[]").is_err());
    }
}
