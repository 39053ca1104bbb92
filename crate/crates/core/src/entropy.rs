//! Temperatures of heat flows, Clausius sums, entropy and the Entropy
//! Theorem.
//!
//! Entropy of a gas state `σ` is `S0 + Σ Q_i / T_i` along the reversible
//! template adiabat, isotherm at a reservoir `R'`, adiabat from the reference
//! state to `σ`. Only the isotherm exchanges heat; its temperature is the
//! absolute temperature of `R'` obtained from Carnot runs.

use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;

use serde::Serialize;

use crate::carnot::TemperatureScale;
use crate::energy::EnergyLedger;
use crate::error::{Result, ThermoError};
use crate::gas::{GasAtom, GasState};
use crate::process::{JointState, Process, StateValue};
use crate::reservoir::Reservoir;
use crate::system::{AtomId, Binding, System};
use crate::tolerance::Tolerances;

/// A closed interval of temperatures; a singleton has `lo == hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TemperatureSet {
    pub lo: f64,
    pub hi: f64,
}

impl TemperatureSet {
    pub fn singleton(t: f64) -> Self {
        TemperatureSet { lo: t, hi: t }
    }

    pub fn is_singleton(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, t: f64) -> bool {
        self.lo <= t && t <= self.hi
    }
}

/// One step of a cycle: a process, the heat it brings into the probe
/// system, and the temperature at which that heat flows.
#[derive(Debug, Clone)]
pub struct HeatFlowRecord {
    pub process: Process,
    pub q: f64,
    pub temperature: Option<f64>,
}

/// `Σ q_i / T_i` over a sequence whose concatenation is cyclic on `probe`.
///
/// A record without a temperature is accepted only when its heat is zero
/// within `tol.sign`; it then contributes nothing.
pub fn clausius_sum(probe: &System, records: &[HeatFlowRecord], tol: &Tolerances) -> Result<f64> {
    let Some(first) = records.first() else {
        return Ok(0.0);
    };
    let mut total = first.process.clone();
    for r in &records[1..] {
        total = total.then(&r.process, tol)?;
    }
    if !total.classify(probe, tol).cyclic {
        return Err(ThermoError::NotCyclic);
    }
    let mut sum = 0.0;
    for (i, r) in records.iter().enumerate() {
        match r.temperature {
            Some(t) if t > 0.0 => sum += r.q / t,
            Some(_) => {
                return Err(ThermoError::InvalidParameter(format!("record {i} has a non-positive temperature")))
            }
            None if r.q.abs() <= tol.sign => {}
            None => return Err(ThermoError::UnassignedTemperature(i)),
        }
    }
    Ok(sum)
}

#[derive(Debug, Clone, Serialize)]
pub struct EntropyVerdict {
    pub delta_s: f64,
    pub reversible: bool,
    pub pass: bool,
}

/// Entropy as a state function of gas atoms, derived from reversible
/// reservoir contacts.
pub struct EntropyLedger<'a> {
    energy: &'a EnergyLedger,
    scale: TemperatureScale,
    references: BTreeMap<AtomId, (GasState, f64)>,
    theta_prime: Option<f64>,
    reservoirs: Mutex<HashMap<u64, Reservoir>>,
    cache: Mutex<HashMap<(AtomId, u64, u64, u64), f64>>,
}

impl<'a> EntropyLedger<'a> {
    /// Ledger in natural units (reference reservoir `Θ = 1` at `T = 1`).
    pub fn new(energy: &'a EnergyLedger) -> Result<Self> {
        let scale = TemperatureScale::natural(energy)?;
        Ok(EntropyLedger::with_scale(energy, scale))
    }

    pub fn with_scale(energy: &'a EnergyLedger, scale: TemperatureScale) -> Self {
        EntropyLedger {
            energy,
            scale,
            references: BTreeMap::new(),
            theta_prime: None,
            reservoirs: Mutex::new(HashMap::new()),
            cache: Mutex::new(HashMap::new()),
        }
    }

    /// Fixes the parameter of the intermediate reservoir `R'` for every
    /// atom. By default each atom uses the isotherm through its reference
    /// state.
    pub fn with_theta_prime(mut self, theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(ThermoError::InvalidParameter(format!("reservoir parameter {theta}")));
        }
        self.theta_prime = Some(theta);
        self.cache.lock().expect("cache lock").clear();
        Ok(self)
    }

    pub fn set_reference(&mut self, atom: AtomId, sigma0: GasState, s0: f64) {
        self.references.insert(atom, (sigma0, s0));
        self.cache.lock().expect("cache lock").retain(|k, _| k.0 != atom);
    }

    pub fn energy(&self) -> &EnergyLedger {
        self.energy
    }

    pub fn scale(&self) -> &TemperatureScale {
        &self.scale
    }

    fn tol(&self) -> &Tolerances {
        self.energy.tolerances()
    }

    fn gas(&self, atom: AtomId) -> Result<GasAtom> {
        match self.energy.world().binding(atom)? {
            Binding::Gas(_) => GasAtom::from_world(self.energy.world(), atom),
            _ => Err(ThermoError::NotAGas(atom)),
        }
    }

    fn reference(&self, gas: &GasAtom) -> (GasState, f64) {
        self.references
            .get(&gas.atom)
            .copied()
            .unwrap_or((gas.model.sigma0, gas.model.s0))
    }

    /// A reservoir with parameter `theta`, shared between calls.
    pub fn reservoir(&self, theta: f64) -> Result<Reservoir> {
        let mut map = self.reservoirs.lock().expect("reservoir lock");
        if let Some(r) = map.get(&theta.to_bits()) {
            return Ok(*r);
        }
        let r = Reservoir::new(self.energy.world(), theta)?;
        map.insert(theta.to_bits(), r);
        Ok(r)
    }

    /// Absolute temperature of a reservoir.
    pub fn reservoir_temperature(&self, r: &Reservoir) -> Result<f64> {
        self.scale.temperature(self.energy, r)
    }

    /// Absolute temperature of a gas state: that of the reservoir whose
    /// isotherm passes through it.
    pub fn gas_temperature(&self, atom: AtomId, state: &GasState) -> Result<f64> {
        let gas = self.gas(atom)?;
        let r = self.reservoir(state.pv() / gas.model.nr())?;
        self.reservoir_temperature(&r)
    }

    /// Entropy of one gas atom, with the intermediate reservoir parameter
    /// `theta_prime`.
    pub fn atom_entropy_via(&self, atom: AtomId, state: &GasState, theta_prime: f64) -> Result<f64> {
        let key = (atom, state.p.to_bits(), state.v.to_bits(), theta_prime.to_bits());
        if let Some(s) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(*s);
        }
        let gas = self.gas(atom)?;
        let (sigma0, s0) = self.reference(&gas);
        let r = self.reservoir(theta_prime)?;
        let t = self.reservoir_temperature(&r)?;
        let mut sum = 0.0;
        for family in gas.connect_reversible(&r, sigma0, *state)? {
            let p = family.process()?;
            if p.involves(r.atom) {
                sum += self.energy.heat_of(&gas.system(), &p)? / t;
            }
        }
        let s = s0 + sum;
        self.cache.lock().expect("cache lock").insert(key, s);
        Ok(s)
    }

    pub fn atom_entropy(&self, atom: AtomId, state: &GasState) -> Result<f64> {
        let theta = match self.theta_prime {
            Some(t) => t,
            None => {
                let gas = self.gas(atom)?;
                gas.model.temperature(&self.reference(&gas).0)
            }
        };
        self.atom_entropy_via(atom, state, theta)
    }

    /// `S_S(σ)`, summed over the atoms of `s`.
    pub fn entropy(&self, s: &System, state: &JointState) -> Result<f64> {
        s.atoms()
            .map(|a| {
                let v = state.get(a).ok_or(ThermoError::MissingState(a))?;
                let g = v.as_gas().ok_or(ThermoError::NotAGas(a))?;
                self.atom_entropy(a, &g)
            })
            .sum()
    }

    /// `ΔS_S(p)` over the atoms of `s` that `p` involves.
    pub fn delta_s(&self, s: &System, p: &Process) -> Result<f64> {
        let mut total = 0.0;
        for atom in s.atoms() {
            if let Some(e) = p.entry(atom) {
                if e.initial != e.fin {
                    let (a, b) = (gas_of(atom, &e.initial)?, gas_of(atom, &e.fin)?);
                    total += self.atom_entropy(atom, &b)? - self.atom_entropy(atom, &a)?;
                }
            }
        }
        Ok(total)
    }

    /// Entropy never decreases in a work process, and stays put in a
    /// reversible one.
    pub fn check_entropy_theorem(&self, s: &System, p: &Process) -> Result<EntropyVerdict> {
        if !p.involved().is_subsystem_of(s) {
            return Err(ThermoError::NotWorkProcess);
        }
        let delta_s = self.delta_s(s, p)?;
        let slack = self.tol().sign;
        let reversible = p.is_reversible();
        let pass = delta_s >= -slack && (!reversible || delta_s.abs() <= slack);
        Ok(EntropyVerdict {
            delta_s,
            reversible,
            pass,
        })
    }

    /// Temperatures at which heat flows from `s1` into `s2` in the work
    /// process `p` on `s1 ∨ s2`.
    ///
    /// A reservoir side gives the singleton of its temperature. Direct
    /// conduction between two gases admits every temperature between the
    /// colder and the hotter gas, and none if heat runs uphill.
    pub fn assign_heat_temperature(&self, s1: &System, s2: &System, p: &Process) -> Result<TemperatureSet> {
        if !s1.is_disjoint_from(s2) {
            return Err(ThermoError::PreconditionNotMet("the two systems overlap".into()));
        }
        if !p.involved().is_subsystem_of(&s1.compose(s2)) {
            return Err(ThermoError::NotWorkProcess);
        }
        let q = self.energy.heat_of(s2, p)?;
        if q.abs() <= self.tol().sign {
            return Err(ThermoError::ZeroHeat);
        }
        for side in [s1, s2] {
            if side.is_atomic() {
                let atom = side.atoms().next().expect("atomic");
                if let Binding::Reservoir { .. } = self.energy.world().binding(atom)? {
                    let e = p.entry(atom).map(|e| &e.initial).ok_or(ThermoError::MissingState(atom))?;
                    let r = Reservoir::from_world(self.energy.world(), atom, e.as_energy().unwrap_or(0.0))?;
                    return Ok(TemperatureSet::singleton(self.reservoir_temperature(&r)?));
                }
            }
        }
        let single_gas = |s: &System| -> Result<(AtomId, GasState)> {
            if !s.is_atomic() {
                return Err(ThermoError::NoTemperature);
            }
            let atom = s.atoms().next().expect("atomic");
            let e = p.entry(atom).ok_or(ThermoError::NoTemperature)?;
            Ok((atom, e.initial.as_gas().ok_or(ThermoError::NoTemperature)?))
        };
        let (a1, g1) = single_gas(s1)?;
        let (a2, g2) = single_gas(s2)?;
        let (t1, t2) = (self.gas_temperature(a1, &g1)?, self.gas_temperature(a2, &g2)?);
        match (q > 0.0, t1 > t2, t2 > t1) {
            (true, true, _) => Ok(TemperatureSet { lo: t2, hi: t1 }),
            (false, _, true) => Ok(TemperatureSet { lo: t1, hi: t2 }),
            _ => Err(ThermoError::NoTemperature),
        }
    }

    /// Record for a process seen from the gas `probe`, with the temperature of
    /// its heat flow when the process touches a reservoir.
    pub fn record(&self, probe: &System, p: &Process) -> Result<HeatFlowRecord> {
        let q = self.energy.heat_of(probe, p)?;
        let outside: Vec<AtomId> = p.involved().atoms().filter(|a| !probe.contains(*a)).collect();
        let mut temperature = None;
        if let [atom] = outside[..] {
            if q.abs() > self.tol().sign {
                let set = self.assign_heat_temperature(&System::atom(atom), probe, p)?;
                if set.is_singleton() {
                    temperature = Some(set.lo);
                }
            }
        }
        Ok(HeatFlowRecord {
            process: p.clone(),
            q,
            temperature,
        })
    }
}

fn gas_of(atom: AtomId, s: &StateValue) -> Result<GasState> {
    s.as_gas().ok_or(ThermoError::NotAGas(atom))
}
