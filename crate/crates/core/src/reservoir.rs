//! Heat reservoirs: atoms whose single state coordinate is their energy `E`.
//!
//! A reservoir is characterised by its parameter `Θ`. Two reservoirs with the
//! same `Θ` are interchangeable, which is what lets a reservoir be "cloned"
//! whenever a construction needs a second copy of it.

use serde::Serialize;

use crate::error::{Result, ThermoError};
use crate::process::{Entry, Process, StateValue};
use crate::system::{AtomId, System, World};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Reservoir {
    pub atom: AtomId,
    pub theta: f64,
    /// Current energy coordinate.
    pub energy: f64,
}

impl Reservoir {
    /// Registers a fresh reservoir at energy 0.
    pub fn new(world: &World, theta: f64) -> Result<Self> {
        Ok(Reservoir {
            atom: world.add_reservoir(theta)?,
            theta,
            energy: 0.0,
        })
    }

    pub fn from_world(world: &World, atom: AtomId, energy: f64) -> Result<Self> {
        Ok(Reservoir {
            atom,
            theta: world.reservoir_theta(atom)?,
            energy,
        })
    }

    pub fn at_energy(self, energy: f64) -> Self {
        Reservoir { energy, ..self }
    }

    pub fn state(&self) -> StateValue {
        StateValue::Reservoir {
            energy: self.energy,
        }
    }

    pub fn system(&self) -> System {
        System::atom(self.atom)
    }

    /// A new, distinct reservoir with the same `Θ` and energy.
    pub fn duplicate(&self, world: &World) -> Result<Self> {
        Ok(Reservoir {
            atom: world.add_reservoir(self.theta)?,
            ..*self
        })
    }

    /// Stirring the reservoir with work `w ≥ 0`; its energy rises by `w`.
    pub fn friction(&self, w: f64) -> Result<Process> {
        if !(w >= 0.0 && w.is_finite()) {
            return Err(ThermoError::InvalidParameter(format!(
                "friction work must be non-negative, got {w}"
            )));
        }
        Ok(Process::new(
            [(
                self.atom,
                Entry::new(self.state(), self.at_energy(self.energy + w).state(), w),
            )],
            false,
        )?
        .with_tag("reservoir-friction"))
    }
}

/// The same footprint with every energy of reservoir `atom` shifted by `delta`.
///
/// Reservoir behaviour does not depend on the absolute energy, so the shifted
/// footprint is again a process of the model.
pub fn translate(p: &Process, atom: AtomId, delta: f64) -> Result<Process> {
    let shift = |s: &StateValue| match s {
        StateValue::Reservoir { energy } => Ok(StateValue::Reservoir {
            energy: energy + delta,
        }),
        _ => Err(ThermoError::NotAReservoir(atom)),
    };
    let entries = p
        .entries()
        .map(|(a, e)| {
            if a == atom {
                Ok((a, Entry::new(shift(&e.initial)?, shift(&e.fin)?, e.work)))
            } else {
                Ok((a, e.clone()))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Process::new(entries, p.is_reversible())?;
    for t in p.tags() {
        out = out.with_tag(t.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn friction_raises_energy() {
        let w = World::new();
        let r = Reservoir::new(&w, 2.0).unwrap();
        let p = r.friction(0.5).unwrap();
        assert_eq!(p.work(r.atom), 0.5);
        assert_eq!(p.entry(r.atom).unwrap().fin.as_energy(), Some(0.5));
        assert!(r.friction(-1.0).is_err());
    }

    #[test]
    fn translation_shifts_both_ends() {
        let w = World::new();
        let r = Reservoir::new(&w, 2.0).unwrap();
        let p = translate(&r.friction(1.0).unwrap(), r.atom, 10.0).unwrap();
        let e = p.entry(r.atom).unwrap();
        assert_eq!(e.initial.as_energy(), Some(10.0));
        assert_eq!(e.fin.as_energy(), Some(11.0));
        assert_eq!(e.work, 1.0);
    }

    #[test]
    fn duplicate_is_distinct() {
        let w = World::new();
        let r = Reservoir::new(&w, 2.0).unwrap();
        let c = r.duplicate(&w).unwrap();
        assert_ne!(r.atom, c.atom);
        assert_eq!(w.reservoir_theta(c.atom).unwrap(), 2.0);
    }
}
