//! Second law, Carnot engines, temperature ratios and absolute temperature.
//!
//! A [`CarnotRun`] is a reversible four-segment cycle of a fresh ideal-gas
//! machine between two reservoirs. Its heats define the temperature ratio
//! `τ(R1, R2) = -Q1 / Q2`, and with a reference reservoir the absolute
//! temperature. Heats are always computed through the energy ledger, never
//! from the reservoir parameters.

use std::collections::HashMap;
use std::sync::Mutex;

use serde::Serialize;
use serde_json::{json, Value};

use crate::energy::EnergyLedger;
use crate::error::{Result, ThermoError};
use crate::gas::{GasAtom, GasModel, GasState};
use crate::process::{JointState, Process};
use crate::quasistatic::QuasistaticFamily;
use crate::reservoir::Reservoir;
use crate::system::System;

/// Tolerance of the derived thermal-equilibrium relation on `τ`.
pub const EQUILIBRIUM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct SecondLawVerdict {
    /// `W_S(p)`, the work done on the cyclic system.
    pub work: f64,
    /// `Q_R(p)`, the heat received by the reservoir.
    pub reservoir_heat: f64,
    pub pass: bool,
}

/// Kelvin–Planck check: a process that is cyclic on `s` and exchanges heat
/// only with `r` cannot deliver work.
pub fn check_second_law(ledger: &EnergyLedger, r: &Reservoir, s: &System, p: &Process) -> Result<SecondLawVerdict> {
    if s.contains(r.atom) {
        return Err(ThermoError::PreconditionNotMet("the reservoir must lie outside the system".into()));
    }
    let pair = s.compose(&r.system());
    if !p.involved().is_subsystem_of(&pair) {
        return Err(ThermoError::PreconditionNotMet(
            "process is not a work process on the system and the reservoir".into(),
        ));
    }
    let tol = ledger.tolerances();
    if !p.classify(s, tol).cyclic {
        return Err(ThermoError::PreconditionNotMet("process is not cyclic on the system".into()));
    }
    let work = p.work_of(s);
    Ok(SecondLawVerdict {
        work,
        reservoir_heat: ledger.heat_of(&r.system(), p)?,
        pass: work >= -tol.sign,
    })
}

/// Shape of the cycle built by [`carnot_cycle`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarnotConfig {
    /// Volume ratio of the isothermal step at `R1`; above 1 the machine
    /// expands there and takes heat from `R1`.
    pub volume_ratio: f64,
    /// Machine volume at the start of the cycle.
    pub start_volume: f64,
    /// Working gas; only `n`, `R` and `gamma` matter.
    pub machine: GasModel,
}

impl Default for CarnotConfig {
    fn default() -> Self {
        CarnotConfig {
            volume_ratio: 2.0,
            start_volume: 1.0,
            machine: GasModel::default(),
        }
    }
}

impl CarnotConfig {
    pub fn with_amount(mut self, n: f64) -> Result<Self> {
        self.machine = self.machine.with_amount(n)?;
        Ok(self)
    }

    pub fn with_volume_ratio(mut self, ratio: f64) -> Result<Self> {
        if !(ratio.is_finite() && ratio > 0.0) {
            return Err(ThermoError::InvalidParameter(format!("volume ratio {ratio}")));
        }
        self.volume_ratio = ratio;
        Ok(self)
    }
}

#[derive(Debug, Clone)]
pub struct CarnotRun {
    pub r1: Reservoir,
    pub r2: Reservoir,
    pub machine: GasAtom,
    pub process: Process,
    pub segments: Vec<Process>,
    /// Heat into `r1`.
    pub q1: f64,
    /// Heat into `r2`.
    pub q2: f64,
    /// Work done on the machine.
    pub w: f64,
}

impl CarnotRun {
    pub fn reversible(&self) -> bool {
        self.process.is_reversible()
    }

    /// `-q1 / q2`.
    pub fn ratio(&self) -> f64 {
        -self.q1 / self.q2
    }

    pub fn to_json(&self) -> Value {
        json!({
            "theta1": self.r1.theta,
            "theta2": self.r2.theta,
            "q1": self.q1,
            "q2": self.q2,
            "w": self.w,
            "reversible": self.reversible(),
            "segments": self.segments,
        })
    }
}

/// Builds the cycle family: isotherm at `r1`, adiabat, isotherm at `r2`,
/// adiabat back. A positive `friction` inserts an isochoric type-1 step
/// raising the pressure by that fraction right after the first isotherm.
fn cycle_segments(
    machine: &GasAtom,
    r1: &Reservoir,
    r2: &Reservoir,
    config: &CarnotConfig,
    friction: f64,
) -> Result<Vec<QuasistaticFamily>> {
    let m = machine.model;
    let a = GasState::new(m.nr() * r1.theta / config.start_volume, config.start_volume)?;
    let first = machine.type3(r1, a, config.volume_ratio * config.start_volume)?;
    let mut b = end_state(machine, &first)?;
    let mut segments = vec![first];
    if friction > 0.0 {
        let heated = machine.type1(b, b.p * (1.0 + friction))?;
        b = end_state(machine, &heated)?;
        segments.push(heated);
    }
    let c2 = m.nr() * r2.theta;
    let vc = m.adiabat_isotherm_volume(m.adiabat_invariant(&b), c2);
    let vd = m.adiabat_isotherm_volume(m.adiabat_invariant(&a), c2);
    let c = GasState::new(c2 / vc, vc)?;
    segments.push(machine.type2_to(b, c)?);
    let cold = machine.type3(r2, c, vd)?;
    let d = end_state(machine, &cold)?;
    segments.push(cold);
    segments.push(machine.type2_to(d, a)?);
    Ok(segments)
}

fn end_state(machine: &GasAtom, f: &QuasistaticFamily) -> Result<GasState> {
    f.final_state()
        .get(machine.atom)
        .and_then(|s| s.as_gas())
        .ok_or(ThermoError::MissingState(machine.atom))
}

fn run_cycle(ledger: &EnergyLedger, r1: &Reservoir, r2: &Reservoir, config: &CarnotConfig, friction: f64) -> Result<CarnotRun> {
    if r1.atom == r2.atom {
        return Err(ThermoError::SameReservoir);
    }
    let machine = GasAtom::new(ledger.world(), config.machine)?;
    let families = cycle_segments(&machine, r1, r2, config, friction)?;
    let tol = ledger.tolerances();
    let mut family = families[0].clone();
    for f in &families[1..] {
        family = family.then(f, tol)?;
    }
    let process = family.process()?.with_tag("carnot");
    if !process.classify(&machine.system(), tol).cyclic {
        return Err(ThermoError::PreconditionNotMet("machine did not return to its start".into()));
    }
    let segments = families.iter().map(|f| f.process()).collect::<Result<Vec<_>>>()?;
    Ok(CarnotRun {
        r1: *r1,
        r2: *r2,
        q1: ledger.heat_of(&r1.system(), &process)?,
        q2: ledger.heat_of(&r2.system(), &process)?,
        w: process.work_of(&machine.system()),
        machine,
        process,
        segments,
    })
}

/// A reversible Carnot cycle with the machine and volume ratio of `config`.
pub fn carnot_cycle(ledger: &EnergyLedger, r1: &Reservoir, r2: &Reservoir, config: &CarnotConfig) -> Result<CarnotRun> {
    run_cycle(ledger, r1, r2, config, 0.0)
}

/// The same cycle with an isochoric friction step raising the pressure by the
/// fraction `friction` after the `r1` isotherm. The result is irreversible.
pub fn degraded_carnot(
    ledger: &EnergyLedger,
    r1: &Reservoir,
    r2: &Reservoir,
    config: &CarnotConfig,
    friction: f64,
) -> Result<CarnotRun> {
    if !(friction > 0.0 && friction.is_finite()) {
        return Err(ThermoError::InvalidParameter(format!("friction fraction {friction}")));
    }
    run_cycle(ledger, r1, r2, config, friction)
}

/// A reversible Carnot run whose heat into `r1` is `q_target`.
pub fn build_carnot(ledger: &EnergyLedger, r1: &Reservoir, r2: &Reservoir, q_target: f64) -> Result<CarnotRun> {
    build_carnot_with(ledger, r1, r2, q_target, &CarnotConfig::default())
}

/// [`build_carnot`] with an explicit starting configuration. The volume ratio
/// is flipped as needed to give `q1` the sign of `q_target`, and the machine
/// amount is rescaled, since the heats are linear in it.
pub fn build_carnot_with(
    ledger: &EnergyLedger,
    r1: &Reservoir,
    r2: &Reservoir,
    q_target: f64,
    config: &CarnotConfig,
) -> Result<CarnotRun> {
    if r1.atom == r2.atom {
        return Err(ThermoError::SameReservoir);
    }
    if !q_target.is_finite() {
        return Err(ThermoError::InvalidParameter(format!("target heat {q_target}")));
    }
    if q_target == 0.0 {
        return trivial_run(ledger, r1, r2, config);
    }
    let mut cfg = *config;
    let expands = cfg.volume_ratio > 1.0;
    // Expanding at r1 draws heat out of it.
    if expands == (q_target > 0.0) {
        cfg.volume_ratio = 1.0 / cfg.volume_ratio;
    }
    let probe = carnot_cycle(ledger, r1, r2, &cfg)?;
    if probe.q1 == 0.0 {
        return Err(ThermoError::PreconditionNotMet("volume ratio 1 moves no heat".into()));
    }
    let n = cfg.machine.n * q_target / probe.q1;
    carnot_cycle(ledger, r1, r2, &cfg.with_amount(n)?)
}

fn trivial_run(ledger: &EnergyLedger, r1: &Reservoir, r2: &Reservoir, config: &CarnotConfig) -> Result<CarnotRun> {
    let machine = GasAtom::new(ledger.world(), config.machine)?;
    let a = GasState::new(machine.model.nr() * r1.theta / config.start_volume, config.start_volume)?;
    let all = machine.system().compose(&r1.system()).compose(&r2.system());
    let state = JointState::single(machine.atom, a)
        .with(r1.atom, r1.state())
        .with(r2.atom, r2.state());
    let process = Process::identity(&all, &state)?.with_tag("carnot");
    Ok(CarnotRun {
        r1: *r1,
        r2: *r2,
        machine,
        segments: vec![process.clone()],
        process,
        q1: 0.0,
        q2: 0.0,
        w: 0.0,
    })
}

/// `τ(R1, R2) = -Q1 / Q2` from a default reversible cycle.
pub fn temperature_ratio(ledger: &EnergyLedger, r1: &Reservoir, r2: &Reservoir) -> Result<f64> {
    temperature_ratio_with(ledger, r1, r2, &CarnotConfig::default())
}

/// `τ(R1, R2)` measured with a specific machine and volume ratio. A
/// reservoir paired with itself is first cloned.
pub fn temperature_ratio_with(ledger: &EnergyLedger, r1: &Reservoir, r2: &Reservoir, config: &CarnotConfig) -> Result<f64> {
    let r2 = if r1.atom == r2.atom {
        r2.duplicate(ledger.world())?
    } else {
        *r2
    };
    let mut cfg = *config;
    if cfg.volume_ratio < 1.0 {
        cfg.volume_ratio = 1.0 / cfg.volume_ratio;
    }
    let run = carnot_cycle(ledger, r1, &r2, &cfg)?;
    if !(run.q1 < 0.0 && run.q2 > 0.0) {
        return Err(ThermoError::PreconditionNotMet(format!(
            "Carnot run moved no heat (q1 = {}, q2 = {})",
            run.q1, run.q2
        )));
    }
    Ok(run.ratio())
}

/// `T(R) = τ(R, R_ref) · T_ref`.
pub fn absolute_temperature(ledger: &EnergyLedger, r: &Reservoir, reference: &Reservoir, t_ref: f64) -> Result<f64> {
    if !(t_ref > 0.0 && t_ref.is_finite()) {
        return Err(ThermoError::InvalidParameter(format!("reference temperature {t_ref}")));
    }
    Ok(temperature_ratio(ledger, r, reference)? * t_ref)
}

/// Thermal equilibrium of reservoirs: `|τ(R1, R2) - 1| ≤ 1e-6`.
pub fn same_temperature(ledger: &EnergyLedger, r1: &Reservoir, r2: &Reservoir) -> Result<bool> {
    Ok((temperature_ratio(ledger, r1, r2)? - 1.0).abs() <= EQUILIBRIUM_TOL)
}

/// An absolute temperature scale fixed by a reference reservoir.
///
/// Reservoirs sharing a parameter `Θ` are equivalent, so results are cached
/// per `Θ`.
#[derive(Debug)]
pub struct TemperatureScale {
    reference: Reservoir,
    t_ref: f64,
    cache: Mutex<HashMap<u64, f64>>,
}

impl TemperatureScale {
    pub fn new(reference: Reservoir, t_ref: f64) -> Result<Self> {
        if !(t_ref > 0.0 && t_ref.is_finite()) {
            return Err(ThermoError::InvalidParameter(format!("reference temperature {t_ref}")));
        }
        Ok(TemperatureScale {
            reference,
            t_ref,
            cache: Mutex::new(HashMap::new()),
        })
    }

    /// Natural units: a reference reservoir with `Θ = 1` at temperature 1.
    pub fn natural(ledger: &EnergyLedger) -> Result<Self> {
        TemperatureScale::new(Reservoir::new(ledger.world(), 1.0)?, 1.0)
    }

    pub fn reference(&self) -> &Reservoir {
        &self.reference
    }

    pub fn t_ref(&self) -> f64 {
        self.t_ref
    }

    pub fn temperature(&self, ledger: &EnergyLedger, r: &Reservoir) -> Result<f64> {
        let key = r.theta.to_bits();
        if let Some(t) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(*t);
        }
        let t = absolute_temperature(ledger, r, &self.reference, self.t_ref)?;
        self.cache.lock().expect("cache lock").insert(key, t);
        Ok(t)
    }
}
