//! The ideal gas: states `(p, V)`, the three primitive process types, closed
//! forms for `U`, `S` and `T`, and the connection templates used to reach any
//! state from any other.
//!
//! * type 1: isochoric friction heating, `δW = V dp / (γ - 1)`, irreversible
//!   and pressure-raising only;
//! * type 2: isolated adiabat along `pV^γ = const`, `δW = -p dV`, reversible;
//! * type 3: isothermal contact with a heat reservoir along `pV = nRΘ`,
//!   `δW = -p dV` on the gas and no work on the reservoir, reversible.
//!
//! The closed forms in [`GasModel`] are reference values. The engine derives
//! `U` and `S` from processes and only tests against them.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::energy::Reach;
use crate::error::{Result, ThermoError};
use crate::process::{Entry, Process, StateValue};
use crate::quasistatic::{OneForm, Point, QuasistaticFamily, QuasistaticModel, Track, Curve};
use crate::reservoir::Reservoir;
use crate::system::{AtomId, AtomKind, System, World};
use crate::tolerance::Tolerances;

/// Smallest admissible pressure or volume.
pub const STATE_FLOOR: f64 = 1e-12;

/// Molar gas constant in J/(mol K).
pub const GAS_CONSTANT_SI: f64 = 8.314462618;

/// Relative tolerance for "same adiabat" / "same isotherm" membership tests.
const CURVE_MEMBERSHIP_REL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GasState {
    pub p: f64,
    #[serde(rename = "V")]
    pub v: f64,
}

impl GasState {
    pub fn new(p: f64, v: f64) -> Result<Self> {
        for (name, x) in [("pressure", p), ("volume", v)] {
            if !(x.is_finite() && x > STATE_FLOOR) {
                return Err(ThermoError::InvalidState(format!("{name} {x} is not positive")));
            }
        }
        Ok(GasState { p, v })
    }

    pub fn point(&self) -> Point {
        [self.p, self.v]
    }

    pub fn pv(&self) -> f64 {
        self.p * self.v
    }
}

/// Parameters of one ideal-gas atom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GasModel {
    /// Amount of substance; a constant of the atom.
    pub n: f64,
    /// Gas constant. `1.0` gives natural units.
    #[serde(rename = "R")]
    pub r: f64,
    /// Isentropic exponent.
    pub gamma: f64,
    /// Reference state for energy and entropy.
    pub sigma0: GasState,
    /// Additive constant of the closed-form internal energy.
    pub u0: f64,
    /// Entropy at `sigma0`.
    pub s0: f64,
}

impl Default for GasModel {
    fn default() -> Self {
        GasModel {
            n: 1.0,
            r: 1.0,
            gamma: 5.0 / 3.0,
            sigma0: GasState { p: 1.0, v: 1.0 },
            u0: 0.0,
            s0: 0.0,
        }
    }
}

impl GasModel {
    pub fn new(n: f64, r: f64, gamma: f64) -> Result<Self> {
        let m = GasModel {
            n,
            r,
            gamma,
            ..GasModel::default()
        };
        m.validate()?;
        Ok(m)
    }

    /// Monoatomic gas with the SI gas constant.
    pub fn si(n: f64) -> Result<Self> {
        GasModel::new(n, GAS_CONSTANT_SI, 5.0 / 3.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n.is_finite() && self.n > 0.0) {
            return Err(ThermoError::InvalidParameter(format!("n = {} must be positive", self.n)));
        }
        if !(self.r.is_finite() && self.r > 0.0) {
            return Err(ThermoError::InvalidParameter(format!("R = {} must be positive", self.r)));
        }
        if !(self.gamma.is_finite() && self.gamma > 1.0) {
            return Err(ThermoError::InvalidParameter(format!(
                "gamma = {} must exceed 1",
                self.gamma
            )));
        }
        GasState::new(self.sigma0.p, self.sigma0.v)?;
        Ok(())
    }

    pub fn with_amount(self, n: f64) -> Result<Self> {
        let m = GasModel { n, ..self };
        m.validate()?;
        Ok(m)
    }

    pub fn with_gamma(self, gamma: f64) -> Result<Self> {
        let m = GasModel { gamma, ..self };
        m.validate()?;
        Ok(m)
    }

    pub fn with_reference(self, sigma0: GasState, u0: f64, s0: f64) -> Result<Self> {
        let m = GasModel { sigma0, u0, s0, ..self };
        m.validate()?;
        Ok(m)
    }

    pub fn nr(&self) -> f64 {
        self.n * self.r
    }

    /// `1 / (γ - 1)`, i.e. `f / 2`; `3/2` for a monoatomic gas.
    pub fn heat_capacity_factor(&self) -> f64 {
        1.0 / (self.gamma - 1.0)
    }

    /// `p V^γ`, constant along type-2 curves.
    pub fn adiabat_invariant(&self, s: &GasState) -> f64 {
        s.p * s.v.powf(self.gamma)
    }

    /// Closed-form internal energy `pV/(γ-1) + U0`.
    pub fn internal_energy(&self, s: &GasState) -> f64 {
        self.heat_capacity_factor() * s.pv() + self.u0
    }

    /// Closed-form entropy `nR (ln(p/p0)/(γ-1) + γ ln(V/V0)/(γ-1)) + S0`.
    pub fn entropy(&self, s: &GasState) -> f64 {
        let c = self.heat_capacity_factor();
        self.nr() * (c * (s.p / self.sigma0.p).ln() + (c + 1.0) * (s.v / self.sigma0.v).ln())
            + self.s0
    }

    /// Ideal gas law `T = pV / (nR)`.
    pub fn temperature(&self, s: &GasState) -> f64 {
        s.pv() / self.nr()
    }

    /// `U(S, V)` obtained by eliminating `p` between the closed forms.
    pub fn energy_from_entropy(&self, entropy: f64, v: f64) -> f64 {
        let c = self.heat_capacity_factor();
        c * self.sigma0.p
            * self.sigma0.v
            * (v / self.sigma0.v).powf(1.0 - self.gamma)
            * ((entropy - self.s0) / (c * self.nr())).exp()
            + self.u0
    }

    /// State with internal energy `u` and volume `v`.
    pub fn state_from_energy(&self, u: f64, v: f64) -> Result<GasState> {
        GasState::new((u - self.u0) / (self.heat_capacity_factor() * v), v)
    }

    /// `dU = (V dp + p dV) / (γ - 1)`.
    pub fn energy_differential(&self) -> OneForm {
        let c = self.heat_capacity_factor();
        Arc::new(move |x, v| c * (x[1] * v[0] + x[0] * v[1]))
    }

    /// Work form of type-1 processes, `V dp / (γ - 1)`.
    pub fn friction_work_form(&self) -> OneForm {
        let c = self.heat_capacity_factor();
        Arc::new(move |x, v| c * x[1] * v[0])
    }

    /// Work form of every reversible process on the gas, `-p dV`.
    pub fn reversible_work_form(&self) -> OneForm {
        Arc::new(|x, v| -x[0] * v[1])
    }

    /// Volume at which the adiabat with invariant `k` meets the isotherm `pV = c`.
    pub fn adiabat_isotherm_volume(&self, k: f64, c: f64) -> f64 {
        (k / c).powf(1.0 / (self.gamma - 1.0))
    }
}

/// Which primitive work processes a catalog may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentTypes {
    pub friction: bool,
    pub adiabat: bool,
}

impl SegmentTypes {
    pub const ALL: SegmentTypes = SegmentTypes {
        friction: true,
        adiabat: true,
    };
    pub const FRICTION_ONLY: SegmentTypes = SegmentTypes {
        friction: true,
        adiabat: false,
    };
    pub const ADIABAT_ONLY: SegmentTypes = SegmentTypes {
        friction: false,
        adiabat: true,
    };
}

fn log_volume_curve(from: GasState, to: GasState, pressure: impl Fn(f64) -> f64 + Send + Sync + 'static, dlnp_dlnv: f64) -> Curve {
    let r = (to.v / from.v).ln();
    let v1 = from.v;
    let pressure = Arc::new(pressure);
    let p_at = pressure.clone();
    Curve::new(
        from.point(),
        to.point(),
        Arc::new(move |s| {
            let v = v1 * (r * s).exp();
            [p_at(v), v]
        }),
        Arc::new(move |s| {
            let v = v1 * (r * s).exp();
            let p = pressure(v);
            [dlnp_dlnv * p * r, v * r]
        }),
    )
}

/// Handle on a registered ideal-gas atom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GasAtom {
    pub atom: AtomId,
    pub model: GasModel,
    /// Quadrature tolerance for the families this atom builds.
    pub quad_tol: f64,
}

impl GasAtom {
    /// Registers a fresh gas atom in `world`.
    pub fn new(world: &World, model: GasModel) -> Result<Self> {
        model.validate()?;
        Ok(GasAtom {
            atom: world.add_gas(model),
            model,
            quad_tol: Tolerances::default().quad,
        })
    }

    pub fn from_world(world: &World, atom: AtomId) -> Result<Self> {
        Ok(GasAtom {
            atom,
            model: world.gas_model(atom)?,
            quad_tol: Tolerances::default().quad,
        })
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.quad_tol = tol;
        self
    }

    pub fn system(&self) -> System {
        System::atom(self.atom)
    }

    fn family(&self, track: Track, reversible: bool, tag: &str) -> Result<QuasistaticFamily> {
        Ok(QuasistaticFamily::new([(self.atom, track)], reversible, tag)?.with_tolerance(self.quad_tol))
    }

    /// Friction heating at constant volume up to pressure `p2`.
    pub fn type1(&self, from: GasState, p2: f64) -> Result<QuasistaticFamily> {
        if p2 < from.p {
            return Err(ThermoError::PressureDecrease { from: from.p, to: p2 });
        }
        let to = GasState::new(p2, from.v)?;
        let (p1, v) = (from.p, from.v);
        let curve = Curve::new(
            from.point(),
            to.point(),
            Arc::new(move |s| [p1 + (p2 - p1) * s, v]),
            Arc::new(move |_| [p2 - p1, 0.0]),
        );
        let track = Track::new(AtomKind::IdealGas, curve, self.model.friction_work_form());
        self.family(track, false, "type1")
    }

    /// Adiabat from `from` to volume `v2`.
    pub fn type2(&self, from: GasState, v2: f64) -> Result<QuasistaticFamily> {
        let k = self.model.adiabat_invariant(&from);
        let to = GasState::new(k / v2.powf(self.model.gamma), v2)?;
        self.adiabat_between(from, to)
    }

    /// Adiabat between two states on the same `pV^γ` curve, with exact endpoints.
    pub fn type2_to(&self, from: GasState, to: GasState) -> Result<QuasistaticFamily> {
        let (k1, k2) = (
            self.model.adiabat_invariant(&from),
            self.model.adiabat_invariant(&to),
        );
        if (k1 - k2).abs() > CURVE_MEMBERSHIP_REL * k1.max(k2) {
            return Err(ThermoError::PreconditionNotMet(format!(
                "states are on different adiabats ({k1} vs {k2})"
            )));
        }
        self.adiabat_between(from, to)
    }

    fn adiabat_between(&self, from: GasState, to: GasState) -> Result<QuasistaticFamily> {
        let k = self.model.adiabat_invariant(&from);
        let gamma = self.model.gamma;
        let curve = log_volume_curve(from, to, move |v| k * v.powf(-gamma), -gamma);
        let track = Track::new(AtomKind::IdealGas, curve, self.model.reversible_work_form());
        self.family(track, true, "type2")
    }

    fn isotherm_curve(&self, from: GasState, to: GasState) -> Curve {
        let c = from.pv();
        log_volume_curve(from, to, move |v| c / v, -1.0)
    }

    /// Isothermal contact with `reservoir` from `from` to volume `v2`.
    ///
    /// The gas must already sit on the reservoir's isotherm `pV = nRΘ`. The
    /// reservoir receives no work; its energy changes by the work done on the
    /// gas so that the gas energy stays constant.
    pub fn type3(&self, reservoir: &Reservoir, from: GasState, v2: f64) -> Result<QuasistaticFamily> {
        let target = self.model.nr() * reservoir.theta;
        let pv = from.pv();
        if (pv - target).abs() > CURVE_MEMBERSHIP_REL * target.max(pv) {
            return Err(ThermoError::OffIsotherm { pv, target });
        }
        let to = GasState::new(pv / v2, v2)?;
        let gas_track = Track::new(
            AtomKind::IdealGas,
            self.isotherm_curve(from, to),
            self.model.reversible_work_form(),
        );
        let e0 = reservoir.energy;
        let slope = -pv * (v2 / from.v).ln();
        let reservoir_curve = Curve::new(
            [e0, 0.0],
            [e0 + slope, 0.0],
            Arc::new(move |s| [e0 + slope * s, 0.0]),
            Arc::new(move |_| [slope, 0.0]),
        );
        let reservoir_track = Track::new(
            AtomKind::Reservoir,
            reservoir_curve,
            crate::quasistatic::zero_form(),
        );
        Ok(QuasistaticFamily::new(
            [(self.atom, gas_track), (reservoir.atom, reservoir_track)],
            true,
            "type3",
        )?
        .with_tolerance(self.quad_tol))
    }

    /// Isothermal expansion driven by friction instead of reservoir contact:
    /// same curve as type 3, but the gas alone, with `δW = dU`.
    pub fn friction_isotherm(&self, from: GasState, v2: f64) -> Result<QuasistaticFamily> {
        if v2 < from.v {
            return Err(ThermoError::PreconditionNotMet(
                "friction can only drive an isothermal expansion".into(),
            ));
        }
        let to = GasState::new(from.pv() / v2, v2)?;
        let track = Track::new(
            AtomKind::IdealGas,
            self.isotherm_curve(from, to),
            self.model.energy_differential(),
        );
        self.family(track, false, "friction-isotherm")
    }

    /// The type-2-then-type-1 work process joining two states, oriented from
    /// the smaller to the larger `pV^γ`.
    pub fn connect(&self, a: GasState, b: GasState) -> Result<Process> {
        let tol = Tolerances::default();
        if a == b {
            return Process::identity(&self.system(), &crate::process::JointState::single(self.atom, a));
        }
        let (ka, kb) = (self.model.adiabat_invariant(&a), self.model.adiabat_invariant(&b));
        if ka == kb {
            return self.type2_to(a, b)?.process();
        }
        let (lo, hi) = if ka < kb { (a, b) } else { (b, a) };
        let k_lo = ka.min(kb);
        let p_mid = k_lo / hi.v.powf(self.model.gamma);
        let mid = GasState::new(p_mid, hi.v)?;
        let family = if lo.v == hi.v {
            self.type1(lo, hi.p)?
        } else {
            self.adiabat_between(lo, mid)?.then(&self.type1(mid, hi.p)?, &tol)?
        };
        Ok(family.process()?.with_tag("connect"))
    }

    /// Adiabat to the `Θ'` isotherm of `reservoir`, isotherm, adiabat to `b`.
    pub fn connect_reversible(
        &self,
        reservoir: &Reservoir,
        a: GasState,
        b: GasState,
    ) -> Result<Vec<QuasistaticFamily>> {
        let c = self.model.nr() * reservoir.theta;
        let v1 = self.model.adiabat_isotherm_volume(self.model.adiabat_invariant(&a), c);
        let v2 = self.model.adiabat_isotherm_volume(self.model.adiabat_invariant(&b), c);
        let s1 = GasState::new(c / v1, v1)?;
        let down = self.type2_to(a, s1)?;
        let contact = self.type3(reservoir, s1, v2)?;
        let s2 = contact
            .final_state()
            .get(self.atom)
            .and_then(StateValue::as_gas)
            .expect("type 3 keeps the gas track");
        let up = self.type2_to(s2, b)?;
        Ok(vec![down, contact, up])
    }

    /// Work processes on this gas alone leading from `a` to `b`, built from
    /// at most `depth` alternating type-1/type-2 segments.
    ///
    /// Type 1 raises `pV^γ` and type 2 preserves it, so a lower target
    /// invariant is unreachable at any depth.
    pub fn work_paths(&self, a: GasState, b: GasState, depth: usize, allowed: SegmentTypes) -> Result<Reach> {
        let tol = Tolerances::default();
        if a == b {
            let id = Process::identity(&self.system(), &crate::process::JointState::single(self.atom, a))?;
            return Ok(Reach::Found(vec![id]));
        }
        let gamma = self.model.gamma;
        let (ka, kb) = (self.model.adiabat_invariant(&a), self.model.adiabat_invariant(&b));
        let same_adiabat = (ka - kb).abs() <= CURVE_MEMBERSHIP_REL * ka.max(kb);
        let same_volume = a.v == b.v;

        if !allowed.adiabat {
            return Ok(if allowed.friction && same_volume && b.p >= a.p && depth >= 1 {
                Reach::Found(vec![self.type1(a, b.p)?.process()?.with_tag("path:1")])
            } else if allowed.friction && same_volume && b.p >= a.p {
                Reach::Inconclusive
            } else {
                Reach::Unreachable
            });
        }
        if !allowed.friction {
            return Ok(if same_adiabat && depth >= 1 {
                Reach::Found(vec![self.type2_to(a, b)?.process()?.with_tag("path:2")])
            } else if same_adiabat {
                Reach::Inconclusive
            } else {
                Reach::Unreachable
            });
        }
        if same_adiabat {
            return Ok(if depth >= 1 {
                Reach::Found(vec![self.type2_to(a, b)?.process()?.with_tag("path:2")])
            } else {
                Reach::Inconclusive
            });
        }
        if kb < ka {
            return Ok(Reach::Unreachable);
        }

        let at = |k: f64, v: f64| GasState::new(k / v.powf(gamma), v);
        let mut paths: Vec<Process> = Vec::new();
        let push = |paths: &mut Vec<Process>, fam: Result<QuasistaticFamily>, tag: &str| -> Result<()> {
            paths.push(fam?.process()?.with_tag(tag));
            Ok(())
        };
        if same_volume {
            if depth >= 1 {
                push(&mut paths, self.type1(a, b.p), "path:1")?;
            }
        } else if depth >= 2 {
            let mid = at(ka, b.v)?;
            push(&mut paths, self.type2_to(a, mid)?.then(&self.type1(mid, b.p)?, &tol), "path:2-1")?;
            let mid = at(kb, a.v)?;
            push(&mut paths, self.type1(a, mid.p)?.then(&self.type2_to(mid, b)?, &tol), "path:1-2")?;
        }
        // Longer templates go through an off-axis volume and an intermediate adiabat.
        let v_m = 1.5 * (a.v * b.v).sqrt();
        let k_m = 0.5 * (ka + kb);
        if depth >= 3 {
            let m1 = at(ka, v_m)?;
            let m2 = at(kb, v_m)?;
            push(
                &mut paths,
                self.type2_to(a, m1)?
                    .then(&self.type1(m1, m2.p)?, &tol)?
                    .then(&self.type2_to(m2, b)?, &tol),
                "path:2-1-2",
            )?;
            if !same_volume {
                let m1 = at(k_m, a.v)?;
                let m2 = at(k_m, b.v)?;
                push(
                    &mut paths,
                    self.type1(a, m1.p)?
                        .then(&self.type2_to(m1, m2)?, &tol)?
                        .then(&self.type1(m2, b.p)?, &tol),
                    "path:1-2-1",
                )?;
            }
        }
        if depth >= 4 {
            let m1 = at(ka, v_m)?;
            let m2 = at(k_m, v_m)?;
            let m3 = at(k_m, b.v)?;
            push(
                &mut paths,
                self.type2_to(a, m1)?
                    .then(&self.type1(m1, m2.p)?, &tol)?
                    .then(&self.type2_to(m2, m3)?, &tol)?
                    .then(&self.type1(m3, b.p)?, &tol),
                "path:2-1-2-1",
            )?;
        }
        Ok(if paths.is_empty() {
            Reach::Inconclusive
        } else {
            Reach::Found(paths)
        })
    }
}

/// Direct isochoric heat conduction of `q ≥ 0` from gas `hot` to gas `cold`.
///
/// Neither gas receives work. Heat only flows from the hotter to the colder
/// gas, and not so much that their temperatures cross.
pub fn conduct(hot: &GasAtom, hot_state: GasState, cold: &GasAtom, cold_state: GasState, q: f64) -> Result<Process> {
    if !(q >= 0.0) {
        return Err(ThermoError::InvalidParameter("conducted heat must be non-negative".into()));
    }
    let (t_hot, t_cold) = (hot.model.temperature(&hot_state), cold.model.temperature(&cold_state));
    if q > 0.0 && t_hot <= t_cold {
        return Err(ThermoError::PreconditionNotMet(format!(
            "heat cannot flow from T = {t_hot} to T = {t_cold}"
        )));
    }
    let hot_after = GasState::new(
        hot_state.p - q / (hot.model.heat_capacity_factor() * hot_state.v),
        hot_state.v,
    )?;
    let cold_after = GasState::new(
        cold_state.p + q / (cold.model.heat_capacity_factor() * cold_state.v),
        cold_state.v,
    )?;
    if hot.model.temperature(&hot_after) < cold.model.temperature(&cold_after) {
        return Err(ThermoError::PreconditionNotMet(
            "conduction would reverse the temperature order".into(),
        ));
    }
    Ok(Process::new(
        [
            (hot.atom, Entry::new(hot_state, hot_after, 0.0)),
            (cold.atom, Entry::new(cold_state, cold_after, 0.0)),
        ],
        false,
    )?
    .with_tag("conduction"))
}

/// A gas together with the reservoir used for its reversible template.
#[derive(Debug, Clone)]
pub struct GasProbe {
    pub gas: GasAtom,
    pub reservoir: Reservoir,
}

impl QuasistaticModel for GasProbe {
    fn work_tangents(&self, state: Point) -> Result<(Point, Point)> {
        let s = GasState::new(state[0], state[1])?;
        let friction = self.gas.type1(s, 2.0 * s.p)?;
        let adiabat = self.gas.type2(s, 2.0 * s.v)?;
        Ok((
            friction.track(self.gas.atom).expect("own track").curve.tangent(0.0),
            adiabat.track(self.gas.atom).expect("own track").curve.tangent(0.0),
        ))
    }

    fn reversible_tangents(&self, state: Point) -> Result<(Point, Point)> {
        let s = GasState::new(state[0], state[1])?;
        let to = GasState::new(s.p / 2.0, 2.0 * s.v)?;
        let adiabat = self.gas.type2(s, 2.0 * s.v)?;
        Ok((
            adiabat.track(self.gas.atom).expect("own track").curve.tangent(0.0),
            self.gas.isotherm_curve(s, to).tangent(0.0),
        ))
    }

    fn connects(&self, a: Point, b: Point) -> Result<bool> {
        let (a, b) = (GasState::new(a[0], a[1])?, GasState::new(b[0], b[1])?);
        let p = self.gas.connect(a, b)?;
        let e = p.entry(self.gas.atom).expect("connect involves the gas");
        let tol = Tolerances::default();
        let (sa, sb) = (StateValue::Gas(a), StateValue::Gas(b));
        Ok((e.initial.close_to(&sa, &tol) && e.fin.close_to(&sb, &tol))
            || (e.initial.close_to(&sb, &tol) && e.fin.close_to(&sa, &tol)))
    }

    fn connects_reversibly(&self, a: Point, b: Point) -> Result<bool> {
        let (a, b) = (GasState::new(a[0], a[1])?, GasState::new(b[0], b[1])?);
        let tol = Tolerances::default();
        let segments = self.gas.connect_reversible(&self.reservoir, a, b)?;
        let mut family = segments[0].clone();
        for s in &segments[1..] {
            family = family.then(s, &tol)?;
        }
        let p = family.process()?;
        let e = p.entry(self.gas.atom).expect("template involves the gas");
        Ok(p.is_reversible()
            && e.initial.close_to(&StateValue::Gas(a), &tol)
            && e.fin.close_to(&StateValue::Gas(b), &tol))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quasistatic::check_qs_postulates;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use std::f64::consts::LN_2;

    fn gas() -> (World, GasAtom) {
        let w = World::new();
        let g = GasAtom::new(&w, GasModel::default()).unwrap();
        (w, g)
    }

    fn st(p: f64, v: f64) -> GasState {
        GasState::new(p, v).unwrap()
    }

    #[test]
    fn type1_examples() {
        let (_, g) = gas();
        let p = g.type1(st(1.0, 1.0), 2.0).unwrap().process().unwrap();
        assert_abs_diff_eq!(p.work(g.atom), 1.5, epsilon = 1e-12);
        assert!(!p.is_reversible());
        let id = g.type1(st(1.0, 1.0), 1.0).unwrap().process().unwrap();
        assert!(id.is_identity(&Tolerances::default()));
        assert!(matches!(
            g.type1(st(2.0, 1.0), 1.0),
            Err(ThermoError::PressureDecrease { .. })
        ));
    }

    #[test]
    fn type2_examples() {
        let (_, g) = gas();
        let fam = g.type2(st(1.0, 1.0), 2.0).unwrap();
        let p = fam.process().unwrap();
        let end = p.entry(g.atom).unwrap().fin.as_gas().unwrap();
        assert_abs_diff_eq!(end.p, 2f64.powf(-5.0 / 3.0), epsilon = 1e-15);
        assert_abs_diff_eq!(end.p, 0.3149802625, epsilon = 1e-10);
        // -∫ V^{-5/3} dV from 1 to 2 = 1.5 (2^{-2/3} - 1)
        let oracle = 1.5 * (2f64.powf(-2.0 / 3.0) - 1.0);
        assert_abs_diff_eq!(p.work(g.atom), oracle, epsilon = 1e-11);

        let id = g.type2(st(1.0, 1.0), 1.0).unwrap().process().unwrap();
        assert!(id.is_identity(&Tolerances::default()));

        let tol = Tolerances::default();
        let back = fam.reversed().unwrap().process().unwrap();
        assert!(p.then(&back, &tol).unwrap().is_identity(&tol) || {
            let c = p.then(&back, &tol).unwrap();
            c.work(g.atom).abs() < 1e-14 && c.initial_state() == c.final_state()
        });
        let rev = p.reverse().unwrap();
        assert_eq!(rev.work(g.atom), -p.work(g.atom));
        assert_eq!(rev.entry(g.atom).unwrap().fin, StateValue::Gas(st(1.0, 1.0)));
    }

    #[test]
    fn type3_examples() {
        let (w, g) = gas();
        let r = Reservoir::new(&w, 1.0).unwrap();
        let fam = g.type3(&r, st(1.0, 1.0), 2.0).unwrap();
        let p = fam.process().unwrap();
        assert!(p.is_reversible());
        assert_abs_diff_eq!(p.work(g.atom), -LN_2, epsilon = 1e-11);
        assert_eq!(p.work(r.atom), 0.0);
        let e = p.entry(r.atom).unwrap().fin.as_energy().unwrap();
        assert_abs_diff_eq!(e, -LN_2, epsilon = 1e-15);

        let id = g.type3(&r, st(1.0, 1.0), 1.0).unwrap().process().unwrap();
        assert!(id.is_identity(&Tolerances::default()));
        assert!(matches!(
            g.type3(&r, st(2.0, 1.0), 2.0),
            Err(ThermoError::OffIsotherm { .. })
        ));
    }

    #[test]
    fn closed_forms() {
        let m = GasModel::default();
        assert_relative_eq!(m.internal_energy(&st(2.0, 3.0)), 9.0, max_relative = 1e-14);
        assert_abs_diff_eq!(m.entropy(&st(1.0, 2.0)), 2.5 * LN_2, epsilon = 1e-15);
        assert_abs_diff_eq!(m.temperature(&st(2.0, 3.0)), 6.0, epsilon = 1e-15);
        // 1.5 ln 2^{-5/3} + 2.5 ln 2 = 0
        assert_abs_diff_eq!(m.entropy(&st(2f64.powf(-5.0 / 3.0), 2.0)), 0.0, epsilon = 1e-15);
        let s = m.entropy(&st(2.0, 3.0));
        assert_relative_eq!(m.energy_from_entropy(s, 3.0), 9.0, max_relative = 1e-14);
        let back = m.state_from_energy(9.0, 3.0).unwrap();
        assert_relative_eq!(back.p, 2.0, max_relative = 1e-15);
    }

    #[test]
    fn diatomic_forms_follow_gamma() {
        let m = GasModel::default().with_gamma(1.4).unwrap();
        assert_relative_eq!(m.heat_capacity_factor(), 2.5, max_relative = 1e-14);
        let a = st(1.0, 1.0);
        let b = st(2f64.powf(-1.4), 2.0);
        assert_abs_diff_eq!(m.entropy(&a), m.entropy(&b), epsilon = 1e-14);
        assert!(GasModel::default().with_gamma(1.0).is_err());
    }

    #[test]
    fn connect_endpoints_and_work() {
        let (_, g) = gas();
        let (a, b) = (st(1.0, 1.0), st(3.0, 0.5));
        let p = g.connect(a, b).unwrap();
        let e = p.entry(g.atom).unwrap();
        // 3 * 0.5^{5/3} < 1, so the process runs from b to a
        assert_eq!(e.initial, StateValue::Gas(b));
        assert_eq!(e.fin, StateValue::Gas(a));
        let m = g.model;
        assert_relative_eq!(
            p.work(g.atom),
            m.internal_energy(&a) - m.internal_energy(&b),
            max_relative = 1e-9
        );

        assert!(g.connect(a, a).unwrap().is_identity(&Tolerances::default()));

        let on_adiabat = st(2f64.powf(-5.0 / 3.0), 2.0);
        let p = g.connect(a, on_adiabat).unwrap();
        assert!(p.has_tag("type2") && !p.has_tag("type1"));
    }

    #[test]
    fn connect_reversible_template() {
        let (w, g) = gas();
        let r = Reservoir::new(&w, 1.0).unwrap();
        let segs = g.connect_reversible(&r, st(1.0, 1.0), st(1.0, 2.0)).unwrap();
        assert_eq!(segs.len(), 3);
        assert!(segs.iter().all(|s| s.is_reversible()));
        let contact = segs[1].process().unwrap();
        // heat into the gas on the isotherm is minus its work there
        let q = -contact.work(g.atom);
        assert_abs_diff_eq!(q / r.theta, 2.5 * LN_2, epsilon = 1e-10);

        let same = g.connect_reversible(&r, st(1.0, 1.0), st(1.0, 1.0)).unwrap();
        let p = same[1].process().unwrap();
        assert_eq!(p.initial_state(), p.final_state());
    }

    #[test]
    fn work_paths_catalog() {
        let (_, g) = gas();
        let reach = g.work_paths(st(1.0, 1.0), st(2.0, 1.0), 4, SegmentTypes::ALL).unwrap();
        let Reach::Found(paths) = reach else { panic!("expected paths") };
        assert!(paths.len() >= 3);
        for p in &paths {
            assert_relative_eq!(p.work(g.atom), 1.5, max_relative = 1e-9);
        }
        assert!(matches!(
            g.work_paths(st(2.0, 1.0), st(1.0, 1.0), 4, SegmentTypes::FRICTION_ONLY).unwrap(),
            Reach::Unreachable
        ));
        assert!(matches!(
            g.work_paths(st(1.0, 1.0), st(2.0, 3.0), 1, SegmentTypes::ALL).unwrap(),
            Reach::Inconclusive
        ));
        let Reach::Found(paths) = g.work_paths(st(1.0, 1.0), st(2.0, 3.0), 4, SegmentTypes::ALL).unwrap() else {
            panic!()
        };
        assert_eq!(paths.len(), 5);
        let w0 = paths[0].work(g.atom);
        for p in &paths {
            assert_relative_eq!(p.work(g.atom), w0, max_relative = 1e-9);
            assert_eq!(p.entry(g.atom).unwrap().fin, StateValue::Gas(st(2.0, 3.0)));
        }
    }

    #[test]
    fn conduction_rules() {
        let w = World::new();
        let a = GasAtom::new(&w, GasModel::default()).unwrap();
        let b = GasAtom::new(&w, GasModel::default()).unwrap();
        let p = conduct(&a, st(2.0, 1.0), &b, st(1.0, 1.0), 0.3).unwrap();
        assert_eq!(p.work(a.atom), 0.0);
        assert_eq!(p.work(b.atom), 0.0);
        assert!(conduct(&b, st(1.0, 1.0), &a, st(2.0, 1.0), 0.3).is_err());
        assert!(conduct(&a, st(2.0, 1.0), &b, st(1.0, 1.0), 1.0).is_err());
    }

    #[test]
    fn friction_isotherm_has_no_net_work() {
        let (_, g) = gas();
        let p = g.friction_isotherm(st(1.0, 1.0), 2.0).unwrap().process().unwrap();
        assert_abs_diff_eq!(p.work(g.atom), 0.0, epsilon = 1e-12);
        assert!(!p.is_reversible());
        assert!(g.friction_isotherm(st(1.0, 1.0), 0.5).is_err());
    }

    #[test]
    fn qs_postulates_hold_for_gas() {
        let (w, g) = gas();
        let probe = GasProbe {
            gas: g,
            reservoir: Reservoir::new(&w, 1.0).unwrap(),
        };
        let states = [[1.0, 1.0], [0.3, 4.0], [5.0, 0.2]];
        let pairs = [([1.0, 1.0], [3.0, 0.5]), ([0.5, 2.0], [2.0, 0.7])];
        let report = check_qs_postulates(&probe, &states, &pairs, &Tolerances::default());
        assert!(report.passed(), "{report:?}");
        let (u, v) = probe.work_tangents([1.0, 1.0]).unwrap();
        // type 1 moves along p only; the adiabat has dp/dV = -γ p / V
        assert_eq!(u[1], 0.0);
        assert_relative_eq!(v[0] / v[1], -5.0 / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn state_floor_enforced() {
        assert!(GasState::new(0.0, 1.0).is_err());
        assert!(GasState::new(1.0, 1e-13).is_err());
        assert!(GasState::new(f64::NAN, 1.0).is_err());
    }
}
