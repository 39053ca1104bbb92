//! Scaled systems, extensive and intensive variables, removal of an internal
//! constraint, and the principle of maximum entropy for the ideal gas.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ThermoError};
use crate::gas::{GasModel, GasState};
use crate::process::{Entry, Process};
use crate::system::{AtomId, World};

/// Rational scale factor.
pub type Scale = Ratio<i64>;

/// Keeps every part of a split at least this fraction of the total away from
/// the boundary of the state space.
pub const SPLIT_FLOOR: f64 = 1e-9;

/// `λ · model`: `n`, the reference volume and the reference constants of
/// energy and entropy scale by `λ`; the reference pressure does not.
pub fn scaled_model(base: &GasModel, lambda: f64) -> Result<GasModel> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(ThermoError::NonPositiveScale);
    }
    let m = GasModel {
        n: base.n * lambda,
        sigma0: GasState {
            p: base.sigma0.p,
            v: base.sigma0.v * lambda,
        },
        u0: base.u0 * lambda,
        s0: base.s0 * lambda,
        ..*base
    };
    m.validate()?;
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledGas {
    pub base: GasModel,
    pub factor: Scale,
}

pub fn scale(base: &GasModel, factor: Scale) -> Result<ScaledGas> {
    if *factor.numer() == 0 || (*factor.numer() < 0) != (*factor.denom() < 0) {
        return Err(ThermoError::NonPositiveScale);
    }
    Ok(ScaledGas { base: *base, factor })
}

impl ScaledGas {
    pub fn lambda(&self) -> f64 {
        *self.factor.numer() as f64 / *self.factor.denom() as f64
    }

    pub fn model(&self) -> GasModel {
        scaled_model(&self.base, self.lambda()).expect("factor checked positive")
    }

    /// `λσ`: pressure is kept, volume scales.
    pub fn scaled_state(&self, s: &GasState) -> GasState {
        GasState {
            p: s.p,
            v: s.v * self.lambda(),
        }
    }

    /// `λp`: the footprint of `p` on `from` carried over to the scaled atom
    /// `to`, states scaled and work multiplied by `λ`.
    pub fn scale_footprint(&self, p: &Process, from: AtomId, to: AtomId) -> Result<Process> {
        let e = p.entry(from).ok_or(ThermoError::MissingState(from))?;
        let (a, b) = (
            e.initial.as_gas().ok_or(ThermoError::NotAGas(from))?,
            e.fin.as_gas().ok_or(ThermoError::NotAGas(from))?,
        );
        Process::new(
            [(
                to,
                Entry::new(self.scaled_state(&a), self.scaled_state(&b), e.work * self.lambda()),
            )],
            p.is_reversible(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VariableClass {
    Extensive,
    Intensive,
    Neither,
}

/// The state variables of the gas that can be classified by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GasVariable {
    Pressure,
    Volume,
    Energy,
    Entropy,
    Temperature,
}

impl GasVariable {
    pub fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "p" => GasVariable::Pressure,
            "V" => GasVariable::Volume,
            "U" => GasVariable::Energy,
            "S" => GasVariable::Entropy,
            "T" => GasVariable::Temperature,
            _ => return None,
        })
    }

    pub fn eval(self, m: &GasModel, s: &GasState) -> f64 {
        match self {
            GasVariable::Pressure => s.p,
            GasVariable::Volume => s.v,
            GasVariable::Energy => m.internal_energy(s),
            GasVariable::Entropy => m.entropy(s),
            GasVariable::Temperature => m.temperature(s),
        }
    }
}

/// Factors probed by [`classify_variable`].
pub const CLASSIFY_FACTORS: [(i64, i64); 3] = [(1, 2), (2, 1), (3, 1)];

/// Compares `X_{λS}(λσ)` with `λ X_S(σ)` and `X_S(σ)` over `states` for
/// every factor in [`CLASSIFY_FACTORS`], at relative tolerance `1e-9`.
pub fn classify_variable<F>(base: &GasModel, states: &[GasState], probe: F) -> Result<VariableClass>
where
    F: Fn(&GasModel, &GasState) -> Result<f64>,
{
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0);
    let (mut extensive, mut intensive) = (true, true);
    for (n, d) in CLASSIFY_FACTORS {
        let g = scale(base, Scale::new(n, d))?;
        let scaled = g.model();
        for s in states {
            let x = probe(base, s)?;
            let y = probe(&scaled, &g.scaled_state(s))?;
            extensive &= close(y, g.lambda() * x);
            intensive &= close(y, x);
        }
    }
    Ok(match (extensive, intensive) {
        (true, false) => VariableClass::Extensive,
        (false, true) => VariableClass::Intensive,
        // A variable that vanishes on every probe is both; call it extensive.
        (true, true) => VariableClass::Extensive,
        (false, false) => VariableClass::Neither,
    })
}

/// A gas state described by its internal energy and volume.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UvState {
    #[serde(rename = "U")]
    pub u: f64,
    #[serde(rename = "V")]
    pub v: f64,
}

impl UvState {
    pub fn new(u: f64, v: f64) -> Self {
        UvState { u, v }
    }

    pub fn to_gas(&self, m: &GasModel) -> Result<GasState> {
        m.state_from_energy(self.u, self.v)
    }

    pub fn from_gas(m: &GasModel, s: &GasState) -> Self {
        UvState {
            u: m.internal_energy(s),
            v: s.v,
        }
    }
}

impl std::ops::Add for UvState {
    type Output = UvState;
    fn add(self, o: UvState) -> UvState {
        UvState {
            u: self.u + o.u,
            v: self.v + o.v,
        }
    }
}

/// Closed-form entropy of model `m` at `(U, V)`.
pub fn entropy_uv(m: &GasModel, s: &UvState) -> Result<f64> {
    Ok(m.entropy(&s.to_gas(m)?))
}

/// A registered gas atom whose model is a scaling of a base model.
#[derive(Debug, Clone, Copy)]
pub struct ScaledAtom {
    pub atom: AtomId,
    pub gas: ScaledGas,
}

impl ScaledAtom {
    pub fn new(world: &World, gas: ScaledGas) -> Self {
        ScaledAtom {
            atom: world.add_gas(gas.model()),
            gas,
        }
    }
}

/// Lets two scaled copies of one gas exchange energy and volume freely.
///
/// The result gives each part the share of the total `(U, V)` proportional to
/// its scale factor, with no work on either part. It is reversible exactly
/// when the parts were already in that split.
pub fn remove_constraint(
    first: &ScaledAtom,
    s1: UvState,
    second: &ScaledAtom,
    s2: UvState,
) -> Result<(Process, UvState)> {
    if first.gas.base != second.gas.base {
        return Err(ThermoError::IncompatibleBases);
    }
    let (m1, m2) = (first.gas.model(), second.gas.model());
    let total = s1 + s2;
    let (l1, l2) = (first.gas.lambda(), second.gas.lambda());
    let share = l1 / (l1 + l2);
    let f1 = UvState::new(total.u * share, total.v * share);
    let f2 = UvState::new(total.u - f1.u, total.v - f1.v);
    let tol = 1e-12 * total.u.abs().max(total.v.abs()).max(1.0);
    let proportional = (f1.u - s1.u).abs() <= tol && (f1.v - s1.v).abs() <= tol;
    let (f1, f2) = if proportional { (s1, s2) } else { (f1, f2) };
    let p = Process::new(
        [
            (first.atom, Entry::new(s1.to_gas(&m1)?, f1.to_gas(&m1)?, 0.0)),
            (second.atom, Entry::new(s2.to_gas(&m2)?, f2.to_gas(&m2)?, 0.0)),
        ],
        proportional,
    )?
    .with_tag("remove-constraint");
    Ok((p, total))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MaxEntropySplit {
    pub first: UvState,
    pub second: UvState,
    pub s_max: f64,
}

/// Maximises `S_{λA}(U', V') + S_{(1-λ)A}(U - U', V - V')` numerically.
pub fn max_entropy_split(base: &GasModel, lambda: f64, total: UvState) -> Result<MaxEntropySplit> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(ThermoError::InvalidParameter(format!("split fraction {lambda} outside (0, 1)")));
    }
    let (m1, m2) = (scaled_model(base, lambda)?, scaled_model(base, 1.0 - lambda)?);
    let free = total.u - base.u0;
    if !(free > 0.0 && total.v > 0.0) {
        return Err(ThermoError::InvalidState(format!("total ({}, {}) is not a gas state", total.u, total.v)));
    }
    let split = |x: [f64; 2]| {
        let a = UvState::new(m1.u0 + x[0] * free, x[1] * total.v);
        let b = UvState::new(total.u - a.u, total.v - a.v);
        (a, b)
    };
    let objective = |x: [f64; 2]| -> f64 {
        if x.iter().any(|&t| !(SPLIT_FLOOR..=1.0 - SPLIT_FLOOR).contains(&t)) {
            return f64::NEG_INFINITY;
        }
        let (a, b) = split(x);
        match (entropy_uv(&m1, &a), entropy_uv(&m2, &b)) {
            (Ok(s1), Ok(s2)) => s1 + s2,
            _ => f64::NEG_INFINITY,
        }
    };
    let x = maximize_2d(&objective, [0.5, 0.5], 0.2)?;
    let s_max = objective(x);
    if !s_max.is_finite() {
        return Err(ThermoError::OptimizerFailed("maximum lies on the boundary".into()));
    }
    let (first, second) = split(x);
    Ok(MaxEntropySplit { first, second, s_max })
}

const NM_MAX_ITER: usize = 2000;

/// Nelder–Mead ascent followed by Newton steps on a finite-difference
/// Hessian.
fn maximize_2d(f: &dyn Fn([f64; 2]) -> f64, start: [f64; 2], step: f64) -> Result<[f64; 2]> {
    let mut simplex = [start, [start[0] + step, start[1]], [start[0], start[1] + step]];
    let mut values = simplex.map(f);
    let mut converged = false;
    for _ in 0..NM_MAX_ITER {
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
        let (best, mid, worst) = (idx[0], idx[1], idx[2]);
        let spread = (values[best] - values[worst]).abs();
        let size = (0..3)
            .map(|i| {
                let d = [simplex[i][0] - simplex[best][0], simplex[i][1] - simplex[best][1]];
                d[0].abs().max(d[1].abs())
            })
            .fold(0.0, f64::max);
        if size < 1e-11 || (spread <= 1e-15 * values[best].abs().max(1.0) && size < 1e-7) {
            converged = true;
            break;
        }
        let c = [
            0.5 * (simplex[best][0] + simplex[mid][0]),
            0.5 * (simplex[best][1] + simplex[mid][1]),
        ];
        let along = |t: f64| [c[0] + t * (simplex[worst][0] - c[0]), c[1] + t * (simplex[worst][1] - c[1])];
        let xr = along(-1.0);
        let fr = f(xr);
        if fr > values[best] {
            let xe = along(-2.0);
            let fe = f(xe);
            if fe > fr {
                simplex[worst] = xe;
                values[worst] = fe;
            } else {
                simplex[worst] = xr;
                values[worst] = fr;
            }
        } else if fr > values[mid] {
            simplex[worst] = xr;
            values[worst] = fr;
        } else {
            let xc = if fr > values[worst] { along(-0.5) } else { along(0.5) };
            let fc = f(xc);
            if fc > values[worst].max(fr) {
                simplex[worst] = xc;
                values[worst] = fc;
            } else {
                for i in [mid, worst] {
                    simplex[i] = [
                        0.5 * (simplex[i][0] + simplex[best][0]),
                        0.5 * (simplex[i][1] + simplex[best][1]),
                    ];
                    values[i] = f(simplex[i]);
                }
            }
        }
    }
    if !converged {
        return Err(ThermoError::OptimizerFailed("simplex did not contract".into()));
    }
    let best = (0..3).max_by(|&a, &b| values[a].total_cmp(&values[b])).expect("three vertices");
    let mut x = simplex[best];
    let mut fx = values[best];
    for _ in 0..3 {
        let h = 1e-5;
        let fxy = |dx: f64, dy: f64| f([x[0] + dx, x[1] + dy]);
        let g = [
            (fxy(h, 0.0) - fxy(-h, 0.0)) / (2.0 * h),
            (fxy(0.0, h) - fxy(0.0, -h)) / (2.0 * h),
        ];
        let hxx = (fxy(h, 0.0) - 2.0 * fx + fxy(-h, 0.0)) / (h * h);
        let hyy = (fxy(0.0, h) - 2.0 * fx + fxy(0.0, -h)) / (h * h);
        let hxy = (fxy(h, h) - fxy(h, -h) - fxy(-h, h) + fxy(-h, -h)) / (4.0 * h * h);
        let det = hxx * hyy - hxy * hxy;
        if !(det > 0.0 && hxx < 0.0) {
            break;
        }
        let step = [(hyy * g[0] - hxy * g[1]) / det, (hxx * g[1] - hxy * g[0]) / det];
        let cand = [x[0] - step[0], x[1] - step[1]];
        let fc = f(cand);
        if fc >= fx {
            x = cand;
            fx = fc;
        } else {
            break;
        }
    }
    Ok(x)
}

#[derive(Debug, Clone, Serialize)]
pub struct ConcavityViolation {
    pub a: UvState,
    pub b: UvState,
    pub lambda: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ConcavityReport {
    pub checked: usize,
    pub min_gap: f64,
    pub violations: Vec<ConcavityViolation>,
}

impl ConcavityReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Mixing fractions used by [`check_concavity`].
pub const CONCAVITY_FRACTIONS: [f64; 3] = [0.25, 0.5, 0.75];

/// Verifies `S(λa + (1-λ)b) ≥ λS(a) + (1-λ)S(b) - 1e-10` for every pair and
/// every fraction in [`CONCAVITY_FRACTIONS`].
pub fn check_concavity<F>(entropy: F, pairs: &[(UvState, UvState)]) -> Result<ConcavityReport>
where
    F: Fn(&UvState) -> Result<f64>,
{
    let mut report = ConcavityReport {
        min_gap: f64::INFINITY,
        ..Default::default()
    };
    for (a, b) in pairs {
        let (sa, sb) = (entropy(a)?, entropy(b)?);
        for lambda in CONCAVITY_FRACTIONS {
            let mix = UvState::new(lambda * a.u + (1.0 - lambda) * b.u, lambda * a.v + (1.0 - lambda) * b.v);
            let gap = entropy(&mix)? - (lambda * sa + (1.0 - lambda) * sb);
            report.checked += 1;
            report.min_gap = report.min_gap.min(gap);
            if gap < -1e-10 {
                report.violations.push(ConcavityViolation {
                    a: *a,
                    b: *b,
                    lambda,
                    gap,
                });
            }
        }
    }
    Ok(report)
}
