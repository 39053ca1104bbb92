//! Quasistatic process families over piecewise-C¹ curves.
//!
//! A [`QuasistaticFamily`] assigns every involved atom a [`Track`]: a curve
//! through that atom's state space together with the work one-form valid on
//! each C¹ piece. Slicing the family at `λ ≤ λ'` yields an ordinary
//! [`Process`] whose per-atom work is the path integral of the work form.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Result, ThermoError};
use crate::gas::GasState;
use crate::process::{Entry, JointState, Process, StateValue};
use crate::quadrature;
use crate::system::{AtomId, AtomKind, System};
use crate::tolerance::Tolerances;

/// Coordinates of one atom's state: `(p, V)` for a gas, `(E, 0)` for a reservoir.
pub type Point = [f64; 2];

/// Local parametrization `s ∈ [0, 1] -> Point`.
pub type PathFn = Arc<dyn Fn(f64) -> Point + Send + Sync>;

/// A differential one-form evaluated at a point on a tangent vector.
pub type OneForm = Arc<dyn Fn(&Point, &Point) -> f64 + Send + Sync>;

pub fn zero_form() -> OneForm {
    Arc::new(|_, _| 0.0)
}

/// One C¹ piece of a curve, covering `[start, end]` of the global parameter.
#[derive(Clone)]
pub struct CurvePiece {
    pub start: f64,
    pub end: f64,
    from: Point,
    to: Point,
    point: PathFn,
    velocity: PathFn,
}

impl fmt::Debug for CurvePiece {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CurvePiece")
            .field("start", &self.start)
            .field("end", &self.end)
            .field("from", &self.from)
            .field("to", &self.to)
            .finish()
    }
}

impl CurvePiece {
    fn local(&self, lambda: f64) -> f64 {
        let len = self.end - self.start;
        if len <= 0.0 {
            0.0
        } else {
            ((lambda - self.start) / len).clamp(0.0, 1.0)
        }
    }

    fn point_local(&self, s: f64) -> Point {
        if s <= 0.0 {
            self.from
        } else if s >= 1.0 {
            self.to
        } else {
            (self.point)(s)
        }
    }
}

/// A continuous, piecewise-C¹ curve on `[0, 1]`.
#[derive(Clone, Debug)]
pub struct Curve {
    pieces: Vec<CurvePiece>,
}

impl Curve {
    /// Single C¹ piece with exact endpoints `from = point(0)` and `to = point(1)`.
    pub fn new(from: Point, to: Point, point: PathFn, velocity: PathFn) -> Self {
        Curve {
            pieces: vec![CurvePiece {
                start: 0.0,
                end: 1.0,
                from,
                to,
                point,
                velocity,
            }],
        }
    }

    pub fn constant(at: Point) -> Self {
        Curve::new(at, at, Arc::new(move |_| at), Arc::new(|_| [0.0, 0.0]))
    }

    pub fn pieces(&self) -> &[CurvePiece] {
        &self.pieces
    }

    /// Interior breakpoints where the curve may fail to be C¹.
    pub fn knots(&self) -> Vec<f64> {
        self.pieces.iter().skip(1).map(|p| p.start).collect()
    }

    fn piece_index(&self, lambda: f64) -> usize {
        self.pieces
            .iter()
            .position(|p| lambda < p.end)
            .unwrap_or(self.pieces.len() - 1)
    }

    pub fn start(&self) -> Point {
        self.pieces[0].from
    }

    pub fn end(&self) -> Point {
        self.pieces[self.pieces.len() - 1].to
    }

    pub fn eval(&self, lambda: f64) -> Point {
        let piece = &self.pieces[self.piece_index(lambda)];
        piece.point_local(piece.local(lambda))
    }

    /// Derivative with respect to the global parameter; right derivative at knots.
    pub fn tangent(&self, lambda: f64) -> Point {
        let piece = &self.pieces[self.piece_index(lambda)];
        let len = piece.end - piece.start;
        if len <= 0.0 {
            return [0.0, 0.0];
        }
        let v = (piece.velocity)(piece.local(lambda));
        [v[0] / len, v[1] / len]
    }

    fn remapped(&self, offset: f64, scale: f64) -> Vec<CurvePiece> {
        self.pieces
            .iter()
            .map(|p| CurvePiece {
                start: offset + scale * p.start,
                end: offset + scale * p.end,
                ..p.clone()
            })
            .collect()
    }

    /// `self` on `[0, ½]` followed by `next` on `[½, 1]`.
    pub fn concat(&self, next: &Curve) -> Curve {
        let mut pieces = self.remapped(0.0, 0.5);
        pieces.extend(next.remapped(0.5, 0.5));
        if let Some(last) = pieces.last_mut() {
            last.end = 1.0;
        }
        Curve { pieces }
    }

    /// Same curve traversed from the end to the start.
    pub fn reversed(&self) -> Curve {
        let pieces = self
            .pieces
            .iter()
            .rev()
            .map(|p| {
                let (point, velocity) = (p.point.clone(), p.velocity.clone());
                CurvePiece {
                    start: 1.0 - p.end,
                    end: 1.0 - p.start,
                    from: p.to,
                    to: p.from,
                    point: Arc::new(move |s| point(1.0 - s)),
                    velocity: Arc::new(move |s| {
                        let v = velocity(1.0 - s);
                        [-v[0], -v[1]]
                    }),
                }
            })
            .collect();
        Curve { pieces }
    }
}

fn check_interval(from: f64, to: f64) -> Result<()> {
    for x in [from, to] {
        if !(0.0..=1.0).contains(&x) {
            return Err(ThermoError::OutOfDomain(x));
        }
    }
    if from > to {
        return Err(ThermoError::OutOfDomain(from));
    }
    Ok(())
}

/// Integrates `forms[i]` over piece `i` of `curve`, restricted to `[from, to]`,
/// weighted by `weight(λ)` and split additionally at `extra_breaks`.
fn integrate_pieces(
    curve: &Curve,
    forms: &dyn Fn(usize) -> OneForm,
    weight: &dyn Fn(f64, f64, f64) -> f64,
    extra_breaks: &[f64],
    from: f64,
    to: f64,
    tol: f64,
) -> Result<f64> {
    check_interval(from, to)?;
    if from == to {
        return Ok(0.0);
    }
    let mut spans = Vec::new();
    for (i, piece) in curve.pieces.iter().enumerate() {
        let (a, b) = (piece.start.max(from), piece.end.min(to));
        if b <= a {
            continue;
        }
        let mut cuts = vec![a];
        cuts.extend(extra_breaks.iter().copied().filter(|&x| x > a && x < b));
        cuts.push(b);
        for w in cuts.windows(2) {
            spans.push((i, w[0], w[1]));
        }
    }
    let share = tol / spans.len().max(1) as f64;
    let mut total = 0.0;
    for (i, a, b) in spans {
        let piece = &curve.pieces[i];
        let form = forms(i);
        let len = piece.end - piece.start;
        let integrand = |lambda: f64| {
            let s = piece.local(lambda);
            let x = piece.point_local(s);
            let v = (piece.velocity)(s);
            form(&x, &[v[0] / len, v[1] / len]) / weight(lambda, a, b)
        };
        total += quadrature::integrate(integrand, a, b, share)?;
    }
    Ok(total)
}

/// `∫_{γ|[λ, λ']} form`, splitting at the curve's knots.
pub fn integrate_form(form: &OneForm, curve: &Curve, from: f64, to: f64, tol: f64) -> Result<f64> {
    integrate_pieces(curve, &|_| form.clone(), &|_, _, _| 1.0, &[], from, to, tol)
}

/// Temperature as a function of the family parameter.
#[derive(Clone)]
pub enum TemperatureProfile {
    Constant(f64),
    /// `values[i]` holds between `breaks[i-1]` and `breaks[i]`.
    Piecewise { breaks: Vec<f64>, values: Vec<f64> },
    Continuous(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl TemperatureProfile {
    fn breaks(&self) -> &[f64] {
        match self {
            TemperatureProfile::Piecewise { breaks, .. } => breaks,
            _ => &[],
        }
    }

    /// Value on the span containing `lambda` (the later span at a break).
    pub fn at(&self, lambda: f64) -> f64 {
        match self {
            TemperatureProfile::Constant(t) => *t,
            TemperatureProfile::Piecewise { breaks, values } => {
                let i = breaks.iter().take_while(|&&b| lambda >= b).count();
                values[i.min(values.len() - 1)]
            }
            TemperatureProfile::Continuous(f) => f(lambda),
        }
    }

    /// Value at `lambda` seen from inside the span `[a, b]`, so that a jump
    /// at a span end does not leak into the span.
    fn at_in_span(&self, lambda: f64, a: f64, b: f64) -> f64 {
        match self {
            TemperatureProfile::Piecewise { .. } => self.at(0.5 * (a + b)),
            _ => self.at(lambda),
        }
    }

    fn validate(&self) -> Result<()> {
        if let TemperatureProfile::Piecewise { breaks, values } = self {
            if values.len() != breaks.len() + 1 || breaks.windows(2).any(|w| w[0] >= w[1]) {
                return Err(ThermoError::InvalidParameter(
                    "piecewise profile needs ascending breaks and one more value than breaks".into(),
                ));
            }
            if values.iter().any(|t| !(*t > 0.0)) {
                return Err(ThermoError::InvalidParameter("temperatures must be positive".into()));
            }
        }
        Ok(())
    }
}

/// One atom's curve with the work form valid on each of its pieces.
#[derive(Clone)]
pub struct Track {
    pub kind: AtomKind,
    pub curve: Curve,
    work: Vec<OneForm>,
}

impl fmt::Debug for Track {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Track")
            .field("kind", &self.kind)
            .field("curve", &self.curve)
            .finish()
    }
}

impl Track {
    pub fn new(kind: AtomKind, curve: Curve, work: OneForm) -> Self {
        let n = curve.pieces.len();
        Track {
            kind,
            curve,
            work: vec![work; n],
        }
    }

    /// An atom that stays put and receives no work.
    pub fn idle(kind: AtomKind, at: Point) -> Self {
        Track::new(kind, Curve::constant(at), zero_form())
    }

    pub fn work_form(&self, piece: usize) -> &OneForm {
        &self.work[piece]
    }

    pub fn state_at(&self, lambda: f64) -> StateValue {
        decode(self.kind, self.curve.eval(lambda))
    }

    fn remapped(&self, offset: f64, scale: f64) -> Track {
        Track {
            kind: self.kind,
            curve: Curve {
                pieces: self.curve.remapped(offset, scale),
            },
            work: self.work.clone(),
        }
    }
}

/// Builds a state payload from coordinates. Coordinates produced by the model
/// constructors are already validated.
pub fn decode(kind: AtomKind, x: Point) -> StateValue {
    match kind {
        AtomKind::IdealGas => StateValue::Gas(GasState { p: x[0], v: x[1] }),
        AtomKind::Reservoir => StateValue::Reservoir { energy: x[0] },
        AtomKind::Abstract => StateValue::Abstract(x.to_vec()),
    }
}

pub fn encode(state: &StateValue) -> Point {
    match state {
        StateValue::Gas(g) => [g.p, g.v],
        StateValue::Reservoir { energy } => [*energy, 0.0],
        StateValue::Abstract(v) => [
            v.first().copied().unwrap_or(0.0),
            v.get(1).copied().unwrap_or(0.0),
        ],
    }
}

/// Two-parameter family of work processes `p(λ, λ')` realized by a curve.
#[derive(Clone, Debug)]
pub struct QuasistaticFamily {
    tracks: BTreeMap<AtomId, Track>,
    reversible: bool,
    tags: Vec<String>,
    tol: f64,
}

impl QuasistaticFamily {
    pub fn new<I>(tracks: I, reversible: bool, tag: impl Into<String>) -> Result<Self>
    where
        I: IntoIterator<Item = (AtomId, Track)>,
    {
        let tracks: BTreeMap<AtomId, Track> = tracks.into_iter().collect();
        if tracks.is_empty() {
            return Err(ThermoError::EmptyProcess);
        }
        Ok(QuasistaticFamily {
            tracks,
            reversible,
            tags: vec![tag.into()],
            tol: Tolerances::default().quad,
        })
    }

    /// Quadrature tolerance used by [`slice`](Self::slice).
    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    pub fn system(&self) -> System {
        System::new(self.tracks.keys().copied()).expect("families are never empty")
    }

    pub fn track(&self, atom: AtomId) -> Option<&Track> {
        self.tracks.get(&atom)
    }

    pub fn tracks(&self) -> impl Iterator<Item = (AtomId, &Track)> {
        self.tracks.iter().map(|(a, t)| (*a, t))
    }

    pub fn is_reversible(&self) -> bool {
        self.reversible
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    /// Union of every track's knots.
    pub fn knots(&self) -> Vec<f64> {
        let set: BTreeSet<u64> = self
            .tracks
            .values()
            .flat_map(|t| t.curve.knots())
            .map(f64::to_bits)
            .collect();
        let mut v: Vec<f64> = set.into_iter().map(f64::from_bits).collect();
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn state_at(&self, lambda: f64) -> JointState {
        self.tracks
            .iter()
            .map(|(a, t)| (*a, t.state_at(lambda)))
            .collect()
    }

    pub fn initial_state(&self) -> JointState {
        self.state_at(0.0)
    }

    pub fn final_state(&self) -> JointState {
        self.state_at(1.0)
    }

    /// `W_A(p(λ, λ'))` for one atom.
    pub fn slice_work(&self, atom: AtomId, from: f64, to: f64) -> Result<f64> {
        let track = self
            .tracks
            .get(&atom)
            .ok_or(ThermoError::MissingState(atom))?;
        integrate_pieces(
            &track.curve,
            &|i| track.work[i].clone(),
            &|_, _, _| 1.0,
            &[],
            from,
            to,
            self.tol,
        )
    }

    /// The process `p(λ, λ')`: states on the curve, works from the forms.
    pub fn slice(&self, from: f64, to: f64) -> Result<Process> {
        check_interval(from, to)?;
        let entries = self
            .tracks
            .iter()
            .map(|(a, t)| {
                let work = if from == to { 0.0 } else { self.slice_work(*a, from, to)? };
                Ok((*a, Entry::new(t.state_at(from), t.state_at(to), work)))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut p = Process::new(entries, self.reversible || from == to)?;
        for tag in &self.tags {
            p = p.with_tag(tag.clone());
        }
        Ok(p)
    }

    /// The whole family as one process.
    pub fn process(&self) -> Result<Process> {
        self.slice(0.0, 1.0)
    }

    /// Family traversed backwards. Needs a reverse witness.
    pub fn reversed(&self) -> Result<QuasistaticFamily> {
        if !self.reversible {
            return Err(ThermoError::NoReverseWitness);
        }
        let tracks = self
            .tracks
            .iter()
            .map(|(a, t)| {
                let mut work = t.work.clone();
                work.reverse();
                (
                    *a,
                    Track {
                        kind: t.kind,
                        curve: t.curve.reversed(),
                        work,
                    },
                )
            })
            .collect();
        Ok(QuasistaticFamily {
            tracks,
            reversible: true,
            tags: self.tags.clone(),
            tol: self.tol,
        })
    }

    /// `next` after `self`, reparametrized with a knot at `½`.
    pub fn then(&self, next: &QuasistaticFamily, tol: &Tolerances) -> Result<QuasistaticFamily> {
        let end = self.final_state();
        let start = next.initial_state();
        for (atom, v) in end.iter() {
            if let Some(w) = start.get(atom) {
                if !v.close_to(w, tol) {
                    return Err(ThermoError::StateMismatch(atom));
                }
            }
        }
        let atoms: BTreeSet<AtomId> = self.tracks.keys().chain(next.tracks.keys()).copied().collect();
        let mut tracks = BTreeMap::new();
        for atom in atoms {
            let first = match self.tracks.get(&atom) {
                Some(t) => t.remapped(0.0, 0.5),
                None => {
                    let t = &next.tracks[&atom];
                    Track::idle(t.kind, t.curve.start()).remapped(0.0, 0.5)
                }
            };
            let second = match next.tracks.get(&atom) {
                Some(t) => t.remapped(0.5, 0.5),
                None => Track::idle(first.kind, first.curve.end()).remapped(0.5, 0.5),
            };
            let mut pieces = first.curve.pieces;
            pieces.extend(second.curve.pieces);
            if let Some(last) = pieces.last_mut() {
                last.end = 1.0;
            }
            let mut work = first.work;
            work.extend(second.work);
            tracks.insert(
                atom,
                Track {
                    kind: first.kind,
                    curve: Curve { pieces },
                    work,
                },
            );
        }
        let mut tags = self.tags.clone();
        tags.extend(next.tags.iter().filter(|t| !self.tags.contains(t)).cloned());
        Ok(QuasistaticFamily {
            tracks,
            reversible: self.reversible && next.reversible,
            tags,
            tol: self.tol.min(next.tol),
        })
    }

    /// `∫ δQ / T` along one atom's track, with `δQ = dU - δW` on each piece.
    pub fn entropy_integral(
        &self,
        atom: AtomId,
        energy_differential: &OneForm,
        temperature: &TemperatureProfile,
        tol: f64,
    ) -> Result<f64> {
        temperature.validate()?;
        let track = self
            .tracks
            .get(&atom)
            .ok_or(ThermoError::MissingState(atom))?;
        // dU and δW are integrated separately: their difference can vanish
        // identically (isotherms), which leaves the adaptive rule nothing
        // but roundoff to refine on.
        let profile = |l, a, b| temperature.at_in_span(l, a, b);
        let du = integrate_pieces(
            &track.curve,
            &|_| energy_differential.clone(),
            &profile,
            temperature.breaks(),
            0.0,
            1.0,
            0.5 * tol,
        )?;
        let dw = integrate_pieces(
            &track.curve,
            &|i| track.work[i].clone(),
            &profile,
            temperature.breaks(),
            0.0,
            1.0,
            0.5 * tol,
        )?;
        Ok(du - dw)
    }
}

/// `g ∘ f` on families.
pub fn concat_families(
    f: &QuasistaticFamily,
    g: &QuasistaticFamily,
    tol: &Tolerances,
) -> Result<QuasistaticFamily> {
    f.then(g, tol)
}

/// Models whose state spaces are two-dimensional and which can be probed for
/// the quasistatic versions of the first-law and entropy postulates.
pub trait QuasistaticModel {
    /// Tangents at `state` of two work-process families through it.
    fn work_tangents(&self, state: Point) -> Result<(Point, Point)>;
    /// Tangents at `state` of two reversible families through it.
    fn reversible_tangents(&self, state: Point) -> Result<(Point, Point)>;
    /// Whether a work process joins the two states in at least one direction.
    fn connects(&self, a: Point, b: Point) -> Result<bool>;
    /// Whether a reversible sequence joins the two states.
    fn connects_reversibly(&self, a: Point, b: Point) -> Result<bool>;
}

#[derive(Debug, Clone, Serialize)]
pub struct DegenerateTangents {
    pub state: Point,
    pub families: &'static str,
    pub determinant: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConnectFailure {
    pub from: Point,
    pub to: Point,
    pub reversible: bool,
    pub reason: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct QsReport {
    pub states_checked: usize,
    pub pairs_checked: usize,
    pub degenerate: Vec<DegenerateTangents>,
    pub connect_failures: Vec<ConnectFailure>,
}

impl QsReport {
    pub fn passed(&self) -> bool {
        self.degenerate.is_empty() && self.connect_failures.is_empty()
    }
}

/// `det(u, v) / (|u| |v|)`; zero when either vector vanishes.
pub fn normalized_determinant(u: Point, v: Point) -> f64 {
    let nu = u[0].hypot(u[1]);
    let nv = v[0].hypot(v[1]);
    if nu == 0.0 || nv == 0.0 {
        return 0.0;
    }
    (u[0] * v[1] - u[1] * v[0]) / (nu * nv)
}

/// Checks tangent independence at every sampled state and connectivity of
/// every sampled pair.
pub fn check_qs_postulates(
    model: &dyn QuasistaticModel,
    states: &[Point],
    pairs: &[(Point, Point)],
    tol: &Tolerances,
) -> QsReport {
    let mut report = QsReport {
        states_checked: states.len(),
        pairs_checked: pairs.len(),
        ..Default::default()
    };
    for &state in states {
        let probes: [(&'static str, Result<(Point, Point)>); 2] = [
            ("work", model.work_tangents(state)),
            ("reversible", model.reversible_tangents(state)),
        ];
        for (families, tangents) in probes {
            let determinant = match tangents {
                Ok((u, v)) => normalized_determinant(u, v),
                Err(_) => 0.0,
            };
            if !(determinant.abs() > tol.tangent_det) {
                report.degenerate.push(DegenerateTangents {
                    state,
                    families,
                    determinant,
                });
            }
        }
    }
    for &(a, b) in pairs {
        for (reversible, outcome) in [
            (false, model.connects(a, b)),
            (true, model.connects_reversibly(a, b)),
        ] {
            let reason = match outcome {
                Ok(true) => continue,
                Ok(false) => "no connecting process".to_string(),
                Err(e) => e.to_string(),
            };
            report.connect_failures.push(ConnectFailure {
                from: a,
                to: b,
                reversible,
                reason,
            });
        }
    }
    report
}
