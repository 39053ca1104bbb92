//! Numeric tolerance tiers shared by the whole engine.
//!
//! `THERMOKERNEL_TOL` overrides the defaults. It accepts either a bare number,
//! which replaces the assertion tier, or a comma list of `tier=value` pairs,
//! e.g. `state=1e-11,quad=1e-9`.

use std::env;

/// Environment variable consulted by [`Tolerances::from_env`].
pub const TOL_ENV: &str = "THERMOKERNEL_TOL";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// State payload equality (absolute, scaled by magnitude above 1).
    pub state: f64,
    /// Absolute tolerance for adaptive quadrature of work and heat forms.
    pub quad: f64,
    /// Relative agreement required between connecting work processes.
    pub first_law_rel: f64,
    /// Absolute floor for first-law agreement.
    pub first_law_abs: f64,
    /// Two reservoirs are equivalent when `|tau - 1|` is below this.
    pub equilibrium: f64,
    /// Threshold on the normalized tangent determinant.
    pub tangent_det: f64,
    /// Slack for sign checks (second law, entropy theorem, catalytic work).
    pub sign: f64,
    /// Default tolerance for scenario assertions.
    pub assertion: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            state: 1e-12,
            quad: 1e-10,
            first_law_rel: 1e-9,
            first_law_abs: 1e-12,
            equilibrium: 1e-6,
            tangent_det: 1e-8,
            sign: 1e-9,
            assertion: 1e-6,
        }
    }
}

impl Tolerances {
    /// Defaults with `THERMOKERNEL_TOL` applied. Malformed entries are ignored.
    pub fn from_env() -> Self {
        let mut tol = Tolerances::default();
        if let Ok(spec) = env::var(TOL_ENV) {
            tol.apply_overrides(&spec);
        }
        tol
    }

    /// Applies an override string; returns the names of tiers that were changed.
    pub fn apply_overrides(&mut self, spec: &str) -> Vec<String> {
        let mut changed = Vec::new();
        for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (name, value) = match item.split_once('=') {
                Some((n, v)) => (n.trim(), v.trim()),
                None => ("assertion", item),
            };
            let Ok(value) = value.parse::<f64>() else { continue };
            if !(value.is_finite() && value > 0.0) {
                continue;
            }
            let slot = match name {
                "state" => &mut self.state,
                "quad" => &mut self.quad,
                "first_law" | "first_law_rel" => &mut self.first_law_rel,
                "first_law_abs" => &mut self.first_law_abs,
                "equilibrium" => &mut self.equilibrium,
                "tangent" | "tangent_det" => &mut self.tangent_det,
                "sign" => &mut self.sign,
                "assertion" | "assert" => &mut self.assertion,
                _ => continue,
            };
            *slot = value;
            changed.push(name.to_string());
        }
        changed
    }

    /// Magnitude-aware closeness used for state payloads.
    pub fn states_close(&self, a: f64, b: f64) -> bool {
        (a - b).abs() <= self.state * a.abs().max(b.abs()).max(1.0)
    }

    /// First-law agreement: relative or absolute, whichever is larger.
    pub fn works_agree(&self, a: f64, b: f64) -> bool {
        let scale = a.abs().max(b.abs());
        (a - b).abs() <= (self.first_law_rel * scale).max(self.first_law_abs)
    }
}
