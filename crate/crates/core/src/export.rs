//! CSV tables: family polylines, entropy tables and generic numeric rows.
//!
//! Numbers are written with 9 significant digits so that output is stable
//! across runs and platforms.

use std::io::Write;

use crate::energy::EnergyLedger;
use crate::entropy::EntropyLedger;
use crate::error::{Result, ThermoError};
use crate::gas::GasState;
use crate::process::JointState;
use crate::quasistatic::{encode, integrate_form, OneForm, QuasistaticFamily};
use crate::system::{AtomId, System};

pub const SIGNIFICANT_DIGITS: usize = 9;

/// `x` rounded to 9 significant digits, without trailing zeros.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-5..15).contains(&exp) {
        return format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    }
    let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp).max(0) as usize;
    let s = format!("{:.*}", decimals, x);
    let s = if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    };
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

fn csv_err(e: impl std::fmt::Display) -> ThermoError {
    ThermoError::Export(e.to_string())
}

/// Writes a header line and numeric rows.
pub fn write_table<W: Write>(out: W, headers: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(headers).map_err(csv_err)?;
    for row in rows {
        w.write_record(row.iter().map(|x| format_sig(*x))).map_err(csv_err)?;
    }
    w.flush().map_err(csv_err)
}

pub const POLYLINE_HEADERS: [&str; 5] = ["lambda", "p", "V", "W", "Q"];

/// `samples + 1` evenly spaced points of one atom's track with cumulative
/// work and heat, heat taken as `∫ dU - W`.
pub fn family_polyline(
    family: &QuasistaticFamily,
    atom: AtomId,
    energy_differential: &OneForm,
    samples: usize,
) -> Result<Vec<Vec<f64>>> {
    let track = family.track(atom).ok_or(ThermoError::MissingState(atom))?;
    let samples = samples.max(1);
    (0..=samples)
        .map(|i| {
            let lambda = i as f64 / samples as f64;
            let x = encode(&track.state_at(lambda));
            let w = family.slice_work(atom, 0.0, lambda)?;
            let du = integrate_form(energy_differential, &track.curve, 0.0, lambda, family.tolerance())?;
            Ok(vec![lambda, x[0], x[1], w, du - w])
        })
        .collect()
}

pub const ENTROPY_HEADERS: [&str; 5] = ["p", "V", "U", "S", "T"];

/// `(p, V, U, S, T)` rows for gas `atom`, with `U` and `S` from the ledgers
/// and `T` the absolute gas temperature.
pub fn entropy_table(
    energy: &EnergyLedger,
    entropy: &EntropyLedger,
    atom: AtomId,
    states: &[GasState],
) -> Result<Vec<Vec<f64>>> {
    let s = System::atom(atom);
    states
        .iter()
        .map(|g| {
            let j = JointState::single(atom, *g);
            Ok(vec![
                g.p,
                g.v,
                energy.internal_energy(&s, &j)?,
                entropy.atom_entropy(atom, g)?,
                entropy.gas_temperature(atom, g)?,
            ])
        })
        .collect()
}
