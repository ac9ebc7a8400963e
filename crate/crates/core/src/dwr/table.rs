use std::fmt::Write as _;
use std::path::Path;

use crate::Real;

pub const CSV_HEADER: &str = "level,n_dofs,n_cells,j_h,eta,signed_estimate,i_eff,wall_time_s";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Tolerance,
    MaxDofs,
    MaxLevels,
    SolverFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow<T> {
    pub level: usize,
    pub n_dofs: usize,
    pub n_cells: usize,
    pub j_h: T,
    pub eta: T,
    pub signed_estimate: T,
    pub i_eff: Option<T>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable<T> {
    pub rows: Vec<ConvergenceRow<T>>,
    pub stop: Option<StopReason>,
    /// Message of the solver failure that aborted the loop.
    pub error: Option<String>,
}

impl<T> Default for ConvergenceTable<T> {
    fn default() -> Self {
        Self { rows: Vec::new(), stop: None, error: None }
    }
}

/// C-style `%.10e`: mantissa with ten decimals, signed exponent of at least
/// two digits.
pub fn format_sci(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let s = format!("{x:.10e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let (sign, digits) = match exp.strip_prefix('-') {
        Some(d) => ('-', d),
        None => ('+', exp),
    };
    format!("{mantissa}e{sign}{digits:0>2}")
}

impl<T: Real> ConvergenceTable<T> {
    pub fn last(&self) -> Option<&ConvergenceRow<T>> {
        self.rows.last()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let i_eff = r.i_eff.map(|v| format_sci(v.to_f64_lossy())).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.level,
                r.n_dofs,
                r.n_cells,
                format_sci(r.j_h.to_f64_lossy()),
                format_sci(r.eta.to_f64_lossy()),
                format_sci(r.signed_estimate.to_f64_lossy()),
                i_eff,
                format_sci(r.wall_time_s)
            )
            .expect("writing to a string");
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_csv())
    }
}
