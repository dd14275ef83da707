//! Output formatting shared by the CSV writers.

/// Locale-free float with 17 significant digits, enough to round-trip.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}
