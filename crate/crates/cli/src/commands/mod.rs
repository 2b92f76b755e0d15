pub mod bounds;
pub mod estimate;
pub mod excess;
pub mod nu_curve;
pub mod sandwich;
pub mod verify;

use crate::error::{field, CliError};

pub(crate) fn one() -> f64 {
    1.0
}

/// A nonempty, finite, strictly increasing grid with entries `>= min`.
pub(crate) fn check_grid(name: &str, grid: &[f64], min: f64) -> Result<(), CliError> {
    if grid.is_empty() {
        return Err(field(name, "grid is empty"));
    }
    if let Some((k, x)) = grid.iter().enumerate().find(|(_, x)| !(x.is_finite() && **x >= min)) {
        return Err(field(&format!("{name}[{k}]"), format!("{x} must be finite and >= {min}")));
    }
    if let Some(k) = (1..grid.len()).find(|&k| !(grid[k] > grid[k - 1])) {
        return Err(field(&format!("{name}[{k}]"), "grid must be strictly increasing"));
    }
    Ok(())
}
