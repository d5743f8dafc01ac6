//! The shared wavelength grid.
//!
//! Every spectrum, model, and band selection in this crate lives on a
//! uniform wavelength grid. The default working grid is 400-900 nm at
//! 1 nm, i.e. 501 points.

use crate::error::{Error, Result};

/// Tolerance, in nm, for deciding that a wavelength sits exactly on a
/// grid point. Grids are specified in round decimal numbers; anything
/// further away than this is treated as off-grid rather than snapped.
pub const ON_GRID_TOL_NM: f64 = 1e-9;

/// A uniform wavelength grid `[start, start+step, ..., end]` in nm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WavelengthGrid {
    start_nm: f64,
    end_nm: f64,
    step_nm: f64,
    count: usize,
}

impl WavelengthGrid {
    /// Builds a grid from its endpoints and step. The span must be an
    /// integral number of steps.
    pub fn new(start_nm: f64, end_nm: f64, step_nm: f64) -> Result<Self> {
        if !start_nm.is_finite() || !end_nm.is_finite() || !step_nm.is_finite() {
            return Err(Error::invalid_argument("grid bounds must be finite"));
        }
        if start_nm >= end_nm {
            return Err(Error::invalid_argument(format!(
                "grid start {start_nm} nm must be below end {end_nm} nm"
            )));
        }
        if step_nm <= 0.0 {
            return Err(Error::invalid_argument(format!(
                "grid step must be positive, got {step_nm} nm"
            )));
        }
        let steps = (end_nm - start_nm) / step_nm;
        let rounded = steps.round();
        if (steps - rounded).abs() > 1e-6 {
            return Err(Error::invalid_argument(format!(
                "grid span {start_nm}-{end_nm} nm is not a whole number of {step_nm} nm steps"
            )));
        }
        Ok(WavelengthGrid {
            start_nm,
            end_nm,
            step_nm,
            count: rounded as usize + 1,
        })
    }

    /// The default 400-900 nm grid at 1 nm resolution (501 points).
    pub fn default_visnir() -> Self {
        WavelengthGrid {
            start_nm: 400.0,
            end_nm: 900.0,
            step_nm: 1.0,
            count: 501,
        }
    }

    pub fn start_nm(&self) -> f64 {
        self.start_nm
    }

    pub fn end_nm(&self) -> f64 {
        self.end_nm
    }

    pub fn step_nm(&self) -> f64 {
        self.step_nm
    }

    /// Number of grid points `d`.
    pub fn count(&self) -> usize {
        self.count
    }

    /// Wavelength of the `idx`-th grid point.
    pub fn wavelength(&self, idx: usize) -> f64 {
        debug_assert!(idx < self.count);
        self.start_nm + idx as f64 * self.step_nm
    }

    /// All grid wavelengths in order.
    pub fn wavelengths(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.wavelength(i)).collect()
    }

    /// Index of a wavelength that lies exactly on the grid (within
    /// [`ON_GRID_TOL_NM`]), or `None` if it is off-grid or outside the
    /// covered range.
    pub fn index_of(&self, nm: f64) -> Option<usize> {
        if !nm.is_finite() {
            return None;
        }
        let pos = (nm - self.start_nm) / self.step_nm;
        let idx = pos.round();
        if idx < 0.0 || idx as usize >= self.count {
            return None;
        }
        let idx = idx as usize;
        if (self.wavelength(idx) - nm).abs() <= ON_GRID_TOL_NM {
            Some(idx)
        } else {
            None
        }
    }

    /// Nearest grid index to a wavelength, with the snap distance in nm.
    /// Out-of-range inputs clamp to the grid ends.
    pub fn nearest_index(&self, nm: f64) -> (usize, f64) {
        let pos = (nm - self.start_nm) / self.step_nm;
        let idx = pos.round().clamp(0.0, (self.count - 1) as f64) as usize;
        (idx, (self.wavelength(idx) - nm).abs())
    }
}
