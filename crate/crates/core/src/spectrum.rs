//! Spectra and datasets on a shared grid, plus resampling and smoothing.
//!
//! A [`Spectrum`] is one reflectance curve sampled on a [`WavelengthGrid`];
//! a [`SpectralDataset`] is an ordered collection of spectra of one surface
//! class, all on the identical grid. Both are immutable after construction.

use crate::error::{Error, Result};
use crate::grid::WavelengthGrid;

/// Upper bound (exclusive) for admissible reflectance values. Physical
/// reflectance is at most ~1; the headroom tolerates calibration
/// artifacts without letting obviously broken files through.
pub const MAX_REFLECTANCE: f64 = 2.0;

/// One reflectance spectrum on a wavelength grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    grid: WavelengthGrid,
    values: Vec<f64>,
    label: String,
}

impl Spectrum {
    /// Builds a spectrum, enforcing that the value vector matches the grid
    /// and that every value is finite and in `[0, MAX_REFLECTANCE)`.
    pub fn new(grid: WavelengthGrid, values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        let label = label.into();
        if values.len() != grid.count() {
            return Err(Error::invalid_data(format!(
                "spectrum '{label}' has {} values but the grid has {} points",
                values.len(),
                grid.count()
            )));
        }
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() || !(0.0..MAX_REFLECTANCE).contains(&v) {
                return Err(Error::invalid_data(format!(
                    "spectrum '{label}' has out-of-range reflectance {v} at {} nm",
                    grid.wavelength(i)
                )));
            }
        }
        Ok(Spectrum {
            grid,
            values,
            label,
        })
    }

    /// Builds a spectrum from model output. Reconstructions may overshoot
    /// the physical reflectance range, so only finiteness and length are
    /// enforced here; the `[0, MAX_REFLECTANCE)` bound applies to measured
    /// data at ingestion.
    pub fn from_model_output(
        grid: WavelengthGrid,
        values: Vec<f64>,
        label: impl Into<String>,
    ) -> Result<Self> {
        let label = label.into();
        if values.len() != grid.count() {
            return Err(Error::invalid_data(format!(
                "spectrum '{label}' has {} values but the grid has {} points",
                values.len(),
                grid.count()
            )));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid_data(format!(
                "spectrum '{label}' has non-finite value at {} nm",
                grid.wavelength(bad)
            )));
        }
        Ok(Spectrum {
            grid,
            values,
            label,
        })
    }

    pub fn grid(&self) -> &WavelengthGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Reflectance at the given grid indices, in order.
    pub fn values_at(&self, indices: &[usize]) -> Vec<f64> {
        indices.iter().map(|&i| self.values[i]).collect()
    }
}

/// A named collection of spectra of one surface class.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDataset {
    name: String,
    grid: WavelengthGrid,
    spectra: Vec<Spectrum>,
}

impl SpectralDataset {
    /// Assembles a dataset. All spectra must share `grid` exactly and
    /// carry distinct labels; at least one spectrum is required.
    pub fn new(
        name: impl Into<String>,
        grid: WavelengthGrid,
        spectra: Vec<Spectrum>,
    ) -> Result<Self> {
        let name = name.into();
        if spectra.is_empty() {
            return Err(Error::invalid_data(format!("dataset '{name}' is empty")));
        }
        let mut seen = std::collections::HashSet::new();
        for s in &spectra {
            if *s.grid() != grid {
                return Err(Error::invalid_data(format!(
                    "dataset '{name}': spectrum '{}' is on a different grid",
                    s.label()
                )));
            }
            if !seen.insert(s.label().to_string()) {
                return Err(Error::invalid_data(format!(
                    "dataset '{name}': duplicate label '{}'",
                    s.label()
                )));
            }
        }
        Ok(SpectralDataset {
            name,
            grid,
            spectra,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn grid(&self) -> &WavelengthGrid {
        &self.grid
    }

    /// Number of samples `n`.
    pub fn len(&self) -> usize {
        self.spectra.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spectra.is_empty()
    }

    pub fn spectra(&self) -> &[Spectrum] {
        &self.spectra
    }

    pub fn spectrum(&self, i: usize) -> &Spectrum {
        &self.spectra[i]
    }

    /// Dataset with sample `i` removed, for holdout validation.
    pub fn without_sample(&self, i: usize) -> Result<SpectralDataset> {
        if i >= self.spectra.len() {
            return Err(Error::invalid_argument(format!(
                "holdout index {i} out of range for n={}",
                self.spectra.len()
            )));
        }
        let mut spectra = self.spectra.clone();
        spectra.remove(i);
        SpectralDataset::new(self.name.clone(), self.grid, spectra)
    }
}

/// Resamples raw `(wavelength nm, reflectance)` pairs onto a target grid
/// by piecewise-linear interpolation. Raw points that coincide with a
/// grid point pass through bit-exact. Extrapolation is refused: the raw
/// range must cover the whole grid.
pub fn resample(
    raw_pairs: &[(f64, f64)],
    target: &WavelengthGrid,
    label: impl Into<String>,
) -> Result<Spectrum> {
    if raw_pairs.len() < 2 {
        return Err(Error::invalid_data(
            "resampling needs at least two raw points".to_string(),
        ));
    }
    for w in raw_pairs.windows(2) {
        if w[1].0 <= w[0].0 {
            return Err(Error::invalid_data(format!(
                "raw wavelengths must be strictly ascending: {} nm followed by {} nm",
                w[0].0, w[1].0
            )));
        }
    }
    let raw_lo = raw_pairs[0].0;
    let raw_hi = raw_pairs[raw_pairs.len() - 1].0;
    if raw_lo > target.start_nm() || raw_hi < target.end_nm() {
        let uncovered = if raw_lo > target.start_nm() && raw_hi < target.end_nm() {
            format!(
                "{}-{} nm and {}-{} nm",
                target.start_nm(),
                raw_lo,
                raw_hi,
                target.end_nm()
            )
        } else if raw_lo > target.start_nm() {
            format!("{}-{} nm", target.start_nm(), raw_lo)
        } else {
            format!("{}-{} nm", raw_hi, target.end_nm())
        };
        return Err(Error::CoverageGap {
            raw_lo,
            raw_hi,
            need_lo: target.start_nm(),
            need_hi: target.end_nm(),
            uncovered,
        });
    }

    let mut values = Vec::with_capacity(target.count());
    // Raw and grid wavelengths both ascend, so a single cursor suffices.
    let mut seg = 0usize;
    for i in 0..target.count() {
        let nm = target.wavelength(i);
        while seg + 2 < raw_pairs.len() && raw_pairs[seg + 1].0 < nm {
            seg += 1;
        }
        let (w0, v0) = raw_pairs[seg];
        let (w1, v1) = raw_pairs[seg + 1];
        let v = if nm == w0 {
            v0
        } else if nm == w1 {
            v1
        } else {
            let t = (nm - w0) / (w1 - w0);
            v0 + t * (v1 - v0)
        };
        values.push(v);
    }
    Spectrum::new(*target, values, label)
}

/// Centered moving average with an odd window, truncated at the grid
/// boundaries. `window == 1` is the identity.
pub fn smooth(s: &Spectrum, window: usize) -> Result<Spectrum> {
    if window == 0 || window % 2 == 0 {
        return Err(Error::invalid_argument(format!(
            "smoothing window must be odd and positive, got {window}"
        )));
    }
    if window > s.grid().count() {
        return Err(Error::invalid_argument(format!(
            "smoothing window {window} exceeds grid size {}",
            s.grid().count()
        )));
    }
    if window == 1 {
        return Ok(s.clone());
    }
    let half = window / 2;
    let values = s.values();
    let d = values.len();
    let out: Vec<f64> = (0..d)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(d - 1);
            let sum: f64 = values[lo..=hi].iter().sum();
            sum / (hi - lo + 1) as f64
        })
        .collect();
    Spectrum::new(*s.grid(), out, s.label())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(n: usize) -> WavelengthGrid {
        WavelengthGrid::new(400.0, 400.0 + (n - 1) as f64, 1.0).unwrap()
    }

    #[test]
    fn spectrum_rejects_wrong_length_and_range() {
        let g = grid(3);
        assert!(Spectrum::new(g, vec![0.1, 0.2], "x").is_err());
        assert!(Spectrum::new(g, vec![0.1, 0.2, 2.0], "x").is_err());
        assert!(Spectrum::new(g, vec![0.1, -0.2, 0.3], "x").is_err());
        assert!(Spectrum::new(g, vec![0.1, f64::NAN, 0.3], "x").is_err());
        assert!(Spectrum::new(g, vec![0.1, 0.2, 1.99], "x").is_ok());
    }

    #[test]
    fn dataset_rejects_mixed_grids_and_duplicate_labels() {
        let g = grid(3);
        let h = grid(4);
        let a = Spectrum::new(g, vec![0.1, 0.2, 0.3], "a").unwrap();
        let b = Spectrum::new(h, vec![0.1, 0.2, 0.3, 0.4], "b").unwrap();
        assert!(SpectralDataset::new("d", g, vec![a.clone(), b]).is_err());
        let a2 = Spectrum::new(g, vec![0.2, 0.2, 0.2], "a").unwrap();
        assert!(SpectralDataset::new("d", g, vec![a.clone(), a2]).is_err());
        assert!(SpectralDataset::new("d", g, vec![]).is_err());
        assert!(SpectralDataset::new("d", g, vec![a]).is_ok());
    }

    #[test]
    fn resample_passthrough_on_grid() {
        let g = grid(3);
        let raw = vec![(400.0, 0.1), (401.0, 0.4), (402.0, 0.2)];
        let s = resample(&raw, &g, "x").unwrap();
        assert_eq!(s.values(), &[0.1, 0.4, 0.2]);
    }

    #[test]
    fn resample_linear_midpoint() {
        let g = WavelengthGrid::new(400.0, 402.0, 1.0).unwrap();
        let raw = vec![(400.0, 0.1), (402.0, 0.3)];
        let s = resample(&raw, &g, "x").unwrap();
        assert!((s.values()[1] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn resample_reproduces_affine_functions() {
        // Linear interpolation of samples of an affine function recovers
        // the function exactly; the oracle is direct evaluation.
        let f = |nm: f64| 0.2 + 0.0002 * (nm - 400.0);
        let raw: Vec<(f64, f64)> = (0..=50).map(|k| 390.0 + 10.0 * k as f64).map(|w| (w, f(w))).collect();
        let g = WavelengthGrid::default_visnir();
        let s = resample(&raw, &g, "affine").unwrap();
        for (i, &v) in s.values().iter().enumerate() {
            let expect = f(g.wavelength(i));
            assert!(
                (v - expect).abs() < 1e-14,
                "at {} nm: {v} vs {expect}",
                g.wavelength(i)
            );
        }
    }

    #[test]
    fn resample_rejects_coverage_gap_and_disorder() {
        let g = WavelengthGrid::default_visnir();
        let raw = vec![(450.0, 0.1), (950.0, 0.2)];
        let err = resample(&raw, &g, "x").unwrap_err();
        match err {
            Error::CoverageGap { uncovered, .. } => assert!(uncovered.contains("400")),
            other => panic!("expected coverage gap, got {other:?}"),
        }
        let raw = vec![(400.0, 0.1), (400.0, 0.2), (950.0, 0.2)];
        assert!(resample(&raw, &g, "x").is_err());
        let raw = vec![(410.0, 0.1), (405.0, 0.2)];
        assert!(resample(&raw, &g, "x").is_err());
    }

    #[test]
    fn resample_is_idempotent_on_gridded_data() {
        let g = grid(5);
        let first = resample(
            &[(400.0, 0.10), (401.0, 0.32), (402.0, 0.28), (403.0, 0.5), (404.0, 0.44)],
            &g,
            "x",
        )
        .unwrap();
        let pairs: Vec<(f64, f64)> = g
            .wavelengths()
            .into_iter()
            .zip(first.values().iter().copied())
            .collect();
        let second = resample(&pairs, &g, "x").unwrap();
        assert_eq!(first.values(), second.values());
    }

    #[test]
    fn smooth_window_one_is_identity_and_constants_unchanged() {
        let g = grid(5);
        let s = Spectrum::new(g, vec![0.1, 0.3, 0.2, 0.4, 0.25], "x").unwrap();
        assert_eq!(smooth(&s, 1).unwrap().values(), s.values());
        let c = Spectrum::new(g, vec![0.3; 5], "c").unwrap();
        for w in [1, 3, 5] {
            for &v in smooth(&c, w).unwrap().values() {
                assert!((v - 0.3).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn smooth_interior_hand_value() {
        let g = grid(3);
        let s = Spectrum::new(g, vec![0.1, 0.4, 0.1], "x").unwrap();
        let sm = smooth(&s, 3).unwrap();
        // (0.1 + 0.4 + 0.1) / 3
        assert!((sm.values()[1] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn smooth_rejects_bad_windows() {
        let g = grid(5);
        let s = Spectrum::new(g, vec![0.1; 5], "x").unwrap();
        assert!(smooth(&s, 0).is_err());
        assert!(smooth(&s, 2).is_err());
        assert!(smooth(&s, 4).is_err());
        assert!(smooth(&s, 7).is_err());
    }

    #[test]
    fn smooth_full_window_matches_truncated_formula() {
        let g = grid(7);
        let vals = vec![0.1, 0.5, 0.2, 0.3, 0.7, 0.05, 0.4];
        let s = Spectrum::new(g, vals.clone(), "x").unwrap();
        let sm = smooth(&s, 7).unwrap();
        let half = 3usize;
        for i in 0..7 {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(6);
            let expect: f64 =
                vals[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64;
            assert!((sm.values()[i] - expect).abs() < 1e-15);
        }
        // The center point carries the global mean.
        let mean: f64 = vals.iter().sum::<f64>() / 7.0;
        assert!((sm.values()[3] - mean).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn smooth_bounded_by_input_extrema(
            vals in proptest::collection::vec(0.0f64..1.9, 3..40),
            half in 0usize..10,
        ) {
            let n = vals.len();
            let g = grid(n);
            let window = (2 * half + 1).min(if n % 2 == 1 { n } else { n - 1 });
            let s = Spectrum::new(g, vals.clone(), "p").unwrap();
            let sm = smooth(&s, window).unwrap();
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for &v in sm.values() {
                prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
            }
        }

        #[test]
        fn resample_stays_within_raw_hull(
            vals in proptest::collection::vec(0.0f64..1.9, 2..30),
        ) {
            let raw: Vec<(f64, f64)> = vals
                .iter()
                .enumerate()
                .map(|(i, &v)| (395.0 + 10.0 * i as f64, v))
                .collect();
            let hi_nm = raw.last().unwrap().0;
            if hi_nm >= 405.0 {
                let g = WavelengthGrid::new(400.0, (hi_nm - 5.0).floor(), 1.0).unwrap();
                let s = resample(&raw, &g, "p").unwrap();
                let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                for &v in s.values() {
                    prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
                }
            }
        }
    }
}
