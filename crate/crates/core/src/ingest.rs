//! Parsing of spectral-library files and the canonical dataset format.
//!
//! Raw library spectra arrive as two-column ASCII with assorted header
//! conventions, wavelength units, and deleted-channel sentinels; this
//! module normalizes them onto the working grid. The canonical
//! interchange format is a wide CSV (`wavelength_nm,<label>,...`) written
//! at full decimal precision, lossless under a write/parse round trip.

use crate::error::{Error, Result};
use crate::grid::WavelengthGrid;
use crate::spectrum::{resample, smooth, SpectralDataset, Spectrum};
use serde::Deserialize;
use std::io::Write;
use std::path::{Path, PathBuf};

/// How to interpret wavelengths in a two-column file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WavelengthUnit {
    /// Magnitude heuristic: a file whose largest wavelength is below 20
    /// is in micrometers, otherwise nanometers. Unambiguous for
    /// visible/near-infrared reflectance data.
    #[default]
    Auto,
    /// Force nanometers.
    Nm,
    /// Force micrometers.
    Um,
}

/// Parses a two-column `(wavelength, reflectance)` ASCII stream with the
/// automatic unit heuristic. Header lines (starting with `#`, `!`, or
/// alphabetic text) and blank lines are skipped; rows with a negative
/// value (deleted-channel sentinels) are dropped; a `units=percent`
/// header rescales values to fractions. Wavelengths are returned in nm.
pub fn parse_two_column(text: &str) -> Result<Vec<(f64, f64)>> {
    parse_two_column_with(text, WavelengthUnit::Auto)
}

/// [`parse_two_column`] with an explicit wavelength-unit override.
pub fn parse_two_column_with(text: &str, unit: WavelengthUnit) -> Result<Vec<(f64, f64)>> {
    let mut percent = false;
    let mut rows: Vec<(f64, f64)> = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.trim();
        if line.is_empty() {
            continue;
        }
        let first = line.chars().next().unwrap();
        if first == '#' || first == '!' || first.is_alphabetic() {
            let normalized: String = line
                .trim_start_matches(['#', '!'])
                .chars()
                .filter(|c| !c.is_whitespace())
                .collect::<String>()
                .to_ascii_lowercase();
            if normalized.contains("units=percent") {
                percent = true;
            }
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(Error::parse(
                line_no,
                format!("expected 2 numeric fields, found {}", fields.len()),
            ));
        }
        let w: f64 = fields[0]
            .parse()
            .map_err(|_| Error::parse(line_no, format!("bad wavelength '{}'", fields[0])))?;
        let v: f64 = fields[1]
            .parse()
            .map_err(|_| Error::parse(line_no, format!("bad value '{}'", fields[1])))?;
        if v < 0.0 {
            // Deleted-channel sentinel; resampling bridges the gap.
            continue;
        }
        rows.push((w, v));
    }
    if rows.is_empty() {
        return Err(Error::invalid_data(
            "no parseable data rows in two-column input".to_string(),
        ));
    }

    let micrometers = match unit {
        WavelengthUnit::Um => true,
        WavelengthUnit::Nm => false,
        WavelengthUnit::Auto => {
            let max_w = rows.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max);
            max_w < 20.0
        }
    };
    for row in &mut rows {
        if micrometers {
            row.0 *= 1000.0;
        }
        if percent {
            row.1 /= 100.0;
        }
    }
    Ok(rows)
}

/// Parses the canonical wide CSV into a dataset. The first column header
/// must be `wavelength_nm`; remaining headers are sample labels. The
/// wavelength column must be uniformly spaced.
pub fn parse_dataset_csv(name: &str, text: &str) -> Result<SpectralDataset> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "empty dataset file"))?;
    let header_fields: Vec<&str> = header.trim_end_matches('\r').split(',').collect();
    if header_fields.first() != Some(&"wavelength_nm") {
        return Err(Error::parse(
            1,
            "first column header must be 'wavelength_nm'",
        ));
    }
    let labels: Vec<String> = header_fields[1..].iter().map(|s| s.to_string()).collect();
    if labels.is_empty() {
        return Err(Error::parse(1, "no sample columns"));
    }
    let mut seen = std::collections::HashSet::new();
    for l in &labels {
        if l.is_empty() {
            return Err(Error::parse(1, "empty sample label"));
        }
        if !seen.insert(l.clone()) {
            return Err(Error::parse(1, format!("duplicate sample label '{l}'")));
        }
    }

    let n = labels.len();
    let mut wavelengths: Vec<f64> = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); n];
    for (idx, raw_line) in lines {
        let line_no = idx + 1;
        let line = raw_line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != n + 1 {
            return Err(Error::parse(
                line_no,
                format!("expected {} fields, found {}", n + 1, fields.len()),
            ));
        }
        let w: f64 = fields[0]
            .parse()
            .map_err(|_| Error::parse(line_no, format!("bad wavelength '{}'", fields[0])))?;
        wavelengths.push(w);
        for (j, f) in fields[1..].iter().enumerate() {
            let v: f64 = f
                .parse()
                .map_err(|_| Error::parse(line_no, format!("bad value '{f}'")))?;
            columns[j].push(v);
        }
    }
    if wavelengths.len() < 2 {
        return Err(Error::invalid_data(
            "dataset needs at least two grid rows".to_string(),
        ));
    }
    let step = wavelengths[1] - wavelengths[0];
    if step <= 0.0 {
        return Err(Error::invalid_data(
            "wavelength column must be strictly increasing".to_string(),
        ));
    }
    for (i, &w) in wavelengths.iter().enumerate() {
        let expect = wavelengths[0] + i as f64 * step;
        if (w - expect).abs() > 1e-9 {
            return Err(Error::invalid_data(format!(
                "non-uniform wavelength spacing at {w} nm (expected {expect} nm)"
            )));
        }
    }
    let grid = WavelengthGrid::new(
        wavelengths[0],
        wavelengths[wavelengths.len() - 1],
        step,
    )?;
    if grid.count() != wavelengths.len() {
        return Err(Error::invalid_data(
            "wavelength column does not form a uniform grid".to_string(),
        ));
    }

    let spectra: Result<Vec<Spectrum>> = labels
        .iter()
        .zip(columns)
        .map(|(label, vals)| Spectrum::new(grid, vals, label.clone()))
        .collect();
    SpectralDataset::new(name, grid, spectra?)
}

/// Writes a dataset in the canonical wide CSV format. Values use the
/// shortest decimal representation that parses back to the identical
/// bits, so `parse_dataset_csv` inverts this exactly.
pub fn write_dataset_csv(ds: &SpectralDataset, out: &mut impl Write) -> std::io::Result<()> {
    write!(out, "wavelength_nm")?;
    for s in ds.spectra() {
        write!(out, ",{}", s.label())?;
    }
    writeln!(out)?;
    for i in 0..ds.grid().count() {
        write!(out, "{}", ds.grid().wavelength(i))?;
        for s in ds.spectra() {
            write!(out, ",{}", s.values()[i])?;
        }
        writeln!(out)?;
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
struct RawManifest {
    name: String,
    #[serde(default)]
    description: Option<String>,
    grid: RawGrid,
    #[serde(rename = "spectra")]
    entries: Vec<RawEntry>,
}

#[derive(Debug, Deserialize)]
struct RawGrid {
    start_nm: f64,
    end_nm: f64,
    step_nm: f64,
}

#[derive(Debug, Deserialize)]
struct RawEntry {
    file: String,
    label: String,
    #[serde(default)]
    smooth_window: Option<usize>,
    #[serde(default)]
    unit: WavelengthUnit,
}

/// One source spectrum of a manifest: resolved path, label, optional
/// smoothing, unit override.
#[derive(Debug, Clone)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub label: String,
    pub smooth_window: Option<usize>,
    pub unit: WavelengthUnit,
}

/// A dataset manifest: the target grid plus one record per source file.
/// Stands in for the manual curation of library spectra into surface
/// classes.
#[derive(Debug, Clone)]
pub struct DatasetManifest {
    pub name: String,
    pub description: Option<String>,
    pub grid: WavelengthGrid,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    /// Loads and validates a TOML manifest; `file` paths resolve relative
    /// to the manifest's directory.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        let raw: RawManifest =
            toml::from_str(&text).map_err(|e| Error::file(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let grid = WavelengthGrid::new(raw.grid.start_nm, raw.grid.end_nm, raw.grid.step_nm)?;
        let mut seen = std::collections::HashSet::new();
        let mut entries = Vec::with_capacity(raw.entries.len());
        for e in raw.entries {
            if !seen.insert(e.label.clone()) {
                return Err(Error::file(
                    path,
                    format!("duplicate label '{}' in manifest", e.label),
                ));
            }
            if let Some(w) = e.smooth_window {
                if w == 0 || w % 2 == 0 {
                    return Err(Error::file(
                        path,
                        format!("smooth_window for '{}' must be odd and positive", e.label),
                    ));
                }
            }
            entries.push(ManifestEntry {
                path: base.join(&e.file),
                label: e.label,
                smooth_window: e.smooth_window,
                unit: e.unit,
            });
        }
        if entries.is_empty() {
            return Err(Error::file(path, "manifest lists no spectra"));
        }
        Ok(DatasetManifest {
            name: raw.name,
            description: raw.description,
            grid,
            entries,
        })
    }
}

/// Loads every source of a manifest: parse, unit-normalize, resample to
/// the manifest grid, optionally smooth, and assemble in manifest order.
pub fn load_manifest(manifest: &DatasetManifest) -> Result<SpectralDataset> {
    for e in &manifest.entries {
        if !e.path.exists() {
            return Err(Error::file(&e.path, "referenced file does not exist"));
        }
    }
    let mut spectra = Vec::with_capacity(manifest.entries.len());
    for e in &manifest.entries {
        let text = std::fs::read_to_string(&e.path).map_err(|err| Error::file(&e.path, err))?;
        let pairs = parse_two_column_with(&text, e.unit)
            .map_err(|err| Error::file(&e.path, err))?;
        let mut spectrum = resample(&pairs, &manifest.grid, e.label.clone())
            .map_err(|err| Error::file(&e.path, err))?;
        if let Some(w) = e.smooth_window {
            spectrum = smooth(&spectrum, w).map_err(|err| Error::file(&e.path, err))?;
        }
        spectra.push(spectrum);
    }
    SpectralDataset::new(manifest.name.clone(), manifest.grid, spectra)
}
