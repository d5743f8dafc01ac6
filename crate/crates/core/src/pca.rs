//! Principal component analysis of a spectral dataset: mean, covariance,
//! symmetric eigendecomposition with a deterministic ordering and sign
//! convention, and cumulative contribution rates.

use crate::error::{Error, Result};
use crate::grid::WavelengthGrid;
use crate::linalg::{self, ColMat};
use crate::spectrum::SpectralDataset;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

/// Maximum tolerated deviation of `PᵀP` from the identity; enforced every
/// time a model is constructed.
pub const ORTHONORMALITY_TOL: f64 = 1e-10;

/// Relative threshold below which slightly negative eigenvalues of a
/// covariance matrix are clamped to zero.
pub const EIGENVALUE_CLAMP_REL: f64 = 1e-12;

/// Whether projection and reconstruction subtract and restore the dataset
/// mean around the component expansion, or apply the expansion to the raw
/// reflectance vector with no mean term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Centering {
    Centered,
    Uncentered,
}

impl Default for Centering {
    fn default() -> Self {
        Centering::Centered
    }
}

impl fmt::Display for Centering {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Centering::Centered => write!(f, "centered"),
            Centering::Uncentered => write!(f, "uncentered"),
        }
    }
}

impl FromStr for Centering {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "centered" => Ok(Centering::Centered),
            "uncentered" => Ok(Centering::Uncentered),
            other => Err(Error::invalid_argument(format!(
                "unknown centering mode '{other}' (expected 'centered' or 'uncentered')"
            ))),
        }
    }
}

/// Symmetric sample covariance matrix of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    entries: ColMat,
}

impl CovarianceMatrix {
    /// Wraps a dense matrix, rejecting non-square or asymmetric input
    /// (beyond 1e-12 relative to the largest entry).
    pub fn new(entries: ColMat) -> Result<Self> {
        if entries.rows() != entries.cols() {
            return Err(Error::invalid_argument(format!(
                "covariance matrix must be square, got {}x{}",
                entries.rows(),
                entries.cols()
            )));
        }
        let d = entries.rows();
        let scale = entries
            .data()
            .iter()
            .fold(0.0f64, |acc, &v| acc.max(v.abs()));
        let tol = 1e-12 * scale;
        for c in 0..d {
            for r in (c + 1)..d {
                if (entries.get(r, c) - entries.get(c, r)).abs() > tol {
                    return Err(Error::invalid_argument(format!(
                        "matrix is not symmetric at ({r}, {c})"
                    )));
                }
            }
        }
        Ok(CovarianceMatrix { entries })
    }

    pub fn dim(&self) -> usize {
        self.entries.rows()
    }

    pub fn entry(&self, j: usize, l: usize) -> f64 {
        self.entries.get(j, l)
    }

    pub fn entries(&self) -> &ColMat {
        &self.entries
    }
}

/// Cumulative contribution rates: `curve.cumulative(m)` is the fraction of
/// total variance captured by the first `m` components.
#[derive(Debug, Clone, PartialEq)]
pub struct ContributionCurve {
    cumulative: Vec<f64>,
}

impl ContributionCurve {
    /// Cumulative contribution of the first `m` components, `1 <= m <= d`.
    pub fn cumulative(&self, m: usize) -> f64 {
        self.cumulative[m - 1]
    }

    pub fn len(&self) -> usize {
        self.cumulative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cumulative.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.cumulative
    }
}

/// Elementwise arithmetic mean across samples.
pub fn compute_mean(ds: &SpectralDataset) -> Vec<f64> {
    let d = ds.grid().count();
    let n = ds.len();
    let mut mean = vec![0.0f64; d];
    for s in ds.spectra() {
        for (m, &v) in mean.iter_mut().zip(s.values()) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    mean
}

/// Sample covariance with divisor `n - 1`; requires at least two samples.
pub fn compute_covariance(ds: &SpectralDataset) -> Result<CovarianceMatrix> {
    let n = ds.len();
    if n < 2 {
        return Err(Error::invalid_argument(format!(
            "covariance needs at least 2 samples, got {n}"
        )));
    }
    let mean = compute_mean(ds);
    let centered = centered_columns(ds, &mean);
    let cov = linalg::syrk_aat(&centered, 1.0 / (n as f64 - 1.0));
    CovarianceMatrix::new(cov)
}

/// Centered data as a `d x n` matrix whose columns are `x_i - mean`.
fn centered_columns(ds: &SpectralDataset, mean: &[f64]) -> ColMat {
    let d = ds.grid().count();
    let n = ds.len();
    let mut m = ColMat::zeros(d, n);
    for (i, s) in ds.spectra().iter().enumerate() {
        let col = m.column_mut(i);
        for ((c, &v), &mu) in col.iter_mut().zip(s.values()).zip(mean) {
            *c = v - mu;
        }
    }
    m
}

/// Eigendecomposition of a covariance matrix with deterministic output:
/// eigenvalues sorted descending (stable with respect to the solver order
/// on ties), near-zero negatives clamped to zero, and each eigenvector
/// column oriented so its largest-magnitude entry is positive.
pub fn eigendecompose(c: &CovarianceMatrix) -> Result<(Vec<f64>, ColMat)> {
    let (w_asc, p_asc) = linalg::eigh(c.entries())?;
    let d = w_asc.len();

    let mut order: Vec<usize> = (0..d).collect();
    // Stable sort keeps the eigensolver's order within tied eigenvalues.
    order.sort_by(|&a, &b| w_asc[b].partial_cmp(&w_asc[a]).unwrap());

    let mut eigenvalues = Vec::with_capacity(d);
    let mut components = ColMat::zeros(d, d);
    for (dst, &src) in order.iter().enumerate() {
        eigenvalues.push(w_asc[src]);
        components
            .column_mut(dst)
            .copy_from_slice(p_asc.column(src));
    }

    let lambda_max = eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
    let clamp_tol = EIGENVALUE_CLAMP_REL * lambda_max;
    for ev in &mut eigenvalues {
        if *ev < 0.0 {
            if *ev < -clamp_tol {
                return Err(Error::Numerical(format!(
                    "covariance matrix is not positive semidefinite \
                     (eigenvalue {ev} below -{clamp_tol:e})"
                )));
            }
            *ev = 0.0;
        }
    }

    apply_sign_convention(&mut components);
    Ok((eigenvalues, components))
}

/// Orients every column so that its entry of largest absolute value is
/// positive, ties broken by the lowest index.
fn apply_sign_convention(p: &mut ColMat) {
    for c in 0..p.cols() {
        let col = p.column_mut(c);
        let mut best = 0usize;
        let mut best_abs = col[0].abs();
        for (i, &v) in col.iter().enumerate().skip(1) {
            if v.abs() > best_abs {
                best = i;
                best_abs = v.abs();
            }
        }
        if col[best] < 0.0 {
            for v in col.iter_mut() {
                *v = -*v;
            }
        }
    }
}

/// Cumulative contribution rates of descending eigenvalues.
pub fn contribution(eigenvalues: &[f64]) -> Result<ContributionCurve> {
    if eigenvalues.is_empty() {
        return Err(Error::invalid_argument("no eigenvalues".to_string()));
    }
    for w in eigenvalues.windows(2) {
        if w[1] > w[0] {
            return Err(Error::invalid_argument(
                "eigenvalues must be sorted descending".to_string(),
            ));
        }
    }
    let prefix: Vec<f64> = eigenvalues
        .iter()
        .scan(0.0f64, |acc, &v| {
            *acc += v;
            Some(*acc)
        })
        .collect();
    let total = *prefix.last().unwrap();
    if total <= 0.0 {
        return Err(Error::Degenerate(
            "all eigenvalues are zero; the dataset has no variance".to_string(),
        ));
    }
    Ok(ContributionCurve {
        cumulative: prefix.into_iter().map(|p| p / total).collect(),
    })
}

/// A fitted principal-component model of one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    grid: WavelengthGrid,
    mean: Vec<f64>,
    eigenvalues: Vec<f64>,
    components: ColMat,
    centering: Centering,
}

impl PcaModel {
    /// Assembles a model from parts, enforcing the structural invariants:
    /// matching dimensions, nonincreasing nonnegative eigenvalues, and
    /// orthonormal component columns.
    pub fn from_parts(
        grid: WavelengthGrid,
        mean: Vec<f64>,
        eigenvalues: Vec<f64>,
        components: ColMat,
        centering: Centering,
    ) -> Result<Self> {
        let d = grid.count();
        if mean.len() != d || eigenvalues.len() != d {
            return Err(Error::invalid_argument(format!(
                "model vectors must have length {d} (mean {}, eigenvalues {})",
                mean.len(),
                eigenvalues.len()
            )));
        }
        if components.rows() != d || components.cols() != d {
            return Err(Error::invalid_argument(format!(
                "component matrix must be {d}x{d}, got {}x{}",
                components.rows(),
                components.cols()
            )));
        }
        for w in eigenvalues.windows(2) {
            if w[1] > w[0] {
                return Err(Error::invalid_argument(
                    "eigenvalues must be nonincreasing".to_string(),
                ));
            }
        }
        if eigenvalues.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::invalid_argument(
                "eigenvalues must be finite and nonnegative".to_string(),
            ));
        }
        let defect = linalg::orthonormality_defect(&components);
        if defect > ORTHONORMALITY_TOL {
            return Err(Error::Numerical(format!(
                "component columns are not orthonormal (max |PᵀP - I| = {defect:e})"
            )));
        }
        Ok(PcaModel {
            grid,
            mean,
            eigenvalues,
            components,
            centering,
        })
    }

    /// Fits the model: mean, covariance, eigendecomposition, convention.
    pub fn fit(ds: &SpectralDataset, centering: Centering) -> Result<Self> {
        let mean = compute_mean(ds);
        let cov = compute_covariance(ds)?;
        let (eigenvalues, components) = eigendecompose(&cov)?;
        PcaModel::from_parts(*ds.grid(), mean, eigenvalues, components, centering)
    }

    pub fn grid(&self) -> &WavelengthGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.count()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `d x d` matrix whose columns are the principal components.
    pub fn components(&self) -> &ColMat {
        &self.components
    }

    pub fn centering(&self) -> Centering {
        self.centering
    }

    /// Contribution curve of this model's eigenvalues.
    pub fn contribution(&self) -> Result<ContributionCurve> {
        contribution(&self.eigenvalues)
    }

    /// Serializes the model as versioned plain text. Floating-point values
    /// are written in shortest round-trip decimal form, so reading the
    /// file back reproduces the model bit for bit.
    pub fn write_to(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "specrec-pca-model v1")?;
        writeln!(
            out,
            "grid {} {} {} {}",
            self.grid.start_nm(),
            self.grid.end_nm(),
            self.grid.step_nm(),
            self.grid.count()
        )?;
        writeln!(out, "centering {}", self.centering)?;
        write_f64_line(out, "mean", &self.mean)?;
        write_f64_line(out, "eigenvalues", &self.eigenvalues)?;
        for c in 0..self.components.cols() {
            write!(out, "component {}", c + 1)?;
            for v in self.components.column(c) {
                write!(out, " {v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    /// Reads a model previously written by [`PcaModel::write_to`].
    pub fn read_from(input: &mut impl BufRead) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        let (_, header) = next_line(&mut lines)?;
        if header.trim() != "specrec-pca-model v1" {
            return Err(Error::parse(1, "not a specrec-pca-model v1 file"));
        }

        let (ln, grid_line) = next_line(&mut lines)?;
        let grid_fields = expect_prefix(ln, &grid_line, "grid")?;
        let nums = parse_f64_fields(ln, grid_fields)?;
        if nums.len() != 4 {
            return Err(Error::parse(ln, "grid line must have 4 fields"));
        }
        let grid = WavelengthGrid::new(nums[0], nums[1], nums[2])?;
        if grid.count() != nums[3] as usize {
            return Err(Error::parse(ln, "grid count does not match span"));
        }
        let d = grid.count();

        let (ln, centering_line) = next_line(&mut lines)?;
        let centering: Centering = expect_prefix(ln, &centering_line, "centering")?.trim().parse()?;

        let (ln, mean_line) = next_line(&mut lines)?;
        let mean = parse_f64_fields(ln, expect_prefix(ln, &mean_line, "mean")?)?;
        if mean.len() != d {
            return Err(Error::parse(ln, format!("mean must have {d} values")));
        }

        let (ln, ev_line) = next_line(&mut lines)?;
        let eigenvalues = parse_f64_fields(ln, expect_prefix(ln, &ev_line, "eigenvalues")?)?;
        if eigenvalues.len() != d {
            return Err(Error::parse(ln, format!("eigenvalues must have {d} values")));
        }

        let mut components = ColMat::zeros(d, d);
        for c in 0..d {
            let (ln, line) = next_line(&mut lines)?;
            let rest = expect_prefix(ln, &line, "component")?;
            let nums = parse_f64_fields(ln, rest)?;
            if nums.len() != d + 1 {
                return Err(Error::parse(
                    ln,
                    format!("component line must have an index and {d} values"),
                ));
            }
            if nums[0] as usize != c + 1 {
                return Err(Error::parse(ln, format!("expected component {}", c + 1)));
            }
            components.column_mut(c).copy_from_slice(&nums[1..]);
        }

        PcaModel::from_parts(grid, mean, eigenvalues, components, centering)
    }
}

fn write_f64_line(out: &mut impl Write, tag: &str, values: &[f64]) -> std::io::Result<()> {
    write!(out, "{tag}")?;
    for v in values {
        write!(out, " {v}")?;
    }
    writeln!(out)
}

type NumberedLines<'a> = dyn Iterator<Item = (usize, std::io::Result<String>)> + 'a;

fn next_line(lines: &mut NumberedLines) -> Result<(usize, String)> {
    match lines.next() {
        Some((i, Ok(line))) => Ok((i + 1, line)),
        Some((i, Err(e))) => Err(Error::parse(i + 1, e.to_string())),
        None => Err(Error::parse(0, "unexpected end of model file")),
    }
}

fn expect_prefix<'a>(line_no: usize, line: &'a str, tag: &str) -> Result<&'a str> {
    line.strip_prefix(tag)
        .ok_or_else(|| Error::parse(line_no, format!("expected '{tag} ...'")))
}

fn parse_f64_fields(line_no: usize, fields: &str) -> Result<Vec<f64>> {
    fields
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|_| Error::parse(line_no, format!("bad number '{tok}'")))
        })
        .collect()
}
