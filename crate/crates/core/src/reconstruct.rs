//! The three reconstruction models: full-band component projection,
//! selected-band generalized-inverse solving, and the per-band linear
//! combination predictor.

use crate::error::{Error, Result};
use crate::grid::WavelengthGrid;
use crate::linalg::{self, ColMat};
use crate::pca::{Centering, PcaModel};
use crate::spectrum::{SpectralDataset, Spectrum};

/// Relative singular-value threshold of the pseudo-inverse: singular
/// values below `PINV_REL_TOL * sigma_max` are treated as zero.
pub const PINV_REL_TOL: f64 = 1e-10;

/// An ordered set of distinct on-grid wavelengths used for
/// partial-information solves.
#[derive(Debug, Clone, PartialEq)]
pub struct BandSelection {
    grid: WavelengthGrid,
    wavelengths_nm: Vec<f64>,
    indices: Vec<usize>,
}

impl BandSelection {
    /// Builds a selection from wavelengths that must each sit exactly on
    /// the grid and be strictly increasing.
    pub fn from_wavelengths(grid: &WavelengthGrid, wavelengths_nm: &[f64]) -> Result<Self> {
        if wavelengths_nm.is_empty() {
            return Err(Error::invalid_argument(
                "band selection must contain at least one wavelength".to_string(),
            ));
        }
        let mut indices = Vec::with_capacity(wavelengths_nm.len());
        for &nm in wavelengths_nm {
            let idx = grid.index_of(nm).ok_or_else(|| {
                Error::invalid_argument(format!(
                    "band {nm} nm is not on the grid ({}-{} nm step {})",
                    grid.start_nm(),
                    grid.end_nm(),
                    grid.step_nm()
                ))
            })?;
            indices.push(idx);
        }
        for w in indices.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::invalid_argument(
                    "band wavelengths must be strictly increasing".to_string(),
                ));
            }
        }
        Ok(BandSelection {
            grid: *grid,
            wavelengths_nm: wavelengths_nm.to_vec(),
            indices,
        })
    }

    /// Selection covering every grid point.
    pub fn full(grid: &WavelengthGrid) -> Self {
        BandSelection {
            grid: *grid,
            wavelengths_nm: grid.wavelengths(),
            indices: (0..grid.count()).collect(),
        }
    }

    pub fn grid(&self) -> &WavelengthGrid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn wavelengths_nm(&self) -> &[f64] {
        &self.wavelengths_nm
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// True when the selection covers the entire grid.
    pub fn is_full_grid(&self) -> bool {
        self.indices.len() == self.grid.count()
    }

    pub fn contains_index(&self, idx: usize) -> bool {
        self.indices.binary_search(&idx).is_ok()
    }
}

/// Component weighting coefficients for the first `m` principal
/// components of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    values: Vec<f64>,
}

impl Weights {
    pub fn new(values: Vec<f64>) -> Self {
        Weights { values }
    }

    /// Number of components `m`.
    pub fn count(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Outcome of a selected-band weight solve: the weights plus the
/// effective rank of the band submatrix. A rank below `m` means the
/// system was solved minimum-norm and the result should be treated with
/// caution.
#[derive(Debug, Clone, PartialEq)]
pub struct BandSolution {
    pub weights: Weights,
    pub effective_rank: usize,
}

impl BandSolution {
    pub fn is_rank_deficient(&self) -> bool {
        self.effective_rank < self.weights.count()
    }
}

fn check_model_grid(model: &PcaModel, grid: &WavelengthGrid) -> Result<()> {
    if model.grid() != grid {
        return Err(Error::invalid_argument(
            "wavelength grid does not match the model grid".to_string(),
        ));
    }
    Ok(())
}

fn check_order(model: &PcaModel, m: usize) -> Result<()> {
    let d = model.dim();
    if m == 0 || m > d {
        return Err(Error::invalid_argument(format!(
            "component count m={m} must satisfy 1 <= m <= {d}"
        )));
    }
    Ok(())
}

/// Shared projection kernel: weights of `values` on the first `m`
/// components, honoring the model's centering mode.
fn project_values(model: &PcaModel, values: &[f64], m: usize) -> Vec<f64> {
    let p = model.components();
    match model.centering() {
        Centering::Centered => {
            let centered: Vec<f64> = values
                .iter()
                .zip(model.mean())
                .map(|(&v, &mu)| v - mu)
                .collect();
            (0..m)
                .map(|c| dot(p.column(c), &centered))
                .collect()
        }
        Centering::Uncentered => (0..m).map(|c| dot(p.column(c), values)).collect(),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Projects a spectrum onto the first `m` principal components.
pub fn project(model: &PcaModel, r: &Spectrum, m: usize) -> Result<Weights> {
    check_model_grid(model, r.grid())?;
    check_order(model, m)?;
    Ok(Weights::new(project_values(model, r.values(), m)))
}

/// Rebuilds a full spectrum from component weights.
pub fn reconstruct_full(model: &PcaModel, w: &Weights) -> Result<Spectrum> {
    let m = w.count();
    check_order(model, m)?;
    let p = model.components();
    let d = model.dim();
    let mut values = match model.centering() {
        Centering::Centered => model.mean().to_vec(),
        Centering::Uncentered => vec![0.0; d],
    };
    for (c, &wc) in w.values().iter().enumerate() {
        for (v, &pc) in values.iter_mut().zip(p.column(c)) {
            *v += wc * pc;
        }
    }
    Spectrum::from_model_output(*model.grid(), values, "reconstructed")
}

/// Estimates component weights from reflectance at selected bands by a
/// rank-revealing least-squares solve of the band submatrix. Requires at
/// least as many bands as components. A full-grid selection reduces to
/// the plain projection, so the full-information limit is exact by
/// construction.
pub fn solve_weights_from_bands(
    model: &PcaModel,
    sel: &BandSelection,
    rho: &[f64],
    m: usize,
) -> Result<BandSolution> {
    check_model_grid(model, sel.grid())?;
    check_order(model, m)?;
    let k = sel.len();
    if rho.len() != k {
        return Err(Error::invalid_argument(format!(
            "got {} band values for {k} selected bands",
            rho.len()
        )));
    }
    if k < m {
        return Err(Error::invalid_argument(format!(
            "under-determined solve: {k} bands for m={m} components"
        )));
    }

    if sel.is_full_grid() {
        return Ok(BandSolution {
            weights: Weights::new(project_values(model, rho, m)),
            effective_rank: m,
        });
    }

    let sub = model
        .components()
        .select_rows(sel.indices())
        .leading_columns(m);
    let rhs: Vec<f64> = match model.centering() {
        Centering::Centered => sel
            .indices()
            .iter()
            .zip(rho)
            .map(|(&i, &v)| v - model.mean()[i])
            .collect(),
        Centering::Uncentered => rho.to_vec(),
    };
    let (w, rank) = linalg::svd_lstsq(&sub, &rhs, PINV_REL_TOL)?;
    Ok(BandSolution {
        weights: Weights::new(w),
        effective_rank: rank,
    })
}

/// Reconstructs a full spectrum from reflectance at selected bands:
/// weight solve followed by full reconstruction.
pub fn reconstruct_from_bands(
    model: &PcaModel,
    sel: &BandSelection,
    rho: &[f64],
    m: usize,
) -> Result<Spectrum> {
    let solution = solve_weights_from_bands(model, sel, rho, m)?;
    reconstruct_full(model, &solution.weights)
}

/// Linear predictor of one band's reflectance as a weighted sum of
/// reference-band reflectances, fitted per dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct LinCombModel {
    source_bands: BandSelection,
    target_nm: f64,
    target_index: usize,
    coeffs: Vec<f64>,
    effective_rank: usize,
}

impl LinCombModel {
    pub fn source_bands(&self) -> &BandSelection {
        &self.source_bands
    }

    pub fn target_nm(&self) -> f64 {
        self.target_nm
    }

    pub fn target_index(&self) -> usize {
        self.target_index
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Rank of the source-band design matrix at the fit; below the number
    /// of source bands means the coefficients are a minimum-norm choice.
    pub fn effective_rank(&self) -> usize {
        self.effective_rank
    }
}

/// Fits the linear-combination coefficients for one target band from the
/// dataset's reflectance at the source bands.
pub fn fit_lincomb(
    ds: &SpectralDataset,
    source: &BandSelection,
    target_nm: f64,
) -> Result<LinCombModel> {
    if source.grid() != ds.grid() {
        return Err(Error::invalid_argument(
            "band selection grid does not match the dataset grid".to_string(),
        ));
    }
    let target_index = ds.grid().index_of(target_nm).ok_or_else(|| {
        Error::invalid_argument(format!("target band {target_nm} nm is not on the grid"))
    })?;
    if source.contains_index(target_index) {
        return Err(Error::invalid_argument(format!(
            "target band {target_nm} nm is among the source bands"
        )));
    }

    let n = ds.len();
    let k = source.len();
    let mut design = ColMat::zeros(n, k);
    for (j, &band_idx) in source.indices().iter().enumerate() {
        let col = design.column_mut(j);
        for (i, s) in ds.spectra().iter().enumerate() {
            col[i] = s.values()[band_idx];
        }
    }
    for (j, &nm) in source.wavelengths_nm().iter().enumerate() {
        if design.column(j).iter().all(|&v| v == 0.0) {
            return Err(Error::Degenerate(format!(
                "source band {nm} nm is zero across the whole dataset"
            )));
        }
    }
    let target: Vec<f64> = ds
        .spectra()
        .iter()
        .map(|s| s.values()[target_index])
        .collect();
    let (coeffs, rank) = linalg::svd_lstsq(&design, &target, PINV_REL_TOL)?;
    Ok(LinCombModel {
        source_bands: source.clone(),
        target_nm,
        target_index,
        coeffs,
        effective_rank: rank,
    })
}

/// Applies a fitted linear combination to source-band reflectances.
pub fn apply_lincomb(lc: &LinCombModel, rho_sources: &[f64]) -> Result<f64> {
    if rho_sources.len() != lc.coeffs.len() {
        return Err(Error::invalid_argument(format!(
            "got {} source values for {} coefficients",
            rho_sources.len(),
            lc.coeffs.len()
        )));
    }
    Ok(dot(&lc.coeffs, rho_sources))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pca::PcaModel;
    use crate::spectrum::SpectralDataset;

    fn grid(n: usize) -> WavelengthGrid {
        WavelengthGrid::new(400.0, 400.0 + (n - 1) as f64, 1.0).unwrap()
    }

    fn demo_dataset(n: usize, d: usize, seed: u64) -> SpectralDataset {
        let g = grid(d);
        let mut state = seed | 1;
        let mut rnd = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let spectra = (0..n)
            .map(|i| {
                let vals: Vec<f64> = (0..d).map(|_| 0.05 + 0.9 * rnd()).collect();
                Spectrum::new(g, vals, format!("s{i}")).unwrap()
            })
            .collect();
        SpectralDataset::new("demo", g, spectra).unwrap()
    }

    /// Hand-rolled normal-equations solve, independent of LAPACK.
    fn normal_equations_lstsq(a: &ColMat, b: &[f64]) -> Vec<f64> {
        let m = a.cols();
        let mut ata = vec![vec![0.0f64; m]; m];
        let mut atb = vec![0.0f64; m];
        for i in 0..m {
            for j in 0..m {
                ata[i][j] = dot(a.column(i), a.column(j));
            }
            atb[i] = dot(a.column(i), b);
        }
        // Gaussian elimination with partial pivoting.
        for col in 0..m {
            let mut piv = col;
            for r in col + 1..m {
                if ata[r][col].abs() > ata[piv][col].abs() {
                    piv = r;
                }
            }
            ata.swap(col, piv);
            atb.swap(col, piv);
            let diag = ata[col][col];
            for r in 0..m {
                if r == col {
                    continue;
                }
                let f = ata[r][col] / diag;
                for cc in col..m {
                    ata[r][cc] -= f * ata[col][cc];
                }
                atb[r] -= f * atb[col];
            }
        }
        (0..m).map(|i| atb[i] / ata[i][i]).collect()
    }

    #[test]
    fn projecting_the_mean_gives_zero_weights() {
        let ds = demo_dataset(6, 9, 11);
        let model = PcaModel::fit(&ds, Centering::Centered).unwrap();
        let mean = Spectrum::from_model_output(*ds.grid(), model.mean().to_vec(), "mean").unwrap();
        for m in 1..=9 {
            let w = project(&model, &mean, m).unwrap();
            assert!(w.values().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn full_order_round_trip_both_modes() {
        let ds = demo_dataset(7, 12, 5);
        for centering in [Centering::Centered, Centering::Uncentered] {
            let model = PcaModel::fit(&ds, centering).unwrap();
            for s in ds.spectra() {
                let w = project(&model, s, 12).unwrap();
                let back = reconstruct_full(&model, &w).unwrap();
                for (a, b) in back.values().iter().zip(s.values()) {
                    assert!((a - b).abs() <= 1e-10, "{centering:?}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn zero_weights_reconstruct_the_mean() {
        let ds = demo_dataset(5, 8, 3);
        let model = PcaModel::fit(&ds, Centering::Centered).unwrap();
        let r = reconstruct_full(&model, &Weights::new(vec![0.0; 3])).unwrap();
        assert_eq!(r.values(), model.mean());
    }

    #[test]
    fn projection_matches_normal_equations_oracle() {
        let ds = demo_dataset(9, 14, 23);
        let model = PcaModel::fit(&ds, Centering::Centered).unwrap();
        let target = ds.spectrum(2);
        let m = 5;
        let w = project(&model, target, m).unwrap();
        let basis = model.components().leading_columns(m);
        let centered: Vec<f64> = target
            .values()
            .iter()
            .zip(model.mean())
            .map(|(&v, &mu)| v - mu)
            .collect();
        let oracle = normal_equations_lstsq(&basis, &centered);
        for (a, b) in w.values().iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn in_sample_residual_is_monotone_in_order() {
        let ds = demo_dataset(10, 16, 77);
        let model = PcaModel::fit(&ds, Centering::Centered).unwrap();
        for s in ds.spectra() {
            let mut prev = f64::INFINITY;
            for m in 1..=16 {
                let w = project(&model, s, m).unwrap();
                let back = reconstruct_full(&model, &w).unwrap();
                let err: f64 = back
                    .values()
                    .iter()
                    .zip(s.values())
                    .map(|(&a, &b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                assert!(err <= prev + 1e-12, "m={m}: {err} > {prev}");
                prev = err;
            }
        }
    }

    #[test]
    fn band_selection_validates() {
        let g = grid(10);
        assert!(BandSelection::from_wavelengths(&g, &[]).is_err());
        assert!(BandSelection::from_wavelengths(&g, &[400.5]).is_err());
        assert!(BandSelection::from_wavelengths(&g, &[402.0, 401.0]).is_err());
        assert!(BandSelection::from_wavelengths(&g, &[402.0, 402.0]).is_err());
        let sel = BandSelection::from_wavelengths(&g, &[401.0, 405.0]).unwrap();
        assert_eq!(sel.indices(), &[1, 5]);
        assert!(BandSelection::full(&g).is_full_grid());
    }

    #[test]
    fn forward_simulated_weights_are_recovered() {
        let ds = demo_dataset(8, 20, 9);
        let model = PcaModel::fit(&ds, Centering::Centered).unwrap();
        let m = 4;
        let sel =
            BandSelection::from_wavelengths(ds.grid(), &[401.0, 404.0, 409.0, 413.0, 418.0])
                .unwrap();
        let w_true = Weights::new(vec![0.31, -0.12, 0.054, 0.007]);
        let spectrum = reconstruct_full(&model, &w_true).unwrap();
        let rho = spectrum.values_at(sel.indices());
        let sol = solve_weights_from_bands(&model, &sel, &rho, m).unwrap();
        assert_eq!(sol.effective_rank, m);
        assert!(!sol.is_rank_deficient());
        for (a, b) in sol.weights.values().iter().zip(w_true.values()) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn full_grid_selection_equals_projection_bitwise() {
        let ds = demo_dataset(6, 11, 41);
        for centering in [Centering::Centered, Centering::Uncentered] {
            let model = PcaModel::fit(&ds, centering).unwrap();
            let sel = BandSelection::full(ds.grid());
            let s = ds.spectrum(1);
            let sol = solve_weights_from_bands(&model, &sel, s.values(), 5).unwrap();
            let w = project(&model, s, 5).unwrap();
            assert_eq!(sol.weights, w);
            let via_bands = reconstruct_from_bands(&model, &sel, s.values(), 5).unwrap();
            let direct = reconstruct_full(&model, &w).unwrap();
            assert_eq!(via_bands.values(), direct.values());
        }
    }

    #[test]
    fn band_solve_matches_normal_equations_oracle() {
        let ds = demo_dataset(12, 24, 6);
        let model = PcaModel::fit(&ds, Centering::Centered).unwrap();
        let bands: Vec<f64> = vec![400.0, 403.0, 407.0, 410.0, 415.0, 419.0, 423.0];
        let sel = BandSelection::from_wavelengths(ds.grid(), &bands).unwrap();
        let m = 5;
        let rho = ds.spectrum(4).values_at(sel.indices());
        let sol = solve_weights_from_bands(&model, &sel, &rho, m).unwrap();
        let sub = model.components().select_rows(sel.indices()).leading_columns(m);
        let rhs: Vec<f64> = sel
            .indices()
            .iter()
            .zip(&rho)
            .map(|(&i, &v)| v - model.mean()[i])
            .collect();
        let oracle = normal_equations_lstsq(&sub, &rhs);
        for (a, b) in sol.weights.values().iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn under_determined_solve_is_rejected() {
        let ds = demo_dataset(6, 10, 2);
        let model = PcaModel::fit(&ds, Centering::Centered).unwrap();
        let sel = BandSelection::from_wavelengths(ds.grid(), &[401.0, 405.0]).unwrap();
        let rho = ds.spectrum(0).values_at(sel.indices());
        assert!(solve_weights_from_bands(&model, &sel, &rho, 3).is_err());
    }

    #[test]
    fn rank_deficient_solve_is_flagged() {
        // A zero covariance matrix yields identity components; bands that
        // miss the leading columns give a rank-zero submatrix.
        let g = grid(4);
        let a = Spectrum::new(g, vec![0.2, 0.3, 0.4, 0.5], "a").unwrap();
        let b = Spectrum::new(g, vec![0.2, 0.3, 0.4, 0.5], "b").unwrap();
        let ds = SpectralDataset::new("twin", g, vec![a, b]).unwrap();
        let model = PcaModel::fit(&ds, Centering::Centered).unwrap();
        let sel = BandSelection::from_wavelengths(&g, &[402.0, 403.0]).unwrap();
        let sol = solve_weights_from_bands(&model, &sel, &[0.4, 0.5], 2).unwrap();
        assert_eq!(sol.effective_rank, 0);
        assert!(sol.is_rank_deficient());
    }

    #[test]
    fn lincomb_recovers_exact_combination() {
        let g = grid(6);
        let mut spectra = Vec::new();
        for i in 0..5 {
            let x = 0.1 + 0.05 * i as f64;
            let y = 0.4 - 0.03 * i as f64;
            // Band 0 is exactly 0.5*band2 + 0.5*band4.
            let vals = vec![0.5 * x + 0.5 * y, 0.2, x, 0.3, y, 0.25];
            spectra.push(Spectrum::new(g, vals, format!("s{i}")).unwrap());
        }
        let ds = SpectralDataset::new("combo", g, spectra).unwrap();
        let source =
            BandSelection::from_wavelengths(&g, &[402.0, 403.0, 404.0, 405.0]).unwrap();
        let lc = fit_lincomb(&ds, &source, 400.0).unwrap();
        let expect = [0.5, 0.0, 0.5, 0.0];
        for (a, b) in lc.coeffs().iter().zip(&expect) {
            assert!((a - b).abs() < 1e-8, "{:?}", lc.coeffs());
        }
    }

    #[test]
    fn lincomb_with_duplicated_target_column_is_unit_vector() {
        // A source column identical to the target is representable with a
        // single unit coefficient and zero residual.
        let g = grid(5);
        let mut spectra = Vec::new();
        for i in 0..6 {
            let t = 0.1 + 0.07 * i as f64;
            let vals = vec![t, t, 0.3 + 0.02 * i as f64, 0.5 - 0.04 * i as f64, 0.2];
            spectra.push(Spectrum::new(g, vals, format!("s{i}")).unwrap());
        }
        let ds = SpectralDataset::new("dup", g, spectra).unwrap();
        let source = BandSelection::from_wavelengths(&g, &[401.0, 402.0, 403.0]).unwrap();
        let lc = fit_lincomb(&ds, &source, 400.0).unwrap();
        let expect = [1.0, 0.0, 0.0];
        for (i, (a, b)) in lc.coeffs().iter().zip(&expect).enumerate() {
            assert!((a - b).abs() < 1e-8, "coeff {i}: {a}");
        }
        let residual: f64 = ds
            .spectra()
            .iter()
            .map(|s| {
                let pred = apply_lincomb(&lc, &s.values_at(source.indices())).unwrap();
                (pred - s.values()[0]).abs()
            })
            .fold(0.0, f64::max);
        assert!(residual < 1e-10);
    }

    #[test]
    fn lincomb_rejects_bad_configuration() {
        let ds = demo_dataset(6, 8, 19);
        let source =
            BandSelection::from_wavelengths(ds.grid(), &[401.0, 403.0, 405.0]).unwrap();
        // Target among sources.
        assert!(fit_lincomb(&ds, &source, 403.0).is_err());
        // Target off-grid.
        assert!(fit_lincomb(&ds, &source, 402.5).is_err());
    }

    #[test]
    fn apply_lincomb_basics() {
        let g = grid(5);
        let s = Spectrum::new(g, vec![0.1, 0.2, 0.3, 0.4, 0.5], "s").unwrap();
        let ds = SpectralDataset::new(
            "d",
            g,
            vec![
                s,
                Spectrum::new(g, vec![0.15, 0.22, 0.31, 0.39, 0.52], "t").unwrap(),
                Spectrum::new(g, vec![0.12, 0.26, 0.35, 0.41, 0.48], "u").unwrap(),
                Spectrum::new(g, vec![0.18, 0.21, 0.28, 0.44, 0.51], "v").unwrap(),
            ],
        )
        .unwrap();
        let source =
            BandSelection::from_wavelengths(&g, &[401.0, 402.0, 403.0, 404.0]).unwrap();
        let lc = fit_lincomb(&ds, &source, 400.0).unwrap();
        assert!(apply_lincomb(&lc, &[0.1, 0.2, 0.3]).is_err());

        // Fixed coefficients against an explicit hand dot product.
        let coeffs = [0.6868, 0.2354, -0.8808, 0.9528];
        let rho = [0.42, 0.31, 0.05, 0.47];
        let by_hand =
            0.6868 * 0.42 + 0.2354 * 0.31 - 0.8808 * 0.05 + 0.9528 * 0.47;
        let manual = LinCombModel {
            source_bands: source,
            target_nm: 400.0,
            target_index: 0,
            coeffs: coeffs.to_vec(),
            effective_rank: 4,
        };
        let got = apply_lincomb(&manual, &rho).unwrap();
        assert!((got - by_hand).abs() < 1e-15);
    }
}
